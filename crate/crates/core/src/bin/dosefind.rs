use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use dosefind::design::{
    decision_table, DoseGrid, DoseLevel, TrialDesign, DEFAULT_ELIM_MIN_N, DEFAULT_ELIM_THRESHOLD,
};
use dosefind::drm::{DoseResponseModel, GridSpec, PointEstimate};
use dosefind::elicit::{elicit_prior, ElicitationInput, OptimizeOptions, DEFAULT_LEVELS};
use dosefind::estimate::{
    Admissibility, DrmEstimator, MtdEstimator, PavaEstimator, PosteriorEngine,
};
use dosefind::link::Link;
use dosefind::mcmc::McmcConfig;
use dosefind::sweep::SweepConfig;
use dosefind::trial::{CohortEvent, CohortOutcome, TrialState};

/// Version of every CSV and JSON layout this tool writes.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "dosefind",
    version,
    about = "BOIN dose-finding: rules, priors, simulation and MTD selection"
)]
struct Cli {
    /// Seed for elicitation, simulation and MCMC; overrides config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, written atomically. Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "DOSEFIND_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Escalation and de-escalation boundaries with the per-n decision table.
    Boundaries {
        #[command(flatten)]
        design: DesignArgs,
        /// Largest sample size tabulated; defaults to the maximum enrollment.
        #[arg(long)]
        max_n: Option<u32>,
    },
    /// Dose-response curves for plotting.
    Linkcurves(LinkcurveArgs),
    /// Derives a coefficient prior from two endpoint probabilities.
    Elicit(ElicitArgs),
    /// Runs a simulation sweep described by a TOML or JSON file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the replicate count in the config.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Selects the MTD for a finished trial.
    Select(SelectArgs),
    /// Applies the decision rule to one dose, or replays a cohort log.
    Decide {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, requires = "m", conflicts_with = "events")]
        n: Option<u32>,
        #[arg(long, requires = "n")]
        m: Option<u32>,
        /// JSON cohort log: a list of `{n, dlt}` outcomes or logged events.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Number of dose levels for a replay.
        #[arg(long, default_value_t = 6)]
        doses: usize,
    },
    /// Serves the trial-conduct HTTP API.
    #[cfg(feature = "server")]
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Args, Clone)]
struct DesignArgs {
    #[arg(long, default_value_t = 0.3)]
    phi: f64,
    #[arg(long, requires = "phi2")]
    phi1: Option<f64>,
    #[arg(long, requires = "phi1")]
    phi2: Option<f64>,
    /// Patients per cohort.
    #[arg(long, default_value_t = 3)]
    cohort: u32,
    #[arg(long, default_value_t = 12)]
    n_cohorts: u32,
}

impl DesignArgs {
    fn build(&self) -> Result<TrialDesign> {
        let mut b = TrialDesign::builder(self.phi)
            .cohorts(self.cohort, self.n_cohorts)
            .elimination(DEFAULT_ELIM_THRESHOLD, DEFAULT_ELIM_MIN_N);
        if let (Some(p1), Some(p2)) = (self.phi1, self.phi2) {
            b = b.probes(p1, p2);
        }
        Ok(b.build()?)
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 30.0, 45.0, 60.0, 80.0])]
    doses: Vec<f64>,
    /// One-based reference dose d*.
    #[arg(long, default_value_t = 3)]
    ref_index: usize,
}

impl GridArgs {
    fn build(&self) -> Result<DoseGrid> {
        let r = DoseLevel::from_number(self.ref_index).context("--ref-index is one-based")?;
        Ok(DoseGrid::new(self.doses.clone(), r)?)
    }
}

#[derive(Args)]
struct LinkcurveArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [Link::Logit, Link::LogLog, Link::CLogLog])]
    links: Vec<Link>,
    /// Intercept. Mutually exclusive with --anchor.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "anchor")]
    beta0: Option<f64>,
    /// Probability at d*; sets each link's intercept to g(anchor).
    #[arg(long)]
    anchor: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta1: f64,
    #[arg(long, default_value_t = 30.0)]
    ref_dose: f64,
    #[arg(long, default_value_t = 1.0)]
    dose_min: f64,
    #[arg(long, default_value_t = 100.0)]
    dose_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Explicit doses; replaces the log-spaced range.
    #[arg(long, value_delimiter = ',')]
    doses: Option<Vec<f64>>,
}

#[derive(Args)]
struct ElicitArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.3)]
    phi: f64,
    #[arg(long, default_value = "logit")]
    link: Link,
    #[arg(long, default_value_t = 0.05)]
    p1: f64,
    #[arg(long, default_value_t = 0.21)]
    pj: f64,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    var_floor: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    Pava,
    Drm,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Grid,
    Mcmc,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, value_enum, default_value = "pava")]
    method: SelectMethod,
    /// Trial state, event log or `{n, m}` counts as JSON.
    #[arg(long)]
    data: PathBuf,
    /// Model JSON with the prior, e.g. from `elicit`.
    #[arg(long, required_if_eq("method", "drm"))]
    prior: Option<PathBuf>,
    /// Must agree with the prior file when given.
    #[arg(long)]
    link: Option<Link>,
    #[arg(long, value_enum, default_value = "grid")]
    engine: EngineArg,
    #[arg(long, value_enum, default_value = "mean")]
    point: PointArg,
    #[arg(long, value_enum, default_value = "not-eliminated")]
    admissible: AdmissibleArg,
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    #[arg(long, default_value_t = 10_500)]
    mcmc_iter: usize,
    #[arg(long, default_value_t = 500)]
    mcmc_burn: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointArg {
    Mean,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdmissibleArg {
    NotEliminated,
    Treated,
}

/// Accepted layouts for `--data`.
#[derive(Deserialize)]
#[serde(untagged)]
enum TrialInput {
    State(TrialState),
    Events { events: Vec<CohortEvent> },
    Counts { n: Vec<u32>, m: Vec<u32> },
}

impl TrialInput {
    fn into_state(self, design: &TrialDesign, n_doses: usize) -> Result<TrialState> {
        Ok(match self {
            TrialInput::State(s) => {
                if !s.events.is_empty() {
                    let replayed = TrialState::replay(design, s.n_doses(), &s.events)?;
                    ensure!(
                        replayed == s,
                        "trial state does not match its own event log"
                    );
                }
                s
            }
            TrialInput::Events { events } => TrialState::replay(design, n_doses, &events)?,
            TrialInput::Counts { n, m } => TrialState::from_counts(n, m, design)?,
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CohortLog {
    Events(Vec<CohortEvent>),
    Outcomes(Vec<CohortOutcome>),
    Wrapped { events: Vec<CohortEvent> },
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        ensure!(t > 0, "thread count must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }
    let out = Output {
        path: cli.out.clone(),
    };
    match &cli.command {
        Command::Boundaries { design, max_n } => boundaries(&cli, &out, design, *max_n),
        Command::Linkcurves(args) => linkcurves(&cli, &out, args),
        Command::Elicit(args) => elicit(&cli, &out, args),
        Command::Simulate { config, reps } => simulate(&cli, &out, config, *reps),
        Command::Select(args) => select(&cli, &out, args),
        Command::Decide {
            design,
            n,
            m,
            events,
            doses,
        } => decide(&cli, &out, design, *n, *m, events.as_deref(), *doses),
        #[cfg(feature = "server")]
        Command::Serve {
            port,
            data_dir,
            host,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            let addr = std::net::SocketAddr::new(*host, *port);
            eprintln!("listening on http://{addr}");
            rt.block_on(dosefind::service::serve(addr, data_dir.clone()))?;
            Ok(())
        }
    }
}

struct Output {
    path: Option<PathBuf>,
}

impl Output {
    /// Writes to a temp file beside the target and renames it into place.
    fn write(&self, bytes: &[u8]) -> Result<()> {
        match &self.path {
            None => {
                std::io::stdout().write_all(bytes)?;
                Ok(())
            }
            Some(path) => {
                let dir = match path.parent() {
                    Some(p) if !p.as_os_str().is_empty() => p,
                    _ => Path::new("."),
                };
                let mut tmp = tempfile::NamedTempFile::new_in(dir)
                    .with_context(|| format!("creating a temp file in {}", dir.display()))?;
                tmp.write_all(bytes)?;
                tmp.as_file().sync_all()?;
                tmp.persist(path)
                    .with_context(|| format!("writing {}", path.display()))?;
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(s.as_bytes())
    }

    fn csv(&self, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        self.write(&w.into_inner()?)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn boundaries(cli: &Cli, out: &Output, args: &DesignArgs, max_n: Option<u32>) -> Result<()> {
    let design = args.build()?;
    let max_n = max_n.unwrap_or(design.max_enrollment());
    let rows = decision_table(&design, max_n)?;
    let b = design.boundaries();
    if cli.format == Some(Format::Json) {
        return out.json(&json!({
            "schema_version": SCHEMA_VERSION,
            "design": design,
            "lambda_e": b.escalate,
            "lambda_d": b.deescalate,
            "table": rows,
        }));
    }
    let sv = SCHEMA_VERSION.to_string();
    let body = rows
        .iter()
        .map(|r| {
            vec![
                sv.clone(),
                format!("{:.6}", b.escalate),
                format!("{:.6}", b.deescalate),
                r.n.to_string(),
                opt(r.escalate_max),
                r.deescalate_min.to_string(),
                opt(r.eliminate_min),
            ]
        })
        .collect();
    out.csv(
        &[
            "schema_version",
            "lambda_e",
            "lambda_d",
            "n",
            "escalate_max",
            "deescalate_min",
            "eliminate_min",
        ],
        body,
    )
}

fn linkcurves(cli: &Cli, out: &Output, a: &LinkcurveArgs) -> Result<()> {
    ensure!(a.points >= 2, "--points must be at least 2");
    ensure!(
        a.dose_min > 0.0 && a.dose_max > a.dose_min && a.ref_dose > 0.0,
        "doses must be positive with --dose-min < --dose-max"
    );
    let intercept = |link: Link| -> Result<f64> {
        match (a.beta0, a.anchor) {
            (Some(b), _) => Ok(b),
            (None, Some(p)) => {
                ensure!(p > 0.0 && p < 1.0, "--anchor must lie in (0, 1)");
                Ok(link.forward(p))
            }
            (None, None) => bail!("give --beta0 or --anchor"),
        }
    };
    let slope = a.beta1.exp();
    let doses = match &a.doses {
        Some(d) => {
            ensure!(d.iter().all(|&x| x > 0.0), "--doses must be positive");
            d.clone()
        }
        None => {
            let step = (a.dose_max.ln() - a.dose_min.ln()) / (a.points - 1) as f64;
            (0..a.points)
                .map(|i| (a.dose_min.ln() + step * i as f64).exp())
                .collect()
        }
    };
    let mut records = Vec::new();
    for &link in &a.links {
        let b0 = intercept(link)?;
        for &dose in &doses {
            let x = (dose / a.ref_dose).ln();
            records.push((link, b0, dose, x, link.inverse(b0 + slope * x)));
        }
    }
    if cli.format == Some(Format::Json) {
        let rows: Vec<_> = records
            .iter()
            .map(|(l, b0, d, x, p)| json!({"link": l, "beta0": b0, "dose": d, "log_ratio": x, "pi": p}))
            .collect();
        return out.json(&json!({"schema_version": SCHEMA_VERSION, "beta1": a.beta1, "ref_dose": a.ref_dose, "curves": rows}));
    }
    let sv = SCHEMA_VERSION.to_string();
    let rows = records
        .into_iter()
        .map(|(l, b0, d, x, p)| {
            vec![
                sv.clone(),
                l.to_string(),
                b0.to_string(),
                a.beta1.to_string(),
                d.to_string(),
                x.to_string(),
                p.to_string(),
            ]
        })
        .collect();
    out.csv(
        &[
            "schema_version",
            "link",
            "beta0",
            "beta1",
            "dose",
            "log_ratio",
            "pi",
        ],
        rows,
    )
}

fn elicit(cli: &Cli, out: &Output, a: &ElicitArgs) -> Result<()> {
    let grid = a.grid.build()?;
    let mut input = ElicitationInput::new(grid.clone(), a.link).with_probabilities(a.p1, a.pj);
    input.phi = a.phi;
    input.levels = a.levels.clone().unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    let defaults = OptimizeOptions::default();
    let options = OptimizeOptions {
        restarts: a.restarts.unwrap_or(defaults.restarts),
        var_floor: a.var_floor.unwrap_or(defaults.var_floor),
        seed: cli.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let (elicitation, fit) = elicit_prior(&input, &options)?;
    let model = DoseResponseModel::new(a.link, grid, fit.prior);
    // flat model fields first so the file loads as a prior
    let mut doc = serde_json::to_value(&model)?;
    let obj = doc.as_object_mut().expect("model serializes to an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert(
        "elicitation".into(),
        json!({
            "phi": a.phi,
            "p1": a.p1,
            "pj": a.pj,
            "levels": input.levels,
            "medians": elicitation.medians,
            "endpoint_betas": [elicitation.betas.first(), elicitation.betas.last()],
            "anchor": {"beta0": elicitation.anchor_beta0, "beta1": elicitation.anchor_beta1},
            "targets": fit.targets.values,
            "achieved": fit.achieved,
            "loss": fit.loss,
            "restart_losses": fit.restart_losses,
            "options": options,
        }),
    );
    out.json(&doc)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn simulate(cli: &Cli, out: &Output, path: &Path, reps: Option<usize>) -> Result<()> {
    let text = read_text(path)?;
    let mut config: SweepConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(r) = reps {
        config.reps = r;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let sweep = config.resolve(base)?;
    let reports = sweep.run()?;

    if cli.format == Some(Format::Json) {
        let priors: Vec<_> = sweep
            .priors
            .iter()
            .map(|(l, p)| json!({"method": l, "prior": p}))
            .collect();
        return out.json(&json!({
            "schema_version": SCHEMA_VERSION,
            "design": sweep.design,
            "grid": sweep.grid,
            "reps": sweep.sim.reps,
            "seed": sweep.sim.master_seed,
            "independent_paths": sweep.sim.independent_paths,
            "priors": priors,
            "reports": reports,
        }));
    }
    let sv = SCHEMA_VERSION.to_string();
    let mut rows = Vec::new();
    for r in &reports {
        let scenario = sweep
            .scenarios
            .iter()
            .find(|s| s.name == r.scenario)
            .expect("report scenario");
        for d in 0..r.selection.len() {
            rows.push(vec![
                sv.clone(),
                r.scenario.clone(),
                r.method.clone(),
                (d + 1).to_string(),
                scenario.true_probs[d].to_string(),
                u8::from(scenario.true_mtd.index() == d).to_string(),
                format!("{:.4}", r.selection[d]),
                format!("{:.4}", r.mean_n[d]),
                format!("{:.4}", r.mean_m[d]),
                format!("{:.4}", r.none),
                format!("{:.4}", r.overdose),
                format!("{:.4}", r.correct),
                r.reps.to_string(),
                r.seed.to_string(),
            ]);
        }
    }
    out.csv(
        &[
            "schema_version",
            "scenario",
            "method",
            "dose",
            "true_prob",
            "is_true_mtd",
            "selection",
            "mean_n",
            "mean_dlt",
            "none",
            "overdose",
            "correct",
            "reps",
            "seed",
        ],
        rows,
    )
}

fn load_model(path: &Path) -> Result<DoseResponseModel> {
    serde_json::from_str(&read_text(path)?)
        .with_context(|| format!("parsing model {}", path.display()))
}

fn select(cli: &Cli, out: &Output, a: &SelectArgs) -> Result<()> {
    let design = a.design.build()?;
    let input: TrialInput = serde_json::from_str(&read_text(&a.data)?).with_context(|| {
        format!(
            "{}: expected a trial state, an event log or n/m counts",
            a.data.display()
        )
    })?;
    let (selection, extra) = match a.method {
        SelectMethod::Pava => {
            let state = input.into_state(&design, 6)?;
            (
                PavaEstimator.select(&state, &design)?,
                json!({"method": "pava"}),
            )
        }
        SelectMethod::Drm => {
            let model = load_model(a.prior.as_deref().expect("required by clap"))?;
            if let Some(link) = a.link {
                ensure!(
                    link == model.link(),
                    "--link {link} disagrees with the prior file ({})",
                    model.link()
                );
            }
            let state = input.into_state(&design, model.grid().len())?;
            ensure!(
                state.n_doses() == model.grid().len(),
                "data has {} doses but the model grid has {}",
                state.n_doses(),
                model.grid().len()
            );
            let engine = match a.engine {
                EngineArg::Grid => PosteriorEngine::Grid(GridSpec {
                    points: a.grid_points,
                    ..GridSpec::default()
                }),
                EngineArg::Mcmc => PosteriorEngine::Mcmc(McmcConfig {
                    n_iter: a.mcmc_iter,
                    n_burn: a.mcmc_burn,
                    seed: cli.seed.unwrap_or(McmcConfig::default().seed),
                }),
            };
            let point = match a.point {
                PointArg::Mean => PointEstimate::Mean,
                PointArg::Median => PointEstimate::Median,
            };
            let admissibility = match a.admissible {
                AdmissibleArg::NotEliminated => Admissibility::NotEliminated,
                AdmissibleArg::Treated => Admissibility::Treated,
            };
            let est = DrmEstimator::new(model.clone())
                .with_engine(engine)
                .with_point(point)
                .with_admissibility(admissibility);
            let diagnostics = est.posterior(&state)?.diagnostics;
            let sel = est.select(&state, &design)?;
            (
                sel,
                json!({"method": "drm", "link": model.link(), "prior": model.prior(), "engine": engine, "point": point, "admissible": admissibility, "diagnostics": diagnostics}),
            )
        }
    };
    if cli.format == Some(Format::Csv) {
        let sv = SCHEMA_VERSION.to_string();
        let rows = (0..selection.estimates.len())
            .map(|d| {
                vec![
                    sv.clone(),
                    (d + 1).to_string(),
                    opt(selection.estimates[d]),
                    selection.admissible[d].to_string(),
                    u8::from(selection.mtd.is_some_and(|m| m.index() == d)).to_string(),
                ]
            })
            .collect();
        return out.csv(
            &[
                "schema_version",
                "dose",
                "estimate",
                "admissible",
                "selected",
            ],
            rows,
        );
    }
    out.json(&json!({
        "schema_version": SCHEMA_VERSION,
        "mtd": selection.mtd,
        "estimates": selection.estimates,
        "admissible": selection.admissible,
        "estimator": extra,
    }))
}

fn decide(
    cli: &Cli,
    out: &Output,
    args: &DesignArgs,
    n: Option<u32>,
    m: Option<u32>,
    events: Option<&Path>,
    doses: usize,
) -> Result<()> {
    let design = args.build()?;
    if let (Some(n), Some(m)) = (n, m) {
        ensure!(m <= n, "--m must not exceed --n");
        let action = dosefind::decide(n, m, &design)?;
        let eliminate = design.is_eliminated(n, m);
        if cli.format == Some(Format::Csv) {
            return out.csv(
                &["schema_version", "n", "m", "action", "eliminate"],
                vec![vec![
                    SCHEMA_VERSION.to_string(),
                    n.to_string(),
                    m.to_string(),
                    action.to_string(),
                    eliminate.to_string(),
                ]],
            );
        }
        return out.json(&json!({"schema_version": SCHEMA_VERSION, "n": n, "m": m, "action": action, "eliminate": eliminate}));
    }
    let Some(path) = events else {
        bail!("give --n and --m, or --events");
    };
    let log: CohortLog = serde_json::from_str(&read_text(path)?).with_context(|| {
        format!(
            "{}: expected a list of cohort outcomes or events",
            path.display()
        )
    })?;
    let state = match log {
        CohortLog::Events(ev) | CohortLog::Wrapped { events: ev } => {
            TrialState::replay(&design, doses, &ev)?
        }
        CohortLog::Outcomes(outcomes) => {
            let mut state = TrialState::new(doses)?;
            for o in outcomes {
                state.apply_cohort(&design, o)?;
            }
            state
        }
    };
    if cli.format == Some(Format::Csv) {
        let sv = SCHEMA_VERSION.to_string();
        let rows = state
            .events
            .iter()
            .map(|e| {
                vec![
                    sv.clone(),
                    e.cohort_index.to_string(),
                    e.dose.to_string(),
                    e.n.to_string(),
                    e.dlt.to_string(),
                    e.decision.to_string(),
                    e.next_dose.to_string(),
                    e.eliminations
                        .iter()
                        .map(|d| d.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                ]
            })
            .collect();
        return out.csv(
            &[
                "schema_version",
                "cohort",
                "dose",
                "n",
                "dlt",
                "decision",
                "next_dose",
                "eliminated",
            ],
            rows,
        );
    }
    out.json(&json!({"schema_version": SCHEMA_VERSION, "state": state}))
}
