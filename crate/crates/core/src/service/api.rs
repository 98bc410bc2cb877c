use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use super::store::{SessionHeader, Store, TrialHandle};
use super::SCHEMA_VERSION;
use crate::design::{Action, Boundaries, DoseGrid, DoseLevel, TrialDesign};
use crate::drm::{CoefficientPrior, DoseResponseModel, PointEstimate};
use crate::error::Error;
use crate::estimate::{
    Admissibility, DrmEstimator, MtdEstimator, PavaEstimator, PosteriorEngine, Selection,
};
use crate::link::Link;
use crate::trial::{CohortEvent, CohortOutcome, TrialState, TrialStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRequest {
    pub phi: f64,
    #[serde(default)]
    pub phi1: Option<f64>,
    #[serde(default)]
    pub phi2: Option<f64>,
    #[serde(default)]
    pub cohort_size: Option<u32>,
    #[serde(default)]
    pub n_cohorts: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    #[default]
    Pava,
    Drm,
    Both,
}

/// Terminal estimator attached to a trial. A DRM needs `link` and `prior`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub method: SelectionMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<CoefficientPrior>,
    #[serde(default)]
    pub point: PointEstimate,
    #[serde(default)]
    pub admissible: Admissibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTrialRequest {
    pub design: DesignRequest,
    pub doses: Vec<f64>,
    /// One-based reference dose.
    pub ref_index: usize,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    schema_version: u32,
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
}

pub(super) struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                schema_version: SCHEMA_VERSION,
                error,
                message: message.into(),
                fields: Vec::new(),
            },
        }
    }

    fn validation(fields: Vec<FieldError>) -> Self {
        let mut e = Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "validation",
            "request failed validation",
        );
        e.body.fields = fields;
        e
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no trial '{id}'"),
        )
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            message.to_string(),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::validation(vec![FieldError {
            field: "body".into(),
            message: r.body_text(),
        }])
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn field(field: &str, e: impl std::fmt::Display) -> FieldError {
    FieldError {
        field: field.into(),
        message: e.to_string(),
    }
}

impl CreateTrialRequest {
    /// Builds the validated session pieces or every field-level problem found.
    pub fn validate(&self) -> Result<(TrialDesign, DoseGrid), Vec<FieldError>> {
        let mut errors = Vec::new();
        let d = &self.design;
        let mut builder = TrialDesign::builder(d.phi);
        match (d.phi1, d.phi2) {
            (Some(p1), Some(p2)) => builder = builder.probes(p1, p2),
            (None, None) => {}
            _ => errors.push(field("design.phi1", "set both phi1 and phi2 or neither")),
        }
        let defaults = TrialDesign::new(0.3).expect("default design");
        builder = builder.cohorts(
            d.cohort_size.unwrap_or(defaults.cohort_size()),
            d.n_cohorts.unwrap_or(defaults.n_cohorts()),
        );
        let design = builder
            .build()
            .map_err(|e| errors.push(field("design", e)))
            .ok();

        let grid = match DoseLevel::from_number(self.ref_index) {
            None => {
                errors.push(field("ref_index", "must be a one-based dose number"));
                None
            }
            Some(r) => DoseGrid::new(self.doses.clone(), r)
                .map_err(|e| errors.push(field("doses", e)))
                .ok(),
        };

        let est = &self.estimator;
        if matches!(est.method, SelectionMethod::Drm | SelectionMethod::Both) {
            if est.link.is_none() {
                errors.push(field("estimator.link", "required for drm"));
            }
            match &est.prior {
                None => errors.push(field("estimator.prior", "required for drm")),
                Some(p) => {
                    if let Err(e) = p.validate() {
                        errors.push(field("estimator.prior", e));
                    }
                }
            }
        }
        match (design, grid) {
            (Some(design), Some(grid)) if errors.is_empty() => Ok((design, grid)),
            _ => Err(errors),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateTrialResponse {
    pub schema_version: u32,
    pub trial_id: String,
    pub boundaries: Boundaries,
    /// False when an earlier request with the same idempotency key created it.
    pub created: bool,
    pub trial: TrialView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialView {
    pub schema_version: u32,
    pub trial_id: String,
    pub design: TrialDesign,
    pub grid: DoseGrid,
    pub estimator: EstimatorConfig,
    pub status: TrialStatus,
    pub current_dose: DoseLevel,
    pub cohorts_completed: u32,
    pub n: Vec<u32>,
    pub m: Vec<u32>,
    pub eliminated: Vec<bool>,
}

impl TrialView {
    fn new(header: &SessionHeader, state: &TrialState) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            trial_id: header.trial_id.clone(),
            design: header.design.clone(),
            grid: header.grid.clone(),
            estimator: header.estimator.clone(),
            status: state.status,
            current_dose: state.current_dose,
            cohorts_completed: state.cohorts_completed(),
            n: state.n.clone(),
            m: state.m.clone(),
            eliminated: state.eliminated.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortRequest {
    /// Dose the cohort was treated at; must equal the current dose.
    pub dose_level: DoseLevel,
    pub n: u32,
    pub dlt: u32,
    /// Expected one-based position of this cohort. A mismatch means the
    /// client is behind and the request is rejected with a conflict.
    #[serde(default)]
    pub cohort_index: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortResponse {
    pub schema_version: u32,
    pub trial_id: String,
    pub cohort_index: u32,
    pub decision: Action,
    pub next_dose: DoseLevel,
    pub eliminations: Vec<DoseLevel>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventsResponse {
    pub schema_version: u32,
    pub trial_id: String,
    pub events: Vec<CohortEvent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResponse {
    pub schema_version: u32,
    pub trial_id: String,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pava: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drm: Option<Selection>,
}

#[derive(Debug, Deserialize)]
pub(super) struct SelectionQuery {
    method: Option<SelectionMethod>,
}

fn lookup(store: &Store, id: &str) -> ApiResult<Arc<TrialHandle>> {
    store.get(id).ok_or_else(|| ApiError::not_found(id))
}

pub(super) async fn create_trial(
    State(store): State<Arc<Store>>,
    headers: HeaderMap,
    body: Result<Json<CreateTrialRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CreateTrialResponse>)> {
    let Json(req) = body?;
    let (design, grid) = req.validate().map_err(ApiError::validation)?;
    let key = match headers.get("idempotency-key") {
        None => None,
        Some(v) => Some(
            v.to_str()
                .map_err(|_| {
                    ApiError::validation(vec![field("Idempotency-Key", "must be visible ASCII")])
                })?
                .to_owned(),
        ),
    };
    let header = SessionHeader {
        trial_id: String::new(),
        design,
        grid,
        estimator: req.estimator,
        idempotency_key: key,
    };
    let (handle, created) = store.create(header).map_err(ApiError::internal)?;
    let state = handle.snapshot();
    let status = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((
        status,
        Json(CreateTrialResponse {
            schema_version: SCHEMA_VERSION,
            trial_id: handle.header.trial_id.clone(),
            boundaries: handle.header.design.boundaries(),
            created,
            trial: TrialView::new(&handle.header, &state),
        }),
    ))
}

pub(super) async fn get_trial(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> ApiResult<Json<TrialView>> {
    let handle = lookup(&store, &id)?;
    Ok(Json(TrialView::new(&handle.header, &handle.snapshot())))
}

pub(super) async fn get_events(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> ApiResult<Json<EventsResponse>> {
    let handle = lookup(&store, &id)?;
    Ok(Json(EventsResponse {
        schema_version: SCHEMA_VERSION,
        trial_id: id,
        events: handle.snapshot().events.clone(),
    }))
}

pub(super) async fn post_cohort(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<CohortRequest>, JsonRejection>,
) -> ApiResult<Json<CohortResponse>> {
    let Json(req) = body?;
    let handle = lookup(&store, &id)?;
    let design = &handle.header.design;
    if req.n == 0 || req.n > design.cohort_size() {
        return Err(ApiError::validation(vec![field(
            "n",
            format!("must be in 1..={}", design.cohort_size()),
        )]));
    }
    if req.dlt > req.n {
        return Err(ApiError::validation(vec![field(
            "dlt",
            "must not exceed n",
        )]));
    }

    let _guard = handle.mutation.lock().await;
    let current = handle.snapshot();
    if current.status != TrialStatus::Running {
        return Err(ApiError::conflict(format!("trial is {}", current.status)));
    }
    let expected = current.cohorts_completed() + 1;
    if req.cohort_index.is_some_and(|i| i != expected) {
        return Err(ApiError::conflict(format!("next cohort is {expected}")));
    }
    if req.dose_level != current.current_dose {
        return Err(ApiError::conflict(format!(
            "cohort reported at dose {} but the current dose is {}",
            req.dose_level, current.current_dose
        )));
    }
    let mut next = (*current).clone();
    let decision = next
        .apply_cohort(
            design,
            CohortOutcome {
                n: req.n,
                dlt: req.dlt,
            },
        )
        .map_err(|e| match e {
            Error::NotRunning(_) => ApiError::conflict(e.to_string()),
            other => ApiError::validation(vec![field("body", other)]),
        })?;
    let event = next.events.last().expect("event just applied").clone();
    let status = next.status;
    store
        .commit(&handle, &event, next)
        .map_err(ApiError::internal)?;
    Ok(Json(CohortResponse {
        schema_version: SCHEMA_VERSION,
        trial_id: id,
        cohort_index: event.cohort_index,
        decision: decision.action,
        next_dose: decision.next_dose,
        eliminations: decision.eliminations,
        status,
    }))
}

pub(super) async fn get_selection(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<SelectionQuery>,
) -> ApiResult<Json<SelectionResponse>> {
    let handle = lookup(&store, &id)?;
    let state = handle.snapshot();
    if state.status == TrialStatus::Running {
        return Err(ApiError::conflict(
            "selection is available once the trial has finished",
        ));
    }
    let header = &handle.header;
    let method = q.method.unwrap_or(header.estimator.method);
    let wants = |m: SelectionMethod| method == m || method == SelectionMethod::Both;

    let pava = if wants(SelectionMethod::Pava) {
        Some(
            PavaEstimator
                .select(&state, &header.design)
                .map_err(ApiError::internal)?,
        )
    } else {
        None
    };
    let drm = if wants(SelectionMethod::Drm) {
        let (Some(link), Some(prior)) = (header.estimator.link, header.estimator.prior) else {
            return Err(ApiError::validation(vec![field(
                "method",
                "this trial has no dose-response model configured",
            )]));
        };
        let estimator = DrmEstimator::new(DoseResponseModel::new(link, header.grid.clone(), prior))
            .with_engine(PosteriorEngine::default())
            .with_point(header.estimator.point)
            .with_admissibility(header.estimator.admissible);
        let design = header.design.clone();
        let snapshot = state.clone();
        let sel = tokio::task::spawn_blocking(move || estimator.select(&snapshot, &design))
            .await
            .map_err(ApiError::internal)?
            .map_err(ApiError::internal)?;
        Some(sel)
    } else {
        None
    };
    Ok(Json(SelectionResponse {
        schema_version: SCHEMA_VERSION,
        trial_id: id,
        status: state.status,
        pava,
        drm,
    }))
}
