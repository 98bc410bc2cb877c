use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::api::EstimatorConfig;
use super::SCHEMA_VERSION;
use crate::design::{DoseGrid, TrialDesign};
use crate::trial::{CohortEvent, TrialState};

/// Immutable part of a trial session, written as the first log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub trial_id: String,
    pub design: TrialDesign,
    pub grid: DoseGrid,
    pub estimator: EstimatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogLine {
    Created {
        schema_version: u32,
        #[serde(flatten)]
        header: SessionHeader,
    },
    Cohort {
        schema_version: u32,
        event: CohortEvent,
    },
}

pub struct TrialHandle {
    pub header: SessionHeader,
    /// Serializes mutations of this trial.
    pub mutation: tokio::sync::Mutex<()>,
    snapshot: RwLock<Arc<TrialState>>,
}

impl TrialHandle {
    pub fn snapshot(&self) -> Arc<TrialState> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, state: TrialState) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(state);
    }
}

pub struct Store {
    dir: PathBuf,
    trials: RwLock<HashMap<String, Arc<TrialHandle>>>,
    /// Idempotency key to trial id; the lock also serializes creation.
    keys: Mutex<HashMap<String, String>>,
}

fn invalid(path: &Path, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("{}: {msg}", path.display()),
    )
}

impl Store {
    pub fn open(dir: PathBuf) -> io::Result<Self> {
        fs::create_dir_all(&dir)?;
        let mut trials = HashMap::new();
        let mut keys = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let (header, state) = load(&path)?;
            if let Some(k) = &header.idempotency_key {
                keys.insert(k.clone(), header.trial_id.clone());
            }
            let id = header.trial_id.clone();
            trials.insert(
                id,
                Arc::new(TrialHandle {
                    header,
                    mutation: tokio::sync::Mutex::new(()),
                    snapshot: RwLock::new(Arc::new(state)),
                }),
            );
        }
        Ok(Self {
            dir,
            trials: RwLock::new(trials),
            keys: Mutex::new(keys),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn get(&self, id: &str) -> Option<Arc<TrialHandle>> {
        self.trials.read().expect("trials lock").get(id).cloned()
    }

    /// Creates a trial, or returns the existing id for a repeated key.
    /// The boolean is true when a new trial was written.
    pub fn create(&self, mut header: SessionHeader) -> io::Result<(Arc<TrialHandle>, bool)> {
        let mut keys = self.keys.lock().expect("keys lock");
        if let Some(existing) = header.idempotency_key.as_ref().and_then(|k| keys.get(k)) {
            if let Some(handle) = self.get(existing) {
                return Ok((handle, false));
            }
        }
        header.trial_id = uuid::Uuid::new_v4().simple().to_string();
        let line = serde_json::to_string(&LogLine::Created {
            schema_version: SCHEMA_VERSION,
            header: header.clone(),
        })
        .map_err(io::Error::other)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        writeln!(tmp, "{line}")?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(&header.trial_id))
            .map_err(|e| e.error)?;

        let state = TrialState::new(header.grid.len()).map_err(io::Error::other)?;
        let handle = Arc::new(TrialHandle {
            header: header.clone(),
            mutation: tokio::sync::Mutex::new(()),
            snapshot: RwLock::new(Arc::new(state)),
        });
        if let Some(k) = &header.idempotency_key {
            keys.insert(k.clone(), header.trial_id.clone());
        }
        self.trials
            .write()
            .expect("trials lock")
            .insert(header.trial_id.clone(), handle.clone());
        Ok((handle, true))
    }

    /// Appends the event durably, then publishes the new snapshot. The
    /// caller must hold the trial's mutation lock.
    pub fn commit(
        &self,
        handle: &TrialHandle,
        event: &CohortEvent,
        state: TrialState,
    ) -> io::Result<()> {
        let line = serde_json::to_string(&LogLine::Cohort {
            schema_version: SCHEMA_VERSION,
            event: event.clone(),
        })
        .map_err(io::Error::other)?;
        let path = self.path(&handle.header.trial_id);
        let mut file = OpenOptions::new().append(true).open(&path)?;
        writeln!(file, "{line}")?;
        file.sync_data()?;
        handle.publish(state);
        #[cfg(debug_assertions)]
        {
            let (_, replayed) = load(&path)?;
            if *handle.snapshot() != replayed {
                return Err(invalid(&path, "replayed log disagrees with live state"));
            }
        }
        Ok(())
    }
}

/// Reads a trial log and folds its events into a state.
pub fn load(path: &Path) -> io::Result<(SessionHeader, TrialState)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut header = None;
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(&line)
            .map_err(|e| invalid(path, format!("line {}: {e}", i + 1)))?
        {
            LogLine::Created { header: h, .. } if i == 0 => header = Some(h),
            LogLine::Cohort { event, .. } if header.is_some() => events.push(event),
            _ => return Err(invalid(path, format!("line {} out of order", i + 1))),
        }
    }
    let header = header.ok_or_else(|| invalid(path, "missing header"))?;
    let state = TrialState::replay(&header.design, header.grid.len(), &events)
        .map_err(|e| invalid(path, e))?;
    Ok((header, state))
}
