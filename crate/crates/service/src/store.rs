//! Sessions and their append-only logs.
//!
//! With a data directory, each session lives in `<id>.jsonl`: a `session`
//! header line followed by one `iteration` or `training` line per mutation,
//! each written whole and synced before the response is sent.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{SecondsFormat, Utc};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tac_core::datalab::io::{load_dataset, DatasetPayload};
use tac_core::trainer::{grid_search, train};
use tac_core::PreferenceDataset;
use tokio::sync::Mutex;

use crate::error::{ServiceError, ServiceResult};
use crate::model::{
    score, Condition, CreateSessionRequest, GridCellSummary, Iteration, IterationSummary, PairView, PairsResponse,
    SessionInfo, TrainRequest, TrainingRecord, TrajectorySummary,
};

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionHeader {
    id: String,
    condition: Condition,
    gamma: f64,
    tie_epsilon: f64,
    created_at: String,
    display_pairs: Vec<usize>,
    scoring_pairs: Vec<usize>,
    dataset: DatasetPayload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Session(SessionHeader),
    Iteration(Iteration),
    Training(TrainingRecord),
}

fn append(file: &mut Option<File>, line: &LogLine) -> ServiceResult<()> {
    if let Some(f) = file {
        let mut text = serde_json::to_string(line)?;
        text.push('\n');
        f.write_all(text.as_bytes())?;
        f.sync_data()?;
    }
    Ok(())
}

#[derive(Default)]
struct Log {
    iterations: Vec<Iteration>,
    trainings: Vec<TrainingRecord>,
    file: Option<File>,
}

pub struct Session {
    pub id: String,
    pub condition: Condition,
    pub gamma: f64,
    pub tie_epsilon: f64,
    pub created_at: String,
    pub dataset: Arc<PreferenceDataset>,
    gamma_default: f64,
    display: Vec<usize>,
    scoring: Vec<usize>,
    log: Mutex<Log>,
}

impl Session {
    fn with_tac(&self) -> bool {
        self.condition == Condition::Alignment
    }

    fn header(&self) -> SessionHeader {
        SessionHeader {
            id: self.id.clone(),
            condition: self.condition,
            gamma: self.gamma,
            tie_epsilon: self.tie_epsilon,
            created_at: self.created_at.clone(),
            display_pairs: self.display.clone(),
            scoring_pairs: self.scoring.clone(),
            dataset: DatasetPayload::from_dataset(&self.dataset, self.gamma_default),
        }
    }

    pub async fn info(&self) -> SessionInfo {
        let log = self.log.lock().await;
        SessionInfo {
            id: self.id.clone(),
            condition: self.condition,
            gamma: self.gamma,
            tie_epsilon: self.tie_epsilon,
            created_at: self.created_at.clone(),
            dim: self.dataset.dim(),
            num_pairs: self.dataset.len(),
            num_trajectories: self.dataset.num_trajectories(),
            display_pairs: self.display.clone(),
            scoring_pairs: self.scoring.clone(),
            preference_cycles: self
                .dataset
                .transitivity_warnings()
                .into_iter()
                .map(|w| w.trajectories)
                .collect(),
            iteration_count: log.iterations.len(),
            training_runs: log.trainings.clone(),
        }
    }

    pub async fn evaluate(&self, weights: Vec<f64>) -> ServiceResult<Iteration> {
        let scores = score(
            &self.dataset,
            &weights,
            self.gamma,
            self.tie_epsilon,
            &self.scoring,
            self.with_tac(),
        )?;
        let mut log = self.log.lock().await;
        let iteration = Iteration {
            index: log.iterations.len(),
            weights,
            per_pair: scores.per_pair,
            tac: scores.tac,
            accuracy: scores.accuracy,
            warning: scores.warning,
            submitted_at: now(),
        };
        append(&mut log.file, &LogLine::Iteration(iteration.clone()))?;
        log.iterations.push(iteration.clone());
        Ok(iteration)
    }

    pub async fn history(&self) -> Vec<IterationSummary> {
        self.log.lock().await.iterations.iter().map(IterationSummary::from).collect()
    }

    /// Trains on the whole dataset while holding the session's mutation lock.
    pub async fn train(&self, request: TrainRequest) -> ServiceResult<TrainingRecord> {
        let mut log = self.log.lock().await;
        let cfg = tac_core::TrainConfig {
            gamma: self.gamma,
            tie_epsilon: self.tie_epsilon,
            ..request.config
        };
        let data = Arc::clone(&self.dataset);
        let grid = request.grid;
        let (run, cells) = tokio::task::spawn_blocking(move || match grid {
            None => train(&data, &cfg).map(|run| (run, None)),
            Some(g) => grid_search(&data, &g.learning_rates, &g.batch_sizes, &cfg).map(|search| {
                let cells = search
                    .cells
                    .iter()
                    .map(|c| GridCellSummary {
                        learning_rate: c.learning_rate,
                        batch_size: c.batch_size,
                        ok: c.run.is_some(),
                        error: c.error.clone(),
                    })
                    .collect();
                (search.best().clone(), Some(cells))
            }),
        })
        .await
        .map_err(|e| ServiceError::Storage(format!("training task: {e}")))?
        .map_err(|e| tac_core::Error::Stage {
            stage: "training",
            source: Box::new(e),
        })?;
        let scores = score(
            &self.dataset,
            &run.final_weights,
            self.gamma,
            self.tie_epsilon,
            &self.scoring,
            self.with_tac(),
        )
        .map_err(|e| tac_core::Error::Stage {
            stage: "scoring",
            source: Box::new(e),
        })?;
        let record = TrainingRecord {
            index: log.trainings.len(),
            machine_generated: true,
            loss: run.config.loss,
            config: run.config.clone(),
            learned_weights: run.final_weights.clone(),
            best_epoch: run.best.epoch,
            stopped_at_epoch: run.stopped_at_epoch,
            stop_reason: run.stop_reason,
            tac: scores.tac,
            accuracy: scores.accuracy,
            warning: scores.warning,
            grid: cells,
            completed_at: now(),
        };
        append(&mut log.file, &LogLine::Training(record.clone()))?;
        log.trainings.push(record.clone());
        Ok(record)
    }

    pub fn pairs(&self) -> PairsResponse {
        let traj = |id: &str| TrajectorySummary::of(self.dataset.trajectory(id).expect("validated dataset"), self.gamma);
        let pairs = self
            .dataset
            .records()
            .iter()
            .enumerate()
            .map(|(index, rec)| PairView {
                index,
                left: traj(&rec.left),
                right: traj(&rec.right),
                label: rec.label,
                displayed: self.display.binary_search(&index).is_ok(),
                scored: self.scoring.binary_search(&index).is_ok(),
            })
            .collect();
        PairsResponse {
            display_pairs: self.display.clone(),
            scoring_pairs: self.scoring.clone(),
            pairs,
        }
    }
}

fn check_indices(name: &'static str, indices: Vec<usize>, n: usize) -> ServiceResult<Vec<usize>> {
    let mut v = indices;
    v.sort_unstable();
    v.dedup();
    if v.is_empty() {
        return Err(ServiceError::bad_request("invalid_parameter", format!("{name} must not be empty")));
    }
    if let Some(bad) = v.iter().find(|&&i| i >= n) {
        return Err(ServiceError::BadRequest {
            code: "invalid_parameter",
            message: format!("{name} index {bad} out of range for {n} records"),
            detail: json!({ "parameter": name, "index": bad }),
        });
    }
    Ok(v)
}

/// Every session, optionally backed by a data directory.
pub struct Store {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Opens `dir`, creating it if needed, checking that it is writable and
    /// replaying every session file in it.
    pub fn open(dir: impl Into<PathBuf>) -> ServiceResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let probe = dir.join(".write-probe");
        File::create(&probe).map_err(|e| ServiceError::Storage(format!("{} is not writable: {e}", dir.display())))?;
        fs::remove_file(&probe)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let session = replay(&path)?;
                sessions.insert(session.id.clone(), Arc::new(session));
            }
        }
        Ok(Self {
            dir: Some(dir),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> ServiceResult<Arc<Session>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: CreateSessionRequest) -> ServiceResult<Arc<Session>> {
        let loaded = match (req.dataset, req.dataset_path) {
            (Some(payload), None) => payload.into_dataset()?,
            (None, Some(path)) => load_dataset(&path).map_err(|e| match e {
                tac_core::Error::Io(reason) => ServiceError::BadRequest {
                    code: "invalid_dataset",
                    message: format!("cannot read {}: {reason}", path.display()),
                    detail: json!({ "path": path }),
                },
                other => other.into(),
            })?,
            _ => {
                return Err(ServiceError::bad_request(
                    "invalid_request",
                    "provide exactly one of `dataset` and `dataset_path`",
                ))
            }
        };
        let data = loaded.dataset;
        if data.is_empty() {
            return Err(tac_core::Error::EmptyDataset.into());
        }
        let gamma = req.gamma.unwrap_or(loaded.gamma_default);
        if !(0.0..=1.0).contains(&gamma) {
            return Err(ServiceError::bad_request("invalid_parameter", format!("gamma {gamma} outside [0, 1]")));
        }
        if !(req.tie_epsilon >= 0.0 && req.tie_epsilon.is_finite()) {
            return Err(ServiceError::bad_request("invalid_parameter", "tie_epsilon must be finite and >= 0"));
        }
        let n = data.len();
        let display = match (req.display_pairs, req.display_count) {
            (Some(_), Some(_)) => {
                return Err(ServiceError::bad_request(
                    "invalid_request",
                    "give at most one of `display_pairs` and `display_count`",
                ))
            }
            (Some(v), None) => check_indices("display_pairs", v, n)?,
            (None, Some(k)) if k == 0 || k > n => {
                return Err(ServiceError::bad_request(
                    "invalid_parameter",
                    format!("display_count {k} must be in 1..={n}"),
                ))
            }
            (None, Some(k)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(req.display_seed);
                check_indices("display_pairs", sample(&mut rng, n, k).into_vec(), n)?
            }
            (None, None) => (0..n).collect(),
        };
        let scoring = match (req.score_display_only, req.scoring_pairs) {
            (true, Some(_)) => {
                return Err(ServiceError::bad_request(
                    "invalid_request",
                    "`score_display_only` and `scoring_pairs` are exclusive",
                ))
            }
            (true, None) => display.clone(),
            (false, Some(v)) => check_indices("scoring_pairs", v, n)?,
            (false, None) => (0..n).collect(),
        };
        let session = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            condition: req.condition,
            gamma,
            tie_epsilon: req.tie_epsilon,
            created_at: now(),
            dataset: Arc::new(data),
            gamma_default: loaded.gamma_default,
            display,
            scoring,
            log: Mutex::new(Log::default()),
        };
        if let Some(dir) = &self.dir {
            let mut file = Some(
                OpenOptions::new()
                    .create_new(true)
                    .append(true)
                    .open(dir.join(format!("{}.jsonl", session.id)))?,
            );
            append(&mut file, &LogLine::Session(session.header()))?;
            session.log.try_lock().expect("new session is unshared").file = file;
        }
        let session = Arc::new(session);
        self.sessions
            .write()
            .expect("session map lock")
            .insert(session.id.clone(), Arc::clone(&session));
        Ok(session)
    }
}

/// Rebuilds a session from its file. A final line cut short by a crash is
/// dropped and truncated away so later appends stay line-aligned.
fn replay(path: &Path) -> ServiceResult<Session> {
    let corrupt = |msg: String| ServiceError::Storage(format!("{}: {msg}", path.display()));
    let mut reader = BufReader::new(File::open(path)?);
    let mut header: Option<SessionHeader> = None;
    let mut log = Log::default();
    let mut valid_len = 0u64;
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        number += 1;
        if !line.ends_with('\n') {
            break;
        }
        let parsed: LogLine =
            serde_json::from_str(line.trim_end()).map_err(|e| corrupt(format!("line {number}: {e}")))?;
        match (parsed, header.is_some()) {
            (LogLine::Session(h), false) => header = Some(h),
            (LogLine::Iteration(it), true) if it.index == log.iterations.len() => log.iterations.push(it),
            (LogLine::Training(tr), true) if tr.index == log.trainings.len() => log.trainings.push(tr),
            _ => return Err(corrupt(format!("line {number} is out of sequence"))),
        }
        valid_len += read as u64;
    }
    let header = header.ok_or_else(|| corrupt("missing session header".into()))?;
    let file = OpenOptions::new().append(true).open(path)?;
    if file.metadata()?.len() != valid_len {
        file.set_len(valid_len)?;
    }
    log.file = Some(file);
    let loaded = header.dataset.into_dataset()?;
    Ok(Session {
        id: header.id,
        condition: header.condition,
        gamma: header.gamma,
        tie_epsilon: header.tie_epsilon,
        created_at: header.created_at,
        dataset: Arc::new(loaded.dataset),
        gamma_default: loaded.gamma_default,
        display: header.display_pairs,
        scoring: header.scoring_pairs,
        log: Mutex::new(log),
    })
}
