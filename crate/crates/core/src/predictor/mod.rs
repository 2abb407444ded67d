//! Point predictors behind one interface, and the loop that runs a predictor
//! over a task set.
//!
//! Reference predictors (GP posterior mean, empirical 1-NN, replay of a
//! records file) are pure; the endpoint predictor talks to a
//! chat-completions server.

mod endpoint;

use std::collections::{HashMap, HashSet};
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

pub use endpoint::{EndpointConfig, EndpointPredictor};

use crate::error::{Error, Result};
use crate::gp::{posterior_predictive, Demo};
use crate::kernel::{euclidean, KernelSpec, NoiseSpec};
use crate::prompt::parse_prediction;
use crate::records::{failure, read_records, PredictionRecord, RecordKey};
use crate::tasks::TaskSet;

/// Which predictor to build, and optionally the id its records carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub kind: PredictorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorKind {
    Endpoint(EndpointConfig),
    GpMean {
        kernel: KernelSpec,
        #[serde(rename = "noise_variance")]
        noise: NoiseSpec,
    },
    NearestNeighbor,
    Replay {
        path: PathBuf,
    },
}

impl PredictorConfig {
    pub fn new(kind: PredictorKind) -> Self {
        Self { id: None, kind }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    /// Requests the run loop may keep in flight.
    pub fn parallelism(&self) -> usize {
        match &self.kind {
            PredictorKind::Endpoint(e) => e.parallelism.max(1),
            _ => 1,
        }
    }
}

/// What a predictor is asked: one prefix task of one episode.
#[derive(Debug, Clone, Copy)]
pub struct TaskQuery<'a> {
    pub episode_id: &'a str,
    pub n: usize,
    pub demos: &'a [Demo],
    pub query: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub raw_text: String,
    pub value: Option<f64>,
}

impl Prediction {
    fn number(v: f64) -> Self {
        Self {
            raw_text: v.to_string(),
            value: Some(v),
        }
    }
}

pub trait Predictor: Send + Sync {
    fn id(&self) -> &str;

    fn predict(&self, task: &TaskQuery<'_>) -> Result<Prediction>;
}

pub struct GpMeanPredictor {
    id: String,
    kernel: KernelSpec,
    noise: NoiseSpec,
}

impl GpMeanPredictor {
    pub fn new(kernel: KernelSpec, noise: NoiseSpec) -> Self {
        Self {
            id: "gp_mean".into(),
            kernel,
            noise,
        }
    }
}

impl Predictor for GpMeanPredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, task: &TaskQuery<'_>) -> Result<Prediction> {
        let p = posterior_predictive(&self.kernel, &self.noise, task.demos, task.query)?;
        Ok(Prediction::number(p.mean))
    }
}

/// Returns the output of the closest demonstration; ties go to the
/// earliest demonstration.
pub struct NearestNeighborPredictor {
    id: String,
}

impl Default for NearestNeighborPredictor {
    fn default() -> Self {
        Self { id: "nn".into() }
    }
}

pub fn nearest_neighbor(demos: &[Demo], query: &[f64]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for d in demos {
        let dist = euclidean(&d.x, query);
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, d.y));
        }
    }
    best.map(|(_, y)| y)
}

impl Predictor for NearestNeighborPredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, task: &TaskQuery<'_>) -> Result<Prediction> {
        Ok(match nearest_neighbor(task.demos, task.query) {
            Some(y) => Prediction::number(y),
            None => Prediction {
                raw_text: String::new(),
                value: None,
            },
        })
    }
}

/// Serves stored records keyed by `(episode, n)`.
pub struct ReplayPredictor {
    id: String,
    records: HashMap<(String, usize), PredictionRecord>,
}

impl ReplayPredictor {
    pub fn from_records(records: Vec<PredictionRecord>) -> Result<Self> {
        let ids: HashSet<&str> = records.iter().map(|r| r.predictor_id.as_str()).collect();
        if ids.len() > 1 {
            let mut ids: Vec<_> = ids.into_iter().collect();
            ids.sort_unstable();
            return Err(Error::Usage(format!(
                "replay file mixes predictors {ids:?}; split it per predictor"
            )));
        }
        let id = ids.into_iter().next().unwrap_or("replay").to_string();
        let records = records
            .into_iter()
            .map(|r| ((r.episode_id.clone(), r.n), r))
            .collect();
        Ok(Self { id, records })
    }

    pub fn record(&self, episode_id: &str, n: usize) -> Option<&PredictionRecord> {
        self.records.get(&(episode_id.to_string(), n))
    }
}

impl Predictor for ReplayPredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, task: &TaskQuery<'_>) -> Result<Prediction> {
        let r = self
            .record(task.episode_id, task.n)
            .ok_or_else(|| Error::Lookup(format!("no stored record for ({}, {})", task.episode_id, task.n)))?;
        Ok(Prediction {
            raw_text: r.raw_text.clone(),
            value: r.y_hat,
        })
    }
}

/// A predictor with its id replaced.
struct Renamed {
    id: String,
    inner: Box<dyn Predictor>,
}

impl Predictor for Renamed {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, task: &TaskQuery<'_>) -> Result<Prediction> {
        self.inner.predict(task)
    }
}

pub fn build_predictor(config: &PredictorConfig) -> Result<Box<dyn Predictor>> {
    let inner: Box<dyn Predictor> = match &config.kind {
        PredictorKind::Endpoint(e) => Box::new(EndpointPredictor::new(e.clone())?),
        PredictorKind::GpMean { kernel, noise } => Box::new(GpMeanPredictor::new(*kernel, *noise)),
        PredictorKind::NearestNeighbor => Box::new(NearestNeighborPredictor::default()),
        PredictorKind::Replay { path } => Box::new(ReplayPredictor::from_records(read_records(path)?)?),
    };
    Ok(match &config.id {
        Some(id) => Box::new(Renamed { id: id.clone(), inner }),
        None => inner,
    })
}

/// `predict` on a config, for one-off use.
pub fn predict(config: &PredictorConfig, task: &TaskQuery<'_>) -> Result<Prediction> {
    build_predictor(config)?.predict(task)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    /// Tasks attempted in this invocation.
    pub attempted: usize,
    /// Tasks skipped because a final record already existed.
    pub skipped: usize,
    pub succeeded: usize,
    pub unparseable: usize,
    pub transport_failures: usize,
    pub other_failures: usize,
}

impl RunSummary {
    pub fn failed(&self) -> usize {
        self.attempted - self.succeeded
    }

    fn count(&mut self, r: &PredictionRecord) {
        self.attempted += 1;
        if r.is_success() {
            self.succeeded += 1;
        } else if r.is_unparseable() {
            self.unparseable += 1;
        } else if r.is_retryable() {
            self.transport_failures += 1;
        } else {
            self.other_failures += 1;
        }
    }
}

fn make_record(predictor: &dyn Predictor, task: &TaskQuery<'_>, target: f64) -> PredictionRecord {
    let (y_hat, raw_text, error) = match predictor.predict(task) {
        Ok(p) => {
            let err = match p.value {
                Some(_) => None,
                None if p.raw_text.is_empty() && task.demos.is_empty() => Some(failure::NO_PREDICTION.to_string()),
                None => Some(failure::UNPARSEABLE.to_string()),
            };
            (p.value, p.raw_text, err)
        }
        Err(e @ Error::Transport { .. }) => (None, String::new(), Some(e.to_string())),
        Err(e @ Error::Lookup(_)) => (None, String::new(), Some(e.to_string())),
        Err(e @ Error::Numerical { .. }) => (None, String::new(), Some(e.to_string())),
        Err(e) => (None, String::new(), Some(format!("{}: {e}", failure::NUMERICAL))),
    };
    PredictionRecord {
        predictor_id: predictor.id().to_string(),
        episode_id: task.episode_id.to_string(),
        n: task.n,
        x_star: task.query.to_vec(),
        y_hat,
        y_target: target,
        raw_text,
        error,
    }
}

/// Runs `predictor` on every `(episode, n)` with `n` in `n_range`, skipping
/// keys in `completed`, and hands each record to `sink` as it is produced.
///
/// Jobs are issued in (episode, n) order; with `parallelism > 1` up to that
/// many predictions are in flight and records arrive in completion order.
/// Failures become failed records; only a sink error aborts the run.
pub fn run_predictions(
    predictor: &dyn Predictor,
    taskset: &TaskSet,
    n_range: RangeInclusive<usize>,
    parallelism: usize,
    completed: &HashSet<RecordKey>,
    sink: &mut dyn FnMut(PredictionRecord) -> Result<()>,
) -> Result<RunSummary> {
    let max_n = taskset.config.n_points.saturating_sub(1);
    if n_range.is_empty() || *n_range.end() > max_n {
        return Err(Error::domain(format!(
            "n range {}..={} must lie within 0..={max_n}",
            n_range.start(),
            n_range.end()
        )));
    }

    let mut summary = RunSummary::default();
    let mut jobs = Vec::new();
    for (ei, e) in taskset.episodes.iter().enumerate() {
        for n in n_range.clone() {
            let key = RecordKey {
                predictor_id: predictor.id().to_string(),
                episode_id: e.episode_id.clone(),
                n,
            };
            if completed.contains(&key) {
                summary.skipped += 1;
            } else {
                jobs.push((ei, n));
            }
        }
    }

    let run_job = |&(ei, n): &(usize, usize)| -> Result<PredictionRecord> {
        let e = &taskset.episodes[ei];
        let t = e.prefix_task(n)?;
        let q = TaskQuery {
            episode_id: &e.episode_id,
            n,
            demos: &t.demos,
            query: &t.query,
        };
        Ok(make_record(predictor, &q, t.target))
    };

    if parallelism <= 1 {
        for job in &jobs {
            let r = run_job(job)?;
            summary.count(&r);
            sink(r)?;
        }
        return Ok(summary);
    }

    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel();
        for _ in 0..parallelism.min(jobs.len().max(1)) {
            let tx = tx.clone();
            let (next, jobs, run_job) = (&next, &jobs, &run_job);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if tx.send(run_job(job)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for r in rx {
            let r = match r {
                Ok(r) => r,
                Err(e) => {
                    next.store(jobs.len(), Ordering::Relaxed);
                    return Err(e);
                }
            };
            summary.count(&r);
            if let Err(e) = sink(r) {
                next.store(jobs.len(), Ordering::Relaxed);
                return Err(e);
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

/// Parsed value of a completion, mapped to a prediction.
pub(crate) fn prediction_from_completion(text: String) -> Prediction {
    let value = parse_prediction(&text).value;
    Prediction { raw_text: text, value }
}
