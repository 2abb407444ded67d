//! Evaluation corpus: functions drawn from a GP prior, observed with noise at
//! uniformly sampled inputs, stored as ordered episodes.
//!
//! Each episode fixes one random order of its points. The prediction task
//! with `n` demonstrations uses points `0..n` as context and point `n` as the
//! query, so every predictor sees exactly the same `(demos, query)` pairs.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{first_duplicate, sample_function, Demo};
use crate::kernel::{KernelSpec, NoiseSpec};
use crate::rng::{split_seed, stream_rng};

pub const FORMAT_VERSION: u32 = 1;

/// Attempts at resampling a colliding input before giving up.
pub const MAX_RESAMPLE_RETRIES: u64 = 10;

const STREAM_INPUTS: u64 = 0;
const STREAM_FUNCTION: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_RESAMPLE: u64 = 3;

fn default_noise() -> NoiseSpec {
    NoiseSpec::new(0.001).expect("valid")
}
fn default_dims() -> usize {
    1
}
fn default_functions() -> usize {
    200
}
fn default_points() -> usize {
    50
}
fn default_low() -> f64 {
    0.0
}
fn default_high() -> f64 {
    29.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub kernel: KernelSpec,
    #[serde(rename = "noise_variance", default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default = "default_dims")]
    pub dims: usize,
    #[serde(default = "default_functions")]
    pub n_functions: usize,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default = "default_low")]
    pub input_low: f64,
    #[serde(default = "default_high")]
    pub input_high: f64,
    pub seed: u64,
}

impl GenConfig {
    /// 200 functions of 50 points on `[0, 29]`, σ_ε² = 0.001.
    pub fn standard(kernel: KernelSpec, dims: usize, seed: u64) -> Self {
        Self {
            kernel,
            noise: default_noise(),
            dims,
            n_functions: default_functions(),
            n_points: default_points(),
            input_low: default_low(),
            input_high: default_high(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.dims) {
            return Err(Error::domain(format!("dims must be in 1..=4, got {}", self.dims)));
        }
        if self.n_points < 2 {
            return Err(Error::domain(format!("n_points must be at least 2, got {}", self.n_points)));
        }
        if !(self.input_low.is_finite() && self.input_high.is_finite() && self.input_low < self.input_high) {
            return Err(Error::domain(format!(
                "input range [{}, {}] is empty",
                self.input_low, self.input_high
            )));
        }
        Ok(())
    }

    pub fn input_length(&self) -> f64 {
        self.input_high - self.input_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodePoint {
    pub x: Vec<f64>,
    pub y_clean: f64,
    pub y_noisy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub kernel: KernelSpec,
    pub points: Vec<EpisodePoint>,
}

/// Demonstrations, query and target for one prefix length.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTask {
    pub demos: Vec<Demo>,
    pub query: Vec<f64>,
    pub target: f64,
}

impl Episode {
    pub fn dims(&self) -> usize {
        self.points.first().map_or(0, |p| p.x.len())
    }

    /// First `n` points as demonstrations, point `n` as the query.
    pub fn prefix_task(&self, n: usize) -> Result<PrefixTask> {
        if n >= self.points.len() {
            return Err(Error::domain(format!(
                "episode {} has {} points; n = {n} leaves no query",
                self.episode_id,
                self.points.len()
            )));
        }
        Ok(PrefixTask {
            demos: self.points[..n]
                .iter()
                .map(|p| Demo::new(p.x.clone(), p.y_noisy))
                .collect(),
            query: self.points[n].x.clone(),
            target: self.points[n].y_noisy,
        })
    }
}

/// Free-function form of [`Episode::prefix_task`].
pub fn prefix_task(episode: &Episode, n: usize) -> Result<PrefixTask> {
    episode.prefix_task(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub config: GenConfig,
    pub episodes: Vec<Episode>,
    pub format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: GenConfig,
}

pub fn episode_id(index: usize) -> String {
    format!("ep{index:05}")
}

/// Generates the task set determined by `config` (including its seed).
pub fn generate_taskset(config: &GenConfig) -> Result<TaskSet> {
    config.validate()?;
    let episodes = (0..config.n_functions)
        .into_par_iter()
        .map(|i| generate_episode(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(TaskSet {
        config: config.clone(),
        episodes,
        format_version: FORMAT_VERSION,
    })
}

fn generate_episode(config: &GenConfig, index: usize) -> Result<Episode> {
    let idx = index as u64;
    let mut rng = stream_rng(config.seed, &[idx, STREAM_INPUTS]);
    let (lo, hi) = (config.input_low, config.input_high);
    let mut xs: Vec<Vec<f64>> = (0..config.n_points)
        .map(|_| (0..config.dims).map(|_| rng.random_range(lo..=hi)).collect())
        .collect();

    let mut attempt = 0;
    while let Some((_, j)) = first_duplicate(&xs) {
        if attempt == MAX_RESAMPLE_RETRIES {
            return Err(Error::domain(format!(
                "episode {index}: input {j} still collides after {MAX_RESAMPLE_RETRIES} resamples"
            )));
        }
        let mut retry = stream_rng(config.seed, &[idx, STREAM_RESAMPLE, attempt]);
        xs[j] = (0..config.dims).map(|_| retry.random_range(lo..=hi)).collect();
        attempt += 1;
    }

    let clean = sample_function(&config.kernel, &xs, split_seed(config.seed, &[idx, STREAM_FUNCTION]))?;
    let mut noise_rng = stream_rng(config.seed, &[idx, STREAM_NOISE]);
    let sd = config.noise.variance().sqrt();
    let normal = Normal::new(0.0, sd).expect("finite non-negative sd");
    let points = xs
        .into_iter()
        .zip(clean)
        .map(|(x, y_clean)| EpisodePoint {
            x,
            y_clean,
            y_noisy: y_clean + normal.sample(&mut noise_rng),
        })
        .collect();
    Ok(Episode {
        episode_id: episode_id(index),
        kernel: config.kernel,
        points,
    })
}

impl TaskSet {
    pub fn episode(&self, id: &str) -> Option<&Episode> {
        // Ids produced by `episode_id` are dense and ordered; fall back to a scan.
        id.strip_prefix("ep")
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|i| self.episodes.get(i))
            .filter(|e| e.episode_id == id)
            .or_else(|| self.episodes.iter().find(|e| e.episode_id == id))
    }

    /// Line-delimited text: a header line with the config, then one line
    /// per episode.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&Header {
            format_version: self.format_version,
            config: self.config.clone(),
        })?;
        out.push('\n');
        for e in &self.episodes {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line: line + 1,
            message,
        };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty task set".into()))?;
        let header: Header = serde_json::from_str(header).map_err(|e| parse_err(hl, e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(parse_err(
                hl,
                format!(
                    "unsupported format_version {} (expected {FORMAT_VERSION})",
                    header.format_version
                ),
            ));
        }
        let episodes = lines
            .map(|(i, l)| serde_json::from_str::<Episode>(l).map_err(|e| parse_err(i, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: header.config,
            episodes,
            format_version: header.format_version,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text, &path.display().to_string())
    }

    /// One-line description for logs.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{} episodes x {} points, d={}, kernel {}",
            self.episodes.len(),
            self.config.n_points,
            self.config.dims,
            self.config.kernel
        );
        s
    }
}
