//! Which GP kernel makes a predictor's point predictions most likely.
//!
//! Each prediction is scored under the posterior predictive (observation
//! noise included) of every candidate kernel, conditioned on the same
//! demonstrations the predictor saw. An optional pooled extra variance τ²
//! absorbs the predictor's own sampling spread before scoring.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gp::{posterior_predictive, Demo, PrefixPosterior};
use crate::kernel::{KernelSpec, NoiseSpec, Smoothness};
use crate::records::PredictionRecord;
use crate::tasks::TaskSet;

pub const TAU2_MIN: f64 = 1e-12;
pub const TAU2_MAX: f64 = 1e6;
/// Bracket width in log τ² at which the search stops.
pub const TAU2_LOG_TOL: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    kernels: Vec<KernelSpec>,
    noise: NoiseSpec,
}

impl CandidateSet {
    pub fn new(kernels: Vec<KernelSpec>, noise: NoiseSpec) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::domain("candidate set is empty"));
        }
        let mut seen = HashSet::new();
        for k in &kernels {
            if !seen.insert(k.to_string()) {
                return Err(Error::domain(format!("candidate {k} listed twice")));
            }
        }
        Ok(Self { kernels, noise })
    }

    /// Matérn ½, 1½, 2½ at ℓ ∈ {1, 8} and SE at ℓ ∈ 1..=8, all with unit
    /// output variance; observation noise 0.001.
    pub fn standard() -> Self {
        let mut kernels = Vec::with_capacity(14);
        for nu in Smoothness::ALL {
            for l in [1.0, 8.0] {
                kernels.push(KernelSpec::matern(nu, l, 1.0).expect("valid default"));
            }
        }
        for l in 1..=8 {
            kernels.push(KernelSpec::squared_exponential(l as f64, 1.0).expect("valid default"));
        }
        Self {
            kernels,
            noise: NoiseSpec::new(0.001).expect("valid default"),
        }
    }

    pub fn kernels(&self) -> &[KernelSpec] {
        &self.kernels
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }
}

pub fn gaussian_logpdf(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + variance.ln() + r * r / variance)
}

/// Log-density of `y_hat` under the candidate's noisy posterior predictive
/// widened by `tau2`.
pub fn prediction_loglik(
    kernel: &KernelSpec,
    noise: &NoiseSpec,
    demos: &[Demo],
    query: &[f64],
    y_hat: f64,
    tau2: f64,
) -> Result<f64> {
    if !y_hat.is_finite() {
        return Err(Error::domain(format!("prediction must be finite, got {y_hat}")));
    }
    if !(tau2 >= 0.0 && tau2.is_finite()) {
        return Err(Error::domain(format!("tau2 must be non-negative, got {tau2}")));
    }
    let p = posterior_predictive(kernel, noise, demos, query)?;
    Ok(gaussian_logpdf(y_hat, p.mean, p.variance_y + tau2))
}

fn tau2_objective(residuals: &[f64], variances: &[f64], tau2: f64) -> f64 {
    residuals
        .iter()
        .zip(variances)
        .map(|(&r, &v)| gaussian_logpdf(r, 0.0, v + tau2))
        .sum()
}

fn tau2_slope(residuals: &[f64], variances: &[f64], tau2: f64) -> f64 {
    residuals
        .iter()
        .zip(variances)
        .map(|(&r, &v)| {
            let s = v + tau2;
            r * r / (s * s) - 1.0 / s
        })
        .sum::<f64>()
        * 0.5
}

/// Maximizer of a unimodal `f` on `[a, b]`, to bracket width `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Maximum-likelihood extra variance for residuals `r_i` with known
/// variances `v_i`, searched over `[TAU2_MIN, TAU2_MAX]`.
pub fn fit_tau2(residuals: &[f64], variances: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::domain("fit_tau2 needs at least one residual"));
    }
    if residuals.len() != variances.len() {
        return Err(Error::domain(format!(
            "{} residuals but {} variances",
            residuals.len(),
            variances.len()
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("variances must be non-negative, got {v}")));
    }
    if let Some(r) = residuals.iter().find(|r| !r.is_finite()) {
        return Err(Error::domain(format!("residuals must be finite, got {r}")));
    }

    // Shared variance: the optimum is mean(r²) − v.
    let v0 = variances[0];
    if variances.iter().all(|&v| v == v0) {
        let ms = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
        return Ok((ms - v0).clamp(TAU2_MIN, TAU2_MAX));
    }

    let obj = |s: f64| tau2_objective(residuals, variances, s.exp());
    let (lo, hi) = (TAU2_MIN.ln(), TAU2_MAX.ln());
    const SCAN: usize = 256;
    let step = (hi - lo) / SCAN as f64;
    let best = (0..=SCAN)
        .map(|i| (i, obj(lo + step * i as f64)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("scan is non-empty");
    // A negative slope at the lower end alone is not enough: residuals with
    // tiny known variance can pull it down while the maximum lies further in.
    if best == 0 && tau2_slope(residuals, variances, TAU2_MIN) <= 0.0 {
        return Ok(TAU2_MIN);
    }
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = lo + step * (best + 1).min(SCAN) as f64;
    let s = golden_section_max(obj, a, b, TAU2_LOG_TOL);
    Ok(s.exp().clamp(TAU2_MIN, TAU2_MAX))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelScore {
    pub kernel: KernelSpec,
    pub total_loglik: f64,
    pub mean_loglik: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub predictor_id: String,
    /// In canonical kernel order.
    pub scores: Vec<KernelScore>,
    pub tau2: Option<f64>,
    pub argmax_kernel: KernelSpec,
    /// Records left out because they carry no finite prediction.
    pub excluded: usize,
}

struct Scored<'a> {
    record: &'a PredictionRecord,
    /// (mean, noisy variance) per candidate, in canonical order.
    predictive: Vec<(f64, f64)>,
}

fn posterior_for_records<'a>(
    taskset: &TaskSet,
    episode_id: &str,
    records: &[&'a PredictionRecord],
    kernels: &[KernelSpec],
    noise: &NoiseSpec,
) -> Result<Vec<Scored<'a>>> {
    let episode = taskset
        .episode(episode_id)
        .ok_or_else(|| Error::Lookup(format!("episode {episode_id} is not in the task set")))?;
    for r in records {
        let point = episode.points.get(r.n).ok_or_else(|| {
            Error::domain(format!("record ({episode_id}, {}) is past the end of the episode", r.n))
        })?;
        if point.x != r.x_star {
            return Err(Error::domain(format!(
                "record ({episode_id}, {}) queries {:?} but the task set has {:?}",
                r.n, r.x_star, point.x
            )));
        }
    }
    let max_n = records.iter().map(|r| r.n).max().unwrap_or(0);
    let points: Vec<&[f64]> = episode.points[..=max_n].iter().map(|p| p.x.as_slice()).collect();
    let ys: Vec<f64> = episode.points[..=max_n].iter().map(|p| p.y_noisy).collect();
    let mut out: Vec<Scored> = records
        .iter()
        .map(|r| Scored {
            record: r,
            predictive: Vec::with_capacity(kernels.len()),
        })
        .collect();
    for k in kernels {
        let post = PrefixPosterior::new(k, noise, points.clone(), ys.clone())?;
        for s in &mut out {
            let p = post.prefix(s.record.n)?;
            s.predictive.push((p.mean, p.variance_y));
        }
    }
    Ok(out)
}

/// Scores every record with a finite prediction under every candidate.
///
/// Records must come from one predictor. Kernels and records are put in a
/// canonical order first, so the report does not depend on input order.
pub fn bias_report(
    records: &[PredictionRecord],
    candidates: &CandidateSet,
    taskset: &TaskSet,
    adjust: bool,
) -> Result<BiasReport> {
    let ids: std::collections::BTreeSet<&str> = records.iter().map(|r| r.predictor_id.as_str()).collect();
    if ids.len() > 1 {
        return Err(Error::Usage(format!(
            "records mix predictors {ids:?}; analyze one predictor at a time"
        )));
    }
    let mut kernels = candidates.kernels().to_vec();
    kernels.sort_by(KernelSpec::canonical_cmp);
    let noise = candidates.noise();

    let mut usable: Vec<&PredictionRecord> = records.iter().filter(|r| r.y_hat.is_some_and(f64::is_finite)).collect();
    let excluded = records.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::domain("no record has a finite prediction to score"));
    }
    usable.sort_by_key(|r| r.key());

    let mut by_episode: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in &usable {
        by_episode.entry(r.episode_id.as_str()).or_default().push(r);
    }
    let groups: Vec<_> = by_episode.into_iter().collect();
    let per_episode: Vec<Vec<Scored>> = groups
        .par_iter()
        .map(|(id, rs)| posterior_for_records(taskset, id, rs, &kernels, &noise))
        .collect::<Result<_>>()?;
    let scored: Vec<Scored> = per_episode.into_iter().flatten().collect();

    let tau2 = if adjust {
        let mut residuals = Vec::with_capacity(scored.len() * kernels.len());
        let mut variances = Vec::with_capacity(residuals.capacity());
        for s in &scored {
            let y = s.record.y_hat.expect("filtered to finite predictions");
            for &(mean, var) in &s.predictive {
                residuals.push(y - mean);
                variances.push(var);
            }
        }
        Some(fit_tau2(&residuals, &variances)?)
    } else {
        None
    };
    let extra = tau2.unwrap_or(0.0);

    let scores: Vec<KernelScore> = kernels
        .iter()
        .enumerate()
        .map(|(j, k)| {
            let total: f64 = scored
                .iter()
                .map(|s| {
                    let (mean, var) = s.predictive[j];
                    gaussian_logpdf(s.record.y_hat.expect("finite"), mean, var + extra)
                })
                .sum();
            KernelScore {
                kernel: *k,
                total_loglik: total,
                mean_loglik: total / scored.len() as f64,
                count: scored.len(),
            }
        })
        .collect();
    let argmax_kernel = argmax(&scores);
    Ok(BiasReport {
        predictor_id: ids.into_iter().next().unwrap_or_default().to_string(),
        scores,
        tau2,
        argmax_kernel,
        excluded,
    })
}

/// Highest total; the first in order wins ties.
fn argmax(scores: &[KernelScore]) -> KernelSpec {
    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.total_loglik > best.total_loglik {
            best = s;
        }
    }
    best.kernel
}

/// Linear within `[-1, 1]`, logarithmic outside.
pub fn symlog(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        x.signum() * (1.0 + x.abs().log10())
    }
}

impl BiasReport {
    pub fn score(&self, kernel: &KernelSpec) -> Option<&KernelScore> {
        self.scores.iter().find(|s| s.kernel == *kernel)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["kernel", "total_loglik", "mean_loglik", "count", "tau2", "is_argmax"])?;
        let tau2 = self.tau2.map(|t| t.to_string()).unwrap_or_default();
        for s in &self.scores {
            w.write_record([
                s.kernel.to_string(),
                s.total_loglik.to_string(),
                s.mean_loglik.to_string(),
                s.count.to_string(),
                tau2.clone(),
                (s.kernel == self.argmax_kernel).to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Per-kernel values with their symmetric-log transforms.
    pub fn to_plot_json(&self) -> Value {
        json!({
            "predictor_id": self.predictor_id,
            "scale": "symlog",
            "linear_threshold": 1.0,
            "tau2": self.tau2,
            "argmax_kernel": self.argmax_kernel.to_string(),
            "kernels": self.scores.iter().map(|s| json!({
                "kernel": s.kernel.to_string(),
                "label": s.kernel.label(),
                "total_loglik": s.total_loglik,
                "mean_loglik": s.mean_loglik,
                "symlog_total_loglik": symlog(s.total_loglik),
                "symlog_mean_loglik": symlog(s.mean_loglik),
                "count": s.count,
            })).collect::<Vec<_>>(),
        })
    }
}
