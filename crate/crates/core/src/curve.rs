//! Learning curves: mean absolute error per demonstration count with
//! episode-level percentile bootstrap intervals.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gp::PrefixPosterior;
use crate::records::PredictionRecord;
use crate::rng::stream_rng;
use crate::tasks::TaskSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_bootstrap: usize,
    pub ci_level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_bootstrap: 1000,
            ci_level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::domain(format!("ci_level must be in (0, 1), got {}", self.ci_level)));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::domain("n_bootstrap must be positive"));
        }
        Ok(())
    }
}

/// Statistics are `None` when no record at this `n` succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCurvePoint {
    pub n: usize,
    pub mean_abs_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub count: usize,
    pub failures: usize,
}

/// Linear-interpolation quantile of sorted data (the usual "type 7").
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean of the per-episode error lists, all records weighted equally.
fn pooled_mean(groups: &[Vec<f64>], pick: impl Iterator<Item = usize>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in pick {
        sum += groups[i].iter().sum::<f64>();
        count += groups[i].len();
    }
    sum / count as f64
}

fn curve_point(n: usize, records: &[&PredictionRecord], cfg: &BootstrapConfig) -> LearningCurvePoint {
    let mut by_episode: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut failures = 0;
    for r in records {
        match r.abs_error() {
            Some(e) => by_episode.entry(&r.episode_id).or_default().push(e),
            None => failures += 1,
        }
    }
    let count = records.len() - failures;
    if count == 0 {
        return LearningCurvePoint {
            n,
            mean_abs_error: None,
            ci_low: None,
            ci_high: None,
            count,
            failures,
        };
    }
    // Sorted so the result does not depend on record order.
    let groups: Vec<Vec<f64>> = by_episode
        .into_values()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let mean = pooled_mean(&groups, 0..groups.len());

    let mut rng = stream_rng(cfg.seed, &[n as u64]);
    let k = groups.len();
    let mut stats: Vec<f64> = (0..cfg.n_bootstrap)
        .map(|_| {
            let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..k)).collect();
            pooled_mean(&groups, picks.into_iter())
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.ci_level) / 2.0;
    LearningCurvePoint {
        n,
        mean_abs_error: Some(mean),
        ci_low: Some(quantile_sorted(&stats, tail).min(mean)),
        ci_high: Some(quantile_sorted(&stats, 1.0 - tail).max(mean)),
        count,
        failures,
    }
}

/// One point per distinct `n` in `records`, in increasing `n`.
pub fn learning_curve(records: &[PredictionRecord], cfg: &BootstrapConfig) -> Result<Vec<LearningCurvePoint>> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::domain("no records to aggregate"));
    }
    let mut by_n: BTreeMap<usize, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r);
    }
    let groups: Vec<_> = by_n.into_iter().collect();
    Ok(groups.par_iter().map(|(n, rs)| curve_point(*n, rs, cfg)).collect())
}

/// [`learning_curve`] for each predictor id in `records`.
pub fn learning_curves(
    records: &[PredictionRecord],
    cfg: &BootstrapConfig,
) -> Result<BTreeMap<String, Vec<LearningCurvePoint>>> {
    let mut by_predictor: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_predictor.entry(r.predictor_id.clone()).or_default().push(r.clone());
    }
    if by_predictor.is_empty() {
        return Err(Error::domain("no records to aggregate"));
    }
    by_predictor
        .into_iter()
        .map(|(id, rs)| Ok((id, learning_curve(&rs, cfg)?)))
        .collect()
}

/// Curve of the GP posterior mean under the generating kernel, on the given
/// episodes and demonstration counts.
pub fn gp_reference_curve<S: AsRef<str> + Sync>(
    taskset: &TaskSet,
    episode_ids: impl IntoIterator<Item = S>,
    n_grid: &[usize],
    cfg: &BootstrapConfig,
) -> Result<Vec<LearningCurvePoint>> {
    let ids: Vec<S> = episode_ids.into_iter().collect();
    let max_n = n_grid.iter().copied().max().unwrap_or(0);
    let per_episode: Vec<Vec<PredictionRecord>> = ids
        .par_iter()
        .map(|id| {
            let id = id.as_ref();
            let e = taskset
                .episode(id)
                .ok_or_else(|| Error::Lookup(format!("episode {id} is not in the task set")))?;
            if max_n >= e.points.len() {
                return Err(Error::domain(format!("episode {id} has no query for n = {max_n}")));
            }
            let pts = &e.points[..=max_n];
            let post = PrefixPosterior::new(
                &taskset.config.kernel,
                &taskset.config.noise,
                pts.iter().map(|p| p.x.as_slice()).collect(),
                pts.iter().map(|p| p.y_noisy).collect(),
            )?;
            n_grid
                .iter()
                .map(|&n| {
                    let mean = post.prefix(n)?.mean;
                    Ok(PredictionRecord {
                        predictor_id: "gp_ref".into(),
                        episode_id: id.to_string(),
                        n,
                        x_star: pts[n].x.clone(),
                        y_hat: Some(mean),
                        y_target: pts[n].y_noisy,
                        raw_text: String::new(),
                        error: None,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    learning_curve(&per_episode.concat(), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub n: Vec<usize>,
    pub predictors: Vec<(String, Vec<LearningCurvePoint>)>,
    /// Absent for inputs of more than one dimension.
    pub nn_bound: Option<Vec<Option<f64>>>,
    pub gp_reference: Option<Vec<Option<f64>>>,
}

pub fn curve_report(
    curves: &[(String, Vec<LearningCurvePoint>)],
    nn_bound: Option<&[(usize, Option<f64>)]>,
    gp_reference: Option<&[LearningCurvePoint]>,
) -> Result<CurveReport> {
    let Some((first_id, first)) = curves.first() else {
        return Err(Error::domain("report needs at least one curve"));
    };
    let grid: Vec<usize> = first.iter().map(|p| p.n).collect();
    let check = |what: &str, ns: Vec<usize>| {
        if ns == grid {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} covers n = {ns:?}, but {first_id} covers n = {grid:?}"
            )))
        }
    };
    for (id, c) in &curves[1..] {
        check(id, c.iter().map(|p| p.n).collect())?;
    }
    if let Some(b) = nn_bound {
        check("nn_bound", b.iter().map(|(n, _)| *n).collect())?;
    }
    if let Some(g) = gp_reference {
        check("gp_ref", g.iter().map(|p| p.n).collect())?;
    }
    Ok(CurveReport {
        n: grid,
        predictors: curves.to_vec(),
        nn_bound: nn_bound.map(|b| b.iter().map(|(_, v)| *v).collect()),
        gp_reference: gp_reference.map(|g| g.iter().map(|p| p.mean_abs_error).collect()),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CurveReport {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["n".to_string()];
        for (id, _) in &self.predictors {
            h.extend([format!("{id}_mae"), format!("{id}_lo"), format!("{id}_hi")]);
        }
        if self.nn_bound.is_some() {
            h.push("nn_bound".into());
        }
        if self.gp_reference.is_some() {
            h.push("gp_ref".into());
        }
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for (i, n) in self.n.iter().enumerate() {
            let mut row = vec![n.to_string()];
            for (_, c) in &self.predictors {
                let p = &c[i];
                row.extend([cell(p.mean_abs_error), cell(p.ci_low), cell(p.ci_high)]);
            }
            if let Some(b) = &self.nn_bound {
                row.push(cell(b[i]));
            }
            if let Some(g) = &self.gp_reference {
                row.push(cell(g[i]));
            }
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Same content as the CSV, arranged as series for plotting tools.
    pub fn to_plot_json(&self) -> Value {
        let series: Vec<Value> = self
            .predictors
            .iter()
            .map(|(id, c)| {
                json!({
                    "name": id,
                    "mae": c.iter().map(|p| p.mean_abs_error).collect::<Vec<_>>(),
                    "lo": c.iter().map(|p| p.ci_low).collect::<Vec<_>>(),
                    "hi": c.iter().map(|p| p.ci_high).collect::<Vec<_>>(),
                    "count": c.iter().map(|p| p.count).collect::<Vec<_>>(),
                    "failures": c.iter().map(|p| p.failures).collect::<Vec<_>>(),
                })
            })
            .collect();
        let mut out = json!({ "n": self.n, "series": series });
        if let Some(b) = &self.nn_bound {
            out["nn_bound"] = json!(b);
        }
        if let Some(g) = &self.gp_reference {
            out["gp_ref"] = json!(g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(ep: usize, n: usize, err: Option<f64>) -> PredictionRecord {
        PredictionRecord {
            predictor_id: "p".into(),
            episode_id: format!("ep{ep:05}"),
            n,
            x_star: vec![0.0],
            y_hat: err,
            y_target: 0.0,
            raw_text: String::new(),
            error: err.is_none().then(|| "unparseable completion".into()),
        }
    }

    #[test]
    fn degenerate_and_simple_means() {
        let rs: Vec<_> = (0..10).map(|e| rec(e, 3, Some(0.5))).collect();
        let c = learning_curve(&rs, &BootstrapConfig::default()).unwrap();
        assert_eq!(c[0].mean_abs_error, Some(0.5));
        assert_eq!(c[0].ci_low, Some(0.5));
        assert_eq!(c[0].ci_high, Some(0.5));

        let rs = vec![rec(0, 1, Some(1.0)), rec(1, 1, Some(-3.0))];
        assert_eq!(learning_curve(&rs, &BootstrapConfig::default()).unwrap()[0].mean_abs_error, Some(2.0));
    }

    #[test]
    fn all_failed_gives_null_point() {
        let rs = vec![rec(0, 2, None), rec(1, 2, None), rec(0, 3, Some(1.0))];
        let c = learning_curve(&rs, &BootstrapConfig::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].mean_abs_error, None);
        assert_eq!((c[0].count, c[0].failures), (0, 2));
        assert_eq!((c[1].count, c[1].failures), (1, 0));
    }

    #[test]
    fn rejects_empty_and_bad_level() {
        assert!(learning_curve(&[], &BootstrapConfig::default()).is_err());
        let cfg = BootstrapConfig {
            ci_level: 1.0,
            ..Default::default()
        };
        assert!(learning_curve(&[rec(0, 0, Some(1.0))], &cfg).is_err());
    }

    #[test]
    fn report_shape_and_optional_bound() {
        let mk = |id: &str| {
            let rs: Vec<_> = (0..4)
                .flat_map(|e| (0..50).map(move |n| rec(e, n, Some(0.1 * (e + 1) as f64))))
                .map(|mut r| {
                    r.predictor_id = id.into();
                    r
                })
                .collect();
            (id.to_string(), learning_curve(&rs, &BootstrapConfig::default()).unwrap())
        };
        let curves = vec![mk("a"), mk("b")];
        let bound: Vec<_> = (0..50).map(|n| (n, (n > 0).then_some(0.04))).collect();
        let gp = curves[0].1.clone();
        let r = curve_report(&curves, Some(&bound), Some(&gp)).unwrap();
        let csv = r.to_csv().unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 51);
        assert_eq!(lines[0], "n,a_mae,a_lo,a_hi,b_mae,b_lo,b_hi,nn_bound,gp_ref");
        assert!(lines[1].starts_with("0,") && lines[1].contains(",,"));

        let r = curve_report(&curves, None, None).unwrap();
        assert_eq!(r.header().len(), 7);
        assert!(r.to_plot_json().get("nn_bound").is_none());

        let short: Vec<_> = bound[..10].to_vec();
        assert!(curve_report(&curves, Some(&short), None).is_err());
    }
}
