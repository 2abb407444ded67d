//! Reward functions for RL fine-tuning on these tasks, and group-relative
//! advantage normalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bias::prediction_loglik;
use crate::error::{Error, Result};
use crate::gp::Demo;
use crate::kernel::{KernelSpec, NoiseSpec};
use crate::prompt::parse_prediction;
use crate::tasks::TaskSet;

/// Population standard deviations below this give all-zero advantages.
pub const STD_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardKind {
    NegAbsError,
    LogLik {
        kernel: KernelSpec,
        #[serde(rename = "noise_variance")]
        noise: NoiseSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardCaps {
    /// Lowest reward a parseable completion can get.
    pub parse_floor: f64,
    /// Reward for a completion with no number in it.
    pub fail_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    #[serde(flatten)]
    pub kind: RewardKind,
    pub caps: RewardCaps,
}

impl RewardConfig {
    pub fn neg_abs_error() -> Self {
        Self {
            kind: RewardKind::NegAbsError,
            caps: RewardCaps {
                parse_floor: -10.0,
                fail_value: -11.0,
            },
        }
    }

    pub fn log_lik(kernel: KernelSpec, noise: NoiseSpec) -> Self {
        Self {
            kind: RewardKind::LogLik { kernel, noise },
            caps: RewardCaps {
                parse_floor: -999.0,
                fail_value: -1000.0,
            },
        }
    }

    pub fn with_caps(self, parse_floor: f64, fail_value: f64) -> Result<Self> {
        let c = Self {
            caps: RewardCaps {
                parse_floor,
                fail_value,
            },
            ..self
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let RewardCaps {
            parse_floor,
            fail_value,
        } = self.caps;
        if !(fail_value < parse_floor && fail_value.is_finite() && parse_floor.is_finite()) {
            return Err(Error::domain(format!(
                "fail value {fail_value} must be below the parse floor {parse_floor}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RewardContext<'a> {
    pub demos: &'a [Demo],
    pub query: &'a [f64],
    pub y_target: f64,
}

pub fn reward(config: &RewardConfig, completion: &str, context: &RewardContext<'_>) -> f64 {
    let caps = config.caps;
    let Some(v) = parse_prediction(completion).value else {
        return caps.fail_value;
    };
    let raw = match config.kind {
        RewardKind::NegAbsError => -(v - context.y_target).abs(),
        RewardKind::LogLik { kernel, noise } => {
            prediction_loglik(&kernel, &noise, context.demos, context.query, v, 0.0).unwrap_or(f64::NEG_INFINITY)
        }
    };
    // NaN only arises from a broken config; treat it as the floor.
    if raw.is_nan() {
        caps.parse_floor
    } else {
        raw.max(caps.parse_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageVector {
    pub values: Vec<f64>,
}

/// `(r − mean) / std` with the population standard deviation.
pub fn advantages(rewards: &[f64]) -> AdvantageVector {
    if rewards.is_empty() {
        return AdvantageVector { values: Vec::new() };
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let values = if std < STD_GUARD {
        vec![0.0; rewards.len()]
    } else {
        rewards.iter().map(|r| (r - mean) / std).collect()
    };
    AdvantageVector { values }
}

/// One line of a batch-scoring request file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub completion: String,
    pub episode_id: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub reward: f64,
    /// Completions for the same prompt share a group: `"{episode_id}:{n}"`.
    pub group_id: String,
    /// Normalized within the group.
    pub advantage: f64,
}

pub fn group_id(episode_id: &str, n: usize) -> String {
    format!("{episode_id}:{n}")
}

/// Rewards each request against its task and normalizes within groups.
/// Output order follows the input.
pub fn score_batch(config: &RewardConfig, taskset: &TaskSet, requests: &[ScoreRequest]) -> Result<Vec<ScoreResult>> {
    config.validate()?;
    let mut rewards = Vec::with_capacity(requests.len());
    for r in requests {
        let episode = taskset
            .episode(&r.episode_id)
            .ok_or_else(|| Error::Lookup(format!("episode {} is not in the task set", r.episode_id)))?;
        let task = episode.prefix_task(r.n)?;
        rewards.push(reward(
            config,
            &r.completion,
            &RewardContext {
                demos: &task.demos,
                query: &task.query,
                y_target: task.target,
            },
        ));
    }

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in requests.iter().enumerate() {
        groups.entry(group_id(&r.episode_id, r.n)).or_default().push(i);
    }
    let mut out: Vec<Option<ScoreResult>> = vec![None; requests.len()];
    for (gid, idx) in groups {
        let adv = advantages(&idx.iter().map(|&i| rewards[i]).collect::<Vec<_>>());
        for (&i, a) in idx.iter().zip(adv.values) {
            out[i] = Some(ScoreResult {
                reward: rewards[i],
                group_id: gid.clone(),
                advantage: a,
            });
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every request is in a group")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(y: f64) -> RewardContext<'static> {
        RewardContext {
            demos: &[],
            query: &[1.0],
            y_target: y,
        }
    }

    #[test]
    fn neg_abs_error_cases() {
        let c = RewardConfig::neg_abs_error();
        assert_eq!(reward(&c, "Y: 0.5", &ctx(0.5)), 0.0);
        assert_eq!(reward(&c, "I refuse", &ctx(0.5)), -11.0);
        assert_eq!(reward(&c, "25.5", &ctx(0.5)), -10.0);
        assert_eq!(reward(&c, "1e999", &ctx(0.5)), -10.0);
        assert!((reward(&c, "0.75", &ctx(0.5)) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn log_lik_cases() {
        let k = KernelSpec::squared_exponential(8.0, 1.0).unwrap();
        let c = RewardConfig::log_lik(k, NoiseSpec::new(0.001).unwrap());
        assert_eq!(reward(&c, "nothing", &ctx(0.0)), -1000.0);
        assert!((reward(&c, "0", &ctx(0.0)) + 0.919_438_283_371_214_508).abs() < 1e-14);
        assert_eq!(reward(&c, "1e10", &ctx(0.0)), -999.0);
    }

    #[test]
    fn caps_validation() {
        assert!(RewardConfig::neg_abs_error().with_caps(-5.0, -5.0).is_err());
        assert!(RewardConfig::neg_abs_error().with_caps(-5.0, -6.0).is_ok());
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(advantages(&[5.0, 5.0, 5.0]).values, vec![0.0; 3]);
        let a = advantages(&[1.0, 2.0, 3.0]).values;
        let expect = 1.224_744_871_391_589_05;
        assert!((a[0] + expect).abs() < 1e-12 && a[1].abs() < 1e-15 && (a[2] - expect).abs() < 1e-12);
        assert_eq!(advantages(&[3.0]).values, vec![0.0]);
    }

    #[test]
    fn config_serde() {
        let c: RewardConfig = serde_json::from_str(
            r#"{"kind":"log_lik","kernel":"se,,8,1","noise_variance":0.001,"caps":{"parse_floor":-999,"fail_value":-1000}}"#,
        )
        .unwrap();
        assert!(matches!(c.kind, RewardKind::LogLik { .. }));
        let back = serde_json::to_string(&RewardConfig::neg_abs_error()).unwrap();
        assert!(back.contains("\"kind\":\"neg_abs_error\""));
    }
}
