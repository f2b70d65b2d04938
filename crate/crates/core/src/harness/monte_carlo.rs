use std::collections::BTreeMap;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Scenario};
use super::episode::{run_scenario, RngDisturbance, TrajectoryLog};
use crate::{Error, Result};

/// Run every seed of a scenario in parallel; results come back in seed order.
pub fn run_seeds(sc: &Scenario, seeds: &[u64]) -> Result<Vec<TrajectoryLog>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut source = RngDisturbance::new(seed, sc.disturbance);
            run_scenario(sc, seed, &mut source).map_err(|e| Error::Seed {
                seed,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Per-step statistics of one channel across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Envelope {
    fn from_series(series: &[Vec<f64>]) -> Self {
        let len = series.iter().map(Vec::len).min().unwrap_or(0);
        let mut env = Envelope {
            min: vec![f64::INFINITY; len],
            max: vec![f64::NEG_INFINITY; len],
            mean: vec![0.0; len],
        };
        for s in series {
            for t in 0..len {
                env.min[t] = env.min[t].min(s[t]);
                env.max[t] = env.max[t].max(s[t]);
                env.mean[t] += s[t] / series.len() as f64;
            }
        }
        env
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub seeds: Vec<u64>,
    /// Keyed by channel: state names, `u`, `B`, `theta_hat_i`.
    pub channels: BTreeMap<String, Envelope>,
    /// `min_t min_seed B(x_t)`.
    pub safety_floor: f64,
}

pub fn envelope(logs: &[TrajectoryLog]) -> EnvelopeReport {
    let mut channels = BTreeMap::new();
    if let Some(first) = logs.first() {
        for (i, name) in first.header.state_names.iter().enumerate() {
            let series: Vec<Vec<f64>> = logs.iter().map(|l| l.steps.iter().map(|s| s.x[i]).collect()).collect();
            channels.insert(name.clone(), Envelope::from_series(&series));
        }
        let u: Vec<Vec<f64>> = logs
            .iter()
            .map(|l| l.steps.iter().filter_map(|s| s.u_safe.as_ref().map(|u| u[0])).collect())
            .collect();
        channels.insert("u".into(), Envelope::from_series(&u));
        let b: Vec<Vec<f64>> = logs.iter().map(|l| l.steps.iter().map(|s| s.b).collect()).collect();
        channels.insert("B".into(), Envelope::from_series(&b));
        for j in 0..first.header.theta_true.len() {
            let th: Vec<Vec<f64>> = logs.iter().map(|l| l.steps.iter().map(|s| s.theta_hat[j]).collect()).collect();
            channels.insert(format!("theta_hat_{}", j + 1), Envelope::from_series(&th));
        }
    }
    EnvelopeReport {
        seeds: logs.iter().map(|l| l.header.seed).collect(),
        safety_floor: logs.iter().map(TrajectoryLog::min_b).fold(f64::INFINITY, f64::min),
        channels,
    }
}

/// Envelope over all seeds of `config`; needs at least two seed entries.
pub fn run_monte_carlo(config: &RunConfig) -> Result<(EnvelopeReport, Vec<TrajectoryLog>)> {
    if config.seeds.len() < 2 {
        return Err(Error::Config("a Monte-Carlo run needs at least two seeds".into()));
    }
    let sc = config.scenario()?;
    let logs = run_seeds(&sc, &config.seeds)?;
    Ok((envelope(&logs), logs))
}

/// Summary of the estimator over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub seed: u64,
    pub theta_true_always_in_set: bool,
    pub beta1_initial: f64,
    pub beta1_final: f64,
    pub error_initial: f64,
    pub error_final: f64,
    pub theta_hat_final: Vec<f64>,
    pub final_range: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub runs: Vec<EstimationSummary>,
    pub mean_beta1_ratio: f64,
    pub mean_error_ratio: f64,
    pub all_consistent: bool,
    pub envelope: EnvelopeReport,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn estimation_summary(log: &TrajectoryLog) -> EstimationSummary {
    let first = log.steps.first().expect("log has the initial state");
    let last = log.steps.last().expect("log has the initial state");
    let truth = &log.header.theta_true;
    EstimationSummary {
        seed: log.header.seed,
        theta_true_always_in_set: log.steps.iter().all(|s| s.theta_true_in_set),
        beta1_initial: first.beta1,
        beta1_final: last.beta1,
        error_initial: dist(&first.theta_hat, truth),
        error_final: dist(&last.theta_hat, truth),
        theta_hat_final: last.theta_hat.clone(),
        final_range: last.theta_range.clone(),
    }
}

/// Estimator behaviour over all seeds: consistency and contraction ratios
/// `mean(beta1_T) / mean(beta1_0)` and `mean(err_T) / mean(err_0)`.
pub fn estimation_report(logs: &[TrajectoryLog]) -> EstimationReport {
    let runs: Vec<EstimationSummary> = logs.iter().map(estimation_summary).collect();
    let n = runs.len().max(1) as f64;
    let mean = |f: fn(&EstimationSummary) -> f64| runs.iter().map(f).sum::<f64>() / n;
    EstimationReport {
        mean_beta1_ratio: mean(|r| r.beta1_final) / mean(|r| r.beta1_initial),
        mean_error_ratio: mean(|r| r.error_final) / mean(|r| r.error_initial),
        all_consistent: runs.iter().all(|r| r.theta_true_always_in_set),
        envelope: envelope(logs),
        runs,
    }
}

/// Deterministic seed list derived from one master seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.gen()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DisturbanceMode;

    #[test]
    fn duplicated_seed_has_zero_width() {
        let cfg = RunConfig {
            horizon: 20,
            seeds: vec![5, 5],
            ..RunConfig::default()
        };
        let (rep, _) = run_monte_carlo(&cfg).unwrap();
        for env in rep.channels.values() {
            assert_eq!(env.min, env.max);
        }
    }

    #[test]
    fn zero_disturbance_has_zero_width() {
        let cfg = RunConfig {
            horizon: 20,
            seeds: vec![1, 2, 3],
            disturbance: DisturbanceMode::Zero,
            ..RunConfig::default()
        };
        let (rep, logs) = run_monte_carlo(&cfg).unwrap();
        assert_eq!(logs.len(), 3);
        assert_eq!(rep.seeds, vec![1, 2, 3]);
        for env in rep.channels.values() {
            assert_eq!(env.min, env.max);
        }
    }

    #[test]
    fn single_seed_rejected() {
        let cfg = RunConfig {
            seeds: vec![1],
            ..RunConfig::default()
        };
        assert!(run_monte_carlo(&cfg).is_err());
    }
}
