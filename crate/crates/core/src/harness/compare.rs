use serde::{Deserialize, Serialize};

use super::config::{Controller, RunConfig};
use super::episode::TrajectoryLog;
use super::monte_carlo::run_seeds;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub min_b: f64,
    pub first_violation: Option<usize>,
    pub first_exit: Option<usize>,
    pub min_u: f64,
    pub modification_energy: f64,
}

impl SeedOutcome {
    pub fn from_log(log: &TrajectoryLog) -> Self {
        Self {
            seed: log.header.seed,
            min_b: log.min_b(),
            first_violation: log.first_violation(),
            first_exit: log.first_exit(),
            min_u: log.min_u(),
            modification_energy: log.modification_energy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub message: String,
    /// Infeasible filter or falsified model.
    pub assumption_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerOutcome {
    pub controller: Controller,
    /// Empty when the run failed.
    pub seeds: Vec<SeedOutcome>,
    pub failure: Option<Failure>,
}

impl ControllerOutcome {
    pub fn seeds(&self) -> &[SeedOutcome] {
        &self.seeds
    }

    pub fn min_b(&self) -> f64 {
        self.seeds().iter().map(|s| s.min_b).fold(f64::INFINITY, f64::min)
    }

    pub fn violation_fraction(&self) -> f64 {
        let s = self.seeds();
        s.iter().filter(|o| o.min_b < 0.0).count() as f64 / s.len().max(1) as f64
    }

    pub fn mean_energy(&self) -> f64 {
        let s = self.seeds();
        s.iter().map(|o| o.modification_energy).sum::<f64>() / s.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub controllers: Vec<ControllerOutcome>,
}

impl ComparisonReport {
    pub fn get(&self, c: Controller) -> Option<&ControllerOutcome> {
        self.controllers.iter().find(|o| o.controller == c)
    }
}

/// Run the three comparison controllers on shared seeds. A failing
/// controller is recorded and the others still run.
pub fn compare_controllers(config: &RunConfig) -> Result<ComparisonReport> {
    let base = config.scenario()?;
    let controllers = Controller::COMPARISON
        .iter()
        .map(|&c| {
            let sc = base.with_controller(c);
            match run_seeds(&sc, &config.seeds) {
                Ok(logs) => ControllerOutcome {
                    controller: c,
                    seeds: logs.iter().map(SeedOutcome::from_log).collect(),
                    failure: None,
                },
                Err(e) => {
                    log::warn!("{}: {e}", c.name());
                    ControllerOutcome {
                        controller: c,
                        seeds: Vec::new(),
                        failure: Some(Failure {
                            message: e.to_string(),
                            assumption_violation: e.is_assumption_violation(),
                        }),
                    }
                }
            }
        })
        .collect();
    Ok(ComparisonReport {
        seeds: config.seeds.clone(),
        controllers,
    })
}
