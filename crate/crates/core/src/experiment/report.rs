use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{Harness, ScenarioConfig, Strategy, TrialRecord};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub initial_index: usize,
    pub trials: usize,
    pub successes: usize,
    pub raw_successes: usize,
    pub success_rate: f64,
    pub raw_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub conditions: Vec<ConditionSummary>,
    pub trials: usize,
    pub successes: usize,
    pub raw_successes: usize,
    /// Counts rescan successes.
    pub success_rate: f64,
    pub raw_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub trials_per_condition: usize,
    pub strategies: Vec<StrategySummary>,
    /// Ordered by strategy, initial index, then arm instance.
    pub records: Vec<TrialRecord>,
}

fn rate(n: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        n as f64 / of as f64
    }
}

impl ExperimentReport {
    /// Aggregates records; only counts are used, so record order does not matter.
    pub fn from_records(cfg: &ScenarioConfig, records: Vec<TrialRecord>) -> Self {
        let strategies = cfg
            .strategies
            .iter()
            .map(|&strategy| {
                let conditions: Vec<ConditionSummary> = (0..cfg.initial_configs.len())
                    .map(|i| {
                        let mine = || records.iter().filter(move |r| r.strategy == strategy && r.initial_index == i);
                        let trials = mine().count();
                        let successes = mine().filter(|r| r.success).count();
                        let raw_successes = mine().filter(|r| r.raw_success).count();
                        ConditionSummary {
                            initial_index: i,
                            trials,
                            successes,
                            raw_successes,
                            success_rate: rate(successes, trials),
                            raw_success_rate: rate(raw_successes, trials),
                        }
                    })
                    .collect();
                let trials = conditions.iter().map(|c| c.trials).sum();
                let successes = conditions.iter().map(|c| c.successes).sum();
                let raw_successes = conditions.iter().map(|c| c.raw_successes).sum();
                StrategySummary {
                    strategy,
                    conditions,
                    trials,
                    successes,
                    raw_successes,
                    success_rate: rate(successes, trials),
                    raw_success_rate: rate(raw_successes, trials),
                }
            })
            .collect();
        Self {
            scenario: cfg.name.clone(),
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            trials_per_condition: cfg.trials_per_condition,
            strategies,
            records,
        }
    }

    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One flat row per trial.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every strategy × initial condition × arm instance in parallel.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    let harness = Harness::new(cfg)?;
    run_with(&harness)
}

/// [`run_experiment`] over an already prepared harness.
pub fn run_with(harness: &Harness) -> Result<ExperimentReport> {
    let cfg = harness.config();
    let jobs: Vec<(Strategy, usize, usize)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| (0..cfg.initial_configs.len()).flat_map(move |i| (0..cfg.trials_per_condition).map(move |t| (s, i, t))))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(s, i, t)| harness.run_trial(s, i, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::from_records(cfg, records))
}
