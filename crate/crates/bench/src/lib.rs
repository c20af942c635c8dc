//! Benchmark harness for the planner matrix: seeded batches, CSV output,
//! summaries and the connection-distance sweep.

pub mod matrix;
pub mod report;
pub mod run;
pub mod store;
pub mod suite;

use std::path::PathBuf;

use biam_core::{MetricKind, PlannerError, Scenario};
use rayon::prelude::*;
use thiserror::Error;

pub use matrix::{planner_matrix, Base, PlannerId, Scheme};
pub use report::{summarize, Summary};
pub use run::{run_one, ObstacleScript, RunOptions, RunOutcome, RunStats};
pub use store::{MetricPolicy, MetricStore};
pub use suite::SuiteConfig;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown planner `{0}`")]
    UnknownPlanner(String),
    #[error("suite line {line}: {msg}")]
    Suite { line: usize, msg: String },
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("preparing {kind} metric for {scenario}: {source}")]
    Metric {
        scenario: Scenario,
        kind: MetricKind,
        #[source]
        source: biam_core::metrics::MetricError,
    },
    #[error("no cached {kind} metric for {scenario} in {dir} and building is disabled")]
    MissingMetricCache { scenario: Scenario, kind: MetricKind, dir: PathBuf },
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("{0} is not bidirectional; the sweep varies the connection distance")]
    NotBidirectional(PlannerId),
}

/// Every (planner, scenario, seed) cell of the suite, run in parallel and
/// returned in scenario, planner, seed order.
pub fn run_suite(suite: &SuiteConfig, store: &MetricStore) -> Result<Vec<RunStats>, BenchError> {
    suite.validate()?;
    // Prepare metrics up front so preparation time is measured without contention.
    for &scenario in &suite.scenarios {
        for p in &suite.planners {
            store.get(scenario, p.base.metric())?;
        }
    }
    let opts = RunOptions {
        budget_mode: suite.budget_mode,
        cap_s: suite.cap_s,
        sigma: suite.sigma_override,
        obstacle: None,
    };
    let mut cells = Vec::new();
    for &scenario in &suite.scenarios {
        for &planner in &suite.planners {
            for &seed in &suite.seeds {
                cells.push((scenario, planner, seed));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(scenario, planner, seed)| run_one(store, planner, scenario, seed, &opts).map(|o| o.stats))
        .collect()
}

/// Pass rate at one connection distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub runs: usize,
    pub arrived: usize,
    pub audit_failed: usize,
    pub passed: usize,
}

impl SweepPoint {
    pub fn pass_rate(&self) -> f64 {
        self.passed as f64 / self.runs as f64
    }
}

/// Runs a bidirectional planner at each `sigma` for every seed.
pub fn sigma_sweep(
    store: &MetricStore,
    scenario: Scenario,
    planner: PlannerId,
    sigmas: &[f64],
    seeds: &[u64],
    base: &RunOptions,
) -> Result<Vec<RunStats>, BenchError> {
    if !planner.scheme.bidirectional() {
        return Err(BenchError::NotBidirectional(planner));
    }
    for &s in sigmas {
        let mut c = planner.config(scenario);
        c.sigma = s;
        c.validate()?;
    }
    store.get(scenario, planner.base.metric())?;
    let mut cells = Vec::new();
    for &sigma in sigmas {
        for &seed in seeds {
            cells.push((sigma, seed));
        }
    }
    cells
        .into_par_iter()
        .map(|(sigma, seed)| {
            let opts = RunOptions {
                sigma: Some(sigma),
                ..base.clone()
            };
            run_one(store, planner, scenario, seed, &opts).map(|o| o.stats)
        })
        .collect()
}

/// Groups sweep rows by sigma, in the order the sigmas first appear.
pub fn sweep_report(rows: &[RunStats]) -> Vec<SweepPoint> {
    let mut out: Vec<SweepPoint> = Vec::new();
    for r in rows {
        let i = match out.iter().position(|p| p.sigma == r.sigma) {
            Some(i) => i,
            None => {
                out.push(SweepPoint {
                    sigma: r.sigma,
                    runs: 0,
                    arrived: 0,
                    audit_failed: 0,
                    passed: 0,
                });
                out.len() - 1
            }
        };
        let p = &mut out[i];
        p.runs += 1;
        p.arrived += r.arrived as usize;
        p.audit_failed += (r.audit_failures > 0) as usize;
        p.passed += r.passed() as usize;
    }
    out
}
