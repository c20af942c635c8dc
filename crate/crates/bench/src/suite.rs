//! Suite documents: a versioned key/value description of a benchmark batch.
//!
//! ```text
//! biam-suite v1
//! # comment
//! planners = bi-am-rrt-d, am-rrt-d     (or `all`)
//! scenarios = maze, office             (or `all`)
//! repetitions = 25
//! seeds = 0..25                        (optional; defaults to 0..repetitions)
//! budget = wall                        (wall | deterministic[:N]; defaults to wall)
//! sigma = 30                           (optional override)
//! cap = 120                            (optional, seconds)
//! ```

use std::collections::HashSet;

use biam_core::{BudgetMode, Scenario};

use crate::matrix::{planner_matrix, PlannerId};
use crate::run::RUN_CAP_S;
use crate::BenchError;

pub const SUITE_HEADER: &str = "biam-suite v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub planners: Vec<PlannerId>,
    pub scenarios: Vec<Scenario>,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    pub budget_mode: BudgetMode,
    pub sigma_override: Option<f64>,
    pub cap_s: f64,
}

impl SuiteConfig {
    /// `repetitions` seeded runs (seeds `0..repetitions`) of every listed cell.
    pub fn new(planners: Vec<PlannerId>, scenarios: Vec<Scenario>, repetitions: usize) -> Self {
        SuiteConfig {
            planners,
            scenarios,
            repetitions,
            seeds: (0..repetitions as u64).collect(),
            budget_mode: BudgetMode::WallClock,
            sigma_override: None,
            cap_s: RUN_CAP_S,
        }
    }

    /// The full matrix on all three scenarios with 25 repetitions.
    pub fn full() -> Self {
        Self::new(planner_matrix(), Scenario::ALL.to_vec(), 25)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions == 0 {
            return Err(BenchError::InvalidSuite("repetitions must be at least 1".into()));
        }
        if self.seeds.len() != self.repetitions {
            return Err(BenchError::InvalidSuite(format!(
                "{} seeds given for {} repetitions",
                self.seeds.len(),
                self.repetitions
            )));
        }
        if self.planners.is_empty() || self.scenarios.is_empty() {
            return Err(BenchError::InvalidSuite("no planners or no scenarios".into()));
        }
        if !(self.cap_s > 0.0) {
            return Err(BenchError::InvalidSuite(format!("cap must be positive, got {}", self.cap_s)));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == SUITE_HEADER => {}
            _ => return Err(err(1, format!("expected header `{SUITE_HEADER}`"))),
        }
        let mut planners = None;
        let mut scenarios = None;
        let mut repetitions = None;
        let mut seeds = None;
        let mut budget_mode = BudgetMode::WallClock;
        let mut sigma_override = None;
        let mut cap_s = RUN_CAP_S;
        let mut seen = HashSet::new();

        for (i, raw) in lines {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(n, format!("duplicate key `{key}`")));
            }
            match key {
                "planners" => {
                    planners = Some(if value == "all" {
                        planner_matrix()
                    } else {
                        list(value)
                            .map(|s| s.parse().map_err(|e: BenchError| err(n, e.to_string())))
                            .collect::<Result<_, _>>()?
                    })
                }
                "scenarios" => {
                    scenarios = Some(if value == "all" {
                        Scenario::ALL.to_vec()
                    } else {
                        list(value)
                            .map(|s| s.parse().map_err(|e: biam_core::world::WorldError| err(n, e.to_string())))
                            .collect::<Result<_, _>>()?
                    })
                }
                "repetitions" => repetitions = Some(number::<usize>(n, value)?),
                "seeds" => seeds = Some(parse_seeds(n, value)?),
                "budget" => budget_mode = parse_budget(n, value)?,
                "sigma" => sigma_override = Some(number::<f64>(n, value)?),
                "cap" => cap_s = number::<f64>(n, value)?,
                other => return Err(err(n, format!("unknown key `{other}`"))),
            }
        }

        let planners = planners.ok_or_else(|| BenchError::InvalidSuite("missing `planners`".into()))?;
        let scenarios = scenarios.ok_or_else(|| BenchError::InvalidSuite("missing `scenarios`".into()))?;
        let repetitions = match (repetitions, &seeds) {
            (Some(r), _) => r,
            (None, Some(s)) => s.len(),
            (None, None) => 25,
        };
        let suite = SuiteConfig {
            planners,
            scenarios,
            repetitions,
            seeds: seeds.unwrap_or_else(|| (0..repetitions as u64).collect()),
            budget_mode,
            sigma_override,
            cap_s,
        };
        suite.validate()?;
        Ok(suite)
    }

    pub fn to_document(&self) -> String {
        let planners: Vec<String> = self.planners.iter().map(|p| p.to_string()).collect();
        let scenarios: Vec<&str> = self.scenarios.iter().map(|s| s.name()).collect();
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let budget = match self.budget_mode {
            BudgetMode::WallClock => "wall".to_string(),
            BudgetMode::Deterministic { iterations_per_slice } => format!("deterministic:{iterations_per_slice}"),
        };
        let mut out = format!(
            "{SUITE_HEADER}\nplanners = {}\nscenarios = {}\nrepetitions = {}\nseeds = {}\nbudget = {budget}\ncap = {}\n",
            planners.join(", "),
            scenarios.join(", "),
            self.repetitions,
            seeds.join(", "),
            self.cap_s
        );
        if let Some(s) = self.sigma_override {
            out.push_str(&format!("sigma = {s}\n"));
        }
        out
    }
}

fn err(line: usize, msg: String) -> BenchError {
    BenchError::Suite { line, msg }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn number<T: std::str::FromStr>(line: usize, value: &str) -> Result<T, BenchError> {
    value.parse().map_err(|_| err(line, format!("bad number `{value}`")))
}

/// `a..b` or a comma list.
fn parse_seeds(line: usize, value: &str) -> Result<Vec<u64>, BenchError> {
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (number(line, a.trim())?, number(line, b.trim())?);
        return Ok((a..b).collect());
    }
    list(value).map(|s| number(line, s)).collect()
}

fn parse_budget(line: usize, value: &str) -> Result<BudgetMode, BenchError> {
    match value.split_once(':') {
        None if value == "wall" => Ok(BudgetMode::WallClock),
        None if value == "deterministic" => Ok(BudgetMode::deterministic()),
        Some(("deterministic", n)) => Ok(BudgetMode::Deterministic {
            iterations_per_slice: number(line, n.trim())?,
        }),
        _ => Err(err(line, format!("unknown budget `{value}`"))),
    }
}
