//! CSV output and per-cell statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use biam_core::Scenario;

use crate::matrix::{Base, PlannerId, Scheme};
use crate::run::RunStats;
use crate::BenchError;

/// Column order of run CSVs.
pub const CSV_COLUMNS: [&str; 15] = [
    "planner_id",
    "scenario",
    "seed",
    "sigma",
    "arrived",
    "search_time_s",
    "traveled_length_m",
    "final_planned_length_m",
    "node_count_at_attach",
    "metric_prep_time_s",
    "sim_time_s",
    "ticks",
    "audit_failures",
    "obstacle_tick",
    "replan_ticks",
];

pub fn to_csv(rows: &[RunStats]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<RunStats>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(BenchError::InvalidSuite(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

pub fn write_csv(path: &Path, rows: &[RunStats]) -> Result<(), BenchError> {
    std::fs::write(path, to_csv(rows)?).map_err(|e| BenchError::Io(path.to_path_buf(), e))
}

pub fn load_csv(path: &Path) -> Result<Vec<RunStats>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.to_path_buf(), e))?;
    from_csv(&text)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// `(modified - baseline) / baseline` in percent; `None` flags an empty or zero baseline.
pub fn percent_change(baseline: Option<f64>, modified: Option<f64>) -> Option<f64> {
    match (baseline, modified) {
        (Some(b), Some(m)) if b != 0.0 && b.is_finite() && m.is_finite() => Some((m - b) / b * 100.0),
        _ => None,
    }
}

/// Statistics of one (scenario, planner) cell. Means and medians cover
/// arrived runs only; capped runs count as failures.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub planner: PlannerId,
    pub runs: usize,
    pub arrived: usize,
    pub passed: usize,
    pub search_mean: Option<f64>,
    pub search_median: Option<f64>,
    pub length_mean: Option<f64>,
    pub length_median: Option<f64>,
}

/// One modified scheme against the original row of the same base planner.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub scenario: Scenario,
    pub base: Base,
    pub scheme: Scheme,
    pub search_mean_pct: Option<f64>,
    pub search_median_pct: Option<f64>,
    pub length_mean_pct: Option<f64>,
    pub length_median_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub comparisons: Vec<Comparison>,
}

impl Summary {
    pub fn cell(&self, scenario: Scenario, planner: PlannerId) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.scenario == scenario && c.planner == planner)
    }

    pub fn comparison(&self, scenario: Scenario, base: Base, scheme: Scheme) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.scenario == scenario && c.base == base && c.scheme == scheme)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<9} {:<16} {:>4} {:>4} {:>4} {:>10} {:>10} {:>10} {:>10}",
            "scenario", "planner", "runs", "arr", "pass", "search_mu", "search_md", "length_mu", "length_md"
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:<9} {:<16} {:>4} {:>4} {:>4} {:>10} {:>10} {:>10} {:>10}",
                c.scenario.name(),
                c.planner.display_name(),
                c.runs,
                c.arrived,
                c.passed,
                fmt_opt(c.search_mean, 3),
                fmt_opt(c.search_median, 3),
                fmt_opt(c.length_mean, 2),
                fmt_opt(c.length_median, 2)
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<9} {:<16} {:>11} {:>11} {:>11} {:>11}",
            "scenario", "vs original", "search_mu%", "search_md%", "length_mu%", "length_md%"
        );
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{:<9} {:<16} {:>11} {:>11} {:>11} {:>11}",
                c.scenario.name(),
                PlannerId::new(c.base, c.scheme).display_name(),
                fmt_opt(c.search_mean_pct, 1),
                fmt_opt(c.search_median_pct, 1),
                fmt_opt(c.length_mean_pct, 1),
                fmt_opt(c.length_median_pct, 1)
            );
        }
        s
    }

    /// Comparison table as CSV; flagged cells are written as `n/a`.
    pub fn comparisons_csv(&self) -> String {
        let mut s = String::from("scenario,planner_id,search_mean_pct,search_median_pct,length_mean_pct,length_median_pct\n");
        for c in &self.comparisons {
            let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| x.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.scenario.name(),
                PlannerId::new(c.base, c.scheme),
                f(c.search_mean_pct),
                f(c.search_median_pct),
                f(c.length_mean_pct),
                f(c.length_median_pct)
            );
        }
        s
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("n/a".to_string(), |x| format!("{x:.prec$}"))
}

pub fn summarize(rows: &[RunStats]) -> Summary {
    let mut groups: BTreeMap<(Scenario, PlannerId), Vec<&RunStats>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scenario, r.planner_id)).or_default().push(r);
    }
    let cells: Vec<CellSummary> = groups
        .iter()
        .map(|(&(scenario, planner), runs)| {
            let arrived: Vec<&&RunStats> = runs.iter().filter(|r| r.arrived).collect();
            let search: Vec<f64> = arrived.iter().filter_map(|r| r.search_time_s).collect();
            let length: Vec<f64> = arrived.iter().map(|r| r.traveled_length_m).collect();
            CellSummary {
                scenario,
                planner,
                runs: runs.len(),
                arrived: arrived.len(),
                passed: runs.iter().filter(|r| r.passed()).count(),
                search_mean: mean(&search),
                search_median: median(&search),
                length_mean: mean(&length),
                length_median: median(&length),
            }
        })
        .collect();

    let mut comparisons = Vec::new();
    let scenarios: Vec<Scenario> = {
        let mut v: Vec<Scenario> = cells.iter().map(|c| c.scenario).collect();
        v.dedup();
        v
    };
    let find = |s: Scenario, p: PlannerId| cells.iter().find(|c| c.scenario == s && c.planner == p);
    for &scenario in &scenarios {
        for base in Base::ALL {
            let original = find(scenario, PlannerId::new(base, Scheme::Original));
            for scheme in [Scheme::Bidirectional, Scheme::NewRewiring, Scheme::Both] {
                let Some(modified) = find(scenario, PlannerId::new(base, scheme)) else { continue };
                let pick = |f: fn(&CellSummary) -> Option<f64>| percent_change(original.and_then(f), f(modified));
                comparisons.push(Comparison {
                    scenario,
                    base,
                    scheme,
                    search_mean_pct: pick(|c| c.search_mean),
                    search_median_pct: pick(|c| c.search_median),
                    length_mean_pct: pick(|c| c.length_mean),
                    length_median_pct: pick(|c| c.length_median),
                });
            }
        }
    }
    Summary { cells, comparisons }
}
