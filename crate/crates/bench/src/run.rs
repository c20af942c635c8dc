//! A single benchmark run: one planner row on one scenario with one seed.

use biam_core::audit::{audit_polyline, audit_segment};
use biam_core::geometry::Point;
use biam_core::{BudgetMode, Phase, Planner, Scenario, WorldMap};
use serde::{Deserialize, Serialize};

use crate::matrix::PlannerId;
use crate::store::MetricStore;
use crate::BenchError;

/// Per-run cap on planner time after the goal is set, in seconds.
pub const RUN_CAP_S: f64 = 120.0;

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub planner_id: PlannerId,
    pub scenario: Scenario,
    pub seed: u64,
    pub sigma: f64,
    pub arrived: bool,
    /// Time from goal assignment to the first finite goal cost.
    pub search_time_s: Option<f64>,
    /// Integral of the agent's trajectory.
    pub traveled_length_m: f64,
    /// Best planned route from the start after arrival.
    pub final_planned_length_m: Option<f64>,
    pub node_count_at_attach: Option<usize>,
    /// Wall-clock preparation of the assisting metric; left empty in
    /// deterministic mode so that reruns are byte-identical.
    pub metric_prep_time_s: Option<f64>,
    pub sim_time_s: f64,
    pub ticks: u64,
    pub audit_failures: usize,
    pub obstacle_tick: Option<u64>,
    /// Ticks between obstacle injection and the first clear path.
    pub replan_ticks: Option<u64>,
}

impl RunStats {
    /// Arrived within the cap with every traversed segment passing the audit.
    pub fn passed(&self) -> bool {
        self.arrived && self.audit_failures == 0
    }
}

/// A disc dropped onto the agent's current path during the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleScript {
    /// Earliest tick for the injection; it waits until a path exists.
    pub at_tick: u64,
    /// Arc length ahead of the agent at which the disc is centred.
    pub ahead: f64,
    pub radius: f64,
}

impl Default for ObstacleScript {
    fn default() -> Self {
        ObstacleScript {
            at_tick: 20,
            ahead: 12.0,
            radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub budget_mode: BudgetMode,
    pub cap_s: f64,
    pub sigma: Option<f64>,
    pub obstacle: Option<ObstacleScript>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            budget_mode: BudgetMode::deterministic(),
            cap_s: RUN_CAP_S,
            sigma: None,
            obstacle: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub stats: RunStats,
    /// `t x y phase cost nodes_f nodes_r` per tick.
    pub log: String,
    pub trajectory: Vec<Point>,
}

pub fn run_one(
    store: &MetricStore,
    planner: PlannerId,
    scenario: Scenario,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutcome, BenchError> {
    let prepared = store.get(scenario, planner.base.metric())?;
    let mut config = planner.config(scenario);
    config.seed = seed;
    config.budget_mode = opts.budget_mode;
    if let Some(s) = opts.sigma {
        config.sigma = s;
    }
    let mut map = scenario.load();
    let start = map.start().expect("scenario start");
    let goal = map.goal().expect("scenario goal");
    let sigma = config.sigma;
    let deterministic = config.budget_mode.is_deterministic();
    let mut p = Planner::new(config, prepared.metric, &map, start)?;
    p.set_goal(goal, &map)?;

    let mut trajectory = vec![start];
    let mut audit_failures = 0;
    let mut obstacle_tick = None;
    let mut replan_ticks = None;
    while p.phase() != Phase::Arrived && p.elapsed_since_goal() < opts.cap_s {
        if let (Some(script), None) = (opts.obstacle, obstacle_tick) {
            if p.stats().ticks >= script.at_tick {
                if let Some(c) = inject_point(&p, &map, script) {
                    map.add_disc(c, script.radius).expect("disc center lies on the path");
                    obstacle_tick = Some(p.stats().ticks);
                }
            }
        }
        let r = p.plan_tick(&map);
        for &(a, b) in &r.traversed {
            if !audit_segment(&map, a, b) {
                audit_failures += 1;
            }
            trajectory.push(b);
        }
        if let (Some(t0), None) = (obstacle_tick, replan_ticks) {
            if r.cost_goal.is_finite() && path_clear(&p, &map) {
                replan_ticks = Some(r.tick - t0);
            }
        }
    }

    let arrived = p.phase() == Phase::Arrived;
    let stats = RunStats {
        planner_id: planner,
        scenario,
        seed,
        sigma,
        arrived,
        search_time_s: p.stats().search_time,
        traveled_length_m: p.stats().traveled,
        final_planned_length_m: arrived.then(|| p.planned_length_from(start, &map)),
        node_count_at_attach: p.stats().node_count_at_attach,
        metric_prep_time_s: (!deterministic).then_some(prepared.prep_time),
        sim_time_s: p.elapsed_since_goal(),
        ticks: p.stats().ticks,
        audit_failures,
        obstacle_tick,
        replan_ticks,
    };
    Ok(RunOutcome {
        stats,
        log: p.log_text(),
        trajectory,
    })
}

fn path_clear(p: &Planner, map: &WorldMap) -> bool {
    audit_polyline(map, &p.current_path_points()) == 0
}

/// Point on the current path `ahead` metres from the agent, provided the
/// path continues well past it and the disc would cover neither the agent
/// nor the goal.
fn inject_point(p: &Planner, map: &WorldMap, script: ObstacleScript) -> Option<Point> {
    if p.phase() != Phase::Tracking {
        return None;
    }
    let pts = p.current_path_points();
    let goal = p.goal()?;
    let mut walked = 0.0;
    for w in pts.windows(2) {
        let len = w[0].distance(w[1]);
        if walked + len >= script.ahead {
            let c = w[0].step_toward(w[1], script.ahead - walked);
            let margin = script.radius + 1.0;
            let ok = c.distance(p.agent()) > margin && c.distance(goal) > margin && map.in_bounds(c);
            return ok.then_some(c);
        }
        walked += len;
    }
    None
}
