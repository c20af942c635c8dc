//! One live planner with its map, a command queue drained at tick
//! boundaries, and snapshot construction. No threads here; the server drives
//! `step` from a worker.

use std::collections::{HashSet, VecDeque};

use biam_bench::PlannerId;
use biam_core::world::DiscId;
use biam_core::{AssistingMetric, BudgetMode, Phase, Planner, PlannerConfig, Point, Scenario, WorldMap};
use serde::{Deserialize, Serialize};

use crate::protocol::{Command, Lifecycle, Obstacle, ServerMessage, Snapshot, SnapshotStats};
use crate::ServiceError;

pub const DEFAULT_TICK_RATE_HZ: f64 = 10.0;
pub const EDGE_CAP: usize = 5000;

/// Optional changes to a planner row's parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub agent_speed: Option<f64>,
    pub tick_rate_hz: Option<f64>,
    /// Sessions default to the deterministic budget.
    pub budget_mode: Option<BudgetMode>,
}

/// Planner parameters for a session; the metric is supplied separately.
pub fn session_config(scenario: Scenario, planner: PlannerId, o: &Overrides) -> Result<PlannerConfig, ServiceError> {
    let mut c = planner.config(scenario);
    c.budget_mode = o.budget_mode.unwrap_or_else(BudgetMode::deterministic);
    if let Some(seed) = o.seed {
        c.seed = seed;
    }
    if let Some(s) = o.sigma {
        c.sigma = s;
    }
    if let Some(v) = o.agent_speed {
        c.agent_speed = v;
    }
    c.validate()?;
    Ok(c)
}

pub struct SessionCore {
    scenario: Scenario,
    planner_id: PlannerId,
    planner: Planner,
    map: WorldMap,
    lifecycle: Lifecycle,
    tick: u64,
    tick_rate_hz: f64,
    queue: VecDeque<Command>,
    pending_adds: u32,
    pending_removals: HashSet<u32>,
}

impl SessionCore {
    pub fn new(
        scenario: Scenario,
        planner_id: PlannerId,
        overrides: &Overrides,
        metric: AssistingMetric,
    ) -> Result<Self, ServiceError> {
        let tick_rate_hz = overrides.tick_rate_hz.unwrap_or(DEFAULT_TICK_RATE_HZ);
        if !(tick_rate_hz > 0.0 && tick_rate_hz <= 1000.0) {
            return Err(ServiceError::BadRequest(format!("tick_rate_hz must lie in (0, 1000], got {tick_rate_hz}")));
        }
        let config = session_config(scenario, planner_id, overrides)?;
        let map = scenario.load();
        let start = map.start().expect("builtin scenarios have a start");
        let planner = Planner::new(config, metric, &map, start)?;
        Ok(SessionCore {
            scenario,
            planner_id,
            planner,
            map,
            lifecycle: Lifecycle::Created,
            tick: 0,
            tick_rate_hz,
            queue: VecDeque::new(),
            pending_adds: 0,
            pending_removals: HashSet::new(),
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn planner_id(&self) -> PlannerId {
        self.planner_id
    }

    pub fn config(&self) -> &PlannerConfig {
        self.planner.config()
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn lifecycle(&self) -> Lifecycle {
        self.lifecycle
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tick_rate_hz(&self) -> f64 {
        self.tick_rate_hz
    }

    pub fn log_text(&self) -> String {
        self.planner.log_text()
    }

    /// Validates and queues a command. The ack names the first tick whose
    /// result reflects it.
    pub fn submit(&mut self, cmd: Command) -> Result<ServerMessage, ServiceError> {
        if self.lifecycle == Lifecycle::Finished {
            return Err(ServiceError::Finished);
        }
        let mut id = None;
        match cmd {
            Command::SetGoal { x, y } => {
                finite(&[x, y])?;
                let p = Point::new(x, y);
                if !self.map.is_free(p) {
                    return Err(ServiceError::OccupiedGoal(p));
                }
            }
            Command::AddObstacle { x, y, r } => {
                finite(&[x, y, r])?;
                if r <= 0.0 {
                    return Err(ServiceError::Malformed(format!("radius must be positive, got {r}")));
                }
                if !self.map.in_bounds(Point::new(x, y)) {
                    return Err(ServiceError::Malformed(format!("obstacle centre ({x}, {y}) is off the map")));
                }
                id = Some(self.map.next_disc_id().0 + self.pending_adds);
                self.pending_adds += 1;
            }
            Command::RemoveObstacle { id: rid } => {
                let placed = self.map.discs().iter().any(|d| d.id.0 == rid);
                let pending = rid >= self.map.next_disc_id().0 && rid < self.map.next_disc_id().0 + self.pending_adds;
                if !(placed || pending) || self.pending_removals.contains(&rid) {
                    return Err(ServiceError::UnknownObstacle(rid));
                }
                self.pending_removals.insert(rid);
            }
            Command::SetSpeed { speed } => {
                finite(&[speed])?;
                if speed <= 0.0 {
                    return Err(ServiceError::Malformed(format!("speed must be positive, got {speed}")));
                }
            }
            Command::Pause | Command::Resume => {}
        }
        let ack = ServerMessage::Ack {
            cmd: cmd.name().to_string(),
            effective_tick: self.tick + 1,
            id,
        };
        self.queue.push_back(cmd);
        Ok(ack)
    }

    /// Tick boundary: drains the queue, then plans one tick if running.
    /// While paused only pause and resume are consumed; everything else
    /// waits for the next tick that actually runs. Returns the snapshot of
    /// the new tick, if one ran, and any commands that failed on apply.
    pub fn step(&mut self) -> (Option<Snapshot>, Vec<ServiceError>) {
        let mut errors = Vec::new();
        if self.lifecycle == Lifecycle::Finished {
            return (None, errors);
        }
        let mut held = VecDeque::new();
        while let Some(cmd) = self.queue.pop_front() {
            match cmd {
                Command::Pause => {
                    if self.lifecycle == Lifecycle::Running {
                        self.lifecycle = Lifecycle::Paused;
                    }
                }
                Command::Resume => {
                    self.lifecycle = Lifecycle::Running;
                    for c in held.drain(..) {
                        self.apply(c, &mut errors);
                    }
                }
                other if self.lifecycle == Lifecycle::Running => self.apply(other, &mut errors),
                other => held.push_back(other),
            }
        }
        self.queue = held;
        if self.lifecycle != Lifecycle::Running {
            return (None, errors);
        }
        self.planner.plan_tick(&self.map);
        self.tick += 1;
        (Some(self.snapshot()), errors)
    }

    fn apply(&mut self, cmd: Command, errors: &mut Vec<ServiceError>) {
        let result = match cmd {
            Command::SetGoal { x, y } => self.planner.set_goal(Point::new(x, y), &self.map).map_err(ServiceError::from),
            Command::AddObstacle { x, y, r } => {
                self.pending_adds -= 1;
                self.map.add_disc(Point::new(x, y), r).map(|_| ()).map_err(ServiceError::from)
            }
            Command::RemoveObstacle { id } => {
                self.pending_removals.remove(&id);
                self.map.remove_disc(DiscId(id)).map(|_| ()).map_err(ServiceError::from)
            }
            Command::SetSpeed { speed } => self.planner.set_agent_speed(speed).map_err(ServiceError::from),
            Command::Pause | Command::Resume => Ok(()),
        };
        if let Err(e) = result {
            errors.push(e);
        }
    }

    /// Ends the session; later commands and steps are refused.
    pub fn finish(&mut self) {
        self.lifecycle = Lifecycle::Finished;
        self.queue.clear();
    }

    pub fn snapshot(&self) -> Snapshot {
        let p = &self.planner;
        let fwd = p.forward();
        let seg = |a: Point, b: Point| [a.x, a.y, b.x, b.y];
        let forward: Vec<[f64; 4]> = fwd.edges().map(|(a, b)| seg(fwd.position(a), fwd.position(b))).collect();
        let reverse: Vec<[f64; 4]> = p
            .reverse()
            .map(|t| t.edges().map(|(a, b)| seg(t.position(a), t.position(b))).collect())
            .unwrap_or_default();
        let total = forward.len() + reverse.len();
        let keep = decimate(total, EDGE_CAP);
        let (mut edges, mut reverse_edges) = (Vec::new(), Vec::new());
        for i in keep {
            if i < forward.len() {
                edges.push(forward[i]);
            } else {
                reverse_edges.push(reverse[i - forward.len()]);
            }
        }
        let path = match p.goal() {
            Some(_) if p.phase() != Phase::Idle => p.current_path_points().iter().map(|q| [q.x, q.y]).collect(),
            _ => Vec::new(),
        };
        let cost = fwd.goal_cost();
        Snapshot {
            tick: self.tick,
            lifecycle: self.lifecycle,
            phase: p.phase(),
            agent: [p.agent().x, p.agent().y],
            goal: p.goal().map(|g| [g.x, g.y]),
            path,
            edges,
            reverse_edges,
            obstacles: self
                .map
                .discs()
                .iter()
                .map(|d| Obstacle {
                    id: d.id.0,
                    x: d.center.x,
                    y: d.center.y,
                    r: d.radius,
                })
                .collect(),
            stats: SnapshotStats {
                cost_goal: cost.is_finite().then_some(cost),
                path_length: p
                    .current_path_points()
                    .windows(2)
                    .map(|w| w[0].distance(w[1]))
                    .sum(),
                nodes_forward: fwd.len(),
                nodes_reverse: p.reverse().map_or(0, |t| t.len()),
                edges_total: total,
                elapsed_s: if p.goal().is_some() { p.elapsed_since_goal() } else { 0.0 },
                search_time_s: p.stats().search_time,
                traveled_m: p.stats().traveled,
            },
        }
    }
}

fn finite(values: &[f64]) -> Result<(), ServiceError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(ServiceError::Malformed(format!("non-finite value {v}"))),
        None => Ok(()),
    }
}

/// Evenly spaced indices into `0..total`, at most `cap` of them, in order.
pub fn decimate(total: usize, cap: usize) -> Vec<usize> {
    if total <= cap {
        return (0..total).collect();
    }
    (0..cap).map(|k| k * total / cap).collect()
}
