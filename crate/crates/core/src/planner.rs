//! The real-time planning loop: forward and reverse expansion, tree fusion,
//! agent motion with re-rooting, and replanning after obstacle changes.

use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{BudgetMode, PlannerClock};
use crate::geometry::Point;
use crate::metrics::{AssistingMetric, MetricKind};
use crate::rewiring::{rewire_goal, rewire_root, RewireParams, RewireQueues, RewireStats};
use crate::sampling::{extend, sample_state, ExtendOutcome, ExtendParams, Guide};
use crate::tree::{NodeId, Tree};
use crate::world::WorldMap;

/// Distance at which the agent counts as arrived.
pub const ARRIVAL_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub t_exp: f64,
    pub t_root: f64,
    pub t_goal: f64,
    pub e_max: f64,
    pub n_max: usize,
    pub sigma: f64,
    pub agent_speed: f64,
    pub metric_kind: MetricKind,
    pub bidirectional: bool,
    pub new_rewiring: bool,
    pub seed: u64,
    pub budget_mode: BudgetMode,
}

impl PlannerConfig {
    /// Parameters shared by the RT-RRT* family.
    pub fn rt_rrt(metric_kind: MetricKind) -> Self {
        PlannerConfig {
            t_exp: 0.15,
            t_root: 0.003,
            t_goal: 0.003,
            e_max: 5.0,
            n_max: 12,
            sigma: 30.0,
            agent_speed: 5.0,
            metric_kind,
            bidirectional: false,
            new_rewiring: false,
            seed: 0,
            budget_mode: BudgetMode::WallClock,
        }
    }

    /// Parameters shared by the AM-RRT* family.
    pub fn am_rrt(metric_kind: MetricKind) -> Self {
        PlannerConfig {
            t_root: 0.002,
            t_goal: 0.004,
            n_max: 20,
            ..Self::rt_rrt(metric_kind)
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let positive = [
            ("t_exp", self.t_exp),
            ("t_root", self.t_root),
            ("t_goal", self.t_goal),
            ("e_max", self.e_max),
            ("sigma", self.sigma),
            ("agent_speed", self.agent_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlannerError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_max == 0 {
            return Err(PlannerError::InvalidConfig("n_max must be positive".into()));
        }
        if self.sigma < self.e_max {
            return Err(PlannerError::InvalidConfig(format!(
                "sigma {} is below e_max {}",
                self.sigma, self.e_max
            )));
        }
        if let BudgetMode::Deterministic { iterations_per_slice: 0 } = self.budget_mode {
            return Err(PlannerError::InvalidConfig("iterations_per_slice must be positive".into()));
        }
        Ok(())
    }

    fn rewire_params(&self) -> RewireParams {
        RewireParams {
            e_max: self.e_max,
            t_root: self.t_root,
            t_goal: self.t_goal,
            new_rewiring: self.new_rewiring,
        }
    }

    fn extend_params(&self) -> ExtendParams {
        ExtendParams {
            e_max: self.e_max,
            n_max: self.n_max,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error("goal {0} is not in free space")]
    OccupiedGoal(Point),
    #[error("start {0} is not in free space")]
    OccupiedStart(Point),
    #[error("metric is {found}, config asks for {expected}")]
    MetricMismatch { expected: MetricKind, found: MetricKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Searching,
    Tracking,
    Arrived,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Searching => "searching",
            Phase::Tracking => "tracking",
            Phase::Arrived => "arrived",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlannerStats {
    /// Planner-clock seconds from goal assignment to the first finite goal cost.
    pub search_time: Option<f64>,
    pub node_count_at_attach: Option<usize>,
    pub traveled: f64,
    pub ticks: u64,
    pub swaps: u64,
    pub aborted_swaps: u64,
    pub halts: u64,
    pub expansions_f: u64,
    pub expansions_r: u64,
    pub obstacle_events: u64,
    pub rewire_f: RewireStats,
    pub rewire_r: RewireStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick: u64,
    /// Planner clock at the end of the tick.
    pub time: f64,
    pub dt: f64,
    pub phase: Phase,
    pub agent: Point,
    pub cost_goal: f64,
    pub path_length: f64,
    pub nodes_f: usize,
    pub nodes_r: usize,
    /// Agent motion during this tick, in order.
    pub traversed: Vec<(Point, Point)>,
    pub halted: bool,
    pub swapped: bool,
    pub obstacle_change: bool,
}

impl TickReport {
    /// `t x y phase cost_goal nodes_f nodes_r`
    pub fn log_line(&self) -> String {
        let cost = if self.cost_goal.is_finite() {
            format!("{:.6}", self.cost_goal)
        } else {
            "inf".to_string()
        };
        format!(
            "{:.6} {:.6} {:.6} {} {} {} {}",
            self.time, self.agent.x, self.agent.y, self.phase, cost, self.nodes_f, self.nodes_r
        )
    }
}

struct Reverse {
    tree: Tree,
    queues: RewireQueues,
    guide: Guide,
}

pub struct Planner {
    config: PlannerConfig,
    metric: AssistingMetric,
    rng: ChaCha8Rng,
    clock: PlannerClock,
    forward: Tree,
    queues_f: RewireQueues,
    guide_f: Guide,
    reverse: Option<Reverse>,
    reverse_goal: Point,
    agent: Point,
    goal: Option<Point>,
    phase: Phase,
    current_path: Vec<NodeId>,
    seen_revision: u64,
    meet_marks: (usize, usize),
    meet_revision: u64,
    goal_set_at: f64,
    stats: PlannerStats,
    log: Vec<String>,
    width: f64,
    height: f64,
}

impl Planner {
    pub fn new(
        config: PlannerConfig,
        metric: AssistingMetric,
        map: &WorldMap,
        start: Point,
    ) -> Result<Self, PlannerError> {
        config.validate()?;
        if metric.kind() != config.metric_kind {
            return Err(PlannerError::MetricMismatch {
                expected: config.metric_kind,
                found: metric.kind(),
            });
        }
        if !map.is_free(start) {
            return Err(PlannerError::OccupiedStart(start));
        }
        let forward = Tree::for_map(start, map, config.e_max);
        let clock = PlannerClock::new(config.budget_mode, config.t_exp);
        Ok(Planner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            clock,
            queues_f: RewireQueues::new(),
            guide_f: Guide::new(start),
            reverse: None,
            reverse_goal: start,
            agent: start,
            goal: None,
            phase: Phase::Idle,
            current_path: vec![forward.root()],
            seen_revision: map.revision(),
            meet_marks: (0, 0),
            meet_revision: map.revision(),
            goal_set_at: 0.0,
            stats: PlannerStats::default(),
            log: Vec::new(),
            width: map.width(),
            height: map.height(),
            forward,
            config,
            metric,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn metric(&self) -> &AssistingMetric {
        &self.metric
    }

    pub fn forward(&self) -> &Tree {
        &self.forward
    }

    pub fn reverse(&self) -> Option<&Tree> {
        self.reverse.as_ref().map(|r| &r.tree)
    }

    pub fn agent(&self) -> Point {
        self.agent
    }

    pub fn goal(&self) -> Option<Point> {
        self.goal
    }

    pub fn reverse_goal(&self) -> Point {
        self.reverse_goal
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stats(&self) -> &PlannerStats {
        &self.stats
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    /// Planner-clock seconds since the current goal was set.
    pub fn elapsed_since_goal(&self) -> f64 {
        self.clock.now() - self.goal_set_at
    }

    pub fn current_path(&self) -> &[NodeId] {
        &self.current_path
    }

    /// Agent position followed by the current path's node positions.
    pub fn current_path_points(&self) -> Vec<Point> {
        let mut pts = vec![self.agent];
        pts.extend(self.current_path.iter().map(|&n| self.forward.position(n)));
        pts
    }

    /// Trajectory log, one line per tick.
    pub fn log(&self) -> &[String] {
        &self.log
    }

    pub fn log_text(&self) -> String {
        let mut s = String::new();
        for line in &self.log {
            let _ = writeln!(s, "{line}");
        }
        s
    }

    /// Takes effect from the next tick.
    pub fn set_agent_speed(&mut self, speed: f64) -> Result<(), PlannerError> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(PlannerError::InvalidConfig(format!("agent_speed must be positive, got {speed}")));
        }
        self.config.agent_speed = speed;
        Ok(())
    }

    /// Assigns a new goal. The forward tree is kept; with the bidirectional
    /// scheme a reverse tree is rooted at the goal and grows toward the
    /// agent's position at this moment.
    pub fn set_goal(&mut self, goal: Point, map: &WorldMap) -> Result<(), PlannerError> {
        if !map.is_free(goal) {
            return Err(PlannerError::OccupiedGoal(goal));
        }
        self.goal = Some(goal);
        self.goal_set_at = self.clock.now();
        self.stats.search_time = None;
        self.stats.node_count_at_attach = None;
        let existing = self
            .forward
            .nearest_node(goal)
            .filter(|&n| self.forward.position(n) == goal);
        self.forward.set_goal_node(existing);
        self.guide_f.retarget(goal, &self.forward, &self.metric);
        self.queues_f.reset_goal();
        self.meet_marks = (0, 0);
        self.reverse = None;
        self.reverse_goal = self.agent;
        if self.agent.distance(goal) <= ARRIVAL_RADIUS {
            self.phase = Phase::Arrived;
            self.stats.search_time = Some(0.0);
            return Ok(());
        }
        self.phase = Phase::Searching;
        if self.config.bidirectional && existing.is_none() {
            let tree = Tree::new(goal, self.width, self.height, self.config.e_max);
            let mut guide = Guide::new(self.agent);
            guide.rebuild(&tree, &self.metric);
            self.reverse = Some(Reverse {
                tree,
                queues: RewireQueues::new(),
                guide,
            });
        }
        self.refresh_path();
        Ok(())
    }

    /// One outer-loop iteration: expand for `t_exp`, fuse trees when they
    /// meet, update the path and move the agent by the time spent.
    pub fn plan_tick(&mut self, map: &WorldMap) -> TickReport {
        let tick_start = self.clock.now();
        let obstacle_change = self.sync_obstacles(map);
        let mut swapped = false;
        let mut traversed = Vec::new();
        let mut halted = false;

        if matches!(self.phase, Phase::Searching | Phase::Tracking) {
            let goal = self.goal.expect("searching without a goal");
            while self.clock.now() - tick_start < self.config.t_exp {
                self.expand_forward(goal, map);
                if self.forward.goal().is_none() && self.reverse.is_some() {
                    self.expand_reverse(map);
                }
                self.note_attach();
            }
            if self.forward.goal().is_some() {
                self.reverse = None;
            } else if self.reverse.is_some() {
                if let Some((f, r)) = self.meet(map) {
                    swapped = self.swap(f, r, map);
                }
            }
            self.note_attach();
            self.refresh_path();
            if self.phase == Phase::Tracking {
                let dt = self.clock.now() - tick_start;
                halted = self.move_agent(map, dt, &mut traversed);
            }
        }

        self.stats.ticks += 1;
        self.stats.rewire_f = self.queues_f.stats;
        if let Some(r) = &self.reverse {
            self.stats.rewire_r = r.queues.stats;
        }
        let report = TickReport {
            tick: self.stats.ticks,
            time: self.clock.now(),
            dt: self.clock.now() - tick_start,
            phase: self.phase,
            agent: self.agent,
            cost_goal: self.forward.goal_cost(),
            path_length: self.path_length(),
            nodes_f: self.forward.len(),
            nodes_r: self.reverse().map_or(0, |t| t.len()),
            traversed,
            halted,
            swapped,
            obstacle_change,
        };
        self.log.push(report.log_line());
        report
    }

    fn note_attach(&mut self) {
        if self.stats.search_time.is_none() && self.forward.goal_cost().is_finite() {
            self.stats.search_time = Some(self.clock.now() - self.goal_set_at);
            self.stats.node_count_at_attach = Some(self.forward.len() + self.reverse().map_or(0, |t| t.len()));
        }
        if self.phase == Phase::Searching && self.forward.goal_cost().is_finite() {
            self.phase = Phase::Tracking;
        }
    }

    fn expand_forward(&mut self, goal: Point, map: &WorldMap) {
        self.stats.expansions_f += 1;
        if let Ok(sample) = sample_state(&self.forward, goal, &mut self.rng, map) {
            extend(
                &mut self.forward,
                &sample,
                map,
                &self.config.extend_params(),
                &mut self.guide_f,
                &self.metric,
                &mut self.queues_f,
            );
        }
        self.clock.charge();
        let params = self.config.rewire_params();
        rewire_root(&mut self.forward, &mut self.queues_f, map, &params, &mut self.clock);
        if self.forward.goal().is_some() {
            rewire_goal(&mut self.forward, &mut self.queues_f, map, &self.metric, &params, &mut self.clock);
        }
    }

    fn expand_reverse(&mut self, map: &WorldMap) {
        let Some(rev) = self.reverse.as_mut() else { return };
        self.stats.expansions_r += 1;
        if let Ok(sample) = sample_state(&rev.tree, self.reverse_goal, &mut self.rng, map) {
            let out = extend(
                &mut rev.tree,
                &sample,
                map,
                &self.config.extend_params(),
                &mut rev.guide,
                &self.metric,
                &mut rev.queues,
            );
            let _: ExtendOutcome = out;
        }
        self.clock.charge();
        let params = self.config.rewire_params();
        rewire_root(&mut rev.tree, &mut rev.queues, map, &params, &mut self.clock);
    }

    /// Closest forward/reverse pair closer than `sigma` with a free segment
    /// and finite costs on both sides. Only pairs involving nodes added
    /// since the previous call are examined, unless the map changed.
    pub fn meet(&mut self, map: &WorldMap) -> Option<(NodeId, NodeId)> {
        let rev = self.reverse.as_ref()?;
        if self.meet_revision != map.revision() {
            self.meet_marks = (0, 0);
            self.meet_revision = map.revision();
        }
        let (mark_f, mark_r) = self.meet_marks;
        let sigma = self.config.sigma;
        let mut best: Option<(f64, NodeId, NodeId)> = None;
        let mut buf = Vec::new();

        let consider = |f: NodeId, r: NodeId, best: &mut Option<(f64, NodeId, NodeId)>| {
            let (pf, pr) = (self.forward.position(f), rev.tree.position(r));
            let d = pf.distance(pr);
            if d >= sigma || !self.forward.cost(f).is_finite() || !rev.tree.cost(r).is_finite() {
                return;
            }
            if best.is_some_and(|(bd, bf, br)| (bd, bf, br) <= (d, f, r)) {
                return;
            }
            if map.segment_clear(pf, pr) {
                *best = Some((d, f, r));
            }
        };

        for i in mark_f..self.forward.len() {
            let f = NodeId(i as u32);
            rev.tree.nearby_into(self.forward.position(f), sigma, &mut buf);
            for &r in &buf {
                consider(f, r, &mut best);
            }
        }
        for i in mark_r..rev.tree.len() {
            let r = NodeId(i as u32);
            self.forward.nearby_into(rev.tree.position(r), sigma, &mut buf);
            for &f in &buf {
                if f.index() < mark_f {
                    consider(f, r, &mut best);
                }
            }
        }
        self.meet_marks = (self.forward.len(), rev.tree.len());
        best.map(|(_, f, r)| (f, r))
    }

    /// Grafts the reverse trunk from `r` to the goal onto `f` and drops the
    /// reverse tree. The connecting edge is kept whole.
    fn swap(&mut self, f: NodeId, r: NodeId, map: &WorldMap) -> bool {
        let Some(rev) = self.reverse.as_ref() else { return false };
        let Ok((_, mut trunk)) = rev.tree.cost_and_path(r) else { return false };
        trunk.reverse(); // r ... reverse root
        let mut prev = self.forward.position(f);
        let mut ok = self.forward.cost(f).is_finite();
        for &n in &trunk {
            let p = rev.tree.position(n);
            ok &= rev.tree.cost(n).is_finite() && map.segment_clear(prev, p);
            prev = p;
        }
        if !ok {
            self.stats.aborted_swaps += 1;
            self.meet_marks = (0, 0);
            return false;
        }
        let points: Vec<Point> = trunk.iter().map(|&n| rev.tree.position(n)).collect();
        let mut parent = f;
        for p in points {
            match self.forward.insert_unchecked(parent, p) {
                Ok(id) => {
                    self.queues_f.enqueue_root(id);
                    self.guide_f.observe(&self.forward, id, &self.metric);
                    parent = id;
                }
                Err(_) => {
                    self.stats.aborted_swaps += 1;
                    return false;
                }
            }
        }
        self.forward.set_goal_node(Some(parent));
        self.reverse = None;
        self.stats.swaps += 1;
        true
    }

    fn sync_obstacles(&mut self, map: &WorldMap) -> bool {
        if map.revision() == self.seen_revision {
            return false;
        }
        self.seen_revision = map.revision();
        self.stats.obstacle_events += 1;
        if self.metric.is_stale(map) {
            self.metric = AssistingMetric::euclidean();
        }
        let e_max = self.config.e_max;
        let newly = self.forward.revalidate_edges(map);
        self.queues_f.on_obstacle_change(&self.forward, &newly, e_max);
        if let Some(g) = self.goal {
            self.guide_f.retarget(g, &self.forward, &self.metric);
        }
        if let Some(rev) = self.reverse.as_mut() {
            let newly = rev.tree.revalidate_edges(map);
            rev.queues.on_obstacle_change(&rev.tree, &newly, e_max);
            rev.guide.rebuild(&rev.tree, &self.metric);
        }
        true
    }

    fn refresh_path(&mut self) {
        let target = match (self.forward.goal(), self.goal) {
            (Some(g), _) => Some(g),
            (None, Some(goal)) => self.forward.nearest_node(goal),
            (None, None) => None,
        };
        self.current_path = match target {
            Some(t) => self.forward.cost_and_path(t).map(|(_, p)| p).unwrap_or_default(),
            None => vec![self.forward.root()],
        };
    }

    fn path_length(&self) -> f64 {
        let mut len = 0.0;
        let mut prev = self.agent;
        for &n in &self.current_path {
            let p = self.forward.position(n);
            len += prev.distance(p);
            prev = p;
        }
        len
    }

    fn reroot(&mut self, id: NodeId) {
        if self.forward.root() == id {
            return;
        }
        if self.forward.set_root(id).is_ok() {
            self.queues_f.reset_root();
        }
    }

    /// Advances the agent along the path for `dt` seconds. Returns true when
    /// motion stopped at an obstructed segment.
    ///
    /// The agent starts every tick on the root. When it stops part way along
    /// an edge, a node is placed under it and becomes the new root, so costs
    /// are always measured from where the agent is.
    fn move_agent(&mut self, map: &WorldMap, dt: f64, traversed: &mut Vec<(Point, Point)>) -> bool {
        let Some(goal_id) = self.forward.goal() else { return false };
        if !self.forward.goal_cost().is_finite() {
            self.stats.halts += 1;
            return true;
        }
        let mut budget = self.config.agent_speed * dt;
        let mut heading = None;
        for _ in 0..10_000 {
            if self.agent.distance(self.forward.position(goal_id)) <= ARRIVAL_RADIUS {
                self.reroot(goal_id);
                self.phase = Phase::Arrived;
                heading = None;
                break;
            }
            if budget <= 0.0 {
                break;
            }
            let next_id = match self.forward.cost_and_path(goal_id) {
                Ok((c, p)) if c.is_finite() && p.len() > 1 => p[1],
                _ => {
                    self.stats.halts += 1;
                    self.refresh_path();
                    return true;
                }
            };
            let target = self.forward.position(next_id);
            if !map.segment_clear(self.agent, target) {
                self.stats.halts += 1;
                self.refresh_path();
                return true;
            }
            let d = self.agent.distance(target);
            let next = if budget >= d { target } else { self.agent.step_toward(target, budget) };
            traversed.push((self.agent, next));
            self.stats.traveled += self.agent.distance(next);
            self.agent = next;
            if budget >= d {
                budget -= d;
                self.reroot(next_id);
                heading = None;
            } else {
                budget = 0.0;
                heading = Some(next_id);
            }
        }
        if let Some(h) = heading {
            self.anchor_root(h);
        }
        self.refresh_path();
        false
    }

    /// Puts a node at the agent, hanging off `toward`, and re-roots on it.
    /// The edge is part of a segment the agent just checked and crossed.
    fn anchor_root(&mut self, toward: NodeId) {
        if let Ok(id) = self.forward.insert_unchecked(toward, self.agent) {
            self.guide_f.observe(&self.forward, id, &self.metric);
            self.reroot(id);
        }
    }

    /// Length of the best known route from `p` to the tree root through the
    /// visible node nearest `p`.
    pub fn planned_length_from(&self, p: Point, map: &WorldMap) -> f64 {
        let mut buf = Vec::new();
        let mut best = f64::INFINITY;
        let mut radius = self.config.e_max;
        while best.is_infinite() && radius <= self.width.max(self.height) * 2.0 {
            self.forward.nearby_into(p, radius, &mut buf);
            let mut cands: Vec<(f64, NodeId)> = buf.iter().map(|&n| (self.forward.position(n).distance(p), n)).collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (d, n) in cands {
                if map.segment_clear(p, self.forward.position(n)) {
                    best = self.forward.cost(n) + d;
                    break;
                }
            }
            radius *= 2.0;
        }
        best
    }
}
