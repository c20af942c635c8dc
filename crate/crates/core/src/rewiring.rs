//! Time-budgeted rewiring around the root and along the root-goal corridor.
//!
//! Stage one processes one node at a time. Stage two takes nodes in pairs and
//! looks for shortcuts past the intermediate node.

use std::collections::VecDeque;

use crate::clock::PlannerClock;
use crate::geometry::Point;
use crate::metrics::AssistingMetric;
use crate::sampling::RewireEllipse;
use crate::tree::{NodeId, Tree};
use crate::world::WorldMap;

/// Membership set over node ids, cleared in O(1) by bumping a generation.
#[derive(Debug, Clone)]
pub struct SeenSet {
    stamp: Vec<u32>,
    generation: u32,
}

impl Default for SeenSet {
    fn default() -> Self {
        SeenSet {
            stamp: Vec::new(),
            generation: 1,
        }
    }
}

impl SeenSet {
    pub fn contains(&self, id: NodeId) -> bool {
        self.stamp.get(id.index()) == Some(&self.generation)
    }

    /// Returns true when `id` was not yet present.
    pub fn insert(&mut self, id: NodeId) -> bool {
        let i = id.index();
        if i >= self.stamp.len() {
            self.stamp.resize(i + 1, 0);
        }
        if self.stamp[i] == self.generation {
            false
        } else {
            self.stamp[i] = self.generation;
            true
        }
    }

    pub fn clear(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewireStats {
    pub root_first: u64,
    pub root_second: u64,
    pub goal_first: u64,
    pub goal_second: u64,
    pub reparents: u64,
    pub discards: u64,
}

/// Work lists for one tree.
#[derive(Debug, Clone, Default)]
pub struct RewireQueues {
    pub q_root: VecDeque<NodeId>,
    pub q_goal: VecDeque<NodeId>,
    /// Top of stack is the last element.
    pub s_goal: Vec<NodeId>,
    pub seen_root: SeenSet,
    pub seen_goal: SeenSet,
    pub stats: RewireStats,
    scratch: Vec<NodeId>,
}

impl RewireQueues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Enqueues on `q_root` unless already seen in this sweep.
    pub fn enqueue_root(&mut self, id: NodeId) {
        if self.seen_root.insert(id) {
            self.q_root.push_back(id);
        }
    }

    /// The root moved; restart the root sweep from the new root.
    pub fn reset_root(&mut self) {
        self.q_root.clear();
        self.seen_root.clear();
    }

    pub fn reset_goal(&mut self) {
        self.q_goal.clear();
        self.s_goal.clear();
        self.seen_goal.clear();
    }

    /// After obstacles change: drop goal-side work and queue finite-cost
    /// nodes around each newly blocked node for root rewiring.
    pub fn on_obstacle_change(&mut self, tree: &Tree, newly_blocked: &[NodeId], e_max: f64) {
        self.reset_goal();
        let mut buf = std::mem::take(&mut self.scratch);
        for &b in newly_blocked {
            tree.nearby_into(tree.position(b), e_max, &mut buf);
            for &n in &buf {
                if tree.cost(n).is_finite() {
                    self.enqueue_root(n);
                }
            }
        }
        self.scratch = buf;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewireParams {
    pub e_max: f64,
    pub t_root: f64,
    pub t_goal: f64,
    pub new_rewiring: bool,
}

fn live(tree: &Tree, id: NodeId) -> bool {
    tree.contains(id)
}

fn pop_live_front(tree: &Tree, q: &mut VecDeque<NodeId>) -> Option<NodeId> {
    while let Some(id) = q.pop_front() {
        if live(tree, id) {
            return Some(id);
        }
    }
    None
}

/// Reparents `child` under `parent` when that is strictly cheaper and the
/// segment is free. Returns whether the edge changed.
fn try_improve(tree: &mut Tree, parent: NodeId, child: NodeId, map: &WorldMap) -> bool {
    if parent == child || tree.parent(child) == Some(parent) && !tree.node(child).edge_blocked {
        return false;
    }
    let (pp, cp) = (tree.position(parent), tree.position(child));
    let candidate = tree.cost(parent) + pp.distance(cp);
    if candidate < tree.cost(child) && map.segment_clear(pp, cp) {
        return tree.reparent(parent, child).is_ok();
    }
    false
}

/// Stage one around the root: dequeue `x_r`, offer it as parent to each
/// neighbor, and queue unseen neighbors.
pub fn rewire_root_first(tree: &mut Tree, q: &mut RewireQueues, map: &WorldMap, e_max: f64) {
    let Some(x_r) = pop_live_front(tree, &mut q.q_root) else { return };
    q.stats.root_first += 1;
    let mut buf = std::mem::take(&mut q.scratch);
    tree.nearby_into(tree.position(x_r), e_max, &mut buf);
    for &x_near in &buf {
        if try_improve(tree, x_r, x_near, map) {
            q.stats.reparents += 1;
        }
        q.enqueue_root(x_near);
    }
    q.scratch = buf;
}

/// Stage two around the root: dequeue `x_r1` and `x_r2`, then look among the
/// neighbors of `x_r2` for a cheaper parent of `x_r1`.
///
/// The published cost `Cost(x_r1) + d(x_r2, x_near) + d(x_r1, x_r2)` can never
/// beat `Cost(x_r1)`; the candidate cost used here is
/// `cost(x_near) + d(x_near, x_r1)`, the cost of the edge actually created.
pub fn rewire_root_second(tree: &mut Tree, q: &mut RewireQueues, map: &WorldMap, e_max: f64) {
    let Some(x_r1) = pop_live_front(tree, &mut q.q_root) else { return };
    let Some(x_r2) = pop_live_front(tree, &mut q.q_root) else {
        q.q_root.push_front(x_r1);
        return;
    };
    q.stats.root_second += 1;
    let mut buf = std::mem::take(&mut q.scratch);
    tree.nearby_into(tree.position(x_r2), e_max, &mut buf);
    for &x_near in &buf {
        if try_improve(tree, x_near, x_r1, map) {
            q.stats.reparents += 1;
        }
        q.enqueue_root(x_near);
    }
    q.scratch = buf;
}

/// Root rewiring for up to `t_root` seconds of `clock`.
pub fn rewire_root(
    tree: &mut Tree,
    q: &mut RewireQueues,
    map: &WorldMap,
    params: &RewireParams,
    clock: &mut PlannerClock,
) {
    if q.q_root.is_empty() {
        q.seen_root.clear();
        q.enqueue_root(tree.root());
    }
    let start = clock.now();
    while clock.now() - start < params.t_root && !q.q_root.is_empty() {
        if params.new_rewiring && q.q_root.len() > 2 {
            rewire_root_second(tree, q, map, params.e_max);
        } else {
            rewire_root_first(tree, q, map, params.e_max);
        }
        clock.charge();
    }
}

fn goal_point(tree: &Tree) -> Option<Point> {
    tree.goal().map(|g| tree.position(g))
}

/// Stage one toward the goal. Takes `x` from the stack, else the queue, and
/// offers it as parent to each neighbor. Unseen neighbors closer to the goal
/// under `d_A` go on the stack; the rest go on the queue.
pub fn rewire_goal_first(
    tree: &mut Tree,
    q: &mut RewireQueues,
    map: &WorldMap,
    metric: &AssistingMetric,
    e_max: f64,
) {
    let Some(goal) = goal_point(tree) else { return };
    let x = loop {
        match q.s_goal.pop() {
            Some(id) if live(tree, id) => break Some(id),
            Some(_) => continue,
            None => break pop_live_front(tree, &mut q.q_goal),
        }
    };
    let Some(x) = x else { return };
    q.stats.goal_first += 1;
    let d_x = metric.distance(tree.position(x), goal);
    let mut buf = std::mem::take(&mut q.scratch);
    tree.nearby_into(tree.position(x), e_max, &mut buf);
    for &x_near in &buf {
        if try_improve(tree, x, x_near, map) {
            q.stats.reparents += 1;
        }
        if q.seen_goal.insert(x_near) {
            if metric.distance(tree.position(x_near), goal) < d_x {
                q.s_goal.push(x_near);
            } else {
                q.q_goal.push_back(x_near);
            }
        }
    }
    q.scratch = buf;
}

/// Stage two toward the goal. Takes `x_r1`, `x_r2` from the stack when it
/// holds more than two entries, else from the queue. Inside the rewire
/// ellipse, neighbors of `x_r1` may be reparented straight to `x_r2`,
/// bypassing `x_r1`.
///
/// The published cost routes through `x_r1`
/// (`Cost(x_r2) + d(x_r1, x_near) + d(x_r1, x_r2)`); the candidate cost used
/// here is `cost(x_r2) + d(x_r2, x_near)`, matching the edge created. The
/// stack is discarded when the node below its top is dominated under `d_A`.
pub fn rewire_goal_second(
    tree: &mut Tree,
    q: &mut RewireQueues,
    map: &WorldMap,
    metric: &AssistingMetric,
    e_max: f64,
) {
    let Some(goal_id) = tree.goal() else { return };
    let goal = tree.position(goal_id);
    let from_stack = q.s_goal.len() > 2;
    let take = |tree: &Tree, q: &mut RewireQueues| -> Option<NodeId> {
        if from_stack {
            while let Some(id) = q.s_goal.pop() {
                if live(tree, id) {
                    return Some(id);
                }
            }
            None
        } else {
            pop_live_front(tree, &mut q.q_goal)
        }
    };
    let Some(x_r1) = take(tree, q) else { return };
    let Some(x_r2) = take(tree, q) else { return };
    q.stats.goal_second += 1;

    let ellipse = RewireEllipse::new(tree.position(tree.root()), goal, tree.cost(goal_id));
    let p1 = tree.position(x_r1);
    let p2 = tree.position(x_r2);
    if ellipse.contains(p1) {
        let mut buf = std::mem::take(&mut q.scratch);
        tree.nearby_into(p1, e_max, &mut buf);
        for &x_near in &buf {
            if x_near == x_r2 {
                continue;
            }
            if try_improve(tree, x_r2, x_near, map) {
                q.stats.reparents += 1;
            }
            if q.seen_goal.insert(x_near) {
                q.s_goal.push(x_near);
                q.q_goal.push_back(x_near);
            }
        }
        q.scratch = buf;
    }

    let len = q.s_goal.len();
    if len > 1 {
        let second = tree.position(q.s_goal[len - 2]);
        let bound = metric.distance(p1, goal) + metric.distance(p1, p2);
        if metric.distance(second, goal) > bound {
            q.s_goal.clear();
            q.stats.discards += 1;
        }
    }
}

/// Goal rewiring: stage one for up to `t_goal`, then (with the new strategy)
/// stage two until `2 * t_goal`. No-op while the goal is not in the tree.
pub fn rewire_goal(
    tree: &mut Tree,
    q: &mut RewireQueues,
    map: &WorldMap,
    metric: &AssistingMetric,
    params: &RewireParams,
    clock: &mut PlannerClock,
) {
    if tree.goal().is_none() {
        return;
    }
    if q.q_goal.is_empty() && q.s_goal.is_empty() {
        q.seen_goal.clear();
        let root = tree.root();
        q.seen_goal.insert(root);
        q.s_goal.push(root);
    }
    let start = clock.now();
    // Stage one runs while either structure has work.
    while clock.now() - start < params.t_goal && !(q.q_goal.is_empty() && q.s_goal.is_empty()) {
        rewire_goal_first(tree, q, map, metric, params.e_max);
        clock.charge();
    }
    if !params.new_rewiring {
        return;
    }
    while clock.now() - start < 2.0 * params.t_goal && (q.q_goal.len() > 2 || q.s_goal.len() > 2) {
        rewire_goal_second(tree, q, map, metric, params.e_max);
        clock.charge();
    }
}
