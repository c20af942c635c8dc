//! Sample selection and tree extension.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::metrics::AssistingMetric;
use crate::rewiring::RewireQueues;
use crate::tree::{NodeId, Tree};
use crate::world::{WorldError, WorldMap};

const ELLIPSE_ATTEMPTS: usize = 1000;
const DESCENT_DIRECTIONS: usize = 16;

/// Region with foci at the root and the goal whose focal-distance sum is at most `c_best`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewireEllipse {
    pub focus_a: Point,
    pub focus_b: Point,
    pub c_best: f64,
}

impl RewireEllipse {
    pub fn new(focus_a: Point, focus_b: Point, c_best: f64) -> Self {
        RewireEllipse {
            focus_a,
            focus_b,
            c_best,
        }
    }

    pub fn contains(&self, q: Point) -> bool {
        q.distance(self.focus_a) + q.distance(self.focus_b) <= self.c_best
    }

    /// Rejection sample from the ellipse's own bounding box. `None` when
    /// `c_best` is not finite or no free point turned up.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, map: &WorldMap) -> Option<Point> {
        if !self.c_best.is_finite() {
            return None;
        }
        let center = self.focus_a.lerp(self.focus_b, 0.5);
        let d = self.focus_a.distance(self.focus_b);
        let a = self.c_best / 2.0;
        let b = ((self.c_best * self.c_best - d * d).max(0.0)).sqrt() / 2.0;
        let (cos, sin) = if d > 0.0 {
            ((self.focus_b.x - self.focus_a.x) / d, (self.focus_b.y - self.focus_a.y) / d)
        } else {
            (1.0, 0.0)
        };
        for _ in 0..ELLIPSE_ATTEMPTS {
            let u = rng.random_range(-a..=a);
            let v = rng.random_range(-b..=b);
            let q = Point::new(center.x + u * cos - v * sin, center.y + u * sin + v * cos);
            if self.contains(q) && map.in_bounds(q) && map.is_free(q) {
                return Some(q);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Goal,
    Uniform,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub kind: SampleKind,
    pub point: Point,
    /// The ellipse branch was chosen but fell back to a uniform draw.
    pub fallback: bool,
}

/// Draws `p` and picks a branch, first match wins: goal when `p > 0.7` and
/// the goal is not in the tree; uniform when `p < 0.5` or the goal is not in
/// the tree; otherwise the rewire ellipse.
pub fn sample_state<R: Rng + ?Sized>(
    tree: &Tree,
    goal: Point,
    rng: &mut R,
    map: &WorldMap,
) -> Result<SampleOutcome, WorldError> {
    let p: f64 = rng.random();
    sample_state_with_p(p, tree, goal, rng, map)
}

pub fn sample_state_with_p<R: Rng + ?Sized>(
    p: f64,
    tree: &Tree,
    goal: Point,
    rng: &mut R,
    map: &WorldMap,
) -> Result<SampleOutcome, WorldError> {
    let in_tree = tree.goal().is_some();
    if p > 0.7 && !in_tree {
        return Ok(SampleOutcome {
            kind: SampleKind::Goal,
            point: goal,
            fallback: false,
        });
    }
    if p < 0.5 || !in_tree {
        return Ok(SampleOutcome {
            kind: SampleKind::Uniform,
            point: map.sample_free(rng)?,
            fallback: false,
        });
    }
    let ellipse = RewireEllipse::new(tree.position(tree.root()), goal, tree.goal_cost());
    match ellipse.sample(rng, map) {
        Some(point) => Ok(SampleOutcome {
            kind: SampleKind::Ellipse,
            point,
            fallback: false,
        }),
        None => Ok(SampleOutcome {
            kind: SampleKind::Ellipse,
            point: map.sample_free(rng)?,
            fallback: true,
        }),
    }
}

/// Tracks the finite-cost node closest to a target under `d_A`; goal samples
/// grow from it.
#[derive(Debug, Clone)]
pub struct Guide {
    target: Point,
    best: Option<(NodeId, f64)>,
}

impl Guide {
    pub fn new(target: Point) -> Self {
        Guide { target, best: None }
    }

    pub fn target(&self) -> Point {
        self.target
    }

    pub fn best(&self) -> Option<NodeId> {
        self.best.map(|(id, _)| id)
    }

    pub fn best_distance(&self) -> f64 {
        self.best.map_or(f64::INFINITY, |(_, d)| d)
    }

    pub fn observe(&mut self, tree: &Tree, id: NodeId, metric: &AssistingMetric) {
        if !tree.cost(id).is_finite() {
            return;
        }
        let d = metric.distance(tree.position(id), self.target);
        if self.best.is_none_or(|(_, bd)| d < bd) {
            self.best = Some((id, d));
        }
    }

    pub fn rebuild(&mut self, tree: &Tree, metric: &AssistingMetric) {
        self.best = None;
        for id in tree.ids() {
            self.observe(tree, id, metric);
        }
    }

    pub fn retarget(&mut self, target: Point, tree: &Tree, metric: &AssistingMetric) {
        self.target = target;
        self.rebuild(tree, metric);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtendOutcome {
    Inserted(NodeId),
    /// The neighborhood of the new point is saturated; carries `x_near`.
    RejectedDensity(NodeId),
    RejectedBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendParams {
    pub e_max: f64,
    pub n_max: usize,
}

/// Picks the best free direction out of `from` that strictly lowers `d_A` to
/// the guide's target.
fn descend(from: Point, guide: &Guide, map: &WorldMap, metric: &AssistingMetric, e_max: f64) -> Option<Point> {
    let mut best: Option<(f64, Point)> = None;
    for i in 0..DESCENT_DIRECTIONS {
        let theta = i as f64 * std::f64::consts::TAU / DESCENT_DIRECTIONS as f64;
        let cand = Point::new(from.x + e_max * theta.cos(), from.y + e_max * theta.sin());
        if !map.in_bounds(cand) || !map.segment_clear(from, cand) {
            continue;
        }
        let d = metric.distance(cand, guide.target());
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, cand));
        }
    }
    best.filter(|&(d, _)| d < guide.best_distance()).map(|(_, p)| p)
}

/// Grows `tree` toward `sample`. Goal samples grow from the guide's node;
/// others from the nearest node. New nodes take the cheapest free parent in
/// their neighborhood and are queued for root rewiring.
pub fn extend(
    tree: &mut Tree,
    sample: &SampleOutcome,
    map: &WorldMap,
    params: &ExtendParams,
    guide: &mut Guide,
    metric: &AssistingMetric,
    queues: &mut RewireQueues,
) -> ExtendOutcome {
    let goal_sample = sample.kind == SampleKind::Goal;
    let (x_near, x_new) = if goal_sample {
        let Some(from) = guide.best().or_else(|| tree.nearest(sample.point, map)) else {
            return ExtendOutcome::RejectedBlocked;
        };
        let fp = tree.position(from);
        let straight = fp.step_toward(sample.point, params.e_max);
        if map.segment_clear(fp, straight) {
            (from, straight)
        } else {
            match descend(fp, guide, map, metric, params.e_max) {
                Some(p) => (from, p),
                None => return ExtendOutcome::RejectedBlocked,
            }
        }
    } else {
        let Some(from) = tree.nearest(sample.point, map) else {
            return ExtendOutcome::RejectedBlocked;
        };
        (from, tree.position(from).step_toward(sample.point, params.e_max))
    };

    let reaches_goal = goal_sample && x_new == sample.point;
    if reaches_goal && tree.position(x_near) == x_new {
        tree.set_goal_node(Some(x_near));
        return ExtendOutcome::Inserted(x_near);
    }
    if tree.position(x_near).distance(x_new) < 1e-9 {
        return ExtendOutcome::RejectedBlocked;
    }
    if !reaches_goal && tree.count_within(x_new, params.e_max, params.n_max) >= params.n_max {
        queues.enqueue_root(x_near);
        return ExtendOutcome::RejectedDensity(x_near);
    }

    let near = tree.nearby(x_new, params.e_max);
    let mut ranked: Vec<(f64, NodeId)> = near
        .iter()
        .map(|&n| (tree.cost(n) + tree.position(n).distance(x_new), n))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let parent = ranked
        .iter()
        .find(|&&(_, n)| n == x_near || map.segment_clear(tree.position(n), x_new))
        .map(|&(_, n)| n)
        .unwrap_or(x_near);

    let Ok(id) = tree.insert_unchecked(parent, x_new) else {
        return ExtendOutcome::RejectedBlocked;
    };
    if reaches_goal {
        tree.set_goal_node(Some(id));
    }
    queues.enqueue_root(id);
    guide.observe(tree, id, metric);
    ExtendOutcome::Inserted(id)
}
