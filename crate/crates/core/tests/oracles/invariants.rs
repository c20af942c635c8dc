//! Strategies and per-case checks for the randomized invariant suites.

use std::collections::BTreeSet;

use biam_core::clock::BudgetMode;
use biam_core::geometry::Point;
use biam_core::metrics::{AssistingMetric, MetricKind, MetricParams};
use biam_core::planner::{Phase, Planner, PlannerConfig, ARRIVAL_RADIUS};
use biam_core::rewiring::RewireQueues;
use biam_core::sampling::{extend, sample_state, ExtendParams, Guide, SampleKind};
use biam_core::tree::{NodeId, Tree};
use biam_core::world::WorldMap;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: f64 = 40.0;

#[derive(Debug, Clone)]
pub enum Op {
    Insert { parent: usize, x: f64, y: f64 },
    Reparent { parent: usize, child: usize },
    Reroot(usize),
    AddDisc { x: f64, y: f64, r: f64 },
    ClearDiscs,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        5 => (any::<usize>(), 0.0..SIDE, 0.0..SIDE).prop_map(|(parent, x, y)| Op::Insert { parent, x, y }),
        3 => (any::<usize>(), any::<usize>()).prop_map(|(parent, child)| Op::Reparent { parent, child }),
        2 => any::<usize>().prop_map(Op::Reroot),
        1 => (0.0..SIDE, 0.0..SIDE, 0.5..4.0).prop_map(|(x, y, r)| Op::AddDisc { x, y, r }),
        1 => Just(Op::ClearDiscs),
    ]
}

#[derive(Debug, Clone)]
pub struct TreeCase {
    pub root: (f64, f64),
    pub bucket: f64,
    pub ops: Vec<Op>,
    pub probes: Vec<(f64, f64, f64)>,
}

pub fn tree_case() -> impl Strategy<Value = TreeCase> {
    (
        (0.0..SIDE, 0.0..SIDE),
        1.0f64..12.0,
        prop::collection::vec(op(), 1..80),
        prop::collection::vec((-5.0..SIDE + 5.0, -5.0..SIDE + 5.0, 0.0f64..15.0), 4),
    )
        .prop_map(|(root, bucket, ops, probes)| TreeCase { root, bucket, ops, probes })
}

/// Cost by walking to the root and summing edge lengths; `+inf` once any
/// edge on the way is obstructed in `map`.
fn walked_cost(t: &Tree, id: NodeId, map: &WorldMap) -> f64 {
    let mut cost = 0.0;
    let mut cur = id;
    while let Some(p) = t.parent(cur) {
        if !map.segment_clear(t.position(p), t.position(cur)) {
            return f64::INFINITY;
        }
        cost += t.position(p).distance(t.position(cur));
        cur = p;
    }
    assert_eq!(cur, t.root());
    cost
}

fn undirected_edges(t: &Tree) -> BTreeSet<(u32, u32)> {
    t.edges().map(|(p, c)| (p.0.min(c.0), p.0.max(c.0))).collect()
}

fn check_queries(t: &Tree, probes: &[(f64, f64, f64)]) -> Result<(), TestCaseError> {
    for &(x, y, radius) in probes {
        let q = Point::new(x, y);
        let mut best: Option<(f64, NodeId)> = None;
        for id in t.ids() {
            let d = t.position(id).distance_squared(q);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, id));
            }
        }
        prop_assert_eq!(t.nearest_node(q), best.map(|(_, id)| id));
        let scan: Vec<NodeId> = t.ids().filter(|&id| t.position(id).distance(q) <= radius).collect();
        prop_assert_eq!(t.nearby(q, radius), scan.clone());
        prop_assert_eq!(t.count_within(q, radius, usize::MAX), scan.len());
    }
    Ok(())
}

/// Applies the operations one by one; after each the tree must be acyclic
/// with cached costs equal to the walked ones.
pub fn check_tree_ops(case: TreeCase) -> Result<(), TestCaseError> {
    let mut map = WorldMap::empty(40, 40, 1.0);
    let mut t = Tree::new(Point::new(case.root.0, case.root.1), SIDE, SIDE, case.bucket);
    for op in case.ops {
        let n = t.len();
        match op {
            Op::Insert { parent, x, y } => {
                let parent = NodeId((parent % n) as u32);
                let before = t.len();
                match t.insert(parent, Point::new(x, y), &map) {
                    Ok(id) => {
                        prop_assert_eq!(id.index(), before);
                        prop_assert!(map.segment_clear(t.position(parent), Point::new(x, y)));
                    }
                    Err(_) => prop_assert_eq!(t.len(), before),
                }
            }
            Op::Reparent { parent, child } => {
                let (p, c) = (NodeId((parent % n) as u32), NodeId((child % n) as u32));
                let cycle = c == t.root() || t.is_ancestor(c, p);
                let res = t.update_edge(p, c, &map);
                if cycle {
                    prop_assert!(res.is_err());
                }
                if res.is_ok() {
                    prop_assert_eq!(t.parent(c), Some(p));
                }
            }
            Op::Reroot(i) => {
                let before = undirected_edges(&t);
                let r = NodeId((i % n) as u32);
                t.set_root(r).unwrap();
                prop_assert_eq!(t.root(), r);
                prop_assert_eq!(undirected_edges(&t), before);
            }
            Op::AddDisc { x, y, r } => {
                map.add_disc(Point::new(x, y), r).unwrap();
                t.revalidate_edges(&map);
            }
            Op::ClearDiscs => {
                let ids: Vec<_> = map.discs().iter().map(|d| d.id).collect();
                for id in ids {
                    map.remove_disc(id).unwrap();
                }
                t.revalidate_edges(&map);
            }
        }
        prop_assert!(t.validate().is_ok(), "{}", t.validate().unwrap_err());
        prop_assert_eq!(t.edges().count(), t.len() - 1);
        for id in t.ids() {
            let want = walked_cost(&t, id, &map);
            let got = t.cost(id);
            if want.is_finite() {
                prop_assert!((got - want).abs() <= 1e-9, "{}: {} vs {}", id, got, want);
            } else {
                prop_assert_eq!(got, f64::INFINITY);
            }
            let (c, path) = t.cost_and_path(id).unwrap();
            prop_assert_eq!(c, got);
            prop_assert_eq!(path[0], t.root());
            prop_assert_eq!(*path.last().unwrap(), id);
        }
    }
    check_queries(&t, &case.probes)
}

/// A 30x30 map with up to 40 random wall strips; the corner cells stay free.
pub fn walled_map(seed: u64, density: f64) -> WorldMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = WorldMap::empty(30, 30, 1.0);
    for _ in 0..(density * 40.0) as usize {
        let (c, r) = (rng.random_range(0..30), rng.random_range(0..30));
        let len = rng.random_range(3..10);
        let vertical = rng.random::<bool>();
        for i in 0..len {
            let (c, r) = if vertical { (c, r + i) } else { (c + i, r) };
            if c < 30 && r < 30 {
                map.set_occupied(c, r, true);
            }
        }
    }
    for (c, r) in [(1, 1), (28, 28)] {
        map.set_occupied(c, r, false);
    }
    map
}

pub fn planner_config(seed: u64, bidirectional: bool, new_rewiring: bool, kind: MetricKind) -> PlannerConfig {
    PlannerConfig {
        bidirectional,
        new_rewiring,
        seed,
        budget_mode: BudgetMode::deterministic(),
        ..PlannerConfig::am_rrt(kind)
    }
}

pub const FINE_METRIC: MetricParams = MetricParams { resolution: 1.0, k: 20, t: 2 };

#[derive(Debug, Clone)]
pub struct TickCase {
    pub map_seed: u64,
    pub density: f64,
    pub seed: u64,
    pub bidirectional: bool,
    pub new_rewiring: bool,
    pub geodesic: bool,
}

pub fn tick_case() -> impl Strategy<Value = TickCase> {
    (any::<u64>(), 0.0f64..1.0, any::<u64>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(map_seed, density, seed, bidirectional, new_rewiring, geodesic)| TickCase {
            map_seed,
            density,
            seed,
            bidirectional,
            new_rewiring,
            geodesic,
        },
    )
}

fn all_edges_clear(t: &Tree, map: &WorldMap) -> bool {
    t.edges().all(|(p, c)| map.segment_clear(t.position(p), t.position(c)))
}

/// What a run of [`check_ticks`] went through.
#[derive(Debug, Default, Clone, Copy)]
pub struct TickTally {
    pub ticks: u64,
    pub swaps: u64,
    pub arrived: bool,
}

/// Up to 120 planner ticks on a static map. Every tree edge stays clear,
/// a swap leaves the goal in the forward tree with no reverse tree, and the
/// route (cost still to go plus distance covered) never grows.
pub fn check_ticks(case: TickCase) -> Result<TickTally, TestCaseError> {
    let map = walled_map(case.map_seed, case.density);
    let kind = if case.geodesic { MetricKind::Geodesic } else { MetricKind::Euclidean };
    let metric = AssistingMetric::build(&map, kind, FINE_METRIC).unwrap();
    let (start, goal) = (Point::new(1.5, 1.5), Point::new(28.5, 28.5));
    let config = planner_config(case.seed, case.bidirectional, case.new_rewiring, kind);
    let mut planner = Planner::new(config, metric, &map, start).unwrap();
    planner.set_goal(goal, &map).unwrap();
    let mut tally = TickTally::default();
    let mut route = f64::INFINITY;
    for _ in 0..120 {
        let report = planner.plan_tick(&map);
        tally.ticks += 1;
        let fwd = planner.forward();
        prop_assert!(fwd.validate().is_ok());
        prop_assert!(all_edges_clear(fwd, &map));
        // the root follows the agent, and settles on the goal on arrival
        let anchor = if report.phase == Phase::Arrived { goal } else { planner.agent() };
        prop_assert_eq!(fwd.position(fwd.root()), anchor);
        if let Some(rev) = planner.reverse() {
            prop_assert!(rev.validate().is_ok());
            prop_assert!(all_edges_clear(rev, &map));
            prop_assert_eq!(rev.position(rev.root()), goal);
        }
        for (a, b) in &report.traversed {
            prop_assert!(map.segment_clear(*a, *b));
        }
        if report.swapped {
            tally.swaps += 1;
            let g = fwd.goal().expect("swap leaves the goal in the forward tree");
            prop_assert_eq!(fwd.position(g), goal);
            prop_assert!(fwd.goal_cost().is_finite());
            prop_assert!(planner.reverse().is_none());
        }
        if fwd.goal().is_some() {
            prop_assert!(planner.reverse().is_none());
        }
        let now = report.cost_goal + planner.stats().traveled;
        if report.cost_goal.is_finite() {
            prop_assert!(now <= route + 1e-6, "route rose from {} to {} at tick {}", route, now, report.tick);
            route = now;
        }
        if report.phase == Phase::Arrived {
            prop_assert!(planner.agent().distance(goal) <= ARRIVAL_RADIUS);
            tally.arrived = true;
            break;
        }
    }
    Ok(tally)
}

/// Grows a tree by plain extension; every new node hangs off a clear edge
/// no longer than `e_max`.
pub fn check_extension(seed: u64, steps: usize) -> Result<(), TestCaseError> {
    let mut map = WorldMap::empty(30, 30, 1.0);
    for r in 5..25 {
        map.set_occupied(12, r, true);
        map.set_occupied(19, 29 - r, true);
    }
    let goal = Point::new(27.5, 27.5);
    let metric = AssistingMetric::euclidean();
    let mut tree = Tree::for_map(Point::new(2.5, 2.5), &map, 3.0);
    let mut guide = Guide::new(goal);
    guide.rebuild(&tree, &metric);
    let mut queues = RewireQueues::new();
    let params = ExtendParams { e_max: 3.0, n_max: 8 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..steps {
        let s = sample_state(&tree, goal, &mut rng, &map).unwrap();
        let before = tree.len();
        extend(&mut tree, &s, &map, &params, &mut guide, &metric, &mut queues);
        for i in before..tree.len() {
            let id = NodeId(i as u32);
            let parent = tree.parent(id).unwrap();
            prop_assert!(map.segment_clear(tree.position(parent), tree.position(id)));
            prop_assert!(tree.position(parent).distance(tree.position(id)) <= params.e_max + 1e-9);
        }
    }
    prop_assert!(tree.validate().is_ok());
    if let Some(g) = tree.goal() {
        prop_assert_eq!(tree.position(g), goal);
    }
    Ok(())
}

/// Shares of goal, uniform and ellipse samples over `draws` calls.
pub fn branch_shares(tree: &Tree, goal: Point, map: &WorldMap, seed: u64, draws: usize) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let s = sample_state(tree, goal, &mut rng, map).unwrap();
        let slot = match s.kind {
            SampleKind::Goal => 0,
            SampleKind::Uniform => 1,
            SampleKind::Ellipse => 2,
        };
        counts[slot] += 1;
        if s.kind == SampleKind::Goal {
            assert_eq!(s.point, goal);
        } else {
            assert!(map.is_free(s.point));
        }
    }
    counts.map(|c| c as f64 / draws as f64)
}

/// A tree on an open 30x30 map that has not reached (27, 27) yet.
pub fn unfound_goal_setup() -> (Tree, Point, WorldMap) {
    let map = WorldMap::empty(30, 30, 1.0);
    let tree = Tree::for_map(Point::new(2.0, 2.0), &map, 4.0);
    (tree, Point::new(27.0, 27.0), map)
}
