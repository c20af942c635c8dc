use biam_core::clock::{BudgetMode, PlannerClock};
use biam_core::geometry::Point;
use biam_core::metrics::AssistingMetric;
use biam_core::rewiring::{rewire_goal, rewire_root, RewireParams, RewireQueues};
use biam_core::tree::{NodeId, Tree};
use biam_core::world::WorldMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::walls;

/// A small instance: node 0 is the root, `parents[i]` is node i's initial
/// parent (listed in insertion order), `goal` is the node that carries the goal.
pub struct Instance {
    pub name: &'static str,
    pub map: WorldMap,
    pub points: Vec<Point>,
    pub parents: Vec<usize>,
    pub goal: usize,
    pub e_max: f64,
}

impl Instance {
    pub fn tree(&self) -> Tree {
        let mut t = Tree::for_map(self.points[0], &self.map, self.e_max);
        for i in 1..self.points.len() {
            let id = t
                .insert(NodeId(self.parents[i] as u32), self.points[i], &self.map)
                .unwrap_or_else(|e| panic!("{}: initial edge into node {i}: {e}", self.name));
            assert_eq!(id.index(), i);
        }
        t.set_goal_node(Some(NodeId(self.goal as u32)));
        t
    }

    pub fn edge_ok(&self, a: usize, b: usize, limit: f64) -> bool {
        self.points[a].distance(self.points[b]) <= limit && self.map.segment_clear(self.points[a], self.points[b])
    }
}

/// Minimum cost(goal) over every parent assignment that forms a tree rooted
/// at node 0 using only edges allowed by `ok`.
pub fn brute_force(inst: &Instance, ok: &dyn Fn(usize, usize) -> bool) -> f64 {
    let n = inst.points.len();
    let options: Vec<Vec<usize>> = (0..n)
        .map(|i| if i == 0 { vec![] } else { (0..n).filter(|&p| p != i && ok(p, i)).collect() })
        .collect();
    let mut parent = vec![usize::MAX; n];
    let mut best = f64::INFINITY;

    fn cost_of(inst: &Instance, parent: &[usize], goal: usize) -> Option<f64> {
        let n = parent.len();
        let mut cur = goal;
        let mut cost = 0.0;
        let mut steps = 0;
        while cur != 0 {
            let p = parent[cur];
            cost += inst.points[p].distance(inst.points[cur]);
            cur = p;
            steps += 1;
            if steps > n {
                return None;
            }
        }
        Some(cost)
    }

    fn acyclic(parent: &[usize]) -> bool {
        let n = parent.len();
        (1..n).all(|s| {
            let mut cur = s;
            for _ in 0..n {
                if cur == 0 {
                    return true;
                }
                cur = parent[cur];
            }
            false
        })
    }

    fn go(i: usize, inst: &Instance, options: &[Vec<usize>], parent: &mut Vec<usize>, best: &mut f64) {
        if i == parent.len() {
            if acyclic(parent) {
                if let Some(c) = cost_of(inst, parent, inst.goal) {
                    *best = best.min(c);
                }
            }
            return;
        }
        for &p in &options[i] {
            parent[i] = p;
            go(i + 1, inst, options, parent, best);
        }
    }

    go(1, inst, &options, &mut parent, &mut best);
    best
}

/// Runs root and goal rewiring with generous budgets until a full round
/// leaves every cost unchanged.
pub fn rewire_to_fixpoint(inst: &Instance, new_rewiring: bool) -> Tree {
    let mut t = inst.tree();
    let mut q = RewireQueues::new();
    let metric = AssistingMetric::euclidean();
    let params = RewireParams {
        e_max: inst.e_max,
        t_root: 200.0,
        t_goal: 200.0,
        new_rewiring,
    };
    let mut clock = PlannerClock::new(BudgetMode::Deterministic { iterations_per_slice: 1 }, 1.0);
    let costs = |t: &Tree| t.ids().map(|i| t.cost(i)).collect::<Vec<_>>();
    let mut quiet = 0;
    for _ in 0..500 {
        let before = costs(&t);
        rewire_root(&mut t, &mut q, &inst.map, &params, &mut clock);
        rewire_goal(&mut t, &mut q, &inst.map, &metric, &params, &mut clock);
        t.validate().unwrap();
        let after = costs(&t);
        for (b, a) in before.iter().zip(&after) {
            assert!(a <= b, "{}: a cost rose from {b} to {a}", inst.name);
        }
        quiet = if after == before { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return t;
        }
    }
    panic!("{}: no fixpoint after 500 rounds", inst.name);
}

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

/// Hand-built trees of at most eight nodes.
pub fn corpus() -> Vec<Instance> {
    vec![
        Instance {
            // A-B of the figure: a cheap point b next to the grandfather C sees the child directly
            name: "shortcut near grandfather",
            map: walls(20, 20, &[]),
            points: vec![p(1.0, 1.0), p(6.0, 1.5), p(9.0, 6.0), p(13.0, 6.5), p(5.5, 3.0), p(16.0, 9.0)],
            parents: vec![0, 0, 1, 2, 0, 3],
            goal: 5,
            e_max: 30.0,
        },
        Instance {
            // C-D of the figure: a wall block sits between the cheap point and the child
            name: "shortcut blocked by obstacle",
            map: walls(20, 20, &[(9, 3), (9, 4), (10, 3), (10, 4), (8, 4), (8, 5), (8, 6), (9, 6)]),
            points: vec![p(1.0, 1.0), p(6.0, 1.5), p(11.5, 1.5), p(12.0, 6.0), p(6.0, 6.5), p(13.0, 9.0)],
            parents: vec![0, 0, 1, 2, 0, 3],
            goal: 5,
            e_max: 30.0,
        },
        Instance {
            name: "zig-zag chain",
            map: walls(20, 20, &[]),
            points: vec![p(1.0, 1.0), p(3.0, 5.0), p(5.0, 1.0), p(7.0, 5.0), p(9.0, 1.0), p(11.0, 5.0)],
            parents: vec![0, 0, 1, 2, 3, 4],
            goal: 5,
            e_max: 30.0,
        },
        Instance {
            name: "convex corner",
            map: walls(20, 20, &[(6, 6), (7, 6), (6, 7), (7, 7), (6, 8), (7, 8)]),
            points: vec![p(2.0, 2.0), p(2.0, 7.0), p(5.0, 10.0), p(9.0, 10.5), p(9.5, 5.0), p(12.0, 9.0)],
            parents: vec![0, 0, 1, 2, 3, 4],
            goal: 5,
            e_max: 30.0,
        },
        Instance {
            name: "star around a hub",
            map: walls(20, 20, &[]),
            points: vec![p(1.0, 1.0), p(10.0, 1.0), p(10.0, 10.0), p(5.0, 5.0), p(1.0, 10.0)],
            parents: vec![0, 0, 1, 0, 2],
            goal: 4,
            e_max: 30.0,
        },
        Instance {
            name: "eight nodes through a doorway",
            map: walls(20, 20, &[(10, 0), (10, 1), (10, 2), (10, 3), (10, 4), (10, 5), (10, 8), (10, 9), (10, 10), (10, 11)]),
            points: vec![
                p(2.0, 2.0),
                p(6.0, 10.0),
                p(9.0, 13.0),
                p(13.0, 12.5),
                p(16.0, 9.0),
                p(8.5, 6.9),
                p(12.0, 7.0),
                p(17.0, 2.0),
            ],
            parents: vec![0, 0, 1, 2, 3, 0, 3, 4],
            goal: 7,
            e_max: 30.0,
        },
        Instance {
            name: "goal already optimal",
            map: walls(20, 20, &[]),
            points: vec![p(1.0, 1.0), p(5.0, 5.0), p(9.0, 9.0)],
            parents: vec![0, 0, 1],
            goal: 2,
            e_max: 30.0,
        },
    ]
}

/// Every corpus tree under both suites reaches the brute-force optimum.
/// Returns the number of (tree, suite) pairs checked.
pub fn hand_built_corpus_reaches_optimum() -> usize {
    let mut checked = 0;
    for inst in corpus() {
        let all = |a: usize, b: usize| inst.edge_ok(a, b, f64::INFINITY);
        let best = brute_force(&inst, &all);
        assert!(best.is_finite(), "{}", inst.name);
        let start = inst.tree().goal_cost();
        for new_rewiring in [false, true] {
            let t = rewire_to_fixpoint(&inst, new_rewiring);
            let got = t.goal_cost();
            assert!(
                (got - best).abs() <= 1e-9,
                "{} (new rewiring {new_rewiring}): {got} vs optimum {best}, started at {start}",
                inst.name
            );
            for (parent, child) in t.edges() {
                assert!(inst.map.segment_clear(t.position(parent), t.position(child)));
            }
            checked += 1;
        }
    }
    checked
}

/// Seeded random trees with short edges. Stage one alone must reach the
/// optimum over edges up to `e_max`.
pub fn random_small_trees(count: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut done = 0;
    while done < count {
        let map = walls(
            20,
            20,
            &(0..12).map(|_| (rng.random_range(0..20), rng.random_range(0..20))).collect::<Vec<_>>(),
        );
        let e_max = rng.random_range(5.0..9.0);
        let n = rng.random_range(4..=8);
        let mut points = vec![map.sample_free(&mut rng).unwrap()];
        let mut parents = vec![0];
        let mut tries = 0;
        while points.len() < n && tries < 2000 {
            tries += 1;
            let q = map.sample_free(&mut rng).unwrap();
            let reach: Vec<usize> = (0..points.len())
                .filter(|&i| points[i].distance(q) <= e_max && map.segment_clear(points[i], q))
                .collect();
            if !reach.is_empty() {
                parents.push(reach[rng.random_range(0..reach.len())]);
                points.push(q);
            }
        }
        if points.len() < n {
            continue;
        }
        let inst = Instance {
            name: "random",
            map,
            points,
            parents,
            goal: n - 1,
            e_max,
        };
        let within = |a: usize, b: usize| inst.edge_ok(a, b, e_max);
        let anywhere = |a: usize, b: usize| inst.edge_ok(a, b, f64::INFINITY);
        let restricted = brute_force(&inst, &within);
        let unrestricted = brute_force(&inst, &anywhere);

        let first_only = rewire_to_fixpoint(&inst, false).goal_cost();
        assert!((first_only - restricted).abs() <= 1e-9, "seed {done}: {first_only} vs {restricted}");
        // stage two may bridge pairs farther apart than e_max
        let both = rewire_to_fixpoint(&inst, true).goal_cost();
        assert!(both <= restricted + 1e-9 && both >= unrestricted - 1e-9, "seed {done}: {both} outside [{unrestricted}, {restricted}]");
        done += 1;
    }
}
