//! Metric checks against closed forms, Floyd-Warshall and a dense
//! eigendecomposition. Each panics with the first mismatch.

use std::f64::consts::SQRT_2;

use biam_core::geometry::Point;
use biam_core::metrics::{
    build_diffusion_embedding, build_geodesic_table, build_grid_graph, euclidean, AssistingMetric, MetricKind,
    MetricParams,
};
use biam_core::world::{load_map, WorldMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::diffusion::{dense_diffusion, norm};
use super::grid::{connected, floyd_warshall, random_map};

/// Maps of at most 15x15: hand-built plus seeded random ones.
pub fn corpus() -> Vec<WorldMap> {
    let mut maps = vec![
        WorldMap::empty(15, 15, 1.0),
        WorldMap::empty(1, 7, 1.0),
        load_map(
            "biam-map v1\ncell 1\n\
             S....#....\n\
             .###.#.##.\n\
             ...#...#..\n\
             ##.#####.#\n\
             .........G\n",
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..12 {
        let density = [0.1, 0.25, 0.4][i % 3];
        maps.push(random_map(&mut rng, 15, 15, density));
    }
    maps
}

pub fn euclidean_closed_forms() {
    let m = AssistingMetric::euclidean();
    let cases = [
        ((0.0, 0.0), (3.0, 4.0), 5.0),
        ((1.0, 1.0), (1.0, 1.0), 0.0),
        ((-2.0, 5.0), (-2.0, -7.0), 12.0),
        ((0.5, 0.5), (5.5, 12.5), 13.0),
        ((8.0, 0.0), (0.0, 15.0), 17.0),
    ];
    for ((ax, ay), (bx, by), want) in cases {
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        assert_eq!(m.distance(a, b), want);
        assert_eq!(m.distance(b, a), want);
        assert_eq!(euclidean(a, b), want);
    }
    let d = m.distance(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
    assert_eq!(d, SQRT_2);
}

/// Returns the number of pairs compared.
pub fn geodesic_equals_floyd_warshall() -> usize {
    let mut total = 0;
    for (idx, map) in corpus().iter().enumerate() {
        let graph = build_grid_graph(map, 1.0).unwrap();
        let table = build_geodesic_table(&graph);
        let fw = floyd_warshall(map);
        let cols = map.cols();
        let mut checked = 0;
        for u in 0..graph.node_count() as u32 {
            let (uc, ur) = graph.cell(u);
            for v in 0..graph.node_count() as u32 {
                let (vc, vr) = graph.cell(v);
                let want = fw[ur * cols + uc][vr * cols + vc].map_or(f64::INFINITY, |l| l.to_f64());
                assert_eq!(table.distance_nodes(u, v), want, "map {idx}: ({uc},{ur}) -> ({vc},{vr})");
                checked += 1;
            }
        }
        assert_eq!(checked, graph.node_count() * graph.node_count());
        // every free cell became a node
        assert_eq!(graph.node_count(), map.free_cell_count(), "map {idx}");
        total += checked;
    }
    total
}

/// Returns the worst relative distance error seen.
pub fn diffusion_matches_dense() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut maps = Vec::new();
    while maps.len() < 6 {
        let (cols, rows) = (rng.random_range(8..=15), rng.random_range(8..=14));
        let map = random_map(&mut rng, cols, rows, 0.12);
        if connected(&map) && map.free_cell_count() <= 200 && map.free_cell_count() > 40 {
            maps.push(map);
        }
    }
    let mut overall: f64 = 0.0;
    for (idx, map) in maps.iter().enumerate() {
        for (k, t) in [(6, 2), (10, 1)] {
            let dense = dense_diffusion(map, k, t);
            // the k-th and (k+1)-th eigenvalues must be apart or the subspace is ambiguous
            assert!(dense.values[k - 1] - dense.values[k] > 1e-6, "map {idx} has a degenerate cut at k={k}");
            let graph = build_grid_graph(map, 1.0).unwrap();
            let emb = build_diffusion_embedding(&graph, k, t).unwrap();
            for (a, b) in emb.eigenvalues().iter().zip(&dense.values) {
                assert!((a - b).abs() <= 1e-9, "map {idx}: eigenvalue {a} vs {b}");
            }
            let cells = &dense.cells;
            let node = |cell: (usize, usize)| graph.node_at(cell.0, cell.1).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..cells.len() {
                for j in (i + 1)..cells.len() {
                    let want: f64 = dense.coords[i]
                        .iter()
                        .zip(&dense.coords[j])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt();
                    let got = emb.distance_nodes(node(cells[i]), node(cells[j]));
                    // Cells with identical neighbourhoods embed on top of each other; their
                    // distance is pure cancellation, so scale by the coordinates instead.
                    let scale = want.max(norm(&dense.coords[i])).max(norm(&dense.coords[j]));
                    worst = worst.max((got - want).abs() / scale);
                }
            }
            assert!(worst <= 1e-6, "map {idx} k={k} t={t}: worst relative error {worst:e}");
            overall = overall.max(worst);
        }
    }
    overall
}

/// Pairs straddling a wall sit farther apart than open pairs at the same
/// straight-line distance.
pub fn diffusion_separates_across_walls() {
    // a wall down the middle with a gap at the top
    let mut map = WorldMap::empty(20, 20, 1.0);
    for r in 0..17 {
        map.set_occupied(10, r, true);
    }
    for k in [12, 20] {
        let m = AssistingMetric::build(&map, MetricKind::Diffusion, MetricParams { resolution: 1.0, k, t: 2 }).unwrap();
        for y in [2.5, 5.5, 8.5, 12.5] {
            // pairs 2, 3 and 4 m apart; the blocked pair straddles the wall
            for sep in [2.0, 3.0, 4.0] {
                let blocked = m.distance(Point::new(10.5 - sep / 2.0, y), Point::new(10.5 + sep / 2.0, y));
                let open = [
                    (Point::new(2.5, y), Point::new(2.5 + sep, y)),
                    (Point::new(13.5, y), Point::new(13.5 + sep, y)),
                    (Point::new(10.5 - sep / 2.0, 18.5), Point::new(10.5 + sep / 2.0, 18.5)),
                    (Point::new(4.5, y - sep / 2.0), Point::new(4.5, y + sep / 2.0)),
                ];
                for (a, b) in open {
                    assert_eq!(a.distance(b), sep);
                    let d = m.distance(a, b);
                    assert!(blocked > d, "k={k} y={y} sep={sep}: blocked {blocked} vs open {d} for {a}-{b}");
                }
            }
        }
    }
    // and the geodesic agrees about the ordering
    let g = AssistingMetric::build(&map, MetricKind::Geodesic, MetricParams { resolution: 1.0, k: 0, t: 0 }).unwrap();
    assert!(g.distance(Point::new(8.5, 2.5), Point::new(12.5, 2.5)) > g.distance(Point::new(2.5, 2.5), Point::new(6.5, 2.5)));
}
