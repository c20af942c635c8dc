//! Collision audit by dense sampling, kept separate from the exact segment test.

use crate::geometry::{point_segment_distance, Point};
use crate::world::WorldMap;

/// True when `a -> b` stays clear of occupied cells and discs. Cells are
/// probed every `cell_size / 8` along the segment, treating cells as closed;
/// discs are checked by exact point-segment distance.
pub fn audit_segment(map: &WorldMap, a: Point, b: Point) -> bool {
    if !(map.in_bounds(a) && map.in_bounds(b)) {
        return false;
    }
    for d in map.discs() {
        if point_segment_distance(d.center, a, b) < d.radius {
            return false;
        }
    }
    let step = map.cell_size() / 8.0;
    let n = (a.distance(b) / step).ceil().max(1.0) as usize;
    (0..=n).all(|i| probe_free(map, a.lerp(b, i as f64 / n as f64)))
}

fn probe_free(map: &WorldMap, p: Point) -> bool {
    let cs = map.cell_size();
    let fx = p.x / cs;
    let fy = p.y / cs;
    // a point on a cell boundary touches every cell sharing it
    let cols: &[i64] = &touching(fx);
    let rows: &[i64] = &touching(fy);
    for &c in cols {
        for &r in rows {
            if c >= 0
                && r >= 0
                && (c as usize) < map.cols()
                && (r as usize) < map.rows()
                && map.is_occupied_cell(c as usize, r as usize)
            {
                return false;
            }
        }
    }
    true
}

fn touching(v: f64) -> Vec<i64> {
    let f = v.floor();
    if v == f {
        vec![f as i64 - 1, f as i64]
    } else {
        vec![f as i64]
    }
}

/// Audits consecutive points of a trajectory; returns the number of failing segments.
pub fn audit_polyline(map: &WorldMap, points: &[Point]) -> usize {
    points
        .windows(2)
        .filter(|w| !audit_segment(map, w[0], w[1]))
        .count()
}
