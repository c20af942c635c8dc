//! Assisting metrics: Euclidean, diffusion and geodesic.

mod cache;
mod diffusion;
mod geodesic;
mod grid_graph;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{load_embedding, load_geodesic, save_embedding, save_geodesic, CacheError, CacheKey};
pub use diffusion::{build_diffusion_embedding, DiffusionEmbedding};
pub use geodesic::{build_geodesic_table, GeodesicTable};
pub use grid_graph::{build_grid_graph, GridGraph, Step};

use crate::geometry::Point;
use crate::world::{Scenario, WorldMap};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric resolution {resolution} is not an integer multiple of cell size {cell_size}")]
    BadResolution { resolution: f64, cell_size: f64 },
    #[error("no free grid cell near {0}")]
    Unmapped(Point),
    #[error("diffusion parameters out of range: k={k}, t={t}")]
    BadParameters { k: usize, t: u32 },
    #[error("{k} diffusion components requested from a graph of {nodes} nodes")]
    TooFewNodes { k: usize, nodes: usize },
    #[error("eigen-solver did not converge after {matvecs} products (residual {residual:e})")]
    NotConverged { matvecs: usize, residual: f64 },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Diffusion,
    Geodesic,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Euclidean, MetricKind::Diffusion, MetricKind::Geodesic];

    /// One-letter tag used in planner names: E, D or G.
    pub fn letter(self) -> char {
        match self {
            MetricKind::Euclidean => 'E',
            MetricKind::Diffusion => 'D',
            MetricKind::Geodesic => 'G',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Diffusion => "diffusion",
            MetricKind::Geodesic => "geodesic",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" | "e" | "E" => Ok(MetricKind::Euclidean),
            "diffusion" | "d" | "D" => Ok(MetricKind::Diffusion),
            "geodesic" | "g" | "G" => Ok(MetricKind::Geodesic),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

/// Grid resolution and diffusion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub resolution: f64,
    pub k: usize,
    pub t: u32,
}

impl MetricParams {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let resolution = match scenario {
            Scenario::BugTrap | Scenario::Maze => 2.0,
            Scenario::Office => 4.0,
        };
        MetricParams {
            resolution,
            k: 20,
            t: 2,
        }
    }
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            resolution: 2.0,
            k: 20,
            t: 2,
        }
    }
}

/// Sidecar file name used by [`AssistingMetric::load_or_build`]; `None` for
/// the Euclidean metric, which has no payload.
pub fn cache_file_name(map: &WorldMap, kind: MetricKind, params: MetricParams) -> Option<String> {
    let (k, t) = match kind {
        MetricKind::Euclidean => return None,
        MetricKind::Diffusion => (params.k, params.t),
        MetricKind::Geodesic => (0, 0),
    };
    let short: String = map.content_hash()[..8].iter().map(|b| format!("{b:02x}")).collect();
    Some(format!("{}-{short}-r{}-k{k}-t{t}.bin", kind.name(), params.resolution))
}

pub fn euclidean(a: Point, b: Point) -> f64 {
    a.distance(b)
}

#[derive(Debug, Clone)]
enum Payload {
    None,
    Diffusion(Arc<GridGraph>, Arc<DiffusionEmbedding>),
    Geodesic(Arc<GridGraph>, Arc<GeodesicTable>),
}

/// The metric `d_A` a planner uses for goal guidance and sample ordering.
/// Cloning is cheap; payloads are shared.
#[derive(Debug, Clone)]
pub struct AssistingMetric {
    kind: MetricKind,
    payload: Payload,
}

impl AssistingMetric {
    pub fn euclidean() -> Self {
        AssistingMetric {
            kind: MetricKind::Euclidean,
            payload: Payload::None,
        }
    }

    pub fn diffusion(graph: Arc<GridGraph>, emb: Arc<DiffusionEmbedding>) -> Self {
        AssistingMetric {
            kind: MetricKind::Diffusion,
            payload: Payload::Diffusion(graph, emb),
        }
    }

    pub fn geodesic(graph: Arc<GridGraph>, table: Arc<GeodesicTable>) -> Self {
        AssistingMetric {
            kind: MetricKind::Geodesic,
            payload: Payload::Geodesic(graph, table),
        }
    }

    /// Builds the payload for `kind` from the map's static geometry.
    pub fn build(map: &WorldMap, kind: MetricKind, params: MetricParams) -> Result<Self, MetricError> {
        Self::load_or_build(map, kind, params, None, false)
    }

    /// Like [`AssistingMetric::build`], but reads and writes sidecar files in
    /// `cache_dir`. A sidecar built for another map or other parameters is an
    /// error; `rebuild` skips reading and overwrites it.
    pub fn load_or_build(
        map: &WorldMap,
        kind: MetricKind,
        params: MetricParams,
        cache_dir: Option<&Path>,
        rebuild: bool,
    ) -> Result<Self, MetricError> {
        if kind == MetricKind::Euclidean {
            return Ok(Self::euclidean());
        }
        let graph = Arc::new(build_grid_graph(map, params.resolution)?);
        let hash = map.content_hash();
        let key = CacheKey {
            kind,
            map_hash: hash,
            resolution: params.resolution,
            k: if kind == MetricKind::Diffusion { params.k as u32 } else { 0 },
            t: if kind == MetricKind::Diffusion { params.t } else { 0 },
        };
        let path = cache_dir.and_then(|dir| Some(dir.join(cache_file_name(map, kind, params)?)));
        let rev = map.static_revision();
        match kind {
            MetricKind::Diffusion => {
                let emb = match &path {
                    Some(p) if p.exists() && !rebuild => load_embedding(p, &key, rev)?,
                    _ => {
                        let emb = build_diffusion_embedding(&graph, params.k, params.t)?;
                        if let Some(p) = &path {
                            save_embedding(p, &key, &emb)?;
                        }
                        emb
                    }
                };
                if emb.node_count() != graph.node_count() {
                    return Err(CacheError::KeyMismatch.into());
                }
                Ok(Self::diffusion(graph, Arc::new(emb)))
            }
            MetricKind::Geodesic => {
                let table = match &path {
                    Some(p) if p.exists() && !rebuild => load_geodesic(p, &key, rev)?,
                    _ => {
                        let table = build_geodesic_table(&graph);
                        if let Some(p) = &path {
                            save_geodesic(p, &key, &table)?;
                        }
                        table
                    }
                };
                if table.node_count() != graph.node_count() {
                    return Err(CacheError::KeyMismatch.into());
                }
                Ok(Self::geodesic(graph, Arc::new(table)))
            }
            MetricKind::Euclidean => unreachable!(),
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn grid(&self) -> Option<&GridGraph> {
        match &self.payload {
            Payload::None => None,
            Payload::Diffusion(g, _) | Payload::Geodesic(g, _) => Some(g),
        }
    }

    /// A payload is stale once the static geometry it was built from changes.
    /// Disc obstacles do not count.
    pub fn is_stale(&self, map: &WorldMap) -> bool {
        match &self.payload {
            Payload::None => false,
            Payload::Diffusion(_, e) => e.source_revision() != map.static_revision(),
            Payload::Geodesic(_, t) => t.source_revision() != map.static_revision(),
        }
    }

    pub fn try_distance(&self, a: Point, b: Point) -> Result<f64, MetricError> {
        match &self.payload {
            Payload::None => Ok(a.distance(b)),
            Payload::Diffusion(g, e) => Ok(e.distance_nodes(g.cell_of(a)?, g.cell_of(b)?)),
            Payload::Geodesic(g, t) => Ok(t.distance_nodes(g.cell_of(a)?, g.cell_of(b)?)),
        }
    }

    /// `d_A(a, b)`; points that cannot be mapped onto the grid are infinitely far.
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        self.try_distance(a, b).unwrap_or(f64::INFINITY)
    }
}
