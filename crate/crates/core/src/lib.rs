//! Real-time bidirectional RRT* planning with assisting metrics.

pub mod audit;
pub mod clock;
pub mod geometry;
pub mod metrics;
pub mod planner;
pub mod rewiring;
pub mod sampling;
pub mod tree;
pub mod world;

pub use clock::{BudgetMode, PlannerClock};
pub use geometry::Point;
pub use metrics::{AssistingMetric, MetricKind, MetricParams};
pub use planner::{Phase, Planner, PlannerConfig, PlannerError, TickReport};
pub use tree::{NodeId, Tree};
pub use world::{load_map, Scenario, WorldMap};
