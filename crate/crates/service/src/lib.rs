//! Live planner sessions: a versioned JSON protocol, a tick-driven session
//! core and an HTTP/websocket front end.

pub mod protocol;
pub mod server;
pub mod session;

use biam_bench::BenchError;
use biam_core::world::WorldError;
use biam_core::{PlannerError, Point};
use thiserror::Error;

pub use protocol::{Command, Lifecycle, ServerMessage, Snapshot};
pub use server::{router, AppState};
pub use session::{Overrides, SessionCore};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown planner `{0}`")]
    UnknownPlanner(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version: {0}")]
    Version(String),
    #[error("goal {0} is occupied or off the map")]
    OccupiedGoal(Point),
    #[error("no obstacle with id {0}")]
    UnknownObstacle(u32),
    #[error("session is finished")]
    Finished,
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("metric unavailable: {0}")]
    Metric(#[from] BenchError),
}
