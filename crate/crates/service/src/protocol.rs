//! Wire format. Every message is a JSON object carrying `"v": 1`; client
//! messages are tagged by `cmd`, server messages by `type`.

use biam_core::Phase;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ServiceError;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    SetGoal { x: f64, y: f64 },
    AddObstacle { x: f64, y: f64, r: f64 },
    RemoveObstacle { id: u32 },
    Pause,
    Resume,
    /// Agent speed in m/s. Named `speed` because `v` is the version field.
    SetSpeed { speed: f64 },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetGoal { .. } => "set_goal",
            Command::AddObstacle { .. } => "add_obstacle",
            Command::RemoveObstacle { .. } => "remove_obstacle",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::SetSpeed { .. } => "set_speed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Created,
    Running,
    Paused,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    /// `null` until the goal hangs off the forward tree with finite cost.
    pub cost_goal: Option<f64>,
    pub path_length: f64,
    pub nodes_forward: usize,
    pub nodes_reverse: usize,
    /// Edge count before decimation.
    pub edges_total: usize,
    /// Planner seconds since the current goal was set.
    pub elapsed_s: f64,
    pub search_time_s: Option<f64>,
    pub traveled_m: f64,
}

/// Full session state at the end of a tick. Edges are `[x1, y1, x2, y2]`
/// from parent to child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub lifecycle: Lifecycle,
    pub phase: Phase,
    pub agent: [f64; 2],
    pub goal: Option<[f64; 2]>,
    pub path: Vec<[f64; 2]>,
    pub edges: Vec<[f64; 4]>,
    pub reverse_edges: Vec<[f64; 4]>,
    pub obstacles: Vec<Obstacle>,
    pub stats: SnapshotStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Ack {
        cmd: String,
        effective_tick: u64,
        /// Id the obstacle will carry, for `add_obstacle`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u32>,
    },
    Error {
        reason: String,
    },
}

impl ServerMessage {
    pub fn error(reason: impl ToString) -> Self {
        ServerMessage::Error {
            reason: reason.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

pub fn encode<T: Serialize>(body: &T) -> String {
    serde_json::to_string(&Versioned {
        v: PROTOCOL_VERSION,
        body,
    })
    .expect("protocol types serialize")
}

/// Parses a versioned message, rejecting anything but `"v": 1`.
pub fn decode<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ServiceError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ServiceError::Malformed(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ServiceError::Malformed("expected a JSON object".into()))?;
    match obj.remove("v") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION as u64) => {}
        Some(other) => return Err(ServiceError::Version(other.to_string())),
        None => return Err(ServiceError::Version("missing".into())),
    }
    serde_json::from_value(value).map_err(|e| ServiceError::Malformed(e.to_string()))
}

pub fn encode_command(cmd: &Command) -> String {
    encode(cmd)
}

pub fn decode_command(text: &str) -> Result<Command, ServiceError> {
    decode(text)
}

pub fn encode_server(msg: &ServerMessage) -> String {
    encode(msg)
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ServiceError> {
    decode(text)
}
