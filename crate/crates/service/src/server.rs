//! HTTP routes, websocket fan-out and the per-session worker threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::Router;
use biam_bench::matrix::default_sigma;
use biam_bench::{planner_matrix, MetricStore, PlannerId};
use biam_core::{PlannerConfig, Scenario};
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, watch};

use crate::protocol::{decode, decode_command, encode, encode_server, ServerMessage};
use crate::session::{Overrides, SessionCore};
use crate::{Lifecycle, ServiceError};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub scenario: String,
    pub planner: String,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: String,
    pub scenario: String,
    pub planner: String,
    pub tick_rate_hz: f64,
    pub config: PlannerConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub cell_size: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub sigma: f64,
    /// The map document, `biam-map v1`.
    pub map: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerInfo {
    pub id: String,
    pub name: String,
    pub metric: String,
    pub bidirectional: bool,
    pub new_rewiring: bool,
}

#[derive(Serialize)]
struct ScenarioList {
    scenarios: Vec<ScenarioInfo>,
}

#[derive(Serialize)]
struct PlannerList {
    planners: Vec<PlannerInfo>,
}

struct Published {
    tick: u64,
    text: String,
}

pub struct SessionHandle {
    core: Arc<Mutex<SessionCore>>,
    snapshots: watch::Receiver<Arc<Published>>,
    events: broadcast::Sender<Arc<str>>,
}

impl SessionHandle {
    /// Parses and queues one client message, returning the encoded reply.
    pub fn submit_text(&self, text: &str) -> String {
        let reply = decode_command(text)
            .and_then(|cmd| self.core.lock().unwrap().submit(cmd))
            .unwrap_or_else(ServerMessage::error);
        encode_server(&reply)
    }
}

#[derive(Default)]
struct Inner {
    store: MetricStore,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
}

impl Drop for Inner {
    fn drop(&mut self) {
        for s in self.sessions.get_mut().unwrap().values() {
            s.core.lock().unwrap().finish();
        }
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(store: MetricStore) -> Self {
        AppState {
            inner: Arc::new(Inner {
                store,
                sessions: Mutex::default(),
            }),
        }
    }

    /// Builds (or fetches) the metric, creates the planner and starts its
    /// worker. Blocking.
    pub fn create_session(&self, req: &CreateRequest) -> Result<CreatedSession, ServiceError> {
        let scenario: Scenario = req
            .scenario
            .parse()
            .map_err(|_| ServiceError::UnknownScenario(req.scenario.clone()))?;
        let planner: PlannerId = req
            .planner
            .parse()
            .map_err(|_| ServiceError::UnknownPlanner(req.planner.clone()))?;
        let metric = self.inner.store.get(scenario, planner.base.metric())?.metric;
        let core = SessionCore::new(scenario, planner, &req.overrides, metric)?;
        let created = CreatedSession {
            id: uuid::Uuid::new_v4().simple().to_string(),
            scenario: scenario.name().to_string(),
            planner: planner.to_string(),
            tick_rate_hz: core.tick_rate_hz(),
            config: core.config().clone(),
        };
        let first = Published {
            tick: core.tick(),
            text: encode_server(&ServerMessage::Snapshot(core.snapshot())),
        };
        let (tx, rx) = watch::channel(Arc::new(first));
        let (events, _) = broadcast::channel(64);
        let core = Arc::new(Mutex::new(core));
        spawn_worker(core.clone(), tx, events.clone());
        let handle = SessionHandle {
            core,
            snapshots: rx,
            events,
        };
        self.inner
            .sessions
            .lock()
            .unwrap()
            .insert(created.id.clone(), Arc::new(handle));
        Ok(created)
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.inner.sessions.lock().unwrap().get(id).cloned()
    }

    /// Finishes a session; its worker stops and its streams close.
    pub fn close_session(&self, id: &str) -> Result<(), ServiceError> {
        let handle = self
            .inner
            .sessions
            .lock()
            .unwrap()
            .remove(id)
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        handle.core.lock().unwrap().finish();
        Ok(())
    }
}

fn spawn_worker(core: Arc<Mutex<SessionCore>>, tx: watch::Sender<Arc<Published>>, events: broadcast::Sender<Arc<str>>) {
    let period = Duration::from_secs_f64(1.0 / core.lock().unwrap().tick_rate_hz());
    thread::spawn(move || {
        let mut next = Instant::now() + period;
        loop {
            let now = Instant::now();
            thread::sleep(next.saturating_duration_since(now));
            // no catch-up bursts after a slow tick
            next = (next + period).max(Instant::now());
            let (snapshot, errors) = {
                let mut c = core.lock().unwrap();
                if c.lifecycle() == Lifecycle::Finished {
                    break;
                }
                c.step()
            };
            for e in errors {
                let _ = events.send(encode_server(&ServerMessage::error(e)).into());
            }
            if let Some(s) = snapshot {
                tx.send_replace(Arc::new(Published {
                    tick: s.tick,
                    text: encode_server(&ServerMessage::Snapshot(s)),
                }));
            }
        }
    });
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(scenarios))
        .route("/planners", get(planners))
        .route("/sessions", post(create))
        .route("/sessions/{id}", delete(close))
        .route("/sessions/{id}/socket", get(socket))
        .with_state(state)
}

fn json(status: StatusCode, text: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn error_response(e: ServiceError) -> Response {
    let status = match e {
        ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
        ServiceError::Metric(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    };
    json(status, encode_server(&ServerMessage::error(e)))
}

pub fn scenario_infos() -> Vec<ScenarioInfo> {
    Scenario::ALL
        .iter()
        .map(|&s| {
            let map = s.load();
            let (start, goal) = (map.start().expect("start"), map.goal().expect("goal"));
            ScenarioInfo {
                name: s.name().to_string(),
                width: map.width(),
                height: map.height(),
                cell_size: map.cell_size(),
                start: [start.x, start.y],
                goal: [goal.x, goal.y],
                sigma: default_sigma(s),
                map: s.document().to_string(),
            }
        })
        .collect()
}

pub fn planner_infos() -> Vec<PlannerInfo> {
    planner_matrix()
        .into_iter()
        .map(|p| PlannerInfo {
            id: p.to_string(),
            name: p.display_name(),
            metric: p.base.metric().name().to_string(),
            bidirectional: p.scheme.bidirectional(),
            new_rewiring: p.scheme.new_rewiring(),
        })
        .collect()
}

async fn scenarios() -> Response {
    json(StatusCode::OK, encode(&ScenarioList { scenarios: scenario_infos() }))
}

async fn planners() -> Response {
    json(StatusCode::OK, encode(&PlannerList { planners: planner_infos() }))
}

async fn create(State(state): State<AppState>, body: String) -> Response {
    let req: CreateRequest = match decode(&body) {
        Ok(r) => r,
        Err(e) => return error_response(e),
    };
    match tokio::task::spawn_blocking(move || state.create_session(&req)).await {
        Ok(Ok(created)) => json(StatusCode::CREATED, encode(&created)),
        Ok(Err(e)) => error_response(e),
        Err(join) => json(
            StatusCode::INTERNAL_SERVER_ERROR,
            encode_server(&ServerMessage::error(join)),
        ),
    }
}

async fn close(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.close_session(&id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => error_response(e),
    }
}

async fn socket(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Response {
    let Some(handle) = state.session(&id) else {
        return error_response(ServiceError::UnknownSession(id));
    };
    match ws {
        Ok(ws) => ws.on_upgrade(move |socket| run_socket(socket, handle)),
        Err(rejection) => rejection.into_response(),
    }
}

async fn run_socket(socket: WebSocket, handle: Arc<SessionHandle>) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = handle.snapshots.clone();
    let mut events = handle.events.subscribe();
    // The first frame is built now so it carries the current lifecycle.
    let (mut last_tick, first) = {
        let core = handle.core.lock().unwrap();
        (core.tick(), encode_server(&ServerMessage::Snapshot(core.snapshot())))
    };
    snapshots.mark_unchanged();
    if sink.send(Message::Text(first.into())).await.is_err() {
        return;
    }
    loop {
        let out = tokio::select! {
            changed = snapshots.changed() => match changed {
                Ok(()) => {
                    let p = snapshots.borrow_and_update().clone();
                    if p.tick <= last_tick {
                        continue;
                    }
                    last_tick = p.tick;
                    p.text.clone()
                }
                Err(_) => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            },
            ev = events.recv() => match ev {
                Ok(text) => text.to_string(),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => handle.submit_text(text.as_str()),
                Some(Ok(Message::Binary(_))) => encode_server(&ServerMessage::error("binary frames are not supported")),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
        };
        if sink.send(Message::Text(out.into())).await.is_err() {
            break;
        }
    }
}
