//! JSON-over-HTTP and WebSocket front end over [`Session`]s.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use csng::community::NodeId;
use csng::curve_model::{Dataset, JsonLines, LinesFormat, LINES_MAGIC};
use csng::layout_engine::{step_in_place, CompoundGraph, LayoutParams, LayoutState};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::inputs::{parse_id_list, GraphRequest};
use crate::session::{AuditEntry, DatasetSource, Op, Session, SessionConfig, SessionError, TraceRequest};

/// Header carrying the generation a mutating request was prepared against.
pub const IF_GENERATION: &str = "if-generation";

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub session: SessionConfig,
    /// Directory served at `/` (the explorer bundle).
    pub static_dir: Option<PathBuf>,
    pub max_body_bytes: usize,
    /// Upper bound on layout stream frames per second.
    pub max_frame_rate: f64,
    /// Simulation steps between two stream frames unless the client asks otherwise.
    pub steps_per_frame: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            static_dir: None,
            max_body_bytes: 512 << 20,
            max_frame_rate: 30.0,
            steps_per_frame: 20,
        }
    }
}

type SharedSession = Arc<RwLock<Session>>;

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    sessions: RwLock<HashMap<String, SharedSession>>,
    next_id: AtomicU64,
    config: ServiceConfig,
}

// A panic inside an operation never commits partial state, so a poisoned
// lock still guards a consistent session.
fn read<T>(l: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(l: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self(Arc::new(Inner { sessions: RwLock::new(HashMap::new()), next_id: AtomicU64::new(1), config }))
    }

    fn session(&self, id: &str) -> Result<SharedSession, ApiError> {
        read(&self.0.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()).into())
    }

    fn insert(&self, session: Session) -> String {
        let id = session.id.clone();
        write(&self.0.sessions).insert(id.clone(), Arc::new(RwLock::new(session)));
        id
    }

    fn fresh_id(&self) -> String {
        format!("s{}", self.0.next_id.fetch_add(1, Ordering::Relaxed))
    }
}

/// Error body: `{"error": kind, "message": text, ...details}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    details: Value,
}

impl ApiError {
    fn invalid(message: impl Into<String>) -> Self {
        Self { status: StatusCode::UNPROCESSABLE_ENTITY, kind: "InvalidParams", message: message.into(), details: json!({}) }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, kind: "Internal", message: message.into(), details: json!({}) }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::UnknownSession(_) | SessionError::UnknownNode(_) | SessionError::UnknownSegment(_) => {
                StatusCode::NOT_FOUND
            }
            SessionError::StaleGeneration { .. } | SessionError::NotMergeable { .. } | SessionError::NotReady(_) => {
                StatusCode::CONFLICT
            }
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self { status, kind: e.kind(), message: e.to_string(), details: e.details() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = self.details;
        body["error"] = json!(self.kind);
        body["message"] = json!(self.message);
        (self.status, Json(body)).into_response()
    }
}

/// JSON request body; an empty body reads as `{}`. Parse failures are 422.
struct JsonBody<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = read_body(req, state).await?;
        let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(bytes).map(JsonBody).map_err(|e| ApiError::invalid(format!("bad request body: {e}")))
    }
}

async fn read_body<S: Send + Sync>(req: Request, state: &S) -> Result<Bytes, ApiError> {
    Bytes::from_request(req, state).await.map_err(|e| {
        let status = e.status();
        let kind = if status == StatusCode::PAYLOAD_TOO_LARGE { "TooLarge" } else { "InvalidParams" };
        ApiError { status, kind, message: e.body_text(), details: json!({}) }
    })
}

fn if_generation(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    headers
        .get(IF_GENERATION)
        .map(|v| {
            v.to_str()
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ApiError::invalid("If-Generation must be an unsigned integer"))
        })
        .transpose()
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, SessionError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("operation aborted: {e}")))?
        .map_err(ApiError::from)
}

async fn mutate(state: &AppState, sid: &str, headers: &HeaderMap, op: Op) -> Result<Json<Value>, ApiError> {
    let session = state.session(sid)?;
    let expected = if_generation(headers)?;
    let label = op_name(&op);
    let sid = sid.to_string();
    let applied = blocking(move || write(&session).apply(op, expected)).await;
    match &applied {
        Ok(a) => tracing::info!(session = %sid, op = label, generation = a.generation, mutated = a.mutated, "applied"),
        Err(e) => tracing::warn!(session = %sid, op = label, error = e.kind, "rejected"),
    }
    applied.map(|a| Json(a.body))
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Dataset { .. } => "dataset",
        Op::Decompose { .. } => "decompose",
        Op::Graph(_) => "graph",
        Op::Detect { .. } => "detect",
        Op::Split { .. } => "split",
        Op::Merge { .. } => "merge",
        Op::Collapse { .. } => "collapse",
    }
}

async fn view<T, F>(state: &AppState, sid: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Session) -> Result<T, SessionError> + Send + 'static,
{
    let session = state.session(sid)?;
    blocking(move || f(&read(&session))).await
}

pub fn router(config: ServiceConfig) -> Router {
    let static_dir = config.static_dir.clone();
    let limit = config.max_body_bytes;
    let app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/replay", post(replay_session))
        .route("/sessions/{s}", get(get_session).delete(delete_session))
        .route("/sessions/{s}/audit", get(get_audit))
        .route("/sessions/{s}/dataset", post(post_dataset))
        .route("/sessions/{s}/decompose", post(post_decompose))
        .route("/sessions/{s}/graph", post(post_graph))
        .route("/sessions/{s}/communities", post(post_detect).get(get_communities))
        .route("/sessions/{s}/communities/merge", post(post_merge))
        .route("/sessions/{s}/communities/{node}/split", post(post_split))
        .route("/sessions/{s}/communities/{node}/collapse", post(post_collapse))
        .route("/sessions/{s}/segments", get(get_segments))
        .route("/sessions/{s}/segments/{seg}/community", get(get_segment_community))
        .route("/sessions/{s}/layout", get(get_layout))
        .route("/sessions/{s}/layout/stream", get(layout_stream))
        .route("/sessions/{s}/baseline", post(post_baseline))
        .route("/schemas/{name}", get(get_schema))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(AppState::new(config));
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves on an already bound listener until Ctrl-C.
pub async fn serve_on(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    serve_on(tokio::net::TcpListener::bind(addr).await?, config).await
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<Value>) {
    let id = state.fresh_id();
    state.insert(Session::new(id.clone(), state.0.config.session.clone()));
    tracing::info!(session = %id, "created");
    (StatusCode::CREATED, Json(json!({ "session": id, "generation": 0 })))
}

#[derive(Deserialize)]
struct ReplayBody {
    entries: Vec<AuditEntry>,
}

async fn replay_session(
    State(state): State<AppState>,
    JsonBody(body): JsonBody<ReplayBody>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let id = state.fresh_id();
    let config = state.0.config.session.clone();
    let sid = id.clone();
    let session = blocking(move || Session::replay(sid, config, &body.entries)).await?;
    let body = json!({ "session": id, "generation": session.generation(), "state_hash": session.state_hash() });
    state.insert(session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    view(&state, &sid, |s| Ok(s.summary())).await.map(Json)
}

async fn delete_session(State(state): State<AppState>, Path(sid): Path<String>) -> Result<StatusCode, ApiError> {
    match write(&state.0.sessions).remove(&sid) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(SessionError::UnknownSession(sid).into()),
    }
}

async fn get_audit(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    view(&state, &sid, |s| Ok(json!({ "session": s.id, "generation": s.generation(), "entries": s.audit() })))
        .await
        .map(Json)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DatasetBody {
    Trace { trace: TraceRequest },
    Lines(JsonLines),
}

async fn post_dataset(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    req: Request,
) -> Result<Json<Value>, ApiError> {
    let bytes = read_body(req, &()).await?;
    let source = if bytes.starts_with(LINES_MAGIC) {
        let ds = Dataset::from_bytes(&bytes, LinesFormat::Binary).map_err(SessionError::from)?;
        DatasetSource::Lines(ds.to_json_lines())
    } else {
        match serde_json::from_slice(&bytes) {
            Ok(DatasetBody::Trace { trace }) => DatasetSource::Trace(trace),
            Ok(DatasetBody::Lines(lines)) => DatasetSource::Lines(lines),
            Err(_) => {
                return Err(ApiError::invalid(
                    "expected a binary lines file, a JSON lines document or {\"trace\": {field, cfg}}",
                ))
            }
        }
    };
    mutate(&state, &sid, &headers, Op::Dataset { source }).await
}

#[derive(Deserialize)]
struct DecomposeBody {
    #[serde(rename = "L", alias = "span")]
    span: usize,
}

async fn post_decompose(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    JsonBody(body): JsonBody<DecomposeBody>,
) -> Result<Json<Value>, ApiError> {
    mutate(&state, &sid, &headers, Op::Decompose { span: body.span }).await
}

async fn post_graph(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    JsonBody(body): JsonBody<GraphRequest>,
) -> Result<Json<Value>, ApiError> {
    mutate(&state, &sid, &headers, Op::Graph(body)).await
}

fn default_resolution() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct DetectBody {
    #[serde(default = "default_resolution")]
    resolution: f64,
    #[serde(default)]
    seed: u64,
}

async fn post_detect(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    JsonBody(body): JsonBody<DetectBody>,
) -> Result<Json<Value>, ApiError> {
    mutate(&state, &sid, &headers, Op::Detect { resolution: body.resolution, seed: body.seed }).await
}

async fn get_communities(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    view(&state, &sid, |s| Ok(serde_json::to_value(s.tree_json()?).expect("tree serializes")))
        .await
        .map(Json)
}

async fn post_split(
    State(state): State<AppState>,
    Path((sid, node)): Path<(String, NodeId)>,
    headers: HeaderMap,
    JsonBody(body): JsonBody<DetectBody>,
) -> Result<Json<Value>, ApiError> {
    mutate(&state, &sid, &headers, Op::Split { node, resolution: body.resolution, seed: body.seed }).await
}

#[derive(Deserialize)]
struct MergeBody {
    node_ids: Vec<NodeId>,
    #[serde(default)]
    allow_lca_merge: bool,
}

async fn post_merge(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    JsonBody(body): JsonBody<MergeBody>,
) -> Result<Json<Value>, ApiError> {
    let op = Op::Merge { node_ids: body.node_ids, allow_lca_merge: body.allow_lca_merge };
    mutate(&state, &sid, &headers, op).await
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
struct CollapseBody {
    #[serde(default = "default_true")]
    collapsed: bool,
}

async fn post_collapse(
    State(state): State<AppState>,
    Path((sid, node)): Path<(String, NodeId)>,
    headers: HeaderMap,
    JsonBody(body): JsonBody<CollapseBody>,
) -> Result<Json<Value>, ApiError> {
    mutate(&state, &sid, &headers, Op::Collapse { node, collapsed: body.collapsed }).await
}

#[derive(Deserialize)]
struct SegmentsQuery {
    nodes: Option<String>,
}

async fn get_segments(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    Query(q): Query<SegmentsQuery>,
) -> Result<Json<Value>, ApiError> {
    let nodes = q.nodes.as_deref().map(parse_id_list).transpose().map_err(|e| ApiError::invalid(e.0))?;
    view(&state, &sid, move |s| s.segments(nodes.as_deref())).await.map(Json)
}

async fn get_segment_community(
    State(state): State<AppState>,
    Path((sid, seg)): Path<(String, usize)>,
) -> Result<Json<Value>, ApiError> {
    view(&state, &sid, move |s| Ok(json!({ "segment": seg, "community": s.community_of(seg)? })))
        .await
        .map(Json)
}

async fn get_layout(State(state): State<AppState>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    view(&state, &sid, |s| Ok(serde_json::to_value(s.layout_json()?).expect("layout serializes")))
        .await
        .map(Json)
}

#[derive(Deserialize)]
struct StreamQuery {
    every: Option<usize>,
    hz: Option<f64>,
}

async fn layout_stream(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    Query(q): Query<StreamQuery>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Result<Response, ApiError> {
    let (graph, start, params, generation) = view(&state, &sid, |s| {
        let l = s.need_layout()?;
        Ok((l.graph.clone(), l.start.clone(), s.config().layout, s.generation()))
    })
    .await?;
    let ws = ws.map_err(|e| ApiError { status: e.status(), kind: "NotAWebSocket", message: e.body_text(), details: json!({}) })?;
    let cfg = &state.0.config;
    let every = q.every.unwrap_or(cfg.steps_per_frame).max(1);
    let hz = q.hz.filter(|h| *h > 0.0).unwrap_or(cfg.max_frame_rate).min(cfg.max_frame_rate);
    let period = Duration::from_secs_f64(1.0 / hz);
    Ok(ws.on_upgrade(move |socket| stream_layout(socket, graph, start, params, every, period, generation)))
}

/// Replays the layout from its start state, one frame every `every` steps,
/// then sends `{"converged": ..}` and closes.
async fn stream_layout(
    mut socket: WebSocket,
    graph: CompoundGraph,
    start: LayoutState,
    params: LayoutParams,
    every: usize,
    period: Duration,
    generation: u64,
) {
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut sim = Some((graph, start));
    loop {
        ticker.tick().await;
        let (graph, st) = sim.take().expect("simulation state present");
        let frame = serde_json::to_string(&st.to_json(&graph)).expect("frame serializes");
        if socket.send(Message::Text(frame.into())).await.is_err() {
            return;
        }
        if st.converged || st.iteration >= params.max_iter {
            let done = json!({ "converged": st.converged, "iteration": st.iteration, "generation": generation });
            let _ = socket.send(Message::Text(done.to_string().into())).await;
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
        let advanced = tokio::task::spawn_blocking(move || {
            let mut st = st;
            for _ in 0..every {
                if st.converged || st.iteration >= params.max_iter {
                    break;
                }
                step_in_place(&graph, &mut st, &params);
            }
            (graph, st)
        })
        .await;
        match advanced {
            Ok(next) => sim = Some(next),
            Err(_) => return,
        }
    }
}

#[derive(Deserialize)]
struct BaselineBody {
    dim: usize,
    k: usize,
    #[serde(default)]
    seed: u64,
    resample: Option<usize>,
}

async fn post_baseline(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    JsonBody(b): JsonBody<BaselineBody>,
) -> Result<Json<Value>, ApiError> {
    view(&state, &sid, move |s| s.baseline(b.dim, b.k, b.seed, b.resample)).await.map(Json)
}

async fn get_schema(Path(name): Path<String>) -> Result<Response, ApiError> {
    let stem = name.trim_end_matches(".json").trim_end_matches(".schema");
    csng::schemas::ALL
        .iter()
        .find(|(n, _)| *n == stem)
        .map(|(_, s)| ([(header::CONTENT_TYPE, "application/schema+json")], *s).into_response())
        .ok_or_else(|| ApiError {
            status: StatusCode::NOT_FOUND,
            kind: "UnknownSchema",
            message: format!("no schema named {name}"),
            details: json!({}),
        })
}
