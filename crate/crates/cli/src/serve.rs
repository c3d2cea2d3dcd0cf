//! HTTP API over a file store.
//!
//! Store layout: `personas/<id>.json`, `sessions/<id>/record.jsonl` and
//! `sessions/<id>/reports/`. Relative paths inside posted session configs
//! resolve against the store root.

use std::collections::{HashMap, HashSet};
use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream, StreamExt};
use sandbox_core::llm::{HttpLlmClient, LlmConfig};
use sandbox_core::persona::{generate_persona, validate_persona, GeneratorKind, Persona, PersonaError, PersonaRequest};
use sandbox_core::session::record::read_complete_lines;
use sandbox_core::session::{
    connect_agent, run_session, session_dir, EventKind, SessionConfig, SessionControl, SessionError, RECORD_FILE,
    EMBEDDED_AGENT,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::CliError;

const POLL: Duration = Duration::from_millis(25);

#[derive(Debug, Clone)]
enum RunState {
    Running,
    Finished,
    Failed(String),
}

struct Live {
    control: SessionControl,
    agent: String,
    state: RunState,
}

pub struct AppState {
    store: PathBuf,
    llm: Option<LlmConfig>,
    live: Mutex<HashMap<String, Live>>,
}

type Shared = Arc<AppState>;

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

fn err(code: StatusCode, msg: impl Into<String>) -> ApiError {
    ApiError(code, msg.into())
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    err(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

impl AppState {
    pub fn new(store: PathBuf, llm: Option<LlmConfig>) -> Self {
        Self { store, llm, live: Mutex::new(HashMap::new()) }
    }

    fn personas_dir(&self) -> PathBuf {
        self.store.join("personas")
    }

    fn sessions_dir(&self) -> PathBuf {
        self.store.join("sessions")
    }

    fn live_state(&self, id: &str) -> Option<RunState> {
        self.live.lock().expect("live lock").get(id).map(|l| l.state.clone())
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/personas", get(list_personas).post(create_persona))
        .route("/api/personas/{id}", get(get_persona))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/abort", post(abort_session))
        .route("/api/sessions/{id}/reports", get(session_reports))
        .route("/api/sessions/{id}/events", get(session_events))
        .with_state(state)
}

/// Binds, announces the address on stdout and serves until killed.
pub fn serve(listen: &str, store: PathBuf, llm: Option<LlmConfig>) -> Result<(), CliError> {
    std::fs::create_dir_all(store.join("personas"))?;
    std::fs::create_dir_all(store.join("sessions"))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {listen}: {e}")))?;
        let addr = listener.local_addr()?;
        println!("serving on http://{addr}");
        use std::io::Write;
        std::io::stdout().flush()?;
        let app = router(Arc::new(AppState::new(store, llm)));
        axum::serve(listener, app).await.map_err(CliError::from)
    })
}

/// Ids come from URLs; refuse anything that could leave the store.
fn safe_id(id: &str) -> Result<&str, ApiError> {
    if !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        Ok(id)
    } else {
        Err(err(StatusCode::BAD_REQUEST, format!("invalid id {id:?}")))
    }
}

async fn list_personas(State(st): State<Shared>) -> Result<Json<Value>, ApiError> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(st.personas_dir()) {
        let mut paths: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
            let Ok(persona) = Persona::load(&p) else { continue };
            let ok = validate_persona(&persona).ok;
            out.push(json!({
                "id": persona.id,
                "name": persona.name,
                "age": persona.age,
                "occupation": persona.occupation,
                "place": persona.location.place,
                "valid": ok,
            }));
        }
    }
    Ok(Json(Value::Array(out)))
}

async fn get_persona(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let path = st.personas_dir().join(format!("{}.json", safe_id(&id)?));
    match Persona::load(&path) {
        Ok(p) => Ok(([("content-type", "application/json")], p.to_canonical_json()).into_response()),
        Err(PersonaError::Io(_)) => Err(err(StatusCode::NOT_FOUND, format!("no persona {id}"))),
        Err(e) => Err(internal(e)),
    }
}

async fn create_persona(
    State(st): State<Shared>,
    Json(request): Json<PersonaRequest>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let llm = st.llm.clone();
    let dir = st.personas_dir();
    let result = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let persona = match request.generator {
            GeneratorKind::Template => generate_persona(&request, None),
            GeneratorKind::Llm => {
                let config = llm.ok_or_else(|| err(StatusCode::UNPROCESSABLE_ENTITY, "no LLM endpoint configured"))?;
                let client = HttpLlmClient::new(config).map_err(internal)?;
                generate_persona(&request, Some(&client))
            }
        }
        .map_err(|e| match e {
            PersonaError::InvalidRequest(_) | PersonaError::InvalidLifestyle(_) => {
                err(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            PersonaError::GenerationFailed { .. } => err(StatusCode::BAD_GATEWAY, e.to_string()),
            _ => internal(e),
        })?;
        persona.save(&dir.join(format!("{}.json", persona.id))).map_err(internal)?;
        let validation = validate_persona(&persona);
        Ok(json!({"persona": persona, "validation": validation}))
    })
    .await
    .map_err(internal)??;
    Ok((StatusCode::CREATED, Json(result)))
}

fn session_links(id: &str) -> Value {
    json!({
        "self": format!("/api/sessions/{id}"),
        "events": format!("/api/sessions/{id}/events"),
        "reports": format!("/api/sessions/{id}/reports"),
        "abort": format!("/api/sessions/{id}/abort"),
    })
}

fn status_code_for(e: &SessionError) -> StatusCode {
    match e {
        SessionError::AgentUnreachable { .. } | SessionError::Protocol(_) => StatusCode::BAD_GATEWAY,
        SessionError::Io(_) | SessionError::Record(_) | SessionError::Diff(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

async fn create_session(
    State(st): State<Shared>,
    body: axum::body::Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let text = std::str::from_utf8(&body).map_err(|e| err(StatusCode::BAD_REQUEST, e.to_string()))?;
    let config = SessionConfig::from_json(text).map_err(|e| err(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    config.validate().map_err(|e| err(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let id = config.session_id();
    let dir = session_dir(&st.sessions_dir(), &config);

    // Reserve the id and the agent before any slow work.
    {
        let mut live = st.live.lock().expect("live lock");
        if let Some(l) = live.get(&id) {
            if matches!(l.state, RunState::Running) {
                return Err(err(StatusCode::CONFLICT, format!("session {id} is already running")));
            }
        }
        if dir.exists() {
            return Err(err(StatusCode::CONFLICT, format!("session {id} already exists")));
        }
        if config.agent != EMBEDDED_AGENT
            && live.values().any(|l| matches!(l.state, RunState::Running) && l.agent == config.agent)
        {
            return Err(err(StatusCode::CONFLICT, format!("agent {} is busy", config.agent)));
        }
        live.insert(
            id.clone(),
            Live { control: SessionControl::default(), agent: config.agent.clone(), state: RunState::Running },
        );
    }

    let release = |st: &AppState, id: &str| {
        st.live.lock().expect("live lock").remove(id);
    };
    let store = st.store.clone();
    let cfg = config.clone();
    let prepared = tokio::task::spawn_blocking(move || -> Result<_, SessionError> {
        let trace = cfg.trace.resolve(&cfg.persona_id, cfg.seed, &store)?;
        let link = connect_agent(&cfg)?;
        Ok((trace, link))
    })
    .await
    .map_err(internal)?;
    let (trace, mut link) = match prepared {
        Ok(v) => v,
        Err(e) => {
            release(&st, &id);
            return Err(err(status_code_for(&e), e.to_string()));
        }
    };

    let control = st.live.lock().expect("live lock")[&id].control.clone();
    let worker_state = Arc::clone(&st);
    let worker_id = id.clone();
    std::thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || {
            let result = run_session(&config, &trace, link.as_mut(), &dir, &control);
            let mut live = worker_state.live.lock().expect("live lock");
            if let Some(l) = live.get_mut(&worker_id) {
                l.state = match result {
                    Ok(_) => RunState::Finished,
                    Err(e) => RunState::Failed(e.to_string()),
                };
            }
        })
        .map_err(internal)?;

    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"session_id": id, "status": "running", "links": session_links(&id)})),
    ))
}

/// Record lines parsed as JSON, in file order. Only complete lines count.
fn record_lines(path: &Path) -> Vec<Value> {
    match read_complete_lines(path, 0) {
        Ok((lines, _)) => lines.iter().filter_map(|l| serde_json::from_str(l).ok()).collect(),
        Err(_) => Vec::new(),
    }
}

fn session_view(st: &AppState, id: &str) -> Option<Value> {
    let dir = st.sessions_dir().join(id);
    let live = st.live_state(id);
    if live.is_none() && !dir.exists() {
        return None;
    }
    let lines = record_lines(&dir.join(RECORD_FILE));
    let end = lines.iter().find(|l| l["line"] == "end");
    let events: Vec<&Value> = lines.iter().filter(|l| l["line"] == "event").collect();
    let cursor = events.last().and_then(|e| e["seq"].as_u64());
    let mut view = json!({
        "session_id": id,
        "cursor": cursor,
        "events_count": events.len(),
        "links": session_links(id),
    });
    let status = match (end, live) {
        (Some(end), _) => end["status"].clone(),
        (None, Some(RunState::Failed(message))) => {
            view["error"] = Value::String(message);
            json!("failed")
        }
        (None, Some(_)) => json!("running"),
        (None, None) => json!("incomplete"),
    };
    view["status"] = status;
    view["lines"] = Value::Array(lines);
    Some(view)
}

async fn list_sessions(State(st): State<Shared>) -> Result<Json<Value>, ApiError> {
    let mut ids: HashSet<String> = st.live.lock().expect("live lock").keys().cloned().collect();
    if let Ok(rd) = std::fs::read_dir(st.sessions_dir()) {
        ids.extend(rd.filter_map(|e| e.ok()).filter_map(|e| e.file_name().into_string().ok()));
    }
    let mut ids: Vec<String> = ids.into_iter().collect();
    ids.sort();
    let out: Vec<Value> = ids
        .iter()
        .filter_map(|id| session_view(&st, id))
        .map(|v| {
            json!({
                "session_id": v["session_id"],
                "status": v["status"],
                "events_count": v["events_count"],
                "links": v["links"],
            })
        })
        .collect();
    Ok(Json(Value::Array(out)))
}

async fn get_session(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let id = safe_id(&id)?;
    session_view(&st, id).map(Json).ok_or_else(|| err(StatusCode::NOT_FOUND, format!("no session {id}")))
}

async fn abort_session(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let id = safe_id(&id)?;
    let live = st.live.lock().expect("live lock");
    match live.get(id) {
        Some(l) if matches!(l.state, RunState::Running) => {
            l.control.abort();
            Ok((StatusCode::ACCEPTED, Json(json!({"session_id": id, "status": "aborting"}))))
        }
        Some(_) => Err(err(StatusCode::CONFLICT, format!("session {id} is not running"))),
        None if st.sessions_dir().join(id).exists() => {
            Err(err(StatusCode::CONFLICT, format!("session {id} is not running")))
        }
        None => Err(err(StatusCode::NOT_FOUND, format!("no session {id}"))),
    }
}

async fn session_reports(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let id = safe_id(&id)?;
    let dir = st.sessions_dir().join(id);
    if !dir.exists() && st.live_state(id).is_none() {
        return Err(err(StatusCode::NOT_FOUND, format!("no session {id}")));
    }
    let mut out = Vec::new();
    for line in record_lines(&dir.join(RECORD_FILE)) {
        if line["line"] != "event" {
            continue;
        }
        let Ok(ev) = serde_json::from_value::<sandbox_core::session::SessionEvent>(line) else { continue };
        if let EventKind::DiffEmitted { pair, report, .. } = ev.kind {
            let text = std::fs::read_to_string(dir.join(&report)).map_err(internal)?;
            let parsed: Value = serde_json::from_str(&text).map_err(internal)?;
            out.push(json!({"file": report, "pair": pair, "report": parsed}));
        }
    }
    Ok(Json(Value::Array(out)))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    cursor: Option<u64>,
}

struct Tail {
    st: Shared,
    id: String,
    path: PathBuf,
    offset: u64,
    cursor: Option<u64>,
    done: bool,
}

impl Tail {
    /// Next batch of SSE events, waiting while the record is quiet. `None`
    /// once the end line was delivered or nothing more can arrive.
    async fn next_batch(&mut self) -> Option<Vec<Event>> {
        if self.done {
            return None;
        }
        loop {
            let settled = !matches!(self.st.live_state(&self.id), Some(RunState::Running));
            let (lines, offset) = read_complete_lines(&self.path, self.offset).unwrap_or((Vec::new(), self.offset));
            self.offset = offset;
            let mut out = Vec::new();
            for raw in lines {
                let Ok(v) = serde_json::from_str::<Value>(&raw) else { continue };
                match v["line"].as_str() {
                    Some("header") if self.cursor.is_none() => {
                        out.push(Event::default().event("header").data(raw));
                    }
                    Some("event") => {
                        let seq = v["seq"].as_u64().unwrap_or(0);
                        if self.cursor.is_none_or(|c| seq > c) {
                            out.push(Event::default().event("event").id(seq.to_string()).data(raw));
                            self.cursor = Some(seq);
                        }
                    }
                    Some("end") => {
                        out.push(Event::default().event("end").data(raw));
                        self.done = true;
                        break;
                    }
                    _ => {}
                }
            }
            if !out.is_empty() {
                return Some(out);
            }
            if settled {
                // One more read happened after the worker finished, so nothing is pending.
                self.done = true;
                if let Some(RunState::Failed(message)) = self.st.live_state(&self.id) {
                    return Some(vec![Event::default().event("error").data(json!({"error": message}).to_string())]);
                }
                return None;
            }
            tokio::time::sleep(POLL).await;
        }
    }
}

async fn session_events(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let id = safe_id(&id)?.to_string();
    let dir = st.sessions_dir().join(&id);
    if !dir.exists() && st.live_state(&id).is_none() {
        return Err(err(StatusCode::NOT_FOUND, format!("no session {id}")));
    }
    let last_event_id = headers
        .get("last-event-id")
        .and_then(|h| h.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok());
    let tail = Tail { st, id, path: dir.join(RECORD_FILE), offset: 0, cursor: q.cursor.or(last_event_id), done: false };
    let events = stream::unfold(tail, |mut t| async move { t.next_batch().await.map(|b| (stream::iter(b), t)) })
        .flatten()
        .map(Ok);
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}
