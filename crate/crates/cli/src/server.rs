//! HTTP service over a shared session.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crosscut::api::{self, ApiError, ApiResult, TreeQuery};
use crosscut::session::Session;
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast;

/// Session shared between request handlers and the file watcher.
#[derive(Clone)]
pub struct AppState {
    session: Arc<Mutex<Session>>,
    events: broadcast::Sender<Value>,
}

impl AppState {
    pub fn new(session: Session) -> Self {
        let (events, _) = broadcast::channel(64);
        AppState {
            session: Arc::new(Mutex::new(session)),
            events,
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Value> {
        self.events.subscribe()
    }

    /// Sends a message to every event-stream client.
    pub fn publish(&self, message: Value) {
        let _ = self.events.send(message);
    }

    /// Reloads sources and pushes the outcome to subscribers.
    pub fn reload(&self) -> Result<Vec<String>, ApiError> {
        let result = self.lock().notify_change(None).map_err(ApiError::from);
        match &result {
            Ok(ids) => self.publish(api::runs_updated(ids)),
            Err(e) => self.publish(json!({ "type": "error", "error": e })),
        }
        result
    }
}

struct Reply(ApiResult);

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        match self.0 {
            Ok(v) => Json(v).into_response(),
            Err(e) => {
                let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::BAD_REQUEST);
                (status, Json(e.to_json())).into_response()
            }
        }
    }
}

/// Runs `f` off the async workers with the session locked.
async fn with_session<F>(state: AppState, f: F) -> Reply
where
    F: FnOnce(&mut Session) -> ApiResult + Send + 'static,
{
    let result = tokio::task::spawn_blocking(move || f(&mut state.lock()))
        .await
        .unwrap_or_else(|e| Err(ApiError::new("internal", e.to_string())));
    Reply(result)
}

type Params = Query<HashMap<String, String>>;

fn invalid(param: &str, message: String) -> ApiError {
    ApiError::new("invalid-parameter", message).with_detail(json!({ "parameter": param }))
}

fn parse_opt<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    params
        .get(key)
        .map(|raw| raw.parse().map_err(|_| invalid(key, format!("invalid value `{raw}` for `{key}`"))))
        .transpose()
}

fn required<'a>(params: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    params
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| invalid(key, format!("missing query parameter `{key}`")))
}

fn parse_seq(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| invalid("seq", format!("invalid seq `{raw}`")))
}

async fn examples(State(state): State<AppState>) -> Reply {
    with_session(state, |s| Ok(api::list_examples(s))).await
}

#[derive(Deserialize)]
struct ActiveBody {
    active: bool,
}

async fn set_active(State(state): State<AppState>, Path(id): Path<String>, body: Option<Json<ActiveBody>>) -> Reply {
    let Some(Json(body)) = body else {
        return Reply(Err(invalid("active", "expected a JSON body {\"active\": bool}".into())));
    };
    let events = state.clone();
    let reply = with_session(state, move |s| api::set_example_active(s, &id, body.active)).await;
    if let Ok(v) = &reply.0 {
        let ids: Vec<String> = v["run_id"].as_str().map(String::from).into_iter().collect();
        events.publish(api::runs_updated(&ids));
    }
    reply
}

async fn run(State(state): State<AppState>, Path(id): Path<String>) -> Reply {
    let events = state.clone();
    let reply = with_session(state, move |s| api::run_example(s, &id)).await;
    if let Ok(v) = &reply.0 {
        events.publish(api::runs_updated(&[v["run_id"].as_str().unwrap_or_default().to_string()]));
    }
    reply
}

#[derive(Deserialize)]
struct ScopeBody {
    modules: Vec<String>,
}

async fn scope(State(state): State<AppState>, body: Option<Json<ScopeBody>>) -> Reply {
    let Some(Json(body)) = body else {
        return Reply(Err(invalid("modules", "expected a JSON body {\"modules\": [..]}".into())));
    };
    let events = state.clone();
    let reply = with_session(state, move |s| api::set_scope(s, &body.modules)).await;
    if let Ok(v) = &reply.0 {
        let ids: Vec<String> = serde_json::from_value(v["run_ids"].clone()).unwrap_or_default();
        events.publish(api::runs_updated(&ids));
    }
    reply
}

async fn tree(State(state): State<AppState>, Path(run): Path<String>, Query(p): Params) -> Reply {
    with_session(state, move |s| {
        let query = TreeQuery {
            depth: parse_opt(&p, "depth")?,
            children_of: parse_opt(&p, "children-of")?,
            filter: p.get("filter").cloned(),
        };
        api::tree(s, &run, &query)
    })
    .await
}

async fn procedures(State(state): State<AppState>, Path(run): Path<String>) -> Reply {
    with_session(state, move |s| api::procedures(s, &run)).await
}

async fn annotations(State(state): State<AppState>, Path(run): Path<String>) -> Reply {
    with_session(state, move |s| api::annotations(s, &run)).await
}

async fn paths(State(state): State<AppState>, Path(run): Path<String>, Query(p): Params) -> Reply {
    with_session(state, move |s| {
        let target = required(&p, "target")?;
        let mode = p.get("mode").map(String::as_str).unwrap_or("summarized");
        api::paths(s, &run, target, mode)
    })
    .await
}

async fn probe_values(State(state): State<AppState>, Path((run, probe)): Path<(String, String)>) -> Reply {
    with_session(state, move |s| api::probe_values(s, &run, &probe)).await
}

async fn probe_log(State(state): State<AppState>, Path(run): Path<String>) -> Reply {
    with_session(state, move |s| api::probe_log(s, &run)).await
}

async fn succession(State(state): State<AppState>, Path((run, seq)): Path<(String, String)>) -> Reply {
    with_session(state, move |s| api::succession(s, &run, parse_seq(&seq)?)).await
}

async fn callees(State(state): State<AppState>, Path((run, seq)): Path<(String, String)>) -> Reply {
    with_session(state, move |s| api::callees(s, &run, parse_seq(&seq)?)).await
}

async fn find(State(state): State<AppState>, Path(run): Path<String>, Query(p): Params) -> Reply {
    with_session(state, move |s| {
        let method = required(&p, "method")?;
        api::find(s, &run, method, parse_opt(&p, "from")?, p.get("dir").map(String::as_str))
    })
    .await
}

async fn source(State(state): State<AppState>, Path(module): Path<String>) -> Reply {
    with_session(state, move |s| api::source(s, &module)).await
}

async fn events(State(state): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(msg) => {
                    let kind = msg["type"].as_str().unwrap_or("message").to_string();
                    let event = Event::default().event(kind).data(msg.to_string());
                    return Some((Ok(event), rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn not_found() -> Reply {
    Reply(Err(ApiError::new("not-found", "no such endpoint")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/examples", get(examples))
        .route("/examples/{id}/active", post(set_active))
        .route("/run/{id}", post(run))
        .route("/runs/{run}/tree", get(tree))
        .route("/runs/{run}/procedures", get(procedures))
        .route("/runs/{run}/annotations", get(annotations))
        .route("/runs/{run}/paths", get(paths))
        .route("/runs/{run}/probe/{id}/values", get(probe_values))
        .route("/runs/{run}/probe-log", get(probe_log))
        .route("/runs/{run}/node/{seq}/succession", get(succession))
        .route("/runs/{run}/node/{seq}/callees", get(callees))
        .route("/runs/{run}/find", get(find))
        .route("/source/{*module}", get(source))
        .route("/scope", post(scope))
        .route("/events", get(events))
        .fallback(not_found)
        .with_state(state)
}

/// Binds `port` on localhost and serves until the process ends.
pub async fn serve(state: AppState, port: u16) -> Result<(), ApiError> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(|e| {
        let code = if e.kind() == std::io::ErrorKind::AddrInUse { "port-in-use" } else { "io-error" };
        ApiError::new(code, format!("cannot listen on port {port}: {e}"))
    })?;
    if let Ok(addr) = listener.local_addr() {
        eprintln!("listening on http://{addr}");
    }
    axum::serve(listener, router(state))
        .await
        .map_err(|e| ApiError::new("io-error", e.to_string()))
}
