//! HTTP API over the conversational engine with per-session persistence.

mod store;

use std::collections::HashMap;
use std::sync::{Arc, Mutex as StdMutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ca_core::boosters::{BoosterError, HandoffSummary};
use ca_core::dialog::{DialogState, TurnRecord};
use ca_core::engine::{Engine, EngineError, TurnDebug};
use ca_core::project::Violation;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use store::{parse_events, replay, Replayed, SessionEvent, SessionStore, StoreError};

pub const DEFAULT_PORT: u16 = 8710;

#[derive(Debug, Clone, Default, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub locale: Option<String>,
    #[serde(default)]
    pub persona: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessageResponse {
    pub replies: Vec<String>,
    pub debug: TurnDebug,
}

/// API error with its status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    detail: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            detail: None,
        }
    }

    fn detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown session {id}"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(d) = self.detail {
            body["detail"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

struct Session {
    state: DialogState,
    handoff: Option<HandoffSummary>,
}

type Slot = Arc<Mutex<Session>>;

/// Shared service state. Built either around a ready engine or, when the
/// project failed validation, in a degraded mode that answers 503.
pub struct ChatService {
    engine: Result<Arc<Engine>, Vec<Violation>>,
    store: SessionStore,
    sessions: StdMutex<HashMap<String, Slot>>,
}

impl ChatService {
    pub fn new(engine: Arc<Engine>, store: SessionStore) -> Self {
        Self {
            engine: Ok(engine),
            store,
            sessions: StdMutex::default(),
        }
    }

    pub fn unavailable(violations: Vec<Violation>, store: SessionStore) -> Self {
        Self {
            engine: Err(violations),
            store,
            sessions: StdMutex::default(),
        }
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    fn engine(&self) -> Result<&Arc<Engine>, ApiError> {
        self.engine.as_ref().map_err(|v| {
            ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "project failed validation")
                .detail(json!(v.iter().map(|x| x.to_string()).collect::<Vec<_>>()))
        })
    }

    /// In-memory slot for `id`, recovering it from its log when needed.
    fn session(&self, id: &str) -> Result<Slot, ApiError> {
        if let Some(slot) = self.sessions.lock().unwrap().get(id) {
            return Ok(slot.clone());
        }
        let replayed = match self.store.load(id) {
            Ok(Some(r)) => r,
            Ok(None) | Err(StoreError::InvalidId(_)) => return Err(ApiError::not_found(id)),
            Err(e) => return Err(ApiError::internal(e)),
        };
        let slot = Arc::new(Mutex::new(Session {
            state: replayed.state,
            handoff: replayed.handoff,
        }));
        let mut map = self.sessions.lock().unwrap();
        Ok(map.entry(id.to_string()).or_insert(slot).clone())
    }
}

/// Router with CORS allowing `origins` (any origin when empty).
pub fn router(service: Arc<ChatService>, origins: &[String]) -> Router {
    let allow = if origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    let cors = CorsLayer::new()
        .allow_origin(allow)
        .allow_methods(tower_http::cors::Any)
        .allow_headers(tower_http::cors::Any);
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/transcript", get(get_transcript))
        .route("/v1/sessions/{id}/handoff", post(post_handoff))
        .route("/healthz", get(|| async { "ok" }))
        .layer(cors)
        .with_state(service)
}

async fn create_session(
    State(svc): State<Arc<ChatService>>,
    body: Option<Json<CreateSession>>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let engine = svc.engine()?;
    let opts = body.map(|Json(b)| b).unwrap_or_default();
    let mut state = engine.start_session();
    state.locale = opts.locale;
    state.persona = opts.persona;
    let id = state.session_id.clone();
    svc.store
        .append(
            &id,
            &[
                SessionEvent::Created {
                    session_id: id.clone(),
                    at: state.created_at,
                },
                SessionEvent::Snapshot {
                    state: Box::new(state.clone()),
                },
            ],
        )
        .map_err(ApiError::internal)?;
    let slot = Arc::new(Mutex::new(Session {
        state,
        handoff: None,
    }));
    svc.sessions.lock().unwrap().insert(id.clone(), slot);
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id })))
}

async fn post_message(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
    body: Result<Json<MessageRequest>, JsonRejection>,
) -> Result<Json<MessageResponse>, ApiError> {
    let engine = svc.engine()?.clone();
    let slot = svc.session(&id)?;
    let Json(req) =
        body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "text is empty",
        ));
    }
    let mut session = slot.lock().await;
    if session.handoff.is_some() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session was handed off",
        ));
    }
    let mut next = session.state.clone();
    let outcome = match engine.turn(&mut next, &req.text).await {
        Ok(o) => o,
        Err(EngineError::EmptyText) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "text is empty",
            ))
        }
        Err(e) => return Err(ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())),
    };
    svc.store
        .append(
            &id,
            &[
                SessionEvent::Turn {
                    at: Utc::now(),
                    text: req.text.trim().to_string(),
                    replies: outcome.replies.clone(),
                },
                SessionEvent::Snapshot {
                    state: Box::new(next.clone()),
                },
            ],
        )
        .map_err(ApiError::internal)?;
    session.state = next;
    Ok(Json(MessageResponse {
        replies: outcome.replies,
        debug: outcome.debug,
    }))
}

async fn get_transcript(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
) -> Result<Json<Vec<TurnRecord>>, ApiError> {
    let slot = svc.session(&id)?;
    let session = slot.lock().await;
    Ok(Json(session.state.transcript.clone()))
}

async fn post_handoff(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
) -> Result<Json<HandoffSummary>, ApiError> {
    let engine = svc.engine()?.clone();
    let slot = svc.session(&id)?;
    let mut session = slot.lock().await;
    if session.handoff.is_some() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session was already handed off",
        ));
    }
    if !session.state.has_user_turn() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session has no user turn",
        ));
    }
    let (result, activation) = engine.handoff(&session.state).await;
    let summary = match result {
        Ok(s) => s,
        Err(BoosterError::EmptyTranscript) => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "session has no user turn",
            ))
        }
        Err(e) => {
            return Err(ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())
                .detail(json!({ "raw": activation.output })))
        }
    };
    svc.store
        .append(
            &id,
            &[SessionEvent::Handoff {
                at: Utc::now(),
                summary: summary.clone(),
            }],
        )
        .map_err(ApiError::internal)?;
    session.handoff = Some(summary.clone());
    Ok(Json(summary))
}
