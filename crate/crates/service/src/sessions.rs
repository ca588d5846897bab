use std::collections::HashMap;
use std::convert::Infallible;
use std::pin::pin;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::stream::{self, Stream};
use pf_core::runtime::{ChatSession, EventPayload, GenerationAdapter, SessionEvent};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Notify;

use crate::registry::{BundleRegistry, ProfileCard};
use crate::ServiceConfig;

const DEFAULT_WAIT_MS: u64 = 25_000;
const MAX_WAIT_MS: u64 = 60_000;

struct SessionSlot {
    session: Mutex<ChatSession>,
    /// Events visible to clients; lags the session log while a reply is
    /// being "typed".
    published: Mutex<Vec<SessionEvent>>,
    notify: Notify,
    busy: AtomicBool,
    last_active: Mutex<Instant>,
}

impl SessionSlot {
    fn touch(&self) {
        *self.last_active.lock().expect("last_active lock") = Instant::now();
    }

    fn published_after(&self, after: u64) -> Vec<SessionEvent> {
        let published = self.published.lock().expect("published lock");
        let start = published.partition_point(|e| e.sequence <= after);
        published[start..].to_vec()
    }
}

struct Inner {
    config: ServiceConfig,
    registry: BundleRegistry,
    adapter: Arc<dyn GenerationAdapter>,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(
        config: ServiceConfig,
        registry: BundleRegistry,
        adapter: Arc<dyn GenerationAdapter>,
    ) -> Self {
        Self(Arc::new(Inner {
            config,
            registry,
            adapter,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub fn registry(&self) -> &BundleRegistry {
        &self.0.registry
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().expect("sessions lock").len()
    }

    fn slot(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.0
            .sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
    }

    /// Drops sessions idle for longer than the configured TTL. Returns how
    /// many were removed.
    pub fn evict_idle(&self) -> usize {
        let ttl = self.0.config.session_ttl;
        let mut sessions = self.0.sessions.lock().expect("sessions lock");
        let before = sessions.len();
        sessions.retain(|_, slot| {
            slot.busy.load(Ordering::SeqCst)
                || slot.last_active.lock().expect("last_active lock").elapsed() <= ttl
        });
        before - sessions.len()
    }

    /// Publishes events in order, pausing after each typing indicator when
    /// typing delays are enabled.
    async fn publish(&self, slot: &SessionSlot, events: Vec<SessionEvent>) {
        for event in events {
            let delay = match event.payload {
                EventPayload::TypingStarted { delay_ms } if self.0.config.typing_delays => {
                    Some(delay_ms)
                }
                _ => None,
            };
            slot.published.lock().expect("published lock").push(event);
            slot.notify.notify_waiters();
            if let Some(ms) = delay {
                tokio::time::sleep(Duration::from_millis(ms)).await;
            }
        }
    }
}

pub(crate) struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown session '{id}'"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub(crate) async fn list_profiles(State(state): State<AppState>) -> Json<Vec<ProfileCard>> {
    Json(state.registry().cards())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub bundle_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub bundle_id: String,
}

pub(crate) async fn create_session(
    State(state): State<AppState>,
    Json(request): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let loaded = state.registry().get(&request.bundle_id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            format!("unknown bundle '{}'", request.bundle_id),
        )
    })?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let bundle = Arc::clone(&loaded.bundle);
    let adapter = Arc::clone(&state.0.adapter);
    let session_id = id.clone();
    let session = tokio::task::spawn_blocking(move || {
        ChatSession::create(session_id, bundle, adapter.as_ref())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    let initial = session.events().to_vec();
    let slot = Arc::new(SessionSlot {
        session: Mutex::new(session),
        published: Mutex::new(Vec::new()),
        notify: Notify::new(),
        busy: AtomicBool::new(true),
        last_active: Mutex::new(Instant::now()),
    });
    state
        .0
        .sessions
        .lock()
        .expect("sessions lock")
        .insert(id.clone(), Arc::clone(&slot));
    if state.config().typing_delays {
        let publisher = state.clone();
        tokio::spawn(async move {
            publisher.publish(&slot, initial).await;
            slot.busy.store(false, Ordering::SeqCst);
        });
    } else {
        state.publish(&slot, initial).await;
        slot.busy.store(false, Ordering::SeqCst);
    }
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: id,
            bundle_id: request.bundle_id,
        }),
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

pub(crate) async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(message): Json<PostMessage>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    if message.text.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "message text must not be empty",
        ));
    }
    if slot
        .busy
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_err()
    {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "the previous message is still being processed",
        ));
    }
    slot.touch();
    let worker = state.clone();
    tokio::spawn(async move {
        let adapter = Arc::clone(&worker.0.adapter);
        let stepping = Arc::clone(&slot);
        let events = tokio::task::spawn_blocking(move || {
            let mut session = stepping.session.lock().expect("session lock");
            let before = session.last_sequence();
            if let Err(err) = session.step(&message.text, adapter.as_ref()) {
                tracing::warn!(session = session.id(), %err, "step failed");
            }
            session.events_after(before).to_vec()
        })
        .await;
        match events {
            Ok(events) => worker.publish(&slot, events).await,
            Err(err) => tracing::error!(%err, "session worker panicked"),
        }
        slot.touch();
        slot.busy.store(false, Ordering::SeqCst);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub(crate) struct EventsQuery {
    after: Option<u64>,
    wait_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsPage {
    pub session_id: String,
    pub events: Vec<SessionEvent>,
    /// Sequence to pass as `after` on the next request.
    pub last_sequence: u64,
}

fn wants_sse(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/event-stream"))
}

fn last_event_id(headers: &HeaderMap) -> Option<u64> {
    headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
}

/// Waits until events after `after` are published or `wait` elapses.
async fn wait_for_events(slot: &SessionSlot, after: u64, wait: Duration) -> Vec<SessionEvent> {
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        let mut notified = pin!(slot.notify.notified());
        notified.as_mut().enable();
        let events = slot.published_after(after);
        if !events.is_empty() {
            return events;
        }
        if tokio::time::timeout_at(deadline, notified).await.is_err() {
            return Vec::new();
        }
    }
}

pub(crate) async fn stream_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    slot.touch();
    let after = query.after.or_else(|| last_event_id(&headers)).unwrap_or(0);
    if wants_sse(&headers) {
        return Ok(Sse::new(event_stream(slot, after))
            .keep_alive(KeepAlive::default())
            .into_response());
    }
    let wait = Duration::from_millis(query.wait_ms.unwrap_or(DEFAULT_WAIT_MS).min(MAX_WAIT_MS));
    let events = wait_for_events(&slot, after, wait).await;
    let last_sequence = events.last().map_or(after, |e| e.sequence);
    Ok(Json(EventsPage {
        session_id: id,
        events,
        last_sequence,
    })
    .into_response())
}

fn event_stream(
    slot: Arc<SessionSlot>,
    after: u64,
) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold(
        (slot, after, Vec::<SessionEvent>::new().into_iter()),
        |(slot, mut cursor, mut pending)| async move {
            loop {
                if let Some(event) = pending.next() {
                    cursor = event.sequence;
                    let sse = Event::default()
                        .id(event.sequence.to_string())
                        .event(event.payload.kind())
                        .json_data(&event)
                        .unwrap_or_else(|_| Event::default().comment("unserializable event"));
                    return Some((Ok(sse), (slot, cursor, pending)));
                }
                slot.touch();
                pending = wait_for_events(&slot, cursor, Duration::from_secs(30))
                    .await
                    .into_iter();
            }
        },
    )
}
