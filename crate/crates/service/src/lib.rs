//! HTTP service exposing loaded agent bundles as chat sessions.
//!
//! | method | path | |
//! |--------|------|-|
//! | GET | `/api/profiles` | profile cards, one per bundle |
//! | POST | `/api/sessions` | `{"bundle_id"}` → 201 `{"session_id"}` |
//! | POST | `/api/sessions/{id}/messages` | `{"text"}` → 202, 409 while busy |
//! | GET | `/api/sessions/{id}/events?after=N&wait_ms=M` | long-poll, or SSE with `Accept: text/event-stream` |
//! | GET | `/` | web chat assets from `PF_WEBCHAT_DIR` |

mod registry;
mod sessions;

use std::env;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::routing::{get, post};
use axum::Router;
use pf_core::generate::BundleError;
use pf_core::runtime::GenerationAdapter;
use thiserror::Error;
use tower_http::services::{ServeDir, ServeFile};

pub use registry::{BundleRegistry, LoadedBundle, ProfileCard};
pub use sessions::{AppState, CreateSession, EventsPage, PostMessage, SessionCreated};

pub const ENV_BIND_ADDR: &str = "PF_BIND_ADDR";
pub const ENV_BUNDLE_DIR: &str = "PF_BUNDLE_DIR";
pub const ENV_WEBCHAT_DIR: &str = "PF_WEBCHAT_DIR";
pub const ENV_SESSION_TTL: &str = "PF_SESSION_TTL_SECS";

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("invalid {var}: {value:?}")]
    BadConfig { var: &'static str, value: String },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind_addr: SocketAddr,
    pub bundle_dir: Option<PathBuf>,
    pub webchat_dir: Option<PathBuf>,
    pub session_ttl: Duration,
    /// Hold each reply back for its typing delay before publishing it.
    pub typing_delays: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind_addr: DEFAULT_BIND_ADDR.parse().expect("default address parses"),
            bundle_dir: None,
            webchat_dir: None,
            session_ttl: DEFAULT_SESSION_TTL,
            typing_delays: true,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ServiceError> {
        let mut config = Self::default();
        if let Ok(value) = env::var(ENV_BIND_ADDR) {
            config.bind_addr = value.parse().map_err(|_| ServiceError::BadConfig {
                var: ENV_BIND_ADDR,
                value,
            })?;
        }
        if let Ok(value) = env::var(ENV_SESSION_TTL) {
            let secs: u64 = value.parse().map_err(|_| ServiceError::BadConfig {
                var: ENV_SESSION_TTL,
                value,
            })?;
            config.session_ttl = Duration::from_secs(secs);
        }
        config.bundle_dir = env::var_os(ENV_BUNDLE_DIR).map(PathBuf::from);
        config.webchat_dir = env::var_os(ENV_WEBCHAT_DIR).map(PathBuf::from);
        Ok(config)
    }
}

const PLACEHOLDER_PAGE: &str = r#"<!doctype html>
<html lang="en">
<head><meta charset="utf-8"><title>Personalized agents</title></head>
<body>
<h1>Personalized agent service</h1>
<p>No web chat client is installed. Set <code>PF_WEBCHAT_DIR</code> to a directory containing the built client.</p>
<ul>
<li><a href="/api/profiles">GET /api/profiles</a></li>
<li>POST /api/sessions</li>
<li>POST /api/sessions/{id}/messages</li>
<li>GET /api/sessions/{id}/events?after=N</li>
</ul>
</body>
</html>
"#;

async fn placeholder() -> axum::response::Html<&'static str> {
    axum::response::Html(PLACEHOLDER_PAGE)
}

pub fn router(state: AppState) -> Router {
    let webchat_dir = state.config().webchat_dir.clone();
    let api = Router::new()
        .route("/api/profiles", get(sessions::list_profiles))
        .route("/api/sessions", post(sessions::create_session))
        .route("/api/sessions/{id}/messages", post(sessions::post_message))
        .route("/api/sessions/{id}/events", get(sessions::stream_events))
        .with_state(state);
    match webchat_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api.route("/", get(placeholder)),
    }
}

/// Loads bundles from `extra` paths and the configured bundle directory.
pub fn load_registry(
    config: &ServiceConfig,
    extra: &[PathBuf],
) -> Result<BundleRegistry, ServiceError> {
    let mut registry = BundleRegistry::new();
    for path in extra {
        registry.load_file(path)?;
    }
    if let Some(dir) = &config.bundle_dir {
        registry.load_dir(dir)?;
    }
    Ok(registry)
}

/// Serves until Ctrl-C.
pub async fn serve(
    config: ServiceConfig,
    registry: BundleRegistry,
    adapter: Arc<dyn GenerationAdapter>,
) -> Result<(), ServiceError> {
    let addr = config.bind_addr;
    let ttl = config.session_ttl;
    let state = AppState::new(config, registry, adapter);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    tracing::info!(%addr, bundles = state.registry().len(), "listening");

    let sweeper = state.clone();
    tokio::spawn(async move {
        let period = (ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let evicted = sweeper.evict_idle();
            if evicted > 0 {
                tracing::info!(evicted, "evicted idle sessions");
            }
        }
    });

    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
