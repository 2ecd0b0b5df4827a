//! Local HTTP/JSON service: documents, heat maps, searches and editable
//! result sessions.

mod api;
pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, patch, post};
use axum::Router;
use dupviper::distance::{DistanceCache, DEFAULT_CACHE_CAPACITY};
use tokio::net::TcpListener;

pub use error::ApiError;
pub use session::Session;
pub use store::DocumentStore;

pub const DEFAULT_MAX_UPLOAD: usize = 10 * 1024 * 1024;
pub const DEFAULT_SYNC_THRESHOLD: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Holds `documents/` and `sessions/`.
    pub data_dir: PathBuf,
    pub max_upload: usize,
    /// Searches that take longer answer 202 with a poll token.
    pub sync_threshold: Duration,
    pub cache_capacity: usize,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            max_upload: DEFAULT_MAX_UPLOAD,
            sync_threshold: DEFAULT_SYNC_THRESHOLD,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }

    fn sessions_dir(&self) -> PathBuf {
        self.data_dir.join("sessions")
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub store: DocumentStore,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    cache: Arc<DistanceCache>,
}

impl AppState {
    /// Loads stored documents and replays session journals.
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ApiError> {
        let store = DocumentStore::open(&config.data_dir.join("documents"))?;
        let sessions = session::replay_all(&config.sessions_dir())?
            .into_iter()
            .map(|s| (s.id.clone(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(Arc::new(AppState {
            cache: Arc::new(DistanceCache::new(config.cache_capacity)),
            config,
            store,
            sessions: RwLock::new(sessions),
        }))
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("session {id}")))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    fn create_session(&self, doc_id: &str) -> Result<String, ApiError> {
        self.store.require(doc_id)?;
        let mut sessions = self.sessions.write().unwrap();
        let id = loop {
            let id = format!("{:016x}", rand::random::<u64>());
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let journal = self.config.sessions_dir().join(format!("{id}.jsonl"));
        let s = Session::create(id.clone(), doc_id.to_string(), Some(journal))?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(s)));
        Ok(id)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_upload;
    Router::new()
        .route("/health", get(api::health))
        .route("/documents", post(api::upload))
        .route("/documents/{id}", get(api::document))
        .route("/documents/{id}/heatmap", get(api::heatmap))
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}", get(api::session_view))
        .route("/sessions/{id}/search", post(api::start_search))
        .route("/sessions/{id}/search/{token}", get(api::poll_search))
        .route("/sessions/{id}/results/{n}", patch(api::edit_result))
        .route("/sessions/{id}/groups", post(api::save_group))
        .route("/sessions/{id}/export", get(api::export))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves until ctrl-c or SIGTERM.
pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
