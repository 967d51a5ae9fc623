//! Review service: flagged cases, explanation documents and rendered
//! trajectories over HTTP, plus a durable log of reviewer verdicts.
//!
//! Cases and verdicts live in two append-only JSONL files in the data
//! directory. The in-memory index is rebuilt from them at startup, and a
//! verdict is fsynced before the request is acknowledged.

pub mod api;
pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, AppState, Frame, FramesView, API_VERSION, TOKEN_HEADER};
pub use store::{
    case_id, Agreement, CaseFilter, CaseRecord, CaseStatus, CaseStore, CaseSummary, CaseView, Decision,
    EliminationEntry, ReviewVerdict, ServiceError, VerdictSubmission, AUDIT_FILE, CASES_FILE,
};

#[derive(Clone, Debug, Default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Predict output to register cases from.
    pub verdicts: Option<PathBuf>,
    pub explanations: Option<PathBuf>,
    /// Dashboard bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    pub token: Option<String>,
}

pub fn build_app(config: &ServiceConfig) -> Result<axum::Router, ServiceError> {
    let store = CaseStore::open(&config.data_dir, config.verdicts.as_deref(), config.explanations.as_deref())?;
    let state = AppState {
        store: Arc::new(store),
        token: config.token.clone(),
    };
    Ok(router(state, config.static_dir.clone()))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: axum::Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
