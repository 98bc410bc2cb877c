//! HTTP conduct service. Each trial is an append-only JSON-lines file: a
//! header line followed by one line per cohort. Startup replays every file.

mod api;
mod store;

pub use api::{
    CohortRequest, CohortResponse, CreateTrialRequest, CreateTrialResponse, DesignRequest,
    EstimatorConfig, EventsResponse, FieldError, SelectionMethod, SelectionResponse, TrialView,
};
pub use store::{SessionHeader, Store};

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

pub const SCHEMA_VERSION: u32 = 1;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/trials", post(api::create_trial))
        .route("/trials/{id}", get(api::get_trial))
        .route("/trials/{id}/cohorts", post(api::post_cohort))
        .route("/trials/{id}/selection", get(api::get_selection))
        .route("/trials/{id}/events", get(api::get_events))
        .with_state(store)
}

/// Opens the data directory and serves until interrupted.
pub async fn serve(addr: SocketAddr, data_dir: PathBuf) -> std::io::Result<()> {
    let store = Arc::new(Store::open(data_dir)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
