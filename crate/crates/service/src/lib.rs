//! Annotation service: hands out scatterplot tasks, scores rectangle sets
//! live against the validation split, gates submissions and issues
//! single-use completion codes for accepted models.

pub mod config;
pub mod error;
mod routes;
pub mod state;

use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use hgml_core::dataset::{balance_classes, load_csv, load_schema};
use hgml_core::polygon::Gate;
use hgml_core::rng::derive_seed;
use hgml_core::split::make_splits;
use hgml_core::store::ModelStore;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

pub use config::ServiceConfig;
pub use error::{ApiError, SetupError};
pub use state::{AppState, Settings};

/// The four API routes, plus static files from `static_dir` for everything else.
pub fn router(state: Arc<AppState>, static_dir: Option<&std::path::Path>) -> Router {
    let api = routes::api_router(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(TraceLayer::new_for_http())
}

/// Loads the dataset named in the config and builds the shared state.
pub fn state_from_config(cfg: &ServiceConfig) -> Result<AppState, SetupError> {
    let schema = load_schema(&cfg.schema)?;
    let mut ds = load_csv(&cfg.dataset, &schema, &cfg.label_column)?;
    if cfg.balance {
        ds = balance_classes(&ds, derive_seed(cfg.seed, "balance"))?;
    }
    let split = make_splits(&ds, cfg.split_sizes(ds.len()), derive_seed(cfg.seed, "split"))?;
    let settings = Settings {
        gate: Gate {
            threshold: cfg.threshold,
            min_coverage: cfg.min_coverage,
        },
        pair_pool_size: cfg.pair_pool_size,
        tasks_per_pair: cfg.tasks_per_pair,
        idle_timeout: Duration::from_secs(cfg.idle_timeout_secs),
        seed: cfg.seed,
    };
    Ok(AppState::new(ds, split, ModelStore::new(&cfg.store), settings)?)
}

/// Serves until ctrl-c, sweeping idle sessions in the background.
pub async fn serve(listener: TcpListener, state: Arc<AppState>, static_dir: Option<&std::path::Path>) -> std::io::Result<()> {
    let sweeper = {
        let state = state.clone();
        let period = (state.settings.idle_timeout / 4).max(Duration::from_secs(1));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let dropped = state.prune_idle();
                if dropped > 0 {
                    tracing::debug!(dropped, "expired idle sessions");
                }
            }
        })
    };
    let app = router(state, static_dir);
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    result
}
