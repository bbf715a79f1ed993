//! HTTP API for the FoodWise service: accounts and sessions, meal-record submission with
//! photo upload, overview/history/badge pages, tray ingestion and the cached dashboard.

pub mod api;
pub mod auth;
pub mod clock;
pub mod error;
pub mod routes;
pub mod scheduler;
pub mod state;

use std::path::Path;

use foodwise_core::config::AppConfig;
use foodwise_core::{ConfigError, Store};

pub use clock::{Clock, ManualClock, SystemClock};
pub use error::ApiError;
pub use routes::router;
pub use state::AppState;

/// Opens storage and loads the weight model described by `config`. Relative paths
/// resolve against `base_dir` (normally the config file's directory).
pub fn build_state(config: AppConfig, base_dir: &Path) -> Result<AppState, ConfigError> {
    let model = config.estimator.load_model(base_dir)?;
    let store = match &config.storage.data_dir {
        Some(dir) => Store::open_dir(base_dir.join(dir), config.storage.max_photo_bytes)
            .map_err(|e| ConfigError::Invalid(format!("cannot open storage at {}: {e}", dir.display())))?,
        None => Store::in_memory(),
    };
    Ok(AppState::new(config, store, model))
}
