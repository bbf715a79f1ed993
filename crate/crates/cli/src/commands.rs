use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{NaiveDate, Utc};
use foodwise_core::config::AppConfig;
use foodwise_core::ingest::{generate_synthetic_day, to_batch_json};
use foodwise_core::{DailyAggregate, SyntheticProfile};
use foodwise_service::{build_state, router, scheduler};
use thiserror::Error;

use crate::simulate::{self, SimulationReport, SimulationSpec};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("bad config {path}: {message}")]
    BadConfig { path: String, message: String },
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| PathBuf::from("."))
}

/// Loads the config file and applies environment overrides.
pub fn load_config(path: &Path, env: impl Fn(&str) -> Option<String>) -> Result<AppConfig> {
    let bad = |message: String| CommandError::BadConfig { path: path.display().to_string(), message };
    let mut config = AppConfig::load(path).map_err(|e| bad(e.to_string()))?;
    config.apply_env(env).map_err(|e| bad(e.to_string()))?;
    Ok(config)
}

fn write_output(out: &str, contents: &str) -> Result<()> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(contents.as_bytes())?;
        stdout.write_all(b"\n")?;
    } else {
        std::fs::write(out, contents).with_context(|| format!("writing {out}"))?;
    }
    Ok(())
}

pub fn load_profile(path: Option<&Path>) -> Result<SyntheticProfile> {
    let Some(path) = path else {
        return Ok(SyntheticProfile::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
    let profile: SyntheticProfile = toml::from_str(&text).with_context(|| format!("parsing profile {}", path.display()))?;
    profile.validate()?;
    Ok(profile)
}

pub fn gen_trays(seed: u64, date: NaiveDate, profile: Option<&Path>, out: &str) -> Result<usize> {
    let profile = load_profile(profile)?;
    let trays = generate_synthetic_day(seed, date, &profile)?;
    write_output(out, &to_batch_json(&trays))?;
    Ok(trays.len())
}

/// Runs the daily job for `date` against the configured storage.
pub fn aggregate(config_path: &Path, date: NaiveDate, env: impl Fn(&str) -> Option<String>) -> Result<DailyAggregate> {
    let config = load_config(config_path, env)?;
    let state = build_state(config, &base_dir(config_path))?;
    Ok(state.job.run(date, Utc::now())?)
}

pub async fn simulate(spec_path: &Path, out: &str) -> Result<SimulationReport> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading spec {}", spec_path.display()))?;
    let spec = SimulationSpec::from_toml(&text)?;
    let outcome = simulate::run(&spec).await?;
    write_output(out, &serde_json::to_string_pretty(&outcome.report)?)?;
    Ok(outcome.report)
}

/// Binds the listener; separate from [`serve`] so callers learn about a taken port before
/// anything else starts.
pub async fn bind(port: u16) -> Result<tokio::net::TcpListener> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => CommandError::PortInUse(port).into(),
        _ => anyhow::Error::new(e).context(format!("binding port {port}")),
    })
}

pub async fn serve(config_path: &Path, port: Option<u16>, env: impl Fn(&str) -> Option<String>) -> Result<()> {
    let mut config = load_config(config_path, env)?;
    if let Some(port) = port {
        config.server.port = port;
    }
    let port = config.server.port;
    let scheduler_enabled = config.scheduler.enabled;
    let state = build_state(config, &base_dir(config_path))?;
    let listener = bind(port).await?;
    if scheduler_enabled {
        tokio::spawn(scheduler::run(state.clone()));
    }
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
