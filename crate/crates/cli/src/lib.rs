//! Shared plumbing for the `tx-node`, `rx-node` and `campaign` binaries.

use std::path::Path;

use anyhow::{Context, Result};
use beamsweep::campaign::CampaignConfig;

/// Environment variable holding the log filter, e.g. `BEAMSWEEP_LOG=debug`.
pub const LOG_ENV: &str = "BEAMSWEEP_LOG";

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp_millis()
        .init();
}

pub fn load_config(path: &Path) -> Result<CampaignConfig> {
    let config =
        CampaignConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    config.validate().context("invalid config")?;
    Ok(config)
}
