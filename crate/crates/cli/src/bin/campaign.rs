use std::path::PathBuf;

use anyhow::{Context, Result};
use beamsweep::campaign::{run_campaign, Mode};
use clap::Parser;

/// Run a full sweep campaign and write one CSV.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// `protocol` runs both nodes over a transport; `direct` skips the handshake.
    #[arg(long, default_value = "protocol")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    beamsweep_cli::init_logging();
    let args = Args::parse();
    let config = beamsweep_cli::load_config(&args.config)?;
    let result = run_campaign(&config, args.mode)?;
    for p in &result.points {
        log::info!(
            "{} m, {} dBm: best ({}, {}) {:.2} dB",
            p.distance_m,
            p.power_dbm,
            p.sweep.best_tx_index,
            p.sweep.best_rx_index,
            p.sweep.best().evm_db
        );
    }
    result
        .write_csv(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}
