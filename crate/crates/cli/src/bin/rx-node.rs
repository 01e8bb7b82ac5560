use std::net::SocketAddr;
use std::path::PathBuf;
use std::process;

use anyhow::{Context, Result};
use beamsweep::campaign::{CampaignResult, PointResult, PointSimulator, SweepResult};
use beamsweep::codebook::Codebook;
use beamsweep::protocol::{run_receiver, UdpTransport};
use clap::Parser;

/// Receiver node: drives the sweep and records the EVM of every pair.
///
/// The link is simulated at the first distance and power of the config, with
/// the transmitter's codebook taken from the config's `tx_codebook`.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Combiner codebook file.
    #[arg(long)]
    codebook: PathBuf,
    /// Local UDP address.
    #[arg(long)]
    bind: SocketAddr,
    /// Transmitter node's UDP address.
    #[arg(long)]
    peer: SocketAddr,
    #[arg(long)]
    config: PathBuf,
    /// Where to write the sweep record as CSV.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    beamsweep_cli::init_logging();
    let args = Args::parse();
    let config = beamsweep_cli::load_config(&args.config)?;
    let combiners = Codebook::load(&args.codebook)
        .with_context(|| format!("reading codebook {}", args.codebook.display()))?;
    let precoders = config
        .tx_codebook()
        .context("loading transmitter codebook")?;
    let sim = PointSimulator::new(&config, &precoders, &combiners, 0, 0)?;
    let mut transport = UdpTransport::bind(args.bind, args.peer)
        .with_context(|| format!("binding {}", args.bind))?;
    log::info!(
        "receiver on {} with {} codewords",
        args.bind,
        combiners.len()
    );

    let session = run_receiver(&combiners, &mut transport, &config.protocol(), |t, r| {
        if t >= precoders.len() {
            eprintln!(
                "error: transmitter sent codeword {t} but the config's codebook has {}",
                precoders.len()
            );
            process::exit(1);
        }
        sim.measure(t, r).expect("codebook sizes checked")
    })?;

    let sweep = SweepResult::from_record(session.record, config.evm_log_base, None);
    log::info!(
        "best pair ({}, {}) at {:.2} dB",
        sweep.best_tx_index,
        sweep.best_rx_index,
        sweep.best().evm_db
    );
    let result = CampaignResult {
        points: vec![PointResult {
            distance_m: config.distances_m[0],
            power_dbm: config.power_levels_dbm[0],
            sweep,
        }],
    };
    result
        .write_csv(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}
