use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use beamsweep::codebook::Codebook;
use beamsweep::protocol::{run_transmitter, UdpTransport};
use clap::Parser;

/// Transmitter node: steps through its codebook at the receiver's request.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Precoder codebook file.
    #[arg(long)]
    codebook: PathBuf,
    /// Local UDP address.
    #[arg(long)]
    bind: SocketAddr,
    /// Receiver node's UDP address.
    #[arg(long)]
    peer: SocketAddr,
    /// Campaign config (protocol timing keys are used).
    #[arg(long)]
    config: PathBuf,
}

fn main() -> Result<()> {
    beamsweep_cli::init_logging();
    let args = Args::parse();
    let config = beamsweep_cli::load_config(&args.config)?;
    let codebook = Codebook::load(&args.codebook)
        .with_context(|| format!("reading codebook {}", args.codebook.display()))?;
    let mut transport = UdpTransport::bind(args.bind, args.peer)
        .with_context(|| format!("binding {}", args.bind))?;
    log::info!(
        "transmitter on {} with {} codewords",
        args.bind,
        codebook.len()
    );
    let log = run_transmitter(
        &codebook,
        &mut transport,
        &config.protocol(),
        |index, weights| {
            log::info!("programming codeword {index}: {:?}", weights.phases());
        },
    )?;
    log::info!("sweep finished, {} retransmissions", log.retransmissions());
    Ok(())
}
