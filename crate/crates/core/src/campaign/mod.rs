//! Full measurement campaigns: an exhaustive beam sweep at every
//! (distance, transmit power) point.
//!
//! In [`Mode::Direct`] the sweep grid is evaluated in-process. In
//! [`Mode::Protocol`] a transmitter and a receiver node run on separate
//! threads and negotiate the sweep over a datagram transport, exactly as two
//! physical nodes would. Both modes measure each pair with the same
//! [`PointSimulator`] and the same per-pair seeds, so they produce identical
//! grids.

mod config;
mod search;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::thread;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{CampaignConfig, ConfigError, NoiseMode, TransportKind};
pub use search::{
    argmax_gain, argmin_evm, evm_tie_db, oracle_search, OracleResult, SweepResult,
    GAIN_TIE_RELATIVE,
};

use crate::array::{link_coefficient, ArrayError};
use crate::baseband::{
    apply_link, evm_of, noise_sequence, transmit_power_to_amplitude, BasebandError, EvmConvention,
    EvmReport, Noise, SymbolStream,
};
use crate::channel::{build_channel, ChannelError, ChannelMatrix, ChannelParams};
use crate::codebook::{Codebook, CodebookError};
use crate::protocol::{
    memory_link, run_receiver, run_transmitter, ProtocolConfig, ProtocolError, SweepRecord,
    Transport, UdpTransport,
};

/// Header of every campaign CSV.
pub const CSV_HEADER: &str = "distance_m,power_dbm,tx_idx,rx_idx,e_error,e_ref,evm_db,is_best";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Protocol,
    Direct,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "protocol" => Ok(Self::Protocol),
            "direct" => Ok(Self::Direct),
            other => Err(format!("unknown mode {other:?} (protocol|direct)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Baseband(#[from] BasebandError),
    #[error("sweep at {distance_m} m, {power_dbm} dBm failed: {source}")]
    Protocol {
        distance_m: f64,
        power_dbm: f64,
        source: ProtocolError,
    },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

const TAG_CHANNEL: u64 = 1;
const TAG_REFERENCE: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_LINK: u64 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of a seed path; the same parts always give the same seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Everything needed to measure any beam pair at one campaign point.
pub struct PointSimulator<'a> {
    precoders: &'a Codebook,
    combiners: &'a Codebook,
    channel: ChannelMatrix,
    reference: SymbolStream,
    noise: Noise,
    convention: EvmConvention,
    seed_path: [u64; 3],
    frozen: Option<Vec<Complex64>>,
}

impl<'a> PointSimulator<'a> {
    pub fn new(
        config: &CampaignConfig,
        precoders: &'a Codebook,
        combiners: &'a Codebook,
        distance_index: usize,
        power_index: usize,
    ) -> Result<Self, CampaignError> {
        let geometry = config.geometry()?;
        if precoders.geometry().num_elements() != geometry.num_elements()
            || combiners.geometry().num_elements() != geometry.num_elements()
        {
            return Err(CampaignError::Mismatch(format!(
                "codebooks have {} / {} elements but the arrays have {}",
                precoders.geometry().num_elements(),
                combiners.geometry().num_elements(),
                geometry.num_elements()
            )));
        }
        let distance_m = *config
            .distances_m
            .get(distance_index)
            .ok_or_else(|| CampaignError::Mismatch(format!("no distance #{distance_index}")))?;
        let power_dbm = *config
            .power_levels_dbm
            .get(power_index)
            .ok_or_else(|| CampaignError::Mismatch(format!("no power #{power_index}")))?;
        let (di, pi) = (distance_index as u64, power_index as u64);
        let channel = build_channel(&ChannelParams {
            room: config.room,
            tx_rx_distance_m: distance_m,
            carrier_hz: config.carrier_hz,
            reflection_loss_db: config.reflection_loss_db,
            max_bounces: config.max_bounces,
            seed: derive_seed(&[TAG_CHANNEL, config.seed, di]),
            tx_array: *precoders.geometry(),
            rx_array: *combiners.geometry(),
        })?;
        let mut reference = SymbolStream::bpsk(
            config.num_symbols,
            transmit_power_to_amplitude(power_dbm),
            derive_seed(&[TAG_REFERENCE, config.seed, di, pi]),
        )?;
        if config.samples_per_symbol != reference.samples_per_symbol() {
            reference = SymbolStream::new(
                reference.symbols().to_vec(),
                config.samples_per_symbol,
                reference.amplitude(),
            )?;
        }
        let noise = config.noise();
        let seed_path = [config.seed, di, pi];
        let frozen = match noise {
            Noise::Frozen { .. } => Some(noise_sequence(
                &reference,
                noise,
                derive_seed(&[TAG_NOISE, config.seed, di, pi]),
            )),
            _ => None,
        };
        Ok(Self {
            precoders,
            combiners,
            channel,
            reference,
            noise,
            convention: config.evm_log_base,
            seed_path,
            frozen,
        })
    }

    pub fn channel(&self) -> &ChannelMatrix {
        &self.channel
    }

    pub fn reference(&self) -> &SymbolStream {
        &self.reference
    }

    /// Seed for pair `(tx, rx)` at this point.
    pub fn pair_seed(&self, tx_index: usize, rx_index: usize) -> u64 {
        let [seed, di, pi] = self.seed_path;
        derive_seed(&[TAG_NOISE, seed, di, pi, tx_index as u64, rx_index as u64])
    }

    /// Simulate the link for one pair and measure its EVM.
    pub fn measure(&self, tx_index: usize, rx_index: usize) -> Result<EvmReport, CampaignError> {
        let f = &self.precoders.entries()[tx_index];
        let w = &self.combiners.entries()[rx_index];
        let coefficient = link_coefficient(w, &self.channel, f)?;
        let received = match &self.frozen {
            Some(noise) => apply_link(&self.reference, coefficient, noise)?,
            None => {
                let noise = noise_sequence(
                    &self.reference,
                    self.noise,
                    self.pair_seed(tx_index, rx_index),
                );
                apply_link(&self.reference, coefficient, &noise)?
            }
        };
        Ok(evm_of(
            received.symbols(),
            self.reference.symbols(),
            self.convention,
        )?)
    }

    /// The whole grid, evaluated in parallel.
    pub fn measure_grid(&self) -> Result<SweepRecord, CampaignError> {
        let mut record = SweepRecord::new(self.combiners.len());
        for t in 0..self.precoders.len() {
            let row = (0..self.combiners.len())
                .into_par_iter()
                .map(|r| self.measure(t, r))
                .collect::<Result<Vec<_>, _>>()?;
            record.push_epoch(row);
        }
        Ok(record)
    }

    pub fn oracle(&self) -> Result<OracleResult, ArrayError> {
        oracle_search(self.precoders, self.combiners, &self.channel)
    }
}

/// Run one protocol-mode sweep over a pair of connected transports.
///
/// The transmitter gets `tx_end` and runs on its own thread; the receiver
/// measures with `sim`.
pub fn run_protocol_sweep<A, B>(
    sim: &PointSimulator<'_>,
    protocol: &ProtocolConfig,
    tx_end: A,
    mut rx_end: B,
) -> Result<SweepRecord, ProtocolError>
where
    A: Transport,
    B: Transport,
{
    // Dimensions were checked when the simulator was built.
    let measure = |t: usize, r: usize| sim.measure(t, r).expect("validated link dimensions");
    thread::scope(|s| {
        let tx = s.spawn(move || {
            let mut tx_end = tx_end;
            run_transmitter(sim.precoders, &mut tx_end, protocol, |index, _| {
                log::debug!("transmitter programmed codeword {index}");
            })
        });
        let rx = run_receiver(sim.combiners, &mut rx_end, protocol, measure);
        // Closing our end lets a lingering transmitter finish.
        drop(rx_end);
        let tx = tx.join().expect("transmitter thread panicked");
        let rx = rx?;
        tx?;
        Ok(rx.record)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub distance_m: f64,
    pub power_dbm: f64,
    pub sweep: SweepResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub points: Vec<PointResult>,
}

impl CampaignResult {
    /// Grid rows (`is_best = 0`) followed by one summary row (`is_best = 1`)
    /// per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let mut row = |t: usize, r: usize, rep: &EvmReport, best: u8| {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    p.distance_m, p.power_dbm, t, r, rep.e_error, rep.e_ref, rep.evm_db, best
                )
                .unwrap();
            };
            for (t, r, rep) in p.sweep.evm_grid.iter() {
                row(t, r, rep, 0);
            }
            row(
                p.sweep.best_tx_index,
                p.sweep.best_rx_index,
                p.sweep.best(),
                1,
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.to_csv())
    }
}

/// Evaluate one campaign point in the given mode.
pub fn run_point(
    config: &CampaignConfig,
    precoders: &Codebook,
    combiners: &Codebook,
    distance_index: usize,
    power_index: usize,
    mode: Mode,
) -> Result<PointResult, CampaignError> {
    let distance_m = config.distances_m[distance_index];
    let power_dbm = config.power_levels_dbm[power_index];
    let sim = PointSimulator::new(config, precoders, combiners, distance_index, power_index)?;
    let record = match mode {
        Mode::Direct => sim.measure_grid()?,
        Mode::Protocol => {
            let protocol = config.protocol();
            let wrap = |source| CampaignError::Protocol {
                distance_m,
                power_dbm,
                source,
            };
            match config.transport {
                TransportKind::Memory => {
                    let seed = derive_seed(&[
                        TAG_LINK,
                        config.seed,
                        distance_index as u64,
                        power_index as u64,
                    ]);
                    let (a, b) = memory_link(config.link_conditions(seed));
                    run_protocol_sweep(&sim, &protocol, a, b).map_err(wrap)?
                }
                TransportKind::Udp => {
                    let (a, b) = UdpTransport::loopback_pair()?;
                    run_protocol_sweep(&sim, &protocol, a, b).map_err(wrap)?
                }
            }
        }
    };
    let oracle = sim.oracle()?;
    log::info!(
        "{distance_m} m, {power_dbm} dBm: oracle pair ({}, {})",
        oracle.best_tx_index,
        oracle.best_rx_index
    );
    Ok(PointResult {
        distance_m,
        power_dbm,
        sweep: SweepResult::from_record(record, config.evm_log_base, Some(oracle.gain_grid)),
    })
}

/// Sweep every (distance, power) point in order.
pub fn run_campaign(config: &CampaignConfig, mode: Mode) -> Result<CampaignResult, CampaignError> {
    config.validate()?;
    let precoders = config.tx_codebook()?;
    let combiners = config.rx_codebook()?;
    let mut points = Vec::new();
    for di in 0..config.distances_m.len() {
        for pi in 0..config.power_levels_dbm.len() {
            points.push(run_point(config, &precoders, &combiners, di, pi, mode)?);
        }
    }
    Ok(CampaignResult { points })
}
