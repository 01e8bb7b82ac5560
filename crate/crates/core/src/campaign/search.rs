use crate::array::{beamforming_gain, ArrayError};
use crate::baseband::{EvmConvention, EvmReport};
use crate::channel::ChannelMatrix;
use crate::codebook::Codebook;
use crate::protocol::SweepRecord;

/// Gains within this relative distance of the maximum count as tied.
///
/// Mathematically equal gains computed along different arithmetic paths can
/// differ in the last few bits; the tolerance keeps those ties resolving to
/// the lexicographically first pair.
pub const GAIN_TIE_RELATIVE: f64 = 1e-9;

/// EVM tie window equivalent to [`GAIN_TIE_RELATIVE`] under `convention`.
pub fn evm_tie_db(convention: EvmConvention) -> f64 {
    convention.factor() * GAIN_TIE_RELATIVE.ln_1p() / std::f64::consts::LN_10
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_tx_index: usize,
    pub best_rx_index: usize,
    /// `gain_grid[tx][rx] = |w_rx^H H f_tx|`.
    pub gain_grid: Vec<Vec<f64>>,
}

/// Exhaustive `argmax |w^H H f|` over every precoder/combiner pair.
pub fn oracle_search(
    precoders: &Codebook,
    combiners: &Codebook,
    channel: &ChannelMatrix,
) -> Result<OracleResult, ArrayError> {
    let gain_grid = precoders
        .entries()
        .iter()
        .map(|f| {
            combiners
                .entries()
                .iter()
                .map(|w| beamforming_gain(w, channel, f))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (best_tx_index, best_rx_index) = argmax_gain(&gain_grid);
    Ok(OracleResult {
        best_tx_index,
        best_rx_index,
        gain_grid,
    })
}

/// First (tx, rx) whose gain is within [`GAIN_TIE_RELATIVE`] of the maximum.
pub fn argmax_gain(grid: &[Vec<f64>]) -> (usize, usize) {
    let max = grid
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = max - max.abs() * GAIN_TIE_RELATIVE;
    first_where(grid, |g| g >= threshold)
}

/// First (tx, rx) whose EVM is within the tie window of the minimum.
pub fn argmin_evm(record: &SweepRecord, convention: EvmConvention) -> (usize, usize) {
    let min = record
        .iter()
        .map(|(_, _, r)| r.evm_db)
        .fold(f64::INFINITY, f64::min);
    let threshold = min + evm_tie_db(convention);
    record
        .iter()
        .find(|(_, _, r)| r.evm_db <= threshold)
        .map(|(t, r, _)| (t, r))
        .unwrap_or((0, 0))
}

fn first_where(grid: &[Vec<f64>], pred: impl Fn(f64) -> bool) -> (usize, usize) {
    for (t, row) in grid.iter().enumerate() {
        if let Some(r) = row.iter().position(|&g| pred(g)) {
            return (t, r);
        }
    }
    (0, 0)
}

/// One completed sweep and the pair it selected.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub evm_grid: SweepRecord,
    pub best_tx_index: usize,
    pub best_rx_index: usize,
    pub gain_grid: Option<Vec<Vec<f64>>>,
}

impl SweepResult {
    pub fn from_record(
        evm_grid: SweepRecord,
        convention: EvmConvention,
        gain_grid: Option<Vec<Vec<f64>>>,
    ) -> Self {
        let (best_tx_index, best_rx_index) = argmin_evm(&evm_grid, convention);
        Self {
            evm_grid,
            best_tx_index,
            best_rx_index,
            gain_grid,
        }
    }

    pub fn best(&self) -> &EvmReport {
        self.evm_grid
            .get(self.best_tx_index, self.best_rx_index)
            .expect("best pair lies inside the grid")
    }
}
