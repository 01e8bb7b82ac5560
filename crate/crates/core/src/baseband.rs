//! Reference symbol streams, the flat-fading link, and EVM.
//!
//! The link is simulated at symbol rate: received symbol `k` is
//! `(w^H H f)·tx_k + n_k`. Amplitudes are in root-watts, so a stream at
//! 30 dBm has RMS amplitude 1.
//!
//! EVM follows the logarithmic convention of the original measurements,
//! `10·log10(E_error / E_ref)` on RMS *amplitudes*; [`EvmConvention`]
//! switches to the conventional `20·log10` when needed. Before the error is
//! measured the receiver removes a single least-squares complex gain, which
//! absorbs the channel's unknown bulk phase and attenuation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::array::{link_coefficient, ArrayError, PhaseWeights};
use crate::channel::ChannelMatrix;

/// Samples per symbol of the original capture (50,000 samples for 12,500
/// symbols). Carried as metadata only.
pub const DEFAULT_SAMPLES_PER_SYMBOL: u32 = 4;

/// Symbols averaged per EVM measurement.
pub const DEFAULT_NUM_SYMBOLS: usize = 12_500;

/// Reported EVM never drops below this, so a perfect link stays finite.
pub const EVM_FLOOR_DB: f64 = -100.0;

/// Reported EVM for a link whose equalized gain is exactly zero.
pub const EVM_CEILING_DB: f64 = 100.0;

pub const DEFAULT_NOISE_POWER_DBM: f64 = -70.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasebandError {
    #[error("symbol stream is empty")]
    Empty,
    #[error("stream amplitude must be positive and finite, got {0}")]
    Amplitude(f64),
    #[error("stream lengths differ: {received} received vs {reference} reference")]
    Length { received: usize, reference: usize },
    #[error("reference stream has zero energy")]
    ZeroReference,
    #[error(transparent)]
    Array(#[from] ArrayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    symbols: Vec<Complex64>,
    samples_per_symbol: u32,
    amplitude: f64,
}

impl SymbolStream {
    pub fn new(
        symbols: Vec<Complex64>,
        samples_per_symbol: u32,
        amplitude: f64,
    ) -> Result<Self, BasebandError> {
        if symbols.is_empty() {
            return Err(BasebandError::Empty);
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(BasebandError::Amplitude(amplitude));
        }
        Ok(Self {
            symbols,
            samples_per_symbol,
            amplitude,
        })
    }

    /// Seeded random BPSK symbols at `±amplitude`.
    pub fn bpsk(num_symbols: usize, amplitude: f64, seed: u64) -> Result<Self, BasebandError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = (0..num_symbols)
            .map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                Complex64::new(sign * amplitude, 0.0)
            })
            .collect();
        Self::new(symbols, DEFAULT_SAMPLES_PER_SYMBOL, amplitude)
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn samples_per_symbol(&self) -> u32 {
        self.samples_per_symbol
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.symbols.len() * self.samples_per_symbol as usize
    }
}

/// RMS amplitude, in root-watts, of a signal at `power_dbm`.
pub fn transmit_power_to_amplitude(power_dbm: f64) -> f64 {
    10f64.powf((power_dbm - 30.0) / 10.0).sqrt()
}

/// Receiver noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// No noise: the received stream is exactly the scaled transmit stream.
    Off,
    /// Circular complex Gaussian noise of the given total power, drawn from
    /// the call's seed.
    Awgn { power_dbm: f64 },
    /// A seeded Gaussian sequence projected orthogonal to the transmitted
    /// stream and rescaled to exactly the given power. With the same seed on
    /// every beam pair the equalized EVM becomes an exact, strictly monotone
    /// function of the link gain, with no sampling jitter between pairs.
    Frozen { power_dbm: f64 },
}

/// Draw the noise sequence `noise` would add to `tx`.
pub fn noise_sequence(tx: &SymbolStream, noise: Noise, seed: u64) -> Vec<Complex64> {
    let n = tx.len();
    match noise {
        Noise::Off => vec![Complex64::new(0.0, 0.0); n],
        Noise::Awgn { power_dbm } => {
            let sigma = transmit_power_to_amplitude(power_dbm) / std::f64::consts::SQRT_2;
            gaussian(n, sigma, seed)
        }
        Noise::Frozen { power_dbm } => {
            let mut v = gaussian(n, 1.0, seed);
            let reference = tx.symbols();
            let energy: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
            let overlap: Complex64 = reference.iter().zip(&v).map(|(r, x)| r.conj() * x).sum();
            let coeff = overlap / energy;
            for (x, r) in v.iter_mut().zip(reference) {
                *x -= coeff * r;
            }
            let rms = (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64).sqrt();
            let scale = if rms > 0.0 {
                transmit_power_to_amplitude(power_dbm) / rms
            } else {
                0.0
            };
            v.iter_mut().for_each(|x| *x *= scale);
            v
        }
    }
}

fn gaussian(n: usize, sigma: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect()
}

/// `coefficient·tx_k + noise_k` for every symbol.
pub fn apply_link(
    tx: &SymbolStream,
    coefficient: Complex64,
    noise: &[Complex64],
) -> Result<SymbolStream, BasebandError> {
    if noise.len() != tx.len() {
        return Err(BasebandError::Length {
            received: noise.len(),
            reference: tx.len(),
        });
    }
    let symbols = tx
        .symbols()
        .iter()
        .zip(noise)
        .map(|(s, n)| coefficient * s + n)
        .collect();
    let amplitude = (coefficient.norm() * tx.amplitude()).max(f64::MIN_POSITIVE);
    Ok(SymbolStream {
        symbols,
        samples_per_symbol: tx.samples_per_symbol(),
        amplitude,
    })
}

/// Pass `tx` through precoder `f`, channel `h`, combiner `w`, and noise.
pub fn simulate_link(
    tx: &SymbolStream,
    f: &PhaseWeights,
    h: &ChannelMatrix,
    w: &PhaseWeights,
    noise: Noise,
    seed: u64,
) -> Result<SymbolStream, BasebandError> {
    let coefficient = link_coefficient(w, h, f)?;
    apply_link(tx, coefficient, &noise_sequence(tx, noise, seed))
}

/// Logarithm applied to the amplitude ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvmConvention {
    /// `10·log10(E_error/E_ref)`.
    #[default]
    Db10,
    /// `20·log10(E_error/E_ref)`.
    Db20,
}

impl EvmConvention {
    pub fn factor(self) -> f64 {
        match self {
            EvmConvention::Db10 => 10.0,
            EvmConvention::Db20 => 20.0,
        }
    }
}

impl std::str::FromStr for EvmConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "db10" => Ok(Self::Db10),
            "db20" => Ok(Self::Db20),
            other => Err(format!("unknown EVM convention {other:?} (db10|db20)")),
        }
    }
}

impl std::fmt::Display for EvmConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Db10 => "db10",
            Self::Db20 => "db20",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvmReport {
    pub e_error: f64,
    pub e_ref: f64,
    pub evm_db: f64,
    pub num_symbols: usize,
}

/// EVM of `received` against `reference` under the default convention.
pub fn compute_evm(
    received: &SymbolStream,
    reference: &SymbolStream,
) -> Result<EvmReport, BasebandError> {
    compute_evm_with(received, reference, EvmConvention::default())
}

pub fn compute_evm_with(
    received: &SymbolStream,
    reference: &SymbolStream,
    convention: EvmConvention,
) -> Result<EvmReport, BasebandError> {
    evm_of(received.symbols(), reference.symbols(), convention)
}

/// Neumaier-compensated sum.
fn sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut total, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = total + v;
        carry += if total.abs() >= v.abs() {
            (total - t) + v
        } else {
            (v - t) + total
        };
        total = t;
    }
    total + carry
}

/// Slice-level EVM; see [`compute_evm`].
pub fn evm_of(
    received: &[Complex64],
    reference: &[Complex64],
    convention: EvmConvention,
) -> Result<EvmReport, BasebandError> {
    if received.len() != reference.len() {
        return Err(BasebandError::Length {
            received: received.len(),
            reference: reference.len(),
        });
    }
    if reference.is_empty() {
        return Err(BasebandError::Empty);
    }
    let n = reference.len() as f64;
    let ref_energy = sum(reference.iter().map(|r| r.norm_sqr()));
    if ref_energy == 0.0 {
        return Err(BasebandError::ZeroReference);
    }
    let overlap = Complex64::new(
        sum(reference
            .iter()
            .zip(received)
            .map(|(r, y)| (r.conj() * y).re)),
        sum(reference
            .iter()
            .zip(received)
            .map(|(r, y)| (r.conj() * y).im)),
    );
    let gain = overlap / ref_energy;
    let err_energy = sum(reference
        .iter()
        .zip(received)
        .map(|(r, y)| (y - gain * r).norm_sqr()));
    let e_error = (err_energy / n).sqrt();
    let e_ref = gain.norm() * (ref_energy / n).sqrt();
    let evm_db = if e_ref == 0.0 {
        EVM_CEILING_DB
    } else if e_error == 0.0 {
        EVM_FLOOR_DB
    } else {
        convention.factor() * (e_error / e_ref).log10()
    };
    Ok(EvmReport {
        e_error,
        e_ref,
        evm_db,
        num_symbols: reference.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::PhaseWeights;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn ones_channel() -> ChannelMatrix {
        ChannelMatrix::from_entries(DMatrix::from_element(12, 12, one()))
    }

    fn alternating(n: usize, a: f64) -> SymbolStream {
        let symbols = (0..n)
            .map(|k| Complex64::new(if k % 2 == 0 { a } else { -a }, 0.0))
            .collect();
        SymbolStream::new(symbols, 4, a).unwrap()
    }

    #[test]
    fn power_to_amplitude() {
        assert_eq!(transmit_power_to_amplitude(30.0), 1.0);
        assert!((transmit_power_to_amplitude(0.0) - 0.031_622_776_601_683_79).abs() < 1e-15);
        for p in [-40.0, -3.0, 7.5, 22.0] {
            let ratio = transmit_power_to_amplitude(p + 20.0) / transmit_power_to_amplitude(p);
            assert!((ratio - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_validation() {
        assert_eq!(SymbolStream::new(vec![], 4, 1.0), Err(BasebandError::Empty));
        assert_eq!(
            SymbolStream::new(vec![one()], 4, 0.0),
            Err(BasebandError::Amplitude(0.0))
        );
        let s = SymbolStream::bpsk(12_500, 0.25, 3).unwrap();
        assert_eq!(s.num_samples(), 50_000);
        assert!(s
            .symbols()
            .iter()
            .all(|z| z.im == 0.0 && z.re.abs() == 0.25));
    }

    #[test]
    fn noiseless_link_is_scaled_reference() {
        let tx = SymbolStream::bpsk(64, 0.1, 1).unwrap();
        let w = PhaseWeights::broadside(12, 2).unwrap();
        let rx = simulate_link(&tx, &w, &ones_channel(), &w, Noise::Off, 9).unwrap();
        for (y, s) in rx.symbols().iter().zip(tx.symbols()) {
            assert_eq!(*y, s * 144.0);
        }
    }

    #[test]
    fn null_space_link_is_silent() {
        let tx = SymbolStream::bpsk(64, 0.1, 1).unwrap();
        let w = PhaseWeights::broadside(12, 1).unwrap();
        let f = PhaseWeights::new((0..12).map(|n| n % 2).collect(), 1).unwrap();
        let rx = simulate_link(&tx, &f, &ones_channel(), &w, Noise::Off, 9).unwrap();
        assert!(rx.symbols().iter().all(|y| y.norm() == 0.0));
        let report = compute_evm(&rx, &tx).unwrap();
        assert_eq!(report.e_ref, 0.0);
        assert_eq!(report.evm_db, EVM_CEILING_DB);
    }

    #[test]
    fn link_is_deterministic_per_seed() {
        let tx = SymbolStream::bpsk(256, 0.1, 1).unwrap();
        let w = PhaseWeights::broadside(12, 2).unwrap();
        let noise = Noise::Awgn { power_dbm: -20.0 };
        let a = simulate_link(&tx, &w, &ones_channel(), &w, noise, 5).unwrap();
        let b = simulate_link(&tx, &w, &ones_channel(), &w, noise, 5).unwrap();
        let c = simulate_link(&tx, &w, &ones_channel(), &w, noise, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn link_shape_errors() {
        let tx = SymbolStream::bpsk(8, 0.1, 1).unwrap();
        let w = PhaseWeights::broadside(12, 2).unwrap();
        let f = PhaseWeights::broadside(3, 2).unwrap();
        assert!(matches!(
            simulate_link(&tx, &f, &ones_channel(), &w, Noise::Off, 0),
            Err(BasebandError::Array(ArrayError::Shape(_)))
        ));
    }

    #[test]
    fn perfect_reception_hits_floor() {
        let tx = SymbolStream::bpsk(100, 1.0, 2).unwrap();
        let r = compute_evm(&tx, &tx).unwrap();
        assert_eq!(r.e_error, 0.0);
        assert_eq!(r.evm_db, EVM_FLOOR_DB);
        assert_eq!(r.num_symbols, 100);
    }

    #[test]
    fn tenth_amplitude_error_is_minus_ten_db() {
        let reference = alternating(1000, 0.5);
        let c = Complex64::new(0.0, 0.05);
        let received: Vec<_> = reference.symbols().iter().map(|s| s + c).collect();
        let received = SymbolStream::new(received, 4, 0.5).unwrap();
        let r = compute_evm(&received, &reference).unwrap();
        assert_eq!((r.e_error, r.e_ref, r.evm_db), (0.05, 0.5, -10.0));
        let std20 = compute_evm_with(&received, &reference, EvmConvention::Db20).unwrap();
        assert_eq!(std20.evm_db, -20.0);
    }

    #[test]
    fn evm_errors() {
        let a = SymbolStream::bpsk(4, 1.0, 0).unwrap();
        let b = SymbolStream::bpsk(5, 1.0, 0).unwrap();
        assert!(matches!(
            compute_evm(&a, &b),
            Err(BasebandError::Length { .. })
        ));
        let zeros = vec![Complex64::new(0.0, 0.0); 4];
        assert_eq!(
            evm_of(a.symbols(), &zeros, EvmConvention::Db10),
            Err(BasebandError::ZeroReference)
        );
    }

    #[test]
    fn awgn_matches_analytic_expectation() {
        let amplitude = transmit_power_to_amplitude(0.0);
        let tx = SymbolStream::bpsk(DEFAULT_NUM_SYMBOLS, amplitude, 11).unwrap();
        let coefficient = Complex64::from_polar(0.02, 1.1);
        let noise_dbm = -60.0;
        let sigma = transmit_power_to_amplitude(noise_dbm);
        let expected = 10.0 * (sigma / (coefficient.norm() * amplitude)).log10();
        for seed in 0..5 {
            let noise = noise_sequence(
                &tx,
                Noise::Awgn {
                    power_dbm: noise_dbm,
                },
                seed,
            );
            let rx = apply_link(&tx, coefficient, &noise).unwrap();
            let r = compute_evm(&rx, &tx).unwrap();
            assert!(
                (r.evm_db - expected).abs() < 0.2,
                "{} vs {expected}",
                r.evm_db
            );
        }
    }

    #[test]
    fn frozen_noise_has_exact_power_and_no_reference_component() {
        let tx = SymbolStream::bpsk(1000, 0.3, 4).unwrap();
        let v = noise_sequence(&tx, Noise::Frozen { power_dbm: -10.0 }, 77);
        let rms = (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / 1000.0).sqrt();
        assert!((rms - transmit_power_to_amplitude(-10.0)).abs() < 1e-14);
        let overlap: Complex64 = tx.symbols().iter().zip(&v).map(|(r, x)| r.conj() * x).sum();
        assert!(overlap.norm() < 1e-12);
        // Equalized EVM is then exactly 10·log10(σ / (|g|·A)).
        let g = Complex64::from_polar(0.01, -2.0);
        let rx = apply_link(&tx, g, &v).unwrap();
        let r = compute_evm(&rx, &tx).unwrap();
        let expect = 10.0 * (transmit_power_to_amplitude(-10.0) / (0.01 * 0.3)).log10();
        assert!((r.evm_db - expect).abs() < 1e-9);
    }

    #[test]
    fn power_slope_is_half_under_amplitude_convention() {
        let coefficient = Complex64::from_polar(0.01, 0.3);
        let noise = Noise::Awgn { power_dbm: -70.0 };
        let evm_at = |p: f64| {
            let tx =
                SymbolStream::bpsk(DEFAULT_NUM_SYMBOLS, transmit_power_to_amplitude(p), 1).unwrap();
            let rx = apply_link(&tx, coefficient, &noise_sequence(&tx, noise, 2)).unwrap();
            compute_evm(&rx, &tx).unwrap().evm_db
        };
        let base = evm_at(0.0);
        for delta in [3.0, 6.0, 10.0] {
            let drop = base - evm_at(delta);
            assert!((drop - delta / 2.0).abs() < 0.1, "Δ={delta}: {drop}");
        }
    }

    #[test]
    fn longer_averages_vary_less() {
        let amplitude = 0.1;
        let coefficient = Complex64::new(0.05, 0.0);
        let spread = |n: usize| {
            let tx = SymbolStream::bpsk(n, amplitude, 3).unwrap();
            let vals: Vec<f64> = (0..40)
                .map(|seed| {
                    let noise = noise_sequence(&tx, Noise::Awgn { power_dbm: -50.0 }, seed);
                    let rx = apply_link(&tx, coefficient, &noise).unwrap();
                    compute_evm(&rx, &tx).unwrap().evm_db
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
        };
        assert!(spread(12_500) < spread(125));
    }

    proptest! {
        #[test]
        fn evm_identity_holds(seed in any::<u64>(), n in 1usize..300, scale in 0.01f64..10.0) {
            let reference = SymbolStream::bpsk(n, scale, seed).unwrap();
            let noise = noise_sequence(&reference, Noise::Awgn { power_dbm: 20.0 * scale.log10() + 20.0 }, seed ^ 1);
            let rx = apply_link(&reference, Complex64::new(0.8, 0.1), &noise).unwrap();
            let r = compute_evm(&rx, &reference).unwrap();
            prop_assume!(r.e_error > 0.0 && r.e_ref > 0.0);
            prop_assert!((r.evm_db - 10.0 * (r.e_error / r.e_ref).log10()).abs() < 1e-9);
        }

        #[test]
        fn equalized_evm_ignores_complex_scaling(seed in any::<u64>(), mag in 1e-3f64..1e3, phase in -3.1f64..3.1) {
            let reference = SymbolStream::bpsk(200, 1.0, seed).unwrap();
            let noise = noise_sequence(&reference, Noise::Awgn { power_dbm: 20.0 }, seed);
            let rx = apply_link(&reference, Complex64::new(1.0, 0.0), &noise).unwrap();
            let a = Complex64::from_polar(mag, phase);
            let scaled: Vec<_> = rx.symbols().iter().map(|y| a * y).collect();
            let base = evm_of(rx.symbols(), reference.symbols(), EvmConvention::Db10).unwrap();
            let other = evm_of(&scaled, reference.symbols(), EvmConvention::Db10).unwrap();
            prop_assert!((base.evm_db - other.evm_db).abs() < 1e-9);
        }
    }
}
