//! Uniform linear phased arrays driven by quantized phase shifters.
//!
//! Element `n` of an `N`-element array with spacing `d` (in wavelengths)
//! responds to azimuth `theta` (measured from broadside) with phase
//! `2π·d·n·sin(theta)`. Element 0 is the phase reference.
//!
//! A [`PhaseWeights`] value is what the array hardware is actually given: one
//! integer phase index per element out of `2^bits` evenly spaced settings.
//! Because the shifters cannot taper amplitude, every realized weight has unit
//! modulus.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelMatrix;

/// Largest supported phase-shifter resolution.
pub const MAX_PHASE_BITS: u32 = 16;

/// Default phase-shifter resolution.
pub const DEFAULT_PHASE_BITS: u32 = 2;

/// Two phase distances closer than this (in grid steps) count as a tie.
const QUANTIZE_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("array must have at least one element")]
    NoElements,
    #[error("element spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("steering angle {0} rad is outside (-π/2, π/2)")]
    InvalidAngle(f64),
    #[error("phase resolution must be 1..={MAX_PHASE_BITS} bits, got {0}")]
    InvalidBits(u32),
    #[error("weight {index} has zero or non-finite magnitude")]
    InvalidWeight { index: usize },
    #[error("phase index {value} at element {index} does not fit in {bits} bits")]
    IndexOutOfRange { index: usize, value: u32, bits: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Element arrangement. Only uniform-linear arrays are modelled today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrayLayout {
    #[default]
    UniformLinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    element_spacing_wavelengths: f64,
    layout: ArrayLayout,
}

impl ArrayGeometry {
    pub const DEFAULT_ELEMENTS: usize = 12;
    pub const DEFAULT_SPACING: f64 = 0.5;

    pub fn uniform_linear(
        num_elements: usize,
        element_spacing_wavelengths: f64,
    ) -> Result<Self, ArrayError> {
        if num_elements == 0 {
            return Err(ArrayError::NoElements);
        }
        if !(element_spacing_wavelengths.is_finite() && element_spacing_wavelengths > 0.0) {
            return Err(ArrayError::InvalidSpacing(element_spacing_wavelengths));
        }
        Ok(Self {
            num_elements,
            element_spacing_wavelengths,
            layout: ArrayLayout::UniformLinear,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn element_spacing_wavelengths(&self) -> f64 {
        self.element_spacing_wavelengths
    }

    pub fn layout(&self) -> ArrayLayout {
        self.layout
    }
}

impl Default for ArrayGeometry {
    /// Twelve elements at half-wavelength spacing.
    fn default() -> Self {
        Self {
            num_elements: Self::DEFAULT_ELEMENTS,
            element_spacing_wavelengths: Self::DEFAULT_SPACING,
            layout: ArrayLayout::UniformLinear,
        }
    }
}

/// Azimuth from array broadside, in radians, strictly inside (-π/2, π/2).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SteeringAngle(f64);

impl SteeringAngle {
    pub const BROADSIDE: SteeringAngle = SteeringAngle(0.0);

    pub fn new(theta: f64) -> Result<Self, ArrayError> {
        if theta.is_finite() && theta.abs() < PI / 2.0 {
            Ok(Self(theta))
        } else {
            Err(ArrayError::InvalidAngle(theta))
        }
    }

    /// Angle whose sine is `sine`; `|sine|` must be strictly below one.
    pub fn from_sine(sine: f64) -> Result<Self, ArrayError> {
        Self::new(sine.asin())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn sin(self) -> f64 {
        self.0.sin()
    }
}

/// Array response toward `angle`.
pub fn steering_vector(geometry: &ArrayGeometry, angle: SteeringAngle) -> Vec<Complex64> {
    let progression = TAU * geometry.element_spacing_wavelengths * angle.sin();
    (0..geometry.num_elements)
        .map(|n| Complex64::from_polar(1.0, progression * n as f64))
        .collect()
}

/// Per-element phase indices for a `bits`-bit phase shifter network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseWeights {
    phases: Vec<u32>,
    bits: u32,
}

impl PhaseWeights {
    pub fn new(phases: Vec<u32>, bits: u32) -> Result<Self, ArrayError> {
        check_bits(bits)?;
        if phases.is_empty() {
            return Err(ArrayError::NoElements);
        }
        let levels = 1u32 << bits;
        if let Some((index, &value)) = phases.iter().enumerate().find(|(_, &p)| p >= levels) {
            return Err(ArrayError::IndexOutOfRange { index, value, bits });
        }
        Ok(Self { phases, bits })
    }

    /// All elements at phase zero.
    pub fn broadside(num_elements: usize, bits: u32) -> Result<Self, ArrayError> {
        Self::new(vec![0; num_elements], bits)
    }

    pub fn phases(&self) -> &[u32] {
        &self.phases
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Phase of element `n` in radians, in `[0, 2π)`.
    pub fn phase_radians(&self, n: usize) -> f64 {
        TAU * f64::from(self.phases[n]) / f64::from(1u32 << self.bits)
    }

    /// The unit-modulus complex weights the shifters realize.
    ///
    /// Quarter-turn phases are exact: `1, i, -1, -i`.
    pub fn realized(&self) -> Vec<Complex64> {
        let steps = 1u64 << self.bits;
        (0..self.phases.len())
            .map(|n| {
                let quarters = 4 * u64::from(self.phases[n]);
                if quarters % steps == 0 {
                    match (quarters / steps) % 4 {
                        0 => Complex64::new(1.0, 0.0),
                        1 => Complex64::new(0.0, 1.0),
                        2 => Complex64::new(-1.0, 0.0),
                        _ => Complex64::new(0.0, -1.0),
                    }
                } else {
                    Complex64::from_polar(1.0, self.phase_radians(n))
                }
            })
            .collect()
    }
}

fn check_bits(bits: u32) -> Result<(), ArrayError> {
    if (1..=MAX_PHASE_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(ArrayError::InvalidBits(bits))
    }
}

/// Nearest `bits`-bit phase index to `phase` (radians, any range).
///
/// Exact midpoints go to the numerically lower index, so a phase halfway
/// between the last grid point and `2π` maps to index 0.
pub fn quantize_phase(phase: f64, bits: u32) -> Result<u32, ArrayError> {
    check_bits(bits)?;
    let levels = 1u32 << bits;
    let steps = (phase / TAU * f64::from(levels)).rem_euclid(f64::from(levels));
    let below = steps.floor();
    let frac = steps - below;
    let lower = (below as u32) % levels;
    let upper = (lower + 1) % levels;
    let index = if (frac - 0.5).abs() < QUANTIZE_TIE_EPS {
        lower.min(upper)
    } else if frac < 0.5 {
        lower
    } else {
        upper
    };
    Ok(index)
}

/// Snap ideal weights onto the phase-shifter grid, discarding amplitude.
pub fn quantize_weights(ideal: &[Complex64], bits: u32) -> Result<PhaseWeights, ArrayError> {
    check_bits(bits)?;
    let phases = ideal
        .iter()
        .enumerate()
        .map(|(index, w)| {
            let mag = w.norm();
            if !(mag.is_finite() && mag > 0.0) {
                return Err(ArrayError::InvalidWeight { index });
            }
            quantize_phase(w.arg(), bits)
        })
        .collect::<Result<Vec<_>, _>>()?;
    PhaseWeights::new(phases, bits)
}

/// The complex link coefficient `w^H H f` for arbitrary complex weights.
pub fn bilinear_form(
    w: &[Complex64],
    channel: &ChannelMatrix,
    f: &[Complex64],
) -> Result<Complex64, ArrayError> {
    let h = channel.entries();
    if w.len() != h.nrows() || f.len() != h.ncols() {
        return Err(ArrayError::Shape(format!(
            "combiner {} x channel {}x{} x precoder {}",
            w.len(),
            h.nrows(),
            h.ncols(),
            f.len()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (r, wr) in w.iter().enumerate() {
        let row: Complex64 = f.iter().enumerate().map(|(t, ft)| h[(r, t)] * ft).sum();
        acc += wr.conj() * row;
    }
    Ok(acc)
}

/// Complex coefficient `w^H H f` for realized phase weights.
pub fn link_coefficient(
    w: &PhaseWeights,
    channel: &ChannelMatrix,
    f: &PhaseWeights,
) -> Result<Complex64, ArrayError> {
    bilinear_form(&w.realized(), channel, &f.realized())
}

/// `|w^H H f|`, the quantity the exhaustive codebook search maximizes.
pub fn beamforming_gain(
    w: &PhaseWeights,
    channel: &ChannelMatrix,
    f: &PhaseWeights,
) -> Result<f64, ArrayError> {
    link_coefficient(w, channel, f).map(|c| c.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelMatrix, PathComponent};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ones(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); n]
    }

    fn rank_one(alpha: Complex64, aoa: f64, aod: f64) -> ChannelMatrix {
        let g = ArrayGeometry::default();
        ChannelMatrix::from_paths(
            &g,
            &g,
            vec![PathComponent {
                gain: alpha,
                aod: SteeringAngle::new(aod).unwrap(),
                aoa: SteeringAngle::new(aoa).unwrap(),
                delay_m: 0.0,
            }],
        )
    }

    #[test]
    fn geometry_rejects_bad_values() {
        assert_eq!(
            ArrayGeometry::uniform_linear(0, 0.5),
            Err(ArrayError::NoElements)
        );
        assert!(ArrayGeometry::uniform_linear(4, 0.0).is_err());
        assert!(ArrayGeometry::uniform_linear(4, f64::NAN).is_err());
        let g = ArrayGeometry::default();
        assert_eq!(g.num_elements(), 12);
        assert_eq!(g.element_spacing_wavelengths(), 0.5);
    }

    #[test]
    fn angle_must_be_inside_open_interval() {
        assert!(SteeringAngle::new(PI / 2.0).is_err());
        assert!(SteeringAngle::new(-PI / 2.0).is_err());
        assert!(SteeringAngle::new(f64::INFINITY).is_err());
        assert!(SteeringAngle::new(1.5).is_ok());
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let g = ArrayGeometry::default();
        assert_eq!(steering_vector(&g, SteeringAngle::BROADSIDE), ones(12));
    }

    #[test]
    fn thirty_degrees_gives_quarter_turns() {
        let g = ArrayGeometry::uniform_linear(4, 0.5).unwrap();
        let sv = steering_vector(&g, SteeringAngle::new(PI / 6.0).unwrap());
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (got, want) in sv.iter().zip(expected) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn steering_phase_progression_matches_high_precision_table() {
        // n·π·sin(0.3), evaluated at 40 significant digits.
        const PHASES: [f64; 12] = [
            0.0,
            0.928_404_110_234_601_9,
            1.856_808_220_469_203_8,
            2.785_212_330_703_805_7,
            3.713_616_440_938_407_6,
            4.642_020_551_173_009_4,
            5.570_424_661_407_611_3,
            6.498_828_771_642_213_2,
            7.427_232_881_876_815_1,
            8.355_636_992_111_417,
            9.284_041_102_346_019,
            10.212_445_212_580_621,
        ];
        let g = ArrayGeometry::default();
        let sv = steering_vector(&g, SteeringAngle::new(0.3).unwrap());
        assert_eq!(sv[0], Complex64::new(1.0, 0.0));
        for (w, phase) in sv.iter().zip(PHASES) {
            let want = Complex64::from_polar(1.0, phase);
            assert!((w - want).norm() < 1e-12);
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_phase(PI / 2.0, 2).unwrap(), 1);
        assert_eq!(quantize_phase(PI / 3.0, 2).unwrap(), 1);
        assert_eq!(quantize_phase(PI / 4.0, 2).unwrap(), 0);
        // Wrap-around midpoint between 3π/2 and 2π.
        assert_eq!(quantize_phase(7.0 * PI / 4.0, 2).unwrap(), 0);
        assert_eq!(quantize_phase(-PI / 2.0, 2).unwrap(), 3);
        assert_eq!(quantize_phase(-0.1, 2).unwrap(), 0);

        let w = quantize_weights(&[Complex64::from_polar(2.0, PI / 4.0)], 2).unwrap();
        assert_eq!(w.phases(), &[0]);
        let w = quantize_weights(&[Complex64::from_polar(0.3, PI / 3.0)], 2).unwrap();
        assert_eq!(w.phases(), &[1]);
    }

    #[test]
    fn quantize_rejects_zero_weight() {
        let err = quantize_weights(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], 2);
        assert_eq!(err, Err(ArrayError::InvalidWeight { index: 1 }));
        assert_eq!(
            quantize_weights(&ones(3), 0),
            Err(ArrayError::InvalidBits(0))
        );
        assert_eq!(
            quantize_weights(&ones(3), 17),
            Err(ArrayError::InvalidBits(17))
        );
    }

    #[test]
    fn phase_weights_validate_indices() {
        assert!(matches!(
            PhaseWeights::new(vec![0, 4], 2),
            Err(ArrayError::IndexOutOfRange {
                index: 1,
                value: 4,
                bits: 2
            })
        ));
        assert!(PhaseWeights::new(vec![], 2).is_err());
    }

    #[test]
    fn boresight_gain_is_coherent_sum() {
        let h =
            ChannelMatrix::from_entries(DMatrix::from_element(12, 12, Complex64::new(1.0, 0.0)));
        let w = PhaseWeights::broadside(12, 2).unwrap();
        assert!((beamforming_gain(&w, &h, &w).unwrap() - 144.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_precoder_gives_zero() {
        // H = 1·1^T; f alternating ±1 sums to zero against every row.
        let h =
            ChannelMatrix::from_entries(DMatrix::from_element(12, 12, Complex64::new(1.0, 0.0)));
        let w = PhaseWeights::broadside(12, 1).unwrap();
        let f = PhaseWeights::new((0..12).map(|n| n % 2).collect(), 1).unwrap();
        assert!(beamforming_gain(&w, &h, &f).unwrap() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let h =
            ChannelMatrix::from_entries(DMatrix::from_element(12, 12, Complex64::new(1.0, 0.0)));
        let w = PhaseWeights::broadside(12, 2).unwrap();
        let f = PhaseWeights::broadside(8, 2).unwrap();
        assert!(matches!(
            beamforming_gain(&w, &h, &f),
            Err(ArrayError::Shape(_))
        ));
    }

    #[test]
    fn gain_matches_dense_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbeef);
        let entries = DMatrix::from_fn(12, 12, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = ChannelMatrix::from_entries(entries.clone());
        let w = PhaseWeights::new((0..12).map(|_| rng.random_range(0..4)).collect(), 2).unwrap();
        let f = PhaseWeights::new((0..12).map(|_| rng.random_range(0..4)).collect(), 2).unwrap();

        // Oracle: explicit double sum with weights built from cos/sin.
        let weight = |k: u32| {
            let phase = 2.0 * PI * f64::from(k) / 4.0;
            (phase.cos(), phase.sin())
        };
        let (mut re, mut im) = (0.0, 0.0);
        for r in 0..12 {
            let (wr, wi) = weight(w.phases()[r]);
            for t in 0..12 {
                let (fr, fi) = weight(f.phases()[t]);
                let (hr, hi) = (entries[(r, t)].re, entries[(r, t)].im);
                // conj(w)·h·f
                let (hfr, hfi) = (hr * fr - hi * fi, hr * fi + hi * fr);
                re += wr * hfr + wi * hfi;
                im += wr * hfi - wi * hfr;
            }
        }
        let oracle = (re * re + im * im).sqrt();
        let got = beamforming_gain(&w, &h, &f).unwrap();
        assert!(
            (got - oracle).abs() < 1e-12 * oracle.max(1.0),
            "{got} vs {oracle}"
        );
    }

    proptest! {
        #[test]
        fn realized_weights_are_unit_modulus(bits in 1u32..=16, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phases = (0..12).map(|_| rng.random_range(0..(1u32 << bits))).collect();
            let w = PhaseWeights::new(phases, bits).unwrap();
            for z in w.realized() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn broadside_is_all_ones_for_any_array(n in 1usize..64, d in 0.05f64..4.0) {
            let g = ArrayGeometry::uniform_linear(n, d).unwrap();
            prop_assert_eq!(steering_vector(&g, SteeringAngle::BROADSIDE), ones(n));
        }

        #[test]
        fn gain_scales_linearly(re in -5.0f64..5.0, im in -5.0f64..5.0, aoa in -1.2f64..1.2, aod in -1.2f64..1.2) {
            let h = rank_one(Complex64::new(0.7, -0.2), aoa, 0.4);
            let g = ArrayGeometry::default();
            let w = steering_vector(&g, SteeringAngle::new(aoa).unwrap());
            let f = steering_vector(&g, SteeringAngle::new(aod).unwrap());
            let a = Complex64::new(re, im);
            let scaled: Vec<_> = f.iter().map(|x| a * x).collect();
            let base = bilinear_form(&w, &h, &f).unwrap().norm();
            let got = bilinear_form(&w, &h, &scaled).unwrap().norm();
            prop_assert!((got - a.norm() * base).abs() <= 1e-9 * (1.0 + a.norm() * base));
        }

        #[test]
        fn matched_rank_one_gain_is_full_array_gain(
            mag in 0.01f64..10.0, phase in -PI..PI, aoa in -1.4f64..1.4, aod in -1.4f64..1.4
        ) {
            let alpha = Complex64::from_polar(mag, phase);
            let h = rank_one(alpha, aoa, aod);
            let g = ArrayGeometry::default();
            let w = steering_vector(&g, SteeringAngle::new(aoa).unwrap());
            let f = steering_vector(&g, SteeringAngle::new(aod).unwrap());
            let gain = bilinear_form(&w, &h, &f).unwrap().norm();
            prop_assert!((gain - mag * 144.0).abs() <= 1e-9 * mag * 144.0);
        }

        #[test]
        fn quantization_never_helps(bits in 1u32..=8, aoa in -1.4f64..1.4, aod in -1.4f64..1.4) {
            let h = rank_one(Complex64::new(1.0, 0.0), aoa, aod);
            let g = ArrayGeometry::default();
            let w = steering_vector(&g, SteeringAngle::new(aoa).unwrap());
            let f = steering_vector(&g, SteeringAngle::new(aod).unwrap());
            let ideal = bilinear_form(&w, &h, &f).unwrap().norm();
            let wq = quantize_weights(&w, bits).unwrap();
            let fq = quantize_weights(&f, bits).unwrap();
            let quantized = beamforming_gain(&wq, &h, &fq).unwrap();
            prop_assert!(quantized <= ideal * (1.0 + 1e-12));
        }

        #[test]
        fn quantized_index_is_nearest_grid_point(phase in -10.0f64..10.0, bits in 1u32..=8) {
            let k = quantize_phase(phase, bits).unwrap();
            let levels = f64::from(1u32 << bits);
            let dist = |idx: f64| {
                let d = (phase - TAU * idx / levels).rem_euclid(TAU);
                d.min(TAU - d)
            };
            let best = (0..(1u32 << bits)).map(|i| dist(f64::from(i))).fold(f64::INFINITY, f64::min);
            prop_assert!(dist(f64::from(k)) <= best + 1e-9);
        }
    }
}
