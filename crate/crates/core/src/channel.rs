//! Geometric channel for the lecture-room link.
//!
//! The room is an axis-aligned box: `x` across the width, `y` along the
//! length, `z` up. The receiver sits on the room's centre line
//! `rx_offset_from_back_wall_m` from the back wall (`y = 0`) and the
//! transmitter faces it from further down the same line. Both arrays are
//! horizontal ULAs at `antenna_height_m`; the receive array axis is `+x`, the
//! transmit array is the same board rotated half a turn so its axis is `-x`.
//!
//! Paths are the line-of-sight ray plus, optionally, the four first-order
//! image-method reflections (two side walls, floor, ceiling). Each path has
//! Friis amplitude over its unfolded length, a flat per-bounce reflection
//! loss, and a carrier phase from its length. Reflections additionally carry
//! a seeded uniform phase standing in for the unknown surface reflection
//! phase.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::array::{steering_vector, ArrayError, ArrayGeometry, SteeringAngle};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const DEFAULT_CARRIER_HZ: f64 = 60e9;
pub const DEFAULT_REFLECTION_LOSS_DB: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{0} must be positive and finite, got {1}")]
    Domain(&'static str, f64),
    #[error(
        "transmitter at {distance_m} m is outside the room (at most {max_m} m from the receiver)"
    )]
    OutsideRoom { distance_m: f64, max_m: f64 },
    #[error("invalid room: {0}")]
    Room(String),
    #[error("max_bounces must be 0 or 1, got {0}")]
    Bounces(u32),
    #[error(transparent)]
    Array(#[from] ArrayError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomGeometry {
    pub width_m: f64,
    pub length_m: f64,
    pub ceiling_height_m: f64,
    pub antenna_height_m: f64,
    pub rx_offset_from_back_wall_m: f64,
}

impl Default for RoomGeometry {
    fn default() -> Self {
        Self {
            width_m: 5.0,
            length_m: 10.0,
            ceiling_height_m: 3.0,
            antenna_height_m: 1.6,
            rx_offset_from_back_wall_m: 2.0,
        }
    }
}

impl RoomGeometry {
    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, v) in [
            ("width_m", self.width_m),
            ("length_m", self.length_m),
            ("ceiling_height_m", self.ceiling_height_m),
            ("antenna_height_m", self.antenna_height_m),
            (
                "rx_offset_from_back_wall_m",
                self.rx_offset_from_back_wall_m,
            ),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ChannelError::Domain(name, v));
            }
        }
        if self.antenna_height_m >= self.ceiling_height_m {
            return Err(ChannelError::Room(format!(
                "antenna height {} m is not below the ceiling at {} m",
                self.antenna_height_m, self.ceiling_height_m
            )));
        }
        if self.rx_offset_from_back_wall_m >= self.length_m {
            return Err(ChannelError::Room(format!(
                "receiver offset {} m does not fit in a {} m room",
                self.rx_offset_from_back_wall_m, self.length_m
            )));
        }
        Ok(())
    }

    /// Largest transmitter distance that keeps it inside the room.
    pub fn max_distance_m(&self) -> f64 {
        self.length_m - self.rx_offset_from_back_wall_m
    }
}

/// One propagation path: `gain · a_rx(aoa) · a_tx(aod)^H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub aod: SteeringAngle,
    pub aoa: SteeringAngle,
    /// Path length beyond the line-of-sight distance.
    pub delay_m: f64,
}

/// Narrowband MIMO channel, receive elements by transmit elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
    paths: Vec<PathComponent>,
}

impl ChannelMatrix {
    /// Sum of the outer products of `paths`.
    pub fn from_paths(rx: &ArrayGeometry, tx: &ArrayGeometry, paths: Vec<PathComponent>) -> Self {
        let mut entries = DMatrix::zeros(rx.num_elements(), tx.num_elements());
        for p in &paths {
            let a_rx = steering_vector(rx, p.aoa);
            let a_tx = steering_vector(tx, p.aod);
            for (r, ar) in a_rx.iter().enumerate() {
                let scaled = p.gain * ar;
                for (t, at) in a_tx.iter().enumerate() {
                    entries[(r, t)] += scaled * at.conj();
                }
            }
        }
        Self { entries, paths }
    }

    /// Wrap an arbitrary matrix. The result carries no path decomposition.
    pub fn from_entries(entries: DMatrix<Complex64>) -> Self {
        Self {
            entries,
            paths: Vec::new(),
        }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    pub fn num_rx(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_tx(&self) -> usize {
        self.entries.ncols()
    }

    /// Same channel with every entry and path gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.map(|z| z * factor),
            paths: self
                .paths
                .iter()
                .map(|p| PathComponent {
                    gain: p.gain * factor,
                    ..*p
                })
                .collect(),
        }
    }
}

pub fn wavelength_m(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Free-space pathloss `20·log10(4πd/λ)` in dB.
pub fn friis_pathloss_db(distance_m: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(ChannelError::Domain("distance_m", distance_m));
    }
    if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
        return Err(ChannelError::Domain("carrier_hz", carrier_hz));
    }
    Ok(20.0 * (4.0 * PI * distance_m / wavelength_m(carrier_hz)).log10())
}

/// Everything needed to build one link's channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub room: RoomGeometry,
    pub tx_rx_distance_m: f64,
    pub carrier_hz: f64,
    pub reflection_loss_db: f64,
    pub max_bounces: u32,
    pub seed: u64,
    pub tx_array: ArrayGeometry,
    pub rx_array: ArrayGeometry,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            room: RoomGeometry::default(),
            tx_rx_distance_m: 4.0,
            carrier_hz: DEFAULT_CARRIER_HZ,
            reflection_loss_db: DEFAULT_REFLECTION_LOSS_DB,
            max_bounces: 1,
            seed: 0,
            tx_array: ArrayGeometry::default(),
            rx_array: ArrayGeometry::default(),
        }
    }
}

type Point = [f64; 3];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// A path traced to a (possibly mirrored) transmitter image.
struct Ray {
    length_m: f64,
    /// Sine of the arrival azimuth in the receive-array frame.
    rx_sine: f64,
    /// Sine of the departure azimuth in the transmit-array frame.
    tx_sine: f64,
    bounces: u32,
}

fn trace(rx: Point, image: Point, mirror_axis: Option<usize>, bounces: u32) -> Ray {
    let arrival = sub(image, rx);
    let length_m = norm(arrival);
    // Departure direction is the arrival ray reversed, then mirrored back
    // through the reflecting plane.
    let mut departure = sub(rx, image);
    if let Some(axis) = mirror_axis {
        departure[axis] = -departure[axis];
    }
    Ray {
        length_m,
        rx_sine: arrival[0] / length_m,
        tx_sine: -departure[0] / length_m,
        bounces,
    }
}

/// Build the LOS (+ first-order reflection) channel for one transmitter
/// placement. Identical parameters always give a bit-identical matrix.
pub fn build_channel(params: &ChannelParams) -> Result<ChannelMatrix, ChannelError> {
    let room = &params.room;
    room.validate()?;
    let d = params.tx_rx_distance_m;
    if !(d.is_finite() && d > 0.0) {
        return Err(ChannelError::Domain("tx_rx_distance_m", d));
    }
    if d > room.max_distance_m() {
        return Err(ChannelError::OutsideRoom {
            distance_m: d,
            max_m: room.max_distance_m(),
        });
    }
    if params.max_bounces > 1 {
        return Err(ChannelError::Bounces(params.max_bounces));
    }
    if !params.reflection_loss_db.is_finite() {
        return Err(ChannelError::Domain(
            "reflection_loss_db",
            params.reflection_loss_db,
        ));
    }
    let lambda = wavelength_m(params.carrier_hz);
    friis_pathloss_db(d, params.carrier_hz)?;

    let x = room.width_m / 2.0;
    let h = room.antenna_height_m;
    let rx = [x, room.rx_offset_from_back_wall_m, h];
    let tx = [x, room.rx_offset_from_back_wall_m + d, h];

    let mut rays = vec![trace(rx, tx, None, 0)];
    if params.max_bounces == 1 {
        rays.push(trace(rx, [-tx[0], tx[1], tx[2]], Some(0), 1));
        rays.push(trace(
            rx,
            [2.0 * room.width_m - tx[0], tx[1], tx[2]],
            Some(0),
            1,
        ));
        rays.push(trace(rx, [tx[0], tx[1], -tx[2]], Some(2), 1));
        rays.push(trace(
            rx,
            [tx[0], tx[1], 2.0 * room.ceiling_height_m - tx[2]],
            Some(2),
            1,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let los_length = rays[0].length_m;
    let mut paths = Vec::with_capacity(rays.len());
    for ray in rays {
        let loss_db = friis_pathloss_db(ray.length_m, params.carrier_hz)?
            + params.reflection_loss_db * f64::from(ray.bounces);
        let amplitude = 10f64.powf(-loss_db / 20.0);
        let mut phase = -TAU * ray.length_m.rem_euclid(lambda) / lambda;
        if ray.bounces > 0 {
            phase += rng.random_range(0.0..TAU);
        }
        paths.push(PathComponent {
            gain: Complex64::from_polar(amplitude, phase),
            aod: SteeringAngle::from_sine(ray.tx_sine)?,
            aoa: SteeringAngle::from_sine(ray.rx_sine)?,
            delay_m: (ray.length_m - los_length).max(0.0),
        });
    }
    Ok(ChannelMatrix::from_paths(
        &params.rx_array,
        &params.tx_array,
        paths,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn los(d: f64) -> ChannelParams {
        ChannelParams {
            tx_rx_distance_m: d,
            max_bounces: 0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn friis_examples() {
        let lambda = wavelength_m(60e9);
        assert!(friis_pathloss_db(lambda / (4.0 * PI), 60e9).unwrap().abs() < 1e-12);
        // 20·log10(4π/λ) at 60 GHz, evaluated at 40 digits: 68.0108082295562...
        let one_meter = friis_pathloss_db(1.0, 60e9).unwrap();
        assert!((one_meter - 68.010_808_229_556_25).abs() < 1e-9);
        assert!((one_meter - 68.0).abs() < 0.05);
        for d in [0.01, 0.7, 3.0, 123.0] {
            let step =
                friis_pathloss_db(2.0 * d, 60e9).unwrap() - friis_pathloss_db(d, 60e9).unwrap();
            assert!((step - 20.0 * 2f64.log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn friis_rejects_nonpositive_inputs() {
        assert!(matches!(
            friis_pathloss_db(0.0, 60e9),
            Err(ChannelError::Domain(..))
        ));
        assert!(matches!(
            friis_pathloss_db(-1.0, 60e9),
            Err(ChannelError::Domain(..))
        ));
        assert!(matches!(
            friis_pathloss_db(1.0, 0.0),
            Err(ChannelError::Domain(..))
        ));
    }

    #[test]
    fn los_only_has_one_boresight_path() {
        let h = build_channel(&los(4.0)).unwrap();
        assert_eq!(h.paths().len(), 1);
        let p = h.paths()[0];
        assert_eq!(p.aoa.radians(), 0.0);
        assert_eq!(p.aod.radians(), 0.0);
        assert_eq!(p.delay_m, 0.0);
        let sv = h.entries().clone().svd(false, false).singular_values;
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn first_order_images_in_default_room() {
        let h = build_channel(&ChannelParams::default()).unwrap();
        let paths = h.paths();
        assert_eq!(paths.len(), 5);
        let los_gain = paths[0].gain.norm();
        for p in &paths[1..] {
            assert!(p.gain.norm() < los_gain);
            assert!(p.delay_m > 0.0);
        }
        // Hand-worked image geometry for d = 4 m: side-wall images sit 5 m
        // off-axis, floor/ceiling images 3.2 m / 2.8 m off-axis vertically.
        let side = (25.0f64 + 16.0).sqrt();
        let floor = (3.2f64 * 3.2 + 16.0).sqrt();
        let ceiling = (2.8f64 * 2.8 + 16.0).sqrt();
        assert!((paths[1].delay_m - (side - 4.0)).abs() < 1e-12);
        assert!((paths[2].delay_m - (side - 4.0)).abs() < 1e-12);
        assert!((paths[3].delay_m - (floor - 4.0)).abs() < 1e-12);
        assert!((paths[4].delay_m - (ceiling - 4.0)).abs() < 1e-12);
        assert!((paths[1].aoa.sin() + 5.0 / side).abs() < 1e-12);
        assert!((paths[1].aod.sin() - 5.0 / side).abs() < 1e-12);
        assert!((paths[2].aoa.sin() - 5.0 / side).abs() < 1e-12);
        assert_eq!(paths[3].aoa.sin(), 0.0);
        assert_eq!(paths[4].aod.sin(), 0.0);
        // Reflection amplitude = Friis over unfolded length, minus 10 dB.
        let expect = 10f64.powf(-(friis_pathloss_db(side, 60e9).unwrap() + 10.0) / 20.0);
        assert!((paths[1].gain.norm() - expect).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = build_channel(&ChannelParams {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let b = build_channel(&ChannelParams {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a, b);
        let c = build_channel(&ChannelParams {
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.entries(), c.entries());
        // LOS is geometric only.
        assert_eq!(a.paths()[0], c.paths()[0]);
    }

    #[test]
    fn geometry_errors() {
        assert!(matches!(
            build_channel(&los(8.5)),
            Err(ChannelError::OutsideRoom { .. })
        ));
        assert!(build_channel(&los(8.0)).is_ok());
        assert!(matches!(
            build_channel(&los(0.0)),
            Err(ChannelError::Domain(..))
        ));
        let p = ChannelParams {
            max_bounces: 2,
            ..Default::default()
        };
        assert_eq!(build_channel(&p), Err(ChannelError::Bounces(2)));
        let room = RoomGeometry {
            antenna_height_m: 3.0,
            ..Default::default()
        };
        let p = ChannelParams {
            room,
            ..Default::default()
        };
        assert!(matches!(build_channel(&p), Err(ChannelError::Room(_))));
    }

    proptest! {
        #[test]
        fn reconstruction_from_paths(seed in any::<u64>(), d in 0.5f64..8.0) {
            let h = build_channel(&ChannelParams { seed, tx_rx_distance_m: d, ..Default::default() }).unwrap();
            // Independent rebuild straight from the path list.
            let mut sum = DMatrix::<Complex64>::zeros(12, 12);
            for p in h.paths() {
                for r in 0..12 {
                    for t in 0..12 {
                        let phase = PI * (r as f64 * p.aoa.sin() - t as f64 * p.aod.sin());
                        sum[(r, t)] += p.gain * Complex64::from_polar(1.0, phase);
                    }
                }
            }
            let err = (h.entries() - &sum).norm() / sum.norm();
            prop_assert!(err < 1e-12, "relative error {}", err);
        }

        #[test]
        fn los_gain_decreases_with_distance(d in 0.1f64..7.0, step in 0.01f64..1.0) {
            let near = build_channel(&los(d)).unwrap().paths()[0].gain.norm();
            let far = build_channel(&los(d + step)).unwrap().paths()[0].gain.norm();
            prop_assert!(far < near);
        }

        #[test]
        fn channel_is_linear(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let h = build_channel(&ChannelParams { seed, ..Default::default() }).unwrap();
            let f = nalgebra::DVector::from_fn(12, |i, _| Complex64::from_polar(1.0, i as f64 * 0.37));
            let a = Complex64::new(re, im);
            let lhs = h.entries() * f.map(|z| z * a);
            let rhs = (h.entries() * &f).map(|z| z * a);
            prop_assert!((lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
