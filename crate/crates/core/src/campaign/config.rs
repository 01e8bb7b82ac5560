//! Flat `key = value` campaign configuration.
//!
//! ```text
//! # distances in metres, powers in dBm
//! distances_m = 1, 2, 4, 8
//! power_levels_dbm = 0, 5, 10, 15, 20
//! noise_mode = awgn
//! seed = 7
//! ```
//!
//! Every key is optional; omitted keys keep their defaults. Relative
//! codebook paths are resolved against the config file's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::array::{ArrayGeometry, DEFAULT_PHASE_BITS};
use crate::baseband::{
    EvmConvention, Noise, DEFAULT_NOISE_POWER_DBM, DEFAULT_NUM_SYMBOLS, DEFAULT_SAMPLES_PER_SYMBOL,
};
use crate::channel::{RoomGeometry, DEFAULT_CARRIER_HZ, DEFAULT_REFLECTION_LOSS_DB};
use crate::codebook::{
    generate_beamsteering_codebook, Codebook, CodebookError, DEFAULT_NUM_BEAMS, DEFAULT_SPAN_DEG,
};
use crate::protocol::{LinkConditions, ProtocolConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Awgn,
    Frozen,
    Off,
}

impl FromStr for NoiseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "awgn" => Ok(Self::Awgn),
            "frozen" => Ok(Self::Frozen),
            "off" => Ok(Self::Off),
            other => Err(format!("unknown noise mode {other:?} (awgn|frozen|off)")),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Awgn => "awgn",
            Self::Frozen => "frozen",
            Self::Off => "off",
        })
    }
}

/// Which datagram transport protocol-mode sweeps run over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    Memory,
    Udp,
}

impl FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memory" => Ok(Self::Memory),
            "udp" => Ok(Self::Udp),
            other => Err(format!("unknown transport {other:?} (memory|udp)")),
        }
    }
}

impl std::fmt::Display for TransportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Memory => "memory",
            Self::Udp => "udp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub distances_m: Vec<f64>,
    pub power_levels_dbm: Vec<f64>,
    pub tx_codebook: Option<PathBuf>,
    pub rx_codebook: Option<PathBuf>,
    pub num_elements: usize,
    pub element_spacing_wavelengths: f64,
    pub phase_bits: u32,
    pub num_beams: usize,
    /// Beams span `±beam_span_deg` around broadside.
    pub beam_span_deg: f64,
    pub room: RoomGeometry,
    pub carrier_hz: f64,
    pub reflection_loss_db: f64,
    pub max_bounces: u32,
    pub noise_mode: NoiseMode,
    pub noise_power_dbm: f64,
    pub num_symbols: usize,
    pub samples_per_symbol: u32,
    pub evm_log_base: EvmConvention,
    pub seed: u64,
    pub transport: TransportKind,
    pub drop_probability: f64,
    pub retransmit_timeout_ms: u64,
    pub max_retries: u32,
    pub idle_limit_ms: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let room = RoomGeometry::default();
        Self {
            distances_m: vec![1.0, 2.0, 4.0, 8.0],
            power_levels_dbm: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            tx_codebook: None,
            rx_codebook: None,
            num_elements: ArrayGeometry::DEFAULT_ELEMENTS,
            element_spacing_wavelengths: ArrayGeometry::DEFAULT_SPACING,
            phase_bits: DEFAULT_PHASE_BITS,
            num_beams: DEFAULT_NUM_BEAMS,
            beam_span_deg: DEFAULT_SPAN_DEG,
            room,
            carrier_hz: DEFAULT_CARRIER_HZ,
            reflection_loss_db: DEFAULT_REFLECTION_LOSS_DB,
            max_bounces: 1,
            noise_mode: NoiseMode::Awgn,
            noise_power_dbm: DEFAULT_NOISE_POWER_DBM,
            num_symbols: DEFAULT_NUM_SYMBOLS,
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
            evm_log_base: EvmConvention::Db10,
            seed: 0,
            transport: TransportKind::Memory,
            drop_probability: 0.0,
            retransmit_timeout_ms: 200,
            max_retries: 10,
            idle_limit_ms: 30_000,
        }
    }
}

fn parse_value<T: FromStr>(value: &str, line: usize, key: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::Line {
        line,
        message: format!("{key}: {e}"),
    })
}

fn parse_list(value: &str, line: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse_value(v.trim(), line, key))
        .collect()
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Line {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "distances_m" => c.distances_m = parse_list(value, line, key)?,
                "power_levels_dbm" => c.power_levels_dbm = parse_list(value, line, key)?,
                "tx_codebook" => c.tx_codebook = Some(PathBuf::from(value)),
                "rx_codebook" => c.rx_codebook = Some(PathBuf::from(value)),
                "num_elements" => c.num_elements = parse_value(value, line, key)?,
                "element_spacing_wavelengths" => {
                    c.element_spacing_wavelengths = parse_value(value, line, key)?
                }
                "phase_bits" => c.phase_bits = parse_value(value, line, key)?,
                "num_beams" => c.num_beams = parse_value(value, line, key)?,
                "beam_span_deg" => c.beam_span_deg = parse_value(value, line, key)?,
                "room_width_m" => c.room.width_m = parse_value(value, line, key)?,
                "room_length_m" => c.room.length_m = parse_value(value, line, key)?,
                "ceiling_height_m" => c.room.ceiling_height_m = parse_value(value, line, key)?,
                "antenna_height_m" => c.room.antenna_height_m = parse_value(value, line, key)?,
                "rx_offset_from_back_wall_m" => {
                    c.room.rx_offset_from_back_wall_m = parse_value(value, line, key)?
                }
                "carrier_hz" => c.carrier_hz = parse_value(value, line, key)?,
                "reflection_loss_db" => c.reflection_loss_db = parse_value(value, line, key)?,
                "max_bounces" => c.max_bounces = parse_value(value, line, key)?,
                "noise_mode" => c.noise_mode = parse_value(value, line, key)?,
                "noise_power_dbm" => c.noise_power_dbm = parse_value(value, line, key)?,
                "num_symbols" => c.num_symbols = parse_value(value, line, key)?,
                "samples_per_symbol" => c.samples_per_symbol = parse_value(value, line, key)?,
                "evm_log_base" => c.evm_log_base = parse_value(value, line, key)?,
                "seed" => c.seed = parse_value(value, line, key)?,
                "transport" => c.transport = parse_value(value, line, key)?,
                "drop_probability" => c.drop_probability = parse_value(value, line, key)?,
                "retransmit_timeout_ms" => c.retransmit_timeout_ms = parse_value(value, line, key)?,
                "max_retries" => c.max_retries = parse_value(value, line, key)?,
                "idle_limit_ms" => c.idle_limit_ms = parse_value(value, line, key)?,
                other => {
                    return Err(ConfigError::Line {
                        line,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Read a config file, resolving codebook paths relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.tx_codebook, &mut c.rx_codebook]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.distances_m.is_empty() {
            return bad("distances_m is empty".into());
        }
        if let Some(d) = self
            .distances_m
            .iter()
            .find(|d| !(d.is_finite() && **d > 0.0))
        {
            return bad(format!("distance {d} is not positive"));
        }
        if self.power_levels_dbm.is_empty() {
            return bad("power_levels_dbm is empty".into());
        }
        if self.power_levels_dbm.iter().any(|p| !p.is_finite())
            || self.power_levels_dbm.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("power_levels_dbm must be finite and strictly increasing".into());
        }
        if self.num_symbols == 0 {
            return bad("num_symbols must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.drop_probability) || self.drop_probability == 1.0 {
            return bad(format!(
                "drop_probability {} must be in [0, 1)",
                self.drop_probability
            ));
        }
        if !self.noise_power_dbm.is_finite() {
            return bad("noise_power_dbm must be finite".into());
        }
        if !(self.beam_span_deg >= 0.0 && self.beam_span_deg < 90.0) {
            return bad(format!(
                "beam_span_deg {} must be in [0, 90)",
                self.beam_span_deg
            ));
        }
        if self.retransmit_timeout_ms == 0 {
            return bad("retransmit_timeout_ms must be positive".into());
        }
        self.room
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.geometry()
            .map(|_| ())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, crate::array::ArrayError> {
        ArrayGeometry::uniform_linear(self.num_elements, self.element_spacing_wavelengths)
    }

    pub fn noise(&self) -> Noise {
        match self.noise_mode {
            NoiseMode::Awgn => Noise::Awgn {
                power_dbm: self.noise_power_dbm,
            },
            NoiseMode::Frozen => Noise::Frozen {
                power_dbm: self.noise_power_dbm,
            },
            NoiseMode::Off => Noise::Off,
        }
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            retransmit_timeout: Duration::from_millis(self.retransmit_timeout_ms),
            max_retries: self.max_retries,
            idle_limit: Duration::from_millis(self.idle_limit_ms),
        }
    }

    pub fn link_conditions(&self, seed: u64) -> LinkConditions {
        LinkConditions::lossy(self.drop_probability, seed)
    }

    fn codebook(&self, path: &Option<PathBuf>) -> Result<Codebook, CodebookError> {
        match path {
            Some(p) => Codebook::load(p),
            None => {
                let span = self.beam_span_deg.to_radians();
                generate_beamsteering_codebook(
                    &self.geometry()?,
                    self.phase_bits,
                    self.num_beams,
                    (-span, span),
                )
            }
        }
    }

    /// The transmit codebook: loaded from `tx_codebook` or generated.
    pub fn tx_codebook(&self) -> Result<Codebook, CodebookError> {
        self.codebook(&self.tx_codebook)
    }

    /// The receive codebook: loaded from `rx_codebook` or generated.
    pub fn rx_codebook(&self) -> Result<Codebook, CodebookError> {
        self.codebook(&self.rx_codebook)
    }

    /// Render as a config file that parses back to `self`.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("distances_m", join(&self.distances_m));
        kv("power_levels_dbm", join(&self.power_levels_dbm));
        if let Some(p) = &self.tx_codebook {
            kv("tx_codebook", p.display().to_string());
        }
        if let Some(p) = &self.rx_codebook {
            kv("rx_codebook", p.display().to_string());
        }
        kv("num_elements", self.num_elements.to_string());
        kv(
            "element_spacing_wavelengths",
            self.element_spacing_wavelengths.to_string(),
        );
        kv("phase_bits", self.phase_bits.to_string());
        kv("num_beams", self.num_beams.to_string());
        kv("beam_span_deg", self.beam_span_deg.to_string());
        kv("room_width_m", self.room.width_m.to_string());
        kv("room_length_m", self.room.length_m.to_string());
        kv("ceiling_height_m", self.room.ceiling_height_m.to_string());
        kv("antenna_height_m", self.room.antenna_height_m.to_string());
        kv(
            "rx_offset_from_back_wall_m",
            self.room.rx_offset_from_back_wall_m.to_string(),
        );
        kv("carrier_hz", self.carrier_hz.to_string());
        kv("reflection_loss_db", self.reflection_loss_db.to_string());
        kv("max_bounces", self.max_bounces.to_string());
        kv("noise_mode", self.noise_mode.to_string());
        kv("noise_power_dbm", self.noise_power_dbm.to_string());
        kv("num_symbols", self.num_symbols.to_string());
        kv("samples_per_symbol", self.samples_per_symbol.to_string());
        kv("evm_log_base", self.evm_log_base.to_string());
        kv("seed", self.seed.to_string());
        kv("transport", self.transport.to_string());
        kv("drop_probability", self.drop_probability.to_string());
        kv(
            "retransmit_timeout_ms",
            self.retransmit_timeout_ms.to_string(),
        );
        kv("max_retries", self.max_retries.to_string());
        kv("idle_limit_ms", self.idle_limit_ms.to_string());
        s
    }
}
