//! Beam-steering codebooks and their text file format.
//!
//! A codebook file looks like this:
//!
//! ```text
//! N=4 B=2 K=2
//! 0,0,0,0
//! 0,1,2,3
//! ```
//!
//! The header gives the element count, phase bits and number of entries;
//! each following row holds one entry's phase indices in sweep order. `#`
//! starts a comment. When saving, steering labels and non-default element
//! spacing are written as `# theta=<rad>` and `# spacing=<d>` comments,
//! which [`Codebook::parse`] reads back; other readers can ignore them.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::array::{
    quantize_weights, steering_vector, ArrayError, ArrayGeometry, PhaseWeights, SteeringAngle,
};

/// Default number of beams per array.
pub const DEFAULT_NUM_BEAMS: usize = 16;

/// Default half-span of the beam fan, in degrees.
pub const DEFAULT_SPAN_DEG: f64 = 60.0;

#[derive(Debug, Error)]
pub enum CodebookError {
    #[error("codebook has no entries")]
    Empty,
    #[error("invalid angular span ({lo}, {hi})")]
    InvalidSpan { lo: f64, hi: f64 },
    #[error("entry {entry} has {got} elements, expected {expected}")]
    Ragged {
        entry: usize,
        got: usize,
        expected: usize,
    },
    #[error("entry {entry} uses {got}-bit phases, codebook is {expected}-bit")]
    MixedBits {
        entry: usize,
        got: u32,
        expected: u32,
    },
    #[error("{labels} labels for {entries} entries")]
    LabelCount { labels: usize, entries: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> CodebookError {
    CodebookError::Parse {
        line,
        message: message.into(),
    }
}

/// An ordered set of phase-weight vectors; the order is the sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    geometry: ArrayGeometry,
    bits: u32,
    entries: Vec<PhaseWeights>,
    labels: Option<Vec<SteeringAngle>>,
}

impl Codebook {
    pub fn new(
        geometry: ArrayGeometry,
        bits: u32,
        entries: Vec<PhaseWeights>,
        labels: Option<Vec<SteeringAngle>>,
    ) -> Result<Self, CodebookError> {
        if entries.is_empty() {
            return Err(CodebookError::Empty);
        }
        for (entry, w) in entries.iter().enumerate() {
            if w.len() != geometry.num_elements() {
                return Err(CodebookError::Ragged {
                    entry,
                    got: w.len(),
                    expected: geometry.num_elements(),
                });
            }
            if w.bits() != bits {
                return Err(CodebookError::MixedBits {
                    entry,
                    got: w.bits(),
                    expected: bits,
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != entries.len() {
                return Err(CodebookError::LabelCount {
                    labels: labels.len(),
                    entries: entries.len(),
                });
            }
        }
        Ok(Self {
            geometry,
            bits,
            entries,
            labels,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn entries(&self) -> &[PhaseWeights] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&PhaseWeights> {
        self.entries.get(index)
    }

    pub fn labels(&self) -> Option<&[SteeringAngle]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Render in the codebook file format.
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "N={} B={} K={}\n",
            self.geometry.num_elements(),
            self.bits,
            self.entries.len()
        );
        if self.geometry.element_spacing_wavelengths() != ArrayGeometry::DEFAULT_SPACING {
            writeln!(
                out,
                "# spacing={}",
                self.geometry.element_spacing_wavelengths()
            )
            .unwrap();
        }
        for (k, w) in self.entries.iter().enumerate() {
            let row = w
                .phases()
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&row);
            if let Some(labels) = &self.labels {
                write!(out, " # theta={}", labels[k].radians()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parse the codebook file format. Errors name the offending line.
    pub fn parse(text: &str) -> Result<Self, CodebookError> {
        let mut header: Option<(usize, usize, u32, usize)> = None;
        let mut spacing = ArrayGeometry::DEFAULT_SPACING;
        let mut rows: Vec<PhaseWeights> = Vec::new();
        let mut labels: Vec<Option<SteeringAngle>> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let (content, comment) = match raw.split_once('#') {
                Some((c, m)) => (c.trim(), Some(m.trim())),
                None => (raw.trim(), None),
            };

            let Some((elements, _, bits, count)) = header else {
                if content.is_empty() {
                    if let Some(value) = comment.and_then(|m| m.strip_prefix("spacing=")) {
                        spacing = value
                            .trim()
                            .parse()
                            .map_err(|_| parse_err(line_no, format!("bad spacing {value:?}")))?;
                    }
                    continue;
                }
                header = Some(parse_header(content, line_no)?);
                continue;
            };

            if content.is_empty() {
                if let Some(value) = comment.and_then(|m| m.strip_prefix("spacing=")) {
                    spacing = value
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad spacing {value:?}")))?;
                }
                continue;
            }
            if rows.len() == count {
                return Err(parse_err(
                    line_no,
                    format!("more than the {count} entries declared in the header"),
                ));
            }
            let levels = 1u64 << bits;
            let phases = content
                .split(',')
                .map(|field| {
                    let field = field.trim();
                    let v: u64 = field
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("not a phase index: {field:?}")))?;
                    if v >= levels {
                        return Err(parse_err(
                            line_no,
                            format!("phase index {v} does not fit in {bits} bits"),
                        ));
                    }
                    Ok(v as u32)
                })
                .collect::<Result<Vec<_>, _>>()?;
            if phases.len() != elements {
                return Err(parse_err(
                    line_no,
                    format!("{} phase indices, header says N={elements}", phases.len()),
                ));
            }
            let label = match comment.and_then(|m| m.strip_prefix("theta=")) {
                Some(value) => {
                    let theta: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad theta {value:?}")))?;
                    Some(SteeringAngle::new(theta).map_err(|e| parse_err(line_no, e.to_string()))?)
                }
                None => None,
            };
            rows.push(
                PhaseWeights::new(phases, bits).map_err(|e| parse_err(line_no, e.to_string()))?,
            );
            labels.push(label);
        }

        let Some((elements, header_line, bits, count)) = header else {
            return Err(parse_err(text.lines().count().max(1), "missing header"));
        };
        if rows.len() != count {
            return Err(parse_err(
                header_line,
                format!(
                    "header declares K={count} but {} entries follow",
                    rows.len()
                ),
            ));
        }
        let geometry = ArrayGeometry::uniform_linear(elements, spacing)
            .map_err(|e| parse_err(header_line, e.to_string()))?;
        let labels = labels.into_iter().collect::<Option<Vec<_>>>();
        Codebook::new(geometry, bits, rows, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CodebookError> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CodebookError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Returns `(N, line, B, K)`.
fn parse_header(content: &str, line: usize) -> Result<(usize, usize, u32, usize), CodebookError> {
    let mut n = None;
    let mut b = None;
    let mut k = None;
    for token in content.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("malformed header field {token:?}")))?;
        let value: u64 = value
            .parse()
            .map_err(|_| parse_err(line, format!("malformed header value {token:?}")))?;
        let slot = match key {
            "N" => &mut n,
            "B" => &mut b,
            "K" => &mut k,
            _ => return Err(parse_err(line, format!("unknown header field {key:?}"))),
        };
        if slot.replace(value).is_some() {
            return Err(parse_err(line, format!("duplicate header field {key:?}")));
        }
    }
    match (n, b, k) {
        (Some(n), Some(b), Some(k)) if n > 0 && k > 0 && (1..=16).contains(&b) => {
            Ok((n as usize, line, b as u32, k as usize))
        }
        (Some(_), Some(_), Some(_)) => Err(parse_err(line, "header values out of range")),
        _ => Err(parse_err(
            line,
            "header must be `N=<elements> B=<bits> K=<entries>`",
        )),
    }
}

/// Quantized beams whose steering sines are evenly spaced across
/// `[sin(span.0), sin(span.1)]`. A single beam points at the middle of the
/// span.
pub fn generate_beamsteering_codebook(
    geometry: &ArrayGeometry,
    bits: u32,
    num_beams: usize,
    span: (f64, f64),
) -> Result<Codebook, CodebookError> {
    if num_beams == 0 {
        return Err(CodebookError::Empty);
    }
    let (lo, hi) = span;
    let lo_angle = SteeringAngle::new(lo).map_err(|_| CodebookError::InvalidSpan { lo, hi })?;
    let hi_angle = SteeringAngle::new(hi).map_err(|_| CodebookError::InvalidSpan { lo, hi })?;
    if lo > hi {
        return Err(CodebookError::InvalidSpan { lo, hi });
    }
    let (s_lo, s_hi) = (lo_angle.sin(), hi_angle.sin());
    let sines: Vec<f64> = if num_beams == 1 {
        vec![0.5 * (s_lo + s_hi)]
    } else {
        let step = (s_hi - s_lo) / (num_beams - 1) as f64;
        (0..num_beams).map(|k| s_lo + step * k as f64).collect()
    };

    let mut entries = Vec::with_capacity(num_beams);
    let mut labels = Vec::with_capacity(num_beams);
    for s in sines {
        let angle = SteeringAngle::from_sine(s)?;
        entries.push(quantize_weights(&steering_vector(geometry, angle), bits)?);
        labels.push(angle);
    }
    Codebook::new(*geometry, bits, entries, Some(labels))
}

/// The default 16-beam, ±60° fan.
pub fn default_codebook(geometry: &ArrayGeometry, bits: u32) -> Result<Codebook, CodebookError> {
    let span = DEFAULT_SPAN_DEG.to_radians();
    generate_beamsteering_codebook(geometry, bits, DEFAULT_NUM_BEAMS, (-span, span))
}
