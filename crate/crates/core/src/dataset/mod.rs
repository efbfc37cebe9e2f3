//! Scan-dataset data model and on-disk format.
//!
//! A [`ScanDataset`] holds the per-measurement-line, per-excitation-point
//! traces of a multi-point impact scan together with geometry metadata.
//! The directory format is a UTF-8 JSON manifest plus one raw binary trace
//! blob per scan line (little-endian 32-bit floats, `[point][channel][sample]`
//! layout). See [`io`] for reading/writing and [`export`] for plot products.

mod export;
mod io;

pub use export::{export_heatmap, export_pointcloud, ColorScale, Grid2};
pub use io::{read_dataset, write_dataset, FORMAT_VERSION_MAJOR, FORMAT_VERSION_MINOR};

use crate::safe::SectionProfile;
use crate::Axis;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from dataset validation, IO, and exports.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("trace length mismatch in line {line} point {point}: {detail}")]
    TraceLengthMismatch {
        line: String,
        point: usize,
        detail: String,
    },
    #[error("line {line}: {detail}")]
    InvalidLine { line: String, detail: String },
    #[error("dataset field `{field}` invalid: {detail}")]
    InvalidField { field: String, detail: String },
    #[error("missing manifest at {0}")]
    MissingManifest(std::path::PathBuf),
    #[error("missing trace file {0}")]
    MissingTraceFile(std::path::PathBuf),
    #[error("trace blob {path} truncated: expected {expected} bytes, found {actual}")]
    TruncatedBlob {
        path: std::path::PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("unsupported manifest version {found} (reader supports major {supported})")]
    VersionMismatch { found: String, supported: u32 },
    #[error("manifest parse error: {0}")]
    ManifestParse(#[from] serde_json::Error),
    #[error("non-finite value at row {row}, col {col} in export grid")]
    NonFiniteGrid { row: usize, col: usize },
    #[error("time {t} s outside record duration [{t0} s, {t1} s]")]
    TimeOutOfRange { t: f64, t0: f64, t1: f64 },
    #[error("grid shape mismatch: {0}")]
    GridShape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Physical unit carried by a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Newtons.
    Force,
    /// m/s².
    Acceleration,
    /// m/s.
    Velocity,
    /// Meters.
    Displacement,
}

/// A uniformly sampled time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Sample values in the unit given by `unit`.
    pub samples: Vec<f64>,
    /// Sampling interval (s).
    pub dt: f64,
    /// Time of the first sample relative to the trigger (s).
    pub t0: f64,
    /// Channel unit tag.
    pub unit: Unit,
}

impl Trace {
    /// Validated constructor: `dt > 0` and at least 2 samples.
    pub fn new(samples: Vec<f64>, dt: f64, t0: f64, unit: Unit) -> Result<Self, DatasetError> {
        if !(dt > 0.0) {
            return Err(DatasetError::InvalidTrace(format!("dt must be > 0, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(DatasetError::InvalidTrace(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        Ok(Trace {
            samples,
            dt,
            t0,
            unit,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the trace holds no samples (cannot happen for validated traces).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of the last sample (s).
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.samples.len() - 1) as f64 * self.dt
    }

    /// Largest absolute sample value.
    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Sample index for time `t`, rounded to the nearest sample.
    pub fn index_at(&self, t: f64) -> Result<usize, DatasetError> {
        let idx = ((t - self.t0) / self.dt).round();
        if idx < 0.0 || idx as usize >= self.samples.len() {
            return Err(DatasetError::TimeOutOfRange {
                t,
                t0: self.t0,
                t1: self.t_end(),
            });
        }
        Ok(idx as usize)
    }
}

/// One excitation point: the hammer force, the 3-axis acceleration response,
/// and (after integration) optional displacement traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRecord {
    /// Excitation point in beam coordinates (mm).
    pub excitation_point_mm: [f64; 3],
    /// Hammer force trace (N).
    pub force: Trace,
    /// Acceleration traces for x, y, z (m/s²).
    pub accel: [Trace; 3],
    /// Sample index of the soft trigger within the traces.
    pub trigger_index: usize,
    /// Peak absolute force (N).
    pub peak_force_n: f64,
    /// Displacement traces for x, y, z (m), present once integrated.
    pub displacement: Option<[Trace; 3]>,
}

impl ImpactRecord {
    /// All traces of the record in channel order.
    pub fn traces(&self) -> Vec<&Trace> {
        let mut out = vec![&self.force, &self.accel[0], &self.accel[1], &self.accel[2]];
        if let Some(disp) = &self.displacement {
            out.extend(disp.iter());
        }
        out
    }
}

/// A measurement line: a straight row of excitation points along the beam axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanLine {
    /// Line label (ML1…ML8 in typical scans).
    pub line_id: String,
    /// 3D position of the line's z = 0 reference (mm).
    pub origin_mm: [f64; 3],
    /// Excitation point positions along the beam axis (mm), strictly increasing.
    pub positions_mm: Vec<f64>,
    /// Displacement component normal to the surface along this line.
    pub normal_component: Axis,
    /// Per-point records, same length as `positions_mm`.
    pub records: Vec<ImpactRecord>,
}

impl ScanLine {
    /// True when every record carries displacement traces.
    pub fn has_displacement(&self) -> bool {
        self.records.iter().all(|r| r.displacement.is_some())
    }

    /// Displacement trace of the line's normal component at point `i`.
    pub fn normal_displacement(&self, i: usize) -> Option<&Trace> {
        self.records[i]
            .displacement
            .as_ref()
            .map(|d| &d[self.normal_component.index()])
    }
}

/// Optional model-defect descriptor (a local wall thinning).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectDescriptor {
    /// Center position along the beam (mm).
    pub position_mm: f64,
    /// Extent along the beam (mm).
    pub length_mm: f64,
    /// Thickness reduction (mm).
    pub depth_mm: f64,
}

/// Beam geometry: cross-section profile, length, supports, optional defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryMeta {
    /// Cross-section profile of the waveguide.
    pub section: SectionProfile,
    /// Beam length (mm).
    pub length_mm: f64,
    /// Support contact positions along the beam (mm).
    pub support_positions_mm: Vec<f64>,
    /// Artificial defect, if present.
    pub defect: Option<DefectDescriptor>,
}

impl GeometryMeta {
    fn validate(&self) -> Result<(), DatasetError> {
        if !(self.length_mm > 0.0) {
            return Err(DatasetError::InvalidField {
                field: "length_mm".into(),
                detail: format!("must be > 0, got {}", self.length_mm),
            });
        }
        if let Some(d) = &self.defect {
            let (z0, z1) = (
                d.position_mm - d.length_mm / 2.0,
                d.position_mm + d.length_mm / 2.0,
            );
            if z0 < 0.0 || z1 > self.length_mm {
                return Err(DatasetError::InvalidField {
                    field: "defect".into(),
                    detail: format!(
                        "defect span [{z0}, {z1}] mm outside beam [0, {}] mm",
                        self.length_mm
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Data provenance tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Synthetic,
}

/// A complete multi-line impact scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    /// Measurement lines.
    pub lines: Vec<ScanLine>,
    /// Fixed acceleration-sensor position (mm).
    pub sensor_position_mm: [f64; 3],
    /// Common sampling rate (Hz).
    pub sample_rate_hz: f64,
    /// Beam geometry.
    pub geometry: GeometryMeta,
    /// Measured or synthetic.
    pub provenance: Provenance,
}

/// Allowed relative deviation of point spacing within a line.
pub const SPACING_TOLERANCE: f64 = 0.01;

impl ScanDataset {
    /// Checks every dataset invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(DatasetError::InvalidField {
                field: "sample_rate_hz".into(),
                detail: format!("must be > 0, got {}", self.sample_rate_hz),
            });
        }
        self.geometry.validate()?;
        let dt_expected = 1.0 / self.sample_rate_hz;
        for line in &self.lines {
            line_validate(line, dt_expected)?;
        }
        Ok(())
    }
}

fn line_validate(line: &ScanLine, dt_expected: f64) -> Result<(), DatasetError> {
    if line.positions_mm.len() != line.records.len() {
        return Err(DatasetError::InvalidLine {
            line: line.line_id.clone(),
            detail: format!(
                "{} positions but {} records",
                line.positions_mm.len(),
                line.records.len()
            ),
        });
    }
    if line.positions_mm.is_empty() {
        return Err(DatasetError::InvalidLine {
            line: line.line_id.clone(),
            detail: "line has no points".into(),
        });
    }
    // Strictly increasing, uniform within tolerance.
    if line.positions_mm.len() >= 2 {
        let d0 = line.positions_mm[1] - line.positions_mm[0];
        if !(d0 > 0.0) {
            return Err(DatasetError::InvalidLine {
                line: line.line_id.clone(),
                detail: "positions not strictly increasing".into(),
            });
        }
        for w in line.positions_mm.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) {
                return Err(DatasetError::InvalidLine {
                    line: line.line_id.clone(),
                    detail: "positions not strictly increasing".into(),
                });
            }
            if (d - d0).abs() > SPACING_TOLERANCE * d0 {
                return Err(DatasetError::InvalidLine {
                    line: line.line_id.clone(),
                    detail: format!(
                        "non-uniform spacing: {d} mm vs {d0} mm exceeds {:.0}% tolerance",
                        SPACING_TOLERANCE * 100.0
                    ),
                });
            }
        }
    }
    let has_disp = line.records.first().map(|r| r.displacement.is_some());
    for (i, rec) in line.records.iter().enumerate() {
        let n = rec.force.len();
        let dt = rec.force.dt;
        let t0 = rec.force.t0;
        for tr in rec.traces() {
            if tr.len() != n {
                return Err(DatasetError::TraceLengthMismatch {
                    line: line.line_id.clone(),
                    point: i,
                    detail: format!("{} vs {} samples", tr.len(), n),
                });
            }
            if (tr.dt - dt).abs() > 1e-12 * dt || (tr.t0 - t0).abs() > 1e-9 {
                return Err(DatasetError::InvalidLine {
                    line: line.line_id.clone(),
                    detail: format!("point {i}: traces disagree on dt or t0"),
                });
            }
        }
        if (dt - dt_expected).abs() > 1e-9 * dt_expected {
            return Err(DatasetError::InvalidLine {
                line: line.line_id.clone(),
                detail: format!(
                    "point {i}: trace dt {dt} s inconsistent with dataset sample rate"
                ),
            });
        }
        if !(rec.peak_force_n > 0.0) {
            return Err(DatasetError::InvalidLine {
                line: line.line_id.clone(),
                detail: format!("point {i}: peak_force must be > 0"),
            });
        }
        let actual_peak = rec.force.peak_abs();
        if (actual_peak - rec.peak_force_n).abs() > 1e-6 * rec.peak_force_n.max(actual_peak) {
            return Err(DatasetError::InvalidLine {
                line: line.line_id.clone(),
                detail: format!(
                    "point {i}: peak_force {} N does not match max |force| {} N",
                    rec.peak_force_n, actual_peak
                ),
            });
        }
        if rec.trigger_index >= n {
            return Err(DatasetError::InvalidLine {
                line: line.line_id.clone(),
                detail: format!("point {i}: trigger_index {} out of bounds", rec.trigger_index),
            });
        }
        if rec.displacement.is_some() != has_disp.unwrap_or(false) {
            return Err(DatasetError::InvalidLine {
                line: line.line_id.clone(),
                detail: format!("point {i}: displacement channels not uniform across line"),
            });
        }
    }
    Ok(())
}
