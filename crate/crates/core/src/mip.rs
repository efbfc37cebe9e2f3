//! Maximum-intensity-projection defect detection.
//!
//! For each scan position z the first guided-wave arrivals of the mode band
//! of interest fall inside the position-dependent window
//! `T1(z) = (z − z₀)/c_g,high` to `T2(z) = (z − z₀)/c_g,low`. The intensity
//! `I(z) = max |u(z, t)| over T1 ≤ t ≤ T2` highlights local amplitude
//! anomalies while rejecting end reflections, which arrive after T2 across
//! the inspected span.

use crate::dataset::ScanDataset;
use crate::signal::{apply_filter, FilterSpec, SignalError};
use crate::wavefield::LineField;
use rayon::prelude::*;
use thiserror::Error;

/// MIP failures.
#[derive(Debug, Error)]
pub enum MipError {
    #[error("velocity bounds must satisfy c_g_high > c_g_low > 0, got high {high}, low {low}")]
    BadVelocityBounds { high: f64, low: f64 },
    #[error("position {z} mm behind the source at {z0} mm")]
    PositionBehindSource { z: f64, z0: f64 },
    #[error(
        "trace too short for the window at z = {z} mm: needs {required} s, has {available} s"
    )]
    TraceTooShort {
        z: f64,
        required: f64,
        available: f64,
    },
    #[error("threshold must be in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("line `{line}`: {detail}")]
    Line { line: String, detail: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Fastest/slowest relevant group velocities and the wave source position.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VelocityBounds {
    /// Fastest relevant group velocity (m/s).
    pub cg_high_m_per_s: f64,
    /// Slowest relevant group velocity (m/s).
    pub cg_low_m_per_s: f64,
    /// Source position z₀ along the line (mm); for reciprocal scans this is
    /// the fixed sensor position of the actual measurement.
    pub source_z_mm: f64,
}

impl VelocityBounds {
    pub fn new(cg_high: f64, cg_low: f64, source_z_mm: f64) -> Result<Self, MipError> {
        if !(cg_high > cg_low && cg_low > 0.0) {
            return Err(MipError::BadVelocityBounds {
                high: cg_high,
                low: cg_low,
            });
        }
        Ok(VelocityBounds {
            cg_high_m_per_s: cg_high,
            cg_low_m_per_s: cg_low,
            source_z_mm,
        })
    }
}

/// Early-arrival window `(T1, T2)` in seconds for position `z` (mm).
pub fn window_bounds(z_mm: f64, bounds: &VelocityBounds) -> Result<(f64, f64), MipError> {
    let dz = z_mm - bounds.source_z_mm;
    if dz < 0.0 {
        return Err(MipError::PositionBehindSource {
            z: z_mm,
            z0: bounds.source_z_mm,
        });
    }
    let d_m = dz * 1e-3;
    Ok((d_m / bounds.cg_high_m_per_s, d_m / bounds.cg_low_m_per_s))
}

/// Per-line normalization, or one maximum across the whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    PerLine,
    #[default]
    Global,
}

/// MIP tuning knobs.
#[derive(Debug, Clone)]
pub struct MipOptions {
    /// Minimum window length in samples; shorter windows are widened.
    pub min_window_samples: usize,
    /// Points closer than this to the source are dropped: the near field is
    /// dominated by the impact itself rather than by guided modes.
    pub near_exclusion_mm: f64,
    /// Band-pass applied per trace before projecting, if any.
    pub prefilter: Option<FilterSpec>,
    /// Profile normalization policy.
    pub normalization: Normalization,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            min_window_samples: 16,
            near_exclusion_mm: 20.0,
            prefilter: Some(FilterSpec::bandpass(60.0, 600.0, 4, true)),
            normalization: Normalization::Global,
        }
    }
}

/// Intensity profile of one line.
#[derive(Debug, Clone)]
pub struct IntensityProfile {
    pub line_id: String,
    /// Positions kept after near-source exclusion (mm).
    pub z_mm: Vec<f64>,
    /// Raw projection values (displacement units).
    pub raw: Vec<f64>,
    /// Normalized values in [0, 1].
    pub normalized: Vec<f64>,
}

impl IntensityProfile {
    /// Span of the profiled positions (mm).
    pub fn span_mm(&self) -> f64 {
        match (self.z_mm.first(), self.z_mm.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Computes the raw MIP profile of one line field.
///
/// Window edges are placed on the sample grid outward (floor/ceil) so the
/// first arrival is never clipped; degenerate windows are widened to
/// `min_window_samples`.
pub fn mip_profile(
    line_id: &str,
    field: &LineField,
    bounds: &VelocityBounds,
    opts: &MipOptions,
) -> Result<IntensityProfile, MipError> {
    let n = field.u.first().map(|t| t.len()).unwrap_or(0);
    if n == 0 {
        return Err(MipError::Line {
            line: line_id.into(),
            detail: "empty field".into(),
        });
    }
    let available = field.t0 + (n - 1) as f64 * field.dt;

    // filter once per point if requested
    let fs = 1.0 / field.dt;
    let filtered: Vec<Vec<f64>> = match &opts.prefilter {
        Some(spec) => field
            .u
            .par_iter()
            .map(|tr| apply_filter(tr, fs, spec))
            .collect::<Result<_, _>>()?,
        None => field.u.clone(),
    };

    let mut z_keep = Vec::new();
    let mut raw = Vec::new();
    for (i, &z) in field.z_mm.iter().enumerate() {
        let (t1, t2) = window_bounds(z, bounds)?;
        if t2 > available {
            return Err(MipError::TraceTooShort {
                z,
                required: t2,
                available,
            });
        }
        if z - bounds.source_z_mm < opts.near_exclusion_mm {
            continue;
        }
        let mut i1 = (((t1 - field.t0) / field.dt).floor() as isize).max(0) as usize;
        let mut i2 = (((t2 - field.t0) / field.dt).ceil() as usize).min(n - 1);
        if i2 + 1 - i1 < opts.min_window_samples {
            let deficit = opts.min_window_samples - (i2 + 1 - i1);
            i2 = (i2 + deficit).min(n - 1);
            if i2 + 1 - i1 < opts.min_window_samples {
                i1 = i1.saturating_sub(opts.min_window_samples - (i2 + 1 - i1));
            }
        }
        let m = filtered[i][i1..=i2]
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        z_keep.push(z);
        raw.push(m);
    }

    let max = raw.iter().cloned().fold(0.0f64, f64::max);
    let normalized = if max > 0.0 {
        raw.iter().map(|&v| v / max).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Ok(IntensityProfile {
        line_id: line_id.into(),
        z_mm: z_keep,
        raw,
        normalized,
    })
}

/// A line that failed profiling, with the reason.
#[derive(Debug)]
pub struct LineIssue {
    pub line_id: String,
    pub error: MipError,
}

/// Profiles every line of the dataset. Failing lines are flagged and skipped;
/// the remaining profiles are returned (partial result contract).
pub fn mip_map(
    dataset: &ScanDataset,
    bounds: &VelocityBounds,
    opts: &MipOptions,
) -> (Vec<IntensityProfile>, Vec<LineIssue>) {
    let results: Vec<Result<IntensityProfile, LineIssue>> = dataset
        .lines
        .par_iter()
        .map(|line| {
            let field = LineField::from_line(line).map_err(|e| LineIssue {
                line_id: line.line_id.clone(),
                error: MipError::Line {
                    line: line.line_id.clone(),
                    detail: e.to_string(),
                },
            })?;
            mip_profile(&line.line_id, &field, bounds, opts).map_err(|e| LineIssue {
                line_id: line.line_id.clone(),
                error: e,
            })
        })
        .collect();

    let mut profiles = Vec::new();
    let mut issues = Vec::new();
    for r in results {
        match r {
            Ok(p) => profiles.push(p),
            Err(issue) => issues.push(issue),
        }
    }

    if opts.normalization == Normalization::Global {
        let global_max = profiles
            .iter()
            .flat_map(|p| p.raw.iter())
            .cloned()
            .fold(0.0f64, f64::max);
        if global_max > 0.0 {
            for p in &mut profiles {
                p.normalized = p.raw.iter().map(|&v| v / global_max).collect();
            }
        }
    }
    (profiles, issues)
}

/// A contiguous super-threshold run reported as a defect indication.
#[derive(Debug, Clone, PartialEq)]
pub struct Indication {
    pub line_id: String,
    /// Intensity-weighted centroid of the run (mm).
    pub z_center_mm: f64,
    /// Run extent (mm).
    pub extent_mm: f64,
    /// Peak normalized intensity inside the run.
    pub peak: f64,
}

/// Runs wider than this fraction of the profiled span are treated as global
/// baseline elevation rather than a localized indication.
pub const DEFAULT_MAX_EXTENT_FRACTION: f64 = 0.25;

/// Extracts indications: contiguous runs of normalized intensity ≥
/// `threshold` with extent in `[min_extent_mm, max_extent]`, sorted by peak
/// descending. `max_extent_mm = None` applies
/// [`DEFAULT_MAX_EXTENT_FRACTION`] of each profile's span.
pub fn locate_indications(
    profiles: &[IntensityProfile],
    threshold: f64,
    min_extent_mm: f64,
    max_extent_mm: Option<f64>,
) -> Result<Vec<Indication>, MipError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MipError::BadThreshold(threshold));
    }
    let mut out = Vec::new();
    for p in profiles {
        let max_extent = max_extent_mm.unwrap_or(DEFAULT_MAX_EXTENT_FRACTION * p.span_mm());
        let mut i = 0;
        while i < p.normalized.len() {
            if p.normalized[i] < threshold {
                i += 1;
                continue;
            }
            let start = i;
            while i < p.normalized.len() && p.normalized[i] >= threshold {
                i += 1;
            }
            let end = i - 1;
            let extent = p.z_mm[end] - p.z_mm[start];
            if extent < min_extent_mm || extent > max_extent {
                continue;
            }
            let mut wsum = 0.0;
            let mut zsum = 0.0;
            let mut peak = 0.0f64;
            for j in start..=end {
                wsum += p.normalized[j];
                zsum += p.normalized[j] * p.z_mm[j];
                peak = peak.max(p.normalized[j]);
            }
            out.push(Indication {
                line_id: p.line_id.clone(),
                z_center_mm: zsum / wsum,
                extent_mm: extent,
                peak,
            });
        }
    }
    out.sort_by(|a, b| b.peak.partial_cmp(&a.peak).unwrap());
    Ok(out)
}

/// Profile CSV: `line_id,z_mm,I_norm,I_raw`.
pub fn write_profiles_csv(
    profiles: &[IntensityProfile],
    path: &std::path::Path,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "line_id,z_mm,I_norm,I_raw")?;
    for p in profiles {
        for i in 0..p.z_mm.len() {
            writeln!(w, "{},{},{},{}", p.line_id, p.z_mm[i], p.normalized[i], p.raw[i])?;
        }
    }
    w.flush()
}

/// Indications CSV: `line_id,z_center_mm,extent_mm,peak`.
pub fn write_indications_csv(
    indications: &[Indication],
    path: &std::path::Path,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "line_id,z_center_mm,extent_mm,peak")?;
    for ind in indications {
        writeln!(
            w,
            "{},{},{},{}",
            ind.line_id, ind.z_center_mm, ind.extent_mm, ind.peak
        )?;
    }
    w.flush()
}
