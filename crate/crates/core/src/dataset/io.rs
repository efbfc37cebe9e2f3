//! Manifest + binary blob reader/writer for scan datasets.
//!
//! Layout on disk:
//!
//! ```text
//! dataset/
//!   manifest.json          UTF-8 JSON, schema below
//!   ML1.f32                raw little-endian f32, [point][channel][sample]
//!   ML2.f32
//!   ...
//! ```
//!
//! Channel order within a blob is fixed: `force, ax, ay, az` and, when the
//! dataset carries displacement, `ux, uy, uz`. Positions are stored in mm,
//! rates in Hz. Readers reject manifests with an unknown major version.

use super::{
    DatasetError, GeometryMeta, ImpactRecord, Provenance, ScanDataset, ScanLine, Trace, Unit,
};
use crate::Axis;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Major format version; readers reject other majors.
pub const FORMAT_VERSION_MAJOR: u32 = 1;
/// Minor format version; informational.
pub const FORMAT_VERSION_MINOR: u32 = 0;

const CHANNELS_BASE: [&str; 4] = ["force", "ax", "ay", "az"];
const CHANNELS_DISP: [&str; 3] = ["ux", "uy", "uz"];

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    sample_rate_hz: f64,
    sensor_position_mm: [f64; 3],
    provenance: Provenance,
    beam_geometry: GeometryMeta,
    lines: Vec<LineEntry>,
}

#[derive(Serialize, Deserialize)]
struct LineEntry {
    line_id: String,
    normal_component: Axis,
    origin_mm: [f64; 3],
    positions_mm: Vec<f64>,
    trace_file: String,
    channels: Vec<String>,
    samples_per_trace: usize,
    t0_s: f64,
    excitation_points_mm: Vec<[f64; 3]>,
    trigger_indices: Vec<usize>,
    peak_forces_n: Vec<f64>,
}

/// Writes `dataset` to `path` (created if absent) as manifest + per-line blobs.
///
/// The dataset is validated first; a freshly written dataset always reads
/// back equal to the input provided its samples are f32-representable (the
/// blob stores 32-bit floats).
pub fn write_dataset(dataset: &ScanDataset, path: &Path) -> Result<(), DatasetError> {
    dataset.validate()?;
    fs::create_dir_all(path)?;

    let mut entries = Vec::with_capacity(dataset.lines.len());
    for line in &dataset.lines {
        let with_disp = line.records.first().is_some_and(|r| r.displacement.is_some());
        let mut channels: Vec<String> = CHANNELS_BASE.iter().map(|s| s.to_string()).collect();
        if with_disp {
            channels.extend(CHANNELS_DISP.iter().map(|s| s.to_string()));
        }
        let trace_file = format!("{}.f32", line.line_id);
        let samples = line.records[0].force.len();

        let file = fs::File::create(path.join(&trace_file))?;
        let mut w = BufWriter::new(file);
        let mut buf = Vec::with_capacity(samples * 4);
        for rec in &line.records {
            let mut write_trace = |tr: &Trace| -> Result<(), DatasetError> {
                buf.clear();
                for &v in &tr.samples {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
                w.write_all(&buf)?;
                Ok(())
            };
            write_trace(&rec.force)?;
            for a in &rec.accel {
                write_trace(a)?;
            }
            if let Some(disp) = &rec.displacement {
                for u in disp {
                    write_trace(u)?;
                }
            }
        }
        w.flush()?;

        entries.push(LineEntry {
            line_id: line.line_id.clone(),
            normal_component: line.normal_component,
            origin_mm: line.origin_mm,
            positions_mm: line.positions_mm.clone(),
            trace_file,
            channels,
            samples_per_trace: samples,
            t0_s: line.records[0].force.t0,
            excitation_points_mm: line.records.iter().map(|r| r.excitation_point_mm).collect(),
            trigger_indices: line.records.iter().map(|r| r.trigger_index).collect(),
            peak_forces_n: line.records.iter().map(|r| r.peak_force_n).collect(),
        });
    }

    let manifest = Manifest {
        version: format!("{FORMAT_VERSION_MAJOR}.{FORMAT_VERSION_MINOR}"),
        sample_rate_hz: dataset.sample_rate_hz,
        sensor_position_mm: dataset.sensor_position_mm,
        provenance: dataset.provenance,
        beam_geometry: dataset.geometry.clone(),
        lines: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(path.join("manifest.json"), json)?;
    Ok(())
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<ScanDataset, DatasetError> {
    let manifest_path = path.join("manifest.json");
    if !manifest_path.exists() {
        return Err(DatasetError::MissingManifest(manifest_path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;

    let major: u32 = manifest
        .version
        .split('.')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    if major != FORMAT_VERSION_MAJOR {
        return Err(DatasetError::VersionMismatch {
            found: manifest.version.clone(),
            supported: FORMAT_VERSION_MAJOR,
        });
    }

    let dt = 1.0 / manifest.sample_rate_hz;
    let mut lines = Vec::with_capacity(manifest.lines.len());
    for entry in &manifest.lines {
        let blob_path = path.join(&entry.trace_file);
        if !blob_path.exists() {
            return Err(DatasetError::MissingTraceFile(blob_path));
        }
        let n_points = entry.positions_mm.len();
        let n_channels = entry.channels.len();
        let samples = entry.samples_per_trace;
        let expected = (n_points * n_channels * samples * 4) as u64;
        let actual = fs::metadata(&blob_path)?.len();
        if actual != expected {
            return Err(DatasetError::TruncatedBlob {
                path: blob_path,
                expected,
                actual,
            });
        }
        let with_disp = n_channels == 7;
        if n_channels != 4 && n_channels != 7 {
            return Err(DatasetError::InvalidLine {
                line: entry.line_id.clone(),
                detail: format!("unsupported channel count {n_channels}"),
            });
        }

        let mut r = BufReader::new(fs::File::open(&blob_path)?);
        let mut raw = vec![0u8; samples * 4];
        let mut read_trace = |r: &mut BufReader<fs::File>, unit: Unit, t0: f64| {
            r.read_exact(&mut raw)?;
            let vals = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Trace::new(vals, dt, t0, unit)
        };

        let mut records = Vec::with_capacity(n_points);
        for p in 0..n_points {
            let force = read_trace(&mut r, Unit::Force, entry.t0_s)?;
            let accel = [
                read_trace(&mut r, Unit::Acceleration, entry.t0_s)?,
                read_trace(&mut r, Unit::Acceleration, entry.t0_s)?,
                read_trace(&mut r, Unit::Acceleration, entry.t0_s)?,
            ];
            let displacement = if with_disp {
                Some([
                    read_trace(&mut r, Unit::Displacement, entry.t0_s)?,
                    read_trace(&mut r, Unit::Displacement, entry.t0_s)?,
                    read_trace(&mut r, Unit::Displacement, entry.t0_s)?,
                ])
            } else {
                None
            };
            records.push(ImpactRecord {
                excitation_point_mm: entry.excitation_points_mm[p],
                force,
                accel,
                trigger_index: entry.trigger_indices[p],
                peak_force_n: entry.peak_forces_n[p],
                displacement,
            });
        }

        lines.push(ScanLine {
            line_id: entry.line_id.clone(),
            origin_mm: entry.origin_mm,
            positions_mm: entry.positions_mm.clone(),
            normal_component: entry.normal_component,
            records,
        });
    }

    let ds = ScanDataset {
        lines,
        sensor_position_mm: manifest.sensor_position_mm,
        sample_rate_hz: manifest.sample_rate_hz,
        geometry: manifest.beam_geometry,
        provenance: manifest.provenance,
    };
    ds.validate()?;
    Ok(ds)
}
