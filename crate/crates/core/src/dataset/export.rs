//! Plot/export products: CSV+PNG heatmaps and deformed point clouds.
//!
//! The CSV is always the raw grid and is the testable artifact; the PNG is a
//! rendering convenience. CSV uses `.` decimals, `,` separators, and a header
//! row carrying the axis metadata.

use super::{DatasetError, ScanDataset};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Color mapping for heatmap images. The CSV is unaffected by the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorScale {
    Linear,
    /// log10 with values clamped to [`LOG_FLOOR`] before taking the log.
    Log,
}

/// Floor applied to values when rendering a log-scaled image.
pub const LOG_FLOOR: f64 = 1e-12;

/// A dense 2D grid with named, explicit axes. Row-major: `values[row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    /// Row axis name, e.g. `f_Hz`.
    pub row_name: String,
    /// Row coordinate per grid row.
    pub row_axis: Vec<f64>,
    /// Column axis name, e.g. `z_mm`.
    pub col_name: String,
    /// Column coordinate per grid column.
    pub col_axis: Vec<f64>,
    /// Row-major values, `row_axis.len() * col_axis.len()` entries.
    pub values: Vec<f64>,
}

impl Grid2 {
    /// Validated constructor: value count must match the axes.
    pub fn new(
        row_name: impl Into<String>,
        row_axis: Vec<f64>,
        col_name: impl Into<String>,
        col_axis: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if values.len() != row_axis.len() * col_axis.len() {
            return Err(DatasetError::GridShape(format!(
                "{} values for {}×{} axes",
                values.len(),
                row_axis.len(),
                col_axis.len()
            )));
        }
        Ok(Grid2 {
            row_name: row_name.into(),
            row_axis,
            col_name: col_name.into(),
            col_axis,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_axis.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_axis.len()
    }

    /// Value at `(row, col)`.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }
}

/// Writes `<base>.csv` and `<base>.png` for the grid.
///
/// Fails on any non-finite value, reporting the first offending index. The
/// CSV header documents the color scale (and clamp floor for log scale); the
/// grid rows themselves are written untransformed.
pub fn export_heatmap(grid: &Grid2, base: &Path, scale: ColorScale) -> Result<(), DatasetError> {
    for r in 0..grid.n_rows() {
        for c in 0..grid.n_cols() {
            if !grid.at(r, c).is_finite() {
                return Err(DatasetError::NonFiniteGrid { row: r, col: c });
            }
        }
    }

    let csv_path = base.with_extension("csv");
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    let scale_note = match scale {
        ColorScale::Linear => "scale=linear".to_string(),
        ColorScale::Log => format!("scale=log10 floor={LOG_FLOOR:e}"),
    };
    writeln!(
        w,
        "# rows={} cols={} {}",
        grid.row_name, grid.col_name, scale_note
    )?;
    // Header row: corner label then the column axis.
    write!(w, "{}\\{}", grid.row_name, grid.col_name)?;
    for c in &grid.col_axis {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for r in 0..grid.n_rows() {
        write!(w, "{}", grid.row_axis[r])?;
        for c in 0..grid.n_cols() {
            write!(w, ",{}", grid.at(r, c))?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    write_png(grid, &base.with_extension("png"), scale)?;
    Ok(())
}

fn write_png(grid: &Grid2, path: &Path, scale: ColorScale) -> Result<(), DatasetError> {
    let (nr, nc) = (grid.n_rows(), grid.n_cols());
    let mapped: Vec<f64> = grid
        .values
        .iter()
        .map(|&v| match scale {
            ColorScale::Linear => v,
            ColorScale::Log => v.max(LOG_FLOOR).log10(),
        })
        .collect();
    let lo = mapped.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mapped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut img = image::RgbImage::new(nc as u32, nr as u32);
    for r in 0..nr {
        for c in 0..nc {
            let t = (mapped[r * nc + c] - lo) / span;
            // Render with row 0 at the bottom, matching plot conventions.
            img.put_pixel(c as u32, (nr - 1 - r) as u32, image::Rgb(colormap(t)));
        }
    }
    img.save(path)
        .map_err(|e| DatasetError::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Small blue→cyan→yellow→red colormap.
fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let stops: [(f64, [f64; 3]); 4] = [
        (0.0, [15.0, 30.0, 120.0]),
        (0.35, [30.0, 160.0, 190.0]),
        (0.7, [235.0, 220.0, 60.0]),
        (1.0, [200.0, 30.0, 30.0]),
    ];
    for w in stops.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            return [
                (c0[0] + s * (c1[0] - c0[0])) as u8,
                (c0[1] + s * (c1[1] - c0[1])) as u8,
                (c0[2] + s * (c1[2] - c0[2])) as u8,
            ];
        }
    }
    [200, 30, 30]
}

/// Writes a deformed point cloud of the dataset's displacement field at time `t`.
///
/// One record per excitation point, whitespace separated:
/// `x_mm y_mm z_mm ux_m uy_m uz_m umag_m`, where the position columns are the
/// undeformed point displaced by `scale · u` (the scale converts meters of
/// displacement directly into millimetres of plot offset).
pub fn export_pointcloud(
    dataset: &ScanDataset,
    t: f64,
    scale: f64,
    path: &Path,
) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# deformed point cloud at t = {t} s, offset scale = {scale}")?;
    writeln!(w, "# x_mm y_mm z_mm ux_m uy_m uz_m umag_m")?;
    for line in &dataset.lines {
        for (i, rec) in line.records.iter().enumerate() {
            let disp = rec.displacement.as_ref().ok_or_else(|| {
                DatasetError::InvalidLine {
                    line: line.line_id.clone(),
                    detail: format!("point {i} has no displacement traces"),
                }
            })?;
            let idx = disp[0].index_at(t)?;
            let u = [
                disp[0].samples[idx],
                disp[1].samples[idx],
                disp[2].samples[idx],
            ];
            let umag = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            let mut pos = [
                line.origin_mm[0],
                line.origin_mm[1],
                line.origin_mm[2] + line.positions_mm[i],
            ];
            for k in 0..3 {
                pos[k] += scale * u[k];
            }
            writeln!(
                w,
                "{} {} {} {} {} {} {}",
                pos[0], pos[1], pos[2], u[0], u[1], u[2], umag
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape_enforced() {
        assert!(Grid2::new("r", vec![0.0, 1.0], "c", vec![0.0], vec![1.0]).is_err());
        let g = Grid2::new("r", vec![0.0, 1.0], "c", vec![0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(g.at(1, 0), 2.0);
    }

    #[test]
    fn heatmap_rejects_nan() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2::new(
            "r",
            vec![0.0, 1.0],
            "c",
            vec![0.0, 1.0],
            vec![0.0, 1.0, f64::NAN, 0.0],
        )
        .unwrap();
        let err = export_heatmap(&g, &dir.path().join("m"), ColorScale::Linear).unwrap_err();
        match err {
            DatasetError::NonFiniteGrid { row, col } => {
                assert_eq!((row, col), (1, 0));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn heatmap_csv_roundtrip_2x2() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2::new(
            "f_Hz",
            vec![0.0, 1.0],
            "z_mm",
            vec![0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        export_heatmap(&g, &dir.path().join("grid"), ColorScale::Linear).unwrap();
        let text = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
        let data_rows: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("f_Hz\\"))
            .collect();
        assert_eq!(data_rows.len(), 2);
        let parse_row = |row: &str| -> Vec<f64> {
            row.split(',')
                .skip(1)
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        };
        assert_eq!(parse_row(data_rows[0]), vec![0.0, 1.0]);
        assert_eq!(parse_row(data_rows[1]), vec![1.0, 0.0]);
        assert!(dir.path().join("grid.png").exists());
    }

    #[test]
    fn log_scale_documented_in_header() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2::new(
            "r",
            vec![0.0],
            "c",
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        )
        .unwrap();
        export_heatmap(&g, &dir.path().join("logmap"), ColorScale::Log).unwrap();
        let text = std::fs::read_to_string(dir.path().join("logmap.csv")).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.contains("log10"), "{header}");
        assert!(header.contains("1e-12"), "{header}");
        // raw CSV values untouched by the log mapping
        assert!(text.lines().nth(2).unwrap().ends_with("0,1"));
    }
}
