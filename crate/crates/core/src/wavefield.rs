//! Frequency-domain B-scans and wavenumber–frequency maps.
//!
//! The k–f transform follows the convention
//!
//! ```text
//! H(k, f) = Σ_z Σ_t u(z, t) e^{i(kz − 2πft)}
//! ```
//!
//! so a forward-traveling wave `cos(k₀z − 2πf₀t)` peaks at `(+k₀, +f₀)`.
//! Both axes are zero-padded to the next power of two. The stored grid keeps
//! the full (negative and positive) wavenumber axis and the non-negative
//! frequency half; with real input the dropped negative-frequency half is the
//! conjugate mirror, so total energy satisfies
//! `Σ_full |H|² = Mpad · Npad · Σ |u|²` with the mirror rows counted twice.

use crate::dataset::{DatasetError, Grid2, ScanLine, Trace};
use crate::safe::{DispersionBranch, DispersionSet};
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

/// Wavefield-analysis failures.
#[derive(Debug, Error)]
pub enum WavefieldError {
    #[error("non-uniform sampling: {0}")]
    NonUniformSampling(String),
    #[error("line `{line}` point {point} has no displacement for its normal component")]
    MissingDisplacement { line: String, point: usize },
    #[error("empty field")]
    EmptyField,
    #[error("normalization k range {0} rad/mm outside map axis")]
    BadNormalizationRange(f64),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Displacement field of one measurement line: `u[point][sample]`.
#[derive(Debug, Clone)]
pub struct LineField {
    pub u: Vec<Vec<f64>>,
    /// Point positions (mm), uniformly spaced.
    pub z_mm: Vec<f64>,
    /// Sample interval (s).
    pub dt: f64,
    /// Time of first sample (s).
    pub t0: f64,
}

impl LineField {
    /// Extracts the normal-component displacement field of a scan line.
    pub fn from_line(line: &ScanLine) -> Result<LineField, WavefieldError> {
        let mut u = Vec::with_capacity(line.records.len());
        let mut dt = 0.0;
        let mut t0 = 0.0;
        for (i, rec) in line.records.iter().enumerate() {
            let disp = rec
                .displacement
                .as_ref()
                .ok_or_else(|| WavefieldError::MissingDisplacement {
                    line: line.line_id.clone(),
                    point: i,
                })?;
            let tr: &Trace = &disp[line.normal_component.index()];
            dt = tr.dt;
            t0 = tr.t0;
            u.push(tr.samples.clone());
        }
        let field = LineField {
            u,
            z_mm: line.positions_mm.clone(),
            dt,
            t0,
        };
        field.check_uniform()?;
        Ok(field)
    }

    fn check_uniform(&self) -> Result<(), WavefieldError> {
        if self.u.is_empty() || self.u[0].is_empty() {
            return Err(WavefieldError::EmptyField);
        }
        let n = self.u[0].len();
        if self.u.iter().any(|t| t.len() != n) {
            return Err(WavefieldError::NonUniformSampling(
                "traces differ in length".into(),
            ));
        }
        if self.z_mm.len() != self.u.len() {
            return Err(WavefieldError::NonUniformSampling(
                "z axis length mismatch".into(),
            ));
        }
        if self.z_mm.len() >= 2 {
            let dz = self.z_mm[1] - self.z_mm[0];
            for w in self.z_mm.windows(2) {
                if ((w[1] - w[0]) - dz).abs() > 1e-6 * dz.abs() {
                    return Err(WavefieldError::NonUniformSampling(format!(
                        "z spacing {} vs {}",
                        w[1] - w[0],
                        dz
                    )));
                }
            }
        }
        Ok(())
    }

    /// Spatial sampling interval (mm).
    pub fn dz_mm(&self) -> f64 {
        if self.z_mm.len() >= 2 {
            self.z_mm[1] - self.z_mm[0]
        } else {
            1.0
        }
    }
}

/// Temporal window applied before the time transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

/// |U(z, f)| magnitude spectra along a line.
#[derive(Debug, Clone)]
pub struct BscanSpectrum {
    /// Row-major magnitude grid `[z][f]`.
    pub magnitude: Vec<f64>,
    pub z_mm: Vec<f64>,
    pub f_hz: Vec<f64>,
}

impl BscanSpectrum {
    pub fn at(&self, iz: usize, jf: usize) -> f64 {
        self.magnitude[iz * self.f_hz.len() + jf]
    }

    /// Grid export view (rows = z, cols = f).
    pub fn to_grid(&self) -> Grid2 {
        Grid2::new(
            "z_mm",
            self.z_mm.clone(),
            "f_Hz",
            self.f_hz.clone(),
            self.magnitude.clone(),
        )
        .expect("axes consistent by construction")
    }
}

/// Complex wavenumber–frequency spectrum H(k, f).
#[derive(Debug, Clone)]
pub struct KfMap {
    /// Row-major complex grid `[k][f]`.
    pub h: Vec<Complex64>,
    /// Wavenumber axis (rad/mm), ascending, negative to positive.
    pub k_rad_per_mm: Vec<f64>,
    /// Frequency axis (Hz), 0 to Nyquist.
    pub f_hz: Vec<f64>,
    /// Whether rows have been normalized per frequency.
    pub normalized: bool,
    /// k range used for normalization (rad/mm), when normalized.
    pub normalization_k_max: Option<f64>,
}

impl KfMap {
    pub fn at(&self, ik: usize, jf: usize) -> Complex64 {
        self.h[ik * self.f_hz.len() + jf]
    }

    /// Index of the k bin closest to `k` (rad/mm).
    pub fn k_bin(&self, k: f64) -> usize {
        self.k_rad_per_mm
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - k)
                    .abs()
                    .partial_cmp(&(b.1 - k).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap()
    }

    /// Index of the f bin closest to `f` (Hz).
    pub fn f_bin(&self, f: f64) -> usize {
        self.f_hz
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - f)
                    .abs()
                    .partial_cmp(&(b.1 - f).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap()
    }

    /// Magnitude grid for export (rows = k, cols = f).
    pub fn magnitude_grid(&self) -> Grid2 {
        Grid2::new(
            "k_rad_per_mm",
            self.k_rad_per_mm.clone(),
            "f_Hz",
            self.f_hz.clone(),
            self.h.iter().map(|c| c.norm()).collect(),
        )
        .expect("axes consistent by construction")
    }

    /// Real/imaginary grids for a complex export.
    pub fn complex_grids(&self) -> (Grid2, Grid2) {
        let re = Grid2::new(
            "k_rad_per_mm",
            self.k_rad_per_mm.clone(),
            "f_Hz",
            self.f_hz.clone(),
            self.h.iter().map(|c| c.re).collect(),
        )
        .expect("axes consistent");
        let im = Grid2::new(
            "k_rad_per_mm",
            self.k_rad_per_mm.clone(),
            "f_Hz",
            self.f_hz.clone(),
            self.h.iter().map(|c| c.im).collect(),
        )
        .expect("axes consistent");
        (re, im)
    }
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Per-point temporal Fourier magnitudes |U(z, f)|.
pub fn bscan_spectrum(field: &LineField, window: Window) -> Result<BscanSpectrum, WavefieldError> {
    field.check_uniform()?;
    let nt = field.u[0].len();
    let npad = next_pow2(nt);
    let nf = npad / 2 + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(npad);

    let mut magnitude = Vec::with_capacity(field.u.len() * nf);
    let mut buf = vec![Complex64::new(0.0, 0.0); npad];
    for trace in &field.u {
        for v in buf.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for (i, &v) in trace.iter().enumerate() {
            let w = match window {
                Window::Rectangular => 1.0,
                Window::Hann => {
                    0.5 * (1.0
                        - (2.0 * std::f64::consts::PI * i as f64 / (nt - 1) as f64).cos())
                }
            };
            buf[i] = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        magnitude.extend(buf[..nf].iter().map(|c| c.norm()));
    }
    let f_hz: Vec<f64> = (0..nf)
        .map(|j| j as f64 / (npad as f64 * field.dt))
        .collect();
    Ok(BscanSpectrum {
        magnitude,
        z_mm: field.z_mm.clone(),
        f_hz,
    })
}

/// 2D wavenumber–frequency transform of a line field.
pub fn kf_transform(field: &LineField) -> Result<KfMap, WavefieldError> {
    field.check_uniform()?;
    let nz = field.u.len();
    let nt = field.u[0].len();
    let mpad = next_pow2(nz);
    let npad = next_pow2(nt);
    let nf = npad / 2 + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fft_t = planner.plan_fft_forward(npad);
    let fft_z = planner.plan_fft_inverse(mpad); // e^{+ikz} kernel, unscaled

    // time transform per point
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(mpad);
    let mut buf = vec![Complex64::new(0.0, 0.0); npad];
    for trace in &field.u {
        for v in buf.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for (i, &v) in trace.iter().enumerate() {
            buf[i] = Complex64::new(v, 0.0);
        }
        fft_t.process(&mut buf);
        rows.push(buf.clone());
    }
    rows.resize(mpad, vec![Complex64::new(0.0, 0.0); npad]);

    // space transform per frequency column (full spectrum, then store f >= 0)
    let mut h = vec![Complex64::new(0.0, 0.0); mpad * nf];
    let mut col = vec![Complex64::new(0.0, 0.0); mpad];
    for jf in 0..nf {
        for (m, row) in rows.iter().enumerate() {
            col[m] = row[jf];
        }
        fft_z.process(&mut col);
        // fftshift: store ascending k from −Nyquist to +Nyquist−Δk
        for m in 0..mpad {
            let src = (m + mpad / 2) % mpad;
            h[m * nf + jf] = col[src];
        }
    }

    let dz = field.dz_mm();
    let dk = 2.0 * std::f64::consts::PI / (mpad as f64 * dz);
    let k_axis: Vec<f64> = (0..mpad)
        .map(|m| (m as f64 - (mpad / 2) as f64) * dk)
        .collect();
    let f_axis: Vec<f64> = (0..nf)
        .map(|j| j as f64 / (npad as f64 * field.dt))
        .collect();

    Ok(KfMap {
        h,
        k_rad_per_mm: k_axis,
        f_hz: f_axis,
        normalized: false,
        normalization_k_max: None,
    })
}

/// Floor below which a frequency row is zeroed instead of divided.
pub const NORMALIZATION_FLOOR: f64 = 1e-15;

/// Normalizes each fixed-frequency row by its maximum magnitude over
/// `0 ≤ k ≤ k_max_norm` (rad/mm). Rows with no content are zeroed.
pub fn kf_normalize(map: &KfMap, k_max_norm: f64) -> Result<KfMap, WavefieldError> {
    let k_hi = map
        .k_rad_per_mm
        .last()
        .copied()
        .unwrap_or(0.0);
    if !(k_max_norm > 0.0) || k_max_norm > k_hi + 1e-12 {
        return Err(WavefieldError::BadNormalizationRange(k_max_norm));
    }
    let nf = map.f_hz.len();
    let mut out = map.clone();
    for jf in 0..nf {
        let mut row_max = 0.0f64;
        for (ik, &k) in map.k_rad_per_mm.iter().enumerate() {
            if k >= 0.0 && k <= k_max_norm {
                row_max = row_max.max(map.h[ik * nf + jf].norm());
            }
        }
        if row_max < NORMALIZATION_FLOOR {
            for ik in 0..map.k_rad_per_mm.len() {
                out.h[ik * nf + jf] = Complex64::new(0.0, 0.0);
            }
        } else {
            for ik in 0..map.k_rad_per_mm.len() {
                out.h[ik * nf + jf] /= row_max;
            }
        }
    }
    out.normalized = true;
    out.normalization_k_max = Some(k_max_norm);
    Ok(out)
}

/// A dispersion curve sample placed on the map axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayPoint {
    pub f_hz: f64,
    /// Wavenumber converted to the map's rad/mm axis.
    pub k_rad_per_mm: f64,
    pub branch_id: usize,
}

/// Dispersion curves placed on a map's axes, plus a dropped-point count.
#[derive(Debug, Clone)]
pub struct Overlay {
    pub points: Vec<OverlayPoint>,
    /// Curve points outside the map's frequency range.
    pub dropped: usize,
}

/// Converts dispersion branches (ζ in rad/m) to overlay points on the map's
/// axes (rad/mm), dropping points outside the frequency range.
pub fn overlay_dispersion(map: &KfMap, curves: &DispersionSet) -> Overlay {
    let f_max = map.f_hz.last().copied().unwrap_or(0.0);
    let mut points = Vec::new();
    let mut dropped = 0;
    for branch in &curves.branches {
        for p in &branch.points {
            if p.frequency_hz < 0.0 || p.frequency_hz > f_max {
                dropped += 1;
                continue;
            }
            points.push(OverlayPoint {
                f_hz: p.frequency_hz,
                k_rad_per_mm: p.wavenumber_rad_per_m / 1000.0,
                branch_id: branch.id,
            });
        }
    }
    Overlay { points, dropped }
}

/// Fraction of overlay points whose k lies within `bins` k-bins of the map's
/// per-frequency ridge (the |H| argmax over k ≥ 0 at the point's frequency).
pub fn overlay_ridge_coverage(map: &KfMap, overlay: &Overlay, bins: usize) -> f64 {
    if overlay.points.is_empty() {
        return 0.0;
    }
    let nf = map.f_hz.len();
    let dk = if map.k_rad_per_mm.len() >= 2 {
        map.k_rad_per_mm[1] - map.k_rad_per_mm[0]
    } else {
        1.0
    };
    let mut hits = 0usize;
    for p in &overlay.points {
        let jf = map.f_bin(p.f_hz);
        let mut best_k = 0.0;
        let mut best_mag = -1.0;
        for (ik, &k) in map.k_rad_per_mm.iter().enumerate() {
            if k < 0.0 {
                continue;
            }
            let mag = map.h[ik * nf + jf].norm();
            if mag > best_mag {
                best_mag = mag;
                best_k = k;
            }
        }
        if (p.k_rad_per_mm - best_k).abs() <= bins as f64 * dk + 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / overlay.points.len() as f64
}

/// Overlay export: one point per line, `f_Hz,k_rad_per_mm,branch_id`.
pub fn write_overlay_csv(overlay: &Overlay, path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "f_Hz,k_rad_per_mm,branch_id")?;
    for p in &overlay.points {
        writeln!(w, "{},{},{}", p.f_hz, p.k_rad_per_mm, p.branch_id)?;
    }
    w.flush()
}

/// Total |H|² energy accounting for the dropped negative-frequency mirror.
pub fn kf_total_energy(map: &KfMap) -> f64 {
    let nf = map.f_hz.len();
    let mut total = 0.0;
    for ik in 0..map.k_rad_per_mm.len() {
        for jf in 0..nf {
            let e = map.h[ik * nf + jf].norm_sqr();
            // interior frequency bins carry their conjugate mirror's energy
            let w = if jf == 0 || jf == nf - 1 { 1.0 } else { 2.0 };
            total += w * e;
        }
    }
    total
}

#[allow(dead_code)]
fn _suppress_unused(branch: &DispersionBranch) -> usize {
    branch.id
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_wave_field(
        mpts: usize,
        nt: usize,
        k0_bin: usize,
        f0_bin: usize,
        dz: f64,
        dt: f64,
    ) -> LineField {
        let mpad = mpts.next_power_of_two();
        let npad = nt.next_power_of_two();
        let k0 = 2.0 * std::f64::consts::PI * k0_bin as f64 / (mpad as f64 * dz);
        let f0 = f0_bin as f64 / (npad as f64 * dt);
        let u: Vec<Vec<f64>> = (0..mpts)
            .map(|m| {
                (0..nt)
                    .map(|n| {
                        (k0 * m as f64 * dz - 2.0 * std::f64::consts::PI * f0 * n as f64 * dt)
                            .cos()
                    })
                    .collect()
            })
            .collect();
        LineField {
            u,
            z_mm: (0..mpts).map(|m| m as f64 * dz).collect(),
            dt,
            t0: 0.0,
        }
    }

    #[test]
    fn plane_wave_peaks_at_injected_bin() {
        let (m, n) = (64, 256);
        let (kb, fb) = (5usize, 20usize);
        let dz = 10.0; // mm
        let dt = 1.0 / 51200.0;
        let field = plane_wave_field(m, n, kb, fb, dz, dt);
        let map = kf_transform(&field).unwrap();

        let nf = map.f_hz.len();
        let mut best = (0usize, 0usize, -1.0f64);
        for ik in 0..map.k_rad_per_mm.len() {
            for jf in 0..nf {
                let mag = map.h[ik * nf + jf].norm();
                if mag > best.2 {
                    best = (ik, jf, mag);
                }
            }
        }
        let k0 = 2.0 * std::f64::consts::PI * kb as f64 / (m as f64 * dz);
        let f0 = fb as f64 / (n as f64 * dt);
        assert_eq!(best.0, map.k_bin(k0), "k bin");
        assert_eq!(best.1, map.f_bin(f0), "f bin");
        assert!(map.k_rad_per_mm[best.0] > 0.0, "positive-k peak expected");
    }

    #[test]
    fn standing_wave_peaks_at_both_signs() {
        let (m, n) = (64usize, 256usize);
        let (kb, fb) = (6usize, 30usize);
        let dz = 10.0;
        let dt = 1.0 / 51200.0;
        let k0 = 2.0 * std::f64::consts::PI * kb as f64 / (m as f64 * dz);
        let f0 = fb as f64 / (n as f64 * dt);
        let u: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (k0 * i as f64 * dz).cos()
                            * (2.0 * std::f64::consts::PI * f0 * j as f64 * dt).sin()
                    })
                    .collect()
            })
            .collect();
        let field = LineField {
            u,
            z_mm: (0..m).map(|i| i as f64 * dz).collect(),
            dt,
            t0: 0.0,
        };
        let map = kf_transform(&field).unwrap();
        let nf = map.f_hz.len();
        let jf = map.f_bin(f0);
        let ip = map.k_bin(k0);
        let im = map.k_bin(-k0);
        let mag_p = map.h[ip * nf + jf].norm();
        let mag_m = map.h[im * nf + jf].norm();
        assert!((mag_p - mag_m).abs() / mag_p < 1e-9, "symmetric peaks");
        // both are the row maxima
        for (ik, _) in map.k_rad_per_mm.iter().enumerate() {
            let mag = map.h[ik * nf + jf].norm();
            assert!(mag <= mag_p * (1.0 + 1e-12));
        }
    }

    #[test]
    fn parseval_total_energy() {
        let field = plane_wave_field(48, 200, 4, 17, 10.0, 1e-4);
        let map = kf_transform(&field).unwrap();
        let mpad = 64.0;
        let npad = 256.0;
        let energy_u: f64 = field
            .u
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum();
        let energy_h = kf_total_energy(&map);
        let expected = mpad * npad * energy_u;
        assert!(
            (energy_h - expected).abs() / expected < 1e-10,
            "Parseval: {energy_h} vs {expected}"
        );
    }

    #[test]
    fn shift_invariance_of_magnitude() {
        // a compact wavelet delayed by whole samples, with room to move
        let (m, n) = (16usize, 512usize);
        let dt = 1e-4;
        let wavelet = |t: f64| (-((t - 8e-3) / 2e-3).powi(2)).exp() * (2e3 * t).sin();
        let mk = |delay: usize| -> LineField {
            let u: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if j >= delay {
                                wavelet((j - delay) as f64 * dt) * ((i + 1) as f64)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            LineField {
                u,
                z_mm: (0..m).map(|i| i as f64 * 10.0).collect(),
                dt,
                t0: 0.0,
            }
        };
        let map0 = kf_transform(&mk(0)).unwrap();
        let map7 = kf_transform(&mk(7)).unwrap();
        let nf = map0.f_hz.len();
        let scale: f64 = map0.h.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for ik in 0..map0.k_rad_per_mm.len() {
            for jf in 0..nf {
                let d = (map0.h[ik * nf + jf].norm() - map7.h[ik * nf + jf].norm()).abs();
                assert!(d <= 1e-10 * scale, "bin ({ik},{jf}) differs by {d:e}");
            }
        }
    }

    #[test]
    fn normalize_rows_to_unit_max() {
        let field = plane_wave_field(32, 128, 3, 10, 10.0, 1e-4);
        let map = kf_transform(&field).unwrap();
        let k_max = *map.k_rad_per_mm.last().unwrap();
        let norm = kf_normalize(&map, k_max).unwrap();
        let nf = norm.f_hz.len();
        for jf in 0..nf {
            let mut row_max = 0.0f64;
            let mut nonzero = false;
            for ik in 0..norm.k_rad_per_mm.len() {
                let m = norm.h[ik * nf + jf].norm();
                if norm.k_rad_per_mm[ik] >= 0.0 {
                    row_max = row_max.max(m);
                }
                nonzero |= m > 0.0;
            }
            if nonzero {
                assert!((row_max - 1.0).abs() < 1e-12, "row {jf} max = {row_max}");
            }
        }
    }

    #[test]
    fn normalize_zero_rows_stay_zero() {
        let u = vec![vec![0.0; 64]; 16];
        let field = LineField {
            u,
            z_mm: (0..16).map(|i| i as f64 * 10.0).collect(),
            dt: 1e-4,
            t0: 0.0,
        };
        let map = kf_transform(&field).unwrap();
        let norm = kf_normalize(&map, 0.1).unwrap();
        assert!(norm.h.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn normalize_idempotent() {
        let field = plane_wave_field(32, 128, 3, 10, 10.0, 1e-4);
        let map = kf_transform(&field).unwrap();
        let k_max = 0.1;
        let once = kf_normalize(&map, k_max).unwrap();
        let twice = kf_normalize(&once, k_max).unwrap();
        for (a, b) in once.h.iter().zip(&twice.h) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn two_mode_field_both_visible_after_normalization() {
        // strong low-k mode and a 100x weaker high-k mode at the same frequencies
        let (m, n) = (64usize, 256usize);
        let dz = 10.0;
        let dt = 1.0 / 51200.0;
        let k1 = 2.0 * std::f64::consts::PI * 3.0 / (m as f64 * dz);
        let k2 = 2.0 * std::f64::consts::PI * 14.0 / (m as f64 * dz);
        let f0 = 40.0 / (n as f64 * dt);
        let u: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let z = i as f64 * dz;
                (0..n)
                    .map(|j| {
                        let ph = 2.0 * std::f64::consts::PI * f0 * j as f64 * dt;
                        (k1 * z - ph).cos() + 0.01 * (k2 * z - ph).cos()
                    })
                    .collect()
            })
            .collect();
        let field = LineField {
            u,
            z_mm: (0..m).map(|i| i as f64 * dz).collect(),
            dt,
            t0: 0.0,
        };
        let map = kf_transform(&field).unwrap();
        let jf = map.f_bin(f0);
        let nf = map.f_hz.len();

        // normalize only up to just past k1: the weak mode's row max is k1's
        let norm = kf_normalize(&map, k1 / 1000.0 * 1.5 * 1000.0).unwrap();
        let weak = norm.h[map.k_bin(k2) * nf + jf].norm();
        let strong = norm.h[map.k_bin(k1) * nf + jf].norm();
        assert!((strong - 1.0).abs() < 1e-9);
        // normalized weak-mode magnitude stays resolvable (1% of row max)
        assert!(weak > 5e-3, "weak mode at {weak}");
    }

    #[test]
    fn bscan_zero_field() {
        let field = LineField {
            u: vec![vec![0.0; 64]; 8],
            z_mm: (0..8).map(|i| i as f64 * 10.0).collect(),
            dt: 1e-4,
            t0: 0.0,
        };
        let spec = bscan_spectrum(&field, Window::Rectangular).unwrap();
        assert!(spec.magnitude.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bscan_standing_wave_profile() {
        // u(z,t) = cos(πz/L) sin(2πf₀t): ridge at f₀ with cos профile over z
        let (m, n) = (33usize, 256usize);
        let dt = 1e-4;
        let f0 = 32.0 / (n as f64 * dt); // exact bin
        let span = 320.0;
        let u: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let z = i as f64 * 10.0;
                let prof = (std::f64::consts::PI * z / span).cos();
                (0..n)
                    .map(|j| prof * (2.0 * std::f64::consts::PI * f0 * j as f64 * dt).sin())
                    .collect()
            })
            .collect();
        let field = LineField {
            u,
            z_mm: (0..m).map(|i| i as f64 * 10.0).collect(),
            dt,
            t0: 0.0,
        };
        let spec = bscan_spectrum(&field, Window::Rectangular).unwrap();
        let jf = spec
            .f_hz
            .iter()
            .position(|&f| (f - f0).abs() < 1e-9)
            .unwrap();
        // each point's spectrum peaks at f0, amplitude follows |cos(πz/L)|
        let a0 = spec.at(0, jf);
        for i in 0..m {
            let z = i as f64 * 10.0;
            let expected = (std::f64::consts::PI * z / span).cos().abs();
            let got = spec.at(i, jf) / a0;
            assert!(
                (got - expected).abs() < 1e-6,
                "z = {z}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn overlay_empty_curves() {
        let field = plane_wave_field(16, 64, 2, 5, 10.0, 1e-4);
        let map = kf_transform(&field).unwrap();
        let set = DispersionSet {
            frequencies_hz: vec![],
            branches: vec![],
        };
        let ov = overlay_dispersion(&map, &set);
        assert!(ov.points.is_empty());
        assert_eq!(ov.dropped, 0);
    }

    #[test]
    fn overlay_out_of_range_dropped_with_count() {
        use crate::safe::{DispersionBranch, ModeLabel, ModeSolution};
        let field = plane_wave_field(16, 64, 2, 5, 10.0, 1e-4);
        let map = kf_transform(&field).unwrap();
        let f_max = *map.f_hz.last().unwrap();
        let mk = |f: f64| ModeSolution {
            frequency_hz: f,
            wavenumber_rad_per_m: 10.0,
            phase_velocity_m_per_s: 1.0,
            group_velocity_m_per_s: None,
            shape: vec![],
            label: ModeLabel::Other,
            residual: 0.0,
        };
        let set = DispersionSet {
            frequencies_hz: vec![100.0],
            branches: vec![DispersionBranch {
                id: 0,
                label: ModeLabel::Other,
                points: vec![mk(100.0), mk(f_max * 2.0)],
            }],
        };
        let ov = overlay_dispersion(&map, &set);
        assert_eq!(ov.points.len(), 1);
        assert_eq!(ov.dropped, 1);
        // rad/m to rad/mm conversion
        assert!((ov.points[0].k_rad_per_mm - 0.01).abs() < 1e-15);
    }
}
