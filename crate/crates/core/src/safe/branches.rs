//! Branch tracking across frequency, group velocity, mode classification,
//! and the dispersion CSV format.

use super::{solve_at_frequency, ModeLabel, ModeSolution, SafeError, SafeMatrices};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Modal assurance threshold below which modes are not considered the same
/// branch. Conservative against crossings in the mid-band.
pub const MAC_THRESHOLD: f64 = 0.7;

/// A connected dispersion branch.
#[derive(Debug, Clone)]
pub struct DispersionBranch {
    pub id: usize,
    /// Majority label over the branch points.
    pub label: ModeLabel,
    /// Mode solutions ordered by frequency.
    pub points: Vec<ModeSolution>,
}

/// Frequency-indexed dispersion branches.
#[derive(Debug, Clone)]
pub struct DispersionSet {
    /// The solve grid (Hz), strictly increasing.
    pub frequencies_hz: Vec<f64>,
    pub branches: Vec<DispersionBranch>,
}

impl DispersionSet {
    /// Branches with a recognized transverse label (everything but `Other`).
    /// Axially dominated modes, which a surface-normal impact barely excites,
    /// fall outside these.
    pub fn labeled_branches(&self) -> impl Iterator<Item = &DispersionBranch> {
        self.branches
            .iter()
            .filter(|b| b.label != ModeLabel::Other)
    }

    /// The branch with the given label and the most points, if any.
    pub fn branch_by_label(&self, label: ModeLabel) -> Option<&DispersionBranch> {
        self.branches
            .iter()
            .filter(|b| b.label == label)
            .max_by_key(|b| b.points.len())
    }

    /// Interpolated wavenumber ζ(f) (rad/m) on a branch.
    pub fn interpolate_zeta(branch: &DispersionBranch, f: f64) -> Option<f64> {
        let pts = &branch.points;
        if pts.is_empty() {
            return None;
        }
        if f < pts[0].frequency_hz || f > pts[pts.len() - 1].frequency_hz {
            return None;
        }
        for w in pts.windows(2) {
            if f >= w[0].frequency_hz && f <= w[1].frequency_hz {
                let s = (f - w[0].frequency_hz) / (w[1].frequency_hz - w[0].frequency_hz);
                return Some(
                    w[0].wavenumber_rad_per_m
                        + s * (w[1].wavenumber_rad_per_m - w[0].wavenumber_rad_per_m),
                );
            }
        }
        None
    }
}

/// Modal assurance criterion |φᵢᴴφⱼ|² / (‖φᵢ‖²‖φⱼ‖²).
pub fn mac(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut dot = Complex64::new(0.0, 0.0);
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x.conj() * y;
        na += x.norm_sqr();
        nb += y.norm_sqr();
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot.norm_sqr() / (na * nb)
}

/// Solves the grid and connects modes into branches by maximal MAC pairing.
///
/// Frequency points are solved independently (in parallel); the pairing pass
/// is a sequential reduction over frequency.
pub fn trace_branches(
    mats: &SafeMatrices,
    frequencies_hz: &[f64],
) -> Result<DispersionSet, SafeError> {
    if frequencies_hz.len() < 3
        || frequencies_hz.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(SafeError::BadFrequencyGrid);
    }
    let per_freq: Result<Vec<Vec<ModeSolution>>, SafeError> = frequencies_hz
        .par_iter()
        .map(|&f| solve_at_frequency(mats, f))
        .collect();
    let per_freq = per_freq?;

    let mut branches = pair_into_branches(per_freq, MAC_THRESHOLD);
    for b in &mut branches {
        if b.points.len() >= 3 {
            fill_group_velocity(b)?;
        }
    }
    Ok(DispersionSet {
        frequencies_hz: frequencies_hz.to_vec(),
        branches,
    })
}

/// Connects per-frequency mode lists into branches.
///
/// At each frequency step, mode pairs are matched greedily by descending MAC;
/// matches below `mac_threshold` are rejected and open new branches.
pub fn pair_into_branches(
    per_freq: Vec<Vec<ModeSolution>>,
    mac_threshold: f64,
) -> Vec<DispersionBranch> {
    struct Open {
        points: Vec<ModeSolution>,
        active: bool,
    }
    let mut open: Vec<Open> = Vec::new();

    for modes in per_freq {
        let active_ids: Vec<usize> = open
            .iter()
            .enumerate()
            .filter(|(_, b)| b.active)
            .map(|(i, _)| i)
            .collect();
        // all (branch, mode) MAC pairs at this step
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &bi in &active_ids {
            let last = open[bi].points.last().unwrap();
            for (mi, mode) in modes.iter().enumerate() {
                let m = mac(&last.shape, &mode.shape);
                if m >= mac_threshold {
                    pairs.push((m, bi, mi));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

        let mut branch_taken = vec![false; open.len()];
        let mut mode_taken = vec![false; modes.len()];
        let mut assignment: Vec<(usize, usize)> = Vec::new();
        for (_, bi, mi) in pairs {
            if !branch_taken[bi] && !mode_taken[mi] {
                branch_taken[bi] = true;
                mode_taken[mi] = true;
                assignment.push((bi, mi));
            }
        }

        // close unmatched branches
        for &bi in &active_ids {
            if !branch_taken[bi] {
                open[bi].active = false;
            }
        }
        let mut modes: Vec<Option<ModeSolution>> = modes.into_iter().map(Some).collect();
        for (bi, mi) in assignment {
            open[bi].points.push(modes[mi].take().unwrap());
        }
        // unmatched modes open new branches
        for m in modes.into_iter().flatten() {
            open.push(Open {
                points: vec![m],
                active: true,
            });
        }
    }

    open.into_iter()
        .enumerate()
        .map(|(id, b)| {
            let label = majority_label(&b.points);
            DispersionBranch {
                id,
                label,
                points: b.points,
            }
        })
        .collect()
}

fn majority_label(points: &[ModeSolution]) -> ModeLabel {
    use std::collections::HashMap;
    let mut counts: HashMap<ModeLabel, usize> = HashMap::new();
    for p in points {
        *counts.entry(p.label).or_insert(0) += 1;
    }
    let mut best = ModeLabel::Other;
    let mut best_count = 0;
    for label in [
        ModeLabel::HorizontalBending,
        ModeLabel::Torsion,
        ModeLabel::VerticalBending,
        ModeLabel::WebBending,
        ModeLabel::Other,
    ] {
        if let Some(&c) = counts.get(&label) {
            if c > best_count {
                best_count = c;
                best = label;
            }
        }
    }
    best
}

/// Fills group velocities `c_g = Δω/Δζ` along a branch by central
/// differences (one-sided at the ends). Requires ≥ 3 points.
pub fn fill_group_velocity(branch: &mut DispersionBranch) -> Result<(), SafeError> {
    let pts = &mut branch.points;
    if pts.len() < 3 {
        return Err(SafeError::BadFrequencyGrid);
    }
    let omega: Vec<f64> = pts
        .iter()
        .map(|p| 2.0 * std::f64::consts::PI * p.frequency_hz)
        .collect();
    let zeta: Vec<f64> = pts.iter().map(|p| p.wavenumber_rad_per_m).collect();
    let n = pts.len();
    for i in 0..n {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dz = zeta[hi] - zeta[lo];
        if dz.abs() < 1e-300 {
            return Err(SafeError::DuplicateWavenumber {
                branch: branch.id,
                point: i,
            });
        }
        pts[i].group_velocity_m_per_s = Some((omega[hi] - omega[lo]) / dz);
    }
    Ok(())
}

/// Convenience wrapper matching the per-branch contract: returns a copy of
/// the branch with `c_g` filled.
pub fn group_velocity(branch: &DispersionBranch) -> Result<DispersionBranch, SafeError> {
    let mut out = branch.clone();
    fill_group_velocity(&mut out)?;
    Ok(out)
}

/// Classifies a mode shape by its dominant cross-section kinematics.
///
/// The shape (3 complex components per node, coordinates in mm) is projected
/// onto the rigid fields: x translation, y translation, z translation, and
/// rotation about the section centroid. The largest projection fraction
/// decides between the bending/torsion classes; axial-dominant shapes map to
/// `Other`. When no rigid motion dominates, a shape whose deformation lives
/// in lateral web motion with quiet flanges is labeled `WebBending`.
pub fn classify_mode(shape: &[Complex64], nodes_mm: &[[f64; 2]]) -> ModeLabel {
    let nn = nodes_mm.len();
    assert_eq!(shape.len(), 3 * nn, "shape must hold 3 components per node");

    let cx = nodes_mm.iter().map(|n| n[0]).sum::<f64>() / nn as f64;
    let cy = nodes_mm.iter().map(|n| n[1]).sum::<f64>() / nn as f64;

    let total: f64 = shape.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return ModeLabel::Other;
    }

    // projection fraction onto a real field q (3 comps per node)
    let fraction = |q: &dyn Fn(usize) -> [f64; 3]| -> f64 {
        let mut dot = Complex64::new(0.0, 0.0);
        let mut nq = 0.0;
        for node in 0..nn {
            let qv = q(node);
            for comp in 0..3 {
                dot += Complex64::new(qv[comp], 0.0) * shape[3 * node + comp];
                nq += qv[comp] * qv[comp];
            }
        }
        if nq == 0.0 {
            0.0
        } else {
            dot.norm_sqr() / (nq * total)
        }
    };

    let f_x = fraction(&|_| [1.0, 0.0, 0.0]);
    let f_y = fraction(&|_| [0.0, 1.0, 0.0]);
    let f_z = fraction(&|_| [0.0, 0.0, 1.0]);
    let f_rot = fraction(&|node| {
        let n = nodes_mm[node];
        [-(n[1] - cy), n[0] - cx, 0.0]
    });

    let fractions = [
        (f_x, ModeLabel::HorizontalBending),
        (f_y, ModeLabel::VerticalBending),
        (f_z, ModeLabel::Other), // axial translation
        (f_rot, ModeLabel::Torsion),
    ];
    let (best_frac, best_label) = fractions
        .iter()
        .cloned()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap();
    if best_frac >= 0.45 {
        return best_label;
    }

    // no rigid motion dominates: check for web bending (lateral motion of
    // mid-height nodes, flanges comparatively still)
    let bb = {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for n in nodes_mm {
            bb[0] = bb[0].min(n[0]);
            bb[1] = bb[1].min(n[1]);
            bb[2] = bb[2].max(n[0]);
            bb[3] = bb[3].max(n[1]);
        }
        bb
    };
    let height = bb[3] - bb[1];
    let mut web_x = 0.0;
    let mut web_total = 0.0;
    let mut flange_total = 0.0;
    let mut n_web = 0usize;
    let mut n_flange = 0usize;
    for node in 0..nn {
        let y = nodes_mm[node][1];
        let e: f64 = (0..3).map(|c| shape[3 * node + c].norm_sqr()).sum();
        if (y - cy).abs() <= 0.3 * height {
            web_x += shape[3 * node].norm_sqr();
            web_total += e;
            n_web += 1;
        } else if (y - cy).abs() >= 0.35 * height {
            flange_total += e;
            n_flange += 1;
        }
    }
    if n_web > 0 && n_flange > 0 {
        let web_mean = web_total / n_web as f64;
        let flange_mean = flange_total / n_flange as f64;
        let lateral_share = if web_total > 0.0 { web_x / web_total } else { 0.0 };
        if web_mean > 2.0 * flange_mean && lateral_share >= 0.5 {
            return ModeLabel::WebBending;
        }
    }
    ModeLabel::Other
}

/// Writes the dispersion CSV: `f_Hz,branch_id,zeta_rad_per_m,cp_m_per_s,cg_m_per_s,label`.
pub fn write_dispersion_csv(set: &DispersionSet, path: &Path) -> Result<(), SafeError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "f_Hz,branch_id,zeta_rad_per_m,cp_m_per_s,cg_m_per_s,label")?;
    for b in &set.branches {
        for p in &b.points {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.frequency_hz,
                b.id,
                p.wavenumber_rad_per_m,
                p.phase_velocity_m_per_s,
                p.group_velocity_m_per_s
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                b.label
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dispersion CSV back into a `DispersionSet` (without mode shapes).
pub fn read_dispersion_csv(path: &Path) -> Result<DispersionSet, SafeError> {
    let text = std::fs::read_to_string(path)?;
    let mut branches: Vec<DispersionBranch> = Vec::new();
    let mut freqs: Vec<f64> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(SafeError::CsvParse(format!(
                "line {}: expected 6 columns, got {}",
                ln + 1,
                cols.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64, SafeError> {
            s.parse::<f64>()
                .map_err(|_| SafeError::CsvParse(format!("line {}: bad {what} `{s}`", ln + 1)))
        };
        let f = parse(cols[0], "frequency")?;
        let id: usize = cols[1]
            .parse()
            .map_err(|_| SafeError::CsvParse(format!("line {}: bad branch id", ln + 1)))?;
        let zeta = parse(cols[2], "wavenumber")?;
        let cp = parse(cols[3], "phase velocity")?;
        let cg = if cols[4].is_empty() {
            None
        } else {
            Some(parse(cols[4], "group velocity")?)
        };
        let label: ModeLabel = cols[5]
            .parse()
            .map_err(|e| SafeError::CsvParse(format!("line {}: {e}", ln + 1)))?;
        if branches.last().map(|b: &DispersionBranch| b.id) != Some(id) {
            branches.push(DispersionBranch {
                id,
                label,
                points: Vec::new(),
            });
        }
        branches.last_mut().unwrap().points.push(ModeSolution {
            frequency_hz: f,
            wavenumber_rad_per_m: zeta,
            phase_velocity_m_per_s: cp,
            group_velocity_m_per_s: cg,
            shape: Vec::new(),
            label,
            residual: 0.0,
        });
        freqs.push(f);
    }
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if branches.is_empty() {
        return Err(SafeError::CsvParse("no data rows".into()));
    }
    Ok(DispersionSet {
        frequencies_hz: freqs,
        branches,
    })
}
