//! Quadratic eigensolve in the axial wavenumber at a fixed frequency.
//!
//! The real symmetric quadratic pencil `P(ζ) = A0 + ζA1 + ζ²A2` with
//! `A0 = K1 − ω²M`, `A1 = −K̂2`, `A2 = K3` is linearized into the companion
//! form
//!
//! ```text
//! [ −A2⁻¹A1  −A2⁻¹A0 ] [ζU]     [ζU]
//! [    I        0    ] [ U]  = ζ [ U]
//! ```
//!
//! of doubled dimension (A2 is positive definite, so the reduction to a
//! standard eigenproblem is a Cholesky solve). Eigenvalues come from the
//! dense nonsymmetric solver; propagating modes (real ζ, forward direction)
//! are kept, polished by inverse iteration plus a Rayleigh fit of the scalar
//! quadratic, and their shapes extracted as null vectors of `P(ζ)`.

use super::{classify_mode, ModeLabel, SafeError, SafeMatrices};
use faer::prelude::*;
use faer::{Mat, Side};
use num_complex::Complex64;

/// A propagating mode keeps `|Im ζ| / |Re ζ|` below this before refinement.
pub const PROPAGATING_IM_RE_RATIO: f64 = 1e-4;

/// Accepted modes must satisfy `‖P(ζ)φ‖ / ‖ω²Mφ‖` below this.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

/// One guided-wave mode at one frequency.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    /// Frequency (Hz).
    pub frequency_hz: f64,
    /// Real axial wavenumber ζ (rad/m), > 0 for forward propagation.
    pub wavenumber_rad_per_m: f64,
    /// Phase velocity 2πf/ζ (m/s).
    pub phase_velocity_m_per_s: f64,
    /// Group velocity dω/dζ (m/s), filled by branch tracing.
    pub group_velocity_m_per_s: Option<f64>,
    /// Complex nodal displacement (x, y, z per node), max modulus 1.
    pub shape: Vec<Complex64>,
    /// Kinematic class of the shape.
    pub label: ModeLabel,
    /// Relative eigen-residual of the accepted solution.
    pub residual: f64,
}

fn frob(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// y = (A0 + ζA1 + ζ²A2) x
fn pencil_mul(mats: &SafeMatrices, omega: f64, zeta: f64, x: &[f64], y: &mut [f64]) {
    let n = x.len();
    let w2 = omega * omega;
    let z2 = zeta * zeta;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let a0 = mats.k1[(i, j)] - w2 * mats.m[(i, j)];
            let a1 = -mats.k2_hat[(i, j)];
            let a2 = mats.k3[(i, j)];
            acc += (a0 + zeta * a1 + z2 * a2) * x[j];
        }
        y[i] = acc;
    }
}

fn build_pencil(mats: &SafeMatrices, omega: f64, zeta: f64) -> Mat<f64> {
    let n = mats.ndof();
    let w2 = omega * omega;
    let z2 = zeta * zeta;
    Mat::from_fn(n, n, |i, j| {
        mats.k1[(i, j)] - w2 * mats.m[(i, j)] - zeta * mats.k2_hat[(i, j)]
            + z2 * mats.k3[(i, j)]
    })
}

/// Deterministic start vector for inverse iteration.
fn seed_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut state = 0x9e3779b97f4a7c15u64 ^ salt.wrapping_mul(0xd1342543de82ef95);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) - 0.5
        })
        .collect()
}

/// Solves the SAFE eigenproblem at frequency `f`, returning propagating
/// forward modes sorted by ascending phase velocity.
pub fn solve_at_frequency(mats: &SafeMatrices, f: f64) -> Result<Vec<ModeSolution>, SafeError> {
    if !(f > 0.0) {
        return Err(SafeError::NonPositiveFrequency(f));
    }
    let n = mats.ndof();
    let omega = 2.0 * std::f64::consts::PI * f;
    let w2 = omega * omega;

    let a0 = Mat::from_fn(n, n, |i, j| mats.k1[(i, j)] - w2 * mats.m[(i, j)]);
    let a1 = Mat::from_fn(n, n, |i, j| -mats.k2_hat[(i, j)]);

    // balance the pencil: work in ζ' = ζ/σ
    let sigma = (frob(&a0) / frob(&mats.k3)).sqrt().max(1e-300);
    let a1s = Mat::from_fn(n, n, |i, j| sigma * a1[(i, j)]);
    let a2s = Mat::from_fn(n, n, |i, j| sigma * sigma * mats.k3[(i, j)]);

    let llt = a2s
        .llt(Side::Lower)
        .map_err(|e| SafeError::Eigensolver(format!("K3 Cholesky failed: {e:?}")))?;
    let b1 = llt.solve(&a1s);
    let b0 = llt.solve(&a0);

    let companion = Mat::from_fn(2 * n, 2 * n, |i, j| {
        if i < n {
            if j < n {
                -b1[(i, j)]
            } else {
                -b0[(i, j - n)]
            }
        } else if j == i - n {
            1.0
        } else {
            0.0
        }
    });

    let eigenvalues = companion
        .eigenvalues()
        .map_err(|e| SafeError::Eigensolver(format!("companion eigensolve failed: {e:?}")))?;

    // forward propagating candidates (real ζ > 0)
    let mut candidates: Vec<f64> = eigenvalues
        .iter()
        .filter_map(|ev| {
            let zeta = Complex64::new(ev.re * sigma, ev.im * sigma);
            if zeta.re > 0.0
                && zeta.re.is_finite()
                && zeta.im.abs() <= PROPAGATING_IM_RE_RATIO * zeta.re
            {
                Some(zeta.re)
            } else {
                None
            }
        })
        .collect();
    candidates.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut modes: Vec<ModeSolution> = Vec::new();
    'cand: for (ci, &zeta0) in candidates.iter().enumerate() {
        match refine_mode(mats, omega, zeta0, ci as u64) {
            Some((zeta, shape_reduced, residual)) => {
                // drop duplicates the companion may have produced near crossings
                for m in &modes {
                    if (m.wavenumber_rad_per_m - zeta).abs() <= 1e-9 * zeta {
                        continue 'cand;
                    }
                }
                let shape = physical_shape(mats, &shape_reduced);
                let label = classify_mode(&shape, &mats.nodes_mm);
                modes.push(ModeSolution {
                    frequency_hz: f,
                    wavenumber_rad_per_m: zeta,
                    phase_velocity_m_per_s: omega / zeta,
                    group_velocity_m_per_s: None,
                    shape,
                    label,
                    residual,
                });
            }
            None => continue,
        }
    }

    // ascending phase velocity == descending wavenumber (already sorted by ζ
    // descending, but refinement can reorder near-degenerate pairs)
    modes.sort_by(|a, b| {
        b.wavenumber_rad_per_m
            .partial_cmp(&a.wavenumber_rad_per_m)
            .unwrap()
    });
    Ok(modes)
}

/// Inverse iteration + Rayleigh polish at a candidate wavenumber.
///
/// Returns `(ζ, shape in reduced DOFs, residual)`, or None when the candidate
/// does not converge to a propagating solution (e.g. a nearly-real evanescent
/// pair straddling a cutoff).
fn refine_mode(
    mats: &SafeMatrices,
    omega: f64,
    zeta0: f64,
    salt: u64,
) -> Option<(f64, Vec<f64>, f64)> {
    let n = mats.ndof();
    let mut zeta = zeta0;
    let mut x = seed_vector(n, salt);
    normalize(&mut x);

    let mut residual = f64::INFINITY;
    for _pass in 0..3 {
        let p = build_pencil(mats, omega, zeta);
        let lu = p.partial_piv_lu();
        for _ in 0..2 {
            let rhs = Mat::from_fn(n, 1, |i, _| x[i]);
            let sol = lu.solve(&rhs);
            for i in 0..n {
                x[i] = sol[(i, 0)];
            }
            if x.iter().any(|v| !v.is_finite()) {
                // singular to working precision: nudge and retry
                x = seed_vector(n, salt ^ 0xabcdef);
                normalize(&mut x);
                zeta *= 1.0 + 1e-9;
                continue;
            }
            normalize(&mut x);
        }

        // Rayleigh fit of the scalar quadratic xᵀP(ζ)x = 0
        let a = quad_form(&mats.k3, &x);
        let b = -quad_form(&mats.k2_hat, &x);
        let c = quad_form_a0(mats, omega, &x);
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 && a.abs() > 0.0 {
            let r = disc.sqrt();
            let z1 = (-b + r) / (2.0 * a);
            let z2 = (-b - r) / (2.0 * a);
            let znew = if (z1 - zeta).abs() < (z2 - zeta).abs() {
                z1
            } else {
                z2
            };
            if znew.is_finite() && znew > 0.0 {
                zeta = znew;
            }
        }

        residual = residual_of(mats, omega, zeta, &x);
        if residual <= RESIDUAL_LIMIT {
            break;
        }
    }

    if residual <= RESIDUAL_LIMIT && zeta > 0.0 {
        Some((zeta, x, residual))
    } else {
        None
    }
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
}

fn quad_form(m: &Mat<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

fn quad_form_a0(mats: &SafeMatrices, omega: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let w2 = omega * omega;
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += (mats.k1[(i, j)] - w2 * mats.m[(i, j)]) * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

fn residual_of(mats: &SafeMatrices, omega: f64, zeta: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let mut px = vec![0.0; n];
    pencil_mul(mats, omega, zeta, x, &mut px);
    let w2 = omega * omega;
    let mut mx = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += mats.m[(i, j)] * x[j];
        }
        mx[i] = w2 * acc;
    }
    let num = px.iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = mx.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Maps the reduced real eigenvector back to the physical complex shape:
/// in-plane components stay real, the axial component regains its 90° phase,
/// and the whole vector is normalized to unit maximum modulus.
fn physical_shape(mats: &SafeMatrices, x: &[f64]) -> Vec<Complex64> {
    let nn = mats.node_count();
    let mut shape = vec![Complex64::new(0.0, 0.0); 3 * nn];
    for node in 0..nn {
        for comp in 0..3 {
            if let Some(dof) = mats.dof_index(node, comp) {
                let v = x[dof];
                shape[3 * node + comp] = if comp == 2 {
                    Complex64::new(0.0, v)
                } else {
                    Complex64::new(v, 0.0)
                };
            }
        }
    }
    let mut max_mod = 0.0;
    let mut max_idx = 0;
    for (i, c) in shape.iter().enumerate() {
        if c.norm() > max_mod {
            max_mod = c.norm();
            max_idx = i;
        }
    }
    if max_mod > 0.0 {
        let scale = shape[max_idx] / max_mod; // unit phase of the largest entry
        for c in shape.iter_mut() {
            *c /= scale * max_mod;
        }
    }
    shape
}
