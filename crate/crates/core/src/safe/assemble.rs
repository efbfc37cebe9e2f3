//! SAFE operator assembly for 8-node quadrilateral cross-section meshes.
//!
//! With the ansatz `u(x, y, z, t) = N(x, y) U e^{i(ζz − ωt)}` the weak form
//! produces the quadratic eigenvalue problem
//!
//! ```text
//! [K1 + iζ(K2 − K2ᵀ) + ζ²K3 − ω²M] U = 0
//! ```
//!
//! where `K1 = ∫B1ᵀCB1`, `K2 = ∫B1ᵀCB2`, `K3 = ∫B2ᵀCB2`, `M = ∫ρNᵀN`,
//! `B1` holding the in-plane derivative terms and `B2` the axial ones.
//! Multiplying the axial DOF of each node by `i` turns the problem real:
//!
//! ```text
//! [K1 − ζ K̂2 + ζ²K3 − ω²M] Û = 0
//! ```
//!
//! with all four matrices real symmetric and `K3`, `M` positive definite.
//! This module assembles `K1`, `K̂2`, `K3`, `M` with 3×3 Gauss quadrature.

use super::{CrossSectionMesh, SafeError};
use crate::material::Material;
use faer::Mat;

/// Gauss–Legendre 3-point rule on [−1, 1].
const GAUSS_3: [(f64, f64); 3] = [
    (-0.774596669241483377, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774596669241483377, 5.0 / 9.0),
];

/// Which displacement components carry degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofLayout {
    /// All three components per node.
    Full,
    /// In-plane x constrained to zero (plane-strain surrogate for plates):
    /// two DOFs per node (y, z).
    PlaneStrainX,
}

impl DofLayout {
    pub fn dofs_per_node(self) -> usize {
        match self {
            DofLayout::Full => 3,
            DofLayout::PlaneStrainX => 2,
        }
    }

    /// Component indices (into x=0, y=1, z=2) that carry DOFs.
    pub fn components(self) -> &'static [usize] {
        match self {
            DofLayout::Full => &[0, 1, 2],
            DofLayout::PlaneStrainX => &[1, 2],
        }
    }
}

/// Assembly options.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    /// Constrain the x component everywhere. Useful to emulate a laterally
    /// infinite plate with a narrow strip mesh.
    pub plane_strain_x: bool,
}

/// Assembled SAFE operator blocks, all real symmetric except that symmetry of
/// `k2_hat` encodes the skew in-plane/axial coupling after the phase shift.
pub struct SafeMatrices {
    /// ζ-independent stiffness block.
    pub k1: Mat<f64>,
    /// Symmetric first-order block (enters as `−ζ·K̂2`).
    pub k2_hat: Mat<f64>,
    /// ζ² stiffness block, positive definite.
    pub k3: Mat<f64>,
    /// Consistent mass matrix, positive definite.
    pub m: Mat<f64>,
    /// Node coordinates (mm), copied from the mesh for shape classification.
    pub nodes_mm: Vec<[f64; 2]>,
    /// DOF layout.
    pub layout: DofLayout,
}

impl SafeMatrices {
    pub fn ndof(&self) -> usize {
        self.k1.nrows()
    }

    pub fn node_count(&self) -> usize {
        self.nodes_mm.len()
    }

    /// Global DOF index for (node, component), if the component carries one.
    pub fn dof_index(&self, node: usize, component: usize) -> Option<usize> {
        let comps = self.layout.components();
        comps
            .iter()
            .position(|&c| c == component)
            .map(|k| node * comps.len() + k)
    }
}

/// Shape functions and their natural derivatives at `(xi, eta)`.
///
/// Returns `(N, dN/dxi, dN/deta)` for the 8-node serendipity element.
pub fn shape_functions(xi: f64, eta: f64) -> ([f64; 8], [f64; 8], [f64; 8]) {
    let corner_signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut n = [0.0; 8];
    let mut dxi = [0.0; 8];
    let mut deta = [0.0; 8];
    for (k, &(sx, sy)) in corner_signs.iter().enumerate() {
        n[k] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta) * (sx * xi + sy * eta - 1.0);
        dxi[k] = 0.25 * sx * (1.0 + sy * eta) * (2.0 * sx * xi + sy * eta);
        deta[k] = 0.25 * sy * (1.0 + sx * xi) * (sx * xi + 2.0 * sy * eta);
    }
    // mid-side nodes: 4 bottom, 5 right, 6 top, 7 left
    n[4] = 0.5 * (1.0 - xi * xi) * (1.0 - eta);
    dxi[4] = -xi * (1.0 - eta);
    deta[4] = -0.5 * (1.0 - xi * xi);
    n[5] = 0.5 * (1.0 + xi) * (1.0 - eta * eta);
    dxi[5] = 0.5 * (1.0 - eta * eta);
    deta[5] = -eta * (1.0 + xi);
    n[6] = 0.5 * (1.0 - xi * xi) * (1.0 + eta);
    dxi[6] = -xi * (1.0 + eta);
    deta[6] = 0.5 * (1.0 - xi * xi);
    n[7] = 0.5 * (1.0 - xi) * (1.0 - eta * eta);
    dxi[7] = -0.5 * (1.0 - eta * eta);
    deta[7] = eta * (xi - 1.0);
    (n, dxi, deta)
}

/// Isotropic stiffness in Voigt order (xx, yy, zz, yz, xz, xy).
fn stiffness_voigt(material: &Material) -> [[f64; 6]; 6] {
    let (la, mu) = material.lame();
    let d = la + 2.0 * mu;
    [
        [d, la, la, 0.0, 0.0, 0.0],
        [la, d, la, 0.0, 0.0, 0.0],
        [la, la, d, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, mu, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, mu, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, mu],
    ]
}

/// Assembles the SAFE blocks with all three components free.
pub fn assemble(mesh: &CrossSectionMesh, material: &Material) -> Result<SafeMatrices, SafeError> {
    assemble_with_options(mesh, material, AssembleOptions::default())
}

/// Assembly with options (plane-strain constraint).
pub fn assemble_with_options(
    mesh: &CrossSectionMesh,
    material: &Material,
    options: AssembleOptions,
) -> Result<SafeMatrices, SafeError> {
    material.validate()?;
    let layout = if options.plane_strain_x {
        DofLayout::PlaneStrainX
    } else {
        DofLayout::Full
    };
    let comps = layout.components();
    let ndpn = comps.len();
    let ndof = mesh.node_count() * ndpn;
    let c = stiffness_voigt(material);
    let rho = material.density;

    let mut k1 = Mat::<f64>::zeros(ndof, ndof);
    let mut k2 = Mat::<f64>::zeros(ndof, ndof);
    let mut k3 = Mat::<f64>::zeros(ndof, ndof);
    let mut m = Mat::<f64>::zeros(ndof, ndof);

    // element loops; coordinates converted mm -> m so ζ comes out in rad/m
    for (ei, conn) in mesh.elements.iter().enumerate() {
        let xy: Vec<[f64; 2]> = conn
            .iter()
            .map(|&ni| {
                let n = mesh.nodes[ni];
                [n[0] * 1e-3, n[1] * 1e-3]
            })
            .collect();

        let nloc = 8 * ndpn;
        let mut k1e = vec![0.0; nloc * nloc];
        let mut k2e = vec![0.0; nloc * nloc];
        let mut k3e = vec![0.0; nloc * nloc];
        let mut me = vec![0.0; nloc * nloc];

        for &(xi, wx) in &GAUSS_3 {
            for &(eta, wy) in &GAUSS_3 {
                let (n, dxi, deta) = shape_functions(xi, eta);
                // Jacobian of the isoparametric map
                let mut j = [[0.0f64; 2]; 2];
                for k in 0..8 {
                    j[0][0] += dxi[k] * xy[k][0];
                    j[0][1] += dxi[k] * xy[k][1];
                    j[1][0] += deta[k] * xy[k][0];
                    j[1][1] += deta[k] * xy[k][1];
                }
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det <= 0.0 {
                    return Err(SafeError::DegenerateElement {
                        element: ei,
                        jacobian: det,
                    });
                }
                let inv = [
                    [j[1][1] / det, -j[0][1] / det],
                    [-j[1][0] / det, j[0][0] / det],
                ];
                let mut dx = [0.0; 8];
                let mut dy = [0.0; 8];
                for k in 0..8 {
                    dx[k] = inv[0][0] * dxi[k] + inv[0][1] * deta[k];
                    dy[k] = inv[1][0] * dxi[k] + inv[1][1] * deta[k];
                }

                // B1 (in-plane derivatives) and B2 (axial terms), 6 × nloc
                let mut b1 = vec![0.0; 6 * nloc];
                let mut b2 = vec![0.0; 6 * nloc];
                for k in 0..8 {
                    for (slot, &comp) in comps.iter().enumerate() {
                        let col = k * ndpn + slot;
                        match comp {
                            0 => {
                                b1[col] = dx[k]; // εxx
                                b1[5 * nloc + col] = dy[k]; // γxy
                                b2[4 * nloc + col] = n[k]; // γxz
                            }
                            1 => {
                                b1[nloc + col] = dy[k]; // εyy
                                b1[5 * nloc + col] = dx[k]; // γxy
                                b2[3 * nloc + col] = n[k]; // γyz
                            }
                            2 => {
                                b1[3 * nloc + col] = dy[k]; // γyz
                                b1[4 * nloc + col] = dx[k]; // γxz
                                b2[2 * nloc + col] = n[k]; // εzz
                            }
                            _ => unreachable!(),
                        }
                    }
                }

                let w = wx * wy * det;
                // accumulate BᵀCB products
                let mut cb1 = vec![0.0; 6 * nloc];
                let mut cb2 = vec![0.0; 6 * nloc];
                for r in 0..6 {
                    for q in 0..6 {
                        let crq = c[r][q];
                        if crq == 0.0 {
                            continue;
                        }
                        for col in 0..nloc {
                            cb1[r * nloc + col] += crq * b1[q * nloc + col];
                            cb2[r * nloc + col] += crq * b2[q * nloc + col];
                        }
                    }
                }
                for r in 0..nloc {
                    for q in 0..nloc {
                        let mut s11 = 0.0;
                        let mut s12 = 0.0;
                        let mut s22 = 0.0;
                        for t in 0..6 {
                            s11 += b1[t * nloc + r] * cb1[t * nloc + q];
                            s12 += b1[t * nloc + r] * cb2[t * nloc + q];
                            s22 += b2[t * nloc + r] * cb2[t * nloc + q];
                        }
                        k1e[r * nloc + q] += w * s11;
                        k2e[r * nloc + q] += w * s12;
                        k3e[r * nloc + q] += w * s22;
                    }
                }
                for a in 0..8 {
                    for b in 0..8 {
                        let nn = w * rho * n[a] * n[b];
                        for slot in 0..ndpn {
                            me[(a * ndpn + slot) * nloc + b * ndpn + slot] += nn;
                        }
                    }
                }
            }
        }

        // scatter
        for a in 0..8 {
            for slot_a in 0..ndpn {
                let ga = conn[a] * ndpn + slot_a;
                let la = a * ndpn + slot_a;
                for b in 0..8 {
                    for slot_b in 0..ndpn {
                        let gb = conn[b] * ndpn + slot_b;
                        let lb = b * ndpn + slot_b;
                        k1[(ga, gb)] += k1e[la * nloc + lb];
                        k2[(ga, gb)] += k2e[la * nloc + lb];
                        k3[(ga, gb)] += k3e[la * nloc + lb];
                        m[(ga, gb)] += me[la * nloc + lb];
                    }
                }
            }
        }
    }

    // K̂2[p][a] = K2[p][a] − K2[a][p] for in-plane p, axial a; symmetric fill.
    // K2 only couples in-plane test DOFs with axial trial DOFs and vice
    // versa, so the result is the full transformed first-order block.
    let axial_slot = comps.iter().position(|&c| c == 2).expect("axial dof");
    let mut k2_hat = Mat::<f64>::zeros(ndof, ndof);
    for p in 0..ndof {
        if p % ndpn == axial_slot {
            continue;
        }
        for node_b in 0..mesh.node_count() {
            let a = node_b * ndpn + axial_slot;
            let v = k2[(p, a)] - k2[(a, p)];
            k2_hat[(p, a)] = v;
            k2_hat[(a, p)] = v;
        }
    }

    Ok(SafeMatrices {
        k1,
        k2_hat,
        k3,
        m,
        nodes_mm: mesh.nodes.clone(),
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safe::{mesh_section, SectionProfile};

    fn one_element() -> SafeMatrices {
        let mesh = mesh_section(&SectionProfile::rectangle(10.0, 10.0), 5.0).unwrap();
        // 2x2 elements; take the matrices anyway (dimension check uses one element below)
        assemble(&mesh, &Material::ALUMINUM).unwrap()
    }

    #[test]
    fn single_element_dimension() {
        // a literal one-element mesh: 8 nodes × 3 dof = 24
        let mesh = CrossSectionMesh {
            nodes: vec![
                [0.0, 0.0],
                [10.0, 0.0],
                [10.0, 10.0],
                [0.0, 10.0],
                [5.0, 0.0],
                [10.0, 5.0],
                [5.0, 10.0],
                [0.0, 5.0],
            ],
            elements: vec![[0, 1, 2, 3, 4, 5, 6, 7]],
        };
        let mats = assemble(&mesh, &Material::ALUMINUM).unwrap();
        assert_eq!(mats.ndof(), 24);
        assert_eq!(mats.k1.nrows(), 24);
        assert_eq!(mats.k3.nrows(), 24);
    }

    #[test]
    fn shape_functions_partition_of_unity() {
        for &(xi, _) in &GAUSS_3 {
            for &(eta, _) in &GAUSS_3 {
                let (n, dxi, deta) = shape_functions(xi, eta);
                let s: f64 = n.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(dxi.iter().sum::<f64>().abs() < 1e-12);
                assert!(deta.iter().sum::<f64>().abs() < 1e-12);
            }
        }
        // nodal interpolation property at corner (-1,-1)
        let (n, _, _) = shape_functions(-1.0, -1.0);
        assert!((n[0] - 1.0).abs() < 1e-12);
        for k in 1..8 {
            assert!(n[k].abs() < 1e-12);
        }
    }

    #[test]
    fn mass_matrix_positive_definite() {
        let mats = one_element();
        let eigs = mats
            .m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap();
        assert!(eigs.iter().all(|&l| l > 0.0), "min eig = {:?}", eigs.first());
    }

    #[test]
    fn k3_positive_definite() {
        let mats = one_element();
        let eigs = mats
            .k3
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap();
        assert!(eigs.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn matrices_symmetric() {
        let mats = one_element();
        let n = mats.ndof();
        let scale = |m: &Mat<f64>| -> f64 {
            let mut s = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    s = s.max(m[(i, j)].abs());
                }
            }
            s
        };
        for mat in [&mats.k1, &mats.k2_hat, &mats.k3, &mats.m] {
            let s = scale(mat).max(1e-300);
            for i in 0..n {
                for j in 0..i {
                    assert!(
                        (mat[(i, j)] - mat[(j, i)]).abs() <= 1e-12 * s,
                        "asymmetry at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn rigid_translations_annihilated_by_k1() {
        let mats = one_element();
        let n = mats.ndof();
        let mut norm_k1 = 0.0f64;
        for i in 0..n {
            norm_k1 = norm_k1.max(mats.k1[(i, i)].abs());
        }
        for comp in 0..3 {
            let mut r = Mat::<f64>::zeros(n, 1);
            for node in 0..mats.node_count() {
                r[(mats.dof_index(node, comp).unwrap(), 0)] = 1.0;
            }
            let prod = &mats.k1 * &r;
            let mut max = 0.0f64;
            for i in 0..n {
                max = max.max(prod[(i, 0)].abs());
            }
            assert!(
                max <= 1e-9 * norm_k1,
                "K1·t_{comp} = {max:e} vs scale {norm_k1:e}"
            );
        }
    }

    #[test]
    fn k1_null_space_dimension_four() {
        // free cross-section at ζ=0, ω=0: two in-plane translations,
        // one in-plane rotation, one axial translation
        let mats = one_element();
        let eigs = mats
            .k1
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap();
        let max = eigs.iter().cloned().fold(0.0f64, f64::max);
        let n_null = eigs.iter().filter(|&&l| l.abs() < 1e-9 * max).count();
        assert_eq!(n_null, 4, "eigs near zero: {:?}", &eigs[..6.min(eigs.len())]);
    }
}
