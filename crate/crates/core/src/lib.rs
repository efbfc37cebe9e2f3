//! Guided-wave nondestructive-testing toolkit for beam-like structures.
//!
//! The crate covers the full multi-point impact-scan workflow:
//!
//! - [`dataset`] — on-disk scan-dataset format (manifest + binary trace blobs)
//!   and plot/export products (CSV heatmaps, point clouds).
//! - [`signal`] — hammer/accelerometer record conditioning: soft-trigger
//!   alignment, force normalization, acceleration-to-displacement integration,
//!   drift removal, and Butterworth band filtering.
//! - [`safe`] — semi-analytical finite element dispersion curves for prismatic
//!   waveguides meshed with 8-node quadrilaterals.
//! - [`wavefield`] — frequency-domain B-scans and wavenumber–frequency maps
//!   with dispersion-curve overlays.
//! - [`mip`] — maximum-intensity-projection defect detection with
//!   position-dependent early-arrival time windows.
//! - [`sim`] — a small 3D staggered-grid elastodynamic simulator used to
//!   verify measurement reciprocity numerically, plus a modal-superposition
//!   generator for synthetic scan datasets.

pub mod dataset;
pub mod material;
pub mod mip;
pub mod safe;
pub mod signal;
pub mod sim;
pub mod wavefield;

use serde::{Deserialize, Serialize};

/// Cartesian axis tag used for displacement components and surface normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Index into an `[x, y, z]` triple.
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// Unit vector along the axis.
    pub fn unit(self) -> [f64; 3] {
        let mut e = [0.0; 3];
        e[self.index()] = 1.0;
        e
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
            Axis::Z => write!(f, "z"),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}` (expected x, y, or z)")),
        }
    }
}

/// Relative L2 distance between two equally long sequences.
///
/// Returns `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or 0 when both are identically zero.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_l2 length mismatch");
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    let denom = na.max(nb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        diff.sqrt() / denom
    }
}
