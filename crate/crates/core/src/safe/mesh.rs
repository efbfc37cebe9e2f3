//! Structured conforming mesher for rectangle-union cross-sections.
//!
//! The union's rectangle edges induce a tensor grid of segments; each segment
//! is subdivided so the nodal spacing (which, for 8-node serendipity
//! elements, is half the element edge) approximates the requested target.
//! Every segment gets at least two elements so each wall is resolved in
//! bending through its thickness.

use super::{SafeError, SectionProfile};
use std::collections::HashMap;

/// Local node numbering on the 8-node serendipity quadrilateral:
/// corners 0..4 counter-clockwise from (−1, −1), then mid-sides
/// 4: (0, −1), 5: (1, 0), 6: (0, 1), 7: (−1, 0).
pub const SERENDIPITY_LOCAL: [(i64, i64); 8] = [
    (0, 0),
    (2, 0),
    (2, 2),
    (0, 2),
    (1, 0),
    (2, 1),
    (1, 2),
    (0, 1),
];

/// Cross-section mesh of 8-node quadrilaterals. Coordinates in mm.
#[derive(Debug, Clone)]
pub struct CrossSectionMesh {
    /// Node coordinates (x, y) in mm.
    pub nodes: Vec<[f64; 2]>,
    /// Element connectivity, 8 node indices each (see [`SERENDIPITY_LOCAL`]).
    pub elements: Vec<[usize; 8]>,
}

impl CrossSectionMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Axis-aligned bounding box (x_min, y_min, x_max, y_max).
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for n in &self.nodes {
            bb[0] = bb[0].min(n[0]);
            bb[1] = bb[1].min(n[1]);
            bb[2] = bb[2].max(n[0]);
            bb[3] = bb[3].max(n[1]);
        }
        bb
    }
}

/// Segment breakpoints of the tensor grid along one axis.
fn breakpoints(values: impl Iterator<Item = (f64, f64)>) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::new();
    for (a, b) in values {
        pts.push(a);
        pts.push(b);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    pts
}

/// Subdivides segment breakpoints into element edges.
///
/// Each segment of length L gets `max(2, round(L / (2·spacing)))` elements,
/// so adjacent nodes sit roughly `spacing` apart once mid-side nodes are
/// counted, and no wall is ever a single element through its thickness.
fn refine(breaks: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / (2.0 * spacing)).round() as usize).max(2);
        for k in 1..=n {
            out.push(w[0] + len * k as f64 / n as f64);
        }
    }
    out
}

/// Meshes the rectangle union with 8-node quadrilaterals.
///
/// `target_spacing_mm` is the desired nodal spacing (mid-side nodes count).
/// Spacing coarser than the thinnest wall is rejected. Accuracy at a given
/// frequency additionally requires the spacing to stay below a fifth of the
/// shortest wavelength of interest; that is the caller's duty.
pub fn mesh_section(
    profile: &SectionProfile,
    target_spacing_mm: f64,
) -> Result<CrossSectionMesh, SafeError> {
    profile.validate()?;
    if !(target_spacing_mm > 0.0) {
        return Err(SafeError::Mesh(format!(
            "target spacing must be > 0, got {target_spacing_mm}"
        )));
    }
    let thinnest = profile.thinnest_wall_mm();
    if target_spacing_mm > thinnest {
        return Err(SafeError::Mesh(format!(
            "spacing {target_spacing_mm} mm exceeds thinnest wall {thinnest} mm"
        )));
    }

    let xs = refine(
        &breakpoints(profile.rects.iter().map(|r| (r.x0, r.x1))),
        target_spacing_mm,
    );
    let ys = refine(
        &breakpoints(profile.rects.iter().map(|r| (r.y0, r.y1))),
        target_spacing_mm,
    );

    let tol = 1e-9;
    let mut node_ids: HashMap<(i64, i64), usize> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut elements: Vec<[usize; 8]> = Vec::new();

    // Coordinate on the doubled (half-step) lattice.
    let coord = |axis: &[f64], idx2: i64| -> f64 {
        let i = (idx2 / 2) as usize;
        if idx2 % 2 == 0 {
            axis[i]
        } else {
            0.5 * (axis[i] + axis[i + 1])
        }
    };

    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if !profile.contains(cx, cy, tol) {
                continue;
            }
            let mut conn = [0usize; 8];
            for (slot, (dx, dy)) in SERENDIPITY_LOCAL.iter().enumerate() {
                let key = (2 * i as i64 + dx, 2 * j as i64 + dy);
                let id = *node_ids.entry(key).or_insert_with(|| {
                    nodes.push([coord(&xs, key.0), coord(&ys, key.1)]);
                    nodes.len() - 1
                });
                conn[slot] = id;
            }
            elements.push(conn);
        }
    }

    if elements.is_empty() {
        return Err(SafeError::Mesh("no active elements inside profile".into()));
    }
    Ok(CrossSectionMesh { nodes, elements })
}
