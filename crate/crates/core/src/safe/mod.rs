//! Semi-analytical finite element (SAFE) dispersion analysis.
//!
//! The waveguide cross-section is meshed with 8-node serendipity
//! quadrilaterals; the axial direction is treated analytically with the
//! `e^{i(ζz − ωt)}` ansatz. At a given frequency the discrete weak form
//! becomes a quadratic eigenvalue problem in the wavenumber ζ, solved by
//! companion linearization ([`solve_at_frequency`]). Branches are connected
//! across frequency by modal-assurance matching ([`trace_branches`]) and
//! classified by their dominant cross-section kinematics ([`classify_mode`]).

mod assemble;
mod branches;
mod mesh;
mod solve;

pub use assemble::{assemble, assemble_with_options, AssembleOptions, SafeMatrices};
pub use branches::{
    classify_mode, group_velocity, pair_into_branches, read_dispersion_csv, trace_branches,
    write_dispersion_csv, DispersionBranch, DispersionSet, MAC_THRESHOLD,
};
pub use mesh::{mesh_section, CrossSectionMesh};
pub use solve::{solve_at_frequency, ModeSolution, PROPAGATING_IM_RE_RATIO};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// SAFE pipeline failures.
#[derive(Debug, Error)]
pub enum SafeError {
    #[error("invalid section profile: {0}")]
    InvalidProfile(String),
    #[error("meshing failed: {0}")]
    Mesh(String),
    #[error("degenerate element {element}: Jacobian {jacobian} at a Gauss point")]
    DegenerateElement { element: usize, jacobian: f64 },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("frequency grid must be strictly increasing with ≥3 points")]
    BadFrequencyGrid,
    #[error("branch {branch} has duplicate wavenumbers near point {point}; cannot differentiate")]
    DuplicateWavenumber { branch: usize, point: usize },
    #[error("mode shape residual {residual:e} exceeds {limit:e} at f = {frequency} Hz")]
    ResidualTooLarge {
        residual: f64,
        limit: f64,
        frequency: f64,
    },
    #[error(transparent)]
    Material(#[from] crate::material::MaterialError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dispersion CSV parse error: {0}")]
    CsvParse(String),
}

/// Axis-aligned rectangle in the cross-section plane (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        x >= self.x0 - tol && x <= self.x1 + tol && y >= self.y0 - tol && y <= self.y1 + tol
    }

    /// True when the rectangles share area or an edge segment of positive length.
    fn touches(&self, other: &Rect) -> bool {
        let ox = self.x1.min(other.x1) - self.x0.max(other.x0);
        let oy = self.y1.min(other.y1) - self.y0.max(other.y0);
        (ox > 0.0 && oy >= 0.0) || (ox >= 0.0 && oy > 0.0)
    }
}

/// I-section parameterization (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ISectionParams {
    /// Total section height.
    pub height_mm: f64,
    /// Flange width.
    pub flange_width_mm: f64,
    /// Flange thickness.
    pub flange_thickness_mm: f64,
    /// Web thickness.
    pub web_thickness_mm: f64,
}

/// A cross-section profile: a connected union of axis-aligned rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionProfile {
    /// Rectangles whose union is the section.
    pub rects: Vec<Rect>,
    /// Local flange thinning depth (mm) applied to the lower flange, if any.
    /// Recorded so thinned-region dispersion can be meshed on request.
    pub thinning_depth_mm: Option<f64>,
}

impl SectionProfile {
    /// A single solid rectangle, centered on the origin.
    pub fn rectangle(width_mm: f64, height_mm: f64) -> SectionProfile {
        SectionProfile {
            rects: vec![Rect::new(
                -width_mm / 2.0,
                0.0,
                width_mm / 2.0,
                height_mm,
            )],
            thinning_depth_mm: None,
        }
    }

    /// A wide thin strip used as a plate surrogate.
    pub fn plate_strip(width_mm: f64, thickness_mm: f64) -> SectionProfile {
        SectionProfile::rectangle(width_mm, thickness_mm)
    }

    /// Symmetric I-section: web centered on x = 0, flanges at bottom and top,
    /// y from 0 (bottom face) to `height_mm`.
    pub fn i_section(p: ISectionParams) -> SectionProfile {
        let h = p.height_mm;
        let w2 = p.flange_width_mm / 2.0;
        let tf = p.flange_thickness_mm;
        let tw2 = p.web_thickness_mm / 2.0;
        SectionProfile {
            rects: vec![
                Rect::new(-w2, 0.0, w2, tf),
                Rect::new(-tw2, tf, tw2, h - tf),
                Rect::new(-w2, h - tf, w2, h),
            ],
            thinning_depth_mm: None,
        }
    }

    /// Same I-section with the lower flange thinned by `depth_mm`
    /// (material removed from the bottom face).
    pub fn i_section_thinned(p: ISectionParams, depth_mm: f64) -> SectionProfile {
        let mut profile = SectionProfile::i_section(p);
        profile.rects[0].y0 += depth_mm;
        profile.thinning_depth_mm = Some(depth_mm);
        profile
    }

    /// Built-in I-beam preset used throughout the toolkit.
    ///
    /// The exact flange/web proportions are approximate: 100 mm tall,
    /// 70 mm wide, 6 mm walls, aluminum. See [`paper_i_params`].
    pub fn paper_i_beam() -> SectionProfile {
        SectionProfile::i_section(paper_i_params())
    }

    /// Checks positive dimensions and that the union is connected.
    pub fn validate(&self) -> Result<(), SafeError> {
        if self.rects.is_empty() {
            return Err(SafeError::InvalidProfile("no rectangles".into()));
        }
        for (i, r) in self.rects.iter().enumerate() {
            if !(r.width() > 0.0 && r.height() > 0.0) {
                return Err(SafeError::InvalidProfile(format!(
                    "rectangle {i} has non-positive size {}×{}",
                    r.width(),
                    r.height()
                )));
            }
        }
        // connectivity by BFS over the touch graph
        let n = self.rects.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.rects[i].touches(&self.rects[j]) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(SafeError::InvalidProfile(
                "rectangles do not form a connected region".into(),
            ));
        }
        Ok(())
    }

    /// Thinnest wall: the smallest rectangle dimension in the union.
    pub fn thinnest_wall_mm(&self) -> f64 {
        self.rects
            .iter()
            .map(|r| r.width().min(r.height()))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `(x, y)` lies inside the union (tolerance in mm).
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        self.rects.iter().any(|r| r.contains(x, y, tol))
    }
}

/// Parameters of the built-in I-beam preset (mm).
pub fn paper_i_params() -> ISectionParams {
    ISectionParams {
        height_mm: 100.0,
        flange_width_mm: 70.0,
        flange_thickness_mm: 6.0,
        web_thickness_mm: 6.0,
    }
}

/// Kinematic class of a guided mode's cross-section shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    HorizontalBending,
    Torsion,
    VerticalBending,
    WebBending,
    Other,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModeLabel::HorizontalBending => "horizontal_bending",
            ModeLabel::Torsion => "torsion",
            ModeLabel::VerticalBending => "vertical_bending",
            ModeLabel::WebBending => "web_bending",
            ModeLabel::Other => "other",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ModeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "horizontal_bending" => Ok(ModeLabel::HorizontalBending),
            "torsion" => Ok(ModeLabel::Torsion),
            "vertical_bending" => Ok(ModeLabel::VerticalBending),
            "web_bending" => Ok(ModeLabel::WebBending),
            "other" => Ok(ModeLabel::Other),
            other => Err(format!("unknown mode label `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i_section_is_connected() {
        SectionProfile::paper_i_beam().validate().unwrap();
    }

    #[test]
    fn disconnected_profile_rejected() {
        let p = SectionProfile {
            rects: vec![Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(5.0, 5.0, 6.0, 6.0)],
            thinning_depth_mm: None,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_width_web_rejected() {
        let p = SectionProfile::i_section(ISectionParams {
            height_mm: 100.0,
            flange_width_mm: 70.0,
            flange_thickness_mm: 6.0,
            web_thickness_mm: 0.0,
        });
        assert!(p.validate().is_err());
    }

    #[test]
    fn thinning_reduces_lower_flange() {
        let p = paper_i_params();
        let thinned = SectionProfile::i_section_thinned(p, 4.2);
        assert!((thinned.rects[0].height() - (6.0 - 4.2)).abs() < 1e-12);
        assert_eq!(thinned.thinning_depth_mm, Some(4.2));
    }
}
