//! 3D velocity–stress finite-difference elastodynamics on a staggered grid,
//! reciprocity pair checks, and the modal-superposition scan generator.
//!
//! The simulator exists to verify measurement reciprocity numerically: its
//! spatial operator is assembled so that source injection and receiver
//! sampling are exact transposes of each other (identical stencils, shared
//! staggered nodes), which makes the matched-projection comparison limited
//! only by roundoff and time discretization. All outer faces are traction
//! free (shear components on a face are pinned to zero, normal stresses
//! enter the boundary velocity update through their antisymmetric image);
//! point supports add a spring traction along the surface normal only.

mod fdtd;
mod reciprocity;
mod synth;

pub use fdtd::{
    build_sim, EnergySample, Pulse, PointSource, ReceiverRecord, ReceiverSpec, SimConfig,
    SimOutput, SimState, SpringSupport,
};
pub use reciprocity::{
    reciprocity_pair_check, write_report_traces_csv, PairGeometry, ReciprocityCheckConfig,
    ReciprocityReport, TracePair,
};
pub use synth::{synth_scan, BranchWeight, DefectGain, SynthScanConfig};

use thiserror::Error;

/// Simulator failures.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("CFL violation: dt {dt:e} s exceeds {limit:e} s for spacing {h} mm")]
    CflViolation { dt: f64, limit: f64, h: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("position {position:?} mm is not on the domain surface")]
    OffSurface { position: [f64; 3] },
    #[error("direction {direction:?} is not a unit vector")]
    NotUnitDirection { direction: [f64; 3] },
    #[error("numerical blow-up (non-finite field) at step {step}")]
    NumericalBlowup { step: usize },
    #[error("excitation band [{lo}, {hi}] Hz exceeds dispersion coverage [{cov_lo}, {cov_hi}] Hz")]
    BandOutsideCoverage {
        lo: f64,
        hi: f64,
        cov_lo: f64,
        cov_hi: f64,
    },
    #[error(transparent)]
    Material(#[from] crate::material::MaterialError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
