//! Quasi-3D stationary heat conduction in a spray-cooled stator winding.
//!
//! A 2D P1 triangulation of the conductor cross-section is extruded along the
//! winding direction with quadratic Lagrange elements. The 3D operators are
//! Kronecker products of the 2D and 1D ones and are applied matrix-free.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod axial;
pub mod config;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod model;
pub mod postproc;
pub mod quasi3d;
pub mod solver;
pub mod sparse;
pub mod spray;
pub mod units;
pub mod validation;

pub use axial::{AxialGrid, AxialRegime};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use fem::{Material, MaterialField};
pub use mesh::{CrossSection, CrossSectionSpec, Mesh2D, Probe, Region};
pub use model::{ModelParameters, Solution, WindingModel};
pub use postproc::{
    AxialProfile, EnergyBalance, SolutionField, SweepParameter, SweepResult, WindingMetrics,
};
pub use quasi3d::{build_system, Cooling, KroneckerOperator, Quasi3DSystem, SystemBuilder};
pub use solver::{SolveReport, SolverMethod, SolverOptions};
pub use sparse::{CsrMatrix, LinearOperator};
pub use spray::{ImpactRegime, SprayParameters};
pub use units::{Dimension, Quantity};
pub use validation::{Check, ValidationReport};
