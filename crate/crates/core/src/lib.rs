//! Numerical laboratory for symmetric scalar phase-transition problems on
//! planar domains.
//!
//! The library builds discrete local minimizers of the Allen-Cahn energy
//! `J(u) = ∫ (|∇u|²/2 + W(u))` with odd symmetry in `x₁`, together with the
//! 1D machinery around them: the heteroclinic connection of the double well,
//! the linearized transverse operator and its parity-split spectrum, radial
//! comparison solutions of `Δφ = c²φ`, and post-processing checks that turn
//! exponential saturation / profile-convergence estimates into pass-fail
//! reports with fitted envelope constants.
//!
//! The `aclab` binary exposes the same functionality as batch subcommands
//! driven by a TOML config; see the repository README.

pub mod comparison;
pub mod config;
pub mod energy;
pub mod geometry;
pub mod numerics;
pub mod potential;
pub mod profile;
pub mod run;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use comparison::{fit_k0, monotonicity_check, pointwise_bound_check, radial_solve, ComparisonSolution};
pub use energy::{total_energy, EnergyBreakdown, Region, Slice1d};
pub use geometry::{distance_field, Cylinder, DistanceTarget, Field, Grid, SymmetricDomain};
pub use potential::{Potential, WellConstants};
pub use profile::Profile1d;
pub use solver::{solve_dirichlet, BoundaryData, SolveConfig, SolveReport};
pub use spectral::{parity_eigen, Parity, SpectralResult};
pub use verify::DecayFit;
