//! Construction of localized quasi-periodic solutions of a nonlinear wave
//! equation on a lattice, together with the non-resonance certificates and
//! Green's function diagnostics the construction relies on.

pub mod lattice;
pub mod linalg;
pub mod spectrum;
pub mod nonlin;
pub mod linop;
pub mod solver;

pub use lattice::{RegionSpec, ResonantSet, Site};
pub use linalg::Backend;
pub use nonlin::CoefficientField;
pub use solver::{IterationTrace, Solution, SolverConfig, SolverError};
pub use spectrum::{CertKind, Certificate, ModelParams};
