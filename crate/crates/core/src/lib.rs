//! Flat-core formation for `-εΔ_p u = u^{q-1} f(a(x) - u)` with affine `a`:
//! P1 solvers for the main and absorption problems, energy diagnostics,
//! eigenvalues and scaling experiments.

pub mod deadcore;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod oned;
pub mod output;
pub mod par;
pub mod plap;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
