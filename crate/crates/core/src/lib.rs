//! Spectral toolkit for the 2n-component Camassa–Holm type systems on the
//! flat torus `ℝⁿ/ℤⁿ`: Euler-form dynamics, Lagrangian flow reconstruction,
//! conservation monitors, sectional curvature and the mode-level identities
//! that single out `b = 2` among the μ-b-equations.

pub mod calculus;
pub mod conservation;
pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod geodesic;
pub mod inertia;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use inertia::{Equation, ModelParams};
pub use spectral::{Field, Grid, Spectrum};
pub use state::{EulerState, Tangent};
