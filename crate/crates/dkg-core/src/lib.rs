//! Numerical toolkit for the two-dimensional Dirac/Klein-Gordon system with
//! Yukawa coupling:
//!
//! ```text
//! -i g^mu d_mu psi = v psi
//! -Box v + v      = psi* g0 psi
//! ```
//!
//! on a periodic box, using exact Fourier-space free flows composed by Strang
//! splitting. Alongside the integrator, the crate carries the pointwise
//! Clifford algebra, the symmetry vector fields, ghost-weight and conformal
//! energies, normal-form transformation residuals, decay-rate fits, and
//! scattering-profile extraction.

pub mod analysis;
pub mod checks;
pub mod error;
pub mod evolver;
pub mod grid;
pub mod propagators;
pub mod spinor;
pub mod vector_fields;

pub use error::DkgError;
