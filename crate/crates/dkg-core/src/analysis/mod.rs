//! Diagnostics: energies and ghost-weight ledgers, the balance-law residual,
//! normal-form transformation residuals, decay fits, scattering traces, the
//! weighted data norm, and interior/Sobolev pointwise probes.
//!
//! Everything here reads immutable snapshots and may run concurrently with
//! the evolution loop; ledger updates are single-writer.

pub mod energies;
pub mod fits;
pub mod ghost;
pub mod ghost_identity;
pub mod interior;
pub mod smallness;
pub mod sobolev;
pub mod transforms;

pub use energies::{
    aux_conformal_energy, aux_wave_energy, conformal_energy, dirac_ghost_rate, dirac_mass,
    energy_snapshot, exterior_norm_scalar, exterior_norm_spinor, kg_energy, kg_ghost_rate,
    minus_bracket_field, wave_energy, weighted_sup_scalar, EnergyLedger,
};
pub use fits::{decay_fit, scattering_trace, DecayFit, ScatterTrace};
pub use ghost::GhostPrimitive;
pub use ghost_identity::{ghost_identity_residual, GhostSample};
pub use interior::{dirac_interior_ratio, kg_interior_ratio};
pub use smallness::smallness_norm;
pub use sobolev::sobolev_quotient;
pub use transforms::{
    aux_constraint_residual, transform_fields, transform_residual, ResidualKind, TransformBundle,
};
