//! Boundary determination: localized data, the two boundary estimators of
//! `σ|_Γ`, decay and concentration diagnostics, and stability sweeps.

mod decay;
mod estimators;
mod psi;
mod stability;

pub use decay::{concentration_with, exterior_decay_profile, exterior_decay_with, Concentration};
pub use estimators::{
    kv_estimate, kv_estimate_sigma, singular_estimate_sigma, singular_estimate_with, DirichletEnergy, SingularEstimate,
    DEGENERATE_PAIRING,
};
pub use psi::{
    admissible_window, build_psi_k, build_psi_k_scaled, bump, check_resolvable, OscillatingDatum, DEFAULT_SCALE,
    RESOLVABLE_CELLS,
};
pub use stability::{
    boundary_gaps, bump_family, csv_field, normal_layer_family, records_csv, stability_sweep, StabilityPair,
    StabilityRecord, SweepResult, SUP_SAMPLES,
};
