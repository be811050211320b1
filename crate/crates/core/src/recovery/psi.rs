use crate::error::{LabError, Result};
use crate::geometry::{Mesh, Probe};
use crate::trace::{TraceBasis, TraceFunction};
use crate::vec3;

/// Support radius of `ψ_1`; `ψ_k` is supported in `B(x₀, SCALE/k)`.
pub const DEFAULT_SCALE: f64 = 0.5;

/// A scale is resolvable when its support radius spans this many boundary cells.
pub const RESOLVABLE_CELLS: f64 = 3.0;

/// Smooth bump `exp(1 - 1/(1 - r²))` on `r < 1`, with peak value 1.
pub fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Localized Dirichlet datum of unit `H^{1/2}(Γ)` norm concentrated at a probe.
#[derive(Debug, Clone)]
pub struct OscillatingDatum {
    pub k: u32,
    pub probe: Probe,
    pub trace: TraceFunction,
    pub support_radius: f64,
}

/// Support radius `scale/k`, or an error when it spans fewer than
/// [`RESOLVABLE_CELLS`] boundary cells of `mesh`.
pub fn check_resolvable(mesh: &Mesh, k: u32, scale: f64) -> Result<f64> {
    if k == 0 || !(scale > 0.0) {
        return Err(LabError::UnresolvableScale { k, reason: format!("need k >= 1 and a positive scale, got scale {scale}") });
    }
    let support = scale / k as f64;
    let required = RESOLVABLE_CELLS * mesh.boundary_cell_size();
    if support < required * (1.0 - 1e-9) {
        return Err(LabError::UnresolvableScale {
            k,
            reason: format!("support radius {support} is below {required} ({RESOLVABLE_CELLS} boundary cells)"),
        });
    }
    Ok(support)
}

/// Dyadic scales `1, 2, 4, …` up to `k_max` that pass the resolvability guard.
pub fn admissible_window(mesh: &Mesh, scale: f64, k_max: u32) -> Vec<u32> {
    std::iter::successors(Some(1u32), |k| k.checked_mul(2))
        .take_while(|k| *k <= k_max)
        .filter(|k| check_resolvable(mesh, *k, scale).is_ok())
        .collect()
}

pub fn build_psi_k(mesh: &Mesh, basis: &TraceBasis, probe: &Probe, k: u32) -> Result<OscillatingDatum> {
    build_psi_k_scaled(mesh, basis, probe, k, DEFAULT_SCALE)
}

/// `ψ_k(x) = c_k·bump(k|x - x₀|/scale)` on the boundary vertices, with `c_k`
/// fixing the `H^{1/2}(Γ)` norm to one.
pub fn build_psi_k_scaled(mesh: &Mesh, basis: &TraceBasis, probe: &Probe, k: u32, scale: f64) -> Result<OscillatingDatum> {
    if probe.domain != mesh.domain() {
        return Err(LabError::InvalidProbe(format!("probe on {} used with a {} mesh", probe.domain.name(), mesh.domain().name())));
    }
    if basis.mesh_id() != mesh.id() {
        return Err(LabError::Shape { expected: format!("trace basis of {}", mesh.id()), found: basis.mesh_id().to_string() });
    }
    let support = check_resolvable(mesh, k, scale)?;
    let raw: Vec<f64> = mesh.boundary_points().iter().map(|p| bump(vec3::dist(p, &probe.x0) / support)).collect();
    let norm = basis.hs_norm(&raw, 0.5)?;
    if !(norm > 0.0) {
        return Err(LabError::UnresolvableScale { k, reason: "no boundary vertex inside the support".into() });
    }
    let coeffs = raw.into_iter().map(|v| v / norm).collect();
    Ok(OscillatingDatum { k, probe: *probe, trace: TraceFunction::new(basis, coeffs)?, support_radius: support })
}
