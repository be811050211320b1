use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fem::{elements, Conductivity};
use crate::geometry::{Mesh, Probe};
use crate::recovery::estimators::DirichletEnergy;
use crate::recovery::psi::{build_psi_k, OscillatingDatum};
use crate::trace::TraceBasis;
use crate::vec3;

/// Per-tet `(|∇u|²·vol, ∫u²)` for a P1 field.
fn tet_densities(mesh: &Mesh, u: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(elements(mesh)?
        .iter()
        .zip(mesh.tets())
        .map(|(el, tet)| {
            let local = tet.map(|i| u[i]);
            let g = el.gradient(local);
            let sum: f64 = local.iter().sum();
            let sq: f64 = local.iter().map(|v| v * v).sum();
            (el.volume * vec3::dot(&g, &g), el.volume / 20.0 * (sq + sum * sum))
        })
        .collect())
}

fn check_rho(datum: &OscillatingDatum, rho: f64) -> Result<()> {
    if !(rho >= 2.0 * datum.support_radius * (1.0 - 1e-12)) {
        return Err(LabError::UnresolvableScale {
            k: datum.k,
            reason: format!("rho = {rho} is below twice the support radius {}", datum.support_radius),
        });
    }
    Ok(())
}

/// `(ρ, ‖u‖_{H¹(Ω∖B̄_ρ)})` for the σ-harmonic extension of a datum, with the
/// quadrature restricted to tets whose centroid lies outside `B(x₀, ρ)`.
pub fn exterior_decay_with(mesh: &Mesh, sigma: &DirichletEnergy, datum: &OscillatingDatum, rhos: &[f64]) -> Result<Vec<(f64, f64)>> {
    for &rho in rhos {
        check_rho(datum, rho)?;
    }
    let u = sigma.extension(&datum.trace.coeffs)?;
    let dens = tet_densities(mesh, &u)?;
    let dist: Vec<f64> = (0..mesh.tets().len()).map(|t| vec3::dist(&mesh.centroid(t), &datum.probe.x0)).collect();
    Ok(rhos
        .iter()
        .map(|&rho| {
            let sq: f64 = dens.iter().zip(&dist).filter(|(_, d)| **d > rho).map(|((a, b), _)| a + b).sum();
            (rho, sq.sqrt())
        })
        .collect())
}

pub fn exterior_decay_profile(
    mesh: &Mesh,
    basis: &TraceBasis,
    cond: &Conductivity,
    probe: &Probe,
    k: u32,
    rhos: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let datum = build_psi_k(mesh, basis, probe, k)?;
    exterior_decay_with(mesh, &DirichletEnergy::new(mesh, cond)?, &datum, rhos)
}

/// Local energy quantities of `u_σ^k` in `B(x₀, ρ) ∩ Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub k: u32,
    pub rho: f64,
    /// `‖∇u‖_{L²(B_ρ∩Ω)}`
    pub local_gradient: f64,
    /// `‖∇u‖_{L²(B_ρ∩Ω)} + 1/(ρk) + 1/k`, bounded below uniformly in `k`.
    pub lower_bound_sum: f64,
    /// `∫_{B_ρ∩Ω} dist(x, Γ)|∇u|²`, of order `1/k`.
    pub weighted_energy: f64,
}

pub fn concentration_with(mesh: &Mesh, sigma: &DirichletEnergy, datum: &OscillatingDatum, rho: f64) -> Result<Concentration> {
    if !(rho > 0.0) {
        return Err(LabError::Range { what: "rho", value: rho, min: 0.0, max: f64::INFINITY });
    }
    let u = sigma.extension(&datum.trace.coeffs)?;
    let dens = tet_densities(mesh, &u)?;
    let domain = mesh.domain();
    let (mut grad, mut weighted) = (0.0, 0.0);
    for (t, (g, _)) in dens.iter().enumerate() {
        let c = mesh.centroid(t);
        if vec3::dist(&c, &datum.probe.x0) < rho {
            grad += g;
            weighted += domain.distance_to_boundary(&c) * g;
        }
    }
    let k = datum.k as f64;
    let local_gradient = grad.sqrt();
    Ok(Concentration {
        k: datum.k,
        rho,
        local_gradient,
        lower_bound_sum: local_gradient + 1.0 / (rho * k) + 1.0 / k,
        weighted_energy: weighted,
    })
}
