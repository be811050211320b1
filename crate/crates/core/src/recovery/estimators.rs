use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fem::{assemble_stiffness, Conductivity, DirichletSolver, Field};
use crate::geometry::{Mesh, Probe};
use crate::kernels::{pole_energy, PoleConfig};
use crate::linalg::CsrMatrix;
use crate::recovery::psi::{build_psi_k, OscillatingDatum};
use crate::trace::TraceBasis;

/// Reference pairings below this are treated as a vanishing datum.
pub const DEGENERATE_PAIRING: f64 = 1e-14;

/// Factored Dirichlet problem of one conductivity, for repeated
/// extensions and DtN pairings `⟨Λg, g⟩ = Q_σ(u_σ(g))`.
pub struct DirichletEnergy {
    stiffness: CsrMatrix,
    solver: DirichletSolver,
}

impl DirichletEnergy {
    pub fn new(mesh: &Mesh, cond: &Conductivity) -> Result<Self> {
        cond.validate_on(mesh)?;
        let stiffness = assemble_stiffness(mesh, cond)?;
        let solver = DirichletSolver::new(mesh, &stiffness)?;
        Ok(DirichletEnergy { stiffness, solver })
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn extension(&self, g: &[f64]) -> Result<Field> {
        self.solver.solve(g)
    }

    /// `⟨Λ_σ g, g⟩` together with the extension that realizes it.
    pub fn pairing(&self, g: &[f64]) -> Result<(f64, Field)> {
        let u = self.extension(g)?;
        Ok((self.stiffness.form(&u, &u), u))
    }
}

/// `⟨Λ_σψ_k, ψ_k⟩ / ⟨Λ_1ψ_k, ψ_k⟩` from prefactored problems.
pub fn kv_estimate(sigma: &DirichletEnergy, unit: &DirichletEnergy, datum: &OscillatingDatum) -> Result<f64> {
    let g = &datum.trace.coeffs;
    let (den, _) = unit.pairing(g)?;
    if !(den.abs() >= DEGENERATE_PAIRING) {
        return Err(LabError::DegenerateDatum(den));
    }
    let (num, _) = sigma.pairing(g)?;
    Ok(num / den)
}

/// Oscillating-datum estimate of `σ(x₀)`.
pub fn kv_estimate_sigma(mesh: &Mesh, basis: &TraceBasis, cond: &Conductivity, probe: &Probe, k: u32) -> Result<f64> {
    let datum = build_psi_k(mesh, basis, probe, k)?;
    let sigma = DirichletEnergy::new(mesh, cond)?;
    let unit = DirichletEnergy::new(mesh, &Conductivity::constant(1.0)?)?;
    kv_estimate(&sigma, &unit, &datum)
}

/// Singular-solution estimate with its normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularEstimate {
    pub delta: f64,
    pub sigma_hat: f64,
    /// `E_δ = ∫|∇H(·, y_δ)|²`
    pub pole_energy: f64,
    /// `⟨Λ_1 g_δ, g_δ⟩`
    pub reference_energy: f64,
    /// `1 - ⟨Λ_1 g_δ, g_δ⟩/E_δ`: relative mismatch between discrete and kernel energy.
    pub gradient_gap: f64,
    /// `⟨Λ_σ g_δ, g_δ⟩/⟨Λ_1 g_δ, g_δ⟩`, the same quotient normalized by the discrete reference energy.
    pub discrete_ratio: f64,
}

/// `1 + ⟨(Λ_σ − Λ_1)g_δ, g_δ⟩ / E_δ` with `g_δ` the trace of `H(·, y_δ)`.
pub fn singular_estimate_with(
    mesh: &Mesh,
    sigma: &DirichletEnergy,
    unit: &DirichletEnergy,
    probe: &Probe,
    delta: f64,
) -> Result<SingularEstimate> {
    let pole = PoleConfig::new(*probe, delta)?;
    let g = pole.trace(mesh);
    let e = pole_energy(mesh, &pole)?;
    let (q1, _) = unit.pairing(&g)?;
    let (qs, _) = sigma.pairing(&g)?;
    if !(q1.abs() >= DEGENERATE_PAIRING) {
        return Err(LabError::DegenerateDatum(q1));
    }
    Ok(SingularEstimate {
        delta,
        sigma_hat: 1.0 + (qs - q1) / e, pole_energy: e, reference_energy: q1, gradient_gap: 1.0 - q1 / e,
        discrete_ratio: qs / q1,
    })
}

pub fn singular_estimate_sigma(mesh: &Mesh, cond: &Conductivity, probe: &Probe, delta: f64) -> Result<SingularEstimate> {
    let sigma = DirichletEnergy::new(mesh, cond)?;
    let unit = DirichletEnergy::new(mesh, &Conductivity::constant(1.0)?)?;
    singular_estimate_with(mesh, &sigma, &unit, probe, delta)
}
