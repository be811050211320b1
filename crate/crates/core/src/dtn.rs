//! Discrete Dirichlet-to-Neumann operators as Schur complements onto the
//! boundary degrees of freedom.

use std::fmt::Write as _;
use std::path::Path;

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::fem::{assemble_stiffness, tet_energies, Conductivity, DirichletSolver};
use crate::geometry::Mesh;
use crate::linalg::{self, CsrMatrix};
use crate::trace::TraceBasis;

/// Boundary columns handled per back-solve batch.
const BLOCK: usize = 64;

/// Dense symmetric matrix of `Λ` on boundary vertices: maps nodal Dirichlet
/// data to the load vector of the conormal flux.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    matrix: Mat<f64>,
    cond_id: String,
    mesh_id: String,
    metadata: Vec<(String, String)>,
}

/// `K_ΓΓ − K_ΓI K_II^{-1} K_IΓ` for any matrix whose interior block is SPD.
pub fn schur_complement(mesh: &Mesh, k: &CsrMatrix) -> Result<Mat<f64>> {
    let solver = DirichletSolver::new(mesh, k)?;
    Ok(schur_with(mesh, k, &solver))
}

pub(crate) fn schur_with(mesh: &Mesh, k: &CsrMatrix, solver: &DirichletSolver) -> Mat<f64> {
    let boundary = mesh.boundary_vertices();
    let nb = boundary.len();
    let k_bb = k.submatrix(boundary, boundary);
    let k_ib = solver.coupling();
    let k_bi = k.submatrix(boundary, solver.interior());
    let ni = solver.interior().len();
    let starts: Vec<usize> = (0..nb).step_by(BLOCK).collect();
    let blocks: Vec<Mat<f64>> = starts
        .par_iter()
        .map(|&start| {
            let width = BLOCK.min(nb - start);
            // columns of K_IΓ for this block
            let mut rhs = Mat::<f64>::zeros(ni, width);
            for i in 0..ni {
                for (c, v) in k_ib.row(i) {
                    if c >= start && c < start + width {
                        rhs[(i, c - start)] = v;
                    }
                }
            }
            let x = if ni > 0 { solver.solve_interior_dense(rhs.as_ref()) } else { rhs };
            k_bi.mul_dense(x.as_ref())
        })
        .collect();
    let mut out = k_bb.to_dense();
    for (start, block) in starts.iter().zip(blocks) {
        for j in 0..block.ncols() {
            for i in 0..nb {
                out[(i, start + j)] -= block[(i, j)];
            }
        }
    }
    out
}

impl DtnOperator {
    /// `Λ_σ` for a (possibly anisotropic) conductivity.
    pub fn assemble(mesh: &Mesh, cond: &Conductivity) -> Result<Self> {
        cond.validate_on(mesh)?;
        let k = assemble_stiffness(mesh, cond)?;
        let mut metadata = vec![("family".to_string(), cond.family().map_or("custom", |f| f.name()).to_string())];
        if let Some(f) = cond.family() {
            metadata.extend(f.parameters().into_iter().map(|(k, v)| (format!("param.{k}"), v)));
        }
        if let Some(a) = cond.matrix() {
            metadata.push(("matrix".into(), serde_json::to_string(a)?));
        }
        Ok(DtnOperator { matrix: schur_complement(mesh, &k)?, cond_id: cond.id().to_string(), mesh_id: mesh.id().to_string(), metadata })
    }

    /// Wrap a precomputed boundary operator.
    pub fn from_matrix(mesh: &Mesh, matrix: Mat<f64>, cond_id: impl Into<String>) -> Result<Self> {
        let nb = mesh.n_boundary();
        if matrix.nrows() != nb || matrix.ncols() != nb {
            return Err(LabError::Shape { expected: format!("{nb}x{nb}"), found: format!("{}x{}", matrix.nrows(), matrix.ncols()) });
        }
        Ok(DtnOperator { matrix, cond_id: cond_id.into(), mesh_id: mesh.id().to_string(), metadata: Vec::new() })
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn cond_id(&self) -> &str {
        &self.cond_id
    }

    pub fn mesh_id(&self) -> &str {
        &self.mesh_id
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let v = Mat::from_fn(g.len(), 1, |i, _| g[i]);
        let r = &self.matrix * &v;
        (0..self.dim()).map(|i| r[(i, 0)]).collect()
    }

    /// `⟨Λg, h⟩ = hᵀ Λ g`.
    pub fn pairing(&self, g: &[f64], h: &[f64]) -> f64 {
        linalg::dot(h, &self.apply(g))
    }

    /// `max |Λ_ij − Λ_ji| / max |Λ_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst / m.norm_max().max(f64::MIN_POSITIVE)
    }

    /// Generalized eigenvalues of `(Λ, M_Γ)`, ascending.
    pub fn steklov_eigenvalues(&self, basis: &TraceBasis) -> Result<Vec<f64>> {
        steklov_eigenvalues(self.matrix.as_ref(), basis.mass())
    }

    /// Matrix Market array text plus the `key=value` sidecar.
    pub fn export_text(&self) -> (String, String) {
        let mut side = String::new();
        let _ = writeln!(side, "mesh_id={}", self.mesh_id);
        let _ = writeln!(side, "cond_id={}", self.cond_id);
        let _ = writeln!(side, "rows={}", self.dim());
        let _ = writeln!(side, "cols={}", self.dim());
        for (k, v) in &self.metadata {
            let _ = writeln!(side, "{k}={v}");
        }
        (linalg::dense_to_matrix_market(self.matrix.as_ref()), side)
    }

    /// Writes `<stem>.mtx` and `<stem>.meta`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        let (mtx, side) = self.export_text();
        std::fs::write(dir.join(format!("{stem}.mtx")), mtx)?;
        std::fs::write(dir.join(format!("{stem}.meta")), side)?;
        Ok(())
    }
}

/// Generalized eigenvalues of `(Λ, M_Γ)` for a boundary mass matrix.
pub fn steklov_eigenvalues(matrix: MatRef<'_, f64>, mass: &CsrMatrix) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (matrix[(i, j)] + matrix[(j, i)]));
    linalg::generalized_eigenvalues(sym.as_ref(), mass.to_dense().as_ref())
}

/// One spherical-harmonic degree of the unit-ball Steklov spectrum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BallMode {
    pub degree: usize,
    /// Mean of the `2l+1` computed eigenvalues of degree `l`.
    pub mean: f64,
    pub expected: f64,
    /// Largest `|λ − c·l|/(c·l)` within the group.
    pub max_rel_error: f64,
}

/// Compares sorted Steklov eigenvalues of `c·Λ_1` on the unit ball with the
/// exact values `c·l` of multiplicity `2l+1`, for `l = 1..=l_max`.
pub fn ball_spectrum_errors(eigenvalues: &[f64], c: f64, l_max: usize) -> Result<Vec<BallMode>> {
    let need = (l_max + 1) * (l_max + 1);
    if eigenvalues.len() < need {
        return Err(LabError::Shape { expected: format!("at least {need} eigenvalues"), found: eigenvalues.len().to_string() });
    }
    Ok((1..=l_max)
        .map(|l| {
            let group = &eigenvalues[l * l..(l + 1) * (l + 1)];
            let expected = c * l as f64;
            BallMode {
                degree: l,
                mean: group.iter().sum::<f64>() / group.len() as f64,
                expected,
                max_rel_error: group.iter().map(|e| (e - expected).abs() / expected).fold(0.0, f64::max),
            }
        })
        .collect())
}

/// Both sides of `∫(σ₁−σ₂)A∇u₁·∇u₂ = ⟨(Λ₁−Λ₂)g, h⟩` with `u₁ = u_{σ₁}(g)` and
/// `u₂ = u_{σ₂}(h)`. Both conductivities must share the same matrix field.
pub fn alessandrini_residual(
    mesh: &Mesh,
    cond1: &Conductivity,
    cond2: &Conductivity,
    g: &[f64],
    h: &[f64],
) -> Result<(f64, f64)> {
    let l1 = DtnOperator::assemble(mesh, cond1)?;
    let l2 = DtnOperator::assemble(mesh, cond2)?;
    alessandrini_with(mesh, cond1, cond2, &l1, &l2, g, h)
}

/// [`alessandrini_residual`] with precomputed operators.
pub fn alessandrini_with(
    mesh: &Mesh,
    cond1: &Conductivity,
    cond2: &Conductivity,
    l1: &DtnOperator,
    l2: &DtnOperator,
    g: &[f64],
    h: &[f64],
) -> Result<(f64, f64)> {
    if cond1.matrix() != cond2.matrix() {
        return Err(LabError::InvalidConductivity("both conductivities must carry the same matrix field".into()));
    }
    let u1 = crate::fem::solve_dirichlet(mesh, cond1, g)?;
    let u2 = crate::fem::solve_dirichlet(mesh, cond2, h)?;
    let e1 = tet_energies(mesh, cond1, &u1, &u2)?;
    let e2 = tet_energies(mesh, cond2, &u1, &u2)?;
    let lhs: f64 = e1.iter().zip(&e2).map(|(a, b)| a - b).sum();
    let rhs = l1.pairing(g, h) - l2.pairing(g, h);
    Ok((lhs, rhs))
}

/// `‖Λ₁ − Λ₂‖` in `ℬ(H^{1/2}(Γ), H^{-1/2}(Γ))`.
pub fn dtn_diff_norm(l1: &DtnOperator, l2: &DtnOperator, basis: &TraceBasis) -> Result<f64> {
    if l1.mesh_id != l2.mesh_id || l1.mesh_id != basis.mesh_id() || l1.dim() != l2.dim() {
        return Err(LabError::Shape {
            expected: format!("operators on mesh {}", l1.mesh_id),
            found: format!("{} / {}", l2.mesh_id, basis.mesh_id()),
        });
    }
    let diff = &l1.matrix - &l2.matrix;
    basis.operator_norm_half(diff.as_ref())
}
