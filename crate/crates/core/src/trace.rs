//! Boundary P1 space with the Laplace–Beltrami eigenbasis that realizes the
//! fractional norms `H^s(Γ)`, `s ∈ [-1, 1]`, spectrally.

use faer::{Mat, MatRef};

use crate::error::{LabError, Result};
use crate::geometry::Mesh;
use crate::linalg::{self, CsrMatrix};
use crate::vec3;

/// Nodal values on the boundary vertices, in boundary order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFunction {
    pub coeffs: Vec<f64>,
}

impl TraceFunction {
    pub fn new(basis: &TraceBasis, coeffs: Vec<f64>) -> Result<Self> {
        basis.check_len(coeffs.len())?;
        Ok(TraceFunction { coeffs })
    }
}

/// Boundary mass and Laplace–Beltrami stiffness on the boundary triangulation.
pub fn boundary_forms(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let nb = mesh.n_boundary();
    let mut mass = Vec::with_capacity(9 * mesh.boundary_faces().len());
    let mut stiff = Vec::with_capacity(9 * mesh.boundary_faces().len());
    for f in mesh.boundary_faces() {
        let idx = f.vertices.map(|v| mesh.boundary_index(v).expect("face vertex on boundary"));
        let [a, b, c] = f.vertices.map(|v| mesh.vertices()[v]);
        let e1 = vec3::sub(&b, &a);
        let e2 = vec3::sub(&c, &a);
        let area = 0.5 * vec3::norm(&vec3::cross(&e1, &e2));
        let (g11, g12, g22) = (vec3::dot(&e1, &e1), vec3::dot(&e1, &e2), vec3::dot(&e2, &e2));
        let det = g11 * g22 - g12 * g12;
        let ginv = [[g22 / det, -g12 / det], [-g12 / det, g11 / det]];
        // reference gradients of the three barycentric coordinates
        let d = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += d[i][p] * ginv[p][q] * d[j][q];
                    }
                }
                stiff.push((idx[i], idx[j], area * s));
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mass.push((idx[i], idx[j], m));
            }
        }
    }
    (CsrMatrix::from_triplets(nb, nb, mass), CsrMatrix::from_triplets(nb, nb, stiff))
}

/// Spectral realization of `H^s(Γ)` on one mesh.
pub struct TraceBasis {
    mesh_id: String,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    mu: Vec<f64>,
    /// `M_Γ`-orthonormal eigenvectors as columns.
    vectors: Mat<f64>,
    /// `Eᵀ M_Γ`, mapping nodal values to spectral coefficients.
    analysis: Mat<f64>,
}

impl std::fmt::Debug for TraceBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceBasis").field("mesh_id", &self.mesh_id).field("dim", &self.mu.len()).finish()
    }
}

impl TraceBasis {
    pub fn build(mesh: &Mesh) -> Result<Self> {
        let nb = mesh.n_boundary();
        if nb < 4 {
            return Err(LabError::InvalidMesh(format!("trace basis needs at least 4 boundary vertices, found {nb}")));
        }
        let (mass, stiffness) = boundary_forms(mesh);
        let (mut mu, vectors) = linalg::generalized_eigen(stiffness.to_dense().as_ref(), mass.to_dense().as_ref())?;
        let top = mu.last().copied().unwrap_or(1.0).abs().max(1.0);
        for m in mu.iter_mut() {
            if *m < 0.0 {
                if *m < -1e-9 * top {
                    return Err(LabError::SpectralFailure(format!("negative surface eigenvalue {m:e}")));
                }
                *m = 0.0;
            }
        }
        let analysis = vectors.transpose() * mass.to_dense();
        Ok(TraceBasis { mesh_id: mesh.id().to_string(), mass, stiffness, mu, vectors, analysis })
    }

    pub fn mesh_id(&self) -> &str {
        &self.mesh_id
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Eigenvalues `μ_i`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    pub fn eigenvectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(LabError::Shape { expected: format!("{} boundary values", self.dim()), found: n.to_string() });
        }
        Ok(())
    }

    fn check_s(s: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(LabError::Range { what: "s", value: s, min: -1.0, max: 1.0 });
        }
        Ok(())
    }

    fn weighted(&self, coeffs: impl Iterator<Item = f64>, s: f64) -> f64 {
        self.mu.iter().zip(coeffs).map(|(m, c)| (1.0 + m).powf(s) * c * c).sum::<f64>().sqrt()
    }

    /// Spectral coefficients `ĝ_i = e_iᵀ M_Γ g`.
    pub fn coefficients(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g.len())?;
        let v = Mat::from_fn(g.len(), 1, |i, _| g[i]);
        let c = &self.analysis * &v;
        Ok((0..self.dim()).map(|i| c[(i, 0)]).collect())
    }

    /// `‖g‖_{H^s(Γ)}` of a function given by nodal values.
    pub fn hs_norm(&self, g: &[f64], s: f64) -> Result<f64> {
        Self::check_s(s)?;
        let c = self.coefficients(g)?;
        Ok(self.weighted(c.into_iter(), s))
    }

    /// `‖f‖_{H^s(Γ)}` of a functional given by its load vector (`f_i = ⟨f, φ_i⟩`).
    pub fn functional_norm(&self, f: &[f64], s: f64) -> Result<f64> {
        Self::check_s(s)?;
        self.check_len(f.len())?;
        let v = Mat::from_fn(f.len(), 1, |i, _| f[i]);
        let c = self.vectors.transpose() * &v;
        Ok(self.weighted((0..self.dim()).map(|i| c[(i, 0)]), s))
    }

    /// `L²(Γ)` pairing `fᵀ M_Γ g`.
    pub fn l2_pairing(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mass.form(f, g)
    }

    /// Norm of `T: H^{1/2}(Γ) → H^{-1/2}(Γ)`, where `T` maps nodal values to
    /// load vectors: the largest singular value of `D^{-1/4} EᵀTE D^{-1/4}`
    /// with `D = diag(1 + μ)`.
    pub fn operator_norm_half(&self, t: MatRef<'_, f64>) -> Result<f64> {
        let n = self.dim();
        if t.nrows() != n || t.ncols() != n {
            return Err(LabError::Shape { expected: format!("{n}x{n}"), found: format!("{}x{}", t.nrows(), t.ncols()) });
        }
        let w: Vec<f64> = self.mu.iter().map(|m| (1.0 + m).powf(-0.25)).collect();
        let inner = self.vectors.transpose() * t * &self.vectors;
        let scaled = Mat::from_fn(n, n, |i, j| w[i] * inner[(i, j)] * w[j]);
        let max_abs = scaled.norm_max();
        if max_abs == 0.0 {
            return Ok(0.0);
        }
        let asym = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (scaled[(i, j)] - scaled[(j, i)]).abs())
            .fold(0.0, f64::max);
        if asym <= 1e-10 * max_abs {
            let sym = Mat::from_fn(n, n, |i, j| 0.5 * (scaled[(i, j)] + scaled[(j, i)]));
            let (vals, _) = linalg::symmetric_eigen(sym.as_ref())?;
            Ok(vals.iter().fold(0.0, |a, v| a.max(v.abs())))
        } else {
            Ok(linalg::singular_values(scaled.as_ref())?.into_iter().fold(0.0, f64::max))
        }
    }

    /// Gram matrix of the `H^{-1/2}(Γ)` norm on nodal values,
    /// `M_Γ E D^{-1/2} Eᵀ M_Γ`.
    pub fn negative_half_gram(&self) -> Mat<f64> {
        let n = self.dim();
        let w: Vec<f64> = self.mu.iter().map(|m| (1.0 + m).powf(-0.5)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| w[i] * self.analysis[(i, j)]);
        self.analysis.transpose() * scaled
    }

    /// `index,mu` rows.
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("index,mu\n");
        for (i, m) in self.mu.iter().enumerate() {
            s.push_str(&format!("{i},{m:e}\n"));
        }
        s
    }
}

/// Smallest value of `‖∇w‖²_{L²(Ω)} + ‖w‖²_{H^{-1/2}(Γ)}` over discrete `w`
/// with `‖w‖_{L²(Ω)} = 1`, by inverse iteration with inner conjugate
/// gradients preconditioned by the `H¹(Ω)` Cholesky factor.
pub fn norm_equivalence_eigenvalue(mesh: &Mesh, basis: &TraceBasis) -> Result<f64> {
    let forms = crate::fem::unit_forms(mesh)?;
    let (k, m) = (&forms.stiffness, &forms.mass);
    let precond = linalg::SpdSolver::new(&k.linear_combination(1.0, m, 1.0))?;
    let gram = basis.negative_half_gram();
    let bverts = mesh.boundary_vertices();
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = k.mul_vec(x);
        let xb = Mat::from_fn(bverts.len(), 1, |i, _| x[bverts[i]]);
        let gb = &gram * &xb;
        for (i, &v) in bverts.iter().enumerate() {
            y[v] += gb[(i, 0)];
        }
        y
    };
    let a_form = |x: &[f64]| linalg::dot(x, &apply(x));
    let pcg = |b: &[f64]| -> Result<Vec<f64>> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z = precond.solve(&r);
        let mut p = z.clone();
        let mut rz = linalg::dot(&r, &z);
        let b_norm = linalg::norm2(b);
        for _ in 0..500 {
            let ap = apply(&p);
            let alpha = rz / linalg::dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if linalg::norm2(&r) <= 1e-13 * b_norm {
                return Ok(x);
            }
            z = precond.solve(&r);
            let rz_next = linalg::dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(LabError::NonConvergence("conjugate gradients in norm-equivalence solve".into()))
    };
    let mut v = vec![1.0; mesh.n_vertices()];
    let mut lambda = f64::INFINITY;
    for _ in 0..300 {
        let s = m.form(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= s);
        let next = a_form(&v);
        if (next - lambda).abs() <= 1e-12 * next {
            return Ok(next);
        }
        lambda = next;
        v = pcg(&m.mul_vec(&v))?;
    }
    Err(LabError::NonConvergence("inverse iteration for the norm-equivalence eigenvalue".into()))
}
