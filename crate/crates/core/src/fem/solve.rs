use std::ops::Deref;

use faer::{Mat, MatRef};

use crate::error::{LabError, Result};
use crate::fem::{assemble_forms, assemble_stiffness, assemble_weighted_mass, Conductivity};
use crate::geometry::Mesh;
use crate::linalg::{self, CsrMatrix, LuSolver, SpdSolver};
use crate::vec3::Point;

/// Nodal values of a P1 function, one per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(LabError::Shape {
                expected: format!("{} vertex values", mesh.n_vertices()),
                found: values.len().to_string(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::InvalidMesh(format!("non-finite field value at vertex {i}")));
        }
        Ok(Field(values))
    }

    /// Interpolate a function at the vertices.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(&Point) -> f64) -> Self {
        Field(mesh.vertices().iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Restriction to the boundary vertices, in boundary order.
    pub fn trace(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.boundary_vertices().iter().map(|&v| self.0[v]).collect()
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Boundary-trace vector of a function, in boundary order.
pub fn boundary_trace(mesh: &Mesh, f: impl Fn(&Point) -> f64) -> Vec<f64> {
    mesh.boundary_points().iter().map(f).collect()
}

fn check_trace(mesh: &Mesh, g: &[f64]) -> Result<()> {
    if g.len() != mesh.n_boundary() {
        return Err(LabError::Shape { expected: format!("{} boundary values", mesh.n_boundary()), found: g.len().to_string() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Domain("boundary data must be finite".into()));
    }
    Ok(())
}

enum Factor {
    Cholesky(SpdSolver),
    Lu(Box<LuSolver>),
}

impl Factor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Cholesky(s) => s.solve(b),
            Factor::Lu(s) => s.solve(b),
        }
    }

    fn solve_dense(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        match self {
            Factor::Cholesky(s) => s.solve_dense(b),
            Factor::Lu(s) => s.solve_dense(b),
        }
    }
}

/// Dirichlet problem for a fixed system matrix: one interior factorization
/// shared read-only by every solve.
pub struct DirichletSolver {
    n: usize,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    k_ib: CsrMatrix,
    factor: Factor,
}

impl DirichletSolver {
    /// Factor the interior block of an SPD-on-interior matrix.
    pub fn new(mesh: &Mesh, k: &CsrMatrix) -> Result<Self> {
        let interior = mesh.interior_vertices();
        let chol = SpdSolver::new(&k.submatrix(&interior, &interior))?;
        Ok(Self::with_factor(mesh, k, interior, Factor::Cholesky(chol)))
    }

    fn with_factor(mesh: &Mesh, k: &CsrMatrix, interior: Vec<usize>, factor: Factor) -> Self {
        let boundary = mesh.boundary_vertices().to_vec();
        let k_ib = k.submatrix(&interior, &boundary);
        DirichletSolver { n: mesh.n_vertices(), boundary, interior, k_ib, factor }
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior coupling block `K_IΓ`.
    pub fn coupling(&self) -> &CsrMatrix {
        &self.k_ib
    }

    /// Apply `K_II^{-1}` to an interior vector.
    pub fn solve_interior(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(rhs)
    }

    /// Apply `K_II^{-1}` to a block of interior columns.
    pub fn solve_interior_dense(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.factor.solve_dense(rhs)
    }

    /// Solution with boundary values `g` and an optional load `f`
    /// (one entry per vertex, only interior rows are used).
    pub fn solve_with_load(&self, g: &[f64], load: Option<&[f64]>) -> Result<Field> {
        if g.len() != self.boundary.len() {
            return Err(LabError::Shape { expected: format!("{} boundary values", self.boundary.len()), found: g.len().to_string() });
        }
        let mut rhs = self.k_ib.mul_vec(g);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = load.map_or(0.0, |f| f[self.interior[i]]) - *r;
        }
        let ui = self.factor.solve(&rhs);
        let mut u = vec![0.0; self.n];
        for (&v, x) in self.boundary.iter().zip(g) {
            u[v] = *x;
        }
        for (&v, x) in self.interior.iter().zip(ui) {
            u[v] = x;
        }
        if let Some(v) = u.iter().position(|x| !x.is_finite()) {
            return Err(LabError::SolverFailure(format!("non-finite solution at vertex {v}")));
        }
        Ok(Field(u))
    }

    pub fn solve(&self, g: &[f64]) -> Result<Field> {
        self.solve_with_load(g, None)
    }
}

/// `u_σ(g)`: the discrete σ-harmonic extension of `g`.
pub fn solve_dirichlet(mesh: &Mesh, cond: &Conductivity, g: &[f64]) -> Result<Field> {
    check_trace(mesh, g)?;
    let k = assemble_stiffness(mesh, cond)?;
    DirichletSolver::new(mesh, &k)?.solve(g)
}

/// `Q_σ(u) = uᵀKu`.
pub fn energy(mesh: &Mesh, cond: &Conductivity, u: &[f64]) -> Result<f64> {
    Ok(assemble_stiffness(mesh, cond)?.form(u, u).max(0.0))
}

/// `‖u‖_{H¹}` from the unit-conductivity forms.
pub fn h1_norm(stiffness: &CsrMatrix, mass: &CsrMatrix, u: &[f64]) -> f64 {
    (stiffness.form(u, u) + mass.form(u, u)).max(0.0).sqrt()
}

/// Unit-conductivity stiffness and mass, the forms behind every `H¹(Ω)` norm.
pub fn unit_forms(mesh: &Mesh) -> Result<crate::fem::Forms> {
    assemble_forms(mesh, &Conductivity::constant(1.0)?)
}

/// Condition numbers above this mark a Schrödinger system as resonant.
pub const RESONANCE_THRESHOLD: f64 = 1e12;

/// System matrix of `−Δ + q` with `q` sampled at tet centroids.
pub fn schrodinger_matrix(mesh: &Mesh, q: &(dyn Fn(&Point) -> f64 + Sync)) -> Result<CsrMatrix> {
    let k = assemble_stiffness(mesh, &Conductivity::constant(1.0)?)?;
    let mq = assemble_weighted_mass(mesh, q)?;
    Ok(k.linear_combination(1.0, &mq, 1.0))
}

/// Largest and smallest eigenvalue magnitudes of a symmetric matrix by power
/// iteration on `A` and `A^{-1}`.
fn condition_estimate(a: &CsrMatrix, inv: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let n = a.n_rows();
    let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let power = |apply: &dyn Fn(&[f64]) -> Vec<f64>| {
        let mut v = start.clone();
        let mut est = 0.0;
        for _ in 0..60 {
            let s = linalg::norm2(&v);
            v.iter_mut().for_each(|x| *x /= s);
            let w = apply(&v);
            est = linalg::norm2(&w);
            if !est.is_finite() {
                return f64::INFINITY;
            }
            v = w;
        }
        est
    };
    power(&|v| a.mul_vec(v)) * power(&inv)
}

/// Reusable solver for `−Δv + qv = 0` with Dirichlet data.
pub struct SchrodingerSolver {
    inner: DirichletSolver,
    matrix: CsrMatrix,
}

impl SchrodingerSolver {
    pub fn new(mesh: &Mesh, q: &(dyn Fn(&Point) -> f64 + Sync)) -> Result<Self> {
        let matrix = schrodinger_matrix(mesh, q)?;
        let interior = mesh.interior_vertices();
        let a_ii = matrix.submatrix(&interior, &interior);
        let factor = match SpdSolver::new(&a_ii) {
            Ok(chol) => Factor::Cholesky(chol),
            Err(_) => {
                let lu = LuSolver::new(&a_ii).map_err(|_| LabError::Resonance { condition: f64::INFINITY })?;
                let condition = condition_estimate(&a_ii, |b| lu.solve(b));
                if !(condition < RESONANCE_THRESHOLD) {
                    return Err(LabError::Resonance { condition });
                }
                Factor::Lu(Box::new(lu))
            }
        };
        Ok(SchrodingerSolver { inner: DirichletSolver::with_factor(mesh, &matrix, interior, factor), matrix })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, g: &[f64]) -> Result<Field> {
        self.inner.solve(g)
    }
}

pub fn solve_schrodinger(mesh: &Mesh, q: &(dyn Fn(&Point) -> f64 + Sync), g: &[f64]) -> Result<Field> {
    check_trace(mesh, g)?;
    SchrodingerSolver::new(mesh, q)?.solve(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Family, Forms};
    use crate::geometry::{build_cube_mesh, Domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump() -> Conductivity {
        Conductivity::from_family(
            Family::GaussianBump { center: [0.5, 0.5, 1.0], width: 0.4, amplitude: 1.5, base: 1.0 },
            Domain::Cube,
        )
        .unwrap()
    }

    #[test]
    fn affine_and_constant_reproduction() {
        let mesh = build_cube_mesh(5).unwrap();
        let one = Conductivity::constant(1.0).unwrap();
        let u = solve_dirichlet(&mesh, &one, &boundary_trace(&mesh, |p| p[0])).unwrap();
        for (p, v) in mesh.vertices().iter().zip(u.values()) {
            assert!((p[0] - v).abs() < 1e-10);
        }
        let c = solve_dirichlet(&mesh, &bump(), &vec![2.5; mesh.n_boundary()]).unwrap();
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-10));
        assert!(matches!(solve_dirichlet(&mesh, &one, &[1.0]), Err(LabError::Shape { .. })));
    }

    #[test]
    fn interior_residual_and_galerkin_orthogonality() {
        let mesh = build_cube_mesh(5).unwrap();
        let cond = bump();
        let k = assemble_stiffness(&mesh, &cond).unwrap();
        let g = boundary_trace(&mesh, |p| (3.0 * p[0]).sin() * p[1] + p[2] * p[2]);
        let u = DirichletSolver::new(&mesh, &k).unwrap().solve(&g).unwrap();
        assert_eq!(u.trace(&mesh), g);
        let r = k.mul_vec(&u);
        for v in mesh.interior_vertices() {
            assert!(r[v].abs() < 1e-10);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut w = vec![0.0; mesh.n_vertices()];
            for v in mesh.interior_vertices() {
                w[v] = rng.gen_range(-1.0..1.0);
            }
            assert!(k.form(&u, &w).abs() <= 1e-10 * linalg::norm2(&w));
        }
    }

    #[test]
    fn dirichlet_principle_and_maximum_principle() {
        let mesh = build_cube_mesh(4).unwrap();
        let cond = bump();
        let k = assemble_stiffness(&mesh, &cond).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g: Vec<f64> = (0..mesh.n_boundary()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = DirichletSolver::new(&mesh, &k).unwrap().solve(&g).unwrap();
        let q = k.form(&u, &u);
        for _ in 0..20 {
            let mut w = u.clone().into_inner();
            for v in mesh.interior_vertices() {
                w[v] += rng.gen_range(-0.5..0.5);
            }
            assert!(q <= k.form(&w, &w));
        }
        let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(u.iter().all(|&x| x >= lo - 1e-9 && x <= hi + 1e-9));
    }

    #[test]
    fn energy_basic_properties() {
        let mesh = build_cube_mesh(4).unwrap();
        let one = Conductivity::constant(1.0).unwrap();
        let x1: Vec<f64> = mesh.vertices().iter().map(|p| p[0]).collect();
        assert!((energy(&mesh, &one, &x1).unwrap() - 1.0).abs() < 1e-12);
        assert!(energy(&mesh, &one, &vec![3.0; mesh.n_vertices()]).unwrap() < 1e-12);
        let u: Vec<f64> = mesh.vertices().iter().map(|p| p[1] * p[2]).collect();
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let e = energy(&mesh, &bump(), &u).unwrap();
        assert!((energy(&mesh, &bump(), &u2).unwrap() - 4.0 * e).abs() < 1e-12);
    }

    #[test]
    fn schrodinger_with_zero_potential() {
        let mesh = build_cube_mesh(4).unwrap();
        let v = solve_schrodinger(&mesh, &|_| 0.0, &boundary_trace(&mesh, |p| p[0])).unwrap();
        for (p, x) in mesh.vertices().iter().zip(v.values()) {
            assert!((p[0] - x).abs() < 1e-10);
        }
        let c = solve_schrodinger(&mesh, &|_| 0.0, &vec![-1.5; mesh.n_boundary()]).unwrap();
        assert!(c.iter().all(|x| (x + 1.5).abs() < 1e-10));
    }

    #[test]
    fn schrodinger_resonance_is_reported() {
        // q = −λ₁ for the discrete Dirichlet Laplacian makes −Δ + q singular.
        let mesh = build_cube_mesh(3).unwrap();
        let Forms { stiffness, mass } = unit_forms(&mesh).unwrap();
        let interior = mesh.interior_vertices();
        let kii = stiffness.submatrix(&interior, &interior).to_dense();
        let mii = mass.submatrix(&interior, &interior).to_dense();
        let (vals, _) = linalg::generalized_eigen(kii.as_ref(), mii.as_ref()).unwrap();
        let lambda = vals[0];
        let err = solve_schrodinger(&mesh, &|_| -lambda, &vec![1.0; mesh.n_boundary()]);
        assert!(matches!(err, Err(LabError::Resonance { .. })), "{err:?}");
        // slightly off resonance is solvable through the LU path
        let ok = solve_schrodinger(&mesh, &|_| -0.5 * (lambda + vals[1]), &vec![1.0; mesh.n_boundary()]);
        assert!(ok.is_ok());
    }
}
