//! Liouville transform to the Schrödinger form, the boundary identities it
//! implies, and the first Dirichlet eigenpair of `−div(σ∇·)`.

use std::fmt::Write as _;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtn::{schur_complement, DtnOperator};
use crate::error::{LabError, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, assemble_stiffness_with, elements, fd_laplacian, h1_norm, solve_dirichlet,
    unit_forms, Conductivity, Field, SchrodingerSolver,
};
use crate::geometry::{Domain, Mesh};
use crate::linalg::{self, CsrMatrix, SpdSolver};
use crate::trace::TraceBasis;
use crate::vec3::{self, Point};

/// `q_σ = σ^{-1/2} Δσ^{1/2}` of a conductivity.
#[derive(Clone)]
pub struct SchrodingerPotential {
    cond: Conductivity,
    floor: f64,
    analytic: bool,
}

impl SchrodingerPotential {
    pub fn source_cond_id(&self) -> &str {
        self.cond.id()
    }

    /// Whether `Δσ^{1/2}` comes in closed form rather than from differences.
    pub fn is_analytic(&self) -> bool {
        self.analytic
    }

    /// `σ` clipped at its lower bound `κ^{-1}`, as seen by the difference stencil.
    fn clipped(&self, x: &Point) -> f64 {
        self.cond.value(x).max(self.floor)
    }

    pub fn value(&self, x: &Point) -> f64 {
        if self.analytic {
            self.cond.sqrt_sigma_laplacian(x) / self.cond.value(x).sqrt()
        } else {
            self.fd_value(x)
        }
    }

    /// Fourth-order difference evaluation of `q_σ`.
    pub fn fd_value(&self, x: &Point) -> f64 {
        fd_laplacian(|p| self.clipped(p).sqrt(), x) / self.clipped(x).sqrt()
    }

    /// Largest relative deviation `|q − q_fd| / (1 + |q|)` over `count` seeded points of the domain.
    pub fn fd_deviation(&self, mesh: &Mesh, count: usize, seed: u64) -> f64 {
        let domain = mesh.domain();
        let (lo, hi) = domain.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut seen = 0;
        while seen < count {
            let p = [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
            if !domain.contains(&p) {
                continue;
            }
            seen += 1;
            let (q, f) = (self.value(&p), self.fd_value(&p));
            worst = worst.max((q - f).abs() / (1.0 + q.abs()));
        }
        worst
    }

    /// Number of mesh vertices whose difference stencil meets the clipping
    /// floor (the stencil reaches slightly outside the closed domain).
    pub fn clipped_vertices(&self, mesh: &Mesh) -> usize {
        let h = crate::fem::FD_STEP;
        mesh.vertices()
            .iter()
            .filter(|p| {
                (0..3).any(|a| {
                    [-2.0, -1.0, 1.0, 2.0].iter().any(|s| {
                        let mut q = **p;
                        q[a] += s * h;
                        self.cond.value(&q) < self.floor
                    })
                })
            })
            .count()
    }
}

pub fn q_from_sigma(cond: &Conductivity) -> SchrodingerPotential {
    SchrodingerPotential {
        analytic: cond.field().sqrt_laplacian(&[0.0; 3]).is_some(),
        floor: 1.0 / cond.kappa(),
        cond: cond.clone(),
    }
}

fn nodal_sqrt_sigma(mesh: &Mesh, cond: &Conductivity) -> Vec<f64> {
    mesh.boundary_points().iter().map(|p| cond.value(p).sqrt()).collect()
}

/// `‖v − σ^{1/2} u_σ(σ^{-1/2} g)‖_{H¹}` with `v` the Schrödinger extension of `g`.
pub fn liouville_residual(mesh: &Mesh, cond: &Conductivity, g: &[f64]) -> Result<f64> {
    let q = q_from_sigma(cond);
    let v = SchrodingerSolver::new(mesh, &|x| q.value(x))?.solve(g)?;
    let s = nodal_sqrt_sigma(mesh, cond);
    let gu: Vec<f64> = g.iter().zip(&s).map(|(a, b)| a / b).collect();
    let u = solve_dirichlet(mesh, cond, &gu)?;
    let w: Vec<f64> = mesh.vertices().iter().zip(u.iter()).map(|(p, x)| cond.value(p).sqrt() * x).collect();
    let diff: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
    let forms = unit_forms(mesh)?;
    Ok(h1_norm(&forms.stiffness, &forms.mass, &diff))
}

/// Boundary mass weighted by `w` at face centroids, with the outward normal
/// of each face passed to the weight.
fn weighted_boundary_mass(mesh: &Mesh, w: impl Fn(&Point, &Point) -> f64) -> CsrMatrix {
    let nb = mesh.n_boundary();
    let mut trip = Vec::with_capacity(9 * mesh.boundary_faces().len());
    for f in mesh.boundary_faces() {
        let idx = f.vertices.map(|v| mesh.boundary_index(v).expect("face vertex on boundary"));
        let [a, b, c] = f.vertices.map(|v| mesh.vertices()[v]);
        let area = 0.5 * vec3::norm(&vec3::cross(&vec3::sub(&b, &a), &vec3::sub(&c, &a)));
        let centroid = vec3::scale(&vec3::add(&vec3::add(&a, &b), &c), 1.0 / 3.0);
        let weight = w(&centroid, &f.normal) * area;
        for i in 0..3 {
            for j in 0..3 {
                trip.push((idx[i], idx[j], if i == j { weight / 6.0 } else { weight / 12.0 }));
            }
        }
    }
    CsrMatrix::from_triplets(nb, nb, trip)
}

/// Schrödinger DtN `Λ̇` and the transformed conductivity DtN
/// `σ^{-1/2}Λ_σσ^{-1/2} + σ^{-1}∂_νσ/2`, as boundary matrices.
pub fn transformed_dtn_operators(mesh: &Mesh, cond: &Conductivity) -> Result<(Mat<f64>, Mat<f64>)> {
    let q = q_from_sigma(cond);
    let a = crate::fem::schrodinger_matrix(mesh, &|x| q.value(x))?;
    let lhs = schur_complement(mesh, &a)?;
    let lam = DtnOperator::assemble(mesh, cond)?;
    let d: Vec<f64> = nodal_sqrt_sigma(mesh, cond).iter().map(|s| 1.0 / s).collect();
    let n = d.len();
    let w = weighted_boundary_mass(mesh, |x, nu| vec3::dot(&cond.gradient(x), nu) / (2.0 * cond.value(x)));
    let mut rhs = Mat::from_fn(n, n, |i, j| d[i] * lam.matrix()[(i, j)] * d[j]);
    for i in 0..n {
        for (j, v) in w.row(i) {
            rhs[(i, j)] += v;
        }
    }
    Ok((lhs, rhs))
}

/// `‖Λ̇_σ − (σ^{-1/2}Λ_σσ^{-1/2} + σ^{-1}∂_νσ/2)‖_{H^{1/2}→H^{-1/2}}`.
pub fn transformed_dtn_residual(mesh: &Mesh, basis: &TraceBasis, cond: &Conductivity) -> Result<f64> {
    if basis.mesh_id() != mesh.id() {
        return Err(LabError::Shape { expected: format!("trace basis of {}", mesh.id()), found: basis.mesh_id().to_string() });
    }
    let (lhs, rhs) = transformed_dtn_operators(mesh, cond)?;
    basis.operator_norm_half((lhs - rhs).as_ref())
}

/// Dual norm `sup_φ |ℓ(φ)|/‖φ‖_{H¹}` over interior test functions of a load vector.
fn interior_dual_norm(mesh: &Mesh, a: &CsrMatrix, load: &[f64]) -> Result<f64> {
    let interior = mesh.interior_vertices();
    let r: Vec<f64> = interior.iter().map(|&i| load[i]).collect();
    let z = SpdSolver::new(&a.submatrix(&interior, &interior))?.solve(&r);
    Ok(linalg::dot(&r, &z).max(0.0).sqrt())
}

/// Load vector of `φ ↦ ∫a∇w·∇φ − ∫fφ` on `mesh` for nodal `w`, with
/// `a = √(σ₁σ₂)` and `f = 2a(q₁ − q₂)` lumped at tet centroids.
fn log_ratio_load(mesh: &Mesh, w: &[f64], c1: &Conductivity, c2: &Conductivity) -> Result<Vec<f64>> {
    let (q1, q2) = (q_from_sigma(c1), q_from_sigma(c2));
    let a = |x: &Point| (c1.value(x) * c2.value(x)).sqrt();
    let k_a = assemble_stiffness_with(mesh, |x| (a(x), None))?;
    let mut res = k_a.mul_vec(w);
    for (el, tet) in elements(mesh)?.iter().zip(mesh.tets()) {
        let x = el.centroid;
        let f = 2.0 * a(&x) * (q1.value(&x) - q2.value(&x));
        for &i in tet {
            res[i] += 0.25 * el.volume * f;
        }
    }
    Ok(res)
}

fn h1_dual_norm(mesh: &Mesh, load: &[f64]) -> Result<f64> {
    let forms = unit_forms(mesh)?;
    interior_dual_norm(mesh, &forms.stiffness.linear_combination(1.0, &forms.mass, 1.0), load)
}

/// Weak residual of `div(a∇w) = f` with `a = √(σ₁σ₂)`, `w = ln(σ₁/σ₂)`,
/// `f = 2a(q₁ − q₂)`, in the dual norm of discrete `H¹₀` on the same mesh.
pub fn log_ratio_residual(mesh: &Mesh, c1: &Conductivity, c2: &Conductivity) -> Result<f64> {
    let w: Vec<f64> = mesh.vertices().iter().map(|p| (c1.value(p) / c2.value(p)).ln()).collect();
    h1_dual_norm(mesh, &log_ratio_load(mesh, &w, c1, c2)?)
}

/// Cells per axis of a structured cube mesh.
fn cube_cells(mesh: &Mesh) -> Result<usize> {
    let n = (mesh.n_vertices() as f64).cbrt().round() as usize;
    if mesh.domain() != Domain::Cube || n < 2 || n * n * n != mesh.n_vertices() || mesh.tets().len() != 6 * (n - 1).pow(3) {
        return Err(LabError::InvalidMesh(format!("{} is not a structured cube mesh", mesh.id())));
    }
    Ok(n - 1)
}

/// P1 interpolant on the Kuhn split of the `m`-cell cube grid, evaluated at `x`.
fn cube_p1_value(m: usize, u: &[f64], x: &Point) -> f64 {
    let n = m + 1;
    let mut cell = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let t = (x[a] * m as f64).clamp(0.0, m as f64);
        cell[a] = (t.floor() as usize).min(m - 1);
        frac[a] = t - cell[a] as f64;
    }
    // walk the simplex corners in decreasing order of the fractional parts
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));
    let index = |c: [usize; 3]| c[0] + n * (c[1] + n * c[2]);
    let mut corner = cell;
    let mut value = u[index(corner)];
    for &a in &axes {
        let prev = u[index(corner)];
        corner[a] += 1;
        value += frac[a] * (u[index(corner)] - prev);
    }
    value
}

/// [`log_ratio_residual`] for `w` interpolated on the structured cube mesh
/// `mesh`, with the dual norm taken over the richer test space of `fine`.
pub fn log_ratio_residual_refined(mesh: &Mesh, fine: &Mesh, c1: &Conductivity, c2: &Conductivity) -> Result<f64> {
    let m = cube_cells(mesh)?;
    cube_cells(fine)?;
    let coarse: Vec<f64> = mesh.vertices().iter().map(|p| (c1.value(p) / c2.value(p)).ln()).collect();
    let w: Vec<f64> = fine.vertices().iter().map(|p| cube_p1_value(m, &coarse, p)).collect();
    h1_dual_norm(fine, &log_ratio_load(fine, &w, c1, c2)?)
}

/// First Dirichlet eigenpair of `−div(σ∇·)`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: Field,
    /// `‖Kφ − λMφ‖₂` on interior rows.
    pub residual: f64,
}

impl EigenPair {
    /// `quantity,index,value` rows: `lambda1` then nodal `phi1`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,index,value\n");
        let _ = writeln!(s, "lambda1,,{:e}", self.lambda1);
        for (i, v) in self.phi1.iter().enumerate() {
            let _ = writeln!(s, "phi1,{i},{v:e}");
        }
        s
    }
}

const EIGEN_TOL: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 500;
const EIGEN_RESIDUAL: f64 = 1e-10;

struct InteriorPencil {
    interior: Vec<usize>,
    k: CsrMatrix,
    m: CsrMatrix,
    chol: SpdSolver,
}

impl InteriorPencil {
    fn new(mesh: &Mesh, cond: &Conductivity) -> Result<Self> {
        let interior = mesh.interior_vertices();
        if interior.is_empty() {
            return Err(LabError::SpectralFailure("mesh has no interior vertices".into()));
        }
        let k = assemble_stiffness(mesh, cond)?.submatrix(&interior, &interior);
        let m = assemble_mass(mesh)?.submatrix(&interior, &interior);
        let chol = SpdSolver::new(&k)?;
        Ok(InteriorPencil { interior, k, m, chol })
    }

    fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        let kv = self.k.mul_vec(v);
        let mv = self.m.mul_vec(v);
        linalg::norm2(&kv.iter().zip(&mv).map(|(a, b)| a - lambda * b).collect::<Vec<_>>())
    }

    fn lift(&self, mesh: &Mesh, v: &[f64]) -> Result<Field> {
        let mut full = vec![0.0; mesh.n_vertices()];
        for (&i, x) in self.interior.iter().zip(v) {
            full[i] = *x;
        }
        Field::new(mesh, full)
    }
}

pub fn smallest_eigenpair(mesh: &Mesh, cond: &Conductivity) -> Result<EigenPair> {
    let p = InteriorPencil::new(mesh, cond)?;
    let start = vec![1.0; p.interior.len()];
    let (mut lambda1, mut v) = linalg::inverse_iteration(|b| p.chol.solve(b), &p.k, &p.m, start, EIGEN_TOL, EIGEN_MAX_ITER)?;
    // the Rayleigh quotient settles long before the vector does
    let mut residual = p.residual(lambda1, &v);
    let mut steps = 0;
    while residual > EIGEN_RESIDUAL {
        if steps == EIGEN_MAX_ITER {
            return Err(LabError::SpectralFailure(format!("eigenvector residual stagnated at {residual:e}")));
        }
        let mut w = p.chol.solve(&p.m.mul_vec(&v));
        let s = p.m.form(&w, &w).sqrt();
        w.iter_mut().for_each(|x| *x /= s);
        lambda1 = p.k.form(&w, &w);
        v = w;
        residual = p.residual(lambda1, &v);
        steps += 1;
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(EigenPair { lambda1, phi1: p.lift(mesh, &v)?, residual })
}

/// Two smallest eigenvalues, the second by inverse iteration deflated against
/// the first eigenvector in the mass inner product.
pub fn two_smallest_eigenvalues(mesh: &Mesh, cond: &Conductivity) -> Result<(f64, f64)> {
    let p = InteriorPencil::new(mesh, cond)?;
    let n = p.interior.len();
    let (l1, v1) = linalg::inverse_iteration(|b| p.chol.solve(b), &p.k, &p.m, vec![1.0; n], EIGEN_TOL, EIGEN_MAX_ITER)?;
    let mv1 = p.m.mul_vec(&v1);
    let deflate = |mut x: Vec<f64>| {
        let c = linalg::dot(&x, &mv1);
        x.iter_mut().zip(&v1).for_each(|(a, b)| *a -= c * b);
        x
    };
    let start: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let (l2, _) = linalg::inverse_iteration(|b| deflate(p.chol.solve(b)), &p.k, &p.m, deflate(start), 1e-12, 4 * EIGEN_MAX_ITER)?;
    Ok((l1, l2))
}

/// Interior vertices within `rho0` of the boundary whose boundary projection
/// admits a collar of width at least `rho0`.
pub fn collar_vertices(mesh: &Mesh, rho0: f64) -> Vec<usize> {
    let domain = mesh.domain();
    mesh.interior_vertices()
        .into_iter()
        .filter(|&v| {
            let x = mesh.vertices()[v];
            let d = domain.distance_to_boundary(&x);
            d > 0.0
                && d < rho0
                && domain
                    .project_to_boundary(&x)
                    .and_then(|p| domain.collar_width(&p.point))
                    .is_ok_and(|w| w >= rho0)
        })
        .collect()
}

/// `(min, max)` of `φ₁/dist(·, Γ)` over the collar vertices.
pub fn hopf_ratio_bounds(mesh: &Mesh, pair: &EigenPair, rho0: f64) -> Result<(f64, f64)> {
    let verts = collar_vertices(mesh, rho0);
    if verts.is_empty() {
        return Err(LabError::Usage(format!("no vertices in the collar of width {rho0}")));
    }
    let domain = mesh.domain();
    Ok(verts.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        let r = pair.phi1[v] / domain.distance_to_boundary(&mesh.vertices()[v]);
        (lo.min(r), hi.max(r))
    }))
}

/// Constants of the energy estimate
/// `‖w‖_{H¹} ≤ C(‖div(a∇w)‖_{H^{-1}} + ‖w‖_{L²(Γ)} + ‖∇w‖_{L²(Γ)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub samples: usize,
    pub max_constant: f64,
    pub mean_constant: f64,
}

/// Random smooth `w = Σ c_j cos(πj₁x)cos(πj₂y)cos(πj₃z)` with `|j|_∞ ≤ 2`,
/// seeded, evaluated at the vertices.
fn random_smooth_fields(mesh: &Mesh, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coeffs: Vec<([f64; 3], f64)> = (0..27)
                .map(|i| ([(i % 3) as f64, ((i / 3) % 3) as f64, (i / 9) as f64], rng.gen_range(-1.0..1.0)))
                .collect();
            mesh.vertices()
                .iter()
                .map(|p| {
                    coeffs
                        .iter()
                        .map(|(j, c)| c * (0..3).map(|a| (std::f64::consts::PI * j[a] * p[a]).cos()).product::<f64>())
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub fn energy_estimate_constants(mesh: &Mesh, a: &Conductivity, count: usize, seed: u64) -> Result<EnergyEstimate> {
    let k_a = assemble_stiffness(mesh, a)?;
    let unit = unit_forms(mesh)?;
    let interior = mesh.interior_vertices();
    let riesz = SpdSolver::new(&unit.stiffness.submatrix(&interior, &interior))?;
    let (m_b, _) = crate::trace::boundary_forms(mesh);
    let els = elements(mesh)?;
    let consts: Vec<f64> = random_smooth_fields(mesh, count, seed)
        .iter()
        .map(|w| {
            let r_full = k_a.mul_vec(w);
            let r: Vec<f64> = interior.iter().map(|&i| r_full[i]).collect();
            let dual = linalg::dot(&r, &riesz.solve(&r)).max(0.0).sqrt();
            let wb: Vec<f64> = mesh.boundary_vertices().iter().map(|&v| w[v]).collect();
            let trace = m_b.form(&wb, &wb).max(0.0).sqrt();
            let grad_b: f64 = mesh
                .boundary_faces()
                .iter()
                .map(|f| {
                    let [p, q, r] = f.vertices.map(|v| mesh.vertices()[v]);
                    let area = 0.5 * vec3::norm(&vec3::cross(&vec3::sub(&q, &p), &vec3::sub(&r, &p)));
                    let g = els[f.tet].gradient(mesh.tets()[f.tet].map(|i| w[i]));
                    area * vec3::dot(&g, &g)
                })
                .sum::<f64>()
                .sqrt();
            h1_norm(&unit.stiffness, &unit.mass, w) / (dual + trace + grad_b)
        })
        .collect();
    Ok(EnergyEstimate {
        samples: count,
        max_constant: consts.iter().cloned().fold(0.0, f64::max),
        mean_constant: consts.iter().sum::<f64>() / count.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Family;
    use crate::geometry::{build_cube_mesh, Domain};

    fn product(beta: f64) -> Conductivity {
        Conductivity::from_family(Family::Product { beta }, Domain::Cube).unwrap()
    }

    #[test]
    fn potential_of_product_family() {
        let q = q_from_sigma(&product(0.3));
        assert!(q.is_analytic());
        let x = [0.4, 0.1, 0.9];
        let expect = 0.6 / (1.0 + 0.3 * 0.16);
        assert!((q.value(&x) - expect).abs() < 1e-14);
        let mesh = build_cube_mesh(3).unwrap();
        assert!(q.fd_deviation(&mesh, 100, 1) < 1e-5);
        assert_eq!(q.value(&x).to_bits(), q_from_sigma(&product(0.3)).value(&x).to_bits());
        assert_eq!(q_from_sigma(&Conductivity::constant(2.0).unwrap()).value(&x), 0.0);
    }

    #[test]
    fn identities_are_exact_for_constants() {
        let mesh = build_cube_mesh(4).unwrap();
        let basis = TraceBasis::build(&mesh).unwrap();
        let g: Vec<f64> = mesh.boundary_points().iter().map(|p| p[0] + p[1] * p[2]).collect();
        for c in [1.0, 4.0] {
            let cond = Conductivity::constant(c).unwrap();
            assert!(liouville_residual(&mesh, &cond, &g).unwrap() < 1e-10);
            assert!(transformed_dtn_residual(&mesh, &basis, &cond).unwrap() < 1e-9);
        }
        let (a, b) = (Conductivity::constant(1.5).unwrap(), Conductivity::constant(3.0).unwrap());
        assert!(log_ratio_residual(&mesh, &a, &b).unwrap() < 1e-10);
        assert!(log_ratio_residual(&mesh, &product(0.3), &product(0.3)).unwrap() < 1e-12);
    }

    #[test]
    fn kuhn_interpolant_is_exact_on_affine_data() {
        let mesh = build_cube_mesh(3).unwrap();
        let f = |p: &Point| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2];
        let u: Vec<f64> = mesh.vertices().iter().map(f).collect();
        for x in [[0.1, 0.7, 0.35], [0.999, 0.0, 0.5], [1.0 / 3.0, 0.2, 0.9]] {
            assert!((cube_p1_value(3, &u, &x) - f(&x)).abs() < 1e-13);
        }
        let fine = build_cube_mesh(6).unwrap();
        let (a, b) = (Conductivity::constant(1.5).unwrap(), Conductivity::constant(3.0).unwrap());
        assert!(log_ratio_residual_refined(&mesh, &fine, &a, &b).unwrap() < 1e-10);
        let ball = crate::geometry::build_ball_mesh(1).unwrap();
        assert!(log_ratio_residual_refined(&ball, &fine, &a, &b).is_err());
    }

    #[test]
    fn eigenpair_invariants() {
        let mesh = build_cube_mesh(6).unwrap();
        let one = Conductivity::constant(1.0).unwrap();
        let e = smallest_eigenpair(&mesh, &one).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        assert!((m.form(&e.phi1, &e.phi1) - 1.0).abs() < 1e-10, "{} {}", m.form(&e.phi1, &e.phi1), e.residual);
        assert!(e.residual < 1e-8);
        for v in mesh.interior_vertices() {
            assert!(e.phi1[v] > 0.0);
        }
        let e2 = smallest_eigenpair(&mesh, &Conductivity::constant(2.0).unwrap()).unwrap();
        assert!((e2.lambda1 - 2.0 * e.lambda1).abs() < 1e-10 * e.lambda1);
        let (l1, l2) = two_smallest_eigenvalues(&mesh, &one).unwrap();
        assert!((l1 - e.lambda1).abs() < 1e-9 * l1);
        assert!(l2 - l1 > 1e-6);
        assert!(e.to_csv().starts_with("quantity,index,value\nlambda1,,"));
    }
}
