//! Fundamental solution of the Laplacian, the anisotropic parametrix, pole
//! energies and the boundary Taylor inequality.

use rand::Rng;

use crate::error::{LabError, Result};
use crate::fem::{Conductivity, P1Element};
use crate::geometry::{Domain, Mesh, Probe};
use crate::vec3::{self, Point};

/// Surface area `|S^{n-1}|` of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    assert!(n >= 1);
    // |S^0| = 2, |S^1| = 2π, |S^{k}| = 2π/(k-1)·|S^{k-2}|
    let (mut area, mut k) = if n % 2 == 1 { (2.0, 0usize) } else { (2.0 * PI, 1usize) };
    while k + 1 < n {
        k += 2;
        area *= 2.0 * PI / (k as f64 - 1.0);
    }
    area
}

/// `H(x, y) = |x−y|^{2−n} / ((n−2)|S^{n−1}|)` and its `x`-gradient, in any
/// dimension `n = x.len() ≥ 3`.
pub fn fundamental_h(x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(LabError::Shape { expected: "two points of equal dimension >= 3".into(), found: format!("{} / {}", n, y.len()) });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(LabError::Singularity);
    }
    let s = unit_sphere_area(n);
    let value = r.powi(2 - n as i32) / ((n as f64 - 2.0) * s);
    let factor = -r.powi(-(n as i32)) / s;
    Ok((value, d.into_iter().map(|v| factor * v).collect()))
}

/// Three-dimensional `H(x, y) = 1/(4π|x−y|)` and its gradient.
pub fn h3(x: &Point, y: &Point) -> Result<(f64, Point)> {
    let d = vec3::sub(x, y);
    let r = vec3::norm(&d);
    if r == 0.0 {
        return Err(LabError::Singularity);
    }
    let s = 4.0 * std::f64::consts::PI;
    Ok((1.0 / (s * r), vec3::scale(&d, -1.0 / (s * r * r * r))))
}

fn positive_definite(a: &vec3::Mat3) -> bool {
    let m1 = a[0][0];
    let m2 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    m1 > 0.0 && m2 > 0.0 && vec3::det(a) > 0.0
}

/// Canonical parametrix of `div(σA∇·)` in three dimensions, with gradient
/// in `x`:
/// `H_σ(x,y) = [A^{-1}(y)(x−y)·(x−y)]^{-1/2} / (|S²| σ(y) det A(y)^{1/2})`.
pub fn anisotropic_parametrix(x: &Point, y: &Point, cond: &Conductivity) -> Result<(f64, Point)> {
    let a = cond.matrix_at(y);
    if !positive_definite(&a) {
        return Err(LabError::Ellipticity(format!("A({y:?}) is not positive definite")));
    }
    let d = vec3::sub(x, y);
    if vec3::norm(&d) == 0.0 {
        return Err(LabError::Singularity);
    }
    let ainv_d = vec3::mat_vec(&vec3::inverse(&a), &d);
    let q = vec3::dot(&ainv_d, &d);
    let n = 3.0;
    let denom = (n - 2.0) * unit_sphere_area(3) * cond.value(y) * vec3::det(&a).sqrt();
    let value = q.powf((2.0 - n) / 2.0) / denom;
    let grad = vec3::scale(&ainv_d, (2.0 - n) * q.powf(-n / 2.0) / denom);
    Ok((value, grad))
}

/// Empirical constant `𝔠` of the two-sided bound
/// `𝔠^{-1}|x−y|^{-4} ≤ A(x)∇H_{σ₁}·∇H_{σ₂} ≤ 𝔠|x−y|^{-4}` over samples of
/// the closed domain.
pub fn parametrix_gradient_constant<R: Rng>(
    domain: Domain,
    cond1: &Conductivity,
    cond2: &Conductivity,
    y: &Point,
    rng: &mut R,
    samples: usize,
) -> Result<f64> {
    let (lo, hi) = domain.bounding_box();
    let mut c: f64 = 1.0;
    let mut seen = 0;
    while seen < samples {
        let x = [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)];
        if !domain.contains(&x) {
            continue;
        }
        seen += 1;
        let (_, g1) = anisotropic_parametrix(&x, y, cond1)?;
        let (_, g2) = anisotropic_parametrix(&x, y, cond2)?;
        let a = cond1.matrix_at(&x);
        let r = vec3::dist(&x, y);
        let ratio = vec3::dot(&vec3::mat_vec(&a, &g1), &g2) * r.powi(4);
        if !(ratio > 0.0) {
            return Ok(f64::INFINITY);
        }
        c = c.max(ratio).max(1.0 / ratio);
    }
    Ok(c)
}

/// Exterior pole `y_δ` of a probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleConfig {
    pub y: Point,
    pub probe: Probe,
    pub delta: f64,
}

impl PoleConfig {
    pub fn new(probe: Probe, delta: f64) -> Result<Self> {
        let (_, y) = probe.cone_points(delta)?;
        let distance = probe.domain.exterior_distance(&y);
        if distance < 0.5 * delta * probe.theta.sin() * (1.0 - 1e-12) {
            return Err(LabError::PolePlacement { pole: y, distance });
        }
        Ok(PoleConfig { y, probe, delta })
    }

    /// Interior companion point `x_δ`.
    pub fn interior_point(&self) -> Point {
        vec3::axpy(&self.probe.x0, 0.5 * self.delta, &self.probe.xi_plus)
    }

    /// Trace of `H(·, y_δ)` on the boundary vertices.
    pub fn trace(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.boundary_points().iter().map(|p| h3(p, &self.y).map_or(0.0, |v| v.0)).collect()
    }
}

/// Subdivision threshold: a tet is split while its diameter exceeds this
/// fraction of its distance to the pole.
const POLE_RESOLUTION: f64 = 0.25;
const MAX_DEPTH: u32 = 10;

fn diameter(p: &[Point; 4]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for j in 0..i {
            d = d.max(vec3::dist(&p[i], &p[j]));
        }
    }
    d
}

/// Regular (red) refinement of a tet into eight children.
fn red_children(p: &[Point; 4]) -> [[Point; 4]; 8] {
    let m = |i: usize, j: usize| vec3::scale(&vec3::add(&p[i], &p[j]), 0.5);
    let (m01, m02, m03, m12, m13, m23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
    [
        [p[0], m01, m02, m03],
        [m01, p[1], m12, m13],
        [m02, m12, p[2], m23],
        [m03, m13, m23, p[3]],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]
}

fn tet_volume(p: &[Point; 4]) -> f64 {
    crate::geometry::signed_volume(p).abs()
}

fn integrate_near(p: &[Point; 4], y: &Point, f: &dyn Fn(&Point) -> f64, depth: u32) -> f64 {
    let c = vec3::scale(&p.iter().fold([0.0; 3], |a, q| vec3::add(&a, q)), 0.25);
    let dist = p.iter().map(|q| vec3::dist(q, y)).fold(f64::INFINITY, f64::min);
    if depth >= MAX_DEPTH || diameter(p) <= POLE_RESOLUTION * dist {
        return tet_volume(p) * f(&c);
    }
    red_children(p).iter().map(|child| integrate_near(child, y, f, depth + 1)).sum()
}

/// Centroid quadrature of `f` over the mesh, with tets adaptively refined
/// near the (exterior) point `y`.
pub fn integrate_with_pole(mesh: &Mesh, y: &Point, f: &dyn Fn(&Point) -> f64) -> f64 {
    (0..mesh.tets().len()).map(|t| integrate_near(&mesh.tet_points(t), y, f, 0)).sum()
}

/// `E_δ = ∫_Ω |∇H(·, y)|²` for an exterior pole.
pub fn pole_energy(mesh: &Mesh, pole: &PoleConfig) -> Result<f64> {
    pole_energy_at(mesh, &pole.y)
}

pub fn pole_energy_at(mesh: &Mesh, y: &Point) -> Result<f64> {
    let distance = mesh.domain().exterior_distance(y);
    if !(distance > 0.0) {
        return Err(LabError::PolePlacement { pole: *y, distance });
    }
    Ok(integrate_with_pole(mesh, y, &|x| {
        let r2 = vec3::dot(&vec3::sub(x, y), &vec3::sub(x, y));
        1.0 / (16.0 * std::f64::consts::PI * std::f64::consts::PI * r2 * r2)
    }))
}

/// `∫_{B(x₀,r)∩Ω} ∇u·∇H(·,y)` for a P1 field `u`, with the kernel gradient
/// integrated exactly enough by pole-adaptive subdivision.
pub fn local_pole_pairing(mesh: &Mesh, u: &[f64], y: &Point, x0: &Point, r: f64) -> Result<f64> {
    let mut total = 0.0;
    for (t, tet) in mesh.tets().iter().enumerate() {
        if vec3::dist(&mesh.centroid(t), x0) >= r {
            continue;
        }
        let el = P1Element::new(mesh, t)?;
        let gu = el.gradient(tet.map(|v| u[v]));
        total += integrate_near(&mesh.tet_points(t), y, &|x| h3(x, y).map_or(0.0, |(_, g)| vec3::dot(&g, &gu)), 0);
    }
    Ok(total)
}

/// Slack of the boundary Taylor inequality
/// `|∂_νf(x₀)|·dist(x,Γ) ≤ f(x) − f(p(x)) + 3ϰ|x−x₀|^{1+α}`
/// (right side minus left side). Requires `−∂_νf(x₀) > 0`.
pub fn boundary_taylor_slack(
    domain: Domain,
    f: &dyn Fn(&Point) -> f64,
    grad: &dyn Fn(&Point) -> Point,
    holder: f64,
    alpha: f64,
    x0: &Point,
    x: &Point,
) -> Result<f64> {
    let nu = domain.normal_at(x0)?;
    let dnu = vec3::dot(&grad(x0), &nu);
    if !(-dnu > 0.0) {
        return Err(LabError::Domain(format!("normal derivative {dnu} at x0 must be negative")));
    }
    let proj = domain.project_to_boundary(x)?;
    let lhs = dnu.abs() * proj.distance;
    let rhs = f(x) - f(&proj.point) + 3.0 * holder * vec3::dist(x, x0).powf(1.0 + alpha);
    Ok(rhs - lhs)
}

/// Random points of the projection collar around `x0`: within the collar
/// width of `x0` and with a unique boundary projection.
pub fn sample_collar<R: Rng>(domain: Domain, x0: &Point, rng: &mut R, count: usize) -> Result<Vec<Point>> {
    let width = domain.collar_width(x0)?;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(LabError::Domain("collar sampling failed".into()));
        }
        let w = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let x = vec3::axpy(x0, width, &w);
        if vec3::dist(&x, x0) >= width || !domain.contains_open(&x) {
            continue;
        }
        if domain.project_to_boundary(&x).is_ok() {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Family, MatrixField};
    use crate::geometry::build_cube_mesh;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn fundamental_solution_values() {
        let (v, g) = fundamental_h(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.0795774715459477).abs() < 1e-15);
        let g2: f64 = g.iter().map(|x| x * x).sum();
        assert!((g2 - 1.0 / (16.0 * PI * PI)).abs() < 1e-16);
        let (v3, g3) = h3(&[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        let (vn, gn) = fundamental_h(&[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((v3 - vn).abs() < 1e-16 && vec3::dist(&g3, &[gn[0], gn[1], gn[2]]) < 1e-16);
        assert!(matches!(fundamental_h(&[1.0; 3], &[1.0; 3]), Err(LabError::Singularity)));
        // five dimensions: |∇H| = |S⁴|^{-1} r^{1-n}
        let (_, g5) = fundamental_h(&[2.0, 0.0, 0.0, 0.0, 0.0], &[0.0; 5]).unwrap();
        assert!((g5[0].abs() - 2f64.powi(-4) / unit_sphere_area(5)).abs() < 1e-16);
    }

    #[test]
    fn fundamental_solution_is_harmonic() {
        let y = [0.5, 0.5, -0.3];
        for x in [[0.2, 0.4, 0.6], [0.8, 0.1, 0.5], [0.5, 0.5, 0.9]] {
            let lap = crate::fem::fd_laplacian(|p| h3(p, &y).unwrap().0, &x);
            assert!(lap.abs() < 1e-6, "{lap}");
        }
    }

    #[test]
    fn parametrix_reductions() {
        let one = Conductivity::constant(1.0).unwrap();
        let x = [0.3, 0.1, 0.7];
        let y = [0.5, 0.5, -0.2];
        let h = h3(&x, &y).unwrap().0;
        assert!((anisotropic_parametrix(&x, &y, &one).unwrap().0 - h).abs() < 1e-14 * h.max(1.0));
        let four = one
            .clone()
            .with_matrix(MatrixField::Constant { a: [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]] }, Domain::Cube)
            .unwrap();
        assert!((anisotropic_parametrix(&x, &y, &four).unwrap().0 - h / 4.0).abs() < 1e-15);
        let (_, g) = anisotropic_parametrix(&x, &y, &four).unwrap();
        let fd = crate::fem::fd_gradient(|p| anisotropic_parametrix(p, &y, &four).unwrap().0, &x);
        assert!(vec3::dist(&g, &fd) < 1e-8);
    }

    #[test]
    fn parametrix_two_sided_bound() {
        let a = MatrixField::DiagonalAffine { diag: [1.0, 2.0, 1.5], slope: [0.5, -0.5, 0.0] };
        let c1 = Conductivity::from_family(Family::Product { beta: 0.3 }, Domain::Cube)
            .unwrap()
            .with_matrix(a.clone(), Domain::Cube)
            .unwrap();
        let c2 = Conductivity::constant(2.0).unwrap().with_matrix(a, Domain::Cube).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = parametrix_gradient_constant(Domain::Cube, &c1, &c2, &[0.5, 0.5, -0.1], &mut rng, 1000).unwrap();
        assert!(c.is_finite() && c >= 1.0);
    }

    #[test]
    fn pole_energy_scaling_and_decay() {
        let mesh = build_cube_mesh(4).unwrap();
        let probe = Probe::new(Domain::Cube, [0.5, 0.5, 0.0]).unwrap().with_radius(0.5).unwrap();
        let e: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&d| pole_energy(&mesh, &PoleConfig::new(probe, d).unwrap()).unwrap())
            .collect();
        for w in e.windows(2) {
            let ratio = w[1] / w[0];
            assert!((1.6..=2.4).contains(&ratio), "{ratio}");
        }
        // half-space asymptotics 1/(8πδ)
        assert!((e[2] * 8.0 * PI * 0.05 - 1.0).abs() < 0.25);
        let far = pole_energy_at(&mesh, &[10.0, 0.0, 0.0]).unwrap();
        assert!(far < 1e-3);
        let fine = pole_energy(&build_cube_mesh(8).unwrap(), &PoleConfig::new(probe, 0.1).unwrap()).unwrap();
        assert!((fine - e[1]).abs() < 0.02 * fine);
        assert!(matches!(pole_energy_at(&mesh, &[0.5, 0.5, 0.5]), Err(LabError::PolePlacement { .. })));
    }

    #[test]
    fn red_refinement_preserves_volume() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.2, 1.0, 0.0], [0.1, 0.3, 0.8]];
        let total: f64 = red_children(&p).iter().map(tet_volume).sum();
        assert!((total - tet_volume(&p)).abs() < 1e-15);
    }

    #[test]
    fn boundary_taylor_inequality_holds_on_samples() {
        // f = x₃ + a|x|²/2 has ∇f = e₃ + a x, so [∇f]₁ = a and −∂_νf(x₀) = 1
        // on the bottom face.
        let a = 0.8;
        let f = |x: &Point| x[2] + 0.5 * a * vec3::dot(x, x);
        let g = |x: &Point| [a * x[0], a * x[1], 1.0 + a * x[2]];
        let x0 = [0.5, 0.5, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = sample_collar(Domain::Cube, &x0, &mut rng, 1000).unwrap();
        for x in &pts {
            assert!(boundary_taylor_slack(Domain::Cube, &f, &g, a, 1.0, &x0, x).unwrap() >= -1e-12);
        }
        let bad = |x: &Point| -x[2];
        let gbad = |_: &Point| [0.0, 0.0, -1.0];
        assert!(boundary_taylor_slack(Domain::Cube, &bad, &gbad, 0.0, 1.0, &x0, &pts[0]).is_err());
    }
}
