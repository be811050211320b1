//! Tensor-product Bernstein approximation on cubes, closest-point extension of
//! conductivities, and positive smooth approximants of a conductivity.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{LabError, Result};
use crate::fem::{Conductivity, ScalarField};
use crate::geometry::{Domain, Mesh};
use crate::vec3::Point;

/// Largest Bernstein degree tried by [`dense_approximant`].
pub const MAX_DEGREE: usize = 512;

/// Points used for the `C(Ω̄)` error of an approximant.
pub const ERROR_SAMPLES: usize = 10_000;

/// Bernstein weights below this fraction of the largest are skipped in
/// pointwise evaluation.
const WEIGHT_CUTOFF: f64 = 1e-18;

/// Values on the `(k+1)³` lattice of `[a, b]³`, x-index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(a: f64, b: f64, k: usize, values: Vec<f64>) -> Result<Self> {
        if !(a < b) || k == 0 {
            return Err(LabError::Domain(format!("lattice needs a < b and k >= 1, got [{a}, {b}], k = {k}")));
        }
        let n = (k + 1).pow(3);
        if values.len() != n {
            return Err(LabError::Shape { expected: format!("{n} lattice values"), found: values.len().to_string() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Domain(format!("non-finite lattice value at {i}")));
        }
        Ok(SampledField { a, b, k, values })
    }

    /// Lattice samples of `f`.
    pub fn from_fn(a: f64, b: f64, k: usize, f: impl Fn(&Point) -> f64) -> Result<Self> {
        if !(a < b) || k == 0 {
            return Err(LabError::Domain(format!("lattice needs a < b and k >= 1, got [{a}, {b}], k = {k}")));
        }
        let n = k + 1;
        let step = (b - a) / k as f64;
        let mut values = Vec::with_capacity(n * n * n);
        for l in 0..n {
            for j in 0..n {
                for i in 0..n {
                    values.push(f(&[a + i as f64 * step, a + j as f64 * step, a + l as f64 * step]));
                }
            }
        }
        Self::new(a, b, k, values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn at(&self, i: usize, j: usize, l: usize) -> f64 {
        let n = self.k + 1;
        self.values[i + n * (j + n * l)]
    }

    fn unit(&self, x: f64) -> Result<f64> {
        let tol = 1e-12 * (self.b - self.a);
        if !(x >= self.a - tol && x <= self.b + tol) {
            return Err(LabError::Domain(format!("{x} outside [{}, {}]", self.a, self.b)));
        }
        Ok(((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0))
    }
}

/// `p_{k,j}(t) = C(k,j) t^j (1-t)^{k-j}` for `j = 0..=k`.
pub fn bernstein_weights(k: usize, t: f64) -> Vec<f64> {
    if t <= 0.0 || t >= 1.0 {
        let mut w = vec![0.0; k + 1];
        w[if t <= 0.0 { 0 } else { k }] = 1.0;
        return w;
    }
    let (lt, ls) = (t.ln(), (1.0 - t).ln());
    (0..=k)
        .map(|j| (ln_binomial(k as u64, j as u64) + j as f64 * lt + (k - j) as f64 * ls).exp())
        .collect()
}

fn significant(w: &[f64]) -> std::ops::Range<usize> {
    let cut = WEIGHT_CUTOFF * w.iter().cloned().fold(0.0, f64::max);
    let lo = w.iter().position(|v| *v > cut).unwrap_or(0);
    let hi = w.iter().rposition(|v| *v > cut).map_or(w.len(), |i| i + 1);
    lo..hi
}

/// `B_k(f)(x)` for the tensor-product Bernstein operator of degree `f.k`.
pub fn bernstein_nd(f: &SampledField, x: &Point) -> Result<f64> {
    let w: Vec<Vec<f64>> = x.iter().map(|c| f.unit(*c).map(|t| bernstein_weights(f.k, t))).collect::<Result<_>>()?;
    let r: Vec<_> = w.iter().map(|v| significant(v)).collect();
    let mut total = 0.0;
    for l in r[2].clone() {
        let mut plane = 0.0;
        for j in r[1].clone() {
            let row: f64 = r[0].clone().map(|i| w[0][i] * f.at(i, j, l)).sum();
            plane += w[1][j] * row;
        }
        total += w[2][l] * plane;
    }
    Ok(total)
}

/// `B_k(f)` on the tensor grid `xs × ys × zs` by mode products, x-index fastest.
pub fn bernstein_grid(f: &SampledField, axes: [&[f64]; 3]) -> Result<Vec<f64>> {
    let n = f.k + 1;
    let basis = |pts: &[f64]| -> Result<Mat<f64>> {
        let mut m = Mat::zeros(pts.len(), n);
        for (p, x) in pts.iter().enumerate() {
            for (j, v) in bernstein_weights(f.k, f.unit(*x)?).into_iter().enumerate() {
                m[(p, j)] = v;
            }
        }
        Ok(m)
    };
    let (px, py, pz) = (basis(axes[0])?, basis(axes[1])?, basis(axes[2])?);
    let (nx, ny, nz) = (axes[0].len(), axes[1].len(), axes[2].len());
    let mut out = vec![0.0; nx * ny * nz];
    for l in 0..n {
        let slab = MatRef::from_column_major_slice(&f.values[l * n * n..(l + 1) * n * n], n, n);
        let t = &px * slab * py.transpose();
        for r in 0..nz {
            let wz = pz[(r, l)];
            if wz == 0.0 {
                continue;
            }
            for q in 0..ny {
                for p in 0..nx {
                    out[p + nx * (q + ny * r)] += wz * t[(p, q)];
                }
            }
        }
    }
    Ok(out)
}

/// Closest-point extension `σ_e = σ ∘ 𝔭_Ω̄` sampled on the `(k+1)³` lattice
/// of `[a, b]³`, which must contain `Ω̄`.
pub fn extend_conductivity(cond: &Conductivity, domain: Domain, a: f64, b: f64, k: usize) -> Result<SampledField> {
    let (lo, hi) = domain.bounding_box();
    if !(a <= lo && b >= hi) {
        return Err(LabError::Domain(format!("cube [{a}, {b}]^3 does not contain the closed {}", domain.name())));
    }
    SampledField::from_fn(a, b, k, |x| cond.value(&domain.closest_point(x)))
}

/// Approximation method of [`dense_approximant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bernstein,
    Mollifier,
}

/// Smooth positive approximant of a conductivity.
#[derive(Clone)]
pub enum Approximant {
    Bernstein(SampledField),
    /// `ψ_{1/k} ∗ σ_e` with `ψ` the normalized smooth bump of the unit ball.
    Mollified { cond: Conductivity, domain: Domain, k: usize },
}

impl ScalarField for Approximant {
    fn value(&self, x: &Point) -> f64 {
        match self {
            // points outside the cube are clamped onto it
            Approximant::Bernstein(f) => bernstein_nd(f, &x.map(|c| c.clamp(f.a, f.b))).unwrap_or(f64::NAN),
            Approximant::Mollified { cond, domain, k } => mollify(cond, *domain, *k, x),
        }
    }

    fn range_on(&self, _domain: Domain) -> Option<(f64, f64)> {
        self.bounds()
    }

    fn describe(&self) -> String {
        match self {
            Approximant::Bernstein(f) => format!("bernstein(k={};a={};b={})", f.k, f.a, f.b),
            Approximant::Mollified { cond, k, .. } => format!("mollified(k={k};{})", cond.id()),
        }
    }
}

/// Result of [`dense_approximant`].
#[derive(Clone)]
pub struct DenseApproximant {
    pub chi: Approximant,
    pub k_used: usize,
    /// `max |σ − χ|` over the error samples.
    pub sup_error: f64,
    /// `min χ` over the error samples.
    pub min_value: f64,
}

impl DenseApproximant {
    /// `χ` as a conductivity on `mesh`, with its values at the vertices and
    /// tet centroids tabulated up front.
    pub fn conductivity(&self, mesh: &Mesh) -> Result<Conductivity> {
        let mut pts: Vec<Point> = mesh.vertices().to_vec();
        pts.extend((0..mesh.tets().len()).map(|t| mesh.centroid(t)));
        let vals = self.chi.values_at(&pts)?;
        let table = pts.iter().map(|p| p.map(f64::to_bits)).zip(vals).collect();
        let field = Tabulated { inner: self.chi.clone(), table, range: self.chi.bounds() };
        Conductivity::custom(self.chi.describe(), Arc::new(field), mesh.domain())
    }
}

impl Approximant {
    /// Bounds valid on the whole cube: lattice extremes for Bernstein
    /// (convex combinations), the range of `σ` for the mollifier when known.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Approximant::Bernstein(f) => Some((f.min(), f.max())),
            Approximant::Mollified { cond, domain, .. } => cond.field().range_on(*domain),
        }
    }

    /// Values at many points; Bernstein values go through mode products on
    /// the grid of distinct coordinates when that grid is small enough.
    pub fn values_at(&self, pts: &[Point]) -> Result<Vec<f64>> {
        if let Approximant::Bernstein(f) = self {
            let axes: Vec<Vec<f64>> = (0..3)
                .map(|a| {
                    let mut v: Vec<f64> = pts.iter().map(|p| p[a].clamp(f.a, f.b)).collect();
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    v
                })
                .collect();
            if axes.iter().map(Vec::len).product::<usize>() <= GRID_LIMIT {
                let grid = bernstein_grid(f, [&axes[0], &axes[1], &axes[2]])?;
                let (nx, ny) = (axes[0].len(), axes[1].len());
                let find = |a: usize, x: f64| axes[a].binary_search_by(|v| v.total_cmp(&x.clamp(f.a, f.b))).expect("coordinate on grid");
                return Ok(pts.iter().map(|p| grid[find(0, p[0]) + nx * (find(1, p[1]) + ny * find(2, p[2]))]).collect());
            }
        }
        Ok(pts.iter().map(|p| self.value(p)).collect())
    }
}

/// Largest tensor grid evaluated by mode products in [`Approximant::values_at`].
const GRID_LIMIT: usize = 4_000_000;

/// An approximant with precomputed values at known points.
struct Tabulated {
    inner: Approximant,
    table: HashMap<[u64; 3], f64>,
    range: Option<(f64, f64)>,
}

impl ScalarField for Tabulated {
    fn value(&self, x: &Point) -> f64 {
        self.table.get(&x.map(f64::to_bits)).copied().unwrap_or_else(|| self.inner.value(x))
    }

    fn range_on(&self, _domain: Domain) -> Option<(f64, f64)> {
        self.range
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// Tensor grid of the bounding box with at least [`ERROR_SAMPLES`] points in `Ω̄`.
fn error_axes(domain: Domain) -> Vec<f64> {
    let (lo, hi) = domain.bounding_box();
    let fill = domain.volume() / (hi - lo).powi(3);
    let n = ((ERROR_SAMPLES as f64 / fill).cbrt().ceil() as usize).max(2) + 1;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `χ` with `‖σ − χ‖_{C(Ω̄)} ≤ epsilon` on the error samples, doubling the
/// degree (Bernstein) or the inverse mollifier radius from 1 up to [`MAX_DEGREE`].
pub fn dense_approximant(cond: &Conductivity, domain: Domain, epsilon: f64, method: Method) -> Result<DenseApproximant> {
    if !(epsilon > 0.0) {
        return Err(LabError::Range { what: "epsilon", value: epsilon, min: 0.0, max: f64::INFINITY });
    }
    let axis = error_axes(domain);
    let (lo, hi) = domain.bounding_box();
    let mut inside = Vec::new();
    let mut exact = Vec::new();
    let n = axis.len();
    for r in 0..n {
        for q in 0..n {
            for p in 0..n {
                let x = [axis[p], axis[q], axis[r]];
                if domain.contains(&x) {
                    inside.push(p + n * (q + n * r));
                    exact.push(cond.value(&x));
                }
            }
        }
    }
    let mut k = 1;
    while k <= MAX_DEGREE {
        let (chi, approx) = match method {
            Method::Bernstein => {
                let f = extend_conductivity(cond, domain, lo, hi, k)?;
                let grid = bernstein_grid(&f, [&axis, &axis, &axis])?;
                (Approximant::Bernstein(f), inside.iter().map(|&i| grid[i]).collect::<Vec<_>>())
            }
            Method::Mollifier => {
                let chi = Approximant::Mollified { cond: cond.clone(), domain, k };
                let vals = inside
                    .iter()
                    .map(|&i| chi.value(&[axis[i % n], axis[(i / n) % n], axis[i / (n * n)]]))
                    .collect();
                (chi, vals)
            }
        };
        let sup_error = approx.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let min_value = approx.iter().cloned().fold(f64::INFINITY, f64::min);
        if sup_error <= epsilon {
            if !(min_value > 0.0) {
                return Err(LabError::InvalidConductivity(format!("approximant has minimum {min_value}")));
            }
            return Ok(DenseApproximant { chi, k_used: k, sup_error, min_value });
        }
        k *= 2;
    }
    Err(LabError::NonConvergence(format!(
        "{} approximation of {} did not reach {epsilon} with degree <= {MAX_DEGREE}",
        match method {
            Method::Bernstein => "Bernstein",
            Method::Mollifier => "mollifier",
        },
        cond.id()
    )))
}

/// Unnormalized bump `exp(-1/(1-r²))` on the unit ball.
fn raw_bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// `∫_{B₁} exp(-1/(1-|y|²)) dy` by composite Simpson on the radial integral.
fn bump_mass() -> f64 {
    const N: usize = 20_000;
    let h = 1.0 / N as f64;
    let f = |r: f64| 4.0 * PI * r * r * raw_bump(r);
    let mut s = f(0.0) + f(1.0);
    for i in 1..N {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Product rule on the unit ball (Gauss–Legendre in `r` and `cos θ`, uniform
/// in `φ`) for the normalized bump; returns points and weights summing to one.
fn mollifier_rule() -> &'static [(Point, f64)] {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<(Point, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let (rn, rw) = gauss_legendre(8);
        let (cn, cw) = gauss_legendre(6);
        let nphi = 12;
        let mut rule = Vec::new();
        for (r, wr) in rn.iter().zip(&rw) {
            let r = 0.5 * (r + 1.0);
            for (c, wc) in cn.iter().zip(&cw) {
                let s = (1.0 - c * c).sqrt();
                for i in 0..nphi {
                    let phi = 2.0 * PI * i as f64 / nphi as f64;
                    let w = 0.5 * wr * wc * (2.0 * PI / nphi as f64) * r * r * raw_bump(r);
                    rule.push(([r * s * phi.cos(), r * s * phi.sin(), r * c], w));
                }
            }
        }
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        rule.iter_mut().for_each(|(_, w)| *w /= total);
        rule
    })
}

/// Mass of the normalized mollifier `ψ = exp(-1/(1-|y|²))/∫exp(-1/(1-|y|²))`
/// recomputed with an independent rule (Gauss–Legendre radial, 64 nodes).
pub fn mollifier_mass() -> f64 {
    let (x, w) = gauss_legendre(64);
    let radial: f64 = x.iter().zip(&w).map(|(t, w)| {
        let r = 0.5 * (t + 1.0);
        0.5 * w * 4.0 * PI * r * r * raw_bump(r)
    }).sum();
    radial / bump_mass()
}

fn mollify(cond: &Conductivity, domain: Domain, k: usize, x: &Point) -> f64 {
    let radius = 1.0 / k as f64;
    mollifier_rule()
        .iter()
        .map(|(y, w)| w * cond.value(&domain.closest_point(&[x[0] - radius * y[0], x[1] - radius * y[1], x[2] - radius * y[2]])))
        .sum()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// JSON coefficient export: `{"a", "b", "k", "layout", "values"}`.
pub fn coefficients_json(f: &SampledField) -> Result<String> {
    #[derive(Serialize)]
    struct Export<'a> {
        a: f64,
        b: f64,
        k: usize,
        layout: &'static str,
        values: &'a [f64],
    }
    Ok(serde_json::to_string_pretty(&Export { a: f.a, b: f.b, k: f.k, layout: "i + (k+1)*(j + (k+1)*l)", values: &f.values })?)
}
