use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{Domain, Mesh};
use crate::vec3::{self, Mat3, Point};

/// Step of the fourth-order finite-difference fallbacks.
pub const FD_STEP: f64 = 1e-3;

/// A smooth scalar field on (a neighbourhood of) the closed domain.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> Point {
        fd_gradient(|p| self.value(p), x)
    }

    /// `Δ(σ^{1/2})` in closed form, when the field knows it.
    fn sqrt_laplacian(&self, _x: &Point) -> Option<f64> {
        None
    }

    /// Certified `(min, max)` over the closed domain, when available in
    /// closed form.
    fn range_on(&self, _domain: Domain) -> Option<(f64, f64)> {
        None
    }

    fn describe(&self) -> String;
}

/// Fourth-order centred gradient.
pub fn fd_gradient(f: impl Fn(&Point) -> f64, x: &Point) -> Point {
    let h = FD_STEP;
    let mut g = [0.0; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let at = |s: f64| {
            let mut p = *x;
            p[i] += s * h;
            f(&p)
        };
        *gi = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
    }
    g
}

/// Fourth-order centred Laplacian with step [`FD_STEP`].
pub fn fd_laplacian(f: impl Fn(&Point) -> f64, x: &Point) -> f64 {
    let h = FD_STEP;
    let f0 = f(x);
    let mut acc = 0.0;
    for i in 0..3 {
        let at = |s: f64| {
            let mut p = *x;
            p[i] += s * h;
            f(&p)
        };
        acc += -at(-2.0) + 16.0 * at(-1.0) - 30.0 * f0 + 16.0 * at(1.0) - at(2.0);
    }
    acc / (12.0 * h * h)
}

/// Built-in analytic conductivity families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `σ = value`
    Constant { value: f64 },
    /// `σ = gradient·x + offset`
    Affine { gradient: Point, offset: f64 },
    /// `σ = base + amplitude·exp(-|x - center|²/width²)`
    GaussianBump {
        center: Point,
        width: f64,
        amplitude: f64,
        #[serde(default = "one")]
        base: f64,
    },
    /// `σ = (1 + beta·x₁²)²`
    Product { beta: f64 },
    /// `σ = 1 + amplitude·s·exp(-s/width)` with `s = 1 - x₁`: equal to 1 on the
    /// plane `x₁ = 1` with normal derivative `-amplitude` there.
    NormalLayer { amplitude: f64, width: f64 },
}

fn one() -> f64 {
    1.0
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant { .. } => "constant",
            Family::Affine { .. } => "affine",
            Family::GaussianBump { .. } => "gaussian-bump",
            Family::Product { .. } => "product",
            Family::NormalLayer { .. } => "normal-layer",
        }
    }

    /// `key=value` parameter list, stable across runs.
    pub fn parameters(&self) -> Vec<(String, String)> {
        let p = |v: &Point| format!("{},{},{}", v[0], v[1], v[2]);
        match self {
            Family::Constant { value } => vec![("value".into(), value.to_string())],
            Family::Affine { gradient, offset } => {
                vec![("gradient".into(), p(gradient)), ("offset".into(), offset.to_string())]
            }
            Family::GaussianBump { center, width, amplitude, base } => vec![
                ("center".into(), p(center)),
                ("width".into(), width.to_string()),
                ("amplitude".into(), amplitude.to_string()),
                ("base".into(), base.to_string()),
            ],
            Family::Product { beta } => vec![("beta".into(), beta.to_string())],
            Family::NormalLayer { amplitude, width } => {
                vec![("amplitude".into(), amplitude.to_string()), ("width".into(), width.to_string())]
            }
        }
    }

    /// `(f, f', f'')` of `f(s) = s·exp(-s/w)`.
    fn layer(s: f64, w: f64) -> (f64, f64, f64) {
        let e = (-s / w).exp();
        (s * e, e * (1.0 - s / w), e * (s / (w * w) - 2.0 / w))
    }

    fn gaussian(center: &Point, width: f64, x: &Point) -> (f64, Point, f64) {
        let d = vec3::sub(x, center);
        let r2 = vec3::dot(&d, &d);
        let w2 = width * width;
        let e = (-r2 / w2).exp();
        (e, vec3::scale(&d, -2.0 * e / w2), e * (4.0 * r2 / (w2 * w2) - 6.0 / w2))
    }
}

impl ScalarField for Family {
    fn value(&self, x: &Point) -> f64 {
        match self {
            Family::Constant { value } => *value,
            Family::Affine { gradient, offset } => vec3::dot(gradient, x) + offset,
            Family::GaussianBump { center, width, amplitude, base } => {
                base + amplitude * Self::gaussian(center, *width, x).0
            }
            Family::Product { beta } => {
                let s = 1.0 + beta * x[0] * x[0];
                s * s
            }
            Family::NormalLayer { amplitude, width } => 1.0 + amplitude * Self::layer(1.0 - x[0], *width).0,
        }
    }

    fn gradient(&self, x: &Point) -> Point {
        match self {
            Family::Constant { .. } => [0.0; 3],
            Family::Affine { gradient, .. } => *gradient,
            Family::GaussianBump { center, width, amplitude, .. } => {
                vec3::scale(&Self::gaussian(center, *width, x).1, *amplitude)
            }
            Family::Product { beta } => [4.0 * beta * x[0] * (1.0 + beta * x[0] * x[0]), 0.0, 0.0],
            Family::NormalLayer { amplitude, width } => {
                [-amplitude * Self::layer(1.0 - x[0], *width).1, 0.0, 0.0]
            }
        }
    }

    fn sqrt_laplacian(&self, x: &Point) -> Option<f64> {
        // Δ√σ = Δσ/(2√σ) − |∇σ|²/(4σ^{3/2})
        let via = |s: f64, g: Point, lap: f64| lap / (2.0 * s.sqrt()) - vec3::dot(&g, &g) / (4.0 * s * s.sqrt());
        Some(match self {
            Family::Constant { .. } => 0.0,
            Family::Affine { gradient, .. } => via(self.value(x), *gradient, 0.0),
            Family::GaussianBump { center, width, amplitude, base } => {
                let (e, g, lap) = Self::gaussian(center, *width, x);
                via(base + amplitude * e, vec3::scale(&g, *amplitude), amplitude * lap)
            }
            Family::Product { beta } => 2.0 * beta,
            Family::NormalLayer { amplitude, width } => {
                let (f, df, ddf) = Self::layer(1.0 - x[0], *width);
                via(1.0 + amplitude * f, [-amplitude * df, 0.0, 0.0], amplitude * ddf)
            }
        })
    }

    fn range_on(&self, domain: Domain) -> Option<(f64, f64)> {
        let (lo, hi) = domain.bounding_box();
        Some(match self {
            Family::Constant { value } => (*value, *value),
            Family::Affine { gradient, offset } => {
                let (mut a, mut b) = (*offset, *offset);
                for g in gradient {
                    a += (g * lo).min(g * hi);
                    b += (g * lo).max(g * hi);
                }
                (a, b)
            }
            Family::GaussianBump { amplitude, base, .. } => {
                (base + amplitude.min(0.0), base + amplitude.max(0.0))
            }
            Family::Product { beta } => {
                let t_max = lo.abs().max(hi.abs()).powi(2);
                let t_min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()).powi(2) };
                let a = 1.0 + beta * t_min;
                let b = 1.0 + beta * t_max;
                if a.min(b) <= 0.0 {
                    return Some((0.0, a.max(b).powi(2)));
                }
                (a.min(b).powi(2), a.max(b).powi(2))
            }
            Family::NormalLayer { amplitude, width } => {
                // f ≥ 0 peaks at s = width on s ∈ [1 - hi, 1 - lo]
                let (s_lo, s_hi) = (1.0 - hi, 1.0 - lo);
                if s_lo < 0.0 || *width <= 0.0 {
                    return None;
                }
                let peak = Self::layer(width.clamp(s_lo, s_hi), *width).0;
                let low = Self::layer(s_lo, *width).0.min(Self::layer(s_hi, *width).0);
                let (a, b) = (1.0 + amplitude * low, 1.0 + amplitude * peak);
                (a.min(b), a.max(b))
            }
        })
    }

    fn describe(&self) -> String {
        let params: Vec<String> = self.parameters().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name(), params.join(";"))
    }
}

/// Symmetric matrix coefficient `A(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixField {
    Constant { a: Mat3 },
    /// `A(x) = diag(diag_i + slope_i·x_i)`
    DiagonalAffine { diag: Point, slope: Point },
}

impl MatrixField {
    pub fn at(&self, x: &Point) -> Mat3 {
        match self {
            MatrixField::Constant { a } => *a,
            MatrixField::DiagonalAffine { diag, slope } => {
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    m[i][i] = diag[i] + slope[i] * x[i];
                }
                m
            }
        }
    }

    /// Ellipticity constant `μ` with `μ^{-1}|ξ|² ≤ Aξ·ξ ≤ μ|ξ|²` over the
    /// domain's bounding box.
    pub fn ellipticity(&self, domain: Domain) -> Result<f64> {
        let (lo, hi) = domain.bounding_box();
        let (min, max) = match self {
            MatrixField::Constant { a } => {
                for i in 0..3 {
                    for j in 0..i {
                        if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                            return Err(LabError::Ellipticity("matrix is not symmetric".into()));
                        }
                    }
                }
                let m = faer::Mat::from_fn(3, 3, |i, j| a[i][j]);
                let (vals, _) = crate::linalg::symmetric_eigen(m.as_ref())?;
                (vals[0], vals[2])
            }
            MatrixField::DiagonalAffine { diag, slope } => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for i in 0..3 {
                    for x in [lo, hi] {
                        let v = diag[i] + slope[i] * x;
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                (min, max)
            }
        };
        if !(min > 0.0) {
            return Err(LabError::Ellipticity(format!("smallest eigenvalue {min:e} is not positive")));
        }
        Ok(max.max(1.0 / min))
    }
}

/// A conductivity `σ` (optionally with an anisotropy `A`) together with its
/// ellipticity bounds on a model domain.
#[derive(Clone)]
pub struct Conductivity {
    id: String,
    field: Arc<dyn ScalarField>,
    family: Option<Family>,
    matrix: Option<MatrixField>,
    kappa: f64,
    mu: f64,
}

impl fmt::Debug for Conductivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Conductivity")
            .field("id", &self.id)
            .field("matrix", &self.matrix)
            .field("kappa", &self.kappa)
            .field("mu", &self.mu)
            .finish()
    }
}

fn kappa_from_range(id: &str, (min, max): (f64, f64)) -> Result<f64> {
    if !(min > 0.0) || !max.is_finite() {
        return Err(LabError::InvalidConductivity(format!("{id}: range [{min}, {max}] is not positive and bounded")));
    }
    Ok(max.max(1.0 / min))
}

/// Lattice samples of the closed domain used to bound fields without a
/// closed-form range.
fn domain_samples(domain: Domain) -> Vec<Point> {
    const N: usize = 24;
    let (lo, hi) = domain.bounding_box();
    let step = (hi - lo) / N as f64;
    let mut out = Vec::new();
    for i in 0..=N {
        for j in 0..=N {
            for k in 0..=N {
                let p = [lo + i as f64 * step, lo + j as f64 * step, lo + k as f64 * step];
                out.push(domain.closest_point(&p));
            }
        }
    }
    out
}

impl Conductivity {
    pub fn constant(value: f64) -> Result<Self> {
        Self::from_family(Family::Constant { value }, Domain::Cube)
    }

    pub fn from_family(family: Family, domain: Domain) -> Result<Self> {
        let id = family.describe();
        let range = family
            .range_on(domain)
            .ok_or_else(|| LabError::InvalidConductivity(format!("{id}: parameters outside the family's range")))?;
        let kappa = kappa_from_range(&id, range)?;
        Ok(Conductivity { id, field: Arc::new(family.clone()), family: Some(family), matrix: None, kappa, mu: 1.0 })
    }

    /// Wrap an arbitrary field; bounds come from `range_on` or, failing that,
    /// from dense lattice sampling of the closed domain.
    pub fn custom(id: impl Into<String>, field: Arc<dyn ScalarField>, domain: Domain) -> Result<Self> {
        let id = id.into();
        let range = match field.range_on(domain) {
            Some(r) => r,
            None => domain_samples(domain).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                let v = field.value(p);
                (a.min(v), b.max(v))
            }),
        };
        let kappa = kappa_from_range(&id, range)?;
        Ok(Conductivity { id, field, family: None, matrix: None, kappa, mu: 1.0 })
    }

    pub fn with_matrix(mut self, matrix: MatrixField, domain: Domain) -> Result<Self> {
        self.mu = matrix.ellipticity(domain)?;
        self.id = format!("{}*A", self.id);
        self.matrix = Some(matrix);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    pub fn matrix(&self) -> Option<&MatrixField> {
        self.matrix.as_ref()
    }

    pub fn field(&self) -> &Arc<dyn ScalarField> {
        &self.field
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.field.value(x)
    }

    pub fn gradient(&self, x: &Point) -> Point {
        self.field.gradient(x)
    }

    /// `A(x)`, the identity for isotropic conductivities.
    pub fn matrix_at(&self, x: &Point) -> Mat3 {
        self.matrix.as_ref().map_or(vec3::IDENTITY, |m| m.at(x))
    }

    /// `Δσ^{1/2}`: closed form when the family provides it, otherwise the
    /// fourth-order finite-difference fallback.
    pub fn sqrt_sigma_laplacian(&self, x: &Point) -> f64 {
        self.field
            .sqrt_laplacian(x)
            .unwrap_or_else(|| fd_laplacian(|p| self.field.value(p).max(0.0).sqrt(), x))
    }

    /// Check `σ ≥ κ^{-1}` at every vertex.
    pub fn validate_on(&self, mesh: &Mesh) -> Result<()> {
        for (v, p) in mesh.vertices().iter().enumerate() {
            let s = self.value(p);
            if !(s * self.kappa >= 1.0 - 1e-12) || !s.is_finite() {
                return Err(LabError::InvalidConductivity(format!(
                    "{}: sigma = {s} at vertex {v} violates kappa = {}",
                    self.id, self.kappa
                )));
            }
        }
        Ok(())
    }

    /// Largest relative deviation between `gradient` and centred differences
    /// at `count` random points of the domain.
    pub fn gradient_consistency<R: Rng>(&self, domain: Domain, rng: &mut R, count: usize) -> f64 {
        let (lo, hi) = domain.bounding_box();
        let mut worst: f64 = 0.0;
        let mut seen = 0;
        while seen < count {
            let p = [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
            if !domain.contains(&p) {
                continue;
            }
            seen += 1;
            let g = self.gradient(&p);
            let f = fd_gradient(|q| self.value(q), &p);
            let scale = vec3::norm(&g).max(self.value(&p).abs()).max(1e-300);
            worst = worst.max(vec3::dist(&g, &f) / scale);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<Family> {
        vec![
            Family::Constant { value: 2.5 },
            Family::Affine { gradient: [1.0, 0.0, 0.0], offset: 1.0 },
            Family::GaussianBump { center: [0.5, 0.5, 1.0], width: 0.3, amplitude: 0.7, base: 1.0 },
            Family::Product { beta: 0.3 },
            Family::NormalLayer { amplitude: 0.4, width: 0.3 },
        ]
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in families() {
            let c = Conductivity::from_family(f, Domain::Cube).unwrap();
            assert!(c.gradient_consistency(Domain::Cube, &mut rng, 100) < 1e-6, "{}", c.id());
        }
    }

    #[test]
    fn sqrt_laplacian_matches_fourth_order_oracle() {
        let p = [0.3, 0.7, 0.2];
        for f in families() {
            let exact = f.sqrt_laplacian(&p).unwrap();
            let fd = fd_laplacian(|x| f.value(x).sqrt(), &p);
            assert!((exact - fd).abs() <= 1e-5 * (1.0 + exact.abs()), "{f:?}: {exact} vs {fd}");
        }
        let beta = 0.3;
        let q = Family::Product { beta }.sqrt_laplacian(&p).unwrap();
        assert_eq!(q, 2.0 * beta);
    }

    #[test]
    fn kappa_bounds_cover_the_domain() {
        let c = Conductivity::from_family(Family::Affine { gradient: [1.0, 0.0, 0.0], offset: 1.0 }, Domain::Cube).unwrap();
        assert_eq!(c.kappa(), 2.0);
        let c = Conductivity::from_family(Family::Product { beta: 0.3 }, Domain::Ball).unwrap();
        assert!((c.kappa() - 1.69).abs() < 1e-12);
        assert!(Conductivity::from_family(Family::Affine { gradient: [-2.0, 0.0, 0.0], offset: 1.0 }, Domain::Cube).is_err());
        let mesh = crate::geometry::build_cube_mesh(3).unwrap();
        for f in families() {
            Conductivity::from_family(f, Domain::Cube).unwrap().validate_on(&mesh).unwrap();
        }
    }

    #[test]
    fn matrix_ellipticity() {
        let a = MatrixField::Constant { a: [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]] };
        assert!((a.ellipticity(Domain::Cube).unwrap() - 4.0).abs() < 1e-12);
        let bad = MatrixField::DiagonalAffine { diag: [1.0, 1.0, 1.0], slope: [-2.0, 0.0, 0.0] };
        assert!(matches!(bad.ellipticity(Domain::Cube), Err(LabError::Ellipticity(_))));
        let c = Conductivity::constant(1.0)
            .unwrap()
            .with_matrix(MatrixField::DiagonalAffine { diag: [1.0, 2.0, 1.0], slope: [0.5, 0.0, 0.0] }, Domain::Cube)
            .unwrap();
        assert_eq!(c.mu(), 2.0);
        assert_eq!(c.matrix_at(&[1.0, 0.0, 0.0])[0][0], 1.5);
    }

    #[test]
    fn family_config_round_trip() {
        for f in families() {
            let s = serde_json::to_string(&f).unwrap();
            assert_eq!(serde_json::from_str::<Family>(&s).unwrap(), f);
        }
        let f: Family = serde_json::from_str(r#"{"family":"gaussian-bump","center":[0,0,0],"width":1,"amplitude":2}"#).unwrap();
        assert_eq!(f.value(&[0.0; 3]), 3.0);
    }
}
