//! Model domains, boundary projection and the interior/exterior cone probes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::vec3::{self, Point};

/// Default cone half-angle.
pub const CONE_HALF_ANGLE: f64 = std::f64::consts::FRAC_PI_4;
/// Upper bound on the default cone radius.
pub const CONE_RADIUS_CAP: f64 = 0.25;
/// Collar half-width for the ball.
pub const BALL_COLLAR: f64 = 0.9;

/// The two model domains: the unit cube `[0,1]^3` and the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cube,
    Ball,
}

/// Result of projecting an interior point onto the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Point,
    pub distance: f64,
    pub normal: Point,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Cube => "cube",
            Domain::Ball => "ball",
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Cube => 1.0,
            Domain::Ball => 4.0 * std::f64::consts::PI / 3.0,
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (f64, f64) {
        match self {
            Domain::Cube => (0.0, 1.0),
            Domain::Ball => (-1.0, 1.0),
        }
    }

    /// Membership in the closed domain.
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::Cube => x.iter().all(|c| (0.0..=1.0).contains(c)),
            Domain::Ball => vec3::norm(x) <= 1.0,
        }
    }

    /// Membership in the open domain.
    pub fn contains_open(&self, x: &Point) -> bool {
        match self {
            Domain::Cube => x.iter().all(|c| *c > 0.0 && *c < 1.0),
            Domain::Ball => vec3::norm(x) < 1.0,
        }
    }

    /// Distance from a point of the closed domain to the boundary.
    pub fn distance_to_boundary(&self, x: &Point) -> f64 {
        match self {
            Domain::Cube => x
                .iter()
                .map(|c| c.min(1.0 - c))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Domain::Ball => (1.0 - vec3::norm(x)).max(0.0),
        }
    }

    /// Closest point of the closed domain (identity inside).
    pub fn closest_point(&self, x: &Point) -> Point {
        match self {
            Domain::Cube => [x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0), x[2].clamp(0.0, 1.0)],
            Domain::Ball => {
                let r = vec3::norm(x);
                if r <= 1.0 {
                    *x
                } else {
                    vec3::scale(x, 1.0 / r)
                }
            }
        }
    }

    /// Distance from `x` to the closed domain; zero for points of the domain.
    pub fn exterior_distance(&self, x: &Point) -> f64 {
        vec3::dist(x, &self.closest_point(x))
    }

    /// Outward unit normal at a boundary point lying in a face interior
    /// (cube) or on the sphere (ball).
    pub fn normal_at(&self, p: &Point) -> Result<Point> {
        match self {
            Domain::Cube => {
                let face = cube_face_of(p)?;
                Ok(face_normal(face))
            }
            Domain::Ball => {
                let r = vec3::norm(p);
                if (r - 1.0).abs() > 1e-9 {
                    return Err(LabError::InvalidProbe(format!("{p:?} is not on the unit sphere")));
                }
                Ok(vec3::scale(p, 1.0 / r))
            }
        }
    }

    /// Boundary projection `p(x)` with `x = p - d * nu(p)`.
    ///
    /// On the cube the nearest face must be strictly nearer than all others;
    /// on the ball the point must differ from the origin.
    pub fn project_to_boundary(&self, x: &Point) -> Result<Projection> {
        if !self.contains_open(x) {
            return Err(LabError::OutsideDomain { point: *x });
        }
        match self {
            Domain::Cube => {
                // (distance, axis, side) for the six faces
                let mut faces: Vec<(f64, usize, bool)> = Vec::with_capacity(6);
                for axis in 0..3 {
                    faces.push((x[axis], axis, false));
                    faces.push((1.0 - x[axis], axis, true));
                }
                faces.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (d, axis, high) = faces[0];
                if faces[1].0 - d <= 1e-12 {
                    return Err(LabError::AmbiguousProjection { point: *x });
                }
                let mut p = *x;
                p[axis] = if high { 1.0 } else { 0.0 };
                let mut normal = [0.0; 3];
                normal[axis] = if high { 1.0 } else { -1.0 };
                Ok(Projection { point: p, distance: d, normal })
            }
            Domain::Ball => {
                let r = vec3::norm(x);
                if r == 0.0 {
                    return Err(LabError::AmbiguousProjection { point: *x });
                }
                let p = vec3::scale(x, 1.0 / r);
                Ok(Projection { point: p, distance: 1.0 - r, normal: p })
            }
        }
    }

    /// Deterministic boundary sample of roughly `n` points with outward
    /// normals, used for sup-norms over the boundary.
    pub fn boundary_samples(&self, n: usize) -> Vec<(Point, Point)> {
        match self {
            Domain::Cube => {
                let per_face = (n as f64 / 6.0).sqrt().ceil().max(2.0) as usize;
                let mut out = Vec::with_capacity(6 * per_face * per_face);
                for face in 0..6 {
                    let axis = face / 2;
                    let high = face % 2 == 1;
                    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                    let mut normal = [0.0; 3];
                    normal[axis] = if high { 1.0 } else { -1.0 };
                    for i in 0..per_face {
                        for j in 0..per_face {
                            let mut p = [0.0; 3];
                            p[axis] = if high { 1.0 } else { 0.0 };
                            p[a] = i as f64 / (per_face - 1) as f64;
                            p[b] = j as f64 / (per_face - 1) as f64;
                            out.push((p, normal));
                        }
                    }
                }
                out
            }
            Domain::Ball => {
                // Fibonacci sphere
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..n)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * i as f64;
                        let p = [r * phi.cos(), r * phi.sin(), z];
                        (p, p)
                    })
                    .collect()
            }
        }
    }

    /// Half-width of the collar in which the projection is used at `x0`:
    /// half the distance to the nearest cube edge, or a fixed value on the ball.
    pub fn collar_width(&self, x0: &Point) -> Result<f64> {
        match self {
            Domain::Cube => Ok(0.5 * cube_edge_distance(x0)?),
            Domain::Ball => Ok(BALL_COLLAR),
        }
    }
}

/// Index `2 * axis + side` of the cube face containing `p` in its interior.
pub(crate) fn cube_face_of(p: &Point) -> Result<usize> {
    let tol = 1e-12;
    let mut found = None;
    for axis in 0..3 {
        for (side, value) in [(0usize, 0.0), (1, 1.0)] {
            if (p[axis] - value).abs() <= tol {
                if found.is_some() {
                    return Err(LabError::InvalidProbe(format!("{p:?} lies on a cube edge")));
                }
                found = Some(2 * axis + side);
            }
        }
    }
    let face = found.ok_or_else(|| LabError::InvalidProbe(format!("{p:?} is not on the cube boundary")))?;
    let axis = face / 2;
    for other in (0..3).filter(|a| *a != axis) {
        if !(p[other] > 0.0 && p[other] < 1.0) {
            return Err(LabError::InvalidProbe(format!("{p:?} is not in a face interior")));
        }
    }
    Ok(face)
}

fn face_normal(face: usize) -> Point {
    let mut n = [0.0; 3];
    n[face / 2] = if face % 2 == 1 { 1.0 } else { -1.0 };
    n
}

/// Distance from a cube-face point to the edges bounding its face.
pub(crate) fn cube_edge_distance(p: &Point) -> Result<f64> {
    let face = cube_face_of(p)?;
    let axis = face / 2;
    Ok((0..3)
        .filter(|a| *a != axis)
        .map(|a| p[a].min(1.0 - p[a]))
        .fold(f64::INFINITY, f64::min))
}

/// A boundary point with its interior and exterior cones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub domain: Domain,
    pub x0: Point,
    pub nu: Point,
    pub xi_plus: Point,
    pub xi_minus: Point,
    pub radius: f64,
    pub theta: f64,
}

impl Probe {
    /// Probe at `x0` with the default cone: half-angle pi/4 and radius
    /// `min(edge distance, 0.25)` on the cube, `0.25` on the ball.
    pub fn new(domain: Domain, x0: Point) -> Result<Self> {
        let nu = domain.normal_at(&x0)?;
        let radius = match domain {
            Domain::Cube => cube_edge_distance(&x0)?.min(CONE_RADIUS_CAP),
            Domain::Ball => CONE_RADIUS_CAP,
        };
        Ok(Probe {
            domain,
            x0,
            nu,
            xi_plus: vec3::scale(&nu, -1.0),
            xi_minus: nu,
            radius,
            theta: CONE_HALF_ANGLE,
        })
    }

    /// Same probe with an explicit cone radius. On the cube the radius may
    /// not exceed the distance to the face edges.
    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        let max = match self.domain {
            Domain::Cube => cube_edge_distance(&self.x0)?,
            Domain::Ball => 2.0 * self.theta.cos(),
        };
        if !(radius > 0.0 && radius <= max) {
            return Err(LabError::InvalidProbe(format!("cone radius {radius} not in (0, {max}]")));
        }
        self.radius = radius;
        Ok(self)
    }

    /// Whether `x` lies in the open interior (`interior = true`) or exterior cone.
    pub fn cone_contains(&self, x: &Point, interior: bool) -> bool {
        let axis = if interior { &self.xi_plus } else { &self.xi_minus };
        let w = vec3::sub(x, &self.x0);
        let r = vec3::norm(&w);
        r > 0.0 && r < self.radius && vec3::dot(&w, axis) > r * self.theta.cos()
    }

    /// Uniform samples of the interior or exterior cone (rejection sampling
    /// in the bounding ball).
    pub fn sample_cone<R: Rng>(&self, interior: bool, rng: &mut R, count: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let w = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let x = vec3::axpy(&self.x0, self.radius, &w);
            if self.cone_contains(&x, interior) {
                out.push(x);
            }
        }
        out
    }

    /// Pole pair `(x_delta, y_delta) = x0 + (delta/2) xi_{+/-}` for `0 < delta < R/2`.
    pub fn cone_points(&self, delta: f64) -> Result<(Point, Point)> {
        let max = 0.5 * self.radius;
        if !(delta > 0.0 && delta < max) {
            return Err(LabError::ConeViolation { delta, max });
        }
        Ok((
            vec3::axpy(&self.x0, 0.5 * delta, &self.xi_plus),
            vec3::axpy(&self.x0, 0.5 * delta, &self.xi_minus),
        ))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn cube_projection_example() {
        let p = Domain::Cube.project_to_boundary(&[0.5, 0.5, 0.3]).unwrap();
        assert_eq!(p.point, [0.5, 0.5, 0.0]);
        assert!((p.distance - 0.3).abs() < 1e-15);
        assert_eq!(p.normal, [0.0, 0.0, -1.0]);
    }

    #[test]
    fn ball_projection_example() {
        let p = Domain::Ball.project_to_boundary(&[0.0, 0.0, 0.4]).unwrap();
        assert_eq!(p.point, [0.0, 0.0, 1.0]);
        assert!((p.distance - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ambiguous_projection_is_rejected() {
        let err = Domain::Cube.project_to_boundary(&[0.5, 0.3, 0.3]).unwrap_err();
        assert!(matches!(err, LabError::AmbiguousProjection { .. }));
        let err = Domain::Ball.project_to_boundary(&[0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, LabError::AmbiguousProjection { .. }));
        let err = Domain::Cube.project_to_boundary(&[1.5, 0.3, 0.3]).unwrap_err();
        assert!(matches!(err, LabError::OutsideDomain { .. }));
    }

    #[test]
    fn projection_reconstructs_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for domain in [Domain::Cube, Domain::Ball] {
            for _ in 0..500 {
                let x: Point = match domain {
                    Domain::Cube => [rng.gen(), rng.gen(), rng.gen()],
                    Domain::Ball => [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)],
                };
                let Ok(p) = domain.project_to_boundary(&x) else { continue };
                let back = vec3::axpy(&p.point, -p.distance, &p.normal);
                assert!(vec3::dist(&back, &x) < 1e-12);
                assert!((p.distance - domain.distance_to_boundary(&x)).abs() < 1e-12);
                // points along the normal segment project to the same foot
                for t in [0.1, 0.5, 1.0] {
                    let xt = vec3::axpy(&p.point, -t * p.distance, &p.normal);
                    let q = domain.project_to_boundary(&xt).unwrap();
                    assert!(vec3::dist(&q.point, &p.point) < 1e-12);
                    assert!((q.distance - t * p.distance).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn probe_axes_and_radius() {
        let probe = Probe::new(Domain::Cube, [0.5, 0.5, 0.0]).unwrap();
        assert_eq!(probe.xi_plus, [0.0, 0.0, 1.0]);
        assert_eq!(probe.xi_minus, [0.0, 0.0, -1.0]);
        assert_eq!(probe.radius, 0.25);
        let near_edge = Probe::new(Domain::Cube, [0.1, 0.5, 1.0]).unwrap();
        assert!((near_edge.radius - 0.1).abs() < 1e-15);
        assert!(Probe::new(Domain::Cube, [0.0, 0.5, 0.0]).is_err());
        assert!(Probe::new(Domain::Cube, [0.5, 0.5, 0.5]).is_err());
        let ball = Probe::new(Domain::Ball, [0.0, 0.6, 0.8]).unwrap();
        assert!((vec3::norm(&ball.nu) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cones_sit_inside_and_outside() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let probes = [
            Probe::new(Domain::Cube, [0.5, 0.5, 0.0]).unwrap(),
            Probe::new(Domain::Cube, [1.0, 0.3, 0.6]).unwrap(),
            Probe::new(Domain::Cube, [0.5, 0.5, 0.0]).unwrap().with_radius(0.5).unwrap(),
            Probe::new(Domain::Ball, [0.0, 0.0, 1.0]).unwrap(),
            Probe::new(Domain::Ball, vec3::normalize(&[1.0, 2.0, -0.5])).unwrap(),
        ];
        for probe in probes {
            for x in probe.sample_cone(true, &mut rng, 1000) {
                assert!(probe.domain.contains_open(&x), "{x:?}");
            }
            for y in probe.sample_cone(false, &mut rng, 1000) {
                assert!(probe.domain.exterior_distance(&y) > 0.0, "{y:?}");
            }
        }
    }

    #[test]
    fn cone_points_examples() {
        let probe = Probe::new(Domain::Cube, [0.5, 0.5, 1.0]).unwrap();
        let (x, y) = probe.cone_points(0.1).unwrap();
        assert!((x[2] - 0.95).abs() < 1e-15);
        assert!(Domain::Cube.exterior_distance(&y) > 0.0);
        assert!((vec3::dist(&x, &y) - 0.1).abs() < 1e-15);
        for delta in [1e-3, 1e-6] {
            let (x, y) = probe.cone_points(delta).unwrap();
            assert!((vec3::dist(&x, &y) - delta).abs() < 1e-15);
        }
        // the inscribed ball about x_delta touches the lateral surface at radius (delta/2) sin(theta)
        let (x, _) = probe.cone_points(0.1).unwrap();
        let r = 0.05 * probe.theta.sin();
        let perp = [1.0, 0.0, 0.0];
        let towards_surface = vec3::axpy(
            &vec3::scale(&perp, probe.theta.cos()),
            -probe.theta.sin(),
            &probe.xi_plus,
        );
        let inside = vec3::axpy(&x, 0.999 * r, &towards_surface);
        let outside = vec3::axpy(&x, 1.001 * r, &towards_surface);
        assert!(probe.cone_contains(&inside, true));
        assert!(!probe.cone_contains(&outside, true));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let u = vec3::normalize(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            assert!(probe.cone_contains(&vec3::axpy(&x, 0.999 * r, &u), true));
        }
        assert!(matches!(probe.cone_points(0.125), Err(LabError::ConeViolation { .. })));
        assert!(probe.cone_points(0.0).is_err());
    }
}
