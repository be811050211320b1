use std::collections::HashMap;

use crate::error::{LabError, Result};
use crate::geometry::Domain;
use crate::vec3::{self, Point};

/// A boundary triangle, oriented so that `(b - a) x (c - a)` points outward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub normal: Point,
    /// The unique tet owning this face.
    pub tet: usize,
}

/// Tetrahedral mesh of a model domain. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    id: String,
    domain: Domain,
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    boundary_faces: Vec<BoundaryFace>,
    boundary_vertices: Vec<usize>,
    /// `boundary_index[v]` is the position of vertex `v` in `boundary_vertices`.
    boundary_index: Vec<Option<usize>>,
    h: f64,
}

/// Positive-orientation signed volume of a tet.
pub fn signed_volume(p: &[Point; 4]) -> f64 {
    let a = vec3::sub(&p[1], &p[0]);
    let b = vec3::sub(&p[2], &p[0]);
    let c = vec3::sub(&p[3], &p[0]);
    vec3::dot(&a, &vec3::cross(&b, &c)) / 6.0
}

impl Mesh {
    /// Assemble a mesh from vertices and positively oriented tets; the
    /// boundary is recovered from faces owned by a single tet.
    pub fn from_parts(id: impl Into<String>, domain: Domain, vertices: Vec<Point>, tets: Vec<[usize; 4]>) -> Result<Self> {
        let n = vertices.len();
        for (t, tet) in tets.iter().enumerate() {
            if tet.iter().any(|&v| v >= n) {
                return Err(LabError::InvalidMesh(format!("tet {t} references a missing vertex")));
            }
            let vol = signed_volume(&tet.map(|v| vertices[v]));
            if !(vol > 0.0) {
                return Err(LabError::DegenerateMesh { tet: t, volume: vol });
            }
        }

        let mut counts: HashMap<[usize; 3], u32> = HashMap::with_capacity(2 * tets.len());
        for tet in &tets {
            for f in 0..4 {
                *counts.entry(sorted_face(tet, f)).or_insert(0) += 1;
            }
        }
        if let Some((face, c)) = counts.iter().find(|(_, c)| **c > 2) {
            return Err(LabError::InvalidMesh(format!("face {face:?} shared by {c} tets")));
        }

        let mut boundary_faces = Vec::new();
        for (t, tet) in tets.iter().enumerate() {
            for f in 0..4 {
                if counts[&sorted_face(tet, f)] != 1 {
                    continue;
                }
                let opposite = vertices[tet[f]];
                let mut tri = face_of(tet, f);
                let [a, b, c] = tri.map(|v| vertices[v]);
                let mut normal = vec3::cross(&vec3::sub(&b, &a), &vec3::sub(&c, &a));
                if vec3::dot(&normal, &vec3::sub(&opposite, &a)) > 0.0 {
                    tri.swap(1, 2);
                    normal = vec3::scale(&normal, -1.0);
                }
                boundary_faces.push(BoundaryFace {
                    vertices: tri,
                    normal: vec3::normalize(&normal),
                    tet: t,
                });
            }
        }

        let mut boundary_vertices: Vec<usize> = boundary_faces.iter().flat_map(|f| f.vertices).collect();
        boundary_vertices.sort_unstable();
        boundary_vertices.dedup();
        let mut boundary_index = vec![None; n];
        for (i, &v) in boundary_vertices.iter().enumerate() {
            boundary_index[v] = Some(i);
        }

        let mut h: f64 = 0.0;
        for tet in &tets {
            for i in 0..4 {
                for j in i + 1..4 {
                    h = h.max(vec3::dist(&vertices[tet[i]], &vertices[tet[j]]));
                }
            }
        }

        Ok(Mesh {
            id: id.into(),
            domain,
            vertices,
            tets,
            boundary_faces,
            boundary_vertices,
            boundary_index,
            h,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    /// Sorted global indices of boundary vertices.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    /// Position of a vertex in [`Mesh::boundary_vertices`], if it is on the boundary.
    pub fn boundary_index(&self, v: usize) -> Option<usize> {
        self.boundary_index[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_index[v].is_some()
    }

    /// Interior vertices in increasing order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|v| !self.is_boundary(*v)).collect()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_vertices.len()
    }

    /// Longest edge.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.tet_points(t);
        let s = p.iter().fold([0.0; 3], |acc, q| vec3::add(&acc, q));
        vec3::scale(&s, 0.25)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    /// Boundary-vertex coordinates in boundary order.
    pub fn boundary_points(&self) -> Vec<Point> {
        self.boundary_vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    /// Side of the square made of two mean boundary triangles (`1/m` on the cube).
    pub fn boundary_cell_size(&self) -> f64 {
        let total: f64 = self
            .boundary_faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.vertices.map(|v| self.vertices[v]);
                0.5 * vec3::norm(&vec3::cross(&vec3::sub(&b, &a), &vec3::sub(&c, &a)))
            })
            .sum();
        (2.0 * total / self.boundary_faces.len() as f64).sqrt()
    }
}

const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

fn face_of(tet: &[usize; 4], f: usize) -> [usize; 3] {
    FACES[f].map(|i| tet[i])
}

fn sorted_face(tet: &[usize; 4], f: usize) -> [usize; 3] {
    let mut face = face_of(tet, f);
    face.sort_unstable();
    face
}

/// The six axis permutations of a Kuhn (Freudenthal) cell split.
const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Structured grid on `[lo, hi]^3` with `m` cells per axis, each cell split
/// into six tets along a main diagonal. With `mirrored`, the diagonal of each
/// cell points away from the grid center so the split is symmetric under
/// coordinate reflections.
fn kuhn_grid(m: usize, lo: f64, hi: f64, mirrored: bool) -> (Vec<Point>, Vec<[usize; 4]>) {
    let n = m + 1;
    let step = (hi - lo) / m as f64;
    let coord = |i: usize| if i == m { hi } else { lo + i as f64 * step };
    let mut vertices = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                vertices.push([coord(i), coord(j), coord(k)]);
            }
        }
    }
    let index = |i: usize, j: usize, k: usize| i + n * (j + n * k);

    let mut tets = Vec::with_capacity(6 * m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let cell = [i, j, k];
                // start corner bits: 1 means the upper corner along that axis
                let start: [usize; 3] = if mirrored {
                    cell.map(|c| usize::from(2 * c + 1 < m))
                } else {
                    [0, 0, 0]
                };
                for perm in PERMUTATIONS {
                    let mut bits = start;
                    let mut tet = [0usize; 4];
                    tet[0] = index(i + bits[0], j + bits[1], k + bits[2]);
                    for (s, &axis) in perm.iter().enumerate() {
                        bits[axis] ^= 1;
                        tet[s + 1] = index(i + bits[0], j + bits[1], k + bits[2]);
                    }
                    let vol = signed_volume(&tet.map(|v| vertices[v]));
                    if vol < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    (vertices, tets)
}

/// Structured mesh of the unit cube with `m` cells per axis (`6 m^3` tets).
pub fn build_cube_mesh(m: usize) -> Result<Mesh> {
    if m < 2 {
        return Err(LabError::InvalidResolution { what: "cube subdivisions", value: m as i64 });
    }
    let (vertices, tets) = kuhn_grid(m, 0.0, 1.0, false);
    Mesh::from_parts(format!("cube-m{m}"), Domain::Cube, vertices, tets)
}

/// Cells per axis of the underlying cube grid for a ball refinement level.
pub fn ball_subdivisions(level: usize) -> usize {
    4 * level
}

/// Unit-ball mesh: a mirrored Kuhn grid on `[-1,1]^3` pushed radially onto
/// the ball by `x -> x |x|_inf / |x|_2`, which maps the cube surface onto the
/// unit sphere. `level` sets `4 * level` cells per axis.
pub fn build_ball_mesh(level: usize) -> Result<Mesh> {
    if level < 1 {
        return Err(LabError::InvalidResolution { what: "ball level", value: level as i64 });
    }
    let m = ball_subdivisions(level);
    let (cube, tets) = kuhn_grid(m, -1.0, 1.0, true);
    let vertices = cube
        .iter()
        .map(|c| {
            let inf = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if inf == 0.0 {
                return *c;
            }
            let r = vec3::norm(c);
            if inf == 1.0 {
                vec3::scale(c, 1.0 / r)
            } else {
                vec3::scale(c, inf / r)
            }
        })
        .collect();
    Mesh::from_parts(format!("ball-l{level}"), Domain::Ball, vertices, tets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts_and_volume() {
        let mesh = build_cube_mesh(2).unwrap();
        assert_eq!(mesh.n_vertices(), 27);
        assert_eq!(mesh.tets().len(), 48);
        assert_eq!(mesh.n_boundary(), 26);
        for &v in mesh.boundary_vertices() {
            let p = mesh.vertices()[v];
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            let min = p.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max == 1.0 || min == 0.0);
        }
        let mesh = build_cube_mesh(4).unwrap();
        assert!((mesh.total_volume() - 1.0).abs() < 1e-12);
        assert!((mesh.h() - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn cube_h_halves() {
        let h4 = build_cube_mesh(4).unwrap().h();
        let h8 = build_cube_mesh(8).unwrap().h();
        assert_eq!(h4, 2.0 * h8);
    }

    #[test]
    fn invalid_resolution() {
        assert!(matches!(build_cube_mesh(1), Err(LabError::InvalidResolution { .. })));
        assert!(matches!(build_ball_mesh(0), Err(LabError::InvalidResolution { .. })));
    }

    #[test]
    fn boundary_faces_are_owned_once_with_unit_outward_normals() {
        for mesh in [build_cube_mesh(3).unwrap(), build_ball_mesh(1).unwrap()] {
            let mut owners: HashMap<[usize; 3], usize> = HashMap::new();
            for tet in mesh.tets() {
                for f in 0..4 {
                    *owners.entry(sorted_face(tet, f)).or_insert(0) += 1;
                }
            }
            for face in mesh.boundary_faces() {
                let mut key = face.vertices;
                key.sort_unstable();
                assert_eq!(owners[&key], 1);
                assert!((vec3::norm(&face.normal) - 1.0).abs() < 1e-12);
                let c = mesh.centroid(face.tet);
                let a = mesh.vertices()[face.vertices[0]];
                assert!(vec3::dot(&face.normal, &vec3::sub(&a, &c)) > 0.0);
            }
        }
    }

    #[test]
    fn cube_boundary_normals_are_axis_aligned() {
        let mesh = build_cube_mesh(3).unwrap();
        for face in mesh.boundary_faces() {
            let ones = face.normal.iter().filter(|c| (c.abs() - 1.0).abs() < 1e-12).count();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn ball_boundary_on_sphere_and_positive_tets() {
        for level in 1..=3 {
            let mesh = build_ball_mesh(level).unwrap();
            for &v in mesh.boundary_vertices() {
                assert!((vec3::norm(&mesh.vertices()[v]) - 1.0).abs() < 1e-12);
            }
            for t in 0..mesh.tets().len() {
                assert!(mesh.tet_volume(t) > 0.0);
            }
        }
    }

    #[test]
    fn ball_volume_increases_towards_sphere_volume() {
        let exact = 4.0 * std::f64::consts::PI / 3.0;
        let vols: Vec<f64> = (1..=4).map(|l| build_ball_mesh(l).unwrap().total_volume()).collect();
        for w in vols.windows(2) {
            assert!(w[0] < w[1], "{vols:?}");
        }
        assert!(vols.iter().all(|v| *v < exact));
        assert!((exact - vols[3]) / exact < 0.02, "{vols:?}");
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_ball_mesh(2).unwrap();
        let b = build_ball_mesh(2).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.tets(), b.tets());
    }
}
