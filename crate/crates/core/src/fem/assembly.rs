use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::fem::Conductivity;
use crate::geometry::Mesh;
use crate::linalg::CsrMatrix;
use crate::vec3::{self, Mat3, Point};

/// Gradients of the four barycentric coordinates of a tet and its volume.
#[derive(Debug, Clone, Copy)]
pub struct P1Element {
    pub volume: f64,
    pub grads: [Point; 4],
    pub centroid: Point,
}

impl P1Element {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self> {
        let p = mesh.tet_points(t);
        let volume = crate::geometry::signed_volume(&p);
        if !(volume > 0.0) {
            return Err(LabError::DegenerateMesh { tet: t, volume });
        }
        // Rows of J^{-1} with J = [p1-p0 | p2-p0 | p3-p0].
        let e = [vec3::sub(&p[1], &p[0]), vec3::sub(&p[2], &p[0]), vec3::sub(&p[3], &p[0])];
        let jac = [[e[0][0], e[1][0], e[2][0]], [e[0][1], e[1][1], e[2][1]], [e[0][2], e[1][2], e[2][2]]];
        let inv = vec3::inverse(&jac);
        let g1 = inv[0];
        let g2 = inv[1];
        let g3 = inv[2];
        let g0 = vec3::scale(&vec3::add(&vec3::add(&g1, &g2), &g3), -1.0);
        Ok(P1Element { volume, grads: [g0, g1, g2, g3], centroid: mesh.centroid(t) })
    }

    /// Gradient of the P1 interpolant with nodal values `u` at the tet vertices.
    pub fn gradient(&self, local: [f64; 4]) -> Point {
        let mut g = [0.0; 3];
        for (gi, ui) in self.grads.iter().zip(local) {
            g = vec3::axpy(&g, ui, gi);
        }
        g
    }
}

pub fn elements(mesh: &Mesh) -> Result<Vec<P1Element>> {
    (0..mesh.tets().len()).map(|t| P1Element::new(mesh, t)).collect()
}

/// Stiffness and mass matrices of a conductivity.
#[derive(Debug, Clone)]
pub struct Forms {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

fn local_gradient_form(el: &P1Element, a: Option<&Mat3>) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for i in 0..4 {
        let ag = match a {
            Some(a) => vec3::mat_vec(a, &el.grads[i]),
            None => el.grads[i],
        };
        for j in 0..4 {
            k[i][j] = el.volume * vec3::dot(&ag, &el.grads[j]);
        }
    }
    k
}

fn scatter(mesh: &Mesh, locals: Vec<[[f64; 4]; 4]>) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(16 * locals.len());
    for (tet, k) in mesh.tets().iter().zip(locals) {
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((tet[i], tet[j], k[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

/// Stiffness matrix of `div(c(x) A(x) ∇·)` with `(c, A)` sampled at tet
/// centroids. The scalar factor is applied last, so scaling `c` by a power of
/// two scales the matrix exactly.
pub fn assemble_stiffness_with<F>(mesh: &Mesh, coefficient: F) -> Result<CsrMatrix>
where
    F: Fn(&Point) -> (f64, Option<Mat3>) + Sync,
{
    let els = elements(mesh)?;
    let locals: Vec<[[f64; 4]; 4]> = els
        .par_iter()
        .map(|el| {
            let (c, a) = coefficient(&el.centroid);
            let mut k = local_gradient_form(el, a.as_ref());
            k.iter_mut().flatten().for_each(|v| *v *= c);
            k
        })
        .collect();
    Ok(scatter(mesh, locals))
}

pub fn assemble_stiffness(mesh: &Mesh, cond: &Conductivity) -> Result<CsrMatrix> {
    assemble_stiffness_with(mesh, |x| (cond.value(x), cond.matrix().map(|m| m.at(x))))
}

/// Mass matrix weighted by `w` sampled at tet centroids.
pub fn assemble_weighted_mass<F>(mesh: &Mesh, w: F) -> Result<CsrMatrix>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let els = elements(mesh)?;
    let locals: Vec<[[f64; 4]; 4]> = els
        .par_iter()
        .map(|el| {
            let c = el.volume / 20.0 * w(&el.centroid);
            let mut m = [[c; 4]; 4];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 2.0 * c;
            }
            m
        })
        .collect();
    Ok(scatter(mesh, locals))
}

pub fn assemble_mass(mesh: &Mesh) -> Result<CsrMatrix> {
    assemble_weighted_mass(mesh, |_| 1.0)
}

pub fn assemble_forms(mesh: &Mesh, cond: &Conductivity) -> Result<Forms> {
    Ok(Forms { stiffness: assemble_stiffness(mesh, cond)?, mass: assemble_mass(mesh)? })
}

/// Per-tet energy `vol·c·A∇u·∇v` of the conductivity form.
pub fn tet_energies(mesh: &Mesh, cond: &Conductivity, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let els = elements(mesh)?;
    Ok(els
        .iter()
        .zip(mesh.tets())
        .map(|(el, tet)| {
            let gu = el.gradient(tet.map(|i| u[i]));
            let gv = el.gradient(tet.map(|i| v[i]));
            let agu = vec3::mat_vec(&cond.matrix_at(&el.centroid), &gu);
            el.volume * cond.value(&el.centroid) * vec3::dot(&agu, &gv)
        })
        .collect())
}
