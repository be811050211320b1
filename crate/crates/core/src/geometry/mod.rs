//! Model domains, their tetrahedral meshes and boundary geometry.

mod domain;
pub mod io;
mod mesh;

pub use domain::{Domain, Probe, Projection, BALL_COLLAR, CONE_HALF_ANGLE, CONE_RADIUS_CAP};
pub use mesh::{ball_subdivisions, build_ball_mesh, build_cube_mesh, signed_volume, BoundaryFace, Mesh};
