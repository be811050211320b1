//! P1 finite elements for `div(σA∇u) = 0` and `−Δv + qv = 0`.

mod assembly;
mod conductivity;
mod solve;

pub use assembly::{
    assemble_forms, assemble_mass, assemble_stiffness, assemble_stiffness_with, assemble_weighted_mass, elements,
    tet_energies, Forms, P1Element,
};
pub use conductivity::{fd_gradient, fd_laplacian, Conductivity, Family, MatrixField, ScalarField, FD_STEP};
pub use solve::{
    boundary_trace, energy, h1_norm, schrodinger_matrix, solve_dirichlet, solve_schrodinger, unit_forms,
    DirichletSolver, Field, SchrodingerSolver, RESONANCE_THRESHOLD,
};
