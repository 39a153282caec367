//! Conforming P1 finite elements on dyadic meshes of `(0, 1)`.

mod function;
mod mesh;
mod operators;
mod tridiag;

pub use function::FeFunction;
pub use mesh::{
    subspace, subspace_ref, superspace, superspace_ref, FeSpace, SpaceHierarchy, SpaceRef,
    DEFAULT_MAX_DEPTH,
};
pub use operators::{
    check_alignment, discrete_elliptic_apply, discrete_elliptic_solve, l2_project, l2_project_fe,
    l2_project_fn, load_fe, load_fn, ritz_project, ritz_project_fn, stiffness_load_fe,
    SpatialOperators,
};
pub use tridiag::{Ldl, Tridiagonal};
