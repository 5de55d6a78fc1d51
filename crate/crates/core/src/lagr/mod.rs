//! Sampled Lagrangian submanifolds, lifts of exact paths, and the velocity one-form.

mod grid;
mod io;
mod mesh;
mod oneform;

pub use grid::{ModelGrid, ModelTag, MIN_SAMPLES_PER_CIRCLE};
pub use mesh::{AssociatedFunction, LagrangianMesh, Normalization, PathLift, DEFAULT_TOL_LAG};
pub use oneform::{
    check_consistency, default_period_tolerance, edge_integrals, exactness_periods, node_velocities,
    recover_h_from_alpha, velocity_one_form, ConsistencyReport, OneFormSamples,
};

use rayon::prelude::*;

use crate::flow::HamiltonianSpec;
use crate::scalar::Scalar;

/// `h(t_i, node) = H(t_i, ι_{t_i}(node))`.
pub fn associated_function_from_h<S: Scalar>(lift: &PathLift<S>, h: &HamiltonianSpec<S>) -> AssociatedFunction<S> {
    let values = lift
        .tgrid()
        .par_iter()
        .zip(lift.meshes())
        .map(|(&t, mesh)| mesh.images().iter().map(|p| h.eval(t, &p.coords)).collect())
        .collect();
    AssociatedFunction::raw(values)
}
