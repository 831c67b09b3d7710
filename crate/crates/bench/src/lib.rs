//! Fixed problem instances shared by the benchmarks.

use conereach::{ConstraintSet, LtiSystem, ReachabilityProblem, TimeGrid};
use nalgebra::{dmatrix, dvector};

/// The 3-state toy system with the half-disk/half-diamond set, steering
/// `(1,0,0)` to `(0,1,0)` in unit time.
pub fn toy_problem(grid_n: usize) -> ReachabilityProblem {
    let a = dmatrix![1.0, 2.0, 0.0; 1.0, -1.0, 2.0; 1.0, 1.0, -1.0];
    let b = dmatrix![1.0, 0.0; -1.0, 1.0; 0.0, 0.0];
    let sys = LtiSystem::new(a, b).expect("valid toy system");
    ReachabilityProblem::new(
        sys,
        ConstraintSet::toy_half_mix(),
        dvector![1.0, 0.0, 0.0],
        dvector![0.0, 1.0, 0.0],
        0.0,
        TimeGrid::new(1.0, grid_n).expect("valid grid"),
    )
    .expect("consistent toy problem")
}
