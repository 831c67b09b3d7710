use conereach::lti::simulate_forward;
use conereach::synth::{reconstruct_control, verify};
use conereach::{ConstraintSet, Extended, LtiSystem, ReachabilityProblem, SolverOptions, TimeGrid};
use nalgebra::{dmatrix, dvector};

fn toy() -> LtiSystem {
    LtiSystem::new(
        dmatrix![1.0, 2.0, 0.0; 1.0, -1.0, 2.0; 1.0, 1.0, -1.0],
        dmatrix![1.0, 0.0; -1.0, 1.0; 0.0, 0.0],
    )
    .unwrap()
}

fn prob(set: ConstraintSet, eps: f64, n: usize) -> ReachabilityProblem {
    ReachabilityProblem::new(
        toy(),
        set,
        dvector![1.0, 0.0, 0.0],
        dvector![0.0, 1.0, 0.0],
        eps,
        TimeGrid::new(1.0, n).unwrap(),
    )
    .unwrap()
}

#[test]
fn saddle_point_amplitude_and_boundary_laws() {
    for set in [ConstraintSet::toy_half_mix(), ConstraintSet::euclidean_ball(2).unwrap()] {
        for eps in [0.0, 0.05, 0.3] {
            let p = prob(set.clone(), eps, 1000);
            let sol = p.minimize_j(&SolverOptions::default()).unwrap();
            assert!(sol.is_converged());
            let ctrl = reconstruct_control(&p, &sol).unwrap();
            let rep = verify(&p, &ctrl, &sol);
            assert!(rep.eps_satisfied, "{:?} eps {eps}: {rep:?}", set.variant);
            assert!(rep.duality_gap_rel <= 1e-4, "{rep:?}");
            if eps > 0.0 {
                assert!((rep.terminal_error - eps).abs() <= rep.allowance, "{rep:?}");
            }
            for i in 0..ctrl.len() {
                let m = ctrl.amplitude[i];
                if ctrl.singular_flags[i] || m == 0.0 {
                    continue;
                }
                let Extended::Finite(j) = set.gauge(ctrl.u[i].as_slice()).unwrap() else {
                    panic!("infinite gauge at node {i}");
                };
                assert!((j - m).abs() <= 1e-8 * m, "node {i}: gauge {j} vs M {m}");
            }
        }
    }
}

/// The verification path reuses the midpoint rule, so refinement is measured
/// on the continuous control law `u(t) = q(t)` (ball set) driven by each
/// coarse p_f and integrated on a much finer grid.
#[test]
fn terminal_error_is_second_order_in_the_grid() {
    let fine = prob(ConstraintSet::euclidean_ball(2).unwrap(), 0.0, 32_000);
    let errors: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let p = prob(ConstraintSet::euclidean_ball(2).unwrap(), 0.0, n);
            let sol = p.minimize_j(&SolverOptions::default()).unwrap();
            let u = fine.adjoint(&sol.p_f_star);
            let y = simulate_forward(fine.system(), fine.y0(), &u, &fine.grid()).unwrap();
            (y - fine.yf()).norm()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..5.0).contains(&ratio), "errors {errors:?}");
    }
}
