//! Control reconstruction `u(t_i) = σ(q_i)·v_i` from a converged dual
//! solution, and verification by forward simulation.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::dual::{DualSolution, NodeMix, ReachabilityProblem};
use crate::error::SynthError;
use crate::lti::{simulate_forward, TimeGrid};
use crate::sets::{Extended, FaceStatus};

/// Tolerance used by [`extremality_check`] for membership in the original cone.
pub const CONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedControl {
    pub grid: TimeGrid,
    pub u: Vec<DVector<f64>>,
    /// `M(t_i) = σ(q_i)`.
    pub amplitude: Vec<f64>,
    /// Node sits on sing(𝒰_r): either the closed-form test fires or the dual
    /// solver resolved a kink there with a convex combination of vertices.
    pub singular_flags: Vec<bool>,
    pub zero_support_flags: Vec<bool>,
    /// BathtubBox only: index of the cell filled to a fractional level.
    pub fractional_cells: Vec<Option<usize>>,
}

impl SynthesizedControl {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn singular_occupancy(&self) -> f64 {
        let s = self
            .singular_flags
            .iter()
            .zip(&self.zero_support_flags)
            .filter(|(s, z)| **s && !**z)
            .count();
        s as f64 / self.len().max(1) as f64
    }

    /// Fraction of components of `u_i` equal to 0 or to `M(t_i)` within
    /// `tol·M(t_i)`: the two-level structure of bathtub controls.
    pub fn two_level_fraction(&self, i: usize, tol: f64) -> f64 {
        let m = self.amplitude[i];
        let u = &self.u[i];
        if u.is_empty() {
            return 1.0;
        }
        let ok = u
            .iter()
            .filter(|x| x.abs() <= tol * m.max(f64::MIN_POSITIVE) || (**x - m).abs() <= tol * m)
            .count();
        ok as f64 / u.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub terminal_error: f64,
    pub eps: f64,
    pub allowance: f64,
    pub eps_satisfied: bool,
    pub singular_occupancy: f64,
    pub original_cone_violation: f64,
    pub primal_value: f64,
    /// `−J_ε(p_f⋆)`.
    pub dual_value: f64,
    pub duality_gap_rel: f64,
    pub grid_n: usize,
}

/// Default quadrature allowance `1e−4·(1 + ‖y_f‖)`.
pub fn default_allowance(prob: &ReachabilityProblem) -> f64 {
    1e-4 * (1.0 + prob.yf().norm())
}

/// Rebuild the optimal control from `dual`.
pub fn reconstruct_control(prob: &ReachabilityProblem, dual: &DualSolution) -> Result<SynthesizedControl, SynthError> {
    if !dual.is_converged() {
        return Err(SynthError::NotConverged(dual.status.label()));
    }
    if dual.p_f_star.len() != prob.system().states() {
        return Err(SynthError::DimensionMismatch {
            expected: prob.system().states(),
            found: dual.p_f_star.len(),
        });
    }
    let set = prob.set();
    let m = set.dim();
    let mixes: HashMap<usize, &NodeMix> = dual.selection.iter().map(|mx| (mx.node, mx)).collect();
    let q = prob.adjoint(&dual.p_f_star);
    let n = q.len();
    let mut ctrl = SynthesizedControl {
        grid: prob.grid(),
        u: Vec::with_capacity(n),
        amplitude: Vec::with_capacity(n),
        singular_flags: Vec::with_capacity(n),
        zero_support_flags: Vec::with_capacity(n),
        fractional_cells: Vec::with_capacity(n),
    };
    for (i, qi) in q.iter().enumerate() {
        let face = set
            .support_face(qi.as_slice())
            .expect("adjoint samples have the set dimension");
        let pair = set.vertex_pair(qi.as_slice());
        let sigma = set.inner(qi.as_slice(), &pair.vertex).max(0.0);
        if matches!(face.status, FaceStatus::ZeroSupport) || sigma == 0.0 {
            ctrl.u.push(DVector::zeros(m));
            ctrl.amplitude.push(0.0);
            ctrl.singular_flags.push(false);
            ctrl.zero_support_flags.push(true);
            ctrl.fractional_cells.push(None);
            continue;
        }
        let (v, mixed) = match mixes.get(&i) {
            Some(mx) => (mx.combination(), mx.vertices.len() > 1),
            None => (pair.vertex, false),
        };
        let u = DVector::from_vec(v) * sigma;
        let singular = mixed || face.is_singular();
        ctrl.u.push(u);
        ctrl.amplitude.push(sigma);
        ctrl.singular_flags.push(singular);
        ctrl.zero_support_flags.push(false);
        ctrl.fractional_cells.push(pair.fractional_cell);
    }
    Ok(ctrl)
}

/// Fraction of nodes on sing(𝒰_r) outside the polar cone at the dual solution.
pub fn singular_occupancy(prob: &ReachabilityProblem, dual: &DualSolution) -> Result<f64, SynthError> {
    Ok(reconstruct_control(prob, dual)?.singular_occupancy())
}

/// `F(u) = ½ Σ w j(u_i)²`; `+∞` when some sample leaves the cone P_r.
pub fn primal_cost(prob: &ReachabilityProblem, u: &[DVector<f64>]) -> f64 {
    let w = prob.grid().weight();
    let mut total = 0.0;
    for ui in u {
        match prob.set().gauge(ui.as_slice()) {
            Ok(Extended::Finite(j)) => total += 0.5 * w * j * j,
            _ => return f64::INFINITY,
        }
    }
    total
}

/// Fraction of nodes where `u_i` lies in the original cone `cone(𝒰)`.
pub fn extremality_check(prob: &ReachabilityProblem, ctrl: &SynthesizedControl) -> f64 {
    let ok = ctrl.len() - cone_failures(prob, ctrl);
    ok as f64 / ctrl.len().max(1) as f64
}

fn cone_failures(prob: &ReachabilityProblem, ctrl: &SynthesizedControl) -> usize {
    ctrl.u
        .iter()
        .filter(|ui| !prob.set().in_original_cone(ui.as_slice(), CONE_TOL))
        .count()
}

pub fn verify(prob: &ReachabilityProblem, ctrl: &SynthesizedControl, dual: &DualSolution) -> VerificationReport {
    verify_with_allowance(prob, ctrl, dual, default_allowance(prob))
}

pub fn verify_with_allowance(
    prob: &ReachabilityProblem,
    ctrl: &SynthesizedControl,
    dual: &DualSolution,
    allowance: f64,
) -> VerificationReport {
    let y_t = simulate_forward(prob.system(), prob.y0(), &ctrl.u, &prob.grid())
        .expect("control samples match the system and grid");
    let terminal_error = (y_t - prob.yf()).norm();
    let primal_value = primal_cost(prob, &ctrl.u);
    let j = dual.j_value;
    VerificationReport {
        terminal_error,
        eps: prob.eps(),
        allowance,
        eps_satisfied: terminal_error <= prob.eps() + allowance,
        singular_occupancy: ctrl.singular_occupancy(),
        original_cone_violation: cone_failures(prob, ctrl) as f64 / ctrl.len().max(1) as f64,
        primal_value,
        dual_value: -j,
        duality_gap_rel: (primal_value + j).abs() / (1.0 + primal_value.abs()),
        grid_n: prob.grid().len(),
    }
}
