//! The dual functional `J_ε(p_f) = F*(L_T* p_f) − ⟨ỹ_T, p_f⟩ + ε‖p_f‖` on a
//! time grid, its minimization, and the exact-reachability constant c*.
//!
//! `F*(q) = ½ Σ_i w σ²(q_i)` is the midpoint discretization of
//! `½∫σ²(q(t)) dt`. On a finite grid J_ε is convex and piecewise smooth: it
//! has a kink wherever some node's adjoint value crosses sing(𝒰_r). The
//! solver treats nodes that sit close to such a crossing explicitly (see
//! [`model`]) so that both the stationarity test and the reconstructed
//! control use a valid element of the subdifferential.

mod cstar;
mod model;
mod solver;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::DualError;
use crate::lti::{GridPropagator, LtiSystem, TimeGrid};
use crate::sets::{ConstraintSet, Extended};

pub use model::{FaceNode, Linearization};

/// A reachability question `y₀ → B̄(y_f, ε)` in time T on a fixed grid.
#[derive(Debug, Clone)]
pub struct ReachabilityProblem {
    sys: LtiSystem,
    set: ConstraintSet,
    y0: DVector<f64>,
    yf: DVector<f64>,
    eps: f64,
    grid: TimeGrid,
    ytilde: DVector<f64>,
    propagator: GridPropagator,
}

impl ReachabilityProblem {
    pub fn new(
        sys: LtiSystem,
        set: ConstraintSet,
        y0: DVector<f64>,
        yf: DVector<f64>,
        eps: f64,
        grid: TimeGrid,
    ) -> Result<Self, DualError> {
        let n = sys.states();
        if set.dim() != sys.inputs() {
            return Err(DualError::SetDimension {
                set: set.dim(),
                inputs: sys.inputs(),
            });
        }
        if y0.len() != n || yf.len() != n {
            return Err(DualError::InvalidProblem("y0 and yf must have the state dimension"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(DualError::InvalidProblem("eps must be a nonnegative real"));
        }
        if y0.iter().chain(yf.iter()).any(|x| !x.is_finite()) {
            return Err(DualError::InvalidProblem("non-finite entry in y0 or yf"));
        }
        set.validate()?;
        let ytilde = &yf - sys.semigroup(grid.horizon()) * &y0;
        let propagator = GridPropagator::new(&sys, grid);
        Ok(ReachabilityProblem {
            sys,
            set,
            y0,
            yf,
            eps,
            grid,
            ytilde,
            propagator,
        })
    }

    /// Same problem with a different target radius.
    pub fn with_eps(&self, eps: f64) -> Result<Self, DualError> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(DualError::InvalidProblem("eps must be a nonnegative real"));
        }
        let mut out = self.clone();
        out.eps = eps;
        Ok(out)
    }

    pub fn system(&self) -> &LtiSystem {
        &self.sys
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn yf(&self) -> &DVector<f64> {
        &self.yf
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// `ỹ_T = y_f − e^{TA} y₀`.
    pub fn ytilde(&self) -> &DVector<f64> {
        &self.ytilde
    }

    pub fn propagator(&self) -> &GridPropagator {
        &self.propagator
    }

    /// Adjoint samples `q_i = (L_T* p_f)(t_i)` expressed in the control
    /// space's own inner product.
    pub fn adjoint(&self, p_f: &DVector<f64>) -> Vec<DVector<f64>> {
        let scale = 1.0 / self.set.metric_weight();
        self.propagator.gains().iter().map(|g| g.tr_mul(p_f) * scale).collect()
    }

    /// `F*(L_T* p_f) = ½ Σ w σ²(q_i)`.
    pub fn f_star(&self, p_f: &DVector<f64>) -> f64 {
        let w = self.grid.weight();
        self.adjoint(p_f)
            .iter()
            .map(|q| {
                let s = self.set.support(q.as_slice()).unwrap_or(0.0);
                0.5 * w * s * s
            })
            .sum()
    }

    pub fn eval_j(&self, p_f: &DVector<f64>) -> f64 {
        self.f_star(p_f) - self.ytilde.dot(p_f) + self.eps * p_f.norm()
    }

    /// Subgradient selection `L_T u_sel − ỹ_T + ε p_f/‖p_f‖` with
    /// `u_sel(t_i) = σ(q_i)·v_i`, `v_i` the face representative. The ε-term
    /// is omitted at `p_f = 0`.
    pub fn subgrad_j(&self, p_f: &DVector<f64>) -> DVector<f64> {
        let lin = self.linearize(p_f, 0.0);
        let mut g = lin.grad_f_star - &self.ytilde;
        let n = p_f.norm();
        if n > 0.0 {
            g += p_f * (self.eps / n);
        }
        g
    }

    /// Premise of the cone condition: `σ(q_i) ≤ tol·‖p_f‖` at every node.
    pub fn check_cone_condition(&self, p_f: &DVector<f64>, tol: f64) -> ConeVerdict {
        let smax = self
            .adjoint(p_f)
            .iter()
            .map(|q| self.set.support(q.as_slice()).unwrap_or(0.0))
            .fold(0.0, f64::max);
        if smax > tol * p_f.norm() {
            ConeVerdict::NotApplicable
        } else if self.ytilde.dot(p_f) > tol {
            ConeVerdict::Violated
        } else {
            ConeVerdict::Satisfied
        }
    }
}

/// Options for [`ReachabilityProblem::minimize_j`] and
/// [`ReachabilityProblem::estimate_c_star`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub n_restarts: usize,
    pub divergence_norm: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 5000,
            grad_tol: 1e-8,
            n_restarts: 4,
            divergence_norm: 1e8,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), DualError> {
        if self.max_iter < 1 {
            return Err(DualError::InvalidOptions("max_iter must be at least 1"));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(DualError::InvalidOptions("grad_tol must be positive"));
        }
        if self.divergence_norm.is_nan() || self.divergence_norm <= 0.0 {
            return Err(DualError::InvalidOptions("divergence_norm must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualStatus {
    Converged,
    /// ‖p_f‖ exceeded the divergence threshold while J kept decreasing:
    /// the reachability condition fails.
    Diverging {
        norm_trace: Vec<f64>,
    },
    MaxIter,
}

impl DualStatus {
    pub fn label(&self) -> &'static str {
        match self {
            DualStatus::Converged => "converged",
            DualStatus::Diverging { .. } => "diverging",
            DualStatus::MaxIter => "max_iter",
        }
    }
}

/// Convex combination of near-optimal extreme points at a node sitting on a
/// kink of J: the control there is `σ(q_i)·Σ_k weights_k·vertices_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMix {
    pub node: usize,
    pub vertices: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl NodeMix {
    pub fn combination(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.first().map_or(0, Vec::len)];
        for (v, w) in self.vertices.iter().zip(&self.weights) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub start_norm: f64,
    pub status: String,
    pub j_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub p_f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub p_f_star: DVector<f64>,
    pub j_value: f64,
    /// Norm of the minimal-norm subgradient found at `p_f_star`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: DualStatus,
    pub f_star_value: f64,
    pub selection: Vec<NodeMix>,
    /// One entry per start point, in start order.
    pub runs: Vec<RunSummary>,
}

impl DualSolution {
    pub fn is_converged(&self) -> bool {
        self.status == DualStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeVerdict {
    Satisfied,
    Violated,
    NotApplicable,
}

/// Estimate of `c* = sup ⟨ỹ_T, p⟩ / F*(L_T* p)^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CStarEstimate {
    pub value: Extended,
    /// Heuristic: a unit vector with sphere-stationarity below tolerance was
    /// located and F* is bounded away from zero there.
    pub attained: bool,
    pub maximizer: Option<DVector<f64>>,
    pub iterations: usize,
}
