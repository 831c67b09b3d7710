//! Independent reference solutions. Nothing here touches the dual solver or
//! the control reconstruction: gains are rebuilt with direct matrix
//! exponentials and the primal problem is attacked head-on.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::dual::ReachabilityProblem;
use crate::error::OracleError;
use crate::lti::{expm, LtiSystem, TimeGrid};
use crate::sets::{ConstraintSet, Extended, SetVariant};

pub const MAX_GRID: usize = 512;
pub const MAX_STATE_INPUT: usize = 64;
/// Gramian condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct PrimalOptions {
    pub rho_schedule: Vec<f64>,
    /// Iteration cap per inner solve.
    pub max_iter: usize,
    /// Relative step-length tolerance ending an inner solve.
    pub tol: f64,
    /// Multiplier updates per penalty stage.
    pub max_outer: usize,
    /// Constraint violation, relative to `1 + ‖ỹ_T‖`, ending a stage.
    pub feasibility_tol: f64,
    pub deadline: Option<Instant>,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        PrimalOptions {
            rho_schedule: vec![1e2, 1e4, 1e6],
            max_iter: 20_000,
            tol: 1e-10,
            max_outer: 50,
            feasibility_tol: 1e-8,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalIterate {
    pub u: Vec<DVector<f64>>,
    /// `F(u) = ½ Σ w j(u_i)²`.
    pub objective: f64,
    /// `max(0, ‖L_T u − ỹ_T‖ − ε)`.
    pub feasibility_residual: f64,
    pub iterations: usize,
}

struct Discretization {
    gains: Vec<DMatrix<f64>>,
    weight: f64,
    ytilde: DVector<f64>,
}

fn discretize(sys: &LtiSystem, grid: &TimeGrid, y0: &DVector<f64>, yf: &DVector<f64>) -> Discretization {
    let big_t = grid.horizon();
    let gains = grid
        .nodes()
        .map(|t| expm(sys.a(), big_t - t).expect("square state matrix") * sys.b())
        .collect();
    let ytilde = yf - expm(sys.a(), big_t).expect("square state matrix") * y0;
    Discretization {
        gains,
        weight: grid.weight(),
        ytilde,
    }
}

/// `W = Σ w G_i G_iᵀ` with `G_i = e^{(T−t_i)A}B` on the midpoint grid.
pub fn gramian(sys: &LtiSystem, grid: &TimeGrid) -> DMatrix<f64> {
    let n = sys.states();
    let big_t = grid.horizon();
    let mut w = DMatrix::zeros(n, n);
    for t in grid.nodes() {
        let g = expm(sys.a(), big_t - t).expect("square state matrix") * sys.b();
        w.gemm(grid.weight(), &g, &g.transpose(), 1.0);
    }
    w
}

/// HUM solution `(W⁻¹ỹ_T, ½ỹ_TᵀW⁻¹ỹ_T)` for the Euclidean-ball set.
pub fn hum_closed_form(prob: &ReachabilityProblem) -> Result<(DVector<f64>, f64), OracleError> {
    if !matches!(prob.set().variant, SetVariant::EuclideanBall { .. }) {
        return Err(OracleError::NotEuclidean);
    }
    let sys = prob.system();
    let grid = prob.grid();
    let yt = prob.yf() - expm(sys.a(), grid.horizon()).expect("square state matrix") * prob.y0();
    let n = sys.states();
    if yt.norm() == 0.0 {
        return Ok((DVector::zeros(n), 0.0));
    }
    let w = gramian(sys, &grid);
    let eig = w.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(OracleError::SingularGramian(cond));
    }
    let chol = w.cholesky().ok_or(OracleError::SingularGramian(cond))?;
    let p = chol.solve(&yt);
    let value = 0.5 * yt.dot(&p);
    Ok((p, value))
}

/// Reachable cone of the double integrator under `u ≥ 0`:
/// `{0 < y₁ ≤ T y₂} ∪ {0}`.
pub fn double_integrator_cone(y: &[f64; 2], horizon: f64) -> bool {
    (y[0] == 0.0 && y[1] == 0.0) || (0.0 < y[0] && y[0] <= horizon * y[1])
}

const STALL_RATIO: f64 = 0.99;

/// Minimize `F(u)` subject to `‖L_T u − ỹ_T‖ ≤ ε` over gridded controls.
///
/// For each ρ of the schedule the penalty `ρ·dist(L_T u + w, B̄(ỹ_T, ε))²` is
/// minimized by accelerated proximal gradient with adaptive restart, and the
/// shift w is updated by the method of multipliers until the constraint
/// holds to `feasibility_tol` or the update stalls.
pub fn solve_primal_direct(prob: &ReachabilityProblem, opts: &PrimalOptions) -> Result<PrimalIterate, OracleError> {
    let sys = prob.system();
    let grid = prob.grid();
    let (n, m, big_n) = (sys.states(), sys.inputs(), grid.len());
    if big_n > MAX_GRID {
        return Err(OracleError::ScaleLimit(format!("grid N = {big_n} exceeds {MAX_GRID}")));
    }
    if n * m > MAX_STATE_INPUT {
        return Err(OracleError::ScaleLimit(format!(
            "n·m = {} exceeds {MAX_STATE_INPUT}",
            n * m
        )));
    }
    let set = prob.set();
    let eps = prob.eps();
    let d = discretize(sys, &grid, prob.y0(), prob.yf());
    let zero: Vec<DVector<f64>> = vec![DVector::zeros(m); big_n];
    if d.ytilde.norm() <= eps {
        return Ok(PrimalIterate {
            u: zero,
            objective: 0.0,
            feasibility_residual: 0.0,
            iterations: 0,
        });
    }
    let mut gram = DMatrix::zeros(n, n);
    for g in &d.gains {
        gram.gemm(d.weight, g, &g.transpose(), 1.0);
    }
    let lmax = gram.symmetric_eigen().eigenvalues.max().max(f64::MIN_POSITIVE);
    let feas_tol = opts.feasibility_tol * (1.0 + d.ytilde.norm());
    let ctx = Fista { d: &d, set, eps, opts };
    let mut x = zero;
    let mut iterations = 0;
    let mut w = DVector::zeros(n);
    let mut prev_rho: Option<f64> = None;
    for &rho in &opts.rho_schedule {
        let tau = 1.0 / (2.0 * rho * lmax);
        if let Some(r0) = prev_rho {
            // w is the multiplier scaled by 1/(2ρ).
            w *= r0 / rho;
        }
        prev_rho = Some(rho);
        let mut feasible = false;
        let mut prev_res = f64::INFINITY;
        for _ in 0..opts.max_outer {
            x = ctx.minimize(x, &w, rho, tau, &mut iterations)?;
            let v = ctx.apply(&x) - &d.ytilde + &w;
            let vn = v.norm();
            let w_new = if vn > eps {
                &v * ((vn - eps) / vn)
            } else {
                DVector::zeros(n)
            };
            let change = (&w_new - &w).norm();
            w = w_new;
            let res = ((ctx.apply(&x) - &d.ytilde).norm() - eps).max(0.0);
            if res <= feas_tol {
                feasible = true;
                break;
            }
            // A stalled residual means this ρ cannot close the gap.
            if change <= 1e-14 * (1.0 + w.norm()) || res > STALL_RATIO * prev_res {
                break;
            }
            prev_res = res;
        }
        if feasible {
            break;
        }
    }
    let objective = x
        .iter()
        .map(|ui| match set.gauge(ui.as_slice()) {
            Ok(Extended::Finite(j)) => 0.5 * d.weight * j * j,
            _ => f64::INFINITY,
        })
        .sum();
    let feasibility_residual = ((ctx.apply(&x) - &d.ytilde).norm() - eps).max(0.0);
    Ok(PrimalIterate {
        u: x,
        objective,
        feasibility_residual,
        iterations,
    })
}

struct Fista<'a> {
    d: &'a Discretization,
    set: &'a ConstraintSet,
    eps: f64,
    opts: &'a PrimalOptions,
}

impl Fista<'_> {
    fn apply(&self, u: &[DVector<f64>]) -> DVector<f64> {
        let mut y = DVector::zeros(self.d.ytilde.len());
        for (g, ui) in self.d.gains.iter().zip(u) {
            y.gemv(self.d.weight, g, ui, 1.0);
        }
        y
    }

    fn e_dot(&self, a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>() * self.d.weight
    }

    /// Accelerated proximal gradient on `F(u) + ρ·dist(L u + w, B̄(ỹ, ε))²`.
    fn minimize(
        &self,
        mut x: Vec<DVector<f64>>,
        w: &DVector<f64>,
        rho: f64,
        tau: f64,
        iterations: &mut usize,
    ) -> Result<Vec<DVector<f64>>, OracleError> {
        let mut y = x.clone();
        let mut t_k = 1.0_f64;
        for _ in 0..self.opts.max_iter {
            *iterations += 1;
            if iterations.is_multiple_of(256) {
                if let Some(dl) = self.opts.deadline {
                    if Instant::now() >= dl {
                        return Err(OracleError::Deadline);
                    }
                }
            }
            let r = self.apply(&y) - &self.d.ytilde + w;
            let rn = r.norm();
            let coef = if rn > self.eps {
                2.0 * rho * (rn - self.eps) / rn
            } else {
                0.0
            };
            let x_new: Vec<DVector<f64>> = self
                .d
                .gains
                .iter()
                .zip(&y)
                .map(|(g, yi)| {
                    let z = yi - g.tr_mul(&r) * (tau * coef);
                    prox_half_gauge_sq(self.set, &z, tau)
                })
                .collect();
            let diff: Vec<DVector<f64>> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm = self.e_dot(&diff, &diff).sqrt();
            let x_norm = self.e_dot(&x_new, &x_new).sqrt();
            let momentum: Vec<DVector<f64>> = y.iter().zip(&x_new).map(|(a, b)| a - b).collect();
            if self.e_dot(&momentum, &diff) > 0.0 {
                t_k = 1.0;
                y = x_new.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
                let beta = (t_k - 1.0) / t_next;
                y = x_new.iter().zip(&diff).map(|(a, dd)| a + dd * beta).collect();
                t_k = t_next;
            }
            x = x_new;
            if step_norm <= self.opts.tol * (1.0 + x_norm) {
                break;
            }
        }
        Ok(x)
    }
}

/// Proximal map of `τ·½ j²` (Euclidean metric), by bisection on the
/// amplitude M of `u = M c`, `c ∈ 𝒰_r`.
pub fn prox_half_gauge_sq(set: &ConstraintSet, z: &DVector<f64>, tau: f64) -> DVector<f64> {
    let zs = z.as_slice();
    let sigma = set.support(zs).unwrap_or(0.0) / set.metric_weight();
    if sigma <= 0.0 {
        return DVector::zeros(z.len());
    }
    let dphi = |m: f64| -> f64 {
        let c = project_unit(set, &(z / m));
        let pm = c * m;
        tau * m - (z - &pm).dot(&pm) / m
    };
    let mut hi = match set.gauge(zs) {
        Ok(Extended::Finite(j)) if j > 0.0 => j,
        _ => z.norm() * unit_radius(set) / tau,
    };
    let mut f_hi = dphi(hi);
    while f_hi < 0.0 {
        hi *= 2.0;
        f_hi = dphi(hi);
    }
    // dphi is increasing with dphi(0+) = −σ(z); Illinois regula falsi.
    let (mut lo, mut f_lo) = (0.0, -sigma);
    let mut side = 0;
    let mut m = hi;
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi || f_hi == 0.0 {
            break;
        }
        let mut next = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let f = dphi(next);
        m = next;
        if f < 0.0 {
            lo = next;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = next;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
            if f == 0.0 {
                break;
            }
        }
        if (f / sigma).abs() <= 1e-15 {
            break;
        }
    }
    project_unit(set, &(z / m)) * m
}

fn unit_radius(set: &ConstraintSet) -> f64 {
    match set.variant {
        SetVariant::EuclideanBall { .. } | SetVariant::ToyHalfMix => 1.0,
        SetVariant::KSparseBox { k, .. } => (k as f64).sqrt(),
        SetVariant::BathtubBox { cells, dx, mass } => (mass / dx).min(cells as f64).ceil().sqrt(),
    }
}

/// Euclidean projection onto 𝒰_r.
pub fn project_unit(set: &ConstraintSet, z: &DVector<f64>) -> DVector<f64> {
    match set.variant {
        SetVariant::EuclideanBall { .. } => {
            let n = z.norm();
            if n > 1.0 {
                z / n
            } else {
                z.clone()
            }
        }
        SetVariant::KSparseBox { k, .. } => {
            let clipped = z.map(|x| x.clamp(-1.0, 1.0));
            if clipped.iter().map(|x| x.abs()).sum::<f64>() <= k as f64 {
                return clipped;
            }
            let a: Vec<f64> = z.iter().map(|x| x.abs()).collect();
            let level = clamp_level(&a, k as f64);
            z.map(|x| x.signum() * (x.abs() - level).clamp(0.0, 1.0))
        }
        SetVariant::BathtubBox { cells, dx, mass } => {
            let cap = (mass / dx).min(cells as f64);
            let clipped = z.map(|x| x.clamp(0.0, 1.0));
            if clipped.sum() <= cap {
                return clipped;
            }
            let level = clamp_level(z.as_slice(), cap);
            z.map(|x| (x - level).clamp(0.0, 1.0))
        }
        SetVariant::ToyHalfMix => {
            let a = project_half_disk(z[0], z[1]);
            let b = project_half_diamond(z[0], z[1]);
            let da = (a[0] - z[0]).powi(2) + (a[1] - z[1]).powi(2);
            let db = (b[0] - z[0]).powi(2) + (b[1] - z[1]).powi(2);
            let p = if da <= db { a } else { b };
            DVector::from_column_slice(&p)
        }
    }
}

/// The t ≥ 0 with `Σ clamp(a_j − t, 0, 1) = cap`, given that the sum exceeds
/// `cap` at t = 0. The sum is piecewise linear with kinks at a_j and a_j − 1.
fn clamp_level(a: &[f64], cap: f64) -> f64 {
    let g = |t: f64| a.iter().map(|x| (x - t).clamp(0.0, 1.0)).sum::<f64>();
    let mut kinks: Vec<f64> = a.iter().flat_map(|&x| [x, x - 1.0]).filter(|&t| t > 0.0).collect();
    kinks.sort_by(|x, y| y.total_cmp(x));
    kinks.push(0.0);
    // g(kinks[0]) = 0 ≤ cap; walk down until g crosses cap.
    let (mut t_hi, mut g_hi) = (kinks[0], g(kinks[0]));
    for &t in &kinks[1..] {
        let g_t = g(t);
        if g_t >= cap {
            if g_t == g_hi {
                return t;
            }
            return t + (t_hi - t) * (g_t - cap) / (g_t - g_hi);
        }
        (t_hi, g_hi) = (t, g_t);
    }
    0.0
}

fn project_half_disk(x: f64, y: f64) -> [f64; 2] {
    if x >= 0.0 {
        let n = x.hypot(y);
        if n > 1.0 {
            [x / n, y / n]
        } else {
            [x, y]
        }
    } else {
        [0.0, y.clamp(-1.0, 1.0)]
    }
}

fn project_half_diamond(x: f64, y: f64) -> [f64; 2] {
    if x <= 0.0 && -x + y.abs() <= 1.0 {
        return [x, y];
    }
    let edges = [
        ([0.0, 1.0], [-1.0, 0.0]),
        ([-1.0, 0.0], [0.0, -1.0]),
        ([0.0, -1.0], [0.0, 1.0]),
    ];
    let mut best = [0.0, 0.0];
    let mut best_d = f64::INFINITY;
    for (a, b) in edges {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let t = (((x - a[0]) * dx + (y - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let p = [a[0] + t * dx, a[1] + t * dy];
        let d = (p[0] - x).powi(2) + (p[1] - y).powi(2);
        if d < best_d {
            best_d = d;
            best = p;
        }
    }
    best
}
