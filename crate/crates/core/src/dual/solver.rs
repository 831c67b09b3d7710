//! Descent on J_ε with minimal-norm ε-subgradients.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use std::collections::VecDeque;

use super::model::{Linearization, MinNormPoint};
use super::{DualSolution, DualStatus, NodeMix, ReachabilityProblem, RunSummary, SolverOptions};
use crate::error::DualError;

const ARMIJO: f64 = 1e-4;
const GAP_MIN: f64 = 1e-12;
const GAP_MAX: f64 = 1e-2;
/// Largest kink gap accepted when certifying stationarity.
const GAP_ACCEPT: f64 = 1e-4;
/// Length of the nonmonotone line-search window.
const MEMORY: usize = 10;
const RESTART_SCALES: [f64; 3] = [1.0, 10.0, 100.0];

pub(crate) struct Step {
    pub grad: DVector<f64>,
    pub f_star: f64,
    base: DVector<f64>,
    lin: Linearization,
    mnp: MinNormPoint,
}

impl Step {
    /// Gradient norm, F* and the node selection; with `purify` the weights
    /// are first reduced to a basic solution with few mixed nodes.
    fn finish(self, prob: &ReachabilityProblem, purify: bool) -> (f64, f64, Vec<NodeMix>) {
        let (selection, grad) = prob.node_mixtures(&self.lin, &self.base, 1.0, &self.mnp, purify);
        (grad.norm(), self.f_star, selection)
    }
}

struct Run {
    p: DVector<f64>,
    j: f64,
    grad_norm: f64,
    iterations: usize,
    status: DualStatus,
    f_star: f64,
    selection: Vec<NodeMix>,
    start_norm: f64,
}

impl ReachabilityProblem {
    /// Minimal-norm element of the ε-subdifferential of J at `p` for gap
    /// tolerance `gap_tol`.
    pub(crate) fn min_norm_subgradient(&self, p: &DVector<f64>, gap_tol: f64) -> Step {
        let lin = self.linearize(p, gap_tol);
        let mut base = &lin.grad_f_star - self.ytilde();
        let n = p.norm();
        if n > 0.0 {
            base += p * (self.eps() / n);
        }
        let mnp = self.min_norm_point(&lin, &base, 1.0);
        Step {
            grad: mnp.point.clone(),
            f_star: lin.f_star,
            base,
            lin,
            mnp,
        }
    }

    /// Minimize J_ε from the origin and `n_restarts` random starts.
    ///
    /// Runs are independent and executed in parallel. A diverging run wins
    /// (J is unbounded below), then converged runs, then the rest; within a
    /// class the lowest J is reported, ties broken by the lexicographic order
    /// of p_f, so the result does not depend on thread scheduling.
    pub fn minimize_j(&self, opts: &SolverOptions) -> Result<DualSolution, DualError> {
        opts.validate()?;
        let starts = self.start_points(opts);
        let runs: Vec<Run> = starts.par_iter().map(|p0| self.descend(p0.clone(), opts)).collect();
        let best = runs
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                rank(&a.status)
                    .cmp(&rank(&b.status))
                    .then_with(|| a.j.total_cmp(&b.j))
                    .then_with(|| {
                        a.p.iter()
                            .zip(b.p.iter())
                            .map(|(x, y)| x.total_cmp(y))
                            .find(|o| o.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
            })
            .map(|(i, _)| i)
            .expect("at least one start point");
        let summaries = runs
            .iter()
            .map(|r| RunSummary {
                start_norm: r.start_norm,
                status: r.status.label().to_string(),
                j_value: r.j,
                grad_norm: r.grad_norm,
                iterations: r.iterations,
                p_f: r.p.iter().copied().collect(),
            })
            .collect();
        let iterations = runs.iter().map(|r| r.iterations).sum();
        let r = runs.into_iter().nth(best).unwrap();
        Ok(DualSolution {
            p_f_star: r.p,
            j_value: r.j,
            grad_norm: r.grad_norm,
            iterations,
            status: r.status,
            f_star_value: r.f_star,
            selection: r.selection,
            runs: summaries,
        })
    }

    pub(crate) fn start_points(&self, opts: &SolverOptions) -> Vec<DVector<f64>> {
        let n = self.system().states();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut out = vec![DVector::zeros(n)];
        for r in 0..opts.n_restarts {
            out.push(random_unit(&mut rng, n) * RESTART_SCALES[r % RESTART_SCALES.len()]);
        }
        out
    }

    /// `(F*(p), ⟨ỹ,p⟩ − ε‖p‖)`: J along the ray is `s²·F* − s·slope`.
    fn ray_parts(&self, p: &DVector<f64>) -> (f64, f64) {
        (self.f_star(p), self.ytilde().dot(p) - self.eps() * p.norm())
    }

    fn descend(&self, p0: DVector<f64>, opts: &SolverOptions) -> Run {
        let start_norm = p0.norm();
        let finish = |p: DVector<f64>, j: f64, step: Step, iterations: usize, status: DualStatus| {
            let (grad_norm, f_star, selection) = step.finish(self, matches!(status, DualStatus::Converged));
            Run {
                p,
                j,
                grad_norm,
                iterations,
                status,
                f_star,
                selection,
                start_norm,
            }
        };
        let mut norm_trace = Vec::new();
        let mut p = if start_norm == 0.0 { self.ytilde().clone() } else { p0 };
        // Exact minimization along the ray through p (2-homogeneity of F*).
        let (f, slope) = self.ray_parts(&p);
        let mut j;
        if slope <= 0.0 {
            if start_norm == 0.0 {
                // ‖ỹ‖ ≤ ε: the origin is optimal.
                let z = DVector::zeros(p.len());
                let step = self.min_norm_subgradient(&z, 0.0);
                return finish(z, 0.0, step, 0, DualStatus::Converged);
            }
            j = f - slope;
        } else if f > 0.0 {
            p *= slope / (2.0 * f);
            j = -slope * slope / (4.0 * f);
        } else {
            let pn = p.norm();
            p *= 2.0 * opts.divergence_norm / pn;
            j = f64::NEG_INFINITY;
        }
        let mut gap_tol = GAP_ACCEPT;
        let mut prev: Option<(DVector<f64>, DVector<f64>, f64)> = None;
        let mut recent: VecDeque<f64> = VecDeque::with_capacity(MEMORY);
        let mut iterations = 0;
        loop {
            let step = self.min_norm_subgradient(&p, gap_tol);
            let gn = step.grad.norm();
            let pn = p.norm();
            norm_trace.push(pn);
            if pn > opts.divergence_norm {
                return finish(p, j, step, iterations, DualStatus::Diverging { norm_trace });
            }
            if gn <= opts.grad_tol {
                if gap_tol <= GAP_ACCEPT {
                    return finish(p, j, step, iterations, DualStatus::Converged);
                }
                gap_tol = GAP_ACCEPT;
                prev = None;
                continue;
            }
            if iterations >= opts.max_iter {
                let step = self.min_norm_subgradient(&p, GAP_ACCEPT);
                return finish(p, j, step, iterations, DualStatus::MaxIter);
            }
            iterations += 1;
            let mut alpha = match &prev {
                Some((sp, sg, a_prev)) => {
                    let s = &p - sp;
                    let y = &step.grad - sg;
                    let sy = s.dot(&y);
                    let bb = if sy > 0.0 { s.norm_squared() / sy } else { f64::INFINITY };
                    bb.min(10.0 * a_prev)
                }
                None => {
                    let fg = self.f_star(&step.grad);
                    if fg > 0.0 {
                        gn * gn / (2.0 * fg)
                    } else {
                        1.0
                    }
                }
            };
            if recent.len() == MEMORY {
                recent.pop_front();
            }
            recent.push_back(j);
            let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let floor = 1e-16 * (1.0 + pn) / gn;
            let mut accepted = None;
            while alpha >= floor {
                let cand = &p - &step.grad * alpha;
                let (f, slope) = self.ray_parts(&cand);
                if f - slope <= reference - ARMIJO * alpha * gn * gn {
                    accepted = Some((cand, f, slope));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((mut cand, f, slope)) => {
                    if slope > 0.0 && f == 0.0 {
                        // J is linear and decreasing along this ray.
                        let cn = cand.norm();
                        cand *= 2.0 * opts.divergence_norm / cn;
                        j = f64::NEG_INFINITY;
                    } else if slope > 0.0 {
                        cand *= slope / (2.0 * f);
                        j = -slope * slope / (4.0 * f);
                    } else {
                        j = f - slope;
                    }
                    let moved = (&cand - &p).norm();
                    prev = Some((p, step.grad, alpha));
                    p = cand;
                    gap_tol = (10.0 * moved / p.norm().max(f64::MIN_POSITIVE)).clamp(GAP_MIN, GAP_MAX);
                }
                None => {
                    if gap_tol >= GAP_MAX {
                        let step = self.min_norm_subgradient(&p, GAP_ACCEPT);
                        return finish(p, j, step, iterations, DualStatus::MaxIter);
                    }
                    gap_tol = (gap_tol * 10.0).min(GAP_MAX);
                    prev = None;
                    recent.clear();
                }
            }
        }
    }
}

fn rank(status: &DualStatus) -> u8 {
    match status {
        DualStatus::Diverging { .. } => 0,
        DualStatus::Converged => 1,
        DualStatus::MaxIter => 2,
    }
}

pub(crate) fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}
