//! Ascent on the 0-homogeneous ratio `R(q) = ⟨ỹ, q⟩ / F*(q)^{1/2}`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::solver::random_unit;
use super::{CStarEstimate, ReachabilityProblem, SolverOptions};
use crate::error::DualError;
use crate::sets::Extended;

const ARMIJO: f64 = 1e-4;
const GAP: f64 = 1e-4;
/// Relative stationarity on the sphere below which the sup counts as attained.
const STATIONARY: f64 = 1e-6;

enum Ascent {
    Unbounded(DVector<f64>, usize),
    Finite {
        q: DVector<f64>,
        value: f64,
        stationary: bool,
        iterations: usize,
    },
}

impl ReachabilityProblem {
    /// Estimate c* by projected ascent from `ỹ/‖ỹ‖` and `n_restarts` random
    /// unit vectors (seeded by `opts.seed`). Returns `+∞` when a direction
    /// with `F* = 0` and `⟨ỹ, q⟩ > 0` is found or the ratio exceeds
    /// `divergence_norm`.
    pub fn estimate_c_star(&self, opts: &SolverOptions) -> Result<CStarEstimate, DualError> {
        opts.validate()?;
        let yt = self.ytilde();
        let yn = yt.norm();
        if yn == 0.0 {
            return Ok(CStarEstimate {
                value: Extended::Finite(0.0),
                attained: true,
                maximizer: None,
                iterations: 0,
            });
        }
        let n = yt.len();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut starts = vec![yt / yn];
        for _ in 0..opts.n_restarts {
            starts.push(random_unit(&mut rng, n));
        }
        let mut best: Option<(f64, DVector<f64>, bool)> = None;
        let mut total = 0;
        for q0 in starts {
            match self.ascend(q0, opts) {
                Ascent::Unbounded(q, it) => {
                    return Ok(CStarEstimate {
                        value: Extended::Infinite,
                        attained: false,
                        maximizer: Some(q),
                        iterations: total + it,
                    });
                }
                Ascent::Finite {
                    q,
                    value,
                    stationary,
                    iterations,
                } => {
                    total += iterations;
                    if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                        best = Some((value, q, stationary));
                    }
                }
            }
        }
        let (value, q, stationary) = best.expect("at least one start");
        Ok(CStarEstimate {
            value: Extended::Finite(value.max(0.0)),
            attained: stationary,
            maximizer: Some(q),
            iterations: total,
        })
    }

    fn ratio(&self, q: &DVector<f64>) -> (f64, f64) {
        (self.ytilde().dot(q), self.f_star(q))
    }

    fn ascend(&self, q0: DVector<f64>, opts: &SolverOptions) -> Ascent {
        let yt = self.ytilde();
        let mut q = q0;
        let mut prev: Option<(DVector<f64>, DVector<f64>, f64)> = None;
        let mut iterations = 0;
        let mut stationary = false;
        let mut value;
        loop {
            let lin = self.linearize(&q, GAP);
            let (a, f) = (yt.dot(&q), lin.f_star);
            if f <= 0.0 {
                if a > 0.0 {
                    return Ascent::Unbounded(q, iterations);
                }
                value = 0.0;
                break;
            }
            let sf = f.sqrt();
            value = a / sf;
            if value > opts.divergence_norm {
                return Ascent::Unbounded(q, iterations);
            }
            if iterations >= opts.max_iter {
                break;
            }
            iterations += 1;
            // Descent direction for −R.
            let k = a / (2.0 * f * sf);
            let c = -yt / sf + &lin.grad_f_star * k;
            let g = self.min_norm_point(&lin, &c, k.max(0.0)).point;
            let gn = g.norm();
            if gn <= STATIONARY * value.abs().max(f64::MIN_POSITIVE) {
                stationary = true;
                break;
            }
            let mut alpha = match &prev {
                Some((sq, sg, ap)) => {
                    let s = &q - sq;
                    let y = &g - sg;
                    let sy = s.dot(&y);
                    if sy > 0.0 {
                        (s.norm_squared() / sy).min(10.0 * ap)
                    } else {
                        10.0 * ap
                    }
                }
                None => 0.25 / gn,
            };
            let mut accepted = None;
            while alpha * gn > 1e-15 {
                let cand = &q - &g * alpha;
                let cn = cand.norm();
                if cn > 0.0 {
                    let cand = cand / cn;
                    let (ac, fc) = self.ratio(&cand);
                    if fc <= 0.0 && ac > 0.0 {
                        return Ascent::Unbounded(cand, iterations);
                    }
                    if fc > 0.0 && ac / fc.sqrt() >= value + ARMIJO * alpha * gn * gn {
                        accepted = Some(cand);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            match accepted {
                Some(cand) => {
                    prev = Some((q, g, alpha));
                    q = cand;
                }
                None => break,
            }
        }
        Ascent::Finite {
            q,
            value,
            stationary,
            iterations,
        }
    }
}
