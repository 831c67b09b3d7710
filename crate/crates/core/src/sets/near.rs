//! Near-optimal faces: the extreme points of 𝒰_r whose pairing with q is
//! within a given gap of σ(q).

use super::{dot, order_desc, sign_or_one, ConstraintSet, SetVariant};

/// Cardinality constraint `Σ_{j∈idx} |u_j| = slots` (or `≤ slots`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub slots: f64,
    pub exact: bool,
}

/// Polytope of near-maximizers, described so that linear functionals can be
/// minimized over it exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum NearFace {
    /// An explicit list of extreme points.
    Vertices(Vec<Vec<f64>>),
    /// Points of the form `base` outside `idx`; on `idx` the entries are
    /// `signs_j·x_j` with `x_j ∈ [lower, 1]` and, with a budget, `lower = 0`
    /// and `Σ x_j` constrained.
    Cells {
        base: Vec<f64>,
        idx: Vec<usize>,
        signs: Vec<f64>,
        lower: f64,
        budget: Option<Budget>,
    },
}

impl NearFace {
    /// Extreme point of the face minimizing the Euclidean pairing `⟨c, u⟩`.
    /// Ties resolve to the first candidate, so the result is deterministic.
    pub fn minimize(&self, c: &[f64]) -> Vec<f64> {
        match self {
            NearFace::Vertices(list) => list
                .iter()
                .min_by(|a, b| dot(c, a).total_cmp(&dot(c, b)))
                .expect("non-empty face")
                .clone(),
            NearFace::Cells {
                base,
                idx,
                signs,
                lower,
                budget,
            } => {
                let mut u = base.clone();
                let e: Vec<f64> = idx.iter().zip(signs).map(|(&j, s)| c[j] * s).collect();
                match budget {
                    None => {
                        for (k, &j) in idx.iter().enumerate() {
                            u[j] = signs[k] * if e[k] > 0.0 { *lower } else { 1.0 };
                        }
                    }
                    Some(b) => {
                        for &j in idx {
                            u[j] = 0.0;
                        }
                        let mut left = b.slots;
                        for k in order_desc(|k| -e[k], idx.len()) {
                            if left <= 0.0 || (!b.exact && e[k] >= 0.0) {
                                break;
                            }
                            let x = left.min(1.0);
                            u[idx[k]] = signs[k] * x;
                            left -= x;
                        }
                    }
                }
                u
            }
        }
    }

    /// Number of free coordinates or listed points.
    pub fn size(&self) -> usize {
        match self {
            NearFace::Vertices(list) => list.len(),
            NearFace::Cells { idx, .. } => idx.len(),
        }
    }
}

impl ConstraintSet {
    /// Face of extreme points `v` of 𝒰_r with `σ(q) − ⟨q, v⟩ ≲ gap` (set inner
    /// product), or `None` when the maximizer is isolated at that resolution.
    /// The representative vertex of [`ConstraintSet::vertex_pair`] always
    /// belongs to the returned face.
    pub fn near_face(&self, q: &[f64], gap: f64) -> Option<NearFace> {
        match self.variant {
            SetVariant::EuclideanBall { .. } => None,
            SetVariant::ToyHalfMix => {
                if q[0] > 0.0 {
                    return None;
                }
                let candidates = [([0.0, 1.0], q[1]), ([-1.0, 0.0], -q[0]), ([0.0, -1.0], -q[1])];
                let order = order_desc(|i| candidates[i].1, 3);
                let best = candidates[order[0]].1;
                let list: Vec<Vec<f64>> = order
                    .iter()
                    .filter(|&&i| candidates[i].1 >= best - gap)
                    .map(|&i| candidates[i].0.to_vec())
                    .collect();
                (list.len() > 1).then_some(NearFace::Vertices(list))
            }
            SetVariant::KSparseBox { dim, k } => {
                let a: Vec<f64> = q.iter().map(|x| x.abs()).collect();
                let order = order_desc(|i| a[i], dim);
                let signs_of = |idx: &[usize]| idx.iter().map(|&j| sign_or_one(q[j])).collect::<Vec<_>>();
                if k < dim {
                    let (ak, ak1) = (a[order[k - 1]], a[order[k]]);
                    if ak - ak1 > gap {
                        return None;
                    }
                    let (lo, hi) = (ak1 - gap, ak + gap);
                    let idx: Vec<usize> = (0..dim).filter(|&j| a[j] >= lo && a[j] <= hi).collect();
                    let mut base = vec![0.0; dim];
                    let mut fixed = 0usize;
                    for j in 0..dim {
                        if a[j] > hi {
                            base[j] = sign_or_one(q[j]);
                            fixed += 1;
                        }
                    }
                    let signs = signs_of(&idx);
                    Some(NearFace::Cells {
                        base,
                        idx,
                        signs,
                        lower: 0.0,
                        budget: Some(Budget {
                            slots: (k - fixed) as f64,
                            exact: true,
                        }),
                    })
                } else {
                    let idx: Vec<usize> = (0..dim).filter(|&j| 2.0 * a[j] <= gap).collect();
                    if idx.is_empty() {
                        return None;
                    }
                    let base = q.iter().map(|x| sign_or_one(*x)).collect();
                    let signs = signs_of(&idx);
                    Some(NearFace::Cells {
                        base,
                        idx,
                        signs,
                        lower: -1.0,
                        budget: None,
                    })
                }
            }
            SetVariant::BathtubBox { cells, dx, .. } => {
                let pair = self.bathtub_vertices(q);
                let v = &pair.vertex;
                let capacity = self.bathtub_capacity();
                let used: f64 = v.iter().sum();
                let delta = gap / dx;
                // Price of mass: zero when the budget is slack.
                let level = if capacity - used > 1e-12 {
                    0.0
                } else if let Some(f) = pair.fractional_cell {
                    q[f]
                } else {
                    let boundary = (0..cells)
                        .filter(|&j| v[j] == 0.0)
                        .map(|j| q[j])
                        .fold(f64::NEG_INFINITY, f64::max);
                    boundary.max(0.0)
                };
                let idx: Vec<usize> = (0..cells).filter(|&j| (q[j] - level).abs() <= delta).collect();
                let mut base = vec![0.0; cells];
                let mut fixed = 0usize;
                for j in 0..cells {
                    if q[j] > level + delta {
                        base[j] = 1.0;
                        fixed += 1;
                    }
                }
                let exact = level > delta;
                let slots = (capacity - fixed as f64).clamp(0.0, idx.len() as f64);
                let trivial = idx.is_empty() || (exact && (slots == 0.0 || slots == idx.len() as f64));
                if trivial {
                    return None;
                }
                Some(NearFace::Cells {
                    base,
                    idx: idx.clone(),
                    signs: vec![1.0; idx.len()],
                    lower: 0.0,
                    budget: Some(Budget { slots, exact }),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contains(face: &NearFace, u: &[f64]) -> bool {
        match face {
            NearFace::Vertices(list) => list.iter().any(|v| v == u),
            NearFace::Cells {
                base,
                idx,
                signs,
                lower,
                budget,
            } => {
                let outside_ok = (0..base.len()).filter(|j| !idx.contains(j)).all(|j| base[j] == u[j]);
                let x: Vec<f64> = idx.iter().zip(signs).map(|(&j, s)| u[j] * s).collect();
                let box_ok = x.iter().all(|v| *v >= *lower - 1e-15 && *v <= 1.0 + 1e-15);
                let budget_ok = budget.is_none_or(|b| {
                    let s: f64 = x.iter().sum();
                    if b.exact {
                        (s - b.slots).abs() < 1e-12
                    } else {
                        s <= b.slots + 1e-12
                    }
                });
                outside_ok && box_ok && budget_ok
            }
        }
    }

    #[test]
    fn toy_three_way_tie() {
        let set = ConstraintSet::toy_half_mix();
        let face = set.near_face(&[-1.0, 1.0], 1e-9).unwrap();
        assert_eq!(face.size(), 2);
        assert_eq!(face.minimize(&[1.0, 0.0]), vec![-1.0, 0.0]);
        assert_eq!(face.minimize(&[0.0, -1.0]), vec![0.0, 1.0]);
        assert!(set.near_face(&[1.0, 1.0], 1.0).is_none());
        assert!(set.near_face(&[-1.0, 3.0], 1e-3).is_none());
    }

    #[test]
    fn ksparse_tie_group() {
        let set = ConstraintSet::k_sparse_box(5, 2).unwrap();
        let q = [3.0, 1.0, -1.0, 1.0 + 1e-12, 0.2];
        let face = set.near_face(&q, 1e-9).unwrap();
        let rep = set.vertex_pair(&q).vertex;
        assert!(contains(&face, &rep));
        let u = face.minimize(&[0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(u, vec![1.0, 0.0, -1.0, 0.0, 0.0]);
        assert!(set.near_face(&[3.0, 1.0, 0.5, 0.0, 0.0], 1e-9).is_none());
    }

    #[test]
    fn ksparse_full_budget_flips_small_entries() {
        let set = ConstraintSet::k_sparse_box(3, 3).unwrap();
        let face = set.near_face(&[2.0, 0.0, -1.0], 1e-9).unwrap();
        assert_eq!(face.minimize(&[0.0, 1.0, 0.0]), vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn bathtub_level_ties() {
        let set = ConstraintSet::bathtub_box(4, 0.5, 1.0).unwrap();
        let q = [2.0, 1.0, 1.0, -1.0];
        let face = set.near_face(&q, 1e-9).unwrap();
        let rep = set.vertex_pair(&q).vertex;
        assert!(contains(&face, &rep));
        assert_eq!(face.minimize(&[0.0, 1.0, 0.0, 0.0]), vec![1.0, 0.0, 1.0, 0.0]);
        assert!(set.near_face(&[2.0, 1.0, 0.5, -1.0], 1e-9).is_none());
        // Slack budget: cells at value zero may be dropped.
        let face = set.near_face(&[2.0, 0.0, -1.0, -1.0], 1e-9).unwrap();
        assert_eq!(face.minimize(&[0.0, 1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(face.minimize(&[0.0, -1.0, 0.0, 0.0]), vec![1.0, 1.0, 0.0, 0.0]);
    }
}
