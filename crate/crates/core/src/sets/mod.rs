//! Generating constraint sets and their convex geometry.
//!
//! Each [`ConstraintSet`] describes a bounded generating set 𝒰 containing the
//! origin together with its closed convex hull 𝒰_r. The cone generated by 𝒰
//! is the (possibly nonconvex) control constraint; everything the dual
//! pipeline needs from 𝒰_r is available in closed form here: the gauge j, the
//! support function σ, the argmax face of σ and membership in sing(𝒰_r).

use serde::{Deserialize, Serialize};

use crate::error::SetError;

mod near;
pub use near::{Budget, NearFace};

/// Default relative tolerance for singularity and zero-support detection.
pub const DEFAULT_TOL_SINGULAR: f64 = 1e-9;

/// Integer snapping tolerance for the bathtub cell capacity `mass / dx`.
const CAPACITY_SNAP: f64 = 1e-9;

/// Extended nonnegative real: a finite value or `+∞`.
///
/// Infinite values never enter floating-point arithmetic; callers must match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

/// The shipped families of generating sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SetVariant {
    /// Unit Euclidean ball: the unconstrained (HUM) case.
    EuclideanBall { dim: usize },
    /// `{‖u‖₀ ≤ k, ‖u‖∞ ≤ 1}`, relaxed to `{‖u‖∞ ≤ 1, ‖u‖₁ ≤ k}`.
    KSparseBox { dim: usize, k: usize },
    /// Planar set whose cone is `{u₁ ≥ 0} ∪ {u₂ = 0}`; relaxed to the union
    /// of the right half-disk and the left half of the ℓ¹ ball.
    ToyHalfMix,
    /// Discretized on-off shape controls: indicators of cell sets of total
    /// measure at most `mass`, relaxed to `{0 ≤ u ≤ 1, Σ uᵢ·dx ≤ mass}`.
    /// Pairings use the `dx`-weighted inner product.
    BathtubBox { cells: usize, dx: f64, mass: f64 },
}

/// Status part of [`FaceResult`].
#[derive(Debug, Clone, PartialEq)]
pub enum FaceStatus {
    /// `σ(q) = 0`: q lies in the polar of the relaxed cone.
    ZeroSupport,
    UniqueMaximizer(Vec<f64>),
    /// Two distinct maximizers exist; `representative` is an extreme point.
    Singular {
        representative: Vec<f64>,
        witness: Vec<f64>,
    },
}

/// Result of maximizing `⟨q, v⟩` over 𝒰_r.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceResult {
    /// `σ(q)`.
    pub value: f64,
    pub status: FaceStatus,
    /// Bathtub only: index of the cell filled fractionally in the returned
    /// maximizer. Such a maximizer is not an extreme point of the
    /// continuum set and fails the original-cone test at that cell.
    pub fractional_cell: Option<usize>,
}

impl FaceResult {
    /// The maximizer used for control reconstruction (zero for
    /// [`FaceStatus::ZeroSupport`]).
    pub fn representative(&self, dim: usize) -> Vec<f64> {
        match &self.status {
            FaceStatus::ZeroSupport => vec![0.0; dim],
            FaceStatus::UniqueMaximizer(v) => v.clone(),
            FaceStatus::Singular { representative, .. } => representative.clone(),
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self.status, FaceStatus::Singular { .. })
    }
}

/// An extreme-point maximizer together with the closest competing extreme
/// point of 𝒰_r, used to detect and resolve near-ties.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPair {
    pub vertex: Vec<f64>,
    /// Competing extreme point and `⟨q, vertex⟩ − ⟨q, alternative⟩ ≥ 0`
    /// (in the set's inner product). `None` where σ is smooth at q.
    pub alternative: Option<(Vec<f64>, f64)>,
    pub fractional_cell: Option<usize>,
}

/// A generating constraint set with its singular-vector tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(flatten)]
    pub variant: SetVariant,
    #[serde(default = "default_tol")]
    pub tol_singular: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL_SINGULAR
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices sorted by decreasing key, ties broken by increasing index.
fn order_desc(key: impl Fn(usize) -> f64, len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.sort_by(|&i, &j| key(j).total_cmp(&key(i)).then(i.cmp(&j)));
    idx
}

fn sign_or_one(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

impl ConstraintSet {
    pub fn new(variant: SetVariant) -> Result<Self, SetError> {
        let set = ConstraintSet {
            variant,
            tol_singular: DEFAULT_TOL_SINGULAR,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn euclidean_ball(dim: usize) -> Result<Self, SetError> {
        Self::new(SetVariant::EuclideanBall { dim })
    }

    pub fn k_sparse_box(dim: usize, k: usize) -> Result<Self, SetError> {
        Self::new(SetVariant::KSparseBox { dim, k })
    }

    pub fn toy_half_mix() -> Self {
        ConstraintSet {
            variant: SetVariant::ToyHalfMix,
            tol_singular: DEFAULT_TOL_SINGULAR,
        }
    }

    pub fn bathtub_box(cells: usize, dx: f64, mass: f64) -> Result<Self, SetError> {
        Self::new(SetVariant::BathtubBox { cells, dx, mass })
    }

    pub fn with_tol_singular(mut self, tol: f64) -> Result<Self, SetError> {
        self.tol_singular = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SetError> {
        if !(self.tol_singular >= 0.0 && self.tol_singular.is_finite()) {
            return Err(SetError::InvalidParameter("tol_singular must be a nonnegative real"));
        }
        match self.variant {
            SetVariant::EuclideanBall { dim: 0 } => Err(SetError::InvalidParameter("dim must be positive")),
            SetVariant::KSparseBox { dim, k } if k == 0 || k > dim => {
                Err(SetError::InvalidParameter("k must satisfy 1 <= k <= dim"))
            }
            SetVariant::BathtubBox { cells, dx, mass } => {
                if cells == 0 {
                    Err(SetError::InvalidParameter("cells must be positive"))
                } else if !(dx > 0.0 && dx.is_finite()) {
                    Err(SetError::InvalidParameter("dx must be positive"))
                } else if !(mass > 0.0 && mass.is_finite()) {
                    Err(SetError::InvalidParameter("mass must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self.variant {
            SetVariant::EuclideanBall { dim } | SetVariant::KSparseBox { dim, .. } => dim,
            SetVariant::ToyHalfMix => 2,
            SetVariant::BathtubBox { cells, .. } => cells,
        }
    }

    /// Weight of the control-space inner product (`dx` for the bathtub set,
    /// one otherwise).
    pub fn metric_weight(&self) -> f64 {
        match self.variant {
            SetVariant::BathtubBox { dx, .. } => dx,
            _ => 1.0,
        }
    }

    /// Inner product of the control space.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.metric_weight() * dot(a, b)
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), SetError> {
        if v.len() != self.dim() {
            Err(SetError::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Gauge (Minkowski functional) of 𝒰_r.
    pub fn gauge(&self, u: &[f64]) -> Result<Extended, SetError> {
        self.check_dim(u)?;
        let value = match self.variant {
            SetVariant::EuclideanBall { .. } => norm2(u),
            SetVariant::ToyHalfMix => {
                if u[0] <= 0.0 {
                    norm1(u)
                } else {
                    norm2(u)
                }
            }
            SetVariant::KSparseBox { k, .. } => (norm1(u) / k as f64).max(norm_inf(u)),
            SetVariant::BathtubBox { dx, mass, .. } => {
                if u.iter().any(|&x| x < 0.0) {
                    return Ok(Extended::Infinite);
                }
                let l1: f64 = u.iter().sum::<f64>() * dx;
                norm_inf(u).max(l1 / mass)
            }
        };
        Ok(Extended::Finite(value))
    }

    /// Support function `σ(q) = sup_{v ∈ 𝒰_r} ⟨q, v⟩`.
    pub fn support(&self, q: &[f64]) -> Result<f64, SetError> {
        self.check_dim(q)?;
        Ok(match self.variant {
            SetVariant::EuclideanBall { .. } => norm2(q),
            SetVariant::ToyHalfMix => {
                if q[0] <= 0.0 {
                    norm_inf(q)
                } else {
                    norm2(q)
                }
            }
            SetVariant::KSparseBox { dim, k } => {
                let order = order_desc(|i| q[i].abs(), dim);
                order[..k].iter().map(|&i| q[i].abs()).sum()
            }
            SetVariant::BathtubBox { .. } => {
                let pair = self.bathtub_vertices(q);
                self.inner(q, &pair.vertex)
            }
        })
    }

    /// Maximizers of `⟨q, ·⟩` over 𝒰_r with singularity classification.
    pub fn support_face(&self, q: &[f64]) -> Result<FaceResult, SetError> {
        let value = self.support(q)?;
        let scale = norm2(q);
        let tol = self.tol_singular * scale;
        if value <= tol * self.metric_weight() {
            return Ok(FaceResult {
                value,
                status: FaceStatus::ZeroSupport,
                fractional_cell: None,
            });
        }
        let pair = self.vertex_pair(q);
        let status = match (self.is_singular_vector(q, tol), pair.alternative) {
            (true, Some((witness, _))) => FaceStatus::Singular {
                representative: pair.vertex,
                witness,
            },
            _ => FaceStatus::UniqueMaximizer(pair.vertex),
        };
        Ok(FaceResult {
            value,
            status,
            fractional_cell: pair.fractional_cell,
        })
    }

    /// Closed-form membership of q in sing(𝒰_r), up to the absolute
    /// tolerance `tol` (already scaled by ‖q‖).
    fn is_singular_vector(&self, q: &[f64], tol: f64) -> bool {
        match self.variant {
            SetVariant::EuclideanBall { .. } => false,
            SetVariant::ToyHalfMix => q[0] < 0.0 && ((q[1] + q[0]).abs() <= tol || (q[1] - q[0]).abs() <= tol),
            SetVariant::KSparseBox { dim, k } => {
                let order = order_desc(|i| q[i].abs(), dim);
                if k < dim {
                    q[order[k - 1]].abs() - q[order[k]].abs() <= tol
                } else {
                    q[order[dim - 1]].abs() <= tol
                }
            }
            SetVariant::BathtubBox { cells, .. } => {
                let capacity = self.bathtub_capacity();
                let order = order_desc(|i| q[i], cells);
                let positive = order.iter().take_while(|&&i| q[i] > tol).count();
                let full = capacity.floor() as usize;
                let frac = capacity - full as f64;
                let value_at = |pos: usize| order.get(pos).map(|&i| q[i]);
                let ties = |a: Option<f64>, b: Option<f64>| match (a, b) {
                    (Some(x), Some(y)) => (x - y).abs() <= tol,
                    _ => false,
                };
                if (positive as f64) < capacity {
                    // Budget left over: a (near) zero-valued cell may be filled freely.
                    value_at(positive).is_some_and(|v| v.abs() <= tol)
                } else if frac > 0.0 {
                    ties(value_at(full.wrapping_sub(1)), value_at(full)) || ties(value_at(full), value_at(full + 1))
                } else {
                    full > 0 && ties(value_at(full - 1), value_at(full))
                }
            }
        }
    }

    /// Extreme-point maximizer of `⟨q, ·⟩` and its closest competitor.
    pub fn vertex_pair(&self, q: &[f64]) -> VertexPair {
        match self.variant {
            SetVariant::EuclideanBall { dim } => {
                let n = norm2(q);
                let vertex = if n > 0.0 {
                    q.iter().map(|x| x / n).collect()
                } else {
                    vec![0.0; dim]
                };
                VertexPair {
                    vertex,
                    alternative: None,
                    fractional_cell: None,
                }
            }
            SetVariant::ToyHalfMix => {
                if q[0] > 0.0 {
                    let n = norm2(q);
                    return VertexPair {
                        vertex: vec![q[0] / n, q[1] / n],
                        alternative: None,
                        fractional_cell: None,
                    };
                }
                let candidates = [([0.0, 1.0], q[1]), ([-1.0, 0.0], -q[0]), ([0.0, -1.0], -q[1])];
                let order = order_desc(|i| candidates[i].1, 3);
                let (best, second) = (candidates[order[0]], candidates[order[1]]);
                VertexPair {
                    vertex: best.0.to_vec(),
                    alternative: Some((second.0.to_vec(), best.1 - second.1)),
                    fractional_cell: None,
                }
            }
            SetVariant::KSparseBox { dim, k } => {
                let order = order_desc(|i| q[i].abs(), dim);
                let mut vertex = vec![0.0; dim];
                for &i in &order[..k] {
                    vertex[i] = sign_or_one(q[i]);
                }
                let alternative = if k < dim {
                    let (last, next) = (order[k - 1], order[k]);
                    let mut alt = vertex.clone();
                    alt[last] = 0.0;
                    alt[next] = sign_or_one(q[next]);
                    Some((alt, q[last].abs() - q[next].abs()))
                } else {
                    let smallest = order[dim - 1];
                    let mut alt = vertex.clone();
                    alt[smallest] = -alt[smallest];
                    Some((alt, 2.0 * q[smallest].abs()))
                };
                VertexPair {
                    vertex,
                    alternative,
                    fractional_cell: None,
                }
            }
            SetVariant::BathtubBox { .. } => self.bathtub_vertices(q),
        }
    }

    fn bathtub_capacity(&self) -> f64 {
        match self.variant {
            SetVariant::BathtubBox { cells, dx, mass } => {
                let c = (mass / dx).min(cells as f64);
                if (c - c.round()).abs() <= CAPACITY_SNAP * c.max(1.0) {
                    c.round()
                } else {
                    c
                }
            }
            _ => unreachable!("capacity of a non-bathtub set"),
        }
    }

    /// Fractional-knapsack maximizer: fill cells by decreasing positive value
    /// until the mass budget is spent.
    fn bathtub_vertices(&self, q: &[f64]) -> VertexPair {
        let SetVariant::BathtubBox { cells, dx, .. } = self.variant else {
            unreachable!()
        };
        let capacity = self.bathtub_capacity();
        let order = order_desc(|i| q[i], cells);
        let mut vertex = vec![0.0; cells];
        let mut remaining = capacity;
        let mut filled = 0usize;
        let mut fractional_cell = None;
        for &i in &order {
            if q[i] <= 0.0 || remaining <= 0.0 {
                break;
            }
            let f = remaining.min(1.0);
            vertex[i] = f;
            remaining -= f;
            filled += 1;
            if f < 1.0 {
                fractional_cell = Some(i);
            }
        }
        let value = |pos: usize| order.get(pos).map(|&i| q[i]);
        let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
        if remaining > 0.0 {
            // Budget not binding: toggle the weakest filled cell or the best
            // unfilled one.
            if filled > 0 {
                let i = order[filled - 1];
                let mut alt = vertex.clone();
                alt[i] = 0.0;
                candidates.push((alt, dx * q[i]));
            }
            if let Some(v) = value(filled) {
                let i = order[filled];
                let mut alt = vertex.clone();
                let amount = remaining.min(1.0);
                alt[i] = amount;
                candidates.push((alt, -dx * v * amount));
            }
        } else if let Some(frac_idx) = fractional_cell {
            let frac = vertex[frac_idx];
            let pos = filled - 1;
            if pos > 0 {
                let prev = order[pos - 1];
                let mut alt = vertex.clone();
                alt[prev] = frac;
                alt[frac_idx] = 1.0;
                candidates.push((alt, dx * (q[prev] - q[frac_idx]) * (1.0 - frac)));
            }
            if let Some(v) = value(filled) {
                let next = order[filled];
                let mut alt = vertex.clone();
                alt[frac_idx] = 0.0;
                alt[next] = frac;
                candidates.push((alt, dx * (q[frac_idx] - v) * frac));
            }
        } else if filled > 0 {
            if let Some(v) = value(filled) {
                let (last, next) = (order[filled - 1], order[filled]);
                let mut alt = vertex.clone();
                alt[last] = 0.0;
                alt[next] = 1.0;
                candidates.push((alt, dx * (q[last] - v)));
            }
        }
        let alternative = candidates
            .into_iter()
            .map(|(alt, gap)| (alt, gap.max(0.0)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        VertexPair {
            vertex,
            alternative,
            fractional_cell,
        }
    }

    /// Membership of u in the original cone `cone(𝒰)` up to `tol`.
    pub fn in_original_cone(&self, u: &[f64], tol: f64) -> bool {
        if u.len() != self.dim() {
            return false;
        }
        match self.variant {
            SetVariant::EuclideanBall { .. } => true,
            SetVariant::ToyHalfMix => u[0] >= -tol || u[1].abs() <= tol,
            SetVariant::KSparseBox { k, .. } => u.iter().filter(|x| x.abs() > tol).count() <= k,
            SetVariant::BathtubBox { dx, mass, .. } => {
                let level = u.iter().cloned().fold(0.0, f64::max);
                if level <= tol {
                    return u.iter().all(|x| x.abs() <= tol);
                }
                let mut on = 0usize;
                for &x in u {
                    if (x - level).abs() <= tol {
                        on += 1;
                    } else if x.abs() > tol {
                        return false;
                    }
                }
                on as f64 * dx <= mass + tol
            }
        }
    }
}

/// Brute-force check of `(½σ²)* = ½j²` on a dense grid.
///
/// For each sample x, the discrete conjugate `max_y ⟨x, y⟩ − ½σ²(y)` is taken
/// over the grid `[-R, R]^d` with spacing `grid_step`, where R bounds every
/// maximizer. Samples with infinite gauge are skipped. Test kernel only: the
/// cost is `O((2R/step)^d)` per sample.
pub fn conjugacy_residual(set: &ConstraintSet, samples: &[Vec<f64>], grid_step: f64) -> Result<f64, SetError> {
    let d = set.dim();
    if d > 3 {
        return Err(SetError::DimensionTooLarge(d));
    }
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(SetError::InvalidParameter("grid_step must be positive"));
    }
    let mut finite = Vec::new();
    for x in samples {
        if let Extended::Finite(j) = set.gauge(x)? {
            finite.push((x, j));
        }
    }
    let Some(jmax) = finite.iter().map(|(_, j)| *j).reduce(f64::max) else {
        return Ok(0.0);
    };
    // ‖y‖∞ ≤ j(x)·w⁻¹·max(1, dx/mass) holds for a maximizer of every shipped variant.
    let bound = match set.variant {
        SetVariant::BathtubBox { dx, mass, .. } => jmax * (1.0f64).max(mass / dx) / dx.min(1.0),
        _ => jmax,
    } + 2.0 * grid_step;
    let steps = (bound / grid_step).ceil() as i64;
    let axis: Vec<f64> = (-steps..=steps).map(|i| i as f64 * grid_step).collect();
    let mut points = Vec::new();
    let mut half_sq = Vec::new();
    let mut y = vec![0.0; d];
    enumerate_grid(&axis, 0, &mut y, &mut |y| {
        let s = set.support(y).unwrap_or(0.0);
        points.extend_from_slice(y);
        half_sq.push(0.5 * s * s);
    });
    let mut worst: f64 = 0.0;
    for (x, j) in finite {
        let best = points
            .chunks_exact(d)
            .zip(&half_sq)
            .map(|(y, h)| set.inner(x, y) - h)
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((0.5 * j * j - best).abs());
    }
    Ok(worst)
}

fn enumerate_grid(axis: &[f64], depth: usize, y: &mut Vec<f64>, f: &mut impl FnMut(&[f64])) {
    if depth == y.len() {
        f(y);
        return;
    }
    for &a in axis {
        y[depth] = a;
        enumerate_grid(axis, depth + 1, y, f);
    }
}
