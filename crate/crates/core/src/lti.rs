//! Finite-dimensional semigroup machinery for `ẏ = Ay + Bu`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::LtiError;

/// Relative cutoff for numerical rank, scaled by `n·σ_max`.
const RANK_RTOL: f64 = 1e-12;
const KRYLOV_RTOL: f64 = 1e-10;

/// A linear time-invariant system with state matrix `A` (n×n) and input
/// matrix `B` (n×m).
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, LtiError> {
        if !a.is_square() {
            return Err(LtiError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.nrows() != a.nrows() {
            return Err(LtiError::DimensionMismatch {
                what: "B rows",
                expected: a.nrows(),
                found: b.nrows(),
            });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(LtiError::NonFinite("A"));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(LtiError::NonFinite("B"));
        }
        Ok(LtiSystem { a, b })
    }

    /// Build from row-major nested literals.
    pub fn from_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self, LtiError> {
        Self::new(matrix_from_rows(a, "A")?, matrix_from_rows(b, "B")?)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// `S_t = e^{tA}`.
    pub fn semigroup(&self, t: f64) -> DMatrix<f64> {
        expm_unchecked(&self.a, t)
    }
}

/// Dense matrix from row-major nested vectors; an empty column count is
/// allowed only when there are no rows.
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &'static str) -> Result<DMatrix<f64>, LtiError> {
    let ncols = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != ncols {
            return Err(LtiError::DimensionMismatch {
                what,
                expected: ncols,
                found: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Midpoint-rule grid on `[0, T]` with `N` intervals: nodes `(i + ½)T/N`,
/// uniform weights `T/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self, LtiError> {
        if !(horizon > 0.0 && horizon.is_finite()) || intervals < 2 {
            return Err(LtiError::InvalidGrid);
        }
        Ok(TimeGrid { horizon, intervals })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.intervals
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weight(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.weight()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.intervals).map(|i| self.node(i))
    }
}

fn expm_unchecked(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if t == 0.0 || m.iter().all(|&x| x == 0.0) {
        return DMatrix::identity(m.nrows(), m.ncols());
    }
    (m * t).exp()
}

/// `e^{tM}` by scaling and squaring with a Padé core.
pub fn expm(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>, LtiError> {
    if !m.is_square() {
        return Err(LtiError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) || !t.is_finite() {
        return Err(LtiError::NonFinite("matrix exponential input"));
    }
    Ok(expm_unchecked(m, t))
}

/// Per-node input gains `G_i = e^{(T − t_i)A} B` on a fixed grid.
///
/// `L_T u ≈ Σ_i w G_i u_i` and `(L_T* p)(t_i) = G_iᵀ p`.
#[derive(Debug, Clone)]
pub struct GridPropagator {
    grid: TimeGrid,
    gains: Vec<DMatrix<f64>>,
}

impl GridPropagator {
    pub fn new(sys: &LtiSystem, grid: TimeGrid) -> Self {
        let h = grid.weight();
        let step = sys.semigroup(h);
        let mut s = sys.semigroup(0.5 * h);
        let mut gains = vec![DMatrix::zeros(0, 0); grid.len()];
        for i in (0..grid.len()).rev() {
            gains[i] = &s * sys.b();
            if i > 0 {
                s = &step * &s;
            }
        }
        GridPropagator { grid, gains }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    pub fn gain(&self, i: usize) -> &DMatrix<f64> {
        &self.gains[i]
    }

    pub fn adjoint(&self, p: &DVector<f64>) -> Vec<DVector<f64>> {
        self.gains.iter().map(|g| g.tr_mul(p)).collect()
    }

    pub fn apply(&self, u: &[DVector<f64>]) -> DVector<f64> {
        let n = self.gains.first().map_or(0, |g| g.nrows());
        let mut acc = DVector::zeros(n);
        for (g, ui) in self.gains.iter().zip(u) {
            acc.gemv(1.0, g, ui, 1.0);
        }
        acc * self.grid.weight()
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), LtiError> {
    if expected != found {
        Err(LtiError::DimensionMismatch { what, expected, found })
    } else {
        Ok(())
    }
}

fn check_control(sys: &LtiSystem, u: &[DVector<f64>], grid: &TimeGrid) -> Result<(), LtiError> {
    check_len("control samples", grid.len(), u.len())?;
    for ui in u {
        check_len("control sample", sys.inputs(), ui.len())?;
    }
    Ok(())
}

/// `q_i = Bᵀ e^{(T − t_i)Aᵀ} p_f` at every grid node.
pub fn adjoint_trajectory(sys: &LtiSystem, p_f: &DVector<f64>, grid: &TimeGrid) -> Result<Vec<DVector<f64>>, LtiError> {
    check_len("p_f", sys.states(), p_f.len())?;
    Ok(GridPropagator::new(sys, *grid).adjoint(p_f))
}

/// Midpoint quadrature of `L_T u = ∫ S_{T−t} B u(t) dt`.
pub fn apply_lt(sys: &LtiSystem, u: &[DVector<f64>], grid: &TimeGrid) -> Result<DVector<f64>, LtiError> {
    check_control(sys, u, grid)?;
    Ok(GridPropagator::new(sys, *grid).apply(u))
}

/// `y(T) = e^{TA} y₀ + L_T u`.
pub fn simulate_forward(
    sys: &LtiSystem,
    y0: &DVector<f64>,
    u: &[DVector<f64>],
    grid: &TimeGrid,
) -> Result<DVector<f64>, LtiError> {
    check_len("y0", sys.states(), y0.len())?;
    check_control(sys, u, grid)?;
    Ok(sys.semigroup(grid.horizon()) * y0 + GridPropagator::new(sys, *grid).apply(u))
}

/// Numerical rank via SVD with cutoff `n·σ_max·1e-12`, n the row count.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let cutoff = m.nrows() as f64 * smax * RANK_RTOL;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        out.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    out
}

/// Dimension of `span{A^j b : b a column of B, j ≥ 0}`, computed from an
/// orthonormal Krylov basis (block Gram–Schmidt, two passes). Columns of B
/// are normalized first, so the result does not depend on their scaling,
/// and the basis stays well conditioned when ‖A‖ is large, unlike the
/// monomial matrix `[B, AB, …]`.
pub fn krylov_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let a_norm = a.norm();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let add = |basis: &mut Vec<DVector<f64>>, mut v: DVector<f64>, scale: f64| -> Option<DVector<f64>> {
        for _ in 0..2 {
            for q in basis.iter() {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        (norm > KRYLOV_RTOL * scale).then(|| {
            let q = v / norm;
            basis.push(q.clone());
            q
        })
    };
    let mut frontier = Vec::new();
    for col in b.column_iter() {
        let norm = col.norm();
        if norm > 0.0 && basis.len() < n {
            if let Some(q) = add(&mut basis, col / norm, 1.0) {
                frontier.push(q);
            }
        }
    }
    while !frontier.is_empty() && basis.len() < n {
        let mut next = Vec::new();
        for q in &frontier {
            if basis.len() == n {
                break;
            }
            if let Some(q2) = add(&mut basis, a * q, a_norm) {
                next.push(q2);
            }
        }
        frontier = next;
    }
    basis.len()
}

/// Rank of the Kalman controllability matrix.
pub fn kalman_rank(sys: &LtiSystem) -> usize {
    krylov_rank(sys.a(), sys.b())
}

/// Every pair `(A, b_j ± b_ℓ)`, `j ≠ ℓ`, satisfies Kalman's rank condition.
pub fn strong_kalman_check(sys: &LtiSystem) -> Result<bool, LtiError> {
    let m = sys.inputs();
    if m < 2 {
        return Err(LtiError::TooFewInputs(m));
    }
    let n = sys.states();
    let b = sys.b();
    for j in 0..m {
        for l in (j + 1)..m {
            for sign in [1.0, -1.0] {
                let col = b.column(j) + b.column(l) * sign;
                let col = DMatrix::from_column_slice(n, 1, col.as_slice());
                if krylov_rank(sys.a(), &col) < n {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// `span{A^j b : b ∈ basis, 0 ≤ j ≤ n−1} = ℝⁿ`.
///
/// Injectivity of the adjoint semigroup holds automatically for matrix
/// exponentials, and Cayley–Hamilton caps the powers at `n − 1`.
pub fn rank_family_test(sys: &LtiSystem, basis: &[DVector<f64>]) -> Result<bool, LtiError> {
    if basis.is_empty() {
        return Err(LtiError::EmptyBasis);
    }
    let n = sys.states();
    for b in basis {
        check_len("basis vector", n, b.len())?;
    }
    let cols = DMatrix::from_columns(basis);
    Ok(krylov_rank(sys.a(), &cols) == n)
}
