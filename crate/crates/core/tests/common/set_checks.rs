//! Convex-analysis checks on a single (u, q, c) sample, against an
//! independent membership test for 𝒰_r and brute-force support values.
//! Shared by the property suite and the acceptance harness.

// `!(a <= b)` is intended: NaN must fail a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use conereach::{ConstraintSet, Extended, FaceStatus, SetVariant};

macro_rules! ensure {
    ($cond:expr) => {
        if !$cond {
            return Err(format!("failed: {}", stringify!($cond)));
        }
    };
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Membership in 𝒰_r from its defining inequalities.
pub fn member(set: &ConstraintSet, v: &[f64], tol: f64) -> bool {
    match set.variant {
        SetVariant::EuclideanBall { .. } => v.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + tol,
        SetVariant::KSparseBox { k, .. } => {
            v.iter().all(|x| x.abs() <= 1.0 + tol) && v.iter().map(|x| x.abs()).sum::<f64>() <= k as f64 + tol
        }
        SetVariant::ToyHalfMix => {
            if v[0] >= 0.0 {
                v[0].hypot(v[1]) <= 1.0 + tol
            } else {
                -v[0] + v[1].abs() <= 1.0 + tol
            }
        }
        SetVariant::BathtubBox { dx, mass, .. } => {
            v.iter().all(|&x| (-tol..=1.0 + tol).contains(&x)) && v.iter().sum::<f64>() * dx <= mass + tol
        }
    }
}

/// σ by enumeration of candidate extreme points.
pub fn support_oracle(set: &ConstraintSet, q: &[f64]) -> f64 {
    match set.variant {
        SetVariant::EuclideanBall { .. } => q.iter().map(|x| x * x).sum::<f64>().sqrt(),
        SetVariant::KSparseBox { dim, k } => {
            // Every sign pattern in {−1, 0, 1}^dim with at most k nonzeros.
            let mut best: f64 = 0.0;
            let total = 3usize.pow(dim as u32);
            for code in 0..total {
                let (mut c, mut nz, mut val) = (code, 0, 0.0);
                for qj in q {
                    let s = (c % 3) as f64 - 1.0;
                    c /= 3;
                    if s != 0.0 {
                        nz += 1;
                    }
                    val += s * qj;
                }
                if nz <= k {
                    best = best.max(val);
                }
            }
            best
        }
        SetVariant::ToyHalfMix => {
            let disk = if q[0] >= 0.0 { q[0].hypot(q[1]) } else { q[1].abs() };
            let diamond = q[1].abs().max(-q[0]);
            disk.max(diamond)
        }
        SetVariant::BathtubBox { cells, dx, mass } => {
            // Vertices: 0/1 cells plus at most one partially filled cell.
            let mut best: f64 = 0.0;
            for subset in 0u32..(1 << cells) {
                let used = subset.count_ones() as f64 * dx;
                if used > mass + 1e-12 {
                    continue;
                }
                let base: f64 = (0..cells).filter(|j| subset >> j & 1 == 1).map(|j| q[j]).sum::<f64>() * dx;
                best = best.max(base);
                let frac = ((mass - used) / dx).min(1.0);
                for j in (0..cells).filter(|j| subset >> j & 1 == 0) {
                    best = best.max(base + frac * q[j] * dx);
                }
            }
            best
        }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn finite_gauge(set: &ConstraintSet, u: &[f64]) -> Option<f64> {
    set.gauge(u).unwrap().finite()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

pub fn check_all(set: &ConstraintSet, u: &[f64], q: &[f64], c: &[f64]) -> Result<(), String> {
    let d = set.dim();
    // Positive homogeneity.
    for lambda in [0.5, 2.0, 10.0] {
        let lu = scaled(u, lambda);
        match (set.gauge(u).unwrap(), set.gauge(&lu).unwrap()) {
            (Extended::Finite(a), Extended::Finite(b)) => ensure!(rel_close(b, lambda * a, 1e-12), "gauge {a} {b}"),
            (Extended::Infinite, Extended::Infinite) => {}
            other => ensure!(false, "gauge finiteness changed under scaling: {other:?}"),
        }
        let (s, ls) = (set.support(q).unwrap(), set.support(&scaled(q, lambda)).unwrap());
        ensure!(
            (ls - lambda * s).abs() <= 1e-12 * (lambda * s).max(1e-300),
            "support {s} {ls}"
        );
    }
    // Support against enumeration.
    let sigma = set.support(q).unwrap();
    let oracle = support_oracle(set, q);
    ensure!(
        (sigma - oracle).abs() <= 1e-10 * (1.0 + oracle),
        "σ {sigma} vs {oracle}"
    );

    // (i): zero gauge only at zero.
    ensure!(set.gauge(&vec![0.0; d]).unwrap() == Extended::Finite(0.0));
    if let Some(j) = finite_gauge(set, u) {
        if u.iter().any(|x| *x != 0.0) {
            ensure!(j > 0.0);
            // (ii)/(iii): j(u) ≤ α iff u ∈ αC, probed on both sides of α = j(u).
            ensure!(member(set, &scaled(u, 1.0 / (j * (1.0 + 1e-9))), 1e-12));
            ensure!(!member(set, &scaled(u, 1.0 / (j * (1.0 - 1e-6))), 1e-12));
            let again = finite_gauge(set, &scaled(u, 1.0 / (j * (1.0 + 1e-9)))).unwrap();
            ensure!(again <= 1.0 + 1e-9);
            // (iv): u ∈ j(u)·C, and that point pairs below σ.
            let v = scaled(u, 1.0 / j);
            ensure!(member(set, &v, 1e-9));
            ensure!(set.inner(q, &v) <= sigma + 1e-10 * (1.0 + sigma));
        }
    } else {
        // Only the bathtub has an infinite gauge, exactly off the nonnegative orthant.
        let bathtub = matches!(set.variant, SetVariant::BathtubBox { .. });
        ensure!(bathtub && u.iter().any(|x| *x < 0.0));
    }

    // Face consistency and extremality.
    let face = set.support_face(q).unwrap();
    ensure!((face.value - sigma).abs() <= 1e-12 * (1.0 + sigma));
    let attains = |v: &[f64]| {
        (set.inner(q, v) - sigma).abs() <= 1e-10 * (1.0 + sigma)
            && finite_gauge(set, v).is_some_and(|g| g <= 1.0 + 1e-10)
    };
    match &face.status {
        FaceStatus::ZeroSupport => ensure!(sigma <= 1e-9 * q.iter().map(|x| x * x).sum::<f64>().sqrt()),
        FaceStatus::UniqueMaximizer(v) => {
            ensure!(attains(v), "unique maximizer {v:?} for q {q:?}");
            let extreme = !matches!(set.variant, SetVariant::EuclideanBall { .. });
            if extreme && face.fractional_cell.is_none() {
                ensure!(
                    set.in_original_cone(v, 1e-9),
                    "maximizer {v:?} outside the original cone"
                );
            }
        }
        FaceStatus::Singular {
            representative,
            witness,
        } => {
            ensure!(attains(representative) && attains(witness));
            let dist = representative
                .iter()
                .zip(witness)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            ensure!(dist > set.tol_singular);
        }
    }
    if let Some(cell) = face.fractional_cell {
        let v = face.representative(d);
        ensure!(v[cell] > 0.0 && v[cell] < 1.0);
    }

    // Near faces: every minimizer is a near-maximizer lying in 𝒰_r, and it
    // beats the representative vertex on the probing functional.
    let gap = 1e-3 * sigma;
    if let Some(nf) = set.near_face(q, gap) {
        let v = nf.minimize(c);
        let rep = set.vertex_pair(q).vertex;
        ensure!(member(set, &v, 1e-12));
        ensure!(set.inner(q, &v) >= sigma - gap * d as f64 - 1e-12 * (1.0 + sigma));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        ensure!(dot(c, &v) <= dot(c, &rep) + 1e-12);
    }
    Ok(())
}
