//! Convex-analysis properties of every set variant.

mod common;

use common::set_checks::check_all;
use conereach::sets::conjugacy_residual;
use conereach::ConstraintSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: u32 = 1000;

fn vec_in(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, d)
}

/// Vectors with a chance of exact ties and zeros, so singular branches occur.
fn tied_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (vec_in(d, -3.0, 3.0), prop::collection::vec(0u8..6, d)).prop_map(|(mut v, tags)| {
        for j in 0..v.len() {
            match tags[j] {
                0 => v[j] = 0.0,
                1 if j > 0 => v[j] = v[j - 1],
                2 if j > 0 => v[j] = -v[j - 1],
                _ => {}
            }
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn euclidean_ball(dim in 1usize..6, seed in any::<u64>()) {
        let set = ConstraintSet::euclidean_ball(dim).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (u, q, c) = (draw(), draw(), draw());
        check_all(&set, &u, &q, &c).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn k_sparse_box((dim, k) in (1usize..7).prop_flat_map(|d| (Just(d), 1..=d)),
                    u in tied_vec(6), q in tied_vec(6), c in vec_in(6, -1.0, 1.0)) {
        let set = ConstraintSet::k_sparse_box(dim, k).unwrap();
        check_all(&set, &u[..dim], &q[..dim], &c[..dim]).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn toy_half_mix(u in tied_vec(2), q in tied_vec(2), c in vec_in(2, -1.0, 1.0)) {
        check_all(&ConstraintSet::toy_half_mix(), &u, &q, &c).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn bathtub_box(cells in 1usize..9, dx in prop::sample::select(vec![0.05, 0.25, 0.5, 1.0]),
                   fill in 0.05f64..1.2, u in tied_vec(8), nonneg in any::<bool>(),
                   q in tied_vec(8), c in vec_in(8, -1.0, 1.0)) {
        let mass = fill * cells as f64 * dx;
        let set = ConstraintSet::bathtub_box(cells, dx, mass).unwrap();
        let u: Vec<f64> = u[..cells].iter().map(|x| if nonneg { x.abs() } else { *x }).collect();
        check_all(&set, &u, &q[..cells], &c[..cells]).map_err(TestCaseError::fail)?;
    }
}

fn conjugacy_samples(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: Vec<Vec<f64>> = (0..100)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    s.push(vec![0.0, 0.0]);
    s
}

#[test]
fn conjugacy_of_two_dimensional_variants() {
    let sets = [
        ConstraintSet::euclidean_ball(2).unwrap(),
        ConstraintSet::toy_half_mix(),
        ConstraintSet::k_sparse_box(2, 1).unwrap(),
        ConstraintSet::bathtub_box(2, 1.0, 1.0).unwrap(),
    ];
    for (i, set) in sets.iter().enumerate() {
        let samples = conjugacy_samples(40 + i as u64);
        let r = conjugacy_residual(set, &samples, 1e-2).unwrap();
        assert!(r <= 5e-2, "{:?}: conjugacy residual {r}", set.variant);
        assert_eq!(conjugacy_residual(set, &[vec![0.0, 0.0]], 1e-2).unwrap(), 0.0);
    }
}

#[test]
fn toy_samples_cover_both_branches() {
    let s = conjugacy_samples(41);
    assert!(s.iter().any(|x| x[0] > 0.0) && s.iter().any(|x| x[0] < 0.0));
}
