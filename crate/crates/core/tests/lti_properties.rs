use conereach::lti::{apply_lt, expm, kalman_rank, rank_family_test};
use conereach::{GridPropagator, LtiSystem, TimeGrid};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(n: usize, m: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, m, &entries[..n * m])
}

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn semigroup(n in 1usize..6, raw in entries(25), norm in 0.0f64..5.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let mut a = matrix(n, n, &raw);
        let f = a.norm();
        if f > 0.0 {
            a *= norm / f;
        }
        let lhs = expm(&a, s).unwrap() * expm(&a, t).unwrap();
        let rhs = expm(&a, s + t).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-11 * rhs.norm(), "{}", (&lhs - &rhs).norm() / rhs.norm());
    }

    #[test]
    fn adjoint_pairing(n in 1usize..5, m in 1usize..4, ra in entries(16), rb in entries(12),
                       p in entries(4), ru in entries(3 * 40), horizon in 0.2f64..2.0) {
        let sys = LtiSystem::new(matrix(n, n, &ra) * 2.0, matrix(n, m, &rb)).unwrap();
        let grid = TimeGrid::new(horizon, 40).unwrap();
        let prop = GridPropagator::new(&sys, grid);
        let p = DVector::from_column_slice(&p[..n]);
        let u: Vec<DVector<f64>> = ru.chunks(3).map(|c| DVector::from_column_slice(&c[..m])).collect();
        let lhs = p.dot(&prop.apply(&u));
        let q = prop.adjoint(&p);
        let rhs: f64 = q.iter().zip(&u).map(|(qi, ui)| qi.dot(ui)).sum::<f64>() * grid.weight();
        let scale = p.norm() * u.iter().map(|x| x.norm()).sum::<f64>() * grid.weight() * prop.gains().iter().map(|g| g.norm()).fold(0.0, f64::max);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn rank_family_ignores_basis_scaling(ra in entries(9), rb in entries(6), rbasis in entries(6),
                                         scales in prop::collection::vec(prop::sample::select(vec![1e-3, 0.5, 7.0, 1e3]), 2)) {
        let sys = LtiSystem::new(matrix(3, 3, &ra), matrix(3, 2, &rb)).unwrap();
        let basis: Vec<DVector<f64>> = rbasis.chunks(3).map(DVector::from_column_slice).collect();
        let rescaled: Vec<DVector<f64>> = basis.iter().zip(&scales).map(|(b, s)| b * *s).collect();
        prop_assert_eq!(rank_family_test(&sys, &basis).unwrap(), rank_family_test(&sys, &rescaled).unwrap());
        prop_assert_eq!(rank_family_test(&sys, &basis[..1]).unwrap(), rank_family_test(&sys, &rescaled[..1]).unwrap());
    }
}

#[test]
fn midpoint_quadrature_is_second_order() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -0.3]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sys = LtiSystem::new(a, b).unwrap();
    let reach = |n: usize| {
        let grid = TimeGrid::new(1.5, n).unwrap();
        let u: Vec<DVector<f64>> = grid
            .nodes()
            .map(|t| DVector::from_element(1, (2.0 * t).sin() + t * t))
            .collect();
        apply_lt(&sys, &u, &grid).unwrap()
    };
    let (r1, r2, r3) = (reach(50), reach(100), reach(200));
    let ratio = (&r1 - &r2).norm() / (&r2 - &r3).norm();
    assert!((3.5..4.5).contains(&ratio), "refinement ratio {ratio}");
}

#[test]
fn zero_drift_rank_is_input_rank() {
    let sys = LtiSystem::new(
        DMatrix::zeros(3, 3),
        DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]),
    )
    .unwrap();
    assert_eq!(kalman_rank(&sys), 1);
}
