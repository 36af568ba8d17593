mod common;

use czest::czono::{lp_solve, LpStatus, Sense, Simplex};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Lp {
    c: Vec<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    bounds: Vec<(f64, f64)>,
}

/// Small LPs with integer-ish data; half of them are feasible by
/// construction (rhs taken from a point inside the bounds).
fn lp_strategy() -> impl Strategy<Value = Lp> {
    (2usize..=5, 0usize..=2).prop_flat_map(|(n, m)| {
        let m = m.min(n - 1);
        (
            prop::collection::vec(-3i32..=3, n),
            prop::collection::vec(-3i32..=3, m * n),
            prop::collection::vec((-3i32..=0, 1i32..=3), n),
            prop::collection::vec(-1.0f64..=1.0, n),
            prop::collection::vec(-4i32..=4, m),
            any::<bool>(),
        )
            .prop_map(move |(c, a, bnds, t, rhs, from_point)| {
                let a = DMatrix::from_row_slice(m, n, &a.iter().map(|&v| v as f64).collect::<Vec<_>>());
                let bounds: Vec<(f64, f64)> = bnds.iter().map(|&(l, h)| (l as f64, h as f64)).collect();
                let b = if from_point {
                    let x = DVector::from_iterator(n, bounds.iter().zip(&t).map(|(&(l, h), s)| l + (h - l) * (s + 1.0) / 2.0));
                    &a * x
                } else {
                    DVector::from_iterator(m, rhs.iter().map(|&v| v as f64))
                };
                Lp {
                    c: c.iter().map(|&v| v as f64).collect(),
                    a,
                    b,
                    bounds,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in lp_strategy()) {
        let oracle = common::vertex_lp_min(&lp.c, &lp.a, &lp.b, &lp.bounds);
        let got = lp_solve(&lp.c, &lp.a, &lp.b, &lp.bounds, Sense::Minimize).unwrap();
        match (oracle, got) {
            (None, LpStatus::Infeasible) => {}
            (Some(v), LpStatus::Optimal { value, point }) => {
                prop_assert!((v - value).abs() <= 1e-7, "oracle {v} solver {value}");
                let x = DVector::from_vec(point);
                prop_assert!((&lp.a * &x - &lp.b).amax() <= 1e-7);
                for (xi, (lo, hi)) in x.iter().zip(&lp.bounds) {
                    prop_assert!(*xi >= lo - 1e-9 && *xi <= hi + 1e-9);
                }
            }
            (o, g) => prop_assert!(false, "oracle {o:?} solver {g:?}"),
        }
    }

    #[test]
    fn maximize_is_negated_minimize(lp in lp_strategy()) {
        let neg: Vec<f64> = lp.c.iter().map(|v| -v).collect();
        let oracle = common::vertex_lp_min(&neg, &lp.a, &lp.b, &lp.bounds);
        let got = lp_solve(&lp.c, &lp.a, &lp.b, &lp.bounds, Sense::Maximize).unwrap();
        match (oracle, got) {
            (None, LpStatus::Infeasible) => {}
            (Some(v), LpStatus::Optimal { value, .. }) => prop_assert!((v + value).abs() <= 1e-7),
            (o, g) => prop_assert!(false, "oracle {o:?} solver {g:?}"),
        }
    }

    #[test]
    fn warm_start_does_not_change_optimum(lp in lp_strategy(), start in prop::collection::vec(-5.0f64..5.0, 5)) {
        let cold = lp_solve(&lp.c, &lp.a, &lp.b, &lp.bounds, Sense::Minimize).unwrap();
        let mut warm = Simplex::with_start(&lp.a, &lp.b, &lp.bounds, &start[..lp.c.len()]).unwrap();
        match cold {
            LpStatus::Infeasible => prop_assert!(!warm.is_feasible()),
            LpStatus::Optimal { value, .. } => {
                prop_assert!(warm.is_feasible());
                match warm.optimize(&lp.c, Sense::Minimize) {
                    LpStatus::Optimal { value: w, .. } => prop_assert!((w - value).abs() <= 1e-7),
                    other => prop_assert!(false, "{other:?}"),
                }
            }
            LpStatus::Unbounded => prop_assert!(false, "bounded LP reported unbounded"),
        }
    }
}

#[test]
fn free_variables() {
    let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
    let b = DVector::from_vec(vec![0.0]);
    let bounds = [(f64::NEG_INFINITY, f64::INFINITY), (0.0, 1.0)];
    match lp_solve(&[1.0, 0.0], &a, &b, &bounds, Sense::Maximize).unwrap() {
        LpStatus::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    let a = DMatrix::<f64>::zeros(0, 1);
    let b = DVector::<f64>::zeros(0);
    assert_eq!(
        lp_solve(&[1.0], &a, &b, &[(f64::NEG_INFINITY, f64::INFINITY)], Sense::Minimize).unwrap(),
        LpStatus::Unbounded
    );
}
