//! Randomised checks of the clearing map: fixed point, uniqueness and monotonicity.

use proptest::prelude::*;
use wedge_credit::clearing::{picard_clearing, solve_clearing, ClearingProblem, DEFAULT_TOL};
use wedge_credit::network::BankNetwork;

fn network(liabilities: Vec<f64>, weights: Vec<f64>) -> BankNetwork {
    let n = liabilities.len();
    let mut mutual = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                mutual[i][j] = weights[i * n + j];
            }
        }
    }
    let correlation = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    BankNetwork {
        assets: vec![100.0; n],
        liabilities,
        mutual,
        recovery: vec![0.4; n],
        sigma: vec![0.3; n],
        correlation,
        rate: 0.0,
        maturity: 1.0,
    }
}

fn instance() -> impl Strategy<Value = (BankNetwork, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|n| {
        (prop::collection::vec(5.0..100.0f64, n), prop::collection::vec(0.0..30.0f64, n * n), prop::collection::vec(0.0..150.0f64, n))
            .prop_map(|(l, w, a)| (network(l, w), a))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solution_is_the_unique_fixed_point((net, a) in instance()) {
        let p = ClearingProblem::from_network(&net, &a).unwrap();
        let g = solve_clearing(&p, DEFAULT_TOL).unwrap().gamma;
        prop_assert!(p.residual(&g) < 1e-10);
        prop_assert!(g.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // least and greatest fixed points agree
        let lo = picard_clearing(&p, &vec![0.0; g.len()], 1e-13).unwrap().gamma;
        let hi = picard_clearing(&p, &vec![1.0; g.len()], 1e-13).unwrap().gamma;
        for k in 0..g.len() {
            prop_assert!((lo[k] - g[k]).abs() < 1e-8 && (hi[k] - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn more_assets_never_lower_payments((net, a) in instance(), bank in 0usize..5, bump in 0.0..50.0f64) {
        let bank = bank % a.len();
        let mut richer = a.clone();
        richer[bank] += bump;
        let g0 = solve_clearing(&ClearingProblem::from_network(&net, &a).unwrap(), DEFAULT_TOL).unwrap().gamma;
        let g1 = solve_clearing(&ClearingProblem::from_network(&net, &richer).unwrap(), DEFAULT_TOL).unwrap().gamma;
        for k in 0..a.len() {
            prop_assert!(g1[k] >= g0[k] - 1e-10, "bank {k}: {} < {}", g1[k], g0[k]);
        }
    }
}
