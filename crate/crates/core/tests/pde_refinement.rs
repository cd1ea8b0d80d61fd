//! Second-order convergence of the ADI solver against an exact exponential solution.

use wedge_credit::pde::{build_grid, hv_solve, PdeProblem};

const A: f64 = 0.7;
const B: f64 = -0.4;
const RHO: f64 = 0.5;
const XI: [f64; 2] = [0.3, -0.2];
const S: f64 = 0.05;

fn exact(tau: f64, x: [f64; 2]) -> f64 {
    let c = 0.5 * A * A + RHO * A * B + 0.5 * B * B + XI[0] * A + XI[1] * B;
    (A * x[0] + B * x[1] + c * tau).exp() - S * tau
}

fn max_error(n: usize, steps: usize, concentration: f64) -> f64 {
    let g = build_grid([3.0, 3.0], [n, n], [1.5, 1.5], concentration, 1.0 / steps as f64).unwrap();
    let p = PdeProblem {
        terminal: Box::new(|x| exact(0.0, x)),
        x1_lower: Box::new(|t, y| exact(t, [0.0, y])),
        x1_upper: Box::new(|t, y| exact(t, [3.0, y])),
        x2_lower: Box::new(|t, x| exact(t, [x, 0.0])),
        x2_upper: Box::new(|t, x| exact(t, [x, 3.0])),
        source: S,
        rho: RHO,
        xi: XI,
    };
    let sol = hv_solve(&p, &g, steps).unwrap();
    assert!((sol.tau - 1.0).abs() < 1e-12);
    let mut worst: f64 = 0.0;
    for (i, &x1) in g.x1.iter().enumerate() {
        for (j, &x2) in g.x2.iter().enumerate() {
            worst = worst.max((sol.at(i, j) - exact(1.0, [x1, x2])).abs());
        }
    }
    worst
}

#[test]
fn uniform_grid_error_drops_fourfold() {
    let coarse = max_error(40, 20, f64::INFINITY);
    let fine = max_error(80, 40, f64::INFINITY);
    assert!(coarse < 1e-2, "{coarse}");
    assert!(coarse / fine >= 3.0, "{coarse} -> {fine}");
}

#[test]
fn clustered_grid_still_converges() {
    let coarse = max_error(40, 20, 1.0);
    let fine = max_error(80, 40, 1.0);
    assert!(coarse / fine >= 3.0, "{coarse} -> {fine}");
}
