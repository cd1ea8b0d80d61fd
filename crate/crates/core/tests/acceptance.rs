//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden; the process exits non-zero only when
//! `WEDGE_CREDIT_STRICT` is set, so the report can run alongside the test suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wedge_credit::calibrate::{adjustment_procedure, calibrate, price_quotes, CalibrationOptions, QuoteSet};
use wedge_credit::clearing::{picard_clearing, solve_clearing, ClearingProblem, DEFAULT_TOL};
use wedge_credit::cli::commands::{run_command, validation_report, Command};
use wedge_credit::cli::parse_config_str;
use wedge_credit::greens::{green_2d, kernel_mass, SeriesBudget, WedgeGeometry, WedgeKernel};
use wedge_credit::model::TwoBankModel;
use wedge_credit::network::BankNetwork;
use wedge_credit::pde::{solve_field, FieldKind, Grid2D};
use wedge_credit::pricing::{cds_2d, ftd_2d, ContractSpec, PricingOptions};
use wedge_credit::quad::{integrate_2d, QuadOptions};
use wedge_credit::survival::{
    angular_integral, angular_integral_m1, angular_integral_m2, joint_survival, marginal_survival, quadrant_integral_closed_form,
    quadrant_survival_zero_drift, QuadrantSeriesParams, SurvivalRequest,
};

const BASE_NETWORK: &str = r#"{
  "network": { "assets": [300, 300], "liabilities": [60, 70], "mutual": [[0, 10], [15, 0]],
               "recovery": [0.4, 0.45], "sigma": [1, 1], "rho": 0.5, "maturity": 1 },
  "contracts": [ { "kind": "cds", "reference": 0, "coupon": 0.02 }, { "kind": "ftd", "coupon": 0.02 } ],
  "numerics": { "grid": [100, 100], "dt": 0.01, "tol": 1e-6 }
}"#;

/// Subsampling of interior nodes for the analytic side of the cross-validation.
const VALIDATE_STRIDE: usize = 8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn net_with(t: f64, sigma: [f64; 2]) -> BankNetwork {
    BankNetwork::two_bank([300.0, 300.0], [60.0, 70.0], 10.0, 15.0, [0.4, 0.45], sigma, 0.5, t).unwrap()
}

fn criterion_1() -> Outcome {
    let cfg = parse_config_str(BASE_NETWORK).unwrap();
    let start = Instant::now();
    let art = run_command(Command::Boundaries, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let find = |name: &str| -> [f64; 2] {
        let row = art.table.rows.iter().position(|r| matches!(&r[0], wedge_credit::cli::commands::Cell::Text(s) if s == name)).unwrap();
        let b1 = art.table.column("bank1").unwrap()[row];
        let b2 = art.table.column("bank2").unwrap()[row];
        [b1, b2]
    };
    let want = [("mu_tilde_lt", [0.6659, 0.2548]), ("mu_eq", [1.4424, 0.9764]), ("mu_tilde_eq", [1.5821, 1.0534])];
    let mut worst: f64 = 0.0;
    for (name, w) in want {
        let got = find(name);
        worst = worst.max((got[0] - w[0]).abs()).max((got[1] - w[1]).abs());
    }
    outcome(worst <= 1e-4 && elapsed < 1.0, format!("max deviation {worst:.2e}, runtime {elapsed:.3} s"))
}

fn criterion_2() -> Outcome {
    let opts = PricingOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (t, want, tol) in [(1.0, [0.05, 0.0583, 0.0583], 1e-3), (5.0, [0.2579, 0.3182, 0.336], 3e-3)] {
        let start = Instant::now();
        let got = price_quotes(&net_with(t, [0.3, 0.4]), [0.3, 0.4], 0.5, [0.05, 0.05], &opts).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let dev = (0..3).map(|k| (got[k] - want[k]).abs()).fold(0.0, f64::max);
        pass &= dev <= tol && elapsed <= 2.0;
        parts.push(format!(
            "T={t}: (C1, C2, F1) = ({:.4}, {:.4}, {:.4}) vs ({}, {}, {}), max deviation {dev:.3e}, {elapsed:.2} s",
            got[0], got[1], got[2], want[0], want[1], want[2]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn self_quotes(net: &BankNetwork, t: f64, opts: &CalibrationOptions) -> QuoteSet {
    let p = price_quotes(net, [0.3, 0.4], 0.5, [0.05, 0.05], &opts.pricing).unwrap();
    QuoteSet { c1: p[0], c2: p[1], f1: p[2], maturity: t, coupons: [0.05, 0.05] }
}

fn criterion_3() -> Outcome {
    let opts = CalibrationOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [1.0, 5.0] {
        let net = net_with(t, [0.3, 0.4]);
        let q = self_quotes(&net, t, &opts);
        let start = Instant::now();
        let res = calibrate(&net, &q, &opts);
        let elapsed = start.elapsed().as_secs_f64();
        match res {
            Ok(r) => {
                let dev = (r.sigma[0] - 0.3).abs().max((r.sigma[1] - 0.4).abs()).max((r.rho - 0.5).abs());
                pass &= dev <= 1e-3 && r.objective < 1e-6 && elapsed < 60.0;
                parts.push(format!(
                    "T={t}: ({:.4}, {:.4}, {:.4}), objective {:.1e}, {} iterations, {elapsed:.1} s",
                    r.sigma[0], r.sigma[1], r.rho, r.objective, r.iterations
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("T={t}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let opts = CalibrationOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    // target NMO rows and the signs of (MO − NMO)/MO
    let rows = [(1.0, [0.2819, 0.4421, 0.4936], 2e-2, [1.0, -1.0, 1.0]), (5.0, [0.3189, 0.4234, 0.2942], 4e-2, [-1.0, -1.0, 1.0])];
    for (t, want, tol, signs) in rows {
        let net = net_with(t, [0.3, 0.4]);
        let q = self_quotes(&net, t, &opts);
        let adj = adjustment_procedure(&net).unwrap();
        match calibrate(&adj, &q, &opts) {
            Ok(r) => {
                let got = [r.sigma[0], r.sigma[1], r.rho];
                let mo = [0.3, 0.4, 0.5];
                let dev = (0..3).map(|k| (got[k] - want[k]).abs()).fold(0.0, f64::max);
                let dif: Vec<f64> = (0..3).map(|k| 100.0 * (mo[k] - got[k]) / mo[k]).collect();
                let signs_ok = (0..3).all(|k| dif[k].signum() == signs[k]);
                pass &= dev <= tol && signs_ok;
                parts.push(format!(
                    "T={t}: NMO ({:.4}, {:.4}, {:.4}) vs ({}, {}, {}), max deviation {dev:.3}, Dif% ({:.2}, {:.2}, {:.2}) signs {}",
                    got[0],
                    got[1],
                    got[2],
                    want[0],
                    want[1],
                    want[2],
                    dif[0],
                    dif[1],
                    dif[2],
                    if signs_ok { "match" } else { "differ" }
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("T={t}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let cfg = parse_config_str(BASE_NETWORK).unwrap();
    let model = TwoBankModel::new(&cfg.network).unwrap();
    let grid = Grid2D::for_model(&model, [100, 100], 0.01).unwrap();
    let start = Instant::now();
    for kind in [FieldKind::MarginalSurvival, FieldKind::Cds, FieldKind::Ftd] {
        solve_field(kind, &model, 0.02, &grid).unwrap();
    }
    let fd_time = start.elapsed().as_secs_f64();
    let report = validation_report(&cfg, &model, VALIDATE_STRIDE).unwrap();
    let mut pass = fd_time <= 30.0;
    let mut parts = vec![format!("FD solves {fd_time:.2} s")];
    for r in &report {
        if r.field != "Q" {
            pass &= r.max_abs_gap <= 2e-2;
        }
        parts.push(format!("{} max {:.2e} mean {:.2e} over {} nodes", r.field, r.max_abs_gap, r.mean_abs_gap, r.points));
    }
    outcome(pass, parts.join("; "))
}

fn clearing_properties(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut unique = 0;
    let mut monotone = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=5);
        let mut mutual = vec![vec![0.0; n]; n];
        for (i, row) in mutual.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j && rng.gen_bool(0.7) {
                    *v = rng.gen_range(0.0..30.0);
                }
            }
        }
        let mut correlation = vec![vec![0.0; n]; n];
        for (i, row) in correlation.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let net = BankNetwork {
            assets: vec![100.0; n],
            liabilities: (0..n).map(|_| rng.gen_range(10.0..100.0)).collect(),
            mutual,
            recovery: vec![0.4; n],
            sigma: vec![0.3; n],
            correlation,
            rate: 0.0,
            maturity: 1.0,
        };
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..120.0)).collect();
        let p = ClearingProblem::from_network(&net, &a).unwrap();
        let g = solve_clearing(&p, DEFAULT_TOL).unwrap().gamma;
        let lo = picard_clearing(&p, &vec![0.0; n], 1e-13).unwrap().gamma;
        let hi = picard_clearing(&p, &vec![1.0; n], 1e-13).unwrap().gamma;
        if (0..n).all(|i| (g[i] - lo[i]).abs() < 1e-8 && (g[i] - hi[i]).abs() < 1e-8) {
            unique += 1;
        }
        let k = rng.gen_range(0..n);
        let mut a2 = a.clone();
        a2[k] += rng.gen_range(0.0..20.0);
        let g2 = solve_clearing(&ClearingProblem::from_network(&net, &a2).unwrap(), DEFAULT_TOL).unwrap().gamma;
        if (0..n).all(|i| g2[i] >= g[i] - 1e-10) {
            monotone += 1;
        }
    }
    (unique == 1000 && monotone == 1000, format!("clearing unique {unique}/1000, monotone {monotone}/1000"))
}

fn green_properties() -> (bool, String) {
    let g = WedgeGeometry::new(0.5, [-0.3, 0.1]).unwrap();
    let b = SeriesBudget::default();
    let opts = QuadOptions::new(1e-12, 1e-9);
    let (xp, x, t1, t2) = ([0.9, 0.7], [1.0, 1.1], 0.4, 0.5);
    let k1 = WedgeKernel::new(&g, &b, t1, xp);
    let (lo, hi) = k1.window();
    let q = integrate_2d(
        |m2, m1| {
            let a = k1.density([m1, m2]).unwrap();
            if a == 0.0 {
                0.0
            } else {
                a * WedgeKernel::new(&g, &b, t2, [m1, m2]).density(x).unwrap()
            }
        },
        (lo[1], hi[1]),
        &[],
        |m2| {
            let (a, c) = k1.x1_window(m2);
            (a, c, vec![])
        },
        &opts,
        &opts,
    );
    let direct = green_2d(t1 + t2, x, xp, &g, &b).unwrap();
    let ck = ((q.value - direct) / direct).abs();
    let mut mass_ok = true;
    for tt in [0.1, 0.5, 1.0, 3.0] {
        let m = kernel_mass(&WedgeKernel::new(&g, &b, tt, [0.6, 0.4]), &opts).unwrap();
        mass_ok &= (0.0..=1.0 + 1e-9).contains(&m);
    }
    let edge = [0.3, 1.0, 2.0]
        .iter()
        .flat_map(|&s| [green_2d(0.7, [0.0, s], xp, &g, &b).unwrap(), green_2d(0.7, [s, 0.0], xp, &g, &b).unwrap()])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    (ck < 1e-6 && mass_ok && edge < 1e-10, format!("Chapman-Kolmogorov rel. error {ck:.1e}, mass <= 1 {mass_ok}, edge max {edge:.1e}"))
}

fn probability_and_price_bounds() -> (bool, String) {
    let net = net_with(1.0, [1.0, 1.0]);
    let m = TwoBankModel::new(&net).unwrap();
    let grid = Grid2D::for_model(&m, [60, 60], 0.02).unwrap();
    let q = solve_field(FieldKind::JointSurvival, &m, 0.0, &grid).unwrap();
    let q1 = solve_field(FieldKind::MarginalSurvival, &m, 0.0, &grid).unwrap();
    let eps = 1e-3;
    let fd_ok = q.values.iter().zip(&q1.values).all(|(&a, &b)| a >= -eps && a <= b + eps && b <= 1.0 + eps);
    let req = |x| SurvivalRequest { quad_tol: 1e-6, ..SurvivalRequest::new(0.0, x) };
    let opts = PricingOptions { quad_tol: 1e-6, ..PricingOptions::default() };
    let mut an_ok = true;
    let mut price_ok = true;
    let coupon = 0.02;
    let premium_cap = coupon * net.maturity;
    for x in [[0.4, 0.4], [1.5, 1.0], [3.0, 0.5], [0.8, 2.5], [2.0, 2.0]] {
        let a = joint_survival(&m, &req(x)).unwrap();
        let b = marginal_survival(&m, &req(x)).unwrap();
        an_ok &= (-1e-8..=1.0 + 1e-8).contains(&a) && a <= b + 1e-8 && b <= 1.0 + 1e-8;
        let c = cds_2d(&m, 0.0, x, &ContractSpec::cds(0, coupon), &opts).unwrap();
        let f = ftd_2d(&m, 0.0, x, &ContractSpec::ftd(coupon), &opts).unwrap();
        let top = 1.0 - net.recovery[0].min(net.recovery[1]);
        price_ok &= c >= -premium_cap - 1e-8 && c <= 1.0 - net.recovery[0] + 1e-8;
        price_ok &= f >= -premium_cap - 1e-8 && f <= top + 1e-8;
    }
    // terminal slice: the first-to-default payoff covers the CDS payoff
    let mut terminal_ok = true;
    for i in 0..=80 {
        for j in 0..=80 {
            let x = [4.0 * i as f64 / 80.0, 4.0 * j as f64 / 80.0];
            terminal_ok &= m.ftd_payoff(x) >= m.cds_payoff(x) - 1e-12;
        }
    }
    (
        fd_ok && an_ok && price_ok && terminal_ok,
        format!("0<=Q<=q1<=1 FD {fd_ok} analytic {an_ok}, price bounds {price_ok}, F1>=C1 at maturity {terminal_ok}"),
    )
}

fn difference_surfaces() -> (bool, String) {
    let mut max_dc = Vec::new();
    let mut near = true;
    let mut where_ = Vec::new();
    for t in [1.0, 5.0] {
        let net = net_with(t, [1.0, 1.0]);
        let m = TwoBankModel::new(&net).unwrap();
        let a = TwoBankModel::new(&net.adjusted().unwrap()).unwrap();
        let grid = Grid2D::for_model(&m, [100, 100], 0.01).unwrap();
        let c = solve_field(FieldKind::Cds, &m, 0.02, &grid).unwrap();
        let ca = solve_field(FieldKind::Cds, &a, 0.02, &grid).unwrap();
        let (n1, n2) = grid.shape();
        let mut best = (0.0, 0, 0);
        for i in 0..n1 {
            for j in 0..n2 {
                let d = (c.at(i, j) - ca.at(i, j)).abs();
                if d > best.0 {
                    best = (d, i, j);
                }
            }
        }
        let nearest =
            |nodes: &[f64], v: f64| (0..nodes.len()).min_by(|&p, &q| (nodes[p] - v).abs().total_cmp(&(nodes[q] - v).abs())).unwrap();
        let ci = nearest(&grid.x1, m.bounds.mu_eq[0]);
        let cj = nearest(&grid.x2, m.bounds.mu_eq[1]);
        if t == 1.0 {
            near = best.1.abs_diff(ci) <= 1 && best.2.abs_diff(cj) <= 1;
        }
        max_dc.push(best.0);
        where_.push(format!("T={t} max|dC1| {:.4} at ({:.3}, {:.3})", best.0, grid.x1[best.1], grid.x2[best.2]));
    }
    let damped = max_dc[1] < max_dc[0];
    (near && damped, format!("{}; arg-max near (mu1=, mu2=) {near}, damped {damped}", where_.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let parts = [clearing_properties(&mut rng), green_properties(), probability_and_price_bounds(), difference_surfaces()];
    outcome(parts.iter().all(|p| p.0), parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>().join("; "))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut fallbacks = 0;
    let opts = QuadOptions::new(1e-13, 1e-10);
    for draw in 0..20 {
        let rho = rng.gen_range(-0.7..0.7);
        // the last two draws exercise the zero-drift reduction
        let xi = if draw >= 18 { [0.0, 0.0] } else { [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)] };
        let tt = rng.gen_range(0.5..2.0);
        let xp = [rng.gen_range(0.1..1.5), rng.gen_range(0.1..1.5)];
        let geom = WedgeGeometry::new(rho, xi).unwrap();
        let params = QuadrantSeriesParams::new(&geom, tt, xp).unwrap();
        let cf = quadrant_integral_closed_form(&params, &geom).unwrap();
        fallbacks += cf.fallback as usize;
        let kernel = WedgeKernel::series_only(&geom, &SeriesBudget::default(), tt, xp);
        let quad = kernel_mass(&kernel, &opts).unwrap();
        worst = worst.max(((cf.value - quad) / quad).abs());
        if xi == [0.0, 0.0] {
            let iy = quadrant_survival_zero_drift(&geom, tt, xp, &SeriesBudget::default()).unwrap();
            worst = worst.max(((iy - quad) / quad).abs());
        }
    }
    // the two explicit angular displays against the general evaluation
    let w = 2.0 * std::f64::consts::PI / 3.0;
    let tb = [1.0, 0.5];
    let mut display: f64 = 0.0;
    for n in 1..=4 {
        let nu = std::f64::consts::PI * n as f64 / w;
        display = display.max((angular_integral(nu, 1, tb, w).unwrap().0 - angular_integral_m1(n, tb, w)).abs());
        display = display.max((angular_integral(nu, 2, tb, w).unwrap().0 - angular_integral_m2(n, tb, w)).abs());
    }
    outcome(
        worst <= 1e-5 && fallbacks == 0 && display < 1e-12,
        format!("max rel. gap {worst:.2e} over 20 draws, {fallbacks} quadrature fallbacks, display gap {display:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("boundary constants", criterion_1),
        ("quote reproduction", criterion_2),
        ("calibration round trip", criterion_3),
        ("no-mutual calibration rows", criterion_4),
        ("analytic vs finite differences", criterion_5),
        ("property suites", criterion_6),
        ("quadrant series vs quadrature", criterion_7),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += !o.pass as usize;
        println!(
            "criterion {} ({name}): {} [{:.1} s] {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("WEDGE_CREDIT_STRICT").is_some() {
        std::process::exit(1);
    }
}
