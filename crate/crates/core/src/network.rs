//! Balance-sheet data, default boundaries and the change to nondimensional coordinates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External assets and liabilities of `N` banks plus their mutual obligations.
///
/// `mutual[i][j]` is the amount bank `i` owes bank `j`. All currency amounts are at
/// `t = 0`; liabilities grow deterministically at the risk-free `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankNetwork {
    pub assets: Vec<f64>,
    pub liabilities: Vec<f64>,
    pub mutual: Vec<Vec<f64>>,
    pub recovery: Vec<f64>,
    pub sigma: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
    #[serde(default)]
    pub rate: f64,
    pub maturity: f64,
}

impl BankNetwork {
    /// Two-bank network; `l12` is owed by bank 1 to bank 2 and `l21` the reverse.
    #[allow(clippy::too_many_arguments)]
    pub fn two_bank(
        assets: [f64; 2],
        liabilities: [f64; 2],
        l12: f64,
        l21: f64,
        recovery: [f64; 2],
        sigma: [f64; 2],
        rho: f64,
        maturity: f64,
    ) -> Result<Self> {
        let net = Self {
            assets: assets.to_vec(),
            liabilities: liabilities.to_vec(),
            mutual: vec![vec![0.0, l12], vec![l21, 0.0]],
            recovery: recovery.to_vec(),
            sigma: sigma.to_vec(),
            correlation: vec![vec![1.0, rho], vec![rho, 1.0]],
            rate: 0.0,
            maturity,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n_banks(&self) -> usize {
        self.liabilities.len()
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let n = self.liabilities.len();
        let mut errs = Vec::new();
        if n < 2 {
            errs.push(format!("network needs at least two banks, got {n}"));
        }
        for (name, len) in [("assets", self.assets.len()), ("recovery", self.recovery.len()), ("sigma", self.sigma.len())] {
            if len != n {
                errs.push(format!("{name} has {len} entries, expected {n}"));
            }
        }
        let check_nonneg = |errs: &mut Vec<String>, name: &str, v: &[f64]| {
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    errs.push(format!("{name}[{i}] = {x} must be finite and non-negative"));
                }
            }
        };
        check_nonneg(&mut errs, "assets", &self.assets);
        check_nonneg(&mut errs, "liabilities", &self.liabilities);
        for (i, &r) in self.recovery.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                errs.push(format!("recovery[{i}] = {r} must lie in [0, 1]"));
            }
        }
        for (i, &s) in self.sigma.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                errs.push(format!("sigma[{i}] = {s} must be positive"));
            }
        }
        if self.mutual.len() != n || self.mutual.iter().any(|row| row.len() != n) {
            errs.push(format!("mutual must be a {n}x{n} matrix"));
        } else {
            for (i, row) in self.mutual.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    if i == j && x != 0.0 {
                        errs.push(format!("mutual[{i}][{i}] = {x} must be zero"));
                    } else if !x.is_finite() || x < 0.0 {
                        errs.push(format!("mutual[{i}][{j}] = {x} must be finite and non-negative"));
                    }
                }
            }
        }
        if self.correlation.len() != n || self.correlation.iter().any(|row| row.len() != n) {
            errs.push(format!("correlation must be a {n}x{n} matrix"));
        } else {
            let mut ok = true;
            for i in 0..n {
                if self.correlation[i][i] != 1.0 {
                    errs.push(format!("correlation[{i}][{i}] must be 1"));
                    ok = false;
                }
                for j in 0..i {
                    let (a, b) = (self.correlation[i][j], self.correlation[j][i]);
                    if a != b {
                        errs.push(format!("correlation is not symmetric at ({i}, {j})"));
                        ok = false;
                    }
                    if !(a > -1.0 && a < 1.0) {
                        errs.push(format!("correlation[{i}][{j}] = {a} must lie in (-1, 1)"));
                        ok = false;
                    }
                }
            }
            if ok {
                let m = DMatrix::from_fn(n, n, |i, j| self.correlation[i][j]);
                if m.cholesky().is_none() {
                    errs.push("correlation matrix is not positive definite".into());
                }
            }
        }
        if !self.rate.is_finite() {
            errs.push(format!("rate = {} must be finite", self.rate));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            errs.push(format!("maturity = {} must be positive", self.maturity));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(errs))
        }
    }

    /// `e^{rt}`, the growth factor of every liability.
    pub fn growth(&self, t: f64) -> f64 {
        (self.rate * t).exp()
    }

    /// Total liabilities `L̃_i = L_i + Σ_j L_ij` at time `t`.
    pub fn total_liabilities(&self, i: usize, t: f64) -> f64 {
        (self.liabilities[i] + self.mutual[i].iter().sum::<f64>()) * self.growth(t)
    }

    pub fn rho(&self) -> f64 {
        self.correlation[0][1]
    }

    /// Same network with the mutual obligations removed and external liabilities
    /// re-adjusted so that each bank's net position is unchanged.
    pub fn adjusted(&self) -> Result<Self> {
        let n = self.n_banks();
        let mut out = self.clone();
        let mut errs = Vec::new();
        for i in 0..n {
            let inflow: f64 = (0..n).map(|j| self.mutual[j][i]).sum();
            let outflow: f64 = self.mutual[i].iter().sum();
            let l = self.liabilities[i] + inflow - outflow;
            if l <= 0.0 {
                errs.push(format!("adjusted external liability of bank {} is {l}, must be positive", i + 1));
            }
            out.liabilities[i] = l;
            out.mutual[i].iter_mut().for_each(|x| *x = 0.0);
        }
        if errs.is_empty() {
            Ok(out)
        } else {
            Err(Error::Schema(errs))
        }
    }

    /// Same network with the roles of banks 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        assert_eq!(self.n_banks(), 2, "swapping roles is defined for two banks");
        let sw = |v: &[f64]| vec![v[1], v[0]];
        let rho = self.rho();
        Self {
            assets: sw(&self.assets),
            liabilities: sw(&self.liabilities),
            mutual: vec![vec![0.0, self.mutual[1][0]], vec![self.mutual[0][1], 0.0]],
            recovery: sw(&self.recovery),
            sigma: sw(&self.sigma),
            correlation: vec![vec![1.0, rho], vec![rho, 1.0]],
            rate: self.rate,
            maturity: self.maturity,
        }
    }
}

/// Pre-default thresholds `λ^<` (before maturity) and `λ^=` (at maturity).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardBoundaries {
    pub lambda_lt: Vec<f64>,
    pub lambda_eq: Vec<f64>,
}

/// `λ_i^<(t) = R_i[L_i + Σ_j L_ij] − Σ_j L_ji` and `λ_i^=(t) = L_i + Σ_j (L_ij − L_ji)`.
pub fn standard_boundaries(net: &BankNetwork, t: f64) -> StandardBoundaries {
    let n = net.n_banks();
    let g = net.growth(t);
    let mut lambda_lt = Vec::with_capacity(n);
    let mut lambda_eq = Vec::with_capacity(n);
    for i in 0..n {
        let owed: f64 = net.mutual[i].iter().sum();
        let due: f64 = (0..n).map(|j| net.mutual[j][i]).sum();
        lambda_lt.push(g * (net.recovery[i] * (net.liabilities[i] + owed) - due));
        lambda_eq.push(g * (net.liabilities[i] + owed - due));
    }
    StandardBoundaries { lambda_lt, lambda_eq }
}

/// Thresholds of the survivors after bank `defaulted` has failed. Entries for the
/// defaulted bank are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostDefaultBoundaries {
    pub defaulted: usize,
    pub lambda_lt: Vec<Option<f64>>,
    pub lambda_eq: Vec<Option<f64>>,
    /// `Δλ_i = λ̃_i^< − λ_i^<`, non-negative.
    pub delta: Vec<Option<f64>>,
}

/// Survivor `i` loses the claim on the defaulted bank `k` except for its recovery:
/// `λ̃_i^< = R_i[L_i + L_ik − R_k L_ki] + Σ_{j≠i,k}[R_i L_ij − L_ji]`, and `λ̃_i^=` the same
/// without the leading `R_i`.
pub fn post_default_boundaries(net: &BankNetwork, defaulted: usize, t: f64) -> Result<PostDefaultBoundaries> {
    let n = net.n_banks();
    if defaulted >= n {
        return Err(Error::schema(format!("bank index {defaulted} out of range for {n} banks")));
    }
    let g = net.growth(t);
    let plain = standard_boundaries(net, t);
    let k = defaulted;
    let rk = net.recovery[k];
    let mut out = PostDefaultBoundaries { defaulted, lambda_lt: vec![None; n], lambda_eq: vec![None; n], delta: vec![None; n] };
    for i in (0..n).filter(|&i| i != k) {
        let ri = net.recovery[i];
        let core = net.liabilities[i] + net.mutual[i][k] - rk * net.mutual[k][i];
        let mut lt = ri * core;
        let mut eq = core;
        for j in (0..n).filter(|&j| j != i && j != k) {
            lt += ri * net.mutual[i][j] - net.mutual[j][i];
            eq += net.mutual[i][j] - net.mutual[j][i];
        }
        out.lambda_lt[i] = Some(g * lt);
        out.lambda_eq[i] = Some(g * eq);
        out.delta[i] = Some(g * lt - plain.lambda_lt[i]);
    }
    Ok(out)
}

/// Every threshold of a two-bank network in currency and nondimensional form.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    pub lambda_lt: [f64; 2],
    pub lambda_eq: [f64; 2],
    pub lambda_tilde_lt: [f64; 2],
    pub lambda_tilde_eq: [f64; 2],
    pub mu_lt: [f64; 2],
    pub mu_eq: [f64; 2],
    pub mu_tilde_lt: [f64; 2],
    pub mu_tilde_eq: [f64; 2],
    pub omega: f64,
    pub xi: [f64; 2],
}

impl BoundarySet {
    pub fn new(net: &BankNetwork, t: f64) -> Result<Self> {
        if net.n_banks() != 2 {
            return Err(Error::Domain(format!("nondimensional boundaries are implemented for two banks, got {}", net.n_banks())));
        }
        let plain = standard_boundaries(net, t);
        let lambda_lt = [plain.lambda_lt[0], plain.lambda_lt[1]];
        let lambda_eq = [plain.lambda_eq[0], plain.lambda_eq[1]];
        let mut lambda_tilde_lt = [0.0; 2];
        let mut lambda_tilde_eq = [0.0; 2];
        for i in 0..2 {
            let post = post_default_boundaries(net, 1 - i, t)?;
            lambda_tilde_lt[i] = post.lambda_lt[i].expect("survivor entry");
            lambda_tilde_eq[i] = post.lambda_eq[i].expect("survivor entry");
        }
        let mut bad = Vec::new();
        for i in 0..2 {
            for (name, v) in [("λ^<", lambda_lt[i]), ("λ^=", lambda_eq[i]), ("λ̃^<", lambda_tilde_lt[i]), ("λ̃^=", lambda_tilde_eq[i])]
            {
                if !(v > 0.0) {
                    bad.push(format!("{name} of bank {} is {v}; the log-coordinates need it positive", i + 1));
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::Domain(bad.join("; ")));
        }
        let omega = (net.sigma[0] * net.sigma[1]).sqrt();
        let scale = [omega / net.sigma[0], omega / net.sigma[1]];
        let mu = |v: [f64; 2]| [scale[0] * (v[0] / lambda_lt[0]).ln(), scale[1] * (v[1] / lambda_lt[1]).ln()];
        Ok(Self {
            lambda_lt,
            lambda_eq,
            lambda_tilde_lt,
            lambda_tilde_eq,
            mu_lt: [0.0, 0.0],
            mu_eq: mu(lambda_eq),
            mu_tilde_lt: mu(lambda_tilde_lt),
            mu_tilde_eq: mu(lambda_tilde_eq),
            omega,
            xi: [-net.sigma[0] / (2.0 * omega), -net.sigma[1] / (2.0 * omega)],
        })
    }

    /// `Δλ_i = λ̃_i^< − λ_i^<`.
    pub fn delta_lambda(&self) -> [f64; 2] {
        [self.lambda_tilde_lt[0] - self.lambda_lt[0], self.lambda_tilde_lt[1] - self.lambda_lt[1]]
    }
}

/// A two-bank network expressed in the coordinates `X_i = (ω/σ_i) ln(A_i/λ_i^<)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nondimensional {
    pub boundaries: BoundarySet,
    pub x: [f64; 2],
    /// `ω² t`
    pub t_bar: f64,
    /// `ω² T`
    pub maturity_bar: f64,
}

pub fn nondimensionalize(net: &BankNetwork, assets: [f64; 2], t: f64) -> Result<Nondimensional> {
    let b = BoundarySet::new(net, t)?;
    let mut x = [0.0; 2];
    for i in 0..2 {
        if !(assets[i] > 0.0) {
            return Err(Error::Domain(format!("asset value of bank {} must be positive, got {}", i + 1, assets[i])));
        }
        x[i] = b.omega / net.sigma[i] * (assets[i] / b.lambda_lt[i]).ln();
    }
    let w2 = b.omega * b.omega;
    Ok(Nondimensional { x, t_bar: w2 * t, maturity_bar: w2 * net.maturity, boundaries: b })
}

/// Terminal default threshold of bank `i` as a function of the other bank's terminal
/// assets, both in time-`T` currency:
/// `λ̃_{i,T}(A_j) = L̃_i − L_ji · min(1, (A_j + L_ij)/L̃_j)`.
///
/// It equals `λ_i^=` once bank `j` is solvent and rises linearly as bank `j`'s payment
/// shortfall grows.
pub fn terminal_boundary_curve(net: &BankNetwork, i: usize, a_other: f64) -> f64 {
    let j = 1 - i;
    let t = net.maturity;
    let g = net.growth(t);
    let lt_i = net.total_liabilities(i, t);
    let lt_j = net.total_liabilities(j, t);
    let l_ij = net.mutual[i][j] * g;
    let l_ji = net.mutual[j][i] * g;
    let paid = if lt_j > 0.0 { ((a_other.max(0.0) + l_ij) / lt_j).min(1.0) } else { 1.0 };
    lt_i - l_ji * paid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> BankNetwork {
        BankNetwork::two_bank([300.0, 300.0], [60.0, 70.0], 10.0, 15.0, [0.4, 0.45], [1.0, 1.0], 0.5, 1.0).unwrap()
    }

    #[test]
    fn standard_thresholds() {
        let b = standard_boundaries(&reference(), 0.0);
        assert!((b.lambda_lt[0] - 13.0).abs() < 1e-12);
        assert!((b.lambda_lt[1] - 28.25).abs() < 1e-12);
        assert_eq!(b.lambda_eq, vec![55.0, 75.0]);
    }

    #[test]
    fn thresholds_scale_with_liability_growth() {
        let mut net = reference();
        net.rate = 0.03;
        let b0 = standard_boundaries(&net, 0.0);
        let b1 = standard_boundaries(&net, 2.0);
        assert!((b1.lambda_eq[1] / b0.lambda_eq[1] - (0.06f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn no_mutual_full_recovery() {
        let net = BankNetwork::two_bank([1.0, 1.0], [40.0, 50.0], 0.0, 0.0, [1.0, 1.0], [1.0, 1.0], 0.0, 1.0).unwrap();
        let b = standard_boundaries(&net, 0.0);
        assert_eq!(b.lambda_lt, vec![40.0, 50.0]);
        assert_eq!(b.lambda_eq, vec![40.0, 50.0]);
        let post = post_default_boundaries(&net, 1, 0.0).unwrap();
        assert_eq!(post.delta[0], Some(0.0));
    }

    #[test]
    fn post_default_thresholds() {
        let net = reference();
        let p = post_default_boundaries(&net, 1, 0.0).unwrap();
        assert!((p.lambda_lt[0].unwrap() - 25.3).abs() < 1e-12);
        assert!((p.lambda_eq[0].unwrap() - 63.25).abs() < 1e-12);
        assert_eq!(p.lambda_lt[1], None);
        let p = post_default_boundaries(&net, 0, 0.0).unwrap();
        assert!((p.lambda_lt[1].unwrap() - 36.45).abs() < 1e-12);
        assert!((p.lambda_eq[1].unwrap() - 81.0).abs() < 1e-12);
        // Δλ = (1 − R_survivor R_defaulted) L_{defaulted→survivor}
        assert!((p.delta[1].unwrap() - (1.0 - 0.45 * 0.4) * 10.0).abs() < 1e-12);
    }

    #[test]
    fn general_n_reduces_to_pair_formula() {
        // a third bank with no links leaves the two-bank thresholds unchanged
        let mut net = reference();
        net.assets.push(10.0);
        net.liabilities.push(5.0);
        net.recovery.push(0.3);
        net.sigma.push(0.2);
        for row in &mut net.mutual {
            row.push(0.0);
        }
        net.mutual.push(vec![0.0; 3]);
        net.correlation = vec![vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        net.validate().unwrap();
        let p = post_default_boundaries(&net, 1, 0.0).unwrap();
        assert!((p.lambda_lt[0].unwrap() - 25.3).abs() < 1e-12);
        assert_eq!(p.lambda_lt[2], Some(0.3 * 5.0));
    }

    #[test]
    fn nondimensional_constants() {
        let b = BoundarySet::new(&reference(), 0.0).unwrap();
        let want_tilde_lt = [0.6659, 0.2548];
        let want_eq = [1.4424, 0.9764];
        let want_tilde_eq = [1.5821, 1.0534];
        for i in 0..2 {
            assert!((b.mu_tilde_lt[i] - want_tilde_lt[i]).abs() < 1e-4);
            assert!((b.mu_eq[i] - want_eq[i]).abs() < 1e-4);
            assert!((b.mu_tilde_eq[i] - want_tilde_eq[i]).abs() < 1e-4);
        }
        assert_eq!(b.mu_lt, [0.0, 0.0]);
        assert_eq!(b.xi, [-0.5, -0.5]);
        assert!(b.delta_lambda().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn coordinates_round_trip() {
        let mut net = reference();
        net.sigma = vec![0.3, 0.4];
        let nd = nondimensionalize(&net, [300.0, 171.0], 0.0).unwrap();
        let b = &nd.boundaries;
        for (i, a) in [300.0f64, 171.0].into_iter().enumerate() {
            let back = b.lambda_lt[i] * (net.sigma[i] * nd.x[i] / b.omega).exp();
            assert!(((back - a) / a).abs() < 1e-12);
        }
        let at_barrier = nondimensionalize(&net, [13.0, 28.25], 0.0).unwrap();
        assert_eq!(at_barrier.x[0], 0.0);
        assert!((nd.maturity_bar - 0.12).abs() < 1e-15);
    }

    #[test]
    fn negative_boundary_is_a_domain_error() {
        let net = BankNetwork::two_bank([1.0, 1.0], [10.0, 70.0], 10.0, 50.0, [0.4, 0.45], [1.0, 1.0], 0.5, 1.0).unwrap();
        assert!(matches!(BoundarySet::new(&net, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn terminal_curve_knots() {
        let net = reference();
        assert!((terminal_boundary_curve(&net, 0, 0.0) - 5800.0 / 85.0).abs() < 1e-12);
        assert_eq!(terminal_boundary_curve(&net, 0, 75.0), 55.0);
        assert_eq!(terminal_boundary_curve(&net, 0, 1e6), 55.0);
        let left = terminal_boundary_curve(&net, 0, 75.0 - 1e-9);
        assert!((left - 55.0).abs() < 1e-9);
        // non-increasing in the other bank's assets
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let v = terminal_boundary_curve(&net, 1, k as f64 * 0.5);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn validation_reports_all_problems() {
        let mut net = reference();
        net.recovery[0] = 1.5;
        net.liabilities[1] = -1.0;
        net.correlation[0][1] = 0.2;
        match net.validate() {
            Err(Error::Schema(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn adjustment_keeps_net_positions() {
        let adj = reference().adjusted().unwrap();
        assert_eq!(adj.liabilities, vec![65.0, 65.0]);
        assert!(adj.mutual.iter().flatten().all(|&x| x == 0.0));
        let sym = BankNetwork::two_bank([1.0, 1.0], [60.0, 70.0], 12.0, 12.0, [0.4, 0.45], [1.0, 1.0], 0.5, 1.0).unwrap();
        assert_eq!(sym.adjusted().unwrap().liabilities, vec![60.0, 70.0]);
    }
}
