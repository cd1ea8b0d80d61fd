//! CDS and first-to-default prices: 1D closed forms, terminal payoffs and the 2D
//! Green's-function representations.
//!
//! Prices are protection minus accrued premium per unit notional, so a CDS on a bank far
//! from default is worth `−ς(T − t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorSlot, Result};
use crate::greens::{chi_survival, chi_survival_dx, SeriesBudget, WedgeKernel};
use crate::integrals::{edge2_flux_integral, region_integral, time_integral, Tolerances};
use crate::model::TwoBankModel;
use crate::quad::{integrate, QuadOptions};
use crate::specfun::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractKind {
    Cds,
    Ftd,
}

/// A contract on the two-bank network. Recoveries come from the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpec {
    pub kind: ContractKind,
    /// Reference bank (0 or 1). For a first-to-default swap this only orders the banks.
    #[serde(default)]
    pub reference: usize,
    /// Continuously paid coupon rate per unit calendar time.
    pub coupon: f64,
}

impl ContractSpec {
    pub fn cds(reference: usize, coupon: f64) -> Self {
        Self { kind: ContractKind::Cds, reference, coupon }
    }

    pub fn ftd(coupon: f64) -> Self {
        Self { kind: ContractKind::Ftd, reference: 0, coupon }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.reference > 1 {
            errs.push(format!("reference bank {} does not exist (expected 0 or 1)", self.reference));
        }
        if !(self.coupon >= 0.0) || !self.coupon.is_finite() {
            errs.push(format!("coupon must be non-negative and finite, got {}", self.coupon));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(errs))
        }
    }
}

/// Upper truncation of the computational domain, in `X` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDomain {
    pub m1: f64,
    pub m2: f64,
}

impl TruncatedDomain {
    /// `M_i = max(μ̃_i^=, X′_i) + 8√T̄`.
    pub fn default_for(model: &TwoBankModel) -> Self {
        let pad = 8.0 * model.maturity_bar.sqrt();
        let m = |i: usize| model.bounds.mu_tilde_eq[i].max(model.spot[i]) + pad;
        Self { m1: m(0), m2: m(1) }
    }
}

/// Which boundary correction the 2D price uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Lift the edge data into the interior so the kernel integrals carry homogeneous
    /// boundary values. Exact on the edges; needs a time–space source integral.
    Regularized,
    /// Subtract the standalone 1D price and add the edge flux. Cheaper, but not uniform
    /// as `X₂′ → 0`.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingOptions {
    pub quad_tol: f64,
    pub budget: SeriesBudget,
    pub representation: Representation,
    /// Height `M₂` of the CDS lift `h = (X₂/M₂)c_{1,∞} + (1 − X₂/M₂)Ψ`; `None` means
    /// `M₂ = ∞`, where the lift is `Ψ` alone.
    pub lift_height: Option<f64>,
}

impl Default for PricingOptions {
    fn default() -> Self {
        Self { quad_tol: 1e-8, budget: SeriesBudget::default(), representation: Representation::Direct, lift_height: None }
    }
}

/// `∫₀^τ P(survive s) ds` for a drifted Brownian motion started at distance `x` above an
/// absorbing barrier.
pub fn expected_survival_time(tau: f64, x: f64, xi: f64) -> f64 {
    if x <= 0.0 || tau <= 0.0 {
        return 0.0;
    }
    if xi.abs() < 1e-6 {
        return integrate(|s| chi_survival(s, x, 0.0, 0.0, xi), 0.0, tau, &[], &QuadOptions::new(1e-15, 1e-13)).value;
    }
    let s = tau.sqrt();
    let yp = (x + xi * tau) / s;
    let ym = (-x + xi * tau) / s;
    let e = (-2.0 * xi * x).exp();
    let img = if e.is_finite() { e * (xi * tau - x) * norm_cdf(ym) } else { 0.0 };
    tau - ((x + xi * tau) * norm_cdf(-yp) + img) / xi
}

/// `∂/∂x` of [`expected_survival_time`].
pub fn expected_survival_time_dx(tau: f64, x: f64, xi: f64) -> f64 {
    if x < 0.0 || tau <= 0.0 {
        return 0.0;
    }
    if xi.abs() < 1e-6 {
        return integrate(|s| chi_survival_dx(s, x, 0.0, 0.0, xi), 0.0, tau, &[], &QuadOptions::new(1e-15, 1e-13)).value;
    }
    let s = tau.sqrt();
    let yp = (x + xi * tau) / s;
    let ym = (-x + xi * tau) / s;
    let e = (-2.0 * xi * x).exp();
    let img = if e.is_finite() { e * (1.0 + 2.0 * xi * xi * tau - 2.0 * xi * x) * norm_cdf(ym) } else { 0.0 };
    -(norm_cdf(-yp) - img) / xi + 2.0 * s * norm_pdf(yp)
}

/// Single-name CDS on a process killed at `barrier` that defaults at maturity below
/// `strike`, in nondimensional time with coupon `coupon_bar = ς/ω²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg1D {
    pub barrier: f64,
    pub strike: f64,
    pub xi: f64,
    /// `1 − R`.
    pub loss: f64,
    pub coupon_bar: f64,
}

impl Leg1D {
    pub fn price(&self, tau: f64, x: f64) -> f64 {
        if x <= self.barrier {
            return self.loss;
        }
        let chi = chi_survival(tau, x, self.barrier, self.strike, self.xi);
        self.loss * (1.0 - chi) - self.coupon_bar * expected_survival_time(tau, x - self.barrier, self.xi)
    }

    pub fn price_dx(&self, tau: f64, x: f64) -> f64 {
        if x < self.barrier || tau <= 0.0 {
            return 0.0;
        }
        -self.loss * chi_survival_dx(tau, x, self.barrier, self.strike, self.xi)
            - self.coupon_bar * expected_survival_time_dx(tau, x - self.barrier, self.xi)
    }
}

/// Which single-name price [`cds_1d`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdsVariant {
    /// After the other bank has defaulted: barrier `μ̃^<`, strike `μ̃^=`.
    PostDefault,
    /// The other bank never defaults: barrier 0, strike `μ^=`.
    Standalone,
}

/// Standalone CDS leg of `bank`: the other bank never defaults (barrier 0, strike `μ^=`).
pub fn standalone_leg(model: &TwoBankModel, bank: usize, coupon: f64) -> Leg1D {
    let b = &model.bounds;
    Leg1D {
        barrier: 0.0,
        strike: b.mu_eq[bank],
        xi: b.xi[bank],
        loss: 1.0 - model.net.recovery[bank],
        coupon_bar: coupon / (b.omega * b.omega),
    }
}

/// CDS leg of `bank` after the other bank has defaulted (barrier `μ̃^<`, strike `μ̃^=`).
pub fn post_default_leg(model: &TwoBankModel, bank: usize, coupon: f64) -> Leg1D {
    let b = &model.bounds;
    Leg1D { barrier: b.mu_tilde_lt[bank], strike: b.mu_tilde_eq[bank], ..standalone_leg(model, bank, coupon) }
}

/// The 1D legs of bank 1 of `model` used by the boundary data.
#[derive(Debug, Clone, Copy)]
struct Legs {
    standalone: Leg1D,
    post: Leg1D,
}

impl Legs {
    fn new(model: &TwoBankModel, bank: usize, coupon: f64) -> Self {
        Self { standalone: standalone_leg(model, bank, coupon), post: post_default_leg(model, bank, coupon) }
    }

    fn c_inf(&self, tau: f64, x: f64) -> f64 {
        self.standalone.price(tau, x)
    }

    /// `Ψ`: the CDS on bank 1 once bank 2 has defaulted.
    fn psi(&self, tau: f64, x: f64) -> f64 {
        self.post.price(tau, x)
    }

    fn psi_dx(&self, tau: f64, x: f64) -> f64 {
        if x <= self.post.barrier {
            0.0
        } else {
            self.post.price_dx(tau, x)
        }
    }
}

/// Single-name CDS price at nondimensional time `t` on the reference bank of `spec`.
pub fn cds_1d(model: &TwoBankModel, t: f64, x: f64, variant: CdsVariant, spec: &ContractSpec) -> Result<f64> {
    spec.validate()?;
    let tau = time_to_maturity(model, t)?;
    let legs = Legs::new(model, spec.reference, spec.coupon);
    Ok(match variant {
        CdsVariant::PostDefault => legs.psi(tau, x),
        CdsVariant::Standalone => legs.c_inf(tau, x),
    })
}

fn time_to_maturity(model: &TwoBankModel, t: f64) -> Result<f64> {
    let tau = model.maturity_bar - t;
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("valuation time {t} is after maturity {}", model.maturity_bar)));
    }
    Ok(tau)
}

/// Model seen from the reference bank: bank 1 of the returned model is `reference`.
fn oriented(model: &TwoBankModel, reference: usize, x: [f64; 2]) -> Result<(std::borrow::Cow<'_, TwoBankModel>, [f64; 2])> {
    if reference == 0 {
        Ok((std::borrow::Cow::Borrowed(model), x))
    } else {
        Ok((std::borrow::Cow::Owned(model.swapped()?), [x[1], x[0]]))
    }
}

/// CDS protection payment at maturity for terminal assets `a_t` (currency at `t = 0`
/// values, the rate having cancelled).
pub fn cds_terminal_payoff(model: &TwoBankModel, a_t: [f64; 2], spec: &ContractSpec) -> Result<f64> {
    spec.validate()?;
    let (m, a) = oriented(model, spec.reference, a_t)?;
    Ok(m.cds_payoff_assets(a))
}

/// First-to-default protection payment at maturity for terminal assets `a_t`.
pub fn ftd_terminal_payoff(model: &TwoBankModel, a_t: [f64; 2]) -> f64 {
    model.ftd_payoff_assets(a_t)
}

fn check_point(x: [f64; 2]) -> Result<()> {
    if !(x[0] >= 0.0 && x[1] >= 0.0) {
        return Err(Error::Domain(format!("evaluation point {x:?} lies outside the wedge")));
    }
    Ok(())
}

/// CDS on the reference bank of `spec` at nondimensional time `t` and point `x`.
pub fn cds_2d(model: &TwoBankModel, t: f64, x: [f64; 2], spec: &ContractSpec, opts: &PricingOptions) -> Result<f64> {
    spec.validate()?;
    check_point(x)?;
    let tau = time_to_maturity(model, t)?;
    let (m, x) = oriented(model, spec.reference, x)?;
    let m = m.as_ref();
    let legs = Legs::new(m, 0, spec.coupon);
    let loss = legs.post.loss;
    if x[0] == 0.0 {
        return Ok(loss);
    }
    if x[1] == 0.0 {
        return Ok(legs.psi(tau, x[0]));
    }
    if tau == 0.0 {
        return Ok(m.half_max(|y| m.cds_payoff(y), x));
    }
    match opts.representation {
        Representation::Direct => cds_direct(m, &legs, tau, x, opts),
        Representation::Regularized => cds_regularized(m, &legs, tau, x, opts),
    }
}

/// `X₁` breakpoints of the terminal payoffs at height `x2`.
fn terminal_x1_breaks(m: &TwoBankModel, x2: f64) -> Vec<f64> {
    let b = &m.bounds;
    let mut v = vec![m.survive_cut1(x2), b.mu_eq[0], b.mu_tilde_eq[0]];
    let s2 = m.survive_cut2_in_x1(x2);
    if s2.is_finite() {
        v.push(s2);
    }
    v
}

fn cds_direct(m: &TwoBankModel, legs: &Legs, tau: f64, x: [f64; 2], opts: &PricingOptions) -> Result<f64> {
    let b = &m.bounds;
    let loss = legs.post.loss;
    let tol = Tolerances::new(opts.quad_tol);
    let kernel = WedgeKernel::new(&m.geom, &opts.budget, tau, x);
    let x1_hi = m.x1_always_survives();
    let terminal = region_integral(
        &kernel,
        (0.0, m.x2_always_survives()),
        &[b.mu_eq[1]],
        |_| (0.0, x1_hi),
        |x2| terminal_x1_breaks(m, x2),
        |y| m.cds_payoff(y) - if y[0] < b.mu_eq[0] { loss } else { 0.0 },
        &tol,
    )?;
    let edge = edge2_flux_integral(
        &m.geom,
        &opts.budget,
        x,
        tau,
        |rem, x1| legs.psi(rem, x1) - legs.c_inf(rem, x1),
        &[b.mu_tilde_lt[0], b.mu_eq[0], b.mu_tilde_eq[0]],
        &tol,
    )?;
    Ok(legs.c_inf(tau, x[0]) + terminal + edge)
}

fn cds_regularized(m: &TwoBankModel, legs: &Legs, tau: f64, x: [f64; 2], opts: &PricingOptions) -> Result<f64> {
    let b = &m.bounds;
    let loss = legs.post.loss;
    let coupon = legs.post.coupon_bar;
    let rho = m.geom.rho;
    let xi2 = m.geom.xi[1];
    let mu_lt = b.mu_tilde_lt[0];
    let inv_m2 = match opts.lift_height {
        Some(h) if h > 0.0 => 1.0 / h,
        Some(h) => return Err(Error::Domain(format!("lift height must be positive, got {h}"))),
        None => 0.0,
    };
    let w = |x2: f64| x2 * inv_m2;
    let lift = |tt: f64, y: [f64; 2]| w(y[1]) * legs.c_inf(tt, y[0]) + (1.0 - w(y[1])) * legs.psi(tt, y[0]);
    let tol = Tolerances::new(opts.quad_tol);
    let kernel = WedgeKernel::new(&m.geom, &opts.budget, tau, x);
    let x1_hi = m.x1_always_survives().max(b.mu_tilde_eq[0]);
    let terminal = region_integral(
        &kernel,
        (0.0, f64::INFINITY),
        &[b.mu_eq[1], m.x2_always_survives()],
        |_| (0.0, x1_hi),
        |x2| terminal_x1_breaks(m, x2),
        |y| {
            let h =
                w(y[1]) * if y[0] < b.mu_eq[0] { loss } else { 0.0 } + (1.0 - w(y[1])) * if y[0] < b.mu_tilde_eq[0] { loss } else { 0.0 };
            m.cds_payoff(y) - h
        },
        &tol,
    )?;

    // source of the lifted problem, split into the part supported below μ̃^<, the
    // kink of Ψ at μ̃^< and the coupling terms proportional to 1/M₂
    let slot = ErrorSlot::new();
    let source = time_integral(
        tau,
        |u| {
            let k = WedgeKernel::new(&m.geom, &opts.budget, u, x);
            let rem = tau - u;
            let mut s = slot.take(region_integral(
                &k,
                (0.0, f64::INFINITY),
                &[],
                |_| (0.0, mu_lt),
                |_| Vec::new(),
                |y| coupon * (1.0 - w(y[1])),
                &tol,
            ));
            let (a, c) = k.x2_window(mu_lt);
            if c > a {
                let kink = legs.post.price_dx(rem, mu_lt);
                let line = integrate(|x2| (1.0 - w(x2)) * slot.take(k.density([mu_lt, x2])), a, c, &[], &tol.inner).value;
                s -= 0.5 * kink * line;
            }
            if inv_m2 != 0.0 {
                s -= slot.take(region_integral(
                    &k,
                    (0.0, f64::INFINITY),
                    &[],
                    |_| (0.0, f64::INFINITY),
                    |_| vec![mu_lt, b.mu_eq[0], b.mu_tilde_eq[0]],
                    |y| {
                        let d = legs.standalone.price_dx(rem, y[0]) - legs.psi_dx(rem, y[0]);
                        let v = legs.c_inf(rem, y[0]) - legs.psi(rem, y[0]);
                        inv_m2 * (rho * d + xi2 * v)
                    },
                    &tol,
                ));
            }
            s
        },
        &tol.outer,
    );
    let source = slot.check(source)?;
    Ok(lift(tau, x) + terminal - source)
}

/// First-to-default swap at nondimensional time `t` and point `x`.
pub fn ftd_2d(model: &TwoBankModel, t: f64, x: [f64; 2], spec: &ContractSpec, opts: &PricingOptions) -> Result<f64> {
    spec.validate()?;
    check_point(x)?;
    let tau = time_to_maturity(model, t)?;
    let (m, x) = oriented(model, spec.reference, x)?;
    let m = m.as_ref();
    let legs = Legs::new(m, 0, spec.coupon);
    let r = [m.net.recovery[0], m.net.recovery[1]];
    if x[0] == 0.0 {
        return Ok(1.0 - r[0]);
    }
    if x[1] == 0.0 {
        return Ok(1.0 - r[1]);
    }
    if tau == 0.0 {
        return Ok(m.half_max(|y| m.ftd_payoff(y), x));
    }
    match opts.representation {
        Representation::Direct => ftd_direct(m, &legs, tau, x, opts),
        Representation::Regularized => ftd_regularized(m, tau, x, spec.coupon, opts),
    }
}

fn ftd_direct(m: &TwoBankModel, legs: &Legs, tau: f64, x: [f64; 2], opts: &PricingOptions) -> Result<f64> {
    let b = &m.bounds;
    let loss1 = 1.0 - m.net.recovery[0];
    let loss2 = 1.0 - m.net.recovery[1];
    let tol = Tolerances::new(opts.quad_tol);
    let kernel = WedgeKernel::new(&m.geom, &opts.budget, tau, x);
    let terminal = region_integral(
        &kernel,
        (0.0, m.x2_always_survives()),
        &[b.mu_eq[1]],
        |_| (0.0, f64::INFINITY),
        |x2| terminal_x1_breaks(m, x2),
        |y| m.ftd_payoff(y) - if y[0] < b.mu_eq[0] { loss1 } else { 0.0 },
        &tol,
    )?;
    let edge = edge2_flux_integral(&m.geom, &opts.budget, x, tau, |rem, x1| loss2 - legs.c_inf(rem, x1), &[b.mu_eq[0]], &tol)?;
    Ok(legs.c_inf(tau, x[0]) + terminal + edge)
}

/// The lift is linear in the polar angle, `h = (1 − R₁) + (R₁ − R₂)φ/ϖ`, which matches
/// both edge values and is annihilated by the diffusion part of the generator, so only
/// the drift `ξ·∇φ` enters the source.
fn ftd_regularized(m: &TwoBankModel, tau: f64, x: [f64; 2], coupon: f64, opts: &PricingOptions) -> Result<f64> {
    let b = &m.bounds;
    let g = &m.geom;
    let r = [m.net.recovery[0], m.net.recovery[1]];
    let slope = (r[0] - r[1]) / g.varpi;
    let lift = |y: [f64; 2]| (1.0 - r[0]) + slope * g.polar(y).1;
    let coupon_bar = coupon / (b.omega * b.omega);
    let tol = Tolerances::new(opts.quad_tol);
    let kernel = WedgeKernel::new(g, &opts.budget, tau, x);
    let terminal = region_integral(
        &kernel,
        (0.0, f64::INFINITY),
        &[b.mu_eq[1], m.x2_always_survives()],
        |_| (0.0, f64::INFINITY),
        |x2| terminal_x1_breaks(m, x2),
        |y| m.ftd_payoff(y) - lift(y),
        &tol,
    )?;
    let slot = ErrorSlot::new();
    let source = time_integral(
        tau,
        |u| {
            let k = WedgeKernel::new(g, &opts.budget, u, x);
            slot.take(region_integral(
                &k,
                (0.0, f64::INFINITY),
                &[],
                |_| (0.0, f64::INFINITY),
                |_| Vec::new(),
                |y| coupon_bar - slope * g.xi_dot_grad_phi(y),
                &tol,
            ))
        },
        &tol.outer,
    );
    let source = slot.check(source)?;
    Ok(lift(x) + terminal - source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BankNetwork;

    fn base_model() -> TwoBankModel {
        let net = BankNetwork::two_bank([300.0, 300.0], [60.0, 70.0], 10.0, 15.0, [0.4, 0.45], [1.0, 1.0], 0.5, 1.0).unwrap();
        TwoBankModel::new(&net).unwrap()
    }

    #[test]
    fn expected_survival_time_matches_quadrature() {
        for (tau, x, xi) in [(1.0, 0.7, -0.5), (2.5, 1.3, 0.4), (0.3, 0.05, -1.2), (1.0, 0.9, 1e-8)] {
            let want = integrate(|s| chi_survival(s, x, 0.0, 0.0, xi), 0.0, tau, &[], &QuadOptions::new(1e-15, 1e-13)).value;
            assert!((expected_survival_time(tau, x, xi) - want).abs() < 1e-12, "{tau} {x} {xi}");
            let h = 1e-6;
            let fd = (expected_survival_time(tau, x + h, xi) - expected_survival_time(tau, x - h, xi)) / (2.0 * h);
            assert!((expected_survival_time_dx(tau, x, xi) - fd).abs() < 1e-7, "{tau} {x} {xi}");
        }
    }

    #[test]
    fn leg_limits() {
        let m = base_model();
        let mut spec = ContractSpec::cds(0, 0.02);
        let far = cds_1d(&m, 0.0, 40.0, CdsVariant::Standalone, &spec).unwrap();
        assert!((far + 0.02).abs() < 1e-12);
        // full recovery leaves only the premium leg
        let mut net = m.net.clone();
        net.recovery = vec![1.0, 0.45];
        let full = TwoBankModel::new(&net).unwrap();
        let c = cds_1d(&full, 0.0, 1.0, CdsVariant::Standalone, &spec).unwrap();
        assert!((c + 0.02 * expected_survival_time(1.0, 1.0, -0.5)).abs() < 1e-14);
        spec.coupon = 0.0;
        let p = cds_1d(&m, 0.0, 1.0, CdsVariant::PostDefault, &spec).unwrap();
        let chi = chi_survival(1.0, 1.0, m.bounds.mu_tilde_lt[0], m.bounds.mu_tilde_eq[0], -0.5);
        assert!((p - 0.6 * (1.0 - chi)).abs() < 1e-14);
        assert_eq!(cds_1d(&m, 0.0, 0.5, CdsVariant::PostDefault, &spec).unwrap(), 0.6);
    }

    /// Crank–Nicolson on `c_τ = ½c'' + ξc' − ς` with `c = 1 − R` at the barrier.
    fn crank_nicolson(leg: &Leg1D, tau: f64, x: f64) -> f64 {
        let (lo, hi) = (leg.barrier, leg.barrier + 12.0);
        let n = 2400;
        let h = (hi - lo) / n as f64;
        let steps = 2000;
        let dt = tau / steps as f64;
        let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let mut c: Vec<f64> = grid
            .iter()
            .map(|&y| {
                if y < leg.strike {
                    leg.loss
                } else if y == leg.strike {
                    0.5 * leg.loss
                } else {
                    0.0
                }
            })
            .collect();
        c[0] = leg.loss;
        let a = 0.5 / (h * h) - leg.xi / (2.0 * h);
        let d = -1.0 / (h * h);
        let e = 0.5 / (h * h) + leg.xi / (2.0 * h);
        let mut t_now = 0.0;
        for step in 0..steps {
            // two implicit Euler half steps first to damp the payoff discontinuity
            let theta = if step < 4 { 1.0 } else { 0.5 };
            let k = if step < 4 { dt / 2.0 } else { dt };
            let reps = if step < 4 { 2 } else { 1 };
            for _ in 0..reps {
                let mut rhs = vec![0.0; n + 1];
                for i in 1..n {
                    let l = a * c[i - 1] + d * c[i] + e * c[i + 1];
                    rhs[i] = c[i] + (1.0 - theta) * k * l - k * leg.coupon_bar;
                }
                let upper = -leg.coupon_bar * (t_now + k);
                let (mut sub, mut diag, mut sup) = (vec![0.0; n + 1], vec![1.0; n + 1], vec![0.0; n + 1]);
                for i in 1..n {
                    sub[i] = -theta * k * a;
                    diag[i] = 1.0 - theta * k * d;
                    sup[i] = -theta * k * e;
                }
                rhs[0] = leg.loss;
                rhs[n] = upper;
                for i in 1..=n {
                    let w = sub[i] / diag[i - 1];
                    diag[i] -= w * sup[i - 1];
                    rhs[i] -= w * rhs[i - 1];
                }
                c[n] = rhs[n] / diag[n];
                for i in (0..n).rev() {
                    c[i] = (rhs[i] - sup[i] * c[i + 1]) / diag[i];
                }
                t_now += k;
            }
        }
        let i = ((x - lo) / h) as usize;
        let f = (x - grid[i]) / h;
        c[i] * (1.0 - f) + c[i + 1] * f
    }

    #[test]
    fn closed_form_leg_matches_crank_nicolson() {
        let m = base_model();
        let legs = Legs::new(&m, 0, 0.02);
        for leg in [legs.standalone, legs.post] {
            let x = 1.0;
            let cf = leg.price(1.0, x);
            let fd = crank_nicolson(&leg, 1.0, x);
            assert!((cf - fd).abs() < 1e-4, "{cf} vs {fd}");
        }
    }

    #[test]
    fn terminal_payoff_in_asset_space() {
        let m = base_model();
        let spec = ContractSpec::cds(0, 0.02);
        let a = [20.0, 10.0];
        let gamma2: f64 = (70.0 * 10.0 + 10.0 * 20.0) / 5800.0;
        let r1 = ((20.0 + gamma2 * 15.0) / (60.0 + gamma2 * 10.0)).min(1.0);
        assert!((gamma2 - 0.155_172_413_793_103_4).abs() < 1e-12);
        assert!((cds_terminal_payoff(&m, a, &spec).unwrap() - (1.0 - r1.min(0.4))).abs() < 1e-14);
        assert_eq!(cds_terminal_payoff(&m, [200.0, 200.0], &spec).unwrap(), 0.0);
        let d1 = [200.0, 30.0];
        assert!((ftd_terminal_payoff(&m, d1) - 0.55).abs() < 1e-14);
        let on2 = cds_terminal_payoff(&m, [200.0, 30.0], &ContractSpec::cds(1, 0.02)).unwrap();
        assert!((on2 - 0.55).abs() < 1e-14);
    }

    #[test]
    fn edge_values_are_reproduced() {
        let m = base_model();
        let spec = ContractSpec::cds(0, 0.02);
        let opts = PricingOptions { quad_tol: 1e-6, representation: Representation::Regularized, ..PricingOptions::default() };
        let legs = Legs::new(&m, 0, 0.02);
        assert_eq!(cds_2d(&m, 0.0, [0.0, 1.0], &spec, &opts).unwrap(), 0.6);
        assert_eq!(cds_2d(&m, 0.0, [1.3, 0.0], &spec, &opts).unwrap(), legs.psi(1.0, 1.3));
        let f = ContractSpec::ftd(0.02);
        assert_eq!(ftd_2d(&m, 0.0, [0.0, 1.0], &f, &opts).unwrap(), 0.6);
        assert_eq!(ftd_2d(&m, 0.0, [1.0, 0.0], &f, &opts).unwrap(), 0.55);
        // approaching the edge, the regularized price tends to the edge data
        let near = cds_2d(&m, 0.0, [1.3, 1e-4], &spec, &opts).unwrap();
        assert!((near - legs.psi(1.0, 1.3)).abs() < 1e-3, "{near}");
        let near = ftd_2d(&m, 0.0, [1.3, 1e-4], &f, &opts).unwrap();
        assert!((near - 0.55).abs() < 1e-3, "{near}");
    }

    #[test]
    fn representations_agree_in_the_interior() {
        let m = base_model();
        let spec = ContractSpec::cds(0, 0.02);
        let x = [1.2, 0.9];
        let tol = 1e-6;
        let reg = |h: Option<f64>| {
            let o =
                PricingOptions { quad_tol: tol, lift_height: h, representation: Representation::Regularized, ..PricingOptions::default() };
            cds_2d(&m, 0.0, x, &spec, &o).unwrap()
        };
        let direct = cds_2d(
            &m,
            0.0,
            x,
            &spec,
            &PricingOptions { quad_tol: tol, representation: Representation::Direct, ..PricingOptions::default() },
        )
        .unwrap();
        let inf = reg(None);
        let m6 = reg(Some(6.0));
        assert!((inf - direct).abs() < 1e-6, "{inf} vs {direct}");
        assert!((m6 - direct).abs() < 1e-6, "{m6} vs {direct}");
        let f = ContractSpec::ftd(0.02);
        let fd =
            ftd_2d(&m, 0.0, x, &f, &PricingOptions { quad_tol: tol, representation: Representation::Direct, ..PricingOptions::default() })
                .unwrap();
        let fr = ftd_2d(
            &m,
            0.0,
            x,
            &f,
            &PricingOptions { quad_tol: tol, representation: Representation::Regularized, ..PricingOptions::default() },
        )
        .unwrap();
        assert!((fd - fr).abs() < 1e-6, "{fd} vs {fr}");
        assert!(fd >= inf);
    }

    #[test]
    fn price_bounds() {
        let m = base_model();
        let opts = PricingOptions { quad_tol: 1e-6, representation: Representation::Direct, ..PricingOptions::default() };
        for x in [[0.3, 0.3], [1.0, 2.0], [2.5, 0.4], [3.0, 3.0]] {
            let c = cds_2d(&m, 0.0, x, &ContractSpec::cds(0, 0.02), &opts).unwrap();
            let c2 = cds_2d(&m, 0.0, x, &ContractSpec::cds(1, 0.02), &opts).unwrap();
            let f = ftd_2d(&m, 0.0, x, &ContractSpec::ftd(0.02), &opts).unwrap();
            assert!((-0.02 - 1e-9..=0.6 + 1e-9).contains(&c), "{x:?} {c}");
            assert!((-0.02 - 1e-9..=0.55 + 1e-9).contains(&c2), "{x:?} {c2}");
            // 1 − R₁ ≥ 1 − R₂, so the first-to-default leg dominates the CDS on bank 2;
            // it need not dominate bank 1's CDS before maturity, since a first default
            // of bank 2 settles at the smaller loss 1 − R₂
            assert!(f >= c2 - 1e-7 && f <= 0.6 + 1e-9, "{x:?} {f} {c} {c2}");
        }
    }

    #[test]
    fn far_field_is_pure_premium() {
        let m = base_model();
        let opts = PricingOptions { representation: Representation::Direct, ..PricingOptions::default() };
        let c = cds_2d(&m, 0.0, [14.0, 14.0], &ContractSpec::cds(0, 0.02), &opts).unwrap();
        assert!((c + 0.02).abs() < 1e-9, "{c}");
    }
}
