//! The two-bank model in nondimensional coordinates: spot, terminal regions and payoffs.
//!
//! Every threshold is homogeneous of degree one in the liabilities and the coordinates
//! measure assets relative to `λ^<(t)`, so the risk-free rate cancels. The model keeps a
//! copy of the network with `rate = 0` and does all currency arithmetic at `t = 0` values.

use crate::clearing::{classify_terminal_region, Region};
use crate::error::{Error, Result};
use crate::greens::WedgeGeometry;
use crate::network::{terminal_boundary_curve, BankNetwork, BoundarySet};

#[derive(Debug, Clone)]
pub struct TwoBankModel {
    pub net: BankNetwork,
    pub bounds: BoundarySet,
    pub geom: WedgeGeometry,
    /// `X′` implied by the network's asset values.
    pub spot: [f64; 2],
    /// `T̄ = ω² T`.
    pub maturity_bar: f64,
    totals: [f64; 2],
    l12: f64,
    l21: f64,
    /// `L₁L₂ + L₁₂L₂ + L₁L₂₁`, the determinant of the two-bank clearing system.
    delta: f64,
}

impl TwoBankModel {
    pub fn new(net: &BankNetwork) -> Result<Self> {
        net.validate()?;
        if net.n_banks() != 2 {
            return Err(Error::Domain(format!("pricing is implemented for two banks, got {}", net.n_banks())));
        }
        let mut net = net.clone();
        net.rate = 0.0;
        let bounds = BoundarySet::new(&net, 0.0)?;
        let geom = WedgeGeometry::new(net.rho(), bounds.xi)?;
        let mut spot = [0.0; 2];
        for i in 0..2 {
            let a = net.assets[i];
            if !(a > bounds.lambda_lt[i]) {
                return Err(Error::Domain(format!(
                    "bank {} starts at or below its default boundary (A = {a}, λ^< = {})",
                    i + 1,
                    bounds.lambda_lt[i]
                )));
            }
            spot[i] = bounds.omega / net.sigma[i] * (a / bounds.lambda_lt[i]).ln();
        }
        let totals = [net.total_liabilities(0, 0.0), net.total_liabilities(1, 0.0)];
        let (l1, l2) = (net.liabilities[0], net.liabilities[1]);
        let (l12, l21) = (net.mutual[0][1], net.mutual[1][0]);
        Ok(Self {
            maturity_bar: bounds.omega * bounds.omega * net.maturity,
            delta: l1 * l2 + l12 * l2 + l1 * l21,
            bounds,
            geom,
            spot,
            totals,
            l12,
            l21,
            net,
        })
    }

    /// Same model with the roles of the banks exchanged.
    pub fn swapped(&self) -> Result<Self> {
        Self::new(&self.net.swapped())
    }

    /// Model at a different volatility/correlation triple, other inputs unchanged.
    pub fn with_dynamics(&self, sigma: [f64; 2], rho: f64) -> Result<Self> {
        let mut net = self.net.clone();
        net.sigma = sigma.to_vec();
        net.correlation = vec![vec![1.0, rho], vec![rho, 1.0]];
        Self::new(&net)
    }

    pub fn omega(&self) -> f64 {
        self.bounds.omega
    }

    /// `τ′ = ω²(T − t)` for calendar valuation time `t`.
    pub fn tau_bar(&self, t: f64) -> f64 {
        self.bounds.omega * self.bounds.omega * (self.net.maturity - t)
    }

    pub fn x_to_a(&self, i: usize, x: f64) -> f64 {
        self.bounds.lambda_lt[i] * (self.net.sigma[i] * x / self.bounds.omega).exp()
    }

    /// Inverse of [`x_to_a`](Self::x_to_a); `-∞` for non-positive assets.
    pub fn a_to_x(&self, i: usize, a: f64) -> f64 {
        if a <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.bounds.omega / self.net.sigma[i] * (a / self.bounds.lambda_lt[i]).ln()
    }

    /// `μ̃_{1,T}(X₂)`: bank 1 survives maturity iff `X₁ ≥` this value.
    pub fn survive_cut1(&self, x2: f64) -> f64 {
        self.a_to_x(0, terminal_boundary_curve(&self.net, 0, self.x_to_a(1, x2)))
    }

    /// `μ̃_{2,T}(X₁)`: bank 2 survives maturity iff `X₂ ≥` this value.
    pub fn survive_cut2(&self, x1: f64) -> f64 {
        self.a_to_x(1, terminal_boundary_curve(&self.net, 1, self.x_to_a(0, x1)))
    }

    /// Bank 2 survives maturity iff `X₁ ≥` the returned value (`+∞` when it cannot survive
    /// at this `X₂`, `0` when it always does).
    pub fn survive_cut2_in_x1(&self, x2: f64) -> f64 {
        let a2 = self.x_to_a(1, x2);
        let eq2 = self.bounds.lambda_eq[1];
        if a2 < eq2 {
            return f64::INFINITY;
        }
        if self.l12 == 0.0 || a2 >= terminal_boundary_curve(&self.net, 1, 0.0) {
            return 0.0;
        }
        let a1 = (self.totals[1] - a2) * self.totals[0] / self.l12 - self.l21;
        self.a_to_x(0, a1).max(0.0)
    }

    /// `X₂` above which bank 2 survives whatever bank 1 does.
    pub fn x2_always_survives(&self) -> f64 {
        self.a_to_x(1, terminal_boundary_curve(&self.net, 1, 0.0))
    }

    /// `X₁` above which bank 1 survives whatever bank 2 does.
    pub fn x1_always_survives(&self) -> f64 {
        self.a_to_x(0, terminal_boundary_curve(&self.net, 0, 0.0))
    }

    pub fn region(&self, x: [f64; 2]) -> Region {
        classify_terminal_region(&self.net, self.to_a(x))
    }

    /// Terminal payments when both banks default: the two-bank closed form of the
    /// clearing vector.
    pub fn clearing_both_default(&self, a: [f64; 2]) -> [f64; 2] {
        let g1 = (self.totals[1] * a[0] + self.l21 * a[1]) / self.delta;
        let g2 = (self.totals[0] * a[1] + self.l12 * a[0]) / self.delta;
        [g1.clamp(0.0, 1.0), g2.clamp(0.0, 1.0)]
    }

    /// `R̃_{i,T}(γ_other)`.
    fn eff_recovery(&self, i: usize, a_i: f64, gamma_other: f64) -> f64 {
        let (owed_in, owed_out) = if i == 0 { (self.l21, self.l12) } else { (self.l12, self.l21) };
        let den = self.net.liabilities[i] + gamma_other * owed_out;
        if den <= 0.0 {
            return 1.0;
        }
        ((a_i + gamma_other * owed_in) / den).min(1.0)
    }

    fn default_losses(&self, a: [f64; 2]) -> (Region, [f64; 2]) {
        let region = classify_terminal_region(&self.net, a);
        let r = [self.net.recovery[0], self.net.recovery[1]];
        let loss = |i: usize, gamma_other: f64| 1.0 - self.eff_recovery(i, a[i], gamma_other).min(r[i]);
        let losses = match region {
            Region::D12 => [0.0, 0.0],
            Region::D1 => [0.0, loss(1, 1.0)],
            Region::D2 => [loss(0, 1.0), 0.0],
            Region::DHat => {
                let g = self.clearing_both_default(a);
                [loss(0, g[1]), loss(1, g[0])]
            }
        };
        (region, losses)
    }

    fn to_a(&self, x: [f64; 2]) -> [f64; 2] {
        [self.x_to_a(0, x[0]), self.x_to_a(1, x[1])]
    }

    /// Protection payoff of a CDS on bank 1 at maturity: `α₁` on `D̂ ∪ D₂`, else 0.
    pub fn cds_payoff(&self, x: [f64; 2]) -> f64 {
        self.cds_payoff_assets(self.to_a(x))
    }

    /// [`cds_payoff`](Self::cds_payoff) at terminal asset values.
    pub fn cds_payoff_assets(&self, a: [f64; 2]) -> f64 {
        self.default_losses(a).1[0]
    }

    /// Protection payoff of the first-to-default swap at maturity.
    pub fn ftd_payoff(&self, x: [f64; 2]) -> f64 {
        self.ftd_payoff_assets(self.to_a(x))
    }

    /// [`ftd_payoff`](Self::ftd_payoff) at terminal asset values.
    pub fn ftd_payoff_assets(&self, a: [f64; 2]) -> f64 {
        let (region, l) = self.default_losses(a);
        match region {
            Region::D12 => 0.0,
            Region::D1 => l[1],
            Region::D2 => l[0],
            Region::DHat => l[0].max(l[1]),
        }
    }

    /// Indicator that bank 1 survives maturity (`D12 ∪ D1`).
    pub fn bank1_survives(&self, x: [f64; 2]) -> f64 {
        f64::from(u8::from(matches!(self.region(x), Region::D12 | Region::D1)))
    }

    pub fn both_survive(&self, x: [f64; 2]) -> f64 {
        f64::from(u8::from(self.region(x) == Region::D12))
    }

    /// Half-maximum sampling of a discontinuous terminal function: the average over
    /// four points displaced diagonally by `1e-9`.
    pub fn half_max(&self, f: impl Fn([f64; 2]) -> f64, x: [f64; 2]) -> f64 {
        let h = 1e-9;
        0.25 * (f([x[0] - h, x[1] - h]) + f([x[0] + h, x[1] - h]) + f([x[0] - h, x[1] + h]) + f([x[0] + h, x[1] + h]))
    }
}
