//! Least-squares fit of `(σ₁, σ₂, ρ)` to two CDS quotes and one first-to-default quote.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TwoBankModel;
use crate::network::BankNetwork;
use crate::pricing::{cds_2d, ftd_2d, ContractSpec, PricingOptions};

/// Market quotes at a common maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteSet {
    pub c1: f64,
    pub c2: f64,
    pub f1: f64,
    pub maturity: f64,
    /// CDS coupons; the first-to-default swap pays the first one.
    pub coupons: [f64; 2],
}

impl QuoteSet {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [("C1", self.c1), ("C2", self.c2), ("F1", self.f1)] {
            if !v.is_finite() {
                errs.push(format!("quote {name} = {v} is not finite"));
            }
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            errs.push(format!("quote maturity must be positive, got {}", self.maturity));
        }
        for (i, c) in self.coupons.iter().enumerate() {
            if !(c.is_finite() && *c >= 0.0) {
                errs.push(format!("coupon {} = {c} must be finite and non-negative", i + 1));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(errs))
        }
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.c1, self.c2, self.f1)
    }
}

/// Box constraints on `(σ₁, σ₂, ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self { lower: [0.05, 0.05, -0.95], upper: [2.0, 2.0, 0.95] }
    }
}

impl ParamBounds {
    fn clamp(&self, x: Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub x0: [f64; 3],
    pub bounds: ParamBounds,
    /// Stop once an accepted step lowers the objective by less than this fraction.
    pub objective_tol: f64,
    pub max_iterations: usize,
    pub pricing: PricingOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            x0: [0.5, 0.5, 0.0],
            bounds: ParamBounds::default(),
            objective_tol: 1e-4,
            max_iterations: 100,
            pricing: PricingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub sigma: [f64; 2],
    pub rho: f64,
    /// Sum of squared residuals.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Model minus quote for `(C₁, C₂, F₁)`.
    pub residuals: [f64; 3],
}

/// `(C₁, C₂, F₁)` at `t = 0` and the spot implied by the network's assets.
pub fn price_quotes(net: &BankNetwork, sigma: [f64; 2], rho: f64, coupons: [f64; 2], opts: &PricingOptions) -> Result<[f64; 3]> {
    let mut net = net.clone();
    net.sigma = sigma.to_vec();
    net.correlation = vec![vec![1.0, rho], vec![rho, 1.0]];
    let model = TwoBankModel::new(&net)?;
    let (c1, (c2, f1)) = rayon::join(
        || cds_2d(&model, 0.0, model.spot, &ContractSpec::cds(0, coupons[0]), opts),
        || {
            rayon::join(
                || cds_2d(&model, 0.0, model.spot, &ContractSpec::cds(1, coupons[1]), opts),
                || ftd_2d(&model, 0.0, model.spot, &ContractSpec::ftd(coupons[0]), opts),
            )
        },
    );
    Ok([c1?, c2?, f1?])
}

/// Levenberg–Marquardt with forward-difference Jacobians, projected onto the box.
///
/// Deterministic for fixed inputs. If the iteration budget runs out the best point so
/// far is returned inside [`Error::CalibrationNotConverged`].
pub fn calibrate(net: &BankNetwork, quotes: &QuoteSet, opts: &CalibrationOptions) -> Result<CalibrationResult> {
    quotes.validate()?;
    let mut net = net.clone();
    net.maturity = quotes.maturity;
    net.validate()?;
    let target = quotes.as_vector();
    let residual = |x: &Vector3<f64>| -> Result<Vector3<f64>> {
        let p = price_quotes(&net, [x[0], x[1]], x[2], quotes.coupons, &opts.pricing)?;
        Ok(Vector3::from(p) - target)
    };
    let bounds = &opts.bounds;
    let mut x = bounds.clamp(Vector3::from(opts.x0));
    let mut r = residual(&x)?;
    let mut f = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        if f < 1e-24 {
            converged = true;
            break;
        }
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            // step away from the nearer bound so the probe stays feasible
            let h = 1e-5 * x[k].abs().max(1.0);
            let h = if x[k] + h > bounds.upper[k] { -h } else { h };
            let mut xp = x;
            xp[k] += h;
            jac.set_column(k, &((residual(&xp)? - r) / h));
        }
        let jtj = jac.transpose() * jac;
        let g = jac.transpose() * r;
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = bounds.clamp(x + step);
            let moved = (trial - x).norm();
            let rt = residual(&trial)?;
            let ft = rt.norm_squared();
            if ft < f {
                let drop = (f - ft) / f;
                x = trial;
                r = rt;
                f = ft;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if drop < opts.objective_tol || moved < 1e-10 {
                    converged = true;
                }
                break;
            }
            if moved < 1e-12 {
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at this resolution: a stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    let result = CalibrationResult { sigma: [x[0], x[1]], rho: x[2], objective: f, iterations, converged, residuals: [r[0], r[1], r[2]] };
    if converged {
        Ok(result)
    } else {
        Err(Error::CalibrationNotConverged(Box::new(result)))
    }
}

/// Removes the mutual obligations while keeping each bank's net position.
pub fn adjustment_procedure(net: &BankNetwork) -> Result<BankNetwork> {
    net.adjusted()
}
