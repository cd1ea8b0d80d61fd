//! Joint and marginal survival probabilities, and the closed-form quadrant integral.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::{chi_survival, kernel_mass, SeriesBudget, WedgeGeometry, WedgeKernel};
use crate::integrals::{edge2_flux_integral, region_integral, Tolerances};
use crate::model::TwoBankModel;
use crate::quad::QuadOptions;
use crate::specfun::{bessel_i_scaled, hyp2f1, hyp3f3, ln_gamma, SeriesControl, SpecFunError};

/// Where and how accurately to evaluate a survival probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalRequest {
    /// Nondimensional valuation time `t′ ∈ [0, T̄]`.
    pub t: f64,
    pub x: [f64; 2],
    pub quad_tol: f64,
    pub budget: SeriesBudget,
}

impl SurvivalRequest {
    pub fn new(t: f64, x: [f64; 2]) -> Self {
        Self { t, x, quad_tol: 1e-8, budget: SeriesBudget::default() }
    }

    fn check(&self, model: &TwoBankModel) -> Result<f64> {
        let tau = model.maturity_bar - self.t;
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("valuation time {} is after maturity {}", self.t, model.maturity_bar)));
        }
        if !(self.x[0] >= 0.0 && self.x[1] >= 0.0) {
            return Err(Error::Domain(format!("evaluation point {:?} lies outside the wedge", self.x)));
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::Domain(format!("quad_tol must be positive, got {}", self.quad_tol)));
        }
        Ok(tau)
    }
}

/// `Q(t′, X′)`: probability that both banks survive to maturity.
pub fn joint_survival(model: &TwoBankModel, req: &SurvivalRequest) -> Result<f64> {
    let tau = req.check(model)?;
    if req.x[0] == 0.0 || req.x[1] == 0.0 {
        return Ok(0.0);
    }
    if tau == 0.0 {
        return Ok(model.half_max(|x| model.both_survive(x), req.x));
    }
    let kernel = WedgeKernel::new(&model.geom, &req.budget, tau, req.x);
    region_integral(
        &kernel,
        (0.0, f64::INFINITY),
        &[model.bounds.mu_eq[1], model.x2_always_survives()],
        |x2| (model.survive_cut1(x2).max(model.survive_cut2_in_x1(x2)), f64::INFINITY),
        |_| Vec::new(),
        |_| 1.0,
        &Tolerances::new(req.quad_tol),
    )
}

/// `q₁(t′, X′)`: probability that bank 1 survives to maturity.
///
/// Computed as `χ_{1,∞}` corrected by the terminal strip where bank 1 fails only because
/// bank 2 has failed, and by the boundary flux through `X₂ = 0`, where bank 1 continues
/// with the post-default thresholds.
pub fn marginal_survival(model: &TwoBankModel, req: &SurvivalRequest) -> Result<f64> {
    let tau = req.check(model)?;
    let b = &model.bounds;
    let xi1 = b.xi[0];
    if req.x[0] == 0.0 {
        return Ok(0.0);
    }
    if tau == 0.0 {
        return Ok(model.half_max(|x| model.bank1_survives(x), req.x));
    }
    let chi_inf = |tt: f64, x1: f64| chi_survival(tt, x1, 0.0, b.mu_eq[0], xi1);
    let xi_edge = |tt: f64, x1: f64| {
        if x1 > b.mu_tilde_lt[0] {
            chi_survival(tt, x1, b.mu_tilde_lt[0], b.mu_tilde_eq[0], xi1)
        } else {
            0.0
        }
    };
    if req.x[1] == 0.0 {
        return Ok(xi_edge(tau, req.x[0]));
    }
    let tol = Tolerances::new(req.quad_tol);
    let kernel = WedgeKernel::new(&model.geom, &req.budget, tau, req.x);
    let strip = region_integral(&kernel, (0.0, b.mu_eq[1]), &[], |x2| (b.mu_eq[0], model.survive_cut1(x2)), |_| Vec::new(), |_| 1.0, &tol)?;
    let edge = edge2_flux_integral(
        &model.geom,
        &req.budget,
        req.x,
        tau,
        |rem, x1| xi_edge(rem, x1) - chi_inf(rem, x1),
        &[b.mu_tilde_lt[0], b.mu_eq[0], b.mu_tilde_eq[0]],
        &tol,
    )?;
    Ok(chi_inf(tau, req.x[0]) - strip + edge)
}

/// Parameters of the closed-form series for `∫∫ G dX` over the whole wedge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantSeriesParams {
    /// `κ = −ξ·θ ϑ/2 − R′²/(2ϑ) − ⟨X′, θ⟩`.
    pub kappa: f64,
    /// `α = 1/(2ϑ)`.
    pub alpha: f64,
    /// `β = R′/ϑ`.
    pub beta: f64,
    /// `(θ̄₁, θ̄₂) = ((θ₁ + ρθ₂)/β, ρ̄θ₂/β)`.
    pub theta_bar: [f64; 2],
    /// Source angle `φ′`.
    pub phi_src: f64,
    pub tt: f64,
    pub max_modes: usize,
    pub max_order: usize,
}

impl QuadrantSeriesParams {
    pub fn new(geom: &WedgeGeometry, tt: f64, xp: [f64; 2]) -> Result<Self> {
        if !(tt > 0.0) || !(xp[0] > 0.0 && xp[1] > 0.0) {
            return Err(Error::Domain(format!("quadrant series needs ϑ > 0 and an interior source, got ϑ = {tt}, X′ = {xp:?}")));
        }
        let (r, phi) = geom.polar(xp);
        let th = geom.theta;
        let beta = r / tt;
        Ok(Self {
            kappa: -0.5 * geom.xi_theta() * tt - r * r / (2.0 * tt) - (xp[0] * th[0] + xp[1] * th[1]),
            alpha: 1.0 / (2.0 * tt),
            beta,
            theta_bar: [(th[0] + geom.rho * th[1]) / beta, geom.rho_bar * th[1] / beta],
            phi_src: phi,
            tt,
            max_modes: 60,
            max_order: 60,
        })
    }
}

/// Result of [`quadrant_integral_closed_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantSeries {
    pub value: f64,
    /// Largest imaginary part left by the complex-form angular integrals, relative to
    /// the bound `ϖ(2|θ̄|)^m` on the integral.
    pub imag_residue: f64,
    pub modes: usize,
    /// Set when the series could not be trusted and adaptive quadrature was used instead.
    pub fallback: bool,
}

/// `∫₀^ϖ sin(νφ)(θ̄₁ sinφ + θ̄₂ cosφ)^m dφ` as real part and imaginary residue.
///
/// With `P = (θ̄₂ + iθ̄₁)/2` and `q = P̄/P` the power expands in `e^{2ijφ}`, and each
/// exponential sum collapses to a terminating Gauss series
/// `e^{ibφ}/(ib) ₂F₁(−m, b/2; b/2 + 1; −q e^{2iφ})`, `b = ±ν − m`. When some `b + 2j`
/// vanishes the binomial sum is used directly.
pub fn angular_integral(nu: f64, m: usize, theta_bar: [f64; 2], varpi: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Ok(((1.0 - (nu * varpi).cos()) / nu, 0.0));
    }
    let p = Complex64::new(theta_bar[1], theta_bar[0]) * 0.5;
    if p.norm() == 0.0 {
        return Ok((0.0, 0.0));
    }
    let q = p.conj() / p;
    let ctl = SeriesControl::default();
    let i = Complex64::i();
    let mf = m as f64;
    let antider = |b: f64, phi: f64| -> Result<Complex64> {
        let e = (i * b * phi).exp();
        let z = -q * (2.0 * i * phi).exp();
        Ok(e / (i * b) * hyp2f1(-mf, 0.5 * b, 0.5 * b + 1.0, z, &ctl)?)
    };
    let exp_sum = |b: f64| -> Result<Complex64> {
        let resonant = (0..=m).any(|j| (b + 2.0 * j as f64).abs() < 1e-6);
        if resonant {
            let mut s = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            for j in 0..=m {
                let w = b + 2.0 * j as f64;
                let int = if w.abs() < 1e-6 { Complex64::new(varpi, 0.0) } else { ((i * w * varpi).exp() - 1.0) / (i * w) };
                s += q.powu(j as u32) * binom * int;
                binom *= (mf - j as f64) / (j as f64 + 1.0);
            }
            Ok(s)
        } else {
            Ok(antider(b, varpi)? - antider(b, 0.0)?)
        }
    };
    let v = p.powu(m as u32) / (2.0 * i) * (exp_sum(nu - mf)? - exp_sum(-nu - mf)?);
    Ok((v.re, v.im))
}

/// Explicit form of [`angular_integral`] at `m = 1`.
pub fn angular_integral_m1(n: usize, theta_bar: [f64; 2], varpi: f64) -> f64 {
    let pn = PI * n as f64;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    pn * varpi / (varpi * varpi - pn * pn) * (sign * (theta_bar[0] * varpi.sin() + theta_bar[1] * varpi.cos()) - theta_bar[1])
}

/// Explicit form of [`angular_integral`] at `m = 2`.
pub fn angular_integral_m2(n: usize, theta_bar: [f64; 2], varpi: f64) -> f64 {
    let pn = PI * n as f64;
    let w = varpi;
    let (t1, t2) = (theta_bar[0], theta_bar[1]);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let s2 = t1 * t1 + t2 * t2;
    let bracket = pn * pn * ((t1 * t1 - t2 * t2) * (2.0 * w).cos() - 2.0 * t1 * t2 * (2.0 * w).sin()) - s2 * (pn * pn - 4.0 * w * w);
    (-4.0 * w.powi(3) * s2 + 2.0 * pn * pn * t2 * t2 * w + sign * w * bracket) / (2.0 * pn.powi(3) - 8.0 * pn * w * w)
}

/// `ln ∫₀^∞ e^{−αR²} I_a(βR) I_b(βR) dR` through the `₃F₃` identity.
fn ln_radial(a: f64, b: f64, alpha: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    let c = a + b;
    let f = hyp3f3([(c + 1.0) / 2.0, (c + 2.0) / 2.0, (c + 1.0) / 2.0], [a + 1.0, b + 1.0, c + 1.0], beta * beta / alpha, ctl)?;
    Ok(-(c + 1.0) * 2f64.ln() - 0.5 * (c + 1.0) * alpha.ln() + c * beta.ln() + ln_gamma(0.5 * (c + 1.0))
        - ln_gamma(a + 1.0)
        - ln_gamma(b + 1.0)
        + f.ln())
}

/// Chebyshev coefficients: `U_k(x) = Σ_j (−1)^j C(k−j, j) (2x)^{k−2j}`.
fn chebyshev_u_terms(k: usize) -> Vec<(usize, f64)> {
    (0..=k / 2)
        .map(|j| {
            let mut c = 1.0;
            for t in 0..j {
                c *= (k - j - t) as f64 / (t + 1) as f64;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (k - 2 * j, sign * c * 2f64.powi((k - 2 * j) as i32))
        })
        .collect()
}

/// Total wedge mass `∫∫ G(ϑ, X | X′) dX` as a double series in eigenmodes and
/// Chebyshev orders.
///
/// The drift factor `e^{⟨θ, X⟩}` is expanded in `U_k` of the angle with modified Bessel
/// radial weights, each radial integral is a `₃F₃` and each angular integral a
/// terminating `₂F₁`. When a hypergeometric evaluation loses precision the value falls
/// back to adaptive quadrature and the result is flagged.
pub fn quadrant_integral_closed_form(params: &QuadrantSeriesParams, geom: &WedgeGeometry) -> Result<QuadrantSeries> {
    match quadrant_series(params, geom) {
        Ok(r) => Ok(r),
        Err(Error::SpecFun(SpecFunError::PrecisionLoss { .. })) | Err(Error::SeriesNotConverged { .. }) => {
            let xp = source_point(params, geom);
            let kernel = WedgeKernel::series_only(geom, &SeriesBudget::default(), params.tt, xp);
            let value = kernel_mass(&kernel, &QuadOptions::new(1e-13, 1e-10))?;
            Ok(QuadrantSeries { value, imag_residue: 0.0, modes: 0, fallback: true })
        }
        Err(e) => Err(e),
    }
}

fn source_point(params: &QuadrantSeriesParams, geom: &WedgeGeometry) -> [f64; 2] {
    let r = params.beta * params.tt;
    let (s, c) = params.phi_src.sin_cos();
    [r * s, r * (geom.rho_bar * c + geom.rho * s)]
}

fn quadrant_series(params: &QuadrantSeriesParams, geom: &WedgeGeometry) -> Result<QuadrantSeries> {
    let ctl = SeriesControl::default();
    let (alpha, beta) = (params.alpha, params.beta);
    let tb = params.theta_bar;
    let scale_m = (tb[0] * tb[0] + tb[1] * tb[1]).sqrt() * 2.0;
    let kmax = params.max_order;
    let cheb: Vec<Vec<(usize, f64)>> = (0..=kmax).map(chebyshev_u_terms).collect();
    let pre = (2.0 / (geom.varpi * params.tt)).ln() + params.kappa;
    let mut total: f64 = 0.0;
    let mut imag_residue: f64 = 0.0;
    let mut quiet = 0;
    let mut modes = 0;
    for n in 1..=params.max_modes {
        modes = n;
        let nu = geom.nu(n);
        let mut ang = Vec::with_capacity(kmax + 1);
        for m in 0..=kmax {
            let (re, im) = angular_integral(nu, m, tb, geom.varpi)?;
            if m > 0 {
                imag_residue = imag_residue.max(im.abs() / (geom.varpi * scale_m.powi(m as i32)));
            }
            ang.push(re);
        }
        let mut mode_sum = 0.0;
        let mut mode_mag = 0.0;
        let mut small = 0;
        for (k, terms) in cheb.iter().enumerate() {
            let a_kn: f64 = terms.iter().map(|&(m, c)| c * ang[m]).sum();
            let ln_rad = ln_radial(nu, (k + 1) as f64, alpha, beta, &ctl)?;
            let term = (k + 1) as f64 * (2.0 / beta) * a_kn * (pre + ln_rad).exp();
            mode_sum += term;
            mode_mag += term.abs();
            // bound on the order-k term independent of accidental zeros of A_{k,n}
            let bound = (k + 1) as f64 * (2.0 / beta) * geom.varpi * (1.0 + scale_m).powi(k as i32) * (pre + ln_rad).exp();
            // modes can vanish identically (even n without drift), so measure against the total
            let reference = mode_mag.max(total.abs()).max(1e-300);
            if bound <= 1e-16 * reference {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
            if k == kmax && bound > 1e-10 * reference {
                return Err(Error::SeriesNotConverged { n_max: kmax, tail: bound / reference });
            }
        }
        total += (nu * params.phi_src).sin() * mode_sum;
        if mode_mag <= 1e-16 * total.abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        if n == params.max_modes && mode_mag > 1e-12 * total.abs() {
            return Err(Error::SeriesNotConverged { n_max: n, tail: mode_mag / total.abs() });
        }
    }
    Ok(QuadrantSeries { value: total, imag_residue, modes, fallback: false })
}

/// Zero-drift quadrant survival in closed form (first-passage law of planar Brownian
/// motion in a wedge):
/// `P = 2R′/√(2πϑ) e^{−z} Σ_{n odd} sin(ν_nφ′)/n [I_{(ν_n−1)/2}(z) + I_{(ν_n+1)/2}(z)]`,
/// `z = R′²/(4ϑ)`.
pub fn quadrant_survival_zero_drift(geom: &WedgeGeometry, tt: f64, xp: [f64; 2], budget: &SeriesBudget) -> Result<f64> {
    if geom.xi != [0.0, 0.0] {
        return Err(Error::Domain("zero-drift formula called with non-zero drift".into()));
    }
    let (r, phi) = geom.polar(xp);
    let z = r * r / (4.0 * tt);
    let mut sum = 0.0;
    let mut mag = 0.0;
    for n in (1..=2 * budget.n_max).step_by(2) {
        let nu = geom.nu(n);
        let w = bessel_i_scaled(0.5 * (nu - 1.0), z)? + bessel_i_scaled(0.5 * (nu + 1.0), z)?;
        let t = w / n as f64;
        sum += t * (nu * phi).sin();
        mag += t;
        if t <= budget.tail_tol * 1e-3 * mag && nu > 2.0 * z {
            return Ok(2.0 * r / (2.0 * PI * tt).sqrt() * sum);
        }
    }
    Err(Error::SeriesNotConverged { n_max: budget.n_max, tail: sum })
}
