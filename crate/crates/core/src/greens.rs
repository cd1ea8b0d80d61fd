//! Transition densities of drifted Brownian motion killed on a half-line (1D) and on
//! the two edges of a wedge (2D), with their edge fluxes and `X₂`-moments.
//!
//! In 2D the process `dX = ξ dt + dW` with `corr(dW₁, dW₂) = ρ` lives in the quadrant
//! `X₁, X₂ > 0`. The map `Y = (X₁, (X₂ − ρX₁)/ρ̄)` whitens it; the quadrant becomes a
//! wedge of opening `ϖ = arccos(−ρ)` and the density is a Bessel–Fourier series in the
//! polar coordinates `(R, φ)` of `Y`. The drift enters only through the Girsanov factor
//! `exp(θ·(X − X′) − ⟨ξ, θ⟩ϑ/2)` with `θ = C⁻¹ξ`.

use std::f64::consts::PI;

use crate::error::{Error, ErrorSlot, Result};
use crate::quad::{integrate, QuadOptions};
use crate::specfun::{bessel_i_scaled, exp_norm_cdf, norm_cdf};

/// Largest correlation magnitude accepted by default; the wedge degenerates as `|ρ| → 1`.
pub const MAX_ABS_RHO: f64 = 0.95;
const LN_TINY: f64 = -740.0;
/// Source distance to an edge, in standard deviations, beyond which that edge is ignored.
const FAR_EDGE_SD: f64 = 8.5;
/// Half-width of the integration window, in standard deviations.
pub const WINDOW_SD: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeGeometry {
    pub rho: f64,
    pub rho_bar: f64,
    pub varpi: f64,
    pub xi: [f64; 2],
    pub theta: [f64; 2],
}

impl WedgeGeometry {
    pub fn new(rho: f64, xi: [f64; 2]) -> Result<Self> {
        if !(rho.abs() <= MAX_ABS_RHO + 1e-12) {
            return Err(Error::Domain(format!("correlation {rho} outside [-{MAX_ABS_RHO}, {MAX_ABS_RHO}]")));
        }
        let rho_bar = (1.0 - rho * rho).sqrt();
        let det = 1.0 - rho * rho;
        let theta = [(xi[0] - rho * xi[1]) / det, (xi[1] - rho * xi[0]) / det];
        Ok(Self { rho, rho_bar, varpi: (-rho).acos(), xi, theta })
    }

    /// Eigen-order `ν_n = nπ/ϖ`.
    pub fn nu(&self, n: usize) -> f64 {
        n as f64 * PI / self.varpi
    }

    /// Polar coordinates `(R, φ)`; `φ = 0` on the edge `X₁ = 0` and `φ = ϖ` on `X₂ = 0`.
    pub fn polar(&self, x: [f64; 2]) -> (f64, f64) {
        let q = x[0] * x[0] - 2.0 * self.rho * x[0] * x[1] + x[1] * x[1];
        let r = q.max(0.0).sqrt() / self.rho_bar;
        let phi = (self.rho_bar * x[0]).atan2(x[1] - self.rho * x[0]);
        (r, phi)
    }

    pub fn xi_theta(&self) -> f64 {
        self.xi[0] * self.theta[0] + self.xi[1] * self.theta[1]
    }

    /// Log of the Girsanov factor between driftless and drifted densities.
    pub fn log_drift(&self, tt: f64, x: [f64; 2], xp: [f64; 2]) -> f64 {
        self.theta[0] * (x[0] - xp[0]) + self.theta[1] * (x[1] - xp[1]) - 0.5 * self.xi_theta() * tt
    }

    pub fn whiten(&self, x: [f64; 2]) -> [f64; 2] {
        [x[0], (x[1] - self.rho * x[0]) / self.rho_bar]
    }

    /// `ξ·∇φ`, the drift acting on the angular coordinate.
    pub fn xi_dot_grad_phi(&self, x: [f64; 2]) -> f64 {
        let (r, _) = self.polar(x);
        (self.xi[0] * x[1] - self.xi[1] * x[0]) / (self.rho_bar * r * r)
    }
}

/// Truncation policy of the eigenmode series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesBudget {
    pub n_max: usize,
    pub tail_tol: f64,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        Self { n_max: 400, tail_tol: 1e-12 }
    }
}

impl SeriesBudget {
    pub fn new(n_max: usize, tail_tol: f64) -> Result<Self> {
        if n_max < 1 || !(tail_tol > 0.0) {
            return Err(Error::schema(format!("series budget needs n_max ≥ 1 and tail_tol > 0, got {n_max}, {tail_tol}")));
        }
        Ok(Self { n_max, tail_tol })
    }
}

/// Density of `X₁` started at `x1p` with drift `xi1`, killed at `barrier`, after time `tt`.
pub fn green_1d(tt: f64, x1: f64, x1p: f64, barrier: f64, xi1: f64) -> f64 {
    if x1 <= barrier || x1p <= barrier {
        return 0.0;
    }
    let s = tt.sqrt();
    let norm = 1.0 / (2.0 * PI * tt).sqrt();
    let direct = -0.5 * ((x1 - x1p - xi1 * tt) / s).powi(2);
    let image = -2.0 * xi1 * (x1p - barrier) - 0.5 * ((x1 + x1p - 2.0 * barrier - xi1 * tt) / s).powi(2);
    norm * (direct.exp() - image.exp())
}

/// Probability that the killed process survives `tau` and ends above `strike`.
///
/// `tau = 0` returns the terminal indicator with value ½ exactly on the strike.
pub fn chi_survival(tau: f64, x1p: f64, barrier: f64, strike: f64, xi1: f64) -> f64 {
    let x = x1p - barrier;
    if x <= 0.0 {
        return 0.0;
    }
    if tau <= 0.0 {
        return match x1p.partial_cmp(&strike) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        };
    }
    let d = (strike - barrier).max(0.0);
    let s = tau.sqrt();
    let a1 = (x - d + xi1 * tau) / s;
    let a2 = (-x - d + xi1 * tau) / s;
    (norm_cdf(a1) - exp_norm_cdf(-2.0 * xi1 * x, a2)).clamp(0.0, 1.0)
}

/// `∂χ/∂x₁′` of [`chi_survival`].
pub fn chi_survival_dx(tau: f64, x1p: f64, barrier: f64, strike: f64, xi1: f64) -> f64 {
    let x = x1p - barrier;
    if x < 0.0 || tau <= 0.0 {
        return 0.0;
    }
    let d = (strike - barrier).max(0.0);
    let s = tau.sqrt();
    let a1 = (x - d + xi1 * tau) / s;
    let a2 = (-x - d + xi1 * tau) / s;
    let e = -2.0 * xi1 * x;
    let phi = |v: f64| (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
    phi(a1) / s + 2.0 * xi1 * exp_norm_cdf(e, a2) + (e - 0.5 * a2 * a2).exp() / ((2.0 * PI).sqrt() * s)
}

/// Precomputed source data for the eigenmode series.
#[derive(Debug, Clone)]
struct SeriesSource {
    r_src: f64,
    sin_src: Vec<f64>,
}

impl SeriesSource {
    fn new(geom: &WedgeGeometry, xp: [f64; 2], n_max: usize) -> Self {
        let (r_src, phi_src) = geom.polar(xp);
        let sin_src = (1..=n_max).map(|n| (geom.nu(n) * phi_src).sin()).collect();
        Self { r_src, sin_src }
    }
}

/// `Σ_n e^{-z} I_{ν_n}(z) · coef(n, ν_n) · sin(ν_n φ′)`, stopped when the bound on the
/// neglected tail falls below `tail_tol` relative to the accumulated magnitudes.
///
/// `mag(ν)` bounds `|coef(n, ν)|`.
fn mode_sum(
    geom: &WedgeGeometry,
    budget: &SeriesBudget,
    z: f64,
    sin_src: &[f64],
    coef: impl Fn(usize, f64) -> f64,
    mag: impl Fn(f64) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut scale = 0.0;
    let mut prev_mag = f64::INFINITY;
    let n_max = budget.n_max.min(sin_src.len());
    let mut e_next = bessel_i_scaled(geom.nu(1), z)?;
    for n in 1..=n_max {
        let nu = geom.nu(n);
        let e = e_next;
        sum += e * coef(n, nu) * sin_src[n - 1];
        let m = e * mag(nu);
        scale += m;
        if n == n_max {
            let tail = m;
            if tail <= budget.tail_tol * scale || scale == 0.0 {
                return Ok(sum);
            }
            return Err(Error::SeriesNotConverged { n_max, tail: tail / scale });
        }
        e_next = bessel_i_scaled(geom.nu(n + 1), z)?;
        let m_next = e_next * mag(geom.nu(n + 1));
        if m_next == 0.0 {
            return Ok(sum);
        }
        let r = m_next / m;
        if r < 1.0 && m < prev_mag {
            let tail = m_next / (1.0 - r);
            if tail <= budget.tail_tol * scale {
                return Ok(sum);
            }
        }
        prev_mag = m;
    }
    Ok(sum)
}

/// Which approximation of the wedge density a kernel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// both edges out of reach: free Gaussian
    Free,
    /// only the edge `X₁ = 0` matters: single reflection
    ImageX1,
    /// only the edge `X₂ = 0` matters: single reflection
    ImageX2,
    /// eigenmode series
    Series,
}

/// The wedge density for a fixed source `X′` and elapsed time `ϑ`.
///
/// When the source is many standard deviations away from one or both edges the method
/// of images in whitened coordinates is exact to double precision and far cheaper than
/// the series; `force_series` disables that shortcut.
#[derive(Debug, Clone)]
pub struct WedgeKernel {
    pub geom: WedgeGeometry,
    pub budget: SeriesBudget,
    pub tt: f64,
    pub xp: [f64; 2],
    pub mode: KernelMode,
    yp: [f64; 2],
    series: Option<SeriesSource>,
}

impl WedgeKernel {
    pub fn new(geom: &WedgeGeometry, budget: &SeriesBudget, tt: f64, xp: [f64; 2]) -> Self {
        let s = tt.sqrt();
        let near = |i: usize| (xp[i] + geom.xi[i].min(0.0) * tt) / s < FAR_EDGE_SD;
        let mode = match (near(0), near(1)) {
            (false, false) => KernelMode::Free,
            (true, false) => KernelMode::ImageX1,
            (false, true) => KernelMode::ImageX2,
            (true, true) => KernelMode::Series,
        };
        Self::with_mode(geom, budget, tt, xp, mode)
    }

    pub fn series_only(geom: &WedgeGeometry, budget: &SeriesBudget, tt: f64, xp: [f64; 2]) -> Self {
        Self::with_mode(geom, budget, tt, xp, KernelMode::Series)
    }

    fn with_mode(geom: &WedgeGeometry, budget: &SeriesBudget, tt: f64, xp: [f64; 2], mode: KernelMode) -> Self {
        let series = (mode == KernelMode::Series).then(|| SeriesSource::new(geom, xp, budget.n_max));
        Self { geom: *geom, budget: *budget, tt, xp, mode, yp: geom.whiten(xp), series }
    }

    /// Driftless free density in whitened coordinates, without the `1/ρ̄` Jacobian,
    /// as a log value.
    fn log_free(&self, y: [f64; 2], ysrc: [f64; 2]) -> f64 {
        let d2 = (y[0] - ysrc[0]).powi(2) + (y[1] - ysrc[1]).powi(2);
        -d2 / (2.0 * self.tt) - (2.0 * PI * self.tt).ln()
    }

    fn reflect(&self, edge: usize) -> [f64; 2] {
        // unit normals: (1, 0) for X₁ = 0 and (ρ, ρ̄) for X₂ = 0; distances are X₁′, X₂′
        let n = if edge == 0 { [1.0, 0.0] } else { [self.geom.rho, self.geom.rho_bar] };
        let d = self.xp[edge];
        [self.yp[0] - 2.0 * d * n[0], self.yp[1] - 2.0 * d * n[1]]
    }

    fn image_density(&self, x: [f64; 2], edge: Option<usize>) -> f64 {
        let y = self.geom.whiten(x);
        let ld = self.geom.log_drift(self.tt, x, self.xp);
        let direct = (ld + self.log_free(y, self.yp)).exp();
        let image = edge.map_or(0.0, |e| (ld + self.log_free(y, self.reflect(e))).exp());
        (direct - image).max(0.0) / self.geom.rho_bar
    }

    /// `G(ϑ, X | X′)`.
    pub fn density(&self, x: [f64; 2]) -> Result<f64> {
        if x[0] <= 0.0 || x[1] <= 0.0 {
            return Ok(0.0);
        }
        match self.mode {
            KernelMode::Free => Ok(self.image_density(x, None)),
            KernelMode::ImageX1 => Ok(self.image_density(x, Some(0))),
            KernelMode::ImageX2 => Ok(self.image_density(x, Some(1))),
            KernelMode::Series => self.series_density(x),
        }
    }

    fn series_density(&self, x: [f64; 2]) -> Result<f64> {
        let src = self.series.as_ref().expect("series data present in series mode");
        let g = &self.geom;
        let (r, phi) = g.polar(x);
        let log_pre =
            (2.0 / (g.varpi * self.tt * g.rho_bar)).ln() + g.log_drift(self.tt, x, self.xp) - (r - src.r_src).powi(2) / (2.0 * self.tt);
        if log_pre < LN_TINY {
            return Ok(0.0);
        }
        let z = r * src.r_src / self.tt;
        let s = mode_sum(g, &self.budget, z, &src.sin_src, |_, nu| (nu * phi).sin(), |_| 1.0)?;
        Ok((log_pre.exp() * s).max(0.0))
    }

    /// `∂G/∂X₂` on the edge `X₂ = 0` at abscissa `x1`.
    pub fn flux_x2(&self, x1: f64) -> Result<f64> {
        if x1 <= 0.0 {
            return Ok(0.0);
        }
        let x = [x1, 0.0];
        match self.mode {
            KernelMode::Free | KernelMode::ImageX1 => Ok(0.0),
            KernelMode::ImageX2 => {
                let y = self.geom.whiten(x);
                let lp = self.geom.log_drift(self.tt, x, self.xp) + self.log_free(y, self.yp);
                Ok(2.0 * self.xp[1] / (self.geom.rho_bar * self.tt) * lp.exp())
            }
            KernelMode::Series => {
                let src = self.series.as_ref().expect("series data present in series mode");
                let g = &self.geom;
                let r = x1 / g.rho_bar;
                let log_pre =
                    (2.0 / (g.varpi * self.tt * x1)).ln() + g.log_drift(self.tt, x, self.xp) - (r - src.r_src).powi(2) / (2.0 * self.tt);
                if log_pre < LN_TINY {
                    return Ok(0.0);
                }
                let z = r * src.r_src / self.tt;
                let s = mode_sum(g, &self.budget, z, &src.sin_src, |n, nu| if n % 2 == 1 { nu } else { -nu }, |nu| nu)?;
                Ok((log_pre.exp() * s).max(0.0))
            }
        }
    }

    /// `∂G/∂X₁` on the edge `X₁ = 0` at ordinate `x2`.
    pub fn flux_x1(&self, x2: f64) -> Result<f64> {
        if x2 <= 0.0 {
            return Ok(0.0);
        }
        let x = [0.0, x2];
        match self.mode {
            KernelMode::Free | KernelMode::ImageX2 => Ok(0.0),
            KernelMode::ImageX1 => {
                let y = self.geom.whiten(x);
                let lp = self.geom.log_drift(self.tt, x, self.xp) + self.log_free(y, self.yp);
                Ok(2.0 * self.xp[0] / (self.geom.rho_bar * self.tt) * lp.exp())
            }
            KernelMode::Series => {
                let src = self.series.as_ref().expect("series data present in series mode");
                let g = &self.geom;
                let r = x2 / g.rho_bar;
                let log_pre =
                    (2.0 / (g.varpi * self.tt * x2)).ln() + g.log_drift(self.tt, x, self.xp) - (r - src.r_src).powi(2) / (2.0 * self.tt);
                if log_pre < LN_TINY {
                    return Ok(0.0);
                }
                let z = r * src.r_src / self.tt;
                let s = mode_sum(g, &self.budget, z, &src.sin_src, |_, nu| nu, |nu| nu)?;
                Ok((log_pre.exp() * s).max(0.0))
            }
        }
    }

    /// Window `[lo, hi]` per coordinate outside which the density is negligible.
    pub fn window(&self) -> ([f64; 2], [f64; 2]) {
        let s = self.tt.sqrt();
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for i in 0..2 {
            let m = self.xp[i] + self.geom.xi[i] * self.tt;
            lo[i] = (m - WINDOW_SD * s).max(0.0);
            hi[i] = (m + WINDOW_SD * s).max(0.0);
        }
        (lo, hi)
    }

    /// Window in `X₁` at fixed `X₂`, from the conditional law of the free process.
    pub fn x1_window(&self, x2: f64) -> (f64, f64) {
        let g = &self.geom;
        let s = self.tt.sqrt();
        let m = self.xp[0] + g.xi[0] * self.tt + g.rho * (x2 - self.xp[1] - g.xi[1] * self.tt);
        let half = WINDOW_SD * g.rho_bar * s;
        ((m - half).max(0.0), (m + half).max(0.0))
    }

    /// Window in `X₂` at fixed `X₁`.
    pub fn x2_window(&self, x1: f64) -> (f64, f64) {
        let g = &self.geom;
        let s = self.tt.sqrt();
        let m = self.xp[1] + g.xi[1] * self.tt + g.rho * (x1 - self.xp[0] - g.xi[0] * self.tt);
        let half = WINDOW_SD * g.rho_bar * s;
        ((m - half).max(0.0), (m + half).max(0.0))
    }
}

/// `G(ϑ, X | X′)` from the eigenmode series.
pub fn green_2d(tt: f64, x: [f64; 2], xp: [f64; 2], geom: &WedgeGeometry, budget: &SeriesBudget) -> Result<f64> {
    WedgeKernel::series_only(geom, budget, tt, xp).density(x)
}

/// `∂G/∂X₂ (ϑ, X₁, 0 | X′)` from the eigenmode series.
pub fn green_2d_dx2(tt: f64, x1: f64, xp: [f64; 2], geom: &WedgeGeometry, budget: &SeriesBudget) -> Result<f64> {
    WedgeKernel::series_only(geom, budget, tt, xp).flux_x2(x1)
}

/// `∂G/∂X₁ (ϑ, 0, X₂ | X′)` from the eigenmode series.
pub fn green_2d_dx1(tt: f64, x2: f64, xp: [f64; 2], geom: &WedgeGeometry, budget: &SeriesBudget) -> Result<f64> {
    WedgeKernel::series_only(geom, budget, tt, xp).flux_x1(x2)
}

/// `X₂`-moments at fixed `X₁`: `Y₁ = ∫G`, `Y₂ = ∫X₂G`, `Z₁ = ∫∂₁G`, `Z₂ = ∫X₂∂₁G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub y1: f64,
    pub y2: f64,
    pub z1: f64,
    pub z2: f64,
}

/// Moments of the kernel density along the vertical line through `x1`; `∂₁G` is taken by
/// a centred difference of relative step `1e-5`.
pub fn kernel_moments(kernel: &WedgeKernel, x1: f64, opts: &QuadOptions) -> Result<Moments> {
    let (lo, hi) = kernel.x2_window(x1);
    let slot = ErrorSlot::new();
    let g = |a: f64, x2: f64| slot.take(kernel.density([a, x2]));
    let h = 1e-5 * x1.max(1e-3);
    let d = |x2: f64| (g(x1 + h, x2) - g(x1 - h, x2)) / (2.0 * h);
    let y1 = integrate(|x2| g(x1, x2), lo, hi, &[], opts).value;
    let y2 = integrate(|x2| x2 * g(x1, x2), lo, hi, &[], opts).value;
    let z1 = integrate(d, lo, hi, &[], opts).value;
    let z2 = integrate(|x2| x2 * d(x2), lo, hi, &[], opts).value;
    slot.check(Moments { y1, y2, z1, z2 })
}

/// [`Moments`] of the series density.
pub fn green_moments(tt: f64, x1: f64, xp: [f64; 2], geom: &WedgeGeometry, budget: &SeriesBudget) -> Result<Moments> {
    let kernel = WedgeKernel::series_only(geom, budget, tt, xp);
    kernel_moments(&kernel, x1, &QuadOptions::new(1e-13, 1e-10))
}

/// Total mass `∫∫ G dX`, the joint survival probability of the wedge.
pub fn kernel_mass(kernel: &WedgeKernel, opts: &QuadOptions) -> Result<f64> {
    let (lo, hi) = kernel.window();
    let slot = ErrorSlot::new();
    let q = crate::quad::integrate_2d(
        |x2, x1| slot.take(kernel.density([x1, x2])),
        (lo[1], hi[1]),
        &[],
        |x2| {
            let (a, b) = kernel.x1_window(x2);
            (a, b, vec![])
        },
        opts,
        opts,
    );
    slot.check(q.value)
}
