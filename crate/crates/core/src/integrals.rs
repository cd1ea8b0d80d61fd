//! Integrals of the wedge kernel shared by the survival and pricing representations.

use crate::error::{ErrorSlot, Result};
use crate::greens::{KernelMode, SeriesBudget, WedgeGeometry, WedgeKernel};
use crate::quad::{integrate, integrate_2d, QuadOptions};

/// Outer and inner quadrature controls for nested integrals.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub outer: QuadOptions,
    pub inner: QuadOptions,
}

impl Tolerances {
    /// Relative tolerance `tol` with an absolute floor two orders below it; the inner
    /// integrals run ten times tighter so their error does not dominate.
    pub(crate) fn new(tol: f64) -> Self {
        Self { outer: QuadOptions::new(1e-2 * tol, tol), inner: QuadOptions::new(1e-3 * tol, 0.1 * tol) }
    }
}

/// `∫∫ f(X) G(ϑ, X | X′) dX` over `X₂ ∈ x2_range`, `X₁ ∈ x1_range(X₂)`, clipped to the
/// kernel's window.
pub(crate) fn region_integral(
    kernel: &WedgeKernel,
    x2_range: (f64, f64),
    x2_breaks: &[f64],
    x1_range: impl Fn(f64) -> (f64, f64),
    x1_breaks: impl Fn(f64) -> Vec<f64>,
    f: impl Fn([f64; 2]) -> f64,
    tol: &Tolerances,
) -> Result<f64> {
    let (lo, hi) = kernel.window();
    let a = x2_range.0.max(lo[1]);
    let b = x2_range.1.min(hi[1]);
    if b <= a {
        return Ok(0.0);
    }
    let slot = ErrorSlot::new();
    let q = integrate_2d(
        |x2, x1| {
            let g = slot.take(kernel.density([x1, x2]));
            if g == 0.0 {
                0.0
            } else {
                g * f([x1, x2])
            }
        },
        (a, b),
        x2_breaks,
        |x2| {
            let (wa, wb) = kernel.x1_window(x2);
            let (ra, rb) = x1_range(x2);
            (ra.max(wa), rb.min(wb), x1_breaks(x2))
        },
        &tol.outer,
        &tol.inner,
    );
    slot.check(q.value)
}

/// `∫₀^τ h(u) du` through `u = v²`, which resolves the `e^{-c/u}` onset of kernel
/// integrals at small elapsed time.
pub(crate) fn time_integral(tau: f64, mut h: impl FnMut(f64) -> f64, opts: &QuadOptions) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    integrate(|v| if v == 0.0 { 0.0 } else { 2.0 * v * h(v * v) }, 0.0, tau.sqrt(), &[], opts).value
}

/// Contribution of Dirichlet data `g` on the edge `X₂ = 0`:
/// `½ ∫₀^τ du ∫ G_{X₂}(u, X₁, 0 | X′) g(τ − u, X₁) dX₁`.
pub(crate) fn edge2_flux_integral(
    geom: &WedgeGeometry,
    budget: &SeriesBudget,
    xp: [f64; 2],
    tau: f64,
    g: impl Fn(f64, f64) -> f64,
    x1_breaks: &[f64],
    tol: &Tolerances,
) -> Result<f64> {
    let slot = ErrorSlot::new();
    let v = time_integral(
        tau,
        |u| {
            let kernel = WedgeKernel::new(geom, budget, u, xp);
            if matches!(kernel.mode, KernelMode::Free | KernelMode::ImageX1) {
                return 0.0;
            }
            let (a, b) = kernel.x1_window(0.0);
            if b <= a {
                return 0.0;
            }
            let rem = tau - u;
            integrate(
                |x1| {
                    let flux = slot.take(kernel.flux_x2(x1));
                    if flux == 0.0 {
                        0.0
                    } else {
                        flux * g(rem, x1)
                    }
                },
                a,
                b,
                x1_breaks,
                &tol.inner,
            )
            .value
        },
        &tol.outer,
    );
    slot.check(0.5 * v)
}
