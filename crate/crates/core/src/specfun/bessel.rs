//! Modified Bessel functions of the first kind, real order `ν ≥ 0`.
//!
//! Three regimes are used:
//! * `ν ≥ 20`: Debye's uniform expansion, 13 correction terms;
//! * `x ≥ max(40, ν²/2)`: Hankel's large-argument expansion;
//! * otherwise: the ascending series, summed in log-scaled form.
//!
//! All regimes produce `e^{-x} I_ν(x)` first; the unscaled value is derived from it.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{ln_gamma, SeriesControl, SpecFunError};

const DEBYE_MIN_ORDER: f64 = 20.0;
const DEBYE_TERMS: usize = 13;
const LN_MAX: f64 = 709.78;

fn check_args(nu: f64, x: f64) -> Result<(), SpecFunError> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(SpecFunError::InvalidArgument(format!("order must be ≥ 0, got {nu}")));
    }
    if !(x >= 0.0) || x.is_nan() {
        return Err(SpecFunError::InvalidArgument(format!("argument must be ≥ 0, got {x}")));
    }
    Ok(())
}

/// `I_ν(x)`. Fails with [`SpecFunError::Overflow`] when the value is not representable.
pub fn bessel_i(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64, SpecFunError> {
    let s = scaled(nu, x, ctl)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let log_value = s.ln() + x;
    if log_value > LN_MAX {
        return Err(SpecFunError::Overflow { log_value });
    }
    Ok(s * x.exp())
}

/// `e^{-x} I_ν(x)` with the default series control.
pub fn bessel_i_scaled(nu: f64, x: f64) -> Result<f64, SpecFunError> {
    scaled(nu, x, &SeriesControl::default())
}

/// `(e^{-x} I_ν(x), e^{-x} I_{ν+1}(x))`.
pub fn bessel_i_scaled_pair(nu: f64, x: f64) -> Result<(f64, f64), SpecFunError> {
    let ctl = SeriesControl::default();
    Ok((scaled(nu, x, &ctl)?, scaled(nu + 1.0, x, &ctl)?))
}

fn scaled(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64, SpecFunError> {
    check_args(nu, x)?;
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    if nu >= DEBYE_MIN_ORDER {
        Ok(debye(nu, x))
    } else if x >= (0.5 * nu * nu).max(40.0) {
        hankel(nu, x, ctl)
    } else {
        ascending(nu, x, ctl)
    }
}

fn ascending(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64, SpecFunError> {
    let half = 0.5 * x;
    let q = half * half;
    let log_t0 = nu * half.ln() - ln_gamma(nu + 1.0) - x;
    // Sum relative to the first term, renormalising when the partial sum grows large.
    let mut log_scale = 0.0;
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (nu + kf + 1.0));
        sum += term;
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            log_scale += 250.0 * std::f64::consts::LN_10;
        }
        if kf + 1.0 > half && term <= ctl.rel_tol * sum {
            return Ok((log_t0 + log_scale + sum.ln()).exp());
        }
    }
    Err(SpecFunError::NotConverged { terms: ctl.max_terms })
}

fn hankel(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64, SpecFunError> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..ctl.max_terms {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * x);
        if term == 0.0 || term.abs() <= ctl.rel_tol * sum.abs() {
            return Ok(sum / (2.0 * PI * x).sqrt());
        }
        if term.abs() > prev {
            // asymptotic series started to diverge; the smallest term bounds the error
            if prev <= 1e3 * ctl.rel_tol * sum.abs() {
                return Ok(sum / (2.0 * PI * x).sqrt());
            }
            return Err(SpecFunError::NotConverged { terms: k });
        }
        prev = term.abs();
        sum += term;
    }
    Err(SpecFunError::NotConverged { terms: ctl.max_terms })
}

/// Debye polynomials `u_k(t)` as coefficient vectors in ascending powers.
fn debye_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for _ in 0..DEBYE_TERMS {
            let u = polys.last().unwrap();
            // u_{k+1} = ½t²(1 − t²)u_k' + ⅛∫₀ᵗ (1 − 5s²)u_k(s) ds
            let mut next = vec![0.0; u.len() + 3];
            for (i, &c) in u.iter().enumerate().skip(1) {
                let d = i as f64 * c;
                next[i + 1] += 0.5 * d;
                next[i + 3] -= 0.5 * d;
            }
            for (i, &c) in u.iter().enumerate() {
                next[i + 1] += c / (8.0 * (i as f64 + 1.0));
                next[i + 3] -= 5.0 * c / (8.0 * (i as f64 + 3.0));
            }
            polys.push(next);
        }
        polys
    })
}

fn debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let root = (1.0 + z * z).sqrt();
    let t = 1.0 / root;
    // ν(η − z) with η = √(1+z²) + ln(z / (1 + √(1+z²)))
    let expo = nu / (root + z) + nu * (z / (1.0 + root)).ln();
    let mut series = 0.0;
    let mut inv_pow = 1.0;
    for u in debye_polys() {
        let val = u.iter().rev().fold(0.0, |acc, &c| acc * t + c);
        series += val * inv_pow;
        inv_pow /= nu;
    }
    expo.exp() * series / ((2.0 * PI * nu).sqrt() * (1.0 + z * z).sqrt().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn value_at_origin() {
        assert_eq!(bessel_i_scaled(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(1.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn half_order_closed_form() {
        let ctl = SeriesControl::default();
        let want = (2.0 / PI).sqrt() * 1f64.sinh();
        assert!(rel(bessel_i(0.5, 1.0, &ctl).unwrap(), want) < 1e-15);
        assert!(rel(bessel_i(0.5, 1.0, &ctl).unwrap(), 0.937_674_888_245_487_6) < 1e-15);
        for &x in &[0.3, 5.0, 29.0, 45.0, 120.0] {
            let want = (2.0 / (PI * x)).sqrt() * 0.5 * (1.0 - (-2.0 * x).exp());
            assert!(rel(bessel_i_scaled(0.5, x).unwrap(), want) < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn reference_values() {
        // 30-digit reference values
        let ctl = SeriesControl::default();
        let cases = [
            (1.5, 30.0, 752_420_533_212.431_5),
            (2.25, 0.01, 2.607_787_718_375_667_4e-6),
            (25.0, 10.0, 4.944_018_974_211_225e-8),
            (25.0, 300.0, 1.577_583_477_088_568_5e128),
            (7.5, 60.0, 3.676_122_164_887_283_5e24),
        ];
        for &(nu, x, want) in &cases {
            let got = bessel_i(nu, x, &ctl).unwrap();
            assert!(rel(got, want) < 1e-13, "I_{nu}({x}) = {got}, want {want}");
        }
        let scaled_cases = [
            (150.7, 2000.0, 3.056_410_785_750_237_9e-5),
            (19.9, 45.0, 7.485_665_922_512_726e-4),
            (0.0, 100.0, 0.039_944_379_299_096_68),
            (3.0, 1e4, 0.003_987_677_726_055_676),
        ];
        for &(nu, x, want) in &scaled_cases {
            let got = bessel_i_scaled(nu, x).unwrap();
            assert!(rel(got, want) < 1e-13, "e^-x I_{nu}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn recurrence_on_grid() {
        // I_{ν-1} - I_{ν+1} = (2ν/x) I_ν with the lowest order ν-1 spanning [0.25, 10]
        for i in 0..40 {
            let nu = 1.25 + i as f64 * 0.25;
            for j in 0..60 {
                let x = 0.1 + j as f64 * (49.9 / 59.0);
                let lhs = bessel_i_scaled(nu - 1.0, x).unwrap() - bessel_i_scaled(nu + 1.0, x).unwrap();
                let rhs = 2.0 * nu / x * bessel_i_scaled(nu, x).unwrap();
                assert!(rel(lhs, rhs) < 1e-10, "ν = {nu}, x = {x}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn regime_switches_are_continuous() {
        // Debye switch in order
        for &x in &[0.5, 8.0, 25.0, 90.0, 400.0] {
            let a = bessel_i_scaled(20.0 - 1e-13, x).unwrap();
            let b = bessel_i_scaled(20.0, x).unwrap();
            assert!(rel(a, b) < 1e-11, "x = {x}: {a} vs {b}");
        }
        // Hankel switch in argument
        for &nu in &[0.0, 1.7, 4.4, 9.0] {
            let edge = f64::max(0.5 * nu * nu, 40.0);
            let a = bessel_i_scaled(nu, edge * (1.0 - 1e-12)).unwrap();
            let b = bessel_i_scaled(nu, edge).unwrap();
            assert!(rel(a, b) < 1e-12, "ν = {nu}: {a} vs {b}");
        }
    }

    #[test]
    fn ratio_below_one() {
        for i in 1..30 {
            let x = 0.37 * i as f64;
            for &nu in &[0.0, 0.6, 3.3, 21.0] {
                let (a, b) = bessel_i_scaled_pair(nu, x).unwrap();
                assert!(b < a);
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let ctl = SeriesControl::default();
        match bessel_i(2.0, 800.0, &ctl) {
            Err(SpecFunError::Overflow { log_value }) => assert!(log_value > 709.0),
            other => panic!("expected overflow, got {other:?}"),
        }
        assert!(bessel_i_scaled(2.0, 800.0).unwrap().is_finite());
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(bessel_i_scaled(-1.0, 1.0).is_err());
        assert!(bessel_i_scaled(1.0, -1.0).is_err());
    }
}
