//! Gauss `₂F₁` with complex argument and the generalized `₃F₃`.

use num_complex::Complex64;

use super::{SeriesControl, SpecFunError};

fn nonpositive_integer(v: f64) -> Option<usize> {
    if v <= 0.0 && v == v.round() {
        Some((-v) as usize)
    } else {
        None
    }
}

/// Gauss hypergeometric function `₂F₁(a, b; c; z)`.
///
/// Terminating parameters (`a` or `b` a non-positive integer) give a polynomial valid for
/// any `z`; otherwise the series is summed for `|z| < 1`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: Complex64, ctl: &SeriesControl) -> Result<Complex64, SpecFunError> {
    let degree = nonpositive_integer(a).or_else(|| nonpositive_integer(b));
    if degree.is_none() && z.norm() >= 1.0 {
        return Err(SpecFunError::NonTerminating { abs_z: z.norm() });
    }
    let iters = degree.unwrap_or(ctl.max_terms);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 0..iters {
        let kf = k as f64;
        let denom = (c + kf) * (kf + 1.0);
        if denom == 0.0 {
            return Err(SpecFunError::InvalidArgument(format!("c = {c} makes term {} of the series singular", k + 1)));
        }
        term *= z * ((a + kf) * (b + kf) / denom);
        sum += term;
        if degree.is_none() && term.norm() <= ctl.rel_tol * sum.norm() {
            return Ok(sum);
        }
    }
    if degree.is_some() {
        Ok(sum)
    } else {
        Err(SpecFunError::NotConverged { terms: ctl.max_terms })
    }
}

/// Generalized hypergeometric function `₃F₃(a; b; z)` for real `z`, summed with
/// Neumaier compensation.
///
/// For `z < 0` the series alternates; if the largest partial terms dwarf the result the
/// remaining digits are unreliable and [`SpecFunError::PrecisionLoss`] is returned.
pub fn hyp3f3(a: [f64; 3], b: [f64; 3], z: f64, ctl: &SeriesControl) -> Result<f64, SpecFunError> {
    if let Some(bad) = b.iter().find(|&&v| nonpositive_integer(v).is_some()) {
        return Err(SpecFunError::InvalidArgument(format!("lower parameter {bad} is a non-positive integer")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut comp = 0.0f64;
    let mut abs_sum = 1.0f64;
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        let ratio = (a[0] + kf) * (a[1] + kf) * (a[2] + kf) / ((b[0] + kf) * (b[1] + kf) * (b[2] + kf) * (kf + 1.0));
        term *= ratio * z;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        abs_sum += term.abs();
        let total = sum + comp;
        if term == 0.0 || (term.abs() <= ctl.rel_tol * total.abs() && (ratio * z).abs() < 1.0) {
            let estimate = f64::EPSILON * abs_sum / total.abs();
            if estimate > 1e6 * ctl.rel_tol {
                return Err(SpecFunError::PrecisionLoss { estimate });
            }
            return Ok(total);
        }
    }
    Err(SpecFunError::NotConverged { terms: ctl.max_terms })
}
