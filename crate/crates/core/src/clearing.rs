//! Terminal clearing: the fraction `γ_i` of its liabilities each bank pays at maturity.
//!
//! With `a_i = A_i(T)/L̃_i` and `l_ji = L_ji/L̃_i` the clearing vector solves
//! `γ_i = min(1, a_i + Σ_j γ_j l_ji)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{terminal_boundary_curve, BankNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingProblem {
    pub a: Vec<f64>,
    /// `l[j][i] = L_ji / L̃_i`: bank `j`'s payment to `i` in units of `i`'s liabilities.
    pub l: Vec<Vec<f64>>,
    /// Banks without liabilities; they pay in full by convention.
    pub no_liabilities: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingSolution {
    pub gamma: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 10_000;

impl ClearingProblem {
    /// Problem for terminal assets `assets_t` (time-`T` currency).
    pub fn from_network(net: &BankNetwork, assets_t: &[f64]) -> Result<Self> {
        let n = net.n_banks();
        if assets_t.len() != n {
            return Err(Error::schema(format!("expected {n} terminal asset values, got {}", assets_t.len())));
        }
        if let Some(bad) = assets_t.iter().find(|a| !(**a >= 0.0)) {
            return Err(Error::schema(format!("terminal assets must be non-negative, got {bad}")));
        }
        let t = net.maturity;
        let g = net.growth(t);
        let totals: Vec<f64> = (0..n).map(|i| net.total_liabilities(i, t)).collect();
        let no_liabilities: Vec<bool> = totals.iter().map(|&x| x == 0.0).collect();
        let a = (0..n).map(|i| if no_liabilities[i] { 1.0 } else { assets_t[i] / totals[i] }).collect();
        let l = (0..n)
            .map(|j| (0..n).map(|i| if no_liabilities[i] || i == j { 0.0 } else { net.mutual[j][i] * g / totals[i] }).collect())
            .collect();
        Ok(Self { a, l, no_liabilities })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    fn inflow(&self, gamma: &[f64], i: usize) -> f64 {
        self.a[i] + (0..self.n()).map(|j| gamma[j] * self.l[j][i]).sum::<f64>()
    }

    /// The map `γ ↦ min(1, a + lᵀγ)`.
    pub fn apply(&self, gamma: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| if self.no_liabilities[i] { 1.0 } else { self.inflow(gamma, i).min(1.0) }).collect()
    }

    /// Sup-norm residual of the fixed-point equation.
    pub fn residual(&self, gamma: &[f64]) -> f64 {
        self.apply(gamma).iter().zip(gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `|det l|`, the determinant bound of the contraction argument.
    pub fn jacobian_determinant(&self) -> f64 {
        let n = self.n();
        DMatrix::from_fn(n, n, |r, c| self.l[r][c]).determinant().abs()
    }
}

/// Active-set iteration: start from full payment, mark banks whose inflow falls short,
/// solve the linear system on the defaulting set exactly, and repeat until the set is
/// stable. Each pass can only enlarge the set, so at most `N` passes are needed.
pub fn solve_clearing(problem: &ClearingProblem, tol: f64) -> Result<ClearingSolution> {
    let n = problem.n();
    let mut gamma = vec![1.0; n];
    let mut defaulted = vec![false; n];
    for iter in 1..=MAX_ITER.min(n + 2) {
        let mut changed = false;
        for i in 0..n {
            if !defaulted[i] && !problem.no_liabilities[i] && problem.inflow(&gamma, i) < 1.0 {
                defaulted[i] = true;
                changed = true;
            }
        }
        if !changed {
            let residual = problem.residual(&gamma);
            if residual <= tol {
                return Ok(ClearingSolution { gamma, iterations: iter, residual });
            }
            // roundoff left a tiny residual: polish by fixed-point steps
            return picard_clearing(problem, &gamma, tol);
        }
        let idx: Vec<usize> = (0..n).filter(|&i| defaulted[i]).collect();
        let m = idx.len();
        let mat = DMatrix::from_fn(m, m, |r, c| {
            let (i, j) = (idx[r], idx[c]);
            f64::from(u8::from(i == j)) - problem.l[j][i]
        });
        let rhs = DVector::from_fn(m, |r, _| {
            let i = idx[r];
            problem.a[i] + (0..n).filter(|j| !defaulted[*j]).map(|j| problem.l[j][i]).sum::<f64>()
        });
        let sol = mat.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular clearing system on the defaulting set".into()))?;
        for (r, &i) in idx.iter().enumerate() {
            gamma[i] = sol[r].clamp(0.0, 1.0);
        }
    }
    Err(Error::NonConvergence("clearing active-set iteration hit its cap".into()))
}

/// Plain fixed-point iteration from an arbitrary start in `[0, 1]^N`.
pub fn picard_clearing(problem: &ClearingProblem, start: &[f64], tol: f64) -> Result<ClearingSolution> {
    let mut gamma = start.to_vec();
    for iter in 1..=MAX_ITER {
        let next = problem.apply(&gamma);
        let step = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma = next;
        if step <= tol {
            let residual = problem.residual(&gamma);
            return Ok(ClearingSolution { gamma, iterations: iter, residual });
        }
    }
    Err(Error::NonConvergence(format!("fixed-point clearing did not reach {tol:e} in {MAX_ITER} steps")))
}

/// `R̃_j = min[1, (A_j + Σ_i γ_i L_ij) / (L_j + Σ_i γ_i L_ji)]` at maturity.
pub fn effective_recovery(net: &BankNetwork, assets_t: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
    let n = net.n_banks();
    let g = net.growth(net.maturity);
    (0..n)
        .map(|j| {
            let num = assets_t[j] + (0..n).filter(|&i| i != j).map(|i| gamma[i] * net.mutual[i][j] * g).sum::<f64>();
            let den = net.liabilities[j] * g + (0..n).filter(|&i| i != j).map(|i| gamma[i] * net.mutual[j][i] * g).sum::<f64>();
            if den > 0.0 {
                Ok((num / den).min(1.0))
            } else if num == 0.0 {
                Ok(1.0)
            } else {
                Err(Error::Numerical(format!("effective recovery of bank {} has denominator {den}", j + 1)))
            }
        })
        .collect()
}

/// Terminal regions of the two-bank problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Region {
    /// both banks survive
    D12,
    /// bank 1 survives, bank 2 defaults
    D1,
    /// bank 2 survives, bank 1 defaults
    D2,
    /// both default
    DHat,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::D12 => "D12",
            Region::D1 => "D1",
            Region::D2 => "D2",
            Region::DHat => "Dhat",
        }
    }
}

/// Region of terminal asset values (time-`T` currency). Points exactly on a threshold
/// count as surviving; callers needing the half-maximum value on the discontinuity
/// average neighbouring payoffs instead.
pub fn classify_terminal_region(net: &BankNetwork, assets_t: [f64; 2]) -> Region {
    let s1 = assets_t[0] >= terminal_boundary_curve(net, 0, assets_t[1]);
    let s2 = assets_t[1] >= terminal_boundary_curve(net, 1, assets_t[0]);
    match (s1, s2) {
        (true, true) => Region::D12,
        (true, false) => Region::D1,
        (false, true) => Region::D2,
        (false, false) => Region::DHat,
    }
}

/// Whether a default at maturity is outright (`A_i < λ_i^=`) rather than caused by the
/// counterparty's shortfall.
pub fn is_outright_default(net: &BankNetwork, i: usize, a_t: f64) -> bool {
    let b = crate::network::standard_boundaries(net, net.maturity);
    a_t < b.lambda_eq[i]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> BankNetwork {
        BankNetwork::two_bank([300.0, 300.0], [60.0, 70.0], 10.0, 15.0, [0.4, 0.45], [1.0, 1.0], 0.5, 1.0).unwrap()
    }

    #[test]
    fn solvent_banks_pay_in_full() {
        let p = ClearingProblem::from_network(&reference(), &[100.0, 100.0]).unwrap();
        let s = solve_clearing(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.gamma, vec![1.0, 1.0]);
    }

    #[test]
    fn both_default_closed_form() {
        let p = ClearingProblem::from_network(&reference(), &[20.0, 10.0]).unwrap();
        let s = solve_clearing(&p, DEFAULT_TOL).unwrap();
        assert!((s.gamma[0] - (70.0 * 20.0 + 15.0 * 30.0) / 5800.0).abs() < 1e-14);
        assert!((s.gamma[1] - (60.0 * 10.0 + 10.0 * 30.0) / 5800.0).abs() < 1e-14);
        assert!(s.residual <= DEFAULT_TOL);
    }

    #[test]
    fn determinant_bound() {
        let p = ClearingProblem::from_network(&reference(), &[1.0, 1.0]).unwrap();
        assert!((p.jacobian_determinant() - 150.0 / 5950.0).abs() < 1e-15);
    }

    #[test]
    fn zero_liability_bank_pays_by_convention() {
        let mut net = reference();
        net.liabilities[1] = 0.0;
        net.mutual[1][0] = 0.0;
        let p = ClearingProblem::from_network(&net, &[5.0, 0.0]).unwrap();
        let s = solve_clearing(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.gamma[1], 1.0);
        assert!((s.gamma[0] - 5.0 / 70.0).abs() < 1e-15);
    }

    #[test]
    fn effective_recovery_examples() {
        let net = reference();
        let r = effective_recovery(&net, &[100.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((r[1] - 10.0 / 85.0).abs() < 1e-15);
        assert_eq!(r[0], 1.0);
        // cross-check against the terminal threshold curve
        let lam = 70.0 - 15.0 * r[1];
        assert!((lam - terminal_boundary_curve(&net, 0, 0.0)).abs() < 1e-12);
        let r = effective_recovery(&net, &[1e12, 1e12], &[1.0, 1.0]).unwrap();
        assert_eq!(r, vec![1.0, 1.0]);
    }

    #[test]
    fn region_examples() {
        let net = reference();
        assert_eq!(classify_terminal_region(&net, [60.0, 80.0]), Region::D12);
        assert_eq!(classify_terminal_region(&net, [100.0, 0.0]), Region::D1);
        assert_eq!(classify_terminal_region(&net, [0.0, 100.0]), Region::D2);
        assert_eq!(classify_terminal_region(&net, [0.0, 0.0]), Region::DHat);
        // contagion: above λ₁^= but below the raised threshold
        assert_eq!(classify_terminal_region(&net, [60.0, 10.0]), Region::DHat);
        assert!(!is_outright_default(&net, 0, 60.0));
    }

    #[test]
    fn picard_agrees_with_active_set() {
        let p = ClearingProblem::from_network(&reference(), &[20.0, 10.0]).unwrap();
        let a = solve_clearing(&p, DEFAULT_TOL).unwrap();
        let b = picard_clearing(&p, &[0.0, 0.7], 1e-15).unwrap();
        for i in 0..2 {
            assert!((a.gamma[i] - b.gamma[i]).abs() < 1e-13);
        }
    }
}
