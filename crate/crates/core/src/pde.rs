//! Hundsdorfer–Verwer ADI solver for `V_τ = LV − s` on a non-uniform rectangle in `X`,
//! with `L = ½∂₁² + ρ∂₁∂₂ + ½∂₂² + ξ₁∂₁ + ξ₂∂₂` and Dirichlet data on all four sides.
//!
//! The mixed derivative is explicit, the two directional operators implicit with
//! parameter `θ = ½ + √3/6`; all first and second derivatives use three-point
//! non-uniform central stencils.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::chi_survival;
use crate::model::TwoBankModel;
use crate::pricing::{post_default_leg, standalone_leg, TruncatedDomain};

/// HV damping parameter.
pub const HV_THETA: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Tensor grid on `[0, M₁] × [0, M₂]` plus the time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Nodes cluster around these points.
    pub centers: [f64; 2],
    /// Width of the sinh stretching; `∞` gives a uniform grid.
    pub concentration: f64,
    pub dt: f64,
}

fn sinh_nodes(m: f64, n: usize, center: f64, alpha: f64) -> Vec<f64> {
    let mut x: Vec<f64> = if alpha.is_infinite() {
        (0..=n).map(|i| m * i as f64 / n as f64).collect()
    } else {
        let c1 = (-center / alpha).asinh();
        let c2 = ((m - center) / alpha).asinh();
        (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                center + alpha * (c2 * s + c1 * (1.0 - s)).sinh()
            })
            .collect()
    };
    x[0] = 0.0;
    x[n] = m;
    if center > 0.0 && center < m {
        // move the nearest interior node onto the centre so payoff jumps sit on a node
        let j = (1..n).min_by(|&a, &b| (x[a] - center).abs().total_cmp(&(x[b] - center).abs())).expect("at least one interior node");
        x[j] = center;
    }
    x
}

/// Builds a grid with `n[i]` cells per direction, sinh-clustered around `centers`.
pub fn build_grid(m: [f64; 2], n: [usize; 2], centers: [f64; 2], concentration: f64, dt: f64) -> Result<Grid2D> {
    let mut errs = Vec::new();
    for i in 0..2 {
        if n[i] < 20 {
            errs.push(format!("grid needs at least 20 cells per direction, got {}", n[i]));
        }
        if !(m[i] > 0.0) || !m[i].is_finite() {
            errs.push(format!("truncation bound M{} must be positive and finite, got {}", i + 1, m[i]));
        }
    }
    if !(concentration > 0.0) {
        errs.push(format!("concentration must be positive, got {concentration}"));
    }
    if !(dt > 0.0) {
        errs.push(format!("time step must be positive, got {dt}"));
    }
    if !errs.is_empty() {
        return Err(Error::Schema(errs));
    }
    let x1 = sinh_nodes(m[0], n[0], centers[0], concentration);
    let x2 = sinh_nodes(m[1], n[1], centers[1], concentration);
    for x in [&x1, &x2] {
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Numerical("grid nodes are not strictly increasing".into()));
        }
    }
    Ok(Grid2D { x1, x2, centers, concentration, dt })
}

impl Grid2D {
    /// Default grid for `model`: `n × n` cells on the default truncated domain, clustered
    /// around `μ̃^=` with unit stretching width.
    pub fn for_model(model: &TwoBankModel, n: [usize; 2], dt: f64) -> Result<Self> {
        let dom = TruncatedDomain::default_for(model);
        build_grid([dom.m1, dom.m2], n, model.bounds.mu_tilde_eq, 1.0, dt)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x1.len(), self.x2.len())
    }
}

/// Dirichlet data as a function of time to maturity `τ` and the free coordinate.
pub type EdgeData<'a> = Box<dyn Fn(f64, f64) -> f64 + Send + Sync + 'a>;

/// A terminal–boundary value problem in time to maturity.
pub struct PdeProblem<'a> {
    /// Value at `τ = 0`, sampled at nodes.
    pub terminal: Box<dyn Fn([f64; 2]) -> f64 + Send + Sync + 'a>,
    /// On `X₁ = 0`, as a function of `(τ, X₂)`.
    pub x1_lower: EdgeData<'a>,
    /// On `X₁ = M₁`, as a function of `(τ, X₂)`.
    pub x1_upper: EdgeData<'a>,
    /// On `X₂ = 0`, as a function of `(τ, X₁)`.
    pub x2_lower: EdgeData<'a>,
    /// On `X₂ = M₂`, as a function of `(τ, X₁)`.
    pub x2_upper: EdgeData<'a>,
    /// Constant `s` in `V_τ = LV − s` (the nondimensional coupon for prices).
    pub source: f64,
    pub rho: f64,
    pub xi: [f64; 2],
}

/// Field at the final time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSolution {
    pub grid: Grid2D,
    /// Time to maturity reached.
    pub tau: f64,
    /// Row-major values, index `i * x2.len() + j` for node `(x1[i], x2[j])`.
    pub values: Vec<f64>,
}

fn locate(nodes: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = nodes.len();
    if !(x >= nodes[0] && x <= nodes[n - 1]) {
        return None;
    }
    let i = nodes.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
    Some((i, (x - nodes[i]) / (nodes[i + 1] - nodes[i])))
}

impl PdeSolution {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.x2.len() + j]
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: [f64; 2]) -> Option<f64> {
        let (i, a) = locate(&self.grid.x1, x[0])?;
        let (j, b) = locate(&self.grid.x2, x[1])?;
        Some(
            (1.0 - a) * (1.0 - b) * self.at(i, j)
                + a * (1.0 - b) * self.at(i + 1, j)
                + (1.0 - a) * b * self.at(i, j + 1)
                + a * b * self.at(i + 1, j + 1),
        )
    }
}

/// Three-point weights `(w₋, w₀, w₊)` at each interior node for `d/dx` and `d²/dx²`.
struct Stencils {
    d1: Vec<[f64; 3]>,
    d2: Vec<[f64; 3]>,
}

impl Stencils {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let mut d1 = vec![[0.0; 3]; n];
        let mut d2 = vec![[0.0; 3]; n];
        for i in 1..n - 1 {
            let hm = x[i] - x[i - 1];
            let hp = x[i + 1] - x[i];
            d1[i] = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
            d2[i] = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
        }
        Self { d1, d2 }
    }

    /// Weights of `½d² + ξd`.
    fn directional(&self, xi: f64) -> Vec<[f64; 3]> {
        self.d1.iter().zip(&self.d2).map(|(a, b)| [0.5 * b[0] + xi * a[0], 0.5 * b[1] + xi * a[1], 0.5 * b[2] + xi * a[2]]).collect()
    }
}

struct Operators {
    n1: usize,
    n2: usize,
    a1: Vec<[f64; 3]>,
    a2: Vec<[f64; 3]>,
    m1: Vec<[f64; 3]>,
    m2: Vec<[f64; 3]>,
    rho: f64,
    source: f64,
}

impl Operators {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    /// `F₀ = ρ∂₁∂₂V − s` on interior nodes.
    fn mixed(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 1..self.n1 - 1 {
            for j in 1..self.n2 - 1 {
                let mut acc = 0.0;
                for (a, wa) in self.m1[i].iter().enumerate() {
                    let row = self.idx(i + a - 1, 0);
                    for (b, wb) in self.m2[j].iter().enumerate() {
                        acc += wa * wb * v[row + j + b - 1];
                    }
                }
                out[self.idx(i, j)] = self.rho * acc - self.source;
            }
        }
    }

    /// `F₁ = (½∂₁² + ξ₁∂₁)V` on interior nodes.
    fn dir1(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 1..self.n1 - 1 {
            let w = self.a1[i];
            for j in 1..self.n2 - 1 {
                out[self.idx(i, j)] = w[0] * v[self.idx(i - 1, j)] + w[1] * v[self.idx(i, j)] + w[2] * v[self.idx(i + 1, j)];
            }
        }
    }

    fn dir2(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 1..self.n1 - 1 {
            for j in 1..self.n2 - 1 {
                let w = self.a2[j];
                let k = self.idx(i, j);
                out[k] = w[0] * v[k - 1] + w[1] * v[k] + w[2] * v[k + 1];
            }
        }
    }

    /// Solves `(I − c A₁) y = rhs` along every interior `X₁` line; boundary entries of `y`
    /// must already hold the Dirichlet data.
    fn solve1(&self, c: f64, rhs: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n1;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut r = vec![0.0; n];
        for j in 1..self.n2 - 1 {
            for i in 1..n - 1 {
                let w = self.a1[i];
                sub[i] = -c * w[0];
                diag[i] = 1.0 - c * w[1];
                sup[i] = -c * w[2];
                r[i] = rhs[self.idx(i, j)];
            }
            r[1] -= sub[1] * y[self.idx(0, j)];
            r[n - 2] -= sup[n - 2] * y[self.idx(n - 1, j)];
            thomas(&sub[1..n - 1], &mut diag[1..n - 1], &sup[1..n - 1], &mut r[1..n - 1])?;
            for i in 1..n - 1 {
                y[self.idx(i, j)] = r[i];
            }
        }
        Ok(())
    }

    fn solve2(&self, c: f64, rhs: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n2;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 1..self.n1 - 1 {
            for j in 1..n - 1 {
                let w = self.a2[j];
                sub[j] = -c * w[0];
                diag[j] = 1.0 - c * w[1];
                sup[j] = -c * w[2];
                r[j] = rhs[self.idx(i, j)];
            }
            r[1] -= sub[1] * y[self.idx(i, 0)];
            r[n - 2] -= sup[n - 2] * y[self.idx(i, n - 1)];
            thomas(&sub[1..n - 1], &mut diag[1..n - 1], &sup[1..n - 1], &mut r[1..n - 1])?;
            for j in 1..n - 1 {
                y[self.idx(i, j)] = r[j];
            }
        }
        Ok(())
    }
}

/// Tridiagonal solve in place; `sub[0]` and `sup[last]` are ignored.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], r: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for k in 1..n {
        if diag[k - 1] == 0.0 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        let w = sub[k] / diag[k - 1];
        diag[k] -= w * sup[k - 1];
        r[k] -= w * r[k - 1];
    }
    if diag[n - 1] == 0.0 {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    r[n - 1] /= diag[n - 1];
    for k in (0..n - 1).rev() {
        r[k] = (r[k] - sup[k] * r[k + 1]) / diag[k];
    }
    Ok(())
}

fn apply_boundary(problem: &PdeProblem, grid: &Grid2D, tau: f64, v: &mut [f64]) {
    let (n1, n2) = grid.shape();
    for j in 0..n2 {
        v[j] = (problem.x1_lower)(tau, grid.x2[j]);
        v[(n1 - 1) * n2 + j] = (problem.x1_upper)(tau, grid.x2[j]);
    }
    for i in 0..n1 {
        v[i * n2] = (problem.x2_lower)(tau, grid.x1[i]);
        v[i * n2 + n2 - 1] = (problem.x2_upper)(tau, grid.x1[i]);
    }
}

/// Advances the terminal data `steps` steps of size `grid.dt`.
pub fn hv_solve(problem: &PdeProblem, grid: &Grid2D, steps: usize) -> Result<PdeSolution> {
    let (n1, n2) = grid.shape();
    let s1 = Stencils::new(&grid.x1);
    let s2 = Stencils::new(&grid.x2);
    let ops = Operators {
        n1,
        n2,
        a1: s1.directional(problem.xi[0]),
        a2: s2.directional(problem.xi[1]),
        m1: s1.d1,
        m2: s2.d1,
        rho: problem.rho,
        source: problem.source,
    };
    let len = n1 * n2;
    let mut v: Vec<f64> = (0..len).map(|k| (problem.terminal)([grid.x1[k / n2], grid.x2[k % n2]])).collect();
    apply_boundary(problem, grid, 0.0, &mut v);
    let dt = grid.dt;
    let c = HV_THETA * dt;
    let (mut f0, mut f1, mut f2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let (mut g0, mut g1, mut g2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let (mut y0, mut y, mut z) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut rhs = vec![0.0; len];
    for step in 0..steps {
        let tau_next = (step + 1) as f64 * dt;
        ops.mixed(&v, &mut f0);
        ops.dir1(&v, &mut f1);
        ops.dir2(&v, &mut f2);
        // predictor
        for k in 0..len {
            y0[k] = v[k] + dt * (f0[k] + f1[k] + f2[k]);
        }
        y.copy_from_slice(&y0);
        apply_boundary(problem, grid, tau_next, &mut y);
        for k in 0..len {
            rhs[k] = y[k] - c * f1[k];
        }
        ops.solve1(c, &rhs, &mut y)?;
        for k in 0..len {
            rhs[k] = y[k] - c * f2[k];
        }
        ops.solve2(c, &rhs, &mut y)?;
        // corrector: Ỹ₀ = Y₀ + ½Δτ(F(Y₂) − F(Vⁿ))
        ops.mixed(&y, &mut g0);
        ops.dir1(&y, &mut g1);
        ops.dir2(&y, &mut g2);
        for k in 0..len {
            z[k] = y0[k] + 0.5 * dt * ((g0[k] + g1[k] + g2[k]) - (f0[k] + f1[k] + f2[k]));
        }
        apply_boundary(problem, grid, tau_next, &mut z);
        for k in 0..len {
            rhs[k] = z[k] - c * g1[k];
        }
        ops.solve1(c, &rhs, &mut z)?;
        for k in 0..len {
            rhs[k] = z[k] - c * g2[k];
        }
        ops.solve2(c, &rhs, &mut z)?;
        std::mem::swap(&mut v, &mut z);
    }
    Ok(PdeSolution { grid: grid.clone(), tau: steps as f64 * dt, values: v })
}

/// The four fields of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Joint survival.
    #[serde(rename = "Q")]
    JointSurvival,
    /// Survival of bank 1.
    #[serde(rename = "q1")]
    MarginalSurvival,
    /// CDS on bank 1.
    #[serde(rename = "C1")]
    Cds,
    /// First-to-default swap.
    #[serde(rename = "F1")]
    Ftd,
}

impl FieldKind {
    pub fn label(self) -> &'static str {
        match self {
            FieldKind::JointSurvival => "Q",
            FieldKind::MarginalSurvival => "q1",
            FieldKind::Cds => "C1",
            FieldKind::Ftd => "F1",
        }
    }
}

/// Solves one field of `model` from maturity back to `t = 0` on `grid`.
///
/// `coupon` is the calendar coupon rate of the CDS or first-to-default swap and is
/// ignored for probabilities. The number of steps is `⌈T̄/dt⌉` with the step shrunk to
/// land exactly on `T̄`.
pub fn solve_field(kind: FieldKind, model: &TwoBankModel, coupon: f64, grid: &Grid2D) -> Result<PdeSolution> {
    let b = &model.bounds;
    let tbar = model.maturity_bar;
    let steps = (tbar / grid.dt - 1e-9).ceil().max(1.0) as usize;
    let mut grid = grid.clone();
    grid.dt = tbar / steps as f64;
    let m1 = *grid.x1.last().expect("non-empty grid");
    let m2 = *grid.x2.last().expect("non-empty grid");
    let chi1 = move |tau: f64, x: f64| chi_survival(tau, x, 0.0, b.mu_eq[0], b.xi[0]);
    let chi2 = move |tau: f64, x: f64| chi_survival(tau, x, 0.0, b.mu_eq[1], b.xi[1]);
    let r = [model.net.recovery[0], model.net.recovery[1]];
    let c_inf1 = standalone_leg(model, 0, coupon);
    let c_inf2 = standalone_leg(model, 1, coupon);
    let psi = post_default_leg(model, 0, coupon);
    let coupon_bar = coupon / (b.omega * b.omega);
    let m = model;
    let problem = match kind {
        FieldKind::JointSurvival => PdeProblem {
            terminal: Box::new(move |x| m.half_max(|y| m.both_survive(y), x)),
            x1_lower: Box::new(|_, _| 0.0),
            x1_upper: Box::new(move |tau, x2| chi1(tau, m1) * chi2(tau, x2)),
            x2_lower: Box::new(|_, _| 0.0),
            x2_upper: Box::new(move |tau, x1| chi1(tau, x1) * chi2(tau, m2)),
            source: 0.0,
            rho: m.geom.rho,
            xi: b.xi,
        },
        FieldKind::MarginalSurvival => PdeProblem {
            terminal: Box::new(move |x| m.half_max(|y| m.bank1_survives(y), x)),
            x1_lower: Box::new(|_, _| 0.0),
            x1_upper: Box::new(move |tau, _| chi1(tau, m1)),
            x2_lower: Box::new(move |tau, x1| {
                if x1 > b.mu_tilde_lt[0] {
                    chi_survival(tau, x1, b.mu_tilde_lt[0], b.mu_tilde_eq[0], b.xi[0])
                } else {
                    0.0
                }
            }),
            x2_upper: Box::new(chi1),
            source: 0.0,
            rho: m.geom.rho,
            xi: b.xi,
        },
        FieldKind::Cds => PdeProblem {
            terminal: Box::new(move |x| m.half_max(|y| m.cds_payoff(y), x)),
            x1_lower: Box::new(move |_, _| 1.0 - r[0]),
            x1_upper: Box::new(move |tau, _| c_inf1.price(tau, m1)),
            x2_lower: Box::new(move |tau, x1| psi.price(tau, x1)),
            x2_upper: Box::new(move |tau, x1| c_inf1.price(tau, x1)),
            source: coupon_bar,
            rho: m.geom.rho,
            xi: b.xi,
        },
        FieldKind::Ftd => PdeProblem {
            terminal: Box::new(move |x| m.half_max(|y| m.ftd_payoff(y), x)),
            x1_lower: Box::new(move |_, _| 1.0 - r[0]),
            x1_upper: Box::new(move |tau, x2| c_inf2.price(tau, x2)),
            x2_lower: Box::new(move |_, _| 1.0 - r[1]),
            x2_upper: Box::new(move |tau, x1| c_inf1.price(tau, x1)),
            source: coupon_bar,
            rho: m.geom.rho,
            xi: b.xi,
        },
    };
    hv_solve(&problem, &grid, steps)
}
