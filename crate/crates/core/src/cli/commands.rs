//! Command dispatch and tabular output.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Format, Method, RunConfig};
use crate::calibrate::{calibrate, price_quotes, CalibrationOptions, QuoteSet};
use crate::clearing::{classify_terminal_region, effective_recovery, solve_clearing, ClearingProblem, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::greens::SeriesBudget;
use crate::model::TwoBankModel;
use crate::network::{standard_boundaries, BankNetwork, BoundarySet};
use crate::pde::{build_grid, solve_field, FieldKind, Grid2D, PdeSolution};
use crate::pricing::{cds_2d, ftd_2d, ContractKind, ContractSpec, PricingOptions, TruncatedDomain};
use crate::survival::{joint_survival, marginal_survival, SurvivalRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Default thresholds in asset and nondimensional units.
    Boundaries,
    /// Clearing vector and effective recoveries for `scenario.terminal_assets`.
    Clear,
    /// Point prices of every contract.
    Price,
    /// Q, q1, C1 and F1 on the grid.
    Surface,
    /// Mutual-obligation surfaces against the adjusted network, at equal nondimensional coordinates.
    Diff,
    /// Gap between the analytic and finite-difference surfaces.
    Validate,
    /// Fit sigma and rho to the CDS and first-to-default quotes.
    Calibrate,
}

/// Default coupon when the configuration lists no contract of a kind.
pub const DEFAULT_COUPON: f64 = 0.02;

/// Interior margin, in cells, excluded from `validate`.
pub const VALIDATE_MARGIN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip form; exponent notation keeps tiny and huge values short
            Cell::Num(v) if *v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&v.abs()) => format!("{v}"),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A rectangular result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[k] {
                    Cell::Num(v) => v,
                    Cell::Int(v) => v as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows.iter().map(|r| Value::Object(self.header.iter().cloned().zip(r.iter().map(|c| json!(c))).collect())).collect(),
        )
    }
}

/// What a command produced: a table, or a JSON document with a flat table view.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub table: Table,
    pub document: Option<Value>,
}

impl Artifact {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.table.to_csv(),
            Format::Json => {
                let v = self.document.clone().unwrap_or_else(|| self.table.to_json());
                Ok(serde_json::to_string_pretty(&v).expect("json values serialize") + "\n")
            }
        }
    }
}

/// Flag overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<Method>,
    pub grid: Option<[usize; 2]>,
    pub dt: Option<f64>,
    pub nmax: Option<usize>,
    pub tol: Option<f64>,
    pub no_mutual: bool,
    pub output: Option<std::path::PathBuf>,
    pub format: Option<Format>,
}

impl Overrides {
    /// Applies the overrides and re-checks the numerics they touch.
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let n = &mut cfg.numerics;
        if let Some(m) = self.method {
            n.method = m;
        }
        if let Some(g) = self.grid {
            n.grid = g;
        }
        if let Some(dt) = self.dt {
            n.dt = dt;
        }
        if let Some(k) = self.nmax {
            n.nmax = k;
        }
        if let Some(t) = self.tol {
            n.tol = t;
        }
        if let Some(p) = &self.output {
            cfg.output.path = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        let mut errs = Vec::new();
        super::config::check_numerics(&mut errs, &cfg.numerics);
        if !errs.is_empty() {
            return Err(Error::Schema(errs));
        }
        if self.no_mutual {
            let adjusted = cfg.network.adjusted()?;
            cfg.unadjusted = Some(std::mem::replace(&mut cfg.network, adjusted));
        }
        Ok(())
    }
}

/// Parses `N1xN2`.
pub fn parse_grid(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected N1xN2, got {s}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad grid size {v}: {e}"));
    Ok([p(a)?, p(b)?])
}

fn pricing_options(cfg: &RunConfig) -> Result<PricingOptions> {
    Ok(PricingOptions {
        quad_tol: cfg.numerics.tol,
        budget: SeriesBudget::new(cfg.numerics.nmax, SeriesBudget::default().tail_tol)?,
        ..PricingOptions::default()
    })
}

fn grid_for(cfg: &RunConfig, model: &TwoBankModel) -> Result<Grid2D> {
    let dom = TruncatedDomain::default_for(model);
    let alpha = cfg.numerics.concentration.unwrap_or(f64::INFINITY);
    build_grid([dom.m1, dom.m2], cfg.numerics.grid, model.bounds.mu_tilde_eq, alpha, cfg.numerics.dt)
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Artifact> {
    match cmd {
        Command::Boundaries => boundaries(cfg),
        Command::Clear => clear(cfg),
        Command::Price => price(cfg),
        Command::Surface => surface(cfg),
        Command::Diff => diff(cfg),
        Command::Validate => validate(cfg),
        Command::Calibrate => run_calibration(cfg),
    }
}

fn boundaries(cfg: &RunConfig) -> Result<Artifact> {
    let net = &cfg.network;
    let n = net.n_banks();
    let mut header = vec!["quantity".to_string()];
    header.extend((1..=n).map(|i| format!("bank{i}")));
    let mut table = Table { header, rows: Vec::new() };
    let row = |name: &str, v: &[f64]| {
        let mut r = vec![Cell::from(name)];
        r.extend(v.iter().map(|&x| Cell::Num(x)));
        r
    };
    if n != 2 {
        let s = standard_boundaries(net, 0.0);
        table.push(row("lambda_lt", &s.lambda_lt));
        table.push(row("lambda_eq", &s.lambda_eq));
        return Ok(Artifact { table, document: None });
    }
    let b = BoundarySet::new(net, 0.0)?;
    table.push(row("lambda_lt", &b.lambda_lt));
    table.push(row("lambda_eq", &b.lambda_eq));
    table.push(row("lambda_tilde_lt", &b.lambda_tilde_lt));
    table.push(row("lambda_tilde_eq", &b.lambda_tilde_eq));
    table.push(row("mu_lt", &b.mu_lt));
    table.push(row("mu_eq", &b.mu_eq));
    table.push(row("mu_tilde_lt", &b.mu_tilde_lt));
    table.push(row("mu_tilde_eq", &b.mu_tilde_eq));
    table.push(row("xi", &b.xi));
    table.push(row("omega", &[b.omega, b.omega]));
    if let Ok(m) = TwoBankModel::new(net) {
        table.push(row("spot_x", &m.spot));
        table.push(row("maturity_bar", &[m.maturity_bar, m.maturity_bar]));
    }
    Ok(Artifact { table, document: None })
}

fn clear(cfg: &RunConfig) -> Result<Artifact> {
    let net = &cfg.network;
    let a = cfg.scenario.terminal_assets.clone().ok_or_else(|| Error::schema("clear needs scenario.terminal_assets"))?;
    let sol = solve_clearing(&ClearingProblem::from_network(net, &a)?, DEFAULT_TOL)?;
    let r = effective_recovery(net, &a, &sol.gamma)?;
    let region = (net.n_banks() == 2).then(|| classify_terminal_region(net, [a[0], a[1]]).label());
    let mut table = Table::new(&["bank", "terminal_assets", "gamma", "effective_recovery", "region"]);
    for i in 0..net.n_banks() {
        table.push(vec![Cell::Int(i + 1), a[i].into(), sol.gamma[i].into(), r[i].into(), region.unwrap_or("").into()]);
    }
    let document = json!({
        "gamma": sol.gamma,
        "effective_recovery": r,
        "region": region,
        "iterations": sol.iterations,
        "residual": sol.residual,
    });
    Ok(Artifact { table, document: Some(document) })
}

/// Finite-difference values of `spec` at nondimensional time `t` and the points `xs`.
fn fd_prices(cfg: &RunConfig, model: &TwoBankModel, spec: &ContractSpec, t: f64, xs: &[[f64; 2]]) -> Result<Vec<f64>> {
    let swap = spec.reference == 1;
    let m = if swap { model.swapped()? } else { model.clone() };
    // rate is zero in the model, so a later valuation time is a shorter maturity
    let mut net = m.net.clone();
    net.maturity -= t / (m.omega() * m.omega());
    if !(net.maturity > 0.0) {
        return Err(Error::Domain(format!("valuation time {t} is not before maturity")));
    }
    let m = TwoBankModel::new(&net)?;
    let grid = grid_for(cfg, &m)?;
    let kind = match spec.kind {
        ContractKind::Cds => FieldKind::Cds,
        ContractKind::Ftd => FieldKind::Ftd,
    };
    let sol = solve_field(kind, &m, spec.coupon, &grid)?;
    xs.iter()
        .map(|x| {
            let x = if swap { [x[1], x[0]] } else { *x };
            sol.interpolate(x).ok_or_else(|| Error::Domain(format!("point {x:?} lies outside the finite-difference grid")))
        })
        .collect()
}

fn price(cfg: &RunConfig) -> Result<Artifact> {
    let model = TwoBankModel::new(&cfg.network)?;
    let points = if cfg.numerics.points.is_empty() { vec![model.spot] } else { cfg.numerics.points.clone() };
    let t = cfg.numerics.valuation_time;
    let opts = pricing_options(cfg)?;
    let contracts = if cfg.contracts.is_empty() {
        vec![ContractSpec::cds(0, DEFAULT_COUPON), ContractSpec::cds(1, DEFAULT_COUPON), ContractSpec::ftd(DEFAULT_COUPON)]
    } else {
        cfg.contracts.clone()
    };
    let jobs: Vec<(ContractSpec, [f64; 2])> = contracts.iter().flat_map(|c| points.iter().map(move |p| (*c, *p))).collect();
    let values: Vec<Result<f64>> = match cfg.numerics.method {
        Method::Analytic => jobs
            .par_iter()
            .map(|(c, x)| match c.kind {
                ContractKind::Cds => cds_2d(&model, t, *x, c, &opts),
                ContractKind::Ftd => ftd_2d(&model, t, *x, c, &opts),
            })
            .collect(),
        Method::Fd => {
            let per_contract: Vec<Result<Vec<f64>>> = contracts.par_iter().map(|c| fd_prices(cfg, &model, c, t, &points)).collect();
            let mut flat = Vec::with_capacity(jobs.len());
            for r in per_contract {
                {
                    let v = r?;
                    flat.extend(v.into_iter().map(Ok))
                }
            }
            flat
        }
    };
    let method = match cfg.numerics.method {
        Method::Analytic => "analytic",
        Method::Fd => "fd",
    };
    let mut table = Table::new(&["kind", "reference", "coupon", "x1", "x2", "value", "method"]);
    for ((c, x), v) in jobs.iter().zip(values) {
        let kind = match c.kind {
            ContractKind::Cds => "cds",
            ContractKind::Ftd => "ftd",
        };
        table.push(vec![kind.into(), Cell::Int(c.reference), c.coupon.into(), x[0].into(), x[1].into(), v?.into(), method.into()]);
    }
    Ok(Artifact { table, document: None })
}

const FIELDS: [FieldKind; 4] = [FieldKind::JointSurvival, FieldKind::MarginalSurvival, FieldKind::Cds, FieldKind::Ftd];

fn field_coupon(cfg: &RunConfig, kind: FieldKind) -> f64 {
    match kind {
        FieldKind::Cds => cfg.cds_coupon(DEFAULT_COUPON),
        FieldKind::Ftd => cfg.ftd_coupon(DEFAULT_COUPON),
        _ => 0.0,
    }
}

/// Analytic value of a field at `t = 0`.
pub fn analytic_field(kind: FieldKind, model: &TwoBankModel, coupon: f64, x: [f64; 2], opts: &PricingOptions) -> Result<f64> {
    let req = SurvivalRequest { quad_tol: opts.quad_tol, budget: opts.budget, ..SurvivalRequest::new(0.0, x) };
    match kind {
        FieldKind::JointSurvival => joint_survival(model, &req),
        FieldKind::MarginalSurvival => marginal_survival(model, &req),
        FieldKind::Cds => cds_2d(model, 0.0, x, &ContractSpec::cds(0, coupon), opts),
        FieldKind::Ftd => ftd_2d(model, 0.0, x, &ContractSpec::ftd(coupon), opts),
    }
}

/// Values of all four fields at the nodes `(i, j)` of `grid`.
struct Surfaces {
    nodes: Vec<(usize, usize)>,
    points: Vec<[f64; 2]>,
    values: Vec<[f64; 4]>,
}

fn strided_nodes(grid: &Grid2D, stride: usize, margin: usize) -> Vec<(usize, usize)> {
    let (n1, n2) = grid.shape();
    let axis = |n: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (margin..n - margin).step_by(stride).collect();
        if v.last() != Some(&(n - 1 - margin)) {
            v.push(n - 1 - margin);
        }
        v
    };
    let (a1, a2) = (axis(n1), axis(n2));
    a1.iter().flat_map(|&i| a2.iter().map(move |&j| (i, j))).collect()
}

fn fd_fields(cfg: &RunConfig, model: &TwoBankModel, grid: &Grid2D) -> Result<Vec<PdeSolution>> {
    FIELDS.par_iter().map(|&k| solve_field(k, model, field_coupon(cfg, k), grid)).collect()
}

/// Analytic values of the four fields of `model` at `points`.
fn analytic_values(cfg: &RunConfig, model: &TwoBankModel, points: &[[f64; 2]]) -> Result<Vec<[f64; 4]>> {
    let opts = pricing_options(cfg)?;
    points
        .par_iter()
        .map(|&x| {
            let mut out = [0.0; 4];
            for (k, kind) in FIELDS.iter().enumerate() {
                out[k] = analytic_field(*kind, model, field_coupon(cfg, *kind), x, &opts)?;
            }
            Ok(out)
        })
        .collect()
}

fn surfaces(cfg: &RunConfig, model: &TwoBankModel) -> Result<(Grid2D, Surfaces)> {
    let grid = grid_for(cfg, model)?;
    let stride = match cfg.numerics.method {
        Method::Fd => 1,
        Method::Analytic => cfg.numerics.stride,
    };
    let nodes = strided_nodes(&grid, stride, 0);
    let points: Vec<[f64; 2]> = nodes.iter().map(|&(i, j)| [grid.x1[i], grid.x2[j]]).collect();
    let values = match cfg.numerics.method {
        Method::Fd => {
            let sols = fd_fields(cfg, model, &grid)?;
            nodes.iter().map(|&(i, j)| std::array::from_fn(|k| sols[k].at(i, j))).collect()
        }
        Method::Analytic => analytic_values(cfg, model, &points)?,
    };
    Ok((grid, Surfaces { nodes, points, values }))
}

fn surface(cfg: &RunConfig) -> Result<Artifact> {
    let model = TwoBankModel::new(&cfg.network)?;
    let (_, s) = surfaces(cfg, &model)?;
    let mut table = Table::new(&["x1", "x2", "a1", "a2", "Q", "q1", "C1", "F1"]);
    for (x, v) in s.points.iter().zip(&s.values) {
        let mut row: Vec<Cell> = vec![x[0].into(), x[1].into(), model.x_to_a(0, x[0]).into(), model.x_to_a(1, x[1]).into()];
        row.extend(v.iter().map(|&y| Cell::Num(y)));
        table.push(row);
    }
    Ok(Artifact { table, document: None })
}

/// Mutual-obligation surfaces minus those of the adjusted network, on matched
/// nondimensional coordinates: both models are evaluated at the same nodes `X`.
pub fn diff_table(cfg: &RunConfig, net: &BankNetwork) -> Result<Table> {
    let model = TwoBankModel::new(net)?;
    let adjusted = TwoBankModel::new(&net.adjusted()?)?;
    let (grid, s) = surfaces(cfg, &model)?;
    let other: Vec<[f64; 4]> = match cfg.numerics.method {
        Method::Fd => {
            let sols = fd_fields(cfg, &adjusted, &grid)?;
            s.nodes.iter().map(|&(i, j)| std::array::from_fn(|k| sols[k].at(i, j))).collect()
        }
        Method::Analytic => analytic_values(cfg, &adjusted, &s.points)?,
    };
    let mut header = vec!["x1", "x2"];
    let names = [
        ["Q_mutual", "Q_adjusted", "dQ"],
        ["q1_mutual", "q1_adjusted", "dq1"],
        ["C1_mutual", "C1_adjusted", "dC1"],
        ["F1_mutual", "F1_adjusted", "dF1"],
    ];
    header.extend(names.iter().flatten());
    let mut table = Table::new(&header);
    for ((x, v), w) in s.points.iter().zip(&s.values).zip(&other) {
        let mut row: Vec<Cell> = vec![x[0].into(), x[1].into()];
        for k in 0..4 {
            row.extend([Cell::Num(v[k]), Cell::Num(w[k]), Cell::Num(v[k] - w[k])]);
        }
        table.push(row);
    }
    Ok(table)
}

fn diff(cfg: &RunConfig) -> Result<Artifact> {
    Ok(Artifact { table: diff_table(cfg, &cfg.network)?, document: None })
}

/// Per-field gap between the analytic formulas and the finite-difference solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub field: &'static str,
    pub max_abs_gap: f64,
    pub mean_abs_gap: f64,
    pub argmax: [f64; 2],
    pub points: usize,
}

/// Compares on every `stride`-th node at least [`VALIDATE_MARGIN`] cells from the edges.
pub fn validation_report(cfg: &RunConfig, model: &TwoBankModel, stride: usize) -> Result<Vec<GapReport>> {
    let grid = grid_for(cfg, model)?;
    let opts = pricing_options(cfg)?;
    let nodes = strided_nodes(&grid, stride, VALIDATE_MARGIN);
    let sols = fd_fields(cfg, model, &grid)?;
    let mut out = Vec::new();
    for (k, kind) in FIELDS.iter().enumerate() {
        let coupon = field_coupon(cfg, *kind);
        let gaps: Vec<Result<(f64, [f64; 2])>> = nodes
            .par_iter()
            .map(|&(i, j)| {
                let x = [grid.x1[i], grid.x2[j]];
                Ok(((analytic_field(*kind, model, coupon, x, &opts)? - sols[k].at(i, j)).abs(), x))
            })
            .collect();
        let gaps = gaps.into_iter().collect::<Result<Vec<_>>>()?;
        let (max, argmax) = gaps.iter().fold((0.0, [f64::NAN; 2]), |acc, &(g, x)| if g > acc.0 { (g, x) } else { acc });
        out.push(GapReport {
            field: kind.label(),
            max_abs_gap: max,
            mean_abs_gap: gaps.iter().map(|g| g.0).sum::<f64>() / gaps.len() as f64,
            argmax,
            points: gaps.len(),
        });
    }
    Ok(out)
}

fn validate(cfg: &RunConfig) -> Result<Artifact> {
    let model = TwoBankModel::new(&cfg.network)?;
    let report = validation_report(cfg, &model, cfg.numerics.stride)?;
    let mut table = Table::new(&["field", "max_abs_gap", "mean_abs_gap", "argmax_x1", "argmax_x2", "points"]);
    for r in &report {
        table.push(vec![
            r.field.into(),
            r.max_abs_gap.into(),
            r.mean_abs_gap.into(),
            r.argmax[0].into(),
            r.argmax[1].into(),
            r.points.into(),
        ]);
    }
    Ok(Artifact { table, document: Some(serde_json::to_value(&report).expect("report serializes")) })
}

fn run_calibration(cfg: &RunConfig) -> Result<Artifact> {
    let opts = CalibrationOptions { pricing: pricing_options(cfg)?, ..CalibrationOptions::default() };
    let coupon_for = |reference: usize| {
        cfg.contracts.iter().find(|c| c.kind == ContractKind::Cds && c.reference == reference).map_or(0.05, |c| c.coupon)
    };
    let (quotes, source) = match &cfg.scenario.quotes {
        Some(q) => (
            QuoteSet {
                c1: q.c1,
                c2: q.c2,
                f1: q.f1,
                maturity: q.maturity.unwrap_or(cfg.network.maturity),
                coupons: q.coupons.unwrap_or([coupon_for(0), coupon_for(1)]),
            },
            "scenario",
        ),
        None => {
            // quotes come from the network as configured, before any adjustment
            let coupons = [coupon_for(0), coupon_for(1)];
            let net = cfg.unadjusted.as_ref().unwrap_or(&cfg.network);
            let p = price_quotes(net, [net.sigma[0], net.sigma[1]], net.rho(), coupons, &opts.pricing)?;
            (QuoteSet { c1: p[0], c2: p[1], f1: p[2], maturity: net.maturity, coupons }, "self")
        }
    };
    let res = calibrate(&cfg.network, &quotes, &opts)?;
    let mut table = Table::new(&["quantity", "value"]);
    let rows: [(&str, f64); 9] = [
        ("sigma1", res.sigma[0]),
        ("sigma2", res.sigma[1]),
        ("rho", res.rho),
        ("objective", res.objective),
        ("iterations", res.iterations as f64),
        ("residual_c1", res.residuals[0]),
        ("residual_c2", res.residuals[1]),
        ("residual_f1", res.residuals[2]),
        ("converged", if res.converged { 1.0 } else { 0.0 }),
    ];
    for (k, v) in rows {
        table.push(vec![k.into(), v.into()]);
    }
    let document = json!({ "result": res, "quotes": quotes, "quote_source": source });
    Ok(Artifact { table, document: Some(document) })
}
