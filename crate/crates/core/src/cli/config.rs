//! The JSON run configuration and its schema check.
//!
//! ```json
//! {
//!   "network":   { "assets": [300, 300], "liabilities": [60, 70],
//!                  "mutual": [[0, 10], [15, 0]], "recovery": [0.4, 0.45],
//!                  "sigma": [1, 1], "rho": 0.5, "maturity": 1, "rate": 0 },
//!   "contracts": [ { "kind": "cds", "reference": 0, "coupon": 0.02 },
//!                  { "kind": "ftd", "coupon": 0.02 } ],
//!   "numerics":  { "method": "analytic", "grid": [100, 100], "dt": 0.01,
//!                  "nmax": 400, "tol": 1e-8 },
//!   "output":    { "format": "csv", "path": null },
//!   "scenario":  { "terminal_assets": [20, 10],
//!                  "quotes": { "c1": -0.05, "c2": -0.0497, "f1": -0.0497 } }
//! }
//! ```
//!
//! Every key outside `network` is optional. Unknown keys are rejected so that typos
//! do not silently fall back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::network::BankNetwork;
use crate::pricing::{ContractKind, ContractSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub method: Method,
    /// Cells per direction of the finite-difference grid.
    pub grid: [usize; 2],
    /// Time step in nondimensional time.
    pub dt: f64,
    /// Eigenmode cap of the wedge series.
    pub nmax: usize,
    /// Relative quadrature tolerance of the analytic formulas.
    pub tol: f64,
    /// Width of the sinh grid stretching around `μ̃^=`; `null` for a uniform grid.
    pub concentration: Option<f64>,
    /// Analytic surfaces are evaluated on every `stride`-th grid node.
    pub stride: usize,
    /// Nondimensional valuation time of point prices.
    pub valuation_time: f64,
    /// Evaluation points `X` for `price`; the spot implied by the assets when empty.
    pub points: Vec<[f64; 2]>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            method: Method::Analytic,
            grid: [100, 100],
            dt: 0.01,
            nmax: 400,
            tol: 1e-8,
            concentration: Some(1.0),
            stride: 5,
            valuation_time: 0.0,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub format: Format,
    pub path: Option<PathBuf>,
}

impl Default for Output {
    fn default() -> Self {
        Self { format: Format::Csv, path: None }
    }
}

/// Quotes for `calibrate`; maturity and coupons default to the network's maturity and
/// the CDS coupons in `contracts`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteInput {
    pub c1: f64,
    pub c2: f64,
    pub f1: f64,
    pub maturity: Option<f64>,
    pub coupons: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Terminal assets for `clear`.
    pub terminal_assets: Option<Vec<f64>>,
    /// Quotes for `calibrate`; when absent the quotes are generated from the network's
    /// own `sigma` and `rho`.
    pub quotes: Option<QuoteInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: BankNetwork,
    pub contracts: Vec<ContractSpec>,
    pub numerics: Numerics,
    pub output: Output,
    pub scenario: Scenario,
    /// The network before `--no-mutual` removed its mutual obligations.
    #[serde(skip)]
    pub unadjusted: Option<BankNetwork>,
}

impl RunConfig {
    /// First CDS coupon in `contracts`, or `default`.
    pub fn cds_coupon(&self, default: f64) -> f64 {
        self.contracts.iter().find(|c| c.kind == ContractKind::Cds).map_or(default, |c| c.coupon)
    }

    pub fn ftd_coupon(&self, default: f64) -> f64 {
        self.contracts.iter().find(|c| c.kind == ContractKind::Ftd).map_or(default, |c| c.coupon)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Collects schema violations while walking the document.
#[derive(Default)]
struct Checker {
    errs: Vec<String>,
}

impl Checker {
    fn unknown(&mut self, obj: &Map<String, Value>, section: &str, allowed: &[&str]) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                self.errs.push(format!("{section}: unknown key \"{k}\""));
            }
        }
    }

    fn number(&mut self, obj: &Map<String, Value>, section: &str, key: &str, required: bool) {
        match obj.get(key) {
            None if required => self.errs.push(format!("{section}: missing key \"{key}\"")),
            None | Some(Value::Number(_)) => {}
            Some(v) => self.errs.push(format!("{section}.{key}: expected a number, got {}", kind_of(v))),
        }
    }

    fn numbers(&mut self, obj: &Map<String, Value>, section: &str, key: &str, len: Option<usize>, required: bool) {
        match obj.get(key) {
            None if required => self.errs.push(format!("{section}: missing key \"{key}\"")),
            None => {}
            Some(Value::Array(a)) => {
                if let Some(n) = len {
                    if a.len() != n {
                        self.errs.push(format!("{section}.{key}: expected {n} entries, got {}", a.len()));
                    }
                }
                for (i, v) in a.iter().enumerate() {
                    if !v.is_number() {
                        self.errs.push(format!("{section}.{key}[{i}]: expected a number, got {}", kind_of(v)));
                    }
                }
            }
            Some(v) => self.errs.push(format!("{section}.{key}: expected an array, got {}", kind_of(v))),
        }
    }

    fn matrix(&mut self, obj: &Map<String, Value>, section: &str, key: &str, n: usize, required: bool) {
        match obj.get(key) {
            None if required => self.errs.push(format!("{section}: missing key \"{key}\"")),
            None => {}
            Some(Value::Array(rows)) => {
                if rows.len() != n {
                    self.errs.push(format!("{section}.{key}: expected {n} rows, got {}", rows.len()));
                }
                for (i, r) in rows.iter().enumerate() {
                    let Some(r) = r.as_array() else {
                        self.errs.push(format!("{section}.{key}[{i}]: expected an array, got {}", kind_of(r)));
                        continue;
                    };
                    if r.len() != n || r.iter().any(|v| !v.is_number()) {
                        self.errs.push(format!("{section}.{key}[{i}]: expected {n} numbers"));
                    }
                }
            }
            Some(v) => self.errs.push(format!("{section}.{key}: expected an array, got {}", kind_of(v))),
        }
    }

    fn section<'a>(&mut self, doc: &'a Map<String, Value>, key: &str) -> Option<&'a Map<String, Value>> {
        match doc.get(key) {
            None | Some(Value::Null) => None,
            Some(Value::Object(o)) => Some(o),
            Some(v) => {
                self.errs.push(format!("{key}: expected an object, got {}", kind_of(v)));
                None
            }
        }
    }

    fn network(&mut self, net: &Map<String, Value>) -> Option<BankNetwork> {
        const S: &str = "network";
        self.unknown(net, S, &["assets", "liabilities", "mutual", "recovery", "sigma", "rho", "correlation", "maturity", "rate"]);
        let n = net.get("liabilities").and_then(Value::as_array).map(Vec::len);
        self.numbers(net, S, "liabilities", None, true);
        for key in ["assets", "recovery", "sigma"] {
            self.numbers(net, S, key, n, true);
        }
        self.number(net, S, "maturity", true);
        self.number(net, S, "rate", false);
        if let Some(n) = n {
            self.matrix(net, S, "mutual", n, true);
            self.matrix(net, S, "correlation", n, false);
        }
        match (net.get("rho"), net.get("correlation")) {
            (None, None) => self.errs.push(format!("{S}: missing key \"rho\" (or \"correlation\")")),
            (Some(_), Some(_)) => self.errs.push(format!("{S}: give either \"rho\" or \"correlation\", not both")),
            (Some(_), None) => {
                self.number(net, S, "rho", true);
                if n.is_some_and(|n| n != 2) {
                    self.errs.push(format!("{S}.rho: a scalar correlation needs exactly two banks"));
                }
            }
            (None, Some(_)) => {}
        }
        let before = self.errs.len();
        if before > 0 {
            return None;
        }
        let get = |k: &str| -> Vec<f64> { net[k].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default() };
        let get_matrix = |k: &str| -> Vec<Vec<f64>> {
            net[k]
                .as_array()
                .map(|rows| {
                    rows.iter().map(|r| r.as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()).collect()
                })
                .unwrap_or_default()
        };
        let correlation = match net.get("rho").and_then(Value::as_f64) {
            Some(rho) => vec![vec![1.0, rho], vec![rho, 1.0]],
            None => get_matrix("correlation"),
        };
        let network = BankNetwork {
            assets: get("assets"),
            liabilities: get("liabilities"),
            mutual: get_matrix("mutual"),
            recovery: get("recovery"),
            sigma: get("sigma"),
            correlation,
            rate: net.get("rate").and_then(Value::as_f64).unwrap_or(0.0),
            maturity: net["maturity"].as_f64().unwrap_or(f64::NAN),
        };
        match network.validate() {
            Ok(()) => Some(network),
            Err(Error::Schema(v)) => {
                self.errs.extend(v.into_iter().map(|e| format!("{S}: {e}")));
                None
            }
            Err(e) => {
                self.errs.push(format!("{S}: {e}"));
                None
            }
        }
    }

    fn typed<T: for<'de> Deserialize<'de>>(&mut self, v: &Value, section: &str) -> Option<T> {
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                self.errs.push(format!("{section}: {e}"));
                None
            }
        }
    }
}

/// Parses and validates a configuration document, listing every violation found.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::schema(format!("not valid JSON: {e}")))?;
    let Some(doc) = doc.as_object() else {
        return Err(Error::schema(format!("top level: expected an object, got {}", kind_of(&doc))));
    };
    let mut c = Checker::default();
    c.unknown(doc, "top level", &["network", "contracts", "numerics", "output", "scenario"]);
    let network = match c.section(doc, "network") {
        Some(net) => c.network(net),
        None => {
            if !doc.contains_key("network") {
                c.errs.push("top level: missing key \"network\"".into());
            }
            None
        }
    };
    let contracts: Vec<ContractSpec> = match doc.get("contracts") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => c.typed(v, "contracts").unwrap_or_default(),
    };
    for (i, spec) in contracts.iter().enumerate() {
        if let Err(Error::Schema(v)) = spec.validate() {
            c.errs.extend(v.into_iter().map(|e| format!("contracts[{i}]: {e}")));
        }
    }
    let numerics = merge_defaults::<Numerics>(&mut c, doc, "numerics").unwrap_or_default();
    let output = merge_defaults::<Output>(&mut c, doc, "output").unwrap_or_default();
    let scenario: Scenario = match c.section(doc, "scenario") {
        Some(s) => c.typed(&Value::Object(s.clone()), "scenario").unwrap_or_default(),
        None => Scenario::default(),
    };
    check_numerics(&mut c.errs, &numerics);
    if let Some(a) = &scenario.terminal_assets {
        if let Some(net) = &network {
            if a.len() != net.n_banks() {
                c.errs.push(format!("scenario.terminal_assets: expected {} entries, got {}", net.n_banks(), a.len()));
            }
        }
    }
    if !c.errs.is_empty() {
        return Err(Error::Schema(c.errs));
    }
    let network = network.expect("validated network");
    Ok(RunConfig { network, contracts, numerics, output, scenario, unadjusted: None })
}

/// Deserializes a section on top of the defaults so that partial sections are allowed.
fn merge_defaults<T>(c: &mut Checker, doc: &Map<String, Value>, key: &str) -> Option<T>
where
    T: Default + Serialize + for<'de> Deserialize<'de>,
{
    let section = c.section(doc, key)?;
    let mut base = serde_json::to_value(T::default()).expect("defaults serialize");
    let obj = base.as_object_mut().expect("sections are objects");
    for (k, v) in section {
        if !obj.contains_key(k) {
            c.errs.push(format!("{key}: unknown key \"{k}\""));
            continue;
        }
        obj.insert(k.clone(), v.clone());
    }
    c.typed(&base, key)
}

pub(crate) fn check_numerics(errs: &mut Vec<String>, n: &Numerics) {
    for (i, &g) in n.grid.iter().enumerate() {
        if g < 20 {
            errs.push(format!("numerics.grid[{i}]: need at least 20 cells, got {g}"));
        }
    }
    if !(n.dt > 0.0 && n.dt.is_finite()) {
        errs.push(format!("numerics.dt: must be positive, got {}", n.dt));
    }
    if n.nmax == 0 {
        errs.push("numerics.nmax: must be positive".into());
    }
    if !(n.tol > 0.0 && n.tol < 1.0) {
        errs.push(format!("numerics.tol: must lie in (0, 1), got {}", n.tol));
    }
    if let Some(a) = n.concentration {
        if !(a > 0.0) {
            errs.push(format!("numerics.concentration: must be positive, got {a}"));
        }
    }
    if n.stride == 0 {
        errs.push("numerics.stride: must be positive".into());
    }
    if !(n.valuation_time >= 0.0) {
        errs.push(format!("numerics.valuation_time: must be non-negative, got {}", n.valuation_time));
    }
    for (i, p) in n.points.iter().enumerate() {
        if !(p[0] >= 0.0 && p[1] >= 0.0) {
            errs.push(format!("numerics.points[{i}]: {p:?} lies outside the wedge"));
        }
    }
}
