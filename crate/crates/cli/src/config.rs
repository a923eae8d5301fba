//! Run configuration: kernel, measure, command and output, as one JSON
//! document.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fredkit::fredholm::DeterminantMethod;
use fredkit::io::ComplexJson;
use fredkit::measure::{QuadratureRule, MAX_RULE_SIZE};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub measure: MeasureSpec,
    pub command: Command,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Same fields as [`RunConfig`], all optional, so command-line flags can fill
/// the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub kernel: Option<KernelSpec>,
    pub measure: Option<MeasureSpec>,
    pub command: Option<Command>,
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum KernelSpec {
    Mehler {
        r: f64,
    },
    /// `N(y,z) = yz`.
    Yz,
    /// `N(y,z) = yz²`.
    Yz2,
    Separable {
        terms: Vec<TermSpec>,
    },
    /// Jordan block `J_m(lambda)` on the natural orthonormal basis of the rule.
    Defective {
        lambda: ComplexJson,
        m: usize,
    },
    /// Row-major table of node-pair samples.
    Grid {
        path: PathBuf,
    },
}

/// `coeff · right(y) · left(z)`, both sides given as polynomial coefficients
/// in ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: ComplexJson,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Legendre {
        n: usize,
        #[serde(default)]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    Hermite {
        n: usize,
    },
    Discrete {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
    /// A serialized rule.
    Rule {
        rule: QuadratureRule,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    Eig,
    Djf,
    Jordan {
        #[serde(default = "default_cluster_tol")]
        cluster_tol: f64,
    },
    Svd {
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default)]
        left_csv: Option<PathBuf>,
        #[serde(default)]
        right_csv: Option<PathBuf>,
    },
    Solve {
        lambda: ComplexJson,
        rhs: PathBuf,
    },
    Det {
        grid: LambdaGrid,
        #[serde(default = "default_method")]
        method: DeterminantMethod,
    },
    Iterate {
        n: usize,
    },
    Powerit {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_nmax")]
        nmax: usize,
    },
    Trace {
        n: u32,
    },
}

pub fn default_cluster_tol() -> f64 {
    1e-8
}

fn default_method() -> DeterminantMethod {
    DeterminantMethod::Direct
}

pub fn default_k() -> usize {
    1
}

pub fn default_tol() -> f64 {
    1e-10
}

pub fn default_nmax() -> usize {
    500
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Djf => "djf",
            Command::Jordan { .. } => "jordan",
            Command::Svd { .. } => "svd",
            Command::Solve { .. } => "solve",
            Command::Det { .. } => "det",
            Command::Iterate { .. } => "iterate",
            Command::Powerit { .. } => "powerit",
            Command::Trace { .. } => "trace",
        }
    }
}

/// `from:to:steps`, `steps` points including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl LambdaGrid {
    pub fn points(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.from],
            s => (0..s)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (s - 1) as f64)
                .collect(),
        }
    }
}

impl fmt::Display for LambdaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.from, self.to, self.steps)
    }
}

impl FromStr for LambdaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("lambda grid must look like a:b:steps, got {s:?}"));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad grid bound {p:?}"))
        };
        let steps = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("bad grid step count {:?}", parts[2]))?;
        Ok(LambdaGrid {
            from: num(parts[0])?,
            to: num(parts[1])?,
            steps,
        })
    }
}

impl Serialize for LambdaGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LambdaGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `RE,IM` or a bare real number.
pub fn parse_lambda(s: &str) -> Result<ComplexJson, String> {
    fredkit::io::parse_complex(s)
        .map(ComplexJson::from)
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    /// Standard output when absent.
    #[serde(default)]
    pub destination: Option<PathBuf>,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        fredkit::io::to_json(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Static checks only; every violated constraint is listed.
pub fn validate(config: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    validate_measure(&config.measure, &mut out);
    validate_kernel(&config.kernel, &config.measure, &mut out);
    validate_command(&config.command, &mut out);
    out
}

/// Like [`validate`], with missing sections reported as violations.
pub fn validate_partial(config: &PartialConfig) -> Vec<String> {
    let mut out = Vec::new();
    match &config.measure {
        Some(m) => validate_measure(m, &mut out),
        None => out.push("measure: missing".into()),
    }
    match (&config.kernel, &config.measure) {
        (Some(k), Some(m)) => validate_kernel(k, m, &mut out),
        (Some(KernelSpec::Mehler { r }), None) if !(r.is_finite() && r.abs() < 1.0) => {
            out.push(format!("kernel.r: need |r| < 1, got {r}"))
        }
        (Some(_), None) => {}
        (None, _) => out.push("kernel: missing".into()),
    }
    match &config.command {
        Some(c) => validate_command(c, &mut out),
        None => out.push("command: missing".into()),
    }
    out
}

fn measure_size(m: &MeasureSpec) -> usize {
    match m {
        MeasureSpec::Legendre { n, .. } | MeasureSpec::Hermite { n } => *n,
        MeasureSpec::Discrete { points, .. } => points.len(),
        MeasureSpec::Rule { rule } => rule.len(),
    }
}

fn validate_measure(m: &MeasureSpec, out: &mut Vec<String>) {
    let n = measure_size(m);
    if n == 0 {
        out.push("measure.n: must be at least 1".into());
    }
    if n > MAX_RULE_SIZE {
        out.push(format!("measure.n: {n} exceeds the cap {MAX_RULE_SIZE}"));
    }
    match m {
        MeasureSpec::Legendre { a, b, .. } => {
            if !(a.is_finite() && b.is_finite() && a < b) {
                out.push(format!("measure.a/b: need finite a < b, got [{a}, {b}]"));
            }
        }
        MeasureSpec::Discrete { points, weights } => {
            if points.len() != weights.len() {
                out.push(format!(
                    "measure.weights: {} points but {} weights",
                    points.len(),
                    weights.len()
                ));
            }
            if points.iter().any(|p| !p.is_finite()) {
                out.push("measure.points: must be finite".into());
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                out.push("measure.weights: must be positive and finite".into());
            }
            let mut sorted = points.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                out.push("measure.points: duplicate points".into());
            }
        }
        MeasureSpec::Hermite { .. } | MeasureSpec::Rule { .. } => {}
    }
}

fn validate_kernel(k: &KernelSpec, m: &MeasureSpec, out: &mut Vec<String>) {
    match k {
        KernelSpec::Mehler { r } => {
            if !(r.is_finite() && r.abs() < 1.0) {
                out.push(format!("kernel.r: need |r| < 1, got {r}"));
            }
        }
        KernelSpec::Yz | KernelSpec::Yz2 => {}
        KernelSpec::Separable { terms } => {
            if terms.is_empty() {
                out.push("kernel.terms: need at least one term".into());
            }
            for (i, t) in terms.iter().enumerate() {
                if t.right.is_empty() || t.left.is_empty() {
                    out.push(format!("kernel.terms[{i}]: empty polynomial"));
                }
                let finite = t.coeff.re.is_finite()
                    && t.coeff.im.is_finite()
                    && t.right.iter().chain(&t.left).all(|c| c.is_finite());
                if !finite {
                    out.push(format!("kernel.terms[{i}]: non-finite coefficient"));
                }
            }
        }
        KernelSpec::Defective { lambda, m: size } => {
            if *size < 2 {
                out.push(format!("kernel.m: need block size m ≥ 2, got {size}"));
            }
            let n = measure_size(m);
            if *size > n && n > 0 {
                out.push(format!(
                    "kernel.m: block size {size} exceeds the {n} measure nodes"
                ));
            }
            if !(lambda.re.is_finite() && lambda.im.is_finite()) {
                out.push("kernel.lambda: must be finite".into());
            }
        }
        KernelSpec::Grid { path } => {
            if !path.is_file() {
                out.push(format!("kernel.path: {} does not exist", path.display()));
            }
        }
    }
}

fn validate_command(c: &Command, out: &mut Vec<String>) {
    match c {
        Command::Eig | Command::Djf => {}
        Command::Jordan { cluster_tol } => {
            if !(*cluster_tol > 0.0 && *cluster_tol < 1.0) {
                out.push(format!(
                    "command.cluster_tol: need 0 < tol < 1, got {cluster_tol}"
                ));
            }
        }
        Command::Svd { rank, .. } => {
            if *rank == Some(0) {
                out.push("command.rank: must be at least 1".into());
            }
        }
        Command::Solve { lambda, rhs } => {
            if !(lambda.re.is_finite() && lambda.im.is_finite()) {
                out.push("command.lambda: must be finite".into());
            }
            if !rhs.is_file() {
                out.push(format!("command.rhs: {} does not exist", rhs.display()));
            }
        }
        Command::Det { grid, .. } => {
            if grid.steps < 2 {
                out.push(format!("command.grid: need at least 2 steps, got {}", grid.steps));
            }
            if !(grid.from.is_finite() && grid.to.is_finite() && grid.from < grid.to) {
                out.push(format!("command.grid: need finite from < to, got {grid}"));
            }
        }
        Command::Iterate { n } => {
            if *n == 0 {
                out.push("command.n: must be at least 1".into());
            }
        }
        Command::Powerit { k, tol, nmax } => {
            if *k == 0 {
                out.push("command.k: must be at least 1".into());
            }
            if !(*tol > 0.0 && *tol < 1.0) {
                out.push(format!("command.tol: need 0 < tol < 1, got {tol}"));
            }
            if *nmax < 2 {
                out.push(format!("command.nmax: need at least 2 iterations, got {nmax}"));
            }
        }
        Command::Trace { .. } => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            kernel: KernelSpec::Mehler { r: 0.5 },
            measure: MeasureSpec::Hermite { n: 40 },
            command: Command::Eig,
            output: OutputSpec::default(),
        }
    }

    #[test]
    fn valid_config_has_empty_report() {
        assert!(validate(&base()).is_empty());
    }

    #[test]
    fn zero_nodes_is_one_violation() {
        let mut c = base();
        c.measure = MeasureSpec::Hermite { n: 0 };
        let report = validate(&c);
        assert_eq!(report.len(), 1, "{report:?}");
    }

    #[test]
    fn mehler_bound_is_named() {
        let mut c = base();
        c.kernel = KernelSpec::Mehler { r: 1.0 };
        let report = validate(&c);
        assert_eq!(report.len(), 1);
        assert!(report[0].contains("|r| < 1"));
    }

    #[test]
    fn grid_strings_parse() {
        let g: LambdaGrid = "0:4:81".parse().unwrap();
        assert_eq!(g.points().len(), 81);
        assert_eq!(g.points()[80], 4.0);
        assert!("0:4".parse::<LambdaGrid>().is_err());
        assert!("0:x:3".parse::<LambdaGrid>().is_err());
    }

    #[test]
    fn json_shape_is_readable() {
        let text = r#"{"kernel":{"name":"yz"},
            "measure":{"kind":"legendre","n":8},
            "command":{"name":"det","grid":"0:4:81"}}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.measure, MeasureSpec::Legendre { n: 8, a: 0.0, b: 1.0 });
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        assert!(RunConfig::from_json(r#"{"kernel":{"name":"yz"}}"#).is_err());
        let extra = text.replace("\"command\"", "\"bogus\":1,\"command\"");
        assert!(RunConfig::from_json(&extra).is_err());
    }
}
