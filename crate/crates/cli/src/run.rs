//! Builds the operator for a [`RunConfig`] and executes its command.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use fredkit::fredholm::{determinant_grid, resolvent_solve};
use fredkit::io::{
    complex_list, read_matrix_csv, read_vector_csv, to_json, write_matrix_csv, write_vector_csv, ComplexJson,
    DecompositionExport, JordanExport, SvdExport,
};
use fredkit::jordanforms::jordan_decompose;
use fredkit::kernelgallery::{
    basis_for_rule, defective_kernel, grid_kernel, mehler_kernel, polynomial, separable_kernel, Kernel,
};
use fredkit::linalg::{re, CMat, CVec};
use fredkit::measure::{discrete_measure, gauss_hermite_prob, gauss_legendre, QuadratureRule};
use fredkit::nystrom::{discretize, DiscreteOperator};
use fredkit::operator_svd::{operator_svd, svd_truncate, trace_power, trace_power_direct};
use fredkit::powermethods::sequential_spectrum;
use fredkit::spectral::{djf_eig, hermitian_eig};
use fredkit::{FredError, Result};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{validate, Command, Format, KernelSpec, MeasureSpec, RunConfig};

#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or usage; exit code 2.
    Config(String),
    /// A library failure; exit code 1.
    Compute(FredError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "config error: {msg}"),
            RunError::Compute(e) => write!(f, "error [{}]: {e}", e.category()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<FredError> for RunError {
    fn from(e: FredError) -> Self {
        RunError::Compute(e)
    }
}

pub fn build_rule(spec: &MeasureSpec) -> Result<QuadratureRule> {
    match spec {
        MeasureSpec::Legendre { n, a, b } => gauss_legendre(*n, *a, *b),
        MeasureSpec::Hermite { n } => gauss_hermite_prob(*n),
        MeasureSpec::Discrete { points, weights } => discrete_measure(points, weights),
        MeasureSpec::Rule { rule } => Ok(rule.clone()),
    }
}

pub fn build_kernel(spec: &KernelSpec, rule: &QuadratureRule) -> Result<Kernel> {
    let x = || polynomial(vec![0.0, 1.0]);
    match spec {
        KernelSpec::Mehler { r } => mehler_kernel(*r),
        KernelSpec::Yz => separable_kernel(&[re(1.0)], &[x()], &[x()]),
        KernelSpec::Yz2 => separable_kernel(&[re(1.0)], &[x()], &[polynomial(vec![0.0, 0.0, 1.0])]),
        KernelSpec::Separable { terms } => {
            let coeffs: Vec<Complex64> = terms.iter().map(|t| t.coeff.into()).collect();
            let rights: Vec<_> = terms.iter().map(|t| polynomial(t.right.clone())).collect();
            let lefts: Vec<_> = terms.iter().map(|t| polynomial(t.left.clone())).collect();
            separable_kernel(&coeffs, &rights, &lefts)
        }
        KernelSpec::Defective { lambda, m } => {
            let basis = basis_for_rule(rule, *m)?;
            defective_kernel((*lambda).into(), *m, &basis, rule)
        }
        KernelSpec::Grid { path } => {
            let table = read_matrix_csv(BufReader::new(File::open(path)?))?;
            grid_kernel(rule, table)
        }
    }
}

pub fn build_operator(config: &RunConfig) -> Result<DiscreteOperator> {
    let rule = build_rule(&config.measure)?;
    let kernel = build_kernel(&config.kernel, &rule)?;
    discretize(&kernel, &rule)
}

/// Writes `A.csv`, `B.csv` and `K.csv` into `dir`.
pub fn dump_operator(op: &DiscreteOperator, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, m) in [("A", op.a()), ("B", op.b()), ("K", op.k())] {
        write_matrix_csv(File::create(dir.join(format!("{name}.csv")))?, m)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveExport {
    lambda: ComplexJson,
    residual: f64,
    nearest_eigen_gap: f64,
    solution: Vec<ComplexJson>,
}

#[derive(Serialize)]
struct DetPoint {
    lambda: ComplexJson,
    value: ComplexJson,
}

#[derive(Serialize)]
struct IterateExport {
    n: usize,
    rows: Vec<Vec<ComplexJson>>,
}

#[derive(Serialize)]
struct StageFailure {
    stage: usize,
    category: &'static str,
    message: String,
}

#[derive(Serialize)]
struct PowerExport {
    estimates: Vec<ComplexJson>,
    /// Ratio sequence of each stage.
    ratios: Vec<Vec<ComplexJson>>,
    pointwise_ratios: Vec<Vec<ComplexJson>>,
    converged: Vec<bool>,
    iterations: Vec<usize>,
    multiplicity_warning: Vec<bool>,
    failure: Option<StageFailure>,
}

#[derive(Serialize)]
struct TraceExport {
    n: u32,
    trace: f64,
    trace_direct: f64,
}

fn rows(m: &CMat) -> Vec<Vec<ComplexJson>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().map(ComplexJson::from).collect())
        .collect()
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = to_json(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn vector_bytes(v: &CVec) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_vector_csv(&mut buf, v)?;
    Ok(buf)
}

fn matrix_bytes(m: &CMat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, m)?;
    Ok(buf)
}

fn column(values: impl IntoIterator<Item = Complex64>) -> CVec {
    let values: Vec<Complex64> = values.into_iter().collect();
    CVec::from_vec(values)
}

/// Validates, builds the operator and runs the command. Returns the bytes of
/// the primary artifact; side files named in the command are written here.
pub fn execute(config: &RunConfig) -> std::result::Result<Vec<u8>, RunError> {
    let report = validate(config);
    if !report.is_empty() {
        return Err(RunError::Config(report.join("; ")));
    }
    let op = build_operator(config)?;
    Ok(run_command(config, &op)?)
}

pub fn run_command(config: &RunConfig, op: &DiscreteOperator) -> Result<Vec<u8>> {
    let csv = config.output.format == Format::Csv;
    match &config.command {
        Command::Eig | Command::Djf => {
            let d = if matches!(config.command, Command::Eig) {
                hermitian_eig(op)?
            } else {
                djf_eig(op)?
            };
            if csv {
                vector_bytes(&column(d.eigenvalues.iter().copied()))
            } else {
                json_bytes(&DecompositionExport::from(&d))
            }
        }
        Command::Jordan { cluster_tol } => {
            let jf = jordan_decompose(op.b(), *cluster_tol)?;
            if csv {
                matrix_bytes(&jf.j())
            } else {
                json_bytes(&JordanExport::from(&jf))
            }
        }
        Command::Svd {
            rank,
            left_csv,
            right_csv,
        } => {
            let mut svd = operator_svd(op);
            if let Some(m) = rank {
                svd = svd_truncate(&svd, *m)?.0;
            }
            if let Some(path) = left_csv {
                write_matrix_csv(File::create(path)?, &svd.left)?;
            }
            if let Some(path) = right_csv {
                write_matrix_csv(File::create(path)?, &svd.right)?;
            }
            if csv {
                vector_bytes(&column(svd.singular_values.iter().map(|&s| re(s))))
            } else {
                json_bytes(&SvdExport::from(&svd))
            }
        }
        Command::Solve { lambda, rhs } => {
            let f = read_vector_csv(BufReader::new(File::open(rhs)?))?;
            let sol = resolvent_solve(op, (*lambda).into(), &f)?;
            if csv {
                vector_bytes(&sol.solution)
            } else {
                json_bytes(&SolveExport {
                    lambda: sol.lambda.into(),
                    residual: sol.residual,
                    nearest_eigen_gap: sol.nearest_eigen_gap,
                    solution: complex_list(sol.solution.as_slice()),
                })
            }
        }
        Command::Det { grid, method } => {
            let lambdas: Vec<Complex64> = grid.points().into_iter().map(re).collect();
            let evals = determinant_grid(op, &lambdas, *method)?;
            if csv {
                let mut out = String::from("lambda,re_d,im_d\n");
                for e in &evals {
                    out.push_str(&format!(
                        "{:.16e},{:.16e},{:.16e}\n",
                        e.lambda.re, e.value.re, e.value.im
                    ));
                }
                Ok(out.into_bytes())
            } else {
                let points: Vec<DetPoint> = evals
                    .iter()
                    .map(|e| DetPoint {
                        lambda: e.lambda.into(),
                        value: e.value.into(),
                    })
                    .collect();
                json_bytes(&points)
            }
        }
        Command::Iterate { n } => {
            let kn = op.iterated_kernel(*n)?;
            if csv {
                matrix_bytes(&kn)
            } else {
                json_bytes(&IterateExport {
                    n: *n,
                    rows: rows(&kn),
                })
            }
        }
        Command::Powerit { k, tol, nmax } => {
            let spec = sequential_spectrum(op, *k, *nmax, *tol)?;
            if spec.triples.is_empty() {
                if let Some((_, e)) = spec.failure {
                    return Err(e);
                }
            }
            let estimates: Vec<Complex64> = spec.triples.iter().map(|t| t.nu).collect();
            if csv {
                return vector_bytes(&column(estimates));
            }
            let export = PowerExport {
                estimates: complex_list(&estimates),
                ratios: spec
                    .triples
                    .iter()
                    .map(|t| complex_list(&t.trace.ratios))
                    .collect(),
                pointwise_ratios: spec
                    .triples
                    .iter()
                    .map(|t| complex_list(&t.trace.pointwise_ratios))
                    .collect(),
                converged: spec.triples.iter().map(|t| t.trace.converged).collect(),
                iterations: spec.triples.iter().map(|t| t.trace.iterations_used).collect(),
                multiplicity_warning: spec
                    .triples
                    .iter()
                    .map(|t| t.trace.multiplicity_warning)
                    .collect(),
                failure: spec.failure.map(|(stage, e)| StageFailure {
                    stage,
                    category: e.category(),
                    message: e.to_string(),
                }),
            };
            json_bytes(&export)
        }
        Command::Trace { n } => {
            let svd = operator_svd(op);
            let export = TraceExport {
                n: *n,
                trace: trace_power(&svd, *n),
                trace_direct: trace_power_direct(op, *n),
            };
            if csv {
                vector_bytes(&column([re(export.trace), re(export.trace_direct)]))
            } else {
                json_bytes(&export)
            }
        }
    }
}
