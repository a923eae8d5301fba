use std::io::{IsTerminal, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fredkit::fredholm::DeterminantMethod;
use fredkit_cli::config::{
    default_cluster_tol, default_k, default_nmax, default_tol, parse_lambda, Format, LambdaGrid,
};
use fredkit_cli::run::{build_operator, dump_operator, run_command};
use fredkit_cli::{
    parse_kernel_arg, parse_measure_arg, thread_cap, validate, validate_partial, Command, OutputSpec,
    PartialConfig, RunConfig, RunError,
};

#[derive(Parser)]
#[command(
    name = "fredkit",
    version,
    about = "Integral operators with non-symmetric kernels"
)]
struct Cli {
    #[command(subcommand)]
    sub: Sub,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run config; `-` reads standard input.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kernel as JSON, or the name of a parameter-free kernel.
    #[arg(long)]
    kernel: Option<String>,
    /// Measure as JSON, `hermite:N`, `legendre:N` or `legendre:N:A:B`.
    #[arg(long)]
    measure: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory receiving A.csv, B.csv and K.csv.
    #[arg(long)]
    dump_operator: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Product,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the command stored in the config.
    Run(Common),
    /// Static checks; prints every violation.
    Validate(Common),
    /// Hermitian eigendecomposition.
    Eig(Common),
    /// Bi-orthogonal eigendecomposition.
    Djf(Common),
    /// Jordan decomposition of the symmetrized operator.
    Jordan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cluster_tol: Option<f64>,
    },
    /// Singular values, optionally truncated.
    Svd {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        left_csv: Option<PathBuf>,
        #[arg(long)]
        right_csv: Option<PathBuf>,
    },
    /// Second-kind equation `p − λ𝒩p = f`.
    Solve {
        #[command(flatten)]
        common: Common,
        /// `RE,IM`
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        /// Right-hand side samples as CSV.
        #[arg(long)]
        rhs: Option<PathBuf>,
    },
    /// Fredholm determinant on a real grid.
    Det {
        #[command(flatten)]
        common: Common,
        /// `a:b:steps`
        #[arg(long, allow_hyphen_values = true)]
        lambda_grid: Option<String>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Samples of the iterated kernel.
    Iterate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Power iteration with deflation.
    Powerit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Traces of powers of the Gram operator.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<u32>,
    },
}

type Usage<T> = Result<T, String>;

fn load_partial(common: &Common) -> Usage<PartialConfig> {
    let text = match &common.config {
        Some(p) if p.as_os_str() == "-" => Some(read_stdin()?),
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?),
        None if common.kernel.is_none() && common.measure.is_none() => {
            if std::io::stdin().is_terminal() {
                return Err("no config: pass --config PATH, --config - or --kernel/--measure".into());
            }
            Some(read_stdin()?)
        }
        None => None,
    };
    let mut partial = match text {
        Some(t) => serde_json::from_str::<PartialConfig>(&t).map_err(|e| format!("malformed config: {e}"))?,
        None => PartialConfig::default(),
    };
    if let Some(k) = &common.kernel {
        partial.kernel = Some(parse_kernel_arg(k)?);
    }
    if let Some(m) = &common.measure {
        partial.measure = Some(parse_measure_arg(m)?);
    }
    let mut output = partial.output.take().unwrap_or_default();
    if let Some(f) = common.format {
        output.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    if common.output.is_some() {
        output.destination = common.output.clone();
    }
    partial.output = Some(output);
    Ok(partial)
}

fn read_stdin() -> Usage<String> {
    let mut s = String::new();
    std::io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| format!("cannot read standard input: {e}"))?;
    Ok(s)
}

fn complete(partial: PartialConfig, command: Option<Command>) -> Usage<RunConfig> {
    Ok(RunConfig {
        kernel: partial.kernel.ok_or("config has no kernel")?,
        measure: partial.measure.ok_or("config has no measure")?,
        command: command.or(partial.command).ok_or("config has no command")?,
        output: partial.output.unwrap_or_default(),
    })
}

/// The config's command when it has the same name, so flags override only
/// what they mention.
fn base(partial: &PartialConfig, name: &str) -> Option<Command> {
    partial.command.clone().filter(|c| c.name() == name)
}

fn resolve(sub: &Sub, partial: &PartialConfig) -> Usage<Option<Command>> {
    let cmd = match sub {
        Sub::Run(_) | Sub::Validate(_) => return Ok(None),
        Sub::Eig(_) => Command::Eig,
        Sub::Djf(_) => Command::Djf,
        Sub::Jordan { cluster_tol, .. } => {
            let prev = match base(partial, "jordan") {
                Some(Command::Jordan { cluster_tol }) => cluster_tol,
                _ => default_cluster_tol(),
            };
            Command::Jordan {
                cluster_tol: cluster_tol.unwrap_or(prev),
            }
        }
        Sub::Svd {
            rank,
            left_csv,
            right_csv,
            ..
        } => {
            let (r, l, rt) = match base(partial, "svd") {
                Some(Command::Svd {
                    rank,
                    left_csv,
                    right_csv,
                }) => (rank, left_csv, right_csv),
                _ => (None, None, None),
            };
            Command::Svd {
                rank: rank.or(r),
                left_csv: left_csv.clone().or(l),
                right_csv: right_csv.clone().or(rt),
            }
        }
        Sub::Solve { lambda, rhs, .. } => {
            let (l0, r0) = match base(partial, "solve") {
                Some(Command::Solve { lambda, rhs }) => (Some(lambda), Some(rhs)),
                _ => (None, None),
            };
            let lambda = match lambda {
                Some(s) => Some(parse_lambda(s).map_err(|e| format!("--lambda: {e}"))?),
                None => l0,
            };
            Command::Solve {
                lambda: lambda.ok_or("solve needs --lambda RE,IM")?,
                rhs: rhs.clone().or(r0).ok_or("solve needs --rhs FILE")?,
            }
        }
        Sub::Det {
            lambda_grid, method, ..
        } => {
            let (g0, m0) = match base(partial, "det") {
                Some(Command::Det { grid, method }) => (Some(grid), Some(method)),
                _ => (None, None),
            };
            let grid = match lambda_grid {
                Some(s) => Some(
                    s.parse::<LambdaGrid>()
                        .map_err(|e| format!("--lambda-grid: {e}"))?,
                ),
                None => g0,
            };
            let method = match method {
                Some(MethodArg::Direct) => DeterminantMethod::Direct,
                Some(MethodArg::Product) => DeterminantMethod::Product,
                None => m0.unwrap_or(DeterminantMethod::Direct),
            };
            Command::Det {
                grid: grid.ok_or("det needs --lambda-grid a:b:steps")?,
                method,
            }
        }
        Sub::Iterate { n, .. } => {
            let n0 = match base(partial, "iterate") {
                Some(Command::Iterate { n }) => Some(n),
                _ => None,
            };
            Command::Iterate {
                n: n.or(n0).ok_or("iterate needs --n")?,
            }
        }
        Sub::Powerit { k, tol, nmax, .. } => {
            let (k0, t0, n0) = match base(partial, "powerit") {
                Some(Command::Powerit { k, tol, nmax }) => (k, tol, nmax),
                _ => (default_k(), default_tol(), default_nmax()),
            };
            Command::Powerit {
                k: k.unwrap_or(k0),
                tol: tol.unwrap_or(t0),
                nmax: nmax.unwrap_or(n0),
            }
        }
        Sub::Trace { n, .. } => {
            let n0 = match base(partial, "trace") {
                Some(Command::Trace { n }) => Some(n),
                _ => None,
            };
            Command::Trace {
                n: n.or(n0).unwrap_or(1),
            }
        }
    };
    Ok(Some(cmd))
}

fn common(sub: &Sub) -> &Common {
    match sub {
        Sub::Run(c) | Sub::Validate(c) | Sub::Eig(c) | Sub::Djf(c) => c,
        Sub::Jordan { common, .. }
        | Sub::Svd { common, .. }
        | Sub::Solve { common, .. }
        | Sub::Det { common, .. }
        | Sub::Iterate { common, .. }
        | Sub::Powerit { common, .. }
        | Sub::Trace { common, .. } => common,
    }
}

fn apply_threads() -> Usage<()> {
    let value = std::env::var("FREDKIT_THREADS").ok();
    match thread_cap(value.as_deref())? {
        None => {}
        Some(0) => fredkit::par::set_serial(true),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("cannot size the thread pool: {e}"))?,
        #[cfg(not(feature = "parallel"))]
        Some(_) => {}
    }
    Ok(())
}

fn emit(output: &OutputSpec, bytes: &[u8]) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Compute(e.into());
    match &output.destination {
        Some(path) => std::fs::write(path, bytes).map_err(io),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(io)
        }
    }
}

fn main_inner(cli: Cli) -> Result<(), RunError> {
    apply_threads().map_err(RunError::Config)?;
    let common = common(&cli.sub);
    let partial = load_partial(common).map_err(RunError::Config)?;
    let command = resolve(&cli.sub, &partial).map_err(RunError::Config)?;
    if let Sub::Validate(_) = cli.sub {
        let report = serde_json::json!({ "violations": validate_partial(&partial) });
        let mut text = report.to_string();
        text.push('\n');
        return emit(&partial.output.unwrap_or_default(), text.as_bytes());
    }
    let config = complete(partial, command).map_err(RunError::Config)?;

    let report = validate(&config);
    if !report.is_empty() {
        return Err(RunError::Config(report.join("; ")));
    }
    let op = build_operator(&config)?;
    if let Some(dir) = &common.dump_operator {
        dump_operator(&op, dir)?;
    }
    let bytes = run_command(&config, &op)?;
    emit(&config.output, &bytes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fredkit: {e}");
            if let RunError::Config(_) = e {
                eprintln!("usage: fredkit <COMMAND> [--config PATH | --kernel SPEC --measure SPEC] [OPTIONS]; see --help");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
