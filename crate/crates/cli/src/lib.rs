//! Library side of the `fredkit` command-line driver.

pub mod config;
pub mod run;

pub use config::{
    validate, validate_partial, Command, KernelSpec, MeasureSpec, OutputSpec, PartialConfig, RunConfig,
};
pub use run::{execute, RunError};

/// Reads `FREDKIT_THREADS`: `None` when unset, `Some(0)` for serial.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, String> {
    match value {
        None => Ok(None),
        Some(v) if v.trim().is_empty() => Ok(None),
        Some(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("FREDKIT_THREADS must be a non-negative integer, got {v:?}")),
    }
}

/// Accepts a JSON object or the shorthand `name` for parameter-free kernels.
pub fn parse_kernel_arg(s: &str) -> Result<KernelSpec, String> {
    let s = s.trim();
    if s.starts_with('{') {
        serde_json::from_str(s).map_err(|e| format!("--kernel: {e}"))
    } else {
        serde_json::from_value(serde_json::json!({ "name": s })).map_err(|e| format!("--kernel: {e}"))
    }
}

/// Accepts a JSON object, `hermite:N`, `legendre:N` or `legendre:N:A:B`.
pub fn parse_measure_arg(s: &str) -> Result<MeasureSpec, String> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| format!("--measure: {e}"));
    }
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("--measure: cannot read {s:?}");
    let n = parts
        .get(1)
        .and_then(|p| p.parse::<usize>().ok())
        .ok_or_else(bad)?;
    match (parts[0], parts.len()) {
        ("hermite", 2) => Ok(MeasureSpec::Hermite { n }),
        ("legendre", 2) => Ok(MeasureSpec::Legendre { n, a: 0.0, b: 1.0 }),
        ("legendre", 4) => {
            let a = parts[2].parse().map_err(|_| bad())?;
            let b = parts[3].parse().map_err(|_| bad())?;
            Ok(MeasureSpec::Legendre { n, a, b })
        }
        _ => Err(bad()),
    }
}
