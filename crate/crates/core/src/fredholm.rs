//! Second-kind equations `p − λ𝒩p = f`, the resolvent kernel `N_λ`, the
//! Fredholm determinant `D(λ) = Π(1 − λνⱼ)` and first-kind eigen-equations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FredError, Result};
use crate::linalg::{
    anchor_factor, condition_number, eigenvalues, re, weighted_inner, weighted_norm, CMat, CVec, ONE, ZERO,
};
use crate::nystrom::DiscreteOperator;
use crate::par;
use crate::spectral::{BiSpectralDecomposition, NEGLIGIBLE};

/// Relative distance to a Fredholm eigenvalue below which solves refuse.
pub const PROXIMITY_GAP: f64 = 1e-8;
/// Condition number of `I − λA` above which solves refuse.
pub const CONDITION_LIMIT: f64 = 1e10;
/// Product factors with `|λν| <` this are exactly 1 in floating point.
pub const NEUTRAL_FACTOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolve {
    pub lambda: Complex64,
    pub solution: CVec,
    /// `‖p − λAp − f‖_W / ‖f‖_W`.
    pub residual: f64,
    /// `min |λ − λⱼ|` over the Fredholm eigenvalues `λⱼ = νⱼ⁻¹`.
    pub nearest_eigen_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterminantMethod {
    /// LU determinant of `I − λA`.
    Direct,
    /// Product over the eigenvalues of `A`.
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminantEval {
    pub lambda: Complex64,
    pub value: Complex64,
    pub method: DeterminantMethod,
}

/// Nonzero operator eigenvalues `ν` (Schur diagonal of `B`).
fn significant_spectrum(op: &DiscreteOperator) -> Result<Vec<Complex64>> {
    let values = eigenvalues(op.b())?;
    let lead = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(values
        .into_iter()
        .filter(|v| lead > 0.0 && v.norm() > NEGLIGIBLE * lead)
        .collect())
}

fn nearest_fredholm(lambda: Complex64, spectrum: &[Complex64]) -> Option<(Complex64, f64)> {
    spectrum
        .iter()
        .map(|nu| {
            let lj = nu.inv();
            (lj, (lambda - lj).norm())
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// `I − λA`, after checking that `λ` keeps away from the spectrum.
fn checked_system(op: &DiscreteOperator, lambda: Complex64) -> Result<(CMat, f64)> {
    op.require_square("the resolvent")?;
    let n = op.dim_out();
    let spectrum = significant_spectrum(op)?;
    let nearest = nearest_fredholm(lambda, &spectrum);
    let system = CMat::identity(n, n) - op.a() * lambda;
    let condition = condition_number(&system);
    if let Some((lj, gap)) = nearest {
        let rel = gap / lj.norm();
        if rel <= PROXIMITY_GAP || !(condition <= CONDITION_LIMIT) {
            return Err(FredError::EigenvalueProximity {
                lambda,
                nearest: lj,
                gap: rel,
                condition,
            });
        }
        Ok((system, gap))
    } else if !(condition <= CONDITION_LIMIT) {
        Err(FredError::EigenvalueProximity {
            lambda,
            nearest: Complex64::new(f64::INFINITY, 0.0),
            gap: f64::INFINITY,
            condition,
        })
    } else {
        Ok((system, f64::INFINITY))
    }
}

/// Solves `(I − λA)p = f` by LU with partial pivoting.
pub fn resolvent_solve(op: &DiscreteOperator, lambda: Complex64, f: &CVec) -> Result<ResolventSolve> {
    if f.len() != op.dim_in() {
        return Err(invalid(format!(
            "right-hand side has length {}, expected {}",
            f.len(),
            op.dim_in()
        )));
    }
    let (system, gap) = checked_system(op, lambda)?;
    let solution = system
        .clone()
        .lu()
        .solve(f)
        .ok_or_else(|| FredError::Convergence("LU solve failed".into()))?;
    let w = op.weights_out();
    let r = &system * &solution - f;
    let fnorm = weighted_norm(w, f);
    let residual = if fnorm > 0.0 {
        weighted_norm(w, &r) / fnorm
    } else {
        weighted_norm(w, &r)
    };
    Ok(ResolventSolve {
        lambda,
        solution,
        residual,
        nearest_eigen_gap: gap,
    })
}

/// Samples of `N_λ = (I − λA)⁻¹ K`. They satisfy
/// `λ A N_λ = N_λ − K = λ N_λ W K`.
pub fn resolvent_kernel(op: &DiscreteOperator, lambda: Complex64) -> Result<CMat> {
    let (system, _) = checked_system(op, lambda)?;
    system
        .lu()
        .solve(op.k())
        .ok_or_else(|| FredError::Convergence("LU solve failed".into()))
}

fn series_factors(d: &BiSpectralDecomposition, lambda: Complex64, k: usize) -> Result<Vec<Complex64>> {
    if k > d.len() {
        return Err(invalid(format!("truncation {k} exceeds the {} pairs", d.len())));
    }
    d.eigenvalues[..k]
        .iter()
        .map(|&nu| {
            let denom = ONE - lambda * nu;
            if denom.norm() <= 1e-12 * (lambda * nu).norm().max(1.0) {
                Err(FredError::Pole {
                    lambda,
                    eigenvalue: nu.inv(),
                })
            } else {
                // νⱼ/(1 − λνⱼ) = 1/(λⱼ − λ), finite for νⱼ = 0
                Ok(nu / denom)
            }
        })
        .collect()
}

/// `Σ_{j<k} pⱼ qⱼ* / (λⱼ − λ)`.
pub fn resolvent_series(d: &BiSpectralDecomposition, lambda: Complex64, k: usize) -> Result<CMat> {
    let factors = series_factors(d, lambda, k)?;
    let n = d.right.nrows();
    let mut out = CMat::zeros(n, n);
    for (j, f) in factors.iter().enumerate() {
        out += d.right.column(j) * d.left.column(j).adjoint() * *f;
    }
    Ok(out)
}

/// `f + λ Σ_{j<k} pⱼ ⟨qⱼ, f⟩_W / (λⱼ − λ)`.
pub fn second_kind_solve_series(
    d: &BiSpectralDecomposition,
    lambda: Complex64,
    f: &CVec,
    k: usize,
) -> Result<CVec> {
    if f.len() != d.right.nrows() {
        return Err(invalid(format!(
            "right-hand side has length {}, expected {}",
            f.len(),
            d.right.nrows()
        )));
    }
    let factors = series_factors(d, lambda, k)?;
    let mut out = f.clone();
    for (j, fac) in factors.iter().enumerate() {
        let coeff = weighted_inner(&d.weights, &d.q(j), f) * *fac * lambda;
        out += d.right.column(j) * coeff;
    }
    Ok(out)
}

fn product_from(spectrum: &[Complex64], lambda: Complex64) -> Complex64 {
    spectrum
        .iter()
        .map(|&nu| lambda * nu)
        .filter(|x| x.norm() >= NEUTRAL_FACTOR)
        .fold(ONE, |acc, x| acc * (ONE - x))
}

fn direct_det(op: &DiscreteOperator, lambda: Complex64) -> Complex64 {
    let n = op.dim_out();
    (CMat::identity(n, n) - op.a() * lambda).lu().determinant()
}

pub fn fredholm_determinant(
    op: &DiscreteOperator,
    lambda: Complex64,
    method: DeterminantMethod,
) -> Result<DeterminantEval> {
    op.require_square("the Fredholm determinant")?;
    let value = match method {
        DeterminantMethod::Direct => direct_det(op, lambda),
        DeterminantMethod::Product => product_from(&eigenvalues(op.b())?, lambda),
    };
    Ok(DeterminantEval {
        lambda,
        value,
        method,
    })
}

/// `D(λ)` at every point of `lambdas`, evaluated in parallel.
pub fn determinant_grid(
    op: &DiscreteOperator,
    lambdas: &[Complex64],
    method: DeterminantMethod,
) -> Result<Vec<DeterminantEval>> {
    op.require_square("the Fredholm determinant")?;
    let spectrum = match method {
        DeterminantMethod::Product => eigenvalues(op.b())?,
        DeterminantMethod::Direct => Vec::new(),
    };
    Ok(par::map_indexed(lambdas.len(), |i| {
        let lambda = lambdas[i];
        let value = match method {
            DeterminantMethod::Direct => direct_det(op, lambda),
            DeterminantMethod::Product => product_from(&spectrum, lambda),
        };
        DeterminantEval {
            lambda,
            value,
            method,
        }
    }))
}

/// `∫ trace N_λ(x,x) dμ(x) = tr((I − λA)⁻¹ A)`, which equals `−d/dλ log D(λ)`.
pub fn resolvent_trace(op: &DiscreteOperator, lambda: Complex64) -> Result<Complex64> {
    op.require_square("the resolvent trace")?;
    let n = op.dim_out();
    let system = CMat::identity(n, n) - op.a() * lambda;
    let m = system.lu().solve(op.a()).ok_or(FredError::Pole {
        lambda,
        eigenvalue: lambda,
    })?;
    Ok(m.trace())
}

/// Integrates `−∫ trace N_λ dμ` by the trapezoid rule over `[a, b]` and
/// compares its exponential with `D(λ)/D(a)` at every grid point. Returns the
/// largest relative deviation.
pub fn determinant_log_derivative_check(op: &DiscreteOperator, a: f64, b: f64, steps: usize) -> Result<f64> {
    op.require_square("the log-derivative check")?;
    if steps == 0 || !(a.is_finite() && b.is_finite()) || a == b {
        return Err(invalid(
            "need a non-degenerate finite interval and at least one step",
        ));
    }
    for nu in significant_spectrum(op)? {
        let lj = nu.inv();
        let (lo, hi) = (a.min(b), a.max(b));
        let closest = Complex64::new(lj.re.clamp(lo, hi), 0.0);
        if (lj - closest).norm() < 1e-3 * lj.norm() {
            return Err(FredError::Pole {
                lambda: closest,
                eigenvalue: lj,
            });
        }
    }
    let h = (b - a) / steps as f64;
    let traces = par::try_map_indexed(steps + 1, |k| resolvent_trace(op, re(a + h * k as f64)))?;
    let dets = par::map_indexed(steps + 1, |k| direct_det(op, re(a + h * k as f64)));
    let mut integral = ZERO;
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        integral += (traces[k - 1] + traces[k]) * (h / 2.0);
        let predicted = (-integral).exp();
        let actual = dets[k] / dets[0];
        worst = worst.max((predicted - actual).norm() / actual.norm());
    }
    Ok(worst)
}

/// Basis of solutions of `λⱼ 𝒩 p = p`, weighted-orthonormal, when `λⱼ` is
/// within relative `tol` of a Fredholm eigenvalue.
pub fn first_kind_solve(op: &DiscreteOperator, lambda_j: Complex64, tol: f64) -> Result<Vec<CVec>> {
    op.require_square("first_kind_solve")?;
    if lambda_j == ZERO {
        return Err(FredError::NoSolution(
            "λ = 0 is never a Fredholm eigenvalue".into(),
        ));
    }
    let spectrum = significant_spectrum(op)?;
    let matched: Vec<Complex64> = spectrum
        .iter()
        .copied()
        .filter(|nu| (nu.inv() - lambda_j).norm() <= tol * lambda_j.norm())
        .collect();
    if matched.is_empty() {
        let nearest = nearest_fredholm(lambda_j, &spectrum);
        return Err(FredError::NoSolution(match nearest {
            Some((lj, gap)) => {
                format!("λ = {lambda_j} is not a Fredholm eigenvalue (nearest {lj}, distance {gap:.3e})")
            }
            None => format!("λ = {lambda_j} is not a Fredholm eigenvalue (the operator is zero)"),
        }));
    }
    let nu = matched.iter().sum::<Complex64>() / re(matched.len() as f64);
    let n = op.dim_out();
    let shifted = op.b() - CMat::identity(n, n) * nu;
    let scale = op.b().norm().max(nu.norm());
    let (_, s, v) = crate::linalg::svd_sorted(&shifted);
    // one candidate per matched eigenvalue; defective ones contribute fewer
    let cut = (s.len() - matched.len()..s.len())
        .filter(|&j| s[j] <= 1e-6 * scale)
        .count()
        .max(1);
    let w = op.weights_out();
    let mut out = Vec::with_capacity(cut);
    for j in (s.len() - cut)..s.len() {
        let x = v.column(j);
        let p = CVec::from_iterator(n, x.iter().zip(w).map(|(v, w)| v / w.sqrt()));
        let anchor = anchor_factor(&p);
        out.push(p * anchor);
    }
    Ok(out)
}
