//! Power iteration for the dominant eigenvalue, leading-pair extraction,
//! deflation `N₁ = N − ν₁ p₁ q₁*`, and sequential recovery of the spectrum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FredError, Result};
use crate::linalg::{anchor_factor, re, spectral_norm, weighted_inner, weighted_norm, CVec, ZERO};
use crate::nystrom::DiscreteOperator;
use crate::spectral::djf_eig;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    /// `h₀, h₁, …`: unit weighted-norm directions of `𝒩ⁿf`.
    pub iterates: Vec<CVec>,
    /// `⟨g, A hₙ⟩_W / ⟨g, hₙ⟩_W`.
    pub ratios: Vec<Complex64>,
    /// `(A hₙ)ᵢ / (hₙ)ᵢ` at the node where `|hₙ|` is largest.
    pub pointwise_ratios: Vec<Complex64>,
    pub converged: bool,
    pub estimate: Complex64,
    pub iterations_used: usize,
    /// Set when the ratios oscillate instead of settling, which happens when
    /// several eigenvalues share the top modulus.
    pub multiplicity_warning: bool,
}

/// Power iteration with the probe `g = f`.
pub fn power_ratio_estimate(op: &DiscreteOperator, f: &CVec, n_max: usize, tol: f64) -> Result<PowerTrace> {
    power_ratio_estimate_with_probe(op, f, f, n_max, tol)
}

/// Power iteration. Converges once `|rₖ − rₖ₋₁| ≤ tol·|rₖ|`.
pub fn power_ratio_estimate_with_probe(
    op: &DiscreteOperator,
    f: &CVec,
    g: &CVec,
    n_max: usize,
    tol: f64,
) -> Result<PowerTrace> {
    op.require_square("power_ratio_estimate")?;
    let w = op.weights_out();
    if f.len() != op.dim_in() || g.len() != op.dim_in() {
        return Err(invalid(format!(
            "start and probe vectors must have length {}",
            op.dim_in()
        )));
    }
    let fnorm = weighted_norm(w, f);
    if fnorm == 0.0 {
        return Err(FredError::StartingVector("the start vector is zero".into()));
    }
    let op_norm = spectral_norm(op.b());
    let mut h = f / re(fnorm);
    let mut trace = PowerTrace {
        iterates: Vec::new(),
        ratios: Vec::new(),
        pointwise_ratios: Vec::new(),
        converged: false,
        estimate: ZERO,
        iterations_used: n_max,
        multiplicity_warning: false,
    };
    for k in 0..=n_max {
        let ah = op.apply(&h)?;
        let ah_norm = weighted_norm(w, &ah);
        if !(ah_norm > 1e-13 * op_norm) {
            return Err(FredError::StartingVector(format!(
                "iterate {k} collapsed to zero; the start vector lies in the null space"
            )));
        }
        let denom = weighted_inner(w, g, &h);
        if denom.norm() <= 1e-300 {
            return Err(FredError::StartingVector(
                "probe is orthogonal to the iterate".into(),
            ));
        }
        let ratio = weighted_inner(w, g, &ah) / denom;
        let imax = h
            .iter()
            .enumerate()
            .fold(
                (0, 0.0),
                |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best },
            )
            .0;
        trace.pointwise_ratios.push(ah[imax] / h[imax]);
        trace.ratios.push(ratio);
        trace.iterates.push(h.clone());
        trace.estimate = ratio;
        if k >= 1 {
            let prev = trace.ratios[k - 1];
            if (ratio - prev).norm() <= tol * ratio.norm() {
                trace.converged = true;
                trace.iterations_used = k;
                return Ok(trace);
            }
        }
        h = ah / re(ah_norm);
    }
    let r = &trace.ratios;
    let m = r.len();
    if m >= 3 {
        let step = (r[m - 1] - r[m - 2]).norm();
        let period2 = (r[m - 1] - r[m - 3]).norm();
        trace.multiplicity_warning = period2 <= 0.5 * step;
    }
    Ok(trace)
}

/// Normalized `(ν⁻¹A)ⁿ f` and `(ν̄⁻¹A*)ⁿ g`: `p̂` has unit weighted norm with
/// its anchor component real positive, and `⟨q̂, p̂⟩_W = 1`.
pub fn extract_leading_pair(
    op: &DiscreteOperator,
    nu1: Complex64,
    f: &CVec,
    g: &CVec,
    n: usize,
) -> Result<(CVec, CVec)> {
    op.require_square("extract_leading_pair")?;
    if nu1 == ZERO {
        return Err(FredError::DivisionByZero("ν₁ must be nonzero".into()));
    }
    let w = op.weights_out();
    let p = iterate_scaled(|v| op.apply(v), nu1, f, n, w)?;
    let q = iterate_scaled(|v| op.apply_adjoint(v), nu1.conj(), g, n, w)?;
    let p = &p * anchor_factor(&p) / re(weighted_norm(w, &p));
    let overlap = weighted_inner(w, &q, &p);
    let qnorm = weighted_norm(w, &q);
    if overlap.norm() <= 1e-10 * qnorm {
        return Err(FredError::StartingVector(
            "the left and right iterates are orthogonal; ⟨g, p₁⟩ vanishes".into(),
        ));
    }
    let q = q / overlap.conj();
    let limit = 1e-6 * nu1.norm();
    let rp = weighted_norm(w, &(op.apply(&p)? - &p * nu1));
    let rq = weighted_norm(w, &(op.apply_adjoint(&q)? - &q * nu1.conj())) / weighted_norm(w, &q);
    if !(rp <= limit && rq <= limit) {
        return Err(FredError::Convergence(format!(
            "leading pair residual {:.3e} exceeds {limit:.3e}; the dominant eigenvalue may be defective, use the jordanforms module",
            rp.max(rq)
        )));
    }
    Ok((p, q))
}

/// `(s⁻¹T)ⁿ v`, renormalized each step. Fails when the cumulative growth
/// falls below `1e-10`, i.e. `v` has no component along the leading pair.
fn iterate_scaled<F>(apply: F, s: Complex64, v: &CVec, n: usize, w: &[f64]) -> Result<CVec>
where
    F: Fn(&CVec) -> Result<CVec>,
{
    let norm0 = weighted_norm(w, v);
    if norm0 == 0.0 {
        return Err(FredError::StartingVector("the start vector is zero".into()));
    }
    let mut x = v / re(norm0);
    let mut log_growth = 0.0;
    for _ in 0..n {
        let y = apply(&x)? / s;
        let ny = weighted_norm(w, &y);
        if ny == 0.0 {
            return Err(FredError::StartingVector("the iterate collapsed to zero".into()));
        }
        log_growth += ny.ln();
        x = y / re(ny);
    }
    if log_growth < 1e-10f64.ln() {
        return Err(FredError::StartingVector(
            "the start vector has no component along the leading eigenvector".into(),
        ));
    }
    Ok(x)
}

/// `K − ν p q*`. Requires `⟨q, p⟩_W = 1` to 1e-8.
pub fn deflate(op: &DiscreteOperator, nu1: Complex64, p1: &CVec, q1: &CVec) -> Result<DiscreteOperator> {
    op.require_square("deflate")?;
    if p1.len() != op.dim_out() || q1.len() != op.dim_in() {
        return Err(invalid("eigenvector lengths do not match the operator"));
    }
    let overlap = weighted_inner(op.weights_out(), q1, p1);
    let residual = (overlap - re(1.0)).norm();
    if !(residual <= 1e-8) {
        return Err(FredError::PreconditionViolation {
            what: "⟨q₁, p₁⟩_W must equal 1".into(),
            residual,
        });
    }
    let k = op.k() - p1 * q1.adjoint() * nu1;
    DiscreteOperator::from_matrix(op.rule(), op.shape(), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    /// `λ₁⁻¹ = sup ∫ g 𝒩 h dμ` for a positive dominant eigenvalue.
    Sup,
    /// `λ₁⁻¹ = inf ∫ g 𝒩 h dμ` for a negative one.
    Inf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalEstimate {
    pub value: f64,
    pub g: CVec,
    pub h: CVec,
    pub kind: Extremum,
}

/// `⟨g, A h⟩_W / ⟨g, h⟩_W`, the constrained form with the constraint divided
/// out.
pub fn variational_form(op: &DiscreteOperator, g: &CVec, h: &CVec) -> Result<Complex64> {
    let w = op.weights_out();
    let denom = weighted_inner(w, g, h);
    if denom == ZERO {
        return Err(FredError::DivisionByZero("⟨g, h⟩_W = 0".into()));
    }
    Ok(weighted_inner(w, g, &op.apply(h)?) / denom)
}

/// Stationary point of `⟨g, A h⟩_W` subject to `⟨g, h⟩_W = 1`, read off the
/// dominant bi-orthogonal pair: `g = q₁`, `h = p₁`, value `ν₁`.
pub fn variational_estimate(op: &DiscreteOperator) -> Result<VariationalEstimate> {
    let d = djf_eig(op)?;
    if d.significant == 0 {
        return Err(FredError::NoSpectrum);
    }
    let nu = d.eigenvalues[0];
    if nu.im.abs() > 1e-10 * nu.norm() {
        return Err(FredError::UnsupportedProfile(format!(
            "dominant eigenvalue {nu} is not real"
        )));
    }
    Ok(VariationalEstimate {
        value: nu.re,
        g: d.q(0),
        h: d.p(0),
        kind: if nu.re > 0.0 { Extremum::Sup } else { Extremum::Inf },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTriple {
    pub nu: Complex64,
    pub p: CVec,
    pub q: CVec,
    pub trace: PowerTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialSpectrum {
    pub triples: Vec<SpectralTriple>,
    /// Stage index and reason when fewer than `k` triples were recovered.
    pub failure: Option<(usize, FredError)>,
}

/// Generic start vector with components along every eigenvector of
/// practical interest: no symmetry in the node index.
pub fn default_start(len: usize) -> CVec {
    CVec::from_fn(len, |i, _| {
        let t = i as f64;
        re(1.0 + 0.5 * (0.7 * t + 0.4).cos() + 0.25 * (1.3 * t + 0.1).sin())
    })
}

/// Alternates power iteration, pair extraction and deflation `k` times.
pub fn sequential_spectrum(
    op: &DiscreteOperator,
    k: usize,
    n_max: usize,
    tol: f64,
) -> Result<SequentialSpectrum> {
    op.require_square("sequential_spectrum")?;
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let f = default_start(op.dim_in());
    let mut current = op.clone();
    let mut triples = Vec::with_capacity(k);
    for stage in 0..k {
        match sequential_stage(&current, &f, n_max, tol) {
            Ok(t) => {
                let next = deflate(&current, t.nu, &t.p, &t.q);
                triples.push(t);
                match next {
                    Ok(n) => current = n,
                    Err(e) => {
                        return Ok(SequentialSpectrum {
                            triples,
                            failure: Some((stage + 1, e)),
                        })
                    }
                }
            }
            Err(e) => {
                return Ok(SequentialSpectrum {
                    triples,
                    failure: Some((stage, e)),
                })
            }
        }
    }
    Ok(SequentialSpectrum {
        triples,
        failure: None,
    })
}

fn sequential_stage(op: &DiscreteOperator, f: &CVec, n_max: usize, tol: f64) -> Result<SpectralTriple> {
    let trace = power_ratio_estimate(op, f, n_max, tol)?;
    if !trace.converged {
        return Err(FredError::Convergence(if trace.multiplicity_warning {
            "ratios oscillate; the dominant eigenvalue is not simple".into()
        } else {
            format!("no convergence within {n_max} iterations")
        }));
    }
    let (p, q) = extract_leading_pair(op, trace.estimate, f, f, n_max)?;
    let nu = weighted_inner(op.weights_out(), &q, &op.apply(&p)?);
    Ok(SpectralTriple { nu, p, q, trace })
}
