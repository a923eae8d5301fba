//! Hermitian and bi-orthogonal (diagonal Jordan form) eigendecompositions of
//! a discretized operator, and the leading-term asymptotics of its powers.
//!
//! Both decompositions work on `B = W½ K W½`, which is similar to `A = K W`.
//! If `B x = ν x` then `p = W^{-½} x` satisfies `A p = ν p`, and Euclidean
//! orthonormality of the `x` becomes weighted orthonormality of the `p`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{invalid, FredError, Result};
use crate::linalg::{
    anchor_factor, condition_number, decouple_clusters, hermitian_defect, phase, re, schur, single_linkage,
    spectral_order, weighted_inner, weighted_norm, CMat, CVec, ZERO,
};
use crate::nystrom::DiscreteOperator;
use crate::par;

/// Eigenvalues below this fraction of `|ν₁|` are numerically zero.
pub const NEGLIGIBLE: f64 = 1e-12;
/// Largest eigenvector condition number accepted before the structure is
/// treated as defective.
pub const DEFECT_CONDITION_LIMIT: f64 = 1e8;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

const MULTIPLICITY_TOL: f64 = 1e-6;

/// `N(y,z) ≈ Σⱼ νⱼ pⱼ(y) qⱼ(z)*` with `⟨qⱼ, p_k⟩_W = δⱼₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiSpectralDecomposition {
    /// Descending modulus, ties by descending phase.
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors `pⱼ` as columns of node samples.
    pub right: CMat,
    /// Left eigenvectors `qⱼ`.
    pub left: CMat,
    /// `max |⟨qⱼ, p_k⟩_W − δⱼₖ|` over the significant pairs.
    pub biorth_residual: f64,
    pub hermitian_flag: bool,
    /// Number of leading pairs with `|ν| > NEGLIGIBLE·|ν₁|`.
    pub significant: usize,
    pub weights: Vec<f64>,
}

impl BiSpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn p(&self, j: usize) -> CVec {
        self.right.column(j).into_owned()
    }

    pub fn q(&self, j: usize) -> CVec {
        self.left.column(j).into_owned()
    }

    /// `λⱼ = νⱼ⁻¹` for the significant pairs.
    pub fn fredholm_eigenvalues(&self) -> Vec<Complex64> {
        self.eigenvalues[..self.significant]
            .iter()
            .map(|nu| nu.inv())
            .collect()
    }

    /// `max_{j,k<count} |⟨qⱼ, p_k⟩_W − δⱼₖ|`.
    pub fn biorthogonality_defect(&self, count: usize) -> f64 {
        let count = count.min(self.len());
        let mut worst: f64 = 0.0;
        for j in 0..count {
            let qj = self.q(j);
            for k in 0..count {
                let g = weighted_inner(&self.weights, &qj, &self.p(k));
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g - re(target)).norm());
            }
        }
        worst
    }
}

fn check_weights(op: &DiscreteOperator) -> Vec<f64> {
    op.weights_out().to_vec()
}

/// Spectral decomposition of a Hermitian kernel (Mercer form).
pub fn hermitian_eig(op: &DiscreteOperator) -> Result<BiSpectralDecomposition> {
    op.require_square("hermitian_eig")?;
    let b = op.b();
    let defect = hermitian_defect(b);
    if defect > HERMITIAN_TOL {
        return Err(FredError::WrongDecomposition(format!(
            "B is not Hermitian (relative defect {defect:.3e}); use djf_eig"
        )));
    }
    hermitian_path(op)
}

fn hermitian_path(op: &DiscreteOperator) -> Result<BiSpectralDecomposition> {
    let b = op.b();
    let sym = (b + b.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(sym);
    let values: Vec<Complex64> = eig.eigenvalues.iter().map(|&v| re(v)).collect();
    let weights = check_weights(op);
    let order = spectral_order(&values);
    let mut cols = Vec::with_capacity(order.len());
    for &j in &order {
        cols.push(to_samples(&eig.eigenvectors.column(j).into_owned(), &weights));
    }
    let eigenvalues: Vec<Complex64> = order.iter().map(|&j| values[j]).collect();
    let right = if cols.is_empty() {
        CMat::zeros(0, 0)
    } else {
        CMat::from_columns(&cols)
    };
    let significant = significant_count(&eigenvalues);
    let mut d = BiSpectralDecomposition {
        eigenvalues,
        left: right.clone(),
        right,
        biorth_residual: 0.0,
        hermitian_flag: true,
        significant,
        weights,
    };
    d.biorth_residual = d.biorthogonality_defect(significant);
    Ok(d)
}

/// Maps a `B`-space vector to node samples with unit weighted norm and the
/// anchor component real positive.
fn to_samples(x: &CVec, weights: &[f64]) -> CVec {
    let mut p = CVec::from_iterator(x.len(), x.iter().zip(weights).map(|(v, w)| v / w.sqrt()));
    let norm = weighted_norm(weights, &p);
    if norm > 0.0 {
        p /= re(norm);
    }
    let anchor = anchor_factor(&p);
    p * anchor
}

fn significant_count(sorted: &[Complex64]) -> usize {
    let lead = sorted.first().map(|v| v.norm()).unwrap_or(0.0);
    if lead == 0.0 {
        return 0;
    }
    sorted.iter().take_while(|v| v.norm() > NEGLIGIBLE * lead).count()
}

/// Bi-orthogonal eigendecomposition. Hermitian inputs are routed to the
/// Hermitian path.
pub fn djf_eig(op: &DiscreteOperator) -> Result<BiSpectralDecomposition> {
    op.require_square("djf_eig")?;
    if hermitian_defect(op.b()) <= HERMITIAN_TOL {
        return hermitian_path(op);
    }
    djf_eig_general(op)
}

/// Bi-orthogonal eigendecomposition through the complex Schur form, without
/// the Hermitian shortcut.
pub fn djf_eig_general(op: &DiscreteOperator) -> Result<BiSpectralDecomposition> {
    op.require_square("djf_eig")?;
    let b = op.b();
    let size = b.nrows();
    let weights = check_weights(op);
    let (z, t) = schur(b)?;
    let values: Vec<Complex64> = (0..size).map(|i| t[(i, i)]).collect();
    let lead = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let negligible = |v: Complex64| v.norm() <= NEGLIGIBLE * lead;
    let labels = single_linkage(&values, |a, b| match (negligible(a), negligible(b)) {
        (true, true) => true,
        (false, false) => (a - b).norm() <= MULTIPLICITY_TOL * a.norm().max(b.norm()),
        _ => false,
    });
    let (y, d) = decouple_clusters(&t, &labels);
    let x0 = par::matmul(&z, &y);
    let b_norm = b.norm();

    let cluster_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut x = CMat::zeros(size, size);
    for c in 0..cluster_count {
        let idx: Vec<usize> = (0..size).filter(|&i| labels[i] == c).collect();
        if idx.len() > 1 && !negligible(values[idx[0]]) {
            let mu = idx.iter().map(|&i| values[i]).sum::<Complex64>() / re(idx.len() as f64);
            let mut dev: f64 = 0.0;
            for &i in &idx {
                for &j in &idx {
                    let target = if i == j { mu } else { ZERO };
                    dev += (d[(i, j)] - target).norm_sqr();
                }
            }
            let dev = dev.sqrt();
            if dev > 1e-7 * b_norm {
                return Err(FredError::DefectiveSuspected {
                    condition: dev / (f64::EPSILON * b_norm),
                });
            }
        }
        let cols: Vec<CVec> = idx.iter().map(|&i| x0.column(i).into_owned()).collect();
        let block = CMat::from_columns(&cols);
        let q = block.qr().q();
        for (k, &i) in idx.iter().enumerate() {
            x.set_column(i, &q.column(k));
        }
    }

    let order = spectral_order(&values);
    let eigenvalues: Vec<Complex64> = order.iter().map(|&j| values[j]).collect();
    let significant = significant_count(&eigenvalues);
    // B-space columns with unit norm and anchored phase
    let mut xs = CMat::zeros(size, size);
    let mut right = CMat::zeros(size, size);
    for (k, &j) in order.iter().enumerate() {
        let p = to_samples(&x.column(j).into_owned(), &weights);
        let xb = CVec::from_iterator(size, p.iter().zip(&weights).map(|(v, w)| v * w.sqrt()));
        xs.set_column(k, &xb);
        right.set_column(k, &p);
    }
    if significant > 0 {
        let cond = condition_number(&xs.columns(0, significant).into_owned());
        if !(cond <= DEFECT_CONDITION_LIMIT) {
            return Err(FredError::DefectiveSuspected { condition: cond });
        }
    }
    let inv = xs
        .clone()
        .lu()
        .try_inverse()
        .ok_or(FredError::DefectiveSuspected {
            condition: f64::INFINITY,
        })?;
    let ys = inv.adjoint();
    let mut left = CMat::zeros(size, size);
    for k in 0..size {
        let q = CVec::from_iterator(size, ys.column(k).iter().zip(&weights).map(|(v, w)| v / w.sqrt()));
        left.set_column(k, &q);
    }
    let mut out = BiSpectralDecomposition {
        eigenvalues,
        right,
        left,
        biorth_residual: 0.0,
        hermitian_flag: false,
        significant,
        weights,
    };
    out.biorth_residual = out.biorthogonality_defect(significant);
    Ok(out)
}

/// Leading-modulus tier of a decomposition: `νⱼ = r₁ e^{iθⱼ}` for `j ≤ R`,
/// and `r₀` the next modulus below it.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticProfile {
    pub r1: f64,
    pub r0: f64,
    /// `R`, the size of the top tier.
    pub tier: usize,
    /// `M`, the largest Jordan block on the top tier (1 for diagonal forms).
    pub block_size: usize,
    pub phases: Vec<f64>,
    top_right: CMat,
    top_left: CMat,
}

impl AsymptoticProfile {
    /// `Cₙ = Σ_{j≤R} e^{inθⱼ} pⱼ qⱼ*` in kernel-sample form.
    pub fn coefficient(&self, n: u64) -> CMat {
        let mut out = CMat::zeros(self.top_right.nrows(), self.top_left.nrows());
        for (j, theta) in self.phases.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, theta * n as f64);
            out += self.top_right.column(j) * self.top_left.column(j).adjoint() * rot;
        }
        out
    }
}

pub fn asymptotic_profile(d: &BiSpectralDecomposition, cluster_tol: f64) -> Result<AsymptoticProfile> {
    if !(0.0..1.0).contains(&cluster_tol) {
        return Err(invalid(format!(
            "cluster_tol must lie in [0, 1), got {cluster_tol}"
        )));
    }
    if d.significant == 0 {
        return Err(FredError::NoSpectrum);
    }
    let r1 = d.eigenvalues[0].norm();
    let tier = d.eigenvalues[..d.significant]
        .iter()
        .take_while(|v| v.norm() >= (1.0 - cluster_tol) * r1)
        .count();
    let r0 = d.eigenvalues[tier..d.significant]
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let phases = d.eigenvalues[..tier].iter().map(|&v| phase(v)).collect();
    Ok(AsymptoticProfile {
        r1,
        r0,
        tier,
        block_size: 1,
        phases,
        top_right: d.right.columns(0, tier).into_owned(),
        top_left: d.left.columns(0, tier).into_owned(),
    })
}

/// `r₁ⁿ Cₙ`, the leading term of the iterated kernel `N_n`, with the bound
/// `r₀ⁿ Σ_{j>R} ‖pⱼ‖_W ‖qⱼ‖_W` on the weighted norm of the remainder.
pub fn power_approx(d: &BiSpectralDecomposition, profile: &AsymptoticProfile, n: u64) -> Result<(CMat, f64)> {
    if n == 0 {
        return Err(invalid("power_approx needs n ≥ 1"));
    }
    let approx = profile.coefficient(n) * re(profile.r1.powi(n as i32));
    let scale: f64 = (profile.tier..d.significant)
        .map(|j| weighted_norm(&d.weights, &d.p(j)) * weighted_norm(&d.weights, &d.q(j)))
        .sum();
    Ok((approx, profile.r0.powi(n as i32) * scale))
}

/// Node values of the Nyström interpolant `ν⁻¹ 𝒩 pⱼ`.
///
/// Stored eigenvectors are accurate in the weighted norm; at nodes with tiny
/// weight the raw samples carry roundoff amplified by `wᵢ^{-½}`. One
/// application of the operator removes it.
pub fn eigenfunction_samples(op: &DiscreteOperator, d: &BiSpectralDecomposition, j: usize) -> Result<CVec> {
    if j >= d.len() {
        return Err(invalid(format!("pair {j} out of range ({} pairs)", d.len())));
    }
    let nu = d.eigenvalues[j];
    if j >= d.significant {
        return Err(FredError::DivisionByZero(format!(
            "eigenvalue {nu} is numerically zero"
        )));
    }
    Ok(op.apply(&d.p(j))? / nu)
}

/// `Σ_{j<k} νⱼ pⱼ qⱼ*` at node pairs.
pub fn reconstruct(d: &BiSpectralDecomposition, k: usize) -> Result<CMat> {
    if k > d.len() {
        return Err(invalid(format!(
            "rank {k} exceeds the {} available pairs",
            d.len()
        )));
    }
    let n = d.right.nrows();
    let mut out = CMat::zeros(n, n);
    for j in 0..k {
        out += d.right.column(j) * d.left.column(j).adjoint() * d.eigenvalues[j];
    }
    Ok(out)
}
