//! Kernels `N(y, z)` and a gallery of fixtures: the Mehler kernel,
//! separable (degenerate) kernels, kernels with a prescribed Jordan
//! structure, and kernels sampled on a grid.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, FredError, Result};
use crate::jordanforms::{jordan_block, jordan_matrix, JordanBlock};
use crate::linalg::{re, CMat, CVec, ZERO};
use crate::measure::{QuadratureRule, RuleKind};
use crate::par;

pub type ScalarFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64) -> CVec + Send + Sync>;
pub type BlockFn = Arc<dyn Fn(f64, f64) -> CMat + Send + Sync>;

/// One term `coeff · right(y) · left(z)*` of a finite-rank kernel.
#[derive(Clone)]
pub struct RankTerm {
    pub coeff: Complex64,
    pub right: VectorFn,
    pub left: VectorFn,
}

#[derive(Clone)]
pub enum KernelBody {
    ClosedForm(BlockFn),
    FiniteRank(Vec<RankTerm>),
    GridSampled { rule: QuadratureRule, table: CMat },
}

/// A matrix-valued kernel with `s₁ × s₂` blocks.
#[derive(Clone)]
pub struct Kernel {
    label: String,
    shape: (usize, usize),
    body: KernelBody,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = match &self.body {
            KernelBody::ClosedForm(_) => "closed-form".to_string(),
            KernelBody::FiniteRank(t) => format!("finite-rank({})", t.len()),
            KernelBody::GridSampled { rule, .. } => format!("grid({} nodes)", rule.len()),
        };
        f.debug_struct("Kernel")
            .field("label", &self.label)
            .field("shape", &self.shape)
            .field("body", &body)
            .finish()
    }
}

/// Lifts a scalar function to a length-1 vector function.
pub fn vector_fn(f: ScalarFn) -> VectorFn {
    Arc::new(move |x| CVec::from_element(1, f(x)))
}

/// Real polynomial `Σ coeffs[k]·xᵏ` (Horner).
pub fn polynomial(coeffs: Vec<f64>) -> ScalarFn {
    Arc::new(move |x| re(coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)))
}

impl Kernel {
    pub fn closed_form(label: impl Into<String>, shape: (usize, usize), f: BlockFn) -> Result<Self> {
        if shape.0 == 0 || shape.1 == 0 {
            return Err(invalid("block shape must be positive"));
        }
        Ok(Kernel {
            label: label.into(),
            shape,
            body: KernelBody::ClosedForm(f),
        })
    }

    /// Scalar (1×1) closed-form kernel.
    pub fn scalar<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        Kernel {
            label: label.into(),
            shape: (1, 1),
            body: KernelBody::ClosedForm(Arc::new(move |y, z| CMat::from_element(1, 1, f(y, z)))),
        }
    }

    pub fn finite_rank(
        label: impl Into<String>,
        shape: (usize, usize),
        terms: Vec<RankTerm>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("a finite-rank kernel needs at least one term"));
        }
        if shape.0 == 0 || shape.1 == 0 {
            return Err(invalid("block shape must be positive"));
        }
        Ok(Kernel {
            label: label.into(),
            shape,
            body: KernelBody::FiniteRank(terms),
        })
    }

    /// Block-diagonal composition `diag(N₁, N₂, …)` of closed-form or
    /// finite-rank kernels.
    pub fn block_diagonal(label: impl Into<String>, parts: Vec<Kernel>) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("block_diagonal needs at least one kernel"));
        }
        if parts
            .iter()
            .any(|k| matches!(k.body, KernelBody::GridSampled { .. }))
        {
            return Err(FredError::Unsupported(
                "grid-sampled kernels cannot be composed".into(),
            ));
        }
        let s1: usize = parts.iter().map(|k| k.shape.0).sum();
        let s2: usize = parts.iter().map(|k| k.shape.1).sum();
        let f: BlockFn = Arc::new(move |y, z| {
            let mut out = CMat::zeros(s1, s2);
            let (mut r, mut c) = (0, 0);
            for k in &parts {
                // the evaluator is infallible for these bodies
                let block = k.eval_unchecked(y, z);
                out.view_mut((r, c), k.shape).copy_from(&block);
                r += k.shape.0;
                c += k.shape.1;
            }
            out
        });
        Kernel::closed_form(label, (s1, s2), f)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn body(&self) -> &KernelBody {
        &self.body
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.body, KernelBody::GridSampled { .. })
    }

    fn eval_unchecked(&self, y: f64, z: f64) -> CMat {
        match &self.body {
            KernelBody::ClosedForm(f) => f(y, z),
            KernelBody::FiniteRank(terms) => {
                let mut acc = CMat::zeros(self.shape.0, self.shape.1);
                for t in terms {
                    accumulate_term(&mut acc, t.coeff, &(t.right)(y), &(t.left)(z));
                }
                acc
            }
            KernelBody::GridSampled { rule, table } => {
                let (i, j) = (rule.node_index(y).unwrap(), rule.node_index(z).unwrap());
                table
                    .view((i * self.shape.0, j * self.shape.1), self.shape)
                    .into_owned()
            }
        }
    }

    /// `N(y, z)` as an `s₁ × s₂` block. Grid-sampled kernels are defined only
    /// at node pairs.
    pub fn eval(&self, y: f64, z: f64) -> Result<CMat> {
        if let KernelBody::GridSampled { rule, .. } = &self.body {
            if rule.node_index(y).is_none() || rule.node_index(z).is_none() {
                return Err(FredError::Unsupported(format!(
                    "grid-sampled kernel '{}' has no value off its grid (y = {y}, z = {z})",
                    self.label
                )));
            }
        }
        let block = self.eval_unchecked(y, z);
        check_block(&block, self.shape, y, z)?;
        Ok(block)
    }

    /// Scalar value for 1×1 kernels.
    pub fn eval_scalar(&self, y: f64, z: f64) -> Result<Complex64> {
        if self.shape != (1, 1) {
            return Err(invalid(format!("kernel '{}' is not scalar", self.label)));
        }
        Ok(self.eval(y, z)?[(0, 0)])
    }

    /// Raw samples `K[(i·s₁ + a, j·s₂ + b)] = N(xᵢ, xⱼ)[a, b]`.
    pub fn sample(&self, rule: &QuadratureRule) -> Result<CMat> {
        let n = rule.len();
        let (s1, s2) = self.shape;
        let nodes = rule.nodes();
        match &self.body {
            KernelBody::GridSampled { rule: grid, table } => {
                if grid != rule {
                    return Err(FredError::Unsupported(format!(
                        "grid-sampled kernel '{}' can only be discretized on its own rule",
                        self.label
                    )));
                }
                Ok(table.clone())
            }
            KernelBody::ClosedForm(f) => {
                let rows = par::try_map_indexed(n, |i| {
                    (0..n)
                        .map(|j| {
                            let block = f(nodes[i], nodes[j]);
                            check_block(&block, self.shape, nodes[i], nodes[j])?;
                            Ok(block)
                        })
                        .collect::<Result<Vec<CMat>>>()
                })?;
                let mut k = CMat::zeros(n * s1, n * s2);
                for (i, row) in rows.iter().enumerate() {
                    for (j, block) in row.iter().enumerate() {
                        k.view_mut((i * s1, j * s2), (s1, s2)).copy_from(block);
                    }
                }
                Ok(k)
            }
            KernelBody::FiniteRank(terms) => {
                // Evaluate each factor once per node, then compose exactly as
                // `eval` does so the two paths agree bit for bit.
                let rights: Vec<Vec<CVec>> = terms
                    .iter()
                    .map(|t| par::map_indexed(n, |i| (t.right)(nodes[i])))
                    .collect();
                let lefts: Vec<Vec<CVec>> = terms
                    .iter()
                    .map(|t| par::map_indexed(n, |j| (t.left)(nodes[j])))
                    .collect();
                let rows = par::try_map_indexed(n, |i| {
                    (0..n)
                        .map(|j| {
                            let mut acc = CMat::zeros(s1, s2);
                            for (t, term) in terms.iter().enumerate() {
                                accumulate_term(&mut acc, term.coeff, &rights[t][i], &lefts[t][j]);
                            }
                            check_block(&acc, self.shape, nodes[i], nodes[j])?;
                            Ok(acc)
                        })
                        .collect::<Result<Vec<CMat>>>()
                })?;
                let mut k = CMat::zeros(n * s1, n * s2);
                for (i, row) in rows.iter().enumerate() {
                    for (j, block) in row.iter().enumerate() {
                        k.view_mut((i * s1, j * s2), (s1, s2)).copy_from(block);
                    }
                }
                Ok(k)
            }
        }
    }
}

fn accumulate_term(acc: &mut CMat, coeff: Complex64, right: &CVec, left: &CVec) {
    for a in 0..acc.nrows() {
        for b in 0..acc.ncols() {
            acc[(a, b)] += coeff * right[a] * left[b].conj();
        }
    }
}

fn check_block(block: &CMat, shape: (usize, usize), y: f64, z: f64) -> Result<()> {
    if block.shape() != shape {
        return Err(FredError::Evaluation {
            y,
            z,
            reason: format!("block has shape {:?}, expected {:?}", block.shape(), shape),
        });
    }
    if block.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(FredError::Evaluation {
            y,
            z,
            reason: "non-finite value".into(),
        });
    }
    Ok(())
}

/// Probabilists' Hermite polynomial `Heⱼ(x)` by the three-term recurrence
/// `He_{j+1} = x·Heⱼ − j·He_{j−1}`.
pub fn hermite_he(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..j {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// The normalized Hermite function `pⱼ(x) = Heⱼ(x)/√(j!)`, orthonormal
/// under the standard normal density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitePair {
    pub degree: usize,
}

impl HermitePair {
    pub fn new(degree: usize) -> Self {
        HermitePair { degree }
    }

    pub fn eval(&self, x: f64) -> f64 {
        // normalize inside the recurrence to avoid overflowing j!
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 0..self.degree {
            let kf = k as f64;
            let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
            prev = cur;
            cur = next;
        }
        cur
    }

    pub fn as_fn(&self) -> ScalarFn {
        let p = *self;
        Arc::new(move |x| re(p.eval(x)))
    }
}

/// Mehler kernel: the ratio `φ_C(y,z) / (φ(y)φ(z))` of the standard
/// bivariate normal density with correlation `r` to the product of its
/// marginals. Under the standard normal measure its eigenpairs are
/// `(rʲ, Heⱼ/√j!)`.
pub fn mehler_kernel(r: f64) -> Result<Kernel> {
    if !(r.is_finite() && r.abs() < 1.0) {
        return Err(invalid(format!("mehler kernel needs |r| < 1, got r = {r}")));
    }
    // log φ_C(y,z) = −log 2π − ½log(1−r²) − (y² − 2ryz + z²)/(2(1−r²))
    // log φ(y)φ(z) = −log 2π − (y² + z²)/2
    // difference of exponents: [−y² + 2ryz − z² + (1−r²)(y² + z²)] / (2(1−r²))
    //                        = (2r·yz − r²(y² + z²)) / (2(1−r²))
    let one_minus = 1.0 - r * r;
    let prefactor = 1.0 / one_minus.sqrt();
    Ok(Kernel::scalar(format!("mehler(r={r})"), move |y, z| {
        re(prefactor * ((2.0 * r * y * z - r * r * (y * y + z * z)) / (2.0 * one_minus)).exp())
    }))
}

/// Degenerate kernel `Σⱼ νⱼ·rightⱼ(y)·leftⱼ(z)*`.
pub fn separable_kernel(coeffs: &[Complex64], rights: &[ScalarFn], lefts: &[ScalarFn]) -> Result<Kernel> {
    if coeffs.is_empty() {
        return Err(invalid("separable kernel needs at least one term"));
    }
    if coeffs.len() != rights.len() || coeffs.len() != lefts.len() {
        return Err(invalid(format!(
            "length mismatch: {} coefficients, {} right and {} left functions",
            coeffs.len(),
            rights.len(),
            lefts.len()
        )));
    }
    let terms = coeffs
        .iter()
        .zip(rights.iter().zip(lefts))
        .map(|(c, (r, l))| RankTerm {
            coeff: *c,
            right: vector_fn(r.clone()),
            left: vector_fn(l.clone()),
        })
        .collect();
    Kernel::finite_rank(format!("separable({} terms)", coeffs.len()), (1, 1), terms)
}

/// The identically zero scalar kernel.
pub fn zero_kernel() -> Kernel {
    Kernel::scalar("zero", |_, _| ZERO)
}

/// Worst entry of `|G − I|`, `G` the weighted Gram matrix of `basis`.
pub fn gram_residual(basis: &[ScalarFn], rule: &QuadratureRule) -> f64 {
    let samples: Vec<Vec<Complex64>> = basis
        .iter()
        .map(|f| rule.nodes().iter().map(|&x| f(x)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            let g: Complex64 = rule
                .weights()
                .iter()
                .enumerate()
                .map(|(i, w)| samples[a][i].conj() * samples[b][i] * *w)
                .sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - re(target)).norm());
        }
    }
    worst
}

/// Finite-rank kernel `Σ_{a,b} M[a,b]·e_a(y)·e_b(z)*`, whose operator acts as
/// `M` on coordinates in the orthonormal `basis` and as 0 on its complement.
pub fn coordinate_kernel(
    label: impl Into<String>,
    matrix: &CMat,
    basis: &[ScalarFn],
    rule: &QuadratureRule,
) -> Result<Kernel> {
    if !matrix.is_square() || matrix.nrows() != basis.len() {
        return Err(invalid(format!(
            "coordinate matrix is {}x{} but the basis has {} functions",
            matrix.nrows(),
            matrix.ncols(),
            basis.len()
        )));
    }
    let worst = gram_residual(basis, rule);
    if worst > 1e-10 {
        return Err(FredError::PreconditionViolation {
            what: "basis is not orthonormal under the rule".into(),
            residual: worst,
        });
    }
    let mut terms = Vec::new();
    for a in 0..matrix.nrows() {
        for b in 0..matrix.ncols() {
            if matrix[(a, b)] != ZERO {
                terms.push(RankTerm {
                    coeff: matrix[(a, b)],
                    right: vector_fn(basis[a].clone()),
                    left: vector_fn(basis[b].clone()),
                });
            }
        }
    }
    if terms.is_empty() {
        // keep a well-formed finite-rank body for the zero matrix
        terms.push(RankTerm {
            coeff: ZERO,
            right: vector_fn(basis[0].clone()),
            left: vector_fn(basis[0].clone()),
        });
    }
    Kernel::finite_rank(label, (1, 1), terms)
}

/// Finite-rank kernel whose operator restricted to `span(basis)` is the
/// Jordan block `J_m(lam)`.
pub fn defective_kernel(
    lam: Complex64,
    m: usize,
    basis: &[ScalarFn],
    rule: &QuadratureRule,
) -> Result<Kernel> {
    if m < 2 {
        return Err(invalid("defective kernel needs block size m ≥ 2"));
    }
    if basis.len() != m {
        return Err(invalid(format!("need {m} basis functions, got {}", basis.len())));
    }
    let j = jordan_block(lam, m)?;
    coordinate_kernel(format!("defective(lam={lam}, m={m})"), &j, basis, rule)
}

/// Kernel with the Jordan structure `diag(J_{m₁}(λ₁), …)` on `span(basis)`.
pub fn jordan_lifted_kernel(
    blocks: &[JordanBlock],
    basis: &[ScalarFn],
    rule: &QuadratureRule,
) -> Result<Kernel> {
    let j = jordan_matrix(blocks)?;
    let desc: Vec<String> = blocks
        .iter()
        .map(|b| format!("({}, {})", b.lambda, b.size))
        .collect();
    coordinate_kernel(format!("jordan[{}]", desc.join(", ")), &j, basis, rule)
}

/// Kernel known only at node pairs of `rule`. The table must be
/// `(n·s₁) × (n·s₂)`.
pub fn grid_kernel(rule: &QuadratureRule, table: CMat) -> Result<Kernel> {
    let n = rule.len();
    let (rows, cols) = table.shape();
    if rows == 0 || cols == 0 || rows % n != 0 || cols % n != 0 {
        return Err(invalid(format!(
            "grid table is {rows}x{cols}, not a multiple of the {n}-node rule"
        )));
    }
    Ok(Kernel {
        label: format!("grid({n} nodes)"),
        shape: (rows / n, cols / n),
        body: KernelBody::GridSampled {
            rule: rule.clone(),
            table,
        },
    })
}

/// Orthonormal shifted Legendre functions `√((2k+1)/(b−a))·P_k(2(y−a)/(b−a) − 1)`
/// for `k < m` on `[a, b]` with Lebesgue measure.
pub fn legendre_basis(m: usize, a: f64, b: f64) -> Vec<ScalarFn> {
    (0..m)
        .map(|k| {
            let scale = ((2 * k + 1) as f64 / (b - a)).sqrt();
            let f: ScalarFn = Arc::new(move |y| {
                let t = 2.0 * (y - a) / (b - a) - 1.0;
                let (mut prev, mut cur) = (0.0, 1.0);
                for j in 0..k {
                    let jf = j as f64;
                    let next = ((2.0 * jf + 1.0) * t * cur - jf * prev) / (jf + 1.0);
                    prev = cur;
                    cur = next;
                }
                re(scale * cur)
            });
            f
        })
        .collect()
}

/// `p₀, …, p_{m−1}`, orthonormal under the standard normal density.
pub fn hermite_basis(m: usize) -> Vec<ScalarFn> {
    (0..m).map(|j| HermitePair::new(j).as_fn()).collect()
}

/// Polynomials of degree `< m` orthonormalized in the rule's own weighted
/// inner product (Gram–Schmidt on monomials). Needs `m ≤ rule.len()`.
pub fn polynomial_basis(rule: &QuadratureRule, m: usize) -> Result<Vec<ScalarFn>> {
    if m > rule.len() {
        return Err(invalid(format!(
            "cannot build {m} orthonormal polynomials on {} nodes",
            rule.len()
        )));
    }
    let xs = rule.nodes();
    let ws = rule.weights();
    let inner = |p: &[f64], q: &[f64]| -> f64 {
        xs.iter()
            .zip(ws)
            .map(|(x, w)| w * horner(p, *x) * horner(q, *x))
            .sum()
    };
    let mut coeffs: Vec<Vec<f64>> = Vec::new();
    for k in 0..m {
        let mut p = vec![0.0; k + 1];
        p[k] = 1.0;
        for _ in 0..2 {
            for q in &coeffs {
                let proj = inner(&p, q);
                for (i, c) in q.iter().enumerate() {
                    p[i] -= proj * c;
                }
            }
        }
        let norm = inner(&p, &p).sqrt();
        if !(norm > 0.0) {
            return Err(invalid("monomials are linearly dependent on this rule"));
        }
        p.iter_mut().for_each(|c| *c /= norm);
        coeffs.push(p);
    }
    Ok(coeffs.into_iter().map(polynomial).collect())
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// The natural orthonormal polynomial basis for a rule: shifted Legendre for
/// Gauss–Legendre, Hermite for Gauss–Hermite, Gram–Schmidt otherwise.
pub fn basis_for_rule(rule: &QuadratureRule, m: usize) -> Result<Vec<ScalarFn>> {
    if m > rule.len() {
        return Err(invalid(format!(
            "basis of size {m} does not fit on {} nodes",
            rule.len()
        )));
    }
    match rule.kind() {
        RuleKind::GaussLegendre { a, b } => Ok(legendre_basis(m, a, b)),
        RuleKind::GaussHermiteProb => Ok(hermite_basis(m)),
        _ => polynomial_basis(rule, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{discrete_measure, gauss_hermite_prob, gauss_legendre};
    use approx::assert_relative_eq;

    fn monomial(k: i32) -> ScalarFn {
        Arc::new(move |x| re(x.powi(k)))
    }

    #[test]
    fn hermite_recurrence_and_normalization() {
        assert_eq!(hermite_he(0, 3.0), 1.0);
        assert_eq!(hermite_he(1, 3.0), 3.0);
        assert_eq!(hermite_he(2, 3.0), 8.0);
        assert_eq!(hermite_he(3, 2.0), 2.0);
        for j in 1..12usize {
            for i in 0..=120 {
                let x = -6.0 + 0.1 * i as f64;
                let lhs = hermite_he(j + 1, x);
                let rhs = x * hermite_he(j, x) - j as f64 * hermite_he(j - 1, x);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
                let fact: f64 = (1..=j).map(|k| k as f64).product();
                let p = HermitePair::new(j).eval(x);
                assert!((p - hermite_he(j, x) / fact.sqrt()).abs() <= 1e-12 * p.abs().max(1.0));
            }
        }
        assert_eq!(HermitePair::new(0).eval(1.7), 1.0);
    }

    #[test]
    fn hermite_pairs_are_orthonormal() {
        let rule = gauss_hermite_prob(40).unwrap();
        assert!(gram_residual(&hermite_basis(9), &rule) <= 1e-9);
    }

    #[test]
    fn mehler_closed_form_matches_expansion() {
        let k = mehler_kernel(0.5).unwrap();
        let closed = k.eval_scalar(1.0, 1.0).unwrap().re;
        let mut series = 0.0;
        for j in 0..200 {
            let p = HermitePair::new(j).eval(1.0);
            series += 0.5f64.powi(j as i32) * p * p;
        }
        assert!((closed - series).abs() <= 1e-10, "{closed} vs {series}");
        let zero = mehler_kernel(0.0).unwrap();
        assert_eq!(zero.eval_scalar(2.0, -3.0).unwrap(), re(1.0));
        assert!(mehler_kernel(1.0).is_err());
        assert!(mehler_kernel(-1.5).is_err());
    }

    #[test]
    fn mehler_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let k = mehler_kernel(0.7).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let y: f64 = rng.random_range(-4.0..4.0);
            let z: f64 = rng.random_range(-4.0..4.0);
            let a = k.eval_scalar(y, z).unwrap();
            let b = k.eval_scalar(z, y).unwrap();
            assert!((a - b).norm() <= 1e-13 * a.norm().max(1.0));
        }
    }

    #[test]
    fn separable_rejects_mismatch() {
        assert!(matches!(
            separable_kernel(&[], &[], &[]),
            Err(FredError::InvalidArgument(_))
        ));
        assert!(separable_kernel(&[re(1.0)], &[monomial(1)], &[]).is_err());
        let k = separable_kernel(&[re(2.0)], &[monomial(1)], &[monomial(2)]).unwrap();
        assert_eq!(k.eval_scalar(3.0, 2.0).unwrap(), re(24.0));
    }

    #[test]
    fn finite_rank_sampling_matches_pointwise_evaluation_exactly() {
        let rule = gauss_legendre(7, 0.0, 1.0).unwrap();
        let rights: Vec<ScalarFn> = vec![monomial(1), Arc::new(|x: f64| Complex64::new(x.cos(), x))];
        let lefts: Vec<ScalarFn> = vec![monomial(2), Arc::new(|x: f64| Complex64::new(1.0, -x * x))];
        let k = separable_kernel(&[Complex64::new(0.3, 0.1), re(-1.2)], &rights, &lefts).unwrap();
        let samples = k.sample(&rule).unwrap();
        for (i, &y) in rule.nodes().iter().enumerate() {
            for (j, &z) in rule.nodes().iter().enumerate() {
                assert_eq!(samples[(i, j)], k.eval_scalar(y, z).unwrap());
            }
        }
    }

    #[test]
    fn grid_kernel_shape_and_lookup() {
        let rule = discrete_measure(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let table = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, re(1.0)]);
        let k = grid_kernel(&rule, table.clone()).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert_eq!(k.eval_scalar(1.0, 1.0).unwrap(), re(1.0));
        assert!(matches!(k.eval(0.5, 1.0), Err(FredError::Unsupported(_))));
        assert_eq!(k.sample(&rule).unwrap(), table);
        let other = gauss_legendre(2, 0.0, 1.0).unwrap();
        assert!(k.sample(&other).is_err());
        assert!(grid_kernel(&rule, CMat::zeros(3, 2)).is_err());
    }

    #[test]
    fn nonfinite_values_are_reported_with_the_pair() {
        let k = Kernel::scalar("bad", |y, z| re(1.0 / (y - z)));
        let rule = gauss_legendre(3, 0.0, 1.0).unwrap();
        match k.sample(&rule) {
            Err(FredError::Evaluation { y, z, .. }) => assert_eq!(y, z),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn defective_kernel_checks_orthonormality() {
        let rule = gauss_legendre(6, 0.0, 1.0).unwrap();
        let bad = vec![monomial(0), monomial(1)];
        match defective_kernel(re(0.5), 2, &bad, &rule) {
            Err(FredError::PreconditionViolation { residual, .. }) => {
                // ⟨1, y⟩ = 1/2 is the worst Gram entry
                assert_relative_eq!(residual, 2.0 / 3.0, epsilon = 1e-12);
            }
            other => panic!("expected precondition violation, got {other:?}"),
        }
        let basis = legendre_basis(2, 0.0, 1.0);
        assert!(defective_kernel(re(0.5), 2, &basis, &rule).is_ok());
        assert!(defective_kernel(re(0.5), 1, &basis[..1], &rule).is_err());
    }

    #[test]
    fn bases_are_orthonormal_on_their_rules() {
        let gl = gauss_legendre(8, -1.0, 3.0).unwrap();
        assert!(gram_residual(&basis_for_rule(&gl, 5).unwrap(), &gl) <= 1e-12);
        let pts = discrete_measure(&[0.0, 0.3, 0.5, 0.9, 1.4], &[1.0, 0.5, 2.0, 0.25, 1.0]).unwrap();
        assert!(gram_residual(&basis_for_rule(&pts, 4).unwrap(), &pts) <= 1e-12);
        assert!(basis_for_rule(&pts, 6).is_err());
    }

    #[test]
    fn block_diagonal_composition() {
        let a = mehler_kernel(0.3).unwrap();
        let b = separable_kernel(&[re(1.0)], &[monomial(1)], &[monomial(1)]).unwrap();
        let k = Kernel::block_diagonal("diag", vec![a.clone(), b]).unwrap();
        assert_eq!(k.shape(), (2, 2));
        let v = k.eval(0.4, 0.6).unwrap();
        assert_eq!(v[(0, 0)], a.eval_scalar(0.4, 0.6).unwrap());
        assert_eq!(v[(1, 1)], re(0.4 * 0.6));
        assert_eq!(v[(0, 1)], ZERO);
    }
}
