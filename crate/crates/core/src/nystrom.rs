//! Nyström discretization of `(N, μ)`: the integral operator becomes the
//! matrix `A = K·W` acting on node samples.

use num_complex::Complex64;

use crate::error::{invalid, FredError, Result};
use crate::kernelgallery::{Kernel, KernelBody};
use crate::linalg::{scale_cols, scale_rows, weighted_fro, CMat, CVec, ZERO};
use crate::measure::QuadratureRule;
use crate::par;

/// Discretized operator. Rows and columns are flattened node-major: entry
/// `(i·s₁ + a, j·s₂ + b)` belongs to the node pair `(xᵢ, xⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    rule: QuadratureRule,
    shape: (usize, usize),
    k: CMat,
    a: CMat,
    b: CMat,
    w_out: Vec<f64>,
    w_in: Vec<f64>,
}

pub fn discretize(kernel: &Kernel, rule: &QuadratureRule) -> Result<DiscreteOperator> {
    let k = kernel.sample(rule)?;
    let op = DiscreteOperator::from_matrix(rule, kernel.shape(), k)?;
    if op.norm_l2_squared() == 0.0 {
        log::warn!(
            "kernel '{}' has zero L2 norm on this rule; the operator is trivial",
            kernel.label()
        );
    }
    Ok(op)
}

impl DiscreteOperator {
    /// Wraps raw kernel samples `K` of size `(n·s₁) × (n·s₂)`.
    pub fn from_matrix(rule: &QuadratureRule, shape: (usize, usize), k: CMat) -> Result<Self> {
        let n = rule.len();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(invalid("block shape must be positive"));
        }
        if k.shape() != (n * shape.0, n * shape.1) {
            return Err(invalid(format!(
                "sample matrix is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                n * shape.0,
                n * shape.1
            )));
        }
        let w_out = rule.block_weights(shape.0);
        let w_in = rule.block_weights(shape.1);
        let sqrt_out: Vec<f64> = w_out.iter().map(|w| w.sqrt()).collect();
        let sqrt_in: Vec<f64> = w_in.iter().map(|w| w.sqrt()).collect();
        let a = scale_cols(&k, &w_in);
        let b = scale_cols(&scale_rows(&k, &sqrt_out), &sqrt_in);
        Ok(DiscreteOperator {
            rule: rule.clone(),
            shape,
            k,
            a,
            b,
            w_out,
            w_in,
        })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Raw samples `K[i, j] = N(xᵢ, xⱼ)`.
    pub fn k(&self) -> &CMat {
        &self.k
    }

    /// `A = K·W`.
    pub fn a(&self) -> &CMat {
        &self.a
    }

    /// `B = W½·K·W½`.
    pub fn b(&self) -> &CMat {
        &self.b
    }

    /// Weights matching the output (row) flattening.
    pub fn weights_out(&self) -> &[f64] {
        &self.w_out
    }

    /// Weights matching the input (column) flattening.
    pub fn weights_in(&self) -> &[f64] {
        &self.w_in
    }

    pub fn dim_out(&self) -> usize {
        self.k.nrows()
    }

    pub fn dim_in(&self) -> usize {
        self.k.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.shape.0 == self.shape.1
    }

    pub(crate) fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(invalid(format!(
                "{what} needs a square block shape, got {}x{}",
                self.shape.0, self.shape.1
            )))
        }
    }

    /// Quadrature of `∫∫‖N(y,z)‖² dμ dμ`.
    pub fn norm_l2_squared(&self) -> f64 {
        let f = weighted_fro(&self.k, &self.w_out, &self.w_in);
        f * f
    }

    /// Node samples of `𝒩f`.
    pub fn apply(&self, f: &CVec) -> Result<CVec> {
        if f.len() != self.dim_in() {
            return Err(invalid(format!(
                "input has length {}, operator expects {}",
                f.len(),
                self.dim_in()
            )));
        }
        Ok(&self.a * f)
    }

    /// Node samples of `𝒩*p = ∫ N(y, ·)* p(y) dμ(y)`, i.e. `K*·W·p`.
    pub fn apply_adjoint(&self, p: &CVec) -> Result<CVec> {
        if p.len() != self.dim_out() {
            return Err(invalid(format!(
                "input has length {}, adjoint expects {}",
                p.len(),
                self.dim_out()
            )));
        }
        let wp = CVec::from_iterator(p.len(), p.iter().zip(&self.w_out).map(|(v, w)| v * *w));
        Ok(self.k.adjoint() * wp)
    }

    /// Samples of `N_n = 𝒩^{n−1} N`, i.e. `(K·W)^{n−1}·K`.
    pub fn iterated_kernel(&self, n: usize) -> Result<CMat> {
        self.require_square("iterated_kernel")?;
        if n == 0 {
            return Err(invalid("iterate index starts at 1"));
        }
        let mut out = self.k.clone();
        for _ in 1..n {
            out = par::matmul(&self.a, &out);
        }
        Ok(out)
    }

    /// `Aⁿ` (identity for `n = 0`).
    pub fn power(&self, n: usize) -> Result<CMat> {
        self.require_square("power")?;
        let mut out = CMat::identity(self.dim_out(), self.dim_in());
        for _ in 0..n {
            out = par::matmul(&self.a, &out);
        }
        Ok(out)
    }
}

/// Off-grid value of an eigenfunction from its node samples:
/// `p(y) = ν⁻¹ Σᵢ N(y, xᵢ) wᵢ p(xᵢ)`. Returns the `s₁` block at `y`.
pub fn nystrom_extend(
    kernel: &Kernel,
    rule: &QuadratureRule,
    eig_samples: &CVec,
    nu: Complex64,
    y: f64,
) -> Result<CVec> {
    if nu == ZERO {
        return Err(FredError::DivisionByZero(
            "Nyström extension needs a nonzero eigenvalue".into(),
        ));
    }
    if let KernelBody::GridSampled { .. } = kernel.body() {
        return Err(FredError::Unsupported(
            "grid-sampled kernels cannot be evaluated off the grid".into(),
        ));
    }
    let (s1, s2) = kernel.shape();
    if eig_samples.len() != rule.len() * s2 {
        return Err(invalid(format!(
            "eigenvector has length {}, expected {}",
            eig_samples.len(),
            rule.len() * s2
        )));
    }
    let mut acc = CVec::zeros(s1);
    for (i, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let block = kernel.eval(y, x)?;
        let sample = eig_samples.rows(i * s2, s2);
        acc += block * sample * Complex64::new(w, 0.0);
    }
    Ok(acc / nu)
}
