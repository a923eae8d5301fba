//! Singular value decomposition of a discretized operator,
//! `N(y,z) = Σⱼ θⱼ pⱼ(y) qⱼ(z)*`, with iterated Gram-operator identities and
//! trace-power sums.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{anchor_factor, re, scale_cols, svd_sorted, weighted_inner, CMat, CVec};
use crate::nystrom::DiscreteOperator;
use crate::par;

/// Relative cutoff below which singular triples are noise.
pub const RANK_CUTOFF: f64 = 1e-12;
/// Triples with `θⱼ > REFINE_CUTOFF·θ₁` get Nyström-refined samples.
pub const REFINE_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `𝒩𝒩*`, acting on the `p` side.
    Left,
    /// `𝒩*𝒩`, acting on the `q` side.
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSVD {
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `pⱼ` node samples, orthonormal in the output weights.
    pub left: CMat,
    /// `qⱼ` node samples, orthonormal in the input weights.
    pub right: CMat,
    pub shape: (usize, usize),
    /// `#{θⱼ > RANK_CUTOFF·θ₁}`.
    pub rank_numerical: usize,
    pub weights_out: Vec<f64>,
    pub weights_in: Vec<f64>,
    /// `θⱼpⱼ = 𝒩qⱼ` and `θⱼqⱼ = 𝒩*pⱼ`, accurate at every node for every `j`.
    scaled_left: CMat,
    scaled_right: CMat,
}

impl OperatorSVD {
    pub fn p(&self, j: usize) -> CVec {
        self.left.column(j).into_owned()
    }

    pub fn q(&self, j: usize) -> CVec {
        self.right.column(j).into_owned()
    }

    fn side(&self, side: Side) -> (&CMat, &CMat, &[f64]) {
        match side {
            Side::Left => (&self.left, &self.scaled_left, &self.weights_out),
            Side::Right => (&self.right, &self.scaled_right, &self.weights_in),
        }
    }

    /// `Σ_{j<rank} θⱼ pⱼ qⱼ*`.
    pub fn reconstruct(&self) -> CMat {
        let mut out = CMat::zeros(self.left.nrows(), self.right.nrows());
        for j in 0..self.rank_numerical {
            out += self.left.column(j) * self.right.column(j).adjoint() * re(self.singular_values[j]);
        }
        out
    }
}

/// SVD of `B = W½ K W½`, mapped back to node samples by `W^{-½}`.
///
/// Samples at nodes with tiny weight carry roundoff amplified by `wᵢ^{-½}`,
/// so for the leading triples they are recomputed as `pⱼ = 𝒩qⱼ/θⱼ` and
/// `qⱼ = 𝒩*pⱼ/θⱼ`, which leaves the weighted values unchanged.
pub fn operator_svd(op: &DiscreteOperator) -> OperatorSVD {
    let (u, s, v) = svd_sorted(op.b());
    let w_out = op.weights_out().to_vec();
    let w_in = op.weights_in().to_vec();
    let count = s.len();
    let lead = s.first().copied().unwrap_or(0.0);
    let mut left = CMat::zeros(op.dim_out(), count);
    let mut right = CMat::zeros(op.dim_in(), count);
    let mut scaled_left = CMat::zeros(op.dim_out(), count);
    let mut scaled_right = CMat::zeros(op.dim_in(), count);
    for j in 0..count {
        let mut p = CVec::from_iterator(
            op.dim_out(),
            u.column(j).iter().zip(&w_out).map(|(x, w)| x / w.sqrt()),
        );
        let mut q = CVec::from_iterator(
            op.dim_in(),
            v.column(j).iter().zip(&w_in).map(|(x, w)| x / w.sqrt()),
        );
        let tp = op.apply(&q).expect("dimensions match");
        let tq = op.apply_adjoint(&p).expect("dimensions match");
        if s[j] > REFINE_CUTOFF * lead {
            p = &tp / re(s[j]);
            q = &tq / re(s[j]);
        }
        // the same unit factor on both sides keeps 𝒩q = θp
        let anchor = anchor_factor(&p);
        left.set_column(j, &(p * anchor));
        right.set_column(j, &(q * anchor));
        scaled_left.set_column(j, &(tp * anchor));
        scaled_right.set_column(j, &(tq * anchor));
    }
    let rank_numerical = if lead == 0.0 {
        0
    } else {
        s.iter().filter(|&&x| x > RANK_CUTOFF * lead).count()
    };
    OperatorSVD {
        singular_values: s,
        left,
        right,
        shape: op.shape(),
        rank_numerical,
        weights_out: w_out,
        weights_in: w_in,
        scaled_left,
        scaled_right,
    }
}

fn power_sum(svd: &OperatorSVD, exponent: i32, a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), b.nrows());
    for j in 0..svd.rank_numerical {
        out += a.column(j) * b.column(j).adjoint() * re(svd.singular_values[j].powi(exponent));
    }
    out
}

/// Kernel samples of `(𝒩𝒩*)ⁿ` (left) or `(𝒩*𝒩)ⁿ` (right):
/// `Σ θⱼ²ⁿ pⱼpⱼ*` or `Σ θⱼ²ⁿ qⱼqⱼ*`, summed as `Σ θⱼ²ⁿ⁻² (θⱼpⱼ)(θⱼpⱼ)*`.
pub fn iterated_gram(svd: &OperatorSVD, n: u32, side: Side) -> Result<CMat> {
    if n == 0 {
        return Err(invalid("iterated_gram needs n ≥ 1"));
    }
    let (_, scaled, _) = svd.side(side);
    Ok(power_sum(svd, 2 * n as i32 - 2, scaled, scaled))
}

/// `(𝒩𝒩*)ⁿ N = Σ θⱼ²ⁿ⁺¹ pⱼqⱼ*` (left) or `(𝒩*𝒩)ⁿ N* = Σ θⱼ²ⁿ⁺¹ qⱼpⱼ*` (right).
pub fn iterated_gram_with_kernel(svd: &OperatorSVD, n: u32, side: Side) -> CMat {
    if n == 0 {
        return match side {
            Side::Left => power_sum(svd, 1, &svd.left, &svd.right),
            Side::Right => power_sum(svd, 1, &svd.right, &svd.left),
        };
    }
    let e = 2 * n as i32 - 1;
    match side {
        Side::Left => power_sum(svd, e, &svd.scaled_left, &svd.scaled_right),
        Side::Right => power_sum(svd, e, &svd.scaled_right, &svd.scaled_left),
    }
}

/// `Σ θⱼ²ⁿ pⱼ ⟨pⱼ, f⟩_W` on the chosen side. For `n = 0` this is the
/// projection onto the retained singular subspace.
pub fn gram_apply(svd: &OperatorSVD, n: u32, f: &CVec, side: Side) -> Result<CVec> {
    let (m, _, w) = svd.side(side);
    if f.len() != m.nrows() {
        return Err(invalid(format!(
            "vector has length {}, expected {}",
            f.len(),
            m.nrows()
        )));
    }
    let mut out = CVec::zeros(f.len());
    for j in 0..svd.rank_numerical {
        let col = m.column(j).into_owned();
        let coeff = weighted_inner(w, &col, f) * re(svd.singular_values[j].powi(2 * n as i32));
        out += col * coeff;
    }
    Ok(out)
}

/// `Σⱼ θⱼ²ⁿ⁺²` over the retained triples.
pub fn trace_power(svd: &OperatorSVD, n: u32) -> f64 {
    svd.singular_values[..svd.rank_numerical]
        .iter()
        .map(|t| t.powi(2 * n as i32 + 2))
        .sum()
}

/// The same trace from dense products: `Σᵢ wᵢ [K* W (K W K* W)ⁿ K]ᵢᵢ`.
pub fn trace_power_direct(op: &DiscreteOperator, n: u32) -> f64 {
    let kw_out = scale_cols(&op.k().adjoint(), op.weights_out());
    let gram = scale_cols(&par::matmul(op.a(), &op.k().adjoint()), op.weights_out());
    let mut m = op.k().clone();
    for _ in 0..n {
        m = par::matmul(&gram, &m);
    }
    let full = par::matmul(&kw_out, &m);
    (0..full.nrows())
        .map(|i| op.weights_in()[i] * full[(i, i)].re)
        .sum()
}

/// Keeps the leading `m` triples. Returns the truncated decomposition and
/// the first dropped singular value (0 if none).
pub fn svd_truncate(svd: &OperatorSVD, m: usize) -> Result<(OperatorSVD, f64)> {
    if m == 0 || m > svd.rank_numerical {
        return Err(invalid(format!(
            "kept count must lie in 1..={}, got {m}",
            svd.rank_numerical
        )));
    }
    let tail = svd.singular_values.get(m).copied().unwrap_or(0.0);
    let out = OperatorSVD {
        singular_values: svd.singular_values[..m].to_vec(),
        left: svd.left.columns(0, m).into_owned(),
        right: svd.right.columns(0, m).into_owned(),
        shape: svd.shape,
        rank_numerical: m,
        weights_out: svd.weights_out.clone(),
        weights_in: svd.weights_in.clone(),
        scaled_left: svd.scaled_left.columns(0, m).into_owned(),
        scaled_right: svd.scaled_right.columns(0, m).into_owned(),
    };
    Ok((out, tail))
}
