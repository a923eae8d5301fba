//! Jordan blocks, numerical Jordan decomposition with explicit chains, powers
//! through the Jordan form, and the asymptotics of powers with defective
//! leading eigenvalues.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FredError, Result};
use crate::kernelgallery::{jordan_lifted_kernel, Kernel, ScalarFn};
use crate::linalg::{
    anchor_factor, binomial, decouple_clusters, min_norm_solve, null_space, phase, re, schur, single_linkage,
    spectral_norm, spectral_order, CMat, CVec, ONE, ZERO,
};
use crate::measure::QuadratureRule;
use crate::par;

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-7;
/// Largest matrix accepted by [`jordan_decompose`].
pub const MAX_JORDAN_DIM: usize = 64;

const RANK_TOL: f64 = 1e-10;
const CHAIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub lambda: Complex64,
    pub size: usize,
}

impl JordanBlock {
    pub fn new(lambda: Complex64, size: usize) -> Self {
        JordanBlock { lambda, size }
    }
}

/// `J_m(λ) = λ I_m + U_m`.
pub fn jordan_block(lam: Complex64, m: usize) -> Result<CMat> {
    if m == 0 {
        return Err(invalid("Jordan block size must be at least 1"));
    }
    Ok(CMat::from_fn(m, m, |i, j| {
        if i == j {
            lam
        } else if j == i + 1 {
            ONE
        } else {
            ZERO
        }
    }))
}

/// The shift `U_m` (ones on the superdiagonal).
pub fn shift_matrix(m: usize) -> CMat {
    CMat::from_fn(m, m, |i, j| if j == i + 1 { ONE } else { ZERO })
}

/// `J_m(λ)ⁿ = Σₐ C(n, a) λ^{n−a} U_mᵃ`, with `0⁰ = 1`.
pub fn jordan_block_power(lam: Complex64, m: usize, n: u64) -> Result<CMat> {
    if m == 0 {
        return Err(invalid("Jordan block size must be at least 1"));
    }
    let mut out = CMat::zeros(m, m);
    let top = (m as u64 - 1).min(n);
    for a in 0..=top {
        let value = re(binomial(n, a)) * complex_pow(lam, n - a);
        for j in 0..(m - a as usize) {
            out[(j, j + a as usize)] = value;
        }
    }
    Ok(out)
}

fn complex_pow(z: Complex64, n: u64) -> Complex64 {
    let mut base = z;
    let mut e = n;
    let mut acc = ONE;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Block-diagonal `diag(J_{m₁}(λ₁), J_{m₂}(λ₂), …)`.
pub fn jordan_matrix(blocks: &[JordanBlock]) -> Result<CMat> {
    if blocks.is_empty() {
        return Err(invalid("at least one Jordan block is required"));
    }
    let s: usize = blocks.iter().map(|b| b.size).sum();
    let mut out = CMat::zeros(s, s);
    let mut off = 0;
    for b in blocks {
        let j = jordan_block(b.lambda, b.size)?;
        out.view_mut((off, off), (b.size, b.size)).copy_from(&j);
        off += b.size;
    }
    Ok(out)
}

/// `N = P J Q*` with `Q* = P⁻¹`; columns of `P` and `Q` are grouped per block.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanForm {
    pub blocks: Vec<JordanBlock>,
    pub p: CMat,
    pub q: CMat,
    /// Worst chain residual per block.
    pub residuals: Vec<f64>,
}

impl JordanForm {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn j(&self) -> CMat {
        jordan_matrix(&self.blocks).unwrap_or_else(|_| CMat::zeros(0, 0))
    }

    /// First column index of every block.
    pub fn offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                let start = *acc;
                *acc += b.size;
                Some(start)
            })
            .collect()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.p * self.j() * self.q.adjoint()
    }
}

/// Numerical Jordan decomposition of a square matrix of dimension at most 64.
///
/// Eigenvalues from the complex Schur form are grouped by single linkage with
/// radius `δ = cluster_tol^{1/3}·ρ` (`ρ` the spectral radius), which absorbs
/// the `ε^{1/m}` splitting of a defective eigenvalue of block size `m`.
/// Clusters closer than `10δ` are rejected as ambiguous. Within a cluster the
/// block sizes follow from the nullities of powers of `C − μI`, and chains are
/// extended forward by minimum-norm least squares.
pub fn jordan_decompose(n_mat: &CMat, cluster_tol: f64) -> Result<JordanForm> {
    if !n_mat.is_square() || n_mat.is_empty() {
        return Err(invalid("jordan_decompose needs a non-empty square matrix"));
    }
    let s = n_mat.nrows();
    if s > MAX_JORDAN_DIM {
        return Err(invalid(format!(
            "jordan_decompose is limited to dimension {MAX_JORDAN_DIM}, got {s}"
        )));
    }
    if !(cluster_tol > 0.0 && cluster_tol < 1.0) {
        return Err(invalid(format!(
            "cluster_tol must lie in (0, 1), got {cluster_tol}"
        )));
    }
    let norm = spectral_norm(n_mat);
    if norm == 0.0 {
        return Ok(JordanForm {
            blocks: vec![JordanBlock::new(ZERO, 1); s],
            p: CMat::identity(s, s),
            q: CMat::identity(s, s),
            residuals: vec![0.0; s],
        });
    }
    let (z, t) = schur(n_mat)?;
    let values: Vec<Complex64> = (0..s).map(|i| t[(i, i)]).collect();
    let rho = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let delta = (cluster_tol.cbrt() * rho).max(10.0 * f64::EPSILON.sqrt() * norm);
    let labels = single_linkage(&values, |a, b| (a - b).norm() <= delta);
    let clusters = label_groups(&labels);
    check_separation(&values, &clusters, delta)?;

    let (y, _) = decouple_clusters(&t, &labels);
    let x = par::matmul(&z, &y);
    let rank_tol = RANK_TOL * norm;

    let mut blocks = Vec::new();
    let mut chains: Vec<Vec<CVec>> = Vec::new();
    for idx in &clusters {
        let cols: Vec<CVec> = idx.iter().map(|&i| x.column(i).into_owned()).collect();
        let basis = CMat::from_columns(&cols).qr().q();
        let c = basis.adjoint() * n_mat * &basis;
        let m = idx.len();
        let mu = c.trace() / re(m as f64);
        let e = &c - CMat::identity(m, m) * mu;
        for chain in cluster_chains(&e, rank_tol)? {
            blocks.push(JordanBlock::new(mu, chain.len()));
            chains.push(chain.iter().map(|v| &basis * v).collect());
        }
    }

    // deterministic block order: descending |λ| then phase, longer blocks first
    let lambdas: Vec<Complex64> = blocks.iter().map(|b| b.lambda).collect();
    let mut rank_of = vec![0usize; lambdas.len()];
    for (pos, &i) in spectral_order(&lambdas).iter().enumerate() {
        rank_of[i] = pos;
    }
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&a, &b| {
        same_eigenvalue_rank(&lambdas, &rank_of, a)
            .cmp(&same_eigenvalue_rank(&lambdas, &rank_of, b))
            .then(blocks[b].size.cmp(&blocks[a].size))
            .then(a.cmp(&b))
    });

    let mut p = CMat::zeros(s, s);
    let mut sorted_blocks = Vec::with_capacity(blocks.len());
    let mut sorted_chains = Vec::with_capacity(blocks.len());
    let mut col = 0;
    for &i in &order {
        sorted_blocks.push(blocks[i]);
        for v in &chains[i] {
            p.set_column(col, v);
            col += 1;
        }
        sorted_chains.push(chains[i].clone());
    }
    let mut residuals = Vec::with_capacity(sorted_blocks.len());
    let limit = CHAIN_TOL * norm;
    for (b, chain) in sorted_blocks.iter().zip(&sorted_chains) {
        let mut worst: f64 = 0.0;
        for (k, v) in chain.iter().enumerate() {
            let mut r = n_mat * v - v * b.lambda;
            if k > 0 {
                r -= &chain[k - 1];
            }
            worst = worst.max(r.norm() / v.norm().max(1.0));
        }
        if !(worst <= limit) {
            return Err(FredError::IllConditionedChain {
                residual: worst,
                limit,
            });
        }
        residuals.push(worst);
    }
    let inv = p
        .clone()
        .lu()
        .try_inverse()
        .ok_or(FredError::IllConditionedChain {
            residual: f64::INFINITY,
            limit,
        })?;
    Ok(JordanForm {
        blocks: sorted_blocks,
        p,
        q: inv.adjoint(),
        residuals,
    })
}

/// Position of the first block sharing block `i`'s eigenvalue in spectral
/// order, so blocks of one cluster stay adjacent.
fn same_eigenvalue_rank(lambdas: &[Complex64], rank_of: &[usize], i: usize) -> usize {
    (0..lambdas.len())
        .filter(|&k| lambdas[k] == lambdas[i])
        .map(|k| rank_of[k])
        .min()
        .unwrap_or(rank_of[i])
}

fn label_groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    (0..count)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect()
}

fn check_separation(values: &[Complex64], clusters: &[Vec<usize>], delta: f64) -> Result<()> {
    for a in 0..clusters.len() {
        for b in (a + 1)..clusters.len() {
            let gap = clusters[a]
                .iter()
                .flat_map(|&i| clusters[b].iter().map(move |&j| (values[i] - values[j]).norm()))
                .fold(f64::INFINITY, f64::min);
            if gap <= 10.0 * delta {
                return Err(FredError::Clustering(format!(
                    "eigenvalue groups near {} and {} are {gap:.3e} apart, within 10x the cluster radius {delta:.3e}",
                    values[clusters[a][0]], values[clusters[b][0]]
                )));
            }
        }
    }
    Ok(())
}

/// Chains of the nearly nilpotent `e`, in cluster coordinates. Each chain is
/// ordered head first: `e·c₁ ≈ 0`, `e·c_{k+1} = c_k`.
fn cluster_chains(e: &CMat, tol: f64) -> Result<Vec<Vec<CVec>>> {
    let m = e.nrows();
    // staircase: kernels[k] is an orthonormal basis of null(eᵏ⁺¹)
    let mut kernels: Vec<CMat> = Vec::new();
    let mut prev = CMat::zeros(m, 0);
    while prev.ncols() < m {
        let proj = CMat::identity(m, m) - &prev * prev.adjoint();
        let next = null_space(&(proj * e), tol);
        if next.ncols() <= prev.ncols() {
            return Err(FredError::IllConditionedChain {
                residual: smallest_singular(e),
                limit: tol,
            });
        }
        kernels.push(next.clone());
        prev = next;
    }
    let dims: Vec<usize> = kernels.iter().map(|k| k.ncols()).collect();
    let mut counts = Vec::with_capacity(dims.len());
    for (k, &d) in dims.iter().enumerate() {
        counts.push(d - if k == 0 { 0 } else { dims[k - 1] });
    }
    if counts.windows(2).any(|w| w[1] > w[0]) {
        return Err(FredError::IllConditionedChain {
            residual: smallest_singular(e),
            limit: tol,
        });
    }

    let levels = counts.len();
    let mut chains: Vec<Vec<CVec>> = Vec::new();
    // tops: (level, top vector) for every chain already seeded
    let mut tops: Vec<(usize, CVec)> = Vec::new();
    for level in (1..=levels).rev() {
        let exact = counts[level - 1] - counts.get(level).copied().unwrap_or(0);
        if exact == 0 {
            continue;
        }
        let inner = if level >= 2 {
            kernels[level - 2].clone()
        } else {
            CMat::zeros(m, 0)
        };
        let outer = &kernels[level - 1];
        // complement of null(e^{level−1}) inside null(e^{level})
        let comp = complement(outer, &inner);
        // images at this level of longer chains, in complement coordinates
        let mut taken: Vec<CVec> = Vec::new();
        for (l, top) in &tops {
            let mut v = top.clone();
            for _ in 0..(l - level) {
                v = e * v;
            }
            taken.push(comp.adjoint() * v);
        }
        let coords = if taken.is_empty() {
            CMat::identity(comp.ncols(), comp.ncols())
        } else {
            let span = CMat::from_columns(&taken);
            complement(&CMat::identity(comp.ncols(), comp.ncols()), &span.qr().q())
        };
        if coords.ncols() < exact {
            return Err(FredError::IllConditionedChain {
                residual: smallest_singular(e),
                limit: tol,
            });
        }
        for j in 0..exact {
            let top = &comp * coords.column(j);
            tops.push((level, top.clone()));
            let mut head = top;
            for _ in 1..level {
                head = e * head;
            }
            let head_norm = head.norm();
            if head_norm == 0.0 {
                return Err(FredError::IllConditionedChain {
                    residual: 0.0,
                    limit: tol,
                });
            }
            head /= re(head_norm);
            let anchor = anchor_factor(&head);
            head *= anchor;
            let mut chain = vec![head];
            for _ in 1..level {
                let next = min_norm_solve(e, chain.last().unwrap(), tol);
                chain.push(next);
            }
            chains.push(chain);
        }
    }
    Ok(chains)
}

/// Orthonormal basis of `span(outer) ⊖ span(inner)`; `inner ⊆ outer`, both
/// orthonormal.
fn complement(outer: &CMat, inner: &CMat) -> CMat {
    let m = outer.nrows();
    let target = outer.ncols() - inner.ncols();
    if target == 0 {
        return CMat::zeros(m, 0);
    }
    let proj = outer - inner * (inner.adjoint() * outer);
    let (u, _, _) = crate::linalg::svd_sorted(&proj);
    u.columns(0, target).into_owned()
}

fn smallest_singular(e: &CMat) -> f64 {
    let (_, s, _) = crate::linalg::svd_sorted(e);
    s.last().copied().unwrap_or(0.0)
}

/// `Nⁿ = P Jⁿ Q*`, block by block.
pub fn matrix_power_via_jordan(jf: &JordanForm, n: u64) -> CMat {
    let s = jf.dim();
    let mut jn = CMat::zeros(s, s);
    for (b, off) in jf.blocks.iter().zip(jf.offsets()) {
        let block = jordan_block_power(b.lambda, b.size, n).expect("block sizes are positive");
        jn.view_mut((off, off), (b.size, b.size)).copy_from(&block);
    }
    &jf.p * jn * jf.q.adjoint()
}

/// Leading behaviour `Nⁿ ≈ C(n, M−1) r₁^{n−M+1} Dₙ` with
/// `Dₙ = Σ_c e^{i(n−M+1)θ_c} P_c U_M^{M−1} Q_c*` over the top-modulus blocks
/// of maximal size `M`. Returns `(Dₙ, C(n, M−1) r₁^{n−M+1})`.
pub fn defective_asymptotic(jf: &JordanForm, n: u64) -> Result<(CMat, f64)> {
    let r1 = jf.blocks.iter().map(|b| b.lambda.norm()).fold(0.0, f64::max);
    if r1 == 0.0 {
        return Err(FredError::UnsupportedProfile(
            "all eigenvalues are zero, so no block dominates".into(),
        ));
    }
    let top: Vec<usize> = (0..jf.blocks.len())
        .filter(|&i| jf.blocks[i].lambda.norm() >= (1.0 - 1e-8) * r1)
        .collect();
    let big_m = top.iter().map(|&i| jf.blocks[i].size).max().unwrap_or(1);
    let offsets = jf.offsets();
    let s = jf.dim();
    let mut d = CMat::zeros(s, s);
    let shift = n as f64 - (big_m as f64 - 1.0);
    for &i in &top {
        let b = jf.blocks[i];
        if b.size != big_m {
            continue;
        }
        let head = jf.p.column(offsets[i]);
        let tail = jf.q.column(offsets[i] + big_m - 1);
        let rot = Complex64::from_polar(1.0, phase(b.lambda) * shift);
        d += head * tail.adjoint() * rot;
    }
    let envelope = if (n as usize) + 1 < big_m {
        0.0
    } else {
        binomial(n, big_m as u64 - 1) * r1.powf(shift)
    };
    Ok((d, envelope))
}

/// Finite-rank kernel with Jordan structure `blocks` on the span of an
/// orthonormal `basis`, zero on its complement.
pub fn lift_to_kernel(blocks: &[JordanBlock], basis: &[ScalarFn], rule: &QuadratureRule) -> Result<Kernel> {
    let total: usize = blocks.iter().map(|b| b.size).sum();
    if basis.len() != total {
        return Err(invalid(format!(
            "blocks need {total} basis functions, got {}",
            basis.len()
        )));
    }
    jordan_lifted_kernel(blocks, basis, rule)
}
