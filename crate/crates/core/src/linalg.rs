//! Dense complex linear-algebra helpers shared by the decomposition modules.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{FredError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Discrete `∫ u* v dμ`: `Σ wᵢ conj(uᵢ) vᵢ`.
pub fn weighted_inner(weights: &[f64], u: &CVec, v: &CVec) -> Complex64 {
    debug_assert_eq!(weights.len(), u.len());
    debug_assert_eq!(weights.len(), v.len());
    weights
        .iter()
        .zip(u.iter().zip(v.iter()))
        .map(|(w, (a, b))| a.conj() * b * *w)
        .sum()
}

pub fn weighted_norm(weights: &[f64], u: &CVec) -> f64 {
    weighted_inner(weights, u, u).re.max(0.0).sqrt()
}

/// Discrete L²(μ×μ) norm of kernel samples: `‖W½ M W½‖_F`.
pub fn weighted_fro(m: &CMat, row_weights: &[f64], col_weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += row_weights[i] * col_weights[j] * m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd_sorted(m).1[0]
}

/// `‖M − M*‖_F / ‖M‖_F` (0 for the zero matrix).
pub fn hermitian_defect(m: &CMat) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / scale
}

/// Phase angle in (−π, π], with negative reals mapped to π.
pub fn phase(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI + 1e-12 {
        std::f64::consts::PI
    } else {
        a
    }
}

/// Index order: descending modulus, ties (relative 1e-10) by descending phase.
pub fn spectral_order(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let lead = values[idx[start]].norm();
        let mut end = start + 1;
        while end < idx.len() && (lead - values[idx[end]].norm()) <= 1e-10 * lead.max(f64::MIN_POSITIVE) {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| phase(values[b]).total_cmp(&phase(values[a])));
        out.extend(group);
        start = end;
    }
    out
}

/// Unit-modulus factor that rotates the largest-modulus component of `v`
/// onto the positive real axis. Near-ties resolve to the last index.
pub fn anchor_factor(v: &CVec) -> Complex64 {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return ONE;
    }
    let k = v
        .iter()
        .rposition(|z| z.norm() >= (1.0 - 1e-8) * max)
        .unwrap_or(0);
    v[k].conj() / v[k].norm()
}

/// Groups values by single linkage under `linked`. Returns one label per
/// value; labels are dense and numbered in order of first appearance.
pub fn single_linkage<F>(values: &[Complex64], linked: F) -> Vec<usize>
where
    F: Fn(Complex64, Complex64) -> bool,
{
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if linked(values[i], values[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut remap = std::collections::HashMap::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = remap.len();
            *remap.entry(root).or_insert(next)
        })
        .collect()
}

/// Complex Schur form `M = Z T Z*` with `T` upper triangular.
pub fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    if m.iter().all(|z| *z == ZERO) {
        return Ok((CMat::identity(n, n), CMat::zeros(n, n)));
    }
    // deflating at exactly ε stalls on some defective inputs; 16ε does not
    let s = [16.0, 64.0, 256.0]
        .iter()
        .find_map(|k| Schur::try_new(m.clone(), k * f64::EPSILON, 100 * n.max(10)))
        .ok_or_else(|| FredError::Convergence("complex Schur iteration".into()))?;
    let (z, mut t) = s.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = ZERO;
        }
    }
    Ok((z, t))
}

/// Eigenvalues of `m` after a Parlett–Reinsch diagonal balancing, which
/// depends only on the moduli of the entries.
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let mut moduli = DMatrix::<f64>::from_fn(n, n, |i, j| m[(i, j)].norm());
    let d = balance_parlett_reinsch(&mut moduli);
    let balanced = CMat::from_fn(n, n, |i, j| m[(i, j)] * (d[j] / d[i]));
    let (_, t) = schur(&balanced)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Decouples the clusters of an upper-triangular `T`.
///
/// Returns unit upper-triangular `Y` and upper-triangular `D` with
/// `T Y = Y D`, where `D[i, j] = 0` whenever `labels[i] != labels[j]`.
/// Entries of `Y` coupling indices of the same cluster are zero.
pub fn decouple_clusters(t: &CMat, labels: &[usize]) -> (CMat, CMat) {
    let n = t.nrows();
    let mut y = CMat::identity(n, n);
    let mut d = CMat::zeros(n, n);
    for j in 0..n {
        d[(j, j)] = t[(j, j)];
        for i in (0..j).rev() {
            let mut ty = ZERO;
            for k in (i + 1)..=j {
                ty += t[(i, k)] * y[(k, j)];
            }
            let mut yd = ZERO;
            for k in (i + 1)..j {
                yd += y[(i, k)] * d[(k, j)];
            }
            if labels[i] == labels[j] {
                d[(i, j)] = ty - yd;
            } else {
                y[(i, j)] = (yd - ty) / (t[(i, i)] - d[(j, j)]);
            }
        }
    }
    (y, d)
}

/// Orthonormal basis of the column span via modified Gram–Schmidt with one
/// reorthogonalization pass. Columns that vanish below `tol·max‖col‖`
/// are dropped.
pub fn orthonormal_columns(m: &CMat, tol: f64) -> CMat {
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut basis: Vec<CVec> = Vec::new();
    for col in m.column_iter() {
        let mut v: CVec = col.into_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let nv = v.norm();
        if nv > tol * scale && nv > 0.0 {
            basis.push(v / re(nv));
        }
    }
    if basis.is_empty() {
        return CMat::zeros(m.nrows(), 0);
    }
    CMat::from_columns(&basis)
}

/// SVD with singular values in non-increasing order. Returns
/// `(U, σ, V)` with `M = U diag(σ) V*`; the matrices are thin.
///
/// The bidiagonal QR SVD of nalgebra occasionally returns inconsistent
/// factors for rank-deficient complex input, so every result is checked and
/// recomputed by one-sided Jacobi when the check fails.
pub fn svd_sorted(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (r, cols) = m.shape();
    let k = r.min(cols);
    if k == 0 {
        return (CMat::zeros(r, 0), vec![], CMat::zeros(cols, 0));
    }
    if let Some(mut s) = m.clone().try_svd(true, true, f64::EPSILON, 0) {
        s.sort_by_singular_values();
        let u = s.u.expect("requested U");
        let v = s.v_t.expect("requested Vᵀ").adjoint();
        let sigma: Vec<f64> = s.singular_values.iter().copied().collect();
        if svd_is_consistent(m, &u, &sigma, &v) {
            return (u, sigma, v);
        }
    }
    if r >= cols {
        jacobi_svd(m)
    } else {
        let (u, s, v) = jacobi_svd(&m.adjoint());
        (v, s, u)
    }
}

fn svd_is_consistent(m: &CMat, u: &CMat, s: &[f64], v: &CMat) -> bool {
    let k = s.len();
    let tol = 1e3 * f64::EPSILON * (k as f64).max(1.0);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut us = u.clone();
    for (j, sj) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(*sj);
    }
    let rec = (us * v.adjoint() - m).norm() / scale;
    let eye = CMat::identity(k, k);
    rec <= tol
        && (u.adjoint() * u - &eye).norm() <= tol
        && (v.adjoint() * v - &eye).norm() <= tol
        && s.iter().all(|x| x.is_finite())
}

/// One-sided (Hestenes) Jacobi SVD of a matrix with at least as many rows
/// as columns.
fn jacobi_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, n) = m.shape();
    let mut g = m.clone();
    let mut v = CMat::identity(n, n);
    let tol = f64::EPSILON * (rows as f64).sqrt();
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dotc(&g.column(j));
                let mag = gamma.norm();
                if mag == 0.0 || mag <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let unit = gamma / mag;
                let zeta = (beta - alpha) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut g, &mut v] {
                    for r in 0..mat.nrows() {
                        let a = mat[(r, i)];
                        let b = mat[(r, j)] * unit.conj();
                        mat[(r, i)] = a * cs - b * sn;
                        mat[(r, j)] = a * sn + b * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = CMat::from_columns(
        &order
            .iter()
            .map(|&j| v.column(j).into_owned())
            .collect::<Vec<_>>(),
    );
    let mut kept: Vec<CVec> = Vec::new();
    for &j in &order {
        if norms[j] > 0.0 {
            kept.push(g.column(j) / re(norms[j]));
        }
    }
    // complete U where columns vanished exactly
    let mut u_cols = kept.clone();
    if u_cols.len() < n {
        let mut pool = kept;
        pool.extend((0..rows).map(|i| {
            let mut e = CVec::zeros(rows);
            e[i] = ONE;
            e
        }));
        let basis = orthonormal_columns(&CMat::from_columns(&pool), 1e-8);
        for j in u_cols.len()..n {
            u_cols.push(basis.column(j).into_owned());
        }
    }
    (CMat::from_columns(&u_cols), sigma, v_sorted)
}

/// Orthonormal basis of the null space of a square matrix: right singular
/// vectors with singular value `≤ tol`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let (_, s, v) = svd_sorted(m);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= tol).collect();
    let cols: Vec<CVec> = keep.iter().map(|&i| v.column(i).into_owned()).collect();
    if cols.is_empty() {
        CMat::zeros(m.ncols(), 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Minimum-norm least-squares solution of `M x = b` with singular values
/// below `tol` treated as zero.
pub fn min_norm_solve(m: &CMat, b: &CVec, tol: f64) -> CVec {
    let (u, s, v) = svd_sorted(m);
    let mut x = CVec::zeros(m.ncols());
    for i in 0..s.len() {
        if s[i] > tol {
            let coeff = u.column(i).dotc(b) / s[i];
            x += v.column(i) * coeff;
        }
    }
    x
}

/// 2-norm condition number from singular values (∞ when singular).
pub fn condition_number(m: &CMat) -> f64 {
    let (_, s, _) = svd_sorted(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// 1-norm (maximum absolute column sum).
pub fn norm1(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `n choose k` in floating point, multiplicative form.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 1..=k {
        acc *= (n - k + i) as f64 / i as f64;
    }
    acc
}

/// Diagonal matrix from a real slice.
pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|&x| re(x))))
}

/// `diag(scale) · M` for a real row scaling.
pub fn scale_rows(m: &CMat, scale: &[f64]) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= re(scale[i]);
    }
    out
}

/// `M · diag(scale)` for a real column scaling.
pub fn scale_cols(m: &CMat, scale: &[f64]) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= re(scale[j]);
    }
    out
}
