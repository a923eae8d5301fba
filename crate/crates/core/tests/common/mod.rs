#![allow(dead_code)]

use fredkit::kernelgallery::{
    defective_kernel, grid_kernel, legendre_basis, mehler_kernel, polynomial, separable_kernel, Kernel,
    ScalarFn,
};
use fredkit::linalg::{c, re, CMat, CVec};
use fredkit::measure::{gauss_hermite_prob, gauss_legendre, QuadratureRule};
use fredkit::nystrom::{discretize, DiscreteOperator};
use num_complex::Complex64;

pub struct Entry {
    pub name: &'static str,
    pub op: DiscreteOperator,
    /// Admits a bi-orthogonal diagonal expansion.
    pub djf: bool,
    /// Exact nonzero eigenvalues, descending modulus.
    pub spectrum: Vec<Complex64>,
}

pub fn mono(k: usize) -> ScalarFn {
    let mut coeffs = vec![0.0; k + 1];
    coeffs[k] = 1.0;
    polynomial(coeffs)
}

pub fn yz() -> Kernel {
    separable_kernel(&[re(1.0)], &[mono(1)], &[mono(1)]).unwrap()
}

pub fn yz2() -> Kernel {
    separable_kernel(&[re(1.0)], &[mono(1)], &[mono(2)]).unwrap()
}

/// `0.5 e₁e₁* + 0.2 e₂(e₂ + 0.4 e₁)*` on [0,1]: eigenvalues 0.5 and 0.2,
/// left and right eigenvectors differ.
pub fn two_term() -> Kernel {
    let e = legendre_basis(2, 0.0, 1.0);
    let (e1, e2) = (e[0].clone(), e[1].clone());
    let mixed: ScalarFn = std::sync::Arc::new(move |z| e2(z) + e1(z) * 0.4);
    separable_kernel(
        &[re(0.5), re(0.2)],
        &[e[0].clone(), e[1].clone()],
        &[e[0].clone(), mixed],
    )
    .unwrap()
}

/// Complex rank-two kernel `0.6i·y·z² + (−0.3+0.1i)·1·z`.
pub fn complex_pair() -> Kernel {
    separable_kernel(
        &[c(0.0, 0.6), c(-0.3, 0.1)],
        &[mono(1), mono(0)],
        &[mono(2), mono(1)],
    )
    .unwrap()
}

pub fn unit() -> QuadratureRule {
    gauss_legendre(8, 0.0, 1.0).unwrap()
}

pub fn hermite40() -> QuadratureRule {
    gauss_hermite_prob(40).unwrap()
}

/// Eigenvalues of the 2×2 matrix `M_{ab} = ν_a ⟨left_a, right_b⟩` that carries
/// the rank-two kernel on `span(rights)`, from the moments on [0,1].
fn complex_pair_spectrum() -> Vec<Complex64> {
    // rights (y, 1), lefts (z², z): ⟨z², y⟩ = 1/4, ⟨z², 1⟩ = 1/3, ⟨z, y⟩ = 1/3, ⟨z, 1⟩ = 1/2
    let nu = [c(0.0, 0.6), c(-0.3, 0.1)];
    let m = [[nu[0] * 0.25, nu[0] / 3.0], [nu[1] / 3.0, nu[1] * 0.5]];
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - det * 4.0).sqrt();
    let mut v = vec![(tr + disc) / 2.0, (tr - disc) / 2.0];
    v.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    v
}

pub fn gallery() -> Vec<Entry> {
    gallery_on(&unit(), &hermite40())
}

/// The gallery with the [0,1] kernels on `unit` and the Gaussian ones on `herm`.
pub fn gallery_on(unit: &QuadratureRule, herm: &QuadratureRule) -> Vec<Entry> {
    let mehler = mehler_kernel(0.5).unwrap();
    let mehler_table = mehler.sample(herm).unwrap();
    let geometric: Vec<Complex64> = (0..30).map(|j| re(0.5f64.powi(j))).collect();
    vec![
        Entry {
            name: "yz",
            op: discretize(&yz(), unit).unwrap(),
            djf: true,
            spectrum: vec![re(1.0 / 3.0)],
        },
        Entry {
            name: "yz2",
            op: discretize(&yz2(), unit).unwrap(),
            djf: true,
            spectrum: vec![re(0.25)],
        },
        Entry {
            name: "two_term",
            op: discretize(&two_term(), unit).unwrap(),
            djf: true,
            spectrum: vec![re(0.5), re(0.2)],
        },
        Entry {
            name: "complex_pair",
            op: discretize(&complex_pair(), unit).unwrap(),
            djf: true,
            spectrum: complex_pair_spectrum(),
        },
        Entry {
            name: "mehler",
            op: discretize(&mehler, herm).unwrap(),
            djf: true,
            spectrum: geometric.clone(),
        },
        Entry {
            name: "mehler_grid",
            op: discretize(&grid_kernel(herm, mehler_table).unwrap(), herm).unwrap(),
            djf: true,
            spectrum: geometric,
        },
        Entry {
            name: "defective",
            op: discretize(
                &defective_kernel(re(0.5), 2, &legendre_basis(2, 0.0, 1.0), unit).unwrap(),
                unit,
            )
            .unwrap(),
            djf: false,
            spectrum: vec![re(0.5), re(0.5)],
        },
    ]
}

pub fn samples(rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> CVec {
    CVec::from_iterator(rule.len(), rule.nodes().iter().map(|&x| re(f(x))))
}

pub fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn max_abs(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kernel samples of the `n`-fold composition of `(𝒩𝒩*)` (left) or `(𝒩*𝒩)`
/// (right), built from dense products of the sample matrix.
pub fn dense_gram(op: &DiscreteOperator, n: u32, left: bool) -> CMat {
    let k = op.k();
    let (g, w) = if left {
        (gram(k, op.weights_in(), true), op.weights_out())
    } else {
        (gram(k, op.weights_out(), false), op.weights_in())
    };
    let mut out = g.clone();
    for _ in 1..n {
        out = &out * scale_rows(&g, w);
    }
    out
}

fn gram(k: &CMat, w: &[f64], left: bool) -> CMat {
    if left {
        scale_cols(k, w) * k.adjoint()
    } else {
        k.adjoint() * scale_rows(k, w)
    }
}

fn scale_cols(m: &CMat, w: &[f64]) -> CMat {
    let mut out = m.clone();
    for (j, wj) in w.iter().enumerate() {
        out.column_mut(j).scale_mut(*wj);
    }
    out
}

fn scale_rows(m: &CMat, w: &[f64]) -> CMat {
    let mut out = m.clone();
    for (i, wi) in w.iter().enumerate() {
        out.row_mut(i).scale_mut(*wi);
    }
    out
}
