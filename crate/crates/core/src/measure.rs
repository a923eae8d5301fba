//! Quadrature rules standing in for the measure μ on Ω ⊂ ℝ.
//!
//! Gauss rules come from the Golub–Welsch construction: the nodes are the
//! eigenvalues of the symmetric tridiagonal Jacobi matrix of the monic
//! orthogonal-polynomial recurrence and the weights are `μ(Ω)·v₀²`, where
//! `v₀` is the first component of each normalized eigenvector.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FredError, Result};

/// Largest rule the dense downstream linear algebra is sized for.
pub const MAX_RULE_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    GaussLegendre { a: f64, b: f64 },
    GaussHermiteProb,
    DiscretePoints,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawRule> for QuadratureRule {
    type Error = FredError;

    fn try_from(raw: RawRule) -> Result<Self> {
        QuadratureRule::new(raw.kind, raw.nodes, raw.weights)
    }
}

impl From<QuadratureRule> for RawRule {
    fn from(rule: QuadratureRule) -> Self {
        RawRule {
            kind: rule.kind,
            nodes: rule.nodes,
            weights: rule.weights,
        }
    }
}

impl QuadratureRule {
    /// Validating constructor: equal non-empty lengths, strictly increasing
    /// finite nodes, positive finite weights.
    pub fn new(kind: RuleKind, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("a quadrature rule needs at least one node"));
        }
        if nodes.len() != weights.len() {
            return Err(invalid(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.len() > MAX_RULE_SIZE {
            return Err(invalid(format!(
                "rule size {} exceeds the cap {MAX_RULE_SIZE}",
                nodes.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid(format!("weights must be positive, got {w}")));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("nodes must be finite"));
        }
        if let Some(pair) = nodes.windows(2).find(|p| p[1] <= p[0]) {
            return Err(invalid(format!(
                "nodes must be distinct and strictly increasing ({} then {})",
                pair[0], pair[1]
            )));
        }
        Ok(QuadratureRule { kind, nodes, weights })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// μ(Ω) as implied by the rule kind.
    pub fn total_mass(&self) -> f64 {
        match self.kind {
            RuleKind::GaussLegendre { a, b } => b - a,
            RuleKind::GaussHermiteProb => 1.0,
            RuleKind::DiscretePoints | RuleKind::Custom => self.weights.iter().sum(),
        }
    }

    /// Weights repeated `block` times each, matching node-major flattening of
    /// `block`-vector valued functions.
    pub fn block_weights(&self, block: usize) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|w| std::iter::repeat_n(*w, block))
            .collect()
    }

    /// Position of `x` among the nodes, compared exactly.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|n| *n == x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("rule size must be at least 1"));
    }
    if n > MAX_RULE_SIZE {
        return Err(invalid(format!("rule size {n} exceeds the cap {MAX_RULE_SIZE}")));
    }
    Ok(())
}

/// Nodes and weights (normalized to total mass 1) of the Gauss rule for a
/// symmetric weight whose Jacobi matrix has zero diagonal and the given
/// off-diagonal entries. The result is symmetrized about 0.
fn golub_welsch_symmetric(n: usize, offdiag: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = offdiag(k);
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in &mut pairs {
        if let Some((x, w)) = christoffel_refine(n, pair.0, &offdiag) {
            *pair = (x, w);
        }
    }

    // Mirror pairs so the rule is exactly symmetric about the origin.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let j = n - 1 - i;
        nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
        weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (nodes, weights)
}

/// One Newton step on `p_n` followed by the Christoffel weight
/// `1 / Σ_{k<n} p_k(x)²`, both from the orthonormal recurrence. The values are
/// rescaled as they grow; `None` when the weight underflows.
fn christoffel_refine(n: usize, x0: f64, offdiag: &impl Fn(usize) -> f64) -> Option<(f64, f64)> {
    const BIG: f64 = 1e100;
    let eval = |x: f64| {
        // (p_{k-1}, p_k), derivatives, Σ p_j² for j < k, and the rescale count.
        let (mut p0, mut p1, mut d0, mut d1) = (0.0, 1.0, 0.0, 0.0);
        let mut sum = 0.0;
        let mut scales = 0i32;
        for k in 0..n {
            sum += p1 * p1;
            let b_next = offdiag(k + 1);
            let b_prev = if k == 0 { 0.0 } else { offdiag(k) };
            let p2 = (x * p1 - b_prev * p0) / b_next;
            let d2 = (p1 + x * d1 - b_prev * d0) / b_next;
            (p0, p1, d0, d1) = (p1, p2, d1, d2);
            if p0.abs() > BIG || p1.abs() > BIG {
                p0 /= BIG;
                p1 /= BIG;
                d0 /= BIG;
                d1 /= BIG;
                sum /= BIG * BIG;
                scales += 1;
            }
        }
        (p1, d1, sum, scales)
    };
    let (p, d, _, _) = eval(x0);
    let x = if d != 0.0 && p.is_finite() && d.is_finite() {
        x0 - p / d
    } else {
        x0
    };
    let (_, _, sum, scales) = eval(x);
    // w = 1 / (sum · BIG^(2·scales))
    let w = (-(sum.ln()) - 2.0 * scales as f64 * BIG.ln()).exp();
    (w.is_finite() && w > 0.0).then_some((x, w))
}

/// Gauss–Legendre rule with `n` nodes on `[a, b]` (Lebesgue measure).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    check_count(n)?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid(format!("need a < b, got [{a}, {b}]")));
    }
    let (t, w) = golub_welsch_symmetric(n, |k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    });
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes = t.iter().map(|x| mid + half * x).collect();
    let weights = w.iter().map(|w| w * (b - a)).collect();
    QuadratureRule::new(RuleKind::GaussLegendre { a, b }, nodes, weights)
}

/// Gauss–Hermite rule for the standard normal density (probabilists'
/// convention): weights sum to 1 and the rule reproduces `E[Xᵏ]`.
pub fn gauss_hermite_prob(n: usize) -> Result<QuadratureRule> {
    check_count(n)?;
    let (nodes, weights) = golub_welsch_symmetric(n, |k| (k as f64).sqrt());
    QuadratureRule::new(RuleKind::GaussHermiteProb, nodes, weights)
}

/// Atomic measure with the given support points and masses. Points may be
/// given in any order; they are sorted together with their weights.
pub fn discrete_measure(points: &[f64], weights: &[f64]) -> Result<QuadratureRule> {
    if points.len() != weights.len() {
        return Err(invalid(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(p) = pairs.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(invalid(format!("duplicate support point {}", p[0].0)));
    }
    QuadratureRule::new(
        RuleKind::DiscretePoints,
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn legendre_moment(k: u32, a: f64, b: f64) -> f64 {
        (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0)
    }

    fn normal_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            (1..k).step_by(2).map(|j| j as f64).product()
        }
    }

    #[test]
    fn one_point_legendre_is_midpoint() {
        let r = gauss_legendre(1, 0.0, 1.0).unwrap();
        assert_eq!(r.nodes(), &[0.5]);
        assert_relative_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_legendre_nodes() {
        let r = gauss_legendre(2, -1.0, 1.0).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert_relative_eq!(r.nodes()[0], -x, epsilon = 1e-15);
        assert_relative_eq!(r.nodes()[1], x, epsilon = 1e-15);
        assert_relative_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.weights()[1], 1.0, epsilon = 1e-15);
        let r01 = gauss_legendre(2, 0.0, 1.0).unwrap();
        assert_relative_eq!(r01.integrate(|x| x * x), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn small_hermite_rules() {
        let r1 = gauss_hermite_prob(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_eq!(r1.weights(), &[1.0]);

        let r2 = gauss_hermite_prob(2).unwrap();
        assert_relative_eq!(r2.nodes()[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(r2.nodes()[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(r2.weights()[0], 0.5, epsilon = 1e-14);

        let r3 = gauss_hermite_prob(3).unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(r3.nodes()[0], -s3, epsilon = 1e-14);
        assert_eq!(r3.nodes()[1], 0.0);
        assert_relative_eq!(r3.nodes()[2], s3, epsilon = 1e-14);
        assert_relative_eq!(r3.weights()[0], 1.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(r3.weights()[1], 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn discrete_measure_examples() {
        let r = discrete_measure(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(r.total_mass(), 1.0);
        let atom = discrete_measure(&[1.0], &[2.0]).unwrap();
        assert_eq!(atom.integrate(|x| x), 2.0);
        let three = discrete_measure(&[0.0, 0.5, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(three.integrate(|x| x * x), 1.25);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            gauss_legendre(0, 0.0, 1.0),
            Err(FredError::InvalidArgument(_))
        ));
        assert!(matches!(
            gauss_legendre(3, 1.0, 1.0),
            Err(FredError::InvalidArgument(_))
        ));
        assert!(matches!(
            gauss_legendre(3, 2.0, 1.0),
            Err(FredError::InvalidArgument(_))
        ));
        assert!(matches!(
            gauss_hermite_prob(0),
            Err(FredError::InvalidArgument(_))
        ));
        assert!(gauss_hermite_prob(MAX_RULE_SIZE + 1).is_err());
        assert!(discrete_measure(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(discrete_measure(&[0.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(discrete_measure(&[0.0, 1.0], &[1.0, -2.0]).is_err());
        assert!(discrete_measure(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn legendre_mass_and_moments() {
        for &n in &[1usize, 2, 3, 5, 8, 13, 20] {
            for &(a, b) in &[(0.0, 1.0), (-1.0, 1.0), (-2.0, 3.5)] {
                let r = gauss_legendre(n, a, b).unwrap();
                assert_relative_eq!(r.weights().iter().sum::<f64>(), b - a, max_relative = 1e-14);
                assert_relative_eq!(r.integrate(|_| 1.0), r.total_mass(), max_relative = 1e-12);
                for k in 0..(2 * n as u32) {
                    let exact = legendre_moment(k, a, b);
                    let got = r.integrate(|x| x.powi(k as i32));
                    let scale = exact.abs().max(legendre_moment(k, 0.0, a.abs().max(b.abs())));
                    assert!(
                        (got - exact).abs() <= 1e-11 * scale,
                        "n={n} k={k} [{a},{b}] got {got} exact {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn hermite_mass_and_moments() {
        for &n in &[1usize, 2, 3, 4, 7, 10, 16] {
            let r = gauss_hermite_prob(n).unwrap();
            assert_relative_eq!(r.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-12);
            if n >= 2 {
                assert_relative_eq!(r.integrate(|x| x * x), 1.0, max_relative = 1e-12);
            }
            for k in 0..(2 * n as u32) {
                let exact = normal_moment(k);
                let got = r.integrate(|x| x.powi(k as i32));
                // odd moments vanish; compare against the even moment scale
                let scale = normal_moment(k + (k % 2)).max(1.0);
                assert!((got - exact).abs() <= 1e-11 * scale, "n={n} k={k} got {got}");
            }
        }
    }

    #[test]
    fn symmetric_node_sets() {
        for n in [2usize, 5, 40, 101] {
            for r in [
                gauss_hermite_prob(n).unwrap(),
                gauss_legendre(n, -1.0, 1.0).unwrap(),
            ] {
                for i in 0..n {
                    assert!((r.nodes()[i] + r.nodes()[n - 1 - i]).abs() <= 1e-13);
                    assert!(
                        (r.weights()[i] - r.weights()[n - 1 - i]).abs()
                            <= 1e-13 * r.weights()[i].max(1e-300) + 1e-300
                    );
                }
            }
            let r = gauss_legendre(n, 2.0, 6.0).unwrap();
            for i in 0..n {
                assert!((r.nodes()[i] - 4.0 + r.nodes()[n - 1 - i] - 4.0).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn large_rules_stay_valid() {
        let r = gauss_legendre(MAX_RULE_SIZE, 0.0, 1.0).unwrap();
        assert_relative_eq!(r.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-13);
        let h = gauss_hermite_prob(200).unwrap();
        assert_relative_eq!(h.integrate(|x| x * x), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let r = gauss_legendre(4, 0.0, 2.0).unwrap();
        let s = r.to_json().unwrap();
        assert!(s.contains("\"kind\""));
        assert!(s.contains("\"nodes\""));
        assert!(s.contains("\"weights\""));
        assert_eq!(QuadratureRule::from_json(&s).unwrap(), r);
        let bad = r#"{"kind":"custom","nodes":[0.0,1.0],"weights":[1.0,-1.0]}"#;
        assert!(QuadratureRule::from_json(bad).is_err());
        let custom = r#"{"kind":"custom","nodes":[0.0,1.0],"weights":[1.0,3.0]}"#;
        assert_eq!(QuadratureRule::from_json(custom).unwrap().total_mass(), 4.0);
    }
}
