//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{dense_gram, gallery, hermite40, max_abs, rel, samples, two_term, unit, yz, yz2};
use fredkit::fredholm::{
    determinant_log_derivative_check, fredholm_determinant, resolvent_kernel, resolvent_solve,
    second_kind_solve_series, DeterminantMethod,
};
use fredkit::jordanforms::{
    jordan_block, jordan_block_power, jordan_decompose, jordan_matrix, lift_to_kernel, JordanBlock,
    DEFAULT_CLUSTER_TOL,
};
use fredkit::kernelgallery::{hermite_he, legendre_basis, mehler_kernel};
use fredkit::linalg::{c, eigenvalues, re, real_diag, scale_cols, weighted_fro, CMat};
use fredkit::nystrom::discretize;
use fredkit::operator_svd::{iterated_gram, operator_svd, svd_truncate, trace_power, Side};
use fredkit::powermethods::{deflate, extract_leading_pair, power_ratio_estimate, sequential_spectrum};
use fredkit::spectral::{
    asymptotic_profile, djf_eig, djf_eig_general, eigenfunction_samples, hermitian_eig, power_approx,
    DEFAULT_CLUSTER_TOL as PROFILE_TOL,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, what: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what)
    }
}

fn mehler_spectrum() -> Outcome {
    let rule = hermite40();
    let op = discretize(&mehler_kernel(0.5).unwrap(), &rule).unwrap();
    let d = hermitian_eig(&op).map_err(|e| e.to_string())?;
    let mut worst_val: f64 = 0.0;
    for j in 0..6 {
        let expect = 0.5f64.powi(j as i32);
        let err = (d.eigenvalues[j] - re(expect)).norm() / expect;
        worst_val = worst_val.max(err);
    }
    check(
        worst_val <= 1e-6,
        format!("eigenvalue relative error {worst_val:.3e}"),
    )?;
    let mut worst_fn: f64 = 0.0;
    for j in 0..=4 {
        let got = eigenfunction_samples(&op, &d, j).map_err(|e| e.to_string())?;
        let norm = (1..=j).map(|k| k as f64).product::<f64>().sqrt();
        let exact = samples(&rule, |x| hermite_he(j, x) / norm);
        let err = max_abs(&(&got - &exact)).min(max_abs(&(&got + &exact)));
        worst_fn = worst_fn.max(err);
    }
    check(
        worst_fn <= 1e-4,
        format!("eigenfunction max error {worst_fn:.3e}"),
    )?;
    Ok(format!(
        "eigenvalues {worst_val:.1e}, eigenfunctions {worst_fn:.1e}"
    ))
}

fn degenerate_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 8, 16] {
        let rule = fredkit::measure::gauss_legendre(n, 0.0, 1.0).unwrap();
        let d = djf_eig(&discretize(&yz(), &rule).unwrap()).map_err(|e| e.to_string())?;
        check(
            d.significant == 1,
            format!("n = {n}: {} nonzero eigenvalues", d.significant),
        )?;
        worst = worst.max((d.eigenvalues[0] - re(1.0 / 3.0)).norm());
    }
    check(worst <= 1e-12, format!("yz eigenvalue error {worst:.3e}"))?;

    let rule = unit();
    let d = djf_eig(&discretize(&yz2(), &rule).unwrap()).map_err(|e| e.to_string())?;
    let nu_err = (d.eigenvalues[0] - re(0.25)).norm();
    let s3 = 3f64.sqrt();
    let p_err = max_abs(&(d.p(0) - samples(&rule, |y| s3 * y)));
    let q_err = max_abs(&(d.q(0) - samples(&rule, |z| 4.0 / s3 * z * z)));
    let pair = nu_err.max(p_err).max(q_err);
    check(
        pair <= 1e-10,
        format!("yz² ν {nu_err:.3e}, p {p_err:.3e}, q {q_err:.3e}"),
    )?;
    Ok(format!("yz {worst:.1e}, yz² pair {pair:.1e}"))
}

/// Random `λ` with `|λ|·|ν₁| ≤ radius` and relative distance at least 5% from
/// every Fredholm eigenvalue.
fn random_lambdas(
    op: &fredkit::nystrom::DiscreteOperator,
    count: usize,
    radius: f64,
    seed: u64,
) -> Vec<Complex64> {
    let spec = eigenvalues(op.b()).unwrap();
    let nu1 = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scale = if nu1 > 0.0 { radius / nu1 } else { radius };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let lam = Complex64::from_polar(
            scale * rng.random_range(0.05..1.0f64),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let far = spec
            .iter()
            .filter(|v| v.norm() > 1e-12 * nu1)
            .all(|v| (lam - v.inv()).norm() >= 0.05 * v.inv().norm());
        if far {
            out.push(lam);
        }
    }
    out
}

fn resolvent_and_series() -> Outcome {
    let rule = unit();
    let op = discretize(&yz(), &rule).unwrap();
    let f = samples(&rule, |y| y);
    let expect = samples(&rule, |y| 1.5 * y);
    let direct = resolvent_solve(&op, re(1.0), &f).map_err(|e| e.to_string())?;
    let d = djf_eig(&op).map_err(|e| e.to_string())?;
    let series = second_kind_solve_series(&d, re(1.0), &f, d.significant).map_err(|e| e.to_string())?;
    let solve_err = max_abs(&(direct.solution - &expect)).max(max_abs(&(series - &expect)));
    check(solve_err <= 1e-10, format!("yz solve error {solve_err:.3e}"))?;

    let mut worst: f64 = 0.0;
    for (idx, e) in gallery().iter().enumerate() {
        for lam in random_lambdas(&e.op, 20, 2.5, 100 + idx as u64) {
            let nl = resolvent_kernel(&e.op, lam).map_err(|x| format!("{}: {x}", e.name))?;
            let target = &nl - e.op.k();
            let scale = nl.norm() + e.op.k().norm();
            let left = (e.op.a() * &nl * lam - &target).norm() / scale;
            let right = (scale_cols(&nl, e.op.weights_in()) * e.op.k() * lam - &target).norm() / scale;
            worst = worst.max(left).max(right);
        }
    }
    check(worst <= 1e-9, format!("resolvent identity residual {worst:.3e}"))?;
    Ok(format!("solves {solve_err:.1e}, identities {worst:.1e}"))
}

fn determinant() -> Outcome {
    let mut worst: f64 = 0.0;
    for (idx, e) in gallery().iter().enumerate() {
        for lam in random_lambdas(&e.op, 20, 0.9, 200 + idx as u64) {
            let a = fredholm_determinant(&e.op, lam, DeterminantMethod::Direct)
                .unwrap()
                .value;
            let b = fredholm_determinant(&e.op, lam, DeterminantMethod::Product)
                .unwrap()
                .value;
            worst = worst.max((a - b).norm() / a.norm().max(b.norm()));
        }
    }
    check(
        worst <= 1e-9,
        format!("Direct vs Product relative gap {worst:.3e}"),
    )?;

    let op = discretize(&yz(), &unit()).unwrap();
    let d = |x: f64| {
        fredholm_determinant(&op, re(x), DeterminantMethod::Direct)
            .unwrap()
            .value
            .re
    };
    let (mut lo, mut hi) = (2.0, 4.0);
    check(
        d(lo) > 0.0 && d(hi) < 0.0,
        "D does not change sign on [2, 4]".into(),
    )?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if d(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let zero_err = (0.5 * (lo + hi) - 3.0).abs();
    check(zero_err <= 1e-10, format!("zero of D at {}", 0.5 * (lo + hi)))?;

    let dev = determinant_log_derivative_check(&op, 0.0, 1.0, 2000).map_err(|e| e.to_string())?;
    check(dev <= 1e-6, format!("log-derivative deviation {dev:.3e}"))?;
    Ok(format!(
        "Direct/Product {worst:.1e}, zero {zero_err:.1e}, log-derivative {dev:.1e}"
    ))
}

fn random_unitary(rng: &mut ChaCha8Rng, s: usize) -> CMat {
    let g = CMat::from_fn(s, s, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    g.qr().q()
}

fn random_blocks(rng: &mut ChaCha8Rng) -> Vec<JordanBlock> {
    let count = rng.random_range(1..=4usize);
    let mut lambdas: Vec<Complex64> = Vec::new();
    while lambdas.len() < count {
        let cand = Complex64::from_polar(
            rng.random_range(0.0..1.0f64).sqrt(),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if lambdas.iter().all(|l| (l - cand).norm() >= 0.25) {
            lambdas.push(cand);
        }
    }
    lambdas
        .into_iter()
        .map(|lambda| JordanBlock {
            lambda,
            size: rng.random_range(1..=3usize),
        })
        .collect()
}

fn jordan_suite() -> Outcome {
    let mut worst_power: f64 = 0.0;
    for lam in [re(0.0), re(0.5), re(2.0), c(0.0, 1.0)] {
        for m in 1..=4 {
            let j = jordan_block(lam, m).unwrap();
            let mut oracle = CMat::identity(m, m);
            for n in 0..=20u64 {
                let got = jordan_block_power(lam, m, n).unwrap();
                let err = if oracle.norm() == 0.0 {
                    got.norm()
                } else {
                    rel(&got, &oracle)
                };
                worst_power = worst_power.max(err);
                oracle = &oracle * &j;
            }
        }
    }
    check(
        worst_power <= 1e-12,
        format!("block power error {worst_power:.3e}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_eig, mut worst_rec): (f64, f64) = (0.0, 0.0);
    for trial in 0..100 {
        let blocks = random_blocks(&mut rng);
        let s: usize = blocks.iter().map(|b| b.size).sum();
        let sigma: Vec<f64> = (0..s).map(|_| 10f64.powf(rng.random_range(0.0..3.0))).collect();
        let sm = random_unitary(&mut rng, s) * real_diag(&sigma) * random_unitary(&mut rng, s).adjoint();
        let n_mat = &sm * jordan_matrix(&blocks).unwrap() * sm.clone().try_inverse().unwrap();
        let jf = jordan_decompose(&n_mat, DEFAULT_CLUSTER_TOL)
            .map_err(|e| format!("trial {trial} ({blocks:?}): {e}"))?;
        let mut expect = blocks.clone();
        let mut got = jf.blocks.clone();
        let key = |b: &JordanBlock| {
            (
                b.size,
                (b.lambda.re * 1e6).round() as i64,
                (b.lambda.im * 1e6).round() as i64,
            )
        };
        expect.sort_by_key(key);
        got.sort_by_key(key);
        check(
            got.len() == expect.len() && got.iter().zip(&expect).all(|(a, b)| a.size == b.size),
            format!("trial {trial}: block structure {got:?} vs {expect:?}"),
        )?;
        for (a, b) in got.iter().zip(&expect) {
            worst_eig = worst_eig.max((a.lambda - b.lambda).norm());
        }
        worst_rec = worst_rec.max(rel(&jf.reconstruct(), &n_mat));
    }
    check(worst_eig <= 1e-8, format!("eigenvalue error {worst_eig:.3e}"))?;
    check(worst_rec <= 1e-8, format!("reconstruction error {worst_rec:.3e}"))?;
    Ok(format!(
        "powers {worst_power:.1e}, eigenvalues {worst_eig:.1e}, reconstruction {worst_rec:.1e}"
    ))
}

fn defective_asymptotics() -> Outcome {
    let rule = unit();
    let k = lift_to_kernel(
        &[JordanBlock {
            lambda: re(0.5),
            size: 2,
        }],
        &legendre_basis(2, 0.0, 1.0),
        &rule,
    )
    .map_err(|e| e.to_string())?;
    let op = discretize(&k, &rule).unwrap();
    let w = rule.weights();
    let ratio = |n: usize| {
        let kn = op.iterated_kernel(n).unwrap();
        weighted_fro(&kn, w, w) / (n as f64 * 0.5f64.powi(n as i32 - 1))
    };
    let (r80, r100) = (ratio(80), ratio(100));
    let spread = (r100 - r80).abs() / r80;
    check(spread < 0.01, format!("ratio moved by {:.3}%", 100.0 * spread))?;
    Ok(format!(
        "ratio {r80:.6} → {r100:.6}, spread {:.3}%",
        100.0 * spread
    ))
}

fn svd_suite() -> Outcome {
    let rule = unit();
    let s = operator_svd(&discretize(&yz2(), &rule).unwrap());
    let theta_err = (s.singular_values[0] - 1.0 / 15f64.sqrt()).abs();
    let tr_err = (trace_power(&s, 0) - 1.0 / 15.0).abs();
    check(
        theta_err <= 1e-12 && tr_err <= 1e-12,
        format!("yz² θ₁ {theta_err:.3e}, trace {tr_err:.3e}"),
    )?;

    let herm = hermite40();
    let mop = discretize(&mehler_kernel(0.5).unwrap(), &herm).unwrap();
    let ms = operator_svd(&mop);
    let mtr = (trace_power(&ms, 0) - 4.0 / 3.0).abs();
    check(mtr <= 1e-5, format!("mehler trace error {mtr:.3e}"))?;

    let mut gram_err: f64 = 0.0;
    for e in gallery() {
        let svd = operator_svd(&e.op);
        for n in 1..=5 {
            for (side, left) in [(Side::Left, true), (Side::Right, false)] {
                let got = iterated_gram(&svd, n, side).unwrap();
                gram_err = gram_err.max(rel(&got, &dense_gram(&e.op, n, left)));
            }
        }
    }
    check(gram_err <= 1e-9, format!("iterated Gram error {gram_err:.3e}"))?;

    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let w = herm.weights();
    for m in 1..=3 {
        let (trunc, tail) = svd_truncate(&ms, m).unwrap();
        for n in 1..=5 {
            let diff =
                iterated_gram(&ms, n, Side::Left).unwrap() - iterated_gram(&trunc, n, Side::Left).unwrap();
            let r = weighted_fro(&diff, w, w) / tail.powi(2 * n as i32);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    check(
        lo >= 0.1 && hi <= 10.0,
        format!("truncation ratio in [{lo:.3}, {hi:.3}]"),
    )?;
    Ok(format!(
        "θ₁ {theta_err:.1e}, traces {tr_err:.1e}/{mtr:.1e}, Gram {gram_err:.1e}, truncation ratio [{lo:.3}, {hi:.3}]"
    ))
}

fn power_methods() -> Outcome {
    let rule = unit();
    let op = discretize(&yz(), &rule).unwrap();
    let t = power_ratio_estimate(&op, &samples(&rule, |_| 1.0), 50, 1e-12).map_err(|e| e.to_string())?;
    let yz_err = (t.estimate - re(1.0 / 3.0)).norm();
    check(
        t.converged && t.iterations_used <= 3 && yz_err <= 1e-10,
        format!(
            "yz: converged {} after {} steps, error {yz_err:.3e}",
            t.converged, t.iterations_used
        ),
    )?;

    let mop = discretize(&mehler_kernel(0.5).unwrap(), &hermite40()).unwrap();
    let seq = sequential_spectrum(&mop, 3, 500, 1e-13).map_err(|e| e.to_string())?;
    check(
        seq.failure.is_none(),
        format!("sequential failure {:?}", seq.failure),
    )?;
    let seq_err = seq
        .triples
        .iter()
        .zip([1.0, 0.5, 0.25])
        .map(|(t, v)| (t.nu - re(v)).norm() / v)
        .fold(0.0, f64::max);
    check(
        seq_err <= 1e-6,
        format!("sequential spectrum error {seq_err:.3e}"),
    )?;

    let op = discretize(&two_term(), &rule).unwrap();
    let f = fredkit::powermethods::default_start(rule.len());
    let first = power_ratio_estimate(&op, &f, 500, 1e-14).map_err(|e| e.to_string())?;
    let (p, q) = extract_leading_pair(&op, first.estimate, &f, &f, 200).map_err(|e| e.to_string())?;
    let deflated = deflate(&op, first.estimate, &p, &q).map_err(|e| e.to_string())?;
    let before = operator_svd(&op).rank_numerical;
    let after = operator_svd(&deflated).rank_numerical;
    check(
        before == 2 && after == 1,
        format!("numerical rank {before} → {after}"),
    )?;
    let second = power_ratio_estimate(&deflated, &f, 500, 1e-14).map_err(|e| e.to_string())?;
    let second_err = (second.estimate - re(0.2)).norm();
    check(
        second_err <= 1e-10,
        format!("second eigenvalue error {second_err:.3e}"),
    )?;
    Ok(format!(
        "yz {yz_err:.1e} in {} steps, sequential {seq_err:.1e}, rank {before} → {after}, second {second_err:.1e}",
        t.iterations_used
    ))
}

fn asymptotic_power() -> Outcome {
    let mut report = Vec::new();
    for e in gallery().into_iter().filter(|e| e.djf) {
        let d = djf_eig(&e.op).map_err(|x| format!("{}: {x}", e.name))?;
        let prof = asymptotic_profile(&d, PROFILE_TOL).map_err(|x| format!("{}: {x}", e.name))?;
        let w = e.op.weights_out();
        let err = |n: usize| {
            let kn = e.op.iterated_kernel(n).unwrap();
            let (approx, _) = power_approx(&d, &prof, n as u64).unwrap();
            (weighted_fro(&(&kn - approx), w, w), weighted_fro(&kn, w, w))
        };
        let (e5, _) = err(5);
        let c5 = if prof.r0 > 0.0 { e5 / prof.r0.powi(5) } else { 0.0 };
        for n in [10, 20, 40] {
            let (en, kn) = err(n);
            let bound = c5 * prof.r0.powi(n as i32) + 1e-12 * kn;
            check(
                en <= bound,
                format!("{} n = {n}: error {en:.3e} > bound {bound:.3e}", e.name),
            )?;
        }
        report.push(format!("{} c={c5:.2e}", e.name));
    }
    Ok(report.join(", "))
}

fn cross_consistency() -> Outcome {
    let mut gram_err: f64 = 0.0;
    let mut herm_err: f64 = 0.0;
    let mut biorth: f64 = 0.0;
    for e in gallery() {
        let svd = operator_svd(&e.op);
        let op = &e.op;
        let nn = scale_cols(op.k(), op.weights_in()) * op.k().adjoint();
        let mut expect: Vec<f64> = eigenvalues(&scale_cols(&nn, op.weights_out()))
            .unwrap()
            .iter()
            .map(|v| v.re)
            .collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let scale = expect[0].max(1e-300);
        for (t, x) in svd.singular_values.iter().zip(&expect) {
            gram_err = gram_err.max((t * t - x).abs() / scale);
        }

        if e.djf {
            let d = djf_eig(op).map_err(|x| format!("{}: {x}", e.name))?;
            biorth = biorth.max(d.biorth_residual);
            let general = djf_eig_general(op).map_err(|x| format!("{}: {x}", e.name))?;
            biorth = biorth.max(general.biorth_residual);
            if d.hermitian_flag {
                let h = hermitian_eig(op).unwrap();
                let lead = h.eigenvalues[0].norm();
                for j in 0..h.significant {
                    herm_err = herm_err.max((h.eigenvalues[j] - general.eigenvalues[j]).norm() / lead);
                }
            }
        }
    }
    check(gram_err <= 1e-9, format!("θ² vs eig(𝒩𝒩*) {gram_err:.3e}"))?;
    check(herm_err <= 1e-10, format!("djf vs hermitian {herm_err:.3e}"))?;
    check(biorth <= 1e-8, format!("bi-orthogonality residual {biorth:.3e}"))?;
    Ok(format!(
        "θ² {gram_err:.1e}, hermitian {herm_err:.1e}, bi-orthogonality {biorth:.1e}"
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("mehler spectrum", mehler_spectrum),
        ("degenerate exactness", degenerate_exactness),
        ("resolvent and series", resolvent_and_series),
        ("determinant", determinant),
        ("jordan suite", jordan_suite),
        ("defective asymptotics", defective_asymptotics),
        ("svd suite", svd_suite),
        ("power methods", power_methods),
        ("asymptotic power formula", asymptotic_power),
        ("cross-decomposition consistency", cross_consistency),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.2}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}; {secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
