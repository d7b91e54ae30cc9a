//! Acceptance criteria, one test each. Every test writes a single
//! `[PASS]`/`[FAIL]` line straight to the process stderr (bypassing the test
//! harness capture) and then asserts, so the summary is visible whether or
//! not the criterion holds.
//!
//! The expensive circle grid (n = 500 … 8000, five seeds) is computed once
//! and shared by criteria 2 and 3.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use auglab::augmentation::{eps_from_n, schedule_from, EpsRule, ParamSchedule};
use auglab::consistency::{
    aligned_errors, fit_spectral_rate, realize, run_dumbbell, run_pointwise, run_spectral, DumbbellMode, ErrorSelector,
    RunOptions, SpectralReport, TestFunction,
};
use auglab::continuum::{constants, continuum_spectrum};
use auglab::embedding::{
    eckart_young_minimizer, eckart_young_optimum, factorization_descent, procrustes_distance, run_realizability,
    EmbeddingProblem, TrainOptions,
};
use auglab::graph::{write_graph_binary, AugGraph};
use auglab::linalg::median;
use auglab::manifold::{ManifoldSpec, ProfileCurve};
use auglab::spectral::{courant_fischer_check, dense_eigenpairs, dense_spectrum, graph_eigenpairs, EigenPairs, SolverOptions};
use auglab::rng;
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

// criterion 1
const DUMBBELL_N: usize = 4000;
const DUMBBELL_MIN_ACCURACY: f64 = 0.95;
const DUMBBELL_MIN_GAP: f64 = 0.15;
const DUMBBELL_MAX_SECONDS_PER_SEED: f64 = 300.0;
// criteria 2, 3
const CIRCLE_K: usize = 5;
const MONOTONE_SIZES: [usize; 4] = [500, 1000, 2000, 4000];
const RATE_SIZES: [usize; 5] = [500, 1000, 2000, 4000, 8000];
const SEEDS5: [u64; 5] = [0, 1, 2, 3, 4];
const PILOT_N: usize = 500;
const PILOT_FACTOR: f64 = 2.0;
const RATE_SLOPE_RANGE: (f64, f64) = (-0.45, -0.08);
const RATE_MIN_R2: f64 = 0.7;
const RATE_MAX_SECONDS: f64 = 1800.0;
// criterion 4
const POINTWISE_SIZES: [usize; 2] = [1000, 4000];
// criterion 5
const ORACLE_GRAPHS: u64 = 20;
const ORACLE_MAX_N: usize = 300;
const ORACLE_K: usize = 6;
const ORACLE_VALUE_TOL: f64 = 1e-8;
const ORACLE_ANGLE_TOL: f64 = 1e-6;
// criterion 6
const EY_IDENTITY_TOL: f64 = 1e-8;
const EY_DESCENT_TOL: f64 = 1e-6;
const EY_PROCRUSTES_TOL: f64 = 1e-3;
const EY_GRADIENT_TOL: f64 = 1e-6;
// criterion 7
const REAL_N: usize = 2000;
const REAL_K: usize = 3;
const REAL_DEPTH: usize = 4;
const REAL_WIDTHS: [usize; 3] = [16, 64, 256];
const REAL_SEEDS: [u64; 3] = [0, 1, 2];
const REAL_STEPS: usize = 1500;
const REAL_LR: f64 = 0.05;
const REAL_FRESH: usize = 500;
const REAL_FRESH_FACTOR: f64 = 3.0;
// criterion 8
const MC_SAMPLES: usize = 1_000_000;
const MC_SIGMAS: f64 = 3.0;
// criterion 9
const INVARIANT_MAX_SECONDS: f64 = 120.0;

fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "[{tag}] criterion {id} ({title}): {detail}");
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn circle_sched(n: usize) -> ParamSchedule {
    schedule_from(eps_from_n(n as f64, 1, 1.0, EpsRule::LogFactor), 2.0, 1.0, 2).unwrap()
}

#[test]
fn criterion_1_dumbbell_bottleneck() {
    let opts = RunOptions::default();
    let mut coupled = Vec::new();
    let mut naive = Vec::new();
    let mut slowest: f64 = 0.0;
    for &seed in &SEEDS5 {
        let t = Instant::now();
        coupled.push(run_dumbbell(DUMBBELL_N, DumbbellMode::standard(), seed, &opts).unwrap().accuracy);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        naive.push(run_dumbbell(DUMBBELL_N, DumbbellMode::Naive, seed, &opts).unwrap().accuracy);
    }
    let (mt, mn) = (median(&coupled), median(&naive));
    let pass = mt >= DUMBBELL_MIN_ACCURACY && mt - mn >= DUMBBELL_MIN_GAP && slowest <= DUMBBELL_MAX_SECONDS_PER_SEED;
    verdict(
        1,
        "dumbbell bottleneck",
        pass,
        &format!(
            "median accuracy {mt:.4} (need >= {DUMBBELL_MIN_ACCURACY}), naive {mn:.4}, gap {:.4} (need >= {DUMBBELL_MIN_GAP}); \
             per seed {} vs naive {}; slowest seed {slowest:.1} s",
            mt - mn,
            fmt(&coupled),
            fmt(&naive)
        ),
    );
    assert!(pass);
}

struct CircleGrid {
    reports: Vec<SpectralReport>,
    seconds: Vec<f64>,
}

fn circle_grid() -> &'static CircleGrid {
    static GRID: OnceLock<CircleGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let opts = RunOptions::default();
        let mut reports = Vec::new();
        let mut seconds = Vec::new();
        for &n in &RATE_SIZES {
            let t = Instant::now();
            reports.push(run_spectral(&spec, &circle_sched(n), n, CIRCLE_K, &SEEDS5, &opts).unwrap());
            seconds.push(t.elapsed().as_secs_f64());
        }
        CircleGrid { reports, seconds }
    })
}

/// Medians over seeds of the relative eigenvalue errors and aligned
/// eigenvector errors at `n`, computed with the dense eigendecomposition and
/// the closed-form circle spectrum.
fn dense_pilot(n: usize) -> (Vec<f64>, Vec<f64>) {
    let spec = ManifoldSpec::circle(1.0).unwrap();
    let cont = continuum_spectrum(&spec, CIRCLE_K).unwrap();
    let ab = constants(1).unwrap().alpha_beta();
    let mut vals = vec![Vec::new(); CIRCLE_K];
    let mut vecs = vec![Vec::new(); CIRCLE_K];
    for &seed in &SEEDS5 {
        let real = realize(&spec, &circle_sched(n), n, 1, seed).unwrap();
        let pairs = dense_eigenpairs(&real.graph, CIRCLE_K).unwrap();
        let reference: Vec<Vec<f64>> = cont
            .eigenfunctions
            .iter()
            .map(|f| {
                let v: Vec<f64> = real.projections().rows().map(|q| spec.eval_field(&**f, q)).collect();
                let nrm = (v.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
                v.iter().map(|x| x / nrm).collect()
            })
            .collect();
        let errs = aligned_errors(&pairs, &reference, &cont.clusters).unwrap();
        for l in 1..CIRCLE_K {
            vals[l].push((cont.values[l] - ab * pairs.values[l]).abs() / cont.values[l]);
            vecs[l].push(errs[l]);
        }
    }
    let med = |v: &Vec<Vec<f64>>| (0..CIRCLE_K).map(|l| if l == 0 { 0.0 } else { median(&v[l]) }).collect();
    (med(&vals), med(&vecs))
}

#[test]
fn criterion_2_circle_spectral_consistency() {
    let grid = circle_grid();
    let reports = &grid.reports[..MONOTONE_SIZES.len()];
    assert!(reports.iter().zip(MONOTONE_SIZES).all(|(r, n)| r.n == n));
    let series = |pick: &dyn Fn(&SpectralReport) -> f64| reports.iter().map(pick).collect::<Vec<f64>>();
    let val2 = series(&|r| r.eigval_errors[1]);
    let val3 = series(&|r| r.eigval_errors[2]);
    let vec2 = series(&|r| r.eigvec_errors[1]);
    let vec3 = series(&|r| r.eigvec_errors[2]);
    let vals_ok = strictly_decreasing(&val2) && strictly_decreasing(&val3);
    let vecs_ok = strictly_decreasing(&vec2) && strictly_decreasing(&vec3);

    // pre-registered threshold: pilot error carried to n = 4000 at the O(ε) rate
    let (pv, pe) = dense_pilot(PILOT_N);
    let last = reports.last().unwrap();
    let shrink = last.eps / circle_sched(PILOT_N).eps;
    let mut threshold_ok = true;
    let mut thresholds = Vec::new();
    for (name, pilot, measured) in [
        ("val2", pv[1], last.eigval_errors[1]),
        ("val3", pv[2], last.eigval_errors[2]),
        ("vec2", pe[1], last.eigvec_errors[1]),
        ("vec3", pe[2], last.eigvec_errors[2]),
    ] {
        let limit = PILOT_FACTOR * pilot * shrink;
        threshold_ok &= measured <= limit;
        thresholds.push(format!("{name} {measured:.4} <= {limit:.4}"));
    }
    // the Lanczos pipeline at the pilot size agrees with the dense oracle
    let lanczos_gap = (1..3)
        .map(|l| (grid.reports[0].eigval_errors[l] - pv[l]).abs().max((grid.reports[0].eigvec_errors[l] - pe[l]).abs()))
        .fold(0.0, f64::max);

    let pass = vals_ok && vecs_ok && threshold_ok;
    verdict(
        2,
        "circle spectral consistency",
        pass,
        &format!(
            "n = {MONOTONE_SIZES:?}; eigenvalue errors l=2 {} l=3 {} (strictly decreasing: {vals_ok}); \
             eigenvector errors l=2 {} l=3 {} (strictly decreasing: {vecs_ok}); \
             n=4000 vs 2x pilot extrapolation: {} ({threshold_ok}); Lanczos vs dense at n={PILOT_N}: {lanczos_gap:.1e}; \
             ratio αβλ̂/λ for l=2: {}",
            fmt(&val2),
            fmt(&val3),
            fmt(&vec2),
            fmt(&vec3),
            thresholds.join(", "),
            fmt(&series(&|r| r.eigval_ratios[0])),
        ),
    );
    assert!(lanczos_gap < 1e-6, "solver routes disagree at the pilot size");
    assert!(pass);
}

#[test]
fn criterion_3_rate_fit() {
    let grid = circle_grid();
    let fit = fit_spectral_rate(&grid.reports, ErrorSelector::EigvecRms(2, 3)).unwrap();
    let l2 = fit_spectral_rate(&grid.reports, ErrorSelector::Eigvec(2)).unwrap();
    let l3 = fit_spectral_rate(&grid.reports, ErrorSelector::Eigvec(3)).unwrap();
    let total: f64 = grid.seconds.iter().sum();
    let pass = fit.slope >= RATE_SLOPE_RANGE.0
        && fit.slope <= RATE_SLOPE_RANGE.1
        && fit.r2 >= RATE_MIN_R2
        && total <= RATE_MAX_SECONDS;
    verdict(
        3,
        "eigenvector error rate",
        pass,
        &format!(
            "n = {RATE_SIZES:?}; rms(l=2,3) errors {}; slope {:.4} in [{}, {}], r2 {:.4} >= {RATE_MIN_R2}; \
             per index: l=2 slope {:.4} (r2 {:.3}), l=3 slope {:.4} (r2 {:.3}); grid time {total:.0} s",
            fmt(&fit.grid.iter().map(|g| g.error).collect::<Vec<_>>()),
            fit.slope,
            RATE_SLOPE_RANGE.0,
            RATE_SLOPE_RANGE.1,
            fit.r2,
            l2.slope,
            l2.r2,
            l3.slope,
            l3.r2,
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_pointwise_consistency() {
    let spec = ManifoldSpec::circle(1.0).unwrap();
    let opts = RunOptions::default();
    let cos = TestFunction::cos(1.0);
    let one = TestFunction::constant(1.0);
    let mut maxes = Vec::new();
    let mut scales = Vec::new();
    let mut constant_errors = Vec::new();
    for &n in &POINTWISE_SIZES {
        let r = run_pointwise(&spec, &circle_sched(n), n, &cos, &SEEDS5, &opts).unwrap();
        maxes.push(r.max_abs_error);
        scales.push(r.target_scale);
        let c = run_pointwise(&spec, &circle_sched(n), n, &one, &SEEDS5, &opts).unwrap();
        constant_errors.extend(c.per_seed.iter().map(|s| s.max_abs_error));
    }
    let zero = constant_errors.iter().all(|&e| e == 0.0);
    let pass = strictly_decreasing(&maxes) && zero;
    verdict(
        4,
        "pointwise consistency",
        pass,
        &format!(
            "n = {POINTWISE_SIZES:?}; median max |L f - αβ Δ f(Q)| for cos θ {} (target scale {}); \
             f = 1 error exactly zero on every seed: {zero}",
            fmt(&maxes),
            fmt(&scales)
        ),
    );
    assert!(pass);
}

/// Largest principal-angle sine between the column spans of `u` and `v`,
/// both orthonormal: `‖(I - V Vᵀ) U‖₂`.
fn max_principal_sine(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let r = u - v * (v.transpose() * u);
    r.singular_values().max()
}

fn euclidean_block(p: &EigenPairs, range: std::ops::Range<usize>) -> DMatrix<f64> {
    let n = p.n();
    let cols: Vec<Vec<f64>> = range.map(|l| p.euclidean_vector(l)).collect();
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn oracle_graph(seed: u64) -> AugGraph {
    let mut r = rng::stream(seed, 0xACC5);
    let n = r.random_range(40..=ORACLE_MAX_N);
    let spec = match seed % 3 {
        0 => ManifoldSpec::circle(1.0).unwrap(),
        1 => ManifoldSpec::sphere(1.0).unwrap(),
        _ => ManifoldSpec::torus(2.0, 0.7).unwrap(),
    };
    let m = spec.intrinsic_dim();
    let eps = eps_from_n(n as f64, m, r.random_range(0.8..1.3), EpsRule::LogFactor).min(0.9);
    let sched = schedule_from(eps, 2.0, 1.0, spec.ambient_dim()).unwrap();
    realize(&spec, &sched, n, 1, seed).unwrap().graph
}

#[test]
fn criterion_5_solver_oracle_equivalence() {
    let mut worst_value: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..ORACLE_GRAPHS {
        let g = oracle_graph(seed);
        let dense = dense_eigenpairs(&g, g.n()).unwrap();
        let lanczos = graph_eigenpairs(&g, ORACLE_K, &SolverOptions::default()).unwrap();
        let dv = worst_value_gap(&dense.values, &lanczos.values);
        // eigenspaces are matched over groups of values closer than 1e-6 of the
        // spectral radius; a group cut by k is skipped
        let tol = 1e-6 * dense.values.last().unwrap();
        let mut angle: f64 = 0.0;
        let mut start = 0;
        for l in 1..=dense.values.len() {
            if l == dense.values.len() || dense.values[l] - dense.values[l - 1] > tol {
                if l <= ORACLE_K {
                    let s = max_principal_sine(&euclidean_block(&lanczos, start..l), &euclidean_block(&dense, start..l));
                    angle = angle.max(s.min(1.0).asin());
                }
                start = l;
            }
            if start >= ORACLE_K {
                break;
            }
        }
        worst_value = worst_value.max(dv);
        worst_angle = worst_angle.max(angle);
        if dv > ORACLE_VALUE_TOL || angle > ORACLE_ANGLE_TOL {
            failures.push(format!("graph {seed} (n = {}): value gap {dv:.1e}, angle {angle:.1e}", g.n()));
        }
    }
    let pass = failures.is_empty();
    verdict(
        5,
        "Lanczos vs dense oracle",
        pass,
        &format!(
            "{ORACLE_GRAPHS} graphs with n <= {ORACLE_MAX_N}, k = {ORACLE_K}: worst eigenvalue gap {worst_value:.2e} \
             (<= {ORACLE_VALUE_TOL:.0e}), worst principal angle {worst_angle:.2e} (<= {ORACLE_ANGLE_TOL:.0e}){}",
            if pass { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    );
    assert!(pass);
}

fn worst_value_gap(dense: &[f64], lanczos: &[f64]) -> f64 {
    lanczos.iter().zip(dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn gaussian_matrix(n: usize, k: usize, sd: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 0x6A55);
    DMatrix::from_fn(n, k, |_, _| {
        let g: f64 = StandardNormal.sample(&mut r);
        sd * g
    })
}

/// Directional derivative of `G` at `y` along `d` from the five-point
/// stencil, exact for the quartic `t ↦ G(y + t d)` up to rounding.
fn directional_fd(prob: &EmbeddingProblem, y: &DMatrix<f64>, d: &DMatrix<f64>, h: f64) -> f64 {
    let g = |t: f64| prob.objective(&(y + d * t));
    (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h)
}

#[test]
fn criterion_6_eckart_young() {
    let instances: [(&str, u64, usize, usize); 3] = [("circle", 11, 150, 3), ("circle", 12, 250, 5), ("sphere", 13, 300, 4)];
    let mut lines = Vec::new();
    let mut pass = true;
    for (kind, seed, n, k) in instances {
        let spec = if kind == "circle" { ManifoldSpec::circle(1.0).unwrap() } else { ManifoldSpec::sphere(1.0).unwrap() };
        let m = spec.intrinsic_dim();
        let sched = schedule_from(eps_from_n(n as f64, m, 1.0, EpsRule::LogFactor), 2.0, 1.0, spec.ambient_dim()).unwrap();
        let g = realize(&spec, &sched, n, 1, seed).unwrap().graph;
        let prob = EmbeddingProblem::new(&g, k).unwrap();
        let full = dense_spectrum(&g.to_dense());
        let optimum = eckart_young_optimum(prob.a, &full, k);
        let ystar = eckart_young_minimizer(&prob, &dense_eigenpairs(&g, k).unwrap()).unwrap();
        let identity = (prob.objective(&ystar) - optimum).abs() / optimum;

        let lr = 1.0 / (16.0 * prob.a);
        let desc = factorization_descent(&prob, seed, 40_000, lr).unwrap();
        let reached = (desc.trace.last().unwrap() - optimum) / optimum;
        let procrustes = procrustes_distance(&desc.y, &ystar);

        let y = gaussian_matrix(n, k, (prob.a / n as f64).sqrt(), seed + 100);
        let d = gaussian_matrix(n, k, 1.0, seed + 200);
        let analytic = (prob.gradient(&y).component_mul(&d)).sum();
        let h = 1e-3 * y.norm() / d.norm();
        let numeric = directional_fd(&prob, &y, &d, h);
        let grad_rel = (analytic - numeric).abs() / numeric.abs();

        let ok = identity <= EY_IDENTITY_TOL && reached <= EY_DESCENT_TOL && procrustes <= EY_PROCRUSTES_TOL && grad_rel <= EY_GRADIENT_TOL;
        pass &= ok;
        lines.push(format!(
            "{kind} n={n} k={k}: identity {identity:.1e}, descent gap {reached:.1e}, procrustes {procrustes:.1e}, gradient {grad_rel:.1e}"
        ));
    }
    verdict(
        6,
        "Eckart-Young identity and descent",
        pass,
        &format!(
            "{} (limits {EY_IDENTITY_TOL:.0e}, {EY_DESCENT_TOL:.0e}, {EY_PROCRUSTES_TOL:.0e}, {EY_GRADIENT_TOL:.0e})",
            lines.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_realizability_trend() {
    let spec = ManifoldSpec::circle(1.0).unwrap();
    let train = TrainOptions { steps: REAL_STEPS, lr: REAL_LR, seed: 0 };
    let rep = run_realizability(
        &spec,
        &circle_sched(REAL_N),
        REAL_N,
        REAL_K,
        REAL_DEPTH,
        &REAL_WIDTHS,
        &REAL_SEEDS,
        &train,
        REAL_FRESH,
    )
    .unwrap();
    let sup: Vec<f64> = rep.widths.iter().map(|w| w.median_sup_error).collect();
    let fresh: Vec<f64> = rep.widths.iter().map(|w| w.median_fresh_error).collect();
    let ratios: Vec<f64> = fresh.iter().zip(&sup).map(|(f, s)| f / s).collect();
    let trend = strictly_decreasing(&sup);
    let generalizes = ratios.iter().all(|&r| r <= REAL_FRESH_FACTOR);
    let pass = trend && generalizes;
    verdict(
        7,
        "ReLU realizability trend",
        pass,
        &format!(
            "widths {REAL_WIDTHS:?} at depth {REAL_DEPTH}: median train sup error {} (strictly decreasing: {trend}); \
             fresh sup error {}; fresh/train {} (need <= {REAL_FRESH_FACTOR})",
            fmt_sci(&sup),
            fmt_sci(&fresh),
            fmt(&ratios)
        ),
    );
    assert!(pass);
}

fn fmt_sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Monte Carlo estimate of `∫_{B^m} y₁² dy` from the cube `[-1, 1]^m`, with
/// its standard error.
fn mc_beta(m: usize, samples: usize, seed: u64) -> (f64, f64) {
    let mut r = rng::stream(seed, 0xBE7A);
    let vol = 2f64.powi(m as i32);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let y: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
        let v = if y.iter().map(|t| t * t).sum::<f64>() <= 1.0 { vol * y[0] * y[0] } else { 0.0 };
        s += v;
        s2 += v * v;
    }
    let mean = s / samples as f64;
    let var = s2 / samples as f64 - mean * mean;
    (mean, (var / samples as f64).sqrt())
}

#[test]
fn criterion_8_constants() {
    use std::f64::consts::PI;
    let c1 = constants(1).unwrap();
    let c2 = constants(2).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs();
    let closed = close(c1.alpha, PI.sqrt()) && close(c1.beta, 2.0 / 3.0) && close(c2.alpha, PI) && close(c2.beta, PI / 4.0);
    let mut mc = Vec::new();
    let mut mc_ok = true;
    for (m, c) in [(1, &c1), (2, &c2)] {
        let (est, se) = mc_beta(m, MC_SAMPLES, m as u64);
        let z = (est - c.beta).abs() / se;
        mc_ok &= z <= MC_SIGMAS;
        mc.push(format!("m={m}: {est:.5} ± {se:.5} vs {:.5} ({z:.2}σ)", c.beta));
    }
    let pass = closed && mc_ok;
    verdict(
        8,
        "constants",
        pass,
        &format!(
            "α(1) = {:.15}, β(1) = {:.15}, α(2) = {:.15}, β(2) = {:.15} (closed forms: {closed}); Monte Carlo at {MC_SAMPLES}: {}",
            c1.alpha,
            c1.beta,
            c2.alpha,
            c2.beta,
            mc.join(", ")
        ),
    );
    assert!(pass);
}

fn small_spec(kind: u8) -> ManifoldSpec {
    match kind {
        0 => ManifoldSpec::circle(1.0).unwrap(),
        1 => ManifoldSpec::sphere(1.0).unwrap(),
        2 => ManifoldSpec::torus(2.0, 0.7).unwrap(),
        _ => ManifoldSpec::dumbbell(ProfileCurve::standard()),
    }
}

fn small_graph(kind: u8, n: usize, seed: u64) -> AugGraph {
    let spec = small_spec(kind);
    let eps = eps_from_n(n as f64, spec.intrinsic_dim(), 1.0, EpsRule::LogFactor).min(0.9);
    let sched = schedule_from(eps, 2.0, 1.0, spec.ambient_dim()).unwrap();
    realize(&spec, &sched, n, 1, seed).unwrap().graph
}

fn graph_bytes(g: &AugGraph) -> Vec<u8> {
    let mut b = Vec::new();
    write_graph_binary(g, &mut b).unwrap();
    b
}

#[test]
fn criterion_9_invariant_suites() {
    let start = Instant::now();
    let cfg = Config { cases: 24, failure_persistence: None, ..Config::default() };
    let mut outcomes: Vec<(&str, Result<(), String>)> = Vec::new();

    let mut runner = TestRunner::new(cfg.clone());
    let laplacian = runner
        .run(&(0u8..4, 40usize..160, any::<u64>()), |(kind, n, seed)| {
            let g = small_graph(kind, n, seed);
            let l = g.to_dense();
            let scale = g.max_degree().max(1e-300);
            let asym = (&l - l.transpose()).amax();
            prop_assert!(asym == 0.0, "asymmetry {asym}");
            for i in 0..n {
                let row: f64 = l.row(i).iter().sum();
                prop_assert!(row.abs() <= 1e-12 * scale, "row {i} sums to {row}");
            }
            let lo = dense_spectrum(&l)[0];
            prop_assert!(lo >= -1e-12 * scale, "smallest eigenvalue {lo}");
            let f: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            prop_assert!(g.dirichlet_energy(&f).unwrap() >= 0.0);
            Ok(())
        })
        .map_err(|e| e.to_string());
    outcomes.push(("Laplacian symmetric, zero row sums, PSD", laplacian));

    let mut runner = TestRunner::new(cfg.clone());
    let projection = runner
        .run(&(0u8..4, any::<u64>()), |(kind, seed)| {
            let spec = small_spec(kind);
            let nat = spec.sample_natural(20, seed).unwrap();
            let mut r = rng::stream(seed, 0x9E0);
            let reach = if kind == 3 { 0.02 } else { 0.2 };
            for x in nat.points.rows() {
                let y: Vec<f64> = x.iter().map(|v| v + reach * (r.random::<f64>() - 0.5)).collect();
                let p = spec.project(&y).unwrap();
                let pp = spec.project(&p).unwrap();
                let moved = p.iter().zip(&pp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                prop_assert!(moved <= 1e-12, "second projection moved {moved}");
                prop_assert!(spec.constraint_residual(&p) <= 1e-10);
            }
            Ok(())
        })
        .map_err(|e| e.to_string());
    outcomes.push(("projection idempotent", projection));

    let mut runner = TestRunner::new(Config { cases: 12, ..cfg.clone() });
    let courant = runner
        .run(&(0u8..3, 60usize..200, any::<u64>()), |(kind, n, seed)| {
            let g = small_graph(kind, n, seed);
            let pairs = graph_eigenpairs(&g, 4, &SolverOptions::default()).unwrap();
            let tol = 1e-8 * g.max_degree().max(1.0);
            let rep = courant_fischer_check(&g, &pairs, 40, seed, tol);
            prop_assert_eq!(rep.optimal_violations, 0);
            prop_assert_eq!(rep.random_violations, 0);
            Ok(())
        })
        .map_err(|e| e.to_string());
    outcomes.push(("Courant-Fischer min-max", courant));

    let mut runner = TestRunner::new(Config { cases: 4, ..cfg });
    let replay = runner
        .run(&(0u8..3, any::<u64>()), |(kind, seed)| {
            let in_pool = |threads: usize| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                pool.install(|| {
                    let g = small_graph(kind, 400, seed);
                    let spec = ManifoldSpec::circle(1.0).unwrap();
                    let rep = run_spectral(&spec, &circle_sched(300), 300, 4, &[seed, seed ^ 1], &RunOptions::default()).unwrap();
                    (graph_bytes(&g), serde_json::to_vec(&rep).unwrap())
                })
            };
            let (a, b) = (in_pool(1), in_pool(3));
            prop_assert!(a.0 == b.0, "graph bytes differ across thread counts");
            prop_assert!(a.1 == b.1, "spectral report bytes differ across thread counts");
            prop_assert!(in_pool(1) == a, "rerun differs");
            Ok(())
        })
        .map_err(|e| e.to_string());
    outcomes.push(("byte-identical replay across thread counts", replay));

    let secs = start.elapsed().as_secs_f64();
    let all = outcomes.iter().all(|o| o.1.is_ok());
    let pass = all && secs <= INVARIANT_MAX_SECONDS;
    let parts: Vec<String> = outcomes
        .iter()
        .map(|(name, r)| match r {
            Ok(()) => format!("{name}: ok"),
            Err(e) => format!("{name}: {e}"),
        })
        .collect();
    verdict(9, "invariant suites", pass, &format!("{}; {secs:.1} s (<= {INVARIANT_MAX_SECONDS} s)", parts.join("; ")));
    assert!(pass);
}
