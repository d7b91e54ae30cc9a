//! Consistency experiments: pointwise operator error, spectral error after
//! alignment, log-log rate fits and the dumbbell bottleneck.
//!
//! Every experiment runs the same per-seed pipeline (sample, augment inside the
//! tube, project, build the graph). Seeds run in parallel and are folded back in
//! seed order, so reports do not depend on the thread count.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{augment_in_tube, naive_schedule, schedule_from, AugmentedCloud, ParamSchedule};
use crate::continuum::{constants, continuum_spectrum, grid_reference_spectrum, ContinuumSpectrum};
use crate::graph::{build_graph, AugGraph};
use crate::linalg::median;
use crate::manifold::{ChartField, Constant, Density, Fourier, ManifoldKind, ManifoldSpec, NaturalSample, ProfileCurve};
use crate::spectral::{align_with_clusters, graph_eigenpairs, l2_theta_dist, polar_factor, EigenPairs, SolverOptions};
use crate::svg::{Plot, Style};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Augmented draws per natural point.
    pub per_parent: usize,
    pub solver: SolverOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { per_parent: 1, solver: SolverOptions::default() }
    }
}

/// One seed's data: naturals, the augmented cloud with projections, and the graph.
#[derive(Clone, Debug)]
pub struct Realization {
    pub naturals: NaturalSample,
    pub cloud: AugmentedCloud,
    pub graph: AugGraph,
}

impl Realization {
    pub fn projections(&self) -> &crate::PointCloud {
        self.cloud.projections.as_ref().expect("realizations always carry projections")
    }
}

/// The shared pipeline with `n` natural points. Sub-seeds for sampling and
/// augmentation are derived from `seed`.
pub fn realize(spec: &ManifoldSpec, sched: &ParamSchedule, n: usize, per_parent: usize, seed: u64) -> Result<Realization> {
    let naturals = spec.sample_natural(n, rng::mix(seed, 1))?;
    let mut cloud = augment_in_tube(spec, &naturals, sched, per_parent, rng::mix(seed, 2))?;
    cloud.project_onto(spec)?;
    let graph = build_graph(&cloud, &naturals.points, sched, spec.intrinsic_dim())?;
    Ok(Realization { naturals, cloud, graph })
}

fn require_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::param("seeds must be nonempty"));
    }
    Ok(())
}

fn require_uniform_closed_form(spec: &ManifoldSpec) -> Result<()> {
    let closed = matches!(spec.kind(), ManifoldKind::Circle { .. } | ManifoldKind::Sphere { .. });
    if !closed || !matches!(spec.density(), Density::Uniform) {
        return Err(Error::Unsupported(format!(
            "this experiment needs a closed-form limit operator: uniform circle or sphere, not the {}",
            spec.name()
        )));
    }
    Ok(())
}

/// A named chart field used as the test function of the pointwise experiment.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub field: Arc<dyn ChartField>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, field: Arc<dyn ChartField>) -> Self {
        Self { name: name.into(), field }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), Arc::new(Constant(c)))
    }

    /// `cos(j θ)` in the first chart coordinate.
    pub fn cos(freq: f64) -> Self {
        Self::new(format!("cos({freq}θ)"), Arc::new(Fourier::cos(freq)))
    }

    /// Parses `one`, `const:<c>` or `cos:<j>` (`cos` alone means `cos:1`).
    pub fn parse(s: &str) -> Result<Self> {
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |default: f64| -> Result<f64> {
            if arg.is_empty() {
                Ok(default)
            } else {
                arg.trim().parse().map_err(|_| Error::param(format!("bad test function argument `{arg}`")))
            }
        };
        match head.trim() {
            "one" => Ok(Self::constant(1.0)),
            "const" => Ok(Self::constant(num(1.0)?)),
            "cos" => Ok(Self::cos(num(1.0)?)),
            other => Err(Error::param(format!("unknown test function `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSeed {
    pub seed: u64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub n: usize,
    pub eps: f64,
    pub test_function: String,
    /// Median over seeds of `max_i |L f(x̄_i) - αβ Δ_aug f(Q x̄_i)|`.
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// Largest `|αβ Δ_aug f|` over the projections, as a scale for the errors.
    pub target_scale: f64,
    /// Max of `|f|` and its chart derivatives up to third order.
    pub f_c3_proxy: f64,
    pub per_seed: Vec<PointwiseSeed>,
}

/// Max of `|f|, |∂f|, |∂²f|, |∂³f|` over a chart grid; third derivatives are
/// central differences of the Hessian. Spacing is 1e-3 on one-dimensional
/// charts and 1e-2 on two-dimensional ones.
pub fn c3_proxy(spec: &ManifoldSpec, f: &dyn ChartField) -> f64 {
    let m = spec.intrinsic_dim();
    let h = if m == 1 { 1e-3 } else { 1e-2 };
    let mut best: f64 = 0.0;
    let mut visit = |c: &[f64]| {
        let j = f.jet(c);
        best = best.max(j.value.abs());
        for a in 0..m {
            best = best.max(j.grad[a].abs());
            for b in 0..m {
                best = best.max(j.hess[a][b].abs());
            }
            let mut p = c.to_vec();
            let mut q = c.to_vec();
            p[a] += h;
            q[a] -= h;
            let (jp, jq) = (f.jet(&p), f.jet(&q));
            for b in 0..m {
                for e in 0..m {
                    best = best.max(((jp.hess[b][e] - jq.hess[b][e]) / (2.0 * h)).abs());
                }
            }
        }
    };
    let steps = |lo: f64, hi: f64| ((hi - lo) / h).round() as usize;
    let pi = std::f64::consts::PI;
    if m == 1 {
        for i in 0..steps(-pi, pi) {
            visit(&[-pi + i as f64 * h]);
        }
    } else {
        // polar angle kept off the poles, where the sphere chart degenerates
        for i in 1..steps(0.0, pi) {
            for j in 0..steps(-pi, pi) {
                visit(&[i as f64 * h, -pi + j as f64 * h]);
            }
        }
    }
    best
}

/// Graph operator applied to `f` at the projections against `αβ Δ_aug f`.
pub fn run_pointwise(
    spec: &ManifoldSpec,
    sched: &ParamSchedule,
    n: usize,
    test_fn: &TestFunction,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<PointwiseReport> {
    require_uniform_closed_form(spec)?;
    require_seeds(seeds)?;
    let ab = constants(spec.intrinsic_dim())?.alpha_beta();
    let f = &*test_fn.field;
    let per: Vec<(PointwiseSeed, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let real = realize(spec, sched, n, opts.per_parent, seed)?;
            let proj = real.projections();
            let fv: Vec<f64> = proj.rows().map(|q| spec.eval_field(f, q)).collect();
            let lf = real.graph.laplacian_apply(&fv)?;
            let mut max_err: f64 = 0.0;
            let mut sum = 0.0;
            let mut scale: f64 = 0.0;
            for (i, q) in proj.rows().enumerate() {
                let target = ab * spec.laplace_beltrami_apply(f, q)?;
                let e = (lf[i] - target).abs();
                max_err = max_err.max(e);
                sum += e;
                scale = scale.max(target.abs());
            }
            let rec = PointwiseSeed { seed, max_abs_error: max_err, mean_abs_error: sum / fv.len() as f64 };
            Ok((rec, scale))
        })
        .collect::<Result<_>>()?;
    let maxes: Vec<f64> = per.iter().map(|p| p.0.max_abs_error).collect();
    let means: Vec<f64> = per.iter().map(|p| p.0.mean_abs_error).collect();
    Ok(PointwiseReport {
        n,
        eps: sched.eps,
        test_function: test_fn.name.clone(),
        max_abs_error: median(&maxes),
        mean_abs_error: median(&means),
        target_scale: per.iter().map(|p| p.1).fold(0.0, f64::max),
        f_c3_proxy: c3_proxy(spec, f),
        per_seed: per.into_iter().map(|p| p.0).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSeed {
    pub seed: u64,
    pub graph_values: Vec<f64>,
    pub eigval_errors: Vec<f64>,
    pub eigvec_errors: Vec<f64>,
    pub components: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub eps: f64,
    pub k: usize,
    pub continuum_values: Vec<f64>,
    /// `λ_l / (αβ)`.
    pub predicted_graph_values: Vec<f64>,
    /// Median over seeds of `|λ_l - αβ λ̂_l| / λ_l`; the first entry, where
    /// `λ_1 = 0`, is the absolute `|αβ λ̂_1|`.
    pub eigval_errors: Vec<f64>,
    /// Median over seeds of `‖f̂_l - f_l(Q ·)‖` in L²(ϑ_n) after alignment.
    pub eigvec_errors: Vec<f64>,
    /// Median over seeds of `αβ λ̂_l / λ_l` for `l ≥ 2` (1 in the limit).
    pub eigval_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SpectralSeed>,
}

/// Per-column errors of `computed` against `reference` after rotating each
/// cluster. `clusters` must cover `0..computed.k()`; a final cluster may extend
/// past `k` in `reference` (it was cut by `k`), in which case the reference
/// block is projected onto the computed one: `R W` with `W = polar(Rᵀ C)`.
pub fn aligned_errors(computed: &EigenPairs, reference: &[Vec<f64>], clusters: &[Range<usize>]) -> Result<Vec<f64>> {
    let k = computed.k();
    let inner: Vec<Range<usize>> = clusters.iter().filter(|c| c.end <= k).cloned().collect();
    let cut = clusters.iter().find(|c| c.start < k && c.end > k).cloned();
    let covered = inner.last().map_or(0, |c| c.end);
    if cut.as_ref().map_or(covered != k, |c| c.start != covered) {
        return Err(Error::param("clusters must partition the computed indices in order"));
    }
    let mut errs = if covered > 0 {
        let head = EigenPairs {
            values: computed.values[..covered].to_vec(),
            vectors: computed.vectors[..covered].to_vec(),
            residuals: computed.residuals[..covered].to_vec(),
            tolerance: computed.tolerance,
        };
        align_with_clusters(&head, &reference[..covered], inner)?.distance_after
    } else {
        Vec::new()
    };
    if let Some(c) = cut {
        if reference.len() < c.end {
            return Err(Error::DimensionMismatch { expected: c.end, got: reference.len() });
        }
        let n = computed.n();
        let cm = DMatrix::from_fn(n, k - c.start, |i, j| computed.vectors[c.start + j][i]);
        let rm = DMatrix::from_fn(n, c.len(), |i, j| reference[c.start + j][i]);
        let rw = &rm * polar_factor(&(rm.transpose() * &cm));
        for j in 0..(k - c.start) {
            let a: Vec<f64> = cm.column(j).iter().copied().collect();
            let b: Vec<f64> = rw.column(j).iter().copied().collect();
            errs.push(l2_theta_dist(&a, &b));
        }
    }
    Ok(errs)
}

fn l2_theta_normalize(v: &mut [f64]) {
    let nrm = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// Continuum eigenpairs covering the first `k` values and the whole cluster the
/// `k`-th one belongs to. Closed form for uniform densities; on a circle with a
/// custom density, the finite-difference grid solver at spacing `ε / 20`.
pub fn reference_spectrum(spec: &ManifoldSpec, k: usize, eps: f64) -> Result<ContinuumSpectrum> {
    let solve = |k: usize| match (spec.kind(), spec.density()) {
        (ManifoldKind::Circle { .. }, Density::Custom(_)) => grid_reference_spectrum(spec, k, eps),
        _ => continuum_spectrum(spec, k),
    };
    let first = solve(k)?;
    let full_end = first.clusters.last().map_or(k, |c| c.end);
    if full_end > k {
        solve(full_end)
    } else {
        Ok(first)
    }
}

/// Graph eigenpairs against the continuum eigenpairs sampled at the projections.
pub fn run_spectral(
    spec: &ManifoldSpec,
    sched: &ParamSchedule,
    n: usize,
    k: usize,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<SpectralReport> {
    require_seeds(seeds)?;
    let cont = reference_spectrum(spec, k, sched.eps)?;
    let clusters = cont.clusters.clone();
    let consts = constants(spec.intrinsic_dim())?;
    let ab = consts.alpha_beta();
    let lam = &cont.values;

    let per: Vec<SpectralSeed> = seeds
        .par_iter()
        .map(|&seed| {
            let real = realize(spec, sched, n, opts.per_parent, seed)?;
            let pairs = graph_eigenpairs(&real.graph, k, &opts.solver)?;
            let proj = real.projections();
            let reference: Vec<Vec<f64>> = cont
                .eigenfunctions
                .iter()
                .map(|f| {
                    let mut v: Vec<f64> = proj.rows().map(|q| spec.eval_field(&**f, q)).collect();
                    l2_theta_normalize(&mut v);
                    v
                })
                .collect();
            let eigvec_errors = aligned_errors(&pairs, &reference, &clusters)?;
            let eigval_errors = (0..k)
                .map(|l| {
                    if lam[l] == 0.0 {
                        (ab * pairs.values[l]).abs()
                    } else {
                        (lam[l] - ab * pairs.values[l]).abs() / lam[l]
                    }
                })
                .collect();
            Ok(SpectralSeed {
                seed,
                graph_values: pairs.values.clone(),
                eigval_errors,
                eigvec_errors,
                components: real.graph.components().0,
            })
        })
        .collect::<Result<_>>()?;

    let med = |pick: &dyn Fn(&SpectralSeed) -> f64| median(&per.iter().map(pick).collect::<Vec<_>>());
    Ok(SpectralReport {
        n,
        eps: sched.eps,
        k,
        continuum_values: lam[..k].to_vec(),
        predicted_graph_values: lam[..k].iter().map(|v| v / ab).collect(),
        eigval_errors: (0..k).map(|l| med(&|s| s.eigval_errors[l])).collect(),
        eigvec_errors: (0..k).map(|l| med(&|s| s.eigvec_errors[l])).collect(),
        eigval_ratios: (1..k).map(|l| med(&|s| ab * s.graph_values[l] / lam[l])).collect(),
        seeds: seeds.to_vec(),
        per_seed: per,
    })
}

/// One point of a rate fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub eps: f64,
    /// Median over seeds.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub grid: Vec<RatePoint>,
    /// Least-squares slope of `log error` on `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Slope of `log error` on `log ε`, when ε varies over the grid.
    pub eps_slope: Option<f64>,
    pub eps_r2: Option<f64>,
}

/// Which scalar of a [`SpectralReport`] enters a rate fit. Indices are 1-based
/// like the eigenvalue labels `λ_1 ≤ λ_2 ≤ …`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorSelector {
    Eigval(usize),
    Eigvec(usize),
    /// Mean of the eigenvector errors for `l ≥ 2`.
    EigvecMean,
    /// Root mean square of the eigenvector errors over `lo..=hi`; over a whole
    /// degenerate cluster this does not depend on the basis chosen inside it.
    EigvecRms(usize, usize),
}

impl ErrorSelector {
    pub fn pick(&self, r: &SpectralReport) -> Result<f64> {
        let idx = |l: usize| {
            if l == 0 || l > r.k {
                Err(Error::param(format!("eigen index {l} outside 1..={}", r.k)))
            } else {
                Ok(l - 1)
            }
        };
        match *self {
            ErrorSelector::Eigval(l) => Ok(r.eigval_errors[idx(l)?]),
            ErrorSelector::Eigvec(l) => Ok(r.eigvec_errors[idx(l)?]),
            ErrorSelector::EigvecMean => {
                if r.k < 2 {
                    return Err(Error::param("EigvecMean needs k >= 2"));
                }
                Ok(r.eigvec_errors[1..].iter().sum::<f64>() / (r.k - 1) as f64)
            }
            ErrorSelector::EigvecRms(lo, hi) => {
                let (a, b) = (idx(lo)?, idx(hi)?);
                if a > b {
                    return Err(Error::param("EigvecRms needs lo <= hi"));
                }
                let sq: f64 = r.eigvec_errors[a..=b].iter().map(|e| e * e).sum();
                Ok((sq / (b - a + 1) as f64).sqrt())
            }
        }
    }
}

/// `(slope, intercept, r²)` of ordinary least squares. A perfectly flat
/// response gets `r² = 1`, since the fit leaves no residual.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    (slope, intercept, r2)
}

pub fn fit_rate(grid: &[RatePoint]) -> Result<RateFit> {
    let mut ns: Vec<usize> = grid.iter().map(|p| p.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 {
        return Err(Error::param("a rate fit needs at least 4 distinct sizes"));
    }
    if grid.iter().any(|p| !(p.error > 0.0 && p.error.is_finite())) {
        return Err(Error::DegenerateFit);
    }
    let ys: Vec<f64> = grid.iter().map(|p| p.error.ln()).collect();
    let xs: Vec<f64> = grid.iter().map(|p| (p.n as f64).ln()).collect();
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    let es: Vec<f64> = grid.iter().map(|p| p.eps.ln()).collect();
    let eps_varies = es.iter().any(|e| (e - es[0]).abs() > 1e-12);
    let eps_fit = eps_varies.then(|| least_squares(&es, &ys));
    Ok(RateFit {
        grid: grid.to_vec(),
        slope,
        intercept,
        r2,
        eps_slope: eps_fit.map(|f| f.0),
        eps_r2: eps_fit.map(|f| f.2),
    })
}

/// Rate fit over spectral reports (at least 4 sizes, at least 5 seeds each).
pub fn fit_spectral_rate(reports: &[SpectralReport], select: ErrorSelector) -> Result<RateFit> {
    if reports.iter().any(|r| r.seeds.len() < 5) {
        return Err(Error::param("rate fits need at least 5 seeds per size"));
    }
    let grid = reports
        .iter()
        .map(|r| Ok(RatePoint { n: r.n, eps: r.eps, error: select.pick(r)? }))
        .collect::<Result<Vec<_>>>()?;
    fit_rate(&grid)
}

pub fn rate_plot(fit: &RateFit, title: &str) -> String {
    let mut p = Plot::new(title, "n", "median error").log_log();
    let xs: Vec<f64> = fit.grid.iter().map(|g| g.n as f64).collect();
    p.add("measured", Style::Line, xs.clone(), fit.grid.iter().map(|g| g.error).collect());
    let fitted: Vec<f64> = xs.iter().map(|x| (fit.intercept + fit.slope * x.ln()).exp()).collect();
    p.add(format!("slope {:.3}", fit.slope), Style::Line, xs, fitted);
    p.render()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DumbbellMode {
    /// The coupled schedule from `(ε, τ, η)`.
    Coupled { tau: f64, eta: f64 },
    /// `ε_p = ε_w = ε`.
    Naive,
}

impl DumbbellMode {
    pub fn standard() -> Self {
        DumbbellMode::Coupled { tau: 2.0, eta: 1.0 }
    }

    pub fn schedule(&self, eps: f64) -> Result<ParamSchedule> {
        match *self {
            DumbbellMode::Coupled { tau, eta } => schedule_from(eps, tau, eta, 3),
            DumbbellMode::Naive => naive_schedule(eps, 3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumbbellReport {
    pub n: usize,
    pub seed: u64,
    pub mode: DumbbellMode,
    pub eps: f64,
    pub lambda: Vec<f64>,
    pub edges: usize,
    pub components: usize,
    /// Second eigenvector, unit in L²(ϑ_n).
    pub eigvec2: Vec<f64>,
    /// 2-means split point of the eigenvector entries.
    pub threshold: f64,
    pub cluster_labels: Vec<u8>,
    /// Lobe by the sign of the axial coordinate.
    pub truth: Vec<u8>,
    pub accuracy: f64,
    #[serde(skip)]
    pub svg: String,
}

/// Exact 1-D 2-means: the split of the sorted values minimizing the total
/// within-cluster sum of squares. Returns the midpoint threshold and labels
/// (1 above the threshold).
pub fn two_means_1d(values: &[f64]) -> Result<(f64, Vec<u8>)> {
    if values.len() < 2 {
        return Err(Error::param("2-means needs at least two values"));
    }
    let mut s: Vec<f64> = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mut pre = vec![0.0; n + 1];
    let mut pre2 = vec![0.0; n + 1];
    for i in 0..n {
        pre[i + 1] = pre[i] + s[i];
        pre2[i + 1] = pre2[i] + s[i] * s[i];
    }
    let sse = |a: usize, b: usize| {
        let c = (b - a) as f64;
        let sum = pre[b] - pre[a];
        (pre2[b] - pre2[a]) - sum * sum / c
    };
    let mut best = (f64::INFINITY, 1);
    for cut in 1..n {
        if s[cut] == s[cut - 1] {
            continue;
        }
        let v = sse(0, cut) + sse(cut, n);
        if v < best.0 {
            best = (v, cut);
        }
    }
    let thr = 0.5 * (s[best.1 - 1] + s[best.1]);
    Ok((thr, values.iter().map(|&v| u8::from(v > thr)).collect()))
}

/// Fraction of agreeing labels, maximized over swapping the two labels.
pub fn clustering_accuracy(labels: &[u8], truth: &[u8]) -> f64 {
    let agree = labels.iter().zip(truth).filter(|(a, b)| a == b).count() as f64;
    let n = labels.len() as f64;
    agree.max(n - agree) / n
}

/// The non-constant direction in the span of the first two eigenvectors.
///
/// For a connected graph this is the second eigenvector. When zero is a double
/// eigenvalue, the solver may return any basis of the kernel, so the constant
/// component is removed from both and the larger remainder is kept.
pub fn fiedler_vector(pairs: &EigenPairs) -> Vec<f64> {
    let strip = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - mean).collect::<Vec<f64>>()
    };
    let a = strip(&pairs.vectors[0]);
    let b = strip(&pairs.vectors[1]);
    let kernel_pair = (pairs.values[1] - pairs.values[0]).abs() <= pairs.tolerance.max(1e-12);
    let size = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    if kernel_pair && size(&a) > size(&b) {
        a
    } else {
        pairs.vectors[1].clone()
    }
}

/// Spectral bisection of the standard dumbbell with `ε = n^{-1/6}`.
pub fn run_dumbbell(n: usize, mode: DumbbellMode, seed: u64, opts: &RunOptions) -> Result<DumbbellReport> {
    if n < 500 {
        return Err(Error::param("the dumbbell experiment needs n >= 500"));
    }
    let spec = ManifoldSpec::dumbbell(ProfileCurve::standard());
    let eps = (n as f64).powf(-1.0 / 6.0);
    let sched = mode.schedule(eps)?;
    let real = realize(&spec, &sched, n, opts.per_parent, seed)?;
    let pairs = graph_eigenpairs(&real.graph, 2, &opts.solver)?;
    let v = fiedler_vector(&pairs);
    let (threshold, labels) = two_means_1d(&v)?;
    let truth: Vec<u8> = real.cloud.points.rows().map(|x| u8::from(x[0] > 0.0)).collect();
    let accuracy = clustering_accuracy(&labels, &truth);

    let proj = real.projections();
    let mut plot = Plot::new(
        format!("dumbbell, n = {n}, accuracy {accuracy:.3}"),
        "axial coordinate",
        "second coordinate",
    );
    for c in 0..2u8 {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            proj.rows().zip(&labels).filter(|(_, &l)| l == c).map(|(q, _)| (q[0], q[1])).unzip();
        plot.add(format!("cluster {c}"), Style::Points, xs, ys);
    }
    plot.width = 820.0;
    plot.height = 420.0;

    Ok(DumbbellReport {
        n,
        seed,
        mode,
        eps,
        lambda: pairs.values.clone(),
        edges: real.graph.edge_count(),
        components: real.graph.components().0,
        eigvec2: v,
        threshold,
        cluster_labels: labels,
        truth,
        accuracy,
        svg: plot.render(),
    })
}
