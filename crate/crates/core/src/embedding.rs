//! The spectral-contrastive factorization problem `min_Y ‖Y Yᵀ - (aI - L)‖²`,
//! its Eckart–Young minimizer, direct gradient descent on it, and ReLU
//! networks that realize the minimizer from the augmented points.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{augment_in_tube, get_f64, get_u64, ParamSchedule};
use crate::consistency::realize;
use crate::continuum::continuum_spectrum;
use crate::graph::AugGraph;
use crate::linalg::median;
use crate::manifold::ManifoldSpec;
use crate::spectral::{graph_eigenpairs, largest_eigenvalue_bound, polar_factor, EigenPairs, SolverOptions};
use crate::{rng, Error, PointCloud, Result};

/// Margin on the shift: `a = 1.05 · max(max degree, λ_max bound)`.
pub const SHIFT_MARGIN: f64 = 1.05;

#[derive(Clone, Debug)]
pub struct EmbeddingProblem<'g> {
    pub graph: &'g AugGraph,
    pub k: usize,
    pub a: f64,
}

impl<'g> EmbeddingProblem<'g> {
    /// Shift from the larger of the maximum degree and an upper bound on `λ_max(L)`,
    /// so that `aI - L` is positive semidefinite.
    pub fn new(graph: &'g AugGraph, k: usize) -> Result<Self> {
        let lmax = largest_eigenvalue_bound(graph, graph.n().min(200), 0)?;
        Self::with_shift(graph, k, SHIFT_MARGIN * graph.max_degree().max(lmax))
    }

    pub fn with_shift(graph: &'g AugGraph, k: usize, a: f64) -> Result<Self> {
        if k == 0 || k > graph.n() {
            return Err(Error::param(format!("k must lie in [1, n], got {k}")));
        }
        if !(a >= graph.max_degree()) || !a.is_finite() {
            return Err(Error::param(format!("shift {a} is below the maximum degree {}", graph.max_degree())));
        }
        Ok(Self { graph, k, a })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// `L Y`, column by column.
    fn apply_l(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let cols: Vec<Vec<f64>> = (0..y.ncols())
            .into_par_iter()
            .map(|c| {
                let mut out = vec![0.0; n];
                self.graph.laplacian_apply_into(y.column(c).as_slice(), &mut out);
                out
            })
            .collect();
        DMatrix::from_fn(n, y.ncols(), |i, j| cols[j][i])
    }

    /// `‖M‖_F²` for `M = aI - L`, from the diagonal and the edge weights.
    fn m_norm2(&self) -> f64 {
        let s = self.graph.scale();
        let diag: f64 = self.graph.degrees().iter().map(|d| (self.a - d).powi(2)).sum();
        let off: f64 = self.graph.edges().iter().map(|e| 2.0 * (s * e.2).powi(2)).sum();
        diag + off
    }

    /// `G(Y) = ‖Y Yᵀ - M‖_F²`, expanded as `‖YᵀY‖² - 2 tr(Yᵀ M Y) + ‖M‖²`
    /// so no n×n matrix is formed.
    pub fn objective(&self, y: &DMatrix<f64>) -> f64 {
        let gram = y.transpose() * y;
        let ly = self.apply_l(y);
        let tr_mym = self.a * y.norm_squared() - y.dot(&ly);
        gram.norm_squared() - 2.0 * tr_mym + self.m_norm2()
    }

    /// `∇G(Y) = 4 (Y Yᵀ - M) Y = 4 (Y (YᵀY) - a Y + L Y)`.
    pub fn gradient(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let gram = y.transpose() * y;
        let ly = self.apply_l(y);
        (y * gram - y * self.a + ly) * 4.0
    }

    /// Dense `aI - L`; for oracle checks on small graphs.
    pub fn target_dense(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n()) * self.a - self.graph.to_dense()
    }
}

/// Columns `√(a - λ_l) u_l` with `u_l` the Euclidean-unit eigenvectors.
pub fn eckart_young_minimizer(prob: &EmbeddingProblem, pairs: &EigenPairs) -> Result<DMatrix<f64>> {
    if pairs.k() < prob.k {
        return Err(Error::param(format!("need {} eigenpairs, got {}", prob.k, pairs.k())));
    }
    if pairs.n() != prob.n() {
        return Err(Error::DimensionMismatch { expected: prob.n(), got: pairs.n() });
    }
    let lk = pairs.values[prob.k - 1];
    if prob.a < lk {
        return Err(Error::ShiftTooSmall { shift: prob.a, eigenvalue: lk });
    }
    let mut y = DMatrix::zeros(prob.n(), prob.k);
    for l in 0..prob.k {
        let c = (prob.a - pairs.values[l]).max(0.0).sqrt();
        let u = pairs.euclidean_vector(l);
        for i in 0..prob.n() {
            y[(i, l)] = c * u[i];
        }
    }
    Ok(y)
}

/// The optimum `Σ_{l>k} (a - λ_l)²` given the full spectrum of `L`.
pub fn eckart_young_optimum(a: f64, spectrum: &[f64], k: usize) -> f64 {
    spectrum.iter().skip(k).map(|l| (a - l).powi(2)).sum()
}

/// `min_Q ‖Y Q - Y*‖_F` over orthogonal `Q`.
pub fn procrustes_distance(y: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    let q = polar_factor(&(y.transpose() * target));
    (y * q - target).norm()
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub y: DMatrix<f64>,
    /// Objective before the first step and after each step.
    pub trace: Vec<f64>,
}

/// Consecutive increases of the objective that count as divergence.
const DIVERGENCE_RUN: usize = 50;

/// Gradient descent on `G` from `N(0, a/n)` entries.
pub fn factorization_descent(prob: &EmbeddingProblem, seed: u64, steps: usize, lr: f64) -> Result<DescentResult> {
    let mut r = rng::stream(seed, 0xD15C);
    let sd = (prob.a / prob.n() as f64).sqrt();
    let y0 = DMatrix::from_fn(prob.n(), prob.k, |_, _| {
        let g: f64 = StandardNormal.sample(&mut r);
        sd * g
    });
    descend_from(prob, y0, steps, lr)
}

/// Gradient descent on `G` from a given start.
pub fn descend_from(prob: &EmbeddingProblem, mut y: DMatrix<f64>, steps: usize, lr: f64) -> Result<DescentResult> {
    if !(lr > 0.0) {
        return Err(Error::param("learning rate must be positive"));
    }
    if y.nrows() != prob.n() || y.ncols() != prob.k {
        return Err(Error::DimensionMismatch { expected: prob.n() * prob.k, got: y.len() });
    }
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(prob.objective(&y));
    let mut rising = 0;
    for step in 1..=steps {
        let g = prob.gradient(&y);
        y -= g * lr;
        let f = prob.objective(&y);
        if !f.is_finite() {
            return Err(Error::Divergence { step });
        }
        rising = if f > *trace.last().expect("nonempty") { rising + 1 } else { 0 };
        trace.push(f);
        if rising >= DIVERGENCE_RUN {
            return Err(Error::Divergence { step });
        }
    }
    Ok(DescentResult { y, trace })
}

/// Fully connected ReLU network `W_L σ(⋯ σ(W_1 x + b_1) ⋯)`; the output layer
/// has no bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNet {
    /// `weights[i]` is `out × in`.
    pub weights: Vec<DMatrix<f64>>,
    /// Biases of the hidden layers.
    pub biases: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Number of weight matrices.
    pub depth: usize,
    pub width: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub max_abs_weight: f64,
    /// Entries of weights and biases with magnitude above 1e-8.
    pub nonzero_count: usize,
}

impl ReluNet {
    /// He-initialized hidden layers, zero output layer.
    pub fn init(input_dim: usize, output_dim: usize, arch: Architecture, seed: u64) -> Result<Self> {
        if arch.depth < 2 {
            return Err(Error::param("depth must be at least 2"));
        }
        if arch.width < output_dim {
            return Err(Error::param(format!("width {} is below the output dimension {output_dim}", arch.width)));
        }
        let mut r = rng::stream(seed, 0x4E7);
        let mut weights = Vec::with_capacity(arch.depth);
        let mut biases = Vec::with_capacity(arch.depth - 1);
        let mut fan_in = input_dim;
        for _ in 0..arch.depth - 1 {
            let sd = (2.0 / fan_in as f64).sqrt();
            weights.push(DMatrix::from_fn(arch.width, fan_in, |_, _| {
                let g: f64 = StandardNormal.sample(&mut r);
                sd * g
            }));
            biases.push((0..arch.width).map(|_| 0.01 * (r.random::<f64>() - 0.5)).collect());
            fan_in = arch.width;
        }
        weights.push(DMatrix::zeros(output_dim, fan_in));
        Ok(Self { weights, biases })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("depth >= 2").nrows()
    }

    /// Rows of `x` are inputs; rows of the result are outputs.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_all(x).pop().expect("at least the output")
    }

    /// Post-activation values of every hidden layer, then the output.
    fn forward_all(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.depth());
        let mut h = x.clone();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut z = &h * w.transpose();
            for mut row in z.row_iter_mut() {
                for (v, bj) in row.iter_mut().zip(b) {
                    *v = (*v + bj).max(0.0);
                }
            }
            acts.push(z.clone());
            h = z;
        }
        acts.push(&h * self.weights.last().expect("depth >= 2").transpose());
        acts
    }

    pub fn complexity(&self) -> Complexity {
        let all = self.weights.iter().flat_map(|w| w.iter()).chain(self.biases.iter().flatten());
        let mut max_abs: f64 = 0.0;
        let mut nnz = 0;
        for v in all {
            max_abs = max_abs.max(v.abs());
            nnz += usize::from(v.abs() > 1e-8);
        }
        Complexity { max_abs_weight: max_abs, nonzero_count: nnz }
    }

    /// One full-batch step on `½·mean_i ‖net(x_i) - y_i‖²`; returns the loss before the step.
    fn step(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>, lr: f64) -> f64 {
        let n = x.nrows() as f64;
        let acts = self.forward_all(x);
        let out = acts.last().expect("output");
        let mut delta = (out - y) / n;
        let loss = 0.5 * n * delta.norm_squared();
        let depth = self.depth();
        for layer in (0..depth).rev() {
            let input = if layer == 0 { x } else { &acts[layer - 1] };
            let grad_w = delta.transpose() * input;
            let next = if layer > 0 {
                let mut back = &delta * &self.weights[layer];
                // ReLU derivative from the stored activation of the layer below
                back.zip_apply(&acts[layer - 1], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                Some(back)
            } else {
                None
            };
            if layer < depth - 1 {
                for (bj, col) in self.biases[layer].iter_mut().zip(delta.column_iter()) {
                    *bj -= lr * col.sum();
                }
            }
            self.weights[layer] -= grad_w * lr;
            if let Some(b) = next {
                delta = b;
            }
        }
        loss
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub arch: Architecture,
    /// `max_{i,l} |Y*_{il} - net(x̄_i)_l|`.
    pub sup_error: f64,
    pub fro_error: f64,
    pub complexity: Complexity,
    /// Loss every 10 steps.
    pub trace: Vec<f64>,
}

/// Full-batch gradient descent on mean squared error from the cloud to the rows
/// of `target`. Training runs on `target / c` with `c = max |target|`, and the
/// output layer is multiplied by `c` afterwards, which is the same network class.
pub fn fit_relu_net(
    points: &PointCloud,
    target: &DMatrix<f64>,
    arch: Architecture,
    train: &TrainOptions,
) -> Result<(ReluNet, FitReport)> {
    if points.len() != target.nrows() {
        return Err(Error::DimensionMismatch { expected: target.nrows(), got: points.len() });
    }
    if !(train.lr > 0.0) {
        return Err(Error::param("learning rate must be positive"));
    }
    let x = DMatrix::from_row_slice(points.len(), points.dim(), points.as_flat());
    let mut net = ReluNet::init(points.dim(), target.ncols(), arch, train.seed)?;
    let c = target.amax();
    let scaled = if c > 0.0 { target / c } else { target.clone() };
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    for step in 0..train.steps {
        let loss = net.step(&x, &scaled, train.lr);
        if !loss.is_finite() {
            return Err(Error::Divergence { step });
        }
        rising = if loss > prev { rising + 1 } else { 0 };
        if rising >= DIVERGENCE_RUN {
            return Err(Error::Divergence { step });
        }
        prev = loss;
        if step % 10 == 0 {
            trace.push(loss * c * c);
        }
    }
    if c > 0.0 {
        *net.weights.last_mut().expect("depth >= 2") *= c;
    }
    let out = net.forward(&x);
    let diff = &out - target;
    let report = FitReport {
        arch,
        sup_error: diff.amax(),
        fro_error: diff.norm(),
        complexity: net.complexity(),
        trace,
    };
    Ok((net, report))
}

/// Depth and width of the network class in the realizability bound with
/// its constant set to 1: `(log(1/δ) + log d, k (δ^{-m} + d))`.
pub fn complexity_budget_shape(k: usize, d: usize, m: usize, delta: f64) -> (f64, f64) {
    let depth = (1.0 / delta).ln() + (d as f64).ln();
    let width = k as f64 * (delta.powi(-(m as i32)) + d as f64);
    (depth, width)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizabilitySeed {
    pub seed: u64,
    pub sup_error: f64,
    pub fro_error: f64,
    /// Sup error at fresh augmented points against the continuum eigenfunctions,
    /// scaled and rotated like the columns of `Y*`.
    pub fresh_error: f64,
    pub complexity: Complexity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthResult {
    pub arch: Architecture,
    pub median_sup_error: f64,
    pub median_fresh_error: f64,
    pub per_seed: Vec<RealizabilitySeed>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizabilityReport {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub shift: Vec<f64>,
    pub fresh_points: usize,
    pub widths: Vec<WidthResult>,
}

/// Fits `Y*` of a uniform circle or sphere graph with ReLU networks of each
/// width, one data realization and one initialization per seed.
#[allow(clippy::too_many_arguments)]
pub fn run_realizability(
    spec: &ManifoldSpec,
    sched: &ParamSchedule,
    n: usize,
    k: usize,
    depth: usize,
    widths: &[usize],
    seeds: &[u64],
    train: &TrainOptions,
    fresh_points: usize,
) -> Result<RealizabilityReport> {
    if seeds.is_empty() || widths.is_empty() {
        return Err(Error::param("seeds and widths must be nonempty"));
    }
    let cont_k = continuum_spectrum(spec, k)?;
    let full_end = cont_k.clusters.last().map_or(k, |c| c.end);
    let cont = if full_end > k { continuum_spectrum(spec, full_end)? } else { cont_k };
    // L²(ρ)-unit eigenfunctions for the uniform density
    let norm = spec.area().sqrt();

    struct Prepared {
        points: PointCloud,
        ystar: DMatrix<f64>,
        fresh: PointCloud,
        fresh_target: DMatrix<f64>,
        a: f64,
    }
    let prepared: Vec<Prepared> = seeds
        .iter()
        .map(|&seed| {
            let real = realize(spec, sched, n, 1, seed)?;
            let prob = EmbeddingProblem::new(&real.graph, k)?;
            let pairs = graph_eigenpairs(&real.graph, k, &SolverOptions::default())?;
            let ystar = eckart_young_minimizer(&prob, &pairs)?;
            let eval = |proj: &PointCloud| -> DMatrix<f64> {
                DMatrix::from_fn(proj.len(), cont.len(), |i, j| norm * spec.eval_field(&*cont.eigenfunctions[j], proj.row(i)))
            };
            let reference = eval(real.projections());
            let w = block_rotation(&pairs, &reference, &cont.clusters);
            let fresh_nat = spec.sample_natural(fresh_points, rng::mix(seed, 0xF5E5))?;
            let mut fresh = augment_in_tube(spec, &fresh_nat, sched, 1, rng::mix(seed, 0xF5E6))?;
            let fresh_proj = fresh.project_onto(spec)?.clone();
            let mut fresh_target = eval(&fresh_proj) * w;
            for l in 0..k {
                let c = (prob.a - pairs.values[l]).max(0.0).sqrt() / (n as f64).sqrt();
                fresh_target.column_mut(l).scale_mut(c);
            }
            Ok(Prepared { points: real.cloud.points.clone(), ystar, fresh: fresh.points, fresh_target, a: prob.a })
        })
        .collect::<Result<_>>()?;

    let mut results = Vec::with_capacity(widths.len());
    for &width in widths {
        let arch = Architecture { depth, width };
        let per: Vec<RealizabilitySeed> = seeds
            .par_iter()
            .zip(&prepared)
            .map(|(&seed, p)| {
                let (net, rep) = fit_relu_net(&p.points, &p.ystar, arch, &TrainOptions { seed, ..*train })?;
                let x = DMatrix::from_row_slice(p.fresh.len(), p.fresh.dim(), p.fresh.as_flat());
                let fresh_error = (net.forward(&x) - &p.fresh_target).amax();
                Ok(RealizabilitySeed {
                    seed,
                    sup_error: rep.sup_error,
                    fro_error: rep.fro_error,
                    fresh_error,
                    complexity: rep.complexity,
                })
            })
            .collect::<Result<_>>()?;
        results.push(WidthResult {
            arch,
            median_sup_error: median(&per.iter().map(|s| s.sup_error).collect::<Vec<_>>()),
            median_fresh_error: median(&per.iter().map(|s| s.fresh_error).collect::<Vec<_>>()),
            per_seed: per,
        });
    }
    Ok(RealizabilityReport {
        n,
        k,
        eps: sched.eps,
        shift: prepared.iter().map(|p| p.a).collect(),
        fresh_points,
        widths: results,
    })
}

/// `W` (reference columns × k) with `computed ≈ reference · W` in L²(ϑ_n),
/// fitted by orthogonal Procrustes within each eigenvalue cluster.
fn block_rotation(pairs: &EigenPairs, reference: &DMatrix<f64>, clusters: &[std::ops::Range<usize>]) -> DMatrix<f64> {
    let k = pairs.k();
    let n = pairs.n();
    let mut w = DMatrix::zeros(reference.ncols(), k);
    for c in clusters.iter().filter(|c| c.start < k) {
        let cols = c.start..c.end.min(k);
        let cm = DMatrix::from_fn(n, cols.len(), |i, j| pairs.vectors[cols.start + j][i]);
        let rm = reference.columns(c.start, c.len()).into_owned();
        let block = polar_factor(&(rm.transpose() * cm));
        w.view_mut((c.start, cols.start), (c.len(), cols.len())).copy_from(&block);
    }
    w
}

const NET_MAGIC: &[u8; 8] = b"AUGNET01";

/// Depth, then `(rows, cols)` of every weight matrix, then each layer's
/// weights row-major followed by its bias (hidden layers only), all little-endian.
pub fn write_net_binary(net: &ReluNet, w: &mut impl Write) -> Result<()> {
    w.write_all(NET_MAGIC)?;
    w.write_all(&(net.depth() as u64).to_le_bytes())?;
    for m in &net.weights {
        w.write_all(&(m.nrows() as u64).to_le_bytes())?;
        w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    }
    for (i, m) in net.weights.iter().enumerate() {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                w.write_all(&m[(r, c)].to_le_bytes())?;
            }
        }
        if let Some(b) = net.biases.get(i) {
            for v in b {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_net_binary(r: &mut impl Read) -> Result<ReluNet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NET_MAGIC {
        return Err(Error::Format("not a network file".into()));
    }
    let depth = get_u64(r)? as usize;
    if !(2..=1024).contains(&depth) {
        return Err(Error::Format(format!("implausible depth {depth}")));
    }
    let mut shapes = Vec::with_capacity(depth);
    for _ in 0..depth {
        let rows = get_u64(r)? as usize;
        let cols = get_u64(r)? as usize;
        if rows.checked_mul(cols).is_none_or(|s| s > 1 << 28) {
            return Err(Error::Format("implausible layer shape".into()));
        }
        shapes.push((rows, cols));
    }
    for i in 1..depth {
        if shapes[i].1 != shapes[i - 1].0 {
            return Err(Error::Format(format!("layer {i} does not chain onto layer {}", i - 1)));
        }
    }
    let mut weights = Vec::with_capacity(depth);
    let mut biases = Vec::with_capacity(depth - 1);
    for (i, &(rows, cols)) in shapes.iter().enumerate() {
        let mut m = DMatrix::zeros(rows, cols);
        for rr in 0..rows {
            for c in 0..cols {
                m[(rr, c)] = get_f64(r)?;
            }
        }
        weights.push(m);
        if i + 1 < depth {
            biases.push((0..rows).map(|_| get_f64(r)).collect::<Result<Vec<f64>>>()?);
        }
    }
    Ok(ReluNet { weights, biases })
}

/// CSV of a training trace: step, loss.
pub fn write_trace_csv(report: &FitReport, w: &mut impl Write) -> Result<()> {
    writeln!(w, "step,loss")?;
    for (i, v) in report.trace.iter().enumerate() {
        writeln!(w, "{},{:.16e}", i * 10, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::{augment_in_tube, schedule_from};
    use crate::graph::{build_graph, laplacian_scale};
    use crate::manifold::ManifoldSpec;
    use crate::spectral::{dense_eigenpairs, dense_spectrum};
    use proptest::prelude::*;

    fn random_graph(n: usize, p: f64, seed: u64) -> AugGraph {
        let mut r = rng::stream(seed, 7);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if r.random::<f64>() < p || j == i + 1 {
                    edges.push((i, j, r.random::<f64>()));
                }
            }
        }
        let s = schedule_from(0.5, 2.0, 1.0, 2).unwrap();
        AugGraph::from_edges(n, 1, s, laplacian_scale(n, 1, &s) / 40.0, edges).unwrap()
    }

    fn random_matrix(n: usize, k: usize, sd: f64, seed: u64) -> DMatrix<f64> {
        let mut r = rng::stream(seed, 3);
        DMatrix::from_fn(n, k, |_, _| {
            let g: f64 = StandardNormal.sample(&mut r);
            sd * g
        })
    }

    #[test]
    fn shifted_target_is_psd() {
        for seed in 0..4 {
            let g = random_graph(60, 0.2, seed);
            let prob = EmbeddingProblem::new(&g, 3).unwrap();
            let lo = dense_spectrum(&prob.target_dense())[0];
            assert!(lo >= -1e-10, "smallest eigenvalue of aI - L: {lo}");
            assert!(prob.a >= g.max_degree());
        }
        let g = random_graph(20, 0.3, 9);
        assert!(EmbeddingProblem::with_shift(&g, 2, 0.5 * g.max_degree()).is_err());
    }

    #[test]
    fn objective_matches_dense_frobenius_norm() {
        let g = random_graph(50, 0.2, 1);
        let prob = EmbeddingProblem::new(&g, 4).unwrap();
        let y = random_matrix(50, 4, 0.3, 2);
        let dense = (&y * y.transpose() - prob.target_dense()).norm_squared();
        assert!((prob.objective(&y) - dense).abs() <= 1e-10 * dense);
    }

    #[test]
    fn minimizer_reaches_the_tail_sum() {
        for seed in 0..4 {
            let n = 40 + 5 * seed as usize;
            let g = random_graph(n, 0.15, seed);
            for k in 1..=5 {
                let prob = EmbeddingProblem::new(&g, k).unwrap();
                let pairs = dense_eigenpairs(&g, k).unwrap();
                let ystar = eckart_young_minimizer(&prob, &pairs).unwrap();
                let spec = dense_spectrum(&g.to_dense());
                let opt = eckart_young_optimum(prob.a, &spec, k);
                let dense = (&ystar * ystar.transpose() - prob.target_dense()).norm_squared();
                assert!((dense - opt).abs() <= 1e-8 * opt, "k={k}: {dense} vs {opt}");
                assert!((prob.objective(&ystar) - opt).abs() <= 1e-8 * opt);
            }
        }
    }

    #[test]
    fn minimizer_beats_random_factors() {
        let g = random_graph(60, 0.15, 4);
        let prob = EmbeddingProblem::new(&g, 3).unwrap();
        let ystar = eckart_young_minimizer(&prob, &dense_eigenpairs(&g, 3).unwrap()).unwrap();
        let best = prob.objective(&ystar);
        let sd = (prob.a / 60.0).sqrt();
        for t in 0..200 {
            let b = random_matrix(60, 3, sd * (0.2 + t as f64 / 100.0), t);
            assert!(prob.objective(&b) >= best);
        }
    }

    #[test]
    fn kernel_column_for_k_one() {
        let g = random_graph(30, 0.3, 5);
        let prob = EmbeddingProblem::new(&g, 1).unwrap();
        let y = eckart_young_minimizer(&prob, &dense_eigenpairs(&g, 1).unwrap()).unwrap();
        let want = (prob.a / 30.0).sqrt();
        assert!(y.iter().all(|v| (v.abs() - want).abs() < 1e-10));
    }

    #[test]
    fn shift_below_eigenvalue_is_rejected() {
        let g = random_graph(30, 0.3, 6);
        let pairs = dense_eigenpairs(&g, 3).unwrap();
        let prob = EmbeddingProblem { graph: &g, k: 3, a: 0.5 * pairs.values[2] };
        assert!(matches!(eckart_young_minimizer(&prob, &pairs), Err(Error::ShiftTooSmall { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = random_graph(40, 0.2, 7);
        let prob = EmbeddingProblem::new(&g, 3).unwrap();
        let h = 1e-5;
        for t in 0..20 {
            let y = random_matrix(40, 3, 0.2, 100 + t);
            let dir = random_matrix(40, 3, 1.0, 200 + t);
            let fd = (prob.objective(&(&y + &dir * h)) - prob.objective(&(&y - &dir * h))) / (2.0 * h);
            let an = prob.gradient(&y).dot(&dir);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-12), "{fd} vs {an}");
        }
    }

    #[test]
    fn minimizer_is_stationary() {
        let g = random_graph(40, 0.2, 8);
        let prob = EmbeddingProblem::new(&g, 2).unwrap();
        let ystar = eckart_young_minimizer(&prob, &dense_eigenpairs(&g, 2).unwrap()).unwrap();
        let res = descend_from(&prob, ystar.clone(), 20, 1e-3 / prob.a).unwrap();
        let f0 = res.trace[0];
        assert!(res.trace.iter().all(|f| (f - f0).abs() <= 1e-12 * f0));
    }

    fn circle_graph(n: usize, seed: u64) -> AugGraph {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(n, seed).unwrap();
        let s = schedule_from(0.45, 2.0, 1.0, 2).unwrap();
        let cloud = augment_in_tube(&spec, &nat, &s, 1, seed).unwrap();
        build_graph(&cloud, &nat.points, &s, 1).unwrap()
    }

    #[test]
    fn descent_converges_to_the_eckart_young_optimum() {
        let g = circle_graph(200, 3);
        let prob = EmbeddingProblem::new(&g, 3).unwrap();
        let spec = dense_spectrum(&g.to_dense());
        let opt = eckart_young_optimum(prob.a, &spec, 3);
        let ystar = eckart_young_minimizer(&prob, &dense_eigenpairs(&g, 3).unwrap()).unwrap();
        let res = factorization_descent(&prob, 1, 20_000, 1.0 / (16.0 * prob.a)).unwrap();
        let last = *res.trace.last().unwrap();
        assert!((last - opt) / opt <= 1e-6, "relative gap {}", (last - opt) / opt);
        assert!(procrustes_distance(&res.y, &ystar) <= 1e-3);
        // below the Lipschitz bound the objective never rises
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
    }

    #[test]
    fn large_steps_diverge() {
        let g = random_graph(30, 0.3, 2);
        let prob = EmbeddingProblem::new(&g, 2).unwrap();
        assert!(matches!(factorization_descent(&prob, 0, 500, 10.0 / prob.a), Err(Error::Divergence { .. })));
        assert!(factorization_descent(&prob, 0, 5, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prop_objective_is_rotation_invariant(seed in 0u64..1000, angle in 0.0f64..6.3) {
            let g = random_graph(25, 0.3, seed % 7);
            let prob = EmbeddingProblem::new(&g, 2).unwrap();
            let y = random_matrix(25, 2, 0.3, seed);
            let (s, c) = angle.sin_cos();
            let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let a = prob.objective(&y);
            prop_assert!((prob.objective(&(&y * q)) - a).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn relu_identity_layers_reproduce_a_linear_map() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0]);
        let net = ReluNet { weights: vec![DMatrix::identity(3, 3), a.clone()], biases: vec![vec![0.0; 3]] };
        let x = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 1.0, 0.0, 2.0]);
        let out = net.forward(&x);
        assert_eq!(out, &x * a.transpose());
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let x = random_matrix(7, 2, 1.0, 1);
        let y = random_matrix(7, 3, 1.0, 2);
        let mut net = ReluNet::init(2, 3, Architecture { depth: 3, width: 5 }, 4).unwrap();
        net.weights[2] = random_matrix(3, 5, 0.5, 5);
        let loss = |n: &ReluNet| 0.5 * (n.forward(&x) - &y).norm_squared() / 7.0;
        let h = 1e-6;
        for layer in 0..3 {
            for (r, c) in [(0, 0), (1, 1), (2, 1)] {
                let mut stepped = net.clone();
                stepped.step(&x, &y, 1.0);
                let analytic = net.weights[layer][(r, c)] - stepped.weights[layer][(r, c)];
                let mut p = net.clone();
                p.weights[layer][(r, c)] += h;
                let mut m = net.clone();
                m.weights[layer][(r, c)] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                assert!((fd - analytic).abs() < 1e-7, "layer {layer} ({r},{c}): {fd} vs {analytic}");
            }
        }
    }

    #[test]
    fn zero_target_gives_the_zero_network() {
        let pts = PointCloud::from_rows(2, [[0.1, 0.2], [0.5, -1.0], [1.0, 1.0]]);
        let target = DMatrix::zeros(3, 2);
        let (net, rep) =
            fit_relu_net(&pts, &target, Architecture { depth: 3, width: 8 }, &TrainOptions { steps: 50, lr: 0.1, seed: 1 })
                .unwrap();
        assert_eq!(rep.sup_error, 0.0);
        assert!(net.weights[2].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_reduces_the_error_and_respects_shapes() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(200, 1).unwrap();
        let target = DMatrix::from_fn(200, 2, |i, j| 0.1 * nat.points.row(i)[j] + 0.05);
        let arch = Architecture { depth: 3, width: 16 };
        let (net, rep) = fit_relu_net(&nat.points, &target, arch, &TrainOptions { steps: 2000, lr: 0.1, seed: 2 }).unwrap();
        assert_eq!(net.weights[0].shape(), (16, 2));
        assert_eq!(net.weights[1].shape(), (16, 16));
        assert_eq!(net.weights[2].shape(), (2, 16));
        assert!(rep.sup_error < 0.2 * target.amax(), "sup error {}", rep.sup_error);
        assert!(rep.trace.last().unwrap() < &rep.trace[1]);
        assert!(rep.complexity.nonzero_count <= 16 * 2 + 16 * 16 + 2 * 16 + 32);
        assert!(ReluNet::init(2, 4, Architecture { depth: 1, width: 8 }, 0).is_err());
        assert!(ReluNet::init(2, 4, Architecture { depth: 3, width: 3 }, 0).is_err());
    }

    #[test]
    fn network_binary_round_trip() {
        let net = ReluNet::init(3, 2, Architecture { depth: 4, width: 6 }, 9).unwrap();
        let mut buf = Vec::new();
        write_net_binary(&net, &mut buf).unwrap();
        assert_eq!(read_net_binary(&mut buf.as_slice()).unwrap(), net);
        buf[0] = b'X';
        assert!(read_net_binary(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn budget_shape_grows_as_delta_shrinks() {
        let (l1, p1) = complexity_budget_shape(3, 2, 1, 0.1);
        let (l2, p2) = complexity_budget_shape(3, 2, 1, 0.01);
        assert!(l2 > l1 && p2 > p1);
        assert!((p1 - 3.0 * 12.0).abs() < 1e-9);
    }
}
