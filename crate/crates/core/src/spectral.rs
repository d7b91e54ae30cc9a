//! Low end of the Laplacian spectrum.
//!
//! [`smallest_eigenpairs`] runs Lanczos with full reorthogonalization and
//! locking: each pass starts from a fresh random vector orthogonal to the
//! already-locked eigenvectors, builds a Krylov basis, and locks the ascending
//! run of converged Ritz pairs. A final pass checks that no smaller eigenvalue
//! was skipped, which matters for repeated eigenvalues such as the kernel of a
//! disconnected graph. [`dense_eigenpairs`] is the independent oracle.
//!
//! Eigenvectors are returned with unit L²(ϑ_n) norm, `(1/n) Σ v_i² = 1`.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::graph::AugGraph;
use crate::linalg::{axpy, dot, norm, orthogonalize_against, scale, tridiagonal_eigen};
use crate::{rng, Error, Result};

/// A real symmetric linear operator given by its action.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for AugGraph {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.laplacian_apply_into(x, y);
    }
}

/// Dense symmetric matrix as an operator (tests and small problems).
impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..n).map(|j| self[(i, j)] * x[j]).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Columns, each of length n with unit L²(ϑ_n) norm.
    pub vectors: Vec<Vec<f64>>,
    /// `‖L u - λ u‖₂` for the Euclidean-unit `u`, which equals the L²(ϑ_n)
    /// residual of the L²(ϑ_n)-unit vector.
    pub residuals: Vec<f64>,
    /// Absolute residual threshold every pair met.
    pub tolerance: f64,
}

impl EigenPairs {
    pub fn n(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Column `l` rescaled to unit Euclidean norm.
    pub fn euclidean_vector(&self, l: usize) -> Vec<f64> {
        let mut v = self.vectors[l].clone();
        scale(1.0 / (self.n() as f64).sqrt(), &mut v);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual tolerance; the absolute threshold is `tol · ‖L‖` with
    /// `‖L‖` estimated by the largest Ritz value seen.
    pub tol: f64,
    /// Cap on the Krylov dimension of a single pass.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, seed: 0 }
    }
}

const MAX_RESTARTS: usize = 3;

/// Normalizes to unit L²(ϑ_n) norm and fixes the sign so the entry of largest
/// magnitude is positive.
fn finish_vector(mut u: Vec<f64>) -> Vec<f64> {
    let n = u.len() as f64;
    let nu = norm(&u);
    let (mut big, mut at) = (0.0, 0);
    for (i, v) in u.iter().enumerate() {
        if v.abs() > big {
            big = v.abs();
            at = i;
        }
    }
    let s = if u[at] < 0.0 { -1.0 } else { 1.0 };
    scale(s * n.sqrt() / nu, &mut u);
    u
}

fn random_unit_orthogonal(n: usize, r: &mut rng::Rng, against: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
        orthogonalize_against(&mut v, against.iter().map(Vec::as_slice));
        let nv = norm(&v);
        if nv > 1e-8 {
            scale(1.0 / nv, &mut v);
            return Some(v);
        }
    }
    None
}

struct PassResult {
    ritz: Vec<(f64, Vec<f64>, f64)>,
    norm_est: f64,
}

/// One Lanczos pass of dimension at most `dim` on the operator deflated by `locked`.
fn lanczos_pass(op: &dyn SymmetricOperator, locked: &[Vec<f64>], dim: usize, r: &mut rng::Rng, want: usize) -> Result<PassResult> {
    let n = op.dim();
    let dim = dim.min(n - locked.len());
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut alpha = Vec::with_capacity(dim);
    let mut beta: Vec<f64> = Vec::with_capacity(dim);
    let Some(start) = random_unit_orthogonal(n, r, locked) else {
        return Ok(PassResult { ritz: vec![], norm_est: 0.0 });
    };
    basis.push(start);
    let mut w = vec![0.0; n];
    let mut norm_est: f64 = 0.0;
    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        norm_est = norm_est.max(a.abs()).max(norm(&w));
        orthogonalize_against(&mut w, locked.iter().chain(basis.iter()).map(Vec::as_slice));
        if basis.len() == dim {
            break;
        }
        let b = norm(&w);
        if b > 1e-12 * norm_est.max(f64::MIN_POSITIVE) {
            beta.push(b);
            let mut q = w.clone();
            scale(1.0 / b, &mut q);
            basis.push(q);
        } else {
            // invariant subspace: continue from a fresh direction, decoupled block
            let mut all: Vec<Vec<f64>> = locked.to_vec();
            all.extend(basis.iter().cloned());
            match random_unit_orthogonal(n, r, &all) {
                Some(q) => {
                    beta.push(0.0);
                    basis.push(q);
                }
                None => break,
            }
        }
    }
    let kdim = basis.len();
    let (vals, vecs) = tridiagonal_eigen(&alpha, &beta)?;
    // Ritz vectors only for the lowest candidates
    let take = (want + 4).min(kdim);
    let mut ritz = Vec::with_capacity(take);
    let mut lu = vec![0.0; n];
    for i in 0..take {
        let mut y = vec![0.0; n];
        for (jj, q) in basis.iter().enumerate() {
            axpy(vecs[jj * kdim + i], q, &mut y);
        }
        let ny = norm(&y);
        scale(1.0 / ny, &mut y);
        op.apply(&y, &mut lu);
        let lam = dot(&lu, &y);
        axpy(-lam, &y, &mut lu);
        let res = norm(&lu);
        ritz.push((lam, y, res));
    }
    norm_est = norm_est.max(vals.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    Ok(PassResult { ritz, norm_est })
}

/// The `k` smallest eigenpairs of a symmetric positive semidefinite operator.
pub fn smallest_eigenpairs_op(op: &dyn SymmetricOperator, k: usize, opts: &SolverOptions) -> Result<EigenPairs> {
    smallest_eigenpairs_deflated(op, k, opts, Vec::new())
}

/// Like [`smallest_eigenpairs_op`], with `kernel` (orthonormal, Euclidean-unit
/// vectors known to satisfy `L v = 0`) locked before the first pass.
pub fn smallest_eigenpairs_deflated(
    op: &dyn SymmetricOperator,
    k: usize,
    opts: &SolverOptions,
    kernel: Vec<Vec<f64>>,
) -> Result<EigenPairs> {
    let n = op.dim();
    if k == 0 || k > n.min(64) {
        return Err(Error::param(format!("k must lie in [1, min(n, 64)], got k = {k}, n = {n}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param("solver tolerance must be positive"));
    }
    if let Some(bad) = kernel.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
    }
    if kernel.len() >= k {
        let mut kernel = kernel;
        kernel.truncate(k);
        return finalize(op, kernel, opts.tol);
    }
    let mut r = rng::stream(opts.seed, 0x5eed);
    let mut locked_vals: Vec<f64> = vec![0.0; kernel.len()];
    let mut locked: Vec<Vec<f64>> = kernel;
    let mut norm_est: f64 = 0.0;
    let mut dim = (4 * k + 40).max(80).min(opts.max_iter.max(k + 1));
    let mut stalls = 0;
    let mut verified = false;

    while !verified {
        let want = k.saturating_sub(locked.len()).max(1);
        let pass = lanczos_pass(op, &locked, dim, &mut r, want)?;
        norm_est = norm_est.max(pass.norm_est);
        let thresh = opts.tol * norm_est;
        let mut gained = 0;
        if locked.len() < k {
            for (lam, y, res) in pass.ritz {
                if locked.len() == k || res > thresh {
                    break;
                }
                locked.push(y);
                locked_vals.push(lam);
                gained += 1;
            }
        } else {
            // verification: any converged Ritz value below the largest locked one
            // means an eigenvector was missed
            let top = locked_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (lam, y, res) in pass.ritz {
                if res > thresh || lam >= top - thresh {
                    break;
                }
                locked.push(y);
                locked_vals.push(lam);
                gained += 1;
            }
            if gained == 0 {
                verified = true;
            } else {
                let mut order: Vec<usize> = (0..locked.len()).collect();
                order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
                order.truncate(k);
                locked = order.iter().map(|&i| locked[i].clone()).collect();
                locked_vals = order.iter().map(|&i| locked_vals[i]).collect();
            }
            continue;
        }
        if gained == 0 {
            stalls += 1;
            if stalls > MAX_RESTARTS || dim >= opts.max_iter.min(n - locked.len()) {
                return Err(Error::NoConvergence { pair: locked.len() });
            }
            dim = (2 * dim).min(opts.max_iter).min(n - locked.len());
        } else {
            stalls = 0;
        }
    }
    finalize(op, locked, opts.tol * norm_est)
}

/// Sorts, re-normalizes, recomputes residuals and enforces the threshold.
fn finalize(op: &dyn SymmetricOperator, vecs: Vec<Vec<f64>>, thresh: f64) -> Result<EigenPairs> {
    let n = op.dim();
    let mut tmp = vec![0.0; n];
    let mut items: Vec<(f64, Vec<f64>, f64)> = vecs
        .into_iter()
        .map(|mut u| {
            let nu = norm(&u);
            scale(1.0 / nu, &mut u);
            op.apply(&u, &mut tmp);
            let lam = dot(&tmp, &u);
            axpy(-lam, &u, &mut tmp);
            (lam, u, norm(&tmp))
        })
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (l, it) in items.iter().enumerate() {
        if it.2 > thresh {
            return Err(Error::NoConvergence { pair: l });
        }
    }
    Ok(EigenPairs {
        values: items.iter().map(|it| it.0).collect(),
        residuals: items.iter().map(|it| it.2).collect(),
        vectors: items.into_iter().map(|it| finish_vector(it.1)).collect(),
        tolerance: thresh,
    })
}

/// Lowest `k` eigenpairs of the graph Laplacian.
pub fn smallest_eigenpairs(g: &AugGraph, k: usize, tol: f64, max_iter: usize) -> Result<EigenPairs> {
    graph_eigenpairs(g, k, &SolverOptions { tol, max_iter, seed: 0 })
}

/// Lowest `k` eigenpairs of the graph Laplacian. On a disconnected graph the
/// component indicators (largest component first) are locked as exact kernel
/// vectors, since a large cluster of zero and near-zero values stalls Lanczos.
pub fn graph_eigenpairs(g: &AugGraph, k: usize, opts: &SolverOptions) -> Result<EigenPairs> {
    let kernel = g.kernel_basis();
    if kernel.len() > 1 {
        smallest_eigenpairs_deflated(g, k, opts, kernel)
    } else {
        smallest_eigenpairs_op(g, k, opts)
    }
}

/// Full dense eigendecomposition; the independent oracle for small graphs.
pub fn dense_eigenpairs(g: &AugGraph, k: usize) -> Result<EigenPairs> {
    dense_eigenpairs_of(&g.to_dense(), k)
}

pub fn dense_eigenpairs_of(m: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    let n = m.nrows();
    if k == 0 || k > n {
        return Err(Error::param(format!("k must lie in [1, n], got k = {k}, n = {n}")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut tmp = vec![0.0; n];
    for &i in &order {
        let u: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let lam = eig.eigenvalues[i];
        m.apply(&u, &mut tmp);
        axpy(-lam, &u, &mut tmp);
        residuals.push(norm(&tmp));
        values.push(lam);
        vectors.push(finish_vector(u));
    }
    let tolerance = residuals.iter().copied().fold(0.0, f64::max);
    Ok(EigenPairs { values, vectors, residuals, tolerance })
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest eigenvalue of the operator, estimated from above: the top Ritz value
/// of a Lanczos pass plus its residual.
pub fn largest_eigenvalue_bound(op: &dyn SymmetricOperator, dim: usize, seed: u64) -> Result<f64> {
    struct Neg<'a>(&'a dyn SymmetricOperator);
    impl SymmetricOperator for Neg<'_> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            self.0.apply(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let mut r = rng::stream(seed, 0x70);
    let pass = lanczos_pass(&Neg(op), &[], dim.max(2), &mut r, 1)?;
    Ok(pass.ritz.first().map_or(0.0, |(lam, _, res)| -lam + res))
}

/// Max of the quotient `fᵀLf / fᵀf` over the span of `basis` (the columns need
/// not be orthonormal).
pub fn max_rayleigh_quotient(op: &dyn SymmetricOperator, basis: &[Vec<f64>]) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut v = b.clone();
        orthogonalize_against(&mut v, q.iter().map(Vec::as_slice));
        let nv = norm(&v);
        scale(1.0 / nv, &mut v);
        q.push(v);
    }
    let l = q.len();
    let n = op.dim();
    let mut tmp = vec![0.0; n];
    let lq: Vec<Vec<f64>> = q
        .iter()
        .map(|v| {
            op.apply(v, &mut tmp);
            tmp.clone()
        })
        .collect();
    let small = DMatrix::from_fn(l, l, |i, j| 0.5 * (dot(&q[i], &lq[j]) + dot(&q[j], &lq[i])));
    dense_spectrum(&small).last().copied().unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourantFischerReport {
    /// Max quotient over the span of the first `l` eigenvectors, `l = 1..=k`.
    pub optimal_max_quotients: Vec<f64>,
    pub optimal_violations: usize,
    pub random_trials: usize,
    pub random_violations: usize,
    /// Smallest `max quotient - λ_l` seen over random subspaces.
    pub min_random_margin: f64,
    pub tol: f64,
}

/// Samples the min-max characterization `λ_l = min_{dim V = l} max_{f ∈ V} R(f)`
/// with `R(f) = ½ E(f) / ‖f‖²_{L²(ϑ_n)} = fᵀLf / fᵀf`.
pub fn courant_fischer_check(g: &AugGraph, pairs: &EigenPairs, trials: usize, seed: u64, tol: f64) -> CourantFischerReport {
    let n = g.n();
    let mut optimal = Vec::with_capacity(pairs.k());
    let mut optimal_violations = 0;
    for l in 1..=pairs.k() {
        let q = max_rayleigh_quotient(g, &pairs.vectors[..l]);
        if (q - pairs.values[l - 1]).abs() > tol {
            optimal_violations += 1;
        }
        optimal.push(q);
    }
    let mut r = rng::stream(seed, 0xcf);
    let mut random_violations = 0;
    let mut min_margin = f64::INFINITY;
    for t in 0..trials {
        let l = 1 + t % pairs.k();
        let basis: Vec<Vec<f64>> = (0..l).map(|_| (0..n).map(|_| r.random::<f64>() - 0.5).collect()).collect();
        let margin = max_rayleigh_quotient(g, &basis) - pairs.values[l - 1];
        min_margin = min_margin.min(margin);
        if margin < -tol {
            random_violations += 1;
        }
    }
    CourantFischerReport {
        optimal_max_quotients: optimal,
        optimal_violations,
        random_trials: trials,
        random_violations,
        min_random_margin: min_margin,
        tol,
    }
}

/// Groups consecutive indices whose values differ by less than `tol`.
pub fn eigen_clusters(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] >= tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Default cluster tolerance `max(1e-8, 1e-6 · λ_k)`.
pub fn default_cluster_tol(values: &[f64]) -> f64 {
    1e-8f64.max(1e-6 * values.last().copied().unwrap_or(0.0))
}

/// Orthogonal `Q` maximizing `tr(Qᵀ M)`, i.e. `U Vᵀ` from the SVD of `M`.
/// For a non-square `M` the result has orthonormal columns.
pub fn polar_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V");
    u * vt
}

fn to_matrix(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// L²(ϑ_n) distance between two vectors.
pub fn l2_theta_dist(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub aligned: EigenPairs,
    pub clusters: Vec<Range<usize>>,
    /// Per-column L²(ϑ_n) distance to the reference before and after alignment.
    pub distance_before: Vec<f64>,
    pub distance_after: Vec<f64>,
}

/// Rotates each degenerate cluster of computed eigenvectors onto the reference
/// by orthogonal Procrustes; isolated pairs only get a sign flip.
pub fn align_sign_and_pair(computed: &EigenPairs, reference: &[Vec<f64>], cluster_tol: Option<f64>) -> Result<Alignment> {
    let tol = cluster_tol.unwrap_or_else(|| default_cluster_tol(&computed.values));
    let clusters = eigen_clusters(&computed.values, tol);
    align_with_clusters(computed, reference, clusters)
}

pub fn align_with_clusters(computed: &EigenPairs, reference: &[Vec<f64>], clusters: Vec<Range<usize>>) -> Result<Alignment> {
    let k = computed.k();
    if reference.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: reference.len() });
    }
    let n = computed.n();
    if let Some(bad) = reference.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
    }
    if clusters.iter().map(|c| c.len()).sum::<usize>() != k || clusters.windows(2).any(|w| w[0].end != w[1].start) {
        return Err(Error::param("clusters must partition 0..k in order"));
    }
    let before: Vec<f64> = (0..k).map(|l| l2_theta_dist(&computed.vectors[l], &reference[l])).collect();
    let mut aligned = computed.clone();
    for c in &clusters {
        let cm = to_matrix(&computed.vectors[c.clone()]);
        let rm = to_matrix(&reference[c.clone()]);
        let q = polar_factor(&(cm.transpose() * &rm));
        let rotated = cm * q;
        for (off, l) in c.clone().enumerate() {
            aligned.vectors[l] = rotated.column(off).iter().copied().collect();
        }
    }
    let after = (0..k).map(|l| l2_theta_dist(&aligned.vectors[l], &reference[l])).collect();
    Ok(Alignment { aligned, clusters, distance_before: before, distance_after: after })
}

/// CSV with one row per pair: index, value, residual.
pub fn write_pairs_csv(p: &EigenPairs, w: &mut impl Write) -> Result<()> {
    writeln!(w, "index,value,residual")?;
    for l in 0..p.k() {
        writeln!(w, "{},{:.16e},{:.16e}", l + 1, p.values[l], p.residuals[l])?;
    }
    Ok(())
}

/// Parses the CSV written by [`write_pairs_csv`] into `(values, residuals)`.
pub fn read_pairs_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut vals = Vec::new();
    let mut res = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::Format(format!("bad eigenpair row: {line}")));
        }
        let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(e.to_string()));
        vals.push(p(f[1])?);
        res.push(p(f[2])?);
    }
    Ok((vals, res))
}

const MATRIX_MAGIC: &[u8; 8] = b"AUGMAT01";

/// Header (rows, cols), then row-major little-endian f64 entries.
pub fn write_matrix_binary(cols: &[Vec<f64>], w: &mut impl Write) -> Result<()> {
    let n = cols.first().map_or(0, Vec::len);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(cols.len() as u64).to_le_bytes())?;
    for i in 0..n {
        for c in cols {
            w.write_all(&c[i].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_binary(r: &mut impl std::io::Read) -> Result<Vec<Vec<f64>>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format("not a matrix file".into()));
    }
    let n = crate::augmentation::get_u64(r)? as usize;
    let k = crate::augmentation::get_u64(r)? as usize;
    let mut cols = vec![vec![0.0; n]; k];
    for i in 0..n {
        for c in cols.iter_mut() {
            c[i] = crate::augmentation::get_f64(r)?;
        }
    }
    Ok(cols)
}
