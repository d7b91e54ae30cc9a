//! The ε-connectivity augmentation graph and its scaled Laplacian.
//!
//! Vertices are augmented points; `i ~ j` iff `0 < |x̄_i - x̄_j| <= ε`. The
//! weight of an edge is the empirical secondary similarity
//!
//! ```text
//! ω_ij = (1/N) Σ_k exp(-(|x̄_i - x_k|² + |x̄_j - x_k|²) / (2 ε_w²))
//!      = exp(-|x̄_i - x̄_j|² / (4 ε_w²)) · (1/N) Σ_k exp(-|x_k - mid_ij|² / ε_w²)
//! ```
//!
//! and the Laplacian is `(L f)_i = s Σ_j ω_ij (f_i - f_j)` with
//! `s = 1 / (n ε_w^m ε^{m+2})`, which is positive semidefinite.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{get_f64, get_u64, AugmentedCloud, ParamSchedule};
use crate::points::{dist2, PointCloud};
use crate::{Error, Result};

/// Weights below this are stored as exact zeros.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Naturals farther than `sqrt(NATURAL_CUTOFF) · ε_w` from an edge midpoint
/// contribute less than e^{-50} each and are skipped inside `build_graph`.
const NATURAL_CUTOFF: f64 = 50.0;

const MAX_GRID_DIM: usize = 8;

type CellKey = [i64; MAX_GRID_DIM];

/// Uniform grid hash over a point cloud; cell side equals the query radius, so
/// a radius query only visits the 3^d surrounding cells.
pub struct GridIndex<'a> {
    points: &'a PointCloud,
    cell: f64,
    cells: HashMap<CellKey, Vec<u32>>,
    offsets: Vec<[i64; MAX_GRID_DIM]>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a PointCloud, cell: f64) -> Result<Self> {
        let d = points.dim();
        if d > MAX_GRID_DIM {
            return Err(Error::Unsupported(format!(
                "grid index supports ambient dimension up to {MAX_GRID_DIM}, got {d}"
            )));
        }
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::param("grid cell size must be positive"));
        }
        let mut cells: HashMap<CellKey, Vec<u32>> = HashMap::new();
        for (i, p) in points.rows().enumerate() {
            cells.entry(Self::key_of(p, cell)).or_default().push(i as u32);
        }
        let total = 3usize.pow(d as u32);
        let offsets = (0..total)
            .map(|mut code| {
                let mut o = [0i64; MAX_GRID_DIM];
                for slot in o.iter_mut().take(d) {
                    *slot = (code % 3) as i64 - 1;
                    code /= 3;
                }
                o
            })
            .collect();
        Ok(Self { points, cell, cells, offsets })
    }

    fn key_of(p: &[f64], cell: f64) -> CellKey {
        let mut k = [0i64; MAX_GRID_DIM];
        for (slot, v) in k.iter_mut().zip(p) {
            *slot = (v / cell).floor() as i64;
        }
        k
    }

    /// Calls `f` for every indexed point in the cells around `q`; a superset of
    /// the points within one cell side of `q`.
    pub fn for_each_candidate(&self, q: &[f64], mut f: impl FnMut(usize)) {
        let base = Self::key_of(q, self.cell);
        for off in &self.offsets {
            let mut key = base;
            for (k, o) in key.iter_mut().zip(off) {
                *k += o;
            }
            if let Some(list) = self.cells.get(&key) {
                for &j in list {
                    f(j as usize);
                }
            }
        }
    }

    /// Indices within distance `r <= cell` of `q`, ascending.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        let mut out = Vec::new();
        self.for_each_candidate(q, |j| {
            if dist2(q, self.points.row(j)) <= r2 {
                out.push(j);
            }
        });
        out.sort_unstable();
        out
    }
}

/// Empirical secondary similarity of two points, summed over every natural point.
pub fn edge_weight(xi: &[f64], xj: &[f64], naturals: &PointCloud, eps_w: f64) -> f64 {
    let inv = 1.0 / (2.0 * eps_w * eps_w);
    let s: f64 = naturals.rows().map(|x| (-(dist2(xi, x) + dist2(xj, x)) * inv).exp()).sum();
    s / naturals.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugGraph {
    n: usize,
    m: usize,
    scale: f64,
    sched: ParamSchedule,
    /// Unordered edges `(i, j, ω)` with `i < j`, sorted.
    edges: Vec<(u32, u32, f64)>,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    weight: Vec<f64>,
    degrees: Vec<f64>,
}

/// Laplacian scaling `1 / (n ε_w^m ε^{m+2})`.
pub fn laplacian_scale(n: usize, m: usize, sched: &ParamSchedule) -> f64 {
    1.0 / (n as f64 * sched.eps_w.powi(m as i32) * sched.eps.powi(m as i32 + 2))
}

impl AugGraph {
    /// Assembles a graph from an explicit edge list (`i < j` not required).
    pub fn from_edges(n: usize, m: usize, sched: ParamSchedule, scale: f64, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut list: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::param(format!("invalid edge ({i}, {j}) for {n} vertices")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::param(format!("invalid edge weight {w}")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            list.push((a as u32, b as u32, if w < WEIGHT_FLOOR { 0.0 } else { w }));
        }
        list.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if list.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::param("duplicate edge"));
        }
        Ok(Self::assemble(n, m, sched, scale, list))
    }

    fn assemble(n: usize, m: usize, sched: ParamSchedule, scale: f64, edges: Vec<(u32, u32, f64)>) -> Self {
        let mut count = vec![0usize; n + 1];
        for &(i, j, _) in &edges {
            count[i as usize + 1] += 1;
            count[j as usize + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let row_ptr = count.clone();
        let mut fill = count;
        let mut col = vec![0u32; row_ptr[n]];
        let mut weight = vec![0.0; row_ptr[n]];
        // edges are sorted by (i, j): lower-triangle entries first, then upper,
        // leaves every row's columns ascending
        for &(i, j, w) in &edges {
            let ju = j as usize;
            col[fill[ju]] = i;
            weight[fill[ju]] = w;
            fill[ju] += 1;
        }
        for &(i, j, w) in &edges {
            let iu = i as usize;
            col[fill[iu]] = j;
            weight[fill[iu]] = w;
            fill[iu] += 1;
        }
        let degrees = (0..n).map(|i| scale * weight[row_ptr[i]..row_ptr[i + 1]].iter().sum::<f64>()).collect();
        Self { n, m, scale, sched, edges, row_ptr, col, weight, degrees }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sched(&self) -> &ParamSchedule {
        &self.sched
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `D_ii = s Σ_j ω_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    /// Neighbours of `i` (ascending) with their weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().map(|&j| j as usize).zip(self.weight[r].iter().copied())
    }

    /// The same graph with every weight multiplied by `c`.
    pub fn with_scaled_weights(&self, c: f64) -> Self {
        let edges = self.edges.iter().map(|&(i, j, w)| (i, j, w * c)).collect();
        Self::assemble(self.n, self.m, self.sched, self.scale, edges)
    }

    /// `y = L f`, computed row by row as `s Σ_j ω_ij (f_i - f_j)`.
    pub fn laplacian_apply_into(&self, f: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            let fi = f[i];
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.weight[k] * (fi - f[self.col[k] as usize]);
            }
            *yi = self.scale * s;
        });
    }

    pub fn laplacian_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: f.len() });
        }
        let mut y = vec![0.0; self.n];
        self.laplacian_apply_into(f, &mut y);
        Ok(y)
    }

    /// `E(f) = (s/n) Σ_{i,j} ω_ij (f_i - f_j)²` over ordered pairs.
    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: f.len() });
        }
        let s: f64 = self
            .edges
            .par_chunks(4096)
            .map(|c| c.iter().map(|&(i, j, w)| w * (f[i as usize] - f[j as usize]).powi(2)).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum();
        Ok(2.0 * self.scale * s / self.n as f64)
    }

    /// Connected components over positive-weight edges; label per vertex.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(i, j, w) in &self.edges {
            if w > 0.0 {
                let (a, b) = (find(&mut parent, i as usize), find(&mut parent, j as usize));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut out = vec![0; self.n];
        for v in 0..self.n {
            let r = find(&mut parent, v);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            out[v] = label[r];
        }
        (next, out)
    }

    /// Euclidean-unit indicator vectors of the connected components, largest
    /// component first (ties by lowest vertex). They span the kernel of `L`.
    pub fn kernel_basis(&self) -> Vec<Vec<f64>> {
        let (count, labels) = self.components();
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        // labels are numbered by first vertex, so a stable sort breaks ties by it
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
        order
            .into_iter()
            .map(|c| {
                let v = 1.0 / (sizes[c] as f64).sqrt();
                labels.iter().map(|&l| if l == c { v } else { 0.0 }).collect()
            })
            .collect()
    }

    /// Dense `s (D - A)`; for oracle checks on small graphs.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j, w) in &self.edges {
            let (i, j) = (i as usize, j as usize);
            l[(i, j)] -= w;
            l[(j, i)] -= w;
            l[(i, i)] += w;
            l[(j, j)] += w;
        }
        l * self.scale
    }
}

/// Summary of a graph build; a disconnected graph is reported, not rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub vertices: usize,
    pub edges: usize,
    pub zero_weight_edges: usize,
    pub components: usize,
    pub mean_neighbors: f64,
}

impl GraphReport {
    pub fn of(g: &AugGraph) -> Self {
        Self {
            vertices: g.n,
            edges: g.edges.len(),
            zero_weight_edges: g.edges.iter().filter(|e| e.2 == 0.0).count(),
            components: g.components().0,
            mean_neighbors: 2.0 * g.edges.len() as f64 / g.n.max(1) as f64,
        }
    }

    pub fn disconnected(&self) -> bool {
        self.components > 1
    }
}

/// Builds the augmentation graph over `cloud` with weights from `naturals`.
pub fn build_graph(cloud: &AugmentedCloud, naturals: &PointCloud, sched: &ParamSchedule, m: usize) -> Result<AugGraph> {
    build_graph_from_points(&cloud.points, naturals, sched, m)
}

pub fn build_graph_from_points(points: &PointCloud, naturals: &PointCloud, sched: &ParamSchedule, m: usize) -> Result<AugGraph> {
    let n = points.len();
    if n == 0 {
        return Err(Error::param("cannot build a graph on an empty cloud"));
    }
    if naturals.is_empty() {
        return Err(Error::param("natural sample is empty"));
    }
    if naturals.dim() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: naturals.dim() });
    }
    let eps = sched.eps;
    let eps2 = eps * eps;
    let grid = GridIndex::new(points, eps)?;
    let inv_w2 = 1.0 / (sched.eps_w * sched.eps_w);
    let reach2 = NATURAL_CUTOFF * sched.eps_w * sched.eps_w;
    let nat_grid = GridIndex::new(naturals, reach2.sqrt())?;
    let inv_nat = 1.0 / naturals.len() as f64;
    let d = points.dim();

    let rows: Vec<Vec<(u32, u32, f64)>> = (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let a = points.row(i);
            let mut nbrs = Vec::new();
            grid.for_each_candidate(a, |j| {
                if j > i {
                    let d2 = dist2(a, points.row(j));
                    if d2 > 0.0 && d2 <= eps2 {
                        nbrs.push((j, d2));
                    }
                }
            });
            nbrs.sort_unstable_by_key(|e| e.0);
            let mut mid = vec![0.0; d];
            nbrs.into_iter()
                .map(|(j, d2)| {
                    let b = points.row(j);
                    for k in 0..d {
                        mid[k] = 0.5 * (a[k] + b[k]);
                    }
                    let pair = 0.25 * d2 * inv_w2;
                    let mut s = 0.0;
                    nat_grid.for_each_candidate(&mid, |k| {
                        let r2 = dist2(&mid, naturals.row(k));
                        if r2 <= reach2 {
                            s += (-(pair + r2 * inv_w2)).exp();
                        }
                    });
                    let w = s * inv_nat;
                    (i as u32, j as u32, if w < WEIGHT_FLOOR { 0.0 } else { w })
                })
                .collect()
        })
        .collect();
    let edges: Vec<(u32, u32, f64)> = rows.into_iter().flatten().collect();
    Ok(AugGraph::assemble(n, m, *sched, laplacian_scale(n, m, sched), edges))
}

/// All pairs with `0 < |x_i - x_j| <= eps` by exhaustive scan, `i < j`, sorted.
pub fn brute_force_pairs(points: &PointCloud, eps: f64) -> Vec<(usize, usize)> {
    let n = points.len();
    let eps2 = eps * eps;
    (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| {
                    let d2 = dist2(points.row(i), points.row(j));
                    d2 > 0.0 && d2 <= eps2
                })
                .map(|j| (i, j))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// The `quantile` of every point's distance to its `k`-th nearest neighbour.
pub fn knn_eps(points: &PointCloud, k: usize, quantile: f64) -> Result<f64> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::param(format!("knn needs 1 <= k < n, got k = {k}, n = {n}")));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::param("knn quantile must lie in [0, 1]"));
    }
    let mut kth: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist2(points.row(i), points.row(j))).collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1].sqrt()
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    let pos = ((n - 1) as f64 * quantile).round() as usize;
    Ok(kth[pos])
}

const GRAPH_MAGIC: &[u8; 8] = b"AUGGRF01";

/// Header `(n, m_edges, scale)`, then sorted `(u: i64, v: i64, w: f64)` triples.
pub fn write_graph_binary(g: &AugGraph, w: &mut impl Write) -> Result<()> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&(g.n as u64).to_le_bytes())?;
    w.write_all(&(g.edges.len() as u64).to_le_bytes())?;
    w.write_all(&g.scale.to_le_bytes())?;
    for &(i, j, wt) in &g.edges {
        w.write_all(&(i as i64).to_le_bytes())?;
        w.write_all(&(j as i64).to_le_bytes())?;
        w.write_all(&wt.to_le_bytes())?;
    }
    Ok(())
}

/// Reads `(n, scale, edges)` back from the binary edge list.
pub fn read_graph_binary(r: &mut impl Read) -> Result<(usize, f64, Vec<(usize, usize, f64)>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(Error::Format("not a graph file".into()));
    }
    let n = get_u64(r)? as usize;
    let m = get_u64(r)? as usize;
    let scale = get_f64(r)?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let i = get_u64(r)? as usize;
        let j = get_u64(r)? as usize;
        edges.push((i, j, get_f64(r)?));
    }
    Ok((n, scale, edges))
}

/// Text edge list, one `i j w` line per edge.
pub fn write_graph_text(g: &AugGraph, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# n={} edges={} scale={:.16e}", g.n, g.edges.len(), g.scale)?;
    for &(i, j, wt) in &g.edges {
        writeln!(w, "{i} {j} {wt:.16e}")?;
    }
    Ok(())
}
