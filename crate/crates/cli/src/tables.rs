//! Flat CSV tables derived from reports. Floats are written with 17
//! significant digits so every table parses back to the exact values.

use std::io::Read;

use auglab::consistency::{DumbbellMode, DumbbellReport, PointwiseReport, RatePoint, SpectralReport};
use auglab::embedding::RealizabilityReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::experiment::EmbeddingRecord;

pub trait CsvRow: DeserializeOwned {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // parses back through `f64::from_str`
        format!("{v}")
    }
}

pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = R::HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.fields().join(","));
        out.push('\n');
    }
    out
}

pub fn from_csv<R: CsvRow>(r: impl Read) -> csv::Result<Vec<R>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub n: usize,
    pub eps: f64,
    pub test_function: String,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub target_scale: f64,
    pub f_c3_proxy: f64,
}

impl CsvRow for PointwiseRow {
    const HEADER: &'static [&'static str] =
        &["n", "eps", "test_function", "max_abs_error", "mean_abs_error", "target_scale", "f_c3_proxy"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            float(self.eps),
            self.test_function.clone(),
            float(self.max_abs_error),
            float(self.mean_abs_error),
            float(self.target_scale),
            float(self.f_c3_proxy),
        ]
    }
}

pub fn pointwise_rows(reports: &[PointwiseReport]) -> Vec<PointwiseRow> {
    reports
        .iter()
        .map(|r| PointwiseRow {
            n: r.n,
            eps: r.eps,
            test_function: r.test_function.clone(),
            max_abs_error: r.max_abs_error,
            mean_abs_error: r.mean_abs_error,
            target_scale: r.target_scale,
            f_c3_proxy: r.f_c3_proxy,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSeedRow {
    pub n: usize,
    pub seed: u64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

impl CsvRow for PointwiseSeedRow {
    const HEADER: &'static [&'static str] = &["n", "seed", "max_abs_error", "mean_abs_error"];
    fn fields(&self) -> Vec<String> {
        vec![self.n.to_string(), self.seed.to_string(), float(self.max_abs_error), float(self.mean_abs_error)]
    }
}

pub fn pointwise_seed_rows(reports: &[PointwiseReport]) -> Vec<PointwiseSeedRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.per_seed.iter().map(move |s| PointwiseSeedRow {
                n: r.n,
                seed: s.seed,
                max_abs_error: s.max_abs_error,
                mean_abs_error: s.mean_abs_error,
            })
        })
        .collect()
}

/// One eigen-index of one size; `l` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub n: usize,
    pub eps: f64,
    pub l: usize,
    pub continuum_value: f64,
    pub predicted_graph_value: f64,
    pub eigval_error: f64,
    pub eigvec_error: f64,
}

impl CsvRow for SpectralRow {
    const HEADER: &'static [&'static str] =
        &["n", "eps", "l", "continuum_value", "predicted_graph_value", "eigval_error", "eigvec_error"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            float(self.eps),
            self.l.to_string(),
            float(self.continuum_value),
            float(self.predicted_graph_value),
            float(self.eigval_error),
            float(self.eigvec_error),
        ]
    }
}

pub fn spectral_rows(reports: &[SpectralReport]) -> Vec<SpectralRow> {
    reports
        .iter()
        .flat_map(|r| {
            (0..r.k).map(move |l| SpectralRow {
                n: r.n,
                eps: r.eps,
                l: l + 1,
                continuum_value: r.continuum_values[l],
                predicted_graph_value: r.predicted_graph_values[l],
                eigval_error: r.eigval_errors[l],
                eigvec_error: r.eigvec_errors[l],
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSeedRow {
    pub n: usize,
    pub seed: u64,
    pub l: usize,
    pub components: usize,
    pub graph_value: f64,
    pub eigval_error: f64,
    pub eigvec_error: f64,
}

impl CsvRow for SpectralSeedRow {
    const HEADER: &'static [&'static str] =
        &["n", "seed", "l", "components", "graph_value", "eigval_error", "eigvec_error"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.seed.to_string(),
            self.l.to_string(),
            self.components.to_string(),
            float(self.graph_value),
            float(self.eigval_error),
            float(self.eigvec_error),
        ]
    }
}

pub fn spectral_seed_rows(reports: &[SpectralReport]) -> Vec<SpectralSeedRow> {
    let mut rows = Vec::new();
    for r in reports {
        for s in &r.per_seed {
            for l in 0..r.k {
                rows.push(SpectralSeedRow {
                    n: r.n,
                    seed: s.seed,
                    l: l + 1,
                    components: s.components,
                    graph_value: s.graph_values[l],
                    eigval_error: s.eigval_errors[l],
                    eigvec_error: s.eigvec_errors[l],
                });
            }
        }
    }
    rows
}

impl CsvRow for RatePoint {
    const HEADER: &'static [&'static str] = &["n", "eps", "error"];
    fn fields(&self) -> Vec<String> {
        vec![self.n.to_string(), float(self.eps), float(self.error)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumbbellRow {
    pub n: usize,
    pub seed: u64,
    pub mode: String,
    pub eps: f64,
    pub lambda2: f64,
    pub edges: usize,
    pub components: usize,
    pub threshold: f64,
    pub accuracy: f64,
}

impl CsvRow for DumbbellRow {
    const HEADER: &'static [&'static str] =
        &["n", "seed", "mode", "eps", "lambda2", "edges", "components", "threshold", "accuracy"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.seed.to_string(),
            self.mode.clone(),
            float(self.eps),
            float(self.lambda2),
            self.edges.to_string(),
            self.components.to_string(),
            float(self.threshold),
            float(self.accuracy),
        ]
    }
}

pub fn mode_name(m: &DumbbellMode) -> &'static str {
    match m {
        DumbbellMode::Coupled { .. } => "coupled",
        DumbbellMode::Naive => "naive",
    }
}

pub fn dumbbell_rows(runs: &[DumbbellReport]) -> Vec<DumbbellRow> {
    runs.iter()
        .map(|r| DumbbellRow {
            n: r.n,
            seed: r.seed,
            mode: mode_name(&r.mode).into(),
            eps: r.eps,
            lambda2: r.lambda[1],
            edges: r.edges,
            components: r.components,
            threshold: r.threshold,
            accuracy: r.accuracy,
        })
        .collect()
}

/// Per-point data of one dumbbell run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumbbellPointRow {
    pub index: usize,
    pub eigvec2: f64,
    pub cluster: u8,
    pub truth: u8,
}

impl CsvRow for DumbbellPointRow {
    const HEADER: &'static [&'static str] = &["index", "eigvec2", "cluster", "truth"];
    fn fields(&self) -> Vec<String> {
        vec![self.index.to_string(), float(self.eigvec2), self.cluster.to_string(), self.truth.to_string()]
    }
}

pub fn dumbbell_point_rows(r: &DumbbellReport) -> Vec<DumbbellPointRow> {
    (0..r.eigvec2.len())
        .map(|i| DumbbellPointRow { index: i, eigvec2: r.eigvec2[i], cluster: r.cluster_labels[i], truth: r.truth[i] })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub n: usize,
    pub seed: u64,
    pub k: usize,
    pub shift: f64,
    pub objective_at_minimizer: f64,
    /// Empty when the dense oracle was skipped.
    pub optimum: Option<f64>,
    pub descent_objective: f64,
    pub relative_gap: f64,
    pub procrustes_distance: f64,
}

impl CsvRow for EmbeddingRow {
    const HEADER: &'static [&'static str] = &[
        "n",
        "seed",
        "k",
        "shift",
        "objective_at_minimizer",
        "optimum",
        "descent_objective",
        "relative_gap",
        "procrustes_distance",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.seed.to_string(),
            self.k.to_string(),
            float(self.shift),
            float(self.objective_at_minimizer),
            self.optimum.map(float).unwrap_or_default(),
            float(self.descent_objective),
            float(self.relative_gap),
            float(self.procrustes_distance),
        ]
    }
}

pub fn embedding_rows(runs: &[EmbeddingRecord]) -> Vec<EmbeddingRow> {
    runs.iter()
        .map(|r| EmbeddingRow {
            n: r.n,
            seed: r.seed,
            k: r.k,
            shift: r.shift,
            objective_at_minimizer: r.objective_at_minimizer,
            optimum: r.optimum,
            descent_objective: r.descent_objective,
            relative_gap: r.relative_gap,
            procrustes_distance: r.procrustes_distance,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub seed: u64,
    pub step: usize,
    pub objective: f64,
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] = &["n", "seed", "step", "objective"];
    fn fields(&self) -> Vec<String> {
        vec![self.n.to_string(), self.seed.to_string(), self.step.to_string(), float(self.objective)]
    }
}

pub fn trace_rows(runs: &[EmbeddingRecord]) -> Vec<TraceRow> {
    runs.iter()
        .flat_map(|r| {
            r.trace.iter().map(move |&(step, objective)| TraceRow { n: r.n, seed: r.seed, step, objective })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizabilityRow {
    pub n: usize,
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub sup_error: f64,
    pub fro_error: f64,
    pub fresh_error: f64,
    pub max_abs_weight: f64,
    pub nonzero_count: usize,
}

impl CsvRow for RealizabilityRow {
    const HEADER: &'static [&'static str] = &[
        "n",
        "depth",
        "width",
        "seed",
        "sup_error",
        "fro_error",
        "fresh_error",
        "max_abs_weight",
        "nonzero_count",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.depth.to_string(),
            self.width.to_string(),
            self.seed.to_string(),
            float(self.sup_error),
            float(self.fro_error),
            float(self.fresh_error),
            float(self.max_abs_weight),
            self.nonzero_count.to_string(),
        ]
    }
}

pub fn realizability_rows(reports: &[RealizabilityReport]) -> Vec<RealizabilityRow> {
    let mut rows = Vec::new();
    for r in reports {
        for w in &r.widths {
            for s in &w.per_seed {
                rows.push(RealizabilityRow {
                    n: r.n,
                    depth: w.arch.depth,
                    width: w.arch.width,
                    seed: s.seed,
                    sup_error: s.sup_error,
                    fro_error: s.fro_error,
                    fresh_error: s.fresh_error,
                    max_abs_weight: s.complexity.max_abs_weight,
                    nonzero_count: s.complexity.nonzero_count,
                });
            }
        }
    }
    rows
}
