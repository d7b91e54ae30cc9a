//! Runs a validated config and turns the result into a report, CSV tables,
//! SVG plots and a summary table.

use auglab::consistency::{
    fit_spectral_rate, rate_plot, realize, run_dumbbell, run_pointwise, run_spectral, DumbbellMode, DumbbellReport,
    PointwiseReport, RateFit, SpectralReport, TestFunction,
};
use auglab::embedding::{
    eckart_young_minimizer, eckart_young_optimum, factorization_descent, procrustes_distance, run_realizability,
    EmbeddingProblem, RealizabilityReport, TrainOptions,
};
use auglab::spectral::{dense_eigenpairs, graph_eigenpairs};
use auglab::svg::{Plot, Style};
use serde::{Deserialize, Serialize};

use crate::config::{parse_selector, ConfigError, ExperimentConfig, ExperimentKind};
use crate::tables::{self, to_csv};

/// Largest n for which the embedding experiment also runs the dense oracle.
pub const DENSE_ORACLE_MAX_N: usize = 600;

/// Every tenth objective value of a descent run is kept.
pub const TRACE_STRIDE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub n: usize,
    pub seed: u64,
    pub k: usize,
    pub eps: f64,
    pub shift: f64,
    pub eigenvalues: Vec<f64>,
    /// `G(Y*)`.
    pub objective_at_minimizer: f64,
    /// `Σ_{l>k} (a - λ_l)²` from the dense spectrum, for small n only.
    pub optimum: Option<f64>,
    pub descent_objective: f64,
    /// `(G(Y_T) - G(Y*)) / G(Y*)`.
    pub relative_gap: f64,
    pub procrustes_distance: f64,
    pub descent_lr: f64,
    /// `(step, objective)` every [`TRACE_STRIDE`] steps and at the end.
    pub trace: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentResult {
    Pointwise { reports: Vec<PointwiseReport> },
    Spectral { reports: Vec<SpectralReport> },
    Rate { selector: String, fit: RateFit, reports: Vec<SpectralReport> },
    Dumbbell { runs: Vec<DumbbellReport>, median_accuracy: f64, naive_median_accuracy: Option<f64> },
    Embedding { runs: Vec<EmbeddingRecord> },
    Realizability { reports: Vec<RealizabilityReport> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub name: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub result: ExperimentResult,
}

impl Report {
    /// The byte form compared by replay.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(auglab::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<auglab::Error> for RunError {
    fn from(e: auglab::Error) -> Self {
        use auglab::Error as E;
        match e {
            // parameters the config allowed but the pipeline rejects
            E::InvalidParameter(_) | E::InvalidDensity(_) | E::Unsupported(_) => RunError::Config(ConfigError(e.to_string())),
            other => RunError::Numerical(other),
        }
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let spec = cfg.spec()?;
    let opts = cfg.options();
    let run = &cfg.run;
    let result = match cfg.experiment.kind {
        ExperimentKind::Pointwise => {
            let f = TestFunction::parse(&run.test_function)?;
            let reports = run
                .sizes
                .iter()
                .map(|&n| run_pointwise(&spec, &cfg.schedule_for(n, &spec)?, n, &f, &run.seeds, &opts))
                .collect::<auglab::Result<_>>()?;
            ExperimentResult::Pointwise { reports }
        }
        ExperimentKind::Spectral | ExperimentKind::Rate => {
            let reports: Vec<SpectralReport> = run
                .sizes
                .iter()
                .map(|&n| run_spectral(&spec, &cfg.schedule_for(n, &spec)?, n, run.k, &run.seeds, &opts))
                .collect::<auglab::Result<_>>()?;
            if cfg.experiment.kind == ExperimentKind::Rate {
                let fit = fit_spectral_rate(&reports, parse_selector(&run.selector)?)?;
                ExperimentResult::Rate { selector: run.selector.clone(), fit, reports }
            } else {
                ExperimentResult::Spectral { reports }
            }
        }
        ExperimentKind::Dumbbell => {
            let mut modes = vec![cfg.dumbbell_mode()];
            if run.compare_naive && modes[0] != DumbbellMode::Naive {
                modes.push(DumbbellMode::Naive);
            }
            let mut runs = Vec::new();
            for mode in &modes {
                for &n in &run.sizes {
                    for &seed in &run.seeds {
                        runs.push(run_dumbbell(n, *mode, seed, &opts)?);
                    }
                }
            }
            let acc = |naive: bool| {
                let v: Vec<f64> = runs
                    .iter()
                    .filter(|r| (r.mode == DumbbellMode::Naive) == naive && r.n == *run.sizes.last().unwrap())
                    .map(|r| r.accuracy)
                    .collect();
                (!v.is_empty()).then(|| median(&v))
            };
            let primary_naive = modes[0] == DumbbellMode::Naive;
            ExperimentResult::Dumbbell {
                median_accuracy: acc(primary_naive).unwrap_or(f64::NAN),
                naive_median_accuracy: if primary_naive { None } else { acc(true) },
                runs,
            }
        }
        ExperimentKind::Embedding => {
            let mut runs = Vec::new();
            for &n in &run.sizes {
                for &seed in &run.seeds {
                    runs.push(embedding_run(cfg, &spec, n, seed)?);
                }
            }
            ExperimentResult::Embedding { runs }
        }
        ExperimentKind::Realizability => {
            let e = &cfg.embedding;
            let train = TrainOptions { steps: e.steps, lr: e.lr, seed: 0 };
            let reports = run
                .sizes
                .iter()
                .map(|&n| {
                    run_realizability(
                        &spec,
                        &cfg.schedule_for(n, &spec)?,
                        n,
                        run.k,
                        e.depth,
                        &e.widths,
                        &run.seeds,
                        &train,
                        e.fresh_points,
                    )
                })
                .collect::<auglab::Result<_>>()?;
            ExperimentResult::Realizability { reports }
        }
    };
    Ok(Report {
        tool: "auglab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name: cfg.experiment.name.clone(),
        config_hash: cfg.hash8(),
        seeds: run.seeds.clone(),
        result,
    })
}

fn embedding_run(
    cfg: &ExperimentConfig,
    spec: &auglab::manifold::ManifoldSpec,
    n: usize,
    seed: u64,
) -> Result<EmbeddingRecord, RunError> {
    let k = cfg.run.k;
    let sched = cfg.schedule_for(n, spec)?;
    let real = realize(spec, &sched, n, cfg.run.per_parent, seed)?;
    let pairs = graph_eigenpairs(&real.graph, k, &cfg.options().solver)?;
    let prob = EmbeddingProblem::new(&real.graph, k)?;
    let ystar = eckart_young_minimizer(&prob, &pairs)?;
    let g_star = prob.objective(&ystar);
    let optimum = if n <= DENSE_ORACLE_MAX_N {
        let full = dense_eigenpairs(&real.graph, n)?;
        Some(eckart_young_optimum(prob.a, &full.values, k))
    } else {
        None
    };
    let lr = cfg.embedding.descent_lr_factor / prob.a;
    let desc = factorization_descent(&prob, seed, cfg.embedding.descent_steps, lr)?;
    let last = *desc.trace.last().expect("traces start with the initial objective");
    let mut trace: Vec<(usize, f64)> = desc.trace.iter().copied().enumerate().step_by(TRACE_STRIDE).collect();
    if trace.last().map(|t| t.0) != Some(desc.trace.len() - 1) {
        trace.push((desc.trace.len() - 1, last));
    }
    Ok(EmbeddingRecord {
        n,
        seed,
        k,
        eps: sched.eps,
        shift: prob.a,
        eigenvalues: pairs.values.clone(),
        objective_at_minimizer: g_star,
        optimum,
        descent_objective: last,
        relative_gap: (last - g_star) / g_star,
        procrustes_distance: procrustes_distance(&desc.y, &ystar),
        descent_lr: lr,
        trace,
    })
}

/// A file to write into the run directory.
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact { name: name.into(), contents }
}

fn log_plot(title: &str, x: &str, y: &str) -> Plot {
    Plot::new(title, x, y).log_log()
}

pub fn artifacts(report: &Report) -> Vec<Artifact> {
    let mut out = Vec::new();
    match &report.result {
        ExperimentResult::Pointwise { reports } => {
            out.push(artifact("pointwise.csv", to_csv(&tables::pointwise_rows(reports))));
            out.push(artifact("pointwise_seeds.csv", to_csv(&tables::pointwise_seed_rows(reports))));
            let ns: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
            let mut p = log_plot("pointwise error", "n", "error");
            p.add("median max", Style::Line, ns.clone(), reports.iter().map(|r| r.max_abs_error).collect());
            p.add("median mean", Style::Line, ns, reports.iter().map(|r| r.mean_abs_error).collect());
            out.push(artifact("pointwise.svg", p.render()));
        }
        ExperimentResult::Spectral { reports } => spectral_artifacts(reports, &mut out),
        ExperimentResult::Rate { fit, reports, selector } => {
            spectral_artifacts(reports, &mut out);
            out.push(artifact("rate.csv", to_csv(&fit.grid)));
            out.push(artifact("rate.svg", rate_plot(fit, &format!("rate of {selector}"))));
        }
        ExperimentResult::Dumbbell { runs, .. } => {
            out.push(artifact("dumbbell.csv", to_csv(&tables::dumbbell_rows(runs))));
            for r in runs {
                let stem = format!("dumbbell_n{}_seed{}_{}", r.n, r.seed, tables::mode_name(&r.mode));
                out.push(artifact(format!("{stem}.csv"), to_csv(&tables::dumbbell_point_rows(r))));
                out.push(artifact(format!("{stem}.svg"), r.svg.clone()));
            }
        }
        ExperimentResult::Embedding { runs } => {
            out.push(artifact("embedding.csv", to_csv(&tables::embedding_rows(runs))));
            out.push(artifact("embedding_trace.csv", to_csv(&tables::trace_rows(runs))));
            let mut p = log_plot("factorization descent", "step + 1", "relative gap to G(Y*)");
            for r in runs {
                let (xs, ys) = r
                    .trace
                    .iter()
                    .map(|&(s, g)| ((s + 1) as f64, (g - r.objective_at_minimizer) / r.objective_at_minimizer))
                    .unzip();
                p.add(format!("n={} seed={}", r.n, r.seed), Style::Line, xs, ys);
            }
            out.push(artifact("embedding.svg", p.render()));
        }
        ExperimentResult::Realizability { reports } => {
            out.push(artifact("realizability.csv", to_csv(&tables::realizability_rows(reports))));
            let mut p = log_plot("ReLU fit of Y*", "width", "sup error");
            for r in reports {
                let ws: Vec<f64> = r.widths.iter().map(|w| w.arch.width as f64).collect();
                p.add(format!("train n={}", r.n), Style::Line, ws.clone(), r.widths.iter().map(|w| w.median_sup_error).collect());
                p.add(format!("fresh n={}", r.n), Style::Line, ws, r.widths.iter().map(|w| w.median_fresh_error).collect());
            }
            out.push(artifact("realizability.svg", p.render()));
        }
    }
    out
}

fn spectral_artifacts(reports: &[SpectralReport], out: &mut Vec<Artifact>) {
    out.push(artifact("spectral.csv", to_csv(&tables::spectral_rows(reports))));
    out.push(artifact("spectral_seeds.csv", to_csv(&tables::spectral_seed_rows(reports))));
    let k = reports[0].k;
    let ns: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
    let mut vals = log_plot("relative eigenvalue error", "n", "error");
    let mut vecs = log_plot("aligned eigenvector error", "n", "error");
    for l in 1..k {
        vals.add(format!("l = {}", l + 1), Style::Line, ns.clone(), reports.iter().map(|r| r.eigval_errors[l]).collect());
        vecs.add(format!("l = {}", l + 1), Style::Line, ns.clone(), reports.iter().map(|r| r.eigvec_errors[l]).collect());
    }
    out.push(artifact("eigval_errors.svg", vals.render()));
    out.push(artifact("eigvec_errors.svg", vecs.render()));
}

fn e(v: f64) -> String {
    format!("{v:.4e}")
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<String>| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

/// The one-screen table printed after a run.
pub fn summary(report: &Report) -> String {
    let mut s = format!("{} [{}]\n", report.name, report.config_hash);
    match &report.result {
        ExperimentResult::Pointwise { reports } => s.push_str(&table(
            &["n", "eps", "max_err", "mean_err", "target"],
            reports
                .iter()
                .map(|r| vec![r.n.to_string(), e(r.eps), e(r.max_abs_error), e(r.mean_abs_error), e(r.target_scale)])
                .collect(),
        )),
        ExperimentResult::Spectral { reports } => s.push_str(&spectral_table(reports)),
        ExperimentResult::Rate { selector, fit, reports } => {
            s.push_str(&spectral_table(reports));
            s.push_str(&format!("rate of {selector}: slope {:.4} (r2 {:.4})\n", fit.slope, fit.r2));
        }
        ExperimentResult::Dumbbell { runs, median_accuracy, naive_median_accuracy } => {
            s.push_str(&table(
                &["n", "seed", "mode", "components", "lambda2", "accuracy"],
                runs.iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            r.seed.to_string(),
                            tables::mode_name(&r.mode).into(),
                            r.components.to_string(),
                            e(r.lambda[1]),
                            format!("{:.4}", r.accuracy),
                        ]
                    })
                    .collect(),
            ));
            s.push_str(&format!("dumbbell accuracy: median {median_accuracy:.4}"));
            if let Some(nv) = naive_median_accuracy {
                s.push_str(&format!(", naive {nv:.4}"));
            }
            s.push('\n');
        }
        ExperimentResult::Embedding { runs } => s.push_str(&table(
            &["n", "seed", "shift", "G(Y*)", "rel_gap", "procrustes"],
            runs.iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.seed.to_string(),
                        e(r.shift),
                        e(r.objective_at_minimizer),
                        e(r.relative_gap),
                        e(r.procrustes_distance),
                    ]
                })
                .collect(),
        )),
        ExperimentResult::Realizability { reports } => s.push_str(&table(
            &["n", "depth", "width", "sup_err", "fresh_err"],
            reports
                .iter()
                .flat_map(|r| {
                    r.widths.iter().map(move |w| {
                        vec![
                            r.n.to_string(),
                            w.arch.depth.to_string(),
                            w.arch.width.to_string(),
                            e(w.median_sup_error),
                            e(w.median_fresh_error),
                        ]
                    })
                })
                .collect(),
        )),
    }
    s
}

fn spectral_table(reports: &[SpectralReport]) -> String {
    let k = reports[0].k;
    let mut header = vec!["n".to_string(), "eps".to_string()];
    for l in 2..=k.min(4) {
        header.push(format!("val_err{l}"));
        header.push(format!("vec_err{l}"));
    }
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string(), e(r.eps)];
            for l in 1..k.min(4) {
                row.push(e(r.eigval_errors[l]));
                row.push(e(r.eigvec_errors[l]));
            }
            row
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    table(&h, rows)
}
