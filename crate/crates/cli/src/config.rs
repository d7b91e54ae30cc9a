//! Experiment configs: a sectioned key-value file (or the same structure as
//! JSON), resolved with defaults and validated before anything runs.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use auglab::augmentation::{eps_from_n, naive_schedule, schedule_from, EpsRule, ParamSchedule};
use auglab::consistency::{DumbbellMode, ErrorSelector, RunOptions, TestFunction};
use auglab::manifold::{CustomDensity, Density, ManifoldSpec, ProfileCurve};
use auglab::spectral::SolverOptions;
use ini::Ini;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Pointwise,
    Spectral,
    Rate,
    Dumbbell,
    Embedding,
    Realizability,
}

impl ExperimentKind {
    fn parse(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "pointwise" => Self::Pointwise,
            "spectral" => Self::Spectral,
            "rate" => Self::Rate,
            "dumbbell" => Self::Dumbbell,
            "embedding" => Self::Embedding,
            "realizability" => Self::Realizability,
            other => return Err(bad(format!("unknown experiment `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pointwise => "pointwise",
            Self::Spectral => "spectral",
            Self::Rate => "rate",
            Self::Dumbbell => "dumbbell",
            Self::Embedding => "embedding",
            Self::Realizability => "realizability",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    /// circle | sphere | torus | dumbbell
    pub kind: String,
    /// circle/sphere: radius; torus: major, minor; dumbbell: lobe radius,
    /// neck radius, lobe center (empty for the standard profile).
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub ambient_dim: Option<usize>,
    /// `uniform`, or `cos:<amp>` on the circle for `∝ 1 + amp cos θ`.
    #[serde(default = "default_density")]
    pub density: String,
}

fn default_density() -> String {
    "uniform".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsRuleName {
    /// `c (log n / n)^{1/(m+4)}`
    Log,
    /// `n^{-1/(m+4)}`
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Coupled,
    Naive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub eps_rule: Option<EpsRuleName>,
    #[serde(default = "one")]
    pub eps_scale: f64,
    #[serde(default = "two")]
    pub tau: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "coupled")]
    pub mode: ModeName,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn coupled() -> ModeName {
    ModeName::Coupled
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "one_usize")]
    pub per_parent: usize,
    #[serde(default = "five")]
    pub k: usize,
    #[serde(default = "default_test_function")]
    pub test_function: String,
    /// Error entering the rate fit: `eigval:<l>`, `eigvec:<l>`, `eigvec_mean`
    /// or `eigvec_rms:<lo>:<hi>`.
    #[serde(default = "default_selector")]
    pub selector: String,
    /// Dumbbell only: also run the naive schedule on the same seeds.
    #[serde(default)]
    pub compare_naive: bool,
}

fn one_usize() -> usize {
    1
}
fn five() -> usize {
    5
}
fn default_test_function() -> String {
    "cos:1".into()
}
fn default_selector() -> String {
    "eigvec_rms:2:3".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    2000
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_fresh")]
    pub fresh_points: usize,
    #[serde(default = "default_descent_steps")]
    pub descent_steps: usize,
    /// Descent step size as a multiple of `1 / a`.
    #[serde(default = "default_descent_lr_factor")]
    pub descent_lr_factor: f64,
}

fn default_depth() -> usize {
    4
}
fn default_widths() -> Vec<usize> {
    vec![16, 64, 256]
}
fn default_steps() -> usize {
    1500
}
fn default_lr() -> f64 {
    0.05
}
fn default_fresh() -> usize {
    500
}
fn default_descent_steps() -> usize {
    5000
}
fn default_descent_lr_factor() -> f64 {
    1.0 / 16.0
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            depth: default_depth(),
            widths: default_widths(),
            steps: default_steps(),
            lr: default_lr(),
            fresh_points: default_fresh(),
            descent_steps: default_descent_steps(),
            descent_lr_factor: default_descent_lr_factor(),
        }
    }
}

/// A resolved experiment config. Its JSON form (minus `output_dir`) is the
/// canonical text that names the output directory and drives replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub manifold: ManifoldSection,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleSection,
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
}

fn default_schedule() -> ScheduleSection {
    ScheduleSection { eps: None, eps_rule: None, eps_scale: 1.0, tau: 2.0, eta: 1.0, mode: ModeName::Coupled }
}

/// Reads a config file: JSON when it parses as a JSON object, the sectioned
/// key-value format otherwise.
pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| bad(format!("config JSON: {e}")))?
    } else {
        parse_ini(text)?
    };
    validate(&cfg)?;
    Ok(cfg)
}

struct Sections {
    ini: Ini,
    seen: BTreeSet<(String, String)>,
}

impl Sections {
    fn raw(&mut self, section: &str, key: &str) -> Option<String> {
        let v = self.ini.section(Some(section)).and_then(|s| s.get(key)).map(|v| v.trim().to_string());
        if v.is_some() {
            self.seen.insert((section.to_string(), key.to_string()));
        }
        v
    }

    fn required(&mut self, section: &str, key: &str) -> Result<String, ConfigError> {
        self.raw(section, key).ok_or_else(|| bad(format!("missing key `{key}` in [{section}]")))
    }

    fn num<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| bad(format!("[{section}] {key}: cannot parse `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        let inner = v.trim_start_matches('[').trim_end_matches(']');
        inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(format!("[{section}] {key}: cannot parse `{s}`"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

fn parse_ini(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| bad(format!("config syntax: {e}")))?;
    let mut s = Sections { ini, seen: BTreeSet::new() };

    let experiment = ExperimentSection {
        name: s.required("experiment", "name")?,
        kind: ExperimentKind::parse(&s.required("experiment", "kind")?)?,
        output_dir: s.raw("experiment", "output_dir").map_or_else(default_output_dir, PathBuf::from),
    };
    let manifold = ManifoldSection {
        kind: s.required("manifold", "kind")?,
        params: s.list("manifold", "params")?.unwrap_or_default(),
        ambient_dim: s.num("manifold", "ambient_dim")?,
        density: s.raw("manifold", "density").unwrap_or_else(default_density),
    };
    let eps_rule = match s.raw("schedule", "eps_rule").as_deref() {
        None => None,
        Some("log") => Some(EpsRuleName::Log),
        Some("plain") => Some(EpsRuleName::Plain),
        Some(other) => return Err(bad(format!("[schedule] eps_rule must be `log` or `plain`, got `{other}`"))),
    };
    let mode = match s.raw("schedule", "mode").as_deref() {
        None | Some("coupled") => ModeName::Coupled,
        Some("naive") => ModeName::Naive,
        Some(other) => return Err(bad(format!("[schedule] mode must be `coupled` or `naive`, got `{other}`"))),
    };
    let schedule = ScheduleSection {
        eps: s.num("schedule", "eps")?,
        eps_rule,
        eps_scale: s.num("schedule", "eps_scale")?.unwrap_or(1.0),
        tau: s.num("schedule", "tau")?.unwrap_or(2.0),
        eta: s.num("schedule", "eta")?.unwrap_or(1.0),
        mode,
    };
    let compare_naive = match s.raw("run", "compare_naive").as_deref() {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(bad(format!("[run] compare_naive must be true or false, got `{other}`"))),
    };
    let run = RunSection {
        sizes: s.list("run", "sizes")?.ok_or_else(|| bad("missing key `sizes` in [run]"))?,
        seeds: s.list("run", "seeds")?.ok_or_else(|| bad("missing key `seeds` in [run]"))?,
        per_parent: s.num("run", "per_parent")?.unwrap_or(1),
        k: s.num("run", "k")?.unwrap_or(5),
        test_function: s.raw("run", "test_function").unwrap_or_else(default_test_function),
        selector: s.raw("run", "selector").unwrap_or_else(default_selector),
        compare_naive,
    };
    let solver = SolverSection {
        tol: s.num("solver", "tol")?.unwrap_or_else(default_tol),
        max_iter: s.num("solver", "max_iter")?.unwrap_or_else(default_max_iter),
    };
    let d = EmbeddingSection::default();
    let embedding = EmbeddingSection {
        depth: s.num("embedding", "depth")?.unwrap_or(d.depth),
        widths: s.list("embedding", "widths")?.unwrap_or(d.widths),
        steps: s.num("embedding", "steps")?.unwrap_or(d.steps),
        lr: s.num("embedding", "lr")?.unwrap_or(d.lr),
        fresh_points: s.num("embedding", "fresh_points")?.unwrap_or(d.fresh_points),
        descent_steps: s.num("embedding", "descent_steps")?.unwrap_or(d.descent_steps),
        descent_lr_factor: s.num("embedding", "descent_lr_factor")?.unwrap_or(d.descent_lr_factor),
    };

    // typos should not silently fall back to defaults
    for (sec, props) in s.ini.iter() {
        let sec = sec.unwrap_or("");
        for (key, _) in props.iter() {
            if !s.seen.contains(&(sec.to_string(), key.to_string())) {
                return Err(bad(format!("unknown key `{key}` in [{sec}]")));
            }
        }
    }

    Ok(ExperimentConfig { experiment, manifold, schedule, run, solver, embedding })
}

pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let name = &cfg.experiment.name;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
        return Err(bad("experiment name must be nonempty and use only [A-Za-z0-9_.-]"));
    }
    let run = &cfg.run;
    if run.sizes.is_empty() {
        return Err(bad("sizes must be nonempty"));
    }
    if run.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("sizes must be strictly increasing"));
    }
    if run.sizes[0] < 2 {
        return Err(bad("sizes must be at least 2"));
    }
    if run.seeds.is_empty() {
        return Err(bad("seeds must be nonempty"));
    }
    if run.seeds.iter().collect::<BTreeSet<_>>().len() != run.seeds.len() {
        return Err(bad("seeds must be distinct"));
    }
    if run.per_parent == 0 {
        return Err(bad("per_parent must be positive"));
    }
    if run.k == 0 {
        return Err(bad("k must be positive"));
    }
    let sch = &cfg.schedule;
    match (sch.eps, sch.eps_rule) {
        (Some(_), Some(_)) => return Err(bad("eps and eps_rule are mutually exclusive")),
        (None, None) => return Err(bad("one of eps or eps_rule is required")),
        (Some(e), None) if !(e > 0.0 && e <= 1.0) => return Err(bad("eps must lie in (0, 1]")),
        _ => {}
    }
    if !(sch.eps_scale > 0.0) || !(sch.tau > 0.0) || !(sch.eta > 0.0) {
        return Err(bad("eps_scale, tau and eta must be positive"));
    }
    if !(cfg.solver.tol > 0.0) || cfg.solver.max_iter == 0 {
        return Err(bad("solver tol and max_iter must be positive"));
    }
    manifold_spec(&cfg.manifold)?;
    match cfg.experiment.kind {
        ExperimentKind::Pointwise => {
            TestFunction::parse(&run.test_function).map_err(|e| bad(e.to_string()))?;
        }
        ExperimentKind::Rate => {
            parse_selector(&run.selector)?;
            if run.sizes.len() < 4 {
                return Err(bad("a rate fit needs at least 4 sizes"));
            }
            if run.seeds.len() < 5 {
                return Err(bad("a rate fit needs at least 5 seeds"));
            }
        }
        ExperimentKind::Dumbbell => {
            if cfg.manifold.kind != "dumbbell" || !cfg.manifold.params.is_empty() {
                return Err(bad("the dumbbell experiment uses the standard dumbbell profile: kind = dumbbell, no params"));
            }
            if sch.eps.is_some() || sch.eps_rule != Some(EpsRuleName::Plain) {
                return Err(bad("the dumbbell experiment fixes eps = n^(-1/6): set eps_rule = plain"));
            }
            if run.sizes[0] < 500 {
                return Err(bad("the dumbbell experiment needs sizes >= 500"));
            }
        }
        ExperimentKind::Embedding | ExperimentKind::Realizability => {
            let e = &cfg.embedding;
            if e.depth < 2 || e.widths.is_empty() || e.widths.contains(&0) {
                return Err(bad("embedding depth must be at least 2 and widths nonempty and positive"));
            }
            if e.steps == 0 || !(e.lr > 0.0) || e.descent_steps == 0 || !(e.descent_lr_factor > 0.0) {
                return Err(bad("embedding steps and learning rates must be positive"));
            }
        }
        ExperimentKind::Spectral => {}
    }
    if run.k >= run.sizes[0] {
        return Err(bad("k must be smaller than every size"));
    }
    Ok(())
}

pub fn manifold_spec(m: &ManifoldSection) -> Result<ManifoldSpec, ConfigError> {
    let p = &m.params;
    let arity = |want: &[usize]| {
        if want.contains(&p.len()) {
            Ok(())
        } else {
            Err(bad(format!("[manifold] {} takes {:?} params, got {}", m.kind, want, p.len())))
        }
    };
    let err = |e: auglab::Error| bad(format!("[manifold] {e}"));
    let mut spec = match m.kind.as_str() {
        "circle" => {
            arity(&[0, 1])?;
            ManifoldSpec::circle(p.first().copied().unwrap_or(1.0)).map_err(err)?
        }
        "sphere" => {
            arity(&[0, 1])?;
            ManifoldSpec::sphere(p.first().copied().unwrap_or(1.0)).map_err(err)?
        }
        "torus" => {
            arity(&[2])?;
            ManifoldSpec::torus(p[0], p[1]).map_err(err)?
        }
        "dumbbell" => {
            arity(&[0, 3])?;
            let profile = if p.is_empty() { ProfileCurve::standard() } else { ProfileCurve::new(p[0], p[1], p[2]).map_err(err)? };
            ManifoldSpec::dumbbell(profile)
        }
        other => return Err(bad(format!("unknown manifold `{other}`"))),
    };
    if let Some(d) = m.ambient_dim {
        spec = spec.with_ambient_dim(d).map_err(err)?;
    }
    if m.density != "uniform" {
        let amp: f64 = m
            .density
            .strip_prefix("cos:")
            .and_then(|a| a.parse().ok())
            .ok_or_else(|| bad(format!("[manifold] density must be `uniform` or `cos:<amp>`, got `{}`", m.density)))?;
        if m.kind != "circle" {
            return Err(bad("[manifold] the cos density is only defined on the circle"));
        }
        if !(amp.abs() < 1.0) {
            return Err(bad("[manifold] the cos density needs |amp| < 1"));
        }
        let len = 2.0 * PI * p.first().copied().unwrap_or(1.0);
        let dens = CustomDensity::new(m.density.clone(), (1.0 - amp.abs()) / len, (1.0 + amp.abs()) / len, move |x: &[f64]| {
            (1.0 + amp * x[1].atan2(x[0]).cos()) / len
        })
        .map_err(err)?;
        spec = spec.with_density(Density::Custom(dens)).map_err(err)?;
    }
    Ok(spec)
}

pub fn parse_selector(s: &str) -> Result<ErrorSelector, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let idx = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("selector `{s}`: bad index `{v}`")));
    Ok(match parts.as_slice() {
        ["eigval", l] => ErrorSelector::Eigval(idx(l)?),
        ["eigvec", l] => ErrorSelector::Eigvec(idx(l)?),
        ["eigvec_mean"] => ErrorSelector::EigvecMean,
        ["eigvec_rms", lo, hi] => ErrorSelector::EigvecRms(idx(lo)?, idx(hi)?),
        _ => return Err(bad(format!("unknown selector `{s}`"))),
    })
}

impl ExperimentConfig {
    /// JSON with `output_dir` removed; where results land does not change them.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("configs serialize");
        if let Some(e) = v.get_mut("experiment").and_then(|e| e.as_object_mut()) {
            e.remove("output_dir");
        }
        serde_json::to_string(&v).expect("configs serialize")
    }

    pub fn hash8(&self) -> String {
        hash8(self.canonical_json().as_bytes())
    }

    /// `<output_dir>/<name>-<hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.experiment.output_dir.join(format!("{}-{}", self.experiment.name, self.hash8()))
    }

    pub fn spec(&self) -> Result<ManifoldSpec, ConfigError> {
        manifold_spec(&self.manifold)
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            per_parent: self.run.per_parent,
            solver: SolverOptions { tol: self.solver.tol, max_iter: self.solver.max_iter, seed: 0 },
        }
    }

    pub fn eps_for(&self, n: usize, m: usize) -> f64 {
        let s = &self.schedule;
        match (s.eps, s.eps_rule) {
            (Some(e), _) => e,
            (None, Some(EpsRuleName::Plain)) => eps_from_n(n as f64, m, s.eps_scale, EpsRule::Plain),
            (None, _) => eps_from_n(n as f64, m, s.eps_scale, EpsRule::LogFactor),
        }
    }

    pub fn schedule_for(&self, n: usize, spec: &ManifoldSpec) -> auglab::Result<ParamSchedule> {
        let eps = self.eps_for(n, spec.intrinsic_dim());
        match self.schedule.mode {
            ModeName::Coupled => schedule_from(eps, self.schedule.tau, self.schedule.eta, spec.ambient_dim()),
            ModeName::Naive => naive_schedule(eps, spec.ambient_dim()),
        }
    }

    pub fn dumbbell_mode(&self) -> DumbbellMode {
        match self.schedule.mode {
            ModeName::Coupled => DumbbellMode::Coupled { tau: self.schedule.tau, eta: self.schedule.eta },
            ModeName::Naive => DumbbellMode::Naive,
        }
    }
}

pub fn hash8(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(4).map(|b| format!("{b:02x}")).collect()
}
