//! Reference spectra of the limit operator `Δ_aug f = -½ div(ρ² ∇f)`.
//!
//! With uniform density the operator is `ρ²/2` times the Laplace–Beltrami
//! operator, so the circle and sphere spectra are rescaled Fourier and
//! spherical-harmonic spectra. Eigenfunctions are unit in L²(M) against the
//! surface measure. A finite-difference solver covers non-uniform densities on
//! the circle.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::manifold::{ChartField, Constant, Density, Fourier, Jet, ManifoldKind, ManifoldSpec, Polynomial3, SpherePolynomial};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub m: usize,
    /// `∫_{R^m} exp(-|y|²) dy = π^{m/2}`
    pub alpha: f64,
    /// Volume of the unit m-ball.
    pub sigma_m: f64,
    /// `σ_m / (m + 2) = ∫_{B^m} |y¹|² dy`
    pub beta: f64,
}

impl Constants {
    pub fn alpha_beta(&self) -> f64 {
        self.alpha * self.beta
    }
}

/// `Γ(m/2 + 1)` for integer `m`, by the recurrence from `Γ(1) = 1` or `Γ(½) = √π`.
fn gamma_half_plus_one(m: usize) -> f64 {
    let mut g = if m % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if m % 2 == 0 { 1.0 } else { 0.5 };
    let target = m as f64 / 2.0 + 1.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

pub fn constants(m: usize) -> Result<Constants> {
    if m == 0 {
        return Err(Error::param("intrinsic dimension must be at least 1"));
    }
    let alpha = PI.powf(m as f64 / 2.0);
    let sigma_m = alpha / gamma_half_plus_one(m);
    Ok(Constants { m, alpha, sigma_m, beta: sigma_m / (m as f64 + 2.0) })
}

/// The value a graph eigenvalue should approach: `λ / (αβ)`.
pub fn predicted_graph_eigenvalue(lambda_cont: f64, consts: &Constants) -> f64 {
    lambda_cont / consts.alpha_beta()
}

#[derive(Clone)]
pub struct ContinuumSpectrum {
    pub values: Vec<f64>,
    pub eigenfunctions: Vec<Arc<dyn ChartField>>,
    pub labels: Vec<String>,
    /// `γ_l`: half the distance to the nearest distinct neighbouring value.
    pub gaps: Vec<f64>,
    /// Index ranges of exactly repeated values.
    pub clusters: Vec<Range<usize>>,
}

impl std::fmt::Debug for ContinuumSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContinuumSpectrum")
            .field("values", &self.values)
            .field("labels", &self.labels)
            .field("gaps", &self.gaps)
            .field("clusters", &self.clusters)
            .finish()
    }
}

impl ContinuumSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn multiplicity(&self, l: usize) -> usize {
        self.clusters.iter().find(|c| c.contains(&l)).map_or(1, |c| c.len())
    }

    /// Clusters restricted to the first `k` indices; the last one may be cut.
    pub fn clusters_upto(&self, k: usize) -> Vec<Range<usize>> {
        self.clusters
            .iter()
            .filter(|c| c.start < k)
            .map(|c| c.start..c.end.min(k))
            .collect()
    }
}

/// Groups of equal values and `γ_l = ½ min |λ_l - neighbouring distinct value|`.
fn gaps_and_clusters(values: &[f64], rel_tol: f64) -> (Vec<f64>, Vec<Range<usize>>) {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut clusters = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > rel_tol * scale {
            clusters.push(start..i);
            start = i;
        }
    }
    let distinct: Vec<f64> = clusters.iter().map(|c| values[c.start]).collect();
    let mut gaps = vec![f64::INFINITY; values.len()];
    for (ci, c) in clusters.iter().enumerate() {
        let mut g = f64::INFINITY;
        if ci > 0 {
            g = g.min(distinct[ci] - distinct[ci - 1]);
        }
        if ci + 1 < distinct.len() {
            g = g.min(distinct[ci + 1] - distinct[ci]);
        }
        for l in c.clone() {
            gaps[l] = 0.5 * g;
        }
    }
    (gaps, clusters)
}

/// Real spherical harmonics of degree `l ≤ 3` on the unit sphere, unit in L²(S²).
fn real_harmonics(l: usize) -> Vec<(String, Polynomial3)> {
    let s = |c: f64| c.sqrt();
    let p = |terms: Vec<(f64, [u32; 3])>| Polynomial3::new(terms);
    match l {
        0 => vec![("Y00".into(), p(vec![(s(1.0 / (4.0 * PI)), [0, 0, 0])]))],
        1 => {
            let c = s(3.0 / (4.0 * PI));
            vec![
                ("Y1-1".into(), p(vec![(c, [0, 1, 0])])),
                ("Y10".into(), p(vec![(c, [0, 0, 1])])),
                ("Y11".into(), p(vec![(c, [1, 0, 0])])),
            ]
        }
        2 => {
            let a = s(15.0 / (4.0 * PI));
            let b = s(5.0 / (16.0 * PI));
            let c = s(15.0 / (16.0 * PI));
            vec![
                ("Y2-2".into(), p(vec![(a, [1, 1, 0])])),
                ("Y2-1".into(), p(vec![(a, [0, 1, 1])])),
                ("Y20".into(), p(vec![(2.0 * b, [0, 0, 2]), (-b, [2, 0, 0]), (-b, [0, 2, 0])])),
                ("Y21".into(), p(vec![(a, [1, 0, 1])])),
                ("Y22".into(), p(vec![(c, [2, 0, 0]), (-c, [0, 2, 0])])),
            ]
        }
        3 => {
            let a = s(35.0 / (32.0 * PI));
            let b = s(105.0 / (4.0 * PI));
            let c = s(21.0 / (32.0 * PI));
            let d = s(7.0 / (16.0 * PI));
            let e = s(105.0 / (16.0 * PI));
            vec![
                ("Y3-3".into(), p(vec![(3.0 * a, [2, 1, 0]), (-a, [0, 3, 0])])),
                ("Y3-2".into(), p(vec![(b, [1, 1, 1])])),
                ("Y3-1".into(), p(vec![(4.0 * c, [0, 1, 2]), (-c, [2, 1, 0]), (-c, [0, 3, 0])])),
                ("Y30".into(), p(vec![(2.0 * d, [0, 0, 3]), (-3.0 * d, [2, 0, 1]), (-3.0 * d, [0, 2, 1])])),
                ("Y31".into(), p(vec![(4.0 * c, [1, 0, 2]), (-c, [3, 0, 0]), (-c, [1, 2, 0])])),
                ("Y32".into(), p(vec![(e, [2, 0, 1]), (-e, [0, 2, 1])])),
                ("Y33".into(), p(vec![(a, [3, 0, 0]), (-3.0 * a, [1, 2, 0])])),
            ]
        }
        _ => vec![],
    }
}

const MAX_SPHERE_DEGREE: usize = 3;

/// The lowest `k` eigenpairs of `Δ_aug` (plus, internally, enough of the next
/// level to define every gap).
pub fn continuum_spectrum(spec: &ManifoldSpec, k: usize) -> Result<ContinuumSpectrum> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if let Density::Custom(_) = spec.density() {
        return Err(Error::Unsupported(
            "closed-form spectra need a uniform density; use grid_reference_spectrum on the circle".into(),
        ));
    }
    let rho = 1.0 / spec.area();
    let mut values = Vec::new();
    let mut fns: Vec<Arc<dyn ChartField>> = Vec::new();
    let mut labels = Vec::new();
    match spec.kind() {
        ManifoldKind::Circle { radius } => {
            let r = *radius;
            values.push(0.0);
            fns.push(Arc::new(Constant(1.0 / (2.0 * PI * r).sqrt())));
            labels.push("const".to_string());
            let amp = 1.0 / (PI * r).sqrt();
            let mut j = 1.0;
            // one extra frequency so the last requested value has a gap
            while values.len() < k + 2 {
                let lam = 0.5 * rho * rho * (j / r).powi(2);
                for (name, phase) in [("cos", 0.0), ("sin", -0.5 * PI)] {
                    values.push(lam);
                    fns.push(Arc::new(Fourier { freq: j, phase, amplitude: amp }));
                    labels.push(format!("{name}({j}θ)"));
                }
                j += 1.0;
            }
        }
        ManifoldKind::Sphere { radius } => {
            let r = *radius;
            let mut l = 0;
            while values.len() < k + 1 {
                if l > MAX_SPHERE_DEGREE + 1 {
                    return Err(Error::Unsupported(format!(
                        "sphere eigenfunctions are implemented through degree {MAX_SPHERE_DEGREE} (k <= 16)"
                    )));
                }
                let lam = 0.5 * rho * rho * (l * (l + 1)) as f64 / (r * r);
                if l <= MAX_SPHERE_DEGREE {
                    for (name, poly) in real_harmonics(l) {
                        values.push(lam);
                        fns.push(Arc::new(SpherePolynomial { poly, amplitude: 1.0 / r }));
                        labels.push(name);
                    }
                } else {
                    // only the value is needed, to define the gap of degree 3
                    values.push(lam);
                }
                l += 1;
            }
            if k > fns.len() {
                return Err(Error::Unsupported(format!(
                    "sphere eigenfunctions are implemented through degree {MAX_SPHERE_DEGREE} (k <= 16)"
                )));
            }
        }
        _ => {
            return Err(Error::Unsupported(format!("no closed-form spectrum on the {}", spec.name())));
        }
    }
    // clusters keep their full multiplicity even when k cuts through one
    let (gaps, clusters) = gaps_and_clusters(&values, 1e-12);
    let keep = k;
    values.truncate(keep);
    fns.truncate(keep);
    labels.truncate(keep);
    Ok(ContinuumSpectrum {
        gaps: gaps[..keep].to_vec(),
        clusters: clusters.into_iter().filter(|c| c.start < keep).collect(),
        values,
        eigenfunctions: fns,
        labels,
    })
}

/// Piecewise-linear periodic function on a uniform θ-grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl ChartField for GridFunction {
    fn jet(&self, chart: &[f64]) -> Jet {
        let m = self.values.len();
        let h = 2.0 * PI / m as f64;
        let t = chart[0].rem_euclid(2.0 * PI) / h;
        let i = (t.floor() as usize) % m;
        let frac = t - t.floor();
        let (a, b) = (self.values[i], self.values[(i + 1) % m]);
        Jet { value: a + frac * (b - a), grad: [(b - a) / h, 0.0], ..Jet::default() }
    }
}

fn grid_size(eps: f64) -> usize {
    ((2.0 * PI * 20.0 / eps).ceil() as usize).max(64)
}

/// Reference spectrum on a circle with an arbitrary density: second-order
/// conservative finite differences of `-½ (ρ² f′)′ / r²` on a periodic grid
/// of spacing `ε / 20`, solved densely.
pub fn grid_reference_spectrum(spec: &ManifoldSpec, k: usize, eps: f64) -> Result<ContinuumSpectrum> {
    let ManifoldKind::Circle { radius } = spec.kind() else {
        return Err(Error::Unsupported("the grid reference solver only covers the circle".into()));
    };
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    let r = *radius;
    let m = grid_size(eps);
    if k > m {
        return Err(Error::param("k exceeds the grid size"));
    }
    let h = 2.0 * PI / m as f64;
    let rho_at = |th: f64| spec.density_at(&spec.point_from_chart(&[th]));
    let flux: Vec<f64> = (0..m).map(|i| rho_at((i as f64 + 0.5) * h).powi(2)).collect();
    let c = 1.0 / (2.0 * h * h * r * r);
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let up = flux[i];
        let down = flux[(i + m - 1) % m];
        a[(i, i)] += c * (up + down);
        let (ip, im) = ((i + 1) % m, (i + m - 1) % m);
        a[(i, ip)] -= c * up;
        a[(i, im)] -= c * down;
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let all: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let (gaps, clusters) = gaps_and_clusters(&all[..(k + 2).min(m)], 1e-9);
    let mut fns: Vec<Arc<dyn ChartField>> = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let col = eig.eigenvectors.column(i);
        // unit in L²(M): Σ f² h r = 1
        let nrm = (col.iter().map(|v| v * v).sum::<f64>() * h * r).sqrt();
        fns.push(Arc::new(GridFunction { values: col.iter().map(|v| v / nrm).collect() }));
    }
    Ok(ContinuumSpectrum {
        values: all[..k].to_vec(),
        eigenfunctions: fns,
        labels: (0..k).map(|l| format!("grid{}", l + 1)).collect(),
        gaps: gaps[..k].to_vec(),
        clusters: clusters.into_iter().filter(|c| c.start < k).collect(),
    })
}

/// The two sides of the eigengap regime condition, with the unknown constant
/// set to 1 and the proof-internal ι₁ set to 0: `(γ_l, (ε(√λ_l + 1) + ε) λ_l)`.
pub fn gap_condition(spec: &ContinuumSpectrum, l: usize, eps: f64) -> (f64, f64) {
    let lam = spec.values[l];
    (spec.gaps[l], (eps * (lam.sqrt() + 1.0) + eps) * lam)
}

/// CSV: index, value, multiplicity, gap, predicted graph value.
pub fn write_spectrum_csv(s: &ContinuumSpectrum, consts: &Constants, w: &mut impl Write) -> Result<()> {
    writeln!(w, "index,value,multiplicity,gap,predicted_graph_value")?;
    for l in 0..s.len() {
        writeln!(
            w,
            "{},{:.16e},{},{:.16e},{:.16e}",
            l + 1,
            s.values[l],
            s.multiplicity(l),
            s.gaps[l],
            predicted_graph_eigenvalue(s.values[l], consts)
        )?;
    }
    Ok(())
}
