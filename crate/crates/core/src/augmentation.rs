//! Gaussian augmentation of natural data under the coupled parameter schedule.
//!
//! Each natural point `x` produces `per_parent` augmented points
//! `x̄ = x + ε_p g` with `g` standard normal in R^d. Every parent owns its own
//! generator stream, so the cloud does not depend on the thread count.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::{ManifoldSpec, NaturalSample};
use crate::points::{dist, PointCloud};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    /// ε_w = ε^τ, ε_p = η^{1/d} ε^{τ+1}, ε_n = ε^{τ+1}.
    Coupled,
    /// ε_p = ε_w = ε_n = ε.
    Naive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    pub eps: f64,
    pub tau: f64,
    pub eta: f64,
    pub eps_w: f64,
    pub eps_p: f64,
    pub eps_n: f64,
    pub ambient_dim: usize,
    pub mode: ScheduleMode,
}

/// The coupled schedule derived from `(ε, τ, η)` in ambient dimension `d`.
pub fn schedule_from(eps: f64, tau: f64, eta: f64, d: usize) -> Result<ParamSchedule> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(tau > 0.0) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    if !(eta > 0.0) {
        return Err(Error::param(format!("eta must be positive, got {eta}")));
    }
    if d == 0 {
        return Err(Error::param("ambient dimension must be positive"));
    }
    let eps_n = eps.powf(tau + 1.0);
    Ok(ParamSchedule {
        eps,
        tau,
        eta,
        eps_w: eps.powf(tau),
        eps_p: eta.powf(1.0 / d as f64) * eps_n,
        eps_n,
        ambient_dim: d,
        mode: ScheduleMode::Coupled,
    })
}

/// The equal-parameter baseline: noise, weight width and neighbourhood all equal ε.
pub fn naive_schedule(eps: f64, d: usize) -> Result<ParamSchedule> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1], got {eps}")));
    }
    if d == 0 {
        return Err(Error::param("ambient dimension must be positive"));
    }
    Ok(ParamSchedule {
        eps,
        tau: f64::NAN,
        eta: f64::NAN,
        eps_w: eps,
        eps_p: eps,
        eps_n: eps,
        ambient_dim: d,
        mode: ScheduleMode::Naive,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsRule {
    /// c · (log n / n)^{1/(m+4)}
    LogFactor,
    /// n^{-1/(m+4)}
    Plain,
}

pub fn eps_from_n(n: f64, m: usize, c: f64, rule: EpsRule) -> f64 {
    let p = 1.0 / (m as f64 + 4.0);
    match rule {
        EpsRule::LogFactor => c * (n.ln() / n).powf(p),
        EpsRule::Plain => n.powf(-p),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedCloud {
    pub points: PointCloud,
    pub parent_index: Vec<usize>,
    pub c0: usize,
    pub projections: Option<PointCloud>,
    /// Draws discarded because they left the ε_n tube or collided in projection.
    pub rejections: usize,
    pub sched: ParamSchedule,
}

impl AugmentedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Computes and caches the projection of every point onto the manifold.
    pub fn project_onto(&mut self, spec: &ManifoldSpec) -> Result<&PointCloud> {
        if self.projections.is_none() {
            let rows: Vec<Vec<f64>> =
                (0..self.len()).into_par_iter().map(|i| spec.project(self.points.row(i))).collect::<Result<_>>()?;
            self.projections = Some(PointCloud::from_rows(spec.ambient_dim(), rows));
        }
        Ok(self.projections.as_ref().expect("just set"))
    }
}

fn parent_stream(seed: u64, parent: usize) -> rng::Rng {
    rng::stream(rng::mix(seed, 0xA5A5), parent as u64)
}

fn perturb(x: &[f64], eps_p: f64, r: &mut rng::Rng) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let g: f64 = StandardNormal.sample(r);
            v + eps_p * g
        })
        .collect()
}

fn check_per_parent(per_parent: usize, naturals: &NaturalSample) -> Result<()> {
    if per_parent == 0 {
        return Err(Error::param("per_parent must be at least 1"));
    }
    if naturals.is_empty() {
        return Err(Error::param("natural sample is empty"));
    }
    Ok(())
}

/// Plain Gaussian augmentation, `per_parent` draws per natural point.
pub fn augment(naturals: &NaturalSample, sched: &ParamSchedule, per_parent: usize, seed: u64) -> Result<AugmentedCloud> {
    check_per_parent(per_parent, naturals)?;
    let d = naturals.points.dim();
    if d != sched.ambient_dim {
        return Err(Error::DimensionMismatch { expected: sched.ambient_dim, got: d });
    }
    let blocks: Vec<Vec<Vec<f64>>> = (0..naturals.len())
        .into_par_iter()
        .map(|i| {
            let mut r = parent_stream(seed, i);
            (0..per_parent).map(|_| perturb(naturals.points.row(i), sched.eps_p, &mut r)).collect()
        })
        .collect();
    let mut points = PointCloud::with_capacity(d, naturals.len() * per_parent);
    let mut parent_index = Vec::with_capacity(naturals.len() * per_parent);
    for (i, block) in blocks.iter().enumerate() {
        for p in block {
            points.push(p);
            parent_index.push(i);
        }
    }
    Ok(AugmentedCloud { points, parent_index, c0: per_parent, projections: None, rejections: 0, sched: *sched })
}

const MAX_REDRAWS: usize = 100_000;

/// Gaussian augmentation conditioned on landing inside the ε_n tube.
///
/// Draws beyond ε_n are discarded and redrawn from the same parent stream, so
/// each accepted point follows the Gaussian law conditioned on the tube. Under
/// the naive schedule no conditioning is applied. Projections are cached, and
/// points whose projection coincides with an earlier one (to 1e-12) are redrawn.
pub fn augment_in_tube(
    spec: &ManifoldSpec,
    naturals: &NaturalSample,
    sched: &ParamSchedule,
    per_parent: usize,
    seed: u64,
) -> Result<AugmentedCloud> {
    check_per_parent(per_parent, naturals)?;
    let d = naturals.points.dim();
    if d != sched.ambient_dim || d != spec.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: spec.ambient_dim(), got: d });
    }
    let conditioned = sched.mode == ScheduleMode::Coupled;
    type Draw = (Vec<f64>, Vec<f64>);
    let blocks: Vec<(Vec<Draw>, usize, rng::Rng)> = (0..naturals.len())
        .into_par_iter()
        .map(|i| {
            let mut r = parent_stream(seed, i);
            let x = naturals.points.row(i);
            let mut out = Vec::with_capacity(per_parent);
            let mut rejected = 0;
            for _ in 0..per_parent {
                out.push(draw_in_tube(spec, x, sched, conditioned, &mut r, &mut rejected)?);
            }
            Ok((out, rejected, r))
        })
        .collect::<Result<_>>()?;

    let mut rejections = 0;
    let mut draws: Vec<Draw> = Vec::with_capacity(naturals.len() * per_parent);
    let mut parent_index = Vec::with_capacity(naturals.len() * per_parent);
    let mut streams = Vec::with_capacity(naturals.len());
    for (i, (block, rej, r)) in blocks.into_iter().enumerate() {
        rejections += rej;
        for dr in block {
            draws.push(dr);
            parent_index.push(i);
        }
        streams.push(r);
    }

    // projections must be pairwise distinct; redraw later duplicates
    for _ in 0..MAX_REDRAWS {
        let dups = duplicate_projections(&draws);
        if dups.is_empty() {
            break;
        }
        for j in dups {
            let parent = parent_index[j];
            let mut rej = 0;
            draws[j] = draw_in_tube(
                spec,
                naturals.points.row(parent),
                sched,
                conditioned,
                &mut streams[parent],
                &mut rej,
            )?;
            rejections += rej + 1;
        }
    }

    let mut points = PointCloud::with_capacity(d, draws.len());
    let mut projections = PointCloud::with_capacity(d, draws.len());
    for (p, q) in &draws {
        points.push(p);
        projections.push(q);
    }
    Ok(AugmentedCloud {
        points,
        parent_index,
        c0: per_parent,
        projections: Some(projections),
        rejections,
        sched: *sched,
    })
}

fn draw_in_tube(
    spec: &ManifoldSpec,
    x: &[f64],
    sched: &ParamSchedule,
    conditioned: bool,
    r: &mut rng::Rng,
    rejected: &mut usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    for _ in 0..MAX_REDRAWS {
        let y = perturb(x, sched.eps_p, r);
        let q = match spec.project(&y) {
            Ok(q) => q,
            Err(Error::AmbiguousProjection { .. }) => {
                *rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !conditioned || dist(&y, &q) < sched.eps_n {
            return Ok((y, q));
        }
        *rejected += 1;
    }
    Err(Error::param("augmentation could not place a point inside the eps_n tube"))
}

/// Indices of draws whose projection repeats an earlier one to within 1e-12.
fn duplicate_projections(draws: &[(Vec<f64>, Vec<f64>)]) -> Vec<usize> {
    const TOL: f64 = 1e-12;
    let mut order: Vec<usize> = (0..draws.len()).collect();
    order.sort_by(|&a, &b| draws[a].1[0].total_cmp(&draws[b].1[0]));
    let mut dups = Vec::new();
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if draws[b].1[0] - draws[a].1[0] > TOL {
                break;
            }
            if dist(&draws[a].1, &draws[b].1) <= TOL {
                dups.push(a.max(b));
            }
        }
    }
    dups.sort_unstable();
    dups.dedup();
    dups
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearManifoldReport {
    pub max_dist: f64,
    pub violations: usize,
}

/// Largest distance to the manifold over the cloud, and how many points exceed ε_n.
pub fn check_near_manifold(cloud: &AugmentedCloud, spec: &ManifoldSpec, sched: &ParamSchedule) -> Result<NearManifoldReport> {
    let dists: Vec<f64> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let y = cloud.points.row(i);
            let q = match &cloud.projections {
                Some(p) => p.row(i).to_vec(),
                None => spec.project(y)?,
            };
            Ok(dist(y, &q))
        })
        .collect::<Result<_>>()?;
    Ok(NearManifoldReport {
        max_dist: dists.iter().copied().fold(0.0, f64::max),
        violations: dists.iter().filter(|&&v| v >= sched.eps_n).count(),
    })
}

/// Which standing smallness conditions hold for a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub eps_at_most_one: bool,
    pub tau_at_least_three: bool,
    pub eps_within_cap: Option<bool>,
    /// Lower bound 1 - 2dn exp(-η^{-2/d}/(2d)) on the probability that every
    /// raw draw lands within ε_n; negative values mean the bound is vacuous.
    pub tube_probability_bound: f64,
}

pub fn regime_report(sched: &ParamSchedule, n: usize, spec: &ManifoldSpec) -> RegimeReport {
    let d = sched.ambient_dim as f64;
    let bound = 1.0 - 2.0 * d * n as f64 * (-sched.eta.powf(-2.0 / d) / (2.0 * d)).exp();
    RegimeReport {
        eps_at_most_one: sched.eps <= 1.0,
        tau_at_least_three: sched.tau >= 3.0,
        eps_within_cap: spec.eps_cap().map(|c| sched.eps <= c),
        tube_probability_bound: if sched.mode == ScheduleMode::Coupled { bound } else { f64::NAN },
    }
}

const CLOUD_MAGIC: &[u8; 8] = b"AUGCLD01";

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Header (d, n, N, c0, schedule), then row-major little-endian points, then
/// parent indices as i64.
pub fn write_cloud_binary(cloud: &AugmentedCloud, n_natural: usize, w: &mut impl Write) -> Result<()> {
    let s = &cloud.sched;
    w.write_all(CLOUD_MAGIC)?;
    for v in [cloud.points.dim(), cloud.len(), n_natural, cloud.c0, cloud.rejections] {
        put_u64(w, v as u64)?;
    }
    put_u64(w, matches!(s.mode, ScheduleMode::Naive) as u64)?;
    for v in [s.eps, s.tau, s.eta, s.eps_w, s.eps_p, s.eps_n] {
        put_f64(w, v)?;
    }
    for &v in cloud.points.as_flat() {
        put_f64(w, v)?;
    }
    for &p in &cloud.parent_index {
        w.write_all(&(p as i64).to_le_bytes())?;
    }
    Ok(())
}

/// Returns the cloud and the natural sample size recorded in the header.
pub fn read_cloud_binary(r: &mut impl Read) -> Result<(AugmentedCloud, usize)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CLOUD_MAGIC {
        return Err(Error::Format("not an augmented-cloud file".into()));
    }
    let d = get_u64(r)? as usize;
    let n = get_u64(r)? as usize;
    let n_natural = get_u64(r)? as usize;
    let c0 = get_u64(r)? as usize;
    let rejections = get_u64(r)? as usize;
    let mode = if get_u64(r)? == 1 { ScheduleMode::Naive } else { ScheduleMode::Coupled };
    let mut s = [0.0; 6];
    for v in &mut s {
        *v = get_f64(r)?;
    }
    if d == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    let mut coords = Vec::with_capacity(d * n);
    for _ in 0..d * n {
        coords.push(get_f64(r)?);
    }
    let mut parent_index = Vec::with_capacity(n);
    for _ in 0..n {
        let p = get_u64(r)? as i64;
        if p < 0 || p as usize >= n_natural {
            return Err(Error::Format(format!("parent index {p} out of range")));
        }
        parent_index.push(p as usize);
    }
    let sched = ParamSchedule {
        eps: s[0],
        tau: s[1],
        eta: s[2],
        eps_w: s[3],
        eps_p: s[4],
        eps_n: s[5],
        ambient_dim: d,
        mode,
    };
    let cloud = AugmentedCloud {
        points: PointCloud::from_flat(d, coords),
        parent_index,
        c0,
        projections: None,
        rejections,
        sched,
    };
    Ok((cloud, n_natural))
}

/// One row per point: index, parent, coordinates.
pub fn write_cloud_csv(cloud: &AugmentedCloud, w: &mut impl Write) -> Result<()> {
    let d = cloud.points.dim();
    let header: Vec<String> = ["index".to_string(), "parent".to_string()]
        .into_iter()
        .chain((0..d).map(|k| format!("x{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, p) in cloud.points.rows().enumerate() {
        let coords: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{},{},{}", i, cloud.parent_index[i], coords.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ProfileCurve;
    use proptest::prelude::*;

    #[test]
    fn schedule_examples() {
        let s = schedule_from(0.25, 2.0, 1.0, 3).unwrap();
        assert_eq!((s.eps_w, s.eps_p, s.eps_n), (0.0625, 0.015625, 0.015625));
        let s = schedule_from(0.5, 3.0, 1.0, 2).unwrap();
        assert_eq!((s.eps_w, s.eps_p, s.eps_n), (0.125, 0.0625, 0.0625));
        let s = schedule_from(0.25, 2.0, 16.0, 4).unwrap();
        assert!((s.eps_p - 0.03125).abs() < 1e-17);
        assert!(schedule_from(0.0, 2.0, 1.0, 2).is_err());
        assert!(schedule_from(1.5, 2.0, 1.0, 2).is_err());
    }

    #[test]
    fn eps_rule_examples() {
        assert!((eps_from_n(4000.0, 2, 1.0, EpsRule::Plain) - 0.250_9).abs() < 1e-4);
        assert!((eps_from_n(std::f64::consts::E, 1, 1.0, EpsRule::LogFactor) - 0.818_7).abs() < 1e-4);
        assert!(eps_from_n(1e6, 2, 1.0, EpsRule::LogFactor) < eps_from_n(1e3, 2, 1.0, EpsRule::LogFactor));
    }

    proptest! {
        #[test]
        fn schedule_coupling_is_exact(eps in 0.01f64..1.0, tau in 0.5f64..4.0, eta in 0.1f64..10.0, d in 1usize..6) {
            let s = schedule_from(eps, tau, eta, d).unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            prop_assert!(rel(s.eps_n / s.eps_w, eps) < 1e-12);
            prop_assert!(rel(s.eps_p / s.eps_w, eta.powf(1.0 / d as f64) * eps) < 1e-12);
        }

        #[test]
        fn eps_rule_is_decreasing(n in 3.0f64..1e7, m in 1usize..4) {
            let a = eps_from_n(n, m, 1.0, EpsRule::LogFactor);
            let b = eps_from_n(n * 1.5, m, 1.0, EpsRule::LogFactor);
            prop_assert!(b < a);
        }
    }

    #[test]
    fn zero_noise_reproduces_parents() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(50, 1).unwrap();
        let mut s = schedule_from(0.25, 2.0, 1.0, 2).unwrap();
        s.eps_p = 0.0;
        let cloud = augment(&nat, &s, 1, 3).unwrap();
        assert_eq!(cloud.points, nat.points);
        let rep = check_near_manifold(&cloud, &spec, &s).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.max_dist < 1e-15);
    }

    #[test]
    fn mean_squared_displacement_matches_chi_square() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(10_000, 2).unwrap();
        let mut s = schedule_from(0.25, 2.0, 1.0, 2).unwrap();
        s.eps_p = 0.01;
        let cloud = augment(&nat, &s, 1, 4).unwrap();
        let sq: Vec<f64> = (0..cloud.len()).map(|i| crate::points::dist2(cloud.points.row(i), nat.points.row(i))).collect();
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        // |g|² ~ ε_p² χ²_2 with variance 2·2·ε_p⁴
        let sigma = (4.0f64).sqrt() * 1e-4 / (sq.len() as f64).sqrt();
        assert!((mean - 2e-4).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn per_parent_bookkeeping() {
        let spec = ManifoldSpec::sphere(1.0).unwrap();
        let nat = spec.sample_natural(100, 1).unwrap();
        let s = schedule_from(0.25, 2.0, 1.0, 3).unwrap();
        let cloud = augment(&nat, &s, 3, 9).unwrap();
        assert_eq!(cloud.len(), 300);
        let mut counts = vec![0; 100];
        for &p in &cloud.parent_index {
            counts[p] += 1;
        }
        assert!(counts.iter().all(|&c| c == 3));
    }

    #[test]
    fn augmentation_is_thread_count_independent() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(500, 1).unwrap();
        let s = schedule_from(0.3, 2.0, 1.0, 2).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| augment_in_tube(&spec, &nat, &s, 2, 5).unwrap());
        let b = three.install(|| augment_in_tube(&spec, &nat, &s, 2, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn conditioned_clouds_stay_in_the_tube() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let s = schedule_from(0.25, 2.0, 1.0, 2).unwrap();
        let mut raw_violations = 0;
        for seed in 0..20 {
            let nat = spec.sample_natural(2000, seed).unwrap();
            let cloud = augment_in_tube(&spec, &nat, &s, 1, seed + 100).unwrap();
            let rep = check_near_manifold(&cloud, &spec, &s).unwrap();
            assert_eq!(rep.violations, 0, "seed {seed}");
            assert!(rep.max_dist < s.eps_n);
            raw_violations += check_near_manifold(&augment(&nat, &s, 1, seed).unwrap(), &spec, &s).unwrap().violations;
            assert!(cloud.rejections > 0);
        }
        assert!(raw_violations > 0);
    }

    #[test]
    fn displaced_point_is_reported() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(100, 1).unwrap();
        let s = schedule_from(0.25, 2.0, 1.0, 2).unwrap();
        let mut cloud = augment_in_tube(&spec, &nat, &s, 1, 1).unwrap();
        cloud.projections = None;
        let p = cloud.points.row(7).to_vec();
        let r = crate::points::norm(&p);
        let moved: Vec<f64> = p.iter().map(|v| v / r * (1.0 + 10.0 * s.eps_n)).collect();
        cloud.points.row_mut(7).copy_from_slice(&moved);
        assert_eq!(check_near_manifold(&cloud, &spec, &s).unwrap().violations, 1);
    }

    #[test]
    fn projections_stay_near_parents() {
        let specs = [ManifoldSpec::sphere(1.0).unwrap(), ManifoldSpec::dumbbell(ProfileCurve::standard())];
        for spec in &specs {
            let nat = spec.sample_natural(1000, 3).unwrap();
            let s = schedule_from(0.3, 2.0, 1.0, 3).unwrap();
            let cloud = augment_in_tube(spec, &nat, &s, 1, 8).unwrap();
            let q = cloud.projections.as_ref().unwrap();
            let d: Vec<f64> = (0..cloud.len()).map(|i| dist(q.row(i), nat.points.row(cloud.parent_index[i]))).collect();
            assert!(crate::linalg::median(&d) <= 3.0 * s.eps_p);
        }
    }

    #[test]
    fn duplicate_projections_are_found() {
        let a = (vec![0.0, 1.0], vec![0.0, 1.0]);
        let b = (vec![1.0, 0.0], vec![1.0, 0.0]);
        let draws = vec![a.clone(), b.clone(), a.clone()];
        assert_eq!(duplicate_projections(&draws), vec![2]);
    }

    #[test]
    fn binary_round_trip() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let nat = spec.sample_natural(20, 1).unwrap();
        let s = schedule_from(0.4, 2.0, 1.0, 2).unwrap();
        let cloud = augment(&nat, &s, 2, 3).unwrap();
        let mut buf = Vec::new();
        write_cloud_binary(&cloud, 20, &mut buf).unwrap();
        let (back, n_nat) = read_cloud_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(n_nat, 20);
        assert_eq!(back, cloud);
        let mut csv = Vec::new();
        write_cloud_csv(&cloud, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let line: Vec<f64> = text.lines().nth(4).unwrap().split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(line, cloud.points.row(3));
    }
}
