//! Analytic manifolds embedded in R^d.
//!
//! Four shapes are supported: a circle (m = 1), a round sphere, a torus of
//! revolution and a dumbbell surface of revolution (all m = 2). Each exposes an
//! exact sampler, the closest-point projection, surface quadrature and, for the
//! circle and sphere, the weighted Laplace–Beltrami operator
//! `Δ_aug f = -½ div(ρ² ∇f)` evaluated through chart formulas.
//!
//! When the ambient dimension exceeds the shape's native dimension (2 for the
//! circle, 3 otherwise) the extra coordinates are zero on the manifold.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::points::{dist, norm, PointCloud};
use crate::{rng, Error, Result};

/// Profile of the dumbbell surface of revolution about the first axis.
///
/// Two spherical caps of radius `lobe_radius` centred at `±lobe_center` are
/// joined through their equators by a neck whose squared radius is an even
/// sextic in `t`, matching the caps to second order at `|t| = lobe_center`.
/// The narrowest section, at `t = 0`, has radius `neck_radius`.
#[derive(Clone, Debug)]
pub struct ProfileCurve {
    lobe_radius: f64,
    neck_radius: f64,
    lobe_center: f64,
    // h(s) = a s² + b s⁴ + e s⁶ on s = |t| / lobe_center
    coef: [f64; 3],
    table: Arc<AxialTable>,
}

#[derive(Debug)]
struct AxialTable {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    neck_area: f64,
    cap_area: f64,
}

// 8-point Gauss–Legendre rule on [-1, 1].
const GL8_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL8_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

fn gl8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for k in 0..4 {
        s += GL8_W[k] * (f(c - h * GL8_X[k]) + f(c + h * GL8_X[k]));
    }
    s * h
}

const AXIAL_TABLE_INTERVALS: usize = 2048;

impl ProfileCurve {
    pub fn new(lobe_radius: f64, neck_radius: f64, lobe_center: f64) -> Result<Self> {
        if !(lobe_radius > 0.0 && neck_radius > 0.0 && lobe_center > 0.0) {
            return Err(Error::param("dumbbell radii and lobe centre must be positive"));
        }
        if neck_radius >= lobe_radius {
            return Err(Error::param("dumbbell neck_radius must be smaller than lobe_radius"));
        }
        let span = lobe_radius * lobe_radius - neck_radius * neck_radius;
        let curvature = -2.0 * lobe_center * lobe_center / span;
        // h(1) = 1, h'(1) = 0, h''(1) = curvature; h is increasing on (0,1) iff -24 < curvature <= 0
        if curvature <= -24.0 {
            return Err(Error::param("dumbbell neck is too long for a monotone C² profile"));
        }
        let e = (curvature + 8.0) / 8.0;
        let coef = [2.0 + e, -1.0 - 2.0 * e, e];
        let mut curve = Self {
            lobe_radius,
            neck_radius,
            lobe_center,
            coef,
            table: Arc::new(AxialTable { nodes: vec![], cdf: vec![], neck_area: 0.0, cap_area: 0.0 }),
        };
        curve.table = Arc::new(curve.build_table());
        Ok(curve)
    }

    /// Unit lobes, neck radius 0.3, lobes centred at ±1.5.
    pub fn standard() -> Self {
        Self::new(1.0, 0.3, 1.5).expect("standard dumbbell is valid")
    }

    pub fn lobe_radius(&self) -> f64 {
        self.lobe_radius
    }

    pub fn neck_radius(&self) -> f64 {
        self.neck_radius
    }

    pub fn lobe_center(&self) -> f64 {
        self.lobe_center
    }

    pub fn axis_extent(&self) -> (f64, f64) {
        let t = self.lobe_center + self.lobe_radius;
        (-t, t)
    }

    /// (g, g', g'') with g = r².
    pub fn radius_sq_jet(&self, t: f64) -> (f64, f64, f64) {
        let (c, big_r, nu) = (self.lobe_center, self.lobe_radius, self.neck_radius);
        let at = t.abs();
        let sgn = if t < 0.0 { -1.0 } else { 1.0 };
        if at >= c {
            let u = at - c;
            let g = (big_r * big_r - u * u).max(0.0);
            (g, -2.0 * u * sgn, -2.0)
        } else {
            let span = big_r * big_r - nu * nu;
            let s = at / c;
            let [a, b, e] = self.coef;
            let s2 = s * s;
            let h = s2 * (a + s2 * (b + s2 * e));
            let dh = s * (2.0 * a + s2 * (4.0 * b + 6.0 * e * s2));
            let ddh = 2.0 * a + s2 * (12.0 * b + 30.0 * e * s2);
            (nu * nu + span * h, span * dh / c * sgn, span * ddh / (c * c))
        }
    }

    pub fn radius(&self, t: f64) -> f64 {
        self.radius_sq_jet(t).0.max(0.0).sqrt()
    }

    /// Surface area per unit axial length, 2π r √(1 + r′²).
    pub fn area_density(&self, t: f64) -> f64 {
        let (g, dg, _) = self.radius_sq_jet(t);
        2.0 * PI * (g + 0.25 * dg * dg).max(0.0).sqrt()
    }

    pub fn area(&self) -> f64 {
        self.table.neck_area + 2.0 * self.table.cap_area
    }

    /// Area of the band `|t| < half_width`, by quadrature.
    pub fn band_area(&self, half_width: f64) -> f64 {
        let (_, t_max) = self.axis_extent();
        let w = half_width.clamp(0.0, t_max);
        let pieces = 512;
        let h = w / pieces as f64;
        2.0 * (0..pieces)
            .map(|i| {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                if a < self.lobe_center && b > self.lobe_center {
                    gl8(a, self.lobe_center, |t| self.area_density(t))
                        + gl8(self.lobe_center, b, |t| self.area_density(t))
                } else {
                    gl8(a, b, |t| self.area_density(t))
                }
            })
            .sum::<f64>()
    }

    fn build_table(&self) -> AxialTable {
        let c = self.lobe_center;
        let m = AXIAL_TABLE_INTERVALS;
        let h = 2.0 * c / m as f64;
        let nodes: Vec<f64> = (0..=m).map(|i| -c + i as f64 * h).collect();
        let mut cdf = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in nodes.windows(2) {
            acc += gl8(w[0], w[1], |t| self.area_density(t));
            cdf.push(acc);
        }
        // zone area of a spherical cap of height R
        let cap_area = 2.0 * PI * self.lobe_radius * self.lobe_radius;
        AxialTable { nodes, cdf, neck_area: acc, cap_area }
    }

    /// Inverse of the axial area CDF; `u ∈ [0, 1]`.
    pub fn axial_quantile(&self, u: f64) -> f64 {
        let tab = &*self.table;
        let total = self.area();
        let target = u.clamp(0.0, 1.0) * total;
        let (c, big_r) = (self.lobe_center, self.lobe_radius);
        let cap_density = 2.0 * PI * big_r;
        if target <= tab.cap_area {
            return -c - big_r + target / cap_density;
        }
        if target >= tab.cap_area + tab.neck_area {
            return c + (target - tab.cap_area - tab.neck_area) / cap_density;
        }
        let local = target - tab.cap_area;
        let j = match tab.cdf.binary_search_by(|v| v.total_cmp(&local)) {
            Ok(j) => return tab.nodes[j],
            Err(j) => j - 1,
        };
        let (a, b) = (tab.nodes[j], tab.nodes[j + 1]);
        let base = tab.cdf[j];
        // Newton on F(t) = base + ∫_a^t density, safeguarded by the bracket
        let (mut lo, mut hi) = (a, b);
        let mut t = a + (b - a) * (local - base) / (tab.cdf[j + 1] - base);
        for _ in 0..60 {
            let f = base + gl8(a, t, |s| self.area_density(s)) - local;
            if f.abs() <= 1e-15 * total {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let mut next = t - f / self.area_density(t);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            t = next;
        }
        t
    }
}

/// A user-supplied density on the manifold with declared bounds.
#[derive(Clone)]
pub struct CustomDensity {
    label: String,
    func: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    rho_min: f64,
    rho_max: f64,
}

impl CustomDensity {
    pub fn new(
        label: impl Into<String>,
        rho_min: f64,
        rho_max: f64,
        func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(rho_min > 0.0 && rho_max >= rho_min && rho_max.is_finite()) {
            return Err(Error::InvalidDensity(format!(
                "bounds must satisfy 0 < rho_min <= rho_max < inf, got [{rho_min}, {rho_max}]"
            )));
        }
        Ok(Self { label: label.into(), func: Arc::new(func), rho_min, rho_max })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("label", &self.label)
            .field("rho_min", &self.rho_min)
            .field("rho_max", &self.rho_max)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Density {
    Uniform,
    Custom(CustomDensity),
}

#[derive(Clone, Debug)]
pub enum ManifoldKind {
    Circle { radius: f64 },
    Sphere { radius: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
    Dumbbell(ProfileCurve),
}

/// Serializable summary used in reports and configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDescriptor {
    pub kind: String,
    pub params: Vec<f64>,
    pub ambient_dim: usize,
    pub density: String,
}

#[derive(Clone, Debug)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    density: Density,
    ambient_dim: usize,
    eps_cap: Option<f64>,
}

/// Natural data: i.i.d. draws from the manifold's density.
#[derive(Clone, Debug)]
pub struct NaturalSample {
    pub points: PointCloud,
    pub rng_seed: u64,
}

impl NaturalSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMode {
    /// Fail with `Unsupported` if no closed form exists.
    Exact,
    /// Fall back to the ambient Euclidean distance (a lower bound).
    AllowSurrogate,
}

/// Value, gradient and Hessian of a function in intrinsic chart coordinates.
/// Only the leading `m × m` block is meaningful.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// A scalar field given in closed form on a chart.
///
/// Circle charts use the angle `θ`; sphere charts use `(θ, φ)` with `θ` the
/// polar angle from the third axis.
pub trait ChartField: Send + Sync {
    fn jet(&self, chart: &[f64]) -> Jet;

    fn value(&self, chart: &[f64]) -> f64 {
        self.jet(chart).value
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl ChartField for Constant {
    fn jet(&self, _chart: &[f64]) -> Jet {
        Jet { value: self.0, ..Jet::default() }
    }
}

/// `amplitude · cos(freq·θ + phase)` on a circle chart.
#[derive(Clone, Copy, Debug)]
pub struct Fourier {
    pub freq: f64,
    pub phase: f64,
    pub amplitude: f64,
}

impl Fourier {
    pub fn cos(freq: f64) -> Self {
        Self { freq, phase: 0.0, amplitude: 1.0 }
    }

    pub fn sin(freq: f64) -> Self {
        Self { freq, phase: -0.5 * PI, amplitude: 1.0 }
    }
}

impl ChartField for Fourier {
    fn jet(&self, chart: &[f64]) -> Jet {
        let arg = self.freq * chart[0] + self.phase;
        let (s, c) = arg.sin_cos();
        let a = self.amplitude;
        Jet {
            value: a * c,
            grad: [-a * self.freq * s, 0.0],
            hess: [[-a * self.freq * self.freq * c, 0.0], [0.0, 0.0]],
        }
    }
}

/// Polynomial in three ambient variables, `Σ coef · x^i y^j z^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial3 {
    pub terms: Vec<(f64, [u32; 3])>,
}

impl Polynomial3 {
    pub fn new(terms: Vec<(f64, [u32; 3])>) -> Self {
        Self { terms }
    }

    fn pow(x: f64, k: u32) -> f64 {
        x.powi(k as i32)
    }

    pub fn eval(&self, u: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * Self::pow(u[0], e[0]) * Self::pow(u[1], e[1]) * Self::pow(u[2], e[2]))
            .sum()
    }

    /// Value, gradient and Hessian in ambient coordinates.
    pub fn ambient_jet(&self, u: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        for (c, e) in &self.terms {
            let mut p = [[0.0; 3]; 3]; // p[a][d] = d-th derivative of u_a^e_a
            for a in 0..3 {
                let k = e[a];
                let kf = k as f64;
                p[a][0] = Self::pow(u[a], k);
                p[a][1] = if k >= 1 { kf * Self::pow(u[a], k - 1) } else { 0.0 };
                p[a][2] = if k >= 2 { kf * (kf - 1.0) * Self::pow(u[a], k - 2) } else { 0.0 };
            }
            v += c * p[0][0] * p[1][0] * p[2][0];
            for a in 0..3 {
                let mut d = [0usize; 3];
                d[a] = 1;
                g[a] += c * p[0][d[0]] * p[1][d[1]] * p[2][d[2]];
                for b in 0..3 {
                    let mut d = [0usize; 3];
                    d[a] += 1;
                    d[b] += 1;
                    h[a][b] += c * p[0][d[0]] * p[1][d[1]] * p[2][d[2]];
                }
            }
        }
        (v, g, h)
    }
}

/// `amplitude · P(x / radius)` restricted to a sphere, seen in the `(θ, φ)` chart.
#[derive(Clone, Debug)]
pub struct SpherePolynomial {
    pub poly: Polynomial3,
    pub amplitude: f64,
}

impl ChartField for SpherePolynomial {
    fn jet(&self, chart: &[f64]) -> Jet {
        let (st, ct) = chart[0].sin_cos();
        let (sp, cp) = chart[1].sin_cos();
        let u = [st * cp, st * sp, ct];
        let u_t = [ct * cp, ct * sp, -st];
        let u_p = [-st * sp, st * cp, 0.0];
        let u_tt = [-st * cp, -st * sp, -ct];
        let u_tp = [-ct * sp, ct * cp, 0.0];
        let u_pp = [-st * cp, -st * sp, 0.0];
        let (v, g, h) = self.poly.ambient_jet(u);
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let quad = |a: [f64; 3], b: [f64; 3]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += a[i] * h[i][j] * b[j];
                }
            }
            s
        };
        let a = self.amplitude;
        let f_tp = quad(u_t, u_p) + dot(g, u_tp);
        Jet {
            value: a * v,
            grad: [a * dot(g, u_t), a * dot(g, u_p)],
            hess: [
                [a * (quad(u_t, u_t) + dot(g, u_tt)), a * f_tp],
                [a * f_tp, a * (quad(u_p, u_p) + dot(g, u_pp))],
            ],
        }
    }
}

const AMBIGUITY_TOL: f64 = 1e-9;

impl ManifoldSpec {
    fn with_kind(kind: ManifoldKind) -> Self {
        let native = match kind {
            ManifoldKind::Circle { .. } => 2,
            _ => 3,
        };
        Self { kind, density: Density::Uniform, ambient_dim: native, eps_cap: None }
    }

    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param("circle radius must be positive"));
        }
        Ok(Self::with_kind(ManifoldKind::Circle { radius }))
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param("sphere radius must be positive"));
        }
        Ok(Self::with_kind(ManifoldKind::Sphere { radius }))
    }

    pub fn torus(major_radius: f64, minor_radius: f64) -> Result<Self> {
        if !(minor_radius > 0.0 && major_radius > minor_radius) {
            return Err(Error::param("torus needs 0 < minor_radius < major_radius"));
        }
        Ok(Self::with_kind(ManifoldKind::Torus { major_radius, minor_radius }))
    }

    pub fn dumbbell(profile: ProfileCurve) -> Self {
        Self::with_kind(ManifoldKind::Dumbbell(profile))
    }

    /// Embed in a larger ambient space; extra coordinates are zero on the manifold.
    pub fn with_ambient_dim(mut self, d: usize) -> Result<Self> {
        if d < self.native_dim() {
            return Err(Error::param(format!(
                "ambient dimension {d} is below the native dimension {}",
                self.native_dim()
            )));
        }
        self.ambient_dim = d;
        Ok(self)
    }

    pub fn with_density(mut self, density: Density) -> Result<Self> {
        if let Density::Custom(c) = &density {
            let (lo, hi) = c.bounds();
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::InvalidDensity("density bounds violated".into()));
            }
        }
        self.density = density;
        Ok(self)
    }

    /// Cap on the connectivity parameter standing in for the curvature / reach /
    /// injectivity-radius smallness condition.
    pub fn with_eps_cap(mut self, cap: f64) -> Self {
        self.eps_cap = Some(cap);
        self
    }

    pub fn eps_cap(&self) -> Option<f64> {
        self.eps_cap
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 1,
            _ => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn native_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 2,
            _ => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ManifoldKind::Circle { .. } => "circle",
            ManifoldKind::Sphere { .. } => "sphere",
            ManifoldKind::Torus { .. } => "torus",
            ManifoldKind::Dumbbell(_) => "dumbbell",
        }
    }

    pub fn descriptor(&self) -> ManifoldDescriptor {
        let params = match &self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere { radius } => vec![*radius],
            ManifoldKind::Torus { major_radius, minor_radius } => vec![*major_radius, *minor_radius],
            ManifoldKind::Dumbbell(p) => vec![p.lobe_radius, p.neck_radius, p.lobe_center],
        };
        let density = match &self.density {
            Density::Uniform => "uniform".to_string(),
            Density::Custom(c) => c.label.clone(),
        };
        ManifoldDescriptor { kind: self.name().into(), params, ambient_dim: self.ambient_dim, density }
    }

    /// Total surface measure (length for the circle).
    pub fn area(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Circle { radius } => 2.0 * PI * radius,
            ManifoldKind::Sphere { radius } => 4.0 * PI * radius * radius,
            ManifoldKind::Torus { major_radius, minor_radius } => 4.0 * PI * PI * major_radius * minor_radius,
            ManifoldKind::Dumbbell(p) => p.area(),
        }
    }

    /// Largest ambient distance between two manifold points.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere { radius } => 2.0 * radius,
            ManifoldKind::Torus { major_radius, minor_radius } => 2.0 * (major_radius + minor_radius),
            ManifoldKind::Dumbbell(p) => 2.0 * (p.lobe_center + p.lobe_radius),
        }
    }

    pub fn density_at(&self, x: &[f64]) -> f64 {
        match &self.density {
            Density::Uniform => 1.0 / self.area(),
            Density::Custom(c) => c.eval(x),
        }
    }

    fn pad(&self, mut p: Vec<f64>) -> Vec<f64> {
        p.resize(self.ambient_dim, 0.0);
        p
    }

    /// Intrinsic chart coordinates of a manifold point.
    ///
    /// circle: `[θ]`; sphere: `[θ polar, φ azimuth]`; torus: `[u, v]`
    /// (toroidal, poloidal); dumbbell: `[t axial, φ]`.
    pub fn chart_coords(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            ManifoldKind::Circle { .. } => vec![x[1].atan2(x[0])],
            ManifoldKind::Sphere { .. } => {
                let rho = x[0].hypot(x[1]);
                vec![rho.atan2(x[2]), x[1].atan2(x[0])]
            }
            ManifoldKind::Torus { major_radius, .. } => {
                let rho = x[0].hypot(x[1]);
                vec![x[1].atan2(x[0]), x[2].atan2(rho - major_radius)]
            }
            ManifoldKind::Dumbbell(_) => vec![x[0], x[2].atan2(x[1])],
        }
    }

    pub fn point_from_chart(&self, c: &[f64]) -> Vec<f64> {
        let p = match &self.kind {
            ManifoldKind::Circle { radius } => vec![radius * c[0].cos(), radius * c[0].sin()],
            ManifoldKind::Sphere { radius } => {
                let (st, ct) = c[0].sin_cos();
                let (sp, cp) = c[1].sin_cos();
                vec![radius * st * cp, radius * st * sp, radius * ct]
            }
            ManifoldKind::Torus { major_radius, minor_radius } => {
                let rho = major_radius + minor_radius * c[1].cos();
                vec![rho * c[0].cos(), rho * c[0].sin(), minor_radius * c[1].sin()]
            }
            ManifoldKind::Dumbbell(p) => {
                let r = p.radius(c[0]);
                vec![c[0], r * c[1].cos(), r * c[1].sin()]
            }
        };
        self.pad(p)
    }

    /// Outward unit normal at a manifold point (in the native coordinates).
    pub fn unit_normal(&self, x: &[f64]) -> Vec<f64> {
        let n = match &self.kind {
            ManifoldKind::Circle { .. } | ManifoldKind::Sphere { .. } => {
                let k = self.native_dim();
                let r = norm(&x[..k]);
                x[..k].iter().map(|v| v / r).collect()
            }
            ManifoldKind::Torus { major_radius, minor_radius } => {
                let rho = x[0].hypot(x[1]);
                let (c, s) = (x[0] / rho, x[1] / rho);
                let (dr, dz) = ((rho - major_radius) / minor_radius, x[2] / minor_radius);
                vec![dr * c, dr * s, dz]
            }
            ManifoldKind::Dumbbell(p) => {
                let t = x[0];
                let (g, dg, _) = p.radius_sq_jet(t);
                let r = g.max(0.0).sqrt();
                let len = (0.25 * dg * dg + g).sqrt();
                let (nt, nr) = (-0.5 * dg / len, r / len);
                let rho = x[1].hypot(x[2]);
                if rho > 0.0 {
                    vec![nt, nr * x[1] / rho, nr * x[2] / rho]
                } else {
                    vec![nt.signum(), 0.0, 0.0]
                }
            }
        };
        self.pad(n)
    }

    /// Distance of `x` from satisfying the manifold's defining equations.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        let extra: f64 = x[self.native_dim()..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        let r = match &self.kind {
            ManifoldKind::Circle { radius } => (x[0].hypot(x[1]) - radius).abs(),
            ManifoldKind::Sphere { radius } => (norm(&x[..3]) - radius).abs(),
            ManifoldKind::Torus { major_radius, minor_radius } => {
                let rho = x[0].hypot(x[1]);
                ((rho - major_radius).hypot(x[2]) - minor_radius).abs()
            }
            ManifoldKind::Dumbbell(p) => {
                let rho = x[1].hypot(x[2]);
                (p.radius(x[0]) - rho).abs()
            }
        };
        r.max(extra)
    }

    /// Checks declared density bounds and normalization against the surface measure.
    pub fn validate_density(&self) -> Result<()> {
        let Density::Custom(c) = &self.density else {
            return Ok(());
        };
        let (lo, hi) = c.bounds();
        let mut bad = None;
        let mass = self.surface_integral(
            |x| {
                let v = c.eval(x);
                if !(v.is_finite() && v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12)) {
                    bad = Some(v);
                }
                v
            },
            256,
        );
        if let Some(v) = bad {
            return Err(Error::InvalidDensity(format!("density value {v} outside declared bounds [{lo}, {hi}]")));
        }
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDensity(format!("density must integrate to 1, got {mass}")));
        }
        Ok(())
    }

    /// Quadrature of `f` against the surface measure. `resolution` controls the
    /// number of nodes per angular direction.
    pub fn surface_integral(&self, mut f: impl FnMut(&[f64]) -> f64, resolution: usize) -> f64 {
        let res = resolution.max(8);
        match &self.kind {
            ManifoldKind::Circle { radius } => {
                let h = 2.0 * PI / res as f64;
                (0..res).map(|i| f(&self.point_from_chart(&[i as f64 * h]))).sum::<f64>() * h * radius
            }
            ManifoldKind::Sphere { radius } => {
                let (xs, ws) = gauss_legendre(res);
                let nphi = 2 * res;
                let h = 2.0 * PI / nphi as f64;
                let mut s = 0.0;
                for (x, w) in xs.iter().zip(&ws) {
                    let theta = x.acos();
                    for j in 0..nphi {
                        s += w * h * f(&self.point_from_chart(&[theta, j as f64 * h]));
                    }
                }
                s * radius * radius
            }
            ManifoldKind::Torus { major_radius, minor_radius } => {
                let h = 2.0 * PI / res as f64;
                let mut s = 0.0;
                for i in 0..res {
                    for j in 0..res {
                        let v = j as f64 * h;
                        let jac = minor_radius * (major_radius + minor_radius * v.cos());
                        s += jac * f(&self.point_from_chart(&[i as f64 * h, v]));
                    }
                }
                s * h * h
            }
            ManifoldKind::Dumbbell(p) => {
                let (t0, t1) = p.axis_extent();
                let c = p.lobe_center;
                let nphi = res;
                let hphi = 2.0 * PI / nphi as f64;
                let (xs, ws) = gauss_legendre(res);
                let mut s = 0.0;
                for (a, b) in [(t0, -c), (-c, c), (c, t1)] {
                    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                    for (x, w) in xs.iter().zip(&ws) {
                        let t = mid + half * x;
                        let dens = p.area_density(t) / (2.0 * PI);
                        for j in 0..nphi {
                            s += w * half * dens * hphi * f(&self.point_from_chart(&[t, j as f64 * hphi]));
                        }
                    }
                }
                s
            }
        }
    }

    fn sample_uniform_one(&self, rng: &mut rng::Rng) -> Vec<f64> {
        match &self.kind {
            ManifoldKind::Circle { .. } => {
                let th = rng.random::<f64>() * 2.0 * PI;
                self.point_from_chart(&[th])
            }
            ManifoldKind::Sphere { radius } => loop {
                let g: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                let r = norm(&g);
                if r > 1e-12 {
                    break self.pad(g.iter().map(|v| radius * v / r).collect());
                }
            },
            ManifoldKind::Torus { major_radius, minor_radius } => {
                let u = rng.random::<f64>() * 2.0 * PI;
                let target = rng.random::<f64>() * 2.0 * PI;
                let k = minor_radius / major_radius;
                // invert v + k sin v = target (monotone for k < 1)
                let mut v = target;
                for _ in 0..50 {
                    let f = v + k * v.sin() - target;
                    v -= f / (1.0 + k * v.cos());
                    if f.abs() < 1e-15 {
                        break;
                    }
                }
                self.point_from_chart(&[u, v])
            }
            ManifoldKind::Dumbbell(p) => {
                let t = p.axial_quantile(rng.random::<f64>());
                let phi = rng.random::<f64>() * 2.0 * PI;
                self.point_from_chart(&[t, phi])
            }
        }
    }

    /// Draw `n` i.i.d. natural points from the manifold's density.
    pub fn sample_natural(&self, n: usize, seed: u64) -> Result<NaturalSample> {
        if n == 0 {
            return Err(Error::param("sample size must be at least 1"));
        }
        let mut rng = rng::stream(seed, 0);
        let mut points = PointCloud::with_capacity(self.ambient_dim, n);
        match &self.density {
            Density::Uniform => {
                for _ in 0..n {
                    points.push(&self.sample_uniform_one(&mut rng));
                }
            }
            Density::Custom(c) => {
                let (lo, hi) = c.bounds();
                let mut tries = 0usize;
                while points.len() < n {
                    tries += 1;
                    if tries > 1000 * n + 10_000 {
                        return Err(Error::InvalidDensity("rejection sampler made no progress".into()));
                    }
                    let x = self.sample_uniform_one(&mut rng);
                    let v = c.eval(&x);
                    if !(v.is_finite() && v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12)) {
                        return Err(Error::InvalidDensity(format!(
                            "density value {v} outside declared bounds [{lo}, {hi}]"
                        )));
                    }
                    if rng.random::<f64>() * hi < v {
                        points.push(&x);
                    }
                }
            }
        }
        Ok(NaturalSample { points, rng_seed: seed })
    }

    /// Closest point on the manifold to `y`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: y.len() });
        }
        let p = match &self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere { radius } => {
                let k = self.native_dim();
                let r = norm(&y[..k]);
                if r < AMBIGUITY_TOL {
                    return Err(Error::AmbiguousProjection { distance: r });
                }
                y[..k].iter().map(|v| radius * v / r).collect()
            }
            ManifoldKind::Torus { major_radius, minor_radius } => {
                let rho = y[0].hypot(y[1]);
                if rho < AMBIGUITY_TOL {
                    return Err(Error::AmbiguousProjection { distance: rho });
                }
                let (dr, dz) = (rho - major_radius, y[2]);
                let len = dr.hypot(dz);
                if len < AMBIGUITY_TOL {
                    return Err(Error::AmbiguousProjection { distance: len });
                }
                let prho = major_radius + minor_radius * dr / len;
                let pz = minor_radius * dz / len;
                vec![prho * y[0] / rho, prho * y[1] / rho, pz]
            }
            ManifoldKind::Dumbbell(p) => project_dumbbell(p, y)?,
        };
        Ok(self.pad(p))
    }

    /// Geodesic distance between two manifold points.
    pub fn geodesic_distance(&self, x: &[f64], y: &[f64], mode: DistanceMode) -> Result<f64> {
        match &self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere { radius } => {
                let k = self.native_dim();
                let (a, b) = (&x[..k], &y[..k]);
                let d: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                // atan2(|a × b|, a·b) keeps precision near 0 and π
                let cross = if k == 2 { (a[0] * b[1] - a[1] * b[0]).abs() } else { cross_norm(a, b) };
                Ok(radius * cross.atan2(d))
            }
            _ => match mode {
                DistanceMode::Exact => Err(Error::Unsupported(format!(
                    "no closed-form geodesic distance on the {}",
                    self.name()
                ))),
                DistanceMode::AllowSurrogate => Ok(dist(x, y)),
            },
        }
    }

    /// `Δ_aug f = -½ div(ρ² ∇f)` at the manifold point `x`.
    pub fn laplace_beltrami_apply(&self, f: &dyn ChartField, x: &[f64]) -> Result<f64> {
        let chart = self.chart_coords(x);
        let j = f.jet(&chart);
        let (rho, drho) = self.density_chart_jet(&chart);
        match &self.kind {
            ManifoldKind::Circle { radius } => {
                let div = (2.0 * rho * drho[0] * j.grad[0] + rho * rho * j.hess[0][0]) / (radius * radius);
                Ok(-0.5 * div)
            }
            ManifoldKind::Sphere { radius } => {
                let (st, ct) = chart[0].sin_cos();
                if st.abs() < 1e-12 {
                    return Err(Error::Unsupported("sphere chart is singular at the poles".into()));
                }
                let lap = j.hess[0][0] + ct / st * j.grad[0] + j.hess[1][1] / (st * st);
                let cross = 2.0 * rho * (drho[0] * j.grad[0] + drho[1] * j.grad[1] / (st * st));
                Ok(-0.5 * (rho * rho * lap + cross) / (radius * radius))
            }
            _ => Err(Error::Unsupported(format!(
                "Laplace–Beltrami evaluation is only implemented on the circle and sphere, not the {}",
                self.name()
            ))),
        }
    }

    /// Density and its chart gradient (central differences for custom densities).
    fn density_chart_jet(&self, chart: &[f64]) -> (f64, [f64; 2]) {
        match &self.density {
            Density::Uniform => (1.0 / self.area(), [0.0, 0.0]),
            Density::Custom(c) => {
                let h = 1e-5;
                let at = |c0: &[f64]| c.eval(&self.point_from_chart(c0));
                let rho = at(chart);
                let mut g = [0.0; 2];
                for (k, gk) in g.iter_mut().enumerate().take(chart.len()) {
                    let mut p = chart.to_vec();
                    let mut m = chart.to_vec();
                    p[k] += h;
                    m[k] -= h;
                    *gk = (at(&p) - at(&m)) / (2.0 * h);
                }
                (rho, g)
            }
        }
    }

    /// Evaluate a chart field at an ambient manifold point.
    pub fn eval_field(&self, f: &dyn ChartField, x: &[f64]) -> f64 {
        f.value(&self.chart_coords(x))
    }
}

fn cross_norm(a: &[f64], b: &[f64]) -> f64 {
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    norm(&c)
}

fn project_dumbbell(p: &ProfileCurve, y: &[f64]) -> Result<Vec<f64>> {
    let (c, big_r) = (p.lobe_center, p.lobe_radius);
    let (ty, rho_y) = (y[0], y[1].hypot(y[2]));
    let mut best: Option<(f64, f64)> = None; // (squared distance, t)

    // cap candidates: radial projection onto each lobe sphere, valid on the outer half
    for side in [-1.0, 1.0] {
        let center_t = side * c;
        let dt = ty - center_t;
        let len = dt.hypot(rho_y);
        if len < AMBIGUITY_TOL {
            continue;
        }
        let t = center_t + big_r * dt / len;
        if (t - center_t) * side >= 0.0 {
            let d2 = (len - big_r).powi(2);
            if best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, t));
            }
        }
    }

    // neck candidate: coarse scan, golden-section refinement, Newton polish
    let dist2 = |t: f64| (t - ty).powi(2) + (p.radius(t) - rho_y).powi(2);
    let scan = 256;
    let h = 2.0 * c / scan as f64;
    let (mut k_best, mut f_best) = (0, f64::INFINITY);
    for k in 0..=scan {
        let f = dist2(-c + k as f64 * h);
        if f < f_best {
            f_best = f;
            k_best = k;
        }
    }
    let mut lo = (-c + (k_best as f64 - 1.0) * h).max(-c);
    let mut hi = (-c + (k_best as f64 + 1.0) * h).min(c);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (dist2(x1), dist2(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = dist2(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = dist2(x2);
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..20 {
        let (g, dg, ddg) = p.radius_sq_jet(t);
        let r = g.sqrt();
        let dr = 0.5 * dg / r;
        let ddr = (0.5 * ddg - dr * dr) / r;
        let grad = (t - ty) + (r - rho_y) * dr;
        let curv = 1.0 + dr * dr + (r - rho_y) * ddr;
        if curv <= 0.0 {
            break;
        }
        let step = grad / curv;
        let next = (t - step).clamp(-c, c);
        let done = (next - t).abs() < 1e-15;
        t = next;
        if done || grad.abs() < 1e-14 {
            break;
        }
    }
    let d2 = dist2(t);
    if best.is_none_or(|(b, _)| d2 < b) {
        best = Some((d2, t));
    }

    let (_, t) = best.ok_or(Error::AmbiguousProjection { distance: 0.0 })?;
    let r = p.radius(t);
    if rho_y < AMBIGUITY_TOL {
        if r > AMBIGUITY_TOL {
            return Err(Error::AmbiguousProjection { distance: rho_y });
        }
        return Ok(vec![t, 0.0, 0.0]);
    }
    Ok(vec![t, r * y[1] / rho_y, r * y[2] / rho_y])
}

/// Gauss–Legendre nodes and weights on [-1, 1] via Newton on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        xs[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_count_chi2(counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        let e = n as f64 / counts.len() as f64;
        counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
    }

    #[test]
    fn circle_samples_lie_on_circle() {
        let s = ManifoldSpec::circle(1.0).unwrap().sample_natural(4, 7).unwrap();
        let spec = ManifoldSpec::circle(1.0).unwrap();
        for p in s.points.rows() {
            assert!(spec.constraint_residual(p) <= 1e-12);
        }
    }

    #[test]
    fn every_shape_samples_on_the_surface() {
        let specs = [
            ManifoldSpec::circle(2.0).unwrap(),
            ManifoldSpec::sphere(1.5).unwrap(),
            ManifoldSpec::torus(2.0, 0.5).unwrap(),
            ManifoldSpec::dumbbell(ProfileCurve::standard()),
            ManifoldSpec::sphere(1.0).unwrap().with_ambient_dim(5).unwrap(),
        ];
        for spec in &specs {
            let s = spec.sample_natural(500, 3).unwrap();
            assert_eq!(s.points.dim(), spec.ambient_dim());
            for p in s.points.rows() {
                assert!(spec.constraint_residual(p) <= 1e-12, "{} residual {}", spec.name(), spec.constraint_residual(p));
            }
        }
    }

    #[test]
    fn sphere_sample_mean_is_centered() {
        let n = 100_000;
        let s = ManifoldSpec::sphere(1.0).unwrap().sample_natural(n, 11).unwrap();
        // each coordinate has variance 1/3 on the unit sphere
        let band = 3.0 * (1.0 / 3.0 / n as f64).sqrt();
        for k in 0..3 {
            let mean = s.points.rows().map(|p| p[k]).sum::<f64>() / n as f64;
            assert!(mean.abs() < band, "coord {k} mean {mean}");
        }
    }

    #[test]
    fn circle_angles_pass_chi_square() {
        let n = 100_000;
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let s = spec.sample_natural(n, 5).unwrap();
        let bins = 20;
        let mut counts = vec![0usize; bins];
        for p in s.points.rows() {
            let th = spec.chart_coords(p)[0] + PI;
            counts[((th / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1;
        }
        // chi-square 0.99 quantile with 19 dof
        assert!(ball_count_chi2(&counts) < 36.19);
    }

    #[test]
    fn sphere_bins_pass_chi_square() {
        // equal-area bins: 10 bands in z times 8 sectors in azimuth
        let n = 100_000;
        let spec = ManifoldSpec::sphere(1.0).unwrap();
        let s = spec.sample_natural(n, 9).unwrap();
        let mut counts = vec![0usize; 80];
        for p in s.points.rows() {
            let zb = (((p[2] + 1.0) / 2.0 * 10.0) as usize).min(9);
            let az = p[1].atan2(p[0]) + PI;
            let ab = ((az / (2.0 * PI) * 8.0) as usize).min(7);
            counts[zb * 8 + ab] += 1;
        }
        // chi-square 0.99 quantile with 79 dof
        assert!(ball_count_chi2(&counts) < 111.14);
    }

    #[test]
    fn dumbbell_neck_fraction_matches_quadrature() {
        let profile = ProfileCurve::standard();
        let spec = ManifoldSpec::dumbbell(profile.clone());
        let n = 100_000;
        let s = spec.sample_natural(n, 21).unwrap();
        let half = 0.5;
        let hits = s.points.rows().filter(|p| p[0].abs() < half).count();
        // independent oracle: composite Simpson of 2π r √(1 + r'²) over |t| < half
        let m = 20_000;
        let h = 2.0 * half / m as f64;
        let dens = |t: f64| {
            let r = profile.radius(t);
            let dr = (profile.radius(t + 1e-6) - profile.radius(t - 1e-6)) / 2e-6;
            2.0 * PI * r * (1.0 + dr * dr).sqrt()
        };
        let mut simpson = dens(-half) + dens(half);
        for i in 1..m {
            simpson += dens(-half + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        simpson *= h / 3.0;
        let frac = simpson / profile.area();
        let emp = hits as f64 / n as f64;
        let band = 3.0 * (frac * (1.0 - frac) / n as f64).sqrt();
        assert!((emp - frac).abs() < band, "empirical {emp} vs {frac} ± {band}");
        assert!((profile.band_area(half) / profile.area() - frac).abs() < 1e-9);
    }

    #[test]
    fn dumbbell_profile_is_c2_at_the_seams() {
        let p = ProfileCurve::standard();
        let c = p.lobe_center();
        for side in [-1.0, 1.0] {
            let t = side * c;
            let a = p.radius_sq_jet(t - 1e-12);
            let b = p.radius_sq_jet(t + 1e-12);
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-6);
        }
        assert!((p.radius(0.0) - 0.3).abs() < 1e-15);
        assert!(p.radius(0.0) < p.lobe_radius());
    }

    #[test]
    fn sphere_projection_is_radial() {
        let spec = ManifoldSpec::sphere(1.0).unwrap();
        assert_eq!(spec.project(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(spec.project(&[0.0, 0.0, 0.0]), Err(Error::AmbiguousProjection { .. })));
    }

    #[test]
    fn circle_projection_fixes_points_on_the_circle() {
        let spec = ManifoldSpec::circle(1.0).unwrap();
        let q = spec.project(&[0.6, 0.8]).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn dumbbell_projection_recovers_surface_points() {
        let spec = ManifoldSpec::dumbbell(ProfileCurve::standard());
        let s = spec.sample_natural(300, 4).unwrap();
        for x in s.points.rows() {
            let nrm = spec.unit_normal(x);
            for sign in [-1.0, 1.0] {
                let y: Vec<f64> = x.iter().zip(&nrm).map(|(a, b)| a + sign * 1e-3 * b).collect();
                let q = spec.project(&y).unwrap();
                assert!(dist(&q, x) < 1e-8, "at t={} got error {}", x[0], dist(&q, x));
            }
        }
    }

    #[test]
    fn torus_projection_recovers_surface_points() {
        let spec = ManifoldSpec::torus(2.0, 0.5).unwrap();
        let s = spec.sample_natural(200, 4).unwrap();
        for x in s.points.rows() {
            let nrm = spec.unit_normal(x);
            let y: Vec<f64> = x.iter().zip(&nrm).map(|(a, b)| a + 0.01 * b).collect();
            assert!(dist(&spec.project(&y).unwrap(), x) < 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent_and_minimal() {
        let specs = [
            ManifoldSpec::circle(1.0).unwrap(),
            ManifoldSpec::sphere(1.0).unwrap(),
            ManifoldSpec::torus(2.0, 0.5).unwrap(),
            ManifoldSpec::dumbbell(ProfileCurve::standard()),
        ];
        let mut r = rng::stream(99, 0);
        for spec in &specs {
            let base = spec.sample_natural(50, 8).unwrap();
            let probes = spec.sample_natural(200, 13).unwrap();
            for x in base.points.rows() {
                let y: Vec<f64> = x.iter().map(|v| { let g: f64 = StandardNormal.sample(&mut r); v + 0.02 * g }).collect();
                let q = spec.project(&y).unwrap();
                let qq = spec.project(&q).unwrap();
                assert!(dist(&q, &qq) < 1e-10, "{} idempotence {}", spec.name(), dist(&q, &qq));
                let d = dist(&y, &q);
                for z in probes.points.rows() {
                    assert!(d <= dist(&y, z) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn geodesic_distances() {
        let c = ManifoldSpec::circle(1.0).unwrap();
        let d = c.geodesic_distance(&[1.0, 0.0], &[-1.0, 0.0], DistanceMode::Exact).unwrap();
        assert!((d - PI).abs() < 1e-15);
        assert_eq!(c.geodesic_distance(&[0.6, 0.8], &[0.6, 0.8], DistanceMode::Exact).unwrap(), 0.0);
        let s = ManifoldSpec::sphere(1.0).unwrap();
        let d = s.geodesic_distance(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], DistanceMode::Exact).unwrap();
        assert!((d - PI / 2.0).abs() < 1e-15);
        let t = ManifoldSpec::torus(2.0, 0.5).unwrap();
        assert!(matches!(
            t.geodesic_distance(&[2.5, 0.0, 0.0], &[0.0, 2.5, 0.0], DistanceMode::Exact),
            Err(Error::Unsupported(_))
        ));
        let e = t.geodesic_distance(&[2.5, 0.0, 0.0], &[0.0, 2.5, 0.0], DistanceMode::AllowSurrogate).unwrap();
        assert!((e - 2.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn geodesic_dominates_chord() {
        let s = ManifoldSpec::sphere(2.0).unwrap();
        let pts = s.sample_natural(100, 1).unwrap();
        for i in 0..99 {
            let (a, b) = (pts.points.row(i), pts.points.row(i + 1));
            assert!(dist(a, b) <= s.geodesic_distance(a, b, DistanceMode::Exact).unwrap() + 1e-14);
        }
    }

    #[test]
    fn laplace_beltrami_closed_forms() {
        let c = ManifoldSpec::circle(1.0).unwrap();
        let x = c.point_from_chart(&[0.7]);
        let got = c.laplace_beltrami_apply(&Fourier::cos(1.0), &x).unwrap();
        let want = 0.7f64.cos() / (8.0 * PI * PI);
        assert!((got - want).abs() < 1e-15);
        assert_eq!(c.laplace_beltrami_apply(&Constant(1.0), &x).unwrap(), 0.0);

        let s = ManifoldSpec::sphere(1.0).unwrap();
        let z = SpherePolynomial { poly: Polynomial3::new(vec![(1.0, [0, 0, 1])]), amplitude: 1.0 };
        let x = s.point_from_chart(&[1.1, -0.4]);
        let got = s.laplace_beltrami_apply(&z, &x).unwrap();
        let want = x[2] / (16.0 * PI * PI);
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");

        let t = ManifoldSpec::torus(2.0, 0.5).unwrap();
        assert!(matches!(
            t.laplace_beltrami_apply(&Constant(1.0), &[2.5, 0.0, 0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    fn fd_laplace_beltrami(spec: &ManifoldSpec, f: &dyn ChartField, chart: &[f64], h: f64) -> f64 {
        let v = |c: &[f64]| f.value(c) * 1.0;
        let rho = |c: &[f64]| spec.density_at(&spec.point_from_chart(c));
        match spec.kind() {
            ManifoldKind::Circle { radius } => {
                // -(1/2r²) (ρ² f')' by a conservative second-order stencil
                let t = chart[0];
                let flux = |a: f64, b: f64| {
                    let m = 0.5 * (a + b);
                    rho(&[m]).powi(2) * (v(&[b]) - v(&[a])) / h
                };
                -0.5 * (flux(t, t + h) - flux(t - h, t)) / h / (radius * radius)
            }
            ManifoldKind::Sphere { radius } => {
                let (th, ph) = (chart[0], chart[1]);
                let w = |a: f64, b: f64| rho(&[a, b]).powi(2);
                let d_theta = ((th + 0.5 * h).sin() * w(th + 0.5 * h, ph) * (v(&[th + h, ph]) - v(&[th, ph]))
                    - (th - 0.5 * h).sin() * w(th - 0.5 * h, ph) * (v(&[th, ph]) - v(&[th - h, ph])))
                    / (h * h)
                    / th.sin();
                let d_phi = (w(th, ph + 0.5 * h) * (v(&[th, ph + h]) - v(&[th, ph]))
                    - w(th, ph - 0.5 * h) * (v(&[th, ph]) - v(&[th, ph - h])))
                    / (h * h)
                    / th.sin().powi(2);
                -0.5 * (d_theta + d_phi) / (radius * radius)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn laplace_beltrami_matches_finite_differences() {
        let h = 1e-3;
        let circle = ManifoldSpec::circle(1.3).unwrap();
        let f = Fourier { freq: 2.0, phase: 0.3, amplitude: 1.7 };
        for th in [0.1, 1.0, 2.5, -2.0] {
            let x = circle.point_from_chart(&[th]);
            let exact = circle.laplace_beltrami_apply(&f, &x).unwrap();
            let fd = fd_laplace_beltrami(&circle, &f, &[th], h);
            assert!(((exact - fd) / exact).abs() < 1e-4, "{exact} vs {fd}");
        }
        // non-uniform density on the circle exercises the ∇ρ·∇f term
        let dens = CustomDensity::new("cos", 0.5 / (2.0 * PI), 1.5 / (2.0 * PI), |x: &[f64]| {
            (1.0 + 0.5 * x[1].atan2(x[0]).cos()) / (2.0 * PI)
        })
        .unwrap();
        let weighted = ManifoldSpec::circle(1.0).unwrap().with_density(Density::Custom(dens)).unwrap();
        weighted.validate_density().unwrap();
        for th in [0.4, 1.9, -1.2] {
            let x = weighted.point_from_chart(&[th]);
            let exact = weighted.laplace_beltrami_apply(&Fourier::sin(1.0), &x).unwrap();
            let fd = fd_laplace_beltrami(&weighted, &Fourier::sin(1.0), &[th], h);
            assert!(((exact - fd) / exact).abs() < 1e-4, "{exact} vs {fd}");
        }
        let sphere = ManifoldSpec::sphere(1.0).unwrap();
        let g = SpherePolynomial {
            poly: Polynomial3::new(vec![(1.0, [1, 1, 0]), (0.5, [0, 0, 3]), (-1.5, [2, 0, 1])]),
            amplitude: 1.0,
        };
        for c in [[0.7, 0.2], [1.3, -2.0], [2.2, 1.1]] {
            let x = sphere.point_from_chart(&c);
            let exact = sphere.laplace_beltrami_apply(&g, &x).unwrap();
            let fd = fd_laplace_beltrami(&sphere, &g, &c, h);
            assert!(((exact - fd) / exact).abs() < 1e-4, "{exact} vs {fd}");
        }
    }

    #[test]
    fn custom_density_validation() {
        let doubled = CustomDensity::new("2x uniform", 2.0 / (2.0 * PI), 2.0 / (2.0 * PI), |_x: &[f64]| 2.0 / (2.0 * PI)).unwrap();
        let spec = ManifoldSpec::circle(1.0).unwrap().with_density(Density::Custom(doubled)).unwrap();
        assert!(matches!(spec.validate_density(), Err(Error::InvalidDensity(_))));
        assert!(CustomDensity::new("neg", 0.0, 1.0, |_x: &[f64]| 1.0).is_err());
        let lying = CustomDensity::new("lying", 0.1, 0.2, |_x: &[f64]| 0.5).unwrap();
        let spec = ManifoldSpec::circle(1.0).unwrap().with_density(Density::Custom(lying)).unwrap();
        assert!(matches!(spec.sample_natural(10, 1), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn uniform_density_integrates_to_one() {
        for spec in [
            ManifoldSpec::circle(1.0).unwrap(),
            ManifoldSpec::sphere(2.0).unwrap(),
            ManifoldSpec::torus(2.0, 0.5).unwrap(),
            ManifoldSpec::dumbbell(ProfileCurve::standard()),
        ] {
            let mass = spec.surface_integral(|x| spec.density_at(x), 128);
            assert!((mass - 1.0).abs() < 1e-9, "{} mass {mass}", spec.name());
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }
}
