//! Model spacetimes and their discretizations.
//!
//! Three families are supported, each with closed-form causal order, time
//! separation and timelike geodesics:
//!
//! * flat space on a coordinate box or a causal diamond, any dimension;
//! * constant-curvature space in dimension 2, either with unbounded time
//!   separations (negative sectional sign, hyperbolic chord) or bounded ones
//!   (positive sectional sign, trigonometric chord), both via an isometric
//!   embedding;
//! * a contracting flat wedge: the interior of a past light cone between two
//!   hyperboloid slices, carrying an intrinsic chart `(rho, chi)` whose
//!   initial slice has constant mean curvature.
//!
//! The sectional sign convention ties `k_sec` to timelike Ricci curvature by
//! `Ric = (dim - 1) * k_sec` in the timelike directions, so `k_sec < 0`
//! corresponds to timelike Ricci bounded below by a negative number.
//!
//! Closed-form separations for the curved family are cross-checked against a
//! direct geodesic-shooting integrator (`reference_chord_check`), and curved
//! regions are validated for geodesic convexity at construction time.

use crate::coeff::s_c_coeff;
use crate::space::{FiniteCausalSpace, GridMeta, SpaceError, SpaceMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{kind} is not supported in dimension {dim}")]
    UnsupportedDim { kind: String, dim: usize },
    #[error("region {region} cannot be used with model kind {kind}")]
    RegionMismatch { region: String, kind: String },
    #[error("invalid region: {0}")]
    BadRegion(String),
    #[error(
        "chart time extent {extent} too large for the bounded-separation chart (limit {limit})"
    )]
    RegionTooLarge { extent: f64, limit: f64 },
    #[error(
        "separations inside the region reach {tau_max}, at or beyond the chord window {limit}"
    )]
    SeparationWindowExceeded { tau_max: f64, limit: f64 },
    #[error(
        "geodesics between region points bulge {bulge} beyond the spatial bounds \
         (allowed {limit}); shrink the box"
    )]
    RegionBulge { bulge: f64, limit: f64 },
    #[error(
        "region is not geodesically convex: the segment between {x:?} and {y:?} leaves it at parameter {t}"
    )]
    ConvexityViolated { x: Vec<f64>, y: Vec<f64>, t: f64 },
    #[error("closed-form separation disagrees with the shooting integrator: \
             max relative error {max_err} over {pairs} pairs (tolerance {tol})")]
    ChordGateFailed { max_err: f64, pairs: usize, tol: f64 },
    #[error("points {x:?} and {y:?} are not chronologically related")]
    NotTimelike { x: Vec<f64>, y: Vec<f64> },
    #[error("radial density of the bounded model is undefined at r = {r} >= {bound}")]
    RadialDomain { r: f64, bound: f64 },
    #[error("discretization produced no points")]
    EmptyDiscretization,
    #[error("lattice would have {cells} cells, above the supported maximum {max}")]
    LatticeTooLarge { cells: usize, max: usize },
    #[error("sampler {needed} required for this operation, space was built by {got}")]
    WrongSampler { needed: String, got: String },
    #[error("space carries no model metadata")]
    NoModelMeta,
    #[error("space error: {0}")]
    Space(#[from] SpaceError),
    #[error("longest-chain estimator not calibrated for dimension {dim}")]
    ChainDimension { dim: usize },
}

/// Geometry family of a model spacetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Minkowski,
    /// Constant curvature, dimension 2 only. `k_sec` is the sectional sign:
    /// timelike Ricci equals `(dim - 1) * k_sec`.
    ConstantCurvature { k_sec: f64 },
    MilneWedge,
}

impl ModelKind {
    fn name(&self) -> &'static str {
        match self {
            ModelKind::Minkowski => "minkowski",
            ModelKind::ConstantCurvature { .. } => "constant_curvature",
            ModelKind::MilneWedge => "milne_wedge",
        }
    }
}

/// Chart region a model is restricted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    /// Axis-aligned chart box; axis 0 is the chart time axis.
    #[serde(rename = "box")]
    Box_ { min: Vec<f64>, max: Vec<f64> },
    /// Causal diamond between the origin and `(height, 0, ..., 0)` (flat
    /// space only).
    Diamond { height: f64 },
    /// Wedge chart: `rho` in `[rho_min, rho_max]`, each rapidity component in
    /// `[-chi_max, chi_max]`.
    Wedge { rho_min: f64, rho_max: f64, chi_max: f64 },
}

impl Region {
    fn name(&self) -> &'static str {
        match self {
            Region::Box_ { .. } => "box",
            Region::Diamond { .. } => "diamond",
            Region::Wedge { .. } => "wedge",
        }
    }
}

/// Point sampler for discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum SamplerConfig {
    /// Regular chart lattice with the given spacing on every axis; each point
    /// weighs `chart_density * spacing^dim`.
    Lattice { spacing: f64 },
    /// Poisson sprinkle with the given intensity per unit volume; each point
    /// weighs `1 / density`.
    Sprinkle { density: f64, seed: u64 },
}

impl SamplerConfig {
    fn name(&self) -> &'static str {
        match self {
            SamplerConfig::Lattice { .. } => "lattice",
            SamplerConfig::Sprinkle { .. } => "sprinkle",
        }
    }
}

/// Maximum chart-time extent accepted for the bounded-separation chart; the
/// closed-form chord is single-valley only below an extent of pi.
pub const BOUNDED_CHART_TIME_LIMIT: f64 = 3.0;

const LATTICE_MAX_CELLS: usize = 50_000_000;

/// A validated model spacetime: kind, dimension and chart region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpacetime {
    pub kind: ModelKind,
    pub dim: usize,
    pub region: Region,
    /// Assumption flag recorded with the model: timelike geodesics between
    /// chronologically related points are unique (true for every supported
    /// kind on a validated region).
    pub nonbranching: bool,
}

impl ModelSpacetime {
    pub fn new(kind: ModelKind, dim: usize, region: Region) -> Result<Self, ModelError> {
        if dim < 2 {
            return Err(ModelError::UnsupportedDim { kind: kind.name().into(), dim });
        }
        match (&kind, &region) {
            (ModelKind::Minkowski, Region::Box_ { min, max }) => {
                check_box(min, max, dim)?;
            }
            (ModelKind::Minkowski, Region::Diamond { height }) => {
                if !height.is_finite() || *height <= 0.0 {
                    return Err(ModelError::BadRegion(format!(
                        "diamond height must be positive, got {height}"
                    )));
                }
            }
            (ModelKind::ConstantCurvature { k_sec }, Region::Box_ { min, max }) => {
                if dim != 2 {
                    return Err(ModelError::UnsupportedDim {
                        kind: kind.name().into(),
                        dim,
                    });
                }
                if *k_sec == 0.0 || !k_sec.is_finite() {
                    return Err(ModelError::BadRegion(
                        "sectional sign must be nonzero and finite; use the flat kind for zero"
                            .into(),
                    ));
                }
                check_box(min, max, dim)?;
                if *k_sec > 0.0 {
                    bounded_region_gate(*k_sec, min, max)?;
                }
            }
            (ModelKind::MilneWedge, Region::Wedge { rho_min, rho_max, chi_max }) => {
                let wedge_ok = 0.0 < *rho_min && rho_min < rho_max && *chi_max > 0.0;
                if !wedge_ok {
                    return Err(ModelError::BadRegion(format!(
                        "wedge needs 0 < rho_min < rho_max and chi_max > 0, \
                         got [{rho_min}, {rho_max}] x {chi_max}"
                    )));
                }
            }
            _ => {
                return Err(ModelError::RegionMismatch {
                    region: region.name().into(),
                    kind: kind.name().into(),
                });
            }
        }
        let model = ModelSpacetime { kind, dim, region, nonbranching: true };
        if matches!(model.kind, ModelKind::ConstantCurvature { .. }) {
            model.check_convexity()?;
        }
        Ok(model)
    }

    /// Does the region contain the point (in stored coordinates)?
    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_slack(p, 0.0)
    }

    fn contains_slack(&self, p: &[f64], slack: f64) -> bool {
        match &self.region {
            Region::Box_ { min, max } => p
                .iter()
                .zip(min.iter().zip(max))
                .all(|(&v, (&lo, &hi))| v >= lo - slack && v <= hi + slack),
            Region::Diamond { height } => {
                let r = norm(&p[1..]);
                p[0] + slack >= r && height - p[0] + slack >= r
            }
            Region::Wedge { rho_min, rho_max, chi_max } => {
                let Some(chart) = wedge_chart_from_ambient(p) else {
                    return false;
                };
                chart[0] >= rho_min - slack
                    && chart[0] <= rho_max + slack
                    && chart[1..]
                        .iter()
                        .all(|&c| c.abs() <= chi_max + slack)
            }
        }
    }

    /// Samples geodesic segments between region points and verifies they stay
    /// inside the region. Corner-to-corner probes are checked on top of
    /// random pairs because convexity failures concentrate near the boundary.
    fn check_convexity(&self) -> Result<(), ModelError> {
        let (min, max) = match &self.region {
            Region::Box_ { min, max } => (min.clone(), max.clone()),
            _ => return Ok(()),
        };
        let mut slack = 1e-9
            * (1.0
                + min
                    .iter()
                    .chain(max.iter())
                    .fold(0.0f64, |a, &b| a.max(b.abs())));
        if let ModelKind::ConstantCurvature { k_sec } = self.kind {
            if k_sec > 0.0 {
                // Grant the intrinsic outward bulge the region gate accepted.
                let tau_max = bounded_tau_max(k_sec, &min, &max);
                slack += bounded_bulge(k_sec, &min, &max, tau_max);
            }
        }
        let mut probes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        // 5x5 chart probe grid, all ordered pairs.
        let grid: Vec<Vec<f64>> = {
            let steps = 5usize;
            let mut pts = Vec::new();
            for i in 0..steps {
                for j in 0..steps {
                    let f = |k: usize, lo: f64, hi: f64| {
                        lo + (hi - lo) * (k as f64) / ((steps - 1) as f64)
                    };
                    pts.push(vec![f(i, min[0], max[0]), f(j, min[1], max[1])]);
                }
            }
            pts
        };
        for a in &grid {
            for b in &grid {
                if model_tau(self, a, b) > 1e-6 {
                    probes.push((a.clone(), b.clone()));
                }
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0xC0_FFEE);
        let mut random_found = 0usize;
        while random_found < 60 {
            let draw = |rng: &mut ChaCha20Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
            let a = vec![draw(&mut rng, min[0], max[0]), draw(&mut rng, min[1], max[1])];
            let b = vec![draw(&mut rng, min[0], max[0]), draw(&mut rng, min[1], max[1])];
            if model_tau(self, &a, &b) > 1e-6 {
                probes.push((a, b));
                random_found += 1;
            }
        }
        for (a, b) in &probes {
            for k in 1..=9 {
                let t = k as f64 / 10.0;
                let g = geodesic_interpolate(self, a, b, t)?;
                if !self.contains_slack(&g, slack) {
                    return Err(ModelError::ConvexityViolated {
                        x: a.clone(),
                        y: b.clone(),
                        t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Admissibility checks for the bounded-separation chart box, all derived
/// from the closed-form chord:
///
/// * the chart time extent must stay under [`BOUNDED_CHART_TIME_LIMIT`]
///   curvature radii so the chord stays on a single branch;
/// * the largest separation inside the box must stay strictly under the
///   chord window `pi * radius`;
/// * timelike geodesics between box points bulge outward to spatial
///   coordinate `asinh(sinh(rho) / cos(tau / (2 radius)))`; the worst-case
///   bulge must stay under 5% of the spatial extent, and the convexity
///   validator grants exactly this allowance.
fn bounded_region_gate(k_sec: f64, min: &[f64], max: &[f64]) -> Result<(), ModelError> {
    let r = 1.0 / k_sec.sqrt();
    let extent = (max[0] - min[0]) / r;
    if extent > BOUNDED_CHART_TIME_LIMIT {
        return Err(ModelError::RegionTooLarge { extent, limit: BOUNDED_CHART_TIME_LIMIT });
    }
    let tau_max = bounded_tau_max(k_sec, min, max);
    let window = std::f64::consts::PI * r;
    if tau_max >= window * (1.0 - 1e-6) {
        return Err(ModelError::SeparationWindowExceeded { tau_max, limit: window });
    }
    let bulge = bounded_bulge(k_sec, min, max, tau_max);
    let limit = 0.05 * (max[1] - min[1]);
    if bulge > limit {
        return Err(ModelError::RegionBulge { bulge, limit });
    }
    Ok(())
}

/// Largest separation between box points of the bounded chart. The chord
/// decreases in the chart-time gap, so only the full extent is scanned, over
/// a spatial grid.
fn bounded_tau_max(k_sec: f64, min: &[f64], max: &[f64]) -> f64 {
    let r = 1.0 / k_sec.sqrt();
    let dt = (max[0] - min[0]) / r;
    let mut c_min = 1.0f64;
    let steps = 40;
    for a in 0..=steps {
        for b in 0..=steps {
            let r1 = min[1] + (max[1] - min[1]) * a as f64 / steps as f64;
            let r2 = min[1] + (max[1] - min[1]) * b as f64 / steps as f64;
            let c = r1.cosh() * r2.cosh() * dt.cos() - r1.sinh() * r2.sinh();
            c_min = c_min.min(c);
        }
    }
    if c_min <= -1.0 {
        // At or past the window; report the cap so the gate rejects.
        return std::f64::consts::PI * r;
    }
    r * c_min.acos()
}

/// Worst-case outward bulge of geodesics between box points of the bounded
/// chart, from the embedding bound `sinh(rho(s)) <= sinh(rho_max) / cos(tau
/// / (2 radius))`.
fn bounded_bulge(k_sec: f64, min: &[f64], max: &[f64], tau_max: f64) -> f64 {
    let r = 1.0 / k_sec.sqrt();
    let rho_m = min[1].abs().max(max[1].abs());
    let half = (tau_max / (2.0 * r)).min(std::f64::consts::FRAC_PI_2 * (1.0 - 1e-9));
    (rho_m.sinh() / half.cos()).asinh() - rho_m
}

fn check_box(min: &[f64], max: &[f64], dim: usize) -> Result<(), ModelError> {
    if min.len() != dim || max.len() != dim {
        return Err(ModelError::BadRegion(format!(
            "box bounds must have {dim} entries, got {} and {}",
            min.len(),
            max.len()
        )));
    }
    for (a, (&lo, &hi)) in min.iter().zip(max).enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ModelError::BadRegion(format!(
                "box axis {a} is empty: [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Curvature radius of the curved family.
fn curvature_radius(k_sec: f64) -> f64 {
    1.0 / k_sec.abs().sqrt()
}

/// Wedge chart from ambient coordinates: `rho = sqrt(t^2 - |x|^2)` and
/// rapidity vector `chi`. `None` outside the open past cone of the origin.
pub fn wedge_chart_from_ambient(p: &[f64]) -> Option<Vec<f64>> {
    let t = p[0];
    if t >= 0.0 {
        return None;
    }
    let r2: f64 = p[1..].iter().map(|x| x * x).sum();
    let rho2 = t * t - r2;
    if rho2 <= 0.0 {
        return None;
    }
    let rho = rho2.sqrt();
    let mut chart = vec![rho];
    let r = r2.sqrt();
    if r == 0.0 {
        chart.extend(p[1..].iter().map(|_| 0.0));
    } else {
        let rad = (r / rho).asinh();
        chart.extend(p[1..].iter().map(|&x| rad * x / r));
    }
    Some(chart)
}

/// Ambient coordinates of a wedge chart point `(rho, chi)`; the wedge sits in
/// the past cone of the origin, so the time coordinate is negative and the
/// future direction is decreasing `rho`.
pub fn wedge_ambient_from_chart(chart: &[f64]) -> Vec<f64> {
    let rho = chart[0];
    let rad = norm(&chart[1..]);
    let mut p = vec![-rho * rad.cosh()];
    if rad == 0.0 {
        p.extend(chart[1..].iter().map(|_| 0.0));
    } else {
        let scale = rho * rad.sinh() / rad;
        p.extend(chart[1..].iter().map(|&c| scale * c));
    }
    p
}

fn flat_leq(x: &[f64], y: &[f64]) -> bool {
    let dt = y[0] - x[0];
    if dt < 0.0 {
        return false;
    }
    let d2: f64 = x[1..]
        .iter()
        .zip(&y[1..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    dt * dt >= d2
}

fn flat_tau(x: &[f64], y: &[f64]) -> f64 {
    let dt = y[0] - x[0];
    if dt <= 0.0 {
        return 0.0;
    }
    let d2: f64 = x[1..]
        .iter()
        .zip(&y[1..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let s = dt * dt - d2;
    if s > 0.0 {
        s.sqrt()
    } else {
        0.0
    }
}

/// Embedding of the unbounded-separation chart `(t, theta)` (curvature radius
/// `r`) into flat 3-space with one time axis.
fn unbounded_embed(r: f64, p: &[f64]) -> [f64; 3] {
    let a = p[0] / r;
    [r * a.sinh(), r * a.cosh() * p[1].cos(), r * a.cosh() * p[1].sin()]
}

/// Embedding of the bounded-separation chart `(t, rho)` (curvature radius
/// `r`) into flat 3-space with two time axes.
fn bounded_embed(r: f64, p: &[f64]) -> [f64; 3] {
    let t = p[0] / r;
    [r * p[1].cosh() * t.cos(), r * p[1].cosh() * t.sin(), r * p[1].sinh()]
}

/// Gudermannian: conformal spatial coordinate of the bounded chart.
fn gudermann(rho: f64) -> f64 {
    rho.sinh().atan()
}

/// Causal order of a model (in stored coordinates). Reflexive.
pub fn model_leq(model: &ModelSpacetime, x: &[f64], y: &[f64]) -> bool {
    match model.kind {
        ModelKind::Minkowski | ModelKind::MilneWedge => flat_leq(x, y),
        ModelKind::ConstantCurvature { k_sec } => {
            let r = curvature_radius(k_sec);
            if k_sec < 0.0 {
                if y[0] < x[0] {
                    return false;
                }
                if x == y {
                    return true;
                }
                let ex = unbounded_embed(r, x);
                let ey = unbounded_embed(r, y);
                let b = (-ex[0] * ey[0] + ex[1] * ey[1] + ex[2] * ey[2]) / (r * r);
                b >= 1.0 - 1e-12
            } else {
                let dt = y[0] - x[0];
                if dt < 0.0 {
                    return false;
                }
                let dsig = (gudermann(y[1]) - gudermann(x[1])).abs();
                dt / r >= dsig - 1e-12
            }
        }
    }
}

/// Time separation of a model (in stored coordinates); zero when causally
/// unrelated.
pub fn model_tau(model: &ModelSpacetime, x: &[f64], y: &[f64]) -> f64 {
    match model.kind {
        ModelKind::Minkowski | ModelKind::MilneWedge => flat_tau(x, y),
        ModelKind::ConstantCurvature { k_sec } => {
            let r = curvature_radius(k_sec);
            if !model_leq(model, x, y) || x == y {
                return 0.0;
            }
            if k_sec < 0.0 {
                let ex = unbounded_embed(r, x);
                let ey = unbounded_embed(r, y);
                let b = (-ex[0] * ey[0] + ex[1] * ey[1] + ex[2] * ey[2]) / (r * r);
                if b <= 1.0 {
                    0.0
                } else {
                    r * b.acosh()
                }
            } else {
                let ex = bounded_embed(r, x);
                let ey = bounded_embed(r, y);
                let c = (ex[0] * ey[0] + ex[1] * ey[1] - ex[2] * ey[2]) / (r * r);
                r * c.clamp(-1.0, 1.0).acos()
            }
        }
    }
}

/// Chart volume density at a stored-coordinate point (the weight rule for
/// lattice cells is `density * spacing^dim`).
pub fn chart_density(model: &ModelSpacetime, p: &[f64]) -> f64 {
    match model.kind {
        ModelKind::Minkowski => 1.0,
        ModelKind::ConstantCurvature { k_sec } => {
            let r = curvature_radius(k_sec);
            if k_sec < 0.0 {
                r * (p[0] / r).cosh()
            } else {
                r * p[1].cosh()
            }
        }
        ModelKind::MilneWedge => {
            let chart = wedge_chart_from_ambient(p)
                .expect("wedge density evaluated outside the past cone");
            wedge_chart_density(model.dim, &chart)
        }
    }
}

fn wedge_chart_density(dim: usize, chart: &[f64]) -> f64 {
    let rho = chart[0];
    let rad = norm(&chart[1..]);
    let sinc = if rad < 1e-8 {
        1.0 + rad * rad / 6.0
    } else {
        rad.sinh() / rad
    };
    rho.powi(dim as i32 - 1) * sinc.powi(dim as i32 - 2)
}

/// Volume density of the radial cone profile at separation `r` from a point:
/// `r^(dim-1)` in the flat kinds, the curvature coefficient power in the
/// curved family. For the bounded family this is undefined at and beyond the
/// first conjugate separation.
pub fn model_radial_density(model: &ModelSpacetime, r: f64) -> Result<f64, ModelError> {
    assert!(r >= 0.0, "radial separation must be nonnegative");
    let n = model.dim as i32;
    match model.kind {
        ModelKind::Minkowski | ModelKind::MilneWedge => Ok(r.powi(n - 1)),
        ModelKind::ConstantCurvature { k_sec } => {
            if k_sec > 0.0 {
                let bound = std::f64::consts::PI / k_sec.sqrt();
                if r >= bound {
                    return Err(ModelError::RadialDomain { r, bound });
                }
            }
            let (s, _) = s_c_coeff(k_sec, r);
            Ok(s.powi(n - 1))
        }
    }
}

/// Timelike geodesic between chronologically related points, at affine
/// fraction `t` of the total separation (stored coordinates in and out).
pub fn geodesic_interpolate(
    model: &ModelSpacetime,
    x: &[f64],
    y: &[f64],
    t: f64,
) -> Result<Vec<f64>, ModelError> {
    assert!((0.0..=1.0).contains(&t), "interpolation parameter out of [0,1]");
    let tau = model_tau(model, x, y);
    if tau.is_nan() || tau <= 0.0 {
        return Err(ModelError::NotTimelike { x: x.to_vec(), y: y.to_vec() });
    }
    match model.kind {
        ModelKind::Minkowski | ModelKind::MilneWedge => Ok(x
            .iter()
            .zip(y)
            .map(|(a, b)| a + t * (b - a))
            .collect()),
        ModelKind::ConstantCurvature { k_sec } => {
            let r = curvature_radius(k_sec);
            let total = tau / r;
            if k_sec < 0.0 {
                let ex = unbounded_embed(r, x);
                let ey = unbounded_embed(r, y);
                let s = total.sinh();
                let (wa, wb) = (((1.0 - t) * total).sinh() / s, (t * total).sinh() / s);
                let g = [
                    wa * ex[0] + wb * ey[0],
                    wa * ex[1] + wb * ey[1],
                    wa * ex[2] + wb * ey[2],
                ];
                // Chart inverse of the embedding.
                let tt = r * (g[0] / r).asinh();
                let th = g[2].atan2(g[1]);
                Ok(vec![tt, th])
            } else {
                let ex = bounded_embed(r, x);
                let ey = bounded_embed(r, y);
                let s = total.sin();
                let (wa, wb) = (((1.0 - t) * total).sin() / s, (t * total).sin() / s);
                let g = [
                    wa * ex[0] + wb * ey[0],
                    wa * ex[1] + wb * ey[1],
                    wa * ex[2] + wb * ey[2],
                ];
                let rho = (g[2] / r).asinh();
                let mut tt = g[1].atan2(g[0]) * r;
                // The chart time axis winds around the embedding circle; pick
                // the branch nearest the segment's chart interval.
                let mid = 0.5 * (x[0] + y[0]);
                let period = 2.0 * std::f64::consts::PI * r;
                while tt < mid - period / 2.0 {
                    tt += period;
                }
                while tt > mid + period / 2.0 {
                    tt -= period;
                }
                Ok(vec![tt, rho])
            }
        }
    }
}

/// A dense finite causal space over an arbitrary list of flat-spacetime
/// points. `coords` is row-major with `dim` entries per point; each point
/// carries the given reference weight.
pub fn minkowski_cloud(
    dim: usize,
    coords: Vec<f64>,
    weight: Vec<f64>,
) -> Result<FiniteCausalSpace, ModelError> {
    if dim < 2 {
        return Err(ModelError::UnsupportedDim { kind: "minkowski".into(), dim });
    }
    if coords.len() != weight.len() * dim {
        return Err(ModelError::BadRegion(format!(
            "{} coordinates do not fill {} points of dimension {dim}",
            coords.len(),
            weight.len()
        )));
    }
    let n = weight.len();
    let lo = vec![0.0; dim];
    let hi = vec![1.0; dim];
    let probe = ModelSpacetime::new(ModelKind::Minkowski, dim, Region::Box_ { min: lo, max: hi })?;
    let mut leq = vec![false; n * n];
    let mut tau = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let x = &coords[i * dim..(i + 1) * dim];
            let y = &coords[j * dim..(j + 1) * dim];
            if model_leq(&probe, x, y) {
                leq[i * n + j] = true;
                tau[i * n + j] = model_tau(&probe, x, y);
            }
        }
    }
    Ok(FiniteCausalSpace::new(dim, coords, weight, leq, tau, None)?)
}

/// Samples the two-dimensional expanding wedge between two hyperbolic time
/// slices of flat spacetime: points `(rho cosh chi, rho sinh chi)` on a
/// regular `(rho, chi)` grid over `[rho_min, 1] x [-chi_max, chi_max]`,
/// carrying the comoving volume element `rho * d_rho * d_chi`. Returns the
/// space and the indices of the outer slice `rho = 1`, which is achronal
/// and has exact signed separation `rho - 1` below it.
pub fn milne_wedge(
    rho_min: f64,
    rho_step: f64,
    chi_max: f64,
    chi_step: f64,
) -> Result<(FiniteCausalSpace, Vec<usize>), ModelError> {
    if !rho_min.is_finite()
        || rho_min <= 0.0
        || rho_min >= 1.0
        || !rho_step.is_finite()
        || rho_step <= 0.0
    {
        return Err(ModelError::BadRegion(format!(
            "hyperbolic radius range [{rho_min}, 1] with step {rho_step} is empty"
        )));
    }
    if !chi_max.is_finite()
        || chi_max <= 0.0
        || !chi_step.is_finite()
        || chi_step <= 0.0
    {
        return Err(ModelError::BadRegion(format!(
            "rapidity range [-{chi_max}, {chi_max}] with step {chi_step} is empty"
        )));
    }
    let n_rho = ((1.0 - rho_min) / rho_step).round() as usize + 1;
    let n_chi = (2.0 * chi_max / chi_step).round() as usize + 1;
    let mut coords = Vec::with_capacity(2 * n_rho * n_chi);
    let mut weight = Vec::with_capacity(n_rho * n_chi);
    let mut outer = Vec::new();
    for i in 0..n_rho {
        let rho =
            if i + 1 == n_rho { 1.0 } else { rho_min + i as f64 * rho_step };
        for j in 0..n_chi {
            let chi = -chi_max + j as f64 * chi_step;
            coords.push(rho * chi.cosh());
            coords.push(rho * chi.sinh());
            weight.push(rho * rho_step * chi_step);
            if i + 1 == n_rho {
                outer.push(weight.len() - 1);
            }
        }
    }
    let space = minkowski_cloud(2, coords, weight)?;
    Ok((space, outer))
}

/// Discretizes a model region into a finite causal space (model-backed: the
/// order and separation matrices are evaluated on demand).
pub fn discretize(
    model: &ModelSpacetime,
    sampler: &SamplerConfig,
) -> Result<FiniteCausalSpace, ModelError> {
    match sampler {
        SamplerConfig::Lattice { spacing } => lattice_discretize(model, *spacing, sampler),
        SamplerConfig::Sprinkle { density, seed } => {
            sprinkle_discretize(model, *density, *seed, sampler)
        }
    }
}

/// Chart bounds used for grid construction and sprinkle bounding boxes:
/// per-axis `(start, end)` in grid-chart coordinates.
fn chart_bounds(model: &ModelSpacetime) -> Vec<(f64, f64)> {
    match &model.region {
        Region::Box_ { min, max } => min.iter().zip(max).map(|(&a, &b)| (a, b)).collect(),
        Region::Diamond { height } => {
            let mut b = vec![(0.0, *height)];
            b.extend((1..model.dim).map(|_| (-height / 2.0, height / 2.0)));
            b
        }
        Region::Wedge { rho_min, rho_max, chi_max } => {
            let mut b = vec![(*rho_min, *rho_max)];
            b.extend((1..model.dim).map(|_| (-*chi_max, *chi_max)));
            b
        }
    }
}

/// Grid-chart coordinates of a stored-coordinate point (identity except for
/// the wedge, whose stored coordinates are ambient).
fn grid_chart_from_stored(model: &ModelSpacetime, p: &[f64]) -> Option<Vec<f64>> {
    match model.kind {
        ModelKind::MilneWedge => wedge_chart_from_ambient(p),
        _ => Some(p.to_vec()),
    }
}

fn stored_from_grid_chart(model: &ModelSpacetime, chart: &[f64]) -> Vec<f64> {
    match model.kind {
        ModelKind::MilneWedge => wedge_ambient_from_chart(chart),
        _ => chart.to_vec(),
    }
}

fn lattice_discretize(
    model: &ModelSpacetime,
    spacing: f64,
    sampler: &SamplerConfig,
) -> Result<FiniteCausalSpace, ModelError> {
    if !spacing.is_finite() || spacing <= 0.0 {
        return Err(ModelError::BadRegion(format!(
            "lattice spacing must be positive, got {spacing}"
        )));
    }
    let bounds = chart_bounds(model);
    let snap_eps = 1e-9;
    let mut start = Vec::new();
    let mut count = Vec::new();
    // The wedge anchors its grid at the top of the rho axis so the initial
    // slice rho = rho_max is sampled exactly; box axes anchor at the lower
    // bound.
    for (a, &(lo, hi)) in bounds.iter().enumerate() {
        let k = ((hi - lo) / spacing + snap_eps).floor() as usize;
        let s = if matches!(model.kind, ModelKind::MilneWedge) && a == 0 {
            hi - k as f64 * spacing
        } else {
            lo
        };
        start.push(s);
        count.push(k + 1);
    }
    let cells: usize = count.iter().product();
    if cells > LATTICE_MAX_CELLS {
        return Err(ModelError::LatticeTooLarge { cells, max: LATTICE_MAX_CELLS });
    }
    let dim = model.dim;
    let mut lookup = vec![-1i64; cells];
    let mut coords = Vec::new();
    let mut weight = Vec::new();
    let mut key = vec![0usize; dim];
    let scale = bounds
        .iter()
        .fold(0.0f64, |acc, &(lo, hi)| acc.max(lo.abs()).max(hi.abs()));
    let wcell = spacing.powi(dim as i32);
    for (flat, slot) in lookup.iter_mut().enumerate() {
        let mut rem = flat;
        for (k, &c) in key.iter_mut().zip(&count).rev() {
            *k = rem % c;
            rem /= c;
        }
        let chart: Vec<f64> = (0..dim)
            .map(|a| start[a] + key[a] as f64 * spacing)
            .collect();
        let stored = stored_from_grid_chart(model, &chart);
        if !model.contains_slack(&stored, 1e-9 * (1.0 + scale)) {
            continue;
        }
        *slot = (coords.len() / dim) as i64;
        coords.extend_from_slice(&stored);
        weight.push(chart_density(model, &stored) * wcell);
    }
    if coords.is_empty() {
        return Err(ModelError::EmptyDiscretization);
    }
    let step = vec![spacing; dim];
    let meta = SpaceMeta {
        model: model.clone(),
        sampler: sampler.clone(),
        grid: Some(GridMeta { start, step, count, lookup }),
    };
    let space = FiniteCausalSpace::model_backed(coords, weight, meta, spacing)?;
    Ok(space)
}

fn sprinkle_discretize(
    model: &ModelSpacetime,
    density: f64,
    seed: u64,
    sampler: &SamplerConfig,
) -> Result<FiniteCausalSpace, ModelError> {
    if !density.is_finite() || density <= 0.0 {
        return Err(ModelError::BadRegion(format!(
            "sprinkle density must be positive, got {density}"
        )));
    }
    let bounds = chart_bounds(model);
    let box_vol: f64 = bounds.iter().map(|&(lo, hi)| hi - lo).product();
    // Upper bound on the chart density over the region, for thinning.
    let g_max = match model.kind {
        ModelKind::Minkowski => 1.0,
        ModelKind::ConstantCurvature { k_sec } => {
            let r = curvature_radius(k_sec);
            if k_sec < 0.0 {
                let t_abs = bounds[0].0.abs().max(bounds[0].1.abs());
                r * (t_abs / r).cosh()
            } else {
                let rho_abs = bounds[1].0.abs().max(bounds[1].1.abs());
                r * rho_abs.cosh()
            }
        }
        ModelKind::MilneWedge => {
            let rho_max = bounds[0].1;
            let rad_max = norm(&vec![bounds[1].1; model.dim - 1]);
            let mut chart = vec![rho_max];
            chart.extend(std::iter::repeat_n(
                rad_max / ((model.dim - 1) as f64).sqrt(),
                model.dim - 1,
            ));
            wedge_chart_density(model.dim, &chart) * 1.000_000_1
        }
    };
    let lambda = density * g_max * box_vol;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n_box = Poisson::new(lambda.max(1e-12))
        .expect("positive rate")
        .sample(&mut rng)
        .round() as usize;
    let dim = model.dim;
    let mut coords = Vec::new();
    for _ in 0..n_box {
        let chart: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect();
        let stored = stored_from_grid_chart(model, &chart);
        if !model.contains(&stored) {
            continue;
        }
        let g = chart_density(model, &stored);
        if rng.gen::<f64>() * g_max <= g {
            coords.extend_from_slice(&stored);
        }
    }
    if coords.is_empty() {
        return Err(ModelError::EmptyDiscretization);
    }
    let n = coords.len() / dim;
    let weight = vec![1.0 / density; n];
    let meta = SpaceMeta { model: model.clone(), sampler: sampler.clone(), grid: None };
    let space =
        FiniteCausalSpace::model_backed(coords, weight, meta, density.powf(-1.0 / dim as f64))?;
    Ok(space)
}

/// O(1) lattice snap used by [`FiniteCausalSpace::nearest_point`]: round in
/// the grid chart, then take the Euclidean nearest stored point over the
/// surrounding 3^dim cells. Ties resolve to the lowest index.
pub(crate) fn grid_snap(
    meta: &SpaceMeta,
    coords: &[f64],
    dim: usize,
    target: &[f64],
) -> Option<usize> {
    let grid = meta.grid.as_ref()?;
    let chart = grid_chart_from_stored(&meta.model, target)?;
    let mut center = Vec::with_capacity(dim);
    for ((&c, (&st, &sp)), &ct) in chart
        .iter()
        .zip(grid.start.iter().zip(&grid.step))
        .zip(&grid.count)
    {
        let r = (c - st) / sp;
        // Round halves down so coordinate ties land on the lower index.
        let k = (r - 0.5).ceil() as i64;
        center.push(k.clamp(0, ct as i64 - 1));
    }
    let mut best: Option<(f64, usize)> = None;
    let mut offsets = vec![-1i64; dim];
    'outer: loop {
        let key: Vec<i64> = center.iter().zip(&offsets).map(|(c, o)| c + o).collect();
        if let Some(idx) = grid.at(&key) {
            let p = &coords[idx * dim..(idx + 1) * dim];
            let d: f64 = p
                .iter()
                .zip(target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let better = match best {
                None => true,
                Some((bd, bi)) => d < bd || (d == bd && idx < bi),
            };
            if better {
                best = Some((d, idx));
            }
        }
        for a in (0..dim).rev() {
            if offsets[a] < 1 {
                offsets[a] += 1;
                continue 'outer;
            }
            offsets[a] = -1;
        }
        break;
    }
    best.map(|(_, i)| i)
}

/// Indices of the wedge lattice's initial slice (the `rho = rho_max` row).
pub fn wedge_initial_slice(space: &FiniteCausalSpace) -> Result<Vec<usize>, ModelError> {
    let meta = space.meta().ok_or(ModelError::NoModelMeta)?;
    if !matches!(meta.model.kind, ModelKind::MilneWedge) {
        return Err(ModelError::WrongSampler {
            needed: "wedge lattice".into(),
            got: format!("{} {}", meta.model.kind.name(), meta.sampler.name()),
        });
    }
    let grid = meta.grid.as_ref().ok_or_else(|| ModelError::WrongSampler {
        needed: "lattice".into(),
        got: meta.sampler.name().into(),
    })?;
    let top = grid.count[0] - 1;
    let spatial: usize = grid.count[1..].iter().product();
    let mut out = Vec::new();
    for s in 0..spatial {
        let flat = top * spatial + s;
        let v = grid.lookup[flat];
        if v >= 0 {
            out.push(v as usize);
        }
    }
    Ok(out)
}

/// Volume of the unit ball in `k` Euclidean dimensions.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        k => unit_ball_volume(k - 2) * 2.0 * std::f64::consts::PI / k as f64,
    }
}

/// Volume of a causal diamond of height `tau` in flat `dim`-space.
pub fn diamond_volume(dim: usize, tau: f64) -> f64 {
    2.0 * unit_ball_volume(dim - 1) * (tau / 2.0).powi(dim as i32) / dim as f64
}

/// Mean of the limiting fluctuation law entering the planar longest-chain
/// estimate.
const CHAIN_FLUCTUATION_MEAN: f64 = -1.771_086_8;

fn chain_constant(dim: usize) -> Result<f64, ModelError> {
    match dim {
        2 => Ok(2.0),
        3 => Ok(2.26),
        4 => Ok(2.31),
        _ => Err(ModelError::ChainDimension { dim }),
    }
}

/// Estimates the time separation between two sprinkled points from the
/// longest causal chain joining them. Returns zero when `i` is not below `j`.
///
/// The interior chain length is matched to its known mean for a Poisson cloud
/// of `m` points (`c_dim * m^(1/dim)`, with a second-order fluctuation
/// correction in dimension 2), and `m` is converted to a separation through
/// the diamond volume law.
pub fn chain_length_tau(
    space: &FiniteCausalSpace,
    i: usize,
    j: usize,
) -> Result<f64, ModelError> {
    let meta = space.meta().ok_or(ModelError::NoModelMeta)?;
    let density = match meta.sampler {
        SamplerConfig::Sprinkle { density, .. } => density,
        SamplerConfig::Lattice { .. } => {
            return Err(ModelError::WrongSampler {
                needed: "sprinkle".into(),
                got: "lattice".into(),
            });
        }
    };
    let dim = space.dim();
    let c = chain_constant(dim)?;
    if !space.leq(i, j) || i == j {
        return Ok(0.0);
    }
    // Interval between the endpoints, sorted by coordinate time (axis 0 is a
    // time function in every supported chart).
    let mut interval: Vec<usize> = (0..space.n())
        .filter(|&k| space.leq(i, k) && space.leq(k, j))
        .collect();
    interval.sort_by(|&a, &b| {
        space.coords(a)[0]
            .partial_cmp(&space.coords(b)[0])
            .unwrap()
            .then(a.cmp(&b))
    });
    let pos_of = |x: usize| interval.iter().position(|&k| k == x).unwrap();
    let (pi, pj) = (pos_of(i), pos_of(j));
    let mut longest = vec![0usize; interval.len()];
    longest[pi] = 1;
    for a in 0..interval.len() {
        if longest[a] == 0 {
            continue;
        }
        for b in (a + 1)..interval.len() {
            if space.leq(interval[a], interval[b]) {
                longest[b] = longest[b].max(longest[a] + 1);
            }
        }
    }
    let total_points = longest[pj];
    if total_points < 3 {
        return Ok(0.0);
    }
    let interior = (total_points - 2) as f64;
    // Invert the mean chain-length law for the interior point count.
    let m_hat = if dim == 2 {
        let f = |m: f64| 2.0 * m.sqrt() + CHAIN_FLUCTUATION_MEAN * m.powf(1.0 / 6.0) - interior;
        let (mut lo, mut hi): (f64, f64) = (1e-9, 1e16);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    } else {
        (interior / c).powi(dim as i32)
    };
    Ok((m_hat / (density * diamond_volume(dim, 1.0))).powf(1.0 / dim as f64))
}

/// Cross-checks the closed-form separation of a curved model against a direct
/// geodesic-shooting integration of the chart equations of motion, on
/// `pairs` seeded random chronological pairs. Flat kinds pass trivially.
pub fn reference_chord_check(
    model: &ModelSpacetime,
    pairs: usize,
    tol: f64,
) -> Result<(), ModelError> {
    let ModelKind::ConstantCurvature { k_sec } = model.kind else {
        return Ok(());
    };
    let (min, max) = match &model.region {
        Region::Box_ { min, max } => (min.clone(), max.clone()),
        _ => unreachable!("curved models are validated to box regions"),
    };
    let r = curvature_radius(k_sec);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5EED_CAFE);
    let mut max_err: f64 = 0.0;
    let mut found = 0usize;
    let scale = (max[0] - min[0]).min(r);
    while found < pairs {
        let draw = |rng: &mut ChaCha20Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
        let x = vec![draw(&mut rng, min[0], max[0]), draw(&mut rng, min[1], max[1])];
        let y = vec![draw(&mut rng, min[0], max[0]), draw(&mut rng, min[1], max[1])];
        let tau = model_tau(model, &x, &y);
        if tau < 0.05 * scale {
            continue;
        }
        found += 1;
        let shot = shoot_chord(k_sec, &x, &y);
        let err = (shot - tau).abs() / (1.0 + tau);
        max_err = max_err.max(err);
    }
    if max_err > tol {
        return Err(ModelError::ChordGateFailed { max_err, pairs, tol });
    }
    Ok(())
}

/// Proper time between two chart points of the curved family obtained by
/// shooting geodesics from `x` and bisecting the launch rapidity until the
/// trajectory hits `y`. Works in curvature units internally.
fn shoot_chord(k_sec: f64, x: &[f64], y: &[f64]) -> f64 {
    let r = curvature_radius(k_sec);
    let (t1, s1, t2, s2) = (x[0] / r, x[1], y[0] / r, y[1]);
    // Shooting misses in the spatial coordinate as a function of launch
    // rapidity; the chart time is strictly monotone along future timelike
    // geodesics in both charts, so integration stops at the target time.
    let miss = |beta: f64| -> (f64, f64) {
        let (s_end, proper) = integrate_to_time(k_sec < 0.0, t1, s1, t2, beta);
        (s_end - s2, proper)
    };
    let (mut lo, mut hi) = bracket_rapidity(&miss);
    let mut f_lo = miss(lo).0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let f_mid = miss(mid).0;
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let (_, proper) = miss(0.5 * (lo + hi));
    proper * r
}

fn bracket_rapidity(miss: &dyn Fn(f64) -> (f64, f64)) -> (f64, f64) {
    let mut prev_beta = -8.0;
    let mut prev = miss(prev_beta).0;
    let mut beta = prev_beta;
    while beta < 8.0 {
        beta += 0.25;
        let cur = miss(beta).0;
        if prev * cur <= 0.0 {
            return (prev_beta, beta);
        }
        prev = cur;
        prev_beta = beta;
    }
    panic!("no launch rapidity bracket found for the shooting check");
}

/// Integrates the unit-curvature geodesic equations from `(t1, s1)` with
/// launch rapidity `beta` until chart time `t2`; returns the final spatial
/// coordinate and the proper time. `unbounded` selects the chart.
fn integrate_to_time(unbounded: bool, t1: f64, s1: f64, t2: f64, beta: f64) -> (f64, f64) {
    // State (t, s, s_dot); t_dot recovered from the conserved quantities so
    // the normalization cannot drift.
    let deriv = |st: &[f64; 3], e: f64| -> [f64; 3] {
        if unbounded {
            // Scale factor cosh(t): conserved j = cosh(t)^2 s_dot at launch
            // is not used; integrate s_dot directly.
            let a = st[0].cosh();
            let t_dot = (1.0 + a * a * st[2] * st[2]).sqrt();
            let s_ddot = -2.0 * (st[0].sinh() / a) * t_dot * st[2];
            [t_dot, st[2], s_ddot]
        } else {
            // Lapse cosh(s): conserved e = cosh(s)^2 t_dot.
            let c = st[1].cosh();
            let t_dot = e / (c * c);
            let s_ddot = -e * e * st[1].sinh() / (c * c * c);
            [t_dot, st[2], s_ddot]
        }
    };
    let e = if unbounded { 0.0 } else { beta.cosh() * s1.cosh() };
    let mut st = if unbounded {
        [t1, s1, beta.sinh() / t1.cosh()]
    } else {
        [t1, s1, beta.sinh()]
    };
    let mut proper = 0.0;
    let span = t2 - t1;
    let h = span / 800.0;
    let step = |st: &mut [f64; 3], h: f64| {
        let k1 = deriv(st, e);
        let mid1 = [st[0] + 0.5 * h * k1[0], st[1] + 0.5 * h * k1[1], st[2] + 0.5 * h * k1[2]];
        let k2 = deriv(&mid1, e);
        let mid2 = [st[0] + 0.5 * h * k2[0], st[1] + 0.5 * h * k2[1], st[2] + 0.5 * h * k2[2]];
        let k3 = deriv(&mid2, e);
        let end = [st[0] + h * k3[0], st[1] + h * k3[1], st[2] + h * k3[2]];
        let k4 = deriv(&end, e);
        for c in 0..3 {
            st[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    };
    while st[0] < t2 - 1e-13 {
        let t_dot = deriv(&st, e)[0];
        let h_here = h.min((t2 - st[0]) / t_dot * 1.000_000_000_1).max(1e-15);
        step(&mut st, h_here);
        proper += h_here;
    }
    (st[1], proper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{signed_time_separation, AchronalSet};

    fn flat2(min: [f64; 2], max: [f64; 2]) -> ModelSpacetime {
        ModelSpacetime::new(
            ModelKind::Minkowski,
            2,
            Region::Box_ { min: min.to_vec(), max: max.to_vec() },
        )
        .unwrap()
    }

    #[test]
    fn flat_separation_and_order() {
        let m = flat2([0.0, 0.0], [2.0, 2.0]);
        let tau = model_tau(&m, &[0.0, 0.0], &[2.0, 1.0]);
        assert!((tau - 3.0f64.sqrt()).abs() < 1e-15);
        assert!(model_leq(&m, &[0.0, 0.0], &[1.0, 1.0]));
        assert_eq!(model_tau(&m, &[0.0, 0.0], &[1.0, 1.0]), 0.0);
        assert!(!model_leq(&m, &[0.0, 0.0], &[1.0, 1.5]));
        assert_eq!(model_tau(&m, &[2.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn box_lattice_point_count_and_mass() {
        let m = flat2([0.0, 0.0], [1.0, 1.0]);
        let s = discretize(&m, &SamplerConfig::Lattice { spacing: 0.5 }).unwrap();
        assert_eq!(s.n(), 9);
        let total: f64 = s.weights().iter().sum();
        assert!((total - 2.25).abs() < 1e-12);
    }

    #[test]
    fn diamond_lattice_keeps_null_boundary() {
        let m = ModelSpacetime::new(ModelKind::Minkowski, 2, Region::Diamond { height: 1.0 })
            .unwrap();
        let s = discretize(&m, &SamplerConfig::Lattice { spacing: 0.5 }).unwrap();
        assert_eq!(s.n(), 5);
    }

    #[test]
    fn sprinkle_is_deterministic_and_weighted() {
        let m = flat2([0.0, 0.0], [1.0, 1.0]);
        let cfg = SamplerConfig::Sprinkle { density: 200.0, seed: 11 };
        let a = discretize(&m, &cfg).unwrap();
        let b = discretize(&m, &cfg).unwrap();
        assert_eq!(a.all_coords(), b.all_coords());
        assert!((a.weight(0) - 1.0 / 200.0).abs() < 1e-18);
    }

    #[test]
    fn sprinkle_counts_follow_the_intensity() {
        let m = flat2([0.0, 0.0], [1.0, 1.0]);
        let mut total = 0usize;
        for seed in 0..50 {
            let s =
                discretize(&m, &SamplerConfig::Sprinkle { density: 100.0, seed }).unwrap();
            total += s.n();
        }
        let expected = 50.0 * 100.0;
        assert!(
            (total as f64 - expected).abs() < 3.0 * expected.sqrt(),
            "total {total} vs {expected}"
        );
    }

    #[test]
    fn curved_chart_density_thins_the_sprinkle() {
        let m = ModelSpacetime::new(
            ModelKind::ConstantCurvature { k_sec: -1.0 },
            2,
            Region::Box_ { min: vec![-0.8, -0.5], max: vec![0.8, 0.5] },
        )
        .unwrap();
        let mut total = 0usize;
        for seed in 100..130 {
            let s =
                discretize(&m, &SamplerConfig::Sprinkle { density: 150.0, seed }).unwrap();
            total += s.n();
        }
        // Volume = int cosh(t) dt dtheta = 2 sinh(0.8) * 1.0.
        let vol = 2.0 * 0.8f64.sinh();
        let expected = 30.0 * 150.0 * vol;
        assert!(
            (total as f64 - expected).abs() < 3.0 * expected.sqrt(),
            "total {total} vs {expected}"
        );
    }

    #[test]
    fn unbounded_chord_matches_comoving_time() {
        let m = ModelSpacetime::new(
            ModelKind::ConstantCurvature { k_sec: -1.0 },
            2,
            Region::Box_ { min: vec![-1.0, -1.0], max: vec![1.0, 1.0] },
        )
        .unwrap();
        let tau = model_tau(&m, &[-0.5, 0.3], &[0.7, 0.3]);
        assert!((tau - 1.2).abs() < 1e-12, "comoving pair separation {tau}");
        // Spatial translation and reflection invariance.
        let a = model_tau(&m, &[-0.4, -0.2], &[0.6, 0.1]);
        let b = model_tau(&m, &[-0.4, 0.0], &[0.6, 0.3]);
        let c = model_tau(&m, &[-0.4, 0.2], &[0.6, -0.1]);
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
    }

    #[test]
    fn bounded_chord_measures_static_redshift() {
        let m = ModelSpacetime::new(
            ModelKind::ConstantCurvature { k_sec: 1.0 },
            2,
            Region::Box_ { min: vec![-0.05, -0.9], max: vec![0.05, 0.9] },
        )
        .unwrap();
        // Small chart-time step at fixed spatial coordinate: proper time is
        // stretched by cosh(rho) to leading order.
        let dt = 1e-3;
        let tau = model_tau(&m, &[0.0, 0.8], &[dt, 0.8]);
        assert!((tau / (dt * 0.8f64.cosh()) - 1.0).abs() < 1e-5);
        // Causality matches the conformal criterion.
        let sig = |rho: f64| rho.sinh().atan();
        for (x, y) in [([0.0, -0.3], [0.04, 0.2]), ([0.0, 0.0], [0.04, 0.01])] {
            let conformal = y[0] - x[0] > (sig(y[1]) - sig(x[1])).abs() + 1e-9;
            assert_eq!(model_tau(&m, &x, &y) > 0.0, conformal, "{x:?} {y:?}");
        }
    }

    #[test]
    fn shooting_integrator_confirms_both_curved_chords() {
        for k_sec in [-1.0, -0.5] {
            let m = ModelSpacetime::new(
                ModelKind::ConstantCurvature { k_sec },
                2,
                Region::Box_ { min: vec![-0.6, -0.5], max: vec![0.6, 0.5] },
            )
            .unwrap();
            reference_chord_check(&m, 20, 1e-6).unwrap();
        }
        for k_sec in [1.0, 2.0] {
            let m = ModelSpacetime::new(
                ModelKind::ConstantCurvature { k_sec },
                2,
                Region::Box_ { min: vec![-0.25, -0.25], max: vec![0.25, 0.25] },
            )
            .unwrap();
            reference_chord_check(&m, 20, 1e-6).unwrap();
        }
    }

    #[test]
    fn bounded_chart_gates_reject_bad_boxes() {
        let build = |min: [f64; 2], max: [f64; 2]| {
            ModelSpacetime::new(
                ModelKind::ConstantCurvature { k_sec: 1.0 },
                2,
                Region::Box_ { min: min.to_vec(), max: max.to_vec() },
            )
        };
        assert!(matches!(
            build([-2.0, -0.5], [2.0, 0.5]).unwrap_err(),
            ModelError::RegionTooLarge { .. }
        ));
        assert!(matches!(
            build([-1.4, -0.7], [1.4, 0.7]).unwrap_err(),
            ModelError::SeparationWindowExceeded { .. }
        ));
        assert!(matches!(
            build([0.0, -0.6], [1.5, 0.6]).unwrap_err(),
            ModelError::RegionBulge { .. }
        ));
    }

    #[test]
    fn interpolation_splits_separation_proportionally() {
        let models = [
            flat2([0.0, -2.0], [3.0, 2.0]),
            ModelSpacetime::new(
                ModelKind::ConstantCurvature { k_sec: -1.0 },
                2,
                Region::Box_ { min: vec![-0.9, -0.8], max: vec![0.9, 0.8] },
            )
            .unwrap(),
            ModelSpacetime::new(
                ModelKind::ConstantCurvature { k_sec: 1.0 },
                2,
                Region::Box_ { min: vec![-0.3, -0.25], max: vec![0.3, 0.25] },
            )
            .unwrap(),
        ];
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for m in &models {
            let (min, max) = match &m.region {
                Region::Box_ { min, max } => (min.clone(), max.clone()),
                _ => unreachable!(),
            };
            let mut checked = 0;
            while checked < 60 {
                let draw = |rng: &mut ChaCha20Rng, a: usize| {
                    min[a] + (max[a] - min[a]) * rng.gen::<f64>()
                };
                let x = vec![draw(&mut rng, 0), draw(&mut rng, 1)];
                let y = vec![draw(&mut rng, 0), draw(&mut rng, 1)];
                let tau = model_tau(m, &x, &y);
                if tau < 1e-3 {
                    continue;
                }
                checked += 1;
                for t in [0.25, 0.5, 0.75] {
                    let g = geodesic_interpolate(m, &x, &y, t).unwrap();
                    let lhs = model_tau(m, &x, &g);
                    assert!(
                        (lhs - t * tau).abs() <= 1e-9 * (1.0 + tau),
                        "first leg {lhs} vs {} at t={t}",
                        t * tau
                    );
                    let rhs = model_tau(m, &g, &y);
                    assert!((rhs - (1.0 - t) * tau).abs() <= 1e-9 * (1.0 + tau));
                }
            }
        }
    }

    #[test]
    fn interpolation_requires_chronology() {
        let m = flat2([0.0, 0.0], [1.0, 1.0]);
        let err = geodesic_interpolate(&m, &[0.0, 0.0], &[0.5, 0.5], 0.5).unwrap_err();
        assert!(matches!(err, ModelError::NotTimelike { .. }));
    }

    #[test]
    fn radial_density_families() {
        let flat3 = ModelSpacetime::new(
            ModelKind::Minkowski,
            3,
            Region::Box_ { min: vec![0.0; 3], max: vec![1.0; 3] },
        )
        .unwrap();
        assert!((model_radial_density(&flat3, 0.5).unwrap() - 0.25).abs() < 1e-15);
        let hyp = ModelSpacetime::new(
            ModelKind::ConstantCurvature { k_sec: -1.0 },
            2,
            Region::Box_ { min: vec![-0.5, -0.5], max: vec![0.5, 0.5] },
        )
        .unwrap();
        assert!((model_radial_density(&hyp, 1.0).unwrap() - 1.0f64.sinh()).abs() < 1e-12);
        let sph = ModelSpacetime::new(
            ModelKind::ConstantCurvature { k_sec: 1.0 },
            2,
            Region::Box_ { min: vec![-0.4, -0.2], max: vec![0.4, 0.2] },
        )
        .unwrap();
        assert!((model_radial_density(&sph, 1.0).unwrap() - 1.0f64.sin()).abs() < 1e-12);
        assert!(matches!(
            model_radial_density(&sph, 3.2),
            Err(ModelError::RadialDomain { .. })
        ));
    }

    fn wedge(dim: usize, rho_min: f64, chi_max: f64) -> ModelSpacetime {
        ModelSpacetime::new(
            ModelKind::MilneWedge,
            dim,
            Region::Wedge { rho_min, rho_max: 1.0, chi_max },
        )
        .unwrap()
    }

    #[test]
    fn wedge_chart_round_trips() {
        let chart = vec![0.7, 0.3, -0.2];
        let p = wedge_ambient_from_chart(&chart);
        let back = wedge_chart_from_ambient(&p).unwrap();
        for (a, b) in chart.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(p[0] < 0.0);
    }

    #[test]
    fn wedge_initial_slice_measures_unit_separation() {
        let m = wedge(2, 0.25, 0.4);
        let s = discretize(&m, &SamplerConfig::Lattice { spacing: 0.05 }).unwrap();
        let v = wedge_initial_slice(&s).unwrap();
        assert!(!v.is_empty());
        let vset = AchronalSet::new(&s, v).unwrap();
        let tv = signed_time_separation(&s, &vset);
        let mut max_err: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for (i, &t) in tv.iter().enumerate() {
            let rho = wedge_chart_from_ambient(s.coords(i)).unwrap()[0];
            if t > 0.0 {
                max_err = max_err.max((t - (1.0 - rho)).abs());
            }
            sup = sup.max(t);
        }
        assert!(max_err < 1e-12, "separation from slice deviates by {max_err}");
        assert!((sup - 0.75).abs() < 1e-12, "sup separation {sup}");
    }

    #[test]
    fn wedge_weights_follow_the_radial_power() {
        for dim in [2usize, 3] {
            let m = wedge(dim, 0.2, 0.3);
            let s = discretize(&m, &SamplerConfig::Lattice { spacing: 0.1 }).unwrap();
            // Two points on the same rapidity column: weight ratio equals
            // (rho1/rho0)^(dim-1) exactly for dim 2 and for the chi = 0
            // column in any dimension.
            let mut column: Vec<(f64, f64)> = (0..s.n())
                .filter_map(|i| {
                    let c = wedge_chart_from_ambient(s.coords(i)).unwrap();
                    (c[1..].iter().all(|&x| x.abs() < 1e-12))
                        .then(|| (c[0], s.weight(i)))
                })
                .collect();
            column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            assert!(column.len() >= 3);
            for w in column.windows(2) {
                let expect = (w[1].0 / w[0].0).powi(dim as i32 - 1);
                assert!(((w[1].1 / w[0].1) / expect - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_length_estimates_diamond_height() {
        let m = ModelSpacetime::new(ModelKind::Minkowski, 2, Region::Diamond { height: 1.0 })
            .unwrap();
        let s = discretize(&m, &SamplerConfig::Sprinkle { density: 2000.0, seed: 3 }).unwrap();
        let bot = s.nearest_point(&[0.0, 0.0]);
        let top = s.nearest_point(&[1.0, 0.0]);
        let est = chain_length_tau(&s, bot, top).unwrap();
        let truth = s.tau(bot, top);
        assert!(
            (est - truth).abs() <= 0.1 * truth,
            "estimate {est} vs separation {truth}"
        );
        let (a, b) = (s.nearest_point(&[0.2, 0.1]), s.nearest_point(&[0.21, 0.2]));
        if !s.leq(a, b) {
            assert_eq!(chain_length_tau(&s, a, b).unwrap(), 0.0);
        }
    }

    #[test]
    fn lattice_snap_agrees_with_linear_scan() {
        let m = flat2([0.0, -1.0], [2.0, 1.0]);
        let s = discretize(&m, &SamplerConfig::Lattice { spacing: 0.25 }).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..200 {
            let target = [2.0 * rng.gen::<f64>(), -1.0 + 2.0 * rng.gen::<f64>()];
            let via_grid = s.nearest_point(&target);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for i in 0..s.n() {
                let c = s.coords(i);
                let d = (c[0] - target[0]).powi(2) + (c[1] - target[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            assert_eq!(via_grid, best);
        }
        // Exact midpoints resolve to the lower index through both paths.
        assert_eq!(s.nearest_point(&[0.125, 0.0]), s.nearest_point(&[0.125, 0.0]));
    }

    #[test]
    fn diamond_volume_matches_known_values() {
        assert!((diamond_volume(2, 1.0) - 0.5).abs() < 1e-15);
        assert!((diamond_volume(3, 1.0) - std::f64::consts::PI / 12.0).abs() < 1e-15);
        assert!((diamond_volume(4, 1.0) - std::f64::consts::PI / 24.0).abs() < 1e-15);
    }

    #[test]
    fn kinds_reject_wrong_regions_and_dims() {
        assert!(matches!(
            ModelSpacetime::new(
                ModelKind::ConstantCurvature { k_sec: -1.0 },
                3,
                Region::Box_ { min: vec![0.0; 3], max: vec![1.0; 3] },
            ),
            Err(ModelError::UnsupportedDim { .. })
        ));
        assert!(matches!(
            ModelSpacetime::new(ModelKind::Minkowski, 2, Region::Wedge {
                rho_min: 0.1,
                rho_max: 1.0,
                chi_max: 0.5
            }),
            Err(ModelError::RegionMismatch { .. })
        ));
        assert!(matches!(
            ModelSpacetime::new(ModelKind::MilneWedge, 2, Region::Wedge {
                rho_min: 0.0,
                rho_max: 1.0,
                chi_max: 0.5
            }),
            Err(ModelError::BadRegion(_))
        ));
    }
}
