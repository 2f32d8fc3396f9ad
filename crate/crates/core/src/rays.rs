//! Disintegration of a space's reference measure along the gradient flow of
//! the signed time separation from an achronal set: the transport relation,
//! extraction of maximal separation-isometric chains ("rays"), density
//! profiles along rays with curvature-dimension bounds, transverse level
//! measures, a mean-curvature estimate at the set, and a singularity
//! certificate combining the estimate with the focusing threshold.

use serde::Serialize;
use thiserror::Error;

use crate::certify::Verdict;
use crate::coeff::{hawking_threshold, s_c_coeff, CoeffError, HawkingParams};
use crate::space::{
    signed_time_separation, AchronalSet, FiniteCausalSpace, SpaceError,
};

#[derive(Debug, Error)]
pub enum RayError {
    #[error("curvature parameter must be finite, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension parameter is out of range: {0}")]
    InvalidDimension(f64),
    #[error("tolerance must be a small non-negative fraction, got {0}")]
    InvalidTolerance(f64),
    #[error("no point lies strictly on the requested side of the set")]
    EmptyTransportSet,
    #[error("ray family is unusable: {0}")]
    DegenerateFamily(String),
    #[error(
        "every ray anchors at the same point, so the set behaves like a \
         single event rather than a hypersurface"
    )]
    CodimensionMismatch,
    #[error("ray samples are malformed: {0}")]
    BadSamples(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

/// Which side of the achronal set the rays explore. The ray parameter is
/// the unsigned separation from the set, growing away from it on either
/// side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RaySide {
    Future,
    Past,
}

/// Pairs of points between which the signed separation from the set acts
/// as arc length: `(u, w)` with `w` strictly farther from the set, the
/// pair chronological in the side's causal direction, and the separation
/// gap equal to the pairwise separation within `eps`.
#[derive(Debug, Clone)]
pub struct TransportRelation {
    pub side: RaySide,
    pub eps: f64,
    /// Signed separation from the set, for every point of the space.
    pub tau_v: Vec<f64>,
    /// Points participating on this side: strictly on the side, plus the
    /// set members themselves (parameter zero).
    pub candidates: Vec<usize>,
    /// Relation pairs `(u, w)`, parameter increasing from `u` to `w`.
    pub pairs: Vec<(usize, usize)>,
}

/// Default equality tolerance for the transport relation: a two-cell bound
/// on meshes (both the separation field and the pairwise separation carry
/// one-cell discretization error), a tight relative bound on point clouds
/// whose separation field is exact by construction.
pub fn default_relation_eps(space: &FiniteCausalSpace, tau_v: &[f64]) -> f64 {
    let max_abs = tau_v.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    match space.resolution() {
        Some(delta) => 2.0 * delta * (1.0 + max_abs),
        None => 1e-9 * (1.0 + max_abs),
    }
}

fn side_param(side: RaySide, tau_v: f64) -> f64 {
    match side {
        RaySide::Future => tau_v,
        RaySide::Past => -tau_v,
    }
}

/// Pairwise separation in the side's causal direction: from the point
/// nearer the set toward the farther one.
fn side_tau(space: &FiniteCausalSpace, side: RaySide, u: usize, w: usize) -> f64 {
    match side {
        RaySide::Future => space.tau(u, w),
        RaySide::Past => space.tau(w, u),
    }
}

/// Builds the transport relation of the set on one side.
pub fn transport_relation(
    space: &FiniteCausalSpace,
    v: &AchronalSet,
    side: RaySide,
    eps: f64,
) -> Result<TransportRelation, RayError> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(RayError::InvalidTolerance(eps));
    }
    let tau_v = signed_time_separation(space, v);
    let in_set = set_mask(space.n(), v);
    let mut candidates: Vec<usize> = (0..space.n())
        .filter(|&i| side_param(side, tau_v[i]) > 0.0 || in_set[i])
        .collect();
    if candidates.iter().all(|&i| in_set[i]) {
        return Err(RayError::EmptyTransportSet);
    }
    candidates.sort_by(|&a, &b| {
        side_param(side, tau_v[a])
            .partial_cmp(&side_param(side, tau_v[b]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut pairs = Vec::new();
    for &u in &candidates {
        let pu = side_param(side, tau_v[u]);
        for &w in &candidates {
            let pw = side_param(side, tau_v[w]);
            if pw <= pu {
                continue;
            }
            let tau = side_tau(space, side, u, w);
            if tau > 0.0 && (pw - pu - tau).abs() <= eps {
                pairs.push((u, w));
            }
        }
    }
    Ok(TransportRelation { side, eps, tau_v, candidates, pairs })
}

fn set_mask(n: usize, v: &AchronalSet) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &i in v.members() {
        mask[i] = true;
    }
    mask
}

/// One maximal chain of the transport relation, with its mass profile.
#[derive(Debug, Clone, Serialize)]
pub struct Ray {
    /// Point indices ordered by increasing parameter. The seeding set
    /// member, if any, is recorded as the anchor and excluded here: rays
    /// carry only the mass strictly on their side of the set.
    pub points: Vec<usize>,
    /// Separation-from-set parameter of each point, strictly increasing.
    pub params: Vec<f64>,
    pub masses: Vec<f64>,
    /// Set member from which this ray emanates.
    pub anchor: usize,
    /// Parameter window covered by the ray's sample cells.
    pub a: f64,
    pub b: f64,
    /// Total mass carried by the ray.
    pub q_weight: f64,
    /// Bin centers and one-dimensional mass densities along the parameter.
    pub bin_centers: Vec<f64>,
    pub bin_density: Vec<f64>,
    pub bin_width: f64,
    /// Per-point parameter cells (half-gap to each neighbor) used for
    /// density binning.
    cells: Vec<(f64, f64)>,
}

/// Upper bound on density bins per ray, protecting against pathological
/// width hints on large irregular samples.
const MAX_RAY_BINS: usize = 256;

impl Ray {
    /// Builds a ray from ordered samples: strictly increasing
    /// non-negative parameters, positive masses. Each sample's mass is
    /// spread over its parameter cell (halfway to each neighbor, extended
    /// one half-gap at the ends) and binned at width `width_hint`, or at
    /// a 32nd of the span when the hint is not positive. For uniformly
    /// spaced samples a hint equal to the spacing makes bins coincide
    /// with cells, so the density is free of binning artifacts.
    pub fn from_samples(
        points: Vec<usize>,
        params: Vec<f64>,
        masses: Vec<f64>,
        anchor: usize,
        width_hint: f64,
    ) -> Result<Ray, RayError> {
        let n = params.len();
        if n == 0 || points.len() != n || masses.len() != n {
            return Err(RayError::BadSamples(format!(
                "{} points, {} parameters, {} masses",
                points.len(),
                n,
                masses.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(RayError::BadSamples(
                "parameters must be finite".into(),
            ));
        }
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RayError::BadSamples(
                "parameters must be strictly increasing".into(),
            ));
        }
        if params[0] < 0.0 {
            return Err(RayError::BadSamples(
                "parameters must be non-negative".into(),
            ));
        }
        if masses.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(RayError::BadSamples("masses must be positive".into()));
        }
        if !(width_hint.is_finite() && width_hint >= 0.0) {
            return Err(RayError::BadSamples(format!(
                "bin width hint must be non-negative, got {width_hint}"
            )));
        }
        let mut cells = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 {
                (params[0] - 0.5 * (params.get(1).unwrap_or(&params[0]) - params[0]))
                    .max(0.0)
            } else {
                0.5 * (params[i - 1] + params[i])
            };
            let hi = if i + 1 == n {
                params[n - 1]
                    + 0.5
                        * (params[n - 1]
                            - params
                                .get(n.wrapping_sub(2))
                                .copied()
                                .unwrap_or(params[n - 1]))
            } else {
                0.5 * (params[i] + params[i + 1])
            };
            cells.push((lo, hi));
        }
        let a = cells[0].0;
        let b = cells[n - 1].1;
        let q_weight: f64 = masses.iter().sum();
        let span = b - a;
        let (bin_centers, bin_density, bin_width) = if span > 0.0 {
            let width0 = if width_hint > 0.0 { width_hint } else { span / 32.0 };
            // The slack absorbs float noise when the span is an exact
            // multiple of the hint, keeping bins aligned with cells.
            let nb = (((span / width0) - 1e-9).ceil() as usize)
                .clamp(1, MAX_RAY_BINS);
            let width = span / nb as f64;
            let mut bin_mass = vec![0.0f64; nb];
            for (i, &(lo, hi)) in cells.iter().enumerate() {
                if hi <= lo {
                    let bidx = (((params[i] - a) / width) as usize).min(nb - 1);
                    bin_mass[bidx] += masses[i];
                    continue;
                }
                let first = (((lo - a) / width).floor().max(0.0)) as usize;
                let last = ((((hi - a) / width).floor()) as usize).min(nb - 1);
                for (bidx, slot) in
                    bin_mass.iter_mut().enumerate().take(last + 1).skip(first)
                {
                    let blo = a + bidx as f64 * width;
                    let cover = (hi.min(blo + width) - lo.max(blo)).max(0.0);
                    *slot += masses[i] * cover / (hi - lo);
                }
            }
            (
                (0..nb).map(|bidx| a + (bidx as f64 + 0.5) * width).collect(),
                bin_mass.iter().map(|m| m / width).collect(),
                width,
            )
        } else {
            (Vec::new(), Vec::new(), 0.0)
        };
        Ok(Ray {
            points,
            params,
            masses,
            anchor,
            a,
            b,
            q_weight,
            bin_centers,
            bin_density,
            bin_width,
            cells,
        })
    }

    pub fn cells(&self) -> &[(f64, f64)] {
        &self.cells
    }
}

/// A family of rays disintegrating the transport set on one side.
#[derive(Debug, Clone, Serialize)]
pub struct RayFamily {
    pub side: RaySide,
    pub eps: f64,
    pub rays: Vec<Ray>,
    /// Reference mass of all points strictly on this side of the set.
    pub strict_mass: f64,
    /// Mass carried by the extracted rays; any gap against `strict_mass`
    /// is disintegration leakage.
    pub covered_mass: f64,
    /// Largest parameter reached by any point on this side (over the
    /// whole space, covered by rays or not), with a realizing point.
    pub sup_param: f64,
    pub sup_witness: Option<usize>,
}

/// Splits a chain wherever the accumulated parameter-isometry defect
/// exceeds the per-link tolerance times the link count, or chronology
/// fails across a span.
fn verify_split(
    space: &FiniteCausalSpace,
    side: RaySide,
    tau_v: &[f64],
    chain: &[usize],
    eps: f64,
) -> Vec<Vec<usize>> {
    let mut segments = Vec::new();
    let mut start = 0usize;
    let mut j = 1usize;
    while j < chain.len() {
        let pj = side_param(side, tau_v[chain[j]]);
        let mut ok = true;
        for i in start..j {
            let pi = side_param(side, tau_v[chain[i]]);
            let tau = side_tau(space, side, chain[i], chain[j]);
            let slack = eps * (j - i) as f64;
            if tau <= 0.0 || (pj - pi - tau).abs() > slack {
                ok = false;
                break;
            }
        }
        if ok {
            j += 1;
        } else {
            segments.push(chain[start..j].to_vec());
            start = j;
            j += 1;
        }
    }
    segments.push(chain[start..].to_vec());
    segments
}

fn median_gap(params: &[f64]) -> f64 {
    let mut gaps: Vec<f64> = params.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gaps[gaps.len() / 2]
}

/// Extracts a maximal-chain decomposition of the transport relation:
/// greedy nearest-parameter growth from the set outward, followed by a
/// pairwise isometry audit that splits any chain whose accumulated defect
/// betrays a merge of distinct rays. Set members seed chains and become
/// anchors but contribute no mass; every strictly-sided point ends up in
/// exactly one ray.
pub fn extract_rays(
    space: &FiniteCausalSpace,
    v: &AchronalSet,
    side: RaySide,
    eps: f64,
) -> Result<RayFamily, RayError> {
    let relation = transport_relation(space, v, side, eps)?;
    let TransportRelation { tau_v, candidates, pairs, .. } = relation;
    let n = space.n();
    let mut next: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, w) in &pairs {
        next[u].push(w);
    }
    for list in next.iter_mut() {
        list.sort_by(|&a, &b| {
            (side_param(side, tau_v[a]), a)
                .partial_cmp(&(side_param(side, tau_v[b]), b))
                .unwrap()
        });
    }
    let mut assigned = vec![false; n];
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for &seed in &candidates {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut chain = vec![seed];
        let mut cur = seed;
        while let Some(&w) = next[cur].iter().find(|&&w| !assigned[w]) {
            assigned[w] = true;
            chain.push(w);
            cur = w;
        }
        chains.push(chain);
    }

    let in_set = set_mask(n, v);
    let mut rays = Vec::new();
    for chain in chains {
        for segment in verify_split(space, side, &tau_v, &chain, eps) {
            // Strip the seeding set member (always first: parameter zero)
            // and drop segments holding no strictly-sided mass.
            let strict: Vec<usize> = segment
                .iter()
                .copied()
                .filter(|&i| side_param(side, tau_v[i]) > 0.0)
                .collect();
            if strict.is_empty() {
                continue;
            }
            let anchor = if in_set[segment[0]] {
                segment[0]
            } else {
                // The supremum defining the separation field is attained
                // at some set member; recover it.
                let p0 = strict[0];
                *v.members()
                    .iter()
                    .max_by(|&&y, &&z| {
                        side_tau(space, side, y, p0)
                            .partial_cmp(&side_tau(space, side, z, p0))
                            .unwrap()
                    })
                    .expect("achronal sets are non-empty")
            };
            let params: Vec<f64> =
                strict.iter().map(|&i| side_param(side, tau_v[i])).collect();
            let masses: Vec<f64> =
                strict.iter().map(|&i| space.weight(i)).collect();
            let hint = median_gap(&params);
            rays.push(Ray::from_samples(strict, params, masses, anchor, hint)?);
        }
    }
    let strict_mass: f64 = (0..n)
        .filter(|&i| side_param(side, tau_v[i]) > 0.0)
        .map(|i| space.weight(i))
        .sum();
    let covered_mass: f64 = rays.iter().map(|r| r.q_weight).sum();
    let (sup_param, sup_witness) = (0..n)
        .map(|i| (side_param(side, tau_v[i]), i))
        .filter(|&(p, _)| p > 0.0)
        .max_by(|a, b| a.partial_cmp(b).unwrap())
        .map_or((0.0, None), |(p, i)| (p, Some(i)));
    Ok(RayFamily {
        side,
        eps,
        rays,
        strict_mass,
        covered_mass,
        sup_param,
        sup_witness,
    })
}

/// One density window violating a curvature-dimension bound. A `NaN`
/// lower bound marks a window where the model ray has already ended, so
/// only the upper bound was in force.
#[derive(Debug, Clone, Serialize)]
pub struct McpViolation {
    pub ray: usize,
    pub t0: f64,
    pub t1: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Result of auditing ray densities against the measure-contraction
/// bounds.
#[derive(Debug, Clone, Serialize)]
pub struct McpReport {
    pub k: f64,
    pub n: f64,
    pub rays_tested: usize,
    pub rays_skipped: usize,
    pub windows_tested: usize,
    pub windows_vacuous: usize,
    /// Smallest relative margins over all windows: ratio over lower bound
    /// minus one, and one minus ratio over upper bound.
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
    pub tol_rel: f64,
    pub violations: Vec<McpViolation>,
    pub verdict: Verdict,
}

const MAX_RECORDED_VIOLATIONS: usize = 32;

/// Audits every ray's binned density against the measure-contraction
/// window bounds for curvature `k` and dimension `n`: over any parameter
/// window `t0 < t1` inside the ray's span `[a, b]`, the density ratio
/// `h(t1)/h(t0)` must lie between the model-sine ratios anchored at the
/// far end and at the near end,
///
/// `(s(b - t1) / s(b - t0))^(n-1) <= h(t1)/h(t0) <= (s(t1 - a) / s(t0 - a))^(n-1)`
///
/// with `s` the model sine at curvature `k / (n - 1)`. At `n = 1` both
/// bounds degenerate to exact constancy. Under positive curvature a bound
/// whose larger argument passes the first sine zero is out of the model's
/// range: such a lower bound is vacuous and such an upper bound imposes
/// nothing. Rays with fewer than three bins are skipped.
pub fn mcp_density_test(
    family: &RayFamily,
    k: f64,
    n: f64,
    tol_rel: f64,
) -> Result<McpReport, RayError> {
    if !k.is_finite() {
        return Err(RayError::InvalidCurvature(k));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(RayError::InvalidDimension(n));
    }
    if !(tol_rel.is_finite() && (0.0..1.0).contains(&tol_rel)) {
        return Err(RayError::InvalidTolerance(tol_rel));
    }
    if family.rays.is_empty() {
        return Err(RayError::DegenerateFamily("no rays extracted".into()));
    }
    let one_dim = n == 1.0;
    let kappa = if one_dim { 0.0 } else { k / (n - 1.0) };
    let power = n - 1.0;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let beyond = |theta: f64| kappa > 0.0 && kappa * theta * theta >= pi2;
    let mut rays_tested = 0usize;
    let mut rays_skipped = 0usize;
    let mut windows_tested = 0usize;
    let mut windows_vacuous = 0usize;
    let mut min_lower = f64::INFINITY;
    let mut min_upper = f64::INFINITY;
    let mut violations = Vec::new();
    for (ridx, ray) in family.rays.iter().enumerate() {
        if ray.bin_centers.len() < 3 {
            rays_skipped += 1;
            continue;
        }
        rays_tested += 1;
        let nb = ray.bin_centers.len();
        for j0 in 0..nb {
            if ray.bin_density[j0] <= 0.0 {
                continue;
            }
            for j1 in (j0 + 1)..nb {
                if ray.bin_density[j1] <= 0.0 {
                    continue;
                }
                let (t0, t1) = (ray.bin_centers[j0], ray.bin_centers[j1]);
                let ratio = ray.bin_density[j1] / ray.bin_density[j0];
                let (lower, upper) = if one_dim {
                    (1.0, 1.0)
                } else {
                    let lower = if beyond(ray.b - t0) {
                        f64::NAN
                    } else {
                        (s_c_coeff(kappa, ray.b - t1).0
                            / s_c_coeff(kappa, ray.b - t0).0)
                            .powf(power)
                    };
                    let upper = if beyond(t1 - ray.a) {
                        f64::INFINITY
                    } else {
                        (s_c_coeff(kappa, t1 - ray.a).0
                            / s_c_coeff(kappa, t0 - ray.a).0)
                            .powf(power)
                    };
                    (lower, upper)
                };
                if lower.is_nan() && upper.is_infinite() {
                    windows_vacuous += 1;
                    continue;
                }
                windows_tested += 1;
                let lower_margin = if lower.is_nan() {
                    f64::INFINITY
                } else {
                    ratio / lower - 1.0
                };
                let upper_margin = if upper.is_finite() {
                    1.0 - ratio / upper
                } else {
                    f64::INFINITY
                };
                min_lower = min_lower.min(lower_margin);
                min_upper = min_upper.min(upper_margin);
                if (lower_margin < -tol_rel || upper_margin < -tol_rel)
                    && violations.len() < MAX_RECORDED_VIOLATIONS
                {
                    violations.push(McpViolation {
                        ray: ridx,
                        t0,
                        t1,
                        ratio,
                        lower,
                        upper,
                    });
                }
            }
        }
    }
    let verdict = if !violations.is_empty() {
        Verdict::Fail
    } else if windows_tested == 0 {
        Verdict::VacuousRegime
    } else {
        Verdict::Pass
    };
    Ok(McpReport {
        k,
        n,
        rays_tested,
        rays_skipped,
        windows_tested,
        windows_vacuous,
        min_lower_margin: min_lower,
        min_upper_margin: min_upper,
        tol_rel,
        violations,
        verdict,
    })
}

/// Transverse mass profile across parameter levels.
#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub grid: Vec<f64>,
    /// Mass density per unit parameter at each grid center, summed over
    /// rays.
    pub h: Vec<f64>,
    pub width: f64,
    /// Total mass recovered by integrating the levels.
    pub integrated_mass: f64,
    /// Relative defect of the integrated mass against the strictly-sided
    /// reference mass: how much the disintegration leaks.
    pub coarea_defect: f64,
}

/// Sums the ray densities into level measures on a common parameter grid
/// and audits the coarea identity: integrating the levels must recover
/// the transport set's mass.
pub fn level_measures(
    family: &RayFamily,
    bins: usize,
) -> Result<LevelReport, RayError> {
    if family.rays.is_empty() {
        return Err(RayError::DegenerateFamily("no rays extracted".into()));
    }
    if bins == 0 {
        return Err(RayError::DegenerateFamily(
            "zero level bins requested".into(),
        ));
    }
    let lo = family.rays.iter().map(|r| r.a).fold(f64::INFINITY, f64::min);
    let hi = family.rays.iter().map(|r| r.b).fold(0.0f64, f64::max);
    if hi <= lo {
        return Err(RayError::DegenerateFamily(
            "ray family spans no parameter range".into(),
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut mass = vec![0.0f64; bins];
    for ray in &family.rays {
        for (i, &(clo, chi)) in ray.cells().iter().enumerate() {
            if chi <= clo {
                let b = (((ray.params[i] - lo) / width) as usize).min(bins - 1);
                mass[b] += ray.masses[i];
                continue;
            }
            let first = (((clo - lo) / width).floor().max(0.0)) as usize;
            let last = ((((chi - lo) / width).floor()) as usize).min(bins - 1);
            for (b, slot) in
                mass.iter_mut().enumerate().take(last + 1).skip(first)
            {
                let blo = lo + b as f64 * width;
                let cover = (chi.min(blo + width) - clo.max(blo)).max(0.0);
                *slot += ray.masses[i] * cover / (chi - clo);
            }
        }
    }
    let integrated: f64 = mass.iter().sum();
    let denom = family.strict_mass.max(f64::MIN_POSITIVE);
    Ok(LevelReport {
        grid: (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect(),
        h: mass.iter().map(|m| m / width).collect(),
        width,
        integrated_mass: integrated,
        coarea_defect: (integrated - family.strict_mass).abs() / denom,
    })
}

/// Mass-weighted estimate of the logarithmic density slope at the set.
#[derive(Debug, Clone, Serialize)]
pub struct MeanCurvatureReport {
    pub side: RaySide,
    /// Weighted mean of the per-ray slope of `ln h` extrapolated to the
    /// start of the ray.
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub rays_used: usize,
    pub rays_skipped: usize,
}

/// Estimates the mean curvature of the set as seen from this side: for
/// each ray, a quadratic fit of `ln h` over the first few bins is
/// differentiated at the ray start, and the slopes are averaged with the
/// rays' masses as weights. Rays without three positive leading bins are
/// skipped. Requires anchors at two distinct set members — a family
/// funnelling through one point measures an event, not a hypersurface.
pub fn mean_curvature_estimate(
    family: &RayFamily,
) -> Result<MeanCurvatureReport, RayError> {
    if family.rays.is_empty() {
        return Err(RayError::DegenerateFamily("no rays extracted".into()));
    }
    let mut anchors: Vec<usize> = family.rays.iter().map(|r| r.anchor).collect();
    anchors.sort_unstable();
    anchors.dedup();
    if anchors.len() < 2 {
        return Err(RayError::CodimensionMismatch);
    }
    let mut acc = 0.0f64;
    let mut wsum = 0.0f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for ray in &family.rays {
        let nb = ray.bin_centers.len();
        let take = nb.min(4);
        if take < 3 || ray.bin_density.iter().take(take).any(|&h| h <= 0.0) {
            skipped += 1;
            continue;
        }
        // Least-squares quadratic in (t - a); its linear coefficient is
        // the slope at the ray start.
        let us: Vec<f64> = ray
            .bin_centers
            .iter()
            .take(take)
            .map(|&t| t - ray.a)
            .collect();
        let ys: Vec<f64> =
            ray.bin_density.iter().take(take).map(|&h| h.ln()).collect();
        let Some(slope) = quadratic_slope_at_zero(&us, &ys) else {
            skipped += 1;
            continue;
        };
        acc += slope * ray.q_weight;
        wsum += ray.q_weight;
        min = min.min(slope);
        max = max.max(slope);
        used += 1;
    }
    if used == 0 || wsum <= 0.0 {
        return Err(RayError::DegenerateFamily(
            "no ray has enough leading density bins for a slope fit".into(),
        ));
    }
    Ok(MeanCurvatureReport {
        side: family.side,
        mean: acc / wsum,
        min,
        max,
        rays_used: used,
        rays_skipped: skipped,
    })
}

/// Linear coefficient at zero of the least-squares parabola through
/// `(u, y)` samples (exact interpolation for three).
fn quadratic_slope_at_zero(us: &[f64], ys: &[f64]) -> Option<f64> {
    let n = us.len() as f64;
    let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut suy, mut su2y) = (0.0, 0.0, 0.0);
    for (&u, &y) in us.iter().zip(ys) {
        let u2 = u * u;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        sy += y;
        suy += u * y;
        su2y += u2 * y;
    }
    let m = [[n, s1, s2], [s1, s2, s3], [s2, s3, s4]];
    let rhs = [sy, suy, su2y];
    solve3(m, rhs).map(|c| c[1])
}

fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let pivot_row = m[col];
        for row in (col + 1)..3 {
            let f = m[row][col] / pivot_row[col];
            for (c, &pr) in pivot_row.iter().enumerate().skip(col) {
                m[row][c] -= f * pr;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..3 {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Outcome of the focusing-singularity certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HawkingVerdict {
    /// Premise holds and every separation stays under the threshold.
    Consistent,
    /// Premise holds yet some separation exceeds the threshold: the
    /// claimed curvature and dimension are refuted for this space.
    Refuted,
    /// The measured mean curvature does not meet the claimed bound, so
    /// the threshold asserts nothing here.
    PremiseNotMet,
}

/// Focusing certificate for an achronal set.
#[derive(Debug, Clone, Serialize)]
pub struct HawkingReport {
    pub k: f64,
    pub n: f64,
    pub h0: f64,
    /// Separation threshold implied by curvature `k`, dimension `n` and
    /// mean curvature at most `h0`.
    pub threshold: f64,
    pub mean_curvature: MeanCurvatureReport,
    /// Largest past separation from the set, with a realizing point.
    pub sup_separation: f64,
    pub witness: Option<usize>,
    /// `h0 - measured mean curvature`: non-negative when the premise
    /// holds.
    pub premise_margin: f64,
    pub premise_tol: f64,
    /// `threshold - sup_separation`: non-negative when the space respects
    /// the bound.
    pub separation_margin: f64,
    pub verdict: HawkingVerdict,
}

/// Audits the past-focusing bound: if the set's past mean curvature is at
/// most `h0`, then under curvature at least `k` and dimension at most `n`
/// no point may lie farther than the threshold into the past. The mean
/// curvature is estimated from the ray densities; the premise tolerance
/// absorbs the estimate's mesh error.
pub fn hawking_certify(
    space: &FiniteCausalSpace,
    v: &AchronalSet,
    k: f64,
    n: f64,
    h0: f64,
    premise_tol: f64,
) -> Result<HawkingReport, RayError> {
    if !(premise_tol.is_finite() && premise_tol >= 0.0) {
        return Err(RayError::InvalidTolerance(premise_tol));
    }
    let threshold = hawking_threshold(HawkingParams { h0, k, n })?;
    let tau_v = signed_time_separation(space, v);
    let eps = default_relation_eps(space, &tau_v);
    let family = extract_rays(space, v, RaySide::Past, eps)?;
    let mean_curvature = mean_curvature_estimate(&family)?;
    let premise_margin = h0 - mean_curvature.mean;
    let sep_tol = {
        let mesh = space.resolution().unwrap_or(0.0);
        (2.0 * mesh).max(1e-9) * (1.0 + threshold)
    };
    let separation_margin = threshold - family.sup_param;
    let verdict = if premise_margin < -premise_tol {
        HawkingVerdict::PremiseNotMet
    } else if separation_margin < -sep_tol {
        HawkingVerdict::Refuted
    } else {
        HawkingVerdict::Consistent
    };
    Ok(HawkingReport {
        k,
        n,
        h0,
        threshold,
        mean_curvature,
        sup_separation: family.sup_param,
        witness: family.sup_witness,
        premise_margin,
        premise_tol,
        separation_margin,
        verdict,
    })
}
