//! Geometric comparison inequalities on finite causal spaces: interpolated
//! set growth (Brunn–Minkowski type), radial volume monotonicity
//! (Bishop–Gromov type), diameter bounds under positive curvature
//! (Bonnet–Myers type), and a spectral variance inequality (Poincaré type)
//! along ray decompositions. Each check returns measured quantities next to
//! the model bounds so callers can judge margins, not just booleans.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;
use thiserror::Error;

use crate::certify::Verdict;
use crate::coeff::{s_c_coeff, sigma};
use crate::ext::ExtReal;
use crate::model::ModelSpacetime;
use crate::path::{displacement_interpolation, PathError};
use crate::rays::RayFamily;
use crate::space::{FiniteCausalSpace, SpaceError, WeightedMeasure};
use crate::transport::{
    solve_lp, strong_dualisability_certificate, TransportError, TransportOutcome,
};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("curvature parameter must be finite, got {0}")]
    InvalidCurvature(f64),
    #[error("this bound needs strictly positive curvature, got {0}")]
    NonPositiveCurvature(f64),
    #[error("dimension parameter is out of range for this bound: {0}")]
    InvalidDimension(f64),
    #[error("interpolation time must lie strictly between 0 and 1, got {0}")]
    BadInterpolationTime(f64),
    #[error("the set under test is empty")]
    EmptySet,
    #[error("points are not in the chronological future of {apex}: {points:?}")]
    NotChronological { apex: usize, points: Vec<usize> },
    #[error("set is not star-shaped around the apex at one-cell resolution; \
             first offenders: {points:?}")]
    NotStarShaped { points: Vec<usize> },
    #[error("radial profile is unusable: {0}")]
    DegenerateProfile(String),
    #[error("tolerance must be finite and lie in [0, 1), got {0}")]
    BadTolerance(f64),
    #[error(
        "interval of length {d} exceeds the conjugate limit {limit} for \
         these parameters; the density cone is empty there"
    )]
    IncompatibleDiameter { d: f64, limit: f64 },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Measured versus required growth of an interpolated set.
#[derive(Debug, Clone, Serialize)]
pub struct BrunnMinkowskiReport {
    pub k: f64,
    pub n: f64,
    /// Interior interpolation time that was tested.
    pub t: f64,
    /// Extremal time separation over the endpoint sets: the infimum for
    /// `k >= 0`, the supremum for `k < 0` — in each case the choice that
    /// weakens the distortion coefficients, keeping the bound valid.
    pub theta: f64,
    /// Reference masses of the endpoint sets and of the interpolated
    /// support.
    pub mass_start: f64,
    pub mass_end: f64,
    pub mass_mid: f64,
    /// `mass_mid^(1/n)`.
    pub lhs: f64,
    /// Distortion combination of the endpoint masses' n-th roots.
    pub rhs: f64,
    /// `lhs - rhs`; negative beyond `tol` refutes the claimed parameters.
    pub residual: f64,
    pub tol: f64,
    /// Whether the coefficient pair was finite; when false the claim is
    /// past the conjugate radius and no comparison was made.
    pub finite_regime: bool,
    /// Whether the endpoint measures are strongly dualisable, i.e. some
    /// optimal plan moves no mass along null pairs. The growth bound is a
    /// statement about chronological transport, so this is its standing
    /// hypothesis.
    pub dualisable: bool,
    pub passed: bool,
}

/// Tests interpolated-set growth between `a0` and `a1` at time `t`: the
/// uniform measures on the two sets are coupled by an optimal plan for
/// exponent `p`, the plan is interpolated along model geodesics, and the
/// reference mass of the interpolated support is compared against
///
/// `m(A_t)^(1/n) >= sigma_{1-t}(theta) m(A_0)^(1/n) + sigma_t(theta) m(A_1)^(1/n)`
///
/// with distortion coefficients at curvature `k / n` and `theta` the
/// extremal endpoint separation (infimum for `k >= 0`, supremum for
/// `k < 0`).
#[allow(clippy::too_many_arguments)]
pub fn brunn_minkowski_check(
    space: &FiniteCausalSpace,
    model: &ModelSpacetime,
    a0: &[usize],
    a1: &[usize],
    k: f64,
    n: f64,
    p: f64,
    t: f64,
) -> Result<BrunnMinkowskiReport, CompareError> {
    if !k.is_finite() {
        return Err(CompareError::InvalidCurvature(k));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(CompareError::InvalidDimension(n));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(CompareError::BadInterpolationTime(t));
    }
    if a0.is_empty() || a1.is_empty() {
        return Err(CompareError::EmptySet);
    }
    let mu0 = WeightedMeasure::uniform_on(space, a0)?;
    let mu1 = WeightedMeasure::uniform_on(space, a1)?;
    let cert = strong_dualisability_certificate(space, &mu0, &mu1, p)?;
    let plan = match solve_lp(space, &mu0, &mu1, p)? {
        TransportOutcome::Optimal(sol) => sol.coupling,
        TransportOutcome::Infeasible(witness) => {
            return Err(CompareError::Transport(TransportError::NoCausalCoupling {
                witness,
            }))
        }
    };
    let path = displacement_interpolation(model, space, &plan, &[0.0, t, 1.0])?;

    let mut theta = if k >= 0.0 { f64::INFINITY } else { 0.0 };
    for &i in mu0.support() {
        for &j in mu1.support() {
            let tau = space.tau(i, j);
            theta = if k >= 0.0 { theta.min(tau) } else { theta.max(tau) };
        }
    }
    let mass_start = space.mass_of(path.measure_at(0).support());
    let mass_mid = space.mass_of(path.measure_at(1).support());
    let mass_end = space.mass_of(path.measure_at(2).support());
    let lhs = mass_mid.powf(1.0 / n);
    let kappa = k / n;
    let (rhs, finite_regime) = match (sigma(kappa, 1.0 - t, theta), sigma(kappa, t, theta))
    {
        (ExtReal::Finite(back), ExtReal::Finite(fore)) => (
            back * mass_start.powf(1.0 / n) + fore * mass_end.powf(1.0 / n),
            true,
        ),
        _ => (f64::INFINITY, false),
    };
    let residual = lhs - rhs;
    let spacing = space.resolution().unwrap_or(0.0);
    let scale = mass_start.powf(1.0 / n).max(mass_end.powf(1.0 / n)).max(1e-12);
    let tol = (5.0 * spacing).max(1e-6) * scale;
    Ok(BrunnMinkowskiReport {
        k,
        n,
        t,
        theta,
        mass_start,
        mass_end,
        mass_mid,
        lhs,
        rhs,
        residual,
        tol,
        finite_regime,
        dualisable: cert.strong,
        passed: finite_regime && residual >= -tol,
    })
}

/// Smoothed radial distribution of reference mass over time separation from
/// an apex point.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub apex: usize,
    /// Bin centers.
    pub radii: Vec<f64>,
    /// Smoothed shell density per bin (mass per unit separation).
    pub shell_density: Vec<f64>,
    /// Cumulative mass up to each bin's right edge.
    pub volume: Vec<f64>,
    pub bin_width: f64,
    pub r_max: f64,
    pub total_mass: f64,
}

/// Builds the radial mass profile of `set` as seen from `apex`.
///
/// Every set point must be chronologically after the apex. On a mesh, the
/// set is also validated to be star-shaped around the apex at one-cell
/// resolution: for each point at separation of at least two mesh widths,
/// the coordinate midpoint toward the apex must land within one cell of a
/// set point. Each point's mass is spread over the separation interval its
/// cell covers (a first-order bound via the coordinate gradient of the
/// separation), which removes most lattice shot noise from the shell
/// densities.
pub fn radial_profile(
    space: &FiniteCausalSpace,
    apex: usize,
    set: &[usize],
    bins: usize,
) -> Result<RadialProfile, CompareError> {
    if set.is_empty() {
        return Err(CompareError::EmptySet);
    }
    if bins == 0 {
        return Err(CompareError::DegenerateProfile("zero bins requested".into()));
    }
    if apex >= space.n() {
        return Err(CompareError::Space(SpaceError::IndexOutOfBounds {
            index: apex,
            n: space.n(),
        }));
    }
    let offenders: Vec<usize> = set
        .iter()
        .copied()
        .filter(|&i| {
            let tau = space.tau(apex, i);
            tau.is_nan() || tau <= 0.0 || !space.leq(apex, i)
        })
        .collect();
    if !offenders.is_empty() {
        return Err(CompareError::NotChronological { apex, points: offenders });
    }
    let spacing = space.resolution();
    if let Some(delta) = spacing {
        let apex_c = space.coords(apex).to_vec();
        let reach = space.dim() as f64 * delta * delta * (1.0 + 1e-9);
        let mut bad = Vec::new();
        for &i in set {
            if space.tau(apex, i) < 2.0 * delta {
                continue;
            }
            let mid: Vec<f64> = space
                .coords(i)
                .iter()
                .zip(&apex_c)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let covered = set.iter().any(|&j| {
                let dist2: f64 = space
                    .coords(j)
                    .iter()
                    .zip(&mid)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dist2 <= reach
            });
            if !covered {
                bad.push(i);
                if bad.len() >= 8 {
                    break;
                }
            }
        }
        if !bad.is_empty() {
            return Err(CompareError::NotStarShaped { points: bad });
        }
    }

    let r_max = set.iter().map(|&i| space.tau(apex, i)).fold(0.0f64, f64::max);
    let width = r_max / bins as f64;
    let mut bin_mass = vec![0.0f64; bins];
    let apex_c = space.coords(apex).to_vec();
    for &i in set {
        let tau = space.tau(apex, i);
        let w = space.weight(i);
        let half = match spacing {
            Some(delta) => {
                let l1: f64 =
                    space.coords(i).iter().zip(&apex_c).map(|(a, b)| (a - b).abs()).sum();
                0.5 * delta * l1 / tau
            }
            None => 0.0,
        };
        // Clip the spread interval to the profile range: the set ends hard
        // at its extremes, so mass is conserved by renormalizing over the
        // clipped interval rather than leaking past the edges.
        let (lo, hi) = ((tau - half).max(0.0), (tau + half).min(r_max));
        if hi <= lo {
            let b = ((tau / width) as usize).min(bins - 1);
            bin_mass[b] += w;
            continue;
        }
        let first = (lo / width).floor().max(0.0) as usize;
        let last = ((hi / width).floor() as usize).min(bins - 1);
        for (b, mass) in bin_mass.iter_mut().enumerate().take(last + 1).skip(first) {
            let cover = (hi.min((b as f64 + 1.0) * width) - lo.max(b as f64 * width))
                .max(0.0);
            *mass += w * cover / (hi - lo);
        }
    }
    let mut volume = Vec::with_capacity(bins);
    let mut acc = 0.0;
    for m in &bin_mass {
        acc += m;
        volume.push(acc);
    }
    Ok(RadialProfile {
        apex,
        radii: (0..bins).map(|b| (b as f64 + 0.5) * width).collect(),
        shell_density: bin_mass.iter().map(|m| m / width).collect(),
        volume,
        bin_width: width,
        r_max,
        total_mass: acc,
    })
}

/// One radius of a monotonicity comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub r: f64,
    /// Measured ratio against the reference radius.
    pub ratio: f64,
    /// Model lower bound for that ratio.
    pub bound: f64,
    /// `ratio - bound`; negative beyond tolerance refutes the parameters.
    pub residual: f64,
}

/// Radial monotonicity comparison of a profile against model bounds.
#[derive(Debug, Clone, Serialize)]
pub struct BishopGromovReport {
    pub k: f64,
    pub n: f64,
    /// Sharp form (exponent `n - 1`, curvature `k / (n - 1)`) versus the
    /// non-sharp form (exponent `n`, curvature `k / n`).
    pub sharp: bool,
    /// Reference radius actually used (the profile edge, capped at the
    /// conjugate radius under positive curvature).
    pub r_reference: f64,
    pub shell: Vec<ComparisonRow>,
    pub volume: Vec<ComparisonRow>,
    pub min_shell_residual: f64,
    pub min_volume_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Composite Simpson integral of `s_kappa(x)^e` over `[0, x]`.
fn sine_power_integral(kappa: f64, e: f64, x: f64) -> f64 {
    let m = 256usize;
    let h = x / m as f64;
    let f = |s: f64| s_c_coeff(kappa, s).0.max(0.0).powf(e);
    let mut acc = f(0.0) + f(x);
    for i in 1..m {
        let factor = if i.is_multiple_of(2) { 2.0 } else { 4.0 };
        acc += factor * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Compares a radial profile against the model volume-monotonicity bounds:
///
/// shell: `s(r)/s(R) >= (s_curv(r)/s_curv(R))^e`
/// volume: `v(r)/v(R) >= int_0^r s_curv^e / int_0^R s_curv^e`
///
/// with `(curvature, e) = (k/n, n)` for the non-sharp form or
/// `(k/(n-1), n-1)` for the sharp one. Under positive curvature the
/// reference radius is capped at the conjugate radius `pi * sqrt(e / k)`.
/// Bin edges are used for the cumulative rows and bin centers for the
/// shell rows; rows past the cap are dropped.
pub fn bishop_gromov_check(
    space: &FiniteCausalSpace,
    profile: &RadialProfile,
    k: f64,
    n: f64,
    sharp: bool,
) -> Result<BishopGromovReport, CompareError> {
    if !k.is_finite() {
        return Err(CompareError::InvalidCurvature(k));
    }
    let min_n: f64 = if sharp { 1.0 } else { 1.0 - 1e-12 };
    if !n.is_finite() || n <= min_n {
        return Err(CompareError::InvalidDimension(n));
    }
    let (kappa, e) =
        if sharp { (k / (n - 1.0), n - 1.0) } else { (k / n, n) };
    let cap = if k > 0.0 {
        std::f64::consts::PI * (e / k).sqrt()
    } else {
        f64::INFINITY
    };
    let r_reference = profile.r_max.min(cap);
    let bins = profile.radii.len();
    let width = profile.bin_width;

    // Reference shell: one bin in from the last center at or below the
    // cap. The outermost bin only sees the inward half of its smoothing
    // kernels (the set is truncated there), so it is not a fair reference.
    let ref_center = profile
        .radii
        .iter()
        .rposition(|&r| r <= r_reference)
        .map(|b| if b == bins - 1 && b >= 1 { b - 1 } else { b })
        .filter(|&b| b >= 1)
        .ok_or_else(|| {
            CompareError::DegenerateProfile(
                "too few shell bins below the conjugate radius".into(),
            )
        })?;
    let s_ref = profile.shell_density[ref_center];
    if s_ref <= 0.0 {
        return Err(CompareError::DegenerateProfile(
            "reference shell carries no mass".into(),
        ));
    }
    let r_s_ref = profile.radii[ref_center];
    let denom_s = s_c_coeff(kappa, r_s_ref).0.max(0.0).powf(e);
    if denom_s <= 0.0 {
        return Err(CompareError::DegenerateProfile(
            "reference shell sits on the conjugate radius".into(),
        ));
    }
    let mut shell = Vec::new();
    for b in 0..ref_center {
        let r = profile.radii[b];
        shell.push(ComparisonRow {
            r,
            ratio: profile.shell_density[b] / s_ref,
            bound: s_c_coeff(kappa, r).0.max(0.0).powf(e) / denom_s,
            residual: 0.0,
        });
    }

    // Reference volume: last bin edge at or below the cap.
    let ref_edge = (0..bins)
        .rposition(|b| (b as f64 + 1.0) * width <= r_reference)
        .ok_or_else(|| {
            CompareError::DegenerateProfile(
                "no volume edge lies below the conjugate radius".into(),
            )
        })?;
    let v_ref = profile.volume[ref_edge];
    if v_ref <= 0.0 {
        return Err(CompareError::DegenerateProfile(
            "reference ball carries no mass".into(),
        ));
    }
    let r_v_ref = (ref_edge as f64 + 1.0) * width;
    let denom_v = sine_power_integral(kappa, e, r_v_ref);
    let mut volume = Vec::new();
    for b in 0..ref_edge {
        let r = (b as f64 + 1.0) * width;
        volume.push(ComparisonRow {
            r,
            ratio: profile.volume[b] / v_ref,
            bound: sine_power_integral(kappa, e, r) / denom_v,
            residual: 0.0,
        });
    }
    for row in shell.iter_mut().chain(volume.iter_mut()) {
        row.residual = row.ratio - row.bound;
    }
    let min_shell_residual =
        shell.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let min_volume_residual =
        volume.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let spacing = space.resolution().unwrap_or(0.0);
    // Ratios are dimensionless and of order one up to the reference
    // radius, so the lattice noise floor scales with mesh over reference.
    let tol = (5.0 * spacing / r_reference.max(spacing)).max(1e-6);
    let passed =
        min_shell_residual >= -tol && min_volume_residual >= -tol;
    Ok(BishopGromovReport {
        k,
        n,
        sharp,
        r_reference,
        shell,
        volume,
        min_shell_residual,
        min_volume_residual,
        tol,
        passed,
    })
}

/// Diameter bound under positive curvature.
#[derive(Debug, Clone, Serialize)]
pub struct BonnetMyersReport {
    pub k: f64,
    pub n: f64,
    /// Largest time separation in the space, with a realizing pair.
    pub sup_tau: f64,
    pub witness: (usize, usize),
    /// `pi * sqrt(n / k)`.
    pub limit: f64,
    /// `pi * sqrt((n - 1) / k)` when `n > 1`.
    pub sharp_limit: Option<f64>,
    pub within: bool,
    pub sharp_within: Option<bool>,
}

/// Checks the diameter bound: under curvature at least `k > 0` and
/// dimension at most `n`, no time separation may exceed `pi * sqrt(n/k)`
/// (or `pi * sqrt((n-1)/k)` in the sharp form). A violation refutes the
/// claimed parameters for the space.
pub fn bonnet_myers_check(
    space: &FiniteCausalSpace,
    k: f64,
    n: f64,
) -> Result<BonnetMyersReport, CompareError> {
    if !k.is_finite() {
        return Err(CompareError::InvalidCurvature(k));
    }
    if k <= 0.0 {
        return Err(CompareError::NonPositiveCurvature(k));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(CompareError::InvalidDimension(n));
    }
    let mut sup_tau = 0.0f64;
    let mut witness = (0usize, 0usize);
    for i in 0..space.n() {
        for j in 0..space.n() {
            let tau = space.tau(i, j);
            if tau > sup_tau {
                sup_tau = tau;
                witness = (i, j);
            }
        }
    }
    let limit = std::f64::consts::PI * (n / k).sqrt();
    let sharp_limit =
        (n > 1.0).then(|| std::f64::consts::PI * ((n - 1.0) / k).sqrt());
    Ok(BonnetMyersReport {
        k,
        n,
        sup_tau,
        witness,
        limit,
        sharp_limit,
        within: sup_tau <= limit,
        sharp_within: sharp_limit.map(|l| sup_tau <= l),
    })
}

/// Cells in the one-dimensional spectral solve behind
/// [`poincare_constant`].
const POINCARE_CELLS: usize = 64;

/// Environment variable naming a directory where computed spectral
/// constants persist between runs. Unset, the cache is in-process only.
pub const CACHE_DIR_ENV: &str = "LORENZ_OT_CACHE";

/// File inside the cache directory holding spectral constants.
const POINCARE_CACHE_FILE: &str = "poincare.json";

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// `(diag, off)` strictly below `x`, read off the sign pattern of the
/// shifted factorization (Sturm sequence). Division by an exactly zero
/// pivot is deflected to a tiny positive one; the infinities this can
/// spawn propagate consistently through the recurrence.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0usize;
    let mut pivot = diag[0] - x;
    if pivot < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if pivot == 0.0 { 1e-300 } else { pivot };
        pivot = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if pivot < 0.0 {
            count += 1;
        }
    }
    count
}

/// Second-smallest generalized eigenvalue of the weighted Neumann chain
/// with edge conductances `cond` and node masses `mass`. The smallest is
/// zero (constants); the one above it is the sharp gap between gradient
/// energy and variance on the chain. Found by bisection with Sturm counts
/// on the mass-symmetrized tridiagonal form.
fn chain_spectral_gap(cond: &[f64], mass: &[f64]) -> f64 {
    let m = mass.len();
    debug_assert!(m >= 3 && cond.len() + 1 == m);
    let mut diag = vec![0.0f64; m];
    for (j, &c) in cond.iter().enumerate() {
        diag[j] += c;
        diag[j + 1] += c;
    }
    for (d, &w) in diag.iter_mut().zip(mass) {
        *d /= w;
    }
    let off: Vec<f64> = cond
        .iter()
        .enumerate()
        .map(|(j, &c)| -c / (mass[j] * mass[j + 1]).sqrt())
        .collect();
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for j in 0..m {
        let left = if j == 0 { 0.0 } else { off[j - 1].abs() };
        let right = if j + 1 == m { 0.0 } else { off[j].abs() };
        hi = hi.max(diag[j] + left + right);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&diag, &off, mid) >= 2 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Sharp constant of a ray's own weighted chain: the largest ratio of
/// variance to along-ray gradient energy any function on it attains.
/// Gap conductances average the adjacent point masses, matching the
/// finite-volume form of the continuum functional.
fn ray_chain_constant(params: &[f64], masses: &[f64]) -> f64 {
    let cond: Vec<f64> = params
        .windows(2)
        .zip(masses.windows(2))
        .map(|(p, w)| 0.5 * (w[0] + w[1]) / ((p[1] - p[0]) * (p[1] - p[0])))
        .collect();
    1.0 / chain_spectral_gap(&cond, masses)
}

/// Variance constant of one density profile `h` on `[0, cells * delta]`,
/// solved on a cell-centered grid with face conductances. The profile is
/// peak-normalized first; the constant is scale-invariant.
fn density_constant(h: impl Fn(f64) -> f64, cells: usize, delta: f64) -> f64 {
    let centers: Vec<f64> =
        (0..cells).map(|j| h((j as f64 + 0.5) * delta)).collect();
    let faces: Vec<f64> = (1..cells).map(|j| h(j as f64 * delta)).collect();
    let peak = centers
        .iter()
        .chain(faces.iter())
        .fold(0.0f64, |acc, &v| acc.max(v));
    let mass: Vec<f64> = centers.iter().map(|&v| v / peak * delta).collect();
    let cond: Vec<f64> = faces.iter().map(|&v| v / peak / delta).collect();
    1.0 / chain_spectral_gap(&cond, &mass)
}

/// Worst variance constant over the admissible density cone for curvature
/// parameter `kappa`, density exponent `e` and interval length `d`.
///
/// The cone consists of densities whose logarithmic slope stays between
/// the maximal focusing rate (the model contraction toward the far end)
/// and the maximal spreading rate (the model expansion from the near
/// end). The scan covers the extremal switch densities — maximal fall
/// then maximal rise at every cell boundary, their mirror images, and the
/// constant profile. The fall-then-rise valley concentrates mass at both
/// ends and empirically dominates the whole cone (two-switch and randomly
/// sampled admissible slopes never beat it; see the tests).
fn poincare_sup(kappa: f64, e: f64, d: f64) -> f64 {
    let cells = POINCARE_CELLS;
    let delta = d / cells as f64;
    let fall = |x: f64| s_c_coeff(kappa, d - x).0.powf(e);
    let rise = |x: f64| s_c_coeff(kappa, x).0.powf(e);
    let mut best = density_constant(|_| 1.0, cells, delta);
    for j in 0..=cells {
        let s = j as f64 * delta;
        let valley = |x: f64| {
            if j == 0 {
                rise(x)
            } else if j == cells || x <= s {
                fall(x)
            } else {
                fall(s) / rise(s) * rise(x)
            }
        };
        let tent = |x: f64| {
            if j == 0 {
                fall(x)
            } else if j == cells || x <= s {
                rise(x)
            } else {
                rise(s) / fall(s) * fall(x)
            }
        };
        best = best.max(density_constant(valley, cells, delta));
        best = best.max(density_constant(tent, cells, delta));
    }
    best
}

fn poincare_memo() -> &'static Mutex<HashMap<String, f64>> {
    static MEMO: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

fn poincare_cache_key(k: f64, n: f64, d: f64) -> String {
    format!(
        "{:016x}-{:016x}-{:016x}-{}",
        k.to_bits(),
        n.to_bits(),
        d.to_bits(),
        POINCARE_CELLS
    )
}

fn poincare_cache_path() -> Option<std::path::PathBuf> {
    let dir = std::env::var_os(CACHE_DIR_ENV)?;
    if dir.is_empty() {
        return None;
    }
    Some(std::path::Path::new(&dir).join(POINCARE_CACHE_FILE))
}

/// Best-effort lookup: the in-process memo first, then the on-disk store
/// named by [`CACHE_DIR_ENV`] when that variable is set.
fn poincare_cache_get(key: &str) -> Option<f64> {
    if let Some(&v) = poincare_memo().lock().unwrap().get(key) {
        return Some(v);
    }
    let path = poincare_cache_path()?;
    let text = std::fs::read_to_string(path).ok()?;
    let map: HashMap<String, f64> = serde_json::from_str(&text).ok()?;
    let v = *map.get(key)?;
    poincare_memo().lock().unwrap().insert(key.to_owned(), v);
    Some(v)
}

/// Best-effort store. Disk failures are swallowed: the cache accelerates,
/// it is never load-bearing. The memo lock is held across the disk update
/// to serialize writers within the process; the file is replaced through
/// a rename so readers never see a torn write.
fn poincare_cache_put(key: &str, value: f64) {
    let mut memo = poincare_memo().lock().unwrap();
    memo.insert(key.to_owned(), value);
    let Some(path) = poincare_cache_path() else {
        return;
    };
    let mut map: HashMap<String, f64> = std::fs::read_to_string(&path)
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .unwrap_or_default();
    map.insert(key.to_owned(), value);
    if let Ok(text) = serde_json::to_string_pretty(&map) {
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        if std::fs::write(&tmp, text).is_ok() {
            let _ = std::fs::rename(&tmp, &path);
        }
    }
}

/// Worst variance-to-gradient constant admitted on an interval of length
/// `d` by the one-dimensional density cone for curvature `k` and
/// dimension `n`: among all densities whose ratios obey the model
/// contraction window bounds, the largest constant `lambda` such that
/// some function has variance `lambda` times its gradient energy.
///
/// For `n = 1` the cone is the constants and the value is `d^2 / pi^2` up
/// to the solver's discretization. For `k > 0` (with `n > 1`) the cone is
/// empty once `d` reaches the conjugate limit `pi * sqrt((n-1)/k)`, and
/// [`CompareError::IncompatibleDiameter`] is returned.
///
/// Values are memoized in-process and, when the directory variable named
/// by [`CACHE_DIR_ENV`] is set, persisted to `poincare.json` inside it.
pub fn poincare_constant(k: f64, n: f64, d: f64) -> Result<f64, CompareError> {
    if !k.is_finite() {
        return Err(CompareError::InvalidCurvature(k));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(CompareError::InvalidDimension(n));
    }
    if !d.is_finite() || d <= 0.0 {
        return Err(CompareError::DegenerateProfile(format!(
            "interval length {d} is not positive"
        )));
    }
    let e = n - 1.0;
    let kappa = if e > 0.0 { k / e } else { 0.0 };
    if kappa > 0.0 {
        let limit = std::f64::consts::PI / kappa.sqrt();
        if d >= limit {
            return Err(CompareError::IncompatibleDiameter { d, limit });
        }
    }
    let key = poincare_cache_key(k, n, d);
    if let Some(value) = poincare_cache_get(&key) {
        return Ok(value);
    }
    let value = poincare_sup(kappa, e, d);
    poincare_cache_put(&key, value);
    Ok(value)
}

/// Spectral audit of one ray.
#[derive(Debug, Clone, Serialize)]
pub struct RayPoincare {
    /// Index of the ray within the family.
    pub ray: usize,
    /// Length of the ray's parameter window.
    pub d: f64,
    /// Sharp constant of the ray's own weighted chain.
    pub constant: f64,
    /// Cone bound [`poincare_constant`] at this length.
    pub bound: f64,
    /// `constant / bound`; above `1 + tol_rel` it refutes the parameters.
    pub ratio: f64,
}

/// Variance inequality audit over a ray family.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareReport {
    pub k: f64,
    pub n: f64,
    pub tol_rel: f64,
    pub rays_tested: usize,
    /// Rays with fewer than three points carry no testable gap.
    pub rays_skipped: usize,
    /// Rays whose window exceeds the conjugate limit for `(k, n)`: the
    /// cone admits no density there, so no bound exists to compare
    /// against. A diameter check is the right tool for those.
    pub rays_incompatible: usize,
    pub worst_ratio: f64,
    pub worst_ray: Option<usize>,
    pub per_ray: Vec<RayPoincare>,
    pub verdict: Verdict,
}

/// Audits the variance inequality along every ray of `family`: the
/// largest variance-to-gradient-energy ratio any function on a ray can
/// attain (the reciprocal spectral gap of its weighted chain) must not
/// exceed the worst constant the density cone for `(k, n)` admits at that
/// ray's length. Mass profiles obeying the cone bounds can never fail
/// this audit, so a failure refutes the claimed parameters; it is the
/// functional-inequality shadow of the density window test.
pub fn poincare_check(
    family: &RayFamily,
    k: f64,
    n: f64,
    tol_rel: f64,
) -> Result<PoincareReport, CompareError> {
    if !k.is_finite() {
        return Err(CompareError::InvalidCurvature(k));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(CompareError::InvalidDimension(n));
    }
    if !tol_rel.is_finite() || !(0.0..1.0).contains(&tol_rel) {
        return Err(CompareError::BadTolerance(tol_rel));
    }
    let mut per_ray = Vec::new();
    let mut rays_skipped = 0usize;
    let mut rays_incompatible = 0usize;
    let mut worst_ratio = 0.0f64;
    let mut worst_ray = None;
    for (idx, ray) in family.rays.iter().enumerate() {
        if ray.points.len() < 3 {
            rays_skipped += 1;
            continue;
        }
        let d = ray.b - ray.a;
        let bound = match poincare_constant(k, n, d) {
            Ok(bound) => bound,
            Err(CompareError::IncompatibleDiameter { .. }) => {
                rays_incompatible += 1;
                continue;
            }
            Err(err) => return Err(err),
        };
        let constant = ray_chain_constant(&ray.params, &ray.masses);
        let ratio = constant / bound;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_ray = Some(idx);
        }
        per_ray.push(RayPoincare { ray: idx, d, constant, bound, ratio });
    }
    let rays_tested = per_ray.len();
    let verdict = if worst_ratio > 1.0 + tol_rel {
        Verdict::Fail
    } else if rays_tested == 0 {
        Verdict::VacuousRegime
    } else {
        Verdict::Pass
    };
    Ok(PoincareReport {
        k,
        n,
        tol_rel,
        rays_tested,
        rays_skipped,
        rays_incompatible,
        worst_ratio,
        worst_ray,
        per_ray,
        verdict,
    })
}
