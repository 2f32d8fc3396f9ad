//! Certification of entropic convexity inequalities along transport paths.
//!
//! Two certificates are produced. The curvature-dimension certificate
//! ([`tcd_certify`]) tests distortion-weighted convexity of the relative
//! entropy on every sub-window of a measure path. The measure-contraction
//! certificate ([`tmcp_certify`]) tests the one-sided inequality along
//! transport of a measure onto a single point. Both report signed residuals
//! (negative means the inequality is violated), an informational
//! finite-difference channel, and a three-way verdict: the claimed
//! parameters hold on the instance, fail on it, or put the comparison
//! coefficients past their conjugate radius so that no finite comparison
//! exists.

use serde::Serialize;
use thiserror::Error;

use crate::coeff::sigma;
use crate::ext::ExtReal;
use crate::model::ModelSpacetime;
use crate::path::{
    displacement_interpolation, entropy, entropy_exponential, MeasurePath, PathError,
};
use crate::space::{FiniteCausalSpace, SpaceError, WeightedMeasure};
use crate::transport::Coupling;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("curvature parameter must be finite, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension parameter must be finite and at least 1, got {0}")]
    InvalidDimension(f64),
    #[error("transport exponent must lie in (0, 1], got {0}")]
    InvalidExponent(f64),
    #[error("the starting measure needs at least two support points")]
    DegenerateSupport,
    #[error("contraction target must be a single point, but the plan hits {distinct}")]
    DiffuseTarget { distinct: usize },
    #[error("coupled pairs are not chronological: {points:?}")]
    ChronologyViolated { points: Vec<(usize, usize)> },
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Outcome of a convexity certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Every tested window satisfied the inequality within tolerance.
    Pass,
    /// Some window violated the inequality beyond tolerance.
    Fail,
    /// The comparison coefficient is infinite on the full window — the
    /// curvature-dimension pair puts the path past its conjugate radius —
    /// so there is no finite bound to test.
    VacuousRegime,
}

/// One tested window of the convexity inequality.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualEntry {
    /// Grid times of the window's endpoints.
    pub window: (f64, f64),
    /// Interior grid time at which the bound was evaluated.
    pub at: f64,
    /// Attained value minus required value; negative violates the bound.
    pub residual: f64,
}

/// Full evidence for one certificate run.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    /// Which inequality was tested: "TCD" or "TMCP".
    pub condition: String,
    /// Claimed curvature lower bound.
    pub k: f64,
    /// Claimed dimension upper bound.
    pub n: f64,
    /// Path grid times.
    pub times: Vec<f64>,
    /// Relative entropy of each path measure (`None` marks +infinity).
    pub entropies: Vec<Option<f64>>,
    /// Exponentiated entropies `exp(-Ent/n)`, one per grid time.
    pub u_values: Vec<f64>,
    /// Mass-weighted quadratic mean time separation of the coupling.
    pub tau_l2: f64,
    /// Distortion-coefficient channel; this channel drives the verdict.
    pub residuals: Vec<ResidualEntry>,
    /// Second-difference channel (informational; never affects the verdict).
    pub fd_residuals: Vec<ResidualEntry>,
    /// Pass threshold: the verdict is Pass when every residual is at least
    /// `-tol`.
    pub tol: f64,
    /// Discretization-noise scale expected in the second-difference channel.
    pub fd_tol: f64,
    /// Smallest distortion-channel residual (absent in the vacuous regime).
    pub min_residual: Option<f64>,
    pub verdict: Verdict,
}

/// Mass-weighted quadratic mean of the time separation over a coupling:
/// `sqrt(sum_i mass_i * tau(x_i, y_i)^2)`. Every coupled pair must be
/// chronological in `space`; all offenders are reported at once.
pub fn plan_tau_l2(
    space: &FiniteCausalSpace,
    plan: &Coupling,
) -> Result<f64, CertifyError> {
    let mut offenders = Vec::new();
    let mut acc = 0.0;
    for ((i, j), mass) in plan.iter() {
        let tau = space.tau(i, j);
        if tau.is_nan() || tau <= 0.0 || !space.leq(i, j) {
            offenders.push((i, j));
            continue;
        }
        acc += mass * tau * tau;
    }
    if !offenders.is_empty() {
        return Err(CertifyError::ChronologyViolated { points: offenders });
    }
    Ok(acc.sqrt())
}

fn validate_kn(k: f64, n: f64) -> Result<(), CertifyError> {
    if !k.is_finite() {
        return Err(CertifyError::InvalidCurvature(k));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(CertifyError::InvalidDimension(n));
    }
    Ok(())
}

/// Pass threshold for the distortion channel. Lattice snapping perturbs each
/// entropy by an amount that shrinks with the mesh; five mesh widths of slack
/// (floored for meshless spaces), in units of the largest `u` value, keeps
/// honest instances passing while leaving genuine violations — which do not
/// shrink under refinement — detectable.
fn pass_tolerance(space: &FiniteCausalSpace, u_values: &[f64]) -> f64 {
    let spacing = space.resolution().unwrap_or(0.0);
    let u_scale = u_values.iter().fold(1e-12f64, |a, &b| a.max(b));
    (5.0 * spacing).max(1e-6) * u_scale
}

/// Noise scale of the second-difference channel: an entropy perturbation of
/// size `eps` moves a central second difference by up to `4 eps / h_min^2`.
fn fd_tolerance(space: &FiniteCausalSpace, times: &[f64]) -> f64 {
    let spacing = space.resolution().unwrap_or(0.0);
    let h_min = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    4.0 * (5.0 * spacing).max(1e-6) / (h_min * h_min)
}

/// Central differences of the entropy on the (possibly non-uniform) grid,
/// compared against the differential form of the convexity bound:
/// `Ent'' - (Ent')^2 / n >= k * theta^2`. Windows touching an infinite
/// entropy are skipped.
fn fd_channel(
    times: &[f64],
    ents: &[ExtReal],
    k: f64,
    n: f64,
    theta: f64,
) -> Vec<ResidualEntry> {
    let mut out = Vec::new();
    for i in 1..times.len() - 1 {
        let (Some(e0), Some(e1), Some(e2)) =
            (ents[i - 1].finite(), ents[i].finite(), ents[i + 1].finite())
        else {
            continue;
        };
        let h0 = times[i] - times[i - 1];
        let h1 = times[i + 1] - times[i];
        let denom = h0 * h1 * (h0 + h1);
        let e_p = (h0 * h0 * e2 + (h1 * h1 - h0 * h0) * e1 - h1 * h1 * e0) / denom;
        let e_pp = 2.0 * (h0 * e2 - (h0 + h1) * e1 + h1 * e0) / denom;
        out.push(ResidualEntry {
            window: (times[i - 1], times[i + 1]),
            at: times[i],
            residual: e_pp - e_p * e_p / n - k * theta * theta,
        });
    }
    out
}

fn skeleton_report(
    condition: &str,
    space: &FiniteCausalSpace,
    path: &MeasurePath,
    k: f64,
    n: f64,
    theta: f64,
) -> (ConvexityReport, Vec<ExtReal>, Vec<f64>) {
    let ents: Vec<ExtReal> =
        path.measures().iter().map(|mu| entropy(mu, space)).collect();
    let u: Vec<f64> = path
        .measures()
        .iter()
        .map(|mu| entropy_exponential(mu, space, n))
        .collect();
    let report = ConvexityReport {
        condition: condition.to_string(),
        k,
        n,
        times: path.times().to_vec(),
        entropies: ents.iter().map(|e| e.finite()).collect(),
        u_values: u.clone(),
        tau_l2: theta,
        residuals: Vec::new(),
        fd_residuals: Vec::new(),
        tol: pass_tolerance(space, &u),
        fd_tol: fd_tolerance(space, path.times()),
        min_residual: None,
        verdict: Verdict::VacuousRegime,
    };
    (report, ents, u)
}

fn finish(mut report: ConvexityReport) -> ConvexityReport {
    let min = report
        .residuals
        .iter()
        .map(|r| r.residual)
        .fold(f64::INFINITY, f64::min);
    report.min_residual = Some(min);
    report.verdict =
        if min >= -report.tol { Verdict::Pass } else { Verdict::Fail };
    report
}

/// Certifies the entropic timelike curvature-dimension inequality TCD(k, n)
/// along a measure path.
///
/// For every window of grid times `(t_s, t_e)` and interior time `t_m`, with
/// `lambda = (t_m - t_s) / (t_e - t_s)` and window separation
/// `theta_sub = theta * (t_e - t_s)`, the bound
///
/// `u(t_m) >= sigma_{1-lambda}(theta_sub) * u(t_s) + sigma_lambda(theta_sub) * u(t_e)`
///
/// is evaluated, where `u = exp(-Ent/n)`, `theta` is the coupling's
/// quadratic-mean time separation, and the distortion coefficients carry
/// curvature `k / n`. Checking every sub-window, not just the endpoints,
/// makes the certificate sensitive to local convexity failures on paths
/// whose endpoint inequality happens to hold.
///
/// A path's measures refer to points by index only, so a path built on one
/// space can be re-certified against a rescaled copy of that space.
pub fn tcd_certify(
    space: &FiniteCausalSpace,
    path: &MeasurePath,
    k: f64,
    n: f64,
) -> Result<ConvexityReport, CertifyError> {
    validate_kn(k, n)?;
    let times = path.times();
    if times.len() < 3 {
        return Err(CertifyError::Path(PathError::BadTimeGrid(
            "certification needs at least one interior grid time".into(),
        )));
    }
    let theta = plan_tau_l2(space, path.origin_plan())?;
    let kappa = k / n;
    let (mut report, ents, u) = skeleton_report("TCD", space, path, k, n, theta);
    if matches!(sigma(kappa, 0.5, theta), ExtReal::PosInf) {
        return Ok(report);
    }
    for s in 0..times.len() {
        for e in (s + 2)..times.len() {
            let span = times[e] - times[s];
            // Sub-windows shrink the separation, so a finite full-window
            // coefficient guarantees finite coefficients here.
            let theta_sub = theta * span;
            for m in (s + 1)..e {
                let lambda = (times[m] - times[s]) / span;
                let back = sigma(kappa, 1.0 - lambda, theta_sub)
                    .expect_finite("sub-window distortion coefficient");
                let fore = sigma(kappa, lambda, theta_sub)
                    .expect_finite("sub-window distortion coefficient");
                report.residuals.push(ResidualEntry {
                    window: (times[s], times[e]),
                    at: times[m],
                    residual: u[m] - back * u[s] - fore * u[e],
                });
            }
        }
    }
    report.fd_residuals = fd_channel(times, &ents, k, n, theta);
    Ok(finish(report))
}

/// Certifies the one-sided contraction inequality TMCP(k, n) along a path
/// whose coupling sends all mass onto a single target point:
/// `u(t) >= sigma_{1-t}(theta) * u(0)` for every grid time `t < 1`, with the
/// distortion coefficient at curvature `k / n` and `theta` the
/// quadratic-mean time separation to the target.
pub fn tmcp_certify_path(
    space: &FiniteCausalSpace,
    path: &MeasurePath,
    k: f64,
    n: f64,
) -> Result<ConvexityReport, CertifyError> {
    validate_kn(k, n)?;
    let times = path.times();
    if times.len() < 3 {
        return Err(CertifyError::Path(PathError::BadTimeGrid(
            "certification needs at least one interior grid time".into(),
        )));
    }
    let plan = path.origin_plan();
    let mut targets: Vec<usize> = plan.pairs().iter().map(|&(_, j)| j).collect();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() != 1 {
        return Err(CertifyError::DiffuseTarget { distinct: targets.len() });
    }
    let theta = plan_tau_l2(space, plan)?;
    let kappa = k / n;
    let (mut report, ents, u) = skeleton_report("TMCP", space, path, k, n, theta);
    if matches!(sigma(kappa, 0.5, theta), ExtReal::PosInf) {
        return Ok(report);
    }
    for (idx, &t) in times.iter().enumerate().take(times.len() - 1) {
        let coeff = sigma(kappa, 1.0 - t, theta)
            .expect_finite("distortion coefficient inside the conjugate radius");
        report.residuals.push(ResidualEntry {
            window: (0.0, 1.0),
            at: t,
            residual: u[idx] - coeff * u[0],
        });
    }
    report.fd_residuals = fd_channel(times, &ents, k, n, theta);
    Ok(finish(report))
}

/// Builds and certifies the contraction path for TMCP(k, n): couples `mu0`
/// with the point mass at `x1` — the product plan, which is the only causal
/// coupling onto a single point — interpolates it along model geodesics over
/// `t_grid`, and runs [`tmcp_certify_path`] on the result.
///
/// The verdict does not depend on the transport exponent `p`, because the
/// coupling is the same for every exponent; `p` is still validated so that
/// the certificate names a well-posed maximization. Every atom of `mu0` must
/// lie strictly in the chronological past of `x1`; all offenders are
/// reported in one error.
#[allow(clippy::too_many_arguments)]
pub fn tmcp_certify(
    space: &FiniteCausalSpace,
    model: &ModelSpacetime,
    mu0: &WeightedMeasure,
    x1: usize,
    k: f64,
    n: f64,
    p: f64,
    t_grid: &[f64],
) -> Result<(ConvexityReport, MeasurePath), CertifyError> {
    validate_kn(k, n)?;
    if p.is_nan() || p <= 0.0 || p > 1.0 {
        return Err(CertifyError::InvalidExponent(p));
    }
    if mu0.len() < 2 {
        return Err(CertifyError::DegenerateSupport);
    }
    if x1 >= space.n() {
        return Err(CertifyError::Space(SpaceError::IndexOutOfBounds {
            index: x1,
            n: space.n(),
        }));
    }
    let offenders: Vec<(usize, usize)> = mu0
        .support()
        .iter()
        .copied()
        .filter(|&i| {
            let tau = space.tau(i, x1);
            tau.is_nan() || tau <= 0.0 || !space.leq(i, x1)
        })
        .map(|i| (i, x1))
        .collect();
    if !offenders.is_empty() {
        return Err(CertifyError::ChronologyViolated { points: offenders });
    }
    let plan = Coupling::new(mu0.iter().map(|(i, m)| ((i, x1), m)).collect())
        .expect("product coupling of a valid measure is well-formed");
    let path = displacement_interpolation(model, space, &plan, t_grid)?;
    let report = tmcp_certify_path(space, &path, k, n)?;
    Ok((report, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{discretize, ModelKind, Region, SamplerConfig};
    use crate::path::uniform_time_grid;

    fn flat_box(tmax: f64, xmax: f64) -> ModelSpacetime {
        ModelSpacetime::new(
            ModelKind::Minkowski,
            2,
            Region::Box_ { min: vec![0.0, -xmax], max: vec![tmax, xmax] },
        )
        .unwrap()
    }

    /// Uniform measure on the lattice block `t <= t_cut`, coupled atom by
    /// atom with its own rigid translate `shift` later in coordinate time.
    /// A rigid translation pairing is cyclically monotone, so this is the
    /// plan of an actual geodesic of measures; with `shift` and the grid
    /// chosen lattice-aligned the interpolants never snap.
    fn translation_path(
        model: &ModelSpacetime,
        space: &FiniteCausalSpace,
        t_cut: f64,
        shift: f64,
        segments: usize,
    ) -> MeasurePath {
        let sources: Vec<usize> = (0..space.n())
            .filter(|&i| space.coords(i)[0] <= t_cut + 1e-9)
            .collect();
        let mu0 = WeightedMeasure::uniform_on(space, &sources).unwrap();
        let plan = Coupling::new(
            mu0.iter()
                .map(|(i, m)| {
                    let c = space.coords(i);
                    let j = space.nearest_point(&[c[0] + shift, c[1]]);
                    ((i, j), m)
                })
                .collect(),
        )
        .unwrap();
        displacement_interpolation(model, space, &plan, &uniform_time_grid(segments))
            .unwrap()
    }

    fn translation_fixture() -> (FiniteCausalSpace, MeasurePath) {
        let model = flat_box(2.5, 0.3);
        let space =
            discretize(&model, &SamplerConfig::Lattice { spacing: 0.1 }).unwrap();
        let path = translation_path(&model, &space, 0.3, 2.2, 11);
        (space, path)
    }

    fn tall_box_instance(
        spacing: f64,
    ) -> (ModelSpacetime, FiniteCausalSpace, WeightedMeasure, usize) {
        let model = flat_box(4.6, 0.3);
        let space = discretize(&model, &SamplerConfig::Lattice { spacing }).unwrap();
        let sources: Vec<usize> = (0..space.n())
            .filter(|&i| space.coords(i)[0] <= 0.6 + 1e-9)
            .collect();
        let mu0 = WeightedMeasure::uniform_on(&space, &sources).unwrap();
        let x1 = space.nearest_point(&[4.5, 0.0]);
        (model, space, mu0, x1)
    }

    #[test]
    fn flat_translation_is_exactly_convex_at_zero_curvature() {
        let (space, path) = translation_fixture();
        assert!(
            path.max_snap_displacement() < 1e-12,
            "aligned translation should never snap, moved {}",
            path.max_snap_displacement()
        );
        let report = tcd_certify(&space, &path, 0.0, 2.0).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        // A rigid translation of a uniform block keeps the entropy constant,
        // so at zero curvature every window residual vanishes identically.
        let min = report.min_residual.unwrap();
        assert!(min.abs() < 1e-12, "min residual {min}");
        assert!((report.tau_l2 - 2.2).abs() < 1e-12, "theta {}", report.tau_l2);
        let u0 = report.u_values[0];
        for u in &report.u_values {
            assert!((u - u0).abs() < 1e-12, "u drifted: {u} vs {u0}");
        }
        for fd in &report.fd_residuals {
            assert!(fd.residual.abs() < 1e-9, "fd residual {}", fd.residual);
        }
        let interior = report.times.len() - 2;
        let t = report.times.len();
        assert_eq!(report.residuals.len(), t * (t - 1) * (t - 2) / 6);
        assert_eq!(report.fd_residuals.len(), interior);
    }

    #[test]
    fn flat_translation_fails_a_positive_curvature_claim() {
        let (space, path) = translation_fixture();
        let report = tcd_certify(&space, &path, 2.0, 2.0).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        // At kappa * theta^2 = 4.84 the full-window coefficients sum to
        // about 2.2, so the midpoint residual is near -1.2 u — far beyond
        // any mesh tolerance.
        assert!(
            report.min_residual.unwrap() < -0.5,
            "min residual {:?}",
            report.min_residual
        );
    }

    #[test]
    fn beyond_the_conjugate_radius_the_claim_is_vacuous() {
        let (space, path) = translation_fixture();
        // kappa * theta^2 = 2.1 * 4.84 > pi^2: no finite comparison exists.
        let report = tcd_certify(&space, &path, 4.2, 2.0).unwrap();
        assert_eq!(report.verdict, Verdict::VacuousRegime);
        assert!(report.residuals.is_empty());
        assert!(report.fd_residuals.is_empty());
        assert!(report.min_residual.is_none());
    }

    #[test]
    fn verdicts_are_monotone_in_curvature_and_dimension() {
        let (space, path) = translation_fixture();
        // Passing at (k, n) implies passing for smaller k and larger n.
        for (k, n) in [(0.0, 2.0), (-1.0, 2.0), (0.0, 3.0), (-1.0, 3.0)] {
            let report = tcd_certify(&space, &path, k, n).unwrap();
            assert_eq!(report.verdict, Verdict::Pass, "expected pass at ({k}, {n})");
        }
        // Failing at (k, n) implies failing for larger k at the same n, as
        // long as the comparison stays finite.
        for k in [2.0, 3.0] {
            let report = tcd_certify(&space, &path, k, 2.0).unwrap();
            assert_eq!(report.verdict, Verdict::Fail, "expected fail at ({k}, 2)");
        }
    }

    #[test]
    fn rescaled_spaces_rescale_residuals_by_the_predicted_factor() {
        let (space, path) = translation_fixture();
        let (a, b, r) = (2.0, 3.0, 2.0);
        let scaled_space = space.scale(a, b, r);
        for k in [0.0, 2.0] {
            let base = tcd_certify(&space, &path, k, 2.0).unwrap();
            // Stretching time separations by r preserves the condition with
            // curvature k / r^2; scaling the reference measure by b scales
            // every u value, hence every residual, by b^(1/n).
            let scaled = tcd_certify(&scaled_space, &path, k / (r * r), 2.0).unwrap();
            assert_eq!(base.verdict, scaled.verdict);
            assert!((scaled.tau_l2 - r * base.tau_l2).abs() < 1e-9);
            let factor = b.sqrt();
            for (x, y) in base.u_values.iter().zip(&scaled.u_values) {
                assert!((y - factor * x).abs() < 1e-9, "u {y} vs {}", factor * x);
            }
            assert_eq!(base.residuals.len(), scaled.residuals.len());
            for (x, y) in base.residuals.iter().zip(&scaled.residuals) {
                assert_eq!(x.window, y.window);
                assert_eq!(x.at, y.at);
                assert!(
                    (y.residual - factor * x.residual).abs() < 1e-9,
                    "residual {} vs {}",
                    y.residual,
                    factor * x.residual
                );
            }
            // The tolerance picks up the measure factor and the stretched
            // mesh, so sufficiently clear verdicts are scale-stable.
            assert!((scaled.tol - r * factor * base.tol).abs() < 1e-9);
        }
    }

    #[test]
    fn contraction_toward_a_point_passes_at_zero_curvature() {
        let (model, space, mu0, x1) = tall_box_instance(0.1);
        let (report, path) = tmcp_certify(
            &space,
            &model,
            &mu0,
            x1,
            0.0,
            2.0,
            0.5,
            &uniform_time_grid(8),
        )
        .unwrap();
        assert_eq!(
            report.verdict,
            Verdict::Pass,
            "min {:?} vs tol {}",
            report.min_residual,
            report.tol
        );
        // Flat-space contraction of a block toward a point scales the
        // support's reference mass like (1 - t)^2 or better, even after
        // lattice rounding.
        let m0 = space.mass_of(path.measure_at(0).support());
        for (idx, &t) in path.times().iter().enumerate() {
            let mt = space.mass_of(path.measure_at(idx).support());
            let floor = (1.0 - t) * (1.0 - t) * m0;
            assert!(
                mt >= floor - 1e-12,
                "t = {t}: support mass {mt} fell below {floor}"
            );
        }
    }

    #[test]
    fn tall_contraction_fails_positive_curvature_and_is_vacuous_beyond() {
        let (model, space, mu0, x1) = tall_box_instance(0.1);
        let grid = uniform_time_grid(8);
        let (fail, _) =
            tmcp_certify(&space, &model, &mu0, x1, 1.0, 2.0, 0.5, &grid).unwrap();
        assert_eq!(fail.verdict, Verdict::Fail);
        assert!(
            fail.min_residual.unwrap() < -1.0,
            "min residual {:?}",
            fail.min_residual
        );
        let (vac, _) =
            tmcp_certify(&space, &model, &mu0, x1, 4.0, 2.0, 0.5, &grid).unwrap();
        assert_eq!(vac.verdict, Verdict::VacuousRegime);
        assert!(vac.residuals.is_empty());
        assert!(vac.min_residual.is_none());
    }

    #[test]
    fn non_chronological_start_atoms_are_all_reported() {
        let (model, space, _, x1) = tall_box_instance(0.1);
        let bad_spacelike = space.nearest_point(&[4.5, 0.1]);
        let bad_future = space.nearest_point(&[4.6, 0.0]);
        let good = space.nearest_point(&[0.0, 0.0]);
        let third = 1.0 / 3.0;
        let mu0 = WeightedMeasure::new(
            space.n(),
            vec![good, bad_spacelike, bad_future],
            vec![third, third, third],
        )
        .unwrap();
        let err = tmcp_certify(
            &space,
            &model,
            &mu0,
            x1,
            0.0,
            2.0,
            0.5,
            &uniform_time_grid(4),
        )
        .unwrap_err();
        match err {
            CertifyError::ChronologyViolated { points } => {
                assert_eq!(points.len(), 2, "offenders {points:?}");
                assert!(points.contains(&(bad_spacelike, x1)));
                assert!(points.contains(&(bad_future, x1)));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parameter_and_plan_validation_rejects_bad_inputs() {
        let (model, space, mu0, x1) = tall_box_instance(0.1);
        let grid = uniform_time_grid(4);
        let call = |k: f64, n: f64, p: f64| {
            tmcp_certify(&space, &model, &mu0, x1, k, n, p, &grid)
        };
        assert!(matches!(
            call(f64::NAN, 2.0, 0.5),
            Err(CertifyError::InvalidCurvature(_))
        ));
        assert!(matches!(
            call(0.0, 0.5, 0.5),
            Err(CertifyError::InvalidDimension(_))
        ));
        assert!(matches!(
            call(0.0, 2.0, 0.0),
            Err(CertifyError::InvalidExponent(_))
        ));
        assert!(matches!(
            call(0.0, 2.0, 1.5),
            Err(CertifyError::InvalidExponent(_))
        ));
        let lone =
            WeightedMeasure::dirac(space.n(), space.nearest_point(&[0.0, 0.0])).unwrap();
        assert!(matches!(
            tmcp_certify(&space, &model, &lone, x1, 0.0, 2.0, 0.5, &grid),
            Err(CertifyError::DegenerateSupport)
        ));
        assert!(matches!(
            tmcp_certify(&space, &model, &mu0, space.n(), 0.0, 2.0, 0.5, &grid),
            Err(CertifyError::Space(SpaceError::IndexOutOfBounds { .. }))
        ));
        // A plan spreading over two targets is not a contraction instance.
        let i = space.nearest_point(&[0.0, 0.0]);
        let j = space.nearest_point(&[0.0, 0.1]);
        let t2 = space.nearest_point(&[4.5, 0.1]);
        let spread =
            Coupling::new(vec![((i, x1), 0.5), ((j, t2), 0.5)]).unwrap();
        let path =
            displacement_interpolation(&model, &space, &spread, &grid).unwrap();
        assert!(matches!(
            tmcp_certify_path(&space, &path, 0.0, 2.0),
            Err(CertifyError::DiffuseTarget { distinct: 2 })
        ));
    }

    #[test]
    fn full_window_entries_match_a_direct_recomputation() {
        let (space, path) = translation_fixture();
        let report = tcd_certify(&space, &path, -1.0, 2.0).unwrap();
        let theta = report.tau_l2;
        let u = &report.u_values;
        let last = report.times.len() - 1;
        let mut seen = 0usize;
        for entry in report.residuals.iter().filter(|r| r.window == (0.0, 1.0)) {
            let idx = report
                .times
                .iter()
                .position(|&t| t == entry.at)
                .expect("entry time is a grid time");
            let back = sigma(-0.5, 1.0 - entry.at, theta).expect_finite("coefficient");
            let fore = sigma(-0.5, entry.at, theta).expect_finite("coefficient");
            let direct = u[idx] - back * u[0] - fore * u[last];
            assert!(
                (entry.residual - direct).abs() < 1e-15,
                "window residual {} vs direct {direct}",
                entry.residual
            );
            seen += 1;
        }
        assert_eq!(seen, report.times.len() - 2);
    }

    #[test]
    fn bad_time_grids_propagate_as_path_errors() {
        let (model, space, mu0, x1) = tall_box_instance(0.1);
        // Grid not ending at 1: rejected while building the path.
        let err = tmcp_certify(
            &space,
            &model,
            &mu0,
            x1,
            0.0,
            2.0,
            0.5,
            &[0.0, 0.5, 0.9],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            CertifyError::Path(PathError::BadTimeGrid(_))
        ));
        // Endpoints only: a valid path, but nothing interior to certify.
        let err = tmcp_certify(&space, &model, &mu0, x1, 0.0, 2.0, 0.5, &[0.0, 1.0])
            .unwrap_err();
        assert!(matches!(
            err,
            CertifyError::Path(PathError::BadTimeGrid(_))
        ));
    }
}
