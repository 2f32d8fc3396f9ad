//! Central numerical tolerances.
//!
//! Every tolerance that a verdict or an error path depends on lives here, so a
//! report can cite the exact constant it was judged against. Functions derive
//! resolution-dependent tolerances from a discretization spacing.

/// Couplings must reproduce their marginals to this absolute accuracy.
pub const MARGINAL_ABS: f64 = 1e-10;

/// Measures must sum to one within this absolute slack.
pub const MASS_ABS: f64 = 1e-12;

/// Glued plans must reproduce the outer marginals to this absolute accuracy.
pub const GLUE_MARGINAL_ABS: f64 = 1e-12;

/// Slack on duality-gap and cyclical-monotonicity defects of optimal plans.
pub const OPT_DEFECT_ABS: f64 = 1e-9;

/// Relative agreement required between the exact and the float LP backends.
pub const BACKEND_AGREE_REL: f64 = 1e-8;

/// Relative slack on the value-equality constraint in the second-stage LP of
/// the dualisability certificate.
pub const SECOND_STAGE_VALUE_REL: f64 = 1e-9;

/// Interpolation consistency: time separation to an interpolant must match the
/// parameter fraction of the endpoint separation to this accuracy (exact
/// chart-level interpolation, before any snapping).
pub const INTERP_CONSISTENCY_ABS: f64 = 1e-9;

/// Chord formulas for curved models must agree with the shooting integrator to
/// this absolute accuracy before they are trusted.
pub const CHORD_GATE_ABS: f64 = 1e-6;

/// Relative mass-conservation slack in ray decompositions.
pub const RAY_MASS_REL: f64 = 1e-6;

/// Arguments of the finite-branch distortion coefficient below this size are
/// evaluated by the guarded series instead of the closed form.
pub const SIGMA_SERIES_CUTOFF: f64 = 1e-8;

/// Exact-model axiom validation scales the reverse-triangle slack by the
/// largest time separation times this factor.
pub const AXIOM_EXACT_REL: f64 = 1e-9;

/// Reverse-triangle slack for sampled (floating-chart) discretizations, per
/// unit spacing.
pub fn axiom_sampled_eps(spacing: f64) -> f64 {
    2.0 * spacing
}

/// Default equality slack when recognizing transport-ray pairs.
pub fn ray_relation_eps(spacing: f64, max_tau_v: f64) -> f64 {
    2.0 * spacing * (1.0 + max_tau_v)
}

/// Verdict tolerance for entropy-convexity certificates at a given spacing and
/// residual scale.
pub fn certify_tol(spacing: f64, scale: f64) -> f64 {
    f64::max(5.0 * spacing, 1e-6) * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certify_tol_floors_at_1e6() {
        assert_eq!(certify_tol(0.0, 1.0), 1e-6);
        assert_eq!(certify_tol(0.1, 1.0), 0.5);
        assert_eq!(certify_tol(0.1, 0.5), 0.25);
    }
}
