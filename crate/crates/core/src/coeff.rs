//! Distortion coefficients and scalar thresholds.
//!
//! The curvature-comparison machinery rests on three scalar families: the
//! generalized sine/cosine pair [`s_c_coeff`], the normalized distortion
//! coefficient [`sigma`], and its dimension-weighted variant [`tau_coeff`].
//! [`hawking_threshold`] converts an initial mean-curvature bound into the
//! maximal time a future can extend before the comparison argument forces a
//! singularity, and [`entropy_exp`] is the exponentiated-entropy functional
//! the convexity certificates are phrased in.

use crate::ext::ExtReal;
use crate::tol;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from coefficient evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    /// The dimension parameter must exceed one.
    #[error("dimension parameter must exceed 1, got N = {n}")]
    DimensionAtMostOne { n: f64 },
    /// The requested parameters fall outside every admissible regime.
    #[error("inadmissible regime: {condition}")]
    InadmissibleRegime { condition: String },
}

/// Generalized sine and cosine at comparison curvature `kappa`.
///
/// For `kappa > 0` this is `(sin(sqrt(kappa) theta)/sqrt(kappa),
/// cos(sqrt(kappa) theta))`, for `kappa = 0` it degenerates to `(theta, 1)`,
/// and for `kappa < 0` the hyperbolic pair takes over. Requires `theta >= 0`.
pub fn s_c_coeff(kappa: f64, theta: f64) -> (f64, f64) {
    assert!(theta >= 0.0, "theta must be nonnegative, got {theta}");
    if kappa > 0.0 {
        let r = kappa.sqrt();
        ((r * theta).sin() / r, (r * theta).cos())
    } else if kappa < 0.0 {
        let r = (-kappa).sqrt();
        ((r * theta).sinh() / r, (r * theta).cosh())
    } else {
        (theta, 1.0)
    }
}

/// Normalized distortion coefficient `s(kappa, t*theta) / s(kappa, theta)`.
///
/// Extended-real semantics: the value is `+inf` exactly when
/// `kappa * theta^2 >= pi^2` (past the conjugate radius), `t` when
/// `kappa * theta^2 = 0`, and the sine/sinh ratio otherwise. Arguments with
/// `|kappa theta^2|` below [`tol::SIGMA_SERIES_CUTOFF`] go through a guarded
/// series in `z = kappa theta^2` so the `kappa -> 0` limit is smooth to
/// second order. Requires `t` in `[0,1]` and `theta >= 0`.
pub fn sigma(kappa: f64, t: f64, theta: f64) -> ExtReal {
    assert!((0.0..=1.0).contains(&t), "t must lie in [0,1], got {t}");
    assert!(theta >= 0.0, "theta must be nonnegative, got {theta}");
    let z = kappa * theta * theta;
    if z >= PI * PI {
        return ExtReal::PosInf;
    }
    if z.abs() < tol::SIGMA_SERIES_CUTOFF {
        // Both odd series are power series in z: s(kappa, theta) =
        // theta * (1 - z/6 + z^2/120 - ...). Truncation error is O(z^3).
        let t2 = t * t;
        let num = t * (1.0 - z * t2 / 6.0 + z * z * t2 * t2 / 120.0);
        let den = 1.0 - z / 6.0 + z * z / 120.0;
        return ExtReal::Finite(num / den);
    }
    ExtReal::Finite(s_c_coeff(kappa, t * theta).0 / s_c_coeff(kappa, theta).0)
}

/// Dimension-weighted distortion coefficient
/// `t^(1/N) * sigma(K/(N-1), t, theta)^((N-1)/N)`.
///
/// Requires `N > 1`; the degenerate product `0 * inf` at `t = 0` in the
/// conjugate regime resolves to `0` because the `t`-factor vanishes
/// identically there.
pub fn tau_coeff(k: f64, n: f64, t: f64, theta: f64) -> Result<ExtReal, CoeffError> {
    if n <= 1.0 {
        return Err(CoeffError::DimensionAtMostOne { n });
    }
    assert!((0.0..=1.0).contains(&t), "t must lie in [0,1], got {t}");
    Ok(match sigma(k / (n - 1.0), t, theta) {
        ExtReal::PosInf => {
            if t == 0.0 {
                ExtReal::Finite(0.0)
            } else {
                ExtReal::PosInf
            }
        }
        ExtReal::Finite(s) => ExtReal::Finite(t.powf(1.0 / n) * s.powf((n - 1.0) / n)),
        ExtReal::NegInf => unreachable!("sigma is never -inf"),
    })
}

/// Parameters of the singularity-threshold comparison: an initial bound `h0`
/// on forward mean curvature, the timelike curvature bound `k`, and the
/// dimension bound `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkingParams {
    pub h0: f64,
    pub k: f64,
    pub n: f64,
}

/// Inverse cotangent ranged in `(0, pi)`, continuous through zero argument.
fn acot(x: f64) -> f64 {
    PI / 2.0 - x.atan()
}

/// Inverse hyperbolic cotangent for arguments `> 1`.
fn acoth(x: f64) -> f64 {
    debug_assert!(x > 1.0);
    0.5 * ((x + 1.0) / (x - 1.0)).ln()
}

/// Maximal future time separation from the initial slice permitted by the
/// comparison argument, as a function of the admissible `(h0, k, n)` regime.
///
/// Admissible regimes (all with `n > 1`): any `h0` when `k > 0`; `h0 < 0`
/// when `k = 0`; and `h0 < -sqrt(-k (n-1))` strictly when `k < 0`. Everything
/// else is rejected with the violated condition spelled out. Within each
/// regime the threshold is continuous in `h0`, and for `k = 0` it diverges to
/// `+inf` as `h0` approaches zero from below.
pub fn hawking_threshold(params: HawkingParams) -> Result<f64, CoeffError> {
    let HawkingParams { h0, k, n } = params;
    if n <= 1.0 {
        return Err(CoeffError::DimensionAtMostOne { n });
    }
    if k > 0.0 {
        let scale = ((n - 1.0) / k).sqrt();
        if h0 == 0.0 {
            Ok(PI / 2.0 * scale)
        } else {
            Ok(scale * acot(-h0 / (k * (n - 1.0)).sqrt()))
        }
    } else if k == 0.0 {
        if h0 < 0.0 {
            Ok(-(n - 1.0) / h0)
        } else {
            Err(CoeffError::InadmissibleRegime {
                condition: format!("K = 0 requires H0 < 0, got H0 = {h0}"),
            })
        }
    } else {
        let bound = (-k * (n - 1.0)).sqrt();
        if h0 < -bound {
            Ok((-(n - 1.0) / k).sqrt() * acoth(-h0 / bound))
        } else {
            Err(CoeffError::InadmissibleRegime {
                condition: format!(
                    "K < 0 requires H0 < -sqrt(-K(N-1)) = {}, got H0 = {h0} \
                     (the boundary case is excluded)",
                    -bound
                ),
            })
        }
    }
}

/// Exponentiated-entropy functional `exp(-ent / n)`, with the convention that
/// infinite entropy maps to zero. Requires `n > 0` and an entropy bounded
/// below (`-inf` is rejected).
pub fn entropy_exp(ent: ExtReal, n: f64) -> f64 {
    assert!(n > 0.0, "dimension parameter must be positive, got {n}");
    match ent {
        ExtReal::PosInf => 0.0,
        ExtReal::Finite(e) => (-e / n).exp(),
        ExtReal::NegInf => panic!("entropies are bounded below; -inf is not a valid input"),
    }
}
