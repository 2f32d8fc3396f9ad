//! Optimal transport on finite causal spaces.
//!
//! This crate maximizes `p`-th power time-separation over causal couplings of
//! measures on finite causal spaces, certifies or falsifies entropic curvature
//! bounds along the resulting interpolations, disintegrates a space into
//! transport rays emanating from an achronal set, and runs the classical
//! comparison-geometry checks (volume growth, diameter, spectral gap,
//! singularity thresholds) against model spacetimes.
//!
//! Layering, bottom to top:
//! * [`ext`] — extended reals shared by every module,
//! * [`coeff`] — distortion coefficients and scalar thresholds,
//! * [`space`] — finite causal spaces, achronal sets, measures, axioms,
//! * [`model`] — model spacetimes, discretization, geodesic interpolation,
//! * [`transport`] — the coupling LP, monotonicity audits, potentials,
//! * [`path`] / [`certify`] — displacement interpolation and entropy convexity,
//! * [`compare`] — volume comparison, diameter and spectral-gap checks,
//! * [`rays`] — ray disintegration, density bounds, mean curvature,
//! * [`io`] / [`experiment`] — persistence, reports, experiment drivers.

pub mod ext;
pub mod tol;
pub mod coeff;
pub mod space;
pub mod model;
pub mod flow;
pub mod simplex;
pub mod transport;
pub mod path;
pub mod certify;
pub mod compare;
pub mod rays;

pub use ext::ExtReal;
pub use model::{ModelKind, ModelSpacetime, Region, SamplerConfig};
pub use space::{AchronalSet, FiniteCausalSpace, WeightedMeasure};
pub use path::MeasurePath;
pub use certify::{tcd_certify, tmcp_certify, ConvexityReport, Verdict};
pub use compare::{
    bishop_gromov_check, bonnet_myers_check, brunn_minkowski_check,
    poincare_check, poincare_constant, radial_profile, BishopGromovReport,
    BonnetMyersReport, BrunnMinkowskiReport, PoincareReport, RadialProfile,
    RayPoincare, CACHE_DIR_ENV,
};
pub use rays::{
    extract_rays, hawking_certify, level_measures, mcp_density_test,
    mean_curvature_estimate, HawkingReport, HawkingVerdict, LevelReport,
    McpReport, MeanCurvatureReport, Ray, RayFamily, RaySide,
};
