//! Geodesics of measures: displacement interpolation along a coupling,
//! relative entropy, and the geodesy diagnostics that quantify how closely a
//! discretized path follows a true action-minimizing interpolation.
//!
//! A [`MeasurePath`] stores one measure per grid time. Interior measures are
//! built by moving every unit of coupled mass along the model geodesic joining
//! its endpoints and snapping the moved point to the nearest point of the
//! finite space; the two endpoint measures are the coupling's own marginals,
//! reproduced bit for bit. The snap log records every displacement so callers
//! can audit the discretization error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff;
use crate::ext::ExtReal;
use crate::model::{geodesic_interpolate, ModelError, ModelSpacetime};
use crate::space::{FiniteCausalSpace, SpaceError, WeightedMeasure};
use crate::transport::{solve_lp, Coupling, Side, TransportError};

/// Failure modes of path construction.
#[derive(Debug, Error)]
pub enum PathError {
    /// The time grid is not an increasing sequence from 0 to 1.
    #[error("bad time grid: {0}")]
    BadTimeGrid(String),
    /// The coupling places mass on a pair that is not chronologically
    /// related, so no timelike geodesic joins its endpoints.
    #[error("coupled pair ({i}, {j}) has separation {tau}; interpolation needs tau > 0")]
    NonChronologicalPair { i: usize, j: usize, tau: f64 },
    /// Dimension mismatch between the model and the space.
    #[error("model dimension {model_dim} does not match space dimension {space_dim}")]
    DimensionMismatch { model_dim: usize, space_dim: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One snapped displacement: at time-grid entry `time_index`, the mass of
/// coupling pair `pair_index` landed on space point `snapped_to`, a Euclidean
/// coordinate distance `displacement` away from the continuum geodesic point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapEvent {
    pub time_index: usize,
    pub pair_index: usize,
    pub snapped_to: usize,
    pub displacement: f64,
}

/// A measure-valued path on a fixed grid of times in `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurePath {
    times: Vec<f64>,
    measures: Vec<WeightedMeasure>,
    origin_plan: Coupling,
    snap_log: Vec<SnapEvent>,
}

impl MeasurePath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[WeightedMeasure] {
        &self.measures
    }

    pub fn measure_at(&self, k: usize) -> &WeightedMeasure {
        &self.measures[k]
    }

    /// The coupling the path was built from.
    pub fn origin_plan(&self) -> &Coupling {
        &self.origin_plan
    }

    pub fn snap_log(&self) -> &[SnapEvent] {
        &self.snap_log
    }

    /// Largest snap displacement over all interior times (0 when every moved
    /// point landed exactly on a space point).
    pub fn max_snap_displacement(&self) -> f64 {
        self.snap_log
            .iter()
            .fold(0.0_f64, |acc, e| acc.max(e.displacement))
    }

    /// Restriction to the closed sub-window between grid entries `lo` and
    /// `hi`, with times renormalized to `[0, 1]`. The restricted coupling
    /// pairs each source pair's position at the two window ends, recovered
    /// from the snap log, and keeps its mass.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<MeasurePath, PathError> {
        if lo >= hi || hi >= self.times.len() {
            return Err(PathError::BadTimeGrid(format!(
                "restriction window [{lo}, {hi}] is not a valid index pair"
            )));
        }
        let (a, b) = (self.times[lo], self.times[hi]);
        let times: Vec<f64> = self.times[lo..=hi]
            .iter()
            .map(|t| ((t - a) / (b - a)).clamp(0.0, 1.0))
            .collect();
        let measures = self.measures[lo..=hi].to_vec();
        let end_position = |k: usize, pair: usize| -> usize {
            // Endpoint grid entries carry no snap events: the measure there is
            // a marginal, so the pair sits at its own coordinate.
            if k == 0 {
                return self.origin_plan.pairs()[pair].0;
            }
            if k == self.times.len() - 1 {
                return self.origin_plan.pairs()[pair].1;
            }
            self.snap_log
                .iter()
                .find(|e| e.time_index == k && e.pair_index == pair)
                .map(|e| e.snapped_to)
                .expect("interior grid entries log every pair")
        };
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (pair, &m) in self.origin_plan.masses().iter().enumerate() {
            let key = (end_position(lo, pair), end_position(hi, pair));
            *merged.entry(key).or_insert(0.0) += m;
        }
        let origin_plan = Coupling::new(merged.into_iter().collect())
            .expect("merged restriction entries are distinct and positive");
        let snap_log = self
            .snap_log
            .iter()
            .filter(|e| e.time_index > lo && e.time_index < hi)
            .map(|e| SnapEvent { time_index: e.time_index - lo, ..e.clone() })
            .collect();
        Ok(MeasurePath { times, measures, origin_plan, snap_log })
    }
}

/// The uniform grid `0, 1/segments, ..., 1` with exact endpoints.
pub fn uniform_time_grid(segments: usize) -> Vec<f64> {
    assert!(segments >= 1, "need at least one segment");
    (0..=segments)
        .map(|j| j as f64 / segments as f64)
        .collect()
}

fn validate_times(times: &[f64]) -> Result<(), PathError> {
    if times.len() < 2 {
        return Err(PathError::BadTimeGrid("need at least two grid times".into()));
    }
    if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
        return Err(PathError::BadTimeGrid(format!(
            "grid must start at 0 and end at 1, got [{}, {}]",
            times[0],
            times.last().unwrap()
        )));
    }
    for w in times.windows(2) {
        if !w[1].is_finite() || w[0] >= w[1] {
            return Err(PathError::BadTimeGrid(format!(
                "grid must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn measure_from_entries(n: usize, entries: Vec<(usize, f64)>) -> Result<WeightedMeasure, SpaceError> {
    let (support, mass): (Vec<usize>, Vec<f64>) = entries.into_iter().unzip();
    WeightedMeasure::new(n, support, mass)
}

/// Mass granularity of stored paths: every stored mass is a positive multiple
/// of `2^-44`. Partial sums of such masses bounded by 1 need at most 44
/// mantissa bits, so every accumulation in the path pipeline is exact in
/// `f64` and agrees with exact rational arithmetic — in particular, each grid
/// measure remains exactly routable from the initial one along the plan.
pub const MASS_GRID: f64 = 1.0 / ((1u64 << 44) as f64);

fn dyadic_quantize(plan: &Coupling) -> Coupling {
    let mut mass: Vec<f64> = plan
        .masses()
        .iter()
        .map(|m| ((m / MASS_GRID).round().max(1.0)) * MASS_GRID)
        .collect();
    let total: f64 = mass.iter().sum();
    let largest = mass
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("couplings are nonempty");
    mass[largest] += 1.0 - total;
    assert!(mass[largest] > 0.0, "quantization cannot zero the largest mass");
    Coupling::new(plan.pairs().iter().copied().zip(mass).collect())
        .expect("requantized entries keep the original pair structure")
}

/// Moves the coupled mass along model geodesics and snaps it back onto the
/// space, producing one measure per grid time. The grid must run from 0 to 1;
/// those two endpoint measures are exactly the stored coupling's marginals.
/// Every coupled pair must be chronologically related (`tau > 0`), since null
/// and spacelike pairs admit no timelike geodesic.
///
/// The plan's masses are first rounded onto the dyadic [`MASS_GRID`] (total
/// pinned to 1 exactly); the stored `origin_plan` carries the rounded masses.
/// This keeps every mass accumulation exact, so transport between any two
/// grid measures is exactly feasible — re-solves in [`geodesy_defect`] cannot
/// fail on rounding dust.
pub fn displacement_interpolation(
    model: &ModelSpacetime,
    space: &FiniteCausalSpace,
    plan: &Coupling,
    times: &[f64],
) -> Result<MeasurePath, PathError> {
    validate_times(times)?;
    if model.dim != space.dim() {
        return Err(PathError::DimensionMismatch {
            model_dim: model.dim,
            space_dim: space.dim(),
        });
    }
    for &(i, j) in plan.pairs() {
        let tau = space.tau(i, j);
        if tau.is_nan() || tau <= 0.0 || !space.leq(i, j) {
            return Err(PathError::NonChronologicalPair { i, j, tau });
        }
    }
    let plan = dyadic_quantize(plan);
    let n = space.n();
    let mut measures = Vec::with_capacity(times.len());
    let mut snap_log = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        if t == 0.0 {
            measures.push(measure_from_entries(n, plan.marginal(Side::Left))?);
            continue;
        }
        if t == 1.0 {
            measures.push(measure_from_entries(n, plan.marginal(Side::Right))?);
            continue;
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (pair_index, (&(i, j), &m)) in
            plan.pairs().iter().zip(plan.masses()).enumerate()
        {
            let gamma = geodesic_interpolate(model, space.coords(i), space.coords(j), t)?;
            let snapped_to = space.nearest_point(&gamma);
            let displacement = euclid(space.coords(snapped_to), &gamma);
            snap_log.push(SnapEvent { time_index: k, pair_index, snapped_to, displacement });
            *acc.entry(snapped_to).or_insert(0.0) += m;
        }
        measures.push(measure_from_entries(n, acc.into_iter().collect())?);
    }
    Ok(MeasurePath {
        times: times.to_vec(),
        measures,
        origin_plan: plan,
        snap_log,
    })
}

/// Relative entropy of `mu` against the space's reference weights:
/// the sum of `mu_i * log(mu_i / m_i)` over the support. Infinite when the
/// measure charges a point of nonpositive reference weight (impossible for
/// validated spaces, kept for robustness).
pub fn entropy(mu: &WeightedMeasure, space: &FiniteCausalSpace) -> ExtReal {
    let mut acc = 0.0;
    for (i, m) in mu.iter() {
        let w = space.weight(i);
        if w <= 0.0 {
            return ExtReal::PosInf;
        }
        acc += m * (m / w).ln();
    }
    ExtReal::Finite(acc)
}

/// Exponentiated-entropy functional `exp(-entropy / n)` of a measure.
pub fn entropy_exponential(mu: &WeightedMeasure, space: &FiniteCausalSpace, n: f64) -> f64 {
    coeff::entropy_exp(entropy(mu, space), n)
}

/// How closely a path's transport values follow the straight line
/// `t * value(0, 1)`: `values[k]` is the optimal transport value from the
/// path's first measure to its `k`-th, re-solved from scratch, and
/// `max_defect` is the largest deviation from linearity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesyReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub full_value: f64,
    pub max_defect: f64,
}

/// Re-solves the transport problem from the initial measure to each grid
/// measure and reports the worst deviation from proportional growth. A path
/// that discretizes a true geodesic keeps this defect at the snap scale.
pub fn geodesy_defect(
    space: &FiniteCausalSpace,
    path: &MeasurePath,
    p: f64,
) -> Result<GeodesyReport, TransportError> {
    let mu0 = &path.measures()[0];
    let mut values = Vec::with_capacity(path.times().len());
    for mu_t in path.measures() {
        let outcome = solve_lp(space, mu0, mu_t, p)?;
        match outcome.value() {
            ExtReal::Finite(v) => values.push(v),
            _ => match outcome {
                crate::transport::TransportOutcome::Infeasible(w) => {
                    return Err(TransportError::NoCausalCoupling { witness: w })
                }
                crate::transport::TransportOutcome::Optimal(_) => unreachable!(),
            },
        }
    }
    let full_value = *values.last().unwrap();
    let max_defect = path
        .times()
        .iter()
        .zip(&values)
        .map(|(&t, &v)| (v - t * full_value).abs())
        .fold(0.0_f64, f64::max);
    Ok(GeodesyReport { times: path.times().to_vec(), values, full_value, max_defect })
}
