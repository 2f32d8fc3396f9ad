//! Finite causal spaces: points with coordinates, a volume weight, a causal
//! order and a time-separation matrix.
//!
//! A space either stores its order/separation matrices densely or keeps a
//! handle to the model spacetime that generated it and evaluates entries on
//! demand (large discretizations would not fit an `n x n` matrix; the on-disk
//! format makes the same concession for model-tagged files).

use crate::model::{self, ModelSpacetime, SamplerConfig};
use crate::tol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Errors raised by constructors and space-level operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("weight of point {index} must be positive, got {weight}")]
    NonpositiveWeight { index: usize, weight: f64 },
    #[error("masses must sum to 1 within {slack}, got {sum}")]
    BadTotalMass { sum: f64, slack: f64 },
    #[error("support index {index} appears more than once")]
    DuplicateSupport { index: usize },
    #[error("mass at support position {position} must be positive, got {mass}")]
    NonpositiveMass { position: usize, mass: f64 },
    #[error("index {index} out of bounds for a space of {n} points")]
    IndexOutOfBounds { index: usize, n: usize },
    #[error(
        "set is not achronal: points {i} and {j} are chronologically related (tau = {tau})"
    )]
    NotAchronal { i: usize, j: usize, tau: f64 },
    #[error("empty set where a nonempty one is required")]
    EmptySet,
}

/// Grid metadata for lattice discretizations: per-axis chart ranges plus a
/// dense chart-cell -> point-index lookup (holes allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub start: Vec<f64>,
    pub step: Vec<f64>,
    pub count: Vec<usize>,
    /// Row-major over `count`, `-1` where the cell holds no point.
    pub lookup: Vec<i64>,
}

impl GridMeta {
    /// Point index at integer grid key, if present.
    pub fn at(&self, key: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for (a, &k) in key.iter().enumerate() {
            if k < 0 || k as usize >= self.count[a] {
                return None;
            }
            flat = flat * self.count[a] + k as usize;
        }
        let v = self.lookup[flat];
        (v >= 0).then_some(v as usize)
    }
}

/// Provenance of a discretized space: the model, the sampler and (for
/// lattices) the chart grid, plus a resolution hint driving default
/// tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceMeta {
    pub model: ModelSpacetime,
    pub sampler: SamplerConfig,
    pub grid: Option<GridMeta>,
}

#[derive(Debug, Clone)]
enum CausalData {
    Dense { leq: Vec<bool>, tau: Vec<f64> },
    ModelBacked,
}

/// A finite measured causal space.
#[derive(Debug, Clone)]
pub struct FiniteCausalSpace {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    weight: Vec<f64>,
    labels: Option<Vec<String>>,
    data: CausalData,
    meta: Option<SpaceMeta>,
    /// Discretization scale in time-separation units, when known.
    resolution: Option<f64>,
}

impl FiniteCausalSpace {
    /// Builds a dense space from explicit matrices (row-major, `n x n`).
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        weight: Vec<f64>,
        leq: Vec<bool>,
        tau: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, SpaceError> {
        if dim == 0 {
            return Err(SpaceError::Shape("dim must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(SpaceError::Shape(format!(
                "coords length {} is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        let n = coords.len() / dim;
        if weight.len() != n {
            return Err(SpaceError::Shape(format!(
                "expected {n} weights, got {}",
                weight.len()
            )));
        }
        if leq.len() != n * n || tau.len() != n * n {
            return Err(SpaceError::Shape(format!(
                "expected {n}x{n} order/separation matrices, got {} and {}",
                leq.len(),
                tau.len()
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(SpaceError::Shape(format!(
                    "expected {n} labels, got {}",
                    l.len()
                )));
            }
        }
        for (i, &w) in weight.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(SpaceError::NonpositiveWeight { index: i, weight: w });
            }
        }
        Ok(FiniteCausalSpace {
            n,
            dim,
            coords,
            weight,
            labels,
            data: CausalData::Dense { leq, tau },
            meta: None,
            resolution: None,
        })
    }

    /// Builds a model-backed space whose matrices are evaluated on demand.
    pub(crate) fn model_backed(
        coords: Vec<f64>,
        weight: Vec<f64>,
        meta: SpaceMeta,
        resolution: f64,
    ) -> Result<Self, SpaceError> {
        let dim = meta.model.dim;
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(SpaceError::Shape(format!(
                "coords length {} is not a multiple of dim {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if weight.len() != n {
            return Err(SpaceError::Shape(format!(
                "expected {n} weights, got {}",
                weight.len()
            )));
        }
        for (i, &w) in weight.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(SpaceError::NonpositiveWeight { index: i, weight: w });
            }
        }
        Ok(FiniteCausalSpace {
            n,
            dim,
            coords,
            weight,
            labels: None,
            data: CausalData::ModelBacked,
            meta: Some(meta),
            resolution: Some(resolution),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn all_coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label_of(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format!("#{i}"),
        }
    }

    pub fn meta(&self) -> Option<&SpaceMeta> {
        self.meta.as_ref()
    }

    /// Discretization scale in time-separation units, if known.
    pub fn resolution(&self) -> Option<f64> {
        self.resolution
    }

    pub fn set_resolution(&mut self, r: f64) {
        self.resolution = Some(r);
    }

    /// Causal order: is `i` in the causal past of `j` (reflexive)?
    pub fn leq(&self, i: usize, j: usize) -> bool {
        match &self.data {
            CausalData::Dense { leq, .. } => leq[i * self.n + j],
            CausalData::ModelBacked => {
                if i == j {
                    return true;
                }
                let m = &self.meta.as_ref().expect("model-backed space has meta").model;
                model::model_leq(m, self.coords(i), self.coords(j))
            }
        }
    }

    /// Time separation from `i` to `j`; zero whenever `i` is not below `j`.
    pub fn tau(&self, i: usize, j: usize) -> f64 {
        match &self.data {
            CausalData::Dense { tau, .. } => tau[i * self.n + j],
            CausalData::ModelBacked => {
                if i == j {
                    return 0.0;
                }
                let m = &self.meta.as_ref().expect("model-backed space has meta").model;
                model::model_tau(m, self.coords(i), self.coords(j))
            }
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.data, CausalData::Dense { .. })
    }

    /// Materializes the matrices of a model-backed space (no-op when dense).
    pub fn densify(&self) -> FiniteCausalSpace {
        if self.is_dense() {
            return self.clone();
        }
        let n = self.n;
        let mut leq = vec![false; n * n];
        let mut tau = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                leq[i * n + j] = self.leq(i, j);
                tau[i * n + j] = self.tau(i, j);
            }
        }
        FiniteCausalSpace {
            data: CausalData::Dense { leq, tau },
            ..self.clone()
        }
    }

    /// Largest time separation over all pairs. O(n^2) on model-backed spaces.
    pub fn tau_max(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.tau(i, j));
            }
        }
        m
    }

    /// Total weight of a set of points.
    pub fn mass_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weight[i]).sum()
    }

    /// Index of the point nearest to `target` in Euclidean coordinate
    /// distance; ties resolve to the lowest index. Lattice-backed spaces take
    /// an O(1) grid path, everything else scans.
    pub fn nearest_point(&self, target: &[f64]) -> usize {
        assert_eq!(target.len(), self.dim, "target dimension mismatch");
        if let Some(meta) = &self.meta {
            if meta.grid.is_some() {
                if let Some(i) = model::grid_snap(meta, &self.coords, self.dim, target) {
                    return i;
                }
            }
        }
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..self.n {
            let d = euclid2(self.coords(i), target);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Formal rescaling: coordinates by `a`, weights by `b`, time separations
    /// by `r` (the causal order is unchanged). Model-backed spaces are
    /// materialized first, and the provenance metadata is dropped because the
    /// rescaled data no longer matches any model chart.
    pub fn scale(&self, a: f64, b: f64, r: f64) -> FiniteCausalSpace {
        assert!(a > 0.0 && b > 0.0 && r > 0.0, "scale factors must be positive");
        let dense = self.densify();
        let (leq, tau) = match dense.data {
            CausalData::Dense { leq, tau } => (leq, tau),
            CausalData::ModelBacked => unreachable!(),
        };
        FiniteCausalSpace {
            n: self.n,
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * a).collect(),
            weight: self.weight.iter().map(|w| w * b).collect(),
            labels: self.labels.clone(),
            data: CausalData::Dense {
                leq,
                tau: tau.into_iter().map(|t| t * r).collect(),
            },
            meta: None,
            resolution: self.resolution.map(|res| res * r),
        }
    }

    fn check_index(&self, i: usize) -> Result<(), SpaceError> {
        if i >= self.n {
            Err(SpaceError::IndexOutOfBounds { index: i, n: self.n })
        } else {
            Ok(())
        }
    }
}

fn euclid2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One reported axiom defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AxiomViolation {
    NotReflexive { i: usize },
    NotTransitive { i: usize, j: usize, k: usize },
    SeparationWithoutOrder { i: usize, j: usize, tau: f64 },
    SeparationOffOrder { i: usize, j: usize, tau: f64 },
    ReverseTriangle { i: usize, j: usize, k: usize, defect: f64 },
    NonpositiveWeight { i: usize, weight: f64 },
    NegativeSeparation { i: usize, j: usize, tau: f64 },
    /// Validation stopped early after too many defects.
    Truncated { reported: usize },
}

impl fmt::Display for AxiomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AxiomViolation::*;
        match self {
            NotReflexive { i } => write!(f, "point {i} is not below itself"),
            NotTransitive { i, j, k } => {
                write!(f, "order not transitive: {i} <= {j} <= {k} but not {i} <= {k}")
            }
            SeparationWithoutOrder { i, j, tau } => write!(
                f,
                "tau({i},{j}) = {tau} > 0 although {i} is not below {j}"
            ),
            SeparationOffOrder { i, j, tau } => write!(
                f,
                "tau({i},{j}) = {tau} must vanish because {i} is not below {j}"
            ),
            ReverseTriangle { i, j, k, defect } => write!(
                f,
                "reverse triangle fails on {i} <= {j} <= {k} by {defect}"
            ),
            NonpositiveWeight { i, weight } => {
                write!(f, "weight({i}) = {weight} is not positive")
            }
            NegativeSeparation { i, j, tau } => {
                write!(f, "tau({i},{j}) = {tau} is negative")
            }
            Truncated { reported } => {
                write!(f, "validation truncated after {reported} defects")
            }
        }
    }
}

const MAX_REPORTED_VIOLATIONS: usize = 10_000;

/// Checks the order and separation axioms, returning every defect found (up
/// to an internal cap) instead of failing on the first. `eps_rt` is the
/// additive slack granted to the reverse triangle inequality. O(n^3).
pub fn validate_axioms(space: &FiniteCausalSpace, eps_rt: f64) -> Vec<AxiomViolation> {
    let n = space.n();
    let mut out = Vec::new();
    let push = |out: &mut Vec<AxiomViolation>, v: AxiomViolation| -> bool {
        if out.len() >= MAX_REPORTED_VIOLATIONS {
            return false;
        }
        out.push(v);
        true
    };
    for (i, &w) in space.weights().iter().enumerate() {
        if w.is_nan() || w <= 0.0 {
            push(&mut out, AxiomViolation::NonpositiveWeight { i, weight: w });
        }
    }
    for i in 0..n {
        if !space.leq(i, i) {
            push(&mut out, AxiomViolation::NotReflexive { i });
        }
    }
    'pairs: for i in 0..n {
        for j in 0..n {
            let t = space.tau(i, j);
            if t < 0.0 && !push(&mut out, AxiomViolation::NegativeSeparation { i, j, tau: t }) {
                break 'pairs;
            }
            if !space.leq(i, j)
                && t != 0.0
                && !push(&mut out, AxiomViolation::SeparationOffOrder { i, j, tau: t })
            {
                break 'pairs;
            }
        }
    }
    'trans: for i in 0..n {
        for j in 0..n {
            if i == j || !space.leq(i, j) {
                continue;
            }
            for k in 0..n {
                if space.leq(j, k)
                    && !space.leq(i, k)
                    && !push(&mut out, AxiomViolation::NotTransitive { i, j, k })
                {
                    break 'trans;
                }
            }
        }
    }
    'rt: for i in 0..n {
        for j in 0..n {
            if !space.leq(i, j) || i == j {
                continue;
            }
            let tij = space.tau(i, j);
            for k in 0..n {
                if j == k || !space.leq(j, k) {
                    continue;
                }
                let defect = tij + space.tau(j, k) - space.tau(i, k);
                if defect > eps_rt
                    && !push(
                        &mut out,
                        AxiomViolation::ReverseTriangle { i, j, k, defect },
                    )
                {
                    break 'rt;
                }
            }
        }
    }
    if out.len() >= MAX_REPORTED_VIOLATIONS {
        out.push(AxiomViolation::Truncated { reported: MAX_REPORTED_VIOLATIONS });
    }
    out
}

/// Direction selector for cone operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Future,
    Past,
}

/// Chronological (`strict`) or causal cone of a set of points, as a sorted
/// index list. The causal cone contains the set itself by reflexivity; the
/// chronological one collects points at positive time separation.
pub fn cone_sets(
    space: &FiniteCausalSpace,
    set: &[usize],
    direction: Direction,
    strict: bool,
) -> Vec<usize> {
    let mut out = BTreeSet::new();
    for y in 0..space.n() {
        let related = set.iter().any(|&a| {
            let (from, to) = match direction {
                Direction::Future => (a, y),
                Direction::Past => (y, a),
            };
            if strict {
                space.tau(from, to) > 0.0
            } else {
                space.leq(from, to)
            }
        });
        if related {
            out.insert(y);
        }
    }
    out.into_iter().collect()
}

/// Result of an achronality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchronalCheck {
    pub ok: bool,
    /// A chronologically related pair inside the set, when one exists.
    pub witness: Option<(usize, usize)>,
}

/// Is every pair in `set` chronologically unrelated?
pub fn check_achronal(space: &FiniteCausalSpace, set: &[usize]) -> AchronalCheck {
    for &i in set {
        for &j in set {
            if i != j && space.tau(i, j) > 0.0 {
                return AchronalCheck { ok: false, witness: Some((i, j)) };
            }
        }
    }
    AchronalCheck { ok: true, witness: None }
}

/// A validated achronal set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchronalSet {
    members: Vec<usize>,
    pub label: Option<String>,
}

impl AchronalSet {
    pub fn new(space: &FiniteCausalSpace, members: Vec<usize>) -> Result<Self, SpaceError> {
        if members.is_empty() {
            return Err(SpaceError::EmptySet);
        }
        for &i in &members {
            space.check_index(i)?;
        }
        let check = check_achronal(space, &members);
        if let Some((i, j)) = check.witness {
            return Err(SpaceError::NotAchronal { i, j, tau: space.tau(i, j) });
        }
        let mut members = members;
        members.sort_unstable();
        members.dedup();
        Ok(AchronalSet { members, label: None })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// Signed time separation from an achronal set: the largest separation from
/// the set on its chronological future, minus the largest separation to the
/// set on its chronological past, and zero elsewhere. The extremum is always
/// attained on a finite space.
pub fn signed_time_separation(space: &FiniteCausalSpace, v: &AchronalSet) -> Vec<f64> {
    let n = space.n();
    let mut out = vec![0.0; n];
    for (x, slot) in out.iter_mut().enumerate() {
        let mut fut: f64 = 0.0;
        let mut past: f64 = 0.0;
        for &a in v.members() {
            fut = fut.max(space.tau(a, x));
            past = past.max(space.tau(x, a));
        }
        *slot = if fut > 0.0 {
            fut
        } else if past > 0.0 {
            -past
        } else {
            0.0
        };
    }
    out
}

/// A probability measure with finite support on a space's points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMeasure {
    support: Vec<usize>,
    mass: Vec<f64>,
}

impl WeightedMeasure {
    /// Builds a measure, validating distinct support, positive masses and
    /// unit total mass (within [`tol::MASS_ABS`]).
    pub fn new(n: usize, support: Vec<usize>, mass: Vec<f64>) -> Result<Self, SpaceError> {
        if support.len() != mass.len() {
            return Err(SpaceError::Shape(format!(
                "support has {} entries but mass has {}",
                support.len(),
                mass.len()
            )));
        }
        if support.is_empty() {
            return Err(SpaceError::EmptySet);
        }
        let mut seen = BTreeSet::new();
        for &i in &support {
            if i >= n {
                return Err(SpaceError::IndexOutOfBounds { index: i, n });
            }
            if !seen.insert(i) {
                return Err(SpaceError::DuplicateSupport { index: i });
            }
        }
        for (k, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m <= 0.0 {
                return Err(SpaceError::NonpositiveMass { position: k, mass: m });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > tol::MASS_ABS {
            return Err(SpaceError::BadTotalMass { sum, slack: tol::MASS_ABS });
        }
        Ok(WeightedMeasure { support, mass })
    }

    /// Point mass at a single index.
    pub fn dirac(n: usize, i: usize) -> Result<Self, SpaceError> {
        Self::new(n, vec![i], vec![1.0])
    }

    /// The reference measure restricted to `indices` and normalized.
    pub fn uniform_on(space: &FiniteCausalSpace, indices: &[usize]) -> Result<Self, SpaceError> {
        if indices.is_empty() {
            return Err(SpaceError::EmptySet);
        }
        for &i in indices {
            space.check_index(i)?;
        }
        let total: f64 = indices.iter().map(|&i| space.weight(i)).sum();
        let mut support: Vec<usize> = indices.to_vec();
        support.sort_unstable();
        support.dedup();
        let mass: Vec<f64> = support.iter().map(|&i| space.weight(i) / total).collect();
        // Compensate the final rounding so the constructor's mass check holds
        // exactly even for tens of thousands of summands.
        let sum: f64 = mass.iter().sum();
        let mass: Vec<f64> = mass.iter().map(|m| m / sum).collect();
        Self::new(space.n(), support, mass)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.mass.iter().copied())
    }

    /// Mass carried by a given point (zero off the support).
    pub fn mass_at(&self, i: usize) -> f64 {
        self.support
            .iter()
            .position(|&s| s == i)
            .map_or(0.0, |k| self.mass[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two points a <= b with tau = 1.
    fn two_point() -> FiniteCausalSpace {
        FiniteCausalSpace::new(
            2,
            vec![0.0, 0.0, 1.0, 0.0],
            vec![1.0, 1.0],
            vec![true, true, false, true],
            vec![0.0, 1.0, 0.0, 0.0],
            Some(vec!["a".into(), "b".into()]),
        )
        .unwrap()
    }

    /// Three-point chain with a deliberately broken reverse triangle.
    fn broken_chain() -> FiniteCausalSpace {
        FiniteCausalSpace::new(
            2,
            vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![
                true, true, true, //
                false, true, true, //
                false, false, true,
            ],
            vec![
                0.0, 1.0, 1.5, //
                0.0, 0.0, 1.0, //
                0.0, 0.0, 0.0,
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_point_space_validates_clean() {
        let s = two_point();
        assert_eq!(validate_axioms(&s, 1e-9), vec![]);
    }

    #[test]
    fn broken_chain_reports_single_reverse_triangle_defect() {
        let s = broken_chain();
        let v = validate_axioms(&s, 1e-9);
        assert_eq!(v.len(), 1);
        match &v[0] {
            AxiomViolation::ReverseTriangle { i: 0, j: 1, k: 2, defect } => {
                assert!((defect - 0.5).abs() < 1e-9, "defect = {defect}");
            }
            other => panic!("unexpected violation {other}"),
        }
    }

    #[test]
    fn validator_reports_rather_than_throws() {
        // Separation without order, broken reflexivity, negative weight.
        let s = FiniteCausalSpace::new(
            1,
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![false, false, false, true],
            vec![0.0, 2.0, 0.0, 0.0],
            None,
        )
        .unwrap();
        let v = validate_axioms(&s, 1e-9);
        assert!(v.contains(&AxiomViolation::NotReflexive { i: 0 }));
        assert!(v
            .iter()
            .any(|x| matches!(x, AxiomViolation::SeparationOffOrder { i: 0, j: 1, .. })));
    }

    #[test]
    fn cones_of_two_point_space() {
        let s = two_point();
        assert_eq!(cone_sets(&s, &[0], Direction::Future, false), vec![0, 1]);
        assert_eq!(cone_sets(&s, &[0], Direction::Future, true), vec![1]);
        assert_eq!(cone_sets(&s, &[1], Direction::Past, false), vec![0, 1]);
        assert_eq!(cone_sets(&s, &[1], Direction::Past, true), vec![0]);
    }

    #[test]
    fn chronological_cone_contained_in_causal_and_monotone() {
        let s = broken_chain();
        for dir in [Direction::Future, Direction::Past] {
            let i_cone = cone_sets(&s, &[0], dir, true);
            let j_cone = cone_sets(&s, &[0], dir, false);
            assert!(i_cone.iter().all(|x| j_cone.contains(x)));
            let bigger = cone_sets(&s, &[0, 1], dir, false);
            assert!(j_cone.iter().all(|x| bigger.contains(x)));
        }
    }

    #[test]
    fn achronality_witnesses() {
        let s = two_point();
        let c = check_achronal(&s, &[0, 1]);
        assert!(!c.ok);
        assert_eq!(c.witness, Some((0, 1)));
        assert!(AchronalSet::new(&s, vec![0, 1]).is_err());
        assert!(AchronalSet::new(&s, vec![0]).is_ok());
    }

    #[test]
    fn signed_separation_signs() {
        let s = broken_chain();
        let v = AchronalSet::new(&s, vec![1]).unwrap();
        let tv = signed_time_separation(&s, &v);
        assert_eq!(tv[1], 0.0);
        assert_eq!(tv[2], 1.0);
        assert_eq!(tv[0], -1.0);
    }

    #[test]
    fn measure_constructor_validates() {
        assert!(WeightedMeasure::new(3, vec![0, 1], vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            WeightedMeasure::new(3, vec![0, 0], vec![0.5, 0.5]),
            Err(SpaceError::DuplicateSupport { .. })
        ));
        assert!(matches!(
            WeightedMeasure::new(3, vec![0, 1], vec![0.5, 0.4]),
            Err(SpaceError::BadTotalMass { .. })
        ));
        assert!(matches!(
            WeightedMeasure::new(2, vec![0, 5], vec![0.5, 0.5]),
            Err(SpaceError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            WeightedMeasure::new(3, vec![0, 1], vec![1.5, -0.5]),
            Err(SpaceError::NonpositiveMass { .. })
        ));
    }

    #[test]
    fn uniform_measure_follows_weights() {
        let s = FiniteCausalSpace::new(
            1,
            vec![0.0, 1.0, 2.0],
            vec![1.0, 3.0, 4.0],
            vec![true; 9],
            vec![0.0; 9],
            None,
        )
        .unwrap();
        let m = WeightedMeasure::uniform_on(&s, &[0, 1]).unwrap();
        assert_eq!(m.support(), &[0, 1]);
        assert!((m.mass_at(0) - 0.25).abs() < 1e-15);
        assert!((m.mass_at(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn nearest_point_scan_breaks_ties_low() {
        let s = two_point();
        // Equidistant between the two points.
        assert_eq!(s.nearest_point(&[0.5, 0.0]), 0);
        assert_eq!(s.nearest_point(&[0.9, 0.0]), 1);
    }

    #[test]
    fn scaling_rescales_all_three_structures() {
        let s = two_point();
        let t = s.scale(2.0, 3.0, 0.5);
        assert_eq!(t.coords(1), &[2.0, 0.0]);
        assert_eq!(t.weight(0), 3.0);
        assert_eq!(t.tau(0, 1), 0.5);
        assert!(t.leq(0, 1));
    }
}
