//! Couplings of measures on a causal space and the transport problem that
//! maximizes `p`-th-power time separation over them.
//!
//! The central quantity for measures `mu`, `nu` and exponent `p` in (0, 1]
//! is the supremum of `(sum tau(x,y)^p pi(x,y))^(1/p)` over couplings `pi`
//! supported on causally ordered pairs. When no such coupling exists the
//! value is minus infinity and [`solve_lp`] returns a deficiency witness: a
//! chunk of the first marginal whose causal future cannot absorb it.
//!
//! Around the solver sit the certification tools: cyclical-monotonicity
//! audits, dual potentials built by chaining exchanges through the coupling
//! support, the primal-dual gap, conditional-independence gluing, and a
//! two-stage exact solve that measures how much mass optimal couplings must
//! place on zero-separation arcs.

use crate::ext::ExtReal;
use crate::flow::FlowNum;
use crate::simplex::{solve_transport, LexCost, SimplexError, TransportProblem};
use crate::space::{FiniteCausalSpace, SpaceError, WeightedMeasure};
use crate::tol;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::HashMap;

/// Support size (both marginals combined) up to which the exact rational
/// backend is used by default.
pub const EXACT_BACKEND_LIMIT: usize = 64;

/// Pricing tolerance scale for the floating-point backend.
const FLOAT_PRICING_EPS: f64 = 1e-11;

/// A cyclical-exchange improvement below this (scaled by the largest cost)
/// is attributed to floating-point noise rather than a genuine violation.
const AUDIT_NOISE_ABS: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("exponent must lie in (0, 1], got {p}")]
    InvalidExponent { p: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("coupling pair ({i}, {j}) repeats")]
    DuplicatePair { i: usize, j: usize },
    #[error("coupling mass at pair ({i}, {j}) is {mass}")]
    NonpositiveMass { i: usize, j: usize, mass: f64 },
    #[error("coupling mass on ({i}, {j}) but the pair is not causally ordered")]
    AcausalPair { i: usize, j: usize },
    #[error("{side} marginal differs from the target at point {index}: {got} vs {expected}")]
    MarginalMismatch { side: &'static str, index: usize, expected: f64, got: f64 },
    #[error(
        "middle marginals disagree at point {index}: {left} (left coupling) vs {right} (right)"
    )]
    MiddleMarginalMismatch { index: usize, left: f64, right: f64 },
    #[error("no causal coupling exists for these marginals")]
    NoCausalCoupling { witness: DeficiencyWitness },
    #[error("solver exceeded its pivot budget ({pivots} pivots)")]
    Stalled { pivots: usize },
    #[error("coupling support admits an improving cyclical exchange (defect {defect})")]
    NotMonotone { cycle: Vec<(usize, usize)>, defect: f64 },
    #[error("no exchange chain from the root reaches point {point}; potential undefined")]
    PotentialUnreachable { point: usize },
    #[error("potential pair carries no value for point {point}")]
    PotentialMissing { point: usize },
    #[error(
        "potentials violate feasibility at ({x}, {y}): psi - phi falls short of the cost by {defect}"
    )]
    PotentialInfeasible { x: usize, y: usize, defect: f64 },
}

/// Which backend carried out a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    /// Exact rational arithmetic (bit-reproducible, small supports).
    Exact,
    /// Floating point (large supports).
    Float,
}

/// A coupling: mass on ordered support pairs (space indices), sorted by
/// pair.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Coupling {
    pairs: Vec<(usize, usize)>,
    mass: Vec<f64>,
}

impl Coupling {
    /// Builds a coupling from (pair, mass) data; pairs are sorted, must be
    /// distinct, and must carry positive finite mass.
    pub fn new(
        mut entries: Vec<((usize, usize), f64)>,
    ) -> Result<Self, TransportError> {
        entries.sort_by_key(|&(pair, _)| pair);
        let mut pairs = Vec::with_capacity(entries.len());
        let mut mass = Vec::with_capacity(entries.len());
        for ((i, j), m) in entries {
            if pairs.last() == Some(&(i, j)) {
                return Err(TransportError::DuplicatePair { i, j });
            }
            if !m.is_finite() || m <= 0.0 {
                return Err(TransportError::NonpositiveMass { i, j, mass: m });
            }
            pairs.push((i, j));
            mass.push(m);
        }
        Ok(Coupling { pairs, mass })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.pairs.iter().copied().zip(self.mass.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass aggregated on first (left) or second (right) coordinates.
    pub fn marginal(&self, side: Side) -> Vec<(usize, f64)> {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for (&(i, j), &m) in self.pairs.iter().zip(&self.mass) {
            let k = match side {
                Side::Left => i,
                Side::Right => j,
            };
            *acc.entry(k).or_insert(0.0) += m;
        }
        let mut out: Vec<(usize, f64)> = acc.into_iter().collect();
        out.sort_unstable_by_key(|&(k, _)| k);
        out
    }

    /// Checks both marginals against target measures within `eps`.
    pub fn matches_marginals(
        &self,
        mu: &WeightedMeasure,
        nu: &WeightedMeasure,
        eps: f64,
    ) -> Result<(), TransportError> {
        for (side, name, target) in
            [(Side::Left, "first", mu), (Side::Right, "second", nu)]
        {
            let got = self.marginal(side);
            let got_map: HashMap<usize, f64> = got.iter().copied().collect();
            for (idx, m) in target.iter() {
                let g = got_map.get(&idx).copied().unwrap_or(0.0);
                if (g - m).abs() > eps {
                    return Err(TransportError::MarginalMismatch {
                        side: name,
                        index: idx,
                        expected: m,
                        got: g,
                    });
                }
            }
            for (idx, g) in got {
                if target.mass_at(idx) == 0.0 && g > eps {
                    return Err(TransportError::MarginalMismatch {
                        side: name,
                        index: idx,
                        expected: 0.0,
                        got: g,
                    });
                }
            }
        }
        Ok(())
    }

    /// Total mass the coupling places on causal pairs of zero separation
    /// (the arcs a strongly dualisable problem must avoid).
    pub fn null_mass(&self, space: &FiniteCausalSpace) -> f64 {
        self.iter()
            .filter(|&((i, j), _)| space.leq(i, j) && space.tau(i, j) == 0.0)
            .map(|(_, m)| m)
            .sum()
    }

    /// Verifies every pair is causally ordered in `space`.
    pub fn check_causal(&self, space: &FiniteCausalSpace) -> Result<(), TransportError> {
        for &(i, j) in &self.pairs {
            if !space.leq(i, j) {
                return Err(TransportError::AcausalPair { i, j });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Dual potentials on the two supports: `psi(y) - phi(x) >= tau(x,y)^p` on
/// every causal support pair, with equality where an optimal coupling puts
/// mass.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PotentialPair {
    /// (space index, value) on the first marginal's support.
    pub phi: Vec<(usize, f64)>,
    /// (space index, value) on the second marginal's support.
    pub psi: Vec<(usize, f64)>,
}

/// A set of first-marginal mass that cannot be routed: its causal future
/// inside the second support is too small.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct DeficiencyWitness {
    /// Space indices from the first support.
    pub mu_subset: Vec<usize>,
    pub mu_mass: f64,
    /// All second-support points causally reachable from the subset.
    pub nu_reachable: Vec<usize>,
    pub nu_mass: f64,
}

#[derive(Debug)]
pub struct TransportSolution {
    pub coupling: Coupling,
    /// The linear objective: sum of tau^p against the coupling.
    pub objective: f64,
    /// The transport value itself, `objective^(1/p)`.
    pub value: f64,
    /// Duals from the solver basis (feasible up to rounding; use
    /// [`build_potentials`] for exact-by-construction feasibility).
    pub duals: PotentialPair,
    pub backend: Backend,
    pub pivots: usize,
}

#[derive(Debug)]
pub enum TransportOutcome {
    Optimal(Box<TransportSolution>),
    Infeasible(DeficiencyWitness),
}

impl TransportOutcome {
    /// The transport value as an extended real (minus infinity when no
    /// causal coupling exists).
    pub fn value(&self) -> ExtReal {
        match self {
            TransportOutcome::Optimal(sol) => ExtReal::Finite(sol.value),
            TransportOutcome::Infeasible(_) => ExtReal::NegInf,
        }
    }

    pub fn solution(&self) -> Option<&TransportSolution> {
        match self {
            TransportOutcome::Optimal(sol) => Some(sol),
            TransportOutcome::Infeasible(_) => None,
        }
    }
}

/// Report from [`causal_feasible`].
#[derive(Debug)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub routed_mass: f64,
    pub witness: Option<DeficiencyWitness>,
}

/// Exact rational masses, normalized to total exactly one (the doubles
/// only sum to one within [`tol::MASS_ABS`]).
fn exact_masses(m: &WeightedMeasure) -> Vec<BigRational> {
    let raw: Vec<BigRational> =
        m.masses().iter().map(|&x| BigRational::from_f64_exact(x)).collect();
    let total: BigRational = raw.iter().fold(Zero::zero(), |a: BigRational, x| a + x);
    raw.into_iter().map(|x| x / &total).collect()
}

fn check_exponent(p: f64) -> Result<(), TransportError> {
    if !(p > 0.0 && p <= 1.0) || !p.is_finite() {
        return Err(TransportError::InvalidExponent { p });
    }
    Ok(())
}

fn check_supports(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
) -> Result<(), TransportError> {
    for &i in mu.support().iter().chain(nu.support()) {
        if i >= space.n() {
            return Err(TransportError::Space(SpaceError::IndexOutOfBounds {
                index: i,
                n: space.n(),
            }));
        }
    }
    Ok(())
}

/// Sorted (support-position) arc list of causally ordered pairs with their
/// cost tau^p.
fn causal_arcs(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    p: f64,
) -> Vec<(usize, usize, f64)> {
    let mut arcs = Vec::new();
    let mut msup: Vec<(usize, usize)> = mu.support().iter().copied().enumerate().collect();
    let mut nsup: Vec<(usize, usize)> = nu.support().iter().copied().enumerate().collect();
    msup.sort_unstable_by_key(|&(_, i)| i);
    nsup.sort_unstable_by_key(|&(_, j)| j);
    for &(kpos, i) in &msup {
        for &(lpos, j) in &nsup {
            if space.leq(i, j) {
                arcs.push((kpos, lpos, space.tau(i, j).powf(p)));
            }
        }
    }
    arcs.sort_unstable_by_key(|&(k, l, _)| (k, l));
    arcs
}

/// Decides whether any causal coupling of `mu` and `nu` exists, by exact
/// max-flow on the allowed arcs.
pub fn causal_feasible(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
) -> Result<FeasibilityReport, TransportError> {
    check_supports(space, mu, nu)?;
    let arcs: Vec<(usize, usize)> = causal_arcs(space, mu, nu, 1.0)
        .into_iter()
        .map(|(k, l, _)| (k, l))
        .collect();
    let sup = exact_masses(mu);
    let dem = exact_masses(nu);
    let routing = crate::flow::route_marginals(&sup, &dem, &arcs);
    let total: BigRational = sup.iter().fold(Zero::zero(), |a, x| a + x);
    let feasible = routing.value >= total;
    let witness = if feasible {
        None
    } else {
        Some(witness_from_cut(space, mu, nu, &routing.cut_sources, &routing.cut_sinks))
    };
    Ok(FeasibilityReport { feasible, routed_mass: routing.value.to_f64(), witness })
}

fn witness_from_cut(
    _space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    cut_sources: &[bool],
    cut_sinks: &[bool],
) -> DeficiencyWitness {
    let mu_subset: Vec<usize> = mu
        .support()
        .iter()
        .enumerate()
        .filter(|&(k, _)| cut_sources[k])
        .map(|(_, &i)| i)
        .collect();
    let mu_mass = mu
        .iter()
        .enumerate()
        .filter(|&(k, _)| cut_sources[k])
        .map(|(_, (_, m))| m)
        .sum();
    let nu_reachable: Vec<usize> = nu
        .support()
        .iter()
        .enumerate()
        .filter(|&(l, _)| cut_sinks[l])
        .map(|(_, &j)| j)
        .collect();
    let nu_mass = nu
        .iter()
        .enumerate()
        .filter(|&(l, _)| cut_sinks[l])
        .map(|(_, (_, m))| m)
        .sum();
    DeficiencyWitness { mu_subset, mu_mass, nu_reachable, nu_mass }
}

/// Maximizes `(sum tau^p dpi)^(1/p)` over causal couplings of `mu` and
/// `nu`. Picks the exact backend on small supports, floating point above
/// [`EXACT_BACKEND_LIMIT`]; couplings with a point mass on either side are
/// solved in closed form (the product coupling is the only one).
pub fn solve_lp(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    p: f64,
) -> Result<TransportOutcome, TransportError> {
    check_exponent(p)?;
    check_supports(space, mu, nu)?;
    if mu.len() == 1 || nu.len() == 1 {
        return dirac_solve(space, mu, nu, p);
    }
    let backend = if mu.len() + nu.len() <= EXACT_BACKEND_LIMIT {
        Backend::Exact
    } else {
        Backend::Float
    };
    solve_lp_forced(space, mu, nu, p, backend)
}

/// Like [`solve_lp`] but with the backend pinned and the closed-form point
/// mass shortcut disabled; intended for cross-checking the backends.
pub fn solve_lp_forced(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    p: f64,
    backend: Backend,
) -> Result<TransportOutcome, TransportError> {
    check_exponent(p)?;
    check_supports(space, mu, nu)?;
    let arcs = causal_arcs(space, mu, nu, p);
    match backend {
        Backend::Exact => {
            let problem = TransportProblem {
                supplies: exact_masses(mu),
                demands: exact_masses(nu),
                arcs: arcs
                    .iter()
                    .map(|&(k, l, c)| (k, l, BigRational::from_f64_exact(c)))
                    .collect(),
            };
            let zero: BigRational = Zero::zero();
            match solve_transport(&problem, &zero) {
                Ok(sol) => {
                    let flows: Vec<f64> = sol.flows.iter().map(FlowNum::to_f64).collect();
                    let u: Vec<f64> = sol.u.iter().map(FlowNum::to_f64).collect();
                    let v: Vec<f64> = sol.v.iter().map(FlowNum::to_f64).collect();
                    assemble(mu, nu, p, &arcs, &flows, &u, &v, backend, sol.pivots)
                        .map(|s| TransportOutcome::Optimal(Box::new(s)))
                }
                Err(SimplexError::Infeasible { cut_sources, cut_sinks, .. }) => {
                    Ok(TransportOutcome::Infeasible(witness_from_cut(
                        space,
                        mu,
                        nu,
                        &cut_sources,
                        &cut_sinks,
                    )))
                }
                Err(SimplexError::Stalled { pivots }) => {
                    Err(TransportError::Stalled { pivots })
                }
            }
        }
        Backend::Float => {
            let cmax = arcs.iter().map(|a| a.2).fold(0.0f64, f64::max);
            let problem = TransportProblem {
                supplies: mu.masses().to_vec(),
                demands: nu.masses().to_vec(),
                arcs: arcs.clone(),
            };
            match solve_transport(&problem, &(FLOAT_PRICING_EPS * (1.0 + cmax))) {
                Ok(sol) => assemble(
                    mu, nu, p, &arcs, &sol.flows, &sol.u, &sol.v, backend, sol.pivots,
                )
                .map(|s| TransportOutcome::Optimal(Box::new(s))),
                Err(SimplexError::Infeasible { cut_sources, cut_sinks, .. }) => {
                    Ok(TransportOutcome::Infeasible(witness_from_cut(
                        space,
                        mu,
                        nu,
                        &cut_sources,
                        &cut_sinks,
                    )))
                }
                Err(SimplexError::Stalled { pivots }) => {
                    Err(TransportError::Stalled { pivots })
                }
            }
        }
    }
}

/// Closed form when either marginal is a point mass: the product coupling
/// is the only causal coupling (if all pairs are ordered).
fn dirac_solve(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    p: f64,
) -> Result<TransportOutcome, TransportError> {
    let (point_side, point, spread) = if nu.len() == 1 {
        (Side::Right, nu.support()[0], mu)
    } else {
        (Side::Left, mu.support()[0], nu)
    };
    let ordered = |x: usize| match point_side {
        Side::Right => space.leq(x, point),
        Side::Left => space.leq(point, x),
    };
    let bad: Vec<usize> = spread.support().iter().copied().filter(|&x| !ordered(x)).collect();
    if !bad.is_empty() {
        let bad_mass: f64 = bad.iter().map(|&x| spread.mass_at(x)).sum();
        let witness = match point_side {
            // Part of mu cannot reach the target point.
            Side::Right => DeficiencyWitness {
                mu_subset: bad.clone(),
                mu_mass: bad_mass,
                nu_reachable: Vec::new(),
                nu_mass: 0.0,
            },
            // The source point cannot reach part of nu: all of mu (the
            // point) can only cover the reachable part of nu.
            Side::Left => DeficiencyWitness {
                mu_subset: vec![point],
                mu_mass: 1.0,
                nu_reachable: spread
                    .support()
                    .iter()
                    .copied()
                    .filter(|&x| ordered(x))
                    .collect(),
                nu_mass: 1.0 - bad_mass,
            },
        };
        return Ok(TransportOutcome::Infeasible(witness));
    }
    let mut entries = Vec::with_capacity(spread.len());
    let mut objective = 0.0f64;
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    for (x, m) in spread.iter() {
        let (i, j) = match point_side {
            Side::Right => (x, point),
            Side::Left => (point, x),
        };
        let cost = space.tau(i, j).powf(p);
        objective += cost * m;
        entries.push(((i, j), m));
        match point_side {
            Side::Right => phi.push((x, -cost)),
            Side::Left => psi.push((x, cost)),
        }
    }
    match point_side {
        Side::Right => psi.push((point, 0.0)),
        Side::Left => phi.push((point, 0.0)),
    }
    let coupling = Coupling::new(entries)?;
    Ok(TransportOutcome::Optimal(Box::new(TransportSolution {
        coupling,
        objective,
        value: objective.powf(1.0 / p),
        duals: PotentialPair { phi, psi },
        backend: Backend::Exact,
        pivots: 0,
    })))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    p: f64,
    arcs: &[(usize, usize, f64)],
    flows: &[f64],
    u: &[f64],
    v: &[f64],
    backend: Backend,
    pivots: usize,
) -> Result<TransportSolution, TransportError> {
    let mut entries = Vec::new();
    let mut objective = 0.0f64;
    for (&(k, l, c), &f) in arcs.iter().zip(flows) {
        if f > 0.0 {
            entries.push(((mu.support()[k], nu.support()[l]), f));
            objective += c * f;
        }
    }
    let coupling = Coupling::new(entries)?;
    let duals = PotentialPair {
        phi: mu.support().iter().copied().zip(u.iter().copied()).collect(),
        psi: nu.support().iter().copied().zip(v.iter().copied()).collect(),
    };
    Ok(TransportSolution {
        coupling,
        objective,
        value: objective.powf(1.0 / p),
        duals,
        backend,
        pivots,
    })
}

/// Which cost the cyclical-exchange audit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostVariant {
    /// `tau^p` on every pair (zero on unordered pairs): the stronger,
    /// everywhere-finite inequality.
    TimeSeparationPower,
    /// `tau^p` on ordered pairs and minus infinity otherwise: exchanges
    /// through unordered pairs are vacuously allowed.
    CausalCost,
}

/// Result of a cyclical-monotonicity audit.
#[derive(Debug)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// Coupling support pairs around the violating cycle, if one exists.
    pub cycle: Option<Vec<(usize, usize)>>,
    /// Positive amount by which the cycle inequality fails.
    pub defect: f64,
    pub pair_count: usize,
    pub variant: CostVariant,
}

/// Checks cyclical monotonicity of the coupling support: around every cycle
/// of support pairs, keeping the pairing must beat shifting the sources one
/// step. Complete detection via negative-cycle search on the exchange
/// graph, so no cycle length bound or sampling is involved.
pub fn audit_cyclical_monotonicity(
    space: &FiniteCausalSpace,
    coupling: &Coupling,
    p: f64,
    variant: CostVariant,
) -> Result<MonotonicityReport, TransportError> {
    check_exponent(p)?;
    let pairs = coupling.pairs();
    let k = pairs.len();
    if variant == CostVariant::CausalCost {
        if let Err(TransportError::AcausalPair { i, j }) = coupling.check_causal(space) {
            // Mass on an unordered pair: the length-one cycle already
            // fails (own cost minus infinity against a finite shift).
            return Ok(MonotonicityReport {
                monotone: false,
                cycle: Some(vec![(i, j)]),
                defect: f64::INFINITY,
                pair_count: k,
                variant,
            });
        }
    }
    let own: Vec<f64> =
        pairs.iter().map(|&(i, j)| space.tau(i, j).powf(p)).collect();
    let cmax = own.iter().fold(0.0f64, |a, &b| a.max(b));
    // Exchange edge a -> b carries own(a) - cost(x_b, y_a); a negative
    // cycle is exactly a violating cyclical exchange.
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let (xb, _) = pairs[b];
            let (_, ya) = pairs[a];
            let cross = match variant {
                CostVariant::TimeSeparationPower => Some(space.tau(xb, ya).powf(p)),
                CostVariant::CausalCost => {
                    space.leq(xb, ya).then(|| space.tau(xb, ya).powf(p))
                }
            };
            if let Some(c) = cross {
                edges.push((a, b, own[a] - c));
            }
        }
    }
    let noise = AUDIT_NOISE_ABS * (1.0 + cmax);
    match negative_cycle(k, &edges, noise) {
        None => Ok(MonotonicityReport {
            monotone: true,
            cycle: None,
            defect: 0.0,
            pair_count: k,
            variant,
        }),
        Some((nodes, total)) => Ok(MonotonicityReport {
            monotone: false,
            cycle: Some(nodes.iter().map(|&a| pairs[a]).collect()),
            defect: -total,
            pair_count: k,
            variant,
        }),
    }
}

/// Bellman-Ford negative-cycle detection from all sources, carried out in
/// exact rational arithmetic on the (exactly converted) double weights, so
/// zero-weight exchange cycles never trigger spurious detections. A cycle
/// counts as violating only when its exact weight lies below `-noise` per
/// edge; the worst such cycle is returned with its weight.
fn negative_cycle(
    k: usize,
    edges: &[(usize, usize, f64)],
    noise: f64,
) -> Option<(Vec<usize>, f64)> {
    if k == 0 {
        return None;
    }
    let exact: Vec<(usize, usize, BigRational)> = edges
        .iter()
        .map(|&(a, b, w)| (a, b, BigRational::from_f64_exact(w)))
        .collect();
    let weight: HashMap<(usize, usize), BigRational> =
        exact.iter().map(|(a, b, w)| ((*a, *b), w.clone())).collect();
    let zero: BigRational = Zero::zero();
    let mut dist: Vec<BigRational> = vec![zero.clone(); k];
    let mut pred: Vec<Option<usize>> = vec![None; k];
    let mut touched: Vec<usize> = Vec::new();
    for round in 0..k {
        let mut improved = false;
        for (a, b, w) in &exact {
            let cand = &dist[*a] + w;
            if cand < dist[*b] {
                dist[*b] = cand;
                pred[*b] = Some(*a);
                improved = true;
                if round + 1 == k {
                    touched.push(*b);
                }
            }
        }
        if !improved {
            return None;
        }
    }
    // Extract the cycle behind each node still improving in the final
    // round and keep the most negative one.
    let extract = |start: usize| -> Option<Vec<usize>> {
        let mut cur = start;
        for _ in 0..k {
            cur = pred[cur]?;
        }
        let mut cycle = vec![cur];
        let mut walk = pred[cur]?;
        while walk != cur {
            cycle.push(walk);
            walk = pred[walk]?;
        }
        // pred points along improving edges b <- a, so reversing the walk
        // lists the cycle in forward edge order.
        cycle.reverse();
        Some(cycle)
    };
    let step_noise = BigRational::from_f64_exact(noise);
    let mut worst: Option<(Vec<usize>, BigRational)> = None;
    for &start in &touched {
        let Some(cycle) = extract(start) else {
            continue;
        };
        let mut total: BigRational = Zero::zero();
        for t in 0..cycle.len() {
            total += &weight[&(cycle[t], cycle[(t + 1) % cycle.len()])];
        }
        let allowance =
            &step_noise * BigRational::from_integer((cycle.len() as i64).into());
        if total < -allowance && worst.as_ref().is_none_or(|(_, w)| total < *w) {
            worst = Some((cycle, total));
        }
    }
    worst.map(|(cycle, total)| (cycle, total.to_f64()))
}

/// Builds dual potentials from the coupling support by chaining exchanges
/// from a root pair: `phi` is the cheapest chain cost into each source
/// point, `psi` the induced conjugate on target points. Fails with the
/// violating cycle if the support is not cyclically monotone, and with the
/// unreachable point if some support point cannot be priced from the root.
pub fn build_potentials(
    space: &FiniteCausalSpace,
    coupling: &Coupling,
    p: f64,
    root: usize,
) -> Result<PotentialPair, TransportError> {
    check_exponent(p)?;
    coupling.check_causal(space)?;
    let pairs = coupling.pairs();
    let k = pairs.len();
    if root >= k {
        return Err(TransportError::Space(SpaceError::IndexOutOfBounds {
            index: root,
            n: k,
        }));
    }
    let own: Vec<f64> =
        pairs.iter().map(|&(i, j)| space.tau(i, j).powf(p)).collect();
    let cmax = own.iter().fold(0.0f64, |a, &b| a.max(b));

    // Single-source relaxation over exchange edges (same weights as the
    // audit), in exact rational arithmetic so only genuinely improving
    // cycles keep relaxing; chains must start at the root pair.
    let mut edges: Vec<(usize, usize, BigRational)> = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let (xb, _) = pairs[b];
            let (_, ya) = pairs[a];
            if space.leq(xb, ya) {
                let w = own[a] - space.tau(xb, ya).powf(p);
                edges.push((a, b, BigRational::from_f64_exact(w)));
            }
        }
    }
    let mut dist: Vec<Option<BigRational>> = vec![None; k];
    let mut pred: Vec<Option<usize>> = vec![None; k];
    dist[root] = Some(Zero::zero());
    let mut cycle_entry = None;
    'rounds: for round in 0..k {
        let mut improved = false;
        for (a, b, w) in &edges {
            let Some(da) = dist[*a].clone() else {
                continue;
            };
            let cand = da + w;
            if dist[*b].as_ref().is_none_or(|db| cand < *db) {
                dist[*b] = Some(cand);
                pred[*b] = Some(*a);
                improved = true;
                if round + 1 == k {
                    cycle_entry = Some(*b);
                    break 'rounds;
                }
            }
        }
        if !improved {
            break;
        }
    }
    if let Some(start) = cycle_entry {
        // A cycle kept improving after all simple paths converged. Recover
        // it and decide whether it is a genuine violation or rounding dust
        // on a zero-weight exchange loop.
        let mut cur = start;
        for _ in 0..k {
            cur = pred[cur].expect("improving chain has predecessors");
        }
        let mut cyc = vec![cur];
        let mut walk = pred[cur].expect("cycle");
        while walk != cur {
            cyc.push(walk);
            walk = pred[walk].expect("cycle");
        }
        cyc.reverse();
        let weight: HashMap<(usize, usize), BigRational> =
            edges.iter().map(|(a, b, w)| ((*a, *b), w.clone())).collect();
        let mut total: BigRational = Zero::zero();
        for t in 0..cyc.len() {
            total += &weight[&(cyc[t], cyc[(t + 1) % cyc.len()])];
        }
        let allowance = BigRational::from_f64_exact(AUDIT_NOISE_ABS * (1.0 + cmax))
            * BigRational::from_integer((cyc.len() as i64).into());
        if total < -allowance {
            return Err(TransportError::NotMonotone {
                cycle: cyc.into_iter().map(|a| pairs[a]).collect(),
                defect: -total.to_f64(),
            });
        }
    }
    let dist: Vec<Option<f64>> =
        dist.into_iter().map(|d| d.map(|x| x.to_f64())).collect();

    // phi(x) = cheapest chain ending with an exchange into x.
    let mut phi = Vec::new();
    let mut mu_points: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
    mu_points.sort_unstable();
    mu_points.dedup();
    for &x in &mu_points {
        let mut best = f64::INFINITY;
        for a in 0..k {
            let Some(da) = dist[a] else {
                continue;
            };
            let (_, ya) = pairs[a];
            if space.leq(x, ya) {
                let cand = da + own[a] - space.tau(x, ya).powf(p);
                if cand < best {
                    best = cand;
                }
            }
        }
        if best.is_infinite() {
            return Err(TransportError::PotentialUnreachable { point: x });
        }
        phi.push((x, best));
    }
    // psi(y) = largest phi(x) + cost(x, y) over causal sources: the
    // smallest value keeping every constraint tight-or-slack, so the pair
    // is feasible by construction.
    let phi_map: HashMap<usize, f64> = phi.iter().copied().collect();
    let mut nu_points: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    nu_points.sort_unstable();
    nu_points.dedup();
    let mut psi = Vec::new();
    for &y in &nu_points {
        let mut best = f64::NEG_INFINITY;
        for (&x, &fx) in &phi_map {
            if space.leq(x, y) {
                best = best.max(fx + space.tau(x, y).powf(p));
            }
        }
        debug_assert!(best.is_finite(), "every target point has a coupled source");
        psi.push((y, best));
    }
    psi.sort_unstable_by_key(|&(j, _)| j);
    Ok(PotentialPair { phi, psi })
}

/// Verifies dual feasibility of `pot` on every causal support pair (with no
/// tolerance: the potentials from [`build_potentials`] satisfy it exactly)
/// and returns the duality gap `sum psi dnu - sum phi dmu - objective`.
pub fn duality_gap(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    pot: &PotentialPair,
    p: f64,
    objective: f64,
) -> Result<f64, TransportError> {
    check_exponent(p)?;
    check_supports(space, mu, nu)?;
    let phi: HashMap<usize, f64> = pot.phi.iter().copied().collect();
    let psi: HashMap<usize, f64> = pot.psi.iter().copied().collect();
    for (x, _) in mu.iter() {
        if !phi.contains_key(&x) {
            return Err(TransportError::PotentialMissing { point: x });
        }
    }
    for (y, _) in nu.iter() {
        if !psi.contains_key(&y) {
            return Err(TransportError::PotentialMissing { point: y });
        }
    }
    for (x, _) in mu.iter() {
        for (y, _) in nu.iter() {
            if space.leq(x, y) {
                let cost = space.tau(x, y).powf(p);
                let slack = psi[&y] - phi[&x] - cost;
                if slack < 0.0 {
                    return Err(TransportError::PotentialInfeasible {
                        x,
                        y,
                        defect: -slack,
                    });
                }
            }
        }
    }
    let dual_value: f64 = nu.iter().map(|(y, m)| psi[&y] * m).sum::<f64>()
        - mu.iter().map(|(x, m)| phi[&x] * m).sum::<f64>();
    Ok(dual_value - objective)
}

/// Conditional-independence composition of two couplings sharing a middle
/// marginal: mass flows `i -> y -> k` proportionally to both conditionals.
/// The shared marginal must agree pointwise within
/// [`tol::GLUE_MARGINAL_ABS`].
pub fn glue(pi12: &Coupling, pi23: &Coupling) -> Result<Coupling, TransportError> {
    let left: HashMap<usize, f64> = pi12.marginal(Side::Right).into_iter().collect();
    let right: HashMap<usize, f64> = pi23.marginal(Side::Left).into_iter().collect();
    let mut mids: Vec<usize> = left.keys().chain(right.keys()).copied().collect();
    mids.sort_unstable();
    mids.dedup();
    for &y in &mids {
        let l = left.get(&y).copied().unwrap_or(0.0);
        let r = right.get(&y).copied().unwrap_or(0.0);
        if (l - r).abs() > tol::GLUE_MARGINAL_ABS {
            return Err(TransportError::MiddleMarginalMismatch { index: y, left: l, right: r });
        }
    }
    let mut by_mid: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    for ((y, k2), m) in pi23.iter() {
        by_mid.entry(y).or_default().push((k2, m));
    }
    let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
    for ((i, y), m12) in pi12.iter() {
        let denom = left[&y];
        if let Some(outs) = by_mid.get(&y) {
            for &(k2, m23) in outs {
                *acc.entry((i, k2)).or_insert(0.0) += m12 * m23 / denom;
            }
        }
    }
    Coupling::new(acc.into_iter().collect())
}

/// Certificate from the exact two-stage solve: among all optimal couplings,
/// the largest possible mass on zero-separation causal arcs. Zero means
/// every optimal coupling lives on strictly chronological pairs (plus
/// nothing), which is the precondition for well-behaved dual potentials.
#[derive(Debug)]
pub struct DualisabilityCertificate {
    pub strong: bool,
    pub objective: f64,
    pub value: f64,
    /// Largest null-arc mass any optimal coupling can carry.
    pub max_null_mass: f64,
    /// True when the support pairs admit no null arcs at all, so the
    /// two-stage solve was unnecessary.
    pub trivially_chronological: bool,
}

/// Runs the exact two-stage solve (value first, then null-arc mass among
/// optima, compared lexicographically).
pub fn strong_dualisability_certificate(
    space: &FiniteCausalSpace,
    mu: &WeightedMeasure,
    nu: &WeightedMeasure,
    p: f64,
) -> Result<DualisabilityCertificate, TransportError> {
    check_exponent(p)?;
    check_supports(space, mu, nu)?;
    if mu.len() == 1 || nu.len() == 1 {
        // The product coupling is the only coupling; read the certificate
        // off it directly.
        return match solve_lp(space, mu, nu, p)? {
            TransportOutcome::Optimal(sol) => {
                let null = sol.coupling.null_mass(space);
                Ok(DualisabilityCertificate {
                    strong: null == 0.0,
                    objective: sol.objective,
                    value: sol.value,
                    max_null_mass: null,
                    trivially_chronological: null == 0.0,
                })
            }
            TransportOutcome::Infeasible(witness) => {
                Err(TransportError::NoCausalCoupling { witness })
            }
        };
    }
    let arcs = causal_arcs(space, mu, nu, p);
    let has_null = arcs.iter().any(|&(k, l, _)| {
        let (i, j) = (mu.support()[k], nu.support()[l]);
        space.tau(i, j) == 0.0
    });
    if !has_null {
        return match solve_lp_forced(space, mu, nu, p, Backend::Exact)? {
            TransportOutcome::Optimal(sol) => Ok(DualisabilityCertificate {
                strong: true,
                objective: sol.objective,
                value: sol.value,
                max_null_mass: 0.0,
                trivially_chronological: true,
            }),
            TransportOutcome::Infeasible(witness) => {
                Err(TransportError::NoCausalCoupling { witness })
            }
        };
    }
    let problem = TransportProblem {
        supplies: exact_masses(mu),
        demands: exact_masses(nu),
        arcs: arcs
            .iter()
            .map(|&(k, l, c)| {
                let (i, j) = (mu.support()[k], nu.support()[l]);
                let null = space.tau(i, j) == 0.0;
                let secondary = if null {
                    BigRational::from_integer(1.into())
                } else {
                    Zero::zero()
                };
                (k, l, LexCost::new(BigRational::from_f64_exact(c), secondary))
            })
            .collect(),
    };
    let zero = LexCost::new(Zero::zero(), Zero::zero());
    match solve_transport(&problem, &zero) {
        Ok(sol) => {
            let objective = sol.objective.primary.to_f64();
            let null_mass = sol.objective.secondary.to_f64();
            Ok(DualisabilityCertificate {
                strong: sol.objective.secondary.is_zero(),
                objective,
                value: objective.powf(1.0 / p),
                max_null_mass: null_mass,
                trivially_chronological: false,
            })
        }
        Err(SimplexError::Infeasible { cut_sources, cut_sinks, .. }) => {
            Err(TransportError::NoCausalCoupling {
                witness: witness_from_cut(space, mu, nu, &cut_sources, &cut_sinks),
            })
        }
        Err(SimplexError::Stalled { pivots }) => Err(TransportError::Stalled { pivots }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::minkowski_cloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn cloud(points: &[[f64; 2]]) -> FiniteCausalSpace {
        let coords: Vec<f64> = points.iter().flatten().copied().collect();
        minkowski_cloud(2, coords, vec![1.0; points.len()]).unwrap()
    }

    /// Two sources at t=0, two targets at t=3, unit spatial offset: the
    /// aligned pairing is strictly better than the crossed one under p=1/2.
    fn four_points() -> FiniteCausalSpace {
        cloud(&[[0.0, 0.0], [0.0, 1.0], [3.0, 0.0], [3.0, 1.0]])
    }

    fn half_half(space: &FiniteCausalSpace, a: usize, b: usize) -> WeightedMeasure {
        WeightedMeasure::new(space.n(), vec![a, b], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn aligned_pairing_is_optimal() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        let out = solve_lp(&space, &mu, &nu, 0.5).unwrap();
        let sol = out.solution().unwrap();
        assert_eq!(sol.backend, Backend::Exact);
        assert_eq!(sol.coupling.pairs(), &[(0, 2), (1, 3)]);
        assert!((sol.objective - 3.0f64.sqrt()).abs() < 1e-12);
        assert!((sol.value - 3.0).abs() < 1e-12);
        assert_eq!(out.value(), ExtReal::Finite(sol.value));
    }

    #[test]
    fn crossed_pairing_scores_the_known_value() {
        let space = four_points();
        // tau(0,3) = tau(1,2) = sqrt(8); the crossed coupling's objective
        // is 8^(1/4), so its transport value is sqrt(8).
        let crossed =
            Coupling::new(vec![((0, 3), 0.5), ((1, 2), 0.5)]).unwrap();
        let objective: f64 = crossed
            .iter()
            .map(|((i, j), m)| space.tau(i, j).powf(0.5) * m)
            .sum();
        assert!((objective - 8.0f64.powf(0.25)).abs() < 1e-12);
        assert!((objective.powf(2.0) - 8.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_reports_deficiency() {
        let space = four_points();
        let mu = WeightedMeasure::dirac(space.n(), 2).unwrap();
        let nu = WeightedMeasure::dirac(space.n(), 0).unwrap();
        let out = solve_lp(&space, &mu, &nu, 0.5).unwrap();
        assert_eq!(out.value(), ExtReal::NegInf);
        match out {
            TransportOutcome::Infeasible(w) => {
                assert_eq!(w.mu_subset, vec![2]);
                assert!(w.nu_reachable.is_empty());
                assert!(w.mu_mass > w.nu_mass);
            }
            _ => panic!("expected infeasibility"),
        }
        let report = causal_feasible(&space, &mu, &nu).unwrap();
        assert!(!report.feasible);
        assert!(report.witness.is_some());
    }

    #[test]
    fn feasibility_is_exact_on_knife_edge_masses() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        let report = causal_feasible(&space, &mu, &nu).unwrap();
        assert!(report.feasible);
        assert!((report.routed_mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn audit_confirms_aligned_and_flags_crossed() {
        let space = four_points();
        let aligned = Coupling::new(vec![((0, 2), 0.5), ((1, 3), 0.5)]).unwrap();
        let crossed = Coupling::new(vec![((0, 3), 0.5), ((1, 2), 0.5)]).unwrap();
        for variant in [CostVariant::TimeSeparationPower, CostVariant::CausalCost] {
            let ok = audit_cyclical_monotonicity(&space, &aligned, 0.5, variant).unwrap();
            assert!(ok.monotone, "aligned must pass {variant:?}");
            let bad = audit_cyclical_monotonicity(&space, &crossed, 0.5, variant).unwrap();
            assert!(!bad.monotone);
            // Known size of the crossed cycle's shortfall:
            // 2 sqrt(3) - 2 * 8^(1/4).
            let expected = 2.0 * 3.0f64.sqrt() - 2.0 * 8.0f64.powf(0.25);
            assert!((bad.defect - expected).abs() < 1e-9, "defect {}", bad.defect);
            assert_eq!(bad.cycle.as_ref().unwrap().len(), 2);
        }
    }

    #[test]
    fn audit_rejects_mass_on_unordered_pairs() {
        let space = four_points();
        let acausal = Coupling::new(vec![((2, 0), 1.0)]).unwrap();
        let report =
            audit_cyclical_monotonicity(&space, &acausal, 0.5, CostVariant::CausalCost)
                .unwrap();
        assert!(!report.monotone);
        assert_eq!(report.cycle, Some(vec![(2, 0)]));
        assert!(report.defect.is_infinite());
    }

    #[test]
    fn potentials_certify_the_aligned_plan() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        let sol = match solve_lp(&space, &mu, &nu, 0.5).unwrap() {
            TransportOutcome::Optimal(s) => s,
            _ => panic!("feasible"),
        };
        let pot = build_potentials(&space, &sol.coupling, 0.5, 0).unwrap();
        let gap = duality_gap(&space, &mu, &nu, &pot, 0.5, sol.objective).unwrap();
        assert!(gap.abs() <= 1e-9, "gap {gap}");
    }

    #[test]
    fn potentials_refuse_a_non_monotone_coupling() {
        let space = four_points();
        let crossed = Coupling::new(vec![((0, 3), 0.5), ((1, 2), 0.5)]).unwrap();
        match build_potentials(&space, &crossed, 0.5, 0) {
            Err(TransportError::NotMonotone { cycle, defect }) => {
                assert_eq!(cycle.len(), 2);
                assert!(defect > 0.1 && defect < 0.101);
            }
            other => panic!("expected monotonicity failure, got {other:?}"),
        }
    }

    #[test]
    fn dirac_shortcut_agrees_with_the_general_solver() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = WeightedMeasure::dirac(space.n(), 3).unwrap();
        let fast = solve_lp(&space, &mu, &nu, 0.5).unwrap();
        let slow = solve_lp_forced(&space, &mu, &nu, 0.5, Backend::Exact).unwrap();
        let (f, s) = (fast.solution().unwrap(), slow.solution().unwrap());
        assert!((f.objective - s.objective).abs() < 1e-12);
        assert_eq!(f.coupling, s.coupling);
        assert_eq!(f.pivots, 0);
        // Closed-form duals still certify a zero gap.
        let gap = duality_gap(&space, &mu, &nu, &f.duals, 0.5, f.objective).unwrap();
        assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn glue_composes_couplings_through_the_middle() {
        let pi12 = Coupling::new(vec![((0, 1), 0.6), ((0, 3), 0.4)]).unwrap();
        let pi23 = Coupling::new(vec![((1, 2), 0.6), ((3, 2), 0.4)]).unwrap();
        let pi13 = glue(&pi12, &pi23).unwrap();
        assert_eq!(pi13.pairs(), &[(0, 2)]);
        assert!((pi13.total_mass() - 1.0).abs() < 1e-12);

        let broken = Coupling::new(vec![((1, 2), 1.0)]).unwrap();
        match glue(&pi12, &broken) {
            Err(TransportError::MiddleMarginalMismatch { index, .. }) => {
                assert!(index == 1 || index == 3);
            }
            other => panic!("expected marginal mismatch, got {other:?}"),
        }
    }

    #[test]
    fn certificate_detects_forced_null_mass() {
        // Second source is null-separated from its only reachable target,
        // so every coupling carries null mass 1/2.
        let space = cloud(&[[0.0, 0.0], [0.0, 2.0], [1.0, 1.0], [1.0, 0.0]]);
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        assert!(space.leq(1, 2) && space.tau(1, 2) == 0.0);
        assert!(!space.leq(1, 3));
        let cert = strong_dualisability_certificate(&space, &mu, &nu, 0.5).unwrap();
        assert!(!cert.strong);
        assert!((cert.max_null_mass - 0.5).abs() < 1e-12);
        assert!(!cert.trivially_chronological);
        assert!((cert.objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn certificate_is_trivial_on_chronological_supports() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        let cert = strong_dualisability_certificate(&space, &mu, &nu, 0.5).unwrap();
        assert!(cert.strong);
        assert!(cert.trivially_chronological);
        assert_eq!(cert.max_null_mass, 0.0);
        assert!((cert.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_certificate_reads_off_the_product() {
        let space = cloud(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0]]);
        let mu = WeightedMeasure::dirac(space.n(), 0).unwrap();
        let nu = half_half(&space, 1, 2);
        let cert = strong_dualisability_certificate(&space, &mu, &nu, 0.5).unwrap();
        assert!(!cert.strong);
        assert!((cert.max_null_mass - 0.5).abs() < 1e-12);
    }

    #[test]
    fn backends_agree_on_seeded_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(0x7A31);
        let mut checked_feasible = 0;
        for _ in 0..25 {
            // Sources in an early time band, targets in a late one: most
            // draws are feasible, spatially extreme ones are not.
            let k = rng.gen_range(2..4);
            let l = rng.gen_range(2..4);
            let n = k + l;
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|i| {
                    let t = if i < k {
                        rng.gen_range(0.0..1.0)
                    } else {
                        rng.gen_range(1.0..2.0)
                    };
                    [t, rng.gen_range(-1.0..1.0)]
                })
                .collect();
            let space = cloud(&pts);
            let msup: Vec<usize> = (0..k).collect();
            let nsup: Vec<usize> = (k..n).collect();
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
            };
            let mm = norm((0..k).map(|_| rng.gen_range(0.2..1.0)).collect());
            let nm = norm((0..l).map(|_| rng.gen_range(0.2..1.0)).collect());
            let mu = WeightedMeasure::new(n, msup, mm).unwrap();
            let nu = WeightedMeasure::new(n, nsup, nm).unwrap();
            let a = solve_lp_forced(&space, &mu, &nu, 0.7, Backend::Exact).unwrap();
            let b = solve_lp_forced(&space, &mu, &nu, 0.7, Backend::Float).unwrap();
            match (a, b) {
                (TransportOutcome::Optimal(sa), TransportOutcome::Optimal(sb)) => {
                    let scale = 1.0 + sa.objective.abs();
                    assert!(
                        (sa.objective - sb.objective).abs()
                            <= tol::BACKEND_AGREE_REL * scale,
                        "exact {} vs float {}",
                        sa.objective,
                        sb.objective
                    );
                    checked_feasible += 1;
                }
                (TransportOutcome::Infeasible(_), TransportOutcome::Infeasible(_)) => {}
                (x, y) => panic!("backends disagree on feasibility: {x:?} vs {y:?}"),
            }
        }
        assert!(checked_feasible >= 5, "too few feasible draws: {checked_feasible}");
    }

    #[test]
    fn restriction_of_an_optimum_stays_optimal() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xBEEF01);
        let mut tested = 0;
        for _ in 0..20 {
            // Sources early, targets late, far enough apart that nearly
            // every pair is causally ordered.
            let n = 10;
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|i| {
                    let t = if i < 3 {
                        rng.gen_range(0.0..0.5)
                    } else {
                        rng.gen_range(2.5..3.0)
                    };
                    [t, rng.gen_range(-1.0..1.0)]
                })
                .collect();
            let space = cloud(&pts);
            let mu = WeightedMeasure::new(n, vec![0, 1, 2], vec![0.25, 0.25, 0.5]).unwrap();
            let nu = WeightedMeasure::new(n, vec![7, 8, 9], vec![0.5, 0.25, 0.25]).unwrap();
            let Ok(TransportOutcome::Optimal(sol)) = solve_lp(&space, &mu, &nu, 0.5)
            else {
                continue;
            };
            if sol.coupling.len() < 2 {
                continue;
            }
            // Keep a strict subset of support pairs and renormalize.
            let keep = sol.coupling.len() / 2;
            let kept: Vec<((usize, usize), f64)> =
                sol.coupling.iter().take(keep).collect();
            let total: f64 = kept.iter().map(|&(_, m)| m).sum();
            let restricted =
                Coupling::new(kept.iter().map(|&(p, m)| (p, m / total)).collect())
                    .unwrap();
            let rmu_raw = restricted.marginal(Side::Left);
            let rnu_raw = restricted.marginal(Side::Right);
            let rmu = WeightedMeasure::new(
                n,
                rmu_raw.iter().map(|&(i, _)| i).collect(),
                rmu_raw.iter().map(|&(_, m)| m).collect(),
            )
            .unwrap();
            let rnu = WeightedMeasure::new(
                n,
                rnu_raw.iter().map(|&(i, _)| i).collect(),
                rnu_raw.iter().map(|&(_, m)| m).collect(),
            )
            .unwrap();
            let restricted_objective: f64 = restricted
                .iter()
                .map(|((i, j), m)| space.tau(i, j).powf(0.5) * m)
                .sum();
            let re = solve_lp(&space, &rmu, &rnu, 0.5).unwrap();
            let re_obj = re.solution().expect("restriction stays feasible").objective;
            assert!(
                (re_obj - restricted_objective).abs() <= 1e-9 * (1.0 + re_obj.abs()),
                "restricted plan no longer optimal: {} vs {}",
                restricted_objective,
                re_obj
            );
            tested += 1;
        }
        assert!(tested >= 8, "too few usable draws: {tested}");
    }

    #[test]
    fn solver_is_deterministic() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        let a = solve_lp(&space, &mu, &nu, 0.5).unwrap();
        let b = solve_lp(&space, &mu, &nu, 0.5).unwrap();
        let (sa, sb) = (a.solution().unwrap(), b.solution().unwrap());
        assert_eq!(sa.coupling, sb.coupling);
        assert_eq!(sa.objective.to_bits(), sb.objective.to_bits());
    }

    #[test]
    fn marginal_validation_catches_drift() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        let good = Coupling::new(vec![((0, 2), 0.5), ((1, 3), 0.5)]).unwrap();
        good.matches_marginals(&mu, &nu, tol::MARGINAL_ABS).unwrap();
        let bad = Coupling::new(vec![((0, 2), 0.6), ((1, 3), 0.4)]).unwrap();
        assert!(matches!(
            bad.matches_marginals(&mu, &nu, tol::MARGINAL_ABS),
            Err(TransportError::MarginalMismatch { .. })
        ));
    }

    #[test]
    fn exponent_domain_is_enforced() {
        let space = four_points();
        let mu = half_half(&space, 0, 1);
        let nu = half_half(&space, 2, 3);
        for p in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(
                solve_lp(&space, &mu, &nu, p),
                Err(TransportError::InvalidExponent { .. })
            ));
        }
    }
}
