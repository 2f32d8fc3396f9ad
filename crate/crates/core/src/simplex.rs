//! Transportation simplex on a restricted arc set.
//!
//! Maximizes a linear objective over couplings of two discrete measures when
//! only an explicit list of arcs may carry mass. Forbidden pairs are simply
//! absent from the arc list — there is no penalty-cost encoding, so the
//! solver never trades a large constant against genuine costs.
//!
//! The solver is generic over the flow and cost arithmetic:
//! exact rationals give bit-reproducible optima on small supports and power
//! the lexicographic two-stage solve; doubles handle larger instances.
//! Entering arcs are chosen by first improving index and ties for the
//! leaving arc break toward the lowest arc index (Bland's rule), which
//! rules out cycling under exact arithmetic.

use crate::flow::{route_marginals, FlowNum};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Arithmetic for objective coefficients and dual values.
pub trait CostNum<F>: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    /// Contribution of carrying `f` units across an arc of this cost.
    fn times_flow(&self, f: &F) -> Self;
    /// Whether a reduced cost of this size is worth a pivot. `tol` is a
    /// problem-scaled threshold; exact arithmetic ignores it.
    fn improves(&self, tol: &Self) -> bool;
    /// Cheap float shadow used only to pre-screen pricing candidates; every
    /// accepted candidate is re-checked with `improves`, so lossy values are
    /// safe as long as they are within the screening slack of the truth.
    fn approx(&self) -> f64;
}

impl CostNum<f64> for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn times_flow(&self, f: &f64) -> Self {
        self * f
    }
    fn improves(&self, tol: &Self) -> bool {
        *self > *tol
    }
    fn approx(&self) -> f64 {
        *self
    }
}

impl CostNum<BigRational> for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn times_flow(&self, f: &BigRational) -> Self {
        self * f
    }
    fn improves(&self, _tol: &Self) -> bool {
        Signed::is_positive(self)
    }
    fn approx(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(0.0)
    }
}

/// Two-level objective compared lexicographically: optimize the primary
/// component, then the secondary among primary optima. Used to measure the
/// largest mass any optimal coupling can place on a marked arc family.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct LexCost {
    pub primary: BigRational,
    pub secondary: BigRational,
}

impl LexCost {
    pub fn new(primary: BigRational, secondary: BigRational) -> Self {
        LexCost { primary, secondary }
    }
}

impl CostNum<BigRational> for LexCost {
    fn zero() -> Self {
        LexCost { primary: Zero::zero(), secondary: Zero::zero() }
    }
    fn add(&self, o: &Self) -> Self {
        LexCost { primary: &self.primary + &o.primary, secondary: &self.secondary + &o.secondary }
    }
    fn sub(&self, o: &Self) -> Self {
        LexCost { primary: &self.primary - &o.primary, secondary: &self.secondary - &o.secondary }
    }
    fn times_flow(&self, f: &BigRational) -> Self {
        LexCost { primary: &self.primary * f, secondary: &self.secondary * f }
    }
    fn improves(&self, _tol: &Self) -> bool {
        Signed::is_positive(&self.primary)
            || (self.primary.is_zero() && Signed::is_positive(&self.secondary))
    }
    fn approx(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self.primary).unwrap_or(0.0)
    }
}

/// A maximization instance: route `supplies` onto `demands` using only the
/// listed arcs, maximizing total arc cost times flow.
#[derive(Debug)]
pub struct TransportProblem<F, C> {
    pub supplies: Vec<F>,
    pub demands: Vec<F>,
    /// (source index, sink index, objective coefficient); must be sorted by
    /// (source, sink) and duplicate-free.
    pub arcs: Vec<(usize, usize, C)>,
}

#[derive(Debug)]
pub struct SimplexSolution<F, C> {
    /// Optimal flow per arc, aligned with the problem's arc list.
    pub flows: Vec<F>,
    pub objective: C,
    /// Dual value per source node (per connected component, up to a shared
    /// constant with the sink duals).
    pub u: Vec<C>,
    /// Dual value per sink node.
    pub v: Vec<C>,
    pub pivots: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SimplexError {
    #[error("marginals cannot be routed through the allowed arcs (deficit {deficit})")]
    Infeasible { deficit: f64, cut_sources: Vec<bool>, cut_sinks: Vec<bool> },
    #[error("pivot limit exceeded after {pivots} pivots")]
    Stalled { pivots: usize },
}

struct Basis {
    /// Arc ids forming a spanning forest over sources (0..m) and sinks
    /// (m..m+n).
    in_basis: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<Option<(usize, usize)>>,
    order: Vec<usize>,
    root_of: Vec<usize>,
}

impl Basis {
    fn new(node_count: usize, arc_count: usize) -> Self {
        Basis {
            in_basis: vec![false; arc_count],
            adj: vec![Vec::new(); node_count],
            parent: vec![None; node_count],
            order: Vec::with_capacity(node_count),
            root_of: vec![usize::MAX; node_count],
        }
    }

    fn insert(&mut self, arc: usize, a: usize, b: usize) {
        self.in_basis[arc] = true;
        self.adj[a].push(arc);
        self.adj[b].push(arc);
    }

    fn remove(&mut self, arc: usize, a: usize, b: usize) {
        self.in_basis[arc] = false;
        self.adj[a].retain(|&x| x != arc);
        self.adj[b].retain(|&x| x != arc);
    }

    /// Recompute parents, a topological visit order, and component roots.
    fn refresh<F, C>(&mut self, arcs: &[(usize, usize, C)], m: usize)
    where
        F: FlowNum,
        C: CostNum<F>,
    {
        let n_nodes = self.adj.len();
        self.order.clear();
        let mut seen = vec![false; n_nodes];
        for root in 0..n_nodes {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            self.parent[root] = None;
            self.root_of[root] = root;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                self.order.push(v);
                for &arc in &self.adj[v] {
                    let (src, snk, _) = &arcs[arc];
                    let other = if v == *src { m + snk } else { *src };
                    if !seen[other] {
                        seen[other] = true;
                        self.parent[other] = Some((v, arc));
                        self.root_of[other] = root;
                        stack.push(other);
                    }
                }
            }
        }
    }
}

/// Solve the restricted transportation problem. `tol` scales the pricing
/// threshold for inexact arithmetic (pass zero for exact types).
pub fn solve_transport<F: FlowNum, C: CostNum<F>>(
    problem: &TransportProblem<F, C>,
    tol: &C,
) -> Result<SimplexSolution<F, C>, SimplexError> {
    let m = problem.supplies.len();
    let n = problem.demands.len();
    let n_nodes = m + n;
    let arcs = &problem.arcs;
    debug_assert!(arcs.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));

    // Feasible flow via max-flow; a shortfall yields the deficiency cut.
    let plain: Vec<(usize, usize)> = arcs.iter().map(|a| (a.0, a.1)).collect();
    let routing = route_marginals(&problem.supplies, &problem.demands, &plain);
    let total = problem.supplies.iter().fold(F::zero(), |acc, x| acc.add(x));
    if total.sub(&routing.value).is_positive() {
        return Err(SimplexError::Infeasible {
            deficit: total.sub(&routing.value).to_f64(),
            cut_sources: routing.cut_sources,
            cut_sinks: routing.cut_sinks,
        });
    }
    let mut flows = routing.arc_flow;

    // The support of a max-flow may contain cycles; push flow around each
    // until an arc drains, leaving a forest.
    cancel_support_cycles(&mut flows, arcs, m, n_nodes);

    // Grow the support forest into a spanning forest of the allowed-arc
    // graph with zero-flow arcs (degenerate basis entries).
    let mut basis = Basis::new(n_nodes, arcs.len());
    let mut dsu = Dsu::new(n_nodes);
    for (id, (src, snk, _)) in arcs.iter().enumerate() {
        if flows[id].is_positive() && dsu.union(*src, m + snk) {
            basis.insert(id, *src, m + snk);
        }
    }
    debug_assert!(
        (0..arcs.len()).all(|id| basis.in_basis[id] || !flows[id].is_positive()),
        "support after cancellation must be a forest"
    );
    for (id, (src, snk, _)) in arcs.iter().enumerate() {
        if !basis.in_basis[id] && dsu.union(*src, m + snk) {
            basis.insert(id, *src, m + snk);
        }
    }

    let mut u = vec![C::zero(); m];
    let mut v = vec![C::zero(); n];
    // Float shadows of costs and duals pre-screen the pricing scan so the
    // exact backend does not pay big-rational arithmetic on arcs that are
    // clearly not improving. Every screened candidate is re-verified with
    // exact arithmetic, and an empty or failed screen falls back to a full
    // exact scan, so the shadows affect speed only, never the answer.
    let cf: Vec<f64> = arcs.iter().map(|(_, _, c)| c.approx()).collect();
    let cmax_abs = cf.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let screen_eps = 1e-9 * (1.0 + cmax_abs);
    let mut uf = vec![0.0f64; m];
    let mut vf = vec![0.0f64; n];
    let pivot_limit = 200 * n_nodes + 10_000;
    let mut pivots = 0usize;
    // Most-improving entering arcs converge in few pivots; a long run of
    // degenerate pivots switches to Bland's first-improving rule, whose
    // termination guarantee rules out cycling. A flow-moving pivot resets
    // the rule, so only genuinely stuck stretches pay Bland's slow walk.
    let mut degenerate_run = 0usize;
    loop {
        basis.refresh::<F, C>(arcs, m);
        compute_duals(&basis, arcs, m, &mut u, &mut v);

        let bland = degenerate_run >= n_nodes;
        let mut entering: Option<(usize, C)> = None;
        if bland {
            for (id, (src, snk, cost)) in arcs.iter().enumerate() {
                if basis.in_basis[id] {
                    continue;
                }
                let reduced = cost.sub(&v[*snk].sub(&u[*src]));
                if reduced.improves(tol) {
                    entering = Some((id, reduced));
                    break;
                }
            }
        } else {
            for (x, un) in uf.iter_mut().zip(&u) {
                *x = un.approx();
            }
            for (x, vn) in vf.iter_mut().zip(&v) {
                *x = vn.approx();
            }
            let mut guess: Option<(usize, f64)> = None;
            for (id, (src, snk, _)) in arcs.iter().enumerate() {
                if basis.in_basis[id] {
                    continue;
                }
                let rf = cf[id] - (vf[*snk] - uf[*src]);
                if rf > screen_eps && guess.as_ref().is_none_or(|(_, best)| rf > *best) {
                    guess = Some((id, rf));
                }
            }
            if let Some((id, _)) = guess {
                let (src, snk, cost) = &arcs[id];
                let reduced = cost.sub(&v[*snk].sub(&u[*src]));
                if reduced.improves(tol) {
                    entering = Some((id, reduced));
                }
            }
            if entering.is_none() {
                // Nothing cleared the screen (or its winner failed exact
                // verification): one exact most-improving scan either finds
                // a straggler — e.g. a tie broken only by a lexicographic
                // secondary stage — or certifies optimality.
                for (id, (src, snk, cost)) in arcs.iter().enumerate() {
                    if basis.in_basis[id] {
                        continue;
                    }
                    let reduced = cost.sub(&v[*snk].sub(&u[*src]));
                    if !reduced.improves(tol) {
                        continue;
                    }
                    let better = match &entering {
                        None => true,
                        Some((_, best)) => reduced > *best,
                    };
                    if better {
                        entering = Some((id, reduced));
                    }
                }
            }
        }
        let Some((enter, _)) = entering else {
            break;
        };
        pivots += 1;
        if pivots > pivot_limit {
            return Err(SimplexError::Stalled { pivots });
        }

        let (esrc, esnk, _) = &arcs[enter];
        let cycle = tree_cycle(&basis, arcs, *esrc, m + esnk);
        // Arcs traversed against their source-to-sink orientation lose flow.
        let mut delta: Option<(F, usize)> = None;
        for &(arc, forward) in &cycle {
            if !forward {
                let better = match &delta {
                    None => true,
                    Some((best, best_arc)) => {
                        flows[arc] < *best || (flows[arc] == *best && arc < *best_arc)
                    }
                };
                if better {
                    delta = Some((flows[arc].clone(), arc));
                }
            }
        }
        let (delta, leaving) =
            delta.expect("alternating cycle always contains a reverse arc");
        if delta.is_positive() {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        for &(arc, forward) in &cycle {
            flows[arc] = if forward { flows[arc].add(&delta) } else { flows[arc].sub(&delta) };
        }
        flows[enter] = flows[enter].add(&delta);
        flows[leaving] = F::zero();
        let (ls, lt, _) = &arcs[leaving];
        basis.remove(leaving, *ls, m + lt);
        basis.insert(enter, *esrc, m + esnk);
    }

    let objective = arcs
        .iter()
        .zip(&flows)
        .filter(|(_, f)| f.is_positive())
        .fold(C::zero(), |acc, ((_, _, c), f)| acc.add(&c.times_flow(f)));
    Ok(SimplexSolution { flows, objective, u, v, pivots })
}

/// Repeatedly locate a cycle in the positive-flow support and push flow
/// around it until some arc empties. Marginals are preserved because the
/// push alternates sign around the (even) cycle.
fn cancel_support_cycles<F: FlowNum, C>(
    flows: &mut [F],
    arcs: &[(usize, usize, C)],
    m: usize,
    n_nodes: usize,
) {
    loop {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (id, (src, snk, _)) in arcs.iter().enumerate() {
            if flows[id].is_positive() {
                adj[*src].push(id);
                adj[m + snk].push(id);
            }
        }
        let Some(cycle) = find_support_cycle(&adj, arcs, m) else {
            return;
        };
        // Shrink along whichever direction empties an arc; orientation is
        // arbitrary, so drain the smallest flow among the "backward" arcs.
        let mut best: Option<(F, usize)> = None;
        for &(arc, forward) in &cycle {
            if !forward {
                let candidate = flows[arc].clone();
                if best.as_ref().is_none_or(|(b, _)| candidate < *b) {
                    best = Some((candidate, arc));
                }
            }
        }
        let (delta, _) = best.expect("even cycle has backward arcs");
        for &(arc, forward) in &cycle {
            flows[arc] = if forward { flows[arc].add(&delta) } else { flows[arc].sub(&delta) };
        }
        for &(arc, forward) in &cycle {
            if !forward && !flows[arc].is_positive() {
                flows[arc] = F::zero();
            }
        }
    }
}

/// One cycle in the support graph as (arc id, traversed forward) pairs, or
/// `None` when the support is a forest.
fn find_support_cycle<C>(
    adj: &[Vec<usize>],
    arcs: &[(usize, usize, C)],
    m: usize,
) -> Option<Vec<(usize, bool)>> {
    let n_nodes = adj.len();
    let mut state = vec![0u8; n_nodes]; // 0 unseen, 1 active, 2 done
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_nodes];
    for root in 0..n_nodes {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
            if *idx >= adj[v].len() {
                state[v] = 2;
                stack.pop();
                continue;
            }
            let arc = adj[v][*idx];
            *idx += 1;
            if parent[v].map(|(_, a)| a) == Some(arc) {
                continue;
            }
            let (src, snk, _) = &arcs[arc];
            let other = if v == *src { m + snk } else { *src };
            match state[other] {
                0 => {
                    state[other] = 1;
                    parent[other] = Some((v, arc));
                    stack.push((other, 0));
                }
                1 => {
                    // Found a cycle: walk v back up to `other`.
                    let mut cycle = vec![(arc, v == *src)];
                    let mut cur = v;
                    while cur != other {
                        let (p, pa) = parent[cur].expect("path to ancestor");
                        let (ps, _snk2, _) = &arcs[pa];
                        // Traversal direction is cur -> p; forward means
                        // source-to-sink.
                        cycle.push((pa, cur == *ps));
                        cur = p;
                    }
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}

/// Duals from the basis forest: on every basic arc the sink dual minus the
/// source dual equals the arc cost; each component root is pinned to zero.
fn compute_duals<F: FlowNum, C: CostNum<F>>(
    basis: &Basis,
    arcs: &[(usize, usize, C)],
    m: usize,
    u: &mut [C],
    v: &mut [C],
) {
    for &node in &basis.order {
        let value = match basis.parent[node] {
            None => C::zero(),
            Some((par, arc)) => {
                let (src, snk, cost) = &arcs[arc];
                if node == *src {
                    // parent is the sink side: u = v - c
                    debug_assert_eq!(par, m + snk);
                    v[*snk].sub(cost)
                } else {
                    debug_assert_eq!(par, *src);
                    u[*src].add(cost)
                }
            }
        };
        if node < m {
            u[node] = value;
        } else {
            v[node - m] = value;
        }
    }
}

/// The unique alternating cycle closed by an entering arc from `from_node`
/// to `to_node`: the tree path to_node -> ... -> from_node, as (arc id,
/// forward) pairs where `forward` means the cycle traverses the arc in its
/// source-to-sink direction. The entering arc itself is not included.
fn tree_cycle<C>(
    basis: &Basis,
    arcs: &[(usize, usize, C)],
    from_node: usize,
    to_node: usize,
) -> Vec<(usize, bool)> {
    debug_assert_eq!(basis.root_of[from_node], basis.root_of[to_node]);
    let depth = |mut x: usize| {
        let mut d = 0usize;
        while let Some((p, _)) = basis.parent[x] {
            x = p;
            d += 1;
        }
        d
    };
    let mut a = to_node;
    let mut b = from_node;
    let mut da = depth(a);
    let mut db = depth(b);
    // Cycle direction: entering arc runs from_node -> to_node, then the
    // tree path to_node -> lca -> from_node closes it. Arcs on the upward
    // leg from `a` are traversed a -> parent; on the leg from `b` they are
    // traversed parent -> b, so their orientation flips.
    let mut up_from_to: Vec<(usize, bool)> = Vec::new();
    let mut down_to_from: Vec<(usize, bool)> = Vec::new();
    while da > db {
        let (p, arc) = basis.parent[a].expect("depth positive");
        let (src, _, _) = &arcs[arc];
        up_from_to.push((arc, a == *src));
        a = p;
        da -= 1;
    }
    while db > da {
        let (p, arc) = basis.parent[b].expect("depth positive");
        let (src, _, _) = &arcs[arc];
        down_to_from.push((arc, p == *src));
        b = p;
        db -= 1;
    }
    while a != b {
        let (pa, arc_a) = basis.parent[a].expect("distinct roots impossible");
        let (sa, _, _) = &arcs[arc_a];
        up_from_to.push((arc_a, a == *sa));
        a = pa;
        let (pb, arc_b) = basis.parent[b].expect("distinct roots impossible");
        let (sb, _, _) = &arcs[arc_b];
        down_to_from.push((arc_b, pb == *sb));
        b = pb;
    }
    down_to_from.reverse();
    up_from_to.extend(down_to_from);
    up_from_to
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            false
        } else {
            self.parent[ra] = rb;
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::big;
    use num_bigint::BigInt;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn prefers_the_expensive_arc() {
        // One source, two sinks, both reachable; mass is forced, objective
        // is the weighted cost sum.
        let p = TransportProblem {
            supplies: vec![big(1)],
            demands: vec![q(1, 4), q(3, 4)],
            arcs: vec![(0, 0, q(1, 1)), (0, 1, q(3, 1))],
        };
        let sol = solve_transport(&p, &q(0, 1)).unwrap();
        assert_eq!(sol.objective, q(1, 4) + q(9, 4));
    }

    #[test]
    fn two_by_two_picks_the_better_matching() {
        // Diagonal worth 2+2, anti-diagonal worth 3+0.5: diagonal wins.
        let p = TransportProblem {
            supplies: vec![q(1, 2), q(1, 2)],
            demands: vec![q(1, 2), q(1, 2)],
            arcs: vec![
                (0, 0, q(2, 1)),
                (0, 1, q(3, 1)),
                (1, 0, q(1, 2)),
                (1, 1, q(2, 1)),
            ],
        };
        let sol = solve_transport(&p, &q(0, 1)).unwrap();
        assert_eq!(sol.objective, q(2, 1));
        assert_eq!(sol.flows[0], q(1, 2));
        assert_eq!(sol.flows[3], q(1, 2));
        // Dual feasibility: v_j - u_i >= c on every arc.
        for (i, j, c) in &p.arcs {
            assert!(&sol.v[*j] - &sol.u[*i] >= *c);
        }
    }

    #[test]
    fn respects_missing_arcs() {
        // The lucrative pairing is simply not available.
        let p = TransportProblem {
            supplies: vec![q(1, 2), q(1, 2)],
            demands: vec![q(1, 2), q(1, 2)],
            arcs: vec![(0, 0, q(1, 1)), (1, 0, q(100, 1)), (1, 1, q(1, 1))],
        };
        let sol = solve_transport(&p, &q(0, 1)).unwrap();
        // Source 0 reaches only sink 0, which pins the whole coupling to
        // the diagonal; the cost-100 arc never carries mass.
        assert_eq!(sol.flows, vec![q(1, 2), q(0, 1), q(1, 2)]);
        assert_eq!(sol.objective, q(1, 1));
    }

    #[test]
    fn infeasible_marginals_report_a_cut() {
        let p = TransportProblem {
            supplies: vec![q(3, 4), q(1, 4)],
            demands: vec![q(1, 4), q(3, 4)],
            arcs: vec![(0, 0, q(1, 1)), (1, 1, q(1, 1))],
        };
        let err = solve_transport(&p, &q(0, 1)).unwrap_err();
        match err {
            SimplexError::Infeasible { deficit, cut_sources, .. } => {
                assert!((deficit - 0.5).abs() < 1e-12);
                assert_eq!(cut_sources, vec![true, false]);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn disconnected_components_solve_independently() {
        let p = TransportProblem {
            supplies: vec![q(1, 4), q(3, 4)],
            demands: vec![q(1, 4), q(3, 4)],
            arcs: vec![(0, 0, q(5, 1)), (1, 1, q(7, 1))],
        };
        let sol = solve_transport(&p, &q(0, 1)).unwrap();
        assert_eq!(sol.objective, q(5, 4) + q(21, 4));
    }

    #[test]
    fn lexicographic_stage_finds_hidden_slack() {
        // Both matchings give primary value 1; only the diagonal carries
        // secondary weight. The lex optimum must find secondary 1/2.
        let lex = |c: i64, s: i64| LexCost::new(q(c, 1), q(s, 1));
        let p = TransportProblem {
            supplies: vec![q(1, 2), q(1, 2)],
            demands: vec![q(1, 2), q(1, 2)],
            arcs: vec![
                (0, 0, lex(1, 1)),
                (0, 1, lex(1, 0)),
                (1, 0, lex(1, 0)),
                (1, 1, lex(1, 0)),
            ],
        };
        let sol = solve_transport(&p, &LexCost::zero()).unwrap();
        assert_eq!(sol.objective.primary, q(1, 1));
        assert_eq!(sol.objective.secondary, q(1, 2));
    }

    #[test]
    fn float_backend_agrees_with_exact() {
        let sup = [0.3, 0.45, 0.25];
        let dem = [0.5, 0.2, 0.3];
        let costs = [
            [1.25, 0.5, 2.0],
            [0.75, 3.0, 0.125],
            [2.5, 1.0, 0.25],
        ];
        let mut arcs_f = Vec::new();
        let mut arcs_e = Vec::new();
        for (i, row) in costs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                // Leave one pair out to exercise the restricted arc set.
                if (i, j) == (1, 1) {
                    continue;
                }
                arcs_f.push((i, j, c));
                arcs_e.push((i, j, BigRational::from_float(c).unwrap()));
            }
        }
        let pf = TransportProblem {
            supplies: sup.to_vec(),
            demands: dem.to_vec(),
            arcs: arcs_f,
        };
        let pe = TransportProblem {
            supplies: sup.map(|x| BigRational::from_float(x).unwrap()).to_vec(),
            demands: dem.map(|x| BigRational::from_float(x).unwrap()).to_vec(),
            arcs: arcs_e,
        };
        let sf = solve_transport(&pf, &1e-12).unwrap();
        let se = solve_transport(&pe, &q(0, 1)).unwrap();
        use crate::flow::FlowNum as _;
        assert!((sf.objective - se.objective.to_f64()).abs() < 1e-10);
    }

    #[test]
    fn degenerate_masses_terminate() {
        // Many equal masses force degenerate pivots; Bland's rule must
        // still terminate and reach the optimum.
        let k = 6;
        let unit = q(1, k as i64);
        let mut arcs = Vec::new();
        for i in 0..k {
            for j in 0..k {
                // A cost-5 permutation hides among arcs worth at most 3.
                let c = if j == (i + 2) % k { q(5, 1) } else { q(((i + j) % 3) as i64 + 1, 1) };
                arcs.push((i, j, c));
            }
        }
        let p = TransportProblem {
            supplies: vec![unit.clone(); k],
            demands: vec![unit.clone(); k],
            arcs,
        };
        let sol = solve_transport(&p, &q(0, 1)).unwrap();
        // All mass settles on the permutation: objective 6 * (1/6) * 5.
        assert_eq!(sol.objective, q(5, 1));
    }
}
