//! Bipartite max-flow over exact rational or floating-point arithmetic.
//!
//! Used to decide whether a causal coupling exists (marginals can be routed
//! through the allowed-arc graph) and to produce the feasible flow the
//! transport solver starts from. The cut reachable from the source on
//! termination yields a deficiency witness when routing is impossible.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Arithmetic for flow amounts. Implementations decide what counts as
/// strictly positive (exact zero for rationals, above numeric dust for
/// floats).
pub trait FlowNum: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn is_positive(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn min_with(&self, o: &Self) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact conversion from a finite double (doubles are dyadic rationals).
    fn from_f64_exact(x: f64) -> Self;
}

impl FlowNum for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_positive(&self) -> bool {
        *self > 1e-15
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn min_with(&self, o: &Self) -> Self {
        self.min(*o)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_f64_exact(x: f64) -> Self {
        x
    }
}

impl FlowNum for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn min_with(&self, o: &Self) -> Self {
        if self <= o {
            self.clone()
        } else {
            o.clone()
        }
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).expect("rational fits a double")
    }
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_float(x).expect("finite double")
    }
}

/// Exact rational from an integer.
pub fn big(i: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(i))
}

struct Edge<F> {
    to: usize,
    cap: F,
    rev: usize,
}

/// Residual network with Dinic's algorithm.
struct Dinic<F> {
    graph: Vec<Vec<Edge<F>>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl<F: FlowNum> Dinic<F> {
    fn new(n: usize) -> Self {
        Dinic { graph: (0..n).map(|_| Vec::new()).collect(), level: vec![0; n], iter: vec![0; n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: F) -> (usize, usize) {
        let a = self.graph[from].len();
        let b = self.graph[to].len();
        self.graph[from].push(Edge { to, cap, rev: b });
        self.graph[to].push(Edge { to: from, cap: F::zero(), rev: a });
        (from, a)
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = std::collections::VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap.is_positive() && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, limit: F) -> Option<F> {
        if v == t {
            return Some(limit);
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = {
                let e = &self.graph[v][i];
                (e.to, e.cap.clone())
            };
            if cap.is_positive() && self.level[v] < self.level[to] {
                let pushed = self.dfs(to, t, limit.min_with(&cap));
                if let Some(d) = pushed {
                    let rev = {
                        let e = &mut self.graph[v][i];
                        e.cap = e.cap.sub(&d);
                        e.rev
                    };
                    let back = &mut self.graph[to][rev];
                    back.cap = back.cap.add(&d);
                    return Some(d);
                }
            }
            self.iter[v] += 1;
        }
        None
    }

    fn max_flow(&mut self, s: usize, t: usize) -> F {
        let mut total = F::zero();
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                // Limit each push by the total supply placed on the source
                // side; the per-edge minimum inside `dfs` tightens it.
                let cap_out: F = self.graph[s]
                    .iter()
                    .fold(F::zero(), |acc, e| acc.add(&e.cap));
                if !cap_out.is_positive() {
                    break;
                }
                match self.dfs(s, t, cap_out) {
                    Some(d) if d.is_positive() => total = total.add(&d),
                    _ => break,
                }
            }
        }
        total
    }

    /// Nodes reachable from `s` in the residual network.
    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.graph.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for e in &self.graph[v] {
                if e.cap.is_positive() && !seen[e.to] {
                    seen[e.to] = true;
                    stack.push(e.to);
                }
            }
        }
        seen
    }
}

/// Result of routing `supplies` to `demands` through the allowed arcs.
#[derive(Debug)]
pub struct RoutingResult<F> {
    /// Total routed mass.
    pub value: F,
    /// Flow on each allowed arc, aligned with the input arc list.
    pub arc_flow: Vec<F>,
    /// Sources (first) and sinks (second) on the source side of the final
    /// residual cut; meaningful when `value` falls short of the supply.
    pub cut_sources: Vec<bool>,
    pub cut_sinks: Vec<bool>,
}

/// Maximum flow from `supplies` (sources) to `demands` (sinks) through the
/// given arcs. Arc capacities are unbounded (capped by total supply).
pub fn route_marginals<F: FlowNum>(
    supplies: &[F],
    demands: &[F],
    arcs: &[(usize, usize)],
) -> RoutingResult<F> {
    let m = supplies.len();
    let n = demands.len();
    let s = m + n;
    let t = m + n + 1;
    let mut dinic = Dinic::new(m + n + 2);
    let total = supplies.iter().fold(F::zero(), |acc, x| acc.add(x));
    for (i, sup) in supplies.iter().enumerate() {
        dinic.add_edge(s, i, sup.clone());
    }
    let mut arc_handles = Vec::with_capacity(arcs.len());
    for &(i, j) in arcs {
        debug_assert!(i < m && j < n);
        arc_handles.push(dinic.add_edge(i, m + j, total.clone()));
    }
    for (j, dem) in demands.iter().enumerate() {
        dinic.add_edge(m + j, t, dem.clone());
    }
    let value = dinic.max_flow(s, t);
    let arc_flow = arc_handles
        .iter()
        .map(|&(from, idx)| total.sub(&dinic.graph[from][idx].cap))
        .collect();
    let seen = dinic.reachable(s);
    RoutingResult {
        value,
        arc_flow,
        cut_sources: (0..m).map(|i| seen[i]).collect(),
        cut_sinks: (0..n).map(|j| seen[m + j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_diagonal_exactly() {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let res = route_marginals(
            &[half.clone(), half.clone()],
            &[half.clone(), half.clone()],
            &[(0, 0), (1, 1)],
        );
        assert_eq!(res.value, big(1));
        assert_eq!(res.arc_flow[0], half);
    }

    #[test]
    fn reports_deficient_cut() {
        // Source 0 (mass 3/4) can only reach sink 0 (mass 1/4).
        let q = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
        let res = route_marginals(
            &[q(3, 4), q(1, 4)],
            &[q(1, 4), q(3, 4)],
            &[(0, 0), (1, 1)],
        );
        assert_eq!(res.value, q(1, 2));
        assert!(res.cut_sources[0]);
        assert!(!res.cut_sources[1]);
        assert!(res.cut_sinks[0]);
        assert!(!res.cut_sinks[1]);
    }

    #[test]
    fn float_backend_matches_exact_on_dense_instance() {
        let sup = [0.3, 0.2, 0.5];
        let dem = [0.4, 0.6];
        let arcs = [(0, 0), (0, 1), (1, 1), (2, 0), (2, 1)];
        let f = route_marginals(&sup, &dem, &arcs);
        let e = route_marginals::<BigRational>(
            &sup.map(BigRational::from_f64_exact),
            &dem.map(BigRational::from_f64_exact),
            &arcs,
        );
        assert!((f.value - 1.0).abs() < 1e-12);
        assert_eq!(e.value, big(1));
    }
}
