//! Weighted digraphs, connectivity predicates, Laplacians and piecewise
//! constant switching signals.
//!
//! Arcs are written `from -> to`: an arc `j -> i` makes `j` an in-neighbor
//! of `i`, and its weight is `a_ij`, the gain node `i` applies to the
//! difference `x_j - x_i`.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph<T> {
    n_nodes: usize,
    weights: BTreeMap<(usize, usize), T>,
    in_adj: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> WeightedDigraph<T> {
    /// Graph on `n_nodes` nodes without arcs.
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidGraph(
                "a graph needs at least one node".into(),
            ));
        }
        Ok(Self {
            n_nodes,
            weights: BTreeMap::new(),
            in_adj: vec![Vec::new(); n_nodes],
        })
    }

    pub fn from_arcs<I>(n_nodes: usize, arcs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut g = Self::new(n_nodes)?;
        for (from, to, w) in arcs {
            g.add_arc(from, to, w)?;
        }
        Ok(g)
    }

    /// Unit-weight graph from `(from, to)` pairs.
    pub fn unit(n_nodes: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        Self::from_arcs(n_nodes, arcs.iter().map(|&(a, b)| (a, b, T::one())))
    }

    /// Unit-weight bidirectional graph from undirected edges.
    pub fn undirected(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_arcs(
            n_nodes,
            edges
                .iter()
                .flat_map(|&(a, b)| [(a, b, T::one()), (b, a, T::one())]),
        )
    }

    pub fn complete(n_nodes: usize) -> Result<Self> {
        let arcs: Vec<_> = (0..n_nodes)
            .flat_map(|i| (0..n_nodes).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        Self::unit(n_nodes, &arcs)
    }

    /// Inserts or overwrites the arc `from -> to`.
    pub fn add_arc(&mut self, from: usize, to: usize, weight: T) -> Result<()> {
        if from >= self.n_nodes || to >= self.n_nodes {
            return Err(Error::InvalidGraph(format!(
                "arc {from} -> {to} references a node outside 0..{}",
                self.n_nodes
            )));
        }
        if from == to {
            return Err(Error::InvalidGraph(format!("self-loop at node {from}")));
        }
        if !(weight > T::zero()) || !weight.is_finite() {
            return Err(Error::InvalidGraph(format!(
                "weights must be positive and finite (arc {from} -> {to} has {weight})"
            )));
        }
        self.weights.insert((from, to), weight);
        let adj = &mut self.in_adj[to];
        match adj.iter_mut().find(|(j, _)| *j == from) {
            Some(entry) => entry.1 = weight,
            None => {
                adj.push((from, weight));
                adj.sort_by_key(|&(j, _)| j);
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_arcs(&self) -> usize {
        self.weights.len()
    }

    /// Arcs as `(from, to, weight)` in lexicographic order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.weights.iter().map(|(&(f, t), &w)| (f, t, w))
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<T> {
        self.weights.get(&(from, to)).copied()
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.weights.contains_key(&(from, to))
    }

    /// In-neighbors of `i` with the weights `a_ij`.
    pub fn in_neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.in_adj[i]
    }

    /// Checks `lower <= a_ij <= upper` for every arc.
    pub fn check_weight_bounds(&self, lower: T, upper: T) -> Result<()> {
        for (f, t, w) in self.arcs() {
            if w < lower || w > upper {
                return Err(Error::InvalidGraph(format!(
                    "weight {w} of arc {f} -> {t} outside [{lower}, {upper}]"
                )));
            }
        }
        Ok(())
    }

    /// `L = D - A` with `d_i = sum_j a_ij`.
    pub fn laplacian(&self) -> Matrix<T> {
        let n = self.n_nodes;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            let mut d = T::zero();
            for &(j, a) in &self.in_adj[i] {
                l[(i, j)] = -a;
                d = d + a;
            }
            l[(i, i)] = d;
        }
        l
    }

    fn reach(&self, root: usize, forward: bool) -> Vec<bool> {
        let mut out_adj = vec![Vec::new(); self.n_nodes];
        for (f, t, _) in self.arcs() {
            if forward {
                out_adj[f].push(t);
            } else {
                out_adj[t].push(f);
            }
        }
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &out_adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Every ordered node pair is joined by a directed path.
    pub fn is_strongly_connected(&self) -> bool {
        self.reach(0, true).iter().all(|&b| b) && self.reach(0, false).iter().all(|&b| b)
    }

    /// Some node reaches every other node along directed paths.
    pub fn has_spanning_tree(&self) -> bool {
        (0..self.n_nodes).any(|r| self.reach(r, true).iter().all(|&b| b))
    }

    /// Arc set is symmetric.
    pub fn is_bidirectional(&self) -> bool {
        self.weights
            .keys()
            .all(|&(f, t)| self.weights.contains_key(&(t, f)))
    }

    /// Arc set is symmetric and `a_ij == a_ji` on every arc.
    pub fn has_symmetric_weights(&self) -> bool {
        self.weights
            .iter()
            .all(|(&(f, t), &w)| self.weights.get(&(t, f)) == Some(&w))
    }

    /// Second-smallest Laplacian eigenvalue of a connected bidirectional graph.
    pub fn lambda2(&self) -> Result<T> {
        if self.n_nodes < 2 {
            return Err(Error::Precondition(
                "lambda2 needs at least two nodes".into(),
            ));
        }
        if !self.is_bidirectional() {
            return Err(Error::Precondition(
                "lambda2 needs a bidirectional graph".into(),
            ));
        }
        if !self.has_symmetric_weights() {
            return Err(Error::Precondition(
                "lambda2 needs symmetric weights".into(),
            ));
        }
        if !self.is_strongly_connected() {
            return Err(Error::Precondition(
                "lambda2 needs a connected graph".into(),
            ));
        }
        let ev = self.laplacian().symmetric_eigenvalues()?;
        Ok(ev[1])
    }

    /// Union of arc sets; arcs of `later` overwrite weights of `self`.
    pub fn union(&self, later: &Self) -> Result<Self> {
        if self.n_nodes != later.n_nodes {
            return Err(Error::InvalidGraph("node sets differ".into()));
        }
        let mut out = self.clone();
        for (f, t, w) in later.arcs() {
            out.add_arc(f, t, w)?;
        }
        Ok(out)
    }
}

/// End of a switching signal's schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon<T> {
    /// Signal defined on `[origin, end)`.
    Until(T),
    /// Schedule repeats forever with this period.
    Periodic(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub start: T,
    pub graph: WeightedDigraph<T>,
}

/// Piecewise-constant graph schedule `sigma(t)` with a dwell-time bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal<T> {
    modes: Vec<Mode<T>>,
    dwell: T,
    horizon: Horizon<T>,
}

impl<T: Scalar> SwitchingSignal<T> {
    pub fn new(modes: Vec<Mode<T>>, dwell: T, horizon: Horizon<T>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::InvalidSignal("no intervals".into()))?;
        if !(dwell > T::zero()) {
            return Err(Error::InvalidSignal("dwell time must be positive".into()));
        }
        let n = first.graph.n_nodes();
        let slack = T::lit(1e-12) * dwell.max(T::one());
        for w in modes.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::InvalidSignal(format!(
                    "interval starts must strictly increase ({} then {})",
                    w[0].start, w[1].start
                )));
            }
            if w[1].start - w[0].start < dwell - slack {
                return Err(Error::InvalidSignal(format!(
                    "switch gap {} at t = {} is below the dwell time {dwell} (A6)",
                    w[1].start - w[0].start,
                    w[1].start
                )));
            }
        }
        if modes.iter().any(|m| m.graph.n_nodes() != n) {
            return Err(Error::InvalidSignal(
                "all graphs must share the node set".into(),
            ));
        }
        let origin = first.start;
        let last = modes[modes.len() - 1].start;
        match horizon {
            Horizon::Until(end) => {
                if !(end > last) {
                    return Err(Error::InvalidSignal(format!(
                        "horizon end {end} must exceed the last switch {last}"
                    )));
                }
            }
            Horizon::Periodic(p) => {
                if !(p > last - origin) {
                    return Err(Error::InvalidSignal(format!(
                        "period {p} must exceed the span of interval starts"
                    )));
                }
                if modes.len() > 1 && origin + p - last < dwell - slack {
                    return Err(Error::InvalidSignal(format!(
                        "wrap-around switch gap {} is below the dwell time {dwell} (A6)",
                        origin + p - last
                    )));
                }
            }
        }
        Ok(Self {
            modes,
            dwell,
            horizon,
        })
    }

    /// A signal that never switches.
    pub fn constant(graph: WeightedDigraph<T>, start: T, end: T) -> Result<Self> {
        let dwell = end - start;
        Self::new(vec![Mode { start, graph }], dwell, Horizon::Until(end))
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn dwell(&self) -> T {
        self.dwell
    }

    pub fn horizon(&self) -> Horizon<T> {
        self.horizon
    }

    pub fn n_nodes(&self) -> usize {
        self.modes[0].graph.n_nodes()
    }

    pub fn origin(&self) -> T {
        self.modes[0].start
    }

    /// Finite end of the schedule, `None` for periodic signals.
    pub fn end(&self) -> Option<T> {
        match self.horizon {
            Horizon::Until(e) => Some(e),
            Horizon::Periodic(_) => None,
        }
    }

    fn check_range(&self, t1: T, t2: T) -> Result<()> {
        let origin = self.origin();
        let end = self.end().unwrap_or(T::infinity());
        if t1 < origin || t2 > end || !(t1 <= t2) {
            return Err(Error::OutOfRange {
                t1: t1.as_f64(),
                t2: t2.as_f64(),
                start: origin.as_f64(),
                end: end.as_f64(),
            });
        }
        Ok(())
    }

    /// Index of the mode active at `t`.
    pub fn mode_index_at(&self, t: T) -> Result<usize> {
        let origin = self.origin();
        let end = self.end().unwrap_or(T::infinity());
        if t < origin || t >= end {
            return Err(Error::OutOfRange {
                t1: t.as_f64(),
                t2: t.as_f64(),
                start: origin.as_f64(),
                end: end.as_f64(),
            });
        }
        let local = match self.horizon {
            Horizon::Until(_) => t,
            Horizon::Periodic(p) => {
                let k = ((t - origin) / p).floor();
                origin + ((t - origin) - k * p).max(T::zero())
            }
        };
        Ok(self
            .modes
            .iter()
            .rposition(|m| m.start <= local)
            .unwrap_or(0))
    }

    pub fn graph_at(&self, t: T) -> Result<&WeightedDigraph<T>> {
        Ok(&self.modes[self.mode_index_at(t)?].graph)
    }

    /// Switching instants strictly inside `(t1, t2)`, ascending.
    pub fn switch_instants(&self, t1: T, t2: T) -> Vec<T> {
        let origin = self.origin();
        match self.horizon {
            Horizon::Until(_) => self
                .modes
                .iter()
                .map(|m| m.start)
                .filter(|&s| s > t1 && s < t2)
                .collect(),
            Horizon::Periodic(p) => {
                let mut out = Vec::new();
                let mut k = ((t1 - origin) / p).floor().max(T::zero());
                loop {
                    let base = origin + k * p;
                    if base >= t2 {
                        break;
                    }
                    for m in &self.modes {
                        let s = base + (m.start - origin);
                        if s > t1 && s < t2 {
                            out.push(s);
                        }
                    }
                    k = k + T::one();
                }
                out
            }
        }
    }

    /// Constant-graph pieces `(start, end, mode index)` covering `[t1, t2)`.
    pub fn segments(&self, t1: T, t2: T) -> Result<Vec<(T, T, usize)>> {
        self.check_range(t1, t2)?;
        let mut bounds = vec![t1];
        bounds.extend(self.switch_instants(t1, t2));
        bounds.push(t2);
        let half = T::lit(0.5);
        bounds
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| Ok((w[0], w[1], self.mode_index_at(w[0] + half * (w[1] - w[0]))?)))
            .collect()
    }

    /// Union graph of every mode active somewhere in `[t1, t2)`. A repeated
    /// arc keeps the weight of its latest activation.
    pub fn joint_graph(&self, t1: T, t2: T) -> Result<WeightedDigraph<T>> {
        if !(t1 < t2) {
            return Err(Error::OutOfRange {
                t1: t1.as_f64(),
                t2: t2.as_f64(),
                start: self.origin().as_f64(),
                end: self.end().unwrap_or(T::infinity()).as_f64(),
            });
        }
        let mut g = WeightedDigraph::new(self.n_nodes())?;
        for (_, _, idx) in self.segments(t1, t2)? {
            g = g.union(&self.modes[idx].graph)?;
        }
        Ok(g)
    }

    /// Window start times at which the union-graph arc set may change, plus
    /// one interior sample between each consecutive pair.
    fn window_starts(&self, window: T) -> Vec<T> {
        let origin = self.origin();
        let tol = T::lit(1e-12) * window.max(T::one());
        let mut crit: Vec<T> = match self.horizon {
            Horizon::Periodic(p) => {
                let wrap = |t: T| {
                    let k = ((t - origin) / p).floor();
                    let r = t - k * p;
                    if r >= origin + p - tol {
                        origin
                    } else {
                        r.max(origin)
                    }
                };
                let mut c = Vec::new();
                for m in &self.modes {
                    c.push(wrap(m.start));
                    c.push(wrap(m.start - window));
                }
                c.push(origin + p);
                c
            }
            Horizon::Until(end) => {
                let last = end - window;
                if last < origin {
                    return Vec::new();
                }
                let mut c = vec![origin, last];
                for m in &self.modes {
                    for s in [m.start, m.start - window] {
                        if s >= origin && s <= last {
                            c.push(s);
                        }
                    }
                }
                c
            }
        };
        crit.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        crit.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let half = T::lit(0.5);
        let mut starts = Vec::with_capacity(2 * crit.len());
        for w in crit.windows(2) {
            starts.push(w[0]);
            starts.push(w[0] + half * (w[1] - w[0]));
        }
        if let Some(&l) = crit.last() {
            if matches!(self.horizon, Horizon::Until(_)) {
                starts.push(l);
            }
        }
        starts
    }

    fn every_window(&self, window: T, pred: impl Fn(&WeightedDigraph<T>) -> bool) -> bool {
        if !(window > T::zero()) {
            return false;
        }
        let starts = self.window_starts(window);
        !starts.is_empty()
            && starts.into_iter().all(|t| {
                self.joint_graph(t, t + window)
                    .map(|g| pred(&g))
                    .unwrap_or(false)
            })
    }

    /// Every union graph over a window `[t, t + window)` is strongly connected.
    pub fn check_ujsc(&self, window: T) -> bool {
        self.every_window(window, WeightedDigraph::is_strongly_connected)
    }

    /// Every union graph over a window `[t, t + window)` has a spanning tree.
    pub fn check_ujqsc(&self, window: T) -> bool {
        self.every_window(window, WeightedDigraph::has_spanning_tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = WeightedDigraph<f64>;

    fn alternating() -> SwitchingSignal<f64> {
        let g1 = G::unit(3, &[(0, 1), (1, 2)]).unwrap();
        let g2 = G::unit(3, &[(2, 0)]).unwrap();
        SwitchingSignal::new(
            vec![
                Mode {
                    start: 0.0,
                    graph: g1,
                },
                Mode {
                    start: 0.5,
                    graph: g2,
                },
            ],
            0.5,
            Horizon::Periodic(1.0),
        )
        .unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let g = G::undirected(2, &[(0, 1)]).unwrap();
        assert_eq!(
            g.laplacian().to_rows(),
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]]
        );
        assert_eq!(G::new(1).unwrap().laplacian().to_rows(), vec![vec![0.0]]);
        let p = G::undirected(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(
            p.laplacian().to_rows(),
            vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ]
        );
    }

    #[test]
    fn connectivity_examples() {
        assert!(G::unit(3, &[(0, 1), (1, 2), (2, 0)])
            .unwrap()
            .is_strongly_connected());
        assert!(!G::unit(3, &[(0, 1), (1, 2)])
            .unwrap()
            .is_strongly_connected());
        assert!(G::unit(3, &[(0, 1), (1, 2)]).unwrap().has_spanning_tree());
        assert!(G::new(1).unwrap().is_strongly_connected());
    }

    #[test]
    fn bidirectional_examples() {
        assert!(G::unit(2, &[(0, 1), (1, 0)]).unwrap().is_bidirectional());
        assert!(!G::unit(2, &[(0, 1)]).unwrap().is_bidirectional());
        assert!(G::new(4).unwrap().is_bidirectional());
    }

    #[test]
    fn rejects_bad_arcs() {
        let mut g = G::new(2).unwrap();
        assert!(g.add_arc(0, 0, 1.0).is_err());
        assert!(g.add_arc(0, 1, 0.0).is_err());
        assert!(g.add_arc(0, 1, -1.0).is_err());
        assert!(g.add_arc(0, 2, 1.0).is_err());
    }

    #[test]
    fn lambda2_examples() {
        let two = G::undirected(2, &[(0, 1)]).unwrap();
        assert!((two.lambda2().unwrap() - 2.0).abs() < 1e-10);
        let path = G::undirected(3, &[(0, 1), (1, 2)]).unwrap();
        assert!((path.lambda2().unwrap() - 1.0).abs() < 1e-10);
        assert!((G::complete(3).unwrap().lambda2().unwrap() - 3.0).abs() < 1e-10);
        assert!(matches!(
            G::unit(3, &[(0, 1), (1, 2), (2, 0)]).unwrap().lambda2(),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            G::undirected(3, &[(0, 1)]).unwrap().lambda2(),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn joint_graph_examples() {
        let sig = alternating();
        let all = sig.joint_graph(0.0, 1.0).unwrap();
        assert_eq!(
            all.arcs().map(|(f, t, _)| (f, t)).collect::<Vec<_>>(),
            vec![(0, 1), (1, 2), (2, 0)]
        );
        assert_eq!(sig.joint_graph(0.0, 0.5).unwrap(), sig.modes()[0].graph);
        assert_eq!(
            sig.joint_graph(0.7 - 1e-9, 0.7).unwrap(),
            sig.modes()[1].graph
        );
    }

    #[test]
    fn joint_graph_keeps_latest_weight() {
        let g1 = G::from_arcs(2, [(0, 1, 1.0)]).unwrap();
        let g2 = G::from_arcs(2, [(0, 1, 2.0)]).unwrap();
        let sig = SwitchingSignal::new(
            vec![
                Mode {
                    start: 0.0,
                    graph: g1,
                },
                Mode {
                    start: 1.0,
                    graph: g2,
                },
            ],
            1.0,
            Horizon::Until(2.0),
        )
        .unwrap();
        assert_eq!(sig.joint_graph(0.0, 2.0).unwrap().weight(0, 1), Some(2.0));
        assert!(matches!(
            sig.joint_graph(0.0, 3.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn ujsc_examples() {
        let sig = alternating();
        assert!(sig.check_ujsc(1.0));
        assert!(!sig.check_ujsc(0.4));
        let c = SwitchingSignal::constant(G::complete(3).unwrap(), 0.0, 10.0).unwrap();
        assert!(c.check_ujsc(0.1));
        assert!(c.check_ujsc(10.0));
    }

    #[test]
    fn dwell_violation_rejected() {
        let g = G::complete(2).unwrap();
        let res = SwitchingSignal::new(
            vec![
                Mode {
                    start: 0.0,
                    graph: g.clone(),
                },
                Mode {
                    start: 0.2,
                    graph: g,
                },
            ],
            0.5,
            Horizon::Until(1.0),
        );
        assert!(matches!(res, Err(Error::InvalidSignal(msg)) if msg.contains("A6")));
    }

    #[test]
    fn periodic_switch_instants() {
        let sig = alternating();
        assert_eq!(sig.switch_instants(0.0, 2.0), vec![0.5, 1.0, 1.5]);
        assert_eq!(sig.mode_index_at(1.7).unwrap(), 1);
        assert_eq!(sig.mode_index_at(2.0).unwrap(), 0);
    }
}
