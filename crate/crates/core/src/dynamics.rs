//! Node dynamics `ẋ_i = J(n_i, g_i) + w_i(t)` and their deterministic
//! integration.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::graph::{SwitchingSignal, WeightedDigraph};
use crate::linalg;
use crate::objectives::ObjectiveSet;
use crate::scalar::Scalar;

/// A user-supplied control law `J(n, g)`.
///
/// Implementors are responsible for `J(0, ·)` being injective and for
/// continuity; neither is checked.
pub trait NodeLaw<T>: Send + Sync {
    fn apply(&self, n: &[T], g: &[T]) -> Vec<T>;
    fn name(&self) -> &str {
        "custom"
    }
}

#[derive(Clone)]
pub enum ControlLaw<T> {
    /// `u = n - g`
    JStar,
    /// `u = K n - g`
    JK(T),
    Custom(Arc<dyn NodeLaw<T>>),
}

impl<T: fmt::Debug> fmt::Debug for ControlLaw<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlLaw::JStar => write!(f, "JStar"),
            ControlLaw::JK(k) => write!(f, "JK({k:?})"),
            ControlLaw::Custom(l) => write!(f, "Custom({})", l.name()),
        }
    }
}

impl<T: Scalar> ControlLaw<T> {
    /// Coupling gain applied to the neighbor information.
    pub fn gain(&self) -> Option<T> {
        match self {
            ControlLaw::JStar => Some(T::one()),
            ControlLaw::JK(k) => Some(*k),
            ControlLaw::Custom(_) => None,
        }
    }
}

/// `J(n, g)` for the given law.
pub fn control<T: Scalar>(law: &ControlLaw<T>, n: &[T], g: &[T]) -> Vec<T> {
    match law {
        ControlLaw::JStar => linalg::sub(n, g),
        ControlLaw::JK(k) => n.iter().zip(g).map(|(&ni, &gi)| *k * ni - gi).collect(),
        ControlLaw::Custom(l) => l.apply(n, g),
    }
}

/// `n_i = sum_{j in N_i} a_ij (x_j - x_i)` for every node.
pub fn neighbor_info<T: Scalar>(g: &WeightedDigraph<T>, x: &[T]) -> Result<Vec<Vec<T>>> {
    let n = g.n_nodes();
    if !x.len().is_multiple_of(n) {
        return Err(Error::DimensionMismatch {
            expected: n * (x.len() / n + 1),
            found: x.len(),
        });
    }
    let m = x.len() / n;
    Ok((0..n).map(|i| node_info(g, x, m, i)).collect())
}

fn node_info<T: Scalar>(g: &WeightedDigraph<T>, x: &[T], m: usize, i: usize) -> Vec<T> {
    let xi = &x[i * m..(i + 1) * m];
    let mut out = vec![T::zero(); m];
    for &(j, a) in g.in_neighbors(i) {
        let xj = &x[j * m..(j + 1) * m];
        for k in 0..m {
            out[k] = out[k] + a * (xj[k] - xi[k]);
        }
    }
    out
}

/// `F_G(x; K) = sum_i f_i(x_i) + K/2 sum_{{i,j} in E} a_ij |x_j - x_i|²`.
///
/// Requires symmetric weights; each undirected edge is counted once.
pub fn penalized_objective<T: Scalar>(
    obj: &ObjectiveSet<T>,
    g: &WeightedDigraph<T>,
    gain: T,
    x: &[T],
) -> Result<T> {
    if !g.has_symmetric_weights() {
        return Err(Error::Precondition(
            "penalized objective needs symmetric weights".into(),
        ));
    }
    let m = obj.dim();
    let mut pen = T::zero();
    for (f, t, a) in g.arcs().filter(|&(f, t, _)| f < t) {
        let d = linalg::dist(&x[f * m..(f + 1) * m], &x[t * m..(t + 1) * m]);
        pen = pen + a * d * d;
    }
    Ok(obj.separable(x)? + T::lit(0.5) * gain * pen)
}

/// Additive per-node disturbance `w_i(t)`.
#[derive(Clone)]
pub struct Disturbance<T>(Arc<dyn Fn(usize, T) -> Vec<T> + Send + Sync>);

impl<T: Scalar> Disturbance<T> {
    pub fn new(f: impl Fn(usize, T) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    /// `w_i(t) = e^{-t} v_i`
    pub fn exp_decay(v: Vec<Vec<T>>) -> Self {
        Self::new(move |i, t| linalg::scale(&v[i], (-t).exp()))
    }

    pub fn eval(&self, node: usize, t: T) -> Vec<T> {
        (self.0)(node, t)
    }
}

impl<T> fmt::Debug for Disturbance<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Disturbance(..)")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology<T> {
    Fixed(WeightedDigraph<T>),
    Switching(SwitchingSignal<T>),
}

impl<T: Scalar> Topology<T> {
    pub fn n_nodes(&self) -> usize {
        match self {
            Topology::Fixed(g) => g.n_nodes(),
            Topology::Switching(s) => s.n_nodes(),
        }
    }

    /// Constant-graph pieces covering `[t0, tf)`.
    pub fn segments(&self, t0: T, tf: T) -> Result<Vec<(T, T, &WeightedDigraph<T>)>> {
        match self {
            Topology::Fixed(g) => Ok(vec![(t0, tf, g)]),
            Topology::Switching(s) => Ok(s
                .segments(t0, tf)?
                .into_iter()
                .map(|(a, b, idx)| (a, b, &s.modes()[idx].graph))
                .collect()),
        }
    }

    pub fn fixed_graph(&self) -> Option<&WeightedDigraph<T>> {
        match self {
            Topology::Fixed(g) => Some(g),
            Topology::Switching(_) => None,
        }
    }
}

/// The closed-loop system together with its integration settings.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub objectives: ObjectiveSet<T>,
    pub topology: Topology<T>,
    pub law: ControlLaw<T>,
    /// Stacked initial state, node-major.
    pub x0: Vec<T>,
    pub t0: T,
    pub tf: T,
    pub step: T,
    pub disturbance: Option<Disturbance<T>>,
}

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 0.01;

/// States beyond this magnitude abort the integration.
pub const DIVERGENCE_BOUND: f64 = 1e8;

impl<T: Scalar> Scenario<T> {
    pub fn new(
        objectives: ObjectiveSet<T>,
        topology: Topology<T>,
        law: ControlLaw<T>,
        x0: Vec<T>,
        t0: T,
        tf: T,
    ) -> Result<Self> {
        let s = Self {
            objectives,
            topology,
            law,
            x0,
            t0,
            tf,
            step: T::lit(DEFAULT_STEP),
            disturbance: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_step(mut self, h: T) -> Result<Self> {
        self.step = h;
        self.validate()?;
        Ok(self)
    }

    pub fn with_disturbance(mut self, d: Disturbance<T>) -> Self {
        self.disturbance = Some(d);
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.objectives.n_nodes()
    }

    pub fn dim(&self) -> usize {
        self.objectives.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objectives.n_nodes();
        if self.topology.n_nodes() != n {
            return Err(Error::InvalidScenario(format!(
                "topology has {} nodes but there are {n} objectives",
                self.topology.n_nodes()
            )));
        }
        check_dim(n * self.objectives.dim(), self.x0.len())?;
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(Error::InvalidScenario("step must be positive".into()));
        }
        if !(self.tf > self.t0) {
            return Err(Error::InvalidScenario("tf must exceed t0".into()));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScenario("x0 must be finite".into()));
        }
        if let ControlLaw::JK(k) = self.law {
            if !(k >= T::zero()) {
                return Err(Error::InvalidScenario("gain K must be nonnegative".into()));
            }
        }
        if let Topology::Switching(sig) = &self.topology {
            if self.t0 < sig.origin() || sig.end().is_some_and(|e| self.tf > e) {
                return Err(Error::InvalidScenario(
                    "integration interval exceeds the switching horizon".into(),
                ));
            }
        }
        Ok(())
    }

    fn graph_at(&self, t: T) -> Result<&WeightedDigraph<T>> {
        let out_of_range = || Error::OutOfRange {
            t1: t.as_f64(),
            t2: t.as_f64(),
            start: self.t0.as_f64(),
            end: self.tf.as_f64(),
        };
        if t < self.t0 || t > self.tf {
            return Err(out_of_range());
        }
        match &self.topology {
            Topology::Fixed(g) => Ok(g),
            Topology::Switching(sig) if t < self.tf => sig.graph_at(t),
            Topology::Switching(sig) => {
                // right end: the graph active just before tf
                let (_, _, idx) = *sig
                    .segments(self.t0, self.tf)?
                    .last()
                    .ok_or_else(out_of_range)?;
                Ok(&sig.modes()[idx].graph)
            }
        }
    }
}

fn rhs_on<T: Scalar>(
    s: &Scenario<T>,
    g: &WeightedDigraph<T>,
    t: T,
    x: &[T],
    out: &mut [T],
) -> Result<()> {
    let m = s.dim();
    for i in 0..s.n_nodes() {
        let xi = &x[i * m..(i + 1) * m];
        let ni = node_info(g, x, m, i);
        let gi = s.objectives.component(i).grad(xi)?;
        let mut ui = control(&s.law, &ni, &gi);
        if let Some(w) = &s.disturbance {
            linalg::axpy(T::one(), &w.eval(i, t), &mut ui);
        }
        out[i * m..(i + 1) * m].copy_from_slice(&ui);
    }
    Ok(())
}

/// Vector field of the closed loop at `(t, x)`.
pub fn rhs<T: Scalar>(s: &Scenario<T>, t: T, x: &[T]) -> Result<Vec<T>> {
    check_dim(s.n_nodes() * s.dim(), x.len())?;
    let g = s.graph_at(t)?;
    let mut out = vec![T::zero(); x.len()];
    rhs_on(s, g, t, x, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegratorStats {
    pub steps: usize,
    pub segments: usize,
    pub rhs_evals: usize,
}

/// Sampled solution of a [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub n_nodes: usize,
    pub m: usize,
    pub times: Vec<T>,
    /// Stacked states aligned with `times`.
    pub states: Vec<Vec<T>>,
    pub stats: IntegratorStats,
    pub fingerprint: Option<String>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node(&self, k: usize, i: usize) -> &[T] {
        &self.states[k][i * self.m..(i + 1) * self.m]
    }

    pub fn last_state(&self) -> &[T] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn last_time(&self) -> T {
        self.times.last().copied().unwrap_or(T::nan())
    }
}

fn check_state<T: Scalar>(x: &[T], t: T) -> Result<()> {
    let bound = T::lit(DIVERGENCE_BOUND);
    if x.iter().any(|v| !v.is_finite() || v.abs() > bound) {
        return Err(Error::Divergence { t: t.as_f64() });
    }
    Ok(())
}

/// Classic fixed-step RK4, integrated piecewise over constant-graph
/// segments. Each segment's last step is shortened so that every switching
/// instant and `tf` is a sample point.
pub fn integrate<T: Scalar>(s: &Scenario<T>) -> Result<Trajectory<T>> {
    s.validate()?;
    let dim = s.x0.len();
    let segments = s.topology.segments(s.t0, s.tf)?;
    let mut stats = IntegratorStats {
        segments: segments.len(),
        ..Default::default()
    };
    let mut times = vec![s.t0];
    let mut states = vec![s.x0.clone()];
    let mut x = s.x0.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![T::zero(); dim],
        vec![T::zero(); dim],
        vec![T::zero(); dim],
        vec![T::zero(); dim],
    );
    let mut tmp = vec![T::zero(); dim];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);
    for (a, b, g) in segments {
        let span = (b - a) / s.step;
        let n_steps = (span - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
        for k in 0..n_steps {
            let t = a + T::from_count(k) * s.step;
            let t_next = if k + 1 == n_steps {
                b
            } else {
                a + T::from_count(k + 1) * s.step
            };
            let h = t_next - t;
            rhs_on(s, g, t, &x, &mut k1)?;
            for j in 0..dim {
                tmp[j] = x[j] + half * h * k1[j];
            }
            rhs_on(s, g, t + half * h, &tmp, &mut k2)?;
            for j in 0..dim {
                tmp[j] = x[j] + half * h * k2[j];
            }
            rhs_on(s, g, t + half * h, &tmp, &mut k3)?;
            for j in 0..dim {
                tmp[j] = x[j] + h * k3[j];
            }
            rhs_on(s, g, t_next, &tmp, &mut k4)?;
            for j in 0..dim {
                x[j] = x[j] + h * sixth * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
            }
            stats.steps += 1;
            stats.rhs_evals += 4;
            check_state(&x, t_next)?;
            times.push(t_next);
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        n_nodes: s.n_nodes(),
        m: s.dim(),
        times,
        states,
        stats,
        fingerprint: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Horizon, Mode};
    use crate::objectives::ConvexComponent;

    fn two_node(law: ControlLaw<f64>, x0: Vec<f64>) -> Scenario<f64> {
        let obj = ObjectiveSet::new(
            1,
            vec![
                ConvexComponent::isotropic(vec![0.0]),
                ConvexComponent::isotropic(vec![3.0]),
            ],
        )
        .unwrap();
        let g = WeightedDigraph::complete(2).unwrap();
        Scenario::new(obj, Topology::Fixed(g), law, x0, 0.0, 10.0).unwrap()
    }

    #[test]
    fn neighbor_info_examples() {
        let g = WeightedDigraph::<f64>::complete(2).unwrap();
        assert_eq!(
            neighbor_info(&g, &[0.0, 3.0]).unwrap(),
            vec![vec![3.0], vec![-3.0]]
        );
        assert_eq!(
            neighbor_info(&g, &[1.5, 2.0, 1.5, 2.0]).unwrap(),
            vec![vec![0.0, 0.0], vec![0.0, 0.0]]
        );
        let lonely = WeightedDigraph::<f64>::unit(2, &[(0, 1)]).unwrap();
        assert_eq!(neighbor_info(&lonely, &[0.0, 3.0]).unwrap()[0], vec![0.0]);
    }

    #[test]
    fn control_examples() {
        assert_eq!(control(&ControlLaw::JStar, &[3.0], &[0.0]), vec![3.0]);
        assert_eq!(control(&ControlLaw::JK(10.0), &[3.0], &[1.0]), vec![29.0]);
        assert_eq!(
            control(&ControlLaw::JK(7.0), &[0.0, 0.0], &[1.0, -2.0]),
            vec![-1.0, 2.0]
        );
        assert_eq!(control(&ControlLaw::JStar, &[0.0], &[4.0]), vec![-4.0]);
    }

    #[test]
    fn rhs_examples() {
        let s = two_node(ControlLaw::JStar, vec![0.0, 3.0]);
        assert_eq!(rhs(&s, 0.0, &[0.0, 3.0]).unwrap(), vec![3.0, -3.0]);
        assert_eq!(rhs(&s, 1.0, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            rhs(&s, 11.0, &[1.0, 2.0]),
            Err(Error::OutOfRange { .. })
        ));

        let same = ObjectiveSet::new(1, vec![ConvexComponent::isotropic(vec![2.0]); 3]).unwrap();
        let s = Scenario::new(
            same,
            Topology::Fixed(WeightedDigraph::unit(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()),
            ControlLaw::JStar,
            vec![2.0; 3],
            0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(rhs(&s, 0.5, &[2.0, 2.0, 2.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn zero_dynamics_stay_put() {
        let obj = ObjectiveSet::new(2, vec![ConvexComponent::zero(2); 3]).unwrap();
        let x0 = vec![1.0, -2.0, 0.5, 4.0, -3.0, 0.25];
        let s = Scenario::new(
            obj,
            Topology::Fixed(WeightedDigraph::new(3).unwrap()),
            ControlLaw::JStar,
            x0.clone(),
            0.0,
            1.0,
        )
        .unwrap();
        let traj = integrate(&s).unwrap();
        assert!(traj.states.iter().all(|x| *x == x0));
    }

    #[test]
    fn switch_instants_are_samples() {
        let g1 = WeightedDigraph::unit(3, &[(0, 1), (1, 2)]).unwrap();
        let g2 = WeightedDigraph::unit(3, &[(2, 0)]).unwrap();
        let sig = SwitchingSignal::new(
            vec![
                Mode {
                    start: 0.0,
                    graph: g1,
                },
                Mode {
                    start: 0.33,
                    graph: g2,
                },
            ],
            0.33,
            Horizon::Periodic(0.7),
        )
        .unwrap();
        let obj = ObjectiveSet::new(1, vec![ConvexComponent::zero(1); 3]).unwrap();
        let s = Scenario::new(
            obj,
            Topology::Switching(sig.clone()),
            ControlLaw::JStar,
            vec![0.0, 1.0, 2.0],
            0.0,
            3.0,
        )
        .unwrap();
        let traj = integrate(&s).unwrap();
        for sw in sig.switch_instants(0.0, 3.0) {
            assert!(traj.times.contains(&sw), "missing switch {sw}");
        }
        assert_eq!(traj.last_time(), 3.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn divergence_is_reported() {
        struct Explode;
        impl NodeLaw<f64> for Explode {
            fn apply(&self, _n: &[f64], g: &[f64]) -> Vec<f64> {
                g.iter().map(|v| 100.0 * v).collect()
            }
        }
        let s = two_node(ControlLaw::Custom(Arc::new(Explode)), vec![1.0, 1.0]);
        let res = integrate(&s);
        assert!(matches!(res, Err(Error::Divergence { t }) if t > 0.0 && t < 10.0));
    }

    #[test]
    fn invalid_scenarios() {
        let s = two_node(ControlLaw::JStar, vec![0.0, 3.0]);
        assert!(s.clone().with_step(0.0).is_err());
        let mut bad = s.clone();
        bad.x0 = vec![0.0];
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.tf = -1.0;
        assert!(bad.validate().is_err());
    }
}
