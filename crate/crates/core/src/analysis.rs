//! Metric extraction and claim checks over trajectories: Lyapunov traces,
//! consensus and optimality metrics, the stationary-set oracle for quadratic
//! objectives, the disagreement bound, sphere-intersection reconstruction
//! and assumption audits.

use crate::dynamics::{Scenario, Topology, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::graph::WeightedDigraph;
use crate::linalg::{self, Matrix};
use crate::objectives::{
    global_min, ConvexSet, GlobalMin, MinMethod, ObjectiveSet, GLOBAL_MIN_TOL,
};
use crate::scalar::Scalar;

/// A scalar metric sampled on a trajectory's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries<T> {
    pub name: String,
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> MetricSeries<T> {
    pub fn new(name: impl Into<String>, times: Vec<T>, values: Vec<T>) -> Self {
        Self {
            name: name.into(),
            times,
            values,
        }
    }

    pub fn last(&self) -> Option<T> {
        self.values.last().copied()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// `V_i(t) = |x_i(t) - z*|²` per node and `V(t) = max_i V_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace<T> {
    pub max: MetricSeries<T>,
    pub nodes: Vec<MetricSeries<T>>,
}

pub fn lyapunov_trace<T: Scalar>(traj: &Trajectory<T>, z_star: &[T]) -> Result<LyapunovTrace<T>> {
    check_dim(traj.m, z_star.len())?;
    let mut nodes: Vec<Vec<T>> = vec![Vec::with_capacity(traj.len()); traj.n_nodes];
    let mut max = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let mut v = T::neg_infinity();
        for (i, series) in nodes.iter_mut().enumerate() {
            let d = linalg::dist(traj.node(k, i), z_star);
            series.push(d * d);
            v = v.max(d * d);
        }
        max.push(v);
    }
    Ok(LyapunovTrace {
        max: MetricSeries::new("V", traj.times.clone(), max),
        nodes: nodes
            .into_iter()
            .enumerate()
            .map(|(i, v)| MetricSeries::new(format!("V_{i}"), traj.times.clone(), v))
            .collect(),
    })
}

/// Allowed positive forward difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slack<T> {
    Absolute(T),
    /// `rel · max(1, V(t))`
    Relative(T),
}

/// Default relative slack for Lyapunov monotonicity checks.
pub const DINI_RELATIVE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCheck<T> {
    pub holds: bool,
    /// Time of the first forward difference above the slack.
    pub first_violation: Option<T>,
    /// Largest forward difference minus its allowed slack (`<= 0` when it holds).
    pub worst_excess: T,
}

/// Forward-difference analogue of `D⁺V ≤ 0`: every
/// `(V(t+h) - V(t)) / h` must stay below the slack.
pub fn dini_nonincreasing<T: Scalar>(
    series: &MetricSeries<T>,
    slack: Slack<T>,
) -> Result<MonotoneCheck<T>> {
    if series.values.is_empty() {
        return Err(Error::Precondition("empty metric series".into()));
    }
    let mut first_violation = None;
    let mut worst = T::neg_infinity();
    for k in 0..series.values.len().saturating_sub(1) {
        let h = series.times[k + 1] - series.times[k];
        let d = (series.values[k + 1] - series.values[k]) / h;
        let allowed = match slack {
            Slack::Absolute(s) => s,
            Slack::Relative(r) => r * series.values[k].max(T::one()),
        };
        let excess = d - allowed;
        worst = worst.max(excess);
        if excess > T::zero() && first_violation.is_none() {
            first_violation = Some(series.times[k]);
        }
    }
    if series.values.len() == 1 {
        worst = T::zero();
    }
    Ok(MonotoneCheck {
        holds: first_violation.is_none(),
        first_violation,
        worst_excess: worst,
    })
}

/// `max_{i,j} |x_i - x_j|` over a stacked state with blocks of size `m`.
pub fn consensus_diameter<T: Scalar>(x: &[T], m: usize) -> T {
    let blocks: Vec<&[T]> = x.chunks(m.max(1)).collect();
    let mut d = T::zero();
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            d = d.max(linalg::dist(blocks[i], blocks[j]));
        }
    }
    d
}

pub fn diameter_series<T: Scalar>(traj: &Trajectory<T>) -> MetricSeries<T> {
    MetricSeries::new(
        "diameter",
        traj.times.clone(),
        traj.states
            .iter()
            .map(|x| consensus_diameter(x, traj.m))
            .collect(),
    )
}

/// Per node, `F(x_i(t)) - F*`.
pub fn optimality_gap<T: Scalar>(
    traj: &Trajectory<T>,
    obj: &ObjectiveSet<T>,
    f_star: T,
) -> Result<Vec<MetricSeries<T>>> {
    check_dim(obj.n_nodes(), traj.n_nodes)?;
    check_dim(obj.dim(), traj.m)?;
    (0..traj.n_nodes)
        .map(|i| {
            let values = (0..traj.len())
                .map(|k| Ok(obj.total(traj.node(k, i))? - f_star))
                .collect::<Result<Vec<_>>>()?;
            Ok(MetricSeries::new(
                format!("gap_{i}"),
                traj.times.clone(),
                values,
            ))
        })
        .collect()
}

/// Per node, `dist(x_i(t), argmin f_i)`.
pub fn node_optimum_residuals<T: Scalar>(
    traj: &Trajectory<T>,
    obj: &ObjectiveSet<T>,
) -> Result<Vec<MetricSeries<T>>> {
    check_dim(obj.n_nodes(), traj.n_nodes)?;
    let sets = obj.argmin_sets()?;
    sets.iter()
        .enumerate()
        .map(|(i, s)| {
            let values = (0..traj.len())
                .map(|k| s.distance(traj.node(k, i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(MetricSeries::new(
                format!("residual_{i}"),
                traj.times.clone(),
                values,
            ))
        })
        .collect()
}

/// Point of the stationary set of the penalized objective for quadratic
/// components, with its distance to the consensus manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPoint<T> {
    pub x: Vec<T>,
    pub gain: T,
    /// `|(K (L ⊗ I) + Q) x - Q c|`
    pub residual: T,
    /// Average block.
    pub p_ave: Vec<T>,
    /// `sqrt(sum_i |p_i - p_ave|²)`
    pub disagreement: T,
}

/// Solves `(K (L ⊗ I_m) + blockdiag(Q_i)) x = blockdiag(Q_i) c` on any
/// digraph. This is the equilibrium of `ẋ_i = K n_i - Q_i (x_i - c_i)`.
pub fn stationary_linear<T: Scalar>(
    obj: &ObjectiveSet<T>,
    g: &WeightedDigraph<T>,
    gain: T,
) -> Result<StationaryPoint<T>> {
    let blocks = obj.quadratic_blocks().ok_or_else(|| {
        Error::Precondition("stationary oracle needs plain quadratic components".into())
    })?;
    check_dim(obj.n_nodes(), g.n_nodes())?;
    if !(gain >= T::zero()) {
        return Err(Error::Precondition("gain must be nonnegative".into()));
    }
    let m = obj.dim();
    let qs: Vec<&Matrix<T>> = blocks.iter().map(|(q, _)| *q).collect();
    let qd = Matrix::block_diag(&qs);
    let a = g.laplacian().kron_identity(m).scaled(gain).add(&qd)?;
    let c: Vec<T> = blocks.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let b = qd.mul_vec(&c);
    let x = a.solve(&b)?;
    let residual = linalg::norm(&linalg::sub(&a.mul_vec(&x), &b));
    let n = obj.n_nodes();
    let mut p_ave = vec![T::zero(); m];
    for xi in x.chunks(m) {
        linalg::axpy(T::one() / T::from_count(n), xi, &mut p_ave);
    }
    let disagreement = x
        .chunks(m)
        .fold(T::zero(), |acc, xi| {
            let d = linalg::dist(xi, &p_ave);
            acc + d * d
        })
        .sqrt();
    Ok(StationaryPoint {
        x,
        gain,
        residual,
        p_ave,
        disagreement,
    })
}

/// [`stationary_linear`] restricted to bidirectional graphs, where the
/// solution minimizes the penalized objective.
pub fn stationary_quadratic<T: Scalar>(
    obj: &ObjectiveSet<T>,
    g: &WeightedDigraph<T>,
    gain: T,
) -> Result<StationaryPoint<T>> {
    if !g.is_bidirectional() {
        return Err(Error::Precondition(
            "stationary oracle needs a bidirectional graph".into(),
        ));
    }
    stationary_linear(obj, g, gain)
}

/// `sup |∇F̃(x)|` over the supplied stationary points.
pub fn estimate_l0<T: Scalar>(obj: &ObjectiveSet<T>, points: &[StationaryPoint<T>]) -> Result<T> {
    points.iter().try_fold(T::zero(), |acc, p| {
        Ok(acc.max(linalg::norm(&obj.separable_grad(&p.x)?)))
    })
}

/// Floating guard added to the disagreement bound.
pub const BOUND_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck<T> {
    pub holds: bool,
    /// `L0 / (K λ2)`
    pub bound: T,
    /// `bound + guard - disagreement`; nonnegative exactly when it holds.
    pub margin: T,
}

/// Checks `|p|_M <= L0 / (K λ2)`.
pub fn check_disagreement_bound<T: Scalar>(
    sp: &StationaryPoint<T>,
    l0: T,
    lambda2: T,
) -> Result<BoundCheck<T>> {
    if !(sp.gain > T::zero()) || !(lambda2 > T::zero()) {
        return Err(Error::Precondition(
            "bound needs K > 0 and lambda2 > 0".into(),
        ));
    }
    let bound = l0 / (sp.gain * lambda2);
    let margin = bound + T::lit(BOUND_GUARD) - sp.disagreement;
    Ok(BoundCheck {
        holds: margin >= T::zero(),
        bound,
        margin,
    })
}

/// Unique `y` with `|y - z_j|² = d_j` for `m + 1` centers in general
/// position. Subtracting the first equation from the others leaves the
/// linear system `<y, z_j - z_1> = ½ (d_1 - d_j + |z_j|² - |z_1|²)`.
pub fn sphere_intersection<T: Scalar>(centers: &[Vec<T>], sq_dists: &[T]) -> Result<Vec<T>> {
    let first = centers
        .first()
        .ok_or_else(|| Error::Precondition("no centers".into()))?;
    let m = first.len();
    check_dim(m + 1, centers.len())?;
    check_dim(m + 1, sq_dists.len())?;
    if sq_dists.iter().any(|&d| !(d >= T::zero())) {
        return Err(Error::Precondition(
            "squared distances must be nonnegative".into(),
        ));
    }
    let z1 = first;
    let n1 = linalg::dot(z1, z1);
    let half = T::lit(0.5);
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (zj, &dj) in centers[1..].iter().zip(&sq_dists[1..]) {
        check_dim(m, zj.len())?;
        rows.push(linalg::sub(zj, z1));
        rhs.push(half * (sq_dists[0] - dj + linalg::dot(zj, zj) - n1));
    }
    let a = Matrix::from_rows(&rows)?;
    let rank = if m == 0 { 0 } else { a.rank() };
    if rank < m {
        return Err(Error::Precondition(format!(
            "centers are not in general position (rank {rank} < {m})"
        )));
    }
    let y = a.solve(&rhs)?;
    let d1 = linalg::dist(&y, z1);
    let tol = T::lit(1e-9) * sq_dists[0].max(T::one());
    if (d1 * d1 - sq_dists[0]).abs() > tol {
        return Err(Error::NoSolution(format!(
            "sphere system inconsistent: |y - z1|² = {} but d1 = {}",
            d1 * d1,
            sq_dists[0]
        )));
    }
    Ok(y)
}

/// `m + 1` affinely independent points `z, z + δ e_1, ..., z + δ e_m`
/// strictly inside every set. Fails when `z` is not an interior point.
pub fn interior_witnesses<T: Scalar>(sets: &[ConvexSet<T>], z: &[T]) -> Result<Vec<Vec<T>>> {
    let m = z.len();
    for s in sets {
        if !s.contains_with_margin(z, T::zero())? {
            return Err(Error::Precondition(
                "witness is not an interior point".into(),
            ));
        }
    }
    let mut delta = T::lit(0.25);
    for _ in 0..60 {
        let pts: Vec<Vec<T>> = std::iter::once(z.to_vec())
            .chain((0..m).map(|k| {
                let mut p = z.to_vec();
                p[k] = p[k] + delta;
                p
            }))
            .collect();
        let inside = pts.iter().all(|p| {
            sets.iter()
                .all(|s| s.contains_with_margin(p, T::zero()).unwrap_or(false))
        });
        if inside {
            return Ok(pts);
        }
        delta = delta * T::lit(0.5);
    }
    Err(Error::Precondition("no interior witnesses found".into()))
}

/// Reconstructs a point from its squared distances to the witnesses.
pub fn reconstruct_from_witnesses<T: Scalar>(x: &[T], witnesses: &[Vec<T>]) -> Result<Vec<T>> {
    let d: Vec<T> = witnesses
        .iter()
        .map(|z| {
            let r = linalg::dist(x, z);
            r * r
        })
        .collect();
    sphere_intersection(witnesses, &d)
}

/// Whether the trajectory settled before the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergence<T> {
    /// Diameter and max gradient norm stayed below tolerance for the whole
    /// window starting at this time.
    Converged {
        at: T,
    },
    HorizonReached,
}

pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const CONVERGENCE_WINDOW: usize = 100;

pub fn detect_convergence<T: Scalar>(
    traj: &Trajectory<T>,
    obj: &ObjectiveSet<T>,
    tol: T,
    window: usize,
) -> Result<Convergence<T>> {
    let mut run = 0usize;
    for k in 0..traj.len() {
        let x = &traj.states[k];
        let g = obj.separable_grad(x)?;
        let gmax = g.chunks(traj.m).map(linalg::norm).fold(T::zero(), T::max);
        if consensus_diameter(x, traj.m) <= tol && gmax <= tol {
            run += 1;
            if run >= window {
                return Ok(Convergence::Converged {
                    at: traj.times[k + 1 - window],
                });
            }
        } else {
            run = 0;
        }
    }
    Ok(Convergence::HorizonReached)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint<T> {
    pub gain: T,
    /// `max_i |x_K,i|`, when the stationary solve succeeded.
    pub max_block_norm: Option<T>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport<T> {
    pub coercive: bool,
    /// One-dimensional state with bounded component argmins.
    pub bounded_scalar_argmins: bool,
    /// Bounded, nonempty `argmin F`; `None` when unverifiable.
    pub a4: Option<bool>,
    /// `argmin F ≠ ∅`
    pub minimizer_exists: Option<bool>,
    pub global_min: Option<GlobalMin<T>>,
    pub grid: Vec<GridPoint<T>>,
    /// Stationary sets bounded across the gain grid; `None` if not computed.
    pub grid_bounded: Option<bool>,
    pub notes: Vec<String>,
}

/// Audits the standing assumptions of a scenario.
pub fn audit_assumptions<T: Scalar>(s: &Scenario<T>, k_grid: &[T]) -> Result<AuditReport<T>> {
    let obj = &s.objectives;
    let mut notes = Vec::new();
    let coercive = obj.components().iter().all(|c| c.is_coercive());
    if !coercive {
        notes.push("separable objective is not coercive".to_string());
    }
    let bounded_scalar_argmins = obj.dim() == 1
        && obj
            .argmin_sets()
            .map(|sets| sets.iter().all(ConvexSet::is_bounded))
            .unwrap_or(false);
    let a4 = if coercive || bounded_scalar_argmins {
        Some(true)
    } else {
        notes.push("bounded argmin of F unverifiable".to_string());
        None
    };
    let gm = global_min(obj)?;
    let minimizer_exists = match gm.method {
        MinMethod::ClosedForm | MinMethod::Intersection => Some(true),
        MinMethod::Numerical { grad_norm } if grad_norm <= T::lit(GLOBAL_MIN_TOL) => Some(true),
        MinMethod::Numerical { .. } => {
            notes.push("numerical minimization did not reach tolerance".to_string());
            None
        }
    };
    let mut grid = Vec::new();
    let mut grid_bounded = None;
    match (&s.topology, obj.quadratic_blocks()) {
        (Topology::Fixed(g), Some(_)) if g.is_bidirectional() => {
            for &k in k_grid {
                grid.push(match stationary_quadratic(obj, g, k) {
                    Ok(sp) => GridPoint {
                        gain: k,
                        max_block_norm: Some(
                            sp.x.chunks(obj.dim())
                                .map(linalg::norm)
                                .fold(T::zero(), T::max),
                        ),
                        error: None,
                    },
                    Err(e) => GridPoint {
                        gain: k,
                        max_block_norm: None,
                        error: Some(e.to_string()),
                    },
                });
            }
            grid_bounded = Some(grid_is_bounded(&grid));
        }
        _ => notes.push(
            "stationary grid needs a fixed bidirectional graph and quadratic objectives"
                .to_string(),
        ),
    }
    Ok(AuditReport {
        coercive,
        bounded_scalar_argmins,
        a4,
        minimizer_exists,
        global_min: Some(gm),
        grid,
        grid_bounded,
        notes,
    })
}

/// Finite everywhere and not growing at a non-decreasing rate along the
/// (gain-sorted) grid.
fn grid_is_bounded<T: Scalar>(grid: &[GridPoint<T>]) -> bool {
    let mut pts: Vec<(T, T)> = Vec::new();
    for p in grid {
        match p.max_block_norm {
            Some(v) if v.is_finite() => pts.push((p.gain, v)),
            _ => return false,
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    if pts.len() < 3 {
        return true;
    }
    let incs: Vec<T> = pts.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let increasing = incs.iter().all(|&d| d > T::zero());
    let n = incs.len();
    let accelerating = incs[n - 1] >= incs[n - 2];
    !(increasing && accelerating)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlLaw, IntegratorStats};
    use crate::objectives::ConvexComponent;

    fn traj(states: Vec<Vec<f64>>, m: usize) -> Trajectory<f64> {
        let n = states[0].len() / m;
        Trajectory {
            n_nodes: n,
            m,
            times: (0..states.len()).map(|k| k as f64 * 0.1).collect(),
            states,
            stats: IntegratorStats::default(),
            fingerprint: None,
        }
    }

    fn two_quadratics() -> ObjectiveSet<f64> {
        ObjectiveSet::new(
            1,
            vec![
                ConvexComponent::isotropic(vec![0.0]),
                ConvexComponent::isotropic(vec![3.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn lyapunov_examples() {
        let lt = lyapunov_trace(&traj(vec![vec![1.0, 2.0]], 1), &[1.5]).unwrap();
        assert_eq!(lt.nodes[0].values, vec![0.25]);
        assert_eq!(lt.nodes[1].values, vec![0.25]);
        assert_eq!(lt.max.values, vec![0.25]);
        let at = lyapunov_trace(&traj(vec![vec![1.5, 1.5]], 1), &[1.5]).unwrap();
        assert_eq!(at.max.values, vec![0.0]);
        let one = lyapunov_trace(&traj(vec![vec![2.0, 0.0]], 2), &[0.0, 0.0]).unwrap();
        assert_eq!(one.max.values, vec![4.0]);
    }

    #[test]
    fn dini_examples() {
        let flat = MetricSeries::new("c", vec![0.0, 1.0, 2.0], vec![1.0; 3]);
        assert!(
            dini_nonincreasing(&flat, Slack::Absolute(0.0))
                .unwrap()
                .holds
        );
        let up = MetricSeries::new("u", vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]);
        let c = dini_nonincreasing(&up, Slack::Relative(1e-6)).unwrap();
        assert!(!c.holds);
        assert_eq!(c.first_violation, Some(0.0));
        let empty = MetricSeries::<f64>::new("e", vec![], vec![]);
        assert!(dini_nonincreasing(&empty, Slack::Absolute(0.0)).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(consensus_diameter(&[1.0, 2.0], 1), 1.0);
        assert_eq!(consensus_diameter(&[0.7, 0.7, 0.7], 1), 0.0);
        assert_eq!(consensus_diameter(&[0.0, 0.0, 3.0, 4.0], 2), 5.0);
    }

    #[test]
    fn optimality_gap_examples() {
        let obj = two_quadratics();
        let gaps = optimality_gap(&traj(vec![vec![1.0, 2.0]], 1), &obj, 2.25).unwrap();
        assert!((gaps[0].values[0] - 0.25).abs() < 1e-14);
        let at = optimality_gap(&traj(vec![vec![1.5, 1.5]], 1), &obj, 2.25).unwrap();
        assert_eq!(at[0].values[0], 0.0);
        let k = 10.0;
        let x1 = 3.0 * k / (2.0 * k + 1.0);
        let g = optimality_gap(&traj(vec![vec![x1, 3.0 - x1]], 1), &obj, 2.25).unwrap();
        // F(z) - F* = (z - 1.5)²
        assert!((g[0].values[0] - (x1 - 1.5f64).powi(2)).abs() < 1e-14);
        assert!((g[0].values[0] - 0.005102).abs() < 1e-6);
    }

    #[test]
    fn stationary_examples() {
        let obj = two_quadratics();
        let g = WeightedDigraph::complete(2).unwrap();
        let sp = stationary_quadratic(&obj, &g, 1.0).unwrap();
        assert!((sp.x[0] - 1.0).abs() < 1e-14 && (sp.x[1] - 2.0).abs() < 1e-14);
        assert!((sp.disagreement - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(sp.residual <= 1e-9);
        let sp = stationary_quadratic(&obj, &g, 10.0).unwrap();
        assert!((sp.x[0] - 30.0 / 21.0).abs() < 1e-14);
        assert!((sp.x[1] - 33.0 / 21.0).abs() < 1e-14);
        assert!((sp.disagreement - 3.0 / (2f64.sqrt() * 21.0)).abs() < 1e-14);

        let same =
            ObjectiveSet::new(2, vec![ConvexComponent::isotropic(vec![1.0, -1.0]); 3]).unwrap();
        let path = WeightedDigraph::undirected(3, &[(0, 1), (1, 2)]).unwrap();
        let sp = stationary_quadratic(&same, &path, 5.0).unwrap();
        assert!(sp.disagreement < 1e-14);
        assert!(linalg::dist(&sp.p_ave, &[1.0, -1.0]) < 1e-14);
    }

    #[test]
    fn stationary_rejects_singular_and_directed() {
        let zero = ObjectiveSet::new(1, vec![ConvexComponent::zero(1); 2]).unwrap();
        let g = WeightedDigraph::complete(2).unwrap();
        assert!(matches!(
            stationary_quadratic(&zero, &g, 1.0),
            Err(Error::Singular { rank: 1, size: 2 })
        ));
        let d = WeightedDigraph::unit(2, &[(0, 1)]).unwrap();
        assert!(matches!(
            stationary_quadratic(&two_quadratics(), &d, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bound_examples() {
        let obj = two_quadratics();
        let g = WeightedDigraph::complete(2).unwrap();
        let l2 = g.lambda2().unwrap();
        let sp10 = stationary_quadratic(&obj, &g, 10.0).unwrap();
        let l0 = estimate_l0(&obj, std::slice::from_ref(&sp10)).unwrap();
        assert!((l0 - 30.0 * 2f64.sqrt() / 21.0).abs() < 1e-12);
        // Two nodes: the bound is attained with equality.
        let c = check_disagreement_bound(&sp10, l0, l2).unwrap();
        assert!(c.holds && c.margin >= 0.0);
        assert!((c.bound - sp10.disagreement).abs() < 1e-12);

        let sp100 = stationary_quadratic(&obj, &g, 100.0).unwrap();
        assert!((sp100.disagreement - 3.0 / (2f64.sqrt() * 201.0)).abs() < 1e-14);
        let l0 = estimate_l0(&obj, &[sp10.clone(), sp100.clone()]).unwrap();
        assert!(check_disagreement_bound(&sp100, l0, l2).unwrap().holds);
        let c10 = check_disagreement_bound(&sp10, l0, l2).unwrap();
        assert!(c10.holds && c10.margin > 1e-3);

        let same = ObjectiveSet::new(1, vec![ConvexComponent::isotropic(vec![2.0]); 2]).unwrap();
        let sp = stationary_quadratic(&same, &g, 3.0).unwrap();
        assert!(check_disagreement_bound(&sp, 0.0, l2).unwrap().holds);
    }

    #[test]
    fn sphere_examples() {
        let y: Vec<f64> = sphere_intersection(&[vec![0.0], vec![3.0]], &[1.0, 4.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
        let y = sphere_intersection(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            &[0.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(linalg::norm(&y) < 1e-14);
        let collinear = sphere_intersection(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            &[1.0, 1.0, 1.0],
        );
        assert!(matches!(collinear, Err(Error::Precondition(_))));
        let inconsistent = sphere_intersection(&[vec![0.0], vec![3.0]], &[1.0, 100.0]);
        assert!(matches!(inconsistent, Err(Error::NoSolution(_))));
    }

    #[test]
    fn residual_examples() {
        let obj = two_quadratics();
        let r =
            node_optimum_residuals(&traj(vec![vec![0.0, 3.0], vec![1.0, 2.0]], 1), &obj).unwrap();
        assert_eq!(r[0].values, vec![0.0, 1.0]);
        assert_eq!(r[1].values, vec![0.0, 1.0]);
        let ball = ObjectiveSet::new(
            2,
            vec![ConvexComponent::sq_dist(
                ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            )],
        )
        .unwrap();
        let r = node_optimum_residuals(&traj(vec![vec![2.0, 0.0]], 2), &ball).unwrap();
        assert_eq!(r[0].values, vec![1.0]);
    }

    #[test]
    fn audit_examples() {
        let g = WeightedDigraph::complete(2).unwrap();
        let s = Scenario::new(
            two_quadratics(),
            Topology::Fixed(g.clone()),
            ControlLaw::JStar,
            vec![0.0, 0.0],
            0.0,
            1.0,
        )
        .unwrap();
        let rep = audit_assumptions(&s, &[0.0, 1.0, 10.0, 100.0, 1000.0]).unwrap();
        assert!(rep.coercive);
        assert_eq!(rep.a4, Some(true));
        assert_eq!(rep.grid_bounded, Some(true));
        assert!(rep
            .grid
            .iter()
            .all(|p| p.max_block_norm.unwrap() <= 3.0 + 1e-12));

        let half_line = ConvexSet::boxed(vec![0.0, 0.0], vec![f64::INFINITY, 1.0]).unwrap();
        let obj = ObjectiveSet::new(2, vec![ConvexComponent::sq_dist(half_line); 2]).unwrap();
        let s = Scenario::new(
            obj,
            Topology::Fixed(g),
            ControlLaw::JStar,
            vec![0.0; 4],
            0.0,
            1.0,
        )
        .unwrap();
        let rep = audit_assumptions(&s, &[1.0]).unwrap();
        assert!(!rep.coercive);
        assert_eq!(rep.a4, None);
        assert_eq!(rep.grid_bounded, None);
    }

    #[test]
    fn interior_witness_construction() {
        let sets = vec![
            ConvexSet::ball(vec![1.0, 0.0], 1.5).unwrap(),
            ConvexSet::ball(vec![-1.0, 0.5], 1.5).unwrap(),
        ];
        let w = interior_witnesses(&sets, &[0.0, 0.0]).unwrap();
        assert_eq!(w.len(), 3);
        let y = reconstruct_from_witnesses(&[0.3, -0.2], &w).unwrap();
        assert!(linalg::dist(&y, &[0.3, -0.2]) < 1e-12);
        assert!(interior_witnesses(&sets, &[3.0, 0.0]).is_err());
    }

    #[test]
    fn grid_divergence_detected() {
        let pts = |v: &[f64]| -> Vec<GridPoint<f64>> {
            v.iter()
                .enumerate()
                .map(|(i, &x)| GridPoint {
                    gain: i as f64,
                    max_block_norm: Some(x),
                    error: None,
                })
                .collect()
        };
        assert!(!grid_is_bounded(&pts(&[1.0, 2.0, 4.0, 8.0])));
        assert!(grid_is_bounded(&pts(&[1.0, 2.0, 2.5, 2.6])));
        assert!(grid_is_bounded(&pts(&[3.0, 2.0, 2.1, 2.11])));
    }
}
