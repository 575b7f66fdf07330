//! C¹ convex objective components, projectors onto closed convex sets and
//! the argmin-set calculus used to build scenarios with a known answer.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Closed, convex, nonempty subset of `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet<T> {
    Point(Vec<T>),
    Ball {
        center: Vec<T>,
        radius: T,
    },
    /// Componentwise bounds; infinite bounds are allowed.
    Box {
        lower: Vec<T>,
        upper: Vec<T>,
    },
}

impl<T: Scalar> ConvexSet<T> {
    pub fn point(c: Vec<T>) -> Self {
        ConvexSet::Point(c)
    }

    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius >= T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidObjective(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidObjective(
                "box needs lower <= upper componentwise".into(),
            ));
        }
        if lower.iter().any(|&l| l == T::infinity())
            || upper.iter().any(|&u| u == T::neg_infinity())
        {
            return Err(Error::InvalidObjective("box would be empty".into()));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Point(c) => c.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSet::Box { lower, upper } => lower.iter().chain(upper).all(|v| v.is_finite()),
            _ => true,
        }
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            ConvexSet::Point(c) => c.clone(),
            ConvexSet::Ball { center, radius } => {
                let d = linalg::dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    let s = *radius / d;
                    center
                        .iter()
                        .zip(x)
                        .map(|(&c, &xi)| c + s * (xi - c))
                        .collect()
                }
            }
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&xi, (&l, &u))| xi.max(l).min(u))
                .collect(),
        })
    }

    pub fn distance(&self, x: &[T]) -> Result<T> {
        let p = self.project(x)?;
        Ok(linalg::dist(x, &p))
    }

    pub fn contains(&self, x: &[T], tol: T) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    /// `x` lies in the set with a clearance of at least `margin` in every
    /// direction. Points have no interior.
    pub fn contains_with_margin(&self, x: &[T], margin: T) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            ConvexSet::Point(_) => false,
            ConvexSet::Ball { center, radius } => linalg::dist(x, center) + margin < *radius,
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&xi, (&l, &u))| xi - margin > l && xi + margin < u),
        })
    }

    fn as_box(&self) -> Option<(Vec<T>, Vec<T>)> {
        match self {
            ConvexSet::Point(c) => Some((c.clone(), c.clone())),
            ConvexSet::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            ConvexSet::Ball { center, radius } if *radius == T::zero() || center.len() == 1 => {
                Some((
                    center.iter().map(|&c| c - *radius).collect(),
                    center.iter().map(|&c| c + *radius).collect(),
                ))
            }
            ConvexSet::Ball { .. } => None,
        }
    }
}

/// A C¹ convex function on `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexComponent<T> {
    /// `½ (x - c)ᵀ Q (x - c)` with symmetric positive-semidefinite `Q`.
    Quadratic {
        q: Matrix<T>,
        c: Vec<T>,
    },
    /// `½ dist(x, S)²`
    SqDist(ConvexSet<T>),
    Sum(Vec<ConvexComponent<T>>),
}

impl<T: Scalar> ConvexComponent<T> {
    pub fn quadratic(q: Matrix<T>, c: Vec<T>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::InvalidObjective("Q must be square".into()));
        }
        check_dim(q.rows(), c.len())?;
        let scale = q.max_abs().max(T::one());
        if !q.is_symmetric(T::lit(1e-12) * scale) {
            return Err(Error::InvalidObjective("Q must be symmetric".into()));
        }
        let ev = q.symmetric_eigenvalues()?;
        if ev.first().is_some_and(|&l| l < -T::lit(1e-12) * scale) {
            return Err(Error::InvalidObjective(format!(
                "Q must be positive semidefinite (eigenvalue {})",
                ev[0]
            )));
        }
        Ok(ConvexComponent::Quadratic { q, c })
    }

    /// `½ |x - c|²`
    pub fn isotropic(c: Vec<T>) -> Self {
        let m = c.len();
        ConvexComponent::Quadratic {
            q: Matrix::identity(m),
            c,
        }
    }

    /// The zero function on `R^m`.
    pub fn zero(m: usize) -> Self {
        ConvexComponent::Quadratic {
            q: Matrix::zeros(m, m),
            c: vec![T::zero(); m],
        }
    }

    pub fn sq_dist(set: ConvexSet<T>) -> Self {
        ConvexComponent::SqDist(set)
    }

    pub fn sum(parts: Vec<ConvexComponent<T>>) -> Result<Self> {
        let m = parts
            .first()
            .ok_or_else(|| Error::InvalidObjective("empty sum".into()))?
            .dim();
        for p in &parts {
            check_dim(m, p.dim())?;
        }
        Ok(ConvexComponent::Sum(parts))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexComponent::Quadratic { c, .. } => c.len(),
            ConvexComponent::SqDist(s) => s.dim(),
            ConvexComponent::Sum(parts) => parts[0].dim(),
        }
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        let half = T::lit(0.5);
        match self {
            ConvexComponent::Quadratic { q, c } => {
                let d = linalg::sub(x, c);
                Ok(half * linalg::dot(&d, &q.mul_vec(&d)))
            }
            ConvexComponent::SqDist(s) => {
                let d = s.distance(x)?;
                Ok(half * d * d)
            }
            ConvexComponent::Sum(parts) => parts
                .iter()
                .try_fold(T::zero(), |acc, p| Ok(acc + p.eval(x)?)),
        }
    }

    pub fn grad(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), x.len())?;
        match self {
            ConvexComponent::Quadratic { q, c } => Ok(q.mul_vec(&linalg::sub(x, c))),
            ConvexComponent::SqDist(s) => Ok(linalg::sub(x, &s.project(x)?)),
            ConvexComponent::Sum(parts) => {
                let mut g = vec![T::zero(); x.len()];
                for p in parts {
                    linalg::axpy(T::one(), &p.grad(x)?, &mut g);
                }
                Ok(g)
            }
        }
    }

    /// `(Q, Q c)` when the component is a (sum of) quadratic(s).
    fn quadratic_parts(&self) -> Option<(Matrix<T>, Vec<T>)> {
        match self {
            ConvexComponent::Quadratic { q, c } => Some((q.clone(), q.mul_vec(c))),
            ConvexComponent::SqDist(_) => None,
            ConvexComponent::Sum(parts) => {
                let m = self.dim();
                let mut qs = Matrix::zeros(m, m);
                let mut b = vec![T::zero(); m];
                for p in parts {
                    let (q, qc) = p.quadratic_parts()?;
                    qs = qs.add(&q).ok()?;
                    linalg::axpy(T::one(), &qc, &mut b);
                }
                Some((qs, b))
            }
        }
    }

    /// Exact argmin as a library set.
    pub fn argmin_set(&self) -> Result<ConvexSet<T>> {
        match self {
            ConvexComponent::SqDist(s) => Ok(s.clone()),
            ConvexComponent::Quadratic { .. } => {
                let (q, qc) = self.quadratic_parts().expect("quadratic");
                pd_minimizer(&q, &qc).map(ConvexSet::Point)
            }
            ConvexComponent::Sum(parts) => {
                if let Some((q, qc)) = self.quadratic_parts() {
                    return pd_minimizer(&q, &qc).map(ConvexSet::Point);
                }
                // Minimizers of the sum are the common minimizers of the parts
                // when those exist.
                let sets = parts
                    .iter()
                    .map(ConvexComponent::argmin_set)
                    .collect::<Result<Vec<_>>>()?;
                intersect_exactly(&sets).ok_or_else(|| {
                    Error::Unsupported(
                        "argmin of this sum is not representable as a library set".into(),
                    )
                })
            }
        }
    }

    /// `f(x) -> inf` as `|x| -> inf`.
    pub fn is_coercive(&self) -> bool {
        match self {
            ConvexComponent::Quadratic { q, .. } => is_positive_definite(q),
            ConvexComponent::SqDist(s) => s.is_bounded(),
            ConvexComponent::Sum(parts) => {
                self.quadratic_parts()
                    .map(|(q, _)| is_positive_definite(&q))
                    .unwrap_or(false)
                    || parts.iter().any(ConvexComponent::is_coercive)
            }
        }
    }

    /// Upper bound on the Lipschitz constant of the gradient.
    pub fn gradient_lipschitz(&self) -> T {
        match self {
            ConvexComponent::Quadratic { q, .. } => q
                .symmetric_eigenvalues()
                .ok()
                .and_then(|ev| ev.last().copied())
                .unwrap_or(T::zero())
                .max(T::zero()),
            ConvexComponent::SqDist(_) => T::one(),
            ConvexComponent::Sum(parts) => parts
                .iter()
                .fold(T::zero(), |acc, p| acc + p.gradient_lipschitz()),
        }
    }
}

fn is_positive_definite<T: Scalar>(q: &Matrix<T>) -> bool {
    let scale = q.max_abs().max(T::one());
    q.symmetric_eigenvalues()
        .map(|ev| ev.first().is_some_and(|&l| l > T::lit(1e-12) * scale))
        .unwrap_or(false)
}

fn pd_minimizer<T: Scalar>(q: &Matrix<T>, qc: &[T]) -> Result<Vec<T>> {
    if !is_positive_definite(q) {
        return Err(Error::Unsupported(
            "quadratic with singular Q has an affine-subspace argmin".into(),
        ));
    }
    q.solve(qc)
}

/// Intersection of sets when it is itself a library set (boxes, or a point
/// contained in every other set).
fn intersect_exactly<T: Scalar>(sets: &[ConvexSet<T>]) -> Option<ConvexSet<T>> {
    if let [only] = sets {
        return Some(only.clone());
    }
    let tol = T::lit(1e-12);
    if let Some(ConvexSet::Point(p)) = sets.iter().find(|s| matches!(s, ConvexSet::Point(_))) {
        let inside = sets.iter().all(|s| s.contains(p, tol).unwrap_or(false));
        return inside.then(|| ConvexSet::Point(p.clone()));
    }
    let boxes: Option<Vec<_>> = sets.iter().map(ConvexSet::as_box).collect();
    let (lower, upper) = box_intersection(&boxes?)?;
    ConvexSet::boxed(lower, upper).ok()
}

fn box_intersection<T: Scalar>(boxes: &[(Vec<T>, Vec<T>)]) -> Option<(Vec<T>, Vec<T>)> {
    let m = boxes[0].0.len();
    let mut lo = vec![T::neg_infinity(); m];
    let mut hi = vec![T::infinity(); m];
    for (l, u) in boxes {
        for k in 0..m {
            lo[k] = lo[k].max(l[k]);
            hi[k] = hi[k].min(u[k]);
        }
    }
    lo.iter().zip(&hi).all(|(l, h)| l <= h).then_some((lo, hi))
}

fn box_witness<T: Scalar>(lo: &[T], hi: &[T]) -> Vec<T> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
            (true, true) => l + T::lit(0.5) * (h - l),
            (true, false) => l,
            (false, true) => h,
            (false, false) => T::zero(),
        })
        .collect()
}

/// Outcome of a nonemptiness query on a family of convex sets.
#[derive(Debug, Clone, PartialEq)]
pub enum Intersection<T> {
    NonEmpty {
        witness: Vec<T>,
    },
    Empty,
    /// Neither a witness nor a separation certificate was found.
    Undecided,
}

impl<T> Intersection<T> {
    pub fn witness(&self) -> Option<&[T]> {
        match self {
            Intersection::NonEmpty { witness } => Some(witness),
            _ => None,
        }
    }
}

/// Exact decision and witness for a pair of sets.
fn pair_witness<T: Scalar>(a: &ConvexSet<T>, b: &ConvexSet<T>) -> Option<Vec<T>> {
    let tol = T::lit(1e-12);
    match (a, b) {
        (
            ConvexSet::Ball {
                center: c1,
                radius: r1,
            },
            ConvexSet::Ball {
                center: c2,
                radius: r2,
            },
        ) => {
            let d = linalg::dist(c1, c2);
            if d > *r1 + *r2 + tol {
                return None;
            }
            if d == T::zero() {
                return Some(c1.clone());
            }
            // Overlap of the two balls along the line of centers, measured from c1.
            let lo = (-*r1).max(d - *r2);
            let hi = (*r1).min(d + *r2);
            let s = T::lit(0.5) * (lo + hi) / d;
            Some(c1.iter().zip(c2).map(|(&p, &q)| p + s * (q - p)).collect())
        }
        (ConvexSet::Ball { center, radius }, other)
        | (other, ConvexSet::Ball { center, radius })
            if other.as_box().is_some() =>
        {
            let p = other.project(center).ok()?;
            (linalg::dist(&p, center) <= *radius + tol).then_some(p)
        }
        _ => {
            let (l1, u1) = a.as_box()?;
            let (l2, u2) = b.as_box()?;
            let (lo, hi) = box_intersection(&[(l1, u1), (l2, u2)])?;
            Some(box_witness(&lo, &hi))
        }
    }
}

/// Decides whether the sets share a point.
///
/// Boxes (and points, and one-dimensional balls) are decided exactly by
/// interval intersection; pairs exactly by a center-distance test. Larger
/// families first check every pair (a disjoint pair certifies emptiness) and
/// then look for a witness by cyclic projections.
pub fn intersection_nonempty<T: Scalar>(sets: &[ConvexSet<T>]) -> Result<Intersection<T>> {
    let first = sets
        .first()
        .ok_or_else(|| Error::Precondition("intersection of an empty family".into()))?;
    let m = first.dim();
    for s in sets {
        check_dim(m, s.dim())?;
    }
    if let Some(boxes) = sets
        .iter()
        .map(ConvexSet::as_box)
        .collect::<Option<Vec<_>>>()
    {
        return Ok(match box_intersection(&boxes) {
            Some((lo, hi)) => Intersection::NonEmpty {
                witness: box_witness(&lo, &hi),
            },
            None => Intersection::Empty,
        });
    }
    if sets.len() == 1 {
        return Ok(Intersection::NonEmpty {
            witness: first.project(&vec![T::zero(); m])?,
        });
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if pair_witness(&sets[i], &sets[j]).is_none() {
                return Ok(Intersection::Empty);
            }
        }
    }
    if sets.len() == 2 {
        let w = pair_witness(&sets[0], &sets[1]).expect("checked above");
        return Ok(Intersection::NonEmpty { witness: w });
    }
    let scale = sets
        .iter()
        .map(|s| match s {
            ConvexSet::Point(c) => linalg::max_abs(c),
            ConvexSet::Ball { center, radius } => linalg::max_abs(center).max(*radius),
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .chain(upper)
                .filter(|v| v.is_finite())
                .fold(T::zero(), |a, v| a.max(v.abs())),
        })
        .fold(T::one(), T::max);
    let tol = T::lit(1e-12) * scale;
    let mut x = pair_witness(&sets[0], &sets[1]).expect("checked above");
    for _ in 0..20_000 {
        for s in sets {
            x = s.project(&x)?;
        }
        let worst = sets
            .iter()
            .map(|s| s.distance(&x))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(T::zero(), T::max);
        if worst <= tol {
            return Ok(Intersection::NonEmpty { witness: x });
        }
    }
    Ok(Intersection::Undecided)
}

/// Per-node objectives sharing the state dimension `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSet<T> {
    m: usize,
    components: Vec<ConvexComponent<T>>,
}

impl<T: Scalar> ObjectiveSet<T> {
    pub fn new(m: usize, components: Vec<ConvexComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidObjective("no components".into()));
        }
        for c in &components {
            check_dim(m, c.dim())?;
        }
        Ok(Self { m, components })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn n_nodes(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ConvexComponent<T>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ConvexComponent<T> {
        &self.components[i]
    }

    /// `F(z) = sum_i f_i(z)`
    pub fn total(&self, z: &[T]) -> Result<T> {
        self.components
            .iter()
            .try_fold(T::zero(), |acc, f| Ok(acc + f.eval(z)?))
    }

    pub fn total_grad(&self, z: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); self.m];
        for f in &self.components {
            linalg::axpy(T::one(), &f.grad(z)?, &mut g);
        }
        Ok(g)
    }

    /// `sum_i f_i(x_i)` over a stacked state.
    pub fn separable(&self, x: &[T]) -> Result<T> {
        check_dim(self.m * self.components.len(), x.len())?;
        self.components
            .iter()
            .zip(x.chunks(self.m))
            .try_fold(T::zero(), |acc, (f, xi)| Ok(acc + f.eval(xi)?))
    }

    /// Stacked gradients `(∇f_1(x_1), ..., ∇f_N(x_N))`.
    pub fn separable_grad(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.m * self.components.len(), x.len())?;
        let mut out = Vec::with_capacity(x.len());
        for (f, xi) in self.components.iter().zip(x.chunks(self.m)) {
            out.extend(f.grad(xi)?);
        }
        Ok(out)
    }

    /// Argmin sets of every component.
    pub fn argmin_sets(&self) -> Result<Vec<ConvexSet<T>>> {
        self.components
            .iter()
            .map(ConvexComponent::argmin_set)
            .collect()
    }

    /// Decides `∩ argmin f_i ≠ ∅`.
    pub fn common_minimizers(&self) -> Result<Intersection<T>> {
        intersection_nonempty(&self.argmin_sets()?)
    }

    pub fn all_quadratic(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.quadratic_parts().is_some())
    }

    /// `(Q_i, c_i)` per node, for all-quadratic sets with plain quadratic
    /// components.
    pub fn quadratic_blocks(&self) -> Option<Vec<(&Matrix<T>, &[T])>> {
        self.components
            .iter()
            .map(|c| match c {
                ConvexComponent::Quadratic { q, c } => Some((q, c.as_slice())),
                _ => None,
            })
            .collect()
    }
}

/// How [`global_min`] obtained its answer.
#[derive(Debug, Clone, PartialEq)]
pub enum MinMethod<T> {
    /// `z = (sum Q_i)^{-1} sum Q_i c_i`
    ClosedForm,
    /// Common point of the argmin sets, where every component vanishes.
    Intersection,
    /// Gradient descent; `grad_norm` is the residual gradient norm reached.
    Numerical { grad_norm: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMin<T> {
    pub value: T,
    pub minimizer: Vec<T>,
    pub method: MinMethod<T>,
}

/// Tolerance targeted by the numerical fallback of [`global_min`].
pub const GLOBAL_MIN_TOL: f64 = 1e-10;

/// Minimum of `F = sum_i f_i` and one minimizer.
pub fn global_min<T: Scalar>(obj: &ObjectiveSet<T>) -> Result<GlobalMin<T>> {
    let m = obj.dim();
    let quad: Option<Vec<_>> = obj.components.iter().map(|c| c.quadratic_parts()).collect();
    if let Some(parts) = quad {
        let mut qs = Matrix::zeros(m, m);
        let mut b = vec![T::zero(); m];
        for (q, qc) in parts {
            qs = qs.add(&q)?;
            linalg::axpy(T::one(), &qc, &mut b);
        }
        if is_positive_definite(&qs) {
            let z = qs.solve(&b)?;
            return Ok(GlobalMin {
                value: obj.total(&z)?,
                minimizer: z,
                method: MinMethod::ClosedForm,
            });
        }
    }
    let all_sq_dist = obj
        .components
        .iter()
        .all(|c| matches!(c, ConvexComponent::SqDist(_)));
    if all_sq_dist {
        if let Intersection::NonEmpty { witness } = obj.common_minimizers()? {
            return Ok(GlobalMin {
                value: obj.total(&witness)?,
                minimizer: witness,
                method: MinMethod::Intersection,
            });
        }
    }
    let lip = obj
        .components
        .iter()
        .fold(T::zero(), |acc, c| acc + c.gradient_lipschitz())
        .max(T::min_positive_value());
    let step = T::one() / lip;
    let tol = T::lit(GLOBAL_MIN_TOL);
    let mut z = vec![T::zero(); m];
    let mut g = obj.total_grad(&z)?;
    for _ in 0..1_000_000 {
        if linalg::norm(&g) <= tol {
            break;
        }
        linalg::axpy(-step, &g, &mut z);
        g = obj.total_grad(&z)?;
    }
    Ok(GlobalMin {
        value: obj.total(&z)?,
        method: MinMethod::Numerical {
            grad_norm: linalg::norm(&g),
        },
        minimizer: z,
    })
}
