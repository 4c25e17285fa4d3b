//! Metric primitives, the approval predicate, and constructive geometry for
//! synthesizing proposals that a whole group of agents approves.
//!
//! Every approval region is an open ball `B(v, ρ(v, r))` whose boundary
//! passes through the status quo `r`. A group of agents therefore shares an
//! approved proposal exactly when `r` lies outside the convex hull of their
//! positions, and the hull point nearest to `r` is such a proposal. The
//! min-max solver in [`best_common_proposal`] answers the same question by a
//! different route and returns the proposal with the largest worst-case slack.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::scalar::Scalar;

/// Largest Euclidean dimension the solvers are tuned for.
pub const MAX_DIMENSION: usize = 8;

/// Iteration budget shared by the hull and min-max solvers.
pub const MAX_SOLVER_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unknown point index {0} for explicit metric")]
    UnknownPoint(usize),
    #[error("location kind does not match the metric kind")]
    KindMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("explicit metric matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("explicit metric entry ({i},{j}) is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("explicit metric has non-zero diagonal at {0}")]
    NonZeroDiagonal(usize),
    #[error("explicit metric is asymmetric at ({i},{j})")]
    Asymmetric { i: usize, j: usize },
    #[error("explicit metric has non-positive distance between distinct points ({i},{j})")]
    NonPositive { i: usize, j: usize },
    #[error("explicit metric violates the triangle inequality on ({i},{j},{k})")]
    Triangle { i: usize, j: usize, k: usize },
}

impl MetricError {
    /// Short machine-readable clause name.
    pub fn clause(&self) -> &'static str {
        match self {
            MetricError::NotSquare { .. } => "square",
            MetricError::NonFinite { .. } => "finite",
            MetricError::NonZeroDiagonal(_) => "zero_diagonal",
            MetricError::Asymmetric { .. } => "symmetry",
            MetricError::NonPositive { .. } => "positivity",
            MetricError::Triangle { .. } => "triangle_inequality",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("min-max solver did not converge: gap {gap:e} after {iterations} iterations")]
    NonConvergence { gap: f64, iterations: usize },
}

/// A point of `ℝᵈ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T>(pub Vec<T>);

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn sub(&self, other: &Point<T>) -> Point<T> {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| *a - *b).collect())
    }

    pub fn add(&self, other: &Point<T>) -> Point<T> {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| *a + *b).collect())
    }

    pub fn dot(&self, other: &Point<T>) -> T {
        self.0.iter().zip(&other.0).map(|(a, b)| *a * *b).sum()
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn scaled(&self, s: T) -> Point<T> {
        Point(self.0.iter().map(|a| *a * s).collect())
    }

    pub fn cast<U: Scalar>(&self) -> Point<U> {
        Point(self.0.iter().map(|c| U::lit(c.as_f64())).collect())
    }
}

/// Euclidean distance. Callers guarantee equal dimensions.
pub fn euclidean<T: Scalar>(a: &Point<T>, b: &Point<T>) -> T {
    debug_assert_eq!(a.dim(), b.dim());
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt()
}

/// Finite metric given by a validated distance matrix over named points.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitMetric<T> {
    names: Vec<String>,
    matrix: Vec<Vec<T>>,
}

impl<T: Scalar> ExplicitMetric<T> {
    /// Validates the metric axioms, including an exhaustive triangle check.
    pub fn new(names: Vec<String>, matrix: Vec<Vec<T>>) -> Result<Self, MetricError> {
        let n = names.len();
        if matrix.len() != n {
            return Err(MetricError::NotSquare { row: matrix.len(), len: 0, expected: n });
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::NotSquare { row: i, len: row.len(), expected: n });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(MetricError::NonFinite { i, j });
                }
            }
        }
        for i in 0..n {
            if matrix[i][i] != T::zero() {
                return Err(MetricError::NonZeroDiagonal(i));
            }
            for j in (i + 1)..n {
                if matrix[i][j] != matrix[j][i] {
                    return Err(MetricError::Asymmetric { i, j });
                }
                if matrix[i][j] <= T::zero() {
                    return Err(MetricError::NonPositive { i, j });
                }
            }
        }
        // Slack of a few ulps so rounding in decimal inputs does not reject
        // metrics whose decimal values are exact.
        let slack = T::epsilon() * T::lit(8.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let direct = matrix[i][k];
                    let detour = matrix[i][j] + matrix[j][k];
                    if direct > detour * (T::one() + slack) {
                        return Err(MetricError::Triangle { i, j, k });
                    }
                }
            }
        }
        Ok(ExplicitMetric { names, matrix })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.matrix
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, i: usize, j: usize) -> Result<T, GeometryError> {
        let n = self.names.len();
        if i >= n {
            return Err(GeometryError::UnknownPoint(i));
        }
        if j >= n {
            return Err(GeometryError::UnknownPoint(j));
        }
        Ok(self.matrix[i][j])
    }
}

/// The metric `ρ` of a deliberation space.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric<T> {
    Euclidean { dim: usize },
    Explicit(ExplicitMetric<T>),
}

/// Where an agent or proposal sits: coordinates under a Euclidean metric,
/// or a row of an explicit distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Location<T> {
    Coords(Point<T>),
    Node(usize),
}

impl<T: Scalar> Metric<T> {
    pub fn is_euclidean(&self) -> bool {
        matches!(self, Metric::Euclidean { .. })
    }

    pub fn dimension(&self) -> Option<usize> {
        match self {
            Metric::Euclidean { dim } => Some(*dim),
            Metric::Explicit(_) => None,
        }
    }

    /// `ρ(a, b)`.
    pub fn distance(&self, a: &Location<T>, b: &Location<T>) -> Result<T, GeometryError> {
        match (self, a, b) {
            (Metric::Euclidean { dim }, Location::Coords(p), Location::Coords(q)) => {
                if p.dim() != *dim {
                    return Err(GeometryError::DimensionMismatch { left: p.dim(), right: *dim });
                }
                if q.dim() != *dim {
                    return Err(GeometryError::DimensionMismatch { left: q.dim(), right: *dim });
                }
                Ok(euclidean(p, q))
            }
            (Metric::Explicit(m), Location::Node(i), Location::Node(j)) => m.get(*i, *j),
            _ => Err(GeometryError::KindMismatch),
        }
    }
}

/// Strict approval: `ρ(agent, proposal) < ρ(agent, status_quo)`, no tolerance.
pub fn approves<T: Scalar>(
    agent: &Location<T>,
    proposal: &Location<T>,
    status_quo: &Location<T>,
    metric: &Metric<T>,
) -> Result<bool, GeometryError> {
    Ok(metric.distance(agent, proposal)? < metric.distance(agent, status_quo)?)
}

/// Nearest point of `conv(generators)` to `target`, with its distance.
///
/// Wolfe's minimum-norm-point active-set method on the generators shifted by
/// `target`. The active set stays affinely independent, so it never holds more
/// than `d + 1` generators and terminates after finitely many corrections; the
/// iteration cap only guards against numerical cycling.
///
/// Panics if `generators` is empty.
pub fn nearest_point_in_hull<T: Scalar>(target: &Point<T>, generators: &[Point<T>]) -> (Point<T>, T) {
    assert!(!generators.is_empty(), "convex hull of an empty set");
    let shifted: Vec<Point<T>> = generators.iter().map(|g| g.sub(target)).collect();
    let x = min_norm_point(&shifted);
    let dist = x.norm();
    (target.add(&x), dist)
}

fn min_norm_point<T: Scalar>(points: &[Point<T>]) -> Point<T> {
    let scale2 = points
        .iter()
        .map(|p| p.norm_squared())
        .fold(T::zero(), |a, b| a.max(b));
    if scale2 == T::zero() {
        return points[0].clone();
    }
    let tol = T::epsilon() * T::lit(64.0) * scale2;

    let start = (0..points.len())
        .min_by(|&a, &b| {
            points[a]
                .norm_squared()
                .partial_cmp(&points[b].norm_squared())
                .expect("finite coordinates")
        })
        .expect("non-empty");
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<T> = vec![T::one()];
    let mut x = points[start].clone();

    let mut iterations = 0;
    'major: while iterations < MAX_SOLVER_ITERATIONS {
        iterations += 1;
        let xx = x.norm_squared();
        if xx <= tol * T::epsilon() {
            break;
        }
        let (j, xp) = points
            .iter()
            .enumerate()
            .map(|(j, p)| (j, x.dot(p)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
            .expect("non-empty");
        if xx - xp <= tol || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(T::zero());

        loop {
            iterations += 1;
            if iterations >= MAX_SOLVER_ITERATIONS {
                break 'major;
            }
            let Some(alpha) = affine_min_norm(points, &active) else {
                // Affinely dependent active set: numerically stuck, keep x.
                active.pop();
                weights.pop();
                break 'major;
            };
            if alpha.iter().all(|a| *a > T::zero()) {
                weights = alpha;
                x = combine(points, &active, &weights);
                break;
            }
            let mut theta = T::one();
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= T::zero() {
                    let t = *w / (*w - *a);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = (T::one() - theta) * *w + theta * *a;
            }
            let mut keep_active = Vec::with_capacity(active.len());
            let mut keep_weights = Vec::with_capacity(active.len());
            for (idx, w) in active.iter().zip(&weights) {
                if *w > T::epsilon() {
                    keep_active.push(*idx);
                    keep_weights.push(*w);
                }
            }
            if keep_active.is_empty() {
                break 'major;
            }
            let total: T = keep_weights.iter().copied().sum();
            for w in keep_weights.iter_mut() {
                *w = *w / total;
            }
            active = keep_active;
            weights = keep_weights;
            x = combine(points, &active, &weights);
        }
    }
    x
}

fn combine<T: Scalar>(points: &[Point<T>], active: &[usize], weights: &[T]) -> Point<T> {
    let dim = points[0].dim();
    let mut out = vec![T::zero(); dim];
    for (idx, w) in active.iter().zip(weights) {
        for (o, c) in out.iter_mut().zip(&points[*idx].0) {
            *o = *o + *w * *c;
        }
    }
    Point(out)
}

/// Weights of the minimum-norm point of the affine hull of `points[active]`.
fn affine_min_norm<T: Scalar>(points: &[Point<T>], active: &[usize]) -> Option<Vec<T>> {
    let k = active.len();
    if k == 1 {
        return Some(vec![T::one()]);
    }
    let base = &points[active[0]];
    let dirs: Vec<Point<T>> = active[1..].iter().map(|&i| points[i].sub(base)).collect();
    let m = k - 1;
    let mut gram = vec![vec![T::zero(); m]; m];
    let mut rhs = vec![T::zero(); m];
    for a in 0..m {
        for b in 0..m {
            gram[a][b] = dirs[a].dot(&dirs[b]);
        }
        rhs[a] = -dirs[a].dot(base);
    }
    let beta = linalg::solve(gram, rhs)?;
    let mut alpha = Vec::with_capacity(k);
    alpha.push(T::one() - beta.iter().copied().sum::<T>());
    alpha.extend(beta);
    Some(alpha)
}

/// Proposal obtained by projecting the status quo onto a hyperplane that
/// separates it from the agents: the nearest point of their hull.
///
/// Returns `None` when `r` is within the approval margin of the hull.
/// Whenever a point is returned, every agent approves it: for any hull
/// point `v`, `ρ(v, r)² ≥ ρ(v, q)² + ρ(q, r)²`.
pub fn separated_proposal<T: Scalar>(agents: &[Point<T>], status_quo: &Point<T>) -> Option<Point<T>> {
    let (q, dist) = nearest_point_in_hull(status_quo, agents);
    (dist > T::approval_margin()).then_some(q)
}

/// Minimizer of the worst-case approval slack over a group of agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult<T> {
    pub witness: Point<T>,
    /// `max_v ρ(v, witness) − ρ(v, r)`.
    pub margin: T,
}

impl<T: Scalar> FeasibilityResult<T> {
    /// The witness clears approval by the synthesis margin for every agent.
    pub fn is_feasible(&self) -> bool {
        self.margin < -T::approval_margin()
    }
}

/// `max_v ρ(v, p) − ρ(v, r)` over `agents`, with `radii[v] = ρ(v, r)`.
pub fn worst_slack<T: Scalar>(agents: &[Point<T>], radii: &[T], p: &Point<T>) -> T {
    agents
        .iter()
        .zip(radii)
        .map(|(v, rad)| euclidean(v, p) - *rad)
        .fold(T::neg_infinity(), |a, b| a.max(b))
}

/// Minimizes `f(p) = max_v ρ(v, p) − ρ(v, r)`.
///
/// The hull-distance pre-check settles infeasible groups directly with the
/// witness `r` (where `f = 0`). Otherwise a central-cut ellipsoid method
/// runs from the ball `B(v, ρ(v, r))` of the agent with the smallest radius,
/// which contains every minimizer because `f(r) = 0`. In one dimension the
/// ellipsoid degenerates to bisection on the subgradient sign. The status
/// quo, each agent, the centroid and the hull point seed the incumbent.
pub fn best_common_proposal<T: Scalar>(
    agents: &[Point<T>],
    status_quo: &Point<T>,
) -> Result<FeasibilityResult<T>, SolverError> {
    assert!(!agents.is_empty(), "best_common_proposal needs at least one agent");
    let radii: Vec<T> = agents.iter().map(|v| euclidean(v, status_quo)).collect();
    let Some(hull_point) = separated_proposal(agents, status_quo) else {
        return Ok(FeasibilityResult {
            witness: status_quo.clone(),
            margin: worst_slack(agents, &radii, status_quo),
        });
    };

    let dim = status_quo.dim();
    let n = T::from_usize(agents.len()).expect("agent count fits");
    let mut centroid = Point::origin(dim);
    for v in agents {
        centroid = centroid.add(v);
    }
    let centroid = centroid.scaled(T::one() / n);

    let mut best = hull_point;
    let mut best_val = worst_slack(agents, &radii, &best);
    let consider = |p: Point<T>, val: T, best: &mut Point<T>, best_val: &mut T| {
        if val < *best_val {
            *best = p;
            *best_val = val;
        }
    };
    for p in std::iter::once(status_quo.clone())
        .chain(agents.iter().cloned())
        .chain(std::iter::once(centroid))
    {
        let val = worst_slack(agents, &radii, &p);
        consider(p, val, &mut best, &mut best_val);
    }

    let scale = radii.iter().fold(T::one(), |a, b| a.max(*b));
    let target = T::solver_target_gap() * scale;
    let accepted = T::solver_accepted_gap() * scale;

    let (anchor, anchor_radius) = agents
        .iter()
        .zip(&radii)
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite radii"))
        .map(|(v, r)| (v.clone(), *r))
        .expect("non-empty");

    let (gap, iterations) = if dim == 1 {
        bisect_1d(agents, &radii, &anchor, anchor_radius, target, &mut |p, v| {
            consider(p, v, &mut best, &mut best_val)
        })
    } else {
        ellipsoid(agents, &radii, &anchor, anchor_radius, target, &mut |p, v| {
            consider(p, v, &mut best, &mut best_val)
        })
    };
    // The gap bounds `f(center) − f*`; the incumbent is never worse.
    if gap > accepted {
        return Err(SolverError::NonConvergence { gap: gap.as_f64(), iterations });
    }
    Ok(FeasibilityResult { witness: best, margin: best_val })
}

/// A subgradient of `f` at `p`, or `None` when `p` is a minimizer.
fn subgradient<T: Scalar>(agents: &[Point<T>], radii: &[T], p: &Point<T>) -> (T, Option<Point<T>>) {
    let mut val = T::neg_infinity();
    let mut arg = 0;
    for (i, (v, r)) in agents.iter().zip(radii).enumerate() {
        let s = euclidean(v, p) - *r;
        if s > val {
            val = s;
            arg = i;
        }
    }
    let diff = p.sub(&agents[arg]);
    let len = diff.norm();
    if len == T::zero() {
        // f(p) = −r_arg, the global lower bound of f.
        return (val, None);
    }
    (val, Some(diff.scaled(T::one() / len)))
}

fn bisect_1d<T: Scalar>(
    agents: &[Point<T>],
    radii: &[T],
    anchor: &Point<T>,
    anchor_radius: T,
    target: T,
    consider: &mut dyn FnMut(Point<T>, T),
) -> (T, usize) {
    let mut lo = anchor.0[0] - anchor_radius;
    let mut hi = anchor.0[0] + anchor_radius;
    let mut iterations = 0;
    while hi - lo > target && iterations < MAX_SOLVER_ITERATIONS {
        iterations += 1;
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = Point(vec![mid]);
        let (val, g) = subgradient(agents, radii, &p);
        consider(p, val);
        match g {
            None => return (T::zero(), iterations),
            Some(g) if g.0[0] > T::zero() => hi = mid,
            Some(_) => lo = mid,
        }
    }
    for x in [lo, hi] {
        let p = Point(vec![x]);
        let val = worst_slack(agents, radii, &p);
        consider(p, val);
    }
    // f is 1-Lipschitz and a minimizer lies in [lo, hi].
    (hi - lo, iterations)
}

fn ellipsoid<T: Scalar>(
    agents: &[Point<T>],
    radii: &[T],
    anchor: &Point<T>,
    anchor_radius: T,
    target: T,
    consider: &mut dyn FnMut(Point<T>, T),
) -> (T, usize) {
    let d = anchor.dim();
    let df = T::from_usize(d).expect("small dimension");
    let inflate = T::one() + T::lit(1e-6);
    let r0 = anchor_radius * inflate + T::epsilon();
    // The ellipsoid is `{c + B u : |u| ≤ 1}`; B is kept instead of B·Bᵀ.
    let mut basis = vec![vec![T::zero(); d]; d];
    for (i, row) in basis.iter_mut().enumerate() {
        row[i] = r0;
    }
    let mut center = anchor.clone();
    let mut best_val = T::infinity();
    let mut lower = T::neg_infinity();
    let mut gap = T::infinity();
    let scale_b = df / (df * df - T::one()).sqrt();
    let bend = df / (df + T::one()) - scale_b;

    let mut iterations = 0;
    while iterations < MAX_SOLVER_ITERATIONS {
        iterations += 1;
        let (val, g) = subgradient(agents, radii, &center);
        consider(center.clone(), val);
        best_val = best_val.min(val);
        let Some(g) = g else {
            return (T::zero(), iterations);
        };
        // Bᵀg
        let bt: Vec<T> = (0..d).map(|j| (0..d).fold(T::zero(), |a, i| a + basis[i][j] * g.0[i])).collect();
        let width = bt.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
        if width <= T::zero() || !width.is_finite() {
            break;
        }
        lower = lower.max(val - width);
        gap = best_val - lower;
        if gap <= target {
            break;
        }
        let u: Vec<T> = bt.iter().map(|x| *x / width).collect();
        let bu: Vec<T> = basis.iter().map(|row| linalg::dot(row, &u)).collect();
        for (c, s) in center.0.iter_mut().zip(&bu) {
            *c = *c - *s / (df + T::one());
        }
        for i in 0..d {
            for j in 0..d {
                basis[i][j] = scale_b * basis[i][j] + bend * bu[i] * u[j];
            }
        }
    }
    (gap, iterations)
}
