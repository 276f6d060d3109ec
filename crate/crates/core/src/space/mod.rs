//! Finite metric measure spaces, discrete gradients and test functions.
//!
//! A [`FiniteMetricSpace`] carries a dense distance matrix (the ground truth,
//! never completed by shortest paths) and a neighbor graph. The discrete
//! gradient of `f` at `i` is the largest slope to a neighbor:
//!
//! ```text
//! |∇f|(i) = max_{j ∈ N(i)} |f(i) − f(j)| / d(i, j)
//! ```
//!
//! On a 1-D lattice with nearest-neighbor edges this converges to `|f′|` under
//! refinement.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

mod dictionary;
pub mod io;

pub use dictionary::{build_dictionary, DictionaryConfig, DictionaryEntry, LipschitzDictionary, Provenance};

/// Absolute tolerance for metric and probability invariants.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// A finite metric space with a neighbor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Array2<f64>,
    neighbors: Vec<Vec<usize>>,
    coords: Option<Vec<Vec<f64>>>,
    tolerance: f64,
}

impl FiniteMetricSpace {
    /// Builds a space from an explicit distance matrix and adjacency list,
    /// checking every invariant exhaustively.
    pub fn new(dist: Array2<f64>, neighbors: Vec<Vec<usize>>) -> Result<Self> {
        Self::with_tolerance(dist, neighbors, DEFAULT_TOLERANCE)
    }

    /// As [`new`](Self::new) with a custom tolerance, for matrices produced
    /// by floating-point pipelines.
    pub fn with_tolerance(dist: Array2<f64>, neighbors: Vec<Vec<usize>>, tolerance: f64) -> Result<Self> {
        let n = dist.nrows();
        let labels = (0..n).map(|i| i.to_string()).collect();
        let space = Self { labels, dist, neighbors, coords: None, tolerance };
        space.check_shape()?;
        space.check_metric_axioms()?;
        space.check_neighbors()?;
        Ok(space)
    }

    /// Euclidean space on the given coordinates; points within
    /// `neighbor_radius` of each other are neighbors.
    pub fn from_coords(coords: Vec<Vec<f64>>, neighbor_radius: f64) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidSpace("no points".into()));
        }
        let dim = coords[0].len();
        if dim == 0 || coords.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidSpace("coordinates must share a positive dimension".into()));
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpace("non-finite coordinate".into()));
        }
        if !(neighbor_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("neighbor_radius must be > 0, got {neighbor_radius}")));
        }
        let dist = Array2::from_shape_fn((n, n), |(i, j)| {
            coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        });
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && dist[[i, j]] <= neighbor_radius).collect())
            .collect();
        let labels = (0..n).map(|i| i.to_string()).collect();
        let space = Self { labels, dist, neighbors, coords: Some(coords), tolerance: DEFAULT_TOLERANCE };
        space.check_shape()?;
        // Euclidean distances satisfy the metric axioms; only distinctness and
        // connectivity can fail.
        for i in 0..n {
            for j in 0..i {
                if !(space.dist[[i, j]] > 0.0) {
                    return Err(Error::InvalidSpace(format!("points {j} and {i} coincide")));
                }
            }
        }
        space.check_neighbors()?;
        Ok(space)
    }

    /// Uniform 1-D lattice `x_k = start + k·spacing`, `k = 0..n`, with
    /// nearest-neighbor edges.
    pub fn uniform_grid(start: f64, spacing: f64, n: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing must be > 0, got {spacing}")));
        }
        if n == 0 {
            return Err(Error::InvalidSpace("no points".into()));
        }
        let coords = (0..n).map(|k| vec![start + k as f64 * spacing]).collect();
        // Radius slightly above the spacing so rounding does not drop edges.
        Self::from_coords(coords, spacing * 1.5)
    }

    /// Symmetric lattice on `[-radius, radius]` with spacing `h`.
    pub fn symmetric_grid(radius: f64, h: f64) -> Result<Self> {
        if !(radius > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("radius and spacing must be > 0 (got {radius}, {h})")));
        }
        let half = (radius / h).round() as usize;
        Self::uniform_grid(-(half as f64) * h, h, 2 * half + 1)
    }

    /// Cycle graph on `n ≥ 3` points with unit edges and geodesic distances.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("cycle needs at least 3 points, got {n}")));
        }
        let dist = Array2::from_shape_fn((n, n), |(i, j)| {
            let k = i.abs_diff(j);
            k.min(n - k) as f64
        });
        let neighbors = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
        Self::new(dist, neighbors)
    }

    /// Two points at distance `d`, each the other's neighbor.
    pub fn two_point(d: f64) -> Result<Self> {
        let mut dist = Array2::zeros((2, 2));
        dist[[0, 1]] = d;
        dist[[1, 0]] = d;
        Self::new(dist, vec![vec![1], vec![0]])
    }

    /// Complete neighbor graph on an explicit distance matrix.
    pub fn complete(dist: Array2<f64>) -> Result<Self> {
        let n = dist.nrows();
        let neighbors = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self::new(dist, neighbors)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.dist.nrows()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[[i, j]]
    }

    pub fn dist_matrix(&self) -> &Array2<f64> {
        &self.dist
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Positions on the real line when the space is 1-D Euclidean.
    pub fn line_positions(&self) -> Option<Vec<f64>> {
        let coords = self.coords.as_ref()?;
        if coords[0].len() != 1 {
            return None;
        }
        Some(coords.iter().map(|c| c[0]).collect())
    }

    /// `(first point, spacing)` when the points form an increasing uniform
    /// 1-D lattice.
    pub fn uniform_spacing(&self) -> Option<(f64, f64)> {
        let xs = self.line_positions()?;
        if xs.len() < 2 {
            return None;
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if !(h > 0.0) {
            return None;
        }
        let ok = xs.iter().enumerate().all(|(k, x)| (x - (xs[0] + k as f64 * h)).abs() <= 1e-9 * h.max(1.0));
        ok.then_some((xs[0], h))
    }

    /// Point closest to the given 1-D position.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let xs = self.line_positions()?;
        xs.iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(i, _)| i)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.dist.nrows();
        if n == 0 {
            return Err(Error::InvalidSpace("no points".into()));
        }
        if self.dist.ncols() != n {
            return Err(Error::InvalidSpace(format!("distance matrix is {}x{}, not square", n, self.dist.ncols())));
        }
        if self.neighbors.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.neighbors.len() });
        }
        Ok(())
    }

    /// Exhaustive check of the metric axioms: zero diagonal, symmetry,
    /// positivity off the diagonal and the triangle inequality.
    pub fn check_metric_axioms(&self) -> Result<()> {
        let n = self.n();
        let tol = self.tolerance;
        let d = &self.dist;
        for i in 0..n {
            if !d[[i, i]].is_finite() || d[[i, i]].abs() > tol {
                return Err(Error::InvalidSpace(format!("dist[{i}][{i}] = {} is not 0", d[[i, i]])));
            }
            for j in 0..i {
                let (a, b) = (d[[i, j]], d[[j, i]]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidSpace(format!("dist[{i}][{j}] is not finite")));
                }
                if (a - b).abs() > tol {
                    return Err(Error::InvalidSpace(format!("dist not symmetric at ({i},{j}): {a} vs {b}")));
                }
                if !(a > 0.0) {
                    return Err(Error::InvalidSpace(format!("dist[{i}][{j}] = {a} must be > 0")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = d[[i, j]];
                for k in 0..n {
                    if d[[i, k]] > dij + d[[j, k]] + tol {
                        return Err(Error::InvalidSpace(format!(
                            "triangle inequality fails: d({i},{k}) = {} > d({i},{j}) + d({j},{k}) = {}",
                            d[[i, k]],
                            dij + d[[j, k]]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_neighbors(&self) -> Result<()> {
        let n = self.n();
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                if j >= n {
                    return Err(Error::InvalidSpace(format!("neighbor index {j} of point {i} out of range")));
                }
                if j == i {
                    return Err(Error::InvalidSpace(format!("point {i} lists itself as a neighbor")));
                }
                if !self.neighbors[j].contains(&i) {
                    return Err(Error::InvalidSpace(format!("neighbor graph not symmetric: {i} -> {j}")));
                }
                if !(self.dist[[i, j]] > 0.0) {
                    return Err(Error::InvalidSpace(format!("edge ({i},{j}) has zero length")));
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidSpace(format!("neighbor graph is disconnected (point {lost} unreachable)")));
        }
        Ok(())
    }

    pub fn expect_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: len });
        }
        Ok(())
    }
}

/// Nonnegative weights over the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Any finite nonnegative weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {i} = {w} is not a finite nonnegative number")));
        }
        Ok(Self { weights })
    }

    /// A probability measure: nonnegative weights summing to 1 within
    /// [`DEFAULT_TOLERANCE`].
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        Self::probability_with_tolerance(weights, DEFAULT_TOLERANCE)
    }

    pub fn probability_with_tolerance(weights: Vec<f64>, tol: f64) -> Result<Self> {
        let m = Self::new(weights)?;
        let total = m.total_mass();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidMeasure(format!("total mass {total} differs from 1 by more than {tol:e}")));
        }
        Ok(m)
    }

    /// Rescales nonnegative weights to total mass 1.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(weights)?;
        let total = m.total_mass();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        Ok(Self { weights: m.weights.into_iter().map(|w| w / total).collect() })
    }

    /// Point mass `δ_i` on `n` points.
    pub fn dirac(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::DimensionMismatch { expected: n, found: i + 1 });
        }
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Ok(Self { weights: w })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        Ok(Self { weights: vec![1.0 / n as f64; n] })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: f.len() });
        }
        Ok(self.weights.iter().zip(f).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * v).sum())
    }

    pub(crate) fn same_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        Ok(())
    }
}

/// Values of a function on the points together with a declared Lipschitz
/// bound on neighbor pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    values: Vec<f64>,
    lip_bound: f64,
}

impl TestFunction {
    /// Checks `|f(i) − f(j)| ≤ lip_bound · d(i,j)` on every neighbor pair.
    pub fn new(space: &FiniteMetricSpace, values: Vec<f64>, lip_bound: f64) -> Result<Self> {
        space.expect_len(values.len())?;
        if !(lip_bound >= 0.0) || !lip_bound.is_finite() {
            return Err(Error::InvalidFunction(format!("lip_bound must be finite and >= 0, got {lip_bound}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction("non-finite value".into()));
        }
        let f = Self { values, lip_bound };
        f.check(space)?;
        Ok(f)
    }

    /// Wraps values with the tightest neighbor-pair Lipschitz bound.
    pub fn with_neighbor_lipschitz(space: &FiniteMetricSpace, values: Vec<f64>) -> Result<Self> {
        space.expect_len(values.len())?;
        let lip = neighbor_lipschitz(space, &values);
        Self::new(space, values, lip)
    }

    pub fn check(&self, space: &FiniteMetricSpace) -> Result<()> {
        space.expect_len(self.values.len())?;
        let slack = space.tolerance().max(1e-12);
        for i in 0..space.n() {
            for &j in space.neighbors(i) {
                let diff = (self.values[i] - self.values[j]).abs();
                let bound = self.lip_bound * space.dist(i, j);
                if diff > bound + slack * (1.0 + bound) {
                    return Err(Error::InvalidFunction(format!(
                        "|f({i}) - f({j})| = {diff} exceeds {} * d = {bound}",
                        self.lip_bound
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    /// Lipschitz constant over all pairs of points (not only neighbors).
    pub fn global_lipschitz(&self, space: &FiniteMetricSpace) -> f64 {
        global_lipschitz(space, &self.values)
    }
}

/// Largest slope over neighbor pairs.
pub fn neighbor_lipschitz(space: &FiniteMetricSpace, f: &[f64]) -> f64 {
    let mut lip = 0.0f64;
    for i in 0..space.n() {
        for &j in space.neighbors(i) {
            lip = lip.max((f[i] - f[j]).abs() / space.dist(i, j));
        }
    }
    lip
}

/// Largest slope over all pairs.
pub fn global_lipschitz(space: &FiniteMetricSpace, f: &[f64]) -> f64 {
    let n = space.n();
    let mut lip = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            lip = lip.max((f[i] - f[j]).abs() / space.dist(i, j));
        }
    }
    lip
}

/// `|∇f|(i) = max_{j ∈ N(i)} |f(i) − f(j)| / d(i,j)`.
pub fn discrete_gradient(space: &FiniteMetricSpace, f: &[f64]) -> Result<Vec<f64>> {
    space.expect_len(f.len())?;
    Ok(gradient_unchecked(space, f))
}

pub(crate) fn gradient_unchecked(space: &FiniteMetricSpace, f: &[f64]) -> Vec<f64> {
    (0..space.n()).map(|i| gradient_at(space, f, i)).collect()
}

#[inline]
pub(crate) fn gradient_at(space: &FiniteMetricSpace, f: &[f64], i: usize) -> f64 {
    space
        .neighbors(i)
        .iter()
        .map(|&j| (f[i] - f[j]).abs() / space.dist(i, j))
        .fold(0.0, f64::max)
}

/// Pointwise residuals of the chain rule `|∇(φ∘f)| = |φ′(f)|·|∇f|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRuleReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

impl ChainRuleReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Compares `|∇(φ∘f)|(i)` with `|φ′(f(i))|·|∇f|(i)` at every point.
///
/// On a lattice of spacing `h` the residual is `O(h)` for smooth `φ` and `f`.
pub fn chain_rule_check<F, D>(space: &FiniteMetricSpace, f: &[f64], phi: F, dphi: D) -> Result<ChainRuleReport>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let grad_f = discrete_gradient(space, f)?;
    let composed: Vec<f64> = f.iter().map(|&v| phi(v)).collect();
    let grad_c = gradient_unchecked(space, &composed);
    let residuals: Vec<f64> = (0..space.n())
        .map(|i| (grad_c[i] - dphi(f[i]).abs() * grad_f[i]).abs())
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ChainRuleReport { residuals, max_residual })
}
