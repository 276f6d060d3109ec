//! Markov kernels on finite spaces and the concrete semigroups used by the
//! harnesses.
//!
//! A kernel acts on functions from the right, `(Pf)(i) = Σ_j P[i][j] f(j)`, and
//! on measures from the left, `(μP)(j) = Σ_i μ(i) P[i][j]`.
//!
//! Gaussian constructors work on a uniform 1-D lattice. Rows are evaluated in
//! log space, truncated to the lattice and renormalized; the Gaussian mass
//! that fell outside the lattice hull before renormalization is kept per row
//! as [`MarkovKernel::truncation_loss`].

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::space::{DiscreteMeasure, FiniteMetricSpace};
use crate::{Error, Result};

/// Row-sum tolerance for kernels.
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    p: Array2<f64>,
    truncation_loss: Option<Vec<f64>>,
}

impl MarkovKernel {
    /// Validates nonnegativity and unit row sums (within 1e−10).
    pub fn new(p: Array2<f64>) -> Result<Self> {
        let n = p.nrows();
        if n == 0 || p.ncols() != n {
            return Err(Error::InvalidKernel(format!("matrix is {}x{}, expected square and nonempty", n, p.ncols())));
        }
        for (i, row) in p.rows().into_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidKernel(format!("entry ({i},{j}) = {} is not a finite nonnegative number", row[j])));
            }
            let s = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidKernel(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { p, truncation_loss: None })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(Array2::eye(n))
    }

    /// Every row equal to `row` (one-step mixing to a fixed measure).
    pub fn constant_rows(row: &DiscreteMeasure) -> Result<Self> {
        let n = row.len();
        Self::new(Array2::from_shape_fn((n, n), |(_, j)| row.weights()[j]))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::constant_rows(&DiscreteMeasure::uniform(n)?)
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.p[[i, j]]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.p.as_slice().expect("kernel storage is contiguous")[i * n..(i + 1) * n]
    }

    /// `δ_i P` as a measure.
    pub fn row_measure(&self, i: usize) -> DiscreteMeasure {
        DiscreteMeasure::new(self.row(i).to_vec()).expect("kernel rows are nonnegative")
    }

    /// Gaussian mass lost to truncation per row, for lattice constructors.
    pub fn truncation_loss(&self) -> Option<&[f64]> {
        self.truncation_loss.as_deref()
    }

    /// For a kernel read back from a file on a 1-D lattice: records each
    /// row's mass in the two end cells as its truncation loss. For Gaussian
    /// rows this is within a small factor of the mass lost to the boundary;
    /// kernels that are not lattices are returned unchanged.
    pub fn with_end_cell_loss(mut self, space: &FiniteMetricSpace) -> Result<Self> {
        space.expect_len(self.n())?;
        if space.uniform_spacing().is_some() {
            let n = self.n();
            self.truncation_loss = Some((0..n).map(|i| self.p[[i, 0]] + if n > 1 { self.p[[i, n - 1]] } else { 0.0 }).collect());
        }
        Ok(self)
    }

    /// Forgets truncation metadata, so every row counts as well resolved.
    pub fn without_truncation_loss(mut self) -> Self {
        self.truncation_loss = None;
        self
    }

    /// Rows whose truncation loss is at most `threshold` (all rows when the
    /// kernel was not built by a truncating constructor).
    pub fn well_resolved_rows(&self, threshold: f64) -> Vec<usize> {
        match &self.truncation_loss {
            Some(loss) => (0..self.n()).filter(|&i| loss[i] <= threshold).collect(),
            None => (0..self.n()).collect(),
        }
    }

    /// `Pf`.
    pub fn apply_to_function(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: f.len() });
        }
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let v = Array1::from(f.to_vec());
        self.p.dot(&v).to_vec()
    }

    /// `μP`.
    pub fn apply_to_measure(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if mu.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: mu.len() });
        }
        let m = Array1::from(mu.weights().to_vec());
        let out = m.dot(&self.p);
        // Clip rounding below zero; weights of μP are sums of products of
        // nonnegative numbers.
        DiscreteMeasure::new(out.iter().map(|v| v.max(0.0)).collect())
    }

    /// The kernel `PQ` (first `self`, then `other`).
    pub fn compose(&self, other: &MarkovKernel) -> Result<MarkovKernel> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        let p = self.p.dot(&other.p);
        Ok(MarkovKernel { p, truncation_loss: None })
    }

    /// Largest total-variation distance between corresponding rows.
    pub fn max_row_tv(&self, other: &MarkovKernel) -> Result<f64> {
        self.max_row_tv_over(other, &(0..self.n()).collect::<Vec<_>>())
    }

    pub fn max_row_tv_over(&self, other: &MarkovKernel, rows: &[usize]) -> Result<f64> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        Ok(rows
            .iter()
            .map(|&i| 0.5 * self.row(i).iter().zip(other.row(i)).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max))
    }
}

fn require_lattice(grid: &FiniteMetricSpace) -> Result<(Vec<f64>, f64)> {
    let (_, h) = grid
        .uniform_spacing()
        .ok_or_else(|| Error::InvalidSpace("expected a uniform 1-D lattice".into()))?;
    Ok((grid.line_positions().expect("lattice has positions"), h))
}

/// Discretized Gaussian rows with the given means and a common variance.
fn gaussian_rows(xs: &[f64], h: f64, means: &[f64], variance: f64) -> MarkovKernel {
    let n = xs.len();
    let mut p = Array2::zeros((means.len(), n));
    let mut loss = Vec::with_capacity(n);
    let sd = variance.sqrt();
    let lo = xs[0] - 0.5 * h;
    let hi = xs[n - 1] + 0.5 * h;
    for (i, &m) in means.iter().enumerate() {
        let expo: Vec<f64> = xs.iter().map(|x| -(x - m) * (x - m) / (2.0 * variance)).collect();
        let top = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (j, e) in expo.iter().enumerate() {
            let w = (e - top).exp();
            p[[i, j]] = w;
            s += w;
        }
        for j in 0..n {
            p[[i, j]] /= s;
        }
        let outside = 0.5 * libm::erfc((m - lo) / (sd * std::f64::consts::SQRT_2))
            + 0.5 * libm::erfc((hi - m) / (sd * std::f64::consts::SQRT_2));
        loss.push(outside);
    }
    MarkovKernel { p, truncation_loss: Some(loss) }
}

/// Flat heat kernel: row `i` is the Gaussian with mean `x_i` and variance
/// `2t` (generator `Δ`), restricted to the lattice and renormalized.
pub fn heat_kernel_grid(grid: &FiniteMetricSpace, t: f64) -> Result<MarkovKernel> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be > 0, got {t}")));
    }
    let (xs, h) = require_lattice(grid)?;
    Ok(gaussian_rows(&xs, h, &xs, 2.0 * t))
}

/// Single discretized Gaussian `N(mean, variance)` on the lattice.
pub fn gaussian_measure_grid(grid: &FiniteMetricSpace, mean: f64, variance: f64) -> Result<DiscreteMeasure> {
    if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite mean and variance > 0, got N({mean}, {variance})")));
    }
    let (xs, h) = require_lattice(grid)?;
    let k = gaussian_rows(&xs, h, &[mean], variance);
    DiscreteMeasure::new(k.p.row(0).to_vec())
}

/// Ornstein–Uhlenbeck kernel for `U(x) = a x²/2`: row `i` is the Gaussian
/// with mean `e^{-at} x_i` and variance `(1 − e^{-2at})/a` (Mehler formula for
/// the generator `Δ − a x·∇`).
pub fn ou_kernel_grid(grid: &FiniteMetricSpace, t: f64, a: f64) -> Result<MarkovKernel> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be > 0, got {t}")));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("convexity rate must be > 0, got {a}")));
    }
    let (xs, h) = require_lattice(grid)?;
    let decay = (-a * t).exp();
    let means: Vec<f64> = xs.iter().map(|x| decay * x).collect();
    let variance = -(-2.0 * a * t).exp_m1() / a;
    Ok(gaussian_rows(&xs, h, &means, variance))
}

/// Histogram of 1-D samples over the cells of a lattice (cell-midpoint
/// binning). Returns the normalized masses and the number of samples that
/// fell outside the lattice hull and were clamped to an end cell.
pub fn bin_samples(grid: &FiniteMetricSpace, samples: &[f64]) -> Result<(DiscreteMeasure, usize)> {
    let (xs, h) = require_lattice(grid)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples { row: 0 });
    }
    let n = xs.len();
    let lo = xs[0] - 0.5 * h;
    let hi = xs[n - 1] + 0.5 * h;
    let mut counts = vec![0u64; n];
    let mut clamped = 0usize;
    for &s in samples {
        if !(s >= lo && s <= hi) {
            clamped += 1;
        }
        let k = ((s - xs[0]) / h).round();
        let k = if k.is_nan() { 0.0 } else { k.clamp(0.0, (n - 1) as f64) };
        counts[k as usize] += 1;
    }
    let total = samples.len() as f64;
    let measure = DiscreteMeasure::new(counts.iter().map(|&c| c as f64 / total).collect())?;
    Ok((measure, clamped))
}

#[derive(Debug, Clone)]
pub struct EmpiricalKernel {
    pub kernel: MarkovKernel,
    /// Samples outside the lattice hull, clamped to the end cells.
    pub clamped: usize,
}

/// Kernel whose row `i` is the normalized histogram of the endpoint samples
/// started from lattice point `i`.
pub fn empirical_kernel(samples: &[Vec<f64>], grid: &FiniteMetricSpace) -> Result<EmpiricalKernel> {
    let n = grid.n();
    if samples.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: samples.len() });
    }
    let mut p = Array2::zeros((n, n));
    let mut clamped = 0;
    for (i, row) in samples.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::EmptySamples { row: i });
        }
        let (m, c) = bin_samples(grid, row)?;
        clamped += c;
        for (j, w) in m.weights().iter().enumerate() {
            p[[i, j]] = *w;
        }
    }
    Ok(EmpiricalKernel { kernel: MarkovKernel::new(p)?, clamped })
}

/// Reads a kernel file: `n` lines of `n` comma-separated reals.
pub fn parse_kernel_csv(text: &str) -> Result<MarkovKernel> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("kernel line {}: {e}", lineno + 1)))?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::InvalidKernel(format!("row {i} has {} entries, expected {n}", rows[i].len())));
    }
    MarkovKernel::new(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

pub fn kernel_to_csv(kernel: &MarkovKernel) -> String {
    let mut out = String::new();
    for i in 0..kernel.n() {
        let row: Vec<String> = kernel.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_kernel(path: impl AsRef<Path>) -> Result<MarkovKernel> {
    parse_kernel_csv(&std::fs::read_to_string(path)?)
}
