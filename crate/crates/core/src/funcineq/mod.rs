//! Estimators of the reverse functional-inequality constants of a kernel,
//! and harnesses that exercise the inequalities they control.
//!
//! Every estimate is a supremum over a finite search (dictionary plus a
//! local refinement), hence a lower bound on the true constant.

mod harness;

pub use harness::{
    eti_harness, hkc_harness, hpi_check, ihi_check, increment_lemma_check, integrated_harnack, kuwada_harness, sample_measure_pairs,
    sample_point_pairs, whi_check, HarnessReport, MeasurePair, PointPair, SampleConfig, Tolerance, Trial,
};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::markov::MarkovKernel;
use crate::space::{gradient_at, gradient_unchecked, FiniteMetricSpace, LipschitzDictionary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKind {
    /// `|∇Pf|² / (P(f²) − (Pf)²)`.
    Rpi,
    /// `|∇Pg|² / P(g²)` with `g = f − Pf(x)`.
    RpiWeak,
    /// `Pf·|∇ln Pf|² / (P(f ln f) − Pf ln Pf)` over positive `f`.
    Rlsi,
    /// `|∇Pf|² / P(|∇f|²)`.
    Gradient,
}

impl ConstantKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstantKind::Rpi => "rpi",
            ConstantKind::RpiWeak => "rpi-weak",
            ConstantKind::Rlsi => "rlsi",
            ConstantKind::Gradient => "grad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Relative denominator threshold; see [`ratio_at`].
    pub exclusion: f64,
    /// Rows (and their neighbors) with more truncated mass than this are
    /// skipped, so that lattice edge effects do not pollute the supremum.
    pub interior_threshold: f64,
    /// Number of best dictionary seeds refined by coordinate ascent.
    pub refine_seeds: usize,
    pub refine_passes: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { exclusion: 1e-10, interior_threshold: 1e-9, refine_seeds: 4, refine_passes: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub f: Vec<f64>,
    pub point: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub dictionary_size: usize,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub kind: ConstantKind,
    /// `None` when every denominator was excluded.
    pub value: Option<f64>,
    pub witness: Option<Witness>,
    pub excluded_count: usize,
    pub evaluated: usize,
    /// Supremum over the dictionary alone, before refinement.
    pub dictionary_value: Option<f64>,
    /// Dictionary-only estimate against dictionary prefix size.
    pub convergence: Vec<ConvergencePoint>,
}

impl ConstantEstimate {
    /// Re-evaluates the ratio at the witness.
    pub fn replay(&self, kernel: &MarkovKernel, space: &FiniteMetricSpace) -> Result<Option<f64>> {
        match &self.witness {
            None => Ok(None),
            Some(w) => Ok(ratio_at(self.kind, kernel, space, &w.f, w.point, 0.0)?.map(|(n, d)| n / d)),
        }
    }

    pub fn require(&self) -> Result<f64> {
        self.value.ok_or_else(|| Error::Degenerate(format!("every {} denominator was below the exclusion threshold", self.kind.name())))
    }
}

fn check_sizes(kernel: &MarkovKernel, space: &FiniteMetricSpace) -> Result<()> {
    space.expect_len(kernel.n())
}

fn osc(f: &[f64]) -> f64 {
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn dot(row: &[f64], f: &[f64]) -> f64 {
    row.iter().zip(f).map(|(p, v)| p * v).sum()
}

/// Scale of the denominator below which a ratio is excluded.
fn exclusion_scale(kind: ConstantKind, space: &FiniteMetricSpace, f: &[f64]) -> f64 {
    match kind {
        ConstantKind::Rpi | ConstantKind::RpiWeak => osc(f).powi(2),
        // Entropy behaves like Var/(2f).
        ConstantKind::Rlsi => {
            let max = f.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                osc(f).powi(2) / max
            } else {
                0.0
            }
        }
        ConstantKind::Gradient => gradient_unchecked(space, f).into_iter().fold(0.0, f64::max).powi(2),
    }
}

fn grad_of_values(space: &FiniteMetricSpace, x: usize, vals: impl Fn(usize) -> f64) -> f64 {
    let vx = vals(x);
    space.neighbors(x).iter().map(|&j| (vx - vals(j)).abs() / space.dist(x, j)).fold(0.0, f64::max)
}

/// Numerator and denominator of the ratio of `kind` for `f` at `x`, or
/// `None` when the denominator is below `exclusion` times the natural scale
/// of `f` (oscillation squared for RPI).
pub fn ratio_at(kind: ConstantKind, kernel: &MarkovKernel, space: &FiniteMetricSpace, f: &[f64], x: usize, exclusion: f64) -> Result<Option<(f64, f64)>> {
    check_sizes(kernel, space)?;
    space.expect_len(f.len())?;
    if x >= kernel.n() {
        return Err(Error::InvalidParameter(format!("point {x} out of range")));
    }
    if kind == ConstantKind::Rlsi && f.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidFunction("rLSI ratio needs a positive function".into()));
    }
    let threshold = exclusion * exclusion_scale(kind, space, f);
    let (num, den) = ratio_raw(kind, kernel, space, f, x);
    Ok((den > threshold && den > 0.0).then_some((num, den)))
}

fn ratio_raw(kind: ConstantKind, kernel: &MarkovKernel, space: &FiniteMetricSpace, f: &[f64], x: usize) -> (f64, f64) {
    let pf = |i: usize| dot(kernel.row(i), f);
    let row = kernel.row(x);
    match kind {
        ConstantKind::Rpi => {
            let m = pf(x);
            let p2: f64 = row.iter().zip(f).map(|(p, v)| p * v * v).sum();
            let g = grad_of_values(space, x, pf);
            (g * g, p2 - m * m)
        }
        ConstantKind::RpiWeak => {
            let c = pf(x);
            let g_fn: Vec<f64> = f.iter().map(|v| v - c).collect();
            let g = grad_of_values(space, x, |i| dot(kernel.row(i), &g_fn));
            let p2: f64 = row.iter().zip(&g_fn).map(|(p, v)| p * v * v).sum();
            (g * g, p2)
        }
        ConstantKind::Rlsi => {
            let m = pf(x);
            let ent: f64 = row.iter().zip(f).filter(|(p, _)| **p > 0.0).map(|(p, v)| p * v * (v / m).ln()).sum();
            let g = grad_of_values(space, x, |i| pf(i).ln());
            (m * g * g, ent)
        }
        ConstantKind::Gradient => {
            let g = grad_of_values(space, x, pf);
            let den: f64 = row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| p * gradient_at(space, f, k).powi(2)).sum();
            (g * g, den)
        }
    }
}

/// Rows that are well resolved together with all their neighbors.
pub fn interior_points(kernel: &MarkovKernel, space: &FiniteMetricSpace, threshold: f64) -> Vec<usize> {
    let ok: Vec<bool> = {
        let mut v = vec![false; kernel.n()];
        for i in kernel.well_resolved_rows(threshold) {
            v[i] = true;
        }
        v
    };
    (0..kernel.n()).filter(|&i| ok[i] && space.neighbors(i).iter().all(|&j| ok[j])).collect()
}

/// Dictionary function transformed for the estimator of `kind`.
fn candidate(kind: ConstantKind, f: &[f64]) -> Vec<f64> {
    match kind {
        ConstantKind::Rlsi => {
            let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            f.iter().map(|v| (v - max).exp()).collect()
        }
        _ => f.to_vec(),
    }
}

struct Scan {
    best: Vec<(f64, usize)>,
    excluded: usize,
    evaluated: usize,
}

/// Screens every (dictionary entry, interior point) pair with batched
/// kernel products, returning the best ratio and point per entry.
fn scan(kind: ConstantKind, kernel: &MarkovKernel, space: &FiniteMetricSpace, cands: &[Vec<f64>], points: &[usize], exclusion: f64) -> Scan {
    let n = kernel.n();
    let m = cands.len();
    let p = kernel.matrix();
    let fmat = Array2::from_shape_fn((n, m), |(i, k)| cands[k][i]);
    let pf = p.dot(&fmat);
    let second = match kind {
        ConstantKind::Rpi | ConstantKind::RpiWeak => p.dot(&fmat.mapv(|v| v * v)),
        ConstantKind::Rlsi => p.dot(&fmat.mapv(|v| if v > 0.0 { v * v.ln() } else { 0.0 })),
        ConstantKind::Gradient => {
            let mut g = Array2::zeros((n, m));
            for (k, c) in cands.iter().enumerate() {
                for (i, v) in gradient_unchecked(space, c).into_iter().enumerate() {
                    g[[i, k]] = v * v;
                }
            }
            p.dot(&g)
        }
    };
    let results: Vec<(f64, usize, usize, usize)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let threshold = exclusion * exclusion_scale(kind, space, &cands[k]);
            let col = |i: usize| pf[[i, k]];
            let (mut best, mut arg, mut excl, mut eval) = (f64::NEG_INFINITY, usize::MAX, 0usize, 0usize);
            for &x in points {
                let (num, den) = match kind {
                    ConstantKind::Rpi | ConstantKind::RpiWeak => {
                        let g = grad_of_values(space, x, col);
                        (g * g, second[[x, k]] - col(x).powi(2))
                    }
                    ConstantKind::Rlsi => {
                        let m = col(x);
                        let g = grad_of_values(space, x, |i| col(i).ln());
                        (m * g * g, second[[x, k]] - m * m.ln())
                    }
                    ConstantKind::Gradient => {
                        let g = grad_of_values(space, x, col);
                        (g * g, second[[x, k]])
                    }
                };
                if !(den > threshold) || den <= 0.0 {
                    excl += 1;
                    continue;
                }
                eval += 1;
                let r = num / den;
                if r > best {
                    best = r;
                    arg = x;
                }
            }
            (best, arg, excl, eval)
        })
        .collect();
    Scan {
        best: results.iter().map(|r| (r.0, r.1)).collect(),
        excluded: results.iter().map(|r| r.2).sum(),
        evaluated: results.iter().map(|r| r.3).sum(),
    }
}

/// Greedy coordinate ascent on the ratio at a fixed point. For rLSI the
/// ascent runs on `ln f` to keep `f` positive.
fn refine(kind: ConstantKind, kernel: &MarkovKernel, space: &FiniteMetricSpace, seed: &[f64], x: usize, config: &EstimatorConfig) -> (Vec<f64>, f64) {
    let n = kernel.n();
    let mut relevant = vec![false; n];
    let rows: Vec<usize> = std::iter::once(x).chain(space.neighbors(x).iter().copied()).collect();
    for &r in &rows {
        let row = kernel.row(r);
        let top = row.iter().copied().fold(0.0, f64::max);
        for (k, &p) in row.iter().enumerate() {
            if p > 1e-15 * top {
                relevant[k] = true;
                if kind == ConstantKind::Gradient {
                    space.neighbors(k).iter().for_each(|&j| relevant[j] = true);
                }
            }
        }
    }
    let coords: Vec<usize> = (0..n).filter(|&k| relevant[k]).collect();
    let to_f = |g: &[f64]| -> Vec<f64> {
        match kind {
            ConstantKind::Rlsi => g.iter().map(|v| v.exp()).collect(),
            _ => g.to_vec(),
        }
    };
    let score = |g: &[f64]| -> f64 {
        let f = to_f(g);
        let threshold = config.exclusion * exclusion_scale(kind, space, &f);
        let (num, den) = ratio_raw(kind, kernel, space, &f, x);
        if den > threshold && den > 0.0 && num.is_finite() {
            num / den
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut g: Vec<f64> = match kind {
        ConstantKind::Rlsi => seed.iter().map(|v| v.ln()).collect(),
        _ => seed.to_vec(),
    };
    let mut best = score(&g);
    let scale = osc(&g).max(1e-12);
    for _ in 0..config.refine_passes {
        let before = best;
        for step in [0.1, 0.01, 0.001] {
            for &k in &coords {
                for sign in [1.0, -1.0] {
                    let old = g[k];
                    g[k] = old + sign * step * scale;
                    let s = score(&g);
                    if s > best {
                        best = s;
                    } else {
                        g[k] = old;
                    }
                }
            }
        }
        if best <= before * (1.0 + 1e-12) {
            break;
        }
    }
    (to_f(&g), best)
}

fn convergence_curve(best: &[(f64, usize)]) -> Vec<ConvergencePoint> {
    let m = best.len();
    let mut sizes: Vec<usize> = std::iter::successors(Some(1usize), |s| s.checked_mul(2)).take_while(|&s| s < m).collect();
    sizes.push(m);
    let mut running = Vec::with_capacity(m);
    let mut cur = f64::NEG_INFINITY;
    for (r, _) in best {
        cur = cur.max(*r);
        running.push(cur);
    }
    sizes
        .into_iter()
        .filter(|&s| s > 0)
        .map(|s| ConvergencePoint { dictionary_size: s, value: running[s - 1].is_finite().then_some(running[s - 1]) })
        .collect()
}

/// Supremum of the ratio of `kind` over dictionary functions (transformed
/// by `exp` for rLSI) and interior points, refined by coordinate ascent
/// from the best seeds. The reported value is the exact ratio at the
/// returned witness.
pub fn estimate_constant(
    kind: ConstantKind,
    kernel: &MarkovKernel,
    space: &FiniteMetricSpace,
    dictionary: &LipschitzDictionary,
    config: &EstimatorConfig,
) -> Result<ConstantEstimate> {
    check_sizes(kernel, space)?;
    dictionary.validate(space)?;
    let points = interior_points(kernel, space, config.interior_threshold);
    let cands: Vec<Vec<f64>> = dictionary.entries().iter().map(|e| candidate(kind, e.function.values())).collect();
    let labels: Vec<String> = dictionary.entries().iter().map(|e| format!("{:?}", e.provenance)).collect();
    let sc = scan(kind, kernel, space, &cands, &points, config.exclusion);
    let convergence = convergence_curve(&sc.best);

    let mut order: Vec<usize> = (0..cands.len()).filter(|&k| sc.best[k].0.is_finite()).collect();
    order.sort_by(|&a, &b| sc.best[b].0.total_cmp(&sc.best[a].0).then(a.cmp(&b)));
    if order.is_empty() {
        return Ok(ConstantEstimate {
            kind,
            value: None,
            witness: None,
            excluded_count: sc.excluded,
            evaluated: sc.evaluated,
            dictionary_value: None,
            convergence,
        });
    }
    let best_k = order[0];
    let mut witness = Witness { f: cands[best_k].clone(), point: sc.best[best_k].1, label: labels[best_k].clone() };
    let mut value = exact(kind, kernel, space, &witness, config.exclusion).unwrap_or(sc.best[best_k].0);
    let dictionary_value = Some(value);

    let refined: Vec<(Vec<f64>, f64, usize, usize)> = order
        .iter()
        .take(config.refine_seeds)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|&k| {
            let x = sc.best[k].1;
            let (f, r) = refine(kind, kernel, space, &cands[k], x, config);
            (f, r, x, k)
        })
        .collect();
    for (f, r, x, k) in refined {
        if r > value {
            let w = Witness { f, point: x, label: format!("refined from {}", labels[k]) };
            if let Some(v) = exact(kind, kernel, space, &w, config.exclusion) {
                if v > value {
                    value = v;
                    witness = w;
                }
            }
        }
    }
    Ok(ConstantEstimate {
        kind,
        value: Some(value),
        witness: Some(witness),
        excluded_count: sc.excluded,
        evaluated: sc.evaluated,
        dictionary_value,
        convergence,
    })
}

fn exact(kind: ConstantKind, kernel: &MarkovKernel, space: &FiniteMetricSpace, w: &Witness, exclusion: f64) -> Option<f64> {
    ratio_at(kind, kernel, space, &w.f, w.point, exclusion).ok().flatten().map(|(n, d)| n / d)
}

pub fn rpi_constant(kernel: &MarkovKernel, space: &FiniteMetricSpace, dictionary: &LipschitzDictionary) -> Result<ConstantEstimate> {
    estimate_constant(ConstantKind::Rpi, kernel, space, dictionary, &EstimatorConfig::default())
}

pub fn rlsi_constant(kernel: &MarkovKernel, space: &FiniteMetricSpace, dictionary: &LipschitzDictionary) -> Result<ConstantEstimate> {
    estimate_constant(ConstantKind::Rlsi, kernel, space, dictionary, &EstimatorConfig::default())
}

pub fn gradient_bound_constant(kernel: &MarkovKernel, space: &FiniteMetricSpace, dictionary: &LipschitzDictionary) -> Result<ConstantEstimate> {
    estimate_constant(ConstantKind::Gradient, kernel, space, dictionary, &EstimatorConfig::default())
}

/// Largest ratio `|∇Pf|²/(P(f²) − (Pf)²)` against the best rLSI-type ratio
/// along `f = 1 + εg`, for the self-improvement check RPI ≤ rLSI/2.
pub fn rlsi_linearization(kernel: &MarkovKernel, space: &FiniteMetricSpace, g: &[f64], x: usize, eps: f64) -> Result<Option<f64>> {
    let f: Vec<f64> = g.iter().map(|v| 1.0 + eps * v).collect();
    Ok(ratio_at(ConstantKind::Rlsi, kernel, space, &f, x, 0.0)?.map(|(n, d)| n / d))
}
