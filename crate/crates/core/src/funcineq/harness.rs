//! Randomized and exhaustive checks of the inequalities controlled by the
//! estimated constants. Every check is an exact finite-sum evaluation, except
//! the HK link of [`hkc_harness`] whose solver gap is added to the allowance.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::interior_points;
use crate::divergence::{renyi_t0b, t_ab_upper, t_point_mass_bounds, DivParams};
use crate::markov::MarkovKernel;
use crate::numeric::logsumexp;
use crate::space::{DiscreteMeasure, FiniteMetricSpace, LipschitzDictionary};
use crate::transport::{hellinger_sq, w_ab_detailed, wasserstein2_sq, WParams};
use crate::{Error, Result};

pub type PointPair = (usize, usize);

/// Allowed excess `abs + rel·|rhs|` of a check `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn rel(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub trials: usize,
    pub seed: u64,
    pub tol: Tolerance,
    /// Points are drawn from rows with at most this truncated mass.
    pub interior_threshold: f64,
}

impl SampleConfig {
    pub fn new(trials: usize, seed: u64, tol: f64) -> Self {
        Self { trials, seed, tol: Tolerance::abs(tol), interior_threshold: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub lhs: f64,
    pub rhs: f64,
    /// Extra slack beyond the stated tolerance (solver gaps).
    pub extra: f64,
    pub inputs: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub id: String,
    pub trials: usize,
    pub tol: Tolerance,
    /// Largest `lhs − rhs` over all trials (negative when every check had
    /// slack).
    pub max_violation: f64,
    /// Largest `(lhs − rhs − allowance)`; the report passes iff this is ≤ 0.
    pub max_excess: f64,
    pub worst_case: Option<serde_json::Value>,
    pub skipped: usize,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl HarnessReport {
    pub fn from_trials(id: &str, tol: Tolerance, trials: Vec<Trial>, skipped: usize, notes: Vec<String>) -> Self {
        let mut max_violation = f64::NEG_INFINITY;
        let mut max_excess = f64::NEG_INFINITY;
        let mut worst = None;
        for t in &trials {
            let v = t.lhs - t.rhs;
            max_violation = max_violation.max(v);
            let allowance = tol.abs + tol.rel * t.rhs.abs() + t.extra;
            let excess = if v.is_nan() { f64::INFINITY } else { v - allowance };
            if excess > max_excess || worst.is_none() {
                max_excess = excess;
                let mut w = t.inputs.clone();
                if let Some(obj) = w.as_object_mut() {
                    obj.insert("lhs".into(), json!(t.lhs));
                    obj.insert("rhs".into(), json!(t.rhs));
                }
                worst = Some(w);
            }
        }
        let n = trials.len();
        Self {
            id: id.into(),
            trials: n,
            tol,
            max_violation: if n == 0 { 0.0 } else { max_violation },
            max_excess: if n == 0 { 0.0 } else { max_excess },
            worst_case: worst,
            skipped,
            pass: n == 0 || max_excess <= 0.0,
            notes,
        }
    }
}

fn check_kernel(kernel: &MarkovKernel, space: &FiniteMetricSpace, constant: Option<f64>) -> Result<()> {
    space.expect_len(kernel.n())?;
    if let Some(c) = constant {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("constant must be > 0, got {c}")));
        }
    }
    Ok(())
}

fn dot(row: &[f64], f: &[f64]) -> f64 {
    row.iter().zip(f).map(|(p, v)| p * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Shape {
    Shifted,
    Ramp,
    Exponential,
    Indicator,
    Noise,
    Signed,
}

/// Test function drawn from the dictionary through a random shape.
fn sample_function(rng: &mut ChaCha8Rng, dictionary: &LipschitzDictionary, n: usize, nonnegative: bool) -> (Vec<f64>, serde_json::Value) {
    let shapes: &[Shape] = if nonnegative {
        &[Shape::Shifted, Shape::Ramp, Shape::Ramp, Shape::Exponential, Shape::Indicator, Shape::Noise]
    } else {
        &[Shape::Signed, Shape::Signed, Shape::Exponential, Shape::Ramp, Shape::Noise]
    };
    let shape = *shapes.choose(rng).expect("nonempty");
    let entry = if dictionary.is_empty() { None } else { Some(rng.random_range(0..dictionary.len())) };
    let base: Vec<f64> = match entry {
        Some(k) => dictionary.entries()[k].function.values().to_vec(),
        None => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let (lo, hi) = base.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let c = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let lambda: f64 = rng.random_range(-3.0..3.0);
    let f: Vec<f64> = match shape {
        Shape::Shifted => base.iter().map(|v| v - lo).collect(),
        Shape::Ramp => base.iter().map(|v| (v - c).max(0.0)).collect(),
        Shape::Exponential => base.iter().map(|v| (lambda * (v - hi)).exp()).collect(),
        Shape::Indicator => base.iter().map(|v| if *v > c { 1.0 } else { 0.0 }).collect(),
        Shape::Noise => (0..n).map(|_| rng.random_range(if nonnegative { 0.0 } else { -1.0 }..1.0)).collect(),
        Shape::Signed => base.iter().map(|v| v - c).collect(),
    };
    (f, json!({"shape": shape, "dictionary_index": entry, "level": c, "lambda": lambda}))
}

/// `x` uniform over `points`; `y` equal to `x`, a near point, or uniform.
fn sample_pair(rng: &mut ChaCha8Rng, space: &FiniteMetricSpace, points: &[usize]) -> (usize, usize) {
    let x = *points.choose(rng).expect("nonempty");
    let u: f64 = rng.random();
    let y = if u < 0.15 {
        x
    } else if u < 0.6 {
        let mut near: Vec<(f64, usize)> = points.iter().filter(|&&j| j != x).map(|&j| (space.dist(x, j), j)).collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = (points.len() / 20).max(2).min(near.len());
        if k == 0 {
            x
        } else {
            near[rng.random_range(0..k)].1
        }
    } else {
        *points.choose(rng).expect("nonempty")
    };
    (x, y)
}

struct Sampled {
    f: Vec<f64>,
    x: usize,
    y: usize,
    p: f64,
    meta: serde_json::Value,
}

fn sample_trials(
    kernel: &MarkovKernel,
    space: &FiniteMetricSpace,
    dictionary: &LipschitzDictionary,
    cfg: &SampleConfig,
    nonnegative: bool,
    p_grid: &[f64],
) -> Result<Vec<Sampled>> {
    let points = interior_points(kernel, space, cfg.interior_threshold);
    if points.is_empty() {
        return Err(Error::InvalidKernel("no well-resolved rows to sample from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.trials)
        .map(|_| {
            let (f, meta) = sample_function(&mut rng, dictionary, kernel.n(), nonnegative);
            let (x, y) = sample_pair(&mut rng, space, &points);
            let p = p_grid.choose(&mut rng).copied().unwrap_or(2.0);
            Sampled { f, x, y, p, meta }
        })
        .collect())
}

/// `Pf(x) ≤ Pf(y) + √C·d(x,y)·√(P(f²)(x))` for sampled `f ≥ 0`, normalized
/// so that `Pf(x) = 1`.
pub fn hpi_check(kernel: &MarkovKernel, space: &FiniteMetricSpace, c: f64, dictionary: &LipschitzDictionary, cfg: &SampleConfig) -> Result<HarnessReport> {
    check_kernel(kernel, space, Some(c))?;
    let samples = sample_trials(kernel, space, dictionary, cfg, true, &[])?;
    let out: Vec<Option<Trial>> = samples
        .par_iter()
        .map(|s| {
            let m = dot(kernel.row(s.x), &s.f);
            if !(m > 0.0) {
                return None;
            }
            let f: Vec<f64> = s.f.iter().map(|v| v / m).collect();
            let pfy = dot(kernel.row(s.y), &f);
            let p2x: f64 = kernel.row(s.x).iter().zip(&f).map(|(p, v)| p * v * v).sum();
            let rhs = pfy + c.sqrt() * space.dist(s.x, s.y) * p2x.sqrt();
            Some(Trial { lhs: 1.0, rhs, extra: 0.0, inputs: json!({"x": s.x, "y": s.y, "f": f, "sample": s.meta}) })
        })
        .collect();
    finish("hpi", cfg.tol, out, vec![format!("C = {c}")])
}

fn finish(id: &str, tol: Tolerance, out: Vec<Option<Trial>>, notes: Vec<String>) -> Result<HarnessReport> {
    let skipped = out.iter().filter(|t| t.is_none()).count();
    Ok(HarnessReport::from_trials(id, tol, out.into_iter().flatten().collect(), skipped, notes))
}

/// `|Pf(x) − Pf(y)|² ≤ 2·He₂²(δ_xP, δ_yP)·(P(f²)(x) + P(f²)(y))` for sampled
/// signed `f`.
pub fn increment_lemma_check(kernel: &MarkovKernel, space: &FiniteMetricSpace, dictionary: &LipschitzDictionary, cfg: &SampleConfig) -> Result<HarnessReport> {
    check_kernel(kernel, space, None)?;
    let cfg = SampleConfig { interior_threshold: f64::INFINITY, ..cfg.clone() };
    let samples = sample_trials(kernel, space, dictionary, &cfg, false, &[])?;
    let out: Vec<Option<Trial>> = samples
        .par_iter()
        .map(|s| {
            let (rx, ry) = (kernel.row(s.x), kernel.row(s.y));
            let diff = dot(rx, &s.f) - dot(ry, &s.f);
            let he: f64 = rx.iter().zip(ry).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
            let p2 = |r: &[f64]| -> f64 { r.iter().zip(&s.f).map(|(p, v)| p * v * v).sum() };
            let rhs = 2.0 * he * (p2(rx) + p2(ry));
            Some(Trial { lhs: diff * diff, rhs, extra: 0.0, inputs: json!({"x": s.x, "y": s.y, "f": s.f, "sample": s.meta}) })
        })
        .collect();
    finish("increment", cfg.tol, out, vec![])
}

/// `Pf(x)^p ≤ exp(p/(p−1)·C·d(x,y)²/4)·P(f^p)(y)` for sampled `f ≥ 0`
/// normalized so that `Pf(x) = 1`.
pub fn whi_check(
    kernel: &MarkovKernel,
    space: &FiniteMetricSpace,
    c: f64,
    p_grid: &[f64],
    dictionary: &LipschitzDictionary,
    cfg: &SampleConfig,
) -> Result<HarnessReport> {
    check_kernel(kernel, space, Some(c))?;
    check_p_grid(p_grid)?;
    let samples = sample_trials(kernel, space, dictionary, cfg, true, p_grid)?;
    let out: Vec<Option<Trial>> = samples
        .par_iter()
        .map(|s| {
            let m = dot(kernel.row(s.x), &s.f);
            if !(m > 0.0) {
                return None;
            }
            let f: Vec<f64> = s.f.iter().map(|v| v / m).collect();
            let d = space.dist(s.x, s.y);
            let pfp: f64 = kernel.row(s.y).iter().zip(&f).map(|(q, v)| q * v.powf(s.p)).sum();
            let rhs = (s.p / (s.p - 1.0) * c * d * d / 4.0).exp() * pfp;
            Some(Trial { lhs: 1.0, rhs, extra: 0.0, inputs: json!({"x": s.x, "y": s.y, "p": s.p, "f": f, "sample": s.meta}) })
        })
        .collect();
    finish("whi", cfg.tol, out, vec![format!("C = {c}")])
}

fn check_p_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() || p_grid.iter().any(|p| !(*p > 1.0) || !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p grid must be nonempty and inside (1, ∞), got {p_grid:?}")));
    }
    Ok(())
}

/// `Σ_z (p_x/p_y)^{1/(p−1)} p_x ≤ exp(p/(p−1)²·C·d(x,y)²/4)` per pair and
/// `p`. Pairs where `p_y` vanishes on the support of `p_x` are skipped.
pub fn ihi_check(kernel: &MarkovKernel, space: &FiniteMetricSpace, c: f64, p_grid: &[f64], pairs: &[PointPair], tol: Tolerance) -> Result<HarnessReport> {
    check_kernel(kernel, space, Some(c))?;
    check_p_grid(p_grid)?;
    if let Some(&(x, y)) = pairs.iter().find(|(x, y)| *x >= kernel.n() || *y >= kernel.n()) {
        return Err(Error::InvalidParameter(format!("pair ({x}, {y}) out of range")));
    }
    let jobs: Vec<(PointPair, f64)> = pairs.iter().flat_map(|&pr| p_grid.iter().map(move |&p| (pr, p))).collect();
    let out: Vec<Option<Trial>> = jobs
        .par_iter()
        .map(|&((x, y), p)| {
            let lhs = integrated_harnack(kernel.row(x), kernel.row(y), p)?;
            let d = space.dist(x, y);
            let rhs = (p / ((p - 1.0) * (p - 1.0)) * c * d * d / 4.0).exp();
            Some(Trial { lhs, rhs, extra: 0.0, inputs: json!({"x": x, "y": y, "p": p}) })
        })
        .collect();
    finish("ihi", tol, out, vec![format!("C = {c}")])
}

/// `Σ (p_x/p_y)^{1/(p−1)} p_x`, or `None` if `p_y = 0` somewhere on the
/// support of `p_x`.
pub fn integrated_harnack(px: &[f64], py: &[f64], p: f64) -> Option<f64> {
    let r = 1.0 / (p - 1.0);
    let mut terms = Vec::with_capacity(px.len());
    for (a, b) in px.iter().zip(py) {
        if *a > 0.0 {
            if !(*b > 0.0) {
                return None;
            }
            terms.push((1.0 + r) * a.ln() - r * b.ln());
        }
    }
    Some(logsumexp(terms).exp())
}

pub type MeasurePair = (DiscreteMeasure, DiscreteMeasure);

/// `pairs` point pairs among the well-resolved rows, drawn like the
/// sampled harnesses draw `(x, y)`.
pub fn sample_point_pairs(kernel: &MarkovKernel, space: &FiniteMetricSpace, pairs: usize, seed: u64, interior_threshold: f64) -> Result<Vec<PointPair>> {
    check_kernel(kernel, space, None)?;
    let points = interior_points(kernel, space, interior_threshold);
    if points.is_empty() {
        return Err(Error::InvalidKernel("no well-resolved rows to sample from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..pairs).map(|_| sample_pair(&mut rng, space, &points)).collect())
}

/// `diracs` Dirac pairs followed by `random` pairs of measures with 2–6
/// atoms each, all supported on well-resolved rows.
pub fn sample_measure_pairs(
    kernel: &MarkovKernel,
    space: &FiniteMetricSpace,
    diracs: usize,
    random: usize,
    seed: u64,
    interior_threshold: f64,
) -> Result<Vec<MeasurePair>> {
    check_kernel(kernel, space, None)?;
    let n = kernel.n();
    let points = interior_points(kernel, space, interior_threshold);
    if points.is_empty() {
        return Err(Error::InvalidKernel("no well-resolved rows to sample from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(diracs + random);
    for _ in 0..diracs {
        let (x, y) = sample_pair(&mut rng, space, &points);
        out.push((DiscreteMeasure::dirac(n, x)?, DiscreteMeasure::dirac(n, y)?));
    }
    let atoms = |rng: &mut ChaCha8Rng| -> Result<DiscreteMeasure> {
        let k = rng.random_range(2..=6);
        let mut w = vec![0.0; n];
        for _ in 0..k {
            w[*points.choose(rng).expect("nonempty")] += rng.random_range(0.05..1.0);
        }
        DiscreteMeasure::normalized(w)
    };
    for _ in 0..random {
        let a = atoms(&mut rng)?;
        let b = atoms(&mut rng)?;
        out.push((a, b));
    }
    Ok(out)
}

fn push_pair(kernel: &MarkovKernel, pair: &MeasurePair) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    Ok((kernel.apply_to_measure(&pair.0)?, kernel.apply_to_measure(&pair.1)?))
}

fn pair_json(pair: &MeasurePair) -> serde_json::Value {
    json!({"mu0": pair.0.weights(), "mu1": pair.1.weights()})
}

/// `He₂²(μ₀P, μ₁P) ≤ W_{1/C,1}(μ₀, μ₁) ≤ (C/4)·W₂²(μ₀, μ₁)` per pair; two
/// trials per pair (one per link). Solver gaps are added to the allowance.
pub fn hkc_harness(kernel: &MarkovKernel, space: &FiniteMetricSpace, c: f64, pairs: &[MeasurePair], tol: Tolerance) -> Result<HarnessReport> {
    check_kernel(kernel, space, Some(c))?;
    let params = WParams::new(1.0 / c, 1.0)?;
    let results: Vec<Result<Vec<Trial>>> = pairs
        .par_iter()
        .map(|pair| {
            let (a, b) = push_pair(kernel, pair)?;
            let he = hellinger_sq(&a, &b)?;
            let w = w_ab_detailed(params, &pair.0, &pair.1, space)?;
            let w2 = wasserstein2_sq(&pair.0, &pair.1, space)?;
            let inputs = pair_json(pair);
            let mut first = inputs.clone();
            first["link"] = json!("he-vs-hk");
            let mut second = inputs;
            second["link"] = json!("hk-vs-w2");
            Ok(vec![
                Trial { lhs: he, rhs: w.value, extra: w.gap.abs(), inputs: first },
                Trial { lhs: w.value, rhs: c / 4.0 * w2, extra: w.gap.abs(), inputs: second },
            ])
        })
        .collect();
    let mut trials = Vec::new();
    for r in results {
        trials.extend(r?);
    }
    Ok(HarnessReport::from_trials("hkc", tol, trials, 0, vec![format!("C = {c}")]))
}

fn dirac_index(mu: &DiscreteMeasure) -> Option<usize> {
    let s = mu.support();
    (s.len() == 1).then(|| s[0])
}

/// Necessary consequence of the entropic transport inequality: for each
/// `κ` and pair, `T_{0,κC}(μ₀P, μ₁P) ≤ upper bound of T_{κ,κC}(μ₀, μ₁)`
/// (point-mass bound for Dirac pairs, coupling bound otherwise).
pub fn eti_harness(kernel: &MarkovKernel, space: &FiniteMetricSpace, c: f64, kappas: &[f64], pairs: &[MeasurePair], tol: Tolerance) -> Result<HarnessReport> {
    check_kernel(kernel, space, Some(c))?;
    if kappas.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidParameter(format!("κ values must be > 0, got {kappas:?}")));
    }
    let jobs: Vec<(usize, f64)> = (0..pairs.len()).flat_map(|i| kappas.iter().map(move |&k| (i, k))).collect();
    let results: Vec<Result<Trial>> = jobs
        .par_iter()
        .map(|&(i, kappa)| {
            let pair = &pairs[i];
            let b = kappa * c;
            let (a0, a1) = push_pair(kernel, pair)?;
            let lhs = renyi_t0b(b, &a0, &a1)?.value;
            let params = DivParams::new(kappa, b)?;
            let (rhs, route) = match (dirac_index(&pair.0), dirac_index(&pair.1)) {
                (Some(x), Some(y)) => (t_point_mass_bounds(&params, space.dist(x, y))?.1, "point-mass"),
                _ => (t_ab_upper(&params, &pair.0, &pair.1, space)?.value, "coupling"),
            };
            let mut inputs = pair_json(pair);
            inputs["kappa"] = json!(kappa);
            inputs["b"] = json!(b);
            inputs["upper_route"] = json!(route);
            Ok(Trial { lhs, rhs, extra: 0.0, inputs })
        })
        .collect();
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HarnessReport::from_trials(
        "eti",
        tol,
        trials,
        0,
        vec![format!("C = {c}"), "checks the necessary consequence LHS ≤ upper bound of the right-hand side".into()],
    ))
}

/// `W₂²(μ₀P, μ₁P) ≤ C·W₂²(μ₀, μ₁)` per pair.
pub fn kuwada_harness(kernel: &MarkovKernel, space: &FiniteMetricSpace, c: f64, pairs: &[MeasurePair], tol: Tolerance) -> Result<HarnessReport> {
    check_kernel(kernel, space, Some(c))?;
    let results: Vec<Result<Trial>> = pairs
        .par_iter()
        .map(|pair| {
            let (a, b) = push_pair(kernel, pair)?;
            let lhs = wasserstein2_sq(&a, &b, space)?;
            let rhs = c * wasserstein2_sq(&pair.0, &pair.1, space)?;
            Ok(Trial { lhs, rhs, extra: 0.0, inputs: pair_json(pair) })
        })
        .collect();
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HarnessReport::from_trials("kuwada", tol, trials, 0, vec![format!("C = {c}")]))
}
