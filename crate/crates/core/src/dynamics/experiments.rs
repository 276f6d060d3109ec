//! Distance-decay experiments on simulated Langevin paths, and the
//! finite-dimensional Gaussian quasi-invariance bundle.

use serde::{Deserialize, Serialize};

use super::gaussian::{self, Normal};
use super::{simulate_langevin, LangevinConfig, LangevinRun, Potential};
use crate::divergence::{c_b, renyi_t0b};
use crate::funcineq::integrated_harnack;
use crate::markov::{bin_samples, gaussian_measure_grid};
use crate::space::{DiscreteMeasure, FiniteMetricSpace};
use crate::transport::{hellinger_sq, monotone_1d, wasserstein2_sq};
use crate::{Error, Result};

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub time: f64,
    pub value: f64,
    pub stderr: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    /// `"w2"` or `"he2"`.
    pub distance: String,
    pub points: Vec<DecayPoint>,
    pub stat_tol: f64,
    /// Per-point verdict `value ≤ envelope·(1 + stat_tol) + 3·stderr`.
    pub within_envelope: Vec<bool>,
    pub pass: bool,
    pub clamped_samples: usize,
    pub aborted_paths: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DecaySeries {
    /// `time,value,stderr,envelope` with shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,value,stderr,envelope\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.time, p.value, p.stderr, p.envelope));
        }
        s
    }

    pub fn max_ratio(&self) -> f64 {
        self.points.iter().filter(|p| p.envelope > 0.0).map(|p| p.value / p.envelope).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn parse_decay_csv(text: &str) -> Result<Vec<DecayPoint>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "time,value,stderr,envelope" => {}
        other => return Err(Error::Parse(format!("expected header 'time,value,stderr,envelope', got {other:?}"))),
    }
    let mut out: Vec<DecayPoint> = Vec::new();
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number '{c}'", i + 2))))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields, got {}", i + 2, v.len())));
        }
        if v[2] < 0.0 {
            return Err(Error::Parse(format!("line {}: negative standard error", i + 2)));
        }
        if out.last().is_some_and(|p| p.time >= v[0]) {
            return Err(Error::Parse(format!("line {}: times must be strictly increasing", i + 2)));
        }
        out.push(DecayPoint { time: v[0], value: v[1], stderr: v[2], envelope: v[3] });
    }
    Ok(out)
}

/// Finite 1-D start measure `Σ wᵢ δ_{xᵢ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartMeasure {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StartMeasure {
    pub fn dirac(x: f64) -> Self {
        Self { points: vec![x], weights: vec![1.0] }
    }

    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!("{} points with {} weights", points.len(), weights.len())));
        }
        if points.iter().any(|x| !x.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidMeasure("points must be finite and weights nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self { points, weights })
    }
}

/// Exact `W₂²` between finite measures on the line.
fn w2_line(a: &StartMeasure, b: &StartMeasure) -> Result<f64> {
    let positions: Vec<f64> = a.points.iter().chain(&b.points).copied().collect();
    let n = positions.len();
    let mut w0 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    w0[..a.points.len()].copy_from_slice(&a.weights);
    w1[a.points.len()..].copy_from_slice(&b.weights);
    Ok(monotone_1d(&positions, &w0, &w1, |i, j| (positions[i] - positions[j]).powi(2))?.value)
}

fn require_1d(config: &LangevinConfig) -> Result<()> {
    if config.dimension != 1 {
        return Err(Error::InvalidParameter(format!("dimension: experiments bin onto a 1-D lattice, got dimension {}", config.dimension)));
    }
    Ok(())
}

fn check_stat_tol(stat_tol: f64) -> Result<()> {
    if !(stat_tol >= 0.0) || !stat_tol.is_finite() {
        return Err(Error::InvalidParameter(format!("stat_tol: must be ≥ 0, got {stat_tol}")));
    }
    Ok(())
}

/// Histogram of the mixture `Σ wᵢ (paths of start i)[range]` at checkpoint
/// `k`.
fn mixture(grid: &FiniteMetricSpace, run: &LangevinRun, idx: &[usize], weights: &[f64], k: usize, batch: Option<usize>) -> Result<(DiscreteMeasure, usize)> {
    let mut acc = vec![0.0; grid.n()];
    let mut clamped = 0;
    for (&s, &w) in idx.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let all = &run.samples[s][k];
        let slice = match batch {
            None => &all[..],
            Some(b) => {
                let len = all.len() / BATCHES;
                &all[b * len..(b + 1) * len]
            }
        };
        if slice.is_empty() {
            return Err(Error::EmptySamples { row: s });
        }
        let (m, c) = bin_samples(grid, slice)?;
        clamped += c;
        for (a, v) in acc.iter_mut().zip(m.weights()) {
            *a += w * v;
        }
    }
    Ok((DiscreteMeasure::new(acc)?, clamped))
}

fn batch_stderr(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let m = values.iter().sum::<f64>() / b;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b - 1.0) / b).sqrt()
}

/// Deduplicated start points and, per measure, the index of each atom.
fn shared_starts(measures: &[&StartMeasure]) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut starts: Vec<f64> = Vec::new();
    let idx = measures
        .iter()
        .map(|m| {
            m.points
                .iter()
                .map(|&x| match starts.iter().position(|&s| s.to_bits() == x.to_bits()) {
                    Some(i) => i,
                    None => {
                        starts.push(x);
                        starts.len() - 1
                    }
                })
                .collect()
        })
        .collect();
    (starts.into_iter().map(|x| vec![x]).collect(), idx)
}

/// `W₂²(ν₀P_t, ν₁P_t)` from binned endpoint clouds against the contraction
/// envelope `e^{−2at}·W₂²(ν₀, ν₁)` with the declared convexity `a`.
/// Identical atoms share their simulated paths, so `ν₀ = ν₁` gives an
/// identically zero series.
pub fn w2_decay_experiment(
    config: &LangevinConfig,
    nu0: &StartMeasure,
    nu1: &StartMeasure,
    times: &[f64],
    grid: &FiniteMetricSpace,
    stat_tol: f64,
) -> Result<DecaySeries> {
    require_1d(config)?;
    check_stat_tol(stat_tol)?;
    if !(config.convexity > 0.0) {
        return Err(Error::InvalidParameter("convexity: the W₂ envelope needs a declared a > 0".into()));
    }
    let w2_0 = w2_line(nu0, nu1)?;
    let (starts, idx) = shared_starts(&[nu0, nu1]);
    let run = simulate_langevin(config, &starts, times)?;
    let mut points = Vec::with_capacity(times.len());
    let mut clamped = 0;
    for (k, &t) in times.iter().enumerate() {
        let (m0, c0) = mixture(grid, &run, &idx[0], &nu0.weights, k, None)?;
        let (m1, c1) = mixture(grid, &run, &idx[1], &nu1.weights, k, None)?;
        clamped += c0 + c1;
        let value = wasserstein2_sq(&m0, &m1, grid)?;
        let batches = (0..BATCHES)
            .map(|b| {
                let (a, _) = mixture(grid, &run, &idx[0], &nu0.weights, k, Some(b))?;
                let (c, _) = mixture(grid, &run, &idx[1], &nu1.weights, k, Some(b))?;
                wasserstein2_sq(&a, &c, grid)
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(DecayPoint { time: t, value, stderr: batch_stderr(&batches), envelope: (-2.0 * config.convexity * t).exp() * w2_0 });
    }
    let within: Vec<bool> = points.iter().map(|p| p.value <= p.envelope * (1.0 + stat_tol) + 3.0 * p.stderr).collect();
    Ok(DecaySeries {
        distance: "w2".into(),
        pass: within.iter().all(|&w| w),
        within_envelope: within,
        points,
        stat_tol,
        clamped_samples: clamped,
        aborted_paths: run.aborted.iter().sum(),
        notes: with_deviations(config, vec![format!("envelope e^(-2at)·W2²(ν0, ν1) with declared a = {}", config.convexity)]),
    })
}

/// The decay theorems assume a globally Lipschitz ∇U; quartic runs only
/// hold inside their reflecting box, and the series says so.
fn with_deviations(config: &LangevinConfig, mut notes: Vec<String>) -> Vec<String> {
    if let (Potential::Quartic(_), Some(l)) = (&config.potential, config.reflecting_box) {
        notes.push(format!("quartic potential: ∇U is not globally Lipschitz; dynamics reflected in [−{l}, {l}], outside the theorem's hypotheses"));
    }
    notes
}

/// Equilibrium `μ ∝ e^{−U}` on the lattice (restricted to the reflecting
/// box if any). Fails if more than `1e−8` of the mass sits in the outer
/// cells, i.e. the grid does not resolve the density.
pub fn equilibrium_on_grid(config: &LangevinConfig, grid: &FiniteMetricSpace) -> Result<DiscreteMeasure> {
    let xs = grid.line_positions().ok_or_else(|| Error::InvalidSpace("expected a 1-D lattice".into()))?;
    let (_, h) = grid.uniform_spacing().ok_or_else(|| Error::InvalidSpace("expected a uniform 1-D lattice".into()))?;
    let inside = |x: f64| config.reflecting_box.is_none_or(|l| x.abs() <= l + 0.5 * h);
    let u: Vec<f64> = xs.iter().map(|&x| if inside(x) { config.potential_value(x) } else { Ok(f64::INFINITY) }).collect::<Result<_>>()?;
    let umin = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !umin.is_finite() {
        return Err(Error::InvalidParameter("potential: not finite anywhere on the grid".into()));
    }
    let w: Vec<f64> = u.iter().map(|v| (-(v - umin)).exp()).collect();
    let total: f64 = w.iter().sum();
    let n = w.len();
    let edge = (n / 100).max(1);
    let box_inside_grid = config.reflecting_box.is_some_and(|l| l + 0.5 * h < xs[n - 1].min(-xs[0]));
    let edge_mass = (w[..edge].iter().sum::<f64>() + w[n - edge..].iter().sum::<f64>()) / total;
    if !box_inside_grid && edge_mass > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "equilibrium density e^-U is not resolved by the grid: {edge_mass:e} of its mass sits in the outer cells"
        )));
    }
    DiscreteMeasure::new(w.iter().map(|v| v / total).collect())
}

/// `He₂²(δ_xP_t, μ)` against `W₂²(δ_x, μ)/(4t)` with `μ ∝ e^{−U}` computed by
/// grid quadrature; also checks the series trends down (within 3σ).
pub fn hellinger_decay_experiment(config: &LangevinConfig, x: f64, times: &[f64], grid: &FiniteMetricSpace, stat_tol: f64) -> Result<DecaySeries> {
    require_1d(config)?;
    check_stat_tol(stat_tol)?;
    let mu = equilibrium_on_grid(config, grid)?;
    let xs = grid.line_positions().expect("checked above");
    let w2 = mu.weights().iter().zip(&xs).map(|(w, y)| w * (y - x).powi(2)).sum::<f64>();
    let run = simulate_langevin(config, &[vec![x]], times)?;
    let mut points = Vec::with_capacity(times.len());
    let mut clamped = 0;
    for (k, &t) in times.iter().enumerate() {
        let (m, c) = mixture(grid, &run, &[0], &[1.0], k, None)?;
        clamped += c;
        let value = hellinger_sq(&m, &mu)?;
        let batches = (0..BATCHES)
            .map(|b| hellinger_sq(&mixture(grid, &run, &[0], &[1.0], k, Some(b))?.0, &mu))
            .collect::<Result<Vec<_>>>()?;
        points.push(DecayPoint { time: t, value, stderr: batch_stderr(&batches), envelope: w2 / (4.0 * t) });
    }
    let within: Vec<bool> = points.iter().map(|p| p.value <= p.envelope * (1.0 + stat_tol) + 3.0 * p.stderr).collect();
    let monotone = points.windows(2).all(|w| w[1].value <= w[0].value + 3.0 * (w[0].stderr + w[1].stderr));
    let mut notes = vec![format!("envelope W2²(δ_x, μ)/(4t) with W2²(δ_x, μ) = {w2}")];
    if !monotone {
        notes.push("series is not decreasing within 3σ".into());
    }
    Ok(DecaySeries {
        distance: "he2".into(),
        pass: monotone && within.iter().all(|&w| w),
        within_envelope: within,
        points,
        stat_tol,
        clamped_samples: clamped,
        aborted_paths: run.aborted.iter().sum(),
        notes: with_deviations(config, notes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasiConfig {
    /// Variance of `μ_t = δ₀P_t`.
    pub t: f64,
    pub shift: f64,
    pub p_grid: Vec<f64>,
    pub kappas: Vec<f64>,
    /// Allowed relative error of the grid Rényi functional against the
    /// exact Gaussian value.
    pub renyi_rel_tol: f64,
}

impl Default for QuasiConfig {
    fn default() -> Self {
        Self {
            t: 0.5,
            shift: 1.0,
            p_grid: vec![1.5, 2.0, 3.0],
            kappas: (0..8).map(|i| 0.125 * 2f64.powi(i)).collect(),
            renyi_rel_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TCheck {
    pub kappa: f64,
    pub b: f64,
    pub value: f64,
    pub bound: f64,
    pub oracle: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenyiCheck {
    pub p: f64,
    pub grid_value: f64,
    pub exact: f64,
    pub bound: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HellingerCheck {
    pub value: f64,
    pub bound: f64,
    pub oracle: f64,
    /// `d²/(4t) ≥ 2`: the bound says nothing since `He₂² ≤ 2` always.
    pub vacuous: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subdivision {
    pub n: usize,
    /// `He₂²(μ_t^{kd/n}, μ_t^{(k+1)d/n})` per step.
    pub step_values: Vec<f64>,
    pub step_bound: f64,
    pub all_below_two: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvarianceReport {
    pub config: QuasiConfig,
    pub spacing: f64,
    pub t_checks: Vec<TCheck>,
    pub renyi: Vec<RenyiCheck>,
    pub hellinger: HellingerCheck,
    pub subdivision: Option<Subdivision>,
    pub pass: bool,
}

/// Shifted Gaussians `μ_t = N(0, t)` and `μ_t^d = N(d, t)` on a lattice:
/// (i) `T_{0,2κ/t}(μ_t, μ_t^d) ≤ C_b·exp(t d²/(8κ²))`; (ii) the Rényi
/// functional against the exact value `exp(p/(p−1)·d²/(2t))` and the bound
/// `exp((p−1)/(ln p)²·d²/(2t))`; (iii) `He₂²(μ_t, μ_t^d) ≤ d²/(4t)`, with the
/// `n`-step subdivision `n = ⌈d/√(4t)⌉` when that bound is vacuous.
pub fn gaussian_quasi_invariance(config: &QuasiConfig, grid: &FiniteMetricSpace) -> Result<QuasiInvarianceReport> {
    let QuasiConfig { t, shift: d, .. } = *config;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t: must be > 0, got {t}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("shift: must be ≥ 0, got {d}")));
    }
    if config.p_grid.iter().any(|p| !(*p > 1.0) || !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p_grid: values must lie in (1, ∞), got {:?}", config.p_grid)));
    }
    if config.kappas.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappas: values must be > 0, got {:?}", config.kappas)));
    }
    let (x0, h) = grid.uniform_spacing().ok_or_else(|| Error::InvalidSpace("expected a uniform 1-D lattice".into()))?;
    let hi = x0 + h * (grid.n() - 1) as f64;
    let required = 6.0 * (2.0 * t).sqrt() + d;
    let actual = (-x0).min(hi);
    if actual < required - 1e-9 {
        return Err(Error::GridTooSmall { required, actual });
    }

    let mu = gaussian_measure_grid(grid, 0.0, t)?;
    let mu_d = gaussian_measure_grid(grid, d, t)?;
    let n0 = Normal::new(0.0, t)?;
    let n1 = Normal::new(d, t)?;

    let t_checks = config
        .kappas
        .iter()
        .map(|&kappa| {
            let b = 2.0 * kappa / t;
            let value = renyi_t0b(b, &mu, &mu_d)?.value;
            let (_, _, cb) = c_b(b)?;
            let bound = cb * (t * d * d / (8.0 * kappa * kappa)).exp();
            let oracle = gaussian::t0b(b, n0, n1)?;
            Ok(TCheck { kappa, b, value, bound, oracle, pass: value <= bound * (1.0 + 1e-9) })
        })
        .collect::<Result<Vec<_>>>()?;

    let renyi = config
        .p_grid
        .iter()
        .map(|&p| {
            let ih = integrated_harnack(mu.weights(), mu_d.weights(), p)
                .ok_or_else(|| Error::InvalidMeasure("shifted Gaussian vanishes where the unshifted one does not".into()))?;
            let grid_value = ih.powf(p - 1.0);
            let e = d * d / (2.0 * t);
            let exact = (p / (p - 1.0) * e).exp();
            let bound = ((p - 1.0) / p.ln().powi(2) * e).exp();
            let rel_error = (grid_value / exact - 1.0).abs();
            let pass = rel_error <= config.renyi_rel_tol && grid_value <= bound * (1.0 + 1e-9);
            Ok(RenyiCheck { p, grid_value, exact, bound, rel_error, pass })
        })
        .collect::<Result<Vec<_>>>()?;

    let bound = d * d / (4.0 * t);
    let value = hellinger_sq(&mu, &mu_d)?;
    let hellinger = HellingerCheck { value, bound, oracle: gaussian::hellinger_sq(n0, n1), vacuous: bound >= 2.0, pass: value <= bound * (1.0 + 1e-9) + 1e-15 };

    let subdivision = if hellinger.vacuous {
        let n = (d / (4.0 * t).sqrt()).ceil() as usize;
        let step_values = (0..n)
            .map(|k| {
                let a = gaussian_measure_grid(grid, d * k as f64 / n as f64, t)?;
                let b = gaussian_measure_grid(grid, d * (k + 1) as f64 / n as f64, t)?;
                hellinger_sq(&a, &b)
            })
            .collect::<Result<Vec<_>>>()?;
        let step_bound = (d / n as f64).powi(2) / (4.0 * t);
        let all_below_two = step_values.iter().all(|v| *v < 2.0 && *v <= step_bound * (1.0 + 1e-9) + 1e-15);
        Some(Subdivision { n, step_values, step_bound, all_below_two })
    } else {
        None
    };

    let pass = t_checks.iter().all(|c| c.pass)
        && renyi.iter().all(|c| c.pass)
        && hellinger.pass
        && subdivision.as_ref().is_none_or(|s| s.all_below_two);
    Ok(QuasiInvarianceReport { config: config.clone(), spacing: h, t_checks, renyi, hellinger, subdivision, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quasi_bundle_at_reference_point() {
        let grid = FiniteMetricSpace::symmetric_grid(8.0, 0.01).unwrap();
        let cfg = QuasiConfig { p_grid: vec![2.0], ..QuasiConfig::default() };
        let r = gaussian_quasi_invariance(&cfg, &grid).unwrap();
        assert!(r.pass, "{r:#?}");
        let e2 = 2f64.exp();
        assert!((r.renyi[0].grid_value / e2 - 1.0).abs() < 0.01);
        assert!((r.hellinger.value / r.hellinger.oracle - 1.0).abs() < 0.01);
        for c in &r.t_checks {
            assert!((c.value / c.oracle - 1.0).abs() < 0.01, "{c:?}");
        }
        assert!(r.subdivision.is_none());
    }

    #[test]
    fn zero_shift_floors() {
        let grid = FiniteMetricSpace::symmetric_grid(7.0, 0.05).unwrap();
        let r = gaussian_quasi_invariance(&QuasiConfig { shift: 0.0, ..QuasiConfig::default() }, &grid).unwrap();
        assert!(r.pass);
        assert_eq!(r.hellinger.value, 0.0);
        for c in &r.t_checks {
            let (_, _, cb) = c_b(c.b).unwrap();
            assert!((c.value - cb).abs() < 1e-12 * cb);
        }
    }

    #[test]
    fn vacuous_bound_and_subdivision() {
        let grid = FiniteMetricSpace::symmetric_grid(10.0, 0.02).unwrap();
        let r = gaussian_quasi_invariance(&QuasiConfig { shift: 3.0, ..QuasiConfig::default() }, &grid).unwrap();
        assert!(r.hellinger.vacuous);
        let s = r.subdivision.unwrap();
        assert_eq!(s.n, 3);
        assert!(s.all_below_two && s.step_values.iter().all(|v| *v < 2.0));
    }

    #[test]
    fn grid_too_small() {
        let grid = FiniteMetricSpace::symmetric_grid(5.0, 0.05).unwrap();
        assert!(matches!(gaussian_quasi_invariance(&QuasiConfig::default(), &grid), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn decay_csv_round_trip() {
        let s = DecaySeries {
            distance: "w2".into(),
            points: vec![
                DecayPoint { time: 0.25, value: 0.1 + 0.2, stderr: 1e-3, envelope: (-0.5f64).exp() },
                DecayPoint { time: 0.5, value: 1.0 / 3.0, stderr: 0.0, envelope: 0.0 },
            ],
            stat_tol: 0.05,
            within_envelope: vec![true, true],
            pass: true,
            clamped_samples: 0,
            aborted_paths: 0,
            notes: vec![],
        };
        assert_eq!(parse_decay_csv(&s.to_csv()).unwrap(), s.points);
        assert!(parse_decay_csv("time,value\n").is_err());
        assert!(parse_decay_csv("time,value,stderr,envelope\n1,2,-1,0\n").is_err());
    }

    #[test]
    fn w2_line_matches_quantile_coupling() {
        let a = StartMeasure::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let b = StartMeasure::dirac(1.0);
        assert!((w2_line(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((w2_line(&StartMeasure::dirac(0.0), &StartMeasure::dirac(1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ou_decay_small_run() {
        let cfg = LangevinConfig { paths: 20_000, horizon: 0.5, ..LangevinConfig::default() };
        let grid = FiniteMetricSpace::symmetric_grid(6.0, 0.02).unwrap();
        let s = w2_decay_experiment(&cfg, &StartMeasure::dirac(0.0), &StartMeasure::dirac(1.0), &[0.25, 0.5], &grid, 0.05).unwrap();
        assert!(s.pass, "{s:?}");
        assert!((s.points[1].value / (-1f64).exp() - 1.0).abs() < 0.1);
        let same = w2_decay_experiment(&cfg, &StartMeasure::dirac(0.5), &StartMeasure::dirac(0.5), &[0.5], &grid, 0.05).unwrap();
        assert_eq!(same.points[0].value, 0.0);
        let wrong = LangevinConfig { convexity: 2.0, ..cfg };
        assert!(!w2_decay_experiment(&wrong, &StartMeasure::dirac(0.0), &StartMeasure::dirac(1.0), &[0.25, 0.5], &grid, 0.05).unwrap().pass);
    }

    #[test]
    fn quartic_series_carry_the_box_note() {
        let cfg = LangevinConfig {
            potential: Potential::Quartic(1.0),
            gradient_lipschitz: Some(30.0),
            reflecting_box: Some(2.5),
            convexity: 0.1,
            paths: 2_000,
            horizon: 0.25,
            ..LangevinConfig::default()
        };
        let grid = FiniteMetricSpace::symmetric_grid(3.0, 0.05).unwrap();
        let s = w2_decay_experiment(&cfg, &StartMeasure::dirac(0.0), &StartMeasure::dirac(1.0), &[0.25], &grid, 0.05).unwrap();
        assert!(s.notes.iter().any(|n| n.contains("not globally Lipschitz")), "{:?}", s.notes);
    }
}
