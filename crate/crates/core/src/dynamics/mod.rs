//! Overdamped Langevin dynamics `dX = −∇U(X)dt + √2 dB`, simulated by
//! Euler–Maruyama, and the decay experiments built on it.
//!
//! The noise is `√(2h)·ξ` per step, matching the generator `Δ − ∇U·∇`
//! (the same convention as [`crate::markov::heat_kernel_grid`]). The
//! constants `e^{−2at}` and `1/(4t)` of the decay bounds assume it.
//!
//! Only Brownian drivers are provided. Potentials act coordinatewise
//! (`U(x) = Σᵢ U₁(xᵢ)`), so the simulator runs in any dimension, but the
//! experiments bin onto 1-D lattices and require dimension 1.

mod experiments;
pub mod expr;
pub mod gaussian;

pub use experiments::{
    gaussian_quasi_invariance, hellinger_decay_experiment, parse_decay_csv, w2_decay_experiment, DecayPoint, DecaySeries, HellingerCheck,
    QuasiConfig, QuasiInvarianceReport, RenyiCheck, StartMeasure, Subdivision, TCheck,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use expr::Expr;

/// Paths whose state leaves `[−GUARD, GUARD]` are aborted.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Built-in one-dimensional potentials (applied per coordinate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Potential {
    /// `U(x) = a x²/2`.
    Quadratic(f64),
    /// `U(x) = λ x⁴/4`; its gradient is not globally Lipschitz, so runs
    /// require a reflecting box.
    Quartic(f64),
    /// Arithmetic expression in `x`, see [`expr`].
    User(String),
}

#[derive(Debug, Clone)]
enum Compiled {
    Quadratic(f64),
    Quartic(f64),
    User(Expr),
}

impl Compiled {
    fn value(&self, x: f64) -> f64 {
        match self {
            Compiled::Quadratic(a) => 0.5 * a * x * x,
            Compiled::Quartic(l) => 0.25 * l * x.powi(4),
            Compiled::User(e) => e.eval(x),
        }
    }

    fn gradient(&self, x: f64) -> f64 {
        match self {
            Compiled::Quadratic(a) => a * x,
            Compiled::Quartic(l) => l * x.powi(3),
            Compiled::User(e) => e.eval_with_derivative(x).1,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangevinConfig {
    pub potential: Potential,
    /// Declared lower bound `a` on `∇²U`.
    pub convexity: f64,
    /// Euler–Maruyama step `h`.
    pub step: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub dimension: usize,
    /// Half-width `L` of the reflecting box `[−L, L]` per coordinate.
    #[serde(default)]
    pub reflecting_box: Option<f64>,
    /// Declared Lipschitz constant of `∇U` (required for user potentials;
    /// derived for the built-in ones).
    #[serde(default)]
    pub gradient_lipschitz: Option<f64>,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            potential: Potential::Quadratic(1.0),
            convexity: 1.0,
            step: 1e-3,
            horizon: 1.0,
            paths: 100_000,
            seed: 0,
            dimension: 1,
            reflecting_box: None,
            gradient_lipschitz: None,
        }
    }
}

/// Smallest path count accepted.
pub const MIN_PATHS: usize = 1000;

impl LangevinConfig {
    fn compile(&self) -> Result<Compiled> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.step > 0.0) || !self.step.is_finite() {
            return bad(format!("step: must be > 0, got {}", self.step));
        }
        if !(self.horizon >= self.step) || !self.horizon.is_finite() {
            return bad(format!("horizon: must be ≥ step ({}), got {}", self.step, self.horizon));
        }
        if self.paths < MIN_PATHS {
            return bad(format!("paths: need at least {MIN_PATHS}, got {}", self.paths));
        }
        if self.dimension == 0 {
            return bad("dimension: must be ≥ 1".into());
        }
        if !(self.convexity >= 0.0) || !self.convexity.is_finite() {
            return bad(format!("convexity: must be ≥ 0, got {}", self.convexity));
        }
        if let Some(l) = self.reflecting_box {
            if !(l > 0.0) || !l.is_finite() {
                return bad(format!("reflecting_box: must be > 0, got {l}"));
            }
        }
        let compiled = match &self.potential {
            Potential::Quadratic(a) if a.is_finite() && *a >= 0.0 => Compiled::Quadratic(*a),
            Potential::Quartic(l) if l.is_finite() && *l >= 0.0 => Compiled::Quartic(*l),
            Potential::User(src) => Compiled::User(Expr::parse(src)?),
            other => return bad(format!("potential: coefficient must be finite and ≥ 0, got {other:?}")),
        };
        let lip = match (&compiled, self.gradient_lipschitz) {
            (_, Some(l)) => l,
            (Compiled::Quadratic(a), None) => *a,
            (Compiled::Quartic(l), None) => match self.reflecting_box {
                Some(b) => 3.0 * l * b * b,
                None => return bad("reflecting_box: the quartic potential needs a reflecting box (its gradient is not globally Lipschitz)".into()),
            },
            (Compiled::User(_), None) => return bad("gradient_lipschitz: must be declared for user potentials".into()),
        };
        if !(lip >= 0.0) || !lip.is_finite() {
            return bad(format!("gradient_lipschitz: must be finite and ≥ 0, got {lip}"));
        }
        Ok(compiled)
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    pub fn potential_value(&self, x: f64) -> Result<f64> {
        Ok(self.compile()?.value(x))
    }
}

/// Endpoint samples of a simulation: `samples[s][k]` holds, for start `s`
/// and checkpoint `k`, the states of the surviving paths (path-major,
/// `dimension` values each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangevinRun {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<Vec<f64>>>,
    /// Paths aborted by the divergence guard, per start.
    pub aborted: Vec<usize>,
}

fn reflect(mut x: f64, l: f64) -> f64 {
    // Fold onto [−L, L]; a loop handles overshoots of more than one width.
    while x > l || x < -l {
        x = if x > l { 2.0 * l - x } else { -2.0 * l - x };
    }
    x
}

/// Checkpoint times as step counts; each must be a multiple of the step.
fn checkpoint_steps(config: &LangevinConfig, times: &[f64]) -> Result<Vec<usize>> {
    let mut prev = 0usize;
    times
        .iter()
        .map(|&t| {
            let k = (t / config.step).round();
            if !(t > 0.0) || !(t <= config.horizon * (1.0 + 1e-12)) || (k * config.step - t).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::InvalidParameter(format!("checkpoint {t} must be a positive multiple of the step within the horizon")));
            }
            let k = k as usize;
            if k <= prev {
                return Err(Error::InvalidParameter("checkpoint times must be strictly increasing".into()));
            }
            prev = k;
            Ok(k)
        })
        .collect()
}

/// Runs `paths` independent Euler–Maruyama paths from each start and
/// records them at the checkpoint times. Path `i` of start `s` draws from
/// its own ChaCha8 stream `s·paths + i` of the master seed, so output is
/// bit-identical regardless of thread count.
pub fn simulate_langevin(config: &LangevinConfig, starts: &[Vec<f64>], times: &[f64]) -> Result<LangevinRun> {
    let u = config.compile()?;
    let dim = config.dimension;
    if let Some(s) = starts.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: s.len() });
    }
    let steps = checkpoint_steps(config, times)?;
    let h = config.step;
    let noise = (2.0 * h).sqrt();
    let mut samples = Vec::with_capacity(starts.len());
    let mut aborted = Vec::with_capacity(starts.len());
    for (s, start) in starts.iter().enumerate() {
        let paths: Vec<Option<Vec<Vec<f64>>>> = (0..config.paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream((s * config.paths + i) as u64);
                let mut x = start.clone();
                let mut out = Vec::with_capacity(steps.len());
                let mut k = 0usize;
                for &target in &steps {
                    while k < target {
                        for xj in x.iter_mut() {
                            let xi: f64 = StandardNormal.sample(&mut rng);
                            *xj += -u.gradient(*xj) * h + noise * xi;
                            if let Some(l) = config.reflecting_box {
                                *xj = reflect(*xj, l);
                            }
                            if !(xj.abs() <= DIVERGENCE_GUARD) {
                                return None;
                            }
                        }
                        k += 1;
                    }
                    out.push(x.clone());
                }
                Some(out)
            })
            .collect();
        let mut per_time: Vec<Vec<f64>> = vec![Vec::with_capacity(config.paths * dim); steps.len()];
        let mut lost = 0;
        for p in paths {
            match p {
                Some(states) => {
                    for (k, st) in states.into_iter().enumerate() {
                        per_time[k].extend(st);
                    }
                }
                None => lost += 1,
            }
        }
        samples.push(per_time);
        aborted.push(lost);
    }
    Ok(LangevinRun { times: times.to_vec(), samples, aborted })
}
