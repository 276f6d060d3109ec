//! The `W_{a,b}` family of transport distances.
//!
//! * `b = 0`: `W_{a,0} = W₂²/(4a)` (exact linear program).
//! * `a = 0`: `W_{0,b} = He₂²/b`.
//! * `a, b > 0`: `W_{a,b} = LET(d̃)/b` on the rescaled metric
//!   `d̃ = √b/(2√a)·d`.
//!
//! All returned values are squared distances.

mod exact;
mod let_solver;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::space::{DiscreteMeasure, FiniteMetricSpace};
use crate::{Error, Result};

pub use exact::{monotone_1d, network_simplex, TransportPlan};
pub use let_solver::{let_cost, LetConfig, LetDiagnostics};

/// Pivot cap for the transportation simplex.
pub const MAX_PIVOTS: usize = 10_000_000;

/// `Σ (√μ₁ − √μ₀)²`.
pub fn hellinger_sq(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<f64> {
    mu0.same_len(mu1)?;
    Ok(mu0.weights().iter().zip(mu1.weights()).map(|(a, b)| (b.sqrt() - a.sqrt()).powi(2)).sum())
}

/// Exact optimal transport with cost `c(d(x, y))`.
///
/// On a 1-D Euclidean space with `convex` set (the cost is a convex function
/// of `x − y`) the monotone coupling is used; otherwise the transportation
/// simplex.
pub fn optimal_transport<C: Fn(f64) -> f64>(
    space: &FiniteMetricSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    cost: C,
    convex: bool,
) -> Result<TransportPlan> {
    space.expect_len(mu0.len())?;
    space.expect_len(mu1.len())?;
    let pair_cost = |i: usize, j: usize| cost(space.dist(i, j));
    match space.line_positions() {
        Some(xs) if convex => monotone_1d(&xs, mu0.weights(), mu1.weights(), pair_cost),
        _ => network_simplex(mu0.weights(), mu1.weights(), pair_cost, MAX_PIVOTS),
    }
}

/// `W₂²` with an optimal plan.
pub fn wasserstein2(space: &FiniteMetricSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<TransportPlan> {
    optimal_transport(space, mu0, mu1, |d| d * d, true)
}

pub fn wasserstein2_sq(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &FiniteMetricSpace) -> Result<f64> {
    Ok(wasserstein2(space, mu0, mu1)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetSolution {
    pub value: f64,
    /// Certified `primal − dual`.
    pub gap: f64,
    /// `gap` met the configured tolerance; otherwise the value is an upper
    /// bound only.
    pub certified: bool,
    pub coupling: Array2<f64>,
    pub gamma0: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub diagnostics: LetDiagnostics,
}

impl LetSolution {
    /// Errors with [`Error::NotConverged`] unless certified.
    pub fn require_certified(self) -> Result<Self> {
        if self.certified {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.diagnostics.iterations + self.diagnostics.newton_iterations,
                gap: self.gap,
            })
        }
    }

    /// `{value, gap, iterations, epsilon_schedule}` plus solver detail.
    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "value": self.value,
            "gap": self.gap,
            "certified": self.certified,
            "iterations": self.diagnostics.iterations,
            "newton_iterations": self.diagnostics.newton_iterations,
            "epsilon_schedule": self.diagnostics.epsilon_schedule,
            "entropic_values": self.diagnostics.entropic_values,
            "polished": self.diagnostics.polished,
        })
    }
}

/// `F(γ) = KL(γ₀|μ₀) + KL(γ₁|μ₁) + Σ γ ℓ(d)` for an arbitrary coupling.
pub fn let_objective(space: &FiniteMetricSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, gamma: &Array2<f64>) -> f64 {
    let n = space.n();
    let g0: Vec<f64> = (0..n).map(|i| gamma.row(i).sum()).collect();
    let g1: Vec<f64> = (0..n).map(|j| gamma.column(j).sum()).collect();
    let kl = |g: &[f64], m: &[f64]| g.iter().zip(m).map(|(r, w)| crate::numeric::kl_term(*r, *w)).sum::<f64>();
    let mut transport = 0.0;
    for ((i, j), &g) in gamma.indexed_iter() {
        if g > 0.0 {
            transport += g * let_cost(space.dist(i, j));
        }
    }
    kl(&g0, mu0.weights()) + kl(&g1, mu1.weights()) + transport
}

pub fn let_solve(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &FiniteMetricSpace) -> Result<LetSolution> {
    let_solve_scaled(mu0, mu1, space, 1.0, &LetConfig::default())
}

/// LET on the metric `scale·d`.
pub fn let_solve_scaled(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    scale: f64,
    config: &LetConfig,
) -> Result<LetSolution> {
    space.expect_len(mu0.len())?;
    space.expect_len(mu1.len())?;
    let raw = let_solver::solve_let(mu0.weights(), mu1.weights(), |i, j| let_cost(scale * space.dist(i, j)), config)?;
    let n = space.n();
    let mut coupling = Array2::zeros((n, n));
    let mut gamma0 = vec![0.0; n];
    let mut gamma1 = vec![0.0; n];
    for &(r, s, g) in &raw.flows {
        let (i, j) = (raw.rows[r], raw.cols[s]);
        coupling[[i, j]] += g;
        gamma0[i] += g;
        gamma1[j] += g;
    }
    Ok(LetSolution {
        value: raw.value,
        gap: raw.gap,
        certified: raw.certified,
        coupling,
        gamma0,
        gamma1,
        diagnostics: raw.diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WParams {
    pub a: f64,
    pub b: f64,
}

impl WParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) || (a == 0.0 && b == 0.0) {
            return Err(Error::InvalidParameter(format!("W parameters need a, b ≥ 0 not both zero; got a={a}, b={b}")));
        }
        Ok(Self { a, b })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(c * self.a, c * self.b)
    }

    /// `√b/(2√a)`, the metric rescaling onto the LET program.
    pub fn metric_scale(&self) -> f64 {
        self.b.sqrt() / (2.0 * self.a.sqrt())
    }

    /// Closed form between Diracs at distance `d`.
    pub fn dirac_value(&self, d: f64) -> f64 {
        if self.b == 0.0 {
            d * d / (4.0 * self.a)
        } else if self.a == 0.0 {
            if d == 0.0 { 0.0 } else { 2.0 / self.b }
        } else {
            let theta = (self.metric_scale() * d).min(std::f64::consts::FRAC_PI_2);
            (2.0 - 2.0 * theta.cos()) / self.b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WRoute {
    Wasserstein,
    Hellinger,
    Let,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WValue {
    pub value: f64,
    /// Certified optimality gap in the same units as `value`.
    pub gap: f64,
    pub route: WRoute,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub let_solution: Option<LetSolution>,
}

/// `W_{a,b}(μ₀, μ₁)` with its route and gap.
pub fn w_ab_detailed(params: WParams, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &FiniteMetricSpace) -> Result<WValue> {
    w_ab_with(params, mu0, mu1, space, &LetConfig::default())
}

pub fn w_ab_with(
    params: WParams,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    config: &LetConfig,
) -> Result<WValue> {
    let WParams { a, b } = WParams::new(params.a, params.b)?;
    if b == 0.0 {
        let w2 = wasserstein2_sq(mu0, mu1, space)?;
        return Ok(WValue { value: w2 / (4.0 * a), gap: 0.0, route: WRoute::Wasserstein, let_solution: None });
    }
    if a == 0.0 {
        let he = hellinger_sq(mu0, mu1)?;
        return Ok(WValue { value: he / b, gap: 0.0, route: WRoute::Hellinger, let_solution: None });
    }
    let sol = let_solve_scaled(mu0, mu1, space, params.metric_scale(), config)?.require_certified()?;
    Ok(WValue { value: sol.value / b, gap: sol.gap / b, route: WRoute::Let, let_solution: Some(sol) })
}

pub fn w_ab(params: WParams, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &FiniteMetricSpace) -> Result<f64> {
    Ok(w_ab_detailed(params, mu0, mu1, space)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WCheckKind {
    Monotonicity,
    Scaling,
    DiracBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WCheck {
    pub kind: WCheckKind,
    pub params: WParams,
    /// Second parameter pair (monotonicity) or `(c, c)` (scaling).
    pub other: WParams,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WFamilyReport {
    pub checks: Vec<WCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WFamilyTolerances {
    /// Relative tolerance of the scaling identity.
    pub scaling_rel: f64,
    /// Absolute slack of monotonicity and of the Dirac bound.
    pub monotone_abs: f64,
}

impl Default for WFamilyTolerances {
    fn default() -> Self {
        Self { scaling_rel: 1e-4, monotone_abs: 1e-6 }
    }
}

/// Scaling `W_{ca,cb} = W_{a,b}/c`, monotonicity in `(a, b)` and, when both
/// measures are Diracs, the bound `W_{a,b} ≤ d²/(4a) ∧ 2/b`, over every pair
/// from `grid` and every factor in `scales`.
pub fn w_family_checks(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    grid: &[WParams],
    scales: &[f64],
    tol: &WFamilyTolerances,
) -> Result<WFamilyReport> {
    let values: Vec<WValue> = grid.iter().map(|p| w_ab_detailed(*p, mu0, mu1, space)).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for (p, v) in grid.iter().zip(&values) {
        for &c in scales {
            let scaled = w_ab_detailed(p.scaled(c)?, mu0, mu1, space)?;
            let lhs = scaled.value;
            let rhs = v.value / c;
            let slack = tol.scaling_rel * rhs.abs().max(lhs.abs()) + scaled.gap + v.gap / c;
            checks.push(WCheck {
                kind: WCheckKind::Scaling,
                params: *p,
                other: WParams { a: c, b: c },
                lhs,
                rhs,
                pass: (lhs - rhs).abs() <= slack,
            });
        }
    }
    for (p, v) in grid.iter().zip(&values) {
        for (q, w) in grid.iter().zip(&values) {
            if p.a <= q.a && p.b <= q.b && p != q {
                checks.push(WCheck {
                    kind: WCheckKind::Monotonicity,
                    params: *q,
                    other: *p,
                    lhs: w.value,
                    rhs: v.value,
                    pass: w.value <= v.value + tol.monotone_abs + v.gap + w.gap,
                });
            }
        }
    }
    let (s0, s1) = (mu0.support(), mu1.support());
    if s0.len() == 1 && s1.len() == 1 {
        let d = space.dist(s0[0], s1[0]);
        for (p, v) in grid.iter().zip(&values) {
            let bound = match (p.a > 0.0, p.b > 0.0) {
                (true, true) => (d * d / (4.0 * p.a)).min(2.0 / p.b),
                (true, false) => d * d / (4.0 * p.a),
                (false, _) => 2.0 / p.b,
            };
            checks.push(WCheck {
                kind: WCheckKind::DiracBound,
                params: *p,
                other: *p,
                lhs: v.value,
                rhs: bound,
                pass: v.value <= bound + tol.monotone_abs + v.gap,
            });
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(WFamilyReport { checks, pass })
}

/// Worst violation of the triangle inequality by `√W_{a,b}` over all ordered
/// triples of `measures`. Positive entries are violations. Nothing is
/// asserted: `W_{a,b}` is a squared distance and whether its root is a metric
/// is not known in general.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleResidual {
    pub params: WParams,
    /// `max √W(x,z) − √W(x,y) − √W(y,z)` over triples.
    pub max_residual: f64,
    /// Indices `(x, y, z)` of the worst triple.
    pub worst: (usize, usize, usize),
}

pub fn w_triangle_residual(params: WParams, measures: &[DiscreteMeasure], space: &FiniteMetricSpace) -> Result<TriangleResidual> {
    let m = measures.len();
    if m < 3 {
        return Err(Error::InvalidParameter(format!("measures: need at least 3, got {m}")));
    }
    let mut root = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let v = w_ab(params, &measures[i], &measures[j], space)?.max(0.0).sqrt();
            root[i * m + j] = v;
            root[j * m + i] = v;
        }
    }
    let mut best = TriangleResidual { params, max_residual: f64::NEG_INFINITY, worst: (0, 1, 2) };
    for x in 0..m {
        for y in 0..m {
            for z in 0..m {
                if x == y || y == z || x == z {
                    continue;
                }
                let r = root[x * m + z] - root[x * m + y] - root[y * m + z];
                if r > best.max_residual {
                    best.max_residual = r;
                    best.worst = (x, y, z);
                }
            }
        }
    }
    Ok(best)
}
