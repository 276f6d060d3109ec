//! The Rényi-type divergence family `T_{a,b}`.
//!
//! With `p = e^b`, `q = p/(p − 1)` and `C_b = p^{1−q}/q`:
//!
//! * `T_{0,b}(μ₀, μ₁) = C_b Σ ϱ^q μ₀` with `ϱ = dμ₁/dμ₀`, or `+∞` when `μ₁`
//!   charges a `μ₀`-null point;
//! * for `a > 0` only two-sided bounds are available: an exact transport
//!   upper bound with cost `C_b exp(d²/(4ab))`, and lower bounds from explicit
//!   dual-feasible flows `φ_s = exp(α(s) f² + β(s))` (see [`certificate`]).
//!
//! `T̃ = ln(T/C_b)` is the normalized divergence.

pub mod certificate;

use serde::{Deserialize, Serialize};

use crate::numeric::{extended_f64, logsumexp};
use crate::space::{DiscreteMeasure, FiniteMetricSpace};
use crate::transport::{optimal_transport, TransportPlan};
use crate::{Error, Result};

pub use certificate::{t_ab_lower, verify_dual_feasible, Beta0Rule, DualFeasibilityReport, LowerBound, LowerCertificate, LowerSearch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub c_b: f64,
}

impl DivParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("a must be ≥ 0, got {a}")));
        }
        let (p, q, c_b) = c_b(b)?;
        Ok(Self { a, b, p, q, c_b })
    }

    /// `ln C_b`, accurate for small `b`.
    pub fn ln_c_b(&self) -> f64 {
        ln_c_b(self.b, self.q)
    }
}

fn ln_c_b(b: f64, q: f64) -> f64 {
    // (1 − q) b = −b/(e^b − 1)
    -q.ln() - b / b.exp_m1()
}

/// `(p, q, C_b)` for `b > 0`.
pub fn c_b(b: f64) -> Result<(f64, f64, f64)> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("b must be > 0, got {b}")));
    }
    let p = b.exp();
    let q = 1.0 / -(-b).exp_m1();
    Ok((p, q, ln_c_b(b, q).exp()))
}

/// `C_b z^q / w^{q−1} − (x^{1/p} z − x w)`; nonnegative, zero exactly at
/// `x = (z/(pw))^q`.
pub fn young_gap(b: f64, z: f64, w: f64, x: f64) -> Result<f64> {
    if !(z > 0.0 && w > 0.0 && x > 0.0) {
        return Err(Error::InvalidParameter(format!("young_gap needs z, w, x > 0; got z={z}, w={w}, x={x}")));
    }
    let (p, q, cb) = c_b(b)?;
    Ok(cb * z.powf(q) / w.powf(q - 1.0) - (x.powf(1.0 / p) * z - x * w))
}

/// Equality point `(z/(pw))^q` of [`young_gap`].
pub fn young_equality_point(b: f64, z: f64, w: f64) -> Result<f64> {
    let (p, q, _) = c_b(b)?;
    Ok((z / (p * w)).powf(q))
}

/// `exp((r/b)(1 − e^{−bs})) y₀^{e^{−bs}}`: the maximal solution of
/// `y′ ≤ r y − b y ln y`, `y(0) = y₀`.
pub fn gronwall_flow(b: f64, r: f64, y0: f64, s: f64) -> Result<f64> {
    if !(b > 0.0) || !(r >= 0.0) || !(y0 > 0.0) || !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("gronwall_flow domain: b={b}, r={r}, y0={y0}, s={s}")));
    }
    let decay = (-b * s).exp();
    Ok(((r / b) * -(-b * s).exp_m1() + decay * y0.ln()).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenyiResult {
    #[serde(with = "extended_f64")]
    pub value: f64,
    /// `T̃ = ln(value/C_b) = (q − 1) D_q(μ₁‖μ₀)`.
    #[serde(with = "extended_f64")]
    pub normalized: f64,
    /// `dμ₁/dμ₀` on the support of `μ₀`.
    pub density: Vec<Option<f64>>,
    pub q: f64,
}

/// `T_{0,b}(μ₀, μ₁)` in closed form.
pub fn renyi_t0b(b: f64, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<RenyiResult> {
    mu0.same_len(mu1)?;
    let (_, q, _) = c_b(b)?;
    let (w0, w1) = (mu0.weights(), mu1.weights());
    let density: Vec<Option<f64>> = w0.iter().zip(w1).map(|(a, c)| (*a > 0.0).then(|| c / a)).collect();
    let singular = w0.iter().zip(w1).any(|(a, c)| *a <= 0.0 && *c > 0.0);
    if singular {
        return Ok(RenyiResult { value: f64::INFINITY, normalized: f64::INFINITY, density, q });
    }
    // ln Σ μ₀ ϱ^q over points where ϱ > 0.
    let ln_sum = logsumexp(
        w0.iter()
            .zip(w1)
            .filter(|(a, c)| **a > 0.0 && **c > 0.0)
            .map(|(a, c)| a.ln() + q * (c / a).ln())
            .collect::<Vec<_>>(),
    );
    let value = (ln_c_b(b, q) + ln_sum).exp();
    Ok(RenyiResult { value, normalized: ln_sum, density, q })
}

/// Default cap on `d²/(4ab)` in the coupling upper bound.
pub const DEFAULT_EXPONENT_CAP: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// `C_b · min_π Σ π exp(d²/(4ab))`; `+∞` when the optimal plan used a
    /// capped cost.
    #[serde(with = "extended_f64")]
    pub value: f64,
    /// Value computed with capped costs (equals `value` when not capped).
    pub capped_value: f64,
    pub capped: bool,
    pub plan: TransportPlan,
}

/// Coupling upper bound on `T_{a,b}` (`a, b > 0`).
pub fn t_ab_upper(params: &DivParams, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &FiniteMetricSpace) -> Result<UpperBound> {
    t_ab_upper_with_cap(params, mu0, mu1, space, DEFAULT_EXPONENT_CAP)
}

pub fn t_ab_upper_with_cap(
    params: &DivParams,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    cap: f64,
) -> Result<UpperBound> {
    if !(params.a > 0.0) {
        return Err(Error::InvalidParameter("the coupling upper bound needs a > 0".into()));
    }
    let scale = 1.0 / (4.0 * params.a * params.b);
    let exponent = |d: f64| (d * d * scale).min(cap);
    let plan = optimal_transport(space, mu0, mu1, |d| exponent(d).exp(), true)?;
    let capped = plan.entries.iter().any(|&(i, j, _)| space.dist(i, j).powi(2) * scale > cap);
    let mass: f64 = plan.entries.iter().map(|e| e.2).sum();
    // Normalizing by the plan mass keeps the diagonal case at exactly C_b.
    let capped_value = params.c_b * plan.value / mass;
    let value = if capped { f64::INFINITY } else { capped_value };
    Ok(UpperBound { value, capped_value, capped, plan })
}

/// `(C_b exp(bq d²/(4a(p−1))), C_b exp(d²/(4ab)))`.
pub fn t_point_mass_bounds(params: &DivParams, d: f64) -> Result<(f64, f64)> {
    if !(params.a > 0.0) || !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("point-mass bounds need a > 0, d ≥ 0; got a={}, d={d}", params.a)));
    }
    let DivParams { a, b, p, q, .. } = *params;
    let ln_cb = params.ln_c_b();
    let lower = (ln_cb + b * q / (4.0 * a * (p - 1.0)) * d * d).exp();
    let upper = (ln_cb + d * d / (4.0 * a * b)).exp();
    Ok((lower, upper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UpperCertificate {
    /// A closed form (`renyi` at `a = 0`, `point-mass` for Diracs).
    ClosedForm { tag: String },
    Coupling { entries: Vec<(usize, usize, f64)>, capped: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValue {
    pub lower: f64,
    #[serde(with = "extended_f64")]
    pub upper: f64,
    pub lower_certificate: LowerCertificate,
    pub upper_certificate: UpperCertificate,
}

impl CertifiedValue {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Two-sided bounds on `T_{a,b}(μ₀, μ₁)`. At `a = 0` the upper end is the
/// closed form.
pub fn t_ab_certified(
    params: &DivParams,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    search: &LowerSearch,
) -> Result<CertifiedValue> {
    let lower = t_ab_lower(params, mu0, mu1, space, search)?;
    let (mut upper, upper_certificate) = if params.a == 0.0 {
        let r = renyi_t0b(params.b, mu0, mu1)?;
        (r.value, UpperCertificate::ClosedForm { tag: "renyi".into() })
    } else {
        let u = t_ab_upper(params, mu0, mu1, space)?;
        let (s0, s1) = (mu0.support(), mu1.support());
        if s0.len() == 1 && s1.len() == 1 && !u.capped {
            let (_, pm) = t_point_mass_bounds(params, space.dist(s0[0], s1[0]))?;
            (pm, UpperCertificate::ClosedForm { tag: "point-mass".into() })
        } else {
            (u.value, UpperCertificate::Coupling { entries: u.plan.entries, capped: u.capped })
        }
    };
    let mut lo = lower.value;
    // Both ends equal C_b on identical inputs; absorb last-bit rounding.
    if lo > upper && lo <= upper * (1.0 + 1e-12) {
        upper = lo.max(upper);
        lo = upper;
    }
    Ok(CertifiedValue { lower: lo, upper, lower_certificate: lower.certificate, upper_certificate })
}
