//! Lower bounds on `T_{a,b}` from explicit dual-feasible flows.
//!
//! For a bounded 1-Lipschitz `f` and `k < 1/(4a)` the flow
//! `φ_s = exp(α(s) f² + β(s))` with
//!
//! ```text
//! α(s) = kb/(e^{bs} − 4ak),   β(s) = β₀ e^{−bs}
//! ```
//!
//! lies in `ℰ_{a,b}`, and optimizing `β₀` in closed form gives
//!
//! ```text
//! T_{a,b}(μ₀, μ₁) ≥ C_b (∫ e^{α(1) f²} dμ₁)^q / (∫ e^{α(0) f²} dμ₀)^{q−1}.
//! ```
//!
//! At `a = 0` the gradient term vanishes and the linear family
//! `φ_s = exp(λ e^{−bs} f + β(s))` is admissible for any Lipschitz `f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DivParams;
use crate::numeric::logsumexp;
use crate::space::{gradient_at, global_lipschitz, DiscreteMeasure, FiniteMetricSpace, LipschitzDictionary, Provenance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Beta0Rule {
    /// `β₀ = q(ln Z − ln W − b)`, the equality point of the Young-type
    /// inequality.
    #[serde(rename = "elem-ineq-optimal")]
    ElemIneqOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LowerCertificate {
    /// `φ_s = exp(α(s) f² + β(s))`.
    Expquad {
        f_index: Option<usize>,
        f_label: String,
        k: f64,
        beta0_rule: Beta0Rule,
        beta0: f64,
        f: Vec<f64>,
    },
    /// `φ_s = exp(λ e^{−bs} f + β(s))`, admissible only at `a = 0`.
    Explinear {
        f_index: Option<usize>,
        f_label: String,
        scale: f64,
        beta0_rule: Beta0Rule,
        beta0: f64,
        f: Vec<f64>,
    },
}

impl LowerCertificate {
    pub fn f(&self) -> &[f64] {
        match self {
            LowerCertificate::Expquad { f, .. } | LowerCertificate::Explinear { f, .. } => f,
        }
    }

    pub fn beta0(&self) -> f64 {
        match self {
            LowerCertificate::Expquad { beta0, .. } | LowerCertificate::Explinear { beta0, .. } => *beta0,
        }
    }

    /// Exponent of `φ_s` at point value `v`, without `β`: `α(s)·g(v)`.
    fn alpha_g(&self, params: &DivParams, s: f64, v: f64) -> f64 {
        match self {
            LowerCertificate::Expquad { k, .. } => alpha(params, *k, s) * v * v,
            LowerCertificate::Explinear { scale, .. } => scale * (-params.b * s).exp() * v,
        }
    }

    /// `∫φ₁ dμ₁ − ∫φ₀ dμ₀` with the recorded `β₀`.
    pub fn dual_objective(&self, params: &DivParams, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<f64> {
        let f = self.f();
        if f.len() != mu0.len() || f.len() != mu1.len() {
            return Err(Error::MalformedCertificate(format!("function has {} values for measures of size {}", f.len(), mu0.len())));
        }
        let beta0 = self.beta0();
        let end = beta0 * (-params.b).exp();
        let one: f64 = mu1.weights().iter().zip(f).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * (self.alpha_g(params, 1.0, *v) + end).exp()).sum();
        let zero: f64 = mu0.weights().iter().zip(f).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * (self.alpha_g(params, 0.0, *v) + beta0).exp()).sum();
        Ok(one - zero)
    }
}

fn alpha(params: &DivParams, k: f64, s: f64) -> f64 {
    k * params.b / ((params.b * s).exp() - 4.0 * params.a * k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerSearch {
    pub dictionary: LipschitzDictionary,
    /// Uniform steps of the `k` grid on `[0, 1/(4a))`.
    pub k_steps: usize,
    /// Refinements `(1 − 2^{−m})/(4a)` toward the admissible endpoint.
    pub endpoint_refinements: usize,
    /// Add `d(x, ·) ∧ d(x, y)` for `x ∈ supp μ₀`, `y ∈ supp μ₁` when the
    /// number of pairs is at most this.
    pub adapted_pairs_limit: usize,
}

impl LowerSearch {
    pub fn new(dictionary: LipschitzDictionary) -> Self {
        Self { dictionary, k_steps: 64, endpoint_refinements: 40, adapted_pairs_limit: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub certificate: LowerCertificate,
}

struct Candidate {
    index: Option<usize>,
    label: String,
    values: Vec<f64>,
}

/// Weighted log-integral `ln ∫ exp(c·g) dμ` restricted to the support.
struct Support {
    ln_w: Vec<f64>,
    idx: Vec<usize>,
}

impl Support {
    fn of(mu: &DiscreteMeasure) -> Self {
        let idx = mu.support();
        Self { ln_w: idx.iter().map(|&i| mu.weights()[i].ln()).collect(), idx }
    }

    /// `ln ∫ exp(c·(g − g_ref)) dμ`.
    fn ln_integral(&self, g: &[f64], c: f64, g_ref: f64) -> f64 {
        logsumexp(self.idx.iter().zip(&self.ln_w).map(|(&i, lw)| lw + c * (g[i] - g_ref)).collect::<Vec<_>>())
    }

    /// `g` at the dominant term of `∫ exp(c·g) dμ`, used to center exponents.
    fn reference(&self, g: &[f64], c: f64) -> f64 {
        self.idx.iter().map(|&i| g[i]).max_by(|x, y| (c * x).total_cmp(&(c * y))).unwrap_or(0.0)
    }
}

fn candidates(params: &DivParams, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &FiniteMetricSpace, search: &LowerSearch) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = search
        .dictionary
        .entries()
        .par_iter()
        .enumerate()
        .map(|(idx, e)| {
            let lip = match e.provenance {
                // Distance functions are 1-Lipschitz by the triangle inequality.
                Provenance::Zero | Provenance::DistanceToPoint { .. } | Provenance::TruncatedDistance { .. } => 1.0,
                _ => global_lipschitz(space, e.function.values()),
            };
            let values = if lip > 0.0 && lip != 1.0 { e.function.values().iter().map(|v| v / lip).collect() } else { e.function.values().to_vec() };
            Candidate { index: Some(idx), label: format!("{:?}", e.provenance), values }
        })
        .collect();
    let (s0, s1) = (mu0.support(), mu1.support());
    if s0.len() * s1.len() <= search.adapted_pairs_limit {
        for &x in &s0 {
            for &y in &s1 {
                let r = space.dist(x, y);
                let values = (0..space.n()).map(|j| space.dist(x, j).min(r)).collect();
                out.push(Candidate { index: None, label: format!("adapted: d({x},·) ∧ d({x},{y})"), values });
            }
        }
    }
    if params.a == 0.0 {
        // q ln ϱ on the support of μ₀ attains the supremum of the linear family.
        let w0 = mu0.weights();
        let w1 = mu1.weights();
        let values: Vec<f64> = (0..w0.len())
            .map(|i| if w0[i] > 0.0 { if w1[i] > 0.0 { params.q * (w1[i] / w0[i]).ln() } else { -700.0 } } else { 0.0 })
            .collect();
        out.push(Candidate { index: None, label: "adapted: q·ln(dμ₁/dμ₀)".into(), values });
    }
    out
}

fn k_grid(params: &DivParams, search: &LowerSearch) -> Vec<f64> {
    let mut ks = vec![0.0];
    if params.a > 0.0 {
        let kmax = 1.0 / (4.0 * params.a);
        ks.extend((1..search.k_steps).map(|j| kmax * j as f64 / search.k_steps as f64));
        ks.extend((7..7 + search.endpoint_refinements).map(|m| kmax * (1.0 - 0.5f64.powi(m as i32))));
        ks.extend((-3..=3).map(|m| -kmax * 2f64.powi(m)));
    } else {
        ks.extend((-10..=10).flat_map(|m| [2f64.powi(m), -(2f64.powi(m))]));
    }
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    ks
}

/// `(ln value, β₀)` of a quadratic-exponent certificate.
///
/// Exponents are centered at the dominant value `c` of `f²` under `μ₀`; the offset
/// contributes `c·(qα(1) − (q−1)α(0)) = −4abk²c/((e^b − 4ak)(1 − 4ak))`,
/// added in closed form so that large offsets do not cancel numerically.
fn eval_quad(params: &DivParams, s0: &Support, s1: &Support, f2: &[f64], k: f64) -> (f64, f64) {
    let DivParams { a, b, q, .. } = *params;
    let a1 = alpha(params, k, 1.0);
    let a0 = alpha(params, k, 0.0);
    let c = s0.reference(f2, a0);
    let ln_z = s1.ln_integral(f2, a1, c);
    let ln_w = s0.ln_integral(f2, a0, c);
    let offset = if a == 0.0 || c == 0.0 { 0.0 } else { -4.0 * a * b * k * k * c / ((b.exp() - 4.0 * a * k) * (1.0 - 4.0 * a * k)) };
    let value = params.ln_c_b() + q * ln_z - (q - 1.0) * ln_w + offset;
    (value, q * (ln_z - ln_w + (a1 - a0) * c - b))
}

/// As [`eval_quad`]; here the offset term `c·λ(qe^{−b} − (q−1))` vanishes
/// identically.
fn eval_linear(params: &DivParams, s0: &Support, s1: &Support, f: &[f64], scale: f64) -> (f64, f64) {
    let c = s0.reference(f, scale);
    let e1 = scale * (-params.b).exp();
    let ln_z = s1.ln_integral(f, e1, c);
    let ln_w = s0.ln_integral(f, scale, c);
    let q = params.q;
    (params.ln_c_b() + q * ln_z - (q - 1.0) * ln_w, q * (ln_z - ln_w + (e1 - scale) * c - params.b))
}

/// Best certificate over the dictionary, measure-adapted functions and the
/// `k` grid (plus the linear family at `a = 0`). Always `≥ C_b`.
pub fn t_ab_lower(
    params: &DivParams,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    search: &LowerSearch,
) -> Result<LowerBound> {
    mu0.same_len(mu1)?;
    space.expect_len(mu0.len())?;
    if search.dictionary.len() > 0 && search.dictionary.entries()[0].function.values().len() != space.n() {
        return Err(Error::DimensionMismatch { expected: space.n(), found: search.dictionary.entries()[0].function.values().len() });
    }
    let s0 = Support::of(mu0);
    let s1 = Support::of(mu1);
    let ks = k_grid(params, search);
    let cands = candidates(params, mu0, mu1, space, search);
    let linear_scales: Vec<f64> = (-8..=8).flat_map(|m| [2f64.powi(m), -(2f64.powi(m))]).chain([1.0]).collect();

    #[derive(Clone, Copy)]
    enum Fam {
        Quad(f64),
        Lin(f64),
    }
    let best = cands
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            let f2: Vec<f64> = c.values.iter().map(|v| v * v).collect();
            let mut best = (f64::NEG_INFINITY, 0.0, Fam::Quad(0.0));
            for &k in &ks {
                if params.a > 0.0 && (params.b.exp() - 4.0 * params.a * k).abs() < 1e-9 {
                    continue;
                }
                let (v, b0) = eval_quad(params, &s0, &s1, &f2, k);
                if v > best.0 {
                    best = (v, b0, Fam::Quad(k));
                }
            }
            if let Fam::Quad(k) = best.2 {
                // Golden-section polish between the neighbouring grid nodes.
                let pos = ks.iter().position(|&x| x == k).unwrap_or(0);
                let lo = if pos > 0 { ks[pos - 1] } else { k };
                let hi = if pos + 1 < ks.len() { ks[pos + 1] } else { k };
                if hi > lo {
                    let g = (5f64.sqrt() - 1.0) / 2.0;
                    let (mut a, mut b) = (lo, hi);
                    for _ in 0..60 {
                        let x1 = b - g * (b - a);
                        let x2 = a + g * (b - a);
                        if eval_quad(params, &s0, &s1, &f2, x1).0 > eval_quad(params, &s0, &s1, &f2, x2).0 {
                            b = x2;
                        } else {
                            a = x1;
                        }
                    }
                    let k = 0.5 * (a + b);
                    let (v, b0) = eval_quad(params, &s0, &s1, &f2, k);
                    if v > best.0 {
                        best = (v, b0, Fam::Quad(k));
                    }
                }
            }
            if params.a == 0.0 {
                for &lam in &linear_scales {
                    let (v, b0) = eval_linear(params, &s0, &s1, &c.values, lam);
                    if v > best.0 {
                        best = (v, b0, Fam::Lin(lam));
                    }
                }
            }
            (best.0, ci, best.1, best.2)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, 0.0, Fam::Quad(0.0)),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );

    let (ln_value, ci, beta0, fam) = best;
    let (ln_value, cand_values, index, label) = if ci == usize::MAX || !(ln_value >= params.ln_c_b()) {
        // f = 0 certificate.
        (params.ln_c_b(), vec![0.0; space.n()], None, "zero".to_string())
    } else {
        let c = &cands[ci];
        (ln_value, c.values.clone(), c.index, c.label.clone())
    };
    let zero_case = ci == usize::MAX || ln_value == params.ln_c_b() && cand_values.iter().all(|v| *v == 0.0);
    let certificate = match (zero_case, fam) {
        (true, _) => LowerCertificate::Expquad {
            f_index: index,
            f_label: label,
            k: 0.0,
            beta0_rule: Beta0Rule::ElemIneqOptimal,
            beta0: -params.q * params.b,
            f: cand_values,
        },
        (false, Fam::Quad(k)) => LowerCertificate::Expquad { f_index: index, f_label: label, k, beta0_rule: Beta0Rule::ElemIneqOptimal, beta0, f: cand_values },
        (false, Fam::Lin(scale)) => {
            LowerCertificate::Explinear { f_index: index, f_label: label, scale, beta0_rule: Beta0Rule::ElemIneqOptimal, beta0, f: cand_values }
        }
    };
    // The f = 0 certificate gives exactly C_b; never report less.
    let value = ln_value.exp().max(params.c_b);
    Ok(LowerBound { value, certificate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualFeasibilityReport {
    /// Largest value of `(∂_sφ + aφ|∇ln φ|² + bφ ln φ)/φ` over points and
    /// times (`+∞` when `α` has a pole in `[0, 1]`).
    #[serde(with = "crate::numeric::extended_f64")]
    pub max_violation: f64,
    pub worst_point: usize,
    pub worst_time: f64,
    pub pole: bool,
}

impl DualFeasibilityReport {
    pub fn feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Checks the defining inequality of `ℰ_{a,b}` for a certificate flow at
/// every point and time node, with the discrete gradient and exact time
/// derivatives. The residual is reported divided by `φ > 0`.
///
/// For the quadratic family `α` has a pole in `[0, 1]` exactly when
/// `1 ≤ 4ak ≤ e^b`; beyond `e^b/(4a)` the flow is again admissible (with
/// `α < 0`).
pub fn verify_dual_feasible(params: &DivParams, certificate: &LowerCertificate, space: &FiniteMetricSpace, times: &[f64]) -> Result<DualFeasibilityReport> {
    let f = certificate.f();
    space.expect_len(f.len()).map_err(|_| Error::MalformedCertificate(format!("function has {} values, space has {} points", f.len(), space.n())))?;
    if f.iter().any(|v| !v.is_finite()) || !certificate.beta0().is_finite() {
        return Err(Error::MalformedCertificate("non-finite entries".into()));
    }
    if let Some(s) = times.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::MalformedCertificate(format!("time {s} outside [0, 1]")));
    }
    let (a, b) = (params.a, params.b);
    let beta0 = certificate.beta0();
    let mut report = DualFeasibilityReport { max_violation: f64::NEG_INFINITY, worst_point: 0, worst_time: 0.0, pole: false };
    let (g, grad_g): (Vec<f64>, Vec<f64>) = match certificate {
        LowerCertificate::Expquad { k, .. } => {
            if !k.is_finite() {
                return Err(Error::MalformedCertificate("k is not finite".into()));
            }
            let four_ak = 4.0 * a * k;
            if a > 0.0 && four_ak >= 1.0 && four_ak <= b.exp() {
                report.max_violation = f64::INFINITY;
                report.worst_time = (four_ak.ln() / b).clamp(0.0, 1.0);
                report.pole = true;
                return Ok(report);
            }
            let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
            let grad = (0..space.n()).map(|i| gradient_at(space, &f2, i)).collect();
            (f2, grad)
        }
        LowerCertificate::Explinear { .. } => (f.to_vec(), (0..space.n()).map(|i| gradient_at(space, f, i)).collect()),
    };
    for &s in times {
        let beta = beta0 * (-b * s).exp();
        let dbeta = -b * beta;
        let (al, dal) = match certificate {
            LowerCertificate::Expquad { k, .. } => {
                let den = (b * s).exp() - 4.0 * a * k;
                (k * b / den, -k * b * b * (b * s).exp() / (den * den))
            }
            LowerCertificate::Explinear { scale, .. } => {
                let al = scale * (-b * s).exp();
                (al, -b * al)
            }
        };
        for i in 0..space.n() {
            let ln_phi = al * g[i] + beta;
            let v = dal * g[i] + dbeta + a * (al * grad_g[i]).powi(2) + b * ln_phi;
            if v > report.max_violation {
                report.max_violation = v;
                report.worst_point = i;
                report.worst_time = s;
            }
        }
    }
    Ok(report)
}
