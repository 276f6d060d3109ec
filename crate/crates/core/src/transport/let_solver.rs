//! Logarithmic entropy transport.
//!
//! Minimizes
//!
//! ```text
//! F(γ) = KL(γ₀|μ₀) + KL(γ₁|μ₁) + Σ γ_ij ℓ(d_ij),   ℓ(d) = −2 ln cos(d ∧ π/2)
//! ```
//!
//! over nonnegative couplings `γ` supported on pairs with `d < π/2`. The
//! concave dual is
//!
//! ```text
//! D(φ, ψ) = Σ μ₀(1 − e^{−φ}) + Σ μ₁(1 − e^{−ψ}),   φ_i + ψ_j ≤ ℓ_ij,
//! ```
//!
//! and every reported value carries the gap `F(γ) − D(φ, ψ)` of an explicit
//! feasible pair.
//!
//! Three stages:
//! 1. log-domain unbalanced Sinkhorn scaling over a geometric ε schedule
//!    (warm start and diagnostics);
//! 2. a log-barrier Newton method on the exact program, with the Newton
//!    system reduced to the marginal nodes;
//! 3. once the barrier iterate identifies a forest support, the KKT system on
//!    that forest is solved in closed form and certified.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numeric::{kl_term, logsumexp};
use crate::{Error, Result};

/// `ℓ(d) = −2 ln cos d` for `d < π/2`, `+∞` otherwise.
pub fn let_cost(d: f64) -> f64 {
    if d >= std::f64::consts::FRAC_PI_2 {
        f64::INFINITY
    } else {
        -2.0 * d.cos().ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LetConfig {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_factor: f64,
    pub sinkhorn_max_iter: usize,
    pub sinkhorn_tol: f64,
    pub newton_max_iter: usize,
    /// Required certified gap, relative to the value.
    pub gap_tolerance: f64,
    /// Absolute gap accepted for values near zero.
    pub gap_floor: f64,
    /// Above this many support nodes the Newton stages are skipped.
    pub max_newton_nodes: usize,
}

impl Default for LetConfig {
    fn default() -> Self {
        Self {
            epsilon_start: 1e-1,
            epsilon_end: 1e-4,
            epsilon_factor: 0.1,
            sinkhorn_max_iter: 2000,
            sinkhorn_tol: 1e-10,
            newton_max_iter: 400,
            gap_tolerance: 1e-5,
            gap_floor: 1e-12,
            max_newton_nodes: 1200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetDiagnostics {
    /// Total Sinkhorn sweeps.
    pub iterations: usize,
    pub newton_iterations: usize,
    pub epsilon_schedule: Vec<f64>,
    /// Unregularized objective at the entropic plan of each ε stage.
    pub entropic_values: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    /// Closed-form forest solve succeeded.
    pub polished: bool,
}

/// Solver output in compressed support coordinates.
pub(crate) struct RawSolution {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// `(row index, col index, mass)` in compressed coordinates.
    pub flows: Vec<(usize, usize, f64)>,
    pub value: f64,
    pub gap: f64,
    pub certified: bool,
    pub diagnostics: LetDiagnostics,
}

struct Problem<'a> {
    mu0: Vec<f64>,
    mu1: Vec<f64>,
    /// Edges `(r, s, ℓ)` with finite cost.
    edges: Vec<(usize, usize, f64)>,
    row_edges: Vec<Vec<usize>>,
    col_edges: Vec<Vec<usize>>,
    config: &'a LetConfig,
}

impl Problem<'_> {
    fn m(&self) -> usize {
        self.mu0.len()
    }

    fn k(&self) -> usize {
        self.mu1.len()
    }

    fn marginals(&self, gamma: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut g0 = vec![0.0; self.m()];
        let mut g1 = vec![0.0; self.k()];
        for (e, &(r, s, _)) in self.edges.iter().enumerate() {
            g0[r] += gamma[e];
            g1[s] += gamma[e];
        }
        (g0, g1)
    }

    fn primal(&self, gamma: &[f64]) -> f64 {
        let (g0, g1) = self.marginals(gamma);
        let kl: f64 = g0.iter().zip(&self.mu0).map(|(r, m)| kl_term(*r, *m)).sum::<f64>()
            + g1.iter().zip(&self.mu1).map(|(r, m)| kl_term(*r, *m)).sum::<f64>();
        kl + self.edges.iter().zip(gamma).map(|(&(_, _, l), g)| g * l).sum::<f64>()
    }

    /// Feasible dual pair from column potentials by a double c-transform.
    fn dual_from_psi(&self, psi: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let phi: Vec<f64> = (0..self.m())
            .map(|r| self.row_edges[r].iter().map(|&e| self.edges[e].2 - psi[self.edges[e].1]).fold(f64::INFINITY, f64::min))
            .collect();
        let psi: Vec<f64> = (0..self.k())
            .map(|s| self.col_edges[s].iter().map(|&e| self.edges[e].2 - phi[self.edges[e].0]).fold(f64::INFINITY, f64::min))
            .collect();
        let value = self.mu0.iter().zip(&phi).map(|(m, p)| -m * (-p).exp_m1()).sum::<f64>()
            + self.mu1.iter().zip(&psi).map(|(m, p)| -m * (-p).exp_m1()).sum::<f64>();
        (value, phi, psi)
    }

    fn dual_from_plan(&self, gamma: &[f64]) -> f64 {
        let (_, g1) = self.marginals(gamma);
        let psi: Vec<f64> = g1
            .iter()
            .zip(&self.mu1)
            .map(|(g, m)| if *g > 0.0 { -(g / m).ln() } else { f64::INFINITY })
            .collect();
        self.dual_from_psi(&psi).0
    }

    fn target_gap(&self, value: f64) -> f64 {
        (self.config.gap_tolerance * value.abs()).max(self.config.gap_floor)
    }
}

pub(crate) fn solve_let(mu0: &[f64], mu1: &[f64], cost: impl Fn(usize, usize) -> f64, config: &LetConfig) -> Result<RawSolution> {
    if mu0.len() != mu1.len() {
        return Err(Error::DimensionMismatch { expected: mu0.len(), found: mu1.len() });
    }
    let rows: Vec<usize> = (0..mu0.len()).filter(|&i| mu0[i] > 0.0).collect();
    let cols: Vec<usize> = (0..mu1.len()).filter(|&j| mu1[j] > 0.0).collect();
    let mut edges = Vec::new();
    let mut row_edges = vec![Vec::new(); rows.len()];
    let mut col_edges = vec![Vec::new(); cols.len()];
    for (r, &i) in rows.iter().enumerate() {
        for (s, &j) in cols.iter().enumerate() {
            let l = cost(i, j);
            if l.is_nan() || l < 0.0 {
                return Err(Error::InvalidParameter(format!("transport cost at ({i},{j}) is {l}")));
            }
            if l.is_finite() {
                row_edges[r].push(edges.len());
                col_edges[s].push(edges.len());
                edges.push((r, s, l));
            }
        }
    }
    let problem = Problem {
        mu0: rows.iter().map(|&i| mu0[i]).collect(),
        mu1: cols.iter().map(|&j| mu1[j]).collect(),
        edges,
        row_edges,
        col_edges,
        config,
    };

    let mut diagnostics = LetDiagnostics {
        iterations: 0,
        newton_iterations: 0,
        epsilon_schedule: Vec::new(),
        entropic_values: Vec::new(),
        primal: 0.0,
        dual: 0.0,
        polished: false,
    };

    if problem.edges.is_empty() {
        // Pure creation and annihilation: γ = 0 is optimal and the dual
        // supremum is attained in the limit φ, ψ → +∞.
        let value = problem.mu0.iter().sum::<f64>() + problem.mu1.iter().sum::<f64>();
        diagnostics.primal = value;
        diagnostics.dual = value;
        diagnostics.polished = true;
        return Ok(RawSolution { rows, cols, flows: Vec::new(), value, gap: 0.0, certified: true, diagnostics });
    }

    let mut gamma = sinkhorn(&problem, &mut diagnostics);
    let mut best = certify(&problem, &gamma);

    let nodes = problem.m() + problem.k();
    if nodes <= config.max_newton_nodes {
        if let Some(exact) = barrier_and_polish(&problem, &mut gamma, &mut diagnostics) {
            if exact.1 < best.1 || !best.1.is_finite() {
                best = exact;
            }
        } else {
            let c = certify(&problem, &gamma);
            if c.1 < best.1 {
                best = c;
            }
        }
    }

    let (flows_flat, gap, primal, dual) = best;
    let flows = problem
        .edges
        .iter()
        .zip(&flows_flat)
        .filter(|(_, g)| **g > 0.0)
        .map(|(&(r, s, _), &g)| (r, s, g))
        .collect();
    diagnostics.primal = primal;
    diagnostics.dual = dual;
    let certified = gap <= problem.target_gap(primal);
    Ok(RawSolution { rows, cols, flows, value: primal, gap, certified, diagnostics })
}

/// `(γ, gap, primal, dual)`.
type Certified = (Vec<f64>, f64, f64, f64);

fn certify(problem: &Problem, gamma: &[f64]) -> Certified {
    let primal = problem.primal(gamma);
    let dual = problem.dual_from_plan(gamma);
    (gamma.to_vec(), (primal - dual).max(0.0), primal, dual)
}

fn sinkhorn(problem: &Problem, diagnostics: &mut LetDiagnostics) -> Vec<f64> {
    let config = problem.config;
    let ln0: Vec<f64> = problem.mu0.iter().map(|v| v.ln()).collect();
    let ln1: Vec<f64> = problem.mu1.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; problem.m()];
    let mut g = vec![0.0; problem.k()];
    let mut eps = config.epsilon_start;
    let mut gamma = vec![0.0; problem.edges.len()];
    loop {
        let lambda = 1.0 / (1.0 + eps);
        for _ in 0..config.sinkhorn_max_iter {
            diagnostics.iterations += 1;
            let mut change: f64 = 0.0;
            for r in 0..problem.m() {
                let es = &problem.row_edges[r];
                if es.is_empty() {
                    continue;
                }
                let lse = logsumexp(es.iter().map(|&e| {
                    let (_, s, l) = problem.edges[e];
                    (g[s] - l) / eps + ln1[s]
                }));
                let new = -lambda * eps * lse;
                change = change.max((new - f[r]).abs());
                f[r] = new;
            }
            for s in 0..problem.k() {
                let es = &problem.col_edges[s];
                if es.is_empty() {
                    continue;
                }
                let lse = logsumexp(es.iter().map(|&e| {
                    let (r, _, l) = problem.edges[e];
                    (f[r] - l) / eps + ln0[r]
                }));
                let new = -lambda * eps * lse;
                change = change.max((new - g[s]).abs());
                g[s] = new;
            }
            if change < config.sinkhorn_tol {
                break;
            }
        }
        for (e, &(r, s, l)) in problem.edges.iter().enumerate() {
            gamma[e] = ((f[r] + g[s] - l) / eps + ln0[r] + ln1[s]).exp();
        }
        diagnostics.epsilon_schedule.push(eps);
        diagnostics.entropic_values.push(problem.primal(&gamma));
        if eps <= config.epsilon_end * (1.0 + 1e-9) {
            break;
        }
        eps = (eps * config.epsilon_factor).max(config.epsilon_end);
    }
    gamma
}

/// Barrier path-following from the entropic plan; attempts the forest solve
/// along the way. Returns the certified exact solution when the forest solve
/// succeeds.
fn barrier_and_polish(problem: &Problem, gamma: &mut [f64], diagnostics: &mut LetDiagnostics) -> Option<Certified> {
    let total: f64 = gamma.iter().sum();
    let floor = 1e-12 * total.max(1e-300);
    gamma.iter_mut().for_each(|g| *g = g.max(floor));

    if let Some(exact) = forest_solve(problem, gamma, 1e-10) {
        diagnostics.polished = true;
        return Some(exact);
    }
    let mut tau = 1e-5;
    let mut last: Option<Certified> = None;
    while tau >= 1e-15 {
        center(problem, gamma, tau, diagnostics);
        if let Some(exact) = forest_solve(problem, gamma, tau) {
            diagnostics.polished = true;
            return Some(exact);
        }
        let c = certify(problem, gamma);
        let done = c.1 <= 1e-3 * problem.target_gap(c.2);
        last = Some(c);
        if done || diagnostics.newton_iterations >= problem.config.newton_max_iter {
            break;
        }
        tau *= 0.1;
    }
    if let Some(c) = &last {
        gamma.copy_from_slice(&c.0);
    }
    None
}

fn barrier_objective(problem: &Problem, gamma: &[f64], tau: f64) -> f64 {
    problem.primal(gamma) - tau * gamma.iter().map(|g| g.ln()).sum::<f64>()
}

/// Newton centering for the barrier problem at weight `tau`.
fn center(problem: &Problem, gamma: &mut [f64], tau: f64, diagnostics: &mut LetDiagnostics) {
    let (m, k) = (problem.m(), problem.k());
    let ne = problem.edges.len();
    for _ in 0..60 {
        if diagnostics.newton_iterations >= problem.config.newton_max_iter {
            return;
        }
        diagnostics.newton_iterations += 1;
        let (g0, g1) = problem.marginals(gamma);
        let grad: Vec<f64> = problem
            .edges
            .iter()
            .zip(gamma.iter())
            .map(|(&(r, s, l), &x)| (g0[r] / problem.mu0[r]).ln() + (g1[s] / problem.mu1[s]).ln() + l - tau / x)
            .collect();
        // H = B + AᵀDA with B = diag(τ/γ²), D = diag(1/γ₀, 1/γ₁).
        // Woodbury: H⁻¹g = B⁻¹g − B⁻¹Aᵀ(D⁻¹ + AB⁻¹Aᵀ)⁻¹AB⁻¹g.
        let binv: Vec<f64> = gamma.iter().map(|x| x * x / tau).collect();
        let mut mat = DMatrix::<f64>::zeros(m + k, m + k);
        let mut rhs = DVector::<f64>::zeros(m + k);
        for r in 0..m {
            mat[(r, r)] = g0[r];
        }
        for s in 0..k {
            mat[(m + s, m + s)] = g1[s];
        }
        for (e, &(r, s, _)) in problem.edges.iter().enumerate() {
            let w = binv[e];
            mat[(r, r)] += w;
            mat[(m + s, m + s)] += w;
            mat[(r, m + s)] += w;
            mat[(m + s, r)] += w;
            let y = w * grad[e];
            rhs[r] += y;
            rhs[m + s] += y;
        }
        let Some(chol) = mat.cholesky() else { return };
        let z = chol.solve(&rhs);
        let step: Vec<f64> = (0..ne)
            .map(|e| {
                let (r, s, _) = problem.edges[e];
                -(binv[e] * grad[e] - binv[e] * (z[r] + z[m + s]))
            })
            .collect();
        let decrement: f64 = -grad.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
        if !(decrement > 1e-6 * tau) {
            return;
        }
        let mut alpha: f64 = 1.0;
        for (x, d) in gamma.iter().zip(&step) {
            if *d < 0.0 {
                alpha = alpha.min(-0.99 * x / d);
            }
        }
        let f0 = barrier_objective(problem, gamma, tau);
        let mut trial = vec![0.0; ne];
        loop {
            for e in 0..ne {
                trial[e] = gamma[e] + alpha * step[e];
            }
            let f1 = barrier_objective(problem, &trial, tau);
            if f1 <= f0 - 0.25 * alpha * decrement {
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                return;
            }
        }
        gamma.copy_from_slice(&trial);
        if decrement < 1e-2 * tau {
            return;
        }
    }
}

/// Closed-form KKT solve on the forest of edges the barrier iterate marks
/// as active. `None` when the active set is not a spanning forest of the
/// non-isolated nodes or the resulting point fails the optimality checks.
fn forest_solve(problem: &Problem, gamma: &[f64], tau: f64) -> Option<Certified> {
    let (m, k) = (problem.m(), problem.k());
    let nodes = m + k;
    let threshold = (tau * gamma.iter().sum::<f64>()).sqrt();
    let active: Vec<usize> = (0..gamma.len()).filter(|&e| gamma[e] > threshold).collect();

    // Union-find forest check.
    let mut uf: Vec<usize> = (0..nodes).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for &e in &active {
        let (r, s, _) = problem.edges[e];
        let (a, b) = (find(&mut uf, r), find(&mut uf, m + s));
        if a == b {
            return None;
        }
        uf[a] = b;
        adj[r].push(e);
        adj[m + s].push(e);
    }
    // Every node with a finite-cost edge must carry mass at the optimum.
    for r in 0..m {
        if !problem.row_edges[r].is_empty() && adj[r].is_empty() {
            return None;
        }
    }
    for s in 0..k {
        if !problem.col_edges[s].is_empty() && adj[m + s].is_empty() {
            return None;
        }
    }

    let mut pot = vec![f64::INFINITY; nodes];
    let mut parent_edge = vec![usize::MAX; nodes];
    let mut visited = vec![false; nodes];
    let mut flows = vec![0.0; gamma.len()];
    let mut mass = vec![0.0; nodes];
    for root in 0..nodes {
        if visited[root] || adj[root].is_empty() {
            continue;
        }
        let mut order = vec![root];
        visited[root] = true;
        pot[root] = 0.0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &e in &adj[v] {
                let (r, s, l) = problem.edges[e];
                let w = if v < m { m + s } else { r };
                if !visited[w] {
                    visited[w] = true;
                    pot[w] = l - pot[v];
                    parent_edge[w] = e;
                    order.push(w);
                }
            }
        }
        let weight = |v: usize| if v < m { problem.mu0[v].ln() } else { problem.mu1[v - m].ln() };
        let ln_a = logsumexp(order.iter().filter(|&&v| v < m).map(|&v| weight(v) - pot[v]).collect::<Vec<_>>());
        let ln_b = logsumexp(order.iter().filter(|&&v| v >= m).map(|&v| weight(v) - pot[v]).collect::<Vec<_>>());
        let c = 0.5 * (ln_a - ln_b);
        for &v in &order {
            pot[v] += if v < m { c } else { -c };
            mass[v] = (weight(v) - pot[v]).exp();
        }
        // Leaf peeling in reverse BFS order.
        let mut residual: Vec<f64> = order.iter().map(|&v| mass[v]).collect();
        let index_of: std::collections::HashMap<usize, usize> = order.iter().enumerate().map(|(p, &v)| (v, p)).collect();
        for p in (1..order.len()).rev() {
            let v = order[p];
            let e = parent_edge[v];
            let f = residual[p];
            flows[e] = f;
            let (r, s, _) = problem.edges[e];
            let u = if v < m { m + s } else { r };
            residual[index_of[&u]] -= f;
        }
    }

    let scale = mass.iter().fold(0.0f64, |a, b| a.max(*b)).max(1e-300);
    let mut worst: f64 = 0.0;
    for &e in &active {
        worst = worst.max(-flows[e] / scale);
    }
    for &(r, s, l) in &problem.edges {
        worst = worst.max((pot[r] + pot[m + s] - l) / (1.0 + l.abs()));
    }
    if worst > 1e-9 {
        return None;
    }
    flows.iter_mut().for_each(|f| *f = f.max(0.0));
    let primal = problem.primal(&flows);
    let psi: Vec<f64> = (0..k).map(|s| pot[m + s]).collect();
    let (dual, _, _) = problem.dual_from_psi(&psi);
    let gap = (primal - dual).max(0.0);
    Some((flows, gap, primal, dual))
}
