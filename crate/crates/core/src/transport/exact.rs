//! Exact balanced optimal transport.
//!
//! Two routes: a transportation simplex (network simplex on the bipartite
//! support graph) for arbitrary costs, and the monotone (quantile) coupling on
//! the line, optimal for costs that are convex functions of `x − y`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An optimal plan as sparse `(i, j, mass)` triplets in original indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub value: f64,
    pub entries: Vec<(usize, usize, f64)>,
    /// Simplex pivots (0 for the monotone route).
    pub pivots: usize,
}

impl TransportPlan {
    /// Row and column sums of the plan on `n` points.
    pub fn marginals(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut r = vec![0.0; n];
        let mut c = vec![0.0; n];
        for &(i, j, m) in &self.entries {
            r[i] += m;
            c[j] += m;
        }
        (r, c)
    }

    /// Re-evaluates `Σ π_ij c(i,j)`.
    pub fn cost_under<F: Fn(usize, usize) -> f64>(&self, cost: F) -> f64 {
        self.entries.iter().map(|&(i, j, m)| m * cost(i, j)).sum()
    }
}

fn support(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > 0.0).collect()
}

/// Rescales `demand` to the total of `supply` (probability vectors agree up
/// to rounding; the simplex needs exact balance).
fn balanced(supply: &[f64], demand: &[f64]) -> Result<Vec<f64>> {
    let s: f64 = supply.iter().sum();
    let d: f64 = demand.iter().sum();
    if !(s > 0.0) || !(d > 0.0) {
        return Err(Error::InvalidMeasure("transport between zero measures".into()));
    }
    if ((s - d) / s).abs() > 1e-9 {
        return Err(Error::InvalidMeasure(format!("unbalanced masses {s} and {d}")));
    }
    Ok(demand.iter().map(|v| v * s / d).collect())
}

/// Monotone coupling of two measures on the line. Optimal for any cost
/// `c(x − y)` with `c` convex.
pub fn monotone_1d<F: Fn(usize, usize) -> f64>(positions: &[f64], mu0: &[f64], mu1: &[f64], cost: F) -> Result<TransportPlan> {
    let mu1 = balanced(mu0, mu1)?;
    let mut a = support(mu0);
    let mut b = support(&mu1);
    a.sort_by(|x, y| positions[*x].total_cmp(&positions[*y]));
    b.sort_by(|x, y| positions[*x].total_cmp(&positions[*y]));
    let mut entries = Vec::with_capacity(a.len() + b.len());
    let (mut p, mut q) = (0, 0);
    let mut ra = mu0[a[0]];
    let mut rb = mu1[b[0]];
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            entries.push((a[p], b[q], m));
        }
        ra -= m;
        rb -= m;
        let last_a = p + 1 == a.len();
        let last_b = q + 1 == b.len();
        if last_a && last_b {
            break;
        }
        if (ra <= rb && !last_a) || last_b {
            p += 1;
            ra += mu0[a[p]];
        } else {
            q += 1;
            rb += mu1[b[q]];
        }
    }
    let value = entries.iter().map(|&(i, j, m)| m * cost(i, j)).sum();
    Ok(TransportPlan { value, entries, pivots: 0 })
}

#[derive(Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    flow: f64,
}

/// Transportation simplex over the supports of `mu0` and `mu1`.
///
/// The initial basis is the north-west corner tree; entering arcs are chosen
/// by most negative reduced cost, switching to the lowest-index rule after a
/// run of degenerate pivots to rule out cycling.
pub fn network_simplex<F: Fn(usize, usize) -> f64>(mu0: &[f64], mu1: &[f64], cost: F, max_pivots: usize) -> Result<TransportPlan> {
    let mu1 = balanced(mu0, mu1)?;
    let rows = support(mu0);
    let cols = support(&mu1);
    let (m, k) = (rows.len(), cols.len());
    let c: Vec<f64> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| cost(i, j)).collect();
    if let Some(pos) = c.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite transport cost at ({}, {})", rows[pos / k], cols[pos % k])));
    }
    let scale = c.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale;

    // North-west corner.
    let mut a: Vec<f64> = rows.iter().map(|&i| mu0[i]).collect();
    let mut b: Vec<f64> = cols.iter().map(|&j| mu1[j]).collect();
    let mut basis: Vec<Cell> = Vec::with_capacity(m + k - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]);
        basis.push(Cell { i, j, flow: x });
        a[i] -= x;
        b[j] -= x;
        if i + 1 == m && j + 1 == k {
            break;
        }
        if (a[i] <= b[j] && i + 1 < m) || j + 1 == k {
            i += 1;
        } else {
            j += 1;
        }
    }

    let nodes = m + k;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; k];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut parent_cell = vec![usize::MAX; nodes];
    let mut queue = Vec::with_capacity(nodes);
    let mut pivots = 0;
    let mut degenerate_run = 0;

    loop {
        for l in adj.iter_mut() {
            l.clear();
        }
        for (e, cell) in basis.iter().enumerate() {
            adj[cell.i].push(e);
            adj[m + cell.j].push(e);
        }
        // Potentials from row 0 by BFS over the basis tree.
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[0] = 0;
        u[0] = 0.0;
        queue.clear();
        queue.push(0);
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &e in &adj[node] {
                let cell = basis[e];
                let other = if node < m { m + cell.j } else { cell.i };
                if parent[other] == usize::MAX {
                    parent[other] = node;
                    if other < m {
                        u[other] = c[other * k + cell.j] - v[cell.j];
                    } else {
                        v[other - m] = c[cell.i * k + other - m] - u[cell.i];
                    }
                    queue.push(other);
                }
            }
        }
        debug_assert_eq!(queue.len(), nodes, "basis must span");

        let bland = degenerate_run > 2 * nodes;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'price: for r in 0..m {
            for s in 0..k {
                let rc = c[r * k + s] - u[r] - v[s];
                if rc < best {
                    entering = Some((r, s));
                    if bland {
                        break 'price;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };
        if pivots >= max_pivots {
            return Err(Error::NotConverged { iterations: pivots, gap: -best });
        }
        pivots += 1;

        // Tree path from row ei to column ej, found by BFS from ei.
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[ei] = ei;
        queue.clear();
        queue.push(ei);
        let mut head = 0;
        let target = m + ej;
        while head < queue.len() && parent[target] == usize::MAX {
            let node = queue[head];
            head += 1;
            for &e in &adj[node] {
                let cell = basis[e];
                let other = if node < m { m + cell.j } else { cell.i };
                if parent[other] == usize::MAX {
                    parent[other] = node;
                    parent_cell[other] = e;
                    queue.push(other);
                }
            }
        }
        // Walking back from column ej, arcs alternate −, +, −, …
        let mut path = Vec::new();
        let mut node = target;
        while node != ei {
            path.push(parent_cell[node]);
            node = parent[node];
        }
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = basis[e].flow;
                let better = f < theta || (bland && f == theta && (basis[e].i, basis[e].j) < (basis[leave].i, basis[leave].j));
                if better {
                    theta = f;
                    leave = e;
                }
            }
        }
        for (pos, &e) in path.iter().enumerate() {
            let cell = &mut basis[e];
            if pos % 2 == 0 {
                cell.flow = (cell.flow - theta).max(0.0);
            } else {
                cell.flow += theta;
            }
        }
        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        basis[leave] = Cell { i: ei, j: ej, flow: theta };
    }

    let entries: Vec<(usize, usize, f64)> =
        basis.iter().filter(|c| c.flow > 0.0).map(|c| (rows[c.i], cols[c.j], c.flow)).collect();
    let value = basis.iter().map(|cell| cell.flow * c[cell.i * k + cell.j]).sum();
    Ok(TransportPlan { value, entries, pivots })
}
