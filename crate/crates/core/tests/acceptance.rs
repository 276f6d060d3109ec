//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Built with `harness = false` so every line is visible in
//! `cargo test` output.

use std::f64::consts::{FRAC_PI_2, LN_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hklab::divergence::{c_b, gronwall_flow, renyi_t0b, t_ab_certified, t_point_mass_bounds, young_gap, DivParams, LowerSearch};
use hklab::dynamics::{
    gaussian_quasi_invariance, hellinger_decay_experiment, w2_decay_experiment, LangevinConfig, QuasiConfig, StartMeasure,
};
use hklab::funcineq::{
    eti_harness, hkc_harness, hpi_check, increment_lemma_check, interior_points, kuwada_harness, ratio_at, rlsi_constant, rpi_constant,
    sample_measure_pairs, whi_check, ConstantKind, SampleConfig, Tolerance,
};
use hklab::markov::{heat_kernel_grid, ou_kernel_grid, MarkovKernel};
use hklab::space::{build_dictionary, discrete_gradient, DictionaryConfig, DiscreteMeasure, FiniteMetricSpace, LipschitzDictionary};
use hklab::transport::{let_solve, w_ab, w_family_checks, w_triangle_residual, WParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: usize,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

const INTERIOR: f64 = 1e-9;

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "Dirac closed form of w_ab", limit: Some(Duration::from_secs(60)), run: c01_dirac_closed_form },
        Criterion { id: 2, title: "LET solver against brute-force minimizer", limit: Some(Duration::from_secs(120)), run: c02_let_oracle },
        Criterion { id: 3, title: "W-family scaling and monotonicity", limit: None, run: c03_w_family },
        Criterion { id: 4, title: "Renyi identity for T_{0,b}", limit: None, run: c04_renyi_identity },
        Criterion { id: 5, title: "divergence floor C_b", limit: None, run: c05_divergence_floor },
        Criterion { id: 6, title: "point-mass interval", limit: None, run: c06_point_mass },
        Criterion { id: 7, title: "RPI constant of the flat heat kernel", limit: Some(Duration::from_secs(300)), run: c07_rpi },
        Criterion { id: 8, title: "rLSI constant of the flat heat kernel", limit: None, run: c08_rlsi },
        Criterion { id: 9, title: "HKC chain and falsifiability", limit: None, run: c09_hkc },
        Criterion { id: 10, title: "ETI consequence and integrated Harnack value", limit: None, run: c10_eti },
        Criterion { id: 11, title: "Wang Harnack and HPI harnesses", limit: None, run: c11_whi_hpi },
        Criterion { id: 12, title: "increment lemma on random kernels", limit: None, run: c12_increment },
        Criterion { id: 13, title: "Kuwada contraction of the OU kernel", limit: None, run: c13_kuwada },
        Criterion { id: 14, title: "Langevin W2 decay", limit: Some(Duration::from_secs(600)), run: c14_w2_decay },
        Criterion { id: 15, title: "Langevin He2 decay", limit: None, run: c15_he_decay },
        Criterion { id: 16, title: "Gaussian quasi-invariance bundle", limit: None, run: c16_quasi },
        Criterion { id: 17, title: "property suites", limit: None, run: c17_properties },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(msg), Some(limit)) if elapsed > limit => Err(format!("{msg}; over the {} s limit", limit.as_secs())),
            (o, _) => o,
        };
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {:>2} {tag} — {}: {msg} [{:.1} s]", c.id, c.title, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|err| err.to_string())
}

fn random_probability(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> DiscreteMeasure {
    loop {
        let w: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random_range(0.05..1.0) }).collect();
        if w.iter().any(|v| *v > 0.0) {
            return DiscreteMeasure::normalized(w).expect("positive mass");
        }
    }
}

fn heat_setup(t: f64, radius: f64, h: f64) -> (FiniteMetricSpace, MarkovKernel, LipschitzDictionary) {
    let space = FiniteMetricSpace::symmetric_grid(radius, h).unwrap();
    let kernel = heat_kernel_grid(&space, t).unwrap();
    let dict = build_dictionary(&space, &DictionaryConfig::default());
    (space, kernel, dict)
}

// 1 ───────────────────────────────────────────────────────────────────────

fn c01_dirac_closed_form() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a: f64 = r.random_range(0.1..=5.0);
        let b: f64 = r.random_range(0.1..=5.0);
        let d: f64 = r.random_range(0.0..=3.0);
        let theta = (b.sqrt() / (2.0 * a.sqrt()) * d).min(FRAC_PI_2);
        let closed = (2.0 - 2.0 * theta.cos()) / b;
        let space = e(FiniteMetricSpace::two_point(d.max(1e-6)))?;
        let (m0, m1) = (e(DiscreteMeasure::dirac(2, 0))?, e(DiscreteMeasure::dirac(2, if d > 0.0 { 1 } else { 0 }))?);
        let v = e(w_ab(e(WParams::new(a, b))?, &m0, &m1, &space))?;
        let rel = if closed == 0.0 { v.abs() } else { (v / closed - 1.0).abs() };
        worst = worst.max(rel);
    }
    check(worst <= 1e-3, format!("max relative error {worst:.2e} over 50 (a, b, d) (tol 1e-3)"))
}

// 2 ───────────────────────────────────────────────────────────────────────

/// Exact coordinate minimization of the LET objective: each entry update
/// solves `(R + g)(C + g) = μ₀ᵢ μ₁ⱼ e^{−ℓᵢⱼ}` in closed form.
fn let_brute_force(mu0: &[f64], mu1: &[f64], dist: &Array2<f64>) -> f64 {
    let n = mu0.len();
    let cost = |d: f64| if d >= FRAC_PI_2 { f64::INFINITY } else { -2.0 * d.cos().ln() };
    let mut g = Array2::<f64>::zeros((n, n));
    for _sweep in 0..2_000_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let l = cost(dist[[i, j]]);
                let new = if mu0[i] == 0.0 || mu1[j] == 0.0 || !l.is_finite() {
                    0.0
                } else {
                    let r = g.row(i).sum() - g[[i, j]];
                    let c = g.column(j).sum() - g[[i, j]];
                    let k = mu0[i] * mu1[j] * (-l).exp();
                    (0.5 * (-(r + c) + ((r - c).powi(2) + 4.0 * k).sqrt())).max(0.0)
                };
                change = change.max((new - g[[i, j]]).abs());
                g[[i, j]] = new;
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    let kl = |r: f64, m: f64| if r > 0.0 { r * (r / m).ln() - r + m } else { m };
    let rows: f64 = (0..n).map(|i| kl(g.row(i).sum(), mu0[i])).sum();
    let cols: f64 = (0..n).map(|j| kl(g.column(j).sum(), mu1[j])).sum();
    let transport: f64 = g.indexed_iter().filter(|(_, v)| **v > 0.0).map(|((i, j), v)| v * cost(dist[[i, j]])).sum();
    rows + cols + transport
}

fn c02_let_oracle() -> Outcome {
    let mut r = rng(2);
    let mut cases: Vec<(FiniteMetricSpace, Vec<f64>, Vec<f64>)> = Vec::new();
    let masses = [(1.0, 0.0, 0.0, 1.0), (0.5, 0.5, 0.25, 0.75), (2.0, 0.3, 0.4, 1.1), (0.7, 0.0, 0.2, 0.9), (1.0, 1.0, 1.0, 1.0)];
    for d in [0.05, 0.3, 0.8, 1.2, 1.5, 1.56, 1.6, 2.5] {
        for &(a0, a1, b0, b1) in &masses {
            cases.push((e(FiniteMetricSpace::two_point(d))?, vec![a0, a1], vec![b0, b1]));
        }
    }
    let n_two = cases.len();
    for _ in 0..10 {
        let coords: Vec<Vec<f64>> = (0..3).map(|_| vec![r.random_range(0.0..1.5), r.random_range(0.0..1.5)]).collect();
        let space = e(FiniteMetricSpace::from_coords(coords, 10.0))?;
        let m = |r: &mut ChaCha8Rng| (0..3).map(|_| if r.random::<f64>() < 0.2 { 0.0 } else { r.random_range(0.1..2.0) }).collect::<Vec<_>>();
        let (a, b) = (m(&mut r), m(&mut r));
        cases.push((space, a, b));
    }
    let mut worst: f64 = 0.0;
    for (space, a, b) in &cases {
        let (m0, m1) = (e(DiscreteMeasure::new(a.clone()))?, e(DiscreteMeasure::new(b.clone()))?);
        let sol = e(let_solve(&m0, &m1, space))?;
        let oracle = let_brute_force(a, b, space.dist_matrix());
        let err = (sol.value - oracle).abs() / oracle.abs().max(1e-8);
        worst = worst.max(err);
        if err > 1e-4 {
            return Err(format!("solver {} vs brute force {oracle} on {a:?}, {b:?}", sol.value));
        }
    }
    check(true, format!("{n_two} two-point and 10 three-point problems, max relative error {worst:.2e} (tol 1e-4)"))
}

// 3 ───────────────────────────────────────────────────────────────────────

fn c03_w_family() -> Outcome {
    let mut r = rng(3);
    let space = e(FiniteMetricSpace::uniform_grid(0.0, 0.4, 6))?;
    let params: Vec<WParams> = (0..10).map(|_| WParams::new(r.random_range(0.2..3.0), r.random_range(0.2..3.0)).unwrap()).collect();
    let mut checks = 0;
    for _ in 0..20 {
        let (m0, m1) = (random_probability(&mut r, 6, 0.3), random_probability(&mut r, 6, 0.3));
        let report = e(w_family_checks(&m0, &m1, &space, &params, &[0.5, 2.0], &Default::default()))?;
        checks += report.checks.len();
        if !report.pass {
            let bad = report.checks.iter().find(|c| !c.pass).unwrap();
            return Err(format!("{:?} failed: lhs {} rhs {} at {:?}/{:?}", bad.kind, bad.lhs, bad.rhs, bad.params, bad.other));
        }
    }
    // Recorded only; no triangle inequality is claimed for √W_{a,b}.
    let ms: Vec<_> = (0..6).map(|_| random_probability(&mut r, 6, 0.3)).collect();
    let triangle = params.iter().map(|p| e(w_triangle_residual(*p, &ms, &space)).map(|t| t.max_residual)).collect::<Result<Vec<_>, _>>()?;
    let worst_triangle = triangle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    check(true, format!("{checks} scaling/monotonicity checks on 20 pairs × 10 parameter pairs (scaling 1e-4 rel, monotone 1e-6 abs); max √W triangle residual {worst_triangle:.2e} (recorded)"))
}

// 4 ───────────────────────────────────────────────────────────────────────

fn c04_renyi_identity() -> Outcome {
    let mut r = rng(4);
    let mut worst_identity: f64 = 0.0;
    let mut worst_divergence: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(2..12);
        let m0 = random_probability(&mut r, n, 0.0);
        let m1 = random_probability(&mut r, n, 0.3);
        let b = r.random_range(0.05..4.0);
        let (_, q, cb) = e(c_b(b))?;
        let res = e(renyi_t0b(b, &m0, &m1))?;
        let direct: f64 = cb * m0.weights().iter().zip(m1.weights()).map(|(a, c)| a * (c / a).powf(q)).sum::<f64>();
        worst_identity = worst_identity.max((res.value - direct).abs() / direct);
        // (q − 1) D_q(μ₁‖μ₀) with D_q = ln Σ μ₁^q μ₀^{1−q} / (q − 1).
        let dq = m0.weights().iter().zip(m1.weights()).filter(|(_, c)| **c > 0.0).map(|(a, c)| c.powf(q) * a.powf(1.0 - q)).sum::<f64>().ln()
            / (q - 1.0);
        worst_divergence = worst_divergence.max((res.normalized - (q - 1.0) * dq).abs() / dq.abs().max(1.0));
    }
    let m0 = e(DiscreteMeasure::probability(vec![0.5, 0.5, 0.0]))?;
    let m1 = e(DiscreteMeasure::probability(vec![0.4, 0.4, 0.2]))?;
    let singular = e(renyi_t0b(0.7, &m0, &m1))?;
    let infinite = singular.value == f64::INFINITY && singular.normalized == f64::INFINITY;
    check(
        worst_identity <= 1e-12 && worst_divergence <= 1e-12 && infinite,
        format!("identity error {worst_identity:.1e}, Rényi error {worst_divergence:.1e} (tol 1e-12); support violation gives +∞: {infinite}"),
    )
}

// 5 ───────────────────────────────────────────────────────────────────────

fn c05_divergence_floor() -> Outcome {
    let mut r = rng(5);
    let mut below = 0;
    let mut worst_eq: f64 = 0.0;
    for i in 0..1000 {
        let n = r.random_range(2..5);
        let space = e(FiniteMetricSpace::uniform_grid(0.0, r.random_range(0.2..1.0), n))?;
        let dict = build_dictionary(&space, &DictionaryConfig { random_functions: 4, ..DictionaryConfig::default() });
        let search = LowerSearch { k_steps: 16, endpoint_refinements: 10, ..LowerSearch::new(dict) };
        let a = if i % 4 == 0 { 0.0 } else { r.random_range(0.1..3.0) };
        let b = r.random_range(0.1..3.0);
        let params = e(DivParams::new(a, b))?;
        let m0 = random_probability(&mut r, n, 0.2);
        let m1 = random_probability(&mut r, n, 0.2);
        let v = e(t_ab_certified(&params, &m0, &m1, &space, &search))?;
        if v.lower < params.c_b * (1.0 - 1e-12) || v.upper < v.lower {
            below += 1;
        }
        if i % 10 == 0 {
            let same = e(t_ab_certified(&params, &m0, &m0, &space, &search))?;
            worst_eq = worst_eq.max((same.lower - params.c_b).abs()).max((same.upper - params.c_b).abs());
        }
    }
    check(
        below == 0 && worst_eq <= 1e-10,
        format!("{below} of 1000 bounds below C_b; equality error at μ0 = μ1 {worst_eq:.1e} (tol 1e-10)"),
    )
}

// 6 ───────────────────────────────────────────────────────────────────────

fn c06_point_mass() -> Outcome {
    let mut r = rng(6);
    let mut inverted = 0;
    for _ in 0..100 {
        let params = e(DivParams::new(r.random_range(0.1..5.0), r.random_range(0.1..5.0)))?;
        let (lo, hi) = e(t_point_mass_bounds(&params, r.random_range(0.0..3.0)))?;
        if lo > hi * (1.0 + 1e-14) {
            inverted += 1;
        }
    }
    let (lo, hi) = e(t_point_mass_bounds(&e(DivParams::new(1.0, LN_2))?, 1.0))?;
    let (lo_err, hi_err) = ((lo - 0.353553).abs(), (hi - 0.358576).abs());
    check(
        inverted == 0 && lo_err <= 1e-6 && hi_err <= 1e-6,
        format!(
            "{inverted} of 100 intervals inverted; a=1, b=ln 2, d=1 gives lower {lo:.7} (|Δ| {lo_err:.1e} vs 0.353553), upper {hi:.7} (|Δ| {hi_err:.1e} vs 0.358576), tol 1e-6"
        ),
    )
}

// 7, 8 ────────────────────────────────────────────────────────────────────

fn c07_rpi() -> Outcome {
    let (space, kernel, dict) = heat_setup(0.25, 6.0, 0.01);
    let v = e(e(rpi_constant(&kernel, &space, &dict))?.require())?;
    check((1.8..=2.1).contains(&v), format!("estimate {v:.5} on h = 0.01, radius 6 (target 2, accepted [1.8, 2.1])"))
}

fn c08_rlsi() -> Outcome {
    let (space, kernel, dict) = heat_setup(0.25, 6.0, 0.01);
    let v = e(e(rlsi_constant(&kernel, &space, &dict))?.require())?;
    check((7.2..=8.8).contains(&v), format!("estimate {v:.5} on h = 0.01, radius 6 (expected [7.2, 8.8])"))
}

// 9 ───────────────────────────────────────────────────────────────────────

fn c09_hkc() -> Outcome {
    let t = 0.25;
    let (space, kernel, _) = heat_setup(t, 6.0, 0.05);
    let c = 1.0 / (2.0 * t);
    let pairs = e(sample_measure_pairs(&kernel, &space, 50, 50, 9, INTERIOR))?;
    let ok = e(hkc_harness(&kernel, &space, c, &pairs, Tolerance::rel(1e-3)))?;
    let deflated = e(hkc_harness(&kernel, &space, c / 4.0, &pairs, Tolerance::rel(1e-3)))?;
    check(
        ok.pass && !deflated.pass,
        format!(
            "C = {c}: {} checks, max excess {:.2e}; C/4 falsified: {} (max excess {:.2e})",
            ok.trials,
            ok.max_excess,
            !deflated.pass,
            deflated.max_excess
        ),
    )
}

// 10 ──────────────────────────────────────────────────────────────────────

fn c10_eti() -> Outcome {
    let t = 0.5;
    // Row variance 2t = 1: radius 6 plus room for the pair spread.
    let (space, kernel, _) = heat_setup(t, 10.0, 0.05);
    // The entropic inequality pairs with the rLSI constant 2/(2t).
    let c = 1.0 / t;
    let kappas: Vec<f64> = (0..8).map(|i| 0.125 * 2f64.powi(i)).collect();
    let pairs = e(sample_measure_pairs(&kernel, &space, 50, 0, 10, INTERIOR))?;
    let eti = e(eti_harness(&kernel, &space, c, &kappas, &pairs, Tolerance::rel(1e-9)))?;
    let grid = e(FiniteMetricSpace::symmetric_grid(8.0, 0.01))?;
    let quasi = e(gaussian_quasi_invariance(&QuasiConfig { t, shift: 1.0, p_grid: vec![2.0], ..QuasiConfig::default() }, &grid))?;
    let ih = quasi.renyi[0].grid_value;
    let rel = (ih / 2f64.exp() - 1.0).abs();
    check(
        eti.pass && rel <= 0.01,
        format!("C = {c}: {} Dirac-pair checks over 8 κ, max excess {:.2e}; integrated Harnack {ih:.6} vs e² (rel {rel:.1e}, tol 1e-2)", eti.trials, eti.max_excess),
    )
}

// 11 ──────────────────────────────────────────────────────────────────────

fn c11_whi_hpi() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let spaces = [("heat", heat_setup(0.25, 6.0, 0.05)), ("ou", {
        let space = FiniteMetricSpace::symmetric_grid(6.0, 0.05).unwrap();
        let kernel = ou_kernel_grid(&space, 0.5, 1.0).unwrap();
        let dict = build_dictionary(&space, &DictionaryConfig::default());
        (space, kernel, dict)
    })];
    for (name, (space, kernel, dict)) in &spaces {
        let rlsi = e(e(rlsi_constant(kernel, space, dict))?.require())?;
        let rpi = e(e(rpi_constant(kernel, space, dict))?.require())?;
        let cfg = SampleConfig::new(1000, 11, 1e-8);
        let p = [1.5, 2.0, 4.0];
        let whi = e(whi_check(kernel, space, rlsi, &p, dict, &cfg))?;
        let hpi = e(hpi_check(kernel, space, rpi, dict, &cfg))?;
        let whi4 = e(whi_check(kernel, space, rlsi / 4.0, &p, dict, &cfg))?;
        let hpi4 = e(hpi_check(kernel, space, rpi / 4.0, dict, &cfg))?;
        ok &= whi.pass && hpi.pass && !whi4.pass && !hpi4.pass;
        lines.push(format!(
            "{name}: whi(C={rlsi:.3}) {} / ÷4 {}, hpi(C={rpi:.3}) {} / ÷4 {}",
            verdict(whi.pass),
            verdict(whi4.pass),
            verdict(hpi.pass),
            verdict(hpi4.pass)
        ));
    }
    check(ok, lines.join("; "))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

// 12 ──────────────────────────────────────────────────────────────────────

fn random_kernel(r: &mut ChaCha8Rng, n: usize) -> MarkovKernel {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        let row = random_probability(r, n, 0.4);
        for (j, w) in row.weights().iter().enumerate() {
            m[[i, j]] = *w;
        }
    }
    MarkovKernel::new(m).unwrap()
}

fn c12_increment() -> Outcome {
    let mut r = rng(12);
    let mut worst = f64::NEG_INFINITY;
    for (k, n) in [3, 5, 8, 13, 21].into_iter().enumerate() {
        let space = e(FiniteMetricSpace::cycle(n))?;
        let kernel = random_kernel(&mut r, n);
        let dict = build_dictionary(&space, &DictionaryConfig::default());
        let rep = e(increment_lemma_check(&kernel, &space, &dict, &SampleConfig::new(1000, 12 + k as u64, 1e-10)))?;
        worst = worst.max(rep.max_excess);
        if !rep.pass {
            return Err(format!("random kernel on C_{n}: max excess {:.2e}", rep.max_excess));
        }
    }
    check(true, format!("5 random kernels × 1000 tuples, max excess {worst:.2e} (tol 1e-10)"))
}

// 13 ──────────────────────────────────────────────────────────────────────

/// Dirac pairs at least `min_sep` apart among well-resolved rows: the
/// contraction factor of two lattice Gaussians a few cells apart is
/// dominated by the O(h²) binning offset, not by the semigroup.
fn separated_dirac_pairs(kernel: &MarkovKernel, space: &FiniteMetricSpace, count: usize, min_sep: f64, seed: u64) -> Vec<(DiscreteMeasure, DiscreteMeasure)> {
    let points = interior_points(kernel, space, INTERIOR);
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (x, y) = (points[r.random_range(0..points.len())], points[r.random_range(0..points.len())]);
        if space.dist(x, y) >= min_sep {
            out.push((DiscreteMeasure::dirac(space.n(), x).unwrap(), DiscreteMeasure::dirac(space.n(), y).unwrap()));
        }
    }
    out
}

fn c13_kuwada() -> Outcome {
    let space = e(FiniteMetricSpace::symmetric_grid(6.0, 0.02))?;
    let mut parts = Vec::new();
    let mut ok = true;
    for t in [0.25, 0.5, 1.0] {
        let kernel = e(ou_kernel_grid(&space, t, 1.0))?;
        let pairs = separated_dirac_pairs(&kernel, &space, 50, 0.5, 13);
        let env = (-2.0 * t).exp();
        let rep = e(kuwada_harness(&kernel, &space, env, &pairs, Tolerance::rel(0.02)))?;
        ok &= rep.pass;
        parts.push(format!("t={t}: max excess {:.2e}", rep.max_excess));
    }
    check(ok, format!("W2² factor ≤ e^(-2t)(1 + 2%) on 50 Dirac pairs ≥ 0.5 apart, h = 0.02; {}", parts.join(", ")))
}

// 14, 15 ──────────────────────────────────────────────────────────────────

fn langevin(horizon: f64, seed: u64) -> LangevinConfig {
    LangevinConfig { paths: 100_000, step: 1e-3, horizon, seed, ..LangevinConfig::default() }
}

fn c14_w2_decay() -> Outcome {
    let grid = e(FiniteMetricSpace::symmetric_grid(6.0, 0.01))?;
    let s = e(w2_decay_experiment(&langevin(1.0, 14), &StartMeasure::dirac(0.0), &StartMeasure::dirac(1.0), &[0.25, 0.5, 1.0], &grid, 0.05))?;
    let ratios: Vec<String> = s.points.iter().map(|p| format!("t={} {:.4}", p.time, p.value / p.envelope)).collect();
    let max = s.max_ratio();
    check(max <= 1.05, format!("N = 1e5, h = 1e-3, ratio to e^(-2t) envelope: {} (limit 1.05)", ratios.join(", ")))
}

fn c15_he_decay() -> Outcome {
    let grid = e(FiniteMetricSpace::symmetric_grid(6.0, 0.02))?;
    let s = e(hellinger_decay_experiment(&langevin(20.0, 15), 1.0, &[0.25, 0.5, 1.0, 20.0], &grid, 0.05))?;
    let early = &s.points[..3];
    let within = early.iter().all(|p| p.value <= p.envelope * 1.05);
    let last = s.points[3].value;
    let ratios: Vec<String> = early.iter().map(|p| format!("t={} {:.4}/{:.4}", p.time, p.value, p.envelope)).collect();
    check(within && last < 1e-2, format!("He2²/envelope {}; He2² at t=20 = {last:.2e} (< 1e-2)", ratios.join(", ")))
}

// 16 ──────────────────────────────────────────────────────────────────────

fn c16_quasi() -> Outcome {
    let grid = e(FiniteMetricSpace::symmetric_grid(8.0, 0.01))?;
    let base = e(gaussian_quasi_invariance(&QuasiConfig::default(), &grid))?;
    let wide = e(FiniteMetricSpace::symmetric_grid(10.0, 0.02))?;
    let vac = e(gaussian_quasi_invariance(&QuasiConfig { shift: 3.0, ..QuasiConfig::default() }, &wide))?;
    let sub = vac.subdivision.as_ref();
    let demo = vac.hellinger.vacuous && vac.hellinger.pass && sub.is_some_and(|s| s.n == 3 && s.all_below_two);
    check(
        base.pass && !base.hellinger.vacuous && demo,
        format!(
            "t = 0.5, d = 1: T checks {}, Rényi checks {}, He2² {:.5} ≤ {:.5}; d = 3: vacuous {} with {}-step subdivision",
            verdict(base.t_checks.iter().all(|c| c.pass)),
            verdict(base.renyi.iter().all(|c| c.pass)),
            base.hellinger.value,
            base.hellinger.bound,
            vac.hellinger.vacuous,
            sub.map_or(0, |s| s.n)
        ),
    )
}

// 17 ──────────────────────────────────────────────────────────────────────

fn rk4_ode(b: f64, r: f64, y0: f64, s: f64, slack: f64) -> f64 {
    let f = |y: f64| (r - slack) * y - b * y * y.ln();
    let steps = 2000;
    let h = s / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

fn c17_properties() -> Outcome {
    let mut r = rng(17);

    let mut negative = 0;
    for _ in 0..10_000 {
        let (b, z, w, x) = (r.random_range(0.01..5.0), r.random_range(1e-3..10.0), r.random_range(1e-3..10.0), r.random_range(1e-4..20.0));
        let g = e(young_gap(b, z, w, x))?;
        if g < -1e-12 * (1.0 + z + x * w) {
            negative += 1;
        }
    }

    let mut undominated = 0;
    for _ in 0..100 {
        let (b, rr, y0, s) = (r.random_range(0.05..3.0), r.random_range(0.0..3.0), r.random_range(0.1..5.0), r.random_range(0.0..=1.0));
        let slack = r.random_range(0.0..0.5) * if r.random::<bool>() { 1.0 } else { 0.0 };
        let flow = e(gronwall_flow(b, rr, y0, s))?;
        if flow < rk4_ode(b, rr, y0, s, slack) * (1.0 - 1e-9) {
            undominated += 1;
        }
    }

    let mut gradient_bad = 0;
    let mut points_checked = 0;
    for n in 2..=64 {
        let space = if n % 2 == 0 && n >= 3 { e(FiniteMetricSpace::cycle(n))? } else { e(FiniteMetricSpace::uniform_grid(0.0, 0.3, n))? };
        let f: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let c = r.random_range(-4.0..4.0);
        let gf = e(discrete_gradient(&space, &f))?;
        let gg = e(discrete_gradient(&space, &g))?;
        let gcf = e(discrete_gradient(&space, &f.iter().map(|v| c * v).collect::<Vec<_>>()))?;
        let gsum = e(discrete_gradient(&space, &f.iter().zip(&g).map(|(a, b)| a + b).collect::<Vec<_>>()))?;
        for i in 0..n {
            points_checked += 1;
            let scale = 1.0 + gf[i].abs() + gg[i].abs();
            if (gcf[i] - c.abs() * gf[i]).abs() > 1e-12 * scale * (1.0 + c.abs()) || gsum[i] > gf[i] + gg[i] + 1e-12 * scale {
                gradient_bad += 1;
            }
        }
    }

    let mut weak_strong: f64 = 0.0;
    for k in 0..20 {
        let n = 4 + k % 9;
        let space = e(FiniteMetricSpace::cycle(n))?;
        let kernel = random_kernel(&mut r, n);
        for _ in 0..10 {
            let f: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
            let x = r.random_range(0..n);
            let strong = e(ratio_at(ConstantKind::Rpi, &kernel, &space, &f, x, 0.0))?;
            let weak = e(ratio_at(ConstantKind::RpiWeak, &kernel, &space, &f, x, 0.0))?;
            match (strong, weak) {
                (Some((n1, d1)), Some((n2, d2))) => weak_strong = weak_strong.max(((n1 / d1) - (n2 / d2)).abs() / (n1 / d1).abs().max(1e-300)),
                (None, None) => {}
                _ => weak_strong = f64::INFINITY,
            }
        }
    }

    check(
        negative == 0 && undominated == 0 && gradient_bad == 0 && weak_strong <= 1e-9,
        format!(
            "young_gap negatives {negative}/10⁴; gronwall undominated {undominated}/10²; gradient violations {gradient_bad}/{points_checked} points (n ≤ 64); RPI weak vs strong max rel {weak_strong:.1e}"
        ),
    )
}
