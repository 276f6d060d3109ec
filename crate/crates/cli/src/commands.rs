use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hklab::divergence::{renyi_t0b, t_ab_certified, DivParams, LowerSearch};
use hklab::dynamics::{
    gaussian_quasi_invariance, hellinger_decay_experiment, w2_decay_experiment, LangevinConfig, QuasiConfig, StartMeasure,
};
use hklab::funcineq::{
    eti_harness, hkc_harness, hpi_check, ihi_check, increment_lemma_check, interior_points, kuwada_harness, ratio_at,
    sample_measure_pairs, sample_point_pairs, whi_check, estimate_constant, ConstantKind, EstimatorConfig, HarnessReport,
    SampleConfig, Tolerance,
};
use hklab::markov::{heat_kernel_grid, kernel_to_csv, ou_kernel_grid, parse_kernel_csv, MarkovKernel};
use hklab::space::io::{parse_measure_csv, parse_space_json, space_to_json};
use hklab::space::{build_dictionary, DictionaryConfig, DiscreteMeasure, FiniteMetricSpace};
use hklab::transport::{hellinger_sq, let_solve_scaled, w_ab_with, wasserstein2, LetConfig, WParams};

use crate::output::Run;
use crate::{CliError, ConstantsArgs, DistArgs, Experiment, GenArgs, GenWhat, Metric, SimulateArgs, Suite, VerifyArgs, Which};

/// Rows with more end-cell mass than this are treated as edge-affected.
const INTERIOR_THRESHOLD: f64 = 1e-9;

fn name<E: ValueEnum>(v: &E) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn load_space(run: &mut Run, path: &Path) -> Result<FiniteMetricSpace, CliError> {
    Ok(parse_space_json(&run.read(path)?)?)
}

fn load_measure(run: &mut Run, path: &Path, space: &FiniteMetricSpace, probability: bool) -> Result<DiscreteMeasure, CliError> {
    let m = parse_measure_csv(&run.read(path)?)?;
    space.expect_len(m.len())?;
    if probability {
        Ok(DiscreteMeasure::probability_with_tolerance(m.into_weights(), space.tolerance().max(1e-12))?)
    } else {
        Ok(m)
    }
}

/// Reads a kernel and, on lattices, screens out rows that carry mass at
/// the lattice ends. If that leaves nothing, every row is used.
fn load_kernel(run: &mut Run, path: &Path, space: &FiniteMetricSpace) -> Result<MarkovKernel, CliError> {
    let k = parse_kernel_csv(&run.read(path)?)?.with_end_cell_loss(space)?;
    if interior_points(&k, space, INTERIOR_THRESHOLD).is_empty() {
        return Ok(k.without_truncation_loss());
    }
    Ok(k)
}

fn load_dictionary_config(run: &mut Run, path: Option<&Path>, seed: u64) -> Result<DictionaryConfig, CliError> {
    let mut cfg = match path {
        Some(p) => serde_json::from_str(&run.read(p)?).map_err(|e| CliError::Input(format!("dictionary config: {e}")))?,
        None => DictionaryConfig::default(),
    };
    cfg.seed = seed;
    Ok(cfg)
}

fn need(v: Option<f64>, flag: &str, metric: Metric) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Input(format!("--{flag} is required for --metric {}", name(&metric))))
}

pub fn dist(args: &DistArgs, seed: u64, report: Option<&Path>) -> Result<(), CliError> {
    let mut run = Run::new("dist", seed);
    let space = load_space(&mut run, &args.space)?;
    // HK and W_{a,b} accept measures of any mass.
    let probability = !matches!(args.metric, Metric::Hk | Metric::Wab);
    let mu0 = load_measure(&mut run, &args.mu0, &space, probability)?;
    let mu1 = load_measure(&mut run, &args.mu1, &space, probability)?;
    let metric = name(&args.metric);
    let mut config = json!({"metric": metric, "space": args.space, "mu0": args.mu0, "mu1": args.mu1});

    let let_config: LetConfig = match &args.let_config {
        Some(p) => serde_json::from_str(&run.read(p)?).map_err(|e| CliError::Input(format!("LET config: {e}")))?,
        None => LetConfig::default(),
    };
    if matches!(args.metric, Metric::Wab | Metric::Hk) {
        config["let_config"] = to_value(&let_config);
    }

    let (summary, result) = match args.metric {
        Metric::W2 => {
            let plan = wasserstein2(&space, &mu0, &mu1)?;
            (format!("{}", plan.value), json!({"metric": metric, "value": plan.value, "plan": plan}))
        }
        Metric::He2 => {
            let v = hellinger_sq(&mu0, &mu1)?;
            (format!("{v}"), json!({"metric": metric, "value": v}))
        }
        Metric::Wab => {
            let (a, b) = (need(args.a, "a", args.metric)?, need(args.b, "b", args.metric)?);
            config["a"] = json!(a);
            config["b"] = json!(b);
            let w = w_ab_with(WParams::new(a, b)?, &mu0, &mu1, &space, &let_config)?;
            let diagnostics = w.let_solution.as_ref().map(|s| s.diagnostics_json());
            (
                format!("{}", w.value),
                json!({"metric": metric, "a": a, "b": b, "value": w.value, "gap": w.gap, "route": w.route, "solver": diagnostics}),
            )
        }
        Metric::Hk => {
            config["scale"] = json!(args.scale);
            if !(args.scale > 0.0) || !args.scale.is_finite() {
                return Err(CliError::Input(format!("scale: must be > 0, got {}", args.scale)));
            }
            let sol = let_solve_scaled(&mu0, &mu1, &space, args.scale, &let_config)?.require_certified()?;
            (format!("{}", sol.value), json!({"metric": metric, "scale": args.scale, "value": sol.value, "solver": sol.diagnostics_json(), "coupling": sol.coupling}))
        }
        Metric::T0b => {
            let b = need(args.b, "b", args.metric)?;
            config["b"] = json!(b);
            let r = renyi_t0b(b, &mu0, &mu1)?;
            let mut v = to_value(&r);
            v["metric"] = json!(metric);
            v["b"] = json!(b);
            (format!("{}", r.value), v)
        }
        Metric::Tab => {
            let (a, b) = (need(args.a, "a", args.metric)?, need(args.b, "b", args.metric)?);
            config["a"] = json!(a);
            config["b"] = json!(b);
            let dcfg = load_dictionary_config(&mut run, args.dictionary.as_deref(), seed)?;
            config["dictionary"] = to_value(&dcfg);
            let search = LowerSearch::new(build_dictionary(&space, &dcfg));
            let c = t_ab_certified(&DivParams::new(a, b)?, &mu0, &mu1, &space, &search)?;
            let mut v = to_value(&c);
            v["metric"] = json!(metric);
            v["a"] = json!(a);
            v["b"] = json!(b);
            (format!("[{}, {}]", c.lower, c.upper), v)
        }
    };
    eprintln!("{metric}: {summary}");
    run.finish(config, result, report)
}

fn kind_of(which: Which) -> ConstantKind {
    match which {
        Which::Rpi => ConstantKind::Rpi,
        Which::Rlsi => ConstantKind::Rlsi,
        Which::Grad => ConstantKind::Gradient,
    }
}

pub fn constants(args: &ConstantsArgs, seed: u64, report: Option<&Path>) -> Result<(), CliError> {
    let mut run = Run::new("constants", seed);
    let space = load_space(&mut run, &args.space)?;
    let kernel = load_kernel(&mut run, &args.kernel, &space)?;
    let dcfg = load_dictionary_config(&mut run, args.dictionary.as_deref(), seed)?;
    let dictionary = build_dictionary(&space, &dcfg);
    let estimator = EstimatorConfig::default();
    let est = estimate_constant(kind_of(args.which), &kernel, &space, &dictionary, &estimator)?;
    let replay = match &est.witness {
        Some(w) => ratio_at(est.kind, &kernel, &space, &w.f, w.point, 0.0)?.map(|(n, d)| n / d),
        None => None,
    };
    if let (Some(path), Some(w)) = (&args.witness_out, &est.witness) {
        let csv: String = w.f.iter().map(|v| format!("{v}\n")).collect();
        run.write(path, &csv)?;
    }
    match est.value {
        Some(v) => eprintln!("{}: {v}", name(&args.which)),
        None => eprintln!("{}: absent (every denominator was excluded)", name(&args.which)),
    }
    let config = json!({
        "which": name(&args.which),
        "space": args.space,
        "kernel": args.kernel,
        "dictionary": dcfg,
        "dictionary_size": dictionary.len(),
        "estimator": estimator,
        "interior_rows": interior_points(&kernel, &space, estimator.interior_threshold).len(),
    });
    let result = json!({"absent": est.value.is_none(), "replayed_value": replay, "estimate": est});
    run.finish(config, result, report)
}

fn suite_constant(suite: Suite) -> Option<Which> {
    match suite {
        Suite::Hkc | Suite::Hpi => Some(Which::Rpi),
        Suite::Whi | Suite::Ihi | Suite::Eti => Some(Which::Rlsi),
        Suite::Kuwada => Some(Which::Grad),
        Suite::Increment | Suite::All => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBundle {
    pub constants: BTreeMap<String, f64>,
    pub scale: f64,
    pub reports: Vec<HarnessReport>,
    pub pass: bool,
}

pub fn verify(args: &VerifyArgs, seed: u64, report: Option<&Path>) -> Result<(), CliError> {
    let mut run = Run::new("verify", seed);
    let space = load_space(&mut run, &args.space)?;
    let kernel = load_kernel(&mut run, &args.kernel, &space)?;
    let suites: Vec<Suite> = match args.suite {
        Suite::All => vec![Suite::Hkc, Suite::Eti, Suite::Whi, Suite::Hpi, Suite::Ihi, Suite::Kuwada, Suite::Increment],
        s => vec![s],
    };
    if !(args.scale > 0.0) || !args.scale.is_finite() {
        return Err(CliError::Input(format!("scale: must be > 0, got {}", args.scale)));
    }
    if args.constant.is_none() && !args.estimate && suites.iter().any(|s| suite_constant(*s).is_some()) {
        return Err(CliError::Input("one of --constant or --estimate is required".into()));
    }
    let dcfg = load_dictionary_config(&mut run, args.dictionary.as_deref(), seed)?;
    let dictionary = build_dictionary(&space, &dcfg);

    let mut constants: BTreeMap<String, f64> = BTreeMap::new();
    for which in suites.iter().filter_map(|s| suite_constant(*s)) {
        let key = name(&which);
        if constants.contains_key(&key) {
            continue;
        }
        let c = match args.constant {
            Some(c) => c,
            None => estimate_constant(kind_of(which), &kernel, &space, &dictionary, &EstimatorConfig::default())?.require()?,
        };
        constants.insert(key, c * args.scale);
    }
    let constant = |s: Suite| suite_constant(s).map(|w| constants[&name(&w)]).expect("suite has a constant");

    let kappas = args.kappas.clone().unwrap_or_else(|| (0..8).map(|i| 0.125 * 2f64.powi(i)).collect());
    let needs_pairs = suites.iter().any(|s| matches!(s, Suite::Hkc | Suite::Eti | Suite::Kuwada));
    let pairs = if needs_pairs {
        sample_measure_pairs(&kernel, &space, args.dirac_pairs, args.random_pairs, seed, INTERIOR_THRESHOLD)?
    } else {
        Vec::new()
    };
    let sample = SampleConfig::new(args.trials, seed, args.tol);

    let mut reports = Vec::with_capacity(suites.len());
    for &suite in &suites {
        let r = match suite {
            Suite::Hkc => hkc_harness(&kernel, &space, constant(suite), &pairs, Tolerance::rel(1e-3))?,
            Suite::Eti => eti_harness(&kernel, &space, constant(suite), &kappas, &pairs, Tolerance::rel(1e-9))?,
            Suite::Whi => whi_check(&kernel, &space, constant(suite), &args.p_grid, &dictionary, &sample)?,
            Suite::Hpi => hpi_check(&kernel, &space, constant(suite), &dictionary, &sample)?,
            Suite::Ihi => {
                let pts = sample_point_pairs(&kernel, &space, args.dirac_pairs, seed, INTERIOR_THRESHOLD)?;
                ihi_check(&kernel, &space, constant(suite), &args.p_grid, &pts, Tolerance::abs(args.tol))?
            }
            Suite::Kuwada => kuwada_harness(&kernel, &space, constant(suite), &pairs, Tolerance::rel(2e-2))?,
            Suite::Increment => {
                let cfg = SampleConfig { tol: Tolerance::abs(args.tol.min(1e-10)), ..sample.clone() };
                increment_lemma_check(&kernel, &space, &dictionary, &cfg)?
            }
            Suite::All => unreachable!("expanded above"),
        };
        eprintln!("{}: {} (max excess {:e})", r.id, if r.pass { "pass" } else { "FAIL" }, r.max_excess);
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.id.clone()).collect();
    let config = json!({
        "suite": name(&args.suite),
        "space": args.space,
        "kernel": args.kernel,
        "constant": args.constant,
        "estimate": args.estimate,
        "scale": args.scale,
        "trials": args.trials,
        "dirac_pairs": args.dirac_pairs,
        "random_pairs": args.random_pairs,
        "p_grid": args.p_grid,
        "kappas": kappas,
        "tol": args.tol,
        "dictionary": dcfg,
    });
    let bundle = VerifyBundle { constants, scale: args.scale, reports, pass };
    run.finish(config, to_value(&bundle), report)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(format!("harness failure: {}", failed.join(", "))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radius: f64,
    pub spacing: f64,
}

/// Config file of `simulate`. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub langevin: LangevinConfig,
    pub nu0: StartMeasure,
    pub nu1: StartMeasure,
    /// Start point of the Hellinger experiment.
    pub start: f64,
    pub times: Vec<f64>,
    pub grid: Option<GridSpec>,
    pub stat_tol: f64,
    pub quasi: QuasiConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            langevin: LangevinConfig::default(),
            nu0: StartMeasure::dirac(0.0),
            nu1: StartMeasure::dirac(1.0),
            start: 1.0,
            times: vec![0.25, 0.5, 1.0],
            grid: None,
            stat_tol: 0.05,
            quasi: QuasiConfig::default(),
        }
    }
}

impl SimulateConfig {
    fn grid_for(&self, experiment: Experiment) -> GridSpec {
        self.grid.clone().unwrap_or_else(|| match experiment {
            Experiment::Quasi => {
                let q = &self.quasi;
                GridSpec { radius: (6.0 * (2.0 * q.t).sqrt() + q.shift).ceil() + 1.0, spacing: 0.01 }
            }
            _ => GridSpec { radius: 6.0, spacing: 0.02 },
        })
    }
}

pub fn simulate(args: &SimulateArgs, seed: u64, report: Option<&Path>) -> Result<(), CliError> {
    let mut run = Run::new("simulate", seed);
    let text = run.read(&args.config)?;
    let mut cfg: SimulateConfig = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config: {e}")))?;
    cfg.langevin.seed = seed;
    let grid_spec = cfg.grid_for(args.experiment);
    cfg.grid = Some(grid_spec.clone());
    let grid = FiniteMetricSpace::symmetric_grid(grid_spec.radius, grid_spec.spacing)?;
    let experiment = name(&args.experiment);
    let config = json!({"experiment": experiment, "resolved": cfg});

    let (result, pass) = match args.experiment {
        Experiment::W2decay | Experiment::Hedecay => {
            cfg.langevin.validate()?;
            let series = if args.experiment == Experiment::W2decay {
                let nu0 = StartMeasure::new(cfg.nu0.points.clone(), cfg.nu0.weights.clone())?;
                let nu1 = StartMeasure::new(cfg.nu1.points.clone(), cfg.nu1.weights.clone())?;
                w2_decay_experiment(&cfg.langevin, &nu0, &nu1, &cfg.times, &grid, cfg.stat_tol)?
            } else {
                hellinger_decay_experiment(&cfg.langevin, cfg.start, &cfg.times, &grid, cfg.stat_tol)?
            };
            if let Some(path) = &args.csv {
                run.write(path, &series.to_csv())?;
            }
            for p in &series.points {
                eprintln!("t = {}: {} ± {} (envelope {})", p.time, p.value, p.stderr, p.envelope);
            }
            (to_value(&series), series.pass)
        }
        Experiment::Quasi => {
            if args.csv.is_some() {
                eprintln!("note: the quasi experiment produces no series; --csv ignored");
            }
            let r = gaussian_quasi_invariance(&cfg.quasi, &grid)?;
            (to_value(&r), r.pass)
        }
    };
    eprintln!("{experiment}: {}", if pass { "pass" } else { "FAIL" });
    run.finish(config, result, report)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{experiment}: envelope violated beyond tolerance")))
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let out = args.out.as_deref();
    let kernel_with_space = |space: FiniteMetricSpace, kernel: MarkovKernel, space_out: &Option<std::path::PathBuf>| -> Result<(), CliError> {
        if let Some(p) = space_out {
            emit(Some(p), &(space_to_json(&space)? + "\n"))?;
        }
        emit(out, &kernel_to_csv(&kernel))
    };
    match &args.what {
        GenWhat::Grid { radius, spacing } => emit(out, &(space_to_json(&FiniteMetricSpace::symmetric_grid(*radius, *spacing)?)? + "\n")),
        GenWhat::Cycle { n } => emit(out, &(space_to_json(&FiniteMetricSpace::cycle(*n)?)? + "\n")),
        GenWhat::TwoPoint { distance } => emit(out, &(space_to_json(&FiniteMetricSpace::two_point(*distance)?)? + "\n")),
        GenWhat::Heat { radius, spacing, t, space_out } => {
            let space = FiniteMetricSpace::symmetric_grid(*radius, *spacing)?;
            let k = heat_kernel_grid(&space, *t)?;
            kernel_with_space(space, k, space_out)
        }
        GenWhat::Ou { radius, spacing, t, a, space_out } => {
            let space = FiniteMetricSpace::symmetric_grid(*radius, *spacing)?;
            let k = ou_kernel_grid(&space, *t, *a)?;
            kernel_with_space(space, k, space_out)
        }
    }
}
