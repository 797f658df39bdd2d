//! `causal-ot`: command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use causal_ot::fixtures::appendix_b_with_matrix;
use causal_ot::inference::{
    ate_continuity_experiment, ate_exact, propensity_gate, scm_perturbation_bound, w1_discontinuity_pair, AteSpec,
    PerturbationReport,
};
use causal_ot::interpolation::{interpolation_path, reproduce_examples, standard_interpolation_path, trajectory_data};
use causal_ot::io::{
    coupling_json, measure_json, parse_json, read_graph, read_json, read_measure, read_scm, read_text, AteSpecFile,
    CostFile,
};
use causal_ot::metric::{appendix_b_matrix, metric_repair, parse_matrix_csv, validate_metric, GroundCost, METRIC_TOL};
use causal_ot::model::{is_g_compatible, CausalGraph, DiscreteMeasure};
use causal_ot::random::{random_ate_pair, random_scm_pair, treatment_dag, ScmShape};
use causal_ot::scalar::{format_rational, rational_to_f64, Arithmetic, FLOAT_TOL};
use causal_ot::solver::{solve_causal, BicausalMethod, SolveOptions, SolveReport, ENUMERATION_CAP};
use causal_ot::wasserstein::{g_wasserstein_p, reproduce_appendix_b_with, semimetric_suite, wasserstein_p};
use causal_ot::Error;

#[derive(Debug, Parser)]
#[command(name = "causal-ot", version, about = "Causal and bicausal optimal transport on DAG-structured spaces")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Causal,
    Bicausal,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Auto,
    Exhaustive,
    Bcd,
    Recursion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON file with defaults for the options below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Transport exponent.
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Bicausal solver.
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    /// Rational arithmetic throughout.
    #[arg(long, global = true)]
    exact: bool,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on kernel-vertex selections for the exhaustive oracle.
    #[arg(long = "max-enum", global = true)]
    max_enum: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Include optimal couplings in reports.
    #[arg(long = "emit-plan", global = true)]
    emit_plan: bool,
    /// Worker threads for parallel solves.
    #[arg(long, global = true, env = "CAUSAL_OT_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// W_p, causal or W_{G,p} between two measures.
    Dist {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value = "euclidean")]
        cost: String,
    },
    /// Pairwise W_{G,p}, semimetric properties and triangle violations.
    Suite {
        #[arg(long, num_args = 2.., required = true)]
        measures: Vec<PathBuf>,
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value = "euclidean")]
        cost: String,
    },
    /// The bundled triangle-inequality counterexample.
    #[command(name = "appendix-b")]
    AppendixB {
        /// Replacement 12x12 distance matrix (headerless CSV).
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Graph preset or file; defaults to the Markov chain.
        #[arg(long)]
        graph: Option<String>,
    },
    /// Back-door average treatment effect of one measure.
    Ate {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        spec: PathBuf,
    },
    /// |ψ^μ - ψ^ν| against C·W_{G,1} on given or generated pairs.
    #[command(name = "ate-experiment")]
    AteExperiment {
        /// Measure pairs as `MU,NU` file paths; generated pairs when absent.
        #[arg(long, value_parser = parse_pair)]
        pair: Vec<(PathBuf, PathBuf)>,
        /// Treatment specification; defaults to Z -> T -> Y with Z -> Y.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        random: u64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        /// Append the bundled pair with a small W_1 and a large effect gap.
        #[arg(long)]
        constructed: bool,
    },
    /// W_{G,1} of two SCM pushforwards against the perturbation bound.
    Perturb {
        #[arg(long = "scm-a", requires = "scm_b")]
        scm_a: Option<PathBuf>,
        #[arg(long = "scm-b")]
        scm_b: Option<PathBuf>,
        /// Number of generated pairs when no files are given.
        #[arg(long, default_value_t = 50)]
        random: u64,
    },
    /// Displacement interpolation along an optimal coupling.
    Interpolate {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value = "euclidean")]
        cost: String,
        /// Comma-separated λ values; defaults to k/10.
        #[arg(long)]
        grid: Option<String>,
    },
    /// The bundled interpolation examples with plot data.
    Examples,
    /// G-compatibility of a measure.
    Check {
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        graph: GraphArg,
    },
    /// Shortest-path closure of a distance matrix.
    #[command(name = "repair-metric")]
    RepairMetric {
        #[arg(long)]
        matrix: PathBuf,
    },
}

#[derive(Debug, Args)]
struct GraphArg {
    /// Preset (full, empty, linear, markov) or graph file.
    #[arg(long, default_value = "full")]
    graph: String,
    /// Vertex count for presets; defaults to the measures' coordinate count.
    #[arg(long)]
    n: Option<usize>,
}

fn parse_pair(s: &str) -> std::result::Result<(PathBuf, PathBuf), String> {
    let (a, b) = s.split_once(',').ok_or("expected MU,NU")?;
    Ok((a.into(), b.into()))
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    p: Option<f64>,
    mode: Option<Mode>,
    method: Option<Method>,
    exact: Option<bool>,
    restarts: Option<usize>,
    seed: Option<u64>,
    max_enum: Option<u64>,
    tol: Option<f64>,
    emit_plan: Option<bool>,
    workers: Option<usize>,
    format: Option<Format>,
}

/// Resolved settings, embedded in every report.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    subcommand: &'static str,
    inputs: Vec<String>,
    p: f64,
    mode: Mode,
    method: Method,
    exact: bool,
    tol: f64,
    max_enum: u64,
    restarts: usize,
    seed: u64,
    format: Format,
    emit_plan: bool,
}

enum Failure {
    Input(String),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(path: &Path) -> std::result::Result<ConfigFile, Failure> {
    let text = read_text(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        Ok(parse_json(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }
}

fn resolve(common: &Common, subcommand: &'static str) -> std::result::Result<(RunConfig, Option<usize>), Failure> {
    let file = match &common.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let cfg = RunConfig {
        subcommand,
        inputs: Vec::new(),
        p: common.p.or(file.p).unwrap_or(1.0),
        mode: common.mode.or(file.mode).unwrap_or(Mode::Bicausal),
        method: common.method.or(file.method).unwrap_or(Method::Auto),
        exact: common.exact || file.exact.unwrap_or(false),
        tol: common.tol.or(file.tol).unwrap_or(FLOAT_TOL),
        max_enum: common.max_enum.or(file.max_enum).unwrap_or(ENUMERATION_CAP),
        restarts: common.restarts.or(file.restarts).unwrap_or(causal_ot::solver::DEFAULT_RESTARTS),
        seed: common.seed.or(file.seed).unwrap_or(0),
        format: common.format.or(file.format).unwrap_or(Format::Json),
        emit_plan: common.emit_plan || file.emit_plan.unwrap_or(false),
    };
    if !(cfg.tol > 0.0) {
        return Err(Failure::Input("--tol must be positive".into()));
    }
    if !(cfg.p >= 1.0) {
        return Err(Failure::Input("--p must be at least 1".into()));
    }
    if cfg.restarts == 0 {
        return Err(Failure::Input("--restarts must be positive".into()));
    }
    Ok((cfg, common.workers.or(file.workers)))
}

fn options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        arithmetic: if cfg.exact { Arithmetic::Exact } else { Arithmetic::Float },
        tol: cfg.tol,
        max_enum: cfg.max_enum,
        restarts: cfg.restarts,
        seed: cfg.seed,
        bicausal: match cfg.method {
            Method::Auto => BicausalMethod::Auto,
            Method::Exhaustive => BicausalMethod::Exhaustive,
            Method::Bcd => BicausalMethod::Bcd,
            Method::Recursion => BicausalMethod::Recursion,
        },
        ..SolveOptions::default()
    }
}

fn read_cost(spec: &str, p: f64, n: usize) -> std::result::Result<GroundCost, Failure> {
    let file = match spec {
        "euclidean" => CostFile::Euclidean,
        "abs" => CostFile::Abs,
        path => {
            let path = Path::new(path);
            let cost: CostFile = read_json(path)?;
            return Ok(cost.to_cost(p, n, path.parent())?);
        }
    };
    Ok(file.to_cost(p, n, None)?)
}

fn graph_for(arg: &GraphArg, n: usize) -> std::result::Result<CausalGraph, Failure> {
    Ok(read_graph(&arg.graph, arg.n.unwrap_or(n))?)
}

fn emit(out: &Option<PathBuf>, body: &str, summary: &[String]) -> Outcome {
    match out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            for line in summary {
                println!("{line}");
            }
        }
        None => {
            print!("{body}");
            for line in summary {
                eprintln!("{line}");
            }
        }
    }
    Ok(())
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn solve_json(r: &SolveReport, p: f64, cfg: &RunConfig, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Value {
    let v = r.value.max(0.0);
    let mut out = json!({
        "distance": if p == 1.0 { v } else { v.powf(1.0 / p) },
        "cost": r.value,
        "exact_cost": r.exact_value.as_ref().map(format_rational),
        "status": r.status,
        "method": r.method,
        "class": r.class,
        "iterations": r.iterations,
        "residual": r.residual,
        "seed": r.seed,
        "lower_bound": r.lower_bound,
    });
    if cfg.emit_plan {
        out["plan"] = coupling_json(&r.coupling, mu, nu);
    }
    out
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> std::result::Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

fn run(cli: Cli) -> Outcome {
    let name = match &cli.command {
        Command::Dist { .. } => "dist",
        Command::Suite { .. } => "suite",
        Command::AppendixB { .. } => "appendix-b",
        Command::Ate { .. } => "ate",
        Command::AteExperiment { .. } => "ate-experiment",
        Command::Perturb { .. } => "perturb",
        Command::Interpolate { .. } => "interpolate",
        Command::Examples => "examples",
        Command::Check { .. } => "check",
        Command::RepairMetric { .. } => "repair-metric",
    };
    let (mut cfg, workers) = resolve(&cli.common, name)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Input(e.to_string()))?;
    let out = cli.common.out.clone();
    pool.install(|| dispatch(cli.command, &mut cfg, &out))
}

fn dispatch(command: Command, cfg: &mut RunConfig, out: &Option<PathBuf>) -> Outcome {
    let opts = options(cfg);
    match command {
        Command::Dist { mu, nu, graph, cost } => {
            cfg.inputs = vec![mu.display().to_string(), nu.display().to_string(), graph.graph.clone(), cost.clone()];
            let m = read_measure(&mu)?;
            let n = read_measure(&nu)?;
            let g = graph_for(&graph, m.n())?;
            let c = read_cost(&cost, cfg.p, m.n())?;
            let report = match cfg.mode {
                Mode::Standard => wasserstein_p(&m, &n, &c, cfg.p, &opts)?.solve,
                Mode::Bicausal => g_wasserstein_p(&g, &m, &n, &c, cfg.p, &opts)?.solve,
                Mode::Causal => solve_causal(&g, &m, &n, &c.with_p(cfg.p), &opts)?,
            };
            let body = json!({ "config": cfg, "graph_class": g.class(), "result": solve_json(&report, cfg.p, cfg, &m, &n) });
            let summary = vec![format!("{:?} {:?}: cost {}", cfg.mode, report.status, report.value)];
            emit(out, &to_json(&body), &summary)
        }
        Command::Suite { measures, graph, cost } => {
            cfg.inputs = measures.iter().map(|p| p.display().to_string()).collect();
            let ms = measures.iter().map(|p| read_measure(p)).collect::<causal_ot::Result<Vec<_>>>()?;
            let g = graph_for(&graph, ms[0].n())?;
            let c = read_cost(&cost, cfg.p, ms[0].n())?;
            let r = semimetric_suite(&ms, &g, &c, cfg.p, &opts)?;
            let summary = vec![format!(
                "semimetric: {}, triangle inequality: {}",
                r.is_semimetric(),
                if r.triangle_holds() { "holds" } else { "VIOLATED" }
            )];
            let body = match cfg.format {
                Format::Json => to_json(&json!({ "config": cfg, "suite": r })),
                Format::Csv => csv_table(
                    &["a", "b", "forward", "backward"],
                    &r.distances
                        .iter()
                        .map(|d| vec![d.a.to_string(), d.b.to_string(), d.forward.to_string(), d.backward.to_string()])
                        .collect::<Vec<_>>(),
                )?,
            };
            emit(out, &body, &summary)
        }
        Command::AppendixB { matrix, graph } => {
            let m = match &matrix {
                Some(p) => {
                    cfg.inputs.push(p.display().to_string());
                    parse_matrix_csv(&read_text(p)?)?
                }
                None => appendix_b_matrix(),
            };
            if m.len() != 12 || m.iter().any(|r| r.len() != 12) {
                return Err(Failure::Input("the counterexample needs a 12x12 matrix".into()));
            }
            let inst = appendix_b_with_matrix(m);
            let g = match &graph {
                Some(s) => read_graph(s, 3)?,
                None => inst.graph.clone(),
            };
            let r = reproduce_appendix_b_with(&inst, &g, &opts)?;
            let mut summary = vec![
                format!("W(mu,nu)  = {}", r.values[0]),
                format!("W(nu,eta) = {}", r.values[1]),
                format!("W(mu,eta) = {}", r.values[2]),
            ];
            if !r.matches_reference {
                summary.push(format!("reference values {:?} not reproduced", r.reference));
            }
            summary.push(format!("triangle inequality: {}", if r.violated { "VIOLATED" } else { "holds" }));
            let body = to_json(&json!({ "config": cfg, "appendix_b": r }));
            emit(out, &body, &summary)?;
            if r.violated {
                Ok(())
            } else {
                Err(Failure::Assertion("triangle inequality not violated".into()))
            }
        }
        Command::Ate { measure, spec } => {
            cfg.inputs = vec![measure.display().to_string(), spec.display().to_string()];
            let m = read_measure(&measure)?;
            let s = read_json::<AteSpecFile>(&spec)?.to_spec()?;
            let gate = propensity_gate(&m, &s)?;
            let psi = ate_exact(&m, &s)?;
            let body = json!({
                "config": cfg,
                "ate": rational_to_f64(&psi),
                "ate_exact": format_rational(&psi),
                "propensity": gate,
            });
            emit(out, &to_json(&body), &[format!("ATE = {}", format_rational(&psi))])
        }
        Command::AteExperiment { pair, spec, random, delta, constructed } => {
            let s = match &spec {
                Some(p) => {
                    cfg.inputs.push(p.display().to_string());
                    read_json::<AteSpecFile>(p)?.to_spec()?
                }
                None => AteSpec::new(treatment_dag(), 1, 2, delta)?,
            };
            let mut pairs = Vec::new();
            if pair.is_empty() {
                pairs.extend((0..random).map(|i| random_ate_pair(cfg.seed.wrapping_add(i), s.delta)));
            } else {
                for (a, b) in &pair {
                    cfg.inputs.push(format!("{},{}", a.display(), b.display()));
                    pairs.push((read_measure(a)?, read_measure(b)?));
                }
            }
            let mut e = ate_continuity_experiment(&pairs, &s, &opts)?;
            if constructed {
                let (mu, nu, cs) = w1_discontinuity_pair();
                let mut extra = ate_continuity_experiment(&[(mu, nu)], &cs, &opts)?;
                extra.rows[0].pair = e.rows.len() + 1;
                e.rows.extend(extra.rows);
            }
            let body = match cfg.format {
                Format::Json => to_json(&json!({ "config": cfg, "experiment": e })),
                Format::Csv => e.to_csv()?,
            };
            let held = e.rows.iter().filter(|r| r.holds).count();
            emit(out, &body, &[format!("bound holds on {held}/{} pairs", e.rows.len())])?;
            if e.all_hold() {
                Ok(())
            } else {
                Err(Failure::Assertion("ATE continuity bound failed".into()))
            }
        }
        Command::Perturb { scm_a, scm_b, random } => {
            let reports: Vec<PerturbationReport> = match (scm_a, scm_b) {
                (Some(a), Some(b)) => {
                    cfg.inputs = vec![a.display().to_string(), b.display().to_string()];
                    let (a, b) = (read_scm(&a)?, read_scm(&b)?);
                    vec![scm_perturbation_bound(&a, &b, &opts)?]
                }
                _ => (0..random)
                    .map(|i| {
                        let shape = if i % 2 == 0 { ScmShape::Chain } else { ScmShape::Diamond };
                        let (a, b) = random_scm_pair(cfg.seed.wrapping_add(i), shape);
                        scm_perturbation_bound(&a, &b, &opts)
                    })
                    .collect::<causal_ot::Result<Vec<_>>>()?,
            };
            let held = reports.iter().filter(|r| r.holds).count();
            let body = match cfg.format {
                Format::Json => to_json(&json!({ "config": cfg, "reports": reports })),
                Format::Csv => csv_table(
                    &["pair", "lhs", "rhs", "constant", "holds"],
                    &reports
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            vec![
                                (i + 1).to_string(),
                                r.lhs.to_string(),
                                r.rhs.to_string(),
                                r.constant.to_string(),
                                r.holds.to_string(),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?,
            };
            emit(out, &body, &[format!("bound holds on {held}/{} pairs", reports.len())])?;
            if held == reports.len() {
                Ok(())
            } else {
                Err(Failure::Assertion("perturbation bound failed".into()))
            }
        }
        Command::Interpolate { mu, nu, graph, cost, grid } => {
            cfg.inputs = vec![mu.display().to_string(), nu.display().to_string(), graph.graph.clone(), cost.clone()];
            let m = read_measure(&mu)?;
            let n = read_measure(&nu)?;
            let g = graph_for(&graph, m.n())?;
            let c = read_cost(&cost, cfg.p, m.n())?;
            let lambdas: Vec<f64> = match &grid {
                Some(s) => s
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::Input(format!("bad lambda '{x}'"))))
                    .collect::<std::result::Result<_, _>>()?,
                None => causal_ot::interpolation::decile_grid(),
            };
            let path = match cfg.mode {
                Mode::Standard => standard_interpolation_path(&g, &m, &n, &c, cfg.p, &lambdas, &opts)?,
                Mode::Bicausal => interpolation_path(&g, &m, &n, &c, cfg.p, &lambdas, &opts)?,
                Mode::Causal => return Err(Failure::Input("interpolation uses --mode bicausal or standard".into())),
            };
            let summary = vec![format!(
                "compatible at {}/{} grid points; exceptions {:?}",
                path.compatible_count(),
                path.lambdas.len(),
                path.summary().exceptions
            )];
            let body = match cfg.format {
                Format::Json => {
                    let mut v = json!({
                        "config": cfg,
                        "path": path.summary(),
                        "cost": path.value,
                        "status": path.status,
                        "measures": path.measures.iter().map(measure_json).collect::<Vec<_>>(),
                    });
                    if cfg.emit_plan {
                        v["plan"] = coupling_json(&path.coupling, &m, &n);
                    }
                    to_json(&v)
                }
                Format::Csv => {
                    let mut rows = Vec::new();
                    for (l, k) in path.lambdas.iter().zip(&path.measures) {
                        for node in trajectory_data(k, "", *l)?.nodes {
                            rows.push(vec![node.step.to_string(), node.value.to_string(), node.weight.to_string(), l.to_string()]);
                        }
                    }
                    csv_table(&["step", "value", "weight", "lambda"], &rows)?
                }
            };
            emit(out, &body, &summary)?;
            if path.outside_exceptions_compatible() || cfg.mode == Mode::Standard {
                Ok(())
            } else {
                Err(Failure::Assertion("an interpolant outside the exception set is not compatible".into()))
            }
        }
        Command::Examples => {
            let b = reproduce_examples(&opts)?;
            let body = match cfg.format {
                Format::Json => to_json(&json!({ "config": cfg, "examples": b })),
                Format::Csv => {
                    let mut rows = Vec::new();
                    for plot in &b.random_walks.plots {
                        for node in &plot.nodes {
                            rows.push(vec![
                                plot.label.clone(),
                                node.step.to_string(),
                                node.value.to_string(),
                                node.weight.to_string(),
                                plot.lambda.to_string(),
                            ]);
                        }
                    }
                    csv_table(&["series", "step", "value", "weight", "lambda"], &rows)?
                }
            };
            let tp = &b.three_point;
            let rw = &b.random_walks;
            let summary = vec![
                format!("three-point: W_G2^2 = {}, flags {:?}, exceptions {:?}", tp.value, tp.path.flags, tp.path.exceptions),
                format!(
                    "random walks: W2^2 = {}, W_G2^2 = {}, W2 plan bicausal: {}, G-path compatible {}/{}",
                    rw.w2_squared,
                    rw.wg2_squared,
                    rw.standard_membership.member,
                    rw.causal_path.compatible,
                    rw.causal_path.lambdas.len()
                ),
            ];
            emit(out, &body, &summary)?;
            if tp.matches_first_coordinates && tp.path.outside_exceptions_compatible && rw.causal_path.outside_exceptions_compatible {
                Ok(())
            } else {
                Err(Failure::Assertion("example reproduction failed".into()))
            }
        }
        Command::Check { measure, graph } => {
            cfg.inputs = vec![measure.display().to_string(), graph.graph.clone()];
            let m = read_measure(&measure)?;
            let g = graph_for(&graph, m.n())?;
            let c = is_g_compatible(&m, &g, 0.0);
            let summary = vec![format!("G-compatible: {}", c.compatible)];
            emit(out, &to_json(&json!({ "config": cfg, "compatibility": c })), &summary)
        }
        Command::RepairMetric { matrix } => {
            cfg.inputs = vec![matrix.display().to_string()];
            let m = parse_matrix_csv(&read_text(&matrix)?)?;
            let before = validate_metric(&m, METRIC_TOL)?;
            let repaired = metric_repair(&m)?;
            let changed = m
                .iter()
                .zip(&repaired)
                .flat_map(|(a, b)| a.iter().zip(b))
                .filter(|(a, b)| a != b)
                .count();
            let body = match cfg.format {
                Format::Csv => {
                    let mut s = String::new();
                    for row in &repaired {
                        s.push_str(&row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
                        s.push('\n');
                    }
                    s
                }
                Format::Json => to_json(&json!({
                    "config": cfg,
                    "violations_before": before.triangle_violations.len(),
                    "changed_entries": changed,
                    "matrix": repaired,
                })),
            };
            emit(out, &body, &[format!("{changed} entries lowered")])
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(2)
        }
    }
}
