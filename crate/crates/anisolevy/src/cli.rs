//! Batch front-end. A JSON run config supplies model, problem and experiment
//! parameters; command-line flags override the `experiment` section key by key.

use crate::density::{stable_density_1d, Axis};
use crate::error::{Error, Result};
use crate::experiments::{
    a1_scaling_experiment, besov_growth_experiment, moment_bound_experiment, one_step_rate_experiment, A1Config,
    BesovConfig, ExperimentReport, MomentConfig, RateConfig,
};
use crate::hypotheses::{check_diagonal, check_general, check_no_delta, check_preset, ConditionReport, PresetParams};
use crate::levy_models::LevyModel;
use crate::sampling::{map_batches, write_atomic, write_samples, IncrementPlan};
use crate::sde::{simulate_endpoint_with, SdeProblem};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "anisolevy", version, about = "Anisotropic Lévy-driven SDE experiments")]
pub struct Cli {
    /// JSON run config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "ANISOLEVY_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate hypothesis inequalities.
    Check(CheckArgs),
    /// Simulate endpoints (or increments) to a binary sample file.
    Simulate(SimulateArgs),
    /// (A1) scaling scan of an exact stable density.
    #[command(name = "a1-scan")]
    A1Scan(A1Args),
    /// One-step convergence rate.
    Rate(RateArgs),
    /// Besov-norm growth of the weighted endpoint density.
    Besov(BesovArgs),
    /// Fractional moments of stochastic integrals.
    Moments(MomentArgs),
    /// Dump a stable density computed by FFT inversion.
    Density(DensityArgs),
}

#[derive(Args, Serialize, Debug, Default)]
pub struct CheckArgs {
    /// z1, z2, z2-diagonal, elliptic-non-diagonal or elliptic-diagonal.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub chis: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub zero_drift: Option<bool>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct CheckParams {
    preset: Option<crate::hypotheses::Preset>,
    alphas: Vec<f64>,
    beta: Option<f64>,
    chi: Option<f64>,
    betas: Option<Vec<f64>>,
    chis: Option<Vec<f64>>,
    gamma: Option<f64>,
    delta: Option<f64>,
    gammas: Option<Vec<f64>>,
    deltas: Option<Vec<f64>>,
    #[serde(default)]
    zero_drift: bool,
}

#[derive(Args, Serialize, Debug, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// File name inside the output directory.
    #[arg(long)]
    pub file: Option<String>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    t: f64,
    #[serde(default = "one")]
    steps: usize,
    n: usize,
    #[serde(default = "thousand")]
    batch: usize,
    #[serde(default = "samples_file")]
    file: String,
}

fn one() -> usize {
    1
}

fn thousand() -> usize {
    1000
}

fn samples_file() -> String {
    "samples.bin".into()
}

#[derive(Args, Serialize, Debug, Default)]
pub struct A1Args {
    /// Component-stable model with these indices (overrides the config model).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub axis: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub h_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub tail_mass: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Serialize, Debug, Default)]
pub struct RateArgs {
    /// ge1, lt1 or diagonal.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Serialize, Debug, Default)]
pub struct BesovArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub h_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Serialize, Debug, Default)]
pub struct MomentArgs {
    /// Component-stable model with these indices (overrides the config model).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// integral or jump_sum.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Serialize, Debug, Default)]
pub struct DensityArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Half-width of the symmetric output grid; defaults to a tail-based width.
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct DensityParams {
    alpha: f64,
    t: f64,
    half_width: Option<f64>,
    step: Option<f64>,
}

/// Top-level JSON config. Unknown keys are rejected.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<LevyModel>,
    pub problem: Option<SdeProblem>,
    #[serde(default)]
    pub experiment: Map<String, Value>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::input(format!("config.{}", e.path()), e.inner().to_string()))
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Overlays the provided flags on the config section. A flag whose JSON type differs
/// from the config value it replaces is an error.
fn merge<A: Serialize>(section: &Map<String, Value>, flags: &A) -> Result<Map<String, Value>> {
    let mut out = section.clone();
    let Value::Object(fl) = serde_json::to_value(flags).expect("flags serialize") else {
        unreachable!("flag structs serialize to objects")
    };
    for (k, v) in fl {
        if v.is_null() {
            continue;
        }
        if let Some(old) = out.get(&k) {
            if !old.is_null() && kind(old) != kind(&v) {
                return Err(Error::input(
                    format!("experiment.{k}"),
                    format!("flag gives a {} but the config holds a {}", kind(&v), kind(old)),
                ));
            }
        }
        out.insert(k, v);
    }
    Ok(out)
}

fn params<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T> {
    let v = Value::Object(map);
    serde_path_to_error::deserialize(v).map_err(|e| Error::input(format!("experiment.{}", e.path()), e.inner().to_string()))
}

fn need_problem(cfg: &RunConfig) -> Result<&SdeProblem> {
    let p = cfg.problem.as_ref().ok_or_else(|| Error::input("problem", "this subcommand needs a problem in the config"))?;
    p.validate()?;
    Ok(p)
}

fn model_from(cfg: &RunConfig, alphas: &Option<Vec<f64>>) -> Result<LevyModel> {
    let m = match (alphas, &cfg.model, &cfg.problem) {
        (Some(a), _, _) => LevyModel::ComponentStable { alphas: a.clone() },
        (None, Some(m), _) => m.clone(),
        (None, None, Some(p)) => p.model.clone(),
        _ => return Err(Error::input("model", "give --alphas or a model in the config")),
    };
    m.validate()?;
    Ok(m)
}

struct Context {
    out: PathBuf,
    seed: u64,
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn emit(ctx: &Context, stem: &str, rep: &ExperimentReport) -> Result<i32> {
    rep.write(&ctx.out, stem)?;
    for c in &rep.checks {
        println!("{} {} (measured {:.6}, target {:.6}, tol {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.target, c.tolerance);
    }
    if rep.advisory {
        println!("ADVISORY hypotheses not satisfied");
    }
    Ok(if rep.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn run_check(cfg: &RunConfig, args: &CheckArgs, ctx: &Context) -> Result<i32> {
    let p: CheckParams = params(merge(&cfg.experiment, args)?)?;
    let rep: ConditionReport = if let Some(preset) = p.preset {
        check_preset(
            preset,
            &PresetParams {
                alphas: p.alphas,
                beta: p.beta,
                chi: p.chi,
                betas: p.betas,
                chis: p.chis,
                zero_drift: p.zero_drift,
            },
        )?
    } else if let Some(gammas) = p.gammas {
        let d = p.alphas.len();
        let fill = |v: Option<Vec<f64>>, s: Option<f64>, name: &str| -> Result<Vec<f64>> {
            v.or(s.map(|x| vec![x; d])).ok_or_else(|| Error::input(name, "missing"))
        };
        let deltas = p.deltas.or(p.delta.map(|x| vec![x; d])).unwrap_or_else(|| gammas.clone());
        check_diagonal(
            &p.alphas,
            &gammas,
            &deltas,
            &fill(p.betas, p.beta, "beta")?,
            &fill(p.chis, p.chi, "chi")?,
            p.zero_drift,
        )?
    } else {
        let gamma = p.gamma.ok_or_else(|| Error::input("gamma", "give a preset, gamma or gammas"))?;
        let beta = p.beta.ok_or_else(|| Error::input("beta", "missing"))?;
        let chi = p.chi.ok_or_else(|| Error::input("chi", "missing"))?;
        match p.delta {
            Some(delta) => check_general(&p.alphas, gamma, delta, beta, chi, p.zero_drift)?,
            None => check_no_delta(&p.alphas, gamma, beta, chi, p.zero_drift)?,
        }
    };
    std::fs::create_dir_all(&ctx.out)?;
    let text = serde_json::to_string_pretty(&rep).expect("serializable");
    write_atomic(&ctx.out.join("check.json"), text.as_bytes())?;
    println!("{text}");
    Ok(if rep.overall { EXIT_PASS } else { EXIT_FAIL })
}

fn run_simulate(cfg: &RunConfig, args: &SimulateArgs, ctx: &Context) -> Result<i32> {
    let p: SimulateParams = params(merge(&cfg.experiment, args)?)?;
    if !(p.t > 0.0) || p.n == 0 || p.steps == 0 || p.batch == 0 {
        return Err(Error::input("experiment", "need t > 0 and positive n, steps, batch"));
    }
    if Path::new(&p.file).components().count() != 1 {
        return Err(Error::input("experiment.file", "must be a plain file name"));
    }
    let (d, data, source) = if let Some(problem) = &cfg.problem {
        problem.validate()?;
        let plan = IncrementPlan::new(&problem.model)?;
        let parts = map_batches(ctx.seed, p.n, p.batch, |len, rng| {
            (0..len)
                .flat_map(|_| simulate_endpoint_with(problem, &plan, p.t, p.steps, rng))
                .collect::<Vec<f64>>()
        });
        (problem.dim(), parts.concat(), "endpoints")
    } else {
        let model = model_from(cfg, &None)?;
        let plan = IncrementPlan::new(&model)?;
        let parts = map_batches(ctx.seed, p.n, p.batch, |len, rng| {
            (0..len).flat_map(|_| plan.sample_increment(p.t, rng)).collect::<Vec<f64>>()
        });
        (model.dim(), parts.concat(), "increments")
    };
    std::fs::create_dir_all(&ctx.out)?;
    let path = ctx.out.join(&p.file);
    write_samples(&path, d, &data)?;
    print_json(&serde_json::json!({ "file": path, "kind": source, "dim": d, "n": p.n, "t": p.t, "steps": p.steps, "seed": ctx.seed }));
    Ok(EXIT_PASS)
}

fn run_density(cfg: &RunConfig, args: &DensityArgs, ctx: &Context) -> Result<i32> {
    let p: DensityParams = params(merge(&cfg.experiment, args)?)?;
    if !(p.t > 0.0) || !(p.alpha > 0.0 && p.alpha <= 2.0) {
        return Err(Error::input("experiment", "need t > 0 and α ∈ (0,2]"));
    }
    let s = p.t.powf(1.0 / p.alpha);
    let step = p.step.unwrap_or(s / 50.0);
    let half = match p.half_width {
        Some(h) => h,
        None if p.alpha >= 2.0 => 12.0 * s,
        None => {
            let c = crate::numerics::gamma(p.alpha) * (std::f64::consts::FRAC_PI_2 * p.alpha).sin() / std::f64::consts::PI;
            (2.0 * c / (p.alpha * 5e-4)).powf(1.0 / p.alpha).max(12.0) * s
        }
    };
    let axis = Axis::centered(half, step)?;
    let f = stable_density_1d(p.alpha, p.t, axis)?;
    std::fs::create_dir_all(&ctx.out)?;
    write_atomic(&ctx.out.join("density.csv"), f.to_csv().as_bytes())?;
    f.save(&ctx.out.join("density.bin"))?;
    let mid = axis.count / 2;
    let summary = serde_json::json!({
        "alpha": p.alpha,
        "t": p.t,
        "axis": axis,
        "mass": f.mass,
        "value_at_zero": f.values[mid],
    });
    write_atomic(&ctx.out.join("density.json"), serde_json::to_string_pretty(&summary).unwrap().as_bytes())?;
    print_json(&summary);
    Ok(EXIT_PASS)
}

fn dispatch(cli: &Cli, cfg: &RunConfig, ctx: &Context) -> Result<i32> {
    match &cli.command {
        Command::Check(a) => run_check(cfg, a, ctx),
        Command::Simulate(a) => run_simulate(cfg, a, ctx),
        Command::Density(a) => run_density(cfg, a, ctx),
        Command::A1Scan(a) => {
            let model = model_from(cfg, &a.alphas)?;
            let c: A1Config = params(merge(&cfg.experiment, a)?)?;
            emit(ctx, "a1-scan", &a1_scaling_experiment(&model, &c)?)
        }
        Command::Rate(a) => {
            let problem = need_problem(cfg)?;
            let c: RateConfig = params(merge(&cfg.experiment, a)?)?;
            emit(ctx, "rate", &one_step_rate_experiment(problem, &c, ctx.seed)?)
        }
        Command::Besov(a) => {
            let problem = need_problem(cfg)?;
            let c: BesovConfig = params(merge(&cfg.experiment, a)?)?;
            emit(ctx, "besov", &besov_growth_experiment(problem, &c, ctx.seed)?)
        }
        Command::Moments(a) => {
            let model = model_from(cfg, &a.alphas)?;
            let c: MomentConfig = params(merge(&cfg.experiment, a)?)?;
            emit(ctx, "moments", &moment_bound_experiment(&model, &c, ctx.seed)?)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        out: cli.out.clone().or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
    };
    let workers = cli.workers.or(cfg.workers);
    if workers == Some(0) {
        return Err(Error::input("workers", "must be positive"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| dispatch(&cli, &cfg, &ctx))
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_are_path_qualified() {
        let e = parse_config(r#"{"model": {"kind": "component_stable", "alphas": [1.5], "extra": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("config.model"), "{e}");
        let e = parse_config(r#"{"seed": "x"}"#).unwrap_err();
        assert!(e.to_string().contains("config.seed"), "{e}");
        assert!(parse_config("{").is_err());
        assert!(parse_config(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn flags_override_and_type_conflicts() {
        let mut section = Map::new();
        section.insert("eta".into(), Value::from(0.3));
        section.insert("t_grid".into(), Value::from(vec![1.0]));
        let args = BesovArgs { lambda: Some(0.5), ..Default::default() };
        let m = merge(&section, &args).unwrap();
        assert_eq!(m["lambda"], Value::from(0.5));
        assert_eq!(m["eta"], Value::from(0.3));
        let args = BesovArgs { t_grid: Some(vec![0.5, 0.25]), ..Default::default() };
        assert_eq!(merge(&section, &args).unwrap()["t_grid"], Value::from(vec![0.5, 0.25]));
        let mut bad = Map::new();
        bad.insert("lambda".into(), Value::from(vec![0.5]));
        assert!(merge(&bad, &BesovArgs { lambda: Some(0.5), ..Default::default() }).is_err());
    }

    #[test]
    fn alphas_flags_are_not_experiment_keys() {
        let args = A1Args { alphas: Some(vec![1.0]), axis: Some(0), ..Default::default() };
        let m = merge(&Map::new(), &args).unwrap();
        assert!(!m.contains_key("alphas"));
    }
}
