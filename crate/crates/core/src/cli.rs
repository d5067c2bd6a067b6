//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chain::{self, ChainSolution, EXACT_CAP};
use crate::error::Error;
use crate::fptas::approx_chain;
use crate::gen::{self, GenConfig, WeightDist};
use crate::indep::{self, IndepResult};
use crate::model::{Instance, Kind, Schedule};
use crate::oracle::{self, DEFAULT_GRID_STEPS};
use crate::validate::{validate, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tricrit", version, about = "Energy, reliability and deadline aware task scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance or a preset.
    Gen(GenArgs),
    /// Run a solver on an instance.
    Solve(SolveArgs),
    /// Reference solution for a small instance.
    Oracle(OracleArgs),
    /// Check a schedule against an instance.
    Validate(ValidateArgs),
    /// Solve a batch of generated instances and write a CSV summary.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Chain,
    Independent,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Chain => Kind::Chain,
            KindArg::Independent => Kind::Independent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "figure-1")]
    ElevenTasks,
    #[value(name = "prop2")]
    UnequalReplicas,
    TwoPartition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    ChainExact,
    ChainFptas,
    ChainFast,
    Indep,
    IndepLargep,
    NoReplication,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Values for the two-partition preset.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, value_enum, default_value = "chain")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Integer weight range `lo:hi`.
    #[arg(long, default_value = "1:50")]
    pub weights: String,
    /// Draw real weights instead of integers.
    #[arg(long)]
    pub real_weights: bool,
    #[arg(long, default_value_t = 1.5)]
    pub deadline_factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub fmin: f64,
    #[arg(long, default_value_t = 2.0)]
    pub fmax: f64,
    #[arg(long, default_value_t = 1.0)]
    pub frel: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub d: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GRID_STEPS)]
    pub grid_steps: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Schedule file: a JSON array of records, or any object with a
    /// `schedule` field (solver output).
    #[arg(long)]
    pub schedule: PathBuf,
    /// Makespan bound; defaults to the instance deadline.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "chain")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1.5)]
    pub deadline_factor: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::InfeasibleDeadline(_)) => EXIT_INFEASIBLE,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json(&text)?)
}

fn parse_range(spec: &str) -> anyhow::Result<(u32, u32)> {
    let Some((lo, hi)) = spec.split_once(':') else {
        bail!("weight range must look like lo:hi, got {spec:?}");
    };
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<i32> {
    let instance = match a.preset {
        Some(Preset::ElevenTasks) => gen::eleven_tasks(),
        Some(Preset::UnequalReplicas) => gen::unequal_replicas(),
        Some(Preset::TwoPartition) => {
            let values = if a.values.is_empty() {
                gen::TWO_PARTITION_DEFAULT.to_vec()
            } else {
                a.values.clone()
            };
            gen::two_partition(&values)?
        }
        None => {
            let (lo, hi) = parse_range(&a.weights)?;
            let weights = if a.real_weights {
                WeightDist::UniformReal {
                    lo: lo as f64,
                    hi: hi as f64,
                }
            } else {
                WeightDist::UniformInt { lo, hi }
            };
            gen::generate(&GenConfig {
                kind: a.kind.into(),
                n: a.n,
                p: a.p,
                weights,
                deadline_factor: a.deadline_factor,
                fmin: a.fmin,
                fmax: a.fmax,
                frel: a.frel,
                lambda0: a.lambda0,
                d: a.d,
                seed: a.seed,
            })?
        }
    };
    emit(a.output.as_deref(), &format!("{}\n", instance.to_json()))?;
    Ok(EXIT_OK)
}

fn require_kind(instance: &Instance, kind: Kind, algo: Algo) -> anyhow::Result<()> {
    if instance.kind != kind {
        return Err(Error::KindMismatch(format!("{algo:?} needs a {kind:?} instance")).into());
    }
    Ok(())
}

enum Solution {
    Chain(ChainSolution, Schedule),
    Indep(IndepResult),
}

fn run_algo(instance: &Instance, algo: Algo, eps: f64) -> anyhow::Result<Solution> {
    let chain_result = |sol: ChainSolution| {
        let sched = chain::materialize_chain_schedule(&sol, instance);
        Solution::Chain(sol, sched)
    };
    Ok(match algo {
        Algo::ChainExact => {
            require_kind(instance, Kind::Chain, algo)?;
            chain_result(chain::solve_exact(instance)?)
        }
        Algo::ChainFptas => {
            require_kind(instance, Kind::Chain, algo)?;
            chain_result(approx_chain(instance, eps, None, None)?)
        }
        Algo::ChainFast => {
            require_kind(instance, Kind::Chain, algo)?;
            match chain::fast_paths(instance)? {
                Some(sol) => chain_result(sol),
                None => {
                    return Err(Error::NotApplicable("no polynomial case covers this instance".into()).into())
                }
            }
        }
        Algo::NoReplication => {
            require_kind(instance, Kind::Chain, algo)?;
            chain_result(chain::solve_no_replication(instance)?)
        }
        Algo::Indep => {
            require_kind(instance, Kind::Independent, algo)?;
            Solution::Indep(indep::schedule_indep_auto(instance)?)
        }
        Algo::IndepLargep => {
            require_kind(instance, Kind::Independent, algo)?;
            Solution::Indep(indep::schedule_indep_largep(instance)?)
        }
    })
}

/// The `solve` output document for `instance`, and its validation report.
/// Chain schedules are checked against `D`, independent ones against `beta D`.
pub fn solve_document(instance: &Instance, algo: Algo, eps: f64) -> anyhow::Result<(Value, ValidationReport)> {
    let (solution, schedule, bound) = match run_algo(instance, algo, eps)? {
        Solution::Chain(sol, sched) => (serde_json::to_value(&sol)?, sched, instance.deadline),
        Solution::Indep(res) => {
            let bound = res.beta_used * instance.deadline;
            (serde_json::to_value(&res)?, res.schedule, bound)
        }
    };
    let report = validate(instance, &schedule, bound);
    let doc = json!({
        "algorithm": algo_name(algo),
        "solution": solution,
        "schedule": schedule,
        "validation": report,
    });
    Ok((doc, report))
}

/// The `oracle` output document: exhaustive search for independent tasks,
/// exact subset enumeration for chains.
pub fn oracle_document(instance: &Instance, grid_steps: usize) -> anyhow::Result<Value> {
    Ok(match instance.kind {
        Kind::Independent => {
            let r = oracle::oracle_indep(instance, grid_steps)?;
            let report = validate(instance, &r.schedule, instance.deadline);
            json!({ "oracle": r, "schedule": r.schedule, "validation": report })
        }
        Kind::Chain => {
            let sol = chain::solve_exact(instance)?;
            let sched = chain::materialize_chain_schedule(&sol, instance);
            let report = validate(instance, &sched, instance.deadline);
            json!({ "oracle": sol, "schedule": sched, "validation": report })
        }
    })
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<i32> {
    let instance = read_instance(&a.input)?;
    let (doc, report) = solve_document(&instance, a.algo, a.epsilon)?;
    emit(a.output.as_deref(), &to_json(&doc)?)?;
    Ok(if report.is_valid() { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn cmd_oracle(a: OracleArgs) -> anyhow::Result<i32> {
    let instance = read_instance(&a.input)?;
    let doc = oracle_document(&instance, a.grid_steps)?;
    emit(a.output.as_deref(), &to_json(&doc)?)?;
    Ok(EXIT_OK)
}

fn algo_name(algo: Algo) -> String {
    algo.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

/// Reads a schedule from either a bare record array or an object with a
/// `schedule` field.
pub fn parse_schedule(text: &str) -> anyhow::Result<Schedule> {
    let value: serde_json::Value = serde_json::from_str(text).context("schedule is not JSON")?;
    let records = match value {
        serde_json::Value::Object(mut map) => match map.remove("schedule") {
            Some(v) => v,
            None => bail!("object has no \"schedule\" field"),
        },
        other => other,
    };
    serde_json::from_value(records).context("malformed schedule records")
}

fn cmd_validate(a: ValidateArgs) -> anyhow::Result<i32> {
    let instance = read_instance(&a.input)?;
    let text = fs::read_to_string(&a.schedule).with_context(|| format!("reading {}", a.schedule.display()))?;
    let schedule = parse_schedule(&text)?;
    let report: ValidationReport = validate(&instance, &schedule, a.bound.unwrap_or(instance.deadline));
    emit(a.output.as_deref(), &to_json(&report)?)?;
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!("violation: {}", v.message);
        }
        return Ok(EXIT_ERROR);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct BenchRow {
    instance: usize,
    seed: u64,
    algorithm: String,
    branch: String,
    energy: f64,
    lower_bound: f64,
    ratio: f64,
    makespan_over_deadline: f64,
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<i32> {
    let kind: Kind = a.kind.into();
    let mut master = ChaCha8Rng::seed_from_u64(a.seed);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for k in 0..a.count {
        let seed = rand::Rng::gen::<u64>(&mut master);
        let instance = gen::generate(&GenConfig {
            kind,
            n: a.n,
            p: a.p,
            deadline_factor: a.deadline_factor,
            seed,
            ..GenConfig::default()
        })?;
        let row = match kind {
            Kind::Chain => {
                let sol = approx_chain(&instance, a.epsilon, None, None)?;
                let sched = chain::materialize_chain_schedule(&sol, &instance);
                let reference = if instance.n() <= EXACT_CAP {
                    chain::solve_exact(&instance)?.energy
                } else {
                    f64::NAN
                };
                BenchRow {
                    instance: k,
                    seed,
                    algorithm: "chain-fptas".into(),
                    branch: if sol.replicated.is_empty() { "no_replication" } else { "replication" }.into(),
                    energy: sol.energy,
                    lower_bound: reference,
                    ratio: sol.energy / reference,
                    makespan_over_deadline: sched.makespan(&instance) / instance.deadline,
                }
            }
            Kind::Independent => {
                let r = indep::schedule_indep_auto(&instance)?;
                BenchRow {
                    instance: k,
                    seed,
                    algorithm: "indep".into(),
                    branch: serde_json::to_value(r.branch)?.as_str().unwrap_or_default().to_string(),
                    energy: r.energy,
                    lower_bound: r.lower_bound,
                    ratio: r.energy / r.lower_bound,
                    makespan_over_deadline: r.makespan / instance.deadline,
                }
            }
        };
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().context("flushing csv")?;
    emit(a.output.as_deref(), &String::from_utf8(bytes)?)?;
    Ok(EXIT_OK)
}
