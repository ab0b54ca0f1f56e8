use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tubal_core::analysis::{self, sweep_bounds, tightest, TSweepEntry};
use tubal_core::experiment::{self, MapSpec, RipTable, RunOptions, SolverOverrides};
use tubal_core::{
    add_noise, admm_solve, average_rank, generate_lowrank, io, snr_db, tnn, tsvd, tubal_rank, ExperimentSpec,
    GaussianLinearMap, TubalError, VarianceMode, DEFAULT_RANK_TOL,
};

#[derive(Parser)]
#[command(name = "tubal", version, about = "Low-tubal-rank tensor recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a tensor file and report its spectrum.
    Tsvd(TsvdArgs),
    /// Solve one regularized recovery instance.
    Solve(SolveArgs),
    /// Run a recovery sweep over noise levels and regularization weights.
    Experiment(ExperimentArgs),
    /// Estimate restricted isometry constants of a map.
    Rip(RipArgs),
    /// Compute error-bound constants or check the bounds on a solved instance.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

#[derive(Args)]
struct TsvdArgs {
    /// Tensor in the binary container or as JSON.
    #[arg(long)]
    input: PathBuf,
    /// Relative cutoff for the rank counts.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    /// Write U, S and V as `<prefix>.u.tns`, `<prefix>.s.tns`, `<prefix>.v.tns`.
    #[arg(long)]
    factors: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the recovered tensor in the binary container.
    #[arg(long)]
    x_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Sweep description (JSON). Mutually exclusive with `--case`.
    #[arg(long, conflicts_with = "case", required_unless_present = "case")]
    spec: Option<PathBuf>,
    /// Built-in preset.
    #[arg(long, value_parser = ["case1", "case2", "case3"])]
    case: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall times and a timestamp in the JSON output.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RipArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input of `solve`.
#[derive(Deserialize)]
struct SolveSpec {
    lambda: f64,
    #[serde(default)]
    solver: SolverOverrides,
    #[serde(flatten)]
    instance: Instance,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum Instance {
    /// Random ground truth, Gaussian map and noise.
    Synthetic(Synthetic),
    /// Map and measurements from files, optionally with the ground truth.
    Files {
        map: PathBuf,
        y: PathBuf,
        x_true: Option<PathBuf>,
    },
}

#[derive(Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Synthetic {
    n1: usize,
    n2: usize,
    n3: usize,
    r: usize,
    m: usize,
    #[serde(default)]
    sigma: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "one_over_m")]
    variance_mode: VarianceMode,
}

fn one_over_m() -> VarianceMode {
    VarianceMode::OneOverM
}

struct Built {
    map: GaussianLinearMap,
    y: nalgebra::DVector<f64>,
    x_true: Option<tubal_core::DenseTensor3>,
    noise_norm: Option<f64>,
}

impl Synthetic {
    fn build(&self) -> tubal_core::Result<Built> {
        let seeds = experiment::TrialSeeds::derive(self.seed, "solve", 0);
        let map = GaussianLinearMap::gaussian(self.m, (self.n1, self.n2, self.n3), seeds.map, self.variance_mode)?;
        let x = generate_lowrank(self.n1, self.n2, self.n3, self.r, seeds.data)?;
        let sample = add_noise(&map.apply(&x)?, self.sigma, seeds.noise)?;
        Ok(Built {
            map,
            y: sample.y,
            x_true: Some(x),
            noise_norm: Some(sample.noise_norm),
        })
    }
}

#[derive(Serialize)]
struct SolveReport {
    dims: [usize; 3],
    m: usize,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_norm: Option<f64>,
    #[serde(flatten)]
    result: tubal_core::SolveResult,
}

/// Input of `rip`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RipSpec {
    map: MapSpec,
    ranks: Vec<usize>,
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "two")]
    t: f64,
}

fn two() -> f64 {
    2.0
}

/// Input of `bounds`.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
enum BoundsSpec {
    /// Constants for a given isometry constant.
    Constants {
        delta: f64,
        t: f64,
        r: usize,
        n3: usize,
        lambda: f64,
        epsilon: Option<f64>,
    },
    /// Solve a synthetic instance and check the bounds over a grid of `t`,
    /// using the empirical isometry constant and the realized noise norm.
    Verify {
        n: usize,
        n3: usize,
        r: usize,
        m: usize,
        sigma: f64,
        lambda: f64,
        #[serde(default)]
        seed: u64,
        t_grid: Vec<f64>,
        #[serde(default = "ric_trials")]
        ric_trials: usize,
    },
}

fn ric_trials() -> usize {
    200
}

#[derive(Serialize)]
struct ConstantsReport {
    delta: f64,
    t: f64,
    r: usize,
    n3: usize,
    lambda: f64,
    threshold: f64,
    eta1: f64,
    eta2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem: Option<[f64; 4]>,
    corollary: [f64; 4],
}

#[derive(Serialize)]
struct VerifyReport {
    lambda: f64,
    epsilon: f64,
    snr_db: f64,
    /// `t` is chosen by the tool: the satisfied report with the smallest
    /// Frobenius right-hand side.
    tightest: Option<analysis::BoundReport>,
    sweep: Vec<TSweepEntry>,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn read_spec<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| SpecError(format!("{}: {e}", path.display())).into())
}

/// A spec file that could not be parsed.
#[derive(Debug)]
struct SpecError(String);

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid spec: {}", self.0)
    }
}

impl std::error::Error for SpecError {}

fn cmd_tsvd(a: TsvdArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Report {
        dims: [usize; 3],
        first_slice_diag: Vec<f64>,
        tubal_rank: usize,
        average_rank: f64,
        tnn: f64,
        reconstruction_error: f64,
    }
    let x = io::read_tensor_any(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let f = tsvd(&x)?;
    let (n1, n2, n3) = x.dims();
    let rep = Report {
        dims: [n1, n2, n3],
        first_slice_diag: f.first_slice_diag(),
        tubal_rank: tubal_rank(&x, a.tol)?,
        average_rank: average_rank(&x, a.tol)?.value(),
        tnn: tnn(&x)?,
        reconstruction_error: f.reconstruct()?.sub(&x)?.fro_norm(),
    };
    if let Some(prefix) = &a.factors {
        for (tag, t) in [("u", &f.u), ("s", &f.s), ("v", &f.v)] {
            let mut p = prefix.clone().into_os_string();
            p.push(format!(".{tag}.tns"));
            io::write_tensor(Path::new(&p), t)?;
        }
    }
    write_output(a.out.as_deref(), &json(&rep)?)
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let mut spec: SolveSpec = read_spec(&a.spec)?;
    let built = match &mut spec.instance {
        Instance::Synthetic(s) => {
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            s.build()?
        }
        Instance::Files { map, y, x_true } => Built {
            map: io::read_map(map)?,
            y: io::read_vector(y)?,
            x_true: x_true.as_deref().map(io::read_tensor_any).transpose()?,
            noise_norm: None,
        },
    };
    let config = spec.solver.config(spec.lambda);
    let result = admm_solve(&built.map, &built.y, &config)?;
    if let Some(p) = &a.x_out {
        io::write_tensor(p, &result.x_hat)?;
    }
    let snr = built.x_true.as_ref().map(|x| snr_db(x, &result.x_hat)).transpose()?;
    let (n1, n2, n3) = built.map.dims();
    let rep = SolveReport {
        dims: [n1, n2, n3],
        m: built.map.m(),
        lambda: spec.lambda,
        snr_db: snr,
        noise_norm: built.noise_norm,
        result,
    };
    write_output(a.out.as_deref(), &json(&rep)?)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut spec = match (&a.spec, a.case.as_deref()) {
        (Some(p), _) => read_spec::<ExperimentSpec>(p)?,
        (None, Some("case1")) => ExperimentSpec::case1(),
        (None, Some("case2")) => ExperimentSpec::case2(),
        (None, Some("case3")) => ExperimentSpec::case3(),
        _ => unreachable!("clap enforces one of --spec or --case"),
    };
    if let Some(seed) = a.seed {
        spec.base_seed = seed;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    let opts = RunOptions {
        workers: a.workers,
        timing: a.timing,
    };
    let result = experiment::run_experiment(&spec, opts)?;
    let text = match a.common.format {
        OutFormat::Csv => experiment::to_csv(&result),
        OutFormat::Json => experiment::to_json(&result)?,
    };
    write_output(a.common.out.as_deref(), &text)
}

fn cmd_rip(a: RipArgs) -> Result<()> {
    let mut spec: RipSpec = read_spec(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let table: RipTable = experiment::run_rip_campaign(&spec.map, &spec.ranks, spec.trials, spec.seed, spec.t)?;
    let text = match a.common.format {
        OutFormat::Csv => experiment::rip_to_csv(&table),
        OutFormat::Json => json(&table)?,
    };
    write_output(a.common.out.as_deref(), &text)
}

fn cmd_bounds(a: BoundsArgs) -> Result<()> {
    let spec: BoundsSpec = read_spec(&a.spec)?;
    let text = match spec {
        BoundsSpec::Constants {
            delta,
            t,
            r,
            n3,
            lambda,
            epsilon,
        } => {
            let corollary = analysis::corollary_constants(delta, t, r, n3, lambda)?;
            let theorem = epsilon
                .map(|e| analysis::theorem1_constants(delta, t, r, n3, lambda, e))
                .transpose()?;
            let (eta1, eta2) = analysis::eta_constants(delta, t, n3)?;
            json(&ConstantsReport {
                delta,
                t,
                r,
                n3,
                lambda,
                threshold: analysis::ric_threshold(t, n3)?,
                eta1,
                eta2,
                epsilon,
                theorem: theorem.map(|(a, b, c, d)| [a, b, c, d]),
                corollary: [corollary.0, corollary.1, corollary.2, corollary.3],
            })?
        }
        BoundsSpec::Verify {
            n,
            n3,
            r,
            m,
            sigma,
            lambda,
            seed,
            t_grid,
            ric_trials,
        } => {
            let seed = a.seed.unwrap_or(seed);
            let inst = Synthetic {
                n1: n,
                n2: n,
                n3,
                r,
                m,
                sigma,
                seed,
                variance_mode: VarianceMode::OneOverM,
            }
            .build()?;
            let x_true = inst.x_true.expect("synthetic instances carry the ground truth");
            let epsilon = inst.noise_norm.unwrap_or(0.0);
            let res = admm_solve(&inst.map, &inst.y, &tubal_core::SolverConfig::new(lambda))?;
            let sweep = sweep_bounds(
                &x_true, &res.x_hat, &inst.map, &inst.y, r, &t_grid, ric_trials, seed, lambda, epsilon,
            )?;
            json(&VerifyReport {
                lambda,
                epsilon,
                snr_db: snr_db(&x_true, &res.x_hat)?,
                tightest: tightest(&sweep).cloned(),
                sweep,
            })?
        }
    };
    write_output(a.out.as_deref(), &text)
}

/// 2 for invalid specifications, 3 for numerical failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SpecError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<TubalError>() {
            return match e {
                TubalError::InvalidDims(_)
                | TubalError::DimMismatch(_)
                | TubalError::InvalidArgument(_)
                | TubalError::ConditionFailure(_)
                | TubalError::Format(_)
                | TubalError::Json(_) => 2,
                TubalError::NonFinite(_) | TubalError::SymmetryViolation { .. } | TubalError::Numerical(_) => 3,
                TubalError::Io(_) => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Tsvd(a) => cmd_tsvd(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Rip(a) => cmd_rip(a),
        Command::Bounds(a) => cmd_bounds(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
