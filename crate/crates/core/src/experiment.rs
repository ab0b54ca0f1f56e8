//! Seeded synthetic recovery sweeps and isometry campaigns.
//!
//! A sweep solves, for every trial and every `(sigma, lambda)` cell, one
//! instance `y = M vec(X) + w` with a Gaussian map and a random tubal-rank-`r`
//! ground truth. Per trial, the map, the ground truth and the standard normal
//! noise direction are derived from `(base_seed, case_name, trial)` only and
//! shared by every cell, so differences between cells reflect `sigma` and
//! `lambda` alone.

use std::time::Instant;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::tprod;
use crate::analysis::{estimate_ric, ric_threshold, RipEstimate};
use crate::error::{Result, TubalError};
use crate::measurement::{add_noise, snr_db, GaussianLinearMap, VarianceMode};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::solver::{admm_solve_with, NormalEquations, SolverConfig};
use crate::tensor::{DenseTensor3, Dims};

/// Tubal rank of the ground truth, absolute or as a fraction of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSpec {
    Absolute(usize),
    /// Rounded to the nearest integer, at least 1.
    Fraction(f64),
}

impl RankSpec {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        match *self {
            RankSpec::Absolute(r) => Ok(r),
            RankSpec::Fraction(f) => {
                if !(f > 0.0) || !f.is_finite() {
                    return Err(TubalError::InvalidArgument(format!("rank fraction must be positive, got {f}")));
                }
                Ok(((f * n as f64).round() as usize).max(1))
            }
        }
    }
}

/// `m = round(factor * r * (2n + 1) * n3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRule {
    pub factor: f64,
}

fn default_trials() -> usize {
    50
}

fn default_variance_mode() -> VarianceMode {
    VarianceMode::OneOverM
}

/// Configuration of a recovery sweep over `n x n x n3` tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub case_name: String,
    pub n: usize,
    pub n3: usize,
    pub r: RankSpec,
    pub sample_rule: SampleRule,
    pub sigma_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_variance_mode")]
    pub variance_mode: VarianceMode,
    /// Overrides for the ADMM hyperparameters other than `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOverrides>,
}

/// Optional replacements for the default ADMM hyperparameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub rho0: Option<f64>,
    pub rho_max: Option<f64>,
    pub vartheta: Option<f64>,
    pub varpi: Option<f64>,
    pub max_iters: Option<usize>,
}

impl SolverOverrides {
    pub fn config(&self, lambda: f64) -> SolverConfig {
        let mut c = SolverConfig::new(lambda);
        if let Some(v) = self.rho0 {
            c.rho0 = v;
        }
        if let Some(v) = self.rho_max {
            c.rho_max = v;
        }
        if let Some(v) = self.vartheta {
            c.vartheta = v;
        }
        if let Some(v) = self.varpi {
            c.varpi = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        c
    }
}

const TABLE_SIGMAS: [f64; 5] = [0.01, 0.03, 0.05, 0.07, 0.1];
const TABLE_LAMBDAS: [f64; 6] = [10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4];

impl ExperimentSpec {
    fn preset(case_name: &str, n: usize, factor: f64) -> Self {
        Self {
            case_name: case_name.into(),
            n,
            n3: 5,
            r: RankSpec::Fraction(0.1),
            sample_rule: SampleRule { factor },
            sigma_list: TABLE_SIGMAS.to_vec(),
            lambda_list: TABLE_LAMBDAS.to_vec(),
            trials: default_trials(),
            base_seed: 0,
            variance_mode: VarianceMode::OneOverM,
            solver: None,
        }
    }

    /// `n = 10, n3 = 5, r = 0.1 n`, `m = 2 r (2n+1) n3`.
    pub fn case1() -> Self {
        Self::preset("case1", 10, 2.0)
    }

    /// `n = 20, n3 = 5, r = 0.1 n`, `m = 1.5 r (2n+1) n3`.
    pub fn case2() -> Self {
        Self::preset("case2", 20, 1.5)
    }

    /// `n = 30, n3 = 5, r = 0.1 n`, `m = 1.5 r (2n+1) n3`.
    pub fn case3() -> Self {
        Self::preset("case3", 30, 1.5)
    }

    pub fn rank(&self) -> Result<usize> {
        self.r.resolve(self.n)
    }

    pub fn sample_count(&self) -> Result<usize> {
        let r = self.rank()?;
        Ok((self.sample_rule.factor * r as f64 * (2 * self.n + 1) as f64 * self.n3 as f64).round() as usize)
    }

    pub fn dims(&self) -> Dims {
        (self.n, self.n, self.n3)
    }

    pub fn solver_config(&self, lambda: f64) -> SolverConfig {
        self.solver.unwrap_or_default().config(lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TubalError::InvalidArgument(msg));
        if self.n == 0 || self.n3 == 0 {
            return bad("n and n3 must be >= 1".into());
        }
        let r = self.rank()?;
        if r == 0 || r > self.n {
            return bad(format!("rank {r} must lie in 1..={}", self.n));
        }
        if !(self.sample_rule.factor > 0.0) || !self.sample_rule.factor.is_finite() {
            return bad(format!("sample factor must be positive, got {}", self.sample_rule.factor));
        }
        if self.sample_count()? == 0 {
            return bad("sample rule yields zero measurements".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if let Some(s) = self.sigma_list.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return bad(format!("noise levels must be finite and >= 0, got {s}"));
        }
        if let Some(l) = self.lambda_list.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return bad(format!("lambda values must be finite and > 0, got {l}"));
        }
        for &l in &self.lambda_list {
            self.solver_config(l).validate()?;
        }
        Ok(())
    }
}

/// `X1 * X2` with i.i.d. standard normal `X1` (`n1 x r x n3`) and `X2`
/// (`r x n2 x n3`), drawn from the data stream of `seed`.
pub fn generate_lowrank(n1: usize, n2: usize, n3: usize, r: usize, seed: u64) -> Result<DenseTensor3> {
    if r == 0 || r > n1.min(n2) {
        return Err(TubalError::InvalidArgument(format!(
            "rank {r} must lie in 1..={}",
            n1.min(n2)
        )));
    }
    let mut rng = stream_rng(seed, Stream::Data);
    let x1 = DenseTensor3::from_fn((n1, r, n3), |_, _, _| StandardNormal.sample(&mut rng))?;
    let x2 = DenseTensor3::from_fn((r, n2, n3), |_, _, _| StandardNormal.sample(&mut rng))?;
    tprod(&x1, &x2)
}

/// Seeds of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub map: u64,
    pub data: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn derive(base_seed: u64, case_name: &str, trial: usize) -> Self {
        let d = |tag: &str| derive_seed(base_seed, case_name, &[trial as u64], tag);
        Self {
            map: d("map"),
            data: d("data"),
            noise: d("noise"),
        }
    }
}

/// Aggregate of one `(sigma, lambda)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub sigma: f64,
    pub lambda: f64,
    pub mean_snr_db: Option<f64>,
    /// Sample standard deviation; `None` with fewer than two successes.
    pub std_snr_db: Option<f64>,
    /// Successful trials.
    pub trials: usize,
    pub failures: usize,
    /// Successful trials that hit the iteration cap.
    pub not_converged: usize,
    pub mean_iterations: Option<f64>,
    /// Mean solve time in seconds, when timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_wall_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

/// Provenance of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub spec: ExperimentSpec,
    pub r: usize,
    pub m: usize,
    pub seed_derivation: String,
    pub library_version: String,
    /// Seconds since the Unix epoch, when timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_wall_time_s: Option<f64>,
}

/// Sweep output. `cells[i][j]` belongs to `lambda_list[i]` and `sigma_list[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: ExperimentMetadata,
    pub sigma_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    pub cells: Vec<Vec<CellResult>>,
}

impl ExperimentResult {
    pub fn cell(&self, lambda_idx: usize, sigma_idx: usize) -> &CellResult {
        &self.cells[lambda_idx][sigma_idx]
    }

    /// Mean SNR table, `NaN` where no trial succeeded.
    pub fn snr_table(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.mean_snr_db.unwrap_or(f64::NAN)).collect())
            .collect()
    }
}

/// Execution options that do not affect the numbers produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Record wall times and a timestamp (makes the output nondeterministic).
    pub timing: bool,
}

#[derive(Clone, Debug)]
enum Outcome {
    Solved { snr: f64, iterations: usize, converged: bool, secs: f64 },
    Failed(String),
}

/// All cells of one trial, indexed `[lambda][sigma]`.
fn run_trial(spec: &ExperimentSpec, r: usize, m: usize, trial: usize) -> Vec<Vec<Outcome>> {
    let nl = spec.lambda_list.len();
    let ns = spec.sigma_list.len();
    let fail_all = |msg: String| vec![vec![Outcome::Failed(msg); ns]; nl];

    let seeds = TrialSeeds::derive(spec.base_seed, &spec.case_name, trial);
    let setup = (|| -> Result<_> {
        let map = GaussianLinearMap::gaussian(m, spec.dims(), seeds.map, spec.variance_mode)?;
        let normal = NormalEquations::new(&map)?;
        let x = generate_lowrank(spec.n, spec.n, spec.n3, r, seeds.data)?;
        let y_clean = map.apply(&x)?;
        Ok((map, normal, x, y_clean))
    })();
    let (map, normal, x, y_clean) = match setup {
        Ok(s) => s,
        Err(e) => return fail_all(format!("trial {trial}: {e}")),
    };

    let noisy: Vec<Result<DVector<f64>>> = spec
        .sigma_list
        .iter()
        .map(|&s| add_noise(&y_clean, s, seeds.noise).map(|n| n.y))
        .collect();

    spec.lambda_list
        .iter()
        .map(|&lambda| {
            let config = spec.solver_config(lambda);
            noisy
                .iter()
                .map(|y| {
                    let y = match y {
                        Ok(y) => y,
                        Err(e) => return Outcome::Failed(format!("trial {trial}: {e}")),
                    };
                    let start = Instant::now();
                    match admm_solve_with(&map, &normal, y, &config).and_then(|res| {
                        let snr = snr_db(&x, &res.x_hat)?;
                        Ok((snr, res.iterations, res.converged))
                    }) {
                        Ok((snr, iterations, converged)) => Outcome::Solved {
                            snr,
                            iterations,
                            converged,
                            secs: start.elapsed().as_secs_f64(),
                        },
                        Err(e) => Outcome::Failed(format!("trial {trial}: {e}")),
                    }
                })
                .collect()
        })
        .collect()
}

fn aggregate(sigma: f64, lambda: f64, outcomes: &[&Outcome], timing: bool) -> CellResult {
    let mut snrs = Vec::new();
    let mut iters = 0usize;
    let mut secs = 0.0;
    let mut not_converged = 0;
    let mut failures = 0;
    let mut first_failure = None;
    for o in outcomes {
        match o {
            Outcome::Solved {
                snr,
                iterations,
                converged,
                secs: s,
            } => {
                snrs.push(*snr);
                iters += iterations;
                secs += s;
                if !converged {
                    not_converged += 1;
                }
            }
            Outcome::Failed(msg) => {
                failures += 1;
                first_failure.get_or_insert_with(|| msg.clone());
            }
        }
    }
    let n = snrs.len();
    let mean = (n > 0).then(|| snrs.iter().sum::<f64>() / n as f64);
    let std = mean.filter(|_| n > 1).map(|mu| {
        (snrs.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    CellResult {
        sigma,
        lambda,
        mean_snr_db: mean,
        std_snr_db: std,
        trials: n,
        failures,
        not_converged,
        mean_iterations: (n > 0).then(|| iters as f64 / n as f64),
        mean_wall_time_s: (timing && n > 0).then(|| secs / n as f64),
        first_failure,
    }
}

/// Runs every trial of `spec` and aggregates per cell in trial order, so the
/// numbers do not depend on scheduling or on the number of workers.
pub fn run_experiment(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExperimentResult> {
    spec.validate()?;
    let r = spec.rank()?;
    let m = spec.sample_count()?;
    let start = Instant::now();

    let work = || -> Vec<Vec<Vec<Outcome>>> {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, r, m, t))
            .collect()
    };
    let per_trial = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| TubalError::InvalidArgument(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let cells = spec
        .lambda_list
        .iter()
        .enumerate()
        .map(|(li, &lambda)| {
            spec.sigma_list
                .iter()
                .enumerate()
                .map(|(si, &sigma)| {
                    let outcomes: Vec<&Outcome> = per_trial.iter().map(|t| &t[li][si]).collect();
                    aggregate(sigma, lambda, &outcomes, opts.timing)
                })
                .collect()
        })
        .collect();

    let timestamp = opts.timing.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    Ok(ExperimentResult {
        metadata: ExperimentMetadata {
            spec: spec.clone(),
            r,
            m,
            seed_derivation: "sha256(base_seed, case_name, [trial], tag) with tag in {map, data, noise}; \
                              shared by all (sigma, lambda) cells of a trial"
                .into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
            total_wall_time_s: opts.timing.then(|| start.elapsed().as_secs_f64()),
        },
        sigma_list: spec.sigma_list.clone(),
        lambda_list: spec.lambda_list.clone(),
        cells,
    })
}

/// Output format of [`emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Table layout: one row per `lambda`, one column per `sigma`, mean SNR in dB
/// with four decimals.
pub fn to_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("lambda");
    for s in &result.sigma_list {
        out.push_str(&format!(",sigma={s}"));
    }
    out.push('\n');
    if result.sigma_list.is_empty() {
        return out;
    }
    for (lambda, row) in result.lambda_list.iter().zip(&result.cells) {
        out.push_str(&lambda.to_string());
        for c in row {
            match c.mean_snr_db {
                Some(v) => out.push_str(&format!(",{v:.4}")),
                None => out.push_str(",NaN"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn to_json(result: &ExperimentResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

/// Writes `result` to `path`.
pub fn emit(result: &ExperimentResult, format: Format, path: &std::path::Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(result),
        Format::Json => to_json(result)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Map used by an isometry campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MapSpec {
    Gaussian {
        m: usize,
        dims: [usize; 3],
        seed: u64,
        #[serde(default = "default_variance_mode")]
        variance_mode: VarianceMode,
    },
    ScaledIdentity {
        dims: [usize; 3],
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MapSpec {
    pub fn build(&self) -> Result<GaussianLinearMap> {
        match *self {
            MapSpec::Gaussian {
                m,
                dims: [a, b, c],
                seed,
                variance_mode,
            } => GaussianLinearMap::gaussian(m, (a, b, c), seed, variance_mode),
            MapSpec::ScaledIdentity { dims: [a, b, c], scale } => {
                GaussianLinearMap::scaled_identity((a, b, c), scale)
            }
        }
    }
}

/// One row of an isometry campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipRow {
    pub estimate: RipEstimate,
    /// Threshold at the campaign's `t` and the map's `n3`.
    pub threshold: f64,
    pub satisfied: bool,
}

/// Estimates for every rank in `rank_list`, all drawn from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipTable {
    pub map: MapSpec,
    pub t: f64,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<RipRow>,
}

pub fn run_rip_campaign(map_spec: &MapSpec, rank_list: &[usize], trials: usize, seed: u64, t: f64) -> Result<RipTable> {
    let map = map_spec.build()?;
    let threshold = ric_threshold(t, map.dims().2)?;
    let rows = rank_list
        .iter()
        .map(|&r| {
            let estimate = estimate_ric(&map, r, trials, seed)?;
            Ok(RipRow {
                satisfied: estimate.delta_hat < threshold,
                estimate,
                threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RipTable {
        map: map_spec.clone(),
        t,
        trials,
        seed,
        rows,
    })
}

/// Columns `r,trials,delta_hat,threshold,satisfied`.
pub fn rip_to_csv(table: &RipTable) -> String {
    let mut out = String::from("r,trials,delta_hat,threshold,satisfied\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{:e},{:e},{}\n",
            row.estimate.r, row.estimate.trials, row.estimate.delta_hat, row.threshold, row.satisfied
        ));
    }
    out
}
