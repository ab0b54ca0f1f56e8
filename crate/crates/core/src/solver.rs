//! ADMM for regularized tensor nuclear norm minimization
//!
//! ```text
//! min_X ||X||_* + 1/(2 lambda) ||y - M vec(X)||_2^2
//! ```
//!
//! split as `X = Z` with augmented Lagrangian
//! `lambda ||X||_* + 1/2 ||y - M vec(Z)||^2 + <K, X - Z> + rho/2 ||X - Z||_F^2`.
//! Each iteration runs a t-SVT step for `X`, a regularized normal-equation
//! solve for `Z`, a dual ascent step for `K`, and grows `rho` geometrically up
//! to a cap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TubalError};
use crate::measurement::GaussianLinearMap;
use crate::rng::{stream_rng, Stream};
use crate::tensor::DenseTensor3;
use crate::tsvd::{multiplicity, tnn, FourierSvd};

/// ADMM hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Regularization weight `lambda > 0`.
    pub lambda: f64,
    /// Initial penalty.
    pub rho0: f64,
    /// Penalty cap.
    pub rho_max: f64,
    /// Penalty growth factor, `> 1`.
    pub vartheta: f64,
    /// Stopping tolerance on the three infinity-norm gaps.
    pub varpi: f64,
    pub max_iters: usize,
}

impl SolverConfig {
    pub const DEFAULT_RHO0: f64 = 1e-4;
    pub const DEFAULT_RHO_MAX: f64 = 1e10;
    pub const DEFAULT_VARTHETA: f64 = 1.5;
    pub const DEFAULT_VARPI: f64 = 1e-8;
    pub const DEFAULT_MAX_ITERS: usize = 500;

    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            rho0: Self::DEFAULT_RHO0,
            rho_max: Self::DEFAULT_RHO_MAX,
            vartheta: Self::DEFAULT_VARTHETA,
            varpi: Self::DEFAULT_VARPI,
            max_iters: Self::DEFAULT_MAX_ITERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TubalError::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("rho0", self.rho0)?;
        positive("rho_max", self.rho_max)?;
        positive("varpi", self.varpi)?;
        if !(self.vartheta > 1.0) || !self.vartheta.is_finite() {
            return Err(TubalError::InvalidArgument(format!(
                "vartheta must exceed 1, got {}",
                self.vartheta
            )));
        }
        if self.rho0 > self.rho_max {
            return Err(TubalError::InvalidArgument("rho0 exceeds rho_max".into()));
        }
        if self.max_iters == 0 {
            return Err(TubalError::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// ADMM iterates.
#[derive(Clone, Debug)]
pub struct AdmmState {
    pub x: DenseTensor3,
    pub z: DenseTensor3,
    pub k_mult: DenseTensor3,
    pub rho: f64,
    pub iter: usize,
}

/// Output of [`admm_solve`].
#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub x_hat: DenseTensor3,
    pub iterations: usize,
    pub converged: bool,
    /// Per iteration: `[||X+ - X||_inf, ||Z+ - Z||_inf, ||X+ - Z+||_inf]`.
    pub residual_history: Vec<[f64; 3]>,
    /// Per iteration: `||X+||_* + 1/(2 lambda) ||y - M vec(X+)||^2`.
    pub objective_history: Vec<f64>,
    pub final_rho: f64,
}

/// t-SVT with the nuclear norm of the result.
fn tsvt_with_norm(y: &DenseTensor3, tau: f64) -> Result<(DenseTensor3, f64)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(TubalError::InvalidArgument(format!("threshold must be positive, got {tau}")));
    }
    let n3 = y.n3();
    let fs = FourierSvd::of(y, true)?;
    let shrunk: f64 = fs
        .slices
        .iter()
        .enumerate()
        .map(|(k, s)| {
            multiplicity(k, n3) as f64 * s.sigma.iter().map(|v| (v - tau).max(0.0)).sum::<f64>()
        })
        .sum();
    let x = fs.recompose(|_, s| (s - tau).max(0.0))?;
    Ok((x, shrunk / n3 as f64))
}

/// Proximal operator of `tau ||.||_*`: soft-thresholds the singular values of
/// every Fourier slice by `tau`.
pub fn tsvt(y_tensor: &DenseTensor3, tau: f64) -> Result<DenseTensor3> {
    tsvt_with_norm(y_tensor, tau).map(|(x, _)| x)
}

/// Number of random perturbations tried by [`prox_optimality_check`].
pub const PROX_PERTURBATIONS: usize = 200;
/// Relative size of each perturbation.
pub const PROX_PERTURBATION_SCALE: f64 = 1e-3;

/// Largest decrease of `tau ||X||_* + 1/2 ||X - y||_F^2` found by moving
/// `x_out` along random directions of relative size `1e-3`; zero when no
/// perturbation improves the objective.
pub fn prox_optimality_check(
    y_tensor: &DenseTensor3,
    tau: f64,
    x_out: &DenseTensor3,
    seed: u64,
) -> Result<f64> {
    let objective = |x: &DenseTensor3| -> Result<f64> {
        let d = x.sub(y_tensor)?.fro_norm();
        Ok(tau * tnn(x)? + 0.5 * d * d)
    };
    let base = objective(x_out)?;
    let scale = {
        let s = x_out.fro_norm();
        if s > 0.0 {
            s
        } else {
            y_tensor.fro_norm().max(1.0)
        }
    };
    let mut rng = stream_rng(seed, Stream::Probe);
    let mut worst = 0.0f64;
    for _ in 0..PROX_PERTURBATIONS {
        let dir = DenseTensor3::from_fn(x_out.dims(), |_, _, _| StandardNormal.sample(&mut rng))?;
        let norm = dir.fro_norm();
        if norm == 0.0 {
            continue;
        }
        let step = PROX_PERTURBATION_SCALE * scale / norm;
        let decrease = base - objective(&x_out.axpy(step, &dir)?)?;
        worst = worst.max(decrease);
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
enum Factorization {
    /// `m < N`: eigenpairs of `M M^T`, with `W = Q^T M`.
    Woodbury { w: DMatrix<f64>, eig: Vec<f64> },
    /// `m >= N`: eigenpairs of `M^T M`.
    Direct { p: DMatrix<f64>, eig: Vec<f64> },
}

/// Solver for `(M^T M + rho I) z = b` valid for every `rho > 0`.
///
/// For `m < N` the Woodbury form
/// `(M^T M + rho I)^{-1} = (I - M^T (M M^T + rho I)^{-1} M) / rho`
/// is used with a single eigendecomposition of the `m x m` Gram matrix, so
/// nothing is refactored when `rho` changes.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    fact: Factorization,
}

impl NormalEquations {
    pub fn new(map: &GaussianLinearMap) -> Result<Self> {
        let m = map.matrix();
        let fact = if m.nrows() < m.ncols() {
            let gram = m * m.transpose();
            let se = SymmetricEigen::try_new(gram, f64::EPSILON, 100_000)
                .ok_or_else(|| TubalError::Numerical("Gram eigendecomposition failed".into()))?;
            let w = se.eigenvectors.transpose() * m;
            let eig = se.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            Factorization::Woodbury { w, eig }
        } else {
            let gram = m.transpose() * m;
            let se = SymmetricEigen::try_new(gram, f64::EPSILON, 100_000)
                .ok_or_else(|| TubalError::Numerical("normal-matrix eigendecomposition failed".into()))?;
            let eig = se.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            Factorization::Direct {
                p: se.eigenvectors,
                eig,
            }
        };
        Ok(Self { fact })
    }

    /// `(M^T M + rho I)^{-1} b`.
    pub fn solve(&self, b: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
        if !(rho > 0.0) {
            return Err(TubalError::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        let out = match &self.fact {
            Factorization::Woodbury { w, eig } => {
                let mut c = w * b;
                for (ci, e) in c.iter_mut().zip(eig) {
                    *ci /= e + rho;
                }
                (b - w.tr_mul(&c)) / rho
            }
            Factorization::Direct { p, eig } => {
                let mut c = p.tr_mul(b);
                for (ci, e) in c.iter_mut().zip(eig) {
                    *ci /= e + rho;
                }
                p * c
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(TubalError::Numerical("normal-equation solve produced non-finite values".into()));
        }
        Ok(out)
    }
}

fn z_update_with(
    normal: &NormalEquations,
    mty: &DVector<f64>,
    k_mult: &DenseTensor3,
    x_next: &DenseTensor3,
    rho: f64,
) -> Result<DenseTensor3> {
    let mut b = mty.clone();
    for ((bi, k), x) in b.iter_mut().zip(k_mult.as_slice()).zip(x_next.as_slice()) {
        *bi += k + rho * x;
    }
    let z = normal.solve(&b, rho)?;
    DenseTensor3::new(x_next.dims(), z.as_slice().to_vec())
}

/// `Z = reshape((M^T M + rho I)^{-1} (M^T y + vec(K) + rho vec(X)))`.
pub fn z_update(
    map: &GaussianLinearMap,
    y: &DVector<f64>,
    k_mult: &DenseTensor3,
    x_next: &DenseTensor3,
    rho: f64,
) -> Result<DenseTensor3> {
    if y.len() != map.m() {
        return Err(TubalError::DimMismatch(format!(
            "{} measurements for a map with m = {}",
            y.len(),
            map.m()
        )));
    }
    if k_mult.dims() != map.dims() || x_next.dims() != map.dims() {
        return Err(TubalError::DimMismatch("iterate dims differ from map dims".into()));
    }
    let normal = NormalEquations::new(map)?;
    z_update_with(&normal, &map.matrix().tr_mul(y), k_mult, x_next, rho)
}

/// Outcome of a single ADMM iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub gaps: [f64; 3],
    pub objective: f64,
    pub converged: bool,
}

/// The ADMM state machine.
pub struct AdmmSolver<'a> {
    map: &'a GaussianLinearMap,
    normal: &'a NormalEquations,
    y: DVector<f64>,
    mty: DVector<f64>,
    config: SolverConfig,
    state: AdmmState,
    last_prox: Option<(DenseTensor3, f64)>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(
        map: &'a GaussianLinearMap,
        normal: &'a NormalEquations,
        y: &DVector<f64>,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if y.len() != map.m() {
            return Err(TubalError::DimMismatch(format!(
                "{} measurements for a map with m = {}",
                y.len(),
                map.m()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TubalError::NonFinite("measurement vector".into()));
        }
        let zero = DenseTensor3::zeros(map.dims())?;
        Ok(Self {
            map,
            normal,
            y: y.clone(),
            mty: map.matrix().tr_mul(y),
            config,
            state: AdmmState {
                x: zero.clone(),
                z: zero.clone(),
                k_mult: zero,
                rho: config.rho0,
                iter: 0,
            },
            last_prox: None,
        })
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    /// Input and threshold of the most recent t-SVT step.
    pub fn last_prox(&self) -> Option<&(DenseTensor3, f64)> {
        self.last_prox.as_ref()
    }

    pub fn objective(&self, x: &DenseTensor3) -> Result<f64> {
        let nuclear = tnn(x)?;
        let r = &self.y - self.map.apply(x)?;
        Ok(nuclear + r.norm_squared() / (2.0 * self.config.lambda))
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let SolverConfig {
            lambda,
            rho_max,
            vartheta,
            varpi,
            ..
        } = self.config;
        let st = &self.state;
        let rho = st.rho;

        let center = st.z.axpy(-1.0 / rho, &st.k_mult)?;
        let tau = lambda / rho;
        let (x_next, x_nuclear) = tsvt_with_norm(&center, tau)?;
        let z_next = z_update_with(self.normal, &self.mty, &st.k_mult, &x_next, rho)?;
        let k_next = st.k_mult.axpy(rho, &x_next.sub(&z_next)?)?;

        let gaps = [
            x_next.sub(&st.x)?.inf_norm(),
            z_next.sub(&st.z)?.inf_norm(),
            x_next.sub(&z_next)?.inf_norm(),
        ];
        let resid = &self.y - self.map.apply(&x_next)?;
        let objective = x_nuclear + resid.norm_squared() / (2.0 * lambda);

        if !(x_next.is_finite() && z_next.is_finite() && k_next.is_finite() && objective.is_finite()) {
            return Err(TubalError::NonFinite(format!(
                "ADMM iterate at iteration {} (rho = {rho:e})",
                st.iter + 1
            )));
        }

        self.last_prox = Some((center, tau));
        self.state = AdmmState {
            x: x_next,
            z: z_next,
            k_mult: k_next,
            rho: (vartheta * rho).min(rho_max),
            iter: st.iter + 1,
        };
        Ok(StepReport {
            gaps,
            objective,
            converged: gaps.iter().all(|&g| g <= varpi),
        })
    }

    /// Iterates until all three gaps are below `varpi` or `max_iters` is hit.
    pub fn run(mut self) -> Result<SolveResult> {
        let mut residual_history = Vec::new();
        let mut objective_history = Vec::new();
        let mut converged = false;
        while self.state.iter < self.config.max_iters {
            let rep = self.step()?;
            residual_history.push(rep.gaps);
            objective_history.push(rep.objective);
            if rep.converged {
                converged = true;
                break;
            }
        }
        Ok(SolveResult {
            iterations: self.state.iter,
            converged,
            residual_history,
            objective_history,
            final_rho: self.state.rho,
            x_hat: self.state.x,
        })
    }
}

/// Solves the regularized problem from zero initialization.
pub fn admm_solve(map: &GaussianLinearMap, y: &DVector<f64>, config: &SolverConfig) -> Result<SolveResult> {
    let normal = NormalEquations::new(map)?;
    admm_solve_with(map, &normal, y, config)
}

/// [`admm_solve`] with a precomputed normal-equation factorization, so one
/// map can be reused across many solves.
pub fn admm_solve_with(
    map: &GaussianLinearMap,
    normal: &NormalEquations,
    y: &DVector<f64>,
    config: &SolverConfig,
) -> Result<SolveResult> {
    AdmmSolver::new(map, normal, y, *config)?.run()
}
