//! Restricted isometry thresholds, error-bound constants and their empirical
//! counterparts.
//!
//! With `delta = delta_tr` the restricted isometry constant of order `t r`:
//!
//! ```text
//! threshold(t, n3) = sqrt((t - 1) / (n3^2 + t - 1))
//! eta1 = 2 / ((1 - delta) sqrt(1 + delta))
//! eta2 = sqrt(n3) delta / sqrt((1 - delta^2) (t - 1))
//! ```
//!
//! and for a minimizer `X̂` of the regularized problem with `||w||_2 <= eps`:
//!
//! ```text
//! ||M(X̂ - X)||_2 <= C1 ||X_-max(r)||_* + C2
//! ||X̂ - X||_F    <= C3 ||X_-max(r)||_* + C4
//! ```
//!
//! The `*_t` constants are the `eps = lambda / 2` specialisation, expressed
//! without the factor `lambda` in the additive terms.
//!
//! Empirical restricted isometry constants are Monte-Carlo maxima over random
//! low-rank directions. They are lower estimates of the true constant, which is
//! a supremum over the whole rank-constrained set.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::tprod;
use crate::error::{Result, TubalError};
use crate::measurement::GaussianLinearMap;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::tensor::DenseTensor3;
use crate::tsvd::{tnn, truncate};

/// Slack allowed when comparing the realized noise norm with `epsilon`.
const EPSILON_SLACK: f64 = 1e-12;

fn check_t(t: f64) -> Result<()> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(TubalError::InvalidArgument(format!("oversampling factor must exceed 1, got {t}")));
    }
    Ok(())
}

fn check_n3(n3: usize) -> Result<()> {
    if n3 == 0 {
        return Err(TubalError::InvalidArgument("n3 must be >= 1".into()));
    }
    Ok(())
}

fn check_r(r: usize) -> Result<()> {
    if r == 0 {
        return Err(TubalError::InvalidArgument("rank must be >= 1".into()));
    }
    Ok(())
}

/// Largest admissible `delta_tr`: `sqrt((t-1)/(n3^2+t-1))`.
pub fn ric_threshold(t: f64, n3: usize) -> Result<f64> {
    check_t(t)?;
    check_n3(n3)?;
    let n3 = n3 as f64;
    Ok(((t - 1.0) / (n3 * n3 + t - 1.0)).sqrt())
}

/// `(eta1, eta2)` for a given `delta`.
pub fn eta_constants(delta: f64, t: f64, n3: usize) -> Result<(f64, f64)> {
    check_t(t)?;
    check_n3(n3)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(TubalError::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
    }
    let eta1 = 2.0 / ((1.0 - delta) * (1.0 + delta).sqrt());
    let eta2 = (n3 as f64).sqrt() * delta / ((1.0 - delta * delta) * (t - 1.0)).sqrt();
    Ok((eta1, eta2))
}

/// Validates `delta < threshold(t, n3)` and returns `(eta1, eta2)`.
fn admissible_etas(delta: f64, t: f64, r: usize, n3: usize) -> Result<(f64, f64)> {
    check_r(r)?;
    let threshold = ric_threshold(t, n3)?;
    if !(delta < threshold) {
        return Err(TubalError::ConditionFailure(format!(
            "delta = {delta} is not below the threshold {threshold} for t = {t}, n3 = {n3}"
        )));
    }
    let (eta1, eta2) = eta_constants(delta, t, n3)?;
    if !(eta2 < 1.0) {
        return Err(TubalError::ConditionFailure(format!("eta2 = {eta2} is not below 1")));
    }
    Ok((eta1, eta2))
}

/// `(C1, C2, C3, C4)`.
pub fn theorem1_constants(
    delta: f64,
    t: f64,
    r: usize,
    n3: usize,
    lambda: f64,
    epsilon: f64,
) -> Result<(f64, f64, f64, f64)> {
    let (eta1, eta2) = admissible_etas(delta, t, r, n3)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(TubalError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(TubalError::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let sr = (r as f64).sqrt();
    let sn3 = (n3 as f64).sqrt();
    let snr = (n3 as f64 * r as f64).sqrt();
    let c1 = 2.0 / (sr * eta1);
    let c2 = 2.0 * sr * eta1 * lambda + 2.0 * epsilon;
    let c3 = (2.0 * sr * eta1 * (2.0 * snr + 1.0 + eta2) * lambda + 2.0 * (snr + eta2) * epsilon)
        / (r as f64 * eta1 * (1.0 - eta2) * lambda);
    let c4 = ((snr + 1.0) * eta1 * lambda + (snr - sn3 * eta2 + sn3 + 1.0) * epsilon) * c2
        / ((1.0 - eta2) * lambda);
    Ok((c1, c2, c3, c4))
}

/// `(C̃1, C̃2, C̃3, C̃4)` for `epsilon = lambda / 2`; the bounds read
/// `C̃1 ||X_-max(r)||_* + C̃2 lambda` and `C̃3 ||X_-max(r)||_* + C̃4 lambda`.
pub fn corollary_constants(delta: f64, t: f64, r: usize, n3: usize, lambda: f64) -> Result<(f64, f64, f64, f64)> {
    let (eta1, eta2) = admissible_etas(delta, t, r, n3)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(TubalError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let sr = (r as f64).sqrt();
    let sn3 = (n3 as f64).sqrt();
    let snr = (n3 as f64 * r as f64).sqrt();
    let c1 = 2.0 / (sr * eta1);
    let c2 = 2.0 * sr * eta1 + 1.0;
    let c3 = (2.0 * sr * eta1 * (2.0 * snr + 1.0 + eta2) + snr + eta2) / (r as f64 * eta1 * (1.0 - eta2));
    let c4 = (2.0 * (snr + 1.0) * eta1 + snr - sn3 * eta2 + sn3 + 1.0) * c2 / (2.0 * (1.0 - eta2));
    Ok((c1, c2, c3, c4))
}

/// Monte-Carlo estimate of the restricted isometry constant of one order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    /// Largest tubal rank probed.
    pub r: usize,
    /// Samples drawn per rank `1..=r`.
    pub trials: usize,
    /// Maximum of `distortion_samples`; an empirical lower estimate.
    pub delta_hat: f64,
    /// `| ||M(X)||^2 / ||X||_F^2 - 1 |`, ordered by rank then trial.
    pub distortion_samples: Vec<f64>,
}

/// Unit-norm random tensor `A * B` with Gaussian `A` (`n1 x q x n3`) and
/// `B` (`q x n2 x n3`).
fn random_rank_q(dims: crate::tensor::Dims, q: usize, seed: u64) -> Result<DenseTensor3> {
    let (n1, n2, n3) = dims;
    let mut rng = stream_rng(seed, Stream::Probe);
    let a = DenseTensor3::from_fn((n1, q, n3), |_, _, _| StandardNormal.sample(&mut rng))?;
    let b = DenseTensor3::from_fn((q, n2, n3), |_, _, _| StandardNormal.sample(&mut rng))?;
    let x = tprod(&a, &b)?;
    let norm = x.fro_norm();
    if norm == 0.0 {
        return Err(TubalError::Numerical("degenerate random probe".into()));
    }
    Ok(x.scale(1.0 / norm))
}

/// Estimates `delta_r` of `map` from `trials` random unit tensors of every
/// tubal rank `q <= r`.
///
/// The samples for rank `q` depend only on `(seed, q, trial)`, so the sample
/// set for `r` contains the one for `r - 1` and `delta_hat` is nondecreasing
/// in `r` for a fixed seed.
pub fn estimate_ric(map: &GaussianLinearMap, r: usize, trials: usize, seed: u64) -> Result<RipEstimate> {
    check_r(r)?;
    if trials == 0 {
        return Err(TubalError::InvalidArgument("trials must be >= 1".into()));
    }
    let dims = map.dims();
    let kappa = dims.0.min(dims.1);
    if r > kappa {
        return Err(TubalError::InvalidArgument(format!(
            "rank {r} exceeds min(n1, n2) = {kappa}"
        )));
    }
    let mut samples = Vec::with_capacity(r * trials);
    for q in 1..=r {
        for trial in 0..trials {
            let s = derive_seed(seed, "ric", &[q as u64, trial as u64], "probe");
            let x = random_rank_q(dims, q, s)?;
            let energy = map.apply(&x)?.norm_squared();
            samples.push((energy - 1.0).abs());
        }
    }
    let delta_hat = samples.iter().copied().fold(0.0, f64::max);
    Ok(RipEstimate {
        r,
        trials,
        delta_hat,
        distortion_samples: samples,
    })
}

/// Both sides of the two recovery bounds on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub t: f64,
    pub r: usize,
    pub n3: usize,
    pub delta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c1t: f64,
    pub c2t: f64,
    pub c3t: f64,
    pub c4t: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// `||X_-max(r)||_*`.
    pub tail_nuclear: f64,
    /// `||M(X̂ - X)||_2`.
    pub lhs_meas: f64,
    /// `C1 ||X_-max(r)||_* + C2`.
    pub rhs_meas: f64,
    /// `||X̂ - X||_F`.
    pub lhs_fro: f64,
    /// `C3 ||X_-max(r)||_* + C4`.
    pub rhs_fro: f64,
    /// `[measurement bound holds, Frobenius bound holds]`.
    pub satisfied: [bool; 2],
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|&s| s)
    }
}

/// Evaluates both bounds for `x_hat` against `x_true`.
///
/// `epsilon` must dominate the realized noise `||y - M vec(x_true)||_2`;
/// otherwise the instance does not meet the hypotheses and a condition
/// failure is returned.
#[allow(clippy::too_many_arguments)]
pub fn verify_bounds(
    x_true: &DenseTensor3,
    x_hat: &DenseTensor3,
    map: &GaussianLinearMap,
    y: &nalgebra::DVector<f64>,
    r: usize,
    t: f64,
    delta: f64,
    lambda: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    let n3 = x_true.n3();
    let (c1, c2, c3, c4) = theorem1_constants(delta, t, r, n3, lambda, epsilon)?;
    let (c1t, c2t, c3t, c4t) = corollary_constants(delta, t, r, n3, lambda)?;
    let (eta1, eta2) = eta_constants(delta, t, n3)?;

    let noise = (y - map.apply(x_true)?).norm();
    if noise > epsilon * (1.0 + EPSILON_SLACK) + EPSILON_SLACK {
        return Err(TubalError::ConditionFailure(format!(
            "realized noise norm {noise} exceeds epsilon = {epsilon}"
        )));
    }

    let (_, tail) = truncate(x_true, r)?;
    let tail_nuclear = tnn(&tail)?;
    let h = x_hat.sub(x_true)?;
    let lhs_meas = map.apply(&h)?.norm();
    let lhs_fro = h.fro_norm();
    let rhs_meas = c1 * tail_nuclear + c2;
    let rhs_fro = c3 * tail_nuclear + c4;
    Ok(BoundReport {
        t,
        r,
        n3,
        delta,
        eta1,
        eta2,
        c1,
        c2,
        c3,
        c4,
        c1t,
        c2t,
        c3t,
        c4t,
        lambda,
        epsilon,
        tail_nuclear,
        lhs_meas,
        rhs_meas,
        lhs_fro,
        rhs_fro,
        satisfied: [lhs_meas <= rhs_meas, lhs_fro <= rhs_fro],
    })
}

/// One grid point of [`sweep_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TSweepEntry {
    pub t: f64,
    /// Order `ceil(t r)` at which the isometry constant was estimated.
    pub order: usize,
    pub delta_hat: f64,
    pub threshold: f64,
    /// Present when `delta_hat < threshold`.
    pub report: Option<BoundReport>,
}

/// Estimates `delta_tr` for every `t` in `t_grid` (skipping orders above
/// `min(n1, n2)`) and evaluates the bounds wherever the estimate is below the
/// threshold.
#[allow(clippy::too_many_arguments)]
pub fn sweep_bounds(
    x_true: &DenseTensor3,
    x_hat: &DenseTensor3,
    map: &GaussianLinearMap,
    y: &nalgebra::DVector<f64>,
    r: usize,
    t_grid: &[f64],
    ric_trials: usize,
    ric_seed: u64,
    lambda: f64,
    epsilon: f64,
) -> Result<Vec<TSweepEntry>> {
    check_r(r)?;
    let kappa = x_true.n1().min(x_true.n2());
    let n3 = x_true.n3();
    let mut out = Vec::new();
    for &t in t_grid {
        let threshold = ric_threshold(t, n3)?;
        let order = (t * r as f64).ceil() as usize;
        if order > kappa {
            continue;
        }
        let est = estimate_ric(map, order, ric_trials, ric_seed)?;
        let report = if est.delta_hat < threshold {
            Some(verify_bounds(x_true, x_hat, map, y, r, t, est.delta_hat, lambda, epsilon)?)
        } else {
            None
        };
        out.push(TSweepEntry {
            t,
            order,
            delta_hat: est.delta_hat,
            threshold,
            report,
        });
    }
    Ok(out)
}

/// The satisfied report with the smallest Frobenius right-hand side.
pub fn tightest(entries: &[TSweepEntry]) -> Option<&BoundReport> {
    entries
        .iter()
        .filter_map(|e| e.report.as_ref())
        .filter(|r| r.all_satisfied())
        .min_by(|a, b| a.rhs_fro.total_cmp(&b.rhs_fro))
}
