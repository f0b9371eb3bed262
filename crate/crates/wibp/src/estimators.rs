//! Norming sequences, growth limits, and plug-in estimators.
//!
//! For beta in [0, 1) the dish count grows like L_n ~ lambda a_n with
//!
//! ```text
//!     a_n = n^beta (beta > 0),  log n (beta = 0),
//!     lambda = alpha G(c+1) / (G(c+beta) beta r^(1-beta))   (beta > 0),
//!     lambda = alpha c / r                                  (beta = 0),
//! ```
//!
//! where r = E(R). The growth exponent estimator is beta-hat = log L_n /
//! log n. The per-customer average K-bar_n is asymptotically normal around
//! the predictive mean with spread estimated by
//!
//! ```text
//!     sigma^2 = (2 q-hat / r-hat^2 - 1) (sum K_i^2 / n - K-bar^2),
//!     tau^2   = (q-hat / r-hat^2 - 1) (sum K_i^2 / n - K-bar^2),
//! ```
//!
//! with q-hat = sum R_i^2 / n and r-hat = W_n / n; tau^2 vanishes exactly
//! for constant weights.

use crate::model::ModelParams;
use crate::numerics::{ln_dd, log_gamma_dd_z, normal_quantile, Dd};
use crate::stats::StatRow;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("norming sequence requires beta in [0, 1); got {0}")]
    BetaOutOfRange(f64),
    #[error("norming sequence requires n >= 2; got {0}")]
    HorizonTooSmall(u64),
    #[error("confidence level must lie in (0, 1); got {0}")]
    Level(f64),
    #[error("sigma_hat must be nonnegative and finite; got {0}")]
    SigmaHat(f64),
}

/// Norming sequence a_n: n^beta for beta in (0, 1), log n at beta = 0.
pub fn a_n(beta: f64, n: u64) -> Result<f64, EstimatorError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(EstimatorError::BetaOutOfRange(beta));
    }
    if n < 2 {
        return Err(EstimatorError::HorizonTooSmall(n));
    }
    let nf = n as f64;
    Ok(if beta == 0.0 { nf.ln() } else { nf.powf(beta) })
}

/// Limit of L_n / a_n for beta in [0, 1), with r = E(R).
pub fn lambda_limit(params: &ModelParams) -> Result<f64, EstimatorError> {
    let beta = params.beta;
    if !(0.0..1.0).contains(&beta) {
        return Err(EstimatorError::BetaOutOfRange(beta));
    }
    let r = params.weights.mean();
    if beta == 0.0 {
        return Ok(params.alpha * params.c / r);
    }
    let c = Dd::from_f64(params.c);
    let s = ln_dd(params.alpha)
        .add(log_gamma_dd_z(c.add_f64(1.0)))
        .sub(log_gamma_dd_z(c.add_f64(beta)))
        .sub(ln_dd(beta))
        .sub(ln_dd(r).mul_f64(1.0 - beta));
    Ok(s.hi.exp() * (1.0 + s.lo))
}

/// Growth exponent estimator log L_n / log n. Absent when no dish has been
/// created yet or the horizon is too short for the ratio to be defined.
pub fn beta_hat(l_n: u64, n: u64) -> Option<f64> {
    if l_n == 0 || n < 2 {
        return None;
    }
    Some((l_n as f64).ln() / (n as f64).ln())
}

/// Predictive-interval spread estimate. `weight_moments` is
/// (sum R_i^2, W_n/n) and `k_moments` is (sum K_i^2, K-bar_n).
pub fn sigma_hat_sq(weight_moments: (f64, f64), k_moments: (f64, f64), n: u64) -> f64 {
    let (sum_r_sq, r_bar) = weight_moments;
    let (sum_k_sq, kbar) = k_moments;
    let nf = n as f64;
    let first = (2.0 * sum_r_sq / nf) / (r_bar * r_bar) - 1.0;
    let second = (sum_k_sq / nf - kbar * kbar).max(0.0);
    first * second
}

/// Centered-average spread estimate; the first factor vanishes for constant
/// weights, so anything inside the summation rounding floor is snapped to
/// exact zero.
pub fn tau_hat_sq(weight_moments: (f64, f64), k_moments: (f64, f64), n: u64) -> f64 {
    let (sum_r_sq, r_bar) = weight_moments;
    let (sum_k_sq, kbar) = k_moments;
    let nf = n as f64;
    let mut first = (sum_r_sq / nf) / (r_bar * r_bar) - 1.0;
    if first.abs() < 1e-12 {
        first = 0.0;
    }
    let second = (sum_k_sq / nf - kbar * kbar).max(0.0);
    (first * second).max(0.0)
}

/// Two-sided normal interval K-bar +- z_(1-(1-level)/2) sigma_hat / sqrt(n).
/// Degenerate (a point) when sigma_hat = 0.
pub fn confidence_interval(
    kbar: f64,
    sigma_hat: f64,
    n: u64,
    level: f64,
) -> Result<(f64, f64), EstimatorError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimatorError::Level(level));
    }
    if !sigma_hat.is_finite() || sigma_hat < 0.0 {
        return Err(EstimatorError::SigmaHat(sigma_hat));
    }
    if n < 1 {
        return Err(EstimatorError::HorizonTooSmall(n));
    }
    let hw = normal_quantile(1.0 - (1.0 - level) / 2.0) * sigma_hat / (n as f64).sqrt();
    Ok((kbar - hw, kbar + hw))
}

/// Point estimates and interval from one trajectory checkpoint.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub n: u64,
    pub kbar: f64,
    /// log L_n / log n; absent when undefined.
    pub beta_hat: Option<f64>,
    /// L_n / a_n at the configured beta; absent outside beta in [0, 1).
    pub lambda_hat: Option<f64>,
    pub sigma_hat_sq: f64,
    pub tau_hat_sq: f64,
    pub ci_level: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Builds the estimate report for a recorded checkpoint.
pub fn estimate_report(
    row: &StatRow,
    params: &ModelParams,
    level: f64,
) -> Result<EstimateReport, EstimatorError> {
    let n = row.n;
    let nf = n as f64;
    let weight_moments = (row.sum_r_sq, row.w / nf);
    let k_moments = (row.sum_k_sq, row.kbar);
    let s_sq = sigma_hat_sq(weight_moments, k_moments, n);
    let t_sq = tau_hat_sq(weight_moments, k_moments, n);
    let (ci_lo, ci_hi) = confidence_interval(row.kbar, s_sq.sqrt(), n, level)?;
    let lambda_hat = a_n(params.beta, n).ok().map(|a| row.l as f64 / a);
    Ok(EstimateReport {
        n,
        kbar: row.kbar,
        beta_hat: beta_hat(row.l, n),
        lambda_hat,
        sigma_hat_sq: s_sq,
        tau_hat_sq: t_sq,
        ci_level: level,
        ci_lo,
        ci_hi,
    })
}
