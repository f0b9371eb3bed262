//! Replicated simulation engine and verification suites.
//!
//! Replicate i of a batch always runs on random stream i of the base seed,
//! so results are a pure function of (params, plan, base_seed, i): output
//! is byte-identical for any parallelism setting, and suites built on the
//! engine inherit that determinism.

pub mod gof;
pub mod suites;

use crate::estimators::{self, EstimatorError};
use crate::model::{validate_params, BuffetState, ModelError, ModelParams};
use crate::numerics::normal_cdf;
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use suites::{
    suite_cid_identity, suite_clt_kbar, suite_clt_ln, suite_finite_buffet, suite_poisson_oracle,
    suite_slln_ln, SuiteReport, Verdict,
};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("suite `{suite}` is inapplicable: {reason}")]
    Inapplicable { suite: &'static str, reason: String },
    #[error("goodness-of-fit: {0}")]
    Gof(#[from] gof::GofError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// What each replicate records: statistics at every horizon, plus an
/// optional longer proxy run whose K-bar stands in for the predictive mean.
#[derive(Clone, Debug)]
pub struct ReplicatePlan {
    horizons: Vec<u64>,
    /// Extend each replicate to `factor * last horizon` and record K-bar
    /// there as a proxy target for interval coverage.
    pub proxy_factor: Option<u64>,
    pub ci_level: f64,
}

impl ReplicatePlan {
    /// Single horizon, no proxy, 95% intervals.
    pub fn at(n: u64) -> Result<ReplicatePlan, ModelError> {
        ReplicatePlan::at_horizons(&[n])
    }

    /// Several horizons (deduplicated and sorted), no proxy, 95% intervals.
    pub fn at_horizons(horizons: &[u64]) -> Result<ReplicatePlan, ModelError> {
        let mut horizons: Vec<u64> = horizons.iter().copied().filter(|&h| h >= 1).collect();
        horizons.sort_unstable();
        horizons.dedup();
        if horizons.is_empty() {
            return Err(ModelError::HorizonZero);
        }
        Ok(ReplicatePlan {
            horizons,
            proxy_factor: None,
            ci_level: 0.95,
        })
    }

    pub fn with_proxy_factor(mut self, factor: u64) -> ReplicatePlan {
        self.proxy_factor = Some(factor.max(2));
        self
    }

    pub fn horizons(&self) -> &[u64] {
        &self.horizons
    }

    /// The last (largest) horizon.
    pub fn final_horizon(&self) -> u64 {
        *self.horizons.last().expect("plan has at least one horizon")
    }
}

/// Per-horizon snapshot inside one replicate.
#[derive(Clone, Debug, Serialize)]
pub struct HorizonStat {
    pub n: u64,
    pub l: u64,
    pub l_b: u64,
    pub kbar: f64,
    pub z: f64,
    pub v: f64,
    pub sigma_hat_sq: f64,
    pub tau_hat_sq: f64,
}

/// One replicate: its stream and the snapshots the plan asked for.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateRow {
    pub stream_id: u64,
    pub at: Vec<HorizonStat>,
    pub proxy_n: Option<u64>,
    pub kbar_proxy: Option<f64>,
}

fn snapshot(state: &BuffetState, params: &ModelParams) -> HorizonStat {
    let n = state.n();
    let nf = n as f64;
    let kbar = state.kbar();
    let z = stats::z_of(state, params);
    let weight_moments = (state.sum_r_sq(), state.w() / nf);
    let k_moments = (state.sum_k_sq(), kbar);
    HorizonStat {
        n,
        l: state.l(),
        l_b: match &params.subset {
            Some(subset) => stats::l_of_b(state, subset),
            None => state.l(),
        },
        kbar,
        z,
        v: kbar - z,
        sigma_hat_sq: estimators::sigma_hat_sq(weight_moments, k_moments, n),
        tau_hat_sq: estimators::tau_hat_sq(weight_moments, k_moments, n),
    }
}

fn replicate_row(
    params: &ModelParams,
    plan: &ReplicatePlan,
    base_seed: u64,
    stream_id: u64,
) -> Result<ReplicateRow, ModelError> {
    let mut state = BuffetState::new(params, base_seed, stream_id)?;
    let mut at = Vec::with_capacity(plan.horizons.len());
    for &h in &plan.horizons {
        while state.n() < h {
            state.advance(params)?;
        }
        at.push(snapshot(&state, params));
    }
    let (proxy_n, kbar_proxy) = match plan.proxy_factor {
        Some(factor) => {
            let target = plan.final_horizon() * factor;
            while state.n() < target {
                state.advance(params)?;
            }
            (Some(target), Some(state.kbar()))
        }
        None => (None, None),
    };
    Ok(ReplicateRow {
        stream_id,
        at,
        proxy_n,
        kbar_proxy,
    })
}

/// Runs `reps` independent replicates of the plan, replicate i on stream i.
/// `parallelism` of None uses the default thread pool; Some(k) pins k
/// threads. The output never depends on the choice.
pub fn run_rows(
    params: &ModelParams,
    plan: &ReplicatePlan,
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<Vec<ReplicateRow>, SuiteError> {
    validate_params(params)?;
    let task = |i: u64| replicate_row(params, plan, base_seed, i);
    let results: Vec<Result<ReplicateRow, ModelError>> = match parallelism {
        Some(1) => (0..reps).map(task).collect(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| SuiteError::ThreadPool(e.to_string()))?
            .install(|| (0..reps).into_par_iter().map(task).collect()),
        None => (0..reps).into_par_iter().map(task).collect(),
    };
    let rows: Result<Vec<ReplicateRow>, ModelError> = results.into_iter().collect();
    Ok(rows?)
}

/// Summary of one replicate at the final horizon.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateSample {
    pub stream_id: u64,
    pub n: u64,
    pub l: u64,
    pub l_b: u64,
    pub kbar: f64,
    /// sqrt(a_n) (L_n / a_n - lambda); absent outside beta in [0, 1).
    pub ln_scaled: Option<f64>,
    /// sqrt(n) V_n.
    pub vn_scaled: f64,
    /// sqrt(n) V_n / tau_hat; absent when tau_hat = 0.
    pub vn_studentized: Option<f64>,
    pub sigma_hat_sq: f64,
    pub tau_hat_sq: f64,
    /// K-bar at the proxy horizon, when the plan ran one.
    pub z_proxy: Option<f64>,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Whether [ci_lo, ci_hi] covers z_proxy, when the plan ran one.
    pub covered: Option<bool>,
}

/// Runs replicates and summarizes each at the plan's final horizon.
pub fn run_replicates_with(
    params: &ModelParams,
    plan: &ReplicatePlan,
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<Vec<ReplicateSample>, SuiteError> {
    let n = plan.final_horizon();
    // The scaling pieces exist only in the growth-law regime.
    let scaling = match (estimators::lambda_limit(params), estimators::a_n(params.beta, n)) {
        (Ok(lam), Ok(a)) => Some((lam, a)),
        _ => None,
    };
    let rows = run_rows(params, plan, reps, base_seed, parallelism)?;
    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        let stat = row.at.last().expect("plan records at least one horizon");
        let nf = stat.n as f64;
        let ln_scaled =
            scaling.map(|(lam, a)| a.sqrt() * (stat.l as f64 / a - lam));
        let tau = stat.tau_hat_sq.sqrt();
        let vn_scaled = nf.sqrt() * stat.v;
        let vn_studentized = if tau > 0.0 {
            Some(vn_scaled / tau)
        } else {
            None
        };
        let (ci_lo, ci_hi) = estimators::confidence_interval(
            stat.kbar,
            stat.sigma_hat_sq.sqrt(),
            stat.n,
            plan.ci_level,
        )?;
        let covered = row
            .kbar_proxy
            .map(|zp| ci_lo <= zp && zp <= ci_hi);
        samples.push(ReplicateSample {
            stream_id: row.stream_id,
            n: stat.n,
            l: stat.l,
            l_b: stat.l_b,
            kbar: stat.kbar,
            ln_scaled,
            vn_scaled,
            vn_studentized,
            sigma_hat_sq: stat.sigma_hat_sq,
            tau_hat_sq: stat.tau_hat_sq,
            z_proxy: row.kbar_proxy,
            ci_lo,
            ci_hi,
            covered,
        });
    }
    Ok(samples)
}

/// Runs `reps` replicates to horizon n, replicate i on stream i, and
/// summarizes each. Byte-identical output for any parallelism.
pub fn run_replicates(
    params: &ModelParams,
    n: u64,
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<Vec<ReplicateSample>, SuiteError> {
    let plan = ReplicatePlan::at(n)?;
    run_replicates_with(params, &plan, reps, base_seed, parallelism)
}

/// Mean and population variance of a slice.
pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m;
    (mean, var)
}

/// Standard normal CDF, the reference law for studentized statistics.
pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    normal_cdf(x)
}
