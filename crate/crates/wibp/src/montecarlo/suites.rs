//! Verification suites: each runs a replicated experiment against a law the
//! process must satisfy, records the measured statistics next to its
//! thresholds, and renders a verdict. Suites never weaken a check to pass;
//! when the parameters sit outside a law's regime they refuse to run, and
//! when the design cannot support a verdict they say so.

use super::gof::{chi_square_poisson, ks_test, GofError};
use super::{mean_var, run_rows, std_normal_cdf, ReplicatePlan, ReplicateRow, SuiteError};
use crate::estimators::{a_n, confidence_interval, lambda_limit};
use crate::model::{validate_params, BuffetState, LambdaCtx, ModelParams, WeightSpec};
use crate::numerics::{normal_cdf, KahanSum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Outcome of one suite run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The design cannot support a verdict (too few replicates or a
    /// degenerate statistic); nothing was decided.
    Underpowered,
    /// The suite ran outside its exact regime at the caller's request;
    /// statistics are reported without a verdict.
    ReportOnly,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Underpowered => "underpowered",
            Verdict::ReportOnly => "report_only",
        };
        f.write_str(s)
    }
}

/// Result of one suite: configuration echo, measured statistics, the
/// thresholds they were held to, and the verdict.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub verdict: Verdict,
    pub n: u64,
    pub reps: u64,
    pub base_seed: u64,
    pub config: BTreeMap<String, String>,
    pub statistics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(
        suite: &'static str,
        params: &ModelParams,
        n: u64,
        reps: u64,
        base_seed: u64,
    ) -> SuiteReport {
        SuiteReport {
            suite,
            verdict: Verdict::Fail,
            n,
            reps,
            base_seed,
            config: params.config_entries(),
            statistics: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn stat(&mut self, key: &str, value: f64) {
        assert!(value.is_finite(), "statistic {key} must be finite");
        self.statistics.insert(key.to_string(), value);
    }

    fn threshold(&mut self, key: &str, value: f64) {
        self.thresholds.insert(key.to_string(), value);
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

fn require_reps(reps: u64) -> Result<(), SuiteError> {
    if reps == 0 {
        Err(GofError::Empty.into())
    } else {
        Ok(())
    }
}

/// Nearest-rank upper quantile of |x|.
fn percentile_abs(xs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

/// For constant weights the dish count after n customers is exactly
/// Poisson with mean mu = Lambda_0 + ... + Lambda_(n-1). The suite holds
/// the replicated counts to that law with a pooled chi-square test and a
/// three-sigma band on the mean.
pub fn suite_poisson_oracle(
    params: &ModelParams,
    n: u64,
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<SuiteReport, SuiteError> {
    validate_params(params)?;
    require_reps(reps)?;
    let WeightSpec::Constant { r } = params.weights else {
        return Err(SuiteError::Inapplicable {
            suite: "poisson-oracle",
            reason: format!(
                "the dish count is exactly Poisson only for constant weights; got {}",
                params.weights
            ),
        });
    };
    let plan = ReplicatePlan::at(n)?;
    let ctx = LambdaCtx::new(params);
    let mut mu_sum = KahanSum::new();
    for j in 0..n {
        mu_sum.add(ctx.eval(j as f64 * r));
    }
    let mu = mu_sum.value();
    let rows = run_rows(params, &plan, reps, base_seed, parallelism)?;
    let ls: Vec<u64> = rows.iter().map(|row| row.at[0].l).collect();
    let mean_l = ls.iter().map(|&l| l as f64).sum::<f64>() / reps as f64;
    let band = 3.0 * (mu / reps as f64).sqrt();

    let mut rep = SuiteReport::new("poisson-oracle", params, n, reps, base_seed);
    rep.stat("mu", mu);
    rep.stat("mean_l", mean_l);
    rep.stat("mean_abs_dev", (mean_l - mu).abs());
    rep.stat("mean_band", band);
    rep.threshold("mean_band_sigmas", 3.0);
    rep.threshold("chi2_p_min", 0.001);
    rep.threshold("min_expected_per_bin", 5.0);
    rep.threshold("min_reps", 100.0);
    let mean_ok = (mean_l - mu).abs() <= band;
    match chi_square_poisson(&ls, mu, 5.0) {
        Ok(fit) => {
            rep.stat("chi2", fit.chi2);
            rep.stat("chi2_dof", fit.dof as f64);
            rep.stat("chi2_p", fit.p);
            if reps < 100 {
                rep.verdict = Verdict::Underpowered;
                rep.note(format!(
                    "needs at least 100 replicates for a verdict; got {reps}"
                ));
            } else {
                rep.verdict = if fit.p > 0.001 && mean_ok {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
            }
        }
        Err(GofError::Degenerate { bins }) => {
            rep.verdict = Verdict::Underpowered;
            rep.note(format!(
                "chi-square cells pool into {bins} bin(s); more replicates needed"
            ));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(rep)
}

/// Growth law of the dish count: the deviation of the mean of L_n/a_n
/// from its limit must decrease along the horizons and end within tolerance
/// (10% of the limit for beta > 0, 25% for the slow log-normed beta = 0).
pub fn suite_slln_ln(
    params: &ModelParams,
    horizons: &[u64],
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<SuiteReport, SuiteError> {
    let flags = validate_params(params)?;
    require_reps(reps)?;
    if !flags.thm43_ok {
        return Err(SuiteError::Inapplicable {
            suite: "slln-ln",
            reason: format!(
                "the growth law requires beta in [0, 1); got beta = {}",
                params.beta
            ),
        });
    }
    let plan = ReplicatePlan::at_horizons(horizons)?;
    let lam = lambda_limit(params)?;
    let rows = run_rows(params, &plan, reps, base_seed, parallelism)?;

    let mut rep = SuiteReport::new("slln-ln", params, plan.final_horizon(), reps, base_seed);
    rep.stat("lambda_limit", lam);
    let tol = if params.beta > 0.0 { 0.10 } else { 0.25 };
    rep.threshold("final_rel_dev_max", tol);
    let mut devs = Vec::new();
    for (idx, &h) in plan.horizons().iter().enumerate() {
        let a = a_n(params.beta, h)?;
        let scaled: Vec<f64> = rows.iter().map(|row| row.at[idx].l as f64 / a).collect();
        let (mean, var) = mean_var(&scaled);
        let dev = (mean - lam).abs() / lam;
        rep.stat(&format!("mean_scaled_n{h}"), mean);
        rep.stat(&format!("sd_scaled_n{h}"), var.sqrt());
        rep.stat(&format!("rel_dev_n{h}"), dev);
        devs.push(dev);
    }
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    if plan.horizons().len() < 2 {
        rep.note("single horizon: the monotone-decay check is vacuous");
    }
    rep.note("the relative deviation of mean L/a_n from the limit must shrink along horizons");
    if params.beta == 0.0 {
        rep.note("beta = 0 norms by log n, so convergence is slow; tolerance is widened to 25%");
    }
    rep.verdict = if decreasing && *devs.last().expect("at least one horizon") <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(rep)
}

/// Gaussian fluctuations of the dish count: sqrt(a_n)(L_n/a_n - lambda)
/// must match N(0, lambda) by Kolmogorov-Smirnov and carry the right
/// variance. With a configured subset the same law holds for L_n(B) with
/// lambda scaled by the subset measure; the subset branch gates its limit
/// mean (10%) and variance (15%) and reports its KS shape statistics.
pub fn suite_clt_ln(
    params: &ModelParams,
    n: u64,
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<SuiteReport, SuiteError> {
    let flags = validate_params(params)?;
    require_reps(reps)?;
    if !flags.thm44_ok {
        return Err(SuiteError::Inapplicable {
            suite: "clt-ln",
            reason: format!(
                "Gaussian dish-count fluctuations require beta in [0, 1); got beta = {}",
                params.beta
            ),
        });
    }
    let lam = lambda_limit(params)?;
    let a = a_n(params.beta, n)?;
    let plan = ReplicatePlan::at(n)?;
    let rows = run_rows(params, &plan, reps, base_seed, parallelism)?;

    let mut rep = SuiteReport::new("clt-ln", params, n, reps, base_seed);
    rep.stat("lambda_limit", lam);
    rep.threshold("ks_p_min", 0.01);
    rep.threshold("var_rel_dev_max", 0.15);

    let xs: Vec<f64> = rows
        .iter()
        .map(|row| a.sqrt() * (row.at[0].l as f64 / a - lam))
        .collect();
    let sd = lam.sqrt();
    let (ks_d, ks_p) = ks_test(&xs, |x| normal_cdf(x / sd))?;
    let (mean, var) = mean_var(&xs);
    let var_dev = (var / lam - 1.0).abs();
    rep.stat("ks_d", ks_d);
    rep.stat("ks_p", ks_p);
    rep.stat("mean_fluct", mean);
    rep.stat("var_fluct", var);
    rep.stat("var_rel_dev", var_dev);
    let mut ok = ks_p > 0.01 && var_dev <= 0.15;

    match &params.subset {
        Some(subset) if subset.measure() < 1.0 => {
            let m = subset.measure();
            let target = m * lam;
            rep.threshold("subset_mean_rel_dev_max", 0.10);
            let ys: Vec<f64> = rows
                .iter()
                .map(|row| a.sqrt() * (row.at[0].l_b as f64 / a - target))
                .collect();
            let sd_b = target.sqrt();
            let (ks_d_b, ks_p_b) = ks_test(&ys, |x| normal_cdf(x / sd_b))?;
            let scaled_mean = rows
                .iter()
                .map(|row| row.at[0].l_b as f64 / a)
                .sum::<f64>()
                / reps as f64;
            let (_, var_b) = mean_var(&ys);
            let mean_dev_b = (scaled_mean - target).abs() / target;
            let var_dev_b = (var_b / target - 1.0).abs();
            rep.stat("ks_d_b", ks_d_b);
            rep.stat("ks_p_b", ks_p_b);
            rep.stat("mean_scaled_b", scaled_mean);
            rep.stat("mean_rel_dev_b", mean_dev_b);
            rep.stat("var_fluct_b", var_b);
            rep.stat("var_rel_dev_b", var_dev_b);
            rep.note("subset branch gates limit mean and variance; its KS statistics are reported unjudged");
            ok = ok && var_dev_b <= 0.15 && mean_dev_b <= 0.10;
        }
        Some(_) => {
            rep.note("configured subset covers the whole label space; subset branch skipped");
        }
        None => {}
    }
    if params.beta == 0.0 {
        rep.note("beta = 0 norms by log n, so finite-horizon bias is large");
    }
    rep.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(rep)
}

/// Fluctuations of the per-customer average around the predictive mean.
/// With varying weights, sqrt(n) V_n / tau-hat must match N(0, 1); with
/// constant weights tau vanishes and the suite instead requires the scaled
/// quantiles of |sqrt(n) V_n| to shrink between horizons. When a proxy
/// factor is given the long-run target K-bar at proxy_factor * n is drawn
/// too, the nominal interval's coverage of it becomes the verdict gate for
/// varying weights, and both studentized shape statistics are reported
/// unjudged alongside it.
pub fn suite_clt_kbar(
    params: &ModelParams,
    n: u64,
    reps: u64,
    base_seed: u64,
    proxy_factor: Option<u64>,
    parallelism: Option<usize>,
) -> Result<SuiteReport, SuiteError> {
    let flags = validate_params(params)?;
    require_reps(reps)?;
    if !(flags.thm51_ok || flags.thm51_standard_ok) {
        return Err(SuiteError::Inapplicable {
            suite: "clt-kbar",
            reason: format!(
                "predictive fluctuations require beta < 1/2 or unit weights; got beta = {} with weights {}",
                params.beta, params.weights
            ),
        });
    }

    if params.weights.is_constant() {
        if n < 3 {
            return Err(SuiteError::Inapplicable {
                suite: "clt-kbar",
                reason: format!("the degenerate branch compares two horizons and needs n >= 3; got {n}"),
            });
        }
        let h1 = (n / 10).max(2).min(n - 1);
        let mut plan = ReplicatePlan::at_horizons(&[h1, n])?;
        if let Some(factor) = proxy_factor {
            plan = plan.with_proxy_factor(factor);
        }
        let rows = run_rows(params, &plan, reps, base_seed, parallelism)?;
        let mut rep = SuiteReport::new("clt-kbar", params, n, reps, base_seed);
        rep.threshold("p95_ratio_max", 1.0);
        let mut p95s = Vec::new();
        for (idx, &h) in plan.horizons().iter().enumerate() {
            let vs: Vec<f64> = rows
                .iter()
                .map(|row| (h as f64).sqrt() * row.at[idx].v)
                .collect();
            let p95 = percentile_abs(&vs, 0.95);
            rep.stat(&format!("p95_abs_vn_n{h}"), p95);
            p95s.push(p95);
        }
        let ratio = p95s[1] / p95s[0];
        rep.stat("p95_ratio", ratio);
        rep.note("constant weights collapse tau to zero, so sqrt(n) V_n must shrink between horizons");
        let mut ok = ratio < 1.0;
        apply_proxy_branch(&mut rep, &rows, &plan, &mut ok)?;
        rep.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        return Ok(rep);
    }

    let mut plan = ReplicatePlan::at(n)?;
    if let Some(factor) = proxy_factor {
        plan = plan.with_proxy_factor(factor);
    }
    let rows = run_rows(params, &plan, reps, base_seed, parallelism)?;
    let mut rep = SuiteReport::new("clt-kbar", params, n, reps, base_seed);
    rep.threshold("ks_p_min", 0.01);
    rep.threshold("dropped_fraction_max", 0.10);
    let mut xs = Vec::with_capacity(rows.len());
    let mut dropped = 0u64;
    for row in &rows {
        let stat = row.at.last().expect("plan has a horizon");
        let tau = stat.tau_hat_sq.sqrt();
        if tau > 0.0 {
            xs.push((stat.n as f64).sqrt() * stat.v / tau);
        } else {
            dropped += 1;
        }
    }
    rep.stat("dropped_replicates", dropped as f64);
    if dropped as f64 > 0.10 * reps as f64 {
        rep.verdict = Verdict::Underpowered;
        rep.note(format!(
            "tau-hat vanished in {dropped} of {reps} replicates; the studentized statistic is unstable here"
        ));
        return Ok(rep);
    }
    let (ks_d, ks_p) = ks_test(&xs, std_normal_cdf)?;
    let (st_mean, st_var) = mean_var(&xs);
    rep.stat("ks_d", ks_d);
    rep.stat("ks_p", ks_p);
    rep.stat("studentized_mean", st_mean);
    rep.stat("studentized_var", st_var);
    let mut ok = if plan.proxy_factor.is_some() {
        rep.note("proxy run: the coverage band is the verdict gate; shape statistics are reported unjudged");
        true
    } else {
        ks_p > 0.01
    };
    apply_proxy_branch(&mut rep, &rows, &plan, &mut ok)?;
    rep.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(rep)
}

/// Coverage check against the proxy target recorded by the plan, if any:
/// the nominal interval at the final horizon must cover K-bar at the proxy
/// horizon at close to nominal rate. Also reports the shape of the
/// proxy-studentized statistic sqrt(n)(K-bar - proxy)/sigma-hat.
fn apply_proxy_branch(
    rep: &mut SuiteReport,
    rows: &[ReplicateRow],
    plan: &ReplicatePlan,
    ok: &mut bool,
) -> Result<(), SuiteError> {
    let Some(factor) = plan.proxy_factor else {
        return Ok(());
    };
    let mut covered = 0u64;
    let mut total = 0u64;
    let mut zs = Vec::with_capacity(rows.len());
    for row in rows {
        let stat = row.at.last().expect("plan has a horizon");
        let zp = row.kbar_proxy.expect("plan ran a proxy horizon");
        let sigma = stat.sigma_hat_sq.sqrt();
        let (lo, hi) = confidence_interval(stat.kbar, sigma, stat.n, plan.ci_level)?;
        total += 1;
        if lo <= zp && zp <= hi {
            covered += 1;
        }
        if sigma > 0.0 {
            zs.push((stat.n as f64).sqrt() * (stat.kbar - zp) / sigma);
        }
    }
    let coverage = covered as f64 / total as f64;
    rep.stat("coverage", coverage);
    rep.stat("proxy_n", (plan.final_horizon() * factor) as f64);
    rep.stat("proxy_var_deflation", 1.0 - 1.0 / factor as f64);
    rep.threshold("coverage_min", 0.90);
    rep.threshold("coverage_max", 0.98);
    if zs.is_empty() {
        rep.note("sigma-hat vanished in every replicate; proxy-studentized shape skipped");
    } else {
        let (d, p) = ks_test(&zs, std_normal_cdf)?;
        rep.stat("ks_d_zproxy", d);
        rep.stat("ks_p_zproxy", p);
    }
    rep.note(
        "the proxy target fluctuates itself, deflating effective variance by about 1 - 1/proxy_factor; the coverage band absorbs this",
    );
    *ok = *ok && (0.90..=0.98).contains(&coverage);
    Ok(())
}

/// One-step intensity ratio: Lambda_(n+1) = Lambda_n (1 - (R - beta)/(c + W_(n+1)))
/// holds exactly when beta = 0 or the weights are the constant 1; the suite
/// walks one trajectory and requires the residual to sit at the rounding
/// floor. Outside those regimes it refuses, unless asked to run in
/// report-only mode to exhibit the nonzero residuals.
pub fn suite_cid_identity(
    params: &ModelParams,
    n: u64,
    seed: u64,
    report_only: bool,
) -> Result<SuiteReport, SuiteError> {
    validate_params(params)?;
    require_reps(n)?;
    let exact = params.beta == 0.0 || params.weights.is_unit();
    if !exact && !report_only {
        return Err(SuiteError::Inapplicable {
            suite: "cid-identity",
            reason: format!(
                "the one-step intensity ratio is exact only for beta = 0 or unit weights; got beta = {} with weights {} (rerun in report-only mode to inspect residuals)",
                params.beta, params.weights
            ),
        });
    }
    let mut state = BuffetState::new(params, seed, 0)?;
    let mut max_res = 0.0f64;
    let mut sum_res = KahanSum::new();
    for _ in 0..n {
        let lam_prev = state.lambda();
        let out = state.step(params)?;
        let predicted = lam_prev * (1.0 - (out.r - params.beta) / (params.c + state.w()));
        let res = ((state.lambda() - predicted) / state.lambda()).abs();
        max_res = max_res.max(res);
        sum_res.add(res);
    }
    let mut rep = SuiteReport::new("cid-identity", params, n, 1, seed);
    rep.stat("max_rel_residual", max_res);
    rep.stat("mean_rel_residual", sum_res.value() / n as f64);
    rep.threshold("max_rel_residual_max", 1e-10);
    rep.verdict = if exact {
        if max_res <= 1e-10 {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    } else {
        rep.note("parameters sit outside the exact-ratio regimes; residuals are reported without a verdict");
        Verdict::ReportOnly
    };
    Ok(rep)
}

/// For beta < 0 the total intensity is summable, so the buffet saturates:
/// almost every trajectory stops creating dishes. The suite requires the
/// dish count to be unchanged over the second half of the run in at least
/// 99% of replicates, and reports how the mean of e^L stabilizes.
pub fn suite_finite_buffet(
    params: &ModelParams,
    n: u64,
    reps: u64,
    base_seed: u64,
    parallelism: Option<usize>,
) -> Result<SuiteReport, SuiteError> {
    validate_params(params)?;
    require_reps(reps)?;
    if params.beta >= 0.0 {
        return Err(SuiteError::Inapplicable {
            suite: "finite-buffet",
            reason: format!(
                "a terminally finite buffet requires beta < 0; got beta = {}",
                params.beta
            ),
        });
    }
    if n < 2 {
        return Err(SuiteError::Inapplicable {
            suite: "finite-buffet",
            reason: format!("comparing the half and full horizons needs n >= 2; got {n}"),
        });
    }
    let plan = ReplicatePlan::at_horizons(&[n / 2, n])?;
    let rows = run_rows(params, &plan, reps, base_seed, parallelism)?;
    let stable = rows
        .iter()
        .filter(|row| row.at[0].l == row.at[1].l)
        .count() as f64
        / reps as f64;
    let mean_l = rows.iter().map(|row| row.at[1].l as f64).sum::<f64>() / reps as f64;

    let mut rep = SuiteReport::new("finite-buffet", params, n, reps, base_seed);
    rep.stat("stable_fraction", stable);
    rep.stat("mean_l_final", mean_l);
    rep.threshold("stable_fraction_min", 0.99);
    // The mean of e^L converges for beta < 0; report its half-to-full ratio
    // when it cannot overflow.
    if rows.iter().all(|row| row.at[1].l <= 700) {
        let e_half = rows
            .iter()
            .map(|row| (row.at[0].l as f64).exp())
            .sum::<f64>()
            / reps as f64;
        let e_full = rows
            .iter()
            .map(|row| (row.at[1].l as f64).exp())
            .sum::<f64>()
            / reps as f64;
        rep.stat("exp_l_mean_ratio", e_full / e_half);
        rep.note("the mean of e^L converges for beta < 0, so the half-to-full ratio should sit near 1");
    } else {
        rep.note("e^L overflows for these dish counts; ratio statistic skipped");
    }
    rep.verdict = if stable >= 0.99 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(rep)
}
