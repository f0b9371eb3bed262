//! Goodness-of-fit machinery: one-sample Kolmogorov-Smirnov against an
//! arbitrary CDF and chi-square against a Poisson law with pooled bins.

use crate::numerics::{gamma_q, kolmogorov_q, poisson_pmf, KahanSum};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GofError {
    #[error("sample set must be nonempty")]
    Empty,
    #[error("samples must be finite; got {0}")]
    NonFinite(f64),
    #[error("too few distinct bins for a chi-square verdict (got {bins}); more replicates needed")]
    Degenerate { bins: usize },
}

/// One-sample Kolmogorov-Smirnov test. Returns (D, p) where D is the exact
/// supremum distance between the empirical CDF and `cdf`, and p is the
/// asymptotic tail probability Q(sqrt(m) D) from the Kolmogorov series.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<(f64, f64), GofError> {
    if samples.is_empty() {
        return Err(GofError::Empty);
    }
    for &x in samples {
        if !x.is_finite() {
            return Err(GofError::NonFinite(x));
        }
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let m = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        // The empirical CDF jumps from i/m to (i+1)/m at x.
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    Ok((d, kolmogorov_q(m.sqrt() * d)))
}

/// Chi-square fit result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub chi2: f64,
    pub dof: u64,
    pub p: f64,
}

/// Chi-square test of integer samples against Poisson(mu). Adjacent counts
/// are pooled until each bin expects at least `min_expected`, the upper tail
/// forms the last bin, and p = Q(dof/2, chi2/2) with dof = bins - 1 (mu is
/// known, not fitted).
pub fn chi_square_poisson(
    samples: &[u64],
    mu: f64,
    min_expected: f64,
) -> Result<ChiSquare, GofError> {
    if samples.is_empty() {
        return Err(GofError::Empty);
    }
    let m = samples.len() as f64;
    let k_max = *samples.iter().max().expect("nonempty") as usize;
    let mut observed = vec![0u64; k_max + 1];
    for &s in samples {
        observed[s as usize] += 1;
    }
    // Expected counts for k = 0..=k_max plus the open upper tail.
    let mut cum = KahanSum::new();
    let mut cells: Vec<(f64, f64)> = (0..=k_max)
        .map(|k| {
            let p = poisson_pmf(mu, k as u64);
            cum.add(p);
            (observed[k] as f64, m * p)
        })
        .collect();
    let tail = (1.0 - cum.value()).max(0.0);
    cells.push((0.0, m * tail));

    // Pool adjacent cells until each bin expects at least min_expected.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for (obs, exp) in cells {
        acc.0 += obs;
        acc.1 += exp;
        if acc.1 >= min_expected {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    if bins.len() < 2 {
        return Err(GofError::Degenerate { bins: bins.len() });
    }
    let mut chi2 = KahanSum::new();
    for &(obs, exp) in &bins {
        chi2.add((obs - exp) * (obs - exp) / exp);
    }
    let chi2 = chi2.value();
    let dof = (bins.len() - 1) as u64;
    let p = gamma_q(dof as f64 / 2.0, chi2 / 2.0);
    Ok(ChiSquare { chi2, dof, p })
}
