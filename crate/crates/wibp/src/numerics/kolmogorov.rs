//! Kolmogorov distribution tail, the asymptotic two-sided p-value of the
//! Kolmogorov-Smirnov statistic: Q(x) = P(sup_t |B(t)| > x) for a Brownian
//! bridge B.

use core::f64::consts::PI;

/// Q(x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2), with the theta-function
/// transform on the left flank where that series alternates slowly.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // 1 - sqrt(2 pi)/x * sum_{k odd} exp(-k^2 pi^2 / (8 x^2)).
        let t = (-PI * PI / (8.0 * x * x)).exp();
        let t8 = t.powi(8);
        // Exponents 1, 9, 25, 49 = t^(k^2) for odd k.
        let sum = t * (1.0 + t8 * (1.0 + t8 * t8 * (1.0 + t8 * t8 * t8)));
        1.0 - (2.0 * PI).sqrt() / x * sum
    } else {
        let e = (-2.0 * x * x).exp();
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=8u32 {
            let term = e.powi((k * k) as i32);
            sum += sign * term;
            if term < 1e-20 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}
