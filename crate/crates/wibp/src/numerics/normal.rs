//! Error function and standard normal cdf/quantile.
//!
//! `erf`/`erfc` follow Cody's three-region rational approximations (relative
//! error ~1e-16, with the split-exponential trick keeping the tail scale
//! factor exact). The quantile starts from Acklam's rational estimate and
//! applies Halley refinement against the cdf, landing near 1e-15 relative.

use core::f64::consts::FRAC_1_SQRT_2;

const SQRT_2PI: f64 = 2.506628274631000502416;
/// 1/sqrt(pi).
const FRAC_1_SQRT_PI: f64 = 0.5641895835477562869481;

/// erfc underflows past this argument (the subnormal range ends near
/// erfc(27.25) ~ 1e-324).
const ERFC_XBIG: f64 = 27.25;

// Region |x| <= 0.46875: erf(x) = x P(x^2)/Q(x^2).
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];

// Region 0.46875 < x <= 4: erfc(x) = exp(-x^2) P(x)/Q(x).
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];

// Region x > 4: erfc(x) = exp(-x^2)/x (1/sqrt(pi) - y P(y)/Q(y)), y = 1/x^2.
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

/// exp(-y^2) split as exp(-t^2) exp(-(y-t)(y+t)) with t = trunc(16 y)/16,
/// so the dominant factor's argument is exact.
#[inline]
fn exp_neg_sq(y: f64) -> f64 {
    let t = (16.0 * y).trunc() / 16.0;
    let del = (y - t) * (y + t);
    (-t * t).exp() * (-del).exp()
}

/// erfc(y) for y >= 0.46875.
fn erfc_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        exp_neg_sq(y) * (num + ERF_C[7]) / (den + ERF_D[7])
    } else if y < ERFC_XBIG {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        exp_neg_sq(y) * (FRAC_1_SQRT_PI - r) / y
    } else {
        0.0
    }
}

/// erf(x) on the central region |x| <= 0.46875.
fn erf_core(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.46875 {
        erf_core(x)
    } else {
        let e = 1.0 - erfc_tail(y);
        if x < 0.0 {
            -e
        } else {
            e
        }
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    let tail = if y <= 0.46875 {
        return 1.0 - erf_core(x);
    } else {
        erfc_tail(y)
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

/// Standard normal cdf, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

// Acklam's quantile coefficients.
const NQ_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const NQ_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const NQ_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const NQ_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const NQ_P_LOW: f64 = 0.02425;

/// Acklam's rational estimate for p in (0, 0.5].
fn quantile_estimate(p: f64) -> f64 {
    if p < NQ_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((NQ_C[0] * q + NQ_C[1]) * q + NQ_C[2]) * q + NQ_C[3]) * q + NQ_C[4]) * q + NQ_C[5])
            / ((((NQ_D[0] * q + NQ_D[1]) * q + NQ_D[2]) * q + NQ_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((NQ_A[0] * r + NQ_A[1]) * r + NQ_A[2]) * r + NQ_A[3]) * r + NQ_A[4]) * r + NQ_A[5]) * q
            / (((((NQ_B[0] * r + NQ_B[1]) * r + NQ_B[2]) * r + NQ_B[3]) * r + NQ_B[4]) * r + 1.0)
    }
}

/// Standard normal quantile for p in (0, 1). NaN outside the open interval.
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    // Work on the lower half so cdf comparisons stay relative-accurate.
    let (ps, flip) = if p <= 0.5 { (p, false) } else { (1.0 - p, true) };
    let mut x = quantile_estimate(ps);
    for _ in 0..2 {
        if 0.5 * x * x > 700.0 {
            break;
        }
        let e = normal_cdf(x) - ps;
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    if flip {
        -x
    } else {
        x
    }
}
