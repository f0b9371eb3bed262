//! Double-double arithmetic: each value is an unevaluated sum `hi + lo` of two
//! `f64` words with `|lo| <= ulp(hi)/2`, giving roughly 106 bits of precision.
//!
//! Built from the classic error-free transformations (Knuth's two-sum, Dekker's
//! split and two-product). No FMA is required, so results are identical on every
//! target. Only the operations needed by the log-gamma kernel are provided.

/// Unevaluated sum of two doubles, `hi + lo`, with `hi` carrying the leading bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Splitting factor 2^27 + 1 for Dekker's algorithm on 53-bit doubles.
const SPLIT: f64 = 134_217_729.0;

/// Exact sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Exact sum assuming `|a| >= |b|` (one branch cheaper than `two_sum`).
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Splits `a` into high and low halves with at most 26 significand bits each.
#[inline]
fn dekker_split(a: f64) -> (f64, f64) {
    let t = SPLIT * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Exact product: returns `(p, e)` with `p = fl(a * b)` and `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (a_hi, a_lo) = dekker_split(a);
    let (b_hi, b_lo) = dekker_split(b);
    let e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo;
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    /// ln 2 to double-double precision.
    pub const LN_2: Dd = Dd {
        hi: 0.6931471805599452862268,
        lo: 2.319046813846299615495e-17,
    };

    /// (1/2) ln(2 pi) to double-double precision.
    pub const HALF_LN_TWO_PI: Dd = Dd {
        hi: 0.9189385332046727805633,
        lo: -3.878294158067241582231e-17,
    };

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Dd {
        Dd { hi, lo }
    }

    #[inline]
    pub fn from_f64(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    /// Collapses to the nearest `f64`.
    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Renormalizes a raw `(hi, lo)` pair into canonical form.
    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s1, e1) = two_sum(self.hi, rhs.hi);
        let (s2, e2) = two_sum(self.lo, rhs.lo);
        let (s, t) = quick_two_sum(s1, e1 + s2);
        Dd::renorm(s, t + e2)
    }

    #[inline]
    pub fn add_f64(self, rhs: f64) -> Dd {
        let (s, e) = two_sum(self.hi, rhs);
        Dd::renorm(s, e + self.lo)
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        Dd::renorm(p, e)
    }

    #[inline]
    pub fn mul_f64(self, rhs: f64) -> Dd {
        let (p, e) = two_prod(self.hi, rhs);
        Dd::renorm(p, e + self.lo * rhs)
    }

    /// Quotient via two Newton correction terms on the leading-word estimate.
    #[inline]
    pub fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self.sub(rhs.mul_f64(q1));
        let q2 = r.hi / rhs.hi;
        let r = r.sub(rhs.mul_f64(q2));
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::renorm(s, e + q3)
    }

    #[inline]
    pub fn recip(self) -> Dd {
        Dd::from_f64(1.0).div(self)
    }
}

/// Coefficients 1/(2k+1) of the atanh series, split to double-double.
const ATANH_COEFF: [Dd; 22] = [
    Dd::new(1.0, 0.0),
    Dd::new(0.3333333333333333148296, 1.850371707708594234039e-17),
    Dd::new(0.2000000000000000111022, -1.110223024625156540424e-17),
    Dd::new(0.1428571428571428492127, 7.930164461608261003026e-18),
    Dd::new(0.1111111111111111049432, 6.167905692361980780131e-18),
    Dd::new(0.09090909090909091161414, -2.52323414687535577369e-18),
    Dd::new(0.07692307692307692734701, -4.270088556250602078552e-18),
    Dd::new(0.06666666666666666574148, 9.251858538542971170197e-19),
    Dd::new(0.05882352941176470506601, 8.163404592832033385468e-19),
    Dd::new(0.05263157894736841813099, 2.921639538487254053746e-18),
    Dd::new(0.04761904761904761640423, 2.643388153869420334342e-18),
    Dd::new(0.04347826086956521618454, 1.206764157201257109156e-18),
    Dd::new(0.04000000000000000083267, -8.326672684688674053177e-19),
    Dd::new(0.03703703703703703498107, 2.055968564120660260044e-18),
    Dd::new(0.03448275862068965469387, 4.785444071660157501826e-19),
    Dd::new(0.03225806451612903136272, 8.953411488912552745352e-19),
    Dd::new(0.03030303030303030387138, -8.410780489584519245634e-19),
    Dd::new(0.02857142857142857053643, 8.921435019309293628404e-19),
    Dd::new(0.02702702702702702852733, -1.500301384628589919491e-18),
    Dd::new(0.02564102564102564013604, 8.896017825522087663651e-19),
    Dd::new(0.02439024390243902523645, -8.462065736472229728839e-19),
    Dd::new(0.02325581395348837177028, 3.227392513445222501231e-19),
];

/// Natural log of a finite positive `f64`, to double-double precision.
///
/// Reduces `x = m * 2^e` with `m` in `[sqrt(2)/2, sqrt(2))`, then evaluates
/// `ln m = 2 atanh((m - 1)/(m + 1))` by series; `|t| <= 0.1716` so 22 terms
/// reach below the 106-bit noise floor.
pub fn ln_dd(x: f64) -> Dd {
    debug_assert!(x > 0.0 && x.is_finite(), "ln_dd domain: x = {x}");
    let bits = x.to_bits();
    let mut e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mut m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | 0x3ff0_0000_0000_0000);
    // Subnormals land at exponent -1023 with a zero implicit bit; rescale first.
    if e == -1023 {
        let y = x * 9007199254740992.0; // 2^53
        let yb = y.to_bits();
        e = ((yb >> 52) & 0x7ff) as i64 - 1023 - 53;
        m = f64::from_bits((yb & 0x000f_ffff_ffff_ffff) | 0x3ff0_0000_0000_0000);
    }
    if m > core::f64::consts::SQRT_2 {
        m *= 0.5;
        e += 1;
    }
    // t = (m - 1)/(m + 1); both endpoints are exact in f64.
    let t = Dd::from_f64(m - 1.0).div(Dd::from_f64(m).add_f64(1.0));
    let t2 = t.mul(t);
    let mut s = ATANH_COEFF[ATANH_COEFF.len() - 1];
    for k in (0..ATANH_COEFF.len() - 1).rev() {
        s = s.mul(t2).add(ATANH_COEFF[k]);
    }
    let ln_m = t.mul(s).mul_f64(2.0);
    Dd::LN_2.mul_f64(e as f64).add(ln_m)
}
