//! Compensated (Neumaier) summation for long accumulations.

/// Running sum carrying a separate compensation word, so error stays O(eps)
/// instead of O(n eps) over n additions.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> KahanSum {
        KahanSum::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        // Neumaier branch: recover the low bits of whichever addend was smaller.
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_small_terms_do_not_vanish() {
        let mut s = KahanSum::new();
        for _ in 0..10_000_000 {
            s.add(0.1);
        }
        assert!((s.value() - 1e6).abs() < 1e-7, "sum = {:.12}", s.value());
    }

    #[test]
    fn test_cancellation() {
        let mut s = KahanSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn test_empty_is_zero() {
        assert_eq!(KahanSum::new().value(), 0.0);
    }
}
