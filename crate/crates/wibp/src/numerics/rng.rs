//! Counter-based pseudorandom streams.
//!
//! A Philox-style 4x64 bijection with 10 rounds maps (counter, key) blocks to
//! output blocks; the key holds (seed, stream_id), so any number of logically
//! independent streams can be opened without coordination and each replicate
//! can be generated on any thread with identical results. State is four
//! counter words plus a four-word output buffer.

/// Multipliers and Weyl constants for the 4x64 round function.
const M0: u64 = 0xD2E7_470E_E14C_6C93;
const M1: u64 = 0xCA5A_8263_9512_1157;
const W0: u64 = 0x9E37_79B9_7F4A_7C15;
const W1: u64 = 0xBB67_AE85_84CA_A73B;

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = u128::from(a) * u128::from(b);
    ((p >> 64) as u64, p as u64)
}

/// Ten-round keyed bijection on a 256-bit block.
fn philox4x64_10(mut ctr: [u64; 4], mut key: [u64; 2]) -> [u64; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, ctr[0]);
        let (hi1, lo1) = mulhilo(M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// One reproducible random stream, identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u64; 2],
    ctr: [u64; 4],
    buf: [u64; 4],
    /// Next unread slot in `buf`; 4 means the buffer is exhausted.
    idx: usize,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> RngStream {
        RngStream {
            key: [seed, stream_id],
            ctr: [0; 4],
            buf: [0; 4],
            idx: 4,
        }
    }

    #[inline]
    fn refill(&mut self) {
        self.buf = philox4x64_10(self.ctr, self.key);
        self.idx = 0;
        for word in self.ctr.iter_mut() {
            let (v, carry) = word.overflowing_add(1);
            *word = v;
            if !carry {
                break;
            }
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        if self.idx == 4 {
            self.refill();
        }
        let v = self.buf[self.idx];
        self.idx += 1;
        v
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Uniform draw on [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
