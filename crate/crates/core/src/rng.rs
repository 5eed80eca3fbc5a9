//! Counter-based standard normal draws.
//!
//! Entry `(row, col)` of a draw depends only on `(seed, row, col)`: the row
//! selects a ChaCha8 stream, the column selects the 64-bit word within it.
//! Any sub-rectangle can therefore be regenerated in any order or in
//! parallel. The uniform is mapped to a Gaussian by inverse CDF.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sequential reader over one row's stream.
pub struct RowStream {
    rng: ChaCha8Rng,
}

impl RowStream {
    pub fn new(seed: u64, row: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(row);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Positions the stream so the next draw is column `col`.
    pub fn seek(&mut self, col: u64) {
        self.rng.set_word_pos(2 * u128::from(col));
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_open_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_open_uniform())
    }
}

/// Standard normal at `(seed, row, col)`.
pub fn standard_normal_at(seed: u64, row: u64, col: u64) -> f64 {
    let mut s = RowStream::new(seed, row);
    s.seek(col);
    s.next_standard_normal()
}

// Acklam's rational approximation, |relative error| < 1.15e-9.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

/// Quantile of the standard normal for `p` in (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
