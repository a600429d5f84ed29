//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a
//! [`StreamKey`] (master seed plus stream id) and a 64-bit site label.
//! The generator is ChaCha8 with the master seed as key, the stream id as
//! nonce and the site label as block position, so draws can be made in
//! any order, on any thread, and reproduce bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(master: u64, stream: u64) -> Self {
        StreamKey { master, stream }
    }

    /// A key for an unrelated purpose derived from this one, e.g. the
    /// second sample of a two-sample comparison.
    pub fn derive(&self, tag: u64) -> Self {
        StreamKey {
            master: splitmix64(self.master ^ splitmix64(tag.wrapping_add(0x9e37_79b9))),
            stream: self.stream,
        }
    }

    /// Key for replica `index` of an experiment seeded by `master`.
    pub fn replica(master: u64, index: u64) -> Self {
        StreamKey::new(master, index)
    }

    pub fn cursor(&self) -> Cursor {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        Cursor { rng }
    }
}

/// Label of a disorder site; one 64-bit draw is reserved per label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteId(pub u64);

const LATTICE_OFFSET: i64 = 1 << 20;

impl SiteId {
    /// Site `n` of a one-dimensional index set.
    pub fn line(n: u64) -> Self {
        SiteId(n)
    }

    /// Space-time site `(n, x)` with `x` in Z.
    pub fn lattice1(n: usize, x: i64) -> Self {
        debug_assert!(x.abs() < (1 << 31) && n < (1 << 30));
        SiteId(((n as u64) << 32) | (x + (1 << 31)) as u64)
    }

    /// Space-time site `(n, x1, x2)` with `(x1, x2)` in Z^2.
    ///
    /// Labels are laid out along the diagonal coordinates `u = x1 + x2`,
    /// `v = x1 - x2`, so that a run of sites with fixed `u` and `v` in steps
    /// of two occupies consecutive labels.
    pub fn lattice2(n: usize, x1: i64, x2: i64) -> Self {
        let u = x1 + x2;
        let v = x1 - x2;
        Self::rotated(n, u, v)
    }

    /// Same as [`SiteId::lattice2`] in diagonal coordinates (`u ≡ v mod 2`).
    pub fn rotated(n: usize, u: i64, v: i64) -> Self {
        debug_assert!((u - v).rem_euclid(2) == 0);
        debug_assert!(u.abs() < LATTICE_OFFSET && v.abs() < LATTICE_OFFSET && n < (1 << 20));
        let parity = (u.rem_euclid(2)) as u64;
        let iu = ((u + LATTICE_OFFSET) >> 1) as u64;
        let iv = ((v + LATTICE_OFFSET) >> 1) as u64;
        SiteId(((n as u64) << 43) | (parity << 42) | (iu << 21) | iv)
    }
}

/// Positioned reader over one stream.
#[derive(Clone, Debug)]
pub struct Cursor {
    rng: ChaCha8Rng,
}

impl Cursor {
    /// Moves to the draw reserved for `site`.
    pub fn seek(&mut self, site: SiteId) {
        self.rng.set_word_pos(2 * site.0 as u128);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1), on a 2^-52 grid.
    pub fn next_uniform(&mut self) -> f64 {
        to_open_unit(self.rng.next_u64())
    }

    pub fn uniform_at(&mut self, site: SiteId) -> f64 {
        self.seek(site);
        self.next_uniform()
    }

    /// Standard normal by inversion of one uniform.
    pub fn next_gaussian(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }
}

#[inline]
pub fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Quantile function of the standard normal law (Wichura, AS 241),
/// accurate to about 1e-16 relative over (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_7e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}
