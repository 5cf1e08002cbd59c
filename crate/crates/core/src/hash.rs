//! 4-wise independent hashing over the alphabet and the XOR-tree family of
//! binary projections with logarithmic-time collision counting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::text_model::MAX_SIGMA;

/// Low 64 bits of `x^64 + x^4 + x^3 + x + 1`.
#[cfg(test)]
const GF64_POLY_LOW: u64 = 0b1_1011;

/// Carry-less 64x64 -> 128 bit product as `(hi, lo)`.
#[inline]
fn clmul(a: u64, b: u64) -> (u64, u64) {
    let (mut hi, mut lo) = (0u64, 0u64);
    let mut b = b;
    while b != 0 {
        let i = b.trailing_zeros();
        lo ^= a << i;
        if i != 0 {
            hi ^= a >> (64 - i);
        }
        b &= b - 1;
    }
    (hi, lo)
}

/// Multiplication in GF(2^64) modulo `x^64 + x^4 + x^3 + x + 1`.
#[inline]
pub fn gf64_mul(a: u64, b: u64) -> u64 {
    let (hi, lo) = clmul(a, b);
    // hi * x^64 = hi * (x^4 + x^3 + x + 1); the bits that spill past x^63
    // are folded once more.
    let spill = (hi >> 60) ^ (hi >> 61) ^ (hi >> 63);
    let t = hi ^ spill;
    lo ^ t ^ (t << 1) ^ (t << 3) ^ (t << 4)
}

/// Degree-3 polynomial over GF(2^64) with uniformly drawn coefficients,
/// truncated to its low `out_bits` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourWiseHash {
    coefficients: [u64; 4],
    out_bits: u32,
}

pub const MAX_OUT_BITS: u32 = 20;

impl FourWiseHash {
    pub fn new(out_bits: u32, seed: u64) -> Result<Self> {
        if !(1..=MAX_OUT_BITS).contains(&out_bits) {
            return Err(Error::Parameter(format!(
                "hash output width {out_bits} outside [1, {MAX_OUT_BITS}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            coefficients: rng.gen(),
            out_bits,
        })
    }

    pub fn out_bits(&self) -> u32 {
        self.out_bits
    }

    #[inline]
    pub fn eval(&self, u: u32) -> u32 {
        let x = u as u64;
        let [a0, a1, a2, a3] = self.coefficients;
        let y = gf64_mul(gf64_mul(gf64_mul(a3, x) ^ a2, x) ^ a1, x) ^ a0;
        (y & ((1u64 << self.out_bits) - 1)) as u32
    }
}

pub const MAX_FAMILY_LOG2: u32 = 32;

/// `k` binary hash functions built from `log2 k` pairs of single-bit base
/// functions. Member `i` XORs, for each pair `b`, the base function
/// `2b + bit_b(i)`.
#[derive(Clone, Debug)]
pub struct XorTreeFamily {
    k: u64,
    base: Vec<FourWiseHash>,
}

impl XorTreeFamily {
    pub fn new(k: u64, seed: u64) -> Result<Self> {
        if k < 2 || !k.is_power_of_two() || k.trailing_zeros() > MAX_FAMILY_LOG2 {
            return Err(Error::Parameter(format!(
                "family size {k} must be a power of two in [2, 2^{MAX_FAMILY_LOG2}]"
            )));
        }
        let pairs = k.trailing_zeros() as u64;
        let base = (0..2 * pairs)
            .map(|t| FourWiseHash::new(1, seed::mix(seed, t)))
            .collect::<Result<_>>()?;
        Ok(Self { k, base })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn pairs(&self) -> usize {
        self.base.len() / 2
    }

    pub fn base(&self) -> &[FourWiseHash] {
        &self.base
    }

    /// Bit `t` is base function `t` evaluated at `u`.
    pub fn base_bits(&self, u: u32) -> u64 {
        self.base
            .iter()
            .enumerate()
            .fold(0, |acc, (t, f)| acc | (f.eval(u) as u64) << t)
    }

    /// Which base functions member `i` XORs together, as a bit set.
    #[inline]
    pub fn member_selector(&self, i: u64) -> u64 {
        (0..self.pairs()).fold(0, |acc, b| acc | 1 << (2 * b as u64 + (i >> b & 1)))
    }

    pub fn member_eval(&self, i: u64, u: u32) -> Result<bool> {
        if i >= self.k {
            return Err(Error::IndexOutOfRange {
                what: "family member",
                index: i as usize,
                limit: self.k as usize,
            });
        }
        if u >= MAX_SIGMA {
            return Err(Error::IndexOutOfRange {
                what: "symbol",
                index: u as usize,
                limit: MAX_SIGMA as usize,
            });
        }
        Ok(member_bit(self.base_bits(u), self.member_selector(i)))
    }

    /// Number of members with `h_i(u) = h_i(v)`.
    pub fn beta(&self, u: u32, v: u32) -> u64 {
        if u == v {
            return self.k;
        }
        beta_from_bits(self.base_bits(u), self.base_bits(v), self.pairs())
    }

    /// Table of base bits for a symbol set, for repeated member evaluation.
    pub fn table(&self, sigma: u32, symbols: impl IntoIterator<Item = u32>) -> BaseBitsTable<'_> {
        let mut bits = vec![0u64; sigma as usize];
        let mut filled = vec![false; sigma as usize];
        for u in symbols {
            if !filled[u as usize] {
                bits[u as usize] = self.base_bits(u);
                filled[u as usize] = true;
            }
        }
        BaseBitsTable {
            family: self,
            bits,
            filled,
        }
    }
}

#[inline]
pub fn member_bit(base_bits: u64, selector: u64) -> bool {
    (base_bits & selector).count_ones() & 1 == 1
}

/// Collision count from the two symbols' base bits, combining per-pair
/// `(equal, different)` counts up a balanced tree.
pub fn beta_from_bits(bu: u64, bv: u64, pairs: usize) -> u64 {
    tree_counts(bu ^ bv, 0, pairs).0
}

/// `(e, d)` at the tree node covering pairs `lo..hi`, where `diff` holds the
/// XOR of the two symbols' base bits.
fn tree_counts(diff: u64, lo: usize, hi: usize) -> (u64, u64) {
    if hi - lo == 1 {
        let e = 2 - (diff >> (2 * lo) & 3).count_ones() as u64;
        return (e, 2 - e);
    }
    let mid = lo + (hi - lo) / 2;
    let (el, dl) = tree_counts(diff, lo, mid);
    let (er, dr) = tree_counts(diff, mid, hi);
    (el * er + dl * dr, el * dr + dl * er)
}

/// Base bits cached for the symbols of one text/pattern pair; other symbols
/// are evaluated on demand.
pub struct BaseBitsTable<'a> {
    family: &'a XorTreeFamily,
    bits: Vec<u64>,
    filled: Vec<bool>,
}

impl BaseBitsTable<'_> {
    #[inline]
    pub fn get(&self, u: u32) -> u64 {
        match self.filled.get(u as usize) {
            Some(true) => self.bits[u as usize],
            _ => self.family.base_bits(u),
        }
    }

    pub fn beta(&self, u: u32, v: u32) -> u64 {
        if u == v {
            return self.family.k;
        }
        beta_from_bits(self.get(u), self.get(v), self.family.pairs())
    }
}

/// `|{i : h_i(u) = h_i(v)}|` by evaluating every member.
pub fn beta_by_enumeration(family: &XorTreeFamily, u: u32, v: u32) -> Result<u64> {
    let mut count = 0;
    for i in 0..family.k() {
        if family.member_eval(i, u)? == family.member_eval(i, v)? {
            count += 1;
        }
    }
    Ok(count)
}
