//! Counting aligned `(1, 1)` positions between a binary text and a binary
//! pattern over every alignment.
//!
//! Two exact backends sit behind [`Correlator`]: a floating-point FFT whose
//! output is rounded to the nearest integer, and a word-parallel popcount
//! sweep. Both return identical integers.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_sizes, Error, Result};

/// Packed sequence of `{0, 1}` flags. Bits past `len` are always zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMask {
    words: Vec<u64>,
    len: usize,
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut mask = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                mask.words[i / 64] |= 1 << (i % 64);
            }
        }
        mask
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self::from_fn(bits.len(), |i| bits[i] != 0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut out = Self {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// 64 bits starting at bit `pos`; positions past the end read as zero.
    #[inline]
    fn word_at(&self, pos: usize) -> u64 {
        let q = pos / 64;
        let r = pos % 64;
        let lo = self.words.get(q).copied().unwrap_or(0);
        if r == 0 {
            lo
        } else {
            let hi = self.words.get(q + 1).copied().unwrap_or(0);
            (lo >> r) | (hi << (64 - r))
        }
    }
}

/// `counts[j]` for every alignment `j`.
pub type CountVector = Vec<u32>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    /// FFT for texts of at least [`FFT_THRESHOLD`] symbols, popcount below.
    #[default]
    Auto,
    Fft,
    Popcount,
}

pub const FFT_THRESHOLD: usize = 4096;

impl Backend {
    fn resolve(self, n: usize) -> Backend {
        match self {
            Backend::Auto if n >= FFT_THRESHOLD => Backend::Fft,
            Backend::Auto => Backend::Popcount,
            b => b,
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "fft" => Ok(Backend::Fft),
            "popcount" => Ok(Backend::Popcount),
            other => Err(Error::Parameter(format!("unknown backend `{other}`"))),
        }
    }
}

/// Members handled per spectral accumulation before rounding back to integers.
const SUM_CHUNK: usize = 16;

struct Spectral {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    fn run(&self, fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
    }

    /// Spectra of two real signals packed into one complex transform.
    fn forward_two(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.size;
        let mut z = vec![Complex64::default(); n];
        for (slot, &x) in z.iter_mut().zip(a) {
            slot.re = x;
        }
        for (slot, &y) in z.iter_mut().zip(b) {
            slot.im = y;
        }
        self.run(self.forward.as_ref(), &mut z);
        let mut sa = vec![Complex64::default(); n];
        let mut sb = vec![Complex64::default(); n];
        for k in 0..n {
            let zk = z[k];
            let zc = z[(n - k) % n].conj();
            sa[k] = (zk + zc) * 0.5;
            // (zk - zc) / 2i
            let d = (zk - zc) * 0.5;
            sb[k] = Complex64::new(d.im, -d.re);
        }
        (sa, sb)
    }

    /// Inverse transforms of two spectra of real signals, normalized.
    fn inverse_two(&self, sa: &[Complex64], sb: Option<&[Complex64]>) -> (Vec<f64>, Vec<f64>) {
        let n = self.size;
        let mut z: Vec<Complex64> = match sb {
            Some(sb) => sa
                .iter()
                .zip(sb)
                .map(|(a, b)| a + Complex64::new(-b.im, b.re))
                .collect(),
            None => sa.to_vec(),
        };
        self.run(self.inverse.as_ref(), &mut z);
        let scale = 1.0 / n as f64;
        let re = z.iter().map(|c| c.re * scale).collect();
        let im = if sb.is_some() {
            z.iter().map(|c| c.im * scale).collect()
        } else {
            Vec::new()
        };
        (re, im)
    }
}

#[inline]
fn to_count(x: f64) -> u64 {
    let r = x.round();
    debug_assert!((x - r).abs() < 0.25, "transform residue {x}");
    r.max(0.0) as u64
}

/// Correlation engine for a fixed text length `n` and pattern length `m`.
pub struct Correlator {
    n: usize,
    m: usize,
    backend: Backend,
    spectral: Option<Spectral>,
}

impl Correlator {
    pub fn new(n: usize, m: usize, backend: Backend) -> Result<Self> {
        check_sizes(n, m)?;
        let backend = backend.resolve(n);
        let spectral = (backend == Backend::Fft).then(|| Spectral::new(n.next_power_of_two()));
        Ok(Self {
            n,
            m,
            backend,
            spectral,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn windows(&self) -> usize {
        self.n - self.m + 1
    }

    fn check(&self, text: &BitMask, pattern: &BitMask) -> Result<()> {
        check_sizes(text.len(), pattern.len())?;
        if text.len() != self.n || pattern.len() != self.m {
            return Err(Error::Parameter(format!(
                "masks of lengths {}/{} given to a correlator for {}/{}",
                text.len(),
                pattern.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    /// `counts[j] = sum_i text[j + i] * pattern[i]`.
    pub fn count_aligned_ones(&self, text: &BitMask, pattern: &BitMask) -> Result<CountVector> {
        self.check(text, pattern)?;
        Ok(match &self.spectral {
            None => popcount_and(text, pattern),
            Some(sp) => {
                let (st, sp_) = sp.forward_two(&text_signal(text), &reversed_signal(pattern));
                let prod: Vec<Complex64> = st.iter().zip(&sp_).map(|(a, b)| a * b).collect();
                let (re, _) = sp.inverse_two(&prod, None);
                (0..self.windows())
                    .map(|j| to_count(re[j + self.m - 1]) as u32)
                    .collect()
            }
        })
    }

    /// Hamming distance between the pattern and every text window.
    pub fn hamming_of_masks(&self, text: &BitMask, pattern: &BitMask) -> Result<CountVector> {
        self.check(text, pattern)?;
        Ok(match self.backend {
            Backend::Popcount => popcount_xor(text, pattern),
            _ => self
                .hamming_sum(1, |_| (text.clone(), pattern.clone()))?
                .into_iter()
                .map(|v| v as u32)
                .collect(),
        })
    }

    /// `sum over i < count` of the Hamming profile of the mask pair `member(i)`.
    ///
    /// On the FFT backend each pair costs one packed forward transform of
    /// `+1/-1` signals; spectra are accumulated in fixed chunks and rounded per
    /// chunk, so the result is independent of the thread count.
    pub fn hamming_sum<F>(&self, count: usize, member: F) -> Result<Vec<u64>>
    where
        F: Fn(usize) -> (BitMask, BitMask) + Sync,
    {
        let windows = self.windows();
        let chunks: Vec<Result<Vec<u64>>> = (0..count.div_ceil(SUM_CHUNK))
            .into_par_iter()
            .map(|c| {
                let range = c * SUM_CHUNK..((c + 1) * SUM_CHUNK).min(count);
                match &self.spectral {
                    None => {
                        let mut acc = vec![0u64; windows];
                        for i in range {
                            let (t, p) = member(i);
                            self.check(&t, &p)?;
                            for (a, h) in acc.iter_mut().zip(popcount_xor(&t, &p)) {
                                *a += h as u64;
                            }
                        }
                        Ok(acc)
                    }
                    Some(sp) => {
                        let members = range.len() as f64;
                        let mut acc = vec![Complex64::default(); sp.size];
                        for i in range {
                            let (t, p) = member(i);
                            self.check(&t, &p)?;
                            let (st, spp) =
                                sp.forward_two(&signed_signal(&t), &signed_reversed(&p));
                            for ((a, x), y) in acc.iter_mut().zip(&st).zip(&spp) {
                                *a += x * y;
                            }
                        }
                        let (re, _) = sp.inverse_two(&acc, None);
                        // ham = (m - signed correlation) / 2, summed over members
                        let base = members * self.m as f64;
                        Ok((0..windows)
                            .map(|j| to_count((base - re[j + self.m - 1]) * 0.5))
                            .collect())
                    }
                }
            })
            .collect();
        let mut total = vec![0u64; windows];
        for chunk in chunks {
            for (t, v) in total.iter_mut().zip(chunk?) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// `count_aligned_ones(text_masks[a], pattern_masks[b])` for every
    /// requested `(a, b)`, in request order.
    pub fn cross_counts(
        &self,
        text_masks: &[BitMask],
        pattern_masks: &[BitMask],
        requests: &[(usize, usize)],
    ) -> Result<Vec<CountVector>> {
        for t in text_masks {
            for p in pattern_masks {
                self.check(t, p)?;
            }
        }
        let Some(sp) = &self.spectral else {
            return Ok(requests
                .par_iter()
                .map(|&(a, b)| popcount_and(&text_masks[a], &pattern_masks[b]))
                .collect());
        };
        let text_spectra = forward_all(sp, text_masks, text_signal);
        let pattern_spectra = forward_all(sp, pattern_masks, reversed_signal);
        let m = self.m;
        let windows = self.windows();
        let out: Vec<Vec<CountVector>> = requests
            .par_chunks(2)
            .map(|pair| {
                let prod = |&(a, b): &(usize, usize)| -> Vec<Complex64> {
                    text_spectra[a]
                        .iter()
                        .zip(&pattern_spectra[b])
                        .map(|(x, y)| x * y)
                        .collect()
                };
                let first = prod(&pair[0]);
                let second = pair.get(1).map(prod);
                let (re, im) = sp.inverse_two(&first, second.as_deref());
                let extract = |v: &[f64]| -> CountVector {
                    (0..windows).map(|j| to_count(v[j + m - 1]) as u32).collect()
                };
                let mut res = vec![extract(&re)];
                if second.is_some() {
                    res.push(extract(&im));
                }
                res
            })
            .collect();
        Ok(out.into_iter().flatten().collect())
    }
}

fn forward_all(
    sp: &Spectral,
    masks: &[BitMask],
    signal: fn(&BitMask) -> Vec<f64>,
) -> Vec<Vec<Complex64>> {
    masks
        .par_chunks(2)
        .flat_map_iter(|pair| {
            let a = signal(&pair[0]);
            let b = pair.get(1).map(signal).unwrap_or_default();
            let (sa, sb) = sp.forward_two(&a, &b);
            let mut v = vec![sa];
            if pair.len() == 2 {
                v.push(sb);
            }
            v
        })
        .collect()
}

fn text_signal(mask: &BitMask) -> Vec<f64> {
    (0..mask.len()).map(|i| mask.get(i) as u8 as f64).collect()
}

fn reversed_signal(mask: &BitMask) -> Vec<f64> {
    let m = mask.len();
    (0..m).map(|q| mask.get(m - 1 - q) as u8 as f64).collect()
}

fn signed_signal(mask: &BitMask) -> Vec<f64> {
    (0..mask.len())
        .map(|i| if mask.get(i) { -1.0 } else { 1.0 })
        .collect()
}

fn signed_reversed(mask: &BitMask) -> Vec<f64> {
    let m = mask.len();
    (0..m)
        .map(|q| if mask.get(m - 1 - q) { -1.0 } else { 1.0 })
        .collect()
}

fn popcount_sweep(text: &BitMask, pattern: &BitMask, xor: bool) -> CountVector {
    let m = pattern.len();
    let pw = pattern.words();
    let tail_bits = m % 64;
    let last = pw.len() - 1;
    let tail_mask = if tail_bits == 0 {
        u64::MAX
    } else {
        (1u64 << tail_bits) - 1
    };
    (0..=text.len() - m)
        .map(|j| {
            let mut c = 0u32;
            for (w, &p) in pw.iter().enumerate() {
                let t = text.word_at(j + 64 * w);
                let mut x = if xor { t ^ p } else { t & p };
                if w == last {
                    x &= tail_mask;
                }
                c += x.count_ones();
            }
            c
        })
        .collect()
}

fn popcount_and(text: &BitMask, pattern: &BitMask) -> CountVector {
    popcount_sweep(text, pattern, false)
}

fn popcount_xor(text: &BitMask, pattern: &BitMask) -> CountVector {
    popcount_sweep(text, pattern, true)
}

/// [`Correlator::count_aligned_ones`] with backend chosen by text length.
pub fn count_aligned_ones(text: &BitMask, pattern: &BitMask) -> Result<CountVector> {
    Correlator::new(text.len(), pattern.len(), Backend::Auto)?.count_aligned_ones(text, pattern)
}

/// [`Correlator::hamming_of_masks`] with backend chosen by text length.
pub fn hamming_of_masks(text: &BitMask, pattern: &BitMask) -> Result<CountVector> {
    Correlator::new(text.len(), pattern.len(), Backend::Auto)?.hamming_of_masks(text, pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_and(t: &BitMask, p: &BitMask) -> Vec<u32> {
        (0..=t.len() - p.len())
            .map(|j| (0..p.len()).filter(|&i| t.get(j + i) && p.get(i)).count() as u32)
            .collect()
    }

    fn brute_xor(t: &BitMask, p: &BitMask) -> Vec<u32> {
        (0..=t.len() - p.len())
            .map(|j| (0..p.len()).filter(|&i| t.get(j + i) != p.get(i)).count() as u32)
            .collect()
    }

    fn random_mask(rng: &mut ChaCha8Rng, len: usize, density: f64) -> BitMask {
        BitMask::from_fn(len, |_| rng.gen_bool(density))
    }

    #[test]
    fn hand_counts() {
        let t = BitMask::from_bits(&[1, 0, 1]);
        let p = BitMask::from_bits(&[1, 1]);
        for b in [Backend::Fft, Backend::Popcount] {
            let c = Correlator::new(3, 2, b).unwrap();
            assert_eq!(c.count_aligned_ones(&t, &p).unwrap(), vec![1, 1]);
            let ht = BitMask::from_bits(&[1, 1, 0]);
            let hp = BitMask::from_bits(&[0, 1]);
            // window 1 compares [1, 0] with [0, 1]
            assert_eq!(c.hamming_of_masks(&ht, &hp).unwrap(), vec![1, 2]);
        }
    }

    #[test]
    fn zero_pattern_gives_zero_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_mask(&mut rng, 300, 0.5);
        let p = BitMask::zeros(40);
        for b in [Backend::Fft, Backend::Popcount] {
            let c = Correlator::new(300, 40, b).unwrap();
            assert!(c.count_aligned_ones(&t, &p).unwrap().iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn equal_masks_full_overlap() {
        let t = BitMask::from_bits(&[1, 0, 0, 1, 1]);
        assert_eq!(hamming_of_masks(&t, &t).unwrap(), vec![0]);
    }

    #[test]
    fn pattern_longer_than_text_is_rejected() {
        let t = BitMask::zeros(3);
        let p = BitMask::zeros(4);
        assert!(matches!(
            count_aligned_ones(&t, &p),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn random_masks_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, m) in [(512, 64), (513, 65), (200, 1), (130, 130), (1000, 127)] {
            let t = random_mask(&mut rng, n, 0.4);
            let p = random_mask(&mut rng, m, 0.6);
            let and = brute_and(&t, &p);
            let xor = brute_xor(&t, &p);
            for b in [Backend::Fft, Backend::Popcount] {
                let c = Correlator::new(n, m, b).unwrap();
                assert_eq!(c.count_aligned_ones(&t, &p).unwrap(), and, "{b:?} {n} {m}");
                assert_eq!(c.hamming_of_masks(&t, &p).unwrap(), xor, "{b:?} {n} {m}");
            }
        }
    }

    #[test]
    fn complement_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_mask(&mut rng, 777, 0.3);
        let p = random_mask(&mut rng, 100, 0.5);
        let c = Correlator::new(777, 100, Backend::Fft).unwrap();
        let a = c.count_aligned_ones(&t, &p).unwrap();
        let b = c.count_aligned_ones(&t, &p.complement()).unwrap();
        let ones = BitMask::from_fn(100, |_| true);
        let pop = c.count_aligned_ones(&t, &ones).unwrap();
        for j in 0..a.len() {
            let sliding = (0..100).filter(|&i| t.get(j + i)).count() as u32;
            assert_eq!(pop[j], sliding);
            assert_eq!(a[j] + b[j], sliding);
        }
        let h = c.hamming_of_masks(&t, &p).unwrap();
        let h2: Vec<u32> = c
            .count_aligned_ones(&t, &p.complement())
            .unwrap()
            .iter()
            .zip(c.count_aligned_ones(&t.complement(), &p).unwrap())
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(h, h2);
    }

    #[test]
    fn hamming_sum_matches_individual_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<(BitMask, BitMask)> = (0..37)
            .map(|_| (random_mask(&mut rng, 900, 0.5), random_mask(&mut rng, 90, 0.5)))
            .collect();
        let expect: Vec<u64> = (0..811)
            .map(|j| {
                pairs
                    .iter()
                    .map(|(t, p)| brute_xor(t, p)[j] as u64)
                    .sum()
            })
            .collect();
        for b in [Backend::Fft, Backend::Popcount] {
            let c = Correlator::new(900, 90, b).unwrap();
            assert_eq!(c.hamming_sum(pairs.len(), |i| pairs[i].clone()).unwrap(), expect);
        }
    }

    #[test]
    fn cross_counts_match_pairwise_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ts: Vec<BitMask> = (0..3).map(|_| random_mask(&mut rng, 600, 0.3)).collect();
        let ps: Vec<BitMask> = (0..4).map(|_| random_mask(&mut rng, 50, 0.3)).collect();
        let req = vec![(0, 0), (2, 3), (1, 1), (0, 3), (2, 0)];
        for b in [Backend::Fft, Backend::Popcount] {
            let c = Correlator::new(600, 50, b).unwrap();
            let got = c.cross_counts(&ts, &ps, &req).unwrap();
            for (k, &(a, bb)) in req.iter().enumerate() {
                assert_eq!(got[k], brute_and(&ts[a], &ps[bb]));
            }
        }
    }
}
