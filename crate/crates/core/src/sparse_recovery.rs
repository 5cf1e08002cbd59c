//! Per-window sparse noise matrices `D'`: coupled symbol projections into
//! buckets, bucket counting, bit-plane decoding of a bucket's majority
//! pair, min-updates over repetitions, and filtering to the largest
//! entries.
//!
//! Two routes produce identical output. [`Route::Direct`] correlates one
//! mask pair per bucket and bit plane. [`Route::Aggregated`] correlates
//! every aligned symbol pair once and obtains each bucket count as the sum
//! over its preimage.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::ops::Range;

use crate::correlation::{Backend, BitMask, CountVector, Correlator};
use crate::error::{Error, Result};
use crate::hash::FourWiseHash;
use crate::params::{check_epsilon, check_reps, default_reps};
use crate::seed;
use crate::text_model::{common_sigma, window_count, IntString, NoiseEntry, SparseNoiseMatrix};

pub const B_NUMERATOR: u64 = (1 << 13) + (1 << 12) + 1;
pub const B_DENOMINATOR: u64 = 1 << 14;

/// The noise constant `b = 12289 / 16384`.
pub fn b_const() -> f64 {
    B_NUMERATOR as f64 / B_DENOMINATOR as f64
}

/// Smallest `t` with `2^t >= 1024 / epsilon`; the effective accuracy is
/// `1024 / 2^t`.
pub fn effective_log2(epsilon: f64) -> Result<u32> {
    check_epsilon(epsilon)?;
    let mut t = 0u32;
    while (2f64.powi(t as i32)) * epsilon < 1024.0 {
        t += 1;
    }
    Ok(t)
}

pub fn effective_epsilon(epsilon: f64) -> Result<f64> {
    Ok(1024.0 / 2f64.powi(effective_log2(epsilon)? as i32))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Route {
    Direct,
    #[default]
    Aggregated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryParams {
    pub epsilon_eff: f64,
    /// `log2(1 / epsilon_eff)`; scales run over `0..=log_inv_eps`.
    pub log_inv_eps: u32,
    pub reps: usize,
    pub seed: u64,
    pub b_const: f64,
    pub route: Route,
    pub backend: Backend,
}

impl RecoveryParams {
    pub fn new(epsilon: f64, n: usize, seed: u64) -> Result<Self> {
        let t = effective_log2(epsilon)?;
        Ok(Self {
            epsilon_eff: 1024.0 / 2f64.powi(t as i32),
            log_inv_eps: t - 10,
            reps: default_reps(n),
            seed,
            b_const: b_const(),
            route: Route::default(),
            backend: Backend::Auto,
        })
    }

    pub fn scales(&self) -> u32 {
        self.log_inv_eps + 1
    }

    /// `ceil(3 / epsilon_eff)`.
    pub fn capacity(&self) -> usize {
        3 << self.log_inv_eps
    }

    /// Text-side range `32 * 2^i`.
    pub fn ell(&self, scale: u32) -> u32 {
        32 << scale
    }

    /// Pattern-side range `32 / (2^i epsilon_eff)`.
    pub fn r(&self, scale: u32) -> u32 {
        32 << (self.log_inv_eps - scale)
    }

    fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        if 5 + self.log_inv_eps > crate::hash::MAX_OUT_BITS {
            return Err(Error::Parameter(format!(
                "effective epsilon {} is too small",
                self.epsilon_eff
            )));
        }
        Ok(())
    }
}

/// Maps `tau: symbols -> [ell]` and `pi: symbols -> [r]`, one drawn from a
/// 4-wise independent hash and the other reduced from it.
#[derive(Clone, Debug)]
pub struct CoupledProjection {
    pub scale: u32,
    pub ell: u32,
    pub r: u32,
    drawn: FourWiseHash,
    tau_drawn: bool,
}

impl CoupledProjection {
    /// Whether `tau` is the independently drawn side.
    pub fn tau_is_drawn(&self) -> bool {
        self.tau_drawn
    }

    #[inline]
    pub fn tau(&self, u: u32) -> u32 {
        let h = self.drawn.eval(u);
        if self.tau_drawn {
            h
        } else {
            h & (self.ell - 1)
        }
    }

    #[inline]
    pub fn pi(&self, u: u32) -> u32 {
        let h = self.drawn.eval(u);
        if self.tau_drawn {
            h & (self.r - 1)
        } else {
            h
        }
    }

    pub fn tables(&self, sigma: u32) -> ProjectionTables {
        let mut tau = Vec::with_capacity(sigma as usize);
        let mut pi = Vec::with_capacity(sigma as usize);
        let mut diagonal = vec![0u64; (self.ell as usize * self.r as usize).div_ceil(64)];
        for u in 0..sigma {
            let (x, y) = (self.tau(u), self.pi(u));
            let key = x as usize * self.r as usize + y as usize;
            diagonal[key / 64] |= 1 << (key % 64);
            tau.push(x);
            pi.push(y);
        }
        ProjectionTables {
            r: self.r,
            tau,
            pi,
            diagonal,
        }
    }
}

/// Materialized projection over a whole alphabet with its diagonal buckets.
pub struct ProjectionTables {
    r: u32,
    pub tau: Vec<u32>,
    pub pi: Vec<u32>,
    diagonal: Vec<u64>,
}

impl ProjectionTables {
    #[inline]
    pub fn key(&self, x: u32, y: u32) -> usize {
        x as usize * self.r as usize + y as usize
    }

    #[inline]
    pub fn is_diagonal(&self, x: u32, y: u32) -> bool {
        let key = self.key(x, y);
        self.diagonal[key / 64] >> (key % 64) & 1 == 1
    }
}

pub fn make_coupled_projection(
    scale: u32,
    params: &RecoveryParams,
    rep: usize,
) -> Result<CoupledProjection> {
    if scale > params.log_inv_eps {
        return Err(Error::IndexOutOfRange {
            what: "scale",
            index: scale as usize,
            limit: params.scales() as usize,
        });
    }
    let ell = params.ell(scale);
    let r = params.r(scale);
    let tau_drawn = ell >= r;
    let bits = ell.max(r).trailing_zeros();
    let seed = seed::derive(params.seed, &[seed::ROLE_RECOVERY, scale as u64, rep as u64]);
    Ok(CoupledProjection {
        scale,
        ell,
        r,
        drawn: FourWiseHash::new(bits, seed)?,
        tau_drawn,
    })
}

/// Bits per symbol in the bit-plane code, `ceil(log2 sigma)`.
pub fn symbol_bits(sigma: u32) -> u32 {
    if sigma <= 1 {
        0
    } else {
        32 - (sigma - 1).leading_zeros()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketCounts {
    pub count: CountVector,
    /// `bits` text-side planes followed by `bits` pattern-side planes.
    pub planes: Vec<CountVector>,
}

#[derive(Clone, Debug)]
pub struct BucketTable {
    pub bits: u32,
    pub diagonal: BTreeSet<(u32, u32)>,
    pub buckets: BTreeMap<(u32, u32), BucketCounts>,
}

/// Counts and bit planes for every non-diagonal bucket that both strings
/// can reach, one correlation per mask pair.
pub fn compute_bucket_table(
    text: &IntString,
    pattern: &IntString,
    proj: &CoupledProjection,
    backend: Backend,
) -> Result<BucketTable> {
    window_count(text, pattern)?;
    let sigma = common_sigma(text, pattern);
    let bits = symbol_bits(sigma);
    let tables = proj.tables(sigma);
    let diagonal: BTreeSet<(u32, u32)> = (0..sigma as usize)
        .map(|u| (tables.tau[u], tables.pi[u]))
        .collect();
    let xs: BTreeSet<u32> = text
        .present_symbols()
        .iter()
        .map(|&u| tables.tau[u as usize])
        .collect();
    let ys: BTreeSet<u32> = pattern
        .present_symbols()
        .iter()
        .map(|&v| tables.pi[v as usize])
        .collect();
    let t = text.symbols();
    let p = pattern.symbols();

    // text masks: [tau = x, then tau = x and bit b] per x
    let stride = bits as usize + 1;
    let mut text_masks = Vec::new();
    for &x in &xs {
        text_masks.push(BitMask::from_fn(t.len(), |q| tables.tau[t[q] as usize] == x));
        for b in 0..bits {
            text_masks.push(BitMask::from_fn(t.len(), |q| {
                tables.tau[t[q] as usize] == x && t[q] >> b & 1 == 1
            }));
        }
    }
    let mut pattern_masks = Vec::new();
    for &y in &ys {
        pattern_masks.push(BitMask::from_fn(p.len(), |q| tables.pi[p[q] as usize] == y));
        for b in 0..bits {
            pattern_masks.push(BitMask::from_fn(p.len(), |q| {
                tables.pi[p[q] as usize] == y && p[q] >> b & 1 == 1
            }));
        }
    }
    let mut keys = Vec::new();
    let mut requests = Vec::new();
    for (a, &x) in xs.iter().enumerate() {
        for (c, &y) in ys.iter().enumerate() {
            if diagonal.contains(&(x, y)) {
                continue;
            }
            keys.push((x, y));
            let (tx, py) = (a * stride, c * stride);
            requests.push((tx, py));
            requests.extend((1..stride).map(|b| (tx + b, py)));
            requests.extend((1..stride).map(|b| (tx, py + b)));
        }
    }
    let corr = Correlator::new(t.len(), p.len(), backend)?;
    let mut counts = corr
        .cross_counts(&text_masks, &pattern_masks, &requests)?
        .into_iter();
    let per_bucket = 1 + 2 * bits as usize;
    let mut buckets = BTreeMap::new();
    for key in keys {
        let count = counts.next().expect("one count per request");
        let planes = counts.by_ref().take(per_bucket - 1).collect();
        buckets.insert(key, BucketCounts { count, planes });
    }
    Ok(BucketTable {
        bits,
        diagonal,
        buckets,
    })
}

/// Recovers the pair contributing more than half of a bucket's count from
/// per-bit majorities, then checks that it is consistent with the bucket.
pub fn decode_bucket(
    c: u32,
    bit_counts: &[u32],
    proj: &CoupledProjection,
    x: u32,
    y: u32,
    sigma: u32,
) -> Option<(u32, u32)> {
    let (u, v) = majority_bits(c, bit_counts)?;
    (u != v && u < sigma && v < sigma && proj.tau(u) == x && proj.pi(v) == y).then_some((u, v))
}

/// [`decode_bucket`] with the projection read from materialized tables.
fn decode_with_tables(
    c: u32,
    bit_counts: &[u32],
    tables: &ProjectionTables,
    x: u32,
    y: u32,
) -> Option<(u32, u32)> {
    let (u, v) = majority_bits(c, bit_counts)?;
    let sigma = tables.tau.len() as u32;
    (u != v
        && u < sigma
        && v < sigma
        && tables.tau[u as usize] == x
        && tables.pi[v as usize] == y)
        .then_some((u, v))
}

/// Per-plane majority: text-side planes first, then pattern-side. Ties
/// reject.
fn majority_bits(c: u32, bit_counts: &[u32]) -> Option<(u32, u32)> {
    if c == 0 || bit_counts.len() % 2 != 0 || bit_counts.len() > 64 {
        return None;
    }
    let bits = bit_counts.len() / 2;
    let mut u = 0u32;
    let mut v = 0u32;
    for (b, &plane) in bit_counts.iter().enumerate() {
        let twice = 2 * plane as u64;
        if twice == c as u64 {
            return None;
        }
        if twice > c as u64 {
            if b < bits {
                u |= 1 << b;
            } else {
                v |= 1 << (b - bits);
            }
        }
    }
    Some((u, v))
}

/// `D'` for every window of `text` against `pattern`.
pub fn construct_sparse_noise(
    text: &IntString,
    pattern: &IntString,
    params: &RecoveryParams,
) -> Result<Vec<SparseNoiseMatrix>> {
    match params.route {
        Route::Direct => construct_direct(text, pattern, params),
        Route::Aggregated => {
            let mut out = Vec::new();
            for block in window_blocks(text, pattern)? {
                let counts = PairCounts::compute(text, pattern, block, params.backend)?;
                out.extend(construct_from_pair_counts(&counts, params)?);
            }
            Ok(out)
        }
    }
}

fn projections(params: &RecoveryParams) -> impl Iterator<Item = Result<CoupledProjection>> + '_ {
    (0..params.scales()).flat_map(move |i| {
        (0..params.reps).map(move |rep| make_coupled_projection(i, params, rep))
    })
}

fn construct_direct(
    text: &IntString,
    pattern: &IntString,
    params: &RecoveryParams,
) -> Result<Vec<SparseNoiseMatrix>> {
    params.validate()?;
    let windows = window_count(text, pattern)?;
    let sigma = common_sigma(text, pattern);
    let mut cand: Vec<BTreeMap<(u32, u32), u32>> = vec![BTreeMap::new(); windows];
    let mut planes = Vec::new();
    for proj in projections(params) {
        let proj = proj?;
        let table = compute_bucket_table(text, pattern, &proj, params.backend)?;
        for (&(x, y), bucket) in &table.buckets {
            for (j, slot) in cand.iter_mut().enumerate() {
                let c = bucket.count[j];
                planes.clear();
                planes.extend(bucket.planes.iter().map(|p| p[j]));
                if let Some(pair) = decode_bucket(c, &planes, &proj, x, y, sigma) {
                    let e = slot.entry(pair).or_insert(u32::MAX);
                    *e = (*e).min(c);
                }
            }
        }
    }
    let capacity = params.capacity();
    cand.into_iter()
        .map(|m| {
            filter_largest(
                m.into_iter()
                    .map(|((u, v), value)| NoiseEntry { u, v, value })
                    .collect(),
                capacity,
            )
        })
        .collect()
}

/// Keeps the `capacity` largest values, ties to the smaller `(u, v)`.
pub fn filter_largest(mut entries: Vec<NoiseEntry>, capacity: usize) -> Result<SparseNoiseMatrix> {
    entries.sort_unstable_by(|a, b| b.value.cmp(&a.value).then((a.u, a.v).cmp(&(b.u, b.v))));
    entries.truncate(capacity);
    SparseNoiseMatrix::from_entries(entries, capacity)
}

/// Entry budget for one block of per-pair count vectors.
const BLOCK_BUDGET: usize = 1 << 26;

/// Window ranges whose per-pair counts fit the memory budget.
pub fn window_blocks(text: &IntString, pattern: &IntString) -> Result<Vec<Range<usize>>> {
    let windows = window_count(text, pattern)?;
    let pairs = (text.present_symbols().len() * pattern.present_symbols().len()).max(1);
    let per_block = (BLOCK_BUDGET / pairs).max(1);
    Ok((0..windows.div_ceil(per_block))
        .map(|b| b * per_block..((b + 1) * per_block).min(windows))
        .collect())
}

/// `A[u,v][j]`: the number of positions where text symbol `u` is aligned
/// with pattern symbol `v != u`, for the windows of one block. Pairs that
/// never align in the block are omitted.
pub struct PairCounts {
    sigma: u32,
    windows: Range<usize>,
    pairs: Vec<(u32, u32)>,
    counts: Vec<CountVector>,
}

impl PairCounts {
    pub fn compute(
        text: &IntString,
        pattern: &IntString,
        windows: Range<usize>,
        backend: Backend,
    ) -> Result<Self> {
        let total = window_count(text, pattern)?;
        if windows.is_empty() || windows.end > total {
            return Err(Error::Parameter(format!(
                "window block {windows:?} outside 0..{total}"
            )));
        }
        let m = pattern.len();
        let sub = text.slice(windows.start..windows.end + m - 1);
        let us = sub.present_symbols();
        let vs = pattern.present_symbols();
        let text_masks: Vec<BitMask> = us
            .iter()
            .map(|&u| BitMask::from_fn(sub.len(), |q| sub.symbols()[q] == u))
            .collect();
        let pattern_masks: Vec<BitMask> = vs
            .iter()
            .map(|&v| BitMask::from_fn(m, |q| pattern.symbols()[q] == v))
            .collect();
        let mut keys = Vec::new();
        let mut requests = Vec::new();
        for (a, &u) in us.iter().enumerate() {
            for (b, &v) in vs.iter().enumerate() {
                if u != v {
                    keys.push((u, v));
                    requests.push((a, b));
                }
            }
        }
        let corr = Correlator::new(sub.len(), m, backend)?;
        let all = corr.cross_counts(&text_masks, &pattern_masks, &requests)?;
        let (pairs, counts) = keys
            .into_iter()
            .zip(all)
            .filter(|(_, c)| c.iter().any(|&x| x > 0))
            .unzip();
        Ok(Self {
            sigma: common_sigma(text, pattern),
            windows,
            pairs,
            counts,
        })
    }

    pub fn windows(&self) -> Range<usize> {
        self.windows.clone()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn counts(&self) -> &[CountVector] {
        &self.counts
    }
}

/// Aggregated route over one block of windows.
pub fn construct_from_pair_counts(
    pc: &PairCounts,
    params: &RecoveryParams,
) -> Result<Vec<SparseNoiseMatrix>> {
    params.validate()?;
    let w = pc.windows.len();
    let npairs = pc.pairs.len();
    let bits = symbol_bits(pc.sigma);
    let index: HashMap<(u32, u32), usize> =
        pc.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut cand: Vec<Vec<u32>> = vec![vec![u32::MAX; w]; npairs];
    let mut singleton = vec![false; npairs];
    let mut extra: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
    let mut keyed: Vec<(usize, usize)> = Vec::with_capacity(npairs);
    let mut planes = vec![0u32; 2 * bits as usize];
    let mut bucket = vec![0u32; w];
    let mut largest = vec![0u32; w];

    for proj in projections(params) {
        let proj = proj?;
        let tables = proj.tables(pc.sigma);
        keyed.clear();
        for (i, &(u, v)) in pc.pairs.iter().enumerate() {
            let (x, y) = (tables.tau[u as usize], tables.pi[v as usize]);
            if !tables.is_diagonal(x, y) {
                keyed.push((tables.key(x, y), i));
            }
        }
        keyed.sort_unstable();
        for group in keyed.chunk_by(|a, b| a.0 == b.0) {
            if let [(_, i)] = group {
                // a lone pair decodes to itself whenever it is counted
                singleton[*i] = true;
                continue;
            }
            let members: Vec<usize> = group.iter().map(|&(_, i)| i).collect();
            if let [a, b] = members[..] {
                // Without a strict majority the two counts are equal, and
                // any bit where the pairs differ is a tie.
                let (ca, cb) = pair_mut(&mut cand, a, b);
                let (xa, xb) = (&pc.counts[a], &pc.counts[b]);
                for (((sa, sb), &x), &y) in ca.iter_mut().zip(cb.iter_mut()).zip(xa).zip(xb) {
                    let c = x.wrapping_add(y);
                    *sa = (*sa).min(if x > y { c } else { u32::MAX });
                    *sb = (*sb).min(if y > x { c } else { u32::MAX });
                }
                continue;
            }
            let (u0, v0) = pc.pairs[members[0]];
            let (x, y) = (tables.tau[u0 as usize], tables.pi[v0 as usize]);
            bucket.fill(0);
            largest.fill(0);
            for &i in &members {
                for ((c, l), &a) in bucket.iter_mut().zip(largest.iter_mut()).zip(&pc.counts[i]) {
                    *c += a;
                    *l = (*l).max(a);
                }
            }
            // a strict majority member is what the bit planes decode to
            for &i in &members {
                for ((slot, &a), &c) in cand[i].iter_mut().zip(&pc.counts[i]).zip(&bucket) {
                    let hit = if 2 * a > c { c } else { u32::MAX };
                    *slot = (*slot).min(hit);
                }
            }
            for j in 0..w {
                let c = bucket[j];
                if c == 0 || 2 * largest[j] > c {
                    continue;
                }
                planes.iter_mut().for_each(|p| *p = 0);
                for &i in &members {
                    let a = pc.counts[i][j];
                    let (u, v) = pc.pairs[i];
                    for b in 0..bits as usize {
                        if u >> b & 1 == 1 {
                            planes[b] += a;
                        }
                        if v >> b & 1 == 1 {
                            planes[bits as usize + b] += a;
                        }
                    }
                }
                if let Some(pair) = decode_with_tables(c, &planes, &tables, x, y) {
                    let slot = match index.get(&pair) {
                        Some(&i) => &mut cand[i][j],
                        None => &mut extra.entry(pair).or_insert_with(|| vec![u32::MAX; w])[j],
                    };
                    *slot = (*slot).min(c);
                }
            }
        }
    }
    for (i, _) in singleton.iter().enumerate().filter(|(_, &s)| s) {
        for (slot, &a) in cand[i].iter_mut().zip(&pc.counts[i]) {
            if a > 0 {
                *slot = (*slot).min(a);
            }
        }
    }

    let capacity = params.capacity();
    let mut out = Vec::with_capacity(w);
    let mut pending: Vec<Vec<NoiseEntry>> = vec![Vec::new(); FINALIZE_CHUNK.min(w)];
    for start in (0..w).step_by(FINALIZE_CHUNK) {
        let end = (start + FINALIZE_CHUNK).min(w);
        for (&(u, v), c) in pc.pairs.iter().zip(&cand).chain(&extra) {
            for (slot, &value) in pending.iter_mut().zip(&c[start..end]) {
                if value != u32::MAX {
                    slot.push(NoiseEntry { u, v, value });
                }
            }
        }
        for slot in &mut pending[..end - start] {
            out.push(filter_largest(std::mem::take(slot), capacity)?);
        }
    }
    Ok(out)
}

/// Windows gathered together when reading candidates back per window.
const FINALIZE_CHUNK: usize = 1024;

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a != b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// Writes `window,u,v,dprime` rows, windows numbered from `first_window`.
pub fn write_dprime_csv<W: Write>(
    mut out: W,
    dprime: &[SparseNoiseMatrix],
    first_window: usize,
) -> std::io::Result<()> {
    writeln!(out, "window,u,v,dprime")?;
    for (j, d) in dprime.iter().enumerate() {
        for e in d.entries() {
            writeln!(out, "{},{},{},{}", first_window + j, e.u, e.v, e.value)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_model::{build_alignment_matrix, generate_instance, InstanceModel};

    fn params(epsilon: f64, n: usize, seed: u64) -> RecoveryParams {
        RecoveryParams::new(epsilon, n, seed).unwrap()
    }

    #[test]
    fn effective_epsilon_is_a_power_of_two_below_request() {
        assert_eq!(effective_epsilon(0.1).unwrap(), 1.0 / 16.0);
        assert_eq!(effective_epsilon(1.0 / 32.0).unwrap(), 1.0 / 32.0);
        assert_eq!(effective_epsilon(0.5).unwrap(), 0.5);
        assert_eq!(effective_epsilon(0.3).unwrap(), 0.25);
        assert!(effective_epsilon(0.6).is_err());
        let p = params(0.1, 8192, 0);
        assert_eq!(p.capacity(), 48);
        assert_eq!(p.reps, 26);
        assert_eq!(p.scales(), 5);
    }

    #[test]
    fn b_constant() {
        assert_eq!(B_NUMERATOR, 12289);
        assert!(b_const() < 0.752 && b_const() > 0.75);
    }

    #[test]
    fn ranges_multiply_to_constant() {
        for eps in [0.5, 0.1, 1.0 / 32.0, 0.01] {
            let p = params(eps, 100, 0);
            for i in 0..p.scales() {
                assert_eq!(p.ell(i) as f64 * p.r(i) as f64, 1024.0 / p.epsilon_eff);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let p = params(1.0 / 32.0, 100, 5);
        let first = make_coupled_projection(0, &p, 0).unwrap();
        assert_eq!((first.ell, first.r), (32, 1024));
        assert!(!first.tau_is_drawn());
        let last = make_coupled_projection(5, &p, 0).unwrap();
        assert_eq!((last.ell, last.r), (1024, 32));
        assert!(last.tau_is_drawn());
        for u in 0..256 {
            assert_eq!(first.tau(u), first.pi(u) % 32);
            assert_eq!(last.pi(u), last.tau(u) % 32);
            assert!(first.pi(u) < 1024 && last.tau(u) < 1024);
        }
        assert!(make_coupled_projection(6, &p, 0).is_err());
    }

    #[test]
    fn equal_ranges_draw_tau() {
        // eps_eff = 1/4: scale 1 has ell = r = 64
        let p = params(0.25, 100, 1);
        let proj = make_coupled_projection(1, &p, 3).unwrap();
        assert_eq!((proj.ell, proj.r), (64, 64));
        assert!(proj.tau_is_drawn());
        for u in 0..50 {
            assert_eq!(proj.tau(u), proj.pi(u));
        }
    }

    #[test]
    fn projections_are_deterministic() {
        let p = params(0.1, 100, 9);
        let a = make_coupled_projection(2, &p, 4).unwrap();
        let b = make_coupled_projection(2, &p, 4).unwrap();
        let c = make_coupled_projection(2, &p, 5).unwrap();
        let ta: Vec<u32> = (0..64).map(|u| a.tau(u)).collect();
        assert_eq!(ta, (0..64).map(|u| b.tau(u)).collect::<Vec<_>>());
        assert_ne!(ta, (0..64).map(|u| c.tau(u)).collect::<Vec<_>>());
    }

    #[test]
    fn symbol_bit_widths() {
        assert_eq!(symbol_bits(1), 0);
        assert_eq!(symbol_bits(2), 1);
        assert_eq!(symbol_bits(8), 3);
        assert_eq!(symbol_bits(9), 4);
        assert_eq!(symbol_bits(16), 4);
        assert_eq!(symbol_bits(256), 8);
    }

    /// A projection with `tau(5) = x` and `pi(2) = y` for the decode examples.
    fn decode_setup() -> (CoupledProjection, u32, u32) {
        let p = params(0.1, 100, 0);
        let proj = make_coupled_projection(0, &p, 0).unwrap();
        let (x, y) = (proj.tau(5), proj.pi(2));
        (proj, x, y)
    }

    #[test]
    fn decode_majority_per_bit() {
        let (proj, x, y) = decode_setup();
        assert_eq!(
            decode_bucket(10, &[10, 0, 10, 0, 10, 0], &proj, x, y, 8),
            Some((5, 2))
        );
        assert_eq!(decode_bucket(10, &[10, 5, 10, 0, 10, 0], &proj, x, y, 8), None);
        assert_eq!(decode_bucket(0, &[0; 6], &proj, x, y, 8), None);
        // inconsistent with the bucket
        assert_eq!(
            decode_bucket(10, &[10, 0, 10, 0, 10, 0], &proj, x ^ 1, y, 8),
            None
        );
        // u = v is never accepted
        let yy = proj.pi(5);
        assert_eq!(decode_bucket(10, &[10, 0, 10, 10, 0, 10], &proj, x, yy, 8), None);
    }

    #[test]
    fn decode_rejects_symbols_outside_alphabet() {
        let p = params(0.1, 100, 0);
        let proj = make_coupled_projection(0, &p, 0).unwrap();
        let (x, y) = (proj.tau(7), proj.pi(1));
        assert_eq!(decode_bucket(4, &[4, 4, 4, 4, 0, 0], &proj, x, y, 8), Some((7, 1)));
        assert_eq!(decode_bucket(4, &[4, 4, 4, 4, 0, 0], &proj, x, y, 7), None);
    }

    fn single_pair(u: u32, v: u32, m: usize, sigma: u32) -> (IntString, IntString) {
        (
            IntString::new(vec![u; m], sigma).unwrap(),
            IntString::new(vec![v; m], sigma).unwrap(),
        )
    }

    #[test]
    fn bucket_table_of_single_pair() {
        let (t, p) = single_pair(5, 2, 40, 8);
        let par = params(0.125, 40, 3);
        let mut checked = 0;
        for rep in 0..10 {
            let proj = make_coupled_projection(1, &par, rep).unwrap();
            let table = compute_bucket_table(&t, &p, &proj, Backend::Popcount).unwrap();
            let key = (proj.tau(5), proj.pi(2));
            if table.diagonal.contains(&key) {
                assert!(table.buckets.is_empty());
                continue;
            }
            checked += 1;
            assert_eq!(table.buckets.len(), 1);
            let b = &table.buckets[&key];
            assert_eq!(b.count, vec![40]);
            let want: Vec<CountVector> = (0..3)
                .map(|bit| vec![40 * (5 >> bit & 1)])
                .chain((0..3).map(|bit| vec![40 * (2 >> bit & 1)]))
                .collect();
            assert_eq!(b.planes, want);
            let bits: Vec<u32> = b.planes.iter().map(|v| v[0]).collect();
            assert_eq!(
                decode_bucket(b.count[0], &bits, &proj, key.0, key.1, 8),
                Some((5, 2))
            );
        }
        assert!(checked > 0);
    }

    #[test]
    fn bucket_table_of_identical_strings_is_zero() {
        let (t, _) = generate_instance(300, 300, 12, InstanceModel::Uniform, 2).unwrap();
        let p = t.slice(40..140);
        let par = params(0.25, 300, 1);
        let proj = make_coupled_projection(0, &par, 0).unwrap();
        let table = compute_bucket_table(&t, &p, &proj, Backend::Popcount).unwrap();
        for b in table.buckets.values() {
            assert_eq!(b.count[40], 0);
        }
    }

    #[test]
    fn bucket_counts_match_projected_alignment_matrix() {
        let (t, p) = generate_instance(400, 60, 12, InstanceModel::Uniform, 7).unwrap();
        let par = params(0.25, 400, 2);
        for (scale, rep) in [(0, 0), (1, 1), (2, 4)] {
            let proj = make_coupled_projection(scale, &par, rep).unwrap();
            let table = compute_bucket_table(&t, &p, &proj, Backend::Fft).unwrap();
            for j in (0..341).step_by(17) {
                let d = build_alignment_matrix(&t, &p, j).unwrap();
                let mut lost = 0u64;
                let mut want: BTreeMap<(u32, u32), u32> = BTreeMap::new();
                for (&(u, v), &c) in d.entries() {
                    let key = (proj.tau(u), proj.pi(v));
                    if table.diagonal.contains(&key) {
                        lost += c as u64;
                    } else {
                        *want.entry(key).or_default() += c;
                    }
                }
                let total: u64 = table.buckets.values().map(|b| b.count[j] as u64).sum();
                assert_eq!(total, d.total() - lost);
                for (key, b) in &table.buckets {
                    assert_eq!(b.count[j], want.get(key).copied().unwrap_or(0));
                    for plane in &b.planes {
                        assert!(plane[j] <= b.count[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_strings_give_empty_noise() {
        let (t, _) = generate_instance(600, 600, 9, InstanceModel::Uniform, 4).unwrap();
        let p = t.slice(0..600);
        for route in [Route::Direct, Route::Aggregated] {
            let par = RecoveryParams {
                route,
                ..params(0.25, 600, 1)
            };
            let d = construct_sparse_noise(&t, &p, &par).unwrap();
            assert_eq!(d.len(), 1);
            assert!(d[0].is_empty());
        }
    }

    #[test]
    fn single_pair_window_recovers_pair_across_seeds() {
        let m = 64;
        let (t, p) = single_pair(3, 11, m, 16);
        for seed in 0..20 {
            let par = params(0.125, m, seed);
            let d = construct_sparse_noise(&t, &p, &par).unwrap();
            assert_eq!(d[0].entries(), &[NoiseEntry { u: 3, v: 11, value: m as u32 }]);
        }
    }

    #[test]
    fn routes_agree() {
        for (seed, model, sigma) in [
            (1, InstanceModel::Uniform, 6),
            (2, InstanceModel::PlantedHeavy, 8),
            (3, InstanceModel::Uniform, 40),
        ] {
            let (t, p) = generate_instance(700, 64, sigma, model, seed).unwrap();
            let base = params(0.25, 700, seed);
            let direct = construct_sparse_noise(
                &t,
                &p,
                &RecoveryParams {
                    route: Route::Direct,
                    reps: 4,
                    ..base
                },
            )
            .unwrap();
            let aggregated = construct_sparse_noise(
                &t,
                &p,
                &RecoveryParams {
                    route: Route::Aggregated,
                    reps: 4,
                    ..base
                },
            )
            .unwrap();
            assert_eq!(direct, aggregated);
        }
    }

    #[test]
    fn blocked_pair_counts_match_whole() {
        let (t, p) = generate_instance(500, 50, 7, InstanceModel::Uniform, 5).unwrap();
        let par = params(0.25, 500, 8);
        let whole = PairCounts::compute(&t, &p, 0..451, Backend::Fft).unwrap();
        let all = construct_from_pair_counts(&whole, &par).unwrap();
        let mut pieces = Vec::new();
        for r in [0..100, 100..101, 101..451] {
            let pc = PairCounts::compute(&t, &p, r, Backend::Popcount).unwrap();
            pieces.extend(construct_from_pair_counts(&pc, &par).unwrap());
        }
        assert_eq!(all, pieces);
        for (j, d) in all.iter().enumerate().step_by(50) {
            let exact = build_alignment_matrix(&t, &p, j).unwrap();
            for (i, &(u, v)) in whole.pairs().iter().enumerate() {
                assert_eq!(whole.counts()[i][j], exact.get(u, v));
            }
            assert!(d.len() <= par.capacity());
        }
    }

    #[test]
    fn noise_bound_on_random_instance() {
        let (t, p) = generate_instance(8192, 512, 16, InstanceModel::Uniform, 1).unwrap();
        let par = params(0.1, 8192, 1);
        let d = construct_sparse_noise(&t, &p, &par).unwrap();
        let bound_scale = b_const() * 0.1;
        let mut good = 0;
        let mut total = 0;
        for (j, dj) in d.iter().enumerate().step_by(31) {
            let exact = build_alignment_matrix(&t, &p, j).unwrap();
            let dd = exact.total() as f64;
            assert!(dj.len() <= 48);
            for e in dj.entries() {
                assert!(e.u != e.v && e.value as usize <= 512);
            }
            total += 1;
            if dj.squared_error(&exact) as f64 <= bound_scale * dd * dd {
                good += 1;
            }
        }
        assert!(good * 10 >= total * 9, "{good}/{total}");
    }

    #[test]
    fn more_repetitions_never_raise_candidates() {
        // before filtering: use a capacity large enough that nothing is cut
        let (t, p) = generate_instance(300, 40, 3, InstanceModel::Uniform, 3).unwrap();
        let pc = PairCounts::compute(&t, &p, 0..261, Backend::Auto).unwrap();
        let base = params(0.5, 300, 4);
        assert!(base.capacity() >= 6);
        let few = construct_from_pair_counts(&pc, &RecoveryParams { reps: 2, ..base }).unwrap();
        let many = construct_from_pair_counts(&pc, &RecoveryParams { reps: 8, ..base }).unwrap();
        for (a, b) in few.iter().zip(&many) {
            for e in a.entries() {
                let later = b.get(e.u, e.v);
                assert!(later > 0 && later <= e.value);
            }
        }
    }

    #[test]
    fn filtering_keeps_largest_with_pair_tie_break() {
        let e = |u, v, value| NoiseEntry { u, v, value };
        let d = filter_largest(vec![e(3, 1, 5), e(0, 2, 9), e(1, 0, 5), e(2, 0, 5)], 3).unwrap();
        assert_eq!(d.entries(), &[e(0, 2, 9), e(1, 0, 5), e(2, 0, 5)]);
    }

    #[test]
    fn dprime_csv_layout() {
        let d = vec![
            SparseNoiseMatrix::from_entries(vec![NoiseEntry { u: 1, v: 2, value: 3 }], 4).unwrap(),
            SparseNoiseMatrix::empty(4),
        ];
        let mut buf = Vec::new();
        write_dprime_csv(&mut buf, &d, 10).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "window,u,v,dprime\n10,1,2,3\n");
    }
}
