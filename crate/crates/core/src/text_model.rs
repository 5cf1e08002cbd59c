//! Strings over an integer alphabet, distance profiles, and the per-window
//! alignment matrix used as a test oracle.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Largest supported alphabet.
pub const MAX_SIGMA: u32 = 1 << 20;

/// A text or pattern: symbols drawn from `[0, sigma)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntString {
    symbols: Vec<u32>,
    sigma: u32,
}

impl IntString {
    pub fn new(symbols: Vec<u32>, sigma: u32) -> Result<Self> {
        if sigma == 0 {
            return Err(Error::InvalidInstance("alphabet must be non-empty".into()));
        }
        if sigma > MAX_SIGMA {
            return Err(Error::AlphabetTooLarge { sigma, cap: MAX_SIGMA });
        }
        if let Some((pos, &s)) = symbols.iter().enumerate().find(|(_, &s)| s >= sigma) {
            return Err(Error::InvalidInstance(format!(
                "symbol {s} at position {pos} is outside [0, {sigma})"
            )));
        }
        Ok(Self { symbols, sigma })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Sorted distinct symbols that actually occur.
    pub fn present_symbols(&self) -> Vec<u32> {
        let mut seen = vec![false; self.sigma as usize];
        for &s in &self.symbols {
            seen[s as usize] = true;
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(s, _)| s as u32)
            .collect()
    }

    /// A copy restricted to `range`, keeping the alphabet.
    pub fn slice(&self, range: std::ops::Range<usize>) -> IntString {
        IntString {
            symbols: self.symbols[range].to_vec(),
            sigma: self.sigma,
        }
    }
}

/// Alphabet shared by a text and a pattern.
pub fn common_sigma(text: &IntString, pattern: &IntString) -> u32 {
    text.sigma.max(pattern.sigma)
}

/// Number of alignments of `pattern` against `text`.
pub fn window_count(text: &IntString, pattern: &IntString) -> Result<usize> {
    crate::error::check_sizes(text.len(), pattern.len())?;
    Ok(text.len() - pattern.len() + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Exact,
    Estimate,
}

/// One value per alignment.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceProfile {
    values: Vec<f64>,
    kind: ProfileKind,
}

impl DistanceProfile {
    pub fn exact<I: IntoIterator<Item = u64>>(values: I) -> Self {
        Self {
            values: values.into_iter().map(|v| v as f64).collect(),
            kind: ProfileKind::Exact,
        }
    }

    pub fn estimate(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        Self {
            values,
            kind: ProfileKind::Estimate,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rounds every value to the nearest integer (ties away from zero).
    pub fn rounded(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.round()).collect(),
            kind: self.kind,
        }
    }
}

/// Exact per-window counts `d[u,v]` of text symbol `u` aligned with pattern
/// symbol `v`, `u != v`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignmentMatrix {
    entries: BTreeMap<(u32, u32), u32>,
    total: u64,
}

impl AlignmentMatrix {
    pub fn get(&self, u: u32, v: u32) -> u32 {
        self.entries.get(&(u, v)).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> &BTreeMap<(u32, u32), u32> {
        &self.entries
    }

    /// Hamming distance of the window.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row_weight(&self, u: u32) -> u64 {
        self.entries
            .range((u, 0)..=(u, u32::MAX))
            .map(|(_, &c)| c as u64)
            .sum()
    }

    pub fn col_weight(&self, v: u32) -> u64 {
        self.entries
            .iter()
            .filter(|((_, b), _)| *b == v)
            .map(|(_, &c)| c as u64)
            .sum()
    }
}

/// Builds the alignment matrix of window `j` directly in `O(m)`.
pub fn build_alignment_matrix(
    text: &IntString,
    pattern: &IntString,
    j: usize,
) -> Result<AlignmentMatrix> {
    let windows = window_count(text, pattern)?;
    if j >= windows {
        return Err(Error::IndexOutOfRange {
            what: "alignment",
            index: j,
            limit: windows,
        });
    }
    let mut out = AlignmentMatrix::default();
    let window = &text.symbols[j..j + pattern.len()];
    for (&u, &v) in window.iter().zip(&pattern.symbols) {
        if u != v {
            *out.entries.entry((u, v)).or_insert(0) += 1;
            out.total += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseEntry {
    pub u: u32,
    pub v: u32,
    pub value: u32,
}

/// Sparse approximation `D'` of one window's alignment matrix, holding at
/// most `capacity` non-zero off-diagonal entries, sorted by `(u, v)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseNoiseMatrix {
    entries: Vec<NoiseEntry>,
    capacity: usize,
}

impl SparseNoiseMatrix {
    pub fn empty(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
        }
    }

    /// Zero values are dropped; duplicate or diagonal keys and overflow are
    /// rejected.
    pub fn from_entries(mut entries: Vec<NoiseEntry>, capacity: usize) -> Result<Self> {
        entries.retain(|e| e.value > 0);
        entries.sort_unstable_by_key(|e| (e.u, e.v));
        if let Some(e) = entries.iter().find(|e| e.u == e.v) {
            return Err(Error::Parameter(format!(
                "diagonal entry ({}, {}) in noise matrix",
                e.u, e.v
            )));
        }
        if entries.windows(2).any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::Parameter("duplicate key in noise matrix".into()));
        }
        if entries.len() > capacity {
            return Err(Error::Parameter(format!(
                "{} entries exceed capacity {capacity}",
                entries.len()
            )));
        }
        Ok(Self { entries, capacity })
    }

    /// The exact matrix itself, with capacity equal to its support.
    pub fn from_alignment(d: &AlignmentMatrix) -> Self {
        let entries: Vec<NoiseEntry> = d
            .entries
            .iter()
            .map(|(&(u, v), &value)| NoiseEntry { u, v, value })
            .collect();
        let capacity = entries.len();
        Self { entries, capacity }
    }

    pub fn entries(&self) -> &[NoiseEntry] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, u: u32, v: u32) -> u32 {
        self.entries
            .binary_search_by_key(&(u, v), |e| (e.u, e.v))
            .map(|i| self.entries[i].value)
            .unwrap_or(0)
    }

    /// `sum over all (u, v) of (d[u,v] - d'[u,v])^2`.
    pub fn squared_error(&self, d: &AlignmentMatrix) -> u64 {
        let mut err: u64 = 0;
        for (&(u, v), &c) in d.entries() {
            let diff = c as i64 - self.get(u, v) as i64;
            err += (diff * diff) as u64;
        }
        for e in &self.entries {
            if d.get(e.u, e.v) == 0 {
                err += (e.value as u64).pow(2);
            }
        }
        err
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceModel {
    Uniform,
    /// Uniform background, plus a single-symbol block covering a quarter of
    /// the text and a single-symbol half of the pattern, so windows inside
    /// the block share one dominant mismatch pair.
    PlantedHeavy,
}

impl std::str::FromStr for InstanceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "planted_heavy" | "planted-heavy" => Ok(Self::PlantedHeavy),
            other => Err(Error::Parameter(format!("unknown instance model `{other}`"))),
        }
    }
}

/// Location of the planted structure, for tests and diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlantedBlocks {
    pub text_block: std::ops::Range<usize>,
    pub text_symbol: u32,
    pub pattern_block: std::ops::Range<usize>,
    pub pattern_symbol: u32,
}

pub fn generate_instance(
    n: usize,
    m: usize,
    sigma: u32,
    model: InstanceModel,
    seed: u64,
) -> Result<(IntString, IntString)> {
    generate_instance_detailed(n, m, sigma, model, seed).map(|(t, p, _)| (t, p))
}

pub fn generate_instance_detailed(
    n: usize,
    m: usize,
    sigma: u32,
    model: InstanceModel,
    seed: u64,
) -> Result<(IntString, IntString, Option<PlantedBlocks>)> {
    if m == 0 || m > n {
        return Err(Error::InvalidInstance(format!(
            "need 1 <= m <= n, got n = {n}, m = {m}"
        )));
    }
    if sigma < 1 {
        return Err(Error::InvalidInstance("sigma must be at least 1".into()));
    }
    if sigma > MAX_SIGMA {
        return Err(Error::AlphabetTooLarge { sigma, cap: MAX_SIGMA });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[seed::ROLE_INSTANCE]));
    let mut text: Vec<u32> = (0..n).map(|_| rng.gen_range(0..sigma)).collect();
    let mut pattern: Vec<u32> = (0..m).map(|_| rng.gen_range(0..sigma)).collect();

    let mut planted = None;
    if model == InstanceModel::PlantedHeavy && sigma >= 2 {
        let a = rng.gen_range(0..sigma);
        let b = (a + rng.gen_range(1..sigma)) % sigma;
        let len = (n / 4).max(m).min(n);
        let start = rng.gen_range(0..=n - len);
        text[start..start + len].fill(a);
        let plen = m.div_ceil(2);
        let pstart = rng.gen_range(0..=m - plen);
        pattern[pstart..pstart + plen].fill(b);
        planted = Some(PlantedBlocks {
            text_block: start..start + len,
            text_symbol: a,
            pattern_block: pstart..pstart + plen,
            pattern_symbol: b,
        });
    }
    Ok((
        IntString::new(text, sigma)?,
        IntString::new(pattern, sigma)?,
        planted,
    ))
}
