//! Baseline estimator: average the Hamming distances of `O(1/eps^2)`
//! pairwise independent binary projections.

use crate::correlation::{Backend, BitMask, Correlator};
use crate::error::Result;
use crate::hash::{member_bit, BaseBitsTable, XorTreeFamily};
use crate::params::{check_epsilon, check_reps};
use crate::seed;
use crate::stats::median_profile;
use crate::text_model::{common_sigma, window_count, DistanceProfile, IntString};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KarloffParams {
    pub epsilon: f64,
    pub k: u64,
    pub seed: u64,
    pub backend: Backend,
}

impl KarloffParams {
    /// `k = ceil(2 / eps^2)` rounded up to a power of two.
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let k = ((2.0 / (epsilon * epsilon)).ceil() as u64).next_power_of_two();
        Ok(Self {
            epsilon,
            k,
            seed,
            backend: Backend::Auto,
        })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

/// Binary images of text and pattern under family member `i`.
pub fn project_member(
    table: &BaseBitsTable<'_>,
    selector: u64,
    text: &IntString,
    pattern: &IntString,
) -> (BitMask, BitMask) {
    let t = text.symbols();
    let p = pattern.symbols();
    (
        BitMask::from_fn(t.len(), |q| member_bit(table.get(t[q]), selector)),
        BitMask::from_fn(p.len(), |q| member_bit(table.get(p[q]), selector)),
    )
}

pub(crate) fn symbol_table<'a>(
    family: &'a XorTreeFamily,
    text: &IntString,
    pattern: &IntString,
) -> BaseBitsTable<'a> {
    let sigma = common_sigma(text, pattern);
    family.table(
        sigma,
        text.present_symbols()
            .into_iter()
            .chain(pattern.present_symbols()),
    )
}

/// `sum over members i` of `HAM(h_i(T_j), h_i(P))` for every window `j`.
pub fn projected_hamming_sum(
    text: &IntString,
    pattern: &IntString,
    family: &XorTreeFamily,
    backend: Backend,
) -> Result<Vec<u64>> {
    window_count(text, pattern)?;
    let corr = Correlator::new(text.len(), pattern.len(), backend)?;
    let table = symbol_table(family, text, pattern);
    corr.hamming_sum(family.k() as usize, |i| {
        project_member(&table, family.member_selector(i as u64), text, pattern)
    })
}

/// Per-member projected Hamming profiles `x_i`, one vector per member.
pub fn projected_hamming_members(
    text: &IntString,
    pattern: &IntString,
    family: &XorTreeFamily,
    backend: Backend,
) -> Result<Vec<Vec<u32>>> {
    window_count(text, pattern)?;
    let corr = Correlator::new(text.len(), pattern.len(), backend)?;
    let table = symbol_table(family, text, pattern);
    (0..family.k())
        .map(|i| {
            let (t, p) = project_member(&table, family.member_selector(i), text, pattern);
            corr.hamming_of_masks(&t, &p)
        })
        .collect()
}

/// One execution: `2 * sum_i x_i / k` per window.
pub fn karloff_profile_single(
    text: &IntString,
    pattern: &IntString,
    params: &KarloffParams,
) -> Result<DistanceProfile> {
    check_epsilon(params.epsilon)?;
    let family = XorTreeFamily::new(params.k, seed::derive(params.seed, &[seed::ROLE_FAMILY]))?;
    let sums = projected_hamming_sum(text, pattern, &family, params.backend)?;
    let k = params.k as f64;
    Ok(DistanceProfile::estimate(
        sums.into_iter().map(|s| 2.0 * s as f64 / k).collect(),
    ))
}

/// Seed used by execution `exec` of a median run.
pub fn execution_seed(seed: u64, exec: usize) -> u64 {
    seed::derive(seed, &[seed::ROLE_EXECUTION, exec as u64])
}

/// Per-window median of `reps` independent executions.
pub fn karloff_profile(
    text: &IntString,
    pattern: &IntString,
    epsilon: f64,
    seed: u64,
    reps: usize,
) -> Result<DistanceProfile> {
    karloff_profile_with(text, pattern, &KarloffParams::new(epsilon, seed)?, reps)
}

pub fn karloff_profile_with(
    text: &IntString,
    pattern: &IntString,
    params: &KarloffParams,
    reps: usize,
) -> Result<DistanceProfile> {
    check_reps(reps)?;
    let runs = (0..reps)
        .map(|e| {
            let p = KarloffParams {
                seed: execution_seed(params.seed, e),
                ..*params
            };
            karloff_profile_single(text, pattern, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    median_profile(&runs)
}
