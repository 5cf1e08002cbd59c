//! The corrected estimator: projected Hamming distances plus a collision
//! correction from the sparse noise matrix, so that only the residual
//! `D - D'` contributes variance.

use rayon::prelude::*;

use crate::correlation::Backend;
use crate::error::{Error, Result};
use crate::hash::XorTreeFamily;
use crate::karloff::{execution_seed, projected_hamming_sum, symbol_table};
use crate::params::{check_epsilon, check_reps, default_reps};
use crate::seed;
use crate::sparse_recovery::{
    construct_from_pair_counts, effective_log2, window_blocks, PairCounts, RecoveryParams, Route,
    B_DENOMINATOR, B_NUMERATOR,
};
use crate::stats::median_profile;
use crate::text_model::{window_count, DistanceProfile, IntString, SparseNoiseMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxParams {
    pub epsilon: f64,
    pub epsilon_eff: f64,
    pub k: u64,
    pub reps: usize,
    pub seed: u64,
    pub backend: Backend,
    pub route: Route,
    /// Reuse the first execution's `D'` in every execution.
    pub share_dprime: bool,
}

/// `8b / epsilon_eff` rounded up to a power of two, for `epsilon_eff = 2^(10 - t)`.
pub fn family_size(t: u32) -> u64 {
    let num = (B_NUMERATOR as u128) << t;
    let den = (B_DENOMINATOR as u128) << 7; // 1024 / 8
    (num.div_ceil(den) as u64).next_power_of_two()
}

impl ApproxParams {
    pub fn new(epsilon: f64, n: usize, seed: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let t = effective_log2(epsilon)?;
        Ok(Self {
            epsilon,
            epsilon_eff: 1024.0 / 2f64.powi(t as i32),
            k: family_size(t),
            reps: default_reps(n),
            seed,
            backend: Backend::Auto,
            route: Route::default(),
            share_dprime: false,
        })
    }

    fn recovery(&self, n: usize, exec_seed: u64) -> Result<RecoveryParams> {
        Ok(RecoveryParams {
            route: self.route,
            backend: self.backend,
            ..RecoveryParams::new(self.epsilon, n, exec_seed)?
        })
    }

    fn family(&self, exec_seed: u64) -> Result<XorTreeFamily> {
        XorTreeFamily::new(self.k, seed::derive(exec_seed, &[seed::ROLE_FAMILY]))
    }
}

/// `1/2 * sum over entries of (2 beta(u, v) - k) d'(u, v)`.
pub fn correction_term(dprime: &SparseNoiseMatrix, family: &XorTreeFamily) -> f64 {
    let k = family.k() as i128;
    let twice: i128 = dprime
        .entries()
        .iter()
        .map(|e| (2 * family.beta(e.u, e.v) as i128 - k) * e.value as i128)
        .sum();
    twice as f64 / 2.0
}

/// [`correction_term`] by evaluating every member on every entry.
pub fn correction_by_enumeration(
    dprime: &SparseNoiseMatrix,
    family: &XorTreeFamily,
) -> Result<f64> {
    let mut twice: i128 = 0;
    for i in 0..family.k() {
        for e in dprime.entries() {
            let same = family.member_eval(i, e.u)? == family.member_eval(i, e.v)?;
            twice += if same { e.value as i128 } else { -(e.value as i128) };
        }
    }
    Ok(twice as f64 / 2.0)
}

fn combine(ham_sum: u64, correction: f64, k: u64) -> f64 {
    ((ham_sum as f64 + correction) / (k as f64 / 2.0)).max(0.0)
}

/// The estimate for every window from a given family and given `D'`.
pub fn estimate_with_dprime(
    text: &IntString,
    pattern: &IntString,
    family: &XorTreeFamily,
    dprime: &[SparseNoiseMatrix],
    backend: Backend,
) -> Result<DistanceProfile> {
    let windows = window_count(text, pattern)?;
    if dprime.len() != windows {
        return Err(Error::LengthMismatch {
            left: windows,
            right: dprime.len(),
        });
    }
    let ham = projected_hamming_sum(text, pattern, family, backend)?;
    let table = symbol_table(family, text, pattern);
    let k = family.k() as i128;
    Ok(DistanceProfile::estimate(
        ham.iter()
            .zip(dprime)
            .map(|(&h, d)| {
                let twice: i128 = d
                    .entries()
                    .iter()
                    .map(|e| (2 * table.beta(e.u, e.v) as i128 - k) * e.value as i128)
                    .sum();
                combine(h, twice as f64 / 2.0, family.k())
            })
            .collect(),
    ))
}

/// Estimates of the listed executions, one vector per execution.
fn run_executions(
    text: &IntString,
    pattern: &IntString,
    params: &ApproxParams,
    execs: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_epsilon(params.epsilon)?;
    window_count(text, pattern)?;
    let n = text.len();
    let seeds: Vec<u64> = execs.iter().map(|&e| execution_seed(params.seed, e)).collect();
    let families = seeds
        .iter()
        .map(|&s| params.family(s))
        .collect::<Result<Vec<_>>>()?;
    let mut estimates = families
        .iter()
        .map(|f| projected_hamming_sum(text, pattern, f, params.backend))
        .map(|h| h.map(|v| v.into_iter().map(|x| x as f64).collect::<Vec<f64>>()))
        .collect::<Result<Vec<_>>>()?;
    let recovery: Vec<RecoveryParams> = seeds
        .iter()
        .map(|&s| params.recovery(n, s))
        .collect::<Result<_>>()?;
    let tables: Vec<_> = families
        .iter()
        .map(|f| symbol_table(f, text, pattern))
        .collect();
    let k = params.k as i128;

    let correct = |e: usize, block_start: usize, dprime: &[SparseNoiseMatrix], est: &mut [f64]| {
        for (off, d) in dprime.iter().enumerate() {
            let twice: i128 = d
                .entries()
                .iter()
                .map(|en| (2 * tables[e].beta(en.u, en.v) as i128 - k) * en.value as i128)
                .sum();
            let slot = &mut est[block_start + off];
            *slot = combine(*slot as u64, twice as f64 / 2.0, params.k);
        }
    };

    match params.route {
        Route::Direct => {
            let shared = if params.share_dprime {
                Some(crate::sparse_recovery::construct_sparse_noise(
                    text,
                    pattern,
                    &recovery[0],
                )?)
            } else {
                None
            };
            for (e, est) in estimates.iter_mut().enumerate() {
                let own;
                let dprime = match &shared {
                    Some(d) => d,
                    None => {
                        own = crate::sparse_recovery::construct_sparse_noise(
                            text,
                            pattern,
                            &recovery[e],
                        )?;
                        &own
                    }
                };
                correct(e, 0, dprime, est);
            }
        }
        Route::Aggregated => {
            for block in window_blocks(text, pattern)? {
                let pc = PairCounts::compute(text, pattern, block.clone(), params.backend)?;
                if params.share_dprime {
                    let d = construct_from_pair_counts(&pc, &recovery[0])?;
                    for (e, est) in estimates.iter_mut().enumerate() {
                        correct(e, block.start, &d, est);
                    }
                } else {
                    estimates
                        .par_iter_mut()
                        .zip(&recovery)
                        .enumerate()
                        .try_for_each(|(e, (est, r))| -> Result<()> {
                            let d = construct_from_pair_counts(&pc, r)?;
                            correct(e, block.start, &d, est);
                            Ok(())
                        })?;
                }
            }
        }
    }
    Ok(estimates)
}

/// One execution, seeded by `(params.seed, exec_index)`.
pub fn approx_profile_single(
    text: &IntString,
    pattern: &IntString,
    params: &ApproxParams,
    exec_index: usize,
) -> Result<DistanceProfile> {
    let mut runs = run_executions(text, pattern, params, &[exec_index])?;
    Ok(DistanceProfile::estimate(runs.pop().expect("one execution")))
}

/// Per-window median of `reps` executions.
pub fn approx_profile(
    text: &IntString,
    pattern: &IntString,
    epsilon: f64,
    seed: u64,
    reps: usize,
) -> Result<DistanceProfile> {
    let params = ApproxParams {
        reps,
        ..ApproxParams::new(epsilon, text.len(), seed)?
    };
    approx_profile_with(text, pattern, &params)
}

pub fn approx_profile_with(
    text: &IntString,
    pattern: &IntString,
    params: &ApproxParams,
) -> Result<DistanceProfile> {
    check_reps(params.reps)?;
    let execs: Vec<usize> = (0..params.reps).collect();
    let runs = run_executions(text, pattern, params, &execs)?;
    let runs: Vec<DistanceProfile> = runs.into_iter().map(DistanceProfile::estimate).collect();
    median_profile(&runs)
}

/// The `D'` used by execution `exec_index`.
pub fn execution_dprime(
    text: &IntString,
    pattern: &IntString,
    params: &ApproxParams,
    exec_index: usize,
) -> Result<Vec<SparseNoiseMatrix>> {
    let r = params.recovery(text.len(), execution_seed(params.seed, exec_index))?;
    crate::sparse_recovery::construct_sparse_noise(text, pattern, &r)
}
