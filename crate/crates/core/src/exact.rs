//! Exact sliding-window Hamming distance.

use crate::correlation::{Backend, BitMask, Correlator};
use crate::error::{Error, Result};
use crate::text_model::{window_count, DistanceProfile, IntString};

/// Default alphabet cap for the per-symbol convolution matcher.
pub const DEFAULT_SIGMA_CAP: u32 = 4096;

/// `O(nm)` position-by-position comparison.
pub fn hamming_profile_naive(text: &IntString, pattern: &IntString) -> Result<DistanceProfile> {
    let windows = window_count(text, pattern)?;
    let t = text.symbols();
    let p = pattern.symbols();
    Ok(DistanceProfile::exact((0..windows).map(|j| {
        t[j..j + p.len()]
            .iter()
            .zip(p)
            .filter(|(a, b)| a != b)
            .count() as u64
    })))
}

#[derive(Clone, Copy, Debug)]
pub struct ConvolutionOptions {
    pub backend: Backend,
    pub sigma_cap: u32,
}

impl Default for ConvolutionOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            sigma_cap: DEFAULT_SIGMA_CAP,
        }
    }
}

/// `m` minus the number of matches, counted one symbol at a time.
pub fn hamming_profile_convolution(
    text: &IntString,
    pattern: &IntString,
) -> Result<DistanceProfile> {
    hamming_profile_convolution_with(text, pattern, ConvolutionOptions::default())
}

pub fn hamming_profile_convolution_with(
    text: &IntString,
    pattern: &IntString,
    opts: ConvolutionOptions,
) -> Result<DistanceProfile> {
    let windows = window_count(text, pattern)?;
    let sigma = text.sigma().max(pattern.sigma());
    if sigma > opts.sigma_cap {
        return Err(Error::AlphabetTooLarge {
            sigma,
            cap: opts.sigma_cap,
        });
    }
    let m = pattern.len();
    let in_text = text.present_symbols();
    let in_pattern = pattern.present_symbols();
    let shared: Vec<u32> = in_text
        .iter()
        .copied()
        .filter(|c| in_pattern.binary_search(c).is_ok())
        .collect();
    let corr = Correlator::new(text.len(), m, opts.backend)?;
    let text_masks: Vec<BitMask> = shared
        .iter()
        .map(|&c| BitMask::from_fn(text.len(), |i| text.symbols()[i] == c))
        .collect();
    let pattern_masks: Vec<BitMask> = shared
        .iter()
        .map(|&c| BitMask::from_fn(m, |i| pattern.symbols()[i] == c))
        .collect();
    let requests: Vec<(usize, usize)> = (0..shared.len()).map(|i| (i, i)).collect();
    let mut matches = vec![0u64; windows];
    for counts in corr.cross_counts(&text_masks, &pattern_masks, &requests)? {
        for (acc, c) in matches.iter_mut().zip(counts) {
            *acc += c as u64;
        }
    }
    Ok(DistanceProfile::exact(
        matches.into_iter().map(|c| m as u64 - c),
    ))
}
