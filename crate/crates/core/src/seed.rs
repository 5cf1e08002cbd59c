//! Counter-based seed derivation.
//!
//! Every random object in the crate takes its seed from `(master, role, index...)`
//! through [`derive`], so a result never depends on the order in which work is
//! scheduled.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a single counter.
#[inline]
pub fn mix(seed: u64, t: u64) -> u64 {
    mix64(seed ^ mix64(t.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Folds a path of counters into `seed`.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &t| mix(s, t))
}

// Role tags keep streams for different purposes apart.
pub(crate) const ROLE_EXECUTION: u64 = 0x4558_4543;
pub(crate) const ROLE_FAMILY: u64 = 0x4641_4d49;
pub(crate) const ROLE_RECOVERY: u64 = 0x5245_4356;
pub(crate) const ROLE_INSTANCE: u64 = 0x494e_5354;
