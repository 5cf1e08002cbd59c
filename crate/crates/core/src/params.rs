//! Parameter checks shared by the estimators.

use crate::error::{Error, Result};

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::Parameter(format!(
            "epsilon {epsilon} outside (0, 1/2]"
        )));
    }
    Ok(())
}

/// `ceil(2 log2 n)`, at least 1.
pub fn default_reps(n: usize) -> usize {
    ((2.0 * (n.max(1) as f64).log2()).ceil() as usize).max(1)
}

pub fn check_reps(reps: usize) -> Result<()> {
    if reps < 1 {
        return Err(Error::Parameter("repetition count must be at least 1".into()));
    }
    Ok(())
}
