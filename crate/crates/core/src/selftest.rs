//! Quick oracle-equivalence checks run by the `selftest` subcommand.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approx::{
    approx_profile_with, correction_by_enumeration, correction_term, estimate_with_dprime,
    ApproxParams,
};
use crate::correlation::Backend;
use crate::error::Result;
use crate::exact::{hamming_profile_convolution_with, hamming_profile_naive, ConvolutionOptions};
use crate::hash::{beta_by_enumeration, XorTreeFamily};
use crate::sparse_recovery::{construct_sparse_noise, RecoveryParams, Route};
use crate::text_model::{
    build_alignment_matrix, generate_instance, InstanceModel, NoiseEntry, SparseNoiseMatrix,
};

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<bool>,
}

pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| matches!(c.outcome, Ok(true)))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = match &c.outcome {
                Ok(true) => "ok".to_string(),
                Ok(false) => "FAILED".to_string(),
                Err(e) => format!("ERROR ({e})"),
            };
            let _ = writeln!(s, "{:<28} {status}", c.name);
        }
        s
    }
}

fn convolution_matches_naive() -> Result<bool> {
    for seed in 0..3 {
        let (t, p) = generate_instance(2048, 128, 32, InstanceModel::Uniform, seed)?;
        let naive = hamming_profile_naive(&t, &p)?;
        for backend in [Backend::Fft, Backend::Popcount] {
            let opts = ConvolutionOptions {
                backend,
                ..Default::default()
            };
            if hamming_profile_convolution_with(&t, &p, opts)? != naive {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn beta_matches_enumeration() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in [2u64, 8, 64, 1024] {
        for _ in 0..50 {
            let f = XorTreeFamily::new(k, rng.gen())?;
            let (u, v) = (rng.gen_range(0..1000), rng.gen_range(0..1000));
            if f.beta(u, v) != beta_by_enumeration(&f, u, v)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn correction_matches_enumeration() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let f = XorTreeFamily::new(64, rng.gen())?;
        let mut entries: Vec<NoiseEntry> = Vec::new();
        for _ in 0..rng.gen_range(0..16) {
            let (u, v) = (rng.gen_range(0..20), rng.gen_range(0..20));
            if u != v && !entries.iter().any(|e| (e.u, e.v) == (u, v)) {
                entries.push(NoiseEntry {
                    u,
                    v,
                    value: rng.gen_range(1..500),
                });
            }
        }
        let d = SparseNoiseMatrix::from_entries(entries, 16)?;
        if correction_term(&d, &f) != correction_by_enumeration(&d, &f)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn perfect_sketch_identity() -> Result<bool> {
    let (t, p) = generate_instance(1024, 64, 8, InstanceModel::Uniform, 3)?;
    let exact = hamming_profile_naive(&t, &p)?;
    let dprime = (0..exact.len())
        .map(|j| build_alignment_matrix(&t, &p, j).map(|d| SparseNoiseMatrix::from_alignment(&d)))
        .collect::<Result<Vec<_>>>()?;
    let f = XorTreeFamily::new(128, 4)?;
    let est = estimate_with_dprime(&t, &p, &f, &dprime, Backend::Auto)?;
    Ok(est.values() == exact.values())
}

fn recovery_routes_agree() -> Result<bool> {
    let (t, p) = generate_instance(600, 48, 10, InstanceModel::PlantedHeavy, 5)?;
    let base = RecoveryParams {
        reps: 3,
        ..RecoveryParams::new(0.25, t.len(), 6)?
    };
    let direct = construct_sparse_noise(&t, &p, &RecoveryParams { route: Route::Direct, ..base })?;
    let agg = construct_sparse_noise(&t, &p, &base)?;
    Ok(direct == agg)
}

fn approx_is_deterministic() -> Result<bool> {
    let (t, p) = generate_instance(800, 64, 8, InstanceModel::Uniform, 7)?;
    let params = ApproxParams {
        reps: 3,
        ..ApproxParams::new(0.25, t.len(), 8)?
    };
    Ok(approx_profile_with(&t, &p, &params)? == approx_profile_with(&t, &p, &params)?)
}

pub fn run() -> Report {
    let checks = vec![
        Check {
            name: "convolution = naive",
            outcome: convolution_matches_naive(),
        },
        Check {
            name: "beta = enumeration",
            outcome: beta_matches_enumeration(),
        },
        Check {
            name: "correction = enumeration",
            outcome: correction_matches_enumeration(),
        },
        Check {
            name: "perfect sketch identity",
            outcome: perfect_sketch_identity(),
        },
        Check {
            name: "recovery routes agree",
            outcome: recovery_routes_agree(),
        },
        Check {
            name: "approx determinism",
            outcome: approx_is_deterministic(),
        },
    ];
    Report { checks }
}
