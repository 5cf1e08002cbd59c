use proptest::prelude::*;

use approx_hamming::approx::{
    approx_profile_single, correction_by_enumeration, correction_term, estimate_with_dprime,
    ApproxParams,
};
use approx_hamming::correlation::{Backend, BitMask, Correlator};
use approx_hamming::exact::{hamming_profile_convolution_with, hamming_profile_naive, ConvolutionOptions};
use approx_hamming::hash::{beta_by_enumeration, XorTreeFamily};
use approx_hamming::karloff::{karloff_profile_single, KarloffParams};
use approx_hamming::sparse_recovery::{
    compute_bucket_table, construct_sparse_noise, make_coupled_projection, RecoveryParams, Route,
};
use approx_hamming::stats::median;
use approx_hamming::text_model::{
    build_alignment_matrix, IntString, NoiseEntry, SparseNoiseMatrix,
};

/// A text, a pattern no longer than it, and their alphabet.
fn instance(max_n: usize, max_sigma: u32) -> impl Strategy<Value = (IntString, IntString)> {
    (1..=max_sigma, 1..=max_n).prop_flat_map(move |(sigma, n)| {
        (
            proptest::collection::vec(0..sigma, n),
            proptest::collection::vec(0..sigma, 1..=n),
        )
            .prop_map(move |(t, p)| {
                (IntString::new(t, sigma).unwrap(), IntString::new(p, sigma).unwrap())
            })
    })
}

fn bits(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..2, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_equals_naive((t, p) in instance(200, 12)) {
        let naive = hamming_profile_naive(&t, &p).unwrap();
        for backend in [Backend::Fft, Backend::Popcount] {
            let opts = ConvolutionOptions { backend, ..Default::default() };
            prop_assert_eq!(&hamming_profile_convolution_with(&t, &p, opts).unwrap(), &naive);
        }
    }

    #[test]
    fn mask_correlations_agree(t in bits(1..=300), p in bits(1..=300)) {
        prop_assume!(p.len() <= t.len());
        let (tm, pm) = (BitMask::from_bits(&t), BitMask::from_bits(&p));
        let fft = Correlator::new(t.len(), p.len(), Backend::Fft).unwrap();
        let pop = Correlator::new(t.len(), p.len(), Backend::Popcount).unwrap();
        let and = pop.count_aligned_ones(&tm, &pm).unwrap();
        prop_assert_eq!(&fft.count_aligned_ones(&tm, &pm).unwrap(), &and);
        let ham = pop.hamming_of_masks(&tm, &pm).unwrap();
        prop_assert_eq!(&fft.hamming_of_masks(&tm, &pm).unwrap(), &ham);
        for j in 0..and.len() {
            let direct = (0..p.len()).filter(|&i| t[j + i] == 1 && p[i] == 1).count() as u32;
            prop_assert_eq!(and[j], direct);
            let diff = (0..p.len()).filter(|&i| t[j + i] != p[i]).count() as u32;
            prop_assert_eq!(ham[j], diff);
        }
    }

    #[test]
    fn beta_matches_enumeration(log_k in 1u32..=8, seed: u64, u in 0u32..5000, v in 0u32..5000) {
        let f = XorTreeFamily::new(1 << log_k, seed).unwrap();
        let b = f.beta(u, v);
        prop_assert_eq!(b, beta_by_enumeration(&f, u, v).unwrap());
        prop_assert_eq!(b, f.beta(v, u));
    }

    #[test]
    fn correction_matches_enumeration(
        log_k in 1u32..=7,
        seed: u64,
        raw in proptest::collection::btree_map((0u32..40, 0u32..40), 1u32..1000, 0..20),
    ) {
        let f = XorTreeFamily::new(1 << log_k, seed).unwrap();
        let entries: Vec<NoiseEntry> = raw
            .into_iter()
            .filter(|((u, v), _)| u != v)
            .map(|((u, v), value)| NoiseEntry { u, v, value })
            .collect();
        let d = SparseNoiseMatrix::from_entries(entries, 20).unwrap();
        let c = correction_term(&d, &f);
        prop_assert_eq!(c, correction_by_enumeration(&d, &f).unwrap());
        prop_assert_eq!((2.0 * c).fract(), 0.0);
    }

    #[test]
    fn perfect_sketch_identity((t, p) in instance(120, 10), log_k in 1u32..=9, seed: u64) {
        let exact = hamming_profile_naive(&t, &p).unwrap();
        let dprime: Vec<SparseNoiseMatrix> = (0..exact.len())
            .map(|j| SparseNoiseMatrix::from_alignment(&build_alignment_matrix(&t, &p, j).unwrap()))
            .collect();
        let f = XorTreeFamily::new(1 << log_k, seed).unwrap();
        let est = estimate_with_dprime(&t, &p, &f, &dprime, Backend::Auto).unwrap();
        prop_assert_eq!(est.values(), exact.values());
    }

    #[test]
    fn median_lies_between_extremes(mut v in proptest::collection::vec(-1e6f64..1e6, 1..30)) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = median(&mut v);
        prop_assert!(lo <= m && m <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bucket_planes_bounded_by_counts((t, p) in instance(150, 20), seed: u64, scale in 0u32..=2, rep in 0usize..4) {
        let params = RecoveryParams::new(0.25, t.len(), seed).unwrap();
        let proj = make_coupled_projection(scale, &params, rep).unwrap();
        let table = compute_bucket_table(&t, &p, &proj, Backend::Popcount).unwrap();
        for (key, b) in &table.buckets {
            prop_assert!(!table.diagonal.contains(key));
            for plane in &b.planes {
                for (x, c) in plane.iter().zip(&b.count) {
                    prop_assert!(x <= c);
                }
            }
        }
    }

    #[test]
    fn noise_matrices_are_sound((t, p) in instance(200, 12), seed: u64, eps in prop_oneof![Just(0.5), Just(0.25), Just(0.1)]) {
        let base = RecoveryParams { reps: 3, ..RecoveryParams::new(eps, t.len(), seed).unwrap() };
        let agg = construct_sparse_noise(&t, &p, &base).unwrap();
        let direct = construct_sparse_noise(&t, &p, &RecoveryParams { route: Route::Direct, ..base }).unwrap();
        prop_assert_eq!(&agg, &direct);
        for d in &agg {
            prop_assert!(d.len() <= base.capacity());
            for e in d.entries() {
                prop_assert!(e.u != e.v);
                prop_assert!(e.value as usize <= p.len());
            }
        }
    }

    #[test]
    fn estimates_are_nonnegative_and_exact_on_matches((t, p) in instance(200, 8), seed: u64) {
        let exact = hamming_profile_naive(&t, &p).unwrap();
        let ap = ApproxParams { reps: 2, ..ApproxParams::new(0.25, t.len(), seed).unwrap() };
        let a = approx_profile_single(&t, &p, &ap, 0).unwrap();
        let k = karloff_profile_single(&t, &p, &KarloffParams::new(0.25, seed).unwrap()).unwrap();
        for j in 0..exact.len() {
            prop_assert!(a.values()[j] >= 0.0 && k.values()[j] >= 0.0);
            if exact.values()[j] == 0.0 {
                prop_assert_eq!(a.values()[j], 0.0);
                prop_assert_eq!(k.values()[j], 0.0);
            }
        }
    }
}
