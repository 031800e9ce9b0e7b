use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spiketrum::mp_encoder::{lag_to_tau, Encoder};
use spiketrum::scalar::energy;
use spiketrum::{
    reconstruct_segment, BankConfig, EncoderConfig, KernelBank32, KernelBank64, SegmentBuffer, SegmentBuffer64,
    FFT_SIZE, SEGMENT_LEN,
};

fn bank() -> &'static KernelBank64 {
    static BANK: OnceLock<KernelBank64> = OnceLock::new();
    BANK.get_or_init(|| KernelBank64::build(&BankConfig::default()).unwrap())
}

fn config(k: usize) -> EncoderConfig {
    EncoderConfig {
        max_codes_per_segment: k,
        ..EncoderConfig::default()
    }
}

fn segment(seed: u64) -> SegmentBuffer64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..SEGMENT_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SegmentBuffer64::from_samples(&samples, 0).unwrap()
}

/// Best `(|r|, m, u)` by explicit modular inner products.
fn brute_best(data: &[f64], bank: &KernelBank64) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for k in bank.kernels() {
        for u in 0..FFT_SIZE {
            let r: f64 = k.samples.iter().enumerate().map(|(t, &p)| data[(u + t) % FFT_SIZE] * p).sum();
            if r.abs() > best.0 {
                best = (r.abs(), k.index, u);
            }
        }
    }
    best
}

#[test]
fn first_pick_is_the_global_argmax() {
    for seed in 0..2 {
        let buf = segment(seed);
        let code = spiketrum::encode_segment(&buf, bank(), &config(1)).unwrap()[0];
        let (best, m, u) = brute_best(&buf.data, bank());
        assert_eq!((code.kernel, code.tau), (m, lag_to_tau(u)));
        assert!((code.intensity.abs() - best).abs() < 1e-10);
    }
}

#[test]
fn more_codes_never_increase_the_error() {
    let buf = segment(7);
    let mut last = f64::INFINITY;
    for k in [1, 2, 4, 8, 16, 32] {
        let enc = Encoder::new(bank(), &config(k)).unwrap().encode_segment(&buf).unwrap();
        let err = energy(&enc.residual);
        assert!(err < last, "k={k}: {err} >= {last}");
        last = err;
    }
}

#[test]
fn prefixes_of_longer_runs_are_shorter_runs() {
    let buf = segment(8);
    let long = spiketrum::encode_segment(&buf, bank(), &config(12)).unwrap();
    let short = spiketrum::encode_segment(&buf, bank(), &config(5)).unwrap();
    assert_eq!(short[..], long[..5]);
}

#[test]
fn single_precision_alias_tracks_double() {
    let bank32 = KernelBank32::build(&BankConfig::default()).unwrap();
    let buf = segment(9);
    let buf32 = SegmentBuffer {
        data: buf.data.iter().map(|&x| x as f32).collect(),
        segment_index: 0,
        valid_samples: buf.valid_samples,
    };
    let a = spiketrum::encode_segment(&buf, bank(), &config(4)).unwrap();
    let b = spiketrum::encode_segment(&buf32, &bank32, &config(4)).unwrap();
    assert_eq!((a[0].kernel, a[0].tau), (b[0].kernel, b[0].tau));
    assert!((a[0].intensity - b[0].intensity as f64).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn residual_energy_drops_by_s_squared(seed in any::<u64>(), k in 1usize..10) {
        let buf = segment(seed);
        let enc = Encoder::new(bank(), &config(k)).unwrap().encode_segment(&buf).unwrap();
        let mut prev = enc.initial_energy;
        for (code, &e) in enc.codes.iter().zip(&enc.residual_energies) {
            prop_assert!((e - (prev - code.intensity * code.intensity)).abs() <= 1e-9 * enc.initial_energy);
            prop_assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn codes_plus_residual_telescope_to_the_input(seed in any::<u64>(), k in 1usize..10) {
        let buf = segment(seed);
        let enc = Encoder::new(bank(), &config(k)).unwrap().encode_segment(&buf).unwrap();
        let approx = reconstruct_segment(&enc.codes, bank()).unwrap();
        for ((a, r), x) in approx.iter().zip(&enc.residual).zip(&buf.data) {
            prop_assert!((a + r - x).abs() < 1e-10);
        }
    }

    #[test]
    fn encoding_is_deterministic(seed in any::<u64>()) {
        let samples: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..3 * SEGMENT_LEN + 17).map(|_| rng.gen_range(-0.5..0.5)).collect()
        };
        let a = spiketrum::encode_stream(&samples, bank(), &config(3)).unwrap();
        let b = spiketrum::encode_stream(&samples, bank(), &config(3)).unwrap();
        prop_assert_eq!(a.len(), 12);
        prop_assert_eq!(a, b);
    }
}
