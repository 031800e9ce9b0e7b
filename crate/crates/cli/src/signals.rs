//! Synthetic test signals and the rank statistic used by the sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exponential sine sweep from `f0` to `f1` Hz over `duration_s` seconds.
pub fn log_sweep(duration_s: f64, sample_rate: f64, f0: f64, f1: f64, amplitude: f64) -> Vec<f64> {
    let n = (duration_s * sample_rate).round() as usize;
    let growth = (f1 / f0).ln();
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            let phase = two_pi * f0 * duration_s / growth * ((t / duration_s * growth).exp() - 1.0);
            amplitude * phase.sin()
        })
        .collect()
}

/// Deterministic broadband test material: a few amplitude-modulated
/// harmonic voices over low-level noise.
pub fn voiced_test_signal(duration_s: f64, sample_rate: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * sample_rate).round() as usize;
    let voices: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(90.0..300.0), rng.gen_range(1.0..6.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            let voiced: f64 = voices
                .iter()
                .map(|&(f0, am, ph)| {
                    let env = 0.5 + 0.5 * (two_pi * am * t + ph).sin();
                    let tone: f64 = (1..=6).map(|h| (two_pi * f0 * h as f64 * t).sin() / h as f64).sum();
                    0.08 * env * tone
                })
                .sum();
            voiced + rng.gen_range(-0.02..0.02)
        })
        .collect()
}

/// Uniform white noise in `[-amplitude, amplitude)`.
pub fn white_noise(len: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-amplitude..amplitude)).collect()
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. `None` for fewer than two points or a
/// constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        vx += (a - mean).powi(2);
        vy += (b - mean).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
