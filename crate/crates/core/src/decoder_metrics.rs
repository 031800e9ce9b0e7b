//! Waveform reconstruction and encoding-quality metrics.
//!
//! Reconstruction is the linear superposition `x̂(t) = Σ s_i φ_{m_i}(t - τ_i)`
//! with each code placed at `segment * S + tau`. Kernel tails run past the
//! end of their segment into the following ones. The encoder works
//! circularly inside each 2048-sample window, so stream-level error can
//! differ from the sum of per-segment residuals; [`reconstruct_segment`]
//! gives the circular per-window inverse for which the two agree exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::itp_coder::{spikes_to_codes, ChannelMap, SpikeEvent};
use crate::kernel_bank::KernelBank;
use crate::mp_encoder::{tau_to_lag, Code};
use crate::scalar::{energy, Sample};
use crate::FFT_SIZE;

/// SNR reported when the reconstruction is exact.
pub const SNR_CAP_DB: f64 = 300.0;

/// Summary written as the report JSON. Fields a command cannot compute are
/// `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub code_count: Option<usize>,
    pub spike_count: usize,
    pub spikes_per_second: f64,
    pub residual_energy: Option<f64>,
    pub snr_code_db: Option<f64>,
    pub snr_spike_db: Option<f64>,
    pub entropy_bits: f64,
    pub sparsity_percent: f64,
}

/// Linear superposition of every code, in code order. Samples that land
/// outside `[0, output_length)` are dropped.
pub fn reconstruct_from_codes<T: Sample>(
    codes: &[Code<T>],
    bank: &KernelBank<T>,
    output_length: usize,
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); output_length];
    let segment_len = bank.segment_len() as i64;
    for code in codes {
        let kernel = bank.kernel(code.kernel).ok_or_else(|| {
            Error::param(format!("code references kernel {} but the bank has {}", code.kernel, bank.len()))
        })?;
        let start = code.segment as i64 * segment_len + code.tau as i64;
        let first = (-start).max(0) as usize;
        if first >= kernel.len() {
            continue;
        }
        let begin = (start + first as i64) as usize;
        if begin >= output_length {
            continue;
        }
        for (slot, &k) in out[begin..].iter_mut().zip(&kernel.samples[first..]) {
            *slot += code.intensity * k;
        }
    }
    Ok(out)
}

/// Circular reconstruction inside a single `FFT_SIZE` window, ignoring the
/// codes' segment indices. Inverts one segment's encoding exactly.
pub fn reconstruct_segment<T: Sample>(codes: &[Code<T>], bank: &KernelBank<T>) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); FFT_SIZE];
    for code in codes {
        let kernel = bank.kernel(code.kernel).ok_or_else(|| {
            Error::param(format!("code references kernel {} but the bank has {}", code.kernel, bank.len()))
        })?;
        let start = tau_to_lag(code.tau)?;
        for (t, &k) in kernel.samples.iter().enumerate() {
            out[(start + t) % FFT_SIZE] += code.intensity * k;
        }
    }
    Ok(out)
}

/// Reconstruction from a spike train: each spike contributes its channel's
/// level value times its kernel, starting at the spike time.
pub fn reconstruct_from_spikes<T: Sample>(
    spikes: &[SpikeEvent],
    bank: &KernelBank<T>,
    map: &ChannelMap,
    output_length: usize,
) -> Result<Vec<T>> {
    let codes = spikes_to_codes::<T>(spikes, map, bank.segment_len())?;
    reconstruct_from_codes(&codes, bank, output_length)
}

/// `10 log10(|x|^2 / |x - x̂|^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db<T: Sample>(original: &[T], reconstructed: &[T]) -> Result<f64> {
    if original.len() != reconstructed.len() {
        return Err(Error::param(format!(
            "length mismatch: original {} vs reconstructed {}",
            original.len(),
            reconstructed.len()
        )));
    }
    let signal = energy(original).as_f64();
    if signal.is_nan() || signal <= 0.0 {
        return Err(Error::param("reference signal has zero energy"));
    }
    let noise: f64 = original
        .iter()
        .zip(reconstructed)
        .map(|(&a, &b)| (a - b).as_f64().powi(2))
        .sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}

fn channel_counts(spikes: &[SpikeEvent], total_channels: usize) -> Vec<usize> {
    let mut counts = vec![0usize; total_channels];
    for s in spikes {
        if let Some(c) = counts.get_mut(s.channel as usize) {
            *c += 1;
        }
    }
    counts
}

/// Shannon entropy (bits) of the channel-usage distribution.
pub fn spike_entropy(spikes: &[SpikeEvent], total_channels: usize) -> f64 {
    let counts = channel_counts(spikes, total_channels);
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let entropy = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum::<f64>();
    entropy.max(0.0)
}

/// Percentage of channels that fired at least once.
pub fn sparsity_percent(spikes: &[SpikeEvent], total_channels: usize) -> f64 {
    if total_channels == 0 {
        return 0.0;
    }
    let active = channel_counts(spikes, total_channels)
        .iter()
        .filter(|&&c| c > 0)
        .count();
    100.0 * active as f64 / total_channels as f64
}

pub fn spikes_per_second(spike_count: usize, sample_count: usize, sample_rate: f64) -> f64 {
    if sample_count == 0 {
        return 0.0;
    }
    spike_count as f64 * sample_rate / sample_count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itp_coder::codes_to_spikes;
    use crate::kernel_bank::BankConfig;
    use crate::mp_encoder::{segment_stream, Encoder, EncoderConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn bank() -> &'static KernelBank<f64> {
        static BANK: OnceLock<KernelBank<f64>> = OnceLock::new();
        BANK.get_or_init(|| KernelBank::build(&BankConfig::default()).unwrap())
    }

    fn code(kernel: usize, tau: i32, s: f64, segment: usize) -> Code<f64> {
        Code { kernel, tau, intensity: s, segment, iteration: 0 }
    }

    #[test]
    fn empty_codes_reconstruct_to_silence() {
        let x = reconstruct_from_codes::<f64>(&[], bank(), 500).unwrap();
        assert_eq!(x, vec![0.0; 500]);
        let y = reconstruct_from_spikes::<f64>(&[], bank(), &ChannelMap::default(), 500).unwrap();
        assert_eq!(y, vec![0.0; 500]);
    }

    #[test]
    fn single_code_places_scaled_kernel() {
        let x = reconstruct_from_codes(&[code(7, 100, 0.5, 0)], bank(), 2000).unwrap();
        let k = &bank().kernels()[7].samples;
        assert!(x[..100].iter().all(|&v| v == 0.0));
        for t in 0..1353 {
            assert_eq!(x[100 + t], 0.5 * k[t]);
        }
        assert!(x[1453..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_range_samples_are_dropped() {
        let x = reconstruct_from_codes(&[code(2, -10, 1.0, 0), code(2, 50, 1.0, 1)], bank(), 800).unwrap();
        let k = &bank().kernels()[2].samples;
        assert_eq!(x[0], k[10]);
        assert_eq!(x[746], k[0] + k[746 + 10]);
        assert!(reconstruct_from_codes(&[code(40, 0, 1.0, 0)], bank(), 10).is_err());
    }

    #[test]
    fn spike_reconstruction_uses_level_value() {
        let spike = SpikeEvent { time: 2188, channel: 22 };
        let x = reconstruct_from_spikes::<f64>(&[spike], bank(), &ChannelMap::default(), 4000).unwrap();
        let k = &bank().kernels()[7].samples;
        assert_eq!(x[2188 + 40], 0.4115 * k[40]);
        assert_eq!(x[2187], 0.0);
    }

    #[test]
    fn segment_reconstruction_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..696).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let buf = crate::mp_encoder::SegmentBuffer::from_samples(&x, 0).unwrap();
        let config = EncoderConfig { max_codes_per_segment: 24, ..EncoderConfig::default() };
        let out = Encoder::new(bank(), &config).unwrap().encode_segment(&buf).unwrap();
        let recon = reconstruct_segment(&out.codes, bank()).unwrap();
        for ((orig, r), res) in buf.data.iter().zip(&recon).zip(&out.residual) {
            assert!((orig - r - res).abs() < 1e-9);
        }
    }

    #[test]
    fn spike_snr_does_not_beat_code_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x: Vec<f64> = (0..696 * 6).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let config = EncoderConfig { max_codes_per_segment: 16, ..EncoderConfig::default() };
        let codes = Encoder::new(bank(), &config).unwrap().encode_stream(&x).unwrap().codes;
        let map = ChannelMap::default();
        let spikes = codes_to_spikes(&codes, &map, 696).unwrap();
        let by_codes = reconstruct_from_codes(&codes, bank(), x.len()).unwrap();
        let by_spikes = reconstruct_from_spikes(&spikes, bank(), &map, x.len()).unwrap();
        assert!(snr_db(&x, &by_spikes).unwrap() <= snr_db(&x, &by_codes).unwrap());
        assert_eq!(segment_stream(&x, 696).unwrap().len(), 6);
    }

    #[test]
    fn snr_examples() {
        let x = vec![0.5, -1.0, 0.25, 2.0];
        assert_eq!(snr_db(&x, &x).unwrap(), SNR_CAP_DB);
        assert!((snr_db(&x, &[0.0; 4]).unwrap()).abs() < 1e-12);
        let half: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
        assert!((snr_db(&x, &half).unwrap() - 6.020599913279624).abs() < 1e-12);
        assert!(snr_db(&[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(snr_db(&x, &[0.0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        let one: Vec<SpikeEvent> = (0..10).map(|t| SpikeEvent { time: t, channel: 5 }).collect();
        assert_eq!(spike_entropy(&one, 120), 0.0);
        let uniform: Vec<SpikeEvent> = (0..120).map(|c| SpikeEvent { time: 0, channel: c }).collect();
        assert!((spike_entropy(&uniform, 120) - 120f64.log2()).abs() < 1e-12);
        assert!((spike_entropy(&uniform, 120) - 6.906890595608519).abs() < 1e-12);
        assert_eq!(spike_entropy(&[], 120), 0.0);
    }

    #[test]
    fn sparsity_examples() {
        let twelve: Vec<SpikeEvent> = (0..24).map(|i| SpikeEvent { time: i, channel: (i % 12) as u16 }).collect();
        assert_eq!(sparsity_percent(&twelve, 120), 10.0);
        assert_eq!(sparsity_percent(&[], 120), 0.0);
        let all: Vec<SpikeEvent> = (0..120).map(|c| SpikeEvent { time: 0, channel: c }).collect();
        assert_eq!(sparsity_percent(&all, 120), 100.0);
    }

    #[test]
    fn rate_arithmetic() {
        assert_eq!(spikes_per_second(1840, 80_000, 16_000.0), 368.0);
        assert_eq!(spikes_per_second(5, 0, 16_000.0), 0.0);
    }
}
