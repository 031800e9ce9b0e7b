//! Intensity-to-place coding.
//!
//! Every kernel owns one output channel per intensity level. A code fires
//! the channel of its kernel whose level is nearest to `|s|`, delayed by its
//! shift within the segment.

mod aer;

pub use aer::{
    read_aer_binary, read_aer_text, write_aer_binary, write_aer_text, SpikeTrain, AER_MAGIC,
    AER_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp_encoder::Code;
use crate::scalar::Sample;
use crate::KERNEL_COUNT;

/// Center intensities of the three per-kernel channels.
pub const DEFAULT_LEVELS: [f64; 3] = [0.0065, 0.4115, 25.8744];

/// One output event: absolute sample time and channel id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub time: u64,
    pub channel: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMap {
    levels: Vec<f64>,
    kernel_count: usize,
}

impl Default for ChannelMap {
    fn default() -> Self {
        ChannelMap {
            levels: DEFAULT_LEVELS.to_vec(),
            kernel_count: KERNEL_COUNT,
        }
    }
}

impl ChannelMap {
    pub fn new(levels: Vec<f64>, kernel_count: usize) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::param("intensity levels must be positive and finite"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("intensity levels must be strictly increasing"));
        }
        if kernel_count == 0 || kernel_count * levels.len() > u16::MAX as usize {
            return Err(Error::param(format!(
                "{kernel_count} kernels x {} levels does not fit a 16-bit channel id",
                levels.len()
            )));
        }
        Ok(ChannelMap { levels, kernel_count })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn channels_per_kernel(&self) -> usize {
        self.levels.len()
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_count
    }

    pub fn total_channels(&self) -> usize {
        self.kernel_count * self.levels.len()
    }

    /// `m * N + level`.
    pub fn channel_of(&self, kernel: usize, level: usize) -> Result<u16> {
        if kernel >= self.kernel_count || level >= self.levels.len() {
            return Err(Error::param(format!(
                "(kernel {kernel}, level {level}) outside [0, {}) x [0, {})",
                self.kernel_count,
                self.levels.len()
            )));
        }
        Ok((kernel * self.levels.len() + level) as u16)
    }

    /// Inverse of [`channel_of`](Self::channel_of).
    pub fn split_channel(&self, channel: u16) -> Result<(usize, usize)> {
        let ch = channel as usize;
        if ch >= self.total_channels() {
            return Err(Error::param(format!(
                "channel {ch} outside [0, {})",
                self.total_channels()
            )));
        }
        Ok((ch / self.levels.len(), ch % self.levels.len()))
    }

    /// Nearest level to `|s|` by linear distance; ties go to the lower level.
    ///
    /// One subtractor per level produces `||s| - C_i|`; a chain of
    /// comparators keeps the running minimum and only replaces it on a
    /// strictly smaller difference.
    pub fn quantize_intensity<T: Sample>(&self, s: T) -> usize {
        let magnitude = s.abs().as_f64();
        let diffs = self.levels.iter().map(|&c| (magnitude - c).abs());
        let mut winner = 0;
        let mut winner_diff = f64::INFINITY;
        for (i, d) in diffs.enumerate() {
            if d < winner_diff {
                winner = i;
                winner_diff = d;
            }
        }
        winner
    }

    pub fn level_value(&self, level: usize) -> f64 {
        self.levels[level]
    }
}

/// One spike per code at `segment * S + clamp(tau, 0, S - 1)`, sorted by
/// time then channel.
pub fn codes_to_spikes<T: Sample>(
    codes: &[Code<T>],
    map: &ChannelMap,
    segment_len: usize,
) -> Result<Vec<SpikeEvent>> {
    if segment_len == 0 {
        return Err(Error::param("segment length must be positive"));
    }
    let last = segment_len as i64 - 1;
    let mut spikes = codes
        .iter()
        .map(|c| {
            let channel = map.channel_of(c.kernel, map.quantize_intensity(c.intensity))?;
            let delay = (c.tau as i64).clamp(0, last) as u64;
            Ok(SpikeEvent {
                time: (c.segment * segment_len) as u64 + delay,
                channel,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    spikes.sort_unstable();
    Ok(spikes)
}

/// Decodes spikes into quantized codes: intensity is the channel's level
/// value and the shift is the offset within the segment. Iterations are
/// numbered per segment in spike order.
pub fn spikes_to_codes<T: Sample>(
    spikes: &[SpikeEvent],
    map: &ChannelMap,
    segment_len: usize,
) -> Result<Vec<Code<T>>> {
    if segment_len == 0 {
        return Err(Error::param("segment length must be positive"));
    }
    let mut codes = Vec::with_capacity(spikes.len());
    let mut current_segment = None;
    let mut iteration = 0;
    for (i, spike) in spikes.iter().enumerate() {
        let (kernel, level) = map.split_channel(spike.channel).map_err(|_| {
            Error::format(
                i as u64,
                format!("spike {i} has channel {} >= {}", spike.channel, map.total_channels()),
            )
        })?;
        let segment = (spike.time / segment_len as u64) as usize;
        if current_segment != Some(segment) {
            current_segment = Some(segment);
            iteration = 0;
        }
        codes.push(Code {
            kernel,
            tau: (spike.time % segment_len as u64) as i32,
            intensity: T::lit(map.level_value(level)),
            segment,
            iteration,
        });
        iteration += 1;
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SEGMENT_LEN;
    use proptest::prelude::*;

    fn code(kernel: usize, tau: i32, s: f64, segment: usize) -> Code<f64> {
        Code { kernel, tau, intensity: s, segment, iteration: 0 }
    }

    /// Brute-force argmin: scan for the minimum distance, then take the
    /// first level attaining it.
    fn brute_level(levels: &[f64], s: f64) -> usize {
        let d: Vec<f64> = levels.iter().map(|c| (s.abs() - c).abs()).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        d.iter().position(|&x| x == min).unwrap()
    }

    #[test]
    fn channel_ids() {
        let map = ChannelMap::default();
        assert_eq!(map.channel_of(0, 0).unwrap(), 0);
        assert_eq!(map.channel_of(39, 2).unwrap(), 119);
        assert_eq!(map.channel_of(7, 1).unwrap(), 22);
        assert_eq!(map.total_channels(), 120);
        assert!(map.channel_of(40, 0).is_err());
        assert!(map.channel_of(0, 3).is_err());
    }

    #[test]
    fn channel_of_is_bijective() {
        let map = ChannelMap::default();
        let mut seen = [false; 120];
        for m in 0..40 {
            for l in 0..3 {
                let ch = map.channel_of(m, l).unwrap() as usize;
                assert!(!seen[ch]);
                seen[ch] = true;
                assert_eq!(map.split_channel(ch as u16).unwrap(), (m, l));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn quantizer_examples() {
        let map = ChannelMap::default();
        assert_eq!(map.quantize_intensity(0.0065), 0);
        assert_eq!(map.quantize_intensity((0.0065 + 0.4115) / 2.0), 0);
        assert_eq!(map.quantize_intensity(0.2091), 1);
        assert_eq!(map.quantize_intensity(30.0), 2);
        assert_eq!(map.quantize_intensity(-30.0), 2);
        assert_eq!(map.quantize_intensity(0.4), 1);
    }

    #[test]
    fn map_validation() {
        assert!(ChannelMap::new(vec![], 40).is_err());
        assert!(ChannelMap::new(vec![0.5, 0.1], 40).is_err());
        assert!(ChannelMap::new(vec![-1.0, 0.1], 40).is_err());
        assert!(ChannelMap::new(vec![0.1, 0.5], 40).is_ok());
    }

    #[test]
    fn code_to_spike_example() {
        let map = ChannelMap::default();
        let spikes = codes_to_spikes(&[code(7, 100, 0.4, 3)], &map, SEGMENT_LEN).unwrap();
        assert_eq!(spikes, vec![SpikeEvent { time: 2188, channel: 22 }]);
        let back: Vec<Code<f64>> = spikes_to_codes(&spikes, &map, SEGMENT_LEN).unwrap();
        assert_eq!((back[0].kernel, back[0].tau, back[0].segment), (7, 100, 3));
        assert_eq!(back[0].intensity, 0.4115);
    }

    #[test]
    fn negative_and_late_tau_clamp() {
        let map = ChannelMap::default();
        let spikes = codes_to_spikes(&[code(1, -50, 1.0, 2), code(1, 900, 1.0, 0)], &map, SEGMENT_LEN).unwrap();
        assert_eq!(spikes[0].time, 695);
        assert_eq!(spikes[1].time, 2 * 696);
    }

    #[test]
    fn empty_lists() {
        let map = ChannelMap::default();
        assert!(codes_to_spikes::<f64>(&[], &map, SEGMENT_LEN).unwrap().is_empty());
        assert!(spikes_to_codes::<f64>(&[], &map, SEGMENT_LEN).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_channel_is_format_error() {
        let map = ChannelMap::default();
        let err = spikes_to_codes::<f64>(&[SpikeEvent { time: 0, channel: 120 }], &map, SEGMENT_LEN).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn constant_amplitude_single_kernel_uses_one_channel() {
        let map = ChannelMap::default();
        let codes: Vec<Code<f64>> = (0..20).map(|seg| code(12, 40, 0.37, seg)).collect();
        let spikes = codes_to_spikes(&codes, &map, SEGMENT_LEN).unwrap();
        assert!(spikes.iter().all(|s| s.channel == spikes[0].channel));
    }

    proptest! {
        #[test]
        fn quantizer_matches_brute_force(s in -40.0f64..40.0) {
            let map = ChannelMap::default();
            prop_assert_eq!(map.quantize_intensity(s), brute_level(map.levels(), s));
        }

        #[test]
        fn spike_order_ignores_input_order(mut raw in proptest::collection::vec((0usize..40, 0i32..696, 0.0f64..30.0, 0usize..10), 0..50)) {
            let map = ChannelMap::default();
            let codes: Vec<Code<f64>> = raw.iter().map(|&(m, t, s, g)| code(m, t, s, g)).collect();
            let a = codes_to_spikes(&codes, &map, SEGMENT_LEN).unwrap();
            raw.reverse();
            let rev: Vec<Code<f64>> = raw.iter().map(|&(m, t, s, g)| code(m, t, s, g)).collect();
            prop_assert_eq!(a.len(), codes.len());
            prop_assert_eq!(a, codes_to_spikes(&rev, &map, SEGMENT_LEN).unwrap());
        }

        #[test]
        fn round_trip_on_clamp_free_domain(m in 0usize..40, tau in 0i32..696, s in -30.0f64..30.0, seg in 0usize..1000) {
            let map = ChannelMap::default();
            let spikes = codes_to_spikes(&[code(m, tau, s, seg)], &map, SEGMENT_LEN).unwrap();
            let back: Vec<Code<f64>> = spikes_to_codes(&spikes, &map, SEGMENT_LEN).unwrap();
            prop_assert_eq!((back[0].kernel, back[0].tau, back[0].segment), (m, tau, seg));
            prop_assert_eq!(back[0].intensity, map.level_value(map.quantize_intensity(s)));
        }
    }
}
