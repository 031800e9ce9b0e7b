//! Spiketrum: sparse spike coding of audio by greedy matching pursuit.
//!
//! A waveform is cut into disjoint segments. Each segment is decomposed
//! against a dictionary of 40 unit-norm Gammatone kernels: at every step
//! the kernel and lag with the largest absolute inner product are chosen,
//! the scaled kernel is subtracted, and the triple (kernel, lag, intensity)
//! is emitted as a [`Code`]. Codes are then mapped onto 120 output channels
//! (three intensity levels per kernel) to form a spike train, and either
//! representation can be turned back into a waveform.
//!
//! The floating-point pipeline is generic over [`Sample`] (`f32`/`f64`);
//! [`fixed_point`] emulates a 34-bit fixed-point datapath.
//!
//! ```
//! use spiketrum::{BankConfig, EncoderConfig, KernelBank64};
//!
//! let bank = KernelBank64::build(&BankConfig::default()).unwrap();
//! let config = EncoderConfig { max_codes_per_segment: 4, ..EncoderConfig::default() };
//! let signal: Vec<f64> = (0..1392).map(|i| (i as f64 * 0.1).sin() * 0.3).collect();
//! let codes = spiketrum::encode_stream(&signal, &bank, &config).unwrap();
//! assert_eq!(codes.len(), 2 * 4);
//! ```

pub mod decoder_metrics;
pub mod error;
pub mod fixed_point;
pub mod itp_coder;
pub mod kernel_bank;
pub mod mp_encoder;
pub mod scalar;

pub use decoder_metrics::{
    reconstruct_from_codes, reconstruct_from_spikes, reconstruct_segment, snr_db,
    sparsity_percent, spike_entropy, Report,
};
pub use error::{Error, Result};
pub use fixed_point::{QFormat, Q34};
pub use itp_coder::{ChannelMap, SpikeEvent};
pub use kernel_bank::{BankConfig, Kernel, KernelBank};
pub use mp_encoder::{
    encode_segment, encode_stream, segment_stream, Code, CorrelationPath, EncoderConfig,
    NumericMode, SegmentBuffer,
};
pub use scalar::Sample;

/// Transform size of the correlation engine; also the working-buffer length.
pub const FFT_SIZE: usize = 2048;
/// Samples per Gammatone kernel.
pub const KERNEL_LEN: usize = 1353;
/// Input samples consumed per segment, `FFT_SIZE - KERNEL_LEN + 1`.
pub const SEGMENT_LEN: usize = FFT_SIZE - KERNEL_LEN + 1;
pub const KERNEL_COUNT: usize = 40;
pub const DEFAULT_SAMPLE_RATE: f64 = 16_000.0;

pub type KernelBank64 = KernelBank<f64>;
pub type KernelBank32 = KernelBank<f32>;
pub type Kernel64 = Kernel<f64>;
pub type Code64 = Code<f64>;
pub type Code32 = Code<f32>;
pub type SegmentBuffer64 = SegmentBuffer<f64>;
