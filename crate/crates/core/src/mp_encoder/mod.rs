//! Greedy matching-pursuit encoder.
//!
//! Per segment the loop is: correlate the residual with every kernel, take
//! the `(kernel, lag)` with the largest absolute correlation, stop if that
//! intensity is under the feedback threshold, otherwise subtract the scaled
//! kernel and emit the code. At most `max_codes_per_segment` codes are
//! produced per segment.
//!
//! Correlation and subtraction are circular on the `FFT_SIZE` buffer, so the
//! residual energy drops by exactly `s^2` at every step.

mod correlate;
mod csv;
mod segment;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use correlate::{correlate_all_direct, correlate_direct, Correlations, FftCorrelator, FftWorkspace};
pub use csv::{read_codes_csv, write_codes_csv, CODES_CSV_HEADER};
pub use segment::{segment_stream, SegmentBuffer};

use crate::error::{Error, Result};
use crate::fixed_point::{self, FixedBank, QFormat};
use crate::kernel_bank::{Kernel, KernelBank};
use crate::scalar::{energy, Sample};
use crate::FFT_SIZE;

/// Largest shift magnitude the buffer supports.
pub const MAX_SHIFT: i32 = (FFT_SIZE / 2) as i32;

/// One matching-pursuit result `(m, tau, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Code<T> {
    /// Kernel index `m`.
    pub kernel: usize,
    /// Signed circular lag in samples, within `[-1024, 1023]`.
    pub tau: i32,
    /// Signed correlation intensity `s`.
    pub intensity: T,
    pub segment: usize,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CorrelationPath {
    Direct,
    #[default]
    Fft,
}

impl std::str::FromStr for CorrelationPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(CorrelationPath::Direct),
            "fft" => Ok(CorrelationPath::Fft),
            other => Err(Error::param(format!(
                "unknown correlation path {other:?}, expected direct or fft"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NumericMode {
    #[default]
    Float,
    Fixed(QFormat),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Spikes per segment, the cap `k` on iterations.
    pub max_codes_per_segment: usize,
    /// Codes with `|s|` below this stop the segment. Zero disables feedback.
    pub feedback_threshold: f64,
    pub correlation_path: CorrelationPath,
    pub numeric_mode: NumericMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            max_codes_per_segment: 16,
            feedback_threshold: 0.0,
            correlation_path: CorrelationPath::Fft,
            numeric_mode: NumericMode::Float,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_codes_per_segment > FFT_SIZE {
            return Err(Error::param(format!(
                "spikes per segment {} exceeds the {FFT_SIZE} available lags",
                self.max_codes_per_segment
            )));
        }
        if !(self.feedback_threshold.is_finite() && self.feedback_threshold >= 0.0) {
            return Err(Error::param(format!(
                "feedback threshold must be finite and non-negative, got {}",
                self.feedback_threshold
            )));
        }
        if matches!(self.numeric_mode, NumericMode::Fixed(_))
            && self.correlation_path == CorrelationPath::Fft
        {
            return Err(Error::param(
                "fixed-point mode runs on the direct correlation path; use --path direct",
            ));
        }
        Ok(())
    }
}

/// Maps a lag bin `u` in `[0, N)` to the signed shift in `[-N/2, N/2)`.
pub fn lag_to_tau(u: usize) -> i32 {
    if u < FFT_SIZE / 2 {
        u as i32
    } else {
        u as i32 - FFT_SIZE as i32
    }
}

/// Inverse of [`lag_to_tau`]; accepts the full `[-N/2, N/2]` shifter range.
pub fn tau_to_lag(tau: i32) -> Result<usize> {
    if tau.abs() > MAX_SHIFT {
        return Err(Error::param(format!(
            "shift {tau} outside the shifter range [-{MAX_SHIFT}, {MAX_SHIFT}]"
        )));
    }
    Ok(tau.rem_euclid(FFT_SIZE as i32) as usize)
}

/// Exhaustive argmax of `|r_m[u]|` over every kernel and lag.
///
/// Ties go to the smallest kernel index, then the smallest lag. The
/// returned intensity keeps its sign.
pub fn find_best_code<T: Sample>(
    correlations: &Correlations<T>,
    segment: usize,
    iteration: usize,
) -> Code<T> {
    let mut best = (0usize, 0usize, T::zero());
    let mut best_abs = T::zero();
    for (m, row) in correlations.rows().enumerate() {
        for (u, &r) in row.iter().enumerate() {
            if r.abs() > best_abs {
                best_abs = r.abs();
                best = (m, u, r);
            }
        }
    }
    Code {
        kernel: best.0,
        tau: lag_to_tau(best.1),
        intensity: best.2,
        segment,
        iteration,
    }
}

/// `data[(u + t) mod N] -= s * kernel[t]` with `u = tau mod N`.
pub fn subtract_component<T: Sample>(data: &mut [T], kernel: &[T], tau: i32, s: T) -> Result<()> {
    let start = tau_to_lag(tau)?;
    let n = data.len();
    for (t, &k) in kernel.iter().enumerate() {
        data[(start + t) % n] -= s * k;
    }
    Ok(())
}

/// True when the code's intensity falls below the feedback threshold.
pub fn feedback_should_stop<T: Sample>(code: &Code<T>, threshold: T) -> bool {
    code.intensity.abs() < threshold
}

/// Result of encoding one segment, including the trace needed for metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEncoding<T> {
    pub codes: Vec<Code<T>>,
    /// Final residual in the `FFT_SIZE` buffer.
    pub residual: Vec<T>,
    pub initial_energy: T,
    /// Residual energy after each emitted code.
    pub residual_energies: Vec<T>,
}

/// Codes for a whole stream plus aggregate residual statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEncoding<T> {
    pub codes: Vec<Code<T>>,
    pub segment_count: usize,
    /// Sum of per-segment final residual energies.
    pub residual_energy: f64,
}

/// Reusable encoder bound to one bank and configuration.
///
/// Cheap to share across threads; each segment allocates its own scratch.
pub struct Encoder<'b, T: Sample> {
    bank: &'b KernelBank<T>,
    config: EncoderConfig,
    fft: FftCorrelator<T>,
    fixed: Option<FixedBank>,
}

impl<'b, T: Sample> Encoder<'b, T> {
    pub fn new(bank: &'b KernelBank<T>, config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        if bank.is_empty() {
            return Err(Error::param("kernel bank is empty"));
        }
        let fixed = match config.numeric_mode {
            NumericMode::Fixed(format) => Some(FixedBank::new(bank, format)),
            NumericMode::Float => None,
        };
        Ok(Encoder {
            bank,
            config: *config,
            fft: FftCorrelator::new(),
            fixed,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn bank(&self) -> &KernelBank<T> {
        self.bank
    }

    pub fn encode_segment(&self, buffer: &SegmentBuffer<T>) -> Result<SegmentEncoding<T>> {
        if buffer.data.len() != FFT_SIZE {
            return Err(Error::param(format!(
                "segment buffer holds {} samples, expected {FFT_SIZE}",
                buffer.data.len()
            )));
        }
        match &self.fixed {
            Some(fixed) => Ok(fixed_point::encode_segment_fixed(buffer, fixed, &self.config)),
            None => Ok(self.encode_segment_float(buffer)),
        }
    }

    fn encode_segment_float(&self, buffer: &SegmentBuffer<T>) -> SegmentEncoding<T> {
        let threshold = T::lit(self.config.feedback_threshold);
        let mut residual = buffer.data.clone();
        let initial_energy = energy(&residual);
        let mut correlations = Correlations::zeros(self.bank.len());
        let mut ws = match self.config.correlation_path {
            CorrelationPath::Fft => Some(self.fft.workspace()),
            CorrelationPath::Direct => None,
        };
        let mut codes = Vec::new();
        let mut residual_energies = Vec::new();

        for iteration in 0..self.config.max_codes_per_segment {
            match ws.as_mut() {
                Some(ws) => self.fft.correlate_all(&residual, self.bank, ws, &mut correlations),
                None => correlate_all_direct(&residual, self.bank, &mut correlations),
            }
            let code = find_best_code(&correlations, buffer.segment_index, iteration);
            if feedback_should_stop(&code, threshold) {
                break;
            }
            let kernel: &Kernel<T> = &self.bank.kernels()[code.kernel];
            subtract_component(&mut residual, &kernel.samples, code.tau, code.intensity)
                .expect("lags from find_best_code are in range");
            residual_energies.push(energy(&residual));
            codes.push(code);
        }

        SegmentEncoding {
            codes,
            residual,
            initial_energy,
            residual_energies,
        }
    }

    /// Encodes every segment of `samples`. Segments run in parallel; the
    /// output order is by segment, then iteration.
    pub fn encode_stream(&self, samples: &[T]) -> Result<StreamEncoding<T>> {
        let buffers = segment_stream(samples, self.bank.segment_len())?;
        let encoded = buffers
            .par_iter()
            .map(|b| self.encode_segment(b))
            .collect::<Result<Vec<_>>>()?;
        let residual_energy = encoded
            .iter()
            .map(|e| energy(&e.residual).as_f64())
            .sum();
        Ok(StreamEncoding {
            segment_count: encoded.len(),
            codes: encoded.into_iter().flat_map(|e| e.codes).collect(),
            residual_energy,
        })
    }
}

/// Encodes one buffer and returns its codes in generation order.
pub fn encode_segment<T: Sample>(
    buffer: &SegmentBuffer<T>,
    bank: &KernelBank<T>,
    config: &EncoderConfig,
) -> Result<Vec<Code<T>>> {
    Ok(Encoder::new(bank, config)?.encode_segment(buffer)?.codes)
}

/// Encodes a whole sample stream.
pub fn encode_stream<T: Sample>(
    samples: &[T],
    bank: &KernelBank<T>,
    config: &EncoderConfig,
) -> Result<Vec<Code<T>>> {
    Ok(Encoder::new(bank, config)?.encode_stream(samples)?.codes)
}
