//! ERB-spaced Gammatone kernel dictionary.
//!
//! Kernels are sampled order-`n` Gammatone impulse responses
//! `t^(n-1) exp(-2π b ERB(fc) t) cos(2π fc t)`, hard-truncated to the
//! kernel length and normalized to unit L2 norm. Each kernel carries its
//! zero-padded `FFT_SIZE`-point spectrum for the frequency-domain
//! correlator.
//!
//! Bank files are little-endian:
//!
//! ```text
//! "SPKB" | u32 version=1 | u32 kernel_count | u32 kernel_length
//!        | f64 sample_rate | f64 fmin | f64 fmax | u32 order
//! kernel_count x ( f64 center_freq | kernel_length x f64 sample )
//! ```
//!
//! Spectra are not stored; they are recomputed on load.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{energy, Sample};
use crate::{DEFAULT_SAMPLE_RATE, FFT_SIZE, KERNEL_COUNT, KERNEL_LEN};

const BANK_MAGIC: &[u8; 4] = b"SPKB";
const BANK_VERSION: u32 = 1;

/// Glasberg & Moore ERB-rate, in ERB numbers.
pub fn erb_rate(freq_hz: f64) -> f64 {
    21.4 * (4.37 * freq_hz / 1000.0 + 1.0).log10()
}

/// Inverse of [`erb_rate`].
pub fn erb_rate_to_hz(erb: f64) -> f64 {
    (10f64.powf(erb / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Equivalent rectangular bandwidth at `freq_hz`, in Hz.
pub fn erb_bandwidth(freq_hz: f64) -> f64 {
    24.7 * (4.37 * freq_hz / 1000.0 + 1.0)
}

/// `count` frequencies uniformly spaced in ERB-rate, with the endpoints
/// pinned exactly to `fmin` and `fmax`.
pub fn erb_center_frequencies(count: usize, fmin: f64, fmax: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::param(format!("need at least 2 center frequencies, got {count}")));
    }
    if !(fmin > 0.0 && fmin < fmax && fmax.is_finite()) {
        return Err(Error::param(format!(
            "frequency range must satisfy 0 < fmin < fmax, got [{fmin}, {fmax}]"
        )));
    }
    let lo = erb_rate(fmin);
    let hi = erb_rate(fmax);
    let step = (hi - lo) / (count - 1) as f64;
    let mut freqs: Vec<f64> = (0..count)
        .map(|i| erb_rate_to_hz(lo + step * i as f64))
        .collect();
    freqs[0] = fmin;
    freqs[count - 1] = fmax;
    Ok(freqs)
}

/// Unit-norm Gammatone impulse response starting at `t = 0` with zero phase.
///
/// `fc` may sit exactly at Nyquist; the default bank's top kernel does.
pub fn generate_gammatone<T: Sample>(
    fc: f64,
    fs: f64,
    length: usize,
    order: u32,
    bandwidth_factor: f64,
) -> Result<Vec<T>> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::param(format!("sample rate must be positive, got {fs}")));
    }
    if !(fc > 0.0 && fc <= fs / 2.0) {
        return Err(Error::param(format!(
            "center frequency {fc} Hz must lie in (0, {}] Hz",
            fs / 2.0
        )));
    }
    if length == 0 {
        return Err(Error::param("kernel length must be at least 1"));
    }
    if order == 0 {
        return Err(Error::param("gammatone order must be at least 1"));
    }
    if bandwidth_factor.is_nan() || bandwidth_factor <= 0.0 {
        return Err(Error::param(format!(
            "bandwidth factor must be positive, got {bandwidth_factor}"
        )));
    }

    let decay = 2.0 * std::f64::consts::PI * bandwidth_factor * erb_bandwidth(fc);
    let omega = 2.0 * std::f64::consts::PI * fc;
    let mut samples: Vec<T> = (0..length)
        .map(|i| {
            let t = i as f64 / fs;
            T::lit(t.powi(order as i32 - 1) * (-decay * t).exp() * (omega * t).cos())
        })
        .collect();

    let norm = energy(&samples).sqrt();
    if norm.is_nan() || norm <= T::zero() {
        return Err(Error::param(format!(
            "gammatone at {fc} Hz has zero energy over {length} samples"
        )));
    }
    samples.iter_mut().for_each(|s| *s = *s / norm);
    Ok(samples)
}

/// Generation parameters for a [`KernelBank`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub kernel_count: usize,
    pub kernel_len: usize,
    pub sample_rate: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub order: u32,
    /// Multiplier `b` on the ERB bandwidth in the envelope decay.
    pub bandwidth_factor: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            kernel_count: KERNEL_COUNT,
            kernel_len: KERNEL_LEN,
            sample_rate: DEFAULT_SAMPLE_RATE,
            fmin: 20.0,
            fmax: 8000.0,
            order: 4,
            bandwidth_factor: 1.019,
        }
    }
}

impl BankConfig {
    fn validate(&self) -> Result<()> {
        if self.kernel_len == 0 || self.kernel_len > FFT_SIZE {
            return Err(Error::param(format!(
                "kernel length {} must be in [1, {FFT_SIZE}]",
                self.kernel_len
            )));
        }
        if self.fmax > self.sample_rate / 2.0 {
            return Err(Error::param(format!(
                "fmax {} Hz exceeds Nyquist {} Hz",
                self.fmax,
                self.sample_rate / 2.0
            )));
        }
        Ok(())
    }
}

/// One dictionary atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    pub index: usize,
    pub center_freq: f64,
    pub samples: Vec<T>,
    /// Forward `FFT_SIZE`-point transform of the zero-padded samples.
    pub spectrum: Vec<Complex<T>>,
}

impl<T: Sample> Kernel<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Immutable kernel dictionary, shareable across encoder threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank<T> {
    kernels: Vec<Kernel<T>>,
    config: BankConfig,
}

impl<T: Sample> KernelBank<T> {
    /// Builds the bank deterministically from `config`.
    pub fn build(config: &BankConfig) -> Result<Self> {
        config.validate()?;
        let centers = erb_center_frequencies(config.kernel_count, config.fmin, config.fmax)?;
        let sample_sets = centers
            .iter()
            .map(|&fc| {
                generate_gammatone(
                    fc,
                    config.sample_rate,
                    config.kernel_len,
                    config.order,
                    config.bandwidth_factor,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(*config, centers, sample_sets))
    }

    fn from_parts(config: BankConfig, centers: Vec<f64>, sample_sets: Vec<Vec<T>>) -> Self {
        let fft = forward_plan::<T>();
        let kernels = centers
            .into_iter()
            .zip(sample_sets)
            .enumerate()
            .map(|(index, (center_freq, samples))| {
                let spectrum = kernel_spectrum(&samples, fft.as_ref());
                Kernel {
                    index,
                    center_freq,
                    samples,
                    spectrum,
                }
            })
            .collect();
        KernelBank { kernels, config }
    }

    pub fn kernels(&self) -> &[Kernel<T>] {
        &self.kernels
    }

    pub fn kernel(&self, index: usize) -> Option<&Kernel<T>> {
        self.kernels.get(index)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> f64 {
        self.config.sample_rate
    }

    pub fn kernel_len(&self) -> usize {
        self.config.kernel_len
    }

    /// Input samples per segment: `FFT_SIZE - kernel_len + 1`.
    pub fn segment_len(&self) -> usize {
        FFT_SIZE - self.config.kernel_len + 1
    }

    pub fn center_frequencies(&self) -> Vec<f64> {
        self.kernels.iter().map(|k| k.center_freq).collect()
    }

    /// Writes the bank in the `SPKB` layout. Samples are widened to `f64`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let c = &self.config;
        out.write_all(BANK_MAGIC)?;
        out.write_all(&BANK_VERSION.to_le_bytes())?;
        out.write_all(&(self.kernels.len() as u32).to_le_bytes())?;
        out.write_all(&(c.kernel_len as u32).to_le_bytes())?;
        out.write_all(&c.sample_rate.to_le_bytes())?;
        out.write_all(&c.fmin.to_le_bytes())?;
        out.write_all(&c.fmax.to_le_bytes())?;
        out.write_all(&c.order.to_le_bytes())?;
        for k in &self.kernels {
            out.write_all(&k.center_freq.to_le_bytes())?;
            for s in &k.samples {
                out.write_all(&s.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(4)?;
        if magic != BANK_MAGIC {
            return Err(Error::format(0, "bad magic, expected \"SPKB\""));
        }
        let version_at = r.offset();
        let version = r.u32()?;
        if version != BANK_VERSION {
            return Err(Error::format(
                version_at,
                format!("unsupported bank version {version}"),
            ));
        }
        let count_at = r.offset();
        let kernel_count = r.u32()? as usize;
        if kernel_count == 0 {
            return Err(Error::format(count_at, "bank holds no kernels"));
        }
        let len_at = r.offset();
        let kernel_len = r.u32()? as usize;
        if kernel_len == 0 || kernel_len > FFT_SIZE {
            return Err(Error::format(
                len_at,
                format!("kernel length {kernel_len} outside [1, {FFT_SIZE}]"),
            ));
        }
        let rate_at = r.offset();
        let sample_rate = r.f64()?;
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::format(rate_at, format!("invalid sample rate {sample_rate}")));
        }
        let fmin = r.f64()?;
        let fmax = r.f64()?;
        let order = r.u32()?;

        let mut centers = Vec::with_capacity(kernel_count);
        let mut sample_sets = Vec::with_capacity(kernel_count);
        for _ in 0..kernel_count {
            centers.push(r.f64()?);
            let samples = (0..kernel_len)
                .map(|_| r.f64().map(T::lit))
                .collect::<Result<Vec<T>>>()?;
            sample_sets.push(samples);
        }
        if r.remaining() != 0 {
            return Err(Error::format(
                r.offset(),
                format!("{} trailing bytes after last kernel", r.remaining()),
            ));
        }
        let config = BankConfig {
            kernel_count,
            kernel_len,
            sample_rate,
            fmin,
            fmax,
            order,
            ..BankConfig::default()
        };
        Ok(Self::from_parts(config, centers, sample_sets))
    }
}

pub(crate) fn forward_plan<T: Sample>() -> Arc<dyn Fft<T>> {
    FftPlanner::new().plan_fft_forward(FFT_SIZE)
}

/// Zero-padded forward transform of `samples`.
pub fn kernel_spectrum<T: Sample>(samples: &[T], fft: &dyn Fft<T>) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); FFT_SIZE];
    for (slot, &s) in buf.iter_mut().zip(samples) {
        slot.re = s;
    }
    fft.process(&mut buf);
    buf
}

/// Little-endian cursor that reports the byte offset of any short read.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.offset(),
                format!("truncated: needed {n} bytes, {} left", self.remaining()),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_bank() -> KernelBank<f64> {
        KernelBank::build(&BankConfig::default()).unwrap()
    }

    #[test]
    fn erb_centers_pin_endpoints() {
        let f = erb_center_frequencies(40, 20.0, 8000.0).unwrap();
        assert_eq!(f.len(), 40);
        assert_eq!(f[0], 20.0);
        assert_eq!(f[39], 8000.0);
        assert_eq!(erb_center_frequencies(2, 100.0, 200.0).unwrap(), vec![100.0, 200.0]);
    }

    #[test]
    fn erb_center_at_index_19() {
        // Frozen from an independent evaluation of the inverse ERB-rate map.
        let f = erb_center_frequencies(40, 20.0, 8000.0).unwrap();
        assert!((f[19] - 1139.346906).abs() < 1e-5, "{}", f[19]);
    }

    #[test]
    fn erb_centers_uniform_in_erb_rate() {
        let f = erb_center_frequencies(40, 20.0, 8000.0).unwrap();
        let rates: Vec<f64> = f.iter().map(|&x| erb_rate(x)).collect();
        let step = rates[1] - rates[0];
        for w in rates.windows(2) {
            assert!(w[1] > w[0]);
            assert!(((w[1] - w[0]) - step).abs() <= 1e-9 * step);
        }
    }

    #[test]
    fn erb_centers_reject_bad_ranges() {
        assert!(erb_center_frequencies(1, 20.0, 8000.0).is_err());
        assert!(erb_center_frequencies(40, 0.0, 8000.0).is_err());
        assert!(erb_center_frequencies(40, 500.0, 100.0).is_err());
    }

    #[test]
    fn gammatone_is_unit_norm_with_expected_length() {
        let g: Vec<f64> = generate_gammatone(1000.0, 16000.0, 1353, 4, 1.019).unwrap();
        assert_eq!(g.len(), 1353);
        assert!((energy(&g).sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn gammatone_spectrum_peaks_at_center_bin() {
        let g: Vec<f64> = generate_gammatone(1000.0, 16000.0, 1353, 4, 1.019).unwrap();
        let spec = kernel_spectrum(&g, forward_plan::<f64>().as_ref());
        let peak = (0..FFT_SIZE / 2)
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        assert!((peak as i64 - 128).abs() <= 1, "peak bin {peak}");
    }

    #[test]
    fn gammatone_rejects_above_nyquist() {
        assert!(generate_gammatone::<f64>(8000.5, 16000.0, 1353, 4, 1.019).is_err());
        assert!(generate_gammatone::<f64>(0.0, 16000.0, 1353, 4, 1.019).is_err());
        assert!(generate_gammatone::<f64>(100.0, 16000.0, 0, 4, 1.019).is_err());
        assert!(generate_gammatone::<f64>(100.0, 16000.0, 10, 0, 1.019).is_err());
    }

    #[test]
    fn default_bank_shape() {
        let bank = default_bank();
        assert_eq!(bank.len(), 40);
        assert_eq!(bank.len() * 3, 120);
        assert_eq!(bank.segment_len(), 696);
        for (i, k) in bank.kernels().iter().enumerate() {
            assert_eq!(k.index, i);
            assert_eq!(k.len(), 1353);
            assert!((energy(&k.samples).sqrt() - 1.0).abs() < 1e-12);
        }
        let fc = bank.center_frequencies();
        assert!(fc.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cached_spectra_match_recompute() {
        let bank = default_bank();
        let fft = forward_plan::<f64>();
        for k in bank.kernels() {
            let fresh = kernel_spectrum(&k.samples, fft.as_ref());
            for (a, b) in fresh.iter().zip(&k.spectrum) {
                assert!((a - b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(default_bank(), default_bank());
    }

    #[test]
    fn f32_bank_is_normalized() {
        let bank = KernelBank::<f32>::build(&BankConfig::default()).unwrap();
        for k in bank.kernels() {
            assert!((energy(&k.samples).sqrt() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn bank_file_round_trip() {
        let bank = default_bank();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.spkb");
        bank.save(&path).unwrap();
        let loaded = KernelBank::<f64>::load(&path).unwrap();
        assert_eq!(bank, loaded);
        let expected_len = 4 + 4 * 3 + 8 * 3 + 4 + 40 * (8 + 1353 * 8);
        assert_eq!(fs::metadata(&path).unwrap().len() as usize, expected_len);
    }

    #[test]
    fn bank_load_rejects_bad_magic() {
        let mut bytes = Vec::new();
        default_bank().write_to(&mut bytes).unwrap();
        bytes[0] = b'X';
        let err = KernelBank::<f64>::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn bank_load_rejects_bad_version() {
        let mut bytes = Vec::new();
        default_bank().write_to(&mut bytes).unwrap();
        bytes[4] = 9;
        let err = KernelBank::<f64>::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 4, .. }), "{err}");
    }

    #[test]
    fn bank_load_reports_truncation_offset() {
        let mut bytes = Vec::new();
        default_bank().write_to(&mut bytes).unwrap();
        bytes.truncate(1000);
        match KernelBank::<f64>::from_bytes(&bytes).unwrap_err() {
            Error::Format { offset, message } => {
                assert!((992..=1000).contains(&offset), "{offset}");
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
