//! 16-bit PCM mono WAV input and output.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

const FULL_SCALE: f64 = 32768.0;

/// Reads a mono 16-bit PCM file, scaling samples by `1/32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let reader = WavReader::open(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!("{}: mono required, file has {} channels", path.display(), spec.channels);
    }
    if spec.sample_format != SampleFormat::Int {
        bail!("{}: PCM integer samples required, file holds floats", path.display());
    }
    if spec.bits_per_sample != 16 {
        bail!("{}: 16-bit PCM required, file has {} bits per sample", path.display(), spec.bits_per_sample);
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("decoding samples of {}", path.display()))?;
    Ok((samples, spec.sample_rate))
}

/// Like [`read_wav`] but refuses any rate other than `expected_rate`.
pub fn read_wav_at_rate(path: impl AsRef<Path>, expected_rate: f64) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let (samples, rate) = read_wav(path)?;
    if rate as f64 != expected_rate {
        bail!(
            "{}: sample rate {} Hz does not match the kernel bank rate {} Hz (no resampling is done)",
            path.display(),
            rate,
            expected_rate
        );
    }
    Ok(samples)
}

/// Writes mono 16-bit PCM, clamping to full scale.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for &x in samples {
        writer.write_sample(to_pcm(x))?;
    }
    writer.finalize().with_context(|| format!("finishing {}", path.display()))?;
    Ok(())
}

fn to_pcm(x: f64) -> i16 {
    let x = if x.is_nan() { 0.0 } else { x };
    (x * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}
