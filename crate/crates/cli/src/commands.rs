//! The `spiketrum` subcommands, callable as library functions.
//!
//! Each command returns a summary struct; the binary only formats it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use spiketrum::decoder_metrics::{spikes_per_second, Report};
use spiketrum::itp_coder::{
    codes_to_spikes, read_aer_binary, read_aer_text, write_aer_binary, write_aer_text, SpikeTrain,
    DEFAULT_LEVELS,
};
use spiketrum::mp_encoder::{read_codes_csv, write_codes_csv, Encoder, CODES_CSV_HEADER};
use spiketrum::{
    reconstruct_from_codes, reconstruct_from_spikes, snr_db, sparsity_percent, spike_entropy,
    BankConfig, ChannelMap, Code64, CorrelationPath, EncoderConfig, KernelBank64, SpikeEvent,
};

use crate::signals::{log_sweep, spearman, white_noise};
use crate::wav::{read_wav_at_rate, write_wav};

/// Where the kernel bank comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BankSource {
    File(PathBuf),
    Generate(BankConfig),
}

impl Default for BankSource {
    fn default() -> Self {
        BankSource::Generate(BankConfig::default())
    }
}

impl BankSource {
    pub fn load(&self) -> Result<KernelBank64> {
        match self {
            BankSource::File(path) => KernelBank64::load(path)
                .with_context(|| format!("loading kernel bank {}", path.display())),
            BankSource::Generate(config) => Ok(KernelBank64::build(config)?),
        }
    }
}

/// Settings shared by the encoding commands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub bank: BankSource,
    pub encoder: EncoderConfig,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AerFormat {
    Text,
    Binary,
}

impl AerFormat {
    /// `.txt` and `.csv` files hold text events; anything else is binary.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("txt") | Some("csv") => AerFormat::Text,
            _ => AerFormat::Binary,
        }
    }
}

fn channel_map(bank: &KernelBank64) -> Result<ChannelMap> {
    Ok(ChannelMap::new(DEFAULT_LEVELS.to_vec(), bank.len())?)
}

fn write_spikes(path: &Path, spikes: &[SpikeEvent], map: &ChannelMap, sample_rate: f64) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    match AerFormat::for_path(path) {
        AerFormat::Text => write_aer_text(spikes, &mut out)?,
        AerFormat::Binary => write_aer_binary(
            &SpikeTrain {
                sample_rate,
                channel_count: map.total_channels() as u32,
                spikes: spikes.to_vec(),
            },
            &mut out,
        )?,
    }
    out.flush()?;
    Ok(())
}

/// Reads an AER file, checking it against the bank's rate and channel count.
pub fn read_spikes(path: &Path, map: &ChannelMap, sample_rate: f64) -> Result<Vec<SpikeEvent>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let channels = map.total_channels() as u32;
    let spikes = match AerFormat::for_path(path) {
        AerFormat::Text => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| anyhow!("{}: not UTF-8 text at byte {}", path.display(), e.valid_up_to()))?;
            read_aer_text(text, channels).with_context(|| format!("parsing {}", path.display()))?
        }
        AerFormat::Binary => {
            let train = read_aer_binary(&bytes).with_context(|| format!("parsing {}", path.display()))?;
            ensure!(
                train.channel_count == channels,
                "{}: file has {} channels but the bank maps to {}",
                path.display(),
                train.channel_count,
                channels
            );
            ensure!(
                train.sample_rate == sample_rate,
                "{}: spike sample rate {} Hz does not match the bank rate {} Hz",
                path.display(),
                train.sample_rate,
                sample_rate
            );
            train.spikes
        }
    };
    Ok(spikes)
}

fn write_report(path: &Path, report: &Report) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn wav_rate(bank: &KernelBank64) -> Result<u32> {
    let rate = bank.sample_rate();
    ensure!(rate.fract() == 0.0 && rate <= u32::MAX as f64, "bank sample rate {rate} is not a whole number of Hz");
    Ok(rate as u32)
}

#[derive(Debug, Clone)]
pub struct EncodeOptions {
    pub run: RunConfig,
    pub input: PathBuf,
    pub output: PathBuf,
    pub codes: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct EncodeSummary {
    pub sample_count: usize,
    pub segment_count: usize,
    pub spikes: Vec<SpikeEvent>,
    pub report: Report,
}

pub fn cmd_encode(opts: &EncodeOptions) -> Result<EncodeSummary> {
    let bank = opts.run.bank.load()?;
    let map = channel_map(&bank)?;
    let samples = read_wav_at_rate(&opts.input, bank.sample_rate())?;
    let encoder = Encoder::new(&bank, &opts.run.encoder)?;
    let stream = encoder.encode_stream(&samples)?;
    let spikes = codes_to_spikes(&stream.codes, &map, bank.segment_len())?;

    write_spikes(&opts.output, &spikes, &map, bank.sample_rate())?;
    if let Some(path) = &opts.codes {
        let mut out = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
        write_codes_csv(&stream.codes, &mut out)?;
        out.flush()?;
    }

    let has_energy = samples.iter().any(|&x| x != 0.0);
    let (snr_code_db, snr_spike_db) = if has_energy {
        let by_codes = reconstruct_from_codes(&stream.codes, &bank, samples.len())?;
        let by_spikes = reconstruct_from_spikes(&spikes, &bank, &map, samples.len())?;
        (Some(snr_db(&samples, &by_codes)?), Some(snr_db(&samples, &by_spikes)?))
    } else {
        (None, None)
    };
    let report = Report {
        code_count: Some(stream.codes.len()),
        spike_count: spikes.len(),
        spikes_per_second: spikes_per_second(spikes.len(), samples.len(), bank.sample_rate()),
        residual_energy: Some(stream.residual_energy),
        snr_code_db,
        snr_spike_db,
        entropy_bits: spike_entropy(&spikes, map.total_channels()),
        sparsity_percent: sparsity_percent(&spikes, map.total_channels()),
    };
    if let Some(path) = &opts.run.report {
        write_report(path, &report)?;
    }
    Ok(EncodeSummary {
        sample_count: samples.len(),
        segment_count: stream.segment_count,
        spikes,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct DecodeOptions {
    pub bank: BankSource,
    /// AER spike file, or a code list CSV written by `encode --codes`.
    pub input: PathBuf,
    pub output: PathBuf,
    /// Output length in samples; defaults to the reference length, then to
    /// the end of the last segment that holds an event.
    pub length: Option<usize>,
    pub reference: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct DecodeSummary {
    pub spike_count: usize,
    /// Set when the input was a code list (lossless path).
    pub code_count: Option<usize>,
    pub samples: Vec<f64>,
    pub report: Report,
}

enum DecodeInput {
    Spikes(Vec<SpikeEvent>),
    Codes(Vec<Code64>),
}

fn read_decode_input(path: &Path, map: &ChannelMap, sample_rate: f64) -> Result<DecodeInput> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(CODES_CSV_HEADER.as_bytes()) {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| anyhow!("{}: not UTF-8 text at byte {}", path.display(), e.valid_up_to()))?;
        let codes = read_codes_csv(text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(DecodeInput::Codes(codes));
    }
    read_spikes(path, map, sample_rate).map(DecodeInput::Spikes)
}

pub fn cmd_decode(opts: &DecodeOptions) -> Result<DecodeSummary> {
    let bank = opts.bank.load()?;
    let map = channel_map(&bank)?;
    let input = read_decode_input(&opts.input, &map, bank.sample_rate())?;
    let reference = opts
        .reference
        .as_ref()
        .map(|p| read_wav_at_rate(p, bank.sample_rate()))
        .transpose()?;

    let segment_len = bank.segment_len();
    let spikes = match &input {
        DecodeInput::Spikes(spikes) => spikes.clone(),
        DecodeInput::Codes(codes) => codes_to_spikes(codes, &map, segment_len)?,
    };
    let last_segment = match &input {
        DecodeInput::Spikes(spikes) => spikes.iter().map(|s| (s.time / segment_len as u64) as usize).max(),
        DecodeInput::Codes(codes) => codes.iter().map(|c| c.segment).max(),
    };
    let length = match (opts.length, &reference) {
        (Some(n), _) => n,
        (None, Some(r)) => r.len(),
        (None, None) => last_segment.map_or(0, |s| (s + 1) * segment_len),
    };
    let samples = match &input {
        DecodeInput::Spikes(spikes) => reconstruct_from_spikes(spikes, &bank, &map, length)?,
        DecodeInput::Codes(codes) => reconstruct_from_codes(codes, &bank, length)?,
    };
    write_wav(&opts.output, &samples, wav_rate(&bank)?)?;

    let (residual_energy, snr) = match &reference {
        Some(r) => {
            ensure!(
                r.len() == samples.len(),
                "reference has {} samples but the decoded length is {}",
                r.len(),
                samples.len()
            );
            let err: f64 = r.iter().zip(&samples).map(|(a, b)| (a - b).powi(2)).sum();
            let snr = if r.iter().any(|&x| x != 0.0) { Some(snr_db(r, &samples)?) } else { None };
            (Some(err), snr)
        }
        None => (None, None),
    };
    let code_count = match &input {
        DecodeInput::Codes(codes) => Some(codes.len()),
        DecodeInput::Spikes(_) => None,
    };
    let (snr_code_db, snr_spike_db) = if code_count.is_some() { (snr, None) } else { (None, snr) };
    let report = Report {
        code_count,
        spike_count: spikes.len(),
        spikes_per_second: spikes_per_second(spikes.len(), length, bank.sample_rate()),
        residual_energy,
        snr_code_db,
        snr_spike_db,
        entropy_bits: spike_entropy(&spikes, map.total_channels()),
        sparsity_percent: sparsity_percent(&spikes, map.total_channels()),
    };
    if let Some(path) = &opts.report {
        write_report(path, &report)?;
    }
    Ok(DecodeSummary {
        spike_count: spikes.len(),
        code_count,
        samples,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct KernelsOptions {
    pub config: BankConfig,
    pub output: PathBuf,
    /// Directory for `centers.csv` and one `kernel_NN.csv` per kernel.
    pub dump_dir: Option<PathBuf>,
}

pub fn cmd_kernels(opts: &KernelsOptions) -> Result<KernelBank64> {
    let bank = KernelBank64::build(&opts.config)?;
    bank.save(&opts.output)
        .with_context(|| format!("writing {}", opts.output.display()))?;
    if let Some(dir) = &opts.dump_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut centers = String::from("kernel,center_hz\n");
        for k in bank.kernels() {
            centers.push_str(&format!("{},{}\n", k.index, k.center_freq));
            let mut wave = String::from("sample,value\n");
            for (t, v) in k.samples.iter().enumerate() {
                wave.push_str(&format!("{t},{v:e}\n"));
            }
            fs::write(dir.join(format!("kernel_{:02}.csv", k.index)), wave)?;
        }
        fs::write(dir.join("centers.csv"), centers)?;
    }
    Ok(bank)
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub run: RunConfig,
    pub output: Option<PathBuf>,
    /// CSV of `segment_time,kernel` for raster plots.
    pub raster: Option<PathBuf>,
    pub amplitude: f64,
    pub duration_s: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            run: RunConfig {
                encoder: EncoderConfig {
                    max_codes_per_segment: 1,
                    ..EncoderConfig::default()
                },
                ..RunConfig::default()
            },
            output: None,
            raster: None,
            amplitude: 0.5,
            duration_s: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub segment_count: usize,
    pub spikes: Vec<SpikeEvent>,
    /// `(segment start time in seconds, winning kernel)` per segment.
    pub winners: Vec<(f64, usize)>,
    pub rank_correlation: Option<f64>,
}

pub fn cmd_sweep(opts: &SweepOptions) -> Result<SweepSummary> {
    ensure!(opts.duration_s > 0.0, "sweep duration must be positive");
    let bank = opts.run.bank.load()?;
    let map = channel_map(&bank)?;
    let config = bank.config();
    let signal = log_sweep(opts.duration_s, bank.sample_rate(), config.fmin, config.fmax, opts.amplitude);
    let stream = Encoder::new(&bank, &opts.run.encoder)?.encode_stream(&signal)?;
    let spikes = codes_to_spikes(&stream.codes, &map, bank.segment_len())?;

    let segment_seconds = bank.segment_len() as f64 / bank.sample_rate();
    let winners: Vec<(f64, usize)> = stream
        .codes
        .iter()
        .filter(|c| c.iteration == 0)
        .map(|c| (c.segment as f64 * segment_seconds, c.kernel))
        .collect();
    let times: Vec<f64> = winners.iter().map(|w| w.0).collect();
    let kernels: Vec<f64> = winners.iter().map(|w| w.1 as f64).collect();
    let rank_correlation = spearman(&times, &kernels);

    if let Some(path) = &opts.output {
        write_spikes(path, &spikes, &map, bank.sample_rate())?;
    }
    if let Some(path) = &opts.raster {
        let mut csv = String::from("segment_time,kernel\n");
        for (t, k) in &winners {
            csv.push_str(&format!("{t:.6},{k}\n"));
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &opts.run.report {
        let report = Report {
            code_count: Some(stream.codes.len()),
            spike_count: spikes.len(),
            spikes_per_second: spikes_per_second(spikes.len(), signal.len(), bank.sample_rate()),
            residual_energy: Some(stream.residual_energy),
            snr_code_db: Some(snr_db(&signal, &reconstruct_from_codes(&stream.codes, &bank, signal.len())?)?),
            snr_spike_db: Some(snr_db(&signal, &reconstruct_from_spikes(&spikes, &bank, &map, signal.len())?)?),
            entropy_bits: spike_entropy(&spikes, map.total_channels()),
            sparsity_percent: sparsity_percent(&spikes, map.total_channels()),
        };
        write_report(path, &report)?;
    }
    Ok(SweepSummary {
        segment_count: stream.segment_count,
        spikes,
        winners,
        rank_correlation,
    })
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub run: RunConfig,
    /// WAV files forming the corpus; a synthetic noise corpus is used when empty.
    pub inputs: Vec<PathBuf>,
    /// Segments of synthetic noise when no inputs are given.
    pub segments: usize,
    pub paths: Vec<CorrelationPath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub path: CorrelationPath,
    pub sps: usize,
    pub segments: usize,
    pub seconds: f64,
    pub segments_per_second: f64,
    /// Segments per second needed to keep up with the input rate.
    pub realtime_threshold: f64,
    pub realtime: bool,
}

pub fn cmd_bench(opts: &BenchOptions) -> Result<Vec<BenchResult>> {
    let bank = opts.run.bank.load()?;
    let corpus: Vec<f64> = if opts.inputs.is_empty() {
        white_noise(opts.segments * bank.segment_len(), 0.5, 0x5eed)
    } else {
        let mut all = Vec::new();
        for path in &opts.inputs {
            all.extend(read_wav_at_rate(path, bank.sample_rate())?);
        }
        all
    };
    if corpus.is_empty() {
        bail!("no input: the benchmark corpus is empty");
    }
    ensure!(!opts.paths.is_empty(), "no correlation path selected");

    let realtime_threshold = bank.sample_rate() / bank.segment_len() as f64;
    opts.paths
        .iter()
        .map(|&path| {
            let config = EncoderConfig {
                correlation_path: path,
                ..opts.run.encoder
            };
            let encoder = Encoder::new(&bank, &config)?;
            let start = Instant::now();
            let stream = encoder.encode_stream(&corpus)?;
            let seconds = start.elapsed().as_secs_f64().max(1e-9);
            let segments_per_second = stream.segment_count as f64 / seconds;
            Ok(BenchResult {
                path,
                sps: config.max_codes_per_segment,
                segments: stream.segment_count,
                seconds,
                segments_per_second,
                realtime_threshold,
                realtime: segments_per_second >= realtime_threshold,
            })
        })
        .collect()
}
