use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use spiketrum::{BankConfig, CorrelationPath, EncoderConfig, NumericMode, QFormat};
use spiketrum_cli::commands::{
    cmd_bench, cmd_decode, cmd_encode, cmd_kernels, cmd_sweep, BankSource, BenchOptions,
    DecodeOptions, EncodeOptions, KernelsOptions, RunConfig, SweepOptions,
};
use spiketrum_cli::THREADS_ENV;

#[derive(Parser)]
#[command(name = "spiketrum", version, about = "Sparse spike coding of audio over a Gammatone dictionary")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a 16-bit mono WAV file into an AER spike file.
    Encode {
        input: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// Also write the raw code list as CSV.
        #[arg(long)]
        codes: Option<PathBuf>,
        #[command(flatten)]
        enc: EncodeFlags,
        #[arg(long, default_value_t = 16)]
        sps: usize,
    },
    /// Reconstruct a WAV file from an AER spike file or a code list CSV.
    Decode {
        input: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Reference WAV for SNR reporting.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Output length in samples.
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the Gammatone kernel bank and save it.
    Kernels {
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// Write per-kernel waveform CSVs into this directory.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 20.0)]
        fmin: f64,
        #[arg(long, default_value_t = 8000.0)]
        fmax: f64,
        #[arg(long, default_value_t = 4)]
        order: u32,
        #[arg(long, default_value_t = 16000.0)]
        sample_rate: f64,
    },
    /// Encode a logarithmic sine sweep and report kernel/time rank correlation.
    Sweep {
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        /// CSV of (segment_time, winning kernel) per segment.
        #[arg(long)]
        raster: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        amplitude: f64,
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        #[command(flatten)]
        enc: EncodeFlags,
        #[arg(long, default_value_t = 1)]
        sps: usize,
    },
    /// Measure encoding throughput against the real-time segment rate.
    Bench {
        /// WAV files to encode; synthetic noise is used when none are given.
        inputs: Vec<PathBuf>,
        /// Number of synthetic segments.
        #[arg(long, default_value_t = 8)]
        segments: usize,
        #[command(flatten)]
        enc: EncodeFlags,
        #[arg(long, default_value_t = 16)]
        sps: usize,
    },
}

#[derive(Args)]
struct EncodeFlags {
    /// Feedback threshold on |s|; 0 disables early stopping.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Correlation path: direct or fft.
    #[arg(long)]
    path: Option<CorrelationPath>,
    /// Run the fixed-point datapath in the given format, e.g. Q5.28.
    #[arg(long)]
    fixed: Option<QFormat>,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

impl EncodeFlags {
    fn run_config(&self, sps: usize) -> RunConfig {
        let numeric_mode = self.fixed.map_or(NumericMode::Float, NumericMode::Fixed);
        let default_path = match numeric_mode {
            NumericMode::Fixed(_) => CorrelationPath::Direct,
            NumericMode::Float => CorrelationPath::Fft,
        };
        RunConfig {
            bank: bank_source(&self.bank),
            encoder: EncoderConfig {
                max_codes_per_segment: sps,
                feedback_threshold: self.threshold,
                correlation_path: self.path.unwrap_or(default_path),
                numeric_mode,
            },
            report: self.report.clone(),
        }
    }
}

fn bank_source(path: &Option<PathBuf>) -> BankSource {
    path.clone().map_or_else(BankSource::default, BankSource::File)
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV}={value:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Encode { input, output, codes, enc, sps } => {
            let summary = cmd_encode(&EncodeOptions {
                run: enc.run_config(sps),
                input,
                output,
                codes,
            })?;
            println!("segments: {}", summary.segment_count);
            println!("spikes: {}", summary.spikes.len());
            println!("spikes_per_second: {:.3}", summary.report.spikes_per_second);
        }
        Command::Decode { input, output, bank, reference, length, report } => {
            let summary = cmd_decode(&DecodeOptions {
                bank: bank_source(&bank),
                input,
                output,
                length,
                reference,
                report,
            })?;
            if let Some(n) = summary.code_count {
                println!("codes: {n}");
            }
            println!("spikes: {}", summary.spike_count);
            println!("samples: {}", summary.samples.len());
            if let Some(snr) = summary.report.snr_code_db.or(summary.report.snr_spike_db) {
                println!("snr_db: {snr:.3}");
            }
        }
        Command::Kernels { output, dump_dir, fmin, fmax, order, sample_rate } => {
            let bank = cmd_kernels(&KernelsOptions {
                config: BankConfig { fmin, fmax, order, sample_rate, ..BankConfig::default() },
                output: output.clone(),
                dump_dir,
            })?;
            println!("kernels: {}", bank.len());
            println!("wrote: {}", output.display());
        }
        Command::Sweep { output, raster, amplitude, duration, enc, sps } => {
            let summary = cmd_sweep(&SweepOptions {
                run: enc.run_config(sps),
                output,
                raster,
                amplitude,
                duration_s: duration,
            })?;
            println!("segments: {}", summary.segment_count);
            println!("spikes: {}", summary.spikes.len());
            match summary.rank_correlation {
                Some(rho) => println!("rank_correlation: {rho:.4}"),
                None => println!("rank_correlation: undefined"),
            }
        }
        Command::Bench { inputs, segments, enc, sps } => {
            let paths = match enc.path {
                Some(p) => vec![p],
                None if enc.fixed.is_some() => vec![CorrelationPath::Direct],
                None => vec![CorrelationPath::Direct, CorrelationPath::Fft],
            };
            let results = cmd_bench(&BenchOptions {
                run: enc.run_config(sps),
                inputs,
                segments,
                paths,
            })?;
            for r in results {
                println!(
                    "path={} sps={} segments={} seconds={:.3} segments_per_second={:.2} realtime={} (needs {:.2})",
                    match r.path {
                        CorrelationPath::Direct => "direct",
                        CorrelationPath::Fft => "fft",
                    },
                    r.sps,
                    r.segments,
                    r.seconds,
                    r.segments_per_second,
                    if r.realtime { "yes" } else { "no" },
                    r.realtime_threshold
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
