//! Matching pursuit on the fixed-point datapath.
//!
//! Correlations are exact integer dot products of raw words (`2F`
//! fractional bits in a 128-bit accumulator) rounded once to `Q34` per lag.
//! The integer sums are evaluated through split-limb transforms: each raw
//! word is cut into three balanced 12-bit limbs, limb products of equal
//! weight are correlated in `f64` where every partial sum stays far inside
//! the 53-bit mantissa, and the rounded partials are recombined in `i128`.
//! The result equals [`correlate_fixed_direct`] bit for bit.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{q_mul, q_sub, round_shift, saturate, to_fixed, to_float, QFormat, Q34};
use crate::kernel_bank::KernelBank;
use crate::mp_encoder::{lag_to_tau, tau_to_lag, Code, EncoderConfig, SegmentBuffer, SegmentEncoding};
use crate::scalar::Sample;
use crate::FFT_SIZE;

const LIMB_BITS: u32 = 12;
const LIMBS: usize = 3;
/// Limb products grouped by combined weight `i + j`.
const GROUPS: usize = 2 * LIMBS - 1;

fn split_limbs(v: i64) -> [i64; LIMBS] {
    let half = 1i64 << (LIMB_BITS - 1);
    let mut rest = v;
    let mut out = [0i64; LIMBS];
    for limb in out.iter_mut().take(LIMBS - 1) {
        let hi = (rest + half) >> LIMB_BITS;
        *limb = rest - (hi << LIMB_BITS);
        rest = hi;
    }
    out[LIMBS - 1] = rest;
    out
}

/// Plain multiply-accumulate over raw words; the reference for the
/// split-limb correlator.
pub fn correlate_fixed_direct(data: &[i64], kernel: &[i64], frac_bits: u32) -> Vec<i64> {
    (0..FFT_SIZE)
        .map(|u| {
            let acc: i128 = kernel
                .iter()
                .enumerate()
                .map(|(t, &k)| data[(u + t) % FFT_SIZE] as i128 * k as i128)
                .sum();
            saturate(round_shift(acc, frac_bits)).0
        })
        .collect()
}

/// Quantized kernels with their limb spectra.
pub struct FixedBank {
    format: QFormat,
    kernels: Vec<Vec<i64>>,
    limb_spectra: Vec<[Vec<Complex<f64>>; LIMBS]>,
    correlator: FixedCorrelator,
}

impl FixedBank {
    pub fn new<T: Sample>(bank: &KernelBank<T>, format: QFormat) -> Self {
        let correlator = FixedCorrelator::new();
        let kernels: Vec<Vec<i64>> = bank
            .kernels()
            .iter()
            .map(|k| k.samples.iter().map(|&s| to_fixed(s.as_f64(), format).raw()).collect())
            .collect();
        let limb_spectra = kernels.iter().map(|k| correlator.limb_spectra(k)).collect();
        FixedBank {
            format,
            kernels,
            limb_spectra,
            correlator,
        }
    }

    pub fn format(&self) -> QFormat {
        self.format
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Raw quantized samples of kernel `m`.
    pub fn kernel(&self, m: usize) -> &[i64] {
        &self.kernels[m]
    }

    /// Correlation of raw `data` against every kernel, row-major.
    pub fn correlate_all(&self, data: &[i64]) -> Vec<Vec<i64>> {
        let data_limbs = self.correlator.limb_spectra(data);
        self.limb_spectra
            .iter()
            .map(|k| self.correlator.correlate(&data_limbs, k, self.format.frac_bits()))
            .collect()
    }
}

/// Transform plans for the split-limb integer correlator.
#[derive(Clone)]
pub struct FixedCorrelator {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Default for FixedCorrelator {
    fn default() -> Self {
        Self::new()
    }
}

impl FixedCorrelator {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        FixedCorrelator {
            forward: planner.plan_fft_forward(FFT_SIZE),
            inverse: planner.plan_fft_inverse(FFT_SIZE),
        }
    }

    fn limb_spectra(&self, words: &[i64]) -> [Vec<Complex<f64>>; LIMBS] {
        let mut out: [Vec<Complex<f64>>; LIMBS] =
            std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); FFT_SIZE]);
        for (t, &w) in words.iter().enumerate() {
            for (limb, spec) in split_limbs(w).iter().zip(out.iter_mut()) {
                spec[t].re = *limb as f64;
            }
        }
        for spec in out.iter_mut() {
            self.forward.process(spec);
        }
        out
    }

    fn correlate(
        &self,
        data: &[Vec<Complex<f64>>; LIMBS],
        kernel: &[Vec<Complex<f64>>; LIMBS],
        frac_bits: u32,
    ) -> Vec<i64> {
        let mut group_spectra = vec![vec![Complex::new(0.0, 0.0); FFT_SIZE]; GROUPS];
        for (i, d) in data.iter().enumerate() {
            for (j, k) in kernel.iter().enumerate() {
                for ((g, x), h) in group_spectra[i + j].iter_mut().zip(d).zip(k) {
                    *g += x * h.conj();
                }
            }
        }

        let mut acc = vec![0i128; FFT_SIZE];
        let scale = 1.0 / FFT_SIZE as f64;
        let imag = Complex::new(0.0, 1.0);
        // Two real groups share one inverse transform (real / imaginary part).
        for pair in (0..GROUPS).collect::<Vec<_>>().chunks(2) {
            let mut work: Vec<Complex<f64>> = match pair {
                [a, b] => group_spectra[*a]
                    .iter()
                    .zip(&group_spectra[*b])
                    .map(|(x, y)| x + imag * y)
                    .collect(),
                [a] => group_spectra[*a].clone(),
                _ => unreachable!(),
            };
            self.inverse.process(&mut work);
            for (slot, w) in acc.iter_mut().zip(&work) {
                let lo = (w.re * scale).round();
                debug_assert!((w.re * scale - lo).abs() < 0.25, "limb sum lost exactness");
                *slot += (lo as i128) << (LIMB_BITS as usize * pair[0]);
                if let [_, b] = pair {
                    let hi = (w.im * scale).round();
                    debug_assert!((w.im * scale - hi).abs() < 0.25, "limb sum lost exactness");
                    *slot += (hi as i128) << (LIMB_BITS as usize * b);
                }
            }
        }
        acc.into_iter()
            .map(|a| saturate(round_shift(a, frac_bits)).0)
            .collect()
    }
}

/// Fixed-point matching pursuit over one buffer.
///
/// Input samples and kernels are quantized to the bank's format; the
/// returned intensities are the exact `Q34` values converted back to `T`,
/// and the residual trace is measured from the raw residual.
pub fn encode_segment_fixed<T: Sample>(
    buffer: &SegmentBuffer<T>,
    bank: &FixedBank,
    config: &EncoderConfig,
) -> SegmentEncoding<T> {
    let format = bank.format;
    let mut residual: Vec<Q34> = buffer
        .data
        .iter()
        .map(|&x| to_fixed(x.as_f64(), format))
        .collect();
    let threshold = to_fixed(config.feedback_threshold, format);
    let raw_energy = |r: &[Q34]| -> T {
        T::lit(r.iter().map(|q| to_float(*q).powi(2)).sum::<f64>())
    };
    let initial_energy = raw_energy(&residual);
    let mut codes = Vec::new();
    let mut residual_energies = Vec::new();

    for iteration in 0..config.max_codes_per_segment {
        let raw: Vec<i64> = residual.iter().map(|q| q.raw()).collect();
        let rows = bank.correlate_all(&raw);

        let mut best = (0usize, 0usize, 0i64);
        for (m, row) in rows.iter().enumerate() {
            for (u, &r) in row.iter().enumerate() {
                if r.unsigned_abs() > best.2.unsigned_abs() {
                    best = (m, u, r);
                }
            }
        }
        let s = Q34::from_raw(best.2, format);
        if s.abs().raw() < threshold.raw() {
            break;
        }
        let tau = lag_to_tau(best.1);
        let start = tau_to_lag(tau).expect("lag from argmax is in range");
        for (t, &k) in bank.kernels[best.0].iter().enumerate() {
            let slot = &mut residual[(start + t) % FFT_SIZE];
            *slot = q_sub(*slot, q_mul(s, Q34::from_raw(k, format)));
        }
        residual_energies.push(raw_energy(&residual));
        codes.push(Code {
            kernel: best.0,
            tau,
            intensity: T::lit(to_float(s)),
            segment: buffer.segment_index,
            iteration,
        });
    }

    SegmentEncoding {
        codes,
        residual: residual.iter().map(|q| T::lit(to_float(*q))).collect(),
        initial_energy,
        residual_energies,
    }
}
