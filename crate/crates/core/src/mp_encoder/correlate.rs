//! Circular cross-correlation of a working buffer against the kernels.
//!
//! `r[u] = sum_t data[(u + t) mod N] * kernel[t]` for `u` in `[0, N)`, i.e.
//! the inner product of the buffer with the kernel circularly shifted to
//! start at slot `u`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::kernel_bank::{Kernel, KernelBank};
use crate::scalar::{dot, Sample};
use crate::FFT_SIZE;

/// Time-domain correlation. Slow, but it is the reference the FFT path is
/// checked against.
pub fn correlate_direct<T: Sample>(data: &[T], kernel: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); FFT_SIZE];
    correlate_direct_into(data, kernel, &mut out);
    out
}

pub(crate) fn correlate_direct_into<T: Sample>(data: &[T], kernel: &[T], out: &mut [T]) {
    debug_assert_eq!(data.len(), FFT_SIZE);
    let len = kernel.len();
    for (u, slot) in out.iter_mut().enumerate() {
        let head = FFT_SIZE - u;
        *slot = if head >= len {
            dot(&data[u..u + len], kernel)
        } else {
            dot(&data[u..], &kernel[..head]) + dot(&data[..len - head], &kernel[head..])
        };
    }
}

/// Correlation rows for every kernel of a bank, row-major `kernel x lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlations<T> {
    values: Vec<T>,
    kernel_count: usize,
}

impl<T: Sample> Correlations<T> {
    pub fn zeros(kernel_count: usize) -> Self {
        Correlations {
            values: vec![T::zero(); kernel_count * FFT_SIZE],
            kernel_count,
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let kernel_count = rows.len();
        let values: Vec<T> = rows.into_iter().flatten().collect();
        assert_eq!(values.len(), kernel_count * FFT_SIZE, "rows must be FFT_SIZE long");
        Correlations { values, kernel_count }
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_count
    }

    pub fn row(&self, kernel: usize) -> &[T] {
        &self.values[kernel * FFT_SIZE..(kernel + 1) * FFT_SIZE]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(FFT_SIZE)
    }

    pub(crate) fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, T> {
        self.values.chunks_exact_mut(FFT_SIZE)
    }
}

/// Direct correlation of `data` against every kernel; kernels run in parallel.
pub fn correlate_all_direct<T: Sample>(data: &[T], bank: &KernelBank<T>, out: &mut Correlations<T>) {
    out.values
        .par_chunks_exact_mut(FFT_SIZE)
        .zip(bank.kernels().par_iter())
        .for_each(|(row, kernel)| correlate_direct_into(data, &kernel.samples, row));
}

/// Frequency-domain correlator: `r = IFFT(FFT(data) * conj(K)) / N`.
///
/// Both operands are real, so two kernels share one inverse transform: the
/// first result lands in the real part and the second in the imaginary part.
#[derive(Clone)]
pub struct FftCorrelator<T: Sample> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Sample> Default for FftCorrelator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Sample> FftCorrelator<T> {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        FftCorrelator {
            forward: planner.plan_fft_forward(FFT_SIZE),
            inverse: planner.plan_fft_inverse(FFT_SIZE),
        }
    }

    pub fn workspace(&self) -> FftWorkspace<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        FftWorkspace {
            spectrum: vec![zero; FFT_SIZE],
            work: vec![zero; FFT_SIZE],
            scratch: vec![zero; scratch_len],
        }
    }

    /// Correlates `data` against one kernel.
    pub fn correlate(&self, data: &[T], kernel: &Kernel<T>) -> Vec<T> {
        let mut ws = self.workspace();
        self.load(data, &mut ws);
        let mut out = vec![T::zero(); FFT_SIZE];
        self.correlate_pair(&mut ws, kernel, &mut out, None);
        out
    }

    /// Correlates `data` against every kernel of `bank`.
    pub fn correlate_all(
        &self,
        data: &[T],
        bank: &KernelBank<T>,
        ws: &mut FftWorkspace<T>,
        out: &mut Correlations<T>,
    ) {
        self.load(data, ws);
        let kernels = bank.kernels();
        let mut rows = out.rows_mut();
        for pair in kernels.chunks(2) {
            let first = rows.next().expect("one row per kernel");
            match pair {
                [a, b] => {
                    let second = rows.next().expect("one row per kernel");
                    self.correlate_pair(ws, a, first, Some((b, second)));
                }
                [a] => self.correlate_pair(ws, a, first, None),
                _ => unreachable!(),
            }
        }
    }

    fn load(&self, data: &[T], ws: &mut FftWorkspace<T>) {
        debug_assert_eq!(data.len(), FFT_SIZE);
        for (slot, &x) in ws.spectrum.iter_mut().zip(data) {
            *slot = Complex::new(x, T::zero());
        }
        self.forward
            .process_with_scratch(&mut ws.spectrum, &mut ws.scratch);
    }

    fn correlate_pair(
        &self,
        ws: &mut FftWorkspace<T>,
        a: &Kernel<T>,
        out_a: &mut [T],
        b: Option<(&Kernel<T>, &mut [T])>,
    ) {
        let i = Complex::new(T::zero(), T::one());
        match &b {
            Some((kb, _)) => {
                for (((w, &x), ka), kb) in ws
                    .work
                    .iter_mut()
                    .zip(&ws.spectrum)
                    .zip(&a.spectrum)
                    .zip(&kb.spectrum)
                {
                    *w = x * ka.conj() + i * (x * kb.conj());
                }
            }
            None => {
                for ((w, &x), ka) in ws.work.iter_mut().zip(&ws.spectrum).zip(&a.spectrum) {
                    *w = x * ka.conj();
                }
            }
        }
        self.inverse.process_with_scratch(&mut ws.work, &mut ws.scratch);
        let scale = T::one() / T::lit(FFT_SIZE as f64);
        for (o, w) in out_a.iter_mut().zip(&ws.work) {
            *o = w.re * scale;
        }
        if let Some((_, out_b)) = b {
            for (o, w) in out_b.iter_mut().zip(&ws.work) {
                *o = w.im * scale;
            }
        }
    }
}

/// Per-thread buffers for [`FftCorrelator`].
pub struct FftWorkspace<T> {
    spectrum: Vec<Complex<T>>,
    work: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}
