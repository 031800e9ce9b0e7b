use crate::error::{Error, Result};
use crate::scalar::Sample;
use crate::FFT_SIZE;

/// One `FFT_SIZE`-sample working buffer.
///
/// Slots `[0, valid_samples)` hold input; everything after is zero when the
/// buffer is loaded. During encoding the same storage holds the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentBuffer<T> {
    pub data: Vec<T>,
    pub segment_index: usize,
    pub valid_samples: usize,
}

impl<T: Sample> SegmentBuffer<T> {
    pub fn zeros(segment_index: usize) -> Self {
        SegmentBuffer {
            data: vec![T::zero(); FFT_SIZE],
            segment_index,
            valid_samples: 0,
        }
    }

    /// Copies `samples` into the head of a fresh zero buffer.
    pub fn from_samples(samples: &[T], segment_index: usize) -> Result<Self> {
        if samples.len() > FFT_SIZE {
            return Err(Error::param(format!(
                "segment of {} samples does not fit the {FFT_SIZE}-sample buffer",
                samples.len()
            )));
        }
        let mut buf = Self::zeros(segment_index);
        buf.data[..samples.len()].copy_from_slice(samples);
        buf.valid_samples = samples.len();
        Ok(buf)
    }
}

/// Cuts `samples` into disjoint `segment_len` pieces; the last one is
/// zero-padded. Empty input gives no segments.
pub fn segment_stream<T: Sample>(samples: &[T], segment_len: usize) -> Result<Vec<SegmentBuffer<T>>> {
    if segment_len == 0 || segment_len > FFT_SIZE {
        return Err(Error::param(format!(
            "segment length {segment_len} must be in [1, {FFT_SIZE}]"
        )));
    }
    samples
        .chunks(segment_len)
        .enumerate()
        .map(|(i, chunk)| SegmentBuffer::from_samples(chunk, i))
        .collect()
}
