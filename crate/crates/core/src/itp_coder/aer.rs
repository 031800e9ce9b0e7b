//! Address-event files.
//!
//! Text: one `time_sample,channel` line per event, sorted by time.
//! Binary (little-endian): `"SPKA" | u32 version=1 | u32 channel_count |
//! f64 sample_rate` followed by `(u64 time, u16 channel)` records.

use std::io::Write;

use super::SpikeEvent;
use crate::error::{Error, Result};
use crate::kernel_bank::ByteReader;

pub const AER_MAGIC: &[u8; 4] = b"SPKA";
pub const AER_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;
const RECORD_LEN: usize = 8 + 2;

/// Spikes together with the metadata the binary format carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub sample_rate: f64,
    pub channel_count: u32,
    pub spikes: Vec<SpikeEvent>,
}

pub fn write_aer_text<W: Write>(spikes: &[SpikeEvent], out: &mut W) -> Result<()> {
    for s in spikes {
        writeln!(out, "{},{}", s.time, s.channel)?;
    }
    Ok(())
}

/// Parses the text format. Offsets in errors are 1-based line numbers.
pub fn read_aer_text(text: &str, channel_count: u32) -> Result<Vec<SpikeEvent>> {
    let mut spikes: Vec<SpikeEvent> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (time, channel) = line
            .split_once(',')
            .ok_or_else(|| Error::format(line_no, format!("expected time,channel but got {line:?}")))?;
        let time: u64 = time
            .trim()
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid time {time:?}")))?;
        let channel: u16 = channel
            .trim()
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid channel {channel:?}")))?;
        if channel as u32 >= channel_count {
            return Err(Error::format(
                line_no,
                format!("channel {channel} >= channel count {channel_count}"),
            ));
        }
        if spikes.last().is_some_and(|prev| prev.time > time) {
            return Err(Error::format(line_no, "events are not sorted by time"));
        }
        spikes.push(SpikeEvent { time, channel });
    }
    Ok(spikes)
}

pub fn write_aer_binary<W: Write>(train: &SpikeTrain, out: &mut W) -> Result<()> {
    out.write_all(AER_MAGIC)?;
    out.write_all(&AER_VERSION.to_le_bytes())?;
    out.write_all(&train.channel_count.to_le_bytes())?;
    out.write_all(&train.sample_rate.to_le_bytes())?;
    for s in &train.spikes {
        out.write_all(&s.time.to_le_bytes())?;
        out.write_all(&s.channel.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_aer_binary(bytes: &[u8]) -> Result<SpikeTrain> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != AER_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"SPKA\""));
    }
    let version = r.u32()?;
    if version != AER_VERSION {
        return Err(Error::format(4, format!("unsupported AER version {version}")));
    }
    let channel_count = r.u32()?;
    let sample_rate = r.f64()?;
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::format(12, format!("invalid sample rate {sample_rate}")));
    }
    if !r.remaining().is_multiple_of(RECORD_LEN) {
        let whole = r.remaining() / RECORD_LEN;
        return Err(Error::format(
            (HEADER_LEN + whole * RECORD_LEN) as u64,
            format!("truncated record: {} trailing bytes", r.remaining() % RECORD_LEN),
        ));
    }
    let mut spikes = Vec::with_capacity(r.remaining() / RECORD_LEN);
    while r.remaining() > 0 {
        let at = r.offset();
        let time = r.u64()?;
        let channel = r.u16()?;
        if channel as u32 >= channel_count {
            return Err(Error::format(at, format!("channel {channel} >= channel count {channel_count}")));
        }
        spikes.push(SpikeEvent { time, channel });
    }
    Ok(SpikeTrain {
        sample_rate,
        channel_count,
        spikes,
    })
}
