//! Code list CSV: `segment,iteration,kernel,tau,intensity`, one row per
//! code, intensity written with 9 significant digits.

use std::io::Write;

use super::Code;
use crate::error::{Error, Result};
use crate::scalar::Sample;

pub const CODES_CSV_HEADER: &str = "segment,iteration,kernel,tau,intensity";

pub fn write_codes_csv<T: Sample, W: Write>(codes: &[Code<T>], out: &mut W) -> Result<()> {
    writeln!(out, "{CODES_CSV_HEADER}")?;
    for c in codes {
        writeln!(
            out,
            "{},{},{},{},{:.8e}",
            c.segment,
            c.iteration,
            c.kernel,
            c.tau,
            c.intensity.as_f64()
        )?;
    }
    Ok(())
}

/// Parses a code list. Format errors report the 1-based line number as the
/// offset.
pub fn read_codes_csv<T: Sample>(text: &str) -> Result<Vec<Code<T>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CODES_CSV_HEADER => {}
        _ => return Err(Error::format(1, format!("expected header {CODES_CSV_HEADER:?}"))),
    }
    let mut codes = Vec::new();
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::format(line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let bad = |what: &str| Error::format(line_no, format!("invalid {what} {line:?}"));
        codes.push(Code {
            segment: fields[0].parse().map_err(|_| bad("segment"))?,
            iteration: fields[1].parse().map_err(|_| bad("iteration"))?,
            kernel: fields[2].parse().map_err(|_| bad("kernel"))?,
            tau: fields[3].parse().map_err(|_| bad("tau"))?,
            intensity: T::lit(fields[4].parse::<f64>().map_err(|_| bad("intensity"))?),
        });
    }
    Ok(codes)
}
