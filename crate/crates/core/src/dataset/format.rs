//! QPSD sample records.
//!
//! Each record is laid out as
//!
//! ```text
//! b"QPSD0001" | u32 grid_h | u32 grid_w | u64 seed
//! | grid_h*grid_w f32 intensity | grid_h*grid_w f32 phase_correction
//! | f64 gamma_uncorrected | f64 transmissivity_T
//! ```
//!
//! all little-endian. A shard file is a plain concatenation of records.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QPSD0001";
const HEADER_LEN: usize = 8 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_index: usize,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// Relative intensity, max-normalised to 1.
    pub intensity: Vec<f32>,
    /// Truth phase correction in (-π, π].
    pub phase_correction: Vec<f32>,
    pub gamma_uncorrected: f64,
    pub transmissivity_t: f64,
}

pub fn record_len(height: usize, width: usize) -> usize {
    HEADER_LEN + 2 * 4 * height * width + 16
}

pub fn encode(sample: &Sample) -> Vec<u8> {
    let px = sample.height * sample.width;
    assert_eq!(sample.intensity.len(), px, "intensity size");
    assert_eq!(sample.phase_correction.len(), px, "phase size");
    let mut out = Vec::with_capacity(record_len(sample.height, sample.width));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(sample.height as u32).to_le_bytes());
    out.extend_from_slice(&(sample.width as u32).to_le_bytes());
    out.extend_from_slice(&sample.seed.to_le_bytes());
    for v in sample.intensity.iter().chain(&sample.phase_correction) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&sample.gamma_uncorrected.to_le_bytes());
    out.extend_from_slice(&sample.transmissivity_t.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8], sample_index: usize, path: &Path) -> Result<Sample> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt {
            path: path.into(),
            reason: format!("record of {} bytes is shorter than its header", bytes.len()),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format {
            path: path.into(),
            reason: format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..8])),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let height = u32_at(8);
    let width = u32_at(12);
    let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expect = record_len(height, width);
    if bytes.len() != expect {
        return Err(Error::Corrupt {
            path: path.into(),
            reason: format!("record holds {} bytes, header implies {expect}", bytes.len()),
        });
    }
    let px = height * width;
    let floats = |start: usize| -> Vec<f32> {
        bytes[start..start + 4 * px]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let intensity = floats(HEADER_LEN);
    let phase_correction = floats(HEADER_LEN + 4 * px);
    let tail = HEADER_LEN + 8 * px;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    Ok(Sample {
        sample_index,
        seed,
        height,
        width,
        intensity,
        phase_correction,
        gamma_uncorrected: f64_at(tail),
        transmissivity_t: f64_at(tail + 8),
    })
}
