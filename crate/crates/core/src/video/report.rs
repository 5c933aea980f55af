//! Exact bit accounting over a bitstream: per-frame totals and the
//! motion-vector / residual split. Sums reconcile with the file size.

use super::{BitstreamHeader, CHUNK_INTRA, CHUNK_RESIDUAL};
use crate::error::{Error, Result};
use crate::predictor::PredictorKind;
use crate::util::ByteReader;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameRateRecord {
    pub index: usize,
    pub intra: bool,
    /// Motion-vector section bits (length prefix included); zero for
    /// intra chunks and for FD/LFP streams.
    pub mv_bits: u64,
    /// Everything else in the chunk: type byte, length prefix, payload.
    pub residual_bits: u64,
}

impl FrameRateRecord {
    pub fn total_bits(&self) -> u64 {
        self.mv_bits + self.residual_bits
    }
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub header: BitstreamHeader,
    pub header_bits: u64,
    pub frames: Vec<FrameRateRecord>,
}

impl RateReport {
    pub fn total_bits(&self) -> u64 {
        self.header_bits + self.frames.iter().map(|f| f.total_bits()).sum::<u64>()
    }

    pub fn total_mv_bits(&self) -> u64 {
        self.frames.iter().map(|f| f.mv_bits).sum()
    }

    pub fn per_frame_bits(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.total_bits()).collect()
    }
}

/// Walks the chunk structure and measures each span.
pub fn stream_rate_report(bitstream: &[u8]) -> Result<RateReport> {
    let mut r = ByteReader::new(bitstream);
    let header = BitstreamHeader::read(&mut r)?;
    let header_bits = r.pos() as u64 * 8;

    let mut frames = Vec::with_capacity(header.frame_count);
    for t in 0..header.frame_count {
        let chunk_type = r.u8("chunk type")?;
        let mut mv_bits = 0u64;
        let mut residual_bits = 8u64; // the type byte
        match chunk_type {
            CHUNK_INTRA => {
                let len = r.u32("payload length")? as usize;
                r.take(len, "intra payload")?;
                residual_bits += (4 + len as u64) * 8;
            }
            CHUNK_RESIDUAL => {
                if header.predictor == PredictorKind::Mc {
                    let mv_len = r.u32("mv length")? as usize;
                    r.take(mv_len, "mv payload")?;
                    mv_bits = (4 + mv_len as u64) * 8;
                }
                let len = r.u32("payload length")? as usize;
                r.take(len, "residual payload")?;
                residual_bits += (4 + len as u64) * 8;
            }
            other => return Err(Error::Decode(format!("frame {t}: unknown chunk type {other}"))),
        }
        frames.push(FrameRateRecord { index: t, intra: chunk_type == CHUNK_INTRA, mv_bits, residual_bits });
    }
    if r.remaining() != 0 {
        return Err(Error::Decode(format!(
            "{} trailing bytes after the last chunk",
            r.remaining()
        )));
    }
    Ok(RateReport { header, header_bits, frames })
}
