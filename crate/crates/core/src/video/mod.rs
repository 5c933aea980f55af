//! Closed-loop predictive video codec: K intra frames, then per-frame
//! prediction from *reconstructed* history, residual coding, and in-loop
//! reconstruction identical at encoder and decoder.
//!
//! Bitstream layout (little endian): magic "LFPV", u16 version,
//! u16 width, u16 height, u32 frame count, u32/u32 fps rational, u8 K,
//! u8 predictor id, u8 qp, u8 backend id; MC streams add u8 block size
//! and u8 search range; LFP streams add u64 generator config hash and
//! u64 checkpoint digest. Then one chunk per frame: u8 chunk type
//! (0 intra, 1 residual); MC residual chunks carry u32 length + motion
//! vector payload; all chunks end with u32 length + residual payload.

mod decoder;
mod encoder;
mod report;

pub use decoder::decode_video;
pub use encoder::{encode_video, EncodeParams, EncodeResult};
pub use report::{stream_rate_report, FrameRateRecord, RateReport};

use crate::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::predictor::{MotionField, PredictorKind};
use crate::residual::Qp;
use crate::util::ByteReader;

pub(crate) const MAGIC: &[u8; 4] = b"LFPV";
pub(crate) const VERSION: u16 = 1;
pub(crate) const CHUNK_INTRA: u8 = 0;
pub(crate) const CHUNK_RESIDUAL: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub fps: (u32, u32),
    pub k: usize,
    pub predictor: PredictorKind,
    pub qp: Qp,
    pub backend_id: u8,
    /// MC only: (block size, full-pel search range).
    pub mc_params: Option<(usize, i32)>,
    /// LFP only: (generator config hash, checkpoint digest).
    pub lfp_model: Option<(u64, u64)>,
}

impl BitstreamHeader {
    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.extend_from_slice(&(self.frame_count as u32).to_le_bytes());
        out.extend_from_slice(&self.fps.0.to_le_bytes());
        out.extend_from_slice(&self.fps.1.to_le_bytes());
        out.push(self.k as u8);
        out.push(self.predictor.id());
        out.push(self.qp.get());
        out.push(self.backend_id);
        if let Some((block, range)) = self.mc_params {
            out.push(block as u8);
            out.push(range as u8);
        }
        if let Some((config_hash, digest)) = self.lfp_model {
            out.extend_from_slice(&config_hash.to_le_bytes());
            out.extend_from_slice(&digest.to_le_bytes());
        }
    }

    pub(crate) fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Decode("not a video bitstream (bad magic)".into()));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported bitstream version {version}")));
        }
        let width = r.u16("width")? as usize;
        let height = r.u16("height")? as usize;
        let frame_count = r.u32("frame count")? as usize;
        let fps = (r.u32("fps numerator")?, r.u32("fps denominator")?);
        let k = r.u8("intra count")? as usize;
        let predictor = PredictorKind::from_id(r.u8("predictor id")?)?;
        let qp = Qp::new(r.u8("qp")?).map_err(|e| Error::Decode(e.to_string()))?;
        let backend_id = r.u8("backend id")?;
        let mc_params = if predictor == PredictorKind::Mc {
            let block = r.u8("mc block")? as usize;
            let range = r.u8("mc range")? as i32;
            Some((block, range))
        } else {
            None
        };
        let lfp_model = if predictor == PredictorKind::Lfp {
            Some((r.u64("config hash")?, r.u64("checkpoint digest")?))
        } else {
            None
        };
        if fps.0 == 0 || fps.1 == 0 {
            return Err(Error::Decode("zero fps rational".into()));
        }
        Ok(BitstreamHeader {
            width,
            height,
            frame_count,
            fps,
            k,
            predictor,
            qp,
            backend_id,
            mc_params,
            lfp_model,
        })
    }
}

/// Parses just the header of a bitstream.
pub fn parse_header(bytes: &[u8]) -> Result<BitstreamHeader> {
    BitstreamHeader::read(&mut ByteReader::new(bytes))
}

/// Motion vectors as per-component deltas from the previous block in
/// raster order, signed exp-Golomb coded. Runs of equal vectors cost two
/// bits per block.
pub(crate) fn encode_motion_field(field: &MotionField) -> Vec<u8> {
    let mut bits = BitWriter::new();
    let mut prev = (0i16, 0i16);
    for &(dx, dy) in field.vectors() {
        bits.write_se((dx - prev.0) as i64);
        bits.write_se((dy - prev.1) as i64);
        prev = (dx, dy);
    }
    bits.finish()
}

pub(crate) fn decode_motion_field(
    bytes: &[u8],
    width: usize,
    height: usize,
    block: usize,
    range: i32,
) -> Result<MotionField> {
    let cols = width.div_ceil(block);
    let rows = height.div_ceil(block);
    let mut bits = BitReader::new(bytes);
    let mut vectors = Vec::with_capacity(cols * rows);
    let mut prev = (0i64, 0i64);
    for _ in 0..cols * rows {
        let dx = prev.0 + bits.read_se()?;
        let dy = prev.1 + bits.read_se()?;
        prev = (dx, dy);
        let limit = 2 * range as i64;
        if dx.abs() > limit || dy.abs() > limit {
            return Err(Error::Decode(format!("motion vector ({dx},{dy}) out of range")));
        }
        vectors.push((dx as i16, dy as i16));
    }
    MotionField::new(width, height, block, range, vectors)
        .map_err(|e| Error::Decode(e.to_string()))
}
