//! The internal residual codec and the backend dispatch.
//!
//! Internal stream layout: magic "LFPR", u16 version, u16 width,
//! u16 height, u8 qp, u8 flags (bit 0 set for intra), then bit-packed
//! block payloads in raster block order. Per block, each nonzero
//! quantized coefficient in zigzag order is coded as (zero run: ue,
//! level: se); the end-of-block symbol is ue(64).

use super::dct::{self, BLOCK};
use super::{CodecBackend, Qp, ResidualImage};
use crate::bitio::{BitReader, BitWriter};
use crate::data::Frame;
use crate::error::{Error, Result};
use crate::util::ByteReader;

const MAGIC: &[u8; 4] = b"LFPR";
const VERSION: u16 = 1;
const FLAG_INTRA: u8 = 1;
const EOB: u64 = 64;

/// Encodes a signed residual image.
pub fn encode_residual(r: &ResidualImage, qp: Qp, backend: &CodecBackend) -> Result<Vec<u8>> {
    match backend {
        CodecBackend::Internal => Ok(encode_internal(
            r.values(),
            r.width(),
            r.height(),
            qp,
            false,
        )),
        CodecBackend::External(ext) => ext.encode_image(&residual_to_frame(r), qp),
    }
}

pub fn decode_residual(bytes: &[u8], backend: &CodecBackend) -> Result<ResidualImage> {
    match backend {
        CodecBackend::Internal => {
            let (values, w, h, _, intra) = decode_internal(bytes)?;
            if intra {
                return Err(Error::Decode("stream holds an intra frame, not a residual".into()));
            }
            let clamped = values.iter().map(|&v| v.clamp(-255, 255) as i16).collect();
            ResidualImage::new(w, h, clamped)
        }
        CodecBackend::External(ext) => frame_to_residual(&ext.decode_image(bytes)?),
    }
}

/// Intra coding: pixels are level-shifted by -128 into signed form and
/// run through the residual pipeline.
pub fn encode_intra(f: &Frame, qp: Qp, backend: &CodecBackend) -> Result<Vec<u8>> {
    match backend {
        CodecBackend::Internal => {
            let shifted: Vec<i16> = f.pixels().iter().map(|&p| p as i16 - 128).collect();
            Ok(encode_internal(&shifted, f.width(), f.height(), qp, true))
        }
        CodecBackend::External(ext) => ext.encode_image(f, qp),
    }
}

pub fn decode_intra(bytes: &[u8], backend: &CodecBackend) -> Result<Frame> {
    match backend {
        CodecBackend::Internal => {
            let (values, w, h, _, intra) = decode_internal(bytes)?;
            if !intra {
                return Err(Error::Decode("stream holds a residual, not an intra frame".into()));
            }
            let pixels = values.iter().map(|&v| (v + 128).clamp(0, 255) as u8).collect();
            Frame::new(w, h, pixels)
        }
        CodecBackend::External(ext) => ext.decode_image(bytes),
    }
}

/// 8-bit mapping for external residual coding: clamp(r + 128, 0, 255).
/// Residual magnitudes above 127 lose information here.
fn residual_to_frame(r: &ResidualImage) -> Frame {
    let pixels = r.values().iter().map(|&v| (v + 128).clamp(0, 255) as u8).collect();
    Frame::new(r.width(), r.height(), pixels).expect("residual dims are valid")
}

fn frame_to_residual(f: &Frame) -> Result<ResidualImage> {
    let values = f.pixels().iter().map(|&p| p as i16 - 128).collect();
    ResidualImage::new(f.width(), f.height(), values)
}

/// Round half away from zero, the fixed quantizer rounding rule.
fn quantize(c: f64, qstep: f64) -> i64 {
    (c / qstep).round() as i64
}

fn encode_internal(values: &[i16], width: usize, height: usize, qp: Qp, intra: bool) -> Vec<u8> {
    let qstep = qp.qstep();
    let scan = dct::zigzag_scan();
    let bw = width.div_ceil(BLOCK);
    let bh = height.div_ceil(BLOCK);

    let mut bits = BitWriter::new();
    for by in 0..bh {
        for bx in 0..bw {
            // edge-replicated 8x8 gather
            let mut block = [0f64; 64];
            for y in 0..BLOCK {
                let sy = (by * BLOCK + y).min(height - 1);
                for x in 0..BLOCK {
                    let sx = (bx * BLOCK + x).min(width - 1);
                    block[y * BLOCK + x] = values[sy * width + sx] as f64;
                }
            }
            let coeffs = dct::forward(&block);
            let mut run = 0u64;
            for &pos in scan.iter() {
                let q = quantize(coeffs[pos], qstep);
                if q == 0 {
                    run += 1;
                } else {
                    bits.write_ue(run);
                    bits.write_se(q);
                    run = 0;
                }
            }
            bits.write_ue(EOB);
        }
    }

    let payload = bits.finish();
    let mut out = Vec::with_capacity(12 + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&(height as u16).to_le_bytes());
    out.push(qp.get());
    out.push(if intra { FLAG_INTRA } else { 0 });
    out.extend_from_slice(&payload);
    out
}

fn decode_internal(bytes: &[u8]) -> Result<(Vec<i32>, usize, usize, Qp, bool)> {
    let mut r = ByteReader::new(bytes);
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Decode("not a residual stream (bad magic)".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Decode(format!("unsupported residual stream version {version}")));
    }
    let width = r.u16("width")? as usize;
    let height = r.u16("height")? as usize;
    let qp = Qp::new(r.u8("qp")?).map_err(|e| Error::Decode(e.to_string()))?;
    let flags = r.u8("flags")?;
    if width == 0 || height == 0 {
        return Err(Error::Decode("zero-sized residual stream".into()));
    }

    let qstep = qp.qstep();
    let scan = dct::zigzag_scan();
    let bw = width.div_ceil(BLOCK);
    let bh = height.div_ceil(BLOCK);
    let payload = r.take(r.remaining(), "payload")?;
    let mut bits = BitReader::new(payload);

    let mut values = vec![0i32; width * height];
    for by in 0..bh {
        for bx in 0..bw {
            let mut coeffs = [0f64; 64];
            let mut pos = 0usize;
            loop {
                let run = bits.read_ue()?;
                if run == EOB {
                    break;
                }
                pos += run as usize;
                if pos >= 64 {
                    return Err(Error::Decode(format!(
                        "coefficient run overflows block ({bx},{by})"
                    )));
                }
                let level = bits.read_se()?;
                if level == 0 {
                    return Err(Error::Decode("zero level in coefficient stream".into()));
                }
                coeffs[scan[pos]] = level as f64 * qstep;
                pos += 1;
                if pos > 64 {
                    return Err(Error::Decode("block holds more than 64 coefficients".into()));
                }
            }
            let spatial = dct::inverse(&coeffs);
            for y in 0..BLOCK {
                let dy = by * BLOCK + y;
                if dy >= height {
                    break;
                }
                for x in 0..BLOCK {
                    let dx = bx * BLOCK + x;
                    if dx >= width {
                        break;
                    }
                    values[dy * width + dx] = spatial[y * BLOCK + x].round() as i32;
                }
            }
        }
    }
    Ok((values, width, height, qp, flags & FLAG_INTRA != 0))
}
