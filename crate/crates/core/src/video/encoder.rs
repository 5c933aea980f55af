//! Encoder side of the closed loop. Every prediction reads reconstructed
//! frames, never originals, so the decoder sees identical inputs.

use super::{
    encode_motion_field, stream_rate_report, BitstreamHeader, RateReport, CHUNK_INTRA,
    CHUNK_RESIDUAL,
};
use crate::data::Frame;
use crate::error::{Error, Result};
use crate::nets::checkpoint;
use crate::predictor::{fd_predict, lfp_predict, mc_estimate, Predictor};
use crate::residual::{
    decode_intra, decode_residual, encode_intra, encode_residual, CodecBackend, Qp, ResidualImage,
};

#[derive(Clone, Copy, Debug)]
pub struct EncodeParams {
    pub qp: Qp,
    /// Intra warmup count.
    pub k: usize,
    pub fps: (u32, u32),
}

pub struct EncodeResult {
    pub bitstream: Vec<u8>,
    /// The encoder's in-loop reconstructions, frame by frame. The decoder
    /// must reproduce these bit-exactly.
    pub reconstructions: Vec<Frame>,
    pub report: RateReport,
}

pub fn encode_video(
    frames: &[Frame],
    predictor: &Predictor,
    params: &EncodeParams,
    backend: &CodecBackend,
) -> Result<EncodeResult> {
    if frames.is_empty() {
        return Err(Error::Input("nothing to encode".into()));
    }
    let (width, height) = (frames[0].width(), frames[0].height());
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::Input(format!("frame extent {width}x{height} exceeds the format")));
    }
    for (i, f) in frames.iter().enumerate() {
        if f.width() != width || f.height() != height {
            return Err(Error::Input(format!(
                "frame {i} is {}x{}, expected {width}x{height}",
                f.width(),
                f.height()
            )));
        }
    }
    let k = params.k;
    let history_needed = predictor.history_len().max(1);
    if k < history_needed {
        return Err(Error::Config(format!(
            "intra warmup k={k} is below the predictor's history length {history_needed}"
        )));
    }
    if frames.len() < k {
        return Err(Error::Input(format!(
            "clip has {} frames, fewer than k={k}",
            frames.len()
        )));
    }
    if params.fps.0 == 0 || params.fps.1 == 0 {
        return Err(Error::Usage("fps must be a positive rational".into()));
    }

    let header = BitstreamHeader {
        width,
        height,
        frame_count: frames.len(),
        fps: params.fps,
        k,
        predictor: predictor.kind(),
        qp: params.qp,
        backend_id: backend.id(),
        mc_params: match predictor {
            Predictor::MotionComp { block, range } => Some((*block, *range)),
            _ => None,
        },
        lfp_model: match predictor {
            Predictor::Learned(g) => {
                let bytes = checkpoint::generator_to_bytes(g);
                Some((
                    checkpoint::generator_config_hash(g.config()),
                    checkpoint::digest(&bytes),
                ))
            }
            _ => None,
        },
    };

    let mut bitstream = Vec::new();
    header.write(&mut bitstream);

    let mut reconstructions: Vec<Frame> = Vec::with_capacity(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        if t < k {
            let payload = encode_intra(frame, params.qp, backend)?;
            let rec = decode_intra(&payload, backend)?;
            bitstream.push(CHUNK_INTRA);
            bitstream.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            bitstream.extend_from_slice(&payload);
            reconstructions.push(rec);
            continue;
        }

        let (prediction, mv_payload) = match predictor {
            Predictor::FrameDiff => (fd_predict(&reconstructions[t - 1]), None),
            Predictor::MotionComp { block, range } => {
                // the estimator sees the original target; only the field
                // and residual are transmitted
                let (field, predicted) =
                    mc_estimate(&reconstructions[t - 1], frame, *block, *range)?;
                (predicted, Some(encode_motion_field(&field)))
            }
            Predictor::Learned(g) => {
                let n = g.config().input_frames;
                let history: Vec<&Frame> = reconstructions[t - n..t].iter().collect();
                (lfp_predict(g, &history)?, None)
            }
        };

        let residual = ResidualImage::from_diff(frame, &prediction)?;
        let payload = encode_residual(&residual, params.qp, backend)?;
        let decoded_residual = decode_residual(&payload, backend)?;
        let rec = decoded_residual.add_to(&prediction)?;

        bitstream.push(CHUNK_RESIDUAL);
        if let Some(mv) = mv_payload {
            bitstream.extend_from_slice(&(mv.len() as u32).to_le_bytes());
            bitstream.extend_from_slice(&mv);
        }
        bitstream.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        bitstream.extend_from_slice(&payload);
        reconstructions.push(rec);
    }

    let report = stream_rate_report(&bitstream)?;
    Ok(EncodeResult { bitstream, reconstructions, report })
}
