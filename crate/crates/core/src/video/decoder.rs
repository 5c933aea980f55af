//! Decoder side of the closed loop: mirrors the encoder's reconstruction
//! rule exactly.

use super::{decode_motion_field, BitstreamHeader, CHUNK_INTRA, CHUNK_RESIDUAL};
use crate::data::Frame;
use crate::error::{Error, Result};
use crate::nets::checkpoint::{self, GeneratorCheckpoint};
use crate::predictor::{fd_predict, lfp_predict, mc_apply, PredictorKind};
use crate::residual::{decode_intra, decode_residual, CodecBackend};
use crate::util::ByteReader;

/// Decodes a bitstream back into frames.
///
/// LFP streams need the generator checkpoint the encoder used (matched
/// by digest); external-backend streams need the codec adapter.
pub fn decode_video(
    bitstream: &[u8],
    model: Option<&GeneratorCheckpoint>,
    backend: &CodecBackend,
) -> Result<Vec<Frame>> {
    let mut r = ByteReader::new(bitstream);
    let header = BitstreamHeader::read(&mut r)?;

    if header.backend_id != backend.id() {
        return Err(Error::Backend(format!(
            "stream was coded with backend {}, decoder holds backend {}",
            header.backend_id,
            backend.id()
        )));
    }

    let generator = match header.predictor {
        PredictorKind::Lfp => {
            let (config_hash, digest) = header.lfp_model.expect("lfp header carries model ids");
            let ck = model.ok_or_else(|| {
                Error::Model("stream needs a generator checkpoint and none was supplied".into())
            })?;
            if ck.digest != digest {
                return Err(Error::Model(format!(
                    "digest mismatch: stream wants {digest:#018x}, checkpoint is {:#018x}",
                    ck.digest
                )));
            }
            let have_hash = checkpoint::generator_config_hash(ck.generator.config());
            if have_hash != config_hash {
                return Err(Error::Model("generator architecture differs from stream".into()));
            }
            Some(&ck.generator)
        }
        _ => None,
    };

    let mut frames: Vec<Frame> = Vec::with_capacity(header.frame_count);
    for t in 0..header.frame_count {
        let chunk_type = r
            .u8("chunk type")
            .map_err(|e| Error::Decode(format!("frame {t}: {e}")))?;
        match chunk_type {
            CHUNK_INTRA => {
                if t >= header.k {
                    return Err(Error::Decode(format!("frame {t}: unexpected intra chunk")));
                }
                let len = r.u32("payload length").map_err(|e| at_frame(t, e))? as usize;
                let payload = r.take(len, "intra payload").map_err(|e| at_frame(t, e))?;
                frames.push(decode_intra(payload, backend)?);
            }
            CHUNK_RESIDUAL => {
                if t < header.k {
                    return Err(Error::Decode(format!(
                        "frame {t}: residual chunk inside the intra warmup"
                    )));
                }
                let prediction = match header.predictor {
                    PredictorKind::Fd => fd_predict(&frames[t - 1]),
                    PredictorKind::Mc => {
                        let (block, range) = header.mc_params.expect("mc header carries params");
                        let mv_len = r.u32("mv length").map_err(|e| at_frame(t, e))? as usize;
                        let mv = r.take(mv_len, "mv payload").map_err(|e| at_frame(t, e))?;
                        let field =
                            decode_motion_field(mv, header.width, header.height, block, range)
                                .map_err(|e| at_frame(t, e))?;
                        mc_apply(&frames[t - 1], &field)?
                    }
                    PredictorKind::Lfp => {
                        let g = generator.expect("lfp streams resolved a generator");
                        let n = g.config().input_frames;
                        let history: Vec<&Frame> = frames[t - n..t].iter().collect();
                        lfp_predict(g, &history)?
                    }
                };
                let len = r.u32("payload length").map_err(|e| at_frame(t, e))? as usize;
                let payload = r.take(len, "residual payload").map_err(|e| at_frame(t, e))?;
                let residual = decode_residual(payload, backend)?;
                frames.push(residual.add_to(&prediction)?);
            }
            other => {
                return Err(Error::Decode(format!("frame {t}: unknown chunk type {other}")));
            }
        }
    }
    Ok(frames)
}

fn at_frame(t: usize, e: Error) -> Error {
    Error::Decode(format!("frame {t}: {e}"))
}
