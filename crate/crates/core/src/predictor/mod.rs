//! The three frame predictors behind one dispatch point: frame
//! difference, 16x16 half-pel block motion compensation, and the learned
//! network predictor.

pub mod motion;

pub use motion::{mc_apply, mc_estimate, sample_half_pel, MotionField};

use crate::data::{frames_to_tensor, Frame};
use crate::error::{Error, Result};
use crate::nets::{to_uint8_frame, Generator};

pub const MC_BLOCK_SIZE: usize = 16;
pub const MC_SEARCH_RANGE: i32 = 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Fd,
    Mc,
    Lfp,
}

impl PredictorKind {
    pub fn id(self) -> u8 {
        match self {
            PredictorKind::Fd => 0,
            PredictorKind::Mc => 1,
            PredictorKind::Lfp => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(PredictorKind::Fd),
            1 => Ok(PredictorKind::Mc),
            2 => Ok(PredictorKind::Lfp),
            other => Err(Error::Decode(format!("unknown predictor id {other}"))),
        }
    }
}

impl std::fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictorKind::Fd => "fd",
            PredictorKind::Mc => "mc",
            PredictorKind::Lfp => "lfp",
        })
    }
}

pub enum Predictor {
    FrameDiff,
    MotionComp { block: usize, range: i32 },
    Learned(Generator),
}

impl Predictor {
    pub fn motion_comp() -> Self {
        Predictor::MotionComp { block: MC_BLOCK_SIZE, range: MC_SEARCH_RANGE }
    }

    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::FrameDiff => PredictorKind::Fd,
            Predictor::MotionComp { .. } => PredictorKind::Mc,
            Predictor::Learned(_) => PredictorKind::Lfp,
        }
    }

    /// Decoded frames the predictor must see before it can predict.
    pub fn history_len(&self) -> usize {
        match self {
            Predictor::FrameDiff | Predictor::MotionComp { .. } => 1,
            Predictor::Learned(g) => g.config().input_frames,
        }
    }
}

/// The trivial predictor: reuse the previous frame.
pub fn fd_predict(prev: &Frame) -> Frame {
    prev.clone()
}

/// Runs the generator on the last N frames: normalize, forward, quantize
/// back to 8 bits. Deterministic for fixed weights.
pub fn lfp_predict(generator: &Generator, history: &[&Frame]) -> Result<Frame> {
    let n = generator.config().input_frames;
    if history.len() != n {
        return Err(Error::Usage(format!(
            "learned predictor needs exactly {n} history frames, got {}",
            history.len()
        )));
    }
    let input = frames_to_tensor(history)?;
    let out = generator.forward(&input)?;
    to_uint8_frame(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;
    use crate::nets::GeneratorConfig;

    #[test]
    fn fd_returns_the_frame_unchanged() {
        let f = synth::textured_frame(24, 16, 3);
        assert_eq!(fd_predict(&f), f);
    }

    #[test]
    fn fd_residual_on_static_video_is_zero() {
        let f = synth::textured_frame(24, 16, 4);
        let pred = fd_predict(&f);
        assert!(f.pixels().iter().zip(pred.pixels()).all(|(a, b)| a == b));
    }

    #[test]
    fn fd_residual_nonzero_under_global_shift() {
        let f = synth::textured_frame(32, 32, 5);
        let shifted = synth::shift_frame_clamped(&f, 3, 0);
        // direct subtraction oracle: residual energy is strictly positive
        let energy: u64 = shifted
            .pixels()
            .iter()
            .zip(f.pixels())
            .map(|(&a, &b)| {
                let d = a as i64 - b as i64;
                (d * d) as u64
            })
            .sum();
        assert!(energy > 0);
    }

    #[test]
    fn zero_generator_predicts_mid_gray() {
        let cfg = GeneratorConfig::desk(2, 4, 1);
        let mut g = Generator::build(&cfg, 0).unwrap();
        for s in g.param_slices_mut() {
            s.fill(0.0);
        }
        let a = synth::textured_frame(20, 12, 1);
        let b = synth::textured_frame(20, 12, 2);
        let pred = lfp_predict(&g, &[&a, &b]).unwrap();
        // tanh(0) = 0 maps to round(127.5) = 128
        assert!(pred.pixels().iter().all(|&v| v == 128));
    }

    #[test]
    fn lfp_is_deterministic_and_size_preserving() {
        let g = Generator::build(&GeneratorConfig::desk(2, 6, 1), 9).unwrap();
        let a = synth::textured_frame(40, 24, 1);
        let b = synth::textured_frame(40, 24, 2);
        let p1 = lfp_predict(&g, &[&a, &b]).unwrap();
        let p2 = lfp_predict(&g, &[&a, &b]).unwrap();
        assert_eq!(p1, p2);
        assert_eq!((p1.width(), p1.height()), (40, 24));
    }

    #[test]
    fn lfp_rejects_wrong_history_length() {
        let g = Generator::build(&GeneratorConfig::desk(3, 4, 1), 0).unwrap();
        let a = synth::textured_frame(20, 20, 1);
        assert!(matches!(lfp_predict(&g, &[&a]), Err(Error::Usage(_))));
    }

    #[test]
    fn history_lengths_by_kind() {
        assert_eq!(Predictor::FrameDiff.history_len(), 1);
        assert_eq!(Predictor::motion_comp().history_len(), 1);
        let g = Generator::build(&GeneratorConfig::desk(5, 4, 1), 0).unwrap();
        assert_eq!(Predictor::Learned(g).history_len(), 5);
    }
}
