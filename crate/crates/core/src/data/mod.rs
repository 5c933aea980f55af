//! Frame I/O, training patch extraction, and the binary dataset store.

mod frame;
mod patches;
pub mod pgm;
mod store;
pub mod synth;

pub use frame::Frame;
pub use patches::{
    extract_patch_samples, patch_pair_mse, ExtractOutcome, PatchSample, FRAMES_PER_SAMPLE,
    PATCH_SIZE,
};
pub use store::DatasetStore;

use crate::tensor::{Shape, Tensor};

/// Maps 8-bit pixels into [-1, 1]: v/127.5 - 1.
pub fn normalize_byte(v: u8) -> f32 {
    v as f32 / 127.5 - 1.0
}

/// Normalizes a patch or any raw 8-bit buffer into [-1, 1].
pub fn normalize_patch(patch: &[u8]) -> Vec<f32> {
    patch.iter().map(|&v| normalize_byte(v)).collect()
}

/// Stacks frames as channels of one normalized tensor `(1, n, h, w)`.
/// All frames must share dimensions.
pub fn frames_to_tensor(frames: &[&Frame]) -> crate::Result<Tensor<f32>> {
    let first = frames
        .first()
        .ok_or_else(|| crate::Error::Input("no frames to stack".into()))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(frames.len() * w * h);
    for f in frames {
        if f.width() != w || f.height() != h {
            return Err(crate::Error::Dimension(format!(
                "frame dimensions differ: {}x{} vs {w}x{h}",
                f.width(),
                f.height()
            )));
        }
        data.extend(f.pixels().iter().map(|&v| normalize_byte(v)));
    }
    Tensor::new(Shape::new(1, frames.len(), h, w), data)
}
