//! Network construction and forward evaluation: the frame-predicting
//! generator and the sequence discriminator used for adversarial
//! fine-tuning.

pub mod checkpoint;
mod discriminator;
mod generator;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorConfig, ResidualBlock};

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::tensor::ops::ConvParams;
use crate::tensor::{Shape, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Kaiming-style fan-in scaled uniform init for conv weights; biases are
/// zero. Fill order is fixed, so a seed pins every parameter.
fn init_conv(
    out_c: usize,
    in_c: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    rng: &mut ChaCha8Rng,
) -> ConvParams<f32> {
    let fan_in = (in_c * kernel * kernel) as f64;
    let bound = (6.0 / fan_in).sqrt() as f32;
    let shape = Shape::new(out_c, in_c, kernel, kernel);
    let data = (0..shape.numel()).map(|_| rng.random_range(-bound..bound)).collect();
    ConvParams {
        weights: Tensor::new(shape, data).expect("shape matches generated data"),
        bias: vec![0.0; out_c],
        stride,
        padding,
    }
}

/// Maps a `(1, 1, h, w)` tensor in [-1, 1] to an 8-bit frame:
/// `round((x + 1) * 127.5)`, half away from zero, clamped to [0, 255].
pub fn to_uint8_frame(t: &Tensor<f32>) -> Result<Frame> {
    let s = t.shape();
    if s.n != 1 || s.c != 1 {
        return Err(Error::Dimension(format!("expected a single-channel image, got {s}")));
    }
    let pixels = t
        .data()
        .iter()
        .map(|&x| ((x + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8)
        .collect();
    Frame::new(s.w, s.h, pixels)
}

/// Registers every parameter array of a network as graph leaves, in the
/// same order as its `param_slices`.
pub(crate) fn leaves_from_params(
    g: &mut crate::tensor::Graph<f32>,
    shapes: &[Shape],
    slices: &[&[f32]],
) -> Vec<crate::tensor::NodeId> {
    shapes
        .iter()
        .zip(slices)
        .map(|(&shape, &data)| {
            let t = Tensor::new(shape, data.to_vec()).expect("parameter shapes are consistent");
            g.leaf(t, true)
        })
        .collect()
}
