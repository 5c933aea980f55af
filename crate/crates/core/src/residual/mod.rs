//! Still-image coding of intra frames and prediction residuals: an
//! internal DCT/quantize/zigzag/exp-Golomb codec plus an adapter for an
//! external still-image codec executable.

mod codec;
mod dct;
mod external;

pub use codec::{decode_intra, decode_residual, encode_intra, encode_residual};
pub use external::ExternalCodec;

use crate::data::Frame;
use crate::error::{Error, Result};

/// Signed difference image with values in [-255, 255].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualImage {
    width: usize,
    height: usize,
    values: Vec<i16>,
}

impl ResidualImage {
    pub fn new(width: usize, height: usize, values: Vec<i16>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "residual holds {} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.abs() > 255) {
            return Err(Error::Input(format!("residual value {v} outside [-255, 255]")));
        }
        Ok(ResidualImage { width, height, values })
    }

    /// Elementwise `original - predicted`; always representable.
    pub fn from_diff(original: &Frame, predicted: &Frame) -> Result<Self> {
        if original.width() != predicted.width() || original.height() != predicted.height() {
            return Err(Error::Dimension("difference operands disagree".into()));
        }
        let values = original
            .pixels()
            .iter()
            .zip(predicted.pixels())
            .map(|(&o, &p)| o as i16 - p as i16)
            .collect();
        Ok(ResidualImage {
            width: original.width(),
            height: original.height(),
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        ResidualImage { width, height, values: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[i16] {
        &self.values
    }

    /// `clamp(predicted + residual, 0, 255)`, the reconstruction rule.
    pub fn add_to(&self, predicted: &Frame) -> Result<Frame> {
        if predicted.width() != self.width || predicted.height() != self.height {
            return Err(Error::Dimension("residual and prediction disagree".into()));
        }
        let pixels = predicted
            .pixels()
            .iter()
            .zip(&self.values)
            .map(|(&p, &r)| (p as i16 + r).clamp(0, 255) as u8)
            .collect();
        Frame::new(self.width, self.height, pixels)
    }
}

/// Quantization parameter, 1..=51.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Qp(u8);

impl Qp {
    pub fn new(qp: u8) -> Result<Self> {
        if (1..=51).contains(&qp) {
            Ok(Qp(qp))
        } else {
            Err(Error::Usage(format!("qp must lie in 1..=51, got {qp}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Step size `2^((qp - 4) / 6)`: +6 qp doubles the quantizer.
    pub fn qstep(self) -> f64 {
        2f64.powf((self.0 as f64 - 4.0) / 6.0)
    }
}

/// Which still-image codec carries intra frames and residuals.
pub enum CodecBackend {
    Internal,
    External(ExternalCodec),
}

impl CodecBackend {
    pub fn id(&self) -> u8 {
        match self {
            CodecBackend::Internal => 0,
            CodecBackend::External(_) => 1,
        }
    }
}
