//! Dense 4-D tensors and the scalar trait the numeric kernels build on.
//!
//! Everything network-related runs on `(batch, channels, height, width)`
//! tensors. Training runs in `f32`; gradient-check tests instantiate the
//! same code in `f64`.

mod adam;
mod conv_fast;
mod graph;
pub mod ops;
mod simd;

pub use adam::AdamState;
pub use graph::{Graph, NodeId};
pub use ops::ActKind;

use crate::error::{Error, Result};
use std::fmt;

/// Element type for all tensor math.
pub trait Scalar:
    num_traits::Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// acc[i] += a * xs[i]. Slices must have equal length.
    fn axpy(acc: &mut [Self], xs: &[Self], a: Self) {
        for (y, &x) in acc.iter_mut().zip(xs) {
            *y = *y + a * x;
        }
    }

    /// Inner product with a fixed reduction order.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        let mut s = Self::zero();
        for (&x, &y) in a.iter().zip(b) {
            s = s + x * y;
        }
        s
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn axpy(acc: &mut [Self], xs: &[Self], a: Self) {
        simd::axpy_f32(acc, xs, a);
    }
    fn dot(a: &[Self], b: &[Self]) -> Self {
        simd::dot_f32(a, b)
    }
}

/// (batch, channels, height, width), row-major storage.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense 4-D array with an optional gradient buffer of identical shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data, grad: None })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: vec![T::zero(); shape.numel()], grad: None }
    }

    pub fn filled(shape: Shape, v: T) -> Self {
        Tensor { shape, data: vec![v; shape.numel()], grad: None }
    }

    /// Single-element tensor.
    pub fn scalar(v: T) -> Self {
        Tensor { shape: Shape::new(1, 1, 1, 1), data: vec![v], grad: None }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.shape.index(n, c, y, x)]
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<T>) -> Result<()> {
        if grad.len() != self.shape.numel() {
            return Err(Error::Dimension(format!(
                "gradient length {} does not match shape {}",
                grad.len(),
                self.shape
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// True when every element is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
