//! Frame-predicting generator: a constant-resolution residual conv net.
//! N past frames enter as N channels; the output is one frame through a
//! tanh, so values stay in [-1, 1].

use super::init_conv;
use crate::error::{Error, Result};
use crate::tensor::ops::{self, ActKind, ConvParams};
use crate::tensor::{Graph, NodeId, Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorConfig {
    /// Number of past frames consumed per prediction.
    pub input_frames: usize,
    pub channels: usize,
    pub residual_blocks: usize,
    /// Odd, so stride-1 convs with padding (kernel-1)/2 preserve size.
    pub kernel: usize,
    /// Each block's output is scaled by this before the skip addition.
    pub residual_scale: f32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            input_frames: 8,
            channels: 256,
            residual_blocks: 32,
            kernel: 3,
            residual_scale: 0.1,
        }
    }
}

impl GeneratorConfig {
    /// Small instance of the same plan, sized for CPU experiments.
    pub fn desk(input_frames: usize, channels: usize, residual_blocks: usize) -> Self {
        GeneratorConfig { input_frames, channels, residual_blocks, kernel: 3, residual_scale: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_frames == 0 || self.channels == 0 || self.residual_blocks == 0 {
            return Err(Error::Config("generator sizes must be positive".into()));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel must be odd so padding preserves size, got {}",
                self.kernel
            )));
        }
        if !(self.residual_scale > 0.0 && self.residual_scale <= 1.0) {
            return Err(Error::Config(format!(
                "residual scale must lie in (0, 1], got {}",
                self.residual_scale
            )));
        }
        Ok(())
    }

    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock {
    pub conv1: ConvParams<f32>,
    pub conv2: ConvParams<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    cfg: GeneratorConfig,
    pub head: ConvParams<f32>,
    pub blocks: Vec<ResidualBlock>,
    pub tail: ConvParams<f32>,
}

impl Generator {
    /// Deterministic construction: the same (config, seed) always yields
    /// bit-identical parameters.
    pub fn build(cfg: &GeneratorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, p, c) = (cfg.kernel, cfg.padding(), cfg.channels);
        let head = init_conv(c, cfg.input_frames, k, 1, p, &mut rng);
        let blocks = (0..cfg.residual_blocks)
            .map(|_| ResidualBlock {
                conv1: init_conv(c, c, k, 1, p, &mut rng),
                conv2: init_conv(c, c, k, 1, p, &mut rng),
            })
            .collect();
        let tail = init_conv(1, c, k, 1, p, &mut rng);
        Ok(Generator { cfg: *cfg, head, blocks, tail })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.head.param_count()
            + self.blocks.iter().map(|b| b.conv1.param_count() + b.conv2.param_count()).sum::<usize>()
            + self.tail.param_count()
    }

    fn check_input(&self, frames: &Tensor<f32>) -> Result<()> {
        let s = frames.shape();
        if s.c != self.cfg.input_frames {
            return Err(Error::Dimension(format!(
                "generator expects {} input frames, got {}",
                self.cfg.input_frames, s.c
            )));
        }
        if s.h < self.cfg.kernel || s.w < self.cfg.kernel {
            return Err(Error::Dimension(format!(
                "input {}x{} is smaller than the kernel",
                s.h, s.w
            )));
        }
        Ok(())
    }

    /// Inference path. Input `(b, N, h, w)` in [-1, 1]; output
    /// `(b, 1, h, w)` in [-1, 1]. Bit-identical to the traced path.
    pub fn forward(&self, frames: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.check_input(frames)?;
        let head_out = ops::conv2d(frames, &self.head)?;
        let mut x = head_out.clone();
        for b in &self.blocks {
            let a = ops::activation(&ops::conv2d(&x, &b.conv1)?, ActKind::Relu);
            let y = ops::conv2d(&a, &b.conv2)?;
            for (xv, &yv) in x.data_mut().iter_mut().zip(y.data()) {
                *xv += self.cfg.residual_scale * yv;
            }
        }
        // global skip from the head output into the tail
        for (xv, &hv) in x.data_mut().iter_mut().zip(head_out.data()) {
            *xv += hv;
        }
        Ok(ops::activation(&ops::conv2d(&x, &self.tail)?, ActKind::Tanh))
    }

    /// Parameter arrays in declaration order: head, then each block's
    /// conv1/conv2, then tail; weights before bias.
    pub fn param_slices(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = vec![self.head.weights.data(), &self.head.bias];
        for b in &self.blocks {
            out.push(b.conv1.weights.data());
            out.push(&b.conv1.bias);
            out.push(b.conv2.weights.data());
            out.push(&b.conv2.bias);
        }
        out.push(self.tail.weights.data());
        out.push(&self.tail.bias);
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = vec![self.head.weights.data_mut(), &mut self.head.bias];
        for b in &mut self.blocks {
            out.push(b.conv1.weights.data_mut());
            out.push(&mut b.conv1.bias);
            out.push(b.conv2.weights.data_mut());
            out.push(&mut b.conv2.bias);
        }
        out.push(self.tail.weights.data_mut());
        out.push(&mut self.tail.bias);
        out
    }

    /// Graph-leaf shapes matching `param_slices` (bias as `(1, c, 1, 1)`).
    pub fn param_shapes(&self) -> Vec<Shape> {
        let conv_shapes = |c: &ConvParams<f32>| {
            [c.weights.shape(), Shape::new(1, c.bias.len(), 1, 1)]
        };
        let mut out: Vec<Shape> = conv_shapes(&self.head).to_vec();
        for b in &self.blocks {
            out.extend(conv_shapes(&b.conv1));
            out.extend(conv_shapes(&b.conv2));
        }
        out.extend(conv_shapes(&self.tail));
        out
    }

    pub fn register_params(&self, g: &mut Graph<f32>) -> Vec<NodeId> {
        super::leaves_from_params(g, &self.param_shapes(), &self.param_slices())
    }

    /// Traces the forward pass on a graph; `params` must come from
    /// `register_params`.
    pub fn forward_graph(
        &self,
        g: &mut Graph<f32>,
        input: NodeId,
        params: &[NodeId],
    ) -> Result<NodeId> {
        self.check_input(g.value(input))?;
        let p = self.cfg.padding();
        let head_out = g.conv2d(input, params[0], params[1], 1, p)?;
        let mut x = head_out;
        for (i, _) in self.blocks.iter().enumerate() {
            let base = 2 + i * 4;
            let c1 = g.conv2d(x, params[base], params[base + 1], 1, p)?;
            let a = g.activation(c1, ActKind::Relu);
            let c2 = g.conv2d(a, params[base + 2], params[base + 3], 1, p)?;
            let s = g.scale(c2, self.cfg.residual_scale);
            x = g.add(x, s)?;
        }
        let skipped = g.add(x, head_out)?;
        let base = 2 + self.blocks.len() * 4;
        let t = g.conv2d(skipped, params[base], params[base + 1], 1, p)?;
        Ok(g.activation(t, ActKind::Tanh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeroed(cfg: &GeneratorConfig) -> Generator {
        let mut g = Generator::build(cfg, 0).unwrap();
        for s in g.param_slices_mut() {
            s.fill(0.0);
        }
        g
    }

    #[test]
    fn paper_config_parameter_count() {
        let cfg = GeneratorConfig::default();
        let g = Generator::build(&cfg, 1).unwrap();
        // closed form: head 8*256*9+256, 32 blocks of 2*(256*256*9+256),
        // tail 256*9+1
        let head = 8 * 256 * 9 + 256;
        let block = 2 * (256 * 256 * 9 + 256);
        let tail = 256 * 9 + 1;
        assert_eq!(g.param_count(), head + 32 * block + tail);
        assert_eq!(g.param_count(), 37_786_113);
    }

    #[test]
    fn desk_config_builds_and_seed_is_deterministic() {
        let cfg = GeneratorConfig::desk(4, 16, 4);
        let a = Generator::build(&cfg, 7).unwrap();
        let b = Generator::build(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = Generator::build(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = GeneratorConfig::desk(4, 16, 4);
        cfg.kernel = 4;
        assert!(Generator::build(&cfg, 0).is_err());
        cfg = GeneratorConfig::desk(4, 16, 4);
        cfg.residual_scale = 0.0;
        assert!(Generator::build(&cfg, 0).is_err());
        cfg = GeneratorConfig::desk(0, 16, 4);
        assert!(Generator::build(&cfg, 0).is_err());
    }

    #[test]
    fn zero_parameters_give_tanh_zero() {
        let g = zeroed(&GeneratorConfig::desk(2, 4, 2));
        let input = Tensor::filled(Shape::new(1, 2, 8, 8), 0.5);
        let out = g.forward(&input).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_size_matches_input_size() {
        let g = Generator::build(&GeneratorConfig::desk(8, 4, 1), 3).unwrap();
        for (h, w) in [(288, 352), (48, 48), (17, 31)] {
            let input = Tensor::zeros(Shape::new(1, 8, h, w));
            let out = g.forward(&input).unwrap();
            assert_eq!(out.shape(), Shape::new(1, 1, h, w));
        }
    }

    #[test]
    fn output_stays_in_tanh_range() {
        let g = Generator::build(&GeneratorConfig::desk(3, 8, 2), 5).unwrap();
        let input = Tensor::filled(Shape::new(2, 3, 16, 16), 0.9);
        let out = g.forward(&input).unwrap();
        assert!(out.data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn wrong_frame_count_rejected() {
        let g = Generator::build(&GeneratorConfig::desk(4, 8, 1), 0).unwrap();
        let input = Tensor::zeros(Shape::new(1, 3, 16, 16));
        assert!(matches!(g.forward(&input), Err(Error::Dimension(_))));
    }

    #[test]
    fn zeroed_second_conv_makes_blocks_identity() {
        let cfg = GeneratorConfig::desk(2, 4, 3);
        let mut with_blocks = Generator::build(&cfg, 11).unwrap();
        for b in &mut with_blocks.blocks {
            b.conv2.weights.data_mut().fill(0.0);
            b.conv2.bias.fill(0.0);
        }
        // identical head/tail, no blocks: block chain must vanish
        let mut no_blocks = with_blocks.clone();
        no_blocks.blocks.clear();
        let input = Tensor::filled(Shape::new(1, 2, 12, 12), 0.3);
        let a = with_blocks.forward(&input).unwrap();
        let b = no_blocks.forward(&input).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn residual_scale_zero_equals_no_blocks() {
        // scale -> 0 exactly removes the blocks regardless of their weights
        let cfg = GeneratorConfig::desk(2, 4, 3);
        let mut g = Generator::build(&cfg, 13).unwrap();
        g.cfg.residual_scale = 0.0; // bypass validation deliberately
        let mut empty = g.clone();
        empty.blocks.clear();
        let input = Tensor::filled(Shape::new(1, 2, 10, 10), -0.2);
        assert_eq!(g.forward(&input).unwrap().data(), empty.forward(&input).unwrap().data());
    }

    #[test]
    fn traced_forward_matches_inference_bitwise() {
        let g = Generator::build(&GeneratorConfig::desk(4, 8, 2), 21).unwrap();
        let input = Tensor::new(
            Shape::new(2, 4, 9, 9),
            (0..2 * 4 * 81).map(|i| ((i as f32 * 0.17).sin()) * 0.8).collect(),
        )
        .unwrap();
        let plain = g.forward(&input).unwrap();
        let mut graph = Graph::new();
        let params = g.register_params(&mut graph);
        let inp = graph.leaf(input, false);
        let out = g.forward_graph(&mut graph, inp, &params).unwrap();
        assert_eq!(graph.value(out).data(), plain.data());
    }
}
