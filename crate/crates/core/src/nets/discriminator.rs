//! Sequence discriminator: three unpadded k7 convolutions separated by
//! leaky ReLU and 2x2 average pooling, ending in a sigmoid scalar. No
//! fully connected layers; the spatial trace 48-42-21-15-7-1 collapses a
//! 48x48 patch sequence to one probability.

use super::init_conv;
use crate::error::{Error, Result};
use crate::tensor::ops::{ActKind, ConvParams};
use crate::tensor::{Graph, NodeId, Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LEAKY_SLOPE: f32 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    /// Sequence length fed in as channels (8 context + candidate 9th).
    pub input_frames: usize,
    pub patch_size: usize,
    pub kernel: usize,
    /// Hidden channel plan: input_frames -> c1 -> c2 -> 1.
    pub channels: (usize, usize),
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { input_frames: 9, patch_size: 48, kernel: 7, channels: (64, 128) }
    }
}

impl DiscriminatorConfig {
    pub fn desk(channels: (usize, usize)) -> Self {
        DiscriminatorConfig { channels, ..Default::default() }
    }

    /// Spatial sizes after each stage; the final one must be exactly 1.
    pub fn spatial_trace(&self) -> Result<Vec<usize>> {
        let k = self.kernel;
        let mut s = self.patch_size;
        let mut trace = vec![s];
        for stage in 0..3 {
            if s < k {
                return Err(Error::Config(format!(
                    "patch size {} collapses below kernel {k} at stage {stage}",
                    self.patch_size
                )));
            }
            s = s - k + 1; // unpadded conv
            trace.push(s);
            if stage < 2 {
                if s < 2 {
                    return Err(Error::Config("activation too small for 2x2 pooling".into()));
                }
                s = (s - 2) / 2 + 1;
                trace.push(s);
            }
        }
        if s != 1 {
            return Err(Error::Config(format!(
                "plan must end at a single value, patch size {} ends at {s}",
                self.patch_size
            )));
        }
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_frames == 0 || self.channels.0 == 0 || self.channels.1 == 0 {
            return Err(Error::Config("discriminator sizes must be positive".into()));
        }
        self.spatial_trace()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    cfg: DiscriminatorConfig,
    pub conv1: ConvParams<f32>,
    pub conv2: ConvParams<f32>,
    pub conv3: ConvParams<f32>,
}

impl Discriminator {
    pub fn build(cfg: &DiscriminatorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.kernel;
        let (c1, c2) = cfg.channels;
        Ok(Discriminator {
            cfg: *cfg,
            conv1: init_conv(c1, cfg.input_frames, k, 1, 0, &mut rng),
            conv2: init_conv(c2, c1, k, 1, 0, &mut rng),
            conv3: init_conv(1, c2, k, 1, 0, &mut rng),
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count() + self.conv2.param_count() + self.conv3.param_count()
    }

    fn check_input(&self, seq: &Tensor<f32>) -> Result<()> {
        let s = seq.shape();
        if s.c != self.cfg.input_frames || s.h != self.cfg.patch_size || s.w != self.cfg.patch_size
        {
            return Err(Error::Dimension(format!(
                "discriminator expects {}x{}x{} sequences, got {}",
                self.cfg.input_frames, self.cfg.patch_size, self.cfg.patch_size, s
            )));
        }
        Ok(())
    }

    /// `(b, 9, 48, 48)` in [-1, 1] to `(b, 1, 1, 1)` authenticity scores
    /// in (0, 1).
    pub fn forward(&self, seq: &Tensor<f32>) -> Result<Tensor<f32>> {
        use crate::tensor::ops as t;
        self.check_input(seq)?;
        let x = t::activation(&t::conv2d(seq, &self.conv1)?, ActKind::LeakyRelu(LEAKY_SLOPE));
        let x = t::avg_pool2d(&x, 2, 2)?;
        let x = t::activation(&t::conv2d(&x, &self.conv2)?, ActKind::LeakyRelu(LEAKY_SLOPE));
        let x = t::avg_pool2d(&x, 2, 2)?;
        Ok(t::activation(&t::conv2d(&x, &self.conv3)?, ActKind::Sigmoid))
    }

    pub fn param_slices(&self) -> Vec<&[f32]> {
        vec![
            self.conv1.weights.data(),
            &self.conv1.bias,
            self.conv2.weights.data(),
            &self.conv2.bias,
            self.conv3.weights.data(),
            &self.conv3.bias,
        ]
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f32]> {
        vec![
            self.conv1.weights.data_mut(),
            &mut self.conv1.bias,
            self.conv2.weights.data_mut(),
            &mut self.conv2.bias,
            self.conv3.weights.data_mut(),
            &mut self.conv3.bias,
        ]
    }

    pub fn param_shapes(&self) -> Vec<Shape> {
        vec![
            self.conv1.weights.shape(),
            Shape::new(1, self.conv1.bias.len(), 1, 1),
            self.conv2.weights.shape(),
            Shape::new(1, self.conv2.bias.len(), 1, 1),
            self.conv3.weights.shape(),
            Shape::new(1, self.conv3.bias.len(), 1, 1),
        ]
    }

    /// Leaves for training the discriminator; pass `frozen = true` when
    /// tracing generator updates so no gradient reaches these parameters.
    pub fn register_params(&self, g: &mut Graph<f32>, frozen: bool) -> Vec<NodeId> {
        self.param_shapes()
            .iter()
            .zip(self.param_slices())
            .map(|(&shape, data)| {
                let t = Tensor::new(shape, data.to_vec()).expect("parameter shapes are consistent");
                g.leaf(t, !frozen)
            })
            .collect()
    }

    pub fn forward_graph(
        &self,
        g: &mut Graph<f32>,
        input: NodeId,
        params: &[NodeId],
    ) -> Result<NodeId> {
        self.check_input(g.value(input))?;
        let c1 = g.conv2d(input, params[0], params[1], 1, 0)?;
        let a1 = g.activation(c1, ActKind::LeakyRelu(LEAKY_SLOPE));
        let p1 = g.avg_pool2d(a1, 2, 2)?;
        let c2 = g.conv2d(p1, params[2], params[3], 1, 0)?;
        let a2 = g.activation(c2, ActKind::LeakyRelu(LEAKY_SLOPE));
        let p2 = g.avg_pool2d(a2, 2, 2)?;
        let c3 = g.conv2d(p2, params[4], params[5], 1, 0)?;
        Ok(g.activation(c3, ActKind::Sigmoid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_spatial_trace() {
        let cfg = DiscriminatorConfig::default();
        assert_eq!(cfg.spatial_trace().unwrap(), vec![48, 42, 21, 15, 7, 1]);
    }

    #[test]
    fn other_patch_sizes_rejected_by_plan() {
        let mut cfg = DiscriminatorConfig::default();
        cfg.patch_size = 64; // traces to 5, not 1
        assert!(cfg.validate().is_err());
        cfg.patch_size = 44; // collapses below the kernel
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = DiscriminatorConfig::desk((8, 16));
        let a = Discriminator::build(&cfg, 3).unwrap();
        let b = Discriminator::build(&cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_parameters_score_half() {
        let cfg = DiscriminatorConfig::desk((4, 8));
        let mut d = Discriminator::build(&cfg, 0).unwrap();
        for s in d.param_slices_mut() {
            s.fill(0.0);
        }
        let seq = Tensor::filled(Shape::new(2, 9, 48, 48), 0.3);
        let out = d.forward(&seq).unwrap();
        assert_eq!(out.shape(), Shape::new(2, 1, 1, 1));
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn scores_stay_in_open_unit_interval() {
        let d = Discriminator::build(&DiscriminatorConfig::desk((4, 8)), 9).unwrap();
        let seq = Tensor::new(
            Shape::new(3, 9, 48, 48),
            (0..3 * 9 * 48 * 48).map(|i| ((i as f32 * 0.031).sin()) * 0.9).collect(),
        )
        .unwrap();
        let out = d.forward(&seq).unwrap();
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn wrong_input_size_rejected_at_forward_time() {
        let d = Discriminator::build(&DiscriminatorConfig::desk((4, 8)), 9).unwrap();
        let too_big = Tensor::zeros(Shape::new(1, 9, 64, 64));
        assert!(matches!(d.forward(&too_big), Err(Error::Dimension(_))));
        let wrong_channels = Tensor::zeros(Shape::new(1, 8, 48, 48));
        assert!(d.forward(&wrong_channels).is_err());
    }

    #[test]
    fn traced_forward_matches_inference() {
        let d = Discriminator::build(&DiscriminatorConfig::desk((4, 8)), 17).unwrap();
        let seq = Tensor::new(
            Shape::new(2, 9, 48, 48),
            (0..2 * 9 * 48 * 48).map(|i| ((i as f32 * 0.013).cos()) * 0.7).collect(),
        )
        .unwrap();
        let plain = d.forward(&seq).unwrap();
        let mut graph = Graph::new();
        let params = d.register_params(&mut graph, false);
        let inp = graph.leaf(seq, false);
        let out = d.forward_graph(&mut graph, inp, &params).unwrap();
        assert_eq!(graph.value(out).data(), plain.data());
    }

    #[test]
    fn frozen_params_receive_no_gradient() {
        let d = Discriminator::build(&DiscriminatorConfig::desk((2, 4)), 1).unwrap();
        let seq = Tensor::filled(Shape::new(1, 9, 48, 48), 0.1);
        let mut graph = Graph::new();
        let params = d.register_params(&mut graph, true);
        let inp = graph.leaf(seq, true); // stand-in for generator output
        let out = d.forward_graph(&mut graph, inp, &params).unwrap();
        let loss = graph.bce_loss(out, &[1.0]).unwrap();
        graph.backward(loss).unwrap();
        for &p in &params {
            assert!(graph.grad(p).is_none());
        }
        // but the gradient does flow through to the input
        assert!(graph.grad(inp).is_some());
    }
}
