//! Analytic gradients vs central finite differences for every
//! differentiable op, alone and composed.

mod common;

use common::finite_diff_max_rel_err;
use lfp_core::tensor::{ActKind, Graph, NodeId, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn rand_tensor(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    // Keep values away from the ReLU kink at 0 by sampling two bands.
    let data = (0..shape.numel())
        .map(|_| {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

fn mse_vs_zero(g: &mut Graph<f64>, pred: NodeId) -> NodeId {
    let shape = g.value(pred).shape();
    let zero = g.leaf(Tensor::zeros(shape), false);
    g.mse_loss(pred, zero).unwrap()
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let input = rand_tensor(Shape::new(2, 3, 5, 5), &mut rng);
    let weights = rand_tensor(Shape::new(4, 3, 3, 3), &mut rng);
    let bias = rand_tensor(Shape::new(1, 4, 1, 1), &mut rng);
    let build = |g: &mut Graph<f64>, ids: &[NodeId]| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 1, 1).unwrap();
        mse_vs_zero(g, y)
    };
    let err = finite_diff_max_rel_err(&build, &[input, weights, bias], H);
    assert!(err < TOL, "max rel err {err}");
}

#[test]
fn conv2d_strided_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let input = rand_tensor(Shape::new(1, 2, 5, 5), &mut rng);
    let weights = rand_tensor(Shape::new(3, 2, 3, 3), &mut rng);
    let bias = rand_tensor(Shape::new(1, 3, 1, 1), &mut rng);
    let build = |g: &mut Graph<f64>, ids: &[NodeId]| {
        let y = g.conv2d(ids[0], ids[1], ids[2], 2, 1).unwrap();
        mse_vs_zero(g, y)
    };
    let err = finite_diff_max_rel_err(&build, &[input, weights, bias], H);
    assert!(err < TOL, "max rel err {err}");
}

#[test]
fn linear_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let input = rand_tensor(Shape::new(2, 6, 1, 1), &mut rng);
    let weights = rand_tensor(Shape::new(4, 6, 1, 1), &mut rng);
    let bias = rand_tensor(Shape::new(1, 4, 1, 1), &mut rng);
    let build = |g: &mut Graph<f64>, ids: &[NodeId]| {
        let y = g.linear(ids[0], ids[1], ids[2]).unwrap();
        mse_vs_zero(g, y)
    };
    let err = finite_diff_max_rel_err(&build, &[input, weights, bias], H);
    assert!(err < TOL, "max rel err {err}");
}

#[test]
fn activation_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for kind in [
        ActKind::Relu,
        ActKind::LeakyRelu(0.2),
        ActKind::Tanh,
        ActKind::Sigmoid,
    ] {
        let input = rand_tensor(Shape::new(1, 2, 3, 3), &mut rng);
        let build = move |g: &mut Graph<f64>, ids: &[NodeId]| {
            let y = g.activation(ids[0], kind);
            mse_vs_zero(g, y)
        };
        let err = finite_diff_max_rel_err(&build, &[input], H);
        assert!(err < TOL, "{kind:?}: max rel err {err}");
    }
}

#[test]
fn avg_pool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let input = rand_tensor(Shape::new(2, 2, 6, 6), &mut rng);
    let build = |g: &mut Graph<f64>, ids: &[NodeId]| {
        let y = g.avg_pool2d(ids[0], 2, 2).unwrap();
        mse_vs_zero(g, y)
    };
    let err = finite_diff_max_rel_err(&build, &[input], H);
    assert!(err < TOL, "max rel err {err}");
}

#[test]
fn bce_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    // Sigmoid keeps predictions inside (0,1); labels alternate.
    let input = rand_tensor(Shape::new(4, 1, 1, 1), &mut rng);
    let labels = [1.0, 0.0, 1.0, 0.0];
    let build = move |g: &mut Graph<f64>, ids: &[NodeId]| {
        let p = g.activation(ids[0], ActKind::Sigmoid);
        g.bce_loss(p, &labels).unwrap()
    };
    let err = finite_diff_max_rel_err(&build, &[input], H);
    assert!(err < TOL, "max rel err {err}");
}

#[test]
fn composed_network_gradients() {
    // conv -> relu -> pool -> conv -> tanh plus a skip, then mse;
    // exercise every backward rule in one composed trace.
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let input = rand_tensor(Shape::new(2, 2, 6, 6), &mut rng);
    let w1 = rand_tensor(Shape::new(3, 2, 3, 3), &mut rng);
    let b1 = rand_tensor(Shape::new(1, 3, 1, 1), &mut rng);
    let w2 = rand_tensor(Shape::new(1, 3, 3, 3), &mut rng);
    let b2 = rand_tensor(Shape::new(1, 1, 1, 1), &mut rng);
    let target = rand_tensor(Shape::new(2, 1, 3, 3), &mut rng);

    let build = move |g: &mut Graph<f64>, ids: &[NodeId]| {
        let c1 = g.conv2d(ids[0], ids[1], ids[2], 1, 1).unwrap();
        let a1 = g.activation(c1, ActKind::Relu);
        let scaled = g.scale(a1, 0.1);
        let skip = g.add(c1, scaled).unwrap();
        let p1 = g.avg_pool2d(skip, 2, 2).unwrap();
        let c2 = g.conv2d(p1, ids[3], ids[4], 1, 1).unwrap();
        let out = g.activation(c2, ActKind::Tanh);
        g.mse_loss(out, ids[5]).unwrap()
    };
    // the target leaf participates with requires_grad, so the mse
    // target-side gradient is finite-difference checked as well
    let err = finite_diff_max_rel_err(&build, &[input, w1, b1, w2, b2, target], H);
    assert!(err < TOL, "max rel err {err}");
}
