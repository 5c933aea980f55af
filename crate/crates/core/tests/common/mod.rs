//! Shared test oracles, independent of the production kernels.

use lfp_core::tensor::{Graph, NodeId, Tensor};

/// Central finite-difference gradient check in double precision.
///
/// `build` must construct the same graph for the same leaf values.
/// Returns the maximum relative error over all leaf elements, where the
/// relative error uses an absolute floor so near-zero gradients compare
/// on an absolute scale.
pub fn finite_diff_max_rel_err(
    build: &dyn Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
    leaves: &[Tensor<f64>],
    h: f64,
) -> f64 {
    let eval = |values: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = values.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let loss = build(&mut g, &ids);
        g.scalar_value(loss).unwrap()
    };

    // Analytic gradients.
    let mut g = Graph::new();
    let ids: Vec<NodeId> = leaves.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = build(&mut g, &ids);
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .zip(leaves)
        .map(|(&id, t)| g.grad(id).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    let mut max_rel = 0.0f64;
    for (li, leaf) in leaves.iter().enumerate() {
        for ei in 0..leaf.numel() {
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[ei] += h;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[ei] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[li][ei];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
