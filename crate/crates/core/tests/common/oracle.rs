//! A naive recursive evaluator written from the activation definitions
//! alone, sharing no code with the compiled one.

use gazevo_core::cppn::{ActivationKind, Genome, LayerRole, NodeId};

// spelled out rather than calling `clamp`, which the engine uses
#[allow(clippy::manual_clamp)]
pub fn reference_activation(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Sine => x.sin(),
        ActivationKind::Sigmoid => 2.0 / (1.0 + (-4.9 * x).exp()) - 1.0,
        ActivationKind::Gaussian => 2.0 * (-x * x).exp() - 1.0,
        ActivationKind::Linear => x.max(-1.0).min(1.0),
    }
}

/// Value of `node`, expanding every enabled incoming edge recursively.
pub fn reference_value(g: &Genome, node: NodeId, inputs: &[f64; 5]) -> f64 {
    let gene = g.node(node).expect("node exists");
    if gene.role == LayerRole::Input {
        return inputs[node.0 as usize];
    }
    let sum: f64 = g
        .connections()
        .iter()
        .filter(|c| c.enabled && c.target == node)
        .map(|c| c.weight * reference_value(g, c.source, inputs))
        .sum();
    reference_activation(gene.activation, sum)
}
