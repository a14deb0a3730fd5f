#![allow(dead_code)]

pub mod oracle;

use gazevo_core::cppn::{ActivationKind, Genome, LayerRole, NodeId, WEIGHT_MAX, WEIGHT_MIN};
use gazevo_core::neat::{add_connection, add_node, minimal_genome, InnovationRegistry};
use rand::Rng;

/// A random valid genome with at most `max_hidden` hidden nodes, extra
/// connections, weights across the full range and some genes disabled.
pub fn random_genome<R: Rng>(rng: &mut R, max_hidden: usize) -> Genome {
    let mut g = minimal_genome(rng);
    let mut registry = InnovationRegistry::covering([&g]);
    let hidden = rng.random_range(0..=max_hidden);
    for _ in 0..hidden {
        add_node(&mut g, &mut registry, rng);
    }
    for _ in 0..rng.random_range(0..4) {
        let _ = add_connection(&mut g, &mut registry, rng);
    }
    for c in g.connections_mut() {
        c.weight = rng.random_range(WEIGHT_MIN..=WEIGHT_MAX);
        if rng.random_bool(0.1) {
            c.enabled = false;
        }
    }
    let hidden_ids: Vec<NodeId> = g.nodes().iter().filter(|n| n.role == LayerRole::Hidden).map(|n| n.id).collect();
    for id in hidden_ids {
        g.set_activation(id, ActivationKind::ALL[rng.random_range(0..4)]);
    }
    g
}
