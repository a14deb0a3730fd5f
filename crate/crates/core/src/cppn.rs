//! Compositional pattern-producing networks.
//!
//! A [`Genome`] is a feed-forward graph of activation nodes. Five fixed
//! input nodes receive `x`, `y`, `z`, the distance from center `d`, and a
//! constant bias of `1.0`; four fixed output nodes produce material presence
//! and the red/green/blue color channels. Evaluation is a pure function of
//! the genome and the query coordinate.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::str::FromStr;

/// Lower bound of the connection weight range.
pub const WEIGHT_MIN: f64 = -3.0;
/// Upper bound of the connection weight range.
pub const WEIGHT_MAX: f64 = 3.0;

/// Value fed to the bias input on every query.
pub const BIAS_VALUE: f64 = 1.0;

/// Slope of the bipolar sigmoid.
pub const SIGMOID_SLOPE: f64 = 4.9;

/// Node activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ActivationKind {
    Sine,
    Sigmoid,
    Gaussian,
    Linear,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] =
        [ActivationKind::Sine, ActivationKind::Sigmoid, ActivationKind::Gaussian, ActivationKind::Linear];

    pub fn tag(self) -> &'static str {
        match self {
            ActivationKind::Sine => "sine",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Gaussian => "gaussian",
            ActivationKind::Linear => "linear",
        }
    }

    /// Applies the activation. Every kind maps finite input into `[-1, 1]`.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sine => libm::sin(x),
            ActivationKind::Sigmoid => 2.0 / (1.0 + libm::exp(-SIGMOID_SLOPE * x)) - 1.0,
            ActivationKind::Gaussian => 2.0 * libm::exp(-x * x) - 1.0,
            ActivationKind::Linear => x.clamp(-1.0, 1.0),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown activation kind")]
pub struct UnknownActivation;

impl FromStr for ActivationKind {
    type Err = UnknownActivation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivationKind::ALL.into_iter().find(|k| k.tag() == s).ok_or(UnknownActivation)
    }
}

/// Free-function form of [`ActivationKind::apply`].
#[inline]
pub fn activate(kind: ActivationKind, x: f64) -> f64 {
    kind.apply(x)
}

/// Identifier of a node within a genome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub u32);

impl NodeId {
    pub const X: NodeId = NodeId(0);
    pub const Y: NodeId = NodeId(1);
    pub const Z: NodeId = NodeId(2);
    pub const D: NodeId = NodeId(3);
    pub const BIAS: NodeId = NodeId(4);
    pub const PRESENCE: NodeId = NodeId(5);
    pub const RED: NodeId = NodeId(6);
    pub const GREEN: NodeId = NodeId(7);
    pub const BLUE: NodeId = NodeId(8);

    /// The first id available to hidden nodes.
    pub const FIRST_HIDDEN: NodeId = NodeId(9);

    pub const INPUTS: [NodeId; 5] = [Self::X, Self::Y, Self::Z, Self::D, Self::BIAS];
    pub const OUTPUTS: [NodeId; 4] = [Self::PRESENCE, Self::RED, Self::GREEN, Self::BLUE];
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Historical marker of a structural gene, used to align genomes in crossover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Innovation(pub u64);

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LayerRole {
    Input,
    Hidden,
    Output,
}

impl LayerRole {
    pub fn tag(self) -> &'static str {
        match self {
            LayerRole::Input => "input",
            LayerRole::Hidden => "hidden",
            LayerRole::Output => "output",
        }
    }
}

impl FromStr for LayerRole {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" => Ok(LayerRole::Input),
            "hidden" => Ok(LayerRole::Hidden),
            "output" => Ok(LayerRole::Output),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeGene {
    pub id: NodeId,
    pub role: LayerRole,
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
    pub enabled: bool,
}

/// A CPPN genome.
///
/// Nodes are kept sorted by id and connections by innovation so that two
/// genomes with the same genes compare equal and serialize identically.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Genome {
    nodes: Vec<NodeGene>,
    connections: Vec<ConnectionGene>,
}

impl Genome {
    /// Builds a genome from raw genes without validating it.
    pub fn from_genes(mut nodes: Vec<NodeGene>, mut connections: Vec<ConnectionGene>) -> Self {
        nodes.sort_by_key(|n| n.id);
        connections.sort_by_key(|c| c.innovation);
        Genome { nodes, connections }
    }

    /// The nine fixed nodes and no connections. Output activations are given
    /// in presence, red, green, blue order.
    pub fn bare(output_activations: [ActivationKind; 4]) -> Self {
        let mut nodes = Vec::with_capacity(9);
        for id in NodeId::INPUTS {
            nodes.push(NodeGene { id, role: LayerRole::Input, activation: ActivationKind::Linear });
        }
        for (id, activation) in NodeId::OUTPUTS.into_iter().zip(output_activations) {
            nodes.push(NodeGene { id, role: LayerRole::Output, activation });
        }
        Genome { nodes, connections: Vec::new() }
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &self.nodes[i])
    }

    pub fn connection(&self, innovation: Innovation) -> Option<&ConnectionGene> {
        self.connections.binary_search_by_key(&innovation, |c| c.innovation).ok().map(|i| &self.connections[i])
    }

    pub fn connection_mut(&mut self, innovation: Innovation) -> Option<&mut ConnectionGene> {
        self.connections.binary_search_by_key(&innovation, |c| c.innovation).ok().map(move |i| &mut self.connections[i])
    }

    pub fn connections_mut(&mut self) -> &mut [ConnectionGene] {
        &mut self.connections
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.role == LayerRole::Hidden).count()
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    /// Inserts a node, keeping id order. Replaces an existing gene with the same id.
    pub fn insert_node(&mut self, node: NodeGene) {
        match self.nodes.binary_search_by_key(&node.id, |n| n.id) {
            Ok(i) => self.nodes[i] = node,
            Err(i) => self.nodes.insert(i, node),
        }
    }

    /// Inserts a connection, keeping innovation order. Replaces an existing
    /// gene with the same innovation.
    pub fn insert_connection(&mut self, conn: ConnectionGene) {
        match self.connections.binary_search_by_key(&conn.innovation, |c| c.innovation) {
            Ok(i) => self.connections[i] = conn,
            Err(i) => self.connections.insert(i, conn),
        }
    }

    /// Sets the activation of an existing node.
    pub fn set_activation(&mut self, id: NodeId, activation: ActivationKind) -> bool {
        match self.nodes.binary_search_by_key(&id, |n| n.id) {
            Ok(i) => {
                self.nodes[i].activation = activation;
                true
            }
            Err(_) => false,
        }
    }

    /// Whether `to` is reachable from `from` following every connection,
    /// enabled or not.
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        if from == to {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            for c in self.connections.iter().filter(|c| c.source == n) {
                if c.target == to {
                    return true;
                }
                if seen.insert(c.target) {
                    stack.push(c.target);
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CppnError {
    #[error("enabled connection graph contains a cycle")]
    CycleDetected,
    #[error("connection {0} references a missing node")]
    DanglingEndpoint(Innovation),
}

/// Orders nodes so every enabled connection points forward.
///
/// Inputs come first in id order; ties among ready nodes break toward the
/// smallest id.
pub fn topological_order(genome: &Genome) -> Result<Vec<NodeId>, CppnError> {
    let mut indegree: BTreeMap<NodeId, usize> = genome.nodes.iter().map(|n| (n.id, 0)).collect();
    let mut outgoing: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for c in genome.connections.iter().filter(|c| c.enabled) {
        if !indegree.contains_key(&c.source) || !indegree.contains_key(&c.target) {
            return Err(CppnError::DanglingEndpoint(c.innovation));
        }
        *indegree.get_mut(&c.target).expect("checked above") += 1;
        outgoing.entry(c.source).or_default().push(c.target);
    }

    let mut order = Vec::with_capacity(genome.nodes.len());
    let mut ready: BinaryHeap<Reverse<(u8, NodeId)>> = BinaryHeap::new();
    let rank = |id: NodeId| match genome.node(id).map(|n| n.role) {
        Some(LayerRole::Input) => 0u8,
        _ => 1u8,
    };
    for (&id, &deg) in &indegree {
        if deg == 0 {
            ready.push(Reverse((rank(id), id)));
        }
    }
    while let Some(Reverse((_, id))) = ready.pop() {
        order.push(id);
        if let Some(targets) = outgoing.get(&id) {
            for t in targets {
                let deg = indegree.get_mut(t).expect("endpoint exists");
                *deg -= 1;
                if *deg == 0 {
                    ready.push(Reverse((rank(*t), *t)));
                }
            }
        }
    }
    if order.len() != genome.nodes.len() {
        return Err(CppnError::CycleDetected);
    }
    Ok(order)
}

/// The four CPPN outputs, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CppnOutputs {
    pub presence: f64,
    pub red: f64,
    pub green: f64,
    pub blue: f64,
}

#[derive(Debug, Clone)]
struct Step {
    slot: usize,
    activation: ActivationKind,
    // (source slot, weight), in innovation order
    incoming: Vec<(usize, f64)>,
}

/// A genome lowered into a flat evaluation plan.
///
/// Slots `0..5` hold the inputs; each step writes one node's activation.
/// Incoming sums are accumulated in innovation order, so results are
/// bit-identical between any two compilations of the same genome.
#[derive(Debug, Clone)]
pub struct CompiledCppn {
    steps: Vec<Step>,
    slots: usize,
    outputs: [usize; 4],
}

impl CompiledCppn {
    pub fn new(genome: &Genome) -> Result<Self, CppnError> {
        let order = topological_order(genome)?;
        let mut slot_of: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (i, id) in NodeId::INPUTS.into_iter().enumerate() {
            slot_of.insert(id, i);
        }
        let mut next = NodeId::INPUTS.len();
        for id in &order {
            if !slot_of.contains_key(id) {
                slot_of.insert(*id, next);
                next += 1;
            }
        }

        let mut steps = Vec::new();
        for id in &order {
            let node = genome.node(*id).expect("ordered nodes exist");
            if node.role == LayerRole::Input {
                continue;
            }
            let incoming = genome
                .connections
                .iter()
                .filter(|c| c.enabled && c.target == *id)
                .map(|c| (slot_of[&c.source], c.weight))
                .collect();
            steps.push(Step { slot: slot_of[id], activation: node.activation, incoming });
        }

        let mut outputs = [0usize; 4];
        for (o, id) in outputs.iter_mut().zip(NodeId::OUTPUTS) {
            // a genome lacking an output node yields a constant-zero channel
            *o = slot_of.get(&id).copied().unwrap_or(usize::MAX);
        }
        Ok(CompiledCppn { steps, slots: next, outputs })
    }

    /// Number of scratch slots [`Self::evaluate_with`] needs.
    pub fn scratch_len(&self) -> usize {
        self.slots
    }

    /// Evaluates using caller-provided scratch to avoid per-query allocation.
    pub fn evaluate_with(&self, scratch: &mut Vec<f64>, x: f64, y: f64, z: f64, d: f64) -> CppnOutputs {
        scratch.clear();
        scratch.resize(self.slots, 0.0);
        scratch[0] = x;
        scratch[1] = y;
        scratch[2] = z;
        scratch[3] = d;
        scratch[4] = BIAS_VALUE;
        for step in &self.steps {
            let mut sum = 0.0;
            for &(src, w) in &step.incoming {
                sum += w * scratch[src];
            }
            scratch[step.slot] = step.activation.apply(sum);
        }
        let read = |slot: usize| if slot == usize::MAX { 0.0 } else { scratch[slot] };
        CppnOutputs {
            presence: read(self.outputs[0]),
            red: read(self.outputs[1]),
            green: read(self.outputs[2]),
            blue: read(self.outputs[3]),
        }
    }

    pub fn evaluate(&self, x: f64, y: f64, z: f64, d: f64) -> CppnOutputs {
        let mut scratch = Vec::with_capacity(self.slots);
        self.evaluate_with(&mut scratch, x, y, z, d)
    }
}

/// Evaluates a genome at one coordinate. Inputs pass through unclamped.
pub fn evaluate(genome: &Genome, x: f64, y: f64, z: f64, d: f64) -> Result<CppnOutputs, CppnError> {
    Ok(CompiledCppn::new(genome)?.evaluate(x, y, z, d))
}

/// A violated genome invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    MissingFixedNode(NodeId),
    WrongFixedRole(NodeId),
    InputNotLinear(NodeId),
    HiddenIdInFixedRange(NodeId),
    DuplicateNode(NodeId),
    DuplicateInnovation(Innovation),
    DanglingEndpoint(Innovation),
    SelfLoop(Innovation),
    TargetsInput(Innovation),
    SourcesOutput(Innovation),
    ParallelConnection(Innovation),
    WeightOutOfRange(Innovation),
    Cycle,
}

/// Checks every structural invariant; an empty report means the genome is valid.
pub fn validate(genome: &Genome) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut roles: BTreeMap<NodeId, LayerRole> = BTreeMap::new();
    for n in &genome.nodes {
        if roles.insert(n.id, n.role).is_some() {
            report.push(Violation::DuplicateNode(n.id));
        }
    }
    for id in NodeId::INPUTS {
        match genome.node(id) {
            None => report.push(Violation::MissingFixedNode(id)),
            Some(n) if n.role != LayerRole::Input => report.push(Violation::WrongFixedRole(id)),
            Some(n) if n.activation != ActivationKind::Linear => report.push(Violation::InputNotLinear(id)),
            Some(_) => {}
        }
    }
    for id in NodeId::OUTPUTS {
        match genome.node(id) {
            None => report.push(Violation::MissingFixedNode(id)),
            Some(n) if n.role != LayerRole::Output => report.push(Violation::WrongFixedRole(id)),
            Some(_) => {}
        }
    }
    for n in &genome.nodes {
        if n.id < NodeId::FIRST_HIDDEN && n.role == LayerRole::Hidden {
            report.push(Violation::HiddenIdInFixedRange(n.id));
        }
        if n.id >= NodeId::FIRST_HIDDEN && n.role != LayerRole::Hidden {
            report.push(Violation::WrongFixedRole(n.id));
        }
    }

    let mut innovations = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    let mut dangling = false;
    for c in &genome.connections {
        if !innovations.insert(c.innovation) {
            report.push(Violation::DuplicateInnovation(c.innovation));
        }
        let (src, dst) = (roles.get(&c.source), roles.get(&c.target));
        if src.is_none() || dst.is_none() {
            report.push(Violation::DanglingEndpoint(c.innovation));
            dangling = true;
        }
        if c.source == c.target {
            report.push(Violation::SelfLoop(c.innovation));
        }
        if dst == Some(&LayerRole::Input) {
            report.push(Violation::TargetsInput(c.innovation));
        }
        if src == Some(&LayerRole::Output) {
            report.push(Violation::SourcesOutput(c.innovation));
        }
        if !pairs.insert((c.source, c.target)) {
            report.push(Violation::ParallelConnection(c.innovation));
        }
        if !(c.weight.is_finite() && (WEIGHT_MIN..=WEIGHT_MAX).contains(&c.weight)) {
            report.push(Violation::WeightOutOfRange(c.innovation));
        }
    }
    if !dangling && topological_order(genome) == Err(CppnError::CycleDetected) {
        report.push(Violation::Cycle);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_genome() -> Genome {
        Genome::bare([ActivationKind::Linear; 4])
    }

    fn conn(innovation: u64, source: NodeId, target: NodeId, weight: f64) -> ConnectionGene {
        ConnectionGene { innovation: Innovation(innovation), source, target, weight, enabled: true }
    }

    fn hidden(id: u32, activation: ActivationKind) -> NodeGene {
        NodeGene { id: NodeId(id), role: LayerRole::Hidden, activation }
    }

    #[test]
    fn activation_reference_points() {
        assert_eq!(activate(ActivationKind::Linear, 0.7), 0.7);
        assert_eq!(activate(ActivationKind::Gaussian, 0.0), 1.0);
        assert_eq!(activate(ActivationKind::Sine, 0.0), 0.0);
        assert_eq!(activate(ActivationKind::Sigmoid, 0.0), 0.0);
        assert_eq!(activate(ActivationKind::Linear, 5.0), 1.0);
        assert_eq!(activate(ActivationKind::Sigmoid, -1e6), -1.0);
    }

    #[test]
    fn activation_tags_round_trip() {
        for k in ActivationKind::ALL {
            assert_eq!(k.tag().parse::<ActivationKind>(), Ok(k));
        }
        assert!("tanh".parse::<ActivationKind>().is_err());
    }

    #[test]
    fn minimal_order_puts_inputs_first() {
        let order = topological_order(&linear_genome()).unwrap();
        assert_eq!(&order[..5], &NodeId::INPUTS);
        let mut tail = order[5..].to_vec();
        tail.sort();
        assert_eq!(tail, NodeId::OUTPUTS);
    }

    #[test]
    fn hidden_node_ordered_between_its_endpoints() {
        let mut g = linear_genome();
        g.insert_node(hidden(9, ActivationKind::Sine));
        g.insert_connection(conn(0, NodeId::X, NodeId(9), 1.0));
        g.insert_connection(conn(1, NodeId(9), NodeId::PRESENCE, 1.0));
        let order = topological_order(&g).unwrap();
        let pos = |id| order.iter().position(|&n| n == id).unwrap();
        assert!(pos(NodeId::X) < pos(NodeId(9)));
        assert!(pos(NodeId(9)) < pos(NodeId::PRESENCE));
    }

    #[test]
    fn injected_cycle_is_detected() {
        let mut g = linear_genome();
        g.insert_node(hidden(9, ActivationKind::Sine));
        g.insert_node(hidden(10, ActivationKind::Sine));
        g.insert_connection(conn(0, NodeId(9), NodeId(10), 1.0));
        g.insert_connection(conn(1, NodeId(10), NodeId(9), 1.0));
        assert_eq!(topological_order(&g), Err(CppnError::CycleDetected));
        assert_eq!(evaluate(&g, 0.0, 0.0, 0.0, 0.0), Err(CppnError::CycleDetected));
        assert!(validate(&g).contains(&Violation::Cycle));
    }

    #[test]
    fn single_linear_path() {
        let mut g = linear_genome();
        g.insert_connection(conn(0, NodeId::X, NodeId::PRESENCE, 1.0));
        assert_eq!(evaluate(&g, 0.5, 0.0, 0.0, 0.5).unwrap().presence, 0.5);
        g.connection_mut(Innovation(0)).unwrap().weight = -2.0;
        assert_eq!(evaluate(&g, 0.9, 0.0, 0.0, 0.9).unwrap().presence, -1.0);
    }

    #[test]
    fn unconnected_outputs_emit_activation_of_zero() {
        let g = Genome::bare([
            ActivationKind::Gaussian,
            ActivationKind::Sine,
            ActivationKind::Sigmoid,
            ActivationKind::Linear,
        ]);
        let out = evaluate(&g, 0.3, 0.1, 0.2, 0.4).unwrap();
        assert_eq!(out, CppnOutputs { presence: 1.0, red: 0.0, green: 0.0, blue: 0.0 });
    }

    #[test]
    fn gaussian_chain_hand_trace() {
        let mut g = linear_genome();
        g.insert_node(hidden(9, ActivationKind::Gaussian));
        g.insert_connection(conn(0, NodeId::X, NodeId(9), 1.0));
        g.insert_connection(conn(1, NodeId(9), NodeId::PRESENCE, 1.0));
        assert_eq!(evaluate(&g, 0.0, 0.0, 0.0, 0.0).unwrap().presence, 1.0);
    }

    #[test]
    fn disabled_connections_contribute_nothing() {
        let mut g = linear_genome();
        g.insert_connection(conn(0, NodeId::X, NodeId::PRESENCE, 1.0));
        g.connection_mut(Innovation(0)).unwrap().enabled = false;
        assert_eq!(evaluate(&g, 0.5, 0.0, 0.0, 0.5).unwrap().presence, 0.0);
    }

    #[test]
    fn fresh_genome_is_valid() {
        assert!(validate(&linear_genome()).is_empty());
    }

    #[test]
    fn duplicate_innovation_reported() {
        let g = Genome::from_genes(
            linear_genome().nodes().to_vec(),
            vec![conn(3, NodeId::X, NodeId::RED, 1.0), conn(3, NodeId::Y, NodeId::RED, 1.0)],
        );
        assert!(validate(&g).contains(&Violation::DuplicateInnovation(Innovation(3))));
    }

    #[test]
    fn missing_d_input_reported() {
        let nodes: Vec<_> = linear_genome().nodes().iter().copied().filter(|n| n.id != NodeId::D).collect();
        let g = Genome::from_genes(nodes, Vec::new());
        assert!(validate(&g).contains(&Violation::MissingFixedNode(NodeId::D)));
    }

    #[test]
    fn structural_violations_reported() {
        let g = Genome::from_genes(
            linear_genome().nodes().to_vec(),
            vec![
                conn(0, NodeId::X, NodeId::X, 1.0),
                conn(1, NodeId::PRESENCE, NodeId::RED, 1.0),
                conn(2, NodeId::Y, NodeId(42), 1.0),
                conn(3, NodeId::Z, NodeId::RED, 3.5),
            ],
        );
        let report = validate(&g);
        assert!(report.contains(&Violation::SelfLoop(Innovation(0))));
        assert!(report.contains(&Violation::TargetsInput(Innovation(0))));
        assert!(report.contains(&Violation::SourcesOutput(Innovation(1))));
        assert!(report.contains(&Violation::DanglingEndpoint(Innovation(2))));
        assert!(report.contains(&Violation::WeightOutOfRange(Innovation(3))));
    }
}
