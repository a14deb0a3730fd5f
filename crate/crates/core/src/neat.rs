//! NEAT-style evolution of CPPN genomes without speciation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::cppn::{
    ActivationKind, ConnectionGene, Genome, Innovation, LayerRole, NodeGene, NodeId, WEIGHT_MAX, WEIGHT_MIN,
};

/// Lowest and highest fitness an individual can carry.
pub const FITNESS_MIN: u32 = 1;
pub const FITNESS_MAX: u32 = 1000;

/// Probability that a gene disabled in either parent stays disabled in the child.
pub const INHERIT_DISABLED_PROB: f64 = 0.75;

/// Number of connections in a freshly initialized genome (5 inputs x 4 outputs).
pub const INITIAL_CONNECTIONS: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub prob_weight_mutate: f64,
    pub weight_perturb_sigma: f64,
    pub prob_weight_replace: f64,
    pub prob_add_connection: f64,
    pub prob_add_node: f64,
    pub prob_crossover: f64,
    pub elitism_count: usize,
    pub rng_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 15,
            prob_weight_mutate: 0.8,
            weight_perturb_sigma: 0.5,
            prob_weight_replace: 0.1,
            prob_add_connection: 0.10,
            prob_add_node: 0.05,
            prob_crossover: 0.75,
            elitism_count: 1,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("population size must be at least 2")]
    PopulationTooSmall,
    #[error("probability `{0}` outside [0, 1]")]
    Probability(&'static str),
    #[error("weight perturbation sigma must be finite and non-negative")]
    Sigma,
    #[error("elitism count must be smaller than the population")]
    Elitism,
}

impl EvolutionConfig {
    pub fn with_seed(seed: u64) -> Self {
        EvolutionConfig { rng_seed: seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size < 2 {
            return Err(ConfigError::PopulationTooSmall);
        }
        let probs = [
            ("prob_weight_mutate", self.prob_weight_mutate),
            ("prob_weight_replace", self.prob_weight_replace),
            ("prob_add_connection", self.prob_add_connection),
            ("prob_add_node", self.prob_add_node),
            ("prob_crossover", self.prob_crossover),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Probability(name));
            }
        }
        if !(self.weight_perturb_sigma.is_finite() && self.weight_perturb_sigma >= 0.0) {
            return Err(ConfigError::Sigma);
        }
        if self.elitism_count >= self.population_size {
            return Err(ConfigError::Elitism);
        }
        Ok(())
    }
}

/// Ids minted when a connection is split by an add-node mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitIds {
    pub node: NodeId,
    pub incoming: Innovation,
    pub outgoing: Innovation,
}

/// Assigns innovation numbers and hidden node ids.
///
/// Structural signatures are remembered for one generation, so identical
/// mutations in different offspring of the same generation share ids.
/// Counters never rewind.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationRegistry {
    connections: BTreeMap<(NodeId, NodeId), Innovation>,
    splits: BTreeMap<Innovation, SplitIds>,
    next_innovation: u64,
    next_node: u32,
}

impl Default for InnovationRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl InnovationRegistry {
    pub fn new() -> Self {
        InnovationRegistry {
            connections: BTreeMap::new(),
            splits: BTreeMap::new(),
            next_innovation: INITIAL_CONNECTIONS,
            next_node: NodeId::FIRST_HIDDEN.0,
        }
    }

    /// A registry whose counters lie beyond every id used by `genomes`.
    pub fn covering<'a>(genomes: impl IntoIterator<Item = &'a Genome>) -> Self {
        let mut reg = Self::new();
        for g in genomes {
            for n in g.nodes() {
                reg.next_node = reg.next_node.max(n.id.0 + 1);
            }
            for c in g.connections() {
                reg.next_innovation = reg.next_innovation.max(c.innovation.0 + 1);
            }
        }
        reg
    }

    pub fn next_innovation(&self) -> u64 {
        self.next_innovation
    }

    pub fn next_node(&self) -> u32 {
        self.next_node
    }

    /// Forgets this generation's structural signatures.
    pub fn begin_generation(&mut self) {
        self.connections.clear();
        self.splits.clear();
    }

    /// The innovation for a new connection `source -> target`.
    pub fn connection(&mut self, source: NodeId, target: NodeId) -> Innovation {
        let next = &mut self.next_innovation;
        *self.connections.entry((source, target)).or_insert_with(|| {
            let id = Innovation(*next);
            *next += 1;
            id
        })
    }

    /// The node and innovations for splitting connection `split`.
    pub fn split(&mut self, split: Innovation) -> SplitIds {
        if let Some(ids) = self.splits.get(&split) {
            return *ids;
        }
        let ids = SplitIds {
            node: NodeId(self.next_node),
            incoming: Innovation(self.next_innovation),
            outgoing: Innovation(self.next_innovation + 1),
        };
        self.next_node += 1;
        self.next_innovation += 2;
        self.splits.insert(split, ids);
        ids
    }
}

/// Innovation number of initial connection `input -> output`.
pub fn initial_innovation(input: NodeId, output: NodeId) -> Innovation {
    Innovation(u64::from(input.0) * 4 + u64::from(output.0 - NodeId::PRESENCE.0))
}

fn random_activation<R: Rng + ?Sized>(rng: &mut R) -> ActivationKind {
    ActivationKind::ALL[rng.random_range(0..ActivationKind::ALL.len())]
}

/// A fully connected minimal genome with weights uniform in `[-1, 1]`.
pub fn minimal_genome<R: Rng + ?Sized>(rng: &mut R) -> Genome {
    let activations = [(); 4].map(|_| random_activation(rng));
    let mut genome = Genome::bare(activations);
    for input in NodeId::INPUTS {
        for output in NodeId::OUTPUTS {
            genome.insert_connection(ConnectionGene {
                innovation: initial_innovation(input, output),
                source: input,
                target: output,
                weight: rng.random_range(-1.0..=1.0),
                enabled: true,
            });
        }
    }
    genome
}

/// The initial population, seeded from `config.rng_seed`.
pub fn init_population(config: &EvolutionConfig) -> Vec<Genome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    init_population_with(config, &mut rng)
}

pub fn init_population_with<R: Rng + ?Sized>(config: &EvolutionConfig, rng: &mut R) -> Vec<Genome> {
    (0..config.population_size).map(|_| minimal_genome(rng)).collect()
}

/// Applies weight, add-connection and add-node mutations in that order.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    config: &EvolutionConfig,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Genome {
    let mut child = genome.clone();
    mutate_weights(&mut child, config, rng);
    if rng.random_bool(config.prob_add_connection) {
        // saturated graphs simply skip the structural mutation
        let _ = add_connection(&mut child, registry, rng);
    }
    if rng.random_bool(config.prob_add_node) {
        add_node(&mut child, registry, rng);
    }
    child
}

fn mutate_weights<R: Rng + ?Sized>(genome: &mut Genome, config: &EvolutionConfig, rng: &mut R) {
    let normal = Normal::new(0.0, config.weight_perturb_sigma).expect("sigma validated");
    for c in genome.connections_mut() {
        if !rng.random_bool(config.prob_weight_mutate) {
            continue;
        }
        let w = if rng.random_bool(config.prob_weight_replace) {
            rng.random_range(WEIGHT_MIN..=WEIGHT_MAX)
        } else {
            c.weight + normal.sample(rng)
        };
        c.weight = w.clamp(WEIGHT_MIN, WEIGHT_MAX);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no valid site for a new connection")]
pub struct NoValidConnectionSite;

/// Adds a connection between a random unconnected pair that keeps the full
/// (enabled and disabled) connection graph acyclic.
///
/// Acyclicity is checked over disabled genes too, because crossover may
/// re-enable them.
pub fn add_connection<R: Rng + ?Sized>(
    genome: &mut Genome,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Result<Innovation, NoValidConnectionSite> {
    let mut candidates = Vec::new();
    for s in genome.nodes().iter().filter(|n| n.role != LayerRole::Output) {
        for t in genome.nodes().iter().filter(|n| n.role != LayerRole::Input) {
            if s.id == t.id {
                continue;
            }
            let exists = genome.connections().iter().any(|c| (c.source, c.target) == (s.id, t.id));
            if !exists && !genome.reaches(t.id, s.id) {
                candidates.push((s.id, t.id));
            }
        }
    }
    if candidates.is_empty() {
        return Err(NoValidConnectionSite);
    }
    let (source, target) = candidates[rng.random_range(0..candidates.len())];
    let innovation = registry.connection(source, target);
    genome.insert_connection(ConnectionGene {
        innovation,
        source,
        target,
        weight: rng.random_range(-1.0..=1.0),
        enabled: true,
    });
    Ok(innovation)
}

/// Splits a random enabled connection with a new hidden node.
///
/// Returns the new node id, or `None` when nothing could be split.
pub fn add_node<R: Rng + ?Sized>(
    genome: &mut Genome,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Option<NodeId> {
    let enabled: Vec<Innovation> = genome.connections().iter().filter(|c| c.enabled).map(|c| c.innovation).collect();
    if enabled.is_empty() {
        return None;
    }
    let chosen = enabled[rng.random_range(0..enabled.len())];
    let activation = random_activation(rng);
    split_connection(genome, chosen, activation, registry)
}

/// Disables `innovation` and routes it through a new hidden node: the
/// incoming link has weight 1, the outgoing link keeps the old weight.
pub fn split_connection(
    genome: &mut Genome,
    innovation: Innovation,
    activation: ActivationKind,
    registry: &mut InnovationRegistry,
) -> Option<NodeId> {
    let old = *genome.connection(innovation)?;
    let ids = registry.split(innovation);
    if genome.has_node(ids.node) {
        return None;
    }
    genome.connection_mut(innovation).expect("exists").enabled = false;
    genome.insert_node(NodeGene { id: ids.node, role: LayerRole::Hidden, activation });
    genome.insert_connection(ConnectionGene {
        innovation: ids.incoming,
        source: old.source,
        target: ids.node,
        weight: 1.0,
        enabled: true,
    });
    genome.insert_connection(ConnectionGene {
        innovation: ids.outgoing,
        source: ids.node,
        target: old.target,
        weight: old.weight,
        enabled: true,
    });
    Some(ids.node)
}

/// A genome with the fitness it earned in one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredIndividual {
    pub genome: Genome,
    pub fitness: u32,
}

/// NEAT crossover aligned by innovation number.
///
/// Matching genes come from a random parent; disjoint and excess genes come
/// from the fitter parent, `a` on ties. A gene only matches when both parents
/// agree on its endpoints, so the child always has the fitter parent's
/// topology and is valid whenever that parent is, even if the parents were
/// numbered by different innovation histories.
pub fn crossover<R: Rng + ?Sized>(a: &ScoredIndividual, b: &ScoredIndividual, rng: &mut R) -> Genome {
    let (fit, other) = if a.fitness >= b.fitness { (&a.genome, &b.genome) } else { (&b.genome, &a.genome) };

    let mut connections = Vec::with_capacity(fit.connections().len());
    for gene in fit.connections() {
        let child_gene = match other.connection(gene.innovation) {
            Some(alt) if alt.source == gene.source && alt.target == gene.target => {
                let mut g = if rng.random_bool(0.5) { *gene } else { *alt };
                if !gene.enabled || !alt.enabled {
                    g.enabled = !rng.random_bool(INHERIT_DISABLED_PROB);
                }
                g
            }
            _ => {
                let mut g = *gene;
                if !gene.enabled {
                    g.enabled = !rng.random_bool(INHERIT_DISABLED_PROB);
                }
                g
            }
        };
        connections.push(child_gene);
    }

    let nodes = fit
        .nodes()
        .iter()
        .map(|n| match other.node(n.id) {
            Some(alt) if alt.role == n.role => {
                if rng.random_bool(0.5) {
                    *n
                } else {
                    *alt
                }
            }
            _ => *n,
        })
        .collect();
    Genome::from_genes(nodes, connections)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvolveError {
    #[error("cannot breed from an empty population")]
    EmptyPopulation,
    #[error("fitness {0} outside [1, 1000]")]
    FitnessOutOfRange(u32),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Fitness-proportionate parent selection.
#[derive(Debug, Clone)]
pub struct RouletteWheel {
    index: WeightedIndex<u32>,
}

impl RouletteWheel {
    pub fn new(fitness: &[u32]) -> Result<Self, EvolveError> {
        if fitness.is_empty() {
            return Err(EvolveError::EmptyPopulation);
        }
        if let Some(&f) = fitness.iter().find(|f| !(FITNESS_MIN..=FITNESS_MAX).contains(*f)) {
            return Err(EvolveError::FitnessOutOfRange(f));
        }
        let index = WeightedIndex::new(fitness).map_err(|_| EvolveError::EmptyPopulation)?;
        Ok(RouletteWheel { index })
    }

    pub fn spin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// Indices of the elites: highest fitness first, lowest index on ties.
pub fn elite_indices(fitness: &[u32], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&i, &j| fitness[j].cmp(&fitness[i]).then(i.cmp(&j)));
    idx.truncate(count);
    idx
}

/// Breeds the next population: elites pass through unmutated, the remaining
/// slots are filled from roulette-selected parents by crossover or cloning,
/// followed by mutation.
pub fn next_generation<R: Rng + ?Sized>(
    scored: &[ScoredIndividual],
    config: &EvolutionConfig,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Result<Vec<Genome>, EvolveError> {
    if scored.is_empty() {
        return Err(EvolveError::EmptyPopulation);
    }
    config.validate()?;
    let fitness: Vec<u32> = scored.iter().map(|s| s.fitness).collect();
    let wheel = RouletteWheel::new(&fitness)?;
    registry.begin_generation();

    let mut next = Vec::with_capacity(config.population_size);
    for i in elite_indices(&fitness, config.elitism_count) {
        next.push(scored[i].genome.clone());
    }
    while next.len() < config.population_size {
        let first = &scored[wheel.spin(rng)];
        let child = if rng.random_bool(config.prob_crossover) {
            let second = &scored[wheel.spin(rng)];
            crossover(first, second, rng)
        } else {
            first.genome.clone()
        };
        next.push(mutate(&child, config, registry, rng));
    }
    Ok(next)
}
