//! Headless directed-design trials driven by the synthetic viewer.

use alloc::vec::Vec;

use crate::classify::Target;
use crate::gaze::{PolicyParams, SyntheticPolicy};
use crate::session::{
    advance_generation, snapshot, tick, EngineEvent, EngineSettings, Fitness, InteractionMode, SessionError,
    SnapshotRecord, Stage, TrialState, DEFAULT_TICK_HZ,
};

/// Consecutive confirming generations required to declare success.
pub const CONFIRMATION_RUN: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationConfig {
    pub target: Target,
    pub policy: PolicyParams,
    pub seed: u64,
    pub max_generations: u32,
    pub engine: EngineSettings,
    pub tick_hz: f64,
}

impl SimulationConfig {
    /// Default engine and policy; meshes are not built since nothing is shown.
    pub fn new(target: Target, seed: u64, max_generations: u32) -> Self {
        let mut engine = EngineSettings { build_meshes: false, ..Default::default() };
        engine.evolution.rng_seed = seed;
        SimulationConfig {
            target,
            policy: PolicyParams { seed, ..Default::default() },
            seed,
            max_generations,
            engine,
            tick_hz: DEFAULT_TICK_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationReport {
    pub target: Target,
    pub seed: u64,
    pub success: bool,
    /// Generations shown to the synthetic viewer. On success this is the
    /// generation that completed the confirmation run.
    pub generations: u32,
    /// Best target score in each shown generation.
    pub score_trajectory: Vec<f64>,
    /// Fitness vector of every closed generation.
    pub fitness_history: Vec<Fitness>,
    pub final_snapshot: Option<SnapshotRecord>,
}

/// Runs one trial until the classifier confirms the target on at least one
/// phenotype for [`CONFIRMATION_RUN`] consecutive generations, or until
/// `max_generations` generations have been shown.
pub fn simulate(config: &SimulationConfig) -> Result<SimulationReport, SessionError> {
    let mut report = SimulationReport {
        target: config.target,
        seed: config.seed,
        success: false,
        generations: 0,
        score_trajectory: Vec::new(),
        fitness_history: Vec::new(),
        final_snapshot: None,
    };
    if config.max_generations == 0 {
        return Ok(report);
    }
    if !(config.tick_hz.is_finite() && config.tick_hz > 0.0) {
        return Err(SessionError::InvalidTick);
    }
    let stage = Stage::Directed { target: config.target };
    let mut state = TrialState::new(1, stage, InteractionMode::Gaze, config.engine.clone(), 0.0)?;
    let mut policy = SyntheticPolicy::new(config.target, config.policy);
    policy.classifier = config.engine.classifier;
    let dt = 1000.0 / config.tick_hz;
    let mut now = 0.0;
    let mut run = 0;

    loop {
        report.generations = state.generation_index;
        let best = state
            .summaries
            .iter()
            .map(|s| crate::classify::target_score(s, &config.target, &config.engine.classifier))
            .fold(f64::NEG_INFINITY, f64::max);
        report.score_trajectory.push(best);
        let confirmed = state.summaries.iter().any(|s| s.classified.matches(&config.target));
        run = if confirmed { run + 1 } else { 0 };
        if run >= CONFIRMATION_RUN {
            report.success = true;
            break;
        }
        if state.generation_index >= config.max_generations {
            break;
        }

        let fitness = loop {
            now += dt;
            let sample = policy.step(&state.summaries, &state.settings().layout, now);
            let events = tick(&mut state, &[sample], dt)?;
            if let Some(EngineEvent::GenerationClosed { fitness, .. }) = events.last() {
                break *fitness;
            }
        };
        report.fitness_history.push(fitness);
        advance_generation(&mut state, &fitness)?;
    }
    report.final_snapshot = Some(snapshot(&state, 0, now, true));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ColorClass, Shape, Size};

    fn target() -> Target {
        Target::new(Size::Small, ColorClass::Red, Shape::Cone)
    }

    #[test]
    fn zero_generations_fails_immediately() {
        let r = simulate(&SimulationConfig::new(target(), 1, 0)).unwrap();
        assert!(!r.success);
        assert_eq!(r.generations, 0);
        assert!(r.final_snapshot.is_none());
    }

    #[test]
    fn deterministic_per_seed() {
        let mut c = SimulationConfig::new(target(), 9, 4);
        c.engine.resolution = 8;
        assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
    }

    #[test]
    fn respects_generation_cap() {
        let mut c = SimulationConfig::new(target(), 3, 5);
        c.engine.resolution = 8;
        let r = simulate(&c).unwrap();
        assert!(r.generations <= 5);
        assert_eq!(r.score_trajectory.len(), r.generations as usize);
        assert_eq!(r.fitness_history.len() + 1, r.generations as usize);
    }
}
