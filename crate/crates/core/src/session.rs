//! The interactive-evolution state machine.
//!
//! A [`Session`] runs one subject through both interaction conditions. Each
//! condition has a directed stage of three target trials followed by a
//! free-form stage that keeps restarting trials until one is terminated after
//! the free-form window has elapsed. Within a trial, gaze dwell (or a mouse
//! selection) closes each generation and the next one is bred from the
//! resulting fitness.
//!
//! The engine never reads a clock: every [`Command`] carries its timestamp,
//! so a session is fully determined by its configuration and command stream.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{summarize, AttributeSummary, ClassifierConfig, Target};
use crate::cppn::{CppnError, Genome};
use crate::gaze::{map_point_to_cell, GazeSample, GridLayout, GRID_CELLS};
use crate::neat::{
    init_population_with, next_generation, ConfigError, EvolutionConfig, EvolveError, InnovationRegistry,
    ScoredIndividual, FITNESS_MAX, FITNESS_MIN,
};
use crate::shape::{ColorTriple, LatticeError, LatticeSpec, Phenotype};

pub const DWELL_THRESHOLD_MS: f64 = 1000.0;
pub const DEFAULT_TICK_HZ: f64 = 30.0;
pub const DIRECTED_TRIALS_PER_CONDITION: u32 = 3;
pub const FREEFORM_WINDOW_MS: f64 = 20.0 * 60.0 * 1000.0;

pub type Fitness = [u32; GRID_CELLS];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum InteractionMode {
    Gaze,
    Mouse,
}

/// Which condition a subject sees first; set by the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConditionOrder {
    #[default]
    GazeFirst,
    MouseFirst,
}

impl ConditionOrder {
    pub fn modes(self) -> [InteractionMode; 2] {
        match self {
            ConditionOrder::GazeFirst => [InteractionMode::Gaze, InteractionMode::Mouse],
            ConditionOrder::MouseFirst => [InteractionMode::Mouse, InteractionMode::Gaze],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Stage {
    Directed { target: Target },
    FreeForm,
}

impl Stage {
    pub fn kind(&self) -> StageKind {
        match self {
            Stage::Directed { .. } => StageKind::Directed,
            Stage::FreeForm => StageKind::FreeForm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StageKind {
    Directed,
    FreeForm,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("operation not available in the current interaction mode")]
    WrongMode,
    #[error("fitness requested before the generation closed")]
    LedgerNotClosed,
    #[error("generation already closed")]
    GenerationClosed,
    #[error("mouse selection is empty")]
    EmptySelection,
    #[error("cell {0} outside the 3x5 grid")]
    CellOutOfRange(usize),
    #[error("tick duration must be positive and finite")]
    InvalidTick,
    #[error("all 18 targets have been used")]
    TargetSpaceExhausted,
    #[error("target {0} was already assigned to this subject")]
    TargetRepeated(Target),
    #[error("illegal transition: {0}")]
    IllegalTransition(&'static str),
    #[error("timestamp {0} ms precedes the previous command")]
    ClockWentBackwards(f64),
    #[error("population must have exactly 15 individuals")]
    PopulationSize,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Cppn(#[from] CppnError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

/// Dwell time accumulated per cell during one generation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitnessLedger {
    pub dwell_ms: [f64; GRID_CELLS],
    pub winner: Option<usize>,
    pub threshold_ms: f64,
}

/// Slack on the dwell threshold so that summing many non-representable tick
/// lengths (e.g. 1000/60 ms) does not delay closing by a whole tick.
pub const DWELL_TOLERANCE_MS: f64 = 1e-6;

impl FitnessLedger {
    pub fn new(threshold_ms: f64) -> Self {
        FitnessLedger { dwell_ms: [0.0; GRID_CELLS], winner: None, threshold_ms }
    }

    pub fn is_closed(&self) -> bool {
        self.winner.is_some()
    }

    pub fn total_ms(&self) -> f64 {
        self.dwell_ms.iter().sum()
    }

    /// Credits `dt_ms` to `cell`; closes the ledger once any cell reaches the
    /// threshold, the winner being the largest dwell (lowest cell on ties).
    pub fn credit(&mut self, cell: usize, dt_ms: f64) -> Option<usize> {
        if self.is_closed() {
            return self.winner;
        }
        self.dwell_ms[cell] += dt_ms;
        if self.dwell_ms.iter().any(|&d| d >= self.threshold_ms - DWELL_TOLERANCE_MS) {
            self.winner = Some(crate::gaze::argmax(&self.dwell_ms));
        }
        self.winner
    }
}

/// Winner gets 1000; everyone else their rounded dwell clamped to `[1, 999]`.
pub fn assign_fitness(ledger: &FitnessLedger) -> Result<Fitness, SessionError> {
    let winner = ledger.winner.ok_or(SessionError::LedgerNotClosed)?;
    let mut fitness = [FITNESS_MIN; GRID_CELLS];
    for (i, f) in fitness.iter_mut().enumerate() {
        *f = if i == winner {
            FITNESS_MAX
        } else {
            libm::round(ledger.dwell_ms[i]).clamp(FITNESS_MIN as f64, (FITNESS_MAX - 1) as f64) as u32
        };
    }
    Ok(fitness)
}

/// Everything an engine needs to build phenotypes and breed generations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EngineSettings {
    pub evolution: EvolutionConfig,
    pub resolution: usize,
    pub layout: GridLayout,
    pub classifier: ClassifierConfig,
    pub dwell_threshold_ms: f64,
    /// Build meshes for every generation, not only on demand.
    pub build_meshes: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            evolution: EvolutionConfig::default(),
            resolution: crate::shape::DEFAULT_RESOLUTION,
            layout: GridLayout::default(),
            classifier: ClassifierConfig::default(),
            dwell_threshold_ms: DWELL_THRESHOLD_MS,
            build_meshes: true,
        }
    }
}

impl EngineSettings {
    pub fn validate(&self) -> Result<LatticeSpec, SessionError> {
        self.evolution.validate()?;
        if self.evolution.population_size != GRID_CELLS {
            return Err(SessionError::PopulationSize);
        }
        Ok(LatticeSpec::new(self.resolution)?)
    }
}

/// Events emitted by the engine, in the order they happen.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "event", rename_all = "snake_case"))]
pub enum EngineEvent {
    TrialStarted { trial_id: u32, stage: Stage, mode: InteractionMode },
    NewGeneration { trial_id: u32, generation_index: u32 },
    HighlightCell { cell: usize },
    Paused,
    Resumed,
    GenerationClosed { trial_id: u32, generation_index: u32, fitness: Fitness },
    SnapshotTaken { trial_id: u32, snapshot_index: usize, terminal: bool },
    TrialTerminated { trial_id: u32, generations: u32, elapsed_ms: f64 },
    ReasonRecorded { trial_id: u32 },
    StageComplete { stage: StageKind, mode: InteractionMode },
    SessionComplete,
}

/// The live state of one trial.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub trial_id: u32,
    pub stage: Stage,
    pub mode: InteractionMode,
    pub generation_index: u32,
    pub population: Vec<Genome>,
    pub phenotypes: Vec<Phenotype>,
    pub summaries: Vec<AttributeSummary>,
    pub ledger: FitnessLedger,
    pub started_at_ms: f64,
    pub elapsed_ms: f64,
    pub paused: bool,
    pub highlight: Option<usize>,
    pub selected_cells: BTreeSet<usize>,
    /// Time credited to some cell in the current generation.
    pub active_ms: f64,
    /// Time spent paused in this trial.
    pub paused_ms: f64,
    settings: EngineSettings,
    lattice: LatticeSpec,
    registry: InnovationRegistry,
    rng: ChaCha8Rng,
    closed: bool,
}

impl TrialState {
    /// Starts a trial from a fresh population drawn from `rng_stream`.
    pub fn new(
        trial_id: u32,
        stage: Stage,
        mode: InteractionMode,
        settings: EngineSettings,
        started_at_ms: f64,
    ) -> Result<Self, SessionError> {
        let lattice = settings.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.evolution.rng_seed);
        rng.set_stream(u64::from(trial_id) + 1);
        let population = init_population_with(&settings.evolution, &mut rng);
        Self::with_population(trial_id, stage, mode, settings, lattice, population, rng, started_at_ms)
    }

    #[allow(clippy::too_many_arguments)]
    fn with_population(
        trial_id: u32,
        stage: Stage,
        mode: InteractionMode,
        settings: EngineSettings,
        lattice: LatticeSpec,
        population: Vec<Genome>,
        rng: ChaCha8Rng,
        started_at_ms: f64,
    ) -> Result<Self, SessionError> {
        let registry = InnovationRegistry::covering(&population);
        let mut state = TrialState {
            trial_id,
            stage,
            mode,
            generation_index: 1,
            population: Vec::new(),
            phenotypes: Vec::new(),
            summaries: Vec::new(),
            ledger: FitnessLedger::new(settings.dwell_threshold_ms),
            started_at_ms,
            elapsed_ms: 0.0,
            paused: false,
            highlight: None,
            selected_cells: BTreeSet::new(),
            active_ms: 0.0,
            paused_ms: 0.0,
            settings,
            lattice,
            registry,
            rng,
            closed: false,
        };
        state.install(population)?;
        Ok(state)
    }

    fn install(&mut self, population: Vec<Genome>) -> Result<(), SessionError> {
        if population.len() != GRID_CELLS {
            return Err(SessionError::PopulationSize);
        }
        let mut phenotypes = Vec::with_capacity(GRID_CELLS);
        let mut summaries = Vec::with_capacity(GRID_CELLS);
        for g in &population {
            let p = Phenotype::build(g, self.lattice, self.settings.build_meshes)?;
            summaries.push(summarize(&p.grid, p.color, &self.settings.classifier));
            phenotypes.push(p);
        }
        self.population = population;
        self.phenotypes = phenotypes;
        self.summaries = summaries;
        Ok(())
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn colors(&self) -> Vec<ColorTriple> {
        self.phenotypes.iter().map(|p| p.color).collect()
    }
}

/// Advances gaze accounting by one refresh of `dt_ms`.
///
/// Only the latest sample of the batch matters. If it is invalid or falls
/// outside every cell the trial pauses and nothing is credited; otherwise the
/// gazed cell gains `dt_ms`. An empty batch changes nothing.
pub fn tick(state: &mut TrialState, samples: &[GazeSample], dt_ms: f64) -> Result<Vec<EngineEvent>, SessionError> {
    if state.mode != InteractionMode::Gaze {
        return Err(SessionError::WrongMode);
    }
    if !(dt_ms.is_finite() && dt_ms > 0.0) {
        return Err(SessionError::InvalidTick);
    }
    if state.closed {
        return Err(SessionError::GenerationClosed);
    }
    let mut events = Vec::new();
    let Some(latest) = samples.last() else {
        if state.paused {
            state.paused_ms += dt_ms;
        }
        return Ok(events);
    };
    match map_point_to_cell(latest, &state.settings.layout) {
        None => {
            if !state.paused {
                state.paused = true;
                events.push(EngineEvent::Paused);
            }
            state.highlight = None;
            state.paused_ms += dt_ms;
        }
        Some(cell) => {
            if state.paused {
                state.paused = false;
                events.push(EngineEvent::Resumed);
            }
            if state.highlight != Some(cell) {
                state.highlight = Some(cell);
                events.push(EngineEvent::HighlightCell { cell });
            }
            state.active_ms += dt_ms;
            if state.ledger.credit(cell, dt_ms).is_some() {
                state.closed = true;
                events.push(EngineEvent::GenerationClosed {
                    trial_id: state.trial_id,
                    generation_index: state.generation_index,
                    fitness: assign_fitness(&state.ledger)?,
                });
            }
        }
    }
    Ok(events)
}

/// Closes the generation from a mouse selection: selected cells get 1000,
/// all others 1.
pub fn submit_mouse_selection(
    state: &mut TrialState,
    selected: &[usize],
) -> Result<(Fitness, EngineEvent), SessionError> {
    if state.mode != InteractionMode::Mouse {
        return Err(SessionError::WrongMode);
    }
    if state.closed {
        return Err(SessionError::GenerationClosed);
    }
    if selected.is_empty() {
        return Err(SessionError::EmptySelection);
    }
    if let Some(&bad) = selected.iter().find(|&&c| c >= GRID_CELLS) {
        return Err(SessionError::CellOutOfRange(bad));
    }
    let mut fitness = [FITNESS_MIN; GRID_CELLS];
    state.selected_cells = selected.iter().copied().collect();
    for &c in &state.selected_cells {
        fitness[c] = FITNESS_MAX;
    }
    state.closed = true;
    let event =
        EngineEvent::GenerationClosed { trial_id: state.trial_id, generation_index: state.generation_index, fitness };
    Ok((fitness, event))
}

/// Breeds the next generation from the closed generation's fitness.
pub fn advance_generation(state: &mut TrialState, fitness: &Fitness) -> Result<EngineEvent, SessionError> {
    if !state.closed {
        return Err(SessionError::LedgerNotClosed);
    }
    let scored: Vec<ScoredIndividual> = state
        .population
        .iter()
        .zip(fitness)
        .map(|(g, &f)| ScoredIndividual { genome: g.clone(), fitness: f })
        .collect();
    let next = next_generation(&scored, &state.settings.evolution, &mut state.registry, &mut state.rng)?;
    state.install(next)?;
    state.generation_index += 1;
    state.ledger = FitnessLedger::new(state.settings.dwell_threshold_ms);
    state.selected_cells.clear();
    state.active_ms = 0.0;
    state.closed = false;
    Ok(EngineEvent::NewGeneration { trial_id: state.trial_id, generation_index: state.generation_index })
}

/// Draws a target uniformly among those not yet in `history`.
pub fn sample_target<R: Rng + ?Sized>(rng: &mut R, history: &[Target]) -> Result<Target, SessionError> {
    let remaining: Vec<Target> = Target::all().into_iter().filter(|t| !history.contains(t)).collect();
    if remaining.is_empty() {
        return Err(SessionError::TargetSpaceExhausted);
    }
    Ok(remaining[rng.random_range(0..remaining.len())])
}

/// What was on screen at one moment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SnapshotRecord {
    pub snapshot_index: usize,
    pub trial_id: u32,
    pub generation_index: u32,
    pub t_ms: f64,
    pub terminal: bool,
    pub genomes: Vec<Genome>,
    pub colors: Vec<ColorTriple>,
    pub dwell_ms: [f64; GRID_CELLS],
    pub selected_cells: Vec<usize>,
    pub resolution: usize,
}

pub fn snapshot(state: &TrialState, snapshot_index: usize, t_ms: f64, terminal: bool) -> SnapshotRecord {
    SnapshotRecord {
        snapshot_index,
        trial_id: state.trial_id,
        generation_index: state.generation_index,
        t_ms,
        terminal,
        genomes: state.population.clone(),
        colors: state.colors(),
        dwell_ms: state.ledger.dwell_ms,
        selected_cells: state.selected_cells.iter().copied().collect(),
        resolution: state.lattice.resolution(),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub trial_id: u32,
    pub mode: InteractionMode,
    pub stage: Stage,
    pub started_at_ms: f64,
    pub elapsed_ms: f64,
    pub generations: u32,
    pub paused_ms: f64,
    pub terminated: bool,
    pub reason: Option<String>,
    pub snapshots: Vec<usize>,
}

/// Measurements for one subject.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionRecord {
    pub subject_id: u64,
    pub condition_order: ConditionOrder,
    pub trials: Vec<TrialRecord>,
}

impl SessionRecord {
    /// Number of terminated free-form trials in one condition.
    pub fn freeform_resets(&self, mode: InteractionMode) -> usize {
        self.trials.iter().filter(|t| t.mode == mode && t.stage == Stage::FreeForm && t.terminated).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SessionConfig {
    pub subject_id: u64,
    pub condition_order: ConditionOrder,
    pub engine: EngineSettings,
    pub directed_trials: u32,
    pub freeform_window_ms: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            subject_id: 1,
            condition_order: ConditionOrder::GazeFirst,
            engine: EngineSettings::default(),
            directed_trials: DIRECTED_TRIALS_PER_CONDITION,
            freeform_window_ms: FREEFORM_WINDOW_MS,
        }
    }
}

/// Inputs to a session. Every command carries a monotonic timestamp.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "command", rename_all = "snake_case"))]
pub enum Command {
    StartDirected { t_ms: f64, target: Option<Target> },
    StartFreeForm { t_ms: f64 },
    Tick { t_ms: f64, dt_ms: f64, samples: Vec<GazeSample> },
    SubmitSelection { t_ms: f64, cells: Vec<usize> },
    Snapshot { t_ms: f64 },
    Terminate { t_ms: f64, reason: Option<String> },
    RecordReason { t_ms: f64, text: String },
}

impl Command {
    pub fn t_ms(&self) -> f64 {
        match self {
            Command::StartDirected { t_ms, .. }
            | Command::StartFreeForm { t_ms }
            | Command::Tick { t_ms, .. }
            | Command::SubmitSelection { t_ms, .. }
            | Command::Snapshot { t_ms }
            | Command::Terminate { t_ms, .. }
            | Command::RecordReason { t_ms, .. } => *t_ms,
        }
    }
}

/// One subject's session.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    target_rng: ChaCha8Rng,
    condition: usize,
    directed_done: u32,
    freeform_started_at: Option<f64>,
    trial: Option<TrialState>,
    pending_reason: Option<u32>,
    next_trial_id: u32,
    targets: Vec<Target>,
    record: SessionRecord,
    snapshots: Vec<SnapshotRecord>,
    last_t_ms: f64,
    complete: bool,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, SessionError> {
        config.engine.validate()?;
        let mut target_rng = ChaCha8Rng::seed_from_u64(config.engine.evolution.rng_seed);
        target_rng.set_stream(0);
        let record = SessionRecord {
            subject_id: config.subject_id,
            condition_order: config.condition_order,
            trials: Vec::new(),
        };
        Ok(Session {
            config,
            target_rng,
            condition: 0,
            directed_done: 0,
            freeform_started_at: None,
            trial: None,
            pending_reason: None,
            next_trial_id: 1,
            targets: Vec::new(),
            record,
            snapshots: Vec::new(),
            last_t_ms: f64::NEG_INFINITY,
            complete: false,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn trial(&self) -> Option<&TrialState> {
        self.trial.as_ref()
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn snapshots(&self) -> &[SnapshotRecord] {
        &self.snapshots
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn mode(&self) -> Option<InteractionMode> {
        (!self.complete).then(|| self.config.condition_order.modes()[self.condition])
    }

    /// Milliseconds since the free-form stage began, if it has.
    pub fn freeform_elapsed_ms(&self, now_ms: f64) -> Option<f64> {
        self.freeform_started_at.map(|s| now_ms - s)
    }

    pub fn apply(&mut self, command: Command) -> Result<Vec<EngineEvent>, SessionError> {
        let t = command.t_ms();
        if !t.is_finite() || t < self.last_t_ms {
            return Err(SessionError::ClockWentBackwards(t));
        }
        if self.complete {
            return Err(SessionError::IllegalTransition("session complete"));
        }
        let events = match command {
            Command::StartDirected { t_ms, target } => self.start_directed(t_ms, target),
            Command::StartFreeForm { t_ms } => self.start_freeform(t_ms),
            Command::Tick { t_ms, dt_ms, samples } => self.tick(t_ms, dt_ms, &samples),
            Command::SubmitSelection { t_ms, cells } => self.submit(t_ms, &cells),
            Command::Snapshot { t_ms } => self.take_snapshot(t_ms),
            Command::Terminate { t_ms, reason } => self.terminate(t_ms, reason),
            Command::RecordReason { text, .. } => self.record_reason(text),
        }?;
        self.last_t_ms = t;
        Ok(events)
    }

    fn start_trial(&mut self, t_ms: f64, stage: Stage) -> Result<Vec<EngineEvent>, SessionError> {
        let mode = self.config.condition_order.modes()[self.condition];
        let trial_id = self.next_trial_id;
        let state = TrialState::new(trial_id, stage, mode, self.config.engine.clone(), t_ms)?;
        self.next_trial_id += 1;
        self.record.trials.push(TrialRecord {
            trial_id,
            mode,
            stage,
            started_at_ms: t_ms,
            elapsed_ms: 0.0,
            generations: 1,
            paused_ms: 0.0,
            terminated: false,
            reason: None,
            snapshots: Vec::new(),
        });
        self.trial = Some(state);
        Ok(alloc::vec![
            EngineEvent::TrialStarted { trial_id, stage, mode },
            EngineEvent::NewGeneration { trial_id, generation_index: 1 },
        ])
    }

    fn start_directed(&mut self, t_ms: f64, target: Option<Target>) -> Result<Vec<EngineEvent>, SessionError> {
        if self.trial.is_some() {
            return Err(SessionError::IllegalTransition("a trial is already running"));
        }
        if self.freeform_started_at.is_some() || self.directed_done >= self.config.directed_trials {
            return Err(SessionError::IllegalTransition("directed stage already finished"));
        }
        let target = match target {
            Some(t) if self.targets.contains(&t) => return Err(SessionError::TargetRepeated(t)),
            Some(t) => t,
            None => sample_target(&mut self.target_rng, &self.targets)?,
        };
        self.targets.push(target);
        self.start_trial(t_ms, Stage::Directed { target })
    }

    fn start_freeform(&mut self, t_ms: f64) -> Result<Vec<EngineEvent>, SessionError> {
        if self.trial.is_some() {
            return Err(SessionError::IllegalTransition("a trial is already running"));
        }
        if self.directed_done < self.config.directed_trials {
            return Err(SessionError::IllegalTransition("directed stage must finish first"));
        }
        if self.freeform_started_at.is_some() {
            return Err(SessionError::IllegalTransition("free-form stage already started"));
        }
        self.freeform_started_at = Some(t_ms);
        self.start_trial(t_ms, Stage::FreeForm)
    }

    fn active(&mut self, t_ms: f64) -> Result<&mut TrialState, SessionError> {
        let trial = self.trial.as_mut().ok_or(SessionError::IllegalTransition("no trial running"))?;
        trial.elapsed_ms = t_ms - trial.started_at_ms;
        Ok(trial)
    }

    fn tick(&mut self, t_ms: f64, dt_ms: f64, samples: &[GazeSample]) -> Result<Vec<EngineEvent>, SessionError> {
        let trial = self.active(t_ms)?;
        let mut events = tick(trial, samples, dt_ms)?;
        if let Some(EngineEvent::GenerationClosed { fitness, .. }) = events.last().cloned() {
            events.push(advance_generation(trial, &fitness)?);
        }
        Ok(events)
    }

    fn submit(&mut self, t_ms: f64, cells: &[usize]) -> Result<Vec<EngineEvent>, SessionError> {
        let trial = self.active(t_ms)?;
        let (fitness, closed) = submit_mouse_selection(trial, cells)?;
        let next = advance_generation(trial, &fitness)?;
        Ok(alloc::vec![closed, next])
    }

    fn take_snapshot(&mut self, t_ms: f64) -> Result<Vec<EngineEvent>, SessionError> {
        self.active(t_ms)?;
        Ok(alloc::vec![self.push_snapshot(t_ms, false)])
    }

    fn push_snapshot(&mut self, t_ms: f64, terminal: bool) -> EngineEvent {
        let trial = self.trial.as_ref().expect("caller checked");
        let index = self.snapshots.len();
        self.snapshots.push(snapshot(trial, index, t_ms, terminal));
        if let Some(r) = self.record.trials.last_mut() {
            r.snapshots.push(index);
        }
        EngineEvent::SnapshotTaken { trial_id: trial.trial_id, snapshot_index: index, terminal }
    }

    fn terminate(&mut self, t_ms: f64, reason: Option<String>) -> Result<Vec<EngineEvent>, SessionError> {
        self.active(t_ms)?;
        let mut events = alloc::vec![self.push_snapshot(t_ms, true)];
        let trial = self.trial.take().expect("checked above");
        let mode = trial.mode;
        let stage = trial.stage;
        let record = self.record.trials.last_mut().expect("trial has a record");
        record.elapsed_ms = trial.elapsed_ms;
        record.generations = trial.generation_index;
        record.paused_ms = trial.paused_ms;
        record.terminated = true;
        self.pending_reason = if reason.is_some() { None } else { Some(trial.trial_id) };
        record.reason = reason;
        events.push(EngineEvent::TrialTerminated {
            trial_id: trial.trial_id,
            generations: trial.generation_index,
            elapsed_ms: trial.elapsed_ms,
        });

        match stage {
            Stage::Directed { .. } => {
                self.directed_done += 1;
                if self.directed_done == self.config.directed_trials {
                    events.push(EngineEvent::StageComplete { stage: StageKind::Directed, mode });
                }
            }
            Stage::FreeForm => {
                let started = self.freeform_started_at.expect("free-form stage running");
                if t_ms - started >= self.config.freeform_window_ms {
                    events.push(EngineEvent::StageComplete { stage: StageKind::FreeForm, mode });
                    self.condition += 1;
                    self.directed_done = 0;
                    self.freeform_started_at = None;
                    if self.condition == 2 {
                        self.complete = true;
                        events.push(EngineEvent::SessionComplete);
                    }
                } else {
                    events.extend(self.start_trial(t_ms, Stage::FreeForm)?);
                }
            }
        }
        Ok(events)
    }

    fn record_reason(&mut self, text: String) -> Result<Vec<EngineEvent>, SessionError> {
        let trial_id = self
            .pending_reason
            .take()
            .ok_or(SessionError::IllegalTransition("no terminated trial awaiting a reason"))?;
        let record =
            self.record.trials.iter_mut().find(|r| r.trial_id == trial_id).expect("pending trial has a record");
        record.reason = Some(text);
        Ok(alloc::vec![EngineEvent::ReasonRecorded { trial_id }])
    }
}
