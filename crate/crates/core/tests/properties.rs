//! Property-based checks of the engine's invariants.

mod common;

use std::collections::BTreeSet;

use gazevo_core::classify::{summarize, ClassifierConfig, Target};
use gazevo_core::cppn::{activate, evaluate, validate, ActivationKind};
use gazevo_core::gaze::{map_point_to_cell, GazeSample, GridLayout, GRID_CELLS, GRID_COLS};
use gazevo_core::neat::{crossover, mutate, EvolutionConfig, InnovationRegistry, ScoredIndividual};
use gazevo_core::session::{
    assign_fitness, sample_target, submit_mouse_selection, tick, EngineSettings, FitnessLedger, InteractionMode, Stage,
    TrialState,
};
use gazevo_core::shape::{largest_component, marching_cubes, query_color, sample_field, LatticeSpec, ScalarGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn genome(seed: u64, hidden: usize) -> gazevo_core::cppn::Genome {
    common::random_genome(&mut ChaCha8Rng::seed_from_u64(seed), hidden)
}

fn trial(mode: InteractionMode) -> TrialState {
    let settings = EngineSettings { resolution: 4, build_meshes: false, ..Default::default() };
    TrialState::new(1, Stage::FreeForm, mode, settings, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn activations_stay_in_unit_range(x in -1e6f64..1e6, k in 0usize..4) {
        let v = activate(ActivationKind::ALL[k], x);
        prop_assert!(v.is_finite() && (-1.0..=1.0).contains(&v));
    }

    #[test]
    fn outputs_are_bounded(seed: u64, x in -1.0f64..=1.0, y in -1.0f64..=1.0, z in -1.0f64..=1.0) {
        let g = genome(seed, 5);
        let d = (x * x + y * y + z * z).sqrt();
        let o = evaluate(&g, x, y, z, d).unwrap();
        for v in [o.presence, o.red, o.green, o.blue] {
            prop_assert!(v.is_finite() && (-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn mutation_chains_stay_valid(seed: u64, steps in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = EvolutionConfig { prob_add_connection: 0.5, prob_add_node: 0.3, ..Default::default() };
        let mut g = common::random_genome(&mut rng, 2);
        let mut registry = InnovationRegistry::covering([&g]);
        for _ in 0..steps {
            g = mutate(&g, &config, &mut registry, &mut rng);
            prop_assert_eq!(validate(&g), vec![]);
        }
    }

    #[test]
    fn crossover_children_are_valid(seed: u64, fa in 1u32..=1000, fb in 1u32..=1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = EvolutionConfig { prob_add_connection: 0.6, prob_add_node: 0.4, ..Default::default() };
        let base = gazevo_core::neat::minimal_genome(&mut rng);
        let mut registry = InnovationRegistry::covering([&base]);
        let (mut a, mut b) = (base.clone(), base);
        for _ in 0..10 {
            a = mutate(&a, &config, &mut registry, &mut rng);
            b = mutate(&b, &config, &mut registry, &mut rng);
        }
        let child = crossover(
            &ScoredIndividual { genome: a, fitness: fa },
            &ScoredIndividual { genome: b, fitness: fb },
            &mut rng,
        );
        prop_assert_eq!(validate(&child), vec![]);
    }

    #[test]
    fn crossover_of_unrelated_lineages_keeps_fitter_topology(seed: u64, fa in 1u32..=1000, fb in 1u32..=1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_genome(&mut rng, 4);
        let b = common::random_genome(&mut rng, 4);
        let fitter = if fa >= fb { a.clone() } else { b.clone() };
        let child = crossover(
            &ScoredIndividual { genome: a, fitness: fa },
            &ScoredIndividual { genome: b, fitness: fb },
            &mut rng,
        );
        prop_assert_eq!(validate(&child), vec![]);
        let edges = |g: &gazevo_core::cppn::Genome| g.connections().iter().map(|c| (c.innovation, c.source, c.target)).collect::<Vec<_>>();
        prop_assert_eq!(edges(&child), edges(&fitter));
    }

    #[test]
    fn registry_is_consistent_within_a_generation(pairs in prop::collection::vec((0u32..9, 5u32..12), 1..30)) {
        let mut registry = InnovationRegistry::new();
        let mut seen = std::collections::BTreeMap::new();
        let mut last = registry.next_innovation();
        for (s, t) in pairs {
            let id = registry.connection(gazevo_core::cppn::NodeId(s), gazevo_core::cppn::NodeId(t));
            prop_assert_eq!(*seen.entry((s, t)).or_insert(id), id);
            prop_assert!(registry.next_innovation() >= last);
            last = registry.next_innovation();
        }
    }

    #[test]
    fn fields_are_resolution_independent(seed: u64, r in 2usize..6) {
        let g = genome(seed, 3);
        let coarse = sample_field(&g, LatticeSpec::new(r).unwrap()).unwrap();
        let fine = sample_field(&g, LatticeSpec::new(3 * r).unwrap()).unwrap();
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    prop_assert_eq!(coarse.get(i, j, k).to_bits(), fine.get(3 * i + 1, 3 * j + 1, 3 * k + 1).to_bits());
                }
            }
        }
    }

    #[test]
    fn colors_stay_in_unit_range(seed: u64) {
        let c = query_color(&genome(seed, 4)).unwrap();
        for v in [c.r, c.g, c.b] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn marching_cubes_is_watertight(r in 2usize..7, values in prop::collection::vec(-1.0f64..=1.0, 216)) {
        let spec = LatticeSpec::new(r).unwrap();
        let grid = ScalarGrid::from_values(spec, values[..spec.len()].to_vec());
        let mesh = marching_cubes(&grid);
        prop_assert!(mesh.is_watertight());
        prop_assert!(mesh.is_consistently_oriented());
        if let Some(a) = mesh.min_triangle_area() {
            prop_assert!(a > 1e-12);
        }
        prop_assert!(mesh.triangles.iter().flatten().all(|&i| (i as usize) < mesh.vertices.len()));
        if grid.occupied_count() > 0 {
            prop_assert!(mesh.signed_volume() > 0.0);
        }
    }

    #[test]
    fn summaries_are_well_formed(seed: u64) {
        let g = genome(seed, 3);
        let grid = sample_field(&g, LatticeSpec::new(8).unwrap()).unwrap();
        let s = summarize(&grid, query_color(&g).unwrap(), &ClassifierConfig::default());
        prop_assert!((0.0..=1.0).contains(&s.volume_fraction));
        if s.volume_fraction == 0.0 {
            prop_assert!(s.classified.size.is_none() && s.classified.shape.is_none());
        }
        for v in [s.shape_scores.cone, s.shape_scores.oval, s.shape_scores.rectangle] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn points_map_into_their_cell(x in 0.0f64..=1.0, y in 0.0f64..=1.0, gutter in 0.0f64..0.05) {
        let layout = GridLayout::new(gutter);
        match map_point_to_cell(&GazeSample::new(0.0, x, y), &layout) {
            Some(cell) => {
                let r = layout.cell_rect(cell);
                prop_assert!(r.x0 <= x && x <= r.x1 + 1e-12 && r.y0 <= y && y <= r.y1 + 1e-12);
                let col = ((x / (layout.cell_width() + gutter)) as usize).min(GRID_COLS - 1);
                prop_assert_eq!(cell % GRID_COLS, col);
            }
            None => {
                // only gutters are uncovered
                let inside = |c: usize| {
                    let r = layout.cell_rect(c);
                    r.x0 <= x && x < r.x1 && r.y0 <= y && y < r.y1
                };
                prop_assert!(!(0..GRID_CELLS).any(inside));
            }
        }
    }

    #[test]
    fn sample_validity_follows_range(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let s = GazeSample::new(0.0, x, y);
        prop_assert_eq!(s.valid, (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
    }

    #[test]
    fn ledger_law(credits in prop::collection::vec((0usize..GRID_CELLS, 1.0f64..200.0), 1..400)) {
        let mut ledger = FitnessLedger::new(1000.0);
        for (cell, dt) in credits {
            if ledger.credit(cell, dt).is_some() {
                break;
            }
        }
        match ledger.winner {
            None => prop_assert!(assign_fitness(&ledger).is_err()),
            Some(w) => {
                prop_assert!(ledger.dwell_ms[w] >= 1000.0 - gazevo_core::session::DWELL_TOLERANCE_MS);
                let f = assign_fitness(&ledger).unwrap();
                prop_assert_eq!(f.iter().filter(|&&v| v == 1000).count(), 1);
                prop_assert_eq!(f[w], 1000);
                prop_assert!(f.iter().enumerate().all(|(i, &v)| i == w || (1..=999).contains(&v)));
            }
        }
    }

    #[test]
    fn pause_law(steps in prop::collection::vec((0u8..3, 0usize..GRID_CELLS, 1.0f64..40.0), 1..200)) {
        let mut state = trial(InteractionMode::Gaze);
        let layout = GridLayout::default();
        let mut expected = [0.0; GRID_CELLS];
        for (kind, cell, dt) in steps {
            let sample = match kind {
                0 => GazeSample::invalid(0.0),
                1 => GazeSample::new(0.0, layout.cell_width() + layout.gutter / 2.0, 0.5),
                _ => {
                    let (x, y) = layout.cell_center(cell);
                    GazeSample::new(0.0, x, y)
                }
            };
            let before = state.ledger.dwell_ms;
            tick(&mut state, &[sample], dt).unwrap();
            if kind < 2 {
                prop_assert!(state.paused);
                prop_assert_eq!(state.ledger.dwell_ms, before);
            } else {
                expected[cell] += dt;
                prop_assert!(!state.paused);
            }
            if state.is_closed() {
                break;
            }
        }
        prop_assert_eq!(state.ledger.dwell_ms, expected);
    }

    #[test]
    fn mouse_law(cells in prop::collection::btree_set(0usize..GRID_CELLS, 1..=GRID_CELLS)) {
        let mut state = trial(InteractionMode::Mouse);
        let selected: Vec<usize> = cells.iter().copied().collect();
        let (f, _) = submit_mouse_selection(&mut state, &selected).unwrap();
        for (i, &v) in f.iter().enumerate() {
            prop_assert_eq!(v, if cells.contains(&i) { 1000 } else { 1 });
        }
    }

    #[test]
    fn sampled_targets_avoid_history(seed: u64, mask in 0u32..(1 << 18) - 1) {
        let all = Target::all();
        let history: Vec<Target> = (0..18).filter(|i| mask & (1 << i) != 0).map(|i| all[i]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = sample_target(&mut rng, &history).unwrap();
        prop_assert!(!history.contains(&t));
        let set: BTreeSet<usize> = history.iter().map(|t| t.ordinal()).collect();
        prop_assert!(!set.contains(&t.ordinal()));
    }

    #[test]
    fn largest_component_is_idempotent(seed: u64) {
        let grid = sample_field(&genome(seed, 3), LatticeSpec::new(8).unwrap()).unwrap();
        let kept = largest_component(&grid);
        prop_assert_eq!(largest_component(&kept), kept);
    }

    #[test]
    fn refinement_changes_volume_only_near_the_surface(seed: u64) {
        let g = genome(seed, 3);
        let r = 8;
        let coarse = sample_field(&g, LatticeSpec::new(r).unwrap()).unwrap();
        let fine = sample_field(&g, LatticeSpec::new(2 * r).unwrap()).unwrap();
        prop_assert!((coarse.volume_fraction() - fine.volume_fraction()).abs() <= shell_fraction(&fine, 2) + 1e-12);
    }
}

/// Fraction of lattice points with an opposite-sign point within `reach`
/// lattice steps along any axis: the measure of a shell around the surface.
fn shell_fraction(grid: &ScalarGrid, reach: usize) -> f64 {
    let r = grid.resolution();
    let inside = |i: usize, j: usize, k: usize| grid.get(i, j, k) > 0.0;
    let mut near = 0usize;
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let here = inside(i, j, k);
                let lo = |v: usize| v.saturating_sub(reach);
                let hi = |v: usize| (v + reach).min(r - 1);
                let flips =
                    (lo(i)..=hi(i)).any(|a| (lo(j)..=hi(j)).any(|b| (lo(k)..=hi(k)).any(|c| inside(a, b, c) != here)));
                near += usize::from(flips);
            }
        }
    }
    near as f64 / grid.values().len() as f64
}
