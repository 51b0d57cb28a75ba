mod common;

use common::runs;
use drsynth::abstraction::AbstractionDoc;
use drsynth::geometry::Region;
use drsynth::ltlf::DfaDoc;
use drsynth::pipeline::{
    e_avg_from_artifacts, AmbiguityArtifact, Pipeline, PipelineConfig, PipelineError, SampleSource, Summary,
    ABSTRACTION_FILE, AMBIGUITY_FILE, BOUNDS_CSV_FILE, BOUNDS_FILE, DFA_DOT_FILE, DFA_FILE, SUMMARY_FILE,
    VALIDATION_FILE,
};

const ONE_CELL: &str = r#"{
  "version": 1,
  "system": { "preset": "additive", "params": {
    "shifts": [[0.0]], "gain": 1.0, "noise_lower": [-0.1], "noise_upper": [0.1] } },
  "noise": { "kind": "uniform" },
  "samples": { "generate": 50 },
  "partition": { "domain": { "lower": [0.0], "upper": [1.0] }, "cuts": [1] },
  "formula": "true",
  "validation": { "trials": 100, "horizon": 5, "num_cells": 1 }
}"#;

#[test]
fn trivial_formula_on_one_cell() {
    let c = PipelineConfig::from_json(ONE_CELL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = runs::run(&c, dir.path());
    assert_eq!(s.e_avg, 0.0);
    assert_eq!(s.states, 2);
    let b = runs::bounds(dir.path());
    let dfa = runs::read::<DfaDoc>(dir.path(), DFA_FILE).to_dfa().unwrap();
    let i = dfa.next(dfa.initial(), 0);
    let nz = dfa.num_states();
    assert_eq!((b.states[i].p_lower, b.states[i].p_upper), (1.0, 1.0));
    assert_eq!(b.states.len(), 2 * nz);
    assert_eq!(s.validation_contained, Some(true));
}

#[test]
fn unknown_atom_is_named() {
    let mut c = PipelineConfig::from_json(ONE_CELL).unwrap();
    c.formula = "F lava".into();
    let err = c.prepare().err().expect("bad atom accepted");
    assert!(matches!(err, PipelineError::Config(_)));
    assert!(err.to_string().contains("lava"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    assert!(Pipeline::new(c, dir.path()).run(|_, _| {}).is_err());
}

#[test]
fn misaligned_region_is_rejected() {
    let mut c = PipelineConfig::from_json(ONE_CELL).unwrap();
    c.partition.cuts = vec![4];
    c.regions = vec![Region::new("goal", vec![0.3], vec![1.0])];
    c.formula = "F goal".into();
    assert!(c.prepare().err().unwrap().to_string().contains("goal"));
}

#[test]
fn unknown_fields_are_rejected() {
    let text = ONE_CELL.replace("\"formula\"", "\"fromula\": 1, \"formula\"");
    assert!(PipelineConfig::from_json(&text).is_err());
}

#[test]
fn summary_matches_artifacts() {
    let c = runs::config("unicycle_phi2");
    let dir = tempfile::tempdir().unwrap();
    let s = runs::run(&c, dir.path());
    for name in [
        AMBIGUITY_FILE,
        ABSTRACTION_FILE,
        DFA_FILE,
        DFA_DOT_FILE,
        BOUNDS_FILE,
        BOUNDS_CSV_FILE,
        VALIDATION_FILE,
        SUMMARY_FILE,
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let bounds = runs::bounds(dir.path());
    let dfa: DfaDoc = runs::read(dir.path(), DFA_FILE);
    let labels = c.prepare().unwrap().labels;
    let recomputed = e_avg_from_artifacts(&bounds, &dfa, &labels).unwrap();
    assert!((recomputed - s.e_avg).abs() < 1e-12);
    let stored: Summary = runs::read(dir.path(), SUMMARY_FILE);
    assert_eq!(stored, s);
    let amb: AmbiguityArtifact = runs::read(dir.path(), AMBIGUITY_FILE);
    assert_eq!(amb.epsilon, s.epsilon);
    assert_eq!(amb.n, 1000);
    let abs: AbstractionDoc = runs::read(dir.path(), ABSTRACTION_FILE);
    assert_eq!(abs.num_states, s.states);
}

#[test]
fn stages_run_separately_match_a_full_run() {
    let mut c = runs::config("additive_phi1");
    c.validation.trials = 200;
    let full = tempfile::tempdir().unwrap();
    runs::run(&c, full.path());
    let staged = tempfile::tempdir().unwrap();
    let p = Pipeline::new(c, staged.path());
    p.stage_radius().unwrap();
    p.stage_dfa().unwrap();
    p.stage_abstract().unwrap();
    p.stage_solve().unwrap();
    p.stage_validate().unwrap();
    for name in [AMBIGUITY_FILE, ABSTRACTION_FILE, DFA_FILE, BOUNDS_FILE, VALIDATION_FILE] {
        assert_eq!(
            std::fs::read(full.path().join(name)).unwrap(),
            std::fs::read(staged.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn solve_needs_earlier_stages() {
    let c = runs::config("additive_phi1");
    let dir = tempfile::tempdir().unwrap();
    assert!(Pipeline::new(c, dir.path()).stage_solve().is_err());
}

#[test]
fn seed_changes_the_samples() {
    let mut c = runs::config("additive_phi1");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    Pipeline::new(c.clone(), a.path()).stage_radius().unwrap();
    c.seed += 1;
    Pipeline::new(c, b.path()).stage_radius().unwrap();
    let (x, y): (AmbiguityArtifact, AmbiguityArtifact) =
        (runs::read(a.path(), AMBIGUITY_FILE), runs::read(b.path(), AMBIGUITY_FILE));
    assert_ne!(x.ball.atoms, y.ball.atoms);
    assert_eq!(x.epsilon, y.epsilon);
}

#[test]
fn pendulum_desk_scale_smoke() {
    let mut c = runs::config("pendulum_phi1");
    c.partition.cuts = vec![40, 40];
    c.samples = SampleSource::Generate(1000);
    c.validation.trials = 200;
    let dir = tempfile::tempdir().unwrap();
    let s = runs::run(&c, dir.path());
    assert!((0.0..=1.0).contains(&s.e_avg));
    assert_eq!(s.states, 40 * 40 + 1);
    assert_eq!(s.n_cluster, Some(50));
    assert!(s.epsilon_cluster.unwrap() >= s.epsilon);
    let files = Pipeline::new(c, dir.path()).export_plot_data(2).unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        assert!(f.is_file());
    }
}
