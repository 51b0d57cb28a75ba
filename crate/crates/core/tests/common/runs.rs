//! Pipeline runs on the shipped configurations.

use std::fs;
use std::path::{Path, PathBuf};

use drsynth::ltlf::DfaDoc;
use drsynth::pipeline::{Pipeline, PipelineConfig, Summary, BOUNDS_FILE, DFA_FILE};
use drsynth::solver::BoundsDoc;

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"))
}

pub fn config(name: &str) -> PipelineConfig {
    let mut c = PipelineConfig::load(&config_path(name)).unwrap();
    c.output = None;
    c
}

pub fn run(config: &PipelineConfig, out: &Path) -> Summary {
    Pipeline::new(config.clone(), out).run(|_, _| {}).unwrap()
}

pub fn read<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> T {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

pub fn bounds(dir: &Path) -> BoundsDoc {
    read(dir, BOUNDS_FILE)
}

/// Lower bounds of every cell at the automaton state reached by reading the
/// cell's label.
pub fn initial_lower(config: &PipelineConfig, dir: &Path) -> Vec<f64> {
    let b = bounds(dir);
    let dfa = read::<DfaDoc>(dir, DFA_FILE).to_dfa().unwrap();
    let labels = config.prepare().unwrap().labels;
    let nz = dfa.num_states();
    (0..b.num_cells)
        .map(|q| b.states[q * nz + dfa.next(dfa.initial(), labels.label(q))].p_lower)
        .collect()
}

/// Every file of `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}
