//! End-to-end synthesis driven by one JSON configuration.
//!
//! Stages run in the order radius, abstract, dfa, solve, validate and each
//! writes a JSON artifact to the output directory. A stage reads only the
//! configuration and the artifacts of earlier stages, so any stage can be
//! re-run on its own.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{build_imdp, build_rmdp, validate_interval_structure, AbstractionDoc};
use crate::ambiguity::{
    cluster, empirical_distribution, load_samples, radius, support_diameter, AmbiguityBall,
    ClusterOptions, RadiusParams, SampleSet, DEFAULT_TRANSPORT_CONSTANT,
};
use crate::dynamics::{extract_noise, GroundTruthNoise, NoiseLaw, SystemModel, SystemSpec};
use crate::geometry::{LabelMap, Norm, Partition, Region, Rect, UNSAFE_PROP};
use crate::ltlf::{self, DfaDoc};
use crate::solver::{self, build_product, BoundsDoc, SolverOptions};
use crate::validation::{
    monte_carlo, simulate_trajectory, write_trajectory_csv, Controller, McReport, DEFAULT_HORIZON,
};

pub const CONFIG_VERSION: u32 = 1;

pub const AMBIGUITY_FILE: &str = "ambiguity.json";
pub const ABSTRACTION_FILE: &str = "abstraction.json";
pub const DFA_FILE: &str = "dfa.json";
pub const DFA_DOT_FILE: &str = "dfa.dot";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const BOUNDS_CSV_FILE: &str = "bounds.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage '{stage}' failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn fail(stage: &'static str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Where the noise samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSource {
    /// Draw this many samples from the ground-truth noise law.
    Generate(usize),
    /// Noise samples in CSV (`.csv`) or the binary format.
    File(PathBuf),
    /// CSV rows `x_0.., action, y_0..` of observed transitions; the noise is
    /// recovered by inverting the model.
    Transitions(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbiguityConfig {
    pub beta: f64,
    pub s: u32,
    pub l: Norm,
    pub epsilon_override: Option<f64>,
    pub g_override: Option<f64>,
    pub constant: f64,
    /// Compress the empirical distribution to this many atoms.
    pub cluster_k: Option<usize>,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig {
            beta: 1e-9,
            s: 1,
            l: Norm::Inf,
            epsilon_override: None,
            g_override: None,
            constant: DEFAULT_TRANSPORT_CONSTANT,
            cluster_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub domain: Rect,
    pub cuts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub trials: usize,
    pub horizon: usize,
    /// Start cells; when absent, `num_cells` cells are drawn at random.
    pub cells: Option<Vec<usize>>,
    pub num_cells: usize,
    pub seed: Option<u64>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            trials: 1000,
            horizon: DEFAULT_HORIZON,
            cells: None,
            num_cells: 10,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSpec,
    /// Ground-truth noise law on the model's noise support.
    pub noise: NoiseLaw,
    pub samples: SampleSource,
    #[serde(default)]
    pub ambiguity: AmbiguityConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub regions: Vec<Region>,
    pub formula: String,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub validation: ValidationConfig,
    /// Default output directory, overridable on the command line.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record the wall-clock build time in the abstraction metadata.
    #[serde(default)]
    pub timestamp: bool,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Checks cross-field consistency and builds the model, grid and labels.
    pub fn prepare(&self) -> Result<Prepared, PipelineError> {
        let cfg = |m: String| PipelineError::Config(m);
        if self.version != CONFIG_VERSION {
            return Err(cfg(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let model = self.system.build().map_err(|e| cfg(e.to_string()))?;
        if self.partition.domain.dim() != model.state_dim() {
            return Err(cfg(format!(
                "domain has dimension {}, the {} model has state dimension {}",
                self.partition.domain.dim(),
                model.name(),
                model.state_dim()
            )));
        }
        let partition = Partition::build_grid(self.partition.domain.clone(), self.partition.cuts.clone())
            .map_err(|e| cfg(e.to_string()))?;
        let labels = partition.attach_labels(&self.regions).map_err(|e| cfg(e.to_string()))?;
        for atom in ltlf::atoms_in(&self.formula).map_err(|e| cfg(e.to_string()))? {
            if !labels.propositions.contains(&atom) {
                return Err(cfg(format!(
                    "formula atom '{atom}' is not a declared region (or '{UNSAFE_PROP}')"
                )));
            }
        }
        let noise = GroundTruthNoise::new(self.noise.clone(), model.noise_support().clone())
            .map_err(|e| cfg(e.to_string()))?;
        let a = &self.ambiguity;
        if !(a.beta > 0.0 && a.beta < 1.0) {
            return Err(cfg("beta must lie in (0, 1)".into()));
        }
        if a.s == 0 {
            return Err(cfg("s must be at least 1".into()));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(cfg("solver tol must be positive and max_iter at least 1".into()));
        }
        if let Some(cells) = &self.validation.cells {
            if let Some(c) = cells.iter().find(|&&c| c >= partition.num_cells()) {
                return Err(cfg(format!("validation cell {c} does not exist")));
            }
        }
        Ok(Prepared {
            model,
            partition,
            labels,
            noise,
        })
    }
}

/// Objects derived from a validated configuration.
#[derive(Debug)]
pub struct Prepared {
    pub model: std::sync::Arc<dyn SystemModel>,
    pub partition: Partition,
    pub labels: LabelMap,
    pub noise: GroundTruthNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityArtifact {
    pub n: usize,
    pub dim: usize,
    pub beta: f64,
    pub s: u32,
    pub l: Norm,
    pub support_diameter: f64,
    /// Radius around the empirical distribution.
    pub epsilon: f64,
    pub cluster_k: Option<usize>,
    pub cluster_inflation: Option<f64>,
    /// Radius actually used: `epsilon` plus the clustering inflation.
    pub epsilon_total: f64,
    pub ball: AmbiguityBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationArtifact {
    pub reports: Vec<McReport>,
    pub all_contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub states: usize,
    pub actions: usize,
    pub dfa_states: usize,
    pub n: usize,
    pub epsilon: f64,
    pub n_cluster: Option<usize>,
    pub epsilon_cluster: Option<f64>,
    pub e_avg: f64,
    pub converged: bool,
    pub validation_contained: Option<bool>,
}

/// Stage runner bound to a configuration and an output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
    /// Directory that relative sample paths are resolved against.
    pub base_dir: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let io = |e: String| PipelineError::Io {
        path: path.to_path_buf(),
        message: e,
    };
    let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| io(e.to_string()))
}

impl Pipeline {
    pub fn new(config: PipelineConfig, out: impl Into<PathBuf>) -> Self {
        Pipeline {
            config,
            out: out.into(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<(), PipelineError> {
        fs::create_dir_all(&self.out).map_err(|e| PipelineError::Io {
            path: self.out.clone(),
            message: e.to_string(),
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn noise_samples(&self, prep: &Prepared) -> Result<Vec<Vec<f64>>, PipelineError> {
        match &self.config.samples {
            SampleSource::Generate(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                Ok(prep.noise.sample_n(*n, &mut rng))
            }
            SampleSource::File(p) => load_samples(&self.resolve(p)).map_err(|e| fail("radius", e)),
            SampleSource::Transitions(p) => {
                let rows = load_samples(&self.resolve(p)).map_err(|e| fail("radius", e))?;
                let n = prep.model.state_dim();
                rows.iter()
                    .enumerate()
                    .map(|(i, r)| {
                        if r.len() != 2 * n + 1 || r[n] < 0.0 || r[n].fract() != 0.0 {
                            return Err(fail("radius", format!("transition row {i} is malformed")));
                        }
                        extract_noise(prep.model.as_ref(), &r[..n], r[n] as usize, &r[n + 1..])
                            .map_err(|e| fail("radius", format!("transition row {i}: {e}")))
                    })
                    .collect()
            }
        }
    }

    /// Learns the ambiguity ball from the samples.
    pub fn stage_radius(&self) -> Result<AmbiguityArtifact, PipelineError> {
        let prep = self.config.prepare()?;
        self.ensure_out()?;
        let a = &self.config.ambiguity;
        let support = prep.model.noise_support().clone();
        let ss = SampleSet::new(self.noise_samples(&prep)?, support.clone()).map_err(|e| fail("radius", e))?;
        let phi = support_diameter(&support);
        let epsilon = match a.epsilon_override {
            Some(e) if e >= 0.0 && e.is_finite() => e,
            Some(e) => return Err(fail("radius", format!("invalid epsilon override {e}"))),
            None => radius(&RadiusParams {
                n: ss.len(),
                beta: a.beta,
                phi,
                d: ss.dim(),
                s: a.s,
                norm: a.l,
                constant: a.constant,
                g_override: a.g_override,
            })
            .map_err(|e| fail("radius", e))?,
        };
        let (center, k, inflation) = match a.cluster_k {
            Some(k) if k < ss.len() => {
                let c = cluster(&ss, &ClusterOptions::new(k, self.config.seed.wrapping_add(1), a.l, a.s))
                    .map_err(|e| fail("radius", e))?;
                (c.distribution, Some(k), Some(c.inflation))
            }
            _ => (empirical_distribution(&ss), None, None),
        };
        let total = epsilon + inflation.unwrap_or(0.0);
        let ball = AmbiguityBall::new(center, total, a.s, a.l, a.beta).map_err(|e| fail("radius", e))?;
        let art = AmbiguityArtifact {
            n: ss.len(),
            dim: ss.dim(),
            beta: a.beta,
            s: a.s,
            l: a.l,
            support_diameter: phi,
            epsilon,
            cluster_k: k,
            cluster_inflation: inflation,
            epsilon_total: total,
            ball,
        };
        write_json(&self.artifact(AMBIGUITY_FILE), &art)?;
        Ok(art)
    }

    /// Builds the robust abstraction from the persisted ball.
    pub fn stage_abstract(&self) -> Result<AbstractionDoc, PipelineError> {
        let prep = self.config.prepare()?;
        let amb: AmbiguityArtifact = read_json(&self.artifact(AMBIGUITY_FILE))?;
        let m = prep.model.as_ref();
        let imdp = build_imdp(m, &prep.partition, &amb.ball.center()).map_err(|e| fail("abstract", e))?;
        let violations = validate_interval_structure(&imdp);
        if let Some(v) = violations.first() {
            return Err(fail("abstract", format!("interval structure violated: {v:?}")));
        }
        let rmdp = build_rmdp(imdp, m, &prep.partition, &amb.ball).map_err(|e| fail("abstract", e))?;
        let timestamp = self.config.timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs().to_string())
                .unwrap_or_default()
        });
        let doc = AbstractionDoc::new(&rmdp, &amb.ball, m.name(), timestamp);
        write_json(&self.artifact(ABSTRACTION_FILE), &doc)?;
        Ok(doc)
    }

    /// Compiles the formula over the region propositions.
    pub fn stage_dfa(&self) -> Result<DfaDoc, PipelineError> {
        let prep = self.config.prepare()?;
        self.ensure_out()?;
        let dfa = ltlf::compile(&self.config.formula, &prep.labels.propositions).map_err(|e| fail("dfa", e))?;
        let doc = DfaDoc::new(&dfa, Some(&self.config.formula));
        write_json(&self.artifact(DFA_FILE), &doc)?;
        write_text(&self.artifact(DFA_DOT_FILE), &dfa.to_dot())?;
        Ok(doc)
    }

    fn product(&self, prep: &Prepared) -> Result<solver::ProductRmdp, PipelineError> {
        let abs: AbstractionDoc = read_json(&self.artifact(ABSTRACTION_FILE))?;
        if abs.metadata.partition != prep.partition {
            return Err(fail("solve", "abstraction was built for a different partition"));
        }
        let rmdp = abs.to_rmdp().map_err(|e| fail("solve", e))?;
        let dfa = read_json::<DfaDoc>(&self.artifact(DFA_FILE))?.to_dfa().map_err(|e| fail("solve", e))?;
        build_product(rmdp, dfa, &prep.labels).map_err(|e| fail("solve", e))
    }

    /// Robust value iteration; writes the bounds and the per-cell CSV.
    pub fn stage_solve(&self) -> Result<(BoundsDoc, f64), PipelineError> {
        let prep = self.config.prepare()?;
        let prod = self.product(&prep)?;
        let sol = solver::solve(&prod, &self.config.solver).map_err(|e| fail("solve", e))?;
        if !sol.bounds.converged {
            log::warn!(
                "value iteration stopped at max_iter with residual {:e}",
                sol.bounds.residual
            );
        }
        let doc = BoundsDoc::new(&prod, &sol);
        write_json(&self.artifact(BOUNDS_FILE), &doc)?;
        self.write_plot_csv(&prod, &doc)?;
        Ok((doc, solver::e_avg(&prod, &sol.bounds)))
    }

    fn write_plot_csv(&self, prod: &solver::ProductRmdp, doc: &BoundsDoc) -> Result<(), PipelineError> {
        let path = self.artifact(BOUNDS_CSV_FILE);
        let file = fs::File::create(&path).map_err(|e| PipelineError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        solver::write_cell_csv(file, prod, &doc.bounds(), &doc.strategy()).map_err(|e| PipelineError::Io {
            path,
            message: e.to_string(),
        })
    }

    /// Rewrites the per-cell CSV from the persisted bounds and dumps
    /// `trajectories` sampled closed-loop runs from the validation cells.
    pub fn export_plot_data(&self, trajectories: usize) -> Result<Vec<PathBuf>, PipelineError> {
        let prep = self.config.prepare()?;
        let prod = self.product(&prep)?;
        let doc: BoundsDoc = read_json(&self.artifact(BOUNDS_FILE))?;
        doc.validate().map_err(|e| fail("export-plot-data", e))?;
        self.write_plot_csv(&prod, &doc)?;
        let mut written = vec![self.artifact(BOUNDS_CSV_FILE)];
        let cells = self.validation_cells(&prep.partition);
        if trajectories == 0 || cells.is_empty() {
            return Ok(written);
        }
        let strategy = doc.strategy();
        let mut ctrl = Controller::new(&prep.partition, &prep.labels, prod.dfa(), &strategy)
            .map_err(|e| fail("export-plot-data", e))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.validation_seed().wrapping_add(0x7ace));
        for i in 0..trajectories {
            let x0 = prep
                .partition
                .cell(cells[i % cells.len()])
                .map_err(|e| fail("export-plot-data", e))?
                .center();
            let t = simulate_trajectory(
                prep.model.as_ref(),
                &mut ctrl,
                &prep.noise,
                &x0,
                self.config.validation.horizon,
                &mut rng,
            )
            .map_err(|e| fail("export-plot-data", e))?;
            let path = self.artifact(&format!("trajectory_{i}.csv"));
            let file = fs::File::create(&path).map_err(|e| PipelineError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            write_trajectory_csv(file, &t).map_err(|e| fail("export-plot-data", e))?;
            written.push(path);
        }
        Ok(written)
    }

    /// Start cells used by the validation stage.
    pub fn validation_cells(&self, partition: &Partition) -> Vec<usize> {
        let v = &self.config.validation;
        match &v.cells {
            Some(c) => c.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.validation_seed().wrapping_add(0x5eed));
                let total = partition.num_cells();
                let mut cells = sample(&mut rng, total, v.num_cells.min(total)).into_vec();
                cells.sort_unstable();
                cells
            }
        }
    }

    fn validation_seed(&self) -> u64 {
        self.config.validation.seed.unwrap_or(self.config.seed.wrapping_add(2))
    }

    /// Monte Carlo check of the certified bounds on the configured cells.
    pub fn stage_validate(&self) -> Result<ValidationArtifact, PipelineError> {
        let prep = self.config.prepare()?;
        let dfa = read_json::<DfaDoc>(&self.artifact(DFA_FILE))?.to_dfa().map_err(|e| fail("validate", e))?;
        let doc: BoundsDoc = read_json(&self.artifact(BOUNDS_FILE))?;
        doc.validate().map_err(|e| fail("validate", e))?;
        if doc.num_cells != prep.partition.num_cells() || doc.num_dfa_states != dfa.num_states() {
            return Err(fail("validate", "bounds do not match the partition and automaton"));
        }
        let strategy = doc.strategy();
        let ctrl = Controller::new(&prep.partition, &prep.labels, &dfa, &strategy).map_err(|e| fail("validate", e))?;
        let v = &self.config.validation;
        let mut reports = Vec::new();
        for (i, q) in self.validation_cells(&prep.partition).into_iter().enumerate() {
            let z0 = dfa.next(dfa.initial(), prep.labels.label(q));
            let s = &doc.states[q * dfa.num_states() + z0];
            let seed = self.validation_seed().wrapping_add((i as u64) << 32);
            reports.push(
                monte_carlo(
                    prep.model.as_ref(),
                    &ctrl,
                    &prep.noise,
                    q,
                    v.trials,
                    v.horizon,
                    seed,
                    [s.p_lower, s.p_upper],
                )
                .map_err(|e| fail("validate", e))?,
            );
        }
        let art = ValidationArtifact {
            all_contained: reports.iter().all(|r| r.contained),
            reports,
        };
        write_json(&self.artifact(VALIDATION_FILE), &art)?;
        Ok(art)
    }

    /// Runs every stage and writes the summary.
    pub fn run(&self, mut on_stage: impl FnMut(&str, std::time::Duration)) -> Result<Summary, PipelineError> {
        let mut timed = |name: &str, start: std::time::Instant| on_stage(name, start.elapsed());
        let t = std::time::Instant::now();
        let amb = self.stage_radius()?;
        timed("radius", t);
        let t = std::time::Instant::now();
        let abs = self.stage_abstract()?;
        timed("abstract", t);
        let t = std::time::Instant::now();
        let dfa = self.stage_dfa()?;
        timed("dfa", t);
        let t = std::time::Instant::now();
        let (bounds, e_avg) = self.stage_solve()?;
        timed("solve", t);
        let t = std::time::Instant::now();
        let v = &self.config.validation;
        let validation = if v.trials > 0 && v.cells.as_ref().map_or(v.num_cells, Vec::len) > 0 {
            Some(self.stage_validate()?)
        } else {
            None
        };
        timed("validate", t);
        let summary = Summary {
            model: abs.metadata.model.clone(),
            states: abs.num_states,
            actions: abs.num_actions,
            dfa_states: dfa.states,
            n: amb.n,
            epsilon: amb.epsilon,
            n_cluster: amb.cluster_k,
            epsilon_cluster: amb.cluster_k.map(|_| amb.epsilon_total),
            e_avg,
            converged: bounds.converged,
            validation_contained: validation.map(|v| v.all_contained),
        };
        write_json(&self.artifact(SUMMARY_FILE), &summary)?;
        Ok(summary)
    }
}

/// Mean of `p_upper - p_lower` over the safe cells at their initial
/// automaton states, recomputed from a bounds artifact and an automaton.
pub fn e_avg_from_artifacts(bounds: &BoundsDoc, dfa: &DfaDoc, labels: &LabelMap) -> Result<f64, PipelineError> {
    let d = dfa.to_dfa().map_err(|e| fail("summary", e))?;
    let nz = d.num_states();
    let total: f64 = (0..bounds.num_cells)
        .map(|q| {
            let s = &bounds.states[q * nz + d.next(d.initial(), labels.label(q))];
            s.p_upper - s.p_lower
        })
        .sum();
    Ok(total / bounds.num_cells as f64)
}

/// Fixed-width table of the summary for terminal output.
pub fn summary_table(s: &Summary) -> String {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let rows = [
        ("model", s.model.clone()),
        ("|Q|", s.states.to_string()),
        ("|A|", s.actions.to_string()),
        ("|Z|", s.dfa_states.to_string()),
        ("N", s.n.to_string()),
        ("eps", format!("{:.6}", s.epsilon)),
        ("N_cluster", opt(s.n_cluster.map(|k| k.to_string()))),
        ("eps_cluster", opt(s.epsilon_cluster.map(|e| format!("{e:.6}")))),
        ("e_avg", format!("{:.6}", s.e_avg)),
        ("converged", s.converged.to_string()),
        ("mc contained", opt(s.validation_contained.map(|c| c.to_string()))),
    ];
    rows.iter()
        .map(|(k, v)| format!("{k:<14}{v}\n"))
        .collect()
}
