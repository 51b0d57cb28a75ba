use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drsynth::pipeline::{summary_table, Pipeline, PipelineConfig};

/// Data-driven robust strategy synthesis for LTLf objectives.
#[derive(Debug, Parser)]
#[command(name = "synth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage and print a summary.
    Run(Common),
    /// Estimate the ambiguity ball from the samples.
    Radius(Common),
    /// Build the robust abstraction (needs the radius artifact).
    Abstract(Common),
    /// Compile the formula to a DFA.
    Dfa(Common),
    /// Robust value iteration (needs the abstraction and DFA artifacts).
    Solve(Common),
    /// Monte Carlo validation (needs the DFA and bounds artifacts).
    Validate(Common),
    /// Per-cell CSV and sampled trajectories for plotting.
    ExportPlotData {
        #[command(flatten)]
        common: Common,
        /// Number of closed-loop trajectories to dump.
        #[arg(long, default_value_t = 0)]
        trajectories: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; defaults to the config's `output` field.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn pipeline(&self) -> Result<Pipeline> {
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
        }
        let mut config = PipelineConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.prepare()?;
        let out = match (&self.out, &config.output) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => self.relative(o),
            (None, None) => bail!("no output directory: pass --out or set `output` in the config"),
        };
        let base = self.config.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Pipeline::new(config, out).with_base_dir(base))
    }

    fn relative(&self, p: &Path) -> PathBuf {
        match self.config.parent() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

fn timed<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let v = f()?;
    log::info!("{name} done in {:.2?}", start.elapsed());
    Ok(v)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(c) => {
            let p = c.pipeline()?;
            let mut times: Vec<(String, Duration)> = Vec::new();
            let summary = p.run(|stage, d| {
                log::info!("{stage} done in {d:.2?}");
                times.push((stage.to_string(), d));
            })?;
            let get = |name: &str| times.iter().find(|t| t.0 == name).map_or(Duration::ZERO, |t| t.1);
            eprint!("{}", summary_table(&summary));
            eprintln!("{:<14}{:.2?}", "build time", get("radius") + get("abstract") + get("dfa"));
            eprintln!("{:<14}{:.2?}", "solve time", get("solve"));
        }
        Command::Radius(c) => {
            let a = timed("radius", || Ok(c.pipeline()?.stage_radius()?))?;
            eprintln!("N = {}, eps = {:.6}, radius used = {:.6}", a.n, a.epsilon, a.epsilon_total);
        }
        Command::Abstract(c) => {
            let d = timed("abstract", || Ok(c.pipeline()?.stage_abstract()?))?;
            eprintln!(
                "|Q| = {}, |A| = {}, mean support = {:.2}",
                d.num_states, d.num_actions, d.stats.average_support
            );
        }
        Command::Dfa(c) => {
            let d = timed("dfa", || Ok(c.pipeline()?.stage_dfa()?))?;
            eprintln!("{} states, accepting {:?}", d.states, d.accepting);
        }
        Command::Solve(c) => {
            let (b, e) = timed("solve", || Ok(c.pipeline()?.stage_solve()?))?;
            eprintln!(
                "{} iterations, residual {:.3e}, converged {}, e_avg {:.6}",
                b.iterations, b.residual, b.converged, e
            );
        }
        Command::Validate(c) => {
            let v = timed("validate", || Ok(c.pipeline()?.stage_validate()?))?;
            for r in &v.reports {
                eprintln!(
                    "cell {:>6}  rate {:.4}  ci [{:.4}, {:.4}]  certified [{:.4}, {:.4}]  {}",
                    r.cell,
                    r.empirical_rate,
                    r.interval[0],
                    r.interval[1],
                    r.certified_interval[0],
                    r.certified_interval[1],
                    if r.contained { "ok" } else { "OUTSIDE" }
                );
            }
            if !v.all_contained {
                bail!("some empirical intervals miss the certified bounds");
            }
        }
        Command::ExportPlotData { common, trajectories } => {
            let files = timed("export-plot-data", || Ok(common.pipeline()?.export_plot_data(trajectories)?))?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
