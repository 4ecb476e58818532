use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causal_core::agent::Checkpoint;
use causal_core::gridworld::EnvConfig;
use causal_core::intervention::{adapt_epoch, InterventionConfig, OracleNavigator};
use causal_core::orchestrator::{derive_seed, evaluate, report, train, Real, RunConfig};
use causal_core::scm::{CausalGraph, GraphFile};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "causal-loop", version, about = "Causal-graph guided RL in a crafting gridworld")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its logs.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a saved checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 1_000_000)]
        seed: u64,
    },
    /// Verify hypothesized edges of a saved graph with the shortest-path navigator.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Run config supplying env and intervention settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        /// Where to write the updated graph; stdout gets a summary either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finished runs.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl std::fmt::Display) -> Self {
        Self {
            kind,
            message: message.to_string(),
        }
    }
}

impl From<causal_core::orchestrator::OrchestratorError> for Failure {
    fn from(e: causal_core::orchestrator::OrchestratorError) -> Self {
        Failure::new(e.kind(), e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    Ok(RunConfig::from_json(&read(path)?)?)
}

fn run(cli: Cli) -> Result<serde_json::Value, Failure> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = train(cfg, Some(&out))?;
            Ok(json!({
                "out": out,
                "steps": summary.steps,
                "episodes": summary.episodes,
                "final_score": summary.final_score,
                "edges": summary.edges,
                "eval_score": summary.evaluation.map(|e| e.score),
            }))
        }
        Command::Evaluate {
            checkpoint,
            episodes,
            seed,
        } => {
            let ckpt = Checkpoint::<Real>::load(&checkpoint).map_err(|e| Failure::new("checkpoint", e))?;
            let cfg: RunConfig = serde_json::from_value(ckpt.extra["config"].clone())
                .map_err(|e| Failure::new("checkpoint", format!("config: {e}")))?;
            let graph = match ckpt.extra.get("graph") {
                Some(g) => {
                    let file: GraphFile = serde_json::from_value(g.clone())
                        .map_err(|e| Failure::new("checkpoint", format!("graph: {e}")))?;
                    Some(CausalGraph::try_from(file).map_err(|e| Failure::new("checkpoint", e))?)
                }
                None => None,
            };
            let conditioning = graph.as_ref().filter(|_| cfg.mode.uses_goals());
            let stats = evaluate(
                &ckpt.params,
                &cfg.env,
                episodes,
                seed,
                conditioning,
                &Default::default(),
            )?;
            Ok(serde_json::to_value(stats).expect("stats serialize"))
        }
        Command::Verify {
            graph,
            budget,
            config,
            epochs,
            out,
        } => {
            let g = CausalGraph::from_json(&read(&graph)?).map_err(|e| Failure::new("graph", e))?;
            let (env, icfg): (EnvConfig, InterventionConfig) = match config {
                Some(p) => {
                    let c = load_config(&p)?;
                    let mut i = c.intervention.clone();
                    i.seed ^= derive_seed(c.seed, "intervention");
                    (c.env, i)
                }
                None => Default::default(),
            };
            let mut g = g;
            let mut records = Vec::new();
            for epoch in 0..epochs {
                let (next, r) = adapt_epoch(&g, &env, |_, _| OracleNavigator, budget, &icfg, epoch);
                g = next;
                records.extend(r);
            }
            if let Some(p) = &out {
                std::fs::write(p, g.to_json() + "\n").map_err(|e| Failure::new("io", format!("{}: {e}", p.display())))?;
            }
            Ok(json!({"edges": g.status_counts(), "interventions": records}))
        }
        Command::Report { runs, baseline, out } => {
            let files = report(&runs, baseline.as_deref(), &out)?;
            Ok(serde_json::to_value(files).expect("paths serialize"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::FAILURE
        }
    }
}
