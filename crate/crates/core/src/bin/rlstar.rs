use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::Parser;
use log::{info, warn};

use rlstar::bridge::BridgeServer;
use rlstar::runner::{evaluate, train_until, EvalOptions, RunConfig, RunnerError, FINAL_CHECKPOINT};

/// Train, evaluate, or serve a rover task.
///
/// Without --eval or --bridge-listen, trains with the given configuration.
#[derive(Debug, Parser)]
#[command(name = "rlstar", version)]
struct Cli {
    /// JSON run configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long = "algo")]
    algorithm: Option<String>,
    #[arg(long)]
    timesteps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate a checkpoint instead of training.
    #[arg(long)]
    eval: bool,
    /// Checkpoint to evaluate; defaults to <out>/final.ckpt.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Sample actions during evaluation instead of using the policy mean.
    #[arg(long)]
    stochastic: bool,
    /// Write per-step evaluation trajectories to this CSV file.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// Serve the configured environment on this address.
    #[arg(long, conflicts_with_all = ["eval", "bridge_connect"])]
    bridge_listen: Option<String>,
    /// Use the environment served at this address.
    #[arg(long)]
    bridge_connect: Option<String>,
}

fn build_config(cli: &Cli) -> Result<RunConfig, RunnerError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = &cli.task {
        cfg.task = t.clone();
    }
    if let Some(a) = &cli.algorithm {
        cfg.algorithm = a.clone();
    }
    if let Some(n) = cli.timesteps {
        cfg.train.total_timesteps = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(addr) = &cli.bridge_connect {
        cfg.bridge_connect = Some(addr.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    let cfg = build_config(&cli)?;

    if let Some(addr) = &cli.bridge_listen {
        let mut local = cfg.clone();
        local.bridge_connect = None;
        let env = local.make_env()?;
        let mut server = BridgeServer::bind(env, addr.as_str()).map_err(|e| RunnerError::Io(format!("{addr}: {e}")))?;
        info!("serving `{}` on {}", cfg.task, server.local_addr().map_err(|e| RunnerError::Io(e.to_string()))?);
        return server.serve_forever().map_err(|e| RunnerError::Io(e.to_string()));
    }

    if cli.eval {
        let checkpoint = cli.checkpoint.clone().unwrap_or_else(|| cfg.out_dir.join(FINAL_CHECKPOINT));
        let opts = EvalOptions {
            episodes: cli.episodes,
            seed: cfg.seed,
            deterministic: !cli.stochastic,
            trajectories: cli.trajectories.clone(),
            ..EvalOptions::default()
        };
        let report = evaluate(&checkpoint, &cfg, &opts)?;
        let summary = serde_json::json!({
            "episodes": report.episodes,
            "success_rate": report.success_rate,
            "double_success_rate": report.double_success_rate,
            "mean_reward": report.mean_reward,
            "mean_steps_to_first_waypoint": report.mean_steps_to_first_waypoint,
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Ok(());
    }

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
            warn!("cannot install interrupt handler: {e}");
        }
    }
    let outcome = train_until(&cfg, Some(&stop))?;
    if outcome.interrupted {
        warn!("interrupted after {} updates", outcome.updates);
    }
    println!(
        "trained {} updates ({} timesteps); metrics {} checkpoint {}",
        outcome.updates,
        outcome.timesteps,
        outcome.metrics_path.display(),
        outcome.final_checkpoint.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
