use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use aoi_swarm::expcli::{
    bench_scaling, emit_chart, fpk_convergence, load_policies, run_experiment, run_sweep, write_fpk_csv, Algorithm,
    ExperimentConfig, ExperimentSummary, Profile, OUTPUT_DIR_ENV,
};
use aoi_swarm::expcli::fpkcheck::RESOLUTIONS;
use aoi_swarm::expcli::run::policy_file;
use aoi_swarm::mfhppo::evaluate;

#[derive(Debug, Parser)]
#[command(name = "aoi-swarm", version, about = "Multi-UAV age-of-information experiments")]
struct Cli {
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file merged over the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: Profile,
    /// Output directory.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the mean-field PPO learner and compare it with the configured baselines.
    Train,
    /// Roll out trained networks from a previous `train` run.
    Eval {
        /// Directory of the training run; defaults to the output directory.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        /// Use the policy mode instead of sampling.
        #[arg(long)]
        greedy: bool,
    },
    /// Run a comparison policy on its own.
    Baseline {
        #[arg(long, value_enum)]
        policy: Algorithm,
    },
    /// Write the Fokker-Planck residual table for the closed-form cases.
    FpkCheck {
        #[arg(long, value_delimiter = ',', default_values_t = RESOLUTIONS)]
        resolutions: Vec<usize>,
    },
    /// Train over a grid of clip thresholds with and without the recurrent layer.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3])]
        clips: Vec<f64>,
        /// Episodes at the end of each run whose cost spread is reported.
        #[arg(long, default_value_t = 100)]
        tail: usize,
    },
    /// Time training against the number of UAVs.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Render a metrics CSV as an SVG line chart.
    Chart {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(cli.profile, path)?,
        None => ExperimentConfig::profile(cli.profile),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn print_summary(summary: &ExperimentSummary, out: &Path) {
    println!("{} final-window mean cost {:.4}", summary.algorithm.name(), summary.final_window_mean);
    for s in &summary.seeds {
        let mut line = format!("  seed {}: {:.4}", s.seed, s.final_window_mean);
        for (name, b) in &s.baselines {
            line.push_str(&format!("  {name} {:.4} ({:+.1}%)", b.cost, 100.0 * b.relative_improvement));
        }
        println!("{line}");
    }
    println!("results in {}", out.display());
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match &cli.command {
        Command::Train => {
            let mut cfg = load_config(&cli)?;
            cfg.algorithm = Algorithm::Mfhppo;
            let dir = out.join("train");
            print_summary(&run_experiment(&cfg, &dir)?, &dir);
        }
        Command::Baseline { policy } => {
            let mut cfg = load_config(&cli)?;
            cfg.algorithm = *policy;
            cfg.baselines.clear();
            let dir = out.join(policy.name());
            print_summary(&run_experiment(&cfg, &dir)?, &dir);
        }
        Command::Eval { run, episodes, greedy } => {
            let cfg = load_config(&cli)?;
            let dir = run.clone().unwrap_or_else(|| out.join("train"));
            for &seed in &cfg.seeds {
                let path = policy_file(&dir, seed);
                let policies = load_policies(&path, &cfg).with_context(|| format!("loading {}", path.display()))?;
                let costs = evaluate(&cfg.env, &policies, *episodes, seed, *greedy)?;
                let mean = costs.iter().sum::<f64>() / costs.len() as f64;
                println!("seed {seed}: mean cost {mean:.4} over {episodes} episodes");
            }
        }
        Command::FpkCheck { resolutions } => {
            if resolutions.len() < 2 {
                bail!("need at least two resolutions");
            }
            let rows = fpk_convergence(resolutions)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("fpk_check.csv");
            write_fpk_csv(&path, &rows)?;
            println!("case,resolution,dx,dt,residual,ratio");
            for r in &rows {
                let ratio = r.ratio.map(|v| format!("{v:.3}")).unwrap_or_default();
                println!("{:?},{},{},{},{:.6e},{ratio}", r.case, r.resolution, r.dx, r.dt, r.residual);
            }
            println!("written to {}", path.display());
        }
        Command::Sweep { clips, tail } => {
            let cfg = load_config(&cli)?;
            let dir = out.join("sweep");
            let rows = run_sweep(&cfg, clips, &[true, false], *tail, &dir)?;
            println!("clip,lstm,final_window_mean,tail_std");
            for r in rows {
                println!("{},{},{:.4},{:.4}", r.clip, r.lstm, r.final_window_mean, r.tail_std);
            }
        }
        Command::Bench { counts, episodes, repeats } => {
            let cfg = load_config(&cli)?;
            let report = bench_scaling(&cfg, counts, *episodes, *repeats)?;
            println!("num_uavs,wall_ms");
            for r in &report.rows {
                println!("{},{:.1}", r.num_uavs, r.wall_ms);
            }
            println!("fitted exponent {:.3}", report.exponent);
        }
        Command::Chart { input, output } => {
            emit_chart(input, output)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}
