use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vtalign::commands::{cmd_align, cmd_eval, cmd_sweep, cmd_synth, format_eval, Overrides};
use vtalign::pipeline::{Hyperparameters, SweepGrid};
use vtalign::synth::SynthConfig;
use vtalign::{AlignError, Rounding, SupervisionMode};

#[derive(Parser)]
#[command(name = "vtalign", version, about = "Align video intervals with ordered sentences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "nearest|feature|model")]
    rounding: Option<Rounding>,
    #[arg(long, value_name = "none|soft|hard")]
    supervision: Option<SupervisionMode>,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            rounding: self.rounding,
            supervision: self.supervision,
            gap_tol: self.gap_tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic suite with ground truth and a manifest.
    Synth {
        /// TOML file with synthesis settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        streams: Option<usize>,
        #[arg(long)]
        supervised_fraction: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Align every stream of a manifest.
    Align {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions against annotations, with baselines.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding `<id>.csv` prediction files.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Align and score over a hyperparameter grid; each manifest is one
    /// replicate.
    Sweep {
        #[arg(long, required = true, num_args = 1..)]
        manifest: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["alpha", "beta", "kappa"])]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', requires = "beta")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', requires = "alpha")]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["alpha", "beta"])]
        kappa: Vec<f64>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_synth_config(path: &PathBuf) -> vtalign::Result<SynthConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| AlignError::Io {
        path: path.clone(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| AlignError::Manifest(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> vtalign::Result<()> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            noise,
            streams,
            supervised_fraction,
            out_dir,
        } => {
            let mut cfg = match &config {
                Some(p) => load_synth_config(p)?,
                None => SynthConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.noise = noise.unwrap_or(cfg.noise);
            cfg.streams = streams.unwrap_or(cfg.streams);
            cfg.supervised_fraction = supervised_fraction.unwrap_or(cfg.supervised_fraction);
            let path = cmd_synth(&cfg, &Hyperparameters::default(), &out_dir)?;
            println!("{}", path.display());
        }
        Command::Align {
            manifest,
            out_dir,
            common,
        } => {
            let r = cmd_align(&manifest, &common.overrides(), &out_dir)?;
            println!(
                "iterations={} converged={} objective={} gap={}",
                r.iterations, r.converged, r.final_objective, r.final_gap
            );
        }
        Command::Eval {
            manifest,
            predictions,
            out_dir,
            common,
        } => {
            let summary = cmd_eval(&manifest, &predictions, &common.overrides())?;
            let json = format_eval(&summary);
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).map_err(|source| AlignError::Io {
                    path: dir.clone(),
                    source,
                })?;
                let f = dir.join("eval.json");
                std::fs::write(&f, &json).map_err(|source| AlignError::Io { path: f, source })?;
            }
            print!("{json}");
        }
        Command::Sweep {
            manifest,
            sigma,
            alpha,
            beta,
            kappa,
            out_dir,
            common,
        } => {
            let grid = if !sigma.is_empty() {
                SweepGrid::Sigma(sigma)
            } else if !kappa.is_empty() {
                SweepGrid::Kappa(kappa)
            } else if !alpha.is_empty() {
                SweepGrid::AlphaBeta { alpha, beta }
            } else {
                return Err(AlignError::InvalidParameter(
                    "empty sweep grid: pass --sigma, --kappa or --alpha with --beta".into(),
                ));
            };
            let rows = cmd_sweep(&manifest, &grid, &common.overrides(), &out_dir)?;
            println!("{} rows written to {}", rows.len(), out_dir.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.class());
            ExitCode::from(1)
        }
    }
}
