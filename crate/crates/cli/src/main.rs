use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wienerkin::config::{load_config, RunConfig};
use wienerkin::decay::{fit_subexponential, kappa_theory};
use wienerkin::estimates::{estimate_coercivity, sample_trilinear_constant, verify_weighted_coercivity, EstimateReport};
use wienerkin::runner::{read_norm_series, run_scenario};
use wienerkin::{KineticError, Result};

#[derive(Parser)]
#[command(name = "wienerkin", version, about = "Fourier-mode Landau and Boltzmann solver with estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a torus or channel scenario and write CSV, summary and checkpoint.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample functional-inequality constants and print the reports as JSON.
    VerifyEstimates {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Far-field radius for the weighted coercivity check.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
    },
    /// Fit C exp(-lambda t^kappa) to the norm column of a run CSV.
    FitDecay {
        #[arg(long)]
        csv: PathBuf,
        /// Window start; defaults to 0.2 of the last time.
        #[arg(long)]
        from: Option<f64>,
        /// Window end; defaults to the last time.
        #[arg(long)]
        to: Option<f64>,
    },
    /// Print the predicted decay exponent for a config.
    Kappa {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Rayon worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Coercivity,
    Weighted,
    Trilinear,
    All,
}

fn verify(cfg: &RunConfig, which: Which, samples: usize, radius: f64) -> Result<Vec<EstimateReport>> {
    let model = cfg.build_model()?;
    let w = cfg.weight_spec()?;
    let mut out = Vec::new();
    if matches!(which, Which::Coercivity | Which::All) {
        out.push(estimate_coercivity(&model, samples, cfg.seed)?);
    }
    if matches!(which, Which::Weighted | Which::All) {
        out.push(verify_weighted_coercivity(&model, &w, radius, samples, cfg.seed)?);
    }
    if matches!(which, Which::Trilinear | Which::All) {
        out.push(sample_trilinear_constant(&model, &w, samples, cfg.seed)?);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, resume } => {
            let cfg = common.load()?;
            let summary = run_scenario(&cfg, resume.as_deref())?;
            println!("{}", summary.to_json()?);
        }
        Command::VerifyEstimates { common, which, samples, radius } => {
            let cfg = common.load()?;
            let pool = rayon_pool(cfg.workers)?;
            let reports = pool.install(|| verify(&cfg, which, samples, radius))?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
        }
        Command::FitDecay { csv, from, to } => {
            let series = read_norm_series(&csv)?;
            let last = series.last().map(|p| p.0).ok_or_else(|| KineticError::Fit("empty series".into()))?;
            let fit = fit_subexponential(&series, (from.unwrap_or(0.2 * last), to.unwrap_or(last)))?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
        Command::Kappa { config } => {
            let cfg = load_config(&config)?;
            let k = kappa_theory(&cfg.weight_spec()?)?;
            println!("{} ({k})", k.value());
        }
    }
    Ok(())
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| KineticError::Config(format!("worker pool: {e}")))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
