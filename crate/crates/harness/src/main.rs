use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qhmc_harness::config::{BridgeParams, DenoiseExperiment};
use qhmc_harness::{emit_artifacts, run_experiment, Experiment, ExperimentConfig, HarnessError, Result, RunMetrics};

/// Random-mass Hamiltonian Monte Carlo experiments.
///
/// Settings come from the JSON config file; flags given on the command line
/// override the file.
#[derive(Parser)]
#[command(name = "qhmc-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single sampler (the config's only run, or the experiment's first default run).
    Sample {
        #[command(flatten)]
        common: Common,
    },
    /// Run every sampler of an experiment.
    Experiment {
        /// Experiment id to run with default settings when no config is given.
        #[arg(long, conflicts_with = "config")]
        id: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Bridge regression on the diabetes table.
    Regress {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Low-rank plus sparse denoising of a gray-level image.
    Denoise {
        /// PGM or CSV image; a built-in glyph when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Salt-and-pepper density applied before denoising.
        #[arg(long)]
        density: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    paper_scale: bool,
}

impl Common {
    fn load(&self, fallback: impl FnOnce() -> Result<Experiment>) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(fallback()?),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.paper_scale |= self.paper_scale;
        Ok(config)
    }
}

fn build_config(command: Command) -> Result<ExperimentConfig> {
    match command {
        Command::Sample { common } => {
            let mut config = common.load(|| Err(HarnessError::Config("sample needs --config".into())))?;
            match config.runs.len() {
                0 => config.runs = config.experiment.default_runs().into_iter().take(1).collect(),
                1 => {}
                n => return Err(HarnessError::Config(format!("sample runs one sampler, the config lists {n}; use `experiment`"))),
            }
            config.repetitions = 1;
            Ok(config)
        }
        Command::Experiment { id, common } => common.load(|| match id {
            Some(id) => Experiment::from_id(&id),
            None => Err(HarnessError::Config("experiment needs --config or --id".into())),
        }),
        Command::Regress { data, lambda, mu, common } => {
            let mut config = common.load(|| Ok(Experiment::Bridge(BridgeParams::default())))?;
            let Experiment::Bridge(params) = &mut config.experiment else {
                return Err(HarnessError::Config(format!("regress needs a bridge config, got {}", config.experiment.id())));
            };
            if let Some(data) = data {
                params.data = data;
            }
            if let Some(lambda) = lambda {
                params.lambda = lambda;
            }
            if let Some(mu) = mu {
                params.mu = mu;
            }
            Ok(config)
        }
        Command::Denoise { image, density, common } => {
            let mut config = common.load(|| Ok(Experiment::Denoise(DenoiseExperiment::default())))?;
            let Experiment::Denoise(params) = &mut config.experiment else {
                return Err(HarnessError::Config(format!("denoise needs a denoise config, got {}", config.experiment.id())));
            };
            if image.is_some() {
                params.image = image;
            }
            if let Some(density) = density {
                params.density = density;
            }
            Ok(config)
        }
    }
}

fn summary(m: &RunMetrics) -> String {
    let mut parts = vec![format!("n={}", m.n_samples)];
    let mut push = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            parts.push(format!("{name}={v:.4}"));
        }
    };
    push("accept", m.acceptance_rate);
    push("w1", m.w1);
    push("escape", m.escape.as_ref().map(|e| e.final_fraction()));
    push("test_mse", m.test_mse);
    push("psnr", m.psnr);
    push("xi", m.xi_mean);
    if m.w1.is_none() && m.variance.len() <= 4 {
        for (k, v) in m.variance.iter().enumerate() {
            push(&format!("var{k}"), *v);
        }
    }
    if let Some(f) = &m.mode_fractions {
        parts.push(format!("modes={f:.3?}"));
    }
    parts.join(" ")
}

fn run(cli: Cli) -> Result<()> {
    qhmc_harness::experiments::init_thread_pool()?;
    let config = build_config(cli.command)?;
    let output = run_experiment(&config)?;
    let written = emit_artifacts(&output, &config.output_dir)?;
    for r in &output.runs {
        println!("{} rep {}: {}", r.label, r.repetition, summary(&r.metrics));
    }
    if let Some(metrics) = written.last() {
        println!("wrote {} files; metrics in {}", written.len(), metrics.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qhmc-kit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
