//! `dbens`: command-line front end for double ensemble experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use double_ensemble::harness::{self, ExperimentConfig, ExperimentKind};
use double_ensemble::Error;

#[derive(Parser)]
#[command(name = "dbens", version, about = "Double ensemble training and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an ensemble with the first seed and save it as model.json.
    Fit(Common),
    /// Score a CSV file with a saved ensemble.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Saved ensemble (model.json from `fit`).
        #[arg(long)]
        model: Option<PathBuf>,
        /// CSV file to score.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write `row_index,score`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Column to drop from the input before scoring.
        #[arg(long)]
        label_column: Option<String>,
    },
    /// Fit and evaluate once per seed.
    Eval(Common),
    /// Reweighting on the easy/hard/noisy toy task.
    Toy(Common),
    /// Every variant on every noise setting for every seed.
    NoiseGrid(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Number of sub-models.
    #[arg(long)]
    sub_models: Option<usize>,
    /// Iterations per sub-model (trees, epochs or solver steps).
    #[arg(long)]
    iterations: Option<usize>,
}

impl Common {
    fn load(&self, kind: ExperimentKind) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = kind;
        if let Some(seeds) = &self.seeds {
            cfg.seeds.clone_from(seeds);
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir.clone_from(dir);
        }
        if let Some(k) = self.sub_models {
            cfg.ensemble.sub_models = k;
        }
        if let Some(t) = self.iterations {
            cfg.ensemble.learner.iterations = t;
            cfg.toy.learner.iterations = t;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit(c) => {
            let cfg = c.load(ExperimentKind::SingleRun)?;
            let state = harness::run_fit(&cfg)?;
            println!("fitted {} sub-models; saved to {}", state.k_built(), cfg.output_dir.join("model.json").display());
        }
        Command::Predict { common, model, input, output, label_column } => {
            let mut cfg = common.load(ExperimentKind::Predict)?;
            let p = &mut cfg.predict;
            if let Some(m) = model {
                p.model = m;
            }
            if let Some(i) = input {
                p.input = i;
            }
            if let Some(o) = output {
                p.output = o;
            }
            if label_column.is_some() {
                p.label_column = label_column;
            }
            for (name, path) in [("--model", &p.model), ("--input", &p.input), ("--output", &p.output)] {
                if path.as_os_str().is_empty() {
                    return Err(Error::InvalidConfig(format!("{name} is required")));
                }
            }
            let n = harness::run_predict(&p.model, &p.input, &p.output, p.label_column.as_deref())?;
            println!("scored {n} rows into {}", p.output.display());
        }
        Command::Eval(c) => {
            let cfg = c.load(ExperimentKind::SingleRun)?;
            let result = harness::run_eval(&cfg)?;
            for m in &result.aggregate {
                println!("{:<16} {:.6} / {:.6}", m.metric, m.mean, m.std);
            }
        }
        Command::Toy(c) => {
            let cfg = c.load(ExperimentKind::Toy)?;
            let result = harness::run_toy(&cfg)?;
            println!("{} mean-weight rows written to {}", result.rows.len(), cfg.output_dir.display());
        }
        Command::NoiseGrid(c) => {
            let cfg = c.load(ExperimentKind::NoiseGrid)?;
            let result = harness::run_noise_grid(&cfg)?;
            for row in &result.table {
                println!("{}", row.join("\t"));
            }
        }
    }
    Ok(())
}

/// 1 for usage and configuration errors, 3 for numeric failures, 2 for
/// everything about the input data and files.
fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        return 3;
    }
    let mut root = e;
    while let Error::SubModel { source, .. } = root {
        root = source;
    }
    match root {
        Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
