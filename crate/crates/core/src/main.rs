use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use featsel::dataset::SyntheticSpec;
use featsel::experiments::{self, DataSource, ExperimentConfig, Technique};
use featsel::ga::SelectionStrategy;
use featsel::model::ModelKind;
use featsel::par::{self, Exec};
use featsel::report::{self, Artifact};

#[derive(Parser)]
#[command(name = "featsel", version, about = "Feature-selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset as CSV.
    GenData(Common),
    /// All-feature train/test accuracy.
    Baseline(Common),
    /// Correlation ranking and removal ablation.
    Correlate(Common),
    /// Weight-magnitude ranking and removal ablation.
    Magnitude(MagnitudeArgs),
    /// Genetic-algorithm wrapper search.
    Ga(GaArgs),
    /// Combine the Markdown tables in --out into report.md.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ann,
    Svm,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Proportional,
    Tournament,
    Hof,
}

#[derive(Args)]
struct Common {
    /// CSV path, or `synthetic` for generated data.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<String>,
    /// Use generated data (the default when --data is absent).
    #[arg(long)]
    synthetic: bool,
    /// Master seed.
    #[arg(long, default_value_t = 22)]
    seed: u64,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Long-run sizes: population 60, 100 generations, 10000 epochs.
    #[arg(long)]
    paper_scale: bool,
    /// Override the MLP epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Skip z-scoring of features.
    #[arg(long)]
    no_standardize: bool,
    /// Number of removal steps in ablations.
    #[arg(long)]
    ablate: Option<usize>,
    #[arg(long, default_value_t = 620)]
    n_records: usize,
    #[arg(long, default_value_t = 4)]
    informative: usize,
    #[arg(long, default_value_t = 6)]
    noise: usize,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.05)]
    label_noise: f64,
    /// Seed of the synthetic generator.
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
}

#[derive(Args)]
struct MagnitudeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 20)]
    runs: usize,
}

#[derive(Args)]
struct GaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "tournament")]
    strategy: StrategyArg,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gen: Option<usize>,
    /// Tournament size (default 60% of the population).
    #[arg(long)]
    tournament_size: Option<usize>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    elitism: Option<usize>,
}

fn base_config(technique: Technique, c: &Common) -> ExperimentConfig {
    let data = match c.data.as_deref() {
        Some(path) if path != "synthetic" => DataSource::Csv { path: path.into() },
        _ => DataSource::Synthetic(SyntheticSpec {
            n_records: c.n_records,
            n_informative: c.informative,
            n_noise: c.noise,
            class_separation: c.separation,
            label_noise_rate: c.label_noise,
            seed: c.data_seed,
        }),
    };
    let mut cfg = ExperimentConfig::new(technique, data, c.seed, c.paper_scale);
    cfg.model = c.model.map(|m| match m {
        ModelArg::Ann => ModelKind::Ann,
        ModelArg::Svm => ModelKind::Svm,
    });
    cfg.standardize = !c.no_standardize;
    if let Some(e) = c.epochs {
        cfg.mlp.train.epochs = e;
    }
    if let Some(k) = c.ablate {
        cfg.ablate = k;
    }
    cfg
}

fn config_for(command: &Command) -> Option<(ExperimentConfig, &PathBuf)> {
    Some(match command {
        Command::GenData(c) => (base_config(Technique::GenData, c), &c.out),
        Command::Baseline(c) => (base_config(Technique::Baseline, c), &c.out),
        Command::Correlate(c) => (base_config(Technique::Correlate, c), &c.out),
        Command::Magnitude(m) => {
            let mut cfg = base_config(Technique::Magnitude, &m.common);
            cfg.magnitude_runs = m.runs;
            (cfg, &m.common.out)
        }
        Command::Ga(g) => {
            let mut cfg = base_config(Technique::Ga, &g.common);
            if let Some(p) = g.pop {
                cfg.ga.population_size = p;
            }
            if let Some(n) = g.gen {
                cfg.ga.generations = n;
            }
            cfg.ga.strategy = match g.strategy {
                StrategyArg::Proportional => SelectionStrategy::Proportional,
                StrategyArg::Hof => SelectionStrategy::HallOfFame,
                StrategyArg::Tournament => match g.tournament_size {
                    Some(size) => SelectionStrategy::Tournament { size },
                    None => SelectionStrategy::tournament_for(cfg.ga.population_size),
                },
            };
            if let Some(r) = g.crossover_rate {
                cfg.ga.crossover_rate = r;
            }
            if g.mutation_rate.is_some() {
                cfg.ga.mutation_rate = g.mutation_rate;
            }
            if let Some(e) = g.elitism {
                cfg.ga.elitism_count = e;
            }
            (cfg, &g.common.out)
        }
        Command::Report { .. } => return None,
    })
}

fn combine(out: &PathBuf) -> Result<Vec<PathBuf>, Box<dyn std::error::Error>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(out)? {
        let path = entry?.path();
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if name.ends_with(".md") {
                files.push((name.to_owned(), fs::read_to_string(&path)?));
            }
        }
    }
    let doc = experiments::combine_markdown(&files)?;
    Ok(report::write_artifacts(
        out,
        &[Artifact {
            file_name: "report.md".into(),
            contents: doc,
        }],
    )?)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Box<dyn std::error::Error>> {
    match config_for(&cli.command) {
        Some((cfg, out)) => {
            let artifacts = par::with_threads(par::thread_cap(), || {
                experiments::run(&cfg, Exec::default())
            })?;
            Ok(report::write_artifacts(out, &artifacts)?)
        }
        None => match &cli.command {
            Command::Report { out } => combine(out),
            _ => unreachable!("every other command has a config"),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
