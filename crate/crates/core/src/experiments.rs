//! Experiment drivers behind the command-line tool.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]: it returns the
//! artifacts (config echo, tables, logs) as in-memory files, and the caller
//! decides where to write them.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::correlation::{self, CorrelationError, CorrelationReport};
use crate::dataset::{self, Dataset, DatasetError, FeatureMask, SplitSpec, SyntheticSpec};
use crate::ga::{self, GaConfig, GaError, SelectionStrategy, WrapperEvaluator, WrapperProtocol};
use crate::magnitude::{self, MagnitudeError, MagnitudeReport};
use crate::mlp::{TrainConfig, DEFAULT_HIDDEN};
use crate::model::{Classifier, ModelError, ModelKind};
use crate::par::Exec;
use crate::report::{self, Artifact, Cell, ReportError, ReportTable};
use crate::rng::derive_seed;
use crate::svm::{KernelSpec, SvmConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Magnitude(#[from] MagnitudeError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("invalid experiment config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    GenData,
    Baseline,
    Correlate,
    Magnitude,
    Ga,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::GenData => "gen-data",
            Technique::Baseline => "baseline",
            Technique::Correlate => "correlate",
            Technique::Magnitude => "magnitude",
            Technique::Ga => "ga",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DataSource::Csv { path } => dataset::load_csv(path)?,
            DataSource::Synthetic(spec) => dataset::synthesize(spec)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlpSettings {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvmSettings {
    pub kernel: KernelSpec,
    pub config: SvmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaSettings {
    pub population_size: usize,
    pub generations: usize,
    pub strategy: SelectionStrategy,
    pub crossover_rate: f64,
    /// `None` means `1 / n_features`.
    pub mutation_rate: Option<f64>,
    pub elitism_count: usize,
    pub protocol: WrapperProtocol,
}

/// Every effective parameter of one run. Serialized verbatim as the config
/// echo, so defaults the user never set are materialized there too.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub technique: Technique,
    pub data: DataSource,
    /// `None` runs both classifiers where the technique allows it.
    pub model: Option<ModelKind>,
    pub master_seed: u64,
    pub paper_scale: bool,
    pub standardize: bool,
    pub split: SplitSpec,
    pub mlp: MlpSettings,
    pub svm: SvmSettings,
    pub ablate: usize,
    pub magnitude_runs: usize,
    pub ga: GaSettings,
}

/// Desk-scale sizes: population, generations, MLP epochs.
pub const DESK_SCALE: (usize, usize, usize) = (20, 10, 500);
pub const PAPER_SCALE: (usize, usize, usize) = (60, 100, 10_000);

impl ExperimentConfig {
    pub fn new(
        technique: Technique,
        data: DataSource,
        master_seed: u64,
        paper_scale: bool,
    ) -> Self {
        let (pop, gen, epochs) = if paper_scale { PAPER_SCALE } else { DESK_SCALE };
        Self {
            technique,
            data,
            model: None,
            master_seed,
            paper_scale,
            standardize: true,
            split: SplitSpec {
                seed: master_seed,
                ..SplitSpec::default()
            },
            mlp: MlpSettings {
                hidden: DEFAULT_HIDDEN.to_vec(),
                train: TrainConfig {
                    epochs,
                    ..TrainConfig::default()
                },
            },
            svm: SvmSettings {
                kernel: KernelSpec::default(),
                config: SvmConfig::default(),
            },
            ablate: match technique {
                Technique::Magnitude => 5,
                _ => 4,
            },
            magnitude_runs: 20,
            ga: GaSettings {
                population_size: pop,
                generations: gen,
                strategy: SelectionStrategy::tournament_for(pop),
                crossover_rate: 0.9,
                mutation_rate: None,
                elitism_count: 1,
                protocol: WrapperProtocol::default(),
            },
        }
    }

    pub fn classifier(&self, kind: ModelKind) -> Classifier {
        match kind {
            ModelKind::Ann => Classifier::Mlp {
                hidden: self.mlp.hidden.clone(),
                train: self.mlp.train,
            },
            ModelKind::Svm => Classifier::Svm {
                kernel: self.svm.kernel,
                config: self.svm.config,
            },
        }
    }

    /// Models to run: the selected one, or both.
    pub fn models(&self) -> Vec<ModelKind> {
        match self.model {
            Some(k) => vec![k],
            None => vec![ModelKind::Svm, ModelKind::Ann],
        }
    }

    pub fn echo(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Train/test partitions after the optional standardization.
struct Prepared {
    train: Dataset,
    test: Dataset,
}

fn prepare(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Prepared> {
    let (train, test) = dataset::split(ds, &cfg.split)?;
    Ok(if cfg.standardize {
        let mut s = dataset::standardize(&train, &[&test]);
        Prepared {
            train: s.train,
            test: s.others.pop().expect("one other"),
        }
    } else {
        Prepared { train, test }
    })
}

fn masked_test_accuracy(clf: &Classifier, data: &Prepared, mask: &FeatureMask) -> Result<f64> {
    let model = clf.fit(&dataset::apply_mask(&data.train, mask)?)?;
    Ok(model.accuracy(&dataset::apply_mask(&data.test, mask)?)?)
}

fn artifact(file_name: &str, contents: String) -> Artifact {
    Artifact {
        file_name: file_name.to_owned(),
        contents,
    }
}

/// Runs the configured technique and returns its artifacts, config echo first.
pub fn run(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<Artifact>> {
    let ds = cfg.data.load()?;
    let mut out = vec![artifact(
        &format!("{}_config.json", cfg.technique.name()),
        cfg.echo(),
    )];
    match cfg.technique {
        Technique::GenData => {
            let mut buf = Vec::new();
            dataset::write_csv(&ds, &mut buf)?;
            out.push(artifact(
                "data.csv",
                String::from_utf8(buf).expect("csv is utf-8"),
            ));
        }
        Technique::Baseline => out.extend(report::render(&[baseline(cfg, &ds)?])?),
        Technique::Correlate => out.extend(correlate(cfg, &ds, exec)?),
        Technique::Magnitude => out.extend(magnitude_experiment(cfg, &ds, exec)?),
        Technique::Ga => out.extend(ga_experiment(cfg, &ds, exec)?),
    }
    Ok(out)
}

/// All-feature train and test accuracy per model.
pub fn baseline(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ReportTable> {
    let data = prepare(cfg, ds)?;
    let mut table = ReportTable::new(
        "baseline",
        &["Model", "Final Train Accuracy", "Test Accuracy"],
    );
    for kind in cfg.models() {
        let model = cfg.classifier(kind).fit(&data.train)?;
        table.push(vec![
            kind.label().into(),
            model.accuracy(&data.train)?.into(),
            model.accuracy(&data.test)?.into(),
        ]);
    }
    Ok(table)
}

/// Test accuracy of each model on the full mask and on each ablation mask.
fn ablation_table(
    name: &str,
    cfg: &ExperimentConfig,
    data: &Prepared,
    ascending: &[usize],
    masks: &[FeatureMask],
    exec: Exec,
) -> Result<ReportTable> {
    let models = cfg.models();
    let mut columns = vec!["Removed", "Removed Features", "Mask"];
    let headers: Vec<String> = models
        .iter()
        .map(|k| format!("{} Test Accuracy", k.label()))
        .collect();
    columns.extend(headers.iter().map(String::as_str));
    let mut table = ReportTable::new(name, &columns);

    let mut all = vec![FeatureMask::full(data.train.n_features())];
    all.extend(masks.iter().cloned());
    let jobs: Vec<(usize, ModelKind)> = (0..all.len())
        .flat_map(|r| models.iter().map(move |&k| (r, k)))
        .collect();
    let scores = exec.map(&jobs, |&(r, k)| {
        masked_test_accuracy(&cfg.classifier(k), data, &all[r])
    });
    let mut scores = scores.into_iter();
    let names = data.train.feature_names();
    for (removed, mask) in all.iter().enumerate() {
        let dropped: Vec<&str> = ascending[..removed]
            .iter()
            .map(|&j| names[j].as_str())
            .collect();
        let mut row: Vec<Cell> = vec![
            removed.into(),
            if dropped.is_empty() {
                "none".into()
            } else {
                dropped.join(" ").into()
            },
            mask.to_string().into(),
        ];
        for _ in &models {
            row.push(scores.next().expect("one score per job")?.into());
        }
        table.push(row);
    }
    Ok(table)
}

/// Correlation ranking computed on the training partition.
pub fn correlation_report(cfg: &ExperimentConfig, ds: &Dataset) -> Result<CorrelationReport> {
    Ok(correlation::rank_features(&prepare(cfg, ds)?.train)?)
}

/// Averaged magnitude ranking computed on the training partition.
pub fn magnitude_report(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    exec: Exec,
) -> Result<MagnitudeReport> {
    magnitude_on(cfg, &prepare(cfg, ds)?.train, exec)
}

fn magnitude_on(cfg: &ExperimentConfig, train: &Dataset, exec: Exec) -> Result<MagnitudeReport> {
    let arch = cfg
        .classifier(ModelKind::Ann)
        .architecture(train.n_features())?;
    Ok(magnitude::averaged_ranking(
        train,
        &arch,
        &cfg.mlp.train,
        cfg.magnitude_runs,
        derive_seed(cfg.master_seed, 0x6d6167),
        exec,
    )?)
}

/// Correlation ranking on the training partition and the removal ablation.
pub fn correlate(cfg: &ExperimentConfig, ds: &Dataset, exec: Exec) -> Result<Vec<Artifact>> {
    let data = prepare(cfg, ds)?;
    let rep = correlation::rank_features(&data.train)?;
    let masks = correlation::ablation_masks(&rep, cfg.ablate)?;
    let table = ablation_table(
        "correlation_ablation",
        cfg,
        &data,
        &rep.ranking,
        &masks,
        exec,
    )?;
    let mut out = vec![
        artifact("correlation.csv", rep.to_csv()),
        artifact("correlation.md", rep.to_markdown()),
    ];
    out.extend(report::render(&[table])?);
    Ok(out)
}

/// Averaged magnitude ranking on the training partition and the removal
/// ablation.
pub fn magnitude_experiment(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    exec: Exec,
) -> Result<Vec<Artifact>> {
    let data = prepare(cfg, ds)?;
    let rep = magnitude_on(cfg, &data.train, exec)?;
    let masks = magnitude::ablation_masks(&rep, cfg.ablate)?;
    let table = ablation_table("magnitude_ablation", cfg, &data, &rep.ranking, &masks, exec)?;
    let mut ranking = ReportTable::new("magnitude", &["Rank", "Feature", "Magnitude", "Std"]);
    for (pos, &j) in rep.ranking.iter().enumerate() {
        ranking.push(vec![
            (pos + 1).into(),
            rep.feature_names[j].clone().into(),
            rep.mean[j].into(),
            rep.std[j].into(),
        ]);
    }
    let mut out = vec![artifact("magnitude_runs.csv", rep.runs_csv())];
    out.extend(report::render(&[ranking, table])?);
    Ok(out)
}

/// Outcome of one GA wrapper run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best_mask: FeatureMask,
    pub validation_fitness: f64,
    pub test_accuracy: f64,
    pub baseline_accuracy: f64,
    pub log: ga::EvolutionLog,
}

impl GaOutcome {
    pub fn improvement(&self) -> f64 {
        self.test_accuracy - self.baseline_accuracy
    }
}

pub fn ga_config(cfg: &ExperimentConfig, n_features: usize) -> GaConfig {
    GaConfig {
        n_features,
        population_size: cfg.ga.population_size,
        generations: cfg.ga.generations,
        crossover_rate: cfg.ga.crossover_rate,
        mutation_rate: cfg
            .ga
            .mutation_rate
            .unwrap_or(1.0 / n_features.max(1) as f64),
        elitism_count: cfg.ga.elitism_count,
        master_seed: cfg.master_seed,
        strategy: cfg.ga.strategy,
    }
}

/// GA wrapper for one model. The baseline is the all-feature model under the
/// same partitions and model seed, scored on the same held-out test set.
pub fn run_ga(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    kind: ModelKind,
    exec: Exec,
) -> Result<GaOutcome> {
    let protocol = WrapperProtocol {
        standardize: cfg.standardize,
        ..cfg.ga.protocol
    };
    let eval = WrapperEvaluator::new(ds, &cfg.classifier(kind), &protocol, cfg.master_seed)?;
    let baseline_accuracy = eval.test_accuracy(&FeatureMask::full(ds.n_features()))?;
    let (best, log) = ga::evolve(&ga_config(cfg, ds.n_features()), &eval, exec)?;
    let test_accuracy = eval.test_accuracy(&best.mask)?;
    Ok(GaOutcome {
        validation_fitness: best.fitness.unwrap_or(0.0),
        best_mask: best.mask,
        test_accuracy,
        baseline_accuracy,
        log,
    })
}

pub fn ga_experiment(cfg: &ExperimentConfig, ds: &Dataset, exec: Exec) -> Result<Vec<Artifact>> {
    let mut summary = ReportTable::new(
        "ga_summary",
        &[
            "Model",
            "Strategy",
            "Population/Generation",
            "DNA",
            "Validation Accuracy",
            "Test Accuracy",
            "Baseline",
            "Improvement",
        ],
    );
    let mut out = Vec::new();
    for kind in cfg.models() {
        let o = run_ga(cfg, ds, kind, exec)?;
        summary.push(vec![
            kind.label().into(),
            cfg.ga.strategy.name().into(),
            format!("{}/{}", cfg.ga.population_size, cfg.ga.generations).into(),
            o.best_mask.to_string().into(),
            o.validation_fitness.into(),
            o.test_accuracy.into(),
            o.baseline_accuracy.into(),
            o.improvement().into(),
        ]);
        out.push(artifact(
            &format!("ga_log_{}.csv", kind.label().to_lowercase()),
            o.log.to_csv(),
        ));
    }
    out.extend(report::render(&[summary])?);
    Ok(out)
}

/// Concatenates the Markdown tables found among `files` (name, contents)
/// into one document, sorted by file name.
pub fn combine_markdown(files: &[(String, String)]) -> Result<String> {
    let mut md: Vec<&(String, String)> = files
        .iter()
        .filter(|(name, _)| name.ends_with(".md") && name != "report.md")
        .collect();
    if md.is_empty() {
        return Err(ReportError::Empty.into());
    }
    md.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::from("# Feature selection report\n");
    for (name, body) in md {
        out.push_str(&format!(
            "\n## {}\n\n{}",
            name.trim_end_matches(".md"),
            body
        ));
    }
    Ok(out)
}
