//! Genetic search over feature masks.
//!
//! Each chromosome is a [`FeatureMask`]. A generation is evaluated as a batch
//! (distinct, not-yet-seen masks only, optionally in parallel), logged, and
//! then bred into the next one: the `elitism_count` fittest are copied, the
//! rest come from parent selection, single-point crossover and bit-flip
//! mutation. Three parent-selection schemes are supported:
//!
//! * proportional: one parent by fitness-proportional (roulette) sampling,
//!   the other uniformly at random;
//! * tournament: each parent is the fittest of `n_ts` distinct random
//!   members;
//! * hall of fame: one parent uniformly from the archive of per-generation
//!   bests, the other by proportional sampling.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, FeatureMask, SplitSpec};
use crate::model::{Classifier, ModelError};
use crate::par::Exec;
use crate::rng::{derive_seed, seeded, SeededRng};

/// Floor applied to raw fitness before proportional sampling.
pub const FITNESS_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GaError {
    #[error("invalid GA config: {0}")]
    Config(String),
    #[error("tournament size {nts} outside [2, {pop}]")]
    TournamentSize { nts: usize, pop: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, GaError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub mask: FeatureMask,
    pub fitness: Option<f64>,
}

impl Chromosome {
    pub fn new(mask: FeatureMask) -> Self {
        Self {
            mask,
            fitness: None,
        }
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionStrategy {
    Proportional,
    Tournament { size: usize },
    HallOfFame,
}

impl SelectionStrategy {
    /// Tournament with `n_ts = round(0.6 · population)`.
    pub fn tournament_for(population: usize) -> Self {
        SelectionStrategy::Tournament {
            size: ((0.6 * population as f64).round() as usize).max(2),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::Proportional => "proportional",
            SelectionStrategy::Tournament { .. } => "tournament",
            SelectionStrategy::HallOfFame => "hof",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub n_features: usize,
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub master_seed: u64,
    pub strategy: SelectionStrategy,
}

impl GaConfig {
    /// Defaults: crossover 0.9, mutation `1 / n_features`, one elite,
    /// tournament of 60% of the population.
    pub fn new(n_features: usize, population_size: usize, generations: usize) -> Self {
        Self {
            n_features,
            population_size,
            generations,
            crossover_rate: 0.9,
            mutation_rate: 1.0 / n_features.max(1) as f64,
            elitism_count: 1,
            master_seed: 0,
            strategy: SelectionStrategy::tournament_for(population_size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_features > 64 {
            return Err(GaError::Config("n_features must be in 1..=64".into()));
        }
        if self.population_size < 4 {
            return Err(GaError::Config("population must be at least 4".into()));
        }
        if self.generations == 0 {
            return Err(GaError::Config("need at least one generation".into()));
        }
        for (name, r) in [
            ("crossover", self.crossover_rate),
            ("mutation", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(GaError::Config(format!("{name} rate must be in [0, 1]")));
            }
        }
        if self.elitism_count >= self.population_size {
            return Err(GaError::Config(
                "elitism must leave room for offspring".into(),
            ));
        }
        if let SelectionStrategy::Tournament { size } = self.strategy {
            if size < 2 || size > self.population_size {
                return Err(GaError::TournamentSize {
                    nts: size,
                    pop: self.population_size,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessOutcome {
    pub value: f64,
    /// The evaluator could not score the mask normally (e.g. training
    /// diverged) and returned a fallback value.
    pub flagged: bool,
}

impl FitnessOutcome {
    pub fn ok(value: f64) -> Self {
        Self {
            value,
            flagged: false,
        }
    }
}

pub trait FitnessEvaluator: Sync {
    fn fitness(&self, mask: &FeatureMask) -> FitnessOutcome;

    /// Score on data never used during the search, if the evaluator has any.
    fn holdout(&self, _mask: &FeatureMask) -> Option<f64> {
        None
    }
}

/// Adapts a plain function into an evaluator.
pub struct FnEvaluator<F>(pub F);

impl<F: Fn(&FeatureMask) -> f64 + Sync> FitnessEvaluator for FnEvaluator<F> {
    fn fitness(&self, mask: &FeatureMask) -> FitnessOutcome {
        FitnessOutcome::ok((self.0)(mask))
    }
}

/// Memo table in front of an evaluator. Each distinct mask is evaluated once.
pub struct FitnessCache<'a, E: ?Sized> {
    evaluator: &'a E,
    memo: HashMap<FeatureMask, FitnessOutcome>,
    flagged: usize,
}

impl<'a, E: FitnessEvaluator + ?Sized> FitnessCache<'a, E> {
    pub fn new(evaluator: &'a E) -> Self {
        Self {
            evaluator,
            memo: HashMap::new(),
            flagged: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.memo.len()
    }

    pub fn flagged(&self) -> usize {
        self.flagged
    }

    pub fn get(&mut self, mask: &FeatureMask) -> f64 {
        self.evaluate_batch(std::slice::from_ref(mask), Exec::Sequential)[0]
    }

    /// Fitness for each mask. Unseen masks are evaluated under `exec` in
    /// first-occurrence order; results do not depend on scheduling.
    pub fn evaluate_batch(&mut self, masks: &[FeatureMask], exec: Exec) -> Vec<f64> {
        let mut fresh: Vec<FeatureMask> = Vec::new();
        for m in masks {
            if !self.memo.contains_key(m) && !fresh.contains(m) {
                fresh.push(m.clone());
            }
        }
        let outcomes = exec.map(&fresh, |m| self.evaluator.fitness(m));
        for (m, o) in fresh.into_iter().zip(outcomes) {
            self.flagged += usize::from(o.flagged);
            self.memo.insert(m, o);
        }
        masks.iter().map(|m| self.memo[m].value).collect()
    }
}

/// Uniform random mask with no all-zero outcome.
pub fn random_mask(n: usize, rng: &mut SeededRng) -> FeatureMask {
    loop {
        let m = FeatureMask::new((0..n).map(|_| rng.random_bool(0.5)).collect());
        if !m.is_all_zero() {
            return m;
        }
    }
}

pub fn init_population(cfg: &GaConfig) -> Vec<Chromosome> {
    let mut rng = seeded(derive_seed(cfg.master_seed, 0x1a17));
    (0..cfg.population_size)
        .map(|_| Chromosome::new(random_mask(cfg.n_features, &mut rng)))
        .collect()
}

/// Selection probabilities `f_r(x_i) / Σ_l f_r(x_l)` with
/// `f_r = max(fitness, FITNESS_FLOOR)`.
pub fn proportional_probabilities(fitness: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = fitness.iter().map(|f| f.max(FITNESS_FLOOR)).collect();
    let total: f64 = scaled.iter().sum();
    scaled.iter().map(|f| f / total).collect()
}

/// Roulette-wheel draw over `fitness`.
pub fn select_proportional(fitness: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = fitness.iter().map(|f| f.max(FITNESS_FLOOR)).sum();
    let mut target = rng.random::<f64>() * total;
    for (i, f) in fitness.iter().enumerate() {
        target -= f.max(FITNESS_FLOOR);
        if target < 0.0 {
            return i;
        }
    }
    fitness.len() - 1
}

/// Higher fitness wins; equal fitness goes to the smaller mask value.
fn fitter(a: &Chromosome, b: &Chromosome) -> bool {
    match a.score().total_cmp(&b.score()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.mask.as_u64() < b.mask.as_u64(),
    }
}

fn best_index(pop: &[Chromosome]) -> usize {
    (1..pop.len()).fold(
        0,
        |best, i| if fitter(&pop[i], &pop[best]) { i } else { best },
    )
}

/// Fittest of `nts` members drawn without replacement.
pub fn select_tournament(pop: &[Chromosome], nts: usize, rng: &mut SeededRng) -> Result<usize> {
    if nts < 2 || nts > pop.len() {
        return Err(GaError::TournamentSize {
            nts,
            pop: pop.len(),
        });
    }
    let picks = index::sample(rng, pop.len(), nts);
    let mut best = picks.index(0);
    for i in picks.iter().skip(1) {
        if fitter(&pop[i], &pop[best]) {
            best = i;
        }
    }
    Ok(best)
}

/// `(hall-of-fame index, population index)`: the first uniform over the
/// archive, the second proportional over the population.
pub fn select_hall_of_fame(
    hof: &[Chromosome],
    pop: &[Chromosome],
    rng: &mut SeededRng,
) -> (usize, usize) {
    assert!(!hof.is_empty(), "hall of fame is seeded before breeding");
    let a = rng.random_range(0..hof.len());
    let fitness: Vec<f64> = pop.iter().map(Chromosome::score).collect();
    (a, select_proportional(&fitness, rng))
}

/// Single-point crossover at `cut` (bits `[0, cut)` from the first parent).
pub fn crossover_at(a: &FeatureMask, b: &FeatureMask, cut: usize) -> (FeatureMask, FeatureMask) {
    let mut c1 = a.bits()[..cut].to_vec();
    c1.extend_from_slice(&b.bits()[cut..]);
    let mut c2 = b.bits()[..cut].to_vec();
    c2.extend_from_slice(&a.bits()[cut..]);
    (FeatureMask::new(c1), FeatureMask::new(c2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub first: FeatureMask,
    pub second: FeatureMask,
    /// Children that came out all-zero and were replaced by random masks.
    pub repairs: usize,
}

/// With probability `rate`, single-point crossover at a cut in `[1, n-1]`;
/// otherwise the children copy the parents.
pub fn crossover(a: &FeatureMask, b: &FeatureMask, rate: f64, rng: &mut SeededRng) -> Offspring {
    let n = a.len();
    assert_eq!(n, b.len(), "parents differ in length");
    let (c1, c2) = if n >= 2 && rng.random_bool(rate) {
        let cut = rng.random_range(1..n);
        crossover_at(a, b, cut)
    } else {
        (a.clone(), b.clone())
    };
    let mut repairs = 0;
    let mut fix = |m: FeatureMask, rng: &mut SeededRng| {
        if m.is_all_zero() {
            repairs += 1;
            random_mask(n, rng)
        } else {
            m
        }
    };
    let first = fix(c1, rng);
    let second = fix(c2, rng);
    Offspring {
        first,
        second,
        repairs,
    }
}

/// Independent bit flips with probability `rate`; an all-zero result is
/// replaced by a random mask (second field `true`).
pub fn mutate(mask: &FeatureMask, rate: f64, rng: &mut SeededRng) -> (FeatureMask, bool) {
    let bits: Vec<bool> = mask
        .bits()
        .iter()
        .map(|&b| if rng.random_bool(rate) { !b } else { b })
        .collect();
    let m = FeatureMask::new(bits);
    if m.is_all_zero() {
        (random_mask(mask.len(), rng), true)
    } else {
        (m, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best fitness found so far (this generation or earlier).
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_mask: FeatureMask,
    /// Distinct masks evaluated so far.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionLog {
    pub generations: Vec<GenerationRecord>,
    pub best: Chromosome,
    pub test_accuracy: Option<f64>,
    pub hall_of_fame: Vec<Chromosome>,
    pub repairs: usize,
    pub flagged_evaluations: usize,
}

impl EvolutionLog {
    /// `generation,best_fitness,mean_fitness,best_mask,evals`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best_fitness,mean_fitness,best_mask,evals\n");
        for g in &self.generations {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{},{}",
                g.generation, g.best_fitness, g.mean_fitness, g.best_mask, g.evaluations
            );
        }
        out
    }

    pub fn best_fitness_series(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.best_fitness).collect()
    }
}

pub fn evolve<E: FitnessEvaluator + ?Sized>(
    cfg: &GaConfig,
    evaluator: &E,
    exec: Exec,
) -> Result<(Chromosome, EvolutionLog)> {
    cfg.validate()?;
    let mut rng = seeded(derive_seed(cfg.master_seed, 0x6a));
    let mut cache = FitnessCache::new(evaluator);
    let mut pop = init_population(cfg);
    let mut hof: Vec<Chromosome> = Vec::new();
    let mut best: Option<Chromosome> = None;
    let mut records = Vec::with_capacity(cfg.generations);
    let mut repairs = 0;

    for generation in 0..cfg.generations {
        let masks: Vec<FeatureMask> = pop.iter().map(|c| c.mask.clone()).collect();
        let fitness = cache.evaluate_batch(&masks, exec);
        for (c, f) in pop.iter_mut().zip(&fitness) {
            c.fitness = Some(*f);
        }
        let gen_best = pop[best_index(&pop)].clone();
        hof.push(gen_best.clone());
        if best.as_ref().is_none_or(|b| gen_best.score() > b.score()) {
            best = Some(gen_best);
        }
        let overall = best.as_ref().expect("set above");
        records.push(GenerationRecord {
            generation,
            best_fitness: overall.score(),
            mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
            best_mask: overall.mask.clone(),
            evaluations: cache.evaluations(),
        });
        if generation + 1 == cfg.generations {
            break;
        }

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| {
            if fitter(&pop[a], &pop[b]) {
                std::cmp::Ordering::Less
            } else if fitter(&pop[b], &pop[a]) {
                std::cmp::Ordering::Greater
            } else {
                a.cmp(&b)
            }
        });
        let mut next: Vec<Chromosome> = order[..cfg.elitism_count]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        while next.len() < cfg.population_size {
            let (pa, pb) = match cfg.strategy {
                SelectionStrategy::Proportional => {
                    let a = select_proportional(&fitness, &mut rng);
                    let b = rng.random_range(0..pop.len());
                    (&pop[a].mask, &pop[b].mask)
                }
                SelectionStrategy::Tournament { size } => {
                    let a = select_tournament(&pop, size, &mut rng)?;
                    let b = select_tournament(&pop, size, &mut rng)?;
                    (&pop[a].mask, &pop[b].mask)
                }
                SelectionStrategy::HallOfFame => {
                    let (a, b) = select_hall_of_fame(&hof, &pop, &mut rng);
                    (&hof[a].mask, &pop[b].mask)
                }
            };
            let kids = crossover(pa, pb, cfg.crossover_rate, &mut rng);
            repairs += kids.repairs;
            for child in [kids.first, kids.second] {
                if next.len() == cfg.population_size {
                    break;
                }
                let (m, fixed) = mutate(&child, cfg.mutation_rate, &mut rng);
                repairs += usize::from(fixed);
                next.push(Chromosome::new(m));
            }
        }
        pop = next;
    }

    let best = best.expect("at least one generation");
    let log = EvolutionLog {
        generations: records,
        test_accuracy: evaluator.holdout(&best.mask),
        best: best.clone(),
        hall_of_fame: hof,
        repairs,
        flagged_evaluations: cache.flagged(),
    };
    Ok((best, log))
}

/// How a wrapper evaluator carves up the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrapperProtocol {
    /// Share held out as the final test set.
    pub test_fraction: f64,
    /// Share of the remainder used for validation (fitness).
    pub validation_fraction: f64,
    pub standardize: bool,
}

impl Default for WrapperProtocol {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            validation_fraction: 0.3,
            standardize: true,
        }
    }
}

/// Seeds for the data split and the model, both derived from one master seed.
pub fn split_seed(master_seed: u64) -> u64 {
    derive_seed(master_seed, 1)
}

pub fn model_seed(master_seed: u64) -> u64 {
    derive_seed(master_seed, 2)
}

/// Fitness = validation accuracy of `classifier` trained on the masked fit
/// set. The split and the model seed are fixed by the master seed, so fitness
/// is a deterministic function of the mask.
#[derive(Debug, Clone)]
pub struct WrapperEvaluator {
    classifier: Classifier,
    fit: Dataset,
    validation: Dataset,
    test: Dataset,
}

impl WrapperEvaluator {
    pub fn new(
        ds: &Dataset,
        classifier: &Classifier,
        protocol: &WrapperProtocol,
        master_seed: u64,
    ) -> Result<Self> {
        let seed = split_seed(master_seed);
        let (dev, test) = dataset::split(
            ds,
            &SplitSpec {
                train_fraction: 1.0 - protocol.test_fraction,
                stratified: true,
                seed,
            },
        )?;
        let (fit, validation) = dataset::split(
            &dev,
            &SplitSpec {
                train_fraction: 1.0 - protocol.validation_fraction,
                stratified: true,
                seed: derive_seed(seed, 1),
            },
        )?;
        let (fit, validation, test) = if protocol.standardize {
            let mut s = dataset::standardize(&fit, &[&validation, &test]);
            let test = s.others.pop().expect("two others");
            let validation = s.others.pop().expect("one other");
            (s.train, validation, test)
        } else {
            (fit, validation, test)
        };
        Ok(Self {
            classifier: classifier.with_seed(model_seed(master_seed)),
            fit,
            validation,
            test,
        })
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn partition_sizes(&self) -> (usize, usize, usize) {
        (self.fit.len(), self.validation.len(), self.test.len())
    }

    fn score_on(
        &self,
        mask: &FeatureMask,
        target: &Dataset,
    ) -> std::result::Result<f64, ModelError> {
        let model = self
            .classifier
            .fit(&dataset::apply_mask(&self.fit, mask)?)?;
        model.accuracy(&dataset::apply_mask(target, mask)?)
    }

    pub fn validation_accuracy(&self, mask: &FeatureMask) -> std::result::Result<f64, ModelError> {
        self.score_on(mask, &self.validation)
    }

    pub fn test_accuracy(&self, mask: &FeatureMask) -> std::result::Result<f64, ModelError> {
        self.score_on(mask, &self.test)
    }
}

impl FitnessEvaluator for WrapperEvaluator {
    fn fitness(&self, mask: &FeatureMask) -> FitnessOutcome {
        match self.validation_accuracy(mask) {
            Ok(v) => FitnessOutcome::ok(v),
            Err(_) => FitnessOutcome {
                value: 0.0,
                flagged: true,
            },
        }
    }

    fn holdout(&self, mask: &FeatureMask) -> Option<f64> {
        self.test_accuracy(mask).ok()
    }
}
