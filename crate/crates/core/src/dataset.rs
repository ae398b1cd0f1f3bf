//! Tabular two-class datasets: CSV ingestion, synthetic generation,
//! stratified splitting, k-fold partitioning, feature masking and z-scoring.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, seeded};

/// Column names of the ten-feature RGB/thermal layout, in DNA order.
pub const DEFAULT_FEATURE_NAMES: [&str; 10] = [
    "rgb_1",
    "rgb_2",
    "rgb_3",
    "rgb_4",
    "rgb_5",
    "thermal_1",
    "thermal_2",
    "thermal_3",
    "thermal_4",
    "thermal_5",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header must name at least one feature followed by `label`")]
    BadHeader,
    #[error("row {row}: expected {expected} cells, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: unknown label `{value}` (expected calm/stressful or 0/1)")]
    BadLabel { row: usize, value: String },
    #[error("dataset has no records")]
    Empty,
    #[error("record {index} has {found} features, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("record {index} has a non-finite feature")]
    NonFinite { index: usize },
    #[error("{names} feature names for {dim} features")]
    NameCount { names: usize, dim: usize },
    #[error("mask has {mask} bits but dataset has {dim} features")]
    MaskLength { mask: usize, dim: usize },
    #[error("mask selects no features")]
    EmptyMask,
    #[error("invalid mask string `{0}`")]
    MaskParse(String),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    TrainFraction(f64),
    #[error("class {0} has fewer than 2 records; cannot stratify")]
    SparseClass(ClassLabel),
    #[error("split leaves an empty partition")]
    EmptyPartition,
    #[error("k = {k} folds is invalid for {n} records")]
    Folds { k: usize, n: usize },
    #[error("cannot remove {k} of {n} features (need 1 <= k < n)")]
    Ablation { k: usize, n: usize },
    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Calm = 0,
    Stressful = 1,
}

impl ClassLabel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            ClassLabel::Calm
        } else {
            ClassLabel::Stressful
        }
    }

    /// `-1` for calm, `+1` for stressful.
    pub fn sign(self) -> f64 {
        match self {
            ClassLabel::Calm => -1.0,
            ClassLabel::Stressful => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Calm => "calm",
            ClassLabel::Stressful => "stressful",
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "calm" | "0" => Some(ClassLabel::Calm),
            "stressful" | "1" => Some(ClassLabel::Stressful),
            _ => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: ClassLabel,
}

impl Record {
    pub fn new(features: Vec<f64>, label: ClassLabel) -> Self {
        Self { features, label }
    }
}

/// An immutable, non-empty set of records sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    feature_names: Vec<String>,
}

/// Default names for a feature dimension: the RGB/thermal layout for ten
/// features, `f_1..f_d` otherwise.
pub fn default_feature_names(dim: usize) -> Vec<String> {
    if dim == DEFAULT_FEATURE_NAMES.len() {
        DEFAULT_FEATURE_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        (1..=dim).map(|i| format!("f_{i}")).collect()
    }
}

impl Dataset {
    pub fn new(records: Vec<Record>, feature_names: Vec<String>) -> Result<Self> {
        let first = records.first().ok_or(DatasetError::Empty)?;
        let dim = first.features.len();
        if feature_names.len() != dim {
            return Err(DatasetError::NameCount {
                names: feature_names.len(),
                dim,
            });
        }
        for (index, r) in records.iter().enumerate() {
            if r.features.len() != dim {
                return Err(DatasetError::Dimension {
                    index,
                    expected: dim,
                    found: r.features.len(),
                });
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { index });
            }
        }
        Ok(Self {
            records,
            feature_names,
        })
    }

    pub fn with_default_names(records: Vec<Record>) -> Result<Self> {
        let dim = records.first().ok_or(DatasetError::Empty)?.features.len();
        Self::new(records, default_feature_names(dim))
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.features[j]).collect()
    }

    /// Record counts for `[calm, stressful]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0usize; 2];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Self::new(records, self.feature_names.clone())
    }

    /// Row-major feature matrix.
    pub fn feature_matrix(&self) -> Vec<f64> {
        self.records
            .iter()
            .flat_map(|r| r.features.iter().copied())
            .collect()
    }
}

/// Bit vector selecting input features; bit order follows the dataset's
/// column order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureMask {
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn full(n: usize) -> Self {
        Self {
            bits: vec![true; n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.bits[i] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_zero(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// The mask read as an unsigned binary number, first bit most significant.
    pub fn as_u64(&self) -> u64 {
        self.bits
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FeatureMask {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(DatasetError::MaskParse(s.to_string()));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(DatasetError::MaskParse(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()
            .map(FeatureMask::new)
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

/// Parses a dataset from CSV text. Row numbers in errors count data rows
/// from 1, excluding the header.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let width = header.len();
    if width < 2 || !header[width - 1].eq_ignore_ascii_case("label") {
        return Err(DatasetError::BadHeader);
    }
    let names: Vec<String> = header.iter().take(width - 1).map(str::to_string).collect();

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        if row.len() != width {
            return Err(DatasetError::ColumnCount {
                row: row_no,
                expected: width,
                found: row.len(),
            });
        }
        let mut features = Vec::with_capacity(width - 1);
        for (j, cell) in row.iter().take(width - 1).enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(DatasetError::BadNumber {
                        row: row_no,
                        column: names[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        let token = &row[width - 1];
        let label = ClassLabel::parse(token).ok_or_else(|| DatasetError::BadLabel {
            row: row_no,
            value: token.to_string(),
        })?;
        records.push(Record::new(features, label));
    }
    Dataset::new(records, names)
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push("label");
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.label.as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(ds, file)
}

/// Parameters of the class-conditional Gaussian generator.
///
/// Informative features are `N(±class_separation/2, 1)` (sign by true class);
/// noise features are `N(0, 1)` for both classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_records: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub class_separation: f64,
    pub label_noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_records: 620,
            n_informative: 4,
            n_noise: 6,
            class_separation: 1.0,
            label_noise_rate: 0.05,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.n_informative + self.n_noise
    }

    /// Columns carrying class signal, spread evenly over the feature range.
    /// For 4 of 10 this is `[1, 3, 6, 8]`.
    pub fn informative_indices(&self) -> Vec<usize> {
        let d = self.n_features();
        let k = self.n_informative;
        (0..k).map(|i| (2 * i + 1) * d / (2 * k)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_records < 2 {
            return Err(DatasetError::Synthetic("need at least 2 records".into()));
        }
        if self.n_features() == 0 {
            return Err(DatasetError::Synthetic("need at least 1 feature".into()));
        }
        if self.n_informative == 0 && self.class_separation != 0.0 {
            return Err(DatasetError::Synthetic(
                "class separation requires at least one informative feature".into(),
            ));
        }
        if !self.class_separation.is_finite() {
            return Err(DatasetError::Synthetic("separation must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise_rate) {
            return Err(DatasetError::Synthetic(
                "label noise rate must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_records;
    let d = spec.n_features();
    let mut rng = seeded(spec.seed);

    let n_calm = n.div_ceil(2);
    let mut truth: Vec<ClassLabel> = (0..n)
        .map(|i| {
            if i < n_calm {
                ClassLabel::Calm
            } else {
                ClassLabel::Stressful
            }
        })
        .collect();
    truth.shuffle(&mut rng);

    let mut informative = vec![false; d];
    for i in spec.informative_indices() {
        informative[i] = true;
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let half = spec.class_separation / 2.0;
    let mut records: Vec<Record> = truth
        .iter()
        .map(|&label| {
            let features = (0..d)
                .map(|j| {
                    let z = std_normal.sample(&mut rng);
                    if informative[j] {
                        z + half * label.sign()
                    } else {
                        z
                    }
                })
                .collect();
            Record::new(features, label)
        })
        .collect();

    // Flip the same number of labels in each class so balance is kept.
    let per_class: [Vec<usize>; 2] = [ClassLabel::Calm, ClassLabel::Stressful]
        .map(|c| (0..n).filter(|&i| truth[i] == c).collect());
    let n_flip = (spec.label_noise_rate * (n / 2) as f64).round() as usize;
    for members in &per_class {
        for k in index::sample(&mut rng, members.len(), n_flip.min(members.len())) {
            let r = &mut records[members[k]];
            r.label = ClassLabel::from_index(1 - r.label.index());
        }
    }
    Dataset::with_default_names(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            stratified: true,
            seed: 7,
        }
    }
}

/// Index form of [`split`]: `(train, test)` indices, each sorted ascending.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(DatasetError::TrainFraction(f));
    }
    let n = ds.len();
    let mut rng = seeded(spec.seed);
    let (mut train, mut test) = if spec.stratified {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
        for (i, r) in ds.records.iter().enumerate() {
            groups[r.label.index()].push(i);
        }
        for (c, g) in groups.iter().enumerate() {
            if g.len() < 2 {
                return Err(DatasetError::SparseClass(ClassLabel::from_index(c)));
            }
        }
        let quotas = stratified_quotas(&groups, f, n);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (g, q) in groups.iter_mut().zip(quotas) {
            g.shuffle(&mut rng);
            train.extend_from_slice(&g[..q]);
            test.extend_from_slice(&g[q..]);
        }
        (train, test)
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let q = (f * n as f64).round() as usize;
        let test = all.split_off(q.min(n));
        (all, test)
    };
    if train.is_empty() || test.is_empty() {
        return Err(DatasetError::EmptyPartition);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Largest-remainder allocation of `round(f * n)` training slots across
/// classes, keeping at least one record of each class on each side.
fn stratified_quotas(groups: &[Vec<usize>], f: f64, n: usize) -> Vec<usize> {
    let target = (f * n as f64).round() as usize;
    let exact: Vec<f64> = groups.iter().map(|g| f * g.len() as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = quotas.iter().sum();
    for &c in order.iter().cycle().take(groups.len() * 2) {
        if assigned >= target {
            break;
        }
        if quotas[c] < groups[c].len() {
            quotas[c] += 1;
            assigned += 1;
        }
    }
    for (q, g) in quotas.iter_mut().zip(groups) {
        *q = (*q).clamp(1, g.len() - 1);
    }
    quotas
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// Stratified k-fold partition as `(train, validation)` index pairs.
///
/// Records are shuffled within each class, classes are laid end to end and
/// dealt round-robin, so fold sizes differ by at most one overall and per
/// class.
pub fn kfold(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = ds.len();
    if k < 2 || k > n {
        return Err(DatasetError::Folds { k, n });
    }
    let mut rng = seeded(derive_seed(seed, 0x006b_666f_6c64));
    let mut order = Vec::with_capacity(n);
    for c in [ClassLabel::Calm, ClassLabel::Stressful] {
        let mut g: Vec<usize> = (0..n).filter(|&i| ds.records[i].label == c).collect();
        g.shuffle(&mut rng);
        order.extend(g);
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok((0..k)
        .map(|f| {
            let mut val = folds[f].clone();
            val.sort_unstable();
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            (train, val)
        })
        .collect())
}

pub fn apply_mask(ds: &Dataset, mask: &FeatureMask) -> Result<Dataset> {
    if mask.len() != ds.n_features() {
        return Err(DatasetError::MaskLength {
            mask: mask.len(),
            dim: ds.n_features(),
        });
    }
    if mask.is_all_zero() {
        return Err(DatasetError::EmptyMask);
    }
    let keep = mask.selected();
    let records = ds
        .records
        .iter()
        .map(|r| Record::new(keep.iter().map(|&j| r.features[j]).collect(), r.label))
        .collect();
    let names = keep.iter().map(|&j| ds.feature_names[j].clone()).collect();
    Dataset::new(records, names)
}

/// Masks `1..=up_to_k`, where mask `j` clears the first `j` entries of
/// `ascending` (feature indices ordered from least to most important).
pub fn removal_masks(ascending: &[usize], up_to_k: usize) -> Result<Vec<FeatureMask>> {
    let n = ascending.len();
    if up_to_k == 0 || up_to_k >= n {
        return Err(DatasetError::Ablation { k: up_to_k, n });
    }
    Ok((1..=up_to_k)
        .map(|j| {
            let mut m = FeatureMask::full(n);
            for &i in &ascending[..j] {
                m.set(i, false);
            }
            m
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    /// Column was constant on the fitting set; `std` was replaced by 1.
    pub constant: bool,
}

#[derive(Debug, Clone)]
pub struct Standardized {
    pub train: Dataset,
    pub others: Vec<Dataset>,
    pub stats: Vec<ColumnStats>,
}

impl Standardized {
    pub fn any_constant(&self) -> bool {
        self.stats.iter().any(|s| s.constant)
    }
}

/// Population mean/stddev per column of `train`.
pub fn fit_stats(train: &Dataset) -> Vec<ColumnStats> {
    let n = train.len() as f64;
    (0..train.n_features())
        .map(|j| {
            let col = train.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            let scale = mean.abs().max(1.0);
            if std <= 1e-12 * scale {
                ColumnStats {
                    mean,
                    std: 1.0,
                    constant: true,
                }
            } else {
                ColumnStats {
                    mean,
                    std,
                    constant: false,
                }
            }
        })
        .collect()
}

/// Applies `stats` to every column. Constant columns pass through unchanged.
pub fn transform(ds: &Dataset, stats: &[ColumnStats]) -> Dataset {
    let records = ds
        .records
        .iter()
        .map(|r| {
            let features = r
                .features
                .iter()
                .zip(stats)
                .map(|(&v, s)| if s.constant { v } else { (v - s.mean) / s.std })
                .collect();
            Record::new(features, r.label)
        })
        .collect();
    Dataset {
        records,
        feature_names: ds.feature_names.clone(),
    }
}

/// Z-scores `train` with its own statistics and every set in `others` with
/// the same (train) statistics.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Standardized {
    let stats = fit_stats(train);
    Standardized {
        train: transform(train, &stats),
        others: others.iter().map(|d| transform(d, &stats)).collect(),
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(rows: &[(&[f64], ClassLabel)]) -> Dataset {
        Dataset::with_default_names(
            rows.iter()
                .map(|(f, l)| Record::new(f.to_vec(), *l))
                .collect(),
        )
        .unwrap()
    }

    fn balanced(n: usize, seed: u64) -> Dataset {
        synthesize(&SyntheticSpec {
            n_records: n,
            n_informative: 4,
            n_noise: 6,
            class_separation: 2.0,
            label_noise_rate: 0.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn parses_three_rows() {
        let text = "a,b,label\n1,2,calm\n3,4,stressful\n5,6.5,calm\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(
            ds.labels(),
            vec![ClassLabel::Calm, ClassLabel::Stressful, ClassLabel::Calm]
        );
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.records()[2].features, vec![5.0, 6.5]);
    }

    #[test]
    fn numeric_labels_accepted() {
        let ds = read_csv("x,label\n1,0\n2,1\n".as_bytes()).unwrap();
        assert_eq!(ds.labels(), vec![ClassLabel::Calm, ClassLabel::Stressful]);
    }

    #[test]
    fn short_row_names_its_row() {
        let mut text = String::from(
            "rgb_1,rgb_2,rgb_3,rgb_4,rgb_5,thermal_1,thermal_2,thermal_3,thermal_4,thermal_5,label\n",
        );
        text.push_str("1,2,3,4,5,6,7,8,9,10,calm\n");
        text.push_str("1,2,3,4,5,6,7,8,9,stressful\n");
        match read_csv(text.as_bytes()) {
            Err(DatasetError::ColumnCount { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_cells_are_reported() {
        assert!(matches!(
            read_csv("x,label\n1,calm\nfoo,calm\n".as_bytes()),
            Err(DatasetError::BadNumber { row: 2, .. })
        ));
        assert!(matches!(
            read_csv("x,label\n1,angry\n".as_bytes()),
            Err(DatasetError::BadLabel { row: 1, .. })
        ));
        assert!(matches!(
            read_csv("x,y\n1,2\n".as_bytes()),
            Err(DatasetError::BadHeader)
        ));
        assert!(matches!(
            load_csv("/nonexistent/featsel.csv"),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let ds = balanced(40, 3);
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let spec = SyntheticSpec {
            n_records: 620,
            n_informative: 4,
            n_noise: 6,
            class_separation: 2.0,
            label_noise_rate: 0.0,
            seed: 1,
        };
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 620);
        assert_eq!(a.class_counts(), [310, 310]);
        let noisy = synthesize(&SyntheticSpec {
            label_noise_rate: 0.05,
            ..spec
        })
        .unwrap();
        assert_eq!(noisy.class_counts(), [310, 310]);
    }

    #[test]
    fn synthetic_rejects_signal_without_informative_features() {
        let spec = SyntheticSpec {
            n_informative: 0,
            n_noise: 10,
            class_separation: 1.0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(synthesize(&spec), Err(DatasetError::Synthetic(_))));
    }

    #[test]
    fn informative_positions_spread() {
        assert_eq!(
            SyntheticSpec::default().informative_indices(),
            vec![1, 3, 6, 8]
        );
    }

    #[test]
    fn stratified_split_sizes() {
        let ds = balanced(620, 5);
        let (tr, te) = split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(tr.len(), 434);
        assert_eq!(te.len(), 186);
        assert_eq!(tr.class_counts(), [217, 217]);
        assert_eq!(te.class_counts(), [93, 93]);
    }

    #[test]
    fn split_rejects_boundary_fractions() {
        let ds = balanced(20, 1);
        for f in [0.0, 1.0, -0.2, 1.5] {
            let spec = SplitSpec {
                train_fraction: f,
                ..SplitSpec::default()
            };
            assert!(matches!(
                split(&ds, &spec),
                Err(DatasetError::TrainFraction(_))
            ));
        }
    }

    #[test]
    fn split_needs_two_per_class() {
        let ds = toy(&[
            (&[1.0], ClassLabel::Calm),
            (&[2.0], ClassLabel::Calm),
            (&[3.0], ClassLabel::Stressful),
        ]);
        assert!(matches!(
            split(&ds, &SplitSpec::default()),
            Err(DatasetError::SparseClass(ClassLabel::Stressful))
        ));
    }

    #[test]
    fn different_seeds_different_partitions() {
        let ds = balanced(620, 5);
        let a = split_indices(
            &ds,
            &SplitSpec {
                seed: 1,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        let b = split_indices(
            &ds,
            &SplitSpec {
                seed: 2,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        assert_eq!(a.0.len(), b.0.len());
        assert_ne!(a.0, b.0);
    }

    #[test]
    fn unstratified_split_covers_everything() {
        let ds = balanced(50, 2);
        let spec = SplitSpec {
            stratified: false,
            ..SplitSpec::default()
        };
        let (tr, te) = split_indices(&ds, &spec).unwrap();
        assert_eq!(tr.len(), 35);
        let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn five_folds_of_620() {
        let ds = balanced(620, 9);
        let folds = kfold(&ds, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all = Vec::new();
        for (train, val) in &folds {
            assert_eq!(val.len(), 124);
            assert_eq!(train.len(), 496);
            let calm = val
                .iter()
                .filter(|&&i| ds.records()[i].label == ClassLabel::Calm)
                .count();
            assert!((61..=63).contains(&calm));
            all.extend(val.iter().copied());
        }
        all.sort_unstable();
        assert_eq!(all, (0..620).collect::<Vec<_>>());
    }

    #[test]
    fn seven_records_five_folds() {
        let ds = balanced(7, 1);
        let folds = kfold(&ds, 5, 0).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|(_, v)| v.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
        assert!(matches!(kfold(&ds, 8, 0), Err(DatasetError::Folds { .. })));
        assert!(matches!(kfold(&ds, 1, 0), Err(DatasetError::Folds { .. })));
    }

    #[test]
    fn masks() {
        let ds = balanced(10, 1);
        assert_eq!(apply_mask(&ds, &FeatureMask::full(10)).unwrap(), ds);
        let m: FeatureMask = "0101001101".parse().unwrap();
        let sub = apply_mask(&ds, &m).unwrap();
        assert_eq!(
            sub.feature_names(),
            &["rgb_2", "rgb_4", "thermal_2", "thermal_3", "thermal_5"]
        );
        assert_eq!(sub.records()[0].features[1], ds.records()[0].features[3]);
        assert_eq!(sub.labels(), ds.labels());
        assert!(matches!(
            apply_mask(&ds, &FeatureMask::empty(10)),
            Err(DatasetError::EmptyMask)
        ));
        assert!(matches!(
            apply_mask(&ds, &FeatureMask::full(9)),
            Err(DatasetError::MaskLength { .. })
        ));
    }

    #[test]
    fn mask_text_and_value() {
        let m: FeatureMask = "0000000101".parse().unwrap();
        assert_eq!(m.as_u64(), 5);
        assert_eq!(m.to_string(), "0000000101");
        assert_eq!(m.count_ones(), 2);
        assert!("01a".parse::<FeatureMask>().is_err());
    }

    #[test]
    fn standardize_closed_form() {
        let train = toy(&[
            (&[1.0, 4.0], ClassLabel::Calm),
            (&[2.0, 4.0], ClassLabel::Stressful),
            (&[3.0, 4.0], ClassLabel::Calm),
        ]);
        let test = toy(&[(&[10.0, 5.0], ClassLabel::Calm)]);
        let out = standardize(&train, &[&test]);
        let col = out.train.column(0);
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in col.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // constant column passes through and is flagged
        assert_eq!(out.train.column(1), vec![4.0, 4.0, 4.0]);
        assert!(out.stats[1].constant);
        assert!(out.any_constant());
        // test uses train statistics: (10 - 2) / sqrt(2/3)
        let t = out.others[0].records()[0].features[0];
        assert!((t - 8.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(out.others[0].records()[0].features[1], 5.0);
    }

    #[test]
    fn standardized_train_moments() {
        let ds = balanced(200, 4);
        let out = standardize(&ds, &[]);
        for j in 0..ds.n_features() {
            let c = out.train.column(j);
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / c.len() as f64;
            assert!(m.abs() < 1e-9);
            assert!((v.sqrt() - 1.0).abs() < 1e-9);
        }
    }
}
