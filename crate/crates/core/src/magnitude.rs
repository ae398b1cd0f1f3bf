//! Weight-magnitude input importance of a trained network.
//!
//! Each layer's weights are turned into a column-stochastic contribution
//! matrix `P[i][j] = |W[i][j]| / Σ_p |W[p][j]|` (the share of target unit `j`
//! attributable to source unit `i`). Chaining the layers gives
//! `Q = P¹ · P² · … · Pᴸ`, the share of each output owed to each input; with a
//! single hidden layer this is exactly `Q[i][k] = Σ_r P[i][r] · P[r][k]`.
//! An input's score is its row sum of `Q`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::correlation::rank_ascending;
use crate::dataset::{self, Dataset, DatasetError, FeatureMask};
use crate::mlp::{self, Layer, MlpArchitecture, MlpError, MlpParams, TrainConfig};
use crate::par::Exec;
use crate::rng::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum MagnitudeError {
    #[error("n_runs must be at least 1")]
    NoRuns,
    #[error("every training run diverged")]
    AllRunsFailed,
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for r in 0..self.cols {
                let a = self.get(i, r);
                let row = &other.data[r * other.cols..(r + 1) * other.cols];
                for (o, &b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, acc) in s.iter_mut().enumerate() {
                *acc += self.get(i, j);
            }
        }
        s
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionMatrix {
    pub shares: Matrix,
    /// Target units whose incoming weights were all zero; their column is
    /// uniform `1 / fan_in`.
    pub degenerate_columns: Vec<usize>,
}

pub fn contribution(layer: &Layer) -> ContributionMatrix {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let mut data = vec![0.0; fi * fo];
    let mut degenerate_columns = Vec::new();
    for j in 0..fo {
        let total: f64 = (0..fi).map(|i| layer.weight(i, j).abs()).sum();
        if total > 0.0 {
            for i in 0..fi {
                data[i * fo + j] = layer.weight(i, j).abs() / total;
            }
        } else {
            degenerate_columns.push(j);
            for i in 0..fi {
                data[i * fo + j] = 1.0 / fi as f64;
            }
        }
    }
    ContributionMatrix {
        shares: Matrix {
            rows: fi,
            cols: fo,
            data,
        },
        degenerate_columns,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputMagnitudes {
    /// `n_inputs × n_outputs`, column-stochastic.
    pub q: Matrix,
    pub scores: Vec<f64>,
    /// Some layer had an all-zero weight column.
    pub degenerate: bool,
}

pub fn input_magnitudes(p: &MlpParams) -> InputMagnitudes {
    let mut degenerate = false;
    let mut q: Option<Matrix> = None;
    for layer in &p.layers {
        let c = contribution(layer);
        degenerate |= !c.degenerate_columns.is_empty();
        q = Some(match q {
            None => c.shares,
            Some(acc) => acc.matmul(&c.shares),
        });
    }
    let q = q.expect("network has at least one layer");
    let scores = q.row_sums();
    InputMagnitudes {
        q,
        scores,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunScores {
    pub run: usize,
    pub seed: u64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeReport {
    pub feature_names: Vec<String>,
    pub runs: Vec<RunScores>,
    /// `(run, seed, epoch)` of trainings that diverged and were skipped.
    pub skipped: Vec<(usize, u64, usize)>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Input indices ordered by mean score ascending, ties by column order.
    pub ranking: Vec<usize>,
}

impl MagnitudeReport {
    fn from_runs(
        feature_names: Vec<String>,
        runs: Vec<RunScores>,
        skipped: Vec<(usize, u64, usize)>,
    ) -> Self {
        let d = feature_names.len();
        let k = runs.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|i| runs.iter().map(|r| r.scores[i]).sum::<f64>() / k)
            .collect();
        let std = (0..d)
            .map(|i| {
                let m = mean[i];
                (runs.iter().map(|r| (r.scores[i] - m).powi(2)).sum::<f64>() / k).sqrt()
            })
            .collect();
        let ranking = rank_ascending(&mean);
        Self {
            feature_names,
            runs,
            skipped,
            mean,
            std,
            ranking,
        }
    }

    pub fn effective_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking
            .iter()
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    /// 1-based ascending rank of each input.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.ranking.len()];
        for (pos, &i) in self.ranking.iter().enumerate() {
            r[i] = pos + 1;
        }
        r
    }

    /// `feature,mean_score,std_score,rank` in ranking order.
    pub fn to_csv(&self) -> String {
        let ranks = self.ranks();
        let mut out = String::from("feature,mean_score,std_score,rank\n");
        for &i in &self.ranking {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{}",
                self.feature_names[i], self.mean[i], self.std[i], ranks[i]
            );
        }
        out
    }

    /// One row per effective run: `run,seed,<feature scores...>`.
    pub fn runs_csv(&self) -> String {
        let mut out = format!("run,seed,{}\n", self.feature_names.join(","));
        for r in &self.runs {
            let vals: Vec<String> = r.scores.iter().map(|v| format!("{v:.4}")).collect();
            let _ = writeln!(out, "{},{},{}", r.run, r.seed, vals.join(","));
        }
        out
    }
}

/// Trains `n_runs` networks on `ds` with seeds `derive_seed(seed_stream, run)`
/// and averages their input scores. Diverged runs are skipped and listed.
/// Runs may execute in parallel; aggregation follows run order.
pub fn averaged_ranking(
    ds: &Dataset,
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
    n_runs: usize,
    seed_stream: u64,
    exec: Exec,
) -> Result<MagnitudeReport, MagnitudeError> {
    if n_runs == 0 {
        return Err(MagnitudeError::NoRuns);
    }
    let outcomes = exec.map_range(n_runs, |run| {
        let seed = derive_seed(seed_stream, run as u64);
        let cfg = TrainConfig { seed, ..*cfg };
        (
            run,
            seed,
            mlp::train(ds, None, arch, &cfg).map(|(p, _)| input_magnitudes(&p).scores),
        )
    });
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for (run, seed, outcome) in outcomes {
        match outcome {
            Ok(scores) => runs.push(RunScores { run, seed, scores }),
            Err(MlpError::Divergence { epoch }) => skipped.push((run, seed, epoch)),
            Err(e) => return Err(e.into()),
        }
    }
    if runs.is_empty() {
        return Err(MagnitudeError::AllRunsFailed);
    }
    Ok(MagnitudeReport::from_runs(
        ds.feature_names().to_vec(),
        runs,
        skipped,
    ))
}

/// Builds a report from a single trained network.
pub fn single_run_report(p: &MlpParams, feature_names: Vec<String>, seed: u64) -> MagnitudeReport {
    MagnitudeReport::from_runs(
        feature_names,
        vec![RunScores {
            run: 0,
            seed,
            scores: input_magnitudes(p).scores,
        }],
        Vec::new(),
    )
}

/// Mask `j` (for `j = 1..=up_to_k`) drops the `j` lowest-scored inputs.
pub fn ablation_masks(
    report: &MagnitudeReport,
    up_to_k: usize,
) -> Result<Vec<FeatureMask>, DatasetError> {
    dataset::removal_masks(&report.ranking, up_to_k)
}
