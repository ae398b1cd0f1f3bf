//! Feature–label Pearson correlation, ranking and low-correlation ablation.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, FeatureMask};

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("vectors differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: input is constant")]
    Constant,
}

/// Pearson correlation with population (1/n) moments.
///
/// Co-moments are accumulated in one streaming pass (Welford update), and the
/// result is clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::Length(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort(x.len()));
    }
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (k + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(CorrelationError::Constant);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCorrelation {
    pub name: String,
    pub r: f64,
    /// The feature column was constant; `r` is reported as 0.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub features: Vec<FeatureCorrelation>,
    /// Feature indices ordered by `|r|` ascending, ties by column order.
    pub ranking: Vec<usize>,
}

impl CorrelationReport {
    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking
            .iter()
            .map(|&i| self.features[i].name.as_str())
            .collect()
    }

    /// 1-based position of each feature in the ascending ranking.
    pub fn abs_ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.features.len()];
        for (pos, &i) in self.ranking.iter().enumerate() {
            ranks[i] = pos + 1;
        }
        ranks
    }

    /// `feature,r,abs_rank` rows in ranking order.
    pub fn to_csv(&self) -> String {
        let ranks = self.abs_ranks();
        let mut out = String::from("feature,r,abs_rank\n");
        for &i in &self.ranking {
            let f = &self.features[i];
            let _ = writeln!(out, "{},{:.4},{}", f.name, f.r, ranks[i]);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let names = self.ranked_names();
        let mut out = format!("| {} |\n", names.join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(names.len())));
        let vals: Vec<String> = self
            .ranking
            .iter()
            .map(|&i| format!("{:.4}", self.features[i].r))
            .collect();
        out.push_str(&format!("| {} |\n", vals.join(" | ")));
        out
    }
}

/// Ranks features by `|corr(feature, label)|` with labels encoded 0/1.
pub fn rank_features(ds: &Dataset) -> Result<CorrelationReport, CorrelationError> {
    let y: Vec<f64> = ds.labels().iter().map(|l| l.index() as f64).collect();
    let mut features = Vec::with_capacity(ds.n_features());
    for (j, name) in ds.feature_names().iter().enumerate() {
        let (r, constant) = match pearson(&ds.column(j), &y) {
            Ok(r) => (r, false),
            Err(CorrelationError::Constant) => (0.0, true),
            Err(e) => return Err(e),
        };
        features.push(FeatureCorrelation {
            name: name.clone(),
            r,
            constant,
        });
    }
    let ranking = rank_ascending(&features.iter().map(|f| f.r.abs()).collect::<Vec<_>>());
    Ok(CorrelationReport { features, ranking })
}

/// Indices sorted by score ascending; equal scores keep column order.
pub fn rank_ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

/// Mask `j` (for `j = 1..=up_to_k`) drops the `j` least-correlated features.
pub fn ablation_masks(
    report: &CorrelationReport,
    up_to_k: usize,
) -> Result<Vec<FeatureMask>, DatasetError> {
    dataset::removal_masks(&report.ranking, up_to_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassLabel, Record, DEFAULT_FEATURE_NAMES};
    use proptest::prelude::*;

    fn two_pass(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / n;
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
        cov / (sx * sy)
    }

    /// The published feature/label correlations, in column order.
    fn published_report() -> CorrelationReport {
        let r = [
            0.0054, 0.0055, -0.0093, 0.0039, 0.023, -0.0040, 0.015, 0.010, -0.0015, 0.0025,
        ];
        let features: Vec<FeatureCorrelation> = DEFAULT_FEATURE_NAMES
            .iter()
            .zip(r)
            .map(|(n, r)| FeatureCorrelation {
                name: n.to_string(),
                r,
                constant: false,
            })
            .collect();
        let ranking = rank_ascending(&r.map(f64::abs));
        CorrelationReport { features, ranking }
    }

    #[test]
    fn hand_computed_example() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn self_and_negated() {
        let x = [0.3, -1.2, 4.5, 2.2, 0.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(CorrelationError::Constant)
        );
        assert_eq!(pearson(&[1.0], &[1.0]), Err(CorrelationError::TooShort(1)));
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(CorrelationError::Length(2, 1))
        );
    }

    #[test]
    fn published_ordering() {
        let rep = published_report();
        assert_eq!(
            rep.ranked_names(),
            vec![
                "thermal_4",
                "thermal_5",
                "rgb_4",
                "thermal_1",
                "rgb_1",
                "rgb_2",
                "rgb_3",
                "thermal_3",
                "thermal_2",
                "rgb_5"
            ]
        );
        let masks = ablation_masks(&rep, 4).unwrap();
        assert_eq!(masks[0].to_string(), "1111111101");
        assert_eq!(masks[1].to_string(), "1111111100");
        assert_eq!(masks[3].to_string(), "1110101100");
    }

    #[test]
    fn ablation_bounds() {
        let rep = published_report();
        let masks = ablation_masks(&rep, 9).unwrap();
        assert_eq!(masks.len(), 9);
        assert_eq!(masks[8].count_ones(), 1);
        assert!(masks[8].get(4)); // rgb_5 survives
        assert!(ablation_masks(&rep, 10).is_err());
        assert!(ablation_masks(&rep, 0).is_err());
    }

    #[test]
    fn thresholded_feature_ranks_last() {
        // label = [feature 0 > 0]; other columns unrelated deterministic noise
        let records: Vec<Record> = (0..200)
            .map(|i| {
                let x0 = ((i * 37) % 200) as f64 / 100.0 - 1.0;
                let features = (0..4)
                    .map(|j| {
                        if j == 0 {
                            x0
                        } else {
                            (((i * (j + 11) * 7919) % 97) as f64).sin()
                        }
                    })
                    .collect();
                let label = if x0 > 0.0 {
                    ClassLabel::Stressful
                } else {
                    ClassLabel::Calm
                };
                Record::new(features, label)
            })
            .collect();
        let ds = Dataset::with_default_names(records).unwrap();
        let rep = rank_features(&ds).unwrap();
        assert_eq!(*rep.ranking.last().unwrap(), 0);
        assert!(rep.to_csv().starts_with("feature,r,abs_rank\n"));
        let last = rep.to_csv().lines().last().unwrap().to_string();
        assert!(
            last.starts_with("f_1,0.8") && last.ends_with(",4"),
            "{last}"
        );
    }

    #[test]
    fn constant_column_flagged() {
        let records = vec![
            Record::new(vec![1.0, 0.0], ClassLabel::Calm),
            Record::new(vec![1.0, 1.0], ClassLabel::Stressful),
            Record::new(vec![1.0, 0.2], ClassLabel::Calm),
        ];
        let rep = rank_features(&Dataset::with_default_names(records).unwrap()).unwrap();
        assert!(rep.features[0].constant);
        assert_eq!(rep.features[0].r, 0.0);
        assert_eq!(rep.ranking[0], 0);
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_two_pass(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..60)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a.abs() <= 1.0);
                prop_assert!((a - two_pass(&x, &y)).abs() < 1e-10);
            }
        }

        #[test]
        fn affine_invariance(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -20.0f64..20.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            if let (Ok(r0), Ok(r1)) = (pearson(&x, &y), pearson(&ax, &y)) {
                prop_assert!((r1 - a.signum() * r0).abs() < 1e-9);
            }
        }
    }
}
