//! Shared fixtures and independent oracles for the integration tests.

#![allow(dead_code)]

use featsel::dataset::{ClassLabel, Dataset, Record};
use featsel::svm;
use nalgebra::{DMatrix, DVector};

/// Three fixed six-point sets in the plane: separable, overlapping, and one
/// with a mislabelled point inside the other class.
pub fn svm_fixtures() -> Vec<Dataset> {
    use ClassLabel::{Calm as C, Stressful as S};
    let sets: [[([f64; 2], ClassLabel); 6]; 3] = [
        [
            ([0.0, 0.0], C),
            ([0.5, 1.0], C),
            ([1.0, 0.2], C),
            ([3.0, 3.0], S),
            ([2.5, 4.0], S),
            ([4.0, 2.8], S),
        ],
        [
            ([0.0, 0.0], C),
            ([1.0, 1.0], C),
            ([1.8, 0.4], C),
            ([1.2, 1.4], S),
            ([2.0, 2.0], S),
            ([0.6, 2.2], S),
        ],
        [
            ([-1.0, 0.0], C),
            ([-0.5, 0.5], C),
            ([0.8, 0.9], C),
            ([1.0, 1.0], S),
            ([0.5, -0.5], S),
            ([-0.9, 0.1], S),
        ],
    ];
    sets.iter()
        .map(|rows| {
            Dataset::with_default_names(
                rows.iter()
                    .map(|(x, l)| Record::new(x.to_vec(), *l))
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

pub fn gram(ds: &Dataset, gamma: f64) -> DMatrix<f64> {
    let n = ds.len();
    let r = ds.records();
    DMatrix::from_fn(n, n, |i, j| svm::rbf(&r[i].features, &r[j].features, gamma))
}

pub fn signs(ds: &Dataset) -> DVector<f64> {
    DVector::from_iterator(ds.len(), ds.records().iter().map(|r| r.label.sign()))
}

/// Exact dual optimum by enumerating every active set. Each coordinate is
/// pinned at 0, pinned at C, or free; the free block solves the
/// equality-constrained stationarity system exactly. The best feasible
/// candidate is the global maximum of the concave dual.
pub struct QpSolution {
    pub alphas: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

pub fn brute_force_dual(ds: &Dataset, gamma: f64, c: f64) -> QpSolution {
    let n = ds.len();
    let k = gram(ds, gamma);
    let y = signs(ds);
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let objective = |a: &DVector<f64>| a.sum() - 0.5 * (a.transpose() * &q * a)[(0, 0)];

    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        if !free.is_empty() {
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..n)
                    .filter(|&j| state[j] != 2)
                    .map(|j| q[(i, j)] * alpha[j])
                    .sum();
                rhs[r] = 1.0 - fixed;
            }
            rhs[m] = -(0..n)
                .filter(|&j| state[j] != 2)
                .map(|j| y[j] * alpha[j])
                .sum::<f64>();
            let Some(sol) = a.lu().solve(&rhs) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let feasible =
            alpha.iter().all(|&a| (-1e-9..=c + 1e-9).contains(&a)) && alpha.dot(&y).abs() <= 1e-9;
        if !feasible {
            continue;
        }
        let w = objective(&alpha);
        if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
            best = Some((w, alpha));
        }
    }
    let (objective, alpha) = best.expect("alpha = 0 is always feasible");

    // Bias: average over free vectors, else the midpoint of the bound interval.
    let f0 = |i: usize| (0..n).map(|j| alpha[j] * y[j] * k[(j, i)]).sum::<f64>();
    let eps = 1e-7;
    let free: Vec<usize> = (0..n)
        .filter(|&i| alpha[i] > eps && alpha[i] < c - eps)
        .collect();
    let bias = if free.is_empty() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let target = y[i] - f0(i);
            let at_zero = alpha[i] <= eps;
            // y = +1: at 0 wants b ≥ target, at C wants b ≤ target; mirrored for y = -1
            if (y[i] > 0.0) == at_zero {
                lo = lo.max(target);
            } else {
                hi = hi.min(target);
            }
        }
        0.5 * (lo + hi)
    } else {
        free.iter().map(|&i| y[i] - f0(i)).sum::<f64>() / free.len() as f64
    };
    QpSolution {
        alphas: alpha.iter().copied().collect(),
        objective,
        bias,
    }
}

/// Predictions of the oracle solution on the rows of `ds`.
pub fn oracle_predictions(ds: &Dataset, gamma: f64, sol: &QpSolution) -> Vec<ClassLabel> {
    let r = ds.records();
    r.iter()
        .map(|p| {
            let f: f64 = r
                .iter()
                .zip(&sol.alphas)
                .map(|(q, a)| a * q.label.sign() * svm::rbf(&q.features, &p.features, gamma))
                .sum::<f64>()
                + sol.bias;
            if f >= 0.0 {
                ClassLabel::Stressful
            } else {
                ClassLabel::Calm
            }
        })
        .collect()
}
