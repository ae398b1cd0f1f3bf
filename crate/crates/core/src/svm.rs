//! Soft-margin RBF support vector classifier trained by SMO.
//!
//! Labels map to `-1` (calm) and `+1` (stressful). The solver is the
//! simplified Platt scheme: sweep over every point violating the KKT
//! conditions, pair it with a seeded random partner (falling back to a sweep
//! over all partners when the random pair makes no progress), and stop after
//! `max_passes` consecutive sweeps without a change or when the update cap is
//! hit.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ClassLabel, Dataset};
use crate::par::Exec;
use crate::rng::seeded;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("vectors differ in dimension ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("training set contains a single class")]
    SingleClass,
    #[error("invalid SVM config: {0}")]
    Config(String),
    #[error("model decode failed: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, SvmError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaMode {
    /// `1 / n_features` of the data the model is trained on.
    Auto,
    Fixed(f64),
}

/// RBF kernel settings. `degree` is carried for config parity and ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma: GammaMode,
    pub degree: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            gamma: GammaMode::Auto,
            degree: 3,
        }
    }
}

impl KernelSpec {
    pub fn fixed(gamma: f64) -> Self {
        Self {
            gamma: GammaMode::Fixed(gamma),
            ..Self::default()
        }
    }

    pub fn resolve_gamma(&self, n_features: usize) -> Result<f64> {
        let g = match self.gamma {
            GammaMode::Auto => 1.0 / n_features.max(1) as f64,
            GammaMode::Fixed(g) => g,
        };
        if g > 0.0 && g.is_finite() {
            Ok(g)
        } else {
            Err(SvmError::Config(format!("gamma must be positive, got {g}")))
        }
    }
}

/// `exp(-gamma * ‖x - z‖²)`.
pub fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

pub fn kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(SvmError::Dimension(x.len(), z.len()));
    }
    Ok(rbf(x, z, gamma))
}

/// Full `n × n` kernel matrix, row-major. Rows may be computed in parallel.
pub fn kernel_matrix(points: &[Vec<f64>], gamma: f64, exec: Exec) -> Vec<f64> {
    let n = points.len();
    exec.map_range(n, |i| {
        points
            .iter()
            .map(|z| rbf(&points[i], z, gamma))
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_passes: usize,
    /// Cap on successful pair updates; `None` means `100 · n`.
    pub max_iterations: Option<usize>,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-3,
            max_passes: 10,
            max_iterations: None,
            seed: 22,
        }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::Config("C must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(SvmError::Config("tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(SvmError::Config("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Training-set positions of the support vectors.
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub kernel: KernelSpec,
    pub converged: bool,
    pub iterations: usize,
}

const MODEL_FORMAT: &str = "featsel-svm";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SvmFile {
    format: String,
    version: u32,
    model: SvmModel,
}

fn signs(ds: &Dataset) -> Vec<f64> {
    ds.records().iter().map(|r| r.label.sign()).collect()
}

fn points(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.records().iter().map(|r| r.features.clone()).collect()
}

/// `Σ α_i − ½ Σ_ij α_i α_j y_i y_j K_ij`.
pub fn dual_objective(alphas: &[f64], y: &[f64], k: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

impl SvmModel {
    /// Builds a model from a full dual vector over `train` (zeros dropped).
    pub fn from_dual(train: &Dataset, alphas: &[f64], bias: f64, gamma: f64, c: f64) -> Self {
        let y = signs(train);
        let mut model = SvmModel {
            support_indices: Vec::new(),
            support_vectors: Vec::new(),
            dual_coef: Vec::new(),
            bias,
            gamma,
            c,
            kernel: KernelSpec::fixed(gamma),
            converged: false,
            iterations: 0,
        };
        for (i, &a) in alphas.iter().enumerate() {
            if a > 0.0 {
                model.support_indices.push(i);
                model
                    .support_vectors
                    .push(train.records()[i].features.clone());
                model.dual_coef.push(a * y[i]);
            }
        }
        model
    }

    pub fn n_features(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// Dual variables over all `n_train` training points.
    pub fn alphas(&self, n_train: usize) -> Vec<f64> {
        let mut a = vec![0.0; n_train];
        for (&i, &coef) in self.support_indices.iter().zip(&self.dual_coef) {
            a[i] = coef.abs();
        }
        a
    }

    /// `Σ α_i y_i k(x_i, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.n_features() {
            if d != x.len() {
                return Err(SvmError::Dimension(d, x.len()));
            }
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &c)| c * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias)
    }

    /// Sign of the decision value; exactly zero maps to stressful (+1).
    pub fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        Ok(if self.decision_value(x)? >= 0.0 {
            ClassLabel::Stressful
        } else {
            ClassLabel::Calm
        })
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for r in ds.records() {
            if self.predict(&r.features)? == r.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / ds.len() as f64)
    }

    pub fn dual_objective(&self, train: &Dataset) -> f64 {
        let k = kernel_matrix(&points(train), self.gamma, Exec::Sequential);
        dual_objective(&self.alphas(train.len()), &signs(train), &k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SvmFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SvmFile =
            serde_json::from_str(text).map_err(|e| SvmError::Decode(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(SvmError::Decode(format!(
                "unsupported header {} v{}",
                file.format, file.version
            )));
        }
        let m = file.model;
        if m.support_vectors.len() != m.dual_coef.len()
            || m.support_indices.len() != m.dual_coef.len()
        {
            return Err(SvmError::Decode("support arrays differ in length".into()));
        }
        Ok(m)
    }
}

struct Smo<'a> {
    k: &'a [f64],
    y: &'a [f64],
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    b: f64,
    /// `f(x_i) - y_i` under the current `alpha`, `b`.
    err: Vec<f64>,
}

impl Smo<'_> {
    const STEP_EPS: f64 = 1e-10;

    /// Pins values within roundoff of a box edge onto the edge.
    fn snap(&self, a: f64) -> f64 {
        let eps = 1e-12 * self.c.max(1.0);
        if a < eps {
            0.0
        } else if a > self.c - eps {
            self.c
        } else {
            a
        }
    }

    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    fn violates(&self, i: usize, tol: f64) -> bool {
        let r = self.err[i] * self.y[i];
        (r < -tol && self.alpha[i] < self.c) || (r > tol && self.alpha[i] > 0.0)
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if hi - lo < Self::STEP_EPS {
            return false;
        }
        let eta = 2.0 * self.kij(i, j) - self.kij(i, i) - self.kij(j, j);
        if eta >= 0.0 {
            return false;
        }
        let (ei, ej) = (self.err[i], self.err[j]);
        let aj_new = (aj - yj * (ei - ej) / eta).clamp(lo, hi);
        if (aj_new - aj).abs() < Self::STEP_EPS {
            return false;
        }
        let ai_new = self.snap(ai + yi * yj * (aj - aj_new));
        let aj_new = self.snap(aj_new);
        let (dai, daj) = (ai_new - ai, aj_new - aj);
        let b1 = self.b - ei - yi * dai * self.kij(i, i) - yj * daj * self.kij(i, j);
        let b2 = self.b - ej - yi * dai * self.kij(i, j) - yj * daj * self.kij(j, j);
        let b_new = if ai_new > 0.0 && ai_new < self.c {
            b1
        } else if aj_new > 0.0 && aj_new < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - self.b;
        for t in 0..self.n {
            self.err[t] += yi * dai * self.kij(i, t) + yj * daj * self.kij(j, t) + db;
        }
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        self.b = b_new;
        true
    }

    /// Bias minimizing the largest KKT slack for the current multipliers.
    ///
    /// Each point bounds `b` from below or above (free points from both
    /// sides); the midpoint of the tightest lower and upper bounds is optimal.
    fn settle_bias(&self) -> f64 {
        // g_i = f(x_i) - b
        let g = |i: usize| self.err[i] + self.y[i] - self.b;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..self.n {
            let edge = self.y[i] - g(i);
            let free = self.alpha[i] > 0.0 && self.alpha[i] < self.c;
            let at_zero = self.alpha[i] <= 0.0;
            // at zero: y·f ≥ 1; at C: y·f ≤ 1; free: both
            if free || (self.y[i] > 0.0) == at_zero {
                lo = lo.max(edge);
            }
            if free || (self.y[i] > 0.0) != at_zero {
                hi = hi.min(edge);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => self.b,
        }
    }
}

pub fn train_smo(train: &Dataset, kernel: &KernelSpec, cfg: &SvmConfig) -> Result<SvmModel> {
    train_smo_with(train, kernel, cfg, Exec::Sequential)
}

/// [`train_smo`] with the kernel matrix computed under `exec`.
pub fn train_smo_with(
    train: &Dataset,
    kernel: &KernelSpec,
    cfg: &SvmConfig,
    exec: Exec,
) -> Result<SvmModel> {
    cfg.validate()?;
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(SvmError::SingleClass);
    }
    let gamma = kernel.resolve_gamma(train.n_features())?;
    let x = points(train);
    let y = signs(train);
    let n = x.len();
    let k = kernel_matrix(&x, gamma, exec);
    let mut smo = Smo {
        k: &k,
        y: &y,
        n,
        c: cfg.c,
        alpha: vec![0.0; n],
        b: 0.0,
        err: y.iter().map(|v| -v).collect(),
    };
    let cap = cfg.max_iterations.unwrap_or(100 * n);
    let mut rng = seeded(cfg.seed);
    let mut passes = 0;
    let mut updates = 0;
    while passes < cfg.max_passes && updates < cap {
        let mut changed = 0;
        for i in 0..n {
            if updates >= cap {
                break;
            }
            if !smo.violates(i, cfg.tolerance) {
                continue;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let mut stepped = smo.take_step(i, j);
            if !stepped {
                let start = rng.random_range(0..n);
                for off in 0..n {
                    let jj = (start + off) % n;
                    if jj != j && smo.take_step(i, jj) {
                        stepped = true;
                        break;
                    }
                }
            }
            if stepped {
                changed += 1;
                updates += 1;
            }
        }
        passes = if changed == 0 { passes + 1 } else { 0 };
    }
    let bias = smo.settle_bias();
    let mut model = SvmModel::from_dual(train, &smo.alpha, bias, gamma, cfg.c);
    model.kernel = *kernel;
    model.iterations = updates;
    model.converged = passes >= cfg.max_passes && kkt_violation(&model, train, &k) <= cfg.tolerance;
    Ok(model)
}

/// Largest KKT slack over the training set:
/// `α = 0 ⇒ y·f ≥ 1`, `0 < α < C ⇒ y·f = 1`, `α = C ⇒ y·f ≤ 1`.
pub fn kkt_report(model: &SvmModel, train: &Dataset) -> f64 {
    let k = kernel_matrix(&points(train), model.gamma, Exec::Sequential);
    kkt_violation(model, train, &k)
}

fn kkt_violation(model: &SvmModel, train: &Dataset, k: &[f64]) -> f64 {
    let n = train.len();
    let y = signs(train);
    let alpha = model.alphas(n);
    let bound_eps = 1e-12 * model.c.max(1.0);
    (0..n)
        .map(|i| {
            let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[j * n + i]).sum::<f64>() + model.bias;
            let m = y[i] * f;
            if alpha[i] <= bound_eps {
                (1.0 - m).max(0.0)
            } else if alpha[i] >= model.c - bound_eps {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}
