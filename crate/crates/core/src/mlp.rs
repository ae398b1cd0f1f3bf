//! Fully connected two-class network: ReLU hidden layers, softmax output,
//! full-batch Adam with coupled L2 weight decay.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ClassLabel, Dataset};
use crate::rng::seeded;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("input has {found} features, network expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("model decode failed: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, MlpError>;

/// Hidden widths of the default four-layer topology.
pub const DEFAULT_HIDDEN: [usize; 3] = [18, 16, 8];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    layer_sizes: Vec<usize>,
}

impl MlpArchitecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(MlpError::Architecture("need at least two layers".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(MlpError::Architecture(
                "layer sizes must be positive".into(),
            ));
        }
        if *layer_sizes.last().unwrap() != 2 {
            return Err(MlpError::Architecture(
                "output layer must have 2 units".into(),
            ));
        }
        Ok(Self { layer_sizes })
    }

    /// `[n_inputs, 18, 16, 8, 2]`.
    pub fn standard(n_inputs: usize) -> Result<Self> {
        let mut sizes = vec![n_inputs];
        sizes.extend(DEFAULT_HIDDEN);
        sizes.push(2);
        Self::new(sizes)
    }

    /// `[n_inputs, 10, 6, 2]`.
    pub fn shallow(n_inputs: usize) -> Result<Self> {
        Self::new(vec![n_inputs, 10, 6, 2])
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Same hidden widths, different input width.
    pub fn with_inputs(&self, n_inputs: usize) -> Result<Self> {
        let mut sizes = self.layer_sizes.clone();
        sizes[0] = n_inputs;
        Self::new(sizes)
    }
}

/// One affine layer. `weights` is `fan_in × fan_out`, row-major, so
/// `weights[i * fan_out + j]` connects source unit `i` to target unit `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.fan_out + j]
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

const MODEL_FORMAT: &str = "featsel-mlp";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MlpFile {
    format: String,
    version: u32,
    layers: Vec<Layer>,
}

impl MlpParams {
    /// Uniform fan-in initialization: weights in `±sqrt(6 / fan_in)`, biases 0.
    pub fn init(arch: &MlpArchitecture, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let layers = arch
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer {
                    fan_in,
                    fan_out,
                    weights,
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(arch: &MlpArchitecture) -> Self {
        Self {
            layers: arch
                .layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn architecture(&self) -> MlpArchitecture {
        let mut sizes = vec![self.layers[0].fan_in];
        sizes.extend(self.layers.iter().map(|l| l.fan_out));
        MlpArchitecture { layer_sizes: sizes }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Class probabilities `(calm, stressful)` for one input.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.n_inputs() {
            return Err(MlpError::Dimension {
                expected: self.n_inputs(),
                found: x.len(),
            });
        }
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            for (i, &ai) in a.iter().enumerate() {
                let row = &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                for (zj, &w) in z.iter_mut().zip(row) {
                    *zj += ai * w;
                }
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        Ok(softmax2(a[0], a[1]))
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        let p = self.forward(x)?;
        Ok(if p[1] > p[0] {
            ClassLabel::Stressful
        } else {
            ClassLabel::Calm
        })
    }

    /// Fraction of records whose argmax class matches the label
    /// (probability ties go to calm).
    pub fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for r in ds.records() {
            if self.predict(&r.features)? == r.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / ds.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MlpFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            layers: self.layers.clone(),
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MlpFile =
            serde_json::from_str(text).map_err(|e| MlpError::Decode(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(MlpError::Decode(format!(
                "unsupported header {} v{}",
                file.format, file.version
            )));
        }
        if file.layers.is_empty() {
            return Err(MlpError::Decode("no layers".into()));
        }
        for (k, l) in file.layers.iter().enumerate() {
            if l.weights.len() != l.fan_in * l.fan_out || l.bias.len() != l.fan_out {
                return Err(MlpError::Decode(format!("layer {k} shape mismatch")));
            }
            if k > 0 && file.layers[k - 1].fan_out != l.fan_in {
                return Err(MlpError::Decode(format!("layer {k} does not chain")));
            }
        }
        Ok(Self {
            layers: file.layers,
        })
    }

    fn param(&self, id: ParamId) -> f64 {
        let l = &self.layers[id.layer];
        if id.is_bias {
            l.bias[id.index]
        } else {
            l.weights[id.index]
        }
    }

    fn param_mut(&mut self, id: ParamId) -> &mut f64 {
        let l = &mut self.layers[id.layer];
        if id.is_bias {
            &mut l.bias[id.index]
        } else {
            &mut l.weights[id.index]
        }
    }

    fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|v| v * v)
            .sum()
    }
}

fn softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let m = z0.max(z1);
    let e0 = (z0 - m).exp();
    let e1 = (z1 - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0008,
            weight_decay: 0.0003,
            epochs: 10_000,
            seed: 7,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(MlpError::Config("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(MlpError::Config("epochs must be at least 1".into()));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(MlpError::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// Regularized loss at the start of each epoch, before its update.
    pub loss_curve: Vec<f64>,
    pub epochs_run: usize,
}

/// Dense batch view of a dataset.
struct Batch {
    n: usize,
    dim: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl Batch {
    fn from_dataset(ds: &Dataset) -> Self {
        Self {
            n: ds.len(),
            dim: ds.n_features(),
            x: ds.feature_matrix(),
            y: ds.records().iter().map(|r| r.label.index()).collect(),
        }
    }
}

/// Per-layer scratch space for a full-batch forward/backward pass.
struct Workspace {
    /// Pre-activations per layer, `n × fan_out`.
    z: Vec<Vec<f64>>,
    /// Post-activations per layer, `n × fan_out` (softmax for the last).
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    grads: MlpParams,
}

impl Workspace {
    fn new(p: &MlpParams, n: usize) -> Self {
        let z: Vec<Vec<f64>> = p.layers.iter().map(|l| vec![0.0; n * l.fan_out]).collect();
        Self {
            a: z.clone(),
            delta: z.clone(),
            z,
            grads: MlpParams::zeros(&p.architecture()),
        }
    }

    /// Runs the forward pass and returns mean cross-entropy.
    fn forward(&mut self, p: &MlpParams, b: &Batch) -> f64 {
        let last = p.layers.len() - 1;
        for (l, layer) in p.layers.iter().enumerate() {
            let fo = layer.fan_out;
            let (input, fi): (&[f64], usize) = if l == 0 {
                (&b.x, b.dim)
            } else {
                (&self.a[l - 1], layer.fan_in)
            };
            let z = &mut self.z[l];
            for s in 0..b.n {
                let zr = &mut z[s * fo..(s + 1) * fo];
                zr.copy_from_slice(&layer.bias);
                let xr = &input[s * fi..(s + 1) * fi];
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let wr = &layer.weights[i * fo..(i + 1) * fo];
                    for (zj, &w) in zr.iter_mut().zip(wr) {
                        *zj += xi * w;
                    }
                }
            }
            let a = &mut self.a[l];
            if l < last {
                for (av, &zv) in a.iter_mut().zip(z.iter()) {
                    *av = zv.max(0.0);
                }
            }
        }
        let zl = &self.z[last];
        let al = &mut self.a[last];
        let mut loss = 0.0;
        for s in 0..b.n {
            let (z0, z1) = (zl[2 * s], zl[2 * s + 1]);
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            loss += lse - zl[2 * s + b.y[s]];
            let p = softmax2(z0, z1);
            al[2 * s] = p[0];
            al[2 * s + 1] = p[1];
        }
        loss / b.n as f64
    }

    /// Backward pass after [`Workspace::forward`]; fills `grads` with the
    /// gradient of mean cross-entropy plus `weight_decay/2 · ‖θ‖²`.
    fn backward(&mut self, p: &MlpParams, b: &Batch, weight_decay: f64) {
        let last = p.layers.len() - 1;
        let inv_n = 1.0 / b.n as f64;
        {
            let d = &mut self.delta[last];
            let a = &self.a[last];
            for s in 0..b.n {
                for k in 0..2 {
                    let y = if b.y[s] == k { 1.0 } else { 0.0 };
                    d[2 * s + k] = (a[2 * s + k] - y) * inv_n;
                }
            }
        }
        for l in (0..=last).rev() {
            let layer = &p.layers[l];
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let g = &mut self.grads.layers[l];
            g.weights.fill(0.0);
            g.bias.fill(0.0);
            let input: &[f64] = if l == 0 { &b.x } else { &self.a[l - 1] };
            let d = &self.delta[l];
            for s in 0..b.n {
                let dr = &d[s * fo..(s + 1) * fo];
                for (gb, &dv) in g.bias.iter_mut().zip(dr) {
                    *gb += dv;
                }
                let xr = &input[s * fi..(s + 1) * fi];
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let gr = &mut g.weights[i * fo..(i + 1) * fo];
                    for (gw, &dv) in gr.iter_mut().zip(dr) {
                        *gw += xi * dv;
                    }
                }
            }
            if weight_decay != 0.0 {
                for (gw, &w) in g.weights.iter_mut().zip(&layer.weights) {
                    *gw += weight_decay * w;
                }
                for (gb, &bv) in g.bias.iter_mut().zip(&layer.bias) {
                    *gb += weight_decay * bv;
                }
            }
            if l > 0 {
                let (lower, upper) = self.delta.split_at_mut(l);
                let dprev = &mut lower[l - 1];
                let d = &upper[0];
                let zprev = &self.z[l - 1];
                for s in 0..b.n {
                    let dr = &d[s * fo..(s + 1) * fo];
                    for i in 0..fi {
                        let idx = s * fi + i;
                        if zprev[idx] <= 0.0 {
                            dprev[idx] = 0.0;
                            continue;
                        }
                        let wr = &layer.weights[i * fo..(i + 1) * fo];
                        dprev[idx] = wr.iter().zip(dr).map(|(w, dv)| w * dv).sum();
                    }
                }
            }
        }
    }

    fn accuracy(&self, b: &Batch) -> f64 {
        let a = self.a.last().unwrap();
        let correct = (0..b.n)
            .filter(|&s| usize::from(a[2 * s + 1] > a[2 * s]) == b.y[s])
            .count();
        correct as f64 / b.n as f64
    }
}

struct Adam {
    m: MlpParams,
    v: MlpParams,
    t: i32,
}

impl Adam {
    fn new(p: &MlpParams) -> Self {
        let zeros = MlpParams::zeros(&p.architecture());
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, p: &mut MlpParams, g: &MlpParams, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let step = cfg.learning_rate / bc1;
        let bc2_sqrt = bc2.sqrt();
        for l in 0..p.layers.len() {
            let layer = &mut p.layers[l];
            let pairs = [
                (&mut layer.weights, &g.layers[l].weights),
                (&mut layer.bias, &g.layers[l].bias),
            ];
            let ml = &mut self.m.layers[l];
            let vl = &mut self.v.layers[l];
            let ms = [&mut ml.weights, &mut ml.bias];
            let vs = [&mut vl.weights, &mut vl.bias];
            for (((theta, grad), m), v) in pairs.into_iter().zip(ms).zip(vs) {
                for i in 0..theta.len() {
                    let gi = grad[i];
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                    theta[i] -= step * m[i] / (v[i].sqrt() / bc2_sqrt + cfg.epsilon);
                }
            }
        }
    }
}

/// Trains from a fresh [`MlpParams::init`] with `cfg.seed`.
pub fn train(
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    cfg.validate()?;
    if train_ds.n_features() != arch.n_inputs() {
        return Err(MlpError::Dimension {
            expected: arch.n_inputs(),
            found: train_ds.n_features(),
        });
    }
    let mut params = MlpParams::init(arch, cfg.seed);
    let batch = Batch::from_dataset(train_ds);
    let mut ws = Workspace::new(&params, batch.n);
    let mut adam = Adam::new(&params);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let ce = ws.forward(&params, &batch);
        let loss = ce + 0.5 * cfg.weight_decay * params.squared_norm();
        if !loss.is_finite() {
            return Err(MlpError::Divergence { epoch });
        }
        loss_curve.push(loss);
        ws.backward(&params, &batch, cfg.weight_decay);
        adam.step(&mut params, &ws.grads, cfg);
    }
    ws.forward(&params, &batch);
    let train_accuracy = ws.accuracy(&batch);
    let test_accuracy = test_ds.map(|d| params.evaluate(d)).transpose()?;
    Ok((
        params,
        TrainReport {
            train_accuracy,
            test_accuracy,
            loss_curve,
            epochs_run: cfg.epochs,
        },
    ))
}

/// Mean cross-entropy plus `weight_decay/2 · ‖θ‖²` over `ds`.
pub fn loss(p: &MlpParams, ds: &Dataset, weight_decay: f64) -> f64 {
    let batch = Batch::from_dataset(ds);
    let mut ws = Workspace::new(p, batch.n);
    ws.forward(p, &batch) + 0.5 * weight_decay * p.squared_norm()
}

/// Analytic gradient of [`loss`], in the same layout as the parameters.
pub fn gradient(p: &MlpParams, ds: &Dataset, weight_decay: f64) -> MlpParams {
    let batch = Batch::from_dataset(ds);
    let mut ws = Workspace::new(p, batch.n);
    ws.forward(p, &batch);
    ws.backward(p, &batch, weight_decay);
    ws.grads
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ParamId {
    layer: usize,
    is_bias: bool,
    index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters skipped because a ±h step moved a hidden pre-activation
    /// across zero.
    pub skipped_kinks: usize,
    pub biases_checked: usize,
}

/// Compares backprop against central differences (`h = 1e-5`) on up to
/// `n_samples` randomly drawn parameters. Relative error per parameter is
/// `|g_a − g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn gradient_check(
    p: &MlpParams,
    batch: &Dataset,
    weight_decay: f64,
    n_samples: usize,
    seed: u64,
) -> GradientCheck {
    const H: f64 = 1e-5;
    let analytic = gradient(p, batch, weight_decay);
    let data = Batch::from_dataset(batch);
    let base_pattern = relu_pattern(p, &data);

    let mut all = Vec::with_capacity(p.n_params());
    for (layer, l) in p.layers.iter().enumerate() {
        all.extend((0..l.weights.len()).map(|index| ParamId {
            layer,
            is_bias: false,
            index,
        }));
        all.extend((0..l.bias.len()).map(|index| ParamId {
            layer,
            is_bias: true,
            index,
        }));
    }
    let mut rng = seeded(seed);
    let mut tried = BTreeSet::new();
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        biases_checked: 0,
    };
    let mut probe = p.clone();
    let mut ws = Workspace::new(p, data.n);
    while out.checked < n_samples && tried.len() < all.len() {
        let id = all[rng.random_range(0..all.len())];
        if !tried.insert(id) {
            continue;
        }
        let orig = p.param(id);
        *probe.param_mut(id) = orig + H;
        let plus_ok = relu_pattern(&probe, &data) == base_pattern;
        let lp = ws.forward(&probe, &data) + 0.5 * weight_decay * probe.squared_norm();
        *probe.param_mut(id) = orig - H;
        let minus_ok = relu_pattern(&probe, &data) == base_pattern;
        let lm = ws.forward(&probe, &data) + 0.5 * weight_decay * probe.squared_norm();
        *probe.param_mut(id) = orig;
        if !(plus_ok && minus_ok) {
            out.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * H);
        let ga = analytic.param(id);
        let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-8);
        out.max_relative_error = out.max_relative_error.max(rel);
        out.checked += 1;
        if id.is_bias {
            out.biases_checked += 1;
        }
    }
    out
}

fn relu_pattern(p: &MlpParams, b: &Batch) -> Vec<bool> {
    let mut ws = Workspace::new(p, b.n);
    ws.forward(p, b);
    let hidden = p.layers.len() - 1;
    ws.z[..hidden]
        .iter()
        .flat_map(|z| z.iter().map(|&v| v > 0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, Record, SyntheticSpec};

    fn arch() -> MlpArchitecture {
        MlpArchitecture::standard(10).unwrap()
    }

    fn separable_2d(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let x = (t * 17.0).sin();
                let y = (t * 23.0).cos();
                let label = if x + 0.5 * y > 0.1 {
                    ClassLabel::Stressful
                } else {
                    ClassLabel::Calm
                };
                // keep a margin around the boundary
                let shift = if label == ClassLabel::Stressful {
                    0.3
                } else {
                    -0.3
                };
                Record::new(vec![x + shift, y], label)
            })
            .collect();
        Dataset::with_default_names(records).unwrap()
    }

    #[test]
    fn architecture_validation() {
        assert_eq!(arch().layer_sizes(), &[10, 18, 16, 8, 2]);
        assert_eq!(
            MlpArchitecture::shallow(10).unwrap().layer_sizes(),
            &[10, 10, 6, 2]
        );
        assert!(MlpArchitecture::new(vec![2]).is_err());
        assert!(MlpArchitecture::new(vec![3, 0, 2]).is_err());
        assert!(MlpArchitecture::new(vec![3, 4, 3]).is_err());
        assert_eq!(arch().with_inputs(5).unwrap().n_inputs(), 5);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpParams::init(&arch(), 7);
        assert_eq!(a, MlpParams::init(&arch(), 7));
        assert_ne!(a, MlpParams::init(&arch(), 8));
        let first = &a.layers[0];
        assert_eq!(first.weights.len(), 180);
        let bound = 0.6f64.sqrt();
        assert!(first.weights.iter().all(|w| w.abs() <= bound));
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_network_is_uniform() {
        let p = MlpParams::zeros(&arch());
        assert_eq!(p.forward(&[1.0; 10]).unwrap(), [0.5, 0.5]);
        assert_eq!(p.predict(&[1.0; 10]).unwrap(), ClassLabel::Calm);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax2(1000.0, 0.0);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] >= 0.0 && p[1] < 1e-300);
        let q = softmax2(-1e4, 1e4);
        assert!(q.iter().all(|v| v.is_finite()));
        assert!((q[0] + q[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_normalized_and_dimension_checked() {
        let p = MlpParams::init(&arch(), 3);
        for s in 0..20 {
            let x: Vec<f64> = (0..10)
                .map(|i| ((s * 10 + i) as f64 * 0.37).sin() * 5.0)
                .collect();
            let out = p.forward(&x).unwrap();
            assert!(out[0] > 0.0 && out[1] > 0.0);
            assert!((out[0] + out[1] - 1.0).abs() < 1e-12);
        }
        assert_eq!(
            p.forward(&[0.0; 3]),
            Err(MlpError::Dimension {
                expected: 10,
                found: 3
            })
        );
    }

    #[test]
    fn tie_rule_gives_half_on_balanced_data() {
        let ds = synthesize(&SyntheticSpec::default()).unwrap();
        let p = MlpParams::zeros(&arch());
        assert_eq!(p.evaluate(&ds).unwrap(), 0.5);
    }

    #[test]
    fn learns_separable_set() {
        let ds = separable_2d(200);
        let cfg = TrainConfig {
            epochs: 2000,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let a = MlpArchitecture::standard(2).unwrap();
        let (p, rep) = train(&ds, Some(&ds), &a, &cfg).unwrap();
        assert_eq!(rep.train_accuracy, 1.0);
        assert_eq!(rep.test_accuracy, Some(1.0));
        assert_eq!(p.evaluate(&ds).unwrap(), 1.0);
        assert_eq!(rep.loss_curve.len(), 2000);
        for t in 0..rep.loss_curve.len() - 500 {
            assert!(
                rep.loss_curve[t + 500] <= rep.loss_curve[t],
                "window at {t}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = synthesize(&SyntheticSpec {
            n_records: 80,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        let a = train(&ds, None, &arch(), &cfg).unwrap();
        let b = train(&ds, None, &arch(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heavy_decay_collapses_to_chance() {
        let ds = synthesize(&SyntheticSpec {
            n_records: 200,
            class_separation: 2.0,
            label_noise_rate: 0.0,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1500,
            learning_rate: 0.01,
            weight_decay: 10.0,
            ..TrainConfig::default()
        };
        let (p, rep) = train(&ds, None, &arch(), &cfg).unwrap();
        let max_w = p
            .layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(max_w < 0.05, "max |w| = {max_w}");
        assert!(
            (rep.train_accuracy - 0.5).abs() <= 0.05,
            "{}",
            rep.train_accuracy
        );
    }

    #[test]
    fn config_and_dimension_errors() {
        let ds = separable_2d(10);
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&ds, None, &MlpArchitecture::standard(2).unwrap(), &bad),
            Err(MlpError::Config(_))
        ));
        assert!(matches!(
            train(&ds, None, &arch(), &TrainConfig::default()),
            Err(MlpError::Dimension { .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let ds = separable_2d(20);
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: f64::MAX,
            ..TrainConfig::default()
        };
        let err = train(&ds, None, &MlpArchitecture::standard(2).unwrap(), &cfg).unwrap_err();
        assert!(matches!(err, MlpError::Divergence { epoch } if epoch > 0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ds = synthesize(&SyntheticSpec {
            n_records: 16,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let p = MlpParams::init(&arch(), 11);
        let chk = gradient_check(&p, &ds, 0.0003, 60, 5);
        assert!(chk.checked >= 50);
        assert!(chk.max_relative_error < 1e-4, "{chk:?}");
    }

    #[test]
    fn gradient_check_on_zero_inputs_covers_biases() {
        let records = (0..6)
            .map(|i| Record::new(vec![0.0; 10], ClassLabel::from_index(i % 2)))
            .collect();
        let ds = Dataset::with_default_names(records).unwrap();
        let mut p = MlpParams::init(&arch(), 2);
        for l in &mut p.layers {
            for (k, b) in l.bias.iter_mut().enumerate() {
                *b = 0.1 + 0.05 * k as f64;
            }
        }
        let chk = gradient_check(&p, &ds, 0.0, 400, 1);
        assert!(chk.biases_checked > 0);
        assert!(chk.max_relative_error < 1e-4, "{chk:?}");
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = MlpParams::init(&arch(), 99);
        let text = p.to_json();
        assert!(text.starts_with("{\"format\":\"featsel-mlp\",\"version\":1"));
        let back = MlpParams::from_json(&text).unwrap();
        for (a, b) in p.layers.iter().zip(&back.layers) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert!(
            MlpParams::from_json("{\"format\":\"other\",\"version\":1,\"layers\":[]}").is_err()
        );
    }
}
