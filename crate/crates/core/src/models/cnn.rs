//! One-convolution-layer classifiers on `v2` (CNN₂) and `v3` (CNN₃)
//! encodings, trained by mini-batch Adam with hand-written backpropagation.
//!
//! Architecture: valid convolution (stride 1) with 32 filters → ReLU →
//! flatten → dense(2) → softmax.
//!
//! | variant | input (H×W×C) | kernel      | conv output | flatten |
//! |---------|---------------|-------------|-------------|---------|
//! | cnn2    | n × 3 × 1     | (n−4) × 3   | 5 × 1 × 32  | 160     |
//! | cnn3    | 6 × n × 3     | 2 × (n−4)   | 5 × 5 × 32  | 800     |
//!
//! The dense head has two units because that is the only head that makes
//! the totals come out to `96n − 30` and `192n + 866`: conv weights
//! `32·K + 32` plus dense `2·flatten + 2`.
//!
//! Parameters live in one flat vector in declaration order: conv kernel
//! `[K][32]` (kernel offset `(dh·kw + dw)·C + c`), conv bias `[32]`, dense
//! kernel `[flatten][2]` (flatten offset `(oh·out_w + ow)·32 + f`), dense
//! bias `[2]`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EncodingKind, LabeledDataset};
use crate::error::{Error, Result};
use crate::seeds::rng_from;

pub const FILTERS: usize = 32;
pub const DENSE_UNITS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CnnVariant {
    Cnn2,
    Cnn3,
}

impl CnnVariant {
    pub fn encoding(self) -> EncodingKind {
        match self {
            Self::Cnn2 => EncodingKind::V2,
            Self::Cnn3 => EncodingKind::V3,
        }
    }

    /// `96n − 30` or `192n + 866`.
    pub fn expected_parameters(self, n: usize) -> usize {
        match self {
            Self::Cnn2 => 96 * n - 30,
            Self::Cnn3 => 192 * n + 866,
        }
    }
}

impl fmt::Display for CnnVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cnn2 => "cnn2",
            Self::Cnn3 => "cnn3",
        })
    }
}

impl FromStr for CnnVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn2" => Ok(Self::Cnn2),
            "cnn3" => Ok(Self::Cnn3),
            _ => Err(Error::InvalidConfig(format!("unknown cnn variant {s:?}"))),
        }
    }
}

/// Shapes derived from a variant and `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CnnArchitecture {
    pub variant: CnnVariant,
    pub n: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl CnnArchitecture {
    pub fn new(variant: CnnVariant, n: usize) -> Result<Self> {
        if n < 6 {
            return Err(Error::DegreeOutOfRange { n, min: 6, max: usize::MAX });
        }
        let (in_h, in_w, in_c, k_h, k_w) = match variant {
            CnnVariant::Cnn2 => (n, 3, 1, n - 4, 3),
            CnnVariant::Cnn3 => (6, n, 3, 2, n - 4),
        };
        Ok(Self { variant, n, in_h, in_w, in_c, k_h, k_w, out_h: in_h - k_h + 1, out_w: in_w - k_w + 1 })
    }

    /// Values per convolution patch.
    pub fn kernel_len(&self) -> usize {
        self.k_h * self.k_w * self.in_c
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn flatten_len(&self) -> usize {
        self.positions() * FILTERS
    }

    pub fn input_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    fn offsets(&self) -> Offsets {
        let conv_w = 0;
        let conv_b = conv_w + self.kernel_len() * FILTERS;
        let dense_w = conv_b + FILTERS;
        let dense_b = dense_w + self.flatten_len() * DENSE_UNITS;
        Offsets { conv_w, conv_b, dense_w, dense_b, total: dense_b + DENSE_UNITS }
    }

    pub fn parameter_count(&self) -> usize {
        self.offsets().total
    }

    /// Input offset of every patch element, per output position.
    fn patch_index(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.positions() * self.kernel_len());
        for oh in 0..self.out_h {
            for ow in 0..self.out_w {
                for dh in 0..self.k_h {
                    for dw in 0..self.k_w {
                        for c in 0..self.in_c {
                            idx.push(((oh + dh) * self.in_w + ow + dw) * self.in_c + c);
                        }
                    }
                }
            }
        }
        idx
    }
}

#[derive(Clone, Copy, Debug)]
struct Offsets {
    conv_w: usize,
    conv_b: usize,
    dense_w: usize,
    dense_b: usize,
    total: usize,
}

/// Optimizer settings. Defaults: Adam(0.9, 0.999, ε = 1e−7), learning rate
/// 1e−3, batch 128, 20 epochs, inputs cast to `f64` unscaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch shuffles.
    pub shuffle_seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-7, batch_size: 128, epochs: 20, shuffle_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    arch: CnnArchitecture,
    seed: u64,
    params: Vec<f64>,
    patch_index: Vec<usize>,
}

/// Per-sample activations kept for the backward pass.
struct Scratch {
    input: Vec<f64>,
    patches: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: [f64; DENSE_UNITS],
}

impl Scratch {
    fn new(arch: &CnnArchitecture) -> Self {
        Self {
            input: vec![0.0; arch.input_len()],
            patches: vec![0.0; arch.positions() * arch.kernel_len()],
            pre: vec![0.0; arch.flatten_len()],
            act: vec![0.0; arch.flatten_len()],
            logits: [0.0; DENSE_UNITS],
        }
    }
}

/// Builds a model with Glorot-uniform kernels and zero biases.
pub fn cnn_build(variant: CnnVariant, n: usize, seed: u64) -> Result<CnnModel> {
    let arch = CnnArchitecture::new(variant, n)?;
    let off = arch.offsets();
    assert_eq!(off.total, variant.expected_parameters(n), "parameter count identity");
    let mut params = vec![0.0; off.total];
    let mut rng = rng_from(seed);
    let conv_limit = (6.0 / (arch.kernel_len() + arch.k_h * arch.k_w * FILTERS) as f64).sqrt();
    for w in &mut params[off.conv_w..off.conv_b] {
        *w = rng.random_range(-conv_limit..conv_limit);
    }
    let dense_limit = (6.0 / (arch.flatten_len() + DENSE_UNITS) as f64).sqrt();
    for w in &mut params[off.dense_w..off.dense_b] {
        *w = rng.random_range(-dense_limit..dense_limit);
    }
    Ok(CnnModel { patch_index: arch.patch_index(), arch, seed, params })
}

impl CnnModel {
    pub fn architecture(&self) -> &CnnArchitecture {
        &self.arch
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_dataset(&self, data: &LabeledDataset) -> Result<()> {
        let want = self.arch.variant.encoding();
        if data.kind() != want {
            return Err(Error::EncodingMismatch {
                model: self.arch.variant.to_string(),
                expected: want.index(),
                found: data.kind().index(),
            });
        }
        if data.n() != self.arch.n {
            return Err(Error::SizeMismatch { expected: self.arch.n, found: data.n() });
        }
        Ok(())
    }

    fn forward_into(&self, x: &[u8], s: &mut Scratch) {
        let a = &self.arch;
        let off = a.offsets();
        let kl = a.kernel_len();
        for (dst, &v) in s.input.iter_mut().zip(x) {
            *dst = v as f64;
        }
        for (dst, &i) in s.patches.iter_mut().zip(&self.patch_index) {
            *dst = s.input[i];
        }
        let kernel = &self.params[off.conv_w..off.conv_b];
        let bias = &self.params[off.conv_b..off.dense_w];
        for pos in 0..a.positions() {
            let z = &mut s.pre[pos * FILTERS..(pos + 1) * FILTERS];
            z.copy_from_slice(bias);
            let patch = &s.patches[pos * kl..(pos + 1) * kl];
            for (k, &v) in patch.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let w = &kernel[k * FILTERS..(k + 1) * FILTERS];
                for (zf, &wf) in z.iter_mut().zip(w) {
                    *zf += v * wf;
                }
            }
        }
        for (act, &z) in s.act.iter_mut().zip(&s.pre) {
            *act = z.max(0.0);
        }
        let dense = &self.params[off.dense_w..off.dense_b];
        let mut logits = [self.params[off.dense_b], self.params[off.dense_b + 1]];
        for (i, &h) in s.act.iter().enumerate() {
            if h != 0.0 {
                logits[0] += h * dense[2 * i];
                logits[1] += h * dense[2 * i + 1];
            }
        }
        s.logits = logits;
    }

    /// Class probabilities `(p0, p1)`.
    pub fn forward(&self, x: &[u8]) -> Result<[f64; 2]> {
        if x.len() != self.arch.input_len() {
            return Err(Error::Shape(format!("{} input has {} values, expected {}", self.arch.variant, x.len(), self.arch.input_len())));
        }
        let mut s = Scratch::new(&self.arch);
        self.forward_into(x, &mut s);
        Ok(softmax(s.logits))
    }

    /// `p1` for every sample.
    pub fn predict_scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        self.check_dataset(data)?;
        let mut s = Scratch::new(&self.arch);
        Ok((0..data.len())
            .map(|i| {
                self.forward_into(data.sample(i), &mut s);
                softmax(s.logits)[1]
            })
            .collect())
    }

    /// Adds the gradient of this sample's cross-entropy (times `scale`) into
    /// `grad` and returns the sample loss.
    fn backward_into(&self, x: &[u8], y: u8, scale: f64, s: &mut Scratch, grad: &mut [f64]) -> f64 {
        self.forward_into(x, s);
        let a = &self.arch;
        let off = a.offsets();
        let kl = a.kernel_len();
        let probs = softmax(s.logits);
        let loss = -probs[y as usize].max(f64::MIN_POSITIVE).ln();
        let mut dlogit = probs;
        dlogit[y as usize] -= 1.0;
        dlogit[0] *= scale;
        dlogit[1] *= scale;

        grad[off.dense_b] += dlogit[0];
        grad[off.dense_b + 1] += dlogit[1];
        let dense = &self.params[off.dense_w..off.dense_b];
        // reuse `pre` as d(loss)/d(pre-activation)
        for i in 0..a.flatten_len() {
            let h = s.act[i];
            if h > 0.0 {
                grad[off.dense_w + 2 * i] += h * dlogit[0];
                grad[off.dense_w + 2 * i + 1] += h * dlogit[1];
                s.pre[i] = dense[2 * i] * dlogit[0] + dense[2 * i + 1] * dlogit[1];
            } else {
                s.pre[i] = 0.0;
            }
        }
        let (head, tail) = grad.split_at_mut(off.conv_b);
        let gkernel = &mut head[off.conv_w..];
        let gbias = &mut tail[..FILTERS];
        for pos in 0..a.positions() {
            let dz = &s.pre[pos * FILTERS..(pos + 1) * FILTERS];
            if dz.iter().all(|&d| d == 0.0) {
                continue;
            }
            for (gb, &d) in gbias.iter_mut().zip(dz) {
                *gb += d;
            }
            let patch = &s.patches[pos * kl..(pos + 1) * kl];
            for (k, &v) in patch.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let g = &mut gkernel[k * FILTERS..(k + 1) * FILTERS];
                for (gf, &d) in g.iter_mut().zip(dz) {
                    *gf += v * d;
                }
            }
        }
        loss
    }

    /// Mean cross-entropy over `rows` of `data` and its gradient.
    pub fn loss_and_gradient(&self, data: &LabeledDataset, rows: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check_dataset(data)?;
        let mut s = Scratch::new(&self.arch);
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for &r in rows {
            loss += self.backward_into(data.sample(r), data.label(r), scale, &mut s, &mut grad);
        }
        Ok((loss * scale, grad))
    }

    /// Mean cross-entropy over `rows`.
    pub fn loss(&self, data: &LabeledDataset, rows: &[usize]) -> Result<f64> {
        self.check_dataset(data)?;
        let mut s = Scratch::new(&self.arch);
        let total: f64 = rows
            .iter()
            .map(|&r| {
                self.forward_into(data.sample(r), &mut s);
                -softmax(s.logits)[data.label(r) as usize].max(f64::MIN_POSITIVE).ln()
            })
            .sum();
        Ok(total / rows.len() as f64)
    }

    /// Text format: a header line, a config line, then one `tensor` line with
    /// name and shape followed by one line of values per tensor, in
    /// declaration order. Values use Rust's shortest round-trip formatting.
    pub fn save(&self, path: &Path, config: &CnnConfig) -> Result<()> {
        fs::write(path, self.to_text(config)).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self, config: &CnnConfig) -> String {
        let a = &self.arch;
        let off = a.offsets();
        let mut s = format!(
            "kronml-cnn variant={} n={} seed={} params={}\nconfig {}\n",
            a.variant,
            a.n,
            self.seed,
            self.params.len(),
            serde_json::to_string(config).expect("config serializes"),
        );
        let tensors = [
            ("conv_kernel", format!("{},{},{},{}", a.k_h, a.k_w, a.in_c, FILTERS), off.conv_w..off.conv_b),
            ("conv_bias", FILTERS.to_string(), off.conv_b..off.dense_w),
            ("dense_kernel", format!("{},{}", a.flatten_len(), DENSE_UNITS), off.dense_w..off.dense_b),
            ("dense_bias", DENSE_UNITS.to_string(), off.dense_b..off.total),
        ];
        for (name, shape, range) in tensors {
            s.push_str(&format!("tensor {name} {shape}\n"));
            let values: Vec<String> = self.params[range].iter().map(|v| v.to_string()).collect();
            s.push_str(&values.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn load(path: &Path) -> Result<(Self, CnnConfig)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|reason| Error::format(path, reason))
    }

    fn from_text(text: &str) -> std::result::Result<(Self, CnnConfig), String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty model file")?;
        let mut fields = std::collections::HashMap::new();
        let mut words = header.split_whitespace();
        if words.next() != Some("kronml-cnn") {
            return Err("not a cnn model file".into());
        }
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| format!("bad header field {w:?}"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("missing {k}"));
        let variant: CnnVariant = get("variant")?.parse().map_err(|e: Error| e.to_string())?;
        let n: usize = get("n")?.parse().map_err(|_| "bad n")?;
        let seed: u64 = get("seed")?.parse().map_err(|_| "bad seed")?;
        let declared: usize = get("params")?.parse().map_err(|_| "bad params")?;
        let config_line = lines.next().and_then(|l| l.strip_prefix("config ")).ok_or("missing config line")?;
        let config: CnnConfig = serde_json::from_str(config_line).map_err(|e| e.to_string())?;

        let mut model = cnn_build(variant, n, seed).map_err(|e| e.to_string())?;
        if declared != model.params.len() || declared != variant.expected_parameters(n) {
            return Err(format!("declared {declared} parameters, {variant} at n={n} has {}", model.params.len()));
        }
        let mut params = Vec::with_capacity(declared);
        while let Some(line) = lines.next() {
            if !line.starts_with("tensor ") {
                return Err(format!("expected tensor line, got {line:?}"));
            }
            let values = lines.next().ok_or("missing tensor values")?;
            for v in values.split_whitespace() {
                params.push(v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"))?);
            }
        }
        if params.len() != declared {
            return Err(format!("found {} values, expected {declared}", params.len()));
        }
        model.params = params;
        Ok((model, config))
    }
}

fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Outcome of comparing backpropagation with finite differences.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradientCheck {
    /// Largest relative error among the compared parameters.
    pub max_relative_error: f64,
    pub compared: usize,
    /// Parameters skipped because the loss has a kink within the step: the
    /// central difference moves when the step is halved by at least a tenth
    /// of its distance from the analytic value.
    pub non_smooth: usize,
}

/// Compares the backpropagated gradient of the mean loss over `rows` with
/// central finite differences of the given step. Pairs where both values are
/// below `1e-8` in magnitude count as agreeing.
pub fn gradient_check(model: &CnnModel, data: &LabeledDataset, rows: &[usize], step: f64) -> Result<GradientCheck> {
    let (_, analytic) = model.loss_and_gradient(data, rows)?;
    let mut probe = model.clone();
    let mut central = |i: usize, h: f64| -> Result<f64> {
        let w = probe.params[i];
        probe.params[i] = w + h;
        let up = probe.loss(data, rows)?;
        probe.params[i] = w - h;
        let down = probe.loss(data, rows)?;
        probe.params[i] = w;
        Ok((up - down) / (2.0 * h))
    };
    let mut out = GradientCheck::default();
    for (i, &a) in analytic.iter().enumerate() {
        let numeric = central(i, step)?;
        let scale = a.abs().max(numeric.abs());
        if scale < 1e-8 {
            out.compared += 1;
            continue;
        }
        let err = (a - numeric).abs() / scale;
        if err > 1e-6 {
            let finer = central(i, step / 2.0)?;
            if (finer - numeric).abs() >= 0.1 * (a - numeric).abs() {
                out.non_smooth += 1;
                continue;
            }
        }
        out.compared += 1;
        out.max_relative_error = out.max_relative_error.max(err);
    }
    Ok(out)
}

/// Per-epoch training record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
}

/// Minimizes mean cross-entropy with mini-batch Adam. Single-threaded and
/// fully determined by the model's initial weights and `config`.
pub fn cnn_train(
    mut model: CnnModel,
    train: &LabeledDataset,
    validation: Option<&LabeledDataset>,
    config: &CnnConfig,
) -> Result<(CnnModel, TrainHistory)> {
    model.check_dataset(train)?;
    if let Some(v) = validation {
        model.check_dataset(v)?;
    }
    if train.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let p = model.params.len();
    let mut m = vec![0.0; p];
    let mut v = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = rng_from(config.shuffle_seed);
    let mut scratch = Scratch::new(&model.arch);
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &r in batch {
                epoch_loss += model.backward_into(train.sample(r), train.label(r), scale, &mut scratch, &mut grad);
            }
            step += 1;
            let bc1 = 1.0 - config.beta1.powi(step);
            let bc2 = 1.0 - config.beta2.powi(step);
            let lr = config.learning_rate * bc2.sqrt() / bc1;
            for i in 0..p {
                let g = grad[i];
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                model.params[i] -= lr * m[i] / (v[i].sqrt() + config.epsilon);
            }
        }
        let mean_loss = epoch_loss / train.len() as f64;
        if !mean_loss.is_finite() || model.params.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("epoch {epoch}: mean loss {mean_loss}")));
        }
        history.epoch_loss.push(mean_loss);
        if let Some(val) = validation {
            let scores = model.predict_scores(val)?;
            let correct = scores.iter().zip(val.labels()).filter(|(&s, &y)| u8::from(s > 0.5) == y).count();
            history.validation_accuracy.push(correct as f64 / val.len().max(1) as f64);
        }
    }
    Ok((model, history))
}
