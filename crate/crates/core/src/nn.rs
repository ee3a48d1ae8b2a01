//! Feed-forward nets: software training and crossbar-backed inference.
//!
//! Weights are `out x in`, row-major. Training minimizes binary
//! cross-entropy averaged over outputs and samples, computed on the output
//! logits, so the output layer must use the sigmoid activation.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::{
    weight_to_resistance_map, Device, EncodingParams, InputEncoding, ProgrammedMatrix, SystematicScope, TileShape,
    HALF_MILLIAMP,
};
use crate::dataset::Dataset;
use crate::device::{ideal_ladder, NoiseSpec};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::quantizer::{quantize, LevelSet, QuantizedMatrix};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    None,
}

impl Activation {
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
            Activation::None => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative(&self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// `-[y ln s(z) + (1 - y) ln(1 - s(z))]`, stable for large `|z|`.
#[inline]
fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + math::ln_1p(math::exp(-z.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    /// Pre-activation `W x + b`.
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in self.weights.iter_rows().zip(&self.biases).enumerate() {
            out[o] = b + math::dot(row, x);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a net needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            Error::check_len(l.outputs(), l.biases.len())?;
            if i > 0 {
                Error::check_len(layers[i - 1].outputs(), l.inputs())?;
            }
            if l.weights.as_slice().iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::invalid("weights and biases must be finite"));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases. `sizes` lists every width from
    /// the input to the output; `activations` has one entry per layer.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 || sizes.contains(&0) {
            return Err(Error::invalid("need positive widths and one activation per layer"));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit));
                Layer { weights, biases: vec![0.0; fan_out], activation }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.biases.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_layers(x)?.pop().expect("non-empty"))
    }

    /// Activations of every layer, input excluded.
    pub fn forward_layers(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Error::check_len(self.input_size(), x.len())?;
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = outs.last().map_or(x, |v| v.as_slice());
            let mut z = vec![0.0; l.outputs()];
            l.affine(input, &mut z);
            z.iter_mut().for_each(|v| *v = l.activation.apply(*v));
            outs.push(z);
        }
        Ok(outs)
    }

    /// Mean loss and its gradient over the rows of `inputs`.
    pub fn gradients(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Gradients)> {
        self.check_batch(inputs, targets)?;
        let mut grads = Gradients::zeros_like(self);
        let mut scratch = Scratch::new(self);
        let n = inputs.rows();
        let mut loss = 0.0;
        for i in 0..n {
            loss += self.accumulate(inputs.row(i), targets.row(i), 1.0 / n as f64, &mut grads, &mut scratch);
        }
        Ok((loss / n as f64, grads))
    }

    /// Mean loss over the rows of `inputs`.
    pub fn loss(&self, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
        self.check_batch(inputs, targets)?;
        let last = self.layers.len() - 1;
        let mut total = 0.0;
        for (x, y) in inputs.iter_rows().zip(targets.iter_rows()) {
            let hidden = self.forward_layers(x)?;
            let input = if last == 0 { x } else { hidden[last - 1].as_slice() };
            let mut z = vec![0.0; self.output_size()];
            self.layers[last].affine(input, &mut z);
            total += z.iter().zip(y).map(|(&z, &y)| bce_logit(z, y)).sum::<f64>() / z.len() as f64;
        }
        Ok(total / inputs.rows() as f64)
    }

    fn check_batch(&self, inputs: &Matrix, targets: &Matrix) -> Result<()> {
        if inputs.rows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Error::check_len(inputs.rows(), targets.rows())?;
        Error::check_len(self.input_size(), inputs.cols())?;
        Error::check_len(self.output_size(), targets.cols())?;
        if self.layers[self.layers.len() - 1].activation != Activation::Sigmoid {
            return Err(Error::invalid("cross-entropy training needs a sigmoid output layer"));
        }
        Ok(())
    }

    /// Adds `scale * d loss(x, y) / d params` to `grads`; returns the
    /// sample loss. Zero inputs are skipped when forming weight gradients.
    fn accumulate(&self, x: &[f64], y: &[f64], scale: f64, grads: &mut Gradients, s: &mut Scratch) -> f64 {
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let (before, after) = s.activations.split_at_mut(k);
            let input = if k == 0 { x } else { before[k - 1].as_slice() };
            let out = &mut after[0];
            l.affine(input, out);
            if k == last {
                // keep logits for the loss; s.delta receives the output error
                let n_out = out.len() as f64;
                let mut loss = 0.0;
                for (o, (&z, &t)) in out.iter().zip(y).enumerate() {
                    loss += bce_logit(z, t);
                    s.delta[k][o] = (sigmoid(z) - t) / n_out;
                }
                s.loss = loss / n_out;
            } else {
                out.iter_mut().for_each(|v| *v = l.activation.apply(*v));
            }
        }
        for k in (0..=last).rev() {
            let input = if k == 0 { x } else { s.activations[k - 1].as_slice() };
            s.nonzero.clear();
            s.nonzero.extend(input.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j));
            let l = &self.layers[k];
            let (prev_deltas, cur) = s.delta.split_at_mut(k);
            let delta = &cur[0];
            let g = &mut grads.weights[k];
            let cols = l.inputs();
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let sd = scale * d;
                grads.biases[k][o] += sd;
                let row = &mut g.as_mut_slice()[o * cols..(o + 1) * cols];
                for &j in &s.nonzero {
                    row[j] += sd * input[j];
                }
            }
            if k > 0 {
                let prev = &mut prev_deltas[k - 1];
                prev.iter_mut().for_each(|v| *v = 0.0);
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        math::axpy(d, l.weights.row(o), prev);
                    }
                }
                let act = self.layers[k - 1].activation;
                for (p, &a) in prev.iter_mut().zip(&s.activations[k - 1]) {
                    *p *= act.derivative(a);
                }
            }
        }
        s.loss
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
    }
}

struct Scratch {
    activations: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    nonzero: Vec<usize>,
    loss: f64,
}

impl Scratch {
    fn new(m: &Mlp) -> Self {
        let widths: Vec<Vec<f64>> = m.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
        Self { activations: widths.clone(), delta: widths, nonzero: Vec::new(), loss: 0.0 }
    }
}

/// Per-layer gradients, shaped like the net.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &Mlp) -> Self {
        Self {
            weights: m.layers.iter().map(|l| Matrix::zeros(l.outputs(), l.inputs())).collect(),
            biases: m.layers.iter().map(|l| vec![0.0; l.outputs()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().for_each(|w| w.as_mut_slice().iter_mut().for_each(|v| *v = 0.0));
        self.biases.iter_mut().for_each(|b| b.iter_mut().for_each(|v| *v = 0.0));
    }

    fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    BinaryCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Full-batch Adam at 0.01 for 2000 epochs.
    pub fn xor(seed: u64) -> Self {
        Self { learning_rate: 0.01, epochs: 2000, batch_size: 4, ..Self::base(seed) }
    }

    /// Adam at 1e-3, batches of 64, 6 epochs. Longer schedules gain software
    /// accuracy but spread the weights, which costs more at four states.
    pub fn mnist(seed: u64) -> Self {
        Self { learning_rate: 1e-3, epochs: 6, batch_size: 64, ..Self::base(seed) }
    }

    fn base(seed: u64) -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 1,
            batch_size: 32,
            loss: Loss::BinaryCrossEntropy,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::invalid("learning rate and batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_epsilon > 0.0) {
            return Err(Error::invalid("Adam betas must lie in [0, 1) and epsilon be positive"));
        }
        Ok(())
    }
}

/// Trained weights plus the mean training loss of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub loss_history: Vec<f64>,
}

/// Mini-batch Adam. Sample order is reshuffled every epoch from the stream
/// `(seed, epoch)`; the last batch of an epoch may be short.
pub fn train(model: &Mlp, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let targets = data.targets(model.output_size())?;
    model.check_batch(data.inputs(), &targets)?;
    let mut model = model.clone();
    let mut grads = Gradients::zeros_like(&model);
    let mut m = Gradients::zeros_like(&model);
    let mut v = Gradients::zeros_like(&model);
    let mut scratch = Scratch::new(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0i32;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(config.seed, &[epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += model.accumulate(data.inputs().row(i), targets.row(i), scale, &mut grads, &mut scratch);
            }
            step += 1;
            adam_step(&mut model, &grads, &mut m, &mut v, config, step);
        }
        epoch_loss /= data.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NumericDivergence { epoch });
        }
        history.push(epoch_loss);
    }
    Ok(TrainOutcome { model, loss_history: history })
}

// Bias correction folded into the step size, epsilon outside the root.
fn adam_step(model: &mut Mlp, g: &Gradients, m: &mut Gradients, v: &mut Gradients, c: &TrainConfig, t: i32) {
    let (b1, b2) = (c.adam_beta1, c.adam_beta2);
    let lr_t = c.learning_rate * math::sqrt(1.0 - powi(b2, t)) / (1.0 - powi(b1, t));
    let m_slices = m.weights.iter_mut().zip(m.biases.iter_mut()).flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()]);
    let v_slices = v.weights.iter_mut().zip(v.biases.iter_mut()).flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()]);
    for (((p, g), m), v) in model.params_mut().zip(g.slices()).zip(m_slices).zip(v_slices) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= lr_t * m[i] / (math::sqrt(v[i]) + c.adam_epsilon);
        }
    }
}

fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Fraction of samples classified correctly: threshold 0.5 for a single
/// output, argmax otherwise.
pub fn accuracy_from_outputs(outputs: &[Vec<f64>], labels: &[usize]) -> f64 {
    debug_assert_eq!(outputs.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let correct = outputs.iter().zip(labels).filter(|(o, &l)| predict(o) == l).count();
    correct as f64 / labels.len() as f64
}

/// Predicted class of one output vector; ties go to the lowest index.
pub fn predict(output: &[f64]) -> usize {
    if output.len() == 1 {
        return usize::from(output[0] >= 0.5);
    }
    let mut best = 0;
    for (i, &v) in output.iter().enumerate() {
        if v > output[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub enum InferenceMode<'a> {
    Software,
    Crossbar(&'a CrossbarInferenceConfig),
}

pub fn accuracy(model: &Mlp, data: &Dataset, mode: InferenceMode<'_>) -> Result<f64> {
    let outputs = match mode {
        InferenceMode::Software => data.inputs().iter_rows().map(|x| model.forward(x)).collect::<Result<Vec<_>>>()?,
        InferenceMode::Crossbar(cfg) => {
            let mut net = CrossbarNet::prepare(model, cfg, None)?;
            net.forward_all(data.inputs())?
        }
    };
    Ok(accuracy_from_outputs(&outputs, data.labels()))
}

// ---------------------------------------------------------------------------
// Crossbar inference

/// Input range a layer's encoder maps onto `[0, HALF_MILLIAMP]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputRange {
    pub x_min: f64,
    pub x_max: f64,
}

impl InputRange {
    pub const UNIT: InputRange = InputRange { x_min: 0.0, x_max: 1.0 };

    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("calibration range must satisfy x_max > x_min"));
        }
        Ok(Self { x_min, x_max })
    }

    /// Smallest range covering every entry of `samples`; widened to unit
    /// width around a constant column set.
    pub fn observed(samples: &Matrix) -> Result<Self> {
        let (lo, hi) = samples.min_max().ok_or_else(|| Error::invalid("no samples to calibrate on"))?;
        if hi > lo {
            Self::new(lo, hi)
        } else {
            Self::new(lo, lo + 1.0)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub fn encoding(&self) -> Result<InputEncoding> {
        InputEncoding::for_range(self.x_min, self.x_max, HALF_MILLIAMP)
    }
}

/// Everything needed to run a net on simulated hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarInferenceConfig {
    pub n_states: usize,
    pub tile: TileShape,
    pub r_min: f64,
    pub r_max: f64,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub systematic_scope: SystematicScope,
    /// One range per layer, in layer order.
    pub calibration: Vec<InputRange>,
}

impl CrossbarInferenceConfig {
    pub fn validate(&self, model: &Mlp) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::invalid("n_states must be positive"));
        }
        Error::check_len(model.layers().len(), self.calibration.len())?;
        for r in &self.calibration {
            InputRange::new(r.x_min, r.x_max)?;
        }
        Ok(())
    }
}

/// Per-layer input ranges: `first` for the net input, then each hidden
/// activation's range over `samples`. Sigmoid outputs use `[0, 1]`; ReLU
/// outputs use `[0, max observed]`; linear outputs use the observed range.
pub fn calibrate(model: &Mlp, samples: &Matrix, first: InputRange) -> Result<Vec<InputRange>> {
    Error::check_len(model.input_size(), samples.cols())?;
    let hidden = model.layers().len() - 1;
    let mut lo = vec![f64::INFINITY; hidden];
    let mut hi = vec![f64::NEG_INFINITY; hidden];
    if hidden > 0 {
        for x in samples.iter_rows() {
            let acts = model.forward_layers(x)?;
            for k in 0..hidden {
                for &a in &acts[k] {
                    lo[k] = lo[k].min(a);
                    hi[k] = hi[k].max(a);
                }
            }
        }
    }
    let mut ranges = vec![first];
    for k in 0..hidden {
        let range = match model.layers()[k].activation {
            Activation::Sigmoid => InputRange::UNIT,
            Activation::Relu if hi[k] > 0.0 => InputRange::new(0.0, hi[k])?,
            Activation::Relu => InputRange::UNIT,
            Activation::None if hi[k] > lo[k] => InputRange::new(lo[k], hi[k])?,
            Activation::None => InputRange::new(lo[k], lo[k] + 1.0)?,
        };
        ranges.push(range);
    }
    Ok(ranges)
}

/// Stored quantization of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerQuantization {
    pub level_set: LevelSet,
    /// Row-major level index of every weight.
    pub assignment: Vec<usize>,
    pub calibration: InputRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationCache {
    pub n_states: usize,
    pub layers: Vec<LayerQuantization>,
}

struct PreparedLayer {
    quantized: QuantizedMatrix,
    range: InputRange,
    params: EncodingParams,
    programmed: Option<ProgrammedMatrix>,
}

/// A net quantized and mapped onto a device, ready for repeated inference.
///
/// The systematic realization is drawn once, when the net is prepared, and
/// shared by every layer. Without cell noise the programmed tiles are
/// cached; with cell noise every product reprograms its tiles.
pub struct CrossbarNet<'a> {
    model: &'a Mlp,
    device: Device,
    tile: TileShape,
    layers: Vec<PreparedLayer>,
    rng: Stream,
    overflow_count: usize,
}

impl<'a> CrossbarNet<'a> {
    pub fn prepare(model: &'a Mlp, cfg: &CrossbarInferenceConfig, cache: Option<&QuantizationCache>) -> Result<Self> {
        cfg.validate(model)?;
        let mut rng = rng::stream(cfg.noise.seed, &[0x11F]);
        let ladder = ideal_ladder(cfg.n_states, cfg.r_min, cfg.r_max)?.apply_systematic(&cfg.noise, &mut rng);
        let device = Device { ladder, noise: cfg.noise, systematic_scope: cfg.systematic_scope };
        let cache = cache.filter(|c| c.n_states == cfg.n_states && c.layers.len() == model.layers().len());
        let frozen = cfg.noise.sigma_perp == 0.0 && cfg.systematic_scope == SystematicScope::Array;
        let mut layers = Vec::with_capacity(model.layers().len());
        for (k, layer) in model.layers().iter().enumerate() {
            let quantized = match cache {
                Some(c) => QuantizedMatrix::from_parts(
                    layer.outputs(),
                    layer.inputs(),
                    c.layers[k].level_set,
                    c.layers[k].assignment.clone(),
                )?,
                None => quantize(&layer.weights, cfg.n_states)?,
            };
            let range = cfg.calibration[k];
            let map = weight_to_resistance_map(quantized.level_set(), &device.ladder);
            let params = EncodingParams::new(range.encoding()?, map)?;
            let programmed =
                if frozen { Some(ProgrammedMatrix::program(&quantized, cfg.tile, &params, &device, &mut rng)?) } else { None };
            layers.push(PreparedLayer { quantized, range, params, programmed });
        }
        Ok(Self { model, device, tile: cfg.tile, layers, rng, overflow_count: 0 })
    }

    /// Inputs seen outside their layer's calibration range so far. They are
    /// still encoded linearly.
    pub fn overflow_count(&self) -> usize {
        self.overflow_count
    }

    /// Array programmings needed for one inference, per layer.
    pub fn sub_op_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|l| crate::crossbar::tile_count(l.quantized.rows(), l.quantized.cols(), self.tile.rows, self.tile.cols))
            .collect()
    }

    pub fn quantized_layers(&self) -> impl Iterator<Item = &QuantizedMatrix> {
        self.layers.iter().map(|l| &l.quantized)
    }

    pub fn quantization_cache(&self) -> QuantizationCache {
        QuantizationCache {
            n_states: self.device.ladder.n_states(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerQuantization {
                    level_set: *l.quantized.level_set(),
                    assignment: l.quantized.assignment().to_vec(),
                    calibration: l.range,
                })
                .collect(),
        }
    }

    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_layers(x, None)?.pop().expect("non-empty"))
    }

    /// Activations of every layer; `observer` sees every tile of every
    /// layer in order.
    pub fn forward_layers(
        &mut self,
        x: &[f64],
        mut observer: Option<&mut dyn crate::crossbar::TileObserver>,
    ) -> Result<Vec<Vec<f64>>> {
        Error::check_len(self.model.input_size(), x.len())?;
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (k, prepared) in self.layers.iter().enumerate() {
            let input = outs.last().map_or(x, |v| v.as_slice());
            self.overflow_count += input.iter().filter(|&&v| !prepared.range.contains(v)).count();
            let fresh;
            let programmed = match &prepared.programmed {
                Some(p) => p,
                None => {
                    fresh = ProgrammedMatrix::program(
                        &prepared.quantized,
                        self.tile,
                        &prepared.params,
                        &self.device,
                        &mut self.rng,
                    )?;
                    &fresh
                }
            };
            let obs: Option<&mut dyn crate::crossbar::TileObserver> = match observer {
                Some(ref mut o) => Some(&mut **o),
                None => None,
            };
            let res = programmed.matvec(input, obs)?;
            let layer = &self.model.layers()[k];
            let out: Vec<f64> =
                res.y_tilde.iter().zip(&layer.biases).map(|(y, b)| layer.activation.apply(y + b)).collect();
            outs.push(out);
        }
        Ok(outs)
    }

    pub fn forward_all(&mut self, inputs: &Matrix) -> Result<Vec<Vec<f64>>> {
        inputs.iter_rows().map(|x| self.forward(x)).collect()
    }
}

/// Full-batch XOR net shape: 2-2-1, sigmoid throughout.
pub fn xor_net<R: Rng + ?Sized>(rng: &mut R) -> Mlp {
    Mlp::glorot(&[2, 2, 1], &[Activation::Sigmoid, Activation::Sigmoid], rng).expect("valid shape")
}

/// A trained XOR net and the seed of the attempt that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct XorTraining {
    pub outcome: TrainOutcome,
    pub attempt_seed: u64,
    pub attempts: usize,
}

/// Trains [`xor_net`] with [`TrainConfig::xor`], restarting from fresh
/// initial weights (seeds `seed`, `seed + 1`, ...) until the truth table is
/// reproduced. Roughly half of all initializations stall in the local
/// minimum that fits three rows.
pub fn train_xor(seed: u64, max_attempts: usize) -> Result<XorTraining> {
    let data = crate::dataset::xor_dataset();
    let mut last = None;
    for attempt in 0..max_attempts {
        let attempt_seed = seed.wrapping_add(attempt as u64);
        let init = xor_net(&mut rng::stream(attempt_seed, &[0x0A]));
        let outcome = train(&init, &data, &TrainConfig::xor(attempt_seed))?;
        if accuracy(&outcome.model, &data, InferenceMode::Software)? == 1.0 {
            return Ok(XorTraining { outcome, attempt_seed, attempts: attempt + 1 });
        }
        last = Some(outcome);
    }
    match last {
        Some(_) => Err(Error::invalid("no XOR training attempt reproduced the truth table")),
        None => Err(Error::invalid("max_attempts must be positive")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::xor_dataset;

    fn random_net(sizes: &[usize], hidden: Activation, seed: u64) -> Mlp {
        let mut r = rng::root(seed);
        let mut acts = vec![hidden; sizes.len() - 2];
        acts.push(Activation::Sigmoid);
        let mut m = Mlp::glorot(sizes, &acts, &mut r).unwrap();
        for l in &mut m.layers {
            l.biases.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
        }
        m
    }

    fn random_batch(n: usize, n_in: usize, n_out: usize, seed: u64) -> (Matrix, Matrix) {
        let mut r = rng::root(seed);
        let x = Matrix::from_fn(n, n_in, |_, _| r.random_range(-1.0..1.0));
        let y = Matrix::from_fn(n, n_out, |_, _| f64::from(r.random_bool(0.5)));
        (x, y)
    }

    #[test]
    fn zero_net_outputs_half() {
        let layer = Layer { weights: Matrix::zeros(1, 3), biases: vec![0.0], activation: Activation::Sigmoid };
        let m = Mlp::new(vec![layer]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn relu_identity_layer() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = Mlp::new(vec![Layer { weights: w, biases: vec![0.0; 2], activation: Activation::Relu }]).unwrap();
        assert_eq!(m.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn layer_chain_is_checked() {
        let a = Layer { weights: Matrix::zeros(3, 2), biases: vec![0.0; 3], activation: Activation::Relu };
        let b = Layer { weights: Matrix::zeros(1, 2), biases: vec![0.0], activation: Activation::Sigmoid };
        assert!(Mlp::new(vec![a, b]).is_err());
    }

    #[test]
    fn bce_logit_matches_probability_form() {
        for &(z, y) in &[(0.3f64, 1.0f64), (-2.0, 0.0), (4.0, 0.0), (-1.0, 1.0)] {
            let p = 1.0 / (1.0 + (-z).exp());
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_logit(z, y) - direct).abs() < 1e-12);
        }
        assert!(bce_logit(800.0, 1.0).abs() < 1e-12);
    }

    // central differences on the loss, relative to max(|a| + |n|, 1e-3)
    fn check_gradients(m: &Mlp, x: &Matrix, y: &Matrix) -> f64 {
        let (_, g) = m.gradients(x, y).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..m.layers.len() {
            let n_w = m.layers[k].weights.as_slice().len();
            for i in 0..n_w + m.layers[k].biases.len() {
                let bump = |delta: f64| {
                    let mut p = m.clone();
                    if i < n_w {
                        p.layers[k].weights.as_mut_slice()[i] += delta;
                    } else {
                        p.layers[k].biases[i - n_w] += delta;
                    }
                    p.loss(x, y).unwrap()
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if i < n_w { g.weights[k].as_slice()[i] } else { g.biases[k][i - n_w] };
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (sizes, seed) in [(&[3usize, 3, 2][..], 1u64), (&[5, 4, 3][..], 2)] {
            for act in [Activation::Sigmoid, Activation::Relu] {
                let m = random_net(sizes, act, seed);
                let (x, y) = random_batch(6, sizes[0], sizes[2], seed + 10);
                let worst = check_gradients(&m, &x, &y);
                assert!(worst < 1e-5, "{sizes:?} {act:?}: {worst}");
            }
        }
    }

    #[test]
    fn sparse_inputs_do_not_change_gradients() {
        let m = random_net(&[4, 3, 2], Activation::Relu, 7);
        let x = Matrix::from_rows(&[vec![0.0, 0.5, 0.0, 1.0], vec![0.2, 0.0, 0.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(check_gradients(&m, &x, &y) < 1e-5);
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let m = xor_net(&mut rng::root(1));
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::xor(1) };
        let out = train(&m, &xor_dataset(), &cfg).unwrap();
        assert_eq!(out.model, m);
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let m = xor_net(&mut rng::root(3));
        let cfg = TrainConfig { epochs: 300, ..TrainConfig::xor(3) };
        let a = train(&m, &xor_dataset(), &cfg).unwrap();
        let b = train(&m, &xor_dataset(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_history[299] < a.loss_history[0]);
    }

    #[test]
    fn divergence_is_reported() {
        let m = xor_net(&mut rng::root(3));
        let cfg = TrainConfig { learning_rate: f64::MAX, epochs: 5, ..TrainConfig::xor(3) };
        assert!(matches!(train(&m, &xor_dataset(), &cfg), Err(Error::NumericDivergence { .. })));
    }

    #[test]
    fn xor_training_reaches_full_accuracy() {
        let t = train_xor(0, 10).unwrap();
        assert_eq!(accuracy(&t.outcome.model, &xor_dataset(), InferenceMode::Software).unwrap(), 1.0);
        assert_eq!(t.attempt_seed, t.attempts as u64 - 1);
        assert_eq!(train_xor(0, 10).unwrap(), t);
    }

    #[test]
    fn prediction_rules() {
        assert_eq!(predict(&[0.5]), 1);
        assert_eq!(predict(&[0.49]), 0);
        assert_eq!(predict(&[0.1, 0.7, 0.7]), 1);
        let outs = vec![vec![0.9], vec![0.1]];
        assert_eq!(accuracy_from_outputs(&outs, &[1, 0]), 1.0);
        assert_eq!(accuracy_from_outputs(&outs, &[0, 0]), 0.5);
    }

    fn config_for(m: &Mlp, n_states: usize, probes: &Matrix) -> CrossbarInferenceConfig {
        CrossbarInferenceConfig {
            n_states,
            tile: TileShape::FOUR_BY_FOUR,
            r_min: 9402.0,
            r_max: 9919.5,
            noise: NoiseSpec::NONE,
            systematic_scope: SystematicScope::Array,
            calibration: calibrate(m, probes, InputRange::observed(probes).unwrap()).unwrap(),
        }
    }

    #[test]
    fn many_states_approach_software() {
        let m = random_net(&[6, 5, 3], Activation::Relu, 4);
        let mut r = rng::root(5);
        let probes = Matrix::from_fn(20, 6, |_, _| r.random::<f64>());
        let mut errors = Vec::new();
        for n in [4, 16, 64, 256, 1024, 4096] {
            let cfg = config_for(&m, n, &probes);
            let mut net = CrossbarNet::prepare(&m, &cfg, None).unwrap();
            let mut worst: f64 = 0.0;
            for x in probes.iter_rows() {
                let hw = net.forward_layers(x, None).unwrap();
                let sw = m.forward_layers(x).unwrap();
                // first layer sees identical inputs, so its error obeys the
                // rounding bound sum_j |x_j| d / 2
                let d = net.quantized_layers().next().unwrap().level_set().d();
                let bound = x.iter().map(|v| v.abs()).sum::<f64>() * d / 2.0 + 1e-9;
                assert!(hw[0].iter().zip(&sw[0]).all(|(a, b)| (a - b).abs() <= bound));
                for (a, b) in hw.iter().flatten().zip(sw.iter().flatten()) {
                    worst = worst.max((a - b).abs());
                }
            }
            errors.push(worst);
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        assert!(errors[5] < 1e-3, "{errors:?}");
    }

    #[test]
    fn cached_quantization_reproduces_outputs() {
        let m = random_net(&[3, 4, 2], Activation::Relu, 8);
        let (probes, _) = random_batch(5, 3, 2, 9);
        let cfg = config_for(&m, 4, &probes);
        let mut a = CrossbarNet::prepare(&m, &cfg, None).unwrap();
        let cache = a.quantization_cache();
        let mut b = CrossbarNet::prepare(&m, &cfg, Some(&cache)).unwrap();
        for x in probes.iter_rows() {
            assert_eq!(a.forward(x).unwrap(), b.forward(x).unwrap());
        }
    }

    #[test]
    fn overflow_is_counted_not_clipped() {
        let m = random_net(&[2, 2, 1], Activation::Sigmoid, 2);
        let probes = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let cfg = config_for(&m, 256, &probes);
        let mut net = CrossbarNet::prepare(&m, &cfg, None).unwrap();
        let inside = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(net.overflow_count(), 0);
        let outside = net.forward(&[2.0, 1.0]).unwrap();
        assert_eq!(net.overflow_count(), 1);
        let sw = m.forward(&[2.0, 1.0]).unwrap();
        assert!((outside[0] - sw[0]).abs() < 1e-2 && outside != inside);
    }

    #[test]
    fn noisy_inference_is_seeded() {
        let m = random_net(&[4, 4, 2], Activation::Relu, 3);
        let (probes, _) = random_batch(4, 4, 2, 3);
        let mut cfg = config_for(&m, 4, &probes);
        cfg.noise = NoiseSpec::new(30.0, 30.0, 77).unwrap();
        let run = || {
            let mut net = CrossbarNet::prepare(&m, &cfg, None).unwrap();
            net.forward_all(&probes).unwrap()
        };
        assert_eq!(run(), run());
    }
}
