//! End-to-end XOR and MNIST workflows shared by the CLI and the acceptance
//! suite.

use crossbar_core::crossbar::{tile_count, SystematicScope, TileShape};
use crossbar_core::dataset::{xor_dataset, Dataset};
use crossbar_core::nn::{
    accuracy_from_outputs, calibrate, train, train_xor, Activation, CrossbarInferenceConfig, CrossbarNet, InputRange,
    Mlp, TrainConfig, XorTraining,
};
use crossbar_core::{pca, rng, Matrix};
use serde::Serialize;

use crate::error::Result;
use crate::model_file::ModelFile;
use crate::profile::DeviceProfile;

/// Upper bound on XOR training restarts.
pub const XOR_MAX_ATTEMPTS: usize = 32;

/// Crossbar settings for a model file under a device profile.
pub fn inference_config(file: &ModelFile, profile: &DeviceProfile, tile: TileShape) -> Result<CrossbarInferenceConfig> {
    let calibration = match &file.calibration {
        Some(c) => c.clone(),
        None => vec![InputRange::UNIT; file.model.layers().len()],
    };
    Ok(CrossbarInferenceConfig {
        n_states: profile.n_states,
        tile,
        r_min: profile.r_min_ohm,
        r_max: profile.r_max_ohm,
        noise: profile.noise()?,
        systematic_scope: SystematicScope::Array,
        calibration,
    })
}

/// The XOR net lives on a 2x2 array.
pub const XOR_TILE: TileShape = TileShape { rows: 2, cols: 2 };

pub fn train_xor_model(seed: u64) -> Result<(ModelFile, XorTraining)> {
    let t = train_xor(seed, XOR_MAX_ATTEMPTS)?;
    let data = xor_dataset();
    let calibration = calibrate(&t.outcome.model, data.inputs(), InputRange::UNIT)?;
    let file = ModelFile { calibration: Some(calibration), ..ModelFile::new(t.outcome.model.clone()) };
    Ok((file, t))
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapPoint {
    pub x1: f64,
    pub x2: f64,
    pub software: f64,
    pub crossbar: f64,
}

impl HeatmapPoint {
    pub fn abs_error(&self) -> f64 {
        (self.software - self.crossbar).abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Heatmap {
    pub resolution: usize,
    /// Row-major over `x2` then `x1`, both from 0 to 1.
    pub points: Vec<HeatmapPoint>,
}

impl Heatmap {
    pub fn max_error(&self) -> &HeatmapPoint {
        self.points.iter().max_by(|a, b| a.abs_error().total_cmp(&b.abs_error())).expect("non-empty grid")
    }

    /// Errors at (0,0), (0,1), (1,0), (1,1).
    pub fn corner_errors(&self) -> [f64; 4] {
        let r = self.resolution;
        let at = |i1: usize, i2: usize| self.points[i2 * (r + 1) + i1].abs_error();
        [at(0, 0), at(0, r), at(r, 0), at(r, r)]
    }

    pub fn grid(&self) -> Vec<Vec<f64>> {
        self.points.chunks(self.resolution + 1).map(|row| row.iter().map(HeatmapPoint::abs_error).collect()).collect()
    }
}

/// Software and crossbar outputs on a `(resolution + 1)^2` grid over the
/// unit square.
pub fn xor_heatmap(model: &Mlp, cfg: &CrossbarInferenceConfig, resolution: usize) -> Result<Heatmap> {
    if model.input_size() != 2 || model.output_size() != 1 {
        return Err(crossbar_core::Error::DimensionMismatch { expected: 2, actual: model.input_size() }.into());
    }
    let resolution = resolution.max(1);
    let mut net = CrossbarNet::prepare(model, cfg, None)?;
    let mut points = Vec::with_capacity((resolution + 1) * (resolution + 1));
    for i2 in 0..=resolution {
        for i1 in 0..=resolution {
            let x = [i1 as f64 / resolution as f64, i2 as f64 / resolution as f64];
            let software = model.forward(&x)?[0];
            let crossbar = net.forward(&x)?[0];
            points.push(HeatmapPoint { x1: x[0], x2: x[1], software, crossbar });
        }
    }
    Ok(Heatmap { resolution, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MnistOptions {
    pub seed: u64,
    pub epochs: usize,
    pub hidden: usize,
    /// Keep enough principal components for this variance fraction.
    pub pca_variance: Option<f64>,
}

impl MnistOptions {
    pub fn new(seed: u64, pca_variance: Option<f64>) -> Self {
        Self { seed, epochs: TrainConfig::mnist(seed).epochs, hidden: 128, pca_variance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MnistTraining {
    pub pca_k: Option<usize>,
    pub loss_history: Vec<f64>,
    pub software_test_accuracy: f64,
}

/// Trains the 784-128-10 net (or k-128-10 after PCA) and calibrates it on
/// the training images.
pub fn train_mnist(train_set: &Dataset, test_set: &Dataset, opts: &MnistOptions) -> Result<(ModelFile, MnistTraining)> {
    let pca_model = match opts.pca_variance {
        Some(v) => Some(pca::fit(train_set.inputs(), v)?),
        None => None,
    };
    let project = |d: &Dataset| -> Result<Dataset> {
        Ok(match &pca_model {
            Some(p) => d.with_inputs(p.transform_matrix(d.inputs())?)?,
            None => d.clone(),
        })
    };
    let train_in = project(train_set)?;
    let test_in = project(test_set)?;
    let init = Mlp::glorot(
        &[train_in.n_features(), opts.hidden, 10],
        &[Activation::Relu, Activation::Sigmoid],
        &mut rng::stream(opts.seed, &[0x3A]),
    )?;
    let cfg = TrainConfig { epochs: opts.epochs, ..TrainConfig::mnist(opts.seed) };
    let outcome = train(&init, &train_in, &cfg)?;
    let first = if pca_model.is_some() { InputRange::observed(train_in.inputs())? } else { InputRange::UNIT };
    let calibration = calibrate(&outcome.model, train_in.inputs(), first)?;
    let software_test_accuracy = software_accuracy(&outcome.model, &test_in)?;
    let report = MnistTraining {
        pca_k: pca_model.as_ref().map(|p| p.k()),
        loss_history: outcome.loss_history,
        software_test_accuracy,
    };
    let file = ModelFile { pca: pca_model, calibration: Some(calibration), ..ModelFile::new(outcome.model) };
    Ok((file, report))
}

fn software_accuracy(model: &Mlp, data: &Dataset) -> Result<f64> {
    let outputs = data.inputs().iter_rows().map(|x| model.forward(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(accuracy_from_outputs(&outputs, data.labels()))
}

/// Raw inputs passed through the file's projection, if any.
pub fn project_inputs(file: &ModelFile, inputs: &Matrix) -> Result<Matrix> {
    Ok(match &file.pca {
        Some(p) => p.transform_matrix(inputs)?,
        None => inputs.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub samples: usize,
    pub software_accuracy: f64,
    pub crossbar_accuracy: f64,
    pub sub_ops_per_layer: Vec<usize>,
    pub calibration_overflows: usize,
}

impl Evaluation {
    /// Percentage-point drop from software to crossbar on the same samples.
    pub fn drop_points(&self) -> f64 {
        100.0 * (self.software_accuracy - self.crossbar_accuracy)
    }
}

/// Software and crossbar accuracy on the same (raw-input) samples.
pub fn evaluate(file: &ModelFile, data: &Dataset, cfg: &CrossbarInferenceConfig) -> Result<Evaluation> {
    let inputs = project_inputs(file, data.inputs())?;
    let projected = data.with_inputs(inputs)?;
    let software_accuracy = software_accuracy(&file.model, &projected)?;
    let mut net = CrossbarNet::prepare(&file.model, cfg, file.quantization.as_ref())?;
    let outputs = net.forward_all(projected.inputs())?;
    Ok(Evaluation {
        samples: data.len(),
        software_accuracy,
        crossbar_accuracy: accuracy_from_outputs(&outputs, data.labels()),
        sub_ops_per_layer: net.sub_op_counts(),
        calibration_overflows: net.overflow_count(),
    })
}

/// Sub-operations of the first layer of a `hidden x inputs` matrix on
/// 4x4 tiles.
pub fn first_layer_sub_ops(hidden: usize, inputs: usize) -> usize {
    tile_count(hidden, inputs, 4, 4)
}
