//! Seeded Monte-Carlo studies of crossbar MVM error.
//!
//! Every study draws random `W ~ Normal(0, 1)` and `x ~ Uniform(0, 1)`,
//! quantizes `W`, runs the product through the simulated array and scores
//! the retrieved result against the full-precision `W x`. Trial `t` always
//! uses the stream `(seed, t)` (or `(seed, repetition, t)`), so every
//! configuration of a sweep sees the same matrices and inputs and the output
//! does not depend on how trials are scheduled.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::crossbar::{crossbar_matvec, rmse, Device, InputEncoding, SystematicScope, TileShape};
use crate::device::{ideal_ladder, NoiseSpec};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::quantizer::{quantize, QuantizedMatrix};
use crate::rng;

/// Resistance range of the four-state reference device, ohms.
pub const REFERENCE_R_MIN: f64 = 9402.0;
pub const REFERENCE_R_MAX: f64 = 9919.5;

/// Runs independent trials; implementations may parallelize but must
/// return results in index order.
pub trait TrialRunner {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs trials one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialRunner for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// One randomized MVM configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMvmSpec {
    pub rows: usize,
    pub cols: usize,
    pub n_states: usize,
    pub noise: NoiseSpec,
    pub trials: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub tile: TileShape,
    pub systematic_scope: SystematicScope,
}

impl RandomMvmSpec {
    /// `rows x cols` products on a 4x4 array spanning the reference range.
    pub fn new(rows: usize, cols: usize, n_states: usize, noise: NoiseSpec, trials: usize) -> Self {
        Self {
            rows,
            cols,
            n_states,
            noise,
            trials,
            r_min: REFERENCE_R_MIN,
            r_max: REFERENCE_R_MAX,
            tile: TileShape::FOUR_BY_FOUR,
            systematic_scope: SystematicScope::Array,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("a study needs at least one trial"));
        }
        if self.rows == 0 || self.cols == 0 || self.n_states == 0 {
            return Err(Error::invalid("rows, cols and n_states must be positive"));
        }
        Ok(())
    }
}

/// Random problem instance drawn from a trial stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MvmDraw {
    pub weights: Matrix,
    pub x: Vec<f64>,
}

impl MvmDraw {
    pub fn sample<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let weights = Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
        let x = (0..cols).map(|_| rng.random::<f64>()).collect();
        Self { weights, x }
    }
}

/// RMSE of one crossbar product against the full-precision result.
///
/// Draw order on `rng`: weights, inputs, systematic offsets, cell offsets.
pub fn mvm_rmse_trial<R: Rng + ?Sized>(spec: &RandomMvmSpec, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    let draw = MvmDraw::sample(spec.rows, spec.cols, rng);
    rmse_for_draw(spec, &draw, rng)
}

/// Same as [`mvm_rmse_trial`] on a given draw; `rng` then only feeds the
/// device noise.
pub fn rmse_for_draw<R: Rng + ?Sized>(spec: &RandomMvmSpec, draw: &MvmDraw, rng: &mut R) -> Result<f64> {
    let prepared = PreparedDraw::new(draw, spec.n_states)?;
    prepared.rmse(spec, rng)
}

/// A draw with its exact product and quantized weights, reusable across
/// noise configurations.
struct PreparedDraw<'a> {
    draw: &'a MvmDraw,
    truth: Vec<f64>,
    quantized: QuantizedMatrix,
}

impl<'a> PreparedDraw<'a> {
    fn new(draw: &'a MvmDraw, n_states: usize) -> Result<Self> {
        Ok(Self { draw, truth: draw.weights.matvec(&draw.x)?, quantized: quantize(&draw.weights, n_states)? })
    }

    fn rmse<R: Rng + ?Sized>(&self, spec: &RandomMvmSpec, rng: &mut R) -> Result<f64> {
        let ladder = ideal_ladder(spec.n_states, spec.r_min, spec.r_max)?.apply_systematic(&spec.noise, rng);
        let device = Device { ladder, noise: spec.noise, systematic_scope: spec.systematic_scope };
        let input = InputEncoding::UNIT_TO_HALF_MILLIAMP;
        let res = crossbar_matvec(&self.quantized, &self.draw.x, spec.tile, &device, &input, rng, None)?;
        Ok(rmse(&res.y_tilde, &self.truth))
    }
}

/// Mean and spread of a set of trial RMSEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_dev: f64,
    pub trials: usize,
}

impl Summary {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, std_dev: math::sqrt(var), trials: n }
    }

    pub fn standard_error(&self) -> f64 {
        self.std_dev / math::sqrt(self.trials as f64)
    }
}

fn run_trials<T: TrialRunner>(spec: &RandomMvmSpec, seed: u64, tag: u64, runner: &T) -> Result<Summary> {
    spec.validate()?;
    let samples: Result<Vec<f64>> =
        runner.map(spec.trials, |t| mvm_rmse_trial(spec, &mut rng::stream(seed, &[tag, t as u64]))).into_iter().collect();
    Ok(Summary::from_samples(&samples?))
}

// Stream tags. Quantization and noise sweeps share a tag so their common
// configuration (N = 4, sigma = 0) sees identical draws.
const TAG_MVM: u64 = 1;
const TAG_NOPT: u64 = 2;
const TAG_SCALING: u64 = 3;

// ---------------------------------------------------------------------------
// Fits

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FitModel {
    /// `y = slope * x + intercept`, with OLS standard errors.
    Linear { slope: f64, intercept: f64, slope_se: f64, intercept_se: f64 },
    /// `y = c / x`.
    InverseN { c: f64 },
    /// `y = c * x^exponent`, fitted in log-log space.
    PowerLaw { c: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub model: FitModel,
    pub r_squared: f64,
}

fn r_squared(ys: &[f64], predicted: impl Iterator<Item = f64>) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = ys.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Ordinary least squares line.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    Error::check_len(xs.len(), ys.len())?;
    let n = xs.len();
    if n < 2 {
        return Err(Error::invalid("a line needs at least two points"));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("x values are all equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let s2 = if n > 2 { ss_res / (n - 2) as f64 } else { 0.0 };
    let slope_se = math::sqrt(s2 / sxx);
    let intercept_se = math::sqrt(s2 * (1.0 / n as f64 + mx * mx / sxx));
    let r2 = r_squared(ys, xs.iter().map(|x| intercept + slope * x));
    Ok(FitResult { model: FitModel::Linear { slope, intercept, slope_se, intercept_se }, r_squared: r2 })
}

/// Least-squares `y = c / x`.
pub fn fit_inverse(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    Error::check_len(xs.len(), ys.len())?;
    if xs.is_empty() || xs.contains(&0.0) {
        return Err(Error::invalid("inverse fit needs non-zero x values"));
    }
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| y / x).sum();
    let den: f64 = xs.iter().map(|x| 1.0 / (x * x)).sum();
    let c = num / den;
    let r2 = r_squared(ys, xs.iter().map(|x| c / x));
    Ok(FitResult { model: FitModel::InverseN { c }, r_squared: r2 })
}

/// `y = c x^p` by a line through `(ln x, ln y)`; `r_squared` is in log space.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    Error::check_len(xs.len(), ys.len())?;
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|&x| math::ln(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| math::ln(y)).collect();
    let line = fit_linear(&lx, &ly)?;
    let FitModel::Linear { slope, intercept, .. } = line.model else { unreachable!() };
    Ok(FitResult { model: FitModel::PowerLaw { c: math::exp(intercept), exponent: slope }, r_squared: line.r_squared })
}

// ---------------------------------------------------------------------------
// Quantization sweep

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationRow {
    pub n_states: usize,
    pub rmse: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSweep {
    pub rows: Vec<QuantizationRow>,
    pub fit: FitResult,
}

/// Noise-free 4x4 products for each `N`; fits `rmse = c / N`.
pub fn quantization_sweep<T: TrialRunner>(
    n_values: &[usize],
    trials: usize,
    seed: u64,
    runner: &T,
) -> Result<QuantizationSweep> {
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let spec = RandomMvmSpec::new(4, 4, n, NoiseSpec::NONE, trials);
        rows.push(QuantizationRow { n_states: n, rmse: run_trials(&spec, seed, TAG_MVM, runner)? });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n_states as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rmse.mean).collect();
    let fit = fit_inverse(&xs, &ys)?;
    Ok(QuantizationSweep { rows, fit })
}

// ---------------------------------------------------------------------------
// Noise sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Systematic,
    CellSpecific,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Systematic => "systematic",
            NoiseKind::CellSpecific => "cell-specific",
        }
    }

    pub fn noise(&self, sigma: f64, seed: u64) -> Result<NoiseSpec> {
        match self {
            NoiseKind::Systematic => NoiseSpec::new(sigma, 0.0, seed),
            NoiseKind::CellSpecific => NoiseSpec::new(0.0, sigma, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub kind: NoiseKind,
    pub sigma_ohm: f64,
    pub rmse: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub kind: NoiseKind,
    pub rows: Vec<NoiseRow>,
    pub fit: FitResult,
}

/// 4x4 products with four states under one noise source; fits a line.
pub fn noise_sweep<T: TrialRunner>(
    kind: NoiseKind,
    sigma_values: &[f64],
    trials: usize,
    seed: u64,
    runner: &T,
) -> Result<NoiseSweep> {
    if sigma_values.is_empty() {
        return Err(Error::invalid("noise sweep needs at least one sigma"));
    }
    let specs: Vec<RandomMvmSpec> = sigma_values
        .iter()
        .map(|&sigma| Ok(RandomMvmSpec::new(4, 4, 4, kind.noise(sigma, seed)?, trials)))
        .collect::<Result<_>>()?;
    specs[0].validate()?;
    // identical to running each sigma separately: the noise stream is
    // cloned from the same post-draw state for every sigma
    let per_trial: Vec<Result<Vec<f64>>> = runner.map(trials, |t| {
        let mut rng = rng::stream(seed, &[TAG_MVM, t as u64]);
        let draw = MvmDraw::sample(4, 4, &mut rng);
        let prepared = PreparedDraw::new(&draw, 4)?;
        specs.iter().map(|spec| prepared.rmse(spec, &mut rng.clone())).collect()
    });
    let per_trial: Vec<Vec<f64>> = per_trial.into_iter().collect::<Result<_>>()?;
    let rows: Vec<NoiseRow> = sigma_values
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let samples: Vec<f64> = per_trial.iter().map(|t| t[i]).collect();
            NoiseRow { kind, sigma_ohm: sigma, rmse: Summary::from_samples(&samples) }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.sigma_ohm).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rmse.mean).collect();
    let fit = fit_linear(&xs, &ys)?;
    Ok(NoiseSweep { kind, rows, fit })
}

// ---------------------------------------------------------------------------
// Optimal number of states

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoptConfig {
    pub sigma_nl: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub repetitions: usize,
    pub trials_per_point: usize,
}

impl Default for NoptConfig {
    fn default() -> Self {
        Self { sigma_nl: 50.0, n_min: 2, n_max: 16, repetitions: 200, trials_per_point: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoptHistogramRow {
    pub sigma_perp_ohm: f64,
    pub n_states: usize,
    /// Fraction of repetitions whose best `N` was `n_states`.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoptMedianRow {
    pub sigma_perp_ohm: f64,
    pub median_n_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoptStudy {
    pub config: NoptConfig,
    pub histogram: Vec<NoptHistogramRow>,
    pub medians: Vec<NoptMedianRow>,
    /// `n_opt[s][r]`: best `N` of repetition `r` at the `s`-th sigma.
    pub n_opt: Vec<Vec<usize>>,
}

/// For each repetition and each `sigma_perp`, the `N` in `[n_min, n_max]`
/// with the lowest mean trial RMSE on a 4x4 array over the reference range.
pub fn nopt_study<T: TrialRunner>(
    config: &NoptConfig,
    sigma_perp_values: &[f64],
    seed: u64,
    runner: &T,
) -> Result<NoptStudy> {
    if config.n_min == 0 || config.n_min > config.n_max || config.repetitions == 0 || config.trials_per_point == 0 {
        return Err(Error::invalid("N range and repetition counts must be non-empty"));
    }
    let n_range: Vec<usize> = (config.n_min..=config.n_max).collect();
    let noise_specs: Vec<RandomMvmSpec> = sigma_perp_values
        .iter()
        .map(|&sigma_perp| Ok(RandomMvmSpec::new(4, 4, config.n_min, NoiseSpec::new(config.sigma_nl, sigma_perp, seed)?, 1)))
        .collect::<Result<_>>()?;
    let per_rep: Vec<Result<Vec<usize>>> = runner.map(config.repetitions, |rep| {
        // sums[s][k]: summed RMSE at sigma s and N = n_range[k]
        let mut sums = vec![vec![0.0; n_range.len()]; sigma_perp_values.len()];
        for t in 0..config.trials_per_point {
            let path = [TAG_NOPT, rep as u64, t as u64];
            let draw = MvmDraw::sample(4, 4, &mut rng::stream(seed, &path));
            // the noise stream is shared across sigma and N for this trial
            let noise_rng = rng::stream(seed, &[TAG_NOPT, rep as u64, t as u64, 1]);
            for (k, &n) in n_range.iter().enumerate() {
                let prepared = PreparedDraw::new(&draw, n)?;
                for (s, spec) in noise_specs.iter().enumerate() {
                    let spec = RandomMvmSpec { n_states: n, ..*spec };
                    sums[s][k] += prepared.rmse(&spec, &mut noise_rng.clone())?;
                }
            }
        }
        Ok(sums.iter().map(|row| n_range[argmin(row)]).collect())
    });
    let per_rep: Vec<Vec<usize>> = per_rep.into_iter().collect::<Result<_>>()?;

    let mut n_opt = vec![Vec::with_capacity(config.repetitions); sigma_perp_values.len()];
    for rep in &per_rep {
        for (s, &n) in rep.iter().enumerate() {
            n_opt[s].push(n);
        }
    }
    let mut histogram = Vec::new();
    let mut medians = Vec::new();
    for (s, &sigma) in sigma_perp_values.iter().enumerate() {
        for &n in &n_range {
            let hits = n_opt[s].iter().filter(|&&v| v == n).count();
            histogram.push(NoptHistogramRow {
                sigma_perp_ohm: sigma,
                n_states: n,
                fraction: hits as f64 / config.repetitions as f64,
            });
        }
        medians.push(NoptMedianRow { sigma_perp_ohm: sigma, median_n_opt: median(&n_opt[s]) });
    }
    Ok(NoptStudy { config: *config, histogram, medians, n_opt })
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

fn median(xs: &[usize]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
    }
}

// ---------------------------------------------------------------------------
// Scaling with array dimensions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingAxis {
    Rows,
    Cols,
}

impl ScalingAxis {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingAxis::Rows => "rows",
            ScalingAxis::Cols => "cols",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub axis: ScalingAxis,
    pub size: usize,
    pub rmse: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweep {
    pub axis: ScalingAxis,
    pub noise: NoiseSpec,
    pub systematic_scope: SystematicScope,
    pub rows: Vec<ScalingRow>,
    /// Power law over all sizes.
    pub power_law: FitResult,
    /// Line over sizes at or beyond the transient (`size >= 16`), when at
    /// least two such sizes exist.
    pub post_transient_linear: Option<FitResult>,
}

/// Smallest size counted as past the transient regime.
pub const SCALING_TRANSIENT: usize = 16;

/// Grows one matrix dimension with the other fixed, multiplexing the
/// `m x n` product onto a four-state 4x4 array.
#[allow(clippy::too_many_arguments)]
pub fn scaling_sweep<T: TrialRunner>(
    axis: ScalingAxis,
    sizes: &[usize],
    fixed_other: usize,
    noise: NoiseSpec,
    scope: SystematicScope,
    trials: usize,
    seed: u64,
    runner: &T,
) -> Result<ScalingSweep> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let (m, n) = match axis {
            ScalingAxis::Rows => (size, fixed_other),
            ScalingAxis::Cols => (fixed_other, size),
        };
        let spec = RandomMvmSpec { systematic_scope: scope, ..RandomMvmSpec::new(m, n, 4, noise, trials) };
        rows.push(ScalingRow { axis, size, rmse: run_trials(&spec, seed, TAG_SCALING, runner)? });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rmse.mean).collect();
    let power_law = fit_power_law(&xs, &ys)?;
    let (tx, ty): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(&ys).filter(|(x, _)| **x >= SCALING_TRANSIENT as f64).map(|(x, y)| (*x, *y)).unzip();
    let post_transient_linear = if tx.len() >= 2 { Some(fit_linear(&tx, &ty)?) } else { None };
    Ok(ScalingSweep { axis, noise, systematic_scope: scope, rows, power_law, post_transient_linear })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{LevelSet, QuantizedMatrix};

    #[test]
    fn exactly_representable_weights_have_no_error() {
        let ls = LevelSet::new(-1.0, 0.5, 4).unwrap();
        let mut r = rng::root(3);
        let assignment: Vec<usize> = (0..16).map(|i| (i * 7 + 1) % 4).collect();
        let q = QuantizedMatrix::from_parts(4, 4, ls, assignment).unwrap();
        // every level used, so quantizing the values returns them unchanged
        let draw = MvmDraw { weights: q.values().clone(), x: (0..4).map(|_| r.random()).collect() };
        let spec = RandomMvmSpec::new(4, 4, 4, NoiseSpec::NONE, 1);
        assert!(rmse_for_draw(&spec, &draw, &mut r).unwrap() <= 1e-9);
    }

    #[test]
    fn single_state_matches_mean_replacement() {
        let spec = RandomMvmSpec::new(4, 4, 1, NoiseSpec::NONE, 1);
        for seed in 0..20 {
            let mut a = rng::root(seed);
            let got = mvm_rmse_trial(&spec, &mut a).unwrap();
            // independent route: redraw the same instance, replace W by its mean
            let mut b = rng::root(seed);
            let draw = MvmDraw::sample(4, 4, &mut b);
            let mean = draw.weights.as_slice().iter().sum::<f64>() / 16.0;
            let truth = draw.weights.matvec(&draw.x).unwrap();
            let xsum: f64 = draw.x.iter().sum();
            let approx: Vec<f64> = (0..4).map(|_| mean * xsum).collect();
            let expected = rmse(&approx, &truth);
            assert!((got - expected).abs() < 1e-9 * (1.0 + expected), "{got} vs {expected}");
        }
    }

    #[test]
    fn fits_recover_known_curves() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let f = fit_linear(&xs, &xs.map(|x| 3.0 * x - 1.0)).unwrap();
        let FitModel::Linear { slope, intercept, .. } = f.model else { panic!() };
        assert!((slope - 3.0).abs() < 1e-12 && (intercept + 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_inverse(&xs, &xs.map(|x| 0.7 / x)).unwrap();
        assert!(matches!(f.model, FitModel::InverseN { c } if (c - 0.7).abs() < 1e-12));
        let f = fit_power_law(&xs, &xs.map(|x| 2.0 * libm::sqrt(x))).unwrap();
        let FitModel::PowerLaw { c, exponent } = f.model else { panic!() };
        assert!((c - 2.0).abs() < 1e-12 && (exponent - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sweeps_are_reproducible() {
        let a = quantization_sweep(&[1, 2, 4], 20, 9, &Sequential).unwrap();
        let b = quantization_sweep(&[1, 2, 4], 20, 9, &Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.rmse.mean > 0.0));
    }

    #[test]
    fn noiseless_nopt_prefers_most_states() {
        let cfg = NoptConfig { sigma_nl: 0.0, n_min: 2, n_max: 16, repetitions: 3, trials_per_point: 30 };
        let s = nopt_study(&cfg, &[0.0], 5, &Sequential).unwrap();
        assert!(s.n_opt[0].iter().all(|&n| n == 16), "{:?}", s.n_opt);
    }

    #[test]
    fn noise_sweep_matches_independent_runs() {
        let sigmas = [0.0, 80.0];
        for kind in [NoiseKind::Systematic, NoiseKind::CellSpecific] {
            let sweep = noise_sweep(kind, &sigmas, 12, 4, &Sequential).unwrap();
            for (row, &sigma) in sweep.rows.iter().zip(&sigmas) {
                let spec = RandomMvmSpec::new(4, 4, 4, kind.noise(sigma, 4).unwrap(), 12);
                assert_eq!(row.rmse, run_trials(&spec, 4, TAG_MVM, &Sequential).unwrap());
            }
        }
    }

    #[test]
    fn zero_sigma_noise_row_equals_quantization_row() {
        let q = quantization_sweep(&[4], 15, 8, &Sequential).unwrap();
        let n = noise_sweep(NoiseKind::Systematic, &[0.0, 10.0], 15, 8, &Sequential).unwrap();
        assert_eq!(q.rows[0].rmse, n.rows[0].rmse);
    }

    #[test]
    fn median_handles_even_counts() {
        assert_eq!(median(&[2, 4, 3]), 3.0);
        assert_eq!(median(&[2, 5, 3, 4]), 3.5);
    }
}
