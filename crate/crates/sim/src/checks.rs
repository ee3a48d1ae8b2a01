//! Pass/fail verdicts for the reference behaviours of the simulator. Used
//! by `--check` and by the acceptance suite.

use std::fmt::Write;
use std::path::Path;

use crossbar_core::crossbar::{
    encode_input, program_tile, retrieve, simulate_tile, tile_count, Block, Device, EncodingParams, InputEncoding,
    ResistanceMap, SystematicScope, TileShape,
};
use crossbar_core::dataset::xor_dataset;
use crossbar_core::device::{ideal_ladder, NoiseSpec};
use crossbar_core::experiments::{
    noise_sweep, nopt_study, quantization_sweep, scaling_sweep, FitModel, NoiseKind, NoiseSweep, NoptConfig, NoptStudy,
    QuantizationSweep, ScalingAxis, ScalingSweep, TrialRunner,
};
use crossbar_core::nn::{accuracy, Activation, CrossbarNet, InferenceMode, Mlp};
use crossbar_core::quantizer::{brute_force_oracle, fit_levels, quantize, sse, LevelSet, QuantizedMatrix};
use crossbar_core::{rng, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::idx::{load_mnist_split, Split};
use crate::pipelines::{
    evaluate, inference_config, train_mnist, train_xor_model, xor_heatmap, Evaluation, Heatmap, MnistOptions, XOR_TILE,
};
use crate::profile::DeviceProfile;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(criterion: u8, name: &'static str, failures: Vec<String>, summary: String) -> Self {
        let passed = failures.is_empty();
        let detail = if passed { summary } else { format!("{summary}; failed: {}", failures.join("; ")) };
        Self { criterion, name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("[{}] criterion {}: {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.criterion, self.name, self.detail)
    }
}

fn require(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

// Sweep grids.
pub const QUANT_GRID: [usize; 12] = [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64];
pub const NOISE_GRID: [f64; 6] = [0.0, 25.0, 50.0, 100.0, 150.0, 200.0];
pub const SCALING_GRID: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];
pub const NOPT_SIGMAS: [f64; 5] = [0.0, 50.0, 100.0, 150.0, 200.0];

// ---------------------------------------------------------------------------

/// Noiseless program, simulate and retrieve on random shapes, encodings and
/// level sets; each output must match `A x` to `1e-9` relative to the
/// magnitude `sum_n |A_mn x_n|` of its row.
pub fn exact_retrieval(configs: usize, seed: u64) -> Verdict {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for c in 0..configs {
        let r = &mut rng::stream(seed, &[c as u64]);
        let (m, n) = (r.random_range(1..=16), r.random_range(1..=16));
        let n_states = r.random_range(1..=16);
        let d = if n_states == 1 { 0.0 } else { r.random_range(0.01..2.0) };
        let ls = LevelSet::new(r.random_range(-5.0..5.0), d, n_states).expect("valid levels");
        let assignment = (0..m * n).map(|_| r.random_range(0..n_states)).collect();
        let a = QuantizedMatrix::from_parts(m, n, ls, assignment).expect("valid assignment");
        let sign = |r: &mut rng::Stream| if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let input = InputEncoding { a_i: sign(r) * r.random_range(1e-5..1e-2), b_i: r.random_range(-1e-3..1e-3) };
        let map = ResistanceMap { a_r: sign(r) * r.random_range(1.0..1e3), b_r: r.random_range(1e3..2e4), degenerate: false };
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let params = EncodingParams::new(input, map).expect("nonzero scales");
        let device = Device::ideal(ideal_ladder(n_states, 9402.0, 9919.5).expect("ladder"));
        let shape = TileShape::new(m, n).expect("shape");
        let tile = program_tile(&a, Block { row0: 0, col0: 0, shape }, &params, &device, r).expect("program");
        let currents = encode_input(&x, &input);
        let v = simulate_tile(&tile, &currents).expect("simulate");
        let y = retrieve(&v, &currents, a.row_sums(), &params).expect("retrieve");
        for (row, &got) in y.iter().enumerate() {
            let vals = a.values().row(row);
            let exact: f64 = vals.iter().zip(&x).map(|(w, x)| w * x).sum();
            let scale: f64 = vals.iter().zip(&x).map(|(w, x)| (w * x).abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            let rel = (got - exact).abs() / scale;
            worst = worst.max(rel);
            if rel > 1e-9 && failures.len() < 3 {
                failures.push(format!("config {c} row {row}: relative error {rel:e}"));
            }
        }
    }
    Verdict::new(1, "exact retrieval", failures, format!("{configs} configurations, worst relative error {worst:.2e}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct XorOutcome {
    pub software: [f64; 4],
    pub crossbar: [f64; 4],
    pub training_accuracy: f64,
    pub heatmap_corner_errors: [f64; 4],
}

pub fn xor(o: &XorOutcome) -> Verdict {
    let mut f = Vec::new();
    require(&mut f, o.training_accuracy == 1.0, || format!("training accuracy {}", o.training_accuracy));
    let pattern = [false, true, true, false];
    for (i, (&y, &high)) in o.crossbar.iter().zip(&pattern).enumerate() {
        let ok = if high { y >= 0.98 } else { y <= 0.02 };
        require(&mut f, ok, || format!("crossbar output {i} = {y:.4}"));
    }
    for (i, &e) in o.heatmap_corner_errors.iter().enumerate() {
        require(&mut f, e <= 0.01, || format!("corner {i} error {e:.4}"));
    }
    let fmt = |v: &[f64; 4]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    let worst_corner = o.heatmap_corner_errors.iter().copied().fold(0.0, f64::max);
    Verdict::new(
        2,
        "XOR reproduction",
        f,
        format!("software ({}), crossbar ({}), worst corner error {worst_corner:.2e}", fmt(&o.software), fmt(&o.crossbar)),
    )
}

/// XOR outcome from a trained net and its heatmap.
pub fn xor_outcome(model: &Mlp, crossbar: [f64; 4], training_accuracy: f64, heatmap: &Heatmap) -> XorOutcome {
    let inputs = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let software = inputs.map(|x| model.forward(&x).expect("2-input net")[0]);
    XorOutcome { software, crossbar, training_accuracy, heatmap_corner_errors: heatmap.corner_errors() }
}

pub fn tile_arithmetic() -> Verdict {
    let full = tile_count(128, 784, 4, 4);
    let reduced = tile_count(128, 87, 4, 4);
    let reduction = 100.0 * (1.0 - reduced as f64 / full as f64);
    let mut f = Vec::new();
    require(&mut f, full == 6272, || format!("full count {full}"));
    require(&mut f, reduced == 704, || format!("reduced count {reduced}"));
    require(&mut f, (reduction - 88.69).abs() <= 0.01, || format!("reduction {reduction:.4}% is not 88.69% +/- 0.01%"));
    Verdict::new(3, "tile arithmetic", f, format!("{full} and {reduced} sub-operations, reduction {reduction:.4}%"))
}

#[derive(Debug, Clone, Serialize)]
pub struct MnistOutcome {
    pub software_full_test: f64,
    pub plain: Evaluation,
    pub pca_k: usize,
    pub pca_software_full_test: f64,
    pub pca: Evaluation,
}

pub fn mnist(o: &MnistOutcome) -> Verdict {
    let mut f = Vec::new();
    let (d_plain, d_pca) = (o.plain.drop_points(), o.pca.drop_points());
    require(&mut f, o.software_full_test >= 0.97, || format!("software accuracy {:.4}", o.software_full_test));
    require(&mut f, d_plain <= 4.0, || format!("crossbar drop {d_plain:.2} points"));
    require(&mut f, (84..=90).contains(&o.pca_k), || format!("PCA k = {}", o.pca_k));
    require(&mut f, o.pca_software_full_test >= 0.975, || format!("PCA software accuracy {:.4}", o.pca_software_full_test));
    require(&mut f, d_pca <= 3.5, || format!("PCA crossbar drop {d_pca:.2} points"));
    require(&mut f, d_pca < d_plain, || format!("PCA drop {d_pca:.2} not below plain drop {d_plain:.2}"));
    Verdict::new(
        4,
        "MNIST bands",
        f,
        format!(
            "software {:.2}%, crossbar {:.2}% (drop {d_plain:.2} on {} samples); PCA k={} software {:.2}%, crossbar {:.2}% (drop {d_pca:.2}); first-layer sub-ops {} / {}",
            100.0 * o.software_full_test,
            100.0 * o.plain.crossbar_accuracy,
            o.plain.samples,
            o.pca_k,
            100.0 * o.pca_software_full_test,
            100.0 * o.pca.crossbar_accuracy,
            o.plain.sub_ops_per_layer[0],
            o.pca.sub_ops_per_layer[0],
        ),
    )
}

pub fn inverse_n_law(s: &QuantizationSweep) -> Verdict {
    let mut f = Vec::new();
    let means: Vec<f64> = s.rows.iter().map(|r| r.rmse.mean).collect();
    require(&mut f, s.fit.r_squared > 0.95, || format!("c/N fit r^2 {:.4}", s.fit.r_squared));
    for (w, r) in means.windows(2).zip(s.rows.windows(2)) {
        require(&mut f, w[1] < w[0], || format!("RMSE rises from N={} to N={}", r[0].n_states, r[1].n_states));
    }
    let c = match s.fit.model {
        FitModel::InverseN { c } => c,
        _ => f64::NAN,
    };
    Verdict::new(5, "1/N law", f, format!("c = {c:.4}, r^2 = {:.4}, {} points", s.fit.r_squared, s.rows.len()))
}

fn linear(fit: &FitModel) -> (f64, f64, f64) {
    match *fit {
        FitModel::Linear { slope, intercept, intercept_se, .. } => (slope, intercept, intercept_se),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    }
}

/// Intercepts are compared with the quantization-only RMSE at `N = 4`
/// using the combined standard error of both estimates.
pub fn noise_linearity(systematic: &NoiseSweep, cell: &NoiseSweep, baseline: &QuantizationSweep) -> Verdict {
    let mut f = Vec::new();
    let base = baseline.rows.iter().find(|r| r.n_states == 4).expect("N = 4 in baseline");
    let (b_mean, b_se) = (base.rmse.mean, base.rmse.standard_error());
    let mut summary = String::new();
    for s in [systematic, cell] {
        let (slope, intercept, se) = linear(&s.fit.model);
        let tol = 2.0 * se.hypot(b_se);
        require(&mut f, s.fit.r_squared > 0.9, || format!("{} r^2 {:.4}", s.kind.name(), s.fit.r_squared));
        require(&mut f, (intercept - b_mean).abs() <= tol, || {
            format!("{} intercept {intercept:.4} vs {b_mean:.4}, |diff| {:.4} > {tol:.4}", s.kind.name(), (intercept - b_mean).abs())
        });
        let _ = write!(
            summary,
            "{}: slope {slope:.3e}/ohm, intercept {intercept:.4} +/- {se:.4}, r^2 {:.4}; ",
            s.kind.name(),
            s.fit.r_squared
        );
    }
    let (s_sys, _, _) = linear(&systematic.fit.model);
    let (s_cell, _, _) = linear(&cell.fit.model);
    require(&mut f, s_cell < s_sys, || format!("cell slope {s_cell:.3e} not below systematic {s_sys:.3e}"));
    let _ = write!(summary, "baseline {b_mean:.4} +/- {b_se:.4}");
    Verdict::new(6, "noise linearity and ordering", f, summary)
}

fn power(fit: &FitModel) -> (f64, f64) {
    match *fit {
        FitModel::PowerLaw { c, exponent } => (c, exponent),
        _ => (f64::NAN, f64::NAN),
    }
}

fn mean_at(s: &ScalingSweep, size: usize) -> f64 {
    s.rows.iter().find(|r| r.size == size).map_or(f64::NAN, |r| r.rmse.mean)
}

/// `cols` holds the (systematic, cell-specific) sweeps over the column
/// count with four rows, `rows` the same over the row count with four
/// columns. Either may be absent when only one axis was run.
pub fn scaling(cols: Option<(&ScalingSweep, &ScalingSweep)>, rows: Option<(&ScalingSweep, &ScalingSweep)>) -> Verdict {
    let mut f = Vec::new();
    let mut summary = String::new();
    if let Some((sys, cell)) = cols {
        for (label, s) in [("systematic", sys), ("cell-specific", cell)] {
            debug_assert_eq!(s.axis, ScalingAxis::Cols);
            let (c, p) = power(&s.power_law.model);
            require(&mut f, (0.4..=0.6).contains(&p), || format!("{label} column exponent {p:.3}"));
            let _ = write!(summary, "{label} cols: c {c:.4}, p {p:.3}; ");
        }
        let (c_sys, _) = power(&sys.power_law.model);
        let (c_cell, _) = power(&cell.power_law.model);
        require(&mut f, c_sys > c_cell, || format!("systematic prefactor {c_sys:.4} not above cell-specific {c_cell:.4}"));
    }
    if let Some((sys, cell)) = rows {
        for (label, s) in [("systematic", sys), ("cell-specific", cell)] {
            debug_assert_eq!(s.axis, ScalingAxis::Rows);
            let (a, b) = (mean_at(s, 16), mean_at(s, 256));
            let change = (b - a) / a;
            require(&mut f, change.abs() < 0.10, || format!("{label} rows change {:.1}%", 100.0 * change));
            let _ = write!(summary, "{label} rows 16->256: {:+.1}%; ", 100.0 * change);
        }
    }
    Verdict::new(7, "scaling laws", f, summary.trim_end_matches("; ").to_string())
}

pub fn nopt(s: &NoptStudy) -> Verdict {
    let mut f = Vec::new();
    let med: Vec<f64> = s.medians.iter().map(|m| m.median_n_opt).collect();
    let at = |sigma: f64| s.medians.iter().find(|m| m.sigma_perp_ohm == sigma).map_or(f64::NAN, |m| m.median_n_opt);
    require(&mut f, med.windows(2).all(|w| w[1] <= w[0]), || format!("medians not non-increasing: {med:?}"));
    require(&mut f, at(200.0) < at(0.0), || format!("median at 200 ({}) not below median at 0 ({})", at(200.0), at(0.0)));
    require(&mut f, (at(50.0) - at(0.0)).abs() <= 1.0, || {
        format!("median drops from {} at 0 ohm to {} at 50 ohm", at(0.0), at(50.0))
    });
    let pairs: Vec<String> = s.medians.iter().map(|m| format!("{}:{}", m.sigma_perp_ohm, m.median_n_opt)).collect();
    Verdict::new(
        8,
        "optimal state count",
        f,
        format!(
            "medians by sigma_perp {} over {} repetitions x {} trials",
            pairs.join(" "),
            s.config.repetitions,
            s.config.trials_per_point
        ),
    )
}

/// Random weight sets of up to 20 values against an exhaustive grid, plus
/// the two-value collapse of the 2x2 toy layer.
pub fn quantizer_oracle(sets: usize, seed: u64) -> Verdict {
    let mut f = Vec::new();
    let mut worst_margin = f64::NEG_INFINITY;
    for s in 0..sets {
        let r = &mut rng::stream(seed, &[s as u64]);
        let len = r.random_range(1..=20);
        let w: Vec<f64> = (0..len).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let n = [2, 3, 4, 8][s % 4];
        let ours = fit_levels(&w, n).expect("fit").sse;
        let oracle = sse(&w, &brute_force_oracle(&w, n, 0.005).expect("oracle"));
        worst_margin = worst_margin.max(ours - oracle);
        require(&mut f, ours <= oracle + 1e-6, || format!("set {s} (N={n}): sse {ours:.6} > oracle {oracle:.6}"));
    }
    let toy = Matrix::from_rows(&[vec![11.97, 12.06], vec![8.57, 8.58]]).expect("2x2");
    let q = quantize(&toy, 4).expect("quantize");
    let target = [12.01, 12.01, 8.58, 8.58];
    let dev = q.values().as_slice().iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    require(&mut f, dev <= 0.01, || format!("toy layer deviates by {dev:.4}"));
    Verdict::new(
        9,
        "quantizer oracle equivalence",
        f,
        format!("{sets} sets, worst sse - oracle {worst_margin:.2e}; toy layer within {dev:.4} of (12.01, 8.58)"),
    )
}

/// Worst relative gap between backprop and central differences (step
/// `1e-6`) on 3-3-2 and 5-4-3 nets with sigmoid and ReLU hidden layers.
pub fn gradient_check(seed: u64) -> Verdict {
    let mut f = Vec::new();
    let mut worst = 0.0f64;
    for (sizes, tag) in [(&[3usize, 3, 2][..], 0u64), (&[5, 4, 3][..], 1)] {
        for (k, act) in [Activation::Sigmoid, Activation::Relu].into_iter().enumerate() {
            let r = &mut rng::stream(seed, &[tag, k as u64]);
            let mut model = Mlp::glorot(sizes, &[act, Activation::Sigmoid], r).expect("net");
            let mut layers = model.layers().to_vec();
            for l in &mut layers {
                l.biases.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
            }
            model = Mlp::new(layers).expect("net");
            let x = Matrix::from_fn(8, sizes[0], |_, _| r.random_range(-1.0..1.0));
            let y = Matrix::from_fn(8, sizes[2], |_, _| f64::from(u8::from(r.random_bool(0.5))));
            let (_, g) = model.gradients(&x, &y).expect("gradients");
            let h = 1e-6;
            for li in 0..model.layers().len() {
                let n_w = model.layers()[li].weights.as_slice().len();
                for i in 0..n_w + model.layers()[li].biases.len() {
                    let bumped = |delta: f64| {
                        let mut layers = model.layers().to_vec();
                        if i < n_w {
                            layers[li].weights.as_mut_slice()[i] += delta;
                        } else {
                            layers[li].biases[i - n_w] += delta;
                        }
                        Mlp::new(layers).expect("net").loss(&x, &y).expect("loss")
                    };
                    let numeric = (bumped(h) - bumped(-h)) / (2.0 * h);
                    let analytic = if i < n_w { g.weights[li].as_slice()[i] } else { g.biases[li][i - n_w] };
                    let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-3);
                    worst = worst.max(rel);
                    if rel > 1e-5 && f.len() < 3 {
                        f.push(format!("{sizes:?} {act:?} layer {li} param {i}: {rel:.2e}"));
                    }
                }
            }
        }
    }
    Verdict::new(10, "gradient check", f, format!("worst relative difference {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Drivers: run the workload behind a criterion and judge it.

/// Grid resolution of the XOR heatmap behind [`run_xor`].
pub const XOR_HEATMAP_RESOLUTION: usize = 20;
/// Test images scored on the crossbar.
pub const MNIST_CROSSBAR_SUBSET: usize = 2000;
/// Variance kept by the PCA variant.
pub const MNIST_PCA_VARIANCE: f64 = 0.90;
/// Both noise magnitudes of the scaling study, ohms.
pub const SCALING_SIGMA: f64 = 50.0;

pub fn run_xor(seed: u64) -> Result<(Verdict, XorOutcome)> {
    let (file, training) = train_xor_model(seed)?;
    let cfg = inference_config(&file, &DeviceProfile::reference(), XOR_TILE)?;
    let data = xor_dataset();
    let mut net = CrossbarNet::prepare(&file.model, &cfg, None)?;
    let outputs = net.forward_all(data.inputs())?;
    let crossbar = [outputs[0][0], outputs[1][0], outputs[2][0], outputs[3][0]];
    let training_accuracy = accuracy(&training.outcome.model, &data, InferenceMode::Software)?;
    let heatmap = xor_heatmap(&file.model, &cfg, XOR_HEATMAP_RESOLUTION)?;
    let outcome = xor_outcome(&file.model, crossbar, training_accuracy, &heatmap);
    Ok((xor(&outcome), outcome))
}

/// Trains the plain and PCA nets on the same seed and scores both.
pub fn run_mnist(dir: &Path, seed: u64) -> Result<(Verdict, MnistOutcome)> {
    let train_set = load_mnist_split(dir, Split::Train)?;
    let test_set = load_mnist_split(dir, Split::Test)?;
    let subset = test_set.head(MNIST_CROSSBAR_SUBSET);
    let profile = DeviceProfile::reference();
    let (plain_file, plain) = train_mnist(&train_set, &test_set, &MnistOptions::new(seed, None))?;
    let plain_eval = evaluate(&plain_file, &subset, &inference_config(&plain_file, &profile, TileShape::FOUR_BY_FOUR)?)?;
    let (pca_file, pca) = train_mnist(&train_set, &test_set, &MnistOptions::new(seed, Some(MNIST_PCA_VARIANCE)))?;
    let pca_eval = evaluate(&pca_file, &subset, &inference_config(&pca_file, &profile, TileShape::FOUR_BY_FOUR)?)?;
    let outcome = MnistOutcome {
        software_full_test: plain.software_test_accuracy,
        plain: plain_eval,
        pca_k: pca.pca_k.unwrap_or(0),
        pca_software_full_test: pca.software_test_accuracy,
        pca: pca_eval,
    };
    Ok((mnist(&outcome), outcome))
}

pub fn run_inverse_n<T: TrialRunner>(trials: usize, seed: u64, runner: &T) -> Result<(Verdict, QuantizationSweep)> {
    let s = quantization_sweep(&QUANT_GRID, trials, seed, runner)?;
    Ok((inverse_n_law(&s), s))
}

pub struct NoiseRun {
    pub systematic: NoiseSweep,
    pub cell: NoiseSweep,
    pub baseline: QuantizationSweep,
}

pub fn run_noise<T: TrialRunner>(trials: usize, seed: u64, runner: &T) -> Result<(Verdict, NoiseRun)> {
    let systematic = noise_sweep(NoiseKind::Systematic, &NOISE_GRID, trials, seed, runner)?;
    let cell = noise_sweep(NoiseKind::CellSpecific, &NOISE_GRID, trials, seed, runner)?;
    let baseline = quantization_sweep(&[4], trials, seed, runner)?;
    let v = noise_linearity(&systematic, &cell, &baseline);
    Ok((v, NoiseRun { systematic, cell, baseline }))
}

/// Systematic-only and cell-only noise configurations of the scaling
/// study.
pub fn scaling_noise(seed: u64) -> Result<[NoiseSpec; 2]> {
    Ok([NoiseSpec::new(SCALING_SIGMA, 0.0, seed)?, NoiseSpec::new(0.0, SCALING_SIGMA, seed)?])
}

/// Column sweeps then row sweeps, each as (systematic, cell-specific).
pub fn run_scaling<T: TrialRunner>(trials: usize, seed: u64, runner: &T) -> Result<(Verdict, [ScalingSweep; 4])> {
    let [sys, cell] = scaling_noise(seed)?;
    let sweep = |axis, noise| scaling_sweep(axis, &SCALING_GRID, 4, noise, SystematicScope::Tile, trials, seed, runner);
    let all = [
        sweep(ScalingAxis::Cols, sys)?,
        sweep(ScalingAxis::Cols, cell)?,
        sweep(ScalingAxis::Rows, sys)?,
        sweep(ScalingAxis::Rows, cell)?,
    ];
    let v = scaling(Some((&all[0], &all[1])), Some((&all[2], &all[3])));
    Ok((v, all))
}

pub fn run_nopt<T: TrialRunner>(config: &NoptConfig, seed: u64, runner: &T) -> Result<(Verdict, NoptStudy)> {
    let s = nopt_study(config, &NOPT_SIGMAS, seed, runner)?;
    Ok((nopt(&s), s))
}
