//! The `crossbar` command line: argument types and one function per
//! subcommand. Every artifact lands in `--out-dir`.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crossbar_core::crossbar::{SystematicScope, TileShape};
use crossbar_core::dataset::{xor_dataset, Dataset};
use crossbar_core::experiments::{
    noise_sweep, nopt_study, quantization_sweep, scaling_sweep, NoiseKind, NoiseSweep, NoptConfig, ScalingAxis,
    ScalingSweep,
};
use crossbar_core::nn::CrossbarNet;
use crossbar_core::pca;
use serde::Serialize;
use serde_json::json;

use crate::checks::{self, Verdict};
use crate::csv_out::{self, HeatmapCsv};
use crate::idx::{load_mnist_split, Split};
use crate::model_file::ModelFile;
use crate::pipelines::{
    evaluate, inference_config, project_inputs, train_mnist, train_xor_model, xor_heatmap, MnistOptions, XOR_TILE,
};
use crate::profile::DeviceProfile;
use crate::runner::RayonRunner;
use crate::svg::{heatmap, LineChart, Series};
use crate::trace::TraceWriter;

pub const DEFAULT_MNIST_DIR: &str = "/root/data/mnist";

#[derive(Debug, Parser)]
#[command(name = "crossbar", version, about = "N-ary crossbar array inference and error studies")]
pub struct Cli {
    /// Seed for every random stream; runs are bit-reproducible under it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Directory for CSV, SVG, JSON and model outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Device profile (TOML); the built-in four-state reference if omitted.
    #[arg(long, global = true)]
    pub device_profile: Option<PathBuf>,
    /// Worker threads for trial sweeps; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Judge the result against its reference behaviour and exit nonzero
    /// on failure.
    #[arg(long, global = true)]
    pub check: bool,
    /// Write a per-tile trace of crossbar operations to `<out-dir>/trace.txt`.
    #[arg(long, global = true)]
    pub trace: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and save it as a model file.
    Train(TrainArgs),
    /// Run a saved model in software or on the simulated crossbar.
    Infer(InferArgs),
    /// Run one of the random-MVM error studies.
    Sweep(SweepArgs),
    /// Grid of |software - crossbar| for an XOR model over the unit square.
    XorHeatmap(HeatmapArgs),
    /// Fit PCA on the MNIST training images and report the kept components.
    PcaFit(PcaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Xor,
    Mnist,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub task: Task,
    #[arg(long, default_value = DEFAULT_MNIST_DIR)]
    pub mnist_dir: PathBuf,
    /// Reduce MNIST inputs with PCA keeping this variance fraction.
    #[arg(long, value_name = "VARIANCE")]
    pub pca: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Output model path; `<out-dir>/<task>.model.json` by default.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Software,
    Crossbar,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Crossbar)]
    pub mode: Mode,
    /// One comma-separated input vector, e.g. `1,0`. Without it the model
    /// is scored on the MNIST test set.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, default_value = DEFAULT_MNIST_DIR)]
    pub mnist_dir: PathBuf,
    /// Score only the first LIMIT test images.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Array shape as ROWSxCOLS; 2x2 for two-input models, 4x4 otherwise.
    #[arg(long, value_parser = parse_tile)]
    pub tile: Option<TileShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Quantization,
    Noise,
    Nopt,
    Scaling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Systematic,
    Cell,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VaryArg {
    Rows,
    Cols,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Array,
    Tile,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub study: Study,
    /// Random MVMs per point (per N for `nopt`).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Noise kind for `noise`.
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    pub kind: KindArg,
    /// Swept dimension for `scaling`.
    #[arg(long, value_enum, default_value_t = VaryArg::Both)]
    pub vary: VaryArg,
    /// Repetitions per sigma for `nopt`.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// State counts for `quantization`.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    /// Noise magnitudes in ohms for `noise` and `nopt`.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Swept sizes for `scaling`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Whether `scaling` redraws systematic offsets for every programmed
    /// tile or shares one draw across the array.
    #[arg(long, value_enum, default_value_t = ScopeArg::Tile)]
    pub systematic_scope: ScopeArg,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// XOR model; a fresh one is trained under `--seed` if omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Grid steps per axis; the grid has (resolution + 1)^2 points.
    #[arg(long, default_value_t = 50)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long, default_value = DEFAULT_MNIST_DIR)]
    pub mnist_dir: PathBuf,
    #[arg(long, default_value_t = checks::MNIST_PCA_VARIANCE)]
    pub variance: f64,
}

fn parse_tile(s: &str) -> Result<TileShape, String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    TileShape::new(parse(r)?, parse(c)?).map_err(|e| e.to_string())
}

/// Runs the parsed command. `Ok(false)` means a `--check` verdict failed.
pub fn run(cli: &Cli) -> anyhow::Result<bool> {
    let profile = match &cli.device_profile {
        Some(p) => DeviceProfile::load(p)?,
        None => DeviceProfile::reference(),
    };
    validate_paths(cli)?;
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let ctx = Ctx { cli, profile };
    let verdicts = match &cli.command {
        Command::Train(a) => ctx.train(a)?,
        Command::Infer(a) => ctx.infer(a)?,
        Command::Sweep(a) => ctx.sweep(a)?,
        Command::XorHeatmap(a) => ctx.heatmap(a)?,
        Command::PcaFit(a) => ctx.pca_fit(a)?,
    };
    if !cli.check {
        return Ok(true);
    }
    for v in &verdicts {
        println!("{}", v.line());
    }
    Ok(verdicts.iter().all(|v| v.passed))
}

/// Every input path is checked before any computation starts.
fn validate_paths(cli: &Cli) -> anyhow::Result<()> {
    let needs_mnist = |dir: &Path| -> anyhow::Result<()> {
        ensure!(crate::idx::mnist_available(dir), "MNIST IDX files not found in {}", dir.display());
        Ok(())
    };
    let exists = |p: &Path| -> anyhow::Result<()> {
        ensure!(p.is_file(), "{} does not exist", p.display());
        Ok(())
    };
    match &cli.command {
        Command::Train(a) if a.task == Task::Mnist => needs_mnist(&a.mnist_dir)?,
        Command::Infer(a) => {
            exists(&a.model)?;
            if a.input.is_none() {
                needs_mnist(&a.mnist_dir)?;
            }
        }
        Command::XorHeatmap(HeatmapArgs { model: Some(m), .. }) => exists(m)?,
        Command::PcaFit(a) => needs_mnist(&a.mnist_dir)?,
        _ => {}
    }
    Ok(())
}

struct Ctx<'a> {
    cli: &'a Cli,
    profile: DeviceProfile,
}

impl Ctx<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cli.out_dir.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.out(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
    }

    fn write_text(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.out(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn runner(&self) -> anyhow::Result<RayonRunner> {
        RayonRunner::new(self.cli.threads)
    }

    fn train(&self, a: &TrainArgs) -> anyhow::Result<Vec<Verdict>> {
        let seed = self.cli.seed;
        let default_name = match a.task {
            Task::Xor => "xor.model.json",
            Task::Mnist => "mnist.model.json",
        };
        let model_path = a.model.clone().unwrap_or_else(|| self.out(default_name));
        match a.task {
            Task::Xor => {
                ensure!(a.pca.is_none() && a.epochs.is_none(), "--pca and --epochs apply to `train mnist` only");
                let (file, t) = train_xor_model(seed)?;
                let acc = crossbar_core::nn::accuracy(&file.model, &xor_dataset(), crossbar_core::nn::InferenceMode::Software)?;
                file.save(&model_path)?;
                let metrics = json!({
                    "task": "xor",
                    "seed": seed,
                    "attempt_seed": t.attempt_seed,
                    "attempts": t.attempts,
                    "final_loss": t.outcome.loss_history.last(),
                    "training_accuracy": acc,
                    "model": model_path,
                });
                self.write_json("train_xor.json", &metrics)?;
                println!("xor: training accuracy {acc} after {} attempt(s); model written to {}", t.attempts, model_path.display());
                let mut f = Vec::new();
                if acc != 1.0 {
                    f.push(format!("training accuracy {acc}"));
                }
                Ok(vec![Verdict::new(2, "XOR training", f, format!("training accuracy {acc}"))])
            }
            Task::Mnist => {
                let train_set = load_mnist_split(&a.mnist_dir, Split::Train)?;
                let test_set = load_mnist_split(&a.mnist_dir, Split::Test)?;
                let mut opts = MnistOptions::new(seed, a.pca);
                if let Some(e) = a.epochs {
                    opts.epochs = e;
                }
                let (file, report) = train_mnist(&train_set, &test_set, &opts)?;
                file.save(&model_path)?;
                self.write_json("train_mnist.json", &json!({ "options": opts, "report": report, "model": model_path }))?;
                println!(
                    "mnist: software test accuracy {:.4}{}; model written to {}",
                    report.software_test_accuracy,
                    report.pca_k.map_or(String::new(), |k| format!(" with PCA k = {k}")),
                    model_path.display()
                );
                let band = if a.pca.is_some() { 0.975 } else { 0.97 };
                let mut f = Vec::new();
                if report.software_test_accuracy < band {
                    f.push(format!("software accuracy {:.4} below {band}", report.software_test_accuracy));
                }
                Ok(vec![Verdict::new(4, "MNIST software band", f, format!("software {:.4}", report.software_test_accuracy))])
            }
        }
    }

    fn inference_tile(&self, a: &InferArgs, file: &ModelFile) -> TileShape {
        a.tile.unwrap_or(if file.model.input_size() == 2 { XOR_TILE } else { TileShape::FOUR_BY_FOUR })
    }

    fn infer(&self, a: &InferArgs) -> anyhow::Result<Vec<Verdict>> {
        let file = ModelFile::load(&a.model)?;
        let cfg = inference_config(&file, &self.profile, self.inference_tile(a, &file))?;
        if let Some(input) = &a.input {
            let raw: Vec<f64> = input
                .split(',')
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad input value `{v}`")))
                .collect::<anyhow::Result<_>>()?;
            let x = match &file.pca {
                Some(p) => p.transform(&raw)?,
                None => raw,
            };
            ensure!(x.len() == file.model.input_size(), "model takes {} inputs, got {}", file.model.input_size(), x.len());
            let (output, sub_ops) = match a.mode {
                Mode::Software => (file.model.forward(&x)?, None),
                Mode::Crossbar => {
                    let mut net = CrossbarNet::prepare(&file.model, &cfg, file.quantization.as_ref())?;
                    let out = self.traced_forward(&mut net, &x)?;
                    (out, Some(net.sub_op_counts()))
                }
            };
            println!("output: {}", output.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(","));
            if let Some(ops) = &sub_ops {
                println!("sub-operations per layer: {ops:?} (total {})", ops.iter().sum::<usize>());
            }
            self.write_json("infer.json", &json!({ "input": input, "output": output, "sub_ops_per_layer": sub_ops }))?;
            return Ok(Vec::new());
        }
        let test = load_mnist_split(&a.mnist_dir, Split::Test)?;
        let data = match a.limit {
            Some(n) => test.head(n),
            None => test,
        };
        ensure!(!data.is_empty(), "no test samples selected");
        let metrics = match a.mode {
            Mode::Software => {
                let projected = data.with_inputs(project_inputs(&file, data.inputs())?)?;
                let acc = crossbar_core::nn::accuracy(&file.model, &projected, crossbar_core::nn::InferenceMode::Software)?;
                println!("software accuracy {acc:.4} on {} samples", data.len());
                json!({ "mode": "software", "samples": data.len(), "accuracy": acc })
            }
            Mode::Crossbar => {
                if self.cli.trace {
                    let first = data.head(1);
                    let x = project_inputs(&file, first.inputs())?;
                    let mut net = CrossbarNet::prepare(&file.model, &cfg, file.quantization.as_ref())?;
                    self.traced_forward(&mut net, x.row(0))?;
                }
                let ev = evaluate(&file, &data, &cfg)?;
                println!(
                    "software accuracy {:.4}, crossbar accuracy {:.4} (drop {:.2} points) on {} samples",
                    ev.software_accuracy,
                    ev.crossbar_accuracy,
                    ev.drop_points(),
                    ev.samples
                );
                println!(
                    "sub-operations per sample: {:?} (total {})",
                    ev.sub_ops_per_layer,
                    ev.sub_ops_per_layer.iter().sum::<usize>()
                );
                json!({ "mode": "crossbar", "evaluation": ev, "drop_points": ev.drop_points() })
            }
        };
        self.write_json("infer.json", &metrics)?;
        Ok(Vec::new())
    }

    fn traced_forward(&self, net: &mut CrossbarNet<'_>, x: &[f64]) -> anyhow::Result<Vec<f64>> {
        if !self.cli.trace {
            return Ok(net.forward(x)?);
        }
        let path = self.out("trace.txt");
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut tw = TraceWriter::new(BufWriter::new(file));
        tw.set_label("sample=0");
        let layers = net.forward_layers(x, Some(&mut tw))?;
        let lines = tw.lines();
        tw.finish().with_context(|| format!("writing {}", path.display()))?;
        println!("trace: {lines} tile operations written to {}", path.display());
        Ok(layers.last().cloned().unwrap_or_default())
    }

    fn sweep(&self, a: &SweepArgs) -> anyhow::Result<Vec<Verdict>> {
        let runner = self.runner()?;
        let seed = self.cli.seed;
        let trials = a.trials.unwrap_or(2000);
        ensure!(trials > 0, "--trials must be positive");
        match a.study {
            Study::Quantization => {
                let grid = a.n_values.clone().unwrap_or_else(|| checks::QUANT_GRID.to_vec());
                let s = quantization_sweep(&grid, trials, seed, &runner)?;
                csv_out::write_sweep_csv(&self.out("quantization.csv"), &csv_out::quantization_rows(&s))?;
                let pts = s.rows.iter().map(|r| (r.n_states as f64, r.rmse.mean)).collect();
                self.chart("quantization.svg", "RMSE vs number of states", "N", true, vec![series("mean RMSE", pts)])?;
                self.write_json("quantization.json", &s)?;
                println!("quantization: c/N fit r^2 = {:.4}", s.fit.r_squared);
                Ok(vec![checks::inverse_n_law(&s)])
            }
            Study::Noise => {
                let sigmas = a.sigmas.clone().unwrap_or_else(|| checks::NOISE_GRID.to_vec());
                let kinds: &[NoiseKind] = match a.kind {
                    KindArg::Systematic => &[NoiseKind::Systematic],
                    KindArg::Cell => &[NoiseKind::CellSpecific],
                    KindArg::Both => &[NoiseKind::Systematic, NoiseKind::CellSpecific],
                };
                let sweeps: Vec<NoiseSweep> =
                    kinds.iter().map(|&k| noise_sweep(k, &sigmas, trials, seed, &runner)).collect::<Result<_, _>>()?;
                let rows: Vec<_> = sweeps.iter().flat_map(csv_out::noise_rows).collect();
                csv_out::write_sweep_csv(&self.out("noise.csv"), &rows)?;
                let series_list = sweeps
                    .iter()
                    .map(|s| series(s.kind.name(), s.rows.iter().map(|r| (r.sigma_ohm, r.rmse.mean)).collect()))
                    .collect();
                self.chart("noise.svg", "RMSE vs noise magnitude (N = 4)", "sigma (ohm)", false, series_list)?;
                self.write_json("noise.json", &sweeps)?;
                for s in &sweeps {
                    println!("noise {}: linear fit r^2 = {:.4}", s.kind.name(), s.fit.r_squared);
                }
                if sweeps.len() < 2 {
                    return Ok(Vec::new());
                }
                let baseline = quantization_sweep(&[4], trials, seed, &runner)?;
                Ok(vec![checks::noise_linearity(&sweeps[0], &sweeps[1], &baseline)])
            }
            Study::Nopt => {
                let defaults = NoptConfig::default();
                let config = NoptConfig {
                    repetitions: a.repetitions.unwrap_or(defaults.repetitions),
                    trials_per_point: a.trials.unwrap_or(defaults.trials_per_point),
                    ..defaults
                };
                let sigmas = a.sigmas.clone().unwrap_or_else(|| checks::NOPT_SIGMAS.to_vec());
                let s = nopt_study(&config, &sigmas, seed, &runner)?;
                let (hist, medians) = csv_out::nopt_rows(&s);
                csv_out::write_sweep_csv(&self.out("nopt_histogram.csv"), &hist)?;
                csv_out::write_sweep_csv(&self.out("nopt_median.csv"), &medians)?;
                let pts = s.medians.iter().map(|m| (m.sigma_perp_ohm, m.median_n_opt)).collect();
                self.chart("nopt.svg", "Median optimal N (sigma_NL = 50 ohm)", "sigma_perp (ohm)", false, vec![series("median N_opt", pts)])?;
                self.write_json("nopt.json", &json!({ "config": s.config, "medians": s.medians, "histogram": s.histogram }))?;
                for m in &s.medians {
                    println!("nopt: sigma_perp {} ohm -> median N_opt {}", m.sigma_perp_ohm, m.median_n_opt);
                }
                Ok(vec![checks::nopt(&s)])
            }
            Study::Scaling => {
                let sizes = a.sizes.clone().unwrap_or_else(|| checks::SCALING_GRID.to_vec());
                let scope = match a.systematic_scope {
                    ScopeArg::Array => SystematicScope::Array,
                    ScopeArg::Tile => SystematicScope::Tile,
                };
                let [sys, cell] = checks::scaling_noise(seed)?;
                let axes: &[ScalingAxis] = match a.vary {
                    VaryArg::Rows => &[ScalingAxis::Rows],
                    VaryArg::Cols => &[ScalingAxis::Cols],
                    VaryArg::Both => &[ScalingAxis::Cols, ScalingAxis::Rows],
                };
                let mut cols = None;
                let mut rows = None;
                let mut all: Vec<ScalingSweep> = Vec::new();
                for &axis in axes {
                    let s = scaling_sweep(axis, &sizes, 4, sys, scope, trials, seed, &runner)?;
                    let c = scaling_sweep(axis, &sizes, 4, cell, scope, trials, seed, &runner)?;
                    let label = axis.name();
                    let chart = vec![
                        series("sigma_NL = 50", s.rows.iter().map(|r| (r.size as f64, r.rmse.mean)).collect()),
                        series("sigma_perp = 50", c.rows.iter().map(|r| (r.size as f64, r.rmse.mean)).collect()),
                    ];
                    self.chart(&format!("scaling_{label}.svg"), &format!("RMSE vs {label}"), label, true, chart)?;
                    for sw in [&s, &c] {
                        println!(
                            "scaling {label} ({}): power-law r^2 = {:.4}",
                            if sw.noise.sigma_nl > 0.0 { "systematic" } else { "cell-specific" },
                            sw.power_law.r_squared
                        );
                    }
                    match axis {
                        ScalingAxis::Cols => cols = Some((s.clone(), c.clone())),
                        ScalingAxis::Rows => rows = Some((s.clone(), c.clone())),
                    }
                    all.extend([s, c]);
                }
                let csv_rows: Vec<_> = all.iter().flat_map(csv_out::scaling_rows).collect();
                csv_out::write_sweep_csv(&self.out("scaling.csv"), &csv_rows)?;
                self.write_json("scaling.json", &all)?;
                if self.cli.check && rows.is_some() && !(sizes.contains(&16) && sizes.contains(&256)) {
                    bail!("--check on row scaling needs sizes 16 and 256 in the grid");
                }
                Ok(vec![checks::scaling(pair(&cols), pair(&rows))])
            }
        }
    }

    fn chart(&self, name: &str, title: &str, x_label: &str, log_x: bool, series: Vec<Series>) -> anyhow::Result<()> {
        let chart = LineChart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: "RMSE".into(),
            log_x,
            log_y: false,
            series,
        };
        let chart = if name == "nopt.svg" { LineChart { y_label: "N_opt".into(), ..chart } } else { chart };
        self.write_text(name, &chart.render())
    }

    fn heatmap(&self, a: &HeatmapArgs) -> anyhow::Result<Vec<Verdict>> {
        let file = match &a.model {
            Some(p) => ModelFile::load(p)?,
            None => train_xor_model(self.cli.seed)?.0,
        };
        ensure!(
            file.model.input_size() == 2 && file.model.output_size() == 1,
            "xor-heatmap needs a 2-input, 1-output model, got {} -> {}",
            file.model.input_size(),
            file.model.output_size()
        );
        let cfg = inference_config(&file, &self.profile, XOR_TILE)?;
        let h = xor_heatmap(&file.model, &cfg, a.resolution)?;
        let rows: Vec<HeatmapCsv> = h
            .points
            .iter()
            .map(|p| HeatmapCsv { x1: p.x1, x2: p.x2, software: p.software, crossbar: p.crossbar, abs_error: p.abs_error() })
            .collect();
        csv_out::write_sweep_csv(&self.out("xor_heatmap.csv"), &rows)?;
        self.write_text("xor_heatmap.svg", &heatmap("|software - crossbar| over the unit square", &h.grid()))?;
        let worst = h.max_error();
        let corners = h.corner_errors();
        self.write_json(
            "xor_heatmap.json",
            &json!({
                "resolution": h.resolution,
                "points": h.points.len(),
                "max_error": { "x1": worst.x1, "x2": worst.x2, "abs_error": worst.abs_error(), "software": worst.software },
                "corner_errors": corners,
            }),
        )?;
        println!(
            "max error {:.3e} at ({:.3}, {:.3}) where software output is {:.3}",
            worst.abs_error(),
            worst.x1,
            worst.x2,
            worst.software
        );
        println!("corner errors (0,0) (0,1) (1,0) (1,1): {}", corners.map(|e| format!("{e:.2e}")).join(" "));
        let f = corners
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0.01)
            .map(|(i, e)| format!("corner {i} error {e:.4}"))
            .collect();
        Ok(vec![Verdict::new(2, "XOR heatmap corners", f, format!("worst corner {:.2e}", corners.iter().copied().fold(0.0, f64::max)))])
    }

    fn pca_fit(&self, a: &PcaArgs) -> anyhow::Result<Vec<Verdict>> {
        let train_set: Dataset = load_mnist_split(&a.mnist_dir, Split::Train)?;
        let model = pca::fit(train_set.inputs(), a.variance)?;
        let cumulative: f64 = model.explained_variance_ratio().iter().sum();
        self.write_json(
            "pca.json",
            &json!({
                "variance_target": a.variance,
                "k": model.k(),
                "dim": model.dim(),
                "cumulative_ratio": cumulative,
                "explained_variance_ratio": model.explained_variance_ratio(),
            }),
        )?;
        println!("pca: k = {} of {} keeps {:.4} of the variance", model.k(), model.dim(), cumulative);
        let mut f = Vec::new();
        if a.variance == checks::MNIST_PCA_VARIANCE && !(84..=90).contains(&model.k()) {
            f.push(format!("k = {}", model.k()));
        }
        Ok(vec![Verdict::new(4, "PCA dimension", f, format!("k = {}", model.k()))])
    }
}

fn series(name: &str, points: Vec<(f64, f64)>) -> Series {
    Series { name: name.into(), points }
}

fn pair(p: &Option<(ScalingSweep, ScalingSweep)>) -> Option<(&ScalingSweep, &ScalingSweep)> {
    p.as_ref().map(|(a, b)| (a, b))
}
