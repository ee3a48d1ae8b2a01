//! Resistance-mode crossbar: inputs enter as column currents, weights are
//! stored as cell resistances, and each row sums the voltages across its
//! cells. Because both encodings are affine, the product `A x` is recovered
//! exactly from the row voltages:
//!
//! ```text
//! y = (V - b_r * sum(I) - a_r * b_i * (A 1)) / (a_r * a_i)
//! ```
//!
//! Matrices larger than the physical array are split into tiles that are
//! programmed one after the other; partial results are accumulated
//! digitally after per-tile retrieval.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::device::{NoiseSpec, ResistanceLadder};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::quantizer::{LevelSet, QuantizedMatrix};

/// Full-scale input current of the reference setup: `x in [0, 1]` maps to
/// `[0, 0.5] mA`.
pub const HALF_MILLIAMP: f64 = 5e-4;

/// Linear current encoding `I = a_i x + b_i`, amperes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputEncoding {
    pub a_i: f64,
    pub b_i: f64,
}

impl InputEncoding {
    /// `x in [0, 1]` to `[0, 0.5] mA`.
    pub const UNIT_TO_HALF_MILLIAMP: InputEncoding = InputEncoding { a_i: HALF_MILLIAMP, b_i: 0.0 };

    /// Maps `[x_min, x_max]` linearly onto `[0, i_max]`.
    pub fn for_range(x_min: f64, x_max: f64, i_max: f64) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("calibration range must satisfy x_max > x_min"));
        }
        if !(i_max > 0.0) {
            return Err(Error::invalid("full-scale current must be positive"));
        }
        let a_i = i_max / (x_max - x_min);
        Ok(Self { a_i, b_i: -a_i * x_min })
    }
}

/// Linear resistance encoding `R = a_r A + b_r`, ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistanceMap {
    pub a_r: f64,
    pub b_r: f64,
    /// Set when all levels coincide and the midpoint convention was used.
    pub degenerate: bool,
}

/// The four constants linking digital values to currents and resistances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub a_i: f64,
    pub b_i: f64,
    pub a_r: f64,
    pub b_r: f64,
}

impl EncodingParams {
    pub fn new(input: InputEncoding, map: ResistanceMap) -> Result<Self> {
        let p = Self { a_i: input.a_i, b_i: input.b_i, a_r: map.a_r, b_r: map.b_r };
        p.check()?;
        Ok(p)
    }

    pub fn input(&self) -> InputEncoding {
        InputEncoding { a_i: self.a_i, b_i: self.b_i }
    }

    fn check(&self) -> Result<()> {
        if self.a_r * self.a_i == 0.0 || !(self.a_r * self.a_i).is_finite() || !self.b_r.is_finite() || !self.b_i.is_finite()
        {
            Err(Error::DegenerateEncoding)
        } else {
            Ok(())
        }
    }
}

/// `I = a_i x + b_i` elementwise.
pub fn encode_input(x: &[f64], params: &InputEncoding) -> Vec<f64> {
    x.iter().map(|&v| params.a_i * v + params.b_i).collect()
}

/// The linear map sending the first level to `r_min` and the last to
/// `r_max`.
///
/// When all levels coincide (`N = 1` or `d = 0`) there is no such map; every
/// level is then sent to the ladder midpoint with `a_r = 1`.
pub fn weight_to_resistance_map(levels: &LevelSet, ladder: &ResistanceLadder) -> ResistanceMap {
    if levels.is_degenerate() || ladder.r_max() == ladder.r_min() {
        return ResistanceMap { a_r: 1.0, b_r: ladder.midpoint() - levels.a1(), degenerate: true };
    }
    let a_r = (ladder.r_max() - ladder.r_min()) / (levels.last() - levels.a1());
    ResistanceMap { a_r, b_r: ladder.r_min() - a_r * levels.a1(), degenerate: false }
}

/// Which cells share one systematic realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystematicScope {
    /// One realization (the ladder's) for every tile of every product.
    #[default]
    Array,
    /// Each programmed tile draws its own realization, as if every
    /// multiplexing step ran on a different physical array.
    Tile,
}

/// Ladder and noise model of the physical array.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    /// States with the array's systematic offsets already drawn.
    pub ladder: ResistanceLadder,
    pub noise: NoiseSpec,
    pub systematic_scope: SystematicScope,
}

impl Device {
    pub fn ideal(ladder: ResistanceLadder) -> Self {
        Self::new(ladder, NoiseSpec::NONE)
    }

    /// Array-scoped systematic offsets.
    pub fn new(ladder: ResistanceLadder, noise: NoiseSpec) -> Self {
        Self { ladder, noise, systematic_scope: SystematicScope::Array }
    }
}

/// Physical array shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileShape {
    pub rows: usize,
    pub cols: usize,
}

impl TileShape {
    pub const FOUR_BY_FOUR: TileShape = TileShape { rows: 4, cols: 4 };

    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("tile dimensions must be positive"));
        }
        Ok(Self { rows, cols })
    }
}

/// `ceil(m / tile_rows) * ceil(n / tile_cols)`: sub-operations needed to
/// multiply an `m x n` matrix on a `tile_rows x tile_cols` array.
pub fn tile_count(m: usize, n: usize, tile_rows: usize, tile_cols: usize) -> usize {
    m.div_ceil(tile_rows) * n.div_ceil(tile_cols)
}

/// Position of one tile inside the logical matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub row0: usize,
    pub col0: usize,
    pub shape: TileShape,
}

impl Block {
    /// The whole matrix as a single tile.
    pub fn whole(a: &QuantizedMatrix) -> Self {
        Self { row0: 0, col0: 0, shape: TileShape { rows: a.rows().max(1), cols: a.cols().max(1) } }
    }
}

/// A programmed array: per-cell resistances after noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarTile {
    resistances: Matrix,
    /// Level index of each cell, `None` for padding outside the matrix.
    programmed_levels: Vec<Option<usize>>,
    /// Row sums of the quantized block, padding counted as zero.
    block_row_sums: Vec<f64>,
}

impl CrossbarTile {
    /// Builds a tile from raw resistances with no level bookkeeping.
    pub fn from_resistances(resistances: Matrix) -> Result<Self> {
        if resistances.rows() == 0 || resistances.cols() == 0 {
            return Err(Error::invalid("tile dimensions must be positive"));
        }
        if resistances.as_slice().iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("resistances must be finite"));
        }
        let cells = resistances.rows() * resistances.cols();
        let block_row_sums = vec![0.0; resistances.rows()];
        Ok(Self { resistances, programmed_levels: vec![None; cells], block_row_sums })
    }

    pub fn rows(&self) -> usize {
        self.resistances.rows()
    }

    pub fn cols(&self) -> usize {
        self.resistances.cols()
    }

    pub fn resistances(&self) -> &Matrix {
        &self.resistances
    }

    pub fn programmed_levels(&self) -> &[Option<usize>] {
        &self.programmed_levels
    }

    pub fn block_row_sums(&self) -> &[f64] {
        &self.block_row_sums
    }
}

/// Writes one block of `a` to the array.
///
/// Every cell holding level `l` gets `a_r * level(l) + b_r` plus the
/// ladder's systematic offset for `l` plus a fresh cell-specific offset.
/// Cells outside `a` are padding: weight exactly zero, resistance `b_r`, no
/// noise, and zero contribution once retrieved.
pub fn program_tile<R: Rng + ?Sized>(
    a: &QuantizedMatrix,
    block: Block,
    params: &EncodingParams,
    device: &Device,
    rng: &mut R,
) -> Result<CrossbarTile> {
    Error::check_len(a.level_set().n_states(), device.ladder.n_states())?;
    let TileShape { rows, cols } = block.shape;
    let values = a.values();
    let mut resistances = Matrix::zeros(rows, cols);
    let mut programmed_levels = vec![None; rows * cols];
    let mut block_row_sums = vec![0.0; rows];
    let noisy_cells = device.noise.sigma_perp != 0.0;
    for r in 0..rows {
        let gr = block.row0 + r;
        let mut sum = 0.0;
        for c in 0..cols {
            let gc = block.col0 + c;
            let cell = r * cols + c;
            if gr >= a.rows() || gc >= a.cols() {
                resistances[(r, c)] = params.b_r;
                continue;
            }
            let level = a.level_index(gr, gc);
            let value = values[(gr, gc)];
            sum += value;
            let nominal = params.a_r * value + params.b_r;
            // only the programmed state of a cell is ever read, so one draw
            // per cell has the distribution of a full cell_states call
            let mut perturbed = nominal + device.ladder.systematic_offsets()[level];
            if noisy_cells {
                perturbed += device.noise.sigma_perp * rng.sample::<f64, _>(StandardNormal);
            }
            resistances[(r, c)] = perturbed;
            programmed_levels[cell] = Some(level);
        }
        block_row_sums[r] = sum;
    }
    Ok(CrossbarTile { resistances, programmed_levels, block_row_sums })
}

/// Row voltages `V_m = sum_n R_mn I_n`.
pub fn simulate_tile(tile: &CrossbarTile, currents: &[f64]) -> Result<Vec<f64>> {
    tile.resistances.matvec(currents)
}

/// Inverts the two encodings to recover `A x` from row voltages.
pub fn retrieve(voltages: &[f64], currents: &[f64], a_row_sums: &[f64], params: &EncodingParams) -> Result<Vec<f64>> {
    Error::check_len(voltages.len(), a_row_sums.len())?;
    let scale = params.a_r * params.a_i;
    if scale == 0.0 {
        return Err(Error::DegenerateEncoding);
    }
    let total_current: f64 = currents.iter().sum();
    Ok(voltages
        .iter()
        .zip(a_row_sums)
        .map(|(v, s)| (v - params.b_r * total_current - params.a_r * params.b_i * s) / scale)
        .collect())
}

/// Outcome of one logical matrix-vector product.
#[derive(Debug, Clone, PartialEq)]
pub struct MvmResult {
    pub y_tilde: Vec<f64>,
    /// Row voltages summed over column blocks, volts.
    pub voltages: Vec<f64>,
    pub sub_op_count: usize,
}

/// Per-tile data handed to a [`TileObserver`].
#[derive(Debug)]
pub struct TileTrace<'a> {
    pub block_row: usize,
    pub block_col: usize,
    pub currents: &'a [f64],
    pub voltages: &'a [f64],
    pub partial: &'a [f64],
}

pub trait TileObserver {
    fn observe(&mut self, trace: &TileTrace<'_>);
}

/// All tiles of a matrix, programmed once.
///
/// Reusing a programmed matrix freezes its cell noise; use
/// [`crossbar_matvec`] to reprogram (and redraw noise) for every product.
#[derive(Debug, Clone)]
pub struct ProgrammedMatrix {
    rows: usize,
    cols: usize,
    shape: TileShape,
    params: EncodingParams,
    tiles: Vec<(Block, CrossbarTile)>,
}

impl ProgrammedMatrix {
    pub fn program<R: Rng + ?Sized>(
        a: &QuantizedMatrix,
        shape: TileShape,
        params: &EncodingParams,
        device: &Device,
        rng: &mut R,
    ) -> Result<Self> {
        params.check()?;
        let mut tiles = Vec::with_capacity(tile_count(a.rows(), a.cols(), shape.rows, shape.cols));
        for row0 in (0..a.rows()).step_by(shape.rows) {
            for col0 in (0..a.cols()).step_by(shape.cols) {
                let block = Block { row0, col0, shape };
                let tile = match device.systematic_scope {
                    SystematicScope::Array => program_tile(a, block, params, device, rng)?,
                    SystematicScope::Tile => {
                        let local = Device { ladder: device.ladder.apply_systematic(&device.noise, rng), ..device.clone() };
                        program_tile(a, block, params, &local, rng)?
                    }
                };
                tiles.push((block, tile));
            }
        }
        Ok(Self { rows: a.rows(), cols: a.cols(), shape, params: *params, tiles })
    }

    pub fn sub_op_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn tiles(&self) -> impl Iterator<Item = (&Block, &CrossbarTile)> {
        self.tiles.iter().map(|(b, t)| (b, t))
    }

    /// Runs every tile on the matching slice of `x` and accumulates the
    /// retrieved partial products.
    pub fn matvec(&self, x: &[f64], mut observer: Option<&mut dyn TileObserver>) -> Result<MvmResult> {
        Error::check_len(self.cols, x.len())?;
        let mut y = vec![0.0; self.rows];
        let mut voltages = vec![0.0; self.rows];
        let mut padded = vec![0.0; self.shape.cols];
        for (block, tile) in &self.tiles {
            padded.iter_mut().for_each(|v| *v = 0.0);
            let end = (block.col0 + self.shape.cols).min(self.cols);
            padded[..end - block.col0].copy_from_slice(&x[block.col0..end]);
            let currents = encode_input(&padded, &self.params.input());
            let v = simulate_tile(tile, &currents)?;
            let partial = retrieve(&v, &currents, tile.block_row_sums(), &self.params)?;
            if let Some(obs) = observer.as_deref_mut() {
                obs.observe(&TileTrace {
                    block_row: block.row0 / self.shape.rows,
                    block_col: block.col0 / self.shape.cols,
                    currents: &currents,
                    voltages: &v,
                    partial: &partial,
                });
            }
            let live = (self.rows - block.row0).min(self.shape.rows);
            for r in 0..live {
                y[block.row0 + r] += partial[r];
                voltages[block.row0 + r] += v[r];
            }
        }
        Ok(MvmResult { y_tilde: y, voltages, sub_op_count: self.tiles.len() })
    }
}

/// Full multiplexed product: programs every tile of `a` (drawing fresh
/// cell noise), runs it on `x`, and accumulates.
pub fn crossbar_matvec<R: Rng + ?Sized>(
    a: &QuantizedMatrix,
    x: &[f64],
    shape: TileShape,
    device: &Device,
    input: &InputEncoding,
    rng: &mut R,
    observer: Option<&mut dyn TileObserver>,
) -> Result<MvmResult> {
    Error::check_len(a.cols(), x.len())?;
    let map = weight_to_resistance_map(a.level_set(), &device.ladder);
    let params = EncodingParams::new(*input, map)?;
    ProgrammedMatrix::program(a, shape, &params, device, rng)?.matvec(x, observer)
}

/// Root-mean-square difference of two equal-length vectors.
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    math::sqrt(s / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::ideal_ladder;
    use crate::quantizer::{quantize, LevelSet};
    use crate::rng;

    fn table2() -> ResistanceLadder {
        ideal_ladder(4, 9402.0, 9919.5).unwrap()
    }

    #[test]
    fn input_encoding_examples() {
        let e = InputEncoding::UNIT_TO_HALF_MILLIAMP;
        assert_eq!(encode_input(&[0.0, 1.0], &e), vec![0.0, 5e-4]);
        assert_eq!(encode_input(&[0.5], &e), vec![2.5e-4]);
        assert_eq!(encode_input(&[0.0, 0.0, 0.0], &e), vec![0.0; 3]);
        let r = InputEncoding::for_range(-2.0, 2.0, 1.0).unwrap();
        assert_eq!(encode_input(&[-2.0, 2.0], &r), vec![0.0, 1.0]);
        assert!(InputEncoding::for_range(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn resistance_map_examples() {
        // levels as printed (rounded) for the toy layer
        let printed = LevelSet::new(8.58, (12.01 - 8.58) / 3.0, 4).unwrap();
        let m = weight_to_resistance_map(&printed, &table2());
        assert!((m.a_r - 150.87).abs() < 5e-3, "{m:?}");
        assert!((m.b_r - 8107.50).abs() < 5e-2, "{m:?}");
        // unrounded optimum of the same layer
        let exact = LevelSet::new(8.575, (12.015 - 8.575) / 3.0, 4).unwrap();
        let m = weight_to_resistance_map(&exact, &table2());
        assert!((m.a_r - 150.87).abs() / 150.87 < 5e-3);

        let m = weight_to_resistance_map(&LevelSet::new(0.0, 1.0, 2).unwrap(), &ideal_ladder(2, 0.0, 1.0).unwrap());
        assert_eq!((m.a_r, m.b_r, m.degenerate), (1.0, 0.0, false));
        let m = weight_to_resistance_map(&LevelSet::new(-1.0, 2.0, 2).unwrap(), &ideal_ladder(2, 100.0, 300.0).unwrap());
        assert_eq!((m.a_r, m.b_r), (100.0, 200.0));
    }

    #[test]
    fn degenerate_map_uses_midpoint() {
        let m = weight_to_resistance_map(&LevelSet::new(0.3, 0.0, 1).unwrap(), &ideal_ladder(1, 100.0, 200.0).unwrap());
        assert!(m.degenerate);
        assert_eq!(m.a_r, 1.0);
        assert!((m.a_r * 0.3 + m.b_r - 150.0).abs() < 1e-12);
    }

    #[test]
    fn toy_layer_hits_ladder_endpoints() {
        let w = Matrix::from_rows(&[[11.97, 12.06], [8.57, 8.58]]).unwrap();
        let a = quantize(&w, 4).unwrap();
        let device = Device::ideal(table2());
        let map = weight_to_resistance_map(a.level_set(), &device.ladder);
        let params = EncodingParams::new(InputEncoding::UNIT_TO_HALF_MILLIAMP, map).unwrap();
        let tile = program_tile(&a, Block::whole(&a), &params, &device, &mut rng::root(0)).unwrap();
        let r = tile.resistances();
        for c in 0..2 {
            assert!((r[(0, c)] - 9919.5).abs() < 0.1);
            assert!((r[(1, c)] - 9402.0).abs() < 0.1);
            assert_eq!(r[(0, c)], params.a_r * a.values()[(0, c)] + params.b_r);
        }
    }

    #[test]
    fn cell_noise_is_unbiased() {
        let w = Matrix::from_rows(&[[0.0, 1.0, 2.0, 3.0]]).unwrap();
        let a = quantize(&w, 4).unwrap();
        let noise = NoiseSpec::new(0.0, 50.0, 0).unwrap();
        let device = Device::new(table2(), noise);
        let map = weight_to_resistance_map(a.level_set(), &device.ladder);
        let params = EncodingParams::new(InputEncoding::UNIT_TO_HALF_MILLIAMP, map).unwrap();
        let block = Block { row0: 0, col0: 2, shape: TileShape { rows: 1, cols: 1 } };
        let mut r = rng::root(77);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| program_tile(&a, block, &params, &device, &mut r).unwrap().resistances()[(0, 0)])
            .sum::<f64>()
            / n as f64;
        let nominal = params.a_r * a.values()[(0, 2)] + params.b_r;
        assert!((mean - nominal).abs() < 2.0, "{mean} vs {nominal}");
    }

    #[test]
    fn simulate_examples() {
        let t = CrossbarTile::from_resistances(Matrix::from_rows(&[[1e4]]).unwrap()).unwrap();
        assert!((simulate_tile(&t, &[1e-4]).unwrap()[0] - 1.0).abs() < 1e-15);
        let t = CrossbarTile::from_resistances(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(simulate_tile(&t, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(simulate_tile(&t, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(simulate_tile(&t, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn retrieve_without_offsets_is_plain_division() {
        let p = EncodingParams { a_i: 2.0, b_i: 0.0, a_r: 5.0, b_r: 0.0 };
        let y = retrieve(&[10.0, -20.0], &[1.0, 1.0], &[3.0, 4.0], &p).unwrap();
        assert_eq!(y, vec![1.0, -2.0]);
        let bad = EncodingParams { a_i: 0.0, ..p };
        assert_eq!(retrieve(&[1.0], &[1.0], &[1.0], &bad), Err(Error::DegenerateEncoding));
    }

    #[test]
    fn tile_counts() {
        assert_eq!(tile_count(128, 784, 4, 4), 6272);
        assert_eq!(tile_count(128, 87, 4, 4), 704);
        assert_eq!(tile_count(1, 1, 4, 4), 1);
        assert_eq!(tile_count(5, 5, 4, 4), 4);
    }

    #[test]
    fn single_tile_matches_multiplexed_path() {
        let w = Matrix::from_fn(4, 4, |r, c| (r as f64 - 1.5) * 0.7 + c as f64 * 0.3);
        let a = quantize(&w, 4).unwrap();
        let x = [0.1, 0.9, 0.4, 0.6];
        let device = Device::ideal(table2());
        let enc = InputEncoding::UNIT_TO_HALF_MILLIAMP;
        let res = crossbar_matvec(&a, &x, TileShape::FOUR_BY_FOUR, &device, &enc, &mut rng::root(0), None).unwrap();
        assert_eq!(res.sub_op_count, 1);
        let map = weight_to_resistance_map(a.level_set(), &device.ladder);
        let params = EncodingParams::new(enc, map).unwrap();
        let tile = program_tile(&a, Block::whole(&a), &params, &device, &mut rng::root(0)).unwrap();
        let currents = encode_input(&x, &enc);
        let v = simulate_tile(&tile, &currents).unwrap();
        let direct = retrieve(&v, &currents, a.row_sums(), &params).unwrap();
        assert_eq!(res.y_tilde, direct);
    }

    #[test]
    fn ragged_tiling_is_exact() {
        let w = Matrix::from_fn(7, 11, |r, c| ((r * 11 + c) as f64 * 0.37).sin());
        let a = quantize(&w, 8).unwrap();
        let x: Vec<f64> = (0..11).map(|i| (i as f64 * 0.29).cos()).collect();
        let exact = a.values().matvec(&x).unwrap();
        let enc = InputEncoding::for_range(-1.0, 1.0, HALF_MILLIAMP).unwrap();
        let device = Device::ideal(ideal_ladder(8, 9402.0, 9919.5).unwrap());
        let res =
            crossbar_matvec(&a, &x, TileShape::new(3, 4).unwrap(), &device, &enc, &mut rng::root(0), None).unwrap();
        assert_eq!(res.sub_op_count, tile_count(7, 11, 3, 4));
        for (y, e) in res.y_tilde.iter().zip(&exact) {
            assert!((y - e).abs() <= 1e-9 * (1.0 + e.abs()), "{y} vs {e}");
        }
    }
}
