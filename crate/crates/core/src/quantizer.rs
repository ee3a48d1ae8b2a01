//! Post-training quantization of a weight matrix onto `N` equidistant levels.
//!
//! The level set `a1, a1 + d, ..., a1 + (N - 1) d` is chosen to minimize the
//! total squared distance between every weight and its nearest level. The
//! two free parameters are found with Powell's method from several starting
//! points, then polished by alternating nearest-level assignment with a
//! least-squares refit of `(a1, d)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::powell::{powell_minimize, Minimum};

pub const POWELL_TOL: f64 = 1e-10;
pub const POWELL_MAX_CYCLES: usize = 40;
const POLISH_MAX_ROUNDS: usize = 100;

/// `n_states` equidistant levels; index `i` (0-based) sits at `a1 + i * d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    a1: f64,
    d: f64,
    n_states: usize,
}

impl LevelSet {
    pub fn new(a1: f64, d: f64, n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::invalid("a level set needs at least one level"));
        }
        if !a1.is_finite() || !d.is_finite() || d < 0.0 {
            return Err(Error::invalid("level parameters must be finite with d >= 0"));
        }
        Ok(Self { a1, d, n_states })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn level(&self, index: usize) -> f64 {
        self.a1 + index as f64 * self.d
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.n_states).map(|i| self.level(i)).collect()
    }

    /// Value of the top level.
    pub fn last(&self) -> f64 {
        self.level(self.n_states - 1)
    }

    /// True when every level has the same value.
    pub fn is_degenerate(&self) -> bool {
        self.n_states == 1 || self.d == 0.0
    }

    /// Index of the level closest to `w`; exact midpoints go to the lower
    /// index.
    #[inline]
    pub fn nearest(&self, w: f64) -> usize {
        if self.is_degenerate() {
            return 0;
        }
        let top = (self.n_states - 1) as f64;
        let t = math::floor((w - self.a1) / self.d).clamp(0.0, top);
        let k = t as usize;
        if k + 1 < self.n_states && (w - self.level(k + 1)).abs() < (w - self.level(k)).abs() {
            k + 1
        } else {
            k
        }
    }
}

/// Sum over all weights of the squared distance to the nearest level.
pub fn sse(weights: &[f64], levels: &LevelSet) -> f64 {
    weights
        .iter()
        .map(|&w| {
            let e = w - levels.level(levels.nearest(w));
            e * e
        })
        .sum()
}

/// A weight matrix snapped onto a [`LevelSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMatrix {
    values: Matrix,
    level_set: LevelSet,
    assignment: Vec<usize>,
    row_sums: Vec<f64>,
    sse: f64,
    converged: bool,
}

impl QuantizedMatrix {
    /// Snaps every entry of `weights` to its nearest level of `level_set`.
    pub fn snap(weights: &Matrix, level_set: LevelSet) -> Self {
        let assignment: Vec<usize> = weights.as_slice().iter().map(|&w| level_set.nearest(w)).collect();
        let mut q = Self::from_parts(weights.rows(), weights.cols(), level_set, assignment)
            .expect("assignment built from the weights has the right shape");
        q.sse = weights.as_slice().iter().zip(q.values.as_slice()).map(|(w, a)| (w - a) * (w - a)).sum();
        q
    }

    /// Rebuilds a quantized matrix from stored level indices.
    pub fn from_parts(rows: usize, cols: usize, level_set: LevelSet, assignment: Vec<usize>) -> Result<Self> {
        Error::check_len(rows * cols, assignment.len())?;
        if let Some(&bad) = assignment.iter().find(|&&i| i >= level_set.n_states()) {
            return Err(Error::invalid(alloc::format!("level index {bad} out of range")));
        }
        let values = Matrix::from_vec(rows, cols, assignment.iter().map(|&i| level_set.level(i)).collect())?;
        let row_sums = values.row_sums();
        Ok(Self { values, level_set, assignment, row_sums, sse: 0.0, converged: true })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn level_set(&self) -> &LevelSet {
        &self.level_set
    }

    /// Row-major level indices.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn level_index(&self, row: usize, col: usize) -> usize {
        self.assignment[row * self.values.cols() + col]
    }

    /// `A * 1`: the sum of each row of the quantized values.
    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Squared error against the weights this matrix was quantized from
    /// (zero when rebuilt from stored parts).
    pub fn sse(&self) -> f64 {
        self.sse
    }

    /// False when the winning minimizer run hit its cycle budget.
    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Result of fitting a level set to a flat list of weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelFit {
    pub level_set: LevelSet,
    pub sse: f64,
    pub converged: bool,
}

/// Quantizes `weights` onto `n_states` equidistant levels.
pub fn quantize(weights: &Matrix, n_states: usize) -> Result<QuantizedMatrix> {
    let fit = fit_levels(weights.as_slice(), n_states)?;
    let mut q = QuantizedMatrix::snap(weights, fit.level_set);
    q.converged = fit.converged;
    Ok(q)
}

/// Finds the level set minimizing [`sse`] over `weights`.
pub fn fit_levels(weights: &[f64], n_states: usize) -> Result<LevelFit> {
    if weights.is_empty() {
        return Err(Error::invalid("cannot quantize an empty weight set"));
    }
    if n_states == 0 {
        return Err(Error::invalid("n_states must be at least 1"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("weights must be finite"));
    }
    let (lo, hi) = weights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
    if n_states == 1 {
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        let level_set = LevelSet::new(mean, 0.0, 1)?;
        return Ok(LevelFit { level_set, sse: sse(weights, &level_set), converged: true });
    }
    if hi == lo {
        let level_set = LevelSet::new(lo, 0.0, n_states)?;
        return Ok(LevelFit { level_set, sse: 0.0, converged: true });
    }

    let sorted = SortedWeights::new(weights);
    let objective = |[a1, d]: [f64; 2]| {
        // |d| keeps the spacing nonnegative without a constrained solver
        let ls = LevelSet { a1, d: d.abs(), n_states };
        sorted.sse(&ls)
    };

    let d0 = (hi - lo) / (n_states - 1) as f64;
    let starts = [
        [lo, d0],
        [lo + 0.5 * d0, 0.5 * d0],
        [lo + 0.5 * d0, 0.75 * d0],
        [lo - 0.5 * d0, 1.25 * d0],
        [lo - 0.5 * d0, 1.5 * d0],
        [lo + 0.5 * d0, d0 * (n_states - 1) as f64 / n_states as f64],
    ];

    let mut best: Option<LevelFit> = None;
    for start in starts {
        let (point, converged) = match powell_minimize(objective, start, POWELL_TOL, POWELL_MAX_CYCLES) {
            Ok(Minimum { point, .. }) => (point, true),
            Err(Error::OptimizationFailure { best_point, .. }) => (best_point, false),
            Err(e) => return Err(e),
        };
        let level_set = polish(weights, LevelSet { a1: point[0], d: point[1].abs(), n_states });
        let candidate = LevelFit { level_set, sse: sse(weights, &level_set), converged };
        // a restart must beat the incumbent by more than round-off to replace it
        let better = match &best {
            None => true,
            Some(b) => candidate.sse < b.sse - 1e-12 * (1.0 + b.sse),
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Weights sorted once, with prefix sums of the centred values, so one
/// [`sse`] evaluation costs `O(N log len)` instead of `O(len)`. Centring
/// keeps the cancellation in `S2 - 2 L S1 + n L^2` small. Agrees with
/// [`sse`] to round-off; exact midpoints may land on either side, which
/// changes nothing since both levels are equally far.
struct SortedWeights {
    sorted: Vec<f64>,
    mean: f64,
    /// `s1[i]`, `s2[i]`: sums of `w - mean` and `(w - mean)^2` over the
    /// first `i` sorted weights.
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl SortedWeights {
    fn new(weights: &[f64]) -> Self {
        let mut sorted = weights.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let mut s1 = Vec::with_capacity(sorted.len() + 1);
        let mut s2 = Vec::with_capacity(sorted.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for &w in &sorted {
            let c = w - mean;
            a += c;
            b += c * c;
            s1.push(a);
            s2.push(b);
        }
        Self { sorted, mean, s1, s2 }
    }

    fn sse(&self, levels: &LevelSet) -> f64 {
        if levels.is_degenerate() {
            return self.segment(0, self.sorted.len(), levels.a1);
        }
        let mut total = 0.0;
        let mut start = 0;
        for k in 0..levels.n_states {
            let end = if k + 1 == levels.n_states {
                self.sorted.len()
            } else {
                let midpoint = levels.a1 + (k as f64 + 0.5) * levels.d;
                start + self.sorted[start..].partition_point(|&w| w <= midpoint)
            };
            total += self.segment(start, end, levels.level(k));
            start = end;
        }
        total
    }

    /// Squared distance of sorted weights `[i, j)` to `level`.
    fn segment(&self, i: usize, j: usize, level: f64) -> f64 {
        if i == j {
            return 0.0;
        }
        let l = level - self.mean;
        let s1 = self.s1[j] - self.s1[i];
        let s2 = self.s2[j] - self.s2[i];
        (s2 - 2.0 * l * s1 + (j - i) as f64 * l * l).max(0.0)
    }
}

/// Alternates nearest-level assignment with an ordinary least-squares refit
/// of `(a1, d)` for that assignment. Never increases the error.
fn polish(weights: &[f64], start: LevelSet) -> LevelSet {
    let mut current = start;
    let mut current_sse = sse(weights, &current);
    let n = weights.len() as f64;
    for _ in 0..POLISH_MAX_ROUNDS {
        let (mut sk, mut skk, mut sw, mut skw) = (0.0, 0.0, 0.0, 0.0);
        for &w in weights {
            let k = current.nearest(w) as f64;
            sk += k;
            skk += k * k;
            sw += w;
            skw += k * w;
        }
        let var_k = skk - sk * sk / n;
        if var_k <= 0.0 {
            break;
        }
        let d = (skw - sk * sw / n) / var_k;
        if !(d > 0.0) {
            break;
        }
        let a1 = (sw - d * sk) / n;
        let next = LevelSet { a1, d, n_states: current.n_states };
        let next_sse = sse(weights, &next);
        if next_sse < current_sse {
            let gain = current_sse - next_sse;
            current = next;
            current_sse = next_sse;
            if gain <= 1e-15 * (1.0 + current_sse) {
                break;
            }
        } else {
            break;
        }
    }
    current
}

/// Exhaustive grid search over `a1 in [min, max]` and
/// `d in [0, 2 (max - min) / max(N - 1, 1)]` with step `grid_resolution`.
/// Only meant for small instances.
pub fn brute_force_oracle(weights: &[f64], n_states: usize, grid_resolution: f64) -> Result<LevelSet> {
    if weights.is_empty() || n_states == 0 || !(grid_resolution > 0.0) {
        return Err(Error::invalid("oracle needs weights, n_states >= 1 and a positive resolution"));
    }
    let (lo, hi) = weights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
    let a_steps = math::ceil((hi - lo) / grid_resolution) as usize;
    let d_max = if n_states == 1 { 0.0 } else { 2.0 * (hi - lo) / (n_states - 1) as f64 };
    let d_steps = math::ceil(d_max / grid_resolution) as usize;
    let mut best = (f64::INFINITY, LevelSet::new(lo, 0.0, n_states)?);
    for i in 0..=a_steps {
        let a1 = (lo + i as f64 * grid_resolution).min(hi);
        for j in 0..=d_steps {
            let d = (j as f64 * grid_resolution).min(d_max);
            let ls = LevelSet { a1, d, n_states };
            let e = sse(weights, &ls);
            if e < best.0 {
                best = (e, ls);
            }
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn eq17() -> Matrix {
        Matrix::from_rows(&[[11.97, 12.06], [8.57, 8.58]]).unwrap()
    }

    #[test]
    fn sse_examples() {
        assert_eq!(sse(&[0.0, 1.0], &LevelSet::new(0.0, 1.0, 2).unwrap()), 0.0);
        assert_eq!(sse(&[0.5], &LevelSet::new(0.0, 1.0, 2).unwrap()), 0.25);
        let ls = LevelSet::new(8.575, (12.015 - 8.575) / 3.0, 4).unwrap();
        // hand residuals: 0.045, 0.045, 0.005, 0.005
        let expected = 2.0 * 0.045f64.powi(2) + 2.0 * 0.005f64.powi(2);
        assert!((sse(eq17().as_slice(), &ls) - expected).abs() < 1e-12);
        assert!((expected - 0.0041).abs() < 1e-12);
    }

    #[test]
    fn midpoint_tie_goes_low() {
        let ls = LevelSet::new(0.0, 1.0, 3).unwrap();
        assert_eq!(ls.nearest(0.5), 0);
        assert_eq!(ls.nearest(1.5), 1);
        assert_eq!(ls.nearest(-7.0), 0);
        assert_eq!(ls.nearest(9.0), 2);
    }

    #[test]
    fn toy_layer_collapses_to_two_values() {
        let q = quantize(&eq17(), 4).unwrap();
        let expected = [12.015, 12.015, 8.575, 8.575];
        for (v, e) in q.values().as_slice().iter().zip(expected) {
            assert!((v - e).abs() < 1e-6, "{:?}", q.values());
        }
        // the outer levels carry the two distinct values
        assert_eq!(q.assignment(), &[3, 3, 0, 0]);
        assert!((q.sse() - 0.0041).abs() < 1e-9);
        assert!(q.converged());
    }

    #[test]
    fn two_points_two_levels() {
        let q = quantize(&Matrix::from_rows(&[[0.0, 1.0]]).unwrap(), 2).unwrap();
        assert!(q.sse() < 1e-18);
        assert!((q.values()[(0, 0)]).abs() < 1e-9 && (q.values()[(0, 1)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sorted_evaluation_matches_direct_sse() {
        use rand::Rng;
        let r = &mut crate::rng::root(11);
        for _ in 0..200 {
            let len = r.random_range(1..300);
            let w: Vec<f64> = (0..len).map(|_| r.random_range(-4.0..4.0)).collect();
            let ls = LevelSet::new(r.random_range(-5.0..1.0), r.random_range(0.0..2.0), r.random_range(1..20)).unwrap();
            let (direct, fast) = (sse(&w, &ls), SortedWeights::new(&w).sse(&ls));
            assert!((direct - fast).abs() <= 1e-9 * (1.0 + direct), "{direct} vs {fast}");
        }
    }

    #[test]
    fn three_points_beat_grid() {
        let w = [0.0, 0.4, 1.0];
        let fit = fit_levels(&w, 2).unwrap();
        let grid = brute_force_oracle(&w, 2, 1e-4).unwrap();
        assert!(fit.sse <= sse(&w, &grid) + 1e-6);
    }

    #[test]
    fn single_level_is_the_mean() {
        let w = Matrix::from_rows(&[[1.0, 2.0, 6.0]]).unwrap();
        let q = quantize(&w, 1).unwrap();
        assert!(q.values().as_slice().iter().all(|&v| v == 3.0));
        let oracle = brute_force_oracle(w.as_slice(), 1, 1e-3).unwrap();
        assert!((oracle.a1() - 3.0).abs() <= 1e-3);
    }

    #[test]
    fn constant_weights() {
        let q = quantize(&Matrix::from_rows(&[[0.7, 0.7]]).unwrap(), 4).unwrap();
        assert_eq!(q.level_set().d(), 0.0);
        assert_eq!(q.values().as_slice(), &[0.7, 0.7]);
    }

    #[test]
    fn oracle_examples() {
        let ls = brute_force_oracle(&[0.0, 1.0], 2, 1e-3).unwrap();
        assert!(ls.a1().abs() <= 1e-3 && (ls.d() - 1.0).abs() <= 1e-3);
        let ls = brute_force_oracle(eq17().as_slice(), 4, 1e-3).unwrap();
        assert!((sse(eq17().as_slice(), &ls) - 0.0041).abs() < 1e-3);
    }

    #[test]
    fn row_sums_are_exact() {
        let w = Matrix::from_rows(&[[0.1, -0.4, 2.0], [1.0, 1.1, -3.0]]).unwrap();
        let q = quantize(&w, 3).unwrap();
        for r in 0..2 {
            let s: f64 = q.values().row(r).iter().sum();
            assert_eq!(q.row_sums()[r], s);
        }
    }

    #[test]
    fn errors() {
        assert!(quantize(&Matrix::zeros(0, 0), 4).is_err());
        assert!(quantize(&Matrix::zeros(1, 1), 0).is_err());
        assert!(LevelSet::new(0.0, -1.0, 2).is_err());
        assert!(QuantizedMatrix::from_parts(1, 2, LevelSet::new(0.0, 1.0, 2).unwrap(), vec![0, 2]).is_err());
    }
}
