//! Principal component analysis by eigendecomposition of the sample
//! covariance.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

// cumulative ratios within this of the target count as meeting it
const TARGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k x D`, orthonormal rows, descending variance.
    components: Matrix,
    explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn from_parts(mean: Vec<f64>, components: Matrix, explained_variance_ratio: Vec<f64>) -> Result<Self> {
        Error::check_len(mean.len(), components.cols())?;
        Error::check_len(components.rows(), explained_variance_ratio.len())?;
        Ok(Self { mean, components, explained_variance_ratio })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    /// Number of kept components.
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `components (x - mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.dim(), x.len())?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.components.matvec(&centered)
    }

    pub fn transform_matrix(&self, data: &Matrix) -> Result<Matrix> {
        Error::check_len(self.dim(), data.cols())?;
        let mut out = Matrix::zeros(data.rows(), self.k());
        let mut centered = vec![0.0; self.dim()];
        for (i, x) in data.iter_rows().enumerate() {
            for ((c, a), m) in centered.iter_mut().zip(x).zip(&self.mean) {
                *c = a - m;
            }
            for (j, comp) in self.components.iter_rows().enumerate() {
                out[(i, j)] = math::dot(comp, &centered);
            }
        }
        Ok(out)
    }

    /// `mean + components^T y`.
    pub fn inverse_transform(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.k(), y.len())?;
        let mut x = self.mean.clone();
        for (comp, &c) in self.components.iter_rows().zip(y) {
            math::axpy(c, comp, &mut x);
        }
        Ok(x)
    }
}

/// Keeps the fewest leading components whose explained variance ratios sum
/// to at least `variance_target`.
pub fn fit(data: &Matrix, variance_target: f64) -> Result<PcaModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::invalid("variance target must lie in (0, 1]"));
    }
    let (n, dim) = data.shape();
    if n < 2 || dim == 0 {
        return Err(Error::invalid("PCA needs at least two samples of positive dimension"));
    }
    let mean: Vec<f64> = {
        let mut m = vec![0.0; dim];
        for x in data.iter_rows() {
            math::axpy(1.0, x, &mut m);
        }
        m.iter_mut().for_each(|v| *v /= n as f64);
        m
    };

    // upper triangle of sum_x x x^T, skipping zero entries
    let mut second = vec![0.0; dim * dim];
    let mut nz: Vec<(usize, f64)> = Vec::with_capacity(dim);
    for x in data.iter_rows() {
        nz.clear();
        nz.extend(x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0));
        for (a, &(i, xi)) in nz.iter().enumerate() {
            let row = &mut second[i * dim..(i + 1) * dim];
            for &(j, xj) in &nz[a..] {
                row[j] += xi * xj;
            }
        }
    }
    let denom = (n - 1) as f64;
    let cov = DMatrix::from_fn(dim, dim, |i, j| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        (second[i * dim + j] - n as f64 * mean[i] * mean[j]) / denom
    });
    let total: f64 = (0..dim).map(|i| cov[(i, i)]).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData("all samples are identical".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let ratios: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0) / total).collect();

    let mut k = dim;
    let mut cumulative = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= variance_target - TARGET_SLACK {
            k = i + 1;
            break;
        }
    }

    let mut components = Matrix::zeros(k, dim);
    for (row, &src) in order[..k].iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = (0..dim).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..dim {
            components[(row, c)] = sign * v[c];
        }
    }
    Ok(PcaModel { mean, components, explained_variance_ratio: ratios[..k].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::root(seed);
        Matrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
    }

    #[test]
    fn line_data_needs_one_component() {
        let data = Matrix::from_fn(6, 2, |i, j| (i as f64) * if j == 0 { 1.0 } else { 2.0 });
        let p = fit(&data, 0.9).unwrap();
        assert_eq!(p.k(), 1);
        assert!((p.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_aligned_data_recovers_x() {
        let data = Matrix::from_rows(&[vec![-2.0, 0.1], vec![2.0, 0.1], vec![-1.0, -0.1], vec![1.0, -0.1]]).unwrap();
        let p = fit(&data, 0.5).unwrap();
        assert_eq!(p.k(), 1);
        for x in data.iter_rows() {
            assert!((p.transform(x).unwrap()[0].abs() - x[0].abs()).abs() < 1e-12);
        }
        assert_eq!(p.transform(p.mean()).unwrap(), vec![0.0]);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let data = Matrix::from_fn(5, 3, |_, j| j as f64);
        assert!(matches!(fit(&data, 0.9), Err(Error::DegenerateData(_))));
        assert!(fit(&Matrix::zeros(1, 3), 0.9).is_err());
        assert!(fit(&random(4, 2, 0), 0.0).is_err());
    }

    #[test]
    fn full_model_round_trips() {
        let data = random(50, 10, 1);
        let p = fit(&data, 1.0).unwrap();
        assert_eq!(p.k(), 10);
        for x in data.iter_rows() {
            let back = p.inverse_transform(&p.transform(x).unwrap()).unwrap();
            assert!(back.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-6));
        }
    }

    #[test]
    fn model_invariants() {
        let data = random(80, 12, 2);
        let p = fit(&data, 0.8).unwrap();
        let c = p.components();
        for i in 0..p.k() {
            for j in 0..p.k() {
                let d = math::dot(c.row(i), c.row(j));
                assert!((d - f64::from(u8::from(i == j))).abs() < 1e-8);
            }
            let pivot = c.row(i).iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(pivot > 0.0);
        }
        let r = p.explained_variance_ratio();
        assert!(r.windows(2).all(|w| w[0] >= w[1]) && r.iter().all(|v| *v >= 0.0));
        assert!(r.iter().sum::<f64>() >= 0.8 && r[..r.len() - 1].iter().sum::<f64>() < 0.8);

        // ratios recomputed from projected training data
        let t = p.transform_matrix(&data).unwrap();
        let n = data.rows() as f64;
        let total: f64 = (0..12)
            .map(|j| {
                let col: Vec<f64> = data.iter_rows().map(|x| x[j]).collect();
                let m = col.iter().sum::<f64>() / n;
                col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
            })
            .sum();
        for j in 0..p.k() {
            let col: Vec<f64> = t.iter_rows().map(|x| x[j]).collect();
            let m = col.iter().sum::<f64>() / n;
            assert!(m.abs() < 1e-6);
            let var = col.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
            assert!((var / total - r[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn sparse_and_dense_rows_agree() {
        let mut data = random(30, 5, 3);
        for i in 0..30 {
            data[(i, i % 5)] = 0.0;
        }
        let p = fit(&data, 1.0).unwrap();
        // dense oracle for the leading variance
        let n = 30.0;
        let means: Vec<f64> = (0..5).map(|j| data.iter_rows().map(|x| x[j]).sum::<f64>() / n).collect();
        let cov = DMatrix::from_fn(5, 5, |a, b| {
            data.iter_rows().map(|x| (x[a] - means[a]) * (x[b] - means[b])).sum::<f64>() / (n - 1.0)
        });
        let trace: f64 = (0..5).map(|i| cov[(i, i)]).sum();
        let top = SymmetricEigen::new(cov).eigenvalues.max();
        assert!((p.explained_variance_ratio()[0] - top / trace).abs() < 1e-10);
    }
}
