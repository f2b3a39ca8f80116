use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Principal-component projection without whitening.
#[derive(Clone, Debug, PartialEq)]
pub struct PCAModel {
    mean: Vec<f32>,
    /// `d_out` rows of length `d_in`, orthonormal, by descending eigenvalue.
    basis: Vec<f32>,
    d_out: usize,
}

impl PCAModel {
    pub fn new(mean: Vec<f32>, basis: Vec<f32>, d_out: usize) -> Result<Self> {
        let d_in = mean.len();
        if d_in == 0 || d_out == 0 || d_out > d_in || basis.len() != d_in * d_out {
            return Err(Error::InvalidParameter(format!(
                "PCA basis of {} values does not match {d_out} x {d_in}",
                basis.len()
            )));
        }
        Ok(Self { mean, basis, d_out })
    }

    pub fn d_in(&self) -> usize {
        self.mean.len()
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn basis(&self) -> &[f32] {
        &self.basis
    }

    pub fn component(&self, i: usize) -> &[f32] {
        &self.basis[i * self.d_in()..(i + 1) * self.d_in()]
    }

    /// `basis · (v − mean)`.
    pub fn project(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.d_in() {
            return Err(Error::DimensionMismatch {
                expected: self.d_in(),
                got: v.len(),
            });
        }
        let centered: Vec<f64> = v
            .iter()
            .zip(&self.mean)
            .map(|(a, m)| *a as f64 - *m as f64)
            .collect();
        Ok((0..self.d_out)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(&centered)
                    .map(|(b, c)| *b as f64 * c)
                    .sum::<f64>() as f32
            })
            .collect())
    }

    pub fn project_all(&self, samples: &Matrix) -> Result<Matrix> {
        let mut out = Vec::with_capacity(samples.rows() * self.d_out);
        for r in samples.iter_rows() {
            out.extend(self.project(r)?);
        }
        Matrix::new(samples.rows(), self.d_out, out)
    }
}

/// Fits the top `d_out` principal directions of the mean-centered samples.
pub fn pca_fit(samples: &Matrix, d_out: usize) -> Result<PCAModel> {
    let (n, d) = (samples.rows(), samples.cols());
    if d_out == 0 || d_out > d {
        return Err(Error::InvalidParameter(format!(
            "output dimension {d_out} outside [1, {d}]"
        )));
    }
    if n <= d_out {
        return Err(Error::InsufficientSamples {
            needed: d_out + 1,
            got: n,
        });
    }
    let mut mean = vec![0f64; d];
    for r in samples.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += *v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0f64; d];
    for r in samples.iter_rows() {
        for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
            *c = *v as f64 - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-10 * d as f64;
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > tol).count();
    if top <= 0.0 || rank < d_out {
        return Err(Error::InsufficientRank {
            needed: d_out,
            rank,
        });
    }

    let mut basis = Vec::with_capacity(d_out * d);
    for &i in order.iter().take(d_out) {
        let col = eig.eigenvectors.column(i);
        // sign convention: largest-magnitude coordinate positive
        let mut pivot = 0;
        for j in 1..d {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        basis.extend(col.iter().map(|v| (v * sign) as f32));
    }
    PCAModel::new(mean.iter().map(|&m| m as f32).collect(), basis, d_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn correlated(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix: Vec<f64> = (0..cols * cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let z: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
            for i in 0..cols {
                let v: f64 = (0..cols)
                    .map(|j| mix[i * cols + j] * z[j] / (1.0 + j as f64))
                    .sum();
                data.push(v as f32);
            }
        }
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn line_in_3d_keeps_all_variance() {
        let rows: Vec<[f32; 3]> = (0..40)
            .map(|i| {
                let t = i as f32 * 0.25 - 3.0;
                [1.0 + t, 2.0 - 2.0 * t, 0.5 * t]
            })
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let pca = pca_fit(&m, 1).unwrap();
        let proj = pca.project_all(&m).unwrap();
        let total: f64 = m
            .iter_rows()
            .map(|r| {
                r.iter()
                    .zip(pca.mean())
                    .map(|(v, mu)| ((*v - *mu) as f64).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 40.0;
        let kept: f64 = proj.iter_rows().map(|r| (r[0] as f64).powi(2)).sum::<f64>() / 40.0;
        assert!(
            (total - kept).abs() < 1e-6 * total.max(1.0),
            "{total} vs {kept}"
        );
        assert!(matches!(
            pca_fit(&m, 2),
            Err(Error::InsufficientRank { .. })
        ));
    }

    #[test]
    fn mean_projects_to_zero() {
        let m = correlated(200, 12, 1);
        let pca = pca_fit(&m, 4).unwrap();
        let p = pca.project(&pca.mean().to_vec()).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn basis_is_orthonormal_and_projection_decorrelated() {
        let m = correlated(500, 16, 2);
        let pca = pca_fit(&m, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = pca
                    .component(i)
                    .iter()
                    .zip(pca.component(j))
                    .map(|(a, b)| *a as f64 * *b as f64)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-6);
            }
        }
        let p = pca.project_all(&m).unwrap();
        let n = p.rows() as f64;
        let mut var = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                let c: f64 = p
                    .iter_rows()
                    .map(|r| r[i] as f64 * r[j] as f64)
                    .sum::<f64>()
                    / n;
                if i == j {
                    var.push(c);
                } else {
                    assert!(c.abs() < 1e-6 * 10.0, "cov[{i}][{j}] = {c}");
                }
            }
        }
        assert!(var.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn too_few_samples() {
        let m = correlated(4, 8, 3);
        assert!(matches!(
            pca_fit(&m, 4),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
