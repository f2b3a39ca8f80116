use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{nearest, Matrix};

/// A flat k-means codebook: `k` centers of dimension `dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansModel {
    dim: usize,
    centers: Vec<f32>,
}

impl KMeansModel {
    pub fn new(dim: usize, centers: Vec<f32>) -> Result<Self> {
        if dim == 0 || centers.is_empty() || centers.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} center values do not form rows of dimension {dim}",
                centers.len()
            )));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite center".into()));
        }
        Ok(Self { dim, centers })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn center(&self, i: usize) -> &[f32] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> &[f32] {
        &self.centers
    }

    /// Nearest center index, ties to the lowest index. `v` must have length `dim`.
    #[inline]
    pub fn nearest(&self, v: &[f32]) -> usize {
        nearest(&self.centers, self.dim, v).0
    }

    /// Nearest center and the residual `v - center`.
    pub fn assign(&self, v: &[f32]) -> Result<(usize, Vec<f32>)> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let i = self.nearest(v);
        let residual = v.iter().zip(self.center(i)).map(|(a, c)| a - c).collect();
        Ok((i, residual))
    }

    /// Sum of squared distances from each sample to its nearest center.
    pub fn objective(&self, samples: &Matrix) -> f64 {
        samples
            .iter_rows()
            .map(|r| nearest(&self.centers, self.dim, r).1 as f64)
            .sum()
    }
}

/// Trains `k` centers with distance-weighted seeding followed by Lloyd iterations.
pub fn kmeans_train(samples: &Matrix, k: usize, iters: usize, seed: u64) -> Result<KMeansModel> {
    kmeans_train_traced(samples, k, iters, seed).map(|(m, _)| m)
}

/// Like [`kmeans_train`], also returning the objective after every assignment step.
pub fn kmeans_train_traced(
    samples: &Matrix,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<(KMeansModel, Vec<f64>)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let dim = samples.cols();
    if dim == 0 {
        return Err(Error::InvalidParameter("samples have zero columns".into()));
    }
    let distinct = samples.distinct_rows();
    if distinct < k {
        return Err(Error::InsufficientSamples {
            needed: k,
            got: distinct,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(samples, k, &mut rng);
    let mut trace = Vec::with_capacity(iters + 1);
    let mut prev: Option<Vec<usize>> = None;

    for _ in 0..iters.max(1) {
        let (labels, dists) = assign_all(samples, &centers, dim);
        trace.push(dists.iter().map(|&d| d as f64).sum());
        if prev.as_ref() == Some(&labels) {
            break;
        }
        update_centers(samples, &labels, &dists, &mut centers, dim);
        prev = Some(labels);
    }

    // Identical centers would leave the higher-indexed one without points; re-seed it.
    loop {
        let (_, dists) = assign_all(samples, &centers, dim);
        let dup = (0..k).find(|&j| {
            (0..j).any(|i| centers[i * dim..(i + 1) * dim] == centers[j * dim..(j + 1) * dim])
        });
        match dup {
            Some(j) => {
                let far = farthest(&dists, &[]);
                centers[j * dim..(j + 1) * dim].copy_from_slice(samples.row(far));
            }
            None => {
                let obj: f64 = dists.iter().map(|&d| d as f64).sum();
                if trace.last() != Some(&obj) {
                    trace.push(obj);
                }
                break;
            }
        }
    }

    Ok((KMeansModel { dim, centers }, trace))
}

/// Distance-weighted seeding: each new seed is drawn with probability proportional to
/// its squared distance from the nearest seed already chosen.
fn seed_centers(samples: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let dim = samples.cols();
    let n = samples.rows();
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(samples.row(first));
    let mut d2: Vec<f64> = samples
        .iter_rows()
        .map(|r| crate::matrix::sq_dist(r, samples.row(first)) as f64)
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            0
        };
        let row = samples.row(pick);
        centers.extend_from_slice(row);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            let nd = crate::matrix::sq_dist(samples.row(i), row) as f64;
            if nd < *d {
                *d = nd;
            }
        });
    }
    centers
}

fn assign_all(samples: &Matrix, centers: &[f32], dim: usize) -> (Vec<usize>, Vec<f32>) {
    samples
        .as_slice()
        .par_chunks_exact(dim)
        .map(|r| nearest(centers, dim, r))
        .unzip()
}

fn update_centers(
    samples: &Matrix,
    labels: &[usize],
    dists: &[f32],
    centers: &mut [f32],
    dim: usize,
) {
    let k = centers.len() / dim;
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (r, &l) in samples.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, &v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(r) {
            *s += v as f64;
        }
    }
    let mut used = Vec::new();
    for j in 0..k {
        let c = &mut centers[j * dim..(j + 1) * dim];
        if counts[j] == 0 {
            let far = farthest(dists, &used);
            used.push(far);
            c.copy_from_slice(samples.row(far));
        } else {
            let n = counts[j] as f64;
            for (cv, s) in c.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                *cv = (s / n) as f32;
            }
        }
    }
}

/// Sample farthest from its assigned center, skipping `exclude`; ties to the lowest index.
fn farthest(dists: &[f32], exclude: &[usize]) -> usize {
    let mut best = (0, f32::NEG_INFINITY);
    for (i, &d) in dists.iter().enumerate() {
        if d > best.1 && !exclude.contains(&i) {
            best = (i, d);
        }
    }
    best.0
}
