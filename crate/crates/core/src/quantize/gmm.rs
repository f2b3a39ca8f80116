use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantize::kmeans::kmeans_train;

/// Lower bound applied to every diagonal variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Rows per work unit; partial sums are combined in chunk order so results do not
/// depend on the thread count.
const CHUNK: usize = 512;

/// Diagonal-covariance Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GMMModel {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    dim: usize,
}

impl GMMModel {
    /// Validates shapes, floors variances and renormalizes weights to sum to one.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() % k != 0 || means.len() != variances.len() || means.is_empty() {
            return Err(Error::InvalidParameter(
                "inconsistent mixture shapes".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(
                "mixture weights must be positive".into(),
            ));
        }
        if means.iter().chain(&variances).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite mixture parameter".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            dim: means.len() / k,
            weights: weights.iter().map(|w| w / total).collect(),
            means,
            variances: variances
                .into_iter()
                .map(|v| v.max(VARIANCE_FLOOR))
                .collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dim..(k + 1) * self.dim]
    }

    /// Per-component `ln(w_k · N(x; μ_k, σ_k²))`.
    fn log_joint(&self, x: &[f32], norm: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mu = self.mean(k);
            let var = self.variance(k);
            let mut q = 0.0;
            for ((&xv, &m), &v) in x.iter().zip(mu).zip(var) {
                let d = xv as f64 - m;
                q += d * d / v;
            }
            *o = norm[k] - 0.5 * q;
        }
    }

    fn log_norms(&self) -> Vec<f64> {
        (0..self.k())
            .map(|k| {
                let logdet: f64 = self.variance(k).iter().map(|v| (2.0 * PI * v).ln()).sum();
                self.weights[k].ln() - 0.5 * logdet
            })
            .collect()
    }

    /// Posterior responsibilities of every component for one sample.
    pub fn posteriors(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let norm = self.log_norms();
        let mut lp = vec![0.0; self.k()];
        self.log_joint(x, &norm, &mut lp);
        let lse = log_sum_exp(&lp);
        Ok(lp.iter().map(|l| (l - lse).exp()).collect())
    }

    /// Responsibilities for every row, `n × k` row-major.
    pub fn posteriors_all(&self, samples: &Matrix) -> Result<Vec<f64>> {
        if samples.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: samples.cols(),
            });
        }
        let norm = self.log_norms();
        let k = self.k();
        let mut out = vec![0.0; samples.rows() * k];
        for (x, o) in samples.iter_rows().zip(out.chunks_exact_mut(k)) {
            self.log_joint(x, &norm, o);
            let lse = log_sum_exp(o);
            o.iter_mut().for_each(|l| *l = (*l - lse).exp());
        }
        Ok(out)
    }

    /// Total log-likelihood of the samples.
    pub fn log_likelihood(&self, samples: &Matrix) -> f64 {
        let norm = self.log_norms();
        let mut lp = vec![0.0; self.k()];
        samples
            .iter_rows()
            .map(|x| {
                self.log_joint(x, &norm, &mut lp);
                log_sum_exp(&lp)
            })
            .sum()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Trains a `k`-component diagonal mixture by EM, initialized from k-means.
pub fn gmm_train(samples: &Matrix, k: usize, iters: usize, seed: u64) -> Result<GMMModel> {
    gmm_train_traced(samples, k, iters, seed).map(|(m, _)| m)
}

/// Like [`gmm_train`], also returning the log-likelihood before each M-step and after
/// the last one.
pub fn gmm_train_traced(
    samples: &Matrix,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<(GMMModel, Vec<f64>)> {
    let (n, d) = (samples.rows(), samples.cols());
    let km = kmeans_train(samples, k, 10, seed)?;

    let mut global_mean = vec![0f64; d];
    for r in samples.iter_rows() {
        for (m, v) in global_mean.iter_mut().zip(r) {
            *m += *v as f64 / n as f64;
        }
    }
    let mut global_var = vec![0f64; d];
    for r in samples.iter_rows() {
        for ((gv, m), v) in global_var.iter_mut().zip(&global_mean).zip(r) {
            *gv += (*v as f64 - m).powi(2) / n as f64;
        }
    }

    let mut counts = vec![0usize; k];
    let mut sq = vec![0f64; k * d];
    for r in samples.iter_rows() {
        let j = km.nearest(r);
        counts[j] += 1;
        for ((s, v), c) in sq[j * d..(j + 1) * d].iter_mut().zip(r).zip(km.center(j)) {
            *s += (*v as f64 - *c as f64).powi(2);
        }
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c.max(1) as f64 / n as f64).collect();
    let means: Vec<f64> = km.centers().iter().map(|&c| c as f64).collect();
    let variances: Vec<f64> = (0..k * d)
        .map(|i| {
            let c = counts[i / d];
            if c >= 2 {
                sq[i] / c as f64
            } else {
                global_var[i % d]
            }
        })
        .collect();
    let mut model = GMMModel::new(weights, means, variances)?;

    let mut trace = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let stats = e_step(&model, samples);
        trace.push(stats.log_likelihood);
        model = m_step(&model, &stats, samples, &global_var)?;
    }
    trace.push(model.log_likelihood(samples));
    Ok((model, trace))
}

struct Stats {
    log_likelihood: f64,
    nk: Vec<f64>,
    /// Σ γ·(x − μ_old)
    first: Vec<f64>,
    /// Σ γ·(x − μ_old)²
    second: Vec<f64>,
    /// Per-sample log-likelihood, for re-seeding degenerate components.
    per_sample: Vec<f64>,
}

fn e_step(model: &GMMModel, samples: &Matrix) -> Stats {
    let (k, d) = (model.k(), model.dim());
    let norm = model.log_norms();
    let parts: Vec<Stats> = samples
        .as_slice()
        .par_chunks(CHUNK * d)
        .map(|chunk| {
            let mut s = Stats {
                log_likelihood: 0.0,
                nk: vec![0.0; k],
                first: vec![0.0; k * d],
                second: vec![0.0; k * d],
                per_sample: Vec::with_capacity(chunk.len() / d),
            };
            let mut lp = vec![0.0; k];
            for x in chunk.chunks_exact(d) {
                model.log_joint(x, &norm, &mut lp);
                let lse = log_sum_exp(&lp);
                s.log_likelihood += lse;
                s.per_sample.push(lse);
                for j in 0..k {
                    let g = (lp[j] - lse).exp();
                    if g == 0.0 {
                        continue;
                    }
                    s.nk[j] += g;
                    let mu = model.mean(j);
                    for t in 0..d {
                        let diff = x[t] as f64 - mu[t];
                        s.first[j * d + t] += g * diff;
                        s.second[j * d + t] += g * diff * diff;
                    }
                }
            }
            s
        })
        .collect();
    let mut total = Stats {
        log_likelihood: 0.0,
        nk: vec![0.0; k],
        first: vec![0.0; k * d],
        second: vec![0.0; k * d],
        per_sample: Vec::with_capacity(samples.rows()),
    };
    for p in parts {
        total.log_likelihood += p.log_likelihood;
        total.nk.iter_mut().zip(&p.nk).for_each(|(a, b)| *a += b);
        total
            .first
            .iter_mut()
            .zip(&p.first)
            .for_each(|(a, b)| *a += b);
        total
            .second
            .iter_mut()
            .zip(&p.second)
            .for_each(|(a, b)| *a += b);
        total.per_sample.extend(p.per_sample);
    }
    total
}

fn m_step(model: &GMMModel, s: &Stats, samples: &Matrix, global_var: &[f64]) -> Result<GMMModel> {
    let (k, d) = (model.k(), model.dim());
    let n = samples.rows() as f64;
    let mut weights = vec![0.0; k];
    let mut means = vec![0.0; k * d];
    let mut variances = vec![0.0; k * d];
    let mut reseeded: Vec<usize> = Vec::new();
    for j in 0..k {
        if s.nk[j] < 1e-8 {
            // worst-explained sample not already used
            let mut pick = None;
            for (i, &ll) in s.per_sample.iter().enumerate() {
                if reseeded.contains(&i) {
                    continue;
                }
                if pick.is_none_or(|(_, best)| ll < best) {
                    pick = Some((i, ll));
                }
            }
            let i = pick.map_or(0, |(i, _)| i);
            reseeded.push(i);
            log::warn!("mixture component {j} lost all responsibility; re-seeding from sample {i}");
            weights[j] = 1.0 / n;
            for t in 0..d {
                means[j * d + t] = samples.row(i)[t] as f64;
                variances[j * d + t] = global_var[t];
            }
            continue;
        }
        weights[j] = s.nk[j] / n;
        let mu_old = model.mean(j);
        for t in 0..d {
            let shift = s.first[j * d + t] / s.nk[j];
            means[j * d + t] = mu_old[t] + shift;
            variances[j * d + t] = s.second[j * d + t] / s.nk[j] - shift * shift;
        }
    }
    GMMModel::new(weights, means, variances)
}
