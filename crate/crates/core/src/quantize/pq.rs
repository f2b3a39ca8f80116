use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantize::kmeans::{kmeans_train, KMeansModel};

/// Product quantizer: `m` independent sub-codebooks over consecutive slices of a
/// residual vector, plus the largest center-to-center distance inside each one.
#[derive(Clone, Debug, PartialEq)]
pub struct PQModel {
    sub_models: Vec<KMeansModel>,
    max_dist: Vec<f32>,
}

impl PQModel {
    /// Assembles a quantizer and computes the exact per-subspace maximum distances.
    pub fn from_sub_models(sub_models: Vec<KMeansModel>) -> Result<Self> {
        let first = sub_models.first().ok_or_else(|| {
            Error::InvalidParameter("product quantizer needs at least one subspace".into())
        })?;
        let (ksub, sub_dim) = (first.k(), first.dim());
        if !(2..=256).contains(&ksub) {
            return Err(Error::InvalidParameter(format!(
                "sub-codebook size {ksub} outside [2, 256]"
            )));
        }
        if sub_models
            .iter()
            .any(|s| s.k() != ksub || s.dim() != sub_dim)
        {
            return Err(Error::InvalidParameter(
                "sub-codebooks differ in shape".into(),
            ));
        }
        let max_dist = sub_models
            .iter()
            .map(|s| {
                let mut best = 0f64;
                for i in 0..ksub {
                    for j in i + 1..ksub {
                        best = best.max(center_distance(s.center(i), s.center(j)));
                    }
                }
                round_up_f32(best)
            })
            .collect::<Vec<_>>();
        if max_dist.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidParameter(
                "sub-codebook with coincident centers".into(),
            ));
        }
        Ok(Self {
            sub_models,
            max_dist,
        })
    }

    pub fn m(&self) -> usize {
        self.sub_models.len()
    }

    pub fn ksub(&self) -> usize {
        self.sub_models[0].k()
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_models[0].dim()
    }

    pub fn dim(&self) -> usize {
        self.m() * self.sub_dim()
    }

    pub fn sub_models(&self) -> &[KMeansModel] {
        &self.sub_models
    }

    pub fn max_dist(&self) -> &[f32] {
        &self.max_dist
    }

    pub fn center(&self, sub: usize, code: u8) -> &[f32] {
        self.sub_models[sub].center(code as usize)
    }

    /// Euclidean distance between two centers of subspace `sub`.
    pub fn sub_distance(&self, sub: usize, a: u8, b: u8) -> f64 {
        center_distance(self.center(sub, a), self.center(sub, b))
    }

    /// One byte per subspace: the nearest sub-center to each residual slice.
    pub fn encode(&self, r: &[f32]) -> Result<Vec<u8>> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: r.len(),
            });
        }
        Ok(self.encode_unchecked(r))
    }

    pub(crate) fn encode_unchecked(&self, r: &[f32]) -> Vec<u8> {
        r.chunks_exact(self.sub_dim())
            .zip(&self.sub_models)
            .map(|(slice, sub)| sub.nearest(slice) as u8)
            .collect()
    }
}

pub(crate) fn center_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Smallest f32 not below `v`, so a stored maximum never undercuts the true one.
fn round_up_f32(v: f64) -> f32 {
    let f = v as f32;
    if (f as f64) < v {
        f32::from_bits(f.to_bits() + 1)
    } else {
        f
    }
}

/// Trains `m` sub-codebooks of `ksub` centers each on consecutive residual slices.
pub fn pq_train(
    residuals: &Matrix,
    m: usize,
    ksub: usize,
    iters: usize,
    seed: u64,
) -> Result<PQModel> {
    if m == 0 || residuals.cols() % m != 0 {
        return Err(Error::InvalidParameter(format!(
            "{m} subspaces do not divide residual dimension {}",
            residuals.cols()
        )));
    }
    if !(2..=256).contains(&ksub) {
        return Err(Error::InvalidParameter(format!(
            "sub-codebook size {ksub} outside [2, 256]"
        )));
    }
    let sub_dim = residuals.cols() / m;
    let sub_models = (0..m)
        .map(|k| {
            let slice = residuals.column_slice(k * sub_dim, sub_dim);
            kmeans_train(&slice, ksub, iters, seed.wrapping_add(k as u64 + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    PQModel::from_sub_models(sub_models)
}
