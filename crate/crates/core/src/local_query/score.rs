//! Normalized residual-code similarity through per-subspace lookup tables.

use crate::error::{Error, Result};
use crate::quantize::PQModel;

/// How a query residual is compared with reference codes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreMode {
    /// Quantized query code against quantized reference code.
    #[default]
    Symmetric,
    /// Raw query residual against reference sub-centers, clamped to [0, 1].
    Asymmetric,
}

/// `m` tables of `1 - ‖c_i − c_j‖ / d_k` for every center pair of each subspace.
#[derive(Clone, Debug)]
pub struct PqScorer {
    m: usize,
    ksub: usize,
    tables: Vec<f32>,
    max_dist: Vec<f64>,
}

impl PqScorer {
    pub fn new(pq: &PQModel) -> Self {
        let (m, ksub) = (pq.m(), pq.ksub());
        let mut tables = vec![0f32; m * ksub * ksub];
        let mut max_dist = vec![0f64; m];
        for k in 0..m {
            let d: Vec<f64> = (0..ksub * ksub)
                .map(|i| pq.sub_distance(k, (i / ksub) as u8, (i % ksub) as u8))
                .collect();
            let dmax = d.iter().copied().fold(0.0, f64::max);
            for (e, &di) in tables[k * ksub * ksub..(k + 1) * ksub * ksub]
                .iter_mut()
                .zip(&d)
            {
                *e = (1.0 - di / dmax).clamp(0.0, 1.0) as f32;
            }
            max_dist[k] = dmax;
        }
        Self {
            m,
            ksub,
            tables,
            max_dist,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ksub(&self) -> usize {
        self.ksub
    }

    /// Symmetric score of two codes; both must have length `m`.
    #[inline]
    pub fn score(&self, a: &[u8], b: &[u8]) -> f32 {
        debug_assert!(a.len() == self.m && b.len() == self.m);
        let kk = self.ksub * self.ksub;
        let mut s = 0f32;
        for k in 0..self.m {
            s += self.tables[k * kk + a[k] as usize * self.ksub + b[k] as usize];
        }
        s / self.m as f32
    }

    pub fn checked_score(&self, a: &[u8], b: &[u8]) -> Result<f32> {
        for c in [a, b] {
            if c.len() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    got: c.len(),
                });
            }
            if c.iter().any(|&v| v as usize >= self.ksub) {
                return Err(Error::InvalidParameter(format!(
                    "code outside {} centers",
                    self.ksub
                )));
            }
        }
        Ok(self.score(a, b))
    }

    /// Per-query table for the asymmetric mode: `m × ksub` terms against a raw residual.
    pub fn query_table(&self, pq: &PQModel, residual: &[f32]) -> Vec<f32> {
        let sd = pq.sub_dim();
        let mut out = vec![0f32; self.m * self.ksub];
        for k in 0..self.m {
            let r = &residual[k * sd..(k + 1) * sd];
            for c in 0..self.ksub {
                let d = crate::quantize::pq_center_distance(r, pq.center(k, c as u8));
                out[k * self.ksub + c] = (1.0 - d / self.max_dist[k]).clamp(0.0, 1.0) as f32;
            }
        }
        out
    }

    #[inline]
    pub fn score_with_table(&self, table: &[f32], b: &[u8]) -> f32 {
        let mut s = 0f32;
        for k in 0..self.m {
            s += table[k * self.ksub + b[k] as usize];
        }
        s / self.m as f32
    }
}

/// Direct evaluation of the score from the model, without tables.
pub fn pq_score_direct(pq: &PQModel, a: &[u8], b: &[u8]) -> f64 {
    let m = pq.m();
    let mut s = 0f64;
    for k in 0..m {
        let d = crate::quantize::pq_center_distance(pq.center(k, a[k]), pq.center(k, b[k]));
        s += 1.0 - d / pq.max_dist()[k] as f64;
    }
    s / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::quantize::{pq_train, KMeansModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> PQModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..600 * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
        pq_train(&Matrix::new(600, 16, data).unwrap(), 4, 16, 8, seed).unwrap()
    }

    #[test]
    fn identical_codes_score_one() {
        let s = PqScorer::new(&model(1));
        for c in 0..16u8 {
            assert_eq!(s.score(&[c, c, c, c], &[c, c, c, c]), 1.0);
        }
    }

    #[test]
    fn farthest_pair_scores_zero() {
        let line = |a: f32, b: f32, c: f32| KMeansModel::new(1, vec![a, b, c]).unwrap();
        let pq = PQModel::from_sub_models(vec![line(0.0, 1.0, 3.0), line(-2.0, 0.0, 5.0)]).unwrap();
        let s = PqScorer::new(&pq);
        assert_eq!(s.score(&[0, 0], &[2, 2]), 0.0);
        assert!(pq_score_direct(&pq, &[0, 0], &[2, 2]).abs() < 1e-6);
        assert!(
            (s.score(&[0, 1], &[1, 2]) as f64 - (1.0 - 1.0 / 3.0 + 1.0 - 5.0 / 7.0) / 2.0).abs()
                < 1e-6
        );
    }

    #[test]
    fn tables_match_direct_formula() {
        let pq = model(2);
        let s = PqScorer::new(&pq);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let a: Vec<u8> = (0..4).map(|_| rng.random_range(0..16)).collect();
            let b: Vec<u8> = (0..4).map(|_| rng.random_range(0..16)).collect();
            let t = s.score(&a, &b);
            assert!((0.0..=1.0).contains(&t));
            assert_eq!(t, s.score(&b, &a));
            assert!((t as f64 - pq_score_direct(&pq, &a, &b)).abs() < 1e-6);
        }
        assert!(s.checked_score(&[0; 3], &[0; 4]).is_err());
    }

    #[test]
    fn asymmetric_mode_is_clamped_and_agrees_on_centers() {
        let pq = model(4);
        let s = PqScorer::new(&pq);
        let codes = [3u8, 7, 1, 12];
        let residual: Vec<f32> = (0..4)
            .flat_map(|k| pq.center(k, codes[k]).to_vec())
            .collect();
        let t = s.query_table(&pq, &residual);
        assert_eq!(s.score_with_table(&t, &codes), 1.0);
        let far = vec![100.0f32; 16];
        let t = s.query_table(&pq, &far);
        assert_eq!(s.score_with_table(&t, &codes), 0.0);
    }
}
