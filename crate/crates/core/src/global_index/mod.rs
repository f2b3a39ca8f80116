//! Frame signatures from dense features (PCA, first-order Fisher vector, sign bits)
//! and the Hamming-clustered index over them.

pub mod gdsc;
mod store;

use std::collections::BTreeSet;

use rayon::prelude::*;

pub use gdsc::{GlobalRawFrame, GLOBAL_FEATURE_DIM};
pub use store::{GIDX_MAGIC, GIDX_VERSION};

use crate::bits::BitCode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantize::{BinaryCenters, GMMModel, PCAModel};

/// Mean-gradient Fisher vector, `k`-major:
/// `g_k = 1 / (n √w_k) · Σ_i γ_ik (x_i − μ_k) / σ_k`.
pub fn fisher_vector(features: &Matrix, gmm: &GMMModel) -> Result<Vec<f64>> {
    let n = features.rows();
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    let (k, d) = (gmm.k(), gmm.dim());
    let gamma = gmm.posteriors_all(features)?;
    let mut g = vec![0f64; k * d];
    for (x, post) in features.iter_rows().zip(gamma.chunks_exact(k)) {
        for c in 0..k {
            let p = post[c];
            if p == 0.0 {
                continue;
            }
            let mu = gmm.mean(c);
            let out = &mut g[c * d..(c + 1) * d];
            for j in 0..d {
                out[j] += p * (x[j] as f64 - mu[j]);
            }
        }
    }
    for c in 0..k {
        let scale = 1.0 / (n as f64 * gmm.weights()[c].sqrt());
        let var = gmm.variance(c);
        for (v, s2) in g[c * d..(c + 1) * d].iter_mut().zip(var) {
            *v *= scale / s2.sqrt();
        }
    }
    Ok(g)
}

/// Bit `i` is set iff `v[i] > 0`.
pub fn binarize(v: &[f64]) -> BitCode {
    let mut b = BitCode::zeros(v.len());
    for (i, &x) in v.iter().enumerate() {
        if x > 0.0 {
            b.set(i, true);
        }
    }
    b
}

/// Signature bits of one frame's raw 384-d features.
pub fn frame_signature(features: &Matrix, pca: &PCAModel, gmm: &GMMModel) -> Result<BitCode> {
    if features.rows() == 0 {
        return Err(Error::EmptyFrame);
    }
    let projected = pca.project_all(features)?;
    Ok(binarize(&fisher_vector(&projected, gmm)?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalSignature {
    pub frame_id: u32,
    pub video_id: u32,
    pub bits: BitCode,
}

/// Signatures for a batch of frames, in input order.
pub fn compute_signatures(
    frames: &[GlobalRawFrame],
    pca: &PCAModel,
    gmm: &GMMModel,
) -> Result<Vec<GlobalSignature>> {
    frames
        .par_iter()
        .map(|f| {
            Ok(GlobalSignature {
                frame_id: f.frame_id,
                video_id: f.video_id,
                bits: frame_signature(&f.features, pca, gmm)
                    .map_err(|e| Error::InvalidParameter(format!("frame {}: {e}", f.frame_id)))?,
            })
        })
        .collect()
}

/// Frozen signature index: one list per binary center, each sorted by frame id.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalIndex {
    pub(crate) d_fk: usize,
    pub(crate) centers: BinaryCenters,
    pub(crate) codebook: [u8; 8],
    pub(crate) clusters: Vec<Vec<GlobalSignature>>,
}

impl GlobalIndex {
    pub fn bits(&self) -> usize {
        self.centers.bits()
    }

    pub fn d_fk(&self) -> usize {
        self.d_fk
    }

    pub fn centers(&self) -> &BinaryCenters {
        &self.centers
    }

    pub fn codebook(&self) -> &[u8; 8] {
        &self.codebook
    }

    pub fn cluster(&self, c: usize) -> &[GlobalSignature] {
        &self.clusters[c]
    }

    pub fn len(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every signature, cluster by cluster.
    pub fn iter(&self) -> impl Iterator<Item = &GlobalSignature> {
        self.clusters.iter().flatten()
    }
}

/// Files each signature under its Hamming-nearest center (ties to the lowest index).
pub fn build_global_index(
    signatures: Vec<GlobalSignature>,
    centers: BinaryCenters,
    d_fk: usize,
    codebook: [u8; 8],
) -> Result<GlobalIndex> {
    let bits = centers.bits();
    if d_fk == 0 || bits % d_fk != 0 {
        return Err(Error::InvalidParameter(format!(
            "{bits} signature bits do not split into {d_fk} components"
        )));
    }
    let mut seen = BTreeSet::new();
    for s in &signatures {
        if s.bits.len() != bits {
            return Err(Error::DimensionMismatch {
                expected: bits,
                got: s.bits.len(),
            });
        }
        if !seen.insert(s.frame_id) {
            return Err(Error::InvalidParameter(format!(
                "frame {} indexed twice",
                s.frame_id
            )));
        }
    }
    let assignment: Vec<usize> = signatures
        .par_iter()
        .map(|s| centers.nearest(&s.bits).0)
        .collect();
    let mut clusters = vec![Vec::new(); centers.len()];
    for (s, c) in signatures.into_iter().zip(assignment) {
        clusters[c].push(s);
    }
    for c in &mut clusters {
        c.sort_by_key(|s| s.frame_id);
    }
    Ok(GlobalIndex {
        d_fk,
        centers,
        codebook,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gmm(rng: &mut ChaCha8Rng, k: usize, d: usize) -> GMMModel {
        GMMModel::new(
            (0..k).map(|_| rng.random_range(0.1..1.0)).collect(),
            (0..k * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..k * d).map(|_| rng.random_range(0.2..2.0)).collect(),
        )
        .unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
        Matrix::new(
            n,
            d,
            (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn centered_data_gives_zero() {
        let gmm = GMMModel::new(vec![1.0], vec![0.5, -1.0], vec![2.0, 0.5]).unwrap();
        let x = Matrix::from_rows(&[[0.5f32, -1.0], [0.5, -1.0]]).unwrap();
        assert!(fisher_vector(&x, &gmm).unwrap().iter().all(|&v| v == 0.0));
        let x = Matrix::from_rows(&[[1.5f32, 0.0]]).unwrap();
        let g = fisher_vector(&x, &gmm).unwrap();
        assert!((g[0] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((g[1] - 1.0 / 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            fisher_vector(&Matrix::zeros(0, 2), &gmm)
                .unwrap_err()
                .kind(),
            "empty-frame"
        );
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let gmm = random_gmm(&mut rng, 4, 5);
            let x = random_matrix(&mut rng, 7, 5);
            let g = fisher_vector(&x, &gmm).unwrap();
            for c in 0..4 {
                for j in 0..5 {
                    let mut acc = 0.0;
                    for i in 0..7 {
                        let gamma = gmm.posteriors(x.row(i)).unwrap()[c];
                        acc += gamma * (x.row(i)[j] as f64 - gmm.mean(c)[j])
                            / gmm.variance(c)[j].sqrt();
                    }
                    acc /= 7.0 * gmm.weights()[c].sqrt();
                    assert!((g[c * 5 + j] - acc).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn order_of_features_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gmm = random_gmm(&mut rng, 3, 4);
        let x = random_matrix(&mut rng, 9, 4);
        let rev: Vec<&[f32]> = x.iter_rows().rev().collect();
        let a = fisher_vector(&x, &gmm).unwrap();
        let b = fisher_vector(&Matrix::from_rows(&rev).unwrap(), &gmm).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(binarize(&a), binarize(&b));
    }

    #[test]
    fn binarize_rules() {
        assert_eq!(binarize(&[0.0; 5]).count_ones(), 0);
        let b = binarize(&[-1.0, 2.0, 0.0, 3.0]);
        assert_eq!(
            (0..4).map(|i| b.get(i)).collect::<Vec<_>>(),
            vec![false, true, false, true]
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = binarize(&v);
            assert!(v.iter().enumerate().all(|(i, &x)| b.get(i) == (x > 0.0)));
            let a = rng.random_range(0.001..1000.0);
            assert_eq!(binarize(&v.iter().map(|x| x * a).collect::<Vec<_>>()), b);
        }
    }

    fn sig(frame_id: u32, bits: BitCode) -> GlobalSignature {
        GlobalSignature {
            frame_id,
            video_id: frame_id / 2,
            bits,
        }
    }

    #[test]
    fn assignment_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rand_code = |rng: &mut ChaCha8Rng| {
            BitCode::from_bools(&(0..128).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>())
        };
        let centers = BinaryCenters::new((0..32).map(|_| rand_code(&mut rng)).collect()).unwrap();
        let sigs: Vec<_> = (0..300)
            .map(|i| sig(300 - i, rand_code(&mut rng)))
            .collect();
        let mut planted = sigs.clone();
        planted.push(sig(1000, centers.centers()[12].clone()));
        let idx = build_global_index(planted, centers.clone(), 2, [0; 8]).unwrap();
        assert!(idx.cluster(12).iter().any(|s| s.frame_id == 1000));
        for (c, list) in idx.clusters.iter().enumerate() {
            assert!(list.windows(2).all(|w| w[0].frame_id < w[1].frame_id));
            for s in list {
                let d: Vec<u32> = centers
                    .centers()
                    .iter()
                    .map(|k| k.hamming(&s.bits))
                    .collect();
                let best = (0..32).min_by_key(|&i| (d[i], i)).unwrap();
                assert_eq!(best, c);
            }
        }
        assert_eq!(idx.len(), 301);
        let one = BinaryCenters::new(vec![rand_code(&mut rng)]).unwrap();
        let idx = build_global_index(vec![sig(1, rand_code(&mut rng))], one, 2, [0; 8]).unwrap();
        assert_eq!(idx.cluster(0).len(), 1);
        let short = vec![sig(1, BitCode::zeros(64))];
        assert!(build_global_index(short, centers, 2, [0; 8]).is_err());
    }
}
