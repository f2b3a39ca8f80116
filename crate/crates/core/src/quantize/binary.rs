use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::BitCode;
use crate::error::{Error, Result};

/// Default number of Hamming-space partitions.
pub const DEFAULT_BINARY_CLUSTERS: usize = 32;

/// Cluster centers in Hamming space.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryCenters {
    centers: Vec<BitCode>,
}

impl BinaryCenters {
    pub fn new(centers: Vec<BitCode>) -> Result<Self> {
        let bits = centers
            .first()
            .map(BitCode::len)
            .ok_or_else(|| Error::InvalidParameter("no binary centers".into()))?;
        if centers.iter().any(|c| c.len() != bits) {
            return Err(Error::InvalidParameter(
                "binary centers differ in length".into(),
            ));
        }
        let mut sorted = centers.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != centers.len() {
            return Err(Error::InvalidParameter("duplicate binary centers".into()));
        }
        Ok(Self { centers })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[BitCode] {
        &self.centers
    }

    /// Nearest center and its Hamming distance; ties to the lowest index.
    pub fn nearest(&self, code: &BitCode) -> (usize, u32) {
        nearest(&self.centers, code)
    }

    /// Center indices ordered by Hamming distance to `code`, ties by index.
    pub fn ranked(&self, code: &BitCode) -> Vec<(usize, u32)> {
        let mut order: Vec<(usize, u32)> = self
            .centers
            .iter()
            .map(|c| c.hamming(code))
            .enumerate()
            .collect();
        order.sort_by_key(|&(i, d)| (d, i));
        order
    }
}

fn nearest(centers: &[BitCode], code: &BitCode) -> (usize, u32) {
    let mut best = (0, u32::MAX);
    for (i, c) in centers.iter().enumerate() {
        let d = c.hamming(code);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Total Hamming distance from each code to its nearest center.
pub fn binary_objective(centers: &BinaryCenters, codes: &[BitCode]) -> u64 {
    codes.iter().map(|c| centers.nearest(c).1 as u64).sum()
}

/// k-majority clustering: Hamming assignment, per-bit majority update (ties to 0).
pub fn binary_centers_train(
    codes: &[BitCode],
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<BinaryCenters> {
    binary_centers_train_traced(codes, k, iters, seed).map(|(c, _)| c)
}

/// Like [`binary_centers_train`], also returning the objective after every assignment.
pub fn binary_centers_train_traced(
    codes: &[BitCode],
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<(BinaryCenters, Vec<u64>)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let bits = codes.first().map_or(0, BitCode::len);
    if let Some(bad) = codes.iter().find(|c| c.len() != bits) {
        return Err(Error::DimensionMismatch {
            expected: bits,
            got: bad.len(),
        });
    }
    let mut distinct: Vec<&BitCode> = codes.iter().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::InsufficientSamples {
            needed: k,
            got: distinct.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(codes, k, &mut rng);
    let mut trace = Vec::new();
    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..iters.max(1) {
        let (labels, dists): (Vec<usize>, Vec<u32>) =
            codes.par_iter().map(|c| nearest(&centers, c)).unzip();
        trace.push(dists.iter().map(|&d| d as u64).sum());
        if prev.as_ref() == Some(&labels) {
            break;
        }
        majority_update(codes, &labels, &dists, &mut centers);
        prev = Some(labels);
    }
    loop {
        let dists: Vec<u32> = codes.par_iter().map(|c| nearest(&centers, c).1).collect();
        let dup = (0..k).find(|&j| (0..j).any(|i| centers[i] == centers[j]));
        match dup {
            Some(j) => centers[j] = codes[farthest(&dists, &[])].clone(),
            None => {
                let obj = dists.iter().map(|&d| d as u64).sum();
                if trace.last() != Some(&obj) {
                    trace.push(obj);
                }
                break;
            }
        }
    }
    Ok((BinaryCenters::new(centers)?, trace))
}

/// Greedy k-means++ seeding: each step draws a few D²-weighted candidates and keeps the
/// one that lowers the total squared distance most.
fn seed_centers(codes: &[BitCode], k: usize, rng: &mut ChaCha8Rng) -> Vec<BitCode> {
    let tries = 2 + (k as f64).ln() as usize;
    let first = rng.random_range(0..codes.len());
    let mut centers = vec![codes[first].clone()];
    let mut d2: Vec<f64> = codes
        .iter()
        .map(|c| (c.hamming(&codes[first]) as f64).powi(2))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..tries {
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
            let pick = pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0));
            let next: Vec<f64> = codes
                .par_iter()
                .zip(&d2)
                .map(|(c, &d)| d.min((c.hamming(&codes[pick]) as f64).powi(2)))
                .collect();
            let cost: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, pick, next));
            }
        }
        let (_, pick, next) = best.expect("at least one try");
        d2 = next;
        centers.push(codes[pick].clone());
    }
    centers
}

fn majority_update(codes: &[BitCode], labels: &[usize], dists: &[u32], centers: &mut [BitCode]) {
    let k = centers.len();
    let bits = centers[0].len();
    let mut ones = vec![0u32; k * bits];
    let mut counts = vec![0u32; k];
    for (c, &l) in codes.iter().zip(labels) {
        counts[l] += 1;
        let row = &mut ones[l * bits..(l + 1) * bits];
        for (w, &word) in c.words().iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let b = word.trailing_zeros() as usize;
                row[w * 64 + b] += 1;
                word &= word - 1;
            }
        }
    }
    let mut used = Vec::new();
    for j in 0..k {
        if counts[j] == 0 {
            let far = farthest(dists, &used);
            used.push(far);
            centers[j] = codes[far].clone();
            continue;
        }
        let mut c = BitCode::zeros(bits);
        for b in 0..bits {
            if 2 * ones[j * bits + b] > counts[j] {
                c.set(b, true);
            }
        }
        centers[j] = c;
    }
}

fn farthest(dists: &[u32], exclude: &[usize]) -> usize {
    let mut best: Option<(usize, u32)> = None;
    for (i, &d) in dists.iter().enumerate() {
        if exclude.contains(&i) {
            continue;
        }
        if best.is_none_or(|(_, b)| d > b) {
            best = Some((i, d));
        }
    }
    best.map_or(0, |(i, _)| i)
}
