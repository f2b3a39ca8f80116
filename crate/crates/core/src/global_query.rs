//! Global-channel search: probe the nearest binary clusters, score candidates by
//! normalized Hamming similarity, keep each video's best frame.

use std::collections::BTreeMap;

use crate::bits::BitCode;
use crate::error::{Error, Result};
use crate::global_index::GlobalIndex;
use crate::ranked::{Channel, RankedList};

pub const DEFAULT_K_PROBE: usize = 5;

/// `1 − popcount(a ⊕ b) / B`.
pub fn hamming_score(a: &BitCode, b: &BitCode) -> Result<f64> {
    let d = a.checked_hamming(b)?;
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty bit codes".into()));
    }
    Ok(1.0 - d as f64 / a.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalQueryConfig {
    pub k_probe: usize,
    pub top_n: usize,
    /// Score every indexed signature instead of probing clusters.
    pub brute_force: bool,
}

impl Default for GlobalQueryConfig {
    fn default() -> Self {
        Self {
            k_probe: DEFAULT_K_PROBE,
            top_n: crate::local_query::DEFAULT_TOP_N,
            brute_force: false,
        }
    }
}

/// A ranked list plus how much of the index was touched to produce it.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalSearch {
    pub list: RankedList,
    pub candidates_examined: usize,
    pub clusters_probed: usize,
}

pub fn global_rank(
    query: &BitCode,
    index: &GlobalIndex,
    cfg: &GlobalQueryConfig,
) -> Result<RankedList> {
    Ok(global_search(query, index, cfg)?.list)
}

pub fn global_search(
    query: &BitCode,
    index: &GlobalIndex,
    cfg: &GlobalQueryConfig,
) -> Result<GlobalSearch> {
    let n_centers = index.centers().len();
    if cfg.k_probe == 0 || cfg.k_probe > n_centers {
        return Err(Error::InvalidParameter(format!(
            "k_probe {} outside [1, {n_centers}]",
            cfg.k_probe
        )));
    }
    if query.len() != index.bits() {
        return Err(Error::DimensionMismatch {
            expected: index.bits(),
            got: query.len(),
        });
    }
    let probed: Vec<usize> = if cfg.brute_force {
        (0..n_centers).collect()
    } else {
        index
            .centers()
            .ranked(query)
            .into_iter()
            .take(cfg.k_probe)
            .map(|(c, _)| c)
            .collect()
    };
    let bits = query.len() as f64;
    let mut videos: BTreeMap<u32, f64> = BTreeMap::new();
    let mut examined = 0;
    for &c in &probed {
        for s in index.cluster(c) {
            examined += 1;
            let score = 1.0 - query.hamming(&s.bits) as f64 / bits;
            let v = videos.entry(s.video_id).or_insert(f64::NEG_INFINITY);
            *v = v.max(score);
        }
    }
    let mut list = RankedList::from_scores(Channel::Global, videos)?;
    list.truncate(cfg.top_n);
    Ok(GlobalSearch {
        list,
        candidates_examined: examined,
        clusters_probed: probed.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global_index::{build_global_index, GlobalSignature};
    use crate::quantize::BinaryCenters;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code(rng: &mut ChaCha8Rng, n: usize) -> BitCode {
        BitCode::from_bools(&(0..n).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>())
    }

    fn index(seed: u64) -> GlobalIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = BinaryCenters::new((0..32).map(|_| code(&mut rng, 256)).collect()).unwrap();
        let sigs = (0..400)
            .map(|i| GlobalSignature {
                frame_id: i,
                video_id: i / 4,
                bits: code(&mut rng, 256),
            })
            .collect();
        build_global_index(sigs, centers, 4, [0; 8]).unwrap()
    }

    #[test]
    fn score_extremes_and_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = code(&mut rng, 300);
        let not_a = BitCode::from_bools(&(0..300).map(|i| !a.get(i)).collect::<Vec<_>>());
        assert_eq!(hamming_score(&a, &a).unwrap(), 1.0);
        assert_eq!(hamming_score(&a, &not_a).unwrap(), 0.0);
        for _ in 0..200 {
            let b = code(&mut rng, 300);
            let naive = (0..300).filter(|&i| a.get(i) != b.get(i)).count();
            assert!((hamming_score(&a, &b).unwrap() - (1.0 - naive as f64 / 300.0)).abs() < 1e-12);
            assert_eq!(
                hamming_score(&a, &b).unwrap(),
                hamming_score(&b, &a).unwrap()
            );
        }
        assert!(hamming_score(&a, &code(&mut rng, 299)).is_err());
    }

    #[test]
    fn full_probe_equals_brute_force() {
        let idx = index(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let q = code(&mut rng, 256);
            let full = global_rank(
                &q,
                &idx,
                &GlobalQueryConfig {
                    k_probe: 32,
                    ..Default::default()
                },
            )
            .unwrap();
            let brute = global_rank(
                &q,
                &idx,
                &GlobalQueryConfig {
                    brute_force: true,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(full, brute);
        }
    }

    #[test]
    fn indexed_signature_ranks_first() {
        let idx = index(4);
        let s = idx.cluster(7)[0].clone();
        let list = global_rank(&s.bits, &idx, &GlobalQueryConfig::default()).unwrap();
        assert_eq!(list.entries()[0], (s.video_id, 1.0));
    }

    #[test]
    fn bad_config() {
        let idx = index(5);
        let q = BitCode::zeros(256);
        assert!(global_rank(
            &q,
            &idx,
            &GlobalQueryConfig {
                k_probe: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(global_rank(
            &q,
            &idx,
            &GlobalQueryConfig {
                k_probe: 33,
                ..Default::default()
            }
        )
        .is_err());
        assert!(global_rank(&BitCode::zeros(255), &idx, &GlobalQueryConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn widening_the_probe_never_loses_or_lowers(seed in 0u64..200, k in 1usize..32) {
            let idx = index(6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = code(&mut rng, 256);
            let cfg = |k| GlobalQueryConfig { k_probe: k, top_n: usize::MAX, brute_force: false };
            let narrow = global_search(&q, &idx, &cfg(k)).unwrap();
            let wide = global_search(&q, &idx, &cfg(k + 1)).unwrap();
            prop_assert!(wide.candidates_examined >= narrow.candidates_examined);
            for &(v, s) in narrow.list.entries() {
                prop_assert!(wide.list.score_of(v).unwrap() >= s);
            }
        }
    }
}
