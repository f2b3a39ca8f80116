//! Local-channel search: same-word candidates from the inverted file, residual-code
//! scoring with a hard threshold, then geometric voting per reference frame.

mod hough;
mod score;

use std::collections::BTreeMap;

pub use hough::{hough_verify, vote_params, HoughConfig, HoughVote};
pub use score::{pq_score_direct, PqScorer, ScoreMode};

use crate::error::{Error, Result};
use crate::local_index::{
    encode_descriptors, FrameSize, Keypoint, LocalFrame, LocalIndex, QuantizedGeometry,
};
use crate::quantize::{KMeansModel, PQModel};
use crate::ranked::{Channel, RankedList};

pub const DEFAULT_TAU_PQ: f32 = 0.72;
pub const DEFAULT_TOP_N: usize = 100;

/// A query keypoint matched to one reference posting.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchCandidate {
    pub query_index: u32,
    pub frame_id: u32,
    /// idf-weighted residual similarity, always positive.
    pub score: f32,
    pub query: Keypoint,
    pub reference: Keypoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryFeature {
    pub word: u32,
    pub codes: Vec<u8>,
    pub residual: Vec<f32>,
    pub keypoint: Keypoint,
}

/// An encoded query image.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalQuery {
    pub query_id: u32,
    pub frame: FrameSize,
    pub features: Vec<QueryFeature>,
}

impl LocalQuery {
    /// Encodes a query frame. Geometry goes through the same quantization as indexed
    /// keypoints so that identical images produce identical votes.
    pub fn encode(
        frame: &LocalFrame,
        bow: &KMeansModel,
        pq: &PQModel,
        size: FrameSize,
    ) -> Result<Self> {
        let encoded = encode_descriptors(&frame.records, bow, pq)?;
        let features = frame
            .records
            .iter()
            .zip(encoded)
            .map(|(r, e)| QueryFeature {
                word: e.word,
                codes: e.codes,
                residual: e.residual,
                keypoint: QuantizedGeometry::quantize(&r.keypoint, size).dequantize(size),
            })
            .collect();
        Ok(Self {
            query_id: frame.frame_id,
            frame: size,
            features,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalQueryConfig {
    pub tau_pq: f32,
    pub top_n: usize,
    pub mode: ScoreMode,
    pub hough: HoughConfig,
}

impl Default for LocalQueryConfig {
    fn default() -> Self {
        Self {
            tau_pq: DEFAULT_TAU_PQ,
            top_n: DEFAULT_TOP_N,
            mode: ScoreMode::Symmetric,
            hough: HoughConfig::default(),
        }
    }
}

impl LocalQueryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau_pq) {
            return Err(Error::InvalidParameter(format!(
                "tau_pq {} outside [0, 1)",
                self.tau_pq
            )));
        }
        self.hough.validate()
    }
}

fn check_compatible(index: &LocalIndex, scorer: &PqScorer) -> Result<()> {
    let p = index.params();
    if p.m != scorer.m() || p.ksub != scorer.ksub() {
        return Err(Error::InvalidParameter(format!(
            "index holds {}x{} codes, quantizer is {}x{}",
            p.m,
            p.ksub,
            scorer.m(),
            scorer.ksub()
        )));
    }
    Ok(())
}

/// Scans the inverted list of each query keypoint's word and keeps postings whose
/// residual similarity exceeds `tau_pq`, weighted by the word's idf.
pub fn collect_matches(
    query: &LocalQuery,
    index: &LocalIndex,
    pq: &PQModel,
    scorer: &PqScorer,
    cfg: &LocalQueryConfig,
) -> Result<Vec<MatchCandidate>> {
    check_compatible(index, scorer)?;
    let (m, d_bow, frame) = (index.params().m, index.params().d_bow, index.params().frame);
    let mut out = Vec::new();
    for (qi, f) in query.features.iter().enumerate() {
        if f.word as usize >= d_bow || f.codes.len() != m {
            return Err(Error::DimensionMismatch {
                expected: d_bow,
                got: f.word as usize,
            });
        }
        if index.is_stopped(f.word) {
            continue;
        }
        let idf = index.idf()[f.word as usize];
        if idf <= 0.0 {
            continue;
        }
        let list = index.list(f.word);
        let table = match cfg.mode {
            ScoreMode::Symmetric => None,
            ScoreMode::Asymmetric => Some(scorer.query_table(pq, &f.residual)),
        };
        for i in 0..list.len() {
            let codes = list.codes(i, m);
            let s = match &table {
                None => scorer.score(&f.codes, codes),
                Some(t) => scorer.score_with_table(t, codes),
            };
            if s > cfg.tau_pq {
                out.push(MatchCandidate {
                    query_index: qi as u32,
                    frame_id: list.frame_id(i),
                    score: s * idf,
                    query: f.keypoint,
                    reference: list.geometry(i).dequantize(frame),
                });
            }
        }
    }
    Ok(out)
}

/// Sum of idf over the query keypoints that can match at all; a query matched
/// perfectly against itself reaches exactly this mass.
pub fn self_mass(query: &LocalQuery, index: &LocalIndex) -> f64 {
    query
        .features
        .iter()
        .filter(|f| (f.word as usize) < index.params().d_bow && !index.is_stopped(f.word))
        .map(|f| index.idf()[f.word as usize] as f64)
        .sum()
}

/// Geometric score of every reference frame with at least one candidate.
pub fn frame_scores(
    candidates: Vec<MatchCandidate>,
    query_diag: f32,
    cfg: &HoughConfig,
) -> BTreeMap<u32, f64> {
    let mut by_frame: BTreeMap<u32, Vec<MatchCandidate>> = BTreeMap::new();
    for c in candidates {
        by_frame.entry(c.frame_id).or_default().push(c);
    }
    by_frame
        .into_iter()
        .map(|(f, cands)| (f, hough_verify(&cands, query_diag, cfg).score))
        .collect()
}

/// Videos ranked by their best frame's geometric score over the query's self mass.
pub fn local_rank(
    query: &LocalQuery,
    index: &LocalIndex,
    pq: &PQModel,
    scorer: &PqScorer,
    cfg: &LocalQueryConfig,
) -> Result<RankedList> {
    cfg.validate()?;
    let mass = self_mass(query, index);
    if mass <= 0.0 {
        return Ok(RankedList::empty(Channel::Local));
    }
    let candidates = collect_matches(query, index, pq, scorer, cfg)?;
    let mut videos: BTreeMap<u32, f64> = BTreeMap::new();
    for (frame, score) in frame_scores(candidates, query.frame.diagonal(), &cfg.hough) {
        let video = index
            .video_of(frame)
            .expect("posting frames are registered");
        let v = videos.entry(video).or_insert(0.0);
        *v = v.max(score);
    }
    let mut list = RankedList::from_scores(
        Channel::Local,
        videos
            .into_iter()
            .filter(|e| e.1 > 0.0)
            .map(|(v, s)| (v, (s / mass).min(1.0))),
    )?;
    list.truncate(cfg.top_n);
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_index::{build_local_index, encode_frames, LocalIndexParams, LocalRecord};
    use crate::matrix::Matrix;
    use crate::quantize::{kmeans_train, pq_train};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        bow: KMeansModel,
        pq: PQModel,
        frames: Vec<LocalFrame>,
        index: LocalIndex,
    }

    fn fixture(seed: u64, prune: f64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 16;
        let frames: Vec<LocalFrame> = (0..30u32)
            .map(|f| {
                let mut fr = LocalFrame::new(f, f / 3);
                for _ in 0..25 {
                    let kp = Keypoint {
                        x: rng.random_range(0.0..640.0),
                        y: rng.random_range(0.0..480.0),
                        theta: rng.random_range(-3.0..3.0),
                        log_scale: rng.random_range(0.0..3.0),
                    };
                    fr.push(kp, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
                }
                fr
            })
            .collect();
        let all: Vec<&[f32]> = frames
            .iter()
            .flat_map(|f| f.records.iter().map(|r| r.descriptor.as_slice()))
            .collect();
        let m = Matrix::from_rows(&all).unwrap();
        let bow = kmeans_train(&m, 12, 10, seed).unwrap();
        let res: Vec<Vec<f32>> = all.iter().map(|r| bow.assign(r).unwrap().1).collect();
        let pq = pq_train(&Matrix::from_rows(&res).unwrap(), 4, 16, 10, seed).unwrap();
        let enc = encode_frames(&frames, &bow, &pq, FrameSize::default()).unwrap();
        let params = LocalIndexParams {
            d_bow: 12,
            m: 4,
            ksub: 16,
            prune_fraction: prune,
            frame: FrameSize::default(),
            codebook: [0; 8],
        };
        let index = build_local_index(&enc, params).unwrap();
        Fixture {
            bow,
            pq,
            frames,
            index,
        }
    }

    #[test]
    fn planted_posting_scores_its_idf() {
        let fx = fixture(1, 0.0);
        let scorer = PqScorer::new(&fx.pq);
        let mut q = LocalFrame::new(999, 0);
        let r: &LocalRecord = &fx.frames[4].records[7];
        q.push(r.keypoint, r.descriptor.clone());
        let query = LocalQuery::encode(&q, &fx.bow, &fx.pq, FrameSize::default()).unwrap();
        let cfg = LocalQueryConfig::default();
        let c = collect_matches(&query, &fx.index, &fx.pq, &scorer, &cfg).unwrap();
        let w = query.features[0].word as usize;
        assert!(c
            .iter()
            .any(|c| c.frame_id == 4 && c.score == fx.index.idf()[w]));
        let strict = LocalQueryConfig {
            tau_pq: 1.0 - 1e-9,
            ..cfg
        };
        let c = collect_matches(&query, &fx.index, &fx.pq, &scorer, &strict).unwrap();
        assert!(c.iter().all(|c| c.score == fx.index.idf()[w]));
    }

    #[test]
    fn self_retrieval_scores_one() {
        let fx = fixture(2, 0.0);
        let scorer = PqScorer::new(&fx.pq);
        let query =
            LocalQuery::encode(&fx.frames[10], &fx.bow, &fx.pq, FrameSize::default()).unwrap();
        let list = local_rank(
            &query,
            &fx.index,
            &fx.pq,
            &scorer,
            &LocalQueryConfig::default(),
        )
        .unwrap();
        assert_eq!(list.entries()[0], (3, 1.0));
    }

    #[test]
    fn idf_rescaling_keeps_order() {
        let fx = fixture(3, 0.1);
        let scorer = PqScorer::new(&fx.pq);
        let query =
            LocalQuery::encode(&fx.frames[5], &fx.bow, &fx.pq, FrameSize::default()).unwrap();
        let cfg = LocalQueryConfig::default();
        let a = local_rank(&query, &fx.index, &fx.pq, &scorer, &cfg).unwrap();
        let b = local_rank(
            &query,
            &fx.index.with_scaled_idf(4.0),
            &fx.pq,
            &scorer,
            &cfg,
        )
        .unwrap();
        assert_eq!(a.videos(), b.videos());
    }

    #[test]
    fn asymmetric_mode_runs_and_stays_bounded() {
        let fx = fixture(4, 0.0);
        let scorer = PqScorer::new(&fx.pq);
        let query =
            LocalQuery::encode(&fx.frames[0], &fx.bow, &fx.pq, FrameSize::default()).unwrap();
        let cfg = LocalQueryConfig {
            mode: ScoreMode::Asymmetric,
            ..Default::default()
        };
        let list = local_rank(&query, &fx.index, &fx.pq, &scorer, &cfg).unwrap();
        assert!(list.scores().iter().all(|&s| (0.0..=1.0).contains(&s)));
        assert_eq!(list.entries()[0].0, 0);
    }
}
