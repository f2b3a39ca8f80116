//! Two-stage hashing of local descriptors (coarse word + PQ residual code) and the
//! inverted file built over them, with stop-word pruning and idf weighting.

pub mod geometry;
pub mod ldsc;
mod store;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use geometry::{FrameSize, Keypoint, QuantizedGeometry};
pub use ldsc::{LocalFrame, LocalRecord, DESCRIPTOR_DIM};
pub use store::{LIDX_MAGIC, LIDX_VERSION};

use crate::error::{Error, Result};
use crate::quantize::{KMeansModel, PQModel};

/// An indexed keypoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalPosting {
    pub word: u32,
    pub codes: Vec<u8>,
    pub geometry: QuantizedGeometry,
    pub frame_id: u32,
}

/// The postings of one frame, ready for indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedFrame {
    pub frame_id: u32,
    pub video_id: u32,
    pub postings: Vec<LocalPosting>,
}

/// Coarse word, PQ code and residual of one descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDescriptor {
    pub word: u32,
    pub codes: Vec<u8>,
    pub residual: Vec<f32>,
}

pub(crate) fn check_models(bow: &KMeansModel, pq: &PQModel) -> Result<()> {
    if bow.dim() != pq.dim() {
        return Err(Error::DimensionMismatch {
            expected: bow.dim(),
            got: pq.dim(),
        });
    }
    Ok(())
}

/// Encodes descriptors, failing as a whole if any descriptor has the wrong dimension.
pub fn encode_descriptors(
    records: &[LocalRecord],
    bow: &KMeansModel,
    pq: &PQModel,
) -> Result<Vec<EncodedDescriptor>> {
    check_models(bow, pq)?;
    if let Some(bad) = records.iter().find(|r| r.descriptor.len() != bow.dim()) {
        return Err(Error::DimensionMismatch {
            expected: bow.dim(),
            got: bad.descriptor.len(),
        });
    }
    Ok(records
        .par_iter()
        .map(|r| {
            let (word, residual) = bow.assign(&r.descriptor).expect("dimension checked");
            let codes = pq.encode_unchecked(&residual);
            EncodedDescriptor {
                word: word as u32,
                codes,
                residual,
            }
        })
        .collect())
}

/// One posting per record: coarse word, PQ code of the residual, quantized geometry.
pub fn encode_frame_local(
    records: &[LocalRecord],
    bow: &KMeansModel,
    pq: &PQModel,
    frame: FrameSize,
) -> Result<Vec<LocalPosting>> {
    let encoded = encode_descriptors(records, bow, pq)?;
    Ok(records
        .iter()
        .zip(encoded)
        .map(|(r, e)| LocalPosting {
            word: e.word,
            codes: e.codes,
            geometry: QuantizedGeometry::quantize(&r.keypoint, frame),
            frame_id: r.frame_id,
        })
        .collect())
}

/// Encodes every frame of a descriptor file.
pub fn encode_frames(
    frames: &[LocalFrame],
    bow: &KMeansModel,
    pq: &PQModel,
    size: FrameSize,
) -> Result<Vec<EncodedFrame>> {
    frames
        .iter()
        .map(|f| {
            Ok(EncodedFrame {
                frame_id: f.frame_id,
                video_id: f.video_id,
                postings: encode_frame_local(&f.records, bow, pq, size)?,
            })
        })
        .collect()
}

/// Parameters recorded in the index header.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalIndexParams {
    pub d_bow: usize,
    pub m: usize,
    pub ksub: usize,
    pub prune_fraction: f64,
    pub frame: FrameSize,
    /// Fingerprint of the codebook the postings were encoded with.
    pub codebook: [u8; 8],
}

/// Postings of one visual word, in columnar form, sorted by frame id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PostingList {
    pub(crate) frame_ids: Vec<u32>,
    pub(crate) geometry: Vec<QuantizedGeometry>,
    pub(crate) codes: Vec<u8>,
}

impl PostingList {
    pub fn len(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_ids.is_empty()
    }

    pub fn frame_id(&self, i: usize) -> u32 {
        self.frame_ids[i]
    }

    pub fn geometry(&self, i: usize) -> QuantizedGeometry {
        self.geometry[i]
    }

    pub fn codes(&self, i: usize, m: usize) -> &[u8] {
        &self.codes[i * m..(i + 1) * m]
    }
}

/// Frozen inverted file over local postings.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalIndex {
    pub(crate) params: LocalIndexParams,
    pub(crate) lists: Vec<PostingList>,
    pub(crate) doc_freq: Vec<u32>,
    pub(crate) stop_mask: Vec<bool>,
    pub(crate) idf: Vec<f32>,
    pub(crate) frame_to_video: BTreeMap<u32, u32>,
}

impl LocalIndex {
    pub fn params(&self) -> &LocalIndexParams {
        &self.params
    }

    pub fn n_frames(&self) -> usize {
        self.frame_to_video.len()
    }

    pub fn list(&self, word: u32) -> &PostingList {
        &self.lists[word as usize]
    }

    pub fn doc_freq(&self) -> &[u32] {
        &self.doc_freq
    }

    pub fn stop_mask(&self) -> &[bool] {
        &self.stop_mask
    }

    pub fn is_stopped(&self, word: u32) -> bool {
        self.stop_mask[word as usize]
    }

    pub fn idf(&self) -> &[f32] {
        &self.idf
    }

    pub fn video_of(&self, frame_id: u32) -> Option<u32> {
        self.frame_to_video.get(&frame_id).copied()
    }

    pub fn frame_to_video(&self) -> &BTreeMap<u32, u32> {
        &self.frame_to_video
    }

    pub fn total_postings(&self) -> usize {
        self.lists.iter().map(PostingList::len).sum()
    }

    /// Copy with every idf value multiplied by `factor`.
    pub fn with_scaled_idf(&self, factor: f32) -> Self {
        let mut out = self.clone();
        out.idf.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Number of words removed for a given prune fraction.
pub fn stop_word_count(d_bow: usize, prune_fraction: f64) -> usize {
    ((prune_fraction * d_bow as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Builds the inverted file: per-word lists sorted by frame id, the top
/// `prune_fraction` of words by document frequency removed (ties stop the lower
/// word id), and `idf = max(0, ln(n_frames / (1 + df)))`.
pub fn build_local_index(frames: &[EncodedFrame], params: LocalIndexParams) -> Result<LocalIndex> {
    if !(0.0..0.5).contains(&params.prune_fraction) {
        return Err(Error::InvalidParameter(format!(
            "prune fraction {} outside [0, 0.5)",
            params.prune_fraction
        )));
    }
    if frames.iter().all(|f| f.postings.is_empty()) {
        return Err(Error::EmptyInput("no local postings to index".into()));
    }
    let d_bow = params.d_bow;
    let m = params.m;

    let mut frame_to_video = BTreeMap::new();
    for f in frames {
        if frame_to_video.insert(f.frame_id, f.video_id).is_some() {
            return Err(Error::InvalidParameter(format!(
                "frame {} indexed twice",
                f.frame_id
            )));
        }
    }

    let mut doc_freq = vec![0u32; d_bow];
    let mut seen = vec![u32::MAX; d_bow];
    let mut lists = vec![PostingList::default(); d_bow];
    let mut order: Vec<&EncodedFrame> = frames.iter().collect();
    order.sort_by_key(|f| f.frame_id);
    for (fi, f) in order.iter().enumerate() {
        for p in &f.postings {
            let w = p.word as usize;
            if w >= d_bow {
                return Err(Error::InvalidParameter(format!(
                    "word {w} outside vocabulary of {d_bow}"
                )));
            }
            if p.codes.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: p.codes.len(),
                });
            }
            if p.frame_id != f.frame_id {
                return Err(Error::InvalidParameter(format!(
                    "posting of frame {} filed under frame {}",
                    p.frame_id, f.frame_id
                )));
            }
            if seen[w] != fi as u32 {
                seen[w] = fi as u32;
                doc_freq[w] += 1;
            }
            let list = &mut lists[w];
            list.frame_ids.push(p.frame_id);
            list.geometry.push(p.geometry);
            list.codes.extend_from_slice(&p.codes);
        }
    }

    let n_stop = stop_word_count(d_bow, params.prune_fraction);
    let mut by_freq: Vec<usize> = (0..d_bow).collect();
    by_freq.sort_by(|&a, &b| doc_freq[b].cmp(&doc_freq[a]).then(a.cmp(&b)));
    let mut stop_mask = vec![false; d_bow];
    for &w in by_freq.iter().take(n_stop) {
        stop_mask[w] = true;
        lists[w] = PostingList::default();
    }

    let n_frames = frame_to_video.len() as f64;
    let idf = doc_freq
        .iter()
        .map(|&df| (n_frames / (1.0 + df as f64)).ln().max(0.0) as f32)
        .collect();

    Ok(LocalIndex {
        params,
        lists,
        doc_freq,
        stop_mask,
        idf,
        frame_to_video,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::quantize::{kmeans_train, pq_train};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(d_bow: usize, prune: f64) -> LocalIndexParams {
        LocalIndexParams {
            d_bow,
            m: 2,
            ksub: 4,
            prune_fraction: prune,
            frame: FrameSize::default(),
            codebook: [0; 8],
        }
    }

    fn posting(word: u32, frame_id: u32) -> LocalPosting {
        LocalPosting {
            word,
            codes: vec![1, 2],
            geometry: QuantizedGeometry {
                qx: 1,
                qy: 2,
                qtheta: 3,
                qscale: 4,
            },
            frame_id,
        }
    }

    fn random_frames(n_frames: u32, d_bow: u32, seed: u64) -> Vec<EncodedFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_frames)
            .map(|f| EncodedFrame {
                frame_id: 100 - f,
                video_id: f / 3,
                postings: (0..rng.random_range(0..30))
                    .map(|_| posting(rng.random_range(0..d_bow), 100 - f))
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn no_pruning_keeps_everything() {
        let frames = random_frames(20, 50, 1);
        let idx = build_local_index(&frames, params(50, 0.0)).unwrap();
        assert!(idx.stop_mask().iter().all(|s| !s));
        let total: usize = frames.iter().map(|f| f.postings.len()).sum();
        assert_eq!(idx.total_postings(), total);
        for w in 0..50 {
            let l = idx.list(w);
            assert!(l.frame_ids.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn ubiquitous_word_is_stopped() {
        let mut frames = random_frames(40, 100, 2);
        for f in &mut frames {
            f.postings.push(posting(0, f.frame_id));
        }
        let idx = build_local_index(&frames, params(100, 0.05)).unwrap();
        assert_eq!(idx.stop_mask().iter().filter(|&&s| s).count(), 5);
        assert!(idx.is_stopped(0));
        assert!(idx.list(0).is_empty());
        assert_eq!(idx.doc_freq()[0], 40);
    }

    #[test]
    fn frequency_ties_stop_the_lower_word() {
        let frames: Vec<EncodedFrame> = (0..4)
            .map(|f| EncodedFrame {
                frame_id: f,
                video_id: 0,
                postings: vec![posting(3, f), posting(1, f)],
            })
            .collect();
        let idx = build_local_index(&frames, params(10, 0.1)).unwrap();
        assert_eq!(idx.stop_mask().iter().position(|&s| s), Some(1));
    }

    #[test]
    fn doc_freq_matches_scan_and_idf_formula() {
        let frames = random_frames(30, 40, 3);
        let idx = build_local_index(&frames, params(40, 0.1)).unwrap();
        for w in 0..40u32 {
            let df = frames
                .iter()
                .filter(|f| f.postings.iter().any(|p| p.word == w))
                .count();
            assert_eq!(idx.doc_freq()[w as usize] as usize, df);
            let want = (30.0f64 / (1.0 + df as f64)).ln().max(0.0) as f32;
            assert_eq!(idx.idf()[w as usize], want);
            if !idx.is_stopped(w) && df + 1 < 30 {
                assert!(idx.idf()[w as usize] > 0.0);
            }
        }
    }

    #[test]
    fn bad_parameters() {
        let frames = random_frames(5, 10, 4);
        assert!(build_local_index(&frames, params(10, 0.5)).is_err());
        assert!(build_local_index(&frames, params(10, -0.1)).is_err());
        assert!(build_local_index(&[], params(10, 0.0)).is_err());
    }

    fn models(seed: u64) -> (KMeansModel, PQModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..400 * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = Matrix::new(400, 16, data).unwrap();
        let bow = kmeans_train(&m, 10, 10, seed).unwrap();
        let res: Vec<f32> = m
            .iter_rows()
            .flat_map(|r| bow.assign(r).unwrap().1)
            .collect();
        let pq = pq_train(&Matrix::new(400, 16, res).unwrap(), 4, 8, 10, seed).unwrap();
        (bow, pq)
    }

    fn record(descriptor: Vec<f32>) -> LocalRecord {
        LocalRecord {
            frame_id: 9,
            video_id: 1,
            keypoint: Keypoint {
                x: 10.0,
                y: 20.0,
                theta: 0.3,
                log_scale: 1.0,
            },
            descriptor,
        }
    }

    #[test]
    fn encode_empty_and_exact_center() {
        let (bow, pq) = models(1);
        assert!(encode_frame_local(&[], &bow, &pq, FrameSize::default())
            .unwrap()
            .is_empty());
        let postings = encode_frame_local(
            &[record(bow.center(7).to_vec())],
            &bow,
            &pq,
            FrameSize::default(),
        )
        .unwrap();
        assert_eq!(postings[0].word, 7);
        assert_eq!(postings[0].codes, pq.encode(&[0.0; 16]).unwrap());
        assert!(
            encode_frame_local(&[record(vec![0.0; 15])], &bow, &pq, FrameSize::default()).is_err()
        );
    }

    #[test]
    fn encode_matches_composition() {
        let (bow, pq) = models(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let records: Vec<LocalRecord> = (0..50)
            .map(|_| record((0..16).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let postings = encode_frame_local(&records, &bow, &pq, FrameSize::default()).unwrap();
        for (r, p) in records.iter().zip(&postings) {
            let (w, res) = bow.assign(&r.descriptor).unwrap();
            assert_eq!(p.word as usize, w);
            assert_eq!(p.codes, pq.encode(&res).unwrap());
        }
    }
}
