//! Synthetic corpora with planted query copies.
//!
//! Reference videos are scenes of keypoints whose descriptors are drawn around a
//! shared prototype pool, so unrelated videos still produce same-word matches. Each
//! frame is a jittered view of its scene. Queries are views of one reference frame
//! under a similarity transform about the frame center, plus random distractor
//! keypoints. Dense global features come from a low-dimensional latent mixture per
//! video, embedded in 384 dimensions.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::global_index::gdsc::{save_global_frames, GlobalRawFrame, GLOBAL_FEATURE_DIM};
use crate::local_index::ldsc::{save_local_frames, DESCRIPTOR_DIM};
use crate::local_index::{geometry::wrap_angle, FrameSize, Keypoint, LocalFrame};
use crate::matrix::Matrix;

/// Query ids start here so they never collide with reference frame ids.
pub const QUERY_ID_BASE: u32 = 1_000_000;

const LATENT_DIM: usize = 48;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub videos: usize,
    pub frames_per_video: usize,
    pub queries: usize,
    pub keypoints_min: usize,
    pub keypoints_max: usize,
    pub distractors: usize,
    pub global_features: usize,
    pub prototypes: usize,
    /// Largest absolute query rotation, radians.
    pub max_rotation: f32,
    /// Largest absolute log₂ query scale change.
    pub max_log_scale: f32,
    /// Largest absolute query translation, pixels.
    pub max_translation: f32,
    /// Overrides the random transform with a fixed (rotation, log₂ scale).
    pub fixed_transform: Option<(f32, f32)>,
    /// Latent noise of query dense features; reference frames use 0.5.
    pub query_global_noise: f32,
    pub frame: FrameSize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            videos: 100,
            frames_per_video: 10,
            queries: 20,
            keypoints_min: 60,
            keypoints_max: 80,
            distractors: 20,
            global_features: 30,
            prototypes: 400,
            max_rotation: 0.6,
            max_log_scale: 0.4,
            max_translation: 30.0,
            fixed_transform: None,
            query_global_noise: 0.7,
            frame: FrameSize::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.videos == 0 || self.frames_per_video == 0 {
            return bad("need at least one video with one frame");
        }
        if self.queries > self.videos {
            return bad("each query copies a different video, so queries cannot exceed videos");
        }
        if self.keypoints_min == 0 || self.keypoints_min > self.keypoints_max {
            return bad("keypoint range must be non-empty and positive");
        }
        if self.global_features == 0 || self.prototypes == 0 {
            return bad("global_features and prototypes must be positive");
        }
        if !(self.query_global_noise > 0.0) {
            return bad("query_global_noise must be positive");
        }
        if !(self.max_rotation >= 0.0 && self.max_log_scale >= 0.0 && self.max_translation >= 0.0) {
            return bad("transform ranges must be non-negative");
        }
        if (self.videos * self.frames_per_video) as u64 >= QUERY_ID_BASE as u64 {
            return bad("too many reference frames");
        }
        Ok(())
    }
}

/// Similarity transform applied to a query, about the frame center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedTransform {
    pub query_id: u32,
    pub video_id: u32,
    pub frame_id: u32,
    pub rotation: f32,
    pub log_scale: f32,
    pub tx: f32,
    pub ty: f32,
}

impl PlantedTransform {
    pub fn apply(&self, kp: &Keypoint, frame: FrameSize) -> Keypoint {
        let (cx, cy) = (frame.width / 2.0, frame.height / 2.0);
        let s = self.log_scale.exp2();
        let (sin, cos) = self.rotation.sin_cos();
        let (dx, dy) = (kp.x - cx, kp.y - cy);
        Keypoint {
            x: s * (cos * dx - sin * dy) + cx + self.tx,
            y: s * (sin * dx + cos * dy) + cy + self.ty,
            theta: wrap_angle(kp.theta + self.rotation),
            log_scale: kp.log_scale + self.log_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub reference_local: Vec<LocalFrame>,
    pub reference_global: Vec<GlobalRawFrame>,
    pub query_local: Vec<LocalFrame>,
    pub query_global: Vec<GlobalRawFrame>,
    pub ground_truth: GroundTruth,
    pub transforms: Vec<PlantedTransform>,
}

struct SceneKeypoint {
    kp: Keypoint,
    descriptor: Vec<f32>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sigma: f32) -> Vec<f32> {
    let d = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n).map(|_| d.sample(rng)).collect()
}

fn jitter(rng: &mut ChaCha8Rng, v: &[f32], sigma: f32) -> Vec<f32> {
    let d = Normal::new(0.0, sigma).expect("positive sigma");
    v.iter().map(|x| x + d.sample(rng)).collect()
}

fn random_keypoint(rng: &mut ChaCha8Rng, frame: FrameSize) -> Keypoint {
    Keypoint {
        x: rng.random_range(0.0..frame.width),
        y: rng.random_range(0.0..frame.height),
        theta: rng.random_range(-std::f32::consts::PI..std::f32::consts::PI),
        log_scale: rng.random_range(0.5..3.0),
    }
}

fn inside(kp: &Keypoint, frame: FrameSize) -> bool {
    kp.x >= 0.0 && kp.x < frame.width && kp.y >= 0.0 && kp.y < frame.height
}

struct GlobalModel {
    basis: Vec<f32>,
    atoms: Vec<Vec<f32>>,
}

impl GlobalModel {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let basis = gaussian_vec(
            rng,
            GLOBAL_FEATURE_DIM * LATENT_DIM,
            1.0 / (LATENT_DIM as f32).sqrt(),
        );
        let atoms = (0..64)
            .map(|_| gaussian_vec(rng, LATENT_DIM, 1.0))
            .collect();
        Self { basis, atoms }
    }

    fn embed(&self, z: &[f32], rng: &mut ChaCha8Rng, out: &mut Vec<f32>) {
        let ambient = Normal::new(0.0, 0.02f32).expect("positive sigma");
        for r in 0..GLOBAL_FEATURE_DIM {
            let row = &self.basis[r * LATENT_DIM..(r + 1) * LATENT_DIM];
            let v: f32 = row.iter().zip(z).map(|(a, b)| a * b).sum();
            out.push(v + ambient.sample(rng));
        }
    }
}

struct VideoStyle {
    atoms: Vec<usize>,
    offset: Vec<f32>,
}

fn global_frame(
    model: &GlobalModel,
    style: &VideoStyle,
    n: usize,
    noise: f32,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    let mut data = Vec::with_capacity(n * GLOBAL_FEATURE_DIM);
    let d = Normal::new(0.0, noise).expect("positive sigma");
    for _ in 0..n {
        let a = &model.atoms[style.atoms[rng.random_range(0..style.atoms.len())]];
        let z: Vec<f32> = a
            .iter()
            .zip(&style.offset)
            .map(|(x, o)| x + o + d.sample(rng))
            .collect();
        model.embed(&z, rng, &mut data);
    }
    Matrix::new(n, GLOBAL_FEATURE_DIM, data).expect("shape")
}

/// Generates a corpus; the same config always yields the same corpus.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame = cfg.frame;
    let prototypes: Vec<Vec<f32>> = (0..cfg.prototypes)
        .map(|_| gaussian_vec(&mut rng, DESCRIPTOR_DIM, 1.0))
        .collect();
    let gmodel = GlobalModel::new(&mut rng);

    let mut reference_local = Vec::new();
    let mut reference_global = Vec::new();
    let mut styles = Vec::new();
    for v in 0..cfg.videos {
        let n_kp = rng.random_range(cfg.keypoints_min..=cfg.keypoints_max);
        let scene: Vec<SceneKeypoint> = (0..n_kp)
            .map(|_| {
                let p = &prototypes[rng.random_range(0..prototypes.len())];
                SceneKeypoint {
                    kp: random_keypoint(&mut rng, frame),
                    descriptor: jitter(&mut rng, p, 0.35),
                }
            })
            .collect();
        let mut atoms: Vec<usize> = (0..gmodel.atoms.len()).collect();
        atoms.shuffle(&mut rng);
        atoms.truncate(4);
        let style = VideoStyle {
            atoms,
            offset: gaussian_vec(&mut rng, LATENT_DIM, 0.6),
        };
        for f in 0..cfg.frames_per_video {
            let frame_id = (v * cfg.frames_per_video + f) as u32;
            let (sx, sy) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            let mut lf = LocalFrame::new(frame_id, v as u32);
            for s in &scene {
                if rng.random_bool(0.1) {
                    continue;
                }
                let kp = Keypoint {
                    x: s.kp.x + sx,
                    y: s.kp.y + sy,
                    ..s.kp
                };
                if inside(&kp, frame) {
                    lf.push(kp, jitter(&mut rng, &s.descriptor, 0.05));
                }
            }
            reference_local.push(lf);
            reference_global.push(GlobalRawFrame {
                frame_id,
                video_id: v as u32,
                features: global_frame(&gmodel, &style, cfg.global_features, 0.5, &mut rng),
            });
        }
        styles.push(style);
    }

    let mut sources: Vec<usize> = (0..cfg.videos).collect();
    sources.shuffle(&mut rng);
    let mut query_local = Vec::new();
    let mut query_global = Vec::new();
    let mut ground_truth = GroundTruth::default();
    let mut transforms = Vec::new();
    for (qi, &v) in sources.iter().take(cfg.queries).enumerate() {
        let query_id = QUERY_ID_BASE + qi as u32;
        let f = rng.random_range(0..cfg.frames_per_video);
        let src = &reference_local[v * cfg.frames_per_video + f];
        let (rotation, log_scale) = match cfg.fixed_transform {
            Some(t) => t,
            None => (
                rng.random_range(-cfg.max_rotation..=cfg.max_rotation),
                rng.random_range(-cfg.max_log_scale..=cfg.max_log_scale),
            ),
        };
        let t = PlantedTransform {
            query_id,
            video_id: v as u32,
            frame_id: src.frame_id,
            rotation,
            log_scale,
            tx: rng.random_range(-cfg.max_translation..=cfg.max_translation),
            ty: rng.random_range(-cfg.max_translation..=cfg.max_translation),
        };
        let mut q = LocalFrame::new(query_id, 0);
        for r in &src.records {
            let kp = t.apply(&r.keypoint, frame);
            if inside(&kp, frame) {
                q.push(kp, jitter(&mut rng, &r.descriptor, 0.05));
            }
        }
        for _ in 0..cfg.distractors {
            let p = &prototypes[rng.random_range(0..prototypes.len())];
            let d = jitter(&mut rng, p, 0.35);
            q.push(random_keypoint(&mut rng, frame), d);
        }
        query_local.push(q);
        query_global.push(GlobalRawFrame {
            frame_id: query_id,
            video_id: 0,
            features: global_frame(
                &gmodel,
                &styles[v],
                cfg.global_features,
                cfg.query_global_noise,
                &mut rng,
            ),
        });
        ground_truth.insert(query_id, v as u32);
        transforms.push(t);
    }

    Ok(SynthCorpus {
        reference_local,
        reference_global,
        query_local,
        query_global,
        ground_truth,
        transforms,
    })
}

pub const REFERENCE_DIR: &str = "reference";
pub const QUERY_DIR: &str = "queries";
pub const LOCAL_FILE: &str = "local.ldsc";
pub const GLOBAL_FILE: &str = "global.gdsc";
pub const GROUND_TRUTH_FILE: &str = "gt.tsv";
pub const TRANSFORMS_FILE: &str = "transforms.tsv";

impl SynthCorpus {
    /// Writes `reference/` and `queries/` feature files plus the ground truth and
    /// transform log into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        for (sub, local, global) in [
            (REFERENCE_DIR, &self.reference_local, &self.reference_global),
            (QUERY_DIR, &self.query_local, &self.query_global),
        ] {
            let d = dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::from(e).at(&d))?;
            save_local_frames(&d.join(LOCAL_FILE), local)?;
            save_global_frames(&d.join(GLOBAL_FILE), global)?;
        }
        self.ground_truth.save(&dir.join(GROUND_TRUTH_FILE))?;
        let mut log = String::from("query_id\tvideo_id\tframe_id\trotation\tlog2_scale\ttx\tty\n");
        for t in &self.transforms {
            writeln!(
                log,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.3}\t{:.3}",
                t.query_id, t.video_id, t.frame_id, t.rotation, t.log_scale, t.tx, t.ty
            )
            .expect("writing to a string");
        }
        let path = dir.join(TRANSFORMS_FILE);
        std::fs::write(&path, log).map_err(|e| Error::from(e).at(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            videos: 6,
            frames_per_video: 3,
            queries: 4,
            global_features: 5,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(other, generate(&small()).unwrap());
    }

    #[test]
    fn shapes_and_ground_truth() {
        let c = generate(&small()).unwrap();
        assert_eq!(c.reference_local.len(), 18);
        assert_eq!(c.reference_global.len(), 18);
        assert_eq!(c.query_local.len(), 4);
        assert_eq!(c.ground_truth.relevant.len(), 4);
        for t in &c.transforms {
            assert!(c.ground_truth.relevant[&t.query_id].contains(&t.video_id));
            assert_eq!(c.reference_local[t.frame_id as usize].video_id, t.video_id);
        }
        for f in &c.reference_local {
            assert!(f
                .records
                .iter()
                .all(|r| inside(&r.keypoint, FrameSize::default())));
        }
    }

    #[test]
    fn fixed_transform_is_applied() {
        let cfg = SynthConfig {
            fixed_transform: Some((std::f32::consts::FRAC_PI_6, 1.5f32.log2())),
            max_translation: 0.0,
            distractors: 0,
            ..small()
        };
        let c = generate(&cfg).unwrap();
        for t in &c.transforms {
            assert_eq!(t.rotation, std::f32::consts::FRAC_PI_6);
            let center = Keypoint {
                x: 320.0,
                y: 240.0,
                theta: 0.0,
                log_scale: 1.0,
            };
            let moved = t.apply(&center, cfg.frame);
            assert!((moved.x - 320.0).abs() < 1e-3 && (moved.y - 240.0).abs() < 1e-3);
            assert!((moved.log_scale - 1.0 - 1.5f32.log2()).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(generate(&SynthConfig {
            queries: 7,
            ..small()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            keypoints_min: 0,
            ..small()
        })
        .is_err());
    }
}
