//! Local descriptor files.
//!
//! Binary: `"LDSC" | version u16 | blocks...`, each block
//! `frame_id u32 | video_id u32 | n u32 | n × (x, y, theta, log_scale, descriptor[128])`
//! with every value little-endian (`f32` for geometry and descriptors).
//!
//! Text: one record per line,
//! `frame_id video_id x y theta log_scale d0 … d127`, whitespace separated; blank lines
//! and lines starting with `#` are ignored.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, WriteBytesExt};

use crate::error::{Error, Result};
use crate::io::{read_f32s, read_header, read_u32, try_read_u32, write_header, write_u32};
use crate::local_index::geometry::{wrap_angle, Keypoint};

pub const LDSC_MAGIC: &[u8; 4] = b"LDSC";
pub const LDSC_VERSION: u16 = 1;
pub const DESCRIPTOR_DIM: usize = 128;

/// One keypoint of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRecord {
    pub frame_id: u32,
    pub video_id: u32,
    pub keypoint: Keypoint,
    pub descriptor: Vec<f32>,
}

/// All keypoints of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFrame {
    pub frame_id: u32,
    pub video_id: u32,
    pub records: Vec<LocalRecord>,
}

impl LocalFrame {
    pub fn new(frame_id: u32, video_id: u32) -> Self {
        Self {
            frame_id,
            video_id,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, keypoint: Keypoint, descriptor: Vec<f32>) {
        self.records.push(LocalRecord {
            frame_id: self.frame_id,
            video_id: self.video_id,
            keypoint,
            descriptor,
        });
    }
}

pub fn write_local_frames<W: Write>(w: &mut W, frames: &[LocalFrame]) -> Result<()> {
    write_header(w, LDSC_MAGIC, LDSC_VERSION)?;
    for f in frames {
        w.write_u32::<LE>(f.frame_id)?;
        w.write_u32::<LE>(f.video_id)?;
        write_u32(w, f.records.len())?;
        for r in &f.records {
            if r.descriptor.len() != DESCRIPTOR_DIM {
                return Err(Error::DimensionMismatch {
                    expected: DESCRIPTOR_DIM,
                    got: r.descriptor.len(),
                });
            }
            let kp = &r.keypoint;
            for v in [kp.x, kp.y, kp.theta, kp.log_scale]
                .iter()
                .chain(&r.descriptor)
            {
                w.write_f32::<LE>(*v)?;
            }
        }
    }
    Ok(())
}

pub fn read_local_frames<R: Read>(r: &mut R) -> Result<Vec<LocalFrame>> {
    read_header(r, LDSC_MAGIC, LDSC_VERSION)?;
    let mut frames = Vec::new();
    while let Some(frame_id) = try_read_u32(r)? {
        let video_id = read_u32(r)? as u32;
        let n = read_u32(r)?;
        let mut frame = LocalFrame::new(frame_id, video_id);
        frame.records.reserve(n.min(1 << 16));
        for _ in 0..n {
            let g = read_f32s(r, 4)?;
            let descriptor = read_f32s(r, DESCRIPTOR_DIM)?;
            let kp = Keypoint {
                x: g[0],
                y: g[1],
                theta: wrap_angle(g[2]),
                log_scale: g[3],
            };
            frame.push(kp, descriptor);
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Parses the line-oriented variant. Records of the same frame are grouped in order of
/// first appearance.
pub fn read_local_text<R: BufRead>(r: R) -> Result<Vec<LocalFrame>> {
    let mut frames: Vec<LocalFrame> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Malformed(format!("line {}: {msg}", lineno + 1));
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 6 + DESCRIPTOR_DIM {
            return Err(Error::DimensionMismatch {
                expected: DESCRIPTOR_DIM,
                got: tokens.len().saturating_sub(6),
            });
        }
        let frame_id: u32 = tokens[0]
            .parse()
            .map_err(|e| bad(format!("frame id: {e}")))?;
        let video_id: u32 = tokens[1]
            .parse()
            .map_err(|e| bad(format!("video id: {e}")))?;
        let values = tokens[2..]
            .iter()
            .map(|t| t.parse::<f32>().map_err(|e| bad(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<f32>>>()?;
        let kp = Keypoint {
            x: values[0],
            y: values[1],
            theta: wrap_angle(values[2]),
            log_scale: values[3],
        };
        let frame = match frames.iter_mut().position(|f| f.frame_id == frame_id) {
            Some(i) if frames[i].video_id != video_id => {
                return Err(bad(format!("frame {frame_id} listed under two videos")));
            }
            Some(i) => &mut frames[i],
            None => {
                frames.push(LocalFrame::new(frame_id, video_id));
                frames.last_mut().unwrap()
            }
        };
        frame.push(kp, values[4..].to_vec());
    }
    Ok(frames)
}

/// Reads either variant, choosing by the magic bytes.
pub fn load_local_frames(path: &Path) -> Result<Vec<LocalFrame>> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
    let parsed = if bytes.starts_with(LDSC_MAGIC) {
        read_local_frames(&mut bytes.as_slice())
    } else {
        read_local_text(bytes.as_slice())
    };
    parsed.map_err(|e| e.at(path))
}

pub fn save_local_frames(path: &Path, frames: &[LocalFrame]) -> Result<()> {
    let mut buf = Vec::new();
    write_local_frames(&mut buf, frames)?;
    std::fs::write(path, buf).map_err(|e| Error::from(e).at(path))
}
