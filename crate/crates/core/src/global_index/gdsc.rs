//! Dense global feature files.
//!
//! `"GDSC" | version u16 | blocks...`, each block
//! `frame_id u32 | video_id u32 | n u32 | n × 384 f32`, little-endian, until end of file.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, WriteBytesExt};

use crate::error::{Error, Result};
use crate::io::{
    read_f32s, read_header, read_u32, try_read_u32, write_f32s, write_header, write_u32,
};
use crate::matrix::Matrix;

pub const GDSC_MAGIC: &[u8; 4] = b"GDSC";
pub const GDSC_VERSION: u16 = 1;
pub const GLOBAL_FEATURE_DIM: usize = 384;

/// Dense activations of one frame, one row per sampled location.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalRawFrame {
    pub frame_id: u32,
    pub video_id: u32,
    pub features: Matrix,
}

pub fn write_global_frames<W: Write>(w: &mut W, frames: &[GlobalRawFrame]) -> Result<()> {
    write_header(w, GDSC_MAGIC, GDSC_VERSION)?;
    for f in frames {
        if f.features.cols() != GLOBAL_FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: GLOBAL_FEATURE_DIM,
                got: f.features.cols(),
            });
        }
        w.write_u32::<LE>(f.frame_id)?;
        w.write_u32::<LE>(f.video_id)?;
        write_u32(w, f.features.rows())?;
        write_f32s(w, f.features.as_slice())?;
    }
    Ok(())
}

pub fn read_global_frames<R: Read>(r: &mut R) -> Result<Vec<GlobalRawFrame>> {
    read_header(r, GDSC_MAGIC, GDSC_VERSION)?;
    let mut frames = Vec::new();
    while let Some(frame_id) = try_read_u32(r)? {
        let video_id = read_u32(r)? as u32;
        let n = read_u32(r)?;
        let data = read_f32s(r, n * GLOBAL_FEATURE_DIM)?;
        frames.push(GlobalRawFrame {
            frame_id,
            video_id,
            features: Matrix::new(n, GLOBAL_FEATURE_DIM, data)?,
        });
    }
    Ok(frames)
}

pub fn save_global_frames(path: &Path, frames: &[GlobalRawFrame]) -> Result<()> {
    let mut buf = Vec::new();
    write_global_frames(&mut buf, frames)?;
    std::fs::write(path, buf).map_err(|e| Error::from(e).at(path))
}

pub fn load_global_frames(path: &Path) -> Result<Vec<GlobalRawFrame>> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
    read_global_frames(&mut bytes.as_slice()).map_err(|e| e.at(path))
}
