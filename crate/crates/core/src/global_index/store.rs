//! The global index file.
//!
//! ```text
//! "GIDX" | version: u16
//! bits u32 | d_fk u32 | n_centers u32 | codebook version u16 | codebook fingerprint [8]
//! centers: n_centers × ceil(bits/8) bytes, LSB-first
//! per center: count u32 | (frame_id u32, video_id u32, packed bits) * count
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{GlobalIndex, GlobalSignature};
use crate::bits::BitCode;
use crate::error::{Error, Result};
use crate::io::{expect_eof, read_header, read_u32, truncated, write_header, write_u32};
use crate::quantize::{fingerprint_hex, BinaryCenters, CODEBOOK_VERSION};

pub const GIDX_MAGIC: &[u8; 4] = b"GIDX";
pub const GIDX_VERSION: u16 = 1;

fn read_code<R: Read>(r: &mut R, bits: usize) -> Result<BitCode> {
    let mut buf = vec![0u8; bits.div_ceil(8)];
    r.read_exact(&mut buf).map_err(truncated)?;
    BitCode::from_bytes(bits, &buf)
}

impl GlobalIndex {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, GIDX_MAGIC, GIDX_VERSION)?;
        write_u32(w, self.bits())?;
        write_u32(w, self.d_fk)?;
        write_u32(w, self.centers.len())?;
        w.write_u16::<LE>(CODEBOOK_VERSION)?;
        w.write_all(&self.codebook)?;
        for c in self.centers.centers() {
            w.write_all(&c.to_bytes())?;
        }
        for list in &self.clusters {
            write_u32(w, list.len())?;
            for s in list {
                w.write_u32::<LE>(s.frame_id)?;
                w.write_u32::<LE>(s.video_id)?;
                w.write_all(&s.bits.to_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_header(r, GIDX_MAGIC, GIDX_VERSION)?;
        let bits = read_u32(r)?;
        let d_fk = read_u32(r)?;
        let n_centers = read_u32(r)?;
        let cb_version = r.read_u16::<LE>().map_err(truncated)?;
        if cb_version != CODEBOOK_VERSION {
            return Err(Error::UnsupportedVersion {
                found: cb_version,
                supported: CODEBOOK_VERSION,
            });
        }
        let mut codebook = [0u8; 8];
        r.read_exact(&mut codebook).map_err(truncated)?;
        if bits == 0 || d_fk == 0 || bits % d_fk != 0 || n_centers == 0 || n_centers > 1 << 16 {
            return Err(Error::Malformed("global index header out of range".into()));
        }
        let centers = (0..n_centers)
            .map(|_| read_code(r, bits))
            .collect::<Result<Vec<_>>>()?;
        let centers = BinaryCenters::new(centers).map_err(|e| Error::Malformed(e.to_string()))?;
        let mut clusters = Vec::with_capacity(n_centers);
        for c in 0..n_centers {
            let count = read_u32(r)?;
            let mut list = Vec::with_capacity(count.min(1 << 16));
            for _ in 0..count {
                let frame_id = r.read_u32::<LE>().map_err(truncated)?;
                let video_id = r.read_u32::<LE>().map_err(truncated)?;
                let code = read_code(r, bits)?;
                list.push(GlobalSignature {
                    frame_id,
                    video_id,
                    bits: code,
                });
            }
            if list.windows(2).any(|w| w[0].frame_id >= w[1].frame_id) {
                return Err(Error::Malformed(format!(
                    "cluster {c} is not sorted by frame id"
                )));
            }
            clusters.push(list);
        }
        expect_eof(r)?;
        Ok(GlobalIndex {
            d_fk,
            centers,
            codebook,
            clusters,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::from(e).at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
        Self::read_from(&mut bytes.as_slice()).map_err(|e| e.at(path))
    }

    /// Fails unless this index was built with the codebook of the given fingerprint.
    pub fn check_codebook(&self, fingerprint: &[u8; 8]) -> Result<()> {
        if &self.codebook != fingerprint {
            return Err(Error::CodebookMismatch {
                index_codebook: fingerprint_hex(&self.codebook),
                index_version: CODEBOOK_VERSION,
                given_codebook: fingerprint_hex(fingerprint),
                given_version: CODEBOOK_VERSION,
            });
        }
        Ok(())
    }
}
