//! The local index file.
//!
//! ```text
//! "LIDX" | version: u16
//! d_bow u32 | m u32 | ksub u32 | prune_fraction f64 | frame width f32 | frame height f32
//! codebook version u16 | codebook fingerprint [8]
//! n_frames u32 | (frame_id u32, video_id u32) * n_frames
//! stop mask: ceil(d_bow/8) bytes, LSB-first
//! idf f32 * d_bow | doc_freq u32 * d_bow
//! per word: count u32 | (frame_id u32, qx u16, qy u16, qtheta u8, qscale u8, codes[m]) * count
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{FrameSize, LocalIndex, LocalIndexParams, PostingList, QuantizedGeometry};
use crate::bits::BitCode;
use crate::error::{Error, Result};
use crate::io::{
    expect_eof, read_f32s, read_header, read_u32, truncated, write_f32s, write_header, write_u32,
};
use crate::quantize::{fingerprint_hex, CODEBOOK_VERSION};

pub const LIDX_MAGIC: &[u8; 4] = b"LIDX";
pub const LIDX_VERSION: u16 = 1;

impl LocalIndex {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let p = &self.params;
        write_header(w, LIDX_MAGIC, LIDX_VERSION)?;
        write_u32(w, p.d_bow)?;
        write_u32(w, p.m)?;
        write_u32(w, p.ksub)?;
        w.write_f64::<LE>(p.prune_fraction)?;
        w.write_f32::<LE>(p.frame.width)?;
        w.write_f32::<LE>(p.frame.height)?;
        w.write_u16::<LE>(CODEBOOK_VERSION)?;
        w.write_all(&p.codebook)?;
        write_u32(w, self.frame_to_video.len())?;
        for (&f, &v) in &self.frame_to_video {
            w.write_u32::<LE>(f)?;
            w.write_u32::<LE>(v)?;
        }
        w.write_all(&BitCode::from_bools(&self.stop_mask).to_bytes())?;
        write_f32s(w, &self.idf)?;
        for &df in &self.doc_freq {
            w.write_u32::<LE>(df)?;
        }
        for list in &self.lists {
            write_u32(w, list.len())?;
            for i in 0..list.len() {
                let g = list.geometry[i];
                w.write_u32::<LE>(list.frame_ids[i])?;
                w.write_u16::<LE>(g.qx)?;
                w.write_u16::<LE>(g.qy)?;
                w.write_u8(g.qtheta)?;
                w.write_u8(g.qscale)?;
                w.write_all(list.codes(i, p.m))?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_header(r, LIDX_MAGIC, LIDX_VERSION)?;
        let d_bow = read_u32(r)?;
        let m = read_u32(r)?;
        let ksub = read_u32(r)?;
        let prune_fraction = r.read_f64::<LE>().map_err(truncated)?;
        let width = r.read_f32::<LE>().map_err(truncated)?;
        let height = r.read_f32::<LE>().map_err(truncated)?;
        let cb_version = r.read_u16::<LE>().map_err(truncated)?;
        if cb_version != CODEBOOK_VERSION {
            return Err(Error::UnsupportedVersion {
                found: cb_version,
                supported: CODEBOOK_VERSION,
            });
        }
        let mut codebook = [0u8; 8];
        r.read_exact(&mut codebook).map_err(truncated)?;
        if d_bow == 0 || m == 0 || !(2..=256).contains(&ksub) || !(width > 0.0 && height > 0.0) {
            return Err(Error::Malformed("local index header out of range".into()));
        }
        let n_frames = read_u32(r)?;
        let mut frame_to_video = BTreeMap::new();
        for _ in 0..n_frames {
            let f = r.read_u32::<LE>().map_err(truncated)?;
            let v = r.read_u32::<LE>().map_err(truncated)?;
            if frame_to_video.insert(f, v).is_some() {
                return Err(Error::Malformed(format!("frame {f} listed twice")));
            }
        }
        let mut mask = vec![0u8; d_bow.div_ceil(8)];
        r.read_exact(&mut mask).map_err(truncated)?;
        let mask = BitCode::from_bytes(d_bow, &mask)?;
        let stop_mask: Vec<bool> = (0..d_bow).map(|i| mask.get(i)).collect();
        let idf = read_f32s(r, d_bow)?;
        let mut doc_freq = vec![0u32; d_bow];
        r.read_u32_into::<LE>(&mut doc_freq).map_err(truncated)?;
        let mut lists = Vec::with_capacity(d_bow);
        for word in 0..d_bow {
            let count = read_u32(r)?;
            if count > 0 && stop_mask[word] {
                return Err(Error::Malformed(format!(
                    "stopped word {word} has postings"
                )));
            }
            let mut list = PostingList {
                frame_ids: Vec::with_capacity(count.min(1 << 20)),
                geometry: Vec::with_capacity(count.min(1 << 20)),
                codes: Vec::with_capacity((count * m).min(1 << 23)),
            };
            let mut codes = vec![0u8; m];
            for _ in 0..count {
                let frame_id = r.read_u32::<LE>().map_err(truncated)?;
                if !frame_to_video.contains_key(&frame_id) {
                    return Err(Error::Malformed(format!(
                        "posting refers to unknown frame {frame_id}"
                    )));
                }
                let g = QuantizedGeometry {
                    qx: r.read_u16::<LE>().map_err(truncated)?,
                    qy: r.read_u16::<LE>().map_err(truncated)?,
                    qtheta: r.read_u8().map_err(truncated)?,
                    qscale: r.read_u8().map_err(truncated)?,
                };
                r.read_exact(&mut codes).map_err(truncated)?;
                if codes.iter().any(|&c| c as usize >= ksub) {
                    return Err(Error::Malformed(format!("PQ code outside {ksub} centers")));
                }
                list.frame_ids.push(frame_id);
                list.geometry.push(g);
                list.codes.extend_from_slice(&codes);
            }
            lists.push(list);
        }
        expect_eof(r)?;
        Ok(LocalIndex {
            params: LocalIndexParams {
                d_bow,
                m,
                ksub,
                prune_fraction,
                frame: FrameSize::new(width, height),
                codebook,
            },
            lists,
            doc_freq,
            stop_mask,
            idf,
            frame_to_video,
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
        if &self.params.codebook != fingerprint {
            return Err(Error::CodebookMismatch {
                index_codebook: fingerprint_hex(&self.params.codebook),
                index_version: CODEBOOK_VERSION,
                given_codebook: fingerprint_hex(fingerprint),
                given_version: CODEBOOK_VERSION,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_local_index, EncodedFrame, LocalPosting};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> LocalIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frames: Vec<EncodedFrame> = (0..12u32)
            .map(|f| EncodedFrame {
                frame_id: f * 3,
                video_id: f / 4,
                postings: (0..rng.random_range(1..40))
                    .map(|_| LocalPosting {
                        word: rng.random_range(0..30),
                        codes: (0..4).map(|_| rng.random_range(0..16)).collect(),
                        geometry: QuantizedGeometry {
                            qx: rng.random(),
                            qy: rng.random(),
                            qtheta: rng.random(),
                            qscale: rng.random(),
                        },
                        frame_id: f * 3,
                    })
                    .collect(),
            })
            .collect();
        let params = LocalIndexParams {
            d_bow: 30,
            m: 4,
            ksub: 16,
            prune_fraction: 0.1,
            frame: FrameSize::new(320.0, 240.0),
            codebook: [1, 2, 3, 4, 5, 6, 7, 8],
        };
        build_local_index(&frames, params).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let idx = sample();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        let back = LocalIndex::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, idx);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_damage() {
        let idx = sample();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert_eq!(
            LocalIndex::read_from(&mut bad.as_slice())
                .unwrap_err()
                .kind(),
            "bad-magic"
        );
        let mut bad = buf.clone();
        bad[4] = 9;
        assert_eq!(
            LocalIndex::read_from(&mut bad.as_slice())
                .unwrap_err()
                .kind(),
            "unsupported-version"
        );
        let short = &buf[..buf.len() - 3];
        assert_eq!(
            LocalIndex::read_from(&mut &short[..]).unwrap_err().kind(),
            "malformed"
        );
        let mut long = buf.clone();
        long.push(0);
        assert_eq!(
            LocalIndex::read_from(&mut long.as_slice())
                .unwrap_err()
                .kind(),
            "malformed"
        );
    }

    #[test]
    fn codebook_check() {
        let idx = sample();
        assert!(idx.check_codebook(&[1, 2, 3, 4, 5, 6, 7, 8]).is_ok());
        let err = idx.check_codebook(&[0; 8]).unwrap_err();
        assert_eq!(err.kind(), "codebook-mismatch");
        assert!(err.to_string().contains("0102030405060708"));
    }
}
