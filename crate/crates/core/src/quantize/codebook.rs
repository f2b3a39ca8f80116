//! The codebook bundle file.
//!
//! ```text
//! "I2VC" | version: u16 | model
//! model  := kind: u8 | dims (u32 each) | payload (f32 row-major, LE)
//! kind 0 = bundle: count u8, then `count` models
//! kind 1 = k-means:   k, d, centers[k*d]
//! kind 2 = PQ:        m, ksub, sub_dim, centers[m*ksub*sub_dim], max_dist[m]
//! kind 3 = PCA:       d_in, d_out, mean[d_in], basis[d_out*d_in]
//! kind 4 = GMM:       k, d, weights[k], means[k*d], variances[k*d]
//! kind 5 = binary:    count, bits, packed centers (LSB-first, ceil(bits/8) bytes each)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::bits::BitCode;
use crate::error::{Error, Result};
use crate::io::{
    expect_eof, read_f32s, read_header, read_u32, truncated, write_f32s, write_header, write_u32,
};
use crate::quantize::{BinaryCenters, GMMModel, KMeansModel, PCAModel, PQModel};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"I2VC";
pub const CODEBOOK_VERSION: u16 = 1;

const KIND_BUNDLE: u8 = 0;
const KIND_KMEANS: u8 = 1;
const KIND_PQ: u8 = 2;
const KIND_PCA: u8 = 3;
const KIND_GMM: u8 = 4;
const KIND_BINARY: u8 = 5;

/// One trained model, as stored in a codebook file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    KMeans(KMeansModel),
    Pq(PQModel),
    Pca(PCAModel),
    Gmm(GMMModel),
    Binary(BinaryCenters),
}

/// Every model the engine needs, versioned together.
#[derive(Clone, Debug, PartialEq)]
pub struct CodebookSet {
    pub coarse: KMeansModel,
    pub pq: PQModel,
    pub pca: PCAModel,
    pub gmm: GMMModel,
    pub binary: BinaryCenters,
}

impl CodebookSet {
    pub fn new(
        coarse: KMeansModel,
        pq: PQModel,
        pca: PCAModel,
        gmm: GMMModel,
        binary: BinaryCenters,
    ) -> Result<Self> {
        if pq.dim() != coarse.dim() {
            return Err(Error::DimensionMismatch {
                expected: coarse.dim(),
                got: pq.dim(),
            });
        }
        if gmm.dim() != pca.d_out() {
            return Err(Error::DimensionMismatch {
                expected: pca.d_out(),
                got: gmm.dim(),
            });
        }
        if binary.bits() != gmm.dim() * gmm.k() {
            return Err(Error::DimensionMismatch {
                expected: gmm.dim() * gmm.k(),
                got: binary.bits(),
            });
        }
        Ok(Self {
            coarse,
            pq,
            pca,
            gmm,
            binary,
        })
    }

    /// Length of the binary global signature.
    pub fn signature_bits(&self) -> usize {
        self.gmm.dim() * self.gmm.k()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, CODEBOOK_MAGIC, CODEBOOK_VERSION)?;
        w.write_u8(KIND_BUNDLE)?;
        w.write_u8(5)?;
        write_model(w, &Model::KMeans(self.coarse.clone()))?;
        write_model(w, &Model::Pq(self.pq.clone()))?;
        write_model(w, &Model::Pca(self.pca.clone()))?;
        write_model(w, &Model::Gmm(self.gmm.clone()))?;
        write_model(w, &Model::Binary(self.binary.clone()))?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_header(r, CODEBOOK_MAGIC, CODEBOOK_VERSION)?;
        if r.read_u8().map_err(truncated)? != KIND_BUNDLE {
            return Err(Error::Malformed(
                "codebook file does not hold a bundle".into(),
            ));
        }
        let count = r.read_u8().map_err(truncated)?;
        if count != 5 {
            return Err(Error::Malformed(format!(
                "bundle holds {count} models, expected 5"
            )));
        }
        let models = (0..count)
            .map(|_| read_model(r))
            .collect::<Result<Vec<_>>>()?;
        expect_eof(r)?;
        let mut it = models.into_iter();
        match (it.next(), it.next(), it.next(), it.next(), it.next()) {
            (
                Some(Model::KMeans(coarse)),
                Some(Model::Pq(pq)),
                Some(Model::Pca(pca)),
                Some(Model::Gmm(gmm)),
                Some(Model::Binary(binary)),
            ) => CodebookSet::new(coarse, pq, pca, gmm, binary),
            _ => Err(Error::Malformed("bundle models out of order".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::from(e).at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
        Self::read_from(&mut bytes.as_slice()).map_err(|e| e.at(path))
    }

    /// Short content hash identifying this exact codebook.
    pub fn fingerprint(&self) -> [u8; 8] {
        fingerprint_bytes(&self.to_bytes())
    }
}

pub(crate) fn fingerprint_bytes(bytes: &[u8]) -> [u8; 8] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

/// Hex rendering of a fingerprint.
pub fn fingerprint_hex(fp: &[u8; 8]) -> String {
    fp.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a stand-alone single-model codebook file.
pub fn write_single<W: Write>(w: &mut W, model: &Model) -> Result<()> {
    write_header(w, CODEBOOK_MAGIC, CODEBOOK_VERSION)?;
    write_model(w, model)
}

pub fn read_single<R: Read>(r: &mut R) -> Result<Model> {
    read_header(r, CODEBOOK_MAGIC, CODEBOOK_VERSION)?;
    let m = read_model(r)?;
    expect_eof(r)?;
    Ok(m)
}

fn write_model<W: Write>(w: &mut W, model: &Model) -> Result<()> {
    match model {
        Model::KMeans(km) => {
            w.write_u8(KIND_KMEANS)?;
            write_u32(w, km.k())?;
            write_u32(w, km.dim())?;
            write_f32s(w, km.centers())?;
        }
        Model::Pq(pq) => {
            w.write_u8(KIND_PQ)?;
            write_u32(w, pq.m())?;
            write_u32(w, pq.ksub())?;
            write_u32(w, pq.sub_dim())?;
            for sub in pq.sub_models() {
                write_f32s(w, sub.centers())?;
            }
            write_f32s(w, pq.max_dist())?;
        }
        Model::Pca(pca) => {
            w.write_u8(KIND_PCA)?;
            write_u32(w, pca.d_in())?;
            write_u32(w, pca.d_out())?;
            write_f32s(w, pca.mean())?;
            write_f32s(w, pca.basis())?;
        }
        Model::Gmm(gmm) => {
            w.write_u8(KIND_GMM)?;
            write_u32(w, gmm.k())?;
            write_u32(w, gmm.dim())?;
            for v in gmm
                .weights()
                .iter()
                .chain(gmm.means())
                .chain(gmm.variances())
            {
                write_f32s(w, &[*v as f32])?;
            }
        }
        Model::Binary(b) => {
            w.write_u8(KIND_BINARY)?;
            write_u32(w, b.len())?;
            write_u32(w, b.bits())?;
            for c in b.centers() {
                w.write_all(&c.to_bytes())?;
            }
        }
    }
    Ok(())
}

/// Guards allocation against corrupt headers.
fn checked_len(parts: &[usize]) -> Result<usize> {
    parts
        .iter()
        .try_fold(1usize, |acc, &p| acc.checked_mul(p))
        .filter(|&n| n <= 1 << 31)
        .ok_or_else(|| Error::Malformed("model dimensions overflow".into()))
}

fn read_model<R: Read>(r: &mut R) -> Result<Model> {
    let kind = r.read_u8().map_err(truncated)?;
    match kind {
        KIND_KMEANS => {
            let (k, d) = (read_u32(r)?, read_u32(r)?);
            let centers = read_f32s(r, checked_len(&[k, d])?)?;
            Ok(Model::KMeans(KMeansModel::new(d, centers)?))
        }
        KIND_PQ => {
            let (m, ksub, sub_dim) = (read_u32(r)?, read_u32(r)?, read_u32(r)?);
            checked_len(&[m, ksub, sub_dim])?;
            let subs = (0..m)
                .map(|_| KMeansModel::new(sub_dim, read_f32s(r, ksub * sub_dim)?))
                .collect::<Result<Vec<_>>>()?;
            let stored = read_f32s(r, m)?;
            let pq = PQModel::from_sub_models(subs)?;
            if stored
                .iter()
                .map(|v| v.to_bits())
                .ne(pq.max_dist().iter().map(|v| v.to_bits()))
            {
                return Err(Error::Malformed(
                    "stored PQ max distances disagree with centers".into(),
                ));
            }
            Ok(Model::Pq(pq))
        }
        KIND_PCA => {
            let (d_in, d_out) = (read_u32(r)?, read_u32(r)?);
            let mean = read_f32s(r, checked_len(&[d_in])?)?;
            let basis = read_f32s(r, checked_len(&[d_out, d_in])?)?;
            Ok(Model::Pca(PCAModel::new(mean, basis, d_out)?))
        }
        KIND_GMM => {
            let (k, d) = (read_u32(r)?, read_u32(r)?);
            let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
            let weights = widen(read_f32s(r, checked_len(&[k])?)?);
            let means = widen(read_f32s(r, checked_len(&[k, d])?)?);
            let variances = widen(read_f32s(r, k * d)?);
            Ok(Model::Gmm(GMMModel::new(weights, means, variances)?))
        }
        KIND_BINARY => {
            let (count, bits) = (read_u32(r)?, read_u32(r)?);
            let bytes = bits.div_ceil(8);
            checked_len(&[count, bytes])?;
            let mut centers = Vec::with_capacity(count);
            for _ in 0..count {
                let mut buf = vec![0u8; bytes];
                r.read_exact(&mut buf).map_err(truncated)?;
                centers.push(BitCode::from_bytes(bits, &buf)?);
            }
            Ok(Model::Binary(BinaryCenters::new(centers)?))
        }
        other => Err(Error::Malformed(format!("unknown model kind {other}"))),
    }
}
