//! Little-endian binary helpers shared by every file format.

use std::io::{ErrorKind, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], version: u16) -> Result<()> {
    w.write_all(magic)?;
    w.write_u16::<LE>(version)?;
    Ok(())
}

/// Reads and checks a magic tag plus version; returns the version.
pub(crate) fn read_header<R: Read>(r: &mut R, magic: &[u8; 4], supported: u16) -> Result<u16> {
    let found = read_magic(r)?;
    if &found != magic {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    let version = r.read_u16::<LE>()?;
    if version != supported {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported,
        });
    }
    Ok(version)
}

pub(crate) fn read_magic<R: Read>(r: &mut R) -> Result<[u8; 4]> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(truncated)?;
    Ok(found)
}

pub(crate) fn truncated(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Malformed("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{v} exceeds u32")))?;
    w.write_u32::<LE>(v)?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(r.read_u32::<LE>().map_err(truncated)? as usize)
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    for &v in values {
        w.write_f32::<LE>(v)?;
    }
    Ok(())
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut out = vec![0f32; n];
    r.read_f32_into::<LE>(&mut out).map_err(truncated)?;
    Ok(out)
}

/// Reads the next u32, or `None` on a clean end of file.
pub(crate) fn try_read_u32<R: Read>(r: &mut R) -> Result<Option<u32>> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::Malformed("unexpected end of file".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(u32::from_le_bytes(buf)))
}

pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Malformed("trailing bytes after end of data".into())),
    }
}
