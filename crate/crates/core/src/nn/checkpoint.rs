//! `SBCK` checkpoint files: magic, `u32` version, then one record per
//! parameter: `u32` name length, name bytes, `u32` rank, `u32` dims, raw
//! little-endian `f64` values. Records run to end of file.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Classifier, Param};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SBCK";
pub const VERSION: u32 = 1;

pub fn encode(params: &[Param]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<Param>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        return Err(Error::format(path, "bad magic, expected SBCK"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let mut params = Vec::new();
    while r.pos < bytes.len() {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::format(path, "parameter name is not UTF-8"))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.push(Param {
            name,
            value: Tensor::new(&shape, data).map_err(|e| Error::format(path, e.to_string()))?,
        });
    }
    Ok(params)
}

pub fn save(net: &impl Classifier, path: &Path) -> Result<()> {
    let tmp = path.with_extension("sbck.tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&encode(net.params()))?;
    f.sync_all()?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Loads parameters into `net`; names and shapes must match exactly.
pub fn load_into(net: &mut impl Classifier, path: &Path) -> Result<()> {
    let params = decode(&fs::read(path)?, path)?;
    let target = net.params_mut();
    if params.len() != target.len() {
        return Err(Error::format(
            path,
            format!("checkpoint has {} parameters, network has {}", params.len(), target.len()),
        ));
    }
    for (dst, src) in target.iter_mut().zip(params) {
        if dst.name != src.name || dst.value.shape() != src.value.shape() {
            return Err(Error::format(
                path,
                format!(
                    "parameter {} {:?} does not match network parameter {} {:?}",
                    src.name,
                    src.value.shape(),
                    dst.name,
                    dst.value.shape()
                ),
            ));
        }
        dst.value = src.value;
    }
    Ok(())
}
