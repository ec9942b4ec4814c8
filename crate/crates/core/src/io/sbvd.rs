//! `.sbvd`: "SBVD", u32 version (1), u32 C, T, H, W, then C*T*H*W
//! little-endian f32 values in C, T, H, W row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::video::Video;

const MAGIC: &[u8; 4] = b"SBVD";
const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 * 5;

pub fn encode_sbvd(video: &Video) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 4 * video.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in video.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in video.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes an `.sbvd` image; `path` only labels errors.
pub fn decode_sbvd(bytes: &[u8], path: &Path) -> Result<Video> {
    let bad = |reason: String| Error::format(path, reason);
    if bytes.len() < HEADER {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing SBVD magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let version = word(0);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dims = [1, 2, 3, 4].map(|i| word(i) as usize);
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let body = &bytes[HEADER..];
    if body.len() != 4 * count {
        return Err(bad(format!("expected {} data bytes for {dims:?}, found {}", 4 * count, body.len())));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Video::new(dims, data).map_err(|e| bad(e.to_string()))
}

pub fn read_sbvd(path: &Path) -> Result<Video> {
    decode_sbvd(&fs::read(path)?, path)
}

pub fn write_sbvd(path: &Path, video: &Video) -> Result<()> {
    super::write_atomic(path, &encode_sbvd(video))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let v = Video::new([1, 2, 1, 1], vec![0.5, 1.0]).unwrap();
        let bytes = encode_sbvd(&v);
        assert_eq!(&bytes[..4], b"SBVD");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..24], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &0.5f32.to_le_bytes());
        assert_eq!(decode_sbvd(&bytes, Path::new("x")).unwrap(), v);
    }

    #[test]
    fn corrupt_files_rejected() {
        let v = Video::new([1, 1, 1, 2], vec![0.1, 0.2]).unwrap();
        let bytes = encode_sbvd(&v);
        let p = Path::new("clip.sbvd");
        assert!(decode_sbvd(&bytes[..bytes.len() - 1], p).is_err());
        assert!(decode_sbvd(&bytes[..10], p).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_sbvd(&wrong, p).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(matches!(decode_sbvd(&v2, p), Err(Error::Format { .. })));
    }

    #[test]
    fn file_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let v = Video::new([3, 2, 2, 2], (0..24).map(|i| i as f32 / 23.0).collect()).unwrap();
        let p = dir.path().join("a/b.sbvd");
        write_sbvd(&p, &v).unwrap();
        assert_eq!(read_sbvd(&p).unwrap(), v);
    }
}
