//! Binary file of named `f64` arrays.
//!
//! Layout, all little-endian: `b"FMNA"`, `u32` version, `u32` count, then
//! per entry a `u32` name length, the UTF-8 name, a `u32` rank, `u64`
//! dimensions and the `f64` data.

use std::io::{Read, Write};
use std::path::Path;

use super::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FMNA";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NamedArrays(pub Vec<(String, Tensor)>);

impl NamedArrays {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        for (name, t) in &self.0 {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::CorruptContainer("bad magic".into()));
        }
        if read_u32(&mut r)? != VERSION {
            return Err(Error::CorruptContainer("unsupported version".into()));
        }
        let count = read_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = read_u32(&mut r)? as usize;
            if len > r.len() {
                return Err(Error::CorruptContainer("truncated name".into()));
            }
            let mut name = vec![0u8; len];
            read(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::CorruptContainer("name is not UTF-8".into()))?;
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                let mut b = [0u8; 8];
                read(&mut r, &mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.filter(|&n| n.saturating_mul(8) <= r.len()).ok_or_else(|| {
                Error::CorruptContainer(format!("array {name} is truncated"))
            })?;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 8];
                read(&mut r, &mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            entries.push((name, Tensor::from_vec(&shape, data)?));
        }
        if !r.is_empty() {
            return Err(Error::CorruptContainer("trailing bytes".into()));
        }
        Ok(NamedArrays(entries))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::CorruptContainer("unexpected end of file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let arrays = NamedArrays(vec![
            ("a".into(), Tensor::from_vec(&[2, 3], vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE, 0.0, 1e300]).unwrap()),
            ("empty".into(), Tensor::zeros(&[0])),
        ]);
        let bytes = arrays.to_bytes();
        assert_eq!(NamedArrays::from_bytes(&bytes).unwrap(), arrays);
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(NamedArrays::from_bytes(&bytes[..cut]).is_err());
        }
    }
}
