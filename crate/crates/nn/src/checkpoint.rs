//! Binary checkpoint format.
//!
//! Layout (little-endian): magic `DVCK`, `u32` version, `u32` header length
//! and that many bytes of UTF-8 `key=value` lines, `u32` tensor count, then
//! per tensor a `u32`-length-prefixed name, `u32` rank, `u32` dims and `f32`
//! values.

use std::io::{Read, Write};

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DVCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    /// Ordered `key=value` metadata; keys must not contain `=` or newlines.
    pub header: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| NnError::Format(format!("{what} too large: {v}")))
}

fn get_string(r: &mut impl Read, len: usize) -> Result<String> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| NnError::Format(e.to_string()))
}

impl Checkpoint {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut header = String::new();
        for (k, v) in &self.header {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(NnError::Format(format!("bad header entry {k:?}")));
            }
            header.push_str(k);
            header.push('=');
            header.push_str(v);
            header.push('\n');
        }
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        put_u32(w, to_u32(header.len(), "header")?)?;
        w.write_all(header.as_bytes())?;
        put_u32(w, to_u32(self.tensors.len(), "tensor count")?)?;
        for (name, t) in &self.tensors {
            put_u32(w, to_u32(name.len(), "name")?)?;
            w.write_all(name.as_bytes())?;
            put_u32(w, to_u32(t.shape().len(), "rank")?)?;
            for &d in t.shape() {
                put_u32(w, to_u32(d, "dim")?)?;
            }
            let mut bytes = Vec::with_capacity(t.len() * 4);
            for &v in t.data() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Format("not a checkpoint file".into()));
        }
        let version = get_u32(r)?;
        if version != VERSION {
            return Err(NnError::Format(format!("unsupported version {version}")));
        }
        let hlen = get_u32(r)? as usize;
        let text = get_string(r, hlen)?;
        let header = text
            .lines()
            .map(|line| {
                line.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| NnError::Format(format!("bad header line {line:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let count = get_u32(r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let nlen = get_u32(r)? as usize;
            let name = get_string(r, nlen)?;
            let rank = get_u32(r)? as usize;
            let shape = (0..rank)
                .map(|_| get_u32(r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let mut bytes = vec![0u8; len * 4];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            tensors.push((name, Tensor::new(shape, data)?));
        }
        Ok(Checkpoint { header, tensors })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"XXXX\x01\x00\x00\x00";
        assert!(matches!(
            Checkpoint::read_from(&mut &bytes[..]),
            Err(NnError::Format(_))
        ));
    }
}
