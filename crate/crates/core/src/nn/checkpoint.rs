//! Versioned binary container for named f64 arrays plus string metadata.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "NASHCKPT"
//! version u32
//! n_meta  u32, then n_meta × (key: u32 len + utf8, value: u32 len + utf8)
//! n_arr   u32, then n_arr × (name: u32 len + utf8, dtype: u8 (1 = f64),
//!                            ndim: u32, dims: ndim × u64, data: f64 × prod(dims))
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::{OwnedTensor, TensorList};
use crate::error::{NashError, Result};

pub const MAGIC: &[u8; 8] = b"NASHCKPT";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub arrays: TensorList,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        w.write_all(&(self.arrays.entries.len() as u32).to_le_bytes())?;
        for t in &self.arrays.entries {
            write_str(w, &t.name)?;
            w.write_all(&[DTYPE_F64])?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &x in &t.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NashError::Mismatch(
                "not a checkpoint file (bad magic)".into(),
            ));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(NashError::Mismatch(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let n_meta = read_u32(r)?;
        let mut meta = Vec::with_capacity(n_meta as usize);
        for _ in 0..n_meta {
            let k = read_str(r)?;
            let v = read_str(r)?;
            meta.push((k, v));
        }
        let n_arr = read_u32(r)?;
        let mut arrays = TensorList::new();
        for _ in 0..n_arr {
            let name = read_str(r)?;
            let mut dtype = [0u8; 1];
            r.read_exact(&mut dtype)?;
            if dtype[0] != DTYPE_F64 {
                return Err(NashError::Mismatch(format!(
                    "array `{name}` has unsupported dtype tag {}",
                    dtype[0]
                )));
            }
            let ndim = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u64(r)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = vec![0.0; len];
            let mut buf = [0u8; 8];
            for x in &mut data {
                r.read_exact(&mut buf)?;
                *x = f64::from_le_bytes(buf);
            }
            arrays.entries.push(OwnedTensor { name, shape, data });
        }
        Ok(Checkpoint { meta, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Checkpoint::read_from(&mut r)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|e| NashError::Mismatch(format!("invalid utf-8 in checkpoint: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = Checkpoint {
            meta: vec![("bits".into(), "16".into()), ("note".into(), "a=b".into())],
            arrays: TensorList::new()
                .with(
                    "enc.0.weight",
                    vec![2, 3],
                    vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, 0.1, -7.25],
                )
                .with("dec.bias", vec![2], vec![0.5, 2.0]),
        };
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.meta, ckpt.meta);
        for (a, b) in back.arrays.entries.iter().zip(&ckpt.arrays.entries) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            let bits_a: Vec<u64> = a.data.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.data.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(back.meta_value("bits"), Some("16"));
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOTACKPT\x01\x00\x00\x00".to_vec();
        assert!(Checkpoint::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let ckpt = Checkpoint {
            meta: vec![],
            arrays: TensorList::new().with("x", vec![4], vec![1.0; 4]),
        };
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Checkpoint::read_from(&mut buf.as_slice()).is_err());
    }
}
