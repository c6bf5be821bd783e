use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WGAP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Binary tensor container. Layout, all integers little-endian u32:
///
/// ```text
/// "WGAP" | version | tensor count |
///   per tensor: name length | name bytes (UTF-8) | rank | extents... |
///               elements as little-endian f64
/// ```
///
/// Serialization is byte-deterministic: equal inputs give equal files.
pub fn save_checkpoint<T: Scalar>(path: &Path, entries: &[(&str, &Tensor<T>)]) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&u32::try_from(entries.len()).expect("tensor count fits u32").to_le_bytes());
    for (name, tensor) in entries {
        if name.is_empty() {
            return Err(Error::Usage("checkpoint tensor name must be nonempty".into()));
        }
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&u32::try_from(name_bytes.len()).expect("name fits u32").to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.extend_from_slice(&u32::try_from(tensor.rank()).expect("rank fits u32").to_le_bytes());
        for &dim in tensor.shape() {
            buf.extend_from_slice(&u32::try_from(dim).expect("extent fits u32").to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.into_f64().to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Checkpoint(format!(
                "{}: truncated while reading {what}",
                self.path.display()
            )));
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Reads a file written by [`save_checkpoint`]. Element data is always
/// stored as f64 regardless of the in-memory scalar type.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor<f64>)>> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if cur.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic, not a checkpoint",
            path.display()
        )));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let count = cur.u32("tensor count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = cur.u32("name length")? as usize;
        let name_bytes = cur.take(name_len, "name")?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| {
                Error::Checkpoint(format!("{}: tensor name is not UTF-8", path.display()))
            })?
            .to_string();
        let rank = cur.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut len: usize = 1;
        for _ in 0..rank {
            let dim = cur.u32("extent")? as usize;
            len = len.checked_mul(dim).ok_or_else(|| {
                Error::Checkpoint(format!("{}: extent overflow in `{name}`", path.display()))
            })?;
            shape.push(dim);
        }
        let raw = cur.take(len * 8, "element data")?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        out.push((name, Tensor::from_vec(&shape, data).expect("length matches shape")));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{}: {} trailing bytes after last tensor",
            path.display(),
            bytes.len() - cur.pos
        )));
    }
    Ok(out)
}
