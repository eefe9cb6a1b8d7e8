//! CTT1 raw tensor files: `CTT1`, u32 rank, rank × u32 extents, f32 payload.
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{Tensor, MAX_RANK};
use crate::error::{Error, Result};

pub const CTT_MAGIC: &[u8; 4] = b"CTT1";

pub fn encode_ctt(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(CTT_MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(offset as u64, format!("truncated while reading {what}")))
}

pub fn decode_ctt(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 4 || &bytes[..4] != CTT_MAGIC {
        return Err(Error::format(0, "missing CTT1 magic"));
    }
    let rank = read_u32(bytes, 4, "rank")? as usize;
    if rank == 0 || rank > MAX_RANK {
        return Err(Error::format(4, format!("unsupported rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for i in 0..rank {
        let offset = 8 + 4 * i;
        let e = read_u32(bytes, offset, "extent")? as usize;
        if e == 0 {
            return Err(Error::format(offset as u64, "zero extent"));
        }
        shape.push(e);
    }
    let start = 8 + 4 * rank;
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::format(8, "element count overflows"))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(start))
        .ok_or_else(|| Error::format(8, "element count overflows"))?;
    if bytes.len() != expected {
        let offset = bytes.len().min(expected) as u64;
        return Err(Error::format(
            offset,
            format!("payload is {} bytes, expected {expected}", bytes.len()),
        ));
    }
    let data = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(&shape, data)
}

pub fn write_ctt(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ctt(t)).map_err(|e| Error::io(path, e))
}

pub fn read_ctt(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ctt(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let t = Tensor::new(&[1, 2], vec![1.0f32, -2.5]).unwrap();
        let bytes = encode_ctt(&t);
        let mut expected = b"CTT1".to_vec();
        expected.extend([2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-2.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(decode_ctt(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_corruption() {
        let t = Tensor::new(&[2, 2], vec![0.0f32; 4]).unwrap();
        let bytes = encode_ctt(&t);
        assert!(matches!(decode_ctt(b"NOPE"), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(
            decode_ctt(&bytes[..bytes.len() - 1]),
            Err(Error::Format { offset: 31, .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_ctt(&extra).is_err());
        let mut bad_rank = bytes;
        bad_rank[4] = 9;
        assert!(matches!(decode_ctt(&bad_rank), Err(Error::Format { offset: 4, .. })));
    }
}
