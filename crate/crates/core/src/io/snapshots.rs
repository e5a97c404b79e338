//! Binary snapshot container.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic      6 bytes   "RLYPB1"
//! dim        u8        1 or 2
//! per axis   f64 lo, f64 hi, u64 count
//! snapshots  u64
//! per snapshot:
//!   t        f64
//!   u        f64 x points   (x index fastest)
//!   h        i8  x points
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::IoError;
use crate::discretization::{Axis, Grid, SpaceTimeField};

pub const MAGIC: &[u8; 6] = b"RLYPB1";

fn corrupt(msg: impl Into<String>) -> IoError {
    IoError::CorruptFile(msg.into())
}

/// Serializes aligned `u` and `h` histories.
pub fn encode_snapshots(u: &SpaceTimeField, h: &SpaceTimeField) -> Result<Vec<u8>, IoError> {
    if u.grid() != h.grid() || u.times() != h.times() {
        return Err(IoError::Misaligned);
    }
    let grid = u.grid();
    let n = grid.len();
    let mut out = Vec::with_capacity(7 + 24 * grid.dim() + 8 + u.len() * (8 + 9 * n));
    out.extend_from_slice(MAGIC);
    out.push(grid.dim() as u8);
    for a in grid.axes() {
        out.extend_from_slice(&a.lo.to_le_bytes());
        out.extend_from_slice(&a.hi.to_le_bytes());
        out.extend_from_slice(&(a.count as u64).to_le_bytes());
    }
    out.extend_from_slice(&(u.len() as u64).to_le_bytes());
    for k in 0..u.len() {
        out.extend_from_slice(&u.times()[k].to_le_bytes());
        for v in u.row(k) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (p, &v) in h.row(k).iter().enumerate() {
            if v != v.round() || !(-1.0..=1.0).contains(&v) {
                return Err(IoError::Unrepresentable { snapshot: k, point: p, value: v });
            }
            out.push((v as i8) as u8);
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<(SpaceTimeField, SpaceTimeField), IoError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(6).map_err(|_| corrupt("missing magic"))? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let dim = c.take(1)?[0] as usize;
    if !(1..=2).contains(&dim) {
        return Err(corrupt(format!("dimension {dim}")));
    }
    let mut axes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let lo = c.f64()?;
        let hi = c.f64()?;
        let count = usize::try_from(c.u64()?).map_err(|_| corrupt("axis count overflow"))?;
        axes.push(Axis { lo, hi, count });
    }
    let grid = Arc::new(Grid::new(axes).map_err(|e| corrupt(format!("grid: {e}")))?);
    let snaps = c.u64()?;
    let n = grid.len();
    let per = 8 + 9 * n as u64;
    let expected = (c.pos as u64).checked_add(snaps.checked_mul(per).ok_or_else(|| corrupt("length overflow"))?);
    if expected != Some(bytes.len() as u64) {
        return Err(corrupt(format!(
            "length {} does not match {snaps} snapshots of {n} points",
            bytes.len()
        )));
    }
    let mut u = SpaceTimeField::new(grid.clone());
    let mut h = SpaceTimeField::new(grid);
    let mut urow = vec![0.0; n];
    let mut hrow = vec![0.0; n];
    for k in 0..snaps {
        let t = c.f64()?;
        if u.times().last().is_some_and(|&last| !(t > last)) || !t.is_finite() {
            return Err(corrupt(format!("snapshot {k} time {t} is not increasing")));
        }
        for v in urow.iter_mut() {
            *v = c.f64()?;
        }
        for v in hrow.iter_mut() {
            *v = f64::from(c.take(1)?[0] as i8);
        }
        u.push(t, &urow);
        h.push(t, &hrow);
    }
    Ok((u, h))
}

pub fn write_snapshots(u: &SpaceTimeField, h: &SpaceTimeField, path: &Path) -> Result<(), IoError> {
    let bytes = encode_snapshots(u, h)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<(SpaceTimeField, SpaceTimeField), IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshots(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (SpaceTimeField, SpaceTimeField) {
        let g = Arc::new(Grid::rectangle((0.0, 1.0, 4), (-1.0, 2.0, 3)).unwrap());
        let times = [0.0, 0.25, 1.0 / 3.0];
        let u = SpaceTimeField::from_fn(g.clone(), &times, |x, t| (x[0] * 7.1 + x[1]).sin() + t);
        let h = SpaceTimeField::from_fn(g, &times, |x, _| if x[0] > 0.4 { 1.0 } else { -1.0 });
        (u, h)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (u, h) = sample();
        let bytes = encode_snapshots(&u, &h).unwrap();
        let (u2, h2) = decode_snapshots(&bytes).unwrap();
        assert_eq!(u2.times(), u.times());
        assert!(u2.data().iter().zip(u.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(h2, h);
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let (u, h) = sample();
        let bytes = encode_snapshots(&u, &h).unwrap();
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(decode_snapshots(&bytes[..cut]), Err(IoError::CorruptFile(_))));
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshots(&bad), Err(IoError::CorruptFile(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_snapshots(&long), Err(IoError::CorruptFile(_))));
    }

    #[test]
    fn empty_history_is_header_only() {
        let g = Arc::new(Grid::line(0.0, 1.0, 5).unwrap());
        let u = SpaceTimeField::new(g.clone());
        let bytes = encode_snapshots(&u, &u).unwrap();
        assert_eq!(bytes.len(), 6 + 1 + 24 + 8);
        let (u2, h2) = decode_snapshots(&bytes).unwrap();
        assert!(u2.is_empty() && h2.is_empty());
    }
}
