//! Binary snapshots of a real field.
//!
//! Layout, all little-endian: the magic `GKPS`, a `u32` format version,
//! `u64` nx and ny, `f64` scale_x, scale_y, t and L, `u32` p and q, `i32`
//! lambda, then `nx·ny` `f64` values of `u` in row-major order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use gkp_core::{Exponent, Grid2D, Lambda, RealField};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"GKPS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8 * 4 + 4 + 4 + 4;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot (bad magic)")]
    Magic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("truncated snapshot: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid snapshot header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub u: RealField,
    pub t: f64,
    /// Rescaling factor; 1 for direct runs.
    pub l: f64,
    pub exponent: Exponent,
    pub lambda: Lambda,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = self.u.grid();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.real_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(g.nx() as u64).to_le_bytes());
        out.extend_from_slice(&(g.ny() as u64).to_le_bytes());
        for v in [g.scale_x(), g.scale_y(), self.t, self.l] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.exponent.num().to_le_bytes());
        out.extend_from_slice(&self.exponent.den().to_le_bytes());
        out.extend_from_slice(&(self.lambda.sign() as i32).to_le_bytes());
        for v in self.u.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(SnapshotError::Magic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(SnapshotError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let mut r = Cursor { bytes, at: 4 };
        let version = u32::from_le_bytes(r.take());
        if version != VERSION {
            return Err(SnapshotError::Version(version));
        }
        let nx = u64::from_le_bytes(r.take()) as usize;
        let ny = u64::from_le_bytes(r.take()) as usize;
        let [scale_x, scale_y, t, l] = [(); 4].map(|_| f64::from_le_bytes(r.take()));
        let p = u32::from_le_bytes(r.take());
        let q = u32::from_le_bytes(r.take());
        let sign = i32::from_le_bytes(r.take());

        let header = |e: gkp_core::Error| SnapshotError::Header(e.to_string());
        let grid = Grid2D::new(nx, ny, scale_x, scale_y).map_err(header)?;
        let exponent = Exponent::new(p, q).map_err(header)?;
        let lambda = Lambda::from_sign(sign).map_err(header)?;
        let expected = HEADER_LEN + 8 * nx * ny;
        if bytes.len() != expected {
            return Err(SnapshotError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            u: RealField::new(grid, values).map_err(header)?,
            t,
            l,
            exponent,
            lambda,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), SnapshotError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, SnapshotError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.at..self.at + N].try_into().expect("length checked");
        self.at += N;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        let g = Grid2D::new(8, 8, 5.0, 2.5).unwrap();
        Snapshot {
            u: RealField::from_fn(g, |x, y| (x * 0.3).sin() * (-(y * y)).exp() + 1e-300),
            t: 0.012_345_678_9,
            l: 0.75,
            exponent: Exponent::new(4, 3).unwrap(),
            lambda: Lambda::KpII,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let s = sample();
        let back = Snapshot::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back.t.to_bits(), s.t.to_bits());
        assert_eq!(back.l.to_bits(), s.l.to_bits());
        assert_eq!(back.exponent, s.exponent);
        assert_eq!(back.lambda, s.lambda);
        assert_eq!(back.u.grid(), s.u.grid());
        assert!(back.u.values().iter().zip(s.u.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 64);
        assert_eq!(&bytes[..4], b"GKPS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 5.0);
        assert_eq!(i32::from_le_bytes(bytes[HEADER_LEN - 4..HEADER_LEN].try_into().unwrap()), 1);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(&bytes), Err(SnapshotError::Magic)));
    }

    #[test]
    fn wrong_version_and_truncation_are_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        assert!(matches!(Snapshot::from_bytes(&bytes), Err(SnapshotError::Version(9))));
        let bytes = sample().to_bytes();
        assert!(matches!(
            Snapshot::from_bytes(&bytes[..bytes.len() - 8]),
            Err(SnapshotError::Truncated { .. })
        ));
        assert!(matches!(Snapshot::from_bytes(&bytes[..20]), Err(SnapshotError::Truncated { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.gkps");
        let s = sample();
        s.write(&path).unwrap();
        assert_eq!(Snapshot::read(&path).unwrap(), s);
    }
}
