//! `NLSF` binary snapshots.
//!
//! Little-endian layout: magic `NLSF`, `u32` format version, `u32` mode tag,
//! `u32` dimension, one `u32` size per axis, one `f64` extent per axis, the
//! `f64` time stamp, then `(re, im)` `f64` pairs in row-major order. Radial
//! snapshots hold the stored unknown `v = r·u` on the staggered nodes.

use std::fs;
use std::path::Path;

use nlsdecay_core::{make_geometry, Complex64, Field, Mode};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"NLSF";
pub const VERSION: u32 = 1;

pub fn encode(field: &Field) -> Vec<u8> {
    let g = field.geometry();
    let dim = g.dimension();
    let mut out = Vec::with_capacity(16 + dim * 12 + 8 + field.values().len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&g.mode().tag().to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for &n in g.sizes() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for &l in g.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&field.time().to_le_bytes());
    for z in field.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> std::result::Result<[u8; N], String> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| format!("truncated while reading {what} at byte {}", self.pos))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, String> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }

    fn f64(&mut self, what: &str) -> std::result::Result<f64, String> {
        self.take::<8>(what).map(f64::from_le_bytes)
    }
}

/// Parses a snapshot; `origin` only labels error messages.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<Field> {
    decode_inner(bytes).map_err(|m| CliError::format(origin, m))
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<Field, String> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>("magic")? != MAGIC {
        return Err("not an NLSF snapshot (bad magic)".into());
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(format!("unsupported snapshot version {version}"));
    }
    let tag = r.u32("mode tag")?;
    let mode = Mode::from_tag(tag).ok_or_else(|| format!("unknown mode tag {tag}"))?;
    let dim = r.u32("dimension")? as usize;
    if !(1..=3).contains(&dim) {
        return Err(format!("dimension {dim} out of range"));
    }
    let sizes = (0..dim)
        .map(|_| r.u32("size").map(|n| n as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let lengths = (0..dim)
        .map(|_| r.f64("extent"))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let time = r.f64("time")?;
    let geometry = make_geometry(dim, &sizes, &lengths, mode).map_err(|e| e.to_string())?;
    let expected = geometry.len() * 16;
    let rest = &bytes[r.pos..];
    if rest.len() != expected {
        return Err(format!(
            "sample block holds {} bytes, geometry needs {expected}",
            rest.len()
        ));
    }
    let values = rest
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Field::new(geometry, time, values).map_err(|e| e.to_string())
}

pub fn write(path: &Path, field: &Field) -> Result<()> {
    fs::write(path, encode(field)).map_err(CliError::io(path))
}

pub fn read(path: &Path) -> Result<Field> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = make_geometry(2, &[8, 16], &[1.0, 2.0], Mode::PeriodicCartesian).unwrap();
        let f = Field::zeros(g, 0.25);
        let bytes = encode(&f);
        assert_eq!(&bytes[..4], b"NLSF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 0.25);
        assert_eq!(bytes.len(), 48 + 128 * 16);
    }

    #[test]
    fn rejects_damaged_files() {
        let g = make_geometry(1, &[8], &[4.0], Mode::Radial3d).unwrap();
        let bytes = encode(&Field::zeros(g, 0.0));
        let p = Path::new("x.nlsf");
        assert!(decode(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad, p).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(decode(&bad, p).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long, p).is_err());
    }
}
