//! Binary field snapshots: a 64-byte little-endian header
//! (`"CHQF"`, version u32, dim u32, n u32, L f64, payload kind u8, zero padding)
//! followed by row-major `f64` values, `(re, im)` pairs for complex payloads.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{FieldKind, GridSpec, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CHQF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

pub fn write_snapshot<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let g = field.grid();
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(g.dim as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(g.points as u32).to_le_bytes());
    header[16..24].copy_from_slice(&g.extent.to_le_bytes());
    header[24] = match field.kind() {
        FieldKind::Real => 0,
        FieldKind::Complex => 1,
    };
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(field.values().len() * 16);
    for z in field.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        if field.kind() == FieldKind::Complex {
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<ScalarField> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let dim = u32_at(8) as usize;
    let n = u32_at(12) as usize;
    let extent = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let grid = GridSpec::new(dim, extent, n).map_err(|e| Error::Snapshot(e.to_string()))?;
    let complex = match header[24] {
        0 => false,
        1 => true,
        k => return Err(Error::Snapshot(format!("unknown payload kind {k}"))),
    };
    let per = if complex { 16 } else { 8 };
    let mut bytes = vec![0u8; grid.len() * per];
    input.read_exact(&mut bytes)?;
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if complex {
        let v = (0..grid.len()).map(|i| Complex64::new(f(16 * i), f(16 * i + 8))).collect();
        ScalarField::from_complex(grid, v)
    } else {
        ScalarField::from_real(grid, (0..grid.len()).map(|i| f(8 * i)).collect())
    }
}

pub fn save(field: &ScalarField, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(field, std::io::BufWriter::new(file))
}

pub fn load(path: &std::path::Path) -> Result<ScalarField> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = GridSpec::new(2, 1.5, 8).unwrap();
        let f = ScalarField::from_fn_real(g, |x| x[0]);
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 64 + 64 * 8);
        assert_eq!(&buf[0..4], b"CHQF");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.5);
        assert_eq!(buf[24], 0);
        assert!(buf[25..64].iter().all(|&b| b == 0));
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = [0u8; 128];
        assert!(read_snapshot(&buf[..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn roundtrip(dim in 1usize..=3, a in -5.0f64..5.0, b in -5.0f64..5.0, complex in any::<bool>()) {
            let g = GridSpec::new(dim, 2.0, 8).unwrap();
            let f = if complex {
                ScalarField::from_fn_complex(g, |x| Complex64::new(a * x[0], b - x[0]))
            } else {
                ScalarField::from_fn_real(g, |x| a * x[0] + b)
            };
            let mut buf = Vec::new();
            write_snapshot(&f, &mut buf).unwrap();
            let back = read_snapshot(&buf[..]).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
