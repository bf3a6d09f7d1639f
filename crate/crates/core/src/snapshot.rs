//! Binary field snapshots and CSV slices.
//!
//! Layout (all little-endian): 8-byte magic `NLSFIELD`, then u32 version,
//! u32 dimension, u32 points per axis, u32 space (0 physical, 1 frequency),
//! f64 half-width, u64 master seed, u64 trial, u32 ensemble tag, u32
//! reserved, followed by interleaved `re, im` f64 pairs in row-major lattice
//! order.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Space};

pub const MAGIC: &[u8; 8] = b"NLSFIELD";
pub const VERSION: u32 = 1;

/// Seed provenance carried in the snapshot header. `ensemble` is 0 for
/// deterministic data and the ensemble tag for randomized states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub trial: u64,
    pub ensemble: u32,
}

pub fn write_snapshot<W: Write>(mut w: W, field: &Field, prov: &Provenance) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(grid.dim() as u32)?;
    w.write_u32::<LittleEndian>(grid.n() as u32)?;
    w.write_u32::<LittleEndian>(match field.space() {
        Space::Physical => 0,
        Space::Frequency => 1,
    })?;
    w.write_f64::<LittleEndian>(grid.half_width())?;
    w.write_u64::<LittleEndian>(prov.master_seed)?;
    w.write_u64::<LittleEndian>(prov.trial)?;
    w.write_u32::<LittleEndian>(prov.ensemble)?;
    w.write_u32::<LittleEndian>(0)?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(Field, Provenance)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let space = match r.read_u32::<LittleEndian>()? {
        0 => Space::Physical,
        1 => Space::Frequency,
        other => return Err(Error::Format(format!("unknown space flag {other}"))),
    };
    let half_width = r.read_f64::<LittleEndian>()?;
    let master_seed = r.read_u64::<LittleEndian>()?;
    let trial = r.read_u64::<LittleEndian>()?;
    let ensemble = r.read_u32::<LittleEndian>()?;
    let _reserved = r.read_u32::<LittleEndian>()?;
    let grid = Grid::new(dim, n, half_width)?;
    let mut raw = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Format(format!("truncated sample block: {e}")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let field = Field::new(grid, space, values)?;
    Ok((
        field,
        Provenance {
            master_seed,
            trial,
            ensemble,
        },
    ))
}

pub fn save_snapshot(path: &std::path::Path, field: &Field, prov: &Provenance) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_snapshot(&mut w, field, prov)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &std::path::Path) -> Result<(Field, Provenance)> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}

/// CSV `x,re,im,abs` along the first axis through the center node of the
/// remaining axes.
pub fn write_csv_slice<W: Write>(mut w: W, field: &Field) -> Result<()> {
    let grid = field.grid();
    let n = grid.n();
    let stride = n.pow(grid.dim() as u32 - 1);
    let offset: usize = (1..grid.dim()).map(|a| (n / 2) * n.pow((grid.dim() - 1 - a) as u32)).sum();
    writeln!(w, "x,re,im,abs")?;
    for j in 0..n {
        let v = field.values()[j * stride + offset];
        writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e}", grid.node(j), v.re, v.im, v.norm())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{sample_profile, Profile};

    #[test]
    fn round_trip_preserves_bits() {
        let grid = Grid::new(2, 16, 3.0).unwrap();
        let f = sample_profile(
            &grid,
            &Profile::ModulatedGaussian {
                center: [0.0; 3],
                width: 0.8,
                amplitude: 1.0,
                momentum: [2.0, -1.0, 0.0],
            },
        )
        .unwrap();
        let prov = Provenance {
            master_seed: 42,
            trial: 7,
            ensemble: 2,
        };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, &prov).unwrap();
        assert_eq!(buf.len(), 56 + 16 * 256);
        let (g, p) = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(g, f);
        assert_eq!(p, prov);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_snapshot(&b"NOTFIELD"[..]), Err(Error::Format(_))));
        let grid = Grid::new(1, 8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &Field::zeros(grid, Space::Physical), &Provenance::default()).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_snapshot(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_slice_through_center() {
        let grid = Grid::new(2, 8, 6.0).unwrap();
        let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        let mut out = Vec::new();
        write_csv_slice(&mut out, &f).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        let center: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(center[0], 0.0);
        assert!((center[3] - 1.0).abs() < 1e-12);
    }
}
