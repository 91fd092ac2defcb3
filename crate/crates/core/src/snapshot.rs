//! Binary state snapshots.
//!
//! Layout: the line `FPSNAP1`, one line of JSON header, then the state
//! arrays as little-endian `f64` in a fixed order (fluid `u, v, w, top_u,
//! top_v, p`, fluid boundary `x, y, z`, plate `w, u1, u2, wt, u1t, u2t`),
//! each in row-major order with shapes implied by the geometry.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{ArrayViewMut, Dimension};
use serde::{Deserialize, Serialize};

use crate::coupling::CoupledState;
use crate::error::{Error, Result};
use crate::grid::{build_grids, BoxGeometry};
use crate::plate::PlateField;
use crate::stokes::FluidField;

const MAGIC: &str = "FPSNAP1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub geometry: BoxGeometry,
    pub time: f64,
    /// Hash of the model parameters that produced the state, if known.
    pub params_hash: Option<String>,
    pub values: usize,
}

fn arrays_mut(s: &mut CoupledState) -> Vec<ArrayViewMut<'_, f64, ndarray::IxDyn>> {
    let f = &mut s.fluid;
    let p = &mut s.plate;
    let mut out = Vec::new();
    fn push<'a, D: Dimension>(out: &mut Vec<ArrayViewMut<'a, f64, ndarray::IxDyn>>, a: &'a mut ndarray::Array<f64, D>) {
        out.push(a.view_mut().into_dyn());
    }
    push(&mut out, &mut f.v.u);
    push(&mut out, &mut f.v.v);
    push(&mut out, &mut f.v.w);
    push(&mut out, &mut f.v.top_u);
    push(&mut out, &mut f.v.top_v);
    push(&mut out, &mut f.p);
    push(&mut out, &mut f.boundary.x);
    push(&mut out, &mut f.boundary.y);
    push(&mut out, &mut f.boundary.z);
    for a in [&mut p.w, &mut p.u1, &mut p.u2, &mut p.wt, &mut p.u1t, &mut p.u2t] {
        push(&mut out, a);
    }
    out
}

fn blank(geometry: BoxGeometry, time: f64) -> Result<CoupledState> {
    let (fg, pg) = build_grids(geometry)?;
    Ok(CoupledState {
        fluid: FluidField::zeros(&fg, &pg),
        plate: PlateField::zeros(&pg),
        time,
    })
}

pub fn write_snapshot(w: &mut impl Write, geometry: BoxGeometry, params_hash: Option<&str>, state: &CoupledState) -> Result<()> {
    let mut s = state.clone();
    let mut e = blank(geometry, 0.0)?;
    let shapes: Vec<Vec<usize>> = arrays_mut(&mut e).iter().map(|a| a.shape().to_vec()).collect();
    let arrays = arrays_mut(&mut s);
    for (a, shape) in arrays.iter().zip(&shapes) {
        if a.shape() != shape.as_slice() {
            return Err(Error::GridMismatch(format!("state array of shape {:?}, geometry implies {shape:?}", a.shape())));
        }
    }
    let header = SnapshotHeader {
        geometry,
        time: state.time,
        params_hash: params_hash.map(str::to_owned),
        values: arrays.iter().map(|a| a.len()).sum(),
    };
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for a in &arrays {
        for v in a.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot(r: impl Read) -> Result<(SnapshotHeader, CoupledState)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {:?}", line.trim_end())));
    }
    line.clear();
    r.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(&line)?;
    let mut state = blank(header.geometry, header.time)?;
    let mut arrays = arrays_mut(&mut state);
    let total: usize = arrays.iter().map(|a| a.len()).sum();
    if total != header.values {
        return Err(Error::Snapshot(format!("header declares {} values, geometry implies {total}", header.values)));
    }
    let mut buf = [0u8; 8];
    for a in arrays.iter_mut() {
        for v in a.iter_mut() {
            r.read_exact(&mut buf).map_err(|e| Error::Snapshot(format!("truncated payload: {e}")))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Snapshot("trailing bytes after payload".into()));
    }
    Ok((header, state))
}

pub fn save(path: &Path, geometry: BoxGeometry, params_hash: Option<&str>, state: &CoupledState) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(&mut f, geometry, params_hash, state)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(SnapshotHeader, CoupledState)> {
    read_snapshot(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let g = BoxGeometry::new(1.0, 0.5, 0.7, 5, 4, 4).unwrap();
        let mut s = blank(g, 0.25).unwrap();
        for (k, a) in arrays_mut(&mut s).iter_mut().enumerate() {
            for (n, v) in a.iter_mut().enumerate() {
                *v = (k as f64 + 1.0) * 0.1 + n as f64 * 1e-3;
            }
        }
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, g, Some("abc"), &s).unwrap();
        let (h, back) = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(h.time, 0.25);
        assert_eq!(h.params_hash.as_deref(), Some("abc"));
        let mut s2 = s.clone();
        let mut b2 = back.clone();
        for (a, b) in arrays_mut(&mut s2).iter().zip(arrays_mut(&mut b2).iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let g = BoxGeometry::new(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, g, None, &blank(g, 0.0).unwrap()).unwrap();
        assert!(read_snapshot(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_snapshot(extra.as_slice()).is_err());
        assert!(read_snapshot(&b"NOPE\n{}\n"[..]).is_err());
        let other = BoxGeometry::new(1.0, 1.0, 1.0, 5, 4, 4).unwrap();
        assert!(write_snapshot(&mut Vec::new(), other, None, &blank(g, 0.0).unwrap()).is_err());
    }
}
