//! Field serialization.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! b"DPLF" | u32 version (=1) | u32 naxes
//! naxes x u64 dims | naxes x f64 spacing | naxes x u8 topology (0 free, 1 periodic)
//! prod(dims) x f64 values, row-major (last axis fastest)
//! ```
//!
//! CSV layout: one header line
//! `# dims=4x4 spacing=0.25x0.25 topology=free,free`
//! followed by rows of comma-separated values; each row holds one run of the
//! last axis, rows enumerate the remaining axes in row-major order.

use std::io::{BufRead, Read, Write};

use super::{Field, Grid, Topology};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DPLF";
const VERSION: u32 = 1;

pub fn write_binary<W: Write>(f: &Field, mut w: W) -> Result<()> {
    let g = f.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.ndim() as u32).to_le_bytes())?;
    for &d in g.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &h in g.spacing() {
        w.write_all(&h.to_le_bytes())?;
    }
    for &t in g.topology() {
        w.write_all(&[(t == Topology::Periodic) as u8])?;
    }
    for &v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    if n == 0 || n > 3 {
        return Err(Error::Format(format!("bad axis count {n}")));
    }
    let dims = (0..n)
        .map(|_| {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b) as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    let spacing = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let topology = (0..n)
        .map(|_| {
            let mut b = [0u8; 1];
            r.read_exact(&mut b)?;
            match b[0] {
                0 => Ok(Topology::Free),
                1 => Ok(Topology::Periodic),
                t => Err(Error::Format(format!("bad topology byte {t}"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(dims, spacing, topology)?;
    let values = (0..grid.len())
        .map(|_| read_f64(&mut r))
        .collect::<Result<Vec<_>>>()?;
    Field::new(grid, values)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn write_csv<W: Write>(f: &Field, mut w: W) -> Result<()> {
    let g = f.grid();
    let topo: Vec<&str> = g
        .topology()
        .iter()
        .map(|t| match t {
            Topology::Free => "free",
            Topology::Periodic => "periodic",
        })
        .collect();
    writeln!(
        w,
        "# dims={} spacing={} topology={}",
        join(g.dims(), "x"),
        join(g.spacing(), "x"),
        topo.join(",")
    )?;
    let row = *g.dims().last().unwrap();
    let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for chunk in f.values().chunks(row) {
        // `{}` on f64 prints the shortest string that round-trips
        cw.write_record(chunk.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    cw.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(mut r: R) -> Result<Field> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let header = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing '#' header line".into()))?;
    let (mut dims, mut spacing, mut topology) = (None, None, None);
    for kv in header.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header entry '{kv}'")))?;
        let bad = |_| Error::Format(format!("bad value in '{kv}'"));
        match k {
            "dims" => {
                dims = Some(
                    v.split('x')
                        .map(|s| s.parse::<usize>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "spacing" => {
                spacing = Some(
                    v.split('x')
                        .map(|s| s.parse::<f64>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "topology" => {
                topology = Some(
                    v.split(',')
                        .map(|s| match s {
                            "free" => Ok(Topology::Free),
                            "periodic" => Ok(Topology::Periodic),
                            _ => Err(bad(s.to_string())),
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            _ => return Err(Error::Format(format!("unknown header key '{k}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks '{k}'"));
    let grid = Grid::new(
        dims.ok_or_else(|| missing("dims"))?,
        spacing.ok_or_else(|| missing("spacing"))?,
        topology.ok_or_else(|| missing("topology"))?,
    )?;
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut values = Vec::with_capacity(grid.len());
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        for s in rec.iter() {
            values.push(
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{s}'")))?,
            );
        }
    }
    Field::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}
