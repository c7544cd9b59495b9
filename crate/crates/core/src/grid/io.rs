//! Binary and CSV serialization of sampled fields.
//!
//! Binary layout, all little-endian: `dims: u64`, then per axis
//! `lower: f64, upper: f64, points: u64`, then the node values as `f64` in
//! row-major order (last axis fastest).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ScalarField, UniformGrid, MAX_DIMS};
use crate::error::{Error, Result};
use crate::real::Real;

pub fn write_binary<T: Real, W: Write>(field: &ScalarField<T>, mut out: W) -> std::io::Result<()> {
    let grid = field.grid();
    out.write_all(&(grid.dims() as u64).to_le_bytes())?;
    for a in 0..grid.dims() {
        out.write_all(&grid.lower(a).to_f64_lossy().to_le_bytes())?;
        out.write_all(&grid.upper(a).to_f64_lossy().to_le_bytes())?;
        out.write_all(&(grid.points(a) as u64).to_le_bytes())?;
    }
    for v in field.values() {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(input: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(input: &mut impl Read) -> std::io::Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

pub fn read_binary<T: Real, R: Read>(mut input: R) -> Result<ScalarField<T>> {
    let bad = |e: std::io::Error| Error::InvalidGrid(format!("truncated field data: {e}"));
    let dims = read_u64(&mut input).map_err(bad)? as usize;
    if dims == 0 || dims > MAX_DIMS {
        return Err(Error::InvalidGrid(format!("header declares {dims} axes")));
    }
    let (mut lower, mut upper, mut points) = (vec![], vec![], vec![]);
    for _ in 0..dims {
        lower.push(T::lit(read_f64(&mut input).map_err(bad)?));
        upper.push(T::lit(read_f64(&mut input).map_err(bad)?));
        points.push(read_u64(&mut input).map_err(bad)? as usize);
    }
    let grid = UniformGrid::new(lower, upper, points)?;
    let values = (0..grid.len())
        .map(|_| read_f64(&mut input).map(T::lit))
        .collect::<std::io::Result<Vec<T>>>()
        .map_err(bad)?;
    ScalarField::new(grid, values)
}

/// One line per node: the node coordinates followed by the value.
pub fn write_csv<T: Real, W: Write>(field: &ScalarField<T>, mut out: W) -> std::io::Result<()> {
    let grid = field.grid();
    let dims = grid.dims();
    let header: Vec<String> = (0..dims).map(|a| format!("x{a}")).chain(["value".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    let mut idx = [0usize; MAX_DIMS];
    for (k, v) in field.values().iter().enumerate() {
        grid.multi_index(k, &mut idx[..dims]);
        for a in 0..dims {
            write!(out, "{},", grid.coordinate(a, idx[a]).to_f64_lossy())?;
        }
        writeln!(out, "{}", v.to_f64_lossy())?;
    }
    Ok(())
}

pub fn save_binary<T: Real>(field: &ScalarField<T>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_binary(field, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_binary<T: Real>(path: &Path) -> Result<ScalarField<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_binary(BufReader::new(file))
}

pub fn save_csv<T: Real>(field: &ScalarField<T>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(field, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a two-column `x,value` table (header line and `#` comments allowed),
/// sorted by `x`.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::InvalidParameter(format!(
                "{}:{}: expected two comma-separated columns",
                path.display(),
                n + 1
            )));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(v)) => rows.push((x, v)),
            _ if rows.is_empty() => continue, // header
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{}:{}: cannot parse numbers",
                    path.display(),
                    n + 1
                )))
            }
        }
    }
    if rows.len() < 2 || rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidParameter(format!(
            "{}: need at least two rows with strictly increasing x",
            path.display()
        )));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = UniformGrid::<f64>::new(vec![-1.0, 0.0], vec![1.0, 3.0], vec![9, 11]).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] * x[1] + 0.1);
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 2 * 24 + 99 * 8);
        let back: ScalarField<f64> = read_binary(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert!(read_binary::<f64, _>(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn csv_lists_coordinates_then_value() {
        let g = UniformGrid::<f64>::line(0.0, 7.0, 8).unwrap();
        let f = ScalarField::from_fn(g, |x| 2.0 * x[0]);
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,value");
        assert_eq!(lines[2], "1,2");
        assert_eq!(lines.len(), 9);
    }
}
