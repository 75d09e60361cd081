//! Field persistence: flat little-endian binary plus a JSON sidecar, and CSV
//! export of 1D/2D fields.
//!
//! Binary layout: `u64 dim`, `u64 resolution[dim]`, `f64 lower[dim]`,
//! `f64 upper[dim]`, then `f64 values` row-major with the last axis fastest.

use super::{BoxDomain, GridFunction};
use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    resolution: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: usize,
    extended_real: bool,
}

impl GridFunction {
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let d = self.domain();
        w.write_all(&(d.dim() as u64).to_le_bytes())?;
        for &r in d.resolution() {
            w.write_all(&(r as u64).to_le_bytes())?;
        }
        for &v in d.lower() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in d.upper() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in self.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<GridFunction> {
        let mut u = [0u8; 8];
        r.read_exact(&mut u)?;
        let dim = u64::from_le_bytes(u) as usize;
        if !(1..=3).contains(&dim) {
            return Err(Error::MalformedFieldFile(format!("dimension {dim}")));
        }
        let mut resolution = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut u)?;
            let res = u64::from_le_bytes(u) as usize;
            if res == 0 || res > (1 << 32) {
                return Err(Error::MalformedFieldFile(format!("resolution {res}")));
            }
            resolution.push(res);
        }
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                r.read_exact(&mut u)?;
                out.push(f64::from_le_bytes(u));
            }
            Ok(out)
        };
        let lower = read_f64s(dim)?;
        let upper = read_f64s(dim)?;
        let domain = BoxDomain::new(&lower, &upper, &resolution)
            .map_err(|e| Error::MalformedFieldFile(e.to_string()))?;
        let values = read_f64s(domain.n_cells())?;
        GridFunction::from_values_extended(domain, values)
            .map_err(|e| Error::MalformedFieldFile(e.to_string()))
    }

    /// Write `<base>.bin` and `<base>.json`.
    pub fn save(&self, base: &Path) -> Result<()> {
        let bin = base.with_extension("bin");
        let json = base.with_extension("json");
        let mut f = std::io::BufWriter::new(std::fs::File::create(bin)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        let d = self.domain();
        let sidecar = Sidecar {
            dim: d.dim(),
            resolution: d.resolution().to_vec(),
            lower: d.lower().to_vec(),
            upper: d.upper().to_vec(),
            cells: d.n_cells(),
            extended_real: self.is_extended_real(),
        };
        std::fs::write(json, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Read a field written by [`save`](Self::save) from `<base>.bin`.
    pub fn load(base: &Path) -> Result<GridFunction> {
        let f = std::io::BufReader::new(std::fs::File::open(base.with_extension("bin"))?);
        Self::read_binary(f)
    }

    /// CSV rows `x,value` (1D) or `x,y,value` (2D), row-major order.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let d = self.domain();
        match d.dim() {
            1 => {
                writeln!(w, "x,value")?;
                for i in 0..d.n_cells() {
                    writeln!(w, "{},{}", d.axis_center(0, i), self.value(i))?;
                }
            }
            2 => {
                writeln!(w, "x,y,value")?;
                for i in 0..d.n_cells() {
                    let c = d.center(i);
                    writeln!(w, "{},{},{}", c[0], c[1], self.value(i))?;
                }
            }
            other => {
                return Err(Error::UnsupportedDimension {
                    op: "csv export",
                    got: other,
                    supported: "1, 2",
                })
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TestFunctionSpec;

    #[test]
    fn binary_roundtrip_preserves_bits() {
        let d = BoxDomain::new(&[0.0, -1.0], &[2.0, 1.0], &[8, 6]).unwrap();
        let f = TestFunctionSpec::custom("sin(x)*exp(y)").sample(&d).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let g = GridFunction::read_binary(buf.as_slice()).unwrap();
        assert_eq!(f.domain(), g.domain());
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn save_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        let d = BoxDomain::line(0.0, 1.0, 32).unwrap();
        let f = TestFunctionSpec::linear_1d(0.5, 2.0).sample(&d).unwrap();
        f.save(&base).unwrap();
        assert!(base.with_extension("json").exists());
        let g = GridFunction::load(&base).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let d = BoxDomain::line(0.0, 1.0, 16).unwrap();
        let f = GridFunction::constant(d, 1.0).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(GridFunction::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let d = BoxDomain::square(0.0, 1.0, 4).unwrap();
        let f = GridFunction::constant(d, 1.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("x,y,value"));
    }
}
