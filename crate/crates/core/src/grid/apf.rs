//! `.apf` grid dumps: one compact JSON header line, then raw little-endian `f64`s.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Boundary, DiscreteField, Grid, Location};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApfHeader {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "boxSide")]
    pub box_side: f64,
    pub components: usize,
    pub boundary: Boundary,
    #[serde(default = "node")]
    pub location: Location,
    #[serde(default)]
    pub origin: f64,
}

fn node() -> Location {
    Location::Node
}

pub fn write_apf<T: Real>(path: impl AsRef<Path>, u: &DiscreteField<T>) -> Result<()> {
    let g = u.grid();
    let header = ApfHeader {
        dim: g.dim(),
        n: g.n(),
        box_side: g.side().as_f64(),
        components: u.components(),
        boundary: g.boundary(),
        location: u.location(),
        origin: g.origin().as_f64(),
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut f, &header)?;
    f.write_all(b"\n")?;
    for v in u.data() {
        f.write_all(&v.as_f64().to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_apf<T: Real>(path: impl AsRef<Path>) -> Result<DiscreteField<T>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: ApfHeader = serde_json::from_slice(&line)?;
    let grid =
        Grid::with_origin(header.dim, header.n, T::lit(header.box_side), T::lit(header.origin), header.boundary)?;
    let count = header.components * grid.num_nodes();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(Error::InvalidGrid(format!("payload has {} bytes, header implies {}", bytes.len(), 8 * count)));
    }
    let data = bytes.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes")))).collect();
    DiscreteField::from_data(&grid, header.components, header.location, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apf_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.apf");
        let g = Grid::<f64>::periodic(2, 8, 3.0).unwrap();
        let u = DiscreteField::from_fn(&g, |x| x[0] * 2.0 - x[1]);
        write_apf(&p, &u).unwrap();
        let v: DiscreteField<f64> = read_apf(&p).unwrap();
        assert_eq!(u, v);
        let bytes = std::fs::read(&p).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - nl - 1, 8 * 64);
    }

    #[test]
    fn apf_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.apf");
        let g = Grid::<f64>::periodic(1, 8, 1.0).unwrap();
        write_apf(&p, &DiscreteField::from_fn(&g, |x| x[0])).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&p, bytes).unwrap();
        assert!(read_apf::<f64>(&p).is_err());
    }
}
