//! Flat binary storage for grid functions.
//!
//! Layout: eight little-endian `f64` header words
//! `[n, nx, nt, center_0, center_1, half_width, t_top, depth]` (`center_1 = 0`
//! when `n = 1`), followed by `(nt+1)·nx^n` little-endian `f64` values in
//! `(time, space…)` order with the last spatial axis fastest. A JSON sidecar
//! with the same stem and extension `.json` describes the file.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridError, GridFunction, SpaceTimeGrid};

pub const HEADER_WORDS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub n: usize,
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub dt: f64,
    pub center: Vec<f64>,
    pub half_width: f64,
    pub t_top: f64,
    pub depth: f64,
    pub order: String,
    pub label: String,
}

fn io_err(e: impl std::fmt::Display) -> GridError {
    GridError::Io(e.to_string())
}

pub fn encode(u: &GridFunction) -> Vec<u8> {
    let g = u.grid();
    let header = [
        g.n() as f64,
        g.nx() as f64,
        g.nt() as f64,
        g.center()[0],
        if g.n() == 2 { g.center()[1] } else { 0.0 },
        g.half_width(),
        g.t_hi(),
        g.t_hi() - g.t_lo(),
    ];
    let mut out = Vec::with_capacity(8 * (HEADER_WORDS + u.values().len()));
    for v in header.iter().chain(u.values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<GridFunction, GridError> {
    if bytes.len() % 8 != 0 || bytes.len() < 8 * HEADER_WORDS {
        return Err(GridError::Io(format!("truncated grid file ({} bytes)", bytes.len())));
    }
    let words: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let h = &words[..HEADER_WORDS];
    let as_count = |v: f64| -> Result<usize, GridError> {
        if v >= 0.0 && v.fract() == 0.0 && v < 1e12 {
            Ok(v as usize)
        } else {
            Err(GridError::Io(format!("bad header count {v}")))
        }
    };
    let n = as_count(h[0])?;
    let (nx, nt) = (as_count(h[1])?, as_count(h[2])?);
    let center = if n == 2 { vec![h[3], h[4]] } else { vec![h[3]] };
    let grid = SpaceTimeGrid::new(n, &center, h[5], h[6] - h[7], h[6], nx, nt)?;
    GridFunction::new(grid, words[HEADER_WORDS..].to_vec())
}

pub fn sidecar(u: &GridFunction, label: &str) -> Sidecar {
    let g = u.grid();
    Sidecar {
        format: "pucci-lab grid f64le v1".into(),
        n: g.n(),
        nx: g.nx(),
        nt: g.nt(),
        h: g.h(),
        dt: g.dt(),
        center: g.center().to_vec(),
        half_width: g.half_width(),
        t_top: g.t_hi(),
        depth: g.t_hi() - g.t_lo(),
        order: "time-major, last spatial axis fastest".into(),
        label: label.into(),
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the binary file and its sidecar.
pub fn write(u: &GridFunction, path: &Path, label: &str) -> Result<(), GridError> {
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&encode(u)).map_err(io_err)?;
    let json = serde_json::to_string_pretty(&sidecar(u, label)).map_err(io_err)?;
    fs::write(sidecar_path(path), json + "\n").map_err(io_err)
}

pub fn read(path: &Path) -> Result<GridFunction, GridError> {
    let mut bytes = Vec::new();
    fs::File::open(path).map_err(io_err)?.read_to_end(&mut bytes).map_err(io_err)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bytes_and_files() {
        let g = SpaceTimeGrid::new(2, &[0.5, -1.0], 2.0, 0.25, 1.25, 5, 3).unwrap();
        let u = GridFunction::from_fn(g, |x, t| x[0] * x[1] - t).unwrap();
        let bytes = encode(&u);
        assert_eq!(bytes.len(), 8 * (8 + 4 * 25));
        assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), 2.0);
        assert_eq!(decode(&bytes).unwrap(), u);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        write(&u, &path, "u").unwrap();
        assert_eq!(read(&path).unwrap(), u);
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side.nx, 5);
        assert!(decode(&bytes[..60]).is_err());
    }
}
