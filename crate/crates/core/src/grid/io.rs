//! Surface files and OBJ export.
//!
//! Two surface encodings are accepted on load:
//! - JSON `{"n_u": .., "n_v": .., "points": [x0, y0, z0, x1, ...]}`
//! - binary: 8-byte magic, `n_u` and `n_v` as little-endian u32, then
//!   `3 * n_u * n_v` little-endian f64 values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SphericalGrid, Surface};
use crate::error::{Result, ShapeError};

pub const SURFACE_MAGIC: &[u8; 8] = b"ESURF\0\0\x01";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceJson {
    n_u: usize,
    n_v: usize,
    points: Vec<f64>,
}

pub fn load_surface(path: impl AsRef<Path>) -> Result<Surface> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ShapeError::io(path, e))?;
    if bytes.starts_with(SURFACE_MAGIC) {
        decode_binary(path, &bytes)
    } else {
        decode_json(path, &bytes)
    }
}

fn decode_json(path: &Path, bytes: &[u8]) -> Result<Surface> {
    let doc: SurfaceJson = serde_json::from_slice(bytes).map_err(|e| {
        ShapeError::parse(
            path,
            format!("line {} column {}: {}", e.line(), e.column(), e),
        )
    })?;
    let grid = grid_for(path, doc.n_u, doc.n_v)?;
    if doc.points.len() != 3 * grid.len() {
        return Err(ShapeError::DimensionMismatch(format!(
            "field `points` has {} values, expected 3*{}*{} = {}",
            doc.points.len(),
            doc.n_u,
            doc.n_v,
            3 * grid.len()
        )));
    }
    Surface::from_flat(grid, &doc.points)
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<Surface> {
    if bytes.len() < 16 {
        return Err(ShapeError::parse(path, "binary header truncated"));
    }
    let n_u = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n_v = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let grid = grid_for(path, n_u, n_v)?;
    let payload = &bytes[16..];
    if payload.len() != 24 * grid.len() {
        return Err(ShapeError::DimensionMismatch(format!(
            "binary payload has {} bytes, expected {}",
            payload.len(),
            24 * grid.len()
        )));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Surface::from_flat(grid, &flat)
}

fn grid_for(path: &Path, n_u: usize, n_v: usize) -> Result<SphericalGrid> {
    SphericalGrid::new(n_u, n_v)
        .map_err(|e| ShapeError::parse(path, format!("fields `n_u`/`n_v`: {e}")))
}

/// Write a surface as JSON.
pub fn save_surface(f: &Surface, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = SurfaceJson {
        n_u: f.grid().n_u(),
        n_v: f.grid().n_v(),
        points: f.to_flat(),
    };
    let file = fs::File::create(path).map_err(|e| ShapeError::io(path, e))?;
    serde_json::to_writer(BufWriter::new(file), &doc).map_err(|e| ShapeError::io(path, e.into()))
}

pub fn save_surface_binary(f: &Surface, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(16 + 24 * f.grid().len());
    buf.extend_from_slice(SURFACE_MAGIC);
    buf.extend_from_slice(&(f.grid().n_u() as u32).to_le_bytes());
    buf.extend_from_slice(&(f.grid().n_v() as u32).to_le_bytes());
    for x in f.to_flat() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| ShapeError::io(path, e))
}

/// Triangle list used by [`export_obj`], as 0-based vertex indices.
///
/// Two triangles per grid quad (wrapping in `u`), plus a fan over each of
/// the first and last rows to close the poles. Triangles are wound so that
/// the standard sphere embedding gets outward-facing normals.
pub fn triangulate(grid: &SphericalGrid) -> Vec<[usize; 3]> {
    let (n_u, n_v) = (grid.n_u(), grid.n_v());
    let mut tris = Vec::with_capacity(2 * n_u * (n_v - 1) + 2 * (n_u - 2));
    for j in 0..n_v - 1 {
        for i in 0..n_u {
            let ip = (i + 1) % n_u;
            let a = grid.index(i, j);
            let b = grid.index(i, j + 1);
            let c = grid.index(ip, j + 1);
            let d = grid.index(ip, j);
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let last = n_v - 1;
    for k in 1..n_u - 1 {
        tris.push([grid.index(0, 0), grid.index(k, 0), grid.index(k + 1, 0)]);
        tris.push([
            grid.index(0, last),
            grid.index(k + 1, last),
            grid.index(k, last),
        ]);
    }
    tris
}

/// Write the surface as a Wavefront OBJ mesh with `n_u * n_v` vertices.
pub fn export_obj(f: &Surface, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| ShapeError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| ShapeError::io(path, e);
    writeln!(w, "# {}x{} spherical grid", f.grid().n_u(), f.grid().n_v()).map_err(io)?;
    for p in f.points() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z).map_err(io)?;
    }
    for t in triangulate(f.grid()) {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}
