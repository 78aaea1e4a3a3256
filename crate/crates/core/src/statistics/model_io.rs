//! Shape model files: one line of JSON describing the layout, then a
//! little-endian f64 payload holding the singular values, the mean, and the
//! directions in column-major order.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{PcaBasis, ShapeModel};
use crate::error::{Result, ShapeError};
use crate::grid::SphericalGrid;

const FORMAT: &str = "elastic-shape-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    n_u: usize,
    n_v: usize,
    n_train: usize,
    n_directions: usize,
}

pub fn save_model(model: &ShapeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let basis = model.basis();
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        n_u: model.grid().n_u(),
        n_v: model.grid().n_v(),
        n_train: basis.n_train(),
        n_directions: basis.n_directions(),
    };
    let mut buf = serde_json::to_vec(&header).map_err(|e| ShapeError::io(path, e.into()))?;
    buf.push(b'\n');
    let values = basis
        .singulars()
        .iter()
        .chain(basis.mean().iter())
        .chain(basis.directions().iter());
    for x in values {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| ShapeError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ShapeModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ShapeError::io(path, e))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ShapeError::parse(path, "missing header line"))?;
    let header: Header = serde_json::from_slice(&bytes[..split])
        .map_err(|e| ShapeError::parse(path, format!("header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(ShapeError::parse(
            path,
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let grid = SphericalGrid::new(header.n_u, header.n_v)
        .map_err(|e| ShapeError::parse(path, format!("fields `n_u`/`n_v`: {e}")))?;
    let dim = 3 * grid.len();
    let k = header.n_directions;
    let payload = &bytes[split + 1..];
    let expected = 8 * (k + dim + dim * k);
    if payload.len() != expected {
        return Err(ShapeError::parse(
            path,
            format!("payload has {} bytes, expected {expected}", payload.len()),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let singulars = values[..k].to_vec();
    let mean = DVector::from_column_slice(&values[k..k + dim]);
    let directions = DMatrix::from_column_slice(dim, k, &values[k + dim..]);
    let basis = PcaBasis::from_parts(mean, directions, singulars, header.n_train)?;
    ShapeModel::from_basis(grid, basis)
}
