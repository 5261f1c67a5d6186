//! Built-in initial profiles and file input.

use std::path::Path;

use crate::error::{DsError, Result};
use crate::field_io;
use crate::spectral::{Field, Grid};

/// `e^{-(x^2 + y^2)}`.
pub fn gaussian(grid: &Grid) -> Field {
    Field::from_real_fn(*grid, |x, y| (-(x * x + y * y)).exp())
}

/// `e^{-(x^2 + x y + 2 y^2)}`.
pub fn asymmetric_gaussian(grid: &Grid) -> Field {
    Field::from_real_fn(*grid, |x, y| (-(x * x + x * y + 2.0 * y * y)).exp())
}

/// Loads a field file and checks that it lives on `grid`.
pub fn from_file(path: impl AsRef<Path>, grid: &Grid) -> Result<Field> {
    let (field, _) = field_io::load(path)?;
    let g = field.grid();
    if g.nx() != grid.nx() || g.ny() != grid.ny() {
        return Err(DsError::InvalidGrid(format!(
            "file holds a {}x{} field, expected {}x{}",
            g.nx(),
            g.ny(),
            grid.nx(),
            grid.ny()
        )));
    }
    if g.lx() != grid.lx() || g.ly() != grid.ly() {
        return Err(DsError::InvalidGrid(format!(
            "file box ({}, {}) differs from ({}, {})",
            g.lx(),
            g.ly(),
            grid.lx(),
            grid.ly()
        )));
    }
    Ok(field)
}
