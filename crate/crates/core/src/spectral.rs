//! Periodic grid, fields and the continuum-normalized 2D Fourier transform.
//!
//! The transform pair is
//!
//! ```text
//! F f(xi)    = 1/(2 pi) \int f(x, y) exp(-i (xi1 x + xi2 y)) dx dy
//! F^-1 g(z)  = 1/(2 pi) \int g(xi) exp( i (xi1 x + xi2 y)) dxi1 dxi2
//! ```
//!
//! approximated on the box `x in lx [-pi, pi)`, `y in ly [-pi, pi)`. All
//! convention factors (cell area, `1/(2 pi)` and the `(-1)^(k+m)` phase from the
//! box offset) live inside [`Spectral::forward_in_place`] and
//! [`Spectral::inverse_in_place`], so symbols can be written exactly as in the
//! continuum formulas. Fourier data is kept in FFT-native order (mode 0 first).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{DsError, Result};

const MIN_MODES: usize = 8;

/// Uniform periodic grid together with its dual Fourier lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < MIN_MODES || !n.is_power_of_two() {
                return Err(DsError::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= {MIN_MODES}"
                )));
            }
        }
        for (name, l) in [("lx", lx), ("ly", ly)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(DsError::InvalidGrid(format!(
                    "{name} = {l} must be positive"
                )));
            }
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square grid with `n` modes and scale `l` in both directions.
    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    /// Number of nodes (equivalently, Fourier modes).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI * self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * PI * self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Spacing of the Fourier lattice, `dxi1 * dxi2`.
    pub fn mode_area(&self) -> f64 {
        1.0 / (self.lx * self.ly)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.lx * (-PI + 2.0 * PI * i as f64 / self.nx as f64)
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.ly * (-PI + 2.0 * PI * j as f64 / self.ny as f64)
    }

    /// Node position as the complex number `x + i y`.
    #[inline]
    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x(i), self.y(j))
    }

    /// Node `(i, j)` sitting at the origin.
    pub fn origin_node(&self) -> (usize, usize) {
        (self.nx / 2, self.ny / 2)
    }

    /// Signed integer wavenumber stored at FFT index `i` of an axis with `n` modes.
    #[inline]
    pub fn signed_mode(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    pub fn xi1(&self, i: usize) -> f64 {
        Self::signed_mode(i, self.nx) as f64 / self.lx
    }

    #[inline]
    pub fn xi2(&self, j: usize) -> f64 {
        Self::signed_mode(j, self.ny) as f64 / self.ly
    }

    /// Complex wavenumber `xi1 + i xi2` of the mode stored at `(i, j)`.
    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.xi1(i), self.xi2(j))
    }

    /// Storage index of the signed mode `(kx, ky)`, if it is on the lattice.
    pub fn mode_index(&self, kx: i64, ky: i64) -> Option<usize> {
        let wrap = |k: i64, n: usize| {
            let half = (n / 2) as i64;
            (-half..half)
                .contains(&k)
                .then(|| k.rem_euclid(n as i64) as usize)
        };
        Some(self.index(wrap(kx, self.nx)?, wrap(ky, self.ny)?))
    }

    /// Reorders FFT-native data so the most negative modes come first
    /// (the usual `fftshift`), for inspection and plotting.
    pub fn shift_view<T: Copy>(&self, data: &[T]) -> Vec<T> {
        let (hx, hy) = (self.nx / 2, self.ny / 2);
        let mut out = Vec::with_capacity(data.len());
        for a in 0..self.nx {
            let i = (a + hx) % self.nx;
            for b in 0..self.ny {
                out.push(data[self.index(i, (b + hy) % self.ny)]);
            }
        }
        out
    }

    /// Applies `f(i, j)` over every node or mode in storage order.
    pub fn map_indices<T>(&self, mut f: impl FnMut(usize, usize) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.push(f(i, j));
            }
        }
        out
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} (lx = {}, ly = {})",
            self.nx, self.ny, self.lx, self.ly
        )
    }
}

/// Which side of the transform a [`Field`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Physical,
    Fourier,
}

/// Complex values on a grid, row-major with `x` as the leading index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    space: Space,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid, space: Space) -> Self {
        Self {
            grid,
            space,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: Grid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(DsError::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            space,
            values,
        })
    }

    /// Samples `f(x, y)` on the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = grid.map_indices(|i, j| f(grid.x(i), grid.y(j)));
        Self {
            grid,
            space: Space::Physical,
            values,
        }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, y| Complex64::new(f(x, y), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        if self.space != expected {
            return Err(DsError::WrongSpace {
                expected,
                found: self.space,
            });
        }
        Ok(())
    }
}

/// Number of 2D transforms executed by a [`Spectral`] engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransformCounts {
    pub forward: u64,
    pub inverse: u64,
}

impl TransformCounts {
    pub fn total(&self) -> u64 {
        self.forward + self.inverse
    }
}

impl std::ops::Sub for TransformCounts {
    type Output = TransformCounts;

    fn sub(self, rhs: Self) -> Self {
        TransformCounts {
            forward: self.forward - rhs.forward,
            inverse: self.inverse - rhs.inverse,
        }
    }
}

/// FFT engine bound to one grid. Owns its scratch buffers, so it is not shared
/// between tasks; build one per solver.
pub struct Spectral {
    grid: Grid,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
    counts: TransformCounts,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .field("counts", &self.counts)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(grid.nx);
        let ifft_x = planner.plan_fft_inverse(grid.nx);
        let fft_y = planner.plan_fft_forward(grid.ny);
        let ifft_y = planner.plan_fft_inverse(grid.ny);
        let scratch_len = [&fft_x, &ifft_x, &fft_y, &ifft_y]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            grid,
            fft_x,
            ifft_x,
            fft_y,
            ifft_y,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            transposed: vec![Complex64::new(0.0, 0.0); grid.len()],
            counts: TransformCounts::default(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn counts(&self) -> TransformCounts {
        self.counts
    }

    pub fn reset_counts(&mut self) {
        self.counts = TransformCounts::default();
    }

    fn check_len(&self, data: &[Complex64]) -> Result<()> {
        if data.len() != self.grid.len() {
            return Err(DsError::ShapeMismatch {
                expected: self.grid.len(),
                found: data.len(),
            });
        }
        Ok(())
    }

    /// Physical samples to continuum-normalized Fourier coefficients, in place.
    pub fn forward_in_place(&mut self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data)?;
        self.fft2(data, false);
        let scale = self.grid.cell_area() / (2.0 * PI);
        self.apply_phase(data, scale);
        self.counts.forward += 1;
        Ok(())
    }

    /// Exact inverse of [`Self::forward_in_place`].
    pub fn inverse_in_place(&mut self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data)?;
        let scale = self.grid.mode_area() / (2.0 * PI);
        self.apply_phase(data, scale);
        self.fft2(data, true);
        self.counts.inverse += 1;
        Ok(())
    }

    pub fn forward_ft(&mut self, f: &Field) -> Result<Field> {
        f.expect_space(Space::Physical)?;
        let mut out = f.clone();
        self.forward_in_place(&mut out.values)?;
        out.space = Space::Fourier;
        Ok(out)
    }

    pub fn inverse_ft(&mut self, f: &Field) -> Result<Field> {
        f.expect_space(Space::Fourier)?;
        let mut out = f.clone();
        self.inverse_in_place(&mut out.values)?;
        out.space = Space::Physical;
        Ok(out)
    }

    /// Spectral derivative `d^px/dx^px d^py/dy^py` of a physical field.
    pub fn derivative(&mut self, f: &Field, px: u32, py: u32) -> Result<Field> {
        let mut hat = self.forward_ft(f)?;
        let grid = self.grid;
        let i = Complex64::new(0.0, 1.0);
        for a in 0..grid.nx {
            let dx = (i * grid.xi1(a)).powu(px);
            for b in 0..grid.ny {
                hat.values[grid.index(a, b)] *= dx * (i * grid.xi2(b)).powu(py);
            }
        }
        self.inverse_ft(&hat)
    }

    // (-1)^(k+m) comes from the nodes starting at -pi*l instead of 0.
    fn apply_phase(&self, data: &mut [Complex64], scale: f64) {
        let ny = self.grid.ny;
        for (row, chunk) in data.chunks_exact_mut(ny).enumerate() {
            let mut s = if row % 2 == 0 { scale } else { -scale };
            for v in chunk.iter_mut() {
                *v *= s;
                s = -s;
            }
        }
    }

    fn fft2(&mut self, data: &mut [Complex64], inverse: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (px, py) = if inverse {
            (&self.ifft_x, &self.ifft_y)
        } else {
            (&self.fft_x, &self.fft_y)
        };
        py.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transposed, nx, ny);
        px.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, data, ny, nx);
    }
}

/// `dst[c][r] = src[r][c]` for a `rows x cols` row-major `src`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Symbol of `d_xx - d_yy` with the sign of the Fourier-space equation:
/// `(xi^2 + conj(xi)^2)/2 = xi1^2 - xi2^2`.
pub fn laplace_symbol_ds(grid: &Grid) -> Vec<f64> {
    grid.map_indices(|i, j| {
        let (a, b) = (grid.xi1(i), grid.xi2(j));
        a * a - b * b
    })
}

/// 0/1 mask keeping modes with `|k| < n/3` along both axes (2/3 rule).
pub fn dealias_mask(grid: &Grid) -> Vec<f64> {
    let keep = |i: usize, n: usize| 3 * Grid::signed_mode(i, n).unsigned_abs() < n as u64;
    grid.map_indices(|i, j| {
        if keep(i, grid.nx) && keep(j, grid.ny) {
            1.0
        } else {
            0.0
        }
    })
}
