//! Multi-dimensional theta functions and the doubly periodic theta-function
//! solutions of defocusing DS II.
//!
//! ```text
//! Theta(z) = sum_{n in Z^g} exp(<n, B n>/2 + <n, z>)
//! Psi(x, y, t) = sqrt|q2| Theta(z + r)/Theta(z) exp(i(-N1 Xi - conj(N1) eta + N3 t/2))
//! z = i Va Xi - i Vb eta + i (Wa - Wb) t/2,   Xi = x + iy,  eta = x - iy,  Vb = -conj(Va)
//! ```
//!
//! Surface data (period matrix, `Va`, `Wa`, `r`, `N1`, `N3`, `q2`) is read
//! from a text file; computing it from a curve is out of scope.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{DsError, Result};
use crate::solver::{linear_symbol, DsOperator, Method, SolverConfig};
use crate::spectral::{Field, Grid, Space, Spectral};
use crate::stepper::NonlinearTerm;

pub const MAX_GENUS: usize = 4;
pub const DEFAULT_THETA_TOL: f64 = 1e-17;
const MAX_RADIUS: usize = 64;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Symmetric `g x g` matrix with negative definite real part.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannMatrix {
    b: DMatrix<Complex64>,
    /// Smallest eigenvalue of `-Re B`.
    lambda_min: f64,
}

impl RiemannMatrix {
    pub fn new(b: DMatrix<Complex64>) -> Result<Self> {
        let g = b.nrows();
        if g == 0 || g != b.ncols() || g > MAX_GENUS {
            return Err(DsError::InvalidRiemannMatrix(format!(
                "expected a square matrix of size 1..={MAX_GENUS}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let scale = b.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for i in 0..g {
            for j in 0..i {
                if (b[(i, j)] - b[(j, i)]).norm() > 1e-12 * scale {
                    return Err(DsError::InvalidRiemannMatrix(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let neg_re = DMatrix::from_fn(g, g, |i, j| -0.5 * (b[(i, j)].re + b[(j, i)].re));
        if neg_re.clone().cholesky().is_none() {
            return Err(DsError::InvalidRiemannMatrix(
                "real part is not negative definite".into(),
            ));
        }
        let lambda_min = neg_re.symmetric_eigenvalues().min();
        if lambda_min.is_nan() || lambda_min <= 0.0 {
            return Err(DsError::InvalidRiemannMatrix(
                "real part is not negative definite".into(),
            ));
        }
        Ok(Self { b, lambda_min })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let g = rows.len();
        if rows.iter().any(|r| r.len() != g) {
            return Err(DsError::InvalidRiemannMatrix(
                "rows of unequal length".into(),
            ));
        }
        Self::new(DMatrix::from_fn(g, g, |i, j| rows[i][j]))
    }

    pub fn genus(&self) -> usize {
        self.b.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.b
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.b[(i, j)]
    }

    /// Radius beyond which the terms decay monotonically for this `z`.
    pub fn minimum_radius(&self, z: &[Complex64]) -> usize {
        let re: f64 = z.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
        ((2.0 * re / self.lambda_min).ceil() as usize).max(1)
    }
}

/// A theta value with its gradient in `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaValue {
    pub value: Complex64,
    pub gradient: Vec<Complex64>,
    pub radius: usize,
}

fn check_z(z: &[Complex64], b: &RiemannMatrix) -> Result<()> {
    if z.len() != b.genus() {
        return Err(DsError::ShapeMismatch {
            expected: b.genus(),
            found: z.len(),
        });
    }
    Ok(())
}

/// Calls `f(n)` for every lattice point with `max |n_i| == r`.
fn for_shell(g: usize, r: i64, mut f: impl FnMut(&[i64])) {
    let mut n = vec![-r; g];
    loop {
        if n.iter().any(|v| v.abs() == r) {
            f(&n);
        }
        let mut k = 0;
        loop {
            if k == g {
                return;
            }
            if n[k] < r {
                n[k] += 1;
                break;
            }
            n[k] = -r;
            k += 1;
        }
    }
}

struct ShellSum {
    value: Complex64,
    gradient: Vec<Complex64>,
    abs: f64,
}

fn shell(z: &[Complex64], b: &RiemannMatrix, r: usize) -> ShellSum {
    let g = b.genus();
    let mut out = ShellSum {
        value: Complex64::new(0.0, 0.0),
        gradient: vec![Complex64::new(0.0, 0.0); g],
        abs: 0.0,
    };
    for_shell(g, r as i64, |n| {
        let mut e = Complex64::new(0.0, 0.0);
        for (i, (&ni, zi)) in n.iter().zip(z).enumerate() {
            let ni = ni as f64;
            e += ni * zi;
            for (j, &nj) in n.iter().enumerate() {
                e += 0.5 * ni * nj as f64 * b.b[(i, j)];
            }
        }
        let term = e.exp();
        out.value += term;
        out.abs += term.norm();
        for (gr, &ni) in out.gradient.iter_mut().zip(n) {
            *gr += term * ni as f64;
        }
    });
    out
}

/// The series truncated to `max |n_i| <= radius`.
pub fn theta(z: &[Complex64], b: &RiemannMatrix, radius: usize) -> Result<Complex64> {
    Ok(theta_with_gradient(z, b, radius)?.value)
}

pub fn theta_with_gradient(
    z: &[Complex64],
    b: &RiemannMatrix,
    radius: usize,
) -> Result<ThetaValue> {
    check_z(z, b)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut gradient = vec![Complex64::new(0.0, 0.0); b.genus()];
    for r in 0..=radius {
        let s = shell(z, b, r);
        value += s.value;
        for (g, v) in gradient.iter_mut().zip(&s.gradient) {
            *g += v;
        }
    }
    Ok(ThetaValue {
        value,
        gradient,
        radius,
    })
}

/// Adds shells until the newest one contributes less than `tol` relative to
/// the accumulated absolute sum.
pub fn theta_auto(z: &[Complex64], b: &RiemannMatrix, tol: f64) -> Result<ThetaValue> {
    check_z(z, b)?;
    let r_min = b.minimum_radius(z);
    let mut value = Complex64::new(0.0, 0.0);
    let mut gradient = vec![Complex64::new(0.0, 0.0); b.genus()];
    let mut abs = 0.0;
    for r in 0..=MAX_RADIUS {
        let s = shell(z, b, r);
        value += s.value;
        abs += s.abs;
        for (g, v) in gradient.iter_mut().zip(&s.gradient) {
            *g += v;
        }
        if r >= r_min && s.abs <= tol * abs {
            return Ok(ThetaValue {
                value,
                gradient,
                radius: r,
            });
        }
    }
    Err(DsError::InvalidConfig(format!(
        "theta series not converged within radius {MAX_RADIUS}"
    )))
}

/// Parameters of one theta-function solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSurfaceData {
    pub b: RiemannMatrix,
    pub va: Vec<Complex64>,
    pub wa: Vec<Complex64>,
    /// Defaults to `-conj(Wa)`, which keeps `z` imaginary for real `x, y, t`.
    pub wb: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub n1: Complex64,
    pub n3: Complex64,
    pub q2: Complex64,
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| DsError::Format(format!("not a number: {p:?}")))
    };
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(DsError::Format(format!("expected \"re im\", got {s:?}"))),
    }
}

fn parse_vector(s: &str) -> Result<Vec<Complex64>> {
    s.split(',').map(|p| parse_complex(p.trim())).collect()
}

fn format_complex(v: Complex64) -> String {
    format!("{:e} {:e}", v.re, v.im)
}

fn format_vector(v: &[Complex64]) -> String {
    v.iter()
        .map(|c| format_complex(*c))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ThetaSurfaceData {
    /// Parses `key = value` lines; `#` starts a comment. Complex numbers are
    /// `re im`, vector entries are separated by `,`, matrix rows by `;`.
    /// Keys: `g`, `B`, `Va`, `Wa`, `Wb` (optional), `r`, `N1`, `N3`, `q2`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| DsError::Format(format!("line {}: missing '='", lineno + 1)))?;
            let key = key.trim().to_string();
            if fields
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(DsError::Format(format!("duplicate key {key:?}")));
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| DsError::Format(format!("missing key {k:?}")))
        };
        let g: usize = get("g")?
            .parse()
            .map_err(|_| DsError::Format("g must be a positive integer".into()))?;
        let rows = get("B")?
            .split(';')
            .map(|r| parse_vector(r.trim()))
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != g {
            return Err(DsError::Format(format!(
                "B has {} rows, expected {g}",
                rows.len()
            )));
        }
        let b = RiemannMatrix::from_rows(&rows)?;
        let vec_of = |k: &str| -> Result<Vec<Complex64>> {
            let v = parse_vector(get(k)?)?;
            if v.len() != g {
                return Err(DsError::Format(format!(
                    "{k} has {} entries, expected {g}",
                    v.len()
                )));
            }
            Ok(v)
        };
        let va = vec_of("Va")?;
        let wa = vec_of("Wa")?;
        let wb = if fields.contains_key("Wb") {
            vec_of("Wb")?
        } else {
            wa.iter().map(|w| -w.conj()).collect()
        };
        for k in fields.keys() {
            if !["g", "B", "Va", "Wa", "Wb", "r", "N1", "N3", "q2"].contains(&k.as_str()) {
                return Err(DsError::Format(format!("unknown key {k:?}")));
            }
        }
        Ok(Self {
            b,
            va,
            wa,
            wb,
            r: vec_of("r")?,
            n1: parse_complex(get("N1")?)?,
            n3: parse_complex(get("N3")?)?,
            q2: parse_complex(get("q2")?)?,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = self.genus();
        let _ = writeln!(s, "g = {g}");
        let rows: Vec<String> = (0..g)
            .map(|i| format_vector(&(0..g).map(|j| self.b.get(i, j)).collect::<Vec<_>>()))
            .collect();
        let _ = writeln!(s, "B = {}", rows.join("; "));
        let _ = writeln!(s, "Va = {}", format_vector(&self.va));
        let _ = writeln!(s, "Wa = {}", format_vector(&self.wa));
        let _ = writeln!(s, "Wb = {}", format_vector(&self.wb));
        let _ = writeln!(s, "r = {}", format_vector(&self.r));
        let _ = writeln!(s, "N1 = {}", format_complex(self.n1));
        let _ = writeln!(s, "N3 = {}", format_complex(self.n3));
        let _ = writeln!(s, "q2 = {}", format_complex(self.q2));
        s
    }

    pub fn genus(&self) -> usize {
        self.b.genus()
    }

    pub fn vb(&self) -> Vec<Complex64> {
        self.va.iter().map(|v| -v.conj()).collect()
    }

    /// `z(x, y, t)`.
    pub fn z(&self, x: f64, y: f64, t: f64) -> Vec<Complex64> {
        let xi = Complex64::new(x, y);
        let eta = xi.conj();
        self.va
            .iter()
            .zip(self.vb())
            .zip(self.wa.iter().zip(&self.wb))
            .map(|((va, vb), (wa, wb))| I * va * xi - I * vb * eta + I * (wa - wb) * (t / 2.0))
            .collect()
    }

    /// `dz/dt`.
    pub fn z_dot(&self) -> Vec<Complex64> {
        self.wa
            .iter()
            .zip(&self.wb)
            .map(|(wa, wb)| I * (wa - wb) / 2.0)
            .collect()
    }

    fn phase(&self, x: f64, y: f64, t: f64) -> Complex64 {
        let xi = Complex64::new(x, y);
        (I * (-self.n1 * xi - self.n1.conj() * xi.conj() + self.n3 * (t / 2.0))).exp()
    }
}

/// `Psi(x, y, t)` and `Psi_t(x, y, t)`.
pub fn eval_solution_with_time_derivative(
    data: &ThetaSurfaceData,
    x: f64,
    y: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    let z = data.z(x, y, t);
    let zr: Vec<Complex64> = z.iter().zip(&data.r).map(|(a, b)| a + b).collect();
    let den = theta_auto(&z, &data.b, DEFAULT_THETA_TOL)?;
    let num = theta_auto(&zr, &data.b, DEFAULT_THETA_TOL)?;
    if den.value.norm() < 1e-13 * num.value.norm().max(1.0) {
        return Err(DsError::SingularTheta { x, y, t });
    }
    let psi = data.q2.norm().sqrt() * num.value / den.value * data.phase(x, y, t);
    let zd = data.z_dot();
    let dot = |g: &[Complex64]| g.iter().zip(&zd).map(|(a, b)| a * b).sum::<Complex64>();
    let log_rate =
        dot(&num.gradient) / num.value - dot(&den.gradient) / den.value + I * data.n3 / 2.0;
    Ok((psi, psi * log_rate))
}

pub fn eval_solution(data: &ThetaSurfaceData, x: f64, y: f64, t: f64) -> Result<Complex64> {
    Ok(eval_solution_with_time_derivative(data, x, y, t)?.0)
}

pub fn eval_on_grid(data: &ThetaSurfaceData, grid: &Grid, t: f64) -> Result<Field> {
    let values = (0..grid.len())
        .map(|k| eval_solution(data, grid.x(k / grid.ny()), grid.y(k % grid.ny()), t))
        .collect::<Result<Vec<_>>>()?;
    Field::from_values(*grid, Space::Physical, values)
}

/// Maximum pointwise DS II residual `|Psi_t - L Psi - N(Psi)|` of the solution
/// sampled on `grid` at time `t`, with the classical nonlocal term (exact for
/// periodic data up to the mean of the mean field).
pub fn ds_residual(
    data: &ThetaSurfaceData,
    grid: &Grid,
    t: f64,
    rho: f64,
    beta: f64,
) -> Result<f64> {
    let mut psi = Vec::with_capacity(grid.len());
    let mut psi_t = Vec::with_capacity(grid.len());
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let (p, pt) = eval_solution_with_time_derivative(data, grid.x(i), grid.y(j), t)?;
            psi.push(p);
            psi_t.push(pt);
        }
    }
    let cfg = SolverConfig {
        rho,
        beta,
        method: Method::Classical,
        ..SolverConfig::default()
    };
    let mut op = DsOperator::new(*grid, &cfg)?;
    let mut sp = Spectral::new(*grid);
    let mut hat = psi;
    sp.forward_in_place(&mut hat)?;
    let mut rhs = vec![Complex64::new(0.0, 0.0); grid.len()];
    op.eval(t, &hat, &mut rhs)?;
    for ((r, h), l) in rhs.iter_mut().zip(&hat).zip(linear_symbol(grid)) {
        *r += l * h;
    }
    sp.inverse_in_place(&mut rhs)?;
    Ok(rhs
        .iter()
        .zip(&psi_t)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// Outcome of the period conditions for a choice of integers.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityReport {
    /// `n2 Re Va1 - n1 Re Va2` and `m2 Im Va1 - m1 Im Va2` (zero for genus 1).
    pub cond_residuals: [f64; 2],
    /// `pi n1 / Re Va1`, absent when `Re Va1` vanishes.
    pub lx: Option<f64>,
    /// `-pi m1 / Im Va1`, absent when `Im Va1` vanishes.
    pub ly: Option<f64>,
    /// `Re Va1 = 0`: no constraint from the theta factor in `x`.
    pub real_part_degenerate: bool,
    /// `Re Va1 = Im Va2 = 0`.
    pub degenerate_branch: bool,
    /// `Re N1/Re Va1` and `Im N1/Im Va1` with their distance to the nearest integer.
    pub l_values: [Option<(f64, f64)>; 2],
    /// Deviation of caller-proposed periods from `lx`, `ly`.
    pub proposed_mismatch: Option<[f64; 2]>,
}

pub const DEGENERATE_TOL: f64 = 1e-14;

impl PeriodicityReport {
    /// True when every computed condition holds to `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.cond_residuals.iter().all(|r| r.abs() <= tol)
            && self.l_values.iter().flatten().all(|(_, d)| *d <= tol)
            && self
                .proposed_mismatch
                .iter()
                .flatten()
                .all(|d| d.abs() <= tol)
    }
}

/// Evaluates the period conditions for integers `n = (n1, n2)`, `m = (m1, m2)`.
pub fn check_periodicity(
    data: &ThetaSurfaceData,
    n: [i64; 2],
    m: [i64; 2],
    proposed: Option<(f64, f64)>,
) -> Result<PeriodicityReport> {
    if n.iter().chain(&m).all(|&v| v == 0) {
        return Err(DsError::InvalidConfig(
            "period integers are all zero".into(),
        ));
    }
    let va1 = data.va[0];
    let va2 = data.va.get(1).copied();
    let cond_residuals = match va2 {
        Some(va2) => [
            n[1] as f64 * va1.re - n[0] as f64 * va2.re,
            m[1] as f64 * va1.im - m[0] as f64 * va2.im,
        ],
        None => [0.0, 0.0],
    };
    let real_part_degenerate = va1.re.abs() < DEGENERATE_TOL;
    let imag_degenerate = va1.im.abs() < DEGENERATE_TOL;
    let degenerate_branch =
        real_part_degenerate && va2.is_some_and(|v| v.im.abs() < DEGENERATE_TOL);
    let lx = (!real_part_degenerate).then(|| PI * n[0] as f64 / va1.re);
    let ly = (!imag_degenerate).then(|| -PI * m[0] as f64 / va1.im);
    let near = |v: f64| (v, (v - v.round()).abs());
    let l_values = [
        (!real_part_degenerate).then(|| near(data.n1.re / va1.re)),
        (!imag_degenerate).then(|| near(data.n1.im / va1.im)),
    ];
    let proposed_mismatch =
        proposed.map(|(px, py)| [lx.map_or(0.0, |l| px - l), ly.map_or(0.0, |l| py - l)]);
    Ok(PeriodicityReport {
        cond_residuals,
        lx,
        ly,
        real_part_degenerate,
        degenerate_branch,
        l_values,
        proposed_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn genus_one(b: f64) -> RiemannMatrix {
        RiemannMatrix::from_rows(&[vec![c(b, 0.0)]]).unwrap()
    }

    #[test]
    fn jacobi_value() {
        let b = genus_one(-2.0 * PI);
        let v = theta_auto(&[c(0.0, 0.0)], &b, DEFAULT_THETA_TOL).unwrap();
        assert!((v.value - c(1.086_434_811_213_308, 0.0)).norm() < 1e-15);
        assert!(v.gradient[0].norm() < 1e-16);
        assert_eq!(theta(&[c(0.0, 0.0)], &b, 0).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(RiemannMatrix::from_rows(&[vec![c(1.0, 0.0)]]).is_err());
        assert!(RiemannMatrix::from_rows(&[vec![c(0.0, 1.0)]]).is_err());
        let asym = [
            vec![c(-2.0, 0.0), c(0.1, 0.0)],
            vec![c(0.2, 0.0), c(-2.0, 0.0)],
        ];
        assert!(RiemannMatrix::from_rows(&asym).is_err());
        let indefinite = [
            vec![c(-1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(-1.0, 0.0)],
        ];
        assert!(RiemannMatrix::from_rows(&indefinite).is_err());
        assert!(RiemannMatrix::from_rows(&[vec![c(-1.0, 0.0), c(0.0, 0.0)]]).is_err());
        let b = genus_one(-3.0);
        assert!(theta(&[c(0.0, 0.0), c(0.0, 0.0)], &b, 3).is_err());
    }

    #[test]
    fn shells_enumerate_the_cube_boundary() {
        let mut count = 0;
        for_shell(2, 2, |n| {
            assert_eq!(n.iter().map(|v| v.abs()).max(), Some(2));
            count += 1;
        });
        assert_eq!(count, 25 - 9);
        let mut zero = 0;
        for_shell(3, 0, |_| zero += 1);
        assert_eq!(zero, 1);
    }

    #[test]
    fn quasi_periodicity() {
        let b = RiemannMatrix::from_rows(&[
            vec![c(-4.0, 0.3), c(0.7, 0.1), c(0.2, 0.0)],
            vec![c(0.7, 0.1), c(-3.5, -0.2), c(-0.4, 0.5)],
            vec![c(0.2, 0.0), c(-0.4, 0.5), c(-5.0, 0.0)],
        ])
        .unwrap();
        let z = [c(0.2, -0.4), c(-0.1, 0.9), c(0.3, 2.0)];
        let base = theta_auto(&z, &b, DEFAULT_THETA_TOL).unwrap().value;
        for j in 0..3 {
            let mut zi = z;
            zi[j] += c(0.0, 2.0 * PI);
            let v = theta_auto(&zi, &b, DEFAULT_THETA_TOL).unwrap().value;
            assert!((v - base).norm() < 1e-12 * base.norm());
            let zb: Vec<Complex64> = (0..3).map(|k| z[k] + b.get(k, j)).collect();
            let shifted = theta_auto(&zb, &b, DEFAULT_THETA_TOL).unwrap().value;
            let expect = (-b.get(j, j) / 2.0 - z[j]).exp() * base;
            assert!(
                (shifted - expect).norm() < 1e-12 * expect.norm(),
                "{shifted} {expect}"
            );
        }
    }

    #[test]
    fn diagonal_matrix_factorizes() {
        let b = RiemannMatrix::from_rows(&[
            vec![c(-2.0, 0.5), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-3.0, -1.0)],
        ])
        .unwrap();
        let z = [c(0.4, 0.3), c(-0.6, 1.7)];
        let joint = theta_auto(&z, &b, DEFAULT_THETA_TOL).unwrap().value;
        let t1 = theta_auto(
            &z[..1],
            &RiemannMatrix::from_rows(&[vec![c(-2.0, 0.5)]]).unwrap(),
            DEFAULT_THETA_TOL,
        )
        .unwrap()
        .value;
        let t2 = theta_auto(
            &z[1..],
            &RiemannMatrix::from_rows(&[vec![c(-3.0, -1.0)]]).unwrap(),
            DEFAULT_THETA_TOL,
        )
        .unwrap()
        .value;
        assert!((joint - t1 * t2).norm() < 1e-14 * joint.norm());
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let b = RiemannMatrix::from_rows(&[
            vec![c(-3.0, 0.4), c(0.5, -0.2)],
            vec![c(0.5, -0.2), c(-2.5, 1.0)],
        ])
        .unwrap();
        let z = [c(0.3, 0.7), c(-0.2, 1.1)];
        let v = theta_auto(&z, &b, DEFAULT_THETA_TOL).unwrap();
        for j in 0..2 {
            let h = 1e-6;
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let fd = (theta_auto(&zp, &b, DEFAULT_THETA_TOL).unwrap().value
                - theta_auto(&zm, &b, DEFAULT_THETA_TOL).unwrap().value)
                / (2.0 * h);
            assert!((fd - v.gradient[j]).norm() < 1e-8);
        }
    }

    const SAMPLE: &str = "\
# genus 2 sample
g = 2
B = -6 0, 1 0; 1 0, -7 0
Va = 1 1, 1 -1
Wa = 0.5 0.25, -0.3 0.1
r = 0 0.7, 0 -0.4
N1 = 2 3
N3 = 1.5 0
q2 = 0.8 0
";

    #[test]
    fn surface_data_text_round_trip() {
        let d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        assert_eq!(d.genus(), 2);
        assert_eq!(d.wb, vec![c(-0.5, 0.25), c(0.3, 0.1)]);
        assert_eq!(d.vb(), vec![c(-1.0, 1.0), c(-1.0, -1.0)]);
        let again = ThetaSurfaceData::parse(&d.to_text()).unwrap();
        assert_eq!(again, d);
        assert!(ThetaSurfaceData::parse("g = 1").is_err());
        assert!(ThetaSurfaceData::parse(&SAMPLE.replace("N1 = 2 3", "N1 = 2 x")).is_err());
        assert!(ThetaSurfaceData::parse(&SAMPLE.replace("Va = 1 1, 1 -1", "Va = 1 1")).is_err());
        assert!(ThetaSurfaceData::parse(&format!("{SAMPLE}\nfoo = 1")).is_err());
        assert!(ThetaSurfaceData::parse(&SAMPLE.replace("-6 0", "6 0")).is_err());
    }

    #[test]
    fn z_is_imaginary_for_regular_data() {
        let d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        for v in d.z(0.3, -1.2, 0.8) {
            assert!(v.re.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_shift_is_a_plane_wave() {
        let mut d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        d.r = vec![c(0.0, 0.0); 2];
        for (x, y, t) in [(0.0, 0.0, 0.0), (1.3, -0.4, 0.2), (-2.0, 3.0, 1.0)] {
            let v = eval_solution(&d, x, y, t).unwrap();
            assert!((v.norm() - 0.8f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn time_translation() {
        // shifting t moves z along Wa - Wb; with N3 = 0 and W-shift matched by
        // Va Xi the solution is a travelling wave
        let mut d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        d.n3 = c(0.0, 0.0);
        let z0 = d.z(0.4, 0.1, 0.7);
        let z1 = d.z(0.4, 0.1, 0.0);
        let shift: Vec<Complex64> = d.z_dot().iter().map(|v| v * 0.7).collect();
        for ((a, b), s) in z0.iter().zip(&z1).zip(&shift) {
            assert!((a - b - s).norm() < 1e-15);
        }
    }

    #[test]
    fn time_derivative_matches_difference_quotient() {
        let d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        let (x, y, t, h) = (0.35, -0.8, 0.4, 1e-5);
        let (_, dt) = eval_solution_with_time_derivative(&d, x, y, t).unwrap();
        let fd = (eval_solution(&d, x, y, t + h).unwrap()
            - eval_solution(&d, x, y, t - h).unwrap())
            / (2.0 * h);
        assert!((fd - dt).norm() < 1e-8 * dt.norm().max(1.0), "{fd} vs {dt}");
    }

    #[test]
    fn sample_is_doubly_periodic() {
        let d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        for (x, y) in [(0.1, 0.2), (-1.3, 0.7)] {
            let v = eval_solution(&d, x, y, 0.3).unwrap();
            let vx = eval_solution(&d, x + PI, y, 0.3).unwrap();
            let vy = eval_solution(&d, x, y + PI, 0.3).unwrap();
            assert!((v - vx).norm() < 1e-12 && (v - vy).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_residual_vanishes() {
        let mut d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        d.r = vec![c(0.0, 0.0); 2];
        let grid = Grid::square(32, 0.5).unwrap();
        let (kx, ky) = (-2.0 * d.n1.re, 2.0 * d.n1.im);
        for (rho, beta) in [(1.0, 1.0), (1.0, 0.5), (-1.0, 2.0)] {
            d.n3 = c(
                -2.0 * (kx * kx - ky * ky) - 4.0 * rho * (beta - 1.0) * d.q2.norm(),
                0.0,
            );
            let res = ds_residual(&d, &grid, 0.2, rho, beta).unwrap();
            assert!(res < 1e-11, "{res:e}");
            d.n3 += c(0.1, 0.0);
            assert!(ds_residual(&d, &grid, 0.2, rho, beta).unwrap() > 1e-3);
        }
    }

    #[test]
    fn periodicity_examples() {
        let d = ThetaSurfaceData::parse(SAMPLE).unwrap();
        let rep = check_periodicity(&d, [1, 1], [1, -1], Some((PI, -PI))).unwrap();
        assert_eq!(rep.cond_residuals, [0.0, 0.0]);
        assert!((rep.lx.unwrap() - PI).abs() < 1e-15);
        assert!((rep.ly.unwrap() + PI).abs() < 1e-15);
        assert!(rep.passes(1e-12));
        assert!(!rep.real_part_degenerate);
        assert_eq!(rep.l_values[0], Some((2.0, 0.0)));

        let beta = 2.119_032_837_086_884;
        let mut deg = d.clone();
        deg.va = vec![c(0.0, beta), c(0.0, -beta)];
        let rep = check_periodicity(&deg, [1, 1], [1, -1], None).unwrap();
        assert!(rep.real_part_degenerate);
        assert!(!rep.degenerate_branch);
        assert!(rep.lx.is_none());
        assert!((rep.ly.unwrap().abs() - PI / beta).abs() < 1e-15);

        let mut random = d.clone();
        random.va = vec![c(0.37, 1.21), c(-0.83, 0.55)];
        let rep = check_periodicity(&random, [1, 2], [3, 1], None).unwrap();
        assert!(!rep.passes(1e-6));
        assert!(check_periodicity(&d, [0, 0], [0, 0], None).is_err());
    }
}
