//! The nonlocal term `F^-1([conj(xi)/2xi + xi/2conj(xi)] S)`.
//!
//! The multiplier is `cos(2 psi)` for `xi = |xi| e^{i psi}`: bounded but with no
//! limit at the origin. The classical treatment samples it with the value 0 at
//! `xi = 0`, which caps the accuracy of the discrete inverse transform at an
//! algebraic rate.
//!
//! The regularized treatment subtracts a Gaussian-windowed Taylor polynomial of
//! `S` around the origin,
//!
//! ```text
//! (1/2) e^{-|xi|^2} sum_{n<=M} [ a_n conj(xi)^{n+1}/xi + b_n xi^{n+1}/conj(xi) ] / n!
//! a_n = d^n S/d conj(xi)^n (0),   b_n = d^n S/d xi^n (0),
//! ```
//!
//! leaving a residual that is `C^M` at the origin and can go through the FFT.
//! The subtracted terms are inverted exactly with
//!
//! ```text
//! W_m(z) = F^-1(conj(xi)^m e^{-|xi|^2} / xi)(z) = (1/2) (2i/z)^{m+1} gamma(m+1, |z|^2/4)
//! V_m(z) = F^-1(xi^m e^{-|xi|^2} / conj(xi))(z) = (1/2) (2i/conj(z))^{m+1} gamma(m+1, |z|^2/4)
//! ```
//!
//! where `gamma` is the lower incomplete gamma function. This is the closed form
//! of `(-2i d)^m [(i/z)(1 - e^{-|z|^2/4})]` with `d = (d_x - i d_y)/2`;
//! [`DerivativeExpansion`] produces the same functions by repeated symbolic
//! differentiation. Note `V_m = (-1)^(m+1) conj(W_m)`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{DsError, Result};
use crate::spectral::{Field, Grid, Space, Spectral};

/// Largest `m` for which `W_m` may be requested.
pub const MAX_W_ORDER: usize = 40;

/// Largest supported Taylor order `M` (tables need `W_{M+1}`).
pub const MAX_TAYLOR_ORDER: usize = MAX_W_ORDER - 1;

/// Default Taylor order used by the solver.
pub const DEFAULT_TAYLOR_ORDER: usize = 10;

// Modes with |xi|^2 above this carry a window factor below e^-100 and are skipped
// when subtracting the Taylor terms.
const WINDOW_CUTOFF: f64 = 100.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `gamma(nu, u)` evaluated in whichever factorization is stable.
enum LowerGamma {
    /// `gamma(nu, u) = u^nu * value`; used for `u <= nu`.
    Scaled(f64),
    /// `gamma(nu, u) = value`.
    Plain(f64),
}

fn lower_gamma(nu: u32, u: f64) -> LowerGamma {
    if u <= nu as f64 {
        lower_gamma_series(nu, u)
    } else {
        lower_gamma_complement(nu, u)
    }
}

// e^{-u} sum_k u^k / (nu (nu+1) ... (nu+k))
fn lower_gamma_series(nu: u32, u: f64) -> LowerGamma {
    let nuf = nu as f64;
    let mut term = 1.0 / nuf;
    let mut sum = term;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= u / (nuf + k);
        sum += term;
        k += 1.0;
    }
    LowerGamma::Scaled((-u).exp() * sum)
}

// (nu-1)! (1 - e^{-u} sum_{k<nu} u^k/k!)
fn lower_gamma_complement(nu: u32, u: f64) -> LowerGamma {
    let mut term = 1.0;
    let mut partial = 1.0;
    let mut fact = 1.0;
    for k in 1..nu {
        term *= u / k as f64;
        partial += term;
        fact *= k as f64;
    }
    LowerGamma::Plain(fact * (1.0 - (-u).exp() * partial))
}

/// `W_m(z) = F^-1(conj(xi)^m e^{-|xi|^2} / xi)` at a single point.
pub fn w_value(m: usize, z: Complex64) -> Complex64 {
    let nu = (m + 1) as i32;
    let u = z.norm_sqr() / 4.0;
    match lower_gamma(nu as u32, u) {
        LowerGamma::Scaled(g) => 0.5 * g * (I * z.conj() / 2.0).powi(nu),
        LowerGamma::Plain(g) => 0.5 * g * (2.0 * I / z).powi(nu),
    }
}

/// `V_m(z) = F^-1(xi^m e^{-|xi|^2} / conj(xi))` at a single point.
pub fn w_conj_value(m: usize, z: Complex64) -> Complex64 {
    w_value(m, z.conj())
}

fn check_w_order(m: usize) -> Result<()> {
    if m > MAX_W_ORDER {
        return Err(DsError::OrderOutOfRange {
            order: m,
            min: 0,
            max: MAX_W_ORDER,
        });
    }
    Ok(())
}

/// `W_m` sampled on the grid nodes.
pub fn closed_form_w(m: usize, grid: &Grid) -> Result<Field> {
    check_w_order(m)?;
    Ok(Field::from_fn(*grid, |x, y| {
        w_value(m, Complex64::new(x, y))
    }))
}

/// `V_m` sampled on the grid nodes.
pub fn closed_form_w_conj(m: usize, grid: &Grid) -> Result<Field> {
    check_w_order(m)?;
    Ok(Field::from_fn(*grid, |x, y| {
        w_conj_value(m, Complex64::new(x, y))
    }))
}

/// Symbolic form of `(-2i d)^m [(i/z)(1 - e^{-|z|^2/4})]` as
/// `sum_a p_a z^{-a} + e^{-|z|^2/4} sum_{a,b} g_{a,b} z^a conj(z)^b`.
///
/// Exact up to the floating-point coefficients, but evaluating it near `z = 0`
/// cancels catastrophically; [`w_value`] is the stable evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeExpansion {
    order: usize,
    /// `(a, coefficient)` for `c z^{-a}`.
    poles: Vec<(i32, Complex64)>,
    /// `(a, b, coefficient)` for `c z^a conj(z)^b e^{-|z|^2/4}`, `a` may be negative.
    gauss: Vec<(i32, u32, Complex64)>,
}

impl DerivativeExpansion {
    pub fn new(order: usize) -> Result<Self> {
        check_w_order(order)?;
        let mut poles = vec![(1, I)];
        let mut gauss = vec![(-1, 0, -I)];
        for _ in 0..order {
            // d z^{-a} = -a z^{-a-1}
            poles = poles
                .into_iter()
                .map(|(a, c)| (a + 1, -2.0 * I * c * (-(a as f64))))
                .collect();
            // d (z^a zb^b E) = a z^{a-1} zb^b E - (1/4) z^a zb^{b+1} E
            let mut next: Vec<(i32, u32, Complex64)> = Vec::with_capacity(gauss.len() * 2);
            let mut add = |a: i32, b: u32, c: Complex64| {
                if c == Complex64::new(0.0, 0.0) {
                    return;
                }
                match next.iter_mut().find(|t| t.0 == a && t.1 == b) {
                    Some(t) => t.2 += c,
                    None => next.push((a, b, c)),
                }
            };
            for (a, b, c) in gauss {
                let c = -2.0 * I * c;
                add(a - 1, b, c * a as f64);
                add(a, b + 1, c * -0.25);
            }
            gauss = next;
        }
        Ok(Self {
            order,
            poles,
            gauss,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn term_count(&self) -> usize {
        self.poles.len() + self.gauss.len()
    }

    /// Evaluates the expansion at `z != 0`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let e = (-z.norm_sqr() / 4.0).exp();
        let pole: Complex64 = self.poles.iter().map(|&(a, c)| c * z.powi(-a)).sum();
        let gauss: Complex64 = self
            .gauss
            .iter()
            .map(|&(a, b, c)| c * z.powi(a) * z.conj().powi(b as i32))
            .sum();
        pole + e * gauss
    }
}

/// Taylor coefficients of `S = F(|Psi|^2)` at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `d^n S / d conj(xi)^n (0)`, `n = 0..=M`.
    pub dbar_moments: Vec<Complex64>,
    /// `d^n S / d xi^n (0)`, `n = 0..=M`.
    pub d_moments: Vec<Complex64>,
}

impl MomentSet {
    pub fn order(&self) -> usize {
        self.dbar_moments.len().saturating_sub(1)
    }

    /// True when `d_n = (-1)^n conj(dbar_n)` holds exactly, as for any real density.
    pub fn is_real_density(&self) -> bool {
        self.dbar_moments
            .iter()
            .zip(&self.d_moments)
            .enumerate()
            .all(|(n, (a, b))| {
                if n % 2 == 0 {
                    *b == a.conj()
                } else {
                    *b == -a.conj()
                }
            })
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            dbar_moments: vec![Complex64::new(0.0, 0.0); order + 1],
            d_moments: vec![Complex64::new(0.0, 0.0); order + 1],
        }
    }
}

/// Moments `d^n S/d conj(xi)^n (0) = 1/(2 pi) \int (-iz/2)^n rho dx dy` of a real
/// density, by the trapezoidal rule on the grid (no transforms).
///
/// For real `rho` the `xi`-moments follow as `(-1)^n conj(.)` of these.
pub fn compute_moments(psi_sq: &[f64], grid: &Grid, order: usize) -> Result<MomentSet> {
    if psi_sq.len() != grid.len() {
        return Err(DsError::ShapeMismatch {
            expected: grid.len(),
            found: psi_sq.len(),
        });
    }
    if order == 0 || order > MAX_TAYLOR_ORDER {
        return Err(DsError::OrderOutOfRange {
            order,
            min: 1,
            max: MAX_TAYLOR_ORDER,
        });
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); order + 1];
    let mut k = 0;
    for i in 0..grid.nx() {
        let x = grid.x(i);
        for j in 0..grid.ny() {
            let rho = psi_sq[k];
            k += 1;
            if rho == 0.0 {
                continue;
            }
            let w = Complex64::new(grid.y(j) / 2.0, -x / 2.0); // -i z / 2
            let mut p = Complex64::new(rho, 0.0);
            for a in acc.iter_mut() {
                *a += p;
                p *= w;
            }
        }
    }
    let scale = grid.cell_area() / (2.0 * PI);
    let dbar_moments: Vec<Complex64> = acc.into_iter().map(|a| a * scale).collect();
    let d_moments = dbar_moments
        .iter()
        .enumerate()
        .map(|(n, a)| if n % 2 == 0 { a.conj() } else { -a.conj() })
        .collect();
    Ok(MomentSet {
        dbar_moments,
        d_moments,
    })
}

/// Precomputed arrays shared by every evaluation of the nonlocal term on one grid.
#[derive(Debug, Clone)]
pub struct RegularizationTables {
    grid: Grid,
    order: usize,
    w_fields: Vec<Vec<Complex64>>,
    w_fields_conj: Vec<Vec<Complex64>>,
    gauss_window: Vec<f64>,
    classical_symbol: Vec<f64>,
    window_support: Vec<usize>,
    /// `conj(xi)^{n+1}/xi` on the window support, origin set to 0.
    monomials_bar: Vec<Vec<Complex64>>,
    /// `xi^{n+1}/conj(xi)` on the window support, origin set to 0.
    monomials: Vec<Vec<Complex64>>,
}

/// `cos(2 psi) = (xi1^2 - xi2^2)/|xi|^2`, with 0 at the origin.
pub fn classical_symbol(grid: &Grid) -> Vec<f64> {
    grid.map_indices(|i, j| {
        let (a, b) = (grid.xi1(i), grid.xi2(j));
        let r2 = a * a + b * b;
        if r2 == 0.0 {
            0.0
        } else {
            (a * a - b * b) / r2
        }
    })
}

impl RegularizationTables {
    /// Tables for Taylor order `order` (`1..=MAX_TAYLOR_ORDER`).
    pub fn new(grid: &Grid, order: usize) -> Result<Self> {
        if order == 0 || order > MAX_TAYLOR_ORDER {
            return Err(DsError::OrderOutOfRange {
                order,
                min: 1,
                max: MAX_TAYLOR_ORDER,
            });
        }
        let w_fields = (0..=order + 1)
            .map(|m| closed_form_w(m, grid).map(Field::into_values))
            .collect::<Result<Vec<_>>>()?;
        let w_fields_conj = (0..=order + 1)
            .map(|m| closed_form_w_conj(m, grid).map(Field::into_values))
            .collect::<Result<Vec<_>>>()?;
        let gauss_window = grid.map_indices(|i, j| (-grid.xi(i, j).norm_sqr()).exp());

        let mut window_support = Vec::new();
        let mut monomials_bar = vec![Vec::new(); order + 1];
        let mut monomials = vec![Vec::new(); order + 1];
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let xi = grid.xi(i, j);
                let r2 = xi.norm_sqr();
                if r2 > WINDOW_CUTOFF {
                    continue;
                }
                window_support.push(grid.index(i, j));
                for n in 0..=order {
                    let (bar, plain) = if r2 == 0.0 {
                        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
                    } else {
                        let p = (n + 1) as i32;
                        (xi.conj().powi(p) / xi, xi.powi(p) / xi.conj())
                    };
                    monomials_bar[n].push(bar);
                    monomials[n].push(plain);
                }
            }
        }

        Ok(Self {
            grid: *grid,
            order,
            w_fields,
            w_fields_conj,
            gauss_window,
            classical_symbol: classical_symbol(grid),
            window_support,
            monomials_bar,
            monomials,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn taylor_order(&self) -> usize {
        self.order
    }

    /// `W_m` on the grid nodes, `m = 0..=M+1`.
    pub fn w_field(&self, m: usize) -> &[Complex64] {
        &self.w_fields[m]
    }

    /// `V_m` on the grid nodes, `m = 0..=M+1`.
    pub fn w_field_conj(&self, m: usize) -> &[Complex64] {
        &self.w_fields_conj[m]
    }

    pub fn gauss_window(&self) -> &[f64] {
        &self.gauss_window
    }

    pub fn classical_symbol(&self) -> &[f64] {
        &self.classical_symbol
    }

    fn check_moments(&self, moments: &MomentSet) -> Result<()> {
        if moments.dbar_moments.len() != self.order + 1 || moments.d_moments.len() != self.order + 1
        {
            return Err(DsError::TaylorOrderMismatch {
                moments: moments.order(),
                tables: self.order,
            });
        }
        Ok(())
    }

    /// Regularized nonlocal term, in place: `data` holds `S` on entry and the
    /// physical-space result on exit. Performs exactly one inverse transform.
    pub fn apply_in_place(
        &self,
        data: &mut [Complex64],
        moments: &MomentSet,
        spectral: &mut Spectral,
    ) -> Result<()> {
        self.check_moments(moments)?;
        if data.len() != self.grid.len() {
            return Err(DsError::ShapeMismatch {
                expected: self.grid.len(),
                found: data.len(),
            });
        }
        for (v, s) in data.iter_mut().zip(&self.classical_symbol) {
            *v *= *s;
        }

        let mut fact = 1.0;
        let mut a = Vec::with_capacity(self.order + 1);
        let mut b = Vec::with_capacity(self.order + 1);
        for n in 0..=self.order {
            if n > 0 {
                fact *= n as f64;
            }
            a.push(moments.dbar_moments[n] * (0.5 / fact));
            b.push(moments.d_moments[n] * (0.5 / fact));
        }

        for (k, &idx) in self.window_support.iter().enumerate() {
            let mut sub = Complex64::new(0.0, 0.0);
            for n in 0..=self.order {
                sub += a[n] * self.monomials_bar[n][k] + b[n] * self.monomials[n][k];
            }
            data[idx] -= sub * self.gauss_window[idx];
        }
        data[0] = Complex64::new(0.0, 0.0);

        spectral.inverse_in_place(data)?;

        if moments.is_real_density() {
            // b_n V_{n+1} = conj(a_n W_{n+1})
            for (n, &a_n) in a.iter().enumerate().take(self.order + 1) {
                let an = 2.0 * a_n;
                for (d, wv) in data.iter_mut().zip(&self.w_fields[n + 1]) {
                    d.re += an.re * wv.re - an.im * wv.im;
                }
            }
        } else {
            for n in 0..=self.order {
                let (an, bn) = (a[n], b[n]);
                let w = &self.w_fields[n + 1];
                let v = &self.w_fields_conj[n + 1];
                for ((d, wv), vv) in data.iter_mut().zip(w).zip(v) {
                    *d += an * wv + bn * vv;
                }
            }
        }
        Ok(())
    }
}

/// `cos(2 psi) * S` with the classical value 0 at the origin.
pub fn classical_nonlocal(s_hat: &Field, symbol: &[f64]) -> Result<Field> {
    s_hat.expect_space(Space::Fourier)?;
    if symbol.len() != s_hat.values().len() {
        return Err(DsError::ShapeMismatch {
            expected: s_hat.values().len(),
            found: symbol.len(),
        });
    }
    let values = s_hat
        .values()
        .iter()
        .zip(symbol)
        .map(|(v, s)| v * *s)
        .collect();
    Field::from_values(*s_hat.grid(), Space::Fourier, values)
}

/// Regularized `F^-1(cos(2 psi) S)` as a physical-space field.
pub fn regularized_nonlocal(
    s_hat: &Field,
    moments: &MomentSet,
    tables: &RegularizationTables,
    spectral: &mut Spectral,
) -> Result<Field> {
    s_hat.expect_space(Space::Fourier)?;
    let mut data = s_hat.values().to_vec();
    tables.apply_in_place(&mut data, moments, spectral)?;
    Field::from_values(*s_hat.grid(), Space::Physical, data)
}
