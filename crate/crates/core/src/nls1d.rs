//! Independent 1D cubic NLS solver, `i q_t + q_xx + c |q|^2 q = 0` on
//! `x in lx [-pi, pi)`, integrating-factor RK4 in time.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{DsError, Result};
use crate::stepper::{IfRk4, NonlinearTerm, Stepper};

/// Nodes `lx (-pi + 2 pi j / n)`.
pub fn nodes_1d(n: usize, lx: f64) -> Vec<f64> {
    (0..n)
        .map(|j| lx * (-PI + 2.0 * PI * j as f64 / n as f64))
        .collect()
}

struct Cubic {
    coeff: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl NonlinearTerm for Cubic {
    fn eval(&mut self, _t: f64, u: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let n = u.len() as f64;
        self.buf.copy_from_slice(u);
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, q) in out.iter_mut().zip(&self.buf) {
            let q = q / n;
            *o = Complex64::new(0.0, self.coeff) * q.norm_sqr() * q;
        }
        self.forward.process_with_scratch(out, &mut self.scratch);
        Ok(())
    }
}

/// Evolves `q0` (sampled on [`nodes_1d`]) to `tmax` in `nt` steps.
pub fn evolve_1d(
    q0: &[Complex64],
    coeff: f64,
    tmax: f64,
    nt: usize,
    lx: f64,
) -> Result<Vec<Complex64>> {
    let n = q0.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(DsError::InvalidGrid(format!(
            "1D size must be a power of two, got {n}"
        )));
    }
    if !(lx.is_finite() && lx > 0.0) || nt == 0 || !coeff.is_finite() {
        return Err(DsError::InvalidConfig(format!(
            "bad 1D parameters: lx = {lx}, nt = {nt}, coeff = {coeff}"
        )));
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let scratch_len = forward
        .get_inplace_scratch_len()
        .max(inverse.get_inplace_scratch_len());
    let symbol: Vec<Complex64> = (0..n)
        .map(|k| {
            let m = if k < n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            };
            let xi = m / lx;
            Complex64::new(0.0, -xi * xi)
        })
        .collect();
    let mut rhs = Cubic {
        coeff,
        forward: forward.clone(),
        inverse: inverse.clone(),
        buf: vec![Complex64::new(0.0, 0.0); n],
        scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
    let mut u = q0.to_vec();
    forward.process_with_scratch(&mut u, &mut scratch);

    let dt = tmax / nt as f64;
    let mut stepper = IfRk4::new(&symbol, dt)?;
    let peak0 = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut t = 0.0;
    for step in 1..=nt {
        stepper.step(t, &mut u, &mut rhs)?;
        t = step as f64 * dt;
        let peak = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(DsError::NonFinite { time: t });
        }
        if peak > 1e10 * peak0.max(f64::MIN_POSITIVE) {
            return Err(DsError::BlowUp {
                time: t,
                max_abs: peak,
            });
        }
    }
    inverse.process_with_scratch(&mut u, &mut scratch);
    let scale = 1.0 / n as f64;
    u.iter_mut().for_each(|v| *v *= scale);
    Ok(u)
}
