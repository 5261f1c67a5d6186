//! Time integrators for `u_t = L u + N(t, u)` with a diagonal linear part.

use rustfft::num_complex::Complex64;

use crate::error::{DsError, Result};

/// The nonlinear part of a semi-linear system, evaluated on Fourier coefficients.
pub trait NonlinearTerm {
    fn eval(&mut self, t: f64, u: &[Complex64], out: &mut [Complex64]) -> Result<()>;
}

impl<F> NonlinearTerm for F
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, u: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self(t, u, out)
    }
}

/// Which integrator to use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Scheme {
    /// Integrating-factor fourth-order Runge-Kutta.
    #[default]
    IfRk4,
    /// Additive Runge-Kutta pair: classical RK4 on modes with
    /// `|dt L| <= stiff_threshold`, a diagonally implicit companion on the rest.
    Composite { stiff_threshold: f64 },
}

pub const DEFAULT_STIFF_THRESHOLD: f64 = 1.0;

/// A prepared one-step method for a fixed `dt` and linear symbol.
pub trait Stepper {
    /// Advances `u` from `t` to `t + dt` in place.
    fn step(&mut self, t: f64, u: &mut [Complex64], rhs: &mut dyn NonlinearTerm) -> Result<()>;
    fn dt(&self) -> f64;
    /// Nonlinear evaluations per step.
    fn stages(&self) -> usize {
        4
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(DsError::InvalidConfig(format!(
            "time step must be finite and nonzero, got {dt}"
        )));
    }
    Ok(())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(DsError::ShapeMismatch { expected, found });
    }
    Ok(())
}

/// `u_{n+1} = E u + (E k1 + 2 E2 (k2 + k3) + k4)/6` with `E = e^{L dt}`,
/// `E2 = e^{L dt/2}`; exact on the linear part.
#[derive(Debug, Clone)]
pub struct IfRk4 {
    dt: f64,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl IfRk4 {
    pub fn new(symbol: &[Complex64], dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let n = symbol.len();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            dt,
            e: symbol.iter().map(|l| (l * dt).exp()).collect(),
            e2: symbol.iter().map(|l| (l * (dt / 2.0)).exp()).collect(),
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            tmp: zero,
        })
    }
}

impl Stepper for IfRk4 {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, t: f64, u: &mut [Complex64], rhs: &mut dyn NonlinearTerm) -> Result<()> {
        check_len(self.e.len(), u.len())?;
        let dt = self.dt;
        let [k1, k2, k3, k4] = &mut self.k;
        let (e, e2, tmp) = (&self.e, &self.e2, &mut self.tmp);

        rhs.eval(t, u, k1)?;
        k1.iter_mut().for_each(|v| *v *= dt);

        for m in 0..u.len() {
            tmp[m] = e2[m] * (u[m] + 0.5 * k1[m]);
        }
        rhs.eval(t + 0.5 * dt, tmp, k2)?;
        k2.iter_mut().for_each(|v| *v *= dt);

        for m in 0..u.len() {
            tmp[m] = e2[m] * u[m] + 0.5 * k2[m];
        }
        rhs.eval(t + 0.5 * dt, tmp, k3)?;
        k3.iter_mut().for_each(|v| *v *= dt);

        for m in 0..u.len() {
            tmp[m] = e[m] * u[m] + e2[m] * k3[m];
        }
        rhs.eval(t + dt, tmp, k4)?;
        k4.iter_mut().for_each(|v| *v *= dt);

        for m in 0..u.len() {
            u[m] = e[m] * u[m] + (e[m] * k1[m] + 2.0 * e2[m] * (k2[m] + k3[m]) + k4[m]) / 6.0;
        }
        Ok(())
    }
}

// Explicit tableau (RK4) and the implicit companion used on stiff modes. The
// companion shares b and c, is stiffly accurate with R(inf) = 0, and keeps
// |R(iy)| <= 1 on the imaginary axis; the pair is third order.
const C: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
const B: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
const A_EXPLICIT: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 0.0],
    [0.5, 0.0, 0.0, 0.0],
    [0.0, 0.5, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
];
const A_IMPLICIT: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.5, 0.0, 0.0],
    [0.5, -1.0, 1.0, 0.0],
    [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
];

/// Composite explicit/implicit Runge-Kutta, split mode by mode.
#[derive(Debug, Clone)]
pub struct CompositeRk {
    dt: f64,
    symbol: Vec<Complex64>,
    stiff: Vec<bool>,
    /// `1/(1 - dt a_ii L)` for stiff modes, stages 2..4.
    solve: [Vec<Complex64>; 3],
    /// Stage values `U_j` and nonlinear evaluations `N_j`.
    stage_u: [Vec<Complex64>; 4],
    stage_n: [Vec<Complex64>; 4],
}

impl CompositeRk {
    pub fn new(symbol: &[Complex64], dt: f64, stiff_threshold: f64) -> Result<Self> {
        check_dt(dt)?;
        if stiff_threshold.is_nan() || stiff_threshold < 0.0 {
            return Err(DsError::InvalidConfig(format!(
                "stiffness threshold must be non-negative, got {stiff_threshold}"
            )));
        }
        let n = symbol.len();
        let stiff: Vec<bool> = symbol
            .iter()
            .map(|l| (l * dt).norm() > stiff_threshold)
            .collect();
        let solve = [1usize, 2, 3].map(|i| {
            symbol
                .iter()
                .zip(&stiff)
                .map(|(l, &s)| {
                    if s {
                        1.0 / (1.0 - dt * A_IMPLICIT[i][i] * l)
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect()
        });
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            dt,
            symbol: symbol.to_vec(),
            stiff,
            solve,
            stage_u: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            stage_n: [zero.clone(), zero.clone(), zero.clone(), zero],
        })
    }

    pub fn stiff_count(&self) -> usize {
        self.stiff.iter().filter(|&&s| s).count()
    }
}

impl Stepper for CompositeRk {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, t: f64, u: &mut [Complex64], rhs: &mut dyn NonlinearTerm) -> Result<()> {
        check_len(self.symbol.len(), u.len())?;
        let dt = self.dt;
        for i in 0..4 {
            {
                let (done, rest) = self.stage_u.split_at_mut(i);
                let ui = &mut rest[0];
                for m in 0..u.len() {
                    if i == 0 {
                        ui[m] = u[m];
                        continue;
                    }
                    let l = self.symbol[m];
                    let (implicit, explicit) = if self.stiff[m] {
                        (&A_IMPLICIT[i], &A_EXPLICIT[i])
                    } else {
                        (&A_EXPLICIT[i], &A_EXPLICIT[i])
                    };
                    let mut acc = u[m];
                    for j in 0..i {
                        acc +=
                            dt * (explicit[j] * self.stage_n[j][m] + implicit[j] * l * done[j][m]);
                    }
                    ui[m] = if self.stiff[m] {
                        acc * self.solve[i - 1][m]
                    } else {
                        acc
                    };
                }
            }
            let (su, sn) = (&self.stage_u[i], &mut self.stage_n[i]);
            rhs.eval(t + C[i] * dt, su, sn)?;
        }
        for (m, (um, &l)) in u.iter_mut().zip(&self.symbol).enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, bj) in B.iter().enumerate() {
                acc += bj * (self.stage_n[j][m] + l * self.stage_u[j][m]);
            }
            *um += dt * acc;
        }
        Ok(())
    }
}

/// Builds the stepper selected by `scheme`.
pub fn make_stepper(
    scheme: Scheme,
    symbol: &[Complex64],
    dt: f64,
) -> Result<Box<dyn Stepper + Send>> {
    Ok(match scheme {
        Scheme::IfRk4 => Box::new(IfRk4::new(symbol, dt)?),
        Scheme::Composite { stiff_threshold } => {
            Box::new(CompositeRk::new(symbol, dt, stiff_threshold)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_rhs(_: f64, _: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        Ok(())
    }

    // u' = L u + i |u|^2 u conserves |u|, so u = u0 e^{(L + i|u0|^2) t}.
    fn cubic(_: f64, u: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        for (o, v) in out.iter_mut().zip(u) {
            *o = c(0.0, v.norm_sqr()) * v;
        }
        Ok(())
    }

    fn run(
        stepper: &mut dyn Stepper,
        u: &mut [Complex64],
        steps: usize,
        rhs: &mut dyn NonlinearTerm,
    ) {
        let mut t = 0.0;
        for _ in 0..steps {
            stepper.step(t, u, rhs).unwrap();
            t += stepper.dt();
        }
    }

    #[test]
    fn linear_part_is_exact_for_integrating_factor() {
        let symbol = vec![c(0.0, 3.0), c(0.0, -250.0), c(-1.0, 0.0)];
        let mut st = IfRk4::new(&symbol, 0.01).unwrap();
        let mut u = vec![c(1.0, 0.0); 3];
        run(&mut st, &mut u, 100, &mut zero_rhs);
        for (v, l) in u.iter().zip(&symbol) {
            assert!((v - l.exp()).norm() < 1e-13);
        }
    }

    #[test]
    fn composite_damps_stiff_modes_and_keeps_mild_ones_accurate() {
        let symbol = vec![c(0.0, 2.0), c(0.0, 5e4)];
        let mut st = CompositeRk::new(&symbol, 1e-3, 1.0).unwrap();
        assert_eq!(st.stiff_count(), 1);
        let mut u = vec![c(1.0, 0.0); 2];
        run(&mut st, &mut u, 1000, &mut zero_rhs);
        assert!((u[0] - c(0.0, 2.0).exp()).norm() < 1e-11);
        assert!(u[1].norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn implicit_companion_is_bounded_on_the_imaginary_axis() {
        for k in 0..2000 {
            let y = -500.0 + 0.5 * k as f64;
            let symbol = vec![c(0.0, y)];
            let mut st = CompositeRk::new(&symbol, 1.0, 0.0).unwrap();
            let mut u = vec![c(1.0, 0.0)];
            st.step(0.0, &mut u, &mut zero_rhs).unwrap();
            assert!(u[0].norm() <= 1.0 + 1e-12, "y = {y}: {}", u[0].norm());
        }
        let mut st = CompositeRk::new(&[c(0.0, 1e12)], 1.0, 0.0).unwrap();
        let mut u = vec![c(1.0, 0.0)];
        st.step(0.0, &mut u, &mut zero_rhs).unwrap();
        assert!(u[0].norm() < 1e-10);
    }

    fn observed_order(make: impl Fn(f64) -> Box<dyn Stepper>) -> f64 {
        let symbol_val = c(0.0, 1.5);
        let u0 = c(0.6, 0.3);
        let exact = u0 * (symbol_val + c(0.0, u0.norm_sqr())).exp();
        let err = |steps: usize| {
            let mut st = make(1.0 / steps as f64);
            let mut u = vec![u0];
            run(st.as_mut(), &mut u, steps, &mut cubic);
            (u[0] - exact).norm()
        };
        (err(40) / err(80)).log2()
    }

    #[test]
    fn integrating_factor_is_fourth_order() {
        let p = observed_order(|dt| Box::new(IfRk4::new(&[c(0.0, 1.5)], dt).unwrap()));
        assert!((p - 4.0).abs() < 0.2, "order {p}");
    }

    #[test]
    fn composite_orders() {
        let explicit = observed_order(|dt| {
            Box::new(CompositeRk::new(&[c(0.0, 1.5)], dt, f64::INFINITY).unwrap())
        });
        assert!((explicit - 4.0).abs() < 0.2, "explicit order {explicit}");
        let implicit =
            observed_order(|dt| Box::new(CompositeRk::new(&[c(0.0, 1.5)], dt, 0.0).unwrap()));
        assert!(implicit > 2.8, "implicit order {implicit}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(IfRk4::new(&[c(0.0, 1.0)], 0.0).is_err());
        assert!(IfRk4::new(&[c(0.0, 1.0)], f64::NAN).is_err());
        assert!(CompositeRk::new(&[c(0.0, 1.0)], 0.1, -1.0).is_err());
        let mut st = IfRk4::new(&[c(0.0, 1.0)], 0.1).unwrap();
        let mut u = vec![c(1.0, 0.0); 2];
        assert!(st.step(0.0, &mut u, &mut zero_rhs).is_err());
        assert_eq!(
            make_stepper(Scheme::default(), &[c(0.0, 1.0)], 0.1)
                .unwrap()
                .stages(),
            4
        );
    }
}
