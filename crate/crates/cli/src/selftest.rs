//! Quick invariant checks that run in a few seconds.

use std::f64::consts::PI;

use anyhow::Result;
use dsii_core::regularizer::{w_conj_value, w_value};
use dsii_core::solver::linear_symbol;
use dsii_core::theta::{theta_auto, DEFAULT_THETA_TOL};
use dsii_core::{
    compute_moments, evolve, l2_norm, linf_error, Complex64, Field, Grid, Method, RiemannMatrix,
    SolverConfig, Spectral,
};

use crate::commands::one_dimensional_deviation;

type Check = fn() -> Result<(f64, f64)>;

fn round_trip() -> Result<(f64, f64)> {
    let g = Grid::new(64, 32, 2.0, 1.5)?;
    let f = Field::from_fn(g, |x, y| {
        Complex64::new((x * y).sin(), (-(x * x)).exp() * y.cos())
    });
    let mut sp = Spectral::new(g);
    let hat = sp.forward_ft(&f)?;
    Ok((linf_error(&sp.inverse_ft(&hat)?, &f)?, 1e-14))
}

fn gaussian_norm() -> Result<(f64, f64)> {
    let g = Grid::square(128, 2.0)?;
    let norm = l2_norm(&dsii_core::initial::gaussian(&g));
    Ok(((norm - (PI / 2.0).sqrt()).abs(), 1e-12))
}

fn gaussian_moments() -> Result<(f64, f64)> {
    let g = Grid::square(128, 2.0)?;
    let rho: Vec<f64> = g.map_indices(|i, j| (-2.0 * g.z(i, j).norm_sqr()).exp());
    let m = compute_moments(&rho, &g, 4)?;
    let dev = (m.dbar_moments[0] - 0.25).norm()
        + m.dbar_moments[1..].iter().map(|v| v.norm()).sum::<f64>();
    Ok((dev, 1e-13))
}

fn closed_form_symmetry() -> Result<(f64, f64)> {
    let mut worst = 0.0f64;
    for m in 0..6 {
        for z in [Complex64::new(0.3, -1.2), Complex64::new(4.0, 2.5)] {
            // conj family: W_m(conj z) = (-1)^{m+1} conj W_m(z)
            let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
            worst = worst.max((w_conj_value(m, z) - sign * w_value(m, z).conj()).norm());
        }
    }
    Ok((worst, 1e-15))
}

fn theta_quasi_periodicity() -> Result<(f64, f64)> {
    let b = RiemannMatrix::from_rows(&[
        vec![Complex64::new(-3.0, 0.5), Complex64::new(0.4, 0.1)],
        vec![Complex64::new(0.4, 0.1), Complex64::new(-2.5, -0.3)],
    ])?;
    let z = [Complex64::new(0.2, 0.7), Complex64::new(-0.3, 1.9)];
    let base = theta_auto(&z, &b, DEFAULT_THETA_TOL)?.value;
    let zb = [z[0] + b.get(0, 0), z[1] + b.get(1, 0)];
    let shifted = theta_auto(&zb, &b, DEFAULT_THETA_TOL)?.value;
    let expect = (-b.get(0, 0) / 2.0 - z[0]).exp() * base;
    Ok(((shifted - expect).norm() / expect.norm(), 1e-12))
}

fn transform_parity() -> Result<(f64, f64)> {
    let g = Grid::square(32, 1.65)?;
    let psi0 = dsii_core::initial::gaussian(&g);
    let per_step = |method| -> Result<u64> {
        let cfg = SolverConfig {
            method,
            tmax: 0.01,
            nt: 2,
            ..SolverConfig::default()
        };
        Ok(evolve(&psi0, &cfg)?.transforms_per_step)
    };
    let (a, b) = (per_step(Method::Classical)?, per_step(Method::Regularized)?);
    Ok(((a as f64 - b as f64).abs(), 0.0))
}

fn linear_limit() -> Result<(f64, f64)> {
    let g = Grid::square(64, 2.6)?;
    let psi0 = Field::from_real_fn(g, |x, y| 1e-8 * (-(x * x + y * y)).exp());
    let cfg = SolverConfig {
        tmax: 0.5,
        nt: 50,
        ..SolverConfig::default()
    };
    let res = evolve(&psi0, &cfg)?;
    let mut sp = Spectral::new(g);
    let mut hat = sp.forward_ft(&psi0)?;
    for (v, l) in hat.values_mut().iter_mut().zip(linear_symbol(&g)) {
        *v *= (l * 0.5).exp();
    }
    Ok((linf_error(&res.final_field, &sp.inverse_ft(&hat)?)?, 1e-18))
}

fn reduction_1d() -> Result<(f64, f64)> {
    Ok((
        one_dimensional_deviation(128, 3.0, 0.2, 200, 1.0, 1.0)?,
        1e-10,
    ))
}

fn norm_conservation() -> Result<(f64, f64)> {
    let g = Grid::square(64, 2.6)?;
    let cfg = SolverConfig {
        tmax: 0.2,
        nt: 200,
        ..SolverConfig::default()
    };
    let res = evolve(&dsii_core::initial::asymmetric_gaussian(&g), &cfg)?;
    Ok((res.relative_norm_drift(), 1e-12))
}

pub fn run() -> Result<bool> {
    let checks: [(&str, Check); 9] = [
        ("transform round trip", round_trip),
        ("Gaussian L2 norm", gaussian_norm),
        ("Gaussian moments", gaussian_moments),
        ("closed-form conjugate family", closed_form_symmetry),
        ("theta quasi-periodicity", theta_quasi_periodicity),
        ("transform budget parity", transform_parity),
        ("linear limit", linear_limit),
        ("1D NLS reduction", reduction_1d),
        ("L2 conservation", norm_conservation),
    ];
    let mut all = true;
    for (name, check) in checks {
        let (ok, detail) = match check() {
            Ok((value, tol)) => (value <= tol, format!("{value:.2e} (tol {tol:.0e})")),
            Err(e) => (false, format!("error: {e:#}")),
        };
        all &= ok;
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(all)
}
