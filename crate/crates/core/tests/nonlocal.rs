mod common;

use common::{gaussian_hat, nonlocal_by_quadrature};
use dsii_core::regularizer::{classical_symbol, w_conj_value, w_value};
use dsii_core::{
    compute_moments, regularized_nonlocal, Complex64, Field, Grid, MomentSet, RegularizationTables,
    Space, Spectral,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn density(grid: &Grid, a: f64, b: f64, c: f64, x0: f64, y0: f64) -> Vec<f64> {
    grid.map_indices(|i, j| {
        let (x, y) = (grid.x(i) - x0, grid.y(j) - y0);
        (-(a * x * x + 2.0 * b * x * y + c * y * y)).exp()
    })
}

fn regularized(grid: &Grid, rho: &[f64], order: usize) -> Field {
    let mut sp = Spectral::new(*grid);
    let tables = RegularizationTables::new(grid, order).unwrap();
    let moments = compute_moments(rho, grid, order).unwrap();
    let s = Field::from_values(
        *grid,
        Space::Physical,
        rho.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
    )
    .unwrap();
    let s_hat = sp.forward_ft(&s).unwrap();
    regularized_nonlocal(&s_hat, &moments, &tables, &mut sp).unwrap()
}

fn random_nodes(grid: &Grid, seed: u64, count: usize, radius: f64) -> Vec<(usize, usize)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let i = rng.random_range(0..grid.nx());
        let j = rng.random_range(0..grid.ny());
        if grid.z(i, j).norm() <= radius {
            out.push((i, j));
        }
    }
    out
}

#[test]
fn radial_gaussian_matches_quadrature() {
    let grid = Grid::square(128, 3.0).unwrap();
    let rho = density(&grid, 2.0, 0.0, 2.0, 0.0, 0.0);
    let out = regularized(&grid, &rho, 10);
    let hat = gaussian_hat(2.0, 0.0, 2.0, 0.0, 0.0);
    let mut worst = 0.0f64;
    for (i, j) in random_nodes(&grid, 7, 10, 6.0) {
        let z = grid.z(i, j);
        let oracle = nonlocal_by_quadrature(&hat, z.re, z.im, 20.0, 1e-13);
        worst = worst.max((out.get(i, j) - oracle).norm());
        // closed form: -cos(2 theta) [(1 - e^{-2r^2})/(2r^2) - e^{-2r^2}]
        let r2 = z.norm_sqr();
        let exact = if r2 == 0.0 {
            0.0
        } else {
            -(z.re * z.re - z.im * z.im) / r2
                * ((1.0 - (-2.0 * r2).exp()) / (2.0 * r2) - (-2.0 * r2).exp())
        };
        assert!((oracle.re - exact).abs() < 1e-11, "oracle drifted at {z}");
    }
    assert!(worst < 1e-9, "max deviation {worst:e}");
    assert!(out.max_imag() < 1e-13);
}

#[test]
fn skewed_gaussian_matches_quadrature_and_improves_with_order() {
    let grid = Grid::square(256, 3.0).unwrap();
    let (a, b, c, x0, y0) = (2.0, 1.0, 4.0, 0.3, -0.2);
    let rho = density(&grid, a, b, c, x0, y0);
    let hat = gaussian_hat(a, b, c, x0, y0);
    let nodes = random_nodes(&grid, 11, 10, 5.0);
    let oracle: Vec<Complex64> = nodes
        .iter()
        .map(|&(i, j)| {
            let z = grid.z(i, j);
            nonlocal_by_quadrature(&hat, z.re, z.im, 30.0, 1e-13)
        })
        .collect();
    let deviation = |order: usize| {
        let out = regularized(&grid, &rho, order);
        nodes
            .iter()
            .zip(&oracle)
            .map(|(&(i, j), o)| (out.get(i, j) - o).norm())
            .fold(0.0, f64::max)
    };
    let devs: Vec<f64> = (1..=10).map(deviation).collect();
    for w in devs.windows(2) {
        assert!(w[1] < w[0] || w[1] < 1e-12, "deviations {devs:?}");
    }
    assert!(devs[9] < 1e-9, "deviations {devs:?}");

    let mut sp = Spectral::new(grid);
    let s = Field::from_values(
        grid,
        Space::Physical,
        rho.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
    )
    .unwrap();
    let s_hat = sp.forward_ft(&s).unwrap();
    let sym = classical_symbol(&grid);
    let classical = sp
        .inverse_ft(&dsii_core::classical_nonlocal(&s_hat, &sym).unwrap())
        .unwrap();
    let classical_dev = nodes
        .iter()
        .zip(&oracle)
        .map(|(&(i, j), o)| (classical.get(i, j) - o).norm())
        .fold(0.0, f64::max);
    assert!(classical_dev > 1e3 * devs[9], "classical {classical_dev:e}");
}

#[test]
fn gaussian_window_is_handled_exactly() {
    // rho = e^{-|z|^2/4}/2 has transform e^{-|xi|^2}; the Taylor residual vanishes.
    let grid = Grid::square(256, 5.0).unwrap();
    let rho: Vec<f64> = grid.map_indices(|i, j| 0.5 * (-grid.z(i, j).norm_sqr() / 4.0).exp());
    let out = regularized(&grid, &rho, 4);
    let mut worst = 0.0f64;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let z = grid.z(i, j);
            let expect = 0.5 * (w_value(1, z) + w_conj_value(1, z));
            worst = worst.max((out.get(i, j) - expect).norm());
        }
    }
    assert!(worst < 1e-13, "{worst:e}");
}

#[test]
fn vanishing_moments_reduce_to_classical() {
    let grid = Grid::square(64, 2.0).unwrap();
    let order = 5;
    // Re(z^6) e^{-|z|^2}: every moment up to order 5 is zero
    let s = Field::from_real_fn(grid, |x, y| {
        Complex64::new(x, y).powi(6).re * (-(x * x + y * y)).exp()
    });
    let rho: Vec<f64> = s.values().iter().map(|v| v.re).collect();
    let moments = compute_moments(&rho, &grid, order).unwrap();
    for m in &moments.dbar_moments {
        assert!(m.norm() < 1e-10, "{m}");
    }
    let mut sp = Spectral::new(grid);
    let s_hat = sp.forward_ft(&s).unwrap();
    let tables = RegularizationTables::new(&grid, order).unwrap();
    let reg = regularized_nonlocal(&s_hat, &moments, &tables, &mut sp).unwrap();
    let reg_zero =
        regularized_nonlocal(&s_hat, &MomentSet::zeros(order), &tables, &mut sp).unwrap();
    let classical = sp
        .inverse_ft(&dsii_core::classical_nonlocal(&s_hat, tables.classical_symbol()).unwrap())
        .unwrap();
    for k in 0..grid.len() {
        assert!((reg.values()[k] - classical.values()[k]).norm() < 1e-10);
        assert!((reg_zero.values()[k] - classical.values()[k]).norm() < 1e-15);
    }
}
