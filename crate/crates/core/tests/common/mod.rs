#![allow(dead_code)]

use std::f64::consts::PI;

use dsii_core::Complex64;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    for k in 0..8 {
        let x = GK_NODES[k];
        let v = if x == 0.0 {
            f(c)
        } else {
            f(c - h * x) + f(c + h * x)
        };
        kron += v * GK_WEIGHTS[k];
        if k % 2 == 1 {
            gauss += v * G_WEIGHTS[k / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss-Kronrod (7/15) integral of a complex function on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    let mut stack = vec![(a, b, tol)];
    let mut total = Complex64::new(0.0, 0.0);
    while let Some((lo, hi, t)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= t || hi - lo < 1e-9 * (b - a) {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t));
            stack.push((mid, hi, 0.5 * t));
        }
    }
    total
}

/// Trapezoidal rule over a full period, refined until successive values agree.
pub fn integrate_periodic(f: impl Fn(f64) -> Complex64, tol: f64) -> Complex64 {
    let mut n = 16usize;
    let sum = |n: usize| -> Complex64 {
        let h = 2.0 * PI / n as f64;
        (0..n).map(|k| f(k as f64 * h)).sum::<Complex64>() * h
    };
    let mut prev = sum(n);
    loop {
        n *= 2;
        let next = sum(n);
        if (next - prev).norm() <= tol || n >= 1 << 16 {
            return next;
        }
        prev = next;
    }
}

/// `F^-1(cos(2 psi) S)(x, y)` from the defining integral in polar coordinates
/// around the singular point: `1/(2 pi) \int\int cos(2 phi) S e^{i rho (x cos + y sin)} rho`.
pub fn nonlocal_by_quadrature(
    s_hat: impl Fn(f64, f64) -> Complex64,
    x: f64,
    y: f64,
    rho_max: f64,
    tol: f64,
) -> Complex64 {
    let radial = |rho: f64| {
        if rho == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        integrate_periodic(
            |phi: f64| {
                let (s, c) = phi.sin_cos();
                let arg = rho * (x * c + y * s);
                Complex64::new(0.0, arg).exp() * (s_hat(rho * c, rho * s) * (2.0 * phi).cos())
            },
            tol * 1e-2,
        ) * rho
    };
    integrate(radial, 0.0, rho_max, tol) / (2.0 * PI)
}

/// Fourier transform of `exp(-(a u^2 + 2 b u v + c v^2))`, `(u, v) = (x - x0, y - y0)`.
pub fn gaussian_hat(a: f64, b: f64, c: f64, x0: f64, y0: f64) -> impl Fn(f64, f64) -> Complex64 {
    let det = a * c - b * b;
    move |k1: f64, k2: f64| {
        let q = (c * k1 * k1 - 2.0 * b * k1 * k2 + a * k2 * k2) / det;
        Complex64::new(-(q / 4.0), -(k1 * x0 + k2 * y0)).exp() / (2.0 * det.sqrt())
    }
}
