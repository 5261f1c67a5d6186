//! Norms, Fourier-decay summaries, cross-grid comparison and convergence sweeps.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rustfft::num_complex::Complex64;

use crate::error::{DsError, Result};
use crate::solver::{evolve, Method, RunResult, RunStatus, SolverConfig};
use crate::spectral::{Field, Grid, Space, Spectral};

/// `||f||_2` by the trapezoidal rule on the periodic grid.
pub fn l2_norm(f: &Field) -> f64 {
    let sum: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
    let weight = match f.space() {
        Space::Physical => f.grid().cell_area(),
        Space::Fourier => f.grid().mode_area(),
    };
    (sum * weight).sqrt()
}

/// `max |f - g|` over matching grids and spaces.
pub fn linf_error(f: &Field, g: &Field) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(DsError::InvalidGrid(format!(
            "cannot compare fields on {} and {}",
            f.grid(),
            g.grid()
        )));
    }
    g.expect_space(f.space())?;
    Ok(f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// Largest coefficient in one band of normalized wavenumber `r`, where
/// `r = max(|kx|/(nx/2), |ky|/(ny/2))` runs from 0 to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub r_min: f64,
    pub r_max: f64,
    pub max_abs: f64,
    pub relative: f64,
}

/// Per-shell maxima of `|f_hat|`: the mean mode, dyadic shells `(2^-j-1, 2^-j]`
/// down to a single mode, and the outer band `r >= 7/8`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub peak: f64,
    pub shells: Vec<Shell>,
    pub tail: Shell,
}

pub const TAIL_BAND: f64 = 0.875;

fn normalized_radius(grid: &Grid, i: usize, j: usize) -> f64 {
    let kx = Grid::signed_mode(i, grid.nx()).unsigned_abs() as f64 / (grid.nx() / 2) as f64;
    let ky = Grid::signed_mode(j, grid.ny()).unsigned_abs() as f64 / (grid.ny() / 2) as f64;
    kx.max(ky)
}

pub fn fourier_decay_report(f_hat: &Field) -> Result<DecayReport> {
    f_hat.expect_space(Space::Fourier)?;
    let grid = *f_hat.grid();
    let half = (grid.nx().max(grid.ny()) / 2) as f64;
    let levels = half.log2().round() as usize;
    // edges 0, 1/half, 2/half, 4/half, ..., 1
    let mut edges = vec![0.0];
    for j in (0..=levels).rev() {
        edges.push(1.0 / 2f64.powi(j as i32));
    }
    let mut maxima = vec![0.0f64; edges.len()];
    let mut tail = 0.0f64;
    let mut peak = 0.0f64;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let a = f_hat.values()[grid.index(i, j)].norm();
            let r = normalized_radius(&grid, i, j);
            peak = peak.max(a);
            if r >= TAIL_BAND {
                tail = tail.max(a);
            }
            let shell = if r == 0.0 {
                0
            } else {
                edges
                    .iter()
                    .position(|&e| e >= r - 1e-12)
                    .unwrap_or(edges.len() - 1)
            };
            maxima[shell] = maxima[shell].max(a);
        }
    }
    let rel = |m: f64| if peak > 0.0 { m / peak } else { 0.0 };
    let shells = (0..edges.len())
        .map(|s| Shell {
            r_min: if s == 0 { 0.0 } else { edges[s - 1] },
            r_max: edges[s],
            max_abs: maxima[s],
            relative: rel(maxima[s]),
        })
        .collect();
    Ok(DecayReport {
        peak,
        shells,
        tail: Shell {
            r_min: TAIL_BAND,
            r_max: 1.0,
            max_abs: tail,
            relative: rel(tail),
        },
    })
}

/// Outer-band maximum relative to the peak, for raw FFT-ordered coefficients.
pub fn fourier_tail_ratio(grid: &Grid, coeffs: &[Complex64]) -> f64 {
    let mut peak = 0.0f64;
    let mut tail = 0.0f64;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let a = coeffs[grid.index(i, j)].norm();
            peak = peak.max(a);
            if normalized_radius(grid, i, j) >= TAIL_BAND {
                tail = tail.max(a);
            }
        }
    }
    if peak > 0.0 {
        tail / peak
    } else {
        0.0
    }
}

// e^{i k x / l} for every signed mode k, with the Nyquist mode replaced by its
// symmetric (cosine) part so the interpolant is real for real data.
fn mode_row(n: usize, l: f64, x: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let k = Grid::signed_mode(i, n);
            let phase = k as f64 * x / l;
            if k == -(n as i64 / 2) {
                Complex64::new(phase.cos(), 0.0)
            } else {
                Complex64::new(0.0, phase).exp()
            }
        })
        .collect()
}

/// Evaluates the trigonometric interpolant of `f` at the nodes of `target`.
pub fn interpolate_to(f: &Field, target: &Grid) -> Result<Field> {
    f.expect_space(Space::Physical)?;
    let src = *f.grid();
    let mut sp = Spectral::new(src);
    let hat = sp.forward_ft(f)?;
    let (nxs, nys) = (src.nx(), src.ny());
    let scale = 1.0 / (2.0 * PI * src.lx() * src.ly());

    // partial[i][m] = sum_k hat[k][m] e^{i xi1_k x_i}
    let mut partial = vec![Complex64::new(0.0, 0.0); target.nx() * nys];
    for i in 0..target.nx() {
        let row = mode_row(nxs, src.lx(), target.x(i));
        let out = &mut partial[i * nys..(i + 1) * nys];
        for (k, e) in row.iter().enumerate() {
            let h = &hat.values()[k * nys..(k + 1) * nys];
            for (o, v) in out.iter_mut().zip(h) {
                *o += e * v;
            }
        }
    }
    let cols: Vec<Vec<Complex64>> = (0..target.ny())
        .map(|j| mode_row(nys, src.ly(), target.y(j)))
        .collect();
    let values = target.map_indices(|i, j| {
        let p = &partial[i * nys..(i + 1) * nys];
        p.iter()
            .zip(&cols[j])
            .map(|(a, b)| a * b)
            .sum::<Complex64>()
            * scale
    });
    Field::from_values(*target, Space::Physical, values)
}

/// `max |coarse - I(fine)|` on the coarse nodes.
pub fn cross_grid_error(coarse: &Field, fine: &Field) -> Result<f64> {
    let interp = interpolate_to(fine, coarse.grid())?;
    linf_error(coarse, &interp)
}

/// Observed convergence behaviour of an error sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayClass {
    /// Errors fall by at least [`SPECTRAL_DECADES`] decades per doubling on average.
    Spectral { decades_per_doubling: f64 },
    /// Slower decay; `floor` is the smallest error seen.
    Saturating {
        decades_per_doubling: f64,
        floor: f64,
    },
}

pub const SPECTRAL_DECADES: f64 = 1.5;

impl DecayClass {
    pub fn decades_per_doubling(&self) -> f64 {
        match *self {
            DecayClass::Spectral {
                decades_per_doubling,
            }
            | DecayClass::Saturating {
                decades_per_doubling,
                ..
            } => decades_per_doubling,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DecayClass::Spectral { .. } => "spectral",
            DecayClass::Saturating { .. } => "saturating",
        }
    }
}

/// Classifies errors listed in order of successive grid doublings.
pub fn classify(errors: &[f64]) -> DecayClass {
    let floor = errors.iter().copied().fold(f64::INFINITY, f64::min);
    if errors.len() < 2 {
        return DecayClass::Saturating {
            decades_per_doubling: 0.0,
            floor,
        };
    }
    let lg = |e: f64| e.max(1e-300).log10();
    let rate = (lg(errors[0]) - lg(errors[errors.len() - 1])) / (errors.len() - 1) as f64;
    if rate >= SPECTRAL_DECADES {
        DecayClass::Spectral {
            decades_per_doubling: rate,
        }
    } else {
        DecayClass::Saturating {
            decades_per_doubling: rate,
            floor,
        }
    }
}

/// One level of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub n: usize,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub levels: Vec<Level>,
    pub reference: Level,
    pub reference_method: Method,
    pub methods: Vec<Method>,
}

impl SweepSpec {
    /// Reference level one doubling past the last, with `L` continued geometrically.
    pub fn extrapolated_reference(levels: &[Level]) -> Result<Level> {
        match levels {
            [.., prev, last] => Ok(Level {
                n: last.n * 2,
                l: last.l * last.l / prev.l,
            }),
            _ => Err(DsError::InvalidConfig(
                "at least two levels are needed to extrapolate the reference".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub l: f64,
    pub error: f64,
    pub norm_drift: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub method: Method,
    pub rows: Vec<SweepRow>,
    pub class: DecayClass,
}

struct Job {
    level: Level,
    method: Method,
}

/// Runs every `(level, method)` pair plus the reference, `jobs` at a time, and
/// tabulates the maximum deviation of each final field from the reference.
pub fn convergence_sweep(
    template: &SolverConfig,
    spec: &SweepSpec,
    initial: &(dyn Fn(&Grid) -> Result<Field> + Sync),
    jobs: usize,
) -> Result<Vec<SweepTable>> {
    let mut work = vec![Job {
        level: spec.reference,
        method: spec.reference_method,
    }];
    for &method in &spec.methods {
        for &level in &spec.levels {
            work.push(Job { level, method });
        }
    }
    // largest grids first keeps the pool busy
    let mut order: Vec<usize> = (0..work.len()).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(work[k].level.n));

    let results: Vec<Mutex<Option<Result<RunResult>>>> =
        work.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let run = |job: &Job| -> Result<RunResult> {
        let grid = Grid::square(job.level.n, job.level.l)?;
        let psi0 = initial(&grid)?;
        let cfg = SolverConfig {
            method: job.method,
            snapshot_times: Vec::new(),
            ..template.clone()
        };
        let res = evolve(&psi0, &cfg)?;
        if let RunStatus::BlowUp { time, max_abs } = res.status {
            return Err(DsError::BlowUp { time, max_abs });
        }
        if let RunStatus::NonFinite { time } = res.status {
            return Err(DsError::NonFinite { time });
        }
        log::info!(
            "{} N={} L={} done in {:.1?}",
            job.method,
            job.level.n,
            job.level.l,
            res.run_time
        );
        Ok(res)
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(work.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= order.len() {
                    break;
                }
                let idx = order[k];
                let res = run(&work[idx]);
                *results[idx].lock().unwrap() = Some(res);
            });
        }
    });
    let mut results: Vec<RunResult> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job runs"))
        .collect::<Result<_>>()?;

    let reference = results.remove(0);
    let mut tables = Vec::new();
    let mut it = results.into_iter();
    for &method in &spec.methods {
        let mut rows = Vec::new();
        for &level in &spec.levels {
            let res = it.next().expect("one result per job");
            rows.push(SweepRow {
                n: level.n,
                l: level.l,
                error: cross_grid_error(&res.final_field, &reference.final_field)?,
                norm_drift: res.relative_norm_drift(),
                seconds: (res.setup_time + res.run_time).as_secs_f64(),
            });
        }
        let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
        tables.push(SweepTable {
            method,
            class: classify(&errors),
            rows,
        });
    }
    Ok(tables)
}
