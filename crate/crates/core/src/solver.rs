//! The DS II right-hand side and the time evolution driver.
//!
//! Solves
//!
//! ```text
//! i Psi_t + Psi_xx - Psi_yy + 2 rho (beta Phi + |Psi|^2) Psi = 0,
//! Phi_xx + Phi_yy + 2 (|Psi|^2)_xx = 0,
//! ```
//!
//! in the nonlocal form `Psi_t = L Psi + N(Psi)` on Fourier coefficients with
//!
//! ```text
//! L = -i (xi1^2 - xi2^2),
//! N = -2 i rho F[P Psi],   P = beta F^-1(cos(2 psi) F|Psi|^2) + (beta - 1)|Psi|^2.
//! ```
//!
//! `rho = 1` is the defocusing system: `y`-independent data reduce to
//! `i q_t + q_xx - 2 rho (2 beta - 1)|q|^2 q = 0` up to a spatially constant phase.

use std::time::{Duration, Instant};

use rustfft::num_complex::Complex64;

use crate::diagnostics::fourier_tail_ratio;
use crate::error::{DsError, Result};
use crate::regularizer::{
    classical_symbol, compute_moments, RegularizationTables, DEFAULT_TAYLOR_ORDER,
};
use crate::spectral::{
    dealias_mask, laplace_symbol_ds, Field, Grid, Space, Spectral, TransformCounts,
};
use crate::stepper::{make_stepper, NonlinearTerm, Scheme};

/// How the singular nonlocal multiplier is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Sample `cos(2 psi)` directly with the value 0 at the origin mode.
    Classical,
    /// Gaussian-windowed Taylor subtraction with closed-form corrections.
    #[default]
    Regularized,
}

impl std::str::FromStr for Method {
    type Err = DsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" => Ok(Method::Classical),
            "regularized" | "regularised" | "hybrid" => Ok(Method::Regularized),
            other => Err(DsError::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Classical => "classical",
            Method::Regularized => "regularized",
        })
    }
}

/// Parameters of a single evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// `+1` defocusing, `-1` focusing.
    pub rho: f64,
    pub beta: f64,
    pub method: Method,
    pub taylor_order: usize,
    /// Final time; negative values integrate backwards.
    pub tmax: f64,
    pub nt: usize,
    pub snapshot_times: Vec<f64>,
    pub scheme: Scheme,
    pub dealias: bool,
    /// Abort once `max |Psi_hat|` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    /// Warn when the outer Fourier band of the initial data exceeds this fraction of the peak.
    pub resolution_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            beta: 1.0,
            method: Method::Regularized,
            taylor_order: DEFAULT_TAYLOR_ORDER,
            tmax: 0.4,
            nt: 1000,
            snapshot_times: Vec::new(),
            scheme: Scheme::IfRk4,
            dealias: false,
            blowup_factor: 1e10,
            resolution_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DsError::InvalidConfig(msg));
        if self.rho != 1.0 && self.rho != -1.0 {
            return bad(format!("rho must be +1 or -1, got {}", self.rho));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.nt == 0 {
            return bad("nt must be at least 1".into());
        }
        if !self.tmax.is_finite() || self.tmax == 0.0 {
            return bad(format!(
                "tmax must be finite and nonzero, got {}",
                self.tmax
            ));
        }
        let (lo, hi) = if self.tmax > 0.0 {
            (0.0, self.tmax)
        } else {
            (self.tmax, 0.0)
        };
        if let Some(t) = self.snapshot_times.iter().find(|t| !(lo..=hi).contains(*t)) {
            return bad(format!("snapshot time {t} outside [{lo}, {hi}]"));
        }
        if self.blowup_factor.is_nan() || self.blowup_factor <= 1.0 {
            return bad(format!(
                "blow-up factor must exceed 1, got {}",
                self.blowup_factor
            ));
        }
        if self.method == Method::Regularized
            && !(1..=crate::regularizer::MAX_TAYLOR_ORDER).contains(&self.taylor_order)
        {
            return Err(DsError::OrderOutOfRange {
                order: self.taylor_order,
                min: 1,
                max: crate::regularizer::MAX_TAYLOR_ORDER,
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.tmax / self.nt as f64
    }
}

/// `-i (xi1^2 - xi2^2)` per mode.
pub fn linear_symbol(grid: &Grid) -> Vec<Complex64> {
    laplace_symbol_ds(grid)
        .into_iter()
        .map(|s| Complex64::new(0.0, -s))
        .collect()
}

enum Nonlocal {
    Classical(Vec<f64>),
    Regularized(Box<RegularizationTables>),
}

/// The nonlinear part `N(Psi_hat)` with its own transform plans and buffers.
pub struct DsOperator {
    grid: Grid,
    rho: f64,
    beta: f64,
    nonlocal: Nonlocal,
    taylor_order: usize,
    mask: Option<Vec<f64>>,
    spectral: Spectral,
    psi: Vec<Complex64>,
    density: Vec<f64>,
    work: Vec<Complex64>,
}

impl DsOperator {
    pub fn new(grid: Grid, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let nonlocal = match cfg.method {
            Method::Classical => Nonlocal::Classical(classical_symbol(&grid)),
            Method::Regularized => Nonlocal::Regularized(Box::new(RegularizationTables::new(
                &grid,
                cfg.taylor_order,
            )?)),
        };
        Ok(Self::assemble(grid, cfg, nonlocal))
    }

    /// Reuses prebuilt tables; they must match the grid and Taylor order.
    pub fn with_tables(cfg: &SolverConfig, tables: RegularizationTables) -> Result<Self> {
        cfg.validate()?;
        if tables.taylor_order() != cfg.taylor_order {
            return Err(DsError::TaylorOrderMismatch {
                moments: cfg.taylor_order,
                tables: tables.taylor_order(),
            });
        }
        let grid = *tables.grid();
        Ok(Self::assemble(
            grid,
            cfg,
            Nonlocal::Regularized(Box::new(tables)),
        ))
    }

    fn assemble(grid: Grid, cfg: &SolverConfig, nonlocal: Nonlocal) -> Self {
        let n = grid.len();
        Self {
            grid,
            rho: cfg.rho,
            beta: cfg.beta,
            nonlocal,
            taylor_order: cfg.taylor_order,
            mask: cfg.dealias.then(|| dealias_mask(&grid)),
            spectral: Spectral::new(grid),
            psi: vec![Complex64::new(0.0, 0.0); n],
            density: vec![0.0; n],
            work: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn transform_counts(&self) -> TransformCounts {
        self.spectral.counts()
    }

    /// `P = beta * nonlocal + (beta - 1)|Psi|^2` from Fourier coefficients; leaves
    /// `Psi` in `self.psi` and `P` in the real parts of `self.work`.
    fn potential(&mut self, u: &[Complex64]) -> Result<()> {
        if u.len() != self.grid.len() {
            return Err(DsError::ShapeMismatch {
                expected: self.grid.len(),
                found: u.len(),
            });
        }
        self.psi.copy_from_slice(u);
        self.spectral.inverse_in_place(&mut self.psi)?;
        for ((d, w), p) in self.density.iter_mut().zip(&mut self.work).zip(&self.psi) {
            *d = p.norm_sqr();
            *w = Complex64::new(*d, 0.0);
        }
        self.spectral.forward_in_place(&mut self.work)?;
        match &self.nonlocal {
            Nonlocal::Classical(symbol) => {
                for (w, s) in self.work.iter_mut().zip(symbol) {
                    *w *= *s;
                }
                self.spectral.inverse_in_place(&mut self.work)?;
            }
            Nonlocal::Regularized(tables) => {
                let moments = compute_moments(&self.density, &self.grid, self.taylor_order)?;
                tables.apply_in_place(&mut self.work, &moments, &mut self.spectral)?;
            }
        }
        let (b, b1) = (self.beta, self.beta - 1.0);
        for (w, d) in self.work.iter_mut().zip(&self.density) {
            *w = Complex64::new(b * w.re + b1 * d, 0.0);
        }
        Ok(())
    }

    /// The potential `P` in physical space for the given coefficients.
    pub fn potential_field(&mut self, psi_hat: &Field) -> Result<Field> {
        psi_hat.expect_space(Space::Fourier)?;
        self.potential(psi_hat.values())?;
        Field::from_values(self.grid, Space::Physical, self.work.clone())
    }

    /// `N(Psi_hat)` as a Fourier-space field.
    pub fn nonlinear_rhs(&mut self, psi_hat: &Field) -> Result<Field> {
        psi_hat.expect_space(Space::Fourier)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.eval(0.0, psi_hat.values(), &mut out)?;
        Field::from_values(self.grid, Space::Fourier, out)
    }
}

impl NonlinearTerm for DsOperator {
    fn eval(&mut self, _t: f64, u: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.potential(u)?;
        for ((o, w), p) in out.iter_mut().zip(&self.work).zip(&self.psi) {
            *o = w.re * p;
        }
        self.spectral.forward_in_place(out)?;
        let factor = Complex64::new(0.0, -2.0 * self.rho);
        match &self.mask {
            Some(mask) => {
                for (o, m) in out.iter_mut().zip(mask) {
                    *o *= factor * m;
                }
            }
            None => out.iter_mut().for_each(|o| *o *= factor),
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    BlowUp { time: f64, max_abs: f64 },
    NonFinite { time: f64 },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Requested time.
    pub requested: f64,
    /// Step boundary the snapshot was taken at.
    pub time: f64,
    pub field: Field,
}

/// Everything produced by [`evolve`]. On blow-up `final_field` is the last good state.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub final_time: f64,
    pub final_field: Field,
    pub snapshots: Vec<Snapshot>,
    /// `(t, ||Psi||_2)` after every step, starting at `t = 0`.
    pub norms: Vec<(f64, f64)>,
    pub steps_taken: usize,
    pub transforms: TransformCounts,
    pub transforms_per_step: u64,
    pub warnings: Vec<String>,
    pub setup_time: Duration,
    pub run_time: Duration,
}

impl RunResult {
    pub fn relative_norm_drift(&self) -> f64 {
        let n0 = self.norms.first().map_or(0.0, |n| n.1);
        let worst = self
            .norms
            .iter()
            .map(|n| (n.1 - n0).abs())
            .fold(0.0, f64::max);
        if n0 > 0.0 {
            worst / n0
        } else {
            worst
        }
    }
}

fn coefficient_norm(grid: &Grid, u: &[Complex64]) -> f64 {
    (u.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.mode_area()).sqrt()
}

/// Runs `psi0` from `t = 0` to `cfg.tmax` in `cfg.nt` fixed steps.
pub fn evolve(psi0: &Field, cfg: &SolverConfig) -> Result<RunResult> {
    let setup = Instant::now();
    psi0.expect_space(Space::Physical)?;
    let grid = *psi0.grid();
    let op = DsOperator::new(grid, cfg)?;
    evolve_with(psi0, cfg, op, setup)
}

/// [`evolve`] with a caller-supplied operator (for sharing tables between runs).
pub fn evolve_with_operator(psi0: &Field, cfg: &SolverConfig, op: DsOperator) -> Result<RunResult> {
    psi0.expect_space(Space::Physical)?;
    if op.grid() != psi0.grid() {
        return Err(DsError::InvalidGrid(format!(
            "operator grid {} differs from data grid {}",
            op.grid(),
            psi0.grid()
        )));
    }
    evolve_with(psi0, cfg, op, Instant::now())
}

fn evolve_with(
    psi0: &Field,
    cfg: &SolverConfig,
    mut op: DsOperator,
    setup: Instant,
) -> Result<RunResult> {
    cfg.validate()?;
    let grid = *psi0.grid();
    let mut spectral = Spectral::new(grid);
    let mut u = spectral.forward_ft(psi0)?.into_values();

    let mut warnings = Vec::new();
    let tail = fourier_tail_ratio(&grid, &u);
    if tail > cfg.resolution_tol {
        let msg = format!(
            "initial data under-resolved: outer Fourier band at {tail:.2e} of peak (threshold {:.0e})",
            cfg.resolution_tol
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let dt = cfg.dt();
    let mut stepper = make_stepper(cfg.scheme, &linear_symbol(&grid), dt)?;
    let mut snapshot_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|&t| (((t / dt).round().max(0.0) as usize).min(cfg.nt), t))
        .collect();
    snapshot_steps.sort_by_key(|s| s.0);

    let setup_time = setup.elapsed();
    let start = Instant::now();
    let counts0 = op.transform_counts();

    let peak0 = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let limit = cfg.blowup_factor * peak0.max(f64::MIN_POSITIVE);
    let mut norms = Vec::with_capacity(cfg.nt + 1);
    norms.push((0.0, coefficient_norm(&grid, &u)));
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut next_snapshot = 0;
    let mut take_snapshots =
        |step: usize, t: f64, u: &[Complex64], sp: &mut Spectral| -> Result<()> {
            while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot].0 == step {
                let mut values = u.to_vec();
                sp.inverse_in_place(&mut values)?;
                snapshots.push(Snapshot {
                    requested: snapshot_steps[next_snapshot].1,
                    time: t,
                    field: Field::from_values(grid, Space::Physical, values)?,
                });
                next_snapshot += 1;
            }
            Ok(())
        };
    take_snapshots(0, 0.0, &u, &mut spectral)?;

    let mut status = RunStatus::Completed;
    let mut last_good = u.clone();
    let mut steps_taken = 0;
    let mut t = 0.0;
    for step in 1..=cfg.nt {
        let t_next = step as f64 * dt;
        match stepper.step(t, &mut u, &mut op) {
            Ok(()) => {}
            Err(e) => return Err(e),
        }
        let mut peak = 0.0f64;
        let mut finite = true;
        for v in &u {
            let a = v.norm();
            if !a.is_finite() {
                finite = false;
                break;
            }
            peak = peak.max(a);
        }
        if !finite {
            status = RunStatus::NonFinite { time: t_next };
            break;
        }
        if peak > limit {
            status = RunStatus::BlowUp {
                time: t_next,
                max_abs: peak,
            };
            break;
        }
        t = t_next;
        steps_taken = step;
        norms.push((t, coefficient_norm(&grid, &u)));
        take_snapshots(step, t, &u, &mut spectral)?;
        last_good.copy_from_slice(&u);
    }
    if !status.is_completed() {
        log::warn!("run stopped early: {status:?}; last good time {t}");
    }

    let transforms = op.transform_counts() - counts0;
    let transforms_per_step = if steps_taken > 0 {
        transforms.total() / steps_taken as u64
    } else {
        0
    };
    spectral.inverse_in_place(&mut last_good)?;
    Ok(RunResult {
        status,
        final_time: t,
        final_field: Field::from_values(grid, Space::Physical, last_good)?,
        snapshots,
        norms,
        steps_taken,
        transforms,
        transforms_per_step,
        warnings,
        setup_time,
        run_time: start.elapsed(),
    })
}
