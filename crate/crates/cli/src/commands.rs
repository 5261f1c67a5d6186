use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dsii_core::field_io;
use dsii_core::nls1d::{evolve_1d, nodes_1d};
use dsii_core::theta::{check_periodicity, ds_residual, eval_on_grid, ThetaSurfaceData};
use dsii_core::{
    convergence_sweep, evolve, Complex64, DsError, Field, Grid, Level, Method, RunStatus,
    SolverConfig, SweepSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::settings::{initial_field, parse_rho, EvolveArgs, SweepArgs};

/// Exit status of a command that ran to the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    BlowUp,
    CheckFailed,
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn versions() -> serde_json::Value {
    json!({
        "dsii": env!("CARGO_PKG_VERSION"),
        "field_format": field_io::VERSION,
    })
}

pub fn evolve_cmd(args: EvolveArgs) -> Result<Outcome> {
    let plan = args.resolve()?;
    let grid = Grid::new(plan.nx, plan.ny, plan.lx, plan.ly)?;
    let psi0 = initial_field(&plan.initial, &grid)?;
    prepare_dir(&plan.out)?;
    log::info!("evolving {} on {grid} to t = {}", plan.initial, plan.tmax);
    let res = evolve(&psi0, &plan.solver)?;

    let mut norms = csv::Writer::from_path(plan.out.join("norms.csv"))?;
    norms.write_record(["t", "l2_norm"])?;
    for (t, n) in &res.norms {
        norms.write_record([format!("{t:.17e}"), format!("{n:.17e}")])?;
    }
    norms.flush()?;

    let mut snaps = Vec::new();
    for (k, s) in res.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:04}.bin");
        field_io::save(plan.out.join(&name), &s.field, s.time)?;
        snaps.push(json!({"file": name, "requested": s.requested, "time": s.time}));
    }
    field_io::save(plan.out.join("final.bin"), &res.final_field, res.final_time)?;

    let status = match res.status {
        RunStatus::Completed => json!({"kind": "completed"}),
        RunStatus::BlowUp { time, max_abs } => {
            json!({"kind": "blow-up", "time": time, "max_abs": max_abs})
        }
        RunStatus::NonFinite { time } => json!({"kind": "non-finite", "time": time}),
    };
    let meta = json!({
        "command": "evolve",
        "versions": versions(),
        "config": plan,
        "status": status,
        "final_time": res.final_time,
        "steps_taken": res.steps_taken,
        "transforms": {
            "forward": res.transforms.forward,
            "inverse": res.transforms.inverse,
            "per_step": res.transforms_per_step,
        },
        "timings": {
            "setup_seconds": res.setup_time.as_secs_f64(),
            "run_seconds": res.run_time.as_secs_f64(),
        },
        "relative_norm_drift": res.relative_norm_drift(),
        "warnings": res.warnings,
        "snapshots": snaps,
        "final": "final.bin",
    });
    write_json(&plan.out.join("meta.json"), &meta)?;
    println!(
        "{} after {} steps (t = {}), norm drift {:.2e}, {} transforms/step -> {}",
        status["kind"].as_str().unwrap_or("?"),
        res.steps_taken,
        res.final_time,
        res.relative_norm_drift(),
        res.transforms_per_step,
        plan.out.display()
    );
    Ok(if res.status.is_completed() {
        Outcome::Ok
    } else {
        Outcome::BlowUp
    })
}

pub fn sweep_cmd(args: SweepArgs) -> Result<Outcome> {
    let plan = args.resolve()?;
    prepare_dir(&plan.out)?;
    let methods = plan
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        levels: plan.levels.iter().map(|&(n, l)| Level { n, l }).collect(),
        reference: Level {
            n: plan.reference.0,
            l: plan.reference.1,
        },
        reference_method: Method::Regularized,
        methods,
    };
    let name = plan.initial.clone();
    let initial =
        move |g: &Grid| initial_field(&name, g).map_err(|e| DsError::InvalidConfig(e.to_string()));
    let tables = convergence_sweep(&plan.solver, &spec, &initial, plan.jobs)?;

    let mut summary = Vec::new();
    for table in &tables {
        let file = format!("sweep_{}.csv", table.method);
        let mut w = csv::Writer::from_path(plan.out.join(&file))?;
        w.write_record(["n", "l", "error", "norm_drift", "seconds"])?;
        println!("{} ({}):", table.method, table.class.label());
        println!("{:>6} {:>8} {:>12} {:>12}", "N", "L", "error", "norm drift");
        for r in &table.rows {
            w.write_record([
                r.n.to_string(),
                r.l.to_string(),
                format!("{:.6e}", r.error),
                format!("{:.6e}", r.norm_drift),
                format!("{:.3}", r.seconds),
            ])?;
            println!(
                "{:>6} {:>8} {:>12.3e} {:>12.3e}",
                r.n, r.l, r.error, r.norm_drift
            );
        }
        w.flush()?;
        let floor = match table.class {
            dsii_core::DecayClass::Saturating { floor, .. } => Some(floor),
            dsii_core::DecayClass::Spectral { .. } => None,
        };
        summary.push(json!({
            "method": table.method.to_string(),
            "file": file,
            "class": table.class.label(),
            "decades_per_doubling": table.class.decades_per_doubling(),
            "floor": floor,
        }));
    }
    let meta = json!({
        "command": "sweep",
        "versions": versions(),
        "config": plan,
        "tables": summary,
    });
    write_json(&plan.out.join("meta.json"), &meta)?;
    Ok(Outcome::Ok)
}

#[derive(Args, Debug, Clone)]
pub struct ThetaEvalArgs {
    /// Surface-data file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    /// Defaults to nx.
    #[arg(long)]
    pub ny: Option<usize>,
    /// Period cell is 2 pi lx wide.
    #[arg(long, default_value_t = 1.0)]
    pub lx: f64,
    /// Defaults to lx.
    #[arg(long)]
    pub ly: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
    /// Also report the pointwise PDE residual.
    #[arg(long)]
    pub residual: bool,
    #[arg(long, default_value = "defocusing", value_parser = parse_rho, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value = "dsii-theta")]
    pub out: PathBuf,
}

pub fn theta_eval_cmd(args: ThetaEvalArgs) -> Result<Outcome> {
    let data = ThetaSurfaceData::from_file(&args.data)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let grid = Grid::new(
        args.nx,
        args.ny.unwrap_or(args.nx),
        args.lx,
        args.ly.unwrap_or(args.lx),
    )?;
    let field = eval_on_grid(&data, &grid, args.t)?;
    prepare_dir(&args.out)?;
    field_io::save(args.out.join("theta.bin"), &field, args.t)?;
    let residual = if args.residual {
        Some(ds_residual(&data, &grid, args.t, args.rho, args.beta)?)
    } else {
        None
    };
    let meta = json!({
        "command": "theta-eval",
        "versions": versions(),
        "data": args.data,
        "genus": data.genus(),
        "grid": {"nx": grid.nx(), "ny": grid.ny(), "lx": grid.lx(), "ly": grid.ly()},
        "t": args.t,
        "max_abs": field.max_abs(),
        "residual": residual,
        "field": "theta.bin",
    });
    write_json(&args.out.join("meta.json"), &meta)?;
    print!("max |Psi| = {:.6e}", field.max_abs());
    if let Some(r) = residual {
        print!(", residual {r:.3e}");
    }
    println!(" -> {}", args.out.display());
    Ok(Outcome::Ok)
}

fn parse_pair(s: &str) -> Result<[i64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|_| format!("not an integer: {a}"))?,
            b.parse().map_err(|_| format!("not an integer: {b}"))?,
        ]),
        _ => Err(format!("expected two comma-separated integers, got {s:?}")),
    }
}

#[derive(Args, Debug, Clone)]
pub struct ThetaCheckArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// n1,n2
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub n: [i64; 2],
    /// m1,m2
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub m: [i64; 2],
    /// Proposed x period to compare against.
    #[arg(long, requires = "ly", allow_hyphen_values = true)]
    pub lx: Option<f64>,
    /// Proposed y period to compare against.
    #[arg(long, requires = "lx", allow_hyphen_values = true)]
    pub ly: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Serialize)]
struct CheckReport {
    cond_residuals: [f64; 2],
    lx: Option<f64>,
    ly: Option<f64>,
    real_part_degenerate: bool,
    degenerate_branch: bool,
    l_values: [Option<(f64, f64)>; 2],
    proposed_mismatch: Option<[f64; 2]>,
    pass: bool,
}

pub fn theta_check_cmd(args: ThetaCheckArgs) -> Result<Outcome> {
    let data = ThetaSurfaceData::from_file(&args.data)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let proposed = args.lx.zip(args.ly);
    let rep = check_periodicity(&data, args.n, args.m, proposed)?;
    let pass = rep.passes(args.tol);
    let out = CheckReport {
        cond_residuals: rep.cond_residuals,
        lx: rep.lx,
        ly: rep.ly,
        real_part_degenerate: rep.real_part_degenerate,
        degenerate_branch: rep.degenerate_branch,
        l_values: rep.l_values,
        proposed_mismatch: rep.proposed_mismatch,
        pass,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if pass {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Args, Debug, Clone)]
pub struct Oracle1dArgs {
    #[arg(long, default_value_t = 256)]
    pub nx: usize,
    #[arg(long, default_value_t = 3.0)]
    pub lx: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tmax: f64,
    #[arg(long, default_value_t = 500)]
    pub nt: usize,
    #[arg(long, default_value = "defocusing", value_parser = parse_rho, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

/// Worst deviation between a y-independent 2D run and the 1D reduction.
pub fn one_dimensional_deviation(
    nx: usize,
    lx: f64,
    tmax: f64,
    nt: usize,
    rho: f64,
    beta: f64,
) -> Result<f64> {
    let grid = Grid::new(nx, 8, lx, 1.0)?;
    let profile = |x: f64| Complex64::new((-x * x).exp(), 0.3 * x * (-x * x).exp());
    let psi0 = Field::from_fn(grid, |x, _| profile(x));
    let cfg = SolverConfig {
        rho,
        beta,
        method: Method::Classical,
        tmax,
        nt,
        ..SolverConfig::default()
    };
    let res = evolve(&psi0, &cfg)?;
    let q0: Vec<Complex64> = nodes_1d(nx, lx).into_iter().map(profile).collect();
    let mean = q0.iter().map(|q| q.norm_sqr()).sum::<f64>() / nx as f64;
    let q = evolve_1d(&q0, -2.0 * rho * (2.0 * beta - 1.0), tmax, nt, lx)?;
    let phase = Complex64::new(0.0, 2.0 * rho * beta * mean * tmax).exp();
    let mut worst = 0.0f64;
    for (i, qi) in q.iter().enumerate() {
        for j in 0..grid.ny() {
            worst = worst.max((res.final_field.get(i, j) - qi * phase).norm());
        }
    }
    Ok(worst)
}

pub fn oracle_1d_cmd(args: Oracle1dArgs) -> Result<Outcome> {
    let dev = one_dimensional_deviation(args.nx, args.lx, args.tmax, args.nt, args.rho, args.beta)?;
    let pass = dev <= args.tol;
    println!(
        "max deviation from the 1D NLS oracle: {dev:.3e} (tol {:.0e}) {}",
        args.tol,
        if pass { "ok" } else { "FAILED" }
    );
    std::io::stdout().flush()?;
    Ok(if pass {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}
