//! Run settings shared by the command line and flat JSON config files.
//!
//! Every field is optional in both places; flags win over file keys and
//! anything still unset falls back to the defaults below.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use dsii_core::{Field, Grid, Method, Scheme, SolverConfig};
use serde::{Deserialize, Deserializer, Serialize};

pub const MAX_CLI_TAYLOR_ORDER: usize = 12;

/// Accepts `defocusing`, `focusing`, `+1`, `1` or `-1`.
pub fn parse_rho(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "defocusing" | "1" | "+1" | "1.0" => Ok(1.0),
        "focusing" | "-1" | "-1.0" => Ok(-1.0),
        other => Err(format!(
            "rho must be defocusing, focusing or +-1, got {other:?}"
        )),
    }
}

fn de_rho<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Name(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(v)) if v == 1.0 || v == -1.0 => Ok(Some(v)),
        Some(Raw::Num(v)) => Err(serde::de::Error::custom(format!(
            "rho must be +-1, got {v}"
        ))),
        Some(Raw::Name(s)) => parse_rho(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

/// Physics and integrator options common to `evolve` and `sweep`.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct PhysicsArgs {
    /// Defocusing (+1) or focusing (-1).
    #[arg(long, value_parser = parse_rho, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_rho")]
    pub rho: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub beta: Option<f64>,
    /// Taylor order of the regularization (1..=12).
    #[arg(long)]
    #[serde(default)]
    pub taylor_order: Option<usize>,
    /// ifrk4 or composite.
    #[arg(long)]
    #[serde(default)]
    pub scheme: Option<String>,
    /// Modes with |dt L| above this use the stiff companion (composite scheme only).
    #[arg(long)]
    #[serde(default)]
    pub stiff_threshold: Option<f64>,
    /// Apply the 2/3 rule to the nonlinear term.
    #[arg(long)]
    #[serde(default)]
    pub dealias: Option<bool>,
}

impl PhysicsArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            rho: self.rho.or(file.rho),
            beta: self.beta.or(file.beta),
            taylor_order: self.taylor_order.or(file.taylor_order),
            scheme: self.scheme.or(file.scheme),
            stiff_threshold: self.stiff_threshold.or(file.stiff_threshold),
            dealias: self.dealias.or(file.dealias),
        }
    }

    fn apply(&self, cfg: &mut SolverConfig) -> Result<()> {
        cfg.rho = self.rho.unwrap_or(1.0);
        cfg.beta = self.beta.unwrap_or(1.0);
        cfg.taylor_order = self.taylor_order.unwrap_or(cfg.taylor_order);
        if !(1..=MAX_CLI_TAYLOR_ORDER).contains(&cfg.taylor_order) {
            bail!(
                "taylor order must be in 1..={MAX_CLI_TAYLOR_ORDER}, got {}",
                cfg.taylor_order
            );
        }
        let threshold = self
            .stiff_threshold
            .unwrap_or(dsii_core::stepper::DEFAULT_STIFF_THRESHOLD);
        cfg.scheme = match self.scheme.as_deref().unwrap_or("ifrk4") {
            "ifrk4" => Scheme::IfRk4,
            "composite" => Scheme::Composite {
                stiff_threshold: threshold,
            },
            other => bail!("unknown scheme {other:?} (expected ifrk4 or composite)"),
        };
        cfg.dealias = self.dealias.unwrap_or(false);
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvolveArgs {
    /// Flat JSON file with any of these options as keys (snake_case).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// gaussian, asymmetric, or a binary field file.
    #[arg(long)]
    #[serde(default)]
    pub initial: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub nx: Option<usize>,
    /// Defaults to nx.
    #[arg(long)]
    #[serde(default)]
    pub ny: Option<usize>,
    /// Domain is lx [-pi, pi).
    #[arg(long)]
    #[serde(default)]
    pub lx: Option<f64>,
    /// Defaults to lx.
    #[arg(long)]
    #[serde(default)]
    pub ly: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub tmax: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub nt: Option<usize>,
    /// classical or regularized.
    #[arg(long)]
    #[serde(default)]
    pub method: Option<String>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub physics: PhysicsArgs,
}

/// Fully resolved `evolve` inputs.
#[derive(Debug, Clone, Serialize)]
pub struct EvolvePlan {
    pub initial: String,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub tmax: f64,
    pub nt: usize,
    pub method: String,
    pub rho: f64,
    pub beta: f64,
    pub taylor_order: usize,
    pub scheme: String,
    pub dealias: bool,
    pub snapshots: Vec<f64>,
    pub out: PathBuf,
    #[serde(skip)]
    pub solver: SolverConfig,
}

const PHYSICS_KEYS: [&str; 6] = [
    "rho",
    "beta",
    "taylor_order",
    "scheme",
    "stiff_threshold",
    "dealias",
];

/// Reads a flat JSON object, rejecting keys outside `keys` and the physics options.
pub fn read_config<T: for<'de> Deserialize<'de> + Default>(
    path: Option<&Path>,
    keys: &[&str],
) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    let Some(map) = value.as_object() else {
        bail!("config {} must be a JSON object", path.display());
    };
    if let Some(k) = map
        .keys()
        .find(|k| !keys.contains(&k.as_str()) && !PHYSICS_KEYS.contains(&k.as_str()))
    {
        bail!("unknown config key {k:?} in {}", path.display());
    }
    serde_json::from_value(value).with_context(|| format!("parsing config {}", path.display()))
}

const EVOLVE_KEYS: [&str; 10] = [
    "initial",
    "nx",
    "ny",
    "lx",
    "ly",
    "tmax",
    "nt",
    "method",
    "snapshots",
    "out",
];
const SWEEP_KEYS: [&str; 9] = [
    "initial",
    "tmax",
    "nt",
    "levels",
    "l_list",
    "method",
    "reference",
    "jobs",
    "out",
];

fn scheme_label(s: Scheme) -> String {
    match s {
        Scheme::IfRk4 => "ifrk4".into(),
        Scheme::Composite { stiff_threshold } => format!("composite({stiff_threshold})"),
    }
}

impl EvolveArgs {
    pub fn resolve(self) -> Result<EvolvePlan> {
        let file: EvolveArgs = read_config(self.config.as_deref(), &EVOLVE_KEYS)?;
        let nx = self.nx.or(file.nx).unwrap_or(128);
        let lx = self.lx.or(file.lx).unwrap_or(4.0);
        let method: Method = self
            .method
            .or(file.method)
            .unwrap_or_else(|| "regularized".into())
            .parse()?;
        let mut solver = SolverConfig {
            method,
            tmax: self.tmax.or(file.tmax).unwrap_or(0.4),
            nt: self.nt.or(file.nt).unwrap_or(1000),
            snapshot_times: self.snapshots.or(file.snapshots).unwrap_or_default(),
            ..SolverConfig::default()
        };
        self.physics.merge(file.physics).apply(&mut solver)?;
        solver.validate()?;
        Ok(EvolvePlan {
            initial: self
                .initial
                .or(file.initial)
                .unwrap_or_else(|| "gaussian".into()),
            nx,
            ny: self.ny.or(file.ny).unwrap_or(nx),
            lx,
            ly: self.ly.or(file.ly).unwrap_or(lx),
            tmax: solver.tmax,
            nt: solver.nt,
            method: method.to_string(),
            rho: solver.rho,
            beta: solver.beta,
            taylor_order: solver.taylor_order,
            scheme: scheme_label(solver.scheme),
            dealias: solver.dealias,
            snapshots: solver.snapshot_times.clone(),
            out: self.out.or(file.out).unwrap_or_else(|| "dsii-run".into()),
            solver,
        })
    }
}

/// Builds the named profile on `grid`, or loads a field file.
pub fn initial_field(name: &str, grid: &Grid) -> Result<Field> {
    Ok(match name {
        "gaussian" => dsii_core::initial::gaussian(grid),
        "asymmetric" => dsii_core::initial::asymmetric_gaussian(grid),
        path => dsii_core::initial::from_file(path, grid)
            .with_context(|| format!("loading initial data from {path}"))?,
    })
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Flat JSON file with any of these options as keys (snake_case).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// gaussian or asymmetric.
    #[arg(long)]
    #[serde(default)]
    pub initial: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub tmax: Option<f64>,
    /// Steps per run; the same dt is used at every level.
    #[arg(long)]
    #[serde(default)]
    pub nt: Option<usize>,
    /// Range of log2(N), e.g. 5:8.
    #[arg(long)]
    #[serde(default)]
    pub levels: Option<String>,
    /// Comma-separated L per level.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub l_list: Option<Vec<f64>>,
    /// regularized, classical or both.
    #[arg(long)]
    #[serde(default)]
    pub method: Option<String>,
    /// Reference level as N:L; defaults to one doubling past the last level.
    #[arg(long)]
    #[serde(default)]
    pub reference: Option<String>,
    /// Concurrent runs (capped by DSII_THREADS).
    #[arg(long)]
    #[serde(default)]
    pub jobs: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub physics: PhysicsArgs,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPlan {
    pub initial: String,
    pub tmax: f64,
    pub nt: usize,
    pub levels: Vec<(usize, f64)>,
    pub reference: (usize, f64),
    pub methods: Vec<String>,
    pub rho: f64,
    pub beta: f64,
    pub taylor_order: usize,
    pub scheme: String,
    pub jobs: usize,
    pub out: PathBuf,
    #[serde(skip)]
    pub solver: SolverConfig,
}

fn parse_levels(s: &str) -> Result<Vec<usize>> {
    let (a, b) = s
        .split_once(':')
        .with_context(|| format!("levels must look like 5:8, got {s:?}"))?;
    let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
    if a < 3 || b < a || b > 14 {
        bail!("levels {a}:{b} out of range (3 <= a <= b <= 14)");
    }
    Ok((a..=b).map(|k| 1usize << k).collect())
}

/// `--jobs` if given, else the available cores, never more than `DSII_THREADS`.
pub fn job_count(requested: Option<usize>) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("DSII_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0);
    let n = requested.unwrap_or(avail).max(1);
    cap.map_or(n, |c| n.min(c))
}

impl SweepArgs {
    pub fn resolve(self) -> Result<SweepPlan> {
        let file: SweepArgs = read_config(self.config.as_deref(), &SWEEP_KEYS)?;
        let initial = self
            .initial
            .or(file.initial)
            .unwrap_or_else(|| "gaussian".into());
        if initial != "gaussian" && initial != "asymmetric" {
            bail!("sweeps need a built-in profile (gaussian or asymmetric), got {initial:?}");
        }
        let ns = parse_levels(&self.levels.or(file.levels).unwrap_or_else(|| "5:8".into()))?;
        let ls = self.l_list.or(file.l_list).unwrap_or_else(|| {
            ns.iter()
                .map(|&n| 6.15 * (n as f64 / 256.0).sqrt())
                .collect()
        });
        if ls.len() != ns.len() {
            bail!("{} levels but {} L values", ns.len(), ls.len());
        }
        let levels: Vec<(usize, f64)> = ns.into_iter().zip(ls).collect();
        let reference = match self.reference.or(file.reference) {
            Some(s) => {
                let (n, l) = s
                    .split_once(':')
                    .with_context(|| format!("reference must look like 512:9.5, got {s:?}"))?;
                (n.trim().parse()?, l.trim().parse()?)
            }
            None => {
                let lv: Vec<dsii_core::Level> = levels
                    .iter()
                    .map(|&(n, l)| dsii_core::Level { n, l })
                    .collect();
                let r = dsii_core::SweepSpec::extrapolated_reference(&lv)?;
                (r.n, r.l)
            }
        };
        let methods = match self
            .method
            .or(file.method)
            .unwrap_or_else(|| "both".into())
            .as_str()
        {
            "both" => vec!["regularized".to_string(), "classical".to_string()],
            m => vec![m.parse::<Method>()?.to_string()],
        };
        let mut solver = SolverConfig {
            tmax: self.tmax.or(file.tmax).unwrap_or(0.4),
            nt: self.nt.or(file.nt).unwrap_or(4000),
            ..SolverConfig::default()
        };
        self.physics.merge(file.physics).apply(&mut solver)?;
        solver.validate()?;
        Ok(SweepPlan {
            initial,
            tmax: solver.tmax,
            nt: solver.nt,
            levels,
            reference,
            methods,
            rho: solver.rho,
            beta: solver.beta,
            taylor_order: solver.taylor_order,
            scheme: scheme_label(solver.scheme),
            jobs: job_count(self.jobs.or(file.jobs)),
            out: self.out.or(file.out).unwrap_or_else(|| "dsii-sweep".into()),
            solver,
        })
    }
}
