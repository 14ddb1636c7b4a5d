//! Scenario configuration: JSON document, command-line overrides and
//! validation.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chtorus::{EulerState, Field, Grid, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Geodesic,
    Curvature,
    VerifyB,
    Selftest,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Geodesic => "geodesic",
            Mode::Curvature => "curvature",
            Mode::VerifyB => "verify-b",
            Mode::Selftest => "selftest",
        }
    }

    fn needs_dynamics(&self) -> bool {
        matches!(self, Mode::Simulate | Mode::Geodesic)
    }
}

/// One trigonometric term `amplitude·sin(2π k·x + phase)` added to
/// component `component` of the stacked state `(u_1..u_n, ρ_1..ρ_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcTerm {
    pub component: usize,
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// The JSON document as written; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Option<Mode>,
    pub alpha: Option<u8>,
    pub beta: Option<u8>,
    pub gamma: Option<u8>,
    #[serde(alias = "dim")]
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    #[serde(alias = "tmax")]
    pub t_max: Option<f64>,
    pub ic: Option<Vec<IcTerm>>,
    #[serde(alias = "out")]
    pub out_dir: Option<PathBuf>,
    pub dealias: Option<bool>,
    pub renormalize_hs: Option<bool>,
    pub output_every: Option<usize>,
    pub k_range: Option<Vec<u32>>,
    pub b_list: Option<Vec<f64>>,
    pub b_index: Option<[i64; 2]>,
    pub seed: Option<u64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<u8>,
    pub beta: Option<u8>,
    pub gamma: Option<u8>,
    pub dim: Option<usize>,
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_dealias: bool,
}

/// Dynamic-run settings, present in `simulate` and `geodesic` modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsConfig {
    #[serde(skip)]
    pub params: ModelParams,
    pub alpha: u8,
    pub beta: u8,
    pub gamma: u8,
    pub n: usize,
    pub equation: String,
    pub grid: usize,
    pub dt: f64,
    pub t_max: f64,
    pub ic: Vec<IcTerm>,
    pub renormalize_hs: bool,
    pub output_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub dealias: bool,
    pub seed: u64,
    pub dynamics: Option<DynamicsConfig>,
    pub k_range: Vec<u32>,
    pub b_list: Vec<f64>,
    pub b_index: [i64; 2],
}

pub const DEFAULT_K_RANGE: [u32; 4] = [1, 2, 3, 4];
pub const DEFAULT_B_LIST: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
pub const REFERENCE_AMPLITUDE: f64 = 0.05;

impl RawConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        set(&mut self.alpha, &o.alpha);
        set(&mut self.beta, &o.beta);
        set(&mut self.gamma, &o.gamma);
        set(&mut self.n, &o.dim);
        set(&mut self.grid, &o.grid);
        set(&mut self.dt, &o.dt);
        set(&mut self.t_max, &o.t_max);
        set(&mut self.out_dir, &o.out_dir);
        set(&mut self.seed, &o.seed);
        if o.no_dealias {
            self.dealias = Some(false);
        }
    }
}

/// Reads the optional file, applies the overrides and validates. `mode`
/// from the command line wins over the file's `mode`.
pub fn parse_config(
    mode: Option<Mode>,
    file: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<ScenarioConfig> {
    let mut raw = match file {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    raw.apply(overrides);
    if mode.is_some() {
        raw.mode = mode;
    }
    validate(raw)
}

pub fn validate(raw: RawConfig) -> CliResult<ScenarioConfig> {
    let mode = raw
        .mode
        .ok_or_else(|| CliError::Config("mode is required".into()))?;
    let dynamics = if mode.needs_dynamics() {
        Some(validate_dynamics(&raw)?)
    } else {
        None
    };
    let k_range = raw
        .k_range
        .clone()
        .unwrap_or_else(|| DEFAULT_K_RANGE.to_vec());
    if k_range.is_empty() || k_range.contains(&0) {
        return Err(CliError::Config(
            "k_range must be a non-empty list of positive integers".into(),
        ));
    }
    let b_list = raw
        .b_list
        .clone()
        .unwrap_or_else(|| DEFAULT_B_LIST.to_vec());
    if b_list.iter().any(|b| !b.is_finite()) {
        return Err(CliError::Config("b_list entries must be finite".into()));
    }
    let b_index = raw.b_index.unwrap_or([1, 1]);
    if b_index == [0, 0] {
        return Err(CliError::Config("b_index must be nonzero".into()));
    }
    Ok(ScenarioConfig {
        mode,
        out_dir: raw.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        dealias: raw.dealias.unwrap_or(true),
        seed: raw.seed.unwrap_or(0),
        dynamics,
        k_range,
        b_list,
        b_index,
    })
}

fn required<T: Copy>(v: Option<T>, name: &str, mode: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Config(format!("{name} is required in {mode} mode")))
}

fn validate_dynamics(raw: &RawConfig) -> CliResult<DynamicsConfig> {
    let m = raw.mode.map_or("", |m| m.name());
    let alpha = required(raw.alpha, "alpha", m)?;
    let beta = required(raw.beta, "beta", m)?;
    let gamma = required(raw.gamma, "gamma", m)?;
    let n = required(raw.n, "n", m)?;
    let size = required(raw.grid, "grid", m)?;
    let dt = required(raw.dt, "dt", m)?;
    let t_max = required(raw.t_max, "t_max", m)?;
    let params =
        ModelParams::new(alpha, beta, gamma, n).map_err(|e| CliError::Config(e.to_string()))?;
    let grid = Grid::new(n, size).map_err(|e| CliError::Config(e.to_string()))?;
    chtorus::dynamics::TimeStepperConfig::new(dt, t_max)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let output_every = raw.output_every.unwrap_or(1);
    if output_every == 0 {
        return Err(CliError::Config("output_every must be positive".into()));
    }
    let ic = raw
        .ic
        .clone()
        .unwrap_or_else(|| reference_ic(n, params.has_density()));
    let cfg = DynamicsConfig {
        params,
        alpha,
        beta,
        gamma,
        n,
        equation: params.equation().name().to_string(),
        grid: size,
        dt,
        t_max,
        ic,
        renormalize_hs: raw.renormalize_hs.unwrap_or(true),
        output_every,
    };
    check_ic(&cfg, grid)?;
    initial_state(&cfg).map_err(|e| CliError::Config(format!("initial condition: {e}")))?;
    Ok(cfg)
}

/// `u₀ = 0.05 sin(2πx₁)·𝟏`, and `ρ₀ = 0.05 cos(2πx₁)·𝟏` when `γ = 1`.
pub fn reference_ic(n: usize, density: bool) -> Vec<IcTerm> {
    let mut k = vec![0; n];
    k[0] = 1;
    let mut out: Vec<IcTerm> = (0..n)
        .map(|c| IcTerm {
            component: c,
            k: k.clone(),
            amplitude: REFERENCE_AMPLITUDE,
            phase: 0.0,
        })
        .collect();
    if density {
        out.extend((0..n).map(|c| IcTerm {
            component: n + c,
            k: k.clone(),
            amplitude: REFERENCE_AMPLITUDE,
            phase: PI / 2.0,
        }));
    }
    out
}

fn check_ic(cfg: &DynamicsConfig, grid: Grid) -> CliResult<()> {
    let ncomp = cfg.n * (1 + usize::from(cfg.params.has_density()));
    let limit = grid.size() as f64 / 3.0;
    for (i, t) in cfg.ic.iter().enumerate() {
        if t.component >= ncomp {
            return Err(CliError::Config(format!(
                "ic term {i}: component {} out of range (state has {ncomp})",
                t.component
            )));
        }
        if t.k.len() != cfg.n {
            return Err(CliError::Config(format!(
                "ic term {i}: k has {} entries, expected {}",
                t.k.len(),
                cfg.n
            )));
        }
        if t.k.iter().any(|k| k.unsigned_abs() as f64 > limit) {
            return Err(CliError::Config(format!(
                "ic term {i}: wavevector {:?} exceeds the band limit N/3 = {limit:.3}",
                t.k
            )));
        }
        if !(t.amplitude.is_finite() && t.phase.is_finite()) {
            return Err(CliError::Config(format!("ic term {i}: non-finite value")));
        }
    }
    Ok(())
}

fn ic_field(grid: Grid, n: usize, offset: usize, terms: &[IcTerm]) -> Field {
    Field::from_fn(grid, n, |x, c| {
        terms
            .iter()
            .filter(|t| t.component == offset + c)
            .map(|t| {
                let kx: f64 = t.k.iter().zip(x).map(|(k, xi)| *k as f64 * xi).sum();
                t.amplitude * (2.0 * PI * kx + t.phase).sin()
            })
            .sum()
    })
}

/// Samples the initial condition on the grid.
pub fn initial_state(cfg: &DynamicsConfig) -> chtorus::Result<EulerState> {
    let grid = Grid::new(cfg.n, cfg.grid)?;
    let u = ic_field(grid, cfg.n, 0, &cfg.ic);
    let rho = cfg
        .params
        .has_density()
        .then(|| ic_field(grid, cfg.n, cfg.n, &cfg.ic));
    EulerState::new(u, rho, &cfg.params)
}
