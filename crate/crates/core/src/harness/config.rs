use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{Polynomial, PolynomialFlux, SeparableFlux, SpatialFactor};
use crate::grid::{SpatialGrid, VelocityGrid, MAX_DIM};
use crate::initial::InitialData;
use crate::path::{PathSpec, TimePartition};

pub const DEFAULT_NX: usize = 256;
pub const DEFAULT_NXI: usize = 256;

/// Margin applied to the default velocity range of x-dependent fluxes.
pub const INHOMOGENEOUS_MARGIN: f64 = 1.5;

fn one() -> usize {
    1
}

fn default_mean() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    0.5
}

fn default_nx() -> usize {
    DEFAULT_NX
}

fn default_nxi() -> usize {
    DEFAULT_NXI
}

fn default_length() -> f64 {
    1.0
}

fn default_output() -> String {
    "out".into()
}

fn default_bgk_ratio() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluxConfig {
    /// `A(xi) = xi^2 / 2` per component.
    Burgers {
        #[serde(default = "one")]
        dim: usize,
    },
    /// `A(xi) = speed * xi` per component.
    Linear {
        speed: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// `A(x, xi) = (mean + amplitude sin x_i) xi^2 / 2`.
    SineSpeedInhomogeneous {
        #[serde(default = "default_mean")]
        mean: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Monomial coefficients per component, optionally modulated in `x`.
    Polynomial {
        coefficients: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spatial: Option<SpatialFactor>,
    },
}

/// Flux built from a config: either kind of scheme.
pub enum BuiltFlux {
    Homogeneous(PolynomialFlux),
    Inhomogeneous(SeparableFlux),
}

impl FluxConfig {
    pub fn dim(&self) -> usize {
        match self {
            FluxConfig::Burgers { dim }
            | FluxConfig::Linear { dim, .. }
            | FluxConfig::SineSpeedInhomogeneous { dim, .. } => *dim,
            FluxConfig::Polynomial { coefficients, .. } => coefficients.len(),
        }
    }

    pub fn is_inhomogeneous(&self) -> bool {
        match self {
            FluxConfig::SineSpeedInhomogeneous { .. } => true,
            FluxConfig::Polynomial { spatial, .. } => spatial.is_some(),
            _ => false,
        }
    }

    pub fn build(&self) -> Result<BuiltFlux> {
        Ok(match self {
            FluxConfig::Burgers { dim } => BuiltFlux::Homogeneous(PolynomialFlux::burgers(*dim)?),
            FluxConfig::Linear { speed, dim } => {
                BuiltFlux::Homogeneous(PolynomialFlux::linear(*speed, *dim)?)
            }
            FluxConfig::SineSpeedInhomogeneous {
                mean,
                amplitude,
                dim,
            } => BuiltFlux::Inhomogeneous(SeparableFlux::sine_speed_burgers(
                *mean, *amplitude, *dim,
            )?),
            FluxConfig::Polynomial {
                coefficients,
                spatial,
            } => {
                let polys: Vec<Polynomial> =
                    coefficients.iter().cloned().map(Polynomial::new).collect();
                match spatial {
                    None => BuiltFlux::Homogeneous(PolynomialFlux::new(polys)?),
                    Some(v) => BuiltFlux::Inhomogeneous(SeparableFlux::new(
                        polys.into_iter().map(|p| (*v, p)).collect(),
                    )?),
                }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_nxi")]
    pub nxi: usize,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            nx: DEFAULT_NX,
            nxi: DEFAULT_NXI,
            length: 1.0,
            xi_min: None,
            xi_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub dts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_ref: Option<f64>,
    /// Defaults to `[t_final]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// BGK relaxation time as a fraction of the time step.
    #[serde(default = "default_bgk_ratio")]
    pub bgk_epsilon_ratio: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            bgk_epsilon_ratio: default_bgk_ratio(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flux: FluxConfig,
    pub initial: InitialData,
    pub path: PathSpec,
    #[serde(default)]
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default = "default_output")]
    pub output_dir: String,
    /// Replaces the seed of random paths when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn field_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// Parses and validates a TOML document; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical TOML form of a config.
pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::ConfigParse(e.to_string()))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.dim == 0 || g.dim > MAX_DIM {
            return Err(field_err(
                "grid.dim",
                format!("must be 1 or 2, got {}", g.dim),
            ));
        }
        if g.nx == 0 {
            return Err(field_err("grid.nx", "must be positive"));
        }
        if g.nxi < 2 {
            return Err(field_err(
                "grid.nxi",
                format!("must be at least 2, got {}", g.nxi),
            ));
        }
        if !(g.length.is_finite() && g.length > 0.0) {
            return Err(field_err(
                "grid.length",
                format!("must be positive, got {}", g.length),
            ));
        }
        match (g.xi_min, g.xi_max) {
            (None, None) => {
                if !g.nxi.is_multiple_of(2) {
                    return Err(field_err(
                        "grid.nxi",
                        "must be even when the velocity range is symmetric by default",
                    ));
                }
            }
            (Some(lo), Some(hi)) => {
                if !(lo < 0.0 && hi > 0.0) {
                    return Err(field_err(
                        "grid.xi_min",
                        format!("need xi_min < 0 < xi_max, got [{lo}, {hi}]"),
                    ));
                }
                VelocityGrid::new(lo, hi, g.nxi)
                    .map_err(|e| field_err("grid.nxi", e.to_string()))?;
                if self.initial_min() < lo || self.initial_max() > hi {
                    return Err(field_err(
                        "grid.xi_max",
                        format!("velocity range [{lo}, {hi}] does not cover the initial data"),
                    ));
                }
            }
            _ => {
                return Err(field_err(
                    "grid.xi_min",
                    "set both xi_min and xi_max or neither",
                ))
            }
        }
        if self.flux.dim() != g.dim {
            return Err(field_err(
                "flux.dim",
                format!(
                    "flux has {} components, grid dimension is {}",
                    self.flux.dim(),
                    g.dim
                ),
            ));
        }
        if let FluxConfig::Polynomial { coefficients, .. } = &self.flux {
            if coefficients
                .iter()
                .any(|c| c.iter().any(|v| !v.is_finite()))
            {
                return Err(field_err("flux.coefficients", "must be finite"));
            }
        }
        self.flux
            .build()
            .map_err(|e| field_err("flux", e.to_string()))?;
        self.initial
            .validate()
            .map_err(|e| field_err("initial", e.to_string()))?;
        if self.path.dim() != g.dim {
            return Err(field_err(
                "path.dim",
                format!(
                    "path has {} components, grid dimension is {}",
                    self.path.dim(),
                    g.dim
                ),
            ));
        }
        self.path.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => field_err(&name, reason),
            other => field_err("path", other.to_string()),
        })?;
        let t = &self.time;
        if !(t.t_final.is_finite() && t.t_final > 0.0) {
            return Err(field_err(
                "time.t_final",
                format!("must be positive, got {}", t.t_final),
            ));
        }
        if t.dts.is_empty() {
            return Err(field_err("time.dts", "needs at least one time step"));
        }
        let partitions = t
            .dts
            .iter()
            .enumerate()
            .map(|(i, &dt)| {
                TimePartition::from_dt(t.t_final, dt)
                    .map_err(|e| field_err(&format!("time.dts[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(dt_ref) = t.dt_ref {
            let r = TimePartition::from_dt(t.t_final, dt_ref)
                .map_err(|e| field_err("time.dt_ref", e.to_string()))?;
            for (i, p) in partitions.iter().enumerate() {
                if !p.is_refined_by(&r) {
                    return Err(field_err(
                        &format!("time.dts[{i}]"),
                        format!("dt = {} is not a multiple of dt_ref = {dt_ref}", p.dt()),
                    ));
                }
            }
        }
        for (i, &s) in self.snapshot_times().iter().enumerate() {
            if let Some(p) = partitions.iter().find(|p| p.index_of(s).is_none()) {
                return Err(field_err(
                    &format!("time.snapshot_times[{i}]"),
                    format!("{s} is not a point of the partition with dt = {}", p.dt()),
                ));
            }
        }
        if !(self.compare.bgk_epsilon_ratio > 0.0) {
            return Err(field_err("compare.bgk_epsilon_ratio", "must be positive"));
        }
        if self.output_dir.is_empty() {
            return Err(field_err("output_dir", "must not be empty"));
        }
        Ok(())
    }

    fn initial_min(&self) -> f64 {
        match self.initial {
            InitialData::Riemann { u_l, u_r, .. } => u_l.min(u_r),
            InitialData::Bump { height, .. } => height.min(0.0),
            InitialData::Sine { amplitude } => -amplitude.abs(),
        }
    }

    fn initial_max(&self) -> f64 {
        match self.initial {
            InitialData::Riemann { u_l, u_r, .. } => u_l.max(u_r),
            InitialData::Bump { height, .. } => height.max(0.0),
            InitialData::Sine { amplitude } => amplitude.abs(),
        }
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.time
            .snapshot_times
            .clone()
            .unwrap_or_else(|| vec![self.time.t_final])
    }

    /// Path spec with the top-level seed applied.
    pub fn effective_path(&self) -> PathSpec {
        let mut p = self.path.clone();
        if let Some(s) = self.seed {
            match &mut p {
                PathSpec::Brownian { seed, .. } | PathSpec::Fbm { seed, .. } => *seed = s,
                _ => {}
            }
        }
        p
    }

    pub fn effective_seed(&self) -> Option<u64> {
        match self.effective_path() {
            PathSpec::Brownian { seed, .. } | PathSpec::Fbm { seed, .. } => Some(seed),
            _ => self.seed,
        }
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(
            vec![self.grid.nx; self.grid.dim],
            vec![self.grid.length; self.grid.dim],
        )
    }

    /// Configured velocity grid, or a symmetric one covering the data (with
    /// a margin for x-dependent fluxes).
    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        match (self.grid.xi_min, self.grid.xi_max) {
            (Some(lo), Some(hi)) => VelocityGrid::new(lo, hi, self.grid.nxi),
            _ => {
                let mut bound = self.initial.sup_norm();
                if bound == 0.0 {
                    bound = 1.0;
                }
                if self.flux.is_inhomogeneous() {
                    bound *= INHOMOGENEOUS_MARGIN;
                }
                VelocityGrid::symmetric(bound, self.grid.nxi)
            }
        }
    }

    /// Finest time step used (reference if present).
    pub fn finest_dt(&self) -> f64 {
        let min_dt = self.time.dts.iter().copied().fold(f64::INFINITY, f64::min);
        self.time.dt_ref.map_or(min_dt, |r| r.min(min_dt))
    }
}

/// Input of the `paths` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub t_final: f64,
    pub n_samples: usize,
    pub path: PathSpec,
}

/// Parses a path-generation document (TOML, strict).
pub fn parse_paths_config(text: &str) -> Result<PathsConfig> {
    let cfg: PathsConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    if !(cfg.t_final.is_finite() && cfg.t_final > 0.0) {
        return Err(field_err("t_final", "must be positive and finite"));
    }
    if cfg.n_samples < 2 {
        return Err(field_err("n_samples", "need at least two samples"));
    }
    cfg.path
        .validate()
        .map_err(|e| field_err("path", e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[flux]
preset = "burgers"

[initial]
kind = "riemann"
u_l = 1.0
u_r = 0.0
x0 = 0.5

[path]
kind = "deterministic"
slope = [1.0]

[time]
t_final = 0.5
dts = [0.05]
"#;

    #[test]
    fn minimal_document_gets_default_grid() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.grid.nx, 256);
        assert_eq!(cfg.grid.nxi, 256);
        assert_eq!(cfg.snapshot_times(), vec![0.5]);
        assert_eq!(cfg.output_dir, "out");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("[flux]", "fluxx = 1\n[flux]");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("fluxx"), "{err}");
        let nested = MINIMAL.replace("t_final = 0.5", "t_final = 0.5\nstep = 2");
        assert!(parse_config(&nested)
            .unwrap_err()
            .to_string()
            .contains("step"));
    }

    #[test]
    fn range_errors_carry_field_paths() {
        let text = MINIMAL.replace("dts = [0.05]", "dts = [0.05, 0.03]");
        match parse_config(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "time.dts[1]"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[grid]\nnx = 0\n");
        match parse_config(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "grid.nx"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_on_full_config() {
        let text = r#"
output_dir = "runs/a"
seed = 9

[flux]
preset = "polynomial"
coefficients = [[0.0, 0.0, 0.5]]
spatial = { mean = 1.0, amplitude = 0.5, wavenumber = 1.0 }

[initial]
kind = "bump"
center = 3.0
width = 1.0
height = 0.8

[path]
kind = "brownian"
seed = 1
oversampling = 4
dim = 1

[grid]
dim = 1
nx = 64
nxi = 48
length = 6.0
xi_min = -1.5
xi_max = 1.5

[time]
t_final = 1.0
dts = [0.1, 0.05]
dt_ref = 0.0125
snapshot_times = [0.5, 1.0]

[compare]
bgk_epsilon_ratio = 0.02
"#;
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&serialize_config(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.effective_seed(), Some(9));
        assert!(cfg.flux.is_inhomogeneous());
    }
}
