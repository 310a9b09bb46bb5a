use thiserror::Error;

/// Errors raised by the solvers, oracles and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("velocity grid [{xi_min}, {xi_max}] does not contain u = {value}")]
    VelocityRange {
        value: f64,
        xi_min: f64,
        xi_max: f64,
    },

    #[error(
        "characteristic images leave the velocity grid; widen to at least [{suggested_min}, {suggested_max}]"
    )]
    CharacteristicRange {
        suggested_min: f64,
        suggested_max: f64,
    },

    #[error("velocity cell [{lo}, {hi}] straddles 0")]
    StraddlingCell { lo: f64, hi: f64 },

    #[error("negative defect {value:e} at step {step}, x-cell {cell}, xi-edge {edge}")]
    NegativeDefect {
        value: f64,
        step: usize,
        cell: usize,
        edge: usize,
    },

    #[error("invalid driver path: {0}")]
    InvalidPath(String),

    #[error("time {time} outside [0, {end}]")]
    TimeOutOfRange { time: f64, end: f64 },

    #[error("partitions are not nested: {0}")]
    NonNestedPartition(String),

    #[error("characteristic diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("CFL condition violated: max|a| dt = {courant} > dx = {dx}")]
    Cfl { courant: f64, dx: f64 },

    #[error("invalid flux: {0}")]
    InvalidFlux(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::VelocityRange { .. } => "velocity_range",
            Error::CharacteristicRange { .. } => "characteristic_range",
            Error::StraddlingCell { .. } => "straddling_cell",
            Error::NegativeDefect { .. } => "negative_defect",
            Error::InvalidPath(_) => "invalid_path",
            Error::TimeOutOfRange { .. } => "time_out_of_range",
            Error::NonNestedPartition(_) => "non_nested_partition",
            Error::Divergence { .. } => "divergence",
            Error::Cfl { .. } => "cfl",
            Error::InvalidFlux(_) => "invalid_flux",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Config { .. } => "config",
            Error::ConfigParse(_) => "config_parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
