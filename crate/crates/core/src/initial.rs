//! Initial data with exact cell averages on periodic grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, SpatialGrid};

/// Initial data recipe. Profiles vary along axis 0; in 2-D the bump is a
/// square and the sine a product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `u_l` on `[0, x0)`, `u_r` on `[x0, L)`.
    Riemann { u_l: f64, u_r: f64, x0: f64 },
    /// `height` on `[center - width/2, center + width/2]` (periodically wrapped).
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
    /// `amplitude * sin(2 pi x / L)`.
    Sine { amplitude: f64 },
}

impl InitialData {
    /// Indicator of `[a, b]` scaled by `height`.
    pub fn indicator(a: f64, b: f64, height: f64) -> Self {
        InitialData::Bump {
            center: 0.5 * (a + b),
            width: b - a,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite, got {v}")))
            }
        };
        match *self {
            InitialData::Riemann { u_l, u_r, x0 } => {
                finite("initial.u_l", u_l)?;
                finite("initial.u_r", u_r)?;
                finite("initial.x0", x0)
            }
            InitialData::Bump {
                center,
                width,
                height,
            } => {
                finite("initial.center", center)?;
                finite("initial.height", height)?;
                if !(width.is_finite() && width >= 0.0) {
                    return Err(Error::param(
                        "initial.width",
                        format!("must be >= 0, got {width}"),
                    ));
                }
                Ok(())
            }
            InitialData::Sine { amplitude } => finite("initial.amplitude", amplitude),
        }
    }

    /// Largest `|u|` the data attains.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            InitialData::Riemann { u_l, u_r, .. } => u_l.abs().max(u_r.abs()),
            InitialData::Bump { height, .. } => height.abs(),
            InitialData::Sine { amplitude } => amplitude.abs(),
        }
    }

    /// Pointwise value (periodic).
    pub fn value(&self, grid: &SpatialGrid, p: &[f64]) -> f64 {
        let along = |axis: usize| {
            let len = grid.lengths()[axis];
            p[axis].rem_euclid(len)
        };
        match *self {
            InitialData::Riemann { u_l, u_r, x0 } => {
                if along(0) < x0.rem_euclid(grid.lengths()[0]) {
                    u_l
                } else {
                    u_r
                }
            }
            InitialData::Bump {
                center,
                width,
                height,
            } => {
                let inside = (0..grid.dim()).all(|a| {
                    let len = grid.lengths()[a];
                    let d = (p[a] - center).rem_euclid(len);
                    d.min(len - d) <= 0.5 * width
                });
                if inside {
                    height
                } else {
                    0.0
                }
            }
            InitialData::Sine { amplitude } => {
                (0..grid.dim())
                    .map(|a| (std::f64::consts::TAU * p[a] / grid.lengths()[a]).sin())
                    .product::<f64>()
                    * amplitude
            }
        }
    }

    /// Field of exact cell averages.
    pub fn sample(&self, grid: &SpatialGrid) -> Result<ScalarField> {
        self.validate()?;
        let values = (0..grid.len())
            .map(|j| {
                let idx = grid.multi_index(j);
                let mut v = 1.0;
                for axis in 0..grid.dim() {
                    let h = grid.cell_size(axis);
                    let a = idx[axis] as f64 * h;
                    v *= self.axis_average(grid, axis, a, a + h);
                }
                self.scale() * v
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    fn scale(&self) -> f64 {
        match *self {
            InitialData::Riemann { .. } => 1.0,
            InitialData::Bump { height, .. } => height,
            InitialData::Sine { amplitude } => amplitude,
        }
    }

    /// Average over `[a, b]` of the axis profile (without the overall scale).
    /// The Riemann profile only varies along axis 0.
    fn axis_average(&self, grid: &SpatialGrid, axis: usize, a: f64, b: f64) -> f64 {
        let len = grid.lengths()[axis];
        let h = b - a;
        match *self {
            InitialData::Riemann { u_l, u_r, x0 } => {
                if axis > 0 {
                    return 1.0;
                }
                let x0 = x0.rem_euclid(len);
                let left = (x0.min(b) - a).max(0.0);
                (u_l * left + u_r * (h - left)) / h
            }
            InitialData::Bump { center, width, .. } => {
                if width >= len {
                    return 1.0;
                }
                let lo = center - 0.5 * width;
                let hi = center + 0.5 * width;
                // images of [lo, hi] that can touch a cell inside [0, L)
                let first = ((a - hi) / len).floor() as i64;
                let last = ((b - lo) / len).ceil() as i64;
                let covered: f64 = (first..=last)
                    .map(|k| {
                        let s = k as f64 * len;
                        ((hi + s).min(b) - (lo + s).max(a)).max(0.0)
                    })
                    .sum();
                covered.min(h) / h
            }
            InitialData::Sine { .. } => {
                let w = std::f64::consts::TAU / len;
                ((w * a).cos() - (w * b).cos()) / (w * h)
            }
        }
    }
}
