//! Flux functions: spatially homogeneous `A(xi)` and inhomogeneous `A(x, xi)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;

/// Dense polynomial `c_0 + c_1 xi + c_2 xi^2 + ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * xi + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }
}

/// Analytic bounds on the speed `a = A'` over `[-eta, eta]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedBounds {
    /// `sup |a|`
    pub sup: f64,
    /// Lipschitz constant of `a`, i.e. `sup |a'|`.
    pub lipschitz: f64,
}

/// Spatially homogeneous flux `A = (A_1, ..., A_N)` with speeds `a_i = A_i'`.
pub trait HomogeneousFlux: Send + Sync {
    fn dim(&self) -> usize;
    fn flux(&self, axis: usize, xi: f64) -> f64;
    fn speed(&self, axis: usize, xi: f64) -> f64;

    /// Exact speed bounds on `[-eta, eta]`, when known in closed form.
    fn speed_bounds(&self, _eta: f64) -> Option<SpeedBounds> {
        None
    }
}

/// Polynomial flux per component.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialFlux {
    flux: Vec<Polynomial>,
    speed: Vec<Polynomial>,
}

impl PolynomialFlux {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        if components.is_empty() || components.len() > MAX_DIM {
            return Err(Error::InvalidFlux(format!(
                "flux needs 1 or 2 components, got {}",
                components.len()
            )));
        }
        let speed = components.iter().map(Polynomial::derivative).collect();
        Ok(Self {
            flux: components,
            speed,
        })
    }

    /// `A(xi) = xi^2 / 2` in every direction.
    pub fn burgers(dim: usize) -> Result<Self> {
        Self::new(vec![Polynomial::new(vec![0.0, 0.0, 0.5]); dim])
    }

    /// `A(xi) = c xi` in every direction.
    pub fn linear(speed: f64, dim: usize) -> Result<Self> {
        Self::new(vec![Polynomial::new(vec![0.0, speed]); dim])
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.flux
    }
}

impl HomogeneousFlux for PolynomialFlux {
    fn dim(&self) -> usize {
        self.flux.len()
    }

    fn flux(&self, axis: usize, xi: f64) -> f64 {
        self.flux[axis].eval(xi)
    }

    fn speed(&self, axis: usize, xi: f64) -> f64 {
        self.speed[axis].eval(xi)
    }

    fn speed_bounds(&self, eta: f64) -> Option<SpeedBounds> {
        // closed form for polynomials of degree <= 2: a is affine
        if self.flux.iter().all(|p| p.coefficients().len() <= 3) {
            let mut sup = 0.0f64;
            let mut lip = 0.0f64;
            for a in &self.speed {
                sup = sup.max(a.eval(eta).abs()).max(a.eval(-eta).abs());
                lip = lip.max(a.derivative().eval(0.0).abs());
            }
            Some(SpeedBounds {
                sup,
                lipschitz: lip,
            })
        } else {
            None
        }
    }
}

/// `sup |a|` and `Lip(a)` over `[-eta, eta]`: analytic when available,
/// otherwise from `samples` equispaced evaluations.
pub fn speed_bounds(flux: &dyn HomogeneousFlux, eta: f64, samples: usize) -> SpeedBounds {
    if let Some(b) = flux.speed_bounds(eta) {
        return b;
    }
    let samples = samples.max(2);
    let h = 2.0 * eta / (samples - 1) as f64;
    let mut sup = 0.0f64;
    let mut lip = 0.0f64;
    for axis in 0..flux.dim() {
        let mut prev = flux.speed(axis, -eta);
        sup = sup.max(prev.abs());
        for i in 1..samples {
            let xi = -eta + i as f64 * h;
            let a = flux.speed(axis, xi);
            sup = sup.max(a.abs());
            if h > 0.0 {
                lip = lip.max((a - prev).abs() / h);
            }
            prev = a;
        }
    }
    SpeedBounds {
        sup,
        lipschitz: lip,
    }
}

/// Largest central-difference mismatch `|(A(xi+h) - A(xi-h)) / 2h - a(xi)|`.
pub fn homogeneous_derivative_error(flux: &dyn HomogeneousFlux, xis: &[f64], h: f64) -> f64 {
    let mut worst = 0.0f64;
    for axis in 0..flux.dim() {
        for &xi in xis {
            let fd = (flux.flux(axis, xi + h) - flux.flux(axis, xi - h)) / (2.0 * h);
            worst = worst.max((fd - flux.speed(axis, xi)).abs());
        }
    }
    worst
}

/// Spatially inhomogeneous flux `A_i(x, xi)` with `a_i = d_xi A_i` and
/// `b_i = d_{x_i} A_i`.
pub trait InhomogeneousFlux: Send + Sync {
    fn dim(&self) -> usize;
    fn flux(&self, axis: usize, x: &[f64; MAX_DIM], xi: f64) -> f64;
    fn speed(&self, axis: usize, x: &[f64; MAX_DIM], xi: f64) -> f64;
    fn x_derivative(&self, axis: usize, x: &[f64; MAX_DIM], xi: f64) -> f64;
}

/// Spatial modulation `V(s) = mean + amplitude * sin(wavenumber * s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialFactor {
    pub mean: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
}

impl SpatialFactor {
    pub fn constant(c: f64) -> Self {
        Self {
            mean: c,
            amplitude: 0.0,
            wavenumber: 0.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.amplitude == 0.0 {
            self.mean
        } else {
            self.mean + self.amplitude * (self.wavenumber * s).sin()
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * self.wavenumber * (self.wavenumber * s).cos()
        }
    }
}

/// `A_i(x, xi) = V_i(x_i) P_i(xi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableFlux {
    factors: Vec<SpatialFactor>,
    profiles: Vec<Polynomial>,
    speeds: Vec<Polynomial>,
}

impl SeparableFlux {
    pub fn new(components: Vec<(SpatialFactor, Polynomial)>) -> Result<Self> {
        if components.is_empty() || components.len() > MAX_DIM {
            return Err(Error::InvalidFlux(format!(
                "flux needs 1 or 2 components, got {}",
                components.len()
            )));
        }
        let (factors, profiles): (Vec<_>, Vec<_>) = components.into_iter().unzip();
        for (i, (v, p)) in factors.iter().zip(&profiles).enumerate() {
            // b(x, 0) = V'(x) P(0) must vanish
            if v.amplitude != 0.0 && p.eval(0.0) != 0.0 {
                return Err(Error::InvalidFlux(format!(
                    "component {i}: spatially varying flux needs P(0) = 0 so that b(x, 0) = 0"
                )));
            }
        }
        let speeds = profiles.iter().map(Polynomial::derivative).collect();
        Ok(Self {
            factors,
            profiles,
            speeds,
        })
    }

    /// `A(x, xi) = (mean + amplitude sin x) xi^2 / 2` in every direction.
    pub fn sine_speed_burgers(mean: f64, amplitude: f64, dim: usize) -> Result<Self> {
        let v = SpatialFactor {
            mean,
            amplitude,
            wavenumber: 1.0,
        };
        Self::new(vec![(v, Polynomial::new(vec![0.0, 0.0, 0.5])); dim])
    }

    pub fn factors(&self) -> &[SpatialFactor] {
        &self.factors
    }

    pub fn profiles(&self) -> &[Polynomial] {
        &self.profiles
    }

    /// The homogeneous flux obtained when every factor is constant.
    pub fn homogeneous_part(&self) -> Option<PolynomialFlux> {
        if self.factors.iter().any(|f| f.amplitude != 0.0) {
            return None;
        }
        let comps = self
            .factors
            .iter()
            .zip(&self.profiles)
            .map(|(f, p)| Polynomial::new(p.coefficients().iter().map(|c| c * f.mean).collect()))
            .collect();
        PolynomialFlux::new(comps).ok()
    }
}

impl InhomogeneousFlux for SeparableFlux {
    fn dim(&self) -> usize {
        self.factors.len()
    }

    fn flux(&self, axis: usize, x: &[f64; MAX_DIM], xi: f64) -> f64 {
        self.factors[axis].eval(x[axis]) * self.profiles[axis].eval(xi)
    }

    fn speed(&self, axis: usize, x: &[f64; MAX_DIM], xi: f64) -> f64 {
        self.factors[axis].eval(x[axis]) * self.speeds[axis].eval(xi)
    }

    fn x_derivative(&self, axis: usize, x: &[f64; MAX_DIM], xi: f64) -> f64 {
        self.factors[axis].derivative(x[axis]) * self.profiles[axis].eval(xi)
    }
}

/// Consistency report for an inhomogeneous flux on sampled points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InhomogeneousCheck {
    /// `max |b_i(x, 0)|`
    pub b_at_zero: f64,
    /// `max |FD_xi A_i - a_i|`
    pub speed_error: f64,
    /// `max |FD_{x_i} A_i - b_i|`
    pub x_derivative_error: f64,
}

pub fn check_inhomogeneous(
    flux: &dyn InhomogeneousFlux,
    points: &[([f64; MAX_DIM], f64)],
    h: f64,
) -> InhomogeneousCheck {
    let mut out = InhomogeneousCheck {
        b_at_zero: 0.0,
        speed_error: 0.0,
        x_derivative_error: 0.0,
    };
    for axis in 0..flux.dim() {
        for (x, xi) in points {
            out.b_at_zero = out.b_at_zero.max(flux.x_derivative(axis, x, 0.0).abs());
            let fd_xi = (flux.flux(axis, x, xi + h) - flux.flux(axis, x, xi - h)) / (2.0 * h);
            out.speed_error = out
                .speed_error
                .max((fd_xi - flux.speed(axis, x, *xi)).abs());
            let (mut xp, mut xm) = (*x, *x);
            xp[axis] += h;
            xm[axis] -= h;
            let fd_x = (flux.flux(axis, &xp, *xi) - flux.flux(axis, &xm, *xi)) / (2.0 * h);
            out.x_derivative_error = out
                .x_derivative_error
                .max((fd_x - flux.x_derivative(axis, x, *xi)).abs());
        }
    }
    out
}
