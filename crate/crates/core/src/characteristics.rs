//! Backward characteristics `dX = a(X, Xi) dw`, `dXi = -b(X, Xi) dw` driven
//! by the reversed path `w(s) = z(t1 - s)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::InhomogeneousFlux;
use crate::grid::MAX_DIM;
use crate::path::DriverPath;

/// Finite-difference spacing used for the Jacobian.
pub const JACOBIAN_SPACING: f64 = 1e-5;

/// Substeps per path segment implied by the default step rule.
pub const DEFAULT_SUBSTEPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `(x, xi)` at `t1` to the foot `(X, Xi)` at `t1 - t`.
    Backward,
    /// The inverse map, from the foot back to `t1`.
    Forward,
}

/// State `(x_1, x_2, xi)`; unused coordinates stay zero.
pub type State = [f64; MAX_DIM + 1];

/// Linear piece of the reversed path: duration and slope `dw/ds`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub duration: f64,
    pub slope: [f64; MAX_DIM],
    pub substeps: usize,
}

/// Characteristic flow of `flux` along `path` with RK4 step at most `h`.
pub struct CharacteristicFlow<'a> {
    flux: &'a dyn InhomogeneousFlux,
    path: &'a DriverPath,
    h: f64,
    direction: Direction,
}

/// `min(dt, smallest path sample spacing) / DEFAULT_SUBSTEPS`.
pub fn default_step(dt: f64, path: &DriverPath) -> f64 {
    let spacing = path
        .times()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    dt.min(spacing) / DEFAULT_SUBSTEPS as f64
}

impl<'a> CharacteristicFlow<'a> {
    pub fn new(
        flux: &'a dyn InhomogeneousFlux,
        path: &'a DriverPath,
        h: f64,
        direction: Direction,
    ) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(
                "h",
                format!("integrator step must be positive, got {h}"),
            ));
        }
        if flux.dim() != path.dim() {
            return Err(Error::GridMismatch(format!(
                "flux has {} components, path has {}",
                flux.dim(),
                path.dim()
            )));
        }
        Ok(Self {
            flux,
            path,
            h,
            direction,
        })
    }

    pub fn dim(&self) -> usize {
        self.flux.dim()
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self {
            flux: self.flux,
            path: self.path,
            h: self.h,
            direction,
        }
    }

    /// Pieces of `w(s) = z(t1 - s)` on `[0, t]`, in order of increasing `s`.
    /// Breaks fall exactly on path samples.
    pub fn pieces(&self, t1: f64, t: f64) -> Result<Vec<Piece>> {
        let end = self.path.end_time();
        if !(t >= 0.0 && t <= t1 + 1e-12 && t1 <= end + 1e-12) {
            return Err(Error::TimeOutOfRange { time: t1 - t, end });
        }
        let t1 = t1.min(end);
        let t0 = (t1 - t).max(0.0);
        let times = self.path.times();
        let mut knots = vec![t0];
        let first = times.partition_point(|&s| s <= t0);
        knots.extend(times[first..].iter().copied().take_while(|&s| s < t1));
        knots.push(t1);
        let dim = self.dim();
        let mut a = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        let mut pieces = Vec::with_capacity(knots.len());
        for w in knots.windows(2).rev() {
            let duration = w[1] - w[0];
            if duration <= 0.0 {
                continue;
            }
            self.path.value_into(w[0], &mut a[..dim]);
            self.path.value_into(w[1], &mut b[..dim]);
            let mut slope = [0.0; MAX_DIM];
            for c in 0..dim {
                slope[c] = -(b[c] - a[c]) / duration;
            }
            let substeps = ((duration / self.h).ceil() as usize).max(1);
            pieces.push(Piece {
                duration,
                slope,
                substeps,
            });
        }
        Ok(pieces)
    }

    fn rhs(&self, s: &State, slope: &[f64; MAX_DIM]) -> State {
        let dim = self.dim();
        let x = [s[0], s[1]];
        let xi = s[MAX_DIM];
        let mut out = [0.0; MAX_DIM + 1];
        for i in 0..dim {
            if slope[i] != 0.0 {
                out[i] = self.flux.speed(i, &x, xi) * slope[i];
                out[MAX_DIM] -= self.flux.x_derivative(i, &x, xi) * slope[i];
            }
        }
        out
    }

    fn rk4(&self, s: &State, slope: &[f64; MAX_DIM], h: f64) -> State {
        let add = |a: &State, k: &State, c: f64| {
            let mut r = *a;
            for i in 0..r.len() {
                r[i] += c * k[i];
            }
            r
        };
        let k1 = self.rhs(s, slope);
        let k2 = self.rhs(&add(s, &k1, 0.5 * h), slope);
        let k3 = self.rhs(&add(s, &k2, 0.5 * h), slope);
        let k4 = self.rhs(&add(s, &k3, h), slope);
        let mut r = *s;
        for i in 0..r.len() {
            r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r
    }

    /// Integrates over precomputed pieces in the flow's direction.
    pub fn integrate(&self, pieces: &[Piece], start: State) -> Result<State> {
        let mut s = start;
        let mut elapsed = 0.0;
        let mut step = |piece: &Piece, sign: f64, s: &mut State| -> Result<()> {
            let h = piece.duration / piece.substeps as f64;
            let slope = [sign * piece.slope[0], sign * piece.slope[1]];
            if slope.iter().all(|&v| v == 0.0) {
                elapsed += piece.duration;
                return Ok(());
            }
            for _ in 0..piece.substeps {
                *s = self.rk4(s, &slope, h);
                elapsed += h;
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { time: elapsed });
                }
            }
            Ok(())
        };
        match self.direction {
            Direction::Backward => {
                for p in pieces {
                    step(p, 1.0, &mut s)?;
                }
            }
            Direction::Forward => {
                for p in pieces.iter().rev() {
                    step(p, -1.0, &mut s)?;
                }
            }
        }
        Ok(s)
    }
}

/// Integrates from `(x, xi)` over reversed time `[0, t]` of `z^{t1}`.
pub fn solve_characteristics(
    flow: &CharacteristicFlow,
    x: &[f64],
    xi: f64,
    t1: f64,
    t: f64,
) -> Result<([f64; MAX_DIM], f64)> {
    if x.len() != flow.dim() {
        return Err(Error::GridMismatch(format!(
            "point has {} coordinates, flow has dimension {}",
            x.len(),
            flow.dim()
        )));
    }
    let pieces = flow.pieces(t1, t)?;
    let mut start = [0.0; MAX_DIM + 1];
    start[..x.len()].copy_from_slice(x);
    start[MAX_DIM] = xi;
    let s = flow.integrate(&pieces, start)?;
    Ok(([s[0], s[1]], s[MAX_DIM]))
}

/// Worst-case flow diagnostics over a set of sample points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    /// `max |det J - 1|`
    pub max_det_deviation: f64,
    /// Points whose `Xi` has a different sign than `xi`.
    pub sign_violations: usize,
    /// Largest `|Xi|` among those points.
    pub max_sign_violation: f64,
    /// `max |forward(backward(p)) - p|`
    pub max_inverse_defect: f64,
}

fn sign_mismatch(xi: f64, big_xi: f64) -> bool {
    match xi.partial_cmp(&0.0) {
        Some(std::cmp::Ordering::Greater) => big_xi < 0.0,
        Some(std::cmp::Ordering::Less) => big_xi > 0.0,
        _ => big_xi != 0.0,
    }
}

fn determinant(m: &[[f64; MAX_DIM + 1]; MAX_DIM + 1], n: usize) -> f64 {
    match n {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Volume, sign and inverse checks for the backward flow over `[0, t]`.
pub fn flow_diagnostics(
    flow: &CharacteristicFlow,
    points: &[([f64; MAX_DIM], f64)],
    t1: f64,
    t: f64,
) -> Result<FlowDiagnostics> {
    let backward = flow.with_direction(Direction::Backward);
    let forward = flow.with_direction(Direction::Forward);
    let pieces = flow.pieces(t1, t)?;
    let dim = flow.dim();
    let n = dim + 1;
    // map coordinate k of the (N+1)-vector to the state slot
    let slot = |k: usize| if k < dim { k } else { MAX_DIM };
    let mut d = FlowDiagnostics::default();
    for (x, xi) in points {
        let mut p = [0.0; MAX_DIM + 1];
        p[..dim].copy_from_slice(&x[..dim]);
        p[MAX_DIM] = *xi;
        let image = backward.integrate(&pieces, p)?;
        if sign_mismatch(*xi, image[MAX_DIM]) {
            d.sign_violations += 1;
            d.max_sign_violation = d.max_sign_violation.max(image[MAX_DIM].abs());
        }
        let back = forward.integrate(&pieces, image)?;
        let defect = (0..n)
            .map(|k| (back[slot(k)] - p[slot(k)]).abs())
            .fold(0.0, f64::max);
        d.max_inverse_defect = d.max_inverse_defect.max(defect);

        let mut jac = [[0.0; MAX_DIM + 1]; MAX_DIM + 1];
        for col in 0..n {
            let (mut pp, mut pm) = (p, p);
            pp[slot(col)] += JACOBIAN_SPACING;
            pm[slot(col)] -= JACOBIAN_SPACING;
            let ip = backward.integrate(&pieces, pp)?;
            let im = backward.integrate(&pieces, pm)?;
            for row in 0..n {
                jac[row][col] = (ip[slot(row)] - im[slot(row)]) / (2.0 * JACOBIAN_SPACING);
            }
        }
        d.max_det_deviation = d.max_det_deviation.max((determinant(&jac, n) - 1.0).abs());
    }
    Ok(d)
}

/// `max |A(X, Xi) - A(x, xi)|` at the end of the backward flow (N = 1).
pub fn hamiltonian_drift(
    flow: &CharacteristicFlow,
    flux: &dyn InhomogeneousFlux,
    points: &[([f64; MAX_DIM], f64)],
    t1: f64,
    t: f64,
) -> Result<f64> {
    if flow.dim() != 1 {
        return Err(Error::param(
            "hamiltonian_drift",
            "defined for a single driver, N = 1",
        ));
    }
    let mut worst = 0.0f64;
    for (x, xi) in points {
        let (big_x, big_xi) = solve_characteristics(flow, &x[..1], *xi, t1, t)?;
        let drift = (flux.flux(0, &big_x, big_xi) - flux.flux(0, x, *xi)).abs();
        worst = worst.max(drift);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::SeparableFlux;
    use crate::path::{generate, PathSpec};

    fn linear_path(slope: f64) -> DriverPath {
        generate(&PathSpec::Deterministic { slope: vec![slope] }, 1.0, 11).unwrap()
    }

    #[test]
    fn zero_velocity_is_stationary() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = generate(
            &PathSpec::Brownian {
                seed: 1,
                oversampling: 1,
                dim: 1,
            },
            1.0,
            33,
        )
        .unwrap();
        let flow = CharacteristicFlow::new(&flux, &z, 1e-2, Direction::Backward).unwrap();
        let (x, xi) = solve_characteristics(&flow, &[0.7], 0.0, 1.0, 0.6).unwrap();
        assert_eq!((x[0], xi), (0.7, 0.0));
    }

    #[test]
    fn constant_factor_gives_the_exact_shift() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.0, 1).unwrap();
        let z = generate(
            &PathSpec::Zigzag {
                period: 0.4,
                amplitude: 0.3,
                dim: 1,
            },
            1.0,
            9,
        )
        .unwrap();
        let flow = CharacteristicFlow::new(&flux, &z, 1e-2, Direction::Backward).unwrap();
        let (t1, t) = (0.9, 0.55);
        let (x, xi) = solve_characteristics(&flow, &[1.2], -0.8, t1, t).unwrap();
        let dz = z.increment(t1 - t, t1).unwrap()[0];
        assert!((x[0] - (1.2 + 0.8 * dz)).abs() < 1e-10);
        assert_eq!(xi, -0.8);
    }

    #[test]
    fn hamiltonian_is_conserved() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = linear_path(1.0);
        let flow = CharacteristicFlow::new(&flux, &z, 1e-3, Direction::Backward).unwrap();
        let points = [([0.3, 0.0], 0.9), ([2.0, 0.0], -0.4), ([5.0, 0.0], 0.2)];
        let drift = hamiltonian_drift(&flow, &flux, &points, 1.0, 1.0).unwrap();
        assert!(drift <= 1e-6, "{drift}");
    }

    #[test]
    fn shear_has_unit_determinant() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.0, 1).unwrap();
        let z = linear_path(1.0);
        let flow = CharacteristicFlow::new(&flux, &z, 1e-2, Direction::Backward).unwrap();
        let d =
            flow_diagnostics(&flow, &[([0.5, 0.0], 0.3), ([1.0, 0.0], -0.7)], 1.0, 0.5).unwrap();
        assert!(d.max_det_deviation <= 1e-8, "{d:?}");
        assert_eq!(d.sign_violations, 0);
    }

    #[test]
    fn sine_flow_diagnostics() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = linear_path(1.0);
        let flow = CharacteristicFlow::new(&flux, &z, 1e-3, Direction::Backward).unwrap();
        let pts: Vec<_> = (0..7)
            .map(|i| ([i as f64, 0.0], -0.9 + 0.3 * i as f64))
            .collect();
        let d = flow_diagnostics(&flow, &pts, 0.6, 0.1).unwrap();
        assert!(d.max_det_deviation <= 1e-5, "{d:?}");
        assert!(d.max_inverse_defect <= 1e-7, "{d:?}");
        assert_eq!(d.sign_violations, 0);
    }

    #[test]
    fn pieces_break_at_samples() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = linear_path(2.0);
        let flow = CharacteristicFlow::new(&flux, &z, 0.01, Direction::Backward).unwrap();
        let pieces = flow.pieces(0.55, 0.3).unwrap();
        let durations: Vec<f64> = pieces.iter().map(|p| p.duration).collect();
        assert_eq!(durations.len(), 4);
        assert!((durations.iter().sum::<f64>() - 0.3).abs() < 1e-15);
        assert!(pieces.iter().all(|p| (p.slope[0] + 2.0).abs() < 1e-12));
        assert!(flow.pieces(1.5, 0.1).is_err());
    }

    #[test]
    fn two_dimensional_flow_is_volume_preserving() {
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 2).unwrap();
        let z = generate(
            &PathSpec::Brownian {
                seed: 4,
                oversampling: 1,
                dim: 2,
            },
            1.0,
            65,
        )
        .unwrap();
        let flow = CharacteristicFlow::new(&flux, &z, 2e-3, Direction::Backward).unwrap();
        let d =
            flow_diagnostics(&flow, &[([0.4, 1.3], 0.6), ([2.2, 4.0], -0.5)], 0.5, 0.1).unwrap();
        assert!(d.max_det_deviation <= 1e-5, "{d:?}");
        assert!(d.max_inverse_defect <= 1e-7, "{d:?}");
    }
}
