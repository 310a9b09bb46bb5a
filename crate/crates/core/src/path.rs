//! Driving signals `z : [0, T] -> R^N`, stored as piecewise-linear samples.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest path the dense-Cholesky fBm generator accepts.
pub const FBM_MAX_SAMPLES: usize = 4096;

const TIME_TOL: f64 = 1e-12;

/// Sampled continuous path, linear between samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverPath {
    times: Vec<f64>,
    /// Sample-major: `values[i * dim + c]`.
    values: Vec<f64>,
    dim: usize,
}

impl DriverPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let dim = values.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidPath(
                "path needs at least one component".into(),
            ));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidPath(
                "sample dimension must be constant".into(),
            ));
        }
        Self::from_flat(times, values.concat(), dim)
    }

    pub fn from_flat(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPath("path needs at least two samples".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!(
                "path must start at t = 0, got {}",
                times[0]
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!(
                "times not strictly increasing at sample {}",
                i + 1
            )));
        }
        if dim == 0 || values.len() != times.len() * dim {
            return Err(Error::InvalidPath(
                "values do not match times and dimension".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite path value".into()));
        }
        Ok(Self { times, values, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -TIME_TOL && t <= self.end_time() + TIME_TOL) {
            return Err(Error::TimeOutOfRange {
                time: t,
                end: self.end_time(),
            });
        }
        Ok(())
    }

    /// Index `i` of the segment `[t_i, t_{i+1}]` containing `t`.
    pub(crate) fn segment_of(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.saturating_sub(1).min(self.times.len() - 2)
    }

    /// Writes `z(t)` into `out` (clamped to the sampled range).
    pub(crate) fn value_into(&self, t: f64, out: &mut [f64]) {
        let i = self.segment_of(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, b) = (self.sample(i), self.sample(i + 1));
        for c in 0..self.dim {
            out[c] = if w == 0.0 {
                a[c]
            } else if w == 1.0 {
                b[c]
            } else {
                a[c] + w * (b[c] - a[c])
            };
        }
    }

    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let mut out = vec![0.0; self.dim];
        self.value_into(t, &mut out);
        Ok(out)
    }

    /// `z(t) - z(s)` for `0 <= s <= t <= T`.
    pub fn increment(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        self.check_time(s)?;
        self.check_time(t)?;
        if s > t {
            return Err(Error::InvalidParameter {
                name: "increment".into(),
                reason: format!("start {s} after end {t}"),
            });
        }
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        self.value_into(s, &mut a);
        self.value_into(t, &mut b);
        Ok(b.iter().zip(&a).map(|(x, y)| x - y).collect())
    }

    /// Same path with extra samples at `points` (values by interpolation).
    pub fn with_points(&self, points: &[f64]) -> Result<Self> {
        let mut extra: Vec<f64> = Vec::new();
        for &t in points {
            self.check_time(t)?;
            let t = t.clamp(0.0, self.end_time());
            let i = self.segment_of(t);
            let near =
                (self.times[i] - t).abs() <= TIME_TOL || (self.times[i + 1] - t).abs() <= TIME_TOL;
            if !near {
                extra.push(t);
            }
        }
        if extra.is_empty() {
            return Ok(self.clone());
        }
        let mut times = self.times.clone();
        times.extend_from_slice(&extra);
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= TIME_TOL);
        let mut values = Vec::with_capacity(times.len() * self.dim);
        let mut buf = vec![0.0; self.dim];
        let mut next_original = 0;
        for &t in &times {
            // keep original samples bit-for-bit
            if next_original < self.times.len() && self.times[next_original] == t {
                values.extend_from_slice(self.sample(next_original));
                next_original += 1;
            } else {
                self.value_into(t, &mut buf);
                values.extend_from_slice(&buf);
            }
        }
        Self::from_flat(times, values, self.dim)
    }

    /// Ensures every partition point is a sample time.
    pub fn with_partition(&self, p: &TimePartition) -> Result<Self> {
        if p.t_final() > self.end_time() + TIME_TOL {
            return Err(Error::InvalidPath(format!(
                "partition ends at {} but the path ends at {}",
                p.t_final(),
                self.end_time()
            )));
        }
        self.with_points(&p.times())
    }

    /// Restriction to `[0, t1]`, with a sample at `t1`.
    pub fn restrict(&self, t1: f64) -> Result<Self> {
        self.check_time(t1)?;
        let t1 = t1.clamp(0.0, self.end_time());
        if t1 == 0.0 {
            return Err(Error::InvalidPath(
                "cannot restrict a path to [0, 0]".into(),
            ));
        }
        let with = self.with_points(&[t1])?;
        let keep = with.times.partition_point(|&s| s <= t1 + TIME_TOL);
        let mut times = with.times[..keep].to_vec();
        let values = with.values[..keep * self.dim].to_vec();
        *times.last_mut().unwrap() = t1;
        Self::from_flat(times, values, self.dim)
    }

    /// Time reversal on `[0, t1]`: `z^{t1}(t) = z(t1 - t)`.
    pub fn reverse(&self, t1: f64) -> Result<Self> {
        let r = self.restrict(t1)?;
        let times: Vec<f64> = r.times.iter().rev().map(|&s| r.end_time() - s).collect();
        let mut values = Vec::with_capacity(r.values.len());
        for i in (0..r.len()).rev() {
            values.extend_from_slice(r.sample(i));
        }
        Self::from_flat(times, values, self.dim)
    }

    /// Writes `t,z1,...,zN` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|c| format!("z{c}")));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.sample(i).iter().map(|v| v.to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::InvalidPath("expected header t,z1,...".into()));
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidPath(format!("bad number {s:?}: {e}")))
            };
            times.push(parse(&rec[0])?);
            for c in 1..=dim {
                values.push(parse(&rec[c])?);
            }
        }
        Self::from_flat(times, values, dim)
    }
}

/// Uniform partition `t_k = k T / K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimePartition {
    t_final: f64,
    steps: usize,
}

impl TimePartition {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) || steps == 0 {
            return Err(Error::param(
                "partition",
                format!("need T > 0 and K >= 1, got T = {t_final}, K = {steps}"),
            ));
        }
        Ok(Self { t_final, steps })
    }

    /// Partition with step `dt`; `T / dt` must be an integer.
    pub fn from_dt(t_final: f64, dt: f64) -> Result<Self> {
        let k = t_final / dt;
        let kr = k.round();
        if !(dt > 0.0) || kr < 1.0 || (k - kr).abs() > 1e-9 * kr {
            return Err(Error::param(
                "dt",
                format!("T = {t_final} is not an integer multiple of dt = {dt}"),
            ));
        }
        Self::new(t_final, kr as usize)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.t_final
        } else {
            k as f64 * self.t_final / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index `k` with `t_k = t` (within rounding), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.t_final * self.steps as f64).round();
        if k < 0.0 || k > self.steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.t_final.max(1.0)).then_some(k)
    }

    /// Whether every point of `self` is a point of `finer`.
    pub fn is_refined_by(&self, finer: &TimePartition) -> bool {
        (self.t_final - finer.t_final).abs() <= 1e-12 * self.t_final.max(1.0)
            && finer.steps.is_multiple_of(self.steps)
    }
}

/// `max_k sup_{t in [t_k, t_{k+1}]} |z_t - z_{t_k}|` (Euclidean norm).
///
/// Exact for the piecewise-linear model: the sup is attained at samples or
/// partition points.
pub fn delta_z(z: &DriverPath, p: &TimePartition) -> Result<f64> {
    oscillation(z, p, false)
}

/// Endpoint-only variant `max_k |z_{t_{k+1}} - z_{t_k}|`.
pub fn delta_z_endpoint(z: &DriverPath, p: &TimePartition) -> Result<f64> {
    oscillation(z, p, true)
}

fn oscillation(z: &DriverPath, p: &TimePartition, endpoints_only: bool) -> Result<f64> {
    if p.t_final() > z.end_time() + TIME_TOL {
        return Err(Error::InvalidPath(format!(
            "partition ends at {} beyond the path end {}",
            p.t_final(),
            z.end_time()
        )));
    }
    let d = z.dim();
    let mut base = vec![0.0; d];
    let mut cur = vec![0.0; d];
    let norm = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut worst = 0.0f64;
    for k in 0..p.steps() {
        let (t0, t1) = (p.time(k), p.time(k + 1));
        z.value_into(t0, &mut base);
        z.value_into(t1, &mut cur);
        worst = worst.max(norm(&cur, &base));
        if endpoints_only {
            continue;
        }
        let first = z.times.partition_point(|&s| s <= t0);
        for i in first..z.len() {
            if z.times[i] >= t1 {
                break;
            }
            worst = worst.max(norm(z.sample(i), &base));
        }
    }
    Ok(worst)
}

fn default_dim() -> usize {
    1
}

fn default_oversampling() -> usize {
    16
}

/// Recipe for a driving path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathSpec {
    /// `z(t) = slope * t`.
    Deterministic { slope: Vec<f64> },
    /// Triangle wave from 0 up to `amplitude` and back, repeating every `period`.
    Zigzag {
        period: f64,
        amplitude: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Independent Brownian components.
    Brownian {
        seed: u64,
        /// Samples per step of the finest partition the path serves.
        #[serde(default = "default_oversampling")]
        oversampling: usize,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Independent fractional Brownian components with Hurst index `hurst`.
    Fbm {
        hurst: f64,
        seed: u64,
        #[serde(default = "default_oversampling")]
        oversampling: usize,
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

impl PathSpec {
    pub fn dim(&self) -> usize {
        match self {
            PathSpec::Deterministic { slope } => slope.len(),
            PathSpec::Zigzag { dim, .. }
            | PathSpec::Brownian { dim, .. }
            | PathSpec::Fbm { dim, .. } => *dim,
        }
    }

    /// Samples per partition step requested by the spec (1 for closed forms).
    pub fn oversampling(&self) -> usize {
        match self {
            PathSpec::Brownian { oversampling, .. } | PathSpec::Fbm { oversampling, .. } => {
                *oversampling
            }
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| Err(Error::param(name, reason));
        if self.dim() == 0 || self.dim() > crate::grid::MAX_DIM {
            return bad("path.dim", format!("must be 1 or 2, got {}", self.dim()));
        }
        match self {
            PathSpec::Deterministic { slope } => {
                if slope.iter().any(|s| !s.is_finite()) {
                    return bad("path.slope", "must be finite".into());
                }
            }
            PathSpec::Zigzag {
                period, amplitude, ..
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return bad("path.period", format!("must be positive, got {period}"));
                }
                if !amplitude.is_finite() {
                    return bad("path.amplitude", "must be finite".into());
                }
            }
            PathSpec::Brownian { oversampling, .. } => {
                if *oversampling == 0 {
                    return bad("path.oversampling", "must be at least 1".into());
                }
            }
            PathSpec::Fbm {
                hurst,
                oversampling,
                ..
            } => {
                if !(*hurst > 0.0 && *hurst < 1.0) {
                    return bad("path.hurst", format!("must lie in (0, 1), got {hurst}"));
                }
                if *oversampling == 0 {
                    return bad("path.oversampling", "must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

fn zigzag_value(t: f64, period: f64, amplitude: f64) -> f64 {
    let s = (t / period).fract();
    if s < 0.5 {
        2.0 * amplitude * s
    } else {
        2.0 * amplitude * (1.0 - s)
    }
}

/// Covariance `(s^2H + t^2H - |t - s|^2H) / 2` of fBm at `times`.
pub fn fbm_covariance(times: &[f64], hurst: f64) -> DMatrix<f64> {
    let h2 = 2.0 * hurst;
    let n = times.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (s, t) = (times[i], times[j]);
        0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
    })
}

/// Samples a path on `n_samples` uniform times covering `[0, T]`.
pub fn generate(spec: &PathSpec, t_final: f64, n_samples: usize) -> Result<DriverPath> {
    spec.validate()?;
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::param(
            "T",
            format!("must be positive, got {t_final}"),
        ));
    }
    if n_samples < 2 {
        return Err(Error::param(
            "n_samples",
            format!("must be >= 2, got {n_samples}"),
        ));
    }
    let dim = spec.dim();
    let step = t_final / (n_samples - 1) as f64;
    let uniform: Vec<f64> = (0..n_samples)
        .map(|i| {
            if i + 1 == n_samples {
                t_final
            } else {
                i as f64 * step
            }
        })
        .collect();
    match spec {
        PathSpec::Deterministic { slope } => {
            let values = uniform
                .iter()
                .flat_map(|&t| slope.iter().map(move |s| s * t))
                .collect();
            DriverPath::from_flat(uniform, values, dim)
        }
        PathSpec::Zigzag {
            period, amplitude, ..
        } => {
            // add the kinks so the path is exactly the triangle wave
            let half = 0.5 * period;
            let kinks = (1..).map(|k| k as f64 * half).take_while(|&t| t < t_final);
            let mut times: Vec<f64> = uniform.iter().copied().chain(kinks).collect();
            times.sort_by(f64::total_cmp);
            times.dedup_by(|a, b| (*a - *b).abs() <= TIME_TOL);
            let values = times
                .iter()
                .flat_map(|&t| std::iter::repeat_n(zigzag_value(t, *period, *amplitude), dim))
                .collect();
            DriverPath::from_flat(times, values, dim)
        }
        PathSpec::Brownian { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut values = vec![0.0; n_samples * dim];
            for i in 1..n_samples {
                let sd = (uniform[i] - uniform[i - 1]).sqrt();
                for c in 0..dim {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    values[i * dim + c] = values[(i - 1) * dim + c] + sd * g;
                }
            }
            DriverPath::from_flat(uniform, values, dim)
        }
        PathSpec::Fbm { hurst, seed, .. } => {
            if n_samples > FBM_MAX_SAMPLES {
                return Err(Error::param(
                    "n_samples",
                    format!(
                        "fBm synthesis is limited to {FBM_MAX_SAMPLES} samples, got {n_samples}"
                    ),
                ));
            }
            let cov = fbm_covariance(&uniform[1..], *hurst);
            let chol = nalgebra::Cholesky::new(cov)
                .ok_or_else(|| Error::param("hurst", "fBm covariance is not positive definite"))?;
            let lower = chol.l();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let m = n_samples - 1;
            let mut values = vec![0.0; n_samples * dim];
            for c in 0..dim {
                let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                for i in 0..m {
                    let row = lower.row(i);
                    let v: f64 = (0..=i).map(|k| row[k] * g[k]).sum();
                    values[(i + 1) * dim + c] = v;
                }
            }
            DriverPath::from_flat(uniform, values, dim)
        }
    }
}
