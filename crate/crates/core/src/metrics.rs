//! Driving-task criticality metrics: brake and steer threat numbers
//! relative to a set of candidate trajectories (BTN_DT, STN_DT).
//!
//! Accelerations come from central second differences on the uniform
//! sample grid, split into the path frame: the tangent of the central
//! first difference gives the longitudinal direction, its left normal the
//! lateral one. Endpoint samples are not evaluated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trajectory needs at least 5 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample times must increase strictly with a uniform step (sample {0})")]
    NonUniformTime(usize),
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("zero-length path segment around sample {sample} of trajectory {trajectory}; tangent undefined")]
    DegenerateTrajectory { trajectory: usize, sample: usize },
    #[error("driving task has no trajectories")]
    EmptyDrivingTask,
    #[error("trajectory {0} does not cover the horizon")]
    HorizonNotCovered(usize),
    #[error("horizon contains no interior sample of trajectory {0}")]
    EmptyHorizon(usize),
    #[error("invalid acceleration field: {0}")]
    InvalidField(String),
    #[error("point ({x}, {y}) lies outside the acceleration field")]
    FieldCoverageGap { x: f64, y: f64 },
    #[error("available {0} acceleration is zero")]
    ZeroAvailableAcceleration(&'static str),
    #[error("bin edges must be finite and strictly ascending")]
    NonMonotoneEdges,
    #[error("at least one bin edge is required")]
    NoBinEdges,
    #[error("{labels} labels for {bins} bins")]
    LabelCount { labels: usize, bins: usize },
}

/// Relative tolerance on the sampling step.
const STEP_TOLERANCE: f64 = 1e-9;

/// Time-stamped planar positions with a uniform step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn new(samples: impl Into<Vec<[f64; 3]>>) -> Result<Self, MetricsError> {
        let samples = samples.into();
        if samples.len() < 5 {
            return Err(MetricsError::TooFewSamples(samples.len()));
        }
        if let Some(k) = samples.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(MetricsError::NonFinite(k));
        }
        let dt = samples[1][0] - samples[0][0];
        if dt <= 0.0 {
            return Err(MetricsError::NonUniformTime(1));
        }
        for k in 1..samples.len() {
            let step = samples[k][0] - samples[k - 1][0];
            if (step - dt).abs() > STEP_TOLERANCE * dt.max(samples[k][0].abs()) {
                return Err(MetricsError::NonUniformTime(k));
            }
        }
        Ok(Trajectory { samples })
    }

    /// Samples `f(t)` at `t0, t0 + dt, ...` (`n` samples).
    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> (f64, f64)) -> Result<Self, MetricsError> {
        Self::new(
            (0..n)
                .map(|k| {
                    let t = t0 + k as f64 * dt;
                    let (x, y) = f(t);
                    [t, x, y]
                })
                .collect::<Vec<_>>(),
        )
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn step(&self) -> f64 {
        (self.end() - self.start()) / (self.samples.len() - 1) as f64
    }

    pub fn start(&self) -> f64 {
        self.samples[0][0]
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1][0]
    }

    /// Same path with every time stamp multiplied by `factor`.
    pub fn time_scaled(&self, factor: f64) -> Result<Self, MetricsError> {
        Self::new(self.samples.iter().map(|&[t, x, y]| [t * factor, x, y]).collect::<Vec<_>>())
    }
}

/// Path-frame acceleration at one interior sample.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FrameAccel {
    long: f64,
    lat: f64,
}

/// Pre-filtered candidate trajectories over `[t_s, t_s + t_h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingTask {
    trajectories: Vec<Trajectory>,
    t_s: f64,
    t_h: f64,
}

impl DrivingTask {
    pub fn new(trajectories: Vec<Trajectory>, t_s: f64, t_h: f64) -> Result<Self, MetricsError> {
        if trajectories.is_empty() {
            return Err(MetricsError::EmptyDrivingTask);
        }
        if !(t_h >= 0.0 && t_s.is_finite() && t_h.is_finite()) {
            return Err(MetricsError::HorizonNotCovered(0));
        }
        for (k, tr) in trajectories.iter().enumerate() {
            let slack = STEP_TOLERANCE * tr.step();
            if tr.start() > t_s + slack || tr.end() < t_s + t_h - slack {
                return Err(MetricsError::HorizonNotCovered(k));
            }
        }
        Ok(DrivingTask { trajectories, t_s, t_h })
    }

    /// Uses the window common to all trajectories.
    pub fn spanning(trajectories: Vec<Trajectory>) -> Result<Self, MetricsError> {
        if trajectories.is_empty() {
            return Err(MetricsError::EmptyDrivingTask);
        }
        let t_s = trajectories.iter().map(Trajectory::start).fold(f64::NEG_INFINITY, f64::max);
        let t_e = trajectories.iter().map(Trajectory::end).fold(f64::INFINITY, f64::min);
        Self::new(trajectories, t_s, t_e - t_s)
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_s, self.t_s + self.t_h)
    }

    fn in_window(&self, tr: &Trajectory, t: f64) -> bool {
        let slack = STEP_TOLERANCE * tr.step();
        t >= self.t_s - slack && t <= self.t_s + self.t_h + slack
    }

    fn accelerations(&self, k: usize) -> Result<Vec<FrameAccel>, MetricsError> {
        let tr = &self.trajectories[k];
        let s = &tr.samples;
        let dt = tr.step();
        let mut out = Vec::new();
        for i in 1..s.len() - 1 {
            if !self.in_window(tr, s[i][0]) {
                continue;
            }
            let (prev, cur, next) = (s[i - 1], s[i], s[i + 1]);
            let chord = [next[1] - prev[1], next[2] - prev[2]];
            let len = chord[0].hypot(chord[1]);
            let magnitude = [prev, cur, next].iter().flat_map(|p| [p[1].abs(), p[2].abs()]).fold(0.0, f64::max);
            if len <= 4.0 * f64::EPSILON * magnitude.max(f64::MIN_POSITIVE) {
                return Err(MetricsError::DegenerateTrajectory { trajectory: k, sample: i });
            }
            let tangent = [chord[0] / len, chord[1] / len];
            let normal = [-tangent[1], tangent[0]];
            let acc = [(next[1] - 2.0 * cur[1] + prev[1]) / (dt * dt), (next[2] - 2.0 * cur[2] + prev[2]) / (dt * dt)];
            // Second differences of exactly linear motion are rounding noise.
            let floor = 16.0 * f64::EPSILON * magnitude / (dt * dt);
            let snap = |v: f64| if v.abs() <= floor { 0.0 } else { v };
            out.push(FrameAccel {
                long: snap(acc[0] * tangent[0] + acc[1] * tangent[1]),
                lat: snap(acc[0] * normal[0] + acc[1] * normal[1]),
            });
        }
        if out.is_empty() {
            return Err(MetricsError::EmptyHorizon(k));
        }
        Ok(out)
    }

    fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.trajectories.iter().flat_map(move |tr| {
            tr.samples.iter().filter(move |s| self.in_window(tr, s[0])).map(|s| (s[1], s[2]))
        })
    }
}

/// Required longitudinal acceleration (≤ 0): the least demanding
/// trajectory's strongest deceleration.
pub fn along_req_dt(dt: &DrivingTask) -> Result<f64, MetricsError> {
    let mut best = f64::NEG_INFINITY;
    for k in 0..dt.trajectories.len() {
        let worst = dt.accelerations(k)?.iter().map(|a| a.long).fold(f64::INFINITY, f64::min);
        best = best.max(worst);
    }
    Ok(best.min(0.0))
}

/// Required lateral acceleration (≥ 0): the least demanding trajectory's
/// peak `|a_lat|`.
pub fn alat_req_dt(dt: &DrivingTask) -> Result<f64, MetricsError> {
    let mut best = f64::INFINITY;
    for k in 0..dt.trajectories.len() {
        let peak = dt.accelerations(k)?.iter().map(|a| a.lat.abs()).fold(0.0, f64::max);
        best = best.min(peak);
    }
    Ok(best)
}

/// Available acceleration on a rectangular lattice. Cell `(i, j)` covers
/// `[x0 + i dx, x0 + (i+1) dx) × [y0 + j dy, y0 + (j+1) dy)`; cells are
/// stored row-major with `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelField {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    /// `(η_long ≤ 0, η_lat ≥ 0)` per cell.
    pub cells: Vec<(f64, f64)>,
}

impl AccelField {
    pub fn new(nx: usize, ny: usize, origin: (f64, f64), step: (f64, f64), cells: Vec<(f64, f64)>) -> Result<Self, MetricsError> {
        let bad = |m: String| Err(MetricsError::InvalidField(m));
        if nx == 0 || ny == 0 {
            return bad("empty lattice".into());
        }
        if cells.len() != nx * ny {
            return bad(format!("{} cells for a {nx}x{ny} lattice", cells.len()));
        }
        if !(step.0 > 0.0 && step.1 > 0.0 && step.0.is_finite() && step.1.is_finite() && origin.0.is_finite() && origin.1.is_finite()) {
            return bad("cell size must be positive and finite".into());
        }
        if let Some(k) = cells.iter().position(|&(l, t)| !(l.is_finite() && t.is_finite() && l <= 0.0 && t >= 0.0)) {
            return bad(format!("cell {k} must hold finite eta_long <= 0 and eta_lat >= 0"));
        }
        Ok(AccelField { nx, ny, x0: origin.0, y0: origin.1, dx: step.0, dy: step.1, cells })
    }

    pub fn uniform(nx: usize, ny: usize, origin: (f64, f64), step: (f64, f64), value: (f64, f64)) -> Result<Self, MetricsError> {
        Self::new(nx, ny, origin, step, vec![value; nx * ny])
    }

    /// Cell containing the point (nearest-cell lookup, no interpolation).
    pub fn at(&self, x: f64, y: f64) -> Result<(f64, f64), MetricsError> {
        let i = ((x - self.x0) / self.dx).floor();
        let j = ((y - self.y0) / self.dy).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return Err(MetricsError::FieldCoverageGap { x, y });
        }
        Ok(self.cells[j as usize * self.nx + i as usize])
    }
}

/// Worst longitudinal availability along the task: the largest (closest to
/// zero) `η_long` over every sampled point.
pub fn along_min(dt: &DrivingTask, field: &AccelField) -> Result<f64, MetricsError> {
    dt.points().try_fold(f64::NEG_INFINITY, |acc, (x, y)| Ok(acc.max(field.at(x, y)?.0)))
}

/// Worst lateral availability: the smallest `|η_lat|` along the task.
pub fn alat_min(dt: &DrivingTask, field: &AccelField) -> Result<f64, MetricsError> {
    dt.points().try_fold(f64::INFINITY, |acc, (x, y)| Ok(acc.min(field.at(x, y)?.1.abs())))
}

/// Brake threat number `a_long,req / a_long,min`.
pub fn btn_dt(dt: &DrivingTask, field: &AccelField) -> Result<f64, MetricsError> {
    ratio(along_req_dt(dt)?, along_min(dt, field)?, "longitudinal")
}

/// Steer threat number `a_lat,req / a_lat,min`.
pub fn stn_dt(dt: &DrivingTask, field: &AccelField) -> Result<f64, MetricsError> {
    ratio(alat_req_dt(dt)?, alat_min(dt, field)?, "lateral")
}

/// `required / available`; both share a sign, so the ratio is ≥ 0.
pub fn ratio(required: f64, available: f64, axis: &'static str) -> Result<f64, MetricsError> {
    if available == 0.0 {
        return Err(MetricsError::ZeroAvailableAcceleration(axis));
    }
    // `+ 0.0` turns a negative zero into a positive one.
    Ok(required / available + 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateMode {
    #[default]
    Max,
    Mean,
    Euclidean,
}

impl FromStr for AggregateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(AggregateMode::Max),
            "mean" => Ok(AggregateMode::Mean),
            "euclidean" => Ok(AggregateMode::Euclidean),
            other => Err(format!("unknown aggregation `{other}`")),
        }
    }
}

impl fmt::Display for AggregateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregateMode::Max => "max",
            AggregateMode::Mean => "mean",
            AggregateMode::Euclidean => "euclidean",
        })
    }
}

/// Combines BTN_DT and STN_DT into one criticality value.
pub fn aggregate(btn: f64, stn: f64, mode: AggregateMode) -> f64 {
    match mode {
        AggregateMode::Max => btn.max(stn),
        AggregateMode::Mean => (btn + stn) / 2.0,
        AggregateMode::Euclidean => btn.hypot(stn),
    }
}

/// Half-open binning: bin `k` is `[e_{k-1}, e_k)`, values below the first
/// edge fall in bin 0 and values at or above the last edge in the top bin.
pub fn discretize_metric(value: f64, edges: &[f64]) -> Result<usize, MetricsError> {
    if edges.is_empty() {
        return Err(MetricsError::NoBinEdges);
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::NonMonotoneEdges);
    }
    Ok(edges.partition_point(|&e| e <= value))
}

/// Default bin labels: `low/high`, `low/medium/high`, else `bin0, bin1, ...`.
pub fn default_bin_labels(bins: usize) -> Vec<String> {
    match bins {
        2 => vec!["low".into(), "high".into()],
        3 => vec!["low".into(), "medium".into(), "high".into()],
        n => (0..n).map(|k| format!("bin{k}")).collect(),
    }
}

/// [`discretize_metric`] followed by a label lookup.
pub fn discretize_label<'a>(value: f64, edges: &[f64], labels: &'a [String]) -> Result<&'a str, MetricsError> {
    let bins = edges.len() + 1;
    if labels.len() != bins {
        return Err(MetricsError::LabelCount { labels: labels.len(), bins });
    }
    Ok(&labels[discretize_metric(value, edges)?])
}

/// All metric outputs for one driving task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub along_req: f64,
    pub alat_req: f64,
    pub along_min: f64,
    pub alat_min: f64,
    pub btn_dt: f64,
    pub stn_dt: f64,
    pub aggregate: f64,
    pub aggregate_mode: AggregateMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

pub fn evaluate(dt: &DrivingTask, field: &AccelField, mode: AggregateMode) -> Result<MetricReport, MetricsError> {
    let (along_req, alat_req) = (along_req_dt(dt)?, alat_req_dt(dt)?);
    let (along_min, alat_min) = (along_min(dt, field)?, alat_min(dt, field)?);
    let btn = ratio(along_req, along_min, "longitudinal")?;
    let stn = ratio(alat_req, alat_min, "lateral")?;
    Ok(MetricReport {
        along_req,
        alat_req,
        along_min,
        alat_min,
        btn_dt: btn,
        stn_dt: stn,
        aggregate: aggregate(btn, stn, mode),
        aggregate_mode: mode,
        label: None,
    })
}
