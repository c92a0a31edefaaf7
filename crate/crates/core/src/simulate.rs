//! Trajectories of discrete maps and continuous flows, and slow–fast diagnostics.
//!
//! A trajectory that first collapses quickly onto a low-dimensional set and
//! then creeps along it shows up as an early `collapse_step` followed by a
//! `terminal_drift` much larger than the step length at collapse.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::dynsys::{Activation, DynamicalSystem, Form};
use crate::error::{Error, Result};
use crate::sampling::substream;

pub const DIVERGENCE_NORM: f64 = 1e12;
pub const DEFAULT_THETA: f64 = 0.01;
pub const DEFAULT_EPS_CONV: f64 = 1e-9;
pub const DEFAULT_LONG_RUN: usize = 20_000;

/// Top singular value of the stratified map's `W`; with `A = 0.05·I` the
/// slowest linearized mode contracts by ≈0.99 per step.
pub const STRATIFIED_TOP: f64 = 1.04;
pub const STRATIFIED_ALPHA: f64 = 0.05;
pub const UNIFORM_LEVEL: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    /// Step indices for maps, times for flows.
    pub times: Vec<f64>,
    /// Maps: `‖x_{t+1} − x_t‖`, one fewer than states. Flows: `‖ẋ‖` at each state.
    pub speeds: Vec<f64>,
    pub discrete: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn endpoint(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    /// States at the listed step indices.
    pub fn snapshots(&self, steps: &[usize]) -> Result<Vec<(usize, DVector<f64>)>> {
        steps
            .iter()
            .map(|&s| {
                self.states
                    .get(s)
                    .map(|x| (s, x.clone()))
                    .ok_or_else(|| Error::invalid(format!("snapshot step {s} beyond trajectory length {}", self.len())))
            })
            .collect()
    }

    /// CSV with header `step,t,x_1,...,x_n,speed`; the final row of a map
    /// trajectory has an empty speed.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.dim();
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.push("speed".into());
        w.write_record(&header)?;
        for (i, (x, t)) in self.states.iter().zip(&self.times).enumerate() {
            let mut row = Vec::with_capacity(n + 3);
            row.push(i.to_string());
            row.push(fmt_f64(*t));
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            row.push(self.speeds.get(i).map(|s| fmt_f64(*s)).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() < 4 || &headers[0] != "step" || &headers[1] != "t" || &headers[headers.len() - 1] != "speed" {
            return Err(Error::invalid("trajectory CSV header must be step,t,x_1,...,x_n,speed"));
        }
        let n = headers.len() - 3;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number `{s}` in trajectory CSV")))
        };
        let mut traj = Trajectory {
            states: Vec::new(),
            times: Vec::new(),
            speeds: Vec::new(),
            discrete: false,
        };
        for rec in r.records() {
            let rec = rec?;
            traj.times.push(parse(&rec[1])?);
            let x: Vec<f64> = (0..n).map(|i| parse(&rec[2 + i])).collect::<Result<_>>()?;
            traj.states.push(DVector::from_vec(x));
            let sp = &rec[n + 2];
            if sp.is_empty() {
                traj.discrete = true;
            } else {
                traj.speeds.push(parse(sp)?);
            }
        }
        Ok(traj)
    }
}

/// 17 significant digits, locale independent.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn diverged(x: &DVector<f64>) -> bool {
    x.iter().any(|v| !v.is_finite()) || x.norm() > DIVERGENCE_NORM
}

/// Repeated application of a discrete map.
pub fn iterate_map(sys: &DynamicalSystem, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
    if sys.form() != Form::DiscreteMap {
        return Err(Error::invalid("iterate_map needs a discrete_map system"));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut speeds = Vec::with_capacity(steps);
    let mut x = sys.eval_field(x0).map(|_| x0.clone())?;
    for step in 0..steps {
        let next = sys.field_unchecked(&x);
        if diverged(&next) {
            return Err(Error::Divergence { step: step + 1, last_state: x });
        }
        speeds.push((&next - &x).norm());
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Ok(Trajectory {
        times: (0..=steps).map(|t| t as f64).collect(),
        states,
        speeds,
        discrete: true,
    })
}

/// Classical fixed-step RK4. The step is shrunk slightly if needed so that
/// an integer number of steps lands exactly on `t_end`.
pub fn integrate_rk4(sys: &DynamicalSystem, x0: &DVector<f64>, t_end: f64, h: f64) -> Result<Trajectory> {
    if !sys.form().is_continuous() {
        return Err(Error::invalid("integrate_rk4 needs a continuous-time system"));
    }
    if !(h > 0.0 && h.is_finite() && t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("need h > 0 and t_end > 0, got h = {h}, t_end = {t_end}")));
    }
    let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let f = |x: &DVector<f64>| sys.field_unchecked(x);

    let mut x = sys.eval_field(x0).map(|_| x0.clone())?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut speeds = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    for step in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * h)));
        let k3 = f(&(&x + &k2 * (0.5 * h)));
        let k4 = f(&(&x + &k3 * h));
        let next = &x + (k1.clone() + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if diverged(&next) {
            return Err(Error::Divergence { step: step + 1, last_state: x });
        }
        speeds.push(k1.norm());
        times.push(step as f64 * h);
        states.push(std::mem::replace(&mut x, next));
    }
    speeds.push(f(&x).norm());
    times.push(t_end);
    states.push(x);
    Ok(Trajectory {
        states,
        times,
        speeds,
        discrete: false,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlowFastReport {
    /// First index whose speed falls below `θ·speed₀`; the number of speeds if none does.
    pub collapse_step: usize,
    /// Distance travelled from the collapse state to the end.
    pub terminal_drift: f64,
    /// Length of the first step after collapse.
    pub collapse_step_length: f64,
    /// `terminal_drift / collapse_step_length` (0 when nothing moves).
    pub drift_ratio: f64,
    pub endpoint: Vec<f64>,
    pub converged: bool,
    pub total_steps: usize,
}

pub fn slow_fast_report(traj: &Trajectory, theta: f64, eps_conv: f64) -> Result<SlowFastReport> {
    if traj.len() < 2 {
        return Err(Error::invalid("slow-fast report needs at least two states"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!("theta must lie in (0, 1), got {theta}")));
    }
    let speeds = &traj.speeds;
    let threshold = theta * speeds[0];
    let collapse_step = if speeds[0] == 0.0 {
        0
    } else {
        speeds.iter().position(|&s| s < threshold).unwrap_or(speeds.len())
    };
    let steps: Vec<f64> = traj.states.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
    let tail = steps.get(collapse_step..).unwrap_or(&[]);
    let terminal_drift: f64 = tail.iter().sum();
    let collapse_step_length = tail.first().copied().unwrap_or(0.0);
    let drift_ratio = if collapse_step_length > 0.0 {
        terminal_drift / collapse_step_length
    } else {
        0.0
    };
    Ok(SlowFastReport {
        collapse_step,
        terminal_drift,
        collapse_step_length,
        drift_ratio,
        endpoint: traj.endpoint().iter().copied().collect(),
        converged: *speeds.last().expect("non-empty speeds") < eps_conv,
        total_steps: steps.len(),
    })
}

/// `x(t+1) = sin(Wx + b) − 0.05·x` with `W = Q·diag(s)·Qᵀ`, `s₁ = 1.04`,
/// `sₙ = s₁/ratio` and, for `n ≥ 3`, the values in between geometric from `0.8·s₁` towards `sₙ`.
/// Produces a fast collapse onto a surface, then a curve, then a slow creep
/// into the fixed point.
pub fn stratified_sine_map(n: usize, ratio: f64, seed: u64) -> Result<DynamicalSystem> {
    if n < 2 {
        return Err(Error::invalid("stratified map needs n ≥ 2"));
    }
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!("spectral ratio must exceed 1, got {ratio}")));
    }
    let last = STRATIFIED_TOP / ratio;
    let mut s = vec![STRATIFIED_TOP];
    if n >= 3 {
        let second = (0.8 * STRATIFIED_TOP).max(last);
        let inner = n - 2;
        s.extend((0..inner).map(|i| second * (last / second).powf(i as f64 / inner as f64)));
    }
    s.push(last);
    sine_map_with_spectrum(&s, seed, "stratified-map")
}

/// Control: every singular value equal to `level`.
pub fn uniform_sine_map(n: usize, level: f64, seed: u64) -> Result<DynamicalSystem> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    sine_map_with_spectrum(&vec![level; n], seed, "uniform-map")
}

fn sine_map_with_spectrum(s: &[f64], seed: u64, stream: &str) -> Result<DynamicalSystem> {
    let n = s.len();
    let mut rng = substream(seed, stream);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let w = &q * DMatrix::from_diagonal(&DVector::from_column_slice(s)) * q.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let b = DVector::from_fn(n, |_, _| rng.random_range(-0.01..0.01));
    DynamicalSystem::new(
        w,
        DMatrix::identity(n, n) * STRATIFIED_ALPHA,
        b,
        Activation::Sine,
        Form::DiscreteMap,
    )
}

/// Seeded starting point in `[-1, 1]^n`.
pub fn default_start(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = substream(seed, "initial-state");
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
