//! Deterministic ODE integration of a [`Model`]: fixed-step RK4, adaptive
//! Dormand-Prince 5(4), directional section-crossing events, and the
//! closed-form single-species solutions used as oracles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, ModelError};

// Dormand-Prince 5(4), FSAL. Stage matrix a, fifth-order weights b (equal to
// the last stage row), and the difference b5 - b4 for the embedded error
// estimate. Nodes c = (0, 1/5, 3/10, 4/5, 8/9, 1, 1) are not needed: every
// model is autonomous.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

pub const DEFAULT_RTOL: f64 = 1e-10;
pub const DEFAULT_ATOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Error, Clone)]
pub enum IntegrateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("non-finite state at t = {time}")]
    Divergence { time: f64 },
    #[error("component {index} went negative ({value:e}) at t = {time}")]
    Positivity { time: f64, index: usize, value: f64 },
    #[error("step size underflow at t = {time}")]
    StepSizeUnderflow { time: f64 },
    #[error("exceeded {max_steps} steps before reaching t = {t1}")]
    MaxStepsExceeded { max_steps: usize, t1: f64, partial: Box<Trajectory> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    FixedRk4 { step: f64 },
    AdaptiveRk45 { rtol: f64, atol: f64 },
}

/// How non-negativity of densities is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityMode {
    /// Log transform for strictly positive initial states, clamping otherwise.
    #[default]
    Auto,
    /// Integrate densities; small negative excursions are set to zero,
    /// larger ones are an error.
    ClampAtZero,
    /// Integrate `ln N`; densities stay strictly positive.
    LogTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
    pub positivity: PositivityMode,
    /// Upper bound on the step size, if any.
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::AdaptiveRk45 { rtol: DEFAULT_RTOL, atol: DEFAULT_ATOL },
            max_steps: DEFAULT_MAX_STEPS,
            positivity: PositivityMode::Auto,
            max_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        IntegratorConfig { method: Method::AdaptiveRk45 { rtol, atol }, ..Default::default() }
    }

    pub fn fixed(step: f64) -> Self {
        IntegratorConfig { method: Method::FixedRk4 { step }, ..Default::default() }
    }

    pub fn with_positivity(mut self, positivity: PositivityMode) -> Self {
        self.positivity = positivity;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = Some(max_step);
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |m: String| Err(IntegrateError::InvalidConfig(m));
        match self.method {
            Method::FixedRk4 { step } if !(step.is_finite() && step > 0.0) => {
                return bad(format!("step must be > 0, got {step}"))
            }
            Method::AdaptiveRk45 { rtol, .. } if !(rtol.is_finite() && rtol >= 1e-14) => {
                return bad(format!("rtol must be >= 1e-14, got {rtol}"))
            }
            Method::AdaptiveRk45 { atol, .. } if !(atol.is_finite() && atol >= 1e-16) => {
                return bad(format!("atol must be >= 1e-16, got {atol}"))
            }
            _ => {}
        }
        if self.max_steps == 0 {
            return bad("max_steps must be > 0".into());
        }
        if let Some(m) = self.max_step {
            if !(m.is_finite() && m > 0.0) {
                return bad(format!("max_step must be > 0, got {m}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// The hyperplane `N[species] = level`, crossed in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub species: usize,
    pub level: f64,
    pub direction: Direction,
}

impl SectionSpec {
    pub fn increasing(species: usize, level: f64) -> Self {
        SectionSpec { species, level, direction: Direction::Increasing }
    }

    fn crossed(&self, before: f64, after: f64) -> bool {
        match self.direction {
            Direction::Increasing => before < self.level && after >= self.level,
            Direction::Decreasing => before > self.level && after <= self.level,
        }
    }

    /// True once `value` lies on the far side of the section.
    fn past(&self, value: f64) -> bool {
        match self.direction {
            Direction::Increasing => value >= self.level,
            Direction::Decreasing => value <= self.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub state: Vec<f64>,
    pub section: usize,
}

/// Time-stamped densities, stored row-major, plus section-crossing events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    data: Vec<f64>,
    events: Vec<Event>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory { dim, times: Vec::new(), data: Vec::new(), events: Vec::new() }
    }

    fn push(&mut self, t: f64, state: &[f64]) {
        self.times.push(t);
        self.data.extend_from_slice(state);
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

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Space {
    Density,
    Log,
}

/// Vector field expressed in the working variables (densities or their logs).
struct System<'a> {
    model: &'a Model,
    space: Space,
}

impl System<'_> {
    fn rhs(&self, w: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        match self.space {
            Space::Density => {
                for (s, &v) in scratch.iter_mut().zip(w) {
                    *s = v.max(0.0);
                }
                self.model.field_into(scratch, out);
            }
            Space::Log => {
                for (s, &v) in scratch.iter_mut().zip(w) {
                    *s = v.exp();
                }
                self.model.per_capita_into(scratch, out);
            }
        }
    }

    fn density(&self, w: f64) -> f64 {
        match self.space {
            Space::Density => w,
            Space::Log => w.exp(),
        }
    }

    fn densities(&self, w: &[f64]) -> Vec<f64> {
        w.iter().map(|&v| self.density(v)).collect()
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], scratch: vec![0.0; n] }
    }
}

fn rk4_into(sys: &System, w: &[f64], h: f64, ws: &mut Workspace, out: &mut [f64]) {
    let n = w.len();
    let Workspace { k, tmp, scratch } = ws;
    sys.rhs(w, &mut k[0], scratch);
    for i in 0..n {
        tmp[i] = w[i] + 0.5 * h * k[0][i];
    }
    sys.rhs(tmp, &mut k[1], scratch);
    for i in 0..n {
        tmp[i] = w[i] + 0.5 * h * k[1][i];
    }
    sys.rhs(tmp, &mut k[2], scratch);
    for i in 0..n {
        tmp[i] = w[i] + h * k[2][i];
    }
    sys.rhs(tmp, &mut k[3], scratch);
    for i in 0..n {
        out[i] = w[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

/// One Dormand-Prince step. `ws.k[0]` must hold the derivative at `w`;
/// on return `ws.k[6]` holds the derivative at `out` and `err` the
/// embedded error estimate.
fn dp_into(sys: &System, w: &[f64], h: f64, ws: &mut Workspace, out: &mut [f64], err: &mut [f64]) {
    let n = w.len();
    let Workspace { k, tmp, scratch } = ws;
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj[i];
            }
            tmp[i] = w[i] + h * acc;
        }
        sys.rhs(tmp, &mut k[s], scratch);
    }
    for i in 0..n {
        // stage 7 is evaluated at the fifth-order solution itself
        out[i] = tmp[i];
        let mut e = 0.0;
        for (j, kj) in k.iter().enumerate() {
            e += E[j] * kj[i];
        }
        err[i] = h * e;
    }
    debug_assert!(B.iter().zip(A[6].iter()).all(|(b, a)| b == a));
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Classical fourth-order Runge-Kutta step on densities. Stage states are
/// clamped at zero before evaluation.
pub fn step_rk4(model: &Model, state: &[f64], h: f64) -> Result<Vec<f64>, IntegrateError> {
    model.check_state(state)?;
    if !(h.is_finite() && h > 0.0) {
        return Err(IntegrateError::InvalidConfig(format!("step must be > 0, got {h}")));
    }
    let sys = System { model, space: Space::Density };
    let mut ws = Workspace::new(state.len());
    let mut out = vec![0.0; state.len()];
    rk4_into(&sys, state, h, &mut ws, &mut out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(IntegrateError::Divergence { time: h })
    }
}

pub fn integrate(
    model: &Model,
    config: &IntegratorConfig,
    t0: f64,
    t1: f64,
    initial_state: &[f64],
) -> Result<Trajectory, IntegrateError> {
    Engine::new(model, config, t0, t1, initial_state, &[])?.run(|_| false)
}

/// Integrates and records every directional crossing of the given sections.
pub fn integrate_with_events(
    model: &Model,
    config: &IntegratorConfig,
    t0: f64,
    t1: f64,
    initial_state: &[f64],
    sections: &[SectionSpec],
) -> Result<Trajectory, IntegrateError> {
    if sections.is_empty() {
        return Err(IntegrateError::InvalidConfig("at least one section is required".into()));
    }
    Engine::new(model, config, t0, t1, initial_state, sections)?.run(|_| false)
}

/// Integrates with events until `stop` returns true for the events so far;
/// the event that triggered the stop becomes the final sample.
pub(crate) fn integrate_until(
    model: &Model,
    config: &IntegratorConfig,
    t0: f64,
    t1: f64,
    initial_state: &[f64],
    sections: &[SectionSpec],
    stop: impl FnMut(&[Event]) -> bool,
) -> Result<Trajectory, IntegrateError> {
    Engine::new(model, config, t0, t1, initial_state, sections)?.run(stop)
}

struct Engine<'a> {
    sys: System<'a>,
    config: IntegratorConfig,
    t0: f64,
    t1: f64,
    w0: Vec<f64>,
    sections: &'a [SectionSpec],
}

impl<'a> Engine<'a> {
    fn new(
        model: &'a Model,
        config: &IntegratorConfig,
        t0: f64,
        t1: f64,
        initial_state: &[f64],
        sections: &'a [SectionSpec],
    ) -> Result<Self, IntegrateError> {
        config.validate()?;
        model.check_state(initial_state)?;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(IntegrateError::InvalidSpan { t0, t1 });
        }
        for s in sections {
            if s.species >= model.dim() || !(s.level.is_finite() && s.level > 0.0) {
                return Err(IntegrateError::InvalidConfig(format!("invalid section {s:?}")));
            }
        }
        let positive = initial_state.iter().all(|&v| v > 0.0);
        let space = match config.positivity {
            PositivityMode::Auto if positive => Space::Log,
            PositivityMode::Auto | PositivityMode::ClampAtZero => Space::Density,
            PositivityMode::LogTransform if positive => Space::Log,
            PositivityMode::LogTransform => {
                return Err(IntegrateError::InvalidConfig(
                    "log transform requires a strictly positive initial state".into(),
                ))
            }
        };
        let w0 = match space {
            Space::Density => initial_state.to_vec(),
            Space::Log => initial_state.iter().map(|v| v.ln()).collect(),
        };
        Ok(Engine { sys: System { model, space }, config: *config, t0, t1, w0, sections })
    }

    fn density_tolerance(&self, w: &[f64]) -> f64 {
        let scale = max_abs(w);
        match self.config.method {
            Method::AdaptiveRk45 { rtol, atol } => atol + rtol * scale,
            Method::FixedRk4 { .. } => 1e-10 * (1.0 + scale),
        }
    }

    /// Enforces non-negativity in density space. Returns true if any component changed.
    fn clamp(&self, t: f64, w: &mut [f64]) -> Result<bool, IntegrateError> {
        if self.sys.space == Space::Log {
            return Ok(false);
        }
        let tol = self.density_tolerance(w);
        let mut changed = false;
        for (index, v) in w.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -tol {
                    return Err(IntegrateError::Positivity { time: t, index, value: *v });
                }
                *v = 0.0;
                changed = true;
            }
        }
        Ok(changed)
    }

    fn single_step(&self, w: &[f64], k0: &[f64], h: f64, ws: &mut Workspace, out: &mut [f64]) {
        match self.config.method {
            Method::FixedRk4 { .. } => rk4_into(&self.sys, w, h, ws, out),
            Method::AdaptiveRk45 { .. } => {
                ws.k[0].copy_from_slice(k0);
                let mut err = vec![0.0; w.len()];
                dp_into(&self.sys, w, h, ws, out, &mut err);
            }
        }
    }

    /// Locates crossings inside the accepted step `(t, w) -> (t + h, w_new)`
    /// by bisection on re-integrated sub-steps from `(t, w)`.
    fn locate_events(&self, t: f64, h: f64, w: &[f64], k0: &[f64], w_new: &[f64], ws: &mut Workspace) -> Vec<Event> {
        let mut found = Vec::new();
        let mut probe = vec![0.0; w.len()];
        for (id, sec) in self.sections.iter().enumerate() {
            let before = self.sys.density(w[sec.species]);
            let after = self.sys.density(w_new[sec.species]);
            if !sec.crossed(before, after) {
                continue;
            }
            let (mut lo, mut hi) = (0.0, h);
            let resolution = 4.0 * f64::EPSILON * (t.abs() + h.abs());
            for _ in 0..200 {
                if hi - lo <= resolution {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                self.single_step(w, k0, mid, ws, &mut probe);
                if sec.past(self.sys.density(probe[sec.species])) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let state = if hi == h {
                self.sys.densities(w_new)
            } else {
                self.single_step(w, k0, hi, ws, &mut probe);
                self.sys.densities(&probe)
            };
            found.push(Event { time: t + hi, state, section: id });
        }
        found.sort_by(|a, b| a.time.total_cmp(&b.time));
        found
    }

    fn initial_step(&self, w: &[f64], f0: &[f64], ws: &mut Workspace, rtol: f64, atol: f64) -> f64 {
        let span = self.t1 - self.t0;
        let sc: Vec<f64> = w.iter().map(|v| atol + rtol * v.abs()).collect();
        let norm = |v: &[f64]| v.iter().zip(&sc).fold(0.0f64, |m, (x, s)| m.max(x.abs() / s));
        let d0 = norm(w);
        let d1 = norm(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<f64> = w.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
        let mut f1 = vec![0.0; w.len()];
        self.sys.rhs(&y1, &mut f1, &mut ws.scratch);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span)
    }

    fn cap(&self, h: f64) -> f64 {
        match self.config.max_step {
            Some(m) => h.min(m),
            None => h,
        }
    }

    fn run(self, mut stop: impl FnMut(&[Event]) -> bool) -> Result<Trajectory, IntegrateError> {
        let n = self.w0.len();
        let mut traj = Trajectory::new(n);
        let mut ws = Workspace::new(n);
        let mut w = self.w0.clone();
        let mut w_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut k0 = vec![0.0; n];
        let mut t = self.t0;
        traj.push(t, &self.sys.densities(&w));
        self.sys.rhs(&w, &mut k0, &mut ws.scratch);

        let span = self.t1 - self.t0;
        let mut h = match self.config.method {
            Method::FixedRk4 { step } => step,
            Method::AdaptiveRk45 { rtol, atol } => self.initial_step(&w, &k0, &mut ws, rtol, atol),
        };
        h = self.cap(h);
        let mut steps = 0usize;
        let mut rejected_last = false;

        while t < self.t1 {
            if steps >= self.config.max_steps {
                return Err(IntegrateError::MaxStepsExceeded {
                    max_steps: self.config.max_steps,
                    t1: self.t1,
                    partial: Box::new(traj),
                });
            }
            steps += 1;
            let remaining = self.t1 - t;
            let last = h >= remaining || remaining - h <= 1e-12 * span;
            let step = if last { remaining } else { h };

            let accepted_factor = match self.config.method {
                Method::FixedRk4 { .. } => {
                    rk4_into(&self.sys, &w, step, &mut ws, &mut w_new);
                    None
                }
                Method::AdaptiveRk45 { rtol, atol } => {
                    ws.k[0].copy_from_slice(&k0);
                    dp_into(&self.sys, &w, step, &mut ws, &mut w_new, &mut err);
                    let mut ratio = 0.0f64;
                    for i in 0..n {
                        let (e, scale) = match self.sys.space {
                            Space::Density => (err[i].abs(), atol + rtol * w[i].abs().max(w_new[i].abs())),
                            Space::Log => {
                                let dens = w[i].max(w_new[i]).exp();
                                (dens * err[i].abs(), atol + rtol * dens)
                            }
                        };
                        ratio = ratio.max(e / scale);
                    }
                    if !ratio.is_finite() {
                        ratio = f64::INFINITY;
                    }
                    Some(ratio)
                }
            };
            if w_new.iter().any(|v| !v.is_finite()) && accepted_factor.is_none() {
                return Err(IntegrateError::Divergence { time: t + step });
            }

            if let Some(ratio) = accepted_factor {
                if ratio > 1.0 {
                    let factor =
                        if ratio.is_finite() { (SAFETY * ratio.powf(-0.2)).max(MIN_FACTOR) } else { MIN_FACTOR };
                    h = step * factor;
                    rejected_last = true;
                    if h <= 1e-14 * t.abs().max(span) {
                        return Err(IntegrateError::StepSizeUnderflow { time: t });
                    }
                    continue;
                }
                let mut factor =
                    if ratio == 0.0 { MAX_FACTOR } else { (SAFETY * ratio.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
                if rejected_last {
                    factor = factor.min(1.0);
                }
                rejected_last = false;
                h = self.cap(step * factor);
            }

            let t_new = if last { self.t1 } else { t + step };
            let clamped = self.clamp(t_new, &mut w_new)?;

            if !self.sections.is_empty() {
                let events = self.locate_events(t, step, &w, &k0, &w_new, &mut ws);
                for ev in events {
                    traj.events.push(ev);
                    if stop(&traj.events) {
                        let ev = traj.events.last().expect("just pushed").clone();
                        traj.push(ev.time, &ev.state);
                        return Ok(traj);
                    }
                }
            }

            t = t_new;
            std::mem::swap(&mut w, &mut w_new);
            match self.config.method {
                Method::AdaptiveRk45 { .. } if !clamped => k0.copy_from_slice(&ws.k[6]),
                _ => self.sys.rhs(&w, &mut k0, &mut ws.scratch),
            }
            traj.push(t, &self.sys.densities(&w));
            if let Method::FixedRk4 { step: s } = self.config.method {
                h = self.cap(s);
            }
        }
        Ok(traj)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Growth,
    Mortality,
}

/// `N0 * exp(+-epsilon * t)`.
pub fn closed_form_malthus(n0: f64, epsilon: f64, sense: Sense, t: f64) -> f64 {
    match sense {
        Sense::Growth => n0 * (epsilon * t).exp(),
        Sense::Mortality => n0 * (-epsilon * t).exp(),
    }
}

/// Logistic solution `K / (1 + ((K - N0) / N0) exp(-epsilon t))`; zero stays zero.
pub fn closed_form_verhulst(n0: f64, epsilon: f64, capacity: f64, t: f64) -> f64 {
    if n0 == 0.0 {
        return 0.0;
    }
    capacity / (1.0 + (capacity - n0) / n0 * (-epsilon * t).exp())
}
