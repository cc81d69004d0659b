//! Equilibria and their stability, the Lotka-Volterra first integral,
//! period detection, period-exact time averages, the disturbance-of-averages
//! law under uniform harvesting, and limit-cycle extraction through a
//! Poincaré section.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{
    integrate, integrate_until, IntegrateError, IntegratorConfig, Method, SectionSpec, Trajectory,
};
use crate::model::{make_harvested_lotka_volterra, LvParams, Model, ModelError};

/// Real parts within this band of zero classify as marginal.
pub const STABILITY_DEAD_BAND: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("only {crossings} section crossings before t = {max_time}; no period detected")]
    NoPeriod { crossings: usize, max_time: f64 },
    #[error("no interior equilibrium found")]
    NoInteriorEquilibrium,
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("singular Jacobian during Newton iteration")]
    SingularJacobian,
    #[error(
        "effort {effort} is inadmissible: prey removal {removal} must stay below the prey growth rate {prey_growth}, \
         otherwise the harvested prey cannot grow and the oscillation collapses"
    )]
    InadmissibleEffort { effort: f64, removal: f64, prey_growth: f64 },
    #[error("limit cycle search did not converge: {0}")]
    NonConvergence(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    CenterMarginal,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::CenterMarginal => "center_marginal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub point: Vec<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub classification: Stability,
}

/// Eigenvalues sorted by (real, imaginary) part and the resulting classification.
pub fn classify(jacobian: &DMatrix<f64>) -> (Vec<Complex<f64>>, Stability) {
    let mut eig: Vec<Complex<f64>> = jacobian.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let max_re = eig.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    let class = if max_re > STABILITY_DEAD_BAND {
        Stability::Unstable
    } else if max_re < -STABILITY_DEAD_BAND {
        Stability::Stable
    } else {
        Stability::CenterMarginal
    };
    (eig, class)
}

pub fn equilibrium_report(model: &Model, point: Vec<f64>) -> Result<EquilibriumReport, AnalysisError> {
    let (eigenvalues, classification) = classify(&model.jacobian(&point)?);
    Ok(EquilibriumReport { point, eigenvalues, classification })
}

/// Interior equilibrium `(eps2 / gamma2, eps1 / gamma1)` of the unharvested system.
pub fn lv_equilibrium(p: &LvParams) -> [f64; 2] {
    [p.predator_mortality / p.predator_gain, p.prey_growth / p.prey_loss]
}

/// Equilibrium (and hence mean) of the harvested system:
/// `((eps2 + beta f) / gamma2, (eps1 - alpha f) / gamma1)`.
pub fn harvested_lv_equilibrium(p: &LvParams, alpha: f64, beta: f64, effort: f64) -> [f64; 2] {
    lv_equilibrium_with_removal(p, [alpha * effort, beta * effort])
}

fn lv_equilibrium_with_removal(p: &LvParams, removal: [f64; 2]) -> [f64; 2] {
    [(p.predator_mortality + removal[1]) / p.predator_gain, (p.prey_growth - removal[0]) / p.prey_loss]
}

/// Closed-form theoretical means for a (harvested) Lotka-Volterra model,
/// indexed like the model's species.
pub fn predicted_means(model: &Model) -> Option<Vec<f64>> {
    let (p, removal) = model.as_lotka_volterra()?;
    if removal[0] >= p.prey_growth {
        return None;
    }
    let link = &model.interactions()[0];
    let eq = lv_equilibrium_with_removal(&p, removal);
    let mut out = vec![0.0; 2];
    out[link.prey] = eq[0];
    out[link.predator] = eq[1];
    Some(out)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration with the analytic Jacobian. Iterates are kept in
/// the closed positive orthant.
pub fn newton_equilibrium(model: &Model, guess: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    model.check_state(guess)?;
    let mut x = guess.to_vec();
    let mut f = model.vector_field(&x)?;
    for iteration in 0..=NEWTON_MAX_ITER {
        let residual = inf_norm(&f);
        if residual <= NEWTON_TOL * (1.0 + inf_norm(&x)) {
            return Ok(x);
        }
        if iteration == NEWTON_MAX_ITER {
            return Err(AnalysisError::NewtonFailed { iterations: iteration, residual });
        }
        let jac = model.jacobian(&x)?;
        let delta = jac.lu().solve(&DVector::from_column_slice(&f)).ok_or(AnalysisError::SingularJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| (a - lambda * d).max(0.0)).collect();
            if let Ok(ft) = model.vector_field(&trial) {
                if model.jacobian(&trial).is_ok() && (inf_norm(&ft) < residual || lambda < 1e-6) {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(AnalysisError::NewtonFailed { iterations: iteration, residual });
        }
    }
    unreachable!()
}

#[derive(Debug, Clone)]
pub struct EquilibriumSearch {
    pub found: Vec<EquilibriumReport>,
    /// Guess index and the reason it failed.
    pub failures: Vec<(usize, AnalysisError)>,
}

/// Newton from every guess; duplicates (within 1e-8) are merged.
pub fn find_equilibria(model: &Model, guesses: &[Vec<f64>]) -> EquilibriumSearch {
    let mut found: Vec<EquilibriumReport> = Vec::new();
    let mut failures = Vec::new();
    for (i, g) in guesses.iter().enumerate() {
        match newton_equilibrium(model, g).and_then(|p| equilibrium_report(model, p)) {
            Ok(rep) => {
                let duplicate = found
                    .iter()
                    .any(|o| o.point.iter().zip(&rep.point).all(|(a, b)| (a - b).abs() <= MERGE_TOL * (1.0 + a.abs())));
                if !duplicate {
                    found.push(rep);
                }
            }
            Err(e) => failures.push((i, e)),
        }
    }
    EquilibriumSearch { found, failures }
}

/// Equilibrium with every component strictly positive, searched from `hint`
/// and a grid of scaled guesses.
pub fn interior_equilibrium(model: &Model, hint: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    model.check_state(hint)?;
    if let Some(mut means) = predicted_means(model) {
        if means.iter().all(|&v| v > 0.0) {
            // the LV formula is exact; polish only against rounding
            if let Ok(p) = newton_equilibrium(model, &means) {
                means = p;
            }
            return Ok(means);
        }
    }
    let mut guesses = vec![hint.to_vec()];
    let scales = [0.1, 0.3, 1.0, 3.0, 10.0];
    let dim = model.dim();
    let base: Vec<f64> = hint.iter().map(|&v| if v > 0.0 { v } else { 1.0 }).collect();
    let mut idx = vec![0usize; dim];
    loop {
        guesses.push(base.iter().zip(&idx).map(|(b, &k)| b * scales[k]).collect());
        let mut carry = 0;
        while carry < dim {
            idx[carry] += 1;
            if idx[carry] < scales.len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == dim {
            break;
        }
    }
    for g in &guesses {
        if let Ok(p) = newton_equilibrium(model, g) {
            let scale = 1.0 + inf_norm(&p);
            if p.iter().all(|&v| v > 1e-9 * scale) {
                return Ok(p);
            }
        }
    }
    Err(AnalysisError::NoInteriorEquilibrium)
}

/// `H = gamma2 N1 - eps2 ln N1 + gamma1 N2 - eps1 ln N2`, constant along
/// every orbit of the unharvested system.
pub fn lv_first_integral(p: &LvParams, state: &[f64]) -> Result<f64, AnalysisError> {
    match state {
        [n1, n2] if *n1 > 0.0 && *n2 > 0.0 => {
            Ok(p.predator_gain * n1 - p.predator_mortality * n1.ln() + p.prey_loss * n2 - p.prey_growth * n2.ln())
        }
        [_, _] => Err(AnalysisError::InvalidArgument("first integral needs strictly positive densities".into())),
        _ => Err(AnalysisError::InvalidArgument(format!("first integral needs 2 components, got {}", state.len()))),
    }
}

/// Largest `|H(t) - H(0)| / |H(0)|` over the stored samples.
pub fn first_integral_drift(p: &LvParams, trajectory: &Trajectory) -> Result<f64, AnalysisError> {
    let h0 = lv_first_integral(p, trajectory.state(0))?;
    let mut worst = 0.0f64;
    for s in trajectory.states() {
        worst = worst.max((lv_first_integral(p, s)? - h0).abs());
    }
    Ok(worst / h0.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodOptions {
    pub max_time: f64,
    /// Number of trailing crossing spacings averaged (at least 3).
    pub spacings: usize,
    /// Defaults to the primary prey through the interior equilibrium, increasing.
    pub section: Option<SectionSpec>,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        PeriodOptions { max_time: 1000.0, spacings: 5, section: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEstimate {
    pub period: f64,
    /// `max - min` of the spacings used.
    pub spread: f64,
    pub crossing_times: Vec<f64>,
    pub section: SectionSpec,
}

pub fn default_section(model: &Model, initial_state: &[f64]) -> Result<SectionSpec, AnalysisError> {
    let eq = interior_equilibrium(model, initial_state)?;
    let prey = model.primary_prey();
    Ok(SectionSpec::increasing(prey, eq[prey]))
}

pub fn detect_period(
    model: &Model,
    config: &IntegratorConfig,
    initial_state: &[f64],
    options: &PeriodOptions,
) -> Result<PeriodEstimate, AnalysisError> {
    if options.spacings < 3 {
        return Err(AnalysisError::InvalidArgument("period detection needs at least 3 spacings".into()));
    }
    let section = match options.section {
        Some(s) => s,
        None => default_section(model, initial_state)?,
    };
    let wanted = options.spacings + 1;
    let traj =
        integrate_until(model, config, 0.0, options.max_time, initial_state, &[section], |ev| ev.len() >= wanted)?;
    let times: Vec<f64> = traj.events().iter().map(|e| e.time).collect();
    if times.len() < 4 {
        return Err(AnalysisError::NoPeriod { crossings: times.len(), max_time: options.max_time });
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let used = &gaps[gaps.len().saturating_sub(options.spacings)..];
    let period = used.iter().sum::<f64>() / used.len() as f64;
    let lo = used.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = used.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PeriodEstimate { period, spread: hi - lo, crossing_times: times, section })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragesReport {
    pub means: Vec<f64>,
    pub n_periods: usize,
    /// Mean period over the averaging window.
    pub period: f64,
    pub start_time: f64,
    pub end_time: f64,
    /// Theoretical means, for (harvested) Lotka-Volterra models.
    pub predicted: Option<Vec<f64>>,
}

impl AveragesReport {
    pub fn abs_discrepancy(&self) -> Option<Vec<f64>> {
        self.predicted.as_ref().map(|p| self.means.iter().zip(p).map(|(m, q)| (m - q).abs()).collect())
    }

    pub fn rel_discrepancy(&self) -> Option<Vec<f64>> {
        self.predicted.as_ref().map(|p| self.means.iter().zip(p).map(|(m, q)| (m - q).abs() / q.abs()).collect())
    }
}

/// Config used for quadrature: step size capped at `period / 1000` so the
/// trapezoid rule on the stored samples is accurate well below 1e-3.
fn quadrature_config(config: &IntegratorConfig, period: f64) -> IntegratorConfig {
    let cap = period / 1000.0;
    match config.method {
        Method::AdaptiveRk45 { .. } => {
            let m = config.max_step.map_or(cap, |m| m.min(cap));
            config.with_max_step(m)
        }
        Method::FixedRk4 { .. } => *config,
    }
}

/// Trapezoidal means over exactly `n_periods` periods, starting and ending
/// on section crossings.
pub fn time_averages(
    model: &Model,
    config: &IntegratorConfig,
    initial_state: &[f64],
    n_periods: usize,
) -> Result<AveragesReport, AnalysisError> {
    if n_periods < 3 {
        return Err(AnalysisError::InvalidArgument(format!("averaging needs at least 3 periods, got {n_periods}")));
    }
    let estimate = detect_period(model, config, initial_state, &PeriodOptions::default())?;
    let cfg = quadrature_config(config, estimate.period);
    let wanted = n_periods + 1;
    let horizon = estimate.crossing_times[0] + (n_periods as f64 + 2.0) * estimate.period * 1.5;
    let traj = integrate_until(model, &cfg, 0.0, horizon, initial_state, &[estimate.section], |ev| ev.len() >= wanted)?;
    let events = traj.events();
    if events.len() < wanted {
        return Err(AnalysisError::NoPeriod { crossings: events.len(), max_time: horizon });
    }
    let (start, end) = (&events[0], &events[n_periods]);
    let dim = model.dim();
    let mut integral = vec![0.0; dim];
    let mut prev_t = start.time;
    let mut prev: Vec<f64> = start.state.clone();
    let mut accumulate = |t: f64, s: &[f64], prev_t: &mut f64, prev: &mut Vec<f64>| {
        let dt = t - *prev_t;
        for j in 0..dim {
            integral[j] += 0.5 * dt * (prev[j] + s[j]);
        }
        *prev_t = t;
        prev.copy_from_slice(s);
    };
    for (i, &t) in traj.times().iter().enumerate() {
        if t > start.time && t < end.time {
            accumulate(t, traj.state(i), &mut prev_t, &mut prev);
        }
    }
    accumulate(end.time, &end.state, &mut prev_t, &mut prev);
    let span = end.time - start.time;
    Ok(AveragesReport {
        means: integral.iter().map(|v| v / span).collect(),
        n_periods,
        period: span / n_periods as f64,
        start_time: start.time,
        end_time: end.time,
        predicted: predicted_means(model),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceOptions {
    pub initial_state: [f64; 2],
    pub n_periods: usize,
    pub config: IntegratorConfig,
}

impl Default for DisturbanceOptions {
    fn default() -> Self {
        DisturbanceOptions { initial_state: [1.0, 1.0], n_periods: 5, config: IntegratorConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisturbanceRow {
    pub effort: f64,
    /// `(prey, predator)`.
    pub simulated: [f64; 2],
    pub predicted: [f64; 2],
    pub abs_discrepancy: [f64; 2],
    pub rel_discrepancy: [f64; 2],
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisturbanceTable {
    pub rows: Vec<DisturbanceRow>,
    /// Prey mean strictly increasing and predator mean strictly decreasing
    /// in effort, for the simulated means.
    pub simulated_monotone: bool,
    pub predicted_monotone: bool,
}

pub fn check_effort(p: &LvParams, alpha: f64, effort: f64) -> Result<(), AnalysisError> {
    if !(effort.is_finite() && effort >= 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("effort must be finite and >= 0, got {effort}")));
    }
    let removal = alpha * effort;
    if removal >= p.prey_growth {
        return Err(AnalysisError::InadmissibleEffort { effort, removal, prey_growth: p.prey_growth });
    }
    Ok(())
}

fn monotone(rows: &[DisturbanceRow], pick: impl Fn(&DisturbanceRow) -> [f64; 2]) -> bool {
    let mut sorted: Vec<&DisturbanceRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.effort.total_cmp(&b.effort));
    sorted.windows(2).all(|w| {
        let (a, b) = (pick(w[0]), pick(w[1]));
        w[0].effort == w[1].effort || (b[0] > a[0] && b[1] < a[1])
    })
}

/// Simulated versus predicted means of the harvested system for each effort.
pub fn verify_disturbance_law(
    p: &LvParams,
    alpha: f64,
    beta: f64,
    efforts: &[f64],
    options: &DisturbanceOptions,
) -> Result<DisturbanceTable, AnalysisError> {
    p.validate()?;
    for &f in efforts {
        check_effort(p, alpha, f)?;
    }
    let mut rows = Vec::with_capacity(efforts.len());
    for &effort in efforts {
        let model = make_harvested_lotka_volterra(*p, alpha, beta, effort)?;
        let report = time_averages(&model, &options.config, &options.initial_state, options.n_periods)?;
        let predicted = harvested_lv_equilibrium(p, alpha, beta, effort);
        let simulated = [report.means[0], report.means[1]];
        let abs = [(simulated[0] - predicted[0]).abs(), (simulated[1] - predicted[1]).abs()];
        rows.push(DisturbanceRow {
            effort,
            simulated,
            predicted,
            abs_discrepancy: abs,
            rel_discrepancy: [abs[0] / predicted[0], abs[1] / predicted[1]],
            period: report.period,
        });
    }
    Ok(DisturbanceTable {
        simulated_monotone: monotone(&rows, |r| r.simulated),
        predicted_monotone: monotone(&rows, |r| r.predicted),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCycleOptions {
    /// Time after which the return map is iterated under a budget.
    pub transient: f64,
    /// Successive returns closer than `return_tol * (1 + |x|)` count as a fixed point.
    pub return_tol: f64,
    /// Return budget after the transient.
    pub max_returns: usize,
    /// Required agreement of fixed points (absolute-plus-relative) and periods (relative) across initial states.
    pub agreement_tol: f64,
}

impl Default for LimitCycleOptions {
    fn default() -> Self {
        LimitCycleOptions { transient: 500.0, return_tol: 1e-9, max_returns: 2000, agreement_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcConvergence {
    pub initial_state: Vec<f64>,
    pub returns: usize,
    pub last_return_delta: f64,
    pub fixed_point: Vec<f64>,
    pub period: f64,
    /// Per-species `(min, max)` over one converged cycle.
    pub extremes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycleReport {
    pub period: f64,
    pub extremes: Vec<(f64, f64)>,
    pub fixed_point: Vec<f64>,
    pub section: SectionSpec,
    pub equilibrium: Vec<f64>,
    pub runs: Vec<IcConvergence>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LimitCycleOutcome {
    Cycle(LimitCycleReport),
    /// Every trajectory spirals into the interior equilibrium.
    StableFocus {
        equilibrium: EquilibriumReport,
    },
}

enum Run {
    Cycle(IcConvergence),
    Point,
    Unconverged(String),
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn converged_returns(events: &[crate::integrator::Event], tol: f64) -> bool {
    match events {
        [.., a, b] => close(&a.state, &b.state, tol),
        _ => false,
    }
}

fn cycle_extremes(
    model: &Model,
    config: &IntegratorConfig,
    start: &[f64],
    period: f64,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let cfg = quadrature_config(config, period);
    let traj = integrate(model, &cfg, 0.0, period, start)?;
    Ok((0..model.dim())
        .map(|j| traj.states().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[j]), hi.max(s[j]))))
        .collect())
}

fn single_run(
    model: &Model,
    config: &IntegratorConfig,
    ic: &[f64],
    section: SectionSpec,
    equilibrium: &EquilibriumReport,
    options: &LimitCycleOptions,
) -> Result<Run, AnalysisError> {
    let transient = options.transient;
    let budget = options.max_returns;
    let mut after_transient: Option<usize> = None;
    let stop = |ev: &[crate::integrator::Event]| {
        if converged_returns(ev, options.return_tol) {
            return true;
        }
        let last = ev.last().expect("non-empty on callback");
        if last.time >= transient {
            let first = *after_transient.get_or_insert(ev.len());
            return ev.len() - first >= budget;
        }
        false
    };
    // generous horizon: the run normally ends through `stop`
    let horizon = transient * 20.0 + 1.0;
    let traj = integrate_until(model, config, 0.0, horizon, ic, &[section], stop)?;
    let events = traj.events();
    let eq = &equilibrium.point;
    let near_eq = |s: &[f64]| close(s, eq, 1e-6);
    if events.len() < 2 {
        return Ok(if equilibrium.classification == Stability::Stable {
            Run::Point
        } else {
            Run::Unconverged(format!("only {} section crossings", events.len()))
        });
    }
    let (a, b) = (&events[events.len() - 2], &events[events.len() - 1]);
    if !converged_returns(events, options.return_tol) {
        let shrinking =
            events.windows(2).rev().take(5).all(|w| inf_norm_diff(&w[1].state, eq) < inf_norm_diff(&w[0].state, eq));
        if equilibrium.classification == Stability::Stable && shrinking {
            return Ok(Run::Point);
        }
        return Ok(Run::Unconverged(format!(
            "successive returns still differ by {:e} after {} returns",
            inf_norm_diff(&a.state, &b.state),
            events.len()
        )));
    }
    if near_eq(&b.state) {
        return Ok(Run::Point);
    }
    let period = b.time - a.time;
    let extremes = cycle_extremes(model, config, &b.state, period)?;
    Ok(Run::Cycle(IcConvergence {
        initial_state: ic.to_vec(),
        returns: events.len(),
        last_return_delta: inf_norm_diff(&a.state, &b.state),
        fixed_point: b.state.clone(),
        period,
        extremes,
    }))
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Iterates the Poincaré return map on the section through the interior
/// equilibrium from each initial state, in parallel, and requires every run
/// to reach the same fixed point and period.
pub fn find_limit_cycle(
    model: &Model,
    config: &IntegratorConfig,
    initial_states: &[Vec<f64>],
    options: &LimitCycleOptions,
) -> Result<LimitCycleOutcome, AnalysisError> {
    if initial_states.len() < 2 {
        return Err(AnalysisError::InvalidArgument("limit cycle search needs at least 2 initial states".into()));
    }
    for (i, ic) in initial_states.iter().enumerate() {
        model.check_state(ic)?;
        if ic.iter().any(|&v| v <= 0.0) {
            return Err(AnalysisError::InvalidArgument(format!("initial state {i} must be strictly positive")));
        }
        if initial_states[..i].contains(ic) {
            return Err(AnalysisError::InvalidArgument(format!("initial state {i} is a duplicate")));
        }
    }
    let eq_point = interior_equilibrium(model, &initial_states[0])?;
    let equilibrium = equilibrium_report(model, eq_point)?;
    let prey = model.primary_prey();
    let section = SectionSpec::increasing(prey, equilibrium.point[prey]);

    let runs: Vec<Result<Run, AnalysisError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = initial_states
            .iter()
            .map(|ic| {
                let eq = &equilibrium;
                scope.spawn(move || single_run(model, config, ic, section, eq, options))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("limit cycle worker panicked")).collect()
    });

    let mut cycles = Vec::new();
    let mut points = 0;
    for (i, run) in runs.into_iter().enumerate() {
        match run? {
            Run::Cycle(c) => cycles.push(c),
            Run::Point => points += 1,
            Run::Unconverged(why) => return Err(AnalysisError::NonConvergence(format!("initial state {i}: {why}"))),
        }
    }
    if points == initial_states.len() {
        return Ok(LimitCycleOutcome::StableFocus { equilibrium });
    }
    if points > 0 {
        return Err(AnalysisError::NonConvergence(format!(
            "{points} of {} initial states converge to the equilibrium, the rest to a cycle",
            initial_states.len()
        )));
    }
    let reference = &cycles[0];
    for (i, c) in cycles.iter().enumerate().skip(1) {
        if !close(&c.fixed_point, &reference.fixed_point, options.agreement_tol) {
            return Err(AnalysisError::NonConvergence(format!(
                "initial states 0 and {i} reach different return points {:?} vs {:?}",
                reference.fixed_point, c.fixed_point
            )));
        }
        if (c.period - reference.period).abs() > options.agreement_tol * reference.period {
            return Err(AnalysisError::NonConvergence(format!(
                "initial states 0 and {i} have periods {} vs {}",
                reference.period, c.period
            )));
        }
    }
    Ok(LimitCycleOutcome::Cycle(LimitCycleReport {
        period: reference.period,
        extremes: reference.extremes.clone(),
        fixed_point: reference.fixed_point.clone(),
        section,
        equilibrium: equilibrium.point,
        runs: cycles,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::integrate_with_events;
    use crate::model::{make_lotka_volterra, make_rosenzweig_macarthur, RmParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn lv(a: f64, b: f64, c: f64, d: f64) -> Model {
        make_lotka_volterra(LvParams::new(a, b, c, d)).unwrap()
    }

    fn rm(capacity: f64) -> RmParams {
        RmParams {
            prey_growth: 1.0,
            capacity,
            prey_loss: 1.0,
            predator_mortality: 0.5,
            predator_gain: 1.0,
            half_saturation: 1.0,
        }
    }

    #[test]
    fn lv_equilibrium_formulas() {
        assert_eq!(lv_equilibrium(&LvParams::new(1.0, 1.0, 1.0, 1.0)), [1.0, 1.0]);
        assert_eq!(lv_equilibrium(&LvParams::new(1.0, 0.5, 0.75, 0.25)), [3.0, 2.0]);
        let h = harvested_lv_equilibrium(&LvParams::new(1.0, 0.5, 0.75, 0.25), 1.0, 1.0, 0.1);
        assert_relative_eq!(h[0], 3.4, max_relative = 1e-15);
        assert_relative_eq!(h[1], 1.8, max_relative = 1e-15);
    }

    #[test]
    fn newton_finds_lv_center_and_saddle() {
        let m = lv(1.0, 1.0, 1.0, 1.0);
        let search = find_equilibria(&m, &[vec![1.2, 0.8], vec![0.0, 0.0], vec![0.9, 1.1]]);
        assert!(search.failures.is_empty());
        assert_eq!(search.found.len(), 2);
        let center = &search.found[0];
        assert!((center.point[0] - 1.0).abs() < 1e-12 && (center.point[1] - 1.0).abs() < 1e-12);
        assert_eq!(center.classification, Stability::CenterMarginal);
        for e in &center.eigenvalues {
            assert!(e.re.abs() < 1e-12 && (e.im.abs() - 1.0).abs() < 1e-12);
        }
        let origin = &search.found[1];
        assert_eq!(origin.point, vec![0.0, 0.0]);
        assert_eq!(origin.classification, Stability::Unstable);
        assert_relative_eq!(origin.eigenvalues[0].re, -1.0);
        assert_relative_eq!(origin.eigenvalues[1].re, 1.0);
    }

    #[test]
    fn newton_finds_rm_interior() {
        for k in [5.0, 1.5] {
            let p = rm(k);
            let m = make_rosenzweig_macarthur(p).unwrap();
            let x = newton_equilibrium(&m, &[0.8, 1.0]).unwrap();
            // N1* = eps2 h / (gamma2 - eps2) = 1
            assert_relative_eq!(x[0], 1.0, max_relative = 1e-10);
            assert_relative_eq!(x[1], p.interior_equilibrium().unwrap()[1], max_relative = 1e-10);
            let f = m.vector_field(&x).unwrap();
            assert!(inf_norm(&f) <= 1e-10 * (1.0 + inf_norm(&x)));
        }
    }

    #[test]
    fn rm_preset_stability_by_eigenvalues() {
        let unstable = make_rosenzweig_macarthur(rm(5.0)).unwrap();
        let eq = interior_equilibrium(&unstable, &[0.5, 0.5]).unwrap();
        assert_eq!(equilibrium_report(&unstable, eq).unwrap().classification, Stability::Unstable);
        let stable = make_rosenzweig_macarthur(rm(1.5)).unwrap();
        let eq = interior_equilibrium(&stable, &[0.5, 0.5]).unwrap();
        assert_eq!(equilibrium_report(&stable, eq).unwrap().classification, Stability::Stable);
    }

    #[test]
    fn newton_failure_is_reported_per_guess() {
        // logistic f = N (1 - N / 2): Jacobian vanishes at N = 1
        let m = crate::model::make_verhulst(1.0, 2.0, 1.0).unwrap();
        let search = find_equilibria(&m, &[vec![1.5], vec![1.0], vec![-1.0]]);
        assert_eq!(search.found.len(), 1);
        assert_relative_eq!(search.found[0].point[0], 2.0, max_relative = 1e-12);
        assert_eq!(search.found[0].classification, Stability::Stable);
        assert!(matches!(search.failures[0], (1, AnalysisError::SingularJacobian)));
        assert!(matches!(search.failures[1], (2, AnalysisError::Model(_))));
    }

    #[test]
    fn first_integral_values() {
        let p = LvParams::new(1.0, 1.0, 1.0, 1.0);
        assert_eq!(lv_first_integral(&p, &[1.0, 1.0]).unwrap(), 2.0);
        assert!(lv_first_integral(&p, &[0.0, 1.0]).is_err());
        assert!(lv_first_integral(&p, &[1.0]).is_err());
    }

    #[test]
    fn first_integral_minimized_at_equilibrium() {
        let p = LvParams::new(1.0, 0.5, 0.75, 0.25);
        let eq = lv_equilibrium(&p);
        let h_eq = lv_first_integral(&p, &eq).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = [eq[0] * rng.random_range(0.5..1.5), eq[1] * rng.random_range(0.5..1.5)];
            if s != eq {
                assert!(lv_first_integral(&p, &s).unwrap() > h_eq);
            }
        }
    }

    #[test]
    fn first_integral_conserved_along_orbit() {
        let p = LvParams::new(1.0, 0.5, 0.75, 0.25);
        let m = make_lotka_volterra(p).unwrap();
        let tr = integrate(&m, &IntegratorConfig::default(), 0.0, 100.0, &[1.0, 1.0]).unwrap();
        assert!(first_integral_drift(&p, &tr).unwrap() <= 1e-6);
    }

    #[test]
    fn small_oscillation_period_tends_to_two_pi() {
        let m = lv(1.0, 1.0, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        let mut last_err = f64::INFINITY;
        for delta in [1e-1, 1e-2, 1e-3] {
            let est = detect_period(&m, &cfg, &[1.0 + delta, 1.0], &PeriodOptions::default()).unwrap();
            let err = (est.period - 2.0 * PI).abs();
            assert!(err < last_err);
            assert!(est.spread <= 1e-6 * est.period);
            last_err = err;
        }
        assert!(last_err / (2.0 * PI) < 1e-4);
    }

    #[test]
    fn equilibrium_has_no_period() {
        let m = lv(1.0, 1.0, 1.0, 1.0);
        let err = detect_period(&m, &IntegratorConfig::default(), &[1.0, 1.0], &PeriodOptions::default());
        assert!(matches!(err, Err(AnalysisError::NoPeriod { crossings: 0, .. })));
        assert!(time_averages(&m, &IntegratorConfig::default(), &[1.0, 1.0], 5).is_err());
    }

    #[test]
    fn lv_orbit_closes_after_one_period() {
        let m = lv(1.0, 0.5, 0.75, 0.25);
        let cfg = IntegratorConfig::default();
        let sec = [SectionSpec::increasing(0, 3.0)];
        let tr = integrate_with_events(&m, &cfg, 0.0, 40.0, &[1.0, 1.0], &sec).unwrap();
        let ev = tr.events();
        assert!(ev.len() >= 3);
        for w in ev.windows(2) {
            assert!(inf_norm_diff(&w[0].state, &w[1].state) <= 1e-6);
        }
    }

    #[test]
    fn averages_follow_volterra_law_and_ignore_initial_state() {
        let m = lv(1.0, 0.5, 0.75, 0.25);
        let cfg = IntegratorConfig::default();
        let a = time_averages(&m, &cfg, &[1.0, 1.0], 5).unwrap();
        let b = time_averages(&m, &cfg, &[2.0, 2.0], 5).unwrap();
        assert_eq!(a.predicted, Some(vec![3.0, 2.0]));
        for r in a.rel_discrepancy().unwrap() {
            assert!(r < 1e-3);
        }
        for (x, y) in a.means.iter().zip(&b.means) {
            assert!((x - y).abs() < 1e-3);
        }
        assert_eq!(a.n_periods, 5);
        assert!(time_averages(&m, &cfg, &[1.0, 1.0], 2).is_err());
    }

    #[test]
    fn average_law_holds_on_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = IntegratorConfig::default();
        for _ in 0..10 {
            let p = LvParams::new(
                rng.random_range(0.25..2.0),
                rng.random_range(0.25..2.0),
                rng.random_range(0.25..2.0),
                rng.random_range(0.25..2.0),
            );
            let m = make_lotka_volterra(p).unwrap();
            let eq = lv_equilibrium(&p);
            let ic = [eq[0] * rng.random_range(0.3..0.9), eq[1] * rng.random_range(1.1..1.8)];
            let rep = time_averages(&m, &cfg, &ic, 5).unwrap();
            for r in rep.rel_discrepancy().unwrap() {
                assert!(r <= 1e-3, "{p:?} {rep:?}");
            }
        }
    }

    #[test]
    fn disturbance_law_table() {
        let p = LvParams::new(1.0, 0.5, 0.75, 0.25);
        let table =
            verify_disturbance_law(&p, 1.0, 1.0, &[0.0, 0.05, 0.1, 0.2], &DisturbanceOptions::default()).unwrap();
        assert!(table.simulated_monotone && table.predicted_monotone);
        assert_eq!(table.rows[0].predicted, [3.0, 2.0]);
        let row = &table.rows[2];
        assert_relative_eq!(row.predicted[0], 3.4, max_relative = 1e-15);
        assert_relative_eq!(row.predicted[1], 1.8, max_relative = 1e-15);
        for r in &table.rows {
            assert!(r.rel_discrepancy.iter().all(|&d| d <= 1e-3), "{r:?}");
        }
    }

    #[test]
    fn disturbance_law_rejects_collapsing_effort() {
        let p = LvParams::new(1.0, 0.5, 0.75, 0.25);
        let err = verify_disturbance_law(&p, 1.0, 1.0, &[0.1, 1.1], &DisturbanceOptions::default()).unwrap_err();
        assert!(matches!(err, AnalysisError::InadmissibleEffort { effort, .. } if effort == 1.1));
        assert!(err.to_string().contains("below the prey growth rate"));
    }

    fn scaled_ics(eq: &[f64], factors: &[f64]) -> Vec<Vec<f64>> {
        factors.iter().map(|f| eq.iter().map(|v| v * f).collect()).collect()
    }

    #[test]
    fn rm_cycle_is_independent_of_initial_state() {
        let p = rm(5.0);
        let m = make_rosenzweig_macarthur(p).unwrap();
        let eq = p.interior_equilibrium().unwrap();
        let ics = scaled_ics(&eq, &[0.5, 2.0]);
        let LimitCycleOutcome::Cycle(rep) =
            find_limit_cycle(&m, &IntegratorConfig::default(), &ics, &LimitCycleOptions::default()).unwrap()
        else {
            panic!("expected a cycle");
        };
        assert_eq!(rep.runs.len(), 2);
        let (a, b) = (&rep.runs[0], &rep.runs[1]);
        assert!((a.period - b.period).abs() <= 1e-2 * a.period);
        for (x, y) in a.extremes.iter().zip(&b.extremes) {
            assert!(x.1 > x.0);
            assert!(((x.1 - x.0) - (y.1 - y.0)).abs() <= 1e-2 * (x.1 - x.0));
        }
    }

    #[test]
    fn rm_stable_reports_focus() {
        let p = rm(1.5);
        let m = make_rosenzweig_macarthur(p).unwrap();
        let ics = scaled_ics(&p.interior_equilibrium().unwrap(), &[0.5, 2.0]);
        let out = find_limit_cycle(&m, &IntegratorConfig::default(), &ics, &LimitCycleOptions::default()).unwrap();
        assert!(matches!(out, LimitCycleOutcome::StableFocus { .. }));
    }

    #[test]
    fn lv_has_no_isolated_cycle() {
        let m = lv(1.0, 0.5, 0.75, 0.25);
        let ics = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let out = find_limit_cycle(&m, &IntegratorConfig::default(), &ics, &LimitCycleOptions::default());
        assert!(matches!(out, Err(AnalysisError::NonConvergence(_))));
    }

    #[test]
    fn limit_cycle_input_validation() {
        let m = make_rosenzweig_macarthur(rm(5.0)).unwrap();
        let cfg = IntegratorConfig::default();
        let opts = LimitCycleOptions::default();
        assert!(find_limit_cycle(&m, &cfg, &[vec![1.0, 1.0]], &opts).is_err());
        assert!(find_limit_cycle(&m, &cfg, &[vec![1.0, 1.0], vec![1.0, 1.0]], &opts).is_err());
        assert!(find_limit_cycle(&m, &cfg, &[vec![1.0, 0.0], vec![1.0, 1.0]], &opts).is_err());
    }
}
