//! The fishing scenario: period-averaged catch composition under peace-time
//! and war-time fishing effort.

use serde::Serialize;

use crate::analysis::{verify_disturbance_law, AnalysisError, DisturbanceOptions, DisturbanceRow};
use crate::integrator::IntegratorConfig;
use crate::model::LvParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DAnconaScenario {
    pub params: LvParams,
    pub alpha: f64,
    pub beta: f64,
    pub pre_war: f64,
    pub war: f64,
    pub post_war: f64,
    pub periods_per_phase: usize,
    pub initial_state: [f64; 2],
    pub config: IntegratorConfig,
}

impl DAnconaScenario {
    /// Efforts (0.2, 0.05, 0.2), five periods per phase.
    pub fn new(params: LvParams, alpha: f64, beta: f64) -> Self {
        DAnconaScenario {
            params,
            alpha,
            beta,
            pre_war: 0.2,
            war: 0.05,
            post_war: 0.2,
            periods_per_phase: 5,
            initial_state: [1.0, 1.0],
            config: IntegratorConfig::default(),
        }
    }

    pub fn with_efforts(mut self, pre_war: f64, war: f64, post_war: f64) -> Self {
        self.pre_war = pre_war;
        self.war = war;
        self.post_war = post_war;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreWar,
    War,
    PostWar,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::PreWar => "pre_war",
            Phase::War => "war",
            Phase::PostWar => "post_war",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub phase: Phase,
    pub effort: f64,
    pub means: DisturbanceRow,
    /// `100 * predator / (prey + predator)` from the simulated means.
    pub predator_percent: f64,
    pub predicted_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTable {
    pub rows: Vec<PhaseRow>,
    /// War-time predator share strictly above both peace phases.
    pub war_increase_holds: bool,
}

pub fn predator_percent(means: [f64; 2]) -> f64 {
    100.0 * means[1] / (means[0] + means[1])
}

/// Each phase is run as its own harvested system; war-time effort must not
/// exceed either peace-time effort.
pub fn run_dancona(scenario: &DAnconaScenario) -> Result<PhaseTable, AnalysisError> {
    let s = scenario;
    if s.war > s.pre_war || s.war > s.post_war {
        return Err(AnalysisError::InvalidArgument(format!(
            "war-time effort {} exceeds a peace-time effort ({}, {})",
            s.war, s.pre_war, s.post_war
        )));
    }
    let options =
        DisturbanceOptions { initial_state: s.initial_state, n_periods: s.periods_per_phase, config: s.config };
    let efforts = [s.pre_war, s.war, s.post_war];
    let table = verify_disturbance_law(&s.params, s.alpha, s.beta, &efforts, &options)?;
    let rows: Vec<PhaseRow> = [Phase::PreWar, Phase::War, Phase::PostWar]
        .into_iter()
        .zip(table.rows)
        .map(|(phase, r)| PhaseRow {
            phase,
            effort: r.effort,
            predator_percent: predator_percent(r.simulated),
            predicted_percent: predator_percent(r.predicted),
            means: r,
        })
        .collect();
    let war = rows[1].predator_percent;
    let war_increase_holds = war > rows[0].predator_percent && war > rows[2].predator_percent;
    Ok(PhaseTable { rows, war_increase_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> DAnconaScenario {
        DAnconaScenario::new(LvParams::new(1.0, 0.5, 0.75, 0.25), 1.0, 1.0)
    }

    #[test]
    fn default_phases() {
        let t = run_dancona(&base()).unwrap();
        assert!(t.war_increase_holds);
        let peace = &t.rows[0];
        let war = &t.rows[1];
        assert_eq!(peace.means.predicted, [3.8, 1.6]);
        assert_relative_eq!(war.means.predicted[0], 3.2, max_relative = 1e-15);
        assert_relative_eq!(war.means.predicted[1], 1.9, max_relative = 1e-15);
        for (got, want) in peace.means.simulated.iter().zip([3.8, 1.6]) {
            assert!((got - want).abs() < 1e-3);
        }
        for (got, want) in war.means.simulated.iter().zip([3.2, 1.9]) {
            assert!((got - want).abs() < 1e-3);
        }
        // 1.6/5.4 and 1.9/5.1
        assert!((peace.predator_percent - 29.6296296296).abs() < 0.01);
        assert!((war.predator_percent - 37.2549019608).abs() < 0.01);
        assert_eq!(t.rows[2].predator_percent, peace.predator_percent);
    }

    #[test]
    fn equal_efforts_give_equal_shares() {
        let t = run_dancona(&base().with_efforts(0.1, 0.1, 0.1)).unwrap();
        assert!(!t.war_increase_holds);
        assert_eq!(t.rows[0].predator_percent, t.rows[1].predator_percent);
        assert_eq!(t.rows[1].predator_percent, t.rows[2].predator_percent);
    }

    #[test]
    fn no_harvest_matches_unharvested_law() {
        let t = run_dancona(&base().with_efforts(0.0, 0.0, 0.0)).unwrap();
        // means (3, 2) → 40 %
        for r in &t.rows {
            assert_eq!(r.predicted_percent, 40.0);
            assert!((r.predator_percent - 40.0).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_more_fishing_in_war() {
        assert!(matches!(run_dancona(&base().with_efforts(0.1, 0.2, 0.1)), Err(AnalysisError::InvalidArgument(_))));
        assert!(matches!(
            run_dancona(&base().with_efforts(0.2, 0.05, 2.5)),
            Err(AnalysisError::InadmissibleEffort { .. })
        ));
    }
}
