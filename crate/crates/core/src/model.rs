//! Model family: growth terms, predation responses, harvesting, and the
//! resulting autonomous vector field with its analytic Jacobian.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state has {got} components but the model has {expected} species")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state component {index} is negative ({value})")]
    NegativeState { index: usize, value: f64 },
    #[error("state component {index} is not finite")]
    NonFiniteState { index: usize },
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("Gause exponent must satisfy 0 < g <= 1, got {0}")]
    GauseExponent(f64),
    #[error("species index {index} out of range for {count} species")]
    BadIndex { index: usize, count: usize },
    #[error("interaction links species {0} to itself")]
    SelfInteraction(usize),
    #[error("species {0} has more than one harvest term")]
    DuplicateHarvest(usize),
    #[error("duplicate species name `{0}`")]
    DuplicateName(String),
    #[error("growth terms: expected {expected}, got {got}")]
    GrowthCount { expected: usize, got: usize },
    #[error("Jacobian undefined at zero prey density {index} with Gause exponent {exponent} < 1")]
    SingularPoint { index: usize, exponent: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ModelError::Negative { name, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpec {
    pub name: String,
    pub initial_density: f64,
}

impl SpeciesSpec {
    pub fn new(name: impl Into<String>, initial_density: f64) -> Result<Self, ModelError> {
        Ok(SpeciesSpec { name: name.into(), initial_density: non_negative("initial_density", initial_density)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    MalthusGrowth,
    MalthusMortality,
    VerhulstGrowth,
    VerhulstMortality,
}

/// Natural increase or decrease of a single species in isolation.
///
/// The Verhulst kinds carry a carrying capacity `K`; the crowding
/// coefficient `epsilon / K` is never stored separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthTerm {
    kind: GrowthKind,
    epsilon: f64,
    capacity: Option<f64>,
}

impl GrowthTerm {
    pub fn malthus_growth(epsilon: f64) -> Result<Self, ModelError> {
        Ok(GrowthTerm { kind: GrowthKind::MalthusGrowth, epsilon: positive("epsilon", epsilon)?, capacity: None })
    }

    pub fn malthus_mortality(epsilon: f64) -> Result<Self, ModelError> {
        Ok(GrowthTerm { kind: GrowthKind::MalthusMortality, epsilon: positive("epsilon", epsilon)?, capacity: None })
    }

    pub fn verhulst_growth(epsilon: f64, capacity: f64) -> Result<Self, ModelError> {
        Ok(GrowthTerm {
            kind: GrowthKind::VerhulstGrowth,
            epsilon: positive("epsilon", epsilon)?,
            capacity: Some(positive("capacity", capacity)?),
        })
    }

    pub fn verhulst_mortality(epsilon: f64, capacity: f64) -> Result<Self, ModelError> {
        Ok(GrowthTerm {
            kind: GrowthKind::VerhulstMortality,
            epsilon: positive("epsilon", epsilon)?,
            capacity: Some(positive("capacity", capacity)?),
        })
    }

    pub fn kind(&self) -> GrowthKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn capacity(&self) -> Option<f64> {
        self.capacity
    }

    /// Per-capita rate `growth(N) / N`, well defined at `N = 0`.
    pub fn per_capita(&self, n: f64) -> f64 {
        match (self.kind, self.capacity) {
            (GrowthKind::MalthusGrowth, _) => self.epsilon,
            (GrowthKind::MalthusMortality, _) => -self.epsilon,
            (GrowthKind::VerhulstGrowth, Some(k)) => self.epsilon * (1.0 - n / k),
            (GrowthKind::VerhulstMortality, Some(k)) => -self.epsilon * (1.0 + n / k),
            _ => unreachable!("Verhulst term without capacity"),
        }
    }

    pub fn value(&self, n: f64) -> f64 {
        self.per_capita(n) * n
    }

    pub fn derivative(&self, n: f64) -> f64 {
        match (self.kind, self.capacity) {
            (GrowthKind::MalthusGrowth, _) => self.epsilon,
            (GrowthKind::MalthusMortality, _) => -self.epsilon,
            (GrowthKind::VerhulstGrowth, Some(k)) => self.epsilon * (1.0 - 2.0 * n / k),
            (GrowthKind::VerhulstMortality, Some(k)) => -self.epsilon * (1.0 + 2.0 * n / k),
            _ => unreachable!("Verhulst term without capacity"),
        }
    }
}

/// Predation functional response `phi(N_prey)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseKind {
    /// Encounter rate proportional to the prey density.
    Bilinear,
    /// `N^g` with `0 < g <= 1`.
    Gause { g: f64 },
    /// `N / (h + N)`.
    #[serde(rename = "holling_ii")]
    HollingII { h: f64 },
    /// `N^2 / (h^2 + N^2)`.
    #[serde(rename = "holling_iii")]
    HollingIII { h: f64 },
}

impl ResponseKind {
    pub fn gause(g: f64) -> Result<Self, ModelError> {
        if g.is_finite() && g > 0.0 && g <= 1.0 {
            Ok(ResponseKind::Gause { g })
        } else {
            Err(ModelError::GauseExponent(g))
        }
    }

    pub fn holling_ii(h: f64) -> Result<Self, ModelError> {
        Ok(ResponseKind::HollingII { h: positive("h", h)? })
    }

    pub fn holling_iii(h: f64) -> Result<Self, ModelError> {
        Ok(ResponseKind::HollingIII { h: positive("h", h)? })
    }

    /// Re-checks the parameter domain; used after deserialization.
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            ResponseKind::Bilinear => Ok(()),
            ResponseKind::Gause { g } => ResponseKind::gause(g).map(|_| ()),
            ResponseKind::HollingII { h } | ResponseKind::HollingIII { h } => positive("h", h).map(|_| ()),
        }
    }

    pub fn value(&self, n: f64) -> f64 {
        match *self {
            ResponseKind::Bilinear => n,
            ResponseKind::Gause { g } => n.powf(g),
            ResponseKind::HollingII { h } => n / (h + n),
            ResponseKind::HollingIII { h } => {
                let n2 = n * n;
                n2 / (h * h + n2)
            }
        }
    }

    /// `phi(N) / N`, finite for every `N > 0` and at `N = 0` except Gause with `g < 1`.
    pub fn per_prey(&self, n: f64) -> f64 {
        match *self {
            ResponseKind::Bilinear => 1.0,
            ResponseKind::Gause { g } => n.powf(g - 1.0),
            ResponseKind::HollingII { h } => 1.0 / (h + n),
            ResponseKind::HollingIII { h } => n / (h * h + n * n),
        }
    }

    pub fn derivative(&self, n: f64) -> f64 {
        match *self {
            ResponseKind::Bilinear => 1.0,
            ResponseKind::Gause { g } => g * n.powf(g - 1.0),
            ResponseKind::HollingII { h } => h / ((h + n) * (h + n)),
            ResponseKind::HollingIII { h } => {
                let d = h * h + n * n;
                2.0 * h * h * n / (d * d)
            }
        }
    }

    fn singular_at_zero(&self) -> Option<f64> {
        match *self {
            ResponseKind::Gause { g } if g < 1.0 => Some(g),
            _ => None,
        }
    }
}

/// Evaluates `phi(prey_density)`.
pub fn response_value(kind: &ResponseKind, prey_density: f64) -> f64 {
    kind.value(prey_density)
}

/// One predator-prey link: the prey loses `prey_loss_rate * phi * N_pred`,
/// the predator gains `predator_gain_rate * phi * N_pred`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub prey: usize,
    pub predator: usize,
    pub response: ResponseKind,
    pub prey_loss_rate: f64,
    pub predator_gain_rate: f64,
}

impl InteractionTerm {
    pub fn new(
        prey: usize,
        predator: usize,
        response: ResponseKind,
        prey_loss_rate: f64,
        predator_gain_rate: f64,
    ) -> Result<Self, ModelError> {
        if prey == predator {
            return Err(ModelError::SelfInteraction(prey));
        }
        response.validate()?;
        Ok(InteractionTerm {
            prey,
            predator,
            response,
            prey_loss_rate: positive("prey_loss_rate", prey_loss_rate)?,
            predator_gain_rate: positive("predator_gain_rate", predator_gain_rate)?,
        })
    }
}

/// Uniform removal proportional to density: `-(coefficient * effort) * N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestTerm {
    pub species: usize,
    pub coefficient: f64,
    pub effort: f64,
}

impl HarvestTerm {
    pub fn new(species: usize, coefficient: f64, effort: f64) -> Result<Self, ModelError> {
        Ok(HarvestTerm {
            species,
            coefficient: non_negative("coefficient", coefficient)?,
            effort: non_negative("effort", effort)?,
        })
    }

    pub fn removal_rate(&self) -> f64 {
        self.coefficient * self.effort
    }
}

/// Base Lotka-Volterra coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LvParams {
    /// Prey growth rate without predators.
    pub prey_growth: f64,
    /// Prey losses per encounter.
    pub prey_loss: f64,
    /// Predator mortality without prey.
    pub predator_mortality: f64,
    /// Predator gains per encounter.
    pub predator_gain: f64,
}

impl LvParams {
    pub fn new(prey_growth: f64, prey_loss: f64, predator_mortality: f64, predator_gain: f64) -> Self {
        LvParams { prey_growth, prey_loss, predator_mortality, predator_gain }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("prey_growth", self.prey_growth)?;
        positive("prey_loss", self.prey_loss)?;
        positive("predator_mortality", self.predator_mortality)?;
        positive("predator_gain", self.predator_gain)?;
        Ok(())
    }
}

/// Rosenzweig-MacArthur coefficients: logistic prey, Holling II predation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmParams {
    pub prey_growth: f64,
    pub capacity: f64,
    pub prey_loss: f64,
    pub predator_mortality: f64,
    pub predator_gain: f64,
    pub half_saturation: f64,
}

impl RmParams {
    /// Interior equilibrium, when the predator can persist (`predator_gain > predator_mortality`
    /// and the resulting prey level lies below the carrying capacity).
    pub fn interior_equilibrium(&self) -> Option<[f64; 2]> {
        if self.predator_gain <= self.predator_mortality {
            return None;
        }
        let prey = self.predator_mortality * self.half_saturation / (self.predator_gain - self.predator_mortality);
        if prey >= self.capacity {
            return None;
        }
        let predator = self.prey_growth * (1.0 - prey / self.capacity) * (self.half_saturation + prey) / self.prey_loss;
        Some([prey, predator])
    }
}

/// Coefficients of a basal -> middle -> top bilinear chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub basal_growth: f64,
    pub middle_mortality: f64,
    pub top_mortality: f64,
    /// Basal losses per encounter with the middle species.
    pub lower_loss: f64,
    /// Middle gains per encounter with the basal species.
    pub lower_gain: f64,
    /// Middle losses per encounter with the top species.
    pub upper_loss: f64,
    /// Top gains per encounter with the middle species.
    pub upper_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    species: Vec<SpeciesSpec>,
    growth: Vec<GrowthTerm>,
    interactions: Vec<InteractionTerm>,
    harvests: Vec<HarvestTerm>,
}

impl Model {
    pub fn new(
        species: Vec<SpeciesSpec>,
        growth: Vec<GrowthTerm>,
        interactions: Vec<InteractionTerm>,
        harvests: Vec<HarvestTerm>,
    ) -> Result<Self, ModelError> {
        let count = species.len();
        if growth.len() != count {
            return Err(ModelError::GrowthCount { expected: count, got: growth.len() });
        }
        for (i, s) in species.iter().enumerate() {
            non_negative("initial_density", s.initial_density)?;
            if species[..i].iter().any(|o| o.name == s.name) {
                return Err(ModelError::DuplicateName(s.name.clone()));
            }
        }
        let check = |index: usize| {
            if index < count {
                Ok(())
            } else {
                Err(ModelError::BadIndex { index, count })
            }
        };
        for link in &interactions {
            check(link.prey)?;
            check(link.predator)?;
            if link.prey == link.predator {
                return Err(ModelError::SelfInteraction(link.prey));
            }
            link.response.validate()?;
            positive("prey_loss_rate", link.prey_loss_rate)?;
            positive("predator_gain_rate", link.predator_gain_rate)?;
        }
        for (i, h) in harvests.iter().enumerate() {
            check(h.species)?;
            non_negative("coefficient", h.coefficient)?;
            non_negative("effort", h.effort)?;
            if harvests[..i].iter().any(|o| o.species == h.species) {
                return Err(ModelError::DuplicateHarvest(h.species));
            }
        }
        Ok(Model { species, growth, interactions, harvests })
    }

    pub fn species(&self) -> &[SpeciesSpec] {
        &self.species
    }

    pub fn growth(&self) -> &[GrowthTerm] {
        &self.growth
    }

    pub fn interactions(&self) -> &[InteractionTerm] {
        &self.interactions
    }

    pub fn harvests(&self) -> &[HarvestTerm] {
        &self.harvests
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.initial_density).collect()
    }

    /// Returns a copy with the given harvest terms replacing the current ones.
    pub fn with_harvests(&self, harvests: Vec<HarvestTerm>) -> Result<Self, ModelError> {
        Model::new(self.species.clone(), self.growth.clone(), self.interactions.clone(), harvests)
    }

    /// Returns a copy with new initial densities.
    pub fn with_initial_state(&self, state: &[f64]) -> Result<Self, ModelError> {
        self.check_state(state)?;
        let mut m = self.clone();
        for (s, &v) in m.species.iter_mut().zip(state) {
            s.initial_density = v;
        }
        Ok(m)
    }

    pub fn removal_rate(&self, species: usize) -> f64 {
        self.harvests.iter().filter(|h| h.species == species).map(HarvestTerm::removal_rate).sum()
    }

    pub fn check_state(&self, state: &[f64]) -> Result<(), ModelError> {
        if state.len() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), got: state.len() });
        }
        for (index, &value) in state.iter().enumerate() {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteState { index });
            }
            if value < 0.0 {
                return Err(ModelError::NegativeState { index, value });
            }
        }
        Ok(())
    }

    pub fn vector_field(&self, state: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_state(state)?;
        let mut out = vec![0.0; self.dim()];
        self.field_into(state, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation of the field; `state` must have `dim()` non-negative entries.
    pub(crate) fn field_into(&self, state: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.growth[i].value(state[i]) - self.removal_rate(i) * state[i];
        }
        for link in &self.interactions {
            let encounters = link.response.value(state[link.prey]) * state[link.predator];
            out[link.prey] -= link.prey_loss_rate * encounters;
            out[link.predator] += link.predator_gain_rate * encounters;
        }
    }

    /// Unchecked per-capita rates `(dN_i/dt) / N_i`; `state` must be strictly positive.
    pub(crate) fn per_capita_into(&self, state: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.growth[i].per_capita(state[i]) - self.removal_rate(i);
        }
        for link in &self.interactions {
            let np = state[link.prey];
            let npred = state[link.predator];
            out[link.prey] -= link.prey_loss_rate * link.response.per_prey(np) * npred;
            out[link.predator] += link.predator_gain_rate * link.response.value(np);
        }
    }

    /// Analytic Jacobian `d(dN_i/dt)/dN_j`.
    pub fn jacobian(&self, state: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        self.check_state(state)?;
        let n = self.dim();
        for link in &self.interactions {
            if let Some(exponent) = link.response.singular_at_zero() {
                if state[link.prey] == 0.0 {
                    return Err(ModelError::SingularPoint { index: link.prey, exponent });
                }
            }
        }
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = self.growth[i].derivative(state[i]) - self.removal_rate(i);
        }
        for link in &self.interactions {
            let (p, q) = (link.prey, link.predator);
            let phi = link.response.value(state[p]);
            let dphi = link.response.derivative(state[p]);
            jac[(p, p)] -= link.prey_loss_rate * dphi * state[q];
            jac[(p, q)] -= link.prey_loss_rate * phi;
            jac[(q, p)] += link.predator_gain_rate * dphi * state[q];
            jac[(q, q)] += link.predator_gain_rate * phi;
        }
        Ok(jac)
    }

    /// Recognizes a (possibly harvested) two-species Lotka-Volterra model and
    /// returns its base coefficients with the per-species removal rates.
    pub fn as_lotka_volterra(&self) -> Option<(LvParams, [f64; 2])> {
        if self.dim() != 2 || self.interactions.len() != 1 {
            return None;
        }
        let link = &self.interactions[0];
        if link.response != ResponseKind::Bilinear {
            return None;
        }
        let (p, q) = (link.prey, link.predator);
        let prey = &self.growth[p];
        let pred = &self.growth[q];
        if prey.kind != GrowthKind::MalthusGrowth || pred.kind != GrowthKind::MalthusMortality {
            return None;
        }
        let params = LvParams::new(prey.epsilon, link.prey_loss_rate, pred.epsilon, link.predator_gain_rate);
        Some((params, [self.removal_rate(p), self.removal_rate(q)]))
    }

    /// Index of the prey in the first interaction, or 0 without interactions.
    pub fn primary_prey(&self) -> usize {
        self.interactions.first().map_or(0, |l| l.prey)
    }
}

fn species(names: &[&str], initial: &[f64]) -> Result<Vec<SpeciesSpec>, ModelError> {
    names.iter().zip(initial).map(|(n, &v)| SpeciesSpec::new(*n, v)).collect()
}

/// Single species with exponential growth.
pub fn make_malthus(epsilon: f64, initial: f64) -> Result<Model, ModelError> {
    Model::new(species(&["population"], &[initial])?, vec![GrowthTerm::malthus_growth(epsilon)?], vec![], vec![])
}

/// Single species with logistic growth.
pub fn make_verhulst(epsilon: f64, capacity: f64, initial: f64) -> Result<Model, ModelError> {
    Model::new(
        species(&["population"], &[initial])?,
        vec![GrowthTerm::verhulst_growth(epsilon, capacity)?],
        vec![],
        vec![],
    )
}

/// Classical prey `N1` / predator `N2` system with bilinear encounters.
/// Initial densities default to `(1, 1)`; use [`Model::with_initial_state`] to change them.
pub fn make_lotka_volterra(params: LvParams) -> Result<Model, ModelError> {
    params.validate()?;
    Model::new(
        species(&["prey", "predator"], &[1.0, 1.0])?,
        vec![
            GrowthTerm::malthus_growth(params.prey_growth)?,
            GrowthTerm::malthus_mortality(params.predator_mortality)?,
        ],
        vec![InteractionTerm::new(0, 1, ResponseKind::Bilinear, params.prey_loss, params.predator_gain)?],
        vec![],
    )
}

/// Lotka-Volterra with uniform harvesting: `alpha * effort` removed from the
/// prey and `beta * effort` from the predator per unit density and time.
pub fn make_harvested_lotka_volterra(
    params: LvParams,
    alpha: f64,
    beta: f64,
    effort: f64,
) -> Result<Model, ModelError> {
    make_lotka_volterra(params)?
        .with_harvests(vec![HarvestTerm::new(0, alpha, effort)?, HarvestTerm::new(1, beta, effort)?])
}

pub fn make_rosenzweig_macarthur(params: RmParams) -> Result<Model, ModelError> {
    positive("prey_loss", params.prey_loss)?;
    positive("predator_gain", params.predator_gain)?;
    let start = params.interior_equilibrium().unwrap_or([params.capacity / 2.0, 1.0]);
    Model::new(
        species(&["prey", "predator"], &start)?,
        vec![
            GrowthTerm::verhulst_growth(params.prey_growth, params.capacity)?,
            GrowthTerm::malthus_mortality(params.predator_mortality)?,
        ],
        vec![InteractionTerm::new(
            0,
            1,
            ResponseKind::holling_ii(params.half_saturation)?,
            params.prey_loss,
            params.predator_gain,
        )?],
        vec![],
    )
}

/// Species order is `basal, middle, top`.
pub fn make_three_species_chain(params: ChainParams) -> Result<Model, ModelError> {
    Model::new(
        species(&["basal", "middle", "top"], &[1.0, 1.0, 1.0])?,
        vec![
            GrowthTerm::malthus_growth(params.basal_growth)?,
            GrowthTerm::malthus_mortality(params.middle_mortality)?,
            GrowthTerm::malthus_mortality(params.top_mortality)?,
        ],
        vec![
            InteractionTerm::new(0, 1, ResponseKind::Bilinear, params.lower_loss, params.lower_gain)?,
            InteractionTerm::new(1, 2, ResponseKind::Bilinear, params.upper_loss, params.upper_gain)?,
        ],
        vec![],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lv(a: f64, b: f64, c: f64, d: f64) -> Model {
        make_lotka_volterra(LvParams::new(a, b, c, d)).unwrap()
    }

    fn rm() -> RmParams {
        RmParams {
            prey_growth: 1.0,
            capacity: 5.0,
            prey_loss: 1.0,
            predator_mortality: 0.5,
            predator_gain: 1.0,
            half_saturation: 1.0,
        }
    }

    fn finite_difference(model: &Model, state: &[f64]) -> DMatrix<f64> {
        let n = state.len();
        let mut fd = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-6 * state[j].abs().max(1.0);
            let mut up = state.to_vec();
            let mut down = state.to_vec();
            up[j] += step;
            down[j] -= step;
            let fu = model.vector_field(&up).unwrap();
            let fdn = model.vector_field(&down).unwrap();
            for i in 0..n {
                fd[(i, j)] = (fu[i] - fdn[i]) / (2.0 * step);
            }
        }
        fd
    }

    #[test]
    fn lv_field_examples() {
        assert_eq!(lv(1.0, 1.0, 1.0, 1.0).vector_field(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        let f = lv(1.0, 0.5, 0.75, 0.25).vector_field(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(f[0], 0.5);
        assert_relative_eq!(f[1], -0.5);
    }

    #[test]
    fn malthus_field_and_jacobian() {
        let m = make_malthus(1.0, 2.0).unwrap();
        assert_eq!(m.vector_field(&[2.0]).unwrap(), vec![2.0]);
        let m = make_malthus(0.3, 1.0).unwrap();
        assert_eq!(m.jacobian(&[7.0]).unwrap()[(0, 0)], 0.3);
    }

    #[test]
    fn rm_predator_alone_decays() {
        let m = make_rosenzweig_macarthur(rm()).unwrap();
        let f = m.vector_field(&[0.0, 2.0]).unwrap();
        assert_eq!(f, vec![0.0, -1.0]);
    }

    #[test]
    fn rm_equilibria() {
        let p = rm();
        let m = make_rosenzweig_macarthur(p).unwrap();
        let f = m.vector_field(&[p.capacity, 0.0]).unwrap();
        assert_eq!(f[0], 0.0);
        // N1* = eps2 h / (gamma2 - eps2), predator line vanishes for any N2
        let prey_star = p.predator_mortality * p.half_saturation / (p.predator_gain - p.predator_mortality);
        let f = m.vector_field(&[prey_star, 0.7]).unwrap();
        assert!(f[1].abs() < 1e-15);
        let eq = p.interior_equilibrium().unwrap();
        let f = m.vector_field(&eq).unwrap();
        assert!(f[0].abs() < 1e-14 && f[1].abs() < 1e-14);
    }

    #[test]
    fn rm_large_half_saturation_recovers_bilinear() {
        let h = 1e9;
        let p = RmParams { half_saturation: h, prey_loss: 0.5 * h, predator_gain: 0.25 * h, capacity: 1e12, ..rm() };
        let m = make_rosenzweig_macarthur(p).unwrap();
        let state = [1.3, 0.7];
        let got = m.vector_field(&state).unwrap();
        let (n1, n2) = (state[0], state[1]);
        let want = [n1 - 0.5 * n1 * n2, -0.5 * n2 + 0.25 * n1 * n2];
        assert_relative_eq!(got[0], want[0], max_relative = 1e-6);
        assert_relative_eq!(got[1], want[1], max_relative = 1e-6);
    }

    #[test]
    fn chain_structure_and_equilibrium() {
        let p = ChainParams {
            basal_growth: 1.0,
            middle_mortality: 0.5,
            top_mortality: 0.6,
            lower_loss: 0.5,
            lower_gain: 0.4,
            upper_loss: 0.3,
            upper_gain: 0.3,
        };
        let m = make_three_species_chain(p).unwrap();
        assert_eq!(m.interactions().len(), 2);
        let f = m.vector_field(&[2.0, 0.0, 1.5]).unwrap();
        assert_eq!(f[2], -0.6 * 1.5);
        // Interior equilibria need basal_growth * upper_gain == lower_loss * top_mortality:
        // middle* = basal_growth / lower_loss = top_mortality / upper_gain = 2,
        // then lower_gain * basal* - upper_loss * top* = middle_mortality.
        let middle = p.basal_growth / p.lower_loss;
        let top = 1.0;
        let basal = (p.middle_mortality + p.upper_loss * top) / p.lower_gain;
        let f = m.vector_field(&[basal, middle, top]).unwrap();
        for v in f {
            assert!(v.abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn responses() {
        assert_eq!(response_value(&ResponseKind::holling_ii(2.0).unwrap(), 2.0), 0.5);
        assert_eq!(response_value(&ResponseKind::holling_iii(1.0).unwrap(), 1.0), 0.5);
        assert_eq!(response_value(&ResponseKind::gause(1.0).unwrap(), 3.0), 3.0);
        assert_eq!(ResponseKind::gause(1.5), Err(ModelError::GauseExponent(1.5)));
        assert!(ResponseKind::gause(0.0).is_err());
        assert!(ResponseKind::holling_ii(-1.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = lv(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(m.vector_field(&[1.0]), Err(ModelError::DimensionMismatch { .. })));
        assert!(matches!(m.vector_field(&[1.0, -0.1]), Err(ModelError::NegativeState { index: 1, .. })));
        assert!(make_lotka_volterra(LvParams::new(0.0, 1.0, 1.0, 1.0)).is_err());
        assert!(make_lotka_volterra(LvParams::new(1.0, 1.0, -1.0, 1.0)).is_err());
        assert!(GrowthTerm::verhulst_growth(1.0, 0.0).is_err());
        let s = vec![SpeciesSpec::new("a", 1.0).unwrap(), SpeciesSpec::new("a", 1.0).unwrap()];
        let g = vec![GrowthTerm::malthus_growth(1.0).unwrap(); 2];
        assert!(matches!(Model::new(s, g, vec![], vec![]), Err(ModelError::DuplicateName(_))));
        let h = vec![HarvestTerm::new(0, 1.0, 0.1).unwrap(), HarvestTerm::new(0, 1.0, 0.2).unwrap()];
        assert!(matches!(m.with_harvests(h), Err(ModelError::DuplicateHarvest(0))));
        assert!(InteractionTerm::new(0, 0, ResponseKind::Bilinear, 1.0, 1.0).is_err());
    }

    #[test]
    fn lv_jacobian_is_rotation_at_equilibrium() {
        let j = lv(1.0, 1.0, 1.0, 1.0).jacobian(&[1.0, 1.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn gause_jacobian_singular_at_zero_prey() {
        let s = vec![SpeciesSpec::new("x", 1.0).unwrap(), SpeciesSpec::new("y", 1.0).unwrap()];
        let g = vec![GrowthTerm::malthus_growth(1.0).unwrap(), GrowthTerm::malthus_mortality(1.0).unwrap()];
        let link = InteractionTerm::new(0, 1, ResponseKind::gause(0.5).unwrap(), 1.0, 1.0).unwrap();
        let m = Model::new(s, g, vec![link], vec![]).unwrap();
        assert!(matches!(m.jacobian(&[0.0, 1.0]), Err(ModelError::SingularPoint { index: 0, .. })));
        assert!(m.jacobian(&[0.2, 1.0]).is_ok());
    }

    #[test]
    fn harvest_recognized() {
        let m = make_harvested_lotka_volterra(LvParams::new(1.0, 0.5, 0.75, 0.25), 1.0, 2.0, 0.1).unwrap();
        let (p, removal) = m.as_lotka_volterra().unwrap();
        assert_eq!(p, LvParams::new(1.0, 0.5, 0.75, 0.25));
        assert_eq!(removal, [0.1, 0.2]);
        assert!(make_rosenzweig_macarthur(rm()).unwrap().as_lotka_volterra().is_none());
    }

    fn response_strategy() -> impl Strategy<Value = ResponseKind> {
        prop_oneof![
            Just(ResponseKind::Bilinear),
            (0.05f64..=1.0).prop_map(|g| ResponseKind::Gause { g }),
            (0.1f64..5.0).prop_map(|h| ResponseKind::HollingII { h }),
            (0.1f64..5.0).prop_map(|h| ResponseKind::HollingIII { h }),
        ]
    }

    fn general_model(response: ResponseKind, k: f64, harvest: f64) -> Model {
        let s = vec![
            SpeciesSpec::new("x", 1.0).unwrap(),
            SpeciesSpec::new("y", 1.0).unwrap(),
            SpeciesSpec::new("z", 1.0).unwrap(),
        ];
        let g = vec![
            GrowthTerm::verhulst_growth(1.1, k).unwrap(),
            GrowthTerm::verhulst_mortality(0.4, k).unwrap(),
            GrowthTerm::malthus_mortality(0.3).unwrap(),
        ];
        let links = vec![
            InteractionTerm::new(0, 1, response, 0.7, 0.35).unwrap(),
            InteractionTerm::new(1, 2, ResponseKind::HollingII { h: 0.8 }, 0.6, 0.5).unwrap(),
            InteractionTerm::new(0, 2, ResponseKind::Bilinear, 0.2, 0.1).unwrap(),
        ];
        let h = vec![HarvestTerm::new(0, 1.0, harvest).unwrap(), HarvestTerm::new(2, 2.0, harvest).unwrap()];
        Model::new(s, g, links, h).unwrap()
    }

    proptest! {
        #[test]
        fn response_monotone_and_zero_at_origin(kind in response_strategy(), a in 0.0f64..50.0, b in 0.0f64..50.0) {
            prop_assert_eq!(kind.value(0.0), 0.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(kind.value(lo) <= kind.value(hi));
            if let ResponseKind::HollingII { h } | ResponseKind::HollingIII { h } = kind {
                prop_assert_eq!(kind.value(h), 0.5);
                prop_assert!(kind.value(hi) < 1.0);
            }
        }

        #[test]
        fn jacobian_matches_finite_differences(
            kind in response_strategy(),
            k in 0.5f64..10.0,
            harvest in 0.0f64..0.5,
            state in proptest::collection::vec(0.05f64..5.0, 3),
        ) {
            let m = general_model(kind, k, harvest);
            let jac = m.jacobian(&state).unwrap();
            let fd = finite_difference(&m, &state);
            let scale = jac.abs().max().max(1.0);
            for (a, b) in jac.iter().zip(fd.iter()) {
                prop_assert!((a - b).abs() <= 1e-6 * scale, "{} vs {}", a, b);
            }
        }

        #[test]
        fn lv_constructor_matches_direct_formula(
            p in proptest::collection::vec(0.1f64..3.0, 4),
            n1 in 0.0f64..10.0,
            n2 in 0.0f64..10.0,
        ) {
            let m = lv(p[0], p[1], p[2], p[3]);
            let f = m.vector_field(&[n1, n2]).unwrap();
            let d1 = p[0] * n1 - p[1] * n1 * n2;
            let d2 = -p[2] * n2 + p[3] * n1 * n2;
            prop_assert!((f[0] - d1).abs() <= 4.0 * f64::EPSILON * (p[0] * n1 + p[1] * n1 * n2));
            prop_assert!((f[1] - d2).abs() <= 4.0 * f64::EPSILON * (p[2] * n2 + p[3] * n1 * n2));
        }

        #[test]
        fn extinct_species_stays_extinct(kind in response_strategy(), which in 0usize..3, state in proptest::collection::vec(0.05f64..5.0, 3)) {
            let m = general_model(kind, 2.0, 0.1);
            let mut s = state.clone();
            s[which] = 0.0;
            let f = m.vector_field(&s).unwrap();
            prop_assert_eq!(f[which], 0.0);
        }

        #[test]
        fn per_capita_consistent_with_field(kind in response_strategy(), state in proptest::collection::vec(0.05f64..5.0, 3)) {
            let m = general_model(kind, 2.0, 0.1);
            let f = m.vector_field(&state).unwrap();
            let mut r = vec![0.0; 3];
            m.per_capita_into(&state, &mut r);
            for i in 0..3 {
                prop_assert!((r[i] * state[i] - f[i]).abs() <= 1e-12 * (1.0 + f[i].abs()));
            }
        }
    }
}
