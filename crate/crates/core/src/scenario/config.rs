//! JSON scenario configuration: schema, parsing with path-qualified errors,
//! and range validation.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::integrator::{IntegratorConfig, Method, PositivityMode, DEFAULT_ATOL, DEFAULT_MAX_STEPS, DEFAULT_RTOL};
use crate::model::{
    make_harvested_lotka_volterra, make_lotka_volterra, make_malthus, make_rosenzweig_macarthur,
    make_three_species_chain, make_verhulst, ChainParams, GrowthKind, GrowthTerm, HarvestTerm, InteractionTerm,
    LvParams, Model, ModelError, ResponseKind, RmParams, SpeciesSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("`{path}`: {message} (line {line}, column {column})")]
    Schema { path: String, message: String, line: usize, column: usize },
    #[error("`{path}`: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }

    /// Dotted path of the offending field, when known.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::Schema { path, .. } | ConfigError::Invalid { path, .. } => Some(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub integrator: IntegratorBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskConfig>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvHarvestBlock {
    pub alpha: f64,
    pub beta: f64,
    pub effort: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthBlock {
    pub kind: GrowthKind,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesBlock {
    pub name: String,
    pub initial: f64,
    pub growth: GrowthBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionBlock {
    pub prey: usize,
    pub predator: usize,
    pub response: ResponseKind,
    pub prey_loss_rate: f64,
    pub predator_gain_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestBlock {
    pub species: usize,
    pub coefficient: f64,
    pub effort: f64,
}

/// Model constructor plus its named parameters and initial densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constructor", rename_all = "snake_case")]
pub enum ModelConfig {
    Malthus(MalthusModel),
    Verhulst(VerhulstModel),
    LotkaVolterra(LvModel),
    RosenzweigMacarthur(RmModel),
    ThreeSpeciesChain(ChainModel),
    Custom(CustomModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MalthusModel {
    pub epsilon: f64,
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerhulstModel {
    pub epsilon: f64,
    pub capacity: f64,
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvModel {
    pub epsilon1: f64,
    pub gamma1: f64,
    pub epsilon2: f64,
    pub gamma2: f64,
    pub initial: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harvest: Option<LvHarvestBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmModel {
    pub epsilon1: f64,
    pub capacity: f64,
    pub gamma1: f64,
    pub epsilon2: f64,
    pub gamma2: f64,
    pub half_saturation: f64,
    pub initial: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainModel {
    pub basal_growth: f64,
    pub middle_mortality: f64,
    pub top_mortality: f64,
    pub lower_loss: f64,
    pub lower_gain: f64,
    pub upper_loss: f64,
    pub upper_gain: f64,
    pub initial: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub species: Vec<SpeciesBlock>,
    #[serde(default)]
    pub interactions: Vec<InteractionBlock>,
    #[serde(default)]
    pub harvests: Vec<HarvestBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    AdaptiveRk45,
    FixedRk4,
}

fn default_rtol() -> f64 {
    DEFAULT_RTOL
}
fn default_atol() -> f64 {
    DEFAULT_ATOL
}
fn default_span() -> [f64; 2] {
    [0.0, 100.0]
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_span")]
    pub t_span: [f64; 2],
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub positivity: PositivityMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl Default for IntegratorBlock {
    fn default() -> Self {
        IntegratorBlock {
            method: MethodName::AdaptiveRk45,
            step: None,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            t_span: default_span(),
            max_steps: DEFAULT_MAX_STEPS,
            positivity: PositivityMode::Auto,
            max_step: None,
        }
    }
}

impl IntegratorBlock {
    pub fn to_config(&self) -> IntegratorConfig {
        let method = match self.method {
            MethodName::AdaptiveRk45 => Method::AdaptiveRk45 { rtol: self.rtol, atol: self.atol },
            MethodName::FixedRk4 => Method::FixedRk4 { step: self.step.unwrap_or(f64::NAN) },
        };
        IntegratorConfig { method, max_steps: self.max_steps, positivity: self.positivity, max_step: self.max_step }
    }
}

fn one() -> f64 {
    1.0
}
fn five() -> usize {
    5
}
fn default_efforts() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2]
}
fn transient() -> f64 {
    500.0
}
fn peace_effort() -> f64 {
    0.2
}
fn war_effort() -> f64 {
    0.05
}

/// Task-specific options; the task kind is chosen by the CLI subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Simulate {},
    Equilibria(EquilibriaTask),
    Averages(AveragesTask),
    HarvestLaw(HarvestLawTask),
    LimitCycle(LimitCycleTask),
    Dancona(DanconaTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guesses: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragesTask {
    #[serde(default = "five")]
    pub n_periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestLawTask {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "default_efforts")]
    pub efforts: Vec<f64>,
    #[serde(default = "five")]
    pub n_periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitCycleTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_states: Option<Vec<Vec<f64>>>,
    #[serde(default = "transient")]
    pub transient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DanconaTask {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "peace_effort")]
    pub pre_war: f64,
    #[serde(default = "war_effort")]
    pub war: f64,
    #[serde(default = "peace_effort")]
    pub post_war: f64,
    #[serde(default = "five")]
    pub periods_per_phase: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Simulate,
    Equilibria,
    Averages,
    HarvestLaw,
    LimitCycle,
    Dancona,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Simulate,
        TaskKind::Equilibria,
        TaskKind::Averages,
        TaskKind::HarvestLaw,
        TaskKind::LimitCycle,
        TaskKind::Dancona,
    ];

    /// Subcommand spelling.
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Simulate => "simulate",
            TaskKind::Equilibria => "equilibria",
            TaskKind::Averages => "averages",
            TaskKind::HarvestLaw => "harvest-law",
            TaskKind::LimitCycle => "limit-cycle",
            TaskKind::Dancona => "dancona",
        }
    }

    pub fn default_config(&self) -> TaskConfig {
        let json = match self {
            TaskKind::Simulate => r#"{"kind":"simulate"}"#,
            TaskKind::Equilibria => r#"{"kind":"equilibria"}"#,
            TaskKind::Averages => r#"{"kind":"averages"}"#,
            TaskKind::HarvestLaw => r#"{"kind":"harvest_law"}"#,
            TaskKind::LimitCycle => r#"{"kind":"limit_cycle"}"#,
            TaskKind::Dancona => r#"{"kind":"dancona"}"#,
        };
        serde_json::from_str(json).expect("default task config")
    }
}

impl TaskConfig {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskConfig::Simulate {} => TaskKind::Simulate,
            TaskConfig::Equilibria(_) => TaskKind::Equilibria,
            TaskConfig::Averages(_) => TaskKind::Averages,
            TaskConfig::HarvestLaw(_) => TaskKind::HarvestLaw,
            TaskConfig::LimitCycle(_) => TaskKind::LimitCycle,
            TaskConfig::Dancona(_) => TaskKind::Dancona,
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "yes")]
    pub svg: bool,
}

fn default_dir() -> String {
    "out".into()
}
fn yes() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_dir(), svg: true }
    }
}

/// Parses and validates a UTF-8 JSON scenario document.
pub fn parse_config(document: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let (line, column) = (inner.line(), inner.column());
        if inner.is_syntax() || inner.is_eof() {
            ConfigError::Syntax { line, column, message: strip_position(&inner.to_string()) }
        } else {
            let (path, message) =
                refine_tagged(document, &path).unwrap_or_else(|| (path, strip_position(&inner.to_string())));
            ConfigError::Schema { path, message, line, column }
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Tagged blocks are buffered by serde, which hides the failing field; redo
/// the failing block against its variant struct to recover the full path.
fn refine_tagged(document: &str, path: &str) -> Option<(String, String)> {
    fn probe<T: DeserializeOwned>(v: Value) -> Option<(String, String)> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| (e.path().to_string(), e.into_inner().to_string()))
    }
    let (block, tag) = match path {
        "model" => ("model", "constructor"),
        "task" => ("task", "kind"),
        _ => return None,
    };
    let root: Value = serde_json::from_str(document).ok()?;
    let mut fields = root.get(block)?.as_object()?.clone();
    let name = fields.remove(tag)?.as_str()?.to_string();
    let v = Value::Object(fields);
    let (inner, message) = match (block, name.as_str()) {
        ("model", "malthus") => probe::<MalthusModel>(v),
        ("model", "verhulst") => probe::<VerhulstModel>(v),
        ("model", "lotka_volterra") => probe::<LvModel>(v),
        ("model", "rosenzweig_macarthur") => probe::<RmModel>(v),
        ("model", "three_species_chain") => probe::<ChainModel>(v),
        ("model", "custom") => probe::<CustomModel>(v),
        ("task", "equilibria") => probe::<EquilibriaTask>(v),
        ("task", "averages") => probe::<AveragesTask>(v),
        ("task", "harvest_law") => probe::<HarvestLawTask>(v),
        ("task", "limit_cycle") => probe::<LimitCycleTask>(v),
        ("task", "dancona") => probe::<DanconaTask>(v),
        _ => None,
    }?;
    let path = if inner == "." { block.to_string() } else { format!("{block}.{inner}") };
    Some((path, message))
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn to_json(config: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

struct Checker {
    prefix: String,
}

impl Checker {
    fn at(prefix: &str) -> Self {
        Checker { prefix: prefix.to_string() }
    }

    fn path(&self, field: &str) -> String {
        if self.prefix.is_empty() {
            field.to_string()
        } else {
            format!("{}.{}", self.prefix, field)
        }
    }

    fn positive(&self, field: &str, v: f64) -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(ConfigError::invalid(self.path(field), format!("must be a finite number > 0, got {v}")))
        }
    }

    fn non_negative(&self, field: &str, v: f64) -> Result<(), ConfigError> {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(ConfigError::invalid(self.path(field), format!("must be a finite number >= 0, got {v}")))
        }
    }

    fn densities(&self, field: &str, v: &[f64]) -> Result<(), ConfigError> {
        for (i, &x) in v.iter().enumerate() {
            self.non_negative(&format!("{field}[{i}]"), x)?;
        }
        Ok(())
    }
}

fn response_check(c: &Checker, r: &ResponseKind) -> Result<(), ConfigError> {
    match *r {
        ResponseKind::Bilinear => Ok(()),
        ResponseKind::Gause { g } => {
            if g.is_finite() && g > 0.0 && g <= 1.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(c.path("g"), format!("Gause exponent must satisfy 0 < g ≤ 1, got {g}")))
            }
        }
        ResponseKind::HollingII { h } | ResponseKind::HollingIII { h } => c.positive("h", h),
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let c = Checker::at("model");
        match self {
            ModelConfig::Malthus(MalthusModel { epsilon, initial }) => {
                c.positive("epsilon", *epsilon)?;
                c.non_negative("initial", *initial)
            }
            ModelConfig::Verhulst(VerhulstModel { epsilon, capacity, initial }) => {
                c.positive("epsilon", *epsilon)?;
                c.positive("capacity", *capacity)?;
                c.non_negative("initial", *initial)
            }
            ModelConfig::LotkaVolterra(LvModel { epsilon1, gamma1, epsilon2, gamma2, initial, harvest }) => {
                c.positive("epsilon1", *epsilon1)?;
                c.positive("gamma1", *gamma1)?;
                c.positive("epsilon2", *epsilon2)?;
                c.positive("gamma2", *gamma2)?;
                c.densities("initial", initial)?;
                if let Some(h) = harvest {
                    let hc = Checker::at("model.harvest");
                    hc.non_negative("alpha", h.alpha)?;
                    hc.non_negative("beta", h.beta)?;
                    hc.non_negative("effort", h.effort)?;
                }
                Ok(())
            }
            ModelConfig::RosenzweigMacarthur(RmModel {
                epsilon1,
                capacity,
                gamma1,
                epsilon2,
                gamma2,
                half_saturation,
                initial,
            }) => {
                c.positive("epsilon1", *epsilon1)?;
                c.positive("capacity", *capacity)?;
                c.positive("gamma1", *gamma1)?;
                c.positive("epsilon2", *epsilon2)?;
                c.positive("gamma2", *gamma2)?;
                c.positive("half_saturation", *half_saturation)?;
                c.densities("initial", initial)
            }
            ModelConfig::ThreeSpeciesChain(ChainModel {
                basal_growth,
                middle_mortality,
                top_mortality,
                lower_loss,
                lower_gain,
                upper_loss,
                upper_gain,
                initial,
            }) => {
                for (name, v) in [
                    ("basal_growth", basal_growth),
                    ("middle_mortality", middle_mortality),
                    ("top_mortality", top_mortality),
                    ("lower_loss", lower_loss),
                    ("lower_gain", lower_gain),
                    ("upper_loss", upper_loss),
                    ("upper_gain", upper_gain),
                ] {
                    c.positive(name, *v)?;
                }
                c.densities("initial", initial)
            }
            ModelConfig::Custom(CustomModel { species, interactions, harvests }) => {
                if species.is_empty() {
                    return Err(ConfigError::invalid("model.species", "at least one species is required"));
                }
                for (i, s) in species.iter().enumerate() {
                    let sc = Checker::at(&format!("model.species[{i}]"));
                    if species[..i].iter().any(|o| o.name == s.name) {
                        return Err(ConfigError::invalid(
                            sc.path("name"),
                            format!("duplicate species name `{}`", s.name),
                        ));
                    }
                    sc.non_negative("initial", s.initial)?;
                    let gc = Checker::at(&sc.path("growth"));
                    gc.positive("epsilon", s.growth.epsilon)?;
                    let verhulst = matches!(s.growth.kind, GrowthKind::VerhulstGrowth | GrowthKind::VerhulstMortality);
                    match (verhulst, s.growth.capacity) {
                        (true, Some(k)) => gc.positive("capacity", k)?,
                        (true, None) => {
                            return Err(ConfigError::invalid(gc.path("capacity"), "required for Verhulst kinds"))
                        }
                        (false, Some(_)) => {
                            return Err(ConfigError::invalid(gc.path("capacity"), "only allowed for Verhulst kinds"))
                        }
                        (false, None) => {}
                    }
                }
                let n = species.len();
                for (i, link) in interactions.iter().enumerate() {
                    let ic = Checker::at(&format!("model.interactions[{i}]"));
                    for (field, idx) in [("prey", link.prey), ("predator", link.predator)] {
                        if idx >= n {
                            return Err(ConfigError::invalid(
                                ic.path(field),
                                format!("species index {idx} out of range 0..{n}"),
                            ));
                        }
                    }
                    if link.prey == link.predator {
                        return Err(ConfigError::invalid(ic.path("predator"), "must differ from prey"));
                    }
                    response_check(&Checker::at(&ic.path("response")), &link.response)?;
                    ic.positive("prey_loss_rate", link.prey_loss_rate)?;
                    ic.positive("predator_gain_rate", link.predator_gain_rate)?;
                }
                for (i, h) in harvests.iter().enumerate() {
                    let hc = Checker::at(&format!("model.harvests[{i}]"));
                    if h.species >= n {
                        return Err(ConfigError::invalid(
                            hc.path("species"),
                            format!("species index {} out of range 0..{n}", h.species),
                        ));
                    }
                    if harvests[..i].iter().any(|o| o.species == h.species) {
                        return Err(ConfigError::invalid(hc.path("species"), "at most one harvest term per species"));
                    }
                    hc.non_negative("coefficient", h.coefficient)?;
                    hc.non_negative("effort", h.effort)?;
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Malthus(_) | ModelConfig::Verhulst(_) => 1,
            ModelConfig::LotkaVolterra(_) | ModelConfig::RosenzweigMacarthur(_) => 2,
            ModelConfig::ThreeSpeciesChain(_) => 3,
            ModelConfig::Custom(CustomModel { species, .. }) => species.len(),
        }
    }

    /// Base Lotka-Volterra coefficients, for the LV constructor only.
    pub fn lv_params(&self) -> Option<LvParams> {
        match *self {
            ModelConfig::LotkaVolterra(LvModel { epsilon1, gamma1, epsilon2, gamma2, .. }) => {
                Some(LvParams::new(epsilon1, gamma1, epsilon2, gamma2))
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Model, ModelError> {
        match self {
            ModelConfig::Malthus(MalthusModel { epsilon, initial }) => make_malthus(*epsilon, *initial),
            ModelConfig::Verhulst(VerhulstModel { epsilon, capacity, initial }) => {
                make_verhulst(*epsilon, *capacity, *initial)
            }
            ModelConfig::LotkaVolterra(LvModel { initial, harvest, .. }) => {
                let p = self.lv_params().expect("lotka-volterra");
                let m = match harvest {
                    Some(h) => make_harvested_lotka_volterra(p, h.alpha, h.beta, h.effort)?,
                    None => make_lotka_volterra(p)?,
                };
                m.with_initial_state(initial)
            }
            ModelConfig::RosenzweigMacarthur(RmModel {
                epsilon1,
                capacity,
                gamma1,
                epsilon2,
                gamma2,
                half_saturation,
                initial,
            }) => make_rosenzweig_macarthur(RmParams {
                prey_growth: *epsilon1,
                capacity: *capacity,
                prey_loss: *gamma1,
                predator_mortality: *epsilon2,
                predator_gain: *gamma2,
                half_saturation: *half_saturation,
            })?
            .with_initial_state(initial),
            ModelConfig::ThreeSpeciesChain(ChainModel {
                basal_growth,
                middle_mortality,
                top_mortality,
                lower_loss,
                lower_gain,
                upper_loss,
                upper_gain,
                initial,
            }) => make_three_species_chain(ChainParams {
                basal_growth: *basal_growth,
                middle_mortality: *middle_mortality,
                top_mortality: *top_mortality,
                lower_loss: *lower_loss,
                lower_gain: *lower_gain,
                upper_loss: *upper_loss,
                upper_gain: *upper_gain,
            })?
            .with_initial_state(initial),
            ModelConfig::Custom(CustomModel { species, interactions, harvests }) => {
                let specs =
                    species.iter().map(|s| SpeciesSpec::new(s.name.clone(), s.initial)).collect::<Result<_, _>>()?;
                let growth = species
                    .iter()
                    .map(|s| {
                        let g = &s.growth;
                        match g.kind {
                            GrowthKind::MalthusGrowth => GrowthTerm::malthus_growth(g.epsilon),
                            GrowthKind::MalthusMortality => GrowthTerm::malthus_mortality(g.epsilon),
                            GrowthKind::VerhulstGrowth => {
                                GrowthTerm::verhulst_growth(g.epsilon, g.capacity.unwrap_or(f64::NAN))
                            }
                            GrowthKind::VerhulstMortality => {
                                GrowthTerm::verhulst_mortality(g.epsilon, g.capacity.unwrap_or(f64::NAN))
                            }
                        }
                    })
                    .collect::<Result<_, _>>()?;
                let links = interactions
                    .iter()
                    .map(|l| {
                        InteractionTerm::new(l.prey, l.predator, l.response, l.prey_loss_rate, l.predator_gain_rate)
                    })
                    .collect::<Result<_, _>>()?;
                let harvests = harvests
                    .iter()
                    .map(|h| HarvestTerm::new(h.species, h.coefficient, h.effort))
                    .collect::<Result<_, _>>()?;
                Model::new(specs, growth, links, harvests)
            }
        }
    }
}

impl IntegratorBlock {
    fn validate(&self) -> Result<(), ConfigError> {
        let c = Checker::at("integrator");
        match self.method {
            MethodName::FixedRk4 => match self.step {
                Some(s) => c.positive("step", s)?,
                None => return Err(ConfigError::invalid(c.path("step"), "required for fixed_rk4")),
            },
            MethodName::AdaptiveRk45 => {
                if !(self.rtol.is_finite() && self.rtol >= 1e-14) {
                    return Err(ConfigError::invalid(c.path("rtol"), format!("must be >= 1e-14, got {}", self.rtol)));
                }
                if !(self.atol.is_finite() && self.atol >= 1e-16) {
                    return Err(ConfigError::invalid(c.path("atol"), format!("must be >= 1e-16, got {}", self.atol)));
                }
            }
        }
        let [t0, t1] = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(ConfigError::invalid(c.path("t_span"), format!("needs finite t0 < t1, got [{t0}, {t1}]")));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::invalid(c.path("max_steps"), "must be > 0"));
        }
        if let Some(m) = self.max_step {
            c.positive("max_step", m)?;
        }
        Ok(())
    }
}

impl TaskConfig {
    pub fn validate(&self, model: &ModelConfig) -> Result<(), ConfigError> {
        let c = Checker::at("task");
        let dim = model.dim();
        let states = |field: &str, list: &[Vec<f64>], positive: bool| -> Result<(), ConfigError> {
            for (i, s) in list.iter().enumerate() {
                if s.len() != dim {
                    return Err(ConfigError::invalid(
                        c.path(&format!("{field}[{i}]")),
                        format!("needs {dim} components, got {}", s.len()),
                    ));
                }
                for (j, &v) in s.iter().enumerate() {
                    let p = format!("{field}[{i}][{j}]");
                    if positive {
                        c.positive(&p, v)?;
                    } else {
                        c.non_negative(&p, v)?;
                    }
                }
            }
            Ok(())
        };
        let needs_lv = |what: &str| -> Result<LvParams, ConfigError> {
            model.lv_params().ok_or_else(|| {
                ConfigError::invalid("model.constructor", format!("{what} requires the lotka_volterra constructor"))
            })
        };
        let periods = |field: &str, n: usize| {
            if n >= 3 {
                Ok(())
            } else {
                Err(ConfigError::invalid(c.path(field), format!("must be >= 3, got {n}")))
            }
        };
        let admissible = |field: &str, p: &LvParams, alpha: f64, f: f64| {
            c.non_negative(field, f)?;
            if alpha * f >= p.prey_growth {
                return Err(ConfigError::invalid(
                    c.path(field),
                    format!(
                        "effort {f} is inadmissible: alpha * effort = {} must be < epsilon1 = {}",
                        alpha * f,
                        p.prey_growth
                    ),
                ));
            }
            Ok(())
        };
        match self {
            TaskConfig::Simulate {} => Ok(()),
            TaskConfig::Equilibria(EquilibriaTask { guesses }) => match guesses {
                Some(g) if g.is_empty() => Err(ConfigError::invalid(c.path("guesses"), "must not be empty")),
                Some(g) => states("guesses", g, false),
                None => Ok(()),
            },
            TaskConfig::Averages(AveragesTask { n_periods }) => periods("n_periods", *n_periods),
            TaskConfig::HarvestLaw(HarvestLawTask { alpha, beta, efforts, n_periods }) => {
                let p = needs_lv("harvest_law")?;
                c.non_negative("alpha", *alpha)?;
                c.non_negative("beta", *beta)?;
                periods("n_periods", *n_periods)?;
                if efforts.is_empty() {
                    return Err(ConfigError::invalid(c.path("efforts"), "must not be empty"));
                }
                for (i, &f) in efforts.iter().enumerate() {
                    admissible(&format!("efforts[{i}]"), &p, *alpha, f)?;
                }
                Ok(())
            }
            TaskConfig::LimitCycle(LimitCycleTask { initial_states, transient }) => {
                c.positive("transient", *transient)?;
                if dim != 2 {
                    return Err(ConfigError::invalid("model.constructor", "limit_cycle requires a two-species model"));
                }
                match initial_states {
                    Some(list) => {
                        if list.len() < 2 {
                            return Err(ConfigError::invalid(
                                c.path("initial_states"),
                                "needs at least 2 initial states",
                            ));
                        }
                        states("initial_states", list, true)
                    }
                    None => Ok(()),
                }
            }
            TaskConfig::Dancona(DanconaTask { alpha, beta, pre_war, war, post_war, periods_per_phase }) => {
                let p = needs_lv("dancona")?;
                c.non_negative("alpha", *alpha)?;
                c.non_negative("beta", *beta)?;
                periods("periods_per_phase", *periods_per_phase)?;
                admissible("pre_war", &p, *alpha, *pre_war)?;
                admissible("war", &p, *alpha, *war)?;
                admissible("post_war", &p, *alpha, *post_war)?;
                if *war > pre_war.min(*post_war) {
                    return Err(ConfigError::invalid(
                        c.path("war"),
                        "war-time effort must not exceed the peace-time efforts",
                    ));
                }
                Ok(())
            }
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.integrator.validate()?;
        if let Some(t) = &self.task {
            t.validate(&self.model)?;
        }
        Ok(())
    }

    /// Options for `kind`: the task block if it matches, otherwise defaults.
    pub fn task_for(&self, kind: TaskKind) -> Result<TaskConfig, ConfigError> {
        let task = match &self.task {
            Some(t) if t.kind() == kind => t.clone(),
            _ => kind.default_config(),
        };
        task.validate(&self.model)?;
        Ok(task)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "model": {
    "constructor": "lotka_volterra",
    "epsilon1": 1.0, "gamma1": 0.5, "epsilon2": 0.75, "gamma2": 0.25,
    "initial": [1.0, 1.0]
  }
}"#;

    #[test]
    fn minimal_lv_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.integrator, IntegratorBlock::default());
        assert!(cfg.task.is_none());
        let m = cfg.model.build().unwrap();
        assert_eq!(m.initial_state(), vec![1.0, 1.0]);
        assert!(m.as_lotka_volterra().is_some());
    }

    #[test]
    fn negative_epsilon_names_field() {
        let doc = MINIMAL.replace("\"epsilon1\": 1.0", "\"epsilon1\": -1.0");
        let err = parse_config(&doc).unwrap_err();
        assert_eq!(err.path(), Some("model.epsilon1"));
    }

    #[test]
    fn gause_exponent_domain() {
        let doc = r#"{"model": {"constructor": "custom",
            "species": [
              {"name": "prey", "initial": 1, "growth": {"kind": "malthus_growth", "epsilon": 1}},
              {"name": "predator", "initial": 1, "growth": {"kind": "malthus_mortality", "epsilon": 1}}
            ],
            "interactions": [{"prey": 0, "predator": 1, "response": {"kind": "gause", "g": 1.5},
                              "prey_loss_rate": 1, "predator_gain_rate": 1}]}}"#;
        let err = parse_config(doc).unwrap_err();
        assert_eq!(err.path(), Some("model.interactions[0].response.g"));
        assert!(err.to_string().contains("0 < g ≤ 1"), "{err}");
        let ok = doc.replace("1.5", "0.5");
        let m = parse_config(&ok).unwrap().model.build().unwrap();
        assert_eq!(m.interactions()[0].response, ResponseKind::Gause { g: 0.5 });
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let doc = MINIMAL.replace("\"gamma2\": 0.25", "\"gamma2\": 0.25, \"gamma3\": 1");
        let err = parse_config(&doc).unwrap_err();
        assert!(matches!(err, ConfigError::Schema { .. }), "{err:?}");
        assert!(err.to_string().contains("gamma3"), "{err}");
        assert!(err.path().unwrap().starts_with("model"), "{err:?}");

        let doc = MINIMAL.replace(
            "\"initial\": [1.0, 1.0]",
            "\"initial\": [1.0, 1.0]}, \"integrator\": {\"method\": \"adaptive_rk45\", \"rtoll\": 1",
        );
        let doc = doc.trim_end().trim_end_matches('}').to_string() + "}}";
        let err = parse_config(&doc).unwrap_err();
        assert_eq!(err.path(), Some("integrator.rtoll"), "{err:?}");
        assert!(err.to_string().contains("rtoll"));

        let doc = MINIMAL.trim_end().trim_end_matches('}').to_string() + r#", "colour": "red"}"#;
        let err = parse_config(&doc).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_config("{\n  \"model\": {,\n}").unwrap_err();
        match err {
            ConfigError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_path_and_position() {
        let doc = MINIMAL.replace("\"gamma1\": 0.5", "\"gamma1\": \"half\"");
        let err = parse_config(&doc).unwrap_err();
        assert_eq!(err.path(), Some("model.gamma1"), "{err:?}");
        assert!(err.to_string().contains("expected f64"), "{err}");
        let doc = MINIMAL.trim_end().trim_end_matches('}').to_string()
            + r#", "task": {"kind": "averages", "n_periods": -2}}"#;
        let err = parse_config(&doc).unwrap_err();
        assert_eq!(err.path(), Some("task.n_periods"), "{err:?}");
    }

    #[test]
    fn task_validation() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.task = Some(TaskConfig::HarvestLaw(HarvestLawTask {
            alpha: 1.0,
            beta: 1.0,
            efforts: vec![0.1, 1.1],
            n_periods: 5,
        }));
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.path(), Some("task.efforts[1]"));
        assert!(cfg.task_for(TaskKind::Averages).is_ok());
        let rm = r#"{"model": {"constructor": "rosenzweig_macarthur", "epsilon1": 1, "capacity": 5, "gamma1": 1,
            "epsilon2": 0.5, "gamma2": 1, "half_saturation": 1, "initial": [0.5, 0.8]}}"#;
        let cfg = parse_config(rm).unwrap();
        assert_eq!(cfg.task_for(TaskKind::Dancona).unwrap_err().path(), Some("model.constructor"));
        let fixed =
            MINIMAL.trim_end().trim_end_matches('}').to_string() + r#", "integrator": {"method": "fixed_rk4"}}"#;
        assert_eq!(parse_config(&fixed).unwrap_err().path(), Some("integrator.step"));
    }

    #[test]
    fn serialize_round_trip() {
        for name in crate::scenario::presets::preset_names() {
            let cfg = crate::scenario::presets::load_preset(name).unwrap();
            let again = parse_config(&to_json(&cfg)).unwrap();
            assert_eq!(again, cfg, "{name}");
        }
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&to_json(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn task_kind_names() {
        for k in TaskKind::ALL {
            assert_eq!(k.name().parse::<TaskKind>().unwrap(), k);
            assert_eq!(k.default_config().kind(), k);
        }
        assert!("bogus".parse::<TaskKind>().is_err());
    }
}
