//! Canonical scenarios resolvable by name.

use super::config::{parse_config, ConfigError, ScenarioConfig};

const PRESETS: [(&str, &str); 5] = [
    ("lv-default", include_str!("../../presets/lv-default.json")),
    ("rm-cycle", include_str!("../../presets/rm-cycle.json")),
    ("rm-stable", include_str!("../../presets/rm-stable.json")),
    ("dancona-default", include_str!("../../presets/dancona-default.json")),
    ("chain-default", include_str!("../../presets/chain-default.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Raw JSON of a preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn load_preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let src = preset_source(name).ok_or_else(|| ConfigError::Invalid {
        path: "preset".into(),
        message: format!("unknown preset `{name}` (available: {})", preset_names().collect::<Vec<_>>().join(", ")),
    })?;
    parse_config(src)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse_and_build() {
        for name in preset_names() {
            let cfg = load_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.model.build().unwrap();
            let task = cfg.task.as_ref().expect("presets carry a task");
            task.validate(&cfg.model).unwrap();
        }
        assert!(load_preset("nope").is_err());
    }
}
