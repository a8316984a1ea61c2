//! Scenarios shipped with the binary.

use crate::CliError;

pub const CATALOG: [(&str, &str); 6] = [
    ("sec3-1d", include_str!("../scenarios/sec3-1d.toml")),
    (
        "diffusion-gradient",
        include_str!("../scenarios/diffusion-gradient.toml"),
    ),
    (
        "ou-const-friction",
        include_str!("../scenarios/ou-const-friction.toml"),
    ),
    (
        "thermophoresis",
        include_str!("../scenarios/thermophoresis.toml"),
    ),
    ("fdr-3d", include_str!("../scenarios/fdr-3d.toml")),
    ("magnetic", include_str!("../scenarios/magnetic.toml")),
];

pub fn get(name: &str) -> Result<&'static str, CliError> {
    CATALOG
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = CATALOG.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown scenario `{name}`; known: {}",
                names.join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use sklimit::model::check_assumptions;

    #[test]
    fn every_scenario_builds_and_passes_the_assumption_check() {
        for (name, text) in CATALOG {
            let cfg = ScenarioConfig::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
            let grid = cfg.experiment.assumption_grid;
            let s = cfg.build().unwrap_or_else(|e| panic!("{name}: {e}"));
            let report = check_assumptions(&s.model, grid).unwrap();
            assert!(report.passed(), "{name}: {report:?}");
        }
    }
}
