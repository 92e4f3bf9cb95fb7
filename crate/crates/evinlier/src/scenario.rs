//! Scenario files for `bench`, in TOML or JSON.

use std::path::Path;

use evinlier_core::harness::Scenario;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// A scenario plus the optional sweep over the atom mass.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BenchFile {
    #[serde(flatten)]
    pub scenario: Scenario,
    /// Rerun the scenario at each of these atom masses.
    #[serde(default)]
    pub phi1_grid: Option<Vec<f64>>,
    /// Jittered restarts per fit; the library default when absent.
    #[serde(default)]
    pub restarts: Option<usize>,
}

pub fn parse_bench(text: &str, json: bool) -> CliResult<BenchFile> {
    let file: BenchFile = if json {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("scenario: {e}")))?
    } else {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("scenario: {e}")))?
    };
    file.scenario.validate()?;
    Ok(file)
}

pub fn load_bench(path: &Path) -> CliResult<BenchFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_bench(&text, json).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use evinlier_core::ModelKind;

    const TOML: &str = r#"
name = "t"
n_values = [200, 500]
replications = 10
seed = 1
models = ["FEVIMM", "evmm"]
bootstrap_b = 0

[theta_true]
phi1 = 0.4
eta = 1
beta = 5
u = 11.5129
xi = 0.2
sigma = 5
phi2 = 0.1
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = parse_bench(TOML, false).unwrap();
        assert_eq!(a.scenario.models, vec![ModelKind::Fevimm, ModelKind::Evmm]);
        assert_eq!(a.scenario.ci_alpha, 0.05);
        assert!(a.phi1_grid.is_none());
        let json = r#"{"name":"t","n_values":[200,500],"replications":10,"seed":1,
            "models":["FEVIMM","EVMM"],"bootstrap_b":0,
            "theta_true":{"phi1":0.4,"eta":1,"beta":5,"u":11.5129,"xi":0.2,"sigma":5,"phi2":0.1}}"#;
        assert_eq!(parse_bench(json, true).unwrap(), a);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        assert!(parse_bench(&TOML.replace("replications = 10", "replications = 0"), false).is_err());
        assert!(parse_bench(&TOML.replace("phi1 = 0.4", "phi1 = 0.95"), false).is_err());
        assert!(parse_bench("name = ", false).is_err());
    }
}
