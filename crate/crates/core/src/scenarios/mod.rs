//! Scenario registry, configuration, and report emission.

mod builders;
mod report;

pub use builders::{
    prepare, projective_rotation_hamiltonian, scenario_accelerated_translation, scenario_disjoint_endpoints,
    scenario_projective_rotation, scenario_torus_graph, scenario_translated_circle, window, Prepared,
};
pub use report::{run_scenario, write_outputs, OracleDeltas, ScenarioReport, SelfChecks};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Stepper};

/// Registered scenario ids with one-line descriptions.
pub const REGISTRY: &[(&str, &str)] = &[
    (
        "projective-rotation",
        "RP^n in CP^n under a partial phase rotation; critical (n in {1, 2}, 1 <= k <= n, 0 < s <= 1)",
    ),
    (
        "torus-graph",
        "graphs of -t f'(x) over a circle in T^2, f = a cos(2 pi x)/(2 pi); critical for 0 < a < 1/4",
    ),
    ("translated-circle", "unit circle translated by H = x; non-critical"),
    (
        "disjoint-endpoints",
        "unit circle translated onto a disjoint copy (gap > 0); no critical path can exist",
    ),
    (
        "accelerated-translation",
        "unit circle under H = e^t x; time-dependent calibration with exact length 2(e - 1)",
    ),
];

pub fn registry_listing() -> String {
    REGISTRY
        .iter()
        .map(|(id, what)| format!("{id:<26}{what}\n"))
        .collect()
}

/// Flat scenario configuration. Unset fields take scenario defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub n: usize,
    pub k: usize,
    pub s: f64,
    pub gap: f64,
    pub amplitude: f64,
    /// Nodes per circle dimension (`m_phi` on `RP^2`, with `m_theta = mesh / 4`).
    pub mesh: Option<usize>,
    /// Offset of circle nodes, in units of the node spacing.
    pub phase: f64,
    pub tsamples: usize,
    pub steps: usize,
    pub stepper: Stepper,
    pub fd_step: f64,
    pub budget: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "projective-rotation".into(),
            n: 1,
            k: 1,
            s: 1.0,
            gap: 1.0,
            amplitude: 0.1,
            mesh: None,
            phase: 0.0,
            tsamples: 201,
            steps: 200,
            stepper: Stepper::Rk4,
            fd_step: 1e-5,
            budget: 200,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.into(),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            stepper: self.stepper,
            steps: self.steps,
            fd_step: self.fd_step,
        }
    }

    pub fn tgrid(&self) -> Vec<f64> {
        let n = self.tsamples - 1;
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    /// Fill in the scenario-dependent mesh default.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        if out.mesh.is_none() {
            let projective_plane = out.scenario == "projective-rotation" && out.n == 2;
            out.mesh = Some(if projective_plane { 64 } else { 512 });
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !REGISTRY.iter().any(|(id, _)| *id == self.scenario) {
            return bad(format!("unknown scenario '{}'", self.scenario));
        }
        if self.tsamples < 3 {
            return bad(format!("tsamples = {} < 3", self.tsamples));
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if !(0.0..1.0).contains(&self.phase) {
            return bad(format!("phase = {} outside [0, 1)", self.phase));
        }
        self.flow().validate()?;
        let mesh = self.resolved().mesh.unwrap_or(0);
        match self.scenario.as_str() {
            "projective-rotation" => {
                if !(1..=2).contains(&self.n) {
                    return bad(format!("n = {} unsupported (RP^1 and RP^2 only)", self.n));
                }
                if self.k == 0 || self.k > self.n {
                    return bad(format!("k = {} outside 1..={}", self.k, self.n));
                }
                if !(self.s > 0.0 && self.s <= 1.0) {
                    return bad(format!("s = {} outside (0, 1]", self.s));
                }
                if self.n == 2 && (mesh % 4 != 0 || mesh < 64) {
                    return bad(format!("mesh = {mesh} must be a multiple of 4 and at least 64 on RP^2"));
                }
            }
            "torus-graph" => {
                if !(0.0..0.25).contains(&self.amplitude) {
                    return bad(format!("amplitude = {} outside [0, 1/4)", self.amplitude));
                }
            }
            "disjoint-endpoints" => {
                if !(self.gap > 0.0 && self.gap.is_finite()) {
                    return bad(format!("gap = {} must be positive", self.gap));
                }
            }
            _ => {}
        }
        if mesh < crate::lagr::MIN_SAMPLES_PER_CIRCLE {
            return bad(format!("mesh = {mesh} below {}", crate::lagr::MIN_SAMPLES_PER_CIRCLE));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_is_flat_and_strict() {
        let c = ScenarioConfig::from_json(r#"{"scenario": "torus-graph", "amplitude": 0.2}"#).unwrap();
        assert_eq!(c.amplitude, 0.2);
        assert_eq!(c.tsamples, 201);
        assert!(ScenarioConfig::from_json(r#"{"scenaro": "x"}"#).is_err());
    }

    #[test]
    fn validation_ranges() {
        assert!(ScenarioConfig::new("projective-rotation").validate().is_ok());
        assert!(ScenarioConfig::new("nope").validate().is_err());
        let mut c = ScenarioConfig::new("projective-rotation");
        c.n = 3;
        assert!(c.validate().is_err());
        c.n = 2;
        c.k = 3;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::new("torus-graph");
        c.amplitude = 0.3;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::new("disjoint-endpoints");
        c.gap = 0.0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::new("translated-circle");
        c.mesh = Some(32);
        assert!(c.validate().is_err());
    }

    #[test]
    fn registry_lists_every_scenario() {
        let text = registry_listing();
        for (id, _) in REGISTRY {
            assert!(text.contains(id));
        }
    }
}
