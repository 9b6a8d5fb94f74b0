use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::association::ScenarioId;
use crate::channel::FrameConfig;
use crate::error::{Error, Result};
use crate::game::GameConfig;
use crate::propagation::{LayoutConfig, PropagationConfig};
use crate::receiver::CombinerId;

/// One experiment, read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_scenario")]
    pub scenario: ScenarioId,
    pub layout: LayoutConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub game: GameConfig,
    /// Hz.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// Values of `alpha` swept by Game-PAS; `game.alpha` is ignored.
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_num_drops")]
    pub num_drops: usize,
    #[serde(default)]
    pub combiner: CombinerId,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// UE counts for the metrics-vs-K view; empty means `layout.num_ues` only.
    #[serde(default)]
    pub ue_counts: Vec<usize>,
}

fn default_scenario() -> ScenarioId {
    ScenarioId::CellFree
}

fn default_bandwidth() -> f64 {
    2e7
}

fn default_alpha_grid() -> Vec<f64> {
    vec![0.0, 0.3, 0.6, 1.0, 2.0]
}

fn default_num_drops() -> usize {
    20
}

fn default_ensemble_size() -> usize {
    10_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Desk-scale cell-free setup: 25 APs with 4 antennas, `num_ues` UEs.
    pub fn desk_scale(num_ues: usize) -> Self {
        Self {
            scenario: ScenarioId::CellFree,
            layout: LayoutConfig { area_side: 2000.0, num_aps: 25, antennas_per_ap: 4, num_ues },
            propagation: PropagationConfig::default(),
            frame: FrameConfig::default(),
            game: GameConfig::default(),
            bandwidth: default_bandwidth(),
            alpha_grid: default_alpha_grid(),
            num_drops: default_num_drops(),
            combiner: CombinerId::default(),
            ensemble_size: default_ensemble_size(),
            output_dir: default_output_dir(),
            seed: 0,
            ue_counts: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.propagation.validate()?;
        self.frame.validate()?;
        self.game.validate()?;
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidConfig("alpha_grid must not be empty".into()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=2.0).contains(*a)) {
            return Err(Error::InvalidConfig(format!("alpha values must lie in [0, 2], got {a}")));
        }
        if self.num_drops < 1 {
            return Err(Error::InvalidConfig("num_drops must be at least 1".into()));
        }
        if self.ensemble_size < 1 {
            return Err(Error::InvalidConfig("ensemble_size must be at least 1".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if let Some(k) = self.ue_counts.iter().find(|k| **k < 2) {
            return Err(Error::InvalidConfig(format!("ue_counts entries must be at least 2, got {k}")));
        }
        Ok(())
    }

    /// Copy with a different number of UEs.
    pub fn with_num_ues(&self, num_ues: usize) -> Self {
        let mut c = self.clone();
        c.layout.num_ues = num_ues;
        c
    }

    /// Copy with a different experiment seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// `ue_counts`, or the layout's UE count when none are given.
    pub fn ue_sweep(&self) -> Vec<usize> {
        if self.ue_counts.is_empty() {
            vec![self.layout.num_ues]
        } else {
            self.ue_counts.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{InitialPowerRule, Schedule};

    #[test]
    fn minimal_document_uses_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "[layout]\nnum_aps = 25\nantennas_per_ap = 4\nnum_ues = 10\n",
        )
        .unwrap();
        assert_eq!(c.scenario, ScenarioId::CellFree);
        assert_eq!(c.bandwidth, 2e7);
        assert_eq!(c.frame.tau_c, 200);
        assert_eq!(c.game.schedule, Schedule::Sequential);
        assert_eq!(c.ue_sweep(), vec![10]);
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"
            scenario = "small_cell"
            seed = 7
            num_drops = 3
            alpha_grid = [0.0, 0.5]
            combiner = "mrc"
            ensemble_size = 100
            ue_counts = [4, 6]
            [layout]
            num_aps = 9
            antennas_per_ap = 2
            num_ues = 4
            [propagation]
            correlation = "exponential:0.5"
            [frame]
            pilot_power_mode = "track_data_power"
            [game]
            schedule = "simultaneous"
            initial_power_rule = { fraction = 4.0 }
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.game.initial_power_rule, InitialPowerRule::Fraction(4.0));
        assert_eq!(c.combiner, CombinerId::Mrc);
        let back = ExperimentConfig::from_toml_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_documents() {
        let base = "[layout]\nnum_aps = 4\nantennas_per_ap = 1\nnum_ues = 3\n";
        assert!(ExperimentConfig::from_toml_str(&format!("alpha_grid = []\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("alpha_grid = [2.5]\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("num_drops = 0\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("bogus = 1\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml_str("[layout]\nnum_aps = 4\nantennas_per_ap = 1\nnum_ues = 1\n").is_err());
    }
}
