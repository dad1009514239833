use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analytic::{MeshShape, PeMemory, Precision};
use crate::dataflow::Mode;
use crate::noc::NocConfig;
use crate::power::EnergyCoefficients;

/// Everything one sweep needs. Every field has a default, so a config file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub noc: NocConfig,
    /// PEs per router to sweep.
    pub pes: Vec<u32>,
    /// Bits per weight.
    pub precision: u32,
    /// PE weight memory, in bits.
    pub memory_bits: u64,
    /// Bundled workload names or paths to layer files.
    pub workloads: Vec<String>,
    pub modes: Vec<Mode>,
    /// Rounds simulated per run; 0 simulates the whole layer.
    pub rounds_cap: u64,
    /// Evaluate round counts even for layers that fit in one PE.
    pub force_rounds: bool,
    pub seed: u64,
    /// Tensor elements carried by one stream payload word.
    pub stream_scale: u32,
    pub coefficient_set: String,
    pub coefficients: EnergyCoefficients,
    pub out_dir: PathBuf,
    /// Write a per-run network event log next to the reports.
    pub event_log: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            noc: NocConfig::default(),
            pes: vec![1, 2, 4, 8],
            precision: 32,
            memory_bits: PeMemory::DEFAULT_BITS,
            workloads: vec!["alexnet".into(), "vgg16".into(), "resnet50".into()],
            modes: Mode::ALL.to_vec(),
            rounds_cap: 64,
            force_rounds: false,
            seed: 1,
            stream_scale: 32,
            coefficient_set: "default".into(),
            coefficients: EnergyCoefficients::default(),
            out_dir: PathBuf::from("out"),
            event_log: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.noc.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.precision()?;
        self.memory()?;
        if self.pes.is_empty() {
            return bad("pes must list at least one value".into());
        }
        for &e in &self.pes {
            MeshShape::new(self.noc.n as u32, e).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.modes.is_empty() {
            return bad("modes must list at least one mode".into());
        }
        if self.workloads.is_empty() {
            return bad("workloads must list at least one workload".into());
        }
        if self.stream_scale == 0 {
            return bad("stream_scale must be >= 1".into());
        }
        self.coefficients.validate(self.noc.ina_enabled).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn precision(&self) -> Result<Precision, HarnessError> {
        Precision::new(self.precision).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn memory(&self) -> Result<PeMemory, HarnessError> {
        PeMemory::new(self.memory_bits, self.precision()?).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn cap(&self) -> Option<u64> {
        (self.rounds_cap > 0).then_some(self.rounds_cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn shipped_config_is_the_default() {
        let text = include_str!("../../config/default.toml");
        assert_eq!(ExperimentConfig::from_toml(text).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn partial_override() {
        let cfg = ExperimentConfig::from_toml("pes = [2]\n[noc]\nn = 4\n").unwrap();
        assert_eq!(cfg.pes, vec![2]);
        assert_eq!(cfg.noc.n, 4);
        assert_eq!(cfg.noc.buffer_depth, 4);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("modes = []").is_err());
        assert!(ExperimentConfig::from_toml("precision = 12").is_err());
        assert!(ExperimentConfig::from_toml("unknown = 1").is_err());
        assert!(ExperimentConfig::from_toml("[coefficients]\nlink = -1.0").is_err());
    }
}
