//! Trial and protocol configuration files (TOML).
//!
//! A trial file carries every parameter of one run; missing sections take
//! the defaults below. A protocol file lists blocks of trial labels and a
//! `[defaults]` table with the same keys as a trial file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::choreography::{ChoreographyConfig, SignalParams, SignalSet};
use crate::error::{Error, Result};
use crate::jointspace::JointGainSpec;
use crate::model::KinematicModel;
use crate::partner::PartnerModel;
use crate::taskspace::TaskGains;

/// Upper bound on the control period.
pub const MAX_TIMESTEP: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialConfig {
    /// Name used for log files; defaults to the signal label.
    pub name: Option<String>,
    pub signals: SignalSet,
    /// Trial length (s).
    pub duration: f64,
    /// Control period (s).
    pub timestep: f64,
    pub seed: u64,
    /// Model geometry file; the bundled humanoid when absent.
    pub model: Option<PathBuf>,
    /// Output directory for logs.
    pub out: Option<PathBuf>,
    /// Hand deflection that stops the dance (m).
    pub stop_threshold: f64,
    pub task: TaskGains,
    pub joint: JointGainSpec,
    pub signal: SignalParams,
    pub partner: PartnerModel,
    pub choreography: ChoreographyConfig,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            name: None,
            signals: SignalSet::none(),
            duration: 30.0,
            timestep: 0.005,
            seed: 0,
            model: None,
            out: None,
            stop_threshold: 0.15,
            task: TaskGains::default(),
            joint: JointGainSpec::default(),
            signal: SignalParams::default(),
            partner: PartnerModel::default(),
            choreography: ChoreographyConfig::default(),
        }
    }
}

impl TrialConfig {
    pub fn with_signals(signals: SignalSet) -> Self {
        TrialConfig {
            signals,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("trial file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: TrialConfig = toml::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.resolve_paths(path.parent());
        Ok(cfg)
    }

    pub(crate) fn resolve_paths(&mut self, dir: Option<&Path>) {
        if let (Some(dir), Some(model)) = (dir, self.model.as_mut()) {
            if model.is_relative() {
                *model = dir.join(&*model);
            }
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.signals.to_string())
    }

    pub fn tick_count(&self) -> usize {
        (self.duration / self.timestep).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("duration must be > 0"));
        }
        if !(self.timestep.is_finite() && self.timestep > 0.0 && self.timestep <= MAX_TIMESTEP) {
            return Err(Error::config(format!("timestep must be in (0, {MAX_TIMESTEP}]")));
        }
        if !(self.stop_threshold.is_finite() && self.stop_threshold > 0.0) {
            return Err(Error::config("stop_threshold must be > 0"));
        }
        self.task.validate()?;
        self.partner.validate()?;
        self.choreography.validate()?;
        Ok(())
    }

    pub fn load_model(&self) -> Result<KinematicModel> {
        match &self.model {
            Some(path) => KinematicModel::from_file(path),
            None => Ok(KinematicModel::default_humanoid()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    /// Signal labels, repeats allowed.
    pub trials: Vec<SignalSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Seed for the within-block trial order.
    pub seed: u64,
    pub defaults: TrialConfig,
    pub blocks: Vec<BlockSpec>,
}

fn labels(s: &[&str]) -> Vec<SignalSet> {
    s.iter().map(|l| l.parse().expect("valid label")).collect()
}

impl Default for ProtocolConfig {
    /// Three blocks: haptic/visual (8 trials, HW+HD twice), audio (2) and
    /// combined (3), 13 trials in total.
    fn default() -> Self {
        ProtocolConfig {
            seed: 0,
            defaults: TrialConfig::default(),
            blocks: vec![
                BlockSpec {
                    name: "haptic-visual".into(),
                    trials: labels(&["NS", "HW", "HD", "TR", "HW+HD", "HW+HD", "HW+TR", "HW+HD+TR"]),
                },
                BlockSpec {
                    name: "audio".into(),
                    trials: labels(&["SC", "SD"]),
                },
                BlockSpec {
                    name: "combined".into(),
                    trials: labels(&["SC+HW", "SC+HD", "SC+TR"]),
                },
            ],
        }
    }
}

impl ProtocolConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("protocol file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ProtocolConfig = toml::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.defaults.resolve_paths(path.parent());
        Ok(cfg)
    }

    /// Trial configurations of one block in declared order. Repeated labels
    /// get a `#k` suffix so their logs stay distinct.
    pub fn block_trials(&self, block: &BlockSpec) -> Vec<TrialConfig> {
        let mut out: Vec<TrialConfig> = Vec::with_capacity(block.trials.len());
        for signals in &block.trials {
            let base = signals.to_string();
            let seen = out.iter().filter(|c| c.signals == *signals).count();
            let name = if seen == 0 {
                base
            } else {
                format!("{base}#{}", seen + 1)
            };
            out.push(TrialConfig {
                name: Some(name),
                signals: signals.clone(),
                ..self.defaults.clone()
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = TrialConfig::with_signals("HW+HD".parse().unwrap());
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(TrialConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg =
            TrialConfig::from_toml_str("signals = \"TR\"\nduration = 6.0\n[partner]\nmode = \"absent\"\n").unwrap();
        assert_eq!(cfg.duration, 6.0);
        assert_eq!(cfg.task, TaskGains::default());
        assert_eq!(cfg.tick_count(), 1200);
        assert_eq!(cfg.label(), "TR");
    }

    #[test]
    fn rejects_coarse_timestep() {
        let cfg = TrialConfig {
            timestep: 0.05,
            ..TrialConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(TrialConfig::from_toml_str("signalz = \"NS\"").is_err());
        assert!(TrialConfig::from_toml_str("signals = \"HX\"").is_err());
    }

    #[test]
    fn default_protocol_has_thirteen_trials() {
        let p = ProtocolConfig::default();
        let sizes: Vec<usize> = p.blocks.iter().map(|b| b.trials.len()).collect();
        assert_eq!(sizes, vec![8, 2, 3]);
        let names: Vec<String> = p.block_trials(&p.blocks[0]).iter().map(|c| c.label()).collect();
        assert!(names.contains(&"HW+HD#2".to_string()));
    }
}
