//! Scenario file schema.
//!
//! Files are TOML with all angles in degrees; the core library works in
//! radians. Deserialization errors carry the offending key path.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use etrack_core::extent::{CurvatureWeight, NuSolver, VRule};
use etrack_core::simharness::{
    EstimatorConfig, ImmModeConfig, InitMode, QRule, ScenarioConfig, Segment,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub time_step_s: f64,
    pub poisson_mean: f64,
    pub extent_diameters_m: [f64; 2],
    pub measurement_noise_std_m: [f64; 2],
    #[serde(default = "default_spread_scaling")]
    pub spread_scaling: f64,
    pub runs: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub init: InitFile,
    #[serde(default)]
    pub start_position_m: [f64; 2],
    #[serde(default)]
    pub start_heading_deg: f64,
    pub segments: Vec<SegmentFile>,
    pub estimators: Vec<EstimatorFile>,
}

fn default_spread_scaling() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitFile {
    #[default]
    FirstScan,
    Truth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub steps: usize,
    pub speed_mps: f64,
    pub turn_rate_dps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorFile {
    ConjugateImm {
        name: String,
        #[serde(default = "default_stay_probability")]
        stay_probability: f64,
        modes: Vec<ImmModeFile>,
    },
    WishartBaseline {
        name: String,
        accel_std: f64,
        turn_rate_std_dps: f64,
        transition_dof: f64,
        #[serde(default)]
        curvature: CurvatureWeight,
    },
    StateDependent {
        name: String,
        accel_std: f64,
        turn_rate_std_dps: f64,
        extent_noise: QRule,
        v_rule: VRuleFile,
        #[serde(default)]
        nu_solver: NuSolver,
        #[serde(default)]
        curvature: CurvatureWeight,
    },
}

fn default_stay_probability() -> f64 {
    0.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmModeFile {
    pub accel_psd: f64,
    pub extent_noise: QRule,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", untagged)]
pub enum VRuleFile {
    Named(NamedVRule),
    Fixed { fixed: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NamedVRule {
    VolumeCoupled,
    VolumePreserving,
}

impl ScenarioFile {
    /// Parses a scenario file, reporting schema violations with the key path.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let de = toml::de::Deserializer::parse(text).context("scenario file is not valid TOML")?;
        let file: ScenarioFile = serde_path_to_error::deserialize(de)
            .map_err(|e| anyhow::anyhow!("invalid scenario config at `{}`: {}", e.path(), e.inner()))?;
        Ok(file)
    }

    /// Converts to the core configuration (degrees -> radians).
    pub fn into_core(self) -> anyhow::Result<ScenarioConfig> {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                steps: s.steps,
                speed: s.speed_mps,
                turn_rate: s.turn_rate_dps.to_radians(),
            })
            .collect();
        let estimators = self
            .estimators
            .into_iter()
            .map(|e| e.into_core())
            .collect::<anyhow::Result<Vec<_>>>()?;
        let cfg = ScenarioConfig {
            name: self.name,
            time_step: self.time_step_s,
            segments,
            extent_diameters: self.extent_diameters_m,
            poisson_mean: self.poisson_mean,
            meas_noise_std: self.measurement_noise_std_m,
            spread_scaling: self.spread_scaling,
            n_runs: self.runs,
            master_seed: self.master_seed,
            init: match self.init {
                InitFile::FirstScan => InitMode::FirstScan,
                InitFile::Truth => InitMode::Truth,
            },
            start_position: self.start_position_m,
            start_heading: self.start_heading_deg.to_radians(),
            estimators,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}


impl EstimatorFile {
    fn into_core(self) -> anyhow::Result<EstimatorConfig> {
        Ok(match self {
            EstimatorFile::ConjugateImm { name, stay_probability, modes } => {
                EstimatorConfig::ConjugateImm {
                    name,
                    stay_probability,
                    modes: modes
                        .into_iter()
                        .map(|m| ImmModeConfig { accel_psd: m.accel_psd, extent_noise: m.extent_noise })
                        .collect(),
                }
            }
            EstimatorFile::WishartBaseline { name, accel_std, turn_rate_std_dps, transition_dof, curvature } => {
                EstimatorConfig::WishartBaseline {
                    name,
                    accel_std,
                    turn_rate_std: turn_rate_std_dps.to_radians(),
                    transition_dof,
                    curvature,
                }
            }
            EstimatorFile::StateDependent {
                name,
                accel_std,
                turn_rate_std_dps,
                extent_noise,
                v_rule,
                nu_solver,
                curvature,
            } => {
                let v_rule = match v_rule {
                    VRuleFile::Named(NamedVRule::VolumeCoupled) => VRule::VolumeCoupled,
                    VRuleFile::Named(NamedVRule::VolumePreserving) => VRule::VolumePreserving,
                    VRuleFile::Fixed { fixed } => {
                        if !(fixed > 6.0) {
                            bail!("estimators.v_rule.fixed: must exceed 2d + 2 = 6, got {fixed}");
                        }
                        VRule::Fixed(fixed)
                    }
                };
                EstimatorConfig::StateDependent {
                    name,
                    accel_std,
                    turn_rate_std: turn_rate_std_dps.to_radians(),
                    extent_noise,
                    v_rule,
                    nu_solver,
                    curvature,
                }
            }
        })
    }
}
