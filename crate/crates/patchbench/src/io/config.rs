//! Declarative run configuration: a TOML file with
//! `PATCHBENCH_*`-prefixed environment overrides.

use super::IoError;
use crate::calibration::CalibratorTrainConfig;
use crate::patchgen::PatchTrainConfig;
use crate::sweeps::SweepSpec;
use crate::transforms::TransformParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const ENV_PREFIX: &str = "PATCHBENCH_";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Detector weight file.
    pub weights: Option<PathBuf>,
    /// Scene fixture directory.
    pub scene: Option<PathBuf>,
    /// Patch PNG (with sidecar alongside).
    pub patch: Option<PathBuf>,
    /// Output directory.
    pub out: PathBuf,
}

/// Placement and scene-transform parameters for `apply`/`eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ApplyParams {
    #[serde(flatten)]
    pub params: TransformParams,
    pub brightness_clip: bool,
}

impl Default for ApplyParams {
    fn default() -> Self {
        Self { params: TransformParams::identity(), brightness_clip: false }
    }
}

/// Calibration run settings: either a directory of target captures or a
/// synthetic-target count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateConfig {
    /// Baseline scene image; defaults to the fixture scene.
    pub baseline: Option<PathBuf>,
    /// Directory of target PNG captures.
    pub targets_dir: Option<PathBuf>,
    /// Number of synthetic targets to generate instead.
    pub synthetic_count: Option<usize>,
    #[serde(flatten)]
    pub train: CalibratorTrainConfig,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { baseline: None, targets_dir: None, synthetic_count: None, train: CalibratorTrainConfig::default() }
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub detector_id: String,
    pub seed: u64,
    pub paths: PathsConfig,
    pub sweep: Option<SweepSpec>,
    pub train: Option<PatchTrainConfig>,
    pub apply: Option<ApplyParams>,
    pub calibrate: Option<CalibrateConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detector_id: "tinydet-desk-v1".into(),
            seed: 0,
            paths: PathsConfig { out: PathBuf::from("out"), ..PathsConfig::default() },
            sweep: None,
            train: None,
            apply: None,
            calibrate: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let raw = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&raw).map_err(|e| IoError::parse(path, e))?;
        cfg.apply_env_overrides(std::env::vars());
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `PATCHBENCH_*` overrides: SEED, OUT, WEIGHTS, SCENE, PATCH,
    /// DETECTOR_ID.
    pub fn apply_env_overrides(&mut self, vars: impl Iterator<Item = (String, String)>) {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            match name {
                "SEED" => {
                    if let Ok(seed) = value.parse() {
                        self.seed = seed;
                    }
                }
                "OUT" => self.paths.out = PathBuf::from(value),
                "WEIGHTS" => self.paths.weights = Some(PathBuf::from(value)),
                "SCENE" => self.paths.scene = Some(PathBuf::from(value)),
                "PATCH" => self.paths.patch = Some(PathBuf::from(value)),
                "DETECTOR_ID" => self.detector_id = value,
                _ => {}
            }
        }
    }

    /// Ensures the named paths are set and exist.
    pub fn require_paths(&self, needs: &[RequiredPath]) -> Result<(), IoError> {
        for need in needs {
            let (field, path) = match need {
                RequiredPath::Weights => ("paths.weights", self.paths.weights.as_deref()),
                RequiredPath::Scene => ("paths.scene", self.paths.scene.as_deref()),
                RequiredPath::Patch => ("paths.patch", self.paths.patch.as_deref()),
            };
            match path {
                None => return Err(IoError::InvalidConfig(format!("{field} is required"))),
                Some(p) if !p.exists() => {
                    return Err(IoError::InvalidConfig(format!(
                        "{field} = {} does not exist",
                        p.display()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum RequiredPath {
    Weights,
    Scene,
    Patch,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        cfg.paths.weights = Some(PathBuf::from("w.bin"));
        cfg.train = Some(PatchTrainConfig::default());
        cfg.sweep = Some(SweepSpec {
            spec_id: "scale".into(),
            scene_ref: "fixture".into(),
            patch_ref: "patch".into(),
            dimension: crate::sweeps::SweepDimension::Scale,
            values: vec![
                crate::sweeps::SweepValue::Scalar(0.1),
                crate::sweeps::SweepValue::Scalar(0.2),
            ],
            fixed: TransformParams::identity(),
            repeats: 2,
            seed: 1,
            brightness_clip: false,
        });
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.paths.weights, cfg.paths.weights);
        let sweep = back.sweep.unwrap();
        assert_eq!(sweep.values.len(), 2);
        assert_eq!(sweep.repeats, 2);
        assert_eq!(back.train.unwrap().iterations, cfg.train.unwrap().iterations);
    }

    #[test]
    fn env_overrides_apply() {
        let mut cfg = RunConfig::default();
        let vars = vec![
            ("PATCHBENCH_SEED".to_string(), "99".to_string()),
            ("PATCHBENCH_OUT".to_string(), "/tmp/x".to_string()),
            ("PATCHBENCH_DETECTOR_ID".to_string(), "other".to_string()),
            ("UNRELATED".to_string(), "zzz".to_string()),
        ];
        cfg.apply_env_overrides(vars.into_iter());
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.paths.out, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.detector_id, "other");
    }

    #[test]
    fn missing_required_path_is_invalid() {
        let cfg = RunConfig::default();
        assert!(matches!(
            cfg.require_paths(&[RequiredPath::Weights]),
            Err(IoError::InvalidConfig(_))
        ));
    }
}
