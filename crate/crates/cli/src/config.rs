//! Serializable run configuration.

use std::path::PathBuf;

use resoforge::cover::{derive_params, free_params, CoveringParams};
use resoforge::fourier::{PotentialFile, TrigPoly};
use resoforge::presets::Preset;
use resoforge::{Error, Result};
use serde::{Deserialize, Serialize};

/// A complete, replayable run: command, inputs, seed and output paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSource>,
    #[serde(default)]
    pub params: ParamBlock,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSource {
    File(PathBuf),
    Preset(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamMode {
    #[default]
    Free,
    /// α is derived from ε and K.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamBlock {
    pub mode: ParamMode,
    pub n: usize,
    pub s: f64,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub k0: u32,
    pub k_cut: u32,
    pub delta: f64,
    pub beta: f64,
}

impl Default for ParamBlock {
    fn default() -> Self {
        ParamBlock {
            mode: ParamMode::Free,
            n: 2,
            s: 1.0,
            epsilon: None,
            alpha: None,
            k0: 2,
            k_cut: 12,
            delta: 1.0,
            beta: 0.1,
        }
    }
}

impl ParamBlock {
    pub fn covering(&self) -> Result<CoveringParams> {
        match self.mode {
            ParamMode::Free => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::InvalidInput("free parameter mode needs alpha".into()))?;
                free_params(self.n, self.s, alpha, self.k0, self.k_cut)
            }
            ParamMode::Derived => {
                let eps = self.epsilon()?;
                derive_params(self.n, self.s, eps, self.k0, self.k_cut)
            }
        }
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.epsilon
            .ok_or_else(|| Error::InvalidInput("this command needs epsilon".into()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// JSON report; stdout when absent.
    pub report: Option<PathBuf>,
    /// Bulk samples or rasters.
    pub csv: Option<PathBuf>,
    /// Sampled potential written by `sample`.
    pub potential: Option<PathBuf>,
}

/// Thresholds for the hard numerical checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub energy_identity: f64,
    pub decoupling: f64,
    pub symplectic: f64,
    pub fixed_point_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            energy_identity: 1e-10,
            decoupling: 1e-12,
            symplectic: 1e-9,
            fixed_point_residual: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalFormKind {
    #[default]
    Nonresonant,
    Resonant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    /// Draws a potential from the product measure; optionally estimates the generic fraction.
    Sample {
        k_max: u32,
        #[serde(default)]
        trials: u64,
    },
    CheckGeneric {
        k_max: u32,
    },
    CoverClassify {
        points: Vec<Vec<f64>>,
    },
    CoverMeasure {
        samples: usize,
    },
    CoverRaster {
        resolution: usize,
    },
    Bezout {
        k: Vec<i64>,
    },
    Normalize {
        kind: NormalFormKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<Vec<i64>>,
        base_point: Vec<f64>,
        order: usize,
        degree: u32,
        #[serde(default)]
        verify_points: usize,
    },
    Standardize {
        k: Vec<i64>,
        base_point: Vec<f64>,
        order: usize,
        degree: u32,
        samples: usize,
        grid: usize,
    },
    Report {
        #[serde(default)]
        quick: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        only: Option<Vec<u32>>,
    },
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Potential named by the config, materialized up to `cutoff`.
    pub fn potential(&self, cutoff: u32) -> Result<TrigPoly> {
        match &self.potential {
            None => Err(Error::InvalidInput("this command needs --potential or --preset".into())),
            Some(PotentialSource::File(path)) => {
                let file = PotentialFile::load(path)?;
                if file.n != self.params.n {
                    return Err(Error::InvalidInput(format!(
                        "potential file has n = {}, parameters say n = {}",
                        file.n, self.params.n
                    )));
                }
                file.to_trig_poly()
            }
            Some(PotentialSource::Preset(name)) => {
                name.parse::<Preset>()?.potential(self.params.n, self.params.s, cutoff)
            }
        }
    }
}
