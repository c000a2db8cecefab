//! Built-in potentials and the benchmark configurations that use them.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{CoefficientRule, ModeVector, TrigPoly};
use crate::genericity::sample_product_measure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// f_k = e^{-s|k|₁} on generators.
    Lacunary,
    /// cos x₁ + ½ cos(x₁ + x₂ + 0.7).
    TwoMode,
    /// Sample of the product measure on the unit-disk coefficients.
    Random { seed: u64 },
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        match t {
            "lacunary" => return Ok(Preset::Lacunary),
            "two-mode" => return Ok(Preset::TwoMode),
            _ => {}
        }
        let seed = t
            .strip_prefix("random(")
            .and_then(|rest| rest.strip_suffix(')'))
            .or_else(|| t.strip_prefix("random:"));
        match seed {
            Some(s) => s
                .trim()
                .parse()
                .map(|seed| Preset::Random { seed })
                .map_err(|_| Error::InvalidInput(format!("bad random seed in preset {t:?}"))),
            None => Err(Error::InvalidInput(format!(
                "unknown preset {t:?} (expected lacunary, two-mode or random(SEED))"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Lacunary => write!(f, "lacunary"),
            Preset::TwoMode => write!(f, "two-mode"),
            Preset::Random { seed } => write!(f, "random({seed})"),
        }
    }
}

impl Preset {
    /// Materializes the potential on modes with |k|₁ ≤ cutoff.
    pub fn potential(&self, n: usize, s: f64, cutoff: u32) -> Result<TrigPoly> {
        match self {
            Preset::Lacunary => Ok(TrigPoly::from_rule(
                n,
                CoefficientRule::ExpLacunary { s, amplitude: 1.0 },
                cutoff,
            )),
            Preset::TwoMode => {
                if n != 2 {
                    return Err(Error::InvalidInput("the two-mode preset lives in n = 2".into()));
                }
                two_mode_potential()
            }
            Preset::Random { seed } => Ok(sample_product_measure(n, s, cutoff, *seed)),
        }
    }
}

pub fn two_mode_potential() -> Result<TrigPoly> {
    TrigPoly::from_modes(
        2,
        [
            (ModeVector(vec![1, 0]), Complex64::new(0.5, 0.0)),
            (ModeVector(vec![1, 1]), Complex64::from_polar(0.25, 0.7)),
        ],
    )
}

/// Resonant benchmark around the two-mode potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeBenchmark {
    pub k: Vec<i64>,
    pub base_point: Vec<f64>,
    pub s: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub k0: u32,
    pub k_cut: u32,
    pub order: usize,
    pub degree: u32,
    pub delta: f64,
    pub beta: f64,
}

impl Default for TwoModeBenchmark {
    fn default() -> Self {
        TwoModeBenchmark {
            k: vec![1, 0],
            base_point: vec![0.0, 0.6],
            s: 1.0,
            epsilon: 1e-7,
            alpha: 0.01,
            k0: 2,
            k_cut: 12,
            order: 3,
            degree: 2,
            delta: 1.0,
            beta: 1.0,
        }
    }
}
