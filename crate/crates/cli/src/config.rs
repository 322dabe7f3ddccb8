//! Resolved per-command configuration. Values come from the defaults, then an
//! optional JSON config file, then command-line flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use widthlab::equidist::SelectionRule;
use widthlab::yamabe::StepPolicy;
use widthlab::{Error, Result};

/// Seed used when neither the flags nor the config file set one.
pub const DEFAULT_SEED: u64 = 0;

pub fn load_file<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("bad config {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BergerScanConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub n: usize,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for BergerScanConfig {
    fn default() -> Self {
        Self {
            rho_min: 1e-3,
            rho_max: 1e4,
            n: 50,
            abs_tol: 1e-10,
            max_depth: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BergerCertifyConfig {
    pub steps: Vec<f64>,
    pub small_rho: f64,
    pub large_rho: f64,
    pub unbounded_factor: f64,
    /// Points of the log grid on `[1.99^-10, 1.99]` used for the scalar
    /// curvature bound; 100 points put `rho = 1` on the grid.
    pub grid_n: usize,
    pub mc_rhos: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for BergerCertifyConfig {
    fn default() -> Self {
        Self {
            steps: vec![1e-2, 1e-3],
            small_rho: 1e-3,
            large_rho: 1e4,
            unbounded_factor: 5.0,
            grid_n: 100,
            mc_rhos: vec![0.5, 1.0, 1.5],
            mc_samples: 1_000_000,
            seed: DEFAULT_SEED,
            abs_tol: 1e-10,
            max_depth: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalConfig {
    pub input: Option<PathBuf>,
    pub isoperimetric_tol: f64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            input: None,
            isoperimetric_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YamabeConfig {
    /// Profile file; without one the flow starts from `1 + amplitude cos(theta)`.
    pub input: Option<PathBuf>,
    pub n: usize,
    pub amplitude: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub convergence_tol: f64,
    pub policy: StepPolicy,
    pub theorem_tol: f64,
    /// Optional JSON summary written next to the CSV trace.
    pub summary: Option<PathBuf>,
}

impl Default for YamabeConfig {
    fn default() -> Self {
        Self {
            input: None,
            n: 401,
            amplitude: 0.3,
            t_end: 5.0,
            dt: widthlab::yamabe::DEFAULT_DT,
            sample_every: 1000,
            convergence_tol: widthlab::yamabe::CONVERGENCE_TOL,
            policy: StepPolicy::Subdivide,
            theorem_tol: widthlab::yamabe::THEOREM1_TOL,
            summary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquidistCheckConfig {
    pub input: Option<PathBuf>,
    pub tol: f64,
}

impl Default for EquidistCheckConfig {
    fn default() -> Self {
        Self {
            input: None,
            tol: widthlab::equidist::MEMBERSHIP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquidistSequenceConfig {
    pub input: Option<PathBuf>,
    pub k_max: usize,
    pub rule: SelectionRule,
    /// Greedy over the base set of a structured family.
    pub weighted: bool,
}

impl Default for EquidistSequenceConfig {
    fn default() -> Self {
        Self {
            input: None,
            k_max: widthlab::equidist::HARNESS_K_MAX,
            rule: SelectionRule::Euclidean,
            weighted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundcheckConfig {
    pub n: usize,
}

impl Default for RoundcheckConfig {
    fn default() -> Self {
        Self { n: 201 }
    }
}

pub fn require_input(input: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    input
        .clone()
        .ok_or_else(|| Error::InvalidInput(format!("{what} requires --input (or \"input\" in the config file)")))
}
