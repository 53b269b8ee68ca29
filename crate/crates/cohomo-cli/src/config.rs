//! One config struct per subcommand. Every struct rejects unknown keys so a
//! typo in a config file fails loudly instead of silently running defaults,
//! and every field has a default so flags alone are enough.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::errors::CliError;

/// Reads a config file, or returns defaults when no path was given.
/// Parse failures keep serde's diagnostics (line, column, offending field).
pub fn load<T>(path: Option<&Path>) -> Result<T, CliError>
where
    T: serde::de::DeserializeOwned + Default,
{
    let Some(p) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(p)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfConfig {
    /// Rotation number: `golden`, `sqrt:D`, `pi-3`, `P/Q`, a decimal
    /// string, or `quotients:a0,a1,...`.
    pub alpha: String,
    pub depth: usize,
    /// Working precision for irrational constants.
    pub bits: u64,
    /// Optional exponent for the fast-approximation level report, e.g. `11/2`.
    pub tau: Option<String>,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            alpha: "golden".into(),
            depth: 20,
            bits: 256,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalculusConfig {
    /// Order of the chain-rule polynomial to dump.
    pub print_pr: usize,
}

impl Default for CalculusConfig {
    fn default() -> Self {
        CalculusConfig { print_pr: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Family spec, e.g. `arnold:eps=0.5,rho=golden` or `rotation:a=0.38`.
    pub family: String,
    /// Displacement sample grid (power of two).
    pub grid: usize,
    /// Renormalization level to report.
    pub level: usize,
    pub depth: usize,
    pub bits: u64,
    pub tune_tol: f64,
    pub tune_budget: u64,
    /// Convergent-denominator budget for the geometry at `level`.
    pub q_budget: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            family: "arnold:eps=0.5,rho=golden".into(),
            grid: 1024,
            level: 4,
            depth: 30,
            bits: 256,
            tune_tol: 1e-9,
            tune_budget: 200_000,
            q_budget: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DkConfig {
    pub family: String,
    /// Observable spec: `cos`, `sin`, `cosk:K`, `sawtooth:K`, `modes:k:re:im;...`.
    pub phi: String,
    /// Explicit levels; when absent, every level with q_n <= level_budget.
    pub levels: Option<Vec<usize>>,
    pub grid: usize,
    pub level_budget: u64,
    pub mu_budget: u64,
    pub depth: usize,
    pub bits: u64,
    pub tune_tol: f64,
    pub tune_budget: u64,
    /// Declared slack must stay below this fraction of the variation bound.
    pub slack_ratio_bound: f64,
}

impl Default for DkConfig {
    fn default() -> Self {
        DkConfig {
            family: "rotation:rho=golden".into(),
            phi: "cos".into(),
            levels: None,
            grid: 4096,
            level_budget: 100_000,
            mu_budget: 10_000_000,
            depth: 40,
            bits: 256,
            tune_tol: 1e-9,
            tune_budget: 200_000,
            slack_ratio_bound: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HermanConfig {
    pub family: String,
    pub levels: Option<Vec<usize>>,
    pub grid: usize,
    /// Return-time budget: levels with q_n above this are skipped.
    pub budget: u64,
    pub depth: usize,
    pub bits: u64,
    pub tune_tol: f64,
    pub tune_budget: u64,
    /// Smallness target for the deepest level.
    pub threshold: f64,
    /// Only ask for the threshold once q_n is at least this.
    pub threshold_q: u64,
}

impl Default for HermanConfig {
    fn default() -> Self {
        HermanConfig {
            family: "arnold:eps=0.5,rho=golden".into(),
            levels: None,
            grid: 1024,
            budget: 20_000,
            depth: 40,
            bits: 256,
            tune_tol: 1e-9,
            tune_budget: 200_000,
            threshold: 0.01,
            threshold_q: 5_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepSumsConfig {
    pub family: String,
    pub phi: String,
    pub grid: usize,
    pub level_budget: u64,
    pub mu_budget: u64,
    pub depth: usize,
    pub bits: u64,
    pub tune_tol: f64,
    pub tune_budget: u64,
    /// The deepest level's deviation must be below this fraction of the
    /// reference level's.
    pub ratio_bound: f64,
}

impl Default for DeepSumsConfig {
    fn default() -> Self {
        DeepSumsConfig {
            family: "arnold:eps=0.5,rho=golden".into(),
            phi: "cos".into(),
            grid: 2048,
            level_budget: 100_000,
            mu_budget: 10_000_000,
            depth: 40,
            bits: 256,
            tune_tol: 1e-9,
            tune_budget: 200_000,
            ratio_bound: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveRotationConfig {
    pub alpha: String,
    pub psi: String,
    /// Highest Fourier mode solved.
    pub modes: usize,
    pub bits: u64,
    pub residual_tol: f64,
}

impl Default for SolveRotationConfig {
    fn default() -> Self {
        SolveRotationConfig {
            alpha: "golden".into(),
            psi: "cos".into(),
            modes: 256,
            bits: 256,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormConfig {
    pub family: String,
    pub phi: String,
    pub level: usize,
    /// Sample count for commutation and direct-orbit comparisons.
    pub samples: usize,
    /// Geometry grid (power of two).
    pub grid: usize,
    pub depth: usize,
    pub bits: u64,
    pub tune_tol: f64,
    pub tune_budget: u64,
    pub q_budget: u64,
    pub match_tol: f64,
    pub flat_samples: usize,
}

impl Default for RenormConfig {
    fn default() -> Self {
        RenormConfig {
            family: "arnold:eps=0.5,rho=golden".into(),
            phi: "cos".into(),
            level: 4,
            samples: 64,
            grid: 256,
            depth: 30,
            bits: 256,
            tune_tol: 1e-9,
            tune_budget: 200_000,
            q_budget: 100_000,
            match_tol: 1e-9,
            flat_samples: 129,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoboundaryConfig {
    pub family: String,
    pub phi: String,
    /// Smoothness class of the observable; at least 5.
    pub r: usize,
    /// Stop once the corrector's C^k norm is below this.
    pub epsilon: f64,
    /// Explicit levels to attempt; bypasses the qualifying-level scan.
    pub levels: Option<Vec<usize>>,
    /// Shallowest level the construction will touch.
    pub n_min: usize,
    pub budget_qn: u64,
    /// When false, visit every level in budget, not only arithmetically
    /// qualifying ones (diagnostic runs; the report records the waiver).
    pub require_qualifying: bool,
    /// Re-verify each constructed level with the full certificate.
    pub verify: bool,
    pub scan_points: usize,
    pub support_points: usize,
    pub mu_budget: u64,
    pub geometry_grid: usize,
    pub depth: usize,
    pub bits: u64,
    pub tune_tol: f64,
    pub tune_budget: u64,
}

impl Default for CoboundaryConfig {
    fn default() -> Self {
        CoboundaryConfig {
            family: "rotation:rho=golden".into(),
            phi: "cos".into(),
            r: 11,
            epsilon: 1e-3,
            levels: None,
            n_min: 3,
            budget_qn: 100_000,
            require_qualifying: true,
            verify: true,
            scan_points: 257,
            support_points: 1024,
            mu_budget: 10_000_000,
            geometry_grid: 256,
            depth: 40,
            bits: 256,
            tune_tol: 1e-9,
            tune_budget: 200_000,
        }
    }
}
