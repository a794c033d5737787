//! Experiment configuration.
//!
//! A TOML file with the sections below. Unknown sections and keys are
//! rejected, and all missing required keys (`problem.d`, `problem.mu`,
//! `run.seed`) are reported together.
//!
//! ```toml
//! [problem]
//! d = 2
//! mu = [1.0, 1.0]
//!
//! [schedule]
//! T = 1.0
//! epsilon = 0.0
//! gamma = 0.01
//!
//! [sgld]
//! lambda = 0.05
//! beta = 1e4
//! n_iters = 500
//! n_replicas = 200
//!
//! [run]
//! seed = 42
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Horizon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    pub d: usize,
    /// Data dimension of the general bound; must equal `d` for the Gaussian example.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub mu: Vec<f64>,
    /// Optimizer start; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSection {
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldSection {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_n_iters")]
    pub n_iters: u64,
    #[serde(default = "default_replicas")]
    pub n_replicas: usize,
    /// Iterations written to the trajectory; about 100 evenly spaced when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    /// Score parameter for `sample`; one optimizer run supplies it when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySection {
    /// Monte Carlo samples of the denoising identity.
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_b1_trials")]
    pub b1_trials: usize,
    #[serde(default = "default_b1_dims")]
    pub b1_dims: Vec<usize>,
    #[serde(default = "default_unit_paths")]
    pub paths_per_replica: usize,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_powers")]
    pub powers: Vec<f64>,
    #[serde(default = "default_c_trials")]
    pub c_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub seed: u64,
}

/// Constants of the general bound. Absent entries are filled from the
/// Gaussian example with the affine family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralSection {
    #[serde(default = "half")]
    pub zeta: f64,
    #[serde(default = "half")]
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_mo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k4: Option<f64>,
    /// `|s(0, 0, 0)|`, added to `K1 + K2 + K3` to form `K_total`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s000: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_theta4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_al: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sn: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eSection {
    /// Largest inverse temperature actually used.
    #[serde(default = "default_beta_cap")]
    pub beta_cap: f64,
    #[serde(default = "default_e2e_replicas")]
    pub n_replicas: usize,
    #[serde(default = "default_e2e_paths")]
    pub n_paths: usize,
    /// Added to the budgeted horizon.
    #[serde(default)]
    pub t_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub problem: ProblemSection,
    pub schedule: ScheduleSection,
    pub sgld: SgldSection,
    pub sampler: SamplerSection,
    pub verify: VerifySection,
    pub run: RunSection,
    pub general: GeneralSection,
    pub e2e: E2eSection,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    0.05
}
fn default_beta() -> f64 {
    1e4
}
fn default_n_iters() -> u64 {
    500
}
fn default_replicas() -> usize {
    200
}
fn default_paths() -> usize {
    10_000
}
fn default_horizon() -> Horizon {
    Horizon::Full
}
fn default_mc() -> usize {
    1_000_000
}
fn default_b1_trials() -> usize {
    100_000
}
fn default_b1_dims() -> Vec<usize> {
    vec![1, 3, 10]
}
fn default_unit_paths() -> usize {
    64
}
fn default_gammas() -> Vec<f64> {
    vec![0.5, 0.1, 0.02]
}
fn default_powers() -> Vec<f64> {
    vec![2.0, 4.0]
}
fn default_c_trials() -> usize {
    1000
}
fn default_beta_cap() -> f64 {
    1e6
}
fn default_e2e_replicas() -> usize {
    4
}
fn default_e2e_paths() -> usize {
    20_000
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem", &["d", "M", "mu", "theta0"]),
    ("schedule", &["T", "epsilon", "gamma"]),
    ("sgld", &["lambda", "beta", "n_iters", "n_replicas", "checkpoints"]),
    ("sampler", &["n_paths", "theta_hat", "horizon"]),
    ("verify", &["mc_samples", "b1_trials", "b1_dims", "paths_per_replica", "gammas", "powers", "c_trials"]),
    ("run", &["seed"]),
    ("general", &["zeta", "nu", "alpha", "l_mo", "k1", "k2", "k3", "k4", "s000", "e_theta4", "eps_al", "eps_sn"]),
    ("e2e", &["beta_cap", "n_replicas", "n_paths", "t_margin"]),
];

const REQUIRED: &[(&str, &str)] = &[("problem", "d"), ("problem", "mu"), ("run", "seed")];

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let mut problems = Vec::new();
        for (section, value) in &table {
            match SECTIONS.iter().find(|(name, _)| name == section) {
                None => problems.push(format!("unknown section [{section}]")),
                Some((_, keys)) => match value.as_table() {
                    None => problems.push(format!("[{section}] must be a table")),
                    Some(t) => {
                        for k in t.keys() {
                            if !keys.contains(&k.as_str()) {
                                problems.push(format!("unknown key {section}.{k}"));
                            }
                        }
                    }
                },
            }
        }
        for (section, key) in REQUIRED {
            let present = table.get(*section).and_then(|s| s.as_table()).is_some_and(|t| t.contains_key(*key));
            if !present {
                problems.push(format!("missing required key {section}.{key}"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        for (name, _) in SECTIONS {
            table.entry(name.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let mut problems = Vec::new();
        if p.d == 0 {
            problems.push("problem.d must be positive".to_string());
        }
        if p.mu.len() != p.d {
            problems.push(format!("problem.mu has {} entries but d = {}", p.mu.len(), p.d));
        }
        if let Some(m) = p.m {
            if m != p.d {
                problems.push(format!("problem.M = {m} must equal d = {} for the Gaussian example", p.d));
            }
        }
        for (name, v) in [("problem.theta0", &p.theta0), ("sampler.theta_hat", &self.sampler.theta_hat)] {
            if let Some(v) = v {
                if v.len() != p.d {
                    problems.push(format!("{name} has {} entries but d = {}", v.len(), p.d));
                }
            }
        }
        if p.mu.iter().any(|v| !v.is_finite()) {
            problems.push("problem.mu must be finite".to_string());
        }
        if self.sgld.n_replicas == 0 || self.sampler.n_paths == 0 || self.e2e.n_replicas == 0 || self.e2e.n_paths == 0 {
            problems.push("replica and path counts must be positive".to_string());
        }
        if !(self.e2e.beta_cap > 0.0) {
            problems.push("e2e.beta_cap must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn d(&self) -> usize {
        self.problem.d
    }

    pub fn theta0(&self) -> Vec<f64> {
        self.problem.theta0.clone().unwrap_or_else(|| vec![0.0; self.problem.d])
    }

    pub fn seed(&self) -> u64 {
        self.run.seed
    }

    /// Checkpoints for the trajectory: the configured list, or about 100
    /// evenly spaced iterations ending at `n_iters`.
    pub fn checkpoints(&self) -> Vec<u64> {
        match &self.sgld.checkpoints {
            Some(c) => c.clone(),
            None => {
                let n = self.sgld.n_iters;
                let every = n.div_ceil(100).max(1);
                let mut c: Vec<u64> = (0..=n).step_by(every as usize).collect();
                if c.last() != Some(&n) {
                    c.push(n);
                }
                c
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = "[problem]\nd = 2\nmu = [1.0, 1.0]\n[run]\nseed = 7\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = Config::from_toml_str(MIN).unwrap();
        assert_eq!(c.d(), 2);
        assert_eq!(c.schedule.horizon, 1.0);
        assert_eq!(c.sgld.beta, 1e4);
        assert_eq!(c.theta0(), vec![0.0, 0.0]);
        assert_eq!(c.general.zeta, 0.5);
        assert_eq!(c.e2e.beta_cap, 1e6);
        assert_eq!(c.sampler.horizon, Horizon::Full);
    }

    #[test]
    fn all_unknown_keys_are_listed() {
        let text = format!("{MIN}[schedule]\nTT = 1\ngama = 0.1\n[extra]\nx = 1\n");
        let e = Config::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("schedule.TT") && e.contains("schedule.gama") && e.contains("[extra]"), "{e}");
    }

    #[test]
    fn all_missing_required_keys_are_listed() {
        let e = Config::from_toml_str("[problem]\nd = 1\n").unwrap_err().to_string();
        assert!(e.contains("problem.mu") && e.contains("run.seed"), "{e}");
        assert!(!e.contains("problem.d"));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let e = Config::from_toml_str("[problem]\nd = 3\nmu = [1.0]\n[run]\nseed = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = Config::from_toml_str(&format!("{MIN}[general]\nk4 = 0.001\n[sampler]\nhorizon = \"early_stopped\"\n")).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
        assert_eq!(c.general.k4, Some(0.001));
    }

    #[test]
    fn default_checkpoints_end_at_n() {
        let mut c = Config::from_toml_str(MIN).unwrap();
        c.sgld.n_iters = 1234;
        let cp = c.checkpoints();
        assert_eq!(cp[0], 0);
        assert_eq!(*cp.last().unwrap(), 1234);
        assert!(cp.len() <= 102);
    }
}
