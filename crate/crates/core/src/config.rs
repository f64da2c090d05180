//! Sweep configuration, read from flat TOML files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel_model::{build_exponential_corr_sqrt, CorrelationSpec, SystemDims, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::matrix_io;
use crate::protocol::min_durations;
use crate::units;

/// How pilots beyond the minimum are split between the two phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    ExtraToPhase1,
    ExtraToPhase2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Benchmark,
    BenchmarkBoosted,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Benchmark => "benchmark",
            Scheme::BenchmarkBoosted => "benchmark_boosted",
        }
    }

    pub(crate) fn id(self) -> u64 {
        match self {
            Scheme::Proposed => 1,
            Scheme::Benchmark => 2,
            Scheme::BenchmarkBoosted => 3,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Splits `total` pilots into `(tau1, tau2)`.
pub fn allocate_pilots(total: usize, dims: SystemDims, allocation: Allocation) -> Result<(usize, usize)> {
    let mins = min_durations(dims);
    if total < mins.tau_min {
        return Err(Error::InsufficientBudget {
            total,
            minimum: mins.tau_min,
        });
    }
    Ok(match allocation {
        Allocation::ExtraToPhase1 => (total - mins.tau2, mins.tau2),
        Allocation::ExtraToPhase2 => (mins.tau1, total - mins.tau1),
    })
}

fn default_gain() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_power() -> f64 {
    23.0
}
fn default_bandwidth() -> f64 {
    1e6
}
fn default_psd() -> f64 {
    -169.0
}
fn default_allocation() -> Allocation {
    Allocation::ExtraToPhase1
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Proposed, Scheme::Benchmark, Scheme::BenchmarkBoosted]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// IRS-BS power gain (linear).
    #[serde(default = "default_gain")]
    pub irs_bs_gain: f64,
    /// User-IRS power gain (linear), shared by all users.
    #[serde(default = "default_gain")]
    pub user_irs_gain: f64,
    #[serde(default = "default_rho")]
    pub rho_irs: f64,
    #[serde(default = "default_rho")]
    pub rho_user: f64,
    /// Replaces the exponential IRS-BS correlation root; resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irs_corr_sqrt_file: Option<PathBuf>,
    /// Replaces the exponential user-IRS correlation root for every user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_corr_sqrt_file: Option<PathBuf>,
    #[serde(default = "default_power")]
    pub power_dbm: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_psd")]
    pub noise_psd_dbm_hz: f64,
    pub pilot_lengths: Vec<usize>,
    #[serde(default = "default_allocation")]
    pub allocation: Allocation,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// When false the `wall_time_s` column is written as 0 so that reruns are byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    /// Parses TOML text. Relative matrix paths are kept as written.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves matrix paths against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.irs_corr_sqrt_file, &mut cfg.user_corr_sqrt_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// 16 antennas, 16 elements, 4 users; every length from the minimum (19) to 30 above it.
    pub fn desk_scale() -> Self {
        let dims = SystemDims::new(16, 16, 4).expect("valid dimensions");
        let t = min_durations(dims).tau_min;
        Self {
            m: 16,
            n: 16,
            k: 4,
            irs_bs_gain: 1e-3,
            user_irs_gain: 1e-3,
            rho_irs: DEFAULT_RHO,
            rho_user: DEFAULT_RHO,
            irs_corr_sqrt_file: None,
            user_corr_sqrt_file: None,
            power_dbm: default_power(),
            bandwidth_hz: default_bandwidth(),
            noise_psd_dbm_hz: default_psd(),
            pilot_lengths: (t..=t + 30).collect(),
            allocation: Allocation::ExtraToPhase1,
            schemes: default_schemes(),
            trials: 200,
            master_seed: 2024,
            record_wall_time: false,
        }
    }

    /// 32 antennas, 32 elements, 8 users; lengths 40 to 100 in steps of 10.
    pub fn full_scale() -> Self {
        Self {
            m: 32,
            n: 32,
            k: 8,
            pilot_lengths: (40..=100).step_by(10).collect(),
            trials: 1000,
            ..Self::desk_scale()
        }
    }

    pub fn dims(&self) -> Result<SystemDims> {
        SystemDims::new(self.m, self.n, self.k)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims().map_err(|e| Error::Config(e.to_string()))?;
        if self.pilot_lengths.is_empty() {
            return Err(Error::Config("pilot_lengths is empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        for (name, v) in [
            ("irs_bs_gain", self.irs_bs_gain),
            ("user_irs_gain", self.user_irs_gain),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::Config("power levels must be finite".into()));
        }
        let minimum = min_durations(dims).tau_min;
        if let Some(&total) = self.pilot_lengths.iter().find(|&&t| t < minimum) {
            return Err(Error::InsufficientBudget { total, minimum });
        }
        Ok(())
    }

    pub fn pilot_power(&self) -> f64 {
        units::dbm_to_watts(self.power_dbm)
    }

    pub fn noise_power(&self) -> f64 {
        units::noise_power_watts(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }

    /// Gains and correlation roots, loading the optional matrix files.
    pub fn correlation_spec(&self) -> Result<CorrelationSpec> {
        let dims = self.dims()?;
        let irs = match &self.irs_corr_sqrt_file {
            Some(p) => matrix_io::read_matrix(p)?,
            None => build_exponential_corr_sqrt(dims.n, self.rho_irs)?,
        };
        let user = match &self.user_corr_sqrt_file {
            Some(p) => matrix_io::read_matrix(p)?,
            None => build_exponential_corr_sqrt(dims.n, self.rho_user)?,
        };
        let spec = CorrelationSpec {
            irs_bs_gain: self.irs_bs_gain,
            user_irs_gains: vec![self.user_irs_gain; dims.k],
            irs_tx_corr_sqrt: irs,
            user_irs_corr_sqrts: vec![user; dims.k],
        };
        spec.validate(dims)?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "m = 4\nn = 4\nk = 2\npilot_lengths = [5, 6]\ntrials = 3\n";

    #[test]
    fn allocation_examples() {
        let d = SystemDims::new(32, 32, 8).unwrap();
        assert_eq!(allocate_pilots(40, d, Allocation::ExtraToPhase1).unwrap(), (33, 7));
        assert_eq!(allocate_pilots(40, d, Allocation::ExtraToPhase2).unwrap(), (32, 8));
        assert_eq!(allocate_pilots(39, d, Allocation::ExtraToPhase1).unwrap(), (32, 7));
        assert!(matches!(
            allocate_pilots(38, d, Allocation::ExtraToPhase1),
            Err(Error::InsufficientBudget { total: 38, minimum: 39 })
        ));
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.power_dbm, 23.0);
        assert_eq!(cfg.allocation, Allocation::ExtraToPhase1);
        assert_eq!(cfg.schemes.len(), 3);
        assert!(!cfg.record_wall_time);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL}bogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn short_length_rejected() {
        let text = MINIMAL.replace("[5, 6]", "[4, 6]");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(Error::InsufficientBudget { total: 4, minimum: 5 })
        ));
    }

    #[test]
    fn enums_parse() {
        let text = format!("{MINIMAL}allocation = \"extra_to_phase2\"\nschemes = [\"benchmark_boosted\"]\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.allocation, Allocation::ExtraToPhase2);
        assert_eq!(cfg.schemes, vec![Scheme::BenchmarkBoosted]);
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::desk_scale();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.pilot_lengths.first(), Some(&19));
        assert_eq!(cfg.pilot_lengths.len(), 31);
    }

    #[test]
    fn correlation_file_loaded() {
        let dir = tempfile::tempdir().unwrap();
        let root = build_exponential_corr_sqrt(4, 0.3).unwrap();
        matrix_io::write_matrix(dir.path().join("irs.txt"), &root).unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(&cfg_path, format!("{MINIMAL}irs_corr_sqrt_file = \"irs.txt\"\n")).unwrap();
        let cfg = ExperimentConfig::from_file(&cfg_path).unwrap();
        let spec = cfg.correlation_spec().unwrap();
        assert!((&spec.irs_tx_corr_sqrt - &root).norm() < 1e-12);
    }
}
