//! Run configuration: one TOML document with `model`, `solver`, `oracle`,
//! `cert`, `scan` and `output` sections plus a seed.

use std::path::{Path, PathBuf};

use qpwave_core::{ModelParams, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::emit;
use crate::CliError;

pub const CONFIG_FORMAT: &str = "qpwave-config";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized test vectors; the commands themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub cert: CertConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Box half-width; defaults to the solver's `max_box`.
    pub box_size: Option<u64>,
    /// Largest acceptable sup-norm discrepancy against the staged solve.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { box_size: None, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertConfig {
    /// Scale of the Diophantine and separation checks.
    pub l: u64,
    pub c_star: f64,
    pub eta: f64,
    /// Scale of the admissible-mass and cluster checks.
    pub admissible_l: u64,
    /// Points of the midpoint grid on `[2, 3]`.
    pub m_points: usize,
    pub sigma_points: usize,
    pub tilde_c: f64,
    /// Harmonics `k` with `|k| <= k_max` enter the transversality checks.
    pub k_max: i64,
}

impl Default for CertConfig {
    fn default() -> Self {
        Self {
            l: 10,
            c_star: 1e-2,
            eta: 1e-3,
            admissible_l: 5,
            m_points: 1001,
            sigma_points: 10_000,
            tilde_c: 1.0,
            k_max: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKernel {
    /// Linearization at the initial field.
    Initial,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub scales: Vec<u64>,
    /// Shift window; defaults to `[-omega_1 / 2, omega_1 / 2]`.
    pub sigma_lo: Option<f64>,
    pub sigma_hi: Option<f64>,
    pub sigma_points: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Exponent of the phase-scan comparison `e^{-N^rho4}`.
    pub rho4: f64,
    /// Defaults to `gamma - M^{-0.2}`.
    pub gamma_prime: Option<f64>,
    pub max_regions: usize,
    pub kernel: ScanKernel,
    /// Phase scan of the quasi-periodic operator; 0 disables it.
    pub theta_points: usize,
    pub theta_scale: u64,
    pub theta_radius: i64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            scales: vec![8],
            sigma_lo: None,
            sigma_hi: None,
            sigma_points: 2000,
            rho1: 0.1,
            rho2: 0.7,
            rho3: 0.9,
            rho4: 0.05,
            gamma_prime: None,
            max_regions: 64,
            kernel: ScanKernel::Initial,
            theta_points: 0,
            theta_scale: 12,
            theta_radius: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub certificates: String,
    pub solution: String,
    pub trace: String,
    pub lde_report: String,
    pub lde_data: String,
    pub oracle: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("qpwave-out"),
            certificates: "certificates.toml".into(),
            solution: "solution.toml".into(),
            trace: "trace.toml".into(),
            lde_report: "lde_scan.toml".into(),
            lde_data: "lde_scan.dat".into(),
            oracle: "oracle_compare.toml".into(),
        }
    }
}

impl OutputConfig {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Trivial,
    SmallCoupling,
    ScanDemo,
}

impl Preset {
    pub fn config(self) -> RunConfig {
        let mut cfg = RunConfig {
            seed: 0,
            model: ModelParams {
                alpha: vec![(5f64.sqrt() - 1.0) / 2.0],
                theta0: 0.1234,
                m: 2.5,
                eps: 1e-3,
                delta: 1e-3,
                p: 2,
                anchors: vec![vec![0]],
                amplitudes: vec![1.0],
                gamma: 1.0,
                k_exponent: 1.0,
            },
            solver: SolverConfig { scale: 3, r_max: 6, max_box: 8, ..SolverConfig::default() },
            oracle: OracleConfig::default(),
            cert: CertConfig::default(),
            scan: ScanConfig::default(),
            output: OutputConfig::default(),
        };
        match self {
            Preset::Trivial => {
                cfg.model.eps = 0.0;
                cfg.model.delta = 0.0;
            }
            Preset::SmallCoupling => {}
            Preset::ScanDemo => {
                cfg.scan.scales = vec![6, 12];
                cfg.scan.sigma_points = 1000;
                cfg.scan.theta_points = 200;
            }
        }
        cfg
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        // The header written by `to_toml` is optional on input.
        if let Some(f) = table.remove("format") {
            if f.as_str() != Some(CONFIG_FORMAT) {
                return Err(CliError::Config(format!("not a configuration file (format {f})")));
            }
        }
        if let Some(v) = table.remove("format_version") {
            if v.as_integer() != Some(emit::FORMAT_VERSION) {
                return Err(CliError::Config(format!("unsupported configuration version {v}")));
            }
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Range checks; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, CliError> {
        let warnings = self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let bad = |m: String| Err(CliError::Config(m));
        let c = &self.cert;
        if c.l == 0 || c.admissible_l == 0 {
            return bad("cert.l and cert.admissible_l must be positive".into());
        }
        if !(c.c_star > 0.0 && c.c_star < 1.0) || !(c.eta > 0.0 && c.eta < 1.0) {
            return bad("cert.c_star and cert.eta must lie in (0, 1)".into());
        }
        if c.m_points == 0 || c.sigma_points == 0 || !(c.tilde_c > 0.0) || c.k_max < 1 {
            return bad("cert grid sizes, tilde_c and k_max must be positive".into());
        }
        let s = &self.scan;
        if s.scales.iter().any(|&m| m < 2) || s.sigma_points == 0 || s.max_regions == 0 {
            return bad("scan scales must be at least 2 and grids non-empty".into());
        }
        for (name, v) in [("rho1", s.rho1), ("rho2", s.rho2), ("rho3", s.rho3), ("rho4", s.rho4)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("scan.{name} = {v} must lie in (0, 1)"));
            }
        }
        if let (Some(lo), Some(hi)) = (s.sigma_lo, s.sigma_hi) {
            if !(hi > lo) {
                return bad("scan.sigma_hi must exceed scan.sigma_lo".into());
            }
        }
        if s.theta_points > 0 && (s.theta_scale < 2 || s.theta_radius < 1) {
            return bad("scan.theta_scale must be at least 2 and theta_radius positive".into());
        }
        if !(self.oracle.tolerance > 0.0) {
            return bad("oracle.tolerance must be positive".into());
        }
        Ok(warnings)
    }

    pub fn to_value(&self) -> toml::Table {
        match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("configuration serializes to a table"),
        }
    }

    /// Canonical text form, parseable by [`RunConfig::parse`].
    pub fn to_toml(&self) -> String {
        emit::document(CONFIG_FORMAT, &self.to_value())
    }

    pub fn oracle_box(&self) -> u64 {
        self.oracle.box_size.unwrap_or(self.solver.max_box)
    }
}
