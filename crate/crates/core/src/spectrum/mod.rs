//! Linear frequencies and the arithmetic non-resonance conditions they must
//! satisfy: Diophantine and separation bounds, transversality in the mass
//! parameter `m`, sublevel-set measure estimates, admissible-`m` scans and
//! cluster counts.
//!
//! Phases are measured in radians. The user-facing parameters `alpha` and
//! `theta0` live in `[0, 1]` and are multiplied by `2*pi` here, so that the
//! torus distance is `dist(x, 2*pi*Z)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::ResonantSet;

mod admissible;
mod certificate;
mod diophantine;
mod measure;
mod transversality;

pub use admissible::{admissible_m_scan, cluster_count, cluster_scan, resonance_centers, AdmissibleScan};
pub use certificate::{CertKind, Certificate, Witness};
pub use diophantine::{
    check_alpha_dc, check_theta_dc, separation_certificate, separation_minima, DcThreshold, SeparationScan,
};
pub use measure::{midpoint_grid, sublevel_measure, SublevelEstimate, SublevelFunction, MASS_HI, MASS_LO};
pub use transversality::{
    d_mu_dm, derivative_bounds, lambda, transversality_margin, wronskian_det, wronskian_det_direct,
    wronskian_det_values, Combination, TransversalityKind, Wronskian,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("anchor sites must be distinct and of length d")]
    InvalidAnchors,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("combination not admissible: {0}")]
    NotApplicable(String),
    #[error("grid resolution insufficient: {0}")]
    InsufficientResolution(String),
}

/// Parameters of the lattice wave equation and of the unperturbed solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Frequency vector in `[0, 1]^d` (scaled by `2*pi` internally).
    pub alpha: Vec<f64>,
    /// Phase in `[0, 1]` (scaled by `2*pi` internally).
    pub theta0: f64,
    pub m: f64,
    pub eps: f64,
    pub delta: f64,
    pub p: u32,
    pub anchors: Vec<Vec<i64>>,
    pub amplitudes: Vec<f64>,
    /// Decay rate of the convolution kernel.
    pub gamma: f64,
    pub k_exponent: f64,
}

impl ModelParams {
    pub fn b(&self) -> usize {
        self.anchors.len()
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub fn resonant_set(&self) -> ResonantSet {
        ResonantSet::new(self.anchors.clone())
    }

    /// Checks ranges and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, SpectrumError> {
        let bad = |msg: String| Err(SpectrumError::InvalidParams(msg));
        let d = self.d();
        let b = self.b();
        if d == 0 {
            return bad("alpha must have at least one component".into());
        }
        if b == 0 {
            return bad("at least one anchor is required".into());
        }
        if self.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad(format!("alpha {:?} outside [0,1]^d", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.theta0) {
            return bad(format!("theta0 {} outside [0,1]", self.theta0));
        }
        if !(2.0..=3.0).contains(&self.m) {
            return bad(format!("m {} outside [2,3]", self.m));
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0,1]"));
            }
        }
        if self.p == 0 || self.p % 2 != 0 {
            return bad(format!("p = {} must be a positive even integer", self.p));
        }
        if self.amplitudes.len() != b {
            return bad(format!("{} amplitudes for {} anchors", self.amplitudes.len(), b));
        }
        if self.amplitudes.iter().any(|a| !(1.0..=2.0).contains(a)) {
            return bad(format!("amplitudes {:?} outside [1,2]^b", self.amplitudes));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma {} must be positive", self.gamma));
        }
        let k_max = 1e4 * d as f64 * (b as f64).powi(4);
        if !(self.k_exponent > 0.0 && self.k_exponent <= k_max) {
            return bad(format!("k_exponent {} outside (0, {k_max}]", self.k_exponent));
        }
        self.check_anchors()?;
        let mut warnings = Vec::new();
        if self.eps > self.delta && self.delta > 0.0 {
            warnings.push(format!("eps = {} exceeds delta = {}; the construction assumes eps <~ delta", self.eps, self.delta));
        }
        Ok(warnings)
    }

    pub fn check_anchors(&self) -> Result<(), SpectrumError> {
        let d = self.d();
        for (i, a) in self.anchors.iter().enumerate() {
            if a.len() != d || self.anchors[..i].contains(a) {
                return Err(SpectrumError::InvalidAnchors);
            }
        }
        Ok(())
    }

    /// `2*pi*(n . alpha + theta0)`.
    pub fn phase(&self, n: &[i64]) -> f64 {
        TAU * (dot(n, &self.alpha) + self.theta0)
    }

    /// `mu_n` at the configured `m`.
    pub fn mu(&self, n: &[i64]) -> f64 {
        self.mu_at(n, self.m)
    }

    /// `mu_n = sqrt(cos(n . alpha + theta0) + m)`.
    pub fn mu_at(&self, n: &[i64], m: f64) -> f64 {
        (self.phase(n).cos() + m).sqrt()
    }

    /// `omega^(0)` at the configured `m`.
    pub fn omega0(&self) -> Result<Vec<f64>, SpectrumError> {
        self.omega0_at(self.m)
    }

    pub fn omega0_at(&self, m: f64) -> Result<Vec<f64>, SpectrumError> {
        self.check_anchors()?;
        Ok(self.anchors.iter().map(|n| self.mu_at(n, m)).collect())
    }
}

/// `mu` as a function of the phase, for callers that already hold it.
pub fn mu_from_phase(phase: f64, m: f64) -> f64 {
    (phase.cos() + m).sqrt()
}

/// `||x||_T = inf_l |x - 2*pi*l|`.
pub fn torus_norm(x: f64) -> f64 {
    (x - TAU * (x / TAU).round()).abs()
}

pub fn dot(n: &[i64], x: &[f64]) -> f64 {
    n.iter().zip(x).map(|(a, b)| *a as f64 * b).sum()
}

/// `k . omega`.
pub fn kdot(k: &[i64], omega: &[f64]) -> f64 {
    dot(k, omega)
}

/// `(2/pi^2)`, the constant of the spacing bound.
pub(crate) const SPACING_CONST: f64 = 2.0 / (PI * PI);

#[cfg(test)]
pub(crate) fn golden_params(b: usize) -> ModelParams {
    ModelParams {
        alpha: vec![(5f64.sqrt() - 1.0) / 2.0],
        theta0: 0.1234,
        m: 2.5,
        eps: 1e-3,
        delta: 1e-3,
        p: 2,
        anchors: (0..b as i64).map(|i| vec![i]).collect(),
        amplitudes: vec![1.0; b],
        gamma: 1.0,
        k_exponent: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_closed_forms() {
        assert!((mu_from_phase(0.0, 3.0) - 2.0).abs() < 1e-15);
        assert!((mu_from_phase(PI, 2.0) - 1.0).abs() < 1e-15);
        let mut p = golden_params(1);
        p.theta0 = 0.0;
        p.m = 3.0;
        assert!((p.mu(&[0]) - 2.0).abs() < 1e-15);
        p.theta0 = 0.5;
        p.m = 2.0;
        assert!((p.mu(&[0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mu_range_and_monotonicity() {
        let p = golden_params(1);
        for n in -50..=50 {
            for &m in &[2.0, 2.3, 2.7, 3.0] {
                let v = p.mu_at(&[n], m);
                assert!((1.0..=2.0).contains(&v));
                assert!(p.mu_at(&[n], m + 1e-3) > v);
            }
        }
    }

    #[test]
    fn mu_is_periodic_in_phase() {
        for i in 0..20 {
            let x = i as f64 * 0.37;
            assert!((mu_from_phase(x, 2.5) - mu_from_phase(x + TAU, 2.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn omega0_cases() {
        let mut p = golden_params(1);
        p.theta0 = 0.0;
        p.m = 3.0;
        assert_eq!(p.omega0().unwrap(), vec![2.0]);

        let mut p = golden_params(2);
        p.alpha = vec![0.5];
        p.theta0 = 0.0;
        p.m = 2.0;
        p.anchors = vec![vec![0], vec![1]];
        let w = p.omega0().unwrap();
        assert!((w[0] - 3f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 1.0).abs() < 1e-15);

        let mut q = p.clone();
        q.anchors.reverse();
        let wq = q.omega0().unwrap();
        assert_eq!(wq, vec![w[1], w[0]]);

        q.anchors = vec![vec![1], vec![1]];
        assert_eq!(q.omega0(), Err(SpectrumError::InvalidAnchors));
    }

    #[test]
    fn torus_norm_basics() {
        assert_eq!(torus_norm(0.0), 0.0);
        assert!((torus_norm(TAU + 0.1) - 0.1).abs() < 1e-14);
        assert!((torus_norm(-0.1) - 0.1).abs() < 1e-14);
        assert!((torus_norm(PI) - PI).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let p = golden_params(1);
        assert!(p.validate().unwrap().is_empty());
        let mut q = p.clone();
        q.p = 3;
        assert!(q.validate().is_err());
        let mut q = p.clone();
        q.eps = 0.1;
        q.delta = 0.01;
        assert_eq!(q.validate().unwrap().len(), 1);
        let mut q = p;
        q.m = 3.5;
        assert!(q.validate().is_err());
    }
}
