//! Diophantine conditions on `alpha` and `theta0`, and the spacing of the
//! linear frequencies they imply.

use std::f64::consts::PI;

use super::{dot, torus_norm, CertKind, Certificate, ModelParams, SpectrumError, Witness, SPACING_CONST};
use crate::lattice::{box_points, sup_norm};

/// Threshold form for the `alpha` condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcThreshold {
    /// `||(n/2) . alpha||_T >= c_star` for `0 < |n| <= 2L`.
    Fixed(f64),
    /// `min(||n . alpha||_T, ||(n/2) . alpha||_T) >= nu / |n|^(2d)` for `0 < |n| <= 2L`.
    PowerLaw { nu: f64 },
}

/// Checks `alpha` (given in `[0,1]^d`) over all `0 < |n| <= 2L`.
pub fn check_alpha_dc(alpha: &[f64], l: u64, threshold: DcThreshold) -> Certificate {
    let d = alpha.len();
    let mut cert = Certificate::new(CertKind::AlphaDc).input("alpha", alpha.to_vec()).input("L", vec![l as f64]);
    cert = match threshold {
        DcThreshold::Fixed(c) => cert.input("c_star", vec![c]),
        DcThreshold::PowerLaw { nu } => cert.input("nu", vec![nu]),
    };
    let mut worst: Option<(f64, Vec<i64>, f64)> = None;
    for n in box_points(d, 2 * l as i64) {
        let norm = sup_norm(&n);
        if norm == 0 {
            continue;
        }
        // (n/2) . alpha in radians is pi * n . alpha_unit
        let half = torus_norm(PI * dot(&n, alpha));
        let (attained, bound) = match threshold {
            DcThreshold::Fixed(c) => (half, c),
            DcThreshold::PowerLaw { nu } => {
                let full = torus_norm(2.0 * PI * dot(&n, alpha));
                (half.min(full), nu / (norm as f64).powi(2 * d as i32))
            }
        };
        let slack = attained - bound;
        if worst.as_ref().is_none_or(|w| slack < w.0) {
            worst = Some((slack, n, attained));
        }
    }
    if let Some((slack, n, attained)) = worst {
        cert.margin = slack;
        cert.witnesses.push(Witness { index: n, value: attained });
    }
    cert
}

/// Checks `||theta0 + (n/2) . alpha||_T >= c_star` over all `|n| <= 2L`.
pub fn check_theta_dc(theta0: f64, alpha: &[f64], l: u64, c_star: f64) -> Certificate {
    let mut cert = Certificate::new(CertKind::ThetaDc)
        .input("theta0", vec![theta0])
        .input("alpha", alpha.to_vec())
        .input("L", vec![l as f64])
        .input("c_star", vec![c_star]);
    let mut worst: Option<(f64, Vec<i64>, f64)> = None;
    for n in box_points(alpha.len(), 2 * l as i64) {
        let attained = torus_norm(2.0 * PI * theta0 + PI * dot(&n, alpha));
        let slack = attained - c_star;
        if worst.as_ref().is_none_or(|w| slack < w.0) {
            worst = Some((slack, n, attained));
        }
    }
    if let Some((slack, n, attained)) = worst {
        cert.margin = slack;
        cert.witnesses.push(Witness { index: n, value: attained });
    }
    cert
}

/// Extremal spacings of `mu_n` over `n != n'`, `|(n, n')| <= L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationScan {
    pub min_gap: f64,
    pub min_gap_pair: (Vec<i64>, Vec<i64>),
    pub min_sq_gap: f64,
    pub min_sq_gap_pair: (Vec<i64>, Vec<i64>),
    /// `max |mu_n^2 - mu_n'^2| / |mu_n - mu_n'|` over pairs with distinct values.
    pub max_ratio: f64,
}

pub fn separation_minima(params: &ModelParams, l: u64) -> SeparationScan {
    let sites = box_points(params.d(), l as i64);
    let mus: Vec<f64> = sites.iter().map(|n| params.mu(n)).collect();
    let mut out = SeparationScan {
        min_gap: f64::INFINITY,
        min_gap_pair: (vec![], vec![]),
        min_sq_gap: f64::INFINITY,
        min_sq_gap_pair: (vec![], vec![]),
        max_ratio: 0.0,
    };
    for (i, a) in mus.iter().enumerate() {
        for (j, b) in mus.iter().enumerate() {
            if i == j {
                continue;
            }
            let gap = (a - b).abs();
            let sq = (a * a - b * b).abs();
            if gap < out.min_gap {
                out.min_gap = gap;
                out.min_gap_pair = (sites[i].clone(), sites[j].clone());
            }
            if sq < out.min_sq_gap {
                out.min_sq_gap = sq;
                out.min_sq_gap_pair = (sites[i].clone(), sites[j].clone());
            }
            if gap > 0.0 {
                out.max_ratio = out.max_ratio.max(sq / gap);
            }
        }
    }
    out
}

/// Verifies `|mu_n - mu_n'| >= (2/pi^2) c_star^2` and
/// `|mu_n^2 - mu_n'^2| >= (8/pi^2) c_star^2` once both Diophantine
/// conditions hold at `(L, c_star)`.
pub fn separation_certificate(params: &ModelParams, l: u64, c_star: f64) -> Result<Certificate, SpectrumError> {
    let a = check_alpha_dc(&params.alpha, l, DcThreshold::Fixed(c_star));
    let t = check_theta_dc(params.theta0, &params.alpha, l, c_star);
    if !a.passed() || !t.passed() {
        return Err(SpectrumError::PreconditionFailed(format!(
            "Diophantine conditions fail at L={l}, c_star={c_star} (alpha margin {:.3e}, theta margin {:.3e})",
            a.margin, t.margin
        )));
    }
    let scan = separation_minima(params, l);
    let gap_bound = SPACING_CONST * c_star * c_star;
    let sq_bound = 4.0 * SPACING_CONST * c_star * c_star;
    let gap_margin = scan.min_gap - gap_bound;
    let sq_margin = scan.min_sq_gap - sq_bound;
    let mut cert = Certificate::new(CertKind::Separation)
        .input("L", vec![l as f64])
        .input("c_star", vec![c_star])
        .detail("min_gap", scan.min_gap)
        .detail("gap_bound", gap_bound)
        .detail("gap_margin", gap_margin)
        .detail("min_sq_gap", scan.min_sq_gap)
        .detail("sq_gap_bound", sq_bound)
        .detail("sq_gap_margin", sq_margin)
        .detail("max_sq_to_gap_ratio", scan.max_ratio);
    cert.margin = gap_margin.min(sq_margin);
    let pair = |p: &(Vec<i64>, Vec<i64>)| p.0.iter().chain(&p.1).copied().collect();
    cert.witnesses.push(Witness { index: pair(&scan.min_gap_pair), value: scan.min_gap });
    cert.witnesses.push(Witness { index: pair(&scan.min_sq_gap_pair), value: scan.min_sq_gap });
    Ok(cert)
}
