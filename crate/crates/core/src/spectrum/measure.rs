//! Sublevel-set measure on the mass interval `[2, 3]`: an analytic bound
//! from derivative control and a grid-sampled estimate.

use super::transversality::{derivative_bounds, Combination, TransversalityKind};
use super::{ModelParams, SpectrumError};

pub const MASS_LO: f64 = 2.0;
pub const MASS_HI: f64 = 3.0;

/// Midpoints of `n` equal cells of `[lo, hi]`.
pub fn midpoint_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SublevelFunction {
    /// `slope * m + intercept`
    Affine { slope: f64, intercept: f64 },
    Combination(TransversalityKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SublevelEstimate {
    pub bound: f64,
    pub empirical: f64,
    pub r: u32,
    pub tau: f64,
    pub a: f64,
    /// Number of subintervals in the covering argument.
    pub pieces: u64,
    pub grid_points: usize,
}

enum Resolved {
    Affine(f64, f64),
    Comb(Combination),
}

impl Resolved {
    fn value(&self, params: &ModelParams, m: f64) -> f64 {
        match self {
            Resolved::Affine(s, c) => s * m + c,
            Resolved::Comb(c) => c.value(params, m),
        }
    }
}

/// Estimates `meas{m in [2,3] : |f(m)| <= eta}`.
///
/// `order` defaults to the derivative order attached to the function and
/// `tau_a` to grid-sampled derivative bounds. `tau` is clamped to at most 1.
pub fn sublevel_measure(
    f: &SublevelFunction,
    params: &ModelParams,
    eta: f64,
    order: Option<u32>,
    tau_a: Option<(f64, f64)>,
    grid_points: usize,
) -> Result<SublevelEstimate, SpectrumError> {
    if !(eta > 0.0) {
        return Err(SpectrumError::InvalidParams(format!("eta = {eta} must be positive")));
    }
    if grid_points == 0 {
        return Err(SpectrumError::InsufficientResolution("empty grid".into()));
    }
    let grid = midpoint_grid(MASS_LO, MASS_HI, grid_points);
    let (resolved, r, (tau, a)) = match f {
        SublevelFunction::Affine { slope, intercept } => {
            let r = order.unwrap_or(1);
            (Resolved::Affine(*slope, *intercept), r, tau_a.unwrap_or((slope.abs(), slope.abs())))
        }
        SublevelFunction::Combination(kind) => {
            let comb = kind.reduce(params)?;
            let r = order.unwrap_or(comb.order);
            let ta = match tau_a {
                Some(x) => x,
                // the bounds only need a coarse grid; derivatives vary slowly in m
                None => derivative_bounds(&comb, params, &midpoint_grid(MASS_LO, MASS_HI, 2001), r),
            };
            (Resolved::Comb(comb), r, ta)
        }
    };
    if !(tau > 0.0) {
        return Err(SpectrumError::InsufficientResolution(format!("tau = {tau} is not positive")));
    }
    let tau = tau.min(1.0);
    let a = a.max(tau);
    let spacing = (MASS_HI - MASS_LO) / grid_points as f64;
    if spacing > eta / (10.0 * a) {
        return Err(SpectrumError::InsufficientResolution(format!(
            "spacing {spacing:.3e} exceeds eta/(10 A) = {:.3e}",
            eta / (10.0 * a)
        )));
    }
    let hits = grid.iter().filter(|&&m| resolved.value(params, m).abs() <= eta).count();
    let empirical = hits as f64 * spacing;
    let len = MASS_HI - MASS_LO;
    let pieces = (2.0 * a * len / tau).floor() as u64 + 1;
    let rf = r as f64;
    let bound = rf * (rf + 3.0) * (2.0 * a * len / tau + 1.0) * eta.powf(1.0 / rf) / (tau * tau);
    Ok(SublevelEstimate { bound, empirical, r, tau, a, pieces, grid_points })
}
