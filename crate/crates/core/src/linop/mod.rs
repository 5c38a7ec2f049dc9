//! Linearized operators `H(sigma) = D(sigma) + eps Delta + delta T_phi` on
//! finite regions, with `D(sigma)(k, n) = mu_n^2 - (sigma + k . omega)^2`
//! and `T_phi((k, n), (k', n)) = phi(k - k', n)`, and their Green's
//! functions.

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{IndexMap, LatticeError, RegionSpec, Site};
use crate::linalg::{self, LinalgError, SymTriplets};
use crate::nonlin::{linearize, neighbours, CoefficientField};
use crate::spectrum::{kdot, ModelParams};

mod diagnostics;
mod lde;

pub use diagnostics::{
    block_spectral_bound, qp_schrodinger_green, qp_theta_scan, schur_complement, BlockSpectral, QpThetaScan,
    SchurReport,
};
pub use lde::{diagonal_bad_intervals, explicit_small_scale_bad, lde_family, lde_scan, LdeFamily, LdeRow, LdeScanReport};

/// Relative size of the smallest singular value below which a matrix is
/// declared singular.
pub const SINGULAR_REL: f64 = 1e-14;

/// Entries below this magnitude are left out of the decay fit.
pub const FIT_FLOOR: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("kernel is not even in k at {0}")]
    AsymmetricKernel(Site),
    #[error("matrix is singular (smallest singular value {min_singular:.3e})")]
    Singular { min_singular: f64 },
    #[error("complement block is singular (smallest singular value {min_singular:.3e})")]
    ComplementSingular { min_singular: f64 },
    #[error("shifted space block has a non-positive eigenvalue {min_zeta:.3e}")]
    NegativeShift { min_zeta: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Convolution kernel `phi(k, n)`, stored with all mirrors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Kernel {
    table: BTreeMap<Site, f64>,
}

impl Kernel {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Explicit table; every entry must have an equal mirror entry.
    pub fn from_table(entries: impl IntoIterator<Item = (Site, f64)>) -> Result<Self, LinopError> {
        let table: BTreeMap<Site, f64> = entries.into_iter().filter(|(_, v)| *v != 0.0).collect();
        for (s, v) in &table {
            if table.get(&s.mirror()) != Some(v) {
                return Err(LinopError::AsymmetricKernel(s.clone()));
            }
        }
        Ok(Self { table })
    }

    /// Uses `phi` directly.
    pub fn from_phi(phi: &CoefficientField) -> Self {
        Self { table: phi.full_entries().into_iter().collect() }
    }

    /// `phi = (p + 1) q^{*p}`, the kernel of the linearization at `q`.
    pub fn from_field(q: &CoefficientField, p: u32) -> Self {
        Self::from_phi(&linearize(q, p))
    }

    pub fn get(&self, k: &[i64], n: &[i64]) -> f64 {
        self.table.get(&Site { k: k.to_vec(), n: n.to_vec() }).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.table.is_empty()
    }

    /// Nonzero `(k, phi(k, n))` grouped by `n`.
    fn slices(&self) -> BTreeMap<Vec<i64>, Vec<(Vec<i64>, f64)>> {
        let mut out: BTreeMap<Vec<i64>, Vec<(Vec<i64>, f64)>> = BTreeMap::new();
        for (s, v) in &self.table {
            out.entry(s.n.clone()).or_default().push((s.k.clone(), *v));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub region: RegionSpec,
    pub sigma: f64,
    pub omega: Vec<f64>,
    pub params: ModelParams,
    pub kernel: Kernel,
}

/// `H(sigma)` on a materialized region, split into a `sigma`-independent
/// part and the `(sigma + k . omega)^2` shift.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub index: IndexMap,
    /// `mu_n^2 + delta phi(0, n)`
    pub base: Vec<f64>,
    /// `k . omega`
    pub kw: Vec<f64>,
    /// Off-diagonal entries, both triangles.
    pub off: Vec<(usize, usize, f64)>,
    pub sigma: f64,
}

impl Assembled {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn diag_at(&self, sigma: f64) -> Vec<f64> {
        self.base.iter().zip(&self.kw).map(|(b, kw)| b - (sigma + kw).powi(2)).collect()
    }

    pub fn at_sigma(&self, sigma: f64) -> SymTriplets {
        SymTriplets { diag: self.diag_at(sigma), off: self.off.clone() }
    }

    pub fn triplets(&self) -> SymTriplets {
        self.at_sigma(self.sigma)
    }

    pub fn dense(&self) -> Mat<f64> {
        self.triplets().to_dense()
    }

    /// Largest sup-norm distance between sites coupled off the diagonal.
    pub fn off_range(&self) -> i64 {
        self.off.iter().map(|&(i, j, _)| self.index.site(i).dist(self.index.site(j))).max().unwrap_or(0)
    }
}

/// Assembles `H(sigma)` on the sites of `index`.
pub fn assemble_on(index: IndexMap, sigma: f64, omega: &[f64], params: &ModelParams, kernel: &Kernel) -> Assembled {
    let slices = kernel.slices();
    let n_sites = index.len();
    let mut base = Vec::with_capacity(n_sites);
    let mut kw = Vec::with_capacity(n_sites);
    let mut off = Vec::new();
    for (i, s) in index.sites().iter().enumerate() {
        let mu = params.mu(&s.n);
        let mut diag = mu * mu;
        kw.push(kdot(&s.k, omega));
        if params.eps != 0.0 {
            for m in neighbours(&s.n) {
                if let Some(j) = index.get(&Site { k: s.k.clone(), n: m }) {
                    off.push((i, j, params.eps));
                }
            }
        }
        if params.delta != 0.0 {
            for (dk, phi) in slices.get(&s.n).map(Vec::as_slice).unwrap_or(&[]) {
                if dk.iter().all(|&x| x == 0) {
                    diag += params.delta * phi;
                    continue;
                }
                let k2: Vec<i64> = s.k.iter().zip(dk).map(|(a, b)| a - b).collect();
                if let Some(j) = index.get(&Site { k: k2, n: s.n.clone() }) {
                    off.push((i, j, params.delta * phi));
                }
            }
        }
        base.push(diag);
    }
    Assembled { index, base, kw, off, sigma }
}

pub fn assemble(spec: &OperatorSpec) -> Result<Assembled, LinopError> {
    let index = IndexMap::new(&spec.region)?;
    Ok(assemble_on(index, spec.sigma, &spec.omega, &spec.params, &spec.kernel))
}

/// LDE exponents at scale `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdeThresholds {
    pub scale: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub gamma_prime: f64,
}

impl LdeThresholds {
    /// `rho = (0.1, 0.7, 0.9)` and `gamma' = gamma - M^(-0.2)`.
    pub fn defaults(scale: u64, gamma: f64) -> Self {
        let m = scale as f64;
        Self { scale: m, rho1: 0.1, rho2: 0.7, rho3: 0.9, gamma_prime: gamma - m.powf(-0.2) }
    }

    /// `e^{M^rho2}`
    pub fn norm_bound(&self) -> f64 {
        self.scale.powf(self.rho2).exp()
    }

    /// `M^rho3`
    pub fn decay_from(&self) -> f64 {
        self.scale.powf(self.rho3)
    }

    /// `e^{-M^rho1}`
    pub fn measure_bound(&self) -> f64 {
        (-self.scale.powf(self.rho1)).exp()
    }

    /// `e^{-2 M^rho1}`, the diagonal threshold of the explicit small-scale set.
    pub fn small_scale_threshold(&self) -> f64 {
        (-2.0 * self.scale.powf(self.rho1)).exp()
    }

    pub fn green(&self) -> GreenThresholds {
        GreenThresholds { norm_bound: self.norm_bound(), decay_rate: self.gamma_prime, decay_from: self.decay_from() }
    }
}

/// `||G|| <= norm_bound` and `|G(j, j')| <= e^{-decay_rate |j - j'|}` for
/// `|j - j'| >= decay_from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenThresholds {
    pub norm_bound: f64,
    pub decay_rate: f64,
    pub decay_from: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenReport {
    pub size: usize,
    pub norm: f64,
    pub norm_bound: f64,
    pub norm_ok: bool,
    /// `max (log|G(j, j')| + rate |j - j'|)` over far pairs; at most 0 when the
    /// decay bound holds.
    pub decay_margin: f64,
    pub decay_ok: bool,
    /// Negated slope of `log|G|` against distance, when the region is wide enough.
    pub fitted_rate: Option<f64>,
    pub fit_residual: Option<f64>,
    pub min_singular: f64,
    pub matrix_norm: f64,
    /// `max |A G - I|`
    pub inverse_defect: f64,
}

impl GreenReport {
    pub fn good(&self) -> bool {
        self.norm_ok && self.decay_ok
    }
}

#[derive(Debug, Clone)]
pub struct Green {
    pub index: IndexMap,
    pub matrix: Mat<f64>,
    pub report: GreenReport,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept, rms)`.
pub(crate) fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Some((slope, icpt, rms))
}

/// Inverts a symmetric matrix on `index` and evaluates both bounds.
pub fn analyze_inverse(index: IndexMap, a: &Mat<f64>, thr: &GreenThresholds) -> Result<Green, LinopError> {
    let eig = linalg::sym_eigenvalues(a)?;
    let min_sv = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let max_sv = eig.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if !(min_sv >= SINGULAR_REL * max_sv) || min_sv == 0.0 {
        return Err(LinopError::Singular { min_singular: min_sv });
    }
    let g = linalg::inverse(a);
    let norm = 1.0 / min_sv;
    let n = index.len();
    let mut margin = f64::NEG_INFINITY;
    let mut pts = Vec::new();
    let mut diam = 0;
    for j in 0..n {
        for i in 0..n {
            let dist = index.site(i).dist(index.site(j));
            diam = diam.max(dist);
            if i == j || (dist as f64) < thr.decay_from {
                continue;
            }
            let v = g[(i, j)].abs();
            if v > 0.0 {
                margin = margin.max(v.ln() + thr.decay_rate * dist as f64);
            }
            if v > FIT_FLOOR {
                pts.push((dist as f64, v.ln()));
            }
        }
    }
    let fit = if diam as f64 >= 2.0 * thr.decay_from { line_fit(&pts) } else { None };
    let defect = linalg::identity_defect(&(a * &g));
    let report = GreenReport {
        size: n,
        norm,
        norm_bound: thr.norm_bound,
        norm_ok: norm <= thr.norm_bound,
        decay_margin: margin,
        decay_ok: margin <= 0.0,
        fitted_rate: fit.map(|f| -f.0),
        fit_residual: fit.map(|f| f.2),
        min_singular: min_sv,
        matrix_norm: max_sv,
        inverse_defect: defect,
    };
    Ok(Green { index, matrix: g, report })
}

/// `G = (R H(sigma) R)^{-1}` with its norm and decay diagnostics.
pub fn green(spec: &OperatorSpec, thr: &GreenThresholds) -> Result<Green, LinopError> {
    let h = assemble(spec)?;
    let a = h.dense();
    analyze_inverse(h.index, &a, thr)
}
