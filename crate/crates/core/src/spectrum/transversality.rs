//! Derivatives of frequency combinations in `m` and the Wronskian lower
//! bounds that keep them away from zero.

use faer::Mat;

use super::{CertKind, Certificate, ModelParams, SpectrumError, Witness};

/// `lambda_l = (1/2)(1/2 - 1)...(1/2 - l + 1)`, the coefficient of
/// `d^l/dm^l sqrt(x + m)`.
pub fn lambda(l: u32) -> f64 {
    (0..l).map(|j| 0.5 - j as f64).product()
}

/// `d^l mu_n / dm^l = lambda_l mu_n^{-(2l-1)}` at the configured `m`.
pub fn d_mu_dm(n: &[i64], l: u32, params: &ModelParams) -> f64 {
    deriv_from_value(params.mu(n), l)
}

fn deriv_from_value(v: f64, l: u32) -> f64 {
    if l == 0 {
        v
    } else {
        lambda(l) * v.powi(-(2 * l as i32 - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wronskian {
    pub det: f64,
    /// Two of the values coincide, so the Vandermonde factor vanishes.
    pub degenerate: bool,
}

/// Determinant of `M_{l,s} = lambda_l v_s^{-(2l-1)}`, `1 <= l, s <= beta`,
/// via `(prod_l lambda_l) (prod_s v_s^{-1}) prod_{s<t} (v_t^{-2} - v_s^{-2})`.
pub fn wronskian_det_values(v: &[f64]) -> Wronskian {
    let beta = v.len();
    let mut det: f64 = (1..=beta as u32).map(lambda).product();
    det *= v.iter().map(|x| x.recip()).product::<f64>();
    let mut degenerate = false;
    for s in 0..beta {
        for t in s + 1..beta {
            let diff = v[t].powi(-2) - v[s].powi(-2);
            if diff == 0.0 {
                degenerate = true;
            }
            det *= diff;
        }
    }
    Wronskian { det, degenerate }
}

/// Same determinant, computed by LU factorization of the assembled matrix.
pub fn wronskian_det_direct(v: &[f64]) -> f64 {
    let beta = v.len();
    if beta == 0 {
        return 1.0;
    }
    Mat::<f64>::from_fn(beta, beta, |l, s| deriv_from_value(v[s], l as u32 + 1)).determinant()
}

/// Wronskian of `mu` at the given space sites and mass `m`.
pub fn wronskian_det(sites: &[Vec<i64>], m: f64, params: &ModelParams) -> Wronskian {
    let v: Vec<f64> = sites.iter().map(|n| params.mu_at(n, m)).collect();
    let mut w = wronskian_det_values(&v);
    let distinct = sites.iter().enumerate().all(|(i, s)| !sites[..i].contains(s));
    if !distinct {
        w.degenerate = true;
        w.det = 0.0;
    }
    w
}

/// Frequency combinations whose `m`-derivatives are controlled.
#[derive(Debug, Clone, PartialEq)]
pub enum TransversalityKind {
    /// `k . omega0`
    Harmonic { k: Vec<i64> },
    /// `k . omega0 + mu_n`
    Shifted { k: Vec<i64>, n: Vec<i64> },
    /// `k . omega0 + mu_n - mu_n2`
    Difference { k: Vec<i64>, n: Vec<i64>, n2: Vec<i64> },
}

/// `f(m) = sum_s coeffs[s] * mu_{sites[s]}(m)` after absorbing anchor sites
/// into the harmonic part, with the derivative order and reference scale
/// that apply to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub coeffs: Vec<i64>,
    pub sites: Vec<Vec<i64>>,
    /// Highest derivative order in the sup.
    pub order: u32,
    /// Power of `c_star` in the reference lower bound.
    pub c_star_power: u32,
    /// Euclidean norm of the reduced coefficient vector.
    pub weight: f64,
}

impl Combination {
    /// `d^l f / dm^l` at `m` (`l = 0` gives the value).
    pub fn derivative(&self, params: &ModelParams, m: f64, l: u32) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.sites)
            .map(|(&c, n)| c as f64 * deriv_from_value(params.mu_at(n, m), l))
            .sum()
    }

    /// `sup_{1 <= l <= upto} |f^(l)(m)|`.
    pub fn sup_derivative(&self, params: &ModelParams, m: f64, upto: u32) -> f64 {
        // mu values are shared across orders
        let vals: Vec<f64> = self.sites.iter().map(|n| params.mu_at(n, m)).collect();
        (1..=upto)
            .map(|l| {
                self.coeffs.iter().zip(&vals).map(|(&c, &v)| c as f64 * deriv_from_value(v, l)).sum::<f64>().abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn value(&self, params: &ModelParams, m: f64) -> f64 {
        self.derivative(params, m, 0)
    }
}

fn norm2(v: &[i64]) -> f64 {
    v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt()
}

impl TransversalityKind {
    pub fn k(&self) -> &[i64] {
        match self {
            Self::Harmonic { k } | Self::Shifted { k, .. } | Self::Difference { k, .. } => k,
        }
    }

    /// Reduces to a combination of distinct `mu` values, rejecting the
    /// cases where the combination is identically zero or excluded.
    pub fn reduce(&self, params: &ModelParams) -> Result<Combination, SpectrumError> {
        let b = params.b();
        if self.k().len() != b {
            return Err(SpectrumError::NotApplicable(format!("k has length {}, expected {b}", self.k().len())));
        }
        let anchor = |n: &[i64]| params.anchors.iter().position(|a| a.as_slice() == n);
        let mut coeffs = self.k().to_vec();
        let mut sites = params.anchors.clone();
        let bu = b as u32;
        let (order, power) = match self {
            Self::Harmonic { k } => {
                if k.iter().all(|&x| x == 0) {
                    return Err(SpectrumError::NotApplicable("k = 0".into()));
                }
                (bu, bu * (bu - 1))
            }
            Self::Shifted { k, n } => match anchor(n) {
                Some(l) => {
                    coeffs[l] += 1;
                    if coeffs.iter().all(|&x| x == 0) {
                        return Err(SpectrumError::NotApplicable(format!("(k, n) = ({k:?}, {n:?}) lies in the resonant set")));
                    }
                    (bu, bu * (bu - 1))
                }
                None => {
                    coeffs.push(1);
                    sites.push(n.clone());
                    (bu + 1, bu * (bu + 1))
                }
            },
            Self::Difference { k, n, n2 } => {
                if n == n2 {
                    return Err(SpectrumError::NotApplicable("n = n2".into()));
                }
                match (anchor(n), anchor(n2)) {
                    (Some(l1), Some(l2)) => {
                        coeffs[l1] += 1;
                        coeffs[l2] -= 1;
                        if coeffs.iter().all(|&x| x == 0) {
                            return Err(SpectrumError::NotApplicable(format!(
                                "k = {k:?} cancels the anchor difference"
                            )));
                        }
                        (bu, bu * (bu - 1))
                    }
                    (Some(l1), None) => {
                        coeffs[l1] += 1;
                        coeffs.push(-1);
                        sites.push(n2.clone());
                        (bu + 2, (bu + 1) * (bu + 2))
                    }
                    (None, Some(l2)) => {
                        coeffs[l2] -= 1;
                        coeffs.push(1);
                        sites.push(n.clone());
                        (bu + 2, (bu + 1) * (bu + 2))
                    }
                    (None, None) => {
                        coeffs.push(1);
                        coeffs.push(-1);
                        sites.push(n.clone());
                        sites.push(n2.clone());
                        (bu + 2, (bu + 1) * (bu + 2))
                    }
                }
            }
        };
        let weight = norm2(&coeffs);
        Ok(Combination { coeffs, sites, order, c_star_power: power, weight })
    }
}

/// Grid-sampled `tau = inf_m sup_{l <= r} |f^(l)|` and
/// `A = sup_m sup_{l <= r+1} |f^(l)|`.
pub fn derivative_bounds(comb: &Combination, params: &ModelParams, m_grid: &[f64], r: u32) -> (f64, f64) {
    let mut tau = f64::INFINITY;
    let mut a: f64 = 0.0;
    for &m in m_grid {
        tau = tau.min(comb.sup_derivative(params, m, r));
        a = a.max(comb.sup_derivative(params, m, r + 1));
    }
    (tau, a)
}

/// Soft-gated transversality check: margin is the smallest excess of the
/// derivative sup over `tilde_c * c_star^power * weight` on the grid.
pub fn transversality_margin(
    kind: &TransversalityKind,
    params: &ModelParams,
    m_grid: &[f64],
    c_star: f64,
    tilde_c: f64,
) -> Result<Certificate, SpectrumError> {
    let comb = kind.reduce(params)?;
    let reference = tilde_c * c_star.powi(comb.c_star_power as i32) * comb.weight;
    let mut worst = (f64::INFINITY, 0usize);
    for (i, &m) in m_grid.iter().enumerate() {
        let s = comb.sup_derivative(params, m, comb.order);
        if s < worst.0 {
            worst = (s, i);
        }
    }
    let mut cert = Certificate::new(CertKind::Transversality)
        .input("k", kind.k().iter().map(|&x| x as f64).collect::<Vec<f64>>())
        .input("c_star", vec![c_star])
        .input("tilde_c", vec![tilde_c])
        .detail("order", comb.order as f64)
        .detail("inf_sup_derivative", worst.0)
        .detail("reference", reference)
        .detail("empirical_constant", worst.0 / (c_star.powi(comb.c_star_power as i32) * comb.weight));
    cert.hard_gate = false;
    if !m_grid.is_empty() {
        cert.margin = worst.0 - reference;
        cert.witnesses.push(Witness { index: vec![worst.1 as i64], value: worst.0 });
    }
    Ok(cert)
}
