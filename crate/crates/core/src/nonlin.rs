//! Coefficient fields `q(k, n)` of cosine series and the nonlinear lattice
//! map built from them.

use std::collections::BTreeMap;

use crate::lattice::{ResonantSet, Site};
use crate::spectrum::{kdot, ModelParams};

/// Relative magnitude below which convolution products are dropped.
pub const DROP_REL: f64 = 1e-16;

/// Real field on `Z^b x Z^d`, even in `k`.
///
/// Only the canonical representative of `{k, -k}` (the lexicographically
/// larger one) is stored, so evenness holds by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientField {
    b: usize,
    d: usize,
    entries: BTreeMap<Site, f64>,
}

pub fn canonical_k(k: &[i64]) -> Vec<i64> {
    let neg: Vec<i64> = k.iter().map(|x| -x).collect();
    if neg.as_slice() > k {
        neg
    } else {
        k.to_vec()
    }
}

fn canonical(site: &Site) -> Site {
    Site { k: canonical_k(&site.k), n: site.n.clone() }
}

/// Nearest neighbours of `n` in the `l^1` sense.
pub fn neighbours(n: &[i64]) -> impl Iterator<Item = Vec<i64>> + '_ {
    (0..n.len()).flat_map(move |j| {
        [-1, 1].into_iter().map(move |s| {
            let mut m = n.to_vec();
            m[j] += s;
            m
        })
    })
}

impl CoefficientField {
    pub fn new(b: usize, d: usize) -> Self {
        Self { b, d, entries: BTreeMap::new() }
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Builds a field from entries given at arbitrary representatives; later
    /// entries overwrite earlier ones.
    pub fn from_entries(b: usize, d: usize, entries: impl IntoIterator<Item = (Site, f64)>) -> Self {
        let mut f = Self::new(b, d);
        for (s, v) in entries {
            f.set(&s, v);
        }
        f
    }

    pub fn get(&self, site: &Site) -> f64 {
        self.entries.get(&canonical(site)).copied().unwrap_or(0.0)
    }

    pub fn get_kn(&self, k: &[i64], n: &[i64]) -> f64 {
        self.entries.get(&Site { k: canonical_k(k), n: n.to_vec() }).copied().unwrap_or(0.0)
    }

    /// Sets `q(k, n) = q(-k, n) = v`. Zero removes the entry.
    pub fn set(&mut self, site: &Site, v: f64) {
        debug_assert_eq!(site.k.len(), self.b);
        debug_assert_eq!(site.n.len(), self.d);
        let c = canonical(site);
        if v == 0.0 {
            self.entries.remove(&c);
        } else {
            self.entries.insert(c, v);
        }
    }

    pub fn add(&mut self, site: &Site, v: f64) {
        let cur = self.get(site);
        self.set(site, cur + v);
    }

    /// Number of stored representatives.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored entries, one per `{k, -k}` pair, in site order.
    pub fn canonical_entries(&self) -> impl Iterator<Item = (&Site, f64)> {
        self.entries.iter().map(|(s, v)| (s, *v))
    }

    /// All nonzero entries including mirrors, sorted by site.
    pub fn full_entries(&self) -> Vec<(Site, f64)> {
        let mut out: Vec<(Site, f64)> = Vec::with_capacity(2 * self.entries.len());
        for (s, &v) in &self.entries {
            out.push((s.clone(), v));
            if s.k.iter().any(|&x| x != 0) {
                out.push((s.mirror(), v));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Smallest `L` with the support inside `cube(L)`.
    pub fn support_bound(&self) -> i64 {
        self.entries.keys().map(Site::norm).max().unwrap_or(0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.entries.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `l^2` norm over the full (mirrored) support.
    pub fn l2_norm(&self) -> f64 {
        self.full_entries().iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.full_entries().iter().fold(0.0, |acc, (_, v)| acc + v.abs())
    }

    /// Full `k`-slices per space site.
    pub fn slices(&self) -> BTreeMap<Vec<i64>, BTreeMap<Vec<i64>, f64>> {
        let mut out: BTreeMap<Vec<i64>, BTreeMap<Vec<i64>, f64>> = BTreeMap::new();
        for (s, v) in self.full_entries() {
            out.entry(s.n).or_default().insert(s.k, v);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self::new(self.b, self.d);
        for (s, v) in self.canonical_entries() {
            out.set(s, c * v);
        }
        out
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (s, v) in other.canonical_entries() {
            out.add(s, c * v);
        }
        out
    }

    /// Sup-norm distance to another field.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (s, v) in self.canonical_entries() {
            m = m.max((v - other.get(s)).abs());
        }
        for (s, v) in other.canonical_entries() {
            if !self.entries.contains_key(s) {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Largest `|q(k, n) - q(-k, n)|` over the support, which is zero by
    /// construction; kept for external checks.
    pub fn asymmetry(&self) -> f64 {
        self.full_entries().iter().map(|(s, v)| (v - self.get(&s.mirror())).abs()).fold(0.0, f64::max)
    }
}

fn convolve_slices(a: &BTreeMap<Vec<i64>, f64>, b: &BTreeMap<Vec<i64>, f64>) -> BTreeMap<Vec<i64>, f64> {
    let mut out: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<i64> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_insert(0.0) += va * vb;
        }
    }
    out
}

/// `order`-fold convolution in `k` of each slice `q(., n)`.
pub fn convolve_power(q: &CoefficientField, order: u32) -> CoefficientField {
    assert!(order >= 1, "convolution order must be positive");
    let mut out = CoefficientField::new(q.b, q.d);
    for (n, slice) in q.slices() {
        let mut acc = slice.clone();
        for _ in 1..order {
            acc = convolve_slices(&acc, &slice);
        }
        let scale = acc.values().fold(0.0, |m: f64, v| m.max(v.abs()));
        for (k, v) in acc {
            if v.abs() >= DROP_REL * scale {
                out.set(&Site { k, n: n.clone() }, v);
            }
        }
    }
    out
}

/// Convolution of two fields slice by slice.
pub fn convolve(a: &CoefficientField, b: &CoefficientField) -> CoefficientField {
    let mut out = CoefficientField::new(a.b, a.d);
    let sb = b.slices();
    for (n, slice) in a.slices() {
        if let Some(other) = sb.get(&n) {
            for (k, v) in convolve_slices(&slice, other) {
                if v != 0.0 {
                    out.set(&Site { k, n: n.clone() }, v);
                }
            }
        }
    }
    out
}

/// `(Delta q)(k, n) = sum over nearest neighbours n' of q(k, n')`.
pub fn laplacian(q: &CoefficientField) -> CoefficientField {
    let mut out = CoefficientField::new(q.b, q.d);
    for (s, v) in q.canonical_entries() {
        for n in neighbours(&s.n) {
            out.add(&Site { k: s.k.clone(), n }, v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub field: CoefficientField,
    pub sup: f64,
    pub l2: f64,
    pub l1: f64,
    pub support: i64,
}

impl ResidualReport {
    fn from_field(field: CoefficientField) -> Self {
        let sup = field.sup_norm();
        let l2 = field.l2_norm();
        let l1 = field.l1_norm();
        let support = field.support_bound();
        Self { field, sup, l2, l1, support }
    }
}

/// `F(q) = D q + eps Delta q + delta q^{*(p+1)}` with
/// `D(k, n) = mu_n^2 - (k . omega)^2`.
pub fn residual(q: &CoefficientField, omega: &[f64], params: &ModelParams) -> ResidualReport {
    let mut f = laplacian(q).scaled(params.eps);
    if params.delta != 0.0 {
        f = f.axpy(params.delta, &convolve_power(q, params.p + 1));
    }
    for (s, v) in q.canonical_entries() {
        let kw = kdot(&s.k, omega);
        let mu = params.mu(&s.n);
        f.add(s, (mu * mu - kw * kw) * v);
    }
    ResidualReport::from_field(f)
}

/// Kernel `(p + 1) q^{*p}` of the derivative of `q -> q^{*(p+1)}`.
pub fn linearize(q: &CoefficientField, p: u32) -> CoefficientField {
    if p == 0 {
        let mut k = CoefficientField::new(q.b, q.d);
        for n in q.slices().keys() {
            k.set(&Site { k: vec![0; q.b], n: n.clone() }, 1.0);
        }
        return k;
    }
    convolve_power(q, p).scaled((p + 1) as f64)
}

/// `u(t, n) = sum_k q(k, n) cos(k . omega t)`.
pub fn evaluate_solution(q: &CoefficientField, omega: &[f64], t: f64, n: &[i64]) -> f64 {
    q.full_entries().iter().filter(|(s, _)| s.n == n).map(|(s, v)| v * (kdot(&s.k, omega) * t).cos()).sum()
}

/// Pointwise `u` and `u_tt` at time `t`, for every space site of the slices.
fn time_values(
    slices: &BTreeMap<Vec<i64>, BTreeMap<Vec<i64>, f64>>,
    omega: &[f64],
    t: f64,
) -> BTreeMap<Vec<i64>, (f64, f64)> {
    slices
        .iter()
        .map(|(n, sl)| {
            let mut u = 0.0;
            let mut utt = 0.0;
            for (k, v) in sl {
                let kw = kdot(k, omega);
                let c = (kw * t).cos();
                u += v * c;
                utt -= kw * kw * v * c;
            }
            (n.clone(), (u, utt))
        })
        .collect()
}

/// `max |u_tt + eps Delta u + (cos(phase) + m) u + delta u^(p+1)|` over the
/// sample times and every space site within distance 1 of the support.
pub fn pde_residual(q: &CoefficientField, omega: &[f64], params: &ModelParams, t_samples: &[f64]) -> f64 {
    let slices = q.slices();
    let mut sites: Vec<Vec<i64>> = slices.keys().cloned().collect();
    for n in slices.keys() {
        sites.extend(neighbours(n));
    }
    sites.sort();
    sites.dedup();
    let mut worst: f64 = 0.0;
    for &t in t_samples {
        let vals = time_values(&slices, omega, t);
        let u = |n: &Vec<i64>| vals.get(n).map_or(0.0, |x| x.0);
        for n in &sites {
            let (un, utt) = vals.get(n).copied().unwrap_or((0.0, 0.0));
            let lap: f64 = neighbours(n).map(|m| u(&m)).sum();
            let mu2 = params.phase(n).cos() + params.m;
            let r = utt + params.eps * lap + mu2 * un + params.delta * un.powi(params.p as i32 + 1);
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// `sum_{(k, n) not in S} |q(k, n)| e^{rho (|k| + |n|)}`.
pub fn weighted_tail_norm(q: &CoefficientField, rho: f64, s: &ResonantSet) -> f64 {
    q.full_entries()
        .iter()
        .filter(|(site, _)| !s.contains(site))
        .fold(0.0, |acc, (site, v)| acc + v.abs() * (rho * (site.k_norm() + site.n_norm()) as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::golden_params;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn site(k: i64, n: i64) -> Site {
        Site::new(vec![k], vec![n])
    }

    fn base_field(n0: i64) -> CoefficientField {
        CoefficientField::from_entries(1, 1, [(site(1, n0), 0.5)])
    }

    #[test]
    fn storage_is_even() {
        let mut f = CoefficientField::new(2, 1);
        f.set(&Site::new(vec![-1, 2], vec![0]), 3.0);
        assert_eq!(f.get(&Site::new(vec![1, -2], vec![0])), 3.0);
        assert_eq!(f.len(), 1);
        assert_eq!(f.full_entries().len(), 2);
        assert_eq!(f.asymmetry(), 0.0);
        f.set(&Site::new(vec![0, 0], vec![0]), 1.0);
        assert_eq!(f.full_entries().len(), 3);
        assert_eq!(canonical_k(&[0, -1]), vec![0, 1]);
    }

    #[test]
    fn power_of_cosine() {
        let q = base_field(2);
        assert_eq!(convolve_power(&q, 1), q);
        let c = convolve_power(&q, 3);
        // sign triples: (+++) and (---) give +-3, the other six give +-1
        assert_eq!(c.get(&site(3, 2)), 0.125);
        assert_eq!(c.get(&site(-3, 2)), 0.125);
        assert_eq!(c.get(&site(1, 2)), 0.375);
        assert_eq!(c.get(&site(-1, 2)), 0.375);
        assert_eq!(c.len(), 2);
        assert!(convolve_power(&CoefficientField::new(1, 1), 3).is_empty());
    }

    #[test]
    fn kernel_value() {
        let phi = linearize(&base_field(0), 2);
        assert_eq!(phi.get(&site(0, 0)), 1.5);
        assert_eq!(phi.get(&site(2, 0)), 0.75);
        assert!(linearize(&CoefficientField::new(1, 1), 2).is_empty());
    }

    #[test]
    fn residual_basics() {
        let mut p = golden_params(1);
        assert_eq!(residual(&CoefficientField::new(1, 1), &[1.0], &p).sup, 0.0);
        p.eps = 0.0;
        p.delta = 0.0;
        let w = p.omega0().unwrap();
        let r = residual(&base_field(0), &w, &p);
        assert!(r.sup <= 1e-15);
        p.eps = 1e-3;
        p.delta = 1e-3;
        let r = residual(&base_field(0), &w, &p);
        assert!(r.sup > 1e-5 && r.sup < 4.0 * (p.eps + p.delta));
        assert!(r.support <= 3);
        assert_eq!(r.field.asymmetry(), 0.0);
    }

    fn random_field(rng: &mut impl Rng, entries: usize, radius: i64) -> CoefficientField {
        let mut f = CoefficientField::new(1, 1);
        for _ in 0..entries {
            let k = rng.random_range(-radius..=radius);
            let n = rng.random_range(-radius..=radius);
            f.set(&site(k, n), rng.random_range(-1.0..1.0));
        }
        f
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = golden_params(1);
        let w = p.omega0().unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let q = random_field(&mut rng, 6, 2).axpy(1.0, &base_field(0));
            let v = random_field(&mut rng, 4, 2);
            let phi = linearize(&q, p.p);
            // (D + eps Delta) v + delta phi * v
            let mut lin = laplacian(&v).scaled(p.eps).axpy(p.delta, &convolve(&phi, &v));
            for (s, x) in v.canonical_entries() {
                let kw = kdot(&s.k, &w);
                lin.add(s, (p.mu(&s.n).powi(2) - kw * kw) * x);
            }
            let f0 = residual(&q, &w, &p).field;
            let err = |h: f64| {
                let f1 = residual(&q.axpy(h, &v), &w, &p).field;
                f1.axpy(-1.0, &f0).scaled(1.0 / h).max_diff(&lin)
            };
            let (e4, e5) = (err(1e-4), err(1e-5));
            assert!(e5 < e4 && e4 / e5 > 8.0 && e4 / e5 < 12.0, "{e4} {e5}");
        }
    }

    #[test]
    fn time_evaluation() {
        let q = base_field(0);
        let w = [1.7];
        assert_eq!(evaluate_solution(&q, &w, 0.0, &[0]), 1.0);
        for &t in &[0.3, 1.1, 5.0] {
            assert!((evaluate_solution(&q, &w, t, &[0]) - (1.7 * t).cos()).abs() < 1e-15);
            assert_eq!(evaluate_solution(&q, &w, t, &[0]), evaluate_solution(&q, &w, -t, &[0]));
        }
    }

    #[test]
    fn pde_residual_is_time_image_of_lattice_residual() {
        let p = golden_params(1);
        let w = [1.6];
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let q = random_field(&mut rng, 8, 2).scaled(0.3);
        let f = residual(&q, &w, &p).field;
        let ts: Vec<f64> = (0..25).map(|i| 0.37 * i as f64).collect();
        let pde = pde_residual(&q, &w, &p, &ts);
        let mut direct: f64 = 0.0;
        for &t in &ts {
            for n in -4..=4 {
                direct = direct.max(evaluate_solution(&f, &w, t, &[n]).abs());
            }
        }
        assert!((pde - direct).abs() <= 1e-10, "{pde} {direct}");

        let mut p0 = p.clone();
        p0.eps = 0.0;
        p0.delta = 0.0;
        let w0 = p0.omega0().unwrap();
        assert!(pde_residual(&base_field(0), &w0, &p0, &ts) <= 1e-12);
    }

    #[test]
    fn tail_norm() {
        let s = ResonantSet::new(vec![vec![0]]);
        assert_eq!(weighted_tail_norm(&base_field(0), 0.1, &s), 0.0);
        let f = CoefficientField::from_entries(1, 1, [(site(0, 3), -0.2)]);
        assert!((weighted_tail_norm(&f, 0.1, &s) - 0.2 * 0.3f64.exp()).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn powers_compose(seed in 0u64..1000, a in 1u32..3, b in 1u32..3) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let q = random_field(&mut rng, 5, 2);
            let lhs = convolve_power(&q, a + b);
            let rhs = convolve(&convolve_power(&q, a), &convolve_power(&q, b));
            prop_assert!(lhs.max_diff(&rhs) <= 1e-12);
            prop_assert_eq!(lhs.asymmetry(), 0.0);
        }

        #[test]
        fn residual_is_even(seed in 0u64..1000) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let q = random_field(&mut rng, 6, 2);
            let r = residual(&q, &[1.3], &golden_params(1));
            prop_assert_eq!(r.field.asymmetry(), 0.0);
        }
    }
}
