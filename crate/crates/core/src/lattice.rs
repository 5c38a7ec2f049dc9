//! Index geometry on `Z^b x Z^d`: sites, the resonant set, elementary
//! regions and the site <-> row maps used for matrix assembly.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Materialization limit for region member lists.
pub const MAX_MATERIALIZED_SITES: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("region has no member sites")]
    EmptyRegion,
    #[error("site {0} is not a member of the region")]
    OutOfRegion(Site),
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("region bounding box has {0} sites, above the materialization limit")]
    TooLarge(u128),
}

/// A lattice point `(k, n)`: `k` indexes the cosine mode, `n` the spatial site.
///
/// The derived ordering is lexicographic on the concatenation `(k, n)`
/// because `k` has the same length for every site of a given lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub k: Vec<i64>,
    pub n: Vec<i64>,
}

impl Site {
    pub fn new(k: Vec<i64>, n: Vec<i64>) -> Self {
        Self { k, n }
    }

    pub fn from_concat(v: &[i64], b: usize) -> Self {
        Self { k: v[..b].to_vec(), n: v[b..].to_vec() }
    }

    pub fn concat(&self) -> Vec<i64> {
        self.k.iter().chain(self.n.iter()).copied().collect()
    }

    pub fn k_norm(&self) -> i64 {
        sup_norm(&self.k)
    }

    pub fn n_norm(&self) -> i64 {
        sup_norm(&self.n)
    }

    /// `|(k, n)|`, the sup norm over all `b + d` entries.
    pub fn norm(&self) -> i64 {
        self.k_norm().max(self.n_norm())
    }

    /// `(-k, n)`.
    pub fn mirror(&self) -> Self {
        Self { k: self.k.iter().map(|x| -x).collect(), n: self.n.clone() }
    }

    /// Sup-norm distance between two sites.
    pub fn dist(&self, other: &Site) -> i64 {
        let dk = self.k.iter().zip(&other.k).map(|(a, b)| (a - b).abs());
        let dn = self.n.iter().zip(&other.n).map(|(a, b)| (a - b).abs());
        dk.chain(dn).max().unwrap_or(0)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={:?}, n={:?})", self.k, self.n)
    }
}

pub fn sup_norm(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// All integer vectors of length `dim` with sup norm at most `radius`, in
/// lexicographic order.
pub fn box_points(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-radius..=radius).map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

/// Unit vector `e_l` in `Z^b`.
pub fn unit(b: usize, l: usize) -> Vec<i64> {
    let mut e = vec![0; b];
    e[l] = 1;
    e
}

/// The resonant set `{(+-e_l, n^(l))}` built from `b` anchor sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonantSet {
    anchors: Vec<Vec<i64>>,
}

impl ResonantSet {
    pub fn new(anchors: Vec<Vec<i64>>) -> Self {
        Self { anchors }
    }

    pub fn anchors(&self) -> &[Vec<i64>] {
        &self.anchors
    }

    pub fn b(&self) -> usize {
        self.anchors.len()
    }

    /// The `2b` members, ordered as `(e_1, n^1), (-e_1, n^1), (e_2, n^2), ...`.
    pub fn members(&self) -> Vec<Site> {
        let b = self.b();
        let mut out = Vec::with_capacity(2 * b);
        for (l, n) in self.anchors.iter().enumerate() {
            let e = unit(b, l);
            let site = Site::new(e, n.clone());
            out.push(site.mirror());
            out.push(site);
        }
        out.sort();
        out
    }

    pub fn contains(&self, site: &Site) -> bool {
        if site.k.len() != self.b() {
            return false;
        }
        self.anchors.iter().enumerate().any(|(l, n)| {
            *n == site.n
                && site
                    .k
                    .iter()
                    .enumerate()
                    .all(|(i, &ki)| if i == l { ki.abs() == 1 } else { ki == 0 })
        })
    }

    /// Index `l` of the anchor whose spatial site is `n`, if any.
    pub fn anchor_index(&self, n: &[i64]) -> Option<usize> {
        self.anchors.iter().position(|a| a.as_slice() == n)
    }
}

/// An elementary region `R_w(c) \ (R_w(c) + z)`, optionally minus a resonant set.
///
/// An all-zero shift denotes the full rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub b: usize,
    pub center: Vec<i64>,
    pub half_widths: Vec<u64>,
    pub shift: Vec<i64>,
    pub excluded: Option<ResonantSet>,
}

impl RegionSpec {
    pub fn rectangle(b: usize, center: Vec<i64>, half_widths: Vec<u64>) -> Self {
        let dim = center.len();
        Self { b, center, half_widths, shift: vec![0; dim], excluded: None }
    }

    pub fn with_shift(mut self, shift: Vec<i64>) -> Self {
        self.shift = shift;
        self
    }

    pub fn excluding(mut self, set: ResonantSet) -> Self {
        self.excluded = Some(set);
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn d(&self) -> usize {
        self.dim() - self.b
    }

    fn validate(&self) -> Result<(), LatticeError> {
        let dim = self.dim();
        for len in [self.half_widths.len(), self.shift.len()] {
            if len != dim {
                return Err(LatticeError::DimensionMismatch { expected: dim, got: len });
            }
        }
        if let Some(s) = &self.excluded {
            if s.b() != self.b {
                return Err(LatticeError::DimensionMismatch { expected: self.b, got: s.b() });
            }
        }
        Ok(())
    }

    fn in_rect(&self, v: &[i64], offset: &[i64]) -> bool {
        v.iter()
            .zip(&self.center)
            .zip(&self.half_widths)
            .zip(offset)
            .all(|(((x, c), w), z)| (x - c - z).unsigned_abs() <= *w)
    }

    /// Membership predicate.
    pub fn contains(&self, site: &Site) -> bool {
        if site.k.len() != self.b || site.n.len() != self.d() {
            return false;
        }
        let v = site.concat();
        if !self.in_rect(&v, &vec![0; v.len()]) {
            return false;
        }
        if self.shift.iter().any(|&z| z != 0) && self.in_rect(&v, &self.shift) {
            return false;
        }
        !self.excluded.as_ref().is_some_and(|s| s.contains(site))
    }

    /// Member sites in lexicographic order of the concatenated `(k, n)` vector.
    pub fn members(&self) -> Result<Vec<Site>, LatticeError> {
        self.validate()?;
        let count: u128 = self.half_widths.iter().map(|w| 2 * *w as u128 + 1).product();
        if count > MAX_MATERIALIZED_SITES as u128 {
            return Err(LatticeError::TooLarge(count));
        }
        let lo: Vec<i64> = self.center.iter().zip(&self.half_widths).map(|(c, w)| c - *w as i64).collect();
        let hi: Vec<i64> = self.center.iter().zip(&self.half_widths).map(|(c, w)| c + *w as i64).collect();
        let mut out = Vec::new();
        let mut cur = lo.clone();
        loop {
            let site = Site::from_concat(&cur, self.b);
            if self.contains(&site) {
                out.push(site);
            }
            // odometer increment, last coordinate fastest
            let mut i = cur.len();
            loop {
                if i == 0 {
                    if out.is_empty() {
                        return Err(LatticeError::EmptyRegion);
                    }
                    return Ok(out);
                }
                i -= 1;
                if cur[i] < hi[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = lo[i];
            }
        }
    }

    /// Sup-norm diameter of the member set.
    pub fn diameter(&self) -> Result<i64, LatticeError> {
        let sites = self.members()?;
        let dim = self.dim();
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for s in &sites {
            for (i, x) in s.concat().into_iter().enumerate() {
                lo[i] = lo[i].min(x);
                hi[i] = hi[i].max(x);
            }
        }
        Ok(lo.iter().zip(&hi).map(|(a, b)| b - a).max().unwrap_or(0))
    }
}

/// The cube `Lambda_L` of radius `L` centred at the origin.
pub fn cube(l: u64, b: usize, d: usize) -> RegionSpec {
    RegionSpec::rectangle(b, vec![0; b + d], vec![l; b + d])
}

/// A materialized region with its bijection `Site <-> 0..N`.
#[derive(Debug, Clone)]
pub struct IndexMap {
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl IndexMap {
    pub fn new(spec: &RegionSpec) -> Result<Self, LatticeError> {
        Ok(Self::from_sites(spec.members()?))
    }

    /// Builds the map from an explicit list. The list is sorted and deduplicated.
    pub fn from_sites(mut sites: Vec<Site>) -> Self {
        sites.sort();
        sites.dedup();
        let index = sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self { sites, index }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn index_of(&self, site: &Site) -> Result<usize, LatticeError> {
        self.get(site).ok_or_else(|| LatticeError::OutOfRegion(site.clone()))
    }

    pub fn get(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cube_sizes() {
        assert_eq!(cube(1, 1, 1).members().unwrap().len(), 9);
        assert_eq!(cube(2, 1, 2).members().unwrap().len(), 125);
        let s = ResonantSet::new(vec![vec![0]]);
        assert_eq!(cube(1, 1, 1).excluding(s).members().unwrap().len(), 7);
    }

    #[test]
    fn members_are_lexicographic() {
        let m = RegionSpec::rectangle(1, vec![0, 0], vec![1, 1]).members().unwrap();
        assert_eq!(m.len(), 9);
        assert!(m.windows(2).all(|w| w[0].concat() < w[1].concat()));
        assert_eq!(m[0], Site::new(vec![-1], vec![-1]));
    }

    #[test]
    fn shifted_rectangle_by_brute_force() {
        let spec = RegionSpec::rectangle(1, vec![0, 0], vec![1, 1]).with_shift(vec![1, 0]);
        let got = spec.members().unwrap();
        // brute force: R minus (R + z)
        let mut want = Vec::new();
        for k in -1..=1i64 {
            for n in -1..=1i64 {
                let in_shift = (k - 1).abs() <= 1 && n.abs() <= 1;
                if !in_shift {
                    want.push(Site::new(vec![k], vec![n]));
                }
            }
        }
        assert_eq!(got, want);
        assert!(got.iter().all(|s| s.k == vec![-1]));
    }

    #[test]
    fn disjoint_shift_keeps_single_site() {
        let spec = RegionSpec::rectangle(1, vec![0, 0], vec![0, 0]).with_shift(vec![1, 1]);
        assert_eq!(spec.members().unwrap(), vec![Site::new(vec![0], vec![0])]);
    }

    #[test]
    fn empty_region_is_an_error() {
        let s = ResonantSet::new(vec![vec![0]]);
        let spec = RegionSpec::rectangle(1, vec![1, 0], vec![0, 0]).excluding(s);
        assert_eq!(spec.members(), Err(LatticeError::EmptyRegion));
    }

    #[test]
    fn index_map_round_trip_and_exclusion() {
        let s = ResonantSet::new(vec![vec![0]]);
        let spec = cube(1, 1, 1).excluding(s.clone());
        let map = IndexMap::new(&spec).unwrap();
        let origin = Site::new(vec![0], vec![0]);
        let i = map.index_of(&origin).unwrap();
        assert_eq!(map.site(i), &origin);
        for m in s.members() {
            assert_eq!(map.index_of(&m), Err(LatticeError::OutOfRegion(m.clone())));
        }
    }

    #[test]
    fn resonant_set_shape() {
        let s = ResonantSet::new(vec![vec![0, 1], vec![2, -1]]);
        let m = s.members();
        assert_eq!(m.len(), 4);
        for site in &m {
            assert!(s.contains(site));
            assert!(s.contains(&site.mirror()));
        }
        assert!(!s.contains(&Site::new(vec![1, 1], vec![0, 1])));
        assert!(!s.contains(&Site::new(vec![0, 1], vec![0, 1])));
    }

    #[test]
    fn diameter_of_corner_removed_square() {
        let spec = RegionSpec::rectangle(1, vec![0, 0], vec![3, 3]).with_shift(vec![3, 3]);
        assert_eq!(spec.diameter().unwrap(), 6);
    }

    proptest! {
        #[test]
        fn region_invariants(
            w in prop::collection::vec(0u64..3, 2),
            z in prop::collection::vec(-4i64..5, 2),
            c in prop::collection::vec(-2i64..3, 2),
        ) {
            let base = RegionSpec::rectangle(1, c.clone(), w.clone());
            let spec = base.clone().with_shift(z.clone()).excluding(ResonantSet::new(vec![vec![0]]));
            match spec.members() {
                Ok(sites) => {
                    let map = IndexMap::new(&spec).unwrap();
                    for (i, s) in sites.iter().enumerate() {
                        prop_assert!(base.contains(s));
                        prop_assert_eq!(map.index_of(s).unwrap(), i);
                        if z.iter().any(|&x| x != 0) {
                            let shifted = RegionSpec::rectangle(1, c.iter().zip(&z).map(|(a, b)| a + b).collect(), w.clone());
                            prop_assert!(!shifted.contains(s));
                        }
                        prop_assert!(!ResonantSet::new(vec![vec![0]]).contains(s));
                    }
                }
                Err(e) => prop_assert_eq!(e, LatticeError::EmptyRegion),
            }
        }

        #[test]
        fn cube_count(l in 1u64..4, b in 1usize..3, d in 1usize..3) {
            let n = cube(l, b, d).members().unwrap().len() as u64;
            prop_assert_eq!(n, (2 * l + 1).pow((b + d) as u32));
        }
    }
}
