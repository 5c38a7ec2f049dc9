//! Staged Newton construction of the solution: Dirichlet-type P-steps on
//! growing boxes away from the resonant set, alternated with frequency
//! updates from the equations on the resonant set.

use std::collections::BTreeMap;
use std::time::Instant;

use faer::prelude::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{cube, unit, IndexMap, LatticeError, ResonantSet, Site};
use crate::linalg::{self, Backend, LinalgError};
use crate::linop::{assemble_on, line_fit, Kernel};
use crate::nonlin::{convolve_power, neighbours, pde_residual, residual, weighted_tail_norm, CoefficientField};
use crate::spectrum::{kdot, Certificate, ModelParams, SpectrumError};

/// Restricted operators above this size skip the eigenvalue-based
/// conditioning check and fall back to a solve-residual test.
pub const EIGEN_CHECK_LIMIT: usize = 2000;
/// Largest unknown count accepted by the dense oracle.
pub const ORACLE_MAX_UNKNOWNS: usize = 10_000;
/// Entries at or below this magnitude are ignored by `decay_fit`.
pub const DECAY_FLOOR: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Params(#[from] SpectrumError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("restricted operator at stage {stage} is resonant near {site} (condition {condition:.3e})")]
    ResonantBox { stage: u32, site: Site, condition: f64 },
    #[error("residual stagnated at stage {stage} (residual {residual:.3e})")]
    NonConvergence { stage: u32, residual: f64 },
    #[error("frequency equation {index} has non-positive right side {radicand:.3e}")]
    FrequencyCollapse { index: usize, radicand: f64 },
    #[error("oracle Newton iteration failed after {iterations} steps (residual {residual:.3e})")]
    OracleDiverged { iterations: usize, residual: f64 },
    #[error("oracle system has {unknowns} unknowns, above the limit")]
    OracleTooLarge { unknowns: usize },
    #[error("decay fit needs at least 10 off-resonant entries, found {points}")]
    InsufficientData { points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Box growth base: stage `r` works on `[-M^r, M^r]^{b+d}`.
    pub scale: u64,
    pub r_max: u32,
    /// Cap on the box half-width.
    pub max_box: u64,
    pub residual_floor: f64,
    pub q_update_damping: f64,
    pub backend: Backend,
    /// Frequency sweeps stop once `|d omega| < q_tolerance * residual`.
    pub q_tolerance: f64,
    pub condition_limit: f64,
    pub stagnation_ratio: f64,
    pub stagnation_stages: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scale: 3,
            r_max: 6,
            max_box: 12,
            residual_floor: 1e-12,
            q_update_damping: 1.0,
            backend: Backend::Auto,
            q_tolerance: 1e-2,
            condition_limit: 1e14,
            stagnation_ratio: 0.9,
            stagnation_stages: 3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if self.scale < 2 {
            return bad("scale must be at least 2");
        }
        if self.max_box == 0 {
            return bad("max_box must be positive");
        }
        if !(self.residual_floor > 0.0) {
            return bad("residual_floor must be positive");
        }
        if !(self.q_update_damping > 0.0 && self.q_update_damping <= 1.0) {
            return bad("q_update_damping must lie in (0, 1]");
        }
        if !(self.q_tolerance > 0.0) || !(self.condition_limit > 1.0) {
            return bad("q_tolerance and condition_limit must be positive");
        }
        if !(self.stagnation_ratio > 0.0 && self.stagnation_ratio <= 1.0) || self.stagnation_stages == 0 {
            return bad("stagnation_ratio must lie in (0, 1] and stagnation_stages be positive");
        }
        Ok(())
    }

    /// Half-width of the stage-`r` box.
    pub fn box_size(&self, r: u32) -> u64 {
        self.scale.checked_pow(r).unwrap_or(u64::MAX).min(self.max_box)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: u32,
    /// Half-width of the box, 0 for the initial frequency step.
    pub box_size: u64,
    pub increment_norm: f64,
    pub residual_sup: f64,
    pub residual_l1: f64,
    pub omega: Vec<f64>,
    pub decay_rate: Option<f64>,
    pub condition: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub stages: Vec<StageRecord>,
}

impl IterationTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.residual_sup).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub weighted_tail: f64,
    pub tail_bound: f64,
    pub pde_residual: f64,
    pub anchor_defect: f64,
    pub asymmetry: f64,
    pub residual_sup: f64,
    pub residual_l1: f64,
    pub omega_shift: f64,
    pub decay_rate: Option<f64>,
}

/// Weight exponent of the tail norm reported in the quality block.
pub const TAIL_RHO: f64 = 0.1;

impl Quality {
    pub fn evaluate(q: &CoefficientField, omega: &[f64], params: &ModelParams) -> Result<Self, SolverError> {
        let s = params.resonant_set();
        let res = residual(q, omega, params);
        let omega0 = params.omega0()?;
        let omega_shift = omega.iter().zip(&omega0).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        Ok(Self {
            weighted_tail: weighted_tail_norm(q, TAIL_RHO, &s),
            tail_bound: (params.eps + params.delta).sqrt(),
            pde_residual: pde_residual(q, omega, params, &sample_times(100)),
            anchor_defect: anchor_defect(q, params),
            asymmetry: q.asymmetry(),
            residual_sup: res.sup,
            residual_l1: res.l1,
            omega_shift,
            decay_rate: decay_fit(q, &s).ok().map(|f| f.rate),
        })
    }

    pub fn tail_ok(&self) -> bool {
        self.weighted_tail < self.tail_bound
    }
}

/// Deterministic sample times spread over `[0, 100)`.
pub fn sample_times(count: usize) -> Vec<f64> {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    (1..=count).map(|j| 100.0 * (j as f64 * golden).fract()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub q: CoefficientField,
    pub omega: Vec<f64>,
    pub params: ModelParams,
    pub trace: IterationTrace,
    pub certificates: Vec<Certificate>,
    pub quality: Quality,
    pub converged: bool,
}

fn anchor_site(params: &ModelParams, l: usize) -> Site {
    Site::new(unit(params.b(), l), params.anchors[l].clone())
}

/// Largest deviation of `q` on the resonant set from `a_l / 2`.
pub fn anchor_defect(q: &CoefficientField, params: &ModelParams) -> f64 {
    (0..params.b())
        .map(|l| {
            let s = anchor_site(params, l);
            let half = params.amplitudes[l] / 2.0;
            (q.get(&s) - half).abs().max((q.get(&s.mirror()) - half).abs())
        })
        .fold(0.0, f64::max)
}

/// `q(+-e_l, n^(l)) = a_l / 2` and zero elsewhere.
pub fn initial_field(params: &ModelParams) -> CoefficientField {
    let mut q = CoefficientField::new(params.b(), params.d());
    for l in 0..params.b() {
        q.set(&anchor_site(params, l), params.amplitudes[l] / 2.0);
    }
    q
}

/// Right sides of the frequency equations,
/// `mu^2 + (2 / a_l) (eps (Delta q) + delta q^{*(p+1)})` at `(e_l, n^(l))`.
pub fn frequency_targets(q: &CoefficientField, params: &ModelParams) -> Vec<f64> {
    let power = if params.delta != 0.0 { Some(convolve_power(q, params.p + 1)) } else { None };
    (0..params.b())
        .map(|l| {
            let s = anchor_site(params, l);
            let lap: f64 = neighbours(&s.n).map(|n| q.get_kn(&s.k, &n)).sum();
            let nl = power.as_ref().map_or(0.0, |pw| pw.get(&s));
            let mu = params.mu(&s.n);
            mu * mu + (2.0 / params.amplitudes[l]) * (params.eps * lap + params.delta * nl)
        })
        .collect()
}

/// Solves the frequency equations for `omega` with `q` frozen.
///
/// The iteration runs on `omega^2`; with `damping = 1` the first sweep is
/// already the fixed point because the right side does not depend on
/// `omega` once `q` is fixed.
pub fn q_step(
    q: &CoefficientField,
    omega: &[f64],
    params: &ModelParams,
    damping: f64,
    tolerance: f64,
) -> Result<Vec<f64>, SolverError> {
    let targets = frequency_targets(q, params);
    if let Some((index, &radicand)) = targets.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
        return Err(SolverError::FrequencyCollapse { index, radicand });
    }
    let mut sq: Vec<f64> = omega.iter().map(|w| w * w).collect();
    let mut cur = omega.to_vec();
    for _ in 0..10_000 {
        for (s, t) in sq.iter_mut().zip(&targets) {
            *s += damping * (t - *s);
        }
        let next: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
        let change = next.iter().zip(&cur).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        cur = next;
        if change <= tolerance {
            break;
        }
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PStep {
    pub increment: CoefficientField,
    /// Eigenvalue condition number, when it was computed.
    pub condition: Option<f64>,
}

/// `Delta q = -H^{-1} F(q)` with `H = D(0) + eps Delta + delta T_q` restricted
/// to `[-box, box]^{b+d}` minus the resonant set.
pub fn p_step(
    q: &CoefficientField,
    omega: &[f64],
    params: &ModelParams,
    stage: u32,
    box_size: u64,
    config: &SolverConfig,
) -> Result<PStep, SolverError> {
    let s = params.resonant_set();
    let index = IndexMap::new(&cube(box_size, params.b(), params.d()).excluding(s))?;
    let f = residual(q, omega, params).field;
    let rhs: Vec<f64> = index.sites().iter().map(|site| -f.get(site)).collect();
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(PStep { increment: CoefficientField::new(params.b(), params.d()), condition: None });
    }
    let kernel = if params.delta != 0.0 { Kernel::from_field(q, params.p) } else { Kernel::zero() };
    let asm = assemble_on(index, 0.0, omega, params, &kernel);
    let trip = asm.triplets();
    let n = trip.len();

    let mut condition = None;
    if n <= EIGEN_CHECK_LIMIT {
        let (vals, vecs) = linalg::sym_eigen(&trip.to_dense())?;
        let (imin, min_abs) =
            vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if v.abs() < acc.1 { (i, v.abs()) } else { acc });
        let max_abs = vals.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let cond = if min_abs > 0.0 { max_abs / min_abs } else { f64::INFINITY };
        if !(cond <= config.condition_limit) {
            let site = (0..n).fold(0, |best, i| if vecs[(i, imin)].abs() > vecs[(best, imin)].abs() { i } else { best });
            return Err(SolverError::ResonantBox { stage, site: asm.index.site(site).clone(), condition: cond });
        }
        condition = Some(cond);
    }
    let resonant = |condition: f64| {
        let diag = trip.diag.clone();
        let i = (0..n).fold(0, |best, i| if diag[i].abs() < diag[best].abs() { i } else { best });
        SolverError::ResonantBox { stage, site: asm.index.site(i).clone(), condition }
    };
    let x = linalg::solve(&trip, &rhs, config.backend).map_err(|_| resonant(f64::INFINITY))?;
    if condition.is_none() {
        // No spectral information: judge the solve by its backward error.
        let ax = trip.matvec(&x);
        let err = ax.iter().zip(&rhs).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let scale = rhs.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if err > 1e-8 * scale {
            return Err(resonant(f64::INFINITY));
        }
    }

    let mut increment = CoefficientField::new(params.b(), params.d());
    for (i, site) in asm.index.sites().iter().enumerate() {
        let mirror = site.mirror();
        if mirror < *site {
            continue;
        }
        let j = asm.index.get(&mirror).unwrap_or(i);
        increment.set(site, 0.5 * (x[i] + x[j]));
    }
    Ok(PStep { increment, condition })
}

fn record(
    stage: u32,
    box_size: u64,
    increment_norm: f64,
    q: &CoefficientField,
    omega: &[f64],
    params: &ModelParams,
    condition: Option<f64>,
    start: Instant,
) -> StageRecord {
    let res = residual(q, omega, params);
    StageRecord {
        stage,
        box_size,
        increment_norm,
        residual_sup: res.sup,
        residual_l1: res.l1,
        omega: omega.to_vec(),
        decay_rate: decay_fit(q, &params.resonant_set()).ok().map(|f| f.rate),
        condition,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the staged construction.
///
/// Stage 0 is the closed-form frequency step on the initial field; stage
/// `r >= 1` is a P-step on the box of half-width `min(M^r, max_box)`
/// followed by a frequency solve.
pub fn solve(params: &ModelParams, config: &SolverConfig) -> Result<Solution, SolverError> {
    params.validate()?;
    config.validate()?;
    let start = Instant::now();
    let omega0 = params.omega0()?;
    let mut q = initial_field(params);
    let res0 = residual(&q, &omega0, params).sup;
    let mut omega = q_step(&q, &omega0, params, config.q_update_damping, config.q_tolerance * res0)?;
    let mut trace = IterationTrace::default();
    trace.stages.push(record(0, 0, 0.0, &q, &omega, params, None, start));

    let mut prev = trace.stages[0].residual_sup;
    let mut converged = prev <= config.residual_floor;
    let mut slow = 0;
    let mut r = 1;
    while !converged && r <= config.r_max {
        let box_size = config.box_size(r);
        let step = p_step(&q, &omega, params, r, box_size, config)?;
        q = q.axpy(1.0, &step.increment);
        omega = q_step(&q, &omega, params, config.q_update_damping, config.q_tolerance * prev)?;
        let rec = record(r, box_size, step.increment.sup_norm(), &q, &omega, params, step.condition, start);
        let cur = rec.residual_sup;
        trace.stages.push(rec);
        converged = cur <= config.residual_floor;
        if !converged {
            slow = if cur >= config.stagnation_ratio * prev { slow + 1 } else { 0 };
            if slow >= config.stagnation_stages {
                return Err(SolverError::NonConvergence { stage: r, residual: cur });
            }
        }
        prev = cur;
        r += 1;
    }
    let quality = Quality::evaluate(&q, &omega, params)?;
    Ok(Solution { q, omega, params: params.clone(), trace, certificates: Vec::new(), quality, converged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of `log |q(k, n)|` against `|k| + |n|` over the entries
/// off the resonant set; the rate is minus the slope.
pub fn decay_fit(q: &CoefficientField, s: &ResonantSet) -> Result<DecayFit, SolverError> {
    let pts: Vec<(f64, f64)> = q
        .full_entries()
        .iter()
        .filter(|(site, v)| !s.contains(site) && v.abs() > DECAY_FLOOR)
        .map(|(site, v)| ((site.k_norm() + site.n_norm()) as f64, v.abs().ln()))
        .collect();
    if pts.len() < 10 {
        return Err(SolverError::InsufficientData { points: pts.len() });
    }
    let (slope, intercept, residual) = line_fit(&pts).ok_or(SolverError::InsufficientData { points: pts.len() })?;
    Ok(DecayFit { rate: -slope, intercept, residual, points: pts.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub q: CoefficientField,
    pub omega: Vec<f64>,
    pub iterations: usize,
    /// Sup norm of the full system residual after each iterate.
    pub residual_history: Vec<f64>,
}

impl OracleSolution {
    pub fn residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

/// Convergence tolerance of the oracle on the sup norm of its residual.
pub const ORACLE_TOL: f64 = 1e-13;

/// Truncated system on `cube(L)`: values at every site, unknowns off the
/// resonant set, equations off the resonant set plus one per anchor.
struct OracleSystem<'a> {
    params: &'a ModelParams,
    sites: Vec<Site>,
    pos: BTreeMap<Site, usize>,
    unknown: Vec<usize>,
    rows: Vec<usize>,
}

type Slice = BTreeMap<Vec<i64>, f64>;

fn slice_product(a: &Slice, b: &Slice) -> Slice {
    let mut out = Slice::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<i64> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_insert(0.0) += va * vb;
        }
    }
    out
}

impl<'a> OracleSystem<'a> {
    fn new(params: &'a ModelParams, l: u64) -> Result<Self, SolverError> {
        let s = params.resonant_set();
        let sites = cube(l, params.b(), params.d()).members()?;
        let pos: BTreeMap<Site, usize> = sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let unknown: Vec<usize> = (0..sites.len()).filter(|&i| !s.contains(&sites[i])).collect();
        let mut rows = unknown.clone();
        rows.extend((0..params.b()).map(|l| pos[&anchor_site(params, l)]));
        Ok(Self { params, sites, pos, unknown, rows })
    }

    fn len(&self) -> usize {
        self.unknown.len() + self.params.b()
    }

    fn slices(&self, vals: &[f64]) -> BTreeMap<Vec<i64>, Slice> {
        let mut out: BTreeMap<Vec<i64>, Slice> = BTreeMap::new();
        for (s, &v) in self.sites.iter().zip(vals) {
            if v != 0.0 {
                out.entry(s.n.clone()).or_default().insert(s.k.clone(), v);
            }
        }
        out
    }

    fn powers(&self, vals: &[f64], order: u32) -> BTreeMap<Vec<i64>, Slice> {
        self.slices(vals)
            .into_iter()
            .map(|(n, sl)| {
                let mut acc = sl.clone();
                for _ in 1..order {
                    acc = slice_product(&acc, &sl);
                }
                (n, acc)
            })
            .collect()
    }

    fn value(&self, vals: &[f64], k: &[i64], n: &[i64]) -> f64 {
        self.pos.get(&Site::new(k.to_vec(), n.to_vec())).map_or(0.0, |&i| vals[i])
    }

    fn equations(&self, vals: &[f64], omega: &[f64]) -> Vec<f64> {
        let p = self.params;
        let high = self.powers(vals, p.p + 1);
        self.rows
            .iter()
            .map(|&i| {
                let s = &self.sites[i];
                let mu = p.mu(&s.n);
                let kw = kdot(&s.k, omega);
                let lap: f64 = neighbours(&s.n).map(|m| self.value(vals, &s.k, &m)).sum();
                let nl = high.get(&s.n).and_then(|sl| sl.get(&s.k)).copied().unwrap_or(0.0);
                (mu * mu - kw * kw) * vals[i] + p.eps * lap + p.delta * nl
            })
            .collect()
    }

    fn jacobian(&self, vals: &[f64], omega: &[f64]) -> Mat<f64> {
        let p = self.params;
        let lower = if p.p == 0 { None } else { Some(self.powers(vals, p.p)) };
        let col: BTreeMap<usize, usize> = self.unknown.iter().enumerate().map(|(c, &i)| (i, c)).collect();
        let nq = self.unknown.len();
        let mut jac = Mat::<f64>::zeros(self.rows.len(), self.len());
        for (r, &i) in self.rows.iter().enumerate() {
            let s = &self.sites[i];
            let mu = p.mu(&s.n);
            let kw = kdot(&s.k, omega);
            if let Some(&c) = col.get(&i) {
                jac[(r, c)] += mu * mu - kw * kw;
            }
            for m in neighbours(&s.n) {
                if let Some(c) = self.pos.get(&Site::new(s.k.clone(), m)).and_then(|j| col.get(j)) {
                    jac[(r, *c)] += p.eps;
                }
            }
            for (&j, &c) in &col {
                let t = &self.sites[j];
                if t.n != s.n {
                    continue;
                }
                let dk: Vec<i64> = s.k.iter().zip(&t.k).map(|(a, b)| a - b).collect();
                let w = match &lower {
                    Some(low) => low.get(&s.n).and_then(|sl| sl.get(&dk)).copied().unwrap_or(0.0),
                    None => {
                        if dk.iter().all(|&x| x == 0) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                jac[(r, c)] += p.delta * (p.p + 1) as f64 * w;
            }
            for (l, &kl) in s.k.iter().enumerate() {
                jac[(r, nq + l)] = -2.0 * kw * kl as f64 * vals[i];
            }
        }
        jac
    }

    fn field(&self, vals: &[f64]) -> CoefficientField {
        let mut q = CoefficientField::new(self.params.b(), self.params.d());
        for (i, s) in self.sites.iter().enumerate() {
            let m = s.mirror();
            if m < *s {
                continue;
            }
            let j = self.pos[&m];
            q.set(s, 0.5 * (vals[i] + vals[j]));
        }
        q
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Dense damped Newton on the full truncated system over `cube(L)`, from
/// the initial field and `omega^(0)`.
pub fn brute_force_oracle(params: &ModelParams, l: u64) -> Result<OracleSolution, SolverError> {
    params.validate()?;
    let sys = OracleSystem::new(params, l)?;
    if sys.len() > ORACLE_MAX_UNKNOWNS {
        return Err(SolverError::OracleTooLarge { unknowns: sys.len() });
    }
    let q0 = initial_field(params);
    let mut vals: Vec<f64> = sys.sites.iter().map(|s| q0.get(s)).collect();
    let mut omega = params.omega0()?;
    let mut f = sys.equations(&vals, &omega);
    let mut norm = sup(&f);
    let mut history = vec![norm];
    let nq = sys.unknown.len();
    let mut iterations = 0;
    while norm > ORACLE_TOL {
        if iterations >= 50 {
            return Err(SolverError::OracleDiverged { iterations, residual: norm });
        }
        let jac = sys.jacobian(&vals, &omega);
        let rhs = Mat::<f64>::from_fn(f.len(), 1, |i, _| -f[i]);
        let dx = jac.partial_piv_lu().solve(&rhs);
        if (0..dx.nrows()).any(|i| !dx[(i, 0)].is_finite()) {
            return Err(SolverError::OracleDiverged { iterations, residual: norm });
        }
        let mut lambda = 1.0;
        let accepted = loop {
            let mut trial = vals.clone();
            for (c, &i) in sys.unknown.iter().enumerate() {
                trial[i] += lambda * dx[(c, 0)];
            }
            let w: Vec<f64> = omega.iter().enumerate().map(|(l, w)| w + lambda * dx[(nq + l, 0)]).collect();
            let tf = sys.equations(&trial, &w);
            let tn = sup(&tf);
            if tn < (1.0 - 1e-4 * lambda) * norm {
                break Some((trial, w, tf, tn));
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((v, w, tf, tn)) => {
                vals = v;
                omega = w;
                f = tf;
                norm = tn;
                history.push(norm);
            }
            None => return Err(SolverError::OracleDiverged { iterations, residual: norm }),
        }
    }
    Ok(OracleSolution { q: sys.field(&vals), omega, iterations, residual_history: history })
}
