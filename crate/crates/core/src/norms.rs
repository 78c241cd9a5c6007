//! Norms of random variables and of weighted sums of independent copies:
//! the B(phi) norm through its supremum formula, L_p norms by exact
//! enumeration, lattice convolution, quadrature or Monte Carlo, and GLS norms.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use crate::coeffs::CoefficientVector;
use crate::dist::{collapse, stream_rng, Distribution, Law, SUPPORT_MERGE_TOL};
use crate::error::{Error, Result};
use crate::genfun::{GeneratingFunction, PsiFunction};
use crate::numeric::{geometric_grid, golden_max};

/// Default state budget for exact enumeration and convolution supports.
pub const DEFAULT_BUDGET: usize = 1 << 22;
/// Auto prefers enumeration up to this many states and convolution beyond.
pub const AUTO_ENUM_STATES: f64 = 4096.0;
/// Monte Carlo draws are generated in chunks, one RNG sub-stream per chunk.
pub const MC_CHUNK: usize = 1 << 14;

/// Anything with a log moment generating function and a variance.
pub trait CumulantSource: Sync {
    fn ln_mgf(&self, lambda: f64) -> f64;
    fn variance(&self) -> f64;
}

impl CumulantSource for Distribution {
    fn ln_mgf(&self, lambda: f64) -> f64 {
        Distribution::ln_mgf(self, lambda)
    }

    fn variance(&self) -> f64 {
        Distribution::variance(self)
    }
}

/// `sum_k c_k X_k` for independent `X_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndependentSum {
    terms: Vec<(Distribution, f64)>,
}

impl IndependentSum {
    pub fn new(terms: Vec<(Distribution, f64)>) -> Self {
        IndependentSum { terms }
    }

    pub fn single(d: &Distribution) -> Self {
        Self::new(vec![(d.clone(), 1.0)])
    }

    /// `S_n = sum a_k xi_k` with i.i.d. `xi_k ~ d`.
    pub fn weighted(d: &Distribution, a: &CoefficientVector) -> Self {
        Self::new(a.entries().iter().map(|&c| (d.clone(), c)).collect())
    }

    /// `S_n = sum a_k xi_k` with `xi_k ~ laws[k mod len]`.
    pub fn mixed(laws: &[Distribution], a: &CoefficientVector) -> Self {
        Self::new(
            a.entries()
                .iter()
                .enumerate()
                .map(|(k, &c)| (laws[k % laws.len()].clone(), c))
                .collect(),
        )
    }

    /// Terms with a nonzero coefficient.
    pub fn active(&self) -> impl Iterator<Item = &(Distribution, f64)> {
        self.terms.iter().filter(|(_, c)| *c != 0.0)
    }

    pub fn terms(&self) -> &[(Distribution, f64)] {
        &self.terms
    }

    fn all_gaussian(&self) -> bool {
        self.active().all(|(d, _)| matches!(d.law(), Law::Gaussian { .. }))
    }

    fn sd(&self) -> f64 {
        self.variance().sqrt()
    }
}

impl CumulantSource for IndependentSum {
    fn ln_mgf(&self, lambda: f64) -> f64 {
        self.active().map(|(d, c)| d.ln_mgf(c * lambda)).sum()
    }

    fn variance(&self) -> f64 {
        self.active().map(|(d, c)| c * c * d.variance()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactEnum,
    Convolution,
    MonteCarlo,
    Quadrature,
    GridSup,
}

impl Method {
    pub fn is_exact(self) -> bool {
        self != Method::MonteCarlo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Auto,
    ExactEnum,
    Convolution,
    MonteCarlo,
    Quadrature,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "auto" => Ok(Engine::Auto),
            "exact_enum" | "exact" | "enum" => Ok(Engine::ExactEnum),
            "convolution" | "conv" => Ok(Engine::Convolution),
            "monte_carlo" | "mc" => Ok(Engine::MonteCarlo),
            "quadrature" => Ok(Engine::Quadrature),
            other => Err(Error::parse("engine", format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EngineConfig {
    pub engine: Engine,
    /// Max enumerated states / convolution support size.
    pub budget: usize,
    /// Monte Carlo draws.
    pub samples: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            engine: Engine::Auto,
            budget: DEFAULT_BUDGET,
            samples: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub method: Method,
    /// Half-width of the reported band; zero for exact methods.
    #[serde(rename = "ci")]
    pub ci_halfwidth: f64,
    pub meta: BTreeMap<String, Value>,
}

impl NormEstimate {
    fn exact(value: f64, method: Method) -> Self {
        NormEstimate {
            value,
            method,
            ci_halfwidth: 0.0,
            meta: BTreeMap::new(),
        }
    }

    pub fn exact_value(value: f64) -> Self {
        Self::exact(value, Method::Quadrature)
    }

    fn with(mut self, key: &str, v: Value) -> Self {
        self.meta.insert(key.to_string(), v);
        self
    }
}

// ---------------------------------------------------------------------------
// B(phi)

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_decade: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lo: 1e-4,
            hi: 1e3,
            per_decade: 64,
        }
    }
}

/// `||zeta||_{B(phi)} = max_{+-} sup_{0 < lambda < lambda0} phi^{-1}(ln E e^{+-lambda zeta}) / lambda`.
///
/// The `lambda -> 0` limit `sqrt(Var / (2 lim phi(lambda)/lambda^2))` is always
/// a candidate; the grid maximum is refined by golden section in `ln lambda`.
pub fn bphi_norm<S: CumulantSource + ?Sized>(
    src: &S,
    phi: &GeneratingFunction,
    grid: &LambdaGrid,
) -> Result<NormEstimate> {
    let l0 = phi.lambda0();
    let ratio = |lambda: f64| -> Option<f64> {
        let mut best = 0.0f64;
        for s in [1.0, -1.0] {
            let y = src.ln_mgf(s * lambda);
            if !y.is_finite() {
                return None;
            }
            if y > 0.0 {
                match phi.inverse(y) {
                    Ok(v) => best = best.max(v / lambda),
                    Err(Error::OutOfRange { .. }) => return Some(f64::INFINITY),
                    Err(e) => panic!("unexpected inverse failure: {e}"),
                }
            }
        }
        Some(best)
    };

    let limit = (src.variance() / (2.0 * phi.curvature_at_zero())).sqrt();
    let points: Vec<f64> = geometric_grid(grid.lo, grid.hi, grid.per_decade)
        .into_iter()
        .filter(|&l| l < l0)
        .collect();
    let mut values = Vec::with_capacity(points.len());
    let mut truncated = false;
    for &l in &points {
        match ratio(l) {
            Some(v) => values.push(v),
            None => {
                truncated = true;
                break;
            }
        }
    }
    let mut value = limit;
    let mut at = 0.0;
    if let Some((i, &v)) = values
        .iter()
        .enumerate()
        .fold(None, |b: Option<(usize, &f64)>, (i, v)| match b {
            Some((_, bv)) if bv >= v => b,
            _ => Some((i, v)),
        })
    {
        if v > value {
            value = v;
            at = points[i];
        }
        if v.is_finite() && values.len() >= 2 {
            let lo = points[i.saturating_sub(1)];
            let hi = points[(i + 1).min(values.len() - 1)];
            let (arg, refined) = golden_max(|t| ratio(t.exp()).unwrap_or(f64::NEG_INFINITY), lo.ln(), hi.ln(), 1e-9);
            if refined > value {
                value = refined;
                at = arg.exp();
            }
        }
    }
    // still climbing a full decade before the last usable point
    let unbounded = values.len() > grid.per_decade
        && values[values.len() - 1] > values[values.len() - 1 - grid.per_decade] * (1.0 + 1e-6);
    Ok(NormEstimate::exact(value, Method::GridSup)
        .with("unbounded", json!(unbounded))
        .with("grid_points", json!(values.len()))
        .with("grid_truncated", json!(truncated))
        .with("lambda_at_sup", json!(at))
        .with("limit_candidate", json!(limit)))
}

// ---------------------------------------------------------------------------
// L_p of weighted sums

/// Distribution of an independent sum of finite/lattice laws as sorted atoms.
pub fn sum_distribution(sum: &IndependentSum, cfg: &EngineConfig) -> Result<(Vec<(f64, f64)>, Method)> {
    let engine = match cfg.engine {
        Engine::Auto => {
            if auto_enumerates(sum, cfg) {
                Engine::ExactEnum
            } else {
                Engine::Convolution
            }
        }
        e => e,
    };
    match engine {
        Engine::ExactEnum => Ok((
            collapse(enumerate(sum, cfg.budget)?, SUPPORT_MERGE_TOL),
            Method::ExactEnum,
        )),
        Engine::Convolution => Ok((convolve(sum, cfg.budget)?, Method::Convolution)),
        Engine::MonteCarlo => Err(Error::EngineUnsupported {
            engine: "monte_carlo",
            what: "exact sum distributions".into(),
        }),
        Engine::Quadrature | Engine::Auto => Err(Error::EngineUnsupported {
            engine: "quadrature",
            what: "sum distributions".into(),
        }),
    }
}

fn exact_states(sum: &IndependentSum) -> Option<f64> {
    sum.active()
        .map(|(d, _)| d.finite_support().map(|s| s.len() as f64))
        .product::<Option<f64>>()
}

fn auto_enumerates(sum: &IndependentSum, cfg: &EngineConfig) -> bool {
    exact_states(sum).is_some_and(|s| s <= AUTO_ENUM_STATES.min(cfg.budget as f64))
}

fn enumerate(sum: &IndependentSum, budget: usize) -> Result<Vec<(f64, f64)>> {
    let states = exact_states(sum).ok_or_else(|| Error::EngineUnsupported {
        engine: "exact_enum",
        what: "laws without finite support".into(),
    })?;
    if states > budget as f64 {
        return Err(Error::BudgetExceeded { states, budget });
    }
    let mut atoms = vec![(0.0, 1.0)];
    for (d, c) in sum.active() {
        let support = d.finite_support().expect("checked");
        atoms = atoms
            .iter()
            .flat_map(|&(s, p)| support.iter().map(move |&(x, q)| (s + c * x, p * q)))
            .collect();
    }
    Ok(atoms)
}

fn convolve(sum: &IndependentSum, budget: usize) -> Result<Vec<(f64, f64)>> {
    let mut atoms = vec![(0.0, 1.0)];
    for (d, c) in sum.active() {
        let pmf = d.lattice_pmf().ok_or_else(|| Error::EngineUnsupported {
            engine: "convolution",
            what: format!("the non-lattice law {d}"),
        })?;
        let size = atoms.len() as f64 * pmf.len() as f64;
        if size > budget as f64 {
            return Err(Error::BudgetExceeded { states: size, budget });
        }
        let next: Vec<(f64, f64)> = atoms
            .iter()
            .flat_map(|&(s, p)| pmf.iter().map(move |&(x, q)| (s + c * x, p * q)))
            .collect();
        atoms = collapse(next, SUPPORT_MERGE_TOL);
    }
    Ok(atoms)
}

fn resolve_lp_engine(sum: &IndependentSum, cfg: &EngineConfig) -> Engine {
    match cfg.engine {
        Engine::Auto => {
            let n_active = sum.active().count();
            if sum.all_gaussian() {
                Engine::Quadrature
            } else if auto_enumerates(sum, cfg) {
                Engine::ExactEnum
            } else if sum.active().all(|(d, _)| d.lattice_pmf().is_some()) {
                Engine::Convolution
            } else if n_active <= 1 {
                Engine::Quadrature
            } else {
                Engine::MonteCarlo
            }
        }
        e => e,
    }
}

/// `||sum_k c_k X_k||_p`.
pub fn sum_lp(sum: &IndependentSum, p: f64, cfg: &EngineConfig) -> Result<NormEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param("p", format!("must be >= 1, got {p}")));
    }
    match resolve_lp_engine(sum, cfg) {
        Engine::ExactEnum => {
            let atoms = enumerate(sum, cfg.budget)?;
            let states = atoms.len();
            Ok(NormEstimate::exact(moment_root(&atoms, p), Method::ExactEnum).with("states", json!(states)))
        }
        Engine::Convolution => match convolve(sum, cfg.budget) {
            Ok(atoms) => {
                let support = atoms.len();
                Ok(NormEstimate::exact(moment_root(&atoms, p), Method::Convolution).with("support", json!(support)))
            }
            // incommensurate weights: the support grows like a product
            Err(Error::BudgetExceeded { states, .. }) if cfg.engine == Engine::Auto => {
                Ok(monte_carlo_lp(sum, p, cfg)?
                    .with("fallback_from", json!({"engine": "convolution", "states": states})))
            }
            Err(e) => Err(e),
        },
        Engine::Quadrature => {
            let active: Vec<_> = sum.active().collect();
            let m = if sum.all_gaussian() {
                Distribution::gaussian(sum.sd())?.abs_moment(p)?
            } else if active.len() == 1 {
                let (d, c) = active[0];
                c.abs().powf(p) * d.abs_moment(p)?
            } else if active.is_empty() {
                0.0
            } else {
                return Err(Error::EngineUnsupported {
                    engine: "quadrature",
                    what: "sums of several non-Gaussian laws".into(),
                });
            };
            Ok(NormEstimate::exact(m.powf(1.0 / p), Method::Quadrature))
        }
        Engine::MonteCarlo => monte_carlo_lp(sum, p, cfg),
        Engine::Auto => unreachable!(),
    }
}

/// `||S_n||_p` with `S_n = sum a_k xi_k`, `xi_k ~ d` i.i.d.
pub fn weighted_sum_lp(d: &Distribution, a: &CoefficientVector, p: f64, cfg: &EngineConfig) -> Result<NormEstimate> {
    sum_lp(&IndependentSum::weighted(d, a), p, cfg)
}

/// `E X^k` over atoms, summed in order of `|x|` so that mirrored atoms of a
/// symmetric law cancel exactly.
pub fn raw_moment(atoms: &[(f64, f64)], k: i32) -> f64 {
    let mut idx: Vec<usize> = (0..atoms.len()).collect();
    idx.sort_by(|&i, &j| {
        atoms[i]
            .0
            .abs()
            .total_cmp(&atoms[j].0.abs())
            .then(atoms[i].0.total_cmp(&atoms[j].0))
    });
    let mut sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        // atoms sharing |x| are summed together first
        let r = atoms[idx[i]].0.abs();
        let mut group = 0.0;
        while i < idx.len() && atoms[idx[i]].0.abs() == r {
            let (x, q) = atoms[idx[i]];
            group += q * x.powi(k);
            i += 1;
        }
        sum += group;
    }
    sum
}

fn moment_root(atoms: &[(f64, f64)], p: f64) -> f64 {
    atoms
        .iter()
        .map(|(x, q)| q * x.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `samples` draws of the sum; chunk `i` uses sub-stream `i` of `seed`, so
/// the output does not depend on the number of worker threads.
pub fn sample_sum(sum: &IndependentSum, samples: usize, seed: u64) -> Vec<f64> {
    let terms: Vec<_> = sum.active().map(|(d, c)| (d.sampler(), *c)).collect();
    let chunks = samples.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let len = MC_CHUNK.min(samples - i * MC_CHUNK);
            (0..len)
                .map(|_| terms.iter().map(|(s, c)| c * s.draw(&mut rng)).sum::<f64>())
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

fn monte_carlo_lp(sum: &IndependentSum, p: f64, cfg: &EngineConfig) -> Result<NormEstimate> {
    let n = cfg.samples;
    if n < 2 {
        return Err(Error::param("samples", "Monte Carlo needs at least 2 samples"));
    }
    let terms: Vec<_> = sum.active().map(|(d, c)| (d.sampler(), *c)).collect();
    let chunks = n.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let len = MC_CHUNK.min(n - i * MC_CHUNK);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let s: f64 = terms.iter().map(|(smp, c)| c * smp.draw(&mut rng)).sum();
                let v = s.abs().powf(p);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let band = 3.0 * (var / nf).sqrt();
    let value = mean.powf(1.0 / p);
    // delta method for the 1/p root
    let ci = if mean > 0.0 {
        value / (p * mean) * band
    } else {
        band.powf(1.0 / p)
    };
    Ok(NormEstimate {
        value,
        method: Method::MonteCarlo,
        ci_halfwidth: ci,
        meta: BTreeMap::new(),
    }
    .with("samples", json!(n))
    .with("moment", json!(mean))
    .with("moment_band", json!(band)))
}

// ---------------------------------------------------------------------------
// GLS

/// `||zeta||_{G psi} = sup_p ||zeta||_p / psi(p)` over the psi grid, with the
/// moments supplied by `lp`.
pub fn gls_norm_with<F>(psi: &PsiFunction, lp: F) -> Result<NormEstimate>
where
    F: Fn(f64) -> Result<NormEstimate>,
{
    let mut best: Option<(f64, f64, NormEstimate)> = None;
    for (p, w) in psi.iter() {
        let est = lp(p)?;
        let r = est.value / w;
        if best.as_ref().is_none_or(|(v, _, _)| r > *v) {
            best = Some((r, p, est));
        }
    }
    let (value, p, est) = best.expect("psi grid is non-empty");
    let w = psi.at(p).expect("grid point");
    Ok(NormEstimate {
        value,
        method: est.method,
        ci_halfwidth: est.ci_halfwidth / w,
        meta: BTreeMap::new(),
    }
    .with("attained_p", json!(p)))
}

pub fn gls_norm(d: &Distribution, psi: &PsiFunction, cfg: &EngineConfig) -> Result<NormEstimate> {
    let sum = IndependentSum::single(d);
    gls_norm_with(psi, |p| sum_lp(&sum, p, cfg))
}
