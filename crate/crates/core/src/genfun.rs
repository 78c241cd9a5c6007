//! Generating functions phi of the class Phi and the transforms built on them:
//! inverse, Young-Fenchel conjugate, Orlicz N-function, Conv_r membership,
//! the n-averaged envelope `phi_bar`, the weighted-sum envelope kappa, the GLS
//! function psi_phi and the tail envelope `exp(-phi*(u/tau))`.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coeffs::CoefficientVector;
use crate::dist::{stream_rng, Distribution};
use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, geometric_grid, golden_max, project_simplex};
use crate::search::{pattern_dims, two_level_patterns, Incumbent};

/// Exponent above which `orlicz_n` reports `+inf`.
pub const ORLICZ_OVERFLOW: f64 = 700.0;
/// Upper cap on lambda for the Conv_r grid test.
pub const CONV_CAP: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `lambda^2 / 2`
    Subgaussian,
    /// `|lambda|^m / m` for `|lambda| >= 1`, spliced by value to `lambda^2 / m` inside.
    Power { m: f64 },
    /// `max(ln E e^{lambda X}, ln E e^{-lambda X})` of a law.
    Natural(Distribution),
    /// Quadratic `c lambda^2` up to the first knot, piecewise linear after,
    /// domain ending at the last knot.
    Tabulated { knots: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingFunction {
    family: Family,
}

impl GeneratingFunction {
    pub fn subgaussian() -> Self {
        GeneratingFunction {
            family: Family::Subgaussian,
        }
    }

    pub fn power(m: f64) -> Result<Self> {
        if !(m >= 1.0) || !m.is_finite() {
            return Err(Error::param("m", format!("power family needs m >= 1, got {m}")));
        }
        Ok(GeneratingFunction {
            family: Family::Power { m },
        })
    }

    pub fn natural(d: Distribution) -> Self {
        GeneratingFunction {
            family: Family::Natural(d),
        }
    }

    /// Knots `(lambda_i, phi_i)` with both coordinates strictly increasing and
    /// the resulting function convex.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::param("knots", "need at least one knot"));
        }
        let mut prev = (0.0, 0.0);
        for &(l, v) in &knots {
            if !(l > prev.0 && v > prev.1) || !l.is_finite() || !v.is_finite() {
                return Err(Error::param(
                    "knots",
                    "knots must be strictly increasing in both coordinates",
                ));
            }
            prev = (l, v);
        }
        // slope of the quadratic piece at the first knot, then secant slopes
        let mut slope = 2.0 * knots[0].1 / knots[0].0;
        for w in knots.windows(2) {
            let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if s < slope * (1.0 - 1e-12) {
                return Err(Error::param("knots", "tabulated function is not convex"));
            }
            slope = s;
        }
        Ok(GeneratingFunction {
            family: Family::Tabulated { knots },
        })
    }

    /// Parses `subgaussian`, `power:M`, `natural` (of `law`), `natural:LAWSPEC`,
    /// `tabulated:L1/V1,L2/V2,..` or an inline JSON object.
    pub fn parse(spec: &str, law: Option<&Distribution>) -> Result<Self> {
        let spec = spec.trim();
        if spec.starts_with('{') {
            return serde_json::from_str(spec).map_err(|e| Error::parse("phi", e.to_string()));
        }
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        match name {
            "subgaussian" | "phi2" => Ok(Self::subgaussian()),
            "power" => {
                let m = arg
                    .and_then(|a| a.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::parse("phi", "power:M needs a number M >= 1"))?;
                Self::power(m).map_err(|e| Error::parse("phi", e.to_string()))
            }
            "natural" => match arg {
                Some(a) => Ok(Self::natural(a.parse()?)),
                None => law
                    .cloned()
                    .map(Self::natural)
                    .ok_or_else(|| Error::parse("phi", "natural needs a law (natural:LAW or --law)")),
            },
            "tabulated" => {
                let a = arg.ok_or_else(|| Error::parse("phi", "tabulated needs knots"))?;
                let knots = a
                    .split(',')
                    .map(|k| {
                        let (l, v) = k
                            .split_once('/')
                            .ok_or_else(|| Error::parse("phi", "knots are written L/V"))?;
                        let l = l.trim().parse::<f64>().map_err(|_| Error::parse("phi", "bad knot"))?;
                        let v = v.trim().parse::<f64>().map_err(|_| Error::parse("phi", "bad knot"))?;
                        Ok((l, v))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::tabulated(knots).map_err(|e| Error::parse("phi", e.to_string()))
            }
            other => Err(Error::parse("phi", format!("unknown family `{other}`"))),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Domain radius; `+inf` for every family except `Tabulated`.
    pub fn lambda0(&self) -> f64 {
        match &self.family {
            Family::Tabulated { knots } => knots.last().expect("non-empty").0,
            _ => f64::INFINITY,
        }
    }

    /// `lim_{lambda -> 0} phi(lambda) / lambda^2`.
    pub fn curvature_at_zero(&self) -> f64 {
        match &self.family {
            Family::Subgaussian => 0.5,
            Family::Power { m } => 1.0 / m,
            Family::Natural(d) => 0.5 * d.variance(),
            Family::Tabulated { knots } => knots[0].1 / (knots[0].0 * knots[0].0),
        }
    }

    /// `phi(lambda)`; `+inf` outside the closed domain.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = lambda.abs();
        match &self.family {
            Family::Subgaussian => 0.5 * x * x,
            Family::Power { m } => {
                if x <= 1.0 {
                    x * x / m
                } else {
                    x.powf(*m) / m
                }
            }
            Family::Natural(d) => {
                if d.is_symmetric() {
                    d.ln_mgf(x)
                } else {
                    d.ln_mgf(x).max(d.ln_mgf(-x))
                }
            }
            Family::Tabulated { knots } => {
                let (l1, v1) = knots[0];
                if x <= l1 {
                    return v1 * (x / l1) * (x / l1);
                }
                for w in knots.windows(2) {
                    let ((a, fa), (b, fb)) = (w[0], w[1]);
                    if x <= b {
                        return fa + (fb - fa) * (x - a) / (b - a);
                    }
                }
                f64::INFINITY
            }
        }
    }

    /// `phi^{-1}(y)` on `[0, lambda0)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::param("y", format!("phi_inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if y.is_infinite() {
            return Err(Error::OutOfRange {
                value: y,
                bound: self.eval(self.lambda0().min(f64::MAX)),
            });
        }
        match &self.family {
            Family::Subgaussian => Ok((2.0 * y).sqrt()),
            Family::Power { m } => {
                if y <= 1.0 / m {
                    Ok((m * y).sqrt())
                } else {
                    Ok((m * y).powf(1.0 / m))
                }
            }
            _ => {
                let l0 = self.lambda0();
                let hi = if l0.is_finite() {
                    let top = self.eval(l0);
                    if y > top {
                        return Err(Error::OutOfRange { value: y, bound: top });
                    }
                    l0
                } else {
                    let mut hi = 1.0;
                    while self.eval(hi) < y {
                        hi *= 2.0;
                        if hi > 1e300 {
                            return Err(Error::OutOfRange {
                                value: y,
                                bound: f64::INFINITY,
                            });
                        }
                    }
                    hi
                };
                Ok(bisect_increasing(|l| self.eval(l), y, 0.0, hi))
            }
        }
    }

    /// Young-Fenchel conjugate `phi*(u) = sup_{|lambda| < lambda0} (lambda u - phi(lambda))`.
    pub fn legendre(&self, u: f64) -> Conjugate {
        let u = u.abs();
        if u == 0.0 {
            return Conjugate {
                value: 0.0,
                argmax: 0.0,
                at_boundary: false,
            };
        }
        let l0 = self.lambda0();
        let top = l0.min(1e6);
        let mut grid = vec![0.0];
        grid.extend(geometric_grid(1e-6, top, 64));
        let g = |l: f64| l * u - self.eval(l);
        let vals: Vec<f64> = grid.iter().map(|&l| g(l)).collect();
        let best = vals
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v > vals[b] { i } else { b });
        let last = grid.len() - 1;
        if best == last {
            if l0.is_infinite() && vals[last] > vals[last - 1] + 1e-9 * vals[last].abs().max(1.0) {
                return Conjugate {
                    value: f64::INFINITY,
                    argmax: f64::INFINITY,
                    at_boundary: true,
                };
            }
            return Conjugate {
                value: vals[last],
                argmax: grid[last],
                at_boundary: true,
            };
        }
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[best + 1];
        let width = 1e-12 * hi.max(1.0);
        let (arg, val) = golden_max(g, lo, hi, width);
        let (argmax, value) = if val >= vals[best] {
            (arg, val)
        } else {
            (grid[best], vals[best])
        };
        Conjugate {
            value: value.max(0.0),
            argmax,
            at_boundary: false,
        }
    }

    /// Conjugate tabulated on `knots` (computed in parallel, order preserved).
    pub fn conjugate_profile(&self, knots: &[f64]) -> ConjugateProfile {
        let results: Vec<Conjugate> = knots.par_iter().map(|&u| self.legendre(u)).collect();
        ConjugateProfile {
            knots: knots.to_vec(),
            values: results.iter().map(|c| c.value).collect(),
            lambda_argmax: results.iter().map(|c| c.argmax).collect(),
        }
    }

    /// Young-Orlicz N-function `exp(phi*(u)) - 1`, `+inf` past the overflow guard.
    pub fn orlicz_n(&self, u: f64) -> f64 {
        let v = self.legendre(u).value;
        if v > ORLICZ_OVERFLOW {
            f64::INFINITY
        } else {
            v.exp_m1()
        }
    }

    /// Conv_r test: convexity of `t -> phi(t^{1/r})` on a log grid of 10^4
    /// points over `(0, min(lambda0, CONV_CAP)^r]`, checked through slopes.
    pub fn conv_r_class(&self, r: f64) -> Result<ConvClass> {
        if !(1.0..=2.0).contains(&r) {
            return Err(Error::param("r", format!("r must lie in [1, 2], got {r}")));
        }
        let t_hi = self.lambda0().min(CONV_CAP).powf(r);
        let t_lo = t_hi * 1e-12;
        let n = 10_000;
        let ratio = (t_hi / t_lo).ln() / (n - 1) as f64;
        let ts: Vec<f64> = (0..n)
            .map(|i| {
                if i == n - 1 {
                    t_hi
                } else {
                    t_lo * (ratio * i as f64).exp()
                }
            })
            .collect();
        let fs: Vec<f64> = ts.iter().map(|t| self.eval(t.powf(1.0 / r))).collect();
        let slopes: Vec<f64> = (0..n - 1).map(|i| (fs[i + 1] - fs[i]) / (ts[i + 1] - ts[i])).collect();
        for i in 0..slopes.len() - 1 {
            let tol = 1e-9 * slopes[i].abs().max(slopes[i + 1].abs()).max(1.0);
            if slopes[i + 1] - slopes[i] < -tol {
                return Ok(ConvClass {
                    member: false,
                    r,
                    witness: Some([(ts[i], fs[i]), (ts[i + 1], fs[i + 1]), (ts[i + 2], fs[i + 2])]),
                });
            }
        }
        Ok(ConvClass {
            member: true,
            r,
            witness: None,
        })
    }

    /// `phi_bar(lambda) = sup_n n phi(lambda / sqrt n)`, searched over
    /// `n in [1, 10^6]`.
    pub fn overline(&self, lambda: f64) -> Result<Overline> {
        let x = lambda.abs();
        if x >= self.lambda0() {
            return Err(Error::param("lambda", format!("|lambda| = {x} is outside the domain")));
        }
        if x == 0.0 {
            return Ok(Overline { value: 0.0, n: 1 });
        }
        const N_MAX: f64 = 1e6;
        let h = |t: f64| t * self.eval(x / t.sqrt());
        let grid = geometric_grid(1.0, N_MAX, 20);
        let vals: Vec<f64> = grid.iter().map(|&t| h(t)).collect();
        let best = vals
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v > vals[b] { i } else { b });
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (t_star, _) = golden_max(|s| h(s.exp()), lo.ln(), hi.ln(), 1e-10);
        let t_star = t_star.exp();
        let mut ns: Vec<u64> = vec![1, N_MAX as u64];
        let (a, b) = (lo.floor() as u64, hi.ceil() as u64);
        if b - a <= 4096 {
            ns.extend(a.max(1)..=b.min(N_MAX as u64));
        } else {
            let c = t_star.floor() as u64;
            ns.extend(c.saturating_sub(2).max(1)..=(c + 3).min(N_MAX as u64));
        }
        ns.sort_unstable();
        ns.dedup();
        let mut best = Overline {
            value: f64::NEG_INFINITY,
            n: 1,
        };
        for n in ns {
            let v = h(n as f64);
            if v > best.value * (1.0 + 4.0 * f64::EPSILON) {
                best = Overline { value: v, n };
            }
        }
        Ok(best)
    }

    /// GLS generating function `psi_phi` on `p_grid`.
    pub fn psi(&self, p_grid: &[f64], mode: PsiMode) -> Result<PsiFunction> {
        let values = p_grid
            .iter()
            .map(|&p| {
                let inv = self.inverse(p)?;
                Ok(match mode {
                    PsiMode::Inverse => inv,
                    PsiMode::Literal => inv / p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PsiFunction::new(p_grid.to_vec(), values, PsiProvenance::FromPhi)
    }

    /// `exp(-phi*(u / tau))`, the tail bound for a variable of B(phi) norm `tau`.
    pub fn tail_envelope(&self, tau: f64, u: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::param("tau", "norm must be positive"));
        }
        if !(u >= 0.0) {
            return Err(Error::param("u", "level must be nonnegative"));
        }
        Ok((-self.legendre(u / tau).value).exp())
    }

    /// Numerical check of the defining properties of Phi on a test grid.
    pub fn membership(&self) -> Membership {
        let l0 = self.lambda0();
        let top = if l0.is_finite() { l0 * 0.999 } else { 50.0 };
        let grid = geometric_grid(1e-3 * top.min(1.0), top, 64);
        let even = grid.iter().all(|&l| {
            let (a, b) = (self.eval(l), self.eval(-l));
            (a - b).abs() <= 1e-12 * a.abs()
        });
        let increasing = grid.windows(2).all(|w| self.eval(w[1]) > self.eval(w[0]));
        let slopes: Vec<f64> = grid
            .windows(2)
            .map(|w| (self.eval(w[1]) - self.eval(w[0])) / (w[1] - w[0]))
            .collect();
        let convex = slopes.windows(2).all(|s| s[1] - s[0] >= -1e-10 * s[1].abs().max(1.0));
        let ratios: Vec<f64> = geometric_grid(1e-6, 1e-3, 8)
            .into_iter()
            .filter(|&l| l < l0)
            .map(|l| self.eval(l) / (l * l))
            .collect();
        let (c1, c2) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        let quadratic_at_zero = c1 > 0.0 && c2.is_finite();
        let superlinear = l0.is_infinite().then(|| {
            let r: Vec<f64> = geometric_grid(1.0, 1e4, 8).iter().map(|&l| self.eval(l) / l).collect();
            r.windows(2).all(|w| w[1] > w[0]) && r[r.len() - 1] > 10.0 * r[0]
        });
        Membership {
            zero_at_origin: self.eval(0.0) == 0.0,
            even,
            increasing,
            convex,
            quadratic_at_zero,
            superlinear,
        }
    }
}

impl fmt::Display for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Subgaussian => write!(f, "subgaussian"),
            Family::Power { m } => write!(f, "power:{m}"),
            Family::Natural(d) => write!(f, "natural:{d}"),
            Family::Tabulated { knots } => {
                let k: Vec<String> = knots.iter().map(|(l, v)| format!("{l}/{v}")).collect();
                write!(f, "tabulated:{}", k.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: f64,
    /// The supremum was reached at the end of the search range.
    pub at_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugateProfile {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub lambda_argmax: Vec<f64>,
}

impl ConjugateProfile {
    /// `(phi*)*(lambda)` as a maximum over the tabulated knots.
    pub fn biconjugate(&self, lambda: f64) -> f64 {
        self.knots
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(u, v)| lambda * u - v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvClass {
    pub member: bool,
    pub r: f64,
    /// Three consecutive `(t, phi(t^{1/r}))` points where convexity fails.
    pub witness: Option<[(f64, f64); 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Overline {
    pub value: f64,
    pub n: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub zero_at_origin: bool,
    pub even: bool,
    pub increasing: bool,
    pub convex: bool,
    pub quadratic_at_zero: bool,
    /// `phi(lambda)/lambda -> inf`; only tested when `lambda0 = inf`.
    pub superlinear: Option<bool>,
}

impl Membership {
    pub fn in_class(&self) -> bool {
        self.zero_at_origin
            && self.even
            && self.increasing
            && self.convex
            && self.quadratic_at_zero
            && self.superlinear.unwrap_or(true)
    }
}

// ---------------------------------------------------------------------------
// kappa

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaConfig {
    pub n_max: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig {
            n_max: 32,
            restarts: 4,
            seed: 0,
        }
    }
}

/// Lower estimate of `kappa(lambda)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaEstimate {
    pub value: f64,
    pub witness: CoefficientVector,
    pub candidate: String,
    /// Candidates dropped because some `|a_k lambda|` reached a domain radius.
    pub discarded: usize,
}

/// `kappa(lambda) = sup_n sup_{a in D(n)} sum_k phi_k(a_k lambda)`, with
/// `phi_k = phis[k mod phis.len()]`. The result is a lower estimate: the best
/// of equal weights, one-hot and two-level patterns for `n <= n_max`, plus
/// projected-gradient ascent on `b = a^2` over the simplex.
pub fn kappa(phis: &[GeneratingFunction], lambda: f64, cfg: &KappaConfig) -> Result<KappaEstimate> {
    if phis.is_empty() {
        return Err(Error::param("phis", "need at least one generating function"));
    }
    if cfg.n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    let phi_at = |k: usize| &phis[k % phis.len()];
    let objective = |b: &[f64]| -> Option<f64> {
        let mut s = 0.0;
        for (k, &bk) in b.iter().enumerate() {
            let arg = lambda * bk.max(0.0).sqrt();
            let phi = phi_at(k);
            if arg.abs() >= phi.lambda0() {
                return None;
            }
            s += phi.eval(arg);
        }
        Some(s)
    };
    let mut inc = Incumbent::new(true);
    let mut discarded = 0usize;
    let mut offer = |b: &[f64], label: &str, inc: &mut Incumbent| match objective(b) {
        Some(v) => {
            let a: Vec<f64> = b.iter().map(|x| x.max(0.0).sqrt()).collect();
            inc.offer(v, &a, label);
        }
        None => discarded += 1,
    };

    for k in 0..cfg.n_max.min(phis.len()) {
        let mut b = vec![0.0; k + 1];
        b[k] = 1.0;
        offer(&b, "one_hot", &mut inc);
    }
    for n in 1..=cfg.n_max {
        offer(&vec![1.0 / n as f64; n], "equal", &mut inc);
    }
    for n in pattern_dims(cfg.n_max) {
        for b in two_level_patterns(n) {
            offer(&b, "two_level", &mut inc);
        }
    }
    let dim = cfg.n_max;
    if dim >= 2 {
        let term = |k: usize, bk: f64| -> Option<f64> {
            let arg = lambda * bk.max(0.0).sqrt();
            let phi = phi_at(k);
            (arg.abs() < phi.lambda0()).then(|| phi.eval(arg))
        };
        for r in 0..cfg.restarts {
            let mut rng = stream_rng(cfg.seed, r as u64);
            let raw: Vec<f64> = (0..dim).map(|_| -rng.random::<f64>().ln()).collect();
            let total: f64 = raw.iter().sum();
            let start: Vec<f64> = raw.iter().map(|x| x / total).collect();
            if let Some(b) = gradient_ascent(&term, start) {
                offer(&b, "projected_gradient", &mut inc);
            }
        }
    }
    if inc.is_empty() {
        return Err(Error::Precondition(
            "every kappa candidate left the domain of some phi_k".into(),
        ));
    }
    Ok(KappaEstimate {
        value: inc.value(),
        witness: CoefficientVector::normalized(inc.witness().to_vec())?,
        candidate: inc.label().to_string(),
        discarded,
    })
}

/// Projected gradient ascent of the separable objective `sum_k term(k, b_k)`
/// over the simplex, with an adaptive step.
fn gradient_ascent<T: Fn(usize, f64) -> Option<f64>>(term: &T, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let total = |b: &[f64]| -> Option<f64> { b.iter().enumerate().map(|(k, &bk)| term(k, bk)).sum::<Option<f64>>() };
    let mut fb = total(&b)?;
    let mut step = f64::NAN;
    for _ in 0..300 {
        let grad: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(k, &bk)| {
                let h = 1e-7 * bk.max(1e-6);
                let lo = (bk - h).max(0.0);
                match (term(k, bk + h), term(k, lo)) {
                    (Some(a), Some(c)) => (a - c) / (bk + h - lo),
                    _ => 0.0,
                }
            })
            .collect();
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax == 0.0 {
            break;
        }
        if step.is_nan() {
            step = 0.1 / gmax;
        }
        let mut moved = false;
        while step * gmax > 1e-12 {
            let trial: Vec<f64> = b.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            let trial = project_simplex(&trial);
            match total(&trial) {
                Some(v) if v > fb => {
                    b = trial;
                    fb = v;
                    step *= 1.5;
                    moved = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !moved {
            break;
        }
    }
    Some(b)
}

// ---------------------------------------------------------------------------
// psi

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// `psi(p) = phi^{-1}(p)`
    Inverse,
    /// `psi(p) = phi^{-1}(p) / p`
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiProvenance {
    Explicit,
    FromPhi,
    RosenthalScaled,
}

/// GLS generating function tabulated on a p-grid in `[2, P_max]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiFunction {
    p_grid: Vec<f64>,
    values: Vec<f64>,
    provenance: PsiProvenance,
}

/// Integer grid `2, 3, .., p_max`.
pub fn default_p_grid(p_max: usize) -> Vec<f64> {
    (2..=p_max.max(2)).map(|p| p as f64).collect()
}

impl PsiFunction {
    pub fn new(p_grid: Vec<f64>, values: Vec<f64>, provenance: PsiProvenance) -> Result<Self> {
        if p_grid.is_empty() || p_grid.len() != values.len() {
            return Err(Error::param(
                "psi",
                "grid and values must be non-empty and of equal length",
            ));
        }
        if p_grid[0] < 2.0 || p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "psi",
                "p-grid must be strictly increasing and start at >= 2",
            ));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::param("psi", "values must be positive and finite"));
        }
        Ok(PsiFunction {
            p_grid,
            values,
            provenance,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(p_grid: Vec<f64>, f: F) -> Result<Self> {
        let values = p_grid.iter().map(|&p| f(p)).collect();
        Self::new(p_grid, values, PsiProvenance::Explicit)
    }

    /// `psi_R(p) = C_R p / (e ln p) * psi(p)`.
    pub fn rosenthal_scaled(&self) -> PsiFunction {
        PsiFunction {
            p_grid: self.p_grid.clone(),
            values: self
                .p_grid
                .iter()
                .zip(&self.values)
                .map(|(&p, &v)| crate::khinch::rosenthal_factor(p) * v)
                .collect(),
            provenance: PsiProvenance::RosenthalScaled,
        }
    }

    pub fn p_grid(&self) -> &[f64] {
        &self.p_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> PsiProvenance {
        self.provenance
    }

    pub fn at(&self, p: f64) -> Option<f64> {
        self.p_grid.iter().position(|&q| q == p).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p_grid.iter().copied().zip(self.values.iter().copied())
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Radius {
    Finite(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Repr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    law: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knots: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda0: Option<Radius>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    splice: Option<String>,
}

impl Serialize for GeneratingFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let l0 = self.lambda0();
        let mut repr = Repr {
            family: String::new(),
            m: None,
            law: None,
            knots: None,
            lambda0: Some(if l0.is_finite() {
                Radius::Finite(l0)
            } else {
                Radius::Text("inf".into())
            }),
            splice: None,
        };
        match &self.family {
            Family::Subgaussian => repr.family = "subgaussian".into(),
            Family::Power { m } => {
                repr.family = "power".into();
                repr.m = Some(*m);
                repr.splice = Some("quadratic-value".into());
            }
            Family::Natural(d) => {
                repr.family = "natural".into();
                repr.law = Some(d.clone());
            }
            Family::Tabulated { knots } => {
                repr.family = "tabulated".into();
                repr.knots = Some(knots.iter().map(|&(l, v)| [l, v]).collect());
            }
        }
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeneratingFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = Repr::deserialize(d)?;
        let phi = match repr.family.as_str() {
            "subgaussian" => Ok(GeneratingFunction::subgaussian()),
            "power" => {
                if let Some(s) = &repr.splice {
                    if s != "quadratic-value" {
                        return Err(D::Error::custom(format!("unsupported splice `{s}`")));
                    }
                }
                GeneratingFunction::power(repr.m.ok_or_else(|| D::Error::custom("power needs `m`"))?)
            }
            "natural" => Ok(GeneratingFunction::natural(
                repr.law.ok_or_else(|| D::Error::custom("natural needs `law`"))?,
            )),
            "tabulated" => GeneratingFunction::tabulated(
                repr.knots
                    .ok_or_else(|| D::Error::custom("tabulated needs `knots`"))?
                    .into_iter()
                    .map(|[l, v]| (l, v))
                    .collect(),
            ),
            other => return Err(D::Error::custom(format!("unknown family `{other}`"))),
        };
        phi.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rad() -> GeneratingFunction {
        GeneratingFunction::natural(Distribution::rademacher())
    }

    #[test]
    fn inverse_examples() {
        let sg = GeneratingFunction::subgaussian();
        assert!((sg.inverse(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(sg.inverse(0.0).unwrap(), 0.0);
        let p3 = GeneratingFunction::power(3.0).unwrap();
        let l = p3.inverse(9.0).unwrap();
        assert!((p3.eval(l) - 9.0).abs() <= 1e-10 * 9.0);
        assert!((l - 3.0).abs() < 1e-12);
        assert!(sg.inverse(-1.0).is_err());
    }

    #[test]
    fn inverse_by_bisection_meets_tolerance() {
        let phi = rad();
        for y in [1e-8, 0.3, 2.0, 50.0, 1e4] {
            let l = phi.inverse(y).unwrap();
            assert!((phi.eval(l) - y).abs() <= 1e-10 * y.max(1.0), "y = {y}");
        }
    }

    #[test]
    fn finite_domain_inverse_reports_range() {
        let t = GeneratingFunction::tabulated(vec![(1.0, 0.5), (2.0, 2.0)]).unwrap();
        assert_eq!(t.lambda0(), 2.0);
        match t.inverse(3.0) {
            Err(Error::OutOfRange { bound, .. }) => assert_eq!(bound, 2.0),
            other => panic!("expected range error, got {other:?}"),
        }
        assert!((t.eval(t.inverse(1.0).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_rejects_concave_knots() {
        assert!(GeneratingFunction::tabulated(vec![(1.0, 1.0), (2.0, 1.5)]).is_err());
    }

    #[test]
    fn legendre_examples() {
        let sg = GeneratingFunction::subgaussian();
        let c = sg.legendre(3.0);
        assert!((c.value - 4.5).abs() < 1e-12);
        assert!((c.argmax - 3.0).abs() < 1e-5);
        assert_eq!(sg.legendre(0.0).value, 0.0);
    }

    #[test]
    fn legendre_of_ln_cosh_matches_dense_grid() {
        // dense-grid sup oracle, 10^6 points on [0, 20]
        let u = 0.5f64;
        let mut best = 0.0f64;
        for i in 0..=1_000_000 {
            let l = 20.0 * i as f64 / 1e6;
            best = best.max(l * u - (l.cosh()).ln());
        }
        let v = rad().legendre(u).value;
        assert!((v - best).abs() < 1e-6, "{v} vs {best}");
        // closed form: u atanh u - ln cosh atanh u
        let a = u.atanh();
        assert!((v - (u * a - a.cosh().ln())).abs() < 1e-12);
    }

    #[test]
    fn legendre_of_ln_cosh_is_infinite_past_slope_one() {
        let c = rad().legendre(1.5);
        assert!(c.value.is_infinite() && c.at_boundary);
        let c = rad().legendre(1.0);
        assert!((c.value - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn orlicz_examples() {
        let sg = GeneratingFunction::subgaussian();
        assert_eq!(sg.orlicz_n(0.0), 0.0);
        assert!((sg.orlicz_n(2.0) - 6.389_056_098_930_65).abs() < 1e-9);
        assert!(sg.orlicz_n(40.0).is_infinite());
    }

    #[test]
    fn conv_class_examples() {
        let sg = GeneratingFunction::subgaussian();
        assert!(sg.conv_r_class(2.0).unwrap().member);
        assert!(sg.conv_r_class(1.0).unwrap().member);
        assert!(
            GeneratingFunction::power(4.0)
                .unwrap()
                .conv_r_class(2.0)
                .unwrap()
                .member
        );
        let poisson = GeneratingFunction::natural(Distribution::centered_poisson(1.0).unwrap());
        assert!(poisson.conv_r_class(2.0).unwrap().member);
        assert!(sg.conv_r_class(2.5).is_err());
    }

    #[test]
    fn ln_cosh_is_not_conv2() {
        // t -> ln cosh(sqrt t) is concave: its slope tanh(x)/(2x) decreases.
        let oracle_slope = |t: f64| {
            let x = t.sqrt();
            x.tanh() / (2.0 * x)
        };
        assert!(oracle_slope(2.0) < oracle_slope(1.0));
        let c = rad().conv_r_class(2.0).unwrap();
        assert!(!c.member);
        let w = c.witness.unwrap();
        let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
        assert!(s2 < s1);
        // r = 1 is plain convexity, which ln cosh has
        assert!(rad().conv_r_class(1.0).unwrap().member);
    }

    #[test]
    fn overline_examples() {
        let sg = GeneratingFunction::subgaussian();
        let o = sg.overline(1.7).unwrap();
        assert_eq!(o.value, 0.5 * 1.7 * 1.7);
        assert!((o.value - 1.445).abs() < 1e-15);

        // direct scan oracle n = 1..10^6
        let mut scan = f64::NEG_INFINITY;
        for n in 1..=1_000_000u64 {
            let n = n as f64;
            scan = scan.max(n * crate::numeric::ln_cosh(2.0 / n.sqrt()));
        }
        let o = rad().overline(2.0).unwrap();
        assert!((o.value - scan).abs() <= 1e-12 * scan, "{} vs {scan}", o.value);
        assert!(o.value <= 2.0);

        // with the value splice the power family is lambda^2/m inside the unit ball
        let p4 = GeneratingFunction::power(4.0).unwrap();
        let scan = (1..=100_000u64)
            .map(|n| n as f64 * p4.eval(0.5 / (n as f64).sqrt()))
            .fold(f64::NEG_INFINITY, f64::max);
        let o = p4.overline(0.5).unwrap();
        assert!((o.value - scan).abs() < 1e-15);
        assert!((o.value - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        let sg = GeneratingFunction::subgaussian();
        let cfg = KappaConfig {
            n_max: 8,
            restarts: 2,
            seed: 1,
        };
        let k = kappa(std::slice::from_ref(&sg), 1.3, &cfg).unwrap();
        assert!((k.value - 0.845).abs() < 1e-12);

        let mixed = [sg, GeneratingFunction::power(4.0).unwrap()];
        let cfg = KappaConfig {
            n_max: 2,
            restarts: 4,
            seed: 3,
        };
        let k = kappa(&mixed, 0.1, &cfg).unwrap();
        // 2-d grid oracle over b1 = a1^2 in [0, 1], step 1e-4
        let mut grid_best = 0.0f64;
        for i in 0..=10_000 {
            let b1 = i as f64 * 1e-4;
            let v = mixed[0].eval(0.1 * b1.sqrt()) + mixed[1].eval(0.1 * (1.0 - b1).sqrt());
            grid_best = grid_best.max(v);
        }
        assert!((grid_best - 0.005).abs() < 1e-15);
        assert!((k.value - grid_best).abs() < 1e-12);
        assert!((k.witness.entries()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kappa_identical_ln_cosh_equals_equal_weight_scan() {
        let cfg = KappaConfig {
            n_max: 64,
            restarts: 3,
            seed: 5,
        };
        let k = kappa(&[rad()], 3.0, &cfg).unwrap();
        let scan = (1..=64)
            .map(|n| n as f64 * crate::numeric::ln_cosh(3.0 / (n as f64).sqrt()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((k.value - scan).abs() <= 1e-9 * scan, "{} vs {scan}", k.value);
        assert!(k.value <= rad().overline(3.0).unwrap().value + 1e-12);
    }

    #[test]
    fn psi_examples() {
        let sg = GeneratingFunction::subgaussian();
        let psi = sg.psi(&[8.0], PsiMode::Inverse).unwrap();
        assert!((psi.values()[0] - 4.0).abs() < 1e-12);
        let p2 = GeneratingFunction::power(2.0).unwrap();
        assert!((p2.psi(&[2.0], PsiMode::Inverse).unwrap().values()[0] - 2.0).abs() < 1e-12);
        let p4 = GeneratingFunction::power(4.0).unwrap();
        assert!((p4.psi(&[64.0], PsiMode::Inverse).unwrap().values()[0] - 4.0).abs() < 1e-12);
        let lit = sg.psi(&[8.0], PsiMode::Literal).unwrap();
        assert!((lit.values()[0] - 0.5).abs() < 1e-12);
        assert_eq!(lit.provenance(), PsiProvenance::FromPhi);
        let t = GeneratingFunction::tabulated(vec![(1.0, 0.5), (2.0, 2.0)]).unwrap();
        assert!(t.psi(&[2.0, 3.0], PsiMode::Inverse).is_err());
    }

    #[test]
    fn tail_envelope_examples() {
        let sg = GeneratingFunction::subgaussian();
        assert!((sg.tail_envelope(1.0, 2.0).unwrap() - (-2f64).exp()).abs() < 1e-12);
        assert_eq!(rad().tail_envelope(1.0, 0.0).unwrap(), 1.0);
        // a single Rademacher never exceeds 1.5; the natural envelope is 0 there
        assert_eq!(rad().tail_envelope(1.0, 1.5).unwrap(), 0.0);
        let u: f64 = 0.8;
        let a = u.atanh();
        let expect = (-(u * a - a.cosh().ln())).exp();
        assert!((rad().tail_envelope(1.0, u).unwrap() - expect).abs() < 1e-10);
        // P(theta >= 0.8) = 1/2
        assert!(expect >= 0.5);
    }

    #[test]
    fn membership_flags() {
        assert!(GeneratingFunction::subgaussian().membership().in_class());
        assert!(GeneratingFunction::power(3.0).unwrap().membership().in_class());
        // value splice for m < 2 has a concave kink at |lambda| = 1
        assert!(!GeneratingFunction::power(1.5).unwrap().membership().convex);
        // ln cosh grows only linearly
        assert_eq!(rad().membership().superlinear, Some(false));
        let g = GeneratingFunction::natural(Distribution::gaussian(2.0).unwrap());
        assert!(g.membership().in_class());
    }

    #[test]
    fn biconjugate_recovers_ln_cosh() {
        let phi = rad();
        let knots: Vec<f64> = (0..200).map(|i| i as f64 * 0.99 / 199.0).collect();
        let prof = phi.conjugate_profile(&knots);
        for &l in prof.lambda_argmax.iter().skip(1) {
            let bi = prof.biconjugate(l);
            let f = phi.eval(l);
            assert!((bi - f).abs() <= 1e-6 * f, "lambda {l}: {bi} vs {f}");
        }
    }

    #[test]
    fn json_schema() {
        let p = GeneratingFunction::power(3.0).unwrap();
        let j = serde_json::to_string(&p).unwrap();
        assert_eq!(
            j,
            r#"{"family":"power","m":3.0,"lambda0":"inf","splice":"quadratic-value"}"#
        );
        let back: GeneratingFunction = serde_json::from_str(&j).unwrap();
        assert_eq!(back, p);
        let n: GeneratingFunction = serde_json::from_str(r#"{"family":"natural","law":{"law":"rademacher"}}"#).unwrap();
        assert_eq!(n, rad());
        assert!(serde_json::from_str::<GeneratingFunction>(r#"{"family":"power"}"#).is_err());
        assert!(serde_json::from_str::<GeneratingFunction>(r#"{"family":"subgaussian","x":1}"#).is_err());
    }

    #[test]
    fn parse_specs() {
        let law = Distribution::rademacher();
        assert_eq!(GeneratingFunction::parse("natural", Some(&law)).unwrap(), rad());
        assert!(GeneratingFunction::parse("natural", None).is_err());
        assert!(GeneratingFunction::parse("bad-spec", None).is_err());
        assert!(GeneratingFunction::parse("power:0.5", None).is_err());
        let t = GeneratingFunction::parse("tabulated:1/0.5,2/2", None).unwrap();
        assert_eq!(t.lambda0(), 2.0);
    }
}
