//! Catalog of centered probability laws with exact log-MGFs, absolute
//! moments and seeded samplers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{expm1_minus_id, integrate_half_line, ln_cosh, ln_sinhc};

/// Poisson pmfs are truncated past `2 mu + 1` once a term drops below this.
pub const POISSON_TAIL: f64 = 1e-18;
/// Support points closer than this are merged.
pub const SUPPORT_MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Law {
    Rademacher,
    Gaussian {
        sigma: f64,
    },
    CenteredPoisson {
        mu: f64,
    },
    /// Difference of two independent Poisson(mu) variables.
    SymmetrizedPoisson {
        mu: f64,
    },
    UniformSymmetric {
        b: f64,
    },
    Discrete {
        support: Vec<f64>,
        probs: Vec<f64>,
    },
}

/// A validated, centered law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Law", into = "Law")]
pub struct Distribution {
    law: Law,
}

impl TryFrom<Law> for Distribution {
    type Error = Error;

    fn try_from(law: Law) -> Result<Self> {
        match law {
            Law::Rademacher => Ok(Distribution::rademacher()),
            Law::Gaussian { sigma } => Distribution::gaussian(sigma),
            Law::CenteredPoisson { mu } => Distribution::centered_poisson(mu),
            Law::SymmetrizedPoisson { mu } => Distribution::symmetrized_poisson(mu),
            Law::UniformSymmetric { b } => Distribution::uniform_symmetric(b),
            Law::Discrete { support, probs } => Distribution::discrete(support, probs),
        }
    }
}

impl From<Distribution> for Law {
    fn from(d: Distribution) -> Law {
        d.law
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be a positive finite number, got {v}")))
    }
}

impl Distribution {
    pub fn rademacher() -> Self {
        Distribution { law: Law::Rademacher }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(Distribution {
            law: Law::Gaussian {
                sigma: positive("sigma", sigma)?,
            },
        })
    }

    pub fn centered_poisson(mu: f64) -> Result<Self> {
        Ok(Distribution {
            law: Law::CenteredPoisson {
                mu: positive("mu", mu)?,
            },
        })
    }

    pub fn symmetrized_poisson(mu: f64) -> Result<Self> {
        Ok(Distribution {
            law: Law::SymmetrizedPoisson {
                mu: positive("mu", mu)?,
            },
        })
    }

    pub fn uniform_symmetric(b: f64) -> Result<Self> {
        Ok(Distribution {
            law: Law::UniformSymmetric { b: positive("b", b)? },
        })
    }

    /// Finite discrete law. Atoms closer than [`SUPPORT_MERGE_TOL`] are merged;
    /// probabilities must sum to one and the mean must vanish (both to 1e-12).
    pub fn discrete(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::param(
                "support",
                "support and probs must be non-empty and of equal length",
            ));
        }
        if support.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("support", "values must be finite"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::param("probs", "probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("probs", format!("probabilities sum to {total}, not 1")));
        }
        let atoms = collapse(support.into_iter().zip(probs).collect(), SUPPORT_MERGE_TOL);
        let mean: f64 = atoms.iter().map(|(x, p)| x * p).sum();
        if mean.abs() > 1e-12 {
            return Err(Error::param("support", format!("law must be centered, mean is {mean}")));
        }
        let var: f64 = atoms.iter().map(|(x, p)| x * x * p).sum();
        if !(var > 0.0) {
            return Err(Error::param("support", "variance must be positive"));
        }
        let (support, probs) = atoms.into_iter().unzip();
        Ok(Distribution {
            law: Law::Discrete { support, probs },
        })
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn variance(&self) -> f64 {
        match &self.law {
            Law::Rademacher => 1.0,
            Law::Gaussian { sigma } => sigma * sigma,
            Law::CenteredPoisson { mu } => *mu,
            Law::SymmetrizedPoisson { mu } => 2.0 * mu,
            Law::UniformSymmetric { b } => b * b / 3.0,
            Law::Discrete { support, probs } => support.iter().zip(probs).map(|(x, p)| x * x * p).sum(),
        }
    }

    /// Residual mean (exactly zero except for rounding in discrete laws).
    pub fn mean(&self) -> f64 {
        match &self.law {
            Law::Discrete { support, probs } => support.iter().zip(probs).map(|(x, p)| x * p).sum(),
            _ => 0.0,
        }
    }

    /// True when the law is invariant under `x -> -x`.
    pub fn is_symmetric(&self) -> bool {
        match &self.law {
            Law::CenteredPoisson { .. } => false,
            Law::Discrete { support, probs } => {
                let n = support.len();
                (0..n).all(|i| {
                    let j = n - 1 - i;
                    (support[i] + support[j]).abs() <= SUPPORT_MERGE_TOL && (probs[i] - probs[j]).abs() <= 1e-15
                })
            }
            _ => true,
        }
    }

    /// `ln E exp(lambda X)`; `+inf` on overflow.
    pub fn ln_mgf(&self, lambda: f64) -> f64 {
        match &self.law {
            Law::Rademacher => ln_cosh(lambda),
            Law::Gaussian { sigma } => 0.5 * lambda * lambda * sigma * sigma,
            Law::CenteredPoisson { mu } => mu * expm1_minus_id(lambda),
            Law::SymmetrizedPoisson { mu } => {
                let s = (0.5 * lambda).sinh();
                4.0 * mu * s * s
            }
            Law::UniformSymmetric { b } => ln_sinhc(lambda * b),
            Law::Discrete { support, probs } => discrete_ln_mgf(support, probs, lambda),
        }
    }

    /// `E exp(lambda X)`; `+inf` sentinel on overflow.
    pub fn mgf(&self, lambda: f64) -> f64 {
        self.ln_mgf(lambda).exp()
    }

    /// `E|X|^p` for `p >= 1`.
    pub fn abs_moment(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::param("p", format!("must be >= 1, got {p}")));
        }
        Ok(match &self.law {
            Law::Rademacher => 1.0,
            Law::Gaussian { sigma } => sigma.powf(p) * std_normal_abs_moment(p),
            Law::UniformSymmetric { b } => b.powf(p) / (p + 1.0),
            Law::CenteredPoisson { mu } => {
                let mut sum = 0.0;
                for_poisson_terms(*mu, |k, pmf| {
                    let term = pmf * (k as f64 - mu).abs().powf(p);
                    sum += term;
                    !(k as f64 > *mu && term <= 1e-18 * sum && pmf < POISSON_TAIL)
                });
                sum
            }
            Law::SymmetrizedPoisson { mu } => skellam_pmf(*mu, POISSON_TAIL * 1e-6)
                .iter()
                .map(|(x, q)| q * x.abs().powf(p))
                .sum(),
            Law::Discrete { support, probs } => support.iter().zip(probs).map(|(x, q)| q * x.abs().powf(p)).sum(),
        })
    }

    /// `||X||_p = (E|X|^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.abs_moment(p)?.powf(1.0 / p))
    }

    /// Atoms of a finite-support law, sorted by value.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match &self.law {
            Law::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Law::Discrete { support, probs } => Some(support.iter().copied().zip(probs.iter().copied()).collect()),
            _ => None,
        }
    }

    /// Atoms of any lattice law; Poisson laws are truncated per
    /// [`POISSON_TAIL`].
    pub fn lattice_pmf(&self) -> Option<Vec<(f64, f64)>> {
        match &self.law {
            Law::CenteredPoisson { mu } => Some(
                poisson_table(*mu, POISSON_TAIL)
                    .into_iter()
                    .enumerate()
                    .map(|(k, q)| (k as f64 - mu, q))
                    .collect(),
            ),
            Law::SymmetrizedPoisson { mu } => Some(skellam_pmf(*mu, POISSON_TAIL)),
            _ => self.finite_support(),
        }
    }

    pub fn sampler(&self) -> Sampler {
        match &self.law {
            Law::Rademacher => Sampler::Rademacher,
            Law::Gaussian { sigma } => Sampler::Gaussian(*sigma),
            Law::CenteredPoisson { mu } => Sampler::CenteredPoisson(Poisson::new(*mu).expect("validated mu"), *mu),
            Law::SymmetrizedPoisson { mu } => Sampler::SymmetrizedPoisson(Poisson::new(*mu).expect("validated mu")),
            Law::UniformSymmetric { b } => Sampler::Uniform(*b),
            Law::Discrete { support, probs } => {
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Sampler::Discrete(support.clone(), cdf)
            }
        }
    }

    /// `n` i.i.d. draws from stream 0 of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> SampleBatch {
        self.sample_stream(n, seed, 0)
    }

    /// `n` i.i.d. draws from sub-stream `stream` of `seed`.
    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> SampleBatch {
        let mut rng = stream_rng(seed, stream);
        let sampler = self.sampler();
        let values = (0..n).map(|_| sampler.draw(&mut rng)).collect();
        SampleBatch {
            values,
            seed,
            stream,
            law: self.clone(),
        }
    }
}

/// Counter-based generator for `(seed, stream)`; distinct streams are
/// independent and each is reproducible.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug)]
pub enum Sampler {
    Rademacher,
    Gaussian(f64),
    CenteredPoisson(Poisson<f64>, f64),
    SymmetrizedPoisson(Poisson<f64>),
    Uniform(f64),
    Discrete(Vec<f64>, Vec<f64>),
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::Gaussian(sigma) => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            Sampler::CenteredPoisson(p, mu) => p.sample(rng) - mu,
            Sampler::SymmetrizedPoisson(p) => p.sample(rng) - p.sample(rng),
            Sampler::Uniform(b) => b * (2.0 * rng.random::<f64>() - 1.0),
            Sampler::Discrete(support, cdf) => {
                let u: f64 = rng.random();
                let idx = cdf.iter().position(|&c| u < c).unwrap_or(support.len() - 1);
                support[idx]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub law: Distribution,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.law {
            Law::Rademacher => write!(f, "rademacher"),
            Law::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Law::CenteredPoisson { mu } => write!(f, "centered-poisson:{mu}"),
            Law::SymmetrizedPoisson { mu } => write!(f, "symmetrized-poisson:{mu}"),
            Law::UniformSymmetric { b } => write!(f, "uniform:{b}"),
            Law::Discrete { support, probs } => {
                let s: Vec<String> = support.iter().map(|x| x.to_string()).collect();
                let p: Vec<String> = probs.iter().map(|x| x.to_string()).collect();
                write!(f, "discrete:{}@{}", s.join(","), p.join(","))
            }
        }
    }
}

fn parse_num(field: &'static str, s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("sqrt") {
        let inner = rest.trim_start_matches('(').trim_end_matches(')');
        return Ok(parse_num(field, inner)?.sqrt());
    }
    s.parse::<f64>()
        .map_err(|_| Error::parse(field, format!("`{s}` is not a number")))
}

fn parse_list(field: &'static str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| parse_num(field, t)).collect()
}

/// Parses `rademacher`, `gaussian:SIGMA`, `centered-poisson:MU`,
/// `symmetrized-poisson:MU`, `uniform:B` and `discrete:X1,X2,..@P1,P2,..`.
/// Numbers may be written `sqrt(3)`.
impl FromStr for Distribution {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (spec.trim(), None),
        };
        let need = || arg.ok_or_else(|| Error::parse("law", format!("`{name}` needs a parameter")));
        match name.replace('_', "-").as_str() {
            "rademacher" => Ok(Distribution::rademacher()),
            "gaussian" | "normal" => Distribution::gaussian(match arg {
                Some(a) => parse_num("law", a)?,
                None => 1.0,
            }),
            "centered-poisson" | "poisson" => Distribution::centered_poisson(parse_num("law", need()?)?),
            "symmetrized-poisson" | "skellam" => Distribution::symmetrized_poisson(parse_num("law", need()?)?),
            "uniform" | "uniform-symmetric" => Distribution::uniform_symmetric(parse_num("law", need()?)?),
            "discrete" => {
                let a = need()?;
                let (s, p) = a
                    .split_once('@')
                    .ok_or_else(|| Error::parse("law", "discrete laws are written discrete:X1,X2@P1,P2"))?;
                Distribution::discrete(parse_list("law", s)?, parse_list("law", p)?)
            }
            other => Err(Error::parse("law", format!("unknown law `{other}`"))),
        }
    }
}

/// Sorts atoms by value and merges runs whose consecutive gaps are within
/// `tol`. A merged run sits at its member closest to zero (at zero if it
/// straddles it) and its mass is summed smallest-first, so the collapse of a
/// mirror-symmetric atom set is again exactly mirror-symmetric.
pub fn collapse(mut atoms: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(atoms.len());
    let mut start = 0;
    for i in 1..=atoms.len() {
        if i < atoms.len() && atoms[i].0 - atoms[i - 1].0 <= tol {
            continue;
        }
        let run = &atoms[start..i];
        if run.len() == 1 {
            out.push(run[0]);
        } else {
            let (lo, hi) = (run[0].0, run[run.len() - 1].0);
            let x = if lo < 0.0 && hi > 0.0 {
                0.0
            } else if hi <= 0.0 {
                hi
            } else {
                lo
            };
            let mut masses: Vec<f64> = run.iter().map(|a| a.1).collect();
            masses.sort_by(f64::total_cmp);
            out.push((x, masses.iter().sum()));
        }
        start = i;
    }
    out
}

fn discrete_ln_mgf(support: &[f64], probs: &[f64], lambda: f64) -> f64 {
    let max_arg = support.iter().map(|x| (lambda * x).abs()).fold(0.0, f64::max);
    if max_arg <= 1.0 {
        // ln(1 + sum p (e^{lx} - 1 - lx) + l*mean) keeps relative accuracy near 0
        let mut s = 0.0;
        let mut mean = 0.0;
        for (x, p) in support.iter().zip(probs) {
            s += p * expm1_minus_id(lambda * x);
            mean += p * x;
        }
        (s + lambda * mean).ln_1p()
    } else {
        let m = support.iter().map(|x| lambda * x).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = support.iter().zip(probs).map(|(x, p)| p * (lambda * x - m).exp()).sum();
        m + s.ln()
    }
}

/// `E|N(0,1)|^p` by half-line quadrature.
fn std_normal_abs_moment(p: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    integrate_half_line(|x| c * x.powf(p) * (-0.5 * x * x).exp())
}

/// Visits `(k, P(K = k))` for `K ~ Poisson(mu)` until `visit` returns false.
fn for_poisson_terms<F: FnMut(u64, f64) -> bool>(mu: f64, mut visit: F) {
    let ln_mu = mu.ln();
    let mut ln_fact = 0.0;
    let mut k: u64 = 0;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let pmf = (k as f64 * ln_mu - mu - ln_fact).exp();
        if !visit(k, pmf) {
            break;
        }
        k += 1;
        if k > 100_000 {
            break;
        }
    }
}

fn poisson_table(mu: f64, floor: f64) -> Vec<f64> {
    let mut table = Vec::new();
    for_poisson_terms(mu, |k, pmf| {
        table.push(pmf);
        (k as f64) < 2.0 * mu + 1.0 || pmf >= floor
    });
    table
}

/// pmf of `K1 - K2` with `K1, K2 ~ Poisson(mu)` independent.
fn skellam_pmf(mu: f64, tail: f64) -> Vec<(f64, f64)> {
    let table = poisson_table(mu, tail);
    let k = table.len() as i64;
    (-(k - 1)..k)
        .map(|d| {
            let q: f64 = (0..k)
                .filter_map(|j| {
                    let i = j + d;
                    (0..k).contains(&i).then(|| table[i as usize] * table[j as usize])
                })
                .sum();
            (d as f64, q)
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    #[test]
    fn mgf_examples() {
        let r = Distribution::rademacher();
        assert!((r.mgf(1.0) - 1.543_080_634_815_243_7).abs() < 1e-14);
        let g = Distribution::gaussian(2.0).unwrap();
        assert!((g.mgf(0.5) - 0.5f64.exp()).abs() < 1e-14);
        let p = Distribution::centered_poisson(1.0).unwrap();
        assert!((p.mgf(1.0) - (std::f64::consts::E - 2.0).exp()).abs() < 1e-13);
    }

    #[test]
    fn mgf_at_zero_is_one() {
        for d in catalog() {
            assert_eq!(d.mgf(0.0), 1.0, "{d}");
        }
    }

    #[test]
    fn symmetric_laws_have_even_mgf() {
        for d in catalog().into_iter().filter(|d| d.is_symmetric()) {
            for l in [0.1, 0.7, 2.0, 5.5] {
                let (a, b) = (d.ln_mgf(l), d.ln_mgf(-l));
                assert!((a - b).abs() <= 1e-12 * a.abs(), "{d} at {l}");
            }
        }
    }

    #[test]
    fn abs_moment_examples() {
        assert_eq!(Distribution::rademacher().abs_moment(7.3).unwrap(), 1.0);
        let g = Distribution::gaussian(1.0).unwrap();
        assert!((g.abs_moment(4.0).unwrap() - 3.0).abs() < 3e-9);
        let p = Distribution::centered_poisson(1.0).unwrap();
        assert!((p.abs_moment(4.0).unwrap() - 4.0).abs() < 4e-9);
        assert!(Distribution::rademacher().abs_moment(0.5).is_err());
    }

    #[test]
    fn variance_matches_second_moment() {
        for d in catalog() {
            let m2 = d.abs_moment(2.0).unwrap();
            assert!((m2 - d.variance()).abs() <= 1e-9 * d.variance(), "{d}");
        }
    }

    #[test]
    fn discrete_validation() {
        assert!(Distribution::discrete(vec![-1.0, 1.0], vec![0.4, 0.6]).is_err());
        assert!(Distribution::discrete(vec![-1.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(Distribution::discrete(vec![0.0], vec![1.0]).is_err());
        let d = Distribution::discrete(vec![1.0, -1.0, 1.0 + 1e-13], vec![0.25, 0.5, 0.25]).unwrap();
        match d.law() {
            Law::Discrete { support, .. } => assert_eq!(support.len(), 2),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sampling_is_deterministic_and_streams_differ() {
        let d = Distribution::gaussian(1.0).unwrap();
        let a = d.sample(1000, 42);
        let b = d.sample(1000, 42);
        assert_eq!(a.values, b.values);
        let c = d.sample_stream(1000, 42, 1);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rademacher_sample_mean_in_band() {
        let n = 1_000_000;
        let s = Distribution::rademacher().sample(n, 3);
        let mean = s.values.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_sample_variance_in_band() {
        let n = 1_000_000;
        let s = Distribution::gaussian(1.0).unwrap().sample(n, 11);
        let var = s.values.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&var), "{var}");
    }

    #[test]
    fn parse_specs() {
        let d: Distribution = "uniform:sqrt(3)".parse().unwrap();
        assert!((d.variance() - 1.0).abs() < 1e-12);
        let d = "discrete:-1,2@0.6666666666666666,0.3333333333333333".parse::<Distribution>();
        assert!(d.is_ok());
        assert!("cauchy:1".parse::<Distribution>().is_err());
        let s = "centered-poisson:1";
        assert_eq!(s.parse::<Distribution>().unwrap().to_string(), s);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let d = Distribution::symmetrized_poisson(0.5).unwrap();
        let j = serde_json::to_string(&d).unwrap();
        assert_eq!(j, r#"{"law":"symmetrized_poisson","mu":0.5}"#);
        assert_eq!(serde_json::from_str::<Distribution>(&j).unwrap(), d);
        assert!(serde_json::from_str::<Distribution>(r#"{"law":"gaussian","sigma":1,"x":2}"#).is_err());
        assert!(serde_json::from_str::<Distribution>(r#"{"law":"gaussian","sigma":-1}"#).is_err());
    }

    pub(crate) fn catalog() -> Vec<Distribution> {
        vec![
            Distribution::rademacher(),
            Distribution::gaussian(1.5).unwrap(),
            Distribution::centered_poisson(1.0).unwrap(),
            Distribution::symmetrized_poisson(0.5).unwrap(),
            Distribution::uniform_symmetric(3f64.sqrt()).unwrap(),
            Distribution::discrete(vec![-1.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
        ]
    }
}
