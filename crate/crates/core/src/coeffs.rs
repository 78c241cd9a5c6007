use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of D(n): a real n-tuple with unit Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    /// Validates `sum a_k^2 = 1` to 1e-12.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("weights", "need at least one coefficient"));
        }
        if entries.iter().any(|a| !a.is_finite()) {
            return Err(Error::param("weights", "coefficients must be finite"));
        }
        let sq: f64 = entries.iter().map(|a| a * a).sum();
        if (sq - 1.0).abs() > 1e-12 {
            return Err(Error::param("weights", format!("sum of squares is {sq}, expected 1")));
        }
        Ok(CoefficientVector(entries))
    }

    /// Rescales arbitrary nonzero entries onto the unit sphere.
    pub fn normalized(entries: Vec<f64>) -> Result<Self> {
        let norm = entries.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::param("weights", "cannot normalize a zero vector"));
        }
        Self::new(entries.into_iter().map(|a| a / norm).collect())
    }

    /// Coefficients `a_k = sqrt(b_k)` from a point `b` of the simplex.
    pub fn from_squares(b: &[f64], signs: Option<&[f64]>) -> Result<Self> {
        let total: f64 = b.iter().sum();
        let entries = b
            .iter()
            .enumerate()
            .map(|(k, bk)| {
                let s = signs.map_or(1.0, |s| s[k].signum());
                s * (bk.max(0.0) / total).sqrt()
            })
            .collect();
        Self::normalized(entries)
    }

    pub fn equal(n: usize) -> Self {
        assert!(n >= 1);
        let a = 1.0 / (n as f64).sqrt();
        CoefficientVector(vec![a; n])
    }

    /// `e_k` in dimension `n`.
    pub fn one_hot(n: usize, k: usize) -> Self {
        assert!(k < n);
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        CoefficientVector(v)
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `||a||_p`; at most one for `p >= 2`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.0.iter().map(|a| a.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(c: CoefficientVector) -> Vec<f64> {
        c.0
    }
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// `equal:N`, `onehot` / `onehot:N`, `list:A1,A2,..` (must be unit norm)
/// or `raw:A1,A2,..` (normalized).
impl FromStr for CoefficientVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let list = |a: &str| -> Result<Vec<f64>> {
            a.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse("weights", format!("`{t}` is not a number")))
                })
                .collect()
        };
        match kind.trim() {
            "equal" => {
                let n: usize = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse("weights", "equal:N needs a positive integer"))?;
                if n == 0 {
                    return Err(Error::parse("weights", "equal:N needs N >= 1"));
                }
                Ok(Self::equal(n))
            }
            "onehot" => {
                let n = if arg.is_empty() {
                    1
                } else {
                    arg.trim()
                        .parse()
                        .map_err(|_| Error::parse("weights", "onehot:N needs a positive integer"))?
                };
                if n == 0 {
                    return Err(Error::parse("weights", "onehot:N needs N >= 1"));
                }
                Ok(Self::one_hot(n, 0))
            }
            "list" => Self::new(list(arg)?),
            "raw" => Self::normalized(list(arg)?),
            other => Err(Error::parse("weights", format!("unknown weights kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(CoefficientVector::new(vec![0.6, 0.8]).is_ok());
        assert!(CoefficientVector::new(vec![0.6, 0.7]).is_err());
        assert!(CoefficientVector::new(vec![]).is_err());
        assert!(CoefficientVector::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn lp_norm_bounded_by_one() {
        let a: CoefficientVector = "raw:1,2,3,4".parse().unwrap();
        for p in [2.0, 3.0, 4.5, 10.0] {
            assert!(a.lp_norm(p) <= 1.0 + 1e-15);
        }
        assert!((a.lp_norm(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse() {
        assert_eq!("equal:4".parse::<CoefficientVector>().unwrap().entries(), &[0.5; 4]);
        assert_eq!(
            "onehot:3".parse::<CoefficientVector>().unwrap().entries(),
            &[1.0, 0.0, 0.0]
        );
        assert!("equal:0".parse::<CoefficientVector>().is_err());
        assert!("bogus:1".parse::<CoefficientVector>().is_err());
    }
}
