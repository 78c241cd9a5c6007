use crate::numeric::lex_less;

/// Tolerance under which two objective values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Best-so-far candidate. Ties (to [`TIE_TOL`]) go to the lexicographically
/// smallest witness so that the result does not depend on evaluation order.
#[derive(Clone, Debug)]
pub struct Incumbent {
    maximize: bool,
    value: f64,
    witness: Vec<f64>,
    label: String,
}

impl Incumbent {
    pub fn new(maximize: bool) -> Self {
        Incumbent {
            maximize,
            value: if maximize { f64::NEG_INFINITY } else { f64::INFINITY },
            witness: Vec::new(),
            label: String::new(),
        }
    }

    /// Returns true if the candidate replaced the incumbent.
    pub fn offer(&mut self, value: f64, witness: &[f64], label: &str) -> bool {
        if value.is_nan() {
            return false;
        }
        let better = if self.maximize {
            value > self.value + TIE_TOL
        } else {
            value < self.value - TIE_TOL
        };
        let tie = (value - self.value).abs() <= TIE_TOL && lex_less(witness, &self.witness);
        if better || tie || self.witness.is_empty() {
            self.value = value;
            self.witness = witness.to_vec();
            self.label = label.to_string();
            true
        } else {
            false
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_empty(&self) -> bool {
        self.witness.is_empty()
    }
}

/// Two-level weight patterns in dimension `n`: the first `j` squared weights
/// share mass `w`, the remaining `n - j` share `1 - w`.
pub fn two_level_patterns(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for j in 1..n {
        for w in [0.25, 0.5, 0.75] {
            let hi = w / j as f64;
            let lo = (1.0 - w) / (n - j) as f64;
            out.push((0..n).map(|k| if k < j { hi } else { lo }).collect());
        }
    }
    out
}

/// Dimensions at which two-level patterns are tried: powers of two up to
/// `n_max`, plus `n_max` itself.
pub fn pattern_dims(n_max: usize) -> Vec<usize> {
    let mut dims: Vec<usize> = (1..).map(|k| 1usize << k).take_while(|&d| d <= n_max).collect();
    if n_max >= 2 && !dims.contains(&n_max) {
        dims.push(n_max);
    }
    dims
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_prefer_lexicographically_smaller() {
        let mut inc = Incumbent::new(true);
        inc.offer(1.0, &[1.0], "a");
        inc.offer(1.0 + 1e-14, &[0.5, 0.5], "b");
        assert_eq!(inc.label(), "b");
        inc.offer(1.0, &[0.9], "c");
        assert_eq!(inc.label(), "b");
        inc.offer(2.0, &[0.9], "d");
        assert_eq!(inc.label(), "d");
    }

    #[test]
    fn patterns_live_on_the_simplex() {
        for b in two_level_patterns(5) {
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(pattern_dims(12), vec![2, 4, 8, 12]);
        assert_eq!(pattern_dims(1), Vec::<usize>::new());
    }
}
