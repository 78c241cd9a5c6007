//! Metric entropy of finite semi-metric spaces: covering numbers, entropy
//! profiles, the Dudley integral, and a simulator for the supremum of
//! weighted sums of independent copies of a linear subgaussian field.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientVector;
use crate::dist::stream_rng;
use crate::error::{Error, Result};

/// Closed balls are enlarged by this much against rounding in `rho`.
pub const BALL_TOL: f64 = 1e-12;
/// Largest space for which covers are computed exactly.
pub const EXACT_COVER_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceRepr {
    #[serde(default)]
    labels: Option<Vec<String>>,
    rho: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    rho: Vec<Vec<f64>>,
}

impl FiniteMetricSpace {
    /// Checks squareness, zero diagonal, exact symmetry, nonnegativity and the
    /// triangle inequality up to `1e-12`. Distinct points may be at distance 0.
    pub fn new(labels: Vec<String>, rho: Vec<Vec<f64>>) -> Result<Self> {
        let n = rho.len();
        if n == 0 {
            return Err(Error::Metric("empty space".into()));
        }
        if labels.len() != n {
            return Err(Error::Metric(format!("{} labels for {n} points", labels.len())));
        }
        for (i, row) in rho.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Metric(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 0.0 {
                return Err(Error::Metric(format!("rho({i},{i}) = {} is not zero", row[i])));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Metric(format!(
                        "rho({i},{j}) = {v} is not a finite nonnegative number"
                    )));
                }
                if v != rho[j][i] {
                    return Err(Error::Metric(format!("rho({i},{j}) != rho({j},{i})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if rho[i][k] > rho[i][j] + rho[j][k] + 1e-12 {
                        return Err(Error::Metric(format!("triangle inequality fails for ({i},{j},{k})")));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { labels, rho })
    }

    /// Labels `0..n`.
    pub fn unlabeled(rho: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..rho.len()).map(|i| i.to_string()).collect();
        Self::new(labels, rho)
    }

    /// Points of the real line with `rho = |s - t|`.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        let rho = points
            .iter()
            .map(|s| points.iter().map(|t| (s - t).abs()).collect())
            .collect();
        Self::unlabeled(rho)
    }

    /// `n` equally spaced points on `[0, 1]`.
    pub fn uniform_grid(n: usize) -> Result<Self> {
        if n < 2 {
            return Self::from_points(&[0.0]);
        }
        let pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Self::from_points(&pts)
    }

    /// Euclidean distances between rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rho = rows
            .iter()
            .map(|a| {
                rows.iter()
                    .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                    .collect()
            })
            .collect();
        Self::unlabeled(rho)
    }

    /// Square matrix with a header row of labels. A leading label column is
    /// accepted when the header has one extra cell.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse("space", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse("space", e.to_string()))?;
            rows.push((i, rec.iter().map(str::to_string).collect::<Vec<String>>()));
        }
        let n = rows.len();
        let label_col = match header.len() {
            h if h == n => false,
            h if h == n + 1 => true,
            h => {
                return Err(Error::parse(
                    "space",
                    format!("header has {h} cells but there are {n} rows"),
                ))
            }
        };
        let labels = if label_col { header[1..].to_vec() } else { header };
        let rho = rows
            .into_iter()
            .map(|(i, cells)| {
                let cells = if label_col { &cells[1..] } else { &cells[..] };
                cells
                    .iter()
                    .map(|c| {
                        c.parse::<f64>()
                            .map_err(|_| Error::parse("space", format!("row {i}: `{c}` is not a number")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, rho)
    }

    /// `{"labels": [...], "rho": [[...], ...]}`; labels are optional.
    pub fn from_json(text: &str) -> Result<Self> {
        let repr: SpaceRepr = serde_json::from_str(text).map_err(|e| Error::parse("space", e.to_string()))?;
        match repr.labels {
            Some(l) => Self::new(l, repr.rho),
            None => Self::unlabeled(repr.rho),
        }
    }

    /// Reads `.json` as JSON and anything else as CSV.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_csv(text.as_bytes())
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.rho[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn diameter(&self) -> f64 {
        self.rho.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Sorted distinct positive distances.
    pub fn distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.rho.iter().flatten().copied().filter(|&x| x > 0.0).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    /// The same space with `rho` multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::param("scale", "must be positive and finite"));
        }
        Ok(FiniteMetricSpace {
            labels: self.labels.clone(),
            rho: self.rho.iter().map(|r| r.iter().map(|x| c * x).collect()).collect(),
        })
    }

    fn ball_members(&self, eps: f64) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|c| (0..self.len()).filter(|&z| self.rho[c][z] <= eps + BALL_TOL).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cover {
    pub count: usize,
    pub exact: bool,
    pub centers: Vec<usize>,
}

/// Minimal number of closed `eps`-balls centered in the space that cover it:
/// exact for `|Z| <= 20`, greedy above.
pub fn covering_number(space: &FiniteMetricSpace, eps: f64) -> Result<Cover> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    Ok(if space.len() <= EXACT_COVER_LIMIT {
        exact_cover(space, eps)
    } else {
        greedy_cover(space, eps)
    })
}

/// Greedy cover: repeatedly take the ball covering most uncovered points,
/// lowest index on ties. At most `1 + ln |Z|` times the optimum.
pub fn greedy_cover(space: &FiniteMetricSpace, eps: f64) -> Cover {
    let balls = space.ball_members(eps);
    let mut covered = vec![false; space.len()];
    let mut left = space.len();
    let mut centers = Vec::new();
    while left > 0 {
        let (best, _) = balls
            .iter()
            .enumerate()
            .map(|(c, b)| (c, b.iter().filter(|&&z| !covered[z]).count()))
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        for &z in &balls[best] {
            if !covered[z] {
                covered[z] = true;
                left -= 1;
            }
        }
        centers.push(best);
    }
    Cover {
        count: centers.len(),
        exact: false,
        centers,
    }
}

/// Exact cover by depth-first search: branch on the balls containing the
/// lowest uncovered point, bounded by the greedy solution.
pub fn exact_cover(space: &FiniteMetricSpace, eps: f64) -> Cover {
    assert!(space.len() <= 64, "exact cover uses 64-bit masks");
    let n = space.len();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let masks: Vec<u64> = space
        .ball_members(eps)
        .iter()
        .map(|b| b.iter().fold(0u64, |m, &z| m | (1 << z)))
        .collect();
    let greedy = greedy_cover(space, eps);
    let mut best = greedy.centers.clone();
    let mut chosen = Vec::new();

    fn dfs(masks: &[u64], full: u64, covered: u64, chosen: &mut Vec<usize>, best: &mut Vec<usize>) {
        if covered == full {
            if chosen.len() < best.len() {
                *best = chosen.clone();
            }
            return;
        }
        if chosen.len() + 1 >= best.len() {
            return;
        }
        let z = (!covered & full).trailing_zeros() as usize;
        for (c, &m) in masks.iter().enumerate() {
            if m & (1 << z) != 0 {
                chosen.push(c);
                dfs(masks, full, covered | m, chosen, best);
                chosen.pop();
            }
        }
    }
    dfs(&masks, full, 0, &mut chosen, &mut best);
    best.sort_unstable();
    Cover {
        count: best.len(),
        exact: true,
        centers: best,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyProfile {
    /// Decreasing.
    pub eps_grid: Vec<f64>,
    /// `H(eps) = ln N(eps)`.
    pub h: Vec<f64>,
    pub counts: Vec<usize>,
    pub exact: Vec<bool>,
}

/// `H(eps)` on a grid, reported in decreasing `eps`. A cover of radius `e`
/// also covers at any larger radius, so greedy counts are lowered to the
/// running minimum, which keeps `H` nonincreasing in `eps`.
pub fn entropy_profile(space: &FiniteMetricSpace, eps_grid: &[f64]) -> Result<EntropyProfile> {
    let mut eps: Vec<f64> = eps_grid.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let covers = eps
        .par_iter()
        .map(|&e| covering_number(space, e))
        .collect::<Result<Vec<_>>>()?;
    let mut counts: Vec<usize> = covers.iter().map(|c| c.count).collect();
    for i in (0..counts.len().saturating_sub(1)).rev() {
        counts[i] = counts[i].min(counts[i + 1]);
    }
    Ok(EntropyProfile {
        h: counts.iter().map(|&c| (c as f64).ln()).collect(),
        exact: covers.iter().map(|c| c.exact).collect(),
        counts,
        eps_grid: eps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DudleyIntegral {
    pub value: f64,
    /// True when every piece of the step function was integrated exactly
    /// with exact covers.
    pub exact: bool,
    pub upper_limit: f64,
    pub pieces: usize,
}

/// `int_0^{max(1, diam)} H^{1/2}(eps) d eps` for the space with `rho` scaled by
/// `sigma_scale`. `H` is a step function that only changes at pairwise
/// distances; when there are at most `eps_steps` of them it is integrated
/// exactly piece by piece, otherwise on `eps_steps` log-spaced nodes with the
/// left-endpoint (upper) rule. Below the smallest positive distance `H` is
/// constant, so that piece is always exact.
pub fn dudley_integral(space: &FiniteMetricSpace, sigma_scale: f64, eps_steps: usize) -> Result<DudleyIntegral> {
    let space = space.scaled(sigma_scale)?;
    let upper = space.diameter().max(1.0);
    let dists = space.distances();
    if dists.is_empty() {
        return Ok(DudleyIntegral {
            value: 0.0,
            exact: true,
            upper_limit: upper,
            pieces: 0,
        });
    }
    let nodes: Vec<f64> = if dists.len() <= eps_steps.max(1) {
        dists.clone()
    } else {
        let (lo, hi) = (dists[0], *dists.last().unwrap());
        let steps = eps_steps.max(2);
        (0..steps)
            .map(|i| lo * (hi / lo).powf(i as f64 / (steps - 1) as f64))
            .collect()
    };
    let exact_nodes = dists.len() <= eps_steps.max(1);
    // piece [0, d_1) uses the count just below d_1
    let mut edges = vec![0.0];
    edges.extend(&nodes);
    edges.push(upper);
    let mut value = 0.0;
    let mut exact = exact_nodes;
    let pieces: Vec<(f64, f64, f64)> = edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let at = if w[0] == 0.0 { 0.5 * w[1] } else { w[0] };
            (w[0], w[1], at)
        })
        .collect();
    let covers = pieces
        .par_iter()
        .map(|&(_, _, at)| covering_number(&space, at))
        .collect::<Result<Vec<_>>>()?;
    for ((a, b, _), c) in pieces.iter().zip(&covers) {
        value += (c.count as f64).ln().sqrt() * (b - a);
        exact &= c.exact;
    }
    Ok(DudleyIntegral {
        value,
        exact,
        upper_limit: upper,
        pieces: pieces.len(),
    })
}

// ---------------------------------------------------------------------------
// field simulator

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Gaussian,
    Rademacher,
}

/// `eta(z) = sum_l g_l f_l(z)` with i.i.d. drivers `g_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldModel {
    /// `features[z][l] = f_l(z)`.
    pub features: Vec<Vec<f64>>,
    pub driver: Driver,
}

impl FieldModel {
    pub fn new(features: Vec<Vec<f64>>, driver: Driver) -> Result<Self> {
        let width = features.first().map(Vec::len).unwrap_or(0);
        if features.is_empty() || width == 0 {
            return Err(Error::param("features", "need at least one point and one feature"));
        }
        if features
            .iter()
            .any(|r| r.len() != width || r.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::param("features", "rows must be finite and of equal length"));
        }
        Ok(FieldModel { features, driver })
    }

    /// `k` points with orthonormal feature rows (independent field values).
    pub fn orthonormal(k: usize, driver: Driver) -> Result<Self> {
        Self::new(
            (0..k)
                .map(|z| (0..k).map(|l| if l == z { 1.0 } else { 0.0 }).collect())
                .collect(),
            driver,
        )
    }

    pub fn points(&self) -> usize {
        self.features.len()
    }

    /// `sup_z (sum_l f_l(z)^2)^{1/2}`.
    pub fn sigma(&self) -> f64 {
        self.features
            .iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance between feature rows: the exact `L_2` distance of
    /// the field, and an upper bound for its `B(phi_2)` distance under a
    /// Rademacher driver.
    pub fn rho_space(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::from_rows(&self.features)
    }
}

/// The moment orders reported by [`field_sup_stats`].
pub const FIELD_MOMENTS: [f64; 4] = [2.0, 4.0, 6.0, 8.0];
const FIELD_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentStat {
    pub p: f64,
    /// `||sup_z Y||_p`.
    pub norm: f64,
    pub se: f64,
    /// `norm / sqrt(p)`.
    pub ratio: f64,
    pub ratio_se: f64,
    /// `ratio / (sigma + Dudley integral)`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetStats {
    pub n: usize,
    pub moments: Vec<MomentStat>,
    /// Largest `ratio` over the moment orders.
    pub ratio_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldReport {
    pub points: usize,
    pub driver: Driver,
    pub sigma: f64,
    pub rho: Vec<Vec<f64>>,
    pub rho_is_bound: bool,
    pub dudley_integral: f64,
    pub dudley_exact: bool,
    pub dudley_functional: f64,
    pub sets: Vec<SetStats>,
    /// Largest `ratio_bound` over the coefficient sets.
    pub ratio_bound: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Simulates `sup_z Y(z)`, `Y = sum_i a_i eta_i` over independent copies
/// `eta_i`, for every coefficient set, and reports `||sup Y||_p` for
/// p in {2, 4, 6, 8} with standard errors. Set `s`, chunk `c` draws from
/// sub-stream `(s << 32) | c`.
pub fn field_sup_stats(
    model: &FieldModel,
    coeff_sets: &[CoefficientVector],
    samples: usize,
    seed: u64,
    eps_steps: usize,
) -> Result<FieldReport> {
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2"));
    }
    if coeff_sets.is_empty() {
        return Err(Error::param("coeff_sets", "need at least one coefficient vector"));
    }
    let space = model.rho_space()?;
    let dudley = dudley_integral(&space, 1.0, eps_steps)?;
    let sigma = model.sigma();
    let functional = sigma + dudley.value;
    let width = model.features[0].len();

    let mut sets = Vec::new();
    for (s, a) in coeff_sets.iter().enumerate() {
        let chunks = samples.div_ceil(FIELD_CHUNK);
        let partial: Vec<[[f64; 2]; 4]> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(seed, ((s as u64) << 32) | c as u64);
                let len = FIELD_CHUNK.min(samples - c * FIELD_CHUNK);
                let mut acc = [[0.0; 2]; 4];
                let mut g = vec![0.0; width];
                for _ in 0..len {
                    g.iter_mut().for_each(|x| *x = 0.0);
                    for &ai in a.entries() {
                        for gl in g.iter_mut() {
                            let d: f64 = match model.driver {
                                Driver::Gaussian => rng.sample(StandardNormal),
                                Driver::Rademacher => {
                                    if rng.random::<bool>() {
                                        1.0
                                    } else {
                                        -1.0
                                    }
                                }
                            };
                            *gl += ai * d;
                        }
                    }
                    let sup = model
                        .features
                        .iter()
                        .map(|row| row.iter().zip(&g).map(|(f, x)| f * x).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max);
                    for (k, &p) in FIELD_MOMENTS.iter().enumerate() {
                        let v = sup.abs().powf(p);
                        acc[k][0] += v;
                        acc[k][1] += v * v;
                    }
                }
                acc
            })
            .collect();
        let nf = samples as f64;
        let mut moments = Vec::new();
        for (k, &p) in FIELD_MOMENTS.iter().enumerate() {
            let (s1, s2) = partial.iter().fold((0.0, 0.0), |t, a| (t.0 + a[k][0], t.1 + a[k][1]));
            let m = s1 / nf;
            let var = ((s2 / nf - m * m) * nf / (nf - 1.0)).max(0.0);
            let se_m = (var / nf).sqrt();
            let norm = m.powf(1.0 / p);
            let se = if m > 0.0 { norm / (p * m) * se_m } else { 0.0 };
            let ratio = norm / p.sqrt();
            moments.push(MomentStat {
                p,
                norm,
                se,
                ratio,
                ratio_se: se / p.sqrt(),
                normalized: if functional > 0.0 { ratio / functional } else { 0.0 },
            });
        }
        let ratio_bound = moments.iter().map(|m| m.ratio).fold(0.0, f64::max);
        sets.push(SetStats {
            n: a.len(),
            moments,
            ratio_bound,
        });
    }
    Ok(FieldReport {
        points: model.points(),
        driver: model.driver,
        sigma,
        rho: space.matrix().to_vec(),
        rho_is_bound: model.driver == Driver::Rademacher,
        dudley_integral: dudley.value,
        dudley_exact: dudley.exact,
        dudley_functional: functional,
        ratio_bound: sets.iter().map(|s| s.ratio_bound).fold(0.0, f64::max),
        sets,
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::from_points(&[0.0, d]).unwrap()
    }

    /// Smallest k such that some k-subset of centers covers everything.
    fn brute_force_cover(space: &FiniteMetricSpace, eps: f64) -> usize {
        let n = space.len();
        (1..=n)
            .find(|&k| {
                (0u32..1 << n)
                    .filter(|s| s.count_ones() as usize == k)
                    .any(|s| (0..n).all(|z| (0..n).any(|c| s & (1 << c) != 0 && space.rho(c, z) <= eps + BALL_TOL)))
            })
            .unwrap()
    }

    #[test]
    fn covering_examples() {
        let d = 0.7;
        assert_eq!(covering_number(&two_point(d), d).unwrap().count, 1);
        assert_eq!(covering_number(&two_point(d), d / 2.0 - 1e-6).unwrap().count, 2);
        let grid = FiniteMetricSpace::uniform_grid(11).unwrap();
        let c = covering_number(&grid, 0.25).unwrap();
        assert!(c.exact);
        assert_eq!(c.count, brute_force_cover(&grid, 0.25));
        assert_eq!(c.count, 3);
    }

    #[test]
    fn validation() {
        assert!(FiniteMetricSpace::unlabeled(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(FiniteMetricSpace::unlabeled(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
        let bad_triangle = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::unlabeled(bad_triangle).is_err());
        // semi-metric: distinct points at distance zero
        assert!(FiniteMetricSpace::unlabeled(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_ok());
    }

    #[test]
    fn csv_and_json_ingest() {
        let csv = "a,b,c\n0,1,2\n1,0,1\n2,1,0\n";
        let s = FiniteMetricSpace::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.labels(), ["a", "b", "c"]);
        let with_col = ",a,b\na,0,0.5\nb,0.5,0\n";
        let s = FiniteMetricSpace::from_csv(with_col.as_bytes()).unwrap();
        assert_eq!(s.rho(0, 1), 0.5);
        let j = FiniteMetricSpace::from_json(r#"{"rho": [[0, 2], [2, 0]]}"#).unwrap();
        assert_eq!(j.diameter(), 2.0);
        assert!(FiniteMetricSpace::from_json(r#"{"rho": [[0]], "extra": 1}"#).is_err());
    }

    #[test]
    fn dudley_examples() {
        for d in [0.1, 0.5, 1.0] {
            let v = dudley_integral(&two_point(d), 1.0, 64).unwrap();
            assert!((v.value - 2f64.ln().sqrt() * d).abs() < 1e-12);
            assert!(v.exact);
        }
        let single = FiniteMetricSpace::from_points(&[0.3]).unwrap();
        assert_eq!(dudley_integral(&single, 1.0, 64).unwrap().value, 0.0);
    }

    #[test]
    fn dudley_grid_matches_breakpoint_oracle() {
        // on 11 equally spaced points a cover of radius e in [k/10, (k+1)/10)
        // needs ceil(11 / (2k + 1)) balls
        let grid = FiniteMetricSpace::uniform_grid(11).unwrap();
        let mut oracle = 0.1 * 11f64.ln().sqrt();
        for k in 1..10 {
            let n = (11.0 / (2 * k + 1) as f64).ceil();
            oracle += 0.1 * n.ln().sqrt();
        }
        let v = dudley_integral(&grid, 1.0, 64).unwrap();
        assert!((v.value - oracle).abs() < 1e-3, "{} vs {oracle}", v.value);
    }

    #[test]
    fn dudley_scale_equivariance() {
        let grid = FiniteMetricSpace::uniform_grid(7).unwrap();
        let base = dudley_integral(&grid, 0.5, 64).unwrap().value;
        let scaled = dudley_integral(&grid, 0.25, 64).unwrap().value;
        assert!((scaled - 0.5 * base).abs() < 1e-12);
    }

    #[test]
    fn profile_is_monotone() {
        let pts: Vec<f64> = (0..30).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let s = FiniteMetricSpace::from_points(&pts).unwrap();
        let eps: Vec<f64> = (1..40).map(|k| k as f64 * 0.02).collect();
        let p = entropy_profile(&s, &eps).unwrap();
        assert!(p.h.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*p.h.first().unwrap(), 0.0);
        assert!(p.exact.iter().all(|e| !e));
    }

    #[test]
    fn single_point_field() {
        let m = FieldModel::new(vec![vec![0.6, 0.8]], Driver::Gaussian).unwrap();
        let r = field_sup_stats(&m, &[CoefficientVector::equal(3)], 20_000, 4, 64).unwrap();
        let two = &r.sets[0].moments[0];
        assert!((two.norm - 1.0).abs() <= 3.0 * two.se, "{two:?}");
        assert_eq!(r.dudley_integral, 0.0);
    }
}
