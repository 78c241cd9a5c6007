use proptest::prelude::*;

use khintchine::coeffs::CoefficientVector;
use khintchine::dist::{collapse, Distribution};
use khintchine::entropy::{self, FiniteMetricSpace};
use khintchine::genfun::{default_p_grid, kappa, GeneratingFunction, KappaConfig, PsiFunction};
use khintchine::khinch::{khinchine_sup, NormSpec, SearchConfig};
use khintchine::norms::{
    bphi_norm, gls_norm, raw_moment, sum_distribution, sum_lp, weighted_sum_lp, Engine, EngineConfig, IndependentSum,
    LambdaGrid,
};

fn config(engine: Engine) -> EngineConfig {
    EngineConfig {
        engine,
        ..Default::default()
    }
}

/// Centered two- or three-point law from free parameters.
fn centered_discrete(xs: &[f64], ws: &[f64]) -> Option<Distribution> {
    let total: f64 = ws.iter().sum();
    let probs: Vec<f64> = ws.iter().map(|w| w / total).collect();
    let mean: f64 = xs.iter().zip(&probs).map(|(x, p)| x * p).sum();
    let support: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    Distribution::discrete(support, probs).ok()
}

fn coefficients() -> impl Strategy<Value = CoefficientVector> {
    prop::collection::vec(0.05f64..2.0, 1..7).prop_map(|v| CoefficientVector::normalized(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bphi_is_homogeneous(
        xs in prop::collection::vec(-3.0f64..3.0, 3),
        ws in prop::collection::vec(0.1f64..1.0, 3),
        c in 0.1f64..5.0,
    ) {
        let Some(d) = centered_discrete(&xs, &ws) else { return Ok(()) };
        let (support, probs) = match d.finite_support() {
            Some(atoms) => atoms.into_iter().unzip::<f64, f64, Vec<_>, Vec<_>>(),
            None => unreachable!(),
        };
        let scaled = Distribution::discrete(support.iter().map(|x| c * x).collect(), probs).unwrap();
        let sg = GeneratingFunction::subgaussian();
        let grid = LambdaGrid { lo: 1e-6, hi: 1e5, per_decade: 64 };
        let base = bphi_norm(&d, &sg, &grid).unwrap().value;
        let big = bphi_norm(&scaled, &sg, &grid).unwrap().value;
        prop_assert!((big - c * base).abs() <= 1e-9 * big, "{big} vs {}", c * base);
    }

    #[test]
    fn key_inequality_for_sums(a in coefficients(), which in 0usize..4) {
        let laws = [
            Distribution::rademacher(),
            Distribution::uniform_symmetric(1.0).unwrap(),
            Distribution::symmetrized_poisson(0.7).unwrap(),
            Distribution::discrete(vec![-1.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
        ];
        let sum = IndependentSum::weighted(&laws[which], &a);
        let sg = GeneratingFunction::subgaussian();
        let est = bphi_norm(&sum, &sg, &LambdaGrid::default()).unwrap();
        let tau = est.value;
        for k in 0..200 {
            let l = 1e-3 * 1.05f64.powi(k);
            for s in [l, -l] {
                let lhs = khintchine::norms::CumulantSource::ln_mgf(&sum, s);
                let rhs = sg.eval(l * tau);
                prop_assert!(rhs - lhs >= -1e-9 * rhs.max(1.0), "lambda {s}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn enumeration_and_convolution_agree(a in coefficients(), p in 1.0f64..9.0) {
        let d = Distribution::discrete(vec![-1.0, 0.0, 2.0], vec![0.5, 0.25, 0.25]).unwrap();
        let e = weighted_sum_lp(&d, &a, p, &config(Engine::ExactEnum)).unwrap().value;
        let c = weighted_sum_lp(&d, &a, p, &config(Engine::Convolution)).unwrap().value;
        prop_assert!((e - c).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn lyapunov(a in coefficients(), p in 1.0f64..6.0, dp in 0.1f64..3.0) {
        let d = Distribution::centered_poisson(0.8).unwrap();
        let sum = IndependentSum::weighted(&d, &a);
        // same seed, same draws: the empirical law obeys Lyapunov exactly too
        let cfg = EngineConfig { samples: 20_000, budget: 1 << 14, ..Default::default() };
        let lo = sum_lp(&sum, p, &cfg).unwrap().value;
        let hi = sum_lp(&sum, p + dp, &cfg).unwrap().value;
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn gls_dominates_each_moment(m in 1.0f64..4.0) {
        let d = Distribution::symmetrized_poisson(0.5).unwrap();
        let psi = PsiFunction::from_fn(default_p_grid(12), |p| p.powf(1.0 / m)).unwrap();
        let g = gls_norm(&d, &psi, &EngineConfig::default()).unwrap().value;
        for (p, w) in psi.iter() {
            prop_assert!(d.lp_norm(p).unwrap() <= w * g + 1e-9);
        }
    }

    #[test]
    fn young_inequality(m in 1.2f64..4.0, l in 0.0f64..5.0, u in 0.0f64..5.0) {
        let phi = GeneratingFunction::power(m).unwrap();
        let conj = phi.legendre(u).value;
        prop_assert!(phi.eval(l) + conj >= l * u - 1e-9 * (l * u).max(1.0));
    }

    #[test]
    fn kappa_dominates_first_phi(l in 0.01f64..5.0) {
        let phis = [
            GeneratingFunction::natural(Distribution::rademacher()),
            GeneratingFunction::subgaussian(),
        ];
        let cfg = KappaConfig { n_max: 8, restarts: 1, seed: 1 };
        let k = kappa(&phis, l, &cfg).unwrap();
        prop_assert!(k.value >= phis[0].eval(l) - 1e-12);
    }

    #[test]
    fn collapse_keeps_symmetry(xs in prop::collection::vec(0.0f64..5.0, 1..20), eps in 0.0f64..0.3) {
        let mut atoms = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            let q = 1.0 / (i + 2) as f64;
            atoms.push((x, q));
            atoms.push((-x, q));
        }
        let c = collapse(atoms, eps);
        for k in [1, 3, 5] {
            prop_assert_eq!(raw_moment(&c, k), 0.0);
        }
    }

    #[test]
    fn dudley_scale_equivariance(pts in prop::collection::vec(0.0f64..1.0, 2..9), c in 0.05f64..1.0) {
        let space = FiniteMetricSpace::from_points(&pts).unwrap();
        let base = entropy::dudley_integral(&space, 1.0, 256).unwrap().value;
        let scaled = entropy::dudley_integral(&space, c, 256).unwrap().value;
        // both integrate to 1 > diameter, where H is zero
        prop_assert!((scaled - c * base).abs() <= 1e-12);
    }

    #[test]
    fn entropy_profile_monotone(pts in prop::collection::vec(0.0f64..1.0, 2..25)) {
        let space = FiniteMetricSpace::from_points(&pts).unwrap();
        let eps: Vec<f64> = (1..30).map(|k| k as f64 * 0.035).collect();
        let prof = entropy::entropy_profile(&space, &eps).unwrap();
        prop_assert!(prof.h.windows(2).all(|w| w[0] <= w[1]));
        let diam = space.diameter();
        for (e, h) in prof.eps_grid.iter().zip(&prof.h) {
            if *e >= diam {
                prop_assert_eq!(*h, 0.0);
            }
        }
    }

    #[test]
    fn law_json_round_trip(mu in 0.1f64..4.0, s in 0.1f64..3.0) {
        for d in [
            Distribution::centered_poisson(mu).unwrap(),
            Distribution::gaussian(s).unwrap(),
            Distribution::uniform_symmetric(s).unwrap(),
        ] {
            let j = serde_json::to_string(&d).unwrap();
            prop_assert_eq!(serde_json::from_str::<Distribution>(&j).unwrap(), d.clone());
            prop_assert_eq!(d.to_string().parse::<Distribution>().unwrap(), d);
        }
    }
}

#[test]
fn search_is_monotone_in_restarts() {
    let d = Distribution::discrete(vec![-1.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
    let mut last = f64::NEG_INFINITY;
    for restarts in [0, 1, 2, 4] {
        let cfg = SearchConfig {
            n_max: 8,
            restarts,
            seed: 3,
            ..Default::default()
        };
        let v = khinchine_sup(&d, &NormSpec::Lp(3.0), &cfg).unwrap().value;
        assert!(v >= last);
        last = v;
    }
}

#[test]
fn sum_distribution_is_normalized() {
    let a = CoefficientVector::equal(6);
    let d = Distribution::centered_poisson(1.5).unwrap();
    let (atoms, _) = sum_distribution(&IndependentSum::weighted(&d, &a), &EngineConfig::default()).unwrap();
    let mass: f64 = atoms.iter().map(|(_, q)| q).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(raw_moment(&atoms, 1).abs() < 1e-12);
    assert!((raw_moment(&atoms, 2) - 1.5).abs() < 1e-12);
}
