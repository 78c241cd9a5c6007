//! Small numerical kernels shared by the other modules: stable elementary
//! functions, 1-D root bracketing and maximization, and half-line quadrature.

use std::f64::consts::{FRAC_PI_2, LN_2};

/// `e^x - 1 - x` without cancellation near zero.
pub fn expm1_minus_id(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            k += 1.0;
            term *= x / k;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `ln cosh x`, accurate for tiny and huge arguments.
pub fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    if x < 20.0 {
        let s = (0.5 * x).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        x - LN_2 + (-2.0 * x).exp().ln_1p()
    }
}

/// `ln(sinh x / x)`, the log-MGF shape of the symmetric uniform law.
pub fn ln_sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < 0.5 {
        // sinh(x)/x - 1 = sum_{k>=1} x^{2k}/(2k+1)!
        let x2 = x * x;
        let mut term = x2 / 6.0;
        let mut sum = term;
        let mut k = 1.0;
        while term > 1e-18 * sum && sum > 0.0 {
            k += 1.0;
            term *= x2 / ((2.0 * k) * (2.0 * k + 1.0));
            sum += term;
        }
        sum.ln_1p()
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x - (2.0 * x).ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// Geometric grid from `lo` to `hi` inclusive with `per_decade` points per decade.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).round().max(1.0) as usize;
    let ratio = (hi / lo).ln() / steps as f64;
    (0..=steps)
        .map(|i| if i == steps { hi } else { lo * (ratio * i as f64).exp() })
        .collect()
}

/// Smallest `x` in `[lo, hi]` with `f(x) >= target`, for nondecreasing `f`.
/// Runs until the bracket cannot shrink further in floating point.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // pick whichever endpoint is closer in value
    if (f(lo) - target).abs() <= (f(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal function on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= width {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(a, f(a)), (c, fc), (d, fd), (b, f(b))];
    candidates.into_iter().fold(
        (a, f64::NEG_INFINITY),
        |best, cur| if cur.1 > best.1 { cur } else { best },
    )
}

/// Integral of `f` over `[0, inf)` by exp-sinh (double exponential) quadrature.
/// `f` may have an integrable power singularity or zero at the origin.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F) -> f64 {
    let node = |t: f64| {
        let x = (FRAC_PI_2 * t.sinh()).exp();
        let w = FRAC_PI_2 * t.cosh() * x;
        (x, w)
    };
    let eval = |t: f64| {
        let (x, w) = node(t);
        if !x.is_finite() || x == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let t_max = 4.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        let done = (next - estimate).abs() <= 1e-14 * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Lexicographic comparison for witness tie-breaks.
pub fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() < b.len()
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_cosh_matches_direct_in_the_middle() {
        for x in [0.3f64, 1.0, 2.5, 7.0, 19.9, 20.1, 35.0] {
            let direct = x.cosh().ln();
            assert!((ln_cosh(x) - direct).abs() <= 1e-13 * direct.max(1e-300));
        }
        // tiny argument: ln cosh x ~ x^2/2 - x^4/12
        let x: f64 = 1e-4;
        let series = x * x / 2.0 - x.powi(4) / 12.0;
        assert!((ln_cosh(x) - series).abs() <= 1e-15 * series);
    }

    #[test]
    fn ln_sinhc_series_and_asymptotic_agree_with_direct() {
        for x in [0.1f64, 0.49, 0.51, 3.0, 19.0, 21.0] {
            let direct = (x.sinh() / x).ln();
            assert!((ln_sinhc(x) - direct).abs() <= 1e-12 * direct, "x = {x}");
        }
    }

    #[test]
    fn expm1_minus_id_small() {
        let x: f64 = 1e-5;
        let expect = x * x / 2.0 + x * x * x / 6.0 + x.powi(4) / 24.0;
        assert!((expm1_minus_id(x) - expect).abs() <= 1e-15 * expect);
        assert!((expm1_minus_id(2.0) - (2f64.exp() - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn half_line_quadrature_gamma() {
        // int_0^inf x^{1.5} e^{-x} dx = Gamma(2.5) = 1.329340388179137
        let v = integrate_half_line(|x| x.powf(1.5) * (-x).exp());
        assert!((v - 1.329_340_388_179_137).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_parabola_top() {
        let (x, v) = golden_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection_sums_to_one() {
        let p = project_simplex(&[0.9, 0.8, -0.3, 0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e-4, 1e3, 64);
        assert_eq!(g.len(), 7 * 64 + 1);
        assert_eq!(g[0], 1e-4);
        assert_eq!(*g.last().unwrap(), 1e3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
