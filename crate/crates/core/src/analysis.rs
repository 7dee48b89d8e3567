//! Post-processing of trajectories: the entropy root pair, decay-rate fits,
//! uniform-bound certificates and empirical convergence orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::DiagnosticsRecord;

/// Norms at or below this value are excluded from decay fits.
pub const NORM_FLOOR: f64 = 1e-13;

/// Minimum number of usable samples for a decay fit.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Corridor tolerance for the mean temperature.
pub const CORRIDOR_TOL: f64 = 0.01;

fn entropy_gap(x: f64, e0: f64) -> f64 {
    x - x.ln() - e0
}

/// Bisection until the bracket stops shrinking. `f(lo)` and `f(hi)` must
/// have opposite signs.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// The two roots `α₁ ≤ 1 ≤ α₂` of `x − ln x = E₀`.
pub fn entropy_roots(e0: f64) -> Result<(f64, f64)> {
    if !(e0 >= 1.0) || !e0.is_finite() {
        return Err(Error::NoRoots(e0));
    }
    if e0 == 1.0 {
        return Ok((1.0, 1.0));
    }
    let f = |x: f64| entropy_gap(x, e0);
    // f(e^{−E₀−1}) > 1 and f(1) = 1 − E₀ < 0
    let alpha1 = bisect(f, (-e0 - 1.0).exp(), 1.0);
    let mut upper = 2.0;
    while f(upper) <= 0.0 {
        upper *= 2.0;
    }
    let alpha2 = bisect(f, 1.0, upper);
    Ok((alpha1, alpha2))
}

/// Least-squares fit of `ln(norm) ≈ log_c − eta0 · t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub eta0: f64,
    pub log_c: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_samples: usize,
    /// Samples inside the window dropped for being at or below the floor.
    pub n_excluded: usize,
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, r²)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (intercept, slope, r2)
}

pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    if !(window.0 < window.1) {
        return Err(Error::InvalidArgument(format!(
            "fit window ({}, {}) is empty",
            window.0, window.1
        )));
    }
    let in_window = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1);
    let mut excluded = 0;
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for &(t, norm) in in_window {
        if norm > NORM_FLOOR && norm.is_finite() {
            ts.push(t);
            ys.push(norm.ln());
        } else {
            excluded += 1;
        }
    }
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            usable: ts.len(),
            excluded,
        });
    }
    let (log_c, slope, r_squared) = linear_fit(&ts, &ys);
    Ok(DecayFit {
        eta0: -slope,
        log_c,
        r_squared,
        window,
        n_samples: ts.len(),
        n_excluded: excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsCertificate {
    pub inf_v: f64,
    pub sup_v: f64,
    pub inf_theta: f64,
    pub sup_theta: f64,
    pub t_range: (f64, f64),
    pub alpha1: f64,
    pub min_mean_theta: f64,
    pub max_mean_theta: f64,
    pub corridor_ok: bool,
}

/// Scans the records for extrema of `v` and `θ` and checks that the mean
/// temperature stays in `[α₁ − tol, 1 + tol]`, `α₁` the lower root for `e0`.
pub fn bounds_certificate(records: &[DiagnosticsRecord], e0: f64) -> Result<BoundsCertificate> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let (alpha1, _) = entropy_roots(e0)?;
    let mut c = BoundsCertificate {
        inf_v: f64::INFINITY,
        sup_v: f64::NEG_INFINITY,
        inf_theta: f64::INFINITY,
        sup_theta: f64::NEG_INFINITY,
        t_range: (f64::INFINITY, f64::NEG_INFINITY),
        alpha1,
        min_mean_theta: f64::INFINITY,
        max_mean_theta: f64::NEG_INFINITY,
        corridor_ok: true,
    };
    for r in records {
        c.inf_v = c.inf_v.min(r.min_v);
        c.sup_v = c.sup_v.max(r.max_v);
        c.inf_theta = c.inf_theta.min(r.min_theta);
        c.sup_theta = c.sup_theta.max(r.max_theta);
        c.t_range = (c.t_range.0.min(r.t), c.t_range.1.max(r.t));
        c.min_mean_theta = c.min_mean_theta.min(r.mean_theta);
        c.max_mean_theta = c.max_mean_theta.max(r.mean_theta);
    }
    c.corridor_ok =
        c.min_mean_theta >= alpha1 - CORRIDOR_TOL && c.max_mean_theta <= 1.0 + CORRIDOR_TOL;
    Ok(c)
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<f64> {
    if errors.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 levels, got {}",
            errors.len()
        )));
    }
    if errors.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::InvalidArgument(
            "h must be strictly decreasing".into(),
        ));
    }
    if let Some((h, e)) = errors.iter().find(|(h, e)| !(*e > 0.0) || !(*h > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "non-positive level (h = {h}, e = {e})"
        )));
    }
    let xs: Vec<f64> = errors.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
    Ok(linear_fit(&xs, &ys).1)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn roots_at_minimum_and_below() {
        assert_eq!(entropy_roots(1.0).unwrap(), (1.0, 1.0));
        assert!(matches!(entropy_roots(0.5), Err(Error::NoRoots(_))));
    }

    #[test]
    fn roots_for_two() {
        let (a1, a2) = entropy_roots(2.0).unwrap();
        assert!((a1 - 0.1586).abs() < 1e-4, "{a1}");
        assert!((a2 - 3.1462).abs() < 1e-4, "{a2}");
        assert!(entropy_gap(a1, 2.0).abs() <= 1e-12);
        assert!(entropy_gap(a2, 2.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_exponential_fit() {
        let series: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.2;
                (t, 3.0 * (-0.7 * t).exp())
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 10.0)).unwrap();
        assert!((fit.eta0 - 0.7).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
        assert!((fit.log_c - 3f64.ln()).abs() < 1e-10);
        assert_eq!(fit.n_samples, 50);
    }

    #[test]
    fn noisy_exponential_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let series: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.2;
                (t, 3.0 * (-0.7 * t).exp() * rng.gen_range(0.95..1.05))
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 10.0)).unwrap();
        assert!(fit.eta0 > 0.6 && fit.eta0 < 0.8, "{}", fit.eta0);
        assert!(fit.r_squared >= 0.97, "{}", fit.r_squared);
    }

    #[test]
    fn floor_samples_are_excluded() {
        let series: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1e-14)).collect();
        match fit_decay_rate(&series, (0.0, 20.0)) {
            Err(Error::InsufficientData { usable, excluded }) => {
                assert_eq!((usable, excluded), (0, 20))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn convergence_order_examples() {
        let hs = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
        let sq: Vec<(f64, f64)> = hs.iter().map(|&h| (h, h * h)).collect();
        assert!((convergence_order(&sq).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 5.0 * h)).collect();
        assert!((convergence_order(&lin).unwrap() - 1.0).abs() < 1e-12);
        let bad = [(0.1, 1.0), (0.05, 0.0), (0.025, 1.0)];
        assert!(matches!(
            convergence_order(&bad),
            Err(Error::InvalidArgument(_))
        ));
        assert!(convergence_order(&sq[..2]).is_err());
    }

    fn rec(t: f64, v: (f64, f64), th: (f64, f64), mean: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass: 1.0,
            total_energy: 1.0,
            entropy_e: 2.0,
            dissipation_v: 0.0,
            int_v_dt: 0.0,
            mean_theta: mean,
            min_v: v.0,
            max_v: v.1,
            min_theta: th.0,
            max_theta: th.1,
            grad_v_sq: 0.0,
            grad_u_sq: 0.0,
            grad_theta_sq: 0.0,
            h1_dev: 0.0,
            repr_err: 0.0,
            lp_moments: vec![],
        }
    }

    #[test]
    fn equilibrium_certificate() {
        let recs: Vec<_> = (0..5)
            .map(|i| rec(i as f64, (1.0, 1.0), (1.0, 1.0), 1.0))
            .collect();
        let c = bounds_certificate(&recs, 2.0).unwrap();
        assert_eq!(
            (c.inf_v, c.sup_v, c.inf_theta, c.sup_theta),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(c.corridor_ok);
    }

    #[test]
    fn corridor_violation_detected() {
        let (a1, _) = entropy_roots(2.0).unwrap();
        let recs = vec![
            rec(0.0, (0.9, 1.1), (0.9, 1.1), 1.0),
            rec(1.0, (0.9, 1.1), (0.9, 1.1), a1 - 0.02),
        ];
        assert!(!bounds_certificate(&recs, 2.0).unwrap().corridor_ok);
    }

    proptest::proptest! {
        #[test]
        fn roots_are_ordered_and_monotone(e0 in 1.0001f64..30.0, de in 0.01f64..5.0) {
            let (a1, a2) = entropy_roots(e0).unwrap();
            proptest::prop_assert!(a1 <= 1.0 && 1.0 <= a2);
            proptest::prop_assert!(entropy_gap(a1, e0).abs() <= 1e-12);
            proptest::prop_assert!(entropy_gap(a2, e0).abs() <= 1e-12);
            let (b1, b2) = entropy_roots(e0 + de).unwrap();
            proptest::prop_assert!(b1 < a1 && b2 > a2);
        }

        #[test]
        fn fit_is_scale_invariant(scale in 1e-3f64..1e3, rate in 0.1f64..3.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let series: Vec<(f64, f64)> = (0..30)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    (t, (-rate * t).exp() * rng.gen_range(0.9..1.1))
                })
                .collect();
            let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, y)| (t, scale * y)).collect();
            let a = fit_decay_rate(&series, (0.0, 3.0)).unwrap();
            let b = fit_decay_rate(&scaled, (0.0, 3.0)).unwrap();
            proptest::prop_assert!((a.eta0 - b.eta0).abs() < 1e-10);
            proptest::prop_assert!((a.r_squared - b.r_squared).abs() < 1e-10);
            proptest::prop_assert!((b.log_c - a.log_c - scale.ln()).abs() < 1e-10);
        }

        #[test]
        fn certificate_ignores_order(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut recs: Vec<_> = (0..12)
                .map(|i| {
                    let lo: f64 = rng.gen_range(0.5..1.0);
                    let hi: f64 = rng.gen_range(1.0..2.0);
                    rec(i as f64, (lo, hi), (lo * 0.9, hi * 1.1), rng.gen_range(0.5..1.0))
                })
                .collect();
            let a = bounds_certificate(&recs, 2.5).unwrap();
            recs.reverse();
            recs.swap(0, 5);
            let b = bounds_certificate(&recs, 2.5).unwrap();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
