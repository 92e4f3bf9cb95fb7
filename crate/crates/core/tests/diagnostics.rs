mod common;

use common::Threads;
use evinlier_core::diagnostics::{
    bootstrap_pvalue, gof_statistics, mean_excess_curve, naic, pickands_estimator, return_level_bands, return_levels,
    stability_curve, DiagnosticCurve,
};
use evinlier_core::estimation::fit_full;
use evinlier_core::harness::reference_theta;
use evinlier_core::model::{cdf, quantile};
use evinlier_core::sampler::{rng, sample, uniform, SampleSpec};
use evinlier_core::{empirical_quantile, Dataset, FevimmParams, FitOptions, Sequential};
use proptest::prelude::*;

fn gpd_sample(n: usize, xi: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let v = uniform(&mut r);
            if xi == 0.0 {
                -sigma * v.ln()
            } else {
                sigma / xi * (v.powf(-xi) - 1.0)
            }
        })
        .collect()
}

fn ols_slope(c: &DiagnosticCurve) -> f64 {
    let n = c.len() as f64;
    let mx = c.abscissa.iter().sum::<f64>() / n;
    let my = c.ordinate.iter().sum::<f64>() / n;
    let sxy: f64 = c.abscissa.iter().zip(&c.ordinate).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = c.abscissa.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn reference_sample(n: usize, seed: u64) -> Dataset {
    Dataset::new(sample(&SampleSpec { n, theta: reference_theta(), seed }).unwrap()).unwrap()
}

#[test]
fn mean_excess_equals_double_loop() {
    let d = reference_sample(1000, 3);
    let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.75).collect();
    let c = mean_excess_curve(&d, &grid).unwrap();
    let mut k = 0;
    for &t in &grid {
        let mut sum = 0.0;
        let mut m = 0usize;
        for &x in d.values() {
            if x > t {
                sum += x - t;
                m += 1;
            }
        }
        if m >= 5 {
            assert_eq!(c.abscissa[k], t);
            assert_eq!(c.ordinate[k], sum / m as f64);
            k += 1;
        } else {
            assert!(c.omitted.iter().any(|&(o, _)| o == t));
        }
    }
    assert_eq!(k, c.len());
    let (lo, hi) = (c.ci_lower.as_ref().unwrap(), c.ci_upper.as_ref().unwrap());
    assert!((0..k).all(|i| lo[i] <= c.ordinate[i] && c.ordinate[i] <= hi[i]));
}

#[test]
fn mean_excess_flat_for_exponential() {
    let d = Dataset::new(gpd_sample(100_000, 0.0, 3.0, 5)).unwrap();
    let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
    let c = mean_excess_curve(&d, &grid).unwrap();
    assert_eq!(c.len(), 20);
    let slope = ols_slope(&c);
    assert!(slope.abs() < 0.05, "slope {slope}");
    assert!(c.ordinate.iter().all(|m| (m - 3.0).abs() < 0.2));
}

#[test]
fn mean_excess_slope_for_gpd() {
    let d = Dataset::new(gpd_sample(100_000, 0.2, 2.0, 6)).unwrap();
    let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.4).collect();
    let c = mean_excess_curve(&d, &grid).unwrap();
    let slope = ols_slope(&c);
    assert!((slope - 0.25).abs() < 0.05, "slope {slope}");
    let none = mean_excess_curve(&d, &[1e6]).unwrap();
    assert!(none.is_empty() && none.omitted.len() == 1);
}

#[test]
fn pickands_consistent_for_gpd() {
    let d = Dataset::new(gpd_sample(100_000, 0.2, 1.0, 7)).unwrap();
    let c = pickands_estimator(&d, &[500]).unwrap();
    assert!((c.ordinate[0] - 0.2).abs() < 0.1, "{}", c.ordinate[0]);
}

#[test]
fn pickands_degenerates_on_atom() {
    let theta = FevimmParams {
        phi1: 0.6,
        ..reference_theta()
    };
    let d = Dataset::new(sample(&SampleSpec { n: 2000, theta, seed: 8 }).unwrap()).unwrap();
    // about 1200 zeros, so a[n - 2k] and a[n - 4k] are both zero at k = 450
    let c = pickands_estimator(&d, &[50, 450]).unwrap();
    assert_eq!(c.abscissa, vec![50.0]);
    assert_eq!(c.omitted.len(), 1);
    assert_eq!(c.omitted[0].0, 450.0);
}

#[test]
fn stability_flat_above_gpd_threshold() {
    let d = Dataset::new(gpd_sample(20_000, 0.2, 1.0, 9)).unwrap();
    let grid: Vec<f64> = [0.0, 0.5, 0.7, 0.8, 0.9].iter().map(|&p| empirical_quantile(d.sorted(), p)).collect();
    let (sig, xi) = stability_curve(&d, &grid).unwrap();
    assert_eq!(xi.len(), grid.len());
    let (lo, hi) = (xi.ci_lower.as_ref().unwrap(), xi.ci_upper.as_ref().unwrap());
    for i in 0..xi.len() {
        let half = (hi[i] - lo[i]) / 2.0;
        assert!((xi.ordinate[i] - xi.ordinate[0]).abs() <= half, "{i}: {:?}", xi.ordinate);
    }
    // modified scale sigma - xi t stays at sigma(0) = 1
    let (lo, hi) = (sig.ci_lower.as_ref().unwrap(), sig.ci_upper.as_ref().unwrap());
    for i in 0..sig.len() {
        assert!(lo[i] <= 1.0 && 1.0 <= hi[i], "{i}: {:?}", sig.ordinate);
    }
    let (s1, x1) = stability_curve(&d, &grid[2..3]).unwrap();
    assert_eq!((s1.len(), x1.len()), (1, 1));
}

#[test]
fn stability_shape_shifts_when_zeros_are_dropped() {
    let mut differs = 0;
    for r in 0..20 {
        let d = reference_sample(1000, 100 + r);
        let pos = d.without_zeros().unwrap();
        let t_all = empirical_quantile(d.sorted(), 0.9);
        let t_pos = empirical_quantile(pos.sorted(), 0.9);
        let (_, a) = stability_curve(&d, &[t_all]).unwrap();
        let (_, b) = stability_curve(&pos, &[t_pos]).unwrap();
        let se = (a.ci_upper.as_ref().unwrap()[0] - a.ordinate[0]) / 1.959_963_984_540_054;
        if (a.ordinate[0] - b.ordinate[0]).abs() > se {
            differs += 1;
        }
    }
    assert!(differs >= 10, "{differs} of 20");
}

#[test]
fn gof_statistics_follow_a_shift() {
    let theta = reference_theta();
    let d = reference_sample(500, 10);
    let a = gof_statistics(&d, |x| cdf(x, &theta).unwrap()).unwrap();
    let c = 7.25;
    let shifted = Dataset::new(d.values().iter().map(|x| x + c).collect()).unwrap();
    let b = gof_statistics(&shifted, |x| cdf(x - c, &theta).unwrap()).unwrap();
    assert!((a.ad - b.ad).abs() < 1e-9 && (a.cvm - b.cvm).abs() < 1e-12 && (a.ks - b.ks).abs() < 1e-12);
    let wrong = gof_statistics(&shifted, |x| cdf(x, &theta).unwrap()).unwrap();
    assert!(wrong.ks > a.ks);
}

#[test]
fn bootstrap_pvalues_are_schedule_independent() {
    let d = reference_sample(300, 20);
    let opts = FitOptions::default();
    let fit = fit_full(&d, None, &opts).unwrap();
    let a = bootstrap_pvalue(&d, &fit, 100, 77, &opts, &Sequential).unwrap();
    let b = bootstrap_pvalue(&d, &fit, 100, 77, &opts, &Threads(3)).unwrap();
    assert_eq!(a, b);
    for p in [a.p_ad, a.p_cvm, a.p_ks] {
        assert!((0.0..=1.0).contains(&p));
    }
    assert_eq!(a.naic, naic(fit.loglik, 7, 300));
}

#[test]
fn bootstrap_pvalues_calibrated_under_null() {
    let opts = FitOptions {
        restarts: 1,
        ..FitOptions::default()
    };
    let mut small = 0;
    for r in 0..50 {
        let d = reference_sample(300, 1000 + r);
        let fit = fit_full(&d, None, &opts).unwrap();
        let rep = bootstrap_pvalue(&d, &fit, 100, 5000 + r, &opts, &Sequential).unwrap();
        if rep.p_ad < 0.05 {
            small += 1;
        }
    }
    assert!(small <= 5, "{small} of 50 p-values below 0.05");
}

#[test]
fn return_level_bands_contain_estimate() {
    let d = reference_sample(500, 30);
    let opts = FitOptions::default();
    let fit = fit_full(&d, None, &opts).unwrap();
    let theta = fit.fevimm().unwrap();
    let periods = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let mut c = return_levels(&theta, &periods).unwrap();
    return_level_bands(&mut c, &fit, 100, 31, &opts, &Sequential).unwrap();
    let (lo, hi) = (c.ci_lower.unwrap(), c.ci_upper.unwrap());
    for i in 0..periods.len() {
        assert!(lo[i] <= c.levels[i] && c.levels[i] <= hi[i]);
    }
    assert!(c.levels.windows(2).all(|w| w[0] <= w[1]));
    let at_u = return_levels(&theta, &[1.0 / theta.phi2]).unwrap();
    assert!((at_u.levels[0] - quantile(1.0 - theta.phi2, &theta).unwrap()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn naic_orders_like_aic(l1 in -1e4f64..0.0, l2 in -1e4f64..0.0, k1 in 1usize..8, k2 in 1usize..8, n in 1usize..5000) {
        let aic = |l: f64, k: usize| -2.0 * l + 2.0 * k as f64;
        prop_assert_eq!(naic(l1, k1, n) < naic(l2, k2, n), aic(l1, k1) < aic(l2, k2));
        prop_assert_eq!(naic(l1, k1, n), aic(l1, k1) / n as f64);
    }
}
