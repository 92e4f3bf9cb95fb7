use evinlier_core::estimation::{log_likelihood, log_likelihood_terms};
use evinlier_core::inference::fisher_information;
use evinlier_core::model::{
    cdf, continuity_sigma, gpd_cdf, pdf, quantile, smooth_matching, tail_value_at_risk, value_at_risk, GpdParams,
};
use evinlier_core::quad::{integrate, integrate_to_infinity, QuadOptions};
use evinlier_core::sampler::{sample, sample_from_uniforms, SampleSpec};
use evinlier_core::specfun::{
    digamma, gamma_cdf, gamma_quantile, ln_gamma, reg_lower_inc_gamma, trigamma,
};
use evinlier_core::{Dataset, FevimmParams};
use proptest::prelude::*;
use statrs::function::gamma::{gamma_lr, ln_gamma as oracle_ln_gamma};

fn theta() -> impl Strategy<Value = FevimmParams> {
    (
        0.05f64..0.5,
        0.02f64..0.3,
        0.5f64..5.0,
        0.5f64..10.0,
        0.6f64..0.95,
        -0.4f64..0.8,
        0.5f64..10.0,
    )
        .prop_map(|(phi1, phi2, eta, beta, q, xi, sigma)| {
            let u = gamma_quantile(q, eta, beta).unwrap();
            FevimmParams::new(phi1, eta, beta, u, xi, sigma, phi2).unwrap()
        })
}

fn tight() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 5000,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mass_sums_to_one(t in theta()) {
        let bulk = integrate(|x| if x > 0.0 { pdf(x, &t).unwrap() } else { 0.0 }, 0.0, t.u, tight()).unwrap();
        let end = t.tail().upper_endpoint();
        let tail = if end.is_finite() {
            integrate(|x| pdf(x, &t).unwrap(), t.u, end, tight()).unwrap()
        } else {
            integrate_to_infinity(|x| pdf(x, &t).unwrap(), t.u, tight()).unwrap()
        };
        prop_assert!((t.phi1 + bulk.value + tail.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quantile_inverts_cdf(t in theta(), p in 0.0f64..1.0) {
        let q = quantile(p, &t).unwrap();
        if p > t.phi1 && (p - (1.0 - t.phi2)).abs() > 1e-12 {
            prop_assert!((cdf(q, &t).unwrap() - p).abs() < 1e-8, "p {} q {}", p, q);
        } else if p <= t.phi1 {
            prop_assert_eq!(q, 0.0);
        }
    }

    #[test]
    fn cdf_monotone_with_branch_limits(t in theta(), a in 0.0f64..60.0, b in 0.0f64..60.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cdf(lo, &t).unwrap() <= cdf(hi, &t).unwrap());
        prop_assert_eq!(cdf(0.0, &t).unwrap(), t.phi1);
        let below = cdf(t.u * (1.0 - 1e-13), &t).unwrap();
        prop_assert!((below - (1.0 - t.phi2)).abs() < 1e-10);
        prop_assert!((cdf(t.u, &t).unwrap() - (1.0 - t.phi2)).abs() < 1e-15);
    }

    #[test]
    fn bulk_cdf_matches_independent_gamma(t in theta(), frac in 0.01f64..0.99) {
        let x = frac * t.u;
        let expect = t.phi1 + (1.0 - t.phi1 - t.phi2) * gamma_lr(t.eta, x / t.beta) / gamma_lr(t.eta, t.u / t.beta);
        prop_assert!((cdf(x, &t).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn continuity_sigma_closes_density_gap(t in theta()) {
        let sigma = continuity_sigma(t.phi1, t.phi2, t.eta, t.beta, t.u).unwrap();
        let m = FevimmParams { sigma, ..t };
        let left = pdf(t.u * (1.0 - 1e-15), &m).unwrap();
        let right = pdf(t.u, &m).unwrap();
        prop_assert!((left - right).abs() < 1e-8);
    }

    #[test]
    fn smooth_matching_closes_derivative_gap(
        phi1 in 0.05f64..0.5, eta in 1.5f64..5.0, beta in 0.5f64..3.0, xi in -0.3f64..0.5,
    ) {
        // Above the mode the gamma density decreases, so the matched scale is positive.
        let u = 2.0 * (eta - 1.0) * beta + beta;
        let m = smooth_matching(phi1, eta, beta, u, xi).unwrap();
        prop_assume!(m.validate().is_ok());
        let h = 1e-5;
        let f = |x: f64| pdf(x, &m).unwrap();
        let left = (f(u * (1.0 - 1e-15)) - f(u - h)) / h;
        let right = (f(u + h) - f(u)) / h;
        prop_assert!((left - right).abs() < 1e-5, "left {} right {}", left, right);
        prop_assert!((f(u * (1.0 - 1e-15)) - f(u)).abs() < 1e-10);
    }

    #[test]
    fn gpd_shape_limit(x in 0.0f64..80.0, sigma in 0.5f64..10.0) {
        let g0 = GpdParams { u: 1.0, sigma, xi: 0.0 };
        let g1 = GpdParams { u: 1.0, sigma, xi: 1e-10 };
        prop_assert!((gpd_cdf(1.0 + x, &g0).unwrap() - gpd_cdf(1.0 + x, &g1).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn tvar_dominates_var(t in theta(), p in 0.0f64..0.999) {
        let t = FevimmParams { xi: t.xi.min(0.9), ..t };
        prop_assert!(tail_value_at_risk(p, &t).unwrap() >= value_at_risk(p, &t).unwrap() - 1e-9);
    }

    #[test]
    fn sampler_is_the_quantile_map(t in theta(), seed in any::<u64>()) {
        let xs = sample(&SampleSpec { n: 200, theta: t, seed }).unwrap();
        prop_assert_eq!(&xs, &sample(&SampleSpec { n: 200, theta: t, seed }).unwrap());
        let us: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let ys = sample_from_uniforms(&us, &t).unwrap();
        for (y, u) in ys.iter().zip(&us) {
            prop_assert!((y - quantile(*u, &t).unwrap()).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn likelihood_decomposes_and_ignores_order(t in theta(), seed in any::<u64>()) {
        let xs = sample(&SampleSpec { n: 300, theta: t, seed }).unwrap();
        let mut rev = xs.clone();
        rev.reverse();
        let d = Dataset::new(xs.clone()).unwrap();
        let ll = log_likelihood(&t, &d).unwrap();
        let terms = log_likelihood_terms(&t, &d).unwrap();
        prop_assert_eq!(ll, terms.total());
        prop_assert_eq!(ll, log_likelihood(&t, &Dataset::new(rev).unwrap()).unwrap());

        // per-point oracle built on an independent gamma implementation
        let w = 1.0 - t.phi1 - t.phi2;
        let ln_g_u = gamma_lr(t.eta, t.u / t.beta).ln();
        let (mut z, mut b, mut tl) = (0.0, 0.0, 0.0);
        for &x in &xs {
            if x == 0.0 {
                z += t.phi1.ln();
            } else if x < t.u {
                b += w.ln() + (t.eta - 1.0) * x.ln() - x / t.beta - oracle_ln_gamma(t.eta)
                    - t.eta * t.beta.ln() - ln_g_u;
            } else {
                let y = (x - t.u) / t.sigma;
                tl += t.phi2.ln() - t.sigma.ln() - (1.0 / t.xi + 1.0) * (t.xi * y).ln_1p();
            }
        }
        prop_assert!((terms.zero - z).abs() <= 1e-9 * (1.0 + z.abs()));
        prop_assert!((terms.bulk - b).abs() <= 1e-9 * (1.0 + b.abs()));
        prop_assert!((terms.tail - tl).abs() <= 1e-9 * (1.0 + tl.abs()));
    }

    #[test]
    fn information_is_psd_with_negative_mass_covariance(t in theta()) {
        let f = fisher_information(&t, t.u).unwrap();
        let m = f.matrix();
        prop_assert_eq!(m, &m.transpose());
        let min_eig = f.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-8, "{}", min_eig);
        let inv = f.inverse().unwrap();
        let (i1, i2) = (f.index("phi1").unwrap(), f.index("phi2").unwrap());
        prop_assert!(inv[(i1, i2)] < 0.0);
    }

    #[test]
    fn gamma_quantile_round_trip(p in 0.01f64..0.99, s in 0.1f64..20.0, b in 0.1f64..10.0) {
        let q = gamma_quantile(p, s, b).unwrap();
        prop_assert!((gamma_cdf(q, s, b).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn polygamma_recurrences(x in 0.1f64..100.0) {
        prop_assert!((digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x).abs() < 1e-10);
        prop_assert!((trigamma(x + 1.0).unwrap() - trigamma(x).unwrap() + 1.0 / (x * x)).abs() < 1e-10);
    }

    #[test]
    fn ln_gamma_agrees_with_independent_implementation(x in 1e-3f64..200.0) {
        let a = ln_gamma(x).unwrap();
        prop_assert!((a - oracle_ln_gamma(x)).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}

#[test]
fn incomplete_gamma_matches_quadrature() {
    for s in [0.1, 0.5, 1.0, 2.5, 7.0, 13.0, 20.0] {
        for x in [0.0, 0.3, 1.0, 4.0, 10.0, 25.0, 50.0] {
            let p = reg_lower_inc_gamma(s, x).unwrap();
            let ln_norm = ln_gamma(s).unwrap();
            let q = integrate(
                |t| if t > 0.0 { ((s - 1.0) * t.ln() - t - ln_norm).exp() } else { 0.0 },
                0.0,
                x,
                tight(),
            )
            .unwrap()
            .value;
            assert!((p - q).abs() < 1e-8, "s {s} x {x}: {p} vs {q}");
        }
    }
}
