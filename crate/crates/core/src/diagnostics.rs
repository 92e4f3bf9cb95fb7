//! Goodness of fit, threshold diagnostics and return levels.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by std's inherent methods when a dependency links std
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::estimation::{fit_model, gpd_mle, Dataset, FitOptions, FitResult};
use crate::inference::{parametric_bootstrap, MAX_FAILURE_RATE};
use crate::model::{quantile, FevimmParams, ModelParams};
use crate::parallel::Runner;
use crate::sampler::{replication_seed, sample_model};
use crate::stats::percentile;

/// Probabilities are clamped to `[AD_CLAMP, 1 - AD_CLAMP]` inside the
/// Anderson-Darling logarithms.
pub const AD_CLAMP: f64 = 1e-12;

/// Anderson-Darling, Cramér-von Mises and Kolmogorov-Smirnov statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GofStatistics {
    pub ad: f64,
    pub cvm: f64,
    pub ks: f64,
    /// Some fitted probability hit the Anderson-Darling clamp.
    pub ad_clamped: bool,
}

/// A CDF step smaller than this at a tied value is treated as continuous.
const ATOM_JUMP: f64 = 1e-9;

/// Computes the three statistics of `data` against the distribution function `cdf`.
///
/// Where `cdf` jumps (the atom at zero), the `m` tied observations are placed at
/// `F(x-) + (k - 1/2) / m * (F(x) - F(x-))`, the midpoints of an even split of
/// the jump. Without this every zero would sit at `F(0) = phi1` and the
/// statistics would measure little beyond the atom.
pub fn gof_statistics<F: Fn(f64) -> f64>(data: &Dataset, cdf: F) -> Result<GofStatistics> {
    let n = data.n();
    if n < 8 {
        return Err(Error::InsufficientData(format!("{n} observations; need at least 8")));
    }
    let nf = n as f64;
    let xs = data.sorted();
    let mut f: Vec<f64> = xs.iter().map(|&x| cdf(x)).collect();
    let mut start = 0;
    while start < n {
        let x = xs[start];
        let end = start + xs[start..].iter().take_while(|&&y| y == x).count();
        let left = cdf(x - 1e-12 * x.abs().max(1.0));
        let jump = f[start] - left;
        if jump > ATOM_JUMP {
            let m = (end - start) as f64;
            for (k, v) in f[start..end].iter_mut().enumerate() {
                *v = left + (k as f64 + 0.5) / m * jump;
            }
        }
        start = end;
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(domain("gof_statistics", "fitted CDF returned a non-finite value"));
    }
    let mut ks = 0.0f64;
    let mut cvm = 1.0 / (12.0 * nf);
    let mut clamped = false;
    let mut clamp = |v: f64| {
        let c = v.clamp(AD_CLAMP, 1.0 - AD_CLAMP);
        if c != v {
            clamped = true;
        }
        c
    };
    let mut ad_sum = 0.0;
    for i in 0..n {
        let k = (i + 1) as f64;
        ks = ks.max(k / nf - f[i]).max(f[i] - (k - 1.0) / nf);
        let d = f[i] - (2.0 * k - 1.0) / (2.0 * nf);
        cvm += d * d;
        ad_sum += (2.0 * k - 1.0) * (clamp(f[i]).ln() + (1.0 - clamp(f[n - 1 - i])).ln());
    }
    Ok(GofStatistics {
        ad: -nf - ad_sum / nf,
        cvm,
        ks,
        ad_clamped: clamped,
    })
}

/// Statistics of `data` against a fitted model's own distribution function.
pub fn model_gof_statistics(data: &Dataset, params: &ModelParams) -> Result<GofStatistics> {
    params.validate()?;
    gof_statistics(data, |x| params.cdf(x).unwrap_or(f64::NAN))
}

/// Goodness-of-fit statistics with parametric bootstrap p-values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GofReport {
    pub ad: f64,
    pub cvm: f64,
    pub ks: f64,
    pub p_ad: f64,
    pub p_cvm: f64,
    pub p_ks: f64,
    pub naic: f64,
    pub b: usize,
    pub n_failed: usize,
    pub ad_clamped: bool,
}

/// `(1 + #{boot >= observed}) / (B + 1)`.
pub fn bootstrap_p(observed: f64, boot: &[f64]) -> f64 {
    let hits = boot.iter().filter(|&&b| b >= observed).count();
    (1 + hits) as f64 / (boot.len() + 1) as f64
}

/// Simulates `b` datasets from the fitted model, refits each (starting from the
/// observed fit) and compares the statistics.
pub fn bootstrap_pvalue<R: Runner>(
    data: &Dataset,
    fit: &FitResult,
    b: usize,
    seed: u64,
    opts: &FitOptions,
    runner: &R,
) -> Result<GofReport> {
    if b < 100 {
        return Err(domain("bootstrap_pvalue", "B must be at least 100"));
    }
    let observed = model_gof_statistics(data, &fit.params)?;
    let kind = fit.params.kind();
    let n = data.n();
    let boot = runner.run(b, |i| -> Option<GofStatistics> {
        let x = sample_model(n, &fit.params, replication_seed(seed, i)).ok()?;
        let d = Dataset::new(x).ok()?;
        let refit = fit_model(kind, &d, Some(&fit.params), opts).ok()?;
        if !refit.converged {
            return None;
        }
        model_gof_statistics(&d, &refit.params).ok()
    });
    let ok: Vec<GofStatistics> = boot.into_iter().flatten().collect();
    let n_failed = b - ok.len();
    if n_failed as f64 > MAX_FAILURE_RATE * b as f64 {
        return Err(Error::ConvergenceFailure {
            failed: n_failed,
            total: b,
            context: format!("goodness-of-fit bootstrap of {kind}"),
        });
    }
    let col = |g: fn(&GofStatistics) -> f64| ok.iter().map(g).collect::<Vec<f64>>();
    Ok(GofReport {
        ad: observed.ad,
        cvm: observed.cvm,
        ks: observed.ks,
        p_ad: bootstrap_p(observed.ad, &col(|s| s.ad)),
        p_cvm: bootstrap_p(observed.cvm, &col(|s| s.cvm)),
        p_ks: bootstrap_p(observed.ks, &col(|s| s.ks)),
        naic: naic(fit.loglik, fit.n_params(), n),
        b,
        n_failed,
        ad_clamped: observed.ad_clamped,
    })
}

/// AIC divided by the sample size, `(-2 loglik + 2k) / n`.
pub fn naic(loglik: f64, k: usize, n: usize) -> f64 {
    (-2.0 * loglik + 2.0 * k as f64) / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CurveKind {
    MeanExcess,
    StabilitySigma,
    StabilityXi,
    Pickands,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::MeanExcess => "mean_excess",
            CurveKind::StabilitySigma => "stability_sigma",
            CurveKind::StabilityXi => "stability_xi",
            CurveKind::Pickands => "pickands",
        }
    }
}

/// A diagnostic statistic against thresholds (or `k` for Pickands).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DiagnosticCurve {
    pub kind: CurveKind,
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub ci_lower: Option<Vec<f64>>,
    pub ci_upper: Option<Vec<f64>>,
    /// Grid points left out, with the reason.
    pub omitted: Vec<(f64, &'static str)>,
}

impl DiagnosticCurve {
    fn new(kind: CurveKind, with_band: bool) -> Self {
        Self {
            kind,
            abscissa: Vec::new(),
            ordinate: Vec::new(),
            ci_lower: with_band.then(Vec::new),
            ci_upper: with_band.then(Vec::new),
            omitted: Vec::new(),
        }
    }

    fn push(&mut self, x: f64, y: f64, half_width: f64) {
        self.abscissa.push(x);
        self.ordinate.push(y);
        if let (Some(lo), Some(hi)) = (self.ci_lower.as_mut(), self.ci_upper.as_mut()) {
            lo.push(y - half_width);
            hi.push(y + half_width);
        }
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }
}

fn check_increasing(what: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(domain("diagnostics", format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(domain("diagnostics", format!("{what} grid must be finite and strictly increasing")));
    }
    Ok(())
}

const Z_975: f64 = 1.959_963_984_540_054;

/// Mean of `x - t` over `x > t` for each threshold, with a normal-theory
/// 95% band. Thresholds with fewer than 5 exceedances are omitted.
pub fn mean_excess_curve(data: &Dataset, thresholds: &[f64]) -> Result<DiagnosticCurve> {
    check_increasing("threshold", thresholds)?;
    let mut curve = DiagnosticCurve::new(CurveKind::MeanExcess, true);
    for &t in thresholds {
        let mut m = 0usize;
        let mut sum = 0.0;
        for &x in data.values() {
            if x > t {
                m += 1;
                sum += x - t;
            }
        }
        if m < 5 {
            curve.omitted.push((t, "fewer than 5 exceedances"));
            continue;
        }
        let mean = sum / m as f64;
        let var = data
            .values()
            .iter()
            .filter(|&&x| x > t)
            .map(|&x| (x - t - mean) * (x - t - mean))
            .sum::<f64>()
            / (m - 1) as f64;
        curve.push(t, mean, Z_975 * (var / m as f64).sqrt());
    }
    Ok(curve)
}

/// GPD fits above each threshold: the modified scale `sigma - xi t` and the shape,
/// with 95% bands from the expected information. Thresholds with fewer than
/// 10 exceedances or a failed fit are omitted.
pub fn stability_curve(data: &Dataset, thresholds: &[f64]) -> Result<(DiagnosticCurve, DiagnosticCurve)> {
    check_increasing("threshold", thresholds)?;
    let mut sig = DiagnosticCurve::new(CurveKind::StabilitySigma, true);
    let mut shape = DiagnosticCurve::new(CurveKind::StabilityXi, true);
    for &t in thresholds {
        let m = data.values().iter().filter(|&&x| x > t).count();
        if m < 10 {
            sig.omitted.push((t, "fewer than 10 exceedances"));
            shape.omitted.push((t, "fewer than 10 exceedances"));
            continue;
        }
        let fit = match gpd_mle(data.values(), t) {
            Ok(f) if f.converged => f,
            _ => {
                sig.omitted.push((t, "GPD fit failed"));
                shape.omitted.push((t, "GPD fit failed"));
                continue;
            }
        };
        let (s, xi) = (fit.params.sigma, fit.params.xi);
        let mf = m as f64;
        let (se_star, se_xi) = if xi > -0.5 {
            let v_s = 2.0 * s * s * (1.0 + xi) / mf;
            let v_x = (1.0 + xi) * (1.0 + xi) / mf;
            let c = -s * (1.0 + xi) / mf;
            ((v_s + t * t * v_x - 2.0 * t * c).sqrt(), v_x.sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        sig.push(t, s - xi * t, Z_975 * se_star);
        shape.push(t, xi, Z_975 * se_xi);
    }
    Ok((sig, shape))
}

/// Pickands estimator `ln((a[n-k] - a[n-2k]) / (a[n-2k] - a[n-4k])) / ln 2`
/// on the ascending sample `a` (0-based). Points with a vanishing spacing are
/// omitted.
pub fn pickands_estimator(data: &Dataset, k_values: &[usize]) -> Result<DiagnosticCurve> {
    let ks: Vec<f64> = k_values.iter().map(|&k| k as f64).collect();
    check_increasing("k", &ks)?;
    let a = data.sorted();
    let n = a.len();
    let mut curve = DiagnosticCurve::new(CurveKind::Pickands, false);
    for &k in k_values {
        if k == 0 || 4 * k > n {
            return Err(domain("pickands_estimator", format!("k = {k} requires 1 <= 4k <= n = {n}")));
        }
        let num = a[n - k] - a[n - 2 * k];
        let den = a[n - 2 * k] - a[n - 4 * k];
        if !(num > 0.0 && den > 0.0) {
            curve.omitted.push((k as f64, "zero spacing between order statistics"));
            continue;
        }
        curve.push(k as f64, (num / den).ln() / core::f64::consts::LN_2, 0.0);
    }
    Ok(curve)
}

/// Levels exceeded on average once every `T` observations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReturnLevelCurve {
    pub periods: Vec<f64>,
    pub levels: Vec<f64>,
    pub ci_lower: Option<Vec<f64>>,
    pub ci_upper: Option<Vec<f64>>,
    /// `1 - 1/T <= phi1`, so the level is the atom at zero.
    pub at_atom: Vec<bool>,
}

/// `level(T) = quantile(1 - 1/T)` for each period.
pub fn return_levels(theta: &FevimmParams, periods: &[f64]) -> Result<ReturnLevelCurve> {
    theta.validate()?;
    check_increasing("period", periods)?;
    if periods[0] <= 1.0 {
        return Err(domain("return_levels", "return periods must exceed 1"));
    }
    let mut levels = Vec::with_capacity(periods.len());
    let mut at_atom = Vec::with_capacity(periods.len());
    for &t in periods {
        let p = 1.0 - 1.0 / t;
        levels.push(quantile(p, theta)?);
        at_atom.push(p <= theta.phi1);
    }
    Ok(ReturnLevelCurve {
        periods: periods.to_vec(),
        levels,
        ci_lower: None,
        ci_upper: None,
        at_atom,
    })
}

/// Adds 95% percentile bands from a parametric bootstrap of the fit. The
/// bands are widened where needed so that they contain the point estimate.
pub fn return_level_bands<R: Runner>(
    curve: &mut ReturnLevelCurve,
    fit: &FitResult,
    b: usize,
    seed: u64,
    opts: &FitOptions,
    runner: &R,
) -> Result<()> {
    let report = parametric_bootstrap(&fit.params, fit.n, b, seed, opts, runner)?;
    let kind = fit.params.kind();
    let mut lo = Vec::with_capacity(curve.periods.len());
    let mut hi = Vec::with_capacity(curve.periods.len());
    for (j, &t) in curve.periods.iter().enumerate() {
        let lv: Vec<f64> = report
            .estimates
            .iter()
            .filter_map(|e| ModelParams::from_layout(kind, *e).quantile(1.0 - 1.0 / t).ok())
            .collect();
        lo.push(percentile(&lv, 0.025).min(curve.levels[j]));
        hi.push(percentile(&lv, 0.975).max(curve.levels[j]));
    }
    curve.ci_lower = Some(lo);
    curve.ci_upper = Some(hi);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_grid_statistics_by_hand() {
        let d = Dataset::new((1..=9).map(|i| i as f64 / 10.0).collect()).unwrap();
        let s = gof_statistics(&d, |x| x).unwrap();
        // i/n - F = i/9 - i/10 peaks at i = 9: 1 - 0.9 = 0.1
        assert!((s.ks - 0.1).abs() < 1e-15);
        let mut cvm = 1.0 / 108.0;
        let mut ad = 0.0;
        for i in 1..=9 {
            let f = i as f64 / 10.0;
            cvm += (f - (2.0 * i as f64 - 1.0) / 18.0).powi(2);
            let g = (10 - i) as f64 / 10.0;
            ad += (2.0 * i as f64 - 1.0) * (f.ln() + (1.0 - g).ln());
        }
        assert!((s.cvm - cvm).abs() < 1e-15);
        assert!((s.ad - (-9.0 - ad / 9.0)).abs() < 1e-13);
        assert!(!s.ad_clamped);
    }

    #[test]
    fn ties_at_an_atom_split_the_jump() {
        // A point mass at zero scored against itself looks like a perfect uniform sample.
        let d = Dataset::new(vec![0.0; 20]).unwrap();
        let s = gof_statistics(&d, |x| if x >= 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert!((s.ks - 0.5 / 20.0).abs() < 1e-15);
        assert!((s.cvm - 1.0 / 240.0).abs() < 1e-15);
    }

    #[test]
    fn ad_clamp_flag() {
        let d = Dataset::new(vec![0.0; 10]).unwrap();
        let s = gof_statistics(&d, |_| 0.0).unwrap();
        assert!(s.ad_clamped && s.ad.is_finite());
        assert!(gof_statistics(&Dataset::new(vec![1.0; 5]).unwrap(), |x| x).is_err());
    }

    #[test]
    fn p_value_rule() {
        assert_eq!(bootstrap_p(0.0, &[0.1, 0.2, 0.3]), 1.0);
        assert_eq!(bootstrap_p(0.25, &[0.1, 0.2, 0.3]), 0.5);
        assert_eq!(bootstrap_p(1.0, &[0.1, 0.2, 0.3]), 0.25);
    }

    #[test]
    fn naic_formula() {
        assert_eq!(naic(0.0, 0, 10), 0.0);
        assert_eq!(naic(-100.0, 7, 50), (200.0 + 14.0) / 50.0);
    }

    #[test]
    fn mean_excess_omits_sparse_thresholds() {
        let d = Dataset::new((1..=20).map(|i| i as f64).collect()).unwrap();
        let c = mean_excess_curve(&d, &[5.0, 18.0, 25.0]).unwrap();
        assert_eq!(c.abscissa, vec![5.0]);
        assert_eq!(c.ordinate, vec![8.0]);
        assert_eq!(c.omitted.len(), 2);
        assert!(mean_excess_curve(&d, &[3.0, 2.0]).is_err());
    }

    #[test]
    fn pickands_symmetric_spacing() {
        // n = 8, k = 2: a[6] - a[4] = 2 and a[4] - a[0] = 2
        let d = Dataset::new(vec![0.0, 1.0, 1.5, 1.8, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let c = pickands_estimator(&d, &[2]).unwrap();
        assert_eq!(c.ordinate, vec![0.0]);
        let z = Dataset::new(vec![0.0; 16]).unwrap();
        let c = pickands_estimator(&z, &[2]).unwrap();
        assert!(c.is_empty() && c.omitted.len() == 1);
        assert!(pickands_estimator(&d, &[3]).is_err());
    }

    #[test]
    fn return_levels_monotone_and_threshold() {
        let t = FevimmParams::new(0.4, 1.0, 5.0, 11.5129, 0.2, 5.0, 0.1).unwrap();
        let c = return_levels(&t, &[1.5, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]).unwrap();
        assert!(c.levels.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.at_atom[0]);
        assert_eq!(c.levels[0], 0.0);
        assert!(!c.at_atom[1]);
        assert!((c.levels[3] - t.u).abs() < 1e-9);
        assert!((c.levels[4] - 15.230_359).abs() < 1e-5);
        assert!(return_levels(&t, &[1.0]).is_err());
    }
}
