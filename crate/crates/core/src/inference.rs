//! Expected information, Wald intervals and the parametric bootstrap.
//!
//! The information matrix treats the threshold as known. With
//! `w = 1 - phi1 - phi2` and `h(eta, beta) = ln G*(u0)` the entries are
//!
//! - mass block: `1/phi1 + 1/w`, `1/w`, `1/phi2 + 1/w`;
//! - bulk block: `w (psi'(eta) + h_ee)`, `w (1/beta + h_eb)`,
//!   `w (h_bb + 2 gamma(eta+1, u0/beta) / (beta^2 gamma(eta, u0/beta)) - eta/beta^2)`;
//! - tail block: `phi2` times the per-exceedance GPD information, whose
//!   expectations over the standardized excess `Z` are integrated numerically.
//!
//! Every block carries the probability of the region it describes, so the
//! `beta`-`beta` entry is weighted by `w` and the tail block by `phi2`; the
//! `sigma`-`xi` expectation carries `1/sigma` on both of its terms. All other
//! entries are exactly zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // shadowed by std's inherent methods when a dependency links std
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::estimation::{fit_model, Dataset, FitOptions};
use crate::model::{FevimmParams, ModelParams, XI_ZERO_TOL};
use crate::parallel::Runner;
use crate::quad::{integrate, QuadOptions};
use crate::sampler::{replication_seed, sample_model};
use crate::specfun::{inc_gamma_pair, std_normal_quantile, trigamma};
use crate::stats::{empirical_quantile, sample_variance, sort_ascending};

/// Whether the tail shape is treated as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Regime {
    XiNonzero,
    XiZero,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::XiNonzero => "xi_nonzero",
            Regime::XiZero => "xi_zero",
        }
    }

    pub fn of(xi: f64) -> Self {
        if xi.abs() < XI_ZERO_TOL {
            Regime::XiZero
        } else {
            Regime::XiNonzero
        }
    }

    /// Parameter names in matrix order.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Regime::XiNonzero => &["phi1", "eta", "beta", "xi", "sigma", "phi2"],
            Regime::XiZero => &["phi1", "eta", "beta", "sigma", "phi2"],
        }
    }
}

/// Per-observation expected information at a fixed threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub regime: Regime,
    pub u0: f64,
    entries: DMatrix<f64>,
}

impl FisherMatrix {
    pub fn labels(&self) -> &'static [&'static str] {
        self.regime.labels()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.index(row)?;
        let j = self.index(col)?;
        Some(self.entries[(i, j)])
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.labels().iter().position(|l| *l == name)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Builds a matrix from explicit entries (row-major), e.g. for testing
    /// interval arithmetic.
    pub fn from_entries(regime: Regime, u0: f64, row_major: &[f64]) -> Result<Self> {
        let k = regime.labels().len();
        if row_major.len() != k * k {
            return Err(domain("FisherMatrix::from_entries", format!("expected {} entries", k * k)));
        }
        Ok(Self {
            regime,
            u0,
            entries: DMatrix::from_row_slice(k, k, row_major),
        })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        sort_ascending(&mut ev);
        ev
    }

    fn condition(&self) -> f64 {
        let ev = self.eigenvalues();
        let lo = ev.first().copied().unwrap_or(0.0).abs();
        let hi = ev.last().copied().unwrap_or(0.0).abs();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Inverse by Cholesky; on failure retries once with `1e-10 * trace / k`
    /// added to the diagonal.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        if let Some(c) = self.entries.clone().cholesky() {
            return Ok(c.inverse());
        }
        let k = self.dim() as f64;
        let jitter = 1e-10 * self.entries.trace() / k;
        let mut m = self.entries.clone();
        for i in 0..self.dim() {
            m[(i, i)] += jitter;
        }
        match m.cholesky() {
            Some(c) if jitter > 0.0 => Ok(c.inverse()),
            _ => Err(Error::SingularInformation {
                regime: self.regime.name(),
                condition: self.condition(),
            }),
        }
    }
}

/// `ln P(eta, u0 / beta)`.
fn h(eta: f64, beta: f64, u0: f64) -> f64 {
    inc_gamma_pair(eta, u0 / beta).0.ln()
}

struct HDerivs {
    ee: f64,
    eb: f64,
    bb: f64,
}

// Central differences at relative step 1e-5.
fn h_derivs(eta: f64, beta: f64, u0: f64) -> HDerivs {
    let de = 1e-5 * eta;
    let db = 1e-5 * beta;
    let f = |e: f64, b: f64| h(e, b, u0);
    let c = f(eta, beta);
    HDerivs {
        ee: (f(eta + de, beta) - 2.0 * c + f(eta - de, beta)) / (de * de),
        bb: (f(eta, beta + db) - 2.0 * c + f(eta, beta - db)) / (db * db),
        eb: (f(eta + de, beta + db) - f(eta + de, beta - db) - f(eta - de, beta + db) + f(eta - de, beta - db))
            / (4.0 * de * db),
    }
}

/// Below this |xi| the tail block uses closed forms instead of quadrature.
const XI_CLOSED_FORM_BAND: f64 = 0.05;
/// Below this xi as well: the integrands blow up at the finite endpoint as
/// xi -> -1/2 and the quadrature stops converging.
const XI_ENDPOINT_BAND: f64 = -0.4;

/// `E_Z[f(Z)]` for a standard GPD with shape `xi`, integrating up to the
/// `1 - 1e-12` quantile or the finite endpoint.
fn gpd_expectation<F: Fn(f64) -> f64>(xi: f64, f: F) -> Result<f64> {
    let z_max = if xi < 0.0 {
        -1.0 / xi
    } else {
        ((-xi * 1e-12f64.ln()).exp_m1()) / xi
    };
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    let density = |z: f64| {
        let t = 1.0 + xi * z;
        if t <= 0.0 {
            0.0
        } else {
            (-(1.0 / xi + 1.0) * t.ln()).exp()
        }
    };
    // The log terms blow up at a finite endpoint where the density vanishes.
    let g = |z: f64| {
        let d = density(z);
        if d == 0.0 {
            0.0
        } else {
            f(z) * d
        }
    };
    // Split at z = 1 so the heavy tail and the bulk get separate refinement.
    let split = z_max.min(1.0);
    let a = integrate(g, 0.0, split, opts)?.value;
    let b = if z_max > split {
        integrate(g, split, z_max, opts)?.value
    } else {
        0.0
    };
    Ok(a + b)
}

/// Expected information per observation at `theta` with the threshold held at `u0`.
pub fn fisher_information(theta: &FevimmParams, u0: f64) -> Result<FisherMatrix> {
    let t = FevimmParams { u: u0, ..*theta };
    t.validate()?;
    if !(t.xi > -0.5) {
        return Err(Error::InvalidParams(format!(
            "information is unbounded for xi <= -0.5 (xi = {})",
            t.xi
        )));
    }
    let regime = Regime::of(t.xi);
    let w = t.bulk_mass();
    let (phi1, phi2, eta, beta, xi, sigma) = (t.phi1, t.phi2, t.eta, t.beta, t.xi, t.sigma);

    let hd = h_derivs(eta, beta, u0);
    let y = u0 / beta;
    let ratio = eta * inc_gamma_pair(eta + 1.0, y).0 / inc_gamma_pair(eta, y).0;
    let i_ee = w * (trigamma(eta)? + hd.ee);
    let i_eb = w * (1.0 / beta + hd.eb);
    let i_bb = w * (hd.bb + 2.0 / (beta * beta) * ratio - eta / (beta * beta));

    let i_11 = 1.0 / phi1 + 1.0 / w;
    let i_12 = 1.0 / w;
    let i_22 = 1.0 / phi2 + 1.0 / w;

    let k = regime.labels().len();
    let mut m = DMatrix::<f64>::zeros(k, k);
    let last = k - 1;
    m[(0, 0)] = i_11;
    m[(0, last)] = i_12;
    m[(last, 0)] = i_12;
    m[(last, last)] = i_22;
    m[(1, 1)] = i_ee;
    m[(1, 2)] = i_eb;
    m[(2, 1)] = i_eb;
    m[(2, 2)] = i_bb;

    match regime {
        Regime::XiZero => {
            m[(3, 3)] = phi2 / (sigma * sigma);
        }
        Regime::XiNonzero if xi.abs() < XI_CLOSED_FORM_BAND || xi < XI_ENDPOINT_BAND => {
            // Near zero the expectation integrands cancel terms of order
            // z / xi^2; the closed forms they integrate to are exact and stable.
            let d = (1.0 + xi) * (1.0 + 2.0 * xi);
            m[(3, 3)] = phi2 * 2.0 / d;
            m[(3, 4)] = phi2 / (sigma * d);
            m[(4, 3)] = m[(3, 4)];
            m[(4, 4)] = phi2 / (sigma * sigma * (1.0 + 2.0 * xi));
        }
        Regime::XiNonzero => {
            let i_xx = gpd_expectation(xi, |z| {
                let t = 1.0 + xi * z;
                2.0 / (xi * xi * xi) * (xi * z).ln_1p() - 2.0 * z / (xi * xi * t) - (1.0 / xi + 1.0) * z * z / (t * t)
            })?;
            let i_ss = (gpd_expectation(xi, |z| {
                let t = 1.0 + xi * z;
                (1.0 / xi + 1.0) * xi * z * (2.0 + xi * z) / (t * t)
            })? - 1.0)
                / (sigma * sigma);
            let i_sx = gpd_expectation(xi, |z| {
                let t = 1.0 + xi * z;
                z / (sigma * xi * t) - (1.0 / xi + 1.0) * z / (sigma * t * t)
            })?;
            m[(3, 3)] = phi2 * i_xx;
            m[(3, 4)] = phi2 * i_sx;
            m[(4, 3)] = phi2 * i_sx;
            m[(4, 4)] = phi2 * i_ss;
        }
    }
    Ok(FisherMatrix { regime, u0, entries: m })
}

/// A Wald interval for one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Interval {
    pub name: &'static str,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `estimate_i ± z_{alpha/2} sqrt([I^-1]_ii / n)` for every parameter of `fisher`.
pub fn intervals_from_information(
    fisher: &FisherMatrix,
    estimates: &[f64],
    n: usize,
    alpha: f64,
) -> Result<Vec<Interval>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("asymptotic_ci", "alpha must lie in (0, 1)"));
    }
    if n == 0 {
        return Err(domain("asymptotic_ci", "n must be positive"));
    }
    if estimates.len() != fisher.dim() {
        return Err(domain("asymptotic_ci", "estimate count does not match the information matrix"));
    }
    let inv = fisher.inverse()?;
    let z = std_normal_quantile(1.0 - alpha / 2.0)?;
    Ok(fisher
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let se = (inv[(i, i)] / n as f64).sqrt();
            Interval {
                name,
                estimate: estimates[i],
                se,
                lower: estimates[i] - z * se,
                upper: estimates[i] + z * se,
            }
        })
        .collect())
}

/// Wald intervals at `theta_hat`, holding its threshold fixed.
pub fn asymptotic_ci(theta_hat: &FevimmParams, n: usize, alpha: f64) -> Result<Vec<Interval>> {
    let fisher = fisher_information(theta_hat, theta_hat.u)?;
    let t = theta_hat;
    let est: Vec<f64> = match fisher.regime {
        Regime::XiNonzero => vec![t.phi1, t.eta, t.beta, t.xi, t.sigma, t.phi2],
        Regime::XiZero => vec![t.phi1, t.eta, t.beta, t.sigma, t.phi2],
    };
    intervals_from_information(&fisher, &est, n, alpha)
}

/// Summary of a parametric bootstrap, in the `[phi1, eta, beta, u, xi, sigma, phi2]`
/// layout (NaN where the model lacks a parameter).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BootstrapReport {
    pub b: usize,
    pub n_failed: usize,
    pub se: [f64; 7],
    pub ci_lower: [f64; 7],
    pub ci_upper: [f64; 7],
    /// Estimates of the converged refits, in replication order.
    pub estimates: Vec<[f64; 7]>,
}

/// Largest tolerated share of failed refits.
pub const MAX_FAILURE_RATE: f64 = 0.2;

/// Draws `b` samples of size `n` from `fitted`, refits each starting from
/// `fitted`, and reports standard deviations and 2.5 / 97.5 percentiles.
pub fn parametric_bootstrap<R: Runner>(
    fitted: &ModelParams,
    n: usize,
    b: usize,
    seed: u64,
    opts: &FitOptions,
    runner: &R,
) -> Result<BootstrapReport> {
    if b < 100 {
        return Err(domain("parametric_bootstrap", "B must be at least 100"));
    }
    fitted.validate()?;
    let kind = fitted.kind();
    let results = runner.run(b, |i| -> Option<[f64; 7]> {
        let x = sample_model(n, fitted, replication_seed(seed, i)).ok()?;
        let data = Dataset::new(x).ok()?;
        let fit = fit_model(kind, &data, Some(fitted), opts).ok()?;
        fit.converged.then(|| fit.estimates())
    });
    let estimates: Vec<[f64; 7]> = results.into_iter().flatten().collect();
    let n_failed = b - estimates.len();
    if n_failed as f64 > MAX_FAILURE_RATE * b as f64 {
        return Err(Error::ConvergenceFailure {
            failed: n_failed,
            total: b,
            context: format!("parametric bootstrap of {kind}"),
        });
    }
    Ok(summarize_bootstrap(b, estimates))
}

pub(crate) fn summarize_bootstrap(b: usize, estimates: Vec<[f64; 7]>) -> BootstrapReport {
    let mut se = [f64::NAN; 7];
    let mut lo = [f64::NAN; 7];
    let mut hi = [f64::NAN; 7];
    for j in 0..7 {
        let mut col: Vec<f64> = estimates.iter().map(|e| e[j]).filter(|v| v.is_finite()).collect();
        if col.is_empty() {
            continue;
        }
        se[j] = sample_variance(&col).sqrt();
        sort_ascending(&mut col);
        lo[j] = empirical_quantile(&col, 0.025);
        hi[j] = empirical_quantile(&col, 0.975);
    }
    BootstrapReport {
        b,
        n_failed: b - estimates.len(),
        se,
        ci_lower: lo,
        ci_upper: hi,
        estimates,
    }
}
