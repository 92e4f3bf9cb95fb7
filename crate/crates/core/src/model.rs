//! The inlier mixture distribution, its baselines, and generalized Pareto helpers.
//!
//! Density convention: at exactly `x = 0` the FEVIMM `pdf` returns the atom
//! mass `phi1`, not a density value. The CDF is right-continuous, so
//! `cdf(0) = phi1`.
//!
//! The GPD shape is treated as zero (exponential tail) whenever
//! `|xi| < XI_ZERO_TOL`; every routine in the crate uses the same cutover.

use alloc::format;

#[allow(unused_imports)] // shadowed by std's inherent methods when a dependency links std
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::specfun::{gamma_cdf, gamma_quantile, inc_gamma_pair, ln_gamma_pdf_unchecked, ln_gamma_unchecked};

/// Below this magnitude the GPD shape is handled by the exponential branch.
pub const XI_ZERO_TOL: f64 = 1e-9;

/// Parameters of the three-component inlier mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FevimmParams {
    /// Mass of the atom at zero.
    pub phi1: f64,
    /// Gamma shape.
    pub eta: f64,
    /// Gamma scale.
    pub beta: f64,
    /// Threshold separating bulk and tail.
    pub u: f64,
    /// GPD shape.
    pub xi: f64,
    /// GPD scale.
    pub sigma: f64,
    /// Tail fraction.
    pub phi2: f64,
}

/// Generalized Pareto distribution above `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GpdParams {
    pub u: f64,
    pub sigma: f64,
    pub xi: f64,
}

/// Gamma bulk spliced to a GPD tail whose mass is `1 - H(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvmmParams {
    pub eta: f64,
    pub beta: f64,
    pub u: f64,
    pub sigma: f64,
    pub xi: f64,
}

/// Truncated gamma bulk with a free tail fraction and no atom.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FevmmParams {
    pub eta: f64,
    pub beta: f64,
    pub u: f64,
    pub xi: f64,
    pub sigma: f64,
    pub phi2: f64,
}

/// Which of the three mixture models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum ModelKind {
    #[cfg_attr(feature = "serde", serde(alias = "fevimm"))]
    Fevimm,
    #[cfg_attr(feature = "serde", serde(alias = "fevmm"))]
    Fevmm,
    #[cfg_attr(feature = "serde", serde(alias = "evmm"))]
    Evmm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Fevimm, ModelKind::Fevmm, ModelKind::Evmm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fevimm => "FEVIMM",
            ModelKind::Fevmm => "FEVMM",
            ModelKind::Evmm => "EVMM",
        }
    }

    /// Number of free parameters, threshold included.
    pub fn n_params(self) -> usize {
        match self {
            ModelKind::Fevimm => 7,
            ModelKind::Fevmm => 6,
            ModelKind::Evmm => 5,
        }
    }

    /// Case-insensitive parse of the model name.
    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter names in the common seven-slot layout.
pub const PARAM_NAMES: [&str; 7] = ["phi1", "eta", "beta", "u", "xi", "sigma", "phi2"];

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite, got {v}")))
    }
}

fn check_gamma_bulk(eta: f64, beta: f64, u: f64) -> Result<()> {
    check_positive("eta", eta)?;
    check_positive("beta", beta)?;
    check_positive("u", u)
}

fn check_masses(phi1: f64, phi2: f64) -> Result<()> {
    if !(phi2 > 0.0 && phi2 < 1.0) {
        return Err(Error::InvalidParams(format!("phi2 must lie in (0, 1), got {phi2}")));
    }
    if !(0.0..1.0).contains(&phi1) {
        return Err(Error::InvalidParams(format!("phi1 must lie in (0, 1), got {phi1}")));
    }
    if !(phi1 + phi2 < 1.0) {
        return Err(Error::InvalidParams(format!("phi1 + phi2 must be below 1, got {}", phi1 + phi2)));
    }
    Ok(())
}

impl GpdParams {
    pub fn validate(&self) -> Result<()> {
        check_finite("u", self.u)?;
        check_positive("sigma", self.sigma)?;
        check_finite("xi", self.xi)
    }

    /// Right endpoint of the support (infinite unless `xi < 0`).
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < -XI_ZERO_TOL {
            self.u - self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    /// ln(1 - G(x)); `-inf` beyond a finite endpoint.
    pub(crate) fn ln_survival(&self, x: f64) -> f64 {
        let z = (x - self.u) / self.sigma;
        if z <= 0.0 {
            return 0.0;
        }
        if self.xi.abs() < XI_ZERO_TOL {
            return -z;
        }
        let t = self.xi * z;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -t.ln_1p() / self.xi
    }

    /// Log density for `x >= u`; `-inf` outside the support.
    pub(crate) fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.u) / self.sigma;
        if z < 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.xi.abs() < XI_ZERO_TOL {
            return -self.sigma.ln() - z;
        }
        let t = self.xi * z;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - (1.0 / self.xi + 1.0) * t.ln_1p()
    }

    pub(crate) fn quantile_unchecked(&self, c: f64) -> f64 {
        let l = (-c).ln_1p();
        if self.xi.abs() < XI_ZERO_TOL {
            self.u - self.sigma * l
        } else {
            self.u + self.sigma / self.xi * (-self.xi * l).exp_m1()
        }
    }
}

/// GPD density; zero outside the support.
pub fn gpd_pdf(x: f64, params: &GpdParams) -> Result<f64> {
    params.validate()?;
    Ok(params.ln_pdf(x).exp())
}

/// GPD distribution function; 0 below `u`, 1 beyond a finite endpoint.
pub fn gpd_cdf(x: f64, params: &GpdParams) -> Result<f64> {
    params.validate()?;
    Ok(-params.ln_survival(x).exp_m1())
}

/// GPD quantile for `0 <= p < 1` (`p = 1` allowed when `xi < 0`).
pub fn gpd_quantile(p: f64, params: &GpdParams) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("gpd_quantile", "p must lie in [0, 1]"));
    }
    if p == 1.0 {
        let end = params.upper_endpoint();
        return if end.is_finite() {
            Ok(end)
        } else {
            Err(Error::UnboundedSupport { p })
        };
    }
    Ok(params.quantile_unchecked(p))
}

/// Truncated-gamma pieces that every bulk evaluation needs.
#[derive(Clone, Copy)]
pub(crate) struct Bulk {
    pub eta: f64,
    pub beta: f64,
    pub ln_norm: f64,
    pub g_u: f64,
}

impl Bulk {
    pub fn new(eta: f64, beta: f64, u: f64) -> Self {
        let g_u = inc_gamma_pair(eta, u / beta).0;
        Self {
            eta,
            beta,
            ln_norm: eta * beta.ln() + ln_gamma_unchecked(eta),
            g_u,
        }
    }

    /// ln g*(x) for `x > 0` (untruncated gamma density).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.eta - 1.0) * x.ln() - x / self.beta - self.ln_norm
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            inc_gamma_pair(self.eta, x / self.beta).0
        }
    }
}

impl FevimmParams {
    /// Builds and validates a parameter vector.
    pub fn new(phi1: f64, eta: f64, beta: f64, u: f64, xi: f64, sigma: f64, phi2: f64) -> Result<Self> {
        let p = Self { phi1, eta, beta, u, xi, sigma, phi2 };
        p.validate()?;
        Ok(p)
    }

    /// Checks `0 < phi1`, `0 < phi2`, `phi1 + phi2 < 1` and positivity of the rest.
    pub fn validate(&self) -> Result<()> {
        if !(self.phi1 > 0.0) {
            return Err(Error::InvalidParams(format!("phi1 must lie in (0, 1), got {}", self.phi1)));
        }
        self.validate_allowing_no_atom()
    }

    pub(crate) fn validate_allowing_no_atom(&self) -> Result<()> {
        check_masses(self.phi1, self.phi2)?;
        check_gamma_bulk(self.eta, self.beta, self.u)?;
        check_positive("sigma", self.sigma)?;
        check_finite("xi", self.xi)
    }

    pub fn tail(&self) -> GpdParams {
        GpdParams {
            u: self.u,
            sigma: self.sigma,
            xi: self.xi,
        }
    }

    /// Mass of the truncated gamma bulk, `1 - phi1 - phi2`.
    pub fn bulk_mass(&self) -> f64 {
        1.0 - self.phi1 - self.phi2
    }

    /// `[phi1, eta, beta, u, xi, sigma, phi2]`.
    pub fn to_array(&self) -> [f64; 7] {
        [self.phi1, self.eta, self.beta, self.u, self.xi, self.sigma, self.phi2]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            phi1: a[0],
            eta: a[1],
            beta: a[2],
            u: a[3],
            xi: a[4],
            sigma: a[5],
            phi2: a[6],
        }
    }

    pub(crate) fn bulk(&self) -> Bulk {
        Bulk::new(self.eta, self.beta, self.u)
    }
}

impl FevmmParams {
    pub fn validate(&self) -> Result<()> {
        self.as_fevimm().validate_allowing_no_atom()
    }

    /// The same distribution written as an inlier mixture with `phi1 = 0`.
    pub fn as_fevimm(&self) -> FevimmParams {
        FevimmParams {
            phi1: 0.0,
            eta: self.eta,
            beta: self.beta,
            u: self.u,
            xi: self.xi,
            sigma: self.sigma,
            phi2: self.phi2,
        }
    }
}

impl EvmmParams {
    pub fn validate(&self) -> Result<()> {
        check_gamma_bulk(self.eta, self.beta, self.u)?;
        check_positive("sigma", self.sigma)?;
        check_finite("xi", self.xi)
    }

    pub fn tail(&self) -> GpdParams {
        GpdParams {
            u: self.u,
            sigma: self.sigma,
            xi: self.xi,
        }
    }

    /// Tail mass implied by the bulk, `1 - H(u)`.
    pub fn tail_fraction(&self) -> f64 {
        inc_gamma_pair(self.eta, self.u / self.beta).1
    }
}

/// A fitted or true parameter vector of any of the three models.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", content = "params", rename_all = "UPPERCASE"))]
pub enum ModelParams {
    Fevimm(FevimmParams),
    Fevmm(FevmmParams),
    Evmm(EvmmParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Fevimm(_) => ModelKind::Fevimm,
            ModelParams::Fevmm(_) => ModelKind::Fevmm,
            ModelParams::Evmm(_) => ModelKind::Evmm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Fevimm(p) => p.validate(),
            ModelParams::Fevmm(p) => p.validate(),
            ModelParams::Evmm(p) => p.validate(),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            ModelParams::Fevimm(p) => cdf(x, p),
            ModelParams::Fevmm(p) => fevmm_cdf(x, p),
            ModelParams::Evmm(p) => evmm_cdf(x, p),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            ModelParams::Fevimm(t) => quantile(p, t),
            ModelParams::Fevmm(t) => {
                t.validate()?;
                quantile_unchecked(p, &t.as_fevimm())
            }
            ModelParams::Evmm(t) => evmm_quantile(p, t),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            ModelParams::Fevimm(p) => p.u,
            ModelParams::Fevmm(p) => p.u,
            ModelParams::Evmm(p) => p.u,
        }
    }

    /// Inverse of [`Self::to_layout`]; slots the model does not use are ignored.
    pub fn from_layout(kind: ModelKind, v: [f64; 7]) -> Self {
        let [_, eta, beta, u, xi, sigma, phi2] = v;
        match kind {
            ModelKind::Fevimm => ModelParams::Fevimm(FevimmParams::from_array(v)),
            ModelKind::Fevmm => ModelParams::Fevmm(FevmmParams {
                eta,
                beta,
                u,
                xi,
                sigma,
                phi2,
            }),
            ModelKind::Evmm => ModelParams::Evmm(EvmmParams { eta, beta, u, sigma, xi }),
        }
    }

    /// Values in the `[phi1, eta, beta, u, xi, sigma, phi2]` layout. A missing
    /// atom is NaN; EVMM reports its implied tail fraction in the `phi2` slot.
    pub fn to_layout(&self) -> [f64; 7] {
        match self {
            ModelParams::Fevimm(p) => p.to_array(),
            ModelParams::Fevmm(p) => [f64::NAN, p.eta, p.beta, p.u, p.xi, p.sigma, p.phi2],
            ModelParams::Evmm(p) => [f64::NAN, p.eta, p.beta, p.u, p.xi, p.sigma, p.tail_fraction()],
        }
    }
}

/// Mixed density: the atom mass at `x = 0`, a density elsewhere.
pub fn pdf(x: f64, theta: &FevimmParams) -> Result<f64> {
    theta.validate()?;
    if !(x >= 0.0) {
        return Err(domain("pdf", "x must be nonnegative"));
    }
    Ok(pdf_unchecked(x, theta))
}

pub(crate) fn pdf_unchecked(x: f64, theta: &FevimmParams) -> f64 {
    if x == 0.0 {
        return theta.phi1;
    }
    if x < theta.u {
        let bulk = theta.bulk();
        theta.bulk_mass() * (bulk.ln_pdf(x).exp() / bulk.g_u)
    } else {
        theta.phi2 * theta.tail().ln_pdf(x).exp()
    }
}

/// Right-continuous distribution function.
pub fn cdf(x: f64, theta: &FevimmParams) -> Result<f64> {
    theta.validate()?;
    if x.is_nan() {
        return Err(domain("cdf", "x is NaN"));
    }
    Ok(cdf_unchecked(x, theta))
}

pub(crate) fn cdf_unchecked(x: f64, theta: &FevimmParams) -> f64 {
    if x < 0.0 {
        0.0
    } else if x < theta.u {
        let bulk = theta.bulk();
        theta.phi1 + theta.bulk_mass() * bulk.cdf(x) / bulk.g_u
    } else {
        1.0 - theta.phi2 * theta.tail().ln_survival(x).exp()
    }
}

/// Quantile of order `p`; ties at branch boundaries resolve to the lower branch.
pub fn quantile(p: f64, theta: &FevimmParams) -> Result<f64> {
    theta.validate()?;
    quantile_unchecked(p, theta)
}

pub(crate) fn quantile_unchecked(p: f64, theta: &FevimmParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("quantile", "p must lie in [0, 1]"));
    }
    if p <= theta.phi1 {
        return Ok(0.0);
    }
    if p <= 1.0 - theta.phi2 {
        let k = (p - theta.phi1) / theta.bulk_mass();
        if k >= 1.0 {
            return Ok(theta.u);
        }
        let g_u = theta.bulk().g_u;
        return Ok(gamma_quantile(k * g_u, theta.eta, theta.beta)?.min(theta.u));
    }
    if p == 1.0 {
        let end = theta.tail().upper_endpoint();
        return if end.is_finite() {
            Ok(end)
        } else {
            Err(Error::UnboundedSupport { p })
        };
    }
    let c = (p - (1.0 - theta.phi2)) / theta.phi2;
    Ok(theta.tail().quantile_unchecked(c))
}

/// Alias of [`quantile`].
pub fn value_at_risk(p: f64, theta: &FevimmParams) -> Result<f64> {
    quantile(p, theta)
}

/// Scale that makes the density continuous at the threshold.
pub fn continuity_sigma(phi1: f64, phi2: f64, eta: f64, beta: f64, u: f64) -> Result<f64> {
    check_masses(phi1, phi2)?;
    check_gamma_bulk(eta, beta, u)?;
    let bulk = Bulk::new(eta, beta, u);
    let g = bulk.ln_pdf(u).exp();
    if !(g > 0.0) || !(bulk.g_u > 0.0) {
        return Err(Error::DegenerateBulk(format!("gamma density vanishes at u = {u}")));
    }
    Ok(phi2 / (1.0 - phi1 - phi2) * bulk.g_u / g)
}

/// Scale that matches the one-sided derivatives at the threshold for a gamma
/// bulk, `(1 + xi) / (1/beta - (eta - 1)/u)`.
///
/// Returns `None` when that value is not positive. The derivative match only
/// holds once the densities also agree at `u`; see [`smooth_matching`].
pub fn differentiability_sigma(eta: f64, beta: f64, u: f64, xi: f64) -> Result<Option<f64>> {
    check_gamma_bulk(eta, beta, u)?;
    check_finite("xi", xi)?;
    let a = 1.0 / beta;
    let b = (eta - 1.0) / u;
    let denom = a - b;
    if denom.abs() <= 1e-12 * (a.abs() + b.abs()) {
        return Err(Error::NoDifferentiableMatching(format!(
            "1/beta - (eta - 1)/u vanishes at eta = {eta}, beta = {beta}, u = {u}"
        )));
    }
    let sigma = (1.0 + xi) / denom;
    Ok(if sigma > 0.0 && sigma.is_finite() { Some(sigma) } else { None })
}

/// Completes `(phi1, eta, beta, u, xi)` so that the density is both continuous
/// and differentiable at `u`: sigma from [`differentiability_sigma`], then the
/// tail fraction that closes the continuity equation.
pub fn smooth_matching(phi1: f64, eta: f64, beta: f64, u: f64, xi: f64) -> Result<FevimmParams> {
    let sigma = differentiability_sigma(eta, beta, u, xi)?.ok_or_else(|| {
        Error::NoDifferentiableMatching(format!("implied sigma is not positive for xi = {xi}"))
    })?;
    if !(0.0..1.0).contains(&phi1) {
        return Err(Error::InvalidParams(format!("phi1 must lie in [0, 1), got {phi1}")));
    }
    let bulk = Bulk::new(eta, beta, u);
    let r = sigma * bulk.ln_pdf(u).exp() / bulk.g_u;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DegenerateBulk(format!("gamma density vanishes at u = {u}")));
    }
    let phi2 = r * (1.0 - phi1) / (1.0 + r);
    Ok(FevimmParams {
        phi1,
        eta,
        beta,
        u,
        xi,
        sigma,
        phi2,
    })
}

/// Expected value beyond the value at risk.
///
/// The bulk contribution is integrated numerically; the tail contribution uses
/// the GPD mean `u + sigma / (1 - xi)`. For `p <= phi1` the positive part is
/// divided by `1 - p`.
pub fn tail_value_at_risk(p: f64, theta: &FevimmParams) -> Result<f64> {
    theta.validate()?;
    if theta.xi >= 1.0 {
        return Err(Error::InfiniteMean { xi: theta.xi });
    }
    if !(0.0..1.0).contains(&p) {
        return Err(domain("tail_value_at_risk", "p must lie in [0, 1)"));
    }
    let q = quantile_unchecked(p, theta)?;
    let tail_mean = theta.u + theta.sigma / (1.0 - theta.xi);
    if p > 1.0 - theta.phi2 {
        return Ok(q + (theta.sigma + theta.xi * (q - theta.u)) / (1.0 - theta.xi));
    }
    let bulk = theta.bulk();
    let scale = theta.bulk_mass() / bulk.g_u;
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-9,
        max_intervals: 2000,
    };
    let lower = if p <= theta.phi1 { 0.0 } else { q };
    let bulk_part = if lower < theta.u {
        integrate(|x| if x > 0.0 { x * bulk.ln_pdf(x).exp() } else { 0.0 }, lower, theta.u, opts)?.value * scale
    } else {
        0.0
    };
    Ok((bulk_part + theta.phi2 * tail_mean) / (1.0 - p))
}

/// `P(X > x)` for `x >= u`, i.e. `phi2 (1 - G(x))`.
pub fn unconditional_survival(x: f64, theta: &FevimmParams) -> Result<f64> {
    theta.validate()?;
    if !(x >= theta.u) {
        return Err(domain("unconditional_survival", "x must be at least the threshold"));
    }
    Ok(theta.phi2 * theta.tail().ln_survival(x).exp())
}

/// EVMM distribution function: `H(x)` below `u`, `H(u) + (1 - H(u)) G(x)` above.
pub fn evmm_cdf(x: f64, params: &EvmmParams) -> Result<f64> {
    params.validate()?;
    if x.is_nan() {
        return Err(domain("evmm_cdf", "x is NaN"));
    }
    if x < params.u {
        return gamma_cdf(x.max(0.0), params.eta, params.beta);
    }
    Ok(1.0 - params.tail_fraction() * params.tail().ln_survival(x).exp())
}

/// EVMM density for `x > 0`.
pub fn evmm_pdf(x: f64, params: &EvmmParams) -> Result<f64> {
    params.validate()?;
    if !(x > 0.0) {
        return Err(domain("evmm_pdf", "x must be positive"));
    }
    Ok(evmm_ln_pdf_unchecked(x, params).exp())
}

pub(crate) fn evmm_ln_pdf_unchecked(x: f64, params: &EvmmParams) -> f64 {
    if x < params.u {
        ln_gamma_pdf_unchecked(x, params.eta, params.beta)
    } else {
        params.tail_fraction().ln() + params.tail().ln_pdf(x)
    }
}

/// EVMM quantile.
pub fn evmm_quantile(p: f64, params: &EvmmParams) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("evmm_quantile", "p must lie in [0, 1]"));
    }
    let (h_u, tail) = inc_gamma_pair(params.eta, params.u / params.beta);
    if p <= h_u {
        return if p >= 1.0 {
            Ok(params.u)
        } else {
            Ok(gamma_quantile(p, params.eta, params.beta)?.min(params.u))
        };
    }
    if p == 1.0 {
        let end = params.tail().upper_endpoint();
        return if end.is_finite() {
            Ok(end)
        } else {
            Err(Error::UnboundedSupport { p })
        };
    }
    Ok(params.tail().quantile_unchecked((p - h_u) / tail))
}

/// FEVMM distribution function (the inlier mixture without its atom).
pub fn fevmm_cdf(x: f64, params: &FevmmParams) -> Result<f64> {
    params.validate()?;
    if x.is_nan() {
        return Err(domain("fevmm_cdf", "x is NaN"));
    }
    Ok(cdf_unchecked(x, &params.as_fevimm()))
}

/// FEVMM density for `x > 0`.
pub fn fevmm_pdf(x: f64, params: &FevmmParams) -> Result<f64> {
    params.validate()?;
    if !(x > 0.0) {
        return Err(domain("fevmm_pdf", "x must be positive"));
    }
    Ok(pdf_unchecked(x, &params.as_fevimm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> FevimmParams {
        FevimmParams::new(0.4, 1.0, 5.0, 11.5129, 0.2, 5.0, 0.1).unwrap()
    }

    #[test]
    fn atom_and_threshold_values() {
        let t = reference();
        assert_eq!(pdf(0.0, &t).unwrap(), 0.4);
        assert!((pdf(t.u, &t).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(cdf(0.0, &t).unwrap(), 0.4);
        assert!((cdf(t.u, &t).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(cdf(-1.0, &t).unwrap(), 0.0);
        assert!(pdf(-1.0, &t).is_err());
    }

    #[test]
    fn bulk_density_exponential_case() {
        let t = reference();
        let g_u = 1.0 - (-t.u / 5.0).exp();
        let want = 0.5 * ((-0.4f64).exp() / 5.0) / g_u;
        assert!((pdf(2.0, &t).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn quantile_branches() {
        let t = reference();
        assert_eq!(quantile(0.3, &t).unwrap(), 0.0);
        assert_eq!(quantile(0.4, &t).unwrap(), 0.0);
        let q = quantile(0.95, &t).unwrap();
        let want = t.u + 25.0 * (0.5f64.powf(-0.2) - 1.0);
        assert!((q - want).abs() < 1e-12);
        let g_u = 1.0 - (-t.u / 5.0).exp();
        let q = quantile(0.65, &t).unwrap();
        assert!((q + 5.0 * (1.0 - 0.5 * g_u).ln()).abs() < 1e-10);
        assert_eq!(quantile(0.9, &t).unwrap(), t.u);
        assert!(matches!(quantile(1.0, &t), Err(Error::UnboundedSupport { .. })));
    }

    #[test]
    fn bounded_tail_reaches_endpoint() {
        let mut t = reference();
        t.xi = -0.25;
        assert!((quantile(1.0, &t).unwrap() - (t.u + 20.0)).abs() < 1e-12);
        assert_eq!(cdf(t.u + 25.0, &t).unwrap(), 1.0);
        assert_eq!(pdf(t.u + 25.0, &t).unwrap(), 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(FevimmParams::new(0.6, 1.0, 5.0, 11.5, 0.2, 5.0, 0.5).is_err());
        assert!(FevimmParams::new(0.0, 1.0, 5.0, 11.5, 0.2, 5.0, 0.1).is_err());
        assert!(FevimmParams::new(0.4, -1.0, 5.0, 11.5, 0.2, 5.0, 0.1).is_err());
        assert!(FevimmParams::new(0.4, 1.0, 5.0, 11.5, 0.2, 0.0, 0.1).is_err());
    }

    #[test]
    fn continuity_sigma_examples() {
        let g_u = 1.0 - (-11.5129f64 / 5.0).exp();
        let g = (-11.5129f64 / 5.0).exp() / 5.0;
        let s = continuity_sigma(0.4, 0.1, 1.0, 5.0, 11.5129).unwrap();
        assert!((s - 0.2 * g_u / g).abs() < 1e-9);
        assert!((s - 9.0).abs() < 1e-3);
        let s = continuity_sigma(0.25, 0.25, 1.0, 1.0, 2f64.ln()).unwrap();
        assert!((s - 0.5).abs() < 1e-14);
    }

    #[test]
    fn differentiability_sigma_examples() {
        assert!((differentiability_sigma(1.0, 5.0, 3.0, 0.2).unwrap().unwrap() - 6.0).abs() < 1e-12);
        assert!(matches!(
            differentiability_sigma(2.0, 1.0, 1.0, 0.0),
            Err(Error::NoDifferentiableMatching(_))
        ));
        let s = differentiability_sigma(4.0, 1.0, 6.6807, 0.2).unwrap().unwrap();
        assert!((s - 1.2 / (1.0 - 3.0 / 6.6807)).abs() < 1e-12);
        assert_eq!(differentiability_sigma(1.0, 5.0, 3.0, -1.5).unwrap(), None);
    }

    #[test]
    fn tvar_closed_forms() {
        let t = reference();
        let q = quantile(0.95, &t).unwrap();
        let want = q + (5.0 + 0.2 * (q - t.u)) / 0.8;
        assert!((tail_value_at_risk(0.95, &t).unwrap() - want).abs() < 1e-12);
        let at_u = tail_value_at_risk(0.9, &t).unwrap();
        assert!((at_u - (t.u + 5.0 / 0.8)).abs() < 1e-9);
        let mut heavy = t;
        heavy.xi = 1.0;
        assert!(matches!(tail_value_at_risk(0.5, &heavy), Err(Error::InfiniteMean { .. })));
    }

    #[test]
    fn survival_and_gpd_helpers() {
        let t = reference();
        assert!((unconditional_survival(t.u, &t).unwrap() - 0.1).abs() < 1e-15);
        let want = 0.1 * (1.0 + 0.2 * (20.0 - t.u) / 5.0f64).powf(-5.0);
        assert!((unconditional_survival(20.0, &t).unwrap() - want).abs() < 1e-14);
        assert!(unconditional_survival(5.0, &t).is_err());
        let g = GpdParams { u: 0.0, sigma: 1.0, xi: 0.0 };
        assert!((gpd_quantile(0.5, &g).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(gpd_cdf(0.0, &t.tail()).unwrap(), 0.0);
    }

    #[test]
    fn evmm_threshold_mass() {
        let e = EvmmParams {
            eta: 1.0,
            beta: 5.0,
            u: 11.5129,
            sigma: 5.0,
            xi: 0.2,
        };
        let h = 1.0 - (-11.5129f64 / 5.0).exp();
        assert!((evmm_cdf(e.u, &e).unwrap() - h).abs() < 1e-14);
        assert!((evmm_cdf(1e12, &e).unwrap() - 1.0).abs() < 1e-9);
        let q = evmm_quantile(0.95, &e).unwrap();
        assert!((evmm_cdf(q, &e).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn model_kind_parse() {
        assert_eq!(ModelKind::parse("fevimm"), Some(ModelKind::Fevimm));
        assert_eq!(ModelKind::parse("EvMm"), Some(ModelKind::Evmm));
        assert_eq!(ModelKind::parse("gev"), None);
    }
}
