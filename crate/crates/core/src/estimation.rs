//! Likelihoods, starting values and maximum likelihood fits.
//!
//! A [`Dataset`] keeps its positive values sorted together with prefix sums of
//! `x` and `ln x`, so the gamma bulk contributes to the log-likelihood in
//! `O(log n)`; only tail points are visited one by one.
//!
//! The EVMM and FEVMM baselines have no atom. Exact zeros are kept and scored
//! with the bulk density at a floor of `1e-3` times the smallest positive
//! observation (see [`Dataset::zero_floor`]).

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // shadowed by std's inherent methods when a dependency links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{EvmmParams, FevimmParams, FevmmParams, GpdParams, ModelKind, ModelParams, XI_ZERO_TOL};
use crate::optim::{nelder_mead, Minimum, NelderMeadOptions};
use crate::sampler::{rng, uniform};
use crate::specfun::{inc_gamma_pair, ln_gamma_unchecked};
use crate::stats::empirical_quantile;

/// Objective value used where the log-likelihood is `-inf`.
pub const INFEASIBLE_PENALTY: f64 = 1e15;
/// Range the GPD shape is held to while fitting mixtures.
pub const XI_RANGE: (f64, f64) = (-0.5, 1.0);
const XI_MARGIN: f64 = 1e-6;
const ALR_LIMIT: f64 = 25.0;
// A fitted mass this close to 0 or 1 is reported as on the boundary.
const MASS_BOUNDARY: f64 = 1e-6;
const CLAMP_PENALTY: f64 = 1e3;
const ZERO_FLOOR_FACTOR: f64 = 1e-3;
const MIN_SIDE: usize = 5;
/// Empirical quantile levels of the extra threshold starts.
pub const THRESHOLD_START_LEVELS: [f64; 2] = [0.8, 0.95];

/// Nonnegative observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    sorted: Vec<f64>,
    n_zero: usize,
    prefix_x: Vec<f64>,
    prefix_ln_x: Vec<f64>,
}

impl Dataset {
    /// Rejects empty input and negative or non-finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("dataset is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InsufficientData(format!(
                "observation {i} is {v}; values must be finite and nonnegative"
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let n_zero = sorted.partition_point(|&x| x == 0.0);
        let mut prefix_x = Vec::with_capacity(sorted.len() - n_zero + 1);
        let mut prefix_ln_x = Vec::with_capacity(sorted.len() - n_zero + 1);
        let (mut sx, mut slx) = (0.0, 0.0);
        prefix_x.push(0.0);
        prefix_ln_x.push(0.0);
        for &x in &sorted[n_zero..] {
            sx += x;
            slx += x.ln();
            prefix_x.push(sx);
            prefix_ln_x.push(slx);
        }
        Ok(Self {
            values,
            sorted,
            n_zero,
            prefix_x,
            prefix_ln_x,
        })
    }

    /// Observations in input order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All observations in ascending order.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Positive observations in ascending order.
    pub fn positives(&self) -> &[f64] {
        &self.sorted[self.n_zero..]
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn n_zero(&self) -> usize {
        self.n_zero
    }

    /// Copy with the exact zeros dropped.
    pub fn without_zeros(&self) -> Result<Dataset> {
        Dataset::new(self.values.iter().copied().filter(|&x| x > 0.0).collect())
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().expect("dataset is nonempty")
    }

    /// Smallest positive observation, if any.
    pub fn min_positive(&self) -> Option<f64> {
        self.positives().first().copied()
    }

    /// Point at which the atomless baselines evaluate exact zeros.
    pub fn zero_floor(&self) -> f64 {
        self.min_positive().unwrap_or(1.0) * ZERO_FLOOR_FACTOR
    }

    /// Number of observations `>= u`.
    pub fn count_at_least(&self, u: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&x| x < u)
    }

    /// Index into [`Self::positives`] of the first value `>= u`.
    fn split(&self, u: f64) -> usize {
        self.positives().partition_point(|&x| x < u)
    }
}

/// Log-likelihood split over zeros, bulk points `0 < x < u` and tail points `x >= u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikTerms {
    pub zero: f64,
    pub bulk: f64,
    pub tail: f64,
}

impl LogLikTerms {
    pub fn total(&self) -> f64 {
        self.zero + self.bulk + self.tail
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Zeros {
    Atom,
    Floor,
}

fn tail_sum(points: &[f64], tail: &GpdParams) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let ln_sigma = tail.sigma.ln();
    if tail.xi.abs() < XI_ZERO_TOL {
        let excess: f64 = points.iter().map(|x| x - tail.u).sum();
        return -(points.len() as f64) * ln_sigma - excess / tail.sigma;
    }
    let k = tail.xi / tail.sigma;
    let mut acc = 0.0;
    for &x in points {
        let t = k * (x - tail.u);
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += t.ln_1p();
    }
    -(points.len() as f64) * ln_sigma - (1.0 / tail.xi + 1.0) * acc
}

fn mixture_terms(theta: &FevimmParams, data: &Dataset, zeros: Zeros) -> LogLikTerms {
    let w = theta.bulk_mass();
    let idx = data.split(theta.u);
    let pos = data.positives();
    let m_bulk = idx as f64;
    let n0 = data.n_zero as f64;

    let needs_bulk = idx > 0 || (zeros == Zeros::Floor && data.n_zero > 0);
    let (ln_g_u, ln_norm) = if needs_bulk {
        let g_u = inc_gamma_pair(theta.eta, theta.u / theta.beta).0;
        (g_u.ln(), theta.eta * theta.beta.ln() + ln_gamma_unchecked(theta.eta))
    } else {
        (0.0, 0.0)
    };
    let bulk_const = w.ln() - ln_g_u - ln_norm;

    let zero = match zeros {
        _ if data.n_zero == 0 => 0.0,
        Zeros::Atom => n0 * theta.phi1.ln(),
        Zeros::Floor => {
            let x = data.zero_floor();
            n0 * (bulk_const + (theta.eta - 1.0) * x.ln() - x / theta.beta)
        }
    };
    let bulk = if idx == 0 {
        0.0
    } else {
        m_bulk * bulk_const + (theta.eta - 1.0) * data.prefix_ln_x[idx] - data.prefix_x[idx] / theta.beta
    };
    let tail_points = &pos[idx..];
    let tail = if tail_points.is_empty() {
        0.0
    } else {
        tail_points.len() as f64 * theta.phi2.ln() + tail_sum(tail_points, &theta.tail())
    };
    LogLikTerms {
        zero: nan_to_neg_inf(zero),
        bulk: nan_to_neg_inf(bulk),
        tail: nan_to_neg_inf(tail),
    }
}

fn nan_to_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// FEVIMM log-likelihood split into its three index sets.
pub fn log_likelihood_terms(theta: &FevimmParams, data: &Dataset) -> Result<LogLikTerms> {
    theta.validate()?;
    Ok(mixture_terms(theta, data, Zeros::Atom))
}

/// FEVIMM log-likelihood; `-inf` when some observation has zero density.
pub fn log_likelihood(theta: &FevimmParams, data: &Dataset) -> Result<f64> {
    Ok(log_likelihood_terms(theta, data)?.total())
}

/// Log-likelihood of any of the three models under its own zero convention.
pub fn model_log_likelihood(params: &ModelParams, data: &Dataset) -> Result<f64> {
    params.validate()?;
    Ok(model_ll_unchecked(params, data))
}

fn model_ll_unchecked(params: &ModelParams, data: &Dataset) -> f64 {
    match params {
        ModelParams::Fevimm(t) => mixture_terms(t, data, Zeros::Atom).total(),
        ModelParams::Fevmm(t) => mixture_terms(&t.as_fevimm(), data, Zeros::Floor).total(),
        ModelParams::Evmm(e) => evmm_ll(e, data),
    }
}

fn evmm_ll(e: &EvmmParams, data: &Dataset) -> f64 {
    let idx = data.split(e.u);
    let pos = data.positives();
    let ln_norm = e.eta * e.beta.ln() + ln_gamma_unchecked(e.eta);
    let ln_h = |x: f64| (e.eta - 1.0) * x.ln() - x / e.beta - ln_norm;
    let zero = if data.n_zero > 0 {
        data.n_zero as f64 * ln_h(data.zero_floor())
    } else {
        0.0
    };
    let bulk = if idx == 0 {
        0.0
    } else {
        -(idx as f64) * ln_norm + (e.eta - 1.0) * data.prefix_ln_x[idx] - data.prefix_x[idx] / e.beta
    };
    let tail_points = &pos[idx..];
    let tail = if tail_points.is_empty() {
        0.0
    } else {
        tail_points.len() as f64 * e.tail_fraction().ln() + tail_sum(tail_points, &e.tail())
    };
    nan_to_neg_inf(zero + bulk + tail)
}

/// Maximum likelihood fit of a GPD to the points above a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdFit {
    pub params: GpdParams,
    pub loglik: f64,
    pub n_exceed: usize,
    pub converged: bool,
}

/// Fits a GPD by maximum likelihood to the values strictly above `u`.
///
/// Starts from the method-of-moments estimate; the shape is kept inside
/// `(-0.99, 2)`.
pub fn gpd_mle(values: &[f64], u: f64) -> Result<GpdFit> {
    let excess: Vec<f64> = values.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
    if excess.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} exceedances above {u}; need at least 3",
            excess.len()
        )));
    }
    let n = excess.len() as f64;
    let m = excess.iter().sum::<f64>() / n;
    let v = excess.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1.0);
    if !(m > 0.0) {
        return Err(Error::InsufficientData(format!("exceedances above {u} are degenerate")));
    }
    let ratio = if v > 0.0 { m * m / v } else { 1.0 };
    let xi0 = (0.5 * (1.0 - ratio)).clamp(-0.45, 0.9);
    let sigma0 = (m * (1.0 - xi0)).max(1e-8 * m);
    let (lo, hi) = (-0.99, 2.0);

    let decode = |z: &[f64]| -> (GpdParams, f64) {
        let xi = z[1].clamp(lo, hi);
        let pen = CLAMP_PENALTY * (z[1] - xi) * (z[1] - xi);
        (GpdParams { u: 0.0, sigma: z[0].exp(), xi }, pen)
    };
    let objective = |z: &[f64]| {
        let (p, pen) = decode(z);
        let ll = tail_sum(&excess, &p);
        if ll.is_finite() {
            -ll + pen
        } else {
            INFEASIBLE_PENALTY + pen
        }
    };
    let opts = NelderMeadOptions {
        steps: Some(alloc::vec![0.2, 0.1]),
        ..Default::default()
    };
    let mut best = nelder_mead(objective, &[sigma0.ln(), xi0], &opts);
    let polish = nelder_mead(objective, &best.x, &opts);
    if polish.f <= best.f {
        best = Minimum {
            iterations: best.iterations + polish.iterations,
            ..polish
        };
    }
    let (p, _) = decode(&best.x);
    let loglik = tail_sum(&excess, &p);
    Ok(GpdFit {
        params: GpdParams { u, sigma: p.sigma, xi: p.xi },
        loglik,
        n_exceed: excess.len(),
        converged: best.converged && loglik.is_finite(),
    })
}

/// Starting values with the threshold at the empirical 0.90 quantile.
pub fn initial_values(data: &Dataset) -> Result<FevimmParams> {
    let u0 = empirical_quantile(data.sorted(), 0.90);
    initial_values_at(data, u0)
}

/// Starting values for a given threshold: empirical masses, bulk moments on
/// `(0, u)`, and a GPD fit to the exceedances.
pub fn initial_values_at(data: &Dataset, u: f64) -> Result<FevimmParams> {
    let n = data.n() as f64;
    let pos = data.positives();
    let idx = data.split(u);
    if idx < 10 {
        return Err(Error::InsufficientData(format!(
            "bulk region (0, {u}) holds {idx} positive points; need at least 10"
        )));
    }
    let n_tail = data.count_at_least(u);
    if n_tail < 5 {
        return Err(Error::InsufficientData(format!(
            "tail region [{u}, inf) holds {n_tail} points; need at least 5"
        )));
    }
    let bulk = &pos[..idx];
    let m = crate::stats::mean(bulk);
    let s2 = crate::stats::sample_variance(bulk);
    if !(s2 > 0.0) {
        return Err(Error::InsufficientData(format!("bulk region (0, {u}) has zero variance")));
    }
    let gpd = gpd_mle(data.sorted(), u)?;
    Ok(FevimmParams {
        phi1: (data.n_zero() as f64).max(0.5) / n,
        eta: m * m / s2,
        beta: s2 / m,
        u,
        xi: gpd.params.xi.clamp(XI_RANGE.0 + 0.05, XI_RANGE.1 - 0.05),
        sigma: gpd.params.sigma,
        phi2: n_tail as f64 / n,
    })
}

/// Optimisation settings shared by every fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Simplex size and objective spread tolerance.
    pub tol: f64,
    /// Jittered restarts in addition to the unjittered start.
    pub restarts: usize,
    /// Relative size of the multiplicative jitter.
    pub jitter: f64,
    /// Seed of the jitter stream.
    pub seed: u64,
    /// Rerun the simplex once from the winning point.
    pub polish: bool,
    /// Hold the threshold at this value instead of estimating it.
    pub fixed_threshold: Option<f64>,
    /// Keep the per-iteration best objective of the winning run.
    pub trace: bool,
    /// Also start from data-driven values at the thresholds in
    /// [`THRESHOLD_START_LEVELS`] when no starting point is given.
    pub threshold_starts: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-8,
            restarts: 3,
            jitter: 0.1,
            seed: 0x5eed,
            polish: true,
            fixed_threshold: None,
            trace: false,
            threshold_starts: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FitMethod {
    Full,
    Profile,
}

/// Outcome of a maximum likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub method: FitMethod,
    /// Candidate thresholds of a profile fit.
    pub threshold_grid: Option<Vec<f64>>,
    /// Maximised log-likelihood at each candidate threshold.
    pub profile_loglik: Option<Vec<f64>>,
    /// A mass or the tail shape ended on its clamp.
    pub at_boundary: bool,
    pub n: usize,
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn model(&self) -> ModelKind {
        self.params.kind()
    }

    /// Estimates in the `[phi1, eta, beta, u, xi, sigma, phi2]` layout.
    pub fn estimates(&self) -> [f64; 7] {
        self.params.to_layout()
    }

    pub fn fevimm(&self) -> Option<FevimmParams> {
        match self.params {
            ModelParams::Fevimm(p) => Some(p),
            _ => None,
        }
    }

    /// Number of model parameters, threshold included.
    pub fn n_params(&self) -> usize {
        self.model().n_params()
    }
}

/// Maps unconstrained simplex coordinates to model parameters.
struct Codec {
    kind: ModelKind,
    fixed_u: Option<f64>,
    ln_lo: f64,
    ln_hi: f64,
}

struct Decoded {
    layout: [f64; 7],
    penalty: f64,
    at_boundary: bool,
}

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

impl Codec {
    fn new(kind: ModelKind, data: &Dataset, fixed_u: Option<f64>) -> Result<Self> {
        let pos = data.positives();
        if pos.is_empty() {
            return Err(Error::InsufficientData("no positive observations".into()));
        }
        // Keep MIN_SIDE positives strictly below the threshold and MIN_SIDE
        // observations above it; with a lone exceedance at u the likelihood
        // grows without bound as sigma -> 0.
        let (lo, hi) = if pos.len() >= 2 * MIN_SIDE {
            (pos[MIN_SIDE - 1], pos[pos.len() - MIN_SIDE])
        } else {
            (pos[0], pos[pos.len() - 1])
        };
        if fixed_u.is_none() && (pos.len() < 2 * MIN_SIDE || !(hi > lo)) {
            return Err(Error::InsufficientData(format!(
                "need {} distinct positive observations around the threshold",
                2 * MIN_SIDE
            )));
        }
        Ok(Self {
            kind,
            fixed_u,
            ln_lo: lo.ln(),
            ln_hi: hi.ln(),
        })
    }

    fn encode(&self, p: &[f64; 7]) -> Vec<f64> {
        let [phi1, eta, beta, u, xi, sigma, phi2] = *p;
        let mut z = Vec::with_capacity(7);
        match self.kind {
            ModelKind::Fevimm => {
                let w = 1.0 - phi1 - phi2;
                z.push((phi1 / w).ln().clamp(-ALR_LIMIT, ALR_LIMIT));
                z.push((phi2 / w).ln().clamp(-ALR_LIMIT, ALR_LIMIT));
            }
            ModelKind::Fevmm => z.push((phi2 / (1.0 - phi2)).ln().clamp(-ALR_LIMIT, ALR_LIMIT)),
            ModelKind::Evmm => {}
        }
        z.push(eta.ln());
        z.push(beta.ln());
        if self.fixed_u.is_none() {
            let frac = ((u.ln() - self.ln_lo) / (self.ln_hi - self.ln_lo)).clamp(1e-6, 1.0 - 1e-6);
            z.push((frac / (1.0 - frac)).ln());
        }
        z.push(xi.clamp(XI_RANGE.0 + XI_MARGIN, XI_RANGE.1 - XI_MARGIN));
        z.push(sigma.ln());
        z
    }

    fn decode(&self, z: &[f64]) -> Decoded {
        let mut penalty = 0.0;
        let mut at_boundary = false;
        let mut clamp = |v: f64, lo: f64, hi: f64| {
            let c = v.clamp(lo, hi);
            if c != v || c <= lo || c >= hi {
                at_boundary = true;
            }
            penalty += CLAMP_PENALTY * (v - c) * (v - c);
            c
        };
        let mut i = 0;
        let (phi1, phi2) = match self.kind {
            ModelKind::Fevimm => {
                let a = clamp(z[0], -ALR_LIMIT, ALR_LIMIT).exp();
                let b = clamp(z[1], -ALR_LIMIT, ALR_LIMIT).exp();
                i = 2;
                let d = 1.0 + a + b;
                (a / d, b / d)
            }
            ModelKind::Fevmm => {
                let b = clamp(z[0], -ALR_LIMIT, ALR_LIMIT).exp();
                i = 1;
                (f64::NAN, b / (1.0 + b))
            }
            ModelKind::Evmm => (f64::NAN, f64::NAN),
        };
        let eta = z[i].exp();
        let beta = z[i + 1].exp();
        i += 2;
        let u = match self.fixed_u {
            Some(u) => u,
            None => {
                i += 1;
                (self.ln_lo + (self.ln_hi - self.ln_lo) * logistic(z[i - 1])).exp()
            }
        };
        let xi = clamp(z[i], XI_RANGE.0 + XI_MARGIN, XI_RANGE.1 - XI_MARGIN);
        let sigma = z[i + 1].exp();
        Decoded {
            layout: [phi1, eta, beta, u, xi, sigma, phi2],
            penalty,
            at_boundary,
        }
    }

    fn params(&self, layout: &[f64; 7]) -> ModelParams {
        let [phi1, eta, beta, u, xi, sigma, phi2] = *layout;
        match self.kind {
            ModelKind::Fevimm => ModelParams::Fevimm(FevimmParams {
                phi1,
                eta,
                beta,
                u,
                xi,
                sigma,
                phi2,
            }),
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

    fn loglik(&self, layout: &[f64; 7], data: &Dataset) -> f64 {
        let p = self.params(layout);
        let ok = layout.iter().enumerate().all(|(i, v)| match (self.kind, i) {
            (ModelKind::Fevimm, _) => v.is_finite(),
            (ModelKind::Fevmm, 0) => true,
            (ModelKind::Evmm, 0) | (ModelKind::Evmm, 6) => true,
            _ => v.is_finite(),
        });
        if !ok {
            return f64::NEG_INFINITY;
        }
        match &p {
            ModelParams::Fevimm(t) if !(t.phi1 > 0.0 && t.phi2 > 0.0 && t.phi1 + t.phi2 < 1.0) => f64::NEG_INFINITY,
            ModelParams::Fevmm(t) if !(t.phi2 > 0.0 && t.phi2 < 1.0) => f64::NEG_INFINITY,
            _ => model_ll_unchecked(&p, data),
        }
    }

    /// Sets the mass coordinates to their exact maximiser given the other
    /// parameters: the log-likelihood separates into `n0 ln phi1 + n_b ln w +
    /// n_t ln phi2` plus terms free of the masses, so `phi1 = n0 / n` and
    /// `phi2 = n_t / n` at the current threshold.
    fn snap_masses(&self, z: &mut [f64], data: &Dataset) {
        let u = self.decode(z).layout[3];
        let n = data.n() as f64;
        let n_t = data.count_at_least(u) as f64;
        let ln_ratio = |a: f64, b: f64| {
            if a > 0.0 && b > 0.0 {
                (a / b).ln().clamp(-ALR_LIMIT, ALR_LIMIT)
            } else if a > 0.0 {
                ALR_LIMIT
            } else {
                -ALR_LIMIT
            }
        };
        match self.kind {
            ModelKind::Fevimm => {
                let n0 = data.n_zero() as f64;
                let n_b = n - n0 - n_t;
                z[0] = ln_ratio(n0, n_b);
                z[1] = ln_ratio(n_t, n_b);
            }
            ModelKind::Fevmm => z[0] = ln_ratio(n_t, n - n_t),
            ModelKind::Evmm => {}
        }
    }

    fn objective(&self, z: &[f64], data: &Dataset) -> f64 {
        let d = self.decode(z);
        let ll = self.loglik(&d.layout, data);
        if ll.is_finite() {
            -ll + d.penalty
        } else {
            INFEASIBLE_PENALTY + d.penalty
        }
    }
}

fn compare_runs(a: &(Minimum, [f64; 7]), b: &(Minimum, [f64; 7])) -> Ordering {
    a.0.f
        .total_cmp(&b.0.f)
        .then(a.0.iterations.cmp(&b.0.iterations))
        .then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn jittered(start: &[f64; 7], kind: ModelKind, jitter: f64, seed: u64, lo: f64, hi: f64) -> [f64; 7] {
    let mut r = rng(seed);
    let mut p = *start;
    for v in p.iter_mut() {
        let e = 2.0 * uniform(&mut r) - 1.0;
        if v.is_finite() {
            *v *= 1.0 + jitter * e;
        }
    }
    // Restore the constraints the jitter may have broken.
    p[3] = p[3].clamp(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
    if kind == ModelKind::Fevimm && p[0] + p[6] >= 0.99 {
        let s = 0.98 / (p[0] + p[6]);
        p[0] *= s;
        p[6] *= s;
    }
    if p[6].is_finite() {
        p[6] = p[6].min(0.98);
    }
    p
}

/// Maximum likelihood fit of any of the three models.
///
/// Runs the simplex from `init` (or [`initial_values`]) and from
/// `opts.restarts` jittered copies, keeps the best run (ties go to fewer
/// iterations, then to the lexicographically smaller estimate) and optionally
/// polishes it with one more run.
pub fn fit_model(kind: ModelKind, data: &Dataset, init: Option<&ModelParams>, opts: &FitOptions) -> Result<FitResult> {
    if data.min_positive().is_none() {
        return Err(Error::InsufficientData("all observations are zero".into()));
    }
    let codec = Codec::new(kind, data, opts.fixed_threshold)?;
    let mut start = match init {
        Some(p) => {
            if p.kind() != kind {
                return Err(Error::InvalidParams(format!(
                    "starting values are for {} but {} is being fitted",
                    p.kind(),
                    kind
                )));
            }
            p.to_layout()
        }
        None => match opts.fixed_threshold {
            Some(u) => initial_values_at(data, u)?.to_array(),
            None => initial_values(data)?.to_array(),
        },
    };
    if let Some(u) = opts.fixed_threshold {
        start[3] = u;
    }
    match kind {
        ModelKind::Fevimm => {}
        ModelKind::Fevmm => {
            start[0] = f64::NAN;
            if !(start[6] > 0.0 && start[6] < 1.0) {
                start[6] = data.count_at_least(start[3]).max(1) as f64 / data.n() as f64;
            }
        }
        ModelKind::Evmm => {
            start[0] = f64::NAN;
            start[6] = f64::NAN;
        }
    }

    let nm = NelderMeadOptions {
        max_iter: opts.max_iter,
        x_tol: opts.tol,
        f_tol: opts.tol,
        steps: None,
        trace: opts.trace,
    };
    let (lo, hi) = (codec.ln_lo.exp(), codec.ln_hi.exp());
    let objective = |z: &[f64]| codec.objective(z, data);
    // The simplex tends to stall slightly off the mass optimum, and short of the
    // ALR limit when there are no zeros.
    let snap = |m: &mut Minimum| {
        let mut x = m.x.clone();
        codec.snap_masses(&mut x, data);
        let f = objective(&x);
        if f <= m.f {
            m.x = x;
            m.f = f;
        }
    };

    let mut starts: Vec<[f64; 7]> = (0..=opts.restarts)
        .map(|r| match r {
            0 => start,
            _ => jittered(&start, kind, opts.jitter, opts.seed.wrapping_add(r as u64), lo, hi),
        })
        .collect();
    if opts.threshold_starts && init.is_none() && opts.fixed_threshold.is_none() {
        // The likelihood is often multimodal in u; jitter alone stays in one basin.
        for level in THRESHOLD_START_LEVELS {
            let u = empirical_quantile(data.sorted(), level).clamp(lo, hi);
            if let Ok(p) = initial_values_at(data, u) {
                let mut s = p.to_array();
                s[0] = start[0];
                if kind == ModelKind::Evmm {
                    s[6] = f64::NAN;
                }
                starts.push(s);
            }
        }
    }
    let mut runs: Vec<(Minimum, [f64; 7])> = starts
        .iter()
        .map(|s| {
            let mut m = nelder_mead(objective, &codec.encode(s), &nm);
            snap(&mut m);
            let layout = codec.decode(&m.x).layout;
            (m, layout)
        })
        .collect();
    runs.sort_by(compare_runs);
    let (mut best, _) = runs.swap_remove(0);
    let mut iterations = best.iterations;
    let mut evaluations = best.evaluations;
    if opts.polish {
        let mut p = nelder_mead(objective, &best.x, &nm);
        iterations += p.iterations;
        evaluations += p.evaluations;
        snap(&mut p);
        if p.f <= best.f {
            let mut trace = core::mem::take(&mut best.trace);
            trace.extend_from_slice(&p.trace);
            best = Minimum { trace, ..p };
        } else {
            best.converged = best.converged && p.converged;
        }
    }
    let decoded = codec.decode(&best.x);
    let masses_degenerate = [decoded.layout[0], decoded.layout[6]]
        .iter()
        .any(|m| m.is_finite() && !(*m > MASS_BOUNDARY && *m < 1.0 - MASS_BOUNDARY));
    let params = codec.params(&decoded.layout);
    let loglik = codec.loglik(&decoded.layout, data);
    Ok(FitResult {
        params,
        loglik,
        converged: best.converged && loglik.is_finite(),
        iterations,
        evaluations,
        method: FitMethod::Full,
        threshold_grid: None,
        profile_loglik: None,
        at_boundary: decoded.at_boundary || masses_degenerate,
        n: data.n(),
        trace: best.trace,
    })
}

/// Full-likelihood FEVIMM fit over all seven parameters.
pub fn fit_full(data: &Dataset, init: Option<&FevimmParams>, opts: &FitOptions) -> Result<FitResult> {
    let init = init.map(|p| ModelParams::Fevimm(*p));
    fit_model(ModelKind::Fevimm, data, init.as_ref(), opts)
}

/// EVMM fit (implied tail fraction, zeros at the floor).
pub fn fit_evmm(data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    fit_model(ModelKind::Evmm, data, None, opts)
}

/// FEVMM fit (free tail fraction, no atom, zeros at the floor).
pub fn fit_fevmm(data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    fit_model(ModelKind::Fevmm, data, None, opts)
}

/// FEVIMM fit with the threshold chosen from `grid` by profile likelihood.
pub fn fit_profile(data: &Dataset, grid: &[f64], opts: &FitOptions) -> Result<FitResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("threshold grid is empty".into()));
    }
    let lo = data
        .min_positive()
        .ok_or_else(|| Error::InsufficientData("all observations are zero".into()))?;
    for &u in grid {
        if !(u > lo && u < data.max()) {
            return Err(Error::InvalidParams(format!(
                "grid threshold {u} is not strictly inside ({lo}, {})",
                data.max()
            )));
        }
        if data.count_at_least(u) < 5 {
            return Err(Error::InvalidParams(format!("grid threshold {u} leaves fewer than 5 exceedances")));
        }
    }
    let mut best: Option<FitResult> = None;
    let mut profile = Vec::with_capacity(grid.len());
    let mut iterations = 0;
    let mut evaluations = 0;
    for &u in grid {
        let fit = fit_full(
            data,
            None,
            &FitOptions {
                fixed_threshold: Some(u),
                ..opts.clone()
            },
        )?;
        profile.push(fit.loglik);
        iterations += fit.iterations;
        evaluations += fit.evaluations;
        if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
            best = Some(fit);
        }
    }
    let mut best = best.expect("grid is nonempty");
    best.method = FitMethod::Profile;
    best.threshold_grid = Some(grid.to_vec());
    best.profile_loglik = Some(profile);
    best.iterations = iterations;
    best.evaluations = evaluations;
    Ok(best)
}
