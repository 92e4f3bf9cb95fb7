//! JSON fit reports and their conversion back into fits.

use std::collections::BTreeMap;

use evinlier_core::diagnostics::naic;
use evinlier_core::estimation::FitMethod;
use evinlier_core::inference::asymptotic_ci;
use evinlier_core::model::PARAM_NAMES;
use evinlier_core::{Dataset, FitResult, ModelKind, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::json::nullable_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub parameter: String,
    #[serde(deserialize_with = "nullable_f64")]
    pub estimate: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub se: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub lower: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    pub method: FitMethod,
    pub n: usize,
    pub n_zero: usize,
    /// Estimates by parameter name; EVMM's `phi2` is the implied tail fraction.
    pub estimates: BTreeMap<String, f64>,
    #[serde(deserialize_with = "nullable_f64")]
    pub loglik: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub naic: f64,
    pub n_params: usize,
    pub converged: bool,
    pub at_boundary: bool,
    pub iterations: usize,
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_loglik: Option<Vec<f64>>,
    pub ci_alpha: f64,
    /// Wald intervals with the threshold held at its estimate (FEVIMM only).
    #[serde(default)]
    pub intervals: Vec<IntervalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_note: Option<String>,
}

impl FitReport {
    pub fn new(fit: &FitResult, data: &Dataset, ci_alpha: f64) -> Self {
        let est = fit.estimates();
        let estimates = PARAM_NAMES
            .iter()
            .zip(est)
            .filter(|(_, v)| v.is_finite())
            .map(|(&k, v)| (k.to_string(), v))
            .collect();
        let mut intervals = Vec::new();
        let mut ci_note = None;
        if let Some(theta) = fit.fevimm() {
            match asymptotic_ci(&theta, data.n(), ci_alpha) {
                Ok(ci) => {
                    intervals = ci
                        .into_iter()
                        .map(|iv| IntervalRow {
                            parameter: iv.name.to_string(),
                            estimate: iv.estimate,
                            se: iv.se,
                            lower: iv.lower,
                            upper: iv.upper,
                        })
                        .collect()
                }
                Err(e) => ci_note = Some(e.to_string()),
            }
        } else {
            ci_note = Some(format!("no information matrix for {}", fit.model()));
        }
        Self {
            model: fit.model(),
            method: fit.method,
            n: data.n(),
            n_zero: data.n_zero(),
            estimates,
            loglik: fit.loglik,
            naic: naic(fit.loglik, fit.n_params(), data.n()),
            n_params: fit.n_params(),
            converged: fit.converged,
            at_boundary: fit.at_boundary,
            iterations: fit.iterations,
            evaluations: fit.evaluations,
            threshold_grid: fit.threshold_grid.clone(),
            profile_loglik: fit.profile_loglik.clone(),
            ci_alpha,
            intervals,
            ci_note,
        }
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        let mut layout = [f64::NAN; 7];
        for (slot, name) in PARAM_NAMES.iter().enumerate() {
            if let Some(&v) = self.estimates.get(*name) {
                layout[slot] = v;
            }
        }
        let p = ModelParams::from_layout(self.model, layout);
        p.validate()
            .map_err(|e| CliError::Usage(format!("fit report holds invalid estimates: {e}")))?;
        Ok(p)
    }

    /// The fit as the core library sees it (without the optimiser trace).
    pub fn to_fit_result(&self) -> CliResult<FitResult> {
        Ok(FitResult {
            params: self.params()?,
            loglik: self.loglik,
            converged: self.converged,
            iterations: self.iterations,
            evaluations: self.evaluations,
            method: self.method,
            threshold_grid: self.threshold_grid.clone(),
            profile_loglik: self.profile_loglik.clone(),
            at_boundary: self.at_boundary,
            n: self.n,
            trace: Vec::new(),
        })
    }
}
