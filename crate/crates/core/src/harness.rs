//! Monte Carlo simulation studies: bias, MSE, bootstrap spread and coverage.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Result};
use crate::estimation::{fit_model, Dataset, FitOptions, FitResult};
use crate::inference::{asymptotic_ci, parametric_bootstrap, MAX_FAILURE_RATE};
use crate::model::{FevimmParams, ModelKind, PARAM_NAMES};
use crate::parallel::Runner;
use crate::sampler::{replication_seed, SampleSpec};

/// One simulation study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub name: String,
    pub theta_true: FevimmParams,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    /// Bootstrap size for the BSE and BCI columns; 0 skips them.
    #[cfg_attr(feature = "serde", serde(default))]
    pub bootstrap_b: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_alpha"))]
    pub ci_alpha: f64,
}

#[cfg(feature = "serde")]
fn default_alpha() -> f64 {
    0.05
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.theta_true.validate()?;
        if self.replications == 0 {
            return Err(domain("scenario", "replications must be at least 1"));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(domain("scenario", "n_values must be non-empty and positive"));
        }
        if self.models.is_empty() {
            return Err(domain("scenario", "no models requested"));
        }
        if self.bootstrap_b != 0 && self.bootstrap_b < 100 {
            return Err(domain("scenario", "bootstrap_b must be 0 or at least 100"));
        }
        if !(self.ci_alpha > 0.0 && self.ci_alpha < 1.0) {
            return Err(domain("scenario", "ci_alpha must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Seed of the sample for replication `i` at the `j`-th sample size.
    pub fn data_seed(&self, j: usize, i: usize) -> u64 {
        replication_seed(self.seed, j * self.replications + i)
    }

    fn bootstrap_seed(&self, cell: usize) -> u64 {
        self.seed.wrapping_add(1 << 40).wrapping_add((cell as u64) << 24)
    }
}

/// Summary of one parameter within a (model, n) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ParamSummary {
    pub parameter: &'static str,
    pub truth: f64,
    pub sample_mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub bse: f64,
    pub bci_lower: f64,
    pub bci_upper: f64,
    /// Percentage of converged replications whose Wald interval covers the truth.
    pub coverage_pct: f64,
}

/// Results for one model at one sample size.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CellReport {
    pub model: ModelKind,
    pub n: usize,
    pub replications: usize,
    pub n_converged: usize,
    /// Why the cell was abandoned, if it was.
    pub aborted: Option<String>,
    pub params: Vec<ParamSummary>,
    /// Converged estimates in the seven-slot layout, in replication order.
    pub estimates: Vec<[f64; 7]>,
    pub logliks: Vec<f64>,
    /// Per converged replication and slot: did the Wald interval cover the truth.
    pub covered: Vec<[bool; 7]>,
    /// Replications whose information matrix could not be inverted.
    pub ci_failures: usize,
    /// Index into `estimates` of the replication anchoring the bootstrap.
    pub bootstrap_anchor: Option<usize>,
}

impl CellReport {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.parameter == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SimReport {
    pub scenario: Scenario,
    pub cells: Vec<CellReport>,
}

/// One line of the long-format export.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReportRow {
    pub model: ModelKind,
    pub n: usize,
    pub parameter: &'static str,
    pub metric: &'static str,
    pub value: f64,
}

impl SimReport {
    pub fn cell(&self, model: ModelKind, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.model == model && c.n == n)
    }

    /// Every metric of every completed cell in long format.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for c in self.cells.iter().filter(|c| c.aborted.is_none()) {
            rows.push(ReportRow {
                model: c.model,
                n: c.n,
                parameter: "all",
                metric: "n_converged",
                value: c.n_converged as f64,
            });
            for p in &c.params {
                let metrics = [
                    ("truth", p.truth),
                    ("mean", p.sample_mean),
                    ("bias", p.bias),
                    ("mse", p.mse),
                    ("bse", p.bse),
                    ("bci_lower", p.bci_lower),
                    ("bci_upper", p.bci_upper),
                    ("coverage_pct", p.coverage_pct),
                ];
                for (metric, value) in metrics {
                    rows.push(ReportRow {
                        model: c.model,
                        n: c.n,
                        parameter: p.parameter,
                        metric,
                        value,
                    });
                }
            }
        }
        rows
    }
}

struct Replication {
    fit: FitResult,
    covered: [bool; 7],
    ci_failed: bool,
}

fn run_replication(
    kind: ModelKind,
    data: &Dataset,
    truth: &[f64; 7],
    alpha: f64,
    opts: &FitOptions,
) -> Option<Replication> {
    let fit = fit_model(kind, data, None, opts).ok()?;
    if !fit.converged {
        return None;
    }
    let mut covered = [false; 7];
    let mut ci_failed = false;
    if let Some(theta) = fit.fevimm() {
        match asymptotic_ci(&theta, data.n(), alpha) {
            Ok(ci) => {
                for iv in ci {
                    if let Some(j) = PARAM_NAMES.iter().position(|&p| p == iv.name) {
                        covered[j] = iv.lower <= truth[j] && truth[j] <= iv.upper;
                    }
                }
            }
            Err(_) => ci_failed = true,
        }
    }
    Some(Replication { fit, covered, ci_failed })
}

/// Sample mean, bias and MSE of one slot over the converged replications.
pub fn bias_mse(estimates: &[[f64; 7]], slot: usize, truth: f64) -> (f64, f64, f64) {
    let m = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e[slot]).sum::<f64>() / m;
    let mse = estimates.iter().map(|e| (e[slot] - truth) * (e[slot] - truth)).sum::<f64>() / m;
    (mean, mean - truth, mse)
}

/// Slots reported for a model. The baselines have no atom; EVMM reports its implied tail fraction.
fn reported_slots(kind: ModelKind) -> &'static [usize] {
    match kind {
        ModelKind::Fevimm => &[0, 1, 2, 3, 4, 5, 6],
        ModelKind::Fevmm | ModelKind::Evmm => &[1, 2, 3, 4, 5, 6],
    }
}

/// Simulates every (n, replication) sample, fits each requested model and summarises.
///
/// Cells with more than 20% failed fits are kept but marked aborted.
pub fn run_scenario<R: Runner>(scenario: &Scenario, opts: &FitOptions, runner: &R) -> Result<SimReport> {
    scenario.validate()?;
    let truth = scenario.theta_true.to_array();
    let reps = scenario.replications;
    let jobs = scenario.n_values.len() * reps;
    let fits: Vec<Vec<Option<Replication>>> = runner.run(jobs, |k| {
        let (j, i) = (k / reps, k % reps);
        let spec = SampleSpec {
            n: scenario.n_values[j],
            theta: scenario.theta_true,
            seed: scenario.data_seed(j, i),
        };
        let data = crate::sampler::sample(&spec).and_then(Dataset::new);
        scenario
            .models
            .iter()
            .map(|&kind| {
                let data = data.as_ref().ok()?;
                run_replication(kind, data, &truth, scenario.ci_alpha, opts)
            })
            .collect()
    });

    let mut cells = Vec::new();
    for (j, &n) in scenario.n_values.iter().enumerate() {
        for (mi, &kind) in scenario.models.iter().enumerate() {
            let cell_index = j * scenario.models.len() + mi;
            let runs: Vec<&Replication> = fits[j * reps..(j + 1) * reps]
                .iter()
                .filter_map(|r| r[mi].as_ref())
                .collect();
            cells.push(summarise_cell(scenario, kind, n, &truth, &runs, cell_index, opts, runner));
        }
    }
    Ok(SimReport {
        scenario: scenario.clone(),
        cells,
    })
}

#[allow(clippy::too_many_arguments)]
fn summarise_cell<R: Runner>(
    scenario: &Scenario,
    kind: ModelKind,
    n: usize,
    truth: &[f64; 7],
    runs: &[&Replication],
    cell_index: usize,
    opts: &FitOptions,
    runner: &R,
) -> CellReport {
    let reps = scenario.replications;
    let failed = reps - runs.len();
    let mut cell = CellReport {
        model: kind,
        n,
        replications: reps,
        n_converged: runs.len(),
        aborted: None,
        params: Vec::new(),
        estimates: runs.iter().map(|r| r.fit.estimates()).collect(),
        logliks: runs.iter().map(|r| r.fit.loglik).collect(),
        covered: runs.iter().map(|r| r.covered).collect(),
        ci_failures: runs.iter().filter(|r| r.ci_failed).count(),
        bootstrap_anchor: None,
    };
    if runs.is_empty() || failed as f64 > MAX_FAILURE_RATE * reps as f64 {
        cell.aborted = Some(format!("{failed} of {reps} fits failed to converge"));
        return cell;
    }

    let mut bse = [f64::NAN; 7];
    let mut bci = ([f64::NAN; 7], [f64::NAN; 7]);
    if scenario.bootstrap_b > 0 {
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.sort_by(|&a, &b| cell.logliks[a].total_cmp(&cell.logliks[b]).then(a.cmp(&b)));
        let anchor = order[(order.len() - 1) / 2];
        cell.bootstrap_anchor = Some(anchor);
        let seed = scenario.bootstrap_seed(cell_index);
        match parametric_bootstrap(&runs[anchor].fit.params, n, scenario.bootstrap_b, seed, opts, runner) {
            Ok(b) => {
                bse = b.se;
                bci = (b.ci_lower, b.ci_upper);
            }
            Err(e) => cell.aborted = Some(format!("bootstrap failed: {e}")),
        }
    }

    let m = runs.len() as f64;
    for &slot in reported_slots(kind) {
        let (mean, bias, mse) = bias_mse(&cell.estimates, slot, truth[slot]);
        let coverage_pct = if kind == ModelKind::Fevimm && slot != 3 {
            100.0 * cell.covered.iter().filter(|c| c[slot]).count() as f64 / m
        } else {
            f64::NAN
        };
        cell.params.push(ParamSummary {
            parameter: PARAM_NAMES[slot],
            truth: truth[slot],
            sample_mean: mean,
            bias,
            mse,
            bse: bse[slot],
            bci_lower: bci.0[slot],
            bci_upper: bci.1[slot],
            coverage_pct,
        });
    }
    cell
}

/// The three-model study with bias and MSE curves over `n` in long format.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Comparison {
    pub report: SimReport,
    pub curves: Vec<ReportRow>,
}

pub fn compare_models<R: Runner>(scenario: &Scenario, opts: &FitOptions, runner: &R) -> Result<Comparison> {
    if !ModelKind::ALL.iter().all(|k| scenario.models.contains(k)) {
        return Err(domain("compare_models", "the scenario must request all three models"));
    }
    let report = run_scenario(scenario, opts, runner)?;
    let curves = report
        .rows()
        .into_iter()
        .filter(|r| r.metric == "bias" || r.metric == "mse")
        .collect();
    Ok(Comparison { report, curves })
}

/// Reruns `base` with the atom mass set to each value of `grid`, other parameters fixed.
pub fn sensitivity_phi1<R: Runner>(
    base: &Scenario,
    grid: &[f64],
    opts: &FitOptions,
    runner: &R,
) -> Result<Vec<(f64, SimReport)>> {
    if grid.is_empty() {
        return Err(domain("sensitivity_phi1", "empty grid"));
    }
    let scenarios: Vec<Scenario> = grid
        .iter()
        .map(|&phi1| {
            let mut s = base.clone();
            s.theta_true.phi1 = phi1;
            s.name = format!("{}/phi1={phi1}", base.name);
            s.validate().map(|_| s)
        })
        .collect::<Result<_>>()?;
    scenarios
        .into_iter()
        .zip(grid)
        .map(|(s, &phi1)| Ok((phi1, run_scenario(&s, opts, runner)?)))
        .collect()
}

/// The reference truth `(0.4, 1, 5, 11.5129, 0.2, 5, 0.1)`.
pub fn reference_theta() -> FevimmParams {
    FevimmParams {
        phi1: 0.4,
        eta: 1.0,
        beta: 5.0,
        u: 11.5129,
        xi: 0.2,
        sigma: 5.0,
        phi2: 0.1,
    }
}

/// A small FEVIMM-only scenario around [`reference_theta`].
pub fn reference_scenario(n: usize, replications: usize) -> Scenario {
    Scenario {
        name: String::from("reference"),
        theta_true: reference_theta(),
        n_values: vec![n],
        replications,
        seed: 20_240_601,
        models: vec![ModelKind::Fevimm],
        bootstrap_b: 0,
        ci_alpha: 0.05,
    }
}
