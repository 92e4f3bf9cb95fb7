use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use evinlier_core::diagnostics::{
    bootstrap_pvalue, mean_excess_curve, pickands_estimator, return_level_bands, return_levels, stability_curve,
    DiagnosticCurve, GofReport,
};
use evinlier_core::estimation::{fit_model, fit_profile};
use evinlier_core::harness::{run_scenario, sensitivity_phi1, CellReport, SimReport};
use evinlier_core::model::PARAM_NAMES;
use evinlier_core::sampler::{sample, SampleSpec};
use evinlier_core::{empirical_quantile, Dataset, FevimmParams, FitOptions, FitResult, ModelKind, ModelParams};
use serde::Serialize;

use crate::data::{csv_err, csv_writer, fmt_f64, read_values, write_values};
use crate::error::{CliError, CliResult};
use crate::json::to_canonical;
use crate::report::FitReport;
use crate::runner::ThreadRunner;
use crate::scenario::load_bench;

#[derive(Debug, Parser)]
#[command(name = "evinlier", version, about = "Zero-inflated extreme value mixture models")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores. Output does not depend on it.
    #[arg(long, global = true, env = "EVINLIER_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample and write it as a one-column CSV.
    Simulate(SimulateArgs),
    /// Maximum likelihood fit; writes a JSON report.
    Fit(FitArgs),
    /// Goodness-of-fit statistics with parametric bootstrap p-values.
    Gof(GofArgs),
    /// Mean excess, parameter stability and Pickands curves as CSV.
    Diagnose(DiagnoseArgs),
    /// Return levels of a FEVIMM fit, optionally with bootstrap bands.
    ReturnLevels(ReturnLevelArgs),
    /// Run a simulation study from a scenario file.
    Bench(BenchArgs),
}

/// Model parameters; defaults are (0.4, 1, 5, 11.5129, 0.2, 5, 0.1).
#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long, default_value_t = 0.4, allow_negative_numbers = true)]
    pub phi1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 11.5129, allow_negative_numbers = true)]
    pub u: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub xi: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub phi2: f64,
    /// JSON or TOML file with the seven parameters; overrides the flags.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

impl ThetaArgs {
    fn theta(&self) -> CliResult<FevimmParams> {
        let t = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
                } else {
                    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
                }
            }
            None => FevimmParams {
                phi1: self.phi1,
                eta: self.eta,
                beta: self.beta,
                u: self.u,
                xi: self.xi,
                sigma: self.sigma,
                phi2: self.phi2,
            },
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV; standard output when absent (the summary then goes to stderr).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub theta: ThetaArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Fevimm,
    Fevmm,
    Evmm,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Fevimm => ModelKind::Fevimm,
            ModelArg::Fevmm => ModelKind::Fevmm,
            ModelArg::Evmm => ModelKind::Evmm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Full,
    Profile,
}

#[derive(Debug, Args)]
pub struct FitControl {
    /// Jittered restarts per fit.
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    /// Seed of the restart jitter.
    #[arg(long = "fit-seed", default_value_t = 0x5eed)]
    pub fit_seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
}

impl FitControl {
    fn options(&self) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            seed: self.fit_seed,
            max_iter: self.max_iter,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Fevimm)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Full)]
    pub method: MethodArg,
    /// Candidate thresholds for the profile method; empirical quantiles
    /// 0.80, 0.81, ..., 0.95 when absent.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Level of the Wald intervals.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub control: FitControl,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Fevimm)]
    pub model: ModelArg,
    /// Reuse this fit report instead of refitting.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Bootstrap replicates (at least 100).
    #[arg(long = "b", default_value_t = 500)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub control: FitControl,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the curve CSVs.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Drop the zeros before computing the curves.
    #[arg(long)]
    pub exclude_zeros: bool,
    /// Thresholds for the mean excess and stability curves; empirical
    /// quantiles 0.50, 0.55, ..., 0.95 when absent.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Order statistics k for the Pickands estimator; n/64, n/32, n/16, n/8 when absent.
    #[arg(long, value_delimiter = ',')]
    pub pickands_k: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ReturnLevelArgs {
    /// FEVIMM fit report written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20,50,100,200")]
    pub periods: Vec<f64>,
    /// Bootstrap replicates for the bands; 0 skips them.
    #[arg(long = "b", default_value_t = 0)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub control: FitControl,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario file (.toml or .json).
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let runner = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => ThreadRunner::new(t),
        None => ThreadRunner::available(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
        Command::Gof(a) => gof(&a, &runner),
        Command::Diagnose(a) => diagnose(&a),
        Command::ReturnLevels(a) => return_level_cmd(&a, &runner),
        Command::Bench(a) => bench(&a, &runner),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::new(read_values(path)?)?)
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let theta = a.theta.theta()?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let xs = sample(&SampleSpec {
        n: a.n,
        theta,
        seed: a.seed,
    })?;
    let zeros = xs.iter().filter(|&&x| x == 0.0).count();
    let max = xs.iter().copied().fold(0.0, f64::max);
    let summary = format!("n={} zeros={} max={}", xs.len(), zeros, fmt_f64(max));
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            write_values(std::io::BufWriter::new(f), &xs)?;
            println!("{summary}");
        }
        None => {
            write_values(std::io::stdout().lock(), &xs)?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn default_profile_grid(data: &Dataset) -> Vec<f64> {
    let mut g: Vec<f64> = (80..=95).map(|p| empirical_quantile(data.sorted(), p as f64 / 100.0)).collect();
    g.dedup();
    g
}

fn fit_data(data: &Dataset, kind: ModelKind, method: MethodArg, grid: Option<&[f64]>, opts: &FitOptions) -> CliResult<FitResult> {
    match method {
        MethodArg::Full => Ok(fit_model(kind, data, None, opts)?),
        MethodArg::Profile => {
            if kind != ModelKind::Fevimm {
                return Err(CliError::Usage("the profile method is available for fevimm only".into()));
            }
            let grid = grid.map_or_else(|| default_profile_grid(data), <[f64]>::to_vec);
            Ok(fit_profile(data, &grid, opts)?)
        }
    }
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let data = load_data(&a.input)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    let f = fit_data(&data, a.model.into(), a.method, a.grid.as_deref(), &a.control.options())?;
    let report = FitReport::new(&f, &data, a.alpha);
    emit(a.out.as_deref(), &to_canonical(&report)?)?;
    if !f.converged {
        return Err(CliError::Numerical(format!(
            "{} fit did not converge after {} iterations (report written)",
            f.model(),
            f.iterations
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct GofOutput {
    model: ModelKind,
    n: usize,
    #[serde(flatten)]
    report: GofReport,
}

fn gof(a: &GofArgs, runner: &ThreadRunner) -> CliResult<()> {
    if a.b < 100 {
        return Err(CliError::Usage(format!("--b must be at least 100, got {}", a.b)));
    }
    let data = load_data(&a.input)?;
    let opts = a.control.options();
    let f = match &a.fit {
        Some(p) => read_fit_report(p)?.to_fit_result()?,
        None => fit_data(&data, a.model.into(), MethodArg::Full, None, &opts)?,
    };
    if !f.converged {
        return Err(CliError::Numerical(format!("{} fit did not converge", f.model())));
    }
    let report = bootstrap_pvalue(&data, &f, a.b, a.seed, &opts, runner)?;
    let out = GofOutput {
        model: f.model(),
        n: data.n(),
        report,
    };
    emit(a.out.as_deref(), &to_canonical(&out)?)
}

fn read_fit_report(path: &Path) -> CliResult<FitReport> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn default_thresholds(data: &Dataset) -> Vec<f64> {
    let mut t: Vec<f64> = (10..=19).map(|i| empirical_quantile(data.sorted(), i as f64 * 0.05)).collect();
    t.dedup();
    t
}

fn default_pickands_k(n: usize) -> Vec<usize> {
    let mut k: Vec<usize> = [64, 32, 16, 8].iter().map(|d| n / d).filter(|&k| k >= 1).collect();
    k.dedup();
    k
}

fn write_curve(dir: &Path, file: &str, column: &str, c: &DiagnosticCurve) -> CliResult<()> {
    let mut w = csv_writer(&dir.join(file))?;
    w.write_record([column, "estimate", "ci_lower", "ci_upper"]).map_err(csv_err)?;
    for i in 0..c.len() {
        let band = |b: &Option<Vec<f64>>| b.as_ref().map_or_else(String::new, |v| fmt_f64(v[i]));
        w.write_record([
            fmt_f64(c.abscissa[i]),
            fmt_f64(c.ordinate[i]),
            band(&c.ci_lower),
            band(&c.ci_upper),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let mut data = load_data(&a.input)?;
    if a.exclude_zeros {
        data = data.without_zeros()?;
    }
    let thresholds = a.thresholds.clone().unwrap_or_else(|| default_thresholds(&data));
    let ks: Vec<usize> = match &a.pickands_k {
        Some(k) => k.clone(),
        None => default_pickands_k(data.n()),
    };
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || 4 * k > data.n()) {
        return Err(CliError::Usage(format!("Pickands k = {k} needs 1 <= k and 4k <= n = {}", data.n())));
    }
    fs::create_dir_all(&a.out_dir)?;
    let me = mean_excess_curve(&data, &thresholds)?;
    let (sig, xi) = stability_curve(&data, &thresholds)?;
    let pk = if ks.is_empty() {
        None
    } else {
        Some(pickands_estimator(&data, &ks)?)
    };

    let mut curves: Vec<(&str, &str, &DiagnosticCurve)> = vec![
        ("mean_excess.csv", "threshold", &me),
        ("stability_sigma.csv", "threshold", &sig),
        ("stability_xi.csv", "threshold", &xi),
    ];
    if let Some(p) = &pk {
        curves.push(("pickands.csv", "k", p));
    }
    let mut omitted = csv_writer(&a.out_dir.join("omitted.csv"))?;
    omitted.write_record(["curve", "abscissa", "reason"]).map_err(csv_err)?;
    for (file, column, c) in &curves {
        write_curve(&a.out_dir, file, column, c)?;
        for (x, why) in &c.omitted {
            omitted
                .write_record([c.kind.name(), &fmt_f64(*x), why])
                .map_err(csv_err)?;
        }
        println!("{}: {} points, {} omitted", c.kind.name(), c.len(), c.omitted.len());
    }
    omitted.flush()?;
    if curves.iter().all(|(_, _, c)| c.is_empty()) {
        return Err(CliError::Numerical(
            "every curve is empty: no grid point has enough exceedances (see omitted.csv)".into(),
        ));
    }
    Ok(())
}

fn return_level_cmd(a: &ReturnLevelArgs, runner: &ThreadRunner) -> CliResult<()> {
    let report = read_fit_report(&a.fit)?;
    let f = report.to_fit_result()?;
    let ModelParams::Fevimm(theta) = f.params else {
        return Err(CliError::Usage(format!("return levels need a FEVIMM fit, got {}", f.model())));
    };
    if a.b != 0 && a.b < 100 {
        return Err(CliError::Usage(format!("--b must be 0 or at least 100, got {}", a.b)));
    }
    let mut curve = return_levels(&theta, &a.periods)?;
    if a.b > 0 {
        return_level_bands(&mut curve, &f, a.b, a.seed, &a.control.options(), runner)?;
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(["period", "level", "ci_lower", "ci_upper", "at_atom"]).map_err(csv_err)?;
        for i in 0..curve.periods.len() {
            let band = |b: &Option<Vec<f64>>| b.as_ref().map_or_else(String::new, |v| fmt_f64(v[i]));
            w.write_record([
                fmt_f64(curve.periods[i]),
                fmt_f64(curve.levels[i]),
                band(&curve.ci_lower),
                band(&curve.ci_upper),
                curve.at_atom[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn write_rows(w: &mut csv::Writer<fs::File>, prefix: &[String], report: &SimReport) -> CliResult<()> {
    for r in report.rows() {
        let mut rec = prefix.to_vec();
        rec.extend([
            r.model.name().to_string(),
            r.n.to_string(),
            r.parameter.to_string(),
            r.metric.to_string(),
            fmt_f64(r.value),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    Ok(())
}

fn write_estimates(dir: &Path, tag: &str, c: &CellReport) -> CliResult<()> {
    let name = format!("estimates_{}{}_n{}.csv", tag, c.model.name().to_lowercase(), c.n);
    let mut w = csv_writer(&dir.join(name))?;
    let mut header = vec!["replication"];
    header.extend(PARAM_NAMES);
    header.push("loglik");
    w.write_record(&header).map_err(csv_err)?;
    for (i, e) in c.estimates.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(e.iter().map(|&v| fmt_f64(v)));
        rec.push(fmt_f64(c.logliks[i]));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn summarise(label: &str, report: &SimReport) -> Vec<String> {
    let mut flagged = Vec::new();
    for c in &report.cells {
        println!(
            "{label}{} n={}: {}/{} converged",
            c.model, c.n, c.n_converged, c.replications
        );
        if let Some(why) = &c.aborted {
            flagged.push(format!("{label}{} n={}: {why}", c.model, c.n));
        }
    }
    flagged
}

fn bench(a: &BenchArgs, runner: &ThreadRunner) -> CliResult<()> {
    let file = load_bench(&a.scenario)?;
    let mut opts = FitOptions::default();
    if let Some(r) = file.restarts {
        opts.restarts = r;
    }
    fs::create_dir_all(&a.out_dir)?;
    let mut csv = csv_writer(&a.out_dir.join("report.csv"))?;
    let mut flagged = Vec::new();
    match &file.phi1_grid {
        None => {
            let report = run_scenario(&file.scenario, &opts, runner)?;
            csv.write_record(["model", "n", "parameter", "metric", "value"]).map_err(csv_err)?;
            write_rows(&mut csv, &[], &report)?;
            for c in &report.cells {
                write_estimates(&a.out_dir, "", c)?;
            }
            fs::write(a.out_dir.join("report.json"), to_canonical(&report)?)?;
            flagged.extend(summarise("", &report));
        }
        Some(grid) => {
            let family = sensitivity_phi1(&file.scenario, grid, &opts, runner)?;
            csv.write_record(["phi1", "model", "n", "parameter", "metric", "value"]).map_err(csv_err)?;
            for (phi1, report) in &family {
                write_rows(&mut csv, &[fmt_f64(*phi1)], report)?;
                for c in &report.cells {
                    write_estimates(&a.out_dir, &format!("phi1_{}_", fmt_f64(*phi1)), c)?;
                }
                flagged.extend(summarise(&format!("phi1={} ", fmt_f64(*phi1)), report));
            }
            let reports: Vec<&SimReport> = family.iter().map(|(_, r)| r).collect();
            fs::write(a.out_dir.join("report.json"), to_canonical(&reports)?)?;
        }
    }
    csv.flush()?;
    if flagged.is_empty() {
        println!("no flagged cells");
    } else {
        println!("flagged cells:");
        for f in &flagged {
            println!("  {f}");
        }
    }
    Ok(())
}
