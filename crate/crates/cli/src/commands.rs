//! Subcommand implementations. Each writes its outputs plus a manifest, then
//! reports numerical or bootstrap problems through the returned error so the
//! exit code reflects them even though the files exist.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use twostage::basis::BasisSpec;
use twostage::boot::{summarize, BootstrapProblem, BootstrapResult};
use twostage::data::{MonitorDataset, SubjectDataset};
use twostage::diagnose::{diagnose, CompatibilityReport};
use twostage::exposure::{cv_r2, fit_exposure};
use twostage::mecorrect::{analyze, BetaBias, Interval};
use twostage::parallel::Execution;
use twostage::simgen::fixture::{gen_fixture, FixtureParams, GEO_COVARIATES, HEALTH_COVARIATES};
use twostage::simgen::montecarlo::coverage_table_csv;
use twostage::simgen::{monte_carlo, surface_spline_r2, McOptions, McReport, Scenario, Scenario1D};

use crate::config::{AnalysisConfig, ModelConfig, SimulateConfig};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::{digest_file, Manifest};

pub struct Inputs {
    pub monitors: MonitorDataset,
    pub subjects: SubjectDataset,
}

/// Checks every column the config names against the file headers, then parses.
pub fn load_inputs(cfg: &AnalysisConfig) -> CliResult<Inputs> {
    let mh = io::headers(&cfg.monitors)?;
    let sh = io::headers(&cfg.subjects)?;
    let missing = |headers: &[String], name: &str, what: &str, file: &Path| -> CliResult<()> {
        if headers.iter().any(|h| h == name) {
            Ok(())
        } else {
            Err(CliError::ConfigInvalid(format!(
                "{what} '{name}' is not a column of {}",
                file.display()
            )))
        }
    };
    if let Some(c) = &cfg.cluster_column {
        missing(&mh, c, "cluster column", &cfg.monitors)?;
    }
    for h in &cfg.health_covariates {
        missing(&sh, h, "health covariate", &cfg.subjects)?;
    }
    for m in &cfg.models {
        for c in &m.covariates {
            missing(&mh, c, &format!("model '{}' covariate", m.name), &cfg.monitors)?;
            missing(&sh, c, &format!("model '{}' covariate", m.name), &cfg.subjects)?;
        }
    }
    Ok(Inputs {
        monitors: io::read_monitors(&cfg.monitors, cfg.cluster_column.as_deref())?,
        subjects: io::read_subjects(&cfg.subjects, &cfg.health_covariates, cfg.health_intercept)?,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn finish_manifest(mut m: Manifest, cfg: &AnalysisConfig, outputs: &[String]) -> CliResult<()> {
    m.inputs = vec![digest_file(&cfg.monitors)?, digest_file(&cfg.subjects)?];
    m.outputs = outputs.to_vec();
    io::write_json(&cfg.output.join("manifest.json"), &m)
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub n_failed: usize,
    pub reliable: bool,
    pub se: f64,
    pub ci: Interval,
    /// Present when the bias correction is on and did not blow up.
    pub se_bc: Option<f64>,
    pub ci_bc: Option<Interval>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsSummary {
    pub any_flagged: bool,
    pub flagged_columns: Vec<String>,
    pub flagged_covariates: Vec<String>,
}

impl From<&CompatibilityReport> for DiagnosticsSummary {
    fn from(r: &CompatibilityReport) -> Self {
        Self {
            any_flagged: r.any_flagged(),
            flagged_columns: r.condition1.iter().filter(|c| c.flagged).map(|c| c.column.clone()).collect(),
            flagged_covariates: r.condition2.iter().filter(|c| c.flagged).map(|c| c.covariate.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub name: String,
    pub n_star: usize,
    pub n: usize,
    pub r: usize,
    pub columns: Vec<String>,
    pub cv_r2: Option<f64>,
    pub beta_hat: f64,
    pub se_model: f64,
    pub ci_model: Interval,
    pub bias: BetaBias,
    pub beta_bc: f64,
    pub correction_blowup: bool,
    pub beta_var_cl: f64,
    pub bootstrap: Option<BootstrapSummary>,
    /// The headline estimate and interval under the configured options.
    pub estimate: f64,
    pub ci: Interval,
    pub diagnostics: DiagnosticsSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub bias_correction: bool,
    pub bootstrap_replicates: Option<usize>,
    pub seed: u64,
    pub models: Vec<ModelReport>,
}

impl FitReport {
    /// One row per exposure model, in the layout of the data-analysis table.
    pub fn table_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::from("model,r,cv_r2,beta_hat,se_model,se_boot,beta_bc,se_boot_bc,b_hat,flagged\n");
        for m in &self.models {
            let b = m.bootstrap.as_ref();
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{},{:.6},{},{:.6},{}\n",
                m.name,
                m.r,
                opt(m.cv_r2),
                m.beta_hat,
                m.se_model,
                opt(b.map(|b| b.se)),
                m.beta_bc,
                opt(b.and_then(|b| b.se_bc)),
                m.bias.b_hat,
                m.diagnostics.any_flagged
            ));
        }
        out
    }
}

struct ModelRun {
    report: ModelReport,
    predictions: Vec<f64>,
    uncorrected: Option<BootstrapResult>,
    corrected: Option<BootstrapResult>,
}

fn run_model(inp: &Inputs, cfg: &AnalysisConfig, model: &ModelConfig) -> CliResult<ModelRun> {
    run_model_inner(inp, cfg, model).map_err(|e| match e {
        CliError::Core(source) => CliError::Model {
            model: model.name.clone(),
            source,
        },
        other => other,
    })
}

fn run_model_inner(inp: &Inputs, cfg: &AnalysisConfig, model: &ModelConfig) -> CliResult<ModelRun> {
    let spec: BasisSpec = model.template().instantiate(&inp.monitors)?;
    let fit = fit_exposure(&inp.monitors, &spec)?;
    let res = analyze(&fit, &inp.subjects)?;
    let w_hat = fit.predict_subjects(&inp.subjects)?;
    let cv = cv_r2(&inp.monitors, &spec).ok();
    let diag = diagnose(&inp.monitors, &inp.subjects, &spec, cfg.diagnostics.thresholds())?;
    let bc_on = cfg.bootstrap.bias_correction;

    let (mut uncorrected, mut corrected) = (None, None);
    if cfg.bootstrap.enabled {
        let problem = BootstrapProblem::new(&inp.monitors, &inp.subjects, &spec)?;
        let draws = problem.draws(cfg.bootstrap.replicates, cfg.seed, Execution::default());
        let iv = cfg.bootstrap.interval;
        uncorrected = Some(summarize(&draws, false, res.beta_hat, iv, cfg.seed)?);
        if bc_on && !res.correction_blowup {
            corrected = Some(summarize(&draws, true, res.beta_bc, iv, cfg.seed)?);
        }
    }
    let bootstrap = uncorrected.as_ref().map(|u| BootstrapSummary {
        replicates: u.replicates,
        n_failed: u.n_failed.max(corrected.as_ref().map_or(0, |c| c.n_failed)),
        reliable: u.is_reliable() && corrected.as_ref().is_none_or(|c| c.is_reliable()),
        se: u.se,
        ci: u.ci95,
        se_bc: corrected.as_ref().map(|c| c.se),
        ci_bc: corrected.as_ref().map(|c| c.ci95),
    });
    let (estimate, ci) = match (bc_on && !res.correction_blowup, &uncorrected, &corrected) {
        (true, _, Some(c)) => (res.beta_bc, c.ci95),
        (true, _, None) => (res.beta_bc, Interval::wald(res.beta_bc, res.se_model)),
        (false, Some(u), _) => (res.beta_hat, u.ci95),
        (false, None, _) => (res.beta_hat, Interval::wald(res.beta_hat, res.se_model)),
    };
    let report = ModelReport {
        name: model.name.clone(),
        n_star: inp.monitors.len(),
        n: inp.subjects.len(),
        r: spec.ncols(),
        columns: spec.column_names(),
        cv_r2: cv,
        beta_hat: res.beta_hat,
        se_model: res.se_model,
        ci_model: Interval::wald(res.beta_hat, res.se_model),
        bias: res.bias,
        beta_bc: res.beta_bc,
        correction_blowup: res.correction_blowup,
        beta_var_cl: res.beta_var_cl,
        bootstrap,
        estimate,
        ci,
        diagnostics: (&diag).into(),
    };
    Ok(ModelRun {
        report,
        predictions: w_hat.iter().copied().collect(),
        uncorrected,
        corrected,
    })
}

/// Turns blowups and unreliable bootstraps into the matching exit status.
fn check_runs(runs: &[ModelRun], bias_correction: bool) -> CliResult<()> {
    let blown: Vec<String> = runs
        .iter()
        .filter(|r| bias_correction && r.report.correction_blowup)
        .map(|r| r.report.name.clone())
        .collect();
    if !blown.is_empty() {
        return Err(CliError::CorrectionBlowup(blown));
    }
    for r in runs {
        for b in [&r.uncorrected, &r.corrected].into_iter().flatten() {
            if !b.is_reliable() {
                return Err(CliError::UnreliableBootstrap {
                    model: r.report.name.clone(),
                    failed: b.n_failed,
                    replicates: b.replicates,
                });
            }
        }
    }
    Ok(())
}

pub fn cmd_fit(cfg: &AnalysisConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let inp = load_inputs(cfg)?;
    let manifest = Manifest::new("fit", cfg, cfg.seed, cfg.threads);
    let runs = cfg
        .models
        .iter()
        .map(|m| run_model(&inp, cfg, m))
        .collect::<CliResult<Vec<_>>>()?;
    create_dir(&cfg.output)?;
    let report = FitReport {
        bias_correction: cfg.bootstrap.bias_correction,
        bootstrap_replicates: cfg.bootstrap.enabled.then_some(cfg.bootstrap.replicates),
        seed: cfg.seed,
        models: runs.iter().map(|r| r.report.clone()).collect(),
    };
    let mut outputs = vec!["results.json".to_string(), "table.csv".to_string()];
    io::write_json(&cfg.output.join("results.json"), &report)?;
    io::write_text(&cfg.output.join("table.csv"), &report.table_csv())?;
    for r in &runs {
        let name = format!("predictions_{}.csv", r.report.name);
        io::write_predictions(&cfg.output.join(&name), &inp.subjects.locations, &r.predictions)?;
        outputs.push(name);
    }
    outputs.push("manifest.json".into());
    finish_manifest(manifest, cfg, &outputs)?;
    check_runs(&runs, cfg.bootstrap.bias_correction)?;
    Ok(outputs.iter().map(|o| cfg.output.join(o)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapModelReport {
    pub name: String,
    pub uncorrected: BootstrapResult,
    pub corrected: Option<BootstrapResult>,
}

pub fn cmd_bootstrap(cfg: &AnalysisConfig) -> CliResult<Vec<PathBuf>> {
    if !cfg.bootstrap.enabled {
        return Err(CliError::ConfigInvalid("bootstrap.enabled is false".into()));
    }
    cfg.validate()?;
    let inp = load_inputs(cfg)?;
    let manifest = Manifest::new("bootstrap", cfg, cfg.seed, cfg.threads);
    let runs = cfg
        .models
        .iter()
        .map(|m| run_model(&inp, cfg, m))
        .collect::<CliResult<Vec<_>>>()?;
    create_dir(&cfg.output)?;
    let reports: Vec<BootstrapModelReport> = runs
        .iter()
        .map(|r| BootstrapModelReport {
            name: r.report.name.clone(),
            uncorrected: r.uncorrected.clone().expect("bootstrap enabled"),
            corrected: r.corrected.clone(),
        })
        .collect();
    let mut csv = String::from("model,kind,replicate_beta\n");
    for r in &reports {
        for (kind, res) in [("uncorrected", Some(&r.uncorrected)), ("corrected", r.corrected.as_ref())] {
            for b in res.map(|x| x.replicate_betas.as_slice()).unwrap_or_default() {
                csv.push_str(&format!("{},{kind},{b:?}\n", r.name));
            }
        }
    }
    let outputs = vec!["bootstrap.json".to_string(), "bootstrap.csv".into(), "manifest.json".into()];
    io::write_json(&cfg.output.join("bootstrap.json"), &reports)?;
    io::write_text(&cfg.output.join("bootstrap.csv"), &csv)?;
    finish_manifest(manifest, cfg, &outputs)?;
    check_runs(&runs, cfg.bootstrap.bias_correction)?;
    Ok(outputs.iter().map(|o| cfg.output.join(o)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseModelReport {
    pub name: String,
    pub report: CompatibilityReport,
}

pub fn cmd_diagnose(cfg: &AnalysisConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let inp = load_inputs(cfg)?;
    let manifest = Manifest::new("diagnose", cfg, cfg.seed, cfg.threads);
    let mut reports = Vec::new();
    let mut text = String::new();
    for m in &cfg.models {
        let spec = m.template().instantiate(&inp.monitors)?;
        let report = diagnose(&inp.monitors, &inp.subjects, &spec, cfg.diagnostics.thresholds())?;
        text.push_str(&format!("== model {} ==\n{}\n", m.name, report.to_text()));
        reports.push(DiagnoseModelReport {
            name: m.name.clone(),
            report,
        });
    }
    create_dir(&cfg.output)?;
    let outputs = vec!["diagnostics.json".to_string(), "diagnostics.txt".into(), "manifest.json".into()];
    io::write_json(&cfg.output.join("diagnostics.json"), &reports)?;
    io::write_text(&cfg.output.join("diagnostics.txt"), &text)?;
    finish_manifest(manifest, cfg, &outputs)?;
    Ok(outputs.iter().map(|o| cfg.output.join(o)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRun {
    pub df: usize,
    pub sigma2_eps: f64,
    /// Thin-plate R² of the fixed spatial surface at this df (2D only).
    pub surface_r2: Option<f64>,
    pub report: McReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResults {
    pub scenario: &'static str,
    pub runs: Vec<SimulationRun>,
}

impl SimulationResults {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("df,sigma2_eps,surface_r2,mean_oos_r2,");
        let mut first = true;
        for run in &self.runs {
            let t = run.report.table_csv();
            let mut lines = t.lines();
            let header = lines.next().unwrap_or_default();
            if first {
                out.push_str(header);
                out.push('\n');
                first = false;
            }
            let r2 = run.surface_r2.map(|v| format!("{v:.4}")).unwrap_or_default();
            for l in lines {
                out.push_str(&format!("{},{},{r2},{:.4},{l}\n", run.df, run.sigma2_eps, run.report.mean_oos_r2));
            }
        }
        out
    }

    fn label(&self, run: &SimulationRun) -> String {
        let sigmas = self.runs.iter().map(|r| r.sigma2_eps.to_bits()).collect::<std::collections::HashSet<_>>();
        if sigmas.len() > 1 {
            format!("df{}_eps{}", run.df, run.sigma2_eps)
        } else {
            format!("df{}", run.df)
        }
    }

    pub fn coverage_csv(&self) -> String {
        let labelled: Vec<(String, McReport)> = self.runs.iter().map(|r| (self.label(r), r.report.clone())).collect();
        coverage_table_csv(&labelled)
    }

    pub fn density_csv(&self, bins: usize) -> String {
        let mut out = String::from("run,");
        for (k, run) in self.runs.iter().enumerate() {
            let t = run.report.density_csv(bins);
            let mut lines = t.lines();
            let header = lines.next().unwrap_or_default();
            if k == 0 {
                out.push_str(header);
                out.push('\n');
            }
            let label = self.label(run);
            for l in lines {
                out.push_str(&format!("{label},{l}\n"));
            }
        }
        out
    }
}

pub fn run_simulation(cfg: &SimulateConfig) -> CliResult<SimulationResults> {
    cfg.validate()?;
    let opts = McOptions {
        replicates: cfg.replicates,
        bootstrap_reps: cfg.bootstrap_reps,
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        execution: Execution::default(),
        oracle_exposure: cfg.oracle_exposure,
        cv_r2: cfg.cv_r2,
    };
    let mut runs = Vec::new();
    if let Some(base) = &cfg.scenario1d {
        let dfs = if cfg.df.is_empty() { vec![base.df] } else { cfg.df.clone() };
        let sigmas = if cfg.sigma2_eps.is_empty() { vec![base.sigma2_eps] } else { cfg.sigma2_eps.clone() };
        for &s in &sigmas {
            for &df in &dfs {
                let p = Scenario1D { df, sigma2_eps: s, ..base.clone() };
                let report = monte_carlo(&Scenario::OneD(p), &opts)?;
                runs.push(SimulationRun { df, sigma2_eps: s, surface_r2: None, report });
            }
        }
        return Ok(SimulationResults { scenario: "1d", runs });
    }
    let base = cfg.scenario2d.as_ref().expect("validated");
    let surface = Arc::new(base.surface()?);
    let dfs = if cfg.df.is_empty() { vec![base.df] } else { cfg.df.clone() };
    let sigmas = if cfg.sigma2_eps.is_empty() { vec![base.sigma2_eps] } else { cfg.sigma2_eps.clone() };
    for &s in &sigmas {
        for &df in &dfs {
            let p = twostage::simgen::Scenario2D { df, sigma2_eps: s, ..base.clone() };
            let r2 = surface_spline_r2(&surface.phi1, df).ok();
            let report = monte_carlo(&Scenario::TwoD(p, surface.clone()), &opts)?;
            runs.push(SimulationRun { df, sigma2_eps: s, surface_r2: r2, report });
        }
    }
    Ok(SimulationResults { scenario: "2d", runs })
}

pub fn cmd_simulate(cfg: &SimulateConfig) -> CliResult<Vec<PathBuf>> {
    let manifest = Manifest::new("simulate", cfg, cfg.seed, cfg.threads);
    let results = run_simulation(cfg)?;
    create_dir(&cfg.output)?;
    let outputs = vec![
        "results.json".to_string(),
        "table.csv".into(),
        "coverage.csv".into(),
        "density.csv".into(),
        "manifest.json".into(),
    ];
    io::write_json(&cfg.output.join("results.json"), &results)?;
    io::write_text(&cfg.output.join("table.csv"), &results.table_csv())?;
    io::write_text(&cfg.output.join("coverage.csv"), &results.coverage_csv())?;
    io::write_text(&cfg.output.join("density.csv"), &results.density_csv(cfg.density_bins))?;
    let mut m = manifest;
    m.outputs = outputs.clone();
    io::write_json(&cfg.output.join("manifest.json"), &m)?;
    Ok(outputs.iter().map(|o| cfg.output.join(o)).collect())
}

/// Writes the synthetic cohort and a ready-to-run config with three models:
/// covariates only, and covariates plus 5-df and 10-df thin-plate splines.
pub fn cmd_fixture(dir: &Path, seed: u64) -> CliResult<Vec<PathBuf>> {
    create_dir(dir)?;
    let f = gen_fixture(&FixtureParams::default(), seed)?;
    io::write_monitors(&dir.join("monitors.csv"), &f.monitors)?;
    io::write_subjects(&dir.join("subjects.csv"), &f.subjects)?;
    let quote = |v: &[&str]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
    let covs = quote(&GEO_COVARIATES);
    let mut config = format!(
        "monitors = \"monitors.csv\"\nsubjects = \"subjects.csv\"\ncluster_column = \"cluster\"\n\
         health_covariates = [{}]\noutput = \"out\"\nseed = {seed}\n\n[bootstrap]\nreplicates = 200\n",
        quote(&HEALTH_COVARIATES)
    );
    for (name, spline, df) in [("lur", "none", 0), ("tps5", "thinplate2d", 5), ("tps10", "thinplate2d", 10)] {
        config.push_str(&format!(
            "\n[[model]]\nname = \"{name}\"\ncovariates = [{covs}]\nspline = \"{spline}\"\ndf = {df}\n"
        ));
    }
    io::write_text(&dir.join("config.toml"), &config)?;
    Ok(["monitors.csv", "subjects.csv", "config.toml"].iter().map(|f| dir.join(f)).collect())
}
