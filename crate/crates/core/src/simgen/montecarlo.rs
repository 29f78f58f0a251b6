//! Monte Carlo evaluation of the uncorrected, bootstrap and bias-corrected
//! estimators over repeated scenario draws.
//!
//! Relative bias is computed from the conditional mean of each estimator
//! given everything except the health noise ε: for the linear second stage
//! that is the same regression applied to the noise-free outcome. It removes
//! ε from the Monte Carlo error entirely, so it does not depend on σ²_ε.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::scenario1d::{gen_scenario_1d, Scenario1D};
use super::scenario2d::{gen_scenario_2d, Scenario2D, Surface};
use super::ScenarioDraw;
use crate::basis::BasisTemplate;
use crate::boot::{sample_sd, BootstrapProblem};
use crate::error::{Error, Result};
use crate::exposure::cv_r2_with;
use crate::mecorrect::{correct, exposure_moments, fit_health_design, residualize, Interval, SubjectSide};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{derive_seed, TAG_BOOTSTRAP, TAG_REPLICATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// β̂ with the model-based SE.
    None,
    /// β̂ with the bootstrap SE.
    BootOnly,
    /// β̂/(1+b̂) with the model-based SE.
    BiasOnly,
    /// β̂/(1+b̂) with the bootstrap SE of the corrected replicates.
    #[serde(rename = "bias+boot", alias = "bias_boot")]
    BiasBoot,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::BootOnly, Method::BiasOnly, Method::BiasBoot];

    pub fn label(&self) -> &'static str {
        match self {
            Method::None => "no correction",
            Method::BootOnly => "bootstrap standard error only",
            Method::BiasOnly => "bias correction only",
            Method::BiasBoot => "bias correction + bootstrap",
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::BootOnly => "boot_only",
            Method::BiasOnly => "bias_only",
            Method::BiasBoot => "bias+boot",
        }
    }

    fn bootstrap(&self) -> bool {
        matches!(self, Method::BootOnly | Method::BiasBoot)
    }

    fn corrected(&self) -> bool {
        matches!(self, Method::BiasOnly | Method::BiasBoot)
    }
}

#[derive(Debug, Clone)]
pub enum Scenario {
    OneD(Scenario1D),
    /// The surface is fixed across replicates.
    TwoD(Scenario2D, Arc<Surface>),
}

impl Scenario {
    pub fn two_d(params: Scenario2D) -> Result<Self> {
        let surface = params.surface()?;
        Ok(Scenario::TwoD(params, Arc::new(surface)))
    }

    pub fn draw(&self, seed: u64) -> Result<ScenarioDraw> {
        match self {
            Scenario::OneD(p) => gen_scenario_1d(p, seed),
            Scenario::TwoD(p, s) => gen_scenario_2d(p, s, seed),
        }
    }

    pub fn basis_template(&self) -> BasisTemplate {
        match self {
            Scenario::OneD(p) => p.basis_template(),
            Scenario::TwoD(p, _) => p.basis_template(),
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Scenario::OneD(p) => p.beta,
            Scenario::TwoD(p, _) => p.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub replicates: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub execution: Execution,
    /// Regress on the true exposure instead of a first-stage prediction.
    #[serde(default)]
    pub oracle_exposure: bool,
    /// Also compute leave-one-unit-out CV R² per replicate.
    #[serde(default)]
    pub cv_r2: bool,
}

impl McOptions {
    pub fn new(replicates: usize, bootstrap_reps: usize, seed: u64, methods: &[Method]) -> Self {
        Self {
            replicates,
            bootstrap_reps,
            seed,
            methods: methods.to_vec(),
            execution: Execution::default(),
            oracle_exposure: false,
            cv_r2: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    /// Conditional-mean relative bias, E[estimate | exposure side]/β − 1.
    pub relative_bias: f64,
    pub relative_bias_se: f64,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    /// Monte Carlo SE of `mean_estimate`.
    pub mc_se: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub n_used: usize,
    pub n_failed: usize,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<MethodRow>,
    pub replicates: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub beta: f64,
    pub mean_oos_r2: f64,
    pub mean_cv_r2: Option<f64>,
    /// Replicates whose full-sample fit failed outright.
    pub n_failed_fits: usize,
}

impl McReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// One line per method in the column order of the simulation table.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("method,rel_bias,sd,mean_se,coverage,mean_estimate,mc_se,n_used,n_failed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.4},{:.6},{:.6},{},{}",
                r.method.key(),
                r.relative_bias,
                r.sd_estimate,
                r.mean_se,
                r.coverage,
                r.mean_estimate,
                r.mc_se,
                r.n_used,
                r.n_failed
            );
        }
        out
    }

    /// Histogram of the estimates of each method on a shared set of bins.
    pub fn density_csv(&self, bins: usize) -> String {
        let all = self.rows.iter().flat_map(|r| r.estimates.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let mut out = String::from("method,bin_lower,bin_upper,density\n");
        if !(hi > lo) || bins == 0 {
            return out;
        }
        let width = (hi - lo) / bins as f64;
        for r in &self.rows {
            let mut counts = vec![0usize; bins];
            for &v in &r.estimates {
                let k = (((v - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
            for (k, c) in counts.iter().enumerate() {
                let d = *c as f64 / (r.estimates.len().max(1) as f64 * width);
                let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", r.method.key(), lo + k as f64 * width, lo + (k + 1) as f64 * width, d);
            }
        }
        out
    }
}

/// Coverage of each method across several runs (e.g. a df sweep).
pub fn coverage_table_csv(runs: &[(String, McReport)]) -> String {
    let mut out = String::from("method");
    for (label, _) in runs {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| runs.iter().any(|(_, r)| r.row(*m).is_some()))
        .collect();
    for m in methods {
        out.push_str(m.key());
        for (_, r) in runs {
            match r.row(m) {
                Some(row) => {
                    let _ = write!(out, ",{:.4}", row.coverage);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct MethodOutcome {
    estimate: f64,
    conditional: f64,
    se: f64,
    covered: bool,
}

#[derive(Debug, Clone, Default)]
struct ReplicateOutcome {
    methods: Vec<Option<MethodOutcome>>,
    oos_r2: Option<f64>,
    cv_r2: Option<f64>,
    failed: bool,
}

fn run_replicate(scenario: &Scenario, opts: &McOptions, m: usize) -> Result<ReplicateOutcome> {
    let seed = derive_seed(opts.seed, &[TAG_REPLICATE, m as u64]);
    let draw = scenario.draw(seed)?;
    let beta = scenario.beta();
    let z = draw.subjects.health_design()?;
    let y = draw.subjects.outcome_vector();
    let y_signal = DVector::from_column_slice(&draw.truth.y_signal);

    if opts.oracle_exposure {
        let x = DVector::from_column_slice(&draw.truth.x_subjects);
        let hf = fit_health_design(&x, &z, &y)?;
        let cond = fit_health_design(&x, &z, &y_signal)?.beta_hat;
        let out = MethodOutcome {
            estimate: hf.beta_hat,
            conditional: cond,
            se: hf.se_model,
            covered: Interval::wald(hf.beta_hat, hf.se_model).contains(beta),
        };
        return Ok(ReplicateOutcome {
            methods: opts.methods.iter().map(|meth| (*meth == Method::None).then_some(out)).collect(),
            ..Default::default()
        });
    }

    let spec = scenario.basis_template().instantiate(&draw.monitors)?;
    let problem = BootstrapProblem::new(&draw.monitors, &draw.subjects, &spec)?;
    let ids = draw.monitors.clusters.clone();
    let mom = exposure_moments(&problem.monitor_design, &problem.monitor_response, ids.as_deref())?;
    let side = SubjectSide::new(&problem.subject_design, &z, &y)?;
    let slope = side.slope(&mom.gamma_hat)?;
    let cond = side.slope_for(&mom.gamma_hat, &residualize(&z, &y_signal)?)?.beta_hat;
    let bias = side.beta_bias(&mom.gamma_hat, &mom.gamma_cov, &mom.delta)?;
    let bc = correct(slope.beta_hat, &bias).ok();

    let w_hat = &problem.subject_design * &mom.gamma_hat;
    let x = DVector::from_column_slice(&draw.truth.x_subjects);
    let mse = (&x - &w_hat).norm_squared() / x.len() as f64;
    let xm = x.mean();
    let var = x.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / x.len() as f64;
    let oos_r2 = Some(1.0 - mse / var);
    let cv_r2 = if opts.cv_r2 {
        cv_r2_with(&draw.monitors, &spec, Execution::Serial).ok()
    } else {
        None
    };

    let need_boot = opts.methods.iter().any(|m| m.bootstrap());
    let (se_boot, se_boot_bc) = if need_boot {
        let draws = problem.draws(opts.bootstrap_reps, derive_seed(seed, &[TAG_BOOTSTRAP]), Execution::Serial);
        let unc: Vec<f64> = draws.iter().filter_map(|d| d.uncorrected).collect();
        let cor: Vec<f64> = draws.iter().filter_map(|d| d.corrected).collect();
        (
            (unc.len() >= 2).then(|| sample_sd(&unc)),
            (cor.len() >= 2).then(|| sample_sd(&cor)),
        )
    } else {
        (None, None)
    };

    let methods = opts
        .methods
        .iter()
        .map(|meth| {
            let (estimate, conditional) = if meth.corrected() {
                (bc?, cond / (1.0 + bias.b_hat))
            } else {
                (slope.beta_hat, cond)
            };
            let se = match meth {
                Method::None | Method::BiasOnly => slope.se_model,
                Method::BootOnly => se_boot?,
                Method::BiasBoot => se_boot_bc?,
            };
            Some(MethodOutcome {
                estimate,
                conditional,
                se,
                covered: Interval::wald(estimate, se).contains(beta),
            })
        })
        .collect();
    Ok(ReplicateOutcome {
        methods,
        oos_r2,
        cv_r2,
        failed: false,
    })
}

pub fn monte_carlo(scenario: &Scenario, opts: &McOptions) -> Result<McReport> {
    if opts.replicates == 0 || opts.methods.is_empty() {
        return Err(Error::InvalidParameter("Monte Carlo needs replicates and at least one method".into()));
    }
    if opts.methods.iter().any(|m| m.bootstrap()) && opts.bootstrap_reps < 2 {
        return Err(Error::InvalidParameter("bootstrap methods need bootstrap_reps >= 2".into()));
    }
    let outcomes = map_indexed(opts.replicates, opts.execution, |m| {
        run_replicate(scenario, opts, m).unwrap_or_else(|_| ReplicateOutcome {
            methods: vec![None; opts.methods.len()],
            failed: true,
            ..Default::default()
        })
    });
    let beta = scenario.beta();
    let rows = opts
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let used: Vec<MethodOutcome> = outcomes.iter().filter_map(|o| o.methods[k]).collect();
            let n = used.len();
            let estimates: Vec<f64> = used.iter().map(|u| u.estimate).collect();
            let conditional: Vec<f64> = used.iter().map(|u| u.conditional).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let sd = sample_sd(&estimates);
            MethodRow {
                method,
                relative_bias: mean(&conditional) / beta - 1.0,
                relative_bias_se: sample_sd(&conditional) / (n as f64).sqrt() / beta.abs(),
                mean_estimate: mean(&estimates),
                sd_estimate: sd,
                mc_se: sd / (n as f64).sqrt(),
                mean_se: mean(&used.iter().map(|u| u.se).collect::<Vec<_>>()),
                coverage: used.iter().filter(|u| u.covered).count() as f64 / n.max(1) as f64,
                n_used: n,
                n_failed: outcomes.len() - n,
                estimates,
            }
        })
        .collect();
    let r2: Vec<f64> = outcomes.iter().filter_map(|o| o.oos_r2).collect();
    let cv: Vec<f64> = outcomes.iter().filter_map(|o| o.cv_r2).collect();
    Ok(McReport {
        rows,
        replicates: opts.replicates,
        bootstrap_reps: opts.bootstrap_reps,
        seed: opts.seed,
        beta,
        mean_oos_r2: if r2.is_empty() { f64::NAN } else { r2.iter().sum::<f64>() / r2.len() as f64 },
        mean_cv_r2: (!cv.is_empty()).then(|| cv.iter().sum::<f64>() / cv.len() as f64),
        n_failed_fits: outcomes.iter().filter(|o| o.failed).count(),
    })
}
