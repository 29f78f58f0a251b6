//! Design-based nonparametric bootstrap: monitors (or monitor clusters) and
//! subjects are resampled independently, the exposure model is refit on the
//! frozen basis, and the health effect is re-estimated.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{monitor_design, subject_design, BasisSpec};
use crate::data::{MonitorDataset, SubjectDataset};
use crate::error::{Error, Result};
use crate::mecorrect::{correct, exposure_moments, Interval, SubjectSide};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{stream, TAG_BOOTSTRAP};

pub const MIN_REPLICATES: usize = 50;
/// Results with a larger share of failed replicates are flagged unreliable.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    #[default]
    Wald,
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub bias_correct: bool,
    pub seed: u64,
    pub execution: Execution,
    pub interval: IntervalKind,
}

impl BootstrapOptions {
    pub fn new(replicates: usize, bias_correct: bool, seed: u64) -> Self {
        Self {
            replicates,
            bias_correct,
            seed,
            execution: Execution::default(),
            interval: IntervalKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Successful replicate estimates in replicate order.
    pub replicate_betas: Vec<f64>,
    pub se: f64,
    pub ci95: Interval,
    pub n_failed: usize,
    pub replicates: usize,
    pub bias_corrected: bool,
    pub seed: u64,
    /// The full-sample estimate the interval is centred on.
    pub estimate: f64,
    pub interval: IntervalKind,
}

impl BootstrapResult {
    pub fn failure_rate(&self) -> f64 {
        self.n_failed as f64 / self.replicates as f64
    }

    pub fn is_reliable(&self) -> bool {
        self.failure_rate() <= MAX_FAILURE_RATE
    }
}

/// One bootstrap replicate; `None` marks a failed refit or correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateDraw {
    pub uncorrected: Option<f64>,
    pub corrected: Option<f64>,
}

/// Everything a replicate needs, evaluated once on the frozen basis.
#[derive(Debug, Clone)]
pub struct BootstrapProblem {
    pub monitor_design: DMatrix<f64>,
    pub monitor_response: DVector<f64>,
    pub units: Vec<Vec<usize>>,
    pub clustered: bool,
    pub subject_design: DMatrix<f64>,
    pub health_design: DMatrix<f64>,
    pub outcome: DVector<f64>,
}

/// Point estimates on one (possibly resampled) dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageEstimate {
    pub beta_hat: f64,
    pub se_model: f64,
    pub b_hat: f64,
    pub beta_bc: Option<f64>,
}

impl BootstrapProblem {
    pub fn new(monitors: &MonitorDataset, subjects: &SubjectDataset, spec: &BasisSpec) -> Result<Self> {
        Ok(Self {
            monitor_design: monitor_design(spec, monitors)?.values,
            monitor_response: DVector::from_column_slice(&monitors.values),
            units: monitors.units(),
            clustered: monitors.clusters.is_some(),
            subject_design: subject_design(spec, subjects)?.values,
            health_design: subjects.health_design()?,
            outcome: subjects.outcome_vector(),
        })
    }

    fn cluster_ids(&self) -> Option<Vec<usize>> {
        self.clustered.then(|| {
            let mut ids = vec![0; self.monitor_design.nrows()];
            for (u, rows) in self.units.iter().enumerate() {
                for &i in rows {
                    ids[i] = u;
                }
            }
            ids
        })
    }

    pub fn estimate(&self) -> Result<StageEstimate> {
        let ids = self.cluster_ids();
        let side = SubjectSide::new(&self.subject_design, &self.health_design, &self.outcome)?;
        stage(&self.monitor_design, &self.monitor_response, ids.as_deref(), &side)
    }

    /// Replicate `index` of the stream keyed by `seed`.
    pub fn replicate(&self, seed: u64, index: usize) -> ReplicateDraw {
        let mut rng = stream(seed, &[TAG_BOOTSTRAP, index as u64]);
        let k = self.units.len();
        let mut rows = Vec::with_capacity(self.monitor_design.nrows());
        let mut ids = Vec::with_capacity(self.monitor_design.nrows());
        for draw in 0..k {
            let u = rng.random_range(0..k);
            for &i in &self.units[u] {
                rows.push(i);
                // every drawn cluster is a fresh unit, even when repeated
                ids.push(draw);
            }
        }
        let n = self.outcome.len();
        let subj: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();

        let rm = self.monitor_design.select_rows(&rows);
        let x = self.monitor_response.select_rows(&rows);
        let rs = self.subject_design.select_rows(&subj);
        let z = self.health_design.select_rows(&subj);
        let y = self.outcome.select_rows(&subj);
        let est = SubjectSide::new(&rs, &z, &y)
            .and_then(|side| stage(&rm, &x, self.clustered.then_some(ids.as_slice()), &side));
        match est {
            Ok(e) => ReplicateDraw {
                uncorrected: Some(e.beta_hat),
                corrected: e.beta_bc,
            },
            Err(_) => ReplicateDraw {
                uncorrected: None,
                corrected: None,
            },
        }
    }

    pub fn draws(&self, replicates: usize, seed: u64, execution: Execution) -> Vec<ReplicateDraw> {
        map_indexed(replicates, execution, |b| self.replicate(seed, b))
    }
}

fn stage(rm: &DMatrix<f64>, x: &DVector<f64>, ids: Option<&[usize]>, side: &SubjectSide) -> Result<StageEstimate> {
    let mom = exposure_moments(rm, x, ids)?;
    let slope = side.slope(&mom.gamma_hat)?;
    let bias = side.beta_bias(&mom.gamma_hat, &mom.gamma_cov, &mom.delta)?;
    Ok(StageEstimate {
        beta_hat: slope.beta_hat,
        se_model: slope.se_model,
        b_hat: bias.b_hat,
        beta_bc: correct(slope.beta_hat, &bias).ok(),
    })
}

pub fn bootstrap(
    monitors: &MonitorDataset,
    subjects: &SubjectDataset,
    spec: &BasisSpec,
    replicates: usize,
    bias_correct: bool,
    seed: u64,
) -> Result<BootstrapResult> {
    bootstrap_with(monitors, subjects, spec, &BootstrapOptions::new(replicates, bias_correct, seed))
}

pub fn bootstrap_with(
    monitors: &MonitorDataset,
    subjects: &SubjectDataset,
    spec: &BasisSpec,
    options: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if options.replicates < MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {}",
            options.replicates
        )));
    }
    let problem = BootstrapProblem::new(monitors, subjects, spec)?;
    let full = problem.estimate()?;
    let estimate = if options.bias_correct {
        full.beta_bc.ok_or(Error::CorrectionBlowup {
            one_plus_b: 1.0 + full.b_hat,
        })?
    } else {
        full.beta_hat
    };
    let draws = problem.draws(options.replicates, options.seed, options.execution);
    summarize(&draws, options.bias_correct, estimate, options.interval, options.seed)
}

/// Reduces replicate draws (already in replicate order) to a result.
pub fn summarize(
    draws: &[ReplicateDraw],
    bias_corrected: bool,
    estimate: f64,
    interval: IntervalKind,
    seed: u64,
) -> Result<BootstrapResult> {
    let betas: Vec<f64> = draws
        .iter()
        .filter_map(|d| if bias_corrected { d.corrected } else { d.uncorrected })
        .collect();
    let n_failed = draws.len() - betas.len();
    if betas.is_empty() {
        return Err(Error::AllReplicatesFailed { replicates: draws.len() });
    }
    let se = sample_sd(&betas);
    let ci95 = match interval {
        IntervalKind::Wald => Interval::wald(estimate, se),
        IntervalKind::Percentile => {
            let mut sorted = betas.clone();
            sorted.sort_by(f64::total_cmp);
            Interval {
                lower: quantile(&sorted, 0.025),
                upper: quantile(&sorted, 0.975),
            }
        }
    };
    Ok(BootstrapResult {
        replicate_betas: betas,
        se,
        ci95,
        n_failed,
        replicates: draws.len(),
        bias_corrected,
        seed,
        estimate,
        interval,
    })
}

pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Linear interpolation between order statistics of sorted data.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
