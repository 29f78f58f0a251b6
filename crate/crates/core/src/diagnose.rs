//! Compatibility diagnostics between the monitor and subject samples.
//!
//! Condition 1 compares the distribution of every non-constant basis column at
//! monitor and subject locations. Condition 2 checks that each health
//! covariate is (empirically) in the span of the basis at subject locations.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{monitor_design, subject_design, BasisSpec};
use crate::boot::quantile;
use crate::data::{MonitorDataset, SubjectDataset};
use crate::error::Result;
use crate::regress::ols_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ks: f64,
    pub span_r2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { ks: 0.25, span_r2: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnComparison {
    pub column: String,
    pub ks: f64,
    /// 0%, 10%, …, 100% quantiles.
    pub monitor_deciles: Vec<f64>,
    pub subject_deciles: Vec<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCheck {
    pub covariate: String,
    pub r2: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub condition1: Vec<ColumnComparison>,
    pub condition2: Vec<SpanCheck>,
    pub thresholds: Thresholds,
}

impl CompatibilityReport {
    pub fn any_flagged(&self) -> bool {
        self.condition1.iter().any(|c| c.flagged) || self.condition2.iter().any(|c| c.flagged)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Condition 1: basis column distributions (flag if KS > {})",
            self.thresholds.ks
        );
        let _ = writeln!(out, "  {:<24} {:>8} {:>22} {:>22}  flag", "column", "KS", "monitor median", "subject median");
        for c in &self.condition1 {
            let _ = writeln!(
                out,
                "  {:<24} {:>8.4} {:>22.6} {:>22.6}  {}",
                c.column,
                c.ks,
                c.monitor_deciles[5],
                c.subject_deciles[5],
                if c.flagged { "*" } else { "" }
            );
        }
        let _ = writeln!(
            out,
            "Condition 2: health covariates in span of R(s) (flag if R² < {})",
            self.thresholds.span_r2
        );
        if self.condition2.is_empty() {
            let _ = writeln!(out, "  (no non-intercept health covariates)");
        }
        for c in &self.condition2 {
            let _ = writeln!(
                out,
                "  {:<24} R² = {:>8.4}  {}",
                c.covariate,
                c.r2,
                if c.flagged { "*" } else { "" }
            );
        }
        out
    }
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn deciles(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (0..=10).map(|k| quantile(&sorted, k as f64 / 10.0)).collect()
}

pub fn check_condition1(
    monitors: &MonitorDataset,
    subjects: &SubjectDataset,
    spec: &BasisSpec,
    ks_threshold: f64,
) -> Result<Vec<ColumnComparison>> {
    let rm = monitor_design(spec, monitors)?;
    let rs = subject_design(spec, subjects)?;
    let skip = usize::from(spec.intercept);
    Ok((skip..rm.ncols())
        .map(|j| {
            let a: Vec<f64> = rm.values.column(j).iter().copied().collect();
            let b: Vec<f64> = rs.values.column(j).iter().copied().collect();
            let ks = ks_statistic(&a, &b);
            ColumnComparison {
                column: rm.column_names[j].clone(),
                ks,
                monitor_deciles: deciles(&a),
                subject_deciles: deciles(&b),
                flagged: ks > ks_threshold,
            }
        })
        .collect())
}

pub fn check_condition2(subjects: &SubjectDataset, spec: &BasisSpec, r2_threshold: f64) -> Result<Vec<SpanCheck>> {
    let rs = subject_design(spec, subjects)?;
    let mut out = Vec::with_capacity(subjects.health_covariates.len());
    for name in &subjects.health_covariates {
        let z: DVector<f64> = subjects.covariates.column(name)?;
        let fit = ols_fit(&rs.values, &z)?;
        let mean = z.mean();
        let sst: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
        let sse = fit.residuals.norm_squared();
        let r2 = if sst > 0.0 { 1.0 - sse / sst } else if sse <= 1e-24 { 1.0 } else { f64::NEG_INFINITY };
        out.push(SpanCheck {
            covariate: name.clone(),
            r2,
            flagged: r2 < r2_threshold,
        });
    }
    Ok(out)
}

pub fn diagnose(
    monitors: &MonitorDataset,
    subjects: &SubjectDataset,
    spec: &BasisSpec,
    thresholds: Thresholds,
) -> Result<CompatibilityReport> {
    Ok(CompatibilityReport {
        condition1: check_condition1(monitors, subjects, spec, thresholds.ks)?,
        condition2: check_condition2(subjects, spec, thresholds.span_r2)?,
        thresholds,
    })
}
