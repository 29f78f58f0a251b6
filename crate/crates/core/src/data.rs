//! Monitor and subject datasets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane. One-dimensional data use `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn on_line(x: f64) -> Self {
        Self { x, y: 0.0 }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Named numeric columns, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl CovariateTable {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        Ok(Self { names, values })
    }

    pub fn empty(rows: usize) -> Self {
        Self {
            names: Vec::new(),
            values: DMatrix::zeros(rows, 0),
        }
    }

    pub fn from_columns(columns: Vec<(String, Vec<f64>)>, rows: usize) -> Result<Self> {
        let mut values = DMatrix::zeros(rows, columns.len());
        let mut names = Vec::with_capacity(columns.len());
        for (j, (name, col)) in columns.into_iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "covariate '{name}' has {} rows, expected {rows}",
                    col.len()
                )));
            }
            values.set_column(j, &DVector::from_vec(col));
            names.push(name);
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self
            .index_of(name)
            .ok_or_else(|| Error::MissingCovariate(name.to_string()))?;
        Ok(self.values.column(j).into_owned())
    }

    /// Columns in the requested order.
    pub fn select(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.nrows(), names.len());
        for (k, name) in names.iter().enumerate() {
            let j = self
                .index_of(name)
                .ok_or_else(|| Error::MissingCovariate(name.clone()))?;
            out.set_column(k, &self.values.column(j));
        }
        Ok(out)
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            values: self.values.select_rows(rows),
        }
    }
}

/// Exposure measurements `x*_j` at monitor locations `s*_j`, with optional
/// cluster ids (e.g. roadway-gradient groups) that are resampled as units.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorDataset {
    pub locations: Vec<Location>,
    pub values: Vec<f64>,
    pub covariates: CovariateTable,
    pub clusters: Option<Vec<usize>>,
}

impl MonitorDataset {
    pub fn new(
        locations: Vec<Location>,
        values: Vec<f64>,
        covariates: CovariateTable,
        clusters: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = locations.len();
        if values.len() != n || covariates.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "monitor dataset: {n} locations, {} values, {} covariate rows",
                values.len(),
                covariates.nrows()
            )));
        }
        if let Some(c) = &clusters {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} cluster ids for {n} monitors",
                    c.len()
                )));
            }
        }
        Ok(Self {
            locations,
            values,
            covariates,
            clusters,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Row indices grouped by resampling unit: one group per cluster in order of
    /// first appearance, or one singleton group per monitor when unclustered.
    pub fn units(&self) -> Vec<Vec<usize>> {
        match &self.clusters {
            Some(ids) => group_by_id(ids),
            None => (0..self.len()).map(|i| vec![i]).collect(),
        }
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            locations: rows.iter().map(|&i| self.locations[i]).collect(),
            values: rows.iter().map(|&i| self.values[i]).collect(),
            covariates: self.covariates.take_rows(rows),
            clusters: self
                .clusters
                .as_ref()
                .map(|c| rows.iter().map(|&i| c[i]).collect()),
        }
    }
}

/// Health outcomes `y_i` at subject locations with the covariate columns
/// available there. `health_covariates` names the columns entering the health
/// model alongside the (optional) intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDataset {
    pub locations: Vec<Location>,
    pub outcomes: Vec<f64>,
    pub covariates: CovariateTable,
    pub health_covariates: Vec<String>,
    pub health_intercept: bool,
}

impl SubjectDataset {
    pub fn new(
        locations: Vec<Location>,
        outcomes: Vec<f64>,
        covariates: CovariateTable,
        health_covariates: Vec<String>,
    ) -> Result<Self> {
        let n = locations.len();
        if outcomes.len() != n || covariates.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "subject dataset: {n} locations, {} outcomes, {} covariate rows",
                outcomes.len(),
                covariates.nrows()
            )));
        }
        for name in &health_covariates {
            if covariates.index_of(name).is_none() {
                return Err(Error::MissingCovariate(name.clone()));
            }
        }
        Ok(Self {
            locations,
            outcomes,
            covariates,
            health_covariates,
            health_intercept: true,
        })
    }

    pub fn without_intercept(mut self) -> Self {
        self.health_intercept = false;
        self
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// The health covariate matrix Z: `[1 | named covariates]`.
    pub fn health_design(&self) -> Result<DMatrix<f64>> {
        let selected = self.covariates.select(&self.health_covariates)?;
        let offset = usize::from(self.health_intercept);
        let mut z = DMatrix::zeros(self.len(), selected.ncols() + offset);
        if self.health_intercept {
            z.column_mut(0).fill(1.0);
        }
        for j in 0..selected.ncols() {
            z.set_column(j + offset, &selected.column(j));
        }
        Ok(z)
    }

    pub fn health_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.health_intercept {
            names.push("(intercept)".to_string());
        }
        names.extend(self.health_covariates.iter().cloned());
        names
    }

    pub fn outcome_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.outcomes)
    }

    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            locations: rows.iter().map(|&i| self.locations[i]).collect(),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
            covariates: self.covariates.take_rows(rows),
            health_covariates: self.health_covariates.clone(),
            health_intercept: self.health_intercept,
        }
    }
}

pub(crate) fn group_by_id(ids: &[usize]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = Vec::new();
    let mut groups: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    for (row, &id) in ids.iter().enumerate() {
        groups
            .entry(id)
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(row);
    }
    order.into_iter().map(|id| groups.remove(&id).unwrap()).collect()
}
