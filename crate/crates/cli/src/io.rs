//! Headered CSV input and output.
//!
//! Monitors: `x_coord, y_coord, value`, an optional cluster column, then
//! numeric covariates. Subjects: `x_coord, y_coord, outcome`, then numeric
//! covariates. One-dimensional data carries `y_coord = 0`.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use twostage::data::{CovariateTable, Location, MonitorDataset, SubjectDataset};

use crate::error::{CliError, CliResult};

struct Table {
    headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
            _ => CliError::io(path, e),
        })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let parse_err = |e: csv::Error| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: String::new(),
                message: e.to_string(),
            }
        };
        let headers: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(parse_err)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { headers, rows })
    }

    fn index(&self, path: &Path, name: &str) -> CliResult<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: name.to_string(),
            message: "required column is missing".into(),
        })
    }

    fn numeric(&self, path: &Path, col: usize) -> CliResult<Vec<f64>> {
        self.rows
            .iter()
            .map(|(line, row)| {
                let raw = &row[col];
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CliError::Parse {
                        path: path.to_path_buf(),
                        line: *line,
                        column: self.headers[col].clone(),
                        message: format!("expected a finite number, found '{raw}'"),
                    }),
                }
            })
            .collect()
    }

    fn locations(&self, path: &Path) -> CliResult<Vec<Location>> {
        let x = self.numeric(path, self.index(path, "x_coord")?)?;
        let y = self.numeric(path, self.index(path, "y_coord")?)?;
        Ok(x.into_iter().zip(y).map(|(x, y)| Location::new(x, y)).collect())
    }

    fn covariates(&self, path: &Path, skip: &[usize]) -> CliResult<CovariateTable> {
        let mut cols = Vec::new();
        for (j, name) in self.headers.iter().enumerate() {
            if !skip.contains(&j) {
                cols.push((name.clone(), self.numeric(path, j)?));
            }
        }
        Ok(CovariateTable::from_columns(cols, self.rows.len())?)
    }
}

/// Header names of a CSV file, for validating a config before parsing bodies.
pub fn headers(path: &Path) -> CliResult<Vec<String>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
        _ => CliError::io(path, e),
    })?;
    let mut rdr = csv::Reader::from_reader(file);
    let h = rdr.headers().map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        column: String::new(),
        message: e.to_string(),
    })?;
    Ok(h.iter().map(|s| s.trim().to_string()).collect())
}

pub fn read_monitors(path: &Path, cluster_column: Option<&str>) -> CliResult<MonitorDataset> {
    let t = Table::read(path)?;
    let mut skip = vec![t.index(path, "x_coord")?, t.index(path, "y_coord")?, t.index(path, "value")?];
    let values = t.numeric(path, skip[2])?;
    let clusters = match cluster_column {
        Some(name) => {
            let j = t.index(path, name)?;
            skip.push(j);
            // labels may be any string; ids follow first appearance
            let mut ids: HashMap<&str, usize> = HashMap::new();
            let v: Vec<usize> = t
                .rows
                .iter()
                .map(|(_, r)| {
                    let n = ids.len();
                    *ids.entry(r[j].as_str()).or_insert(n)
                })
                .collect();
            Some(v)
        }
        None => None,
    };
    let locs = t.locations(path)?;
    let covs = t.covariates(path, &skip)?;
    Ok(MonitorDataset::new(locs, values, covs, clusters)?)
}

pub fn read_subjects(path: &Path, health_covariates: &[String], intercept: bool) -> CliResult<SubjectDataset> {
    let t = Table::read(path)?;
    let skip = [t.index(path, "x_coord")?, t.index(path, "y_coord")?, t.index(path, "outcome")?];
    let outcomes = t.numeric(path, skip[2])?;
    let locs = t.locations(path)?;
    let covs = t.covariates(path, &skip)?;
    let ds = SubjectDataset::new(locs, outcomes, covs, health_covariates.to_vec())?;
    Ok(if intercept { ds } else { ds.without_intercept() })
}

pub fn write_monitors(path: &Path, m: &MonitorDataset) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    let mut header = vec!["x_coord".to_string(), "y_coord".into(), "value".into()];
    if m.clusters.is_some() {
        header.push("cluster".into());
    }
    header.extend(m.covariates.names().iter().cloned());
    w.write_record(&header).map_err(|e| CliError::io(path, e.into()))?;
    for i in 0..m.len() {
        let mut rec = vec![fmt(m.locations[i].x), fmt(m.locations[i].y), fmt(m.values[i])];
        if let Some(c) = &m.clusters {
            rec.push(c[i].to_string());
        }
        rec.extend(m.covariates.values().row(i).iter().map(|v| fmt(*v)));
        w.write_record(&rec).map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_subjects(path: &Path, s: &SubjectDataset) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    let mut header = vec!["x_coord".to_string(), "y_coord".into(), "outcome".into()];
    header.extend(s.covariates.names().iter().cloned());
    w.write_record(&header).map_err(|e| CliError::io(path, e.into()))?;
    for i in 0..s.len() {
        let mut rec = vec![fmt(s.locations[i].x), fmt(s.locations[i].y), fmt(s.outcomes[i])];
        rec.extend(s.covariates.values().row(i).iter().map(|v| fmt(*v)));
        w.write_record(&rec).map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest decimal that round-trips.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable result");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_predictions(path: &Path, locations: &[Location], w_hat: &[f64]) -> CliResult<()> {
    let mut out = String::from("x_coord,y_coord,w_hat\n");
    for (p, w) in locations.iter().zip(w_hat) {
        out.push_str(&format!("{},{},{}\n", fmt(p.x), fmt(p.y), fmt(*w)));
    }
    write_text(path, &out)
}
