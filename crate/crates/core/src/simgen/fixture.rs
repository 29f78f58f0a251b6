//! A synthetic cohort shaped like a regional air-pollution study: a sparse
//! regulatory network plus roadside gradient clusters, and a larger subject
//! panel with land-use covariates and two non-spatial health covariates.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CovariateTable, Location, MonitorDataset, SubjectDataset};
use crate::error::Result;
use crate::rng::{stream, TAG_HEALTH_NOISE, TAG_MONITORS, TAG_SUBJECTS};

pub const GEO_COVARIATES: [&str; 5] = ["log_dist_road", "pop_density", "commercial", "elevation", "near_port"];
pub const HEALTH_COVARIATES: [&str; 2] = ["age", "male"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureParams {
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub n_singletons: usize,
    pub n_subjects: usize,
    pub extent: f64,
    pub beta: f64,
    pub sigma2_eta: f64,
    pub sigma2_eps: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        // 8 clusters of 6 plus 45 stand-alone sites: 93 monitors
        Self {
            n_clusters: 8,
            cluster_size: 6,
            n_singletons: 45,
            n_subjects: 625,
            extent: 30.0,
            beta: 0.5,
            sigma2_eta: 0.3,
            sigma2_eps: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub monitors: MonitorDataset,
    pub subjects: SubjectDataset,
}

fn geo_covariates(p: Location, extent: f64) -> [f64; 5] {
    let (x, y) = (p.x / extent, p.y / extent);
    // main road: y = 0.3 + 0.4 x
    let road = (y - 0.3 - 0.4 * x).abs() / (1.0f64 + 0.16).sqrt();
    let centre = ((x - 0.45).powi(2) + (y - 0.55).powi(2)).sqrt();
    [
        (1.0 + 50.0 * road).ln(),
        3.0 * (-centre / 0.25).exp(),
        (6.0 * x).sin() * (4.0 * y).cos(),
        (1.0 + 2.0 * x + y).ln(),
        (-((x - 0.9).powi(2) + (y - 0.1).powi(2)) / 0.05).exp(),
    ]
}

fn exposure_mean(p: Location, covs: &[f64; 5], extent: f64) -> f64 {
    let (x, y) = (p.x / extent, p.y / extent);
    let smooth = 0.8 * (3.0 * x + 1.0).sin() * (2.5 * y).cos();
    12.0 - 0.9 * covs[0] + 0.6 * covs[1] + 0.4 * covs[2] - 0.3 * covs[3] + 1.2 * covs[4] + smooth
}

fn table(names: &[&str], rows: &[Vec<f64>]) -> Result<CovariateTable> {
    let n = rows.len();
    let values = DMatrix::from_fn(n, names.len(), |i, j| rows[i][j]);
    CovariateTable::new(names.iter().map(|s| s.to_string()).collect(), values)
}

pub fn gen_fixture(params: &FixtureParams, seed: u64) -> Result<Fixture> {
    let ext = params.extent;
    let eta = Normal::new(0.0, params.sigma2_eta.sqrt()).expect("finite variance");

    let mut rng = stream(seed, &[TAG_MONITORS]);
    let mut locs = Vec::new();
    let mut clusters = Vec::new();
    for c in 0..params.n_clusters {
        // a short transect stepping away from a random anchor
        let ax = rng.random_range(0.1..0.9) * ext;
        let ay = rng.random_range(0.1..0.9) * ext;
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        for k in 0..params.cluster_size {
            let d = 0.15 * k as f64;
            locs.push(Location::new(
                (ax + d * angle.cos()).clamp(0.0, ext),
                (ay + d * angle.sin()).clamp(0.0, ext),
            ));
            clusters.push(c);
        }
    }
    for k in 0..params.n_singletons {
        locs.push(Location::new(rng.random_range(0.0..ext), rng.random_range(0.0..ext)));
        clusters.push(params.n_clusters + k);
    }
    let mut cov_rows = Vec::with_capacity(locs.len());
    let mut values = Vec::with_capacity(locs.len());
    for p in &locs {
        let c = geo_covariates(*p, ext);
        values.push(exposure_mean(*p, &c, ext) + eta.sample(&mut rng));
        cov_rows.push(c.to_vec());
    }
    let monitors = MonitorDataset::new(locs, values, table(&GEO_COVARIATES, &cov_rows)?, Some(clusters))?;

    let mut rng = stream(seed, &[TAG_SUBJECTS]);
    let mut noise = stream(seed, &[TAG_HEALTH_NOISE]);
    let mut slocs = Vec::with_capacity(params.n_subjects);
    let mut geo = Vec::with_capacity(params.n_subjects);
    let mut y = Vec::with_capacity(params.n_subjects);
    for _ in 0..params.n_subjects {
        let p = Location::new(rng.random_range(0.0..ext), rng.random_range(0.0..ext));
        let c = geo_covariates(p, ext);
        let x = exposure_mean(p, &c, ext) + eta.sample(&mut rng);
        let age: f64 = 62.0 + 10.0 * rng.sample::<f64, _>(StandardNormal);
        let male = if rng.random_bool(0.47) { 1.0 } else { 0.0 };
        let e: f64 = noise.sample(StandardNormal);
        y.push(20.0 + params.beta * x + 0.08 * (age - 62.0) + 1.5 * male + params.sigma2_eps.sqrt() * e);
        slocs.push(p);
        let mut row = c.to_vec();
        row.extend([age, male]);
        geo.push(row);
    }
    let names: Vec<&str> = GEO_COVARIATES.iter().chain(HEALTH_COVARIATES.iter()).copied().collect();
    let subjects = SubjectDataset::new(
        slocs,
        y,
        table(&names, &geo)?,
        HEALTH_COVARIATES.iter().map(|s| s.to_string()).collect(),
    )?;
    Ok(Fixture { monitors, subjects })
}
