//! The one-dimensional sinusoid scenario on (0, 10).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ScenarioDraw, Truth};
use crate::basis::{BasisSpec, BasisTemplate, SplineKind};
use crate::data::{CovariateTable, Location, MonitorDataset, SubjectDataset};
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_HEALTH_NOISE, TAG_MONITORS, TAG_SUBJECTS};

pub const DOMAIN: (f64, f64) = (0.0, 10.0);
const HIGH: f64 = 0.142;
const LOW: f64 = 0.0142;

pub fn phi_1d(s: f64) -> f64 {
    (s + 3.5).sin() + (s + 4.0) / 20.0 * (4.0 * s - 10.5).sin()
}

/// Normalizing constant of the piecewise monitor density.
pub fn h_normalizer() -> f64 {
    HIGH * 20.0 / 3.0 + LOW * 10.0 / 3.0
}

/// Renormalized piecewise density: high on the outer thirds, low in the middle.
pub fn h_density(s: f64) -> f64 {
    if !(s > 0.0 && s < 10.0) {
        return 0.0;
    }
    let raw = if (10.0 / 3.0..=20.0 / 3.0).contains(&s) { LOW } else { HIGH };
    raw / h_normalizer()
}

pub fn h_cdf(s: f64) -> f64 {
    let z = h_normalizer();
    let third = 10.0 / 3.0;
    if s <= 0.0 {
        0.0
    } else if s <= third {
        HIGH * s / z
    } else if s <= 2.0 * third {
        (HIGH * third + LOW * (s - third)) / z
    } else if s < 10.0 {
        (HIGH * third + LOW * third + HIGH * (s - 2.0 * third)) / z
    } else {
        1.0
    }
}

fn h_inverse_cdf(u: f64) -> f64 {
    let z = h_normalizer();
    let third = 10.0 / 3.0;
    let p1 = HIGH * third / z;
    let p2 = p1 + LOW * third / z;
    if u < p1 {
        u * z / HIGH
    } else if u < p2 {
        third + (u - p1) * z / LOW
    } else {
        2.0 * third + (u - p2) * z / HIGH
    }
}

/// I.i.d. draws from the renormalized monitor density by inverse CDF.
pub fn sample_h_1d<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            // open interval keeps draws strictly inside (0, 10)
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            h_inverse_cdf(u)
        })
        .collect()
}

pub fn sample_uniform_1d<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(f64::EPSILON..10.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectDensity {
    /// Same as the monitor density.
    Matched,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraCovariate {
    None,
    /// z = sin(s) in the health model and in the exposure model.
    SinInBoth,
    /// z = sin(s) in the health model only.
    SinInHealthOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario1D {
    pub n: usize,
    pub n_star: usize,
    pub sigma2_eta: f64,
    pub sigma2_eta_star: f64,
    pub g_kind: SubjectDensity,
    pub extra_covariate: ExtraCovariate,
    pub beta: f64,
    pub beta_z: f64,
    pub sigma2_eps: f64,
    /// B-spline degrees of freedom of the exposure model.
    pub df: usize,
    /// Whether the exposure model carries its own intercept column.
    pub exposure_intercept: bool,
}

impl Default for Scenario1D {
    fn default() -> Self {
        Self {
            n: 500,
            n_star: 200,
            sigma2_eta: 0.5,
            sigma2_eta_star: 0.5,
            g_kind: SubjectDensity::Matched,
            extra_covariate: ExtraCovariate::None,
            beta: 1.0,
            beta_z: 1.0,
            sigma2_eps: 1.0,
            df: 9,
            exposure_intercept: false,
        }
    }
}

impl Scenario1D {
    pub fn basis_template(&self) -> BasisTemplate {
        let covariate_names = match self.extra_covariate {
            ExtraCovariate::SinInBoth => vec!["sin_s".to_string()],
            _ => vec![],
        };
        BasisTemplate {
            covariate_names,
            spline_kind: SplineKind::Bspline1d,
            spline_df: self.df,
            intercept: self.exposure_intercept,
            domain: Some(DOMAIN),
        }
    }

    pub fn basis(&self) -> Result<BasisSpec> {
        let t = self.basis_template();
        BasisSpec::bspline(t.covariate_names, t.spline_df, DOMAIN, t.intercept)
    }

    pub fn health_covariates(&self) -> Vec<String> {
        match self.extra_covariate {
            ExtraCovariate::None => vec![],
            _ => vec!["sin_s".to_string()],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 || self.n_star < 2 {
            return Err(Error::InvalidParameter("scenario needs n >= 3 and n_star >= 2".into()));
        }
        for (name, v) in [
            ("sigma2_eta", self.sigma2_eta),
            ("sigma2_eta_star", self.sigma2_eta_star),
            ("sigma2_eps", self.sigma2_eps),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

fn covariates_at(s: &[f64]) -> CovariateTable {
    CovariateTable::from_columns(vec![("sin_s".into(), s.iter().map(|v| v.sin()).collect())], s.len())
        .expect("column length matches")
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One full draw. Monitors, subjects and health noise come from separate
/// streams so the exposure side is shared across noise levels.
pub fn gen_scenario_1d(params: &Scenario1D, seed: u64) -> Result<ScenarioDraw> {
    gen_scenario_1d_with(params, seed, phi_1d)
}

pub fn gen_scenario_1d_with(params: &Scenario1D, seed: u64, phi: impl Fn(f64) -> f64) -> Result<ScenarioDraw> {
    params.validate()?;
    let mut mrng = stream(seed, &[TAG_MONITORS]);
    let ms = sample_h_1d(params.n_star, &mut mrng);
    let sd_star = params.sigma2_eta_star.sqrt();
    let x_star: Vec<f64> = ms.iter().map(|&s| phi(s) + sd_star * normal(&mut mrng)).collect();
    let monitors = MonitorDataset::new(
        ms.iter().map(|&s| Location::on_line(s)).collect(),
        x_star,
        covariates_at(&ms),
        None,
    )?;

    let mut srng = stream(seed, &[TAG_SUBJECTS]);
    let ss = match params.g_kind {
        SubjectDensity::Matched => sample_h_1d(params.n, &mut srng),
        SubjectDensity::Uniform => sample_uniform_1d(params.n, &mut srng),
    };
    let sd = params.sigma2_eta.sqrt();
    let phi_s: Vec<f64> = ss.iter().map(|&s| phi(s)).collect();
    let x: Vec<f64> = phi_s.iter().map(|p| p + sd * normal(&mut srng)).collect();
    let z: Vec<f64> = ss.iter().map(|s| s.sin()).collect();
    let with_z = params.extra_covariate != ExtraCovariate::None;
    let signal: Vec<f64> = x
        .iter()
        .zip(&z)
        .map(|(xi, zi)| params.beta * xi + if with_z { params.beta_z * zi } else { 0.0 })
        .collect();
    let mut nrng = stream(seed, &[TAG_HEALTH_NOISE]);
    let sd_eps = params.sigma2_eps.sqrt();
    let y: Vec<f64> = signal.iter().map(|v| v + sd_eps * normal(&mut nrng)).collect();
    let subjects = SubjectDataset::new(
        ss.iter().map(|&s| Location::on_line(s)).collect(),
        y,
        covariates_at(&ss),
        params.health_covariates(),
    )?;
    Ok(ScenarioDraw {
        monitors,
        subjects,
        truth: Truth {
            phi_monitors: ms.iter().map(|&s| phi(s)).collect(),
            phi_subjects: phi_s,
            x_subjects: x,
            y_signal: signal,
            beta: params.beta,
        },
    })
}

/// Population exposure-model coefficients: least squares of Φ on R(s) under
/// the monitor density, by midpoint quadrature on `points` cells.
pub fn population_gamma(spec: &BasisSpec, points: usize) -> Result<nalgebra::DVector<f64>> {
    let s: Vec<f64> = (0..points).map(|i| 10.0 * (i as f64 + 0.5) / points as f64).collect();
    let cov = covariates_at(&s).select(&spec.covariate_names)?;
    let locs: Vec<Location> = s.iter().map(|&v| Location::on_line(v)).collect();
    let mut r = crate::basis::design_matrix(spec, &cov, &locs)?.values;
    let mut target = nalgebra::DVector::from_iterator(points, s.iter().map(|&v| phi_1d(v)));
    for (i, &v) in s.iter().enumerate() {
        let w = h_density(v).sqrt();
        r.row_mut(i).scale_mut(w);
        target[i] *= w;
    }
    Ok(crate::regress::ols_fit(&r, &target)?.coefficients)
}
