//! The spatial scenario: a 257 × 257 grid on a 30-unit square with three
//! white-noise geographic covariates plus a fixed Matérn surface.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matern::{matern_field, Field, Grid, Matern, MaternConvention};
use super::{ScenarioDraw, Truth};
use crate::basis::{BasisTemplate, SplineKind};
use crate::data::{CovariateTable, Location, MonitorDataset, SubjectDataset};
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_COVARIATE_FIELD, TAG_HEALTH_NOISE, TAG_MONITORS, TAG_SUBJECTS};

pub const COVARIATE_NAMES: [&str; 3] = ["R1", "R2", "R3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario2D {
    pub grid_side: usize,
    pub extent: f64,
    pub surface_seed: u64,
    pub matern_range: f64,
    pub matern_smoothness: f64,
    pub matern_convention: MaternConvention,
    pub surface_variance: f64,
    /// Intercept followed by the three covariate slopes.
    pub covariate_coeffs: [f64; 4],
    pub covariate_var: f64,
    pub nugget: f64,
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub n: usize,
    pub beta: f64,
    pub sigma2_eps: f64,
    /// Thin-plate degrees of freedom of the exposure model.
    pub df: usize,
}

impl Default for Scenario2D {
    fn default() -> Self {
        Self {
            grid_side: 257,
            extent: 30.0,
            surface_seed: 1,
            matern_range: 20.0,
            matern_smoothness: 1.0,
            matern_convention: MaternConvention::Plain,
            surface_variance: 30.0,
            covariate_coeffs: [4.9; 4],
            covariate_var: 1.0 / 3.0,
            nugget: 6.0,
            n_clusters: 25,
            cluster_size: 5,
            n: 600,
            beta: 0.1,
            sigma2_eps: 10.0,
            df: 5,
        }
    }
}

/// The fixed part of a scenario: everything determined by `surface_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub grid: Grid,
    pub phi1: Field,
    pub covariates: [Vec<f64>; 3],
    /// Φ = γ₀ + Σ γₖRₖ + Φ₁ on every cell.
    pub phi: Vec<f64>,
}

impl Surface {
    /// Variance on the grid of the covariate part Σ γₖRₖ.
    pub fn covariate_part_variance(&self, coeffs: &[f64; 4]) -> f64 {
        let part: Vec<f64> = (0..self.grid.len())
            .map(|i| (0..3).map(|k| coeffs[k + 1] * self.covariates[k][i]).sum())
            .collect();
        Field { grid: self.grid, values: part }.variance()
    }
}

impl Scenario2D {
    pub fn grid(&self) -> Grid {
        Grid {
            side: self.grid_side,
            extent: self.extent,
        }
    }

    pub fn matern(&self) -> Matern {
        Matern {
            range: self.matern_range,
            smoothness: self.matern_smoothness,
            variance: self.surface_variance,
            convention: self.matern_convention,
        }
    }

    pub fn surface(&self) -> Result<Surface> {
        let grid = self.grid();
        let phi1 = matern_field(grid, &self.matern(), self.surface_seed)?;
        let mut rng = stream(self.surface_seed, &[TAG_COVARIATE_FIELD]);
        let sd = self.covariate_var.sqrt();
        let mut draw = || -> Vec<f64> {
            (0..grid.len())
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    sd * e
                })
                .collect()
        };
        let covariates = [draw(), draw(), draw()];
        let g = self.covariate_coeffs;
        let phi = (0..grid.len())
            .map(|i| g[0] + g[1] * covariates[0][i] + g[2] * covariates[1][i] + g[3] * covariates[2][i] + phi1.values[i])
            .collect();
        Ok(Surface {
            grid,
            phi1,
            covariates,
            phi,
        })
    }

    pub fn basis_template(&self) -> BasisTemplate {
        BasisTemplate {
            covariate_names: COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(),
            spline_kind: SplineKind::Thinplate2d,
            spline_df: self.df,
            intercept: true,
            domain: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_side < 3 || self.n_clusters < 2 || self.cluster_size == 0 || self.n < 3 {
            return Err(Error::InvalidParameter("degenerate spatial scenario size".into()));
        }
        if self.cluster_size > 9 {
            return Err(Error::InvalidParameter("clusters larger than a 3×3 block are not supported".into()));
        }
        Ok(())
    }
}

/// The seed cell plus its `size − 1` nearest cells; ties broken by row then column.
pub fn cluster_cells(grid: Grid, seed_cell: usize, size: usize) -> Vec<usize> {
    let n = grid.side as i64;
    let (r0, c0) = ((seed_cell / grid.side) as i64, (seed_cell % grid.side) as i64);
    let mut cand: Vec<(i64, i64, i64)> = Vec::new();
    for dr in -2..=2i64 {
        for dc in -2..=2i64 {
            let (r, c) = (r0 + dr, c0 + dc);
            if (dr, dc) != (0, 0) && (0..n).contains(&r) && (0..n).contains(&c) {
                cand.push((dr * dr + dc * dc, r, c));
            }
        }
    }
    cand.sort();
    std::iter::once(seed_cell)
        .chain(cand.iter().take(size - 1).map(|&(_, r, c)| grid.index(r as usize, c as usize)))
        .collect()
}

fn covariate_table(surface: &Surface, cells: &[usize]) -> CovariateTable {
    let cols = COVARIATE_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| (name.to_string(), cells.iter().map(|&i| surface.covariates[k][i]).collect()))
        .collect();
    CovariateTable::from_columns(cols, cells.len()).expect("column lengths match")
}

pub fn gen_scenario_2d(params: &Scenario2D, surface: &Surface, seed: u64) -> Result<ScenarioDraw> {
    params.validate()?;
    let grid = surface.grid;
    let nugget_sd = params.nugget.sqrt();

    let mut mrng = stream(seed, &[TAG_MONITORS]);
    let mut mcells = Vec::with_capacity(params.n_clusters * params.cluster_size);
    let mut clusters = Vec::with_capacity(mcells.capacity());
    for k in 0..params.n_clusters {
        let seed_cell = mrng.random_range(0..grid.len());
        for cell in cluster_cells(grid, seed_cell, params.cluster_size) {
            mcells.push(cell);
            clusters.push(k);
        }
    }
    let x_star: Vec<f64> = mcells
        .iter()
        .map(|&i| {
            let e: f64 = StandardNormal.sample(&mut mrng);
            surface.phi[i] + nugget_sd * e
        })
        .collect();
    let monitors = MonitorDataset::new(
        mcells.iter().map(|&i| grid.location(i)).collect::<Vec<Location>>(),
        x_star,
        covariate_table(surface, &mcells),
        Some(clusters),
    )?;

    let mut srng = stream(seed, &[TAG_SUBJECTS]);
    let scells: Vec<usize> = (0..params.n).map(|_| srng.random_range(0..grid.len())).collect();
    let x: Vec<f64> = scells
        .iter()
        .map(|&i| {
            let e: f64 = StandardNormal.sample(&mut srng);
            surface.phi[i] + nugget_sd * e
        })
        .collect();
    let signal: Vec<f64> = x.iter().map(|v| params.beta * v).collect();
    let mut nrng = stream(seed, &[TAG_HEALTH_NOISE]);
    let sd_eps = params.sigma2_eps.sqrt();
    let y = signal
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut nrng);
            v + sd_eps * e
        })
        .collect();
    let subjects = SubjectDataset::new(
        scells.iter().map(|&i| grid.location(i)).collect(),
        y,
        covariate_table(surface, &scells),
        vec![],
    )?;
    Ok(ScenarioDraw {
        monitors,
        subjects,
        truth: Truth {
            phi_monitors: mcells.iter().map(|&i| surface.phi[i]).collect(),
            phi_subjects: scells.iter().map(|&i| surface.phi[i]).collect(),
            x_subjects: x,
            y_signal: signal,
            beta: params.beta,
        },
    })
}
