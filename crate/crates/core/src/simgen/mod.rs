//! Scenario generators and the Monte Carlo driver for the simulation studies.

pub mod fixture;
pub mod matern;
pub mod montecarlo;
pub mod scenario1d;
pub mod scenario2d;

use crate::data::{MonitorDataset, SubjectDataset};

pub use matern::{bessel_k1, matern_field, surface_spline_r2, Field, Grid, Matern, MaternConvention};
pub use montecarlo::{monte_carlo, McOptions, McReport, Method, MethodRow, Scenario};
pub use scenario1d::{gen_scenario_1d, phi_1d, sample_h_1d, Scenario1D};
pub use scenario2d::{gen_scenario_2d, Scenario2D, Surface};

/// Noise-free quantities kept alongside a draw for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub phi_monitors: Vec<f64>,
    pub phi_subjects: Vec<f64>,
    /// True exposure x = Φ + η at the subjects.
    pub x_subjects: Vec<f64>,
    /// Health outcome without ε.
    pub y_signal: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDraw {
    pub monitors: MonitorDataset,
    pub subjects: SubjectDataset,
    pub truth: Truth,
}
