//! Stationary Gaussian fields with Matérn covariance on a square grid,
//! simulated exactly by circulant embedding on a padded torus.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::basis::ThinPlateBasis;
use crate::data::Location;
use crate::error::{Error, Result};
use crate::regress::ols_fit;
use crate::rng::{stream, TAG_SURFACE};

/// Largest torus side tried before giving up on a non-negative spectrum.
const MAX_EMBEDDING: usize = 4096;
/// Negative eigenvalues smaller than this fraction of the largest are clipped.
const CLIP_TOLERANCE: f64 = 1e-8;

/// Modified Bessel function of the second kind, order one.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 needs a positive argument");
    if x <= 2.0 {
        let t = x / 2.0;
        let t2 = t * t;
        let poly = 1.0
            + t2 * (0.15443144 + t2 * (-0.67278579 + t2 * (-0.18156897 + t2 * (-0.01919402 + t2 * (-0.00110404 + t2 * -0.00004686)))));
        ((x / 2.0).ln() * x * bessel_i1(x) + poly) / x
    } else {
        let t = 2.0 / x;
        let poly = 1.25331414
            + t * (0.23498619 + t * (-0.03655620 + t * (0.01504268 + t * (-0.00780353 + t * (0.00325614 + t * -0.00068245)))));
        poly * (-x).exp() / x.sqrt()
    }
}

fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 3.75 {
        let t = (x / 3.75).powi(2);
        x * (0.5 + t * (0.87890594 + t * (0.51498869 + t * (0.15084934 + t * (0.02658733 + t * (0.00301532 + t * 0.00032411))))))
    } else {
        let t = 3.75 / ax;
        let poly = 0.39894228
            + t * (-0.03988024
                + t * (-0.00362018
                    + t * (0.00163801 + t * (-0.01031531 + t * (0.02282967 + t * (-0.02895312 + t * (0.01787654 + t * -0.00420059)))))));
        let v = poly * ax.exp() / ax.sqrt();
        if x < 0.0 {
            -v
        } else {
            v
        }
    }
}

/// How the range parameter enters the correlation argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaternConvention {
    /// Argument `d / range`.
    #[default]
    Plain,
    /// Argument `2·sqrt(ν)·d / range`.
    Paciorek,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matern {
    pub range: f64,
    pub smoothness: f64,
    pub variance: f64,
    #[serde(default)]
    pub convention: MaternConvention,
}

impl Matern {
    fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.variance > 0.0) {
            return Err(Error::InvalidParameter("Matérn range and variance must be positive".into()));
        }
        if ![0.5, 1.0, 1.5, 2.5].contains(&self.smoothness) {
            return Err(Error::InvalidParameter(format!(
                "Matérn smoothness {} not supported (0.5, 1, 1.5, 2.5)",
                self.smoothness
            )));
        }
        Ok(())
    }

    pub fn correlation(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 1.0;
        }
        let nu = self.smoothness;
        let u = match self.convention {
            MaternConvention::Plain => d / self.range,
            MaternConvention::Paciorek => 2.0 * nu.sqrt() * d / self.range,
        };
        if nu == 0.5 {
            (-u).exp()
        } else if nu == 1.0 {
            u * bessel_k1(u)
        } else if nu == 1.5 {
            (1.0 + u) * (-u).exp()
        } else {
            (1.0 + u + u * u / 3.0) * (-u).exp()
        }
    }

    pub fn variogram(&self, d: f64) -> f64 {
        self.variance * (1.0 - self.correlation(d))
    }
}

/// A `side × side` lattice spanning `[0, extent]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub side: usize,
    pub extent: f64,
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        self.extent / (self.side - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    /// Row-major index → location (column along x, row along y).
    pub fn location(&self, index: usize) -> Location {
        let h = self.spacing();
        Location::new((index % self.side) as f64 * h, (index / self.side) as f64 * h)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance over grid cells.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    /// Affine rescaling to grid mean 0 and grid variance `variance`.
    pub fn normalized(mut self, variance: f64) -> Self {
        let m = self.mean();
        let s = (variance / self.variance()).sqrt();
        for v in &mut self.values {
            *v = (*v - m) * s;
        }
        self
    }

    /// Semivariogram at a lag of `lag` cells along both axes.
    pub fn empirical_variogram(&self, lag: usize) -> f64 {
        let n = self.grid.side;
        let mut sum = 0.0;
        let mut count = 0usize;
        for r in 0..n {
            for c in 0..n {
                let v = self.values[r * n + c];
                if c + lag < n {
                    sum += (v - self.values[r * n + c + lag]).powi(2);
                    count += 1;
                }
                if r + lag < n {
                    sum += (v - self.values[(r + lag) * n + c]).powi(2);
                    count += 1;
                }
            }
        }
        0.5 * sum / count as f64
    }
}

/// Unnormalized field with covariance `model` on `grid`.
pub fn matern_field_raw(grid: Grid, model: &Matern, seed: u64) -> Result<Field> {
    model.validate()?;
    if grid.side < 2 || !(grid.extent > 0.0) {
        return Err(Error::InvalidParameter("grid needs side >= 2 and positive extent".into()));
    }
    let h = grid.spacing();
    let mut size = (2 * (grid.side - 1)).next_power_of_two();
    let mut worst = 0.0;
    while size <= MAX_EMBEDDING {
        let spectrum = embedding_spectrum(size, h, model);
        let max = spectrum.iter().cloned().fold(0.0, f64::max);
        let min = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        if min >= -CLIP_TOLERANCE * max {
            return Ok(synthesize(grid, size, &spectrum, seed));
        }
        worst = min;
        size *= 2;
    }
    Err(Error::SpectrumNegative { min_eigenvalue: worst })
}

/// Field normalized to grid mean 0 and grid variance `model.variance`.
pub fn matern_field(grid: Grid, model: &Matern, seed: u64) -> Result<Field> {
    Ok(matern_field_raw(grid, model, seed)?.normalized(model.variance))
}

fn fft2(data: &mut [Complex<f64>], size: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(size)
    } else {
        planner.plan_fft_forward(size)
    };
    for row in data.chunks_mut(size) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); size];
    for c in 0..size {
        for r in 0..size {
            col[r] = data[r * size + c];
        }
        fft.process(&mut col);
        for r in 0..size {
            data[r * size + c] = col[r];
        }
    }
}

/// Eigenvalues of the block-circulant covariance on a `size × size` torus.
fn embedding_spectrum(size: usize, h: f64, model: &Matern) -> Vec<f64> {
    let wrap = |k: usize| k.min(size - k) as f64 * h;
    let mut c: Vec<Complex<f64>> = (0..size * size)
        .map(|i| {
            let d = wrap(i / size).hypot(wrap(i % size));
            Complex::new(model.variance * model.correlation(d), 0.0)
        })
        .collect();
    fft2(&mut c, size, false);
    c.iter().map(|z| z.re).collect()
}

fn synthesize(grid: Grid, size: usize, spectrum: &[f64], seed: u64) -> Field {
    let mut rng = stream(seed, &[TAG_SURFACE]);
    let scale = 1.0 / (size * size) as f64;
    let mut w: Vec<Complex<f64>> = spectrum
        .iter()
        .map(|&lambda| {
            let amp = (lambda.max(0.0) * scale).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(re * amp, im * amp)
        })
        .collect();
    fft2(&mut w, size, false);
    let n = grid.side;
    let values = (0..n * n).map(|i| w[(i / n) * size + i % n].re).collect();
    Field { grid, values }
}

/// R² of the best `df` thin-plate fit to a field, using a coarse anchor
/// subgrid and a subsampled evaluation grid.
pub fn surface_spline_r2(field: &Field, df: usize) -> Result<f64> {
    let grid = field.grid;
    let anchor_step = ((grid.side - 1) / 16).max(1);
    let eval_step = ((grid.side - 1) / 64).max(1);
    let pick = |step: usize| -> Vec<usize> {
        (0..grid.side)
            .step_by(step)
            .flat_map(|r| (0..grid.side).step_by(step).map(move |c| (r, c)))
            .map(|(r, c)| grid.index(r, c))
            .collect()
    };
    let anchors: Vec<Location> = pick(anchor_step).into_iter().map(|i| grid.location(i)).collect();
    let eval = pick(eval_step);
    let basis = ThinPlateBasis::new(&anchors, df)?;
    let points: Vec<Location> = eval.iter().map(|&i| grid.location(i)).collect();
    let x: DMatrix<f64> = basis.evaluate(&points);
    let y = DVector::from_iterator(eval.len(), eval.iter().map(|&i| field.values[i]));
    let fit = ols_fit(&x, &y)?;
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(1.0 - fit.residuals.norm_squared() / sst)
}
