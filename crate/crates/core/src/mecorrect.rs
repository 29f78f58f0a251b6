//! Second-stage health fit on plug-in exposure predictions and the
//! classical-like measurement error correction.
//!
//! The bias of β̂ is assembled from three pieces evaluated on the
//! orthogonalized basis `R^c`: the O(1/n*) bias of γ̂ (`delta`), the robust
//! covariance of γ̂, and the plug-in second moment `A = mean_i R^c_iᵀR^c_i`.
//! With `v = Aγ̂` and `D = γ̂ᵀAγ̂`:
//!
//! ```text
//! term1 = -γ̂ᵀA·delta / D
//! term2 = -tr(Cov·A) / D
//! term3 = 2·vᵀCov·v / D²
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::SubjectDataset;
use crate::error::{Error, Result};
use crate::exposure::{orthogonalize, ExposureFit, OrthogonalizedBasis};
use crate::regress::{ols_fit, sandwich_cov, LinearFit, RobustCov};

/// Smallest admissible |1 + b̂|.
pub const BLOWUP_THRESHOLD: f64 = 0.05;
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq)]
pub struct HealthFit {
    pub fit: LinearFit,
    pub beta_hat: f64,
    pub beta_z_hat: DVector<f64>,
    pub se_model: f64,
    pub cov: RobustCov,
}

/// OLS of y on `[ŵ | Z]` with an HC0 standard error for β̂.
pub fn fit_health(subjects: &SubjectDataset, w_hat: &DVector<f64>) -> Result<HealthFit> {
    let z = subjects.health_design()?;
    let mut names = vec!["exposure".to_string()];
    names.extend(subjects.health_names());
    let mut hf = fit_health_design(w_hat, &z, &subjects.outcome_vector())?;
    hf.fit = hf.fit.with_names(names);
    Ok(hf)
}

pub fn fit_health_design(w_hat: &DVector<f64>, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<HealthFit> {
    if w_hat.len() != z.nrows() || y.len() != z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions, {} outcomes, {} covariate rows",
            w_hat.len(),
            y.len(),
            z.nrows()
        )));
    }
    let x = z.clone().insert_column(0, 0.0);
    let mut x = x;
    x.set_column(0, w_hat);
    let fit = ols_fit(&x, y)?;
    let cov = sandwich_cov(&fit, &x, None)?;
    Ok(HealthFit {
        beta_hat: fit.coefficients[0],
        beta_z_hat: fit.coefficients.rows(1, z.ncols()).into_owned(),
        se_model: cov.std_error(0),
        cov,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaBias {
    pub delta: DVector<f64>,
    pub n_star: usize,
}

/// Second-order multinomial bias of γ̂, resampling the fit's units.
pub fn gamma_bias(fit: &ExposureFit) -> Result<GammaBias> {
    let units = fit.units();
    let delta = gamma_bias_parts(
        &fit.monitor_design.values,
        &fit.residuals,
        &fit.gram_inverse,
        &units,
    )?;
    Ok(GammaBias {
        delta,
        n_star: fit.n_star(),
    })
}

/// `delta = ½·[(Var − Cov)·S_diag + Cov·S_all]` where the second derivatives of
/// κ at uniform unit weights reduce to per-unit aggregates
/// `A_c = Σ_{j∈c} R_jR_jᵀ` and `g_c = Σ_{j∈c} R_j e_j`, and the multinomial
/// moments of the unit weights are `Var = (K−1)/K³`, `Cov = −1/K³`.
pub fn gamma_bias_parts(
    design: &DMatrix<f64>,
    residuals: &DVector<f64>,
    gram_inverse: &DMatrix<f64>,
    units: &[Vec<usize>],
) -> Result<DVector<f64>> {
    let (n, r) = design.shape();
    if residuals.len() != n || gram_inverse.nrows() != r {
        return Err(Error::DimensionMismatch("gamma bias inputs disagree".into()));
    }
    let k = units.len();
    if k <= 1 {
        return Err(Error::SingleCluster);
    }
    let kf = k as f64;
    // Q⁻¹ at uniform unit weights
    let q_inv = gram_inverse * kf;
    let mut s_diag = DVector::zeros(r);
    let mut sum_a = DMatrix::zeros(r, r);
    let mut sum_g = DVector::zeros(r);
    let mut a_c = DMatrix::zeros(r, r);
    let mut g_c = DVector::zeros(r);
    for unit in units {
        a_c.fill(0.0);
        g_c.fill(0.0);
        for &j in unit {
            let row = design.row(j).transpose();
            a_c.ger(1.0, &row, &row, 1.0);
            g_c.axpy(residuals[j], &row, 1.0);
        }
        // ∂²κ/∂m_c² = −2 Q⁻¹A_cQ⁻¹g_c
        s_diag -= &q_inv * (&a_c * (&q_inv * &g_c)) * 2.0;
        sum_a += &a_c;
        sum_g += &g_c;
    }
    // Σ_{c,k} ∂²κ/∂m_c∂m_k = −2 Q⁻¹(ΣA)Q⁻¹(Σg)
    let s_all = -(&q_inv * (&sum_a * (&q_inv * &sum_g))) * 2.0;
    let var = (kf - 1.0) / kf.powi(3);
    let cov = -1.0 / kf.powi(3);
    let delta = (s_diag * (var - cov) + s_all * cov) * 0.5;
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient { rcond: 0.0 });
    }
    Ok(delta)
}

/// κ(m) = (RᵀMR)⁻¹RᵀMx for row weights m.
pub fn kappa(design: &DMatrix<f64>, response: &DVector<f64>, weights: &[f64]) -> Result<DVector<f64>> {
    let (q, b) = weighted_normal(design, response, weights)?;
    q.cholesky()
        .map(|c| c.solve(&b))
        .ok_or(Error::RankDeficient { rcond: 0.0 })
}

fn weighted_normal(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    weights: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (n, r) = design.shape();
    if response.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch("kappa inputs disagree".into()));
    }
    let mut q = DMatrix::zeros(r, r);
    let mut b = DVector::zeros(r);
    for j in 0..n {
        if weights[j] == 0.0 {
            continue;
        }
        let row = design.row(j).transpose();
        q.ger(weights[j], &row, &row, 1.0);
        b.axpy(weights[j] * response[j], &row, 1.0);
    }
    Ok((q, b))
}

/// Analytic `∂²κ/∂m_j∂m_k = −H_jk·(Q⁻¹R_k e_j + Q⁻¹R_j e_k)` with
/// `H_jk = R_jᵀQ⁻¹R_k` and residuals `e` at the current weights.
pub fn kappa_second_derivative(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    weights: &[f64],
    j: usize,
    k: usize,
) -> Result<DVector<f64>> {
    let (q, _) = weighted_normal(design, response, weights)?;
    let q_inv = q.try_inverse().ok_or(Error::RankDeficient { rcond: 0.0 })?;
    let kap = kappa(design, response, weights)?;
    let rj = design.row(j).transpose();
    let rk = design.row(k).transpose();
    let ej = response[j] - rj.dot(&kap);
    let ek = response[k] - rk.dot(&kap);
    let h = rj.dot(&(&q_inv * &rk));
    Ok(-(&q_inv * (rk * ej + rj * ek)) * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBias {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub b_hat: f64,
    pub denom: f64,
}

impl BetaBias {
    pub fn zero(denom: f64) -> Self {
        Self {
            term1: 0.0,
            term2: 0.0,
            term3: 0.0,
            b_hat: 0.0,
            denom,
        }
    }
}

pub fn beta_bias(fit: &ExposureFit, ortho: &OrthogonalizedBasis, gbias: &GammaBias) -> Result<BetaBias> {
    beta_bias_parts(
        &fit.gamma_hat,
        &fit.gamma_cov.matrix,
        &gbias.delta,
        &ortho.second_moment(),
    )
}

/// The three bias terms from γ̂, Cov(γ̂), delta and `A = ∫R^cᵀR^c dG`.
pub fn beta_bias_parts(
    gamma_hat: &DVector<f64>,
    gamma_cov: &DMatrix<f64>,
    delta: &DVector<f64>,
    a: &DMatrix<f64>,
) -> Result<BetaBias> {
    let r = gamma_hat.len();
    if gamma_cov.shape() != (r, r) || delta.len() != r || a.shape() != (r, r) {
        return Err(Error::DimensionMismatch("beta bias inputs disagree".into()));
    }
    let v = a * gamma_hat;
    let denom = gamma_hat.dot(&v);
    check_denom(denom, gamma_hat, a)?;
    let term1 = -v.dot(delta) / denom;
    let term2 = -(gamma_cov.component_mul(a)).sum() / denom;
    let term3 = 2.0 * v.dot(&(gamma_cov * &v)) / (denom * denom);
    Ok(BetaBias {
        term1,
        term2,
        term3,
        b_hat: term1 + term2 + term3,
        denom,
    })
}

fn check_denom(denom: f64, gamma_hat: &DVector<f64>, a: &DMatrix<f64>) -> Result<()> {
    let scale = gamma_hat.norm_squared() * a.amax();
    if !(denom > 1e-12 * scale) || !denom.is_finite() {
        return Err(Error::DegenerateExposure { denom });
    }
    Ok(())
}

/// β̂²·vᵀCov(γ̂)v/D², the classical-like contribution to Var(β̂).
pub fn beta_var_cl(fit: &ExposureFit, ortho: &OrthogonalizedBasis, beta_hat: f64) -> Result<f64> {
    beta_var_cl_parts(&fit.gamma_hat, &fit.gamma_cov.matrix, &ortho.second_moment(), beta_hat)
}

pub fn beta_var_cl_parts(
    gamma_hat: &DVector<f64>,
    gamma_cov: &DMatrix<f64>,
    a: &DMatrix<f64>,
    beta_hat: f64,
) -> Result<f64> {
    let v = a * gamma_hat;
    let denom = gamma_hat.dot(&v);
    check_denom(denom, gamma_hat, a)?;
    Ok(beta_hat * beta_hat * v.dot(&(gamma_cov * &v)) / (denom * denom))
}

/// β̂/(1 + b̂).
pub fn correct(beta_hat: f64, bias: &BetaBias) -> Result<f64> {
    let one_plus_b = 1.0 + bias.b_hat;
    if !(one_plus_b.abs() >= BLOWUP_THRESHOLD) {
        return Err(Error::CorrectionBlowup { one_plus_b });
    }
    Ok(beta_hat / one_plus_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn wald(estimate: f64, se: f64) -> Self {
        Self {
            lower: estimate - Z95 * se,
            upper: estimate + Z95 * se,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedHealthFit {
    pub beta_hat: f64,
    pub beta_z_hat: Vec<f64>,
    pub bias: BetaBias,
    /// Equals `beta_hat` when the correction blew up.
    pub beta_bc: f64,
    pub correction_blowup: bool,
    pub se_model: f64,
    pub se_boot: Option<f64>,
    pub ci: Interval,
    pub beta_var_cl: f64,
}

impl CorrectedHealthFit {
    /// Attaches a bootstrap SE and recentres the interval on the reported estimate.
    pub fn with_bootstrap_se(mut self, se: f64, bias_corrected: bool) -> Self {
        self.se_boot = Some(se);
        let center = if bias_corrected { self.beta_bc } else { self.beta_hat };
        self.ci = Interval::wald(center, se);
        self
    }
}

/// The full plug-in analysis for one exposure fit and subject sample.
pub fn analyze(fit: &ExposureFit, subjects: &SubjectDataset) -> Result<CorrectedHealthFit> {
    let w_hat = fit.predict_subjects(subjects)?;
    let health = fit_health(subjects, &w_hat)?;
    let cov = subjects.covariates.select(&fit.basis.covariate_names)?;
    let rs = crate::basis::design_matrix(&fit.basis, &cov, &subjects.locations)?;
    let ortho = orthogonalize(&rs.values, &subjects.health_design()?)?;
    let gb = gamma_bias(fit)?;
    let bias = beta_bias(fit, &ortho, &gb)?;
    let var_cl = beta_var_cl(fit, &ortho, health.beta_hat)?;
    let (beta_bc, blowup) = match correct(health.beta_hat, &bias) {
        Ok(b) => (b, false),
        Err(Error::CorrectionBlowup { .. }) => (health.beta_hat, true),
        Err(e) => return Err(e),
    };
    Ok(CorrectedHealthFit {
        beta_hat: health.beta_hat,
        beta_z_hat: health.beta_z_hat.iter().copied().collect(),
        bias,
        beta_bc,
        correction_blowup: blowup,
        se_model: health.se_model,
        se_boot: None,
        ci: Interval::wald(health.beta_hat, health.se_model),
        beta_var_cl: var_cl,
    })
}

/// γ̂ with its robust covariance and multinomial bias from a bare monitor design.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureMoments {
    pub gamma_hat: DVector<f64>,
    pub gamma_cov: DMatrix<f64>,
    pub delta: DVector<f64>,
}

/// `cluster_ids` selects both the clustered sandwich and the resampling units.
pub fn exposure_moments(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    cluster_ids: Option<&[usize]>,
) -> Result<ExposureMoments> {
    let fit = ols_fit(design, response)?;
    let cov = sandwich_cov(&fit, design, cluster_ids)?;
    let units = match cluster_ids {
        Some(ids) => crate::data::group_by_id(ids),
        None => (0..design.nrows()).map(|i| vec![i]).collect(),
    };
    let delta = gamma_bias_parts(design, &fit.residuals, &fit.gram_inverse, &units)?;
    Ok(ExposureMoments {
        gamma_hat: fit.coefficients,
        gamma_cov: cov.matrix,
        delta,
    })
}

/// `v` minus its least-squares projection on the columns of `z`.
pub fn residualize(z: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if z.ncols() == 0 {
        return Ok(v.clone());
    }
    let coef = crate::regress::least_squares_multi(z, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))?;
    Ok(v - z * coef.column(0))
}

/// Subject-side quantities reused across exposure refits: the orthogonalized
/// basis, the outcome residualized on Z, and the plug-in second moment.
#[derive(Debug, Clone)]
pub struct SubjectSide {
    pub rc: DMatrix<f64>,
    pub yc: DVector<f64>,
    pub a: DMatrix<f64>,
}

/// β̂ with its HC0 standard error, from the partialled-out regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub beta_hat: f64,
    pub se_model: f64,
}

impl SubjectSide {
    pub fn new(subject_design: &DMatrix<f64>, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let ortho = orthogonalize(subject_design, z)?;
        let yc = residualize(z, y)?;
        let a = ortho.second_moment();
        Ok(Self { rc: ortho.values, yc, a })
    }

    /// The Frisch–Waugh–Lovell slope of y on ŵ = Rγ̂ given Z.
    pub fn slope(&self, gamma_hat: &DVector<f64>) -> Result<SlopeEstimate> {
        let wc = &self.rc * gamma_hat;
        self.slope_against(&wc, &self.yc)
    }

    /// Slope of an arbitrary Z-residualized outcome on Rγ̂.
    pub fn slope_for(&self, gamma_hat: &DVector<f64>, yc: &DVector<f64>) -> Result<SlopeEstimate> {
        let wc = &self.rc * gamma_hat;
        self.slope_against(&wc, yc)
    }

    fn slope_against(&self, wc: &DVector<f64>, yc: &DVector<f64>) -> Result<SlopeEstimate> {
        let d = wc.norm_squared();
        let scale = wc.len() as f64 * wc.amax().powi(2);
        if !(d > 1e-20 * scale) {
            return Err(Error::RankDeficient { rcond: 0.0 });
        }
        let beta_hat = wc.dot(yc) / d;
        let mut meat = 0.0;
        for i in 0..wc.len() {
            let s = wc[i] * (yc[i] - beta_hat * wc[i]);
            meat += s * s;
        }
        Ok(SlopeEstimate {
            beta_hat,
            se_model: meat.sqrt() / d,
        })
    }

    pub fn beta_bias(&self, gamma_hat: &DVector<f64>, gamma_cov: &DMatrix<f64>, delta: &DVector<f64>) -> Result<BetaBias> {
        beta_bias_parts(gamma_hat, gamma_cov, delta, &self.a)
    }
}
