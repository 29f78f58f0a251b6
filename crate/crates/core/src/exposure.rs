//! First-stage exposure model: OLS of monitor measurements on R(s), plug-in
//! predictions at subject locations, cross-validation and projection of the
//! basis onto the complement of the health covariates.

use nalgebra::{DMatrix, DVector};

use crate::basis::{design_matrix, monitor_design, BasisSpec, DesignMatrix};
use crate::data::{group_by_id, CovariateTable, Location, MonitorDataset, SubjectDataset};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::regress::{ols_fit, sandwich_cov, RobustCov};

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureFit {
    pub gamma_hat: DVector<f64>,
    pub gamma_cov: RobustCov,
    pub basis: BasisSpec,
    pub monitor_design: DesignMatrix,
    pub monitor_response: DVector<f64>,
    pub clusters: Option<Vec<usize>>,
    pub residuals: DVector<f64>,
    /// `(R*ᵀR*)⁻¹`
    pub gram_inverse: DMatrix<f64>,
}

impl ExposureFit {
    pub fn n_star(&self) -> usize {
        self.monitor_response.len()
    }

    pub fn r(&self) -> usize {
        self.gamma_hat.len()
    }

    /// Row groups treated as resampling units (clusters, else single monitors).
    pub fn units(&self) -> Vec<Vec<usize>> {
        match &self.clusters {
            Some(ids) => group_by_id(ids),
            None => (0..self.n_star()).map(|i| vec![i]).collect(),
        }
    }

    pub fn fitted(&self) -> DVector<f64> {
        &self.monitor_design.values * &self.gamma_hat
    }

    pub fn predict(&self, locations: &[Location], covariates: &CovariateTable) -> Result<DVector<f64>> {
        predict(self, locations, covariates)
    }

    pub fn predict_subjects(&self, subjects: &SubjectDataset) -> Result<DVector<f64>> {
        predict(self, &subjects.locations, &subjects.covariates)
    }
}

pub fn fit_exposure(monitors: &MonitorDataset, spec: &BasisSpec) -> Result<ExposureFit> {
    let design = monitor_design(spec, monitors)?;
    fit_exposure_design(
        spec.clone(),
        design,
        DVector::from_column_slice(&monitors.values),
        monitors.clusters.clone(),
    )
}

/// Fits γ̂ on an already evaluated monitor design.
pub fn fit_exposure_design(
    basis: BasisSpec,
    design: DesignMatrix,
    response: DVector<f64>,
    clusters: Option<Vec<usize>>,
) -> Result<ExposureFit> {
    let n = design.nrows();
    if n <= design.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{n} monitors cannot support {} exposure coefficients",
            design.ncols()
        )));
    }
    let fit = ols_fit(&design.values, &response)?;
    let gamma_cov = sandwich_cov(&fit, &design.values, clusters.as_deref())?;
    Ok(ExposureFit {
        gamma_hat: fit.coefficients,
        gamma_cov,
        basis,
        monitor_design: design,
        monitor_response: response,
        clusters,
        residuals: fit.residuals,
        gram_inverse: fit.gram_inverse,
    })
}

/// ŵ(s) = R(s)γ̂ with the frozen basis.
pub fn predict(fit: &ExposureFit, locations: &[Location], covariates: &CovariateTable) -> Result<DVector<f64>> {
    let cov = covariates.select(&fit.basis.covariate_names)?;
    let design = design_matrix(&fit.basis, &cov, locations)?;
    Ok(&design.values * &fit.gamma_hat)
}

/// Leave-one-cluster-out R², pooling held-out squared errors against the total
/// sum of squares about the global mean. The basis is rebuilt on the retained
/// monitors for every fold.
pub fn cv_r2(monitors: &MonitorDataset, spec: &BasisSpec) -> Result<f64> {
    cv_r2_with(monitors, spec, Execution::default())
}

pub fn cv_r2_with(monitors: &MonitorDataset, spec: &BasisSpec, execution: Execution) -> Result<f64> {
    let units = monitors.units();
    let min = if monitors.clusters.is_some() { 5 } else { 10 };
    if units.len() < min {
        return Err(Error::TooFewClusters {
            units: units.len(),
            min,
        });
    }
    let folds = map_indexed(units.len(), execution, |k| -> Result<f64> {
        let held = &units[k];
        let keep: Vec<usize> = (0..monitors.len()).filter(|i| !held.contains(i)).collect();
        let train = monitors.take_rows(&keep);
        let test = monitors.take_rows(held);
        let fold_spec = spec.with_anchors(&train.locations)?;
        let fit = fit_exposure(&train, &fold_spec)?;
        let pred = predict(&fit, &test.locations, &test.covariates)?;
        Ok(test
            .values
            .iter()
            .zip(pred.iter())
            .map(|(x, p)| (x - p).powi(2))
            .sum())
    });
    let mut sse = 0.0;
    for f in folds {
        sse += f?;
    }
    let mean = monitors.values.iter().sum::<f64>() / monitors.len() as f64;
    let sst: f64 = monitors.values.iter().map(|x| (x - mean).powi(2)).sum();
    if sst <= 0.0 {
        return Err(Error::InvalidParameter("monitor values have zero variance".into()));
    }
    Ok(1.0 - sse / sst)
}

/// R^c: basis columns with their projection on the health covariates removed.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalizedBasis {
    pub values: DMatrix<f64>,
    /// ψ, one column per basis column.
    pub projection_coeffs: DMatrix<f64>,
}

impl OrthogonalizedBasis {
    /// `∫R^cᵀR^c dG` under the plug-in measure.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.values.tr_mul(&self.values) / self.values.nrows() as f64
    }
}

/// An empty `health_covariates` matrix leaves the basis untouched.
pub fn orthogonalize(basis_at_subjects: &DMatrix<f64>, health_covariates: &DMatrix<f64>) -> Result<OrthogonalizedBasis> {
    let (n, r) = basis_at_subjects.shape();
    if health_covariates.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} health covariate rows for {n} basis rows",
            health_covariates.nrows()
        )));
    }
    if health_covariates.ncols() == 0 {
        return Ok(OrthogonalizedBasis {
            values: basis_at_subjects.clone(),
            projection_coeffs: DMatrix::zeros(0, r),
        });
    }
    let psi = crate::regress::least_squares_multi(health_covariates, basis_at_subjects)?;
    let values = basis_at_subjects - health_covariates * &psi;
    Ok(OrthogonalizedBasis {
        values,
        projection_coeffs: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SplineKind;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_monitors(values: Vec<f64>, cov: Vec<f64>, clusters: Option<Vec<usize>>) -> MonitorDataset {
        let n = values.len();
        let locs = (0..n).map(|i| Location::on_line(i as f64)).collect();
        let table = CovariateTable::from_columns(vec![("a".into(), cov)], n).unwrap();
        MonitorDataset::new(locs, values, table, clusters).unwrap()
    }

    #[test]
    fn recovers_exact_linear_relation() {
        let cov: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let vals = cov.iter().map(|c| 1.5 - 2.0 * c).collect();
        let m = line_monitors(vals, cov, None);
        let fit = fit_exposure(&m, &BasisSpec::covariates_only(vec!["a".into()], true)).unwrap();
        assert_abs_diff_eq!(fit.gamma_hat[0], 1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.gamma_hat[1], -2.0, epsilon = 1e-10);
        let pred = fit.predict(&m.locations, &m.covariates).unwrap();
        assert!((pred - fit.fitted()).amax() < 1e-14);
    }

    #[test]
    fn zero_gamma_predicts_zero() {
        let m = line_monitors(vec![0.0; 6], (0..6).map(|i| i as f64).collect(), None);
        let fit = fit_exposure(&m, &BasisSpec::covariates_only(vec!["a".into()], true)).unwrap();
        assert_eq!(fit.predict(&m.locations, &m.covariates).unwrap().amax(), 0.0);
    }

    #[test]
    fn cv_r2_is_one_for_noise_free_span() {
        let cov: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        let vals = cov.iter().map(|c| 3.0 + c).collect();
        let m = line_monitors(vals, cov, Some((0..20).map(|i| i / 4).collect()));
        let r2 = cv_r2(&m, &BasisSpec::covariates_only(vec!["a".into()], true)).unwrap();
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cv_r2_of_noise_is_not_positive_on_average() {
        let mut total = 0.0;
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cov: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = line_monitors(vals, cov, None);
            total += cv_r2(&m, &BasisSpec::covariates_only(vec!["a".into()], true)).unwrap();
        }
        assert!(total / 30.0 <= 0.0);
    }

    #[test]
    fn cv_needs_enough_units() {
        let m = line_monitors(vec![1.0; 8], vec![0.0; 8], None);
        assert_eq!(
            cv_r2(&m, &BasisSpec::covariates_only(vec![], true)).unwrap_err(),
            Error::TooFewClusters { units: 8, min: 10 }
        );
    }

    #[test]
    fn cv_rebuilds_thin_plate_per_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let locs: Vec<Location> = (0..40)
            .map(|_| Location::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        let vals = locs.iter().map(|l| 1.0 + 0.3 * l.x - 0.2 * l.y).collect();
        let m = MonitorDataset::new(locs.clone(), vals, CovariateTable::empty(40), None).unwrap();
        let spec = crate::basis::BasisTemplate {
            covariate_names: vec![],
            spline_kind: SplineKind::Thinplate2d,
            spline_df: 5,
            intercept: true,
            domain: None,
        }
        .instantiate(&m)
        .unwrap();
        assert_abs_diff_eq!(cv_r2(&m, &spec).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn intercept_only_orthogonalization_centers() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 6.0, 0.0]);
        let o = orthogonalize(&b, &DMatrix::from_element(3, 1, 1.0)).unwrap();
        assert_abs_diff_eq!(o.values[(0, 0)], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.values[(2, 1)], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_to_health_covariates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = DMatrix::from_fn(50, 3, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let mut b = DMatrix::from_fn(50, 4, |_, _| rng.random_range(-2.0..2.0));
        // last column lies in the span of Z
        let spanned = &z * DVector::from_vec(vec![0.5, -1.0, 2.0]);
        b.set_column(3, &spanned);
        let o = orthogonalize(&b, &z).unwrap();
        assert!((z.transpose() * &o.values).amax() <= 1e-10);
        assert!(o.values.column(3).amax() <= 1e-8);
    }
}
