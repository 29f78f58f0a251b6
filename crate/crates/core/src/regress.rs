//! Dense least squares and sandwich covariance estimation.
//!
//! Both stages of the analysis run through [`ols_fit`]; robust standard errors
//! for either stage come from [`sandwich_cov`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::group_by_id;
use crate::error::{Error, Result};

/// Designs whose reciprocal condition number falls below this are rejected.
pub const RCOND_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(XᵀX)⁻¹`, formed from the triangular QR factor.
    pub gram_inverse: DMatrix<f64>,
    pub column_names: Vec<String>,
    /// Reciprocal 2-norm condition number of the design.
    pub rcond: f64,
}

impl LinearFit {
    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.column_names = names;
        self
    }

    pub fn fitted(&self, design: &DMatrix<f64>) -> DVector<f64> {
        design * &self.coefficients
    }
}

struct Factored {
    r: DMatrix<f64>,
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rcond: f64,
}

fn factor(design: &DMatrix<f64>) -> Result<Factored> {
    let (n, k) = design.shape();
    if k == 0 {
        return Err(Error::DimensionMismatch("design has no columns".into()));
    }
    if n < k {
        return Err(Error::DimensionMismatch(format!(
            "{n} rows cannot identify {k} coefficients"
        )));
    }
    if design.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("design contains non-finite entries".into()));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::RankDeficient { rcond });
    }
    Ok(Factored { r, qr, rcond })
}

fn upper_inverse(r: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.nrows();
    r.solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("triangular factor checked for conditioning")
}

/// Ordinary least squares via Householder QR.
pub fn ols_fit(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<LinearFit> {
    if design.nrows() != response.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            design.nrows(),
            response.len()
        )));
    }
    let f = factor(design)?;
    let k = design.ncols();
    let mut qty = response.clone();
    f.qr.q_tr_mul(&mut qty);
    let coefficients = f
        .r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .expect("triangular factor checked for conditioning");
    let residuals = response - design * &coefficients;
    let rinv = upper_inverse(&f.r);
    let gram_inverse = &rinv * rinv.transpose();
    let column_names = (0..k).map(|j| format!("x{j}")).collect();
    Ok(LinearFit {
        coefficients,
        residuals,
        gram_inverse,
        column_names,
        rcond: f.rcond,
    })
}

/// Least-squares coefficients for several right-hand sides at once.
pub fn least_squares_multi(design: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if design.nrows() != rhs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, right-hand side has {}",
            design.nrows(),
            rhs.nrows()
        )));
    }
    let f = factor(design)?;
    let k = design.ncols();
    let mut qtb = rhs.clone();
    f.qr.q_tr_mul(&mut qtb);
    Ok(f
        .r
        .solve_upper_triangular(&qtb.rows(0, k).into_owned())
        .expect("triangular factor checked for conditioning"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovFlavor {
    /// Independent rows, no small-sample inflation.
    IndependentHc0,
    /// Independent rows with the n/(n-k) inflation.
    IndependentHc1,
    ClusterRobust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallSample {
    #[default]
    None,
    Hc1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustCov {
    pub matrix: DMatrix<f64>,
    pub flavor: CovFlavor,
    pub cluster_count: Option<usize>,
}

impl RobustCov {
    pub fn std_error(&self, j: usize) -> f64 {
        self.matrix[(j, j)].max(0.0).sqrt()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `(XᵀX)⁻¹ B (XᵀX)⁻¹` with `B = Σ gₖgₖᵀ` over score sums `gₖ`; each row is its
/// own unit unless `clusters` is given.
pub fn sandwich_cov(
    fit: &LinearFit,
    design: &DMatrix<f64>,
    clusters: Option<&[usize]>,
) -> Result<RobustCov> {
    sandwich_cov_with(fit, design, clusters, SmallSample::None)
}

pub fn sandwich_cov_with(
    fit: &LinearFit,
    design: &DMatrix<f64>,
    clusters: Option<&[usize]>,
    adjustment: SmallSample,
) -> Result<RobustCov> {
    let (n, k) = design.shape();
    if fit.residuals.len() != n || fit.gram_inverse.nrows() != k {
        return Err(Error::DimensionMismatch(format!(
            "fit with {} residuals and {} coefficients against a {n}x{k} design",
            fit.residuals.len(),
            fit.gram_inverse.nrows()
        )));
    }
    let (scores, flavor, cluster_count) = match clusters {
        None => {
            let mut s = design.clone();
            for (i, mut row) in s.row_iter_mut().enumerate() {
                row *= fit.residuals[i];
            }
            let flavor = match adjustment {
                SmallSample::None => CovFlavor::IndependentHc0,
                SmallSample::Hc1 => CovFlavor::IndependentHc1,
            };
            (s, flavor, None)
        }
        Some(ids) => {
            if ids.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} cluster ids for {n} rows",
                    ids.len()
                )));
            }
            let groups = group_by_id(ids);
            if groups.len() < 2 {
                return Err(Error::SingleCluster);
            }
            let mut s = DMatrix::zeros(groups.len(), k);
            for (g, rows) in groups.iter().enumerate() {
                for &i in rows {
                    let e = fit.residuals[i];
                    for j in 0..k {
                        s[(g, j)] += e * design[(i, j)];
                    }
                }
            }
            let count = groups.len();
            (s, CovFlavor::ClusterRobust, Some(count))
        }
    };
    let meat = scores.transpose() * &scores;
    let bread = &fit.gram_inverse;
    let mut matrix = bread * meat * bread;
    if adjustment == SmallSample::Hc1 && n > k {
        let factor = match cluster_count {
            None => n as f64 / (n - k) as f64,
            Some(g) => (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - k) as f64),
        };
        matrix *= factor;
    }
    // symmetrize away rounding
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(RobustCov {
        matrix,
        flavor,
        cluster_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Normal equations solved by Gauss-Jordan elimination with partial pivoting.
    fn normal_equations_oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
        let k = x.ncols();
        let mut a = vec![vec![0.0; k + 1]; k];
        for i in 0..k {
            for j in 0..k {
                a[i][j] = (0..x.nrows()).map(|r| x[(r, i)] * x[(r, j)]).sum();
            }
            a[i][k] = (0..x.nrows()).map(|r| x[(r, i)] * y[r]).sum();
        }
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for v in a[col].iter_mut() {
                *v /= d;
            }
            for row in 0..k {
                if row != col {
                    let f = a[row][col];
                    for c in 0..=k {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
        a.iter().map(|row| row[k]).collect()
    }

    #[test]
    fn mean_of_response_for_ones_column() {
        let fit = ols_fit(&DMatrix::from_element(3, 1, 1.0), &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_design_interpolates() {
        let fit = ols_fit(&DMatrix::identity(2, 2), &DVector::from_vec(vec![-0.7, 4.25])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], -0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.coefficients[1], 4.25, epsilon = 1e-14);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(10, |_, _| rng.random_range(-5.0..5.0));
        let fit = ols_fit(&x, &y).unwrap();
        let oracle = normal_equations_oracle(&x, &y);
        for j in 0..3 {
            assert_abs_diff_eq!(fit.coefficients[j], oracle[j], epsilon = 1e-10);
        }
        // residual orthogonality and positive definite gram inverse
        let xte = x.transpose() * &fit.residuals;
        assert!(xte.amax() <= 1e-8 * y.amax() * x.amax());
        assert!(fit.gram_inverse.clone().cholesky().is_some());
    }

    #[test]
    fn collinear_design_is_rank_deficient() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(ols_fit(&x, &y), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn short_design_is_a_dimension_error() {
        let x = DMatrix::from_element(1, 2, 1.0);
        let y = DVector::from_vec(vec![1.0]);
        assert!(matches!(ols_fit(&x, &y), Err(Error::DimensionMismatch(_))));
        let y2 = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(ols_fit(&DMatrix::identity(3, 3), &y2), Err(Error::DimensionMismatch(_))));
    }

    fn scalar_fit(residuals: Vec<f64>) -> LinearFit {
        let n = residuals.len();
        LinearFit {
            coefficients: DVector::from_vec(vec![0.0]),
            residuals: DVector::from_vec(residuals),
            gram_inverse: DMatrix::from_element(1, 1, 1.0 / n as f64),
            column_names: vec!["x0".into()],
            rcond: 1.0,
        }
    }

    #[test]
    fn zero_residuals_give_zero_cov() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let cov = sandwich_cov(&scalar_fit(vec![0.0; 4]), &x, None).unwrap();
        assert_eq!(cov.matrix[(0, 0)], 0.0);
    }

    #[test]
    fn hand_computed_hc0() {
        // (1/2) * (1 + 1) * (1/2)
        let x = DMatrix::from_element(2, 1, 1.0);
        let cov = sandwich_cov(&scalar_fit(vec![1.0, -1.0]), &x, None).unwrap();
        assert_abs_diff_eq!(cov.matrix[(0, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(cov.flavor, CovFlavor::IndependentHc0);
    }

    #[test]
    fn hand_computed_cluster_scores_cancel() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let cov = sandwich_cov(&scalar_fit(vec![1.0, -1.0, 0.0]), &x, Some(&[0, 0, 1])).unwrap();
        assert_abs_diff_eq!(cov.matrix[(0, 0)], 0.0, epsilon = 1e-15);
        assert_eq!(cov.cluster_count, Some(2));
    }

    #[test]
    fn single_cluster_is_rejected() {
        let x = DMatrix::from_element(2, 1, 1.0);
        assert_eq!(
            sandwich_cov(&scalar_fit(vec![1.0, -1.0]), &x, Some(&[4, 4])).unwrap_err(),
            Error::SingleCluster
        );
    }

    #[test]
    fn singleton_clusters_equal_hc0_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let fit = ols_fit(&x, &y).unwrap();
        let ids: Vec<usize> = (0..30).collect();
        let hc0 = sandwich_cov(&fit, &x, None).unwrap();
        let cl = sandwich_cov(&fit, &x, Some(&ids)).unwrap();
        assert_eq!(hc0.matrix, cl.matrix);
    }

    #[test]
    fn hc1_inflates_by_n_over_n_minus_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(20, 2, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let fit = ols_fit(&x, &y).unwrap();
        let hc0 = sandwich_cov(&fit, &x, None).unwrap();
        let hc1 = sandwich_cov_with(&fit, &x, None, SmallSample::Hc1).unwrap();
        assert_abs_diff_eq!(hc1.matrix[(1, 1)], hc0.matrix[(1, 1)] * 20.0 / 18.0, epsilon = 1e-14);
    }
}
