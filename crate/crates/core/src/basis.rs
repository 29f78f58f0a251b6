//! The exposure design function R(s): geographic covariates plus a cubic
//! B-spline block (1D) or a low-rank thin-plate regression spline block (2D).
//!
//! Column order is always `[intercept | covariates | spline]`. When an
//! intercept is present the spline block is built one dimension larger and
//! its constant-spanning column is dropped, so `spline_df` never duplicates
//! the intercept and `r = q + spline_df + intercept`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Location, MonitorDataset};
use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// Clamped cubic B-spline basis with equally spaced interior knots.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    df: usize,
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(df: usize, domain: (f64, f64)) -> Result<Self> {
        if df < DEGREE + 1 {
            return Err(Error::DfTooSmall { df, min: DEGREE + 1 });
        }
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!("bad spline domain ({lo}, {hi})")));
        }
        let interior = df - DEGREE - 1;
        let mut knots = vec![lo; DEGREE + 1];
        for k in 1..=interior {
            knots.push(lo + (hi - lo) * k as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Ok(Self { df, lo, hi, knots })
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Writes the `df` basis values at `s` into `out`.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) -> Result<()> {
        if !(s >= self.lo && s <= self.hi) {
            return Err(Error::PointOutsideDomain {
                point: s,
                lo: self.lo,
                hi: self.hi,
            });
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        // knot span: t[span] <= s < t[span+1], with the right end closed
        let span = if s >= self.hi {
            self.df - 1
        } else {
            let t = &self.knots;
            let mut span = DEGREE;
            while span < self.df - 1 && s >= t[span + 1] {
                span += 1;
            }
            span
        };
        let t = &self.knots;
        let mut n = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = s - t[span + 1 - j];
            right[j] = t[span + j] - s;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        for (r, v) in n.iter().enumerate() {
            out[span - DEGREE + r] = *v;
        }
        Ok(())
    }

    pub fn evaluate(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(points.len(), self.df);
        let mut row = vec![0.0; self.df];
        for (i, &s) in points.iter().enumerate() {
            self.eval_into(s, &mut row)?;
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }
}

/// Cubic B-spline basis with `df` columns on `domain`.
pub fn bspline_basis(points: &[f64], df: usize, domain: (f64, f64)) -> Result<DMatrix<f64>> {
    BSplineBasis::new(df, domain)?.evaluate(points)
}

fn tps_kernel(r: f64) -> f64 {
    if r > 0.0 {
        r * r * r.ln()
    } else {
        0.0
    }
}

/// Low-rank thin-plate regression spline frozen on a set of anchor points.
///
/// The `r² log r` kernel matrix on the distinct anchors is eigendecomposed and
/// truncated to the `df` leading eigenvectors; the side constraint that makes
/// the radial part orthogonal to the linear polynomials removes three of them,
/// leaving `df − 3` radial columns next to `(1, s₁, s₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinPlateBasis {
    anchors: Vec<Location>,
    df: usize,
    /// Maps kernel evaluations against the anchors to radial columns.
    radial_map: DMatrix<f64>,
}

impl ThinPlateBasis {
    pub fn new(anchors: &[Location], df: usize) -> Result<Self> {
        if df < 3 {
            return Err(Error::DfTooSmall { df, min: 3 });
        }
        if anchors.len() < df {
            return Err(Error::TooFewAnchors {
                anchors: anchors.len(),
                df,
            });
        }
        let mut distinct: Vec<Location> = Vec::with_capacity(anchors.len());
        for a in anchors {
            if !distinct.iter().any(|d| d.x == a.x && d.y == a.y) {
                distinct.push(*a);
            }
        }
        if distinct.len() < df {
            return Err(Error::DuplicateAnchorsOnly {
                distinct: distinct.len(),
                df,
            });
        }
        let n = distinct.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| tps_kernel(distinct[i].distance(&distinct[j])));
        let n_radial = df - 3;
        let radial_map = if n_radial == 0 {
            DMatrix::zeros(n, 0)
        } else {
            let eig = SymmetricEigen::new(kernel);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                eig.eigenvalues[b]
                    .abs()
                    .partial_cmp(&eig.eigenvalues[a].abs())
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let uk = DMatrix::from_fn(n, df, |i, j| eig.eigenvectors[(i, order[j])]);
            let poly = DMatrix::from_fn(n, 3, |i, j| match j {
                0 => 1.0,
                1 => distinct[i].x,
                _ => distinct[i].y,
            });
            // null space of C = Tᵀ U_k: eigenvectors of CᵀC with zero eigenvalue
            let c = poly.transpose() * &uk;
            let ctc = SymmetricEigen::new(c.transpose() * &c);
            let mut idx: Vec<usize> = (0..df).collect();
            idx.sort_by(|&a, &b| ctc.eigenvalues[a].partial_cmp(&ctc.eigenvalues[b]).unwrap());
            let z = DMatrix::from_fn(df, n_radial, |i, j| ctc.eigenvectors[(i, idx[j])]);
            let mut map = uk * z;
            // unit RMS columns at the anchors keep the design well scaled
            let at_anchors = DMatrix::from_fn(n, n, |i, j| tps_kernel(distinct[i].distance(&distinct[j]))) * &map;
            for j in 0..n_radial {
                let rms = (at_anchors.column(j).norm_squared() / n as f64).sqrt();
                if rms > 0.0 {
                    let mut c = map.column_mut(j);
                    c /= rms;
                }
            }
            map
        };
        Ok(Self {
            anchors: distinct,
            df,
            radial_map,
        })
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn anchors(&self) -> &[Location] {
        &self.anchors
    }

    /// Columns `[1, s₁, s₂, radial₁ … radial_{df−3}]`.
    pub fn evaluate(&self, points: &[Location]) -> DMatrix<f64> {
        let n_radial = self.df - 3;
        let mut out = DMatrix::zeros(points.len(), self.df);
        let mut k = DVector::zeros(self.anchors.len());
        for (i, p) in points.iter().enumerate() {
            out[(i, 0)] = 1.0;
            out[(i, 1)] = p.x;
            out[(i, 2)] = p.y;
            if n_radial > 0 {
                for (a, anchor) in self.anchors.iter().enumerate() {
                    k[a] = tps_kernel(p.distance(anchor));
                }
                let row = self.radial_map.tr_mul(&k);
                for j in 0..n_radial {
                    out[(i, 3 + j)] = row[j];
                }
            }
        }
        out
    }
}

/// Builds a thin-plate basis with `df` columns from `anchors`.
pub fn thinplate_basis(anchors: &[Location], df: usize) -> Result<ThinPlateBasis> {
    ThinPlateBasis::new(anchors, df)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineKind {
    None,
    Bspline1d,
    Thinplate2d,
}

#[derive(Debug, Clone, PartialEq)]
enum SplineBlock {
    None,
    BSpline(BSplineBasis),
    ThinPlate(Arc<ThinPlateBasis>),
}

/// A fully instantiated (frozen) exposure basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub covariate_names: Vec<String>,
    pub spline_kind: SplineKind,
    pub spline_df: usize,
    pub anchor_locations: Vec<Location>,
    pub intercept: bool,
    block: SplineBlock,
}

impl BasisSpec {
    pub fn covariates_only(covariate_names: Vec<String>, intercept: bool) -> Self {
        Self {
            covariate_names,
            spline_kind: SplineKind::None,
            spline_df: 0,
            anchor_locations: Vec::new(),
            intercept,
            block: SplineBlock::None,
        }
    }

    pub fn bspline(
        covariate_names: Vec<String>,
        spline_df: usize,
        domain: (f64, f64),
        intercept: bool,
    ) -> Result<Self> {
        let full = spline_df + usize::from(intercept);
        if spline_df == 0 {
            return Err(Error::DfTooSmall { df: 0, min: 1 });
        }
        let basis = BSplineBasis::new(full, domain)?;
        Ok(Self {
            covariate_names,
            spline_kind: SplineKind::Bspline1d,
            spline_df,
            anchor_locations: Vec::new(),
            intercept,
            block: SplineBlock::BSpline(basis),
        })
    }

    pub fn thin_plate(
        covariate_names: Vec<String>,
        spline_df: usize,
        anchors: &[Location],
        intercept: bool,
    ) -> Result<Self> {
        if spline_df == 0 {
            return Err(Error::DfTooSmall { df: 0, min: 1 });
        }
        let basis = ThinPlateBasis::new(anchors, spline_df + usize::from(intercept))?;
        Ok(Self {
            covariate_names,
            spline_kind: SplineKind::Thinplate2d,
            spline_df,
            anchor_locations: anchors.to_vec(),
            intercept,
            block: SplineBlock::ThinPlate(Arc::new(basis)),
        })
    }

    /// Number of design columns r.
    pub fn ncols(&self) -> usize {
        usize::from(self.intercept) + self.covariate_names.len() + self.spline_df
    }

    pub fn q(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.ncols());
        if self.intercept {
            names.push("(intercept)".to_string());
        }
        names.extend(self.covariate_names.iter().cloned());
        let prefix = match self.spline_kind {
            SplineKind::Bspline1d => "bs",
            SplineKind::Thinplate2d => "tp",
            SplineKind::None => "",
        };
        names.extend((1..=self.spline_df).map(|k| format!("{prefix}{k}")));
        names
    }

    /// The same recipe rebuilt on a different anchor set. Only thin-plate
    /// blocks depend on anchors; other kinds are returned unchanged.
    pub fn with_anchors(&self, anchors: &[Location]) -> Result<Self> {
        match self.spline_kind {
            SplineKind::Thinplate2d => {
                Self::thin_plate(self.covariate_names.clone(), self.spline_df, anchors, self.intercept)
            }
            _ => Ok(self.clone()),
        }
    }

    pub fn bspline_domain(&self) -> Option<(f64, f64)> {
        match &self.block {
            SplineBlock::BSpline(b) => Some(b.domain()),
            _ => None,
        }
    }

    /// Spline columns only, constant column already removed when needed.
    fn spline_columns(&self, locations: &[Location]) -> Result<DMatrix<f64>> {
        let drop = usize::from(self.intercept);
        let full = match &self.block {
            SplineBlock::None => return Ok(DMatrix::zeros(locations.len(), 0)),
            SplineBlock::BSpline(b) => {
                let pts: Vec<f64> = locations.iter().map(|l| l.x).collect();
                b.evaluate(&pts)?
            }
            SplineBlock::ThinPlate(t) => t.evaluate(locations),
        };
        Ok(full.columns(drop, full.ncols() - drop).into_owned())
    }
}

/// An un-instantiated basis recipe; thin-plate anchors and default B-spline
/// domains come from whichever monitor set it is built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTemplate {
    pub covariate_names: Vec<String>,
    pub spline_kind: SplineKind,
    #[serde(default)]
    pub spline_df: usize,
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub domain: Option<(f64, f64)>,
}

fn default_true() -> bool {
    true
}

impl BasisTemplate {
    pub fn instantiate(&self, monitors: &MonitorDataset) -> Result<BasisSpec> {
        self.instantiate_at(&monitors.locations)
    }

    pub fn instantiate_at(&self, monitor_locations: &[Location]) -> Result<BasisSpec> {
        match self.spline_kind {
            SplineKind::None => {
                if self.spline_df != 0 {
                    return Err(Error::InvalidParameter(
                        "spline_df must be 0 when spline_kind is none".into(),
                    ));
                }
                Ok(BasisSpec::covariates_only(self.covariate_names.clone(), self.intercept))
            }
            SplineKind::Bspline1d => {
                let domain = match self.domain {
                    Some(d) => d,
                    None => default_domain(monitor_locations)?,
                };
                BasisSpec::bspline(self.covariate_names.clone(), self.spline_df, domain, self.intercept)
            }
            SplineKind::Thinplate2d => BasisSpec::thin_plate(
                self.covariate_names.clone(),
                self.spline_df,
                monitor_locations,
                self.intercept,
            ),
        }
    }
}

/// Observed monitor range expanded by 1% on each side.
pub fn default_domain(locations: &[Location]) -> Result<(f64, f64)> {
    let lo = locations.iter().map(|l| l.x).fold(f64::INFINITY, f64::min);
    let hi = locations.iter().map(|l| l.x).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::InvalidParameter("monitor locations span no range".into()));
    }
    let pad = 0.01 * (hi - lo);
    Ok((lo - pad, hi + pad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub point_locations: Vec<Location>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Assembles R(s) at `locations` from the `q` covariate columns.
pub fn design_matrix(
    spec: &BasisSpec,
    covariate_values: &DMatrix<f64>,
    locations: &[Location],
) -> Result<DesignMatrix> {
    let n = locations.len();
    if covariate_values.ncols() != spec.q() || covariate_values.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n}x{} covariates, got {}x{}",
            spec.q(),
            covariate_values.nrows(),
            covariate_values.ncols()
        )));
    }
    for j in 0..spec.q() {
        if let Some(row) = covariate_values.column(j).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCovariate {
                column: spec.covariate_names[j].clone(),
                row,
            });
        }
    }
    let spline = spec.spline_columns(locations)?;
    let mut values = DMatrix::zeros(n, spec.ncols());
    let mut col = 0;
    if spec.intercept {
        values.column_mut(0).fill(1.0);
        col = 1;
    }
    for j in 0..spec.q() {
        values.set_column(col + j, &covariate_values.column(j));
    }
    col += spec.q();
    for j in 0..spline.ncols() {
        values.set_column(col + j, &spline.column(j));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite basis value".into()));
    }
    Ok(DesignMatrix {
        values,
        column_names: spec.column_names(),
        point_locations: locations.to_vec(),
    })
}

/// R(s) at the monitor locations.
pub fn monitor_design(spec: &BasisSpec, monitors: &MonitorDataset) -> Result<DesignMatrix> {
    let cov = monitors.covariates.select(&spec.covariate_names)?;
    design_matrix(spec, &cov, &monitors.locations)
}

/// R(s) at the subject locations.
pub fn subject_design(spec: &BasisSpec, subjects: &crate::data::SubjectDataset) -> Result<DesignMatrix> {
    let cov = subjects.covariates.select(&spec.covariate_names)?;
    design_matrix(spec, &cov, &subjects.locations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::ols_fit;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook Cox–de Boor recursion, half-open spans with the final span closed.
    fn cox_de_boor(t: &[f64], i: usize, p: usize, s: f64, last: usize) -> f64 {
        if p == 0 {
            let inside = t[i] <= s && s < t[i + 1];
            let right_end = s == t[t.len() - 1] && i == last;
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[i + p] - t[i];
        if d1 > 0.0 {
            v += (s - t[i]) / d1 * cox_de_boor(t, i, p - 1, s, last);
        }
        let d2 = t[i + p + 1] - t[i + 1];
        if d2 > 0.0 {
            v += (t[i + p + 1] - s) / d2 * cox_de_boor(t, i + 1, p - 1, s, last);
        }
        v
    }

    #[test]
    fn matches_cox_de_boor_oracle() {
        let b = BSplineBasis::new(9, (0.0, 10.0)).unwrap();
        let t = b.knots().to_vec();
        // index of the last non-degenerate degree-0 span
        let last = (0..t.len() - 1).rev().find(|&i| t[i] < t[i + 1]).unwrap();
        let pts: Vec<f64> = (0..50).map(|k| 10.0 * k as f64 / 49.0).collect();
        let m = b.evaluate(&pts).unwrap();
        for (i, &s) in pts.iter().enumerate() {
            for j in 0..9 {
                assert_abs_diff_eq!(m[(i, j)], cox_de_boor(&t, j, 3, s, last), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rows_partition_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<f64> = (0..10_000).map(|_| rng.random_range(-2.0..=5.0)).collect();
        for df in [4, 7, 13, 25] {
            let m = bspline_basis(&pts, df, (-2.0, 5.0)).unwrap();
            for row in m.row_iter() {
                assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn four_df_reproduces_cubics() {
        let pts: Vec<f64> = (0..40).map(|k| k as f64 / 39.0).collect();
        let x = bspline_basis(&pts, 4, (0.0, 1.0)).unwrap();
        let y = DVector::from_iterator(40, pts.iter().map(|s| s * s * s));
        let fit = ols_fit(&x, &y).unwrap();
        assert!(fit.residuals.amax() <= 1e-10);
    }

    #[test]
    fn bspline_errors() {
        assert_eq!(BSplineBasis::new(3, (0.0, 1.0)).unwrap_err(), Error::DfTooSmall { df: 3, min: 4 });
        assert!(matches!(
            bspline_basis(&[1.5], 5, (0.0, 1.0)),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    fn random_anchors(n: usize, seed: u64) -> Vec<Location> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Location::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)))
            .collect()
    }

    #[test]
    fn three_df_is_affine() {
        let anchors = random_anchors(40, 1);
        let tp = ThinPlateBasis::new(&anchors, 3).unwrap();
        let x = tp.evaluate(&anchors);
        let y = DVector::from_iterator(40, anchors.iter().map(|a| 2.0 - 0.5 * a.x + 3.0 * a.y));
        let fit = ols_fit(&x, &y).unwrap();
        assert!(fit.residuals.amax() <= 1e-9);
    }

    #[test]
    fn full_rank_interpolates() {
        let anchors = random_anchors(25, 2);
        let tp = ThinPlateBasis::new(&anchors, 25).unwrap();
        let x = tp.evaluate(&anchors);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = DVector::from_fn(25, |_, _| rng.random_range(-3.0..3.0));
        let fit = ols_fit(&x, &y).unwrap();
        assert!(fit.residuals.amax() <= 1e-8);
    }

    #[test]
    fn frozen_basis_is_deterministic() {
        let anchors = random_anchors(60, 3);
        let a = ThinPlateBasis::new(&anchors, 10).unwrap();
        let b = ThinPlateBasis::new(&anchors, 10).unwrap();
        assert_eq!(a.evaluate(&anchors), a.evaluate(&anchors));
        assert_eq!(a.evaluate(&anchors), b.evaluate(&anchors));
    }

    #[test]
    fn translation_leaves_fitted_values_unchanged() {
        let anchors = random_anchors(50, 5);
        let shifted: Vec<Location> = anchors.iter().map(|a| Location::new(a.x + 7.0, a.y - 3.0)).collect();
        let y = DVector::from_iterator(50, anchors.iter().map(|a| (a.x / 5.0).sin() + a.y * 0.1));
        let f1 = ols_fit(&ThinPlateBasis::new(&anchors, 8).unwrap().evaluate(&anchors), &y).unwrap();
        let x2 = ThinPlateBasis::new(&shifted, 8).unwrap().evaluate(&shifted);
        let f2 = ols_fit(&x2, &y).unwrap();
        assert!((&f1.residuals - &f2.residuals).amax() <= 1e-8);
    }

    #[test]
    fn duplicate_anchors_collapse() {
        let mut anchors = random_anchors(4, 6);
        anchors.extend(anchors.clone());
        let tp = ThinPlateBasis::new(&anchors, 4).unwrap();
        assert_eq!(tp.anchors().len(), 4);
        assert_eq!(
            ThinPlateBasis::new(&anchors, 6).unwrap_err(),
            Error::DuplicateAnchorsOnly { distinct: 4, df: 6 }
        );
        assert_eq!(
            ThinPlateBasis::new(&anchors[..2], 3).unwrap_err(),
            Error::TooFewAnchors { anchors: 2, df: 3 }
        );
    }

    #[test]
    fn design_column_layout() {
        let spec = BasisSpec::covariates_only(vec![], true);
        let d = design_matrix(&spec, &DMatrix::zeros(3, 0), &[Location::on_line(0.0); 3]).unwrap();
        assert_eq!(d.values, DMatrix::from_element(3, 1, 1.0));

        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let spec = BasisSpec::bspline(names, 5, (0.0, 1.0), true).unwrap();
        assert_eq!(spec.ncols(), 9);
        let locs: Vec<Location> = (0..6).map(|k| Location::on_line(k as f64 / 5.0)).collect();
        let cov = DMatrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64);
        let d = design_matrix(&spec, &cov, &locs).unwrap();
        assert_eq!(d.ncols(), 9);
        assert_eq!(d.column_names[0], "(intercept)");
        assert_eq!(d.column_names[1..4], ["a", "b", "c"]);
        assert_eq!(d.values[(2, 2)], 7.0);
        // spline block with intercept still full rank
        assert!(ols_fit(&d.values.columns(4, 5).into_owned().insert_column(0, 1.0), &DVector::zeros(6)).is_ok());
    }

    #[test]
    fn design_rejects_bad_covariates() {
        let spec = BasisSpec::covariates_only(vec!["a".into()], true);
        let locs = [Location::on_line(0.0); 2];
        let bad = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert_eq!(
            design_matrix(&spec, &bad, &locs).unwrap_err(),
            Error::NonFiniteCovariate { column: "a".into(), row: 1 }
        );
        assert!(matches!(
            design_matrix(&spec, &DMatrix::zeros(2, 2), &locs),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
