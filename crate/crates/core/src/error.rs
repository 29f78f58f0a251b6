use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("design matrix is numerically rank deficient (reciprocal condition number {rcond:.3e})")]
    RankDeficient { rcond: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cluster ids collapse to a single group; cluster-robust variance is undefined")]
    SingleCluster,
    #[error("point {point} lies outside the spline domain [{lo}, {hi}]")]
    PointOutsideDomain { point: f64, lo: f64, hi: f64 },
    #[error("spline degrees of freedom {df} below the minimum of {min}")]
    DfTooSmall { df: usize, min: usize },
    #[error("thin-plate basis needs at least {df} anchors, got {anchors}")]
    TooFewAnchors { anchors: usize, df: usize },
    #[error("only {distinct} distinct anchors remain after collapsing duplicates; {df} required")]
    DuplicateAnchorsOnly { distinct: usize, df: usize },
    #[error("non-finite value in covariate '{column}' at row {row}")]
    NonFiniteCovariate { column: String, row: usize },
    #[error("missing covariate '{0}'")]
    MissingCovariate(String),
    #[error("cross-validation needs at least {min} held-out units, got {units}")]
    TooFewClusters { units: usize, min: usize },
    #[error("orthogonalized exposure has no residual variation (denominator {denom:.3e})")]
    DegenerateExposure { denom: f64 },
    #[error("bias correction factor 1 + b = {one_plus_b:.4} is too close to zero")]
    CorrectionBlowup { one_plus_b: f64 },
    #[error("all {replicates} bootstrap replicates failed")]
    AllReplicatesFailed { replicates: usize },
    #[error("circulant embedding has a negative eigenvalue ({min_eigenvalue:.3e}) at the largest embedding size")]
    SpectrumNegative { min_eigenvalue: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of the numerical pipeline, as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::SingleCluster
                | Error::DegenerateExposure { .. }
                | Error::CorrectionBlowup { .. }
                | Error::AllReplicatesFailed { .. }
                | Error::SpectrumNegative { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
