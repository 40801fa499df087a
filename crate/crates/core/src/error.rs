use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("derivative order {0} is not supported (maximum 4)")]
    UnsupportedDerivative(usize),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("nearest-point projection did not converge for ({x}, {y})")]
    ProjectionFailure { x: f64, y: f64 },

    #[error("ray grazes the boundary at bounce {bounce} (|<v,N>| = {cos_normal:.3e})")]
    Grazing { bounce: usize, cos_normal: f64 },

    #[error("ray geometry is inconsistent with a convex table: {0}")]
    Geometry(String),

    #[error("line family misses the table interior at u = {0}")]
    Domain(f64),

    #[error("coincident consecutive vertices in a path configuration")]
    DegenerateConfiguration,

    #[error("Jacobian is singular (|det| = {det:.3e}): endpoints are conjugate along the path")]
    SingularJacobian { det: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("path is not a certified billiard path (residual {residual:.3e}, min angle {min_alpha:.3e})")]
    InvalidPath { residual: f64, min_alpha: f64 },

    #[error("no certified billiard path found with {bounces} bounces")]
    NoPath { bounces: usize },

    #[error("every vertex of the best {bounces}-bounce path repeats an existing vertex")]
    PigeonholeFailure { bounces: usize },

    #[error("perturbation destroys strict convexity (min curvature {min_kappa:.3e})")]
    AmplitudeTooLarge { min_kappa: f64 },

    #[error("perturbation costs d2 = {effect:.3e}, above the budget {budget:.3e}")]
    BudgetExceeded { effect: f64, budget: f64 },

    #[error("bump support around s = {center} reaches protected parameter {protected}")]
    SupportCollision { center: f64, protected: f64 },

    #[error("target point is outside the tubular reach of the boundary")]
    TargetOutOfReach,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no curvature scale z within budget separates the endpoints: {0}")]
    ConjugacyScanFailed(String),
}
