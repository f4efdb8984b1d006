use thiserror::Error;

/// Errors raised by the geometric, dynamical, and quadrature layers.
///
/// Variants are grouped by cause: `Invalid*`/`Wrong*`/`Degenerate*` indicate a
/// precondition violation detectable before any numerics run, while the rest
/// report genuine numerical failures (non-convergence, branch collisions, ...).
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid ellipsoid spec: {0}")]
    InvalidSpec(String),

    #[error("phase point too close to the origin (D = {d:.3e} <= {min:.1e}); bracket undefined off-surface")]
    DegeneratePoint { d: f64, min: f64 },

    #[error("axes {i} and {j} coincide to relative {tol:.1e}; operation requires distinct axes")]
    DegenerateAxes { i: usize, j: usize, tol: f64 },

    #[error("operation requires symmetry tag {expected}, spec has {found}")]
    WrongSymmetry { expected: String, found: String },

    #[error("leaf projection did not converge in {0} Newton steps")]
    ProjectionFailed(usize),

    #[error("point is not on the x_{i} = y_{i} = 0 subflow (|x_i| or |y_i| > {tol:.1e})")]
    NotOnSubflow { i: usize, tol: f64 },

    #[error("zero level set of the section identity is empty")]
    ContourFailed,

    #[error("coordinate hyperplane too close: |x_{i}| = {val:.3e} < {tol:.1e}; ellipsoidal roots collide with poles")]
    CoordinateSingularity { i: usize, val: f64, tol: f64 },

    #[error("integrals violate the leaf relation: |sum F_i/alpha_i| = {0:.3e}")]
    LeafIncompatible(f64),

    #[error("(j, g) = ({j}, {g}) lies outside the closed energy-momentum image at h = {h}")]
    OutsideImage { h: f64, j: f64, g: f64 },

    #[error("separated momentum evaluated at a pole: |lambda - alpha_{k}| < {tol:.1e}")]
    PoleHit { k: usize, tol: f64 },

    #[error("branch point within pole guard of alpha_1 at zero angular momentum (distance {dist:.3e})")]
    PoleCollision { dist: f64 },

    #[error("reduction undefined on the x_1 = x_2 = 0 stratum")]
    AxisPoint,

    #[error("angular momentum is zero; residue at the pole is undefined")]
    ZeroMomentum,

    #[error("transition entry {value} is {dist:.3e} from the nearest integer (tolerance {tol:.1e})")]
    NonIntegerTransition { value: f64, dist: f64, tol: f64 },

    #[error("continuation loop leaves the energy-momentum image at (j, g) = ({j}, {g})")]
    LoopOutsideImage { j: f64, g: f64 },

    #[error("matrix is not parabolic: (M - I)^2 != 0")]
    NotParabolic,

    #[error("argument outside the function domain: {0}")]
    DomainError(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
