use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("component count mismatch: expected {expected}, found {found}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("non-finite sample in input field")]
    NonFinite,
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("inadmissible parameters: {0}")]
    InadmissibleParameters(String),
    #[error("not in range of -Δ: component {component} has mean {mean:e}")]
    NotInRange { component: usize, mean: f64 },
    #[error("missing density component: gamma = 1 requires rho")]
    MissingDensity,
    #[error("blow-up/instability detected at t = {t}")]
    BlowUp { t: f64 },
    #[error("diffeomorphism breakdown at t = {t}: Jacobian determinant {det:e}")]
    DiffeoBreakdown { t: f64, det: f64 },
    #[error("map is not monotone: 1 + d/dx displacement = {slope:e} at x = {x}")]
    NonMonotone { x: f64, slope: f64 },
    #[error("singular deformation gradient at sample {index}")]
    SingularJacobian { index: usize },
    #[error(
        "no inertia operator of the form diag(A, A) solves the mode identity at n = {n:?}, b = {b}"
    )]
    NoDiagonalInertia { n: [i64; 2], b: f64 },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid time stepping: {0}")]
    InvalidStepping(String),
}
