use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular Jacobian: |det| = {det:e} is below the floor {floor:e}")]
    SingularJacobian { det: f64, floor: f64 },

    #[error("bad Fourier order n = {0}: must be even and at least 4")]
    BadOrder(usize),

    #[error("fine grid N = {fine} is too coarse for order n = {order}: the rule is N >= 4n")]
    GridTooCoarse { order: usize, fine: usize },

    #[error("power iteration did not converge in {iterations} iterations (last Rayleigh change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("leading eigenvalue is not simple: the start vector is already invariant")]
    NonUniqueLeading,

    #[error("resolvent is singular: pivot {pivot:e} at step {step}")]
    SingularResolvent { pivot: f64, step: usize },

    #[error("right-hand side is not mean-zero: |coeff(0,0)| = {0:e}")]
    NotMeanZero(f64),

    #[error("degenerate objective: largest raw numerator magnitude {max_numerator:e}")]
    DegenerateObjective { max_numerator: f64 },

    #[error("no raw numerator for component {component}, mode ({k1},{k2})")]
    MissingNumerator { component: usize, k1: i64, k2: i64 },

    #[error("perturbed map is not a local diffeomorphism: det DT changes sign near ({x1}, {x2})")]
    DetSignFlip { x1: f64, x2: f64 },

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("optimality violated at trial {trial}: J(random) / J(optimal) = {ratio}")]
    OptimalityViolated { trial: usize, ratio: f64 },

    #[error("non-Hermitian field: imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("order mismatch: expected n = {expected}, found n = {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("config error{}: {field}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("malformed data in {what}: {message}")]
    Format { what: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(line: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn format(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            message: message.into(),
        }
    }
}
