use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything the core library can refuse to do.
///
/// The `Display` text is stable; the CLI prints it verbatim.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    InvalidDimension(usize),
    DimensionMismatch { left: usize, right: usize },
    EntryCount { dim: usize, got: usize },
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    /// `nu = 0` together with `mu2 > 0`: the stress law has no convex potential.
    PotentialUnavailable,
    /// Gradient requested where the potential is not differentiable.
    AtPlugPoint,
    /// A plastic operator was evaluated where its denominator vanishes.
    UndefinedAtPlug,
    NotAntisymmetric { defect: f64 },
    /// The `nu = 0` subdifferential needs the plug matrix itself.
    MissingPlugMatrix,
    /// The candidate lies inside the subdifferential; nothing to certify.
    NoWitness,
    ZeroRegularization,
    Cfl { dt: f64, limit: f64 },
    Diverged { step: u64, t: f64 },
    NewtonFailed { step: u64, residual: f64 },
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension(d) => write!(f, "matrix dimension must be 2 or 3, got {d}"),
            Error::DimensionMismatch { left, right } => {
                write!(f, "matrix dimension mismatch: {left} vs {right}")
            }
            Error::EntryCount { dim, got } => {
                write!(f, "a {dim}x{dim} matrix needs {} entries, got {got}", dim * dim)
            }
            Error::InvalidParameter {
                name,
                value,
                requirement,
            } => write!(f, "invalid parameter {name} = {value}: must be {requirement}"),
            Error::PotentialUnavailable => {
                f.write_str("potential unavailable: nu = 0 requires mu2 = 0")
            }
            Error::AtPlugPoint => f.write_str("potential is not differentiable at a plug point"),
            Error::UndefinedAtPlug => f.write_str("plastic operator undefined at a plug point"),
            Error::NotAntisymmetric { defect } => {
                write!(f, "micro-rotation is not antisymmetric (|sym part| = {defect:e})")
            }
            Error::MissingPlugMatrix => {
                f.write_str("nu = 0 subdifferential test requires the plug matrix")
            }
            Error::NoWitness => f.write_str("point lies inside the subdifferential; no witness"),
            Error::ZeroRegularization => f.write_str("regularization index n must be >= 1"),
            Error::Cfl { dt, limit } => {
                write!(f, "time step {dt:e} exceeds the stability limit {limit:e}")
            }
            Error::Diverged { step, t } => write!(f, "solution diverged at step {step} (t = {t})"),
            Error::NewtonFailed { step, residual } => write!(
                f,
                "implicit solve did not converge at step {step} (residual {residual:e})"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
