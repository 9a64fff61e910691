use alloc::string::String;
use core::fmt;

/// Which positive-definiteness condition of a parameterization failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// The marginal scale `S`.
    S,
    /// The innovation scale `V = S - F S F'`.
    V,
    /// The second-level innovation scale `W = V - H V H'`.
    W,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::S => f.write_str("S"),
            Condition::V => f.write_str("V = S - FSF'"),
            Condition::W => f.write_str("W = V - HVH'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    NotPositiveDefinite,
    NotSymmetric,
    NotSquare,
    DimensionMismatch { expected: usize, found: usize },
    InvalidDof { dof: f64, min: f64 },
    InvalidShape(&'static str),
    InvalidParameter(&'static str),
    NotStationary(Condition),
    NotCoDiagonalizable,
    IndexError,
    ScheduleBelowMinimum { t: usize, value: f64 },
    ProposalInvalid,
    GridInsufficient,
    NumericalInconsistency(&'static str),
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
            Error::NotSymmetric => f.write_str("matrix is not symmetric"),
            Error::NotSquare => f.write_str("matrix is not square"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidDof { dof, min } => {
                write!(f, "degrees of freedom {dof} must exceed {min}")
            }
            Error::InvalidShape(what) => write!(f, "invalid shape parameter: {what}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NotStationary(c) => write!(f, "not stationary: {c} is not positive definite"),
            Error::NotCoDiagonalizable => f.write_str("F and S do not share eigenvectors"),
            Error::IndexError => f.write_str("block index out of range"),
            Error::ScheduleBelowMinimum { t, value } => {
                write!(f, "degree-of-freedom schedule value r_{t} = {value} is not above 2")
            }
            Error::ProposalInvalid => f.write_str("proposed hyperparameters are invalid"),
            Error::GridInsufficient => f.write_str("quadrature grid failed to converge"),
            Error::NumericalInconsistency(what) => write!(f, "numerical inconsistency: {what}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
