use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input contained NaN or an infinity.
    NonFinite,
    DimensionMismatch { expected: usize, found: usize },
    ShapeMismatch(&'static str),
    /// The L2 dual-norm maximizer of a zero vector is undefined.
    ZeroGradient,
    /// Sign-vertex enumeration would exceed `2^cap` vertices.
    DimensionTooLarge { dim: usize, cap: usize },
    /// A ReLU-only operation was applied to a smooth network, or vice versa.
    WrongActivation,
    /// A ReLU pre-activation is within tolerance of zero.
    DegeneratePoint,
    EmptyInventory,
    EmptyDataset,
    AllDegenerate,
    NoRootSample { class: usize },
    CellEscape { alpha: f64 },
    /// No step length in the schedule moves the root farther than `N * epsilon`.
    ScheduleTooShort,
    /// The witness direction does not increase the loss.
    NoAscentRay,
    /// A coupling would move mass between different labels.
    LabelMismatch,
    TooManyAtoms { atoms: usize, cap: usize },
    InvalidConfig(&'static str),
    ClassOutOfRange { class: usize, classes: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite => write!(f, "non-finite value in input"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::ZeroGradient => write!(f, "zero gradient has no L2 dual-norm maximizer"),
            Error::DimensionTooLarge { dim, cap } => {
                write!(f, "sign-vertex enumeration over dimension {dim} exceeds cap {cap}")
            }
            Error::WrongActivation => write!(f, "operation not defined for this activation"),
            Error::DegeneratePoint => write!(f, "point lies on a ReLU kink"),
            Error::EmptyInventory => write!(f, "mask inventory is empty"),
            Error::EmptyDataset => write!(f, "dataset is empty"),
            Error::AllDegenerate => write!(f, "every sample lies on a ReLU kink"),
            Error::NoRootSample { class } => write!(f, "no sample with class {class}"),
            Error::CellEscape { alpha } => write!(f, "ray left its cell at step {alpha}"),
            Error::ScheduleTooShort => {
                write!(f, "no step length in the schedule exceeds the transport budget")
            }
            Error::NoAscentRay => write!(f, "witness direction does not increase the loss"),
            Error::LabelMismatch => write!(f, "coupling moves mass across labels"),
            Error::TooManyAtoms { atoms, cap } => {
                write!(f, "{atoms} atoms exceed the exact solver cap of {cap}")
            }
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::ClassOutOfRange { class, classes } => {
                write!(f, "class {class} out of range for {classes} classes")
            }
        }
    }
}

impl core::error::Error for Error {}
