use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Variants map one-to-one onto the failure modes of the individual
/// operations; the CLI turns every variant except `Io` into a domain error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point has non-positive depth {0} in the camera frame")]
    NonPositiveDepth(f64),
    #[error("matrix is degenerate (smallest singular value {0:e})")]
    DegenerateMatrix(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("SDF gradient vanishes at ({x}, {y}, {z})")]
    VanishingGradient { x: f64, y: f64, z: f64 },
    #[error("union of zero shapes")]
    EmptyUnion,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("negative density {0}")]
    NegativeDensity(f64),
    #[error("point with radius {0} lies inside the unit sphere")]
    InsideUnitSphere(f64),
    #[error("ray origin at radius {0} is not inside the unit sphere")]
    OriginOutsideSphere(f64),
    #[error("scene bounds have zero volume or no content")]
    EmptyScene,
    #[error("grid dims {dims:?} are not divisible by patch size {patch}")]
    IndivisibleDims { dims: [usize; 3], patch: usize },
    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),
    #[error("index ({0}, {1}) is out of bounds")]
    OutOfBounds(i64, i64),
    #[error("point set is empty")]
    EmptySet,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: u32, n_classes: u32 },
    #[error("trajectory path is empty")]
    EmptyPath,
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveDepth(_) => "NonPositiveDepth",
            Error::DegenerateMatrix(_) => "DegenerateMatrix",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::VanishingGradient { .. } => "VanishingGradient",
            Error::EmptyUnion => "EmptyUnion",
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::NegativeDensity(_) => "NegativeDensity",
            Error::InsideUnitSphere(_) => "InsideUnitSphere",
            Error::OriginOutsideSphere(_) => "OriginOutsideSphere",
            Error::EmptyScene => "EmptyScene",
            Error::IndivisibleDims { .. } => "IndivisibleDims",
            Error::DimsMismatch(_) => "DimsMismatch",
            Error::OutOfBounds(..) => "OutOfBounds",
            Error::EmptySet => "EmptySet",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::EmptyPath => "EmptyPath",
            Error::BadMagic(_) => "BadMagic",
            Error::BadVersion(_) => "BadVersion",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
