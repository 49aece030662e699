use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty (missing header)")]
    MissingHeader,

    #[error("line {line}: unexpected header, expected `{expected}`")]
    BadHeader { line: u64, expected: &'static str },

    /// A row-level parse failure. `message` leads so that diagnostics read
    /// `line 2: invalid month (field `timestamp`)`.
    #[error("line {line}: {message} (field `{field}`)")]
    Parse {
        line: u64,
        field: &'static str,
        message: String,
    },

    #[error("line {line}: unknown event kind `{kind}`, allowed: motion, bed_concussion, occupancy_switch, power")]
    UnknownKind { line: u64, kind: String },

    #[error("line {line}: duplicate record for participant {participant} on {date}")]
    DuplicateRecord {
        line: u64,
        participant: String,
        date: String,
    },

    #[error("flat {0} is referenced by events but not configured")]
    UnknownFlat(String),

    #[error("sensor {sensor} is not a configured motion sensor of flat {flat}")]
    UnknownSensor { flat: String, sensor: String },

    #[error("event on {found} passed to daily activity for {expected}")]
    WrongDay { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient knots: need at least 2, got {0}")]
    InsufficientKnots(usize),

    #[error("duplicate knot date {0}")]
    DuplicateKnotDate(String),

    #[error("insufficient points: need at least 2, got {0}")]
    InsufficientPoints(usize),

    #[error("degenerate abscissa: all x values are equal")]
    DegenerateAbscissa,

    #[error("{0} is out of domain")]
    OutOfDomain(String),

    #[error("no regression fit for the segment containing {0}")]
    EmptySegment(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("exact permutation limited to n <= 8 (got {0}); use monte-carlo")]
    UseMonteCarlo(usize),

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: String },

    #[error("insufficient assessments: need at least 2 scored visits, got {0}")]
    InsufficientAssessments(usize),

    #[error("participant {0} has no flat configuration")]
    NoFlat(String),

    #[error("empty cohort")]
    EmptyCohort,

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
