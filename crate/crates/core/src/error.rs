use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error("i/o: {0}")]
    Io(String),

    #[error("unaligned address {0:#x}")]
    UnalignedAddress(u64),

    #[error("address {0:#x} is outside all segments")]
    OutsideSegments(u64),

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("footprint of {kind} workload exceeds segment: {msg}")]
    Footprint { kind: &'static str, msg: String },

    #[error("virtual page {0:#x} is not mapped")]
    Unmapped(u64),

    #[error("cannot remap: {0}")]
    Remap(String),

    #[error("address {0:#x} is outside the stack segment")]
    OutsideStack(u64),

    #[error("stack overflow: {valid} valid bytes leave no room in a {size}-byte region (step {step})")]
    StackOverflow { valid: u64, size: u64, step: u64 },

    #[error("no samples taken yet")]
    NoSamples,

    #[error("empty age tree")]
    EmptyTree,

    #[error("metric undefined: {0}")]
    Metric(&'static str),

    #[error("unknown format {0:?}")]
    UnknownFormat(String),

    #[error("invalid config: {0}")]
    Config(String),
}
