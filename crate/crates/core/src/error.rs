use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("base must be at least 2, got {0}")]
    Base(usize),
    #[error("digit {digit} out of range for base {base}")]
    Digit { digit: usize, base: usize },
    #[error("invalid measure: {0}")]
    Measure(String),
    #[error("amplitude count {got} does not match n^m = {want}")]
    Shape { got: usize, want: usize },
    #[error("level {got} is below the required level {need}")]
    LevelTooLow { got: usize, need: usize },
    #[error("level budget exceeded: dimension {dim} > {budget}")]
    Budget { dim: usize, budget: usize },
    #[error("measure mismatch between operands")]
    MeasureMismatch,
    #[error("operation requires Haar measure")]
    NotHaar,
    #[error("incompatible families: {0}")]
    Incompatible(String),
    #[error("not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("not isometric (defect {0:.3e})")]
    NotIsometric(f64),
    #[error("not a unit vector (norm {0})")]
    NotUnit(f64),
    #[error("word length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("outside the state's domain: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("unknown generator '{name}'; valid names: {valid}")]
    UnknownGenerator { name: String, valid: String },
}

pub type Result<T> = std::result::Result<T, Error>;
