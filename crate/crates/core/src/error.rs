use thiserror::Error;

/// Every failure the library can report. Variants carry enough context to
/// name the offending file, row, or value without a debugger.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}: malformed header: {detail}")]
    MalformedHeader { file: String, detail: String },

    #[error("{file}: date columns must advance by exactly one day ({prev} then {next})")]
    NonMonotonicDates {
        file: String,
        prev: String,
        next: String,
    },

    #[error("{file}: row {row}, column {column}: bad value {value:?}")]
    BadValue {
        file: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{file}: duplicate fips {fips}")]
    DuplicateFips { file: String, fips: String },

    #[error("mask fractions for fips {fips} sum to {sum}, outside 1 +/- 0.02")]
    BadFractionSum { fips: String, sum: f64 },

    #[error("join produced no counties")]
    EmptyJoin,

    #[error("cumulative series needs at least 2 points")]
    TooShort,

    #[error("window out of range: series does not cover {missing}")]
    WindowOutOfRange { missing: String },

    #[error("state {state}: death ratio before the order is zero, percent change undefined")]
    ZeroBaseline { state: String },

    #[error("no samples")]
    EmptySamples,

    #[error("label {label} absent from the sample set")]
    MissingLabel { label: String },

    #[error("cannot fit a scaler on an empty set")]
    EmptyFit,

    #[error("correlation input is constant")]
    ConstantInput,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("k={k} exceeds available sample count {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("query has {got} features, model was trained on {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("test fraction {fraction} not in (0, 1)")]
    BadFraction { fraction: f64 },

    #[error("stratified split requires both labels in the data")]
    SingleClassStratify,

    #[error("hyperparameter space is empty")]
    EmptySpace,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("score {score} is not a proportion in [0, 1] over a nonempty test set")]
    BadScore { score: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: {detail}")]
    Csv { file: String, detail: String },
}

impl Error {
    /// CLI exit code: 1 data error, 2 config error. Assertion failures
    /// (exit 3) are not errors; the synth-check command maps them itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
