use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a generator: {0:?}")]
    NotAGenerator(Vec<i64>),
    #[error("norm diverges: {0}")]
    NormDiverges(String),
    #[error("constant function")]
    ConstantFunction,
    #[error("not cosine-close: C2 distance {distance} exceeds {bound}")]
    NotCosineClose { distance: f64, bound: f64 },
    #[error("vanishing leading mode {0:?}")]
    VanishingLeadingMode(Vec<i64>),
    #[error("hypothesis fails at mode {mode:?}: {reason}")]
    HypothesisFails { mode: Vec<i64>, reason: String },
    #[error("cutoff below threshold: K_max = {k_max} < N = {threshold}")]
    CutoffBelowThreshold { k_max: f64, threshold: f64 },
    #[error("outside unit ball: |y| = {0}")]
    OutsideUnitBall(f64),
    #[error("certificate fails at mode {mode:?}: |y.k| = {value}, required {required}")]
    CertificateFails { mode: Vec<i64>, value: f64, required: f64 },
    #[error("cutoff ordering violated: {0}")]
    CutoffOrdering(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("resonant at base point: mode {mode:?} has divisor {divisor}, threshold {threshold}")]
    ResonantAtBasePoint {
        mode: Vec<i64>,
        divisor: f64,
        threshold: f64,
    },
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
