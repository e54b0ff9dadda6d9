//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-positive price {0}")]
    NonPositivePrice(f64),
    #[error("bar high {high} below low {low}")]
    InvertedBar { high: f64, low: f64 },
    #[error("day has no bars")]
    EmptyDay,
    #[error("coarse interval {coarse} min not a multiple of bar interval {fine} min")]
    IndivisibleFrequencies { coarse: u32, fine: u32 },
    #[error("not enough bars: have {have}, need at least {need}")]
    InsufficientBars { have: usize, need: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series date mismatch at index {0}")]
    DateMismatch(usize),
    #[error("trailing high-frequency sum is zero at index {0}")]
    DegenerateScale(usize),
    #[error("need {need} prior days of history, have {have}")]
    InsufficientHistory { need: usize, have: usize },
    #[error("invalid level {name} = {value}")]
    InvalidLevel { name: &'static str, value: f64 },
    #[error("expectile-to-ES mapping singular at tau = 0.5")]
    SingularEsMapping,
    #[error("asymmetric least squares loss is degenerate (perfect fit)")]
    DegenerateFit,
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("expectile sign violation at t = {t} (mu = {mu})")]
    SignViolation { t: usize, mu: f64 },
    #[error("expectile too close to zero at t = {t}")]
    NearZeroExpectile { t: usize },
    #[error("initial expectile must be negative, got {0}")]
    NonNegativeInit(f64),
    #[error("parameters outside prior support")]
    OutsideSupport,
    #[error("empty chain phase: {0}")]
    EmptyChain(&'static str),
    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("simulation rejected too many volatility paths ({0} consecutive re-draws)")]
    SimulationStuck(usize),
    #[error("estimation failed at forecast step {step}: {source}")]
    ForecastStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("ES forecast {0} overflows the scoring exponential")]
    EsOverflow(f64),
    #[error("need at least {need} models, have {have}")]
    TooFewModels { need: usize, have: usize },
    #[error("{0}")]
    InvalidInput(String),
}
