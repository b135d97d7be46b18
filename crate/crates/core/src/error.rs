use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("dimension mismatch for {name}: got {got}, expected {want}")]
    Dimension {
        name: &'static str,
        got: usize,
        want: usize,
    },
    #[error("quadratic weight of variable {0} is negative; problem is not convex")]
    NonConvex(usize),
    #[error("problem data contains NaN or a misplaced infinity")]
    NotFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch for {what}: got {got}, expected {want}")]
    Dimension {
        what: &'static str,
        got: usize,
        want: usize,
    },
    #[error("{matrix}[{row}][{col}] = {value} is outside the allowed entries")]
    InvalidEntry {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: i32,
    },
    #[error("price {price} outside [{p_min}, {p_max}]")]
    PriceOutOfBounds { price: f64, p_min: f64, p_max: f64 },
    #[error("clock overrun: step {step} beyond day length {steps_per_day}")]
    ClockOverrun { step: usize, steps_per_day: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiqpError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("binary variable {0} must have bounds [0, 1]")]
    BinaryBounds(usize),
    #[error("binary index {index} out of range for {n} variables")]
    BinaryIndex { index: usize, n: usize },
    #[error("relaxation is unbounded below")]
    Unbounded,
    #[error("enumeration limited to {limit} binaries, problem has {count}")]
    TooManyBinaries { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmpcError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] MiqpError),
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error(
        "demand infeasible: {required:.3} units still required but at most {capacity:.3} can be delivered in the remaining {steps} steps"
    )]
    DemandInfeasible {
        required: f64,
        capacity: f64,
        steps: usize,
    },
    #[error("schedule infeasible for reasons other than the production target (buffer, energy or run constraints)")]
    ScheduleInfeasible,
    #[error("branch-and-bound stopped without an integer-feasible schedule")]
    NoIncumbent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("invalid pricing configuration: {0}")]
    Config(String),
    #[error("demand is infeasible even at the maximum price {p_max}: {source}")]
    Unrecoverable { p_max: f64, source: LmpcError },
    #[error(transparent)]
    Lmpc(#[from] LmpcError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error("day {day}: {source}")]
    Pricing { day: usize, source: PricingError },
    #[error("day {day}, hour {hour}: {source}")]
    Step {
        day: usize,
        hour: usize,
        source: LmpcError,
    },
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}: at `{json_path}`: {message}")]
    Json {
        file: String,
        json_path: String,
        message: String,
    },
    #[error("{file}: row {row}: {message}")]
    Csv {
        file: String,
        row: usize,
        message: String,
    },
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}
