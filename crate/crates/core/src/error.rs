use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("set {set} contains element {element}, but the ground set has only {n} elements")]
    ElementOutOfRange { set: usize, element: usize, n: usize },
    #[error("set {set} lists element {element} more than once")]
    DuplicateElement { set: usize, element: usize },
    #[error("the family of sets is empty")]
    EmptyFamily,
    #[error("color {value} of element {element} is outside [-1, 1]")]
    ColorOutOfRange { element: usize, value: String },
    #[error("coloring has {got} entries, the ground set has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("element {element} is not frozen (color {value})")]
    NotFrozen { element: usize, value: String },
    #[error("log* is undefined at 0")]
    LogStarOfZero,
    #[error("invalid constant profile: {0}")]
    InvalidProfile(String),
    #[error("profile infeasible at d = {d}: W = floor(d / (64 delta^2 Tw_(delta-1))) = {w} < 1")]
    InfeasibleW { d: u64, w: String },
    #[error("tower value Tw_{r} needs more than {cap} bits")]
    TowerOverflow { r: usize, cap: u64 },
    #[error("brute force needs 2^{n} colorings; the cap is n <= {cap}")]
    OracleCap { n: usize, cap: usize },
    #[error("infeasible generator parameters: {0}")]
    InfeasibleGenerator(String),
    #[error("step 9 fired at stage {stage} but no cohort seed exists: {diagnostic}")]
    NoCohortSeed { stage: u64, diagnostic: String },
    #[error("step cap of {cap} steps exceeded")]
    StepCapExceeded { cap: u64 },
    #[error("invariant I{invariant} violated after stage {stage} (step {step}): {witness}")]
    InvariantViolation { stage: u64, step: u8, invariant: u8, witness: String },
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("floating elements remain but the run has not terminated")]
    NotTerminated,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
