use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown sequence family `{0}`")]
    UnknownFamily(String),

    #[error("pulse duration {pulse_duration:e} s does not fit inside spacing {tau:e} s")]
    OverlappingPulses { tau: f64, pulse_duration: f64 },

    #[error("invalid pulse unit: {0}")]
    InvalidUnit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("realization index {index} out of range for {realizations} realizations")]
    RealizationOutOfRange { index: u64, realizations: u64 },

    #[error("phase list has {got} entries but the plan has {expected} units")]
    PhaseCount { expected: usize, got: usize },

    #[error("sampling too coarse: {samples} samples per unit leave {per_pulse:.2} samples in the shortest pulse (need 8)")]
    SamplingTooCoarse { samples: usize, per_pulse: f64 },

    #[error("Fourier amplitude paths disagree by {0:e} (internal error)")]
    FactorizationMismatch(f64),

    #[error("empty phase list")]
    EmptyPhases,

    #[error("amplitude component does not match the requested signal kind")]
    ComponentMismatch,

    #[error("{spins} target spins exceed the exact-propagation cap of {max}")]
    DimensionCap { spins: usize, max: usize },

    #[error("assembled Hamiltonian is not Hermitian (deviation {0:e}) (internal error)")]
    NonHermitian(f64),

    #[error("sub-step refinement did not converge: last change {change:e} at {substeps} sub-steps per pulse")]
    StepConvergence { substeps: usize, change: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("malformed data table {table} line {line}: {message}")]
    Table {
        table: &'static str,
        line: usize,
        message: String,
    },

    #[error("sweep point {index} ({frequency_hz:e} Hz): {source}")]
    SweepPoint {
        index: usize,
        frequency_hz: f64,
        #[source]
        source: Box<Error>,
    },
}
