use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ill-formed formula: {0}")]
    IllFormed(String),
    #[error("missing variable `{0}`")]
    MissingVariable(String),
    #[error("unsupported logic: {0}")]
    UnsupportedLogic(String),
    #[error("hash length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("free variable `{0}` is not integer or boolean")]
    NonIntegerFreeVar(String),
    #[error("degenerate instance: m* = {m_star} < 1, use the exact path")]
    DegenerateInstance { m_star: i64 },
    #[error("enumeration bound {needed} exceeds the cap {cap}")]
    EnumerationCap { needed: u64, cap: u64 },
    #[error("empty domain for `{0}`")]
    EmptyDomain(String),
    #[error("grid needs {required} hash bits, budget is {budget}")]
    Overflow { required: u64, budget: u64 },
    #[error("cannot spawn solver `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver handshake failed: {0}")]
    Handshake(String),
    #[error("solver answered unknown")]
    SolverUnknown,
    #[error("solver timed out after {0} ms")]
    Timeout(u64),
    #[error("solver protocol error: {0}")]
    Solver(String),
    #[error("program has a cycle through vertex {0}")]
    Cycle(usize),
    #[error("real-valued sample `{0}` needs the continuous pipeline")]
    ContinuousSampleUnsupported(String),
    #[error("termination count is zero, program is ill-formed")]
    ZeroTermination,
    #[error("no Monte Carlo sample terminated")]
    ZeroTermHits,
    #[error("oracle budget exceeded: {needed} points > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("nonlinear real atom: {0}")]
    NonLinear(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    /// Solver-side failure, as opposed to a problem with the input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Spawn { .. }
                | Error::Handshake(_)
                | Error::SolverUnknown
                | Error::Timeout(_)
                | Error::Solver(_)
        )
    }
}

impl From<crate::sexp::SexpError> for Error {
    fn from(e: crate::sexp::SexpError) -> Self {
        Error::parse(e.pos.line, e.pos.col, e.msg)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
