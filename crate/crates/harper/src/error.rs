//! Error type shared by every layer of the crate.
//!
//! Variants are grouped by how callers are expected to react:
//! invalid input (reject the request), spectral conditions (a gap is closed
//! or absent, the computation is well posed but has no answer), and numerical
//! failures (retry on a finer grid or give up).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A pair of integers that must be coprime is not.
    #[error("{what} must be coprime, got gcd = {gcd}")]
    NotCoprime { what: &'static str, gcd: i64 },

    /// An integer parameter is outside its admissible range.
    #[error("{what} out of range: {details}")]
    RangeError { what: &'static str, details: String },

    /// Integer overflow in exact arithmetic (inputs beyond the supported size).
    #[error("integer overflow while computing {what}")]
    Overflow { what: &'static str },

    /// The congruence has no representative inside the symmetric window
    /// 2|s| < N; happens exactly when the corresponding gap is forced closed.
    #[error("no Diophantine solution with 2|s| < {n} for gap index d = {d}")]
    NoSolutionInWindow { d: i64, n: i64 },

    /// A spectral gap required by the computation is closed (or too narrow to
    /// certify open at the working tolerance).
    #[error("spectral gap below band {d} is closed or unresolved")]
    GapClosed { d: i64 },

    /// No open gap matched the requested filling-fraction window.
    #[error("no open gap with integrated density within {window} of {target}")]
    GapNotFound { target: f64, window: f64 },

    /// A matrix expected to be Hermitian is not, beyond tolerance.
    #[error("matrix is not Hermitian: max |H - H*| = {max_skew:e}")]
    NotHermitian { max_skew: f64 },

    /// Eigenvalue iteration failed to converge.
    #[error("eigendecomposition did not converge within {iters} iterations")]
    NoConvergence { iters: usize },

    /// Lattice field-strength data inadmissible on this grid: a plaquette
    /// phase reached the branch cut or a link determinant vanished.
    #[error("grid {n1}x{n2} too coarse for a reliable Chern number (max plaquette {max_plaquette:.3} rad)")]
    GridTooCoarse { n1: usize, n2: usize, max_plaquette: f64 },

    /// An exact integer identity failed: the claimed transfer index is not an
    /// integer, signalling an inconsistent Chern input.
    #[error("transfer index is not an integer: residue {residue} mod {modulus}")]
    NotInteger { residue: i64, modulus: i64 },

    /// Gap labelling could not single out one (m, c1) pair at this tolerance.
    #[error("gap label ambiguous: flux too close to a low-denominator rational at tolerance {tol:e}")]
    Ambiguous { tol: f64 },

    /// Continued-fraction input outside (0, 1) or otherwise degenerate.
    #[error("degenerate flux input: {details}")]
    Degenerate { details: String },

    /// Malformed CLI/config input (bad grid string, unreadable file, ...).
    #[error("invalid input: {details}")]
    InvalidInput { details: String },

    /// I/O failure while reading config or writing outputs/cache.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::sync::Arc<std::io::Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source: std::sync::Arc::new(source),
        }
    }

    /// Process exit code mandated for this error when it reaches the CLI:
    /// 2 for invalid input, 1 for verification-level conditions (closed or
    /// missing gaps), 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotCoprime { .. }
            | Error::RangeError { .. }
            | Error::Overflow { .. }
            | Error::InvalidInput { .. }
            | Error::Degenerate { .. }
            | Error::Io { .. } => 2,
            Error::GapClosed { .. } | Error::GapNotFound { .. } | Error::NoSolutionInWindow { .. } => 1,
            Error::NotHermitian { .. }
            | Error::NoConvergence { .. }
            | Error::GridTooCoarse { .. }
            | Error::NotInteger { .. }
            | Error::Ambiguous { .. } => 3,
        }
    }
}
