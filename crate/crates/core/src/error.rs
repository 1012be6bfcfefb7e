use thiserror::Error;

/// Errors raised anywhere in the design and verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("{what}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        what: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("resonant spectra: eigenvalues {0} and {1} coincide")]
    ResonantSpectra(String, String),

    #[error("binomial ({p} choose {q}) is out of convention domain")]
    OutOfConventionDomain { p: i64, q: i64 },

    #[error("binomial ({p} choose {q}) overflows u64")]
    BinomialOverflow { p: i64, q: i64 },

    #[error("unobservable pair: observability rank stalls at {rank} < {n}")]
    UnobservablePair { rank: usize, n: usize },

    #[error("ℓ below observability index: rank O = {rank} < n = {n} at ℓ = {ell}")]
    EllBelowObservabilityIndex { ell: usize, rank: usize, n: usize },

    #[error("simulation diverged at step {step}: state norm {norm:e} exceeds guard")]
    Divergence { step: usize, norm: f64 },

    #[error("exosystem eigenvalue inside unit circle (|λ| = {modulus})")]
    ExoEigenInsideUnitCircle { modulus: f64 },

    #[error("exosystem matrix S is singular")]
    SingularExosystem,

    #[error("experiment too short: T = {t} < ℓ = {ell}")]
    ExperimentTooShort { t: usize, ell: usize },

    #[error("defective exosystem: declare Jordan structure")]
    DefectiveExosystem,

    #[error("declared Jordan structure inconsistent with S: {0}")]
    JordanSpecMismatch(String),

    #[error("w⋆ not cyclic for S (Krylov rank {rank} < {n_w})")]
    NotCyclic { rank: usize, n_w: usize },

    #[error("experiment too short for Krylov factorization: T-ℓ+1 = {cols} < n_w = {n_w}")]
    KrylovTooShort { cols: usize, n_w: usize },

    #[error("X is numerically singular (min eigenvalue {0:e})")]
    SingularX(f64),

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Suggested remedy for the innermost error, when one is known.
    pub fn hint(&self) -> Option<&'static str> {
        Some(match self.root() {
            Error::ExperimentTooShort { .. } => "increase T so that T ≥ ℓ (and T-ℓ+1 ≥ ν + n̂_w for a well-posed SDP)",
            Error::KrylovTooShort { .. } => "increase T or use the Jordan factorization",
            Error::NotCyclic { .. } => {
                "choose w⋆ with components along every eigenvector of S, or use the Jordan factorization"
            }
            Error::DefectiveExosystem => "declare the Jordan structure of S in the configuration",
            Error::JordanSpecMismatch(_) => "check the declared Jordan blocks against the spectrum of S",
            Error::EllBelowObservabilityIndex { .. } => "ℓ must be at least the observability index of (A, C)",
            Error::UnobservablePair { .. } => "the plant must have an observable (A, C) pair",
            Error::ExoEigenInsideUnitCircle { .. } => {
                "remove exosystem modes strictly inside the unit circle; they decay on their own"
            }
            Error::SingularExosystem => "S must be invertible",
            Error::Divergence { .. } => "shorten the horizon or check that the design is stabilizing",
            Error::ResonantSpectra(..) => {
                "the closed loop shares an eigenvalue with S; the design is not usable for regulation"
            }
            _ => return None,
        })
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
