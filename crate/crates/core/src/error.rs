//! One error type for the whole crate. Variants carry enough context to
//! print an actionable message (offending subexpression, field path into a
//! manifest, the point where a matrix went singular, ...).

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The parser could not continue at byte offset `pos`.
    #[error("syntax error at byte {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },

    /// An identifier that is neither a coordinate, a constant, nor a function.
    #[error("unknown identifier `{name}`")]
    UnknownIdentifier { name: String },

    /// Evaluation left the domain of an elementary function. `expr` is the
    /// pretty-printed subexpression whose evaluation failed.
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },

    /// Metric matrix failed the positive-definiteness check at `point`.
    #[error("metric not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    /// Two vectors meant to span a plane are (numerically) parallel.
    #[error("degenerate plane: vectors are linearly dependent (gram determinant {gram:.3e})")]
    DegeneratePlane { gram: f64 },

    /// A direction that must be unit length is not.
    #[error("vector is not unit length: |v| = {norm:.17}")]
    NotUnit { norm: f64 },

    /// α∧(dα)ⁿ degenerates at `point`: either dα drops rank, or its kernel
    /// line is not transverse to ker α (α vanishes on the would-be Reeb
    /// direction). `gap` is the relative pivot (or transversality) ratio.
    #[error("form is not contact at {point:?}: dα rank {rank} (expected {expected}), degeneracy gap {gap:.3e}")]
    NotContact {
        point: Vec<f64>,
        rank: usize,
        expected: usize,
        gap: f64,
    },

    /// A vector handed to a ξ-only operation has a component along the Reeb
    /// direction.
    #[error("vector is not in the contact distribution: |α(v)| = {alpha_v:.3e}")]
    NotInXi { alpha_v: f64 },

    /// The structure is not compatible (or weakly compatible), so the
    /// requested computation has no meaning; message carries the classification.
    #[error("structure is not compatible: {what}")]
    NotCompatible { what: String },

    /// Scalar input outside its admissible range.
    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    /// Bound inputs that violate a precondition (non-positive injectivity
    /// radius, negative radicand in B, ...).
    #[error("invalid bound inputs: {reason}")]
    InvalidInputs { reason: String },

    /// An integration left the coordinate box of the chart.
    #[error("trajectory left the chart domain at arc length {s:.6}")]
    LeftChartDomain { s: f64 },

    /// The adaptive integrator would need a step below the minimum.
    #[error("step size underflow at arc length {s:.6} (needed {needed:.3e})")]
    StepFailure { s: f64, needed: f64 },

    /// A probe radius beyond the validity gate for that probe.
    #[error("radius {r} too large: {what} requires r < {limit:.6}")]
    RadiusTooLarge {
        r: f64,
        what: &'static str,
        limit: f64,
    },

    /// A Reeb orbit advertised as closed fails to close up.
    #[error("orbit does not close: defect {defect:.3e} after period {period}")]
    OrbitNotClosed { defect: f64, period: f64 },

    /// Name not in the model registry.
    #[error("unknown model `{name}` (available: {available})")]
    UnknownModel { name: String, available: String },

    /// A manifest that parsed as JSON but failed validation. `path` is the
    /// JSON field path, e.g. `metric[1][0]`.
    #[error("manifest error at {path}: {reason}")]
    Manifest { path: String, reason: String },

    /// I/O or JSON-level failure while reading a manifest file.
    #[error("cannot read manifest: {reason}")]
    ManifestRead { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
