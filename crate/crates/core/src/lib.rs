//! Numerical toolkit for contact metric manifolds given in a single coordinate
//! chart: structure tensors (Reeb field, φ, h, second fundamental form of the
//! contact distribution), an identity/inequality check suite, curvature-based
//! radius bounds, and geodesic-disk probes that test those bounds pointwise.
//!
//! Everything is driven by scalar fields entered as expression strings; exact
//! derivatives come from forward-mode jets (no symbolic differentiation, no
//! finite differences except in tests, where finite differences serve as an
//! independent oracle).

pub mod bounds;
pub mod contact;
pub mod error;
pub mod expr;
pub mod geodesic;
pub mod geometry;
pub mod identity;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod ode;
pub mod report;
pub mod sample;

pub use bounds::{
    ball_in_cylinder, compute_constants, ct, h1_of_r, h2_of_r, interpolation_constants, q_of_r,
    radius_bounds, sn, sn_inv, BoundInputs, BoundReport, Constants, InterpolationConstants,
};
pub use geodesic::{disk_frame, geodesic_with_checkpoints, hessian_distance_probe, integrate_geodesic, jacobi_along, jacobi_bound_probe, jacobi_bundle, reeb_tube_probe, taming_probe, twisting_probe, CsvRow, DiskFrame, DiskSample, GeodesicPath, GeodesicSample, Grid, JacobiBundle, JacobiBundleSample, JacobiSample, JacobiSolution, ProbeReport, Worst};
pub use identity::{levi_probe, run_identity_suite, run_identity_suite_forced, CheckResult, CHECK_IDS, DEFAULT_IDENTITY_TOL, LEVI_TOL};
pub use report::{ClassificationSummary, Report, ResultItem, REPORT_VERSION};
pub use contact::{
    compatibility_classify, frame_at, frame_jets, frame_values, is_cr, nijenhuis_at, raw_frame,
    reeb_at, sec_range_estimate, Classification, ContactFrame, ContactModel, FrameJets, OrbitSeed,
    RawFrame,
};
pub use error::Error;
pub use expr::{eval_jet, parse, Expr};
pub use geometry::{
    point_geometry, ricci_direction, sectional, Chart, MetricField, PointGeometry,
};
pub use jet::Jet;
pub use models::{
    get_model, heisenberg3, heisenberg5, list_models, manifest_from_path, manifest_from_str,
    model_bound_inputs, round_s3, Expected, ModelSpec,
};
