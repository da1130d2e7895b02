//! Built-in contact metric models with closed-form metadata, deliberately
//! perturbed variants used as negative controls, and ingestion of user models
//! from JSON manifests.
//!
//! The three registered models are
//!
//!   * `heisenberg3`: α = ½(dz − y dx), g = ¼(dx² + dy²) + α⊗α on a [−5,5]³
//!     box — rotation speed θ′ = 2, sectional curvature in [−3, 1],
//!     Ric(R) = 2, vanishing h.
//!   * `heisenberg5`: the five-dimensional analogue with two horizontal
//!     planes — same θ′ and curvature range, Ric(R) = 4.
//!   * `round-s3`: the unit three-sphere in a stereographic chart (projection
//!     pole opposite the chart origin), carrying the Hopf contact form and
//!     the round metric g = 4F²δ with F = 1/(1+|u|²) — constant curvature 1,
//!     closed Reeb orbits, the seed orbit being the unit circle in the
//!     (x, y)-plane with period 2π.
//!
//! The registry runs a self-test on first access: every metadata value
//! (rotation speed, curvature range, Reeb Ricci curvature, vanishing h,
//! CR integrability) is recomputed from the chart data and compared at
//! [`SELF_TEST_TOL`].

use std::sync::OnceLock;

use serde::Deserialize;

use crate::bounds::BoundInputs;
use crate::contact::{
    compatibility_classify, frame_at, is_cr, sec_range_estimate, Classification, ContactModel,
    OrbitSeed,
};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::geometry::{point_geometry, ricci_direction, Chart, MetricField};
use crate::linalg::{norm, Scalar};
use crate::sample;

/// Agreement required between registered metadata and recomputed values.
pub const SELF_TEST_TOL: f64 = 1e-7;
/// Relative tolerance for the numeric symmetry check on full manifest metrics.
const MANIFEST_SYMMETRY_TOL: f64 = 1e-9;
/// Points used by the manifest symmetry check.
const MANIFEST_SYMMETRY_POINTS: usize = 5;

/// Closed-form ground truth attached to a registered model.
#[derive(Debug, Clone, Copy)]
pub struct Expected {
    /// Rotation speed θ′ of the compatible structure (a constant).
    pub theta_prime: f64,
    /// Exact range of the sectional curvature over all planes.
    pub sec_range: (f64, f64),
    /// Ricci curvature in the Reeb direction (constant on these models).
    pub ric_reeb: f64,
    /// Whether the deformation tensor h = ½L_Rφ vanishes identically.
    pub h_is_zero: bool,
    /// Whether the structure tensor is integrable on the symplectization.
    pub is_cr: bool,
    /// True when `inj` is a chart-safe truncation of an open manifold's
    /// infinite injectivity radius rather than a geometric value.
    pub inj_chart_truncated: bool,
}

/// A registered model: chart data plus validated metadata.
#[derive(Debug)]
pub struct ModelSpec {
    pub name: &'static str,
    pub model: ContactModel,
    pub expected: Expected,
}

/// Names of all registered models, in registry order.
pub fn list_models() -> Vec<&'static str> {
    registry().iter().map(|spec| spec.name).collect()
}

/// Looks up a registered model. The first call builds the registry and
/// self-tests every model's metadata against recomputed values.
pub fn get_model(name: &str) -> Result<&'static ModelSpec> {
    registry()
        .iter()
        .find(|spec| spec.name == name)
        .ok_or_else(|| Error::UnknownModel {
            name: name.to_string(),
            available: list_models().join(", "),
        })
}

/// Geometric inputs for the radius bounds, read off the model metadata.
pub fn model_bound_inputs(spec: &ModelSpec) -> Result<BoundInputs> {
    let inj = spec.model.inj.ok_or_else(|| Error::InvalidInputs {
        reason: format!("model {} has no injectivity radius metadata", spec.name),
    })?;
    let (lo, hi) = spec.expected.sec_range;
    Ok(BoundInputs {
        n: spec.model.n,
        inj,
        kappa: lo,
        k_upper: hi,
        sec_abs: lo.abs().max(hi.abs()),
        theta_prime: spec.expected.theta_prime,
        ric_min: spec.expected.ric_reeb,
    })
}

fn registry() -> &'static Vec<ModelSpec> {
    static REGISTRY: OnceLock<Vec<ModelSpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let specs = vec![
            ModelSpec {
                name: "heisenberg3",
                model: heisenberg3(),
                expected: Expected {
                    theta_prime: 2.0,
                    sec_range: (-3.0, 1.0),
                    ric_reeb: 2.0,
                    h_is_zero: true,
                    is_cr: true,
                    inj_chart_truncated: true,
                },
            },
            ModelSpec {
                name: "heisenberg5",
                model: heisenberg5(),
                expected: Expected {
                    theta_prime: 2.0,
                    sec_range: (-3.0, 1.0),
                    ric_reeb: 4.0,
                    h_is_zero: true,
                    is_cr: true,
                    inj_chart_truncated: true,
                },
            },
            ModelSpec {
                name: "round-s3",
                model: round_s3(),
                expected: Expected {
                    theta_prime: 2.0,
                    sec_range: (1.0, 1.0),
                    ric_reeb: 2.0,
                    h_is_zero: true,
                    is_cr: true,
                    inj_chart_truncated: false,
                },
            },
        ];
        for spec in &specs {
            self_test(spec);
        }
        specs
    })
}

/// Recomputes every metadata value from the chart data; panics on mismatch
/// (a failure here is a defect in the model table, not a user error).
fn self_test(spec: &ModelSpec) {
    let model = &spec.model;
    let expected = &spec.expected;
    let seed = 0xC0DE;
    match compatibility_classify(model, 12, seed).unwrap_or_else(|e| {
        panic!("model {}: classification failed during self-test: {e}", spec.name)
    }) {
        Classification::Compatible { theta_prime, spread } => {
            assert!(
                (theta_prime - expected.theta_prime).abs() <= SELF_TEST_TOL,
                "model {}: rotation speed {theta_prime} disagrees with metadata {}",
                spec.name,
                expected.theta_prime
            );
            assert!(
                spread <= SELF_TEST_TOL,
                "model {}: rotation speed varies by {spread}",
                spec.name
            );
        }
        other => panic!("model {}: expected a compatible structure, got {other:?}", spec.name),
    }
    let mut rng = sample::rng_for(seed ^ 0x5EED);
    for _ in 0..8 {
        let p = sample::sample_point(&model.chart, &mut rng);
        let frame = frame_at(model, &p)
            .unwrap_or_else(|e| panic!("model {}: frame failed at {p:?}: {e}", spec.name));
        if expected.h_is_zero {
            let h_norm = norm(&frame.h.data);
            assert!(
                h_norm <= SELF_TEST_TOL,
                "model {}: h should vanish, got ‖h‖ = {h_norm:.3e} at {p:?}",
                spec.name
            );
        }
        let pg = point_geometry(&model.metric, &p)
            .unwrap_or_else(|e| panic!("model {}: curvature failed at {p:?}: {e}", spec.name));
        let ric = ricci_direction(&pg, &frame.reeb);
        assert!(
            (ric - expected.ric_reeb).abs() <= SELF_TEST_TOL,
            "model {}: Ric(R) = {ric} disagrees with metadata {} at {p:?}",
            spec.name,
            expected.ric_reeb
        );
    }
    let (lo, hi) = sec_range_estimate(model, 24, seed ^ 0xA1)
        .unwrap_or_else(|e| panic!("model {}: curvature range failed: {e}", spec.name));
    assert!(
        (lo - expected.sec_range.0).abs() <= SELF_TEST_TOL
            && (hi - expected.sec_range.1).abs() <= SELF_TEST_TOL,
        "model {}: sampled curvature range [{lo}, {hi}] disagrees with metadata {:?}",
        spec.name,
        expected.sec_range
    );
    let (cr, worst) = is_cr(model, 6, seed ^ 0xC4)
        .unwrap_or_else(|e| panic!("model {}: integrability check failed: {e}", spec.name));
    assert!(
        cr == expected.is_cr,
        "model {}: integrability flag disagrees (worst residual {worst:.3e})",
        spec.name
    );
}

fn parse_all(entries: &[&str], coords: &[String]) -> Vec<Expr> {
    entries
        .iter()
        .map(|s| parse(s, coords).expect("built-in expression must parse"))
        .collect()
}

fn parse_upper_owned(chart: &Chart, rows: &[Vec<String>]) -> MetricField {
    let borrowed: Vec<Vec<&str>> = rows
        .iter()
        .map(|r| r.iter().map(String::as_str).collect())
        .collect();
    let slices: Vec<&[&str]> = borrowed.iter().map(Vec::as_slice).collect();
    MetricField::parse_upper(chart, &slices).expect("built-in metric must parse")
}

const H3_COORDS: [&str; 3] = ["x", "y", "z"];
const H5_COORDS: [&str; 5] = ["x1", "y1", "x2", "y2", "z"];

fn h3_metric_rows() -> Vec<Vec<String>> {
    vec![
        vec!["(1+y^2)/4".into(), "0".into(), "-y/4".into()],
        vec!["1/4".into(), "0".into()],
        vec!["1/4".into()],
    ]
}

fn h5_metric_rows() -> Vec<Vec<String>> {
    vec![
        vec![
            "(1+y1^2)/4".into(),
            "0".into(),
            "y1*y2/4".into(),
            "0".into(),
            "-y1/4".into(),
        ],
        vec!["1/4".into(), "0".into(), "0".into(), "0".into()],
        vec!["(1+y2^2)/4".into(), "0".into(), "-y2/4".into()],
        vec!["1/4".into(), "0".into()],
        vec!["1/4".into()],
    ]
}

/// Three-dimensional Heisenberg model: α = ½(dz − y dx) with the standard
/// left-invariant metric scaled so that θ′ = 2.
pub fn heisenberg3() -> ContactModel {
    let chart = Chart::new(&H3_COORDS, Some(vec![(-5.0, 5.0); 3]));
    let coords: Vec<String> = H3_COORDS.iter().map(|s| s.to_string()).collect();
    let alpha = parse_all(&["-y/2", "0", "1/2"], &coords);
    let metric = parse_upper_owned(&chart, &h3_metric_rows());
    ContactModel {
        name: "heisenberg3".into(),
        chart,
        alpha,
        metric,
        j_field: None,
        n: 1,
        inj: Some(10.0),
        conv: None,
        orbits: vec![],
    }
}

/// Five-dimensional Heisenberg model: α = ½(dz − y₁dx₁ − y₂dx₂),
/// g = ¼Σ(dxᵢ² + dyᵢ²) + α⊗α.
pub fn heisenberg5() -> ContactModel {
    let chart = Chart::new(&H5_COORDS, Some(vec![(-5.0, 5.0); 5]));
    let coords: Vec<String> = H5_COORDS.iter().map(|s| s.to_string()).collect();
    let alpha = parse_all(&["-y1/2", "0", "-y2/2", "0", "1/2"], &coords);
    let metric = parse_upper_owned(&chart, &h5_metric_rows());
    ContactModel {
        name: "heisenberg5".into(),
        chart,
        alpha,
        metric,
        j_field: None,
        n: 2,
        inj: Some(10.0),
        conv: None,
        orbits: vec![],
    }
}

/// Unit three-sphere in the stereographic chart whose origin is the point
/// opposite the projection pole: g = 4F²δ and α is the pullback of the Hopf
/// contact form u₁dv₁ − v₁du₁ + u₂dv₂ − v₂du₂, with F = 1/(1+|u|²). The seed
/// Reeb orbit is the unit circle t ↦ (cos t, sin t, 0), a Hopf fiber of
/// period 2π.
pub fn round_s3() -> ContactModel {
    let chart = Chart::new(&H3_COORDS, Some(vec![(-4.0, 4.0); 3]));
    let coords: Vec<String> = H3_COORDS.iter().map(|s| s.to_string()).collect();
    // F = 1/(1+x²+y²+z²); the pullback has components
    //   α_x = −4F²(y + xz), α_y = 4F²(x − yz), α_z = 2F − 4F²(1 + z²).
    let f2 = "(1/(1+x^2+y^2+z^2))^2";
    let a_x = format!("-4*{f2}*(y+x*z)");
    let a_y = format!("4*{f2}*(x-y*z)");
    let a_z = format!("2/(1+x^2+y^2+z^2)-4*{f2}*(1+z^2)");
    let alpha = parse_all(&[a_x.as_str(), a_y.as_str(), a_z.as_str()], &coords);
    let conformal = "4*(1/(1+x^2+y^2+z^2))^2";
    let metric = parse_upper_owned(
        &chart,
        &vec![
            vec![conformal.to_string(), "0".into(), "0".into()],
            vec![conformal.to_string(), "0".into()],
            vec![conformal.to_string()],
        ],
    );
    ContactModel {
        name: "round-s3".into(),
        chart,
        alpha,
        metric,
        j_field: None,
        n: 1,
        inj: Some(std::f64::consts::PI),
        conv: Some(std::f64::consts::PI / 2.0),
        orbits: vec![OrbitSeed {
            point: vec![1.0, 0.0, 0.0],
            period: Some(2.0 * std::f64::consts::PI),
        }],
    }
}

fn scale_rows(rows: &mut [Vec<String>], factor: &str, keep: impl Fn(usize, usize) -> bool) {
    let d = rows.len();
    for i in 0..d {
        for (offset, entry) in rows[i].iter_mut().enumerate() {
            let j = i + offset;
            if entry != "0" && !keep(i, j) {
                *entry = format!("({entry})*({factor})");
            }
        }
    }
}

/// Negative control for the classification: the full heisenberg3 metric is
/// scaled by the positive function 1 + x²/10, which destroys both the unit
/// length of the Reeb field and the constancy of the rotation speed.
pub fn heisenberg3_stretched() -> ContactModel {
    let mut model = heisenberg3();
    let coords: Vec<String> = H3_COORDS.iter().map(|s| s.to_string()).collect();
    let mut rows = h3_metric_rows();
    scale_rows(&mut rows, "1+x^2/10", |_, _| false);
    model.metric = parse_upper_owned(&model.chart, &rows);
    model.name = "heisenberg3-stretched".into();
    model.alpha = parse_all(&["-y/2", "0", "1/2"], &coords);
    model
}

/// The heisenberg3 metric scaled by the constant 1.21: still weakly
/// compatible with a constant rotation speed, but the Reeb field has length
/// 1/1.1 — the classification fails exactly the unit-Reeb condition.
pub fn heisenberg3_scaled() -> ContactModel {
    let mut model = heisenberg3();
    let mut rows = h3_metric_rows();
    scale_rows(&mut rows, "121/100", |_, _| false);
    model.metric = parse_upper_owned(&model.chart, &rows);
    model.name = "heisenberg3-scaled".into();
    model
}

/// Negative control for the Reeb covariant derivative: only the (x, y)
/// coordinate block of the heisenberg3 metric is scaled by 1.21. The Reeb
/// field stays unit and orthogonal to ξ, and in dimension three the plane
/// condition is automatic, so the classification fails exactly the
/// θ′-constancy condition (the rotation speed becomes a function of y).
pub fn heisenberg3_plane_scaled() -> ContactModel {
    let mut model = heisenberg3();
    let mut rows = h3_metric_rows();
    // Keep g_xz, g_yz, g_zz; scale g_xx, g_xy, g_yy.
    scale_rows(&mut rows, "121/100", |_, j| j == 2);
    model.metric = parse_upper_owned(&model.chart, &rows);
    model.name = "heisenberg3-plane-scaled".into();
    model
}

/// Incompatibility control: scaling only the (x₁, y₁) coordinate block of
/// the heisenberg5 metric leaves the Reeb field unit and normal but makes
/// dα rotate at two different speeds on the two horizontal planes — the
/// squared structure map is no longer a scalar on ξ.
pub fn heisenberg5_plane_scaled() -> ContactModel {
    let mut model = heisenberg5();
    let mut rows = h5_metric_rows();
    // Scale g_{x1x1}, g_{x1y1}, g_{y1y1} only (indices 0, 1 among the coords).
    scale_rows(&mut rows, "121/100", |i, j| i > 1 || j > 1);
    model.metric = parse_upper_owned(&model.chart, &rows);
    model.name = "heisenberg5-plane-scaled".into();
    model
}

/// Structure map of the heisenberg5 model as expression strings:
/// φ∂xᵢ = ∂yᵢ, φ∂yᵢ = −∂xᵢ − yᵢ∂z, φ∂z = 0.
fn h5_phi_rows() -> Vec<Vec<String>> {
    let mut rows = vec![vec!["0".to_string(); 5]; 5];
    rows[1][0] = "1".into(); // φ^{y1}_{x1}
    rows[0][1] = "-1".into(); // φ^{x1}_{y1}
    rows[4][1] = "-y1".into(); // φ^{z}_{y1}
    rows[3][2] = "1".into(); // φ^{y2}_{x2}
    rows[2][3] = "-1".into(); // φ^{x2}_{y2}
    rows[4][3] = "-y2".into(); // φ^{z}_{y2}
    rows
}

/// Rotation by angle β in the g-orthonormal ξ-plane spanned by 2∂y₁ and
/// 2(∂x₂ + y₂∂z), as a coordinate matrix of expression strings; the identity
/// on the orthogonal complement (which contains the Reeb direction).
fn h5_plane_rotation_rows(beta: &str) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["0".to_string(); 5]; 5];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = "1".into();
    }
    rows[1][1] = format!("cos({beta})");
    rows[2][1] = format!("sin({beta})");
    rows[4][1] = format!("sin({beta})*y2");
    rows[1][2] = format!("-sin({beta})");
    rows[2][2] = format!("cos({beta})");
    rows[4][2] = format!("(cos({beta})-1)*y2");
    rows
}

fn mat_mul_rows(a: &[Vec<String>], b: &[Vec<String>]) -> Vec<Vec<String>> {
    let d = a.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let terms: Vec<String> = (0..d)
                        .filter(|&k| a[i][k] != "0" && b[k][j] != "0")
                        .map(|k| format!("({})*({})", a[i][k], b[k][j]))
                        .collect();
                    if terms.is_empty() {
                        "0".to_string()
                    } else {
                        terms.join("+")
                    }
                })
                .collect()
        })
        .collect()
}

/// Negative control for CR integrability: the structure map of heisenberg5
/// is conjugated by the position-dependent isometry G rotating one fixed
/// ξ-plane by the angle 0.1·x₁. The conjugate passes every pointwise axiom
/// (it squares to −id + R⊗α, kills R, preserves ξ, is g-antisymmetric) but
/// its torsion no longer lies along the Reeb direction.
pub fn heisenberg5_twisted() -> ContactModel {
    let mut model = heisenberg5();
    let coords: Vec<String> = H5_COORDS.iter().map(|s| s.to_string()).collect();
    let g = h5_plane_rotation_rows("x1/10");
    let g_inv = h5_plane_rotation_rows("-x1/10");
    let twisted = mat_mul_rows(&g, &mat_mul_rows(&h5_phi_rows(), &g_inv));
    model.j_field = Some(
        twisted
            .iter()
            .flatten()
            .map(|s| parse(s, &coords).expect("twisted structure map must parse"))
            .collect(),
    );
    model.name = "heisenberg5-twisted".into();
    model
}

#[derive(Deserialize)]
struct RawManifest {
    dim: usize,
    coords: Vec<String>,
    alpha: Vec<String>,
    metric: Vec<Vec<String>>,
    #[serde(rename = "J", default)]
    j: Option<Vec<Vec<String>>>,
    inj: NumberOrUnknown,
    conv: NumberOrUnknown,
    n: usize,
    #[serde(default)]
    orbits: Vec<RawOrbit>,
}

#[derive(Deserialize)]
struct RawOrbit {
    point: Vec<f64>,
    period: NumberOrUnknown,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrUnknown {
    Number(f64),
    Word(String),
}

impl NumberOrUnknown {
    /// `"unknown"` maps to None; a number must be positive and finite.
    fn resolve(&self, path: &str) -> Result<Option<f64>> {
        match self {
            NumberOrUnknown::Number(v) => {
                if v.is_finite() && *v > 0.0 {
                    Ok(Some(*v))
                } else {
                    Err(Error::Manifest {
                        path: path.to_string(),
                        reason: format!("must be a positive finite number, got {v}"),
                    })
                }
            }
            NumberOrUnknown::Word(w) => {
                if w == "unknown" {
                    Ok(None)
                } else {
                    Err(Error::Manifest {
                        path: path.to_string(),
                        reason: format!("expected a number or \"unknown\", got \"{w}\""),
                    })
                }
            }
        }
    }
}

/// Reads a model manifest from a JSON file. See [`manifest_from_str`].
pub fn manifest_from_path(path: &str) -> Result<ContactModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ManifestRead {
        reason: format!("{path}: {e}"),
    })?;
    let stem = std::path::Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("manifest");
    let mut model = manifest_from_str(&text)?;
    model.name = stem.to_string();
    Ok(model)
}

/// Parses and validates a model manifest:
/// `{"dim", "coords", "alpha", "metric", "J"?, "inj", "conv", "n", "orbits"?}`
/// with expression-string entries. The metric may be given as the full d×d
/// matrix (checked numerically for symmetry) or as its upper triangle; `inj`,
/// `conv`, and orbit periods accept a number or the string `"unknown"`.
/// The chart is unbounded.
pub fn manifest_from_str(text: &str) -> Result<ContactModel> {
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| Error::ManifestRead {
        reason: e.to_string(),
    })?;
    if raw.n == 0 {
        return Err(Error::Manifest {
            path: "n".into(),
            reason: "half-dimension n must be at least 1".into(),
        });
    }
    let d = raw.dim;
    if d != 2 * raw.n + 1 {
        return Err(Error::Manifest {
            path: "dim".into(),
            reason: format!("dim must equal 2n+1 = {}, got {d}", 2 * raw.n + 1),
        });
    }
    if raw.coords.len() != d {
        return Err(Error::Manifest {
            path: "coords".into(),
            reason: format!("expected {d} coordinate names, got {}", raw.coords.len()),
        });
    }
    for (i, name) in raw.coords.iter().enumerate() {
        if name.is_empty() || raw.coords[..i].contains(name) {
            return Err(Error::Manifest {
                path: format!("coords[{i}]"),
                reason: format!("coordinate names must be distinct and non-empty, got \"{name}\""),
            });
        }
    }
    if raw.alpha.len() != d {
        return Err(Error::Manifest {
            path: "alpha".into(),
            reason: format!("expected {d} form components, got {}", raw.alpha.len()),
        });
    }
    let alpha: Vec<Expr> = raw
        .alpha
        .iter()
        .enumerate()
        .map(|(i, src)| {
            parse(src, &raw.coords).map_err(|e| Error::Manifest {
                path: format!("alpha[{i}]"),
                reason: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let upper = validated_metric_upper(&raw, d)?;
    let names: Vec<&str> = raw.coords.iter().map(String::as_str).collect();
    let chart = Chart::new(&names, None);
    let metric = {
        let borrowed: Vec<Vec<&str>> = upper
            .iter()
            .map(|r| r.iter().map(String::as_str).collect())
            .collect();
        let slices: Vec<&[&str]> = borrowed.iter().map(Vec::as_slice).collect();
        // Entries were parsed already; failures here cannot name a field.
        MetricField::parse_upper(&chart, &slices).map_err(|e| Error::Manifest {
            path: "metric".into(),
            reason: e.to_string(),
        })?
    };
    let j_field = match &raw.j {
        None => None,
        Some(rows) => {
            if rows.len() != d {
                return Err(Error::Manifest {
                    path: "J".into(),
                    reason: format!("expected {d} rows, got {}", rows.len()),
                });
            }
            let mut entries = Vec::with_capacity(d * d);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::Manifest {
                        path: format!("J[{i}]"),
                        reason: format!("expected {d} entries, got {}", row.len()),
                    });
                }
                for (jj, src) in row.iter().enumerate() {
                    entries.push(parse(src, &raw.coords).map_err(|e| Error::Manifest {
                        path: format!("J[{i}][{jj}]"),
                        reason: e.to_string(),
                    })?);
                }
            }
            Some(entries)
        }
    };
    let inj = raw.inj.resolve("inj")?;
    let conv = raw.conv.resolve("conv")?;
    let mut orbits = Vec::with_capacity(raw.orbits.len());
    for (k, orbit) in raw.orbits.iter().enumerate() {
        if orbit.point.len() != d {
            return Err(Error::Manifest {
                path: format!("orbits[{k}].point"),
                reason: format!("expected {d} coordinates, got {}", orbit.point.len()),
            });
        }
        orbits.push(OrbitSeed {
            point: orbit.point.clone(),
            period: orbit.period.resolve(&format!("orbits[{k}].period"))?,
        });
    }
    Ok(ContactModel {
        name: "manifest".into(),
        chart,
        alpha,
        metric,
        j_field,
        n: raw.n,
        inj,
        conv,
        orbits,
    })
}

/// Accepts the metric as a full matrix (validated for numeric symmetry at
/// seeded sample points) or as an upper triangle (row i holding the entries
/// g_{i,i..d}); returns the upper-triangle rows.
fn validated_metric_upper(raw: &RawManifest, d: usize) -> Result<Vec<Vec<String>>> {
    if raw.metric.len() != d {
        return Err(Error::Manifest {
            path: "metric".into(),
            reason: format!("expected {d} rows, got {}", raw.metric.len()),
        });
    }
    let full = raw.metric.iter().all(|row| row.len() == d);
    let upper = raw
        .metric
        .iter()
        .enumerate()
        .all(|(i, row)| row.len() == d - i);
    // d = 1 cannot happen (d = 2n+1 ≥ 3), so full and upper are exclusive.
    if !full && !upper {
        // Mixed shapes: point at the first row that breaks the full reading.
        let bad = raw
            .metric
            .iter()
            .position(|row| row.len() != d)
            .unwrap_or(0);
        return Err(Error::Manifest {
            path: format!("metric[{bad}]"),
            reason: "rows must form a full d×d matrix or its upper triangle".into(),
        });
    }
    let mut parsed = vec![vec![None::<Expr>; d]; d];
    for (i, row) in raw.metric.iter().enumerate() {
        for (offset, src) in row.iter().enumerate() {
            let j = if full { offset } else { i + offset };
            parsed[i][j] = Some(parse(src, &raw.coords).map_err(|e| Error::Manifest {
                path: format!("metric[{i}][{offset}]"),
                reason: e.to_string(),
            })?);
        }
    }
    if full {
        // Numeric symmetry check at seeded points of the (unbounded) chart.
        let mut rng = sample::rng_for(0x5E_ED);
        for _ in 0..MANIFEST_SYMMETRY_POINTS {
            let p: Vec<f64> = (0..d).map(|_| rng_range(&mut rng)).collect();
            for i in 0..d {
                for j in (i + 1)..d {
                    let gij = eval_entry(parsed[i][j].as_ref().unwrap(), &p, i, j)?;
                    let gji = eval_entry(parsed[j][i].as_ref().unwrap(), &p, j, i)?;
                    if (gij - gji).abs() > MANIFEST_SYMMETRY_TOL * gij.abs().max(1.0) {
                        return Err(Error::Manifest {
                            path: format!("metric[{j}][{i}]"),
                            reason: format!(
                                "metric is not symmetric: g[{i}][{j}] = {gij} but g[{j}][{i}] = {gji} at {p:?}"
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok((0..d)
        .map(|i| {
            (i..d)
                .map(|j| {
                    let src = if full || parsed[i][j].is_some() {
                        &raw.metric[i][if full { j } else { j - i }]
                    } else {
                        unreachable!()
                    };
                    src.clone()
                })
                .collect()
        })
        .collect())
}

fn rng_range(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.gen_range(-1.0..1.0)
}

fn eval_entry(e: &Expr, p: &[f64], i: usize, j: usize) -> Result<f64> {
    crate::expr::eval_jet(e, p, 0)
        .map(|jet| Scalar::val(&jet))
        .map_err(|err| Error::Manifest {
            path: format!("metric[{i}][{j}]"),
            reason: format!("cannot evaluate at {p:?}: {err}"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{frame_jets, reeb_at};

    #[test]
    fn registry_lists_exactly_the_built_in_models() {
        assert_eq!(list_models(), vec!["heisenberg3", "heisenberg5", "round-s3"]);
    }

    #[test]
    fn unknown_model_names_report_the_available_ones() {
        match get_model("klein-bottle") {
            Err(Error::UnknownModel { name, available }) => {
                assert_eq!(name, "klein-bottle");
                assert!(available.contains("round-s3"));
            }
            other => panic!("expected UnknownModel, got {other:?}"),
        }
    }

    #[test]
    fn registry_self_test_validates_all_metadata() {
        // get_model triggers the lazy self-test; reaching the assertions
        // below means every recomputed value agreed with the table.
        for name in list_models() {
            let spec = get_model(name).unwrap();
            assert_eq!(spec.expected.theta_prime, 2.0);
            assert!(spec.expected.h_is_zero);
            assert!(spec.expected.is_cr);
        }
        assert_eq!(get_model("round-s3").unwrap().expected.sec_range, (1.0, 1.0));
        assert_eq!(get_model("heisenberg5").unwrap().expected.ric_reeb, 4.0);
    }

    #[test]
    fn bound_inputs_come_straight_from_the_metadata() {
        let s3 = model_bound_inputs(get_model("round-s3").unwrap()).unwrap();
        assert_eq!(s3.n, 1);
        assert!((s3.inj - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!((s3.kappa, s3.k_upper, s3.sec_abs), (1.0, 1.0, 1.0));
        assert_eq!((s3.theta_prime, s3.ric_min), (2.0, 2.0));
        let h3 = model_bound_inputs(get_model("heisenberg3").unwrap()).unwrap();
        assert_eq!(h3.inj, 10.0);
        assert_eq!((h3.kappa, h3.k_upper, h3.sec_abs), (-3.0, 1.0, 3.0));
        let h5 = model_bound_inputs(get_model("heisenberg5").unwrap()).unwrap();
        assert_eq!(h5.n, 2);
        assert_eq!(h5.ric_min, 4.0);
    }

    #[test]
    fn five_dimensional_rotation_matches_the_hand_table() {
        let model = heisenberg5();
        let p = [0.4, -0.9, 1.3, 0.6, -0.2];
        let fj = frame_jets(&model, &p).unwrap();
        let phi = fj.phi_values();
        // φ∂xᵢ = ∂yᵢ, φ∂yᵢ = −∂xᵢ − yᵢ∂z, φ∂z = 0.
        let mut expect = vec![vec![0.0; 5]; 5];
        expect[1][0] = 1.0;
        expect[0][1] = -1.0;
        expect[4][1] = -p[1];
        expect[3][2] = 1.0;
        expect[2][3] = -1.0;
        expect[4][3] = -p[3];
        for i in 0..5 {
            for j in 0..5 {
                assert!(
                    (phi.at(i, j) - expect[i][j]).abs() < 1e-10,
                    "φ^{i}_{j} = {} expected {}",
                    phi.at(i, j),
                    expect[i][j]
                );
            }
        }
        let reeb = reeb_at(&model, &p).unwrap();
        for (k, r) in reeb.iter().enumerate() {
            let expect = if k == 4 { 2.0 } else { 0.0 };
            assert!((r - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_frame_at_the_orbit_seed_point() {
        let model = round_s3();
        // At (1, 0, 0) the chart factor is F = 1/2, the pullback form is dy,
        // and the Reeb field is ∂y — the tangent of the seed circle.
        let frame = frame_at(&model, &[1.0, 0.0, 0.0]).unwrap();
        assert!((frame.alpha[0]).abs() < 1e-12);
        assert!((frame.alpha[1] - 1.0).abs() < 1e-12);
        assert!((frame.alpha[2]).abs() < 1e-12);
        assert!((frame.reeb[0]).abs() < 1e-12);
        assert!((frame.reeb[1] - 1.0).abs() < 1e-12);
        assert!((frame.reeb[2]).abs() < 1e-12);
        assert!((frame.rho - 1.0).abs() < 1e-12);
        assert!((frame.theta_prime - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_reeb_field_is_tangent_to_the_seed_circle() {
        // The Hopf fiber through (1,0,0) is t ↦ (cos t, sin t, 0) in the
        // chart; the Reeb field evaluated on the circle must match its
        // velocity exactly (orbit closure depends on it).
        let model = round_s3();
        for k in 0..8 {
            let t = 0.25 * std::f64::consts::PI * k as f64;
            let p = [t.cos(), t.sin(), 0.0];
            let r = reeb_at(&model, &p).unwrap();
            assert!(
                (r[0] + t.sin()).abs() < 1e-11
                    && (r[1] - t.cos()).abs() < 1e-11
                    && (r[2]).abs() < 1e-11,
                "Reeb field {r:?} is not the circle velocity at t = {t}"
            );
        }
        let seed = &model.orbits[0];
        assert_eq!(seed.point, vec![1.0, 0.0, 0.0]);
        assert!((seed.period.unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn function_scaled_metric_fails_the_classification() {
        match compatibility_classify(&heisenberg3_stretched(), 40, 7).unwrap() {
            Classification::WeaklyCompatible { failed, .. } => {
                assert!(failed.contains("unit-reeb"), "failed = {failed}");
                assert!(failed.contains("theta-constancy"), "failed = {failed}");
            }
            other => panic!("expected weak compatibility, got {other:?}"),
        }
    }

    #[test]
    fn constant_scaled_metric_fails_only_the_unit_reeb_condition() {
        match compatibility_classify(&heisenberg3_scaled(), 40, 7).unwrap() {
            Classification::WeaklyCompatible { failed, c_samples } => {
                assert_eq!(failed, "unit-reeb");
                // c = 2/1.21 everywhere: dα is untouched while g|ξ doubles.
                for c in c_samples {
                    assert!((c - 2.0 / 1.21).abs() < 1e-9);
                }
            }
            other => panic!("expected weak compatibility, got {other:?}"),
        }
    }

    #[test]
    fn plane_scaled_metric_keeps_the_unit_reeb_but_not_the_speed() {
        match compatibility_classify(&heisenberg3_plane_scaled(), 40, 7).unwrap() {
            Classification::WeaklyCompatible { failed, .. } => {
                assert_eq!(failed, "theta-constancy");
            }
            other => panic!("expected weak compatibility, got {other:?}"),
        }
    }

    #[test]
    fn unequal_plane_speeds_are_incompatible_in_dimension_five() {
        match compatibility_classify(&heisenberg5_plane_scaled(), 40, 7).unwrap() {
            Classification::Incompatible { failed, residual, .. } => {
                assert_eq!(failed, "A2-scalar");
                // The two horizontal planes rotate at speeds 2/1.21 vs 2.
                assert!(residual > 0.05, "defect should be macroscopic, got {residual}");
            }
            other => panic!("expected incompatibility, got {other:?}"),
        }
    }

    #[test]
    fn twisted_structure_map_passes_the_axioms_but_not_integrability() {
        let twisted = heisenberg5_twisted();
        // The conjugated map satisfies every pointwise axiom, so frames build
        // fine and the classification still reads compatible...
        let p = [0.8, -0.3, 0.2, 1.1, 0.5];
        frame_jets(&twisted, &p).unwrap();
        match compatibility_classify(&twisted, 20, 11).unwrap() {
            Classification::Compatible { theta_prime, .. } => {
                assert!((theta_prime - 2.0).abs() < 1e-9);
            }
            other => panic!("expected compatible, got {other:?}"),
        }
        // ...but the torsion acquires a ξ-component.
        let (cr, residual) = is_cr(&twisted, 20, 11).unwrap();
        assert!(!cr, "twisted map must fail integrability (residual {residual:.3e})");
        assert!(residual > 1e-3);
        // The untouched model is integrable under the same sampling.
        let (cr0, _) = is_cr(&heisenberg5(), 20, 11).unwrap();
        assert!(cr0);
    }

    fn h3_manifest_full_metric() -> String {
        r#"{
            "dim": 3,
            "coords": ["x", "y", "z"],
            "alpha": ["-y/2", "0", "1/2"],
            "metric": [
                ["(1+y^2)/4", "0", "-y/4"],
                ["0", "1/4", "0"],
                ["-y/4", "0", "1/4"]
            ],
            "inj": 10,
            "conv": "unknown",
            "n": 1,
            "orbits": []
        }"#
        .to_string()
    }

    #[test]
    fn manifest_with_a_full_metric_reproduces_the_built_in_model() {
        let model = manifest_from_str(&h3_manifest_full_metric()).unwrap();
        assert_eq!(model.n, 1);
        assert_eq!(model.inj, Some(10.0));
        assert_eq!(model.conv, None);
        let r = reeb_at(&model, &[0.3, -1.2, 0.7]).unwrap();
        assert!((r[0]).abs() < 1e-12 && (r[1]).abs() < 1e-12 && (r[2] - 2.0).abs() < 1e-12);
        match compatibility_classify(&model, 20, 3).unwrap() {
            Classification::Compatible { theta_prime, .. } => {
                assert!((theta_prime - 2.0).abs() < 1e-9)
            }
            other => panic!("expected compatible, got {other:?}"),
        }
    }

    #[test]
    fn manifest_accepts_the_upper_triangle_form() {
        let text = r#"{
            "dim": 3,
            "coords": ["x", "y", "z"],
            "alpha": ["-y/2", "0", "1/2"],
            "metric": [
                ["(1+y^2)/4", "0", "-y/4"],
                ["1/4", "0"],
                ["1/4"]
            ],
            "inj": "unknown",
            "conv": "unknown",
            "n": 1
        }"#;
        let model = manifest_from_str(text).unwrap();
        assert_eq!(model.inj, None);
        let r = reeb_at(&model, &[0.0, 0.5, 0.0]).unwrap();
        assert!((r[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn manifest_rejects_an_asymmetric_metric_with_the_field_path() {
        let text = h3_manifest_full_metric().replace(r#"["0", "1/4", "0"]"#, r#"["1/10", "1/4", "0"]"#);
        match manifest_from_str(&text) {
            Err(Error::Manifest { path, reason }) => {
                assert_eq!(path, "metric[1][0]");
                assert!(reason.contains("not symmetric"));
            }
            other => panic!("expected a symmetry error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_rejects_structural_mismatches_with_field_paths() {
        let base = h3_manifest_full_metric();
        let wrong_dim = base.replace(r#""dim": 3"#, r#""dim": 5"#);
        match manifest_from_str(&wrong_dim) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "dim"),
            other => panic!("expected a dim error, got {other:?}"),
        }
        let bad_expr = base.replace(r#""alpha": ["-y/2", "0", "1/2"]"#, r#""alpha": ["-y/**2", "0", "1/2"]"#);
        match manifest_from_str(&bad_expr) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "alpha[0]"),
            other => panic!("expected an alpha error, got {other:?}"),
        }
        let bad_inj = base.replace(r#""inj": 10"#, r#""inj": "infinite""#);
        match manifest_from_str(&bad_inj) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "inj"),
            other => panic!("expected an inj error, got {other:?}"),
        }
        let dup = base.replace(r#""coords": ["x", "y", "z"]"#, r#""coords": ["x", "x", "z"]"#);
        match manifest_from_str(&dup) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "coords[1]"),
            other => panic!("expected a coords error, got {other:?}"),
        }
        let bad_orbit = base.replace(
            r#""orbits": []"#,
            r#""orbits": [{"point": [0, 0], "period": "unknown"}]"#,
        );
        match manifest_from_str(&bad_orbit) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "orbits[0].point"),
            other => panic!("expected an orbit error, got {other:?}"),
        }
        let ragged = base.replace(r#"["0", "1/4", "0"]"#, r#"["0", "1/4"]"#);
        match manifest_from_str(&ragged) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "metric[1]"),
            other => panic!("expected a metric shape error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_read_failures_are_distinguished_from_validation() {
        match manifest_from_str("{ not json") {
            Err(Error::ManifestRead { .. }) => {}
            other => panic!("expected a read error, got {other:?}"),
        }
        match manifest_from_path("/nonexistent/model.json") {
            Err(Error::ManifestRead { reason }) => assert!(reason.contains("/nonexistent")),
            other => panic!("expected a read error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_from_path_names_the_model_after_the_file() {
        let dir = std::env::temp_dir().join("contact-core-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("my-model.json");
        std::fs::write(&file, h3_manifest_full_metric()).unwrap();
        let model = manifest_from_path(file.to_str().unwrap()).unwrap();
        assert_eq!(model.name, "my-model");
        std::fs::remove_file(&file).ok();
    }

    #[test]
    fn manifest_accepts_a_user_structure_map() {
        let text = h3_manifest_full_metric().replace(
            r#""inj": 10,"#,
            r#""inj": 10,
            "J": [
                ["0", "-1", "0"],
                ["1", "0", "0"],
                ["0", "-y", "0"]
            ],"#,
        );
        let model = manifest_from_str(&text).unwrap();
        assert!(model.j_field.is_some());
        // The supplied map is the derived one, so frames validate fine.
        frame_jets(&model, &[0.2, 0.4, -0.1]).unwrap();
    }
}
