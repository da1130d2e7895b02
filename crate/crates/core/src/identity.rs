//! Sampled verification of the structural identities of a compatible
//! contact metric structure.
//!
//! The suite draws seeded random chart points, rebuilds the pointwise frame
//! (φ, h, R_α, II, Christoffels) through automatic differentiation, and
//! measures each identity's relative residual. Equality checks report the
//! worst residual over all samples; inequality checks additionally report
//! the minimum margin (RHS − LHS, so negative means violated). Tensor
//! derivatives are always taken covariantly — jet fields plus Christoffel
//! corrections — never by finite-differencing frames.
//!
//! Brackets of vector fields use ξ-projected constant extensions
//! v(x) = w − α_x(w)R_α(x); every quantity compared is tensorial, so the
//! extension choice cannot affect the limits, only the roundoff.

use crate::contact::{
    compatibility_classify, frame_jets, nijenhuis_at, Classification, ContactModel, FrameJets,
};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::geodesic::{CsvRow, ProbeReport, Worst};
use crate::geometry::{point_geometry, ricci_direction, PointGeometry};
use crate::jet::Jet;
use crate::linalg::{self, Mat};
use crate::sample;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Default relative-residual tolerance for the equality checks.
pub const DEFAULT_IDENTITY_TOL: f64 = 1e-6;
/// The Levi-form comparison runs at 10× the base tolerance: it compares two
/// independent second-derivative pipelines (exterior derivative of df∘J
/// against covariant Hessians), so its roundoff floor is higher.
pub const LEVI_TOL_FACTOR: f64 = 10.0;
/// Absolute pass line used by the Levi probe wrapper.
pub const LEVI_TOL: f64 = 1e-5;
/// Complex-tangency membership quality demanded of every Levi sample:
/// |df(v)| and |df(Jv)| must sit below this after projection.
pub const LEVI_MEMBERSHIP_TOL: f64 = 1e-10;

/// Decouples the suite's sample stream from the classification pass that
/// shares the same user seed.
const SUITE_SALT: u64 = 0x1DE2_717E_0AB5_C4D3;
/// Stream for the random-quadratic Levi test function's coefficients.
const QUAD_SALT: u64 = 0xF0F5_EED0_421A_B001;
/// Gradient floor below which a level set is treated as degenerate at the
/// sample point (the |x|² surrogate near the chart origin).
const LEVI_GRADIENT_FLOOR: f64 = 1e-8;

/// Canonical order in which the suite reports its checks.
pub const CHECK_IDS: [&str; 15] = [
    "reeb-geodesic",
    "phi-square",
    "h-symmetric",
    "nabla-reeb",
    "anticommute",
    "ii-trace",
    "reeb-J-commute",
    "nabla-phi",
    "ricci-h",
    "nabla-reeb-norm",
    "nabla-phi-norm",
    "levi",
    "levi-AB",
    "torsion-3d",
    "torsion-relation",
];

const REEB_GEODESIC: usize = 0;
const PHI_SQUARE: usize = 1;
const H_SYMMETRIC: usize = 2;
const NABLA_REEB: usize = 3;
const ANTICOMMUTE: usize = 4;
const II_TRACE: usize = 5;
const REEB_J_COMMUTE: usize = 6;
const NABLA_PHI: usize = 7;
const RICCI_H: usize = 8;
const NABLA_REEB_NORM: usize = 9;
const NABLA_PHI_NORM: usize = 10;
const LEVI: usize = 11;
const LEVI_AB: usize = 12;
const TORSION_3D: usize = 13;
const TORSION_RELATION: usize = 14;

/// Outcome of one identity check over the whole sample set.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check_id: String,
    /// Worst relative residual (equalities) or worst violation (inequalities).
    pub residual: f64,
    /// Inequalities only: minimum of RHS − LHS over the samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Sample point at which the worst residual/margin occurred (empty when
    /// the check did not run, e.g. a dimension-gated check).
    pub worst_point: Vec<f64>,
    pub samples: usize,
}

/// Per-check accumulator while the sample loop runs.
struct Acc {
    id: &'static str,
    residual: f64,
    margin: Option<f64>,
    worst_point: Vec<f64>,
    samples: usize,
}

impl Acc {
    fn new(id: &'static str) -> Self {
        Acc {
            id,
            residual: 0.0,
            margin: None,
            worst_point: Vec::new(),
            samples: 0,
        }
    }

    /// Record one equality sample with relative residual `res`.
    fn hit(&mut self, res: f64, p: &[f64]) {
        self.samples += 1;
        if self.worst_point.is_empty() || res > self.residual {
            self.residual = res;
            self.worst_point = p.to_vec();
        }
    }

    /// Record one inequality sample with margin = RHS − LHS. With
    /// `equality` the two sides are also expected to agree (the residual
    /// tracks |margin| instead of only the violation).
    fn hit_ineq(&mut self, margin: f64, equality: bool, p: &[f64]) {
        self.samples += 1;
        let res = if equality {
            margin.abs()
        } else {
            (-margin).max(0.0)
        };
        let cur = self.margin.unwrap_or(f64::INFINITY);
        if margin < cur {
            self.margin = Some(margin);
        }
        if self.worst_point.is_empty() || res > self.residual || margin < cur {
            self.worst_point = p.to_vec();
        }
        if res > self.residual {
            self.residual = res;
        }
    }

    fn finish(self, tol: f64) -> CheckResult {
        let pass = match self.margin {
            Some(m) => self.residual <= tol && m >= -tol,
            None => self.residual <= tol,
        };
        CheckResult {
            check_id: self.id.to_string(),
            residual: self.residual,
            margin: self.margin,
            tolerance: tol,
            pass,
            worst_point: self.worst_point,
            samples: self.samples,
        }
    }
}

// ─── Small local tensor helpers ──────────────────────────────────────────

fn mat_vec(m: &Mat<f64>, v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| (0..d).map(|j| m.at(i, j) * v[j]).sum())
        .collect()
}

fn frob(m: &Mat<f64>, d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += m.at(i, j) * m.at(i, j);
        }
    }
    s.sqrt()
}

fn quad_form(m: &Mat<f64>, a: &[f64], b: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a[i] * m.at(i, j) * b[j];
        }
    }
    s
}

/// ξ-projected constant extension of the coordinate vector `w`:
/// v(x) = w − α_x(w) R_α(x), as order-1 component jets.
fn xi_extension(fj: &FrameJets, w: &[f64]) -> Vec<Jet> {
    let d = fj.dim();
    let mut aw = Jet::constant(d, 1, 0.0);
    for i in 0..d {
        aw.value += fj.raw.alpha[i].value * w[i];
        for k in 0..d {
            aw.grad[k] += fj.raw.alpha[i].d1(k) * w[i];
        }
    }
    (0..d)
        .map(|m| {
            let r = &fj.raw.reeb[m];
            let mut j = Jet::constant(d, 1, w[m] - aw.value * r.value);
            for k in 0..d {
                j.grad[k] = -(aw.grad[k] * r.value + aw.value * r.d1(k));
            }
            j
        })
        .collect()
}

/// φ applied to a jet field, as a jet field (product rule on values and
/// first derivatives).
fn phi_field(fj: &FrameJets, x: &[Jet]) -> Vec<Jet> {
    let d = fj.dim();
    (0..d)
        .map(|i| {
            let mut j = Jet::constant(d, 1, 0.0);
            for m in 0..d {
                let pim = fj.phi.at(i, m);
                j.value += pim.value * x[m].value;
                for k in 0..d {
                    j.grad[k] += pim.d1(k) * x[m].value + pim.value * x[m].d1(k);
                }
            }
            j
        })
        .collect()
}

/// Lie bracket [a, b] of two jet fields, evaluated at the frame's point.
fn bracket_at(fj: &FrameJets, a: &[Jet], b: &[Jet]) -> Vec<f64> {
    let d = fj.dim();
    (0..d)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..d {
                s += a[i].value * b[k].d1(i) - b[i].value * a[k].d1(i);
            }
            s
        })
        .collect()
}

/// Nijenhuis torsion contraction for arbitrary tangent vectors (the public
/// ξ-gated entry point restricts its arguments; the covariant-derivative
/// identity needs the full tensor).
fn nijenhuis_full(fj: &FrameJets, v: &[f64], w: &[f64]) -> Vec<f64> {
    let d = fj.dim();
    let mut out = vec![0.0; d];
    for m in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            for k in 0..d {
                let vw = v[j] * w[k];
                if vw == 0.0 {
                    continue;
                }
                let mut t = 0.0;
                for l in 0..d {
                    t += fj.phi.at(l, j).value * fj.phi.at(m, k).d1(l)
                        - fj.phi.at(l, k).value * fj.phi.at(m, j).d1(l)
                        + fj.phi.at(l, j).d1(k) * fj.phi.at(m, l).value
                        - fj.phi.at(l, k).d1(j) * fj.phi.at(m, l).value;
                }
                s += vw * t;
            }
        }
        out[m] = s;
    }
    out
}

/// Covariant derivative (∇_u φ)^i_j = u^k(∂_k φ^i_j + Γ^i_{km}φ^m_j −
/// Γ^m_{kj}φ^i_m) as a plain matrix.
fn nabla_phi_matrix(fj: &FrameJets, u: &[f64]) -> Mat<f64> {
    let d = fj.dim();
    Mat::from_fn(d, d, |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            if u[k] == 0.0 {
                continue;
            }
            let mut t = fj.phi.at(i, j).d1(k);
            for m in 0..d {
                t += fj.gamma_at(i, k, m) * fj.phi.at(m, j).value
                    - fj.gamma_at(m, k, j) * fj.phi.at(i, m).value;
            }
            s += u[k] * t;
        }
        s
    })
}

/// Lower Cholesky factor of the (positive definite) metric.
fn cholesky_lower(g: &Mat<f64>, d: usize) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = *g.at(i, j);
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][j] = s.max(1e-300).sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

/// Operator norm of the endomorphism `m` in the g inner product:
/// σ_max(Lᵀ M L⁻ᵀ) where g = LLᵀ.
fn g_operator_norm(g: &Mat<f64>, m: &Mat<f64>, d: usize) -> f64 {
    let l = cholesky_lower(g, d);
    // B solves B Lᵀ = M, row by row via forward substitution.
    let mut b = vec![vec![0.0; d]; d];
    for r in 0..d {
        for i in 0..d {
            let mut s = *m.at(r, i);
            for k in 0..i {
                s -= l[i][k] * b[r][k];
            }
            b[r][i] = s / l[i][i];
        }
    }
    let conj = Mat::from_fn(d, d, |i, j| (i..d).map(|k| l[k][i] * b[k][j]).sum());
    linalg::op_norm(&conj)
}

// ─── Levi-form machinery ─────────────────────────────────────────────────

/// Test functions whose level sets drive the Levi check: every coordinate
/// function, the squared chart radius, and one random quadratic with
/// seed-determined coefficients.
fn levi_functions(model: &ContactModel, seed: u64) -> Result<Vec<Expr>> {
    let coords = &model.chart.coords;
    let mut list = Vec::new();
    for c in coords.iter() {
        list.push(expr::parse(c, coords)?);
    }
    let sq = coords
        .iter()
        .map(|c| format!("{c}^2"))
        .collect::<Vec<_>>()
        .join("+");
    list.push(expr::parse(&sq, coords)?);
    let mut qrng = sample::rng_for(seed ^ QUAD_SALT);
    let mut src = String::new();
    let push_term = |src: &mut String, coef: f64, mono: &str| {
        if src.is_empty() {
            src.push_str(&format!("{coef:.3}*{mono}"));
        } else if coef < 0.0 {
            src.push_str(&format!("-{:.3}*{mono}", -coef));
        } else {
            src.push_str(&format!("+{coef:.3}*{mono}"));
        }
    };
    for i in 0..coords.len() {
        for j in i..coords.len() {
            let a = sample::normal(&mut qrng);
            push_term(&mut src, a, &format!("{}*{}", coords[i], coords[j]));
        }
        let b = sample::normal(&mut qrng);
        push_term(&mut src, b, &coords[i]);
    }
    list.push(expr::parse(&src, coords)?);
    Ok(list)
}

/// One Levi-form comparison at the frame's point for the level sets of `f`.
///
/// Works on the symplectization W = M×ℝ with the product metric g + dt⊗dt
/// and the extension J∂_t = R_α, JR_α = −∂_t. A random W-vector is
/// projected onto the complex tangency C_Σ = ker(df) ∩ ker(df∘J); the
/// external side L(v,v) = −d(df∘J)(v,Jv) comes from differentiating the
/// 1-form η = df∘J, the internal side from covariant Hessians. Returns
/// `None` when the sample is inadmissible (degenerate gradient or
/// near-parallel constraints).
fn levi_sample(
    fj: &FrameJets,
    pg: &PointGeometry,
    f: &Expr,
    rng: &mut ChaCha8Rng,
) -> Result<Option<f64>> {
    let d = fj.dim();
    let fx = expr::eval_jet(f, &fj.point, 2)?;
    let df: Vec<f64> = (0..d).map(|i| fx.d1(i)).collect();
    if linalg::norm(&df) < LEVI_GRADIENT_FLOOR {
        return Ok(None);
    }
    let hess = pg.hessian(&fx);
    let r0 = fj.reeb_values();
    // η_j = ∂_i f φ^i_j on M, η_t = df(R_α); neither depends on t.
    let deta = Mat::from_fn(d, d, |k, j| {
        (0..d)
            .map(|i| fx.d2(k, i) * fj.phi.at(i, j).value + df[i] * fj.phi.at(i, j).d1(k))
            .sum()
    });
    let deta_t: Vec<f64> = (0..d)
        .map(|k| {
            (0..d)
                .map(|i| fx.d2(k, i) * r0[i] + df[i] * fj.raw.reeb[i].d1(k))
                .sum()
        })
        .collect();
    let eta: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| df[i] * fj.phi.at(i, j).value).sum())
        .collect();
    let eta_t: f64 = linalg::dot(&df, &r0);
    // Constraint covectors on W: c1 = df (no dt part), c2 = df∘J.
    let mut c1 = df.clone();
    c1.push(0.0);
    let mut c2 = eta.clone();
    c2.push(eta_t);
    let a11 = linalg::dot(&c1, &c1);
    let a12 = linalg::dot(&c1, &c2);
    let a22 = linalg::dot(&c2, &c2);
    let det = a11 * a22 - a12 * a12;
    if det <= 1e-12 * a11.max(1e-300) * a22.max(1e-300) {
        return Ok(None);
    }
    let w = sample::normal_vector(d + 1, rng);
    let b1 = linalg::dot(&w, &c1);
    let b2 = linalg::dot(&w, &c2);
    let x1 = (a22 * b1 - a12 * b2) / det;
    let x2 = (a11 * b2 - a12 * b1) / det;
    let mut v: Vec<f64> = (0..=d).map(|i| w[i] - x1 * c1[i] - x2 * c2[i]).collect();
    let nrm2 = fj.inner(&v[..d], &v[..d]) + v[d] * v[d];
    if nrm2 < 1e-16 {
        return Ok(None);
    }
    let inv = 1.0 / nrm2.sqrt();
    for x in v.iter_mut() {
        *x *= inv;
    }
    let cs = linalg::norm(&c1).max(linalg::norm(&c2)).max(1.0);
    if linalg::dot(&v, &c1).abs() > LEVI_MEMBERSHIP_TOL * cs
        || linalg::dot(&v, &c2).abs() > LEVI_MEMBERSHIP_TOL * cs
    {
        return Ok(None);
    }
    let vm = &v[..d];
    let vt = v[d];
    // Jv = (φ v_M + v_t R_α, −⟨v_M, R_α⟩).
    let phiv = fj.apply_phi(vm);
    let jv_m: Vec<f64> = (0..d).map(|k| phiv[k] + vt * r0[k]).collect();
    let jv_t = -fj.inner(vm, &r0);
    // dη(u, w) = Σ ∂_iη_j (u^i w^j − w^i u^j) + Σ ∂_iη_t (u^i w^t − u^t w^i).
    let mut dv = 0.0;
    for i in 0..d {
        for j in 0..d {
            dv += deta.at(i, j) * (vm[i] * jv_m[j] - jv_m[i] * vm[j]);
        }
    }
    for i in 0..d {
        dv += deta_t[i] * (vm[i] * jv_t - vt * jv_m[i]);
    }
    let levi = -dv;
    let inner = quad_form(&hess, vm, vm, d) + quad_form(&hess, &jv_m, &jv_m, d);
    let res = (levi - inner).abs() / levi.abs().max(inner.abs()).max(1.0);
    Ok(Some(res))
}

// ─── The suite ───────────────────────────────────────────────────────────

/// Run all fifteen checks on a model classified `Compatible`; θ′ is taken
/// from the classification. Weakly compatible or incompatible models are
/// refused — use [`run_identity_suite_forced`] to diagnose those.
pub fn run_identity_suite(
    model: &ContactModel,
    points: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<CheckResult>> {
    match compatibility_classify(model, points, seed)? {
        Classification::Compatible { theta_prime, .. } => {
            suite_inner(model, points, seed, tol, theta_prime)
        }
        Classification::WeaklyCompatible { failed, .. } => Err(Error::NotCompatible {
            what: format!("identity suite needs a compatible metric (failed: {failed})"),
        }),
        Classification::Incompatible {
            failed, residual, ..
        } => Err(Error::NotCompatible {
            what: format!(
                "identity suite needs a compatible metric ({failed} residual {residual:.3e})"
            ),
        }),
    }
}

/// Diagnostic variant: run the checks with a caller-chosen θ′ and no
/// compatibility gate. Residuals then show exactly which identities a
/// perturbed structure breaks.
pub fn run_identity_suite_forced(
    model: &ContactModel,
    points: usize,
    seed: u64,
    tol: f64,
    theta_prime: f64,
) -> Result<Vec<CheckResult>> {
    suite_inner(model, points, seed, tol, theta_prime)
}

fn suite_inner(
    model: &ContactModel,
    points: usize,
    seed: u64,
    tol: f64,
    tp: f64,
) -> Result<Vec<CheckResult>> {
    let d = model.dim();
    let n = model.n;
    let m2 = 2 * n;
    let levi_tol = tol * LEVI_TOL_FACTOR;
    let mut accs: Vec<Acc> = CHECK_IDS.iter().map(|id| Acc::new(id)).collect();
    let f_exprs = levi_functions(model, seed)?;
    let mut rng = sample::rng_for(seed ^ SUITE_SALT);

    for idx in 0..points.max(1) {
        let p = sample::sample_point(&model.chart, &mut rng);
        let fj = frame_jets(model, &p)?;
        let pg = point_geometry(&model.metric, &p)?;
        let frame = fj.frame();
        let r0 = fj.reeb_values();
        let phiv = fj.phi_values();
        let h = fj.h_matrix();
        let ric_r = ricci_direction(&pg, &r0);

        // reeb-geodesic: ∇_R R = 0 and ∇_R v stays in ξ for ξ fields.
        {
            let nrr = fj.nabla_vector(&r0, &fj.raw.reeb);
            let mut res = fj.norm_g(&nrr) / fj.norm_g(&r0).max(1.0);
            let vf = xi_extension(&fj, &sample::normal_vector(d, &mut rng));
            let nrv = fj.nabla_vector(&r0, &vf);
            res = res.max(fj.alpha_of(&nrv).abs() / fj.norm_g(&nrv).max(1.0));
            accs[REEB_GEODESIC].hit(res, &p);
        }

        // phi-square: φ² = −id + R_α ⊗ α.
        {
            let p2 = phiv.mul_mat(&phiv);
            let alpha = fj.alpha_values();
            let diff = Mat::from_fn(d, d, |i, j| {
                let idm = if i == j { 1.0 } else { 0.0 };
                p2.at(i, j) + idm - r0[i] * alpha[j]
            });
            accs[PHI_SQUARE].hit(frob(&diff, d) / frob(&p2, d).max(1.0), &p);
        }

        // h-symmetric: ⟨hu, v⟩ = ⟨u, hv⟩ on ξ.
        let hmat = {
            let hx: Vec<Vec<f64>> = frame
                .xi_basis
                .iter()
                .map(|e| mat_vec(&h, e, d))
                .collect();
            let hmat = Mat::from_fn(m2, m2, |a, b| fj.inner(&frame.xi_basis[a], &hx[b]));
            let mut asym = 0.0_f64;
            for a in 0..m2 {
                for b in 0..m2 {
                    asym = asym.max((hmat.at(a, b) - hmat.at(b, a)).abs());
                }
            }
            accs[H_SYMMETRIC].hit(asym / frob(&hmat, m2).max(1.0), &p);
            hmat
        };

        // nabla-reeb: ∇_u R_α = φ(θ′/2 · u − h u).
        for _ in 0..2 {
            let u = sample::normal_vector(d, &mut rng);
            let lhs = fj.nabla_vector(&u, &fj.raw.reeb);
            let hu = mat_vec(&h, &u, d);
            let arg: Vec<f64> = (0..d).map(|k| 0.5 * tp * u[k] - hu[k]).collect();
            let rhs = fj.apply_phi(&arg);
            let diff: Vec<f64> = (0..d).map(|k| lhs[k] - rhs[k]).collect();
            let res = fj.norm_g(&diff) / fj.norm_g(&lhs).max(fj.norm_g(&rhs)).max(1.0);
            accs[NABLA_REEB].hit(res, &p);
        }

        // anticommute: φh + hφ = 0.
        {
            let ph = phiv.mul_mat(&h);
            let hp = h.mul_mat(&phiv);
            let s = Mat::from_fn(d, d, |i, j| ph.at(i, j) + hp.at(i, j));
            accs[ANTICOMMUTE].hit(frob(&s, d) / frob(&ph, d).max(1.0), &p);
        }

        // ii-trace: II(v,v) + II(Jv,Jv) = 0.
        for _ in 0..2 {
            let c = sample::normal_vector(m2, &mut rng);
            let mut v = vec![0.0; d];
            for (a, ca) in c.iter().enumerate() {
                for k in 0..d {
                    v[k] += ca * frame.xi_basis[a][k];
                }
            }
            let jv = fj.apply_phi(&v);
            let cj: Vec<f64> = (0..m2).map(|a| fj.inner(&jv, &frame.xi_basis[a])).collect();
            let ii_v = quad_form(&frame.ii, &c, &c, m2);
            let ii_jv = quad_form(&frame.ii, &cj, &cj, m2);
            let res = (ii_v + ii_jv).abs() / (ii_v.abs() + ii_jv.abs()).max(1.0);
            accs[II_TRACE].hit(res, &p);
        }

        // reeb-J-commute: ∇_R (Jv) = J(∇_R v) for ξ fields.
        {
            let vf = xi_extension(&fj, &sample::normal_vector(d, &mut rng));
            let jvf = phi_field(&fj, &vf);
            let lhs = fj.nabla_vector(&r0, &jvf);
            let rhs = fj.apply_phi(&fj.nabla_vector(&r0, &vf));
            let diff: Vec<f64> = (0..d).map(|k| lhs[k] - rhs[k]).collect();
            let res = fj.norm_g(&diff) / fj.norm_g(&lhs).max(fj.norm_g(&rhs)).max(1.0);
            accs[REEB_J_COMMUTE].hit(res, &p);
        }

        // nabla-phi: ⟨(∇_u φ)v, w⟩ against the torsion formula, with u = R_α
        // on the first triple and fully mixed directions afterwards.
        for pick in 0..2 {
            let u = if pick == 0 {
                r0.clone()
            } else {
                sample::normal_vector(d, &mut rng)
            };
            let v = sample::normal_vector(d, &mut rng);
            let w = sample::normal_vector(d, &mut rng);
            let np = nabla_phi_matrix(&fj, &u);
            let lhs = fj.inner(&mat_vec(&np, &v, d), &w);
            let nij = nijenhuis_full(&fj, &v, &w);
            let uxi = fj.xi_project(&u);
            let vxi = fj.xi_project(&v);
            let wxi = fj.xi_project(&w);
            let rhs = 0.5
                * (fj.inner(&nij, &fj.apply_phi(&u)) - tp * fj.alpha_of(&w) * fj.inner(&uxi, &vxi)
                    + tp * fj.alpha_of(&v) * fj.inner(&uxi, &wxi));
            let res = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
            accs[NABLA_PHI].hit(res, &p);
        }

        // ricci-h: ‖h|ξ‖² ≤ n(θ′/2)² − ½Ric(R_α), an equality in dimension 3.
        {
            let hsym = Mat::from_fn(m2, m2, |a, b| 0.5 * (hmat.at(a, b) + hmat.at(b, a)));
            let evs = linalg::sym_eigenvalues(&hsym);
            let hop = evs.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
            let rhs = n as f64 * (0.5 * tp) * (0.5 * tp) - 0.5 * ric_r;
            accs[RICCI_H].hit_ineq(rhs - hop * hop, n == 1, &p);
        }

        // nabla-reeb-norm and nabla-phi-norm share the pointwise constant
        // B = θ′/2 + √(nθ′²/4 − ½Ric(R_α)) that dominates ‖h‖ via ricci-h.
        {
            let bpt = 0.5 * tp + (n as f64 * tp * tp / 4.0 - 0.5 * ric_r).max(0.0).sqrt();
            for _ in 0..2 {
                let raw = sample::normal_vector(d, &mut rng);
                let nu = fj.norm_g(&raw);
                if nu < 1e-12 {
                    continue;
                }
                let u: Vec<f64> = raw.iter().map(|x| x / nu).collect();
                let nr = fj.nabla_vector(&u, &fj.raw.reeb);
                accs[NABLA_REEB_NORM].hit_ineq(bpt - fj.norm_g(&nr), false, &p);
                let np = nabla_phi_matrix(&fj, &u);
                let opn = g_operator_norm(&frame.g, &np, d);
                accs[NABLA_PHI_NORM].hit_ineq(2.0 * bpt - opn, false, &p);
            }
        }

        // levi: L(v,v) = ∇²f(v,v) + ∇²f(Jv,Jv) on complex tangencies.
        {
            let f = &f_exprs[idx % f_exprs.len()];
            for _ in 0..2 {
                if let Some(res) = levi_sample(&fj, &pg, f, &mut rng)? {
                    accs[LEVI].hit(res, &p);
                }
            }
        }

        // levi-AB: the two tensors behind the Levi computation reduce to
        // A(v) = −θ′‖v‖²∂_t and B(v) = −θ′v.
        {
            let vf = xi_extension(&fj, &sample::normal_vector(d, &mut rng));
            let v0: Vec<f64> = vf.iter().map(|j| j.value).collect();
            let jvf = phi_field(&fj, &vf);
            let jv0: Vec<f64> = jvf.iter().map(|j| j.value).collect();
            let v2 = fj.inner(&v0, &v0);
            // A(v) = J[Jv, v] − ∇_v v − ∇_{Jv} Jv with J u = φu − ⟨u,R⟩∂_t.
            let br1 = bracket_at(&fj, &jvf, &vf);
            let pa = fj.apply_phi(&br1);
            let dvv = fj.nabla_vector(&v0, &vf);
            let djj = fj.nabla_vector(&jv0, &jvf);
            let a_m: Vec<f64> = (0..d).map(|k| pa[k] - dvv[k] - djj[k]).collect();
            let a_t = -fj.inner(&br1, &r0);
            let scale_a = (tp * v2).abs().max(1.0);
            let res_a = (fj.inner(&a_m, &a_m).max(0.0) + (a_t + tp * v2) * (a_t + tp * v2))
                .sqrt()
                / scale_a;
            // B(v) = J[v, R] + ∇_{Jv} R + ∇_R (Jv).
            let br2 = bracket_at(&fj, &vf, &fj.raw.reeb);
            let pb = fj.apply_phi(&br2);
            let djn = fj.nabla_vector(&jv0, &fj.raw.reeb);
            let dnj = fj.nabla_vector(&r0, &jvf);
            let b_m: Vec<f64> = (0..d).map(|k| pb[k] + djn[k] + dnj[k] + tp * v0[k]).collect();
            let b_t = -fj.inner(&br2, &r0);
            let scale_b = (tp * v2.sqrt()).abs().max(1.0);
            let res_b = (fj.inner(&b_m, &b_m).max(0.0) + b_t * b_t).sqrt() / scale_b;
            accs[LEVI_AB].hit(res_a.max(res_b), &p);
        }

        // torsion-3d: [φ,φ](v, φv) = −θ′‖v‖² R_α, dimension 3 only.
        if n == 1 {
            let v = fj.xi_project(&sample::normal_vector(d, &mut rng));
            let pv = fj.apply_phi(&v);
            let nij = nijenhuis_at(&fj, &v, &pv)?;
            let v2 = fj.inner(&v, &v);
            let diff: Vec<f64> = (0..d).map(|k| nij[k] + tp * v2 * r0[k]).collect();
            accs[TORSION_3D].hit(fj.norm_g(&diff) / (tp * v2).abs().max(1.0), &p);
        }

        // torsion-relation: [φ,φ](v,w) = [J,J](v,w) + θ′⟨v, Jw⟩ R_α on ξ,
        // with [J,J](v,w) = −[v,w] + [Jv,Jw] − J([Jv,w] + [v,Jw]) computed
        // from bracket extensions.
        {
            let vf = xi_extension(&fj, &sample::normal_vector(d, &mut rng));
            let wf = xi_extension(&fj, &sample::normal_vector(d, &mut rng));
            let v0: Vec<f64> = vf.iter().map(|j| j.value).collect();
            let w0: Vec<f64> = wf.iter().map(|j| j.value).collect();
            let jvf = phi_field(&fj, &vf);
            let jwf = phi_field(&fj, &wf);
            let nij = nijenhuis_at(&fj, &v0, &w0)?;
            let b_vw = bracket_at(&fj, &vf, &wf);
            let b_jvjw = bracket_at(&fj, &jvf, &jwf);
            let b_jvw = bracket_at(&fj, &jvf, &wf);
            let b_vjw = bracket_at(&fj, &vf, &jwf);
            let mixed: Vec<f64> = (0..d).map(|k| b_jvw[k] + b_vjw[k]).collect();
            let pmix = fj.apply_phi(&mixed);
            let corr = tp * fj.inner(&v0, &fj.apply_phi(&w0));
            let rhs: Vec<f64> = (0..d)
                .map(|k| -b_vw[k] + b_jvjw[k] - pmix[k] + corr * r0[k])
                .collect();
            let diff: Vec<f64> = (0..d).map(|k| nij[k] - rhs[k]).collect();
            let res = fj.norm_g(&diff) / fj.norm_g(&nij).max(fj.norm_g(&rhs)).max(1.0);
            accs[TORSION_RELATION].hit(res, &p);
        }
    }

    Ok(accs
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.finish(if i == LEVI { levi_tol } else { tol }))
        .collect())
}

/// Levi-form comparison as a probe: samples `triples` admissible
/// (point, function, tangency-vector) combinations and reports
/// margin = −residual per sample, so the probe passes when every residual
/// stays below the Levi tolerance.
pub fn levi_probe(model: &ContactModel, triples: usize, seed: u64) -> Result<ProbeReport> {
    let f_exprs = levi_functions(model, seed)?;
    let mut rng = sample::rng_for(seed ^ SUITE_SALT ^ 0x1E71);
    let mut rows: Vec<CsvRow> = Vec::with_capacity(triples);
    let mut margin_min = f64::INFINITY;
    let mut worst = Worst {
        direction: 0,
        s: 0.0,
    };
    let mut count = 0usize;
    let mut attempts = 0usize;
    let budget = triples.max(1) * 20;
    while count < triples.max(1) && attempts < budget {
        attempts += 1;
        let p = sample::sample_point(&model.chart, &mut rng);
        let fj = frame_jets(model, &p)?;
        let pg = point_geometry(&model.metric, &p)?;
        let f = &f_exprs[attempts % f_exprs.len()];
        if let Some(res) = levi_sample(&fj, &pg, f, &mut rng)? {
            let m = -res;
            rows.push(CsvRow {
                dir_index: count,
                s: 0.0,
                margin: m,
            });
            if m < margin_min {
                margin_min = m;
                worst.direction = count;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidInputs {
            reason: "no admissible complex-tangency samples (all level sets degenerate)".into(),
        });
    }
    Ok(ProbeReport {
        probe_id: "levi".into(),
        radius: 0.0,
        samples: count,
        margin_min,
        worst,
        pass: margin_min >= -LEVI_TOL,
        ratio_min: None,
        closure_defect: None,
        rows,
    })
}

// ─── Tests ───────────────────────────────────────────────────────────────
