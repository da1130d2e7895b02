//! Contact-metric structure extraction: Reeb field, rotation speed, the
//! tensors φ, h, II, Nijenhuis torsion, and the compatibility classification.
//!
//! The point pipeline (kernel of dα → Reeb field → A = g⁻¹dα → rotation
//! speed c → φ = A/c → unit normal) is generic over the scalar type, so the
//! identical code path runs on plain numbers and on first-order jets. The
//! jet instantiation hands the identity suite exact coordinate derivatives
//! of R, φ, and the unit normal — no finite differencing anywhere.
//!
//! Conventions used throughout:
//!   (dα)_{ij} = ∂_i α_j − ∂_j α_i        (so dα(X,Y) = Xα(Y) − Yα(X) − α([X,Y]))
//!   A^i_j = g^{ik} (dα)_{jk}             (so ⟨Av, w⟩ = dα(v, w))
//!   R = w / α(w) for w spanning ker dα   (pivot-independent, hence smooth)
//!   c² = −tr(A²)/(2n),  φ = A/c,  θ′ = ‖R‖·c,  h = ½ L_R φ

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{eval_jet, Expr};
use crate::geometry::{christoffels_at, point_geometry, sectional, Chart, MetricField};
use crate::jet::Jet;
use crate::linalg::{dot, norm, nullspace, Mat, Scalar};
use crate::sample;

// ─── Pinned tolerances ───────────────────────────────────────────────────

/// Relative pivot gap below which dα is declared rank deficient.
pub const CONTACT_RANK_REL_TOL: f64 = 1e-10;
/// Relative transversality gap |α(w)| / (‖α‖‖w‖) below which the dα kernel
/// is declared tangent to ker α (α∧(dα)ⁿ = 0).
const CONTACT_TRANSVERSE_TOL: f64 = 1e-10;
/// Relative Frobenius residual allowed on A² = −c²(id − R⊗α) before the
/// structure is declared pointwise incompatible.
pub const COMPAT_DEFECT_TOL: f64 = 1e-6;
/// Allowed gap ‖R/‖R‖ − n‖ between the Reeb direction and the ξ-normal.
pub const REEB_ORTH_TOL: f64 = 1e-6;
/// Allowed deviation of ‖R‖ from 1 for the strong compatibility verdict.
pub const UNIT_REEB_TOL: f64 = 1e-6;
/// Allowed relative spread of θ′ over samples for the strong verdict.
pub const THETA_SPREAD_TOL: f64 = 1e-6;
/// ξ-membership gate for torsion inputs: |α(v)| / (‖α‖‖v‖).
pub const XI_MEMBERSHIP_TOL: f64 = 1e-9;
/// Residual threshold for the sampled CR (integrability) test.
pub const CR_RESIDUAL_TOL: f64 = 1e-7;
/// Axiom tolerance for a user-supplied J field.
const USER_J_AXIOM_TOL: f64 = 1e-8;

// ─── Model ───────────────────────────────────────────────────────────────

/// A closed Reeb-orbit seed: starting point and, when known, its period.
#[derive(Debug, Clone)]
pub struct OrbitSeed {
    pub point: Vec<f64>,
    pub period: Option<f64>,
}

/// A contact manifold chart with a metric: the central model type.
#[derive(Debug, Clone)]
pub struct ContactModel {
    pub name: String,
    pub chart: Chart,
    /// Components α_i of the contact form.
    pub alpha: Vec<Expr>,
    pub metric: MetricField,
    /// Optional user-supplied complex structure J^i_j (row major, d×d).
    /// Validated pointwise as a g-compatible almost complex structure on ξ
    /// and then used for φ in place of A/c.
    pub j_field: Option<Vec<Expr>>,
    /// dim = 2n + 1.
    pub n: usize,
    /// Injectivity radius, when known.
    pub inj: Option<f64>,
    /// Geodesic convexity radius, when known.
    pub conv: Option<f64>,
    pub orbits: Vec<OrbitSeed>,
}

impl ContactModel {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// Jets of the α components at `p`.
    pub fn alpha_jets(&self, p: &[f64], order: u8) -> Result<Vec<Jet>> {
        self.alpha.iter().map(|e| eval_jet(e, p, order)).collect()
    }
}

// ─── Generic scalar pipeline ─────────────────────────────────────────────

fn sdot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = a[0].mul(&b[0]);
    for k in 1..a.len() {
        acc = acc.add(&a[k].mul(&b[k]));
    }
    acc
}

/// Everything the scalar pipeline produces at one point, over `S`.
#[derive(Debug, Clone)]
pub struct RawFrame<S> {
    pub n: usize,
    pub g: Mat<S>,
    pub g_inv: Mat<S>,
    pub alpha: Vec<S>,
    pub dalpha: Mat<S>,
    pub reeb: Vec<S>,
    /// ρ = ‖R‖_g.
    pub rho: S,
    /// Unit g-normal to ξ = ker α, oriented by ⟨n, R⟩ > 0 (automatic:
    /// n ∝ g⁻¹α and α(R) = 1).
    pub n_unit: Vec<S>,
    /// A^i_j = g^{ik}(dα)_{jk}, i.e. ⟨Av, w⟩ = dα(v, w).
    pub a_mat: Mat<S>,
    pub c: S,
    /// θ′ = ρ·c.
    pub theta_prime: S,
    /// Relative Frobenius residual of A² + c²(id − R⊗α) = 0 (value parts).
    pub defect: f64,
    /// ‖R/ρ − n‖_g: how far the Reeb direction sits from the ξ-normal.
    pub reeb_normal_gap: f64,
}

/// Run the point pipeline over any scalar. `alpha`/`dalpha`/`g` must share
/// the scalar shape (same jet dimension/order in the jet instantiation).
pub fn raw_frame<S: Scalar>(
    p: &[f64],
    n: usize,
    g: Mat<S>,
    alpha: Vec<S>,
    dalpha: Mat<S>,
) -> Result<RawFrame<S>> {
    let d = 2 * n + 1;
    let ns = nullspace(&dalpha, CONTACT_RANK_REL_TOL);
    if ns.rank != d - 1 {
        return Err(Error::NotContact {
            point: p.to_vec(),
            rank: ns.rank,
            expected: d - 1,
            gap: ns.gap,
        });
    }
    let w = ns.kernel.expect("rank d-1 has a one-dimensional kernel");
    let aw = sdot(&alpha, &w);
    let wv: Vec<f64> = w.iter().map(Scalar::val).collect();
    let av: Vec<f64> = alpha.iter().map(Scalar::val).collect();
    let transverse = aw.val().abs() / (norm(&av) * norm(&wv)).max(1e-300);
    if transverse <= CONTACT_TRANSVERSE_TOL {
        return Err(Error::NotContact {
            point: p.to_vec(),
            rank: d - 1,
            expected: d - 1,
            gap: transverse,
        });
    }
    // R = w/α(w): the unique kernel vector with α(R) = 1.
    let reeb: Vec<S> = w.iter().map(|wi| wi.div(&aw)).collect();
    let g_inv = g.inverse().ok_or_else(|| Error::NotPositiveDefinite { point: p.to_vec() })?;
    let gr = g.mul_vec(&reeb);
    let rho = sdot(&reeb, &gr).sqrt();
    // Unit normal to ξ: normalize g⁻¹α (⟨g⁻¹α, g⁻¹α⟩_g = αᵀg⁻¹α).
    let u = g_inv.mul_vec(&alpha);
    let un = sdot(&alpha, &u).sqrt();
    let n_unit: Vec<S> = u.iter().map(|x| x.div(&un)).collect();
    let a_mat = Mat::from_fn(d, d, |i, j| {
        let mut acc = g_inv.at(i, 0).mul(dalpha.at(j, 0));
        for k in 1..d {
            acc = acc.add(&g_inv.at(i, k).mul(dalpha.at(j, k)));
        }
        acc
    });
    let a2 = a_mat.mul_mat(&a_mat);
    let mut tr = a2.at(0, 0).clone();
    for i in 1..d {
        tr = tr.add(a2.at(i, i));
    }
    // A is g-antisymmetric, so tr(A²) = −Σ σ_i² < 0 and c² = −tr(A²)/(2n).
    let two_n = tr.lift(2.0 * n as f64);
    let c2 = tr.neg().div(&two_n);
    if c2.val() <= 0.0 {
        return Err(Error::NotCompatible {
            what: format!("tr A² = {:.3e} ≥ 0 at {:?}: no rotation speed", -c2.val() * 2.0 * n as f64, p),
        });
    }
    let c = c2.sqrt();
    let theta_prime = rho.mul(&c);
    // Pointwise defect of A² = −c²(id − R⊗α), value parts, Frobenius.
    let a2v = a2.map_val();
    let rv: Vec<f64> = reeb.iter().map(Scalar::val).collect();
    let c2v = c2.val();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d {
        for j in 0..d {
            let proj = if i == j { 1.0 } else { 0.0 } - rv[i] * av[j];
            let e = a2v.at(i, j) + c2v * proj;
            num += e * e;
            den += a2v.at(i, j) * a2v.at(i, j);
        }
    }
    let defect = num.sqrt() / den.sqrt().max(1e-300);
    // Gap between the Reeb direction and the unit normal, in g.
    let gv = g.map_val();
    let rhov = rho.val();
    let mut gap2 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let ti = rv[i] / rhov - n_unit[i].val();
            let tj = rv[j] / rhov - n_unit[j].val();
            gap2 += gv.at(i, j) * ti * tj;
        }
    }
    Ok(RawFrame {
        n,
        g,
        g_inv,
        alpha,
        dalpha,
        reeb,
        rho,
        n_unit,
        a_mat,
        c,
        theta_prime,
        defect,
        reeb_normal_gap: gap2.max(0.0).sqrt(),
    })
}

/// Value-only pipeline at a point (the cheap path for classification and
/// probe setup).
pub fn frame_values(model: &ContactModel, p: &[f64]) -> Result<RawFrame<f64>> {
    let d = model.dim();
    let aj = model.alpha_jets(p, 1)?;
    let alpha: Vec<f64> = aj.iter().map(|j| j.value).collect();
    let dalpha = Mat::from_fn(d, d, |i, j| aj[j].d1(i) - aj[i].d1(j));
    let g = model.metric.eval_values(p)?;
    raw_frame(p, model.n, g, alpha, dalpha)
}

/// Reeb vector at `p`: the dα-kernel direction normalized by α.
pub fn reeb_at(model: &ContactModel, p: &[f64]) -> Result<Vec<f64>> {
    let d = model.dim();
    let aj = model.alpha_jets(p, 1)?;
    let alpha: Vec<f64> = aj.iter().map(|j| j.value).collect();
    let dalpha = Mat::from_fn(d, d, |i, j| aj[j].d1(i) - aj[i].d1(j));
    let ns = nullspace(&dalpha, CONTACT_RANK_REL_TOL);
    if ns.rank != d - 1 {
        return Err(Error::NotContact {
            point: p.to_vec(),
            rank: ns.rank,
            expected: d - 1,
            gap: ns.gap,
        });
    }
    let w = ns.kernel.expect("one-dimensional kernel");
    let aw = dot(&alpha, &w);
    let transverse = aw.abs() / (norm(&alpha) * norm(&w)).max(1e-300);
    if transverse <= CONTACT_TRANSVERSE_TOL {
        return Err(Error::NotContact {
            point: p.to_vec(),
            rank: d - 1,
            expected: d - 1,
            gap: transverse,
        });
    }
    Ok(w.iter().map(|wi| wi / aw).collect())
}

// ─── Jet frame ───────────────────────────────────────────────────────────

/// Frame data as first-order jets at one point, plus Christoffel symbols:
/// everything covariant derivatives of R, φ, n need.
pub struct FrameJets {
    pub point: Vec<f64>,
    pub n: usize,
    pub raw: RawFrame<Jet>,
    /// φ^i_j as order-1 jets: the user J field when supplied, else A/c.
    pub phi: Mat<Jet>,
    /// Γ^k_ij flattened as [k][i][j].
    pub gamma: Vec<f64>,
}

/// Build the jet frame at `p`. Errors NotCompatible when A² deviates from
/// −c²(id − R⊗α) beyond the pointwise tolerance (the frame tensors φ, h
/// have no meaning without at least weak compatibility).
pub fn frame_jets(model: &ContactModel, p: &[f64]) -> Result<FrameJets> {
    let d = model.dim();
    let a2j = model.alpha_jets(p, 2)?;
    let alpha1: Vec<Jet> = a2j.iter().map(|j| j.truncate(1)).collect();
    // (dα)_{ij} as an order-1 jet: value from the α gradients, gradient from
    // the α Hessians.
    let dalpha = Mat::from_fn(d, d, |i, j| {
        let mut v = Jet::constant(d, 1, a2j[j].d1(i) - a2j[i].d1(j));
        for k in 0..d {
            v.grad[k] = a2j[j].d2(i, k) - a2j[i].d2(j, k);
        }
        v
    });
    let g = model.metric.eval(p, 1)?;
    let raw = raw_frame(p, model.n, g, alpha1, dalpha)?;
    if raw.defect > COMPAT_DEFECT_TOL {
        return Err(Error::NotCompatible {
            what: format!(
                "A² deviates from −c²(id − R⊗α) by relative defect {:.3e} at {:?}",
                raw.defect, p
            ),
        });
    }
    let phi = match &model.j_field {
        Some(jf) => {
            let mut data = Vec::with_capacity(d * d);
            for e in jf.iter() {
                data.push(eval_jet(e, p, 1)?);
            }
            let m = Mat { rows: d, cols: d, data };
            validate_user_j(&raw, &m)?;
            m
        }
        None => Mat::from_fn(d, d, |i, j| Scalar::div(raw.a_mat.at(i, j), &raw.c)),
    };
    let gamma = christoffels_at(&model.metric, p)?;
    Ok(FrameJets {
        point: p.to_vec(),
        n: model.n,
        raw,
        phi,
        gamma,
    })
}

/// Pointwise axioms for a user-supplied J: J² = −id + R⊗α, J(R) = 0,
/// α∘J = 0 (ξ preserved), and g-antisymmetry ⟨Ju, v⟩ = −⟨u, Jv⟩. These are
/// exactly the properties the torsion and CR tests rely on; the metric
/// reconstruction identity is deliberately not enforced (it would pin
/// J = A/c and reject every deliberately perturbed test structure).
fn validate_user_j(raw: &RawFrame<Jet>, jm: &Mat<Jet>) -> Result<()> {
    let d = jm.rows;
    let jv = jm.map_val();
    let gv = raw.g.map_val();
    let rv: Vec<f64> = raw.reeb.iter().map(Scalar::val).collect();
    let av: Vec<f64> = raw.alpha.iter().map(Scalar::val).collect();
    let mut failures: Vec<String> = Vec::new();

    // J² = −id + R⊗α, relative Frobenius.
    let j2 = jv.mul_mat(&jv);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d {
        for j in 0..d {
            let want = -(if i == j { 1.0 } else { 0.0 }) + rv[i] * av[j];
            let e = j2.at(i, j) - want;
            num += e * e;
            den += want * want;
        }
    }
    let r = num.sqrt() / den.sqrt().max(1e-300);
    if r > USER_J_AXIOM_TOL {
        failures.push(format!("J² ≠ −id + R⊗α (relative residual {r:.3e})"));
    }

    // J(R) = 0.
    let jr = jv.mul_vec(&rv);
    let r = norm(&jr) / norm(&rv).max(1e-300);
    if r > USER_J_AXIOM_TOL {
        failures.push(format!("J(R) ≠ 0 (relative residual {r:.3e})"));
    }

    // α∘J = 0: J maps into ξ.
    let mut aj = vec![0.0; d];
    for j in 0..d {
        for i in 0..d {
            aj[j] += av[i] * jv.at(i, j);
        }
    }
    let r = norm(&aj) / norm(&av).max(1e-300);
    if r > USER_J_AXIOM_TOL {
        failures.push(format!("α∘J ≠ 0 (relative residual {r:.3e}): J leaves ξ"));
    }

    // g-antisymmetry: gJ + (gJ)ᵀ = 0.
    let gj = gv.mul_mat(&jv);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d {
        for j in 0..d {
            let e = gj.at(i, j) + gj.at(j, i);
            num += e * e;
            den += gj.at(i, j) * gj.at(i, j);
        }
    }
    let r = num.sqrt() / den.sqrt().max(1e-300);
    if r > USER_J_AXIOM_TOL {
        failures.push(format!("⟨Ju,v⟩ ≠ −⟨u,Jv⟩ (relative residual {r:.3e})"));
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Manifest {
            path: "J".into(),
            reason: failures.join("; "),
        })
    }
}

impl FrameJets {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    #[inline]
    pub fn gamma_at(&self, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim();
        self.gamma[(k * d + i) * d + j]
    }

    pub fn reeb_values(&self) -> Vec<f64> {
        self.raw.reeb.iter().map(Scalar::val).collect()
    }

    pub fn normal_values(&self) -> Vec<f64> {
        self.raw.n_unit.iter().map(Scalar::val).collect()
    }

    pub fn alpha_values(&self) -> Vec<f64> {
        self.raw.alpha.iter().map(Scalar::val).collect()
    }

    pub fn phi_values(&self) -> Mat<f64> {
        self.phi.map_val()
    }

    /// g(u, v) on value parts.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.raw.g.at(i, j).value * u[i] * v[j];
            }
        }
        s
    }

    pub fn norm_g(&self, u: &[f64]) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// α(v) on value parts.
    pub fn alpha_of(&self, v: &[f64]) -> f64 {
        self.raw
            .alpha
            .iter()
            .zip(v)
            .map(|(a, x)| a.value * x)
            .sum()
    }

    /// dα(u, v) on value parts.
    pub fn dalpha_of(&self, u: &[f64], v: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.raw.dalpha.at(i, j).value * u[i] * v[j];
            }
        }
        s
    }

    /// The α-projection v − α(v)R onto ξ (value parts).
    pub fn xi_project(&self, v: &[f64]) -> Vec<f64> {
        let av = self.alpha_of(v);
        v.iter()
            .zip(self.raw.reeb.iter())
            .map(|(x, r)| x - av * r.value)
            .collect()
    }

    /// Apply the φ matrix to a vector (value parts).
    pub fn apply_phi(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..d {
                    s += self.phi.at(i, j).value * v[j];
                }
                s
            })
            .collect()
    }

    /// Covariant derivative of a jet vector field along u at this point:
    /// (∇_u X)^k = u^i ∂_i X^k + Γ^k_{im} u^i X^m.
    pub fn nabla_vector(&self, u: &[f64], x: &[Jet]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..d {
                    if u[i] == 0.0 {
                        continue;
                    }
                    let mut t = x[k].d1(i);
                    for m in 0..d {
                        t += self.gamma_at(k, i, m) * x[m].value;
                    }
                    s += u[i] * t;
                }
                s
            })
            .collect()
    }

    /// h = ½ L_R φ via the coordinate formula
    /// (L_Rφ)^i_j = R^k ∂_k φ^i_j − φ^k_j ∂_k R^i + φ^i_k ∂_j R^k.
    pub fn h_matrix(&self) -> Mat<f64> {
        let d = self.dim();
        let r = &self.raw.reeb;
        Mat::from_fn(d, d, |i, j| {
            let mut v = 0.0;
            for k in 0..d {
                v += r[k].value * self.phi.at(i, j).d1(k) - self.phi.at(k, j).value * r[i].d1(k)
                    + self.phi.at(i, k).value * r[k].d1(j);
            }
            0.5 * v
        })
    }

    /// A g-orthonormal basis of ξ: coordinate vectors projected along R onto
    /// ξ, then pivoted modified Gram–Schmidt in the g inner product.
    pub fn xi_basis(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut pool: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                self.xi_project(&v)
            })
            .collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2 * self.n);
        while basis.len() < 2 * self.n {
            // Largest remaining g-norm is the next pivot.
            let (bi, bn) = pool
                .iter()
                .enumerate()
                .map(|(i, v)| (i, self.inner(v, v)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("norms are finite"))
                .expect("pool not exhausted before 2n vectors");
            assert!(bn > 1e-20, "projected coordinate vectors span ξ");
            let picked = pool.swap_remove(bi);
            let inv = 1.0 / bn.sqrt();
            let e: Vec<f64> = picked.iter().map(|x| x * inv).collect();
            for v in pool.iter_mut() {
                let c = self.inner(v, &e);
                for (vk, ek) in v.iter_mut().zip(&e) {
                    *vk -= c * ek;
                }
            }
            basis.push(e);
        }
        basis
    }

    /// Assemble the plain-number frame (h, ξ-basis, II included).
    pub fn frame(&self) -> ContactFrame {
        let d = self.dim();
        let xi_basis = self.xi_basis();
        let nj = &self.raw.n_unit;
        // ∇_u n from the unit-normal jets.
        let dn: Vec<Vec<f64>> = xi_basis.iter().map(|u| self.nabla_vector(u, nj)).collect();
        // II(u,v) = −½(⟨v, ∇_u n⟩ + ⟨u, ∇_v n⟩): extension-free because it
        // only differentiates n.
        let ii = Mat::from_fn(2 * self.n, 2 * self.n, |a, b| {
            -0.5 * (self.inner(&xi_basis[b], &dn[a]) + self.inner(&xi_basis[a], &dn[b]))
        });
        ContactFrame {
            point: self.point.clone(),
            n: self.n,
            alpha: self.alpha_values(),
            dalpha: self.raw.dalpha.map_val(),
            g: self.raw.g.map_val(),
            g_inv: self.raw.g_inv.map_val(),
            reeb: self.reeb_values(),
            rho: self.raw.rho.value,
            c: self.raw.c.value,
            theta_prime: self.raw.theta_prime.value,
            defect: self.raw.defect,
            n_unit: self.normal_values(),
            phi: self.phi.map_val(),
            h: self.h_matrix(),
            xi_basis,
            ii,
            dim: d,
        }
    }
}

/// The contact-metric package at one point, plain numbers.
#[derive(Debug, Clone)]
pub struct ContactFrame {
    pub point: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub alpha: Vec<f64>,
    pub dalpha: Mat<f64>,
    pub g: Mat<f64>,
    pub g_inv: Mat<f64>,
    pub reeb: Vec<f64>,
    pub rho: f64,
    pub c: f64,
    pub theta_prime: f64,
    pub defect: f64,
    pub n_unit: Vec<f64>,
    /// Matrix of φ. It kills the Reeb direction and restricts to the complex
    /// structure J on ξ, so it is also J's coordinate matrix.
    pub phi: Mat<f64>,
    /// h = ½ L_R φ.
    pub h: Mat<f64>,
    /// 2n g-orthonormal vectors spanning ξ.
    pub xi_basis: Vec<Vec<f64>>,
    /// Second fundamental form II(u_a, u_b) on the ξ-basis.
    pub ii: Mat<f64>,
}

/// Full frame at a point.
pub fn frame_at(model: &ContactModel, p: &[f64]) -> Result<ContactFrame> {
    Ok(frame_jets(model, p)?.frame())
}

// ─── Classification ──────────────────────────────────────────────────────

/// Verdict of the sampled compatibility test, strongest first:
/// the pointwise tests (A² scalar on ξ, R ⊥ ξ) gate weak compatibility;
/// the global tests (‖R‖ = 1, θ′ constant) upgrade it to compatible.
#[derive(Debug, Clone)]
pub enum Classification {
    Compatible {
        theta_prime: f64,
        /// Relative spread of θ′ over the samples.
        spread: f64,
    },
    WeaklyCompatible {
        /// Per-sample rotation speed c (a positive function, not constant
        /// or not matching a unit Reeb field).
        c_samples: Vec<f64>,
        /// Names of the strong tests that failed.
        failed: String,
    },
    Incompatible {
        /// Name of the pointwise test that failed.
        failed: String,
        residual: f64,
        point: Vec<f64>,
    },
}

/// Classify the model by sampling `points` chart points with the given seed.
pub fn compatibility_classify(
    model: &ContactModel,
    points: usize,
    seed: u64,
) -> Result<Classification> {
    let mut rng = sample::rng_for(seed);
    let mut worst_defect = (0.0_f64, Vec::new());
    let mut worst_orth = (0.0_f64, Vec::new());
    let mut worst_rho = 0.0_f64;
    let mut thetas: Vec<f64> = Vec::with_capacity(points);
    let mut cs: Vec<f64> = Vec::with_capacity(points);
    for _ in 0..points.max(1) {
        let p = sample::sample_point(&model.chart, &mut rng);
        let raw = frame_values(model, &p)?;
        if raw.defect > worst_defect.0 {
            worst_defect = (raw.defect, p.clone());
        }
        if raw.reeb_normal_gap > worst_orth.0 {
            worst_orth = (raw.reeb_normal_gap, p.clone());
        }
        worst_rho = worst_rho.max((raw.rho - 1.0).abs());
        thetas.push(raw.theta_prime);
        cs.push(raw.c);
    }
    if worst_defect.0 > COMPAT_DEFECT_TOL {
        return Ok(Classification::Incompatible {
            failed: "A2-scalar".into(),
            residual: worst_defect.0,
            point: worst_defect.1,
        });
    }
    if worst_orth.0 > REEB_ORTH_TOL {
        return Ok(Classification::Incompatible {
            failed: "reeb-orthogonal".into(),
            residual: worst_orth.0,
            point: worst_orth.1,
        });
    }
    let tmin = thetas.iter().cloned().fold(f64::INFINITY, f64::min);
    let tmax = thetas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tmean = thetas.iter().sum::<f64>() / thetas.len() as f64;
    let spread = (tmax - tmin) / tmean.abs().max(1e-300);
    let mut failed: Vec<&str> = Vec::new();
    if worst_rho > UNIT_REEB_TOL {
        failed.push("unit-reeb");
    }
    if spread > THETA_SPREAD_TOL {
        failed.push("theta-constancy");
    }
    if failed.is_empty() {
        Ok(Classification::Compatible {
            theta_prime: tmean,
            spread,
        })
    } else {
        Ok(Classification::WeaklyCompatible {
            c_samples: cs,
            failed: failed.join(", "),
        })
    }
}

// ─── Torsion and integrability ───────────────────────────────────────────

/// Nijenhuis torsion [φ,φ](v,w) at the frame's point via the tensor formula
/// N^m_{jk} = φ^l_j ∂_l φ^m_k − φ^l_k ∂_l φ^m_j
///          + ∂_k(φ^l_j) φ^m_l − ∂_j(φ^l_k) φ^m_l,
/// contracted with v, w ∈ ξ.
pub fn nijenhuis_at(fj: &FrameJets, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let d = fj.dim();
    let av = fj.alpha_values();
    let ascale = norm(&av).max(1e-300);
    for x in [v, w] {
        let ax = fj.alpha_of(x);
        if ax.abs() > XI_MEMBERSHIP_TOL * ascale * norm(x).max(1e-300) {
            return Err(Error::NotInXi { alpha_v: ax });
        }
    }
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
    Ok(out)
}

/// Sampled CR test: the ξ-projection of [φ,φ](v,w) must vanish for ξ
/// vectors v, w. Returns the verdict and the worst relative residual.
pub fn is_cr(model: &ContactModel, points: usize, seed: u64) -> Result<(bool, f64)> {
    let mut rng = sample::rng_for(seed);
    let mut worst = 0.0_f64;
    for _ in 0..points.max(1) {
        let p = sample::sample_point(&model.chart, &mut rng);
        let fj = frame_jets(model, &p)?;
        let d = fj.dim();
        let nv = fj.normal_values();
        for _ in 0..2 {
            let v = fj.xi_project(&sample::normal_vector(d, &mut rng));
            let w = fj.xi_project(&sample::normal_vector(d, &mut rng));
            let nij = nijenhuis_at(&fj, &v, &w)?;
            // Metric ξ-projection: x − ⟨x,n⟩n.
            let cn = fj.inner(&nij, &nv);
            let xi_part: Vec<f64> = nij.iter().zip(&nv).map(|(x, nk)| x - cn * nk).collect();
            let res = fj.norm_g(&xi_part) / (fj.norm_g(&v) * fj.norm_g(&w)).max(1e-300);
            worst = worst.max(res);
        }
    }
    Ok((worst < CR_RESIDUAL_TOL, worst))
}

/// Sampled sectional-curvature range over random and structure-adapted
/// planes ((v, φv) inside ξ and (R, v) mixed planes are the extremal ones on
/// every built-in model).
pub fn sec_range_estimate(model: &ContactModel, points: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = sample::rng_for(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..points.max(1) {
        let p = sample::sample_point(&model.chart, &mut rng);
        let pg = point_geometry(&model.metric, &p)?;
        let fj = frame_jets(model, &p)?;
        let d = fj.dim();
        let rv = fj.reeb_values();
        let mut planes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for _ in 0..2 {
            let v = fj.xi_project(&sample::normal_vector(d, &mut rng));
            planes.push((v.clone(), fj.apply_phi(&v)));
            planes.push((rv.clone(), v));
        }
        for _ in 0..2 {
            planes.push((
                sample::normal_vector(d, &mut rng),
                sample::normal_vector(d, &mut rng),
            ));
        }
        for (u, v) in planes {
            match sectional(&pg, &u, &v) {
                Ok(s) => {
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                Err(Error::DegeneratePlane { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((lo, hi))
}

/// Seeded random ξ vector at a jet frame (Gaussian, α-projected).
pub fn random_xi_vector(fj: &FrameJets, rng: &mut ChaCha8Rng) -> Vec<f64> {
    fj.xi_project(&sample::normal_vector(fj.dim(), rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    const COORDS3: [&str; 3] = ["x", "y", "z"];

    fn coords3() -> Vec<String> {
        COORDS3.iter().map(|s| s.to_string()).collect()
    }

    /// Heisenberg chart: α = ½(dz − y dx), g = ¼(dx² + dy²) + α⊗α.
    fn heisenberg3() -> ContactModel {
        let chart = Chart::new(&COORDS3, Some(vec![(-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0)]));
        let cs = coords3();
        let alpha = vec![
            parse("-y/2", &cs).unwrap(),
            parse("0", &cs).unwrap(),
            parse("1/2", &cs).unwrap(),
        ];
        let metric = MetricField::parse_upper(
            &chart,
            &[
                &["(1+y^2)/4", "0", "-y/4"],
                &["1/4", "0"],
                &["1/4"],
            ],
        )
        .unwrap();
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

    fn sample_points(model: &ContactModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = sample::rng_for(seed);
        (0..count)
            .map(|_| sample::sample_point(&model.chart, &mut rng))
            .collect()
    }

    #[test]
    fn reeb_of_standard_form_ignores_the_metric() {
        // α = dz − y dx: ker dα = span ∂z and α(∂z) = 1, so R = ∂z no matter
        // which metric is used.
        let chart = Chart::new(&COORDS3, None);
        let cs = coords3();
        let alpha = vec![
            parse("-y", &cs).unwrap(),
            parse("0", &cs).unwrap(),
            parse("1", &cs).unwrap(),
        ];
        let metric = MetricField::parse_upper(
            &chart,
            &[
                &["2", "3/10", "0"],
                &["1+x^2/9", "0"],
                &["3/2"],
            ],
        )
        .unwrap();
        let model = ContactModel {
            name: "standard".into(),
            chart,
            alpha,
            metric,
            j_field: None,
            n: 1,
            inj: None,
            conv: None,
            orbits: vec![],
        };
        for p in sample_points(&model, 20, 1) {
            let r = reeb_at(&model, &p).unwrap();
            assert!((r[0]).abs() < 1e-12 && (r[1]).abs() < 1e-12 && (r[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_dz_is_not_contact() {
        let chart = Chart::new(&COORDS3, None);
        let cs = coords3();
        let alpha = vec![
            parse("0", &cs).unwrap(),
            parse("0", &cs).unwrap(),
            parse("1", &cs).unwrap(),
        ];
        let metric =
            MetricField::parse_upper(&chart, &[&["1", "0", "0"], &["1", "0"], &["1"]]).unwrap();
        let model = ContactModel {
            name: "flat".into(),
            chart,
            alpha,
            metric,
            j_field: None,
            n: 1,
            inj: None,
            conv: None,
            orbits: vec![],
        };
        match reeb_at(&model, &[0.3, -0.2, 0.9]) {
            Err(Error::NotContact { .. }) => {}
            other => panic!("expected NotContact, got {other:?}"),
        }
    }

    #[test]
    fn heisenberg_frame_matches_the_hand_computation() {
        // By hand: R = 2∂z, ρ = 1, c = 2, θ′ = 2, φ∂x = ∂y,
        // φ∂y = −(∂x + y∂z), φ∂z = 0, h = 0, n = R.
        let model = heisenberg3();
        for p in sample_points(&model, 25, 2) {
            let f = frame_at(&model, &p).unwrap();
            let y = p[1];
            assert!(norm(&sub(&f.reeb, &[0.0, 0.0, 2.0])) < 1e-10, "reeb at {p:?}");
            assert!((f.rho - 1.0).abs() < 1e-12);
            assert!((f.c - 2.0).abs() < 1e-11);
            assert!((f.theta_prime - 2.0).abs() < 1e-11);
            assert!(f.defect < 1e-12);
            assert!(norm(&sub(&f.n_unit, &[0.0, 0.0, 2.0])) < 1e-10);
            let phi_expect = [
                [0.0, -1.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, -y, 0.0],
            ];
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (f.phi.at(i, j) - phi_expect[i][j]).abs() < 1e-11,
                        "phi({i},{j}) at {p:?}"
                    );
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    assert!(f.h.at(i, j).abs() < 1e-10, "h({i},{j}) = {}", f.h.at(i, j));
                }
            }
            // ξ-basis really is a g-orthonormal basis of ker α.
            for a in 0..2 {
                let ba = &f.xi_basis[a];
                let av: f64 = f.alpha.iter().zip(ba).map(|(ai, xi)| ai * xi).sum();
                assert!(av.abs() < 1e-12, "xi basis in ker α");
                for b in 0..2 {
                    let want = if a == b { 1.0 } else { 0.0 };
                    let mut ip = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            ip += f.g.at(i, j) * f.xi_basis[a][i] * f.xi_basis[b][j];
                        }
                    }
                    assert!((ip - want).abs() < 1e-12);
                }
            }
            // Sasakian chart: totally geodesic ξ-slices, II ≡ 0; the trace
            // identity II(v,v) + II(φv,φv) = 0 is then immediate.
            for a in 0..2 {
                for b in 0..2 {
                    assert!(f.ii.at(a, b).abs() < 1e-10);
                }
            }
        }
    }

    fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn reconstruction_duality_and_taming_identities() {
        let model = heisenberg3();
        let mut rng = sample::rng_for(5);
        for p in sample_points(&model, 15, 6) {
            let fj = frame_jets(&model, &p).unwrap();
            let rho = fj.raw.rho.value;
            let theta = fj.raw.theta_prime.value;
            for _ in 0..4 {
                let u = sample::normal_vector(3, &mut rng);
                let v = sample::normal_vector(3, &mut rng);
                let scale = fj.norm_g(&u) * fj.norm_g(&v);
                // g(u,v) = (ρ/θ′)dα(u, φv) + ρ²α(u)α(v)
                let lhs = fj.inner(&u, &v);
                let rhs = rho / theta * fj.dalpha_of(&u, &fj.apply_phi(&v))
                    + rho * rho * fj.alpha_of(&u) * fj.alpha_of(&v);
                assert!((lhs - rhs).abs() < 1e-8 * scale.max(1.0));
                // g(u, φv) = −(1/θ′) dα(u, v)
                let lhs = fj.inner(&u, &fj.apply_phi(&v));
                let rhs = -fj.dalpha_of(&u, &v) / theta;
                assert!((lhs - rhs).abs() < 1e-8 * scale.max(1.0));
                // Taming on ξ: (1/θ′) dα(w, φw) = ‖w‖².
                let w = fj.xi_project(&u);
                let lhs = fj.dalpha_of(&w, &fj.apply_phi(&w)) / theta;
                let n2 = fj.inner(&w, &w);
                assert!((lhs - n2).abs() < 1e-8 * n2.max(1.0));
            }
        }
    }

    #[test]
    fn torsion_of_heisenberg_matches_the_rotation_speed() {
        // [φ,φ](v,v) = 0 and [φ,φ](v,φv) = −θ′‖v‖²R for v ∈ ξ. Checked by
        // hand at the origin: [φ,φ](∂x,∂y) = −∂z = −θ′‖∂x‖²R.
        let model = heisenberg3();
        let mut rng = sample::rng_for(9);
        for p in sample_points(&model, 15, 10) {
            let fj = frame_jets(&model, &p).unwrap();
            let theta = fj.raw.theta_prime.value;
            let rv = fj.reeb_values();
            let v = random_xi_vector(&fj, &mut rng);
            let zero = nijenhuis_at(&fj, &v, &v).unwrap();
            assert!(norm(&zero) < 1e-10);
            let njj = nijenhuis_at(&fj, &v, &fj.apply_phi(&v)).unwrap();
            let n2 = fj.inner(&v, &v);
            let expect: Vec<f64> = rv.iter().map(|r| -theta * n2 * r).collect();
            assert!(
                norm(&sub(&njj, &expect)) < 1e-9 * n2.max(1.0),
                "[φ,φ](v,φv) = {njj:?}, expected {expect:?} at {p:?}"
            );
        }
    }

    #[test]
    fn torsion_rejects_vectors_outside_xi() {
        let model = heisenberg3();
        let fj = frame_jets(&model, &[0.4, 1.3, -0.2]).unwrap();
        // ∂x has α(∂x) = −y/2 = −0.65 ≠ 0 here.
        let v = vec![1.0, 0.0, 0.0];
        let w = random_xi_vector(&fj, &mut sample::rng_for(0));
        match nijenhuis_at(&fj, &v, &w) {
            Err(Error::NotInXi { .. }) => {}
            other => panic!("expected NotInXi, got {other:?}"),
        }
    }

    #[test]
    fn heisenberg_classifies_compatible() {
        let model = heisenberg3();
        match compatibility_classify(&model, 60, 3).unwrap() {
            Classification::Compatible { theta_prime, spread } => {
                assert!((theta_prime - 2.0).abs() < 1e-9);
                assert!(spread < 1e-9);
            }
            other => panic!("expected Compatible, got {other:?}"),
        }
    }

    #[test]
    fn three_d_models_are_automatically_cr() {
        let model = heisenberg3();
        let (cr, worst) = is_cr(&model, 20, 4).unwrap();
        assert!(cr, "worst ξ-torsion residual {worst:.3e}");
    }

    #[test]
    fn user_j_matching_phi_is_accepted() {
        let mut model = heisenberg3();
        let cs = coords3();
        // The φ matrix of the derived structure, handed in explicitly.
        let entries = [
            ["0", "-1", "0"],
            ["1", "0", "0"],
            ["0", "-y", "0"],
        ];
        model.j_field = Some(
            entries
                .iter()
                .flatten()
                .map(|s| parse(s, &cs).unwrap())
                .collect(),
        );
        let f = frame_at(&model, &[0.7, -1.1, 0.4]).unwrap();
        assert!((f.phi.at(0, 1) + 1.0).abs() < 1e-14);
        // φ^z_y = −y = 1.1 at this point.
        assert!((f.phi.at(2, 1) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn user_j_violating_the_axioms_is_rejected() {
        let mut model = heisenberg3();
        let cs = coords3();
        let entries = [
            ["0", "-1", "0"],
            ["11/10", "0", "0"],
            ["0", "-y", "0"],
        ];
        model.j_field = Some(
            entries
                .iter()
                .flatten()
                .map(|s| parse(s, &cs).unwrap())
                .collect(),
        );
        match frame_at(&model, &[0.7, -1.1, 0.4]) {
            Err(Error::Manifest { path, .. }) => assert_eq!(path, "J"),
            other => panic!("expected a J validation error, got {other:?}"),
        }
    }

    #[test]
    fn sectional_range_of_heisenberg() {
        // The curvature of this chart fills [−3, 1]: −3 on the ξ-planes
        // (v, φv), +1 on planes containing the Reeb direction.
        let model = heisenberg3();
        let (lo, hi) = sec_range_estimate(&model, 40, 7).unwrap();
        assert!((lo + 3.0).abs() < 1e-7, "min sec {lo}");
        assert!((hi - 1.0).abs() < 1e-7, "max sec {hi}");
    }
}
