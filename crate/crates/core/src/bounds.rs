//! Scalar comparison functions and the curvature-based radius bounds.
//!
//! Everything in this module is closed-form arithmetic on a handful of
//! geometric inputs: the half-dimension `n` (so dim = 2n+1), an injectivity
//! radius, two-sided sectional curvature bounds κ ≤ sec ≤ K, the symmetric
//! bound sec_abs = max |sec|, the rotation speed θ′ of the contact structure,
//! and the minimum Ricci curvature in the Reeb direction.  From these it
//! evaluates
//!
//!   * the comparison functions ct_k, sn_k and the inverse sn_k⁻¹,
//!   * the disk-twisting constants A, B and the Jacobi envelopes H₁, H₂
//!     with their radius-uniform versions H̄₁, H̄₂, H̄,
//!   * the normal radius r_⊥, the taming radius r_τ, and the chain of
//!     standard-neighbourhood radii built from Q(r) = sn_K⁻¹((1−Br−½Ar²)·sn_K(r)).
//!
//! All functions are pure; nothing here touches a chart or an ODE.

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for the adaptive Simpson quadrature of ∫H₁.
const QUAD_TOL: f64 = 1e-10;
/// Maximum bisection depth of the quadrature (2^20 ≈ 1e6 subintervals).
const QUAD_MAX_DEPTH: u32 = 20;
/// Slop accepted when clamping an inverse-sine argument to ±1 (round-trip
/// calls land a few ulp outside the amplitude at the principal-range edge).
const SN_INV_CLAMP: f64 = 1e-9;
/// Negative values of the B-radicand n·θ′²/4 − ½ric_min above this magnitude
/// are rejected; smaller ones are treated as an exact zero.
const RADICAND_CLAMP: f64 = 1e-12;
/// Slop accepted on the twisting factor 1 − Br − ½Ar² before declaring the
/// radius out of range.
const Q_FACTOR_CLAMP: f64 = 1e-12;

/// Generalized cotangent: √k·cot(√k·r) for k > 0, 1/r for k = 0,
/// √|k|·coth(√|k|·r) for k < 0.  Defined for 0 < r, and r < π/√k when k > 0.
pub fn ct(k: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange {
            what: "ct radius",
            value: r,
            range: "(0, ∞)".into(),
        });
    }
    if k > 0.0 {
        let sk = k.sqrt();
        if r >= std::f64::consts::PI / sk {
            return Err(Error::OutOfRange {
                what: "ct radius",
                value: r,
                range: format!("(0, π/√k) = (0, {:.6})", std::f64::consts::PI / sk),
            });
        }
        // cot via cos/sin: stays finite on the whole open interval.
        Ok(sk * (sk * r).cos() / (sk * r).sin())
    } else if k == 0.0 {
        Ok(1.0 / r)
    } else {
        let sk = (-k).sqrt();
        Ok(sk * (sk * r).cosh() / (sk * r).sinh())
    }
}

/// Generalized sine: sin(√k·r)/√k for k > 0, r for k = 0, sinh(√|k|·r)/√|k|
/// for k < 0.  Defined for r ≥ 0.
pub fn sn(k: f64, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::OutOfRange {
            what: "sn radius",
            value: r,
            range: "[0, ∞)".into(),
        });
    }
    if k > 0.0 {
        let sk = k.sqrt();
        Ok((sk * r).sin() / sk)
    } else if k == 0.0 {
        Ok(r)
    } else {
        let sk = (-k).sqrt();
        Ok((sk * r).sinh() / sk)
    }
}

/// Inverse of [`sn`] on the principal range: asin(y·√k)/√k for k > 0 (needs
/// 0 ≤ y ≤ 1/√k), y for k = 0, asinh(y·√|k|)/√|k| for k < 0 (needs y ≥ 0).
pub fn sn_inv(k: f64, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::OutOfRange {
            what: "sn_inv argument",
            value: y,
            range: "[0, ∞)".into(),
        });
    }
    if k > 0.0 {
        let sk = k.sqrt();
        let mut arg = y * sk;
        // Round-trip inputs sn(k, π/(2√k)) land a few ulp above 1.
        if arg > 1.0 && arg <= 1.0 + SN_INV_CLAMP {
            arg = 1.0;
        }
        if arg > 1.0 {
            return Err(Error::OutOfRange {
                what: "sn_inv argument",
                value: y,
                range: format!("[0, 1/√k] = [0, {:.6}]", 1.0 / sk),
            });
        }
        Ok(arg.asin() / sk)
    } else if k == 0.0 {
        Ok(y)
    } else {
        let sk = (-k).sqrt();
        Ok((y * sk).asinh() / sk)
    }
}

/// Geometric inputs for every radius bound.  `n` is the half-dimension of the
/// contact distribution (manifold dimension 2n+1); `kappa ≤ k_upper` are the
/// two-sided sectional bounds; `sec_abs` is an independent bound on |sec|;
/// `ric_min` bounds the Ricci curvature in the Reeb direction from below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub inj: f64,
    pub kappa: f64,
    pub k_upper: f64,
    pub sec_abs: f64,
    pub theta_prime: f64,
    pub ric_min: f64,
}

impl BoundInputs {
    /// Checks every invariant; on success returns the (clamped) radicand
    /// n·θ′²/4 − ½ric_min that enters the constant B.
    pub fn validate(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::InvalidInputs {
                reason: "half-dimension n must be at least 1".into(),
            });
        }
        if !(self.inj > 0.0) || !self.inj.is_finite() {
            return Err(Error::InvalidInputs {
                reason: format!("injectivity radius must be positive and finite, got {}", self.inj),
            });
        }
        if !(self.kappa <= self.k_upper) {
            return Err(Error::InvalidInputs {
                reason: format!(
                    "curvature bounds must satisfy kappa ≤ K_upper, got {} > {}",
                    self.kappa, self.k_upper
                ),
            });
        }
        if !(self.sec_abs >= 0.0) || !self.sec_abs.is_finite() {
            return Err(Error::InvalidInputs {
                reason: format!("sec_abs must be a non-negative finite real, got {}", self.sec_abs),
            });
        }
        if !(self.theta_prime > 0.0) || !self.theta_prime.is_finite() {
            return Err(Error::InvalidInputs {
                reason: format!("rotation speed must be positive and finite, got {}", self.theta_prime),
            });
        }
        if !self.ric_min.is_finite() {
            return Err(Error::InvalidInputs {
                reason: format!("ric_min must be finite, got {}", self.ric_min),
            });
        }
        let radicand = self.n as f64 * self.theta_prime * self.theta_prime / 4.0 - self.ric_min / 2.0;
        if radicand < -RADICAND_CLAMP {
            return Err(Error::InvalidInputs {
                reason: format!(
                    "n·θ′²/4 − ½ric_min = {:.3e} is negative; no compatible structure has these inputs",
                    radicand
                ),
            });
        }
        Ok(radicand.max(0.0))
    }
}

/// The radius-independent constants derived from [`BoundInputs`].
#[derive(Debug, Clone, Copy)]
pub struct Constants {
    /// Largest comparison radius min(½inj, π/(2√K)); the π-term is dropped
    /// when K ≤ 0.
    pub r_max: f64,
    /// Second-order twisting coefficient A = (4/3)(2n−1)·sec_abs.
    pub a: f64,
    /// First-order twisting coefficient B = θ′/2 + √(n·θ′²/4 − ½ric_min).
    pub b: f64,
    /// Radius-uniform Jacobi envelope H̄₁ (√2 for κ ≥ 0, H₁(r_max) otherwise).
    pub hbar1: f64,
    /// Radius-uniform derivative envelope H̄₂ = (4/3)·sec_abs·H̄₁·r_max.
    pub hbar2: f64,
    /// Frame-twisting rate H̄ = 4(H̄₂ + B·H̄₁)·H̄₁.
    pub hbar: f64,
    /// Dimensional constant 1/(192(1+2n(n−1))√n) of the rough radius bound.
    pub c_n: f64,
    /// Dimensional constant 1/(96(1+2n(n−1))√n) = 2c_n of its proof.
    pub d_n: f64,
}

/// Evaluates the constant chain.  The only failure modes are invalid inputs.
pub fn compute_constants(inputs: &BoundInputs) -> Result<Constants> {
    let radicand = inputs.validate()?;
    let n = inputs.n as f64;
    let r_max = cap_by_conjugate_radius(inputs.inj / 2.0, inputs.k_upper);
    let a = 4.0 / 3.0 * (2.0 * n - 1.0) * inputs.sec_abs;
    let b = inputs.theta_prime / 2.0 + radicand.sqrt();
    let hbar1 = if inputs.kappa >= 0.0 {
        std::f64::consts::SQRT_2
    } else {
        h1_of_r(r_max, inputs.kappa)?
    };
    let hbar2 = 4.0 / 3.0 * inputs.sec_abs * hbar1 * r_max;
    let hbar = 4.0 * (hbar2 + b * hbar1) * hbar1;
    let dim_factor = 1.0 + 2.0 * n * (n - 1.0);
    let c_n = 1.0 / (192.0 * dim_factor * n.sqrt());
    let d_n = 1.0 / (96.0 * dim_factor * n.sqrt());
    Ok(Constants { r_max, a, b, hbar1, hbar2, hbar, c_n, d_n })
}

/// min(base, π/(2√K)) with the spherical term dropped for K ≤ 0.
fn cap_by_conjugate_radius(base: f64, k_upper: f64) -> f64 {
    if k_upper > 0.0 {
        base.min(std::f64::consts::PI / (2.0 * k_upper.sqrt()))
    } else {
        base
    }
}

/// Jacobi-field envelope H₁(r) = √(1 + (sn_κ(r)/r)²); H₁(0⁺) = √2.
/// Defined for r > 0 (and r < π/√κ when κ > 0, where sn_κ stays positive).
pub fn h1_of_r(r: f64, kappa: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange {
            what: "H1 radius",
            value: r,
            range: "(0, ∞)".into(),
        });
    }
    if kappa > 0.0 && r >= std::f64::consts::PI / kappa.sqrt() {
        return Err(Error::OutOfRange {
            what: "H1 radius",
            value: r,
            range: format!("(0, π/√κ) = (0, {:.6})", std::f64::consts::PI / kappa.sqrt()),
        });
    }
    let ratio = sn(kappa, r)? / r;
    Ok((1.0 + ratio * ratio).sqrt())
}

/// Covariant-derivative envelope H₂(r) = (4/3)·sec_abs·(r·H₁(r) + ∫₀ʳ H₁(t)dt),
/// with the integral evaluated by adaptive Simpson quadrature.
pub fn h2_of_r(r: f64, kappa: f64, sec_abs: f64) -> Result<f64> {
    let h1_r = h1_of_r(r, kappa)?;
    if !(sec_abs >= 0.0) {
        return Err(Error::InvalidInputs {
            reason: format!("sec_abs must be non-negative, got {}", sec_abs),
        });
    }
    // The integrand extends continuously to t = 0 with value √2 (sn(t)/t → 1).
    let integrand = |t: f64| -> f64 {
        if t == 0.0 {
            std::f64::consts::SQRT_2
        } else {
            let ratio = match sn(kappa, t) {
                Ok(s) => s / t,
                Err(_) => unreachable!("sn is defined on [0, r]"),
            };
            (1.0 + ratio * ratio).sqrt()
        }
    };
    let integral = adaptive_simpson(&integrand, 0.0, r, QUAD_TOL);
    Ok(4.0 / 3.0 * sec_abs * (r * h1_r + integral))
}

/// Adaptive Simpson quadrature with Richardson extrapolation: a subinterval is
/// accepted when |S_fine − S_coarse| ≤ 15·tol, contributing S_fine + err/15.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_refine(f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        refined + (refined - whole) / 15.0
    } else {
        simpson_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// The corrected-radius function Q(r) = sn_K⁻¹((1 − Br − ½Ar²)·sn_K(r)).
/// Requires the twisting factor to lie in [0, 1]; a negative factor means the
/// radius is already beyond r_⊥.
pub fn q_of_r(r: f64, k_upper: f64, a: f64, b: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::OutOfRange {
            what: "Q radius",
            value: r,
            range: "[0, ∞)".into(),
        });
    }
    let mut factor = 1.0 - b * r - 0.5 * a * r * r;
    if factor < -Q_FACTOR_CLAMP || factor > 1.0 + Q_FACTOR_CLAMP {
        return Err(Error::OutOfRange {
            what: "twisting factor 1 − Br − ½Ar²",
            value: factor,
            range: "[0, 1]".into(),
        });
    }
    factor = factor.clamp(0.0, 1.0);
    sn_inv(k_upper, factor * sn(k_upper, r)?)
}

/// Every radius bound the toolkit knows how to state, in chart-length units.
/// Serialized field names are part of the report interface.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub r_max: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Hbar1")]
    pub hbar1: f64,
    #[serde(rename = "Hbar2")]
    pub hbar2: f64,
    #[serde(rename = "Hbar")]
    pub hbar: f64,
    /// Normal radius min(½inj, 2/(√(2A+B²)+B)): below it the disk normal
    /// stays within the twisting estimate.
    pub r_perp: f64,
    /// Taming radius min(r_perp, 1/((1+2n(n−1))·H̄)).
    pub r_tau: f64,
    #[serde(rename = "Q_at_r_tau")]
    pub q_at_r_tau: f64,
    /// Refined standard-neighbourhood radius Q(r_τ).
    pub darboux_refined: f64,
    /// Rough standard-neighbourhood radius min(½inj, c_n/max(√sec_abs, θ′)).
    pub darboux_rough: f64,
    /// Three-dimensional bound min(r_perp, π/(2√K)); only defined for n = 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_3d: Option<f64>,
    /// Tightness radius min(inj, π/(2√K)) — full injectivity radius here.
    pub tightness_bound: f64,
    /// Largest radius at which a Reeb-orbit tube is guaranteed embedded,
    /// min(½inj, π/(2√K)).
    pub tube_embed_radius: f64,
    pub c_n: f64,
    pub d_n: f64,
}

/// Evaluates the full radius chain.
pub fn radius_bounds(inputs: &BoundInputs) -> Result<BoundReport> {
    let c = compute_constants(inputs)?;
    let n = inputs.n as f64;
    let r_perp = (inputs.inj / 2.0).min(2.0 / ((2.0 * c.a + c.b * c.b).sqrt() + c.b));
    let dim_factor = 1.0 + 2.0 * n * (n - 1.0);
    let r_tau = r_perp.min(1.0 / (dim_factor * c.hbar));
    let q_at_r_tau = q_of_r(r_tau, inputs.k_upper, c.a, c.b)?;
    let darboux_rough = (inputs.inj / 2.0).min(c.c_n / inputs.sec_abs.sqrt().max(inputs.theta_prime));
    let bound_3d = (inputs.n == 1).then(|| cap_by_conjugate_radius(r_perp, inputs.k_upper));
    let tightness_bound = cap_by_conjugate_radius(inputs.inj, inputs.k_upper);
    Ok(BoundReport {
        r_max: c.r_max,
        a: c.a,
        b: c.b,
        hbar1: c.hbar1,
        hbar2: c.hbar2,
        hbar: c.hbar,
        r_perp,
        r_tau,
        q_at_r_tau,
        darboux_refined: q_at_r_tau,
        darboux_rough,
        bound_3d,
        tightness_bound,
        tube_embed_radius: c.r_max,
        c_n: c.c_n,
        d_n: c.d_n,
    })
}

/// Radius of the comparison ball that survives removing a P-fraction of the
/// generalized sine at r₀: sn_K⁻¹(sn_K(r₀)·(1 − P)).
pub fn ball_in_cylinder(r0: f64, k_upper: f64, p_r0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_r0) {
        return Err(Error::OutOfRange {
            what: "cylinder fraction P",
            value: p_r0,
            range: "[0, 1]".into(),
        });
    }
    if !(r0 >= 0.0) {
        return Err(Error::OutOfRange {
            what: "ball radius",
            value: r0,
            range: "[0, ∞)".into(),
        });
    }
    if k_upper > 0.0 {
        let limit = std::f64::consts::PI / (2.0 * k_upper.sqrt());
        if r0 >= limit {
            return Err(Error::OutOfRange {
                what: "ball radius",
                value: r0,
                range: format!("[0, π/(2√K)) = [0, {:.6})", limit),
            });
        }
    }
    sn_inv(k_upper, sn(k_upper, r0)? * (1.0 - p_r0))
}

/// The pair (ε, λ) produced by the interpolation argument.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InterpolationConstants {
    pub epsilon: f64,
    pub lambda: f64,
}

/// Interpolation constants ε = ½C₁/(4C/(T−T₀) + C₁) and
/// λ = 8C(1−ε)/((T−T₀)εC₀).  Both slack inequalities of the underlying
/// argument, −4Cε/(T−T₀) + (1−ε)C₁ > 0 and −4C(1−ε)/(T−T₀) + λεC₀ > 0,
/// are asserted before returning.
pub fn interpolation_constants(
    c: f64,
    c0: f64,
    c1: f64,
    t0: f64,
    t: f64,
) -> Result<InterpolationConstants> {
    if !(c > 0.0) || !(c0 > 0.0) || !(c1 > 0.0) {
        return Err(Error::InvalidInputs {
            reason: format!("interpolation constants need C, C0, C1 > 0, got {}, {}, {}", c, c0, c1),
        });
    }
    if !(t0 >= 1.0) || !(t > t0) {
        return Err(Error::InvalidInputs {
            reason: format!("interpolation times need 1 ≤ T0 < T, got T0 = {}, T = {}", t0, t),
        });
    }
    let gap = t - t0;
    let epsilon = 0.5 * c1 / (4.0 * c / gap + c1);
    let lambda = 8.0 * c * (1.0 - epsilon) / (gap * epsilon * c0);
    let slack1 = -4.0 * c * epsilon / gap + (1.0 - epsilon) * c1;
    let slack2 = -4.0 * c * (1.0 - epsilon) / gap + lambda * epsilon * c0;
    assert!(
        slack1 > 0.0 && slack2 > 0.0,
        "interpolation slack must be strictly positive, got {} and {}",
        slack1,
        slack2
    );
    Ok(InterpolationConstants { epsilon, lambda })
}
