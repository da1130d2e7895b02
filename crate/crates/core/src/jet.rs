//! Forward-mode jets: a value together with its partial derivatives up to a
//! requested order (0–3) in `dim` variables. Higher entries use symmetric
//! storage, so `hess` holds d(d+1)/2 numbers and `third` holds
//! d(d+1)(d+2)/6. All arithmetic propagates derivatives exactly (Leibniz /
//! Faà di Bruno truncated at the jet order); there is no step size anywhere.
//!
//! Jets double as the scalar type for the structure-tensor pipeline: running
//! the same linear algebra over order-1 jets instead of `f64` yields the
//! coordinate derivatives of every derived field (Reeb vector, φ, unit
//! normal) without writing a single analytic derivative by hand.

use crate::error::{Error, Result};

/// Truncated Taylor expansion at a point: value, gradient, symmetric Hessian,
/// symmetric third derivative, in `dim` variables up to `order` ≤ 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    dim: usize,
    order: u8,
    pub value: f64,
    /// ∂_i, length `dim` (empty when order = 0).
    pub grad: Vec<f64>,
    /// ∂_i∂_j for i ≤ j, length d(d+1)/2 (empty when order < 2).
    pub hess: Vec<f64>,
    /// ∂_i∂_j∂_k for i ≤ j ≤ k, length d(d+1)(d+2)/6 (empty when order < 3).
    pub third: Vec<f64>,
}

/// Number of unordered pairs (i ≤ j) out of d indices.
pub fn sym2_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Number of unordered triples (i ≤ j ≤ k) out of d indices.
pub fn sym3_len(d: usize) -> usize {
    d * (d + 1) * (d + 2) / 6
}

/// Offset of the pair {i, j} in symmetric row-major storage.
pub fn sym2_idx(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Rows 0..i contribute d, d-1, ... entries; then j-i within row i.
    i * d - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Offset of the triple {i, j, k} in symmetric storage.
pub fn sym3_idx(d: usize, i: usize, j: usize, k: usize) -> usize {
    let mut v = [i, j, k];
    v.sort_unstable();
    let [a, b, c] = v;
    // Triples starting below a, then pairs within the (d - a)-sized tail.
    let mut base = 0;
    for t in 0..a {
        let m = d - t;
        base += m * (m + 1) / 2;
    }
    base + sym2_idx(d - a, b - a, c - a)
}

impl Jet {
    /// The constant `value` (all derivatives zero).
    pub fn constant(dim: usize, order: u8, value: f64) -> Self {
        assert!(order <= 3, "jet order is capped at 3");
        Jet {
            dim,
            order,
            value,
            grad: if order >= 1 { vec![0.0; dim] } else { vec![] },
            hess: if order >= 2 { vec![0.0; sym2_len(dim)] } else { vec![] },
            third: if order >= 3 { vec![0.0; sym3_len(dim)] } else { vec![] },
        }
    }

    /// The coordinate function x_index seeded at `value`: gradient is the
    /// index-th basis covector, higher derivatives vanish.
    pub fn variable(dim: usize, order: u8, index: usize, value: f64) -> Self {
        assert!(index < dim);
        let mut j = Jet::constant(dim, order, value);
        if order >= 1 {
            j.grad[index] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// ∂_i (zero if the jet does not carry first derivatives).
    pub fn d1(&self, i: usize) -> f64 {
        if self.order >= 1 {
            self.grad[i]
        } else {
            0.0
        }
    }

    /// ∂_i∂_j.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        if self.order >= 2 {
            self.hess[sym2_idx(self.dim, i, j)]
        } else {
            0.0
        }
    }

    /// ∂_i∂_j∂_k.
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.order >= 3 {
            self.third[sym3_idx(self.dim, i, j, k)]
        } else {
            0.0
        }
    }

    /// Drop derivative orders above `order` (used to hand an order-2 jet to
    /// arithmetic that only needs first derivatives).
    pub fn truncate(&self, order: u8) -> Jet {
        assert!(order <= self.order);
        let mut r = self.clone();
        r.order = order;
        if order < 3 {
            r.third.clear();
        }
        if order < 2 {
            r.hess.clear();
        }
        if order < 1 {
            r.grad.clear();
        }
        r
    }

    fn assert_same_shape(&self, other: &Jet) {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
        assert_eq!(self.order, other.order, "jet order mismatch");
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.assert_same_shape(other);
        let mut r = self.clone();
        r.value += other.value;
        for (a, b) in r.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in r.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        for (a, b) in r.third.iter_mut().zip(&other.third) {
            *a += b;
        }
        r
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet {
        let mut r = self.clone();
        r.value = -r.value;
        for a in r.grad.iter_mut() {
            *a = -*a;
        }
        for a in r.hess.iter_mut() {
            *a = -*a;
        }
        for a in r.third.iter_mut() {
            *a = -*a;
        }
        r
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut r = self.clone();
        r.value *= c;
        for a in r.grad.iter_mut() {
            *a *= c;
        }
        for a in r.hess.iter_mut() {
            *a *= c;
        }
        for a in r.third.iter_mut() {
            *a *= c;
        }
        r
    }

    /// Leibniz product up to the jet order:
    ///   (ab)_i   = a_i b + a b_i
    ///   (ab)_ij  = a_ij b + a_i b_j + a_j b_i + a b_ij
    ///   (ab)_ijk = a_ijk b + a_ij b_k + a_ik b_j + a_jk b_i
    ///            + a_i b_jk + a_j b_ik + a_k b_ij + a b_ijk
    pub fn mul(&self, other: &Jet) -> Jet {
        self.assert_same_shape(other);
        let (a, b) = (self, other);
        let d = self.dim;
        let mut r = Jet::constant(d, self.order, a.value * b.value);
        if self.order >= 1 {
            for i in 0..d {
                r.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..d {
                for j in i..d {
                    r.hess[sym2_idx(d, i, j)] = a.d2(i, j) * b.value
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i]
                        + a.value * b.d2(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..d {
                for j in i..d {
                    for k in j..d {
                        r.third[sym3_idx(d, i, j, k)] = a.d3(i, j, k) * b.value
                            + a.d2(i, j) * b.grad[k]
                            + a.d2(i, k) * b.grad[j]
                            + a.d2(j, k) * b.grad[i]
                            + a.grad[i] * b.d2(j, k)
                            + a.grad[j] * b.d2(i, k)
                            + a.grad[k] * b.d2(i, j)
                            + a.value * b.d3(i, j, k);
                    }
                }
            }
        }
        r
    }

    /// Chain rule through a univariate function with derivatives
    /// f0 = f(u), f1 = f'(u), f2 = f''(u), f3 = f'''(u):
    ///   c_i   = f1 u_i
    ///   c_ij  = f2 u_i u_j + f1 u_ij
    ///   c_ijk = f3 u_i u_j u_k + f2 (u_ij u_k + u_ik u_j + u_jk u_i) + f1 u_ijk
    fn compose(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Jet {
        let d = self.dim;
        let u = self;
        let mut r = Jet::constant(d, self.order, f0);
        if self.order >= 1 {
            for i in 0..d {
                r.grad[i] = f1 * u.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..d {
                for j in i..d {
                    r.hess[sym2_idx(d, i, j)] = f2 * u.grad[i] * u.grad[j] + f1 * u.d2(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..d {
                for j in i..d {
                    for k in j..d {
                        r.third[sym3_idx(d, i, j, k)] = f3 * u.grad[i] * u.grad[j] * u.grad[k]
                            + f2 * (u.d2(i, j) * u.grad[k]
                                + u.d2(i, k) * u.grad[j]
                                + u.d2(j, k) * u.grad[i])
                            + f1 * u.d3(i, j, k);
                    }
                }
            }
        }
        r
    }

    fn domain_err(func: &'static str, reason: String) -> Error {
        Error::Domain {
            expr: func.to_string(),
            reason,
        }
    }

    /// 1/u, with derivatives (−1/u², 2/u³, −6/u⁴).
    pub fn recip(&self) -> Result<Jet> {
        let u = self.value;
        if u == 0.0 {
            return Err(Self::domain_err("1/x", "division by zero".into()));
        }
        let iu = 1.0 / u;
        Ok(self.compose(iu, -iu * iu, 2.0 * iu * iu * iu, -6.0 * iu * iu * iu * iu))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s, -c)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c, s)
    }

    /// tan' = 1 + tan², tan'' = 2t(1+t²), tan''' = (1+t²)(2+6t²).
    pub fn tan(&self) -> Result<Jet> {
        let t = self.value.tan();
        if !t.is_finite() {
            return Err(Self::domain_err("tan", format!("pole at x = {}", self.value)));
        }
        let s = 1.0 + t * t;
        Ok(self.compose(t, s, 2.0 * t * s, s * (2.0 + 6.0 * t * t)))
    }

    /// asin' = (1−u²)^{−1/2}, asin'' = u(1−u²)^{−3/2},
    /// asin''' = (1+2u²)(1−u²)^{−5/2}. Needs |u| < 1 when derivatives are
    /// carried (the derivative blows up at ±1).
    pub fn asin(&self) -> Result<Jet> {
        let u = self.value;
        if u.abs() > 1.0 || (self.order >= 1 && u.abs() == 1.0) {
            return Err(Self::domain_err("asin", format!("argument {u} outside (-1, 1)")));
        }
        let w = 1.0 - u * u;
        let w12 = w.sqrt();
        Ok(self.compose(
            u.asin(),
            1.0 / w12,
            u / (w * w12),
            (1.0 + 2.0 * u * u) / (w * w * w12),
        ))
    }

    pub fn acos(&self) -> Result<Jet> {
        let u = self.value;
        if u.abs() > 1.0 || (self.order >= 1 && u.abs() == 1.0) {
            return Err(Self::domain_err("acos", format!("argument {u} outside (-1, 1)")));
        }
        let w = 1.0 - u * u;
        let w12 = w.sqrt();
        Ok(self.compose(
            u.acos(),
            -1.0 / w12,
            -u / (w * w12),
            -(1.0 + 2.0 * u * u) / (w * w * w12),
        ))
    }

    /// atan' = 1/(1+u²), atan'' = −2u/(1+u²)², atan''' = (6u²−2)/(1+u²)³.
    pub fn atan(&self) -> Jet {
        let u = self.value;
        let s = 1.0 + u * u;
        self.compose(u.atan(), 1.0 / s, -2.0 * u / (s * s), (6.0 * u * u - 2.0) / (s * s * s))
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.compose(s, c, s, c)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.compose(c, s, c, s)
    }

    /// tanh' = 1 − t², tanh'' = −2t(1−t²), tanh''' = (1−t²)(6t²−2).
    pub fn tanh(&self) -> Jet {
        let t = self.value.tanh();
        let s = 1.0 - t * t;
        self.compose(t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose(e, e, e, e)
    }

    /// Natural logarithm; domain u > 0.
    pub fn ln(&self) -> Result<Jet> {
        let u = self.value;
        if u <= 0.0 {
            return Err(Self::domain_err("log", format!("argument {u} not positive")));
        }
        let iu = 1.0 / u;
        Ok(self.compose(u.ln(), iu, -iu * iu, 2.0 * iu * iu * iu))
    }

    /// Square root; domain u > 0 when derivatives are carried (u ≥ 0 for a
    /// plain value), since d/du √u is singular at 0.
    pub fn sqrt(&self) -> Result<Jet> {
        let u = self.value;
        if u < 0.0 || (self.order >= 1 && u == 0.0) {
            return Err(Self::domain_err("sqrt", format!("argument {u} not positive")));
        }
        let s = u.sqrt();
        if self.order == 0 {
            return Ok(Jet::constant(self.dim, 0, s));
        }
        // (√u)' = ½ u^{-1/2}, '' = −¼ u^{-3/2}, ''' = ⅜ u^{-5/2}.
        Ok(self.compose(s, 0.5 / s, -0.25 / (u * s), 0.375 / (u * u * s)))
    }

    /// Integer power by binary exponentiation on jets; valid for any base
    /// (including negative and zero, where a plain power series is fine).
    pub fn powi(&self, n: i64) -> Result<Jet> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let mut acc = Jet::constant(self.dim, self.order, 1.0);
        let mut base = self.clone();
        let mut n = n as u64;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// General power a^b = exp(b · ln a); domain a > 0. Integer exponents
    /// never reach this path (see the evaluator), so negative bases only
    /// error where the real power is genuinely undefined.
    pub fn pow(&self, other: &Jet) -> Result<Jet> {
        Ok(other.mul(&self.ln().map_err(|_| {
            Self::domain_err("x^y", format!("base {} not positive", self.value))
        })?)
        .exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn var2(order: u8, x: f64, y: f64) -> (Jet, Jet) {
        (Jet::variable(2, order, 0, x), Jet::variable(2, order, 1, y))
    }

    #[test]
    fn symmetric_indexing_is_a_bijection() {
        for d in 1..=6 {
            let mut seen2 = vec![false; sym2_len(d)];
            for i in 0..d {
                for j in i..d {
                    let idx = sym2_idx(d, i, j);
                    assert!(!seen2[idx], "pair ({i},{j}) collides in dim {d}");
                    seen2[idx] = true;
                    assert_eq!(idx, sym2_idx(d, j, i));
                }
            }
            assert!(seen2.iter().all(|&b| b));
            let mut seen3 = vec![false; sym3_len(d)];
            for i in 0..d {
                for j in i..d {
                    for k in j..d {
                        let idx = sym3_idx(d, i, j, k);
                        assert!(!seen3[idx], "triple ({i},{j},{k}) collides in dim {d}");
                        seen3[idx] = true;
                        assert_eq!(idx, sym3_idx(d, k, i, j));
                    }
                }
            }
            assert!(seen3.iter().all(|&b| b));
        }
    }

    #[test]
    fn product_jet_matches_hand_derivatives() {
        // f = x²y at (2,3): f = 12, f_x = 2xy = 12, f_y = x² = 4,
        // f_xx = 2y = 6, f_xy = 2x = 4, f_yy = 0, f_xxy = 2, rest of third = 0.
        let (x, y) = var2(3, 2.0, 3.0);
        let f = x.mul(&x).mul(&y);
        assert!((f.value - 12.0).abs() < TOL);
        assert!((f.d1(0) - 12.0).abs() < TOL);
        assert!((f.d1(1) - 4.0).abs() < TOL);
        assert!((f.d2(0, 0) - 6.0).abs() < TOL);
        assert!((f.d2(0, 1) - 4.0).abs() < TOL);
        assert!(f.d2(1, 1).abs() < TOL);
        assert!(f.d3(0, 0, 0).abs() < TOL);
        assert!((f.d3(0, 0, 1) - 2.0).abs() < TOL);
        assert!(f.d3(0, 1, 1).abs() < TOL);
    }

    #[test]
    fn sin_jet_at_zero_is_the_taylor_series() {
        let x = Jet::variable(1, 3, 0, 0.0);
        let s = x.sin();
        assert!((s.value - 0.0).abs() < TOL);
        assert!((s.d1(0) - 1.0).abs() < TOL);
        assert!(s.d2(0, 0).abs() < TOL);
        assert!((s.d3(0, 0, 0) + 1.0).abs() < TOL);
    }

    #[test]
    fn third_order_chain_rule_through_composition() {
        // f = exp(sin x) at x = 0.7; compare against the analytic derivatives
        // f' = f cos x, f'' = f (cos²x − sin x), f''' = f (cos³x − 3 sin x cos x − cos x).
        let x0 = 0.7_f64;
        let f = Jet::variable(1, 3, 0, x0).sin().exp();
        let (s, c) = x0.sin_cos();
        let v = s.exp();
        assert!((f.value - v).abs() < TOL);
        assert!((f.d1(0) - v * c).abs() < TOL);
        assert!((f.d2(0, 0) - v * (c * c - s)).abs() < TOL);
        assert!((f.d3(0, 0, 0) - v * (c * c * c - 3.0 * s * c - c)).abs() < 1e-11);
    }

    #[test]
    fn integer_powers_allow_negative_bases() {
        let x = Jet::variable(1, 2, 0, -1.5);
        let f = x.powi(3).unwrap();
        assert!((f.value - (-3.375)).abs() < TOL);
        assert!((f.d1(0) - 3.0 * 2.25).abs() < TOL);
        assert!((f.d2(0, 0) - 6.0 * -1.5).abs() < TOL);
        let g = x.powi(-2).unwrap();
        assert!((g.value - 1.0 / 2.25).abs() < TOL);
    }

    #[test]
    fn domain_violations_are_reported() {
        assert!(Jet::variable(1, 1, 0, -1.0).ln().is_err());
        assert!(Jet::variable(1, 1, 0, -0.5).sqrt().is_err());
        assert!(Jet::variable(1, 1, 0, 0.0).sqrt().is_err());
        assert!(Jet::variable(1, 0, 0, 0.0).sqrt().is_ok());
        assert!(Jet::variable(1, 1, 0, 1.0).asin().is_err());
        assert!(Jet::variable(1, 1, 0, 0.3).asin().is_ok());
        assert!(Jet::constant(1, 1, 0.0).recip().is_err());
    }

    #[test]
    fn quotient_rule_to_second_order() {
        // f = x / (1 + y²) at (1.2, 0.5): f_y = −2xy/(1+y²)², f_yy via hand calc.
        let (x, y) = var2(2, 1.2, 0.5);
        let one = Jet::constant(2, 2, 1.0);
        let f = x.div(&one.add(&y.mul(&y))).unwrap();
        let s = 1.25_f64;
        assert!((f.value - 1.2 / s).abs() < TOL);
        assert!((f.d1(1) - (-2.0 * 1.2 * 0.5) / (s * s)).abs() < TOL);
        // f_yy = x (8y²/(1+y²)³ − 2/(1+y²)²)
        let fyy = 1.2 * (8.0 * 0.25 / (s * s * s) - 2.0 / (s * s));
        assert!((f.d2(1, 1) - fyy).abs() < TOL);
    }
}
