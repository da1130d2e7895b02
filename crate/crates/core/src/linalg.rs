//! Small dense linear algebra, generic over the scalar. The same Gauss-Jordan
//! inverse and nullspace extraction run over plain `f64` and over order-1
//! [`Jet`]s; in the jet instantiation every pivot decision is made on the
//! value part while the derivative parts ride along, which is how the
//! structure-tensor pipeline obtains ∂(Reeb), ∂φ, ∂(unit normal) without any
//! hand-written derivative formulas.
//!
//! Matrices here are at most (dim+1)² with dim ≤ 7, so the O(n³) classics
//! (full-pivot elimination, cyclic Jacobi for symmetric eigenvalues) are the
//! right tools; no external solver earns its keep at this size.

use crate::jet::Jet;

/// Scalar the elimination routines can work over. `val` exposes the plain
/// number used for pivoting and rank decisions; `lift` builds a constant of
/// the same shape (dimension/order for jets).
pub trait Scalar: Clone {
    fn val(&self) -> f64;
    fn lift(&self, v: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Caller guarantees `o.val() != 0`.
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Caller guarantees `self.val() > 0`.
    fn sqrt(&self) -> Self;
}

impl Scalar for f64 {
    fn val(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

impl Scalar for Jet {
    fn val(&self) -> f64 {
        self.value
    }
    fn lift(&self, v: f64) -> Self {
        Jet::constant(self.dim(), self.order(), v)
    }
    fn add(&self, o: &Self) -> Self {
        Jet::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Jet::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Jet::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        Jet::div(self, o).expect("jet division by zero-valued pivot")
    }
    fn neg(&self) -> Self {
        Jet::neg(self)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self).expect("jet sqrt of non-positive value")
    }
}

/// Row-major dense matrix over any [`Scalar`].
#[derive(Debug, Clone)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn at(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn identity_like(proto: &S, n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| proto.lift(if i == j { 1.0 } else { 0.0 }))
    }

    pub fn mul_mat(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows);
        Mat::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = self.at(i, 0).mul(other.at(0, j));
            for k in 1..self.cols {
                acc = acc.add(&self.at(i, k).mul(other.at(k, j)));
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = self.at(i, 0).mul(&v[0]);
                for k in 1..self.cols {
                    acc = acc.add(&self.at(i, k).mul(&v[k]));
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat<S> {
        Mat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn map_val(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|s| s.val()).collect(),
        }
    }

    /// Gauss-Jordan inverse with full pivoting on the value part. `None` when
    /// some pivot falls below `tiny` in absolute value (singular matrix).
    pub fn inverse(&self) -> Option<Mat<S>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let tiny = 1e-200;
        let mut a = self.clone();
        let mut inv = Mat::identity_like(&self.data[0], n);
        // Column permutation from full pivoting: col_perm[k] = original column
        // now sitting at position k; undone on the inverse's rows at the end.
        let mut col_perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Find the largest |value| in the remaining submatrix.
            let (mut pi, mut pj, mut pv) = (k, k, a.at(k, k).val().abs());
            for i in k..n {
                for j in k..n {
                    let v = a.at(i, j).val().abs();
                    if v > pv {
                        (pi, pj, pv) = (i, j, v);
                    }
                }
            }
            if pv < tiny {
                return None;
            }
            if pi != k {
                for j in 0..n {
                    a.data.swap(pi * n + j, k * n + j);
                    inv.data.swap(pi * n + j, k * n + j);
                }
            }
            if pj != k {
                for i in 0..n {
                    a.data.swap(i * n + pj, i * n + k);
                }
                col_perm.swap(pj, k);
            }
            let piv = a.at(k, k).clone();
            for j in 0..n {
                a.set(k, j, a.at(k, j).div(&piv));
                inv.set(k, j, inv.at(k, j).div(&piv));
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a.at(i, k).clone();
                if f.val() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.set(i, j, a.at(i, j).sub(&f.mul(a.at(k, j))));
                    inv.set(i, j, inv.at(i, j).sub(&f.mul(inv.at(k, j))));
                }
            }
        }
        // Column swaps on A are row swaps on A⁻¹.
        let mut out = inv.clone();
        for k in 0..n {
            let orig = col_perm[k];
            for j in 0..n {
                out.data[orig * n + j] = inv.at(k, j).clone();
            }
        }
        Some(out)
    }
}

/// Result of the rank/kernel analysis used for the Reeb field: rank of the
/// matrix, relative gap between the last kept and first dropped pivots, and
/// a kernel vector when the nullspace is exactly one-dimensional.
pub struct Nullspace<S> {
    pub rank: usize,
    pub gap: f64,
    pub kernel: Option<Vec<S>>,
}

/// Full-pivot Gaussian elimination; pivots whose |value| falls below
/// `rel_tol` times the largest pivot end the elimination. When the rank is
/// n−1 the unique (up to scale) kernel vector is produced by
/// back-substitution with the free variable set to 1.
pub fn nullspace<S: Scalar>(m: &Mat<S>, rel_tol: f64) -> Nullspace<S> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    let mut first_pivot = 0.0_f64;
    let mut gap = 0.0_f64;
    for k in 0..n {
        let (mut pi, mut pj, mut pv) = (k, k, a.at(k, k).val().abs());
        for i in k..n {
            for j in k..n {
                let v = a.at(i, j).val().abs();
                if v > pv {
                    (pi, pj, pv) = (i, j, v);
                }
            }
        }
        if k == 0 {
            first_pivot = pv;
        }
        if pv <= rel_tol * first_pivot || pv == 0.0 {
            gap = if first_pivot > 0.0 { pv / first_pivot } else { 0.0 };
            break;
        }
        rank = k + 1;
        if pi != k {
            for j in 0..n {
                a.data.swap(pi * n + j, k * n + j);
            }
        }
        if pj != k {
            for i in 0..n {
                a.data.swap(i * n + pj, i * n + k);
            }
            col_perm.swap(pj, k);
        }
        let piv = a.at(k, k).clone();
        for i in (k + 1)..n {
            let f = a.at(i, k).div(&piv);
            if f.val() == 0.0 {
                continue;
            }
            for j in k..n {
                a.set(i, j, a.at(i, j).sub(&f.mul(a.at(k, j))));
            }
        }
    }
    let kernel = if rank == n - 1 {
        // Upper triangular system in permuted variables; free variable last.
        let proto = &m.data[0];
        let mut y: Vec<S> = (0..n).map(|_| proto.lift(0.0)).collect();
        y[n - 1] = proto.lift(1.0);
        for k in (0..rank).rev() {
            // a[k][k] y_k + Σ_{j>k} a[k][j] y_j = 0
            let mut s = proto.lift(0.0);
            for j in (k + 1)..n {
                s = s.add(&a.at(k, j).mul(&y[j]));
            }
            y[k] = s.neg().div(a.at(k, k));
        }
        // Undo the column permutation.
        let mut x: Vec<S> = (0..n).map(|_| proto.lift(0.0)).collect();
        for k in 0..n {
            x[col_perm[k]] = y[k].clone();
        }
        Some(x)
    } else {
        None
    };
    Nullspace { rank, gap, kernel }
}

// ─── f64-only decompositions ─────────────────────────────────────────────

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(m: &Mat<f64>) -> Vec<f64> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.at(i, j) * a.at(i, j);
            }
        }
        let scale: f64 = (0..n).map(|i| a.at(i, i) * a.at(i, i)).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = *a.at(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = *a.at(p, p);
                let aqq = *a.at(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = *a.at(k, p);
                    let akq = *a.at(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = *a.at(p, k);
                    let aqk = *a.at(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| *a.at(i, i)).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Singular values, descending, via the symmetric eigenvalues of AᵀA.
pub fn singular_values(m: &Mat<f64>) -> Vec<f64> {
    let ata = m.transpose().mul_mat(m);
    let mut sv: Vec<f64> = sym_eigenvalues(&ata)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Operator (spectral) norm.
pub fn op_norm(m: &Mat<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Cholesky test for positive definiteness of a symmetric matrix.
pub fn is_positive_definite(m: &Mat<f64>) -> bool {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut l = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = *m.at(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

// ─── Plain vector helpers ────────────────────────────────────────────────

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

pub fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// a + c·b
pub fn axpy(a: &[f64], c: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + c * y).collect()
}
