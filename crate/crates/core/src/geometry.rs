//! Riemannian data of a metric given by expression entries in one chart:
//! Christoffel symbols, the (1,3) and (0,4) curvature tensors at a point,
//! sectional curvature of a plane, Ricci curvature of a direction, and the
//! covariant Hessian of a scalar. Everything derives from jets of the metric
//! entries — Γ needs one derivative order, the curvature tensor two — so
//! there is no finite differencing anywhere in this path.
//!
//! Curvature sign convention: R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z,
//! sectional curvature K(u,v) = ⟨R(u,v)v, u⟩ / (‖u‖²‖v‖² − ⟨u,v⟩²); the round
//! sphere comes out at K = +1.

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::jet::Jet;
use crate::linalg::{is_positive_definite, Mat};

/// Gram determinants below this (relative) threshold mean the two vectors do
/// not span a plane.
const PLANE_GRAM_REL_TOL: f64 = 1e-12;

/// A coordinate chart: names give expressions their variables; the optional
/// box bounds trajectories (integrations error with `LeftChartDomain` when
/// they exit, pointwise evaluation is not clipped).
#[derive(Debug, Clone)]
pub struct Chart {
    pub coords: Vec<String>,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Chart {
    pub fn new(coords: &[&str], bounds: Option<Vec<(f64, f64)>>) -> Self {
        Chart {
            coords: coords.iter().map(|s| s.to_string()).collect(),
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.bounds {
            None => true,
            Some(b) => p.iter().zip(b).all(|(x, (lo, hi))| x >= lo && x <= hi),
        }
    }

    /// Box bounds along axis `i`, if the chart is bounded.
    pub fn bound(&self, i: usize) -> Option<(f64, f64)> {
        self.bounds.as_ref().map(|b| b[i])
    }
}

/// Symmetric matrix of scalar fields g_ij(x).
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    /// Full d×d entry list, row major; kept symmetric by construction.
    entries: Vec<Expr>,
}

impl MetricField {
    /// Build from the upper triangle (row i holds g_i,i .. g_i,d-1).
    pub fn from_upper_triangle(dim: usize, upper: Vec<Vec<Expr>>) -> Self {
        assert_eq!(upper.len(), dim);
        let mut entries = vec![Expr::Const(0.0); dim * dim];
        for (i, row) in upper.iter().enumerate() {
            assert_eq!(row.len(), dim - i, "row {i} of an upper triangle");
            for (off, e) in row.iter().enumerate() {
                let j = i + off;
                entries[i * dim + j] = e.clone();
                entries[j * dim + i] = e.clone();
            }
        }
        MetricField { dim, entries }
    }

    /// Convenience for literal tables: parse the upper triangle from strings.
    pub fn parse_upper(chart: &Chart, upper: &[&[&str]]) -> Result<Self> {
        let mut rows = Vec::with_capacity(upper.len());
        for row in upper {
            let mut r = Vec::with_capacity(row.len());
            for src in *row {
                r.push(parse(src, &chart.coords)?);
            }
            rows.push(r);
        }
        Ok(Self::from_upper_triangle(chart.dim(), rows))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim + j]
    }

    /// Evaluate all entries as jets of the given order; positive
    /// definiteness is checked on the value part at every call.
    pub fn eval(&self, p: &[f64], order: u8) -> Result<Mat<Jet>> {
        let d = self.dim;
        let mut data: Vec<Jet> = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                if j < i {
                    // symmetric: reuse the value computed for (j,i)
                    let prev: Jet = data[j * d + i].clone();
                    data.push(prev);
                } else {
                    data.push(crate::expr::eval_jet(self.entry(i, j), p, order)?);
                }
            }
        }
        let m = Mat { rows: d, cols: d, data };
        if !is_positive_definite(&m.map_val()) {
            return Err(Error::NotPositiveDefinite { point: p.to_vec() });
        }
        Ok(m)
    }

    /// Value-only metric matrix.
    pub fn eval_values(&self, p: &[f64]) -> Result<Mat<f64>> {
        Ok(self.eval(p, 0)?.map_val())
    }
}

/// Flattened index helpers for the curvature tables.
#[inline]
fn i3(d: usize, k: usize, i: usize, j: usize) -> usize {
    (k * d + i) * d + j
}

#[inline]
fn i4(d: usize, l: usize, i: usize, j: usize, k: usize) -> usize {
    ((l * d + i) * d + j) * d + k
}

/// Curvature data of a metric at one point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub dim: usize,
    pub g: Mat<f64>,
    pub g_inv: Mat<f64>,
    /// Γ^k_ij at `[k, i, j]` (symmetric in i, j).
    gamma: Vec<f64>,
    /// (R(∂_i, ∂_j)∂_k)^l at `[l, i, j, k]`.
    riemann: Vec<f64>,
    /// ⟨R(∂_i, ∂_j)∂_k, ∂_l⟩ at `[l, i, j, k]`.
    riemann_low: Vec<f64>,
}

/// Christoffel symbols alone (first metric derivatives); the cheap path the
/// geodesic integrator calls at every stage evaluation.
pub fn christoffels_at(metric: &MetricField, p: &[f64]) -> Result<Vec<f64>> {
    let d = metric.dim();
    let gj = metric.eval(p, 1)?;
    let ginv = gj
        .map_val()
        .inverse()
        .ok_or_else(|| Error::NotPositiveDefinite { point: p.to_vec() })?;
    let mut gamma = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                // Γ^k_ij = ½ g^{kl} (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
                let mut s = 0.0;
                for l in 0..d {
                    s += ginv.at(k, l)
                        * (gj.at(j, l).d1(i) + gj.at(i, l).d1(j) - gj.at(i, j).d1(l));
                }
                gamma[i3(d, k, i, j)] = 0.5 * s;
                gamma[i3(d, k, j, i)] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// Full curvature assembly: metric jets to order 2, Christoffels as order-1
/// jets (so their coordinate derivatives are exact), then
/// R(∂_i,∂_j)∂_k = (∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^m_jk Γ^l_im − Γ^m_ik Γ^l_jm) ∂_l.
pub fn point_geometry(metric: &MetricField, p: &[f64]) -> Result<PointGeometry> {
    let d = metric.dim();
    let gj2 = metric.eval(p, 2)?;
    // Work over order-1 jets: truncate g, build ∂g entries as jets.
    let gj1 = Mat::from_fn(d, d, |i, j| gj2.at(i, j).truncate(1));
    let ginv_j = gj1
        .inverse()
        .ok_or_else(|| Error::NotPositiveDefinite { point: p.to_vec() })?;
    // dg[l][i][j] = jet of ∂_l g_ij (value = first derivative of g entry,
    // gradient = its second derivatives).
    let dg = |l: usize, i: usize, j: usize| -> Jet {
        let e = gj2.at(i, j);
        let mut v = Jet::constant(d, 1, e.d1(l));
        for m in 0..d {
            v.grad[m] = e.d2(l, m);
        }
        v
    };
    let mut gamma_j: Vec<Jet> = vec![Jet::constant(d, 1, 0.0); d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut s = Jet::constant(d, 1, 0.0);
                for l in 0..d {
                    let term = dg(i, j, l).add(&dg(j, i, l)).sub(&dg(l, i, j));
                    s = s.add(&ginv_j.at(k, l).mul(&term));
                }
                let half = s.scale(0.5);
                gamma_j[i3(d, k, i, j)] = half.clone();
                gamma_j[i3(d, k, j, i)] = half;
            }
        }
    }
    let gamma: Vec<f64> = gamma_j.iter().map(|j| j.value).collect();
    let mut riemann = vec![0.0; d * d * d * d];
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut v = gamma_j[i3(d, l, j, k)].d1(i) - gamma_j[i3(d, l, i, k)].d1(j);
                    for m in 0..d {
                        v += gamma[i3(d, m, j, k)] * gamma[i3(d, l, i, m)]
                            - gamma[i3(d, m, i, k)] * gamma[i3(d, l, j, m)];
                    }
                    riemann[i4(d, l, i, j, k)] = v;
                }
            }
        }
    }
    let g = gj1.map_val();
    let mut riemann_low = vec![0.0; d * d * d * d];
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut v = 0.0;
                    for m in 0..d {
                        v += g.at(l, m) * riemann[i4(d, m, i, j, k)];
                    }
                    riemann_low[i4(d, l, i, j, k)] = v;
                }
            }
        }
    }
    Ok(PointGeometry {
        point: p.to_vec(),
        dim: d,
        g,
        g_inv: ginv_j.map_val(),
        gamma,
        riemann,
        riemann_low,
    })
}

impl PointGeometry {
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[i3(self.dim, k, i, j)]
    }

    /// (R(∂_i,∂_j)∂_k)^l
    pub fn riem(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.riemann[i4(self.dim, l, i, j, k)]
    }

    /// ⟨R(∂_i,∂_j)∂_k, ∂_l⟩
    pub fn riem_low(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.riemann_low[i4(self.dim, l, i, j, k)]
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.g.at(i, j) * u[i] * v[j];
            }
        }
        s
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Components of R(u,v)w.
    pub fn curvature_apply(&self, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for l in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    if v[j] == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        s += self.riemann[i4(d, l, i, j, k)] * u[i] * v[j] * w[k];
                    }
                }
            }
            out[l] = s;
        }
        out
    }

    /// Covariant Hessian of a scalar whose order-2 jet at this point is `f`:
    /// (∇²f)_ij = ∂_i∂_j f − Γ^k_ij ∂_k f.
    pub fn hessian(&self, f: &Jet) -> Mat<f64> {
        let d = self.dim;
        Mat::from_fn(d, d, |i, j| {
            let mut v = f.d2(i, j);
            for k in 0..d {
                v -= self.gamma(k, i, j) * f.d1(k);
            }
            v
        })
    }
}

/// Sectional curvature of the plane spanned by u, v.
pub fn sectional(pg: &PointGeometry, u: &[f64], v: &[f64]) -> Result<f64> {
    let uu = pg.inner(u, u);
    let vv = pg.inner(v, v);
    let uv = pg.inner(u, v);
    let gram = uu * vv - uv * uv;
    if gram <= PLANE_GRAM_REL_TOL * uu * vv || !(gram > 0.0) {
        return Err(Error::DegeneratePlane { gram });
    }
    let rvv = pg.curvature_apply(u, v, v);
    Ok(pg.inner(&rvv, u) / gram)
}

/// Ricci curvature Ric(u, u) = tr(x ↦ R(x, u)u); the trace pairs the
/// contravariant output slot with the coordinate frame, no metric needed.
pub fn ricci_direction(pg: &PointGeometry, u: &[f64]) -> f64 {
    let d = pg.dim;
    let mut s = 0.0;
    for a in 0..d {
        for j in 0..d {
            if u[j] == 0.0 {
                continue;
            }
            for k in 0..d {
                s += pg.riem(a, a, j, k) * u[j] * u[k];
            }
        }
    }
    s
}
