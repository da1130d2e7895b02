//! Geodesics, Jacobi fields, exponential-map disks, and the empirical
//! probes that test the quantitative inequalities on concrete models.
//!
//! The probes all share one geometric engine: along each radial direction
//! v ∈ ξ_p a joint system is integrated — the geodesic γ(s) = exp_p(sv), a
//! parallel-transported orthonormal frame E_1, …, E_{d−1} completing γ̇, and
//! any number of Jacobi fields in parallel-frame components a_a(s), where
//! the Jacobi equation becomes a″_a = −Σ_b ⟨R(E_b, γ̇)γ̇, E_a⟩ a_b.  A field
//! with J(0) = 0 and unit J′(0) pushed forward as X(s) = J(s)/s is the
//! derivative of the exponential map in that direction; 2n of them span the
//! tangent space of the exponential disk of ξ_p, whose metric-unit normal
//! n_D is oriented by continuity from the Reeb vector at the center.

use crate::bounds::{ct, h1_of_r, h2_of_r};
use crate::contact::{frame_at, reeb_at, ContactFrame, ContactModel, OrbitSeed};
use crate::error::{Error, Result};
use crate::geometry::{christoffels_at, point_geometry};
use crate::linalg::{nullspace, Mat};
use crate::ode::{integrate, OdeOptions, OdePath};
use crate::sample::{normal_vector, rng_for};
use rayon::prelude::*;
use serde::Serialize;

/// Initial velocities must be unit within this before integrating.
pub const UNIT_SPEED_TOL: f64 = 1e-9;
/// A probe passes iff its worst margin stays above −this.
pub const PROBE_MARGIN_TOL: f64 = 1e-6;
/// Reeb orbits whose endpoint misses the seed by more than this (in the
/// metric at the seed) are rejected as not closed.
pub const ORBIT_CLOSURE_TOL: f64 = 1e-4;
/// Relative pivot threshold for the disk-normal nullspace extraction.
const NULLSPACE_REL_TOL: f64 = 1e-8;
/// Geodesic step ceiling as a fraction of the integration length.
const MAX_STEP_FRACTION: f64 = 1.0 / 50.0;
/// Orbit-integration step ceiling as a fraction of the period.
const ORBIT_MAX_STEP_FRACTION: f64 = 1.0 / 200.0;
/// Random tangent draws per disk sample in the taming-ratio scan.
const TAMING_VECTORS_PER_SAMPLE: usize = 4;
/// Matching tolerance for checkpoint lookups (relative).
const CHECKPOINT_EPS: f64 = 1e-12;

// ─── Small metric helpers ────────────────────────────────────────────────

fn g_inner(g: &Mat<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = g.rows;
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += g.at(i, j) * u[i] * v[j];
        }
    }
    acc
}

fn g_norm(g: &Mat<f64>, u: &[f64]) -> f64 {
    g_inner(g, u, u).max(0.0).sqrt()
}

fn form_apply(m: &Mat<f64>, u: &[f64], v: &[f64]) -> f64 {
    g_inner(m, u, v)
}

fn mat_apply(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| m.at(i, j) * v[j]).sum())
        .collect()
}

// ─── Geodesics ───────────────────────────────────────────────────────────

/// One recorded point of a geodesic.
#[derive(Debug, Clone)]
pub struct GeodesicSample {
    pub s: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// An integrated unit-speed geodesic with dense output.  Every accepted
/// step endpoint is a sample; requested checkpoints land exactly on
/// samples.  ‖γ′(s)‖_g stays within 1e-8 of 1 along the whole path (the
/// unit-speed drift property of the integrator at these tolerances).
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub dim: usize,
    pub start_point: Vec<f64>,
    pub start_velocity: Vec<f64>,
    pub length: f64,
    pub checkpoints: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    samples: Vec<GeodesicSample>,
    ode: OdePath,
}

impl GeodesicPath {
    pub fn samples(&self) -> &[GeodesicSample] {
        &self.samples
    }

    pub fn end(&self) -> &GeodesicSample {
        self.samples.last().expect("paths hold at least the start sample")
    }

    /// Dense (point, velocity) at arbitrary arclength via the integrator's
    /// cubic Hermite interpolant.
    pub fn at(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let (y, _) = self.ode.at(s);
        (y[..self.dim].to_vec(), y[self.dim..2 * self.dim].to_vec())
    }

    /// Index of the sample landed at arclength `s`, if one was forced there.
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.samples
            .iter()
            .position(|smp| (smp.s - s).abs() <= CHECKPOINT_EPS * s.abs().max(1.0))
    }
}

fn check_unit(model: &ContactModel, p: &[f64], v: &[f64]) -> Result<()> {
    let g = model.metric.eval_values(p)?;
    let n = g_norm(&g, v);
    if (n - 1.0).abs() > UNIT_SPEED_TOL {
        return Err(Error::NotUnit { norm: n });
    }
    Ok(())
}

/// Integrates the geodesic equation γ″ᵏ + Γᵏ_ij γ′ⁱγ′ʲ = 0 from `p` with
/// unit initial velocity `v` for the given arclength.
pub fn integrate_geodesic(
    model: &ContactModel,
    p: &[f64],
    v: &[f64],
    length: f64,
) -> Result<GeodesicPath> {
    geodesic_with_checkpoints(model, p, v, length, &[])
}

/// As [`integrate_geodesic`], additionally forcing samples at the given
/// arclengths (used by every probe so margins are read at exact radii).
pub fn geodesic_with_checkpoints(
    model: &ContactModel,
    p: &[f64],
    v: &[f64],
    length: f64,
    checkpoints: &[f64],
) -> Result<GeodesicPath> {
    check_unit(model, p, v)?;
    let d = model.dim();
    let metric = &model.metric;
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let gamma = christoffels_at(metric, &y[..d])?;
        let v = &y[d..2 * d];
        dy[..d].copy_from_slice(v);
        for k in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += gamma[(k * d + i) * d + j] * v[i] * v[j];
                }
            }
            dy[d + k] = -acc;
        }
        Ok(())
    };
    let mut y0 = Vec::with_capacity(2 * d);
    y0.extend_from_slice(p);
    y0.extend_from_slice(v);
    let domain = |y: &[f64]| model.chart.contains(&y[..d]);
    let opts = OdeOptions { max_step: length * MAX_STEP_FRACTION, ..OdeOptions::default() };
    let ode = integrate(&rhs, &y0, length, checkpoints, &domain, &opts)?;
    let samples = ode
        .samples
        .iter()
        .map(|smp| GeodesicSample {
            s: smp.s,
            point: smp.y[..d].to_vec(),
            velocity: smp.y[d..2 * d].to_vec(),
        })
        .collect();
    Ok(GeodesicPath {
        dim: d,
        start_point: p.to_vec(),
        start_velocity: v.to_vec(),
        length,
        checkpoints: checkpoints.to_vec(),
        accepted: ode.accepted,
        rejected: ode.rejected,
        samples,
        ode,
    })
}

// ─── Jacobi fields ───────────────────────────────────────────────────────

/// One sample of a bundle of Jacobi fields along a shared geodesic.
#[derive(Debug, Clone)]
pub struct JacobiBundleSample {
    pub s: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Parallel-transported completion E_1, …, E_{d−1} of γ̇ (γ̇ itself is
    /// the zeroth frame vector and is stored as `velocity`).
    pub frame: Vec<Vec<f64>>,
    /// J per field, coordinate components.
    pub j: Vec<Vec<f64>>,
    /// ∇_{γ̇}J per field, coordinate components.
    pub jp: Vec<Vec<f64>>,
}

/// Several Jacobi fields integrated jointly with their geodesic and a
/// parallel frame.
#[derive(Debug, Clone)]
pub struct JacobiBundle {
    pub dim: usize,
    pub samples: Vec<JacobiBundleSample>,
}

impl JacobiBundle {
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.samples
            .iter()
            .position(|smp| (smp.s - s).abs() <= CHECKPOINT_EPS * s.abs().max(1.0))
    }
}

/// One sample of a single Jacobi field.
#[derive(Debug, Clone)]
pub struct JacobiSample {
    pub s: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub j: Vec<f64>,
    pub jp: Vec<f64>,
}

/// A single Jacobi field along a geodesic; J and J′ = ∇_{γ̇}J are coordinate
/// vectors per sample.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    pub samples: Vec<JacobiSample>,
}

/// Builds the g-orthonormal frame [v, E_1, …, E_{d−1}] at a point by
/// pivoted modified Gram–Schmidt over the coordinate basis.
fn complete_frame(g: &Mat<f64>, v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut frame: Vec<Vec<f64>> = vec![v.to_vec()];
    let mut pool: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    while frame.len() < d {
        let newest = frame.last().expect("frame nonempty").clone();
        for u in pool.iter_mut() {
            let c = g_inner(g, u, &newest);
            for (uk, nk) in u.iter_mut().zip(&newest) {
                *uk -= c * nk;
            }
        }
        let (bi, bn) = pool
            .iter()
            .enumerate()
            .map(|(i, u)| (i, g_inner(g, u, u)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("norms are finite"))
            .expect("pool larger than remaining frame slots");
        assert!(bn > 1e-18, "coordinate basis completes the frame");
        let u = pool.swap_remove(bi);
        let inv = 1.0 / bn.sqrt();
        frame.push(u.iter().map(|x| x * inv).collect());
    }
    frame
}

/// Integrates `inits.len()` Jacobi fields (given as (J(0), ∇J(0)) coordinate
/// pairs) jointly with the geodesic from `p` along unit `v`, in
/// parallel-transported frame components.
pub fn jacobi_bundle(
    model: &ContactModel,
    p: &[f64],
    v: &[f64],
    length: f64,
    inits: &[(Vec<f64>, Vec<f64>)],
    checkpoints: &[f64],
) -> Result<JacobiBundle> {
    check_unit(model, p, v)?;
    let d = model.dim();
    let nf = inits.len();
    let metric = &model.metric;
    let g0 = metric.eval_values(p)?;
    let frame0 = complete_frame(&g0, v);

    // State layout: x | v | E_1..E_{d−1} | per field (a, a′) in frame
    // components (index 0 along γ̇, 1.. along E_m).
    let base = (d + 1) * d;
    let mut y0 = vec![0.0; base + 2 * nf * d];
    y0[..d].copy_from_slice(p);
    y0[d..2 * d].copy_from_slice(v);
    for m in 0..d - 1 {
        y0[(2 + m) * d..(3 + m) * d].copy_from_slice(&frame0[m + 1]);
    }
    for (f, (j0, j0p)) in inits.iter().enumerate() {
        let off = base + 2 * f * d;
        for a in 0..d {
            y0[off + a] = g_inner(&g0, j0, &frame0[a]);
            y0[off + d + a] = g_inner(&g0, j0p, &frame0[a]);
        }
    }

    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let pg = point_geometry(metric, &y[..d])?;
        let v = &y[d..2 * d];
        dy[..d].copy_from_slice(v);
        for k in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += pg.gamma(k, i, j) * v[i] * v[j];
                }
            }
            dy[d + k] = -acc;
        }
        for m in 0..d - 1 {
            let off = (2 + m) * d;
            let e = &y[off..off + d];
            for k in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += pg.gamma(k, i, j) * v[i] * e[j];
                    }
                }
                dy[off + k] = -acc;
            }
        }
        // R_ab = ⟨R(E_b, γ̇)γ̇, E_a⟩; the row and column along γ̇ vanish by
        // the curvature symmetries, so only the transported part is built.
        let mut r_ab = vec![0.0; (d - 1) * (d - 1)];
        for b in 0..d - 1 {
            let eb = &y[(2 + b) * d..(3 + b) * d];
            let w = pg.curvature_apply(eb, v, v);
            for a in 0..d - 1 {
                let ea = &y[(2 + a) * d..(3 + a) * d];
                r_ab[a * (d - 1) + b] = pg.inner(&w, ea);
            }
        }
        for f in 0..nf {
            let off = base + 2 * f * d;
            let a_comp = &y[off..off + d];
            dy[off..off + d].copy_from_slice(&y[off + d..off + 2 * d]);
            dy[off + d] = 0.0; // tangential component: a″_0 = 0
            for m in 0..d - 1 {
                let mut acc = 0.0;
                for b in 0..d - 1 {
                    acc += r_ab[m * (d - 1) + b] * a_comp[b + 1];
                }
                dy[off + d + 1 + m] = -acc;
            }
        }
        Ok(())
    };

    let domain = |y: &[f64]| model.chart.contains(&y[..d]);
    let opts = OdeOptions { max_step: length * MAX_STEP_FRACTION, ..OdeOptions::default() };
    let ode = integrate(&rhs, &y0, length, checkpoints, &domain, &opts)?;

    let samples = ode
        .samples
        .iter()
        .map(|smp| {
            let velocity = smp.y[d..2 * d].to_vec();
            let frame: Vec<Vec<f64>> =
                (0..d - 1).map(|m| smp.y[(2 + m) * d..(3 + m) * d].to_vec()).collect();
            let assemble = |coeffs: &[f64]| -> Vec<f64> {
                let mut out = vec![0.0; d];
                for k in 0..d {
                    out[k] = coeffs[0] * velocity[k];
                    for m in 0..d - 1 {
                        out[k] += coeffs[m + 1] * frame[m][k];
                    }
                }
                out
            };
            let mut j = Vec::with_capacity(nf);
            let mut jp = Vec::with_capacity(nf);
            for f in 0..nf {
                let off = base + 2 * f * d;
                j.push(assemble(&smp.y[off..off + d]));
                jp.push(assemble(&smp.y[off + d..off + 2 * d]));
            }
            JacobiBundleSample { s: smp.s, point: smp.y[..d].to_vec(), velocity, frame, j, jp }
        })
        .collect();
    Ok(JacobiBundle { dim: d, samples })
}

/// Integrates one Jacobi field along the geodesic recorded in `path`
/// (re-solving the joint system from the same initial data and checkpoints).
pub fn jacobi_along(
    model: &ContactModel,
    path: &GeodesicPath,
    j0: &[f64],
    j0p: &[f64],
) -> Result<JacobiSolution> {
    let bundle = jacobi_bundle(
        model,
        &path.start_point,
        &path.start_velocity,
        path.length,
        &[(j0.to_vec(), j0p.to_vec())],
        &path.checkpoints,
    )?;
    let samples = bundle
        .samples
        .into_iter()
        .map(|smp| JacobiSample {
            s: smp.s,
            point: smp.point,
            velocity: smp.velocity,
            j: smp.j.into_iter().next().expect("one field"),
            jp: smp.jp.into_iter().next().expect("one field"),
        })
        .collect();
    Ok(JacobiSolution { samples })
}

// ─── Exponential disks ───────────────────────────────────────────────────

/// Probe grid: radial directions × radii per direction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Grid {
    pub n_dirs: usize,
    pub n_radii: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { n_dirs: 32, n_radii: 16 }
    }
}

impl Grid {
    /// Parses "DxS" (e.g. "64x32") into D directions × S radii.
    pub fn parse(text: &str) -> Result<Grid> {
        let lower = text.trim().to_ascii_lowercase();
        let bad = |reason: &str| Error::InvalidInputs {
            reason: format!("grid `{text}`: {reason} (expected e.g. \"32x16\")"),
        };
        let (a, b) = lower.split_once('x').ok_or_else(|| bad("missing `x` separator"))?;
        let n_dirs: usize = a.trim().parse().map_err(|_| bad("directions not a number"))?;
        let n_radii: usize = b.trim().parse().map_err(|_| bad("radii not a number"))?;
        if n_dirs == 0 || n_radii == 0 {
            return Err(bad("both counts must be positive"));
        }
        Ok(Grid { n_dirs, n_radii })
    }
}

/// One sampled point of an exponential disk.
#[derive(Debug, Clone)]
pub struct DiskSample {
    pub dir_index: usize,
    pub s: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Pushed-forward tangent frame X_i(s) = J_i(s)/s.
    pub frame: Vec<Vec<f64>>,
    /// J_i′(s) = ∇_{γ̇}J_i per start-basis vector.
    pub jprime: Vec<Vec<f64>>,
    /// Metric-unit normal to the frame span, oriented by continuity from
    /// the Reeb vector at the disk center.
    pub n_d: Vec<f64>,
    pub g: Mat<f64>,
    pub dalpha: Mat<f64>,
    pub reeb: Vec<f64>,
}

/// The sampled exponential disk exp_p(ξ_p ∩ B_r) with its pushed frames.
#[derive(Debug, Clone)]
pub struct DiskFrame {
    pub center: Vec<f64>,
    pub radius: f64,
    pub grid: Grid,
    /// The ξ_p start basis e_1..e_n, φe_1..φe_n (g-orthonormal, symplectic
    /// for the normalized dα).
    pub basis: Vec<Vec<f64>>,
    pub theta_prime: f64,
    /// Direction-major, radius-minor.
    pub samples: Vec<DiskSample>,
}

/// Radius ceiling for disk construction: half the injectivity radius capped
/// by the convexity radius when the model records one.
fn disk_gate(model: &ContactModel) -> f64 {
    let mut lim = f64::INFINITY;
    if let Some(inj) = model.inj {
        lim = inj / 2.0;
    }
    if let Some(conv) = model.conv {
        lim = lim.min(conv);
    }
    lim
}

/// The analytic transversality radius 2/(√(2A+B²)+B), capped by half the
/// injectivity radius when known.
fn r_perp_gate(model: &ContactModel, a: f64, b: f64) -> f64 {
    let denom = (2.0 * a + b * b).sqrt() + b;
    let mut lim = if denom > 0.0 { 2.0 / denom } else { f64::INFINITY };
    if let Some(inj) = model.inj {
        lim = lim.min(inj / 2.0);
    }
    lim
}

/// g-orthonormal basis of ξ_p adapted to φ: pairs (e_i, φe_i), listed as
/// [e_1..e_n, φe_1..φe_n].  For a compatible structure this is symplectic
/// for dα/θ′ with the pairs as conjugate coordinates.
fn adapted_basis(fr: &ContactFrame) -> Vec<Vec<f64>> {
    let n = fr.n;
    let g = &fr.g;
    let mut es: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut fs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let mut best: Option<Vec<f64>> = None;
        let mut best_norm = -1.0;
        for cand in &fr.xi_basis {
            let mut u = cand.clone();
            for c in &chosen {
                let t = g_inner(g, &u, c);
                for (uk, ck) in u.iter_mut().zip(c) {
                    *uk -= t * ck;
                }
            }
            let nn = g_inner(g, &u, &u);
            if nn > best_norm {
                best_norm = nn;
                best = Some(u);
            }
        }
        let mut e = best.expect("ξ basis is nonempty");
        assert!(best_norm > 1e-18, "ξ basis keeps spanning while pairing");
        let inv = 1.0 / best_norm.sqrt();
        for x in e.iter_mut() {
            *x *= inv;
        }
        let mut f = mat_apply(&fr.phi, &e);
        for c in chosen.iter().chain(std::iter::once(&e)) {
            let t = g_inner(g, &f, c);
            for (fk, ck) in f.iter_mut().zip(c) {
                *fk -= t * ck;
            }
        }
        let fn2 = g_inner(g, &f, &f);
        assert!(fn2 > 1e-18, "φ image completes the conjugate pair");
        let inv = 1.0 / fn2.sqrt();
        for x in f.iter_mut() {
            *x *= inv;
        }
        chosen.push(e.clone());
        chosen.push(f.clone());
        es.push(e);
        fs.push(f);
    }
    es.extend(fs);
    es
}

/// Radial directions in ξ_p: a deterministic circle through the adapted
/// pair in dimension 3, seeded uniform sphere directions above.
fn disk_directions(basis: &[Vec<f64>], grid: Grid, seed: u64) -> Vec<Vec<f64>> {
    let two_n = basis.len();
    let d = basis[0].len();
    let mut dirs = Vec::with_capacity(grid.n_dirs);
    if two_n == 2 {
        for k in 0..grid.n_dirs {
            let t = 2.0 * std::f64::consts::PI * k as f64 / grid.n_dirs as f64;
            let (c, s) = (t.cos(), t.sin());
            dirs.push((0..d).map(|i| c * basis[0][i] + s * basis[1][i]).collect());
        }
    } else {
        let mut rng = rng_for(seed ^ 0xD15C_D12E_C710_0001);
        for _ in 0..grid.n_dirs {
            let coeff = loop {
                let c = normal_vector(two_n, &mut rng);
                let n2: f64 = c.iter().map(|x| x * x).sum();
                if n2 > 1e-12 {
                    let inv = 1.0 / n2.sqrt();
                    break c.into_iter().map(|x| x * inv).collect::<Vec<f64>>();
                }
            };
            let mut v = vec![0.0; d];
            for (ci, bi) in coeff.iter().zip(basis) {
                for k in 0..d {
                    v[k] += ci * bi[k];
                }
            }
            dirs.push(v);
        }
    }
    dirs
}

/// Metric-unit normal to the span of `tang` at a point with metric `g`,
/// sign-matched against `prev`.
fn unit_normal(g: &Mat<f64>, tang: &[Vec<f64>], prev: &[f64]) -> Result<Vec<f64>> {
    let d = g.rows;
    let m = Mat::from_fn(d, d, |row, col| {
        if row < tang.len() {
            (0..d).map(|j| g.at(col, j) * tang[row][j]).sum()
        } else {
            0.0
        }
    });
    let ns = nullspace(&m, NULLSPACE_REL_TOL);
    let mut kern = ns.kernel.ok_or(Error::DegeneratePlane { gram: ns.gap })?;
    let nn = g_inner(g, &kern, &kern);
    if nn <= 0.0 {
        return Err(Error::DegeneratePlane { gram: ns.gap });
    }
    let inv = 1.0 / nn.sqrt();
    for x in kern.iter_mut() {
        *x *= inv;
    }
    if g_inner(g, &kern, prev) < 0.0 {
        for x in kern.iter_mut() {
            *x = -*x;
        }
    }
    Ok(kern)
}

fn direction_run(
    model: &ContactModel,
    p: &[f64],
    dir: &[f64],
    radius: f64,
    radii: &[f64],
    basis: &[Vec<f64>],
    dir_index: usize,
    reeb_center: &[f64],
) -> Result<Vec<DiskSample>> {
    let d = model.dim();
    let inits: Vec<(Vec<f64>, Vec<f64>)> =
        basis.iter().map(|b| (vec![0.0; d], b.clone())).collect();
    let bundle = jacobi_bundle(model, p, dir, radius, &inits, radii)?;
    let mut out = Vec::with_capacity(radii.len());
    let mut prev_n = reeb_center.to_vec();
    for &s in radii {
        let idx = bundle.index_of(s).expect("radius checkpoints land on samples");
        let smp = &bundle.samples[idx];
        let g = model.metric.eval_values(&smp.point)?;
        let aj = model.alpha_jets(&smp.point, 1)?;
        let dalpha = Mat::from_fn(d, d, |i, j| aj[j].d1(i) - aj[i].d1(j));
        let reeb = reeb_at(model, &smp.point)?;
        let frame: Vec<Vec<f64>> =
            smp.j.iter().map(|ji| ji.iter().map(|x| x / s).collect()).collect();
        let n_d = unit_normal(&g, &frame, &prev_n)?;
        prev_n = n_d.clone();
        out.push(DiskSample {
            dir_index,
            s,
            point: smp.point.clone(),
            velocity: smp.velocity.clone(),
            frame,
            jprime: smp.jp.clone(),
            n_d,
            g,
            dalpha,
            reeb,
        });
    }
    Ok(out)
}

/// Builds the exponential disk of ξ_p at radius `r` on the given grid.
/// Directions integrate independently (in parallel); the sample order is
/// deterministic: direction-major in grid order, radii increasing.
pub fn disk_frame(
    model: &ContactModel,
    p: &[f64],
    r: f64,
    grid: Grid,
    seed: u64,
) -> Result<DiskFrame> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange { what: "disk radius", value: r, range: "(0, ∞)".into() });
    }
    let limit = disk_gate(model);
    if r >= limit {
        return Err(Error::RadiusTooLarge { r, what: "disk construction", limit });
    }
    let fr = frame_at(model, p)?;
    let basis = adapted_basis(&fr);
    let dirs = disk_directions(&basis, grid, seed);
    let radii: Vec<f64> =
        (1..=grid.n_radii).map(|j| r * j as f64 / grid.n_radii as f64).collect();
    let per_dir: Result<Vec<Vec<DiskSample>>> = dirs
        .par_iter()
        .enumerate()
        .map(|(k, dir)| direction_run(model, p, dir, r, &radii, &basis, k, &fr.reeb))
        .collect();
    let samples: Vec<DiskSample> = per_dir?.into_iter().flatten().collect();
    Ok(DiskFrame {
        center: p.to_vec(),
        radius: r,
        grid,
        basis,
        theta_prime: fr.theta_prime,
        samples,
    })
}

// ─── Probe reports ───────────────────────────────────────────────────────

/// Location of the worst margin: probe direction index and arclength.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Worst {
    pub direction: usize,
    pub s: f64,
}

/// One per-sample margin row (the CSV export surface).
#[derive(Debug, Clone, Copy)]
pub struct CsvRow {
    pub dir_index: usize,
    pub s: f64,
    pub margin: f64,
}

/// Outcome of one probe run.  `pass` holds iff `margin_min` stays above
/// −[`PROBE_MARGIN_TOL`] (and, for the taming probe, the ratio stays
/// positive).
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub probe_id: String,
    pub radius: f64,
    pub samples: usize,
    pub margin_min: f64,
    pub worst: Worst,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure_defect: Option<f64>,
    /// Per-sample margins for CSV export; not part of the JSON report.
    #[serde(skip)]
    pub rows: Vec<CsvRow>,
}

fn fold_rows(probe_id: &str, radius: f64, rows: Vec<CsvRow>) -> ProbeReport {
    assert!(!rows.is_empty(), "probes always sample at least one point");
    let mut margin_min = f64::INFINITY;
    let mut worst = Worst { direction: 0, s: 0.0 };
    for row in &rows {
        if row.margin < margin_min {
            margin_min = row.margin;
            worst = Worst { direction: row.dir_index, s: row.s };
        }
    }
    ProbeReport {
        probe_id: probe_id.to_string(),
        radius,
        samples: rows.len(),
        margin_min,
        worst,
        pass: margin_min >= -PROBE_MARGIN_TOL,
        ratio_min: None,
        closure_defect: None,
        rows,
    }
}

fn twisting_rows(disk: &DiskFrame, a: f64, b: f64, dir_offset: usize) -> Vec<CsvRow> {
    disk.samples
        .iter()
        .map(|smp| {
            let rn = g_inner(&smp.g, &smp.reeb, &smp.n_d);
            let curve = 1.0 - b * smp.s - 0.5 * a * smp.s * smp.s;
            CsvRow { dir_index: dir_offset + smp.dir_index, s: smp.s, margin: rn - curve }
        })
        .collect()
}

/// Checks ⟨R_α, n_D⟩ ≥ 1 − Bs − ½As² over the exponential disk at `p`.
pub fn twisting_probe(
    model: &ContactModel,
    p: &[f64],
    r: f64,
    grid: Grid,
    a: f64,
    b: f64,
    seed: u64,
) -> Result<ProbeReport> {
    let limit = r_perp_gate(model, a, b);
    if r >= limit {
        return Err(Error::RadiusTooLarge { r, what: "twisting probe", limit });
    }
    let disk = disk_frame(model, p, r, grid, seed)?;
    Ok(fold_rows("twisting", r, twisting_rows(&disk, a, b, 0)))
}

/// Checks the pushed-frame growth bounds ‖X‖ ≤ H₁(s), ‖∇_{γ̇}X‖ ≤ H₂(s) and
/// the normal-derivative bound |⟨n_D, J′⟩| ≤ (4/3)·sec_abs·s.
pub fn jacobi_bound_probe(
    model: &ContactModel,
    p: &[f64],
    r: f64,
    grid: Grid,
    kappa: f64,
    sec_abs: f64,
    seed: u64,
) -> Result<ProbeReport> {
    let disk = disk_frame(model, p, r, grid, seed)?;
    // The radii are shared across directions; evaluate the comparison
    // functions once per radius.
    let radii: Vec<f64> =
        (1..=grid.n_radii).map(|j| r * j as f64 / grid.n_radii as f64).collect();
    let mut h1s = Vec::with_capacity(radii.len());
    let mut h2s = Vec::with_capacity(radii.len());
    for &s in &radii {
        h1s.push(h1_of_r(s, kappa)?);
        h2s.push(h2_of_r(s, kappa, sec_abs)?);
    }
    let rows = disk
        .samples
        .iter()
        .map(|smp| {
            let j_radius = (smp.s / r * grid.n_radii as f64).round() as usize - 1;
            let (h1, h2) = (h1s[j_radius], h2s[j_radius]);
            let mut margin = f64::INFINITY;
            for (i, x) in smp.frame.iter().enumerate() {
                let m1 = h1 - g_norm(&smp.g, x);
                // X′ = J′/s − J/s² = (J′ − X)/s.
                let xp: Vec<f64> =
                    smp.jprime[i].iter().zip(x).map(|(jp, xi)| (jp - xi) / smp.s).collect();
                let m2 = h2 - g_norm(&smp.g, &xp);
                let m3 = (4.0 / 3.0) * sec_abs * smp.s
                    - g_inner(&smp.g, &smp.n_d, &smp.jprime[i]).abs();
                margin = margin.min(m1).min(m2).min(m3);
            }
            CsvRow { dir_index: smp.dir_index, s: smp.s, margin }
        })
        .collect();
    Ok(fold_rows("jacobi", r, rows))
}

/// Checks that the normalized dα stays close to the standard symplectic
/// pairing on the pushed-forward adapted frame: diagonal values above
/// 1 − H̄s, off-diagonal values below H̄s in absolute value, and the taming
/// ratio (1/θ′)dα(u, J_*u)/N(u) positive on random frame combinations.
pub fn taming_probe(
    model: &ContactModel,
    p: &[f64],
    r: f64,
    grid: Grid,
    hbar: f64,
    theta_prime: f64,
    seed: u64,
) -> Result<ProbeReport> {
    let disk = disk_frame(model, p, r, grid, seed)?;
    let n = model.n;
    let mut rows = Vec::with_capacity(disk.samples.len());
    let mut ratio_min = f64::INFINITY;
    for chunk in disk.samples.chunks(grid.n_radii) {
        let dir = chunk[0].dir_index;
        // Independent per-direction stream: the draw is deterministic
        // whatever order directions were integrated in.
        let mut rng =
            rng_for(seed ^ 0x7A31_A6E5 ^ (dir as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for smp in chunk {
            let f_of = |a_idx: usize, b_idx: usize| {
                form_apply(&smp.dalpha, &smp.frame[a_idx], &smp.frame[b_idx]) / theta_prime
            };
            let mut margin = f64::INFINITY;
            for i in 0..n {
                margin = margin.min(f_of(i, n + i) - (1.0 - hbar * smp.s));
            }
            for a in 0..2 * n {
                for b in a + 1..2 * n {
                    if b == a + n {
                        continue;
                    }
                    margin = margin.min(hbar * smp.s - f_of(a, b).abs());
                }
            }
            rows.push(CsvRow { dir_index: smp.dir_index, s: smp.s, margin });
            for _ in 0..TAMING_VECTORS_PER_SAMPLE {
                let coeff = normal_vector(2 * n, &mut rng);
                let nsq: f64 = coeff.iter().map(|c| c * c).sum();
                if nsq < 1e-12 {
                    continue;
                }
                let d = model.dim();
                let mut u = vec![0.0; d];
                let mut ju = vec![0.0; d];
                for i in 0..n {
                    for k in 0..d {
                        // u = Σ aᵢXᵢ + bᵢYᵢ, J_*u = Σ aᵢYᵢ − bᵢXᵢ.
                        u[k] += coeff[i] * smp.frame[i][k] + coeff[n + i] * smp.frame[n + i][k];
                        ju[k] += coeff[i] * smp.frame[n + i][k] - coeff[n + i] * smp.frame[i][k];
                    }
                }
                let ratio = form_apply(&smp.dalpha, &u, &ju) / (theta_prime * nsq);
                ratio_min = ratio_min.min(ratio);
            }
        }
    }
    let mut report = fold_rows("taming", r, rows);
    report.ratio_min = Some(ratio_min);
    report.pass = report.pass && ratio_min > 0.0;
    Ok(report)
}

/// Checks the distance-Hessian comparison ⟨J′, J⟩ ≥ ct_K(s)‖J‖² along the
/// disk's radial Jacobi fields (equality at constant curvature).
pub fn hessian_distance_probe(
    model: &ContactModel,
    p: &[f64],
    r: f64,
    grid: Grid,
    k_upper: f64,
    seed: u64,
) -> Result<ProbeReport> {
    let disk = disk_frame(model, p, r, grid, seed)?;
    let mut rows = Vec::with_capacity(disk.samples.len());
    for smp in &disk.samples {
        let ck = ct(k_upper, smp.s)?;
        let vsq = g_inner(&smp.g, &smp.velocity, &smp.velocity);
        let mut margin = f64::INFINITY;
        for (i, x) in smp.frame.iter().enumerate() {
            // J = s·X, with the radial component removed: the distance
            // Hessian acts on the geodesic sphere, so the comparison (and
            // its constant-curvature equality) concerns the part of the
            // Jacobi field normal to γ̇.  Tangential and normal parts of a
            // Jacobi field evolve independently, so the pointwise
            // g-projection is exact.
            let j_full: Vec<f64> = x.iter().map(|xi| xi * smp.s).collect();
            let cj = g_inner(&smp.g, &j_full, &smp.velocity) / vsq;
            let cjp = g_inner(&smp.g, &smp.jprime[i], &smp.velocity) / vsq;
            let j: Vec<f64> =
                j_full.iter().zip(&smp.velocity).map(|(a, b)| a - cj * b).collect();
            let jp: Vec<f64> = smp.jprime[i]
                .iter()
                .zip(&smp.velocity)
                .map(|(a, b)| a - cjp * b)
                .collect();
            let m = g_inner(&smp.g, &jp, &j) - ck * g_inner(&smp.g, &j, &j);
            margin = margin.min(m);
        }
        rows.push(CsvRow { dir_index: smp.dir_index, s: smp.s, margin });
    }
    Ok(fold_rows("hessian", r, rows))
}

/// Integrates a closed Reeb orbit and checks disk transversality
/// (the criterion-5 margin) along normal disks at sampled orbit points.
pub fn reeb_tube_probe(
    model: &ContactModel,
    orbit: &OrbitSeed,
    r: f64,
    grid: Grid,
    a: f64,
    b: f64,
    tube_embed_radius: f64,
    seed: u64,
) -> Result<ProbeReport> {
    if r >= tube_embed_radius {
        return Err(Error::RadiusTooLarge { r, what: "tube probe", limit: tube_embed_radius });
    }
    let r_perp = r_perp_gate(model, a, b);
    if r >= r_perp {
        return Err(Error::RadiusTooLarge { r, what: "tube probe", limit: r_perp });
    }
    let period = orbit.period.ok_or_else(|| Error::InvalidInputs {
        reason: format!("orbit at {:?} has no recorded period", orbit.point),
    })?;
    if !(period > 0.0) {
        return Err(Error::InvalidInputs { reason: format!("orbit period {period} not positive") });
    }
    let n_pts = grid.n_dirs;
    let checkpoints: Vec<f64> =
        (1..n_pts).map(|k| period * k as f64 / n_pts as f64).collect();
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let reeb = reeb_at(model, y)?;
        dy.copy_from_slice(&reeb);
        Ok(())
    };
    let domain = |y: &[f64]| model.chart.contains(y);
    let opts =
        OdeOptions { max_step: period * ORBIT_MAX_STEP_FRACTION, ..OdeOptions::default() };
    let path = integrate(&rhs, &orbit.point, period, &checkpoints, &domain, &opts)?;
    let g0 = model.metric.eval_values(&orbit.point)?;
    let diff: Vec<f64> =
        path.end().y.iter().zip(&orbit.point).map(|(a, b)| a - b).collect();
    let defect = g_norm(&g0, &diff);
    if defect > ORBIT_CLOSURE_TOL {
        return Err(Error::OrbitNotClosed { defect, period });
    }
    let mut rows = Vec::new();
    for k in 0..n_pts {
        let center = if k == 0 {
            orbit.point.clone()
        } else {
            let t_k = period * k as f64 / n_pts as f64;
            let idx = path.index_of(t_k).expect("orbit checkpoints land on samples");
            path.samples[idx].y.clone()
        };
        let disk =
            disk_frame(model, &center, r, grid, seed ^ (k as u64).wrapping_mul(0xA5A5_5A5A_1235))?;
        // Flattened direction index: orbit point k, disk direction j maps
        // to k·n_dirs + j so the worst sample is locatable.
        rows.extend(twisting_rows(&disk, a, b, k * grid.n_dirs));
    }
    let mut report = fold_rows("tube", r, rows);
    report.closure_defect = Some(defect);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::{Chart, MetricField};
    use crate::models::get_model;
    use crate::sample::unit_vector;

    /// Contact form of the nilpotent 3-group paired with the flat metric:
    /// geodesics are straight lines while ξ and R stay available for disk
    /// machinery.  (Not a compatible pair — irrelevant for these tests.)
    fn flat_model() -> ContactModel {
        let chart = Chart::new(&["x", "y", "z"], Some(vec![(-10.0, 10.0); 3]));
        let coords: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let alpha =
            ["-y/2", "0", "1/2"].iter().map(|s| parse(s, &coords).unwrap()).collect();
        let metric = MetricField::parse_upper(
            &chart,
            &[&["1", "0", "0"], &["1", "0"], &["1"]],
        )
        .unwrap();
        ContactModel {
            name: "flat-test".into(),
            chart,
            alpha,
            metric,
            j_field: None,
            n: 1,
            inj: Some(20.0),
            conv: None,
            orbits: vec![],
        }
    }

    /// Poincaré-ball patch: g = 4δ/(1−|u|²)², curvature −1.
    fn hyperbolic_model() -> ContactModel {
        let chart = Chart::new(&["x", "y", "z"], Some(vec![(-0.95, 0.95); 3]));
        let coords: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let alpha =
            ["-y/2", "0", "1/2"].iter().map(|s| parse(s, &coords).unwrap()).collect();
        let e = "4*(1/(1-x^2-y^2-z^2))^2";
        let metric = MetricField::parse_upper(
            &chart,
            &[&[e, "0", "0"], &[e, "0"], &[e]],
        )
        .unwrap();
        ContactModel {
            name: "hyperbolic-patch".into(),
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

    #[test]
    fn flat_geodesics_are_straight_lines_exactly() {
        let model = flat_model();
        let p = [0.3, -0.5, 0.2];
        let v = [0.6, 0.8, 0.0];
        for sign in [1.0, -1.0] {
            let vs: Vec<f64> = v.iter().map(|x| x * sign).collect();
            let path = integrate_geodesic(&model, &p, &vs, 2.0).unwrap();
            for smp in path.samples() {
                for k in 0..3 {
                    let expect = p[k] + smp.s * vs[k];
                    assert!((smp.point[k] - expect).abs() < 1e-12);
                    assert!((smp.velocity[k] - vs[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reeb_flow_on_the_nilpotent_group_is_a_geodesic() {
        let model = get_model("heisenberg3").unwrap();
        let p = [0.3, -0.2, 0.1];
        let reeb = reeb_at(&model.model, &p).unwrap();
        let path = integrate_geodesic(&model.model, &p, &reeb, 2.0).unwrap();
        for smp in path.samples() {
            for k in 0..3 {
                let expect = p[k] + smp.s * reeb[k];
                assert!(
                    (smp.point[k] - expect).abs() < 1e-8,
                    "flow-line deviation at s = {}",
                    smp.s
                );
            }
        }
    }

    #[test]
    fn round_sphere_ray_matches_the_tangent_closed_form() {
        let model = &get_model("round-s3").unwrap().model;
        let origin = [0.0; 3];
        let v = [0.5, 0.0, 0.0]; // unit: g(0) = 4δ
        let checkpoints = [0.5, 1.0, 1.5, 2.0, 2.5];
        let path =
            geodesic_with_checkpoints(model, &origin, &v, 2.6, &checkpoints).unwrap();
        for &s in &checkpoints {
            let idx = path.index_of(s).unwrap();
            let smp = &path.samples()[idx];
            // Stereographic radial geodesics: |u|(s) = tan(s/2).
            let expect = (s / 2.0).tan();
            assert!(
                (smp.point[0] - expect).abs() < 1e-7,
                "radial position at s = {s}: {} vs {expect}",
                smp.point[0]
            );
            assert!(smp.point[1].abs() < 1e-9 && smp.point[2].abs() < 1e-9);
        }
        // Unit-speed drift along the whole path.
        for smp in path.samples() {
            let g = model.metric.eval_values(&smp.point).unwrap();
            assert!((g_norm(&g, &smp.velocity) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn round_sphere_ray_exits_the_chart_where_the_closed_form_says() {
        let model = &get_model("round-s3").unwrap().model;
        let v = [0.5, 0.0, 0.0];
        // tan(s/2) = 4 at s = 2·atan 4 ≈ 2.6516; the box is [−4, 4]³.
        let exit = 2.0 * 4.0_f64.atan();
        match integrate_geodesic(model, &[0.0; 3], &v, 3.0) {
            Err(Error::LeftChartDomain { s }) => {
                assert!(s >= exit - 1e-9 && s < exit + 0.07, "exit reported at {s}");
            }
            other => panic!("expected chart exit, got {other:?}"),
        }
    }

    #[test]
    fn flat_jacobi_fields_grow_linearly() {
        let model = flat_model();
        let path = geodesic_with_checkpoints(
            &model,
            &[0.0; 3],
            &[1.0, 0.0, 0.0],
            2.0,
            &[0.5, 1.0, 1.5],
        )
        .unwrap();
        let w = [0.0, 1.0, 0.0];
        let sol = jacobi_along(&model, &path, &[0.0; 3], &w).unwrap();
        for smp in &sol.samples {
            for k in 0..3 {
                assert!((smp.j[k] - smp.s * w[k]).abs() < 1e-9);
                assert!((smp.jp[k] - w[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn round_sphere_jacobi_norm_is_the_sine() {
        let model = &get_model("round-s3").unwrap().model;
        let checkpoints: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let path = geodesic_with_checkpoints(
            model,
            &[0.0; 3],
            &[0.5, 0.0, 0.0],
            1.0,
            &checkpoints,
        )
        .unwrap();
        let sol = jacobi_along(model, &path, &[0.0; 3], &[0.0, 0.5, 0.0]).unwrap();
        for &s in &checkpoints {
            let idx = sol
                .samples
                .iter()
                .position(|smp| (smp.s - s).abs() < 1e-12)
                .unwrap();
            let smp = &sol.samples[idx];
            let g = model.metric.eval_values(&smp.point).unwrap();
            assert!(
                (g_norm(&g, &smp.j) - s.sin()).abs() < 1e-7,
                "‖J‖ vs sin at s = {s}"
            );
        }
    }

    #[test]
    fn transported_frames_stay_orthonormal() {
        let model = &get_model("round-s3").unwrap().model;
        let bundle = jacobi_bundle(
            model,
            &[0.1, -0.2, 0.05],
            &{
                let g = model.metric.eval_values(&[0.1, -0.2, 0.05]).unwrap();
                let raw = [0.3, 0.7, -0.2];
                let inv = 1.0 / g_norm(&g, &raw);
                raw.iter().map(|x| x * inv).collect::<Vec<f64>>()
            },
            1.0,
            &[(vec![0.0; 3], vec![0.0, 0.0, 0.25])],
            &[1.0],
        )
        .unwrap();
        let smp = bundle.samples.last().unwrap();
        let g = model.metric.eval_values(&smp.point).unwrap();
        let mut full = vec![smp.velocity.clone()];
        full.extend(smp.frame.iter().cloned());
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (g_inner(&g, &full[a], &full[b]) - want).abs() < 1e-8,
                    "frame Gram drift at ({a},{b})"
                );
            }
        }
    }

    #[test]
    fn hyperbolic_jacobi_norm_is_the_hyperbolic_sine() {
        let model = hyperbolic_model();
        let checkpoints: Vec<f64> = (1..=6).map(|k| k as f64 / 4.0).collect();
        let path = geodesic_with_checkpoints(
            &model,
            &[0.0; 3],
            &[0.5, 0.0, 0.0],
            1.5,
            &checkpoints,
        )
        .unwrap();
        let sol = jacobi_along(&model, &path, &[0.0; 3], &[0.0, 0.5, 0.0]).unwrap();
        for &s in &checkpoints {
            let idx = sol
                .samples
                .iter()
                .position(|smp| (smp.s - s).abs() < 1e-12)
                .unwrap();
            let smp = &sol.samples[idx];
            let g = model.metric.eval_values(&smp.point).unwrap();
            assert!(
                (g_norm(&g, &smp.j) - s.sinh()).abs() < 1e-6,
                "‖J‖ vs sinh at s = {s}"
            );
        }
    }

    #[test]
    fn gauss_lemma_orthogonality_along_random_rays() {
        for name in ["round-s3", "heisenberg3"] {
            let model = &get_model(name).unwrap().model;
            let mut rng = rng_for(0x6A05);
            for trial in 0..4 {
                let p = [0.1 * trial as f64, -0.05, 0.02];
                let g = model.metric.eval_values(&p).unwrap();
                let raw = unit_vector(3, &mut rng);
                let inv = 1.0 / g_norm(&g, &raw);
                let v: Vec<f64> = raw.iter().map(|x| x * inv).collect();
                // J′(0) g-orthogonal to γ̇(0).
                let mut w = unit_vector(3, &mut rng);
                let c = g_inner(&g, &w, &v);
                for (wk, vk) in w.iter_mut().zip(&v) {
                    *wk -= c * vk;
                }
                let path =
                    geodesic_with_checkpoints(model, &p, &v, 1.0, &[0.3, 0.6, 0.9]).unwrap();
                let sol = jacobi_along(model, &path, &[0.0; 3], &w).unwrap();
                for smp in &sol.samples {
                    let gs = model.metric.eval_values(&smp.point).unwrap();
                    assert!(
                        g_inner(&gs, &smp.j, &smp.velocity).abs() < 1e-8,
                        "{name}: ⟨J, γ′⟩ at s = {}",
                        smp.s
                    );
                }
            }
        }
    }

    #[test]
    fn disk_normal_matches_the_reeb_vector_at_the_center_limit() {
        // Flat model: the disk is the Euclidean xy-disk, n_D ≡ ∂_z.
        let flat = flat_model();
        let disk = disk_frame(&flat, &[0.0; 3], 0.5, Grid { n_dirs: 6, n_radii: 3 }, 0).unwrap();
        for smp in &disk.samples {
            assert!((smp.n_d[0]).abs() < 1e-9 && (smp.n_d[1]).abs() < 1e-9);
            assert!((smp.n_d[2] - 1.0).abs() < 1e-9, "flat normal drifted");
            for (x, b) in smp.frame.iter().zip(&disk.basis) {
                for k in 0..3 {
                    assert!((x[k] - b[k]).abs() < 1e-9, "flat frame is constant");
                }
            }
        }
        // Round sphere: ⟨R, n_D⟩ → 1 as s → 0.
        let model = &get_model("round-s3").unwrap().model;
        let disk = disk_frame(model, &[0.0; 3], 0.1, Grid { n_dirs: 4, n_radii: 4 }, 0).unwrap();
        for smp in disk.samples.iter().filter(|s| s.s < 0.03) {
            let rn = g_inner(&smp.g, &smp.reeb, &smp.n_d);
            assert!(rn > 0.999, "⟨R, n_D⟩ = {rn} at s = {}", smp.s);
        }
    }

    #[test]
    fn round_sphere_disk_frame_stays_well_conditioned() {
        let model = &get_model("round-s3").unwrap().model;
        let disk = disk_frame(model, &[0.0; 3], 0.6, Grid { n_dirs: 16, n_radii: 8 }, 0).unwrap();
        for smp in &disk.samples {
            let n = smp.frame.len();
            let gram = Mat::from_fn(n, n, |a, b| g_inner(&smp.g, &smp.frame[a], &smp.frame[b]));
            let eigs = crate::linalg::sym_eigenvalues(&gram);
            let (lo, hi) = (eigs[0].min(eigs[n - 1]), eigs[0].max(eigs[n - 1]));
            assert!(lo > 0.0 && hi / lo < 10.0, "condition {} at s = {}", hi / lo, smp.s);
        }
    }

    #[test]
    fn grid_parsing_accepts_the_dims_format() {
        let g = Grid::parse("64x32").unwrap();
        assert_eq!((g.n_dirs, g.n_radii), (64, 32));
        let g = Grid::parse(" 8X4 ").unwrap();
        assert_eq!((g.n_dirs, g.n_radii), (8, 4));
        assert!(Grid::parse("x").is_err());
        assert!(Grid::parse("0x4").is_err());
        assert!(Grid::parse("axb").is_err());
        assert!(Grid::parse("32").is_err());
    }

    #[test]
    fn twisting_probe_passes_on_the_round_sphere_and_fails_without_the_linear_term() {
        let model = &get_model("round-s3").unwrap().model;
        let grid = Grid { n_dirs: 16, n_radii: 8 };
        // Constants for the round sphere: A = 4/3, B = 1.
        let report = twisting_probe(model, &[0.0; 3], 0.5, grid, 4.0 / 3.0, 1.0, 0).unwrap();
        assert!(report.pass, "margin_min = {}", report.margin_min);
        assert!(report.margin_min >= -1e-6);
        assert_eq!(report.samples, 16 * 8);
        // On the round sphere ⟨R, n_D⟩ = cos s exactly (the disk is a great
        // 2-sphere with constant chart normal), so even B = 0 leaves a
        // positive margin cos s − 1 + (2/3)s² = s²/6 + O(s⁴): the tilt is
        // second order with coefficient ½ < A/2.  The slack at the
        // innermost radius pins the closed form.
        let b_zero = twisting_probe(model, &[0.0; 3], 0.5, grid, 4.0 / 3.0, 0.0, 0).unwrap();
        let s_min = 0.5 / 8.0;
        assert!(
            (b_zero.margin_min - s_min * s_min / 6.0).abs() < 1e-5,
            "B = 0 margin {} vs s²/6 = {}",
            b_zero.margin_min,
            s_min * s_min / 6.0
        );
        // With no allowance at all the probe must detect the tilt: the
        // margin is cos s − 1 < 0 at every sample.
        let bare = twisting_probe(model, &[0.0; 3], 0.5, grid, 0.0, 0.0, 0).unwrap();
        assert!(!bare.pass, "A = B = 0 must fail, margin_min = {}", bare.margin_min);
        assert!((bare.margin_min - (0.5_f64.cos() - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn twisting_gate_rejects_radii_beyond_the_estimate() {
        let model = &get_model("round-s3").unwrap().model;
        match twisting_probe(model, &[0.0; 3], 2.0, Grid::default(), 4.0 / 3.0, 1.0, 0) {
            Err(Error::RadiusTooLarge { limit, .. }) => {
                assert!((limit - 0.6861406616345072).abs() < 1e-12);
            }
            other => panic!("expected gate rejection, got {other:?}"),
        }
    }

    #[test]
    fn jacobi_bound_probe_passes_on_flat_and_nilpotent_models() {
        let flat = flat_model();
        let report = jacobi_bound_probe(
            &flat,
            &[0.0; 3],
            0.5,
            Grid { n_dirs: 6, n_radii: 4 },
            0.0,
            0.0,
            0,
        )
        .unwrap();
        // Flat: ‖X‖ = 1 ≤ √2, X′ = 0 and ⟨n_D, J′⟩ = 0 — margins 0 exactly.
        assert!(report.pass, "flat margin_min = {}", report.margin_min);
        assert!(report.margin_min > -1e-9);
        let model = &get_model("heisenberg3").unwrap().model;
        let report = jacobi_bound_probe(
            model,
            &[0.1, -0.2, 0.3],
            0.3,
            Grid { n_dirs: 8, n_radii: 4 },
            -3.0,
            3.0,
            0,
        )
        .unwrap();
        assert!(report.pass, "nilpotent margin_min = {}", report.margin_min);
    }

    #[test]
    fn taming_is_exact_at_the_center_and_holds_nearby() {
        let spec = get_model("heisenberg3").unwrap();
        let model = &spec.model;
        let p = [0.2, -0.1, 0.4];
        let fr = frame_at(model, &p).unwrap();
        let basis = adapted_basis(&fr);
        // At the center the normalized pairing is the standard symplectic
        // matrix exactly.
        let f01 = form_apply(&fr.dalpha, &basis[0], &basis[1]) / fr.theta_prime;
        assert!((f01 - 1.0).abs() < 1e-12, "diagonal pairing at the center: {f01}");
        let inputs = crate::models::model_bound_inputs(spec).unwrap();
        let consts = crate::bounds::compute_constants(&inputs).unwrap();
        let report = taming_probe(
            model,
            &p,
            0.02,
            Grid { n_dirs: 8, n_radii: 4 },
            consts.hbar,
            2.0,
            0,
        )
        .unwrap();
        assert!(report.pass, "taming margin_min = {}", report.margin_min);
        let ratio = report.ratio_min.unwrap();
        assert!(ratio > 0.9, "taming ratio near the center: {ratio}");
    }

    #[test]
    fn hessian_probe_margin_vanishes_at_constant_curvature() {
        let flat = flat_model();
        let report = hessian_distance_probe(
            &flat,
            &[0.0; 3],
            0.5,
            Grid { n_dirs: 6, n_radii: 4 },
            0.0,
            0,
        )
        .unwrap();
        assert!(report.margin_min.abs() < 1e-9, "flat margin: {}", report.margin_min);
        let model = &get_model("round-s3").unwrap().model;
        let report = hessian_distance_probe(
            model,
            &[0.0; 3],
            0.5,
            Grid { n_dirs: 8, n_radii: 4 },
            1.0,
            0,
        )
        .unwrap();
        // Equality at constant curvature: every sample, both sides.
        let band = report.rows.iter().map(|r| r.margin.abs()).fold(0.0_f64, f64::max);
        assert!(band < 1e-7, "round-sphere equality band: {band}");
        assert!(report.pass);
        // Mixed curvature vs the upper bound: one-sided inequality.
        let model = &get_model("heisenberg3").unwrap().model;
        let report = hessian_distance_probe(
            model,
            &[0.1, 0.2, -0.3],
            0.3,
            Grid { n_dirs: 8, n_radii: 4 },
            1.0,
            0,
        )
        .unwrap();
        assert!(report.pass, "nilpotent margin_min = {}", report.margin_min);
    }

    #[test]
    fn reeb_tube_closes_on_the_round_sphere() {
        let model = &get_model("round-s3").unwrap().model;
        let orbit = model.orbits[0].clone();
        let report = reeb_tube_probe(
            model,
            &orbit,
            0.3,
            Grid { n_dirs: 8, n_radii: 4 },
            4.0 / 3.0,
            1.0,
            std::f64::consts::FRAC_PI_2,
            0,
        )
        .unwrap();
        let defect = report.closure_defect.unwrap();
        assert!(defect < 1e-6, "closure defect {defect}");
        assert!(report.pass, "tube margin_min = {}", report.margin_min);
        assert!(report.margin_min >= -1e-6);
    }

    #[test]
    fn tube_gates_reject_bad_radii_and_unknown_periods() {
        let model = &get_model("round-s3").unwrap().model;
        let orbit = model.orbits[0].clone();
        match reeb_tube_probe(
            model,
            &orbit,
            1.6,
            Grid::default(),
            4.0 / 3.0,
            1.0,
            std::f64::consts::FRAC_PI_2,
            0,
        ) {
            Err(Error::RadiusTooLarge { what, .. }) => assert_eq!(what, "tube probe"),
            other => panic!("expected radius gate, got {other:?}"),
        }
        let unknown = OrbitSeed { point: vec![1.0, 0.0, 0.0], period: None };
        match reeb_tube_probe(
            model,
            &unknown,
            0.3,
            Grid::default(),
            4.0 / 3.0,
            1.0,
            std::f64::consts::FRAC_PI_2,
            0,
        ) {
            Err(Error::InvalidInputs { .. }) => {}
            other => panic!("expected invalid inputs, got {other:?}"),
        }
    }
}
