//! Adaptive embedded Runge–Kutta integration, Dormand–Prince 5(4).
//!
//! Geometry-free: callers hand in the right-hand side f(s, y) and receive
//! every accepted step endpoint with its derivative.  The controller is the
//! standard PI design (error exponents 0.7/5 and 0.4/5 with safety 0.9),
//! with the first-same-as-last property of the Dormand–Prince tableau used
//! to save one stage per accepted step.  Output between steps is cubic
//! Hermite interpolation on (value, derivative) pairs — fourth order, well
//! below the integration tolerance at the step sizes the controller picks.
//!
//! Checkpoints are forced landing points: the step size is clamped so the
//! integrator puts an accepted sample exactly at each requested arclength
//! (probes then read margins at exact radii instead of interpolating).

use crate::error::{Error, Result};

/// Default relative tolerance of the embedded error estimate.
pub const DEFAULT_RTOL: f64 = 1e-9;
/// Default absolute tolerance of the embedded error estimate.
pub const DEFAULT_ATOL: f64 = 1e-12;
/// Steps below this size abort the integration as a failure.
pub const DEFAULT_MIN_STEP: f64 = 1e-9;
/// Step-size safety factor.
const SAFETY: f64 = 0.9;
/// Largest factor by which a step may grow after acceptance.
const MAX_GROWTH: f64 = 5.0;
/// Smallest factor by which a step shrinks after rejection.
const MIN_SHRINK: f64 = 0.2;
/// PI controller exponents for a fifth-order method.
const PI_PRESENT: f64 = 0.7 / 5.0;
const PI_PAST: f64 = 0.4 / 5.0;
/// Two targets closer than this (relative) count as the same point.
const TARGET_EPS: f64 = 1e-13;

/// One accepted integration sample: arclength, state, and derivative.
#[derive(Debug, Clone)]
pub struct DenseSample {
    pub s: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

/// The full record of one integration: every accepted step endpoint
/// (including the initial state) plus controller statistics.
#[derive(Debug, Clone)]
pub struct OdePath {
    pub samples: Vec<DenseSample>,
    pub accepted: usize,
    pub rejected: usize,
}

impl OdePath {
    /// Final sample.
    pub fn end(&self) -> &DenseSample {
        self.samples.last().expect("integration records at least the initial state")
    }

    /// Cubic Hermite evaluation at an arbitrary arclength inside the
    /// integrated range; returns (state, derivative).
    pub fn at(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let samples = &self.samples;
        let last = samples.len() - 1;
        if s <= samples[0].s {
            return (samples[0].y.clone(), samples[0].dy.clone());
        }
        if s >= samples[last].s {
            return (samples[last].y.clone(), samples[last].dy.clone());
        }
        // Bracketing step via binary search on the sorted sample arclengths.
        let mut lo = 0;
        let mut hi = last;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if samples[mid].s <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (&samples[lo], &samples[hi]);
        let h = b.s - a.s;
        let t = (s - a.s) / h;
        let (t2, t3) = (t * t, t * t * t);
        // Hermite basis on [0, 1].
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let dim = a.y.len();
        let mut y = vec![0.0; dim];
        let mut dy = vec![0.0; dim];
        for i in 0..dim {
            y[i] = h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i];
            dy[i] = d00 * a.y[i] + d10 * a.dy[i] + d01 * b.y[i] + d11 * b.dy[i];
        }
        (y, dy)
    }

    /// Index of the sample landed exactly at arclength `s` (up to roundoff).
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.samples
            .iter()
            .position(|sample| (sample.s - s).abs() <= TARGET_EPS * s.abs().max(1.0))
    }
}

/// Controller options; `max_step` is the only one callers usually set.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            max_step: f64::INFINITY,
            min_step: DEFAULT_MIN_STEP,
        }
    }
}

/// Dormand–Prince 5(4) coefficients (the 7-stage FSAL tableau).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights (identical to the last A-row: first-same-as-last).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Embedded fourth-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates y′ = f(s, y) from s = 0 to `s_end` > 0.
///
/// * `checkpoints`: arclengths in (0, s_end] that must appear exactly among
///   the accepted samples (the end point is always included).
/// * `domain_ok`: predicate checked after every accepted step; a false
///   return aborts with [`Error::LeftChartDomain`] at that arclength.
///
/// A right-hand side that fails during a trial stage causes the step to be
/// retried at half the size (useful near chart boundaries where the metric
/// stops being evaluable); persistent failure surfaces as
/// [`Error::StepFailure`] once the step size underflows.
pub fn integrate(
    f: &dyn Fn(f64, &[f64], &mut [f64]) -> Result<()>,
    y0: &[f64],
    s_end: f64,
    checkpoints: &[f64],
    domain_ok: &dyn Fn(&[f64]) -> bool,
    opts: &OdeOptions,
) -> Result<OdePath> {
    assert!(s_end > 0.0, "integration range must be positive");
    let dim = y0.len();
    let mut targets: Vec<f64> = checkpoints
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < s_end * (1.0 - TARGET_EPS))
        .chain(std::iter::once(s_end))
        .collect();
    targets.sort_by(|a, b| a.partial_cmp(b).expect("checkpoints must be finite"));
    targets.dedup_by(|a, b| (*a - *b).abs() <= TARGET_EPS * a.abs().max(1.0));

    let mut samples = Vec::with_capacity(targets.len() + 16);
    let mut k = vec![vec![0.0; dim]; 7];
    let mut y = y0.to_vec();
    let mut s = 0.0;
    f(s, &y, &mut k[0])?;
    samples.push(DenseSample { s, y: y.clone(), dy: k[0].clone() });

    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut h = opts.max_step.min(s_end / 10.0).min(s_end);
    let mut err_prev: f64 = 1.0; // neutral memory for the PI controller
    let mut target_idx = 0usize;

    let mut y_stage = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut k_end = vec![0.0; dim];

    while target_idx < targets.len() {
        let target = targets[target_idx];
        if target - s <= TARGET_EPS * target.abs().max(1.0) {
            // Roundoff sliver: the previous sample already sits on the target.
            target_idx += 1;
            continue;
        }
        let h_try = h.min(opts.max_step).min(target - s);
        if h_try < opts.min_step && target - s > opts.min_step {
            return Err(Error::StepFailure { s, needed: h_try });
        }
        // Trial stages 2..7 (k[0] is valid from FSAL or initialization).
        let mut stage_failed = false;
        'stages: for stage in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = A[stage - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h_try * acc;
            }
            let (dest, s_stage) = if stage == 6 {
                (&mut k_end, s + h_try)
            } else {
                (&mut k[stage], s + C[stage] * h_try)
            };
            if f(s_stage, &y_stage, dest).is_err() {
                stage_failed = true;
                break 'stages;
            }
        }
        if stage_failed {
            rejected += 1;
            h = 0.5 * h_try;
            if h < opts.min_step {
                return Err(Error::StepFailure { s, needed: h });
            }
            continue;
        }
        // y5 was assembled by the last stage loop pass (stage 6 uses row A[5],
        // which equals B5): y_stage holds the fifth-order solution.
        y5.copy_from_slice(&y_stage);
        k[6].copy_from_slice(&k_end);
        // Embedded error estimate from the weight difference.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut diff = 0.0;
            for (j, kj) in k.iter().enumerate() {
                let d = B5[j] - B4[j];
                if d != 0.0 {
                    diff += d * kj[i];
                }
            }
            let e = h_try * diff;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / dim as f64).sqrt();
        if err <= 1.0 {
            s += h_try;
            y.copy_from_slice(&y5);
            k.swap(0, 6); // first-same-as-last
            samples.push(DenseSample { s, y: y.clone(), dy: k[0].clone() });
            accepted += 1;
            if !domain_ok(&y) {
                return Err(Error::LeftChartDomain { s });
            }
            if (s - target).abs() <= TARGET_EPS * target.abs().max(1.0) {
                target_idx += 1;
            }
            let err_clamped = err.max(1e-10);
            let factor = (SAFETY * err_clamped.powf(-PI_PRESENT) * err_prev.powf(PI_PAST))
                .clamp(MIN_SHRINK, MAX_GROWTH);
            err_prev = err_clamped;
            h = (h_try * factor).min(opts.max_step);
        } else {
            rejected += 1;
            let factor = (SAFETY * err.powf(-PI_PRESENT)).clamp(MIN_SHRINK, 1.0);
            h = h_try * factor;
            if h < opts.min_step {
                return Err(Error::StepFailure { s, needed: h });
            }
        }
    }
    Ok(OdePath { samples, accepted, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_domain(_: &[f64]) -> bool {
        true
    }

    #[test]
    fn exponential_decay_matches_the_closed_form() {
        let f = |_s: f64, y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = -y[0];
            Ok(())
        };
        let path = integrate(&f, &[1.0], 5.0, &[], &no_domain, &OdeOptions::default()).unwrap();
        let end = path.end();
        assert!((end.s - 5.0).abs() < 1e-14);
        assert!((end.y[0] - (-5.0f64).exp()).abs() < 1e-10);
        assert!(path.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_stays_on_the_energy_shell() {
        let f = |_s: f64, y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let s_end = 20.0 * std::f64::consts::PI;
        let path = integrate(&f, &[1.0, 0.0], s_end, &[], &no_domain, &OdeOptions::default())
            .unwrap();
        for sample in &path.samples {
            let energy = sample.y[0] * sample.y[0] + sample.y[1] * sample.y[1];
            assert!((energy - 1.0).abs() < 1e-6, "energy drift at s = {}", sample.s);
        }
        let end = path.end();
        // Ten full periods: back to (1, 0).
        assert!((end.y[0] - 1.0).abs() < 1e-6);
        assert!((end.y[1]).abs() < 1e-6);
    }

    #[test]
    fn dense_output_interpolates_to_interpolation_order() {
        let f = |_s: f64, y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let path =
            integrate(&f, &[0.0, 1.0], 6.0, &[], &no_domain, &OdeOptions::default()).unwrap();
        for i in 0..=120 {
            let s = 6.0 * i as f64 / 120.0;
            let (y, dy) = path.at(s);
            assert!((y[0] - s.sin()).abs() < 1e-7, "value interpolation at s = {s}");
            assert!((dy[0] - s.cos()).abs() < 1e-6, "derivative interpolation at s = {s}");
        }
    }

    #[test]
    fn checkpoints_are_landed_on_exactly() {
        let f = |s: f64, _y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = s.cos();
            Ok(())
        };
        let checkpoints = [0.3, 0.7, 1.1, 1.9];
        let path = integrate(&f, &[0.0], 2.0, &checkpoints, &no_domain, &OdeOptions::default())
            .unwrap();
        for &c in &checkpoints {
            let idx = path.index_of(c).unwrap_or_else(|| panic!("no sample at {c}"));
            let sample = &path.samples[idx];
            assert!((sample.y[0] - c.sin()).abs() < 1e-10);
        }
        assert!(path.index_of(2.0).is_some());
    }

    #[test]
    fn leaving_the_domain_is_reported_at_the_exit_arclength() {
        let f = |_s: f64, _y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = 1.0;
            Ok(())
        };
        let inside = |y: &[f64]| y[0] < 1.5;
        let opts = OdeOptions { max_step: 0.05, ..OdeOptions::default() };
        match integrate(&f, &[0.0], 10.0, &[], &inside, &opts) {
            Err(Error::LeftChartDomain { s }) => {
                assert!(s >= 1.5 && s < 1.56, "exit reported at {s}");
            }
            other => panic!("expected a domain exit, got {other:?}"),
        }
    }

    #[test]
    fn finite_time_blowup_underflows_the_step_size() {
        // y′ = y² from y(0) = 1 blows up at s = 1.
        let f = |_s: f64, y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        match integrate(&f, &[1.0], 2.0, &[], &no_domain, &OdeOptions::default()) {
            Err(Error::StepFailure { s, .. }) => {
                assert!((s - 1.0).abs() < 0.01, "blowup detected at {s}");
            }
            other => panic!("expected step failure, got {other:?}"),
        }
    }

    #[test]
    fn failing_stages_shrink_the_step_until_underflow() {
        // The right-hand side refuses to evaluate past y = 1.5; the
        // controller keeps halving and finally gives up just below it.
        let f = |_s: f64, y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            if y[0] > 1.5 {
                return Err(Error::InvalidInputs { reason: "barrier".into() });
            }
            dy[0] = 1.0;
            Ok(())
        };
        match integrate(&f, &[0.0], 10.0, &[], &no_domain, &OdeOptions::default()) {
            Err(Error::StepFailure { s, .. }) => {
                assert!(s > 1.4 && s <= 1.5 + 1e-9, "barrier reported at {s}");
            }
            other => panic!("expected step failure, got {other:?}"),
        }
    }

    #[test]
    fn rejections_are_counted_when_the_initial_step_is_too_big() {
        // A sharp pulse at s ≈ 1 forces at least one rejection when the
        // controller arrives with a large step.
        let f = |s: f64, _y: &[f64], dy: &mut [f64]| -> crate::error::Result<()> {
            dy[0] = 1.0 / (1e-4 + (s - 1.0) * (s - 1.0));
            Ok(())
        };
        let path = integrate(&f, &[0.0], 2.0, &[], &no_domain, &OdeOptions::default()).unwrap();
        assert!(path.rejected > 0);
        assert!(path.accepted > 10);
    }
}
