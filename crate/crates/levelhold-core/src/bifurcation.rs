//! Orbit iteration, period detection, flip-point refinement, cascade
//! scanning and Lyapunov-exponent estimation for the closed-loop maps.
//!
//! Everything here drives a [`MapSpec`], a tagged union over the three map
//! families (the scalar reduced map, the algorithm-1 cycle map and the
//! algorithm-2 step map) with a uniform step/Jacobian interface and a
//! designated scan parameter (the cascade parameter `a` for the reduced
//! map, the step `dt` for the full maps).
//!
//! The machinery reproduces the standard period-doubling phenomenology:
//! orbits settle onto cycles whose length doubles at parameter thresholds
//! ([`refine_flip`] locates them by bisection on a period classifier),
//! accumulating into chaos detected by a positive largest Lyapunov
//! exponent ([`lyapunov_reduced`], [`lyapunov_2d`], and the sustained
//! threshold rule in [`scan_cascade`]).
//!
//! A quantity that collapses to exact floating-point zero ("computer
//! zero") is never an error: the zero ray is invariant, the orbit
//! continues on it, and summaries count the collapses so downstream
//! consumers can flag estimates as unreliable.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use crate::maps::{self, Map1Params, Map2Params, MapError, MapPoint};

#[allow(unused_imports)]
use num_traits::Float;

/// Default transient length before sampling.
pub const DEFAULT_TRANSIENT: usize = 10_000;
/// Default number of recorded iterates.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Default relative tolerance for period detection on settled orbits.
pub const DEFAULT_PERIOD_REL_TOL: f64 = 1e-8;
/// Longest cycle the detector reports.
pub const DEFAULT_MAX_PERIOD: usize = 64;

// The flip classifier needs a long transient (cycle convergence is slow
// near a doubling) but few samples, and a looser tolerance than settled
// orbits: close to a flip the freshly doubled cycle is only partly
// converged.
const CLASSIFY_TRANSIENT: usize = 200_000;
const CLASSIFY_SAMPLES: usize = 256;
const CLASSIFY_REL_TOL: f64 = 1e-5;

// Chaos onset: Lyapunov estimate above this on two consecutive grid cells
// (a single-cell excursion near the accumulation point is flicker).
const CHAOS_THRESHOLD: f64 = 0.005;

/// One of the three map families with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSpec {
    /// Scalar reduced map `q' = q exp(a(1−q))`; the `lambda` coordinate is
    /// carried as 0.
    Reduced { a: f64 },
    Map1(Map1Params),
    Map2(Map2Params),
}

impl MapSpec {
    /// One application of the selected map.
    pub fn step(&self, x: &MapPoint) -> Result<MapPoint, MapError> {
        match self {
            MapSpec::Reduced { a } => {
                let q = maps::reduced_map_step(x.q, *a);
                if !q.is_finite() {
                    return Err(MapError::QuantityOverflow);
                }
                Ok(MapPoint { q, lambda: 0.0 })
            }
            MapSpec::Map1(p) => maps::map1_step(x, p),
            MapSpec::Map2(p) => maps::map2_step(x, p),
        }
    }

    /// Analytic Jacobian of the selected map.
    pub fn jacobian(&self, x: &MapPoint) -> [[f64; 2]; 2] {
        match self {
            MapSpec::Reduced { a } => {
                [[maps::reduced_map_derivative(x.q, *a), 0.0], [0.0, 0.0]]
            }
            MapSpec::Map1(p) => maps::map1_jacobian(x, p),
            MapSpec::Map2(p) => maps::map2_jacobian(x, p),
        }
    }

    /// The family's scan parameter: `a` for the reduced map, `dt` for the
    /// full maps. The value is not re-validated here; scans use positive
    /// grids.
    pub fn with_parameter(&self, value: f64) -> MapSpec {
        match self {
            MapSpec::Reduced { .. } => MapSpec::Reduced { a: value },
            MapSpec::Map1(p) => {
                let mut p = *p;
                p.dt = value;
                MapSpec::Map1(p)
            }
            MapSpec::Map2(p) => {
                let mut p = *p;
                p.dt = value;
                MapSpec::Map2(p)
            }
        }
    }

    /// Start state used when no warm state is available. The algorithm-2
    /// map starts just off its interior fixed point (its basin is
    /// uncertain); the others start mid-range below the setpoint.
    pub fn cold_start(&self) -> MapPoint {
        match self {
            MapSpec::Reduced { .. } => MapPoint { q: 0.5, lambda: 0.0 },
            MapSpec::Map1(p) => MapPoint {
                q: 0.5 * p.q_setpoint,
                lambda: 0.0,
            },
            MapSpec::Map2(p) => match maps::fixed_point_map2(p) {
                Ok(fp) => MapPoint {
                    q: 1.01 * fp.q,
                    lambda: 0.99 * fp.lambda,
                },
                Err(_) => MapPoint {
                    q: p.q_setpoint,
                    lambda: 0.0,
                },
            },
        }
    }
}

/// Detected cycle length, or no cycle within the tested horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Period {
    /// Cycle length, at least 1.
    Cycle(usize),
    Aperiodic,
}

impl Period {
    pub fn cycle_len(&self) -> Option<usize> {
        match self {
            Period::Cycle(p) => Some(*p),
            Period::Aperiodic => None,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Cycle(p) => write!(f, "{p}"),
            Period::Aperiodic => write!(f, "aperiodic"),
        }
    }
}

/// Post-transient record of one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSummary {
    /// Recorded iterates, in order.
    pub samples: Vec<MapPoint>,
    /// Cycle detected on the samples at the default tolerance.
    pub period: Period,
    /// Largest Lyapunov exponent estimate (per iteration) over the sample
    /// window, by tangent iteration of the analytic Jacobian.
    pub lyapunov: f64,
    /// Observed `((q_min, q_max), (lambda_min, lambda_max))` over the
    /// samples.
    pub bounds: ((f64, f64), (f64, f64)),
    /// Collapses of the quantity to exact zero, transient included.
    pub underflow_events: usize,
}

/// One cell of a parameter scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub parameter: f64,
    /// Tail of the long-run samples kept for output and period detection.
    pub samples: Vec<MapPoint>,
    pub period: Period,
    pub lyapunov: f64,
    pub underflow_events: usize,
    /// Orbit overflowed in this cell; its numbers cover the part that ran.
    pub diverged: bool,
}

/// Result of [`scan_cascade`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub cells: Vec<ScanCell>,
    /// Refined parameter values where the detected period doubles,
    /// strictly increasing.
    pub flip_points: Vec<f64>,
    /// First grid parameter whose Lyapunov estimate exceeds the chaos
    /// threshold on two consecutive cells.
    pub chaos_onset: Option<f64>,
}

impl ScanResult {
    pub fn parameter_grid(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.parameter).collect()
    }
}

/// Lyapunov estimate with its quality indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    /// Mean log stretch per iteration, each term clamped to ±50.
    pub exponent: f64,
    /// Terms whose local derivative or tangent image was exactly zero
    /// (skipped for the scalar estimator, clamped-and-reset for the
    /// tangent estimator).
    pub degenerate_terms: usize,
    /// Collapses of the quantity to exact zero along the orbit.
    pub underflow_events: usize,
}

impl LyapunovEstimate {
    /// The orbit reached computer zero; the exponent describes the zero
    /// ray rather than the attractor of interest.
    pub fn unreliable(&self) -> bool {
        self.underflow_events > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BifurcationError {
    /// The orbit overflowed; carries the last finite iterate and the
    /// 1-based iteration index at which the step failed.
    OrbitDiverged { last: MapPoint, step: usize },
    /// The detected period does not double across the bracket.
    NoFlipInBracket,
    InvalidArgument(&'static str),
}

impl fmt::Display for BifurcationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BifurcationError::OrbitDiverged { step, .. } => {
                write!(f, "orbit diverged at step {step}")
            }
            BifurcationError::NoFlipInBracket => write!(f, "no flip in bracket"),
            BifurcationError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BifurcationError {}

fn clamp50(x: f64) -> f64 {
    x.max(-50.0).min(50.0)
}

/// Smallest cycle length `p ≤ max_period` such that every sample agrees
/// with the one `p` positions later, per coordinate, within `rel_tol`
/// times that coordinate's largest magnitude over the window.
///
/// A window shorter than `2·max_period` is handled by clamping the tested
/// horizon to half the window. A coordinate that is identically zero
/// imposes exact equality on itself, which it satisfies.
pub fn detect_period(samples: &[MapPoint], rel_tol: f64, max_period: usize) -> Period {
    let n = samples.len();
    let maxp = max_period.min(n / 2);
    if maxp == 0 {
        return Period::Aperiodic;
    }
    let mut scale_q = 0.0f64;
    let mut scale_l = 0.0f64;
    for s in samples {
        scale_q = scale_q.max(s.q.abs());
        scale_l = scale_l.max(s.lambda.abs());
    }
    'candidate: for p in 1..=maxp {
        for i in 0..n - p {
            if (samples[i + p].q - samples[i].q).abs() > rel_tol * scale_q
                || (samples[i + p].lambda - samples[i].lambda).abs() > rel_tol * scale_l
            {
                continue 'candidate;
            }
        }
        return Period::Cycle(p);
    }
    Period::Aperiodic
}

/// Runs `transient` discarded iterations then records `samples` iterates,
/// summarizing period (at the default tolerance), Lyapunov estimate,
/// bounds, and computer-zero collapses. Collapse to zero continues on the
/// zero ray; overflow aborts with the last finite iterate.
pub fn iterate_orbit(
    map: &MapSpec,
    start: &MapPoint,
    transient: usize,
    samples: usize,
) -> Result<OrbitSummary, BifurcationError> {
    let mut x = *start;
    let mut underflow = 0usize;
    let mut step_index = 0usize;
    let advance = |x: &mut MapPoint,
                   underflow: &mut usize,
                   step_index: &mut usize|
     -> Result<(), BifurcationError> {
        *step_index += 1;
        match map.step(x) {
            Ok(next) => {
                if next.q == 0.0 && x.q != 0.0 {
                    *underflow += 1;
                }
                *x = next;
                Ok(())
            }
            Err(_) => Err(BifurcationError::OrbitDiverged {
                last: *x,
                step: *step_index,
            }),
        }
    };

    for _ in 0..transient {
        advance(&mut x, &mut underflow, &mut step_index)?;
    }

    let mut recorded = Vec::with_capacity(samples);
    let mut v = (1.0f64, 0.0f64);
    let mut sum = 0.0f64;
    let mut terms = 0usize;
    for _ in 0..samples {
        let j = map.jacobian(&x);
        let w = (
            j[0][0] * v.0 + j[0][1] * v.1,
            j[1][0] * v.0 + j[1][1] * v.1,
        );
        let norm = w.0.hypot(w.1);
        if norm == 0.0 {
            sum += -50.0;
            terms += 1;
            v = (1.0, 0.0);
        } else {
            sum += clamp50(norm.ln());
            terms += 1;
            v = (w.0 / norm, w.1 / norm);
        }
        advance(&mut x, &mut underflow, &mut step_index)?;
        recorded.push(x);
    }

    let bounds = sample_bounds(&recorded, &x);
    Ok(OrbitSummary {
        period: detect_period(&recorded, DEFAULT_PERIOD_REL_TOL, DEFAULT_MAX_PERIOD),
        lyapunov: if terms > 0 { sum / terms as f64 } else { -50.0 },
        bounds,
        underflow_events: underflow,
        samples: recorded,
    })
}

fn sample_bounds(samples: &[MapPoint], fallback: &MapPoint) -> ((f64, f64), (f64, f64)) {
    if samples.is_empty() {
        return (
            (fallback.q, fallback.q),
            (fallback.lambda, fallback.lambda),
        );
    }
    let mut qb = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lb = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        qb.0 = qb.0.min(s.q);
        qb.1 = qb.1.max(s.q);
        lb.0 = lb.0.min(s.lambda);
        lb.1 = lb.1.max(s.lambda);
    }
    (qb, lb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Classified {
    Cycle(usize),
    Aperiodic,
    ZeroCapture,
    Diverged,
}

/// Long-transient period classification used by flip refinement.
fn classify(map: &MapSpec, start: MapPoint) -> (Classified, MapPoint) {
    let mut x = start;
    for _ in 0..CLASSIFY_TRANSIENT {
        x = match map.step(&x) {
            Ok(next) => next,
            Err(_) => return (Classified::Diverged, x),
        };
        if x.q == 0.0 {
            return (Classified::ZeroCapture, x);
        }
    }
    let mut samples = Vec::with_capacity(CLASSIFY_SAMPLES);
    for _ in 0..CLASSIFY_SAMPLES {
        x = match map.step(&x) {
            Ok(next) => next,
            Err(_) => return (Classified::Diverged, x),
        };
        samples.push(x);
    }
    match detect_period(&samples, CLASSIFY_REL_TOL, DEFAULT_MAX_PERIOD) {
        Period::Cycle(p) => (Classified::Cycle(p), x),
        Period::Aperiodic => (Classified::Aperiodic, x),
    }
}

/// Locates a period-doubling point by bisection on the period classifier.
///
/// Requires the classified period at `param_hi` to be exactly twice the
/// one at `param_lo` ("no flip in bracket" otherwise). The midpoint orbit
/// is warm-started from the state left at the current low end, which
/// tracks the attractor branch across the doubling. Returns the bracket
/// midpoint once its width is at most `tol`.
pub fn refine_flip(
    map: &MapSpec,
    param_lo: f64,
    param_hi: f64,
    tol: f64,
) -> Result<f64, BifurcationError> {
    if !(param_lo < param_hi) {
        return Err(BifurcationError::InvalidArgument("bracket must be ordered"));
    }
    if !(tol > 0.0) {
        return Err(BifurcationError::InvalidArgument("tol must be > 0"));
    }
    let lo_map = map.with_parameter(param_lo);
    let (lo_out, lo_state) = classify(&lo_map, lo_map.cold_start());
    let p_lo = match lo_out {
        Classified::Cycle(p) => p,
        _ => return Err(BifurcationError::NoFlipInBracket),
    };
    let hi_map = map.with_parameter(param_hi);
    match classify(&hi_map, hi_map.cold_start()).0 {
        Classified::Cycle(p) if p == 2 * p_lo => {}
        _ => return Err(BifurcationError::NoFlipInBracket),
    }

    let (mut lo, mut hi) = (param_lo, param_hi);
    let mut state_lo = lo_state;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (out, state) = classify(&map.with_parameter(mid), state_lo);
        match out {
            Classified::Cycle(p) if p <= p_lo => {
                lo = mid;
                state_lo = state;
            }
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Knobs for [`scan_cascade`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    /// Discarded iterations entering each cell.
    pub transient: usize,
    /// Iterations feeding each cell's Lyapunov estimate.
    pub samples: usize,
    /// Tail samples kept per cell for output and period detection (at
    /// least `2 × max period` to resolve the longest cycles).
    pub kept_samples: usize,
    /// Period tolerance per cell; looser than the settled-orbit default
    /// because a cell may sit close to a doubling.
    pub period_rel_tol: f64,
    /// Restart every cell from the family cold start instead of the
    /// previous cell's end state.
    pub cold_start_each_cell: bool,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            transient: DEFAULT_TRANSIENT,
            samples: DEFAULT_SAMPLES,
            kept_samples: 2 * DEFAULT_MAX_PERIOD,
            period_rel_tol: CLASSIFY_REL_TOL,
            cold_start_each_cell: false,
        }
    }
}

/// Sweeps the family's scan parameter over `points` grid values spanning
/// `[param_lo, param_hi]`, warm-starting each cell from the previous
/// attractor by default. The inherited state is displaced by one part in
/// 1e9 so a start sitting exactly on an invariant point the new cell has
/// destabilized cannot stay pinned there.
///
/// Between adjacent cells whose detected period doubles, the flip point
/// is refined by [`refine_flip`] at a hundredth of the cell width. Chaos
/// onset is the first cell whose Lyapunov estimate exceeds the threshold
/// on that cell and the next. Divergent cells are marked, not fatal; a
/// cell ending on the zero ray (or divergent) cold-starts the next cell
/// so the poisoned state does not propagate.
///
/// A zero-width range yields a single cell regardless of `points`.
pub fn scan_cascade(
    map: &MapSpec,
    param_lo: f64,
    param_hi: f64,
    points: usize,
    settings: &ScanSettings,
) -> Result<ScanResult, BifurcationError> {
    if !(param_hi >= param_lo) {
        return Err(BifurcationError::InvalidArgument("range must be ordered"));
    }
    let grid: Vec<f64> = if param_lo == param_hi {
        let mut g = Vec::with_capacity(1);
        g.push(param_lo);
        g
    } else {
        if points < 2 {
            return Err(BifurcationError::InvalidArgument(
                "points must be at least 2",
            ));
        }
        (0..points)
            .map(|k| param_lo + (param_hi - param_lo) * k as f64 / (points - 1) as f64)
            .collect()
    };

    let mut cells: Vec<ScanCell> = Vec::with_capacity(grid.len());
    let mut warm: Option<MapPoint> = None;
    for &parameter in &grid {
        let cell_map = map.with_parameter(parameter);
        let mut x = match (settings.cold_start_each_cell, warm) {
            // displaced by one part in 1e9: a warm state can sit exactly on
            // an invariant point the new cell has destabilized (the reduced
            // map's fixed point is the representable 1.0), and an exactly
            // invariant start never generates the roundoff kick needed to
            // leave it
            (false, Some(state)) => MapPoint {
                q: state.q * (1.0 + 1e-9),
                lambda: state.lambda,
            },
            _ => cell_map.cold_start(),
        };
        let mut underflow = 0usize;
        let mut diverged = false;

        for _ in 0..settings.transient {
            match cell_map.step(&x) {
                Ok(next) => {
                    if next.q == 0.0 && x.q != 0.0 {
                        underflow += 1;
                    }
                    x = next;
                }
                Err(_) => {
                    diverged = true;
                    break;
                }
            }
        }

        let keep = settings.kept_samples.max(1);
        let mut tail: VecDeque<MapPoint> = VecDeque::with_capacity(keep + 1);
        let mut v = (1.0f64, 0.0f64);
        let mut sum = 0.0f64;
        let mut terms = 0usize;
        if !diverged {
            for _ in 0..settings.samples {
                let j = cell_map.jacobian(&x);
                let w = (
                    j[0][0] * v.0 + j[0][1] * v.1,
                    j[1][0] * v.0 + j[1][1] * v.1,
                );
                let norm = w.0.hypot(w.1);
                if norm == 0.0 {
                    sum += -50.0;
                    terms += 1;
                    v = (1.0, 0.0);
                } else {
                    sum += clamp50(norm.ln());
                    terms += 1;
                    v = (w.0 / norm, w.1 / norm);
                }
                match cell_map.step(&x) {
                    Ok(next) => {
                        if next.q == 0.0 && x.q != 0.0 {
                            underflow += 1;
                        }
                        x = next;
                    }
                    Err(_) => {
                        diverged = true;
                        break;
                    }
                }
                tail.push_back(x);
                if tail.len() > keep {
                    tail.pop_front();
                }
            }
        }

        let samples: Vec<MapPoint> = tail.into_iter().collect();
        let period = if diverged {
            Period::Aperiodic
        } else {
            detect_period(&samples, settings.period_rel_tol, DEFAULT_MAX_PERIOD)
        };
        warm = if diverged || x.q == 0.0 { None } else { Some(x) };
        cells.push(ScanCell {
            parameter,
            samples,
            period,
            lyapunov: if terms > 0 { sum / terms as f64 } else { -50.0 },
            underflow_events: underflow,
            diverged,
        });
    }

    let mut flip_points = Vec::new();
    for pair in cells.windows(2) {
        if pair[0].diverged || pair[1].diverged {
            continue;
        }
        if let (Period::Cycle(p), Period::Cycle(p_next)) = (pair[0].period, pair[1].period) {
            if p_next == 2 * p {
                let tol = ((pair[1].parameter - pair[0].parameter) / 100.0).max(1e-12);
                if let Ok(flip) = refine_flip(map, pair[0].parameter, pair[1].parameter, tol)
                {
                    if flip_points.last().map_or(true, |&last| flip > last) {
                        flip_points.push(flip);
                    }
                }
            }
        }
    }

    let mut chaos_onset = None;
    for pair in cells.windows(2) {
        if !pair[0].diverged
            && !pair[1].diverged
            && pair[0].lyapunov > CHAOS_THRESHOLD
            && pair[1].lyapunov > CHAOS_THRESHOLD
        {
            chaos_onset = Some(pair[0].parameter);
            break;
        }
    }

    Ok(ScanResult {
        cells,
        flip_points,
        chaos_onset,
    })
}

/// Largest Lyapunov exponent of the reduced map: the mean of
/// `ln|d(reduced)/dq|` over post-transient iterates, each term clamped to
/// ±50. Iterates where the derivative is exactly zero are skipped and
/// counted; if every term is skipped the exponent reports the clamp
/// floor −50.
pub fn lyapunov_reduced(
    a: f64,
    start: f64,
    transient: usize,
    samples: usize,
) -> LyapunovEstimate {
    let mut q = start;
    let mut underflow = 0usize;
    for _ in 0..transient {
        let next = maps::reduced_map_step(q, a);
        if next == 0.0 && q != 0.0 {
            underflow += 1;
        }
        q = next;
    }
    let mut sum = 0.0f64;
    let mut terms = 0usize;
    let mut skipped = 0usize;
    for _ in 0..samples {
        let d = maps::reduced_map_derivative(q, a);
        if d == 0.0 {
            skipped += 1;
        } else {
            sum += clamp50(d.abs().ln());
            terms += 1;
        }
        let next = maps::reduced_map_step(q, a);
        if next == 0.0 && q != 0.0 {
            underflow += 1;
        }
        q = next;
    }
    LyapunovEstimate {
        exponent: if terms > 0 { sum / terms as f64 } else { -50.0 },
        degenerate_terms: skipped,
        underflow_events: underflow,
    }
}

/// Largest Lyapunov exponent of a two-dimensional map by tangent
/// iteration of the analytic Jacobian with per-step renormalization.
///
/// A zero tangent image contributes the clamp floor −50 and resets the
/// tangent direction (counted as degenerate). Collapse of the orbit to
/// computer zero is counted; [`LyapunovEstimate::unreliable`] is then
/// true, mirroring the fact that the estimate describes the zero ray.
/// Orbit overflow propagates as an error.
pub fn lyapunov_2d(
    map: &MapSpec,
    start: &MapPoint,
    transient: usize,
    samples: usize,
) -> Result<LyapunovEstimate, BifurcationError> {
    let mut x = *start;
    let mut underflow = 0usize;
    let mut step_index = 0usize;
    for _ in 0..transient {
        step_index += 1;
        match map.step(&x) {
            Ok(next) => {
                if next.q == 0.0 && x.q != 0.0 {
                    underflow += 1;
                }
                x = next;
            }
            Err(_) => {
                return Err(BifurcationError::OrbitDiverged {
                    last: x,
                    step: step_index,
                })
            }
        }
    }
    let mut v = (1.0f64, 0.0f64);
    let mut sum = 0.0f64;
    let mut terms = 0usize;
    let mut degenerate = 0usize;
    for _ in 0..samples {
        let j = map.jacobian(&x);
        let w = (
            j[0][0] * v.0 + j[0][1] * v.1,
            j[1][0] * v.0 + j[1][1] * v.1,
        );
        let norm = w.0.hypot(w.1);
        if norm == 0.0 {
            sum += -50.0;
            terms += 1;
            degenerate += 1;
            v = (1.0, 0.0);
        } else {
            sum += clamp50(norm.ln());
            terms += 1;
            v = (w.0 / norm, w.1 / norm);
        }
        step_index += 1;
        match map.step(&x) {
            Ok(next) => {
                if next.q == 0.0 && x.q != 0.0 {
                    underflow += 1;
                }
                x = next;
            }
            Err(_) => {
                return Err(BifurcationError::OrbitDiverged {
                    last: x,
                    step: step_index,
                })
            }
        }
    }
    Ok(LyapunovEstimate {
        exponent: if terms > 0 { sum / terms as f64 } else { -50.0 },
        degenerate_terms: degenerate,
        underflow_events: underflow,
    })
}
