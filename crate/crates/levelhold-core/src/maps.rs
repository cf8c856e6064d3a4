//! Closed-form discrete maps induced by the two algorithms on the drifting
//! exponential plant, with their fixed points, Jacobians, eigenvalues,
//! stability predicates, attractor bounds and the invariant curve.
//!
//! Algorithm 1 with a constant step closes into a map over one control
//! cycle (two steps, duration `2Δt`):
//!
//! ```text
//! Q' = Q exp(2Δt λ̃ (1 − Q/Q̃)),    λ' = λ̃(1 − Q/Q̃) + δ_t Δt.
//! ```
//!
//! Neither component reads `λ`, so the dynamics reduce to the scalar map
//! `q' = q exp(a(1−q))` in `q = Q/Q̃` with cascade parameter `a = 2Δt λ̃`
//! ([`reduced_map_step`]), and every iterate after the first lies on a
//! single curve in the `(Q, λ)` plane ([`invariant_curve_q`]).
//!
//! Algorithm 2 closes into a genuinely two-dimensional map per step
//! ([`map2_step`]) whose interior fixed point sits off the setpoint by a
//! `δ_t Δt`-proportional amount and whose eigenvalue geometry is governed
//! by the gain ratio `a = δ_N/δ̃_N` and feedback slope `b = λ̃/Q̃`. A
//! second fixed point with `Q = 0` ([`fixed_point_map2_zero`]) matters
//! for orbits that collapse to computer zero.

use core::fmt;

use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

/// Parameters of the algorithm-1 cycle map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Map1Params {
    /// Target-rate scale `λ̃ > 0`.
    pub lambda_tilde: f64,
    /// Setpoint `Q̃ > 0`.
    pub q_setpoint: f64,
    /// Intrinsic rate drift `δ_t` per unit time.
    pub delta_t: f64,
    /// Controller step `Δt > 0`; one map application covers `2Δt`.
    pub dt: f64,
}

impl Map1Params {
    pub fn new(
        lambda_tilde: f64,
        q_setpoint: f64,
        delta_t: f64,
        dt: f64,
    ) -> Result<Self, MapError> {
        if !(lambda_tilde > 0.0) || !lambda_tilde.is_finite() {
            return Err(MapError::InvalidParams("lambda_tilde must be > 0"));
        }
        if !(q_setpoint > 0.0) || !q_setpoint.is_finite() {
            return Err(MapError::InvalidParams("q_setpoint must be > 0"));
        }
        if !delta_t.is_finite() {
            return Err(MapError::InvalidParams("delta_t must be finite"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(MapError::InvalidParams("dt must be > 0"));
        }
        Ok(Map1Params {
            lambda_tilde,
            q_setpoint,
            delta_t,
            dt,
        })
    }

    /// Cascade parameter `a = 2 Δt λ̃` of the reduced scalar map.
    pub fn cascade_parameter(&self) -> f64 {
        2.0 * self.dt * self.lambda_tilde
    }
}

/// Parameters of the algorithm-2 step map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Map2Params {
    /// Target-rate scale `λ̃ > 0`.
    pub lambda_tilde: f64,
    /// Setpoint `Q̃ > 0`.
    pub q_setpoint: f64,
    /// True control gain `δ_N`.
    pub delta_n: f64,
    /// Intrinsic rate drift `δ_t` per unit time.
    pub delta_t: f64,
    /// Gain assumed by the controller; must share the sign of `δ_N`.
    pub delta_n_tilde: f64,
    /// Controller step `Δt > 0`; one map application covers `Δt`.
    pub dt: f64,
}

impl Map2Params {
    pub fn new(
        lambda_tilde: f64,
        q_setpoint: f64,
        delta_n: f64,
        delta_t: f64,
        delta_n_tilde: f64,
        dt: f64,
    ) -> Result<Self, MapError> {
        if !(lambda_tilde > 0.0) || !lambda_tilde.is_finite() {
            return Err(MapError::InvalidParams("lambda_tilde must be > 0"));
        }
        if !(q_setpoint > 0.0) || !q_setpoint.is_finite() {
            return Err(MapError::InvalidParams("q_setpoint must be > 0"));
        }
        if !delta_t.is_finite() {
            return Err(MapError::InvalidParams("delta_t must be finite"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(MapError::InvalidParams("dt must be > 0"));
        }
        let ratio = delta_n / delta_n_tilde;
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(MapError::InvalidParams(
                "delta_n and delta_n_tilde must be nonzero and share a sign",
            ));
        }
        Ok(Map2Params {
            lambda_tilde,
            q_setpoint,
            delta_n,
            delta_t,
            delta_n_tilde,
            dt,
        })
    }

    /// Gain ratio `a = δ_N / δ̃_N > 0`.
    ///
    /// Distinct from [`Map1Params::cascade_parameter`], which plays an
    /// unrelated role despite the shared conventional symbol.
    pub fn gain_ratio(&self) -> f64 {
        self.delta_n / self.delta_n_tilde
    }

    /// Feedback slope `b = λ̃ / Q̃ > 0` of the target-rate law.
    pub fn feedback_slope(&self) -> f64 {
        self.lambda_tilde / self.q_setpoint
    }
}

/// One state of a closed-loop map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub q: f64,
    pub lambda: f64,
}

/// Stability analysis of a map's interior fixed point.
///
/// `fixed_point` always carries the closed-form value, even where it is
/// not meaningful (`Q ≤ 0`, outside `dt_validity_interval`); `stable` is
/// the eigenvalue verdict at the configured `dt` and is automatically
/// false there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub fixed_point: MapPoint,
    /// Jacobian eigenvalues at the fixed point. Always reported as a
    /// complex pair: the radicand changes sign inside the parameter
    /// region of interest.
    pub eigenvalues: (Complex64, Complex64),
    /// True iff both eigenvalue moduli are < 1.
    pub stable: bool,
    /// Coarse design rule for stability at small steps. For the
    /// algorithm-2 map this is the textbook criterion `a < 2 and ab > 1`;
    /// its second clause is conservative (parameters failing it can still
    /// be eigenvalue-stable, see `stable`), but satisfying both gives a
    /// robust margin.
    pub small_dt_stable: bool,
    /// Step at which the leading eigenvalue crosses −1 (period doubling),
    /// when such a crossing exists.
    pub critical_dt: Option<f64>,
    /// Open interval of `dt` on which the fixed-point formula is
    /// meaningful (`Q > 0`); `None` upper bound means unbounded.
    pub dt_validity_interval: (f64, Option<f64>),
    /// Flags the degenerate parameter case `δ_t > 0, a > 2`: the validity
    /// interval is then bounded although the small-step rule already
    /// fails its first clause.
    pub validity_conflict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapError {
    InvalidParams(&'static str),
    /// `exp` overflow while stepping.
    QuantityOverflow,
    /// The interior fixed-point formula gives `Q̄ ≤ 0`; the point does
    /// not exist as a physical state.
    FixedPointNotConscious,
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapError::InvalidParams(msg) => write!(f, "invalid map parameters: {msg}"),
            MapError::QuantityOverflow => write!(f, "quantity overflow"),
            MapError::FixedPointNotConscious => write!(f, "fixed point not conscious"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MapError {}

fn modulus(z: Complex64) -> f64 {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// One application of the algorithm-1 cycle map (advances `2Δt`).
///
/// Neither output component depends on the input `λ`. `Q` underflowing to
/// zero is not an error (zero is a fixed ray); `exp` overflow is.
pub fn map1_step(p: &MapPoint, params: &Map1Params) -> Result<MapPoint, MapError> {
    let r = 1.0 - p.q / params.q_setpoint;
    let q_next = if p.q == 0.0 {
        0.0
    } else {
        p.q * (params.cascade_parameter() * r).exp()
    };
    if !q_next.is_finite() {
        return Err(MapError::QuantityOverflow);
    }
    Ok(MapPoint {
        q: q_next,
        lambda: params.lambda_tilde * r + params.delta_t * params.dt,
    })
}

/// Jacobian of [`map1_step`] at an arbitrary point. The second column is
/// identically zero (the map ignores `λ`).
pub fn map1_jacobian(p: &MapPoint, params: &Map1Params) -> [[f64; 2]; 2] {
    let a = params.cascade_parameter();
    let e = (a * (1.0 - p.q / params.q_setpoint)).exp();
    [
        [e * (1.0 - a * p.q / params.q_setpoint), 0.0],
        [-params.lambda_tilde / params.q_setpoint, 0.0],
    ]
}

/// The scalar reduction of the algorithm-1 map: `q' = q exp(a(1−q))` with
/// `q = Q/Q̃` and `a` the cascade parameter.
pub fn reduced_map_step(q: f64, a: f64) -> f64 {
    q * (a * (1.0 - q)).exp()
}

/// Derivative of [`reduced_map_step`] in `q`: `exp(a(1−q))(1−aq)`.
pub fn reduced_map_derivative(q: f64, a: f64) -> f64 {
    (a * (1.0 - q)).exp() * (1.0 - a * q)
}

/// Fixed point of the algorithm-1 map: `(Q̃, δ_t Δt)`.
///
/// The quantity settles exactly on the setpoint; the rate carries the
/// drift accrued over one step.
pub fn fixed_point_map1(params: &Map1Params) -> MapPoint {
    MapPoint {
        q: params.q_setpoint,
        lambda: params.delta_t * params.dt,
    }
}

/// Stability of the algorithm-1 fixed point.
///
/// Eigenvalues are `(1 − 2Δtλ̃, 0)`; the point is stable strictly below
/// `critical_dt = 1/λ̃` and loses stability through −1 there.
pub fn stability_map1(params: &Map1Params) -> StabilityReport {
    let rho = 1.0 - params.cascade_parameter();
    let eigenvalues = (Complex64::new(rho, 0.0), Complex64::new(0.0, 0.0));
    StabilityReport {
        fixed_point: fixed_point_map1(params),
        eigenvalues,
        stable: rho.abs() < 1.0,
        small_dt_stable: true,
        critical_dt: Some(1.0 / params.lambda_tilde),
        dt_validity_interval: (0.0, None),
        validity_conflict: false,
    }
}

/// Rectangle containing every attracting set of the algorithm-1 map:
/// `((Q_min, Q_max), (λ_min, λ_max))`.
///
/// `Q_max = (Q̃/a) e^(a−1)` is the global maximum of the map and
/// `Q_min` its image; the `λ` bounds follow through the target-rate law.
/// At `a = 1` the rectangle degenerates to the fixed point.
pub fn attractor_rectangle(params: &Map1Params) -> ((f64, f64), (f64, f64)) {
    let a = params.cascade_parameter();
    let qs = params.q_setpoint;
    let q_max = qs / a * (a - 1.0).exp();
    let q_min = q_max * (a * (1.0 - q_max / qs)).exp();
    let shift = params.delta_t * params.dt;
    let lambda_min = params.lambda_tilde * (1.0 - q_max / qs) + shift;
    let lambda_max = params.lambda_tilde * (1.0 - q_min / qs) + shift;
    ((q_min, q_max), (lambda_min, lambda_max))
}

/// The curve on which every algorithm-1 iterate after the first lies:
/// `Q = Q̃(1 − (λ − δ_tΔt)/λ̃) exp(2Δt(λ − δ_tΔt))`.
pub fn invariant_curve_q(lambda: f64, params: &Map1Params) -> f64 {
    let u = lambda - params.delta_t * params.dt;
    params.q_setpoint * (1.0 - u / params.lambda_tilde) * (2.0 * params.dt * u).exp()
}

/// One application of the algorithm-2 step map (advances `Δt`).
///
/// The control increment `ΔN = (λ̃(1−Q/Q̃) − λ)/δ̃_N` is applied
/// impulsively, then the plant runs free for `Δt`. The ray `Q = 0` is
/// invariant; `exp` overflow is an error.
pub fn map2_step(p: &MapPoint, params: &Map2Params) -> Result<MapPoint, MapError> {
    let dn = (params.lambda_tilde * (1.0 - p.q / params.q_setpoint) - p.lambda)
        / params.delta_n_tilde;
    let jump = params.delta_n * dn;
    let g = (p.lambda + jump) * params.dt + params.delta_t * params.dt * params.dt * 0.5;
    let q_next = if p.q == 0.0 { 0.0 } else { p.q * g.exp() };
    if !q_next.is_finite() {
        return Err(MapError::QuantityOverflow);
    }
    Ok(MapPoint {
        q: q_next,
        lambda: p.lambda + jump + params.delta_t * params.dt,
    })
}

/// Jacobian of [`map2_step`] at an arbitrary point.
pub fn map2_jacobian(p: &MapPoint, params: &Map2Params) -> [[f64; 2]; 2] {
    let a = params.gain_ratio();
    let ab = a * params.feedback_slope();
    let dt = params.dt;
    let g = dt * ((1.0 - a) * p.lambda - ab * p.q + a * params.lambda_tilde)
        + params.delta_t * dt * dt * 0.5;
    let e = g.exp();
    [
        [e * (1.0 - ab * dt * p.q), p.q * e * dt * (1.0 - a)],
        [-ab, 1.0 - a],
    ]
}

fn fixed_point_map2_formula(params: &Map2Params) -> MapPoint {
    let a = params.gain_ratio();
    MapPoint {
        q: params.q_setpoint
            * (1.0 - params.delta_t * params.dt * (0.5 - 1.0 / a) / params.lambda_tilde),
        lambda: params.delta_t * params.dt * 0.5,
    }
}

/// Interior fixed point of the algorithm-2 map:
/// `Q̄ = Q̃(1 − δ_tΔt(1/2 − 1/a)/λ̃)`, `λ̄ = δ_tΔt/2`.
///
/// Unlike algorithm 1's, this steady state misses the setpoint by an
/// amount depending on the drift, the step and the gain ratio.
///
/// Errors with "fixed point not conscious" when the formula yields
/// `Q̄ ≤ 0` (outside the validity interval of [`stability_map2`]).
pub fn fixed_point_map2(params: &Map2Params) -> Result<MapPoint, MapError> {
    let p = fixed_point_map2_formula(params);
    if !(p.q > 0.0) {
        return Err(MapError::FixedPointNotConscious);
    }
    Ok(p)
}

/// The `Q = 0` fixed point of the algorithm-2 map and its stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroFixedPoint {
    pub point: MapPoint,
    pub stable: bool,
}

/// Fixed point on the invariant ray `Q = 0`: `λ = λ̃ + δ_tΔt/a`.
///
/// Orbits whose quantity collapses to computer zero relax onto it. It is
/// attracting iff `δ_t < 0` and `a < 2δ_tΔt/(δ_tΔt − 2λ̃)`.
pub fn fixed_point_map2_zero(params: &Map2Params) -> ZeroFixedPoint {
    let a = params.gain_ratio();
    let shift = params.delta_t * params.dt;
    let stable = params.delta_t < 0.0
        && a < 2.0 * shift / (shift - 2.0 * params.lambda_tilde);
    ZeroFixedPoint {
        point: MapPoint {
            q: 0.0,
            lambda: params.lambda_tilde + shift / a,
        },
        stable,
    }
}

/// Eigenvalues of the algorithm-2 Jacobian at the interior fixed point,
/// parametrized by `h = Q̄ Δt`:
///
/// ```text
/// θ₁,₂ = [(2−a) − h·ab ± sqrt(a(h²·ab² + h·2b(a−2) + a))] / 2.
/// ```
///
/// Exposed with `h` free because the limits are informative: `h = 0`
/// gives `(1, 1−a)`, and the flip locus is `h₀ = 2(2−a)/(ab)` where
/// `θ₂ = −1`. For `a ∈ (0,1)` the pair is complex on an `h`-window with
/// modulus `sqrt(1−a)`.
pub fn map2_eigenvalues_at_h(
    gain_ratio: f64,
    feedback_slope: f64,
    h: f64,
) -> (Complex64, Complex64) {
    let a = gain_ratio;
    let b = feedback_slope;
    let t = (2.0 - a) - h * a * b;
    let radicand = a * (h * h * a * b * b + h * 2.0 * b * (a - 2.0) + a);
    if radicand >= 0.0 {
        let s = radicand.sqrt();
        (
            Complex64::new((t + s) * 0.5, 0.0),
            Complex64::new((t - s) * 0.5, 0.0),
        )
    } else {
        let s = (-radicand).sqrt();
        (
            Complex64::new(t * 0.5, s * 0.5),
            Complex64::new(t * 0.5, -s * 0.5),
        )
    }
}

/// Eigenvalues at the interior fixed point of the given parameters.
///
/// Propagates "fixed point not conscious" when the point does not exist.
pub fn eigenvalues_map2(params: &Map2Params) -> Result<(Complex64, Complex64), MapError> {
    let fp = fixed_point_map2(params)?;
    Ok(map2_eigenvalues_at_h(
        params.gain_ratio(),
        params.feedback_slope(),
        fp.q * params.dt,
    ))
}

/// Step at which the interior fixed point of the algorithm-2 map loses
/// stability through an eigenvalue crossing −1, if it does.
///
/// Solves `h(Δt) = h₀` with `h(Δt) = Q̄(Δt)Δt`, i.e. the quadratic
/// `cΔt² − λ̃Δt + K = 0` with `c = δ_t(1/2 − 1/a)` and `K = 2(2−a)/a`,
/// taking the relevant root `Δt₀ = 2K/(λ̃ + sqrt(λ̃² − 4cK))`. A negative
/// radicand (no crossing: stable throughout the validity interval) or a
/// non-positive root yields `None`. The radicand is guarded at zero with
/// a relative tolerance of 1e-14, treating an exact tangency as present.
fn critical_dt_map2(params: &Map2Params) -> Option<f64> {
    let a = params.gain_ratio();
    let lt = params.lambda_tilde;
    let c = params.delta_t * (0.5 - 1.0 / a);
    let k = 2.0 * (2.0 - a) / a;
    let radicand = lt * lt - 4.0 * c * k;
    let tol = 1e-14 * (lt * lt).max((4.0 * c * k).abs());
    if radicand < -tol {
        return None;
    }
    let dt0 = 2.0 * k / (lt + radicand.max(0.0).sqrt());
    if dt0 > 0.0 && dt0.is_finite() {
        Some(dt0)
    } else {
        None
    }
}

/// Full stability report for the interior fixed point of the algorithm-2
/// map. Never fails: where the fixed point is not conscious the report
/// carries the raw formula value and `stable = false` follows from the
/// eigenvalues.
pub fn stability_map2(params: &Map2Params) -> StabilityReport {
    let a = params.gain_ratio();
    let b = params.feedback_slope();
    let fixed_point = fixed_point_map2_formula(params);
    let eigenvalues = map2_eigenvalues_at_h(a, b, fixed_point.q * params.dt);
    let c = params.delta_t * (0.5 - 1.0 / a);
    let upper = if c > 0.0 {
        Some(params.lambda_tilde / c)
    } else {
        None
    };
    StabilityReport {
        fixed_point,
        eigenvalues,
        stable: modulus(eigenvalues.0) < 1.0 && modulus(eigenvalues.1) < 1.0,
        small_dt_stable: a < 2.0 && a * b > 1.0,
        critical_dt: critical_dt_map2(params),
        dt_validity_interval: (0.0, upper),
        validity_conflict: params.delta_t > 0.0 && a > 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m1(lambda_tilde: f64, q_setpoint: f64, delta_t: f64, dt: f64) -> Map1Params {
        Map1Params::new(lambda_tilde, q_setpoint, delta_t, dt).unwrap()
    }

    fn m2(
        lambda_tilde: f64,
        q_setpoint: f64,
        delta_n: f64,
        delta_t: f64,
        delta_n_tilde: f64,
        dt: f64,
    ) -> Map2Params {
        Map2Params::new(lambda_tilde, q_setpoint, delta_n, delta_t, delta_n_tilde, dt)
            .unwrap()
    }

    /// The second-algorithm example set: a = 0.4, b = 4.
    fn m2_example(dt: f64) -> Map2Params {
        m2(4.0, 1.0, 0.2, 0.25, 0.5, dt)
    }

    fn fig3_params() -> Map1Params {
        m1(1.0, 1.0, 0.1534, 1.35)
    }

    fn eigen2(j: [[f64; 2]; 2]) -> (Complex64, Complex64) {
        let t = j[0][0] + j[1][1];
        let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = t * t - 4.0 * d;
        if disc >= 0.0 {
            let s = disc.sqrt();
            (
                Complex64::new((t + s) * 0.5, 0.0),
                Complex64::new((t - s) * 0.5, 0.0),
            )
        } else {
            let s = (-disc).sqrt();
            (
                Complex64::new(t * 0.5, s * 0.5),
                Complex64::new(t * 0.5, -s * 0.5),
            )
        }
    }

    fn canon(p: (Complex64, Complex64)) -> (Complex64, Complex64) {
        if (p.0.re, p.0.im) <= (p.1.re, p.1.im) {
            (p.0, p.1)
        } else {
            (p.1, p.0)
        }
    }

    #[test]
    fn map1_step_examples() {
        let p = m1(1.0, 1.0, 0.0, 0.5);
        let out = map1_step(&MapPoint { q: 0.5, lambda: 0.3 }, &p).unwrap();
        assert!((out.q - 0.5 * (0.5f64).exp()).abs() < 1e-16);
        assert!((out.q - 0.8243606353500641).abs() < 1e-15);
        assert_eq!(out.lambda, 0.5);

        let out = map1_step(&MapPoint { q: 1.0, lambda: 0.0 }, &m1(1.0, 2.0, 0.0, 0.5))
            .unwrap();
        assert!((out.q - 1.6487212707001282).abs() < 1e-15);
        assert_eq!(out.lambda, 0.5);

        // drift shifts the rate by delta_t * dt
        let out = map1_step(&MapPoint { q: 1.0, lambda: 0.7 }, &fig3_params()).unwrap();
        assert_eq!(out.q, 1.0);
        assert!((out.lambda - 0.20709000000000002).abs() < 1e-16);
    }

    #[test]
    fn map1_fixed_point_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = m1(
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..5.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..1.5),
            );
            let fp = fixed_point_map1(&p);
            let next = map1_step(&fp, &p).unwrap();
            assert!((next.q - fp.q).abs() <= 1e-12 * fp.q.abs());
            assert!((next.lambda - fp.lambda).abs() <= 1e-12 * (1.0 + fp.lambda.abs()));
        }
        let fp = fixed_point_map1(&fig3_params());
        assert_eq!(fp.q, 1.0);
        assert!((fp.lambda - 0.20709).abs() < 1e-15);
    }

    #[test]
    fn stability_map1_examples() {
        let r = stability_map1(&m1(1.0, 1.0, 0.0, 0.5));
        assert_eq!(r.eigenvalues.0, Complex64::new(0.0, 0.0));
        assert!(r.stable);
        assert_eq!(r.critical_dt, Some(1.0));
        assert!(r.small_dt_stable);
        assert_eq!(r.dt_validity_interval, (0.0, None));

        // boundary step: eigenvalue exactly -1, not stable
        let r = stability_map1(&m1(1.0, 1.0, 0.0, 1.0));
        assert_eq!(r.eigenvalues.0.re, -1.0);
        assert!(!r.stable);

        let r = stability_map1(&fig3_params());
        assert!((r.eigenvalues.0.re - (-1.7)).abs() < 1e-15);
        assert!(!r.stable);
    }

    #[test]
    fn reduced_map_examples() {
        assert_eq!(reduced_map_step(1.0, 2.4), 1.0);
        let a = 1.7;
        assert!((reduced_map_step(1.0 / a, a) - (a - 1.0).exp() / a).abs() < 1e-16);
        assert!((reduced_map_step(2.0, 2.7) - 0.1344110254794995).abs() < 1e-16);
    }

    #[test]
    fn reduced_derivative_examples() {
        assert!((reduced_map_derivative(1.0, 2.7) - (-1.7000000000000002)).abs() < 1e-16);
        assert_eq!(reduced_map_derivative(1.0 / 2.7, 2.7), 0.0);
        assert!((reduced_map_derivative(0.0, 1.0) - core::f64::consts::E).abs() < 1e-15);

        // central difference cross-check
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let q = rng.gen_range(0.01..4.0);
            let a = rng.gen_range(0.1..3.0);
            let s = 1e-6;
            let num = (reduced_map_step(q + s, a) - reduced_map_step(q - s, a)) / (2.0 * s);
            assert!((num - reduced_map_derivative(q, a)).abs() < 1e-7);
        }
    }

    #[test]
    fn map1_matches_reduced_map_under_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let p = m1(
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..5.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..1.4),
            );
            let q = rng.gen_range(1e-3..10.0);
            let out = map1_step(
                &MapPoint {
                    q: q * p.q_setpoint,
                    lambda: 0.0,
                },
                &p,
            )
            .unwrap();
            let reduced = reduced_map_step(q, p.cascade_parameter());
            assert!(
                (out.q / p.q_setpoint - reduced).abs() <= 1e-14 * reduced.abs(),
                "q={q} a={}",
                p.cascade_parameter()
            );
        }
    }

    #[test]
    fn map1_ignores_input_rate() {
        let p = fig3_params();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let base = map1_step(&MapPoint { q: 0.9, lambda: 0.0 }, &p).unwrap();
        for _ in 0..50 {
            let out = map1_step(
                &MapPoint {
                    q: 0.9,
                    lambda: rng.gen_range(-10.0..10.0),
                },
                &p,
            )
            .unwrap();
            assert_eq!(out, base);
        }
    }

    #[test]
    fn iterates_land_on_invariant_curve() {
        let p = fig3_params();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let mut x = MapPoint {
                q: rng.gen_range(0.05..3.0),
                lambda: rng.gen_range(-1.0..1.0),
            };
            for k in 0..60 {
                x = map1_step(&x, &p).unwrap();
                if k >= 1 {
                    let on_curve = invariant_curve_q(x.lambda, &p);
                    assert!(
                        (x.q - on_curve).abs() <= 1e-9 * on_curve.abs().max(1e-12),
                        "off curve: {} vs {}",
                        x.q,
                        on_curve
                    );
                }
            }
        }
    }

    #[test]
    fn invariant_curve_examples() {
        let p = fig3_params();
        let shift = p.delta_t * p.dt;
        assert_eq!(invariant_curve_q(shift, &p), 1.0);
        assert!(invariant_curve_q(shift + p.lambda_tilde, &p).abs() < 1e-16);
        assert!((invariant_curve_q(0.0, &p) - 0.6900919042969716).abs() < 1e-15);
    }

    #[test]
    fn attractor_rectangle_examples() {
        let p = fig3_params(); // cascade parameter 2.7
        assert!((p.cascade_parameter() - 2.7).abs() < 1e-15);
        let ((q_min, q_max), (l_min, l_max)) = attractor_rectangle(&p);
        assert!((q_max - 2.027387922861926).abs() < 1e-14);
        assert!((q_min - 0.12653970269789852).abs() < 1e-14);
        assert!((l_min - (-0.820297922861926)).abs() < 1e-14);
        assert!((l_max - 1.0805502973021015).abs() < 1e-14);

        // degenerate at cascade parameter 1: both corners at the setpoint
        let p = m1(1.0, 1.0, 0.0, 0.5);
        let ((q_min, q_max), _) = attractor_rectangle(&p);
        assert_eq!(q_max, 1.0);
        assert_eq!(q_min, 1.0);
    }

    #[test]
    fn orbits_stay_inside_rectangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100 {
            let a = rng.gen_range(2.0001..=2.85);
            let p = m1(1.0, 1.0, 0.0, a / 2.0);
            let ((q_min, q_max), _) = attractor_rectangle(&p);
            let mut q = rng.gen_range(1e-6..=10.0);
            for _ in 0..1000 {
                q = reduced_map_step(q, a);
            }
            for _ in 0..1000 {
                q = reduced_map_step(q, a);
                assert!(
                    (q_min - 1e-9..=q_max + 1e-9).contains(&q),
                    "a={a} q={q} bounds=({q_min},{q_max})"
                );
            }
        }
    }

    #[test]
    fn trapping_branches() {
        // one application of the reduced map sends:
        //   [q_min, 1]  into [q, q_max]   (no overshoot past the cap)
        //   [1, q_max]  into [q_min, 1]
        //   (q_max, inf) below q_min
        for i in 0..6 {
            let a = 2.05 + 0.16 * i as f64;
            let p = m1(1.0, 1.0, 0.0, a / 2.0);
            let ((q_min, q_max), _) = attractor_rectangle(&p);
            for k in 0..=500 {
                let f = k as f64 / 500.0;

                let q = q_min + (1.0 - q_min) * f;
                let next = reduced_map_step(q, a);
                assert!(next >= q - 1e-12 && next <= q_max + 1e-12, "a={a} q={q}");

                let q = 1.0 + (q_max - 1.0) * f;
                let next = reduced_map_step(q, a);
                assert!(next >= q_min - 1e-12 && next <= 1.0 + 1e-12, "a={a} q={q}");

                let q = q_max * (1.0 + 1e-6 + 2.0 * f);
                assert!(reduced_map_step(q, a) < q_min, "a={a} q={q}");
            }
        }
    }

    #[test]
    fn global_convergence_below_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let a = rng.gen_range(0.05..=1.995);
            let mut q = rng.gen_range(1e-6..=10.0);
            let mut converged = false;
            for _ in 0..100_000 {
                q = reduced_map_step(q, a);
                if (q - 1.0).abs() < 1e-8 {
                    converged = true;
                    break;
                }
            }
            assert!(converged, "a={a} stuck at q={q}");
        }
    }

    fn numeric_jacobian<F: Fn(&MapPoint) -> MapPoint>(f: F, at: &MapPoint) -> [[f64; 2]; 2] {
        let s = 1e-6;
        let fq = (
            f(&MapPoint { q: at.q + s, ..*at }),
            f(&MapPoint { q: at.q - s, ..*at }),
        );
        let fl = (
            f(&MapPoint {
                lambda: at.lambda + s,
                ..*at
            }),
            f(&MapPoint {
                lambda: at.lambda - s,
                ..*at
            }),
        );
        [
            [(fq.0.q - fq.1.q) / (2.0 * s), (fl.0.q - fl.1.q) / (2.0 * s)],
            [
                (fq.0.lambda - fq.1.lambda) / (2.0 * s),
                (fl.0.lambda - fl.1.lambda) / (2.0 * s),
            ],
        ]
    }

    #[test]
    fn numeric_jacobians_match_analytic_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut checked2 = 0;
        for _ in 0..100 {
            let p = m1(
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.2..5.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..1.5),
            );
            let fp = fixed_point_map1(&p);
            let num = canon(eigen2(numeric_jacobian(|x| map1_step(x, &p).unwrap(), &fp)));
            let ana = canon(stability_map1(&p).eigenvalues);
            let scale = modulus(ana.0).max(modulus(ana.1)).max(1.0);
            assert!(modulus(num.0 - ana.0) <= 1e-5 * scale);
            assert!(modulus(num.1 - ana.1) <= 1e-5 * scale);

            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let dn = sign * rng.gen_range(0.05..1.0);
            let p2 = m2(
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.2..5.0),
                dn,
                rng.gen_range(-0.5..0.5),
                dn / rng.gen_range(0.1..2.5),
                rng.gen_range(0.05..1.5),
            );
            if let Ok(fp2) = fixed_point_map2(&p2) {
                let num =
                    canon(eigen2(numeric_jacobian(|x| map2_step(x, &p2).unwrap(), &fp2)));
                let ana = canon(eigenvalues_map2(&p2).unwrap());
                let scale = modulus(ana.0).max(modulus(ana.1)).max(1.0);
                assert!(modulus(num.0 - ana.0) <= 1e-5 * scale);
                assert!(modulus(num.1 - ana.1) <= 1e-5 * scale);
                checked2 += 1;
            }
        }
        assert!(checked2 >= 80, "too few conscious second-map samples: {checked2}");
    }

    #[test]
    fn map2_step_examples() {
        // on-setpoint start: zero increment, pure drift
        let out = map2_step(&MapPoint { q: 1.0, lambda: 0.0 }, &m2_example(1.0)).unwrap();
        assert!((out.q - 1.1331484530668263).abs() < 1e-15);
        assert_eq!(out.lambda, 0.25);

        // interior fixed point is invariant
        let p = m2_example(1.0);
        let fp = fixed_point_map2(&p).unwrap();
        let next = map2_step(&fp, &p).unwrap();
        assert!((next.q - fp.q).abs() <= 1e-12 * fp.q);
        assert!((next.lambda - fp.lambda).abs() <= 1e-12 * fp.lambda.abs().max(1.0));
    }

    #[test]
    fn map2_fixed_point_residual_random_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut checked = 0;
        for _ in 0..200 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let dn = sign * rng.gen_range(0.05..1.0);
            let p = m2(
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.2..5.0),
                dn,
                rng.gen_range(-0.5..0.5),
                dn / rng.gen_range(0.1..2.5),
                rng.gen_range(0.05..1.5),
            );
            let fp = match fixed_point_map2(&p) {
                Ok(fp) => fp,
                Err(_) => continue,
            };
            let next = map2_step(&fp, &p).unwrap();
            assert!((next.q - fp.q).abs() <= 1e-12 * fp.q);
            assert!((next.lambda - fp.lambda).abs() <= 1e-12 * fp.lambda.abs().max(1.0));
            checked += 1;
        }
        assert!(checked >= 150);
    }

    #[test]
    fn zero_ray_is_invariant_and_contracts() {
        let p = m2_example(1.0); // gain ratio 0.4, contraction 0.6 on the ray
        let target = fixed_point_map2_zero(&p).point.lambda;
        let mut x = MapPoint { q: 0.0, lambda: -2.0 };
        let mut err = (x.lambda - target).abs();
        for _ in 0..60 {
            x = map2_step(&x, &p).unwrap();
            assert_eq!(x.q, 0.0);
            let next_err = (x.lambda - target).abs();
            // ratio check only while clear of the roundoff floor
            if err > 1e-5 {
                assert!((next_err / err - 0.6).abs() < 1e-9);
            }
            err = next_err;
        }
        assert!(err < 1e-10);
    }

    #[test]
    fn fixed_point_map2_examples() {
        // no drift: on the setpoint
        let p = m2(4.0, 1.5, 0.2, 0.0, 0.5, 1.0);
        let fp = fixed_point_map2(&p).unwrap();
        assert_eq!(fp.q, 1.5);
        assert_eq!(fp.lambda, 0.0);

        let fp = fixed_point_map2(&m2_example(1.0)).unwrap();
        assert!((fp.q - 1.125).abs() < 1e-15);
        assert!((fp.lambda - 0.125).abs() < 1e-16);

        // gain ratio exactly 2: offset vanishes for any drift
        let p = m2(4.0, 1.0, 1.0, 0.7, 0.5, 1.0);
        assert_eq!(fixed_point_map2(&p).unwrap().q, 1.0);

        // formula goes non-positive: not conscious
        let p = m2(1.0, 1.0, 0.2, -1.0, 0.5, 0.6);
        assert_eq!(
            fixed_point_map2(&p).unwrap_err(),
            MapError::FixedPointNotConscious
        );
    }

    #[test]
    fn zero_fixed_point_examples() {
        let p = m2(4.0, 1.0, 0.2, 0.0, 0.5, 1.0);
        let z = fixed_point_map2_zero(&p);
        assert_eq!(z.point.q, 0.0);
        assert_eq!(z.point.lambda, 4.0);
        assert!(!z.stable);

        let z = fixed_point_map2_zero(&m2_example(2.0));
        assert!((z.point.lambda - 5.25).abs() < 1e-15);

        // attraction threshold: needs a < 2*(-1)*1/((-1)*1 - 8) = 2/9
        let p = m2(4.0, 1.0, 0.2, -1.0, 0.5, 1.0);
        assert!(!fixed_point_map2_zero(&p).stable);
        let p = m2(4.0, 1.0, 0.1, -1.0, 0.5, 1.0); // a = 0.2 < 2/9
        assert!(fixed_point_map2_zero(&p).stable);
    }

    #[test]
    fn eigenvalue_formula_limits() {
        // vanishing h: (1, 1-a)
        let (t1, t2) = map2_eigenvalues_at_h(0.4, 4.0, 0.0);
        assert_eq!(t1, Complex64::new(1.0, 0.0));
        assert!((t2.re - 0.6).abs() < 1e-15 && t2.im == 0.0);

        // flip locus h0 = 2(2-a)/(ab): second eigenvalue exactly -1
        let (_, t2) = map2_eigenvalues_at_h(0.4, 4.0, 2.0);
        assert_eq!(t2, Complex64::new(-1.0, 0.0));

        // complex window for gain ratio < 1: modulus sqrt(1-a)
        let a = 0.4;
        let (h1, h2) = (
            (2.0 - a - 2.0 * (1.0 - a as f64).sqrt()) / (a * 4.0),
            (2.0 - a + 2.0 * (1.0 - a as f64).sqrt()) / (a * 4.0),
        );
        let (t1, t2) = map2_eigenvalues_at_h(a, 4.0, (h1 + h2) / 2.0);
        assert!(t1.im > 0.0 && t2.im < 0.0);
        assert!((modulus(t1) - (1.0 - a).sqrt()).abs() < 1e-12);
        // outside the window the pair is real
        let (t1, _) = map2_eigenvalues_at_h(a, 4.0, h2 + 0.1);
        assert_eq!(t1.im, 0.0);
    }

    #[test]
    fn critical_step_and_bracket() {
        let report = stability_map2(&m2_example(1.0));
        let dt0 = report.critical_dt.unwrap();
        assert!((dt0 - 1.65685).abs() <= 1e-5);
        assert!((dt0 - 4.0 * (2.0f64.sqrt() - 1.0)).abs() < 1e-14);

        // the second eigenvalue crosses -1 exactly at the critical step
        let (_, t2) = eigenvalues_map2(&m2_example(dt0 - 1e-6)).unwrap();
        assert!((t2.re - (-0.9999943430982505)).abs() < 1e-12 && t2.im == 0.0);
        assert!(modulus(t2) < 1.0);
        let (_, t2) = eigenvalues_map2(&m2_example(dt0 + 1e-6)).unwrap();
        assert!((t2.re - (-1.0000056568067515)).abs() < 1e-12 && t2.im == 0.0);
        assert!(modulus(t2) > 1.0);

        assert!(stability_map2(&m2_example(dt0 - 1e-6)).stable);
        assert!(!stability_map2(&m2_example(dt0 + 1e-6)).stable);
    }

    #[test]
    fn stability_map2_report_fields() {
        // example parameter set: a=0.4<2, ab=1.6>1
        let r = stability_map2(&m2_example(0.5));
        assert!(r.small_dt_stable);
        assert!(r.stable);
        assert!(!r.validity_conflict);
        // drift > 0 with a < 2: validity unbounded
        assert_eq!(r.dt_validity_interval, (0.0, None));

        // no flip crossing: negative drift, gain ratio 1, weak feedback
        let p = m2(1.0, 1.0, 0.5, -1.0, 0.5, 0.5);
        let r = stability_map2(&p);
        assert_eq!(r.critical_dt, None);
        // validity bounded: c = (-1)(0.5-1) = 0.5, upper = 2
        assert_eq!(r.dt_validity_interval, (0.0, Some(2.0)));
        // and indeed stable across that whole interval
        for dt in [0.2, 1.0, 1.9] {
            assert!(stability_map2(&m2(1.0, 1.0, 0.5, -1.0, 0.5, dt)).stable);
        }

        // positive drift with gain ratio > 2: bounded validity, flagged
        let p = m2(1.0, 1.0, 1.5, 1.0, 0.5, 0.1); // a = 3
        let r = stability_map2(&p);
        assert!(r.validity_conflict);
        assert!(!r.small_dt_stable);
        assert!(!r.stable); // |1 - a| = 2 at small steps
        let upper = r.dt_validity_interval.1.unwrap();
        assert!((upper - 6.0).abs() < 1e-12); // c = 1/6

        // outside validity the raw formula is carried and stable = false
        let p = m2(1.0, 1.0, 0.2, -1.0, 0.5, 0.6);
        let r = stability_map2(&p);
        assert!(r.fixed_point.q < 0.0);
        assert!(!r.stable);
        assert!(fixed_point_map2(&p).is_err());
    }

    #[test]
    fn small_step_rule_is_conservative() {
        // feedback slope 1 fails the coarse rule (ab = 0.4 < 1) ...
        let p = m2(1.0, 1.0, 0.2, 0.25, 0.5, 1e-3);
        let r = stability_map2(&p);
        assert!(!r.small_dt_stable);
        // ... yet the eigenvalue verdict at a concrete small step is stable,
        assert!(r.stable);
        // and orbits near the fixed point do converge to it
        let fp = fixed_point_map2(&p).unwrap();
        let mut x = MapPoint {
            q: 1.5 * fp.q,
            lambda: 0.0,
        };
        for _ in 0..2_000_000 {
            x = map2_step(&x, &p).unwrap();
        }
        assert!((x.q - fp.q).abs() < 1e-9 * fp.q);
        assert!((x.lambda - fp.lambda).abs() < 1e-9);
    }

    #[test]
    fn overflow_reported() {
        let p = m1(1.0, 1.0, 0.0, 400.0);
        assert_eq!(
            map1_step(&MapPoint { q: 1e-3, lambda: 0.0 }, &p).unwrap_err(),
            MapError::QuantityOverflow
        );
        let p = m2_example(1.0);
        assert_eq!(
            map2_step(&MapPoint { q: 1.0, lambda: 3000.0 }, &p).unwrap_err(),
            MapError::QuantityOverflow
        );
    }

    #[test]
    fn params_validation() {
        assert!(Map1Params::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(Map1Params::new(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(Map1Params::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(Map1Params::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(Map2Params::new(4.0, 1.0, 0.2, 0.25, -0.5, 1.0).is_err());
        assert!(Map2Params::new(4.0, 1.0, 0.0, 0.25, 0.5, 1.0).is_err());
        assert!(Map2Params::new(4.0, 1.0, 0.2, 0.25, 0.0, 1.0).is_err());

        let p = m2_example(1.0);
        assert!((p.gain_ratio() - 0.4).abs() < 1e-16);
        assert!((p.feedback_slope() - 4.0).abs() < 1e-16);
    }
}
