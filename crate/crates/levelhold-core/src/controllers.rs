//! The two feedback algorithms as pure step procedures over measurements.
//!
//! Both algorithms drive the measured growth rate toward the target
//! `target_lambda(Q) = lambda_tilde * (1 - Q / Q_setpoint)`, which is
//! positive below the setpoint and negative above it, by stepping the
//! control variable `N` with an assumed gain `delta_N_est`.
//!
//! Algorithm 1 alternates two phases. On odd steps `N` is left alone and the
//! rate drift `delta_t_est` is estimated from the free evolution of the
//! rate; on even steps a control increment is computed (compensating the
//! drift over the coming interval) and, once the interval has passed, the
//! observed rate jump is used to re-estimate the gain. On the idealized
//! plant both estimates become exact after their first update. Algorithm 2
//! controls on every step and never revises its assumed gain.
//!
//! Controllers see only [`Measurement`] values; how `lambda` was obtained
//! (instantaneous readout or the finite-difference estimate
//! [`lambda_finite_difference`]) is the caller's concern. That keeps the
//! boundary between the idealized and realizable variants explicit.

use core::fmt;

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Algorithm parameters shared by both algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Target-rate scale, `> 0`. The controller aims the rate at
    /// `lambda_tilde * (1 - Q / Q_setpoint)`.
    pub lambda_tilde: f64,
    /// Setpoint for the controlled quantity, `> 0`.
    pub q_setpoint: f64,
    /// Initial control-gain guess, nonzero. For algorithm 1 this should
    /// match the true gain in sign and dominate it in magnitude; for
    /// algorithm 2 it is used unchanged forever.
    pub delta_n_init: f64,
    /// Step durations. Constant by default; arbitrary positive sequences
    /// are accepted (the last entry repeats when exhausted).
    pub dt_schedule: DtSchedule,
}

impl ControllerConfig {
    pub fn new(
        lambda_tilde: f64,
        q_setpoint: f64,
        delta_n_init: f64,
        dt: f64,
    ) -> Result<Self, ControllerError> {
        Self::with_schedule(
            lambda_tilde,
            q_setpoint,
            delta_n_init,
            DtSchedule::Constant(dt),
        )
    }

    pub fn with_schedule(
        lambda_tilde: f64,
        q_setpoint: f64,
        delta_n_init: f64,
        dt_schedule: DtSchedule,
    ) -> Result<Self, ControllerError> {
        if !(lambda_tilde > 0.0) || !lambda_tilde.is_finite() {
            return Err(ControllerError::InvalidConfig("lambda_tilde must be > 0"));
        }
        if !(q_setpoint > 0.0) || !q_setpoint.is_finite() {
            return Err(ControllerError::InvalidConfig("q_setpoint must be > 0"));
        }
        if delta_n_init == 0.0 || !delta_n_init.is_finite() {
            return Err(ControllerError::InvalidConfig("delta_n_init must be nonzero"));
        }
        if !dt_schedule.is_valid() {
            return Err(ControllerError::InvalidConfig("dt_schedule entries must be > 0"));
        }
        Ok(ControllerConfig {
            lambda_tilde,
            q_setpoint,
            delta_n_init,
            dt_schedule,
        })
    }

    /// Duration of step `i` (1-based).
    pub fn dt_at(&self, step_index: usize) -> f64 {
        self.dt_schedule.dt_at(step_index)
    }
}

/// Step-duration schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum DtSchedule {
    Constant(f64),
    /// Explicit durations for steps 1, 2, ...; the last repeats.
    Sequence(Vec<f64>),
}

impl DtSchedule {
    fn is_valid(&self) -> bool {
        match self {
            DtSchedule::Constant(dt) => dt.is_finite() && *dt > 0.0,
            DtSchedule::Sequence(v) => {
                !v.is_empty() && v.iter().all(|dt| dt.is_finite() && *dt > 0.0)
            }
        }
    }

    fn dt_at(&self, step_index: usize) -> f64 {
        match self {
            DtSchedule::Constant(dt) => *dt,
            DtSchedule::Sequence(v) => {
                let i = step_index.saturating_sub(1).min(v.len() - 1);
                v[i]
            }
        }
    }
}

/// One sampled observation of the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub q: f64,
    pub lambda: f64,
    pub t: f64,
}

/// Step parity of algorithm 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// Running state of algorithm 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg1State {
    /// Phase of the step about to execute.
    pub parity: Parity,
    /// Current drift estimate (exact after the first odd step on the
    /// idealized plant).
    pub delta_t_est: f64,
    /// Current gain estimate, never zero.
    pub delta_n_est: f64,
    pub last_lambda: f64,
    pub last_q: f64,
    /// Control increment applied at the most recent even step.
    pub last_dn: f64,
    /// 1-based step index of the step about to execute; odd steps have odd
    /// index.
    pub step_index: usize,
}

impl Alg1State {
    /// Fresh state seeded with the initial observation; step 1 is odd.
    pub fn start(config: &ControllerConfig, m0: &Measurement) -> Self {
        Alg1State {
            parity: Parity::Odd,
            delta_t_est: 0.0,
            delta_n_est: config.delta_n_init,
            last_lambda: m0.lambda,
            last_q: m0.q,
            last_dn: 0.0,
            step_index: 1,
        }
    }
}

/// Running state of algorithm 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg2State {
    pub last_lambda: f64,
    pub last_q: f64,
}

impl Alg2State {
    pub fn start(m0: &Measurement) -> Self {
        Alg2State {
            last_lambda: m0.lambda,
            last_q: m0.q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerError {
    /// Measurement pair out of time order.
    NonMonotoneTime,
    /// Gain estimate is zero; the control law cannot divide by it.
    DegenerateGainEstimate,
    /// Finite-difference rate needs `q_now + q_prev > 0`.
    InvalidMeasurementPair,
    InvalidConfig(&'static str),
}

impl fmt::Display for ControllerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerError::NonMonotoneTime => write!(f, "non-monotone time"),
            ControllerError::DegenerateGainEstimate => write!(f, "degenerate gain estimate"),
            ControllerError::InvalidMeasurementPair => write!(f, "invalid measurement pair"),
            ControllerError::InvalidConfig(msg) => write!(f, "invalid controller config: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ControllerError {}

/// Desired rate at the current quantity: `lambda_tilde * (1 - Q / Q_setpoint)`.
pub fn target_lambda(config: &ControllerConfig, q: f64) -> f64 {
    config.lambda_tilde * (1.0 - q / config.q_setpoint)
}

/// Odd step of algorithm 1: no control was applied between the two
/// measurements, so the rate change is pure drift.
///
/// Sets `delta_t_est = (lambda_now - lambda_prev) / dt` and flips to the
/// even phase.
pub fn alg1_odd_step(
    state: &Alg1State,
    m_prev: &Measurement,
    m_now: &Measurement,
) -> Result<Alg1State, ControllerError> {
    let dt = m_now.t - m_prev.t;
    if !(dt > 0.0) {
        return Err(ControllerError::NonMonotoneTime);
    }
    let mut next = *state;
    next.delta_t_est = (m_now.lambda - m_prev.lambda) / dt;
    next.parity = Parity::Even;
    next.step_index = state.step_index + 1;
    next.last_lambda = m_now.lambda;
    next.last_q = m_now.q;
    Ok(next)
}

/// Even step of algorithm 1: computes the control increment
/// `dN = (target_lambda(Q) - lambda - delta_t_est * dt) / delta_n_est`,
/// where `dt` is the coming interval's duration from the schedule.
///
/// The drift term pre-compensates the rate drift that will accrue before
/// the next measurement. Stores `dN` for the gain update and flips to the
/// odd phase.
pub fn alg1_even_step(
    state: &Alg1State,
    config: &ControllerConfig,
    m_now: &Measurement,
) -> Result<(Alg1State, f64), ControllerError> {
    if state.delta_n_est == 0.0 {
        return Err(ControllerError::DegenerateGainEstimate);
    }
    let dt = config.dt_at(state.step_index);
    let dn = (target_lambda(config, m_now.q) - m_now.lambda - state.delta_t_est * dt)
        / state.delta_n_est;
    let mut next = *state;
    next.last_dn = dn;
    next.parity = Parity::Odd;
    next.step_index = state.step_index + 1;
    next.last_lambda = m_now.lambda;
    next.last_q = m_now.q;
    Ok((next, dn))
}

/// Guard threshold below which a control increment is too small to divide
/// by for a gain estimate.
pub fn dn_epsilon(dn: f64) -> f64 {
    1e-12 * (1.0 + dn.abs())
}

/// Gain update closing an even step: the rate moved by
/// `delta_n * dN + delta_t * dt` across the interval, so
/// `delta_n_est = ((lambda_now - lambda_prev) - delta_t_est * dt) / dN`.
///
/// Skipped (estimate kept) when `|dN|` is below [`dn_epsilon`]; the
/// division is guarded, so this never fails.
pub fn alg1_gain_update(
    state: &Alg1State,
    m_prev: &Measurement,
    m_now: &Measurement,
) -> Alg1State {
    let mut next = *state;
    next.last_lambda = m_now.lambda;
    next.last_q = m_now.q;
    if state.last_dn.abs() > dn_epsilon(state.last_dn) {
        let dt = m_now.t - m_prev.t;
        next.delta_n_est = ((m_now.lambda - m_prev.lambda) - state.delta_t_est * dt)
            / state.last_dn;
    }
    next
}

/// One step of algorithm 2:
/// `dN = (target_lambda(Q) - lambda) / delta_n_init`.
///
/// The gain guess is never revised and no drift compensation is attempted.
pub fn alg2_step(
    state: &Alg2State,
    config: &ControllerConfig,
    m_now: &Measurement,
) -> Result<(Alg2State, f64), ControllerError> {
    if config.delta_n_init == 0.0 {
        return Err(ControllerError::DegenerateGainEstimate);
    }
    let dn = (target_lambda(config, m_now.q) - m_now.lambda) / config.delta_n_init;
    let mut next = *state;
    next.last_lambda = m_now.lambda;
    next.last_q = m_now.q;
    Ok((next, dn))
}

/// Finite-difference rate estimate from two quantity samples:
/// `2 (q_now - q_prev) / (dt (q_now + q_prev))`.
///
/// For an exponential trajectory this equals `(2/dt) tanh(lambda dt / 2)`,
/// the rate at the interval midpoint to second order in `dt`.
pub fn lambda_finite_difference(
    q_now: f64,
    q_prev: f64,
    dt: f64,
) -> Result<f64, ControllerError> {
    if !(dt > 0.0) {
        return Err(ControllerError::NonMonotoneTime);
    }
    if !(q_now + q_prev > 0.0) {
        return Err(ControllerError::InvalidMeasurementPair);
    }
    Ok(2.0 * (q_now - q_prev) / (dt * (q_now + q_prev)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{apply_impulse, evolve_exact, PlantParams, PlantState};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(lambda_tilde: f64, q_setpoint: f64, delta_n_init: f64, dt: f64) -> ControllerConfig {
        ControllerConfig::new(lambda_tilde, q_setpoint, delta_n_init, dt).unwrap()
    }

    fn m(q: f64, lambda: f64, t: f64) -> Measurement {
        Measurement { q, lambda, t }
    }

    #[test]
    fn target_lambda_examples() {
        let c = cfg(4.0, 1.0, 0.5, 1.0);
        assert_eq!(target_lambda(&c, 1.0), 0.0);
        assert_eq!(target_lambda(&c, 0.0), 4.0);
        assert_eq!(target_lambda(&c, 2.0), -4.0);
    }

    #[test]
    fn odd_step_measures_drift() {
        let c = cfg(1.0, 1.0, 0.5, 1.0);
        let s = Alg1State::start(&c, &m(1.0, 0.2, 0.0));

        let flat = alg1_odd_step(&s, &m(1.0, 0.7, 0.0), &m(1.0, 0.7, 1.0)).unwrap();
        assert_eq!(flat.delta_t_est, 0.0);
        assert_eq!(flat.parity, Parity::Even);
        assert_eq!(flat.step_index, 2);

        let up = alg1_odd_step(&s, &m(1.0, 0.2, 0.0), &m(1.0, 0.45, 1.0)).unwrap();
        assert!((up.delta_t_est - 0.25).abs() < 1e-15);

        let down = alg1_odd_step(&s, &m(1.0, 1.0, 0.0), &m(1.0, 0.0, 2.0)).unwrap();
        assert_eq!(down.delta_t_est, -0.5);

        assert_eq!(
            alg1_odd_step(&s, &m(1.0, 0.0, 1.0), &m(1.0, 0.0, 1.0)).unwrap_err(),
            ControllerError::NonMonotoneTime
        );
    }

    #[test]
    fn even_step_examples() {
        // at the fixed point nothing to do
        let c = cfg(1.0, 1.0, 0.5, 1.0);
        let mut s = Alg1State::start(&c, &m(1.0, 0.0, 0.0));
        s.parity = Parity::Even;
        s.step_index = 2;
        let (next, dn) = alg1_even_step(&s, &c, &m(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(dn, 0.0);
        assert_eq!(next.parity, Parity::Odd);

        // drift compensation: (0 - 0 - 0.25*1)/0.5 = -0.5
        s.delta_t_est = 0.25;
        let (_, dn) = alg1_even_step(&s, &c, &m(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(dn, -0.5);

        // far from setpoint: (-4 - 0.1 - 0)/0.5 = -8.2
        let c = cfg(4.0, 1.0, 0.5, 1.0);
        let mut s = Alg1State::start(&c, &m(2.0, 0.1, 0.0));
        s.parity = Parity::Even;
        s.delta_t_est = 0.0;
        let (_, dn) = alg1_even_step(&s, &c, &m(2.0, 0.1, 1.0)).unwrap();
        assert!((dn - (-8.2)).abs() < 1e-15);
    }

    #[test]
    fn gain_update_recovers_true_gain_on_ideal_plant() {
        let p = PlantParams::new(0.2, 0.25).unwrap();
        let c = cfg(1.0, 1.0, 0.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s0 = PlantState::new(
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.2..3.0),
                rng.gen_range(-1.0..1.0),
                &p,
            );
            let dn = rng.gen_range(0.1..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let s1 = evolve_exact(&apply_impulse(&s0, &p, dn), &p, 1.0).unwrap();
            let mut ctrl = Alg1State::start(&c, &m(s0.q, s0.lambda, s0.t));
            ctrl.delta_t_est = 0.25;
            ctrl.last_dn = dn;
            let updated = alg1_gain_update(
                &ctrl,
                &m(s0.q, s0.lambda, s0.t),
                &m(s1.q, s1.lambda, s1.t),
            );
            assert!(
                (updated.delta_n_est - 0.2).abs() < 1e-13,
                "estimate {}",
                updated.delta_n_est
            );
        }
    }

    #[test]
    fn gain_update_skips_tiny_dn() {
        let c = cfg(1.0, 1.0, 0.5, 1.0);
        let mut s = Alg1State::start(&c, &m(1.0, 0.0, 0.0));
        s.last_dn = 0.0;
        let kept = alg1_gain_update(&s, &m(1.0, 0.0, 0.0), &m(1.0, 0.3, 1.0));
        assert_eq!(kept.delta_n_est, 0.5);
    }

    #[test]
    fn gain_update_direct_value() {
        let c = cfg(1.0, 1.0, 0.5, 1.0);
        let mut s = Alg1State::start(&c, &m(1.0, 0.0, 0.0));
        s.delta_t_est = 0.0;
        s.last_dn = 0.5;
        let up = alg1_gain_update(&s, &m(1.0, 0.0, 0.0), &m(1.0, 0.1, 1.0));
        assert!((up.delta_n_est - 0.2).abs() < 1e-16);
    }

    #[test]
    fn alg2_step_examples() {
        let c = cfg(4.0, 1.0, 0.5, 1.0);
        let s = Alg2State::start(&m(1.0, 0.2, 0.0));
        let (_, dn) = alg2_step(&s, &c, &m(1.0, 0.2, 0.0)).unwrap();
        assert!((dn - (-0.4)).abs() < 1e-15);
        let (_, dn) = alg2_step(&s, &c, &m(0.5, 0.0, 0.0)).unwrap();
        assert_eq!(dn, 4.0);
        // rate already on target: no action
        let (_, dn) = alg2_step(&s, &c, &m(0.5, 2.0, 0.0)).unwrap();
        assert_eq!(dn, 0.0);
    }

    #[test]
    fn finite_difference_examples() {
        assert_eq!(lambda_finite_difference(1.0, 1.0, 0.5).unwrap(), 0.0);
        // one unit interval of a true rate 0.1 trajectory
        let est = lambda_finite_difference((0.1f64).exp(), 1.0, 1.0).unwrap();
        assert!((est - 0.09991674991576002).abs() < 1e-15);
        assert!((est - 0.1).abs() < 1e-3);
        let est = lambda_finite_difference(1.0, 2.0, 1.0).unwrap();
        assert!((est - (-2.0 / 3.0)).abs() < 1e-16);

        assert_eq!(
            lambda_finite_difference(1.0, -1.0, 1.0).unwrap_err(),
            ControllerError::InvalidMeasurementPair
        );
        assert_eq!(
            lambda_finite_difference(1.0, 2.0, 0.0).unwrap_err(),
            ControllerError::NonMonotoneTime
        );
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        // halving dt must shrink the estimate error at least 3.5x for dt <= 0.1
        let lam = 0.7;
        let mut prev_err = f64::INFINITY;
        for k in 0..4 {
            let dt = 0.1 / (1 << k) as f64;
            let est = lambda_finite_difference((lam * dt).exp(), 1.0, dt).unwrap();
            let err = (est - lam).abs();
            if prev_err.is_finite() {
                assert!(prev_err / err >= 3.5, "ratio {}", prev_err / err);
            }
            prev_err = err;
        }
    }

    #[test]
    fn estimates_converge_immediately_on_ideal_plant() {
        // one odd step then one even step with gain update: both estimates
        // exact afterwards, regardless of the initial gain guess
        let p = PlantParams::new(0.2, 0.25).unwrap();
        let c = cfg(1.0, 1.0, 0.6, 0.7);
        let dt = 0.7;
        let s0 = PlantState::new(0.0, 2.0, 1.0, &p);
        let mut ctrl = Alg1State::start(&c, &m(s0.q, s0.lambda, s0.t));

        let s1 = evolve_exact(&s0, &p, dt).unwrap();
        ctrl = alg1_odd_step(&ctrl, &m(s0.q, s0.lambda, s0.t), &m(s1.q, s1.lambda, s1.t))
            .unwrap();
        assert_eq!(ctrl.delta_t_est, 0.25);

        let (next, dn) = alg1_even_step(&ctrl, &c, &m(s1.q, s1.lambda, s1.t)).unwrap();
        ctrl = next;
        let s2 = evolve_exact(&apply_impulse(&s1, &p, dn), &p, dt).unwrap();
        ctrl = alg1_gain_update(&ctrl, &m(s1.q, s1.lambda, s1.t), &m(s2.q, s2.lambda, s2.t));
        assert!((ctrl.delta_n_est - 0.2).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(ControllerConfig::new(0.0, 1.0, 0.5, 1.0).is_err());
        assert!(ControllerConfig::new(1.0, 0.0, 0.5, 1.0).is_err());
        assert!(ControllerConfig::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ControllerConfig::new(1.0, 1.0, 0.5, 0.0).is_err());
        let c = ControllerConfig::with_schedule(
            1.0,
            1.0,
            0.5,
            DtSchedule::Sequence(alloc::vec![0.5, 0.25]),
        )
        .unwrap();
        assert_eq!(c.dt_at(1), 0.5);
        assert_eq!(c.dt_at(2), 0.25);
        assert_eq!(c.dt_at(9), 0.25);
    }

    #[test]
    fn steps_are_deterministic() {
        let c = cfg(2.0, 1.5, 0.4, 0.3);
        let mut s = Alg1State::start(&c, &m(1.0, 0.1, 0.0));
        s.parity = Parity::Even;
        s.delta_t_est = 0.05;
        let a = alg1_even_step(&s, &c, &m(1.2, 0.07, 0.9)).unwrap();
        let b = alg1_even_step(&s, &c, &m(1.2, 0.07, 0.9)).unwrap();
        assert_eq!(a, b);
    }
}
