//! Closed-loop runner: a controller sampling and steering the plant, the
//! equivalence of the resulting trajectories with the discrete maps, and
//! step-size convergence studies.
//!
//! Four controller variants are supported. The idealized algorithms read
//! the growth rate exactly at sample instants and actuate by impulse; on
//! them the sampled trajectory reproduces the corresponding discrete map
//! to roundoff once the estimators have locked in. The modified variants
//! drop both idealizations: the rate is estimated by a finite difference
//! of quantity samples and the actuation is ramped across the interval.
//! They hold the quantity near (not at) the setpoint, settling a known
//! O(dt) offset above it; [`convergence_study`] measures that offset
//! shrinking as the sampling step is refined.
//!
//! The modified estimator policy lives here, not in `controllers`: the
//! finite difference measures the mid-interval rate, so decisions use an
//! advanced rate `raw + delta_t_est*dt/2 + delta_n_est*dn/2`, and each
//! estimate is frozen after its first accepted update (the first
//! revision, taken while transients are still large, is the accurate
//! one; later revisions divide shrinking differences and degrade). A
//! gain candidate is accepted only if it agrees in sign with the initial
//! guess.

use alloc::vec::Vec;
use core::fmt;

use crate::bifurcation::MapSpec;
use crate::controllers::{
    self, Alg1State, Alg2State, ControllerConfig, ControllerError, DtSchedule, Measurement,
    Parity,
};
use crate::maps::{self, MapPoint};
use crate::plant::{self, PlantError, PlantParams, PlantState};

/// Settle detection window: this many consecutive control-instant values.
pub const SETTLE_WINDOW: usize = 50;
/// Relative tolerance between consecutive values inside the window.
pub const SETTLE_REL_TOL: f64 = 1e-9;

// ODE plant mode integrates each interval in this many RK4 micro-steps.
const ODE_MICRO_STEPS: usize = 100;

/// How the plant is advanced between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantMode {
    /// Closed-form exponential between impulses.
    Exact,
    /// Closed-form exponential with the control increment ramped linearly
    /// across the interval.
    Ramped,
    /// RK4 micro-integration of the growth system (ramped actuation).
    Ode,
}

/// How the controller observes the growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementMode {
    /// The true rate is read at sample instants (idealized).
    Instantaneous,
    /// The rate is estimated from two quantity samples.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    /// Idealized two-phase controller with drift and gain identification.
    Algorithm1,
    /// Idealized every-step controller with a fixed gain guess.
    Algorithm2,
    /// Algorithm 1 on finite-difference measurements and ramped actuation.
    Modified1,
    /// Algorithm 2 on finite-difference measurements and ramped actuation.
    Modified2,
}

impl ControllerKind {
    pub fn is_idealized(&self) -> bool {
        matches!(self, ControllerKind::Algorithm1 | ControllerKind::Algorithm2)
    }

    fn is_two_phase(&self) -> bool {
        matches!(self, ControllerKind::Algorithm1 | ControllerKind::Modified1)
    }
}

/// Full description of one closed-loop run.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub plant: PlantParams,
    pub plant_mode: PlantMode,
    pub measurement_mode: MeasurementMode,
    pub controller: ControllerKind,
    pub controller_config: ControllerConfig,
    pub initial: PlantState,
    pub steps: usize,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        let idealized = self.controller.is_idealized();
        match (idealized, self.measurement_mode) {
            (true, MeasurementMode::Instantaneous) => {}
            (false, MeasurementMode::FiniteDifference) => {}
            (true, _) => {
                return Err(LoopError::InvalidConfig(
                    "idealized controllers require instantaneous measurement",
                ))
            }
            (false, _) => {
                return Err(LoopError::InvalidConfig(
                    "modified controllers require finite-difference measurement",
                ))
            }
        }
        match (idealized, self.plant_mode) {
            (true, PlantMode::Exact) | (true, PlantMode::Ode) => {}
            (false, PlantMode::Ramped) | (false, PlantMode::Ode) => {}
            (true, _) => {
                return Err(LoopError::InvalidConfig(
                    "idealized controllers actuate by impulse; use the exact or ODE plant",
                ))
            }
            (false, _) => {
                return Err(LoopError::InvalidConfig(
                    "modified controllers ramp the increment; use the ramped or ODE plant",
                ))
            }
        }
        if !idealized && !matches!(self.controller_config.dt_schedule, DtSchedule::Constant(_))
        {
            return Err(LoopError::InvalidConfig(
                "modified controllers require a constant step schedule",
            ));
        }
        let s = &self.initial;
        if !(s.t.is_finite() && s.q.is_finite() && s.n.is_finite()) {
            return Err(LoopError::InvalidConfig("initial state must be finite"));
        }
        if s.q < 0.0 {
            return Err(LoopError::InvalidConfig(
                "initial quantity must be nonnegative",
            ));
        }
        Ok(())
    }
}

/// Plant state and controller estimates at one sample boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub q: f64,
    /// True plant rate, recomputed from `(N, t)`.
    pub lambda: f64,
    pub n: f64,
    /// Control increment applied over the interval ending here (0 when
    /// the interval was uncontrolled).
    pub dn_applied: f64,
    /// Drift estimate after this boundary's update.
    pub delta_t_est: f64,
    /// Gain estimate after this boundary's update.
    pub delta_n_est: f64,
}

/// Noteworthy occurrences along a run. Only `ComputerZero` lets the run
/// continue; the others truncate it at the step recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopEvent {
    /// The quantity collapsed to exact floating-point zero.
    ComputerZero { step: usize },
    /// The quantity overflowed.
    Overflow { step: usize },
    /// The ODE integrator produced a non-finite state.
    IntegrationFailure { step: usize },
    /// A measurement or measurement-derived estimate became unusable.
    MeasurementFailure { step: usize },
}

/// Result of [`run_loop`]: one record per sample boundary (the initial
/// state included), timestamps strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub events: Vec<LoopEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopError {
    InvalidConfig(&'static str),
    /// The map family does not match the loop's controller or schedule.
    EquivalenceMode(&'static str),
    Plant(PlantError),
    Controller(ControllerError),
}

impl fmt::Display for LoopError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopError::InvalidConfig(msg) => write!(f, "invalid loop config: {msg}"),
            LoopError::EquivalenceMode(msg) => write!(f, "equivalence mode error: {msg}"),
            LoopError::Plant(e) => write!(f, "plant error: {e}"),
            LoopError::Controller(e) => write!(f, "controller error: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LoopError {}

impl From<PlantError> for LoopError {
    fn from(e: PlantError) -> Self {
        LoopError::Plant(e)
    }
}

impl From<ControllerError> for LoopError {
    fn from(e: ControllerError) -> Self {
        LoopError::Controller(e)
    }
}

/// Authoritative boundary time: multiples of the step for a constant
/// schedule (no accumulation drift), cumulative sums otherwise.
fn boundary_time(initial_t: f64, schedule: &DtSchedule, step: usize, elapsed: f64) -> f64 {
    match schedule {
        DtSchedule::Constant(dt) => initial_t + step as f64 * dt,
        DtSchedule::Sequence(_) => initial_t + elapsed,
    }
}

struct Runner<'a> {
    config: &'a LoopConfig,
    records: Vec<TrajectoryRecord>,
    events: Vec<LoopEvent>,
    saw_zero: bool,
    elapsed: f64,
}

impl<'a> Runner<'a> {
    fn new(config: &'a LoopConfig) -> Self {
        Runner {
            config,
            records: Vec::with_capacity(config.steps + 1),
            events: Vec::new(),
            saw_zero: config.initial.q == 0.0,
            elapsed: 0.0,
        }
    }

    fn push(&mut self, state: &PlantState, dn: f64, dt_est: f64, dn_est: f64) {
        if state.q == 0.0 && !self.saw_zero {
            self.saw_zero = true;
            self.events.push(LoopEvent::ComputerZero {
                step: self.records.len(),
            });
        }
        self.records.push(TrajectoryRecord {
            t: state.t,
            q: state.q,
            lambda: state.lambda,
            n: state.n,
            dn_applied: dn,
            delta_t_est: dt_est,
            delta_n_est: dn_est,
        });
    }

    /// Advances one interval: impulse-then-coast for idealized modes,
    /// ramp otherwise; `step` is the 1-based interval index whose end
    /// boundary this produces. Returns None after recording a truncating
    /// event.
    fn advance(
        &mut self,
        state: &PlantState,
        dt: f64,
        dn: f64,
        impulse: bool,
        step: usize,
    ) -> Result<Option<PlantState>, LoopError> {
        let params = &self.config.plant;
        let moved = match self.config.plant_mode {
            PlantMode::Exact => {
                let kicked = if impulse {
                    plant::apply_impulse(state, params, dn)
                } else {
                    *state
                };
                plant::evolve_exact(&kicked, params, dt)
            }
            PlantMode::Ramped => plant::evolve_ramped(state, params, dt, dn),
            PlantMode::Ode => self.advance_ode(state, dt, dn, impulse),
        };
        let mut next = match moved {
            Ok(s) => s,
            Err(PlantError::QuantityOverflow) => {
                self.events.push(LoopEvent::Overflow { step });
                return Ok(None);
            }
            Err(PlantError::IntegrationFailure) => {
                self.events.push(LoopEvent::IntegrationFailure { step });
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };
        self.elapsed += dt;
        let t = boundary_time(
            self.config.initial.t,
            &self.config.controller_config.dt_schedule,
            step,
            self.elapsed,
        );
        next = PlantState::new(t, next.q, next.n, params);
        Ok(Some(next))
    }

    fn advance_ode(
        &self,
        state: &PlantState,
        dt: f64,
        dn: f64,
        impulse: bool,
    ) -> Result<PlantState, PlantError> {
        let params = &self.config.plant;
        let (n_start, ramp_rate) = if impulse {
            (state.n + dn, 0.0)
        } else {
            (state.n, dn / dt)
        };
        // the drift rides in the ODE population variable
        let n_ode = n_start + params.delta_t * state.t / params.delta_n;
        let system = plant::growth_system(*params, ramp_rate);
        let h = dt / ODE_MICRO_STEPS as f64;
        let mut y = alloc::vec![state.q, n_ode];
        for m in 0..ODE_MICRO_STEPS {
            y = plant::rk4_step(&system, state.t + m as f64 * h, &y, h)?;
        }
        if !y[0].is_finite() {
            return Err(PlantError::QuantityOverflow);
        }
        Ok(PlantState::new(state.t + dt, y[0], n_start + dn, params))
    }
}

/// Runs the configured loop, recording every sample boundary.
///
/// `steps = 0` yields the initial record alone. Overflow, integration
/// failure, and measurement failure truncate the run after recording the
/// event; collapse of the quantity to exact zero is recorded once and the
/// run continues on the zero ray.
pub fn run_loop(config: &LoopConfig) -> Result<Trajectory, LoopError> {
    config.validate()?;
    let mut runner = Runner::new(config);
    if config.controller.is_idealized() {
        run_idealized(config, &mut runner)?;
    } else {
        run_modified(config, &mut runner)?;
    }
    Ok(Trajectory {
        records: runner.records,
        events: runner.events,
    })
}

fn measure(state: &PlantState) -> Measurement {
    Measurement {
        q: state.q,
        lambda: state.lambda,
        t: state.t,
    }
}

fn run_idealized(config: &LoopConfig, runner: &mut Runner) -> Result<(), LoopError> {
    let cc = &config.controller_config;
    let mut state = config.initial;
    let two_phase = config.controller.is_two_phase();
    let mut alg1 = Alg1State::start(cc, &measure(&state));
    let mut alg2 = Alg2State::start(&measure(&state));
    runner.push(&state, 0.0, alg1.delta_t_est, alg1.delta_n_est);

    for i in 1..=config.steps {
        let dt = cc.dt_at(i);
        let before = measure(&state);
        let mut dn = 0.0;
        if two_phase {
            if alg1.parity == Parity::Even {
                let (next_alg1, increment) = match controllers::alg1_even_step(&alg1, cc, &before)
                {
                    Ok(v) => v,
                    Err(_) => {
                        runner
                            .events
                            .push(LoopEvent::MeasurementFailure { step: i });
                        return Ok(());
                    }
                };
                alg1 = next_alg1;
                dn = increment;
            }
        } else {
            let (next_alg2, increment) = controllers::alg2_step(&alg2, cc, &before)?;
            alg2 = next_alg2;
            dn = increment;
        }

        state = match runner.advance(&state, dt, dn, true, i)? {
            Some(s) => s,
            None => return Ok(()),
        };
        let after = measure(&state);
        if two_phase {
            if i % 2 == 1 {
                alg1 = controllers::alg1_odd_step(&alg1, &before, &after)?;
            } else {
                // the rate jump across a controlled interval re-identifies
                // the gain; `before` is the pre-impulse measurement
                alg1 = controllers::alg1_gain_update(&alg1, &before, &after);
            }
            runner.push(&state, dn, alg1.delta_t_est, alg1.delta_n_est);
        } else {
            runner.push(&state, dn, 0.0, cc.delta_n_init);
        }
    }
    Ok(())
}

fn run_modified(config: &LoopConfig, runner: &mut Runner) -> Result<(), LoopError> {
    let cc = &config.controller_config;
    let dt = cc.dt_at(1);
    let two_phase = config.controller.is_two_phase();
    let mut state = config.initial;
    runner.push(&state, 0.0, 0.0, cc.delta_n_init);

    // warm-up: one uncontrolled interval to obtain the first rate sample;
    // its end is boundary 1, so controlled step i ends at boundary i + 1
    let prev_q = state.q;
    state = match runner.advance(&state, dt, 0.0, false, 1)? {
        Some(s) => s,
        None => return Ok(()),
    };
    runner.push(&state, 0.0, 0.0, cc.delta_n_init);
    let mut raw = match controllers::lambda_finite_difference(state.q, prev_q, dt) {
        Ok(v) => v,
        Err(_) => {
            runner
                .events
                .push(LoopEvent::MeasurementFailure { step: 1 });
            return Ok(());
        }
    };

    let mut dt_est = 0.0f64;
    let mut dn_est = cc.delta_n_init;
    let mut dt_frozen = false;
    let mut dn_frozen = false;
    let mut lam_adv = raw;
    let mut last_dn = 0.0f64;

    for i in 1..=config.steps {
        let synthetic = Measurement {
            q: state.q,
            lambda: lam_adv,
            t: state.t,
        };
        let dn = if two_phase {
            if i % 2 == 1 {
                0.0
            } else {
                let decision = Alg1State {
                    parity: Parity::Even,
                    delta_t_est: dt_est,
                    delta_n_est: dn_est,
                    last_lambda: lam_adv,
                    last_q: state.q,
                    last_dn,
                    step_index: i,
                };
                match controllers::alg1_even_step(&decision, cc, &synthetic) {
                    Ok((_, dn)) => dn,
                    Err(_) => {
                        runner
                            .events
                            .push(LoopEvent::MeasurementFailure { step: i });
                        return Ok(());
                    }
                }
            }
        } else {
            let carried = Alg2State {
                last_lambda: lam_adv,
                last_q: state.q,
            };
            match controllers::alg2_step(&carried, cc, &synthetic) {
                Ok((_, dn)) => dn,
                Err(_) => {
                    runner
                        .events
                        .push(LoopEvent::MeasurementFailure { step: i });
                    return Ok(());
                }
            }
        };

        let prev_q = state.q;
        state = match runner.advance(&state, dt, dn, false, i + 1)? {
            Some(s) => s,
            None => return Ok(()),
        };
        let raw_next = match controllers::lambda_finite_difference(state.q, prev_q, dt) {
            Ok(v) => v,
            Err(_) => {
                runner.push(&state, dn, dt_est, dn_est);
                runner
                    .events
                    .push(LoopEvent::MeasurementFailure { step: i + 1 });
                return Ok(());
            }
        };

        if two_phase {
            if i % 2 == 1 {
                if !dt_frozen {
                    // uncontrolled interval: the mid-interval rate moved by
                    // drift plus half the previous ramp's tail effect
                    dt_est = (raw_next - raw - dn_est * last_dn / 2.0) / dt;
                    dt_frozen = true;
                }
            } else if dn.abs() > controllers::dn_epsilon(dn) && !dn_frozen {
                let cand = 2.0 * ((raw_next - raw) - dt_est * dt) / dn;
                if cand * cc.delta_n_init > 0.0 {
                    dn_est = cand;
                    dn_frozen = true;
                }
            }
            lam_adv = raw_next + dt_est * dt / 2.0 + dn_est * dn / 2.0;
        } else {
            lam_adv = raw_next;
        }
        last_dn = dn;
        raw = raw_next;
        runner.push(&state, dn, dt_est, dn_est);
    }
    Ok(())
}

/// First record index holding a post-control state, and the stride
/// between successive ones.
fn post_control_indexing(kind: ControllerKind) -> (usize, usize) {
    match kind {
        ControllerKind::Algorithm1 => (2, 2),
        ControllerKind::Modified1 => (3, 2),
        ControllerKind::Algorithm2 => (1, 1),
        ControllerKind::Modified2 => (2, 1),
    }
}

/// Record index seeding a map comparison (first decision instant with
/// locked estimates), and the stride between decision instants.
fn equivalence_indexing(kind: ControllerKind) -> (usize, usize) {
    match kind {
        ControllerKind::Algorithm1 => (3, 2),
        ControllerKind::Modified1 => (4, 2),
        ControllerKind::Algorithm2 => (0, 1),
        ControllerKind::Modified2 => (1, 1),
    }
}

fn residual_against_map(
    records: &[TrajectoryRecord],
    kind: ControllerKind,
    map: &MapSpec,
) -> Option<f64> {
    let (seed, stride) = equivalence_indexing(kind);
    if records.len() <= seed + stride {
        return None;
    }
    let mut scale_q = 0.0f64;
    let mut scale_l = 0.0f64;
    for r in records {
        scale_q = scale_q.max(r.q.abs());
        scale_l = scale_l.max(r.lambda.abs());
    }
    if scale_q == 0.0 {
        scale_q = 1.0;
    }
    if scale_l == 0.0 {
        scale_l = 1.0;
    }
    let mut point = MapPoint {
        q: records[seed].q,
        lambda: records[seed].lambda,
    };
    let mut worst = 0.0f64;
    let mut k = seed + stride;
    while k < records.len() {
        point = match map.step(&point) {
            Ok(p) => p,
            Err(_) => break,
        };
        let rq = (point.q - records[k].q).abs() / scale_q;
        let rl = (point.lambda - records[k].lambda).abs() / scale_l;
        worst = worst.max(rq).max(rl);
        k += stride;
    }
    Some(worst)
}

/// Runs the loop and reports the worst relative deviation, over both
/// coordinates, between the recorded decision-instant states and the
/// discrete map iterated from the first locked-estimate decision state.
/// Scales are the largest `|Q|` and `|lambda|` seen along the run.
///
/// Idealized loops on the exact plant track their map to roundoff; the
/// modified variants deviate by a step-dependent amount that shrinks with
/// `dt`. The map family must match the controller (first map for the
/// two-phase algorithms, second map for the every-step ones), and the map
/// parameters must match the loop's.
pub fn map_equivalence_check(config: &LoopConfig, map: &MapSpec) -> Result<f64, LoopError> {
    let cc = &config.controller_config;
    let schedule_dt = match cc.dt_schedule {
        DtSchedule::Constant(dt) => dt,
        DtSchedule::Sequence(_) => {
            return Err(LoopError::EquivalenceMode(
                "map comparison requires a constant step schedule",
            ))
        }
    };
    let matches_loop = |lt: f64, qs: f64, d_t: f64, dt: f64| {
        lt == cc.lambda_tilde
            && qs == cc.q_setpoint
            && d_t == config.plant.delta_t
            && dt == schedule_dt
    };
    match map {
        MapSpec::Map1(p) => {
            if !config.controller.is_two_phase() {
                return Err(LoopError::EquivalenceMode(
                    "the first map describes the two-phase algorithm",
                ));
            }
            if !matches_loop(p.lambda_tilde, p.q_setpoint, p.delta_t, p.dt) {
                return Err(LoopError::EquivalenceMode(
                    "map parameters do not match the loop",
                ));
            }
        }
        MapSpec::Map2(p) => {
            if config.controller.is_two_phase() {
                return Err(LoopError::EquivalenceMode(
                    "the second map describes the every-step algorithm",
                ));
            }
            if !matches_loop(p.lambda_tilde, p.q_setpoint, p.delta_t, p.dt)
                || p.delta_n != config.plant.delta_n
                || p.delta_n_tilde != cc.delta_n_init
            {
                return Err(LoopError::EquivalenceMode(
                    "map parameters do not match the loop",
                ));
            }
        }
        MapSpec::Reduced { .. } => {
            return Err(LoopError::EquivalenceMode(
                "the reduced map has no closed-loop counterpart",
            ))
        }
    }
    let trajectory = run_loop(config)?;
    residual_against_map(&trajectory.records, config.controller, map).ok_or(
        LoopError::InvalidConfig("not enough steps for an equivalence comparison"),
    )
}

/// First value (and its index) in `values` ending a window of
/// [`SETTLE_WINDOW`] consecutive entries whose successive relative
/// differences all stay within [`SETTLE_REL_TOL`].
fn settle_scan(values: &[f64]) -> Option<(f64, usize)> {
    if values.len() < SETTLE_WINDOW {
        return None;
    }
    for end in (SETTLE_WINDOW - 1)..values.len() {
        let window = &values[end + 1 - SETTLE_WINDOW..=end];
        let settled = window
            .windows(2)
            .all(|pair| (pair[1] - pair[0]).abs() <= SETTLE_REL_TOL * pair[0].abs());
        if settled {
            return Some((window[SETTLE_WINDOW - 1], end));
        }
    }
    None
}

/// One step size of a [`convergence_study`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// Settled post-control quantity, if the run settled.
    pub steady_q: Option<f64>,
    /// The idealized limit this variant is measured against: the setpoint
    /// for the two-phase algorithms, the second map's step-dependent
    /// fixed point for the every-step ones.
    pub reference_q: Option<f64>,
    /// `|steady_q - reference_q|`.
    pub steady_error: Option<f64>,
    /// Worst both-coordinate deviation from the matching discrete map.
    pub map_residual: Option<f64>,
    /// Record index at which the settle window first closed.
    pub settle_step: Option<usize>,
}

/// Result of [`convergence_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// True when at least two rows settled, every row settled with a
    /// reference, and the steady errors strictly decrease down the list.
    pub errors_strictly_decreasing: bool,
}

/// Reruns `template` once per step size in `dt_list` (replacing the
/// schedule with a constant step) and reports, for each, the settled
/// quantity, its distance from the idealized limit, and the map residual.
pub fn convergence_study(
    template: &LoopConfig,
    dt_list: &[f64],
) -> Result<ConvergenceStudy, LoopError> {
    let mut rows = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let cc = &template.controller_config;
        let controller_config = ControllerConfig::new(
            cc.lambda_tilde,
            cc.q_setpoint,
            cc.delta_n_init,
            dt,
        )?;
        let config = LoopConfig {
            controller_config,
            ..template.clone()
        };
        let trajectory = run_loop(&config)?;
        let records = &trajectory.records;

        let (start, stride) = post_control_indexing(config.controller);
        let control_q: Vec<f64> = records
            .iter()
            .skip(start)
            .step_by(stride)
            .map(|r| r.q)
            .collect();
        let settled = settle_scan(&control_q);
        let steady_q = settled.map(|(q, _)| q);
        let settle_step = settled.map(|(_, idx)| start + stride * idx);

        let cc = &config.controller_config;
        let (reference_q, map) = if config.controller.is_two_phase() {
            let map = maps::Map1Params::new(cc.lambda_tilde, cc.q_setpoint, config.plant.delta_t, dt)
                .map(MapSpec::Map1)
                .ok();
            (Some(cc.q_setpoint), map)
        } else {
            let params = maps::Map2Params::new(
                cc.lambda_tilde,
                cc.q_setpoint,
                config.plant.delta_n,
                config.plant.delta_t,
                cc.delta_n_init,
                dt,
            );
            let reference = params
                .as_ref()
                .ok()
                .and_then(|p| maps::fixed_point_map2(p).ok())
                .map(|fp| fp.q);
            (reference, params.map(MapSpec::Map2).ok())
        };
        let steady_error = match (steady_q, reference_q) {
            (Some(s), Some(r)) => Some((s - r).abs()),
            _ => None,
        };
        let map_residual =
            map.and_then(|m| residual_against_map(records, config.controller, &m));

        rows.push(ConvergenceRow {
            dt,
            steady_q,
            reference_q,
            steady_error,
            map_residual,
            settle_step,
        });
    }
    let errors_strictly_decreasing = rows.len() >= 2
        && rows.iter().all(|r| r.steady_error.is_some())
        && rows
            .windows(2)
            .all(|pair| pair[0].steady_error.unwrap() > pair[1].steady_error.unwrap());
    Ok(ConvergenceStudy {
        rows,
        errors_strictly_decreasing,
    })
}
