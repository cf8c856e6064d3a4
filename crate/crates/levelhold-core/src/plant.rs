//! The controlled plant: `Q' = (delta_N * N + delta_t * t) * Q`.
//!
//! `Q` grows exponentially at the instantaneous rate
//! `lambda = delta_N * N + delta_t * t`. The control variable `N` enters the
//! rate linearly with gain `delta_N`; `delta_t` is an uncontrolled drift.
//! Because the law is linear in `(N, t)`, evolution over an interval has a
//! closed form, both for constant `N` ([`evolve_exact`]) and for `N` ramped
//! uniformly across the interval ([`evolve_ramped`]). A fixed-step RK4
//! integrator ([`rk4_step`]) covers general systems that follow the same
//! rate law without exposing it in closed form.

use core::fmt;

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Plant coefficients: control gain `delta_N` and time drift `delta_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Rate change per unit of N. Must be nonzero: control must have effect.
    pub delta_n: f64,
    /// Rate drift per unit time.
    pub delta_t: f64,
}

impl PlantParams {
    pub fn new(delta_n: f64, delta_t: f64) -> Result<Self, PlantError> {
        if delta_n == 0.0 || !delta_n.is_finite() || !delta_t.is_finite() {
            return Err(PlantError::InvalidParams);
        }
        Ok(PlantParams { delta_n, delta_t })
    }

    /// Instantaneous growth rate `delta_N * N + delta_t * t`.
    pub fn growth_rate(&self, n: f64, t: f64) -> f64 {
        self.delta_n * n + self.delta_t * t
    }
}

/// Plant state at one instant.
///
/// `lambda` is always recomputed from `(N, t)`, never accumulated, so the
/// rate-jump identity under impulses holds exactly and no drift accrues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub t: f64,
    pub q: f64,
    pub n: f64,
    pub lambda: f64,
}

impl PlantState {
    /// State at `(t, q, n)` with `lambda` derived from the plant law.
    pub fn new(t: f64, q: f64, n: f64, params: &PlantParams) -> Self {
        PlantState {
            t,
            q,
            n,
            lambda: params.growth_rate(n, t),
        }
    }

    /// True once `Q` has underflowed to exact floating-point zero.
    ///
    /// This is an observable phenomenon of the dynamics (the orbit is then
    /// captured on the invariant `Q = 0` ray), not an error.
    pub fn is_computer_zero(&self) -> bool {
        self.q == 0.0
    }
}

/// Errors from plant evolution and integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantError {
    /// `exp` overflowed while evolving `Q`.
    QuantityOverflow,
    /// Non-finite derivative or state during numerical integration.
    IntegrationFailure,
    /// Step duration outside the operation's domain.
    InvalidStep,
    /// Parameter or system description violates an invariant.
    InvalidParams,
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::QuantityOverflow => write!(f, "quantity overflow"),
            PlantError::IntegrationFailure => write!(f, "integration failure"),
            PlantError::InvalidStep => write!(f, "invalid step duration"),
            PlantError::InvalidParams => write!(f, "invalid plant parameters"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PlantError {}

/// Evolves the plant over `dt` with `N` held constant.
///
/// The log-gain over the interval is `lambda(t0) * dt + delta_t * dt^2 / 2`,
/// the exact integral of the rate law.
pub fn evolve_exact(
    state: &PlantState,
    params: &PlantParams,
    dt: f64,
) -> Result<PlantState, PlantError> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(PlantError::InvalidStep);
    }
    let lam0 = params.growth_rate(state.n, state.t);
    let gain = lam0 * dt + params.delta_t * dt * dt * 0.5;
    let q = state.q * gain.exp();
    if !q.is_finite() {
        return Err(PlantError::QuantityOverflow);
    }
    let t = state.t + dt;
    Ok(PlantState {
        t,
        q,
        n: state.n,
        lambda: params.growth_rate(state.n, t),
    })
}

/// Adds `dn` to `N` instantaneously. `Q` and `t` are unchanged; the rate
/// jumps by `delta_N * dn` (through recomputation of `lambda`).
pub fn apply_impulse(state: &PlantState, params: &PlantParams, dn: f64) -> PlantState {
    let n = state.n + dn;
    PlantState {
        t: state.t,
        q: state.q,
        n,
        lambda: params.growth_rate(n, state.t),
    }
}

/// Evolves the plant over `dt` while `N` ramps uniformly by `dn_total`.
///
/// With `N(s) = N + dn_total * (s - t) / dt` the log-gain integral is
/// `lambda(t0) * dt + delta_N * dn_total * dt / 2 + delta_t * dt^2 / 2`;
/// the final state has `N + dn_total`.
pub fn evolve_ramped(
    state: &PlantState,
    params: &PlantParams,
    dt: f64,
    dn_total: f64,
) -> Result<PlantState, PlantError> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(PlantError::InvalidStep);
    }
    let lam0 = params.growth_rate(state.n, state.t);
    let gain = lam0 * dt + params.delta_n * dn_total * dt * 0.5 + params.delta_t * dt * dt * 0.5;
    let q = state.q * gain.exp();
    if !q.is_finite() {
        return Err(PlantError::QuantityOverflow);
    }
    let t = state.t + dt;
    let n = state.n + dn_total;
    Ok(PlantState {
        t,
        q,
        n,
        lambda: params.growth_rate(n, t),
    })
}

/// A general first-order system `dx/dt = rhs(t, x)` with designated `Q` and
/// `N` components, for plants only available through integration.
pub struct OdeSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    dimension: usize,
    q_index: usize,
    n_index: usize,
    rhs: F,
}

impl<F> OdeSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    /// `dimension >= 2`; `q_index` and `n_index` distinct and in range.
    pub fn new(
        dimension: usize,
        q_index: usize,
        n_index: usize,
        rhs: F,
    ) -> Result<Self, PlantError> {
        if dimension < 2 || q_index == n_index || q_index >= dimension || n_index >= dimension {
            return Err(PlantError::InvalidParams);
        }
        Ok(OdeSystem {
            dimension,
            q_index,
            n_index,
            rhs,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn q_index(&self) -> usize {
        self.q_index
    }

    pub fn n_index(&self) -> usize {
        self.n_index
    }

    pub fn eval(&self, t: f64, state: &[f64], out: &mut [f64]) {
        (self.rhs)(t, state, out)
    }
}

/// The two-state realization of the plant law:
/// `Q' = delta_N * N * Q`, `N' = delta_t / delta_N + ramp_rate`.
///
/// With `ramp_rate = 0` and `N(t0)` chosen so that
/// `delta_N * N(t0) = lambda(t0)`, the `Q` trajectory coincides with the
/// scalar law (the time drift is carried by `N` itself). A nonzero
/// `ramp_rate` realizes uniform ramping of the control variable.
pub fn growth_system(
    params: PlantParams,
    ramp_rate: f64,
) -> OdeSystem<impl Fn(f64, &[f64], &mut [f64])> {
    let rhs = move |_t: f64, y: &[f64], out: &mut [f64]| {
        out[0] = params.delta_n * y[1] * y[0];
        out[1] = params.delta_t / params.delta_n + ramp_rate;
    };
    // invariant: dimension 2 with indices (0, 1) always validates
    OdeSystem::new(2, 0, 1, rhs).unwrap()
}

/// One classical fourth-order Runge-Kutta step of size `h` from `t`.
pub fn rk4_step<F>(
    system: &OdeSystem<F>,
    t: f64,
    state: &[f64],
    h: f64,
) -> Result<Vec<f64>, PlantError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !h.is_finite() || h <= 0.0 {
        return Err(PlantError::InvalidStep);
    }
    let dim = system.dimension();
    if state.len() != dim {
        return Err(PlantError::InvalidParams);
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    system.eval(t, state, &mut k1);
    for i in 0..dim {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    system.eval(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..dim {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    system.eval(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..dim {
        tmp[i] = state[i] + h * k3[i];
    }
    system.eval(t + h, &tmp, &mut k4);

    let mut out = vec![0.0; dim];
    for i in 0..dim {
        let slope = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        if !slope.is_finite() {
            return Err(PlantError::IntegrationFailure);
        }
        out[i] = state[i] + h * slope;
        if !out[i].is_finite() {
            return Err(PlantError::IntegrationFailure);
        }
    }
    Ok(out)
}
