//! Sampled-feedback control of an exponentially growing quantity, and the
//! discrete closed-loop maps that control induces.
//!
//! The plant is the scalar law `Q' = (delta_N * N + delta_t * t) * Q`: a
//! quantity `Q` whose logarithmic growth rate is set by a control variable
//! `N` plus a linear drift in time. Two feedback algorithms hold `Q` at a
//! setpoint by sampling the plant every `dt` and stepping `N`:
//!
//! * algorithm 1 alternates measurement-only steps (which estimate the drift)
//!   with control steps (which estimate the control gain), and
//! * algorithm 2 controls on every step with a fixed assumed gain.
//!
//! On the idealized plant each algorithm is exactly equivalent to a discrete
//! map of `(Q, lambda)`. Those maps are implemented in closed form in
//! [`maps`], analyzed (fixed points, eigenvalues, critical step sizes) there,
//! and explored (orbits, period doubling cascades, Lyapunov exponents) in
//! [`bifurcation`]. The loop simulator in [`closedloop`] couples the real
//! controllers to the plant, checks the loop-vs-map equivalence, and measures
//! how the realizable variants (finite-difference rate measurement, ramped
//! control) converge to the idealized ones as `dt` shrinks.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only switches the float backend and adds `std::error::Error`
//! impls.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bifurcation;
pub mod closedloop;
pub mod controllers;
pub mod maps;
pub mod plant;
