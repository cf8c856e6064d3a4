//! The six subcommands: resolve parameters (flags over config file),
//! call the library, render CSV or JSON.

use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use levelhold_core::bifurcation::{
    iterate_orbit, scan_cascade, BifurcationError, MapSpec, OrbitSummary, ScanSettings,
};
use levelhold_core::closedloop::{
    convergence_study, run_loop, ControllerKind, LoopConfig, LoopError, LoopEvent,
    MeasurementMode, PlantMode, Trajectory,
};
use levelhold_core::controllers::ControllerConfig;
use levelhold_core::maps::{
    attractor_rectangle, fixed_point_map2_zero, invariant_curve_q, stability_map2,
    stability_map1, Map1Params, Map2Params, MapError, MapPoint, StabilityReport,
};
use levelhold_core::plant::{PlantParams, PlantState};

use crate::errors::CliError;
use crate::render::{csv_line, emit, float, json_text, opt_float, opt_usize, parse_format, Format};
use crate::resolve::Resolver;
use crate::{Cli, Command};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let resolver = Resolver::new(cli.config.as_deref())?;
    let output = match cli.output {
        Some(path) => Some(path),
        None => resolver
            .string(None, "output")?
            .map(PathBuf::from),
    };
    let format = parse_format(&resolver.string_or(cli.format, "format", "csv")?)?;
    let sink = Sink {
        output,
        format,
    };
    match cli.command {
        Command::Simulate(args) => simulate(&resolver, &sink, args),
        Command::Stability(args) => stability(&resolver, &sink, args),
        Command::Scan(args) => scan(&resolver, &sink, args),
        Command::Orbit(args) => orbit(&resolver, &sink, args),
        Command::Bounds(args) => bounds(&resolver, &sink, args),
        Command::Converge(args) => converge(&resolver, &sink, args),
    }
}

struct Sink {
    output: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn write(&self, text: &str) -> Result<(), CliError> {
        emit(text, self.output.as_deref())
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn map_params_usage(e: MapError) -> CliError {
    CliError::Usage(e.to_string())
}

fn loop_error(e: LoopError) -> CliError {
    match e {
        LoopError::InvalidConfig(_) | LoopError::EquivalenceMode(_) => usage(e),
        LoopError::Plant(_) | LoopError::Controller(_) => numerical(e),
    }
}

fn bifurcation_error(e: BifurcationError) -> CliError {
    match e {
        BifurcationError::InvalidArgument(_) => usage(e),
        BifurcationError::OrbitDiverged { .. } | BifurcationError::NoFlipInBracket => {
            numerical(e)
        }
    }
}

fn controller_kind(name: &str) -> Result<ControllerKind, CliError> {
    match name {
        "1" => Ok(ControllerKind::Algorithm1),
        "2" => Ok(ControllerKind::Algorithm2),
        "modified1" => Ok(ControllerKind::Modified1),
        "modified2" => Ok(ControllerKind::Modified2),
        other => Err(CliError::Usage(format!(
            "algorithm: expected 1, 2, modified1 or modified2, got '{other}'"
        ))),
    }
}

fn plant_mode(name: &str) -> Result<PlantMode, CliError> {
    match name {
        "exact" => Ok(PlantMode::Exact),
        "ramped" => Ok(PlantMode::Ramped),
        "ode" => Ok(PlantMode::Ode),
        other => Err(CliError::Usage(format!(
            "plant: expected exact, ramped or ode, got '{other}'"
        ))),
    }
}

fn event_label(event: &LoopEvent) -> (&'static str, usize) {
    match event {
        LoopEvent::ComputerZero { step } => ("computer-zero", *step),
        LoopEvent::Overflow { step } => ("overflow", *step),
        LoopEvent::IntegrationFailure { step } => ("integration-failure", *step),
        LoopEvent::MeasurementFailure { step } => ("measurement-failure", *step),
    }
}

fn is_fatal(event: &LoopEvent) -> bool {
    !matches!(event, LoopEvent::ComputerZero { .. })
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Controller: 1, 2, modified1 or modified2
    #[arg(long)]
    algorithm: Option<String>,
    /// Sampling step
    #[arg(long)]
    dt: Option<f64>,
    /// Rate scale of the feedback target law
    #[arg(long)]
    lambda_tilde: Option<f64>,
    /// Quantity setpoint
    #[arg(long)]
    q_setpoint: Option<f64>,
    /// True actuator gain of the plant
    #[arg(long)]
    delta_n: Option<f64>,
    /// True drift rate of the plant
    #[arg(long)]
    delta_t: Option<f64>,
    /// Controller's actuator gain guess, the divisor of every correction
    #[arg(long)]
    delta_n_tilde: Option<f64>,
    /// Initial quantity
    #[arg(long)]
    q0: Option<f64>,
    /// Initial actuator level [default: 1]
    #[arg(long)]
    n0: Option<f64>,
    /// Initial time [default: 0]
    #[arg(long)]
    t0: Option<f64>,
    /// Number of controlled sampling intervals
    #[arg(long)]
    steps: Option<usize>,
    /// Plant model: exact, ramped or ode [default: exact for algorithms
    /// 1 and 2, ramped for the modified variants]
    #[arg(long)]
    plant: Option<String>,
}

struct LoopSetup {
    config: LoopConfig,
}

fn resolve_loop(r: &Resolver, args: SimulateArgs) -> Result<LoopSetup, CliError> {
    let kind = controller_kind(&r.require_string(args.algorithm, "algorithm")?)?;
    let dt = r.require_f64(args.dt, "dt")?;
    let lambda_tilde = r.require_f64(args.lambda_tilde, "lambda-tilde")?;
    let q_setpoint = r.require_f64(args.q_setpoint, "q-setpoint")?;
    let delta_n = r.require_f64(args.delta_n, "delta-n")?;
    let delta_t = r.require_f64(args.delta_t, "delta-t")?;
    let delta_n_tilde = r.require_f64(args.delta_n_tilde, "delta-n-tilde")?;
    let q0 = r.require_f64(args.q0, "q0")?;
    let n0 = r.f64_or(args.n0, "n0", 1.0)?;
    let t0 = r.f64_or(args.t0, "t0", 0.0)?;
    let steps = r.require_usize(args.steps, "steps")?;
    let default_plant = if kind.is_idealized() { "exact" } else { "ramped" };
    let mode = plant_mode(&r.string_or(args.plant, "plant", default_plant)?)?;
    let measurement = if kind.is_idealized() {
        MeasurementMode::Instantaneous
    } else {
        MeasurementMode::FiniteDifference
    };
    let plant = PlantParams::new(delta_n, delta_t).map_err(usage)?;
    let controller_config =
        ControllerConfig::new(lambda_tilde, q_setpoint, delta_n_tilde, dt).map_err(usage)?;
    Ok(LoopSetup {
        config: LoopConfig {
            plant,
            plant_mode: mode,
            measurement_mode: measurement,
            controller: kind,
            controller_config,
            initial: PlantState::new(t0, q0, n0, &plant),
            steps,
        },
    })
}

fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut text = String::from("step,t,Q,lambda,N,dN,delta_t_est,delta_n_est,event\n");
    for (i, record) in trajectory.records.iter().enumerate() {
        let events: Vec<&str> = trajectory
            .events
            .iter()
            .map(event_label)
            .filter(|(_, step)| *step == i)
            .map(|(kind, _)| kind)
            .collect();
        text.push_str(&csv_line(&[
            i.to_string(),
            float(record.t),
            float(record.q),
            float(record.lambda),
            float(record.n),
            float(record.dn_applied),
            float(record.delta_t_est),
            float(record.delta_n_est),
            events.join(";"),
        ]));
    }
    text
}

fn trajectory_json(trajectory: &Trajectory) -> Value {
    let records: Vec<Value> = trajectory
        .records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let events: Vec<&str> = trajectory
                .events
                .iter()
                .map(event_label)
                .filter(|(_, step)| *step == i)
                .map(|(kind, _)| kind)
                .collect();
            json!({
                "step": i,
                "t": record.t,
                "Q": record.q,
                "lambda": record.lambda,
                "N": record.n,
                "dN": record.dn_applied,
                "delta_t_est": record.delta_t_est,
                "delta_n_est": record.delta_n_est,
                "event": if events.is_empty() { Value::Null } else { Value::from(events.join(";")) },
            })
        })
        .collect();
    let events: Vec<Value> = trajectory
        .events
        .iter()
        .map(|e| {
            let (kind, step) = event_label(e);
            json!({ "kind": kind, "step": step })
        })
        .collect();
    json!({ "records": records, "events": events })
}

fn simulate(r: &Resolver, sink: &Sink, args: SimulateArgs) -> Result<(), CliError> {
    let setup = resolve_loop(r, args)?;
    let trajectory = run_loop(&setup.config).map_err(loop_error)?;
    let text = match sink.format {
        Format::Csv => trajectory_csv(&trajectory),
        Format::Json => json_text(&trajectory_json(&trajectory)),
    };
    sink.write(&text)?;
    if let Some(event) = trajectory.events.iter().find(|e| is_fatal(e)) {
        let (kind, step) = event_label(event);
        return Err(CliError::Numerical(format!(
            "{kind} at step {step}; trajectory truncated to {} records",
            trajectory.records.len()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- stability

#[derive(Args)]
pub struct StabilityArgs {
    /// Map family: 1 (two-phase) or 2 (every-step)
    #[arg(long)]
    map: Option<String>,
    /// Sampling step of the map
    #[arg(long)]
    dt: Option<f64>,
    /// Rate scale of the feedback target law
    #[arg(long)]
    lambda_tilde: Option<f64>,
    /// Quantity setpoint
    #[arg(long)]
    q_setpoint: Option<f64>,
    /// True drift rate
    #[arg(long)]
    delta_t: Option<f64>,
    /// True actuator gain (map 2)
    #[arg(long)]
    delta_n: Option<f64>,
    /// Controller's actuator gain guess (map 2)
    #[arg(long)]
    delta_n_tilde: Option<f64>,
}

fn stability_json(map: u8, report: &StabilityReport, zero: Option<Value>) -> Value {
    let (e1, e2) = report.eigenvalues;
    let mut value = json!({
        "map": map,
        "fixed_point": { "Q": report.fixed_point.q, "lambda": report.fixed_point.lambda },
        "eigenvalues": [
            { "re": e1.re, "im": e1.im },
            { "re": e2.re, "im": e2.im },
        ],
        "stable": report.stable,
        "small_dt_stable": report.small_dt_stable,
        "critical_dt": report.critical_dt,
        "dt_validity_interval": [report.dt_validity_interval.0, report.dt_validity_interval.1],
        "validity_conflict": report.validity_conflict,
    });
    if let Some(zero_value) = zero {
        value["zero_fixed_point"] = zero_value;
    }
    value
}

fn stability_csv(map: u8, report: &StabilityReport, zero: Option<(f64, bool)>) -> String {
    let (e1, e2) = report.eigenvalues;
    let mut text = String::from("key,value\n");
    let mut push = |key: &str, value: String| {
        text.push_str(&csv_line(&[key.to_string(), value]));
    };
    push("map", map.to_string());
    push("fixed_point_Q", float(report.fixed_point.q));
    push("fixed_point_lambda", float(report.fixed_point.lambda));
    push("eigenvalue_1_re", float(e1.re));
    push("eigenvalue_1_im", float(e1.im));
    push("eigenvalue_2_re", float(e2.re));
    push("eigenvalue_2_im", float(e2.im));
    push("stable", report.stable.to_string());
    push("small_dt_stable", report.small_dt_stable.to_string());
    push("critical_dt", opt_float(report.critical_dt));
    push("dt_validity_lo", float(report.dt_validity_interval.0));
    push("dt_validity_hi", opt_float(report.dt_validity_interval.1));
    push("validity_conflict", report.validity_conflict.to_string());
    if let Some((lambda, stable)) = zero {
        push("zero_fixed_point_lambda", float(lambda));
        push("zero_fixed_point_stable", stable.to_string());
    }
    text
}

fn stability(r: &Resolver, sink: &Sink, args: StabilityArgs) -> Result<(), CliError> {
    let family = r.require_string(args.map, "map")?;
    let dt = r.require_f64(args.dt, "dt")?;
    let lambda_tilde = r.require_f64(args.lambda_tilde, "lambda-tilde")?;
    let q_setpoint = r.require_f64(args.q_setpoint, "q-setpoint")?;
    let delta_t = r.require_f64(args.delta_t, "delta-t")?;
    let text = match family.as_str() {
        "1" => {
            let p = Map1Params::new(lambda_tilde, q_setpoint, delta_t, dt)
                .map_err(map_params_usage)?;
            let report = stability_map1(&p);
            match sink.format {
                Format::Csv => stability_csv(1, &report, None),
                Format::Json => json_text(&stability_json(1, &report, None)),
            }
        }
        "2" => {
            let delta_n = r.require_f64(args.delta_n, "delta-n")?;
            let delta_n_tilde = r.require_f64(args.delta_n_tilde, "delta-n-tilde")?;
            let p = Map2Params::new(lambda_tilde, q_setpoint, delta_n, delta_t, delta_n_tilde, dt)
                .map_err(map_params_usage)?;
            let report = stability_map2(&p);
            let zero = fixed_point_map2_zero(&p);
            match sink.format {
                Format::Csv => {
                    stability_csv(2, &report, Some((zero.point.lambda, zero.stable)))
                }
                Format::Json => {
                    let zero_value = json!({
                        "Q": 0.0,
                        "lambda": zero.point.lambda,
                        "stable": zero.stable,
                    });
                    json_text(&stability_json(2, &report, Some(zero_value)))
                }
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "map: expected 1 or 2, got '{other}'"
            )))
        }
    };
    sink.write(&text)
}

// --------------------------------------------------------------------- scan

#[derive(Args)]
pub struct ScanArgs {
    /// Map family: reduced, 1 or 2 (reduced sweeps the cascade
    /// parameter, the others sweep the sampling step)
    #[arg(long)]
    map: Option<String>,
    /// Lower end of the swept parameter
    #[arg(long)]
    from: Option<f64>,
    /// Upper end of the swept parameter
    #[arg(long)]
    to: Option<f64>,
    /// Number of equal grid intervals (the scan classifies cells+1 grid
    /// values)
    #[arg(long)]
    cells: Option<usize>,
    /// Iterations discarded entering each cell
    #[arg(long)]
    transient: Option<usize>,
    /// Iterations sampled per cell
    #[arg(long)]
    samples: Option<usize>,
    /// Rate scale of the feedback target law (maps 1 and 2)
    #[arg(long)]
    lambda_tilde: Option<f64>,
    /// Quantity setpoint (maps 1 and 2)
    #[arg(long)]
    q_setpoint: Option<f64>,
    /// True drift rate (maps 1 and 2)
    #[arg(long)]
    delta_t: Option<f64>,
    /// True actuator gain (map 2)
    #[arg(long)]
    delta_n: Option<f64>,
    /// Controller's actuator gain guess (map 2)
    #[arg(long)]
    delta_n_tilde: Option<f64>,
}

/// Builds the base map for a scan; for map families whose scanned
/// parameter is `dt`, the range must stay positive.
fn scan_map(r: &Resolver, args: &mut ScanArgs, family: &str, from: f64) -> Result<MapSpec, CliError> {
    match family {
        "reduced" => Ok(MapSpec::Reduced { a: from }),
        "1" | "2" => {
            if from <= 0.0 {
                return Err(CliError::Usage(
                    "from: the scanned step must be positive for map scans".to_string(),
                ));
            }
            let lambda_tilde = r.require_f64(args.lambda_tilde.take(), "lambda-tilde")?;
            let q_setpoint = r.require_f64(args.q_setpoint.take(), "q-setpoint")?;
            let delta_t = r.require_f64(args.delta_t.take(), "delta-t")?;
            if family == "1" {
                let p = Map1Params::new(lambda_tilde, q_setpoint, delta_t, from)
                    .map_err(map_params_usage)?;
                Ok(MapSpec::Map1(p))
            } else {
                let delta_n = r.require_f64(args.delta_n.take(), "delta-n")?;
                let delta_n_tilde = r.require_f64(args.delta_n_tilde.take(), "delta-n-tilde")?;
                let p = Map2Params::new(
                    lambda_tilde,
                    q_setpoint,
                    delta_n,
                    delta_t,
                    delta_n_tilde,
                    from,
                )
                .map_err(map_params_usage)?;
                Ok(MapSpec::Map2(p))
            }
        }
        other => Err(CliError::Usage(format!(
            "map: expected reduced, 1 or 2, got '{other}'"
        ))),
    }
}

fn scan(r: &Resolver, sink: &Sink, mut args: ScanArgs) -> Result<(), CliError> {
    let family = r.require_string(args.map.take(), "map")?;
    let from = r.require_f64(args.from.take(), "from")?;
    let to = r.require_f64(args.to.take(), "to")?;
    let cells = r.require_usize(args.cells.take(), "cells")?;
    if cells == 0 {
        return Err(CliError::Usage("cells: must be at least 1".to_string()));
    }
    let defaults = ScanSettings::default();
    let settings = ScanSettings {
        transient: r.usize_or(args.transient.take(), "transient", defaults.transient)?,
        samples: r.usize_or(args.samples.take(), "samples", defaults.samples)?,
        ..defaults
    };
    let map = scan_map(r, &mut args, &family, from)?;
    let scan = scan_cascade(&map, from, to, cells + 1, &settings).map_err(bifurcation_error)?;
    match sink.format {
        Format::Csv => {
            let mut text = String::from("param,sample_value,period,lyapunov\n");
            for cell in &scan.cells {
                for sample in &cell.samples {
                    text.push_str(&csv_line(&[
                        float(cell.parameter),
                        float(sample.q),
                        opt_usize(cell.period.cycle_len()),
                        float(cell.lyapunov),
                    ]));
                }
            }
            sink.write(&text)?;
            let flips: Vec<String> = scan.flip_points.iter().map(|f| format!("{f}")).collect();
            eprintln!(
                "flip points: [{}]; chaos onset: {}",
                flips.join(", "),
                scan.chaos_onset
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "none".to_string())
            );
        }
        Format::Json => {
            let cells: Vec<Value> = scan
                .cells
                .iter()
                .map(|cell| {
                    let samples: Vec<Value> = cell
                        .samples
                        .iter()
                        .map(|s| json!({ "Q": s.q, "lambda": s.lambda }))
                        .collect();
                    json!({
                        "parameter": cell.parameter,
                        "period": cell.period.cycle_len(),
                        "lyapunov": cell.lyapunov,
                        "underflow_events": cell.underflow_events,
                        "diverged": cell.diverged,
                        "samples": samples,
                    })
                })
                .collect();
            let value = json!({
                "cells": cells,
                "flip_points": scan.flip_points,
                "chaos_onset": scan.chaos_onset,
            });
            sink.write(&json_text(&value))?;
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- orbit

#[derive(Args)]
pub struct OrbitArgs {
    /// Map family: reduced, 1 or 2
    #[arg(long)]
    map: Option<String>,
    /// Cascade parameter (reduced map)
    #[arg(long)]
    a: Option<f64>,
    /// Sampling step (maps 1 and 2)
    #[arg(long)]
    dt: Option<f64>,
    /// Rate scale of the feedback target law (maps 1 and 2)
    #[arg(long)]
    lambda_tilde: Option<f64>,
    /// Quantity setpoint (maps 1 and 2)
    #[arg(long)]
    q_setpoint: Option<f64>,
    /// True drift rate (maps 1 and 2)
    #[arg(long)]
    delta_t: Option<f64>,
    /// True actuator gain (map 2)
    #[arg(long)]
    delta_n: Option<f64>,
    /// Controller's actuator gain guess (map 2)
    #[arg(long)]
    delta_n_tilde: Option<f64>,
    /// Starting quantity [default: the family cold start]
    #[arg(long)]
    q0: Option<f64>,
    /// Starting rate [default: the family cold start]
    #[arg(long)]
    lambda0: Option<f64>,
    /// Iterations discarded before recording [default: 1000]
    #[arg(long)]
    transient: Option<usize>,
    /// Iterations recorded [default: 1000]
    #[arg(long)]
    samples: Option<usize>,
}

fn orbit_map(r: &Resolver, args: &mut OrbitArgs, family: &str) -> Result<MapSpec, CliError> {
    match family {
        "reduced" => Ok(MapSpec::Reduced {
            a: r.require_f64(args.a.take(), "a")?,
        }),
        "1" | "2" => {
            let dt = r.require_f64(args.dt.take(), "dt")?;
            let lambda_tilde = r.require_f64(args.lambda_tilde.take(), "lambda-tilde")?;
            let q_setpoint = r.require_f64(args.q_setpoint.take(), "q-setpoint")?;
            let delta_t = r.require_f64(args.delta_t.take(), "delta-t")?;
            if family == "1" {
                let p = Map1Params::new(lambda_tilde, q_setpoint, delta_t, dt)
                    .map_err(map_params_usage)?;
                Ok(MapSpec::Map1(p))
            } else {
                let delta_n = r.require_f64(args.delta_n.take(), "delta-n")?;
                let delta_n_tilde = r.require_f64(args.delta_n_tilde.take(), "delta-n-tilde")?;
                let p = Map2Params::new(
                    lambda_tilde,
                    q_setpoint,
                    delta_n,
                    delta_t,
                    delta_n_tilde,
                    dt,
                )
                .map_err(map_params_usage)?;
                Ok(MapSpec::Map2(p))
            }
        }
        other => Err(CliError::Usage(format!(
            "map: expected reduced, 1 or 2, got '{other}'"
        ))),
    }
}

fn orbit_json(orbit: &OrbitSummary, transient: usize) -> Value {
    let samples: Vec<Value> = orbit
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| json!({ "step": transient + i + 1, "Q": s.q, "lambda": s.lambda }))
        .collect();
    let ((q_lo, q_hi), (l_lo, l_hi)) = orbit.bounds;
    json!({
        "samples": samples,
        "period": orbit.period.cycle_len(),
        "lyapunov": orbit.lyapunov,
        "bounds": { "Q": [q_lo, q_hi], "lambda": [l_lo, l_hi] },
        "underflow_events": orbit.underflow_events,
        "note": if orbit.underflow_events > 0 {
            Value::from("unreliable: computer zero")
        } else {
            Value::Null
        },
    })
}

fn orbit(r: &Resolver, sink: &Sink, mut args: OrbitArgs) -> Result<(), CliError> {
    let family = r.require_string(args.map.take(), "map")?;
    let transient = r.usize_or(args.transient.take(), "transient", 1000)?;
    let samples = r.usize_or(args.samples.take(), "samples", 1000)?;
    let q0 = r.f64(args.q0.take(), "q0")?;
    let lambda0 = r.f64(args.lambda0.take(), "lambda0")?;
    let map = orbit_map(r, &mut args, &family)?;
    let cold = map.cold_start();
    let start = MapPoint {
        q: q0.unwrap_or(cold.q),
        lambda: lambda0.unwrap_or(cold.lambda),
    };
    let orbit = iterate_orbit(&map, &start, transient, samples).map_err(bifurcation_error)?;
    match sink.format {
        Format::Csv => {
            let mut text = String::from("step,Q,lambda\n");
            for (i, s) in orbit.samples.iter().enumerate() {
                text.push_str(&csv_line(&[
                    (transient + i + 1).to_string(),
                    float(s.q),
                    float(s.lambda),
                ]));
            }
            sink.write(&text)?;
            eprintln!(
                "period: {}; lyapunov: {}{}",
                orbit
                    .period
                    .cycle_len()
                    .map(|p| p.to_string())
                    .unwrap_or_else(|| "aperiodic".to_string()),
                orbit.lyapunov,
                if orbit.underflow_events > 0 {
                    " (unreliable: computer zero)"
                } else {
                    ""
                }
            );
        }
        Format::Json => sink.write(&json_text(&orbit_json(&orbit, transient)))?,
    }
    Ok(())
}

// ------------------------------------------------------------------- bounds

#[derive(Args)]
pub struct BoundsArgs {
    /// Sampling step
    #[arg(long)]
    dt: Option<f64>,
    /// Rate scale of the feedback target law
    #[arg(long)]
    lambda_tilde: Option<f64>,
    /// Quantity setpoint
    #[arg(long)]
    q_setpoint: Option<f64>,
    /// True drift rate
    #[arg(long)]
    delta_t: Option<f64>,
    /// Also emit this many points of the invariant curve, spanning the
    /// rectangle's rate range
    #[arg(long)]
    curve_samples: Option<usize>,
}

fn bounds(r: &Resolver, sink: &Sink, args: BoundsArgs) -> Result<(), CliError> {
    let dt = r.require_f64(args.dt, "dt")?;
    let lambda_tilde = r.require_f64(args.lambda_tilde, "lambda-tilde")?;
    let q_setpoint = r.require_f64(args.q_setpoint, "q-setpoint")?;
    let delta_t = r.require_f64(args.delta_t, "delta-t")?;
    let curve_samples = r.usize(args.curve_samples, "curve-samples")?;
    let p = Map1Params::new(lambda_tilde, q_setpoint, delta_t, dt).map_err(map_params_usage)?;
    let ((q_lo, q_hi), (l_lo, l_hi)) = attractor_rectangle(&p);
    let curve: Option<Vec<(f64, f64)>> = match curve_samples {
        None => None,
        Some(n) => {
            if n < 2 {
                return Err(CliError::Usage(
                    "curve-samples: must be at least 2".to_string(),
                ));
            }
            Some(
                (0..n)
                    .map(|i| {
                        let lambda = l_lo + (l_hi - l_lo) * i as f64 / (n - 1) as f64;
                        (lambda, invariant_curve_q(lambda, &p))
                    })
                    .collect(),
            )
        }
    };
    match sink.format {
        Format::Csv => {
            let text = match &curve {
                Some(points) => {
                    let mut text = String::from("lambda,Q\n");
                    for (lambda, q) in points {
                        text.push_str(&csv_line(&[float(*lambda), float(*q)]));
                    }
                    text
                }
                None => {
                    let mut text = String::from("key,value\n");
                    for (key, value) in [
                        ("q_min", q_lo),
                        ("q_max", q_hi),
                        ("lambda_min", l_lo),
                        ("lambda_max", l_hi),
                        ("cascade_parameter", p.cascade_parameter()),
                    ] {
                        text.push_str(&csv_line(&[key.to_string(), float(value)]));
                    }
                    text
                }
            };
            sink.write(&text)
        }
        Format::Json => {
            let curve_value = match &curve {
                None => Value::Null,
                Some(points) => Value::from(
                    points
                        .iter()
                        .map(|(lambda, q)| json!({ "lambda": lambda, "Q": q }))
                        .collect::<Vec<Value>>(),
                ),
            };
            let value = json!({
                "rectangle": { "Q": [q_lo, q_hi], "lambda": [l_lo, l_hi] },
                "cascade_parameter": p.cascade_parameter(),
                "curve": curve_value,
            });
            sink.write(&json_text(&value))
        }
    }
}

// ----------------------------------------------------------------- converge

#[derive(Args)]
pub struct ConvergeArgs {
    /// Controller: 1, 2, modified1 or modified2
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated list of sampling steps, e.g. 0.4,0.2,0.1,0.05
    #[arg(long)]
    dt_list: Option<String>,
    /// Rate scale of the feedback target law
    #[arg(long)]
    lambda_tilde: Option<f64>,
    /// Quantity setpoint
    #[arg(long)]
    q_setpoint: Option<f64>,
    /// True actuator gain of the plant
    #[arg(long)]
    delta_n: Option<f64>,
    /// True drift rate of the plant
    #[arg(long)]
    delta_t: Option<f64>,
    /// Controller's actuator gain guess
    #[arg(long)]
    delta_n_tilde: Option<f64>,
    /// Initial quantity
    #[arg(long)]
    q0: Option<f64>,
    /// Initial actuator level [default: 1]
    #[arg(long)]
    n0: Option<f64>,
    /// Initial time [default: 0]
    #[arg(long)]
    t0: Option<f64>,
    /// Controlled sampling intervals per run
    #[arg(long)]
    steps: Option<usize>,
    /// Plant model: exact, ramped or ode [default: exact for algorithms
    /// 1 and 2, ramped for the modified variants]
    #[arg(long)]
    plant: Option<String>,
}

fn converge(r: &Resolver, sink: &Sink, args: ConvergeArgs) -> Result<(), CliError> {
    let dt_list = r.require_f64_list(args.dt_list, "dt-list")?;
    let setup = resolve_loop(
        r,
        SimulateArgs {
            algorithm: args.algorithm,
            dt: Some(dt_list[0]),
            lambda_tilde: args.lambda_tilde,
            q_setpoint: args.q_setpoint,
            delta_n: args.delta_n,
            delta_t: args.delta_t,
            delta_n_tilde: args.delta_n_tilde,
            q0: args.q0,
            n0: args.n0,
            t0: args.t0,
            steps: args.steps,
            plant: args.plant,
        },
    )?;
    let study = convergence_study(&setup.config, &dt_list).map_err(loop_error)?;
    match sink.format {
        Format::Csv => {
            let mut text =
                String::from("dt,steady_q,reference_q,steady_error,map_residual,settle_step\n");
            for row in &study.rows {
                text.push_str(&csv_line(&[
                    float(row.dt),
                    opt_float(row.steady_q),
                    opt_float(row.reference_q),
                    opt_float(row.steady_error),
                    opt_float(row.map_residual),
                    opt_usize(row.settle_step),
                ]));
            }
            sink.write(&text)?;
            eprintln!(
                "errors strictly decreasing: {}",
                study.errors_strictly_decreasing
            );
        }
        Format::Json => {
            let rows: Vec<Value> = study
                .rows
                .iter()
                .map(|row| {
                    json!({
                        "dt": row.dt,
                        "steady_q": row.steady_q,
                        "reference_q": row.reference_q,
                        "steady_error": row.steady_error,
                        "map_residual": row.map_residual,
                        "settle_step": row.settle_step,
                    })
                })
                .collect();
            let value = json!({
                "rows": rows,
                "errors_strictly_decreasing": study.errors_strictly_decreasing,
            });
            sink.write(&json_text(&value))?;
        }
    }
    Ok(())
}
