//! Closed-loop time integration, trajectory recording and ride metrics.
//!
//! Each control step computes the controller output and damper command at
//! the step start and holds it (zero-order hold) while the plant is advanced
//! by RK4. In explicit mode the Bouc-Wen hysteresis equation becomes stiff
//! at high relative velocity, so the held step is split into as many equal
//! RK4 substeps as needed to keep `(q + b) |v_rel| h` below
//! [`STIFFNESS_LIMIT`].

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{actuate, Actuation, ControlCommand, ControllerSpec};
use crate::damper::{hysteresis_rate, mr_force_unchecked, BoucWenParams};
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::model::{
    coupled_accelerations_unchecked, passive_accelerations_unchecked, Accel, PdGains, SimState, VehicleParams,
};
use crate::road::{fmt_f64, RoadProfile};

/// Upper bound on `(q + b) |v_rel| h` for one RK4 substep.
pub const STIFFNESS_LIMIT: f64 = 1.0;

/// Hard cap on substeps per control step.
pub const MAX_SUBSTEPS: usize = 4096;

/// Explicit-mode steps larger than this trigger a warning.
pub const EXPLICIT_DT_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantMode {
    /// Damper force from the Bouc-Wen model at the commanded voltage.
    #[default]
    Explicit,
    /// Ideal actuator: the controller force is applied exactly and the
    /// hysteresis state is frozen.
    Implicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub plant_mode: PlantMode,
    pub actuation: Actuation,
    pub controller: ControllerSpec,
    pub vehicle: VehicleParams,
    pub damper: BoucWenParams,
    pub road: RoadProfile,
    pub record_stride: usize,
    /// Hysteresis weight in the energy function (diagnostic only).
    pub beta: f64,
    pub initial: SimState,
    pub accel_feedback: AccelFeedback,
}

/// Acceleration estimate fed to the PD law in explicit mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelFeedback {
    /// Plant accelerations sensed at the current state under the command
    /// held over the previous step (one-step delay).
    Delayed,
    /// Ideal-actuator accelerations from the coupled mass-matrix model at the
    /// current state.
    #[default]
    ModelPredicted,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 5.0,
            plant_mode: PlantMode::Explicit,
            actuation: Actuation::Inversion,
            controller: ControllerSpec::Passive,
            vehicle: VehicleParams::default(),
            damper: BoucWenParams::default(),
            road: RoadProfile::Flat,
            record_stride: 1,
            beta: 1.0,
            initial: SimState::ZERO,
            accel_feedback: AccelFeedback::ModelPredicted,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("sim.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::invalid("sim.t_end", format!("must be >= dt, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("sim.record_stride", "must be at least 1"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::invalid("sim.beta", "must be >= 0"));
        }
        self.vehicle.validate()?;
        self.damper.validate()?;
        self.controller.validate()?;
        self.initial.check_finite()?;
        if self.plant_mode == PlantMode::Explicit && self.dt > EXPLICIT_DT_WARN {
            log::warn!("explicit mode with dt = {} s exceeds {} s", self.dt, EXPLICIT_DT_WARN);
        }
        Ok(())
    }

    /// Number of integration steps covering `[0, t_end]`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// Per-step record of what the controller did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub command: ControlCommand,
    /// Accelerations at the step-start state under the held command.
    pub acc: Accel,
    pub z_r: f64,
    pub substeps: usize,
}

/// Control-law output and plant accelerations at `(state, t)`.
///
/// `acc_feedback` is the acceleration estimate available to the PD law.
pub fn control_update(state: &SimState, t: f64, cfg: &SimConfig, acc_feedback: Accel) -> Result<StepDiagnostics> {
    state.check_finite()?;
    let z_r = cfg.road.height(t);
    let (command, acc) = match cfg.plant_mode {
        PlantMode::Explicit => {
            let f_des = cfg.controller.desired_force(state, acc_feedback.a_s, acc_feedback.a_u);
            let command = actuate(f_des, state, &cfg.damper, cfg.actuation)?;
            let acc = passive_accelerations_unchecked(state, &cfg.vehicle, z_r, command.f_realized);
            (command, acc)
        }
        PlantMode::Implicit => {
            let (acc, f) = ideal_dynamics(state, &cfg.vehicle, &cfg.controller, z_r)?;
            let command = ControlCommand {
                f_desired: f,
                voltage: 0.0,
                saturated: false,
                f_realized: f,
                c_clamp: 0.0,
            };
            (command, acc)
        }
    };
    Ok(StepDiagnostics {
        command,
        acc,
        z_r,
        substeps: 1,
    })
}

/// Ideal-actuator accelerations and the control force they imply.
fn ideal_dynamics(state: &SimState, p: &VehicleParams, ctrl: &ControllerSpec, z_r: f64) -> Result<(Accel, f64)> {
    match ctrl {
        ControllerSpec::PdSkygroundhook(g) => {
            let acc = coupled_accelerations_unchecked(state, p, g, z_r, 0.0)?;
            Ok((acc, implicit_pd_force(state, &acc, g)))
        }
        other => {
            let f = other.desired_force(state, 0.0, 0.0);
            Ok((passive_accelerations_unchecked(state, p, z_r, f), f))
        }
    }
}

/// Control force on the sprung mass embodied by the coupled matrix form.
fn implicit_pd_force(s: &SimState, acc: &Accel, g: &PdGains) -> f64 {
    -g.p_sky * s.v_s - g.d_sky * acc.a_s + g.p_gr * s.v_u + g.d_gr * acc.a_u
}

fn substeps_for(state: &SimState, cfg: &SimConfig) -> usize {
    if cfg.plant_mode == PlantMode::Implicit {
        return 1;
    }
    let rate = (cfg.damper.q + cfg.damper.b) * state.v_rel().abs();
    let n = (rate * cfg.dt / STIFFNESS_LIMIT).ceil();
    if n.is_finite() {
        (n as usize).clamp(1, MAX_SUBSTEPS)
    } else {
        MAX_SUBSTEPS
    }
}

/// Advances `state` from `t` by one control step of `cfg.dt`.
///
/// Returns the new state and the diagnostics of the command held during the
/// step.
pub fn step(state: &SimState, t: f64, cfg: &SimConfig, prev_acc: Accel) -> Result<(SimState, StepDiagnostics)> {
    let mut diag = control_update(state, t, cfg, prev_acc)?;
    let next = advance(state, t, cfg, &diag.command, &mut diag.substeps)?;
    Ok((next, diag))
}

fn advance(state: &SimState, t: f64, cfg: &SimConfig, cmd: &ControlCommand, substeps: &mut usize) -> Result<SimState> {
    let n = substeps_for(state, cfg);
    *substeps = n;
    let h = cfg.dt / n as f64;
    let p = &cfg.vehicle;
    let bw = &cfg.damper;

    let mut y = state.to_array();
    for i in 0..n {
        let ts = t + i as f64 * h;
        y = match cfg.plant_mode {
            PlantMode::Explicit => rk4_step(ts, &y, h, |tt, y| {
                let s = SimState::from_array(*y);
                let f = held_force(&s, cmd, cfg.actuation, bw);
                let a = passive_accelerations_unchecked(&s, p, cfg.road.height(tt), f);
                [s.v_s, s.v_u, a.a_s, a.a_u, hysteresis_rate(s.x, s.v_rel(), bw)]
            }),
            PlantMode::Implicit => {
                let mut err = None;
                let out = rk4_step(ts, &y, h, |tt, y| {
                    let s = SimState::from_array(*y);
                    match ideal_dynamics(&s, p, &cfg.controller, cfg.road.height(tt)) {
                        Ok((a, _)) => [s.v_s, s.v_u, a.a_s, a.a_u, 0.0],
                        Err(e) => {
                            err.get_or_insert(e);
                            [f64::NAN; 5]
                        }
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
                out
            }
        };
    }
    let next = SimState::from_array(y);
    if !next.is_finite() {
        return Err(Error::Divergence { t: t + cfg.dt, dt: cfg.dt });
    }
    Ok(next)
}

/// Damper force under a held command at an intermediate state.
#[inline]
fn held_force(s: &SimState, cmd: &ControlCommand, actuation: Actuation, bw: &BoucWenParams) -> f64 {
    match actuation {
        Actuation::Inversion => mr_force_unchecked(s.v_rel(), s.travel(), s.x, cmd.voltage, bw),
        Actuation::Clamp => -cmd.c_clamp * s.v_rel(),
    }
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub state: SimState,
    pub a_s: f64,
    pub a_u: f64,
    pub f_desired: f64,
    pub f_realized: f64,
    pub voltage: f64,
    pub z_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub vehicle: VehicleParams,
    pub beta: f64,
}

pub const TRAJECTORY_HEADER: &str = "t,z_s,z_u,v_s,v_u,x,a_s,a_u,f_desired,f_realized,voltage,z_r";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 260);
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for s in &self.samples {
            let row = [
                s.t, s.state.z_s, s.state.z_u, s.state.v_s, s.state.v_u, s.state.x, s.a_s, s.a_u, s.f_desired,
                s.f_realized, s.voltage, s.z_r,
            ];
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the closed loop from `cfg.initial` over `[0, t_end]`.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n_steps();
    let mut samples = Vec::with_capacity(n / cfg.record_stride + 1);
    let mut state = cfg.initial;
    // Sensed accelerations: the plant response at the current state under
    // the command held over the previous step.
    let mut sensed = Accel::default();

    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        let feedback = match (cfg.accel_feedback, &cfg.controller) {
            (AccelFeedback::ModelPredicted, ControllerSpec::PdSkygroundhook(g)) => {
                coupled_accelerations_unchecked(&state, &cfg.vehicle, g, cfg.road.height(t), 0.0)?
            }
            _ => sensed,
        };
        let diag = control_update(&state, t, cfg, feedback)?;
        if k % cfg.record_stride == 0 {
            samples.push(Sample {
                t,
                state,
                a_s: diag.acc.a_s,
                a_u: diag.acc.a_u,
                f_desired: diag.command.f_desired,
                f_realized: diag.command.f_realized,
                voltage: diag.command.voltage,
                z_r: diag.z_r,
            });
        }
        if k == n {
            break;
        }
        let mut substeps = 1;
        let next = advance(&state, t, cfg, &diag.command, &mut substeps)?;
        let t_next = (k + 1) as f64 * cfg.dt;
        sensed = match cfg.plant_mode {
            PlantMode::Explicit => {
                let f = held_force(&next, &diag.command, cfg.actuation, &cfg.damper);
                passive_accelerations_unchecked(&next, &cfg.vehicle, cfg.road.height(t_next), f)
            }
            PlantMode::Implicit => Accel::default(),
        };
        state = next;
    }

    Ok(Trajectory {
        samples,
        vehicle: cfg.vehicle,
        beta: cfg.beta,
    })
}

/// Ride-quality statistics of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub rms_a_s: f64,
    pub rms_a_u: f64,
    /// Peak suspension travel (mm).
    pub peak_travel: f64,
    /// RMS suspension travel (mm).
    pub rms_travel: f64,
    /// Peak dynamic tire load (N).
    pub peak_tire_load: f64,
    pub rms_tire_load: f64,
    /// Largest energy rise over an unforced sample interval (J).
    pub energy_monitor_max_rise: f64,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Metrics over samples with `t >= skip`.
pub fn compute_metrics(traj: &Trajectory, skip: f64) -> Result<Metrics> {
    let window: Vec<&Sample> = traj.samples.iter().filter(|s| s.t >= skip).collect();
    if window.is_empty() {
        return Err(Error::EmptyWindow(format!("no samples at t >= {skip}")));
    }
    let k_t = traj.vehicle.k_t;
    let travel = || window.iter().map(|s| s.state.travel() * 1e3);
    let tire = || window.iter().map(|s| k_t * (s.state.z_u - s.z_r));
    Ok(Metrics {
        rms_a_s: rms(window.iter().map(|s| s.a_s)),
        rms_a_u: rms(window.iter().map(|s| s.a_u)),
        peak_travel: travel().fold(0.0, |m, v| m.max(v.abs())),
        rms_travel: rms(travel()),
        peak_tire_load: tire().fold(0.0, |m, v| m.max(v.abs())),
        rms_tire_load: rms(tire()),
        energy_monitor_max_rise: energy_monitor(traj, &traj.vehicle, traj.beta),
    })
}

/// Stored energy `½m_s v_s² + ½m_u v_u² + ½k_s (z_s−z_u)² + ½k_t (z_u−z_r)² + ½β x²`.
pub fn energy(s: &SimState, z_r: f64, p: &VehicleParams, beta: f64) -> f64 {
    0.5 * p.m_s * s.v_s * s.v_s
        + 0.5 * p.m_u * s.v_u * s.v_u
        + 0.5 * p.k_s * s.travel().powi(2)
        + 0.5 * p.k_t * (s.z_u - z_r).powi(2)
        + 0.5 * beta * s.x * s.x
}

/// Largest single-interval rise of [`energy`] over intervals in which the
/// road height does not change; 0 if it never rises.
pub fn energy_monitor(traj: &Trajectory, p: &VehicleParams, beta: f64) -> f64 {
    traj.samples
        .windows(2)
        .filter(|w| w[0].z_r == w[1].z_r)
        .map(|w| energy(&w[1].state, w[1].z_r, p, beta) - energy(&w[0].state, w[0].z_r, p, beta))
        .fold(0.0, f64::max)
}

/// `100 (baseline − candidate) / baseline`.
pub fn percent_reduction(baseline: f64, candidate: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::invalid("baseline", format!("must be positive, got {baseline}")));
    }
    Ok(100.0 * (baseline - candidate) / baseline)
}

/// Steady-state response at one excitation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub freq_hz: f64,
    pub rms_a_s: f64,
    pub rms_a_u: f64,
    /// `rms_a_s` over the RMS road acceleration.
    pub gain_s: f64,
    /// `rms_a_u` over the RMS road acceleration.
    pub gain_u: f64,
}

/// Stepped-sine frequency response: for each frequency run a pure sine road,
/// discard `cycles_settle` cycles, and take RMS accelerations over the next
/// `cycles_measure` cycles. `base.road` is ignored.
pub fn frequency_response(
    base: &SimConfig,
    freqs: &[f64],
    amplitude: f64,
    cycles_settle: u32,
    cycles_measure: u32,
) -> Result<Vec<FrequencyPoint>> {
    if freqs.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::invalid("sweep.freqs", "frequencies must be positive"));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep.freqs", "frequencies must be strictly ascending"));
    }
    if cycles_measure == 0 {
        return Err(Error::invalid("sweep.cycles_measure", "must be at least 1"));
    }
    freqs
        .par_iter()
        .map(|&f| {
            let settle = cycles_settle as f64 / f;
            let cfg = SimConfig {
                road: RoadProfile::Sine { freq: f, amplitude },
                t_end: settle + cycles_measure as f64 / f,
                record_stride: 1,
                ..base.clone()
            };
            let traj = simulate(&cfg)?;
            let m = compute_metrics(&traj, settle - 0.5 * cfg.dt)?;
            let road_acc = amplitude.abs() * (TAU * f).powi(2) * FRAC_1_SQRT_2;
            let gain = |v: f64| if road_acc > 0.0 { v / road_acc } else { 0.0 };
            Ok(FrequencyPoint {
                freq_hz: f,
                rms_a_s: m.rms_a_s,
                rms_a_u: m.rms_a_u,
                gain_s: gain(m.rms_a_s),
                gain_u: gain(m.rms_a_u),
            })
        })
        .collect()
}

/// Resonance peak in one band of a frequency response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub value: f64,
}

/// Peaks of a frequency response near the two modes.
///
/// The body mode is read from sprung acceleration below the geometric mean
/// of the two natural frequencies; the wheel-hop mode from unsprung
/// acceleration above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePeaks {
    pub body: Peak,
    pub wheel: Peak,
}

pub fn mode_peaks(points: &[FrequencyPoint], omega: (f64, f64)) -> Result<ModePeaks> {
    let split = (omega.0 * omega.1).sqrt() / TAU;
    let argmax = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        pts.fold(None, |best: Option<Peak>, (f, v)| match best {
            Some(b) if b.value >= v => Some(b),
            _ => Some(Peak { freq_hz: f, value: v }),
        })
    };
    let body = argmax(&mut points.iter().filter(|p| p.freq_hz < split).map(|p| (p.freq_hz, p.gain_s)));
    let wheel = argmax(&mut points.iter().filter(|p| p.freq_hz >= split).map(|p| (p.freq_hz, p.gain_u)));
    match (body, wheel) {
        (Some(body), Some(wheel)) => Ok(ModePeaks { body, wheel }),
        _ => Err(Error::invalid(
            "sweep.freqs",
            format!("frequency grid must span both sides of {split:.3} Hz"),
        )),
    }
}

/// Uniform grid `start, start + step, ...` up to `stop` inclusive.
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}
