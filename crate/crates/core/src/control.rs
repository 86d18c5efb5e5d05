//! Semi-active control laws and the force-to-voltage actuation pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::damper::{self, BoucWenParams};
use crate::error::{ensure_finite, Error, Result};
use crate::model::{PdGains, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Passive,
    Skyhook,
    Groundhook,
    Skygroundhook,
    PdSkygroundhook,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Passive,
        ControllerKind::Skyhook,
        ControllerKind::Groundhook,
        ControllerKind::Skygroundhook,
        ControllerKind::PdSkygroundhook,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Passive => "passive",
            ControllerKind::Skyhook => "skyhook",
            ControllerKind::Groundhook => "groundhook",
            ControllerKind::Skygroundhook => "skygroundhook",
            ControllerKind::PdSkygroundhook => "pd_skygroundhook",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("controller.kind", format!("unknown controller `{s}`")))
    }
}

/// A control law together with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    Passive,
    Skyhook { c_sky: f64 },
    Groundhook { c_gr: f64 },
    Skygroundhook { c_sky: f64, c_gr: f64, c_passive: f64 },
    PdSkygroundhook(PdGains),
}

impl ControllerSpec {
    pub fn kind(&self) -> ControllerKind {
        match self {
            ControllerSpec::Passive => ControllerKind::Passive,
            ControllerSpec::Skyhook { .. } => ControllerKind::Skyhook,
            ControllerSpec::Groundhook { .. } => ControllerKind::Groundhook,
            ControllerSpec::Skygroundhook { .. } => ControllerKind::Skygroundhook,
            ControllerSpec::PdSkygroundhook(_) => ControllerKind::PdSkygroundhook,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs: &[(&str, f64)] = match self {
            ControllerSpec::Passive => &[],
            ControllerSpec::Skyhook { c_sky } => &[("c_sky", *c_sky)],
            ControllerSpec::Groundhook { c_gr } => &[("c_gr", *c_gr)],
            ControllerSpec::Skygroundhook { c_sky, c_gr, c_passive } => {
                &[("c_sky", *c_sky), ("c_gr", *c_gr), ("c_passive", *c_passive)]
            }
            ControllerSpec::PdSkygroundhook(g) => return g.validate(),
        };
        for (name, v) in coeffs {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::invalid(format!("controller.{name}"), format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Tunable gains as a flat vector (empty for Passive).
    pub fn gains(&self) -> Vec<f64> {
        match *self {
            ControllerSpec::Passive => vec![],
            ControllerSpec::Skyhook { c_sky } => vec![c_sky],
            ControllerSpec::Groundhook { c_gr } => vec![c_gr],
            ControllerSpec::Skygroundhook { c_sky, c_gr, .. } => vec![c_sky, c_gr],
            ControllerSpec::PdSkygroundhook(g) => g.to_array().to_vec(),
        }
    }

    /// Same law with its tunable gains replaced; `c_passive` is kept.
    pub fn with_gains(&self, theta: &[f64]) -> ControllerSpec {
        assert_eq!(theta.len(), self.gains().len(), "gain vector length");
        match *self {
            ControllerSpec::Passive => ControllerSpec::Passive,
            ControllerSpec::Skyhook { .. } => ControllerSpec::Skyhook { c_sky: theta[0] },
            ControllerSpec::Groundhook { .. } => ControllerSpec::Groundhook { c_gr: theta[0] },
            ControllerSpec::Skygroundhook { c_passive, .. } => ControllerSpec::Skygroundhook {
                c_sky: theta[0],
                c_gr: theta[1],
                c_passive,
            },
            ControllerSpec::PdSkygroundhook(_) => ControllerSpec::PdSkygroundhook(PdGains::from_slice(theta)),
        }
    }

    /// Desired damper force for the current state.
    ///
    /// `acc` is the acceleration estimate fed to the derivative terms; only
    /// the PD law reads it.
    pub fn desired_force(&self, s: &SimState, acc_s: f64, acc_u: f64) -> f64 {
        let v_rel = s.v_rel();
        match *self {
            ControllerSpec::Passive => 0.0,
            ControllerSpec::Skyhook { c_sky } => skyhook_force(s.v_s, v_rel, c_sky),
            ControllerSpec::Groundhook { c_gr } => groundhook_force(s.v_u, v_rel, c_gr),
            ControllerSpec::Skygroundhook { c_sky, c_gr, c_passive } => {
                skygroundhook_force(s.v_s, s.v_u, v_rel, c_sky, c_gr, c_passive)
            }
            ControllerSpec::PdSkygroundhook(g) => pd_skygroundhook_force(s.v_s, acc_s, s.v_u, acc_u, &g),
        }
    }
}

/// On-off skyhook: `-c_sky v_rel` while body and suspension velocities agree in sign.
pub fn skyhook_force(v_s: f64, v_rel: f64, c_sky: f64) -> f64 {
    if v_s * v_rel > 0.0 {
        -c_sky * v_rel
    } else {
        0.0
    }
}

/// On-off groundhook: `-c_gr v_rel` while wheel and suspension velocities disagree in sign.
pub fn groundhook_force(v_u: f64, v_rel: f64, c_gr: f64) -> f64 {
    if v_u * v_rel < 0.0 {
        -c_gr * v_rel
    } else {
        0.0
    }
}

/// Hybrid law; a single skyhook condition gates both sky and ground terms.
pub fn skygroundhook_force(v_s: f64, v_u: f64, v_rel: f64, c_sky: f64, c_gr: f64, c_passive: f64) -> f64 {
    if v_s * v_rel > 0.0 {
        -c_sky * v_s - c_gr * v_u
    } else {
        -c_passive * v_rel
    }
}

pub fn pd_skygroundhook_force(v_s: f64, a_s: f64, v_u: f64, a_u: f64, g: &PdGains) -> f64 {
    -g.p_sky * v_s - g.d_sky * a_s - g.p_gr * v_u - g.d_gr * a_u
}

/// How a desired force is turned into a damper command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    /// Invert the Bouc-Wen model for a voltage.
    #[default]
    Inversion,
    /// Clamp the equivalent viscous coefficient to `[0, c_max]`.
    Clamp,
}

/// One control update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ControlCommand {
    pub f_desired: f64,
    pub voltage: f64,
    pub saturated: bool,
    /// Force the damper produces at the step-start state.
    pub f_realized: f64,
    /// Viscous coefficient held in Clamp mode (unused for Inversion).
    pub c_clamp: f64,
}

pub fn actuate(f_desired: f64, state: &SimState, bw: &BoucWenParams, mode: Actuation) -> Result<ControlCommand> {
    state.check_finite()?;
    ensure_finite("desired force", &[f_desired])?;
    let v_rel = state.v_rel();
    let z_rel = state.travel();
    match mode {
        Actuation::Inversion => {
            let req = damper::required_voltage(f_desired, v_rel, state.x, bw)?;
            let f_realized = damper::mr_force(v_rel, z_rel, state.x, req.voltage, bw)?;
            Ok(ControlCommand {
                f_desired,
                voltage: req.voltage,
                saturated: req.saturated,
                f_realized,
                c_clamp: 0.0,
            })
        }
        Actuation::Clamp => {
            let c = damper::semi_active_clamp(f_desired, v_rel, bw.c_max());
            let f_realized = -c * v_rel;
            let req = damper::required_voltage(f_realized, v_rel, state.x, bw)?;
            Ok(ControlCommand {
                f_desired,
                voltage: req.voltage,
                saturated: f_realized != f_desired,
                f_realized,
                c_clamp: c,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vel(v_s: f64, v_u: f64) -> SimState {
        SimState { v_s, v_u, ..SimState::ZERO }
    }

    #[test]
    fn skyhook_branches() {
        assert_relative_eq!(skyhook_force(0.1, 0.2, 17_000.0), -3400.0, epsilon = 1e-9);
        assert_eq!(skyhook_force(0.1, -0.2, 17_000.0), 0.0);
        assert_eq!(skyhook_force(0.0, 0.2, 17_000.0), 0.0);
        assert_eq!(skyhook_force(0.1, 0.0, 17_000.0), 0.0);
    }

    #[test]
    fn groundhook_branches() {
        assert_relative_eq!(groundhook_force(0.2, -0.1, 4000.0), 400.0, epsilon = 1e-9);
        assert_eq!(groundhook_force(0.2, 0.1, 4000.0), 0.0);
        assert_eq!(groundhook_force(0.0, -0.1, 4000.0), 0.0);
    }

    #[test]
    fn skygroundhook_branches() {
        let f = skygroundhook_force(0.1, -0.05, 0.15, 25_500.0, 1150.0, 1500.0);
        assert_relative_eq!(f, -2492.5, epsilon = 1e-9);
        let f = skygroundhook_force(0.1, 0.2, -0.1, 25_500.0, 1150.0, 1500.0);
        assert_relative_eq!(f, 150.0, epsilon = 1e-9);
        assert_eq!(skygroundhook_force(0.0, 0.0, 0.0, 25_500.0, 1150.0, 1500.0), 0.0);
    }

    #[test]
    fn pd_values() {
        let g = PdGains::PUBLISHED;
        assert_relative_eq!(pd_skygroundhook_force(0.1, 1.0, 0.0, 0.0, &g), -6340.0, epsilon = 1e-9);
        assert_eq!(pd_skygroundhook_force(0.0, 0.0, 0.0, 0.0, &g), 0.0);
        assert_eq!(pd_skygroundhook_force(0.3, -2.0, 0.1, 9.0, &PdGains::default()), 0.0);
    }

    #[test]
    fn spec_dispatch_reads_velocities() {
        let s = vel(0.1, -0.1);
        let sky = ControllerSpec::Skyhook { c_sky: 17_000.0 };
        assert_relative_eq!(sky.desired_force(&s, 0.0, 0.0), -3400.0, epsilon = 1e-9);
        assert_eq!(ControllerSpec::Passive.desired_force(&s, 5.0, 5.0), 0.0);
    }

    #[test]
    fn zero_force_inversion_floors_at_zero_volts() {
        let bw = BoucWenParams::default();
        let s = vel(0.3, 0.1);
        let cmd = actuate(0.0, &s, &bw, Actuation::Inversion).unwrap();
        assert_eq!(cmd.voltage, 0.0);
        assert!(cmd.saturated);
        assert_relative_eq!(cmd.f_realized, -bw.c_oa * 0.2, epsilon = 1e-9);
    }

    #[test]
    fn inversion_reproduces_attainable_force() {
        let bw = BoucWenParams::default();
        let s = SimState { v_s: 0.25, v_u: -0.05, x: 2e-5, ..SimState::ZERO };
        let f = damper::mr_force(s.v_rel(), 0.0, s.x, 3.0, &bw).unwrap();
        let cmd = actuate(f, &s, &bw, Actuation::Inversion).unwrap();
        assert_relative_eq!(cmd.voltage, 3.0, epsilon = 1e-12);
        assert_relative_eq!(cmd.f_realized, f, epsilon = 1e-9);
    }

    #[test]
    fn clamp_mode_without_relative_velocity_has_no_force() {
        let bw = BoucWenParams::default();
        let s = vel(0.2, 0.2 - 1e-8);
        let cmd = actuate(-500.0, &s, &bw, Actuation::Clamp).unwrap();
        assert_eq!(cmd.f_realized, 0.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ControllerKind::ALL {
            assert_eq!(k.name().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("fuzzy".parse::<ControllerKind>().is_err());
    }

    #[test]
    fn with_gains_keeps_passive_coefficient() {
        let sgh = ControllerSpec::Skygroundhook { c_sky: 1.0, c_gr: 2.0, c_passive: 3.0 };
        assert_eq!(
            sgh.with_gains(&[4.0, 5.0]),
            ControllerSpec::Skygroundhook { c_sky: 4.0, c_gr: 5.0, c_passive: 3.0 }
        );
        assert_eq!(sgh.with_gains(&sgh.gains()), sgh);
    }

    proptest! {
        #[test]
        fn commands_respect_bounds_and_dissipate(
            f in -2e4f64..2e4, v_s in -1.0f64..1.0, v_u in -1.0f64..1.0, x in -1e-4f64..1e-4,
        ) {
            let bw = BoucWenParams::default();
            let s = SimState { v_s, v_u, x, ..SimState::ZERO };
            let clamp = actuate(f, &s, &bw, Actuation::Clamp).unwrap();
            prop_assert!(clamp.f_realized * s.v_rel() <= 0.0);
            prop_assert!((0.0..=bw.v_max).contains(&clamp.voltage));

            let inv = actuate(f, &s, &bw, Actuation::Inversion).unwrap();
            prop_assert!((0.0..=bw.v_max).contains(&inv.voltage));

            let s0 = SimState { x: 0.0, ..s };
            let inv0 = actuate(f, &s0, &bw, Actuation::Inversion).unwrap();
            prop_assert!(inv0.f_realized * s0.v_rel() <= 0.0);
        }

        #[test]
        fn zero_gain_pd_commands_nothing(v_s in -2.0f64..2.0, a_s in -50.0f64..50.0, v_u in -2.0f64..2.0, a_u in -500.0f64..500.0) {
            prop_assert_eq!(pd_skygroundhook_force(v_s, a_s, v_u, a_u, &PdGains::default()), 0.0);
        }
    }
}
