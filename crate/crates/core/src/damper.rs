//! Bouc-Wen magnetorheological damper model.
//!
//! Force law (dissipative sign convention):
//!
//! ```text
//! F  = -(c_oa + c_ob V) v_rel - k_0 z_rel + (alpha_a + alpha_b V) x
//! ẋ  = -q |v_rel| x - b v_rel |x| + gamma v_rel
//! ```
//!
//! The hysteresis variable `x` is carried in [`SimState`](crate::model::SimState);
//! everything here is a pure function.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Smallest denominator magnitude (N/V) for which the voltage inversion is attempted.
pub const DENOMINATOR_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoucWenParams {
    /// Base viscous coefficient (N·s/m).
    pub c_oa: f64,
    /// Viscous slope with voltage (N·s/(m·V)).
    pub c_ob: f64,
    /// Base elastic term (N).
    pub alpha_a: f64,
    /// Elastic slope with voltage (N/V).
    pub alpha_b: f64,
    pub q: f64,
    pub b: f64,
    pub gamma: f64,
    /// Stiffness term (N/m).
    pub k_0: f64,
    /// Maximum coil voltage (V).
    pub v_max: f64,
}

impl Default for BoucWenParams {
    fn default() -> Self {
        Self {
            c_oa: 2100.0,
            c_ob: 3500.0,
            alpha_a: 1400.0,
            alpha_b: 69_500.0,
            q: 48_000.0,
            b: 48_000.0,
            gamma: 4.0,
            k_0: 0.0,
            v_max: 5.0,
        }
    }
}

impl BoucWenParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("damper.c_oa", self.c_oa),
            ("damper.c_ob", self.c_ob),
            ("damper.alpha_a", self.alpha_a),
            ("damper.alpha_b", self.alpha_b),
            ("damper.q", self.q),
            ("damper.b", self.b),
            ("damper.k_0", self.k_0),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("must be >= 0 and finite, got {v}")));
            }
        }
        for (name, v) in [("damper.gamma", self.gamma), ("damper.v_max", self.v_max)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Viscous coefficient at voltage `v`.
    pub fn viscous(&self, v: f64) -> f64 {
        self.c_oa + self.c_ob * v
    }

    /// Hysteresis scaling at voltage `v`.
    pub fn elastic(&self, v: f64) -> f64 {
        self.alpha_a + self.alpha_b * v
    }

    /// Largest attainable viscous coefficient, `c_oa + c_ob v_max`.
    pub fn c_max(&self) -> f64 {
        self.viscous(self.v_max)
    }
}

pub fn mr_force(v_rel: f64, z_rel: f64, x: f64, voltage: f64, bw: &BoucWenParams) -> Result<f64> {
    ensure_finite("damper input", &[v_rel, z_rel, x, voltage])?;
    if !(0.0..=bw.v_max).contains(&voltage) {
        return Err(Error::VoltageOutOfRange { voltage, v_max: bw.v_max });
    }
    Ok(mr_force_unchecked(v_rel, z_rel, x, voltage, bw))
}

#[inline]
pub(crate) fn mr_force_unchecked(v_rel: f64, z_rel: f64, x: f64, voltage: f64, bw: &BoucWenParams) -> f64 {
    -bw.viscous(voltage) * v_rel - bw.k_0 * z_rel + bw.elastic(voltage) * x
}

#[inline]
pub fn hysteresis_rate(x: f64, v_rel: f64, bw: &BoucWenParams) -> f64 {
    -bw.q * v_rel.abs() * x - bw.b * v_rel * x.abs() + bw.gamma * v_rel
}

/// Result of inverting the damper model for a desired force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageRequest {
    pub voltage: f64,
    /// Set when the raw voltage was clamped or the inversion was undefined.
    pub saturated: bool,
}

/// Voltage that makes the damper produce `f_d`, clamped to `[0, v_max]`.
///
/// Near `c_ob v_rel = alpha_b x` the inversion is undefined; the result is
/// then 0 V with `saturated` set.
pub fn required_voltage(f_d: f64, v_rel: f64, x: f64, bw: &BoucWenParams) -> Result<VoltageRequest> {
    ensure_finite("voltage request", &[f_d, v_rel, x])?;
    let den = bw.c_ob * v_rel - bw.alpha_b * x;
    if den.abs() < DENOMINATOR_GUARD {
        return Ok(VoltageRequest { voltage: 0.0, saturated: true });
    }
    let raw = (-bw.c_oa * v_rel + bw.alpha_a * x - f_d) / den;
    let voltage = raw.clamp(0.0, bw.v_max);
    Ok(VoltageRequest {
        voltage,
        saturated: voltage != raw,
    })
}

/// Effective viscous coefficient realizing `f_d` without injecting energy.
///
/// The realized force is `-C v_rel`; at `|v_rel| <= DENOMINATOR_GUARD` the
/// damper has no authority and `C = 0`.
pub fn semi_active_clamp(f_d: f64, v_rel: f64, c_max: f64) -> f64 {
    if v_rel.abs() <= DENOMINATOR_GUARD || !f_d.is_finite() {
        return 0.0;
    }
    (-f_d / v_rel).clamp(0.0, c_max)
}
