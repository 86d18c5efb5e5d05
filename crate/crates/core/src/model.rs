//! Quarter-car plant: parameters, state, equations of motion and modal analysis.
//!
//! Sign convention: displacements and velocities are positive upward, the
//! relative (suspension) velocity is `v_s - v_u`, and a damper force `f` acts
//! `+f` on the sprung mass and `-f` on the unsprung mass.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Quarter-car masses and stiffnesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Sprung mass (kg).
    pub m_s: f64,
    /// Unsprung mass (kg).
    pub m_u: f64,
    /// Passive damping coefficient (N·s/m).
    pub c_s: f64,
    /// Suspension spring constant (N/m).
    pub k_s: f64,
    /// Tire stiffness (N/m).
    pub k_t: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m_s: 320.0,
            m_u: 45.0,
            c_s: 1500.0,
            k_s: 22_000.0,
            k_t: 192_000.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vehicle.m_s", self.m_s),
            ("vehicle.m_u", self.m_u),
            ("vehicle.c_s", self.c_s),
            ("vehicle.k_s", self.k_s),
            ("vehicle.k_t", self.k_t),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Spring plus passive damper force on the sprung mass.
    pub fn suspension_force(&self, s: &SimState) -> f64 {
        -self.k_s * (s.z_s - s.z_u) - self.c_s * (s.v_s - s.v_u)
    }
}

/// Plant state: two displacements, two velocities and the Bouc-Wen
/// hysteresis variable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub z_s: f64,
    pub z_u: f64,
    pub v_s: f64,
    pub v_u: f64,
    pub x: f64,
}

impl SimState {
    pub const ZERO: SimState = SimState {
        z_s: 0.0,
        z_u: 0.0,
        v_s: 0.0,
        v_u: 0.0,
        x: 0.0,
    };

    pub fn to_array(self) -> [f64; 5] {
        [self.z_s, self.z_u, self.v_s, self.v_u, self.x]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            z_s: a[0],
            z_u: a[1],
            v_s: a[2],
            v_u: a[3],
            x: a[4],
        }
    }

    /// Relative (suspension) velocity `v_s - v_u`.
    pub fn v_rel(&self) -> f64 {
        self.v_s - self.v_u
    }

    /// Suspension deflection `z_s - z_u`.
    pub fn travel(&self) -> f64 {
        self.z_s - self.z_u
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        ensure_finite("state", &self.to_array())
    }
}

/// Proportional and derivative gains of the PD-Skygroundhook law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub p_sky: f64,
    pub d_sky: f64,
    pub p_gr: f64,
    pub d_gr: f64,
}

impl PdGains {
    /// Published tuned gains.
    pub const PUBLISHED: PdGains = PdGains {
        p_sky: 7400.0,
        d_sky: 5600.0,
        p_gr: 440.0,
        d_gr: 50.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_sky", self.p_sky),
            ("d_sky", self.d_sky),
            ("p_gr", self.p_gr),
            ("d_gr", self.d_gr),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("gain must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p_sky, self.d_sky, self.p_gr, self.d_gr]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            p_sky: v[0],
            d_sky: v[1],
            p_gr: v[2],
            d_gr: v[3],
        }
    }

    /// Determinant of the coupled mass matrix.
    pub fn mass_determinant(&self, p: &VehicleParams) -> f64 {
        (p.m_s + self.d_sky) * (p.m_u + self.d_gr) - self.d_gr * self.d_sky
    }
}

/// Accelerations of the sprung and unsprung masses (m/s²).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accel {
    pub a_s: f64,
    pub a_u: f64,
}

/// Equations of motion with the damper force applied equal-and-opposite.
pub fn passive_accelerations(state: &SimState, p: &VehicleParams, z_r: f64, f_mr: f64) -> Result<Accel> {
    state.check_finite()?;
    ensure_finite("road/force", &[z_r, f_mr])?;
    Ok(passive_accelerations_unchecked(state, p, z_r, f_mr))
}

#[inline]
pub(crate) fn passive_accelerations_unchecked(state: &SimState, p: &VehicleParams, z_r: f64, f_mr: f64) -> Accel {
    let f_s = p.suspension_force(state);
    let f_t = -p.k_t * (state.z_u - z_r);
    Accel {
        a_s: (f_s + f_mr) / p.m_s,
        a_u: (-f_s + f_t - f_mr) / p.m_u,
    }
}

/// Accelerations with the PD derivative terms moved into the mass matrix,
/// i.e. an ideal actuator producing the PD force exactly.
///
/// Solves `A a = B` with
/// `A = [[m_s + d_sky, -d_gr], [-d_sky, m_u + d_gr]]`.
pub fn coupled_accelerations(
    state: &SimState,
    p: &VehicleParams,
    g: &PdGains,
    z_r: f64,
    f_d: f64,
) -> Result<Accel> {
    state.check_finite()?;
    ensure_finite("road/force", &[z_r, f_d])?;
    coupled_accelerations_unchecked(state, p, g, z_r, f_d)
}

#[inline]
pub(crate) fn coupled_accelerations_unchecked(
    state: &SimState,
    p: &VehicleParams,
    g: &PdGains,
    z_r: f64,
    f_d: f64,
) -> Result<Accel> {
    let a11 = p.m_s + g.d_sky;
    let a12 = -g.d_gr;
    let a21 = -g.d_sky;
    let a22 = p.m_u + g.d_gr;
    let det = a11 * a22 - a12 * a21;
    if !(det.abs() >= 1e-12 * p.m_s * p.m_u) {
        return Err(Error::SingularMatrix { det });
    }

    let f_s = p.suspension_force(state);
    let f_t = -p.k_t * (state.z_u - z_r);
    let p_terms = -g.p_sky * state.v_s + g.p_gr * state.v_u;
    let b1 = f_s + f_d + p_terms;
    let b2 = (-f_s + f_t - f_d) - p_terms;

    // Eliminate a_u through the second row; with zero derivative gains this
    // reduces bit-for-bit to the passive equations.
    let pivot = a11 - g.d_gr * g.d_sky / a22;
    let a_s = (b1 + g.d_gr * b2 / a22) / pivot;
    let a_u = (b2 + g.d_sky * a_s) / a22;
    Ok(Accel { a_s, a_u })
}

/// Undamped natural frequencies (rad/s), ascending.
///
/// Roots of `ω⁴ m_s m_u − ω² (k_s m_u + k_s m_s + k_t m_s) + k_s k_t = 0`,
/// solved as a quadratic in `ω²`.
pub fn natural_frequencies(p: &VehicleParams) -> Result<(f64, f64)> {
    ensure_finite("vehicle", &[p.m_s, p.m_u, p.k_s, p.k_t])?;
    if p.m_s <= 0.0 || p.m_u <= 0.0 || p.k_s < 0.0 || p.k_t < 0.0 {
        return Err(Error::invalid("vehicle", "masses must be positive and stiffnesses nonnegative"));
    }
    let a = p.m_s * p.m_u;
    let b = -(p.k_s * p.m_u + p.k_s * p.m_s + p.k_t * p.m_s);
    let c = p.k_s * p.k_t;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant(disc));
    }
    // b <= 0, so -b + sqrt(disc) has no cancellation; the small root comes
    // from the product of roots.
    let big = (-b + disc.sqrt()) / (2.0 * a);
    let small = if big > 0.0 { c / (a * big) } else { 0.0 };
    Ok((small.max(0.0).sqrt(), big.max(0.0).sqrt()))
}
