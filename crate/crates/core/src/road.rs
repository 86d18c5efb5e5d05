//! Road elevation profiles.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Default per-draw scale of the Brownian road (m).
pub const BROWNIAN_SCALE: f64 = 0.05;

/// Relative slack allowed when checking uniform spacing of tabulated times.
const SPACING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum RoadProfile {
    Flat,
    /// Half-cosine bump of height `h_b` between `t1` and `t2`.
    Bump { h_b: f64, t1: f64, t2: f64 },
    /// Linear chirp from `f0` to `f1` Hz over `duration` seconds.
    SineSweep { f0: f64, f1: f64, duration: f64, amplitude: f64 },
    /// Pure sine `amplitude * sin(2π f t)`.
    Sine { freq: f64, amplitude: f64 },
    /// Uniformly sampled heights starting at `t0`, linearly interpolated.
    Tabulated { t0: f64, dt: f64, z: Vec<f64> },
}

impl RoadProfile {
    pub fn bump(h_b: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(t2 > t1) {
            return Err(Error::invalid("road.t2", format!("must exceed t1 ({t1}), got {t2}")));
        }
        if !(h_b >= 0.0) || !h_b.is_finite() {
            return Err(Error::invalid("road.h_b", format!("must be >= 0, got {h_b}")));
        }
        Ok(RoadProfile::Bump { h_b, t1, t2 })
    }

    pub fn sine_sweep(f0: f64, f1: f64, duration: f64, amplitude: f64) -> Result<Self> {
        for (name, v) in [("road.f0", f0), ("road.f1", f1), ("road.duration", duration)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !amplitude.is_finite() {
            return Err(Error::invalid("road.amplitude", "must be finite"));
        }
        Ok(RoadProfile::SineSweep { f0, f1, duration, amplitude })
    }

    /// Road height at time `t` (m).
    pub fn height(&self, t: f64) -> f64 {
        match self {
            RoadProfile::Flat => 0.0,
            RoadProfile::Bump { h_b, t1, t2 } => bump(t, *h_b, *t1, *t2),
            RoadProfile::SineSweep { f0, f1, duration, amplitude } => sine_sweep(t, *f0, *f1, *duration, *amplitude),
            RoadProfile::Sine { freq, amplitude } => amplitude * (TAU * freq * t).sin(),
            RoadProfile::Tabulated { t0, dt, z } => interpolate(*t0, *dt, z, t),
        }
    }

    /// Samples of a tabulated profile as `(t, z_r)` pairs.
    pub fn samples(&self) -> Option<impl Iterator<Item = (f64, f64)> + '_> {
        match self {
            RoadProfile::Tabulated { t0, dt, z } => Some(z.iter().enumerate().map(move |(k, &v)| (t0 + k as f64 * dt, v))),
            _ => None,
        }
    }

    /// Writes a tabulated profile as `t,z_r` CSV.
    pub fn to_csv(&self) -> Option<String> {
        let samples = self.samples()?;
        let mut out = String::from("t,z_r\n");
        for (t, z) in samples {
            let _ = writeln!(out, "{},{}", fmt_f64(t), fmt_f64(z));
        }
        Some(out)
    }
}

/// Full-precision decimal rendering (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Half-cosine bump, zero outside `[t1, t2]`.
pub fn bump(t: f64, h_b: f64, t1: f64, t2: f64) -> f64 {
    if t < t1 || t > t2 {
        return 0.0;
    }
    0.5 * h_b * (1.0 - (TAU * (t - t1) / (t2 - t1)).cos())
}

/// Linear chirp `amplitude sin(2π (f0 t + (f1 - f0) t² / (2 duration)))`,
/// zero outside `[0, duration]`.
pub fn sine_sweep(t: f64, f0: f64, f1: f64, duration: f64, amplitude: f64) -> f64 {
    if !(0.0..=duration).contains(&t) {
        return 0.0;
    }
    let phase = f0 * t + (f1 - f0) * t * t / (2.0 * duration);
    amplitude * (TAU * phase).sin()
}

/// Instantaneous frequency (Hz) of [`sine_sweep`].
pub fn sine_sweep_frequency(t: f64, f0: f64, f1: f64, duration: f64) -> f64 {
    f0 + (f1 - f0) * t / duration
}

fn interpolate(t0: f64, dt: f64, z: &[f64], t: f64) -> f64 {
    match z {
        [] => 0.0,
        [only] => *only,
        _ => {
            let pos = (t - t0) / dt;
            if pos <= 0.0 {
                return z[0];
            }
            let i = pos.floor() as usize;
            if i >= z.len() - 1 {
                return z[z.len() - 1];
            }
            let w = pos - i as f64;
            z[i] + w * (z[i + 1] - z[i])
        }
    }
}

/// Brownian road `z_r(k dt) = dt * Σ_{i<=k} scale * g_i` with standard
/// normal draws from a seeded ChaCha8 stream; `z_r(0) = 0`.
pub fn brownian_road(dt: f64, n_steps: usize, seed: u64, scale: f64) -> Result<RoadProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..n_steps).map(|_| StandardNormal.sample(&mut rng));
    brownian_road_from_draws(dt, n_steps, scale, draws)
}

/// Brownian road from an explicit draw sequence.
pub fn brownian_road_from_draws(
    dt: f64,
    n_steps: usize,
    scale: f64,
    draws: impl IntoIterator<Item = f64>,
) -> Result<RoadProfile> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("road.dt", format!("must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::invalid("road.n_steps", "must be at least 1"));
    }
    let mut z = Vec::with_capacity(n_steps + 1);
    z.push(0.0);
    let mut sum = 0.0;
    for g in draws.into_iter().take(n_steps) {
        sum += scale * g;
        z.push(dt * sum);
    }
    if z.len() != n_steps + 1 {
        return Err(Error::invalid("road.draws", "draw sequence shorter than n_steps"));
    }
    Ok(RoadProfile::Tabulated { t0: 0.0, dt, z })
}

pub fn load_road_csv(path: impl AsRef<Path>) -> Result<RoadProfile> {
    let text = std::fs::read_to_string(path)?;
    parse_road_csv(&text)
}

/// Parses `t,z_r` rows; a single non-numeric header line is allowed.
pub fn parse_road_csv(text: &str) -> Result<RoadProfile> {
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parsed = match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((t, z)) if t.is_finite() && z.is_finite() => rows.push((t, z)),
            Some(_) => {
                return Err(Error::Parse { line: line_no, msg: "non-finite value".into() });
            }
            None if rows.is_empty() && idx == first_content_line(text) => continue,
            None => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected two numeric columns, got `{line}`"),
                });
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::Format(format!("road file needs at least two samples, found {}", rows.len())));
    }
    let t0 = rows[0].0;
    let dt = rows[1].0 - t0;
    if !(dt > 0.0) {
        return Err(Error::Format("time column must be strictly increasing".into()));
    }
    for (k, w) in rows.windows(2).enumerate() {
        let step = w[1].0 - w[0].0;
        if !(step > 0.0) {
            return Err(Error::Format(format!("time decreases or repeats at sample {}", k + 1)));
        }
        if (step - dt).abs() > SPACING_TOL * dt.max(1e-12) + 1e-12 * w[1].0.abs() {
            return Err(Error::Format(format!("non-uniform time spacing at sample {}", k + 1)));
        }
    }
    // Use the mean spacing so long files do not accumulate rounding drift.
    let dt = (rows[rows.len() - 1].0 - t0) / (rows.len() - 1) as f64;
    Ok(RoadProfile::Tabulated {
        t0,
        dt,
        z: rows.into_iter().map(|(_, z)| z).collect(),
    })
}

fn first_content_line(text: &str) -> usize {
    text.lines().position(|l| !l.trim().is_empty()).unwrap_or(0)
}

/// Derivative of the bump at `t` (used by tests).
#[doc(hidden)]
pub fn bump_slope(t: f64, h_b: f64, t1: f64, t2: f64) -> f64 {
    if t < t1 || t > t2 {
        return 0.0;
    }
    let w = t2 - t1;
    0.5 * h_b * (TAU / w) * (TAU * (t - t1) / w).sin()
}
