//! Gain tuning: ensemble performance index, finite-difference gradient
//! ascent, and grid refinement.
//!
//! The performance index is the weighted percent reduction of RMS sprung and
//! unsprung acceleration against the passive plant, averaged over an
//! ensemble of roads. Higher is better; a run that diverges scores
//! `f64::NEG_INFINITY`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControllerSpec;
use crate::error::{Error, Result};
use crate::road::{self, RoadProfile};
use crate::sim::{compute_metrics, percent_reduction, simulate, PlantMode, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdParams {
    /// Step size in gain units per unit of index.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Finite-difference half-width per gain.
    pub fd_steps: Vec<f64>,
    /// Stop when `|Δθ| / |θ|` falls below this.
    pub tolerance: f64,
}

impl Default for GdParams {
    fn default() -> Self {
        Self::pd_default()
    }
}

impl GdParams {
    pub fn pd_default() -> Self {
        Self {
            learning_rate: 50.0,
            max_iters: 200,
            fd_steps: vec![10.0, 10.0, 1.0, 0.5],
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// Half-width per gain; when absent, `radius_fraction * |center|`.
    pub radius: Option<Vec<f64>>,
    pub radius_fraction: f64,
    /// Odd, at least 3.
    pub points: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            radius: None,
            radius_fraction: 0.1,
            points: 5,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if self.points < 3 || self.points.is_multiple_of(2) {
            return Err(Error::invalid("tune.grid.points", format!("must be odd and >= 3, got {}", self.points)));
        }
        if !(self.radius_fraction >= 0.0) {
            return Err(Error::invalid("tune.grid.radius_fraction", "must be >= 0"));
        }
        Ok(())
    }

    pub fn radius_for(&self, center: &[f64]) -> Vec<f64> {
        match &self.radius {
            Some(r) => r.clone(),
            None => center.iter().map(|c| self.radius_fraction * c.abs()).collect(),
        }
    }
}

/// Memoizing wrapper around an objective; each distinct gain vector is
/// evaluated once.
pub struct Evaluator<F> {
    objective: F,
    cache: HashMap<Vec<u64>, f64>,
    evaluations: usize,
}

fn key(theta: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same gain
    theta.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl<F> Evaluator<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(objective: F) -> Self {
        Self {
            objective,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    /// Number of distinct objective calls made so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn eval(&mut self, theta: &[f64]) -> f64 {
        self.eval_batch(std::slice::from_ref(&theta.to_vec()))[0]
    }

    /// Evaluates a batch, running uncached points in parallel.
    pub fn eval_batch(&mut self, thetas: &[Vec<f64>]) -> Vec<f64> {
        let mut pending: Vec<&Vec<f64>> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for t in thetas {
            let k = key(t);
            if !self.cache.contains_key(&k) && seen.insert(k) {
                pending.push(t);
            }
        }
        let objective = &self.objective;
        let results: Vec<f64> = pending.par_iter().map(|t| objective(t)).collect();
        self.evaluations += pending.len();
        for (t, j) in pending.into_iter().zip(results) {
            self.cache.insert(key(t), j);
        }
        thetas.iter().map(|t| self.cache[&key(t)]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub theta: Vec<f64>,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub theta: Vec<f64>,
    pub j: f64,
    pub history: Vec<HistoryEntry>,
}

/// Projected gradient ascent with central differences.
///
/// Returns the best gain vector seen. Lower finite-difference probes are
/// clipped at zero; a step that would make a gain negative lands on zero.
pub fn gradient_ascent<F>(ev: &mut Evaluator<F>, theta0: &[f64], gd: &GdParams) -> Result<AscentResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = theta0.len();
    if gd.fd_steps.len() != n {
        return Err(Error::invalid(
            "tune.gd.fd_steps",
            format!("expected {n} entries, got {}", gd.fd_steps.len()),
        ));
    }
    if theta0.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("tune.theta0", "all gains must be >= 0"));
    }

    let mut theta = theta0.to_vec();
    let j = ev.eval(&theta);
    let mut history = vec![HistoryEntry { theta: theta.clone(), j }];
    let (mut best_theta, mut best_j) = (theta.clone(), j);

    if !j.is_finite() {
        log::warn!("initial gains rejected; returning theta0");
        return Ok(AscentResult { theta, j, history });
    }

    for _ in 0..gd.max_iters {
        let mut probes = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut hi = theta.clone();
            let mut lo = theta.clone();
            hi[i] += gd.fd_steps[i];
            lo[i] = (lo[i] - gd.fd_steps[i]).max(0.0);
            probes.push(hi);
            probes.push(lo);
        }
        let values = ev.eval_batch(&probes);
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                let span = probes[2 * i][i] - probes[2 * i + 1][i];
                if span > 0.0 {
                    (values[2 * i] - values[2 * i + 1]) / span
                } else {
                    0.0
                }
            })
            .collect();
        if grad.iter().any(|g| !g.is_finite()) {
            log::warn!("non-finite gradient estimate; stopping ascent");
            break;
        }

        let next: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(t, g)| (t + gd.learning_rate * g).max(0.0))
            .collect();
        let step_norm = norm(next.iter().zip(&theta).map(|(a, b)| a - b));
        let scale = norm(theta.iter().copied()).max(f64::MIN_POSITIVE);

        let j_next = ev.eval(&next);
        history.push(HistoryEntry { theta: next.clone(), j: j_next });
        if !j_next.is_finite() {
            log::warn!("ascent step rejected (divergent run); stopping");
            break;
        }
        if j_next > best_j {
            best_j = j_next;
            best_theta = next.clone();
        }
        theta = next;
        if step_norm / scale < gd.tolerance {
            break;
        }
    }
    Ok(AscentResult {
        theta: best_theta,
        j: best_j,
        history,
    })
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

/// Exhaustive search over the grid `center ± radius` with `points` nodes per
/// axis, clipped to nonnegative gains. Ties go to the lexicographically
/// smallest gain vector.
pub fn grid_refine<F>(ev: &mut Evaluator<F>, center: &[f64], radius: &[f64], points: usize) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if points < 3 || points.is_multiple_of(2) {
        return Err(Error::invalid("tune.grid.points", format!("must be odd and >= 3, got {points}")));
    }
    if radius.len() != center.len() {
        return Err(Error::invalid("tune.grid.radius", "length must match the gain vector"));
    }
    let half = (points / 2) as f64;
    let axes: Vec<Vec<f64>> = center
        .iter()
        .zip(radius)
        .map(|(&c, &r)| {
            let mut vals: Vec<f64> = (0..points)
                .map(|k| (c + r * (k as f64 - half) / half).max(0.0))
                .collect();
            vals.dedup();
            vals
        })
        .collect();

    let mut nodes: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        nodes = nodes
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    let values = ev.eval_batch(&nodes);

    let mut best: Option<(&Vec<f64>, f64)> = None;
    for (node, &j) in nodes.iter().zip(&values) {
        best = match best {
            None => Some((node, j)),
            Some((b, bj)) => {
                let better = j > bj || (j == bj && lex_less(node, b));
                if better {
                    Some((node, j))
                } else {
                    Some((b, bj))
                }
            }
        };
    }
    let (theta, j) = best.expect("grid has at least one node");
    Ok((theta.clone(), j))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Weighted index from per-road percent reductions, averaged over roads.
pub fn combine_index(per_road: &[(f64, f64)], lambda_s: f64, lambda_u: f64) -> f64 {
    if per_road.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = per_road.iter().map(|(ds, du)| lambda_s * ds + lambda_u * du).sum();
    sum / per_road.len() as f64
}

/// Road ensemble and passive baselines for one plant mode.
#[derive(Debug, Clone)]
pub struct TuneHarness {
    pub base: SimConfig,
    pub template: ControllerSpec,
    pub roads: Vec<RoadProfile>,
    pub lambda_s: f64,
    pub lambda_u: f64,
    baselines: Vec<(f64, f64)>,
}

impl TuneHarness {
    /// Builds the harness and simulates the passive plant on every road.
    pub fn new(
        base: SimConfig,
        template: ControllerSpec,
        roads: Vec<RoadProfile>,
        lambda_s: f64,
        lambda_u: f64,
    ) -> Result<Self> {
        validate_lambdas(lambda_s, lambda_u)?;
        if roads.is_empty() {
            return Err(Error::invalid("tune.seeds", "road ensemble is empty"));
        }
        let baselines = roads
            .par_iter()
            .map(|road| {
                let cfg = SimConfig {
                    controller: ControllerSpec::Passive,
                    road: road.clone(),
                    ..base.clone()
                };
                let m = compute_metrics(&simulate(&cfg)?, 0.0)?;
                Ok((m.rms_a_s, m.rms_a_u))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base,
            template,
            roads,
            lambda_s,
            lambda_u,
            baselines,
        })
    }

    pub fn with_mode(&self, mode: PlantMode) -> Result<Self> {
        TuneHarness::new(
            SimConfig { plant_mode: mode, ..self.base.clone() },
            self.template,
            self.roads.clone(),
            self.lambda_s,
            self.lambda_u,
        )
    }

    /// Ensemble-mean index for gains `theta`; `NEG_INFINITY` if any run fails.
    pub fn performance_index(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.template.gains().len() || theta.iter().any(|v| !(*v >= 0.0)) {
            return f64::NEG_INFINITY;
        }
        let controller = self.template.with_gains(theta);
        let per_road: Option<Vec<(f64, f64)>> = self
            .roads
            .par_iter()
            .zip(&self.baselines)
            .map(|(road, &(base_s, base_u))| {
                let cfg = SimConfig {
                    controller,
                    road: road.clone(),
                    ..self.base.clone()
                };
                let m = simulate(&cfg).and_then(|t| compute_metrics(&t, 0.0)).ok()?;
                Some((reduction(base_s, m.rms_a_s)?, reduction(base_u, m.rms_a_u)?))
            })
            .collect();
        match per_road {
            Some(v) => combine_index(&v, self.lambda_s, self.lambda_u),
            None => f64::NEG_INFINITY,
        }
    }
}

fn reduction(baseline: f64, candidate: f64) -> Option<f64> {
    if baseline == 0.0 && candidate == 0.0 {
        return Some(0.0);
    }
    percent_reduction(baseline, candidate).ok()
}

fn validate_lambdas(lambda_s: f64, lambda_u: f64) -> Result<()> {
    if !(lambda_s >= 0.0) || !(lambda_u >= 0.0) {
        return Err(Error::invalid("tune.lambda_s", "weights must be >= 0"));
    }
    if lambda_s == 0.0 && lambda_u == 0.0 {
        return Err(Error::invalid("tune.lambda_s", "lambda_s and lambda_u cannot both be zero"));
    }
    Ok(())
}

/// Brownian ensemble, one road per seed.
pub fn brownian_ensemble(seeds: &[u64], dt: f64, n_steps: usize, scale: f64) -> Result<Vec<RoadProfile>> {
    seeds.iter().map(|&s| road::brownian_road(dt, n_steps, s, scale)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    /// Plant, damper and integration settings shared by every run.
    pub base: SimConfig,
    /// Law being tuned; its gains are `theta0` unless overridden.
    pub template: ControllerSpec,
    pub theta0: Vec<f64>,
    /// Reference gains scored alongside the result.
    pub published: Option<Vec<f64>>,
    pub roads: Vec<RoadProfile>,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub gd: GdParams,
    pub grid: GridParams,
    /// Re-score the result with the damper model in the loop.
    pub validate_explicit: bool,
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        validate_lambdas(self.lambda_s, self.lambda_u)?;
        self.grid.validate()?;
        let n = self.template.gains().len();
        if n == 0 {
            return Err(Error::invalid("tune.kind", "passive controller has no gains to tune"));
        }
        if self.theta0.len() != n {
            return Err(Error::invalid("tune.theta0", format!("expected {n} gains, got {}", self.theta0.len())));
        }
        if self.published.as_ref().is_some_and(|p| p.len() != n) {
            return Err(Error::invalid("tune.published", format!("expected {n} gains")));
        }
        if let Some(r) = &self.grid.radius {
            if r.len() != n {
                return Err(Error::invalid("tune.grid.radius", format!("expected {n} entries")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplicitCheck {
    pub j_star: f64,
    pub j_published: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub theta_star: Vec<f64>,
    pub j_star: f64,
    pub j_published: Option<f64>,
    pub j_theta0: f64,
    pub j_ascent: f64,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    pub explicit_validation: Option<ExplicitCheck>,
}

/// Gradient ascent from `theta0`, then grid refinement around its result.
pub fn tune(cfg: &TuneConfig) -> Result<TuneReport> {
    cfg.validate()?;
    let harness = TuneHarness::new(
        cfg.base.clone(),
        cfg.template,
        cfg.roads.clone(),
        cfg.lambda_s,
        cfg.lambda_u,
    )?;
    let mut ev = Evaluator::new(|theta: &[f64]| harness.performance_index(theta));

    let ascent = gradient_ascent(&mut ev, &cfg.theta0, &cfg.gd)?;
    let j_theta0 = ascent.history[0].j;
    let radius = cfg.grid.radius_for(&ascent.theta);
    let (theta_grid, j_grid) = grid_refine(&mut ev, &ascent.theta, &radius, cfg.grid.points)?;

    let mut history = ascent.history;
    history.push(HistoryEntry { theta: theta_grid.clone(), j: j_grid });
    // the grid contains its center, so j_grid >= ascent.j; keep the ascent
    // point unless the grid strictly improves on it
    let (theta_star, j_star) = if j_grid > ascent.j {
        (theta_grid, j_grid)
    } else {
        (ascent.theta, ascent.j)
    };
    let j_published = cfg.published.as_ref().map(|p| ev.eval(p));

    let explicit_validation = if cfg.validate_explicit {
        let explicit = harness.with_mode(PlantMode::Explicit)?;
        Some(ExplicitCheck {
            j_star: explicit.performance_index(&theta_star),
            j_published: cfg.published.as_ref().map(|p| explicit.performance_index(p)),
        })
    } else {
        None
    };

    Ok(TuneReport {
        theta_star,
        j_star,
        j_published,
        j_theta0,
        j_ascent: ascent.j,
        history,
        evaluations: ev.evaluations(),
        explicit_validation,
    })
}
