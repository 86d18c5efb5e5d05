use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use semiactive_core::road::fmt_f64;
use semiactive_core::sim::{self, compute_metrics, frequency_grid, frequency_response, mode_peaks, simulate};
use semiactive_core::tune::{self, brownian_ensemble, TuneConfig, TuneReport};
use semiactive_core::{model, ControllerKind, Error, Metrics, RoadProfile};

use crate::config::{Config, ConfigError, RoadKind};

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Divergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Divergence(m) => write!(f, "numerical divergence: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } | Error::NonFinite(_) | Error::SingularMatrix { .. } => {
                CliError::Divergence(e.to_string())
            }
            Error::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub mode: Option<crate::config::Mode>,
}

impl Globals {
    /// Loads, overrides and validates the config.
    pub fn resolve(&self) -> CliResult<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg.road.brownian.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.sim.mode = mode;
            cfg.tune.mode = mode;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Provenance record written before any other output.
#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_path: Option<String>,
    out_dir: String,
    /// Unix seconds from `SOURCE_DATE_EPOCH`, else the config file's
    /// modification time, else 0; never the wall clock, so reruns match.
    timestamp: u64,
    seeds: Vec<u64>,
    config: &'a Config,
}

fn timestamp(config: Option<&Path>) -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    config
        .and_then(|p| fs::metadata(p).ok())
        .and_then(|m| m.modified().ok())
        .and_then(|t| t.duration_since(std::time::UNIX_EPOCH).ok())
        .map_or(0, |d| d.as_secs())
}

struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn create(g: &Globals, command: &str, cfg: &Config, seeds: Vec<u64>) -> CliResult<Self> {
        fs::create_dir_all(&g.out).map_err(|e| CliError::Io(format!("{}: {e}", g.out.display())))?;
        let out = OutDir { dir: g.out.clone() };
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_path: g.config.as_ref().map(|p| p.display().to_string()),
            out_dir: g.out.display().to_string(),
            timestamp: timestamp(g.config.as_deref()),
            seeds,
            config: cfg,
        };
        out.write_json("manifest.json", &manifest)?;
        Ok(out)
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn road_seeds(cfg: &Config, road: &RoadProfile) -> Vec<u64> {
    match (cfg.road.kind, road) {
        (RoadKind::Brownian, _) => vec![cfg.road.brownian.seed],
        _ => vec![],
    }
}

pub fn simulate_cmd(g: &Globals) -> CliResult<()> {
    let cfg = g.resolve()?;
    let road = cfg.road.profile()?;
    let out = OutDir::create(g, "simulate", &cfg, road_seeds(&cfg, &road))?;
    let traj = simulate(&cfg.sim_config(cfg.controller.kind, road))?;
    out.write("trajectory.csv", &traj.to_csv())?;
    let metrics = compute_metrics(&traj, cfg.sim.skip)?;
    out.write_json("metrics.json", &metrics)
}

const BENCH_COLUMNS: [&str; 4] = ["rms_a_s", "rms_a_u", "peak_travel_mm", "peak_tire_load_N"];

fn bench_values(m: &Metrics) -> [f64; 4] {
    [m.rms_a_s, m.rms_a_u, m.peak_travel, m.peak_tire_load]
}

/// Percent reduction that treats a zero baseline matched by a zero
/// candidate as no change.
fn pct(baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 && candidate == 0.0 {
        0.0
    } else {
        sim::percent_reduction(baseline, candidate).unwrap_or(f64::NAN)
    }
}

pub fn bump_bench_cmd(g: &Globals) -> CliResult<()> {
    let cfg = g.resolve()?;
    let road = cfg.road.bump_profile()?;
    let out = OutDir::create(g, "bump-bench", &cfg, vec![])?;

    let mut rows = Vec::new();
    for kind in ControllerKind::ALL {
        let traj = simulate(&cfg.sim_config(kind, road.clone()))?;
        rows.push((kind, bench_values(&compute_metrics(&traj, cfg.sim.skip)?)));
    }
    let passive = rows[0].1;

    let mut csv = String::from("method");
    for c in BENCH_COLUMNS {
        let _ = write!(csv, ",{c}");
    }
    for c in BENCH_COLUMNS {
        let _ = write!(csv, ",pct_{c}");
    }
    csv.push('\n');
    for (kind, vals) in &rows {
        csv.push_str(kind.name());
        for v in vals {
            let _ = write!(csv, ",{}", fmt_f64(*v));
        }
        for (b, v) in passive.iter().zip(vals) {
            let _ = write!(csv, ",{}", fmt_f64(pct(*b, *v)));
        }
        csv.push('\n');
    }
    out.write("bump_bench.csv", &csv)
}

pub fn sweep_cmd(g: &Globals) -> CliResult<()> {
    let cfg = g.resolve()?;
    let s = &cfg.sweep;
    let out = OutDir::create(g, "sweep", &cfg, vec![])?;
    let freqs = frequency_grid(s.f_start, s.f_stop, s.f_step);
    let omega = model::natural_frequencies(&cfg.vehicle)?;

    let mut csv = String::from("method,freq_hz,rms_a_s,rms_a_u,gain_s,gain_u\n");
    let mut peaks = Vec::new();
    for kind in ControllerKind::ALL {
        let base = cfg.sim_config(kind, RoadProfile::Flat);
        let pts = frequency_response(&base, &freqs, s.amplitude, s.cycles_settle, s.cycles_measure)?;
        for p in &pts {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                kind.name(),
                fmt_f64(p.freq_hz),
                fmt_f64(p.rms_a_s),
                fmt_f64(p.rms_a_u),
                fmt_f64(p.gain_s),
                fmt_f64(p.gain_u)
            );
        }
        peaks.push((kind, mode_peaks(&pts, omega)?));
    }
    out.write("sweep.csv", &csv)?;

    let passive = peaks[0].1;
    let mut summary = String::from("method,mode,peak_freq_hz,peak_gain,pct_vs_passive\n");
    for (kind, p) in &peaks {
        for (mode, peak, base) in [("body", p.body, passive.body), ("wheel", p.wheel, passive.wheel)] {
            let _ = writeln!(
                summary,
                "{},{mode},{},{},{}",
                kind.name(),
                fmt_f64(peak.freq_hz),
                fmt_f64(peak.value),
                fmt_f64(pct(base.value, peak.value))
            );
        }
    }
    out.write("sweep_peaks.csv", &summary)
}

#[derive(Serialize)]
struct TuneOutput<'a> {
    #[serde(flatten)]
    report: &'a TuneReport,
    config_echo: &'a Config,
}

/// Tuning job described by a resolved config.
pub fn tune_config(cfg: &Config) -> CliResult<TuneConfig> {
    let t = &cfg.tune;
    let roads = brownian_ensemble(&t.seeds, t.road_dt, t.n_steps, t.scale)?;
    let template = cfg.controller.spec(t.kind);
    let mut base = cfg.sim_config(t.kind, RoadProfile::Flat);
    (base.plant_mode, base.actuation) = t.mode.plant();
    base.t_end = t.n_steps as f64 * t.road_dt;
    base.record_stride = 1;
    let published = match (t.kind, &t.published) {
        (ControllerKind::PdSkygroundhook, p) => p.clone(),
        _ => None,
    };
    Ok(TuneConfig {
        base,
        template,
        theta0: t.theta0.clone().unwrap_or_else(|| template.gains()),
        published,
        roads,
        lambda_s: t.lambda_s,
        lambda_u: t.lambda_u,
        gd: t.gd.clone(),
        grid: t.grid.clone(),
        validate_explicit: t.validate_explicit,
    })
}

pub fn tune_cmd(g: &Globals, seeds: Option<Vec<u64>>) -> CliResult<()> {
    let mut cfg = g.resolve()?;
    if let Some(s) = seeds {
        cfg.tune.seeds = s;
    }
    let job = tune_config(&cfg)?;
    job.validate()?;
    let out = OutDir::create(g, "tune", &cfg, cfg.tune.seeds.clone())?;
    for (seed, road) in cfg.tune.seeds.iter().zip(&job.roads) {
        let csv = road.to_csv().expect("brownian roads are tabulated");
        out.write(&format!("road_seed{seed}.csv"), &csv)?;
    }
    let report = tune::tune(&job)?;
    out.write_json("tune_report.json", &TuneOutput { report: &report, config_echo: &cfg })
}

pub fn freqs_cmd(g: &Globals) -> CliResult<String> {
    let cfg = g.resolve()?;
    let (w1, w2) = model::natural_frequencies(&cfg.vehicle)?;
    let tau = std::f64::consts::TAU;
    Ok(format!(
        "omega1_rad_s={w1}\nomega2_rad_s={w2}\nomega1_hz={}\nomega2_hz={}\n",
        w1 / tau,
        w2 / tau
    ))
}

pub fn road_gen_cmd(g: &Globals) -> CliResult<()> {
    let cfg = g.resolve()?;
    let road = cfg.road.profile()?;
    let out = OutDir::create(g, "road gen", &cfg, road_seeds(&cfg, &road))?;
    let csv = match road.to_csv() {
        Some(csv) => csv,
        None => {
            let n = cfg.sim_config(cfg.controller.kind, RoadProfile::Flat).n_steps();
            let mut csv = String::from("t,z_r\n");
            for k in 0..=n {
                let t = k as f64 * cfg.sim.dt;
                let _ = writeln!(csv, "{},{}", fmt_f64(t), fmt_f64(road.height(t)));
            }
            csv
        }
    };
    out.write("road.csv", &csv)
}
