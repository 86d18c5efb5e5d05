//! Acceptance gate: one check per criterion, one PASS/FAIL line each.
//! Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiactive_core::damper::{mr_force, required_voltage, DENOMINATOR_GUARD};
use semiactive_core::model::natural_frequencies;
use semiactive_core::sim::{energy, frequency_grid, simulate};
use semiactive_core::{
    Actuation, BoucWenParams, ControllerSpec, PdGains, PlantMode, RoadProfile, SimConfig, SimState, VehicleParams,
};

const BIN: &str = env!("CARGO_BIN_EXE_semiactive");

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn run(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`semiactive {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    Ok(lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect())
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or(f64::NAN)
}

/// Five controllers with their reference gains.
fn controllers() -> [(&'static str, ControllerSpec); 5] {
    [
        ("passive", ControllerSpec::Passive),
        ("skyhook", ControllerSpec::Skyhook { c_sky: 17_000.0 }),
        ("groundhook", ControllerSpec::Groundhook { c_gr: 4_000.0 }),
        (
            "skygroundhook",
            ControllerSpec::Skygroundhook {
                c_sky: 25_500.0,
                c_gr: 1_150.0,
                c_passive: 0.0,
            },
        ),
        ("pd_skygroundhook", ControllerSpec::PdSkygroundhook(PdGains::PUBLISHED)),
    ]
}

fn modal_frequencies() -> Result<String, String> {
    let out = run(&["--config", default_config().to_str().unwrap(), "freqs"])?;
    let kv: BTreeMap<&str, f64> = out
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k, v.parse().unwrap_or(f64::NAN)))
        .collect();
    let (w1, w2) = (kv["omega1_rad_s"], kv["omega2_rad_s"]);
    let hz_ok = (kv["omega1_hz"] - w1 / TAU).abs() < 1e-12 && (kv["omega2_hz"] - w2 / TAU).abs() < 1e-12;

    let p = VehicleParams::default();
    let reps = 10_000;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(natural_frequencies(std::hint::black_box(&p)).unwrap());
    }
    let per_call = start.elapsed() / reps;

    let detail = format!("omega1 = {w1:.4}, omega2 = {w2:.4} rad/s, {per_call:?} per evaluation");
    if hz_ok && (w1 - 7.85).abs() <= 0.01 && (w2 - 69.01).abs() <= 0.01 && per_call < Duration::from_millis(1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn inverse_round_trip() -> Result<String, String> {
    let bw = BoucWenParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let (mut n, mut worst) = (0, 0.0f64);
    while n < 10_000 {
        let v = rng.random_range(-2.0..=2.0);
        let x = rng.random_range(-1e-3..=1e-3);
        let volts = rng.random_range(0.0..=5.0);
        if (bw.c_ob * v - bw.alpha_b * x).abs() < DENOMINATOR_GUARD {
            continue;
        }
        let f = mr_force(v, 0.0, x, volts, &bw).map_err(|e| e.to_string())?;
        let back = required_voltage(f, v, x, &bw).map_err(|e| e.to_string())?.voltage;
        worst = worst.max((back - volts).abs() / volts);
        n += 1;
    }
    let elapsed = start.elapsed();
    let detail = format!("max relative error {worst:.3e} over {n} samples in {elapsed:?}");
    if worst < 1e-9 && elapsed < Duration::from_secs(1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn linear_plant() -> SimConfig {
    SimConfig {
        plant_mode: PlantMode::Implicit,
        controller: ControllerSpec::Passive,
        t_end: 1.0,
        initial: SimState {
            z_s: 0.03,
            z_u: -0.01,
            v_s: 0.2,
            v_u: -0.5,
            x: 0.0,
        },
        ..SimConfig::default()
    }
}

fn integrator_order() -> Result<String, String> {
    let start = Instant::now();
    let end = |dt: f64| -> Result<[f64; 5], String> {
        let traj = simulate(&SimConfig { dt, ..linear_plant() }).map_err(|e| e.to_string())?;
        Ok(traj.samples.last().unwrap().state.to_array())
    };
    let reference = end(1e-3 / 64.0)?;
    let mut pts = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3, 5e-4] {
        let y = end(dt)?;
        let err = y.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        pts.push((dt.ln(), err.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    let elapsed = start.elapsed();
    let detail = format!("fitted slope {slope:.3} in {elapsed:?}");
    if slope >= 3.7 && elapsed < Duration::from_secs(10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Bump and stepped-sine runs used by the benchmarks, in Clamp actuation.
fn clamp_benchmark_runs() -> Vec<(String, SimConfig)> {
    let mut runs = Vec::new();
    for (name, ctrl) in controllers() {
        let base = SimConfig {
            actuation: Actuation::Clamp,
            controller: ctrl,
            ..SimConfig::default()
        };
        runs.push((
            format!("{name} bump"),
            SimConfig {
                road: RoadProfile::bump(0.05, 1.0, 1.5).unwrap(),
                ..base.clone()
            },
        ));
        for f in frequency_grid(0.5, 15.0, 0.25) {
            runs.push((
                format!("{name} sine {f} Hz"),
                SimConfig {
                    road: RoadProfile::Sine { freq: f, amplitude: 0.01 },
                    t_end: 30.0 / f,
                    ..base.clone()
                },
            ));
        }
    }
    runs
}

fn dissipativity() -> Result<String, String> {
    let (mut worst, mut steps, mut where_) = (f64::NEG_INFINITY, 0usize, String::new());
    let runs = clamp_benchmark_runs();
    for (name, cfg) in &runs {
        let traj = simulate(cfg).map_err(|e| format!("{name}: {e}"))?;
        for s in &traj.samples {
            let p = s.f_realized * s.state.v_rel();
            if p > worst {
                worst = p;
                where_ = name.clone();
            }
        }
        steps += traj.len();
    }
    let detail = format!("max f·v_rel = {worst:.3e} N·m/s over {steps} steps of {} runs ({where_})", runs.len());
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lyapunov_monitor() -> Result<String, String> {
    let initial = SimState {
        z_s: 0.05,
        z_u: -0.02,
        v_s: 0.3,
        v_u: -0.8,
        x: 0.0,
    };
    let mut cases = vec![
        ("passive explicit".to_string(), SimConfig::default()),
        (
            "passive implicit".to_string(),
            SimConfig {
                plant_mode: PlantMode::Implicit,
                ..SimConfig::default()
            },
        ),
    ];
    for (name, ctrl) in controllers() {
        cases.push((
            format!("{name} clamp"),
            SimConfig {
                actuation: Actuation::Clamp,
                controller: ctrl,
                ..SimConfig::default()
            },
        ));
    }

    let mut worst = (f64::NEG_INFINITY, String::new());
    for (name, base) in cases {
        let cfg = SimConfig {
            road: RoadProfile::Flat,
            initial,
            t_end: 3.0,
            ..base
        };
        let traj = simulate(&cfg).map_err(|e| format!("{name}: {e}"))?;
        let v0 = energy(&initial, 0.0, &cfg.vehicle, cfg.beta);
        let rise = traj
            .samples
            .windows(2)
            .map(|w| energy(&w[1].state, 0.0, &cfg.vehicle, cfg.beta) - energy(&w[0].state, 0.0, &cfg.vehicle, cfg.beta))
            .fold(0.0, f64::max);
        if rise / v0 > worst.0 {
            worst = (rise / v0, name);
        }
    }
    let detail = format!("largest rise {:.3e} V(0) ({})", worst.0, worst.1);
    if worst.0 <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bump_ordering(dir: &Path) -> Result<String, String> {
    let start = Instant::now();
    let out = dir.join("bump");
    run(&["--config", default_config().to_str().unwrap(), "--out", out.to_str().unwrap(), "bump-bench"])?;
    let rows = read_csv(&out.join("bump_bench.csv"))?;
    let by: BTreeMap<String, &BTreeMap<String, String>> = rows.iter().map(|r| (r["method"].clone(), r)).collect();
    let acc = |m: &str| num(by[m], "rms_a_s");
    let tire = |m: &str| num(by[m], "peak_tire_load_N");
    let (pd, sgh, passive) = (acc("pd_skygroundhook"), acc("skygroundhook"), acc("passive"));
    let lowest_tire = rows
        .iter()
        .min_by(|a, b| num(a, "peak_tire_load_N").total_cmp(&num(b, "peak_tire_load_N")))
        .map(|r| r["method"].clone())
        .unwrap_or_default();
    let elapsed = start.elapsed();
    let detail = format!(
        "rms_a_s pd {pd:.4} / sgh {sgh:.4} / passive {passive:.4}; lowest peak tire load {lowest_tire} ({:.1} N); {elapsed:?}",
        tire(&lowest_tire)
    );
    if pd < sgh && sgh < passive && lowest_tire == "pd_skygroundhook" && elapsed < Duration::from_secs(30) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Groundhook and Passive first-mode peaks count as equal within this
/// relative margin.
const SIMILAR: f64 = 0.10;

fn sweep_ordering(dir: &Path) -> Result<String, String> {
    let start = Instant::now();
    let out = dir.join("sweep");
    run(&["--config", default_config().to_str().unwrap(), "--out", out.to_str().unwrap(), "sweep"])?;
    let rows = read_csv(&out.join("sweep_peaks.csv"))?;
    let peak = |m: &str, mode: &str| {
        rows.iter()
            .find(|r| r["method"] == m && r["mode"] == mode)
            .map_or(f64::NAN, |r| num(r, "peak_gain"))
    };
    let b = |m: &str| peak(m, "body");
    let w = |m: &str| peak(m, "wheel");
    let first = b("skyhook") <= b("pd_skygroundhook")
        && b("pd_skygroundhook") <= b("skygroundhook")
        && b("skygroundhook") < b("groundhook")
        && b("skygroundhook") < b("passive")
        && (b("groundhook") - b("passive")).abs() <= SIMILAR * b("passive");
    let reduction = 100.0 * (w("passive") - w("pd_skygroundhook")) / w("passive");
    let smallest = ["passive", "skyhook", "groundhook", "skygroundhook"]
        .iter()
        .all(|m| w("pd_skygroundhook") < w(m));
    let elapsed = start.elapsed();
    let detail = format!(
        "body peaks sky {:.3} pd {:.3} sgh {:.3} gh {:.3} passive {:.3}; wheel peak pd {:.3} vs passive {:.3} \
         ({reduction:.1}% reduction, smallest: {smallest}); {elapsed:?}",
        b("skyhook"),
        b("pd_skygroundhook"),
        b("skygroundhook"),
        b("groundhook"),
        b("passive"),
        w("pd_skygroundhook"),
        w("passive"),
    );
    if first && reduction >= 50.0 && smallest && elapsed < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tuner_competence(dir: &Path) -> Result<String, String> {
    let start = Instant::now();
    let out = dir.join("tune");
    run(&["--config", default_config().to_str().unwrap(), "--out", out.to_str().unwrap(), "tune"])?;
    let text = fs::read_to_string(out.join("tune_report.json")).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let j_star = report["j_star"].as_f64().unwrap_or(f64::NAN);
    let j_pub = report["j_published"].as_f64().unwrap_or(f64::NAN);
    let roads = fs::read_dir(&out)
        .map_err(|e| e.to_string())?
        .filter(|e| e.as_ref().is_ok_and(|e| e.file_name().to_string_lossy().starts_with("road_seed")))
        .count();
    let elapsed = start.elapsed();
    let detail = format!("J(theta*) = {j_star:.3}% vs J(published) = {j_pub:.3}% on {roads} roads; {elapsed:?}");
    if j_star >= j_pub && roads == 12 && elapsed < Duration::from_secs(600) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Reduced sweep and tune settings so every command can run twice quickly.
const SMALL: &str = r#"
[road]
kind = "brownian"

[road.brownian]
n_steps = 3000
seed = 7

[sim]
t_end = 3.0

[sweep]
f_start = 1.0
f_stop = 12.0
f_step = 1.0
cycles_settle = 5
cycles_measure = 3

[tune]
seeds = [3, 4]
n_steps = 2000

[tune.gd]
max_iters = 3

[tune.grid]
points = 3
"#;

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        files.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism(dir: &Path) -> Result<String, String> {
    let cfg = dir.join("small.toml");
    fs::write(&cfg, SMALL).map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().unwrap();
    let commands: [&[&str]; 7] = [
        &["simulate"],
        &["--mode", "clamp", "simulate"],
        &["bump-bench"],
        &["sweep"],
        &["tune"],
        &["road", "gen"],
        &["freqs"],
    ];
    let mut checked = 0;
    for (i, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.join(format!("det{i}_{rep}"));
            let mut args = vec!["--config", cfg, "--out", out.to_str().unwrap()];
            args.extend_from_slice(cmd);
            let stdout = run(&args)?;
            let mut files = if out.exists() { snapshot(&out)? } else { BTreeMap::new() };
            // the manifest records its own output directory
            files.remove("manifest.json");
            files.insert("<stdout>".into(), stdout.into_bytes());
            outputs.push(files);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("`{}` produced different output on rerun", cmd.join(" ")));
        }
        checked += outputs[0].len();

        let manifest = dir.join(format!("det{i}_0/manifest.json"));
        if manifest.exists() {
            let out = dir.join(format!("det{i}_echo"));
            let mut args = vec!["--config", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()];
            args.extend(cmd.iter().filter(|a| !["--mode", "clamp"].contains(a)));
            run(&args)?;
            let mut echo = snapshot(&out)?;
            echo.remove("manifest.json");
            let mut first = outputs[0].clone();
            first.remove("<stdout>");
            if echo != first {
                return Err(format!("`{}` differs when rerun from its manifest", cmd.join(" ")));
            }
        }
    }
    Ok(format!("{} commands, {checked} outputs byte-identical across reruns and manifest replays", commands.len()))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Result<String, String> + 'a>);

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let criteria: [Criterion<'_>; 9] = [
        ("1 modal frequencies", Box::new(modal_frequencies)),
        ("2 inverse-model round trip", Box::new(inverse_round_trip)),
        ("3 integrator order", Box::new(integrator_order)),
        ("4 dissipativity", Box::new(dissipativity)),
        ("5 lyapunov monitor", Box::new(lyapunov_monitor)),
        ("6 bump benchmark ordering", Box::new(|| bump_ordering(dir))),
        ("7 sweep ordering", Box::new(|| sweep_ordering(dir))),
        ("8 tuner competence", Box::new(|| tuner_competence(dir))),
        ("9 determinism", Box::new(|| determinism(dir))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL  {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
