//! Command-line front end: subcommand dispatch, artifact layout, run manifest
//! and error records.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use vlevel_core::single_pulse::extract_rabi_period;
use vlevel_core::Propagator;

use crate::config::{parse_config, Experiment, OutputFormat, RunConfig};
use crate::csvio::{num, write_grid_csv, write_sweep_csv, write_table};
use crate::error::{Error, Result};
use crate::experiments::{
    phase_map, single_pulse_coherences, theta1_scan, AnalysedSpectrum, ControlOutcome, ControlSearchJob,
};
use crate::gridfile::{write_atomic, GridFile};
use crate::scan::{hex, scan_rephasing, sweep_pulse_area, ScanOptions, ScanOutcome};
use crate::spectrum::spectrum_2d;

#[derive(Debug, Parser)]
#[command(name = "vlevel", version, about = "Pulse-area sweeps and rephasing 2D spectra of V-type three-level systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides `workers`).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Continue a partially completed run from its checkpoint.
    #[arg(long, global = true)]
    pub resume: bool,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Stop after this many newly computed checkpoint rows.
    #[arg(long, global = true, hide = true)]
    pub max_rows: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Populations and coherences after one pulse versus pulse area.
    SingleSweep,
    /// One rephasing 2D spectrum.
    Spectrum,
    /// Peak amplitudes versus the first pulse area.
    Theta1Scan,
    /// Peak visibilities over a grid of (Θ1, Θ2, Θ3).
    ControlSearch,
    /// Phase of one peak along Θ1.
    PhaseMap,
    /// Convert a grid file to long-format CSV.
    Export {
        /// Grid file to convert.
        input: PathBuf,
    },
}

impl Command {
    fn experiment_name(&self) -> Option<&'static str> {
        Some(match self {
            Command::SingleSweep => "single_sweep",
            Command::Spectrum => "spectrum",
            Command::Theta1Scan => "theta1_scan",
            Command::ControlSearch => "control_search",
            Command::PhaseMap => "phase_map",
            Command::Export { .. } => return None,
        })
    }
}

/// Outcome of a successful invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    /// `complete`, `partial` or `already_complete`.
    pub status: String,
    pub summary: Value,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(name) = cli.command.experiment_name() {
        match &cfg.experiment {
            Some(exp) if exp.name() != name => {
                return Err(Error::config(
                    "experiment",
                    format!("config describes `{}` but the `{}` subcommand was invoked", exp.name(), name.replace('_', "-")),
                ))
            }
            Some(_) => {}
            None => cfg.experiment = Experiment::default_for(name),
        }
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Output directory the invocation would use, for error records.
pub fn out_dir_hint(cli: &Cli) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    cli.config
        .as_ref()
        .and_then(|p| std::fs::read_to_string(p).ok())
        .and_then(|t| toml::from_str::<RunConfig>(&t).ok())
        .map_or_else(|| PathBuf::from(RunConfig::default().output.dir), |c| PathBuf::from(c.output.dir))
}

pub fn run(cli: &Cli) -> Result<RunReport> {
    let started = Instant::now();
    let cfg = load_config(cli)?;
    let out = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;

    let mut artifacts: Vec<PathBuf> = Vec::new();
    let (status, summary) = pool.install(|| match &cli.command {
        Command::Export { input } => export(input, &out, &mut artifacts),
        _ => run_experiment(cli, &cfg, &out, &mut artifacts),
    })?;

    write_manifest(cli, &cfg, &out, &status, &summary, &artifacts, started.elapsed().as_secs_f64())?;
    Ok(RunReport {
        out_dir: out,
        status,
        summary,
    })
}

fn run_experiment(cli: &Cli, cfg: &RunConfig, out: &Path, artifacts: &mut Vec<PathBuf>) -> Result<(String, Value)> {
    let params = cfg.params();
    let prop = Propagator::new(params, cfg.solver.options()?)?;
    let fmt = cfg.output.format;
    let twod = &cfg.twod;
    let exp = cfg.experiment.as_ref().expect("experiment resolved by load_config");
    let complete = || "complete".to_string();
    match exp {
        Experiment::SingleSweep(s) => {
            let sweep = sweep_pulse_area(&s.theta.0, s.fwhm.0, s.duration_convention.into(), &prop)?;
            let path = out.join("sweep.csv");
            write_sweep_csv(&sweep, &path)?;
            artifacts.push(path);
            let period = extract_rabi_period(&sweep.areas, &sweep.pop0).ok().map(|p| p / PI);
            Ok((complete(), json!({ "points": sweep.len(), "rabi_period_over_pi": period })))
        }
        Experiment::Spectrum(s) => {
            let areas = s.areas.map(|a| a.0);
            let grid = twod.grid();
            let ckpt = out.join("scan.ckpt");
            if !cli.resume && ckpt.exists() {
                std::fs::remove_file(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
            }
            let opts = ScanOptions {
                checkpoint: Some(ckpt),
                row_limit: cli.max_rows,
                cancel: None,
            };
            let tgrid = match scan_rephasing(&prop, twod.setup(areas), &grid, &opts)? {
                ScanOutcome::Complete(g) => g,
                ScanOutcome::Partial { done, total } => {
                    return Ok(("partial".into(), json!({ "rows_done": done, "rows_total": total })));
                }
            };
            let spec = spectrum_2d(&tgrid, twod.zero_pad, twod.window())?;
            let peaks = vlevel_core::analysis::locate_peaks(&spec, &params, twod.peak_halfwidth.map(|h| h.0))?;
            let pv = vlevel_core::analysis::peak_visibility(&peaks).ok();
            let tfile = GridFile::from_time_domain(&tgrid);
            let sfile = GridFile::from_spectrum(&spec, Some(grid.population_time));
            emit_grid(&tfile, &out.join("time_domain"), fmt, artifacts)?;
            emit_grid(&sfile, &out.join("spectrum"), fmt, artifacts)?;
            let path = out.join("peaks.csv");
            write_table(
                &path,
                &[
                    "peak",
                    "expected_omega_tau [meV]",
                    "expected_omega_t [meV]",
                    "found_omega_tau [meV]",
                    "found_omega_t [meV]",
                    "max_amplitude [arb]",
                    "phase [rad]",
                    "pv [%]",
                ],
                peaks.iter().enumerate().map(|(k, p)| {
                    vec![
                        p.label.name().to_string(),
                        num(p.expected_center.0),
                        num(p.expected_center.1),
                        num(p.found_center.0),
                        num(p.found_center.1),
                        num(p.max_amplitude),
                        num(p.phase_at_max),
                        pv.map_or(String::from("nan"), |v| num(v[k])),
                    ]
                }),
            )?;
            artifacts.push(path);
            Ok((complete(), json!({ "pv_percent": pv, "time_domain_sha256": sha256_hex(&tfile.to_bytes()) })))
        }
        Experiment::Theta1Scan(s) => {
            let grids_dir = out.join("spectra");
            let mut idx = 0;
            let curves = theta1_scan(&prop, twod, &s.theta1.0, s.fixed.map(|a| a.0), |a| {
                save_spectrum(a, &grids_dir, idx, fmt, twod.population_time.0, artifacts)?;
                idx += 1;
                Ok(())
            })?;
            let (c01, c02) = single_pulse_coherences(&prop, twod, &s.theta1.0)?;
            let mut header = vec!["theta1_over_pi [pi rad]".to_string()];
            for l in ["p1", "p2", "p3", "p4"] {
                header.push(format!("{l}_amplitude [arb]"));
            }
            for l in ["p1", "p2", "p3", "p4"] {
                header.push(format!("{l}_phase [rad]"));
            }
            header.extend(["coh01_single [1]", "coh02_single [1]"].map(String::from));
            let path = out.join("theta1_scan.csv");
            write_table(
                &path,
                &header,
                (0..curves.theta1.len()).map(|i| {
                    let mut r = vec![num(curves.theta1[i] / PI)];
                    r.extend((0..4).map(|k| num(curves.amplitude[k][i])));
                    r.extend((0..4).map(|k| num(curves.phase[k][i])));
                    r.push(num(c01[i]));
                    r.push(num(c02[i]));
                    r
                }),
            )?;
            artifacts.push(path);
            Ok((complete(), json!({ "points": curves.theta1.len() })))
        }
        Experiment::ControlSearch(s) => {
            let job = ControlSearchJob {
                prop: &prop,
                twod,
                theta: [&s.theta1.0, &s.theta2.0, &s.theta3.0],
                theta4: s.theta4.0,
                budget: s.budget,
            };
            let csv = out.join("control_search.csv");
            let side = out.join("control_search.json");
            let outcome = job.run(&csv, &side, cli.resume, cli.max_rows)?;
            artifacts.push(csv);
            artifacts.push(side);
            Ok(match outcome {
                ControlOutcome::AlreadyComplete(r) => ("already_complete".into(), json!({ "rows": r.rows.len(), "message": "complete" })),
                ControlOutcome::Complete(r) => (complete(), json!({ "rows": r.rows.len() })),
                ControlOutcome::Partial { done, total } => ("partial".into(), json!({ "rows_done": done, "rows_total": total })),
            })
        }
        Experiment::PhaseMap(s) => {
            let label = s.label()?;
            let grids_dir = out.join("spectra");
            let mut idx = 0;
            let (curves, map) = phase_map(
                &prop,
                twod,
                label,
                &s.theta1.0,
                [s.theta2.0, s.theta3.0, s.theta4.0],
                s.threshold,
                |a| {
                    save_spectrum(a, &grids_dir, idx, fmt, twod.population_time.0, artifacts)?;
                    idx += 1;
                    Ok(())
                },
            )?;
            let k = label.index();
            let unwrapped = vlevel_core::analysis::unwrap_phases(&curves.phase[k]);
            let path = out.join("phase_map.csv");
            write_table(
                &path,
                &[
                    "theta1_over_pi [pi rad]",
                    "intensity [arb]",
                    "phase [rad]",
                    "phase_unwrapped [rad]",
                    "selected [1]",
                ],
                (0..curves.theta1.len()).map(|i| {
                    let a = curves.amplitude[k][i];
                    let selected = map.selected.iter().any(|p| p.theta1 == curves.theta1[i]);
                    vec![
                        num(curves.theta1[i] / PI),
                        num(a * a),
                        num(curves.phase[k][i]),
                        num(unwrapped[i]),
                        (selected as u8).to_string(),
                    ]
                }),
            )?;
            artifacts.push(path);
            let summary = json!({
                "peak": label.name(),
                "threshold": map.threshold,
                "max_intensity": map.max_intensity,
                "selected": map.selected.len(),
                "covered_phase_range_rad": map.covered_range(),
                "covered_phase_range_over_pi": map.covered_range() / PI,
                "diagnostic": map.diagnostic,
            });
            let side = out.join("phase_map.json");
            write_atomic(&side, &serde_json::to_vec_pretty(&summary).expect("json"))?;
            artifacts.push(side);
            Ok((complete(), summary))
        }
    }
}

fn save_spectrum(
    a: &AnalysedSpectrum,
    dir: &Path,
    idx: usize,
    fmt: OutputFormat,
    population_time: f64,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    if fmt.grid() {
        let path = dir.join(format!("spectrum_{idx:03}.grid"));
        GridFile::from_spectrum(&a.spectrum, Some(population_time)).write(&path)?;
        artifacts.push(path);
    }
    Ok(())
}

fn emit_grid(g: &GridFile, stem: &Path, fmt: OutputFormat, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    if fmt.grid() {
        let p = stem.with_extension("grid");
        g.write(&p)?;
        artifacts.push(p);
    }
    if fmt.csv() {
        let p = stem.with_extension("csv");
        write_grid_csv(g, &p)?;
        artifacts.push(p);
    }
    Ok(())
}

fn export(input: &Path, out: &Path, artifacts: &mut Vec<PathBuf>) -> Result<(String, Value)> {
    let g = GridFile::read(input)?;
    let stem = input.file_stem().map_or_else(|| "grid".into(), |s| s.to_owned());
    let path = out.join(stem).with_extension("csv");
    write_grid_csv(&g, &path)?;
    artifacts.push(path.clone());
    Ok(("complete".into(), json!({ "input": input, "output": path, "elements": g.payload.len() })))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn write_manifest(
    cli: &Cli,
    cfg: &RunConfig,
    out: &Path,
    status: &str,
    summary: &Value,
    artifacts: &[PathBuf],
    wall_time: f64,
) -> Result<()> {
    let mut files = Vec::new();
    for p in artifacts {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        files.push(json!({
            "path": p.strip_prefix(out).unwrap_or(p),
            "bytes": bytes.len(),
            "sha256": sha256_hex(&bytes),
        }));
    }
    let config = serde_json::to_value(cfg).expect("config serialises");
    let manifest = json!({
        "tool": "vlevel",
        "build": {
            "version": env!("CARGO_PKG_VERSION"),
            "profile": if cfg!(debug_assertions) { "debug" } else { "release" },
            "target": format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        },
        "command": format!("{:?}", cli.command),
        "resume": cli.resume,
        "config": config,
        "config_sha256": sha256_hex(config.to_string().as_bytes()),
        "status": status,
        "summary": summary,
        "wall_time_s": wall_time,
        "artifacts": files,
    });
    write_atomic(&out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest).expect("json"))
}

/// Machine-readable record of a failed run.
pub fn error_record(err: &Error) -> Value {
    let (key, line) = match err {
        Error::Config { key, line, .. } => (key.clone(), *line),
        _ => (None, None),
    };
    json!({
        "status": "error",
        "kind": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
        "key": key,
        "line": line,
    })
}

pub fn write_error_record(dir: &Path, err: &Error) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("error.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&error_record(err)).expect("json"))?;
    Ok(path)
}
