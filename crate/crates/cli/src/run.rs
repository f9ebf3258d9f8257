//! Command execution: each subcommand resolves its configuration, runs the
//! pipeline inside a sized worker pool, and writes deterministic artifacts
//! plus a manifest (wall times go to a separate file so reruns stay
//! byte-identical).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use nibb_core::airy::{tw2_cdf, TwTable};
use nibb_core::burgers::{solve_characteristics, LimitShape, SolveOptions};
use nibb_core::error::{Error, Result};
use nibb_core::sde::{simulate_bridge, simulate_meanfield, BridgeSpec, DriftMode, EndCondition, PathEnsemble};
use nibb_core::stats::{
    dominance_test, edge_statistics, ks_distance, rigidity_report, stieltjes_compare,
};

use crate::config::{build_bridge_spec, resolve, ExperimentConfig, ResolvedConfig};
use crate::plot::{emit_plotdata, PlotKind, RunOutputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    LimitShape,
    EdgeStats,
    Rigidity,
    Dominance,
    Tw2,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::LimitShape => "limitshape",
            Command::EdgeStats => "edgestats",
            Command::Rigidity => "rigidity",
            Command::Dominance => "dominance",
            Command::Tw2 => "tw2",
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    workers: usize,
    config: &'a ResolvedConfig,
    artifacts: Vec<String>,
    warnings: &'a [String],
}

struct Timer {
    start: Instant,
    stages: BTreeMap<String, u128>,
    last: Instant,
}

impl Timer {
    fn new() -> Timer {
        let now = Instant::now();
        Timer {
            start: now,
            stages: BTreeMap::new(),
            last: now,
        }
    }

    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages
            .insert(name.to_string(), (now - self.last).as_millis());
        self.last = now;
    }

    fn finish(mut self, dir: &Path) -> Result<()> {
        self.stages
            .insert("total".into(), self.start.elapsed().as_millis());
        let text = serde_json::to_string_pretty(&self.stages)?;
        std::fs::write(dir.join("timings.json"), text)?;
        Ok(())
    }
}

/// Executes a command against a config file, writing artifacts to `out_dir`.
pub fn run_command(
    command: Command,
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let mut rc = resolve(&cfg, base_dir)?;
    if let Some(seed) = overrides.seed {
        rc.seed = seed;
    }
    if let Some(workers) = overrides.workers {
        rc.workers = workers;
    }
    std::fs::create_dir_all(out_dir)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if rc.workers > 0 {
        pool = pool.num_threads(rc.workers);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Integration(format!("worker pool: {e}")))?;
    pool.install(|| execute(command, &rc, out_dir))
}

fn execute(command: Command, rc: &ResolvedConfig, out_dir: &Path) -> Result<()> {
    for w in &rc.warnings {
        eprintln!("warning: {w}");
    }
    let mut timer = Timer::new();
    let mut artifacts: Vec<String> = Vec::new();

    match command {
        Command::Simulate => {
            let (ensemble, _) = run_sampler(rc)?;
            timer.stage("simulate");
            write_artifact(out_dir, "ensemble.csv", ensemble.to_csv_string(), &mut artifacts)?;
            std::fs::write(out_dir.join("ensemble.bin"), ensemble.to_bytes())?;
            artifacts.push("ensemble.bin".into());
            timer.stage("write");
        }
        Command::LimitShape => {
            let shape = build_shape(rc)?;
            timer.stage("solve");
            write_artifact(out_dir, "shape.json", shape.to_json_string()?, &mut artifacts)?;
            let mut dens = String::from("time,x,rho,u\n");
            for (k, t) in shape.times.iter().enumerate() {
                let d = &shape.densities[k];
                for (x, (v, u)) in d
                    .grid()
                    .iter()
                    .zip(d.values().iter().zip(&shape.velocities[k]))
                {
                    dens.push_str(&format!("{t},{x},{v},{u}\n"));
                }
            }
            write_artifact(out_dir, "shape_densities.csv", dens, &mut artifacts)?;
            timer.stage("write");
        }
        Command::EdgeStats => {
            let (ensemble, shape) = run_sampler(rc)?;
            let shape = match shape {
                Some(s) => s,
                None => build_shape(rc)?,
            };
            timer.stage("simulate");
            let edge = edge_statistics(&ensemble, &shape, rc.edge.time, rc.edge.side)?;
            let table = TwTable::build_default(rc.tw2.quad_nodes)?;
            timer.stage("oracle");
            let ks = ks_distance(&edge.eta, |s| table.cdf_at(s))?;
            let mean_eta = edge.eta.iter().sum::<f64>() / edge.eta.len() as f64;
            let (tw_mean, tw_var) = table.moments();
            #[derive(Serialize)]
            struct EdgeSummary {
                time: f64,
                side: nibb_core::burgers::Side,
                n: usize,
                samples: usize,
                scaling_edge: f64,
                scaling_s: f64,
                ks_distance: f64,
                mean_eta: f64,
                tw_mean: f64,
                tw_variance: f64,
            }
            let summary = EdgeSummary {
                time: rc.edge.time,
                side: rc.edge.side,
                n: ensemble.n(),
                samples: ensemble.samples(),
                scaling_edge: edge.scaling.edge,
                scaling_s: edge.scaling.s,
                ks_distance: ks,
                mean_eta,
                tw_mean,
                tw_variance: tw_var,
            };
            write_artifact(
                out_dir,
                "summary.json",
                serde_json::to_string_pretty(&summary)?,
                &mut artifacts,
            )?;
            let mut eta_csv = String::from("eta\n");
            for e in &edge.eta {
                eta_csv.push_str(&format!("{e}\n"));
            }
            write_artifact(out_dir, "edge_samples.csv", eta_csv, &mut artifacts)?;
            let outputs = RunOutputs {
                ensemble: Some(ensemble),
                shape: Some(shape),
                edge_samples: Some(edge.eta.clone()),
                table: Some(table),
                rigidity: None,
                plot_time: Some(rc.edge.time),
            };
            let p = emit_plotdata(&outputs, PlotKind::CdfOverlay, out_dir)?;
            artifacts.push(file_name(&p));
            let p = emit_plotdata(&outputs, PlotKind::DensityOverlay, out_dir)?;
            artifacts.push(file_name(&p));
            timer.stage("stats");
        }
        Command::Rigidity => {
            let (ensemble, shape) = run_sampler(rc)?;
            let shape = match shape {
                Some(s) => s,
                None => build_shape(rc)?,
            };
            timer.stage("simulate");
            let report = rigidity_report(&ensemble, &shape, rc.rigidity.time)?;
            let probes: Vec<Complex64> = rc
                .rigidity
                .z_probes
                .iter()
                .map(|&(re, im)| Complex64::new(re, im))
                .collect();
            let stieltjes = stieltjes_compare(&ensemble, &shape, rc.rigidity.time, &probes)?;
            write_artifact(
                out_dir,
                "rigidity.json",
                serde_json::to_string_pretty(&report)?,
                &mut artifacts,
            )?;
            write_artifact(
                out_dir,
                "stieltjes.json",
                serde_json::to_string_pretty(&stieltjes)?,
                &mut artifacts,
            )?;
            let outputs = RunOutputs {
                ensemble: Some(ensemble),
                shape: Some(shape),
                edge_samples: None,
                table: None,
                rigidity: Some(report),
                plot_time: Some(rc.rigidity.time),
            };
            let p = emit_plotdata(&outputs, PlotKind::RigidityCurve, out_dir)?;
            artifacts.push(file_name(&p));
            let p = emit_plotdata(&outputs, PlotKind::DensityOverlay, out_dir)?;
            artifacts.push(file_name(&p));
            timer.stage("stats");
        }
        Command::Dominance => {
            let spec_lo = build_bridge_spec(rc)?;
            let spec_hi = shift_terminal(&spec_lo, rc.dominance.shift)?;
            let (lo, hi) = if rc.drift_mode == DriftMode::MeanField {
                let shape = build_shape(rc)?;
                // The shifted run needs the shifted shape.
                let shape_hi = build_shifted_shape(rc, rc.dominance.shift)?;
                (
                    simulate_meanfield(&spec_lo, &shape)?,
                    simulate_meanfield(&spec_hi, &shape_hi)?,
                )
            } else {
                (simulate_bridge(&spec_lo)?, simulate_bridge(&spec_hi)?)
            };
            timer.stage("simulate");
            let report = dominance_test(&hi, &lo, rc.dominance.time)?;
            write_artifact(
                out_dir,
                "dominance.json",
                serde_json::to_string_pretty(&report)?,
                &mut artifacts,
            )?;
            timer.stage("stats");
        }
        Command::Tw2 => {
            if let Some(s) = rc.tw2.s {
                let f = tw2_cdf(s, rc.tw2.quad_nodes)?;
                println!("F2({s}) = {f}");
            }
            if rc.tw2.write_table || rc.tw2.s.is_none() {
                let table = TwTable::build_default(rc.tw2.quad_nodes)?;
                write_artifact(out_dir, "tw2_table.csv", table.to_csv_string(), &mut artifacts)?;
            }
            timer.stage("oracle");
        }
    }

    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: rc.seed,
        workers: rc.workers,
        config: rc,
        artifacts,
        warnings: &rc.warnings,
    };
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    timer.finish(out_dir)?;
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

fn write_artifact(
    dir: &Path,
    name: &str,
    content: String,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    std::fs::write(dir.join(name), content)?;
    artifacts.push(name.to_string());
    Ok(())
}

/// Shape slice times: the configured ones, or a ladder covering the
/// integration range plus every requested statistic time.
fn shape_times(rc: &ResolvedConfig) -> Vec<f64> {
    if let Some(times) = &rc.shape.times {
        return times.clone();
    }
    let t_max = rc
        .record_times
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .clamp(0.0, 1.0);
    let mut times: Vec<f64> = Vec::new();
    let rungs = 16usize;
    for k in 0..=rungs {
        times.push(t_max * k as f64 / rungs as f64);
    }
    times.extend(rc.record_times.iter().cloned());
    times.push(rc.edge.time);
    times.push(rc.rigidity.time);
    times.retain(|&t| (0.0..=1.0).contains(&t));
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    times
}

pub fn build_shape(rc: &ResolvedConfig) -> Result<LimitShape> {
    let opts = SolveOptions {
        tol: rc.shape.tol,
        grid_points: rc.shape.grid_points,
        ..SolveOptions::default()
    };
    solve_characteristics(&rc.mu_a, &rc.mu_b, &shape_times(rc), &opts)
}

fn build_shifted_shape(rc: &ResolvedConfig, shift: f64) -> Result<LimitShape> {
    let mut rc2 = rc.clone();
    rc2.mu_b = shift_measure(&rc.mu_b, shift)?;
    build_shape(&rc2)
}

fn shift_measure(
    m: &nibb_core::measures::Measure1D,
    c: f64,
) -> Result<nibb_core::measures::Measure1D> {
    use nibb_core::measures::{AtomicMeasure, GridDensity, Measure1D};
    Ok(match m {
        Measure1D::Atomic(a) => Measure1D::Atomic(AtomicMeasure::new(
            a.atoms().iter().map(|x| x + c).collect(),
        )?),
        Measure1D::Density(d) => Measure1D::Density(GridDensity::new_normalized(
            d.grid().iter().map(|x| x + c).collect(),
            d.values().to_vec(),
        )?),
    })
}

fn shift_terminal(spec: &BridgeSpec, shift: f64) -> Result<BridgeSpec> {
    let mut out = spec.clone();
    out.end = match &spec.end {
        EndCondition::Confluent(c) => EndCondition::Confluent(c + shift),
        EndCondition::Points(b) => EndCondition::Points(
            nibb_core::measures::WeylPoint::new(b.coords().iter().map(|x| x + shift).collect())?,
        ),
    };
    // Independent noise for the shifted ensemble.
    out.seed = spec.seed.wrapping_add(0x9e37_79b9);
    Ok(out)
}

/// Runs the configured sampler; mean-field mode solves the shape first.
pub fn run_sampler(rc: &ResolvedConfig) -> Result<(PathEnsemble, Option<LimitShape>)> {
    let spec = build_bridge_spec(rc)?;
    match rc.drift_mode {
        DriftMode::MeanField => {
            let shape = build_shape(rc)?;
            let ensemble = simulate_meanfield(&spec, &shape)?;
            Ok((ensemble, Some(shape)))
        }
        _ => Ok((simulate_bridge(&spec)?, None)),
    }
}
