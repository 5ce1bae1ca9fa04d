use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn, LevelFilter};
use netcal::config::SolverOverrides;
use netcal::format::{self, PosesFile};
use netcal::ply::PlyOptions;
use netcal::report::{schedule_jsonl, CalibrationReport, MetricsReport, Timing};
use netcal::{FormatError, Result};
use netcal_core::connectivity::build_interaction_graph;
use netcal_core::pipeline::{calibrate_frs, PipelineConfig};
use netcal_core::sim::{describe, preset_scene, Preset};
use netcal_core::Error;

#[derive(Parser)]
#[command(name = "netcal", version, about = "Extrinsic calibration of asynchronous camera networks")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
    /// Worker threads for relationship estimation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON solver overrides: lambda0, max_iterations, sanity_gate_px, rotation_diversity.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.json and ground_truth.json.
    Simulate {
        #[arg(long, value_parser = parse_preset)]
        preset: Preset,
        /// RMS corner displacement in pixels.
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        /// Detection dropout probability (default: the preset's own).
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        seed: u64,
    },
    /// Solve every pose and write report.json, solution_step4.json and solution.json.
    Calibrate {
        dataset: PathBuf,
        /// Write the interaction graph as Graphviz DOT.
        #[arg(long)]
        emit_graph: Option<PathBuf>,
        /// Write the initialization schedule as JSON lines.
        #[arg(long)]
        log_init: Option<PathBuf>,
        /// Calibrate only this connected component.
        #[arg(long)]
        component: Option<usize>,
    },
    /// Write metrics.json for an existing solution.
    Evaluate { solution: PathBuf, dataset: PathBuf },
    /// Write camera pyramids and pattern corners as ASCII PLY.
    ExportPly {
        solution: PathBuf,
        output: PathBuf,
        /// Draw one pyramid per time for a single-camera solution.
        #[arg(long = "virtual")]
        virtual_track: bool,
        /// Pyramid depth in millimeters.
        #[arg(long, default_value_t = 100.0)]
        frustum_depth: f64,
    },
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    Preset::parse(s).ok_or_else(|| {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset {s:?}; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                FormatError::Calibration(inner) => netcal::exit_code(inner),
                _ => 1,
            };
            ExitCode::from(code as u8)
        }
    }
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let cfg = PipelineConfig::default();
    match &cli.config {
        Some(path) => SolverOverrides::load(path)?.apply(cfg),
        None => Ok(cfg),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate {
            preset,
            sigma,
            dropout,
            seed,
        } => {
            let scene = preset_scene(*preset, *sigma, *dropout, *seed)?;
            if scene.components > 1 {
                warn!("simulated dataset has {} connected components", scene.components);
            }
            format::save_dataset(&cli.out.join("dataset.json"), &scene.dataset)?;
            format::write_json(
                &cli.out.join("ground_truth.json"),
                &PosesFile::from_truth(&scene.truth, &scene.dataset.patterns),
            )?;
            info!("{preset}: {}", describe(&scene));
            Ok(())
        }
        Command::Calibrate {
            dataset,
            emit_graph,
            log_init,
            component,
        } => calibrate(cli, dataset, emit_graph.as_deref(), log_init.as_deref(), *component),
        Command::Evaluate { solution, dataset } => {
            let cfg = pipeline_config(cli)?;
            let data = format::load_dataset(dataset)?;
            let eval = netcal::evaluate_solution(&format::load_poses(solution)?, &data, &cfg)?;
            println!(
                "ae {:.6e}  rrmse {:.6} px  rae median {:.6e} mm² over {} points",
                eval.ae,
                eval.rrmse,
                eval.rae.median,
                eval.rae.points.len()
            );
            format::write_json(&cli.out.join("metrics.json"), &MetricsReport::from(&eval))
        }
        Command::ExportPly {
            solution,
            output,
            virtual_track,
            frustum_depth,
        } => {
            let opts = PlyOptions {
                frustum_depth: *frustum_depth,
            };
            let mesh = netcal::solution_mesh(&format::load_poses(solution)?, *virtual_track, &opts)?;
            write_text(output, &mesh.to_ascii())?;
            info!("{} vertices, {} faces", mesh.vertices.len(), mesh.faces.len());
            Ok(())
        }
    }
}

fn calibrate(
    cli: &Cli,
    dataset: &Path,
    emit_graph: Option<&Path>,
    log_init: Option<&Path>,
    component: Option<usize>,
) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    let data = format::load_dataset(dataset)?;
    let start = Instant::now();
    let frs = netcal::select_component(netcal::relationships(&data, &cfg)?, component)?;
    let graph = build_interaction_graph(&frs)?;
    if let Some(path) = emit_graph {
        write_text(path, &graph.to_dot())?;
    }
    let comps = netcal::components(&frs)?;
    if comps.count > 1 {
        eprintln!("{} components:", comps.count);
        for (k, members) in netcal::component_listing(&comps).iter().enumerate() {
            let names: Vec<String> = members.iter().map(|v| v.to_string()).collect();
            eprintln!("  component {k}: {}", names.join(" "));
        }
        return Err(Error::Disconnected { count: comps.count }.into());
    }
    let cal = calibrate_frs(frs, &data, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();

    if let Some(path) = log_init {
        write_text(path, &schedule_jsonl(&cal.schedule))?;
    }
    let report = CalibrationReport::new(&cal, component);
    format::write_json(&cli.out.join("report.json"), &report)?;
    format::write_json(
        &cli.out.join("solution_step4.json"),
        &PosesFile::from_pool(&cal.initial.pool, &data.patterns),
    )?;
    format::write_json(
        &cli.out.join("solution.json"),
        &PosesFile::from_pool(&cal.refined.pool, &data.patterns),
    )?;
    format::write_json(
        &cli.out.join("timing.json"),
        &Timing {
            schema_version: format::SCHEMA_VERSION,
            seconds,
        },
    )?;
    println!(
        "reference P{} T{}; {} relationships; {} pair solves",
        cal.reference.pattern,
        cal.reference.time,
        cal.frs.len(),
        cal.pair_solves()
    );
    println!(
        "step 4: rrmse {:.6} px  ae {:.6e}\nstep 5: rrmse {:.6} px  ae {:.6e}  ({}, {} iterations, {:.2} s)",
        cal.initial.rrmse,
        cal.initial.ae,
        cal.refined.rrmse,
        cal.refined.ae,
        cal.refinement.termination.as_str(),
        cal.refinement.iterations,
        seconds
    );
    Ok(())
}
