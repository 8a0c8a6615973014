use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lodrefine::evaluation::{evaluate, per_point_csv};
use lodrefine::model::{load_model_obj, write_atomic, CoarseModel};
use lodrefine::pipeline::*;
use lodrefine::pointcloud::{load_cloud_auto, PointCloud};
use lodrefine::selection::{build_problem, export_lp, SolveStatus};
use lodrefine::{Error, Result};

#[derive(Parser)]
#[command(name = "lodrefine", version, about = "Refine coarse building models with planar scan evidence")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `selection.tau_cov=0.4`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Refine one building from one cloud. Several models make it pick the
    /// best match first.
    Refine {
        #[command(flatten)]
        inputs: SingleInputs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dumps: DumpFlags,
    },
    /// Route every cloud to its best model and refine all matched buildings.
    RefineBatch {
        /// Model OBJ files or directories of them.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// Cloud files (.xyz or .ply).
        #[arg(long = "cloud", required = true)]
        clouds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dumps: DumpFlags,
    },
    /// Cloud-to-mesh statistics and validity for an initial and a refined model.
    Evaluate {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        initial: PathBuf,
        #[arg(long)]
        refined: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-point signed distances as CSV.
        #[arg(long)]
        per_point: Option<PathBuf>,
    },
    /// Refine model/cloud pairs for each threshold and tabulate accuracy and validity.
    SweepTau {
        /// Paired by position with `--cloud`.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long = "cloud", required = true)]
        clouds: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        taus: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the selection program of one building in CPLEX LP format.
    ExportLp {
        #[command(flatten)]
        inputs: SingleInputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the candidate faces, their adjacency and confidences.
    DumpCandidates {
        #[command(flatten)]
        inputs: SingleInputs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SingleInputs {
    /// Model OBJ file. Repeat to choose among several.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    cloud: PathBuf,
}

#[derive(Args)]
struct DumpFlags {
    /// Write each detected planar cluster as a PLY file.
    #[arg(long)]
    debug_clusters: bool,
    /// Write the candidate arrangement as OBJ plus adjacency JSON.
    #[arg(long)]
    dump_candidates: bool,
    /// Write per-face confidence terms as CSV.
    #[arg(long)]
    dump_confidence: bool,
    /// Write per-point signed distances before and after as CSV.
    #[arg(long)]
    dump_distances: bool,
}

impl DumpFlags {
    fn options(&self) -> DumpOptions {
        DumpOptions {
            clusters: self.debug_clusters,
            candidates: self.dump_candidates,
            confidence: self.dump_confidence,
            per_point: self.dump_distances,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            let cat = e.category();
            eprintln!("error [{}]: {e}", cat.as_str());
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    let sets = cli
        .overrides
        .iter()
        .map(|s| {
            s.split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{s}` must look like section.key=value")))
        })
        .collect::<Result<Vec<_>>>()?;
    cfg.apply_overrides(sets)?;
    Ok(cfg)
}

fn expand_models(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| Error::io(format!("listing {}", p.display()), e))?;
            let mut objs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")))
                .collect();
            objs.sort();
            out.extend(objs);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<CoarseModel>> {
    paths.iter().map(|p| load_model_obj(p)).collect()
}

fn load_clouds(paths: &[PathBuf]) -> Result<Vec<PointCloud>> {
    paths.iter().map(|p| load_cloud_auto(p)).collect()
}

fn input_refs(groups: &[&[PathBuf]]) -> Vec<PathBuf> {
    groups.iter().flat_map(|g| g.iter().cloned()).collect()
}

fn manifest_for(command: &str, cfg: &PipelineConfig, inputs: &[PathBuf]) -> Result<RunManifest> {
    let refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    RunManifest::new(command, cfg, &refs)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn prepare_single(inputs: &SingleInputs, cfg: &PipelineConfig) -> Result<Prepared> {
    let models = load_models(&inputs.models)?;
    let cloud = load_cloud_auto(&inputs.cloud)?;
    let refs: Vec<&CoarseModel> = models.iter().collect();
    prepare(&refs, &cloud, cfg)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let started = Instant::now();
    match &cli.command {
        Command::Refine { inputs, out, dumps } => {
            let paths = input_refs(&[&inputs.models, std::slice::from_ref(&inputs.cloud)]);
            let mut manifest = manifest_for("refine", &cfg, &paths)?;
            create_dir(out)?;
            let t = Instant::now();
            let result = prepare_single(inputs, &cfg).and_then(|p| select_and_evaluate(p, &cfg.selection));
            let model_id = match &result {
                Ok(o) => o.model_id.clone(),
                Err(_) => String::new(),
            };
            manifest.buildings.push(BuildingRecord {
                model_id,
                status: BuildingStatus::from_result(&result),
                clouds: vec![0],
                wall_time_s: t.elapsed().as_secs_f64(),
            });
            manifest.wall_time_s = started.elapsed().as_secs_f64();
            let outcome = result.and_then(|o| {
                write_refine_outputs(out, &o, &dumps.options())?;
                Ok(o)
            });
            manifest.write(&out.join("manifest.json"))?;
            let o = outcome?;
            log::info!(
                "{}: rmse {:.4} -> {:.4} m, {} faces",
                o.model_id,
                o.report.c2m_before.rmse,
                o.report.c2m_after.rmse,
                o.refined.faces.len()
            );
            if o.solution.status == SolveStatus::Timeout {
                log::warn!("solver time limit reached; wrote the best selection found");
                return Ok(ExitCode::from(lodrefine::ErrorCategory::Timeout.exit_code() as u8));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::RefineBatch {
            models,
            clouds,
            out,
            dumps,
        } => {
            let model_paths = expand_models(models)?;
            let paths = input_refs(&[&model_paths, clouds]);
            let mut manifest = manifest_for("refine-batch", &cfg, &paths)?;
            let models = load_models(&model_paths)?;
            let clouds = load_clouds(clouds)?;
            let result = refine_batch(&models, &clouds, &cfg)?;
            write_batch_outputs(out, &models, &result, &dumps.options(), &mut manifest)?;
            manifest.wall_time_s = started.elapsed().as_secs_f64();
            manifest.write(&out.join("manifest.json"))?;
            let s = &result.summary;
            log::info!(
                "{} buildings: {} refined, {} skipped, {} failed",
                s.n_buildings,
                s.n_refined,
                s.n_skipped,
                s.n_failed
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            cloud,
            initial,
            refined,
            out,
            per_point,
        } => {
            let pc = load_cloud_auto(cloud)?;
            let init = load_model_obj(initial)?;
            let refd = load_model_obj(refined)?;
            let mut report = evaluate(&pc, &init.faces, &refd.faces, per_point.is_some())?;
            if let Some(p) = per_point {
                let csv = per_point_csv(&report).expect("per-point distances were requested");
                write_atomic(p, csv.as_bytes())?;
            }
            report.c2m_before.per_point_distances = None;
            report.c2m_after.per_point_distances = None;
            let json = to_json(&report);
            match out {
                Some(p) => write_atomic(p, &json)?,
                None => print!("{}", String::from_utf8_lossy(&json)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepTau {
            models,
            clouds,
            taus,
            out,
        } => {
            if models.len() != clouds.len() {
                return Err(Error::Config(format!(
                    "{} models but {} clouds; pass them in pairs",
                    models.len(),
                    clouds.len()
                )));
            }
            let paths = input_refs(&[models, clouds]);
            let mut manifest = manifest_for("sweep-tau", &cfg, &paths)?;
            let pairs: Vec<(CoarseModel, PointCloud)> =
                load_models(models)?.into_iter().zip(load_clouds(clouds)?).collect();
            let rows = sweep_tau(&pairs, taus, &cfg)?;
            create_dir(out)?;
            write_atomic(&out.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
            manifest.wall_time_s = started.elapsed().as_secs_f64();
            manifest.write(&out.join("manifest.json"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportLp { inputs, out } => {
            let prepared = prepare_single(inputs, &cfg)?;
            let problem = build_problem(&prepared.candidates, &cfg.selection)?;
            export_lp(&problem, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpCandidates { inputs, out } => {
            let paths = input_refs(&[&inputs.models, std::slice::from_ref(&inputs.cloud)]);
            let mut manifest = manifest_for("dump-candidates", &cfg, &paths)?;
            let prepared = prepare_single(inputs, &cfg)?;
            create_dir(out)?;
            let id = &prepared.model.id;
            let set = prepared.candidates.translated(&prepared.origin);
            write_atomic(&out.join(format!("{id}.candidates.obj")), set.to_obj().as_bytes())?;
            write_atomic(&out.join(format!("{id}.candidates.json")), &to_json(&set.adjacency_json()))?;
            write_atomic(
                &out.join(format!("{id}.confidence.csv")),
                lodrefine::confidence::confidence_csv(&prepared.confidences).as_bytes(),
            )?;
            manifest.wall_time_s = started.elapsed().as_secs_f64();
            manifest.write(&out.join("manifest.json"))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
