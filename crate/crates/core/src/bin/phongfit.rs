//! Command line front end: single fits, studies, timing probes and sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phong_fit::bench::{
    self, host_info, parse_study_config, run_chain_study, run_study, run_sweep, sample_observations, timing_probe,
    version_string, write_chain_study, write_study, write_sweep, ArmSpec, BenchModel, ChainStudyConfig, ModelId,
    SamplingSpec, StudyConfig, SweepConfig,
};
use phong_fit::energy::{FitConfig, Observation, Optimizer};
use phong_fit::kinematics::{PoseModel, RigidModel, SkinnedModel};
use phong_fit::mesh::read_mesh_file;
use phong_fit::solvers::run_fit;
use phong_fit::surfaces::SurfaceKind;

type Error = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(name = "phongfit", version, about = "Fit Phong surfaces and triangle meshes to oriented points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model to one point set.
    Fit(FitArgs),
    /// Run the rigid ellipsoid study or, with `--model chain3`, the chain study.
    Study(StudyArgs),
    /// Time surface evaluation.
    Probe(ProbeArgs),
    /// Sweep the normal weight.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Sampling {
    /// Per-component noise amplitude.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Sample only patches facing the +z camera.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    visible_only: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    /// Built-in model name or a skinned model JSON file.
    #[arg(long, conflicts_with = "mesh")]
    model: Option<String>,
    /// Mesh file fitted rigidly.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// CSV with columns x,y,z,nx,ny,nz. Without it, data are sampled from
    /// the model at `--truth`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma separated parameters used to generate data.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth: Option<Vec<f64>>,
    /// Comma separated starting parameters; zeros by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value = "phong")]
    surface: SurfaceKind,
    #[arg(long, default_value = "lifted")]
    optimizer: Optimizer,
    #[arg(long, default_value_t = 1.0)]
    lambda_n: f64,
    #[arg(long, default_value_t = 50)]
    iters: usize,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    /// JSON study config; overrides the other study flags except
    /// `--jobs` and `--out-dir`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "ellipsoid-320")]
    model: ModelId,
    /// Surfaces to compare; repeat or comma separate.
    #[arg(long, value_delimiter = ',', default_value = "phong,trimesh")]
    surface: Vec<SurfaceKind>,
    #[arg(long, value_delimiter = ',', default_value = "lifted,icp")]
    optimizer: Vec<Optimizer>,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    lambda_n: Vec<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 400)]
    trials: usize,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    /// Surfaces to time; both by default.
    #[arg(long, value_delimiter = ',', default_value = "phong,trimesh")]
    surface: Vec<SurfaceKind>,
    #[arg(long, default_value_t = 1_000_000)]
    count: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, default_value = "ellipsoid-320")]
    model: ModelId,
    #[arg(long, value_delimiter = ',', default_value = "phong,trimesh")]
    surface: Vec<SurfaceKind>,
    #[arg(long, default_value = "lifted")]
    optimizer: Optimizer,
    /// Weights to try; 0, 0.05, ..., 1 by default.
    #[arg(long, value_delimiter = ',')]
    lambda_n: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 400)]
    trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Study(a) => study(a),
        Command::Probe(a) => probe(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

enum LoadedModel {
    Bench(BenchModel),
    Rigid(RigidModel),
    Skinned(SkinnedModel),
}

impl LoadedModel {
    fn as_model(&self) -> &dyn PoseModel {
        match self {
            LoadedModel::Bench(m) => m.as_model(),
            LoadedModel::Rigid(m) => m,
            LoadedModel::Skinned(m) => m,
        }
    }
}

fn load_model(args: &FitArgs) -> Result<LoadedModel, Error> {
    if let Some(path) = &args.mesh {
        return Ok(LoadedModel::Rigid(RigidModel::new(read_mesh_file(path)?)));
    }
    let name = args.model.as_deref().unwrap_or("ellipsoid-320");
    if let Ok(id) = name.parse::<ModelId>() {
        return Ok(LoadedModel::Bench(BenchModel::build(id)?));
    }
    Ok(LoadedModel::Skinned(SkinnedModel::load(name)?))
}

#[derive(serde::Deserialize)]
struct ObservationRow {
    x: f64,
    y: f64,
    z: f64,
    nx: f64,
    ny: f64,
    nz: f64,
}

fn read_observations(path: &Path) -> Result<Vec<Observation>, Error> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut data = Vec::new();
    for (i, row) in reader.deserialize::<ObservationRow>().enumerate() {
        let r = row?;
        let obs = Observation::new(Vector3::new(r.x, r.y, r.z), Vector3::new(r.nx, r.ny, r.nz))
            .map_err(|e| format!("{}: row {}: {e}", path.display(), i + 1))?;
        data.push(obs);
    }
    Ok(data)
}

fn parameters(values: &Option<Vec<f64>>, count: usize, what: &str) -> Result<DVector<f64>, Error> {
    match values {
        None => Ok(DVector::zeros(count)),
        Some(v) if v.len() == count => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(format!("--{what} has {} values, the model takes {count}", v.len()).into()),
    }
}

fn fit(args: FitArgs) -> Result<(), Error> {
    let loaded = load_model(&args)?;
    let model = loaded.as_model();
    let p = model.parameter_count();
    let data = match &args.data {
        Some(path) => read_observations(path)?,
        None => {
            let truth = parameters(&args.truth, p, "truth")?;
            let spec = SamplingSpec {
                count: args.count,
                noise: args.sampling.noise,
                symmetric_noise: false,
                visible_only: args.sampling.visible_only,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
            sample_observations(model, &truth, &spec, &mut rng)?.observations
        }
    };
    let start = parameters(&args.start, p, "start")?;
    let config = FitConfig {
        lambda_n: args.lambda_n,
        surface: args.surface,
        optimizer: args.optimizer,
        max_iterations: args.iters,
        ..FitConfig::default()
    };
    let report = run_fit(model, &data, &start, &config)?;

    println!(
        "{} iterations, converged {}, energy {:.6e} -> {:.6e}",
        report.iterations,
        report.converged,
        report.energy_trace[0],
        report.energy_trace.last().copied().unwrap_or(f64::NAN)
    );
    let theta: Vec<String> = report.theta.iter().map(|x| format!("{x:.6}")).collect();
    println!("theta [{}]", theta.join(", "));

    let dir = &args.common.out_dir;
    std::fs::create_dir_all(dir)?;
    let trace = dir.join("fit_trace.csv");
    let mut w = csv::Writer::from_path(&trace)?;
    w.write_record(["iteration", "energy"])?;
    for (k, e) in report.energy_trace.iter().enumerate() {
        w.write_record([k.to_string(), e.to_string()])?;
    }
    w.flush()?;
    let manifest = dir.join("fit.json");
    let doc = serde_json::json!({
        "version": version_string(),
        "host": host_info(),
        "config": config,
        "data_count": data.len(),
        "report": report,
    });
    std::fs::write(&manifest, serde_json::to_string_pretty(&doc)? + "\n")?;
    report_written(&[trace, manifest]);
    Ok(())
}

fn study(args: StudyArgs) -> Result<(), Error> {
    let dir = &args.common.out_dir;
    if args.config.is_none() && args.model == ModelId::Chain3 {
        let mut config = ChainStudyConfig {
            seed: args.common.seed,
            trials: args.trials,
            noise: args.sampling.noise,
            jobs: args.common.jobs,
            ..ChainStudyConfig::default()
        };
        if let Some(&s) = args.surface.first() {
            config.surface = s;
        }
        if let Some(&o) = args.optimizer.first() {
            config.optimizer = o;
        }
        if let Some(&l) = args.lambda_n.last() {
            config.lambda_n = l;
        }
        if let Some(i) = args.iters {
            config.iterations = i;
        }
        let result = run_chain_study(&config)?;
        println!(
            "chain3: {} trials, {:.1}% reduced energy by 10x",
            result.trials.len(),
            100.0 * result.fraction_reduced(10.0)
        );
        report_written(&write_chain_study(&result, dir)?);
        return Ok(());
    }

    let mut config = match &args.config {
        Some(path) => parse_study_config(&std::fs::read_to_string(path)?)?,
        None => {
            let mut arms = Vec::new();
            for &surface in &args.surface {
                for &optimizer in &args.optimizer {
                    for &lambda_n in &args.lambda_n {
                        arms.push(ArmSpec::new(surface, optimizer, lambda_n));
                    }
                }
            }
            let mut c = StudyConfig::new(args.common.seed, args.trials, arms);
            c.models = vec![args.model];
            c.noise = args.sampling.noise;
            c.visible_only = args.sampling.visible_only;
            if let Some(i) = args.iters {
                c.iterations = i;
                c.checkpoints.retain(|&k| k <= i);
            }
            c
        }
    };
    config.jobs = args.common.jobs;
    let result = run_study(&config)?;
    println!("{} trials per arm, {:.1} s", config.trials, result.wall_seconds);
    for arm in &result.arms {
        let s = arm.summary_at(config.iterations);
        println!("{:<16} {:<24} {:>9.3} deg +- {:.3}", arm.model.name(), arm.label(), s.mean, s.stderr);
    }
    report_written(&write_study(&result, dir)?);
    Ok(())
}

fn probe(args: ProbeArgs) -> Result<(), Error> {
    let dir = &args.common.out_dir;
    std::fs::create_dir_all(dir)?;
    let path = dir.join("probe.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for &surface in &args.surface {
        let r = timing_probe(surface, args.count)?;
        println!(
            "{:<8} eval {:.4} s, with d/du {:.4} s ({} / {} flops per point)",
            format!("{surface:?}").to_lowercase(),
            r.eval_seconds,
            r.derivative_seconds,
            r.flops_per_eval,
            r.flops_per_derivative_eval
        );
        w.serialize(r)?;
    }
    w.flush()?;
    report_written(&[path]);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let config = SweepConfig {
        seed: args.common.seed,
        trials: args.trials,
        model: args.model,
        surfaces: args.surface,
        optimizer: args.optimizer,
        lambda_n: args.lambda_n.unwrap_or_else(bench::default_lambda_grid),
        iterations: args.iters,
        noise: args.sampling.noise,
        visible_only: args.sampling.visible_only,
        jobs: args.common.jobs,
        ..SweepConfig::default()
    };
    let result = run_sweep(&config)?;
    for &surface in &config.surfaces {
        if let Some(best) = result.best(surface) {
            println!(
                "{:<8} best lambda_n {:.2}: {:.3} deg",
                format!("{surface:?}").to_lowercase(),
                best.lambda_n,
                best.mean_error_deg
            );
        }
    }
    report_written(&write_sweep(&result, &args.common.out_dir)?);
    Ok(())
}
