//! `microinsert`: scan, register and run insertion experiments from the command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use microinsert::experiment::{make_reference_cloud_file, needle, run_with, usb, CropBox, Harness, ScenarioConfig, Strategy, TraceEvent};
use microinsert::insertion::plan_relative_trajectory;
use microinsert::io::PlyFormat;
use microinsert::registration::{estimate_pose, RegistrationParams};
use microinsert::{Error, PointCloud};

#[derive(Parser)]
#[command(name = "microinsert", version, about = "Laser-scan guided micro insertion")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a built-in scenario as JSON, as a starting point for your own.
    Scenario {
        #[arg(value_enum)]
        name: Builtin,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sweep the scanner over a scenario's recorded scene and write the cloud as PLY.
    Scan {
        #[command(flatten)]
        source: Source,
        #[arg(short, long)]
        out: PathBuf,
        /// Scanner noise seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Which parts to keep.
        #[arg(long, value_enum, default_value_t = Parts::All)]
        part: Parts,
        #[arg(long)]
        ascii: bool,
    },
    /// Estimate the pose of a reference cloud inside a scan; writes diagnostics JSON.
    Register {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Registration parameters as JSON; missing keys take their defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sample an STL or OBJ mesh into a PLY cloud with normals.
    SampleMesh {
        mesh: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only points inside `minx,miny,minz,maxx,maxy,maxz`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        crop: Option<Vec<f64>>,
    },
    /// Run every trial of a scenario; writes report.json and trials.csv.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the number of arm instances per initial condition.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-run one trial from its record and print a step-by-step trace as JSON.
    Replay {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        initial: usize,
        /// The `seed` column of the trial record.
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write each planned correction as `t,x,y,z,qw,qx,qy,qz` CSV (suffixed per attempt).
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Needle,
    Usb,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Parts {
    All,
    Target,
    Object,
}

fn builtin(b: Builtin) -> Result<ScenarioConfig> {
    Ok(match b {
        Builtin::Needle => needle()?,
        Builtin::Usb => usb()?,
    })
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.scenario, self.builtin) {
            (Some(p), _) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display())),
            (None, Some(b)) => builtin(b),
            (None, None) => bail!("give --scenario or --builtin"),
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn scan(source: &Source, out: &Path, seed: u64, part: Parts, ascii: bool) -> Result<()> {
    let harness = Harness::new(&source.load()?)?;
    let labeled = harness.scan_nominal(seed)?;
    let cloud = match part {
        Parts::All => labeled.cloud,
        Parts::Target => labeled.part(0),
        Parts::Object => labeled.part(1),
    };
    let fmt = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    cloud.save_ply(out, fmt).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("{} points -> {}", cloud.len(), out.display());
    Ok(())
}

fn register(scan: &Path, reference: &Path, params: Option<&Path>, seed: u64, out: Option<&Path>) -> Result<()> {
    let load = |p: &Path| PointCloud::load_ply(p).with_context(|| format!("reading {}", p.display()));
    let (scan, reference) = (load(scan)?, load(reference)?);
    let params: RegistrationParams = match params {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RegistrationParams::default(),
    };
    params.validate()?;
    // A failed registration is a result, not an error.
    let diag = match estimate_pose(&scan, &reference, &params, seed) {
        Ok(r) => json!({ "converged": true, "result": r }),
        Err(Error::RegistrationFailed { loops, best_fitness, best }) => json!({
            "converged": false,
            "error": format!("no estimate reached rho_icp in {loops} outer loops"),
            "best_fitness": best_fitness,
            "result": best,
        }),
        Err(e @ (Error::PreprocessingDegenerate | Error::DegenerateFeature(_) | Error::InsufficientCorrespondences { .. } | Error::Divergence { .. })) => {
            json!({ "converged": false, "error": e.to_string(), "result": null })
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&diag, out)
}

fn sample_mesh(mesh: &Path, out: &Path, count: usize, seed: u64, crop: Option<&[f64]>) -> Result<()> {
    if crop.is_some_and(|c| c.len() != 6) {
        bail!("--crop takes six numbers: minx,miny,minz,maxx,maxy,maxz");
    }
    let crop = crop.map(|c| CropBox { min: [c[0], c[1], c[2]], max: [c[3], c[4], c[5]] });
    let cloud = make_reference_cloud_file(mesh, out, count, seed, crop.as_ref()).with_context(|| format!("sampling {}", mesh.display()))?;
    eprintln!("{} points -> {}", cloud.len(), out.display());
    Ok(())
}

fn run(source: &Source, out_dir: &Path, trials: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut cfg = source.load()?;
    if let Some(t) = trials {
        cfg.trials_per_condition = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let harness = Harness::new(&cfg)?;
    let report = run_with(&harness)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let json_path = out_dir.join("report.json");
    let csv_path = out_dir.join("trials.csv");
    report.write_json(BufWriter::new(File::create(&json_path).with_context(|| format!("creating {}", json_path.display()))?))?;
    report.write_csv(BufWriter::new(File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?))?;
    println!("scenario {} ({} trials per condition, seed {})", report.scenario, report.trials_per_condition, report.master_seed);
    for s in &report.strategies {
        println!(
            "{:<16} {:>3}/{:<3} {:>6.1}%  (first scan {:.1}%)",
            s.strategy.label(),
            s.successes,
            s.trials,
            100.0 * s.success_rate,
            100.0 * s.raw_success_rate
        );
    }
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn replay(source: &Source, strategy: &str, initial: usize, seed: u64, out: Option<&Path>, trajectory: Option<&Path>) -> Result<()> {
    let cfg = source.load()?;
    let strategy: Strategy = strategy.parse()?;
    if initial >= cfg.initial_configs.len() {
        bail!("initial index {initial} out of range (scenario has {})", cfg.initial_configs.len());
    }
    let harness = Harness::new(&cfg)?;
    let (record, trace) = harness.run_trial_traced(strategy, initial, seed)?;
    if let Some(base) = trajectory {
        let corrections = trace.iter().filter_map(|e| match e {
            TraceEvent::Correction { p_obj, p_target, .. } => Some((p_obj, p_target)),
            _ => None,
        });
        for (k, (a, b)) in corrections.enumerate() {
            let traj = plan_relative_trajectory(a, b, cfg.trajectory_steps, cfg.trajectory_duration)?;
            let path = if k == 0 { base.to_path_buf() } else { base.with_extension(format!("{k}.csv")) };
            traj.write_csv(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))?;
        }
    }
    write_json(&json!({ "record": record, "trace": trace }), out)
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Scenario { name, out } => {
            let cfg = builtin(name)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", cfg.to_json()?)?;
            w.flush()?;
            Ok(())
        }
        Command::Scan { source, out, seed, part, ascii } => scan(&source, &out, seed, part, ascii),
        Command::Register { scan, reference, params, seed, out } => register(&scan, &reference, params.as_deref(), seed, out.as_deref()),
        Command::SampleMesh { mesh, out, count, seed, crop } => sample_mesh(&mesh, &out, count, seed, crop.as_deref()),
        Command::Run { source, out_dir, trials, seed } => run(&source, &out_dir, trials, seed),
        Command::Replay { source, strategy, initial, seed, out, trajectory } => {
            replay(&source, &strategy, initial, seed, out.as_deref(), trajectory.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
