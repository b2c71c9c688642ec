//! Command-line entry points: data simulation, training, evaluation, the
//! masked-gain diagnostic, and seed sweeps, with JSON/CSV artifacts.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::benchmarks::dataset::{load_dataset, Dataset};
use crate::benchmarks::{Benchmark, SimNoise};
use crate::error::{Error, Result};
use crate::eval::{
    assimilate_state, joint_gain_diagnostic, nrmse, rollout, seed_from_measurement,
};
use crate::filter::{train_with, NoiseConfig, TrainConfig};
use crate::model::{HybridModel, MeasurementMap, StateVector};
use crate::net::{FlatWeights, MlpSpec};

const CHECKPOINT_VERSION: u32 = 1;

/// Learning of unmeasured ODE sub-dynamics from partial observations.
#[derive(Parser)]
#[command(name = "hidden-ode", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset CSV.
    Simulate(SimulateArgs),
    /// Train the hidden sub-dynamics on a dataset.
    Train(TrainArgs),
    /// Roll out a checkpoint and report accuracy.
    Eval(EvalArgs),
    /// Show why joint state-and-parameter filtering stalls under partial
    /// measurement, and that the alternating update does not.
    Diagnose(DiagnoseArgs),
    /// Train several seeds in parallel and summarize.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark name: hh | cartpole | ho | yeast.
    system: String,
    /// Number of samples (defaults to the benchmark's protocol).
    #[arg(long)]
    steps: Option<usize>,
    /// Step size override in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Noise seed (only used when noise is enabled).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Std of per-step process noise (0 = off).
    #[arg(long, default_value_t = 0.0)]
    noise_process: f64,
    /// Std of additive measurement noise (0 = off).
    #[arg(long, default_value_t = 0.0)]
    noise_measurement: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Benchmark name providing the known physics and architecture.
    system: String,
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Seed for the network initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Process-noise scale Q_x = q_x·I.
    #[arg(long, default_value_t = 1e-5)]
    q_x: f64,
    /// Parameter-drift scale Q_θ = q_theta·I.
    #[arg(long, default_value_t = 1e-2)]
    q_theta: f64,
    /// Measurement-noise scale R_y = r_y·I.
    #[arg(long, default_value_t = 1e-10)]
    r_y: f64,
    /// Initial state-covariance scale.
    #[arg(long, default_value_t = 1e-2)]
    p_x0: f64,
    /// Initial parameter-covariance scale.
    #[arg(long, default_value_t = 1e2)]
    p_theta0: f64,
    /// Checkpoint JSON output path.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Learning-curve CSV output path.
    #[arg(long)]
    curve: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint JSON from `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset CSV to evaluate against.
    #[arg(long)]
    data: PathBuf,
    /// Re-acquire the latent state from this many leading samples before
    /// rolling out (held-out records); 0 rolls out from the stored x0.
    #[arg(long, default_value_t = 0)]
    assimilate: usize,
    /// Estimated-trajectory CSV output path.
    #[arg(long)]
    trajectory: PathBuf,
    /// Accuracy report JSON output path.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Benchmark name.
    system: String,
    /// Measure every state component instead of the benchmark's subset.
    #[arg(long, default_value_t = false)]
    measure_all: bool,
    /// Seed for the probe parameters.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit machine-readable JSON instead of text.
    #[arg(long, default_value_t = false)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Benchmark name.
    system: String,
    /// Dataset CSV shared by all runs; generated fresh when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated seed list, e.g. 0,1,2,3.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Output directory for per-seed artifacts and the summary CSV.
    #[arg(long)]
    out: PathBuf,
}

/// Serialized training artifact.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub benchmark: String,
    pub net: MlpSpec,
    pub theta: FlatWeights,
    pub x0: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub q_x: f64,
    pub q_theta: f64,
    pub r_y: f64,
    pub p_x0: f64,
    pub p_theta0: f64,
    pub final_loss: f64,
}

#[derive(Serialize)]
struct Report {
    per_component_nrmse: Option<Vec<f64>>,
    overall_nrmse: Option<f64>,
    hidden_mean_nrmse: Option<f64>,
    measured_mean_nrmse: Option<f64>,
    samples: usize,
    assimilated_samples: usize,
}

#[derive(Serialize)]
struct DiagnoseReport {
    system: String,
    measured_indices: Vec<usize>,
    product_max_abs: f64,
    joint_gain_max_abs: f64,
    alternating_gain_max_abs: f64,
    masked_structure_holds: bool,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn check_model_against_data(model: &HybridModel, data: &Dataset) -> Result<()> {
    if data.dim_u() != model.dim_u() || data.dim_y() != model.dim_y() {
        return Err(Error::Dimension(format!(
            "dataset provides u∈R^{}, y∈R^{} but the model expects u∈R^{}, y∈R^{}",
            data.dim_u(),
            data.dim_y(),
            model.dim_u(),
            model.dim_y()
        )));
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut bench = Benchmark::by_name(&args.system)?;
    if let Some(dt) = args.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        bench.dt = dt;
    }
    let steps = args.steps.unwrap_or(bench.default_steps);
    let noise = (args.noise_process > 0.0 || args.noise_measurement > 0.0).then_some(SimNoise {
        process_std: args.noise_process,
        measurement_std: args.noise_measurement,
        seed: args.seed,
    });
    let data = bench.simulate(steps, noise)?;
    data.save(&args.out)?;
    println!("wrote {} rows (dt = {:e}) to {}", data.len(), data.dt(), args.out.display());
    Ok(())
}

fn train_config(args: &TrainArgs, model: &HybridModel) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::standard(model)?;
    cfg.epochs = args.epochs;
    cfg.seed = args.seed;
    cfg.noise = NoiseConfig::isotropic(model, args.q_x, args.q_theta, args.r_y)?;
    cfg.p_x0_scale = args.p_x0;
    cfg.p_theta0_scale = args.p_theta0;
    if cfg.p_x0_scale <= 0.0 || cfg.p_theta0_scale <= 0.0 {
        return Err(Error::Config("covariance scales must be positive".into()));
    }
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let bench = Benchmark::by_name(&args.system)?;
    let data = load_dataset(&args.data)?;
    let model = bench.hybrid_model()?;
    check_model_against_data(&model, &data)?;
    let cfg = train_config(args, &model)?;

    // Stream the learning curve so partial progress survives failures.
    let mut curve_file = fs::File::create(&args.curve)
        .map_err(|e| Error::Io { path: args.curve.display().to_string(), source: e })?;
    writeln!(curve_file, "epoch,loss,wall_time_s")
        .map_err(|e| Error::Io { path: args.curve.display().to_string(), source: e })?;
    let curve_path = args.curve.display().to_string();
    let mut write_row_error: Option<Error> = None;
    let outcome = train_with(&model, &data, &cfg, &bench.x0_guess, |r| {
        let row = format!("{},{:.16e},{:.16e}\n", r.epoch, r.loss, r.wall_time);
        if let Err(e) = curve_file.write_all(row.as_bytes()).and_then(|_| curve_file.flush()) {
            write_row_error
                .get_or_insert(Error::Io { path: curve_path.clone(), source: e });
        }
    })?;
    if let Some(e) = write_row_error {
        return Err(e);
    }

    let checkpoint = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        benchmark: bench.name.to_string(),
        net: bench.net.clone(),
        theta: outcome.theta,
        x0: outcome.x0.iter().copied().collect(),
        epochs: cfg.epochs,
        seed: cfg.seed,
        q_x: args.q_x,
        q_theta: args.q_theta,
        r_y: args.r_y,
        p_x0: args.p_x0,
        p_theta0: args.p_theta0,
        final_loss: outcome.curve.last().map(|r| r.loss).unwrap_or(f64::NAN),
    };
    write_text(&args.checkpoint, &to_pretty_json(&checkpoint)?)?;
    println!(
        "trained {} epochs; final loss {:.6e}; checkpoint {}",
        cfg.epochs,
        checkpoint.final_loss,
        args.checkpoint.display()
    );
    Ok(())
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = read_text(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}", path.display(), e.line()),
        message: e.to_string(),
    })?;
    if ckpt.format_version != CHECKPOINT_VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint format_version {} (expected {CHECKPOINT_VERSION})",
            ckpt.format_version
        )));
    }
    if ckpt.theta.len() != ckpt.net.param_count() {
        return Err(Error::Dimension(format!(
            "checkpoint holds {} weights but its architecture needs {}",
            ckpt.theta.len(),
            ckpt.net.param_count()
        )));
    }
    Ok(ckpt)
}

fn trajectory_csv(data: &Dataset, estimate: &[StateVector], offset: usize) -> String {
    let d_x = estimate.first().map_or(0, |x| x.len());
    let mut out = String::from("t");
    for j in 0..d_x {
        out.push_str(&format!(",xhat_{j}"));
    }
    let with_truth = data.states().is_some();
    if with_truth {
        for j in 0..d_x {
            out.push_str(&format!(",x_{j}"));
        }
    }
    out.push('\n');
    for (i, x) in estimate.iter().enumerate() {
        out.push_str(&format!("{:.16e}", data.time(offset + i)));
        for v in x.iter() {
            out.push_str(&format!(",{v:.16e}"));
        }
        if let Some(states) = data.states() {
            for v in states[offset + i].iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let bench = Benchmark::by_name(&ckpt.benchmark)?;
    if bench.net != ckpt.net {
        return Err(Error::Config(format!(
            "checkpoint architecture does not match benchmark '{}'",
            ckpt.benchmark
        )));
    }
    let data = load_dataset(&args.data)?;
    let model = bench.hybrid_model()?;
    check_model_against_data(&model, &data)?;
    let noise = NoiseConfig::isotropic(&model, ckpt.q_x, ckpt.q_theta, ckpt.r_y)?;

    let (start_index, x_start) = if args.assimilate > 0 {
        let seeded =
            seed_from_measurement(&bench.x0_guess, &bench.measured, data.measurement(0));
        let x = assimilate_state(
            &model,
            &ckpt.theta,
            &noise,
            &seeded,
            ckpt.p_x0,
            &data,
            args.assimilate,
        )?;
        (args.assimilate - 1, x)
    } else {
        (0, DVector::from_vec(ckpt.x0.clone()))
    };

    let estimate = rollout(&model, &ckpt.theta, &x_start, &data.inputs()[start_index..])?;
    write_text(&args.trajectory, &trajectory_csv(&data, &estimate, start_index))?;

    let report = match data.states() {
        Some(states) => {
            let m = nrmse(&estimate, &states[start_index..])?;
            Report {
                per_component_nrmse: Some(m.per_component.iter().copied().collect()),
                overall_nrmse: Some(m.overall),
                hidden_mean_nrmse: Some(m.mean_over(&bench.hidden)),
                measured_mean_nrmse: Some(m.mean_over(&bench.measured)),
                samples: estimate.len(),
                assimilated_samples: args.assimilate,
            }
        }
        None => Report {
            per_component_nrmse: None,
            overall_nrmse: None,
            hidden_mean_nrmse: None,
            measured_mean_nrmse: None,
            samples: estimate.len(),
            assimilated_samples: args.assimilate,
        },
    };
    write_text(&args.report, &to_pretty_json(&report)?)?;
    match report.overall_nrmse {
        Some(v) => println!("overall nRMSE {v:.6e}; report {}", args.report.display()),
        None => println!(
            "trajectory written ({} samples); no ground truth, nRMSE omitted",
            report.samples
        ),
    }
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<i32> {
    let bench = Benchmark::by_name(&args.system)?;
    let model = if args.measure_all {
        let d = bench.dim_x();
        HybridModel::new(
            bench.field.clone(),
            Some(crate::model::HiddenSlot {
                spec: bench.net.clone(),
                indices: bench.hidden.clone(),
            }),
            MeasurementMap::Select { dim_x: d, indices: (0..d).collect() },
            bench.dt,
        )?
    } else {
        bench.hybrid_model()?
    };
    let theta = crate::net::init_params(&bench.net, args.seed);
    let noise = NoiseConfig::isotropic(&model, 1e-5, 1e-2, 1e-10)?;
    let u = bench.policy.input(&bench.x0);
    let d = joint_gain_diagnostic(&model, &bench.x0, &u, &theta, &noise)?;
    let masked_expected = !args.measure_all;
    let holds = (d.product_max_abs == 0.0) == masked_expected;
    let report = DiagnoseReport {
        system: bench.name.to_string(),
        measured_indices: if args.measure_all {
            (0..bench.dim_x()).collect()
        } else {
            bench.measured.clone()
        },
        product_max_abs: d.product_max_abs,
        joint_gain_max_abs: d.joint_gain_max_abs,
        alternating_gain_max_abs: d.alternating_gain_max_abs,
        masked_structure_holds: d.product_max_abs == 0.0,
    };
    if args.json {
        println!("{}", to_pretty_json(&report)?.trim_end());
    } else {
        println!("system: {}", report.system);
        println!("measured indices: {:?}", report.measured_indices);
        println!("max |F_thetaᵀ Hᵀ|: {:e}", report.product_max_abs);
        println!("max |joint parameter gain|: {:e}", report.joint_gain_max_abs);
        println!("max |alternating parameter gain|: {:e}", report.alternating_gain_max_abs);
        if report.masked_structure_holds {
            println!("joint update is structurally dead; alternating update stays live");
        } else {
            println!("all parameter-sensitive rows reach the measurements");
        }
    }
    Ok(if holds { 0 } else { 1 })
}

fn thread_budget() -> usize {
    std::env::var("HIDDEN_ODE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let bench = Benchmark::by_name(&args.system)?;
    if args.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| Error::Io { path: args.out.display().to_string(), source: e })?;
    let data = match &args.data {
        Some(path) => load_dataset(path)?,
        None => bench.simulate(bench.default_steps, None)?,
    };
    let model = bench.hybrid_model()?;
    check_model_against_data(&model, &data)?;

    struct SweepRow {
        seed: u64,
        final_loss: f64,
        overall_nrmse: f64,
        hidden_nrmse: f64,
        seconds: f64,
    }
    let results: Mutex<Vec<SweepRow>> = Mutex::new(Vec::new());
    let errors: Mutex<Vec<Error>> = Mutex::new(Vec::new());
    let budget = thread_budget();
    let chunks: Vec<Vec<u64>> = args
        .seeds
        .chunks(args.seeds.len().div_ceil(budget))
        .map(|c| c.to_vec())
        .collect();

    let (results_ref, errors_ref) = (&results, &errors);
    let (bench_ref, data_ref, model_ref) = (&bench, &data, &model);
    std::thread::scope(|scope| {
        for chunk in chunks {
            scope.spawn(move || {
                for &seed in &chunk {
                    let run = (|| -> Result<SweepRow> {
                        let mut cfg = TrainConfig::standard(model_ref)?;
                        cfg.epochs = args.epochs;
                        cfg.seed = seed;
                        let started = std::time::Instant::now();
                        let outcome =
                            train_with(model_ref, data_ref, &cfg, &bench_ref.x0_guess, |_| {})?;
                        let seconds = started.elapsed().as_secs_f64();
                        let estimate =
                            rollout(model_ref, &outcome.theta, &outcome.x0, data_ref.inputs())?;
                        let m = match data_ref.states() {
                            Some(states) => nrmse(&estimate, states)?,
                            None => {
                                return Err(Error::Config(
                                    "sweep requires ground-truth states in the dataset".into(),
                                ))
                            }
                        };
                        let curve_path = args.out.join(format!("curve_seed{seed}.csv"));
                        let mut text = String::from("epoch,loss,wall_time_s\n");
                        for r in &outcome.curve {
                            text.push_str(&format!(
                                "{},{:.16e},{:.16e}\n",
                                r.epoch, r.loss, r.wall_time
                            ));
                        }
                        write_text(&curve_path, &text)?;
                        Ok(SweepRow {
                            seed,
                            final_loss: outcome.curve.last().map(|r| r.loss).unwrap_or(f64::NAN),
                            overall_nrmse: m.overall,
                            hidden_nrmse: m.mean_over(&bench_ref.hidden),
                            seconds,
                        })
                    })();
                    match run {
                        Ok(row) => results_ref.lock().unwrap().push(row),
                        Err(e) => errors_ref.lock().unwrap().push(e),
                    }
                }
            });
        }
    });

    if let Some(e) = errors.into_inner().unwrap().into_iter().next() {
        return Err(e);
    }
    let mut rows = results.into_inner().unwrap();
    rows.sort_by_key(|r| r.seed);
    let mut summary = String::from("seed,final_loss,overall_nrmse,hidden_nrmse,seconds\n");
    println!("seed  final_loss    overall_nrmse  hidden_nrmse  seconds");
    for r in &rows {
        summary.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.3}\n",
            r.seed, r.final_loss, r.overall_nrmse, r.hidden_nrmse, r.seconds
        ));
        println!(
            "{:<5} {:<13.6e} {:<14.6e} {:<13.6e} {:.1}",
            r.seed, r.final_loss, r.overall_nrmse, r.hidden_nrmse, r.seconds
        );
    }
    write_text(&args.out.join("sweep.csv"), &summary)?;
    Ok(())
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome: Result<i32> = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|()| 0),
        Command::Train(a) => cmd_train(a).map(|()| 0),
        Command::Eval(a) => cmd_eval(a).map(|()| 0),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Sweep(a) => cmd_sweep(a).map(|()| 0),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
