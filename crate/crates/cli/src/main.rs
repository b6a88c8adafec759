//! Command-line front end: loads a model file, runs the requested
//! computation, and prints a versioned JSON envelope on stdout.
//!
//! Exit codes: 0 on success, 1 when a verification verdict fails, 2 for
//! usage and model errors, 3 when a resource cap is exceeded.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use exgap_core::model::{self, ModelSpec};
use exgap_core::montecarlo::{self, Process, SimOptions, TruncationPolicy};
use exgap_core::spectral::{self, SpectralMethod};
use exgap_core::{kernels, particles, report, Error};

#[derive(Parser)]
#[command(
    name = "exgap",
    version,
    about = "Spectral gaps, kinetic bounds, and simulation for stochastic exchange models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap the rayon thread pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Kinetic factor with its per-edge breakdown.
    Gamma(GammaArgs),
    /// Exact spectra of the particle generators, level by level.
    Spectrum(SpectrumArgs),
    /// Certify the universal bounds; fails with exit code 1 if any check
    /// does not hold.
    Verify(VerifyArgs),
    /// Sample trajectories of the exchange process or its hidden dual.
    Simulate(SimulateArgs),
    /// Everything at once: validation, kinetic factor, spectra, bounds.
    Report(ReportArgs),
}

#[derive(Args)]
struct ModelArg {
    /// Model description file (JSON).
    model: PathBuf,
    /// Largest admissible number of configurations per level
    /// (default 20000, or the EXGAP_CAP environment variable).
    #[arg(long)]
    cap: Option<usize>,
}

impl ModelArg {
    fn load(&self) -> Result<ModelSpec, Error> {
        ModelSpec::load(&self.model)
    }

    fn cap(&self) -> usize {
        self.cap
            .or_else(|| {
                std::env::var("EXGAP_CAP")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(exgap_core::DEFAULT_STATE_CAP)
    }
}

#[derive(Args)]
struct GammaArgs {
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArg,
    /// Highest particle level.
    #[arg(long, default_value_t = exgap_core::DEFAULT_K_MAX)]
    kmax: usize,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    /// Write the top-level generator as CSV (`i,j,rate`), with a sidecar
    /// index file mapping rows to configurations.
    #[arg(long)]
    dump_generator: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = exgap_core::DEFAULT_K_MAX)]
    kmax: usize,
    /// Perturb one generator entry before the structural checks; the run
    /// must then fail. Test hook.
    #[arg(long, hide = true)]
    corrupt_generator: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_enum)]
    process: ProcessArg,
    #[arg(long, value_enum, default_value_t = ObservableArg::VarPi)]
    observable: ObservableArg,
    #[arg(long)]
    tmax: f64,
    /// Evenly spaced sample times, endpoints included.
    #[arg(long, default_value_t = 101)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Tail truncation for families with unbounded activity.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Comma-separated initial state; defaults to unit mass everywhere for
    /// the exchange process and an indicator at the first vertex for the
    /// hidden one.
    #[arg(long, value_delimiter = ',')]
    init: Option<Vec<f64>>,
    /// Trajectory CSV is written to `<prefix>.csv`.
    #[arg(long, default_value = "exgap-run")]
    out_prefix: String,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = exgap_core::DEFAULT_K_MAX)]
    kmax: usize,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Reversible,
    General,
}

impl From<Method> for SpectralMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => SpectralMethod::Auto,
            Method::Reversible => SpectralMethod::Reversible,
            Method::General => SpectralMethod::General,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessArg {
    Eta,
    Theta,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ObservableArg {
    /// Weighted parameter variance, one scalar per sample time.
    VarPi,
    /// Full state vector, one row per vertex and sample time.
    State,
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = match cli.command {
        Command::Gamma(args) => run_gamma(args),
        Command::Spectrum(args) => run_spectrum(args),
        Command::Verify(args) => run_verify(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Report(args) => run_report(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("exgap: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::TooLarge { .. } | Error::RateOverflow { .. } => 3,
        _ => 2,
    }
}

fn emit(command: &str, spec: &ModelSpec, payload: Value) {
    let env = report::envelope(command, spec, payload);
    println!("{}", report::to_json_string(&env));
}

fn run_gamma(args: GammaArgs) -> Result<i32, Error> {
    let spec = args.model.load()?;
    let gamma = kernels::gamma(&spec)?;
    let mut payload = report::gamma_payload(&gamma);
    payload["closed_form"] = json!(kernels::gamma_closed_form(&spec));
    payload["gap_rw"] = json!(spectral::gap_rw(&spec)?);
    emit("gamma", &spec, payload);
    Ok(0)
}

fn run_spectrum(args: SpectrumArgs) -> Result<i32, Error> {
    let spec = args.model.load()?;
    let cap = args.model.cap();
    let suite = spectral::spectrum_suite(&spec, args.kmax, cap, args.method.into())?;
    let mut payload = report::spectrum_payload(&suite);
    if let Some(path) = &args.dump_generator {
        dump_generator(&spec, args.kmax, cap, path)?;
        payload["generator_dump"] = json!(path.display().to_string());
    }
    emit("spectrum", &spec, payload);
    Ok(0)
}

fn dump_generator(spec: &ModelSpec, k: usize, cap: usize, path: &Path) -> Result<(), Error> {
    let gen = particles::build_generator(spec, k, cap)?;
    let mut csv = BufWriter::new(File::create(path)?);
    writeln!(csv, "i,j,rate")?;
    for i in 0..gen.dim() {
        writeln!(csv, "{i},{i},{:.16e}", gen.diag(i))?;
        for &(j, rate) in gen.row(i) {
            writeln!(csv, "{i},{j},{rate:.16e}")?;
        }
    }
    csv.flush()?;

    let index = json!({
        "k": k,
        "dim": gen.dim(),
        "labels": spec.graph.labels(),
        "configs": gen.space().configs(),
    });
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".index.json");
    std::fs::write(sidecar, serde_json::to_string(&index).expect("index serializes"))?;
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<i32, Error> {
    let spec = args.model.load()?;
    let cap = args.model.cap();
    let verdict = spectral::verify_bounds(&spec, args.kmax, cap)?;
    let aldous = kernels::aldous_criterion(&spec);
    let mut structural = spectral::structural_checks(&spec, args.kmax, cap)?;

    if args.corrupt_generator {
        let residual = corrupted_intertwining(&spec, args.kmax, cap)?;
        if let Some(level) = structural.levels.last_mut() {
            level.intertwining = residual;
        }
    }

    let pass = verdict.pass && structural.pass();
    let mut payload = report::verify_payload(&verdict, &aldous, &structural);
    payload["pass"] = json!(pass);
    if args.corrupt_generator {
        payload["corrupted"] = json!(true);
    }
    emit("verify", &spec, payload);
    Ok(if pass { 0 } else { 1 })
}

/// Rebuilds the intertwining residual after bumping one entry of the
/// top-level generator, to prove the checks can see a broken matrix.
fn corrupted_intertwining(spec: &ModelSpec, kmax: usize, cap: usize) -> Result<f64, Error> {
    let hi = particles::build_generator(spec, kmax, cap)?;
    let lo = particles::build_generator(spec, kmax.saturating_sub(1), cap)?;
    let a = particles::annihilation(hi.space(), lo.space()).to_dense();
    let mut hi_dense = hi.to_dense();
    hi_dense[(0, 0)] += 0.05 * hi.amax().max(1.0);
    let defect = (&a * lo.to_dense() - hi_dense * &a).abs().max();
    Ok(defect / (hi.amax().max(1.0) * kmax as f64))
}

fn run_simulate(args: SimulateArgs) -> Result<i32, Error> {
    let spec = args.model.load()?;
    let process = match args.process {
        ProcessArg::Eta => Process::Eta,
        ProcessArg::Theta => Process::Theta,
    };
    let init: Vec<f64> = match &args.init {
        Some(v) => v.clone(),
        None => match process {
            Process::Eta => vec![1.0; spec.n()],
            Process::Theta => {
                let mut v = vec![0.0; spec.n()];
                v[0] = 1.0;
                v
            }
        },
    };
    let truncation = TruncationPolicy {
        eps: args.eps,
        ..TruncationPolicy::default()
    };
    let opts = SimOptions {
        tmax: args.tmax,
        samples: args.samples,
        replicas: args.replicas,
        seed: args.seed,
        truncation,
    };
    let table = montecarlo::EventTable::build(&spec, truncation)?;
    let sim = montecarlo::simulate(&spec, process, &init, &opts)?;

    let csv_path = format!("{}.csv", args.out_prefix);
    write_trajectory(&csv_path, &spec, &sim, args.observable)?;

    let decay = if args.observable == ObservableArg::VarPi && process == Process::Theta {
        let estimate = montecarlo::estimate_decay(&spec, &sim, args.seed ^ 0x5eed)?;
        Some(report::decay_payload(&estimate))
    } else {
        None
    };

    let payload = json!({
        "process": match process { Process::Eta => "eta", Process::Theta => "theta" },
        "observable": match args.observable {
            ObservableArg::VarPi => "var_pi",
            ObservableArg::State => "state",
        },
        "tmax": args.tmax,
        "samples": args.samples,
        "replicas": args.replicas,
        "seed": args.seed,
        "eps": args.eps,
        "init": init,
        "total_rate": table.total_rate(),
        "trajectory": csv_path,
        "decay": decay,
    });
    emit("simulate", &spec, payload);
    Ok(0)
}

fn write_trajectory(
    path: &str,
    spec: &ModelSpec,
    sim: &montecarlo::SimResult,
    observable: ObservableArg,
) -> Result<(), Error> {
    let mut out = BufWriter::new(File::create(path)?);
    match observable {
        ObservableArg::VarPi => {
            let pi = kernels::stationary_pi(spec)?;
            writeln!(out, "replica,t,var_pi")?;
            for (r, rep) in sim.states.iter().enumerate() {
                for (j, state) in rep.iter().enumerate() {
                    let v = exgap_core::hidden::var_pi(&pi, state);
                    writeln!(out, "{r},{:.16e},{v:.16e}", sim.times[j])?;
                }
            }
        }
        ObservableArg::State => {
            writeln!(out, "replica,t,vertex,value")?;
            for (r, rep) in sim.states.iter().enumerate() {
                for (j, state) in rep.iter().enumerate() {
                    for (x, &v) in state.iter().enumerate() {
                        writeln!(out, "{r},{:.16e},{x},{v:.16e}", sim.times[j])?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<i32, Error> {
    let spec = args.model.load()?;
    let cap = args.model.cap();
    let validation = model::validate(&spec);
    let gamma = kernels::gamma(&spec)?;
    let suite = spectral::spectrum_suite(&spec, args.kmax, cap, args.method.into())?;
    let verdict = spectral::verify_bounds(&spec, args.kmax, cap)?;
    let aldous = kernels::aldous_criterion(&spec);
    let structural = spectral::structural_checks(&spec, args.kmax, cap)?;

    let mut gamma_block = report::gamma_payload(&gamma);
    gamma_block["closed_form"] = json!(kernels::gamma_closed_form(&spec));

    let payload = json!({
        "validation": {
            "pass": validation.pass(),
            "detail": serde_json::to_value(&validation).expect("validation serializes"),
        },
        "gamma": gamma_block,
        "spectrum": report::spectrum_payload(&suite),
        "verify": report::verify_payload(&verdict, &aldous, &structural),
    });
    emit("report", &spec, payload);
    Ok(0)
}
