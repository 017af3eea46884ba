//! `normnet` command-line front end.
//!
//! Exit codes: 0 on success, 2 when the input is invalid, 3 when a
//! computation (or at least one sweep point) failed.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use normnet::constructions::{
    build_approximant, build_monomial, build_product, build_square, build_taylor_net_capped, ApproxCertificate,
    DEFAULT_MEMORY_CAP,
};
use normnet::harness;
use normnet::learn::{train_gan, train_regression, GanConfig, RegressionConfig, TrainReport};
use normnet::{kappa, probes, rng, targets, Error, GridSpec, ReluNet};

#[derive(Parser)]
#[command(name = "normnet", version, about = "Norm-constrained ReLU networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Operations on saved networks.
    Net {
        #[command(subcommand)]
        cmd: NetCmd,
    },
    /// Build an explicit approximator and optionally certify it.
    Construct(ConstructArgs),
    /// Complexity probes and bound formulas.
    Probe(ProbeArgs),
    /// Train from a TOML or JSON config.
    Train {
        #[arg(value_enum)]
        task: TrainTask,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Config-driven sweeps.
    Sweep {
        #[command(subcommand)]
        cmd: SweepCmd,
    },
}

#[derive(Subcommand)]
enum NetCmd {
    /// Print shape and norm budget of a network file.
    Inspect { path: PathBuf },
}

#[derive(Subcommand)]
enum SweepCmd {
    /// Run a sweep; writes results.csv, points/ and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only validate the config.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Square,
    Product,
    Monomial,
    Taylor,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Grid resolution of the partition of unity (taylor).
    #[arg(long = "N")]
    n_grid: Option<usize>,
    /// Target budget; picks N and k automatically (taylor).
    #[arg(long = "K")]
    budget: Option<f64>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Named target for taylor: sine, product, const.
    #[arg(long, default_value = "sine")]
    target: String,
    #[arg(long, default_value_t = DEFAULT_MEMORY_CAP)]
    memory_cap: usize,
    /// Measure the sup error on the default grid.
    #[arg(long)]
    certify: bool,
    /// Directory for net.json and certificate.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeKind {
    Rademacher,
    Packing,
    Wasserstein,
    Bounds,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(value_enum)]
    kind: ProbeKind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long = "K", default_value_t = 1.0)]
    k: f64,
    #[arg(long = "L", default_value_t = 2)]
    l: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Code length for the packing probe.
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result as a one-row CSV here instead of JSON to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainTask {
    Regress,
    Gan,
}

/// Distinguishes bad input from failed computations.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Regime(_)
            | Error::Dimension { .. }
            | Error::Json(_)
            | Error::MalformedNet(_) => Failure::Invalid(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = harness::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Net {
            cmd: NetCmd::Inspect { path },
        } => inspect(&path),
        Cmd::Construct(args) => construct(&args),
        Cmd::Probe(args) => probe(&args),
        Cmd::Train { task, config, out } => train(task, &config, out.as_deref()),
        Cmd::Sweep {
            cmd: SweepCmd::Run { config, out, check },
        } => sweep(&config, out, check),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Outcome {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.into()))?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{s}")?;
    Ok(())
}

fn inspect(path: &Path) -> Outcome {
    let net = ReluNet::load(path)?;
    let rep = kappa(&net);
    print_json(&serde_json::json!({
        "input_dim": net.input_dim(),
        "output_dim": net.output_dim(),
        "depth": net.depth(),
        "width": net.width(),
        "parameters": net.num_parameters(),
        "kappa": rep.kappa,
        "hidden_norms": rep.hidden_norms,
        "output_norm": rep.output_norm,
    }))
}

type Target = Box<dyn Fn(&[f64]) -> f64 + Sync>;

fn construct(a: &ConstructArgs) -> Outcome {
    let (cert, f, lo, lip): (ApproxCertificate, Target, f64, Option<f64>) = match a.family {
        Family::Square => (build_square(a.k)?, Box::new(|x: &[f64]| x[0] * x[0]), 0.0, Some(2.0)),
        Family::Product => (build_product(a.k)?, Box::new(|x: &[f64]| x[0] * x[1]), -1.0, Some(2.0)),
        Family::Monomial => (
            build_monomial(a.d, a.k)?,
            Box::new(|x: &[f64]| x.iter().product()),
            -1.0,
            Some(a.d as f64),
        ),
        Family::Taylor => {
            let spec = targets::by_name(&a.target, a.d, a.alpha)?;
            let cert = match (a.budget, a.n_grid) {
                (Some(_), Some(_)) => {
                    return Err(Failure::Invalid(anyhow::anyhow!("give either --K or --N, not both")))
                }
                (Some(k), None) => build_approximant(&spec, k)?,
                (None, Some(n)) => build_taylor_net_capped(&spec, n, a.k, a.memory_cap)?,
                (None, None) => return Err(Failure::Invalid(anyhow::anyhow!("taylor needs --N or --K"))),
            };
            let lip = spec.lipschitz;
            (cert, Box::new(move |x: &[f64]| spec.eval(x)), 0.0, lip)
        }
    };
    let report = if a.certify {
        let d = cert.net.input_dim();
        cert.certify(&*f, lip, &GridSpec::default_for(d, lo, 1.0))?
    } else {
        cert.report()
    };
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        cert.net.save(&dir.join("net.json"))?;
        let mut json = serde_json::to_vec_pretty(&report).map_err(|e| Failure::Runtime(e.into()))?;
        json.push(b'\n');
        harness::write_atomic(&dir.join("certificate.json"), &json)?;
    }
    print_json(&report)?;
    if report.holds == Some(false) {
        return Err(Failure::Runtime(anyhow::anyhow!("a stated bound does not hold")));
    }
    Ok(())
}

fn probe(a: &ProbeArgs) -> Outcome {
    let (header, row): (Vec<&str>, Vec<String>) = match a.kind {
        ProbeKind::Rademacher => {
            let pts = rng::uniform_points(&mut rng::stream(a.seed, u64::MAX), a.n, a.d, 0.0, 1.0);
            let e = probes::rademacher_linear_lb(&pts, a.k, a.trials, a.seed, a.l, 1.0)?;
            (
                vec!["n", "d", "K", "L", "trials", "mc_mean", "mc_stderr", "formula_lb", "formula_ub", "brackets"],
                vec![
                    a.n.to_string(),
                    a.d.to_string(),
                    a.k.to_string(),
                    a.l.to_string(),
                    a.trials.to_string(),
                    e.mc_mean.to_string(),
                    e.mc_stderr.to_string(),
                    e.formula_lb.to_string(),
                    e.formula_ub.to_string(),
                    e.brackets().to_string(),
                ],
            )
        }
        ProbeKind::Packing => {
            let p = probes::greedy_sign_packing(a.m)?;
            (
                vec!["m", "size", "min_hamming"],
                vec![a.m.to_string(), p.vectors.len().to_string(), p.min_hamming.to_string()],
            )
        }
        ProbeKind::Wasserstein => {
            let pts = rng::uniform_points(&mut rng::stream(a.seed, u64::MAX), a.n, a.d, 0.0, 1.0);
            let w = probes::w1_nn_probe(&pts, a.trials.max(1) * 10, a.seed)?;
            (
                vec!["n", "d", "estimate", "stderr", "formula_lb"],
                vec![
                    a.n.to_string(),
                    a.d.to_string(),
                    w.estimate.to_string(),
                    w.stderr.to_string(),
                    w.formula_lb.to_string(),
                ],
            )
        }
        ProbeKind::Bounds => {
            let b = probes::approx_lower_bound_formulas(a.d, a.alpha, a.k, a.l)?;
            (
                vec!["d", "alpha", "K", "L", "general_power_term", "lipschitz_explicit"],
                vec![
                    a.d.to_string(),
                    a.alpha.to_string(),
                    a.k.to_string(),
                    a.l.to_string(),
                    b.general_power_term.to_string(),
                    b.lipschitz_explicit.map_or(String::new(), |v| v.to_string()),
                ],
            )
        }
    };
    match &a.csv {
        Some(path) => {
            let mut body = header.join(",");
            body.push('\n');
            body.push_str(&row.join(","));
            body.push('\n');
            harness::write_atomic(path, body.as_bytes())?;
            Ok(())
        }
        None => {
            let map: serde_json::Map<String, serde_json::Value> = header
                .iter()
                .zip(&row)
                .map(|(k, v)| (k.to_string(), serde_json::Value::String(v.clone())))
                .collect();
            print_json(&map)
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(anyhow::anyhow!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Failure::Invalid(e.into()))
    } else {
        toml::from_str(&text).map_err(|e| Failure::Invalid(e.into()))
    }
}

fn train(task: TrainTask, config: &Path, out: Option<&Path>) -> Outcome {
    let report: TrainReport = match task {
        TrainTask::Regress => {
            let cfg: RegressionConfig = read_config(config)?;
            cfg.validate()?;
            train_regression(&cfg)?
        }
        TrainTask::Gan => {
            let cfg: GanConfig = read_config(config)?;
            cfg.validate()?;
            train_gan(&cfg)?
        }
    };
    match out {
        Some(dir) => {
            harness::write_atomic(&dir.join("epochs.csv"), report.to_csv().as_bytes())?;
            report.net.save(&dir.join("net.json"))?;
            if let Some(g) = &report.generator {
                g.save(&dir.join("generator.json"))?;
            }
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn sweep(config: &Path, out: Option<PathBuf>, check: bool) -> Outcome {
    let cfg = harness::load_config(config)?;
    let diags = harness::validate(&cfg);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("invalid config: {d}");
        }
        return Err(Failure::Invalid(anyhow::anyhow!("{} problem(s) in {}", diags.len(), config.display())));
    }
    if check {
        return Ok(());
    }
    let Some(out) = out.or_else(|| cfg.output_dir.clone()) else {
        return Err(Failure::Invalid(anyhow::anyhow!("no output directory: pass --out or set output_dir")));
    };
    let manifest = harness::run(&cfg, &out)?;
    if !manifest.failures.is_empty() {
        for f in &manifest.failures {
            eprintln!("point {} failed: {}", f.index, f.error);
        }
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} of {} points failed",
            manifest.failures.len(),
            manifest.points
        )));
    }
    Ok(())
}
