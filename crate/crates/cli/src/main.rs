//! `akprop` — scenario runner. Exit codes: 0 all checks pass, 1 computation error or failed
//! check, 2 invalid configuration.

mod config;
mod experiments;
mod table;

use clap::{Args, Parser, Subcommand};
use config::{BranchName, ConfigError, Experiment, KernelEvalSpec, LambdaGrid, ScenarioConfig, TimesSpec};
use experiments::Outcome;
use std::path::PathBuf;
use std::process::ExitCode;

const PRESETS: [(&str, &str); 8] = [
    ("free-baseline", include_str!("../presets/free-baseline.json")),
    ("theorem1-d1", include_str!("../presets/theorem1-d1.json")),
    ("theorem1-d3", include_str!("../presets/theorem1-d3.json")),
    ("theorem3-disjoint", include_str!("../presets/theorem3-disjoint.json")),
    ("theorem4-spread-d3", include_str!("../presets/theorem4-spread-d3.json")),
    ("theorem5-trace", include_str!("../presets/theorem5-trace.json")),
    ("oscillatory-appendixA", include_str!("../presets/oscillatory-appendixA.json")),
    ("oracle-compare", include_str!("../presets/oracle-compare.json")),
];

#[derive(Parser)]
#[command(name = "akprop", version, about = "Propagator kernels of finite-rank perturbations of the Laplacian")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment named in the scenario
    Run(Common),
    /// Free resolvent kernel R₀(λ² ± i0)(r)
    KernelEval(Common),
    /// Borel-transform matrix entries over the λ-grid
    BorelScan(Common),
    /// |det(I + F±)| margins over the λ-grid
    SpectralCheck(Common),
    /// Kernel table over times × points
    Propagate(Common),
    /// Engine against the grid oracle
    OracleCompare(Common),
    /// Fitted sup-norm decay exponent
    DecayFit(Common),
    /// Oscillatory-integral bounds and partition checks
    OscillatoryVerify(Common),
    /// N, τ₀, α or trace-class scaling study
    Scaling(Common),
    /// List the shipped presets
    Presets,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// scenario JSON file
    #[arg(long)]
    config: Option<PathBuf>,
    /// shipped scenario by name
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// single time (replaces the ladder and the reference time)
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// single spectral parameter
    #[arg(long)]
    lambda: Option<f64>,
    /// plus | minus
    #[arg(long)]
    branch: Option<String>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// dimension (when no scenario is given)
    #[arg(long)]
    d: Option<usize>,
    /// radius for kernel-eval
    #[arg(long)]
    r: Option<f64>,
}

enum Failure {
    Config(String),
    Compute(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn load(c: &Common) -> Result<ScenarioConfig, Failure> {
    let text = match (&c.config, &c.preset) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?,
        (None, Some(name)) => PRESETS
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| Failure::Config(format!("unknown preset `{name}`")))?,
        (None, None) => format!("{{\"dimension\": {}}}", c.d.unwrap_or(1)),
    };
    Ok(config::parse(&text)?)
}

fn parse_branch(s: &str) -> Result<akprop::Branch, Failure> {
    s.parse::<akprop::Branch>().map_err(|_| Failure::Config(format!("invalid `--branch`: {s}")))
}

fn apply_overrides(cfg: &mut ScenarioConfig, c: &Common, experiment: Experiment) -> Result<(), Failure> {
    if let Some(d) = c.d {
        cfg.dimension = d;
    }
    if let Some(t) = c.t {
        cfg.times = Some(TimesSpec::List(vec![t]));
        if let Some(s) = cfg.scaling.as_mut() {
            s.t_ref = t;
        }
    }
    if let Some(l) = c.lambda {
        cfg.lambda_grid = Some(LambdaGrid::List(vec![l]));
        if let Some(s) = cfg.scaling.as_mut() {
            s.lambda = Some(l);
        }
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    if experiment == Experiment::KernelEval {
        let cur = cfg.kernel_eval.clone();
        let branch = match &c.branch {
            Some(b) => BranchName::from(parse_branch(b)?),
            None => cur.as_ref().map(|k| k.branch).ok_or_else(|| Failure::Config("kernel-eval needs `--branch`".into()))?,
        };
        let lambda = c.lambda.or(cur.as_ref().map(|k| k.lambda)).ok_or_else(|| Failure::Config("kernel-eval needs `--lambda`".into()))?;
        let r = c.r.or(cur.as_ref().map(|k| k.r)).ok_or_else(|| Failure::Config("kernel-eval needs `--r`".into()))?;
        cfg.kernel_eval = Some(KernelEvalSpec { branch, lambda, r });
    }
    cfg.experiment = Some(experiment);
    Ok(())
}

fn execute(c: &Common, fixed: Option<Experiment>) -> Result<bool, Failure> {
    let mut cfg = load(c)?;
    let experiment = fixed
        .or(cfg.experiment)
        .ok_or_else(|| Failure::Config("missing `experiment` (or use a subcommand)".into()))?;
    apply_overrides(&mut cfg, c, experiment)?;
    let branch = match &c.branch {
        Some(b) => Some(parse_branch(b)?),
        None => None,
    };
    // provenance covers what is computed, not where it is written
    let mut hashed = cfg.clone();
    hashed.output.dir = PathBuf::new();
    let canonical = serde_json::to_string(&hashed).expect("config serializes");
    let prefix = cfg.output.prefix.clone().or(cfg.name.clone()).unwrap_or_else(|| experiment.name().to_string());
    let dir = cfg.output.dir.clone();
    let v = config::validate(cfg, experiment)?;
    let run = || -> akprop::Result<Outcome> {
        match experiment {
            Experiment::KernelEval => experiments::kernel_eval(&v),
            Experiment::BorelScan => experiments::borel_scan(&v, branch),
            Experiment::SpectralCheck => experiments::spectral_check(&v, branch),
            Experiment::Propagate => experiments::propagate(&v),
            Experiment::OracleCompare => experiments::oracle_compare(&v),
            Experiment::DecayFit => experiments::decay_fit(&v),
            Experiment::OscillatoryVerify => experiments::oscillatory_verify(&v),
            Experiment::Scaling => experiments::scaling(&v),
        }
    };
    let out = run().map_err(|e| Failure::Compute(e.to_string()))?;
    let mut summary = out.summary.clone();
    if let (Some(tau0), Some(obj)) = (v.tau0, summary.as_object_mut()) {
        obj.insert("tau0".into(), serde_json::json!(tau0));
    }
    let prov = table::Provenance::new(experiment.name(), &canonical);
    let files = table::write_all(&dir, &prefix, &out.tables, &summary, &prov).map_err(|e| Failure::Compute(format!("writing results: {e}")))?;
    for line in &out.report {
        println!("{line}");
    }
    for ch in &out.checks {
        println!("{}", ch.line());
    }
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(out.checks.iter().all(|c| c.pass))
}

fn configure_threads() {
    if let Some(n) = std::env::var("AKPROP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let (common, fixed) = match cli.cmd {
        Cmd::Presets => {
            for (n, _) in PRESETS {
                println!("{n}");
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Run(c) => (c, None),
        Cmd::KernelEval(c) => (c, Some(Experiment::KernelEval)),
        Cmd::BorelScan(c) => (c, Some(Experiment::BorelScan)),
        Cmd::SpectralCheck(c) => (c, Some(Experiment::SpectralCheck)),
        Cmd::Propagate(c) => (c, Some(Experiment::Propagate)),
        Cmd::OracleCompare(c) => (c, Some(Experiment::OracleCompare)),
        Cmd::DecayFit(c) => (c, Some(Experiment::DecayFit)),
        Cmd::OscillatoryVerify(c) => (c, Some(Experiment::OscillatoryVerify)),
        Cmd::Scaling(c) => (c, Some(Experiment::Scaling)),
    };
    match execute(&common, fixed) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
