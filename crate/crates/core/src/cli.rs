//! Command-line interface: `gen-expert`, `train`, `eval`, `plot` and
//! `selftest`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::demo::default_demo_path;
use crate::data::DemoSet;
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::selftest;
use crate::trainer::{self, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CORRUPT: i32 = 3;

/// Overrides the default output root `runs`.
pub const RUNS_DIR_VAR: &str = "CAIL_RUNS_DIR";

#[derive(Debug, Parser)]
#[command(name = "cail", version, about = "Contrastive adversarial imitation learning from pixels")]
pub struct Cli {
    /// Experiment seed; every random stream derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the scripted expert and write a demo file.
    GenExpert(GenExpertArgs),
    /// Train one algorithm and write metrics, config echo and checkpoints.
    Train(TrainArgs),
    /// Evaluate the latest checkpoint of a run.
    Eval(EvalArgs),
    /// Merge the learning curves of several runs into one long CSV.
    Plot(PlotArgs),
    /// Run the fast property suite.
    Selftest,
}

#[derive(Debug, Args)]
pub struct GenExpertArgs {
    #[arg(long, default_value = "pendulum")]
    pub env: String,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    /// Defaults to demos/<env>/<seed>.demo.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// bc, gail, gail-se, cail-nocal or cail.
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long)]
    pub demos: PathBuf,
    /// Total agent steps (each agent step is two simulator steps).
    #[arg(long)]
    pub steps: Option<u64>,
    /// Run directory. Defaults to <runs root>/<algo>-<env>-s<seed>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Augmentation mode; a bare `--aug` means shift.
    #[arg(long, num_args = 0..=1, default_missing_value = "shift")]
    pub aug: Option<String>,
    /// File of `key=value` lines applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CorruptFile { .. } => EXIT_CORRUPT,
        _ => EXIT_CONFIG,
    }
}

fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn gen_expert(args: &GenExpertArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let kind: EnvKind = args.env.parse()?;
    if args.episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let path = args.out.clone().unwrap_or_else(|| default_demo_path(kind.name(), seed));
    let (demos, returns) = trainer::expert_demos(kind, args.episodes, seed)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    demos.save(&path)?;
    for (i, r) in returns.iter().enumerate() {
        writeln!(out, "episode={i} return={r:.6}").map_err(|e| Error::io("<stdout>", e))?;
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    writeln!(out, "mean={mean:.6} episodes={} out={}", returns.len(), path.display())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Defaults, then the config file, then flags.
pub fn resolve_train_config(args: &TrainArgs, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(algo) = &args.algo {
        cfg.algo = algo.parse()?;
    }
    if let Some(env) = &args.env {
        cfg.env = env.parse()?;
    }
    if let Some(steps) = args.steps {
        cfg.total_steps = steps;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(aug) = &args.aug {
        cfg.set("aug", aug)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(args: &TrainArgs, seed: Option<u64>, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_train_config(args, seed)?;
    let demos = DemoSet::load(&args.demos)?;
    let run_dir = args
        .out
        .clone()
        .unwrap_or_else(|| runs_root().join(format!("{}-{}-s{}", cfg.algo, cfg.env.name(), cfg.seed)));
    let rows = trainer::train(&cfg, &demos, &run_dir)?;
    if let Some(last) = rows.last() {
        writeln!(
            out,
            "step={} eval_mean_return={:.6} eval_std_return={:.6} run={}",
            last.step,
            last.eval_mean_return,
            last.eval_std_return,
            run_dir.display()
        )
        .map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn eval(args: &EvalArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    if args.episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let ckpt: Checkpoint<f32> = Checkpoint::load(&trainer::latest_checkpoint(&args.run)?)?;
    let spec = EnvSpec::by_name(&ckpt.env)?;
    let result = trainer::evaluate(&ckpt.nets, &spec, args.episodes, seed, 0)?;
    writeln!(
        out,
        "mean={:.6} std={:.6} episodes={}",
        result.mean, result.std, result.episodes
    )
    .map_err(|e| Error::io("<stdout>", e))
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn plot(args: &PlotArgs) -> Result<()> {
    let mut text = String::from("run,step,eval_mean_return,eval_std_return\n");
    for dir in &args.runs {
        let path = dir.join(trainer::METRICS_FILE);
        if !path.is_file() {
            return Err(Error::Config(format!("missing {}", path.display())));
        }
        let name = run_name(dir);
        for (step, mean, std) in trainer::metrics::read_returns(&path)? {
            text.push_str(&format!("{name},{step},{mean},{std}\n"));
        }
    }
    std::fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))
}

fn selftest(out: &mut dyn Write) -> Result<bool> {
    let outcomes = selftest::run();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {}: {}", o.name, o.detail).map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

/// Runs a parsed command, writing reports to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    let seed = cli.seed;
    let result = match &cli.command {
        Command::GenExpert(a) => gen_expert(a, seed.unwrap_or(0), out).map(|_| EXIT_OK),
        Command::Train(a) => train(a, seed, out).map(|_| EXIT_OK),
        Command::Eval(a) => eval(a, seed.unwrap_or(0), out).map(|_| EXIT_OK),
        Command::Plot(a) => plot(a).map(|_| EXIT_OK),
        Command::Selftest => selftest(out).map(|ok| if ok { EXIT_OK } else { EXIT_SELFTEST }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

/// Parses `std::env::args` and runs. Usage errors exit with code 2.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(cli, &mut std::io::stdout().lock())
}
