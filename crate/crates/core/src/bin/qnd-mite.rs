use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qnd_mite::cfunc::{cfunc_table, linspace, PhotonOutcome};
use qnd_mite::config::RunConfig;
use qnd_mite::output::{save_cfunc_csv, summarize, write_cfunc_csv, write_ensemble};
use qnd_mite::protocols::run_ensemble;
use qnd_mite::statevec::parse_real;

const DEFAULT_OUT_DIR: &str = "qnd-mite-out";

#[derive(Parser)]
#[command(name = "qnd-mite", version, about = "QND measurement-based imaginary time evolution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the exact and approximate C-functions.
    Cfunc(CfuncArgs),
    /// Run a single stage of the plan.
    RunStage {
        /// 1-based stage number.
        #[arg(long)]
        stage: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the full plan (the four-qubit cluster protocol by default).
    RunCluster {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print a starter configuration file.
    InitConfig,
}

#[derive(Args)]
struct CfuncArgs {
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Photon counts as `n_c,n_d`; repeat for several outcomes.
    #[arg(long = "outcome", required = true, value_parser = parse_outcome)]
    outcomes: Vec<PhotonOutcome>,
    #[arg(long, default_value = "0")]
    chi_min: String,
    #[arg(long, default_value = "pi")]
    chi_max: String,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long, env = "QND_MITE_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Per-mode photon cutoff.
    #[arg(long)]
    cutoff: Option<u32>,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// `random`, `cluster`, `basis:<bits>` or `product:<labels>`.
    #[arg(long)]
    initial: Option<String>,
}

fn parse_outcome(text: &str) -> std::result::Result<PhotonOutcome, String> {
    let (c, d) = text
        .split_once(',')
        .ok_or_else(|| format!("expected n_c,n_d but got '{}'", text))?;
    let parse = |s: &str| s.trim().parse::<u32>().map_err(|e| format!("'{}': {}", s, e));
    Ok(PhotonOutcome::new(parse(c)?, parse(d)?))
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(t) = self.trajectories {
            config.trajectories = t;
        }
        if let Some(dir) = &self.out_dir {
            config.out_dir = Some(dir.clone());
        }
        if let Some(c) = self.cutoff {
            config.cutoff = Some(c);
        }
        if let Some(m) = self.max_rounds {
            config.max_rounds = Some(m);
        }
        if let Some(i) = &self.initial {
            config.initial = i.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn cmd_cfunc(args: &CfuncArgs) -> Result<()> {
    let alpha = parse_real(&args.alpha)?;
    let lo = parse_real(&args.chi_min)?;
    let hi = parse_real(&args.chi_max)?;
    if args.points == 0 {
        bail!("the chi grid is empty (--points 0)");
    }
    let rows = cfunc_table(alpha, &args.outcomes, &linspace(lo, hi, args.points))?;
    match &args.out {
        Some(path) => {
            save_cfunc_csv(path, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            write_cfunc_csv(stdout.lock(), &rows)?;
        }
    }
    Ok(())
}

fn cmd_run(config: &RunConfig, stage: Option<usize>) -> Result<()> {
    let plan = config.build_plan()?;
    let mut protocol = plan.prepare()?;
    let first_stage = match stage {
        Some(s) => {
            protocol = protocol.single_stage(s - 1)?;
            s
        }
        None => 1,
    };
    let initial = config.initial_state()?;
    let runs = run_ensemble(&protocol, &initial, config.seed, config.trajectories)?;

    let out_dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    write_ensemble(&out_dir, &runs, config.seed, first_stage)?;
    let summary = summarize(&runs, config.seed, first_stage);
    report(&out_dir, &summary, &plan.stages[first_stage - 1].truncation)?;
    Ok(())
}

fn report(
    out_dir: &Path,
    summary: &qnd_mite::output::EnsembleSummary,
    truncation: &qnd_mite::povm::TruncationPolicy,
) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "trajectories: {} (seed {})", summary.trajectories, summary.seed)?;
    for f in &summary.final_fidelities {
        if let Some(q) = &f.quantiles {
            writeln!(
                out,
                "final {}: min {:.6} median {:.6} (>= 0.99 in {:.1}%)",
                f.tracker,
                q.min,
                q.median,
                100.0 * f.fraction_at_least_0_99
            )?;
        }
    }
    for s in &summary.stages {
        if let Some(q) = &s.settled_after {
            writeln!(out, "stage {} ({}): median settled after {} rounds", s.stage, s.name, q.median)?;
        }
    }
    writeln!(out, "output: {}", out_dir.display())?;
    if summary.max_truncated_mass > truncation.warn_above {
        eprintln!(
            "warning: photon cutoff dropped up to {:.3e} of the outcome probability",
            summary.max_truncated_mass
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Cfunc(args) => cmd_cfunc(args),
        Command::RunStage { stage, run } => {
            let config = run.resolve()?;
            let stage = stage.or(config.stage).unwrap_or(1);
            if stage == 0 {
                bail!("stage numbers start at 1");
            }
            cmd_run(&config, Some(stage))
        }
        Command::RunCluster { run } => cmd_run(&run.resolve()?, None),
        Command::InitConfig => {
            print!("{}", RunConfig::default().to_toml_string()?);
            Ok(())
        }
    }
}
