use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ordinal_rl::envs::EnvKind;
use ordinal_rl::harness::{
    chain_oracle_report, format_summaries, parse_csv, read_sidecar, run_experiment, summarize, write_csv,
    write_outputs, ExperimentConfig,
};
use ordinal_rl::{Error, Result};

#[derive(Parser)]
#[command(name = "ordinal-rl", version, about = "Ordinal and numeric Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train over several seeds and write per-episode metrics.
    Run(Box<RunArgs>),
    /// Final-window statistics and time ratios of metrics files.
    Summarize {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
    /// Exact solutions of a small MDP.
    Oracle {
        #[arg(long, default_value = "chain")]
        env: String,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file with the same keys as the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    reward: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    /// Comma-separated, e.g. `0,1,2`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long = "eval-every")]
    eval_every: Option<String>,
    /// Metrics CSV; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    memory: Option<String>,
    #[arg(long)]
    sync: Option<String>,
    /// Hidden layer widths, e.g. `64,64`.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long = "epsilon-floor")]
    epsilon_floor: Option<String>,
    /// Leave `wall_ms` empty so reruns produce identical files.
    #[arg(long = "no-timing")]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        let flags = [
            ("env", &self.env),
            ("algo", &self.algo),
            ("reward", &self.reward),
            ("episodes", &self.episodes),
            ("seeds", &self.seeds),
            ("eval-every", &self.eval_every),
            ("out", &self.out),
            ("alpha", &self.alpha),
            ("gamma", &self.gamma),
            ("lr", &self.lr),
            ("batch", &self.batch),
            ("memory", &self.memory),
            ("sync", &self.sync),
            ("hidden", &self.hidden),
            ("epsilon-floor", &self.epsilon_floor),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.no_timing {
            cfg.timing = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let output = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => {
            for p in write_outputs(&cfg, &output, path)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => write_csv(&output.records, io::stdout().lock())?,
    }
    let summary = summarize(&output.records, Some(&cfg))?;
    eprint!("{}", format_summaries(&[summary]));
    for t in &output.timings {
        if cfg.timing {
            eprintln!("seed {}: {} steps, {:.1} ms", t.seed, t.steps, t.total_ms);
        } else {
            eprintln!("seed {}: {} steps", t.seed, t.steps);
        }
    }
    Ok(())
}

fn summarize_files(inputs: &[PathBuf]) -> Result<()> {
    let mut summaries = Vec::new();
    for path in inputs {
        let records = parse_csv(std::fs::File::open(path)?)?;
        let cfg = read_sidecar(path)?;
        summaries.push(summarize(&records, cfg.as_ref())?);
    }
    print!("{}", format_summaries(&summaries));
    Ok(())
}

fn oracle(env: &str, gamma: f64) -> Result<()> {
    match env.parse::<EnvKind>()? {
        EnvKind::Chain => {
            print!("{}", chain_oracle_report(gamma)?);
            io::stdout().flush()?;
            Ok(())
        }
        other => Err(Error::InvalidConfig(format!("no exact oracle for {other}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(*args),
        Command::Summarize { inputs } => summarize_files(&inputs),
        Command::Oracle { env, gamma } => oracle(&env, gamma),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
