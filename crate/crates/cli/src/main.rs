use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relaxcrb::commands::{run_command, CmdError};
use relaxcrb::config::{parse_config, Command, OutputFormat};
use relaxcrb::report::{print_tables, write_tables};

#[derive(Parser)]
#[command(name = "relaxcrb", version, about = "Evaluate, optimize and Monte-Carlo-validate MRI relaxometry protocols")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// CRB decomposition of fully specified protocols over the tissue range
    Evaluate(Common),
    /// Max-min design search for [design.*] sections
    Optimize(Common),
    /// Monte Carlo MEE/Rbias validation at the equivalent SNR
    Simulate(Common),
    /// Rank protocols by range-average T1 efficiency
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Run-configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config `out` key; stdout if neither)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Root RNG seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trial count override
    #[arg(long)]
    trials: Option<usize>,
    /// Worker thread count (env RELAXCRB_THREADS as fallback)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format `{other}` (csv|json)")),
    }
}

// Exit codes: 0 success, 2 config error, 3 partial failure, 4 total failure.
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_TOTAL: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        CliCommand::Evaluate(c) => (Command::Evaluate, c),
        CliCommand::Optimize(c) => (Command::Optimize, c),
        CliCommand::Simulate(c) => (Command::Simulate, c),
        CliCommand::Compare(c) => (Command::Compare, c),
    };

    let threads = common.threads.or_else(|| {
        std::env::var("RELAXCRB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            // Ignore the error if a pool already exists; results do not
            // depend on worker count.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    let text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    config.command = command;
    if let Some(seed) = common.seed {
        config.rng_seed = seed;
        for (_, d) in &mut config.designs {
            d.rng_seed = seed;
        }
    }
    if let Some(trials) = common.trials {
        if trials == 0 {
            eprintln!("config error: --trials must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        config.n_trials = trials;
    }
    if let Some(format) = common.format {
        config.format = format;
    }
    if let Some(out) = common.out {
        config.out_dir = Some(out);
    }
    if let Some(dir) = &config.out_dir {
        if let Err(e) = fs::create_dir_all(dir) {
            eprintln!("config error: output directory {}: {e}", dir.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let output = match run_command(&config) {
        Ok(o) => o,
        Err(CmdError::Usage(msg)) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    for (name, reason) in &output.failures {
        eprintln!("error: {name}: {reason}");
    }

    match &config.out_dir {
        Some(dir) => match write_tables(&output.tables, dir, config.format) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("error writing reports: {e}");
                return ExitCode::from(EXIT_TOTAL);
            }
        },
        None => print_tables(&output.tables, config.format),
    }

    if output.failures.is_empty() {
        ExitCode::SUCCESS
    } else if output.failures.len() < output.attempted {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::from(EXIT_TOTAL)
    }
}
