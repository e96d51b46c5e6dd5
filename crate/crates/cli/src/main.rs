mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{CommandError, Outcome, EXIT_CONFIG};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "qpf", version, about = "Translated and invariant curves of quasiperiodically forced cylinder maps")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory receiving one subdirectory per run.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Fourier truncation order, overriding the config.
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Translated curve of mean c at one ε.
    Curve,
    /// Translated curves over a range of c and the foliation check.
    Sweep,
    /// Zeros of the bifurcation function and their stability.
    FindInvariant,
    /// Mode-locking interval in the forcing frequency ω₁.
    ModeLock,
    /// Finite-time Lyapunov averages on invariant curves.
    Lyapunov,
    /// A sampled orbit of the map.
    Orbit,
    /// Continuation of one curve along an increasing ε ladder.
    Continue,
    /// Sign obstruction certificate for rational α.
    RationalCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Curve => "curve",
            Command::Sweep => "sweep",
            Command::FindInvariant => "find-invariant",
            Command::ModeLock => "mode-lock",
            Command::Lyapunov => "lyapunov",
            Command::Orbit => "orbit",
            Command::Continue => "continue",
            Command::RationalCheck => "rational-check",
        }
    }

    fn run(self, cfg: &RunConfig) -> Result<Outcome, CommandError> {
        match self {
            Command::Curve => commands::curve(cfg),
            Command::Sweep => commands::sweep(cfg),
            Command::FindInvariant => commands::find_invariant(cfg),
            Command::ModeLock => commands::mode_lock(cfg),
            Command::Lyapunov => commands::lyapunov_cmd(cfg),
            Command::Orbit => commands::orbit(cfg),
            Command::Continue => commands::continuation(cfg),
            Command::RationalCheck => commands::rational_check(cfg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    ExitCode::from(run(cli) as u8)
}

fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return EXIT_CONFIG;
        }
    }
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config is required");
        return EXIT_CONFIG;
    };
    let cfg = match config::load(path, cli.modes) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let name = cli.command.name();
    let mut outcome = match cli.command.run(&cfg) {
        Ok(o) => o,
        Err(CommandError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let report = json!({
        "command": name,
        "config": cfg,
        "result": outcome.result,
        "diagnostics": {
            "frequency": commands::frequency_diagnostics(&cfg.frequency()),
            "exit_code": outcome.exit,
        },
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    outcome.files.push(("result.json".to_string(), text));

    let dir = output::run_dir(&cli.out, name, &cfg);
    if let Err(e) = output::write_files(&dir, &outcome.files) {
        eprintln!("error: cannot write {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    println!("{}", dir.display());
    if let Some(err) = report["result"].get("error") {
        eprintln!("{}: {}", name, err["message"].as_str().unwrap_or_default());
    }
    outcome.exit
}
