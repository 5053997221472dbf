use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use perifem::config::{parse_config, Config};
use perifem::experiment::{cmd_calibrate, cmd_cfl, cmd_converge, cmd_run, write_study};
use perifem::kernel::ForceLaw;
use perifem::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "perifem", version, about = "Peridynamic fracture simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Use the linearized force, overriding `discretization.force_law`.
    #[arg(long, global = true)]
    linearized: bool,

    /// Seed for the randomized parts (power iteration, probes).
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-dependent simulation with energy log and snapshots.
    Run,
    /// Prints the calibrated constants as JSON.
    Calibrate,
    /// Prints the stable time-step estimate as JSON.
    Cfl,
    /// Mesh convergence study over `[study] mesh_sizes`.
    Converge,
}

fn load(cli: &Cli) -> Result<Config> {
    let path = cli.config.as_ref().ok_or_else(|| Error::ConfigValue {
        key: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(dir) = &cli.output {
        cfg.output.directory = dir.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let law = if cli.linearized {
        ForceLaw::Linearized
    } else {
        cfg.discretization.force_law
    };
    match cli.command {
        Command::Run => {
            let out = cmd_run(&cfg, law, cli.seed)?;
            log::info!(
                "{} steps written to {}",
                out.steps,
                cfg.output.directory.display()
            );
        }
        Command::Calibrate => println!("{}", cmd_calibrate(&cfg)?),
        Command::Cfl => println!("{}", cmd_cfl(&cfg, cli.seed)?.to_json()),
        Command::Converge => {
            let result = cmd_converge(&cfg, law, false, cli.seed)?;
            write_study(&cfg, &result)?;
            for (t, a) in &result.rates {
                println!("{t:e},{a}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
