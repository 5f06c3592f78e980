use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reseng::error::{Error, Result};
use reseng::io::{self, AnalysisSelector, ExperimentConfig, StateSource};

#[derive(Parser)]
#[command(name = "reseng", version, about = "Reservoir-engineered motional states of a trapped ion")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Output directory; defaults to `output.dir` from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    truncation_override: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pumping protocol and record fidelity versus time.
    Pump,
    /// Probe a state and write a shot-sampled Rabi trace.
    Probe {
        /// `target`, or a state file written by `pump`.
        #[arg(long, default_value = "target")]
        state: String,
    },
    /// Fit populations (and state parameters) to a trace file.
    Fit {
        trace: PathBuf,
        #[arg(long)]
        n_max: Option<usize>,
        /// Accept a trace whose digest differs from the config.
        #[arg(long)]
        force: bool,
    },
    /// darkstate | noise-budget | coherent-benchmark
    Analyze { selector: String },
    /// Write ideal target populations and a synthetic blue-sideband trace.
    GenData,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        field: "--config".into(),
        message: "this command needs a configuration file".into(),
    })?;
    let mut cfg = ExperimentConfig::load_unchecked(path)?;
    if let Some(s) = cli.seed_override {
        cfg.seed = Some(s);
    }
    if let Some(n) = cli.truncation_override {
        cfg.truncation = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| cfg.map(|c| PathBuf::from(&c.output.dir)))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli) -> Result<(String, PathBuf)> {
    match &cli.command {
        Command::Pump => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, Some(&cfg));
            let res = io::cmd_pump(&cfg, &out)?;
            let f = res.result.target_fidelity.last().copied().unwrap_or(f64::NAN);
            Ok((format!("pump: {} samples, final fidelity {f:.6} -> {}", res.result.times.len(), out.display()), out))
        }
        Command::Probe { state } => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, Some(&cfg));
            let t = io::cmd_probe(&cfg, &StateSource::parse(state), &out)?;
            Ok((format!("probe: {} points ({}) -> {}", t.trace.len(), t.trace.basis_tag, out.display()), out))
        }
        Command::Fit { trace, n_max, force } => {
            let cfg = match &cli.config {
                Some(_) => Some(load_config(cli)?),
                None => None,
            };
            let out = out_dir(cli, cfg.as_ref());
            let fit = io::cmd_fit(trace, cfg.as_ref(), *n_max, *force, &out)?;
            Ok((format!("fit: chi2 {:.4e} -> {}", fit.populations.cost, out.display()), out))
        }
        Command::Analyze { selector } => {
            let sel = AnalysisSelector::parse(selector)?;
            let cfg = load_config(cli)?;
            let out = out_dir(cli, Some(&cfg));
            io::cmd_analyze(&cfg, sel, &out)?;
            Ok((format!("analyze {selector} -> {}", out.join(sel.file_name()).display()), out))
        }
        Command::GenData => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, Some(&cfg));
            let t = io::cmd_gen_data(&cfg, &out)?;
            Ok((format!("gen-data: {} points -> {}", t.trace.len(), out.display()), out))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().collect();
    match run(&cli) {
        Ok((msg, dir)) => {
            let _ = io::append_log(&dir, &format!("ok\t{}\t{msg}", args.join(" ")));
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
