use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uca_doa::harness::{
    complexity_reports, crb_report, emit_outputs, run_batch, ExperimentConfig, ResultTable, SweepAxis, SweepConfig,
};
use uca_doa::rng::stream;
use uca_doa::signal::{synthesize_received, write_iq};
use uca_doa::Error;

/// Wideband direction-of-arrival experiments with a uniform circular array.
#[derive(Debug, Parser)]
#[command(name = "doa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte-Carlo batch described by a configuration.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run the batch over a list of values of one parameter.
    Sweep {
        /// Swept parameter.
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the error bound of every direction group.
    Crb {
        #[command(flatten)]
        source: Source,
    },
    /// Check the low-complexity condition for every group size.
    CheckAppendixB {
        #[command(flatten)]
        source: Source,
    },
    /// Print the default configuration as JSON.
    DefaultConfig {
        #[arg(long)]
        paper_scale: bool,
    },
    /// Write the simulated array samples of one group to a binary dump.
    Synth {
        #[command(flatten)]
        source: Source,
        /// Index of the direction group.
        #[arg(long, default_value_t = 0)]
        group: usize,
        /// Seed of the noise stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Source {
    /// JSON configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full-length observations and trial count.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Debug, Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(source: &Source) -> Result<ExperimentConfig, Failure> {
    let cfg = match &source.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    Ok(if source.paper_scale { cfg.paper_scale() } else { cfg })
}

fn configure(common: &Common, sweep: Option<SweepConfig>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load(&common.source)?;
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if let Some(dir) = &common.out {
        cfg.output_dir = dir.clone();
    }
    if sweep.is_some() {
        cfg.sweep = sweep;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn print_table(table: &ResultTable) {
    println!(
        "{:<10} {:>2} {:>10} {:>10} {:>7} {:>10} {:>12} {:>6}",
        "method", "N", "sweep", "rmse", "sdp", "crb", "flops", "iters"
    );
    for r in &table.rows {
        let sweep = r.sweep_value.map_or("-".to_string(), |v| format!("{v}"));
        println!(
            "{:<10} {:>2} {:>10} {:>10.4} {:>7.3} {:>10.4} {:>12.3e} {:>6.2}",
            r.method.to_string(),
            r.n_sources,
            sweep,
            r.rmse_deg,
            r.sdp,
            r.rmse_crb_deg,
            r.mean_flops,
            r.mean_iterations
        );
    }
}

fn batch(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let result = run_batch(cfg)?;
    emit_outputs(&result.table, &cfg.output_dir)?;
    print_table(&result.table);
    eprintln!("wrote {}", Path::new(&cfg.output_dir).join("results.csv").display());
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { common } => batch(&configure(&common, None)?),
        Command::Sweep { axis, values, common } => batch(&configure(&common, Some(SweepConfig { axis, values }))?),
        Command::Crb { source } => {
            let cfg = load(&source)?;
            for (group, rmse, per_angle) in crb_report(&cfg)? {
                let doas: Vec<String> = cfg.doa_groups[group]
                    .iter()
                    .map(|d| format!("({}, {})", d.elevation(), d.azimuth()))
                    .collect();
                match rmse {
                    Some(r) => {
                        let per: Vec<String> = per_angle.iter().map(|(t, p)| format!("{t:.3e}/{p:.3e}")).collect();
                        println!("group {group} {}: rmse bound {r:.5} deg, variances {}", doas.join(" "), per.join(" "));
                    }
                    None => println!("group {group} {}: noiseless, no bound", doas.join(" ")),
                }
            }
            Ok(())
        }
        Command::CheckAppendixB { source } => {
            let cfg = load(&source)?;
            for (n, r) in complexity_reports(&cfg)? {
                println!(
                    "N={n}: {} (lhs {:.4e}, rhs {:.4e}, margin {:.3}, bins <= {:.2}, radii sum <= {:.3})",
                    if r.satisfied { "satisfied" } else { "not satisfied" },
                    r.lhs,
                    r.rhs,
                    r.margin,
                    r.bin_bound,
                    r.radii_bound
                );
            }
            Ok(())
        }
        Command::DefaultConfig { paper_scale } => {
            let cfg = ExperimentConfig::default();
            println!("{}", if paper_scale { cfg.paper_scale() } else { cfg }.to_json());
            Ok(())
        }
        Command::Synth { source, group, seed, out } => {
            let cfg = load(&source)?;
            let doas = cfg
                .doa_groups
                .get(group)
                .ok_or_else(|| Failure::Config(format!("group {group} does not exist")))?;
            let mut scenario = cfg.scenario.clone();
            scenario.path_doas = doas.clone();
            let samples = synthesize_received(&cfg.geometry()?, &scenario, &mut stream(seed, 0))?;
            let file = File::create(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            write_iq(&samples, BufWriter::new(file))?;
            eprintln!("wrote {} samples per element to {}", samples.data.ncols(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
