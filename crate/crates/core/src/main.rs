use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use molfilter::config::{parse_config, ExperimentConfig};
use molfilter::sweep::{format_float, run_sweep};
use molfilter::{build_cir, reference_time, FilterKind};

#[derive(Parser)]
#[command(
    name = "molfilter",
    version,
    about = "Matched filters for molecule-counting receivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the SINR/BER sweep and write CSV + manifest outputs.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of matched,sum,correlator,peak.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<FilterKind>>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the L x M impulse-response matrix as CSV.
    Cir {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Molecules per transmitted 1; defaults to the last grid point.
        #[arg(long)]
        n_tx: Option<f64>,
        /// Normalized symbol duration; defaults to the first configured one.
        #[arg(long)]
        t_symb: Option<f64>,
    },
    /// Print the reference time in seconds.
    Tref {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&PathBuf>) -> molfilter::Result<ExperimentConfig> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> molfilter::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            filters,
            workers,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(f) = filters {
                cfg.filters = f;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let report = run_sweep(&cfg)?;
            for res in &report.results {
                println!("t_symb_norm={} t_ref={} s", res.t_symb_norm, format_float(res.t_ref));
                println!(
                    "{:>12} {:>10} {:>12} {:>12} {:>12} {:>12}",
                    "n_tx", "filter", "sinr", "sinr_mc", "ber", "ber_mc"
                );
                for p in &res.points {
                    println!(
                        "{:>12} {:>10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                        format_float(p.n_tx),
                        p.filter.name(),
                        p.sinr_analytical,
                        p.sinr_empirical,
                        p.ber_analytical,
                        p.ber_empirical
                    );
                }
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Cir { config, n_tx, t_symb } => {
            let cfg = load(config.as_ref())?;
            let n_tx = n_tx.unwrap_or(*cfg.n_tx_grid.last().expect("validated grid"));
            let t_symb = t_symb.unwrap_or(cfg.t_symb_norm[0]);
            let timing = cfg.timing(t_symb);
            timing.validate()?;
            let cir = build_cir(&cfg.channel_params(n_tx), &timing)?;
            let header: Vec<String> = (1..=cir.m_samples()).map(|m| format!("m{m}")).collect();
            println!("l,{}", header.join(","));
            for (l, row) in cir.to_rows().iter().enumerate() {
                let vals: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
                println!("{},{}", l + 1, vals.join(","));
            }
        }
        Command::Tref { config } => {
            let cfg = load(config.as_ref())?;
            println!(
                "{}",
                format_float(reference_time(&cfg.channel_params(cfg.n_tx_grid[0]))?)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
