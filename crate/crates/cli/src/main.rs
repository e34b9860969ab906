use std::path::PathBuf;
use std::process::ExitCode;

use blindsure_cli::experiments::{diagnostics, gen, noise_table, scaling, tracking};
use blindsure_cli::protocol::{serve, Fault};
use blindsure_cli::{CliError, CliResult, ExperimentConfig, ExperimentKind};
use blindsure_core::DenoiserSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "blindsure", version, about = "Blind MSE prediction experiments for compressive channel estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write an evaluation dataset and its manifest.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Allow datasets above 4 GiB.
        #[arg(long)]
        allow_large: bool,
    },
    /// Noise-level estimator table (oracle, PCA, MAD).
    NoiseTable(Common),
    /// Per-iteration true, blind and non-blind NMSE.
    Tracking(Common),
    /// QQ data, eigen-spectra and heatmaps.
    Diagnostics(Common),
    /// Blind predictor runtime versus array size.
    Scaling(Common),
    /// Answer external-denoiser requests on stdin/stdout.
    ServeDenoiser {
        #[arg(long, default_value = "soft:1.5")]
        denoiser: String,
        #[arg(long, value_enum, default_value_t = FaultArg::None, hide = true)]
        fault: FaultArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    WrongLength,
    BadMagic,
    Hang,
}

fn load(common: &Common, kind: ExperimentKind) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p, kind)?,
        None => ExperimentConfig::new(kind),
    };
    if let Some(s) = common.seed {
        cfg.scenario.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Gen { common, allow_large } => {
            let cfg = load(&common, ExperimentKind::Gen)?;
            let m = gen::run(&cfg, &common.out, allow_large)?;
            println!("wrote {} records ({} bytes) sha256={}", m.records, m.bytes, m.sha256);
        }
        Command::NoiseTable(common) => {
            let cfg = load(&common, ExperimentKind::NoiseTable)?;
            for r in noise_table::run(&cfg, &common.out)? {
                println!(
                    "{:<6} snr={:>4} dB  bias={:.5}  std={:.5}  rmse={:.5}  runtime={:.2e} s",
                    r.report.method,
                    r.snr_db,
                    r.report.bias,
                    r.report.std,
                    r.report.rmse,
                    r.report.mean_runtime()
                );
            }
        }
        Command::Tracking(common) => {
            let cfg = load(&common, ExperimentKind::Tracking)?;
            let r = tracking::run(&cfg, &common.out)?;
            for s in &r.per_iteration {
                println!(
                    "t={:>2}  true={:>7.2} dB  blind={:>7.2} dB  nonblind={:>7.2} dB",
                    s.t, s.true_nmse_db, s.blind_nmse_db, s.nonblind_nmse_db
                );
            }
            println!(
                "max blind gap {:.3} dB, non-blind worse in {:.0}% of trials, oracle reads {}",
                r.max_blind_gap_db,
                100.0 * r.nonblind_worse_fraction,
                r.oracle_reads_in_blind_path
            );
        }
        Command::Diagnostics(common) => {
            let cfg = load(&common, ExperimentKind::Diagnostics)?;
            let r = diagnostics::run(&cfg, &common.out)?;
            for q in &r.qq {
                println!(
                    "t={:>2}  normality {}/{}  qq {}/{}  both {}/{}",
                    q.t, q.normality_pass, r.trials, q.qq_pass, r.trials, q.both_pass, r.trials
                );
            }
            println!("clean rank {}/{}  noisy tail {}/{}", r.clean_rank_pass, r.trials, r.tail_pass, r.trials);
        }
        Command::Scaling(common) => {
            let cfg = load(&common, ExperimentKind::Scaling)?;
            let r = scaling::run(&cfg, &common.out)?;
            for s in &r.sizes {
                println!("N={:>5}  median {:.3e} s", s.n_antennas, s.median_s);
            }
            println!("log-log slope {:.3}", r.slope);
        }
        Command::ServeDenoiser { denoiser, fault } => {
            let spec: DenoiserSpec = denoiser.parse()?;
            let den = spec.build()?;
            let fault = match fault {
                FaultArg::None => Fault::None,
                FaultArg::WrongLength => Fault::WrongLength,
                FaultArg::BadMagic => Fault::BadMagic,
                FaultArg::Hang => Fault::Hang,
            };
            serve(den.as_ref(), std::io::stdin().lock(), std::io::stdout().lock(), fault)?;
        }
    }
    Ok(())
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Config(_) => 2,
        CliError::TooLarge { .. } => 3,
        CliError::Protocol(p) => p.code() as u8,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
