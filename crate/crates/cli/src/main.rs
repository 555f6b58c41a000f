use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use conforma::experiments::{self as exp, Setup};
use conforma::{io, CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "conforma", version, about = "Conformal outlier detection with labeled outliers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV. Defaults to the configured path, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled data set and a test set.
    Gen {
        /// Where to write the test set.
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Split-conformal p-values for one method.
    Pvalues {
        #[arg(long, default_value = "integrative")]
        method: String,
    },
    /// TCV+ p-values with model selection.
    Tcv,
    /// Rejections of each configured method on one data set.
    Fdr,
    /// FDP and power per method and replicate.
    FdrPower,
    /// Type I error of each method over replicates.
    Validity,
    /// Greedy model selection against the integrative method.
    DemoGreedy,
    /// Correlation between p-values sharing calibration data.
    Corr,
    /// Power of weighted and unweighted p-values over a bandwidth sweep.
    PowerStudy,
    /// Split integrative versus TCV+ over replicates.
    TcvCompare,
    /// Conditional calibration against BH, BY and Storey-BH.
    CcCompare,
    /// TCV+ prediction sets on synthetic multi-class data.
    Predset,
    /// Coverage of TCV+ prediction sets over replicates.
    PredsetCoverage,
    /// Print the effective configuration.
    Config,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli.common)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(CliError::config)?;
    }
    let out = cfg.out.clone();
    let out = out.as_deref();
    if let Command::Config = cli.command {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let setup = Setup::new(cfg)?;
    match cli.command {
        Command::Gen { test_out } => {
            let (labeled, test) = exp::run_gen(&setup)?;
            write_dataset(out, &labeled)?;
            if let Some(p) = test_out {
                io::save_csv(&test, &p)?;
            }
        }
        Command::Pvalues { method } => io::write_rows(out, &exp::run_pvalues(&setup, &method)?)?,
        Command::Tcv => io::write_rows(out, &exp::run_tcv(&setup)?)?,
        Command::Fdr => io::write_rows(out, &exp::run_fdr(&setup)?)?,
        Command::FdrPower => io::write_rows(out, &exp::run_fdr_power(&setup)?)?,
        Command::Validity => io::write_rows(out, &exp::run_validity(&setup)?)?,
        Command::DemoGreedy => io::write_rows(out, &exp::run_greedy_demo(&setup)?)?,
        Command::Corr => io::write_rows(out, &exp::run_correlation(&setup)?)?,
        Command::PowerStudy => io::write_rows(out, &exp::run_power_analysis(&setup)?)?,
        Command::TcvCompare => io::write_rows(out, &exp::run_tcv_compare(&setup)?)?,
        Command::CcCompare => io::write_rows(out, &exp::run_cc_compare(&setup)?)?,
        Command::Predset => io::write_rows(out, &exp::run_predset(&setup)?.2)?,
        Command::PredsetCoverage => io::write_rows(out, &exp::run_predset_coverage(&setup)?)?,
        Command::Config => unreachable!(),
    }
    Ok(())
}

fn write_dataset(out: Option<&Path>, data: &conforma_core::dataset::Dataset) -> Result<()> {
    match out {
        Some(p) => io::save_csv(data, p),
        None => io::write_dataset(std::io::stdout().lock(), data),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("conforma: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
