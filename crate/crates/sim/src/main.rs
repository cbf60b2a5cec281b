use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use bioauth_sim::scenarios::write_csv;
use bioauth_sim::{run_e2e, run_fig8, run_fpir_check, run_six_users, HarnessConfig, TxRecord};
use clap::{Args, Parser, Subcommand};

/// Reproduce the biometric continuous authentication experiments.
#[derive(Debug, Parser)]
#[command(name = "bioauth-sim")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Harness config JSON; defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Confidence trajectories under a good/impostor sample mix.
    Fig8 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        users: usize,
        #[arg(long, default_value_t = 120)]
        tx: usize,
        #[arg(long, default_value_t = 1.0)]
        good_fraction: f64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Six enrolled users with per-user sample quality.
    SixUsers {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 120)]
        tx: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo false-positive identification rate at a finger threshold.
    Fpir {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 21_474)]
        finger_t: u32,
        #[arg(long, default_value_t = 10_000_000)]
        trials: u64,
    },
    /// Enroll, authenticate and fetch resources end to end.
    E2e {
        #[command(flatten)]
        common: Common,
    },
}

fn load(path: Option<&Path>) -> Result<HarnessConfig> {
    match path {
        Some(p) => HarnessConfig::from_file(p),
        None => Ok(HarnessConfig::default()),
    }
}

fn emit(trace: &[TxRecord], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_csv(trace, BufWriter::new(File::create(p)?)),
        None => write_csv(trace, io::stdout().lock()),
    }
}

fn report(violations: &[String]) -> ExitCode {
    if violations.is_empty() {
        return ExitCode::SUCCESS;
    }
    for v in violations {
        eprintln!("violation: {v}");
    }
    ExitCode::FAILURE
}

async fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Fig8 {
            common,
            users,
            tx,
            good_fraction,
            out,
        } => {
            let run = run_fig8(
                load(common.config.as_deref())?,
                users,
                tx,
                good_fraction,
                common.seed,
            )
            .await?;
            emit(&run.trace, out.as_deref())?;
            Ok(report(&run.violations))
        }
        Cmd::SixUsers { common, tx, out } => {
            let run = run_six_users(load(common.config.as_deref())?, tx, common.seed).await?;
            emit(&run.trace, out.as_deref())?;
            let mut err = io::stderr().lock();
            writeln!(
                err,
                "ledger transactions: {}, chains valid: {}",
                run.ledger_transactions, run.chains_valid
            )?;
            for u in &run.users {
                writeln!(
                    err,
                    "{}: {} tx, grant rate after warm-up {:.3}, final level {:.2}",
                    u.user_id, u.transactions, u.grant_rate, u.final_level
                )?;
            }
            Ok(report(&run.violations))
        }
        Cmd::Fpir {
            seed,
            finger_t,
            trials,
        } => {
            anyhow::ensure!(
                trials >= 100_000,
                "fpir needs at least 100000 trials, got {trials}"
            );
            let r = run_fpir_check(finger_t, trials, seed);
            println!(
                "finger_T={} trials={} false_positives={} empirical={:.6e} analytic={:.6e} z={:.3}",
                r.finger_t, r.trials, r.false_positives, r.empirical, r.analytic, r.z
            );
            let bad = if r.z.abs() < 4.0 {
                vec![]
            } else {
                vec![format!("|z| = {} exceeds 4", r.z.abs())]
            };
            Ok(report(&bad))
        }
        Cmd::E2e { common } => {
            let r = run_e2e(load(common.config.as_deref())?, common.seed).await?;
            for v in &r.verdicts {
                println!("{:<40} expected {} got {}", v.step, v.expected, v.actual);
            }
            let bad: Vec<_> = r
                .mismatches()
                .iter()
                .map(|v| format!("{}: expected {}, got {}", v.step, v.expected, v.actual))
                .collect();
            Ok(report(&bad))
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
