use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qmerkle::attacks::{AttackKind, RChoice};
use qmerkle::harness::{self, ExperimentConfig, Suite};
use qmerkle::oracle::{parse_seed, Variant};
use qmerkle::Result;

#[derive(Parser)]
#[command(
    name = "qmerkle",
    version,
    about = "Merkle-style key establishment experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Sweep {
    #[arg(long, default_value = "protocol1")]
    variant: Variant,
    /// Comma-separated, strictly ascending.
    #[arg(long, default_value = "16,32,64,128")]
    n_grid: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Decimal or 0x-prefixed hex.
    #[arg(long, default_value = "0")]
    seed: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Sweep {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(
            self.variant,
            harness::parse_grid(&self.n_grid)?,
            self.trials,
            parse_seed(&self.seed)?,
        )?;
        cfg.output = self.out.clone();
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run protocol sessions and print one JSON record per session.
    Run {
        #[command(flatten)]
        sweep: Sweep,
        #[arg(long)]
        full_transcript: bool,
    },
    /// Attack fresh sessions; JSON reports plus a per-run CSV summary.
    Attack {
        #[command(flatten)]
        sweep: Sweep,
        /// classical, grover or walk; defaults by variant.
        #[arg(long)]
        attack: Option<AttackKind>,
        /// Walk node size, an integer or `auto`.
        #[arg(long, default_value = "auto")]
        r: RChoice,
        /// Summary CSV path; defaults to `<out>.csv` when --out is given.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit a power law in N to one column of a CSV table.
    Fit {
        csv: PathBuf,
        #[arg(long, default_value = "executed_total")]
        column: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a numerical verification suite.
    Verify {
        suite: Suite,
        #[arg(long, default_value = "0")]
        seed: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-search and BBHT table as CSV.
    Qsim {
        #[arg(long, default_value = "64,256,1024,4096")]
        n_grid: String,
        #[arg(long, default_value = "1,4,16")]
        targets: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value = "0")]
        seed: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimized analytic attack charges as CSV.
    Model {
        #[arg(long, default_value = "protocol1")]
        variant: Variant,
        #[arg(long, default_value = "64,256,1024,4096,16384,65536")]
        n_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            sweep,
            full_transcript,
        } => {
            let mut cfg = sweep.config()?;
            cfg.full_transcript = full_transcript;
            let mut out = harness::open_output(cfg.output.as_deref())?;
            let records = harness::cmd_run(&cfg, &mut out)?;
            Ok(records.iter().all(|r| r.agreed))
        }
        Command::Attack {
            sweep,
            attack,
            r,
            csv,
        } => {
            let mut cfg = sweep.config()?;
            cfg.attack = attack;
            cfg.r = r;
            let csv_path = csv.or_else(|| {
                cfg.output.as_ref().map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".csv");
                    PathBuf::from(s)
                })
            });
            let mut out = harness::open_output(cfg.output.as_deref())?;
            let runs = match csv_path {
                Some(p) => {
                    let mut c = harness::open_output(Some(&p))?;
                    let runs = harness::cmd_attack(&cfg, &mut out, Some(&mut c))?;
                    c.flush()?;
                    runs
                }
                None => harness::cmd_attack(&cfg, &mut out, None)?,
            };
            Ok(runs.iter().all(|r| r.report.success))
        }
        Command::Fit { csv, column, out } => {
            let fit = harness::cmd_fit(&csv, &column)?;
            let mut w = harness::open_output(out.as_deref())?;
            serde_json::to_writer(&mut w, &fit)?;
            writeln!(w)?;
            w.flush()?;
            Ok(true)
        }
        Command::Verify { suite, seed, out } => {
            let mut w = harness::open_output(out.as_deref())?;
            Ok(harness::cmd_verify(suite, parse_seed(&seed)?, &mut w)?.pass)
        }
        Command::Qsim {
            n_grid,
            targets,
            trials,
            seed,
            out,
        } => {
            let rows = harness::cmd_qsim(
                &harness::parse_grid(&n_grid)?,
                &harness::parse_grid(&targets)?,
                trials,
                parse_seed(&seed)?,
            )?;
            let mut w = harness::open_output(out.as_deref())?;
            harness::write_csv(&rows, &mut w)?;
            Ok(rows.iter().all(|r| (r.success - 1.0).abs() <= 1e-9))
        }
        Command::Model {
            variant,
            n_grid,
            out,
        } => {
            let rows = harness::cmd_model(variant, &harness::parse_grid(&n_grid)?)?;
            let mut w = harness::open_output(out.as_deref())?;
            harness::write_csv(&rows, &mut w)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qmerkle: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
