//! Experiment sweeps behind the command-line tool.
//!
//! Every trial gets its own seed hashed from (base seed, N, trial index),
//! so trials run in any order on the rayon pool while the emitted streams
//! stay in (N, trial) order and byte-identical across runs.

mod verify;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::{run_attack, AttackKind, AttackReport, FamilyOracle, RChoice};
use crate::error::{Error, Result};
use crate::oracle::{derive_u64, OracleFamily, Variant};
use crate::protocols::{run_session_resampling, SessionRecord};
use crate::qsim::{qsim_table, QsimRow};
use crate::walkmodel::{fit_exponent, model_table, FitResult, ModelRow};

pub use verify::{cmd_verify, verify_adversary, verify_qsim, verify_reduction, Suite, SuiteReport};

/// Seeds tried per trial before a degenerate oracle is reported.
pub const MAX_ATTEMPTS: u32 = 32;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub n_grid: Vec<u64>,
    pub trials: usize,
    pub base_seed: u64,
    pub attack: Option<AttackKind>,
    pub r: RChoice,
    pub output: Option<PathBuf>,
    pub full_transcript: bool,
}

impl ExperimentConfig {
    pub fn new(variant: Variant, n_grid: Vec<u64>, trials: usize, base_seed: u64) -> Result<Self> {
        if n_grid.is_empty() {
            return Err(Error::Usage("the N grid is empty".into()));
        }
        if n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage(format!(
                "the N grid must be strictly ascending, got {n_grid:?}"
            )));
        }
        if trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        Ok(Self {
            variant,
            n_grid,
            trials,
            base_seed,
            attack: None,
            r: RChoice::Auto,
            output: None,
            full_transcript: false,
        })
    }

    fn points(&self) -> Vec<(u64, u64)> {
        self.n_grid
            .iter()
            .flat_map(|&n| (0..self.trials as u64).map(move |t| (n, t)))
            .collect()
    }
}

pub fn trial_seed(base_seed: u64, n: u64, trial: u64) -> u64 {
    derive_u64(b"trial", &[base_seed, n, trial])
}

/// Parses a comma-separated list such as `16,32,64`.
pub fn parse_grid(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| Error::Usage(format!("bad grid entry {p:?}")))
        })
        .collect()
}

/// Process exit status for a failed command: 2 for caller mistakes, 1 for
/// everything that went wrong at run time.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Parameter(_) | Error::Domain(_) | Error::Size(_) => 2,
        _ => 1,
    }
}

/// Opens `path` for writing, or stdout when absent.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// One protocol session per (N, trial), in grid order.
pub fn run_sessions(cfg: &ExperimentConfig) -> Result<Vec<SessionRecord>> {
    for &n in &cfg.n_grid {
        // Surface precondition failures before spending any work.
        crate::protocols::check_n(cfg.variant, n)?;
    }
    cfg.points()
        .into_par_iter()
        .map(|(n, t)| {
            run_session_resampling(
                cfg.variant,
                n,
                trial_seed(cfg.base_seed, n, t),
                MAX_ATTEMPTS,
            )
        })
        .collect()
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<SessionRecord>> {
    let records = run_sessions(cfg)?;
    for rec in &records {
        serde_json::to_writer(&mut *out, &rec.to_json(cfg.full_transcript))?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(records)
}

/// An attack against one fresh session.
#[derive(Clone, Debug, Serialize)]
pub struct AttackRun {
    pub trial: u64,
    pub seed: u64,
    pub legitimate_total: u64,
    #[serde(flatten)]
    pub report: AttackReport,
}

/// Runs a session and attacks its transcript. A resampleable failure of
/// either step moves the whole trial to a derived seed.
pub fn attack_trial(
    variant: Variant,
    kind: AttackKind,
    r: RChoice,
    n: u64,
    trial: u64,
    seed: u64,
) -> Result<AttackRun> {
    let mut current = seed;
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS as u64 {
        let outcome = (|| -> Result<AttackRun> {
            let rec = run_session_resampling(variant, n, current, MAX_ATTEMPTS)?;
            let fam = OracleFamily::new(rec.seed, variant, n)?;
            let mut oracle = FamilyOracle::new(&fam);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"attack", &[rec.seed]));
            let mut report = run_attack(kind, &rec.transcript, &mut oracle, r, &mut rng)?;
            report.score(rec.alice_key);
            Ok(AttackRun {
                trial,
                seed: rec.seed,
                legitimate_total: rec.legitimate_total(),
                report,
            })
        })();
        match outcome {
            Err(e) if e.is_resampleable() => {
                last = Some(e);
                current = derive_u64(b"attack-resample", &[seed, attempt]);
            }
            other => return other,
        }
    }
    Err(last.expect("at least one attempt was made"))
}

pub fn attack_sweep(cfg: &ExperimentConfig) -> Result<Vec<AttackRun>> {
    let kind = cfg
        .attack
        .unwrap_or_else(|| AttackKind::default_for(cfg.variant));
    for &n in &cfg.n_grid {
        crate::protocols::check_n(cfg.variant, n)?;
    }
    cfg.points()
        .into_par_iter()
        .map(|(n, t)| {
            attack_trial(
                cfg.variant,
                kind,
                cfg.r,
                n,
                t,
                trial_seed(cfg.base_seed, n, t),
            )
        })
        .collect()
}

/// Per-run summary row of the attack CSV.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct AttackRow {
    pub variant: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub trial: u64,
    pub r: Option<u64>,
    pub seed: u64,
    pub analytic_f: Option<u64>,
    pub analytic_g: Option<u64>,
    pub analytic_t: Option<u64>,
    pub executed_f: u64,
    pub executed_g: u64,
    pub executed_t: u64,
    pub executed_total: u64,
    pub legitimate_total: u64,
    pub success: bool,
}

impl From<&AttackRun> for AttackRow {
    fn from(run: &AttackRun) -> Self {
        let rep = &run.report;
        Self {
            variant: rep.variant.name().to_string(),
            n: rep.n,
            trial: run.trial,
            r: rep.r_used,
            seed: run.seed,
            analytic_f: rep.analytic.map(|c| c.f),
            analytic_g: rep.analytic.map(|c| c.g),
            analytic_t: rep.analytic.map(|c| c.t),
            executed_f: rep.executed.f,
            executed_g: rep.executed.g,
            executed_t: rep.executed.t,
            executed_total: rep.executed.total(),
            legitimate_total: run.legitimate_total,
            success: rep.success,
        }
    }
}

pub fn write_csv<T: Serialize>(rows: &[T], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON reports to `out`, one per line, and the summary table to `csv_out`.
pub fn cmd_attack(
    cfg: &ExperimentConfig,
    out: &mut dyn Write,
    csv_out: Option<&mut dyn Write>,
) -> Result<Vec<AttackRun>> {
    let runs = attack_sweep(cfg)?;
    for run in &runs {
        serde_json::to_writer(&mut *out, run)?;
        writeln!(out)?;
    }
    out.flush()?;
    if let Some(c) = csv_out {
        let rows: Vec<AttackRow> = runs.iter().map(AttackRow::from).collect();
        write_csv(&rows, c)?;
    }
    Ok(runs)
}

/// Fits the power law of `column` against N. Rows sharing an N are
/// averaged first, so per-run tables and tables of means both work.
pub fn cmd_fit(csv_path: &Path, column: &str) -> Result<FitResult> {
    let mut rdr = csv::Reader::from_path(csv_path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Usage(format!("no column {name:?} in {}", csv_path.display())))
    };
    let (n_col, c_col) = (find("N")?, find(column)?);
    let mut sums: BTreeMap<u64, (f64, u64)> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let n: u64 = row[n_col]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad N value {:?}", &row[n_col])))?;
        let v: f64 = row[c_col]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad {column} value {:?}", &row[c_col])))?;
        let e = sums.entry(n).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let points: Vec<(f64, f64)> = sums
        .into_iter()
        .map(|(n, (s, k))| (n as f64, s / k as f64))
        .collect();
    fit_exponent(&points)
}

/// Exact-search iteration counts and BBHT means for every (M, t).
pub fn cmd_qsim(ms: &[u64], targets: &[u64], trials: usize, seed: u64) -> Result<Vec<QsimRow>> {
    let grid: Vec<(u64, u64)> = ms
        .iter()
        .flat_map(|&m| {
            targets
                .iter()
                .filter(move |&&t| t <= m)
                .map(move |&t| (m, t))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"qsim", &[seed]));
    qsim_table(&grid, trials, &mut rng)
}

pub fn cmd_model(variant: Variant, grid: &[u64]) -> Result<Vec<ModelRow>> {
    model_table(variant, grid)
}
