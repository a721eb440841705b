//! The `verify` suites. Each check is one JSON line; a suite passes only
//! when every check does.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::attacks::{walk_attack, RChoice};
use crate::error::{Error, Result};
use crate::lowerbound::matrix::all_ones;
use crate::lowerbound::{
    adv_ratio, claim_suite, compare_worlds, plant_instance, psearch_d, psearch_gamma,
    psearch_mask_checks, psearch_ratio_checks, psearch_ratio_closed_form,
    reduction_oracles_resampling, spectral_norm, ClaimCheck, World,
};
use crate::oracle::{derive_u64, Variant};
use crate::qsim::{grover_closed_form, grover_run, BbhtSimulator};

/// Grid of the composition norm checks.
pub const CLAIM_GRID: [(usize, usize, usize); 3] = [(2, 2, 2), (3, 3, 2), (2, 2, 3)];
pub const CLAIM_SAMPLES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Adversary,
    Qsim,
    Reduction,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversary" => Ok(Suite::Adversary),
            "qsim" => Ok(Suite::Qsim),
            "reduction" => Ok(Suite::Reduction),
            other => Err(Error::Usage(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Value>,
    pub failed: usize,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Value>) -> Self {
        let failed = checks.iter().filter(|c| c["pass"] != true).count();
        Self {
            suite,
            checks,
            failed,
            pass: failed == 0,
        }
    }

    /// Checks whose `claim` field equals `name`.
    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
        self.checks.iter().filter(move |c| c["claim"] == name)
    }
}

fn claim_values(checks: Vec<ClaimCheck>) -> Result<Vec<Value>> {
    checks
        .into_iter()
        .map(|c| serde_json::to_value(c).map_err(Error::from))
        .collect()
}

/// Norm identities of the composition argument and of pSEARCH.
///
/// `n_max` bounds the single-block checks (n ∈ [2, n_max]); the adv_ratio
/// checks build Mn×Mn matrices with M = 2 and stop at n = 32.
pub fn verify_adversary(seed: u64, n_max: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"verify-adversary", &[seed]));
    let mut checks = Vec::new();
    for n in 2..=n_max {
        let norm = spectral_norm(&all_ones(n))?;
        let delta = (norm - n as f64).abs();
        checks.push(json!({
            "claim": "ones_norm", "dims": {"n": n},
            "lhs": norm, "rhs": n, "delta": delta, "pass": delta <= 1e-10,
        }));
    }
    checks.extend(claim_values(psearch_mask_checks(2..=n_max)?)?);
    checks.extend(claim_values(claim_suite(
        &CLAIM_GRID,
        CLAIM_SAMPLES,
        &mut rng,
    )?)?);
    let ratio_ns = 2..=n_max.min(32);
    checks.extend(claim_values(psearch_ratio_checks(2, ratio_ns.clone())?)?);
    for n in ratio_ns {
        let ds: Vec<_> = (0..n).map(|q| psearch_d(2, n, q)).collect();
        let ratio = adv_ratio(&psearch_gamma(2, n), &ds)?;
        let root = (n as f64).sqrt();
        checks.push(json!({
            "claim": "psearch_ratio_exceeds_sqrt_n", "dims": {"M": 2, "n": n},
            "lhs": ratio, "rhs": root, "pass": ratio > root,
        }));
        let stated = psearch_ratio_closed_form(n);
        checks.push(json!({
            "claim": "stated_ratio_exceeds_sqrt_n", "dims": {"n": n},
            "lhs": stated, "rhs": root, "pass": stated > root,
        }));
    }
    Ok(SuiteReport::new(Suite::Adversary, checks))
}

/// Grover state-vector runs against the closed form, and BBHT mean cost.
pub fn verify_qsim(seed: u64, bbht_runs: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"verify-qsim", &[seed]));
    let mut checks = Vec::new();
    for marked in 0..4u64 {
        let p = grover_run(4, &BTreeSet::from([marked]), 1)?;
        checks.push(json!({
            "claim": "grover_m4_single_step", "dims": {"M": 4, "marked": marked},
            "lhs": p, "rhs": 1.0, "delta": (p - 1.0).abs(), "pass": (p - 1.0).abs() <= 1e-9,
        }));
    }
    for m in [4u64, 16, 64, 256, 1024, 4096, 16384] {
        for t in [1u64, 2, 3, 16] {
            if t >= m {
                continue;
            }
            let marked: BTreeSet<u64> = index::sample(&mut rng, m as usize, t as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            for j in [0u64, 1, 2, 5, 12, 50] {
                let p = grover_run(m, &marked, j)?;
                let cf = grover_closed_form(m, t, j);
                checks.push(json!({
                    "claim": "grover_closed_form", "dims": {"M": m, "t": t, "j": j},
                    "lhs": p, "rhs": cf, "delta": (p - cf).abs(), "pass": (p - cf).abs() <= 1e-9,
                }));
            }
        }
    }
    for t in [1u64, 4, 16] {
        let m = 4096u64;
        let marked: BTreeSet<u64> = (0..t).map(|i| i * 97 % m).collect();
        let mut sim = BbhtSimulator::new(m, marked.clone())?;
        let mut total = 0u64;
        let mut found = 0usize;
        for _ in 0..bbht_runs {
            let out = sim.run(&mut rng);
            total += out.queries;
            found += usize::from(marked.contains(&out.found));
        }
        let mean = total as f64 / bbht_runs as f64;
        let bound = 3.0 * (m as f64 / t as f64).sqrt();
        checks.push(json!({
            "claim": "bbht_mean_queries", "dims": {"M": m, "t": t, "runs": bbht_runs},
            "lhs": mean, "rhs": bound, "found": found,
            "pass": mean <= bound && found == bbht_runs,
        }));
    }
    Ok(SuiteReport::new(Suite::Qsim, checks))
}

/// Walk attacks against the simulator, and the consistency test with its
/// negative control.
pub fn verify_reduction(seed: u64, samples: usize, walk_runs: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for variant in [Variant::Protocol1, Variant::Protocol2] {
        let mut recovered = 0u64;
        let mut worst_ratio = 0.0f64;
        for run in 0..walk_runs {
            let s = derive_u64(b"verify-reduction", &[seed, run]);
            let inst = plant_instance(16, s, variant)?;
            let mut sim = reduction_oracles_resampling(&inst, s, 32)?;
            let transcript = sim.transcript().clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"walk", &[s]));
            let rep = walk_attack(&transcript, &mut sim, RChoice::Auto, &mut rng)?;
            if rep.recovered_key.map(|k| k.unordered()) == Some(inst.collision_pair)
                && rep.recovered_key == Some(sim.expected_key())
            {
                recovered += 1;
            }
            let spent = (rep.executed.f + rep.executed.g).max(1);
            worst_ratio = worst_ratio.max(sim.h_prime_lookups() as f64 / spent as f64);
        }
        checks.push(json!({
            "claim": "walk_recovers_planted_pair", "dims": {"variant": variant, "N": 16},
            "lhs": recovered, "rhs": walk_runs, "pass": recovered == walk_runs,
        }));
        checks.push(json!({
            "claim": "lookups_within_twice_queries", "dims": {"variant": variant, "N": 16},
            "lhs": worst_ratio, "rhs": 2.0, "pass": worst_ratio <= 2.0,
        }));
    }
    let alpha = 0.01;
    let real = compare_worlds(World::Real, World::Simulated, 16, samples, alpha, seed)?;
    checks.push(json!({
        "claim": "consistency_real_vs_simulated", "report": real, "pass": real.pass,
    }));
    let control = compare_worlds(World::Real, World::Corrupted, 16, samples, alpha, seed)?;
    checks.push(json!({
        "claim": "corrupted_control_rejected", "report": control, "pass": !control.pass,
    }));
    Ok(SuiteReport::new(Suite::Reduction, checks))
}

/// Runs a suite at its full size and writes one line per check followed by
/// a summary line.
pub fn cmd_verify(suite: Suite, seed: u64, out: &mut dyn Write) -> Result<SuiteReport> {
    let report = match suite {
        Suite::Adversary => verify_adversary(seed, 64)?,
        Suite::Qsim => verify_qsim(seed, 1000)?,
        Suite::Reduction => verify_reduction(seed, 100_000, 50)?,
    };
    for c in &report.checks {
        serde_json::to_writer(&mut *out, c)?;
        writeln!(out)?;
    }
    serde_json::to_writer(
        &mut *out,
        &json!({
            "suite": report.suite, "checks": report.checks.len(),
            "failed": report.failed, "pass": report.pass,
        }),
    )?;
    writeln!(out)?;
    out.flush()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("qsim".parse::<Suite>().unwrap(), Suite::Qsim);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_adversary_suite_separates_claims_from_mask_norms() {
        let rep = verify_adversary(0, 6).unwrap();
        for name in [
            "claim1",
            "claim2",
            "ones_norm",
            "stated_ratio_exceeds_sqrt_n",
        ] {
            assert!(rep.named(name).count() > 0, "{name}");
            assert!(rep.named(name).all(|c| c["pass"] == true), "{name}");
        }
        // The masked block has norm (1 + √(4n−3))/2, not √(n−1).
        assert!(rep.named("psearch_mask_norm").all(|c| c["pass"] == false));
        assert!(!rep.pass);
    }

    #[test]
    fn small_qsim_suite_passes() {
        let rep = verify_qsim(1, 200).unwrap();
        assert!(
            rep.pass,
            "{:?}",
            rep.checks.iter().find(|c| c["pass"] != true)
        );
    }

    #[test]
    fn small_reduction_suite_passes() {
        let rep = verify_reduction(2, 10_000, 5).unwrap();
        assert!(
            rep.pass,
            "{:?}",
            rep.checks.iter().find(|c| c["pass"] != true)
        );
    }
}
