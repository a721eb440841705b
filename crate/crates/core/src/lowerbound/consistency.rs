//! Statistical check that the simulated oracles look like a real protocol
//! run from the eavesdropper's side.
//!
//! Each trial draws a fresh world and records two statistics: whether f at
//! a uniform domain point lands in Y, and the domain decile holding the
//! preimage of a uniformly chosen element of Y. Two worlds are compared
//! with chi-square homogeneity tests on both statistics, each at α/2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::reduction::{plant_instance_with, reduction_oracles, Planting};
use crate::attacks::EavesdropOracle;
use crate::error::{Error, Result};
use crate::oracle::{derive_u64, OracleFamily, Variant};
use crate::protocols::alice_step;

pub const MIN_TRIALS: usize = 10_000;
const BINS: usize = 10;

/// Source of oracle worlds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum World {
    /// Real Protocol 1 oracles with Alice's published list.
    Real,
    /// Reduction simulator over a uniformly planted instance.
    Simulated,
    /// Reduction simulator whose planted points all sit in the first half.
    Corrupted,
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    hits: u64,
    misses: u64,
    bins: [u64; BINS],
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.hits += other.hits;
        self.misses += other.misses;
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
        self
    }
}

fn decile(x: u64, domain: u64) -> usize {
    (((x - 1) as u128 * BINS as u128 / domain as u128) as usize).min(BINS - 1)
}

fn trial(world: World, n: u64, seed: u64) -> Result<Tally> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"consistency-probe", &[seed]));
    let mut t = Tally::default();
    match world {
        World::Real => {
            let fam = OracleFamily::new(seed, Variant::Protocol1, n)?;
            let (xs, ys) = alice_step(&fam, seed)?;
            let probe = rng.random_range(1..=fam.domain_f());
            let hit = ys.contains(&fam.f_uncharged(probe)?);
            if hit {
                t.hits += 1
            } else {
                t.misses += 1
            }
            let k = rng.random_range(0..xs.len());
            t.bins[decile(xs[k], fam.domain_f())] += 1;
        }
        World::Simulated | World::Corrupted => {
            let planting = if world == World::Simulated {
                Planting::Uniform
            } else {
                Planting::FirstHalf
            };
            let inst = plant_instance_with(n, seed, Variant::Protocol1, planting)?;
            let mut sim = reduction_oracles(&inst, seed)?;
            let ys = sim.transcript().y.clone();
            let probe = rng.random_range(1..=inst.domain);
            let hit = ys.contains(&sim.f(probe)?);
            if hit {
                t.hits += 1
            } else {
                t.misses += 1
            }
            let k = rng.random_range(0..ys.len());
            let pre = sim.hidden_preimages(&ys[k..=k])?[0];
            t.bins[decile(pre, inst.domain)] += 1;
        }
    }
    Ok(t)
}

fn tally(world: World, n: u64, trials: usize, seed: u64) -> Result<Tally> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| trial(world, n, derive_u64(b"consistency-trial", &[seed, i])))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
}

/// Chi-square homogeneity test on a 2×k table; empty columns are dropped.
/// Returns (statistic, degrees of freedom, p-value).
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<(f64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Data("tables differ in width".into()));
    }
    let (ta, tb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if ta == 0.0 || tb == 0.0 {
        return Err(Error::Data("a row of the table is empty".into()));
    }
    let total = ta + tb;
    let mut stat = 0.0;
    let mut cols = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cols += 1;
        let (ea, eb) = (ta * col / total, tb * col / total);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cols < 2 {
        return Ok((0.0, 0.0, 1.0));
    }
    let df = (cols - 1) as f64;
    let dist = ChiSquared::new(df).map_err(|e| Error::Data(e.to_string()))?;
    Ok((stat, df, 1.0 - dist.cdf(stat)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub left: World,
    pub right: World,
    #[serde(rename = "N")]
    pub n: u64,
    pub trials: usize,
    pub alpha: f64,
    pub hit_p_value: f64,
    pub position_p_value: f64,
    pub pass: bool,
}

/// Compares two worlds; passes when neither statistic rejects at α/2.
pub fn compare_worlds(
    left: World,
    right: World,
    n: u64,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConsistencyReport> {
    if trials < MIN_TRIALS {
        return Err(Error::Parameter(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if n > 64 {
        return Err(Error::Parameter(format!(
            "consistency test is limited to N <= 64, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let l = tally(left, n, trials, derive_u64(b"left", &[seed]))?;
    let r = tally(right, n, trials, derive_u64(b"right", &[seed]))?;
    let (_, _, hit_p) = chi_square_homogeneity(&[l.hits, l.misses], &[r.hits, r.misses])?;
    let (_, _, pos_p) = chi_square_homogeneity(&l.bins, &r.bins)?;
    Ok(ConsistencyReport {
        left,
        right,
        n,
        trials,
        alpha,
        hit_p_value: hit_p,
        position_p_value: pos_p,
        pass: hit_p > alpha / 2.0 && pos_p > alpha / 2.0,
    })
}

/// Real protocol oracles against the reduction simulator.
pub fn distribution_consistency_test(
    n: u64,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConsistencyReport> {
    compare_worlds(World::Real, World::Simulated, n, trials, alpha, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chi_square_reference_values() {
        // Identical rows: statistic 0, p-value 1.
        let (s, df, p) = chi_square_homogeneity(&[10, 20, 30], &[10, 20, 30]).unwrap();
        assert_abs_diff_eq!(s, 0.0);
        assert_abs_diff_eq!(df, 2.0);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        // 2×2 table [[10, 20], [20, 10]]: expected 15 everywhere, χ² = 4·25/15.
        let (s, df, p) = chi_square_homogeneity(&[10, 20], &[20, 10]).unwrap();
        assert_abs_diff_eq!(s, 100.0 / 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(df, 1.0);
        // Survival function of χ²(1) at 6.6667 is erfc(√(s/2)).
        assert_abs_diff_eq!(p, 0.009823, epsilon = 1e-5);
    }

    #[test]
    fn empty_columns_are_dropped() {
        let (_, df, _) = chi_square_homogeneity(&[5, 0, 7], &[6, 0, 4]).unwrap();
        assert_abs_diff_eq!(df, 1.0);
    }

    #[test]
    fn deciles() {
        assert_eq!(decile(1, 100), 0);
        assert_eq!(decile(100, 100), 9);
        assert_eq!(decile(51, 100), 5);
    }

    #[test]
    fn too_few_trials_is_a_parameter_error() {
        assert!(matches!(
            distribution_consistency_test(16, 100, 0.01, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn simulated_against_itself_passes() {
        let r = compare_worlds(World::Simulated, World::Simulated, 16, 20_000, 0.01, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn corrupted_simulator_is_detected() {
        let r = compare_worlds(World::Real, World::Corrupted, 16, 10_000, 0.01, 4).unwrap();
        assert!(!r.pass, "{r:?}");
        assert!(r.position_p_value < 1e-6);
    }
}
