//! A small state-vector simulator for Grover search and its BBHT and
//! exact variants. It exists to check that the query prices charged by the
//! protocol and attack simulations are honest.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest search space simulated with a dense amplitude vector.
pub const DENSE_LIMIT: u64 = 1 << 20;

/// The constant in front of √(M/t) for every charged search.
pub const SEARCH_CONSTANT: f64 = FRAC_PI_4;

/// Growth factor of the BBHT iteration bound per failed round.
pub const BBHT_GROWTH: f64 = 6.0 / 5.0;

/// Query price charged for finding one of `targets` marked items among
/// `space` with a bounded-error quantum search.
pub fn charged_search_price(space: f64, targets: f64) -> u64 {
    (SEARCH_CONSTANT * (space / targets).sqrt()).ceil() as u64
}

/// Grover angle θ with sin²θ = t/M.
pub fn grover_angle(m: u64, t: u64) -> f64 {
    ((t as f64) / (m as f64)).sqrt().asin()
}

/// sin²((2j+1)θ).
pub fn grover_closed_form(m: u64, t: u64, j: u64) -> f64 {
    let theta = grover_angle(m, t);
    ((2 * j + 1) as f64 * theta).sin().powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn uniform(m: usize) -> Self {
        let a = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
        Self {
            amplitudes: vec![a; m],
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Phase flip on the marked basis states. Counts as one oracle query.
    pub fn apply_oracle(&mut self, marked: &[bool]) {
        for (a, &m) in self.amplitudes.iter_mut().zip(marked) {
            if m {
                *a = -*a;
            }
        }
    }

    /// Inversion about the mean.
    pub fn apply_diffusion(&mut self) {
        let mean: Complex64 =
            self.amplitudes.iter().sum::<Complex64>() / self.amplitudes.len() as f64;
        for a in &mut self.amplitudes {
            *a = 2.0 * mean - *a;
        }
    }

    pub fn probability_of(&self, marked: &[bool]) -> f64 {
        self.amplitudes
            .iter()
            .zip(marked)
            .filter(|(_, &m)| m)
            .map(|(a, _)| a.norm_sqr())
            .sum()
    }

    /// Samples a basis state from the measurement distribution.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.norm_sqr();
        let mut u = rng.random::<f64>() * total;
        for (i, a) in self.amplitudes.iter().enumerate() {
            u -= a.norm_sqr();
            if u < 0.0 {
                return i;
            }
        }
        self.amplitudes.len() - 1
    }
}

fn validate(m: u64, marked: &BTreeSet<u64>) -> Result<()> {
    if m == 0 {
        return Err(Error::Parameter("search space must be nonempty".into()));
    }
    if marked.is_empty() {
        return Err(Error::Parameter("marked set is empty".into()));
    }
    if let Some(&last) = marked.iter().next_back() {
        if last >= m {
            return Err(Error::Parameter(format!(
                "marked element {last} outside [0, {m})"
            )));
        }
    }
    Ok(())
}

fn marked_mask(m: u64, marked: &BTreeSet<u64>) -> Vec<bool> {
    let mut mask = vec![false; m as usize];
    for &x in marked {
        mask[x as usize] = true;
    }
    mask
}

/// Per-element amplitudes (marked, unmarked) after `j` Grover iterations,
/// iterated in the invariant two-dimensional subspace.
fn subspace_iterate(m: u64, t: u64, j: u64) -> (f64, f64) {
    let mf = m as f64;
    let tf = t as f64;
    let mut a = 1.0 / mf.sqrt();
    let mut b = a;
    for _ in 0..j {
        a = -a;
        let mean = (tf * a + (mf - tf) * b) / mf;
        a = 2.0 * mean - a;
        b = 2.0 * mean - b;
    }
    (a, b)
}

/// Success probability of `j` plain Grover iterations.
///
/// Dense amplitude iteration up to [`DENSE_LIMIT`], the two-dimensional
/// invariant subspace above it.
pub fn grover_run(m: u64, marked: &BTreeSet<u64>, j: u64) -> Result<f64> {
    validate(m, marked)?;
    if m <= DENSE_LIMIT {
        let mask = marked_mask(m, marked);
        let mut state = StateVector::uniform(m as usize);
        for _ in 0..j {
            state.apply_oracle(&mask);
            state.apply_diffusion();
        }
        Ok(state.probability_of(&mask))
    } else {
        let t = marked.len() as u64;
        let (a, _) = subspace_iterate(m, t, j);
        Ok(t as f64 * a * a)
    }
}

/// Smallest iteration count for which exact search is possible:
/// ceil(π/(4θ) − 1/2).
fn exact_min_iterations(m: u64, t: u64) -> u64 {
    let theta = grover_angle(m, t);
    let j = (std::f64::consts::PI / (4.0 * theta) - 0.5).ceil();
    j.max(0.0) as u64
}

/// Success probability of `j` iterations of exact amplitude amplification.
///
/// The initial state is de-amplified with an ancilla rotation so that the
/// good-state angle θ′ satisfies (2j+1)θ′ = π/2. When `j` is too small for
/// that (θ′ would exceed θ) no de-amplification is applied and the result
/// equals plain Grover.
pub fn exact_grover_run(m: u64, t: u64, j: u64) -> Result<f64> {
    if t == 0 || t > m {
        return Err(Error::Parameter(format!(
            "need 1 <= t <= M, got t={t}, M={m}"
        )));
    }
    let theta = grover_angle(m, t);
    let target = std::f64::consts::FRAC_PI_2 / (2 * j + 1) as f64;
    let start = if target <= theta { target } else { theta };
    // Good and bad components, reflected about the start vector each round.
    let (ps, pc) = (start.sin(), start.cos());
    let (mut g, mut b) = (ps, pc);
    for _ in 0..j {
        g = -g;
        let overlap = g * ps + b * pc;
        g = 2.0 * overlap * ps - g;
        b = 2.0 * overlap * pc - b;
    }
    Ok(g * g)
}

/// Smallest `j` for which exact amplification succeeds with probability at
/// least 1 − 1e−6, found by scanning `j` upward.
pub fn grover_certain_iterations(m: u64, t: u64) -> Result<u64> {
    if t == 0 || t > m {
        return Err(Error::Parameter(format!(
            "need 1 <= t <= M, got t={t}, M={m}"
        )));
    }
    let bound = exact_min_iterations(m, t);
    for j in 0..=bound {
        if exact_grover_run(m, t, j)? >= 1.0 - 1e-6 {
            return Ok(j);
        }
    }
    unreachable!("exact amplification succeeds at j = {bound}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BbhtOutcome {
    pub found: u64,
    pub queries: u64,
    pub rounds: u64,
}

/// BBHT search over a fixed marked set. Measurement distributions are
/// memoized per iteration count, so repeated runs share the simulation.
pub struct BbhtSimulator {
    m: u64,
    marked: BTreeSet<u64>,
    mask: Vec<bool>,
    /// Cumulative measurement distribution after j iterations, by j.
    cdfs: Vec<Vec<f64>>,
    state: StateVector,
}

impl BbhtSimulator {
    pub fn new(m: u64, marked: BTreeSet<u64>) -> Result<Self> {
        validate(m, &marked)?;
        if m > DENSE_LIMIT {
            return Err(Error::Size(format!(
                "BBHT simulation limited to M <= {DENSE_LIMIT}"
            )));
        }
        let mask = marked_mask(m, &marked);
        let state = StateVector::uniform(m as usize);
        Ok(Self {
            m,
            marked,
            mask,
            cdfs: Vec::new(),
            state,
        })
    }

    fn cdf(&mut self, j: usize) -> &[f64] {
        while self.cdfs.len() <= j {
            if !self.cdfs.is_empty() {
                self.state.apply_oracle(&self.mask);
                self.state.apply_diffusion();
            }
            let mut acc = 0.0;
            let cdf = self
                .state
                .amplitudes()
                .iter()
                .map(|a| {
                    acc += a.norm_sqr();
                    acc
                })
                .collect();
            self.cdfs.push(cdf);
        }
        &self.cdfs[j]
    }

    fn sample<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> u64 {
        let cdf = self.cdf(j);
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
    }

    /// One BBHT run. Each round costs its Grover iterations plus one query
    /// to test the measured element.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> BbhtOutcome {
        let cap = (self.m as f64).sqrt();
        let mut bound = 1.0f64;
        let mut queries = 0u64;
        let mut rounds = 0u64;
        loop {
            rounds += 1;
            let j = rng.random_range(0..bound.ceil() as u64);
            let x = self.sample(j as usize, rng);
            queries += j + 1;
            if self.marked.contains(&x) {
                return BbhtOutcome {
                    found: x,
                    queries,
                    rounds,
                };
            }
            bound = (bound * BBHT_GROWTH).min(cap);
        }
    }
}

/// A single BBHT search.
pub fn bbht_run<R: Rng + ?Sized>(
    m: u64,
    marked: &BTreeSet<u64>,
    rng: &mut R,
) -> Result<BbhtOutcome> {
    Ok(BbhtSimulator::new(m, marked.clone())?.run(rng))
}

/// One line of the `qsim` table.
#[derive(Clone, Debug, Serialize)]
pub struct QsimRow {
    #[serde(rename = "M")]
    pub m: u64,
    pub t: u64,
    pub j_star: u64,
    pub success: f64,
    pub queries: f64,
}

/// Exact-search iteration counts and BBHT mean queries over a grid.
pub fn qsim_table<R: Rng + ?Sized>(
    grid: &[(u64, u64)],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<QsimRow>> {
    grid.iter()
        .map(|&(m, t)| {
            let j_star = grover_certain_iterations(m, t)?;
            let success = exact_grover_run(m, t, j_star)?;
            let mut sim = BbhtSimulator::new(m, (0..t).collect())?;
            let total: u64 = (0..trials.max(1)).map(|_| sim.run(rng).queries).sum();
            Ok(QsimRow {
                m,
                t,
                j_star,
                success,
                queries: total as f64 / trials.max(1) as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(xs: &[u64]) -> BTreeSet<u64> {
        xs.iter().copied().collect()
    }

    #[test]
    fn one_iteration_on_four_is_certain() {
        assert_abs_diff_eq!(grover_run(4, &set(&[2]), 1).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn m1024_after_25_iterations() {
        let p = grover_run(1024, &set(&[17]), 25).unwrap();
        assert!(p >= 0.999, "{p}");
        assert_abs_diff_eq!(p, grover_closed_form(1024, 1, 25), epsilon = 1e-9);
    }

    #[test]
    fn zero_iterations_is_uniform() {
        let p = grover_run(100, &set(&[1, 5, 9]), 0).unwrap();
        assert_abs_diff_eq!(p, 0.03, epsilon = 1e-15);
    }

    #[test]
    fn empty_marked_set_is_rejected() {
        assert!(matches!(
            grover_run(8, &BTreeSet::new(), 1),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            grover_run(8, &set(&[8]), 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn normalization_is_preserved() {
        let mask: Vec<bool> = (0..512).map(|i| i % 37 == 0).collect();
        let mut s = StateVector::uniform(512);
        for _ in 0..40 {
            s.apply_oracle(&mask);
            s.apply_diffusion();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn subspace_path_matches_dense_path() {
        for &(m, t, j) in &[(1024u64, 3u64, 7u64), (4096, 1, 50), (333, 10, 4)] {
            let dense = grover_run(m, &(0..t).collect(), j).unwrap();
            let (a, _) = subspace_iterate(m, t, j);
            assert_abs_diff_eq!(dense, t as f64 * a * a, epsilon = 1e-10);
        }
    }

    #[test]
    fn large_space_uses_closed_subspace() {
        let m = 1u64 << 30;
        let p = grover_run(m, &set(&[0]), 100).unwrap();
        assert_abs_diff_eq!(p, grover_closed_form(m, 1, 100), epsilon = 1e-9);
    }

    #[test]
    fn certain_iterations_examples() {
        assert_eq!(grover_certain_iterations(4, 1).unwrap(), 1);
        assert_eq!(grover_certain_iterations(1024, 1).unwrap(), 25);
        assert_eq!(grover_certain_iterations(7, 7).unwrap(), 0);
        assert!(exact_grover_run(1024, 1, 25).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn certain_iterations_within_charged_price() {
        for m in [4u64, 16, 64, 256, 1024, 4096, 1 << 14, 1 << 20] {
            for t in [1u64, 2, 3, 4, 16] {
                if t > m {
                    continue;
                }
                let j = grover_certain_iterations(m, t).unwrap();
                assert!(
                    j <= charged_search_price(m as f64, t as f64),
                    "M={m} t={t} j={j}"
                );
            }
        }
    }

    #[test]
    fn charged_price_examples() {
        assert_eq!(charged_search_price(4096.0, 16.0), 13);
        assert_eq!(charged_search_price(64.0 * 64.0, 1.0), 51);
    }

    #[test]
    fn bbht_mean_queries_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sim = BbhtSimulator::new(4096, set(&[1234])).unwrap();
        let total: u64 = (0..1000).map(|_| sim.run(&mut rng).queries).sum();
        assert!(total as f64 / 1000.0 <= 192.0);
    }

    #[test]
    fn bbht_all_marked_is_immediate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sim = BbhtSimulator::new(64, (0..64).collect()).unwrap();
        for _ in 0..200 {
            let out = sim.run(&mut rng);
            assert_eq!(out.queries, 1);
        }
    }

    #[test]
    fn bbht_returns_marked_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let marked = set(&[3, 99, 200]);
        for _ in 0..100 {
            let out = bbht_run(256, &marked, &mut rng).unwrap();
            assert!(marked.contains(&out.found));
        }
    }

    proptest! {
        #[test]
        fn dense_run_matches_closed_form(m in 2u64..2048, t_frac in 0.0f64..1.0, j in 0u64..40) {
            let t = 1 + ((m - 1) as f64 * t_frac) as u64;
            let p = grover_run(m, &(0..t).collect(), j).unwrap();
            prop_assert!((p - grover_closed_form(m, t, j)).abs() < 1e-9);
        }

        #[test]
        fn exact_run_is_a_probability(m in 1u64..100_000, t in 1u64..50, j in 0u64..300) {
            prop_assume!(t <= m);
            let p = exact_grover_run(m, t, j).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        }
    }
}
