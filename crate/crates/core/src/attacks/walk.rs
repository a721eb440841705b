//! Classical execution of the Johnson-graph walk skeleton, with every
//! quantum step charged at its query price.
//!
//! A node is a set of r elements of the search universe (positions in Y,
//! or in Y′ for Protocol 2). Each element is located by a charged quantum
//! search. The walk alternates a batch of ceil(√r) single-element
//! replacements with a check of the node for the key pair.

use std::collections::HashMap;

use rand::Rng;

use super::{verify_key, AttackReport, EavesdropOracle};
use crate::error::{Error, Result};
use crate::oracle::{OracleFn, RangeValue, Variant};
use crate::protocols::{KeyPair, Transcript};
use crate::qsim::charged_search_price;
use crate::walkmodel::{analytic_charge, attack_r_range, element_price, optimal_attack_r};

/// Node size selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RChoice {
    Fixed(u64),
    /// Minimize the analytic charge.
    Auto,
}

impl std::str::FromStr for RChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RChoice::Auto);
        }
        s.parse::<u64>()
            .map(RChoice::Fixed)
            .map_err(|_| Error::Usage(format!("--r expects an integer or 'auto', got {s:?}")))
    }
}

/// Hard stop against non-termination; the expected walk length is far below.
const MAX_BATCHES: u64 = 10_000_000;

struct Node<'u> {
    universe: &'u [u64],
    /// Universe indices currently in the node.
    members: Vec<usize>,
    present: Vec<bool>,
    t_cache: HashMap<usize, RangeValue>,
}

struct Walker<'a, O: ?Sized> {
    transcript: &'a Transcript,
    oracle: &'a mut O,
    variant: Variant,
    price: u64,
    /// Universe position → position in Y, for key ordering.
    y_position: Vec<usize>,
}

impl<O: EavesdropOracle + ?Sized> Walker<'_, O> {
    /// Brings universe element `i` into the node: one charged search, plus
    /// one charged t-query for the XOR variants.
    fn insert(&mut self, node: &mut Node<'_>, i: usize) -> Result<()> {
        self.oracle.charge(OracleFn::F, self.price);
        if self.variant.uses_t() {
            self.oracle.charge(OracleFn::T, 1);
            node.t_cache
                .insert(i, self.oracle.hidden_t(node.universe[i])?);
        }
        node.members.push(i);
        node.present[i] = true;
        Ok(())
    }

    fn remove_at<R: Rng + ?Sized>(&mut self, node: &mut Node<'_>, rng: &mut R) -> usize {
        let k = rng.random_range(0..node.members.len());
        let i = node.members.swap_remove(k);
        node.present[i] = false;
        node.t_cache.remove(&i);
        i
    }

    /// Looks for the key pair in the node. Two matching pairs mean the
    /// oracle is degenerate.
    fn check(&mut self, node: &Node<'_>) -> Result<Option<KeyPair>> {
        let w = self.transcript.w;
        let mut found: Option<KeyPair> = None;
        let mut record = |k: KeyPair| -> Result<()> {
            if found.is_some_and(|f| f != k) {
                return Err(Error::Degeneracy("two pairs in one node match w".into()));
            }
            found = Some(k);
            Ok(())
        };
        if self.variant.uses_t() {
            let by_value: HashMap<RangeValue, usize> =
                node.t_cache.iter().map(|(&i, &v)| (v, i)).collect();
            for (&i, &v) in &node.t_cache {
                if let Some(&j) = by_value.get(&(v ^ w)) {
                    if self.y_position[i] < self.y_position[j] {
                        record(KeyPair(node.universe[i], node.universe[j]))?;
                    }
                }
            }
        } else {
            let r = node.members.len() as f64;
            self.oracle
                .charge(OracleFn::G, charged_search_price(r * r, 1.0));
            for &i in &node.members {
                for &j in &node.members {
                    if i != j && self.oracle.hidden_g(node.universe[i], node.universe[j])? == w {
                        record(KeyPair(node.universe[i], node.universe[j]))?;
                    }
                }
            }
        }
        Ok(found)
    }
}

/// Walk attack against any variant but the original scheme.
pub fn walk_attack<O: EavesdropOracle + ?Sized, R: Rng + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
    r: RChoice,
    rng: &mut R,
) -> Result<AttackReport> {
    let variant = transcript.variant;
    let n = oracle.n();
    let (lo, hi) = attack_r_range(variant, n)?;
    let r = match r {
        RChoice::Fixed(r) => r,
        RChoice::Auto => optimal_attack_r(variant, n)?.0,
    };
    if r < lo || r > hi {
        return Err(Error::Parameter(format!(
            "r={r} outside [{lo}, {hi}] for {variant} at N={n}"
        )));
    }
    let analytic = analytic_charge(variant, n, r)?;

    let targets: Vec<RangeValue> = match variant {
        Variant::Protocol2 => transcript
            .y_prime
            .clone()
            .ok_or_else(|| Error::Data("protocol2 transcript without Y'".into()))?,
        _ => transcript.y.clone(),
    };
    let index = transcript.position_index();
    let y_position: Vec<usize> = targets
        .iter()
        .map(|y| {
            index
                .get(y)
                .copied()
                .ok_or_else(|| Error::Data("Y' is not a subset of Y".into()))
        })
        .collect::<Result<_>>()?;
    let universe = oracle.hidden_preimages(&targets)?;

    let mut walker = Walker {
        transcript,
        oracle,
        variant,
        price: element_price(variant, n)?,
        y_position,
    };
    let mut node = Node {
        universe: &universe,
        members: Vec::with_capacity(r as usize),
        present: vec![false; universe.len()],
        t_cache: HashMap::new(),
    };

    for i in rand::seq::index::sample(rng, universe.len(), r as usize) {
        walker.insert(&mut node, i)?;
    }
    let batch = (r as f64).sqrt().ceil() as u64;
    let mut key = walker.check(&node)?;
    let mut batches = 0u64;
    while key.is_none() {
        batches += 1;
        if batches > MAX_BATCHES {
            return Err(Error::Parameter("walk exceeded its step limit".into()));
        }
        for _ in 0..batch {
            let removed = walker.remove_at(&mut node, rng);
            let candidates: Vec<usize> = (0..universe.len())
                .filter(|&i| !node.present[i] && i != removed)
                .collect();
            let next = candidates[rng.random_range(0..candidates.len())];
            walker.insert(&mut node, next)?;
        }
        key = walker.check(&node)?;
    }

    let key = key.expect("loop exits with a key");
    let oracle = walker.oracle;
    let verified = verify_key(oracle, transcript, key)?;
    Ok(AttackReport::new(
        variant,
        n,
        Some(key),
        verified,
        oracle.ledger(),
        Some(r),
        Some(analytic),
    ))
}

fn require(transcript: &Transcript, allowed: &[Variant]) -> Result<()> {
    if !allowed.contains(&transcript.variant) {
        return Err(Error::Usage(format!(
            "attack does not apply to {}",
            transcript.variant
        )));
    }
    Ok(())
}

pub fn walk_attack_p1<O: EavesdropOracle + ?Sized, R: Rng + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
    r: RChoice,
    rng: &mut R,
) -> Result<AttackReport> {
    require(transcript, &[Variant::Protocol1])?;
    walk_attack(transcript, oracle, r, rng)
}

pub fn walk_attack_p2<O: EavesdropOracle + ?Sized, R: Rng + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
    r: RChoice,
    rng: &mut R,
) -> Result<AttackReport> {
    require(transcript, &[Variant::Protocol2])?;
    walk_attack(transcript, oracle, r, rng)
}

pub fn walk_attack_lbn<O: EavesdropOracle + ?Sized, R: Rng + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
    r: RChoice,
    rng: &mut R,
) -> Result<AttackReport> {
    require(transcript, &[Variant::LbnQuantum, Variant::LbnClassical])?;
    walk_attack(transcript, oracle, r, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::FamilyOracle;
    use crate::oracle::{OracleFamily, Party, QueryMode};
    use crate::protocols::run_session;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn attack(v: Variant, n: u64, seed: u64, r: RChoice) -> AttackReport {
        let rec = run_session(v, n, seed).unwrap();
        let fam = OracleFamily::new(rec.seed, v, n).unwrap();
        let mut o = FamilyOracle::new(&fam);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let mut rep = walk_attack(&rec.transcript, &mut o, r, &mut rng).unwrap();
        rep.score(rec.bob_key);
        rep
    }

    #[test]
    fn walks_recover_the_key() {
        for (v, n) in [
            (Variant::Protocol1, 16),
            (Variant::Protocol2, 16),
            (Variant::Protocol2, 25),
            (Variant::LbnQuantum, 16),
            (Variant::LbnClassical, 16),
        ] {
            for s in 0..10 {
                let rep = attack(v, n, s, RChoice::Auto);
                assert!(rep.success, "{v} N={n} seed={s}");
            }
        }
    }

    #[test]
    fn charges_are_all_quantum_and_match_report_totals() {
        let rep = attack(Variant::Protocol1, 16, 3, RChoice::Fixed(6));
        let l = &rep.eve_ledger;
        assert_eq!(l.mode_total(Party::Eve, QueryMode::Classical), 0);
        assert_eq!(
            rep.charged_total_f,
            l.get(Party::Eve, OracleFn::F, QueryMode::ChargedQuantum)
        );
        assert_eq!(rep.charged_total_g, rep.executed.g);
        assert_eq!(rep.r_used, Some(6));
        // Setup alone already costs r element prices.
        assert!(rep.executed.f >= 6 * 13);
        assert_eq!(rep.executed.f % 13, 0);
    }

    #[test]
    fn lbn_charges_one_t_per_inserted_element() {
        let rep = attack(Variant::LbnClassical, 16, 8, RChoice::Fixed(6));
        let price = element_price(Variant::LbnClassical, 16).unwrap();
        assert_eq!(rep.executed.f, rep.executed.t * price);
        assert_eq!(rep.executed.g, 0);
    }

    #[test]
    fn out_of_range_r_is_rejected() {
        let rec = run_session(Variant::Protocol1, 16, 0).unwrap();
        let fam = OracleFamily::new(rec.seed, Variant::Protocol1, 16).unwrap();
        let mut o = FamilyOracle::new(&fam);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in [1, 16, 100] {
            let res = walk_attack(&rec.transcript, &mut o, RChoice::Fixed(r), &mut rng);
            assert!(matches!(res, Err(Error::Parameter(_))), "r={r}");
        }
        assert!(matches!(
            walk_attack_p2(&rec.transcript, &mut o, RChoice::Auto, &mut rng),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn r_choice_parses() {
        assert_eq!("auto".parse::<RChoice>().unwrap(), RChoice::Auto);
        assert_eq!("7".parse::<RChoice>().unwrap(), RChoice::Fixed(7));
        assert!("x".parse::<RChoice>().is_err());
    }
}
