use std::collections::HashMap;

use rand::Rng;

use super::{verify_key, AttackReport, EavesdropOracle};
use crate::error::{Error, Result};
use crate::oracle::{OracleFn, Variant};
use crate::protocols::{KeyPair, Transcript};
use crate::qsim::charged_search_price;

fn require_merkle(transcript: &Transcript) -> Result<()> {
    if transcript.variant != Variant::MerkleOriginal {
        return Err(Error::Usage(format!(
            "inversion attacks target merkle-original, not {}",
            transcript.variant
        )));
    }
    Ok(())
}

/// Scans the domain in uniformly random order until f hits the matched
/// encryption. The permutation is drawn lazily, one swap per probe.
pub fn classical_invert<O: EavesdropOracle + ?Sized, R: Rng + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
    rng: &mut R,
) -> Result<AttackReport> {
    require_merkle(transcript)?;
    let domain = oracle.domain_f();
    let mut swapped: HashMap<u64, u64> = HashMap::new();
    let mut found = None;
    for i in 0..domain {
        let j = rng.random_range(i..domain);
        let at_j = swapped.get(&j).copied().unwrap_or(j);
        let at_i = swapped.get(&i).copied().unwrap_or(i);
        swapped.insert(j, at_i);
        let x = at_j + 1;
        if oracle.f(x)? == transcript.w {
            found = Some(KeyPair(x, x));
            break;
        }
    }
    finish(transcript, oracle, found)
}

/// Grover inversion of the matched encryption over the whole domain,
/// simulated transparently with a charge of ceil(π/4·√(N²)).
pub fn grover_invert_charged<O: EavesdropOracle + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
) -> Result<AttackReport> {
    require_merkle(transcript)?;
    oracle.charge(
        OracleFn::F,
        charged_search_price(oracle.domain_f() as f64, 1.0),
    );
    let x = oracle.hidden_preimages(&[transcript.w])?[0];
    finish(transcript, oracle, Some(KeyPair(x, x)))
}

fn finish<O: EavesdropOracle + ?Sized>(
    transcript: &Transcript,
    oracle: &mut O,
    key: Option<KeyPair>,
) -> Result<AttackReport> {
    let verified = match key {
        Some(k) => verify_key(oracle, transcript, k)?,
        None => false,
    };
    Ok(AttackReport::new(
        transcript.variant,
        oracle.n(),
        key,
        verified,
        oracle.ledger(),
        None,
        None,
    ))
}
