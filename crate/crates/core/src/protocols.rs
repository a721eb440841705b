//! End-to-end runs of the key-establishment protocols.
//!
//! Quantum subroutines of the legitimate parties are simulated
//! transparently: the simulator uses the hidden state of the run to produce
//! the correct result and charges the query price a bounded-error search
//! would pay (see [`crate::qsim::charged_search_price`]). Everything else is
//! executed literally against the oracle family.

use std::collections::HashMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::oracle::{derive_u64, OracleFamily, OracleFn, Party, QueryLedger, RangeValue, Variant};
use crate::qsim::charged_search_price;

/// A shared key: an ordered pair of domain points.
///
/// In the original Merkle scheme the pair degenerates to `(x, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyPair(pub u64, pub u64);

impl KeyPair {
    /// The pair with its components sorted, for unordered comparisons.
    pub fn unordered(self) -> (u64, u64) {
        (self.0.min(self.1), self.0.max(self.1))
    }
}

/// Everything the eavesdropper sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub variant: Variant,
    /// Alice's encrypted keywords, in the order she sent them.
    pub y: Vec<RangeValue>,
    /// Protocol 2 only: the √N values Bob returns, ascending.
    pub y_prime: Option<Vec<RangeValue>>,
    /// Bob's reply (for the original scheme, the matched encryption).
    pub w: RangeValue,
}

impl Transcript {
    /// Position of `value` in Alice's list.
    pub fn position(&self, value: RangeValue) -> Option<usize> {
        self.y.iter().position(|&y| y == value)
    }

    /// Map from value to position in Alice's list.
    pub fn position_index(&self) -> HashMap<RangeValue, usize> {
        self.y.iter().enumerate().map(|(i, &y)| (y, i)).collect()
    }

    /// Hex SHA-256 over the canonical byte encoding of the transcript.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.variant.name().as_bytes());
        h.update((self.y.len() as u64).to_le_bytes());
        for y in &self.y {
            h.update(y.0.to_le_bytes());
        }
        match &self.y_prime {
            Some(yp) => {
                h.update([1u8]);
                h.update((yp.len() as u64).to_le_bytes());
                for y in yp {
                    h.update(y.0.to_le_bytes());
                }
            }
            None => h.update([0u8]),
        }
        h.update(self.w.0.to_le_bytes());
        hex::encode(h.finalize())
    }
}

/// A complete protocol run.
#[derive(Clone, Debug)]
pub struct SessionRecord {
    pub variant: Variant,
    pub n: u64,
    pub seed: u64,
    pub transcript: Transcript,
    pub alice_key: KeyPair,
    pub bob_key: KeyPair,
    pub agreed: bool,
    pub ledger: QueryLedger,
}

impl SessionRecord {
    /// The JSON line emitted by the `run` command.
    pub fn to_json(&self, full_transcript: bool) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "variant": self.variant,
            "N": self.n,
            "seed": self.seed,
            "ledger": self.ledger,
            "agreed": self.agreed,
            "transcript_digest": self.transcript.digest(),
        });
        if full_transcript {
            obj["transcript"] =
                serde_json::to_value(&self.transcript).expect("transcript serializes");
        }
        obj
    }

    /// Classical plus charged queries of Alice and Bob together.
    pub fn legitimate_total(&self) -> u64 {
        self.ledger.party_total(Party::Alice) + self.ledger.party_total(Party::Bob)
    }
}

/// Alice's private state after step 1.
struct AliceList {
    xs: Vec<u64>,
    ys: Vec<RangeValue>,
    by_value: HashMap<RangeValue, usize>,
}

fn session_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_u64(b"session-rng", &[seed]))
}

/// Alice picks N distinct points of the domain and encrypts them with f.
fn alice_publishes(
    fam: &OracleFamily,
    ledger: &mut QueryLedger,
    rng: &mut ChaCha8Rng,
) -> Result<AliceList> {
    let n = fam.n() as usize;
    let domain = usize::try_from(fam.domain_f())
        .map_err(|_| Error::Size("domain does not fit in usize".into()))?;
    let xs: Vec<u64> = index::sample(rng, domain, n)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    let mut ys = Vec::with_capacity(n);
    let mut by_value = HashMap::with_capacity(n);
    for (i, &x) in xs.iter().enumerate() {
        let y = fam.f(ledger, Party::Alice, x)?;
        if by_value.insert(y, i).is_some() {
            return Err(Error::Collision(format!(
                "two of Alice's points encrypt to {y}"
            )));
        }
        ys.push(y);
    }
    Ok(AliceList { xs, ys, by_value })
}

/// Step 1 of every variant on its own: Alice's hidden points and the list Y
/// she publishes, exactly as a full run with the same seed produces them.
pub fn alice_step(fam: &OracleFamily, seed: u64) -> Result<(Vec<u64>, Vec<RangeValue>)> {
    let mut rng = session_rng(seed);
    let mut ledger = QueryLedger::new();
    let alice = alice_publishes(fam, &mut ledger, &mut rng)?;
    Ok((alice.xs, alice.ys))
}

/// Bob samples uniform domain points until one encrypts into Y at a
/// position other than `avoid`. Returns the point and its position.
fn bob_classical_search(
    fam: &OracleFamily,
    ledger: &mut QueryLedger,
    rng: &mut ChaCha8Rng,
    alice: &AliceList,
    avoid: Option<usize>,
) -> Result<(u64, usize)> {
    loop {
        let x = rng.random_range(1..=fam.domain_f());
        let y = fam.f(ledger, Party::Bob, x)?;
        if let Some(&pos) = alice.by_value.get(&y) {
            if Some(pos) == avoid {
                continue;
            }
            if alice.xs[pos] != x {
                return Err(Error::Collision(format!(
                    "f({x}) = f({}) = {y}",
                    alice.xs[pos]
                )));
            }
            return Ok((x, pos));
        }
    }
}

/// Bob's two BBHT searches over φ(x) = [f(x) ∈ Y], simulated transparently.
///
/// Returns the two positions ordered by position in Y.
fn bob_quantum_searches(
    fam: &OracleFamily,
    ledger: &mut QueryLedger,
    rng: &mut ChaCha8Rng,
) -> (usize, usize) {
    let n = fam.n();
    let price = charged_search_price(fam.domain_f() as f64, n as f64);
    let first = rng.random_range(0..n as usize);
    ledger.charge(Party::Bob, OracleFn::F, price);
    // The modified φ of the second search excludes x: rejection-resample.
    let second = loop {
        let j = rng.random_range(0..n as usize);
        if j != first {
            break j;
        }
    };
    ledger.charge(Party::Bob, OracleFn::F, price);
    (first.min(second), first.max(second))
}

/// Rejects N outside the domain of `variant`.
pub fn check_n(variant: Variant, n: u64) -> Result<()> {
    match variant {
        Variant::Protocol2 => {
            let root = n.isqrt();
            if n < 4 || root * root != n {
                return Err(Error::Parameter(format!(
                    "protocol2 needs N to be a perfect square >= 4, got {n}"
                )));
            }
        }
        _ => {
            if n < 2 {
                return Err(Error::Parameter(format!("{variant} needs N >= 2, got {n}")));
            }
        }
    }
    Ok(())
}

/// Merkle's original scheme, one-sided: Alice publishes N encryptions and
/// Bob probes random domain points until one matches.
pub fn run_merkle_original(n: u64, seed: u64) -> Result<SessionRecord> {
    check_n(Variant::MerkleOriginal, n)?;
    let fam = OracleFamily::new(seed, Variant::MerkleOriginal, n)?;
    let mut rng = session_rng(seed);
    let mut ledger = QueryLedger::new();
    let alice = alice_publishes(&fam, &mut ledger, &mut rng)?;
    let (x, _) = bob_classical_search(&fam, &mut ledger, &mut rng, &alice, None)?;
    let w = fam.f_uncharged(x)?;
    let pos = alice.by_value[&w];
    let alice_key = KeyPair(alice.xs[pos], alice.xs[pos]);
    let bob_key = KeyPair(x, x);
    Ok(SessionRecord {
        variant: Variant::MerkleOriginal,
        n,
        seed,
        transcript: Transcript {
            variant: Variant::MerkleOriginal,
            y: alice.ys,
            y_prime: None,
            w,
        },
        alice_key,
        bob_key,
        agreed: alice_key == bob_key,
        ledger,
    })
}

/// Protocol with a quantum Bob and a quantum Alice over a domain of N³.
pub fn run_protocol1(n: u64, seed: u64) -> Result<SessionRecord> {
    check_n(Variant::Protocol1, n)?;
    let fam = OracleFamily::new(seed, Variant::Protocol1, n)?;
    let mut rng = session_rng(seed);
    let mut ledger = QueryLedger::new();
    let alice = alice_publishes(&fam, &mut ledger, &mut rng)?;

    let (i, j) = bob_quantum_searches(&fam, &mut ledger, &mut rng);
    let bob_key = KeyPair(alice.xs[i], alice.xs[j]);
    let w = fam.g(&mut ledger, Party::Bob, bob_key.0, bob_key.1)?;

    // Alice's Grover search over X × X for the pair mapping to w.
    ledger.charge(
        Party::Alice,
        OracleFn::G,
        charged_search_price((n * n) as f64, 1.0),
    );
    let alice_key = KeyPair(alice.xs[i], alice.xs[j]);
    if fam.g_uncharged(alice_key.0, alice_key.1)? != w {
        return Err(Error::Degeneracy(
            "transparent search returned a non-matching pair".into(),
        ));
    }

    Ok(SessionRecord {
        variant: Variant::Protocol1,
        n,
        seed,
        transcript: Transcript {
            variant: Variant::Protocol1,
            y: alice.ys,
            y_prime: None,
            w,
        },
        alice_key,
        bob_key,
        agreed: alice_key == bob_key,
        ledger,
    })
}

/// Fully classical protocol over a domain of N², with Bob revealing the
/// subset Y′ of √N values that contains his two encryptions.
pub fn run_protocol2(n: u64, seed: u64) -> Result<SessionRecord> {
    check_n(Variant::Protocol2, n)?;
    let fam = OracleFamily::new(seed, Variant::Protocol2, n)?;
    let mut rng = session_rng(seed);
    let mut ledger = QueryLedger::new();
    let alice = alice_publishes(&fam, &mut ledger, &mut rng)?;

    let (x1, p1) = bob_classical_search(&fam, &mut ledger, &mut rng, &alice, None)?;
    let (x2, p2) = bob_classical_search(&fam, &mut ledger, &mut rng, &alice, Some(p1))?;
    let bob_key = if p1 < p2 {
        KeyPair(x1, x2)
    } else {
        KeyPair(x2, x1)
    };
    let w = fam.g(&mut ledger, Party::Bob, bob_key.0, bob_key.1)?;

    let root = n.isqrt() as usize;
    let others: Vec<usize> = (0..n as usize).filter(|&p| p != p1 && p != p2).collect();
    let mut y_prime: Vec<RangeValue> = index::sample(&mut rng, others.len(), root - 2)
        .into_iter()
        .map(|k| alice.ys[others[k]])
        .chain([alice.ys[p1], alice.ys[p2]])
        .collect();
    y_prime.sort_unstable();

    // Alice knows the preimages of Y′ and tries pairs until g matches.
    let x_prime: Vec<u64> = y_prime
        .iter()
        .map(|y| alice.xs[alice.by_value[y]])
        .collect();
    let mut alice_key = None;
    'search: for &a in &x_prime {
        for &b in &x_prime {
            if a == b {
                continue;
            }
            if fam.g(&mut ledger, Party::Alice, a, b)? == w {
                alice_key = Some(KeyPair(a, b));
                break 'search;
            }
        }
    }
    let alice_key =
        alice_key.ok_or_else(|| Error::Degeneracy("no pair of X' maps to w under g".into()))?;

    Ok(SessionRecord {
        variant: Variant::Protocol2,
        n,
        seed,
        transcript: Transcript {
            variant: Variant::Protocol2,
            y: alice.ys,
            y_prime: Some(y_prime),
            w,
        },
        alice_key,
        bob_key,
        agreed: alice_key == bob_key,
        ledger,
    })
}

/// Alice recovers Bob's ordered pair from w = t(x) ⊕ t(x′) with exactly N
/// queries to t and a hash lookup per element.
fn alice_xor_recovery(
    fam: &OracleFamily,
    ledger: &mut QueryLedger,
    alice: &AliceList,
    w: RangeValue,
) -> Result<KeyPair> {
    let mut by_t: HashMap<RangeValue, usize> = HashMap::with_capacity(alice.xs.len());
    let mut ts = Vec::with_capacity(alice.xs.len());
    for (i, &x) in alice.xs.iter().enumerate() {
        let v = fam.t(ledger, Party::Alice, x)?;
        if by_t.insert(v, i).is_some() {
            return Err(Error::Degeneracy(format!("t collision on value {v}")));
        }
        ts.push(v);
    }
    let mut found = None;
    for (i, &ti) in ts.iter().enumerate() {
        if let Some(&j) = by_t.get(&(ti ^ w)) {
            if i < j {
                if found.is_some() {
                    return Err(Error::Degeneracy("several pairs XOR to w".into()));
                }
                found = Some(KeyPair(alice.xs[i], alice.xs[j]));
            }
        }
    }
    found.ok_or_else(|| Error::Degeneracy("no pair XORs to w".into()))
}

fn run_lbn(variant: Variant, n: u64, seed: u64) -> Result<SessionRecord> {
    check_n(variant, n)?;
    let fam = OracleFamily::new(seed, variant, n)?;
    let mut rng = session_rng(seed);
    let mut ledger = QueryLedger::new();
    let alice = alice_publishes(&fam, &mut ledger, &mut rng)?;

    let (i, j) = match variant {
        Variant::LbnQuantum => bob_quantum_searches(&fam, &mut ledger, &mut rng),
        _ => {
            let (_, p1) = bob_classical_search(&fam, &mut ledger, &mut rng, &alice, None)?;
            let (_, p2) = bob_classical_search(&fam, &mut ledger, &mut rng, &alice, Some(p1))?;
            (p1.min(p2), p1.max(p2))
        }
    };
    // Ordered so that f(x) precedes f(x') in Y.
    let bob_key = KeyPair(alice.xs[i], alice.xs[j]);
    let w =
        fam.t(&mut ledger, Party::Bob, bob_key.0)? ^ fam.t(&mut ledger, Party::Bob, bob_key.1)?;

    let alice_key = alice_xor_recovery(&fam, &mut ledger, &alice, w)?;
    Ok(SessionRecord {
        variant,
        n,
        seed,
        transcript: Transcript {
            variant,
            y: alice.ys,
            y_prime: None,
            w,
        },
        alice_key,
        bob_key,
        agreed: alice_key == bob_key,
        ledger,
    })
}

/// XOR variant with a quantum Bob: steps 1, 2 and 5 as in Protocol 1.
pub fn run_lbn_quantum(n: u64, seed: u64) -> Result<SessionRecord> {
    run_lbn(Variant::LbnQuantum, n, seed)
}

/// Fully classical XOR variant over a domain of N²; no Y′ is sent.
pub fn run_lbn_classical(n: u64, seed: u64) -> Result<SessionRecord> {
    run_lbn(Variant::LbnClassical, n, seed)
}

pub fn run_session(variant: Variant, n: u64, seed: u64) -> Result<SessionRecord> {
    match variant {
        Variant::MerkleOriginal => run_merkle_original(n, seed),
        Variant::Protocol1 => run_protocol1(n, seed),
        Variant::Protocol2 => run_protocol2(n, seed),
        Variant::LbnQuantum => run_lbn_quantum(n, seed),
        Variant::LbnClassical => run_lbn_classical(n, seed),
    }
}

/// Runs a session, moving to a derived seed whenever the oracle turns out
/// to be degenerate. The returned record carries the seed actually used.
pub fn run_session_resampling(
    variant: Variant,
    n: u64,
    seed: u64,
    max_attempts: u32,
) -> Result<SessionRecord> {
    let mut current = seed;
    let mut last_err = None;
    for attempt in 0..max_attempts.max(1) {
        match run_session(variant, n, current) {
            Ok(rec) => return Ok(rec),
            Err(e) if e.is_resampleable() => {
                last_err = Some(e);
                current = derive_u64(b"resample", &[seed, attempt as u64]);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt was made"))
}
