//! Eavesdroppers. Every attack sees a [`Transcript`] and an
//! [`EavesdropOracle`] and nothing else; in particular no session record.

mod merkle;
mod walk;

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{OracleFamily, OracleFn, Party, QueryLedger, QueryMode, RangeValue, Variant};
use crate::protocols::{KeyPair, Transcript};
use crate::walkmodel::Charge;

pub use merkle::{classical_invert, grover_invert_charged};
pub use walk::{walk_attack, walk_attack_lbn, walk_attack_p1, walk_attack_p2, RChoice};

/// Oracle access granted to an eavesdropper.
///
/// Counted methods go into Eve's ledger. The `hidden_*` methods exist for
/// the transparent simulation of quantum subroutines: they cost nothing and
/// must always be paired with a [`EavesdropOracle::charge`] of the price the
/// quantum subroutine would pay.
pub trait EavesdropOracle {
    fn variant(&self) -> Variant;
    fn n(&self) -> u64;
    fn domain_f(&self) -> u64;

    fn f(&mut self, x: u64) -> Result<RangeValue>;
    fn g(&mut self, x: u64, x2: u64) -> Result<RangeValue>;
    fn t(&mut self, x: u64) -> Result<RangeValue>;

    fn charge(&mut self, func: OracleFn, amount: u64);
    fn ledger(&self) -> &QueryLedger;

    /// A domain point mapping to each target under f.
    fn hidden_preimages(&mut self, targets: &[RangeValue]) -> Result<Vec<u64>>;
    fn hidden_g(&self, x: u64, x2: u64) -> Result<RangeValue>;
    fn hidden_t(&self, x: u64) -> Result<RangeValue>;
}

/// Eavesdropper access to a real oracle family.
pub struct FamilyOracle<'a> {
    fam: &'a OracleFamily,
    ledger: QueryLedger,
    preimages: HashMap<RangeValue, u64>,
    scanned_for: Vec<RangeValue>,
}

impl<'a> FamilyOracle<'a> {
    pub fn new(fam: &'a OracleFamily) -> Self {
        Self {
            fam,
            ledger: QueryLedger::new(),
            preimages: HashMap::new(),
            scanned_for: Vec::new(),
        }
    }
}

impl EavesdropOracle for FamilyOracle<'_> {
    fn variant(&self) -> Variant {
        self.fam.variant()
    }

    fn n(&self) -> u64 {
        self.fam.n()
    }

    fn domain_f(&self) -> u64 {
        self.fam.domain_f()
    }

    fn f(&mut self, x: u64) -> Result<RangeValue> {
        self.fam.f(&mut self.ledger, Party::Eve, x)
    }

    fn g(&mut self, x: u64, x2: u64) -> Result<RangeValue> {
        self.fam.g(&mut self.ledger, Party::Eve, x, x2)
    }

    fn t(&mut self, x: u64) -> Result<RangeValue> {
        self.fam.t(&mut self.ledger, Party::Eve, x)
    }

    fn charge(&mut self, func: OracleFn, amount: u64) {
        self.ledger.charge(Party::Eve, func, amount);
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    fn hidden_preimages(&mut self, targets: &[RangeValue]) -> Result<Vec<u64>> {
        if targets.iter().any(|y| !self.preimages.contains_key(y)) {
            // One domain scan covers every target seen so far.
            self.scanned_for.extend_from_slice(targets);
            let wanted: std::collections::HashSet<RangeValue> =
                self.scanned_for.iter().copied().collect();
            for x in 1..=self.fam.domain_f() {
                let y = self.fam.f_uncharged(x)?;
                if wanted.contains(&y) {
                    if let Some(prev) = self.preimages.insert(y, x) {
                        if prev != x {
                            return Err(Error::Collision(format!("f({prev}) = f({x})")));
                        }
                    }
                }
            }
        }
        targets
            .iter()
            .map(|y| {
                self.preimages
                    .get(y)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("{y} has no preimage under f")))
            })
            .collect()
    }

    fn hidden_g(&self, x: u64, x2: u64) -> Result<RangeValue> {
        self.fam.g_uncharged(x, x2)
    }

    fn hidden_t(&self, x: u64) -> Result<RangeValue> {
        self.fam.t_uncharged(x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: u64,
    pub recovered_key: Option<KeyPair>,
    /// Whether the recovered key matched the session key; until
    /// [`AttackReport::score`] runs, whether it verified against the transcript.
    pub success: bool,
    pub eve_ledger: QueryLedger,
    pub charged_total_f: u64,
    pub charged_total_g: u64,
    pub charged_total_t: u64,
    pub r_used: Option<u64>,
    /// Closed-form walk charge for `r_used`.
    pub analytic: Option<Charge>,
    /// Everything Eve spent, classical plus charged.
    pub executed: Charge,
}

impl AttackReport {
    pub(crate) fn new(
        variant: Variant,
        n: u64,
        recovered_key: Option<KeyPair>,
        verified: bool,
        ledger: &QueryLedger,
        r_used: Option<u64>,
        analytic: Option<Charge>,
    ) -> Self {
        let charged = |f| ledger.get(Party::Eve, f, QueryMode::ChargedQuantum);
        Self {
            variant,
            n,
            recovered_key,
            success: verified,
            eve_ledger: ledger.clone(),
            charged_total_f: charged(OracleFn::F),
            charged_total_g: charged(OracleFn::G),
            charged_total_t: charged(OracleFn::T),
            r_used,
            analytic,
            executed: Charge {
                f: ledger.function_total(Party::Eve, OracleFn::F),
                g: ledger.function_total(Party::Eve, OracleFn::G),
                t: ledger.function_total(Party::Eve, OracleFn::T),
            },
        }
    }

    /// Sets `success` by comparison with the real session key.
    pub fn score(&mut self, session_key: KeyPair) {
        self.success = self.recovered_key == Some(session_key);
    }
}

/// Checks a candidate key against the transcript without counting queries:
/// both components encrypt into Y, and they reproduce w.
pub(crate) fn verify_key<O: EavesdropOracle + ?Sized>(
    oracle: &mut O,
    transcript: &Transcript,
    key: KeyPair,
) -> Result<bool> {
    let pre = oracle.hidden_preimages(&transcript.y)?;
    if !pre.contains(&key.0) || !pre.contains(&key.1) {
        return Ok(false);
    }
    Ok(match transcript.variant {
        Variant::MerkleOriginal => {
            key.0 == key.1 && oracle.hidden_preimages(&[transcript.w])?[0] == key.0
        }
        Variant::Protocol1 | Variant::Protocol2 => oracle.hidden_g(key.0, key.1)? == transcript.w,
        Variant::LbnQuantum | Variant::LbnClassical => {
            oracle.hidden_t(key.0)? ^ oracle.hidden_t(key.1)? == transcript.w
        }
    })
}

/// Which eavesdropper to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    Classical,
    Grover,
    Walk,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(AttackKind::Classical),
            "grover" => Ok(AttackKind::Grover),
            "walk" => Ok(AttackKind::Walk),
            other => Err(Error::Usage(format!("unknown attack {other:?}"))),
        }
    }
}

impl AttackKind {
    pub fn default_for(variant: Variant) -> Self {
        match variant {
            Variant::MerkleOriginal => AttackKind::Classical,
            _ => AttackKind::Walk,
        }
    }
}

/// Runs `kind` against a transcript.
pub fn run_attack<O: EavesdropOracle, R: rand::Rng + ?Sized>(
    kind: AttackKind,
    transcript: &Transcript,
    oracle: &mut O,
    r: RChoice,
    rng: &mut R,
) -> Result<AttackReport> {
    match kind {
        AttackKind::Classical => classical_invert(transcript, oracle, rng),
        AttackKind::Grover => grover_invert_charged(transcript, oracle),
        AttackKind::Walk => walk_attack(transcript, oracle, r, rng),
    }
}
