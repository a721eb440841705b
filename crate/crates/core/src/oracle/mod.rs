//! Black-box random functions and query accounting.
//!
//! Every cost reported by the laboratory is a number of calls to the
//! functions defined here. The functions are realized as a keyed PRF over
//! `(seed, tag, input)`, so a value is stable across repeated queries and
//! across threads without any table.
//!
//! Domain elements are 1-based: `f` accepts `x` in `1..=domain`.

mod ledger;
mod prf;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use ledger::{LedgerSnapshot, OracleFn, Party, QueryLedger, QueryMode};
pub use prf::{derive_u64, Prf};

/// Output width used when none is requested.
pub const DEFAULT_RANGE_BITS: u32 = 128;

/// Which protocol an oracle family (and everything built on it) belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    MerkleOriginal,
    Protocol1,
    Protocol2,
    LbnQuantum,
    LbnClassical,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::MerkleOriginal,
        Variant::Protocol1,
        Variant::Protocol2,
        Variant::LbnQuantum,
        Variant::LbnClassical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::MerkleOriginal => "merkle-original",
            Variant::Protocol1 => "protocol1",
            Variant::Protocol2 => "protocol2",
            Variant::LbnQuantum => "lbn-quantum",
            Variant::LbnClassical => "lbn-classical",
        }
    }

    /// Exponent `e` with `domain_f = N^e`.
    pub fn domain_exponent(self) -> u32 {
        match self {
            Variant::Protocol1 | Variant::LbnQuantum => 3,
            Variant::MerkleOriginal | Variant::Protocol2 | Variant::LbnClassical => 2,
        }
    }

    /// Variants whose second function is `t` rather than `g`.
    pub fn uses_t(self) -> bool {
        matches!(self, Variant::LbnQuantum | Variant::LbnClassical)
    }

    /// Variants in which a legitimate party runs a (charged) quantum search.
    pub fn has_quantum_party(self) -> bool {
        matches!(self, Variant::Protocol1 | Variant::LbnQuantum)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .or(match norm.as_str() {
                "merkle" | "original" => Some(Variant::MerkleOriginal),
                "p1" => Some(Variant::Protocol1),
                "p2" => Some(Variant::Protocol2),
                _ => None,
            })
            .ok_or_else(|| Error::Usage(format!("unknown variant '{s}'")))
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An element of the range of f, g or t (at most 128 bits).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RangeValue(pub u128);

impl std::ops::BitXor for RangeValue {
    type Output = RangeValue;

    fn bitxor(self, rhs: RangeValue) -> RangeValue {
        RangeValue(self.0 ^ rhs.0)
    }
}

impl fmt::Display for RangeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:032x}", self.0)
    }
}

impl Serialize for RangeValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RangeValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let hex = s.strip_prefix("0x").unwrap_or(&s);
        u128::from_str_radix(hex, 16)
            .map(RangeValue)
            .map_err(serde::de::Error::custom)
    }
}

/// Parses a seed given either in decimal or as `0x`-prefixed hex.
pub fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => s.replace('_', "").parse::<u64>(),
    };
    parsed.map_err(|e| Error::Usage(format!("invalid seed '{s}': {e}")))
}

const TAG_F: &[u8] = b"f";
const TAG_G: &[u8] = b"g";
const TAG_T: &[u8] = b"t";

/// The random functions f, g (or t) of one protocol instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleFamily {
    seed: u64,
    variant: Variant,
    n: u64,
    domain_f: u64,
    range_bits: u32,
    prf: Prf,
}

impl OracleFamily {
    pub fn new(seed: u64, variant: Variant, n: u64) -> Result<Self> {
        Self::with_range_bits(seed, variant, n, DEFAULT_RANGE_BITS)
    }

    /// Like [`OracleFamily::new`] with a narrower output; small widths are
    /// only useful for exercising the collision and degeneracy paths.
    pub fn with_range_bits(seed: u64, variant: Variant, n: u64, range_bits: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("N must be positive".into()));
        }
        if !(1..=128).contains(&range_bits) {
            return Err(Error::Parameter(format!(
                "range_bits must lie in 1..=128, got {range_bits}"
            )));
        }
        let domain_f = n.checked_pow(variant.domain_exponent()).ok_or_else(|| {
            Error::Size(format!(
                "N^{} overflows a 64-bit index for N = {n}",
                variant.domain_exponent()
            ))
        })?;
        Ok(Self {
            seed,
            variant,
            n,
            domain_f,
            range_bits,
            prf: Prf::new(seed),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn domain_f(&self) -> u64 {
        self.domain_f
    }

    pub fn range_bits(&self) -> u32 {
        self.range_bits
    }

    fn mask(&self, v: u128) -> RangeValue {
        if self.range_bits == 128 {
            RangeValue(v)
        } else {
            RangeValue(v & ((1u128 << self.range_bits) - 1))
        }
    }

    fn check_domain(&self, x: u64) -> Result<()> {
        if x == 0 || x > self.domain_f {
            return Err(Error::Domain(format!(
                "{x} is outside [1, {}]",
                self.domain_f
            )));
        }
        Ok(())
    }

    fn check_t(&self) -> Result<()> {
        if !self.variant.uses_t() {
            return Err(Error::Usage(format!(
                "t is only defined for the LBN variants, not {}",
                self.variant
            )));
        }
        Ok(())
    }

    /// Evaluates f and records one classical query for `party`.
    pub fn f(&self, ledger: &mut QueryLedger, party: Party, x: u64) -> Result<RangeValue> {
        let y = self.f_uncharged(x)?;
        ledger.record_classical(party, OracleFn::F);
        Ok(y)
    }

    pub fn g(&self, ledger: &mut QueryLedger, party: Party, x: u64, x2: u64) -> Result<RangeValue> {
        let w = self.g_uncharged(x, x2)?;
        ledger.record_classical(party, OracleFn::G);
        Ok(w)
    }

    pub fn t(&self, ledger: &mut QueryLedger, party: Party, x: u64) -> Result<RangeValue> {
        let v = self.t_uncharged(x)?;
        ledger.record_classical(party, OracleFn::T);
        Ok(v)
    }

    /// Evaluates f without touching any ledger.
    ///
    /// Only transparent simulations of quantum subroutines may use this;
    /// they account for their work with [`QueryLedger::charge`] instead.
    pub fn f_uncharged(&self, x: u64) -> Result<RangeValue> {
        self.check_domain(x)?;
        Ok(self.mask(self.prf.eval(TAG_F, &[x])))
    }

    pub fn g_uncharged(&self, x: u64, x2: u64) -> Result<RangeValue> {
        self.check_domain(x)?;
        self.check_domain(x2)?;
        Ok(self.mask(self.prf.eval(TAG_G, &[x, x2])))
    }

    pub fn t_uncharged(&self, x: u64) -> Result<RangeValue> {
        self.check_t()?;
        self.check_domain(x)?;
        Ok(self.mask(self.prf.eval(TAG_T, &[x])))
    }

    /// Scans the whole domain of f and fails on the first collision.
    pub fn check_f_injective(&self) -> Result<()> {
        const MAX_SCAN: u64 = 1 << 26;
        if self.domain_f > MAX_SCAN {
            return Err(Error::Size(format!(
                "refusing to scan a domain of {} points",
                self.domain_f
            )));
        }
        let mut seen: HashMap<RangeValue, u64> = HashMap::with_capacity(self.domain_f as usize);
        for x in 1..=self.domain_f {
            let y = self.f_uncharged(x)?;
            if let Some(prev) = seen.insert(y, x) {
                return Err(Error::Collision(format!("f({prev}) = f({x}) = {y}")));
            }
        }
        Ok(())
    }

    /// Samples `samples` quadruples with at least three distinct elements and
    /// checks that the XOR of their t-values is never zero.
    pub fn check_xor_condition<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<()> {
        self.check_t()?;
        if self.domain_f < 3 {
            return Err(Error::Parameter(
                "t needs at least three domain points".into(),
            ));
        }
        let mut done = 0;
        while done < samples {
            let q: [u64; 4] = std::array::from_fn(|_| rng.random_range(1..=self.domain_f));
            let mut distinct = q.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() < 3 {
                continue;
            }
            let mut acc = RangeValue(0);
            for &x in &q {
                acc = acc ^ self.t_uncharged(x)?;
            }
            if acc.0 == 0 {
                return Err(Error::Degeneracy(format!(
                    "t({})^t({})^t({})^t({}) = 0",
                    q[0], q[1], q[2], q[3]
                )));
            }
            done += 1;
        }
        Ok(())
    }
}
