use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

/// The black-box functions whose calls are counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleFn {
    F,
    G,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// A query that was actually evaluated.
    Classical,
    /// The price of a quantum subroutine whose result was produced transparently.
    ChargedQuantum,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Alice, Party::Bob, Party::Eve];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Eve => "eve",
        }
    }
}

impl OracleFn {
    pub const ALL: [OracleFn; 3] = [OracleFn::F, OracleFn::G, OracleFn::T];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OracleFn::F => "f",
            OracleFn::G => "g",
            OracleFn::T => "t",
        }
    }
}

impl QueryMode {
    pub const ALL: [QueryMode; 2] = [QueryMode::Classical, QueryMode::ChargedQuantum];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            QueryMode::Classical => "classical",
            QueryMode::ChargedQuantum => "charged_quantum",
        }
    }
}

/// Per-run query counters, keyed by (party, function, mode).
///
/// Counters only grow. Classical counters are bumped by the oracle on every
/// evaluation; charged counters only through [`QueryLedger::charge`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryLedger {
    counts: [[[u64; 2]; 3]; 3],
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record_classical(&mut self, party: Party, func: OracleFn) {
        self.counts[party.index()][func.index()][QueryMode::Classical.index()] += 1;
    }

    /// Adds the price of a transparently simulated quantum subroutine.
    pub fn charge(&mut self, party: Party, func: OracleFn, amount: u64) {
        self.counts[party.index()][func.index()][QueryMode::ChargedQuantum.index()] += amount;
    }

    pub fn get(&self, party: Party, func: OracleFn, mode: QueryMode) -> u64 {
        self.counts[party.index()][func.index()][mode.index()]
    }

    /// Classical plus charged queries to one function.
    pub fn function_total(&self, party: Party, func: OracleFn) -> u64 {
        QueryMode::ALL
            .iter()
            .map(|&m| self.get(party, func, m))
            .sum()
    }

    pub fn party_total(&self, party: Party) -> u64 {
        OracleFn::ALL
            .iter()
            .map(|&f| self.function_total(party, f))
            .sum()
    }

    pub fn mode_total(&self, party: Party, mode: QueryMode) -> u64 {
        OracleFn::ALL
            .iter()
            .map(|&f| self.get(party, f, mode))
            .sum()
    }

    /// Adds every counter of `other` into `self`.
    pub fn absorb(&mut self, other: &QueryLedger) {
        for p in 0..3 {
            for f in 0..3 {
                for m in 0..2 {
                    self.counts[p][f][m] += other.counts[p][f][m];
                }
            }
        }
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let mut totals = BTreeMap::new();
        for party in Party::ALL {
            for func in OracleFn::ALL {
                for mode in QueryMode::ALL {
                    totals.insert(
                        format!("{}.{}.{}", party.name(), func.name(), mode.name()),
                        self.get(party, func, mode),
                    );
                }
            }
        }
        LedgerSnapshot(totals)
    }
}

/// Immutable totals, serialized as a flat object keyed `"party.function.mode"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LedgerSnapshot(BTreeMap<String, u64>);

impl LedgerSnapshot {
    pub fn get(&self, party: Party, func: OracleFn, mode: QueryMode) -> u64 {
        self.0
            .get(&format!("{}.{}.{}", party.name(), func.name(), mode.name()))
            .copied()
            .unwrap_or(0)
    }

    pub fn entries(&self) -> &BTreeMap<String, u64> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|&v| v == 0)
    }
}

impl Serialize for QueryLedger {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.snapshot().serialize(s)
    }
}

impl fmt::Display for LedgerSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<String> = self
            .0
            .iter()
            .filter(|(_, &v)| v > 0)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        write!(f, "{}", nonzero.join(" "))
    }
}
