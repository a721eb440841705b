//! Executable versions of the reductions from the flat search problem on
//! h′ to key recovery: an eavesdropper is handed a fake transcript and f, g
//! oracles that answer from h′, and whatever key it returns is the
//! collision of h′.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attacks::EavesdropOracle;
use crate::error::{Error, Result};
use crate::oracle::{derive_u64, OracleFn, Party, Prf, QueryLedger, RangeValue, Variant};
use crate::protocols::{KeyPair, Transcript};

/// A planted instance of the flat search problem: h′(a) = (0, 0) except on
/// the planted points w_i, where h′(w_i) = (i, c(i)), and c has exactly one
/// collision.
#[derive(Clone, Debug, Serialize)]
pub struct SearchInstance {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: u64,
    pub seed: u64,
    pub domain: u64,
    /// w_i for i = 1..=buckets, stored at index i − 1.
    pub points: Vec<u64>,
    /// c(i) at index i − 1, values in 1..=buckets.
    pub c: Vec<u64>,
    /// The two domain points whose second coordinates collide, ascending.
    pub collision_pair: (u64, u64),
    #[serde(skip)]
    lookup: HashMap<u64, (u64, u64)>,
}

/// Where planted points may land.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Planting {
    Uniform,
    /// Negative control: only the first half of the domain.
    FirstHalf,
}

impl SearchInstance {
    pub fn buckets(&self) -> usize {
        self.points.len()
    }

    pub fn h_prime(&self, a: u64) -> (u64, u64) {
        self.lookup.get(&a).copied().unwrap_or((0, 0))
    }
}

pub fn plant_instance(n: u64, seed: u64, variant: Variant) -> Result<SearchInstance> {
    plant_instance_with(n, seed, variant, Planting::Uniform)
}

pub fn plant_instance_with(
    n: u64,
    seed: u64,
    variant: Variant,
    planting: Planting,
) -> Result<SearchInstance> {
    let (buckets, domain) = match variant {
        Variant::Protocol1 => {
            if n < 4 {
                return Err(Error::Parameter(format!("need N >= 4, got {n}")));
            }
            let d = n
                .checked_pow(3)
                .ok_or_else(|| Error::Size(format!("N^3 overflows for N={n}")))?;
            (n, d)
        }
        Variant::Protocol2 => {
            let root = n.isqrt();
            if n < 16 || root * root != n {
                return Err(Error::Parameter(format!(
                    "need a perfect square N >= 16, got {n}"
                )));
            }
            (root, n * n)
        }
        other => return Err(Error::Usage(format!("no reduction for {other}"))),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"plant", &[seed]));
    let range = match planting {
        Planting::Uniform => domain,
        Planting::FirstHalf => domain / 2,
    };
    let points: Vec<u64> = index::sample(&mut rng, range as usize, buckets as usize)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();

    // An injective c, then one forced collision between two random indices.
    let mut c: Vec<u64> = (1..=buckets).collect();
    c.shuffle(&mut rng);
    let pair = index::sample(&mut rng, buckets as usize, 2).into_vec();
    let (i, j) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
    c[j] = c[i];

    let lookup = points
        .iter()
        .zip(&c)
        .enumerate()
        .map(|(k, (&w, &ck))| (w, (k as u64 + 1, ck)))
        .collect();
    let (a, b) = (points[i], points[j]);
    Ok(SearchInstance {
        variant,
        n,
        seed,
        domain,
        points,
        c,
        collision_pair: (a.min(b), a.max(b)),
        lookup,
    })
}

/// f and g answered from h′ per the case analysis of the reduction.
///
/// Every counted f-query costs one h′ lookup and every counted g-query two;
/// charged quantum queries translate at the same rates.
pub struct SimulatedOracles<'a> {
    instance: &'a SearchInstance,
    prf: Prf,
    /// y_{π₁} by π₁ − 1: Y for Protocol 1, Y′ before sorting for Protocol 2.
    labelled: Vec<RangeValue>,
    w: RangeValue,
    s: bool,
    /// Decoy domain points behind Y \ Y′ (Protocol 2 only), by f̂ value.
    decoys: HashMap<RangeValue, u64>,
    transcript: Transcript,
    ledger: QueryLedger,
    lookups: u64,
}

const TAG_FHAT: &[u8] = b"fhat";
const TAG_GHAT: &[u8] = b"ghat";

/// Retries [`reduction_oracles`] with fresh derived seeds while it reports a
/// resampleable failure; the instance itself is kept.
pub fn reduction_oracles_resampling(
    instance: &SearchInstance,
    seed: u64,
    max_attempts: u64,
) -> Result<SimulatedOracles<'_>> {
    let mut last = Error::Parameter("max_attempts must be positive".into());
    for attempt in 0..max_attempts {
        let s = if attempt == 0 {
            seed
        } else {
            derive_u64(b"resample", &[seed, attempt])
        };
        match reduction_oracles(instance, s) {
            Err(e) if e.is_resampleable() => last = e,
            other => return other,
        }
    }
    Err(last)
}

/// Builds the fake transcript and the simulated oracles.
pub fn reduction_oracles(instance: &SearchInstance, seed: u64) -> Result<SimulatedOracles<'_>> {
    let prf = Prf::new(derive_u64(b"reduction", &[seed]));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(b"reduction-rng", &[seed]));
    let buckets = instance.buckets() as u64;
    let labelled: Vec<RangeValue> = (1..=buckets)
        .map(|i| RangeValue(prf.eval(b"y", &[i])))
        .collect();
    let w = RangeValue(prf.eval(b"w", &[]));
    let s = prf.eval(b"s", &[]) & 1 == 1;

    let mut decoys = HashMap::new();
    let transcript = match instance.variant {
        Variant::Protocol1 => Transcript {
            variant: Variant::Protocol1,
            y: labelled.clone(),
            y_prime: None,
            w,
        },
        _ => {
            let n = instance.n;
            let extra = (n - buckets) as usize;
            for k in index::sample(&mut rng, instance.domain as usize, extra) {
                let d = k as u64 + 1;
                // Points behind Y \ Y′ must be unplanted for f to reach them.
                if instance.h_prime(d) != (0, 0) {
                    return Err(Error::Degeneracy(format!("decoy {d} is a planted point")));
                }
                decoys.insert(RangeValue(prf.eval(TAG_FHAT, &[d])), d);
            }
            let mut y: Vec<RangeValue> = labelled
                .iter()
                .copied()
                .chain(decoys.keys().copied())
                .collect();
            y.sort_unstable();
            y.shuffle(&mut rng);
            let mut y_prime = labelled.clone();
            y_prime.sort_unstable();
            Transcript {
                variant: Variant::Protocol2,
                y,
                y_prime: Some(y_prime),
                w,
            }
        }
    };
    Ok(SimulatedOracles {
        instance,
        prf,
        labelled,
        w,
        s,
        decoys,
        transcript,
        ledger: QueryLedger::new(),
        lookups: 0,
    })
}

impl SimulatedOracles<'_> {
    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn h_prime_lookups(&self) -> u64 {
        self.lookups
    }

    /// The ordered pair on which g answers w.
    pub fn expected_key(&self) -> KeyPair {
        let (a, b) = self.instance.collision_pair;
        if self.s {
            KeyPair(a, b)
        } else {
            KeyPair(b, a)
        }
    }

    fn check_domain(&self, x: u64) -> Result<()> {
        if x == 0 || x > self.instance.domain {
            return Err(Error::Domain(format!(
                "{x} is outside [1, {}]",
                self.instance.domain
            )));
        }
        Ok(())
    }

    fn answer_f(&self, i: u64) -> RangeValue {
        match self.instance.h_prime(i) {
            (0, 0) => RangeValue(self.prf.eval(TAG_FHAT, &[i])),
            (label, _) => self.labelled[label as usize - 1],
        }
    }

    fn answer_g(&self, i: u64, j: u64) -> RangeValue {
        let (hi, hj) = (self.instance.h_prime(i).1, self.instance.h_prime(j).1);
        let ordered = if self.s { i < j } else { i > j };
        if hi == hj && hi != 0 && ordered {
            self.w
        } else {
            RangeValue(self.prf.eval(TAG_GHAT, &[i, j]))
        }
    }
}

impl EavesdropOracle for SimulatedOracles<'_> {
    fn variant(&self) -> Variant {
        self.instance.variant
    }

    fn n(&self) -> u64 {
        self.instance.n
    }

    fn domain_f(&self) -> u64 {
        self.instance.domain
    }

    fn f(&mut self, x: u64) -> Result<RangeValue> {
        self.check_domain(x)?;
        self.lookups += 1;
        self.ledger.record_classical(Party::Eve, OracleFn::F);
        Ok(self.answer_f(x))
    }

    fn g(&mut self, x: u64, x2: u64) -> Result<RangeValue> {
        self.check_domain(x)?;
        self.check_domain(x2)?;
        self.lookups += 2;
        self.ledger.record_classical(Party::Eve, OracleFn::G);
        Ok(self.answer_g(x, x2))
    }

    fn t(&mut self, _x: u64) -> Result<RangeValue> {
        Err(Error::Usage("the reduction simulates f and g only".into()))
    }

    fn charge(&mut self, func: OracleFn, amount: u64) {
        self.lookups += match func {
            OracleFn::G => 2 * amount,
            _ => amount,
        };
        self.ledger.charge(Party::Eve, func, amount);
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    fn hidden_preimages(&mut self, targets: &[RangeValue]) -> Result<Vec<u64>> {
        let by_label: HashMap<RangeValue, u64> = self
            .labelled
            .iter()
            .zip(&self.instance.points)
            .map(|(&y, &p)| (y, p))
            .collect();
        targets
            .iter()
            .map(|y| {
                by_label
                    .get(y)
                    .or_else(|| self.decoys.get(y))
                    .copied()
                    .ok_or_else(|| Error::Data(format!("{y} has no simulated preimage")))
            })
            .collect()
    }

    fn hidden_g(&self, x: u64, x2: u64) -> Result<RangeValue> {
        self.check_domain(x)?;
        self.check_domain(x2)?;
        Ok(self.answer_g(x, x2))
    }

    fn hidden_t(&self, _x: u64) -> Result<RangeValue> {
        Err(Error::Usage("the reduction simulates f and g only".into()))
    }
}
