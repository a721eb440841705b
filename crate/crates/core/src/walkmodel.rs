//! Cost calculus for quantized walks on Johnson graphs, the analytic
//! attack charges built on it, and log-log exponent fitting.

use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Variant;
use crate::qsim::charged_search_price;

/// Largest range scanned exhaustively by [`optimal_r`].
pub const SCAN_LIMIT: u64 = 1_000_000;

/// Walk on J(n, r) searching for a node that contains a fixed k-subset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub n: u64,
    pub r: u64,
    pub k: u32,
    pub setup: f64,
    pub update: f64,
    pub check: f64,
}

impl WalkSpec {
    pub fn new(n: u64, r: u64, k: u32, setup: f64, update: f64, check: f64) -> Result<Self> {
        if n < 3 || r < 2 || r > n - 1 {
            return Err(Error::Parameter(format!(
                "need 2 <= r <= n-1, got n={n}, r={r}"
            )));
        }
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        if [setup, update, check]
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::Parameter(
                "prices must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            n,
            r,
            k,
            setup,
            update,
            check,
        })
    }

    /// Spectral gap n / (r(n − r)).
    pub fn delta(&self) -> f64 {
        self.n as f64 / (self.r as f64 * (self.n - self.r) as f64)
    }

    /// Marked fraction (r/n)^k.
    pub fn epsilon(&self) -> f64 {
        (self.r as f64 / self.n as f64).powi(self.k as i32)
    }

    pub fn cost(&self) -> f64 {
        walk_cost_with(
            self.setup,
            self.update,
            self.check,
            self.delta(),
            self.epsilon(),
        )
    }
}

/// S + (1/√ε)(U/√δ + C).
pub fn walk_cost_with(setup: f64, update: f64, check: f64, delta: f64, epsilon: f64) -> f64 {
    setup + (update / delta.sqrt() + check) / epsilon.sqrt()
}

fn ternary_argmin<F: Fn(u64) -> f64>(lo: u64, hi: u64, cost: &F) -> (u64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if cost(m1) <= cost(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    scan_argmin(lo, hi, cost)
}

fn scan_argmin<F: Fn(u64) -> f64>(lo: u64, hi: u64, cost: &F) -> (u64, f64) {
    let mut best = (lo, cost(lo));
    for r in lo + 1..=hi {
        let c = cost(r);
        if c < best.1 {
            best = (r, c);
        }
    }
    best
}

/// Integer argmin of `cost` over `[r_min, r_max]`, ties going to the
/// smaller r. Scans exhaustively up to [`SCAN_LIMIT`] points and falls back
/// to ternary search (which assumes unimodality) above that.
pub fn optimal_r<F: Fn(u64) -> f64>(r_min: u64, r_max: u64, cost: F) -> Result<(u64, f64)> {
    if r_min > r_max {
        return Err(Error::Parameter(format!("empty range [{r_min}, {r_max}]")));
    }
    if r_max - r_min < SCAN_LIMIT {
        Ok(scan_argmin(r_min, r_max, &cost))
    } else {
        Ok(ternary_argmin(r_min, r_max, &cost))
    }
}

/// Ternary-search argmin regardless of range size.
pub fn optimal_r_ternary<F: Fn(u64) -> f64>(r_min: u64, r_max: u64, cost: F) -> Result<(u64, f64)> {
    if r_min > r_max {
        return Err(Error::Parameter(format!("empty range [{r_min}, {r_max}]")));
    }
    Ok(ternary_argmin(r_min, r_max, &cost))
}

/// Query charges of one walk attack, split by function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Charge {
    pub f: u64,
    pub g: u64,
    pub t: u64,
}

impl Charge {
    pub fn total(&self) -> u64 {
        self.f + self.g + self.t
    }
}

/// Price in f-queries of finding one new node element by quantum search.
pub fn element_price(variant: Variant, n: u64) -> Result<u64> {
    let nf = n as f64;
    match variant {
        Variant::Protocol1 | Variant::LbnQuantum => Ok(charged_search_price(nf.powi(3), nf)),
        Variant::Protocol2 => Ok(charged_search_price(nf * nf, nf.sqrt())),
        Variant::LbnClassical => Ok(charged_search_price(nf * nf, nf)),
        Variant::MerkleOriginal => Err(Error::Usage("no walk attack on merkle-original".into())),
    }
}

/// 1/√ε for the attack walks: N/r, except √N/r for Protocol 2.
pub fn walk_length(variant: Variant, n: u64, r: u64) -> f64 {
    match variant {
        Variant::Protocol2 => (n as f64).sqrt() / r as f64,
        _ => n as f64 / r as f64,
    }
}

/// Admissible node sizes. Protocol 2 walks over the √N preimages of Y′.
pub fn attack_r_range(variant: Variant, n: u64) -> Result<(u64, u64)> {
    let universe = match variant {
        Variant::Protocol2 => n.isqrt(),
        Variant::MerkleOriginal => {
            return Err(Error::Usage("no walk attack on merkle-original".into()))
        }
        _ => n,
    };
    if universe < 3 {
        return Err(Error::Parameter(format!(
            "N={n} too small for a walk attack"
        )));
    }
    Ok((2, universe - 1))
}

/// Closed-form charge of the walk attack with node size `r`:
/// f = rU + L√r·U, check g = L·ceil(π/4·r) (pair search inside a node) or,
/// for the XOR variants, t = r + L√r with cached t-values making the check
/// free. L is [`walk_length`].
pub fn analytic_charge(variant: Variant, n: u64, r: u64) -> Result<Charge> {
    let (lo, hi) = attack_r_range(variant, n)?;
    if r < lo || r > hi {
        return Err(Error::Parameter(format!(
            "r={r} outside [{lo}, {hi}] for {variant} at N={n}"
        )));
    }
    let u = element_price(variant, n)? as f64;
    let rf = r as f64;
    let len = walk_length(variant, n, r);
    let f = (rf * u + len * rf.sqrt() * u).ceil() as u64;
    let (g, t) = if variant.uses_t() {
        (0, (rf + len * rf.sqrt()).ceil() as u64)
    } else {
        (
            (len * charged_search_price(rf * rf, 1.0) as f64).ceil() as u64,
            0,
        )
    };
    Ok(Charge { f, g, t })
}

/// Node size minimizing the total analytic charge.
pub fn optimal_attack_r(variant: Variant, n: u64) -> Result<(u64, Charge)> {
    let (lo, hi) = attack_r_range(variant, n)?;
    let (r, _) = optimal_r(lo, hi, |r| {
        analytic_charge(variant, n, r)
            .map(|c| c.total() as f64)
            .unwrap_or(f64::INFINITY)
    })?;
    Ok((r, analytic_charge(variant, n, r)?))
}

/// Order of the r* predicted by the proofs: N^{2/3}, or N^{1/3} for Protocol 2.
pub fn predicted_r(variant: Variant, n: u64) -> f64 {
    match variant {
        Variant::Protocol2 => (n as f64).cbrt(),
        _ => (n as f64).powf(2.0 / 3.0),
    }
}

/// Cost regimes with a predicted scaling exponent in N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Classical eavesdropper against the original scheme.
    MerkleClassical,
    /// Grover eavesdropper against the original scheme.
    MerkleGrover,
    /// Quantum eavesdropper against the quantum-Bob, classical-Alice remedy.
    PartialRemedy,
    Walk(Variant),
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merkle-classical" => Ok(Scenario::MerkleClassical),
            "merkle-grover" => Ok(Scenario::MerkleGrover),
            "partial-remedy" => Ok(Scenario::PartialRemedy),
            other => match other.parse::<Variant>()? {
                Variant::MerkleOriginal => Ok(Scenario::MerkleClassical),
                v => Ok(Scenario::Walk(v)),
            },
        }
    }
}

pub fn predicted_exponent(scenario: Scenario) -> Result<Rational64> {
    let r = Rational64::new;
    Ok(match scenario {
        Scenario::MerkleClassical => r(2, 1),
        Scenario::MerkleGrover => r(1, 1),
        Scenario::PartialRemedy => r(3, 2),
        Scenario::Walk(Variant::Protocol1) | Scenario::Walk(Variant::LbnQuantum) => r(5, 3),
        Scenario::Walk(Variant::Protocol2) => r(13, 12),
        Scenario::Walk(Variant::LbnClassical) => r(7, 6),
        Scenario::Walk(Variant::MerkleOriginal) => {
            return Err(Error::Usage("no walk attack on merkle-original".into()))
        }
    })
}

/// Exponent in N of m^{2/3}·n^{1/2} when m = N^a and n = N^b.
pub fn lemma3_exponent(a: Rational64, b: Rational64) -> Rational64 {
    a * Rational64::new(2, 3) + b * Rational64::new(1, 2)
}

/// Rows (N, m^{2/3}·n^{1/2}) for m = N^a, n = N^b.
pub fn lemma3_table(a: f64, b: f64, grid: &[u64]) -> Vec<(u64, f64)> {
    grid.iter()
        .map(|&n| {
            let nf = n as f64;
            (n, nf.powf(a).powf(2.0 / 3.0) * nf.powf(b).sqrt())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least-squares line through (ln N, ln cost).
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::Data(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::Data(format!(
            "non-positive point ({}, {})",
            p.0, p.1
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("all N values are equal".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(FitResult {
        slope,
        intercept,
        residual: (ss / k).sqrt(),
        points: points.to_vec(),
    })
}

/// One row of the minimized-cost table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelRow {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: u64,
    pub r_star: u64,
    pub analytic_f: u64,
    pub analytic_g: u64,
    pub analytic_t: u64,
    pub total: u64,
}

pub fn model_table(variant: Variant, grid: &[u64]) -> Result<Vec<ModelRow>> {
    grid.iter()
        .map(|&n| {
            let (r, c) = optimal_attack_r(variant, n)?;
            Ok(ModelRow {
                variant,
                n,
                r_star: r,
                analytic_f: c.f,
                analytic_g: c.g,
                analytic_t: c.t,
                total: c.total(),
            })
        })
        .collect()
}
