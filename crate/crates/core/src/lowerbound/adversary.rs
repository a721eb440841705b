//! Adversary matrices for F ∘ pSEARCH^κ at toy dimensions.
//!
//! Index conventions. An outer input x̃ ∈ [M]^κ has index Σ x̃ᵢ·M^(κ−1−i).
//! An input of the i-th pSEARCH instance is the pair (a, q): value a ∈ [M]
//! hidden at position q ∈ [n], with index a·n + q, so inputs are grouped by
//! output value. A composed input has index Σ idxᵢ·(Mn)^(κ−1−i).

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::matrix::{all_ones, check_symmetric, hadamard, spectral_norm, MAX_DIM};
use crate::error::{Error, Result};

/// Verification tolerance for the norm identities.
pub const CLAIM_TOL: f64 = 1e-8;

/// Toy outer functions used to shape Γ_F.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OuterFunction {
    /// 1 when all components are distinct.
    ElementDistinctness,
    /// 1 when some component is nonzero.
    Or,
}

impl OuterFunction {
    pub fn eval(self, tuple: &[usize]) -> usize {
        match self {
            OuterFunction::ElementDistinctness => {
                let mut v = tuple.to_vec();
                v.sort_unstable();
                v.dedup();
                usize::from(v.len() == tuple.len())
            }
            OuterFunction::Or => usize::from(tuple.iter().any(|&a| a != 0)),
        }
    }
}

/// Digits of `index` in base `radix`, most significant first.
fn digits(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for d in out.iter_mut().rev() {
        *d = index % radix;
        index /= radix;
    }
    out
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .ok_or_else(|| Error::Size(format!("{base}^{exp} overflows")))
}

#[derive(Clone, Debug)]
pub struct AdversarySystem {
    pub m: usize,
    pub n: usize,
    pub kappa: usize,
    pub gamma_f: DMatrix<f64>,
    pub s: Vec<DMatrix<f64>>,
}

impl AdversarySystem {
    pub fn new(
        m: usize,
        n: usize,
        kappa: usize,
        gamma_f: DMatrix<f64>,
        s: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if m == 0 || n == 0 || kappa == 0 {
            return Err(Error::Parameter("M, n and kappa must be positive".into()));
        }
        let outer = checked_pow(m, kappa)?;
        if gamma_f.nrows() != outer || gamma_f.ncols() != outer {
            return Err(Error::Data(format!(
                "Gamma_F must be {outer}x{outer}, got {}x{}",
                gamma_f.nrows(),
                gamma_f.ncols()
            )));
        }
        check_symmetric(&gamma_f)?;
        if s.len() != kappa {
            return Err(Error::Data(format!(
                "need {kappa} inner blocks, got {}",
                s.len()
            )));
        }
        for si in &s {
            if si.nrows() != n || si.ncols() != n {
                return Err(Error::Data(format!("inner blocks must be {n}x{n}")));
            }
            check_symmetric(si)?;
        }
        Ok(Self {
            m,
            n,
            kappa,
            gamma_f,
            s,
        })
    }

    /// All inner blocks S_i equal to the all-ones matrix.
    pub fn with_all_ones(m: usize, n: usize, kappa: usize, gamma_f: DMatrix<f64>) -> Result<Self> {
        Self::new(m, n, kappa, gamma_f, vec![all_ones(n); kappa])
    }

    pub fn dimension(&self) -> Result<usize> {
        let dim = checked_pow(self.m * self.n, self.kappa)?;
        if dim > MAX_DIM {
            return Err(Error::Size(format!("(nM)^kappa = {dim} exceeds {MAX_DIM}")));
        }
        Ok(dim)
    }

    /// Components (a, q) of every inner input of a composed index.
    fn split(&self, index: usize) -> Vec<(usize, usize)> {
        digits(index, self.m * self.n, self.kappa)
            .into_iter()
            .map(|d| (d / self.n, d % self.n))
            .collect()
    }

    fn outer_index(&self, parts: &[(usize, usize)]) -> usize {
        parts.iter().fold(0, |acc, &(a, _)| acc * self.m + a)
    }

    fn inner_norms(&self) -> Result<Vec<f64>> {
        self.s.iter().map(spectral_norm).collect()
    }

    /// Γ_H[x, y] = Γ_F[x̃, ỹ] · ∏ᵢ Γ̄ᵢ[xᵢ, yᵢ], where Γ̄ᵢ = Γᵢ + ‖Sᵢ‖·I has the
    /// block Sᵢ between different outputs and ‖Sᵢ‖·I on equal outputs.
    pub fn build_gamma_h(&self) -> Result<DMatrix<f64>> {
        let norms = self.inner_norms()?;
        let blocks: Vec<&DMatrix<f64>> = self.s.iter().collect();
        self.compose(&self.gamma_f, &blocks, &norms)
    }

    fn compose(
        &self,
        outer: &DMatrix<f64>,
        inner: &[&DMatrix<f64>],
        diag: &[f64],
    ) -> Result<DMatrix<f64>> {
        let dim = self.dimension()?;
        let parts: Vec<Vec<(usize, usize)>> = (0..dim).map(|i| self.split(i)).collect();
        let outer_idx: Vec<usize> = parts.iter().map(|p| self.outer_index(p)).collect();
        let mut h = DMatrix::zeros(dim, dim);
        for x in 0..dim {
            for y in x..dim {
                let gf = outer[(outer_idx[x], outer_idx[y])];
                if gf == 0.0 {
                    continue;
                }
                let mut v = gf;
                for (i, (&(a, q), &(b, r))) in parts[x].iter().zip(&parts[y]).enumerate() {
                    v *= if a != b {
                        inner[i][(q, r)]
                    } else if q == r {
                        diag[i]
                    } else {
                        0.0
                    };
                    if v == 0.0 {
                        break;
                    }
                }
                h[(x, y)] = v;
                h[(y, x)] = v;
            }
        }
        Ok(h)
    }

    /// D_ℓ for ℓ = (p, q): 1 where the q-th symbol of the p-th inner input
    /// differs. A symbol is the hidden value at its position, 0 elsewhere.
    pub fn d_ell(&self, p: usize, q: usize) -> Result<DMatrix<f64>> {
        self.check_ell(p, q)?;
        let dim = self.dimension()?;
        let symbol = |i: usize| {
            let (a, pos) = self.split(i)[p];
            if pos == q {
                a + 1
            } else {
                0
            }
        };
        let symbols: Vec<usize> = (0..dim).map(symbol).collect();
        Ok(DMatrix::from_fn(dim, dim, |x, y| {
            f64::from(u8::from(symbols[x] != symbols[y]))
        }))
    }

    /// D_p on the outer inputs.
    pub fn outer_d(&self, p: usize) -> Result<DMatrix<f64>> {
        if p >= self.kappa {
            return Err(Error::Parameter(format!("p={p} out of range")));
        }
        let outer = checked_pow(self.m, self.kappa)?;
        Ok(DMatrix::from_fn(outer, outer, |x, y| {
            let dx = digits(x, self.m, self.kappa)[p];
            let dy = digits(y, self.m, self.kappa)[p];
            f64::from(u8::from(dx != dy))
        }))
    }

    fn check_ell(&self, p: usize, q: usize) -> Result<()> {
        if p >= self.kappa || q >= self.n {
            return Err(Error::Parameter(format!(
                "query index (p={p}, q={q}) outside kappa={}, n={}",
                self.kappa, self.n
            )));
        }
        Ok(())
    }

    /// ‖Γ_H‖ against ‖Γ_F‖·∏ᵢ‖S_i‖.
    pub fn verify_claim1(&self) -> Result<ClaimCheck> {
        let lhs = spectral_norm(&self.build_gamma_h()?)?;
        let rhs = spectral_norm(&self.gamma_f)? * self.inner_norms()?.iter().product::<f64>();
        Ok(ClaimCheck::new("claim1", self, None, lhs, rhs))
    }

    /// ‖Γ_H ∘ D_ℓ‖ against ‖Γ_F ∘ D_p‖·‖S_p ∘ Δ_q‖·∏_{i≠p}‖S_i‖.
    pub fn verify_claim2(&self, p: usize, q: usize) -> Result<ClaimCheck> {
        self.check_ell(p, q)?;
        let gh = self.build_gamma_h()?;
        let lhs = spectral_norm(&hadamard(&gh, &self.d_ell(p, q)?))?;
        let norms = self.inner_norms()?;
        let outer = spectral_norm(&hadamard(&self.gamma_f, &self.outer_d(p)?))?;
        let masked = spectral_norm(&hadamard(&self.s[p], &delta_q(self.n, q)))?;
        let others: f64 = norms
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != p)
            .map(|(_, v)| v)
            .product();
        Ok(ClaimCheck::new(
            "claim2",
            self,
            Some((p, q)),
            lhs,
            outer * masked * others,
        ))
    }
}

/// Off-diagonal block of D_q: ones on row q and on column q.
pub fn delta_q(n: usize, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == q || j == q)))
}

/// Diagonal block of D_q: ones on row q and column q except at (q, q).
pub fn delta_prime_q(n: usize, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| f64::from(u8::from((i == q) != (j == q))))
}

/// Random symmetric Γ_F with zeros on same-output pairs of `outer`.
pub fn random_gamma_f<R: Rng + ?Sized>(
    m: usize,
    kappa: usize,
    outer: OuterFunction,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let dim = checked_pow(m, kappa)?;
    let values: Vec<usize> = (0..dim).map(|i| outer.eval(&digits(i, m, kappa))).collect();
    let mut g = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        for y in x + 1..dim {
            if values[x] != values[y] {
                let v: f64 = rng.random_range(-1.0..1.0);
                g[(x, y)] = v;
                g[(y, x)] = v;
            }
        }
    }
    Ok(g)
}

/// min_ℓ ‖Γ‖ / ‖Γ ∘ D_ℓ‖. A zero denominator contributes +∞.
pub fn adv_ratio(gamma: &DMatrix<f64>, d_list: &[DMatrix<f64>]) -> Result<f64> {
    if d_list.is_empty() {
        return Err(Error::Parameter("no query matrices given".into()));
    }
    let top = spectral_norm(gamma)?;
    let mut best = f64::INFINITY;
    for d in d_list {
        let bottom = spectral_norm(&hadamard(gamma, d))?;
        if bottom > 0.0 {
            best = best.min(top / bottom);
        }
    }
    Ok(best)
}

/// Γ = (𝟙_M − I_M) ⊗ 𝟙_n for pSEARCH over [M] with n positions.
pub fn psearch_gamma(m: usize, n: usize) -> DMatrix<f64> {
    let outer = all_ones(m) - DMatrix::identity(m, m);
    outer.kronecker(&all_ones(n))
}

/// D_q on pSEARCH inputs (a, i), built from the definition.
pub fn psearch_d(m: usize, n: usize, q: usize) -> DMatrix<f64> {
    let symbol = |idx: usize| if idx % n == q { idx / n + 1 } else { 0 };
    DMatrix::from_fn(m * n, m * n, |x, y| {
        f64::from(u8::from(symbol(x) != symbol(y)))
    })
}

/// n/√(n−1), the pSEARCH ratio stated for S = 𝟙_n.
pub fn psearch_ratio_closed_form(n: usize) -> f64 {
    n as f64 / ((n - 1) as f64).sqrt()
}

/// Norm of 𝟙_n ∘ Δ_q in closed form: (1 + √(4n−3))/2.
pub fn ones_delta_norm_closed_form(n: usize) -> f64 {
    (1.0 + ((4 * n - 3) as f64).sqrt()) / 2.0
}

/// Result of one norm-identity check, in the JSON shape of `verify`.
#[derive(Clone, Debug, Serialize)]
pub struct ClaimCheck {
    pub claim: String,
    pub dims: Dims,
    pub lhs: f64,
    pub rhs: f64,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Dims {
    #[serde(rename = "M")]
    pub m: usize,
    pub n: usize,
    pub kappa: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

impl ClaimCheck {
    fn new(
        claim: &str,
        sys: &AdversarySystem,
        ell: Option<(usize, usize)>,
        lhs: f64,
        rhs: f64,
    ) -> Self {
        Self::with_dims(
            claim,
            Dims {
                m: sys.m,
                n: sys.n,
                kappa: sys.kappa,
                p: ell.map(|e| e.0),
                q: ell.map(|e| e.1),
            },
            lhs,
            rhs,
            CLAIM_TOL,
        )
    }

    pub fn with_dims(claim: &str, dims: Dims, lhs: f64, rhs: f64, tol: f64) -> Self {
        let delta = (lhs - rhs).abs();
        Self {
            claim: claim.to_string(),
            dims,
            lhs,
            rhs,
            delta,
            pass: delta <= tol,
        }
    }
}

/// Both composition identities over `samples` random Γ_F per grid point.
///
/// ED shapes Γ_F except where ED is constant (κ > M), where OR is used.
pub fn claim_suite<R: Rng + ?Sized>(
    grid: &[(usize, usize, usize)],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<ClaimCheck>> {
    let mut out = Vec::new();
    for &(m, n, kappa) in grid {
        let outer = if kappa > m {
            OuterFunction::Or
        } else {
            OuterFunction::ElementDistinctness
        };
        for _ in 0..samples {
            let gf = random_gamma_f(m, kappa, outer, rng)?;
            // Random PSD inner blocks besides all-ones. The composition needs
            // ‖S‖ to be the top eigenvalue; indefinite S breaks the product identity.
            let s: Vec<DMatrix<f64>> = (0..kappa)
                .map(|_| {
                    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                    &a * a.transpose()
                })
                .collect();
            for sys in [
                AdversarySystem::with_all_ones(m, n, kappa, gf.clone())?,
                AdversarySystem::new(m, n, kappa, gf, s)?,
            ] {
                out.push(sys.verify_claim1()?);
                for p in 0..kappa {
                    for q in 0..n {
                        out.push(sys.verify_claim2(p, q)?);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// ‖𝟙_n ∘ Δ_q‖ against the stated value √(n−1).
pub fn psearch_mask_checks(ns: impl IntoIterator<Item = usize>) -> Result<Vec<ClaimCheck>> {
    ns.into_iter()
        .map(|n| {
            let norm = spectral_norm(&hadamard(&all_ones(n), &delta_q(n, 0)))?;
            Ok(ClaimCheck::with_dims(
                "psearch_mask_norm",
                Dims {
                    m: 1,
                    n,
                    kappa: 1,
                    p: None,
                    q: Some(0),
                },
                norm,
                ((n - 1) as f64).sqrt(),
                1e-10,
            ))
        })
        .collect()
}

/// adv_ratio of the pSEARCH matrix against the stated n/√(n−1).
pub fn psearch_ratio_checks(
    m: usize,
    ns: impl IntoIterator<Item = usize>,
) -> Result<Vec<ClaimCheck>> {
    ns.into_iter()
        .map(|n| {
            let gamma = psearch_gamma(m, n);
            let ds: Vec<DMatrix<f64>> = (0..n).map(|q| psearch_d(m, n, q)).collect();
            Ok(ClaimCheck::with_dims(
                "psearch_ratio",
                Dims {
                    m,
                    n,
                    kappa: 1,
                    p: None,
                    q: None,
                },
                adv_ratio(&gamma, &ds)?,
                psearch_ratio_closed_form(n),
                1e-10,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowerbound::matrix::tests::power_norm;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_q_pattern() {
        let d = delta_q(4, 2);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[(i, j)] == 1.0, i == 2 || j == 2);
            }
        }
        assert_eq!(delta_prime_q(4, 2)[(2, 2)], 0.0);
        assert_eq!(delta_prime_q(4, 2)[(2, 1)], 1.0);
    }

    #[test]
    fn psearch_d_has_the_stated_block_structure() {
        let (m, n) = (3, 4);
        for q in 0..n {
            let d = psearch_d(m, n, q);
            for a in 0..m {
                for b in 0..m {
                    let block = d.view((a * n, b * n), (n, n)).into_owned();
                    let want = if a == b {
                        delta_prime_q(n, q)
                    } else {
                        delta_q(n, q)
                    };
                    assert_eq!(block, want, "q={q} block ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn d_ell_matches_psearch_d_for_one_instance() {
        let sys = AdversarySystem::with_all_ones(3, 4, 1, DMatrix::zeros(3, 3)).unwrap();
        for q in 0..4 {
            assert_eq!(sys.d_ell(0, q).unwrap(), psearch_d(3, 4, q));
        }
    }

    #[test]
    fn kappa_one_tensor_form() {
        let m = 3;
        let gf = all_ones(m) - DMatrix::identity(m, m);
        let s = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, -1.0, 2.0]);
        let sys = AdversarySystem::new(m, 2, 1, gf.clone(), vec![s.clone()]).unwrap();
        let h = sys.build_gamma_h().unwrap();
        assert_eq!(h, gf.kronecker(&s));
        let norm = spectral_norm(&h).unwrap();
        assert_abs_diff_eq!(
            norm,
            (m as f64 - 1.0) * spectral_norm(&s).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn zero_outer_matrix_gives_zero() {
        let sys = AdversarySystem::with_all_ones(2, 2, 2, DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(sys.build_gamma_h().unwrap(), DMatrix::zeros(16, 16));
    }

    #[test]
    fn claims_hold_against_independent_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let gf = random_gamma_f(3, 2, OuterFunction::ElementDistinctness, &mut rng).unwrap();
        let sys = AdversarySystem::with_all_ones(3, 3, 2, gf.clone()).unwrap();
        let h = sys.build_gamma_h().unwrap();
        let rhs = power_norm(&gf) * 9.0;
        assert!((power_norm(&h) - rhs).abs() < 1e-6 * rhs);
        let c = sys.verify_claim1().unwrap();
        assert!(c.pass, "{c:?}");
        let c2 = sys.verify_claim2(1, 2).unwrap();
        assert!(c2.pass, "{c2:?}");
    }

    #[test]
    fn claim_suite_passes_on_the_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let checks = claim_suite(&[(2, 2, 2), (3, 3, 2), (2, 2, 3)], 20, &mut rng).unwrap();
        let bad: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn claim2_rhs_varies_only_through_the_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gf = random_gamma_f(3, 2, OuterFunction::ElementDistinctness, &mut rng).unwrap();
        let s = vec![
            all_ones(3),
            DMatrix::from_row_slice(3, 3, &[1., 2., 0., 2., -1., 1., 0., 1., 3.]),
        ];
        let sys = AdversarySystem::new(3, 3, 2, gf, s.clone()).unwrap();
        let outer = spectral_norm(&hadamard(&sys.gamma_f, &sys.outer_d(1).unwrap())).unwrap();
        let other = spectral_norm(&s[0]).unwrap();
        for q in 0..3 {
            let c = sys.verify_claim2(1, q).unwrap();
            let mask = spectral_norm(&hadamard(&s[1], &delta_q(3, q))).unwrap();
            assert_abs_diff_eq!(c.rhs, outer * other * mask, epsilon = 1e-12);
        }
    }

    #[test]
    fn mask_norm_closed_form() {
        for n in 2..=64 {
            let got = spectral_norm(&hadamard(&all_ones(n), &delta_q(n, n / 2))).unwrap();
            assert_abs_diff_eq!(got, ones_delta_norm_closed_form(n), epsilon = 1e-10);
            // The diagonal-block pattern is the one with norm √(n−1).
            let star = spectral_norm(&delta_prime_q(n, 0)).unwrap();
            assert_abs_diff_eq!(star, ((n - 1) as f64).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn psearch_ratio_from_definition() {
        for n in 2..=12 {
            let gamma = psearch_gamma(3, n);
            let ds: Vec<_> = (0..n).map(|q| psearch_d(3, n, q)).collect();
            let ratio = adv_ratio(&gamma, &ds).unwrap();
            assert_abs_diff_eq!(
                ratio,
                n as f64 / ones_delta_norm_closed_form(n),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn closed_form_ratio_exceeds_sqrt_n() {
        for n in 2..=64 {
            assert!(psearch_ratio_closed_form(n) > (n as f64).sqrt());
        }
        assert_abs_diff_eq!(psearch_ratio_closed_form(4), 2.309, epsilon = 1e-3);
    }

    #[test]
    fn adv_ratio_edge_cases() {
        let mut g = DMatrix::zeros(2, 2);
        g[(0, 1)] = 1.0;
        g[(1, 0)] = 1.0;
        assert_abs_diff_eq!(adv_ratio(&g, &[all_ones(2)]).unwrap(), 1.0, epsilon = 1e-12);
        assert!(adv_ratio(&g, &[]).is_err());
    }

    #[test]
    fn oversized_systems_are_rejected() {
        let sys = AdversarySystem::with_all_ones(3, 4, 4, DMatrix::zeros(81, 81)).unwrap();
        assert!(matches!(sys.build_gamma_h(), Err(Error::Size(_))));
    }

    #[test]
    fn outer_functions() {
        assert_eq!(OuterFunction::ElementDistinctness.eval(&[0, 2, 1]), 1);
        assert_eq!(OuterFunction::ElementDistinctness.eval(&[0, 2, 0]), 0);
        assert_eq!(OuterFunction::Or.eval(&[0, 0]), 0);
        assert_eq!(OuterFunction::Or.eval(&[0, 1]), 1);
    }
}
