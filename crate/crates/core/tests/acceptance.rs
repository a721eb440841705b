//! Acceptance gate. Every criterion prints one PASS or FAIL line with the
//! measured quantities; the process exits nonzero if any criterion fails.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmerkle::attacks::{AttackKind, RChoice};
use qmerkle::harness::{
    attack_sweep, run_sessions, verify_adversary, verify_reduction, ExperimentConfig,
};
use qmerkle::oracle::{OracleFn, Party, Variant};
use qmerkle::qsim::{grover_closed_form, grover_run, BbhtSimulator};
use qmerkle::walkmodel::{fit_exponent, optimal_attack_r, predicted_r};

const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean_by_n(points: impl IntoIterator<Item = (u64, f64)>) -> Vec<(f64, f64)> {
    let mut acc = std::collections::BTreeMap::<u64, (f64, f64)>::new();
    for (n, v) in points {
        let e = acc.entry(n).or_default();
        e.0 += v;
        e.1 += 1.0;
    }
    acc.into_iter()
        .map(|(n, (s, k))| (n as f64, s / k))
        .collect()
}

fn attack_config(
    variant: Variant,
    grid: &[u64],
    trials: usize,
    kind: AttackKind,
    r: RChoice,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(variant, grid.to_vec(), trials, SEED).unwrap();
    cfg.attack = Some(kind);
    cfg.r = r;
    cfg
}

const MERKLE_GRID: [u64; 4] = [16, 32, 64, 128];

fn criterion1() -> Outcome {
    let runs = attack_sweep(&attack_config(
        Variant::MerkleOriginal,
        &MERKLE_GRID,
        200,
        AttackKind::Classical,
        RChoice::Auto,
    ))
    .unwrap();
    let attack = fit_exponent(&mean_by_n(
        runs.iter()
            .map(|r| (r.report.n, r.report.executed.total() as f64)),
    ))
    .unwrap();
    let legit = fit_exponent(&mean_by_n(
        runs.iter().map(|r| (r.report.n, r.legitimate_total as f64)),
    ))
    .unwrap();
    let all = runs.iter().all(|r| r.report.success);
    outcome(
        (attack.slope - 2.0).abs() <= 0.1 && (legit.slope - 1.0).abs() <= 0.1 && all,
        format!(
            "classical attack slope {:.4} (2.0 ± 0.1), legitimate slope {:.4} (1.0 ± 0.1), all recovered {all}",
            attack.slope, legit.slope
        ),
    )
}

fn criterion2() -> Outcome {
    let runs = attack_sweep(&attack_config(
        Variant::MerkleOriginal,
        &MERKLE_GRID,
        200,
        AttackKind::Grover,
        RChoice::Auto,
    ))
    .unwrap();
    let fit = fit_exponent(&mean_by_n(
        runs.iter()
            .map(|r| (r.report.n, r.report.charged_total_f as f64)),
    ))
    .unwrap();
    outcome(
        (fit.slope - 1.0).abs() <= 0.05,
        format!(
            "charged Grover inversion slope {:.4} (1.0 ± 0.05)",
            fit.slope
        ),
    )
}

fn criterion3() -> Outcome {
    let grid = [16u64, 64, 256];
    let p2 =
        run_sessions(&ExperimentConfig::new(Variant::Protocol2, grid.to_vec(), 200, SEED).unwrap())
            .unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for &n in &grid {
        let recs: Vec<_> = p2.iter().filter(|r| r.n == n).collect();
        let alice_f_exact = recs
            .iter()
            .all(|r| r.ledger.function_total(Party::Alice, OracleFn::F) == n);
        let alice_g_max = recs
            .iter()
            .map(|r| r.ledger.function_total(Party::Alice, OracleFn::G))
            .max()
            .unwrap();
        let bob_f = recs
            .iter()
            .map(|r| r.ledger.function_total(Party::Bob, OracleFn::F) as f64)
            .sum::<f64>()
            / recs.len() as f64;
        let rel = (bob_f - 2.0 * n as f64).abs() / (2.0 * n as f64);
        pass &= alice_f_exact && alice_g_max <= n && rel <= 0.10 && recs.iter().all(|r| r.agreed);
        notes.push(format!(
            "P2 N={n}: alice f = N {alice_f_exact}, max alice g {alice_g_max}, bob f mean {bob_f:.1} ({:.1}% off 2N)",
            100.0 * rel
        ));
    }
    let p1 =
        run_sessions(&ExperimentConfig::new(Variant::Protocol1, grid.to_vec(), 200, SEED).unwrap())
            .unwrap();
    let worst = p1
        .iter()
        .map(|r| r.legitimate_total() as f64 / r.n as f64)
        .fold(0.0, f64::max);
    pass &= worst <= 8.0 && p1.iter().all(|r| r.agreed);
    notes.push(format!("P1 worst legitimate total {worst:.3}·N (≤ 8N)"));
    outcome(pass, notes.join("; "))
}

fn criterion4() -> Outcome {
    let grid: Vec<u64> = [6u32, 8, 10, 12, 14, 16]
        .iter()
        .map(|e| 1u64 << e)
        .collect();
    let cases = [
        (Variant::Protocol1, 5.0 / 3.0),
        (Variant::LbnQuantum, 5.0 / 3.0),
        (Variant::Protocol2, 13.0 / 12.0),
        (Variant::LbnClassical, 7.0 / 6.0),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (variant, exponent) in cases {
        let mut points = Vec::new();
        let mut r_ok = true;
        for &n in &grid {
            let (r, charge) = optimal_attack_r(variant, n).unwrap();
            points.push((n as f64, charge.total() as f64));
            let ratio = r as f64 / predicted_r(variant, n);
            r_ok &= (0.5..=2.0).contains(&ratio);
        }
        let fit = fit_exponent(&points).unwrap();
        let ok = (fit.slope - exponent).abs() <= 0.05 && r_ok;
        pass &= ok;
        notes.push(format!(
            "{variant} slope {:.4} (target {exponent:.4}), r* within 2x {r_ok}",
            fit.slope
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion5() -> Outcome {
    let cases = [
        (Variant::Protocol1, 16u64),
        (Variant::Protocol2, 16),
        (Variant::Protocol2, 25),
        (Variant::LbnQuantum, 16),
        (Variant::LbnClassical, 16),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (variant, n) in cases {
        // Node size as chosen in the proofs: N^{2/3}, or N^{1/3} for Protocol 2.
        let r = predicted_r(variant, n).round() as u64;
        let runs = attack_sweep(&attack_config(
            variant,
            &[n],
            50,
            AttackKind::Walk,
            RChoice::Fixed(r),
        ))
        .unwrap();
        let successes = runs.iter().filter(|r| r.report.success).count();
        let analytic = runs[0].report.analytic.unwrap().total() as f64;
        let executed = runs
            .iter()
            .map(|r| r.report.executed.total() as f64)
            .sum::<f64>()
            / runs.len() as f64;
        let ratio = executed / analytic;
        let ok = successes == runs.len() && (1.0 / 3.0..=3.0).contains(&ratio);
        pass &= ok;
        notes.push(format!(
            "{variant} N={n} r={r}: {successes}/50 recovered, mean executed/analytic {ratio:.3}"
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion6() -> Outcome {
    let mut pass = true;
    let p = grover_run(4, &BTreeSet::from([2]), 1).unwrap();
    pass &= (p - 1.0).abs() <= 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    let mut cells = 0;
    for e in 2..=14u32 {
        let m = 1u64 << e;
        for t in [1u64, 2, 3, 5] {
            if t >= m {
                continue;
            }
            let marked: BTreeSet<u64> = index::sample(&mut rng, m as usize, t as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            for j in [0u64, 1, 3, 7, 20] {
                let d = (grover_run(m, &marked, j).unwrap() - grover_closed_form(m, t, j)).abs();
                worst = worst.max(d);
                cells += 1;
            }
        }
    }
    pass &= worst <= 1e-9;
    let mut bbht = Vec::new();
    for t in [1u64, 4, 16] {
        let m = 4096u64;
        let marked: BTreeSet<u64> = index::sample(&mut rng, m as usize, t as usize)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        let mut sim = BbhtSimulator::new(m, marked.clone()).unwrap();
        let mut total = 0u64;
        for _ in 0..1000 {
            let out = sim.run(&mut rng);
            pass &= marked.contains(&out.found);
            total += out.queries;
        }
        let mean = total as f64 / 1000.0;
        let bound = 3.0 * (m as f64 / t as f64).sqrt();
        pass &= mean <= bound;
        bbht.push(format!("t={t} mean {mean:.1} ≤ {bound:.1}"));
    }
    outcome(
        pass,
        format!(
            "grover_run(4,{{2}},1) = {p:.12}; worst closed-form gap {worst:.2e} over {cells} cells; BBHT {}",
            bbht.join(", ")
        ),
    )
}

fn criterion7() -> Outcome {
    let rep = verify_adversary(SEED, 64).unwrap();
    let all_pass = |name: &str| rep.named(name).all(|c| c["pass"] == true);
    let worst = |name: &str| {
        rep.named(name)
            .filter_map(|c| c["delta"].as_f64())
            .fold(0.0f64, f64::max)
    };
    let ones = all_pass("ones_norm");
    let mask = all_pass("psearch_mask_norm");
    let claims = all_pass("claim1") && all_pass("claim2");
    let ratio = all_pass("psearch_ratio_exceeds_sqrt_n");
    let stated = all_pass("stated_ratio_exceeds_sqrt_n");
    let mask_example = rep
        .named("psearch_mask_norm")
        .find(|c| c["dims"]["n"] == 4)
        .map(|c| {
            format!(
                "n=4 norm {:.6} vs √3 = {:.6}",
                c["lhs"].as_f64().unwrap(),
                c["rhs"].as_f64().unwrap()
            )
        })
        .unwrap_or_default();
    let ratio_example = rep
        .named("psearch_ratio_exceeds_sqrt_n")
        .find(|c| c["dims"]["n"] == 4)
        .map(|c| format!("n=4 adv ratio {:.6} vs √4", c["lhs"].as_f64().unwrap()))
        .unwrap_or_default();
    outcome(
        ones && mask && claims && ratio,
        format!(
            "‖𝟙‖ = n {ones}; ‖𝟙∘Δ_q‖ = √(n−1) {mask} ({mask_example}); \
             composition identities over {} checks {claims} (worst gap {:.2e}/{:.2e}); \
             computed pSEARCH ratio > √n {ratio} ({ratio_example}); n/√(n−1) > √n {stated}",
            rep.named("claim1").count() + rep.named("claim2").count(),
            worst("claim1"),
            worst("claim2"),
        ),
    )
}

fn criterion8() -> Outcome {
    let rep = verify_reduction(SEED, 100_000, 50).unwrap();
    let get =
        |name: &str| rep.named(name).all(|c| c["pass"] == true) && rep.named(name).count() > 0;
    let p = |name: &str, key: &str| {
        rep.named(name)
            .next()
            .and_then(|c| c["report"][key].as_f64())
            .unwrap_or(f64::NAN)
    };
    outcome(
        rep.pass,
        format!(
            "planted pair recovered 50/50 {}; h′ lookups ≤ 2(f+g) {}; consistency passes {} (p = {:.3}, {:.3}); \
             corrupted control rejected {} (p = {:.2e}, {:.2e})",
            get("walk_recovers_planted_pair"),
            get("lookups_within_twice_queries"),
            get("consistency_real_vs_simulated"),
            p("consistency_real_vs_simulated", "hit_p_value"),
            p("consistency_real_vs_simulated", "position_p_value"),
            get("corrupted_control_rejected"),
            p("corrupted_control_rejected", "hit_p_value"),
            p("corrupted_control_rejected", "position_p_value"),
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
        (7, criterion7),
        (8, criterion8),
    ];
    let mut failed = Vec::new();
    for (k, check) in criteria {
        let start = std::time::Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {k}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 8 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
