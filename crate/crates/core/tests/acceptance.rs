//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (uncaptured, so the lines appear in plain `cargo test` output) and
//! then asserts.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rss_core::bounds::{discrete_error_bound, TheoremConstants};
use rss_core::experiments::{
    estimate_coverage_prob, estimate_joint_prob, estimate_moments, estimate_single_subset_prob, frequency_stderr,
    verify_appendix_claims, Verdict, CI_MULTIPLIER,
};
use rss_core::nne::{find_genotype, genotype_tensor, sample_genes, NetTensor};
use rss_core::sampler::{quantize, sample_standard_normal};
use rss_core::search::{enumerate_exhaustive, meet_in_middle, search, CoverageOptions};
use rss_core::walks::WalkFrontier;
use rss_core::{build_family, linf_distance, validate_family, Engine, ProblemParams};

fn report(id: u32, pass: bool, what: &str, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} criterion {id:>2}: {what} ({detail})");
    assert!(pass, "criterion {id} failed: {detail}");
}

#[test]
fn criterion_01_single_subset_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    for i in 0..20 {
        let d = rng.random_range(1..=3);
        let size = rng.random_range(1..=200);
        let eps = rng.random_range(0.05..=0.5);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let s = estimate_single_subset_prob(d, size, eps, &z, 100_000, 1000 + i).unwrap();
        let (lo, hi) = s.linear_bounds();
        if s.verdict != Verdict::Within || lo.is_none() || hi.is_none() {
            failures.push(format!("d={d} size={size} eps={eps:.3}: {:?}", s.verdict));
        }
    }
    report(
        1,
        failures.is_empty(),
        "single-subset hit frequency inside cube bounds ± 4 s.e.",
        format!("20 tuples, {} outside: {failures:?}", failures.len()),
    );
}

#[test]
fn criterion_02_moment_sandwich() {
    let p = ProblemParams::new(1, 729, 0.5, 1.0 / 6.0).unwrap();
    let fam = build_family(729, 1.0 / 6.0, 64, 7, 1000).unwrap();
    assert!(validate_family(&fam).ok);
    let (mean, var) = estimate_moments(&p, &fam, &[0.0], 100_000, 8).unwrap();
    let (mlo, mhi) = mean.linear_bounds();
    let (_, vhi) = var.linear_bounds();
    let pass = mean.verdict == Verdict::Within
        && var.verdict == Verdict::Within
        && mlo.is_some()
        && mhi.is_some()
        && vhi.is_some();
    report(
        2,
        pass,
        "E[Y] inside expectation bounds, Var[Y] below variance bound",
        format!(
            "E[Y]={:.5}±{:.5} in [{:.5}, {:.5}]; Var[Y]={:.5}±{:.5} <= {:.5}",
            mean.estimate,
            mean.ci_halfwidth,
            mlo.unwrap_or(f64::NAN),
            mhi.unwrap_or(f64::NAN),
            var.estimate,
            var.ci_halfwidth,
            vhi.unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_03_joint_bracketing() {
    let hi_p = ProblemParams::new(1, 729, 0.5, 1.0 / 6.0).unwrap();
    let k_hi = hi_p.intersection_cap();
    let up = estimate_joint_prob(&hi_p, k_hi, &[0.0], 1_000_000, 31).unwrap();
    let lo_p = ProblemParams::new(1, 33, 0.5, 1.0 / 6.0).unwrap();
    let k_lo = lo_p.tight_intersection();
    let low = estimate_joint_prob(&lo_p, k_lo, &[0.0], 1_000_000, 32).unwrap();
    let (_, u) = up.linear_bounds();
    let (l, _) = low.linear_bounds();
    let pass = k_hi == 40
        && k_lo == 1
        && u.is_some_and(|u| up.estimate - up.ci_halfwidth <= u)
        && l.is_some_and(|l| low.estimate + low.ci_halfwidth >= l)
        && !up.verdict.is_violation()
        && !low.verdict.is_violation();
    report(
        3,
        pass,
        "joint hit frequency below upper bound at the cap, above lower bound at the tight size",
        format!(
            "n=729 k={k_hi}: {:.6}±{:.6} <= {:.6}; n=33 k={k_lo}: {:.6}±{:.6} >= {:.6}",
            up.estimate,
            up.ci_halfwidth,
            u.unwrap_or(f64::NAN),
            low.estimate,
            low.ci_halfwidth,
            l.unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_04_family_construction() {
    let (n, alpha, k) = (200, 0.1, 10);
    let mut rounds = 0u64;
    let mut invalid = 0;
    for seed in 0..100 {
        let f = build_family(n, alpha, k, seed, 10_000).unwrap();
        if !validate_family(&f).ok {
            invalid += 1;
        }
        rounds += f.build_stats().attempts as u64;
    }
    let restarts = rounds - 100;
    let rate = restarts as f64 / rounds as f64;
    let ci = CI_MULTIPLIER * frequency_stderr(rate, rounds);
    let pairs = (k * (k - 1) / 2) as f64;
    let union = pairs * (-alpha * alpha * n as f64 / 3.0).exp();
    report(
        4,
        invalid == 0 && rate <= union + ci,
        "100 family builds valid, restart rate below the union bound",
        format!("invalid={invalid}, restart rate {rate:.4} over {rounds} rounds, bound {union:.4} + {ci:.4}"),
    );
}

#[test]
fn criterion_05_engine_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut mismatches = Vec::new();
    let mut found = 0;
    for i in 0..500u64 {
        let n = rng.random_range(1..=20);
        let d = rng.random_range(1..=3);
        let m = sample_standard_normal(n, d, 5000 + i).unwrap();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..=1.5)).collect();
        let eps = rng.random_range(0.005..=0.5);
        let a = enumerate_exhaustive(&m, &z, eps, None).unwrap();
        let b = meet_in_middle(&m, &z, eps, None).unwrap();
        let agree = a.found == b.found
            && if a.found {
                found += 1;
                a.error <= eps && b.error <= eps
            } else {
                (a.error - b.error).abs() <= 1e-12
            };
        if !agree {
            mismatches.push(i);
        }
    }
    report(
        5,
        mismatches.is_empty(),
        "exhaustive and meet-in-the-middle agree on found and minimal error",
        format!("500 instances ({found} found), mismatches {mismatches:?}"),
    );
}

#[test]
fn criterion_06_coverage_monotonicity() {
    let opts = CoverageOptions {
        engine: Engine::MeetInMiddle,
        max_rows: Some(32),
        ..CoverageOptions::default()
    };
    let mut rows = Vec::new();
    for (i, n) in [4usize, 8, 16, 32, 64].into_iter().enumerate() {
        let p = ProblemParams::new(1, n, 0.25, 0.25).unwrap();
        let s = estimate_coverage_prob(&p, &opts, TheoremConstants::default(), 200, 600 + i as u64).unwrap();
        rows.push((n, s.estimate, s.ci_halfwidth));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 + w[1].2 >= w[0].1 - w[0].2);
    let last = rows.last().unwrap().1;
    let detail = rows
        .iter()
        .map(|(n, p, ci)| format!("n={n}: {p:.3}±{ci:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        6,
        monotone && last >= 0.95,
        "coverage frequency nondecreasing in n and at least 0.95 at n=64",
        detail,
    );
}

#[test]
fn criterion_07_claim_checks() {
    let reports = verify_appendix_claims(10_000, 77, 8).unwrap();
    let total: u64 = reports.iter().map(|r| r.violations).sum();
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "{:?}: {} violations, worst margin {:.3e}",
                r.claim_id, r.violations, r.worst_margin
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    report(
        7,
        total == 0 && reports.len() == 5 && reports.iter().all(|r| r.draws == 10_000),
        "10^4 draws per claim with no violations",
        detail,
    );
}

#[test]
fn criterion_08_nne_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut bad = Vec::new();
    let mut successes = 0;
    for i in 0..100u64 {
        let bank = sample_genes(20, 1, 2, 8000 + i).unwrap();
        let target = NetTensor::new(1, 2, (0..4).map(|_| rng.random_range(-0.99..0.99)).collect()).unwrap();
        let eps = rng.random_range(0.05..=0.5);
        for engine in [Engine::MeetInMiddle, Engine::Exhaustive] {
            let g = find_genotype(&bank, &target, eps, engine).unwrap();
            let r = search(engine, bank.as_matrix(), target.entries(), 2.0 * eps, None).unwrap();
            let same = g.found == r.found
                && g.genotype.active() == r.subset
                && g.max_entry_error.to_bits() == r.error.to_bits();
            let recomputed = genotype_tensor(&bank, &g.genotype)
                .unwrap()
                .max_entry_error(&target)
                .unwrap();
            let ok_success = !g.found || recomputed < 2.0 * eps;
            if g.found && engine == Engine::MeetInMiddle {
                successes += 1;
            }
            if !(same && ok_success && recomputed.to_bits() == g.max_entry_error.to_bits()) {
                bad.push((i, engine));
            }
        }
    }
    report(
        8,
        bad.is_empty(),
        "find_genotype equals the flattened search bit for bit",
        format!("100 pairs x 2 engines, {successes} successes, mismatches {bad:?}"),
    );
}

#[test]
fn criterion_09_discrete_corollary() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut seed = 9000u64;
    while checked < 50 {
        seed += 1;
        let n = rng.random_range(4..=16);
        let d = rng.random_range(1..=2);
        let eps = rng.random_range(0.02..=0.3);
        let m = sample_standard_normal(n, d, seed).unwrap();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let r = meet_in_middle(&m, &z, 2.0 * eps, None).unwrap();
        if r.error > 2.0 * eps {
            continue;
        }
        checked += 1;
        let q = quantize(&m, 2.0 * eps).unwrap();
        let err = linf_distance(&q.subset_sum(&r.subset), &z).unwrap();
        if err.is_nan() || err > discrete_error_bound(n, eps) {
            bad.push((seed, err));
        }
    }
    report(
        9,
        bad.is_empty(),
        "quantized matrix keeps the subset within 2ε(n+1)",
        format!("{checked} instances, failures {bad:?}"),
    );
}

fn brute_force_sums(rows: &[Vec<f64>], d: usize) -> BTreeSet<Vec<u64>> {
    let t = rows.len();
    (0u32..1 << t)
        .map(|mask| {
            let mut acc = vec![0.0f64; d];
            for (i, r) in rows.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    for (a, x) in acc.iter_mut().zip(r) {
                        *a += x;
                    }
                }
            }
            acc.iter().map(|v| v.to_bits()).collect()
        })
        .collect()
}

#[test]
fn criterion_10_walk_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut bad = Vec::new();
    let mut worst_gap = 0.0f64;
    for trial in 0..8u64 {
        let d = rng.random_range(1..=2);
        let cell = rng.random_range(0.05..=0.3);
        let inc = sample_standard_normal(16, d, 10_000 + trial).unwrap();
        let targets: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..=2.0)).collect())
            .collect();
        let mut exact = WalkFrontier::new(d, 0.0).unwrap();
        let mut dedup = WalkFrontier::new(d, cell).unwrap();
        let mut prefix: Vec<Vec<f64>> = Vec::new();
        for t in 1..=16usize {
            let x = inc.row(t - 1);
            prefix.push(x.to_vec());
            exact = exact.step(x, 1 << 20).unwrap();
            dedup = dedup.step(x, 1 << 20).unwrap();
            let got: BTreeSet<Vec<u64>> = exact
                .points()
                .map(|p| p.iter().map(|v| (v + 0.0).to_bits()).collect())
                .collect();
            let want: BTreeSet<Vec<u64>> = brute_force_sums(&prefix, d)
                .into_iter()
                .map(|p| p.into_iter().map(|b| (f64::from_bits(b) + 0.0).to_bits()).collect())
                .collect();
            if got != want || exact.len() != want.len() {
                bad.push(format!("trial {trial} t={t}: frontier differs"));
            }
            for z in &targets {
                let gap = dedup.min_distance(z) - exact.min_distance(z);
                worst_gap = worst_gap.max(gap / (t as f64 * cell));
                if gap > t as f64 * cell {
                    bad.push(format!("trial {trial} t={t}: gap {gap} > {}", t as f64 * cell));
                }
            }
        }
    }
    report(
        10,
        bad.is_empty(),
        "exact frontiers equal brute-force subset sums; dedup distance gap <= t·cell",
        format!("8 walks to t=16, worst gap/(t·cell) {worst_gap:.3}, failures {bad:?}"),
    );
}
