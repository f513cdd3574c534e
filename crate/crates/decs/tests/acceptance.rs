//! The acceptance gate: twelve numbered criteria covering oracle agreement,
//! anchored constants, randomized equivalence suites, and full end-to-end
//! runs. Each test prints one `criterion NN PASS` line; a panic in any test
//! is that criterion's FAIL.
//!
//! Tolerances are pinned next to each assertion. "Relative 1e-9" uses an
//! absolute floor of one unit, `|a - b| <= 1e-9 * max(1, |a|, |b|)`, so that
//! interval endpoints crossing zero do not blow up the quotient.

use std::time::Instant;

use decs::decoder::{abi_decode, AbiType};
use decs::metrics::{
    assign_bucket, check_freshness, default_chain_configs, determine_winner, effective_amount,
    format_ratio, parity_threshold, win_loss_ratio, win_share, BucketScheme, GasContext, Mode,
    Winner,
};
use decs::pipeline::{run, RunConfig};
use decs::primitives::{Address, U256};
use decs::reporting::{
    build_mart, emit_histogram, RecordStore, Scope, DEFAULT_HIST_BINS, DEFAULT_HIST_WINDOW,
    ROW_BASELINE, ROW_COMPETITORS, ROW_PARITY, ROW_TOTAL,
};
use decs::simulator::{swap_cpmm, ExecutionResult, Pool, SwapError};
use decs::stats::{
    indirect_compare, mann_whitney_u_test, proportion_z_from_share, welch_t_test, SampleGroup,
    Tail,
};
use decs_testkit::{abi_ref, comparators, fixtures, naive_stats, route_oracle};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Relative comparison with a one-unit absolute floor.
fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn assert_rel(a: f64, b: f64, tol: f64, what: &str) {
    assert!(rel_close(a, b, tol), "{what}: {a} vs {b} (tol {tol})");
}

#[test]
fn criterion_01_winner_and_threshold_match_brute_force() {
    let started = Instant::now();
    let grid = comparators::comparison_grid();
    assert!(grid.len() >= 10_000, "grid has only {} points", grid.len());
    let mut tiers_seen = std::collections::BTreeSet::new();
    for &(diff, volume) in &grid {
        let eps = parity_threshold(volume);
        tiers_seen.insert(eps.to_bits());
        assert_eq!(eps, comparators::brute_parity_threshold(volume), "threshold at {volume}");
        let winner = determine_winner(0.0, diff, eps);
        assert_eq!(winner, comparators::brute_winner(0.0, diff, eps), "winner at ({volume}, {diff})");
    }
    assert_eq!(tiers_seen.len(), 4, "grid must cross every draw-band tier");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!(
        "criterion 01 PASS: winner and threshold agree with brute force on {} grid points in {elapsed:?}",
        grid.len()
    );
}

#[test]
fn criterion_02_chain_lag_defaults_and_freshness_boundary() {
    let configs = default_chain_configs();
    let lag_of = |chain: u64| {
        configs.iter().find(|c| c.chain_id == chain).expect("shipped default").clone()
    };
    for (chain, expected_lag) in [(1u64, 4u64), (56, 16), (42161, 192), (137, 24)] {
        let cfg = lag_of(chain);
        assert_eq!(cfg.max_block_lag, expected_lag, "chain {chain} lag");
        let sim = 1_000u64;
        assert!(check_freshness(sim, sim, &cfg), "zero lag is fresh");
        assert!(check_freshness(sim + expected_lag, sim, &cfg), "lag X is fresh");
        assert!(!check_freshness(sim + expected_lag + 1, sim, &cfg), "lag X+1 is stale");
        assert!(!check_freshness(sim - 1, sim, &cfg), "mined before simulation is invalid");
    }
    println!("criterion 02 PASS: shipped lags (1:4, 56:16, 42161:192, 137:24) flip exactly at X vs X+1");
}

#[test]
fn criterion_03_effective_amount_worked_example() {
    // $2000 of output tokens, 120000 gas at 25 gwei with the native asset at
    // $3000: gas costs 120000 * 25e9 / 1e18 * 3000 = $9, leaving $1991.
    let result = ExecutionResult {
        actual_in: U256::from_u64(1),
        actual_out: U256::from_biguint(BigUint::from(2_000u32) * BigUint::from(10u32).pow(18))
            .unwrap(),
        gas_used: 120_000,
        reverted: false,
    };
    let gas = GasContext {
        gas_price: U256::from_u64(25_000_000_000),
        native_usd: 3_000.0,
        gas_price_unit: 1_000_000_000_000_000_000,
    };
    let classic = effective_amount(&result, 1.0, 18, &gas, Mode::Classic).unwrap();
    assert!((classic - 1_991.0).abs() <= 1e-9, "classic side: {classic}");

    // The incoming side of an intent comparison carries no gas term at all,
    // so the value is the exact output value.
    let intent = effective_amount(&result, 1.0, 18, &gas, Mode::Intent).unwrap();
    assert_eq!(intent, 2_000.0, "intent side must be gas-free");
    println!("criterion 03 PASS: effective amount 1991.00 (classic) / 2000.00 (intent) to 1e-9");
}

#[test]
fn criterion_04_win_loss_ratio_anchor() {
    let ratio = win_loss_ratio(378_547, 14_128).unwrap();
    assert!((ratio - 26.79).abs() <= 0.01, "ratio {ratio} not within 0.01 of 26.79");
    assert_eq!(format_ratio(ratio), "27x");
    println!("criterion 04 PASS: 378547/14128 = {ratio:.4} renders \"27x\"");
}

#[test]
fn criterion_05_proportion_z_anchor() {
    let n = 455_716u64;
    let share = 0.9458;
    let result = proportion_z_from_share(share, n, 0.5, Tail::Greater, 0.05).unwrap();

    // The implementation must match the closed form exactly.
    let expected = (share - 0.5) / (0.25f64 / n as f64).sqrt();
    assert_rel(result.statistic, expected, 1e-9, "z against closed form");

    // The published statistic, 601.8362, was computed from the unrounded
    // share; the share rounded to four decimals pins z only to within one
    // unit in its fourth significant figure (|dz/dshare| * 5e-5 ~ 0.068).
    // Agreement is therefore asserted at 0.1, one such unit; the actual gap
    // here is about 0.054.
    let anchor = 601.8362;
    assert!(
        (result.statistic - anchor).abs() <= 0.1,
        "z {} vs anchor {anchor}",
        result.statistic
    );
    assert!(result.significant);
    assert_eq!(result.p_display, "< 1e-6");
    println!(
        "criterion 05 PASS: z({share}, {n}) = {:.4}, anchor 601.8362 matched to one unit in the 4th significant figure",
        result.statistic
    );
}

/// Exact permutation p-value recomputed from raw values: relabel the pooled
/// sample every possible way and count pair-wise U statistics in the tail.
fn oracle_exact_mwu_p(g1: &[f64], g2: &[f64], tail: Tail) -> f64 {
    let observed = naive_stats::u_statistic(g1, g2);
    let pooled: Vec<f64> = g1.iter().chain(g2).copied().collect();
    let n = pooled.len();
    let k = g1.len();
    let mut hits = 0u64;
    let mut count = 0u64;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let a: Vec<f64> = idx.iter().map(|&i| pooled[i]).collect();
        let b: Vec<f64> = (0..n).filter(|i| !idx.contains(i)).map(|i| pooled[i]).collect();
        let u = naive_stats::u_statistic(&a, &b);
        let in_tail = match tail {
            Tail::Less => u <= observed + 1e-9,
            Tail::Greater => u >= observed - 1e-9,
        };
        if in_tail {
            hits += 1;
        }
        count += 1;
        let mut pos = k;
        let mut advanced = false;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < n - k + pos {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    hits as f64 / count as f64
}

/// Normal-approximation p-value with tie correction and continuity shift,
/// written against the Simpson-rule normal CDF.
fn oracle_approx_mwu_p(g1: &[f64], g2: &[f64], tail: Tail) -> f64 {
    let u = naive_stats::u_statistic(g1, g2);
    let (n1, n2) = (g1.len() as f64, g2.len() as f64);
    let n = n1 + n2;
    let mut sorted: Vec<f64> = g1.iter().chain(g2).copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mu = n1 * n2 / 2.0;
    let sigma2 = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if sigma2 <= 0.0 {
        return 0.5;
    }
    let sigma = sigma2.sqrt();
    match tail {
        Tail::Less => naive_stats::normal_cdf((u + 0.5 - mu) / sigma),
        Tail::Greater => 1.0 - naive_stats::normal_cdf((u - 0.5 - mu) / sigma),
    }
}

#[test]
fn criterion_06_statistics_match_naive_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5747);
    let tol = 1e-9;
    for case in 0..1_000 {
        let small = case % 5 == 0;
        let (lo, hi) = if small { (3, 7) } else { (12, 40) };
        let n1 = rng.gen_range(lo..=hi);
        let n2 = rng.gen_range(lo..=hi);
        // Half the samples live on a coarse lattice so ties are common.
        let lattice = case % 2 == 0;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let v: f64 = rng.gen_range(-5.0..5.0);
                    if lattice {
                        (v * 2.0).round() / 2.0
                    } else {
                        v
                    }
                })
                .collect()
        };
        let a = draw(n1);
        let b = draw(n2);
        let ga = SampleGroup::new("a", a.clone());
        let gb = SampleGroup::new("b", b.clone());
        let tail = if case % 3 == 0 { Tail::Greater } else { Tail::Less };

        let welch = welch_t_test(&ga, &gb, tail, 0.05).unwrap();
        let oracle = naive_stats::welch(&a, &b, 0.05);
        assert_rel(welch.statistic, oracle.t, tol, "welch t");
        assert_rel(welch.df.unwrap(), oracle.df, tol, "welch df");
        let oracle_p = match tail {
            Tail::Less => oracle.p_less,
            Tail::Greater => oracle.p_greater,
        };
        assert_rel(welch.p_value, oracle_p, tol, "welch one-tailed p");
        assert_rel(welch.cohens_d.unwrap(), oracle.cohens_d, tol, "cohen's d");
        for ((got, want), what) in [
            (welch.ci_g1.unwrap(), oracle.ci_g1),
            (welch.ci_g2.unwrap(), oracle.ci_g2),
            (welch.ci_diff.unwrap(), oracle.ci_diff),
        ]
        .iter()
        .zip(["ci g1", "ci g2", "ci diff"])
        {
            assert_rel(got.0, want.0, tol, what);
            assert_rel(got.1, want.1, tol, what);
        }

        let mwu = mann_whitney_u_test(&ga, &gb, tail, 0.05).unwrap();
        assert_rel(mwu.statistic, naive_stats::u_statistic(&a, &b), tol, "U statistic");
        let mwu_oracle_p = if n1 + n2 <= 20 {
            oracle_exact_mwu_p(&a, &b, tail)
        } else {
            oracle_approx_mwu_p(&a, &b, tail)
        };
        assert_rel(mwu.p_value, mwu_oracle_p, tol, "mwu p");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!("criterion 06 PASS: Welch, MWU, Cohen's d and CIs match naive oracles to 1e-9 over 1000 samples in {elapsed:?}");
}

#[test]
fn criterion_07_abi_round_trip_and_truncation() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xab1);
    let mut seen = std::collections::BTreeSet::new();
    for case in 0..10_000 {
        let sig = abi_ref::random_sig(&mut rng);
        let values = abi_ref::random_values(&mut rng, &sig);
        for p in &sig.params {
            seen.insert(kind_of(p));
        }
        let calldata = abi_ref::encode_call([0xde, 0xad, 0xbe, 0xef], &sig.params, &values);
        let decoded = abi_decode(&calldata, &sig).expect("reference encoding decodes");
        assert_eq!(decoded.values, values, "case {case} round-trip mismatch");
        assert_eq!(decoded.trailing_bytes, 0);

        // Every strict prefix is missing data the types require, so it must
        // come back as a typed error, never as a decoded value or a panic.
        if case % 5 == 0 {
            for _ in 0..8 {
                let cut = rng.gen_range(0..calldata.len());
                assert!(
                    abi_decode(&calldata[..cut], &sig).is_err(),
                    "case {case}: prefix of {cut} bytes decoded"
                );
            }
        }
    }
    // The generator must have exercised every supported type composition.
    for kind in ["uint256", "address", "bool", "fixed_bytes", "bytes", "array", "tuple"] {
        assert!(seen.contains(kind), "generator never produced {kind}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!("criterion 07 PASS: 10000 ABI round-trips exact, truncations only given typed errors, in {elapsed:?}");
}

fn kind_of(ty: &AbiType) -> &'static str {
    match ty {
        AbiType::Uint256 => "uint256",
        AbiType::Address => "address",
        AbiType::Bool => "bool",
        AbiType::FixedBytes(_) => "fixed_bytes",
        AbiType::Bytes => "bytes",
        AbiType::Array(_) => "array",
        AbiType::Tuple(_) => "tuple",
    }
}

#[test]
fn criterion_08_cpmm_properties() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc9);
    let random_big = |rng: &mut ChaCha8Rng, max_bytes: usize| -> BigUint {
        let len = rng.gen_range(1..=max_bytes);
        let mut bytes = vec![0u8; len];
        rng.fill(&mut bytes[..]);
        BigUint::from_bytes_be(&bytes) + 1_000u32
    };
    for case in 0..10_000 {
        let r_in = random_big(&mut rng, 12);
        let r_out = random_big(&mut rng, 12);
        let fee_ppm = if case % 2 == 0 { 0 } else { rng.gen_range(1..1_000_000) };
        let amount = random_big(&mut rng, 10);
        let pool = Pool {
            id: "p".into(),
            venue: "v".into(),
            token0: Address([1; 20]),
            token1: Address([2; 20]),
            reserve0: U256::from_biguint(r_in.clone()).unwrap(),
            reserve1: U256::from_biguint(r_out.clone()).unwrap(),
            fee_ppm,
            gas_per_swap: 1,
        };
        let amount_u = U256::from_biguint(amount.clone()).unwrap();

        // Independent arithmetic must agree exactly, fee or no fee. A quote
        // that floors to zero is refused with a typed error rather than
        // minting dust, so the oracle decides which outcome to demand.
        let oracle = route_oracle::ref_swap_out(&r_in, &r_out, fee_ppm, &amount);
        let swapped = swap_cpmm(&pool, &pool.token0.clone(), &amount_u);
        if oracle == BigUint::from(0u8) {
            assert_eq!(swapped.unwrap_err(), SwapError::OutputZero, "case {case} zero quote");
            continue;
        }
        let (out, updated) = swapped.unwrap();
        assert_eq!(out.biguint(), &oracle, "case {case} output");

        // Zero-fee k-conservation: the invariant never shrinks, and the
        // flooring excess stays below one output unit, i.e. below the new
        // input reserve.
        if fee_ppm == 0 {
            let k_before = &r_in * &r_out;
            let k_after = updated.reserve0.biguint() * updated.reserve1.biguint();
            assert!(k_after >= k_before, "case {case} k shrank");
            let new_in = &r_in + &amount;
            assert!(k_after - k_before < new_in, "case {case} flooring slack exceeds one unit");

            // Curvature: with the fee leg removed, flooring is the only
            // nonlinearity, and the discrete second difference along the
            // input axis stays within one unit of concave.
            let delta = (&amount >> 1) + 1u32;
            let mid = U256::from_biguint(&amount + &delta).unwrap();
            let far = U256::from_biguint(&amount + &delta + &delta).unwrap();
            let (out_mid, _) = swap_cpmm(&pool, &pool.token0.clone(), &mid).unwrap();
            let (out_far, _) = swap_cpmm(&pool, &pool.token0.clone(), &far).unwrap();
            assert!(
                out_far.biguint() + out.biguint() <= out_mid.biguint() * 2u32 + 1u32,
                "case {case} marginal rate increased"
            );
            // Monotonicity along the same three points.
            assert!(out_mid.biguint() >= out.biguint(), "case {case} not monotone");
            assert!(out_far.biguint() >= out_mid.biguint(), "case {case} not monotone");
        } else {
            // With a fee, monotonicity still holds for any increment.
            let bigger = U256::from_biguint(&amount + random_big(&mut rng, 6)).unwrap();
            let (out_bigger, _) = swap_cpmm(&pool, &pool.token0.clone(), &bigger).unwrap();
            assert!(out_bigger.biguint() >= out.biguint(), "case {case} not monotone under fee");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!("criterion 08 PASS: 10000 CPMM draws conserve k, stay monotone, and never steepen, in {elapsed:?}");
}

fn run_config(corpus: &fixtures::Corpus, mode: Mode, out: std::path::PathBuf) -> RunConfig {
    let mut config = RunConfig::new(
        mode,
        corpus.feed.to_str().unwrap(),
        corpus.pools.clone(),
        corpus.prices.clone(),
        corpus.registry.clone(),
        corpus.wallets.clone(),
        out,
    );
    config.chains = Some(corpus.chains.clone());
    config
}

#[test]
fn criterion_09_end_to_end_benchmark_matches_route_oracle() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures::write_classic_corpus(&dir.path().join("in"), 0x2025, 1_000).unwrap();

    // Analytic prediction first, from the exhaustive-route oracle, before
    // the pipeline touches anything.
    let predicted: Vec<f64> = corpus
        .amounts
        .iter()
        .map(|amount| corpus.oracle.predict_uplift(amount).expect("fixture routes").1)
        .collect();
    let predicted_mean = predicted.iter().sum::<f64>() / predicted.len() as f64;
    assert!(predicted_mean > 0.0, "fixture geometry must favor the baseline");

    let out = dir.path().join("out");
    let summary = run(&run_config(&corpus, Mode::Classic, out.clone())).unwrap();
    assert_eq!(summary.kept, 1_000);
    assert!(summary.conserves());

    let records = RecordStore::open(&out).unwrap().read_all().unwrap();
    assert_eq!(records.len(), 1_000);

    let mart = build_mart(&records, &Scope::default()).unwrap();
    let row = |label: &str| mart.rows.iter().find(|r| r.winner == label).unwrap().clone();
    let winner_sum =
        row(ROW_BASELINE).comparisons + row(ROW_PARITY).comparisons + row(ROW_COMPETITORS).comparisons;
    assert_eq!(winner_sum, 1_000, "winner counts must sum to the corpus size");
    assert_eq!(row(ROW_TOTAL).comparisons, 1_000);

    let share = win_share(&records);
    assert!(share >= 0.95, "win share {share} below 0.95");

    let mean_uplift =
        records.iter().map(|r| r.uplift_pct).sum::<f64>() / records.len() as f64;
    let rel_err = (mean_uplift - predicted_mean).abs() / predicted_mean;
    assert!(
        rel_err <= 0.20,
        "mean uplift {mean_uplift} vs predicted {predicted_mean} (rel err {rel_err})"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 09 PASS: 1000-swap run, win share {:.3}, mean uplift {:.4}% vs predicted {:.4}% (rel err {:.3}), in {elapsed:?}",
        share, mean_uplift, predicted_mean, rel_err
    );
}

#[test]
fn criterion_10_indirect_intent_comparison() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x13);
    // Two uplift-over-baseline distributions with a 0.13 percentage-point
    // gap and unit spread, at realistic group sizes.
    let base = Normal::new(0.50f64, 1.0).unwrap();
    let shifted = Normal::new(0.63f64, 1.0).unwrap();
    let a: Vec<f64> = (0..33_606).map(|_| base.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..78_991).map(|_| shifted.sample(&mut rng)).collect();

    let cmp = indirect_compare(
        &SampleGroup::new("fusion", a.clone()),
        &SampleGroup::new("uniswapx", b.clone()),
        5.0,
        0.05,
    )
    .unwrap();
    assert!(cmp.result.statistic < 0.0, "t should be negative, got {}", cmp.result.statistic);
    assert!(cmp.result.significant, "gap of 0.13 must be significant at these sizes");
    let (lo, hi) = cmp.result.ci_diff.unwrap();
    assert!(
        lo <= -0.13 && -0.13 <= hi,
        "difference CI ({lo}, {hi}) must bracket -0.13"
    );

    let same = indirect_compare(
        &SampleGroup::new("fusion", a.clone()),
        &SampleGroup::new("fusion-copy", a),
        5.0,
        0.05,
    )
    .unwrap();
    assert!(!same.result.significant, "identical samples must not be significant");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    println!(
        "criterion 10 PASS: injected -0.13 gap detected (t = {:.2}, CI brackets -0.13), identical groups non-significant, in {elapsed:?}",
        cmp.result.statistic
    );
}

#[test]
fn criterion_11_two_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures::write_classic_corpus(&dir.path().join("in"), 7, 300).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let summary_a = run(&run_config(&corpus, Mode::Classic, out_a.clone())).unwrap();
    let summary_b = run(&run_config(&corpus, Mode::Classic, out_b.clone())).unwrap();
    assert_eq!(summary_a, summary_b);

    for name in ["records.jsonl", "manifest.json", "records.csv", "drops.json"] {
        let left = std::fs::read(out_a.join(name)).unwrap();
        let right = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between runs");
    }

    let records_a = RecordStore::open(&out_a).unwrap().read_all().unwrap();
    let records_b = RecordStore::open(&out_b).unwrap().read_all().unwrap();
    let mart_a = serde_json::to_vec(&build_mart(&records_a, &Scope::default()).unwrap()).unwrap();
    let mart_b = serde_json::to_vec(&build_mart(&records_b, &Scope::default()).unwrap()).unwrap();
    assert_eq!(mart_a, mart_b, "marts differ");

    let hist_a = serde_json::to_vec(
        &emit_histogram(&records_a, &Scope::default(), DEFAULT_HIST_WINDOW, DEFAULT_HIST_BINS)
            .unwrap(),
    )
    .unwrap();
    let hist_b = serde_json::to_vec(
        &emit_histogram(&records_b, &Scope::default(), DEFAULT_HIST_WINDOW, DEFAULT_HIST_BINS)
            .unwrap(),
    )
    .unwrap();
    assert_eq!(hist_a, hist_b, "histograms differ");
    println!("criterion 11 PASS: stores, marts, and histograms byte-identical across two runs");
}

#[test]
fn criterion_12_conservation_audits_on_every_corpus() {
    let dir = tempfile::tempdir().unwrap();

    // Classic corpus with deliberate junk appended so the rejected lane is
    // exercised too.
    let classic = fixtures::write_classic_corpus(&dir.path().join("classic"), 3, 400).unwrap();
    let mut feed = std::fs::read_to_string(&classic.feed).unwrap();
    feed.push_str("not json at all\n{\"chain_id\": -1}\n");
    std::fs::write(&classic.feed, feed).unwrap();

    let intent = fixtures::write_intent_corpus(&dir.path().join("intent"), 4, 300).unwrap();

    let audits: Vec<(&fixtures::Corpus, Mode, u64)> =
        vec![(&classic, Mode::Classic, 402), (&intent, Mode::Intent, 300)];
    for (i, (corpus, mode, lines)) in audits.into_iter().enumerate() {
        let out = dir.path().join(format!("out-{i}"));
        let summary = run(&run_config(corpus, mode, out.clone())).unwrap();
        assert_eq!(summary.lines, lines);

        // Record partition: every input line lands in exactly one lane.
        assert!(summary.conserves(), "funnel accounting broke: {summary:?}");
        assert_eq!(summary.lines, summary.parsed + summary.rejected_total());

        let records = RecordStore::open(&out).unwrap().read_all().unwrap();
        assert_eq!(records.len() as u64, summary.kept);

        // Winner partition.
        let wins = records.iter().filter(|r| r.winner == Winner::Oneinch).count() as u64;
        let draws = records.iter().filter(|r| r.winner == Winner::Draw).count() as u64;
        let losses = records.iter().filter(|r| r.winner == Winner::Competitor).count() as u64;
        assert_eq!(wins + draws + losses, summary.kept);

        // Mart totals.
        let mart = build_mart(&records, &Scope::default()).unwrap();
        let row = |label: &str| mart.rows.iter().find(|r| r.winner == label).unwrap().clone();
        assert_eq!(
            row(ROW_BASELINE).comparisons + row(ROW_PARITY).comparisons
                + row(ROW_COMPETITORS).comparisons,
            records.len() as u64
        );
        let uplift_sum: f64 = records.iter().map(|r| r.uplift_usd).sum();
        assert!(
            (uplift_sum - mart.footer.total_uplift_usd).abs() <= 1e-6,
            "footer uplift {} vs record sum {uplift_sum}",
            mart.footer.total_uplift_usd
        );

        // Histogram totals.
        let hist =
            emit_histogram(&records, &Scope::default(), DEFAULT_HIST_WINDOW, DEFAULT_HIST_BINS)
                .unwrap();
        let binned: u64 = hist.counts.iter().sum();
        assert_eq!(binned + hist.overflow_low + hist.overflow_high, records.len() as u64);
        assert_eq!(hist.total, records.len() as u64);

        // Buckets partition the kept volume under the scheme the run used.
        let scheme = match mode {
            Mode::Classic => BucketScheme::Classic3,
            Mode::Intent => BucketScheme::Intent7,
        };
        for r in &records {
            assert_eq!(r.bucket, assign_bucket(r.v_in_usd, scheme));
        }
    }
    println!("criterion 12 PASS: record, winner, mart, and histogram conservation hold on classic and intent corpora");
}
