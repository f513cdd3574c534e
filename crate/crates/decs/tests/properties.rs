//! Randomized invariant checks. Each property states something that must
//! hold for every input, not just the fixtures: codecs round-trip, pool
//! math preserves its invariant, and classification partitions its domain.

use decs::decoder::abi_decode;
use decs::ingest::{parse_record, serialize_record, IntentFill, RawTransaction, TxKind};
use decs::metrics::{assign_bucket, determine_winner, parity_threshold, BucketScheme, Winner};
use decs::primitives::{Address, TxHash, U256};
use decs::simulator::{swap_cpmm, Pool};
use decs::stats::percentile;
use decs_testkit::abi_ref;
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn address_strategy() -> impl Strategy<Value = Address> {
    any::<[u8; 20]>().prop_map(Address)
}

fn u256_strategy() -> impl Strategy<Value = U256> {
    proptest::collection::vec(any::<u8>(), 0..=32)
        .prop_map(|bytes| U256::from_be_bytes(&bytes).unwrap())
}

proptest! {
    #[test]
    fn abi_reference_encoding_decodes_back(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = abi_ref::random_sig(&mut rng);
        let values = abi_ref::random_values(&mut rng, &sig);
        let calldata = abi_ref::encode_call([0xab, 0xcd, 0xef, 0x01], &sig.params, &values);
        let decoded = abi_decode(&calldata, &sig).expect("reference encoding is canonical");
        prop_assert_eq!(decoded.values, values);
        prop_assert_eq!(decoded.trailing_bytes, 0);
    }

    #[test]
    fn abi_truncation_never_panics(seed in any::<u64>(), cut in 0usize..4096) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = abi_ref::random_sig(&mut rng);
        let values = abi_ref::random_values(&mut rng, &sig);
        let calldata = abi_ref::encode_call([0xab, 0xcd, 0xef, 0x01], &sig.params, &values);
        let cut = cut % calldata.len().max(1);
        // A typed result either way; panics and wrap-arounds are the bug class.
        let _ = abi_decode(&calldata[..cut], &sig);
    }

    #[test]
    fn cpmm_conserves_k_and_stays_monotone(
        r_in in 1_000u128..u128::MAX / 2,
        r_out in 1_000u128..u128::MAX / 2,
        fee_ppm in 0u32..1_000_000,
        amount in 1u128..u128::MAX / 4,
    ) {
        let pool = Pool {
            id: "p".into(),
            venue: "v".into(),
            token0: Address([1; 20]),
            token1: Address([2; 20]),
            reserve0: U256::from_u128(r_in),
            reserve1: U256::from_u128(r_out),
            fee_ppm,
            gas_per_swap: 1,
        };
        let (out, updated) = swap_cpmm(&pool, &pool.token0.clone(), &U256::from_u128(amount)).unwrap();

        // Output is bounded by the opposing reserve.
        prop_assert!(out.biguint() < pool.reserve1.biguint());

        // The invariant never decreases under floor division plus fees.
        let k_before = pool.reserve0.biguint() * pool.reserve1.biguint();
        let k_after = updated.reserve0.biguint() * updated.reserve1.biguint();
        prop_assert!(k_after >= k_before);

        // Reserves move by exactly the traded amounts.
        let expected_in = pool.reserve0.biguint() + BigUint::from(amount);
        prop_assert_eq!(updated.reserve0.biguint(), &expected_in);
        let expected_out = pool.reserve1.biguint() - out.biguint();
        prop_assert_eq!(updated.reserve1.biguint(), &expected_out);

        // Monotonicity: more input never yields less output.
        if amount + 1 < u128::MAX / 4 {
            let (out_bigger, _) =
                swap_cpmm(&pool, &pool.token0.clone(), &U256::from_u128(amount + 1)).unwrap();
            prop_assert!(out_bigger.biguint() >= out.biguint());
        }
    }

    #[test]
    fn feed_records_round_trip(
        chain_id in 1u64..100_000,
        hash in any::<[u8; 32]>(),
        sender in address_strategy(),
        recipient in address_strategy(),
        value in u256_strategy(),
        gas_price in u256_strategy(),
        gas_limit in any::<u64>(),
        calldata in proptest::collection::vec(any::<u8>(), 0..200),
        observed in any::<u64>(),
        mined_delta in proptest::option::of(0u64..1_000),
        intent in any::<bool>(),
        fill_amount in u256_strategy(),
    ) {
        let mined = mined_delta.map(|d| observed.saturating_add(d));
        let tx = RawTransaction {
            chain_id,
            tx_hash: TxHash(hash),
            sender,
            recipient,
            value,
            gas_price,
            gas_limit,
            calldata,
            observed_block: observed,
            mined_block: mined,
            kind: if intent { TxKind::IntentOrder } else { TxKind::Mempool },
            intent_fill: intent.then(|| IntentFill {
                src_token: sender,
                dst_token: recipient,
                amount_in: if fill_amount.is_zero() { U256::from_u64(1) } else { fill_amount.clone() },
                amount_out: fill_amount,
                fill_block: observed,
                protocol: "fusion".into(),
            }),
        };
        let line = serialize_record(&tx);
        let back = parse_record(line.as_bytes()).expect("own serialization parses");
        prop_assert_eq!(back, tx);
    }

    #[test]
    fn winner_partitions_every_input(
        volume in 0.01f64..10_000_000.0,
        a_in in -1_000.0f64..1_000.0,
        a_out in -1_000.0f64..1_000.0,
    ) {
        let epsilon = parity_threshold(volume);
        let diff = a_out - a_in;
        let winner = determine_winner(a_in, a_out, epsilon);
        match winner {
            Winner::Oneinch => prop_assert!(diff > epsilon),
            Winner::Draw => prop_assert!(diff.abs() <= epsilon),
            Winner::Competitor => prop_assert!(diff < -epsilon),
        }
    }

    #[test]
    fn every_volume_lands_in_exactly_one_bucket(volume in 0.0f64..100_000_000.0) {
        for scheme in [BucketScheme::Classic3, BucketScheme::Intent7, BucketScheme::Fine9] {
            let label = assign_bucket(volume, scheme);
            let labels = scheme.labels();
            prop_assert_eq!(labels.iter().filter(|l| **l == label).count(), 1);
        }
    }

    #[test]
    fn percentiles_are_monotone_in_q(mut values in proptest::collection::vec(-1e9f64..1e9, 1..200)) {
        let p25 = percentile(&values, 25.0).unwrap();
        let p50 = percentile(&values, 50.0).unwrap();
        let p75 = percentile(&values, 75.0).unwrap();
        prop_assert!(p25 <= p50 && p50 <= p75);
        values.sort_by(f64::total_cmp);
        prop_assert_eq!(percentile(&values, 0.0).unwrap(), values[0]);
        prop_assert_eq!(percentile(&values, 100.0).unwrap(), *values.last().unwrap());
    }
}
