//! Reference calldata encoder and random call generators.
//!
//! The encoder builds calldata forward (selector, head words, then tails in
//! parameter order) with nothing shared with the production decoder, which
//! parses backward from offsets. Round-tripping random calls through both is
//! the decoder's main correctness argument.

use decs::decoder::{AbiType, AbiValue, FunctionSig};
use decs::primitives::{Address, U256};
use rand::Rng;

/// Bytes a type occupies in the head section: one word per static scalar, a
/// word per tuple member, one offset word for anything dynamic.
fn head_bytes(ty: &AbiType) -> usize {
    match ty {
        AbiType::Tuple(members) => 32 * members.len(),
        _ => 32,
    }
}

fn is_dynamic(ty: &AbiType) -> bool {
    matches!(ty, AbiType::Bytes | AbiType::Array(_))
}

fn word_from_usize(v: usize) -> [u8; 32] {
    let mut word = [0u8; 32];
    word[24..].copy_from_slice(&(v as u64).to_be_bytes());
    word
}

fn encode_static(ty: &AbiType, value: &AbiValue, out: &mut Vec<u8>) {
    match (ty, value) {
        (AbiType::Uint256, AbiValue::Uint(v)) => out.extend_from_slice(&v.to_be_bytes32()),
        (AbiType::Address, AbiValue::Address(a)) => {
            out.extend_from_slice(&[0u8; 12]);
            out.extend_from_slice(&a.0);
        }
        (AbiType::Bool, AbiValue::Bool(b)) => {
            out.extend_from_slice(&[0u8; 31]);
            out.push(u8::from(*b));
        }
        (AbiType::FixedBytes(n), AbiValue::FixedBytes(bytes)) => {
            assert_eq!(bytes.len(), *n, "fixture bug: bytes{n} value of wrong width");
            out.extend_from_slice(bytes);
            out.extend(std::iter::repeat(0u8).take(32 - n));
        }
        (AbiType::Tuple(members), AbiValue::Tuple(values)) => {
            assert_eq!(members.len(), values.len());
            for (m, v) in members.iter().zip(values) {
                encode_static(m, v, out);
            }
        }
        (ty, value) => panic!("fixture bug: {value:?} does not fit {ty:?}"),
    }
}

fn encode_tail(ty: &AbiType, value: &AbiValue) -> Vec<u8> {
    let mut out = Vec::new();
    match (ty, value) {
        (AbiType::Bytes, AbiValue::Bytes(bytes)) => {
            out.extend_from_slice(&word_from_usize(bytes.len()));
            out.extend_from_slice(bytes);
            let pad = (32 - bytes.len() % 32) % 32;
            out.extend(std::iter::repeat(0u8).take(pad));
        }
        (AbiType::Array(elem), AbiValue::Array(values)) => {
            out.extend_from_slice(&word_from_usize(values.len()));
            for v in values {
                encode_static(elem, v, &mut out);
            }
        }
        (ty, value) => panic!("fixture bug: {value:?} is not a dynamic {ty:?}"),
    }
    out
}

/// Encodes an argument list: fixed-size head with offset words for dynamic
/// parameters, tails appended in parameter order, offsets measured from the
/// start of the argument area.
pub fn encode_args(params: &[AbiType], values: &[AbiValue]) -> Vec<u8> {
    assert_eq!(params.len(), values.len(), "fixture bug: arity mismatch");
    let head_len: usize = params.iter().map(head_bytes).sum();
    let mut head = Vec::with_capacity(head_len);
    let mut tail: Vec<u8> = Vec::new();
    for (ty, value) in params.iter().zip(values) {
        if is_dynamic(ty) {
            head.extend_from_slice(&word_from_usize(head_len + tail.len()));
            tail.extend(encode_tail(ty, value));
        } else {
            encode_static(ty, value, &mut head);
        }
    }
    debug_assert_eq!(head.len(), head_len);
    head.extend(tail);
    head
}

/// Full calldata: selector then arguments.
pub fn encode_call(selector: [u8; 4], params: &[AbiType], values: &[AbiValue]) -> Vec<u8> {
    let mut out = selector.to_vec();
    out.extend(encode_args(params, values));
    out
}

/// Random static scalar type.
pub fn random_scalar_type<R: Rng>(rng: &mut R) -> AbiType {
    match rng.gen_range(0..4) {
        0 => AbiType::Uint256,
        1 => AbiType::Address,
        2 => AbiType::Bool,
        _ => AbiType::FixedBytes(rng.gen_range(1..=32)),
    }
}

/// Random supported type, composites included.
pub fn random_type<R: Rng>(rng: &mut R) -> AbiType {
    match rng.gen_range(0..7) {
        0 => AbiType::Uint256,
        1 => AbiType::Address,
        2 => AbiType::Bool,
        3 => AbiType::FixedBytes(rng.gen_range(1..=32)),
        4 => AbiType::Bytes,
        5 => AbiType::Array(Box::new(random_scalar_type(rng))),
        _ => {
            let n = rng.gen_range(1..=4);
            AbiType::Tuple((0..n).map(|_| random_scalar_type(rng)).collect())
        }
    }
}

/// Random value inhabiting `ty`.
pub fn random_value<R: Rng>(rng: &mut R, ty: &AbiType) -> AbiValue {
    match ty {
        AbiType::Uint256 => {
            // Bias toward interesting widths: small, mid, and full 32 bytes.
            let len = rng.gen_range(0..=32);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            AbiValue::Uint(U256::from_be_bytes(&bytes).expect("at most 32 bytes"))
        }
        AbiType::Address => {
            let mut a = [0u8; 20];
            rng.fill(&mut a[..]);
            AbiValue::Address(Address(a))
        }
        AbiType::Bool => AbiValue::Bool(rng.gen()),
        AbiType::FixedBytes(n) => {
            AbiValue::FixedBytes((0..*n).map(|_| rng.gen()).collect())
        }
        AbiType::Bytes => {
            let len = rng.gen_range(0..=96);
            AbiValue::Bytes((0..len).map(|_| rng.gen()).collect())
        }
        AbiType::Array(elem) => {
            let len = rng.gen_range(0..=6);
            AbiValue::Array((0..len).map(|_| random_value(rng, elem)).collect())
        }
        AbiType::Tuple(members) => {
            AbiValue::Tuple(members.iter().map(|m| random_value(rng, m)).collect())
        }
    }
}

/// Random function signature over supported types, 1 to 6 parameters. No
/// swap semantics attached; round-trip tests exercise the decoder layer only.
pub fn random_sig<R: Rng>(rng: &mut R) -> FunctionSig {
    let n = rng.gen_range(1..=6);
    FunctionSig {
        name: "fuzz".to_string(),
        protocol: "fuzz".to_string(),
        params: (0..n).map(|_| random_type(rng)).collect(),
        semantics: Default::default(),
        exact_output: false,
    }
}

/// Random values matching a signature.
pub fn random_values<R: Rng>(rng: &mut R, sig: &FunctionSig) -> Vec<AbiValue> {
    sig.params.iter().map(|t| random_value(rng, t)).collect()
}
