mod common;

use common::{nearest_distance, oracle_decode, oracle_table};
use posit_quant::posit::{
    decode_normalized, decode_posit, encode_normalized, encode_posit, PositCode, PositFormat,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every legal P(n, es) with n <= 10.
fn small_formats() -> Vec<PositFormat> {
    (2..=10)
        .flat_map(|n| (0..=3.min(n - 2)).map(move |es| PositFormat::new(n, es).unwrap()))
        .collect()
}

#[test]
fn decode_matches_oracle_exhaustively() {
    for f in small_formats() {
        for bits in 0..(1u32 << f.n()) {
            let code = PositCode::from_bits(bits, f).unwrap();
            match oracle_decode(bits, f.n(), f.es()) {
                Some(v) => assert_eq!(decode_posit(code).unwrap(), v, "{f} {code}"),
                None => assert!(decode_posit(code).is_err(), "{f} {code}"),
            }
        }
    }
}

#[test]
fn round_trip_is_exact() {
    for f in small_formats() {
        for code in f.codes() {
            let v = decode_posit(code).unwrap();
            assert_eq!(encode_posit(v, f).unwrap(), code, "{f} {code} = {v}");
        }
    }
}

#[test]
fn pattern_order_is_value_order() {
    for f in small_formats() {
        let mut codes: Vec<PositCode> = f.codes().collect();
        codes.sort_by_key(|c| c.to_signed());
        let values: Vec<f64> = codes.iter().map(|&c| decode_posit(c).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] < w[1]), "{f}");
    }
}

#[test]
fn negation_is_twos_complement() {
    for f in small_formats() {
        for code in f.codes().filter(|c| !c.is_zero()) {
            assert_eq!(
                decode_posit(code.negate()).unwrap(),
                -decode_posit(code).unwrap(),
                "{f} {code}"
            );
        }
    }
}

#[test]
fn encode_is_nearest_against_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for f in small_formats() {
        let table = oracle_table(f.n(), f.es());
        let max = f.maxpos();
        let scale = (f.useed_log2() * (f.n() as i32 - 2)) as f64;
        for i in 0..10_000 {
            // Half uniform over the range, half log-uniform in magnitude.
            let x = if i % 2 == 0 {
                rng.gen_range(-1.25 * max..=1.25 * max)
            } else {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * 2f64.powf(rng.gen_range(-scale - 2.0..=scale + 2.0))
            };
            let got = decode_posit(encode_posit(x, f).unwrap()).unwrap();
            let best = nearest_distance(&table, x);
            if x.abs() >= f.minpos() {
                assert_eq!((got - x).abs(), best, "{f}: x = {x}, got {got}");
            } else {
                assert_eq!(got, f.minpos().copysign(x), "{f}: x = {x}");
            }
        }
    }
}

#[test]
fn exact_midpoints_tie_to_even_patterns() {
    for f in small_formats() {
        let codes: Vec<PositCode> = f.codes().collect();
        for pair in codes.windows(2) {
            let (lo, hi) = (
                decode_posit(pair[0]).unwrap(),
                decode_posit(pair[1]).unwrap(),
            );
            if lo == 0.0 || hi == 0.0 {
                continue;
            }
            let mid = (lo + hi) / 2.0;
            let got = encode_posit(mid, f).unwrap();
            let even = if pair[0].bits() & 1 == 0 {
                pair[0]
            } else {
                pair[1]
            };
            assert_eq!(got, even, "{f}: midpoint {mid} of {lo} and {hi}");
        }
    }
}

#[test]
fn saturation_at_both_ends() {
    for f in small_formats() {
        for factor in [1.0, 1.5, 1e3, 1e200] {
            let x = f.maxpos() * factor;
            assert_eq!(
                decode_posit(encode_posit(x, f).unwrap()).unwrap(),
                f.maxpos()
            );
            assert_eq!(
                decode_posit(encode_posit(-x, f).unwrap()).unwrap(),
                -f.maxpos()
            );
        }
        for factor in [1.0, 0.75, 0.5, 1e-3, 1e-200] {
            let x = f.minpos() * factor;
            assert_eq!(
                decode_posit(encode_posit(x, f).unwrap()).unwrap(),
                f.minpos()
            );
            assert_eq!(
                decode_posit(encode_posit(-x, f).unwrap()).unwrap(),
                -f.minpos()
            );
        }
    }
}

#[test]
fn normalized_values_span_unit_interval() {
    for f in small_formats() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for code in f.codes() {
            let v = decode_normalized(code).unwrap();
            assert!((-1.0..=1.0).contains(&v));
            if !code.is_zero() {
                assert_eq!(decode_normalized(code.negate()).unwrap(), -v);
            }
            lo = lo.min(v);
            hi = hi.max(v);
            assert_eq!(encode_normalized(v, f).unwrap(), code);
        }
        assert_eq!((lo, hi), (-1.0, 1.0), "{f}");
    }
}

#[test]
fn wide_formats_round_trip_sampled_codes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, es) in [(16, 1), (16, 2), (24, 0), (32, 0), (32, 2), (32, 3)] {
        let f = PositFormat::new(n, es).unwrap();
        for _ in 0..20_000 {
            let bits = rng.gen::<u32>() >> (32 - n);
            let code = PositCode::from_bits(bits, f).unwrap();
            match oracle_decode(bits, n, es) {
                None => assert!(code.is_nar()),
                Some(v) => {
                    assert_eq!(decode_posit(code).unwrap(), v, "{f} {code}");
                    assert_eq!(encode_posit(v, f).unwrap(), code, "{f} {code}");
                }
            }
        }
    }
}

fn any_format() -> impl Strategy<Value = PositFormat> {
    (2u32..=32, 0u32..=3)
        .prop_filter("es fits", |&(n, es)| es <= n - 2)
        .prop_map(|(n, es)| PositFormat::new(n, es).unwrap())
}

proptest! {
    #[test]
    fn encode_is_monotone(f in any_format(), a in -1e12f64..1e12, b in -1e12f64..1e12) {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        let cx = encode_posit(x, f).unwrap();
        let cy = encode_posit(y, f).unwrap();
        prop_assert!(cx.to_signed() <= cy.to_signed());
    }

    #[test]
    fn encode_never_produces_nar(f in any_format(), x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let code = encode_posit(x, f).unwrap();
        prop_assert!(!code.is_nar());
        let v = decode_posit(code).unwrap();
        prop_assert_eq!(v == 0.0, x == 0.0);
        prop_assert!(v == 0.0 || v.signum() == x.signum());
    }

    #[test]
    fn decoded_values_are_fixed_points(f in any_format(), bits in any::<u32>()) {
        let code = PositCode::from_bits(bits >> (32 - f.n()), f).unwrap();
        prop_assume!(!code.is_nar());
        let v = decode_posit(code).unwrap();
        prop_assert_eq!(encode_posit(v, f).unwrap(), code);
        if let Some(d) = code.decompose().unwrap() {
            prop_assert!(d.exponent < (1 << f.es()));
            prop_assert!((0.0..1.0).contains(&d.fraction()));
            prop_assert_eq!(d.value(), v);
        }
    }
}
