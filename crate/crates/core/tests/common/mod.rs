//! Test-only oracles, independent of the library's codec implementation.
#![allow(dead_code)]

use std::path::PathBuf;

/// Decodes a posit by walking its bits as characters: sign, regime run,
/// exponent, fraction. `None` for NaR.
pub fn oracle_decode(bits: u32, n: u32, es: u32) -> Option<f64> {
    let mut s: Vec<char> = (0..n)
        .rev()
        .map(|i| if (bits >> i) & 1 == 1 { '1' } else { '0' })
        .collect();
    if s.iter().all(|&c| c == '0') {
        return Some(0.0);
    }
    if s[0] == '1' && s[1..].iter().all(|&c| c == '0') {
        return None;
    }

    // (i) sign; negative patterns are read through their two's complement.
    let negative = s[0] == '1';
    if negative {
        for c in s.iter_mut() {
            *c = if *c == '0' { '1' } else { '0' };
        }
        for c in s.iter_mut().rev() {
            if *c == '0' {
                *c = '1';
                break;
            }
            *c = '0';
        }
    }
    let rest: Vec<char> = s[1..].to_vec();

    // (ii) regime: count identical bits until the opposite bit.
    let first = rest[0];
    let run = rest.iter().take_while(|&&c| c == first).count();
    let r_value = if first == '1' {
        run as i32 - 1
    } else {
        -(run as i32)
    };
    let mut pos = run + 1; // skip the terminator

    // (iii) exponent: unsigned integer of the next es bits (missing bits are 0).
    let mut exponent = 0u32;
    for _ in 0..es {
        exponent <<= 1;
        if pos < rest.len() && rest[pos] == '1' {
            exponent |= 1;
        }
        pos += 1;
    }

    // (iv) fraction: the remaining bits after the binary point.
    let mut fraction = 0.0;
    let mut weight = 0.5;
    while pos < rest.len() {
        if rest[pos] == '1' {
            fraction += weight;
        }
        weight /= 2.0;
        pos += 1;
    }

    let useed = 2f64.powi(1 << es);
    let value = useed.powi(r_value) * 2f64.powi(exponent as i32) * (1.0 + fraction);
    Some(if negative { -value } else { value })
}

/// All real posit values of P(n, es) with their patterns, ascending.
pub fn oracle_table(n: u32, es: u32) -> Vec<(f64, u32)> {
    let mut table: Vec<(f64, u32)> = (0..(1u64 << n))
        .filter_map(|b| oracle_decode(b as u32, n, es).map(|v| (v, b as u32)))
        .collect();
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    table
}

/// Distance from `x` to the nearest table entry, by exhaustive scan.
pub fn nearest_distance(table: &[(f64, u32)], x: f64) -> f64 {
    table
        .iter()
        .map(|&(v, _)| (v - x).abs())
        .fold(f64::INFINITY, f64::min)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}
