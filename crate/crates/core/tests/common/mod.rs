//! Reference implementations in plain `f64`, written independently of the
//! crate's lookup tables and step-unit arithmetic.

#![allow(dead_code)]

use asbound::quantizer::{LevelIndex, Quantizer};

/// `-ln tanh(x/2)` written as `ln((1 + e^-x)/(1 - e^-x))`; `zero` at `x = 0`.
pub fn ref_phi(x: f64, zero: f64) -> f64 {
    if x <= 0.0 {
        return zero;
    }
    let e = (-x).exp();
    e.ln_1p() - (-e).ln_1p()
}

/// Nearest level, ties to the lower one, saturating at both ends.
pub fn ref_quantize(levels: &[f64], x: f64) -> f64 {
    let mut best = levels[0];
    for &l in levels {
        if (x - l).abs() < (x - best).abs() {
            best = l;
        }
    }
    best
}

fn signed_output(levels: &[f64], negative: bool, magnitude: f64) -> f64 {
    if negative {
        ref_quantize(levels, -magnitude)
    } else {
        magnitude
    }
}

pub fn ref_msa(levels: &[f64], incoming: &[f64]) -> f64 {
    let top = *levels.last().unwrap();
    if incoming.is_empty() {
        return top;
    }
    let negative = incoming.iter().filter(|&&x| x < 0.0).count() % 2 == 1;
    let min = incoming.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    signed_output(levels, negative, ref_quantize(levels, min))
}

pub fn ref_spa(levels: &[f64], phi_zero: f64, incoming: &[f64]) -> f64 {
    let top = *levels.last().unwrap();
    if incoming.is_empty() {
        return top;
    }
    let negative = incoming.iter().filter(|&&x| x < 0.0).count() % 2 == 1;
    let sum: f64 = incoming
        .iter()
        .map(|&x| ref_quantize(levels, ref_phi(x.abs(), phi_zero)))
        .sum();
    let magnitude = ref_quantize(levels, ref_phi(ref_quantize(levels, sum), phi_zero));
    signed_output(levels, negative, magnitude)
}

pub fn index_of(q: &Quantizer, value: f64) -> LevelIndex {
    q.levels().iter().position(|&l| l == value).expect("value is a level") as LevelIndex
}

/// Naive flooding decoder on a parity-check list. Returns `(converged, iterations, bits)`.
pub fn ref_decode(
    levels: &[f64],
    spa: Option<f64>,
    n: usize,
    checks: &[Vec<u32>],
    channel: &[f64],
    max_iterations: usize,
) -> (bool, usize, Vec<u8>) {
    ref_decode_with_aux(levels, spa, n, checks, channel, max_iterations, |_, _| None)
}

/// As [`ref_decode`], with `aux(iteration, check)` feeding an extra input into a check.
pub fn ref_decode_with_aux(
    levels: &[f64],
    spa: Option<f64>,
    n: usize,
    checks: &[Vec<u32>],
    channel: &[f64],
    max_iterations: usize,
    aux: impl Fn(usize, usize) -> Option<f64>,
) -> (bool, usize, Vec<u8>) {
    let top = *levels.last().unwrap();
    let update = |inc: &[f64]| match spa {
        Some(z) => ref_spa(levels, z, inc),
        None => ref_msa(levels, inc),
    };
    let mut v2c: Vec<Vec<f64>> = checks
        .iter()
        .map(|c| c.iter().map(|&v| channel[v as usize]).collect())
        .collect();
    let mut bits = vec![0u8; n];
    for iteration in 1..=max_iterations {
        let mut c2v: Vec<Vec<f64>> = Vec::with_capacity(checks.len());
        let mut totals: Vec<f64> = channel.to_vec();
        for (j, c) in checks.iter().enumerate() {
            let extra = aux(iteration, j);
            let row: Vec<f64> = (0..c.len())
                .map(|k| {
                    let mut others: Vec<f64> = (0..c.len()).filter(|&o| o != k).map(|o| v2c[j][o]).collect();
                    others.extend(extra);
                    if others.is_empty() {
                        return top;
                    }
                    update(&others)
                })
                .collect();
            for (k, &v) in c.iter().enumerate() {
                totals[v as usize] += row[k];
            }
            c2v.push(row);
        }
        bits = totals.iter().map(|&t| u8::from(t <= 0.0)).collect();
        let ok = checks
            .iter()
            .all(|c| c.iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == 0);
        if ok {
            return (true, iteration, bits);
        }
        for (j, c) in checks.iter().enumerate() {
            for (k, &v) in c.iter().enumerate() {
                v2c[j][k] = ref_quantize(levels, totals[v as usize] - c2v[j][k]);
            }
        }
    }
    (false, max_iterations, bits)
}
