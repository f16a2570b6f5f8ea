//! Quantized check-node and variable-node updates.
//!
//! Messages are level indices. All arithmetic on level values is done on exact
//! integers in units of the quantizer step, with `Q` applied only where the
//! update rules call for it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{LevelIndex, Quantizer, QuantizerSpec};

/// Check-node rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Quantized sum-product with table-driven `Φ1`/`Φ2`.
    Spa,
    /// Min-sum.
    Msa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Spa => "spa",
            Algorithm::Msa => "msa",
        }
    }
}

/// `Φ(x) = log((e^x + 1)/(e^x − 1))`, evaluated as `ln(1 + 2/(e^x − 1))`.
///
/// Returns `+∞` for `x <= 0`; decoders substitute their configured `Φ(0)`.
pub fn phi(x: f64) -> f64 {
    if x > 0.0 {
        (2.0 / x.exp_m1()).ln_1p()
    } else {
        f64::INFINITY
    }
}

// Largest sum range covered by the quantization lookup table.
const LUT_LIMIT: i64 = 1 << 20;

/// Precomputed per-level tables for one (quantizer, algorithm, Φ(0)) triple.
#[derive(Clone, Debug)]
pub struct MessageKernel {
    algorithm: Algorithm,
    quantizer: Quantizer,
    phi_zero: f64,
    values: Vec<i64>,
    negative: Vec<bool>,
    abs_index: Vec<LevelIndex>,
    neg_of: Vec<LevelIndex>,
    phi1: Vec<i64>,
    phi2: Vec<LevelIndex>,
    lut_lo: i64,
    lut: Vec<LevelIndex>,
}

impl MessageKernel {
    /// `max_degree` bounds the number of terms in a variable-node sum and only
    /// sizes the quantization lookup table.
    pub fn new(algorithm: Algorithm, spec: &QuantizerSpec, phi_zero: f64, max_degree: usize) -> Result<Self> {
        if !(phi_zero.is_finite() && phi_zero > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "phi_zero must be positive, got {phi_zero}"
            )));
        }
        let quantizer = spec.build()?;
        let values: Vec<i64> = quantizer.all_units().to_vec();
        let negative: Vec<bool> = values.iter().map(|&v| v < 0).collect();
        let abs_index: Vec<LevelIndex> = values.iter().map(|&v| quantizer.quantize_units(v.abs())).collect();
        let neg_of: Vec<LevelIndex> = values.iter().map(|&v| quantizer.quantize_units(-v)).collect();
        let phi_at = |magnitude: f64| {
            if magnitude > 0.0 {
                phi(magnitude)
            } else {
                phi_zero
            }
        };
        let phi1: Vec<i64> = quantizer
            .levels()
            .iter()
            .map(|&l| quantizer.units(quantizer.quantize(phi_at(l.abs()))))
            .collect();
        let phi2: Vec<LevelIndex> = quantizer
            .levels()
            .iter()
            .map(|&l| quantizer.quantize(phi_at(l.max(0.0))))
            .collect();
        let max_abs = values.iter().map(|v| v.abs()).max().unwrap_or(0);
        let reach = max_abs.saturating_mul(max_degree as i64 + 1).min(LUT_LIMIT);
        let lut_lo = -reach;
        let lut = (-reach..=reach).map(|v| quantizer.quantize_units(v)).collect();
        Ok(MessageKernel {
            algorithm,
            quantizer,
            phi_zero,
            values,
            negative,
            abs_index,
            neg_of,
            phi1,
            phi2,
            lut_lo,
            lut,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn phi_zero(&self) -> f64 {
        self.phi_zero
    }

    /// `Φ` with the configured `Φ(0)` substituted at zero.
    pub fn phi_with_zero(&self, x: f64) -> f64 {
        if x > 0.0 {
            phi(x)
        } else {
            self.phi_zero
        }
    }

    #[inline]
    pub fn value_units(&self, k: LevelIndex) -> i64 {
        self.values[k as usize]
    }

    #[inline]
    pub(crate) fn is_negative(&self, k: LevelIndex) -> bool {
        self.negative[k as usize]
    }

    /// `Q(|ℓ_k|)` as a nonnegative level index.
    #[inline]
    pub(crate) fn abs_index(&self, k: LevelIndex) -> LevelIndex {
        self.abs_index[k as usize]
    }

    /// Applies a sign to a nonnegative level index.
    #[inline]
    pub(crate) fn signed(&self, magnitude: LevelIndex, negative: bool) -> LevelIndex {
        if negative {
            self.neg_of[magnitude as usize]
        } else {
            magnitude
        }
    }

    /// `Φ1(|ℓ_k|) = Q(Φ(|ℓ_k|))` in step units. A quantized sum of zero maps
    /// back through `Φ(0)` in `Φ2`.
    #[inline]
    pub fn phi1_units(&self, k: LevelIndex) -> i64 {
        self.phi1[k as usize]
    }

    /// `Φ2(s) = Q(Φ(Q(s)))` for a sum given in step units, as a magnitude level index.
    #[inline]
    pub fn phi2_of_sum(&self, sum_units: i64) -> LevelIndex {
        self.phi2[self.quantize_units(sum_units) as usize]
    }

    #[inline]
    pub fn quantize_units(&self, v: i64) -> LevelIndex {
        let off = v.wrapping_sub(self.lut_lo);
        if off >= 0 && (off as usize) < self.lut.len() {
            self.lut[off as usize]
        } else {
            self.quantizer.quantize_units(v)
        }
    }

    /// Saturated positive message, used when a check has no other inputs.
    #[inline]
    pub(crate) fn saturated(&self) -> LevelIndex {
        self.quantizer.max_index()
    }

    /// Min-sum check rule over the incoming messages (target edge already excluded).
    pub fn msa_check_update(&self, incoming: &[LevelIndex]) -> LevelIndex {
        if incoming.is_empty() {
            return self.saturated();
        }
        let mut negative = false;
        let mut magnitude = LevelIndex::MAX;
        for &m in incoming {
            negative ^= self.is_negative(m);
            magnitude = magnitude.min(self.abs_index(m));
        }
        self.signed(magnitude, negative)
    }

    /// Quantized sum-product check rule over the incoming messages.
    pub fn spa_check_update(&self, incoming: &[LevelIndex]) -> LevelIndex {
        if incoming.is_empty() {
            return self.saturated();
        }
        let mut negative = false;
        let mut sum = 0i64;
        for &m in incoming {
            negative ^= self.is_negative(m);
            sum += self.phi1_units(m);
        }
        self.signed(self.phi2_of_sum(sum), negative)
    }

    pub fn check_update(&self, incoming: &[LevelIndex]) -> LevelIndex {
        match self.algorithm {
            Algorithm::Spa => self.spa_check_update(incoming),
            Algorithm::Msa => self.msa_check_update(incoming),
        }
    }

    /// `Q(r_i + Σ C_{j'→i})` with the sum formed exactly.
    pub fn variable_update(&self, channel: LevelIndex, incoming: &[LevelIndex]) -> LevelIndex {
        self.quantize_units(self.total_units(channel, incoming))
    }

    /// Bit estimate: 0 iff `r_i + Σ C_{j'→i} > 0`, using the exact sum.
    pub fn hard_decision(&self, channel: LevelIndex, incoming: &[LevelIndex]) -> u8 {
        u8::from(self.total_units(channel, incoming) <= 0)
    }

    fn total_units(&self, channel: LevelIndex, incoming: &[LevelIndex]) -> i64 {
        incoming
            .iter()
            .fold(self.value_units(channel), |acc, &m| acc + self.value_units(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernel(algorithm: Algorithm) -> MessageKernel {
        MessageKernel::new(algorithm, &QuantizerSpec::uniform(3, 2), 4.25, 16).unwrap()
    }

    fn idx(k: &MessageKernel, x: f64) -> LevelIndex {
        let i = k.quantizer().quantize(x);
        assert_eq!(k.quantizer().level(i), x, "{x} is not a level");
        i
    }

    fn val(k: &MessageKernel, i: LevelIndex) -> f64 {
        k.quantizer().level(i)
    }

    #[test]
    fn phi_identities() {
        assert!((phi(phi(1.0)) - 1.0).abs() < 1e-9);
        assert!((phi(3f64.ln()) - 2f64.ln()).abs() < 1e-15);
        assert!(phi(0.0).is_infinite());
        assert!(phi(40.0) > 0.0);
        let k = kernel(Algorithm::Spa);
        assert_eq!(k.phi_with_zero(0.0), 4.25);
    }

    #[test]
    fn phi_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let v = phi(i as f64 * 0.05);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn msa_examples() {
        let k = kernel(Algorithm::Msa);
        let out = k.msa_check_update(&[idx(&k, 2.0), idx(&k, -3.0), idx(&k, 1.0)]);
        assert_eq!(val(&k, out), -1.0);
        let top = k.quantizer().max_index();
        assert_eq!(k.msa_check_update(&[top, top]), top);
        // -8 has no positive mirror; the magnitude saturates at 7.75
        let bottom = k.quantizer().min_index();
        assert_eq!(val(&k, k.msa_check_update(&[bottom, bottom])), 7.75);
    }

    #[test]
    fn spa_examples() {
        let k = kernel(Algorithm::Spa);
        let top = k.quantizer().max_index();
        // Φ1(7.75) = Q(0.00086) = 0, so the sum quantizes to 0 and Φ2 returns Φ(0)
        assert_eq!(k.phi1_units(top), 0);
        assert_eq!(val(&k, k.spa_check_update(&[top])), 4.25);
        assert_eq!(val(&k, k.spa_check_update(&[top, top, top])), 4.25);
        // Φ1(0.25) = Q(2.0782) = 2.0 and Φ(2.0) = 0.2658 rounds to 0.25
        let small = idx(&k, 0.25);
        assert_eq!(val(&k, k.spa_check_update(&[small, top])), 0.25);
        let out = k.spa_check_update(&[idx(&k, 1.0), idx(&k, -2.0), idx(&k, 3.0)]);
        assert!(val(&k, out) < 0.0);
        // a zero-valued input contributes Q(Φ(0)) = 4.25 and Φ(4.25) rounds to 0
        let z = idx(&k, 0.0);
        assert_eq!(val(&k, k.spa_check_update(&[z, top, top])), 0.0);
    }

    #[test]
    fn variable_and_hard_decision_examples() {
        let k = kernel(Algorithm::Msa);
        let r = idx(&k, 0.25);
        assert_eq!(k.variable_update(r, &[]), r);
        let out = k.variable_update(r, &[idx(&k, 0.5), idx(&k, -0.25)]);
        assert_eq!(val(&k, out), 0.5);
        let top = k.quantizer().max_index();
        assert_eq!(k.variable_update(top, &[top, top]), top);
        assert_eq!(k.hard_decision(top, &[]), 0);
        assert_eq!(k.hard_decision(idx(&k, 0.5), &[idx(&k, -0.5)]), 1);
        assert_eq!(k.hard_decision(idx(&k, -0.25), &[idx(&k, 0.5)]), 0);
    }

    #[test]
    fn tables_match_on_the_fly_evaluation() {
        for spec in [QuantizerSpec::uniform(3, 2), QuantizerSpec::quasi_uniform(2, 1)] {
            let k = MessageKernel::new(Algorithm::Spa, &spec, 4.25, 8).unwrap();
            let q = k.quantizer();
            for i in 0..q.len() as LevelIndex {
                let m = q.level(i).abs();
                let direct = q.quantize(k.phi_with_zero(m));
                assert_eq!(k.phi1_units(i), q.units(direct));
            }
            for s in 0..(4 * q.units(q.max_index())) {
                let qs = q.level(q.quantize_units(s));
                let direct = q.quantize(k.phi_with_zero(qs));
                assert_eq!(k.phi2_of_sum(s), direct);
            }
            for v in -20_000i64..20_000 {
                assert_eq!(k.quantize_units(v), q.quantize_units(v));
            }
        }
    }

    proptest! {
        #[test]
        fn check_outputs_are_levels_and_signs_agree(msgs in proptest::collection::vec(0u16..64, 1..8)) {
            let spa = kernel(Algorithm::Spa);
            let msa = kernel(Algorithm::Msa);
            let a = spa.spa_check_update(&msgs);
            let b = msa.msa_check_update(&msgs);
            prop_assert!((a as usize) < 64 && (b as usize) < 64);
            let odd = msgs.iter().filter(|&&m| spa.is_negative(m)).count() % 2 == 1;
            // a zero magnitude carries no sign
            prop_assert!(spa.is_negative(a) == odd || spa.value_units(a) == 0);
            prop_assert!(msa.is_negative(b) == odd || msa.value_units(b) == 0);
        }

        #[test]
        fn msa_is_odd_in_sign(msgs in proptest::collection::vec(1u16..64, 1..6)) {
            // inputs drawn from the symmetric part of the level set
            let k = kernel(Algorithm::Msa);
            let neg: Vec<LevelIndex> = msgs.iter().map(|&m| k.signed(m, true)).collect();
            let flipped = neg.len() % 2 == 1;
            let a = k.msa_check_update(&msgs);
            let b = k.msa_check_update(&neg);
            prop_assert_eq!(k.value_units(a) * if flipped { -1 } else { 1 }, k.value_units(b));
        }
    }
}
