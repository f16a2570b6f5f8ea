//! Uniform and quasi-uniform LLR quantizers and the AWGN channel model.
//!
//! Level values are kept as exact integers in units of the step size `delta`
//! (a power of two), so every sum formed by the decoder is exact and the only
//! rounding happens in [`Quantizer::quantize_units`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-based position in a quantizer's ascending level table (`ℓ_1` is index 0).
pub type LevelIndex = u16;

const MAX_BITS: u32 = 12;
const MAX_UNITS: i64 = 1 << 50;

fn default_growth() -> f64 {
    2.0
}

/// Structured description of a quantizer, as it appears in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuantizerSpec {
    /// `Q_{q1.q2}`: `q1` integer bits, `q2` fractional bits, one sign bit.
    Uniform { q1: u32, q2: u32 },
    /// A `Q_{q1.q2}` inner quantizer plus `ext_count` exponentially spaced
    /// magnitudes per sign. `ext_count` defaults to half the inner level count.
    QuasiUniform {
        q1: u32,
        q2: u32,
        #[serde(default = "default_growth")]
        growth: f64,
        #[serde(default)]
        ext_count: Option<usize>,
    },
}

impl QuantizerSpec {
    pub fn uniform(q1: u32, q2: u32) -> Self {
        QuantizerSpec::Uniform { q1, q2 }
    }

    pub fn quasi_uniform(q1: u32, q2: u32) -> Self {
        QuantizerSpec::QuasiUniform {
            q1,
            q2,
            growth: default_growth(),
            ext_count: None,
        }
    }

    /// Stable one-line rendering used for digests and file headers.
    pub fn canonical(&self) -> String {
        match self {
            QuantizerSpec::Uniform { q1, q2 } => format!("uniform q1={q1} q2={q2}"),
            QuantizerSpec::QuasiUniform {
                q1,
                q2,
                growth,
                ext_count,
            } => {
                let ext = ext_count.unwrap_or(1usize << (q1 + q2));
                format!("quasi-uniform q1={q1} q2={q2} growth={growth:?} ext={ext}")
            }
        }
    }

    pub fn build(&self) -> Result<Quantizer> {
        Quantizer::new(self.clone())
    }
}

/// A validated quantizer with its level and threshold tables.
#[derive(Clone, Debug)]
pub struct Quantizer {
    spec: QuantizerSpec,
    delta: f64,
    units: Vec<i64>,
    levels: Vec<f64>,
    thresholds: Vec<f64>,
    // b_k in units of delta/2, i.e. units[k] + units[k+1]
    half_thresholds: Vec<i64>,
}

fn uniform_units(q1: u32, q2: u32) -> Result<Vec<i64>> {
    let bits = q1 + q2 + 1;
    if bits > MAX_BITS {
        return Err(Error::Quantizer(format!(
            "{bits}-bit quantizer exceeds the supported {MAX_BITS} bits"
        )));
    }
    let half = 1i64 << (q1 + q2);
    Ok((-half..half).collect())
}

impl Quantizer {
    pub fn new(spec: QuantizerSpec) -> Result<Self> {
        let (units, q2) = match &spec {
            QuantizerSpec::Uniform { q1, q2 } => (uniform_units(*q1, *q2)?, *q2),
            QuantizerSpec::QuasiUniform {
                q1,
                q2,
                growth,
                ext_count,
            } => {
                let inner = uniform_units(*q1, *q2)?;
                let ext = ext_count.unwrap_or(inner.len() / 2);
                if ext > inner.len() / 2 {
                    return Err(Error::Quantizer(format!(
                        "{ext} extended levels per sign do not fit in one extra bit"
                    )));
                }
                if !(growth.is_finite() && *growth > 1.0) {
                    return Err(Error::Quantizer(format!("growth factor {growth} must be > 1")));
                }
                let inner_max = *inner.last().expect("nonempty level table");
                let inner_min = inner[0];
                let mut mags = Vec::with_capacity(ext);
                for j in 1..=ext {
                    let m = (inner_max as f64 * growth.powi(j as i32)).round();
                    if m.is_nan() || m >= MAX_UNITS as f64 {
                        return Err(Error::Quantizer(format!(
                            "extended level {j} overflows the level range"
                        )));
                    }
                    let m = m as i64;
                    let floor = mags.last().copied().unwrap_or(inner_max.max(-inner_min));
                    if m <= floor {
                        return Err(Error::Quantizer(format!(
                            "extended magnitude {m} (units) is not above {floor}; increase growth or q"
                        )));
                    }
                    mags.push(m);
                }
                let mut units: Vec<i64> = mags.iter().rev().map(|m| -m).collect();
                units.extend_from_slice(&inner);
                units.extend_from_slice(&mags);
                (units, *q2)
            }
        };
        let delta = (-(q2 as f64)).exp2();
        let levels: Vec<f64> = units.iter().map(|&u| u as f64 * delta).collect();
        let half_thresholds: Vec<i64> = units.windows(2).map(|w| w[0] + w[1]).collect();
        let thresholds: Vec<f64> = half_thresholds.iter().map(|&h| h as f64 * delta / 2.0).collect();
        Ok(Quantizer {
            spec,
            delta,
            units,
            levels,
            thresholds,
            half_thresholds,
        })
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    /// Number of levels `t`.
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn level(&self, k: LevelIndex) -> f64 {
        self.levels[k as usize]
    }

    /// Level value in units of `delta`.
    pub fn units(&self, k: LevelIndex) -> i64 {
        self.units[k as usize]
    }

    pub fn all_units(&self) -> &[i64] {
        &self.units
    }

    pub fn min_index(&self) -> LevelIndex {
        0
    }

    pub fn max_index(&self) -> LevelIndex {
        (self.units.len() - 1) as LevelIndex
    }

    /// Index of the 0.0 level, when the level set contains it.
    pub fn zero_index(&self) -> Option<LevelIndex> {
        self.index_of_units(0)
    }

    /// Index of the smallest strictly positive level.
    pub fn smallest_positive_index(&self) -> Option<LevelIndex> {
        self.units.iter().position(|&u| u > 0).map(|k| k as LevelIndex)
    }

    pub fn index_of_units(&self, units: i64) -> Option<LevelIndex> {
        self.units.binary_search(&units).ok().map(|k| k as LevelIndex)
    }

    /// `Q(x)`: the index `k` with `b_{k-1} < x <= b_k`. Values at a threshold go to
    /// the lower level; values beyond the outer thresholds saturate. NaN maps to `ℓ_1`.
    pub fn quantize(&self, x: f64) -> LevelIndex {
        self.thresholds.partition_point(|&b| b < x) as LevelIndex
    }

    /// `Q` applied to an exact value given in units of `delta`.
    pub fn quantize_units(&self, units: i64) -> LevelIndex {
        let twice = units.saturating_mul(2);
        self.half_thresholds.partition_point(|&h| h < twice) as LevelIndex
    }

    /// `Pr(s_m = ℓ_k)` for every level under the all-zero-codeword AWGN model.
    ///
    /// Each entry is a CDF difference over `(b_{k-1}, b_k]`; the tail on the far side
    /// of the LLR mean is used so that tiny probabilities keep full relative precision.
    pub fn level_probabilities(&self, channel: &ChannelModel) -> Vec<f64> {
        let mean = channel.llr_mean();
        let scale = 2.0 * std::f64::consts::SQRT_2 / channel.sigma();
        let upper = |e: f64| 0.5 * libm::erfc((e - mean) / scale);
        let lower = |e: f64| 0.5 * libm::erfc((mean - e) / scale);
        let t = self.len();
        (0..t)
            .map(|k| {
                let lo = if k == 0 { None } else { Some(self.thresholds[k - 1]) };
                let hi = if k + 1 == t { None } else { Some(self.thresholds[k]) };
                match (lo, hi) {
                    (None, None) => 1.0,
                    (None, Some(hi)) => lower(hi),
                    (Some(lo), None) => upper(lo),
                    (Some(lo), Some(hi)) => {
                        let p = if lo >= mean {
                            upper(lo) - upper(hi)
                        } else if hi <= mean {
                            lower(hi) - lower(lo)
                        } else {
                            1.0 - lower(lo) - upper(hi)
                        };
                        p.max(0.0)
                    }
                }
            })
            .collect()
    }
}

/// BPSK over AWGN with noise standard deviation `sigma`, all-zero codeword sent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    sigma: f64,
}

impl ChannelModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(ChannelModel { sigma })
    }

    pub fn from_ebn0(ebn0_db: f64, rate: f64) -> Result<Self> {
        ChannelModel::new(snr_to_sigma(ebn0_db, rate)?)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mean of the unquantized channel LLR, `2/σ²`.
    pub fn llr_mean(&self) -> f64 {
        2.0 / (self.sigma * self.sigma)
    }

    /// Standard deviation of the unquantized channel LLR, `2/σ`.
    pub fn llr_std(&self) -> f64 {
        2.0 / self.sigma
    }
}

/// `σ = 1/sqrt(2·R·10^(Eb/N0/10))`.
pub fn snr_to_sigma(ebn0_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate must be in (0, 1], got {rate}")));
    }
    if !ebn0_db.is_finite() {
        return Err(Error::InvalidArgument(format!("Eb/N0 must be finite, got {ebn0_db}")));
    }
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    Ok((1.0 / (2.0 * rate * ebn0)).sqrt())
}
