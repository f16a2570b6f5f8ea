//! Monte-Carlo frame error rate over BPSK/AWGN with the all-zero codeword.
//!
//! Frame `f` at grid point `k` draws its noise from ChaCha8 stream `k`
//! starting at word `f · 2^20`, so every frame is reproducible on its own and
//! the result does not depend on how frames are spread over threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decoder::{Decoder, DecoderConfig, DecoderScratch, TannerGraph};
use crate::error::{Error, Result};
use crate::quantizer::{snr_to_sigma, ChannelModel, LevelIndex};

/// Largest error support kept in the support log.
pub const MAX_LOGGED_SUPPORT: usize = 16;

const WORDS_PER_FRAME_LOG2: u32 = 20;

const FIRST_BATCH: u64 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationPlan {
    pub decoder: DecoderConfig,
    /// Strictly increasing `Eb/N0` values in dB.
    pub ebn0_db: Vec<f64>,
    pub rate: f64,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
    /// Largest number of frames handed to one worker at a time.
    pub batch_frames: u64,
    pub log_supports: bool,
}

impl SimulationPlan {
    pub fn new(decoder: DecoderConfig, ebn0_db: Vec<f64>, rate: f64, seed: u64) -> Self {
        SimulationPlan {
            decoder,
            ebn0_db,
            rate,
            min_frame_errors: 100,
            max_frames: 100_000_000,
            seed,
            batch_frames: 1 << 16,
            log_supports: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.decoder.validate()?;
        if self.min_frame_errors == 0 || self.max_frames == 0 || self.batch_frames == 0 {
            return Err(Error::InvalidArgument(
                "min_frame_errors, max_frames and batch_frames must be positive".into(),
            ));
        }
        if self.ebn0_db.is_empty() || self.ebn0_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "Eb/N0 grid must be non-empty and strictly increasing".into(),
            ));
        }
        for &x in &self.ebn0_db {
            snr_to_sigma(x, self.rate)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FerPoint {
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Error supports (sorted positions of wrong bits) with their counts.
    pub supports: BTreeMap<Vec<u32>, u64>,
    /// Failures whose support was too large to log.
    pub unlogged_errors: u64,
}

/// Normal-approximation 95% interval, clipped to `[0, 1]`.
pub fn wald_interval(errors: u64, frames: u64) -> (f64, f64) {
    if frames == 0 {
        return (0.0, 1.0);
    }
    let p = errors as f64 / frames as f64;
    let half = 1.959_963_984_540_054 * (p * (1.0 - p) / frames as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// `n` unquantized channel LLRs for the all-zero codeword.
pub fn channel_sample(n: usize, sigma: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let ch = ChannelModel::new(sigma)?;
    let (mean, std) = (ch.llr_mean(), ch.llr_std());
    Ok((0..n)
        .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Generator for frame `frame` at grid point `point`.
pub fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point);
    rng.set_word_pos((frame as u128) << WORDS_PER_FRAME_LOG2);
    rng
}

struct Failure {
    frame: u64,
    support: Option<Vec<u32>>,
}

/// Runs every grid point of the plan on the current rayon pool.
pub fn run(graph: &TannerGraph, plan: &SimulationPlan) -> Result<Vec<FerPoint>> {
    plan.validate()?;
    let n = graph.n();
    if (n as u64) * 4 > 1 << WORDS_PER_FRAME_LOG2 {
        return Err(Error::Guard(format!(
            "frame length {n} exceeds the per-frame random budget"
        )));
    }
    let decoder = Decoder::new(graph, &plan.decoder)?;
    let quantizer = decoder.kernel().quantizer().clone();
    // smallest channel value that still quantizes to a positive level
    let positive_above = quantizer
        .smallest_positive_index()
        .map(|k| quantizer.thresholds()[k as usize - 1])
        .unwrap_or(f64::INFINITY);
    let threads = rayon::current_num_threads() as u64;

    plan.ebn0_db
        .iter()
        .enumerate()
        .map(|(point, &ebn0)| {
            let sigma = snr_to_sigma(ebn0, plan.rate)?;
            let ch = ChannelModel::new(sigma)?;
            let (mean, std) = (ch.llr_mean(), ch.llr_std());

            let frame_batch = |start: u64, end: u64| -> Vec<Failure> {
                let mut failures = Vec::new();
                let mut scratch = DecoderScratch::new();
                let mut raw = vec![0f64; n];
                let mut levels: Vec<LevelIndex> = vec![0; n];
                for f in start..end {
                    let mut rng = frame_rng(plan.seed, point as u64, f);
                    let mut all_positive = true;
                    for r in raw.iter_mut() {
                        *r = mean + std * rng.sample::<f64, _>(StandardNormal);
                        all_positive &= *r > positive_above;
                    }
                    // every check and every bit is already satisfied
                    if all_positive {
                        continue;
                    }
                    for (l, &r) in levels.iter_mut().zip(&raw) {
                        *l = quantizer.quantize(r);
                    }
                    decoder.decode_unchecked(&levels, &mut scratch);
                    let bits = scratch.hard_decisions();
                    if bits.iter().any(|&b| b != 0) {
                        let support: Vec<u32> = bits
                            .iter()
                            .enumerate()
                            .filter(|(_, &b)| b != 0)
                            .map(|(i, _)| i as u32)
                            .collect();
                        let support = (plan.log_supports && support.len() <= MAX_LOGGED_SUPPORT).then_some(support);
                        failures.push(Failure { frame: f, support });
                        // later frames of this batch cannot make the cut
                        if failures.len() as u64 >= plan.min_frame_errors {
                            break;
                        }
                    }
                }
                failures
            };

            let mut failures: Vec<Failure> = Vec::new();
            let mut next = 0u64;
            let mut frames = plan.max_frames;
            // batches grow geometrically so that easy points stop early
            let mut batch = FIRST_BATCH.min(plan.batch_frames);
            while next < plan.max_frames {
                let round_end = (next + batch * threads).min(plan.max_frames);
                let starts: Vec<u64> = (next..round_end).step_by(batch as usize).collect();
                let batches: Vec<Vec<Failure>> = starts
                    .par_iter()
                    .map(|&s| frame_batch(s, (s + batch).min(round_end)))
                    .collect();
                batch = (batch * 2).min(plan.batch_frames);
                failures.extend(batches.into_iter().flatten());
                next = round_end;
                if failures.len() as u64 >= plan.min_frame_errors {
                    let cut = plan.min_frame_errors as usize;
                    frames = failures[cut - 1].frame + 1;
                    failures.truncate(cut);
                    break;
                }
            }
            let errors = failures.len() as u64;
            let mut supports = BTreeMap::new();
            let mut unlogged = 0;
            for f in failures {
                match f.support {
                    Some(s) => *supports.entry(s).or_insert(0) += 1,
                    None => unlogged += 1,
                }
            }
            let (ci_low, ci_high) = wald_interval(errors, frames);
            Ok(FerPoint {
                ebn0_db: ebn0,
                frames,
                frame_errors: errors,
                fer: errors as f64 / frames as f64,
                ci_low,
                ci_high,
                supports,
                unlogged_errors: unlogged,
            })
        })
        .collect()
}

pub const FER_CSV_HEADER: &str = "ebn0_db,frames,frame_errors,fer,ci_low,ci_high";

pub fn fer_csv(points: &[FerPoint], config_digest: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# config_digest={config_digest}").unwrap();
    writeln!(s, "{FER_CSV_HEADER}").unwrap();
    for p in points {
        writeln!(
            s,
            "{},{},{},{:e},{:e},{:e}",
            p.ebn0_db, p.frames, p.frame_errors, p.fer, p.ci_low, p.ci_high
        )
        .unwrap();
    }
    s
}

/// Rows of `(ebn0_db, frames, frame_errors, fer)` from a results CSV.
pub fn parse_fer_csv(text: &str, source_name: &str) -> Result<Vec<(f64, u64, u64, f64)>> {
    let mut out = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != FER_CSV_HEADER {
                return Err(Error::parse(source_name, i + 1, "unexpected simulation CSV header"));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse(source_name, i + 1, "expected six columns"));
        }
        let bad = || Error::parse(source_name, i + 1, "bad number");
        out.push((
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
            f[3].parse().map_err(|_| bad())?,
        ));
    }
    if !header {
        return Err(Error::parse(source_name, 1, "missing simulation CSV header"));
    }
    Ok(out)
}

/// `ebn0_db,weight,support,count` with the support as space-separated positions.
pub fn support_csv(points: &[FerPoint], config_digest: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# config_digest={config_digest}").unwrap();
    writeln!(s, "ebn0_db,weight,support,count").unwrap();
    for p in points {
        for (support, count) in &p.supports {
            let pos: Vec<String> = support.iter().map(u32::to_string).collect();
            writeln!(s, "{},{},{},{count}", p.ebn0_db, support.len(), pos.join(" ")).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::array_code;
    use crate::decoder::Algorithm;
    use crate::quantizer::QuantizerSpec;

    fn plan(grid: Vec<f64>, errors: u64, frames: u64) -> SimulationPlan {
        let cfg = DecoderConfig::new(Algorithm::Msa, QuantizerSpec::quasi_uniform(2, 1), 7.0, 50).unwrap();
        let mut p = SimulationPlan::new(cfg, grid, 0.48, 11);
        p.min_frame_errors = errors;
        p.max_frames = frames;
        p.batch_frames = 1000;
        p
    }

    #[test]
    fn channel_moments() {
        let sigma = 0.8;
        let mut rng = frame_rng(1, 0, 0);
        let n = 1_000_000;
        let x = channel_sample(n, sigma, &mut rng).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let (m, sd) = (2.0 / (sigma * sigma), 2.0 / sigma);
        assert!((mean - m).abs() < 5.0 * sd / (n as f64).sqrt());
        let var_se = sd * sd * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - sd * sd).abs() < 5.0 * var_se);
        let again = channel_sample(n, sigma, &mut frame_rng(1, 0, 0)).unwrap();
        assert_eq!(x, again);
        assert!(channel_sample(3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn wald_interval_edges() {
        assert_eq!(wald_interval(0, 100), (0.0, 0.0));
        let (lo, hi) = wald_interval(50, 100);
        assert!((lo - 0.402).abs() < 1e-3 && (hi - 0.598).abs() < 1e-3);
        assert_eq!(wald_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn stops_at_requested_error_count() {
        let g = array_code(3, 5).unwrap().tanner_graph().unwrap();
        let pts = run(&g, &plan(vec![0.0, 2.0], 20, 1_000_000)).unwrap();
        for p in &pts {
            assert_eq!(p.frame_errors, 20);
            assert!(p.frames < 1_000_000);
            assert_eq!(p.supports.values().sum::<u64>() + p.unlogged_errors, 20);
        }
        assert!(pts[1].fer < pts[0].fer);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let g = array_code(3, 5).unwrap().tanner_graph().unwrap();
        let mut p = plan(vec![3.0, 5.0], 30, 200_000);
        p.batch_frames = 300;
        let results: Vec<Vec<FerPoint>> = [1, 3, 8]
            .iter()
            .map(|&n| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
                pool.install(|| run(&g, &p).unwrap())
            })
            .collect();
        assert_eq!(results[0], results[1]);
        assert_eq!(results[0], results[2]);
    }

    #[test]
    fn high_snr_is_error_free() {
        let g = array_code(3, 5).unwrap().tanner_graph().unwrap();
        let pts = run(&g, &plan(vec![14.0], 1, 20_000)).unwrap();
        assert_eq!(pts[0].frame_errors, 0);
        assert_eq!(pts[0].frames, 20_000);
    }

    #[test]
    fn rejects_bad_plans() {
        let g = array_code(3, 5).unwrap().tanner_graph().unwrap();
        assert!(run(&g, &plan(vec![2.0, 1.0], 1, 10)).is_err());
        assert!(run(&g, &plan(vec![], 1, 10)).is_err());
        assert!(run(&g, &plan(vec![1.0], 0, 10)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = array_code(3, 5).unwrap().tanner_graph().unwrap();
        let pts = run(&g, &plan(vec![1.0, 3.0], 5, 100_000)).unwrap();
        let csv = fer_csv(&pts, "abc");
        assert!(csv.starts_with("# config_digest=abc\nebn0_db,frames,frame_errors,fer,ci_low,ci_high\n"));
        let rows = parse_fer_csv(&csv, "x").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].1, pts[0].frames);
        assert!(support_csv(&pts, "abc").lines().count() >= 3);
    }
}
