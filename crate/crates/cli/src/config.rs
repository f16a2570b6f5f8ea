//! Run configuration: a TOML document whose relative paths resolve against
//! the directory holding the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use asbound::absorbing::{fixtures, AbsorbingSetGraph, AuxPolicy};
use asbound::bound::{digest_hex, Overrun, RowSet, DEFAULT_GUARD};
use asbound::codes::{self, ParityCheckMatrix};
use asbound::decoder::{Algorithm, DecoderConfig};
use asbound::quantizer::QuantizerSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub quantizer: Option<QuantizerSpec>,
    pub decoder: Option<DecoderSection>,
    pub absorbing_set: Option<AbsorbingSetSection>,
    pub rows: Option<RowsSection>,
    pub enumeration: Option<EnumerationSection>,
    pub sweep: Option<SweepSection>,
    pub code: Option<CodeSource>,
    pub simulation: Option<SimulationSection>,
    pub compare: Option<CompareSection>,
    pub output: Option<OutputSection>,
    /// Directory of the config file; not part of the document.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub algorithm: Algorithm,
    /// Required for SPA; MSA never evaluates it.
    pub phi_zero: Option<f64>,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

fn default_iterations() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingSetSection {
    /// Absorbing-set file.
    pub file: Option<PathBuf>,
    /// Name of a shipped fixture, used when `file` is absent.
    pub fixture: Option<String>,
    #[serde(default)]
    pub aux: AuxPolicy,
    pub multiplicity: Option<Multiplicity>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Multiplicity {
    Count(u64),
    /// Number of weight-`w` codewords of the configured code.
    Codewords {
        codeword_weight: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowsSection {
    pub set: RowSet,
    pub h: Option<usize>,
    /// Columns of `W_max`.
    #[serde(default = "default_iterations")]
    pub p: usize,
    #[serde(default)]
    pub overrun: Overrun,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerationSection {
    #[serde(default = "yes")]
    pub orbit_reduction: bool,
    pub guard: Option<u128>,
    pub checkpoint: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub ebn0_db: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    /// Defaults to the code rate when a code is configured, else 1.
    pub rate: Option<f64>,
    #[serde(default)]
    pub second_order: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CodeSource {
    Array {
        gamma: usize,
        p: usize,
    },
    Alist {
        path: PathBuf,
    },
    #[serde(rename = "tanner-155")]
    Tanner155,
    #[serde(rename = "eg-63")]
    Eg63,
    RegularRandom {
        n: usize,
        dv: usize,
        dc: usize,
        seed: u64,
    },
}

impl FromStr for CodeSource {
    type Err = String;

    /// `array:3:5`, `alist:path`, `tanner-155`, `eg-63`, `regular-random:n:dv:dc:seed`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |k: usize| -> Result<usize, String> {
            parts
                .get(k)
                .ok_or_else(|| format!("missing field {k} in code `{s}`"))?
                .parse()
                .map_err(|_| format!("bad number in code `{s}`"))
        };
        match parts[0] {
            "array" if parts.len() == 3 => Ok(CodeSource::Array {
                gamma: num(1)?,
                p: num(2)?,
            }),
            "alist" if parts.len() >= 2 => Ok(CodeSource::Alist {
                path: PathBuf::from(parts[1..].join(":")),
            }),
            "tanner-155" if parts.len() == 1 => Ok(CodeSource::Tanner155),
            "eg-63" if parts.len() == 1 => Ok(CodeSource::Eg63),
            "regular-random" if parts.len() == 5 => Ok(CodeSource::RegularRandom {
                n: num(1)?,
                dv: num(2)?,
                dc: num(3)?,
                seed: num(4)? as u64,
            }),
            _ => Err(format!("unrecognised code `{s}`")),
        }
    }
}

impl CodeSource {
    pub fn build(&self, base_dir: &Path) -> Result<ParityCheckMatrix, CliError> {
        Ok(match self {
            CodeSource::Array { gamma, p } => codes::array_code(*gamma, *p)?,
            CodeSource::Alist { path } => ParityCheckMatrix::load_alist(&base_dir.join(path))?,
            CodeSource::Tanner155 => codes::tanner_155(),
            CodeSource::Eg63 => codes::eg_63(),
            CodeSource::RegularRandom { n, dv, dc, seed } => codes::regular_random(*n, *dv, *dc, *seed)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_min_errors")]
    pub min_frame_errors: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    #[serde(default = "default_batch")]
    pub batch_frames: u64,
    #[serde(default = "yes")]
    pub log_supports: bool,
}

fn default_min_errors() -> u64 {
    100
}

fn default_max_frames() -> u64 {
    100_000_000
}

fn default_batch() -> u64 {
    1 << 16
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Points with simulated FER below this value form the error-floor window.
    #[serde(default = "default_floor")]
    pub floor_threshold: f64,
    /// Points with simulated FER below this value are left out of the window.
    #[serde(default)]
    pub floor_min: f64,
    /// Upper limit on FER / estimate inside the window.
    pub max_ratio: Option<f64>,
}

fn default_floor() -> f64 {
    1e-4
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            floor_threshold: default_floor(),
            floor_min: 0.0,
            max_ratio: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_files()?;
        Ok(cfg)
    }

    fn check_files(&self) -> Result<(), CliError> {
        let mut files = Vec::new();
        if let Some(a) = &self.absorbing_set {
            files.extend(a.file.iter());
        }
        if let Some(CodeSource::Alist { path }) = &self.code {
            files.push(path);
        }
        for f in files {
            let p = self.base_dir.join(f);
            if !p.is_file() {
                return Err(config_error(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Digest of the effective settings; thread count and output location
    /// do not take part.
    pub fn digest(&self, seed: u64) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.output = None;
        c.seed = Some(seed);
        let text = toml::to_string(&c).expect("config serializes");
        digest_hex(text.as_bytes())
    }

    pub fn decoder_config(&self) -> Result<DecoderConfig, CliError> {
        let d = self
            .decoder
            .as_ref()
            .ok_or_else(|| config_error("missing [decoder] section"))?;
        let q = self
            .quantizer
            .clone()
            .ok_or_else(|| config_error("missing [quantizer] section"))?;
        let phi_zero = match (d.algorithm, d.phi_zero) {
            (_, Some(v)) => v,
            (Algorithm::Msa, None) => 1.0,
            (Algorithm::Spa, None) => return Err(config_error("decoder.phi_zero is required for SPA")),
        };
        Ok(DecoderConfig::new(d.algorithm, q, phi_zero, d.max_iterations)?)
    }

    pub fn absorbing_set(&self) -> Result<(AbsorbingSetGraph, &AbsorbingSetSection), CliError> {
        let s = self
            .absorbing_set
            .as_ref()
            .ok_or_else(|| config_error("missing [absorbing_set] section"))?;
        let g = match (&s.file, &s.fixture) {
            (Some(f), _) => AbsorbingSetGraph::load(&self.base_dir.join(f))?,
            (None, Some(name)) => {
                fixtures::load(name).ok_or_else(|| config_error(format!("unknown fixture `{name}`")))?
            }
            (None, None) => return Err(config_error("absorbing_set needs `file` or `fixture`")),
        };
        Ok((g, s))
    }

    pub fn rows(&self) -> Result<(RowSet, usize, usize, Overrun), CliError> {
        let r = self
            .rows
            .as_ref()
            .ok_or_else(|| config_error("missing [rows] section"))?;
        let h = match (r.set, r.h) {
            (RowSet::I, h) => h.unwrap_or(1),
            (_, Some(h)) => h,
            (_, None) => return Err(config_error("rows.h is required for row sets II and III")),
        };
        Ok((r.set, h, r.p, r.overrun))
    }

    pub fn guard(&self) -> u128 {
        self.enumeration.as_ref().and_then(|e| e.guard).unwrap_or(DEFAULT_GUARD)
    }

    pub fn code(&self) -> Result<Option<ParityCheckMatrix>, CliError> {
        self.code.as_ref().map(|c| c.build(&self.base_dir)).transpose()
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| config_error("missing [sweep] section"))?;
        let grid = match (&s.ebn0_db, s.start, s.stop, s.step) {
            (Some(g), None, None, None) => g.clone(),
            (None, Some(a), Some(b), Some(d)) if d > 0.0 && b >= a => {
                let n = ((b - a) / d + 1e-9).floor() as usize;
                (0..=n).map(|k| a + d * k as f64).collect()
            }
            _ => {
                return Err(config_error(
                    "sweep needs either `ebn0_db` or `start`, `stop` and a positive `step`",
                ))
            }
        };
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_error("sweep grid must be non-empty and strictly increasing"));
        }
        Ok(grid)
    }

    pub fn rate(&self, code: Option<&ParityCheckMatrix>) -> f64 {
        self.sweep
            .as_ref()
            .and_then(|s| s.rate)
            .or_else(|| code.map(ParityCheckMatrix::rate))
            .unwrap_or(1.0)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, self.output.as_ref().and_then(|o| o.dir.as_ref())) {
            (Some(f), _) => f.to_path_buf(),
            (None, Some(d)) => self.base_dir.join(d),
            (None, None) => PathBuf::from("out"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_strings() {
        assert_eq!(
            "array:3:5".parse::<CodeSource>(),
            Ok(CodeSource::Array { gamma: 3, p: 5 })
        );
        assert_eq!("eg-63".parse::<CodeSource>(), Ok(CodeSource::Eg63));
        assert_eq!(
            "regular-random:40:3:6:9".parse::<CodeSource>(),
            Ok(CodeSource::RegularRandom {
                n: 40,
                dv: 3,
                dc: 6,
                seed: 9
            })
        );
        assert!("array:3".parse::<CodeSource>().is_err());
        assert!("hamming".parse::<CodeSource>().is_err());
    }

    #[test]
    fn parses_full_document() {
        let text = r#"
            seed = 4
            [quantizer]
            kind = "quasi-uniform"
            q1 = 2
            q2 = 1
            [decoder]
            algorithm = "msa"
            [absorbing_set]
            fixture = "as_6_0_g8"
            multiplicity = { codeword_weight = 6 }
            [rows]
            set = "III"
            h = 3
            [sweep]
            start = 5.0
            stop = 6.0
            step = 0.5
            [code]
            kind = "array"
            gamma = 3
            p = 5
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.grid().unwrap(), vec![5.0, 5.5, 6.0]);
        assert_eq!(cfg.rows().unwrap().1, 3);
        assert_eq!(cfg.decoder_config().unwrap().max_iterations, 200);
        let code = cfg.code().unwrap().unwrap();
        assert!((cfg.rate(Some(&code)) - 0.48).abs() < 1e-12);
        assert_eq!(cfg.digest(4), cfg.digest(4));
        assert_ne!(cfg.digest(4), cfg.digest(5));
        let mut threaded = cfg.clone();
        threaded.threads = Some(16);
        assert_eq!(threaded.digest(4), cfg.digest(4));
    }

    #[test]
    fn row_set_three_needs_h() {
        let cfg: RunConfig = toml::from_str("[rows]\nset = \"III\"\n").unwrap();
        assert!(matches!(cfg.rows(), Err(CliError::Config(_))));
        let cfg: RunConfig =
            toml::from_str("[decoder]\nalgorithm = \"spa\"\n[quantizer]\nkind = \"uniform\"\nq1 = 3\nq2 = 2\n")
                .unwrap();
        assert!(matches!(cfg.decoder_config(), Err(CliError::Config(_))));
    }
}
