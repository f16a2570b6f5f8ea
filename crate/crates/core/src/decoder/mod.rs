//! Full Tanner-graph quantized decoder.

pub(crate) mod engine;
pub mod kernel;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{LevelIndex, QuantizerSpec};
pub use engine::IterationTrace;
use engine::{Layout, RunParams, Scratch};
pub use kernel::{phi, Algorithm, MessageKernel};

/// Decoder parameters shared by the full-graph and absorbing set decoders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub algorithm: Algorithm,
    pub quantizer: QuantizerSpec,
    /// Value substituted for `Φ(0)`.
    pub phi_zero: f64,
    pub max_iterations: usize,
}

impl DecoderConfig {
    pub fn new(algorithm: Algorithm, quantizer: QuantizerSpec, phi_zero: f64, max_iterations: usize) -> Result<Self> {
        let cfg = DecoderConfig {
            algorithm,
            quantizer,
            phi_zero,
            max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.phi_zero.is_finite() && self.phi_zero > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "phi_zero must be positive, got {}",
                self.phi_zero
            )));
        }
        self.quantizer.build().map(|_| ())
    }

    /// Stable one-line description, used in digests.
    pub fn canonical(&self) -> String {
        format!(
            "algorithm={} quantizer={} phi_zero={:?} max_iterations={}",
            self.algorithm.name(),
            self.quantizer.canonical(),
            self.phi_zero,
            self.max_iterations
        )
    }

    pub fn kernel(&self, max_degree: usize) -> Result<MessageKernel> {
        self.validate()?;
        MessageKernel::new(self.algorithm, &self.quantizer, self.phi_zero, max_degree)
    }
}

/// Bipartite graph given by the variable indices of each check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    n: usize,
    checks: Vec<Vec<u32>>,
    vars: Vec<Vec<u32>>,
}

impl TannerGraph {
    pub fn from_checks(n: usize, checks: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 || checks.is_empty() {
            return Err(Error::Graph("graph needs at least one variable and one check".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::Graph(format!("too many variables: {n}")));
        }
        let mut vars = vec![Vec::new(); n];
        for (j, c) in checks.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Graph(format!("check {j} has no edges")));
            }
            let mut sorted = c.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Graph(format!("check {j} has a repeated edge")));
            }
            for &v in c {
                if v as usize >= n {
                    return Err(Error::Graph(format!("check {j} references variable {v}, but n = {n}")));
                }
                vars[v as usize].push(j as u32);
            }
        }
        if let Some(v) = vars.iter().position(Vec::is_empty) {
            return Err(Error::Graph(format!("variable {v} has no edges")));
        }
        Ok(TannerGraph { n, checks, vars })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.checks.len()
    }

    pub fn check(&self, j: usize) -> &[u32] {
        &self.checks[j]
    }

    pub fn checks(&self) -> &[Vec<u32>] {
        &self.checks
    }

    pub fn variable(&self, i: usize) -> &[u32] {
        &self.vars[i]
    }

    pub fn edge_count(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|c| c.iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    /// The hard decisions satisfy every check.
    pub converged: bool,
    pub iterations: usize,
    pub hard_decisions: Vec<u8>,
    /// Present only for traced runs.
    pub per_iteration: Option<Vec<IterationTrace>>,
}

/// Reusable buffers for repeated decoding on one graph.
#[derive(Clone, Debug, Default)]
pub struct DecoderScratch(Scratch);

impl DecoderScratch {
    pub fn new() -> Self {
        DecoderScratch(Scratch::new())
    }

    /// Hard decisions from the last decode that used these buffers.
    pub fn hard_decisions(&self) -> &[u8] {
        &self.0.bits
    }
}

/// Flooding decoder bound to a graph and configuration.
#[derive(Clone, Debug)]
pub struct Decoder {
    layout: Layout,
    kernel: MessageKernel,
    config: DecoderConfig,
}

impl Decoder {
    pub fn new(graph: &TannerGraph, config: &DecoderConfig) -> Result<Self> {
        let layout = Layout::new(graph.n(), graph.checks(), &vec![None; graph.m()]);
        let kernel = config.kernel(layout.max_var_degree())?;
        Ok(Decoder {
            layout,
            kernel,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn kernel(&self) -> &MessageKernel {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.layout.n_vars
    }

    fn check_input(&self, channel: &[LevelIndex]) -> Result<()> {
        if channel.len() != self.layout.n_vars {
            return Err(Error::Dimension(format!(
                "channel has {} entries, graph has {} variables",
                channel.len(),
                self.layout.n_vars
            )));
        }
        let t = self.kernel.quantizer().len();
        if let Some(&k) = channel.iter().find(|&&k| k as usize >= t) {
            return Err(Error::InvalidArgument(format!(
                "level index {k} out of range for {t} levels"
            )));
        }
        Ok(())
    }

    pub fn decode(&self, channel: &[LevelIndex]) -> Result<DecodeResult> {
        let mut scratch = DecoderScratch::new();
        let (converged, iterations) = self.decode_with(channel, &mut scratch)?;
        Ok(DecodeResult {
            converged,
            iterations,
            hard_decisions: scratch.0.bits,
            per_iteration: None,
        })
    }

    /// Decodes into caller-owned buffers; returns `(converged, iterations)`.
    pub fn decode_with(&self, channel: &[LevelIndex], scratch: &mut DecoderScratch) -> Result<(bool, usize)> {
        self.check_input(channel)?;
        Ok(self.decode_unchecked(channel, scratch))
    }

    pub(crate) fn decode_unchecked(&self, channel: &[LevelIndex], scratch: &mut DecoderScratch) -> (bool, usize) {
        let out = engine::run(
            &self.layout,
            &self.kernel,
            channel,
            |_, _| unreachable!("full-graph decoder has no auxiliary inputs"),
            RunParams {
                max_iterations: self.config.max_iterations,
                aux_constant_from: 1,
                detect_cycles: true,
                trace: None,
            },
            &mut scratch.0,
        );
        (out.syndrome_ok, out.iterations)
    }

    /// Like [`Decoder::decode`] but records every iteration.
    pub fn decode_traced(&self, channel: &[LevelIndex]) -> Result<DecodeResult> {
        self.check_input(channel)?;
        let mut scratch = Scratch::new();
        let mut trace = Vec::new();
        let out = engine::run(
            &self.layout,
            &self.kernel,
            channel,
            |_, _| unreachable!("full-graph decoder has no auxiliary inputs"),
            RunParams {
                max_iterations: self.config.max_iterations,
                aux_constant_from: 1,
                detect_cycles: false,
                trace: Some(&mut trace),
            },
            &mut scratch,
        );
        Ok(DecodeResult {
            converged: out.syndrome_ok,
            iterations: out.iterations,
            hard_decisions: scratch.bits,
            per_iteration: Some(trace),
        })
    }
}

/// Writes a message trace as `iteration,direction,edge,level` rows, where
/// `direction` is `v2c` or `c2v` and `level` is the real message value.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &[IterationTrace], kernel: &MessageKernel) -> std::io::Result<()> {
    writeln!(out, "iteration,direction,edge,level")?;
    let q = kernel.quantizer();
    for it in trace {
        for (e, &k) in it.variable_to_check.iter().enumerate() {
            writeln!(out, "{},v2c,{},{}", it.iteration, e, q.level(k))?;
        }
        for (e, &k) in it.check_to_variable.iter().enumerate() {
            writeln!(out, "{},c2v,{},{}", it.iteration, e, q.level(k))?;
        }
    }
    Ok(())
}
