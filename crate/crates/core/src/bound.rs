//! Failure sets of the absorbing set decoder and the bounds derived from them.
//!
//! The decoder on `D(A)` is run for every channel input vector on the `a`
//! variables against one or more external-input matrices. The vectors that
//! fail for every matrix form a set that does not depend on the SNR; the
//! bound at a given SNR is that set's probability under the channel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::absorbing::DecoderGraphDA;
use crate::decoder::engine::{self, Layout, RunParams, Scratch};
use crate::decoder::{DecoderConfig, MessageKernel};
use crate::error::{Error, Result};
use crate::quantizer::{ChannelModel, LevelIndex, Quantizer, QuantizerSpec};

/// Default ceiling on decoder calls for one failure-set computation.
pub const DEFAULT_GUARD: u128 = 1 << 34;

/// Largest `a` for which failing vectors are also listed one by one.
pub const EXPLICIT_MAX_A: usize = 4;

const FAILURE_SET_MAGIC: &str = "asbound-failure-set v1";
const CHECKPOINT_MAGIC: &str = "asbound-checkpoint v1";

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// External check inputs: entry `(j, μ)` feeds auxiliary row `j` at iteration `μ + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowMatrix {
    kappa: usize,
    p: usize,
    entries: Vec<LevelIndex>,
    settled: usize,
}

impl RowMatrix {
    /// `entries` is row-major, `kappa × p`.
    pub fn new(kappa: usize, p: usize, entries: Vec<LevelIndex>, quantizer: &Quantizer) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("row matrix needs at least one column".into()));
        }
        if entries.len() != kappa * p {
            return Err(Error::Dimension(format!(
                "{} entries for a {kappa} × {p} matrix",
                entries.len()
            )));
        }
        if let Some(&k) = entries.iter().find(|&&k| k as usize >= quantizer.len()) {
            return Err(Error::InvalidArgument(format!("level index {k} out of range")));
        }
        let column_eq = |c: usize| (0..kappa).all(|r| entries[r * p + c] == entries[r * p + p - 1]);
        let settled = (0..p).rev().take_while(|&c| column_eq(c)).last().unwrap_or(p - 1) + 1;
        Ok(RowMatrix {
            kappa,
            p,
            entries,
            settled,
        })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, row: usize, col: usize) -> LevelIndex {
        self.entries[row * self.p + col]
    }

    /// Input at 1-based iteration `mu`, holding the last column beyond `p`.
    #[inline]
    pub fn at_iteration(&self, row: usize, mu: usize) -> LevelIndex {
        self.entries[row * self.p + mu.min(self.p) - 1]
    }

    pub fn entries(&self) -> &[LevelIndex] {
        &self.entries
    }

    /// First 1-based iteration from which the inputs no longer change.
    pub fn settled_from(&self) -> usize {
        self.settled
    }

    /// Every column holds a single value.
    pub fn is_column_constant(&self) -> bool {
        (0..self.p).all(|c| (1..self.kappa).all(|r| self.get(r, c) == self.get(0, c)))
    }

    pub fn canonical(&self) -> String {
        let cols: Vec<String> = self.entries.iter().map(u16::to_string).collect();
        format!("{}x{}:{}", self.kappa, self.p, cols.join(","))
    }
}

/// Every entry saturated at the largest level.
pub fn build_w_max(kappa: usize, p: usize, quantizer: &Quantizer) -> Result<RowMatrix> {
    RowMatrix::new(kappa, p, vec![quantizer.max_index(); kappa * p], quantizer)
}

/// Levels `t/2 + 1 … t` (1-based), each held for `h` columns.
pub fn build_w_inc(kappa: usize, h: usize, quantizer: &Quantizer) -> Result<RowMatrix> {
    if h == 0 {
        return Err(Error::InvalidArgument("h must be at least 1".into()));
    }
    let t = quantizer.len();
    let half = t / 2;
    let row: Vec<LevelIndex> = (half..t)
        .flat_map(|k| std::iter::repeat_n(k as LevelIndex, h))
        .collect();
    let p = row.len();
    RowMatrix::new(kappa, p, row.repeat(kappa), quantizer)
}

/// Predefined row selections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSet {
    /// `W_max` only.
    I,
    /// `W_inc` only.
    II,
    /// `W_max`, then `W_inc`.
    III,
}

impl RowSet {
    /// `W_max` gets `p_max` columns; `W_inc` uses `h`.
    pub fn build(self, kappa: usize, h: usize, p_max: usize, quantizer: &Quantizer) -> Result<Vec<RowMatrix>> {
        let max = || build_w_max(kappa, p_max, quantizer);
        let inc = || build_w_inc(kappa, h, quantizer);
        Ok(match self {
            RowSet::I => vec![max()?],
            RowSet::II => vec![inc()?],
            RowSet::III => vec![max()?, inc()?],
        })
    }
}

/// What the absorbing set decoder does once `W` runs out of columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overrun {
    /// Keep feeding the last column until the iteration limit.
    #[default]
    Clamp,
    /// Stop after `p` iterations.
    Stop,
}

/// Quantized decoder on `D(A)`.
#[derive(Clone, Debug)]
pub struct AsDecoder {
    graph: DecoderGraphDA,
    layout: Layout,
    kernel: MessageKernel,
    config: DecoderConfig,
    overrun: Overrun,
}

impl AsDecoder {
    pub fn new(graph: &DecoderGraphDA, config: &DecoderConfig, overrun: Overrun) -> Result<Self> {
        let base = graph.base();
        let layout = Layout::new(base.a(), base.checks(), graph.aux_rows());
        let kernel = config.kernel(layout.max_var_degree())?;
        Ok(AsDecoder {
            graph: graph.clone(),
            layout,
            kernel,
            config: config.clone(),
            overrun,
        })
    }

    pub fn graph(&self) -> &DecoderGraphDA {
        &self.graph
    }

    pub fn kernel(&self) -> &MessageKernel {
        &self.kernel
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn overrun(&self) -> Overrun {
        self.overrun
    }

    fn check(&self, x: &[LevelIndex], w: &RowMatrix) -> Result<()> {
        let a = self.graph.base().a();
        if x.len() != a {
            return Err(Error::Dimension(format!("input has {} entries, a = {a}", x.len())));
        }
        if w.kappa() != self.graph.kappa() {
            return Err(Error::Dimension(format!(
                "row matrix has {} rows, decoder graph has κ = {}",
                w.kappa(),
                self.graph.kappa()
            )));
        }
        let t = self.kernel.quantizer().len();
        if x.iter().chain(w.entries()).any(|&k| k as usize >= t) {
            return Err(Error::InvalidArgument(format!(
                "level index out of range for {t} levels"
            )));
        }
        Ok(())
    }

    /// Whether the decoder ends with a nonzero bit inside the sub-graph.
    pub fn decode(&self, x: &[LevelIndex], w: &RowMatrix) -> Result<bool> {
        self.check(x, w)?;
        Ok(self.fails(x, w, &mut Scratch::new()))
    }

    pub(crate) fn fails(&self, x: &[LevelIndex], w: &RowMatrix, scratch: &mut Scratch) -> bool {
        let max_iterations = match self.overrun {
            Overrun::Clamp => self.config.max_iterations,
            Overrun::Stop => self.config.max_iterations.min(w.p()),
        };
        engine::run(
            &self.layout,
            &self.kernel,
            x,
            |mu, row| w.at_iteration(row as usize, mu),
            RunParams {
                max_iterations,
                aux_constant_from: w.settled_from(),
                detect_cycles: true,
                trace: None,
            },
            scratch,
        );
        scratch.bits.iter().any(|&b| b != 0)
    }

    /// Digest of everything that determines decoder outcomes.
    pub fn digest(&self) -> String {
        digest_hex(
            format!(
                "{}\n{}\noverrun={:?}",
                self.graph.canonical(),
                self.config.canonical(),
                self.overrun
            )
            .as_bytes(),
        )
    }
}

/// Cache key for the failure set of `decoder` over `rows`.
pub fn failure_set_key(decoder: &AsDecoder, rows: &[RowMatrix]) -> String {
    digest_hex(format!("{}\n{}", decoder.digest(), rows_digest(rows)).as_bytes())
}

/// Free-function form of [`AsDecoder::decode`].
pub fn as_decode(decoder: &AsDecoder, x: &[LevelIndex], w: &RowMatrix) -> Result<bool> {
    decoder.decode(x, w)
}

/// Failing input vectors grouped by composition (the sorted multiset of levels).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureSet {
    pub a: usize,
    pub t: usize,
    pub quantizer: String,
    pub algorithm: String,
    pub as_digest: String,
    pub rows_digest: String,
    pub config_digest: String,
    pub rows: usize,
    pub histogram: BTreeMap<Vec<LevelIndex>, u64>,
    /// Every failing vector in lexicographic order, kept for small `a`.
    pub explicit: Option<Vec<Vec<LevelIndex>>>,
}

impl FailureSet {
    pub fn total(&self) -> u64 {
        self.histogram.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.histogram.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FAILURE_SET_MAGIC}").unwrap();
        writeln!(s, "a {}", self.a).unwrap();
        writeln!(s, "t {}", self.t).unwrap();
        writeln!(s, "quantizer {}", self.quantizer).unwrap();
        writeln!(s, "algorithm {}", self.algorithm).unwrap();
        writeln!(s, "as_digest {}", self.as_digest).unwrap();
        writeln!(s, "rows_digest {}", self.rows_digest).unwrap();
        writeln!(s, "config_digest {}", self.config_digest).unwrap();
        writeln!(s, "rows {}", self.rows).unwrap();
        writeln!(s, "compositions {}", self.histogram.len()).unwrap();
        for (comp, count) in &self.histogram {
            writeln!(s, "{} {count}", join(comp)).unwrap();
        }
        if let Some(list) = &self.explicit {
            writeln!(s, "explicit {}", list.len()).unwrap();
            for x in list {
                writeln!(s, "{}", join(x)).unwrap();
            }
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn from_text(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(source_name, 0, format!("unexpected end of file, expected {what}")))
        };
        let (no, magic) = next("header")?;
        if magic != FAILURE_SET_MAGIC {
            return Err(Error::parse(source_name, no, "not a failure-set file"));
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (no, line) = next(name)?;
            let rest = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| Error::parse(source_name, no, format!("expected `{name}`")))?;
            Ok((no, rest.to_string()))
        };
        let num = |(no, s): (usize, String), name: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(source_name, no, format!("bad {name} `{s}`")))
        };
        let a = num(field("a")?, "a")?;
        let t = num(field("t")?, "t")?;
        let quantizer = field("quantizer")?.1;
        let algorithm = field("algorithm")?.1;
        let as_digest = field("as_digest")?.1;
        let rows_digest = field("rows_digest")?.1;
        let config_digest = field("config_digest")?.1;
        let rows = num(field("rows")?, "rows")?;
        let count = num(field("compositions")?, "composition count")?;
        let parse_levels = |no: usize, fields: &[&str]| -> Result<Vec<LevelIndex>> {
            fields
                .iter()
                .map(|f| match f.parse::<LevelIndex>() {
                    Ok(k) if (k as usize) < t => Ok(k),
                    _ => Err(Error::parse(source_name, no, format!("bad level `{f}`"))),
                })
                .collect()
        };
        let mut histogram = BTreeMap::new();
        for _ in 0..count {
            let (no, line) = next("composition")?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != a + 1 {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("expected {a} levels and a count"),
                ));
            }
            let comp = parse_levels(no, &fields[..a])?;
            let c: u64 = fields[a]
                .parse()
                .map_err(|_| Error::parse(source_name, no, "bad count"))?;
            histogram.insert(comp, c);
        }
        let (no, line) = next("`explicit` or `end`")?;
        let mut explicit = None;
        let mut end_line = (no, line);
        if let Some(rest) = line.strip_prefix("explicit ") {
            let n: usize = rest
                .parse()
                .map_err(|_| Error::parse(source_name, no, "bad explicit count"))?;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let (no, line) = next("vector")?;
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != a {
                    return Err(Error::parse(source_name, no, format!("expected {a} levels")));
                }
                list.push(parse_levels(no, &fields)?);
            }
            explicit = Some(list);
            end_line = next("`end`")?;
        }
        if end_line.1 != "end" {
            return Err(Error::parse(source_name, end_line.0, "expected `end`"));
        }
        Ok(FailureSet {
            a,
            t,
            quantizer,
            algorithm,
            as_digest,
            rows_digest,
            config_digest,
            rows,
            histogram,
            explicit,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Digest of the serialized form.
    /// True when this set was computed by `decoder` over `rows`.
    pub fn matches(&self, decoder: &AsDecoder, rows: &[RowMatrix]) -> bool {
        self.as_digest == digest_hex(decoder.graph().canonical().as_bytes())
            && self.config_digest == decoder.digest()
            && self.rows_digest == rows_digest(rows)
            && self.rows == rows.len()
    }

    pub fn digest(&self) -> String {
        digest_hex(self.to_text().as_bytes())
    }
}

fn join(levels: &[LevelIndex]) -> String {
    levels.iter().map(u16::to_string).collect::<Vec<_>>().join(" ")
}

fn rows_digest(rows: &[RowMatrix]) -> String {
    let text: Vec<String> = rows.iter().map(RowMatrix::canonical).collect();
    digest_hex(text.join("\n").as_bytes())
}

/// Knobs for [`compute_failure_set`].
#[derive(Clone, Debug)]
pub struct EnumerationOptions {
    /// Evaluate one vector per automorphism orbit.
    pub orbit_reduction: bool,
    /// Ceiling on the projected number of decoder calls.
    pub guard: u128,
    /// Progress file for resuming an interrupted run.
    pub checkpoint: Option<PathBuf>,
    /// Chunks processed between checkpoint writes.
    pub checkpoint_every: usize,
    /// Keep the vector list when `a` is at most [`EXPLICIT_MAX_A`].
    pub keep_explicit: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            orbit_reduction: true,
            guard: DEFAULT_GUARD,
            checkpoint: None,
            checkpoint_every: 256,
            keep_explicit: true,
        }
    }
}

/// Statistics from one [`compute_failure_set`] call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnumerationStats {
    pub group_order: usize,
    pub representatives: u64,
    pub decodes: u64,
    pub resumed_chunks: usize,
}

// How input vectors are enumerated.
enum Walk {
    /// All `t^a` vectors.
    Plain,
    /// Nondecreasing vectors; the group is the full symmetric group.
    Sorted,
    /// Lexicographically smallest orbit members.
    Canonical(CanonicalGroup),
}

struct CanonicalGroup {
    perms: Vec<Vec<u32>>,
    /// For each prefix length, the non-identity elements mapping the prefix into itself.
    prefix_stable: Vec<Vec<usize>>,
}

impl CanonicalGroup {
    fn new(perms: Vec<Vec<u32>>, a: usize) -> Self {
        let prefix_stable = (0..=a)
            .map(|k| {
                perms
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| {
                        p.iter().enumerate().any(|(i, &v)| i as u32 != v) && p[..k].iter().all(|&v| (v as usize) < k)
                    })
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        CanonicalGroup { perms, prefix_stable }
    }

    // No prefix-stable image of x[..k] is lexicographically smaller.
    fn prefix_ok(&self, x: &[LevelIndex], k: usize) -> bool {
        self.prefix_stable[k].iter().all(|&g| {
            let p = &self.perms[g];
            for i in 0..k {
                let y = x[p[i] as usize];
                if y != x[i] {
                    return y > x[i];
                }
            }
            true
        })
    }

    fn stabilizer_order(&self, x: &[LevelIndex]) -> usize {
        self.perms
            .iter()
            .filter(|p| p.iter().enumerate().all(|(i, &v)| x[v as usize] == x[i]))
            .count()
    }

    fn orbit(&self, x: &[LevelIndex]) -> BTreeSet<Vec<LevelIndex>> {
        self.perms
            .iter()
            .map(|p| p.iter().map(|&v| x[v as usize]).collect())
            .collect()
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn multinomial_orbit(x: &[LevelIndex]) -> u64 {
    // a!/∏ c_k! for sorted x
    let mut total: u64 = 1;
    let mut run = 0u64;
    for i in 0..x.len() {
        run = if i > 0 && x[i] == x[i - 1] { run + 1 } else { 1 };
        total = total * (i as u64 + 1) / run;
    }
    total
}

fn cycle_count(p: &[u32]) -> u32 {
    let mut seen = vec![false; p.len()];
    let mut cycles = 0;
    for s in 0..p.len() {
        if !seen[s] {
            cycles += 1;
            let mut i = s;
            while !seen[i] {
                seen[i] = true;
                i = p[i] as usize;
            }
        }
    }
    cycles
}

// Per-row-prefix results for one chunk.
#[derive(Clone, Debug, Default)]
struct ChunkResult {
    histograms: Vec<BTreeMap<Vec<LevelIndex>, u64>>,
    explicit: Vec<Vec<Vec<LevelIndex>>>,
    representatives: u64,
    decodes: u64,
}

struct Job<'a> {
    decoder: &'a AsDecoder,
    rows: &'a [RowMatrix],
    walk: Walk,
    a: usize,
    t: usize,
    keep_explicit: bool,
    group_order: u64,
}

impl Job<'_> {
    fn chunks(&self) -> Vec<Vec<LevelIndex>> {
        let depth = self.a.min(2);
        let mut out = Vec::new();
        let mut x = vec![0 as LevelIndex; self.a];
        self.prefixes(&mut x, 0, depth, &mut out);
        out
    }

    fn prefixes(&self, x: &mut Vec<LevelIndex>, k: usize, depth: usize, out: &mut Vec<Vec<LevelIndex>>) {
        if k == depth {
            out.push(x[..k].to_vec());
            return;
        }
        for v in self.first_value(x, k)..self.t as LevelIndex {
            x[k] = v;
            if self.admissible(x, k + 1) {
                self.prefixes(x, k + 1, depth, out);
            }
        }
    }

    fn first_value(&self, x: &[LevelIndex], k: usize) -> LevelIndex {
        match self.walk {
            Walk::Sorted if k > 0 => x[k - 1],
            _ => 0,
        }
    }

    fn admissible(&self, x: &[LevelIndex], k: usize) -> bool {
        match &self.walk {
            Walk::Canonical(g) => g.prefix_ok(x, k),
            _ => true,
        }
    }

    fn run_chunk(&self, prefix: &[LevelIndex]) -> ChunkResult {
        let mut res = ChunkResult {
            histograms: vec![BTreeMap::new(); self.rows.len()],
            explicit: vec![Vec::new(); self.rows.len()],
            ..Default::default()
        };
        let mut x = vec![0 as LevelIndex; self.a];
        x[..prefix.len()].copy_from_slice(prefix);
        let mut scratch = Scratch::new();
        self.extend(&mut x, prefix.len(), &mut scratch, &mut res);
        res
    }

    fn extend(&self, x: &mut Vec<LevelIndex>, k: usize, scratch: &mut Scratch, res: &mut ChunkResult) {
        if k == self.a {
            self.leaf(x, scratch, res);
            return;
        }
        for v in self.first_value(x, k)..self.t as LevelIndex {
            x[k] = v;
            if self.admissible(x, k + 1) {
                self.extend(x, k + 1, scratch, res);
            }
        }
    }

    fn leaf(&self, x: &[LevelIndex], scratch: &mut Scratch, res: &mut ChunkResult) {
        res.representatives += 1;
        let mut depth = 0;
        for w in self.rows {
            res.decodes += 1;
            if !self.decoder.fails(x, w, scratch) {
                break;
            }
            depth += 1;
        }
        if depth == 0 {
            return;
        }
        let (weight, members): (u64, Vec<Vec<LevelIndex>>) = match &self.walk {
            Walk::Plain => (1, vec![x.to_vec()]),
            Walk::Sorted => {
                let w = multinomial_orbit(x);
                let members = if self.keep_explicit {
                    permutations_of_sorted(x)
                } else {
                    Vec::new()
                };
                (w, members)
            }
            Walk::Canonical(g) => {
                let w = self.group_order / g.stabilizer_order(x) as u64;
                let members = if self.keep_explicit {
                    g.orbit(x).into_iter().collect()
                } else {
                    Vec::new()
                };
                (w, members)
            }
        };
        let mut comp = x.to_vec();
        comp.sort_unstable();
        for k in 0..depth {
            *res.histograms[k].entry(comp.clone()).or_insert(0) += weight;
            if self.keep_explicit {
                res.explicit[k].extend(members.iter().cloned());
            }
        }
    }
}

fn permutations_of_sorted(x: &[LevelIndex]) -> Vec<Vec<LevelIndex>> {
    let mut out = Vec::new();
    let mut cur = x.to_vec();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..cur.len().saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..cur.len()).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

/// Inputs that fail for every row, evaluated row by row on the survivors of
/// the previous rows.
pub fn compute_failure_set(
    decoder: &AsDecoder,
    rows: &[RowMatrix],
    options: &EnumerationOptions,
) -> Result<FailureSet> {
    compute_failure_set_with_stats(decoder, rows, options).map(|(fs, _)| fs)
}

pub fn compute_failure_set_with_stats(
    decoder: &AsDecoder,
    rows: &[RowMatrix],
    options: &EnumerationOptions,
) -> Result<(FailureSet, EnumerationStats)> {
    let (mut sets, stats) = compute_nested_failure_sets(decoder, rows, options)?;
    Ok((sets.pop().expect("one set per row"), stats))
}

/// One pass that yields the failure set of every row prefix: entry `k` is the
/// set for `rows[..=k]`.
pub fn compute_nested_failure_sets(
    decoder: &AsDecoder,
    rows: &[RowMatrix],
    options: &EnumerationOptions,
) -> Result<(Vec<FailureSet>, EnumerationStats)> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("at least one row matrix is required".into()));
    }
    let graph = decoder.graph();
    let a = graph.base().a();
    let quantizer = decoder.kernel().quantizer();
    let t = quantizer.len();
    for w in rows {
        decoder.check(&vec![0; a], w)?;
    }

    let (walk, group_order, projected) = choose_walk(decoder, rows, options, a, t)?;
    let projected_decodes = projected.saturating_mul(rows.len() as u128);
    if projected_decodes > options.guard {
        return Err(Error::Guard(format!(
            "about {projected_decodes} decoder calls projected, guard is {}",
            options.guard
        )));
    }

    let keep_explicit = options.keep_explicit && a <= EXPLICIT_MAX_A;
    let as_digest = digest_hex(graph.canonical().as_bytes());
    let config_digest = decoder.digest();
    let mut sets: Vec<FailureSet> = (0..rows.len())
        .map(|k| FailureSet {
            a,
            t,
            quantizer: quantizer.spec().canonical(),
            algorithm: decoder.config().algorithm.name().to_string(),
            as_digest: as_digest.clone(),
            rows_digest: rows_digest(&rows[..=k]),
            config_digest: config_digest.clone(),
            rows: k + 1,
            histogram: BTreeMap::new(),
            explicit: keep_explicit.then(Vec::new),
        })
        .collect();
    let job = Job {
        decoder,
        rows,
        walk,
        a,
        t,
        keep_explicit,
        group_order: group_order as u64,
    };
    let chunks = job.chunks();
    let job_digest = digest_hex(
        format!(
            "{as_digest}\n{}\n{config_digest}\norbit={} explicit={keep_explicit}",
            rows_digest(rows),
            options.orbit_reduction
        )
        .as_bytes(),
    );

    let mut stats = EnumerationStats {
        group_order,
        ..Default::default()
    };
    let mut done = 0usize;
    if let Some(path) = &options.checkpoint {
        if path.exists() {
            let (completed, partial) = read_checkpoint(path, &job_digest)?;
            if completed > chunks.len() || partial.len() != sets.len() {
                return Err(Error::Checkpoint {
                    path: path.clone(),
                    msg: "checkpoint does not match this enumeration".into(),
                });
            }
            sets = partial;
            done = completed;
            stats.resumed_chunks = completed;
        }
    }

    let step = options.checkpoint_every.max(1);
    while done < chunks.len() {
        let end = (done + step).min(chunks.len());
        let results: Vec<ChunkResult> = chunks[done..end]
            .par_iter()
            .map(|prefix| job.run_chunk(prefix))
            .collect();
        for r in results {
            for ((fs, hist), explicit) in sets.iter_mut().zip(r.histograms).zip(r.explicit) {
                for (comp, c) in hist {
                    *fs.histogram.entry(comp).or_insert(0) += c;
                }
                if let Some(list) = fs.explicit.as_mut() {
                    list.extend(explicit);
                }
            }
            stats.representatives += r.representatives;
            stats.decodes += r.decodes;
        }
        done = end;
        if let Some(path) = &options.checkpoint {
            write_checkpoint(path, &job_digest, done, &sets)?;
        }
    }
    for fs in &mut sets {
        if let Some(list) = fs.explicit.as_mut() {
            list.sort_unstable();
        }
    }
    Ok((sets, stats))
}

// Picks the enumeration and returns it with the group order and the number of
// vectors it will visit.
fn choose_walk(
    decoder: &AsDecoder,
    rows: &[RowMatrix],
    options: &EnumerationOptions,
    a: usize,
    t: usize,
) -> Result<(Walk, usize, u128)> {
    let plain = (t as u128).saturating_pow(a as u32);
    let graph = decoder.graph();
    if !options.orbit_reduction || a > crate::absorbing::MAX_AUTOMORPHISM_VARS {
        return Ok((Walk::Plain, 1, plain));
    }
    // keep only symmetries under which every row matrix is unchanged
    let perms: Vec<Vec<u32>> = graph
        .automorphisms()?
        .into_iter()
        .filter(|(_, aux_perm)| {
            rows.iter()
                .all(|w| (0..w.kappa()).all(|r| (0..w.p()).all(|c| w.get(aux_perm[r] as usize, c) == w.get(r, c))))
        })
        .map(|(g, _)| g.var_perm)
        .collect();
    let order = perms.len();
    let factorial: usize = (1..=a).product();
    if order == 1 {
        return Ok((Walk::Plain, 1, plain));
    }
    if order == factorial {
        let count = binomial((t + a - 1) as u128, a as u128);
        return Ok((Walk::Sorted, order, count));
    }
    // Burnside
    let fixed: u128 = perms
        .iter()
        .map(|p| (t as u128).saturating_pow(cycle_count(p)))
        .fold(0u128, u128::saturating_add);
    let orbits = fixed / order as u128;
    Ok((Walk::Canonical(CanonicalGroup::new(perms, a)), order, orbits))
}

fn write_checkpoint(path: &Path, digest: &str, completed: usize, sets: &[FailureSet]) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{CHECKPOINT_MAGIC}").unwrap();
    writeln!(s, "digest {digest}").unwrap();
    writeln!(s, "completed {completed}").unwrap();
    writeln!(s, "sets {}", sets.len()).unwrap();
    for fs in sets {
        s.push_str(&fs.to_text());
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, s)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_checkpoint(path: &Path, digest: &str) -> Result<(usize, Vec<FailureSet>)> {
    let err = |msg: &str| Error::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.split_inclusive('\n');
    let mut header = |prefix: &str| {
        lines
            .next()
            .and_then(|l| l.trim_end().strip_prefix(prefix).map(str::to_string))
            .ok_or_else(|| err(&format!("missing `{}`", prefix.trim())))
    };
    if !header(CHECKPOINT_MAGIC)?.is_empty() {
        return Err(err("not a checkpoint file"));
    }
    if header("digest ")? != digest {
        return Err(err(
            "belongs to a different sub-graph, row set or decoder configuration",
        ));
    }
    let completed = header("completed ")?.parse().map_err(|_| err("bad completed count"))?;
    let count: usize = header("sets ")?.parse().map_err(|_| err("bad set count"))?;
    let mut sets = Vec::with_capacity(count);
    let mut current = String::new();
    for line in lines {
        current.push_str(line);
        if line.trim_end() == "end" {
            sets.push(FailureSet::from_text(&current, &path.display().to_string())?);
            current.clear();
        }
    }
    if sets.len() != count {
        return Err(err("truncated checkpoint"));
    }
    Ok((completed, sets))
}

/// Sum with a running compensation term.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `λ̂ = Σ count · ∏ Pr(ℓ_k)^{c_k}` over the compositions.
pub fn lambda_hat(fs: &FailureSet, probabilities: &[f64]) -> Result<f64> {
    if probabilities.len() != fs.t {
        return Err(Error::Dimension(format!(
            "{} probabilities for {} levels",
            probabilities.len(),
            fs.t
        )));
    }
    let mut acc = NeumaierSum::default();
    for (comp, &count) in &fs.histogram {
        let prod: f64 = comp.iter().map(|&k| probabilities[k as usize]).product();
        acc.add(count as f64 * prod);
    }
    Ok(acc.value().clamp(0.0, 1.0))
}

/// Same quantity summed vector by vector, when the list was kept.
pub fn lambda_hat_explicit(fs: &FailureSet, probabilities: &[f64]) -> Option<f64> {
    let list = fs.explicit.as_ref()?;
    let mut acc = NeumaierSum::default();
    for x in list {
        acc.add(x.iter().map(|&k| probabilities[k as usize]).product());
    }
    Some(acc.value().clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPoint {
    pub ebn0_db: f64,
    pub lambda_hat: f64,
    pub fer_estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub rate: f64,
    pub multiplicity: u64,
    pub points: Vec<BoundPoint>,
}

impl BoundCurve {
    pub fn is_nonincreasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].lambda_hat <= w[0].lambda_hat && w[1].fer_estimate <= w[0].fer_estimate)
    }

    /// CSV with a leading `# config_digest=` comment.
    pub fn to_csv(&self, config_digest: &str) -> String {
        let mut s = String::new();
        writeln!(s, "# config_digest={config_digest}").unwrap();
        writeln!(s, "ebn0_db,lambda_hat,fer_estimate").unwrap();
        for p in &self.points {
            writeln!(s, "{},{:e},{:e}", p.ebn0_db, p.lambda_hat, p.fer_estimate).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str, source_name: &str) -> Result<Vec<BoundPoint>> {
        let mut out = Vec::new();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                if line != "ebn0_db,lambda_hat,fer_estimate" {
                    return Err(Error::parse(source_name, i + 1, "unexpected bound CSV header"));
                }
                header = true;
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(source_name, i + 1, "bad number"))?;
            let [ebn0_db, lambda_hat, fer_estimate] = f[..] else {
                return Err(Error::parse(source_name, i + 1, "expected three columns"));
            };
            out.push(BoundPoint {
                ebn0_db,
                lambda_hat,
                fer_estimate,
            });
        }
        if !header {
            return Err(Error::parse(source_name, 1, "missing bound CSV header"));
        }
        Ok(out)
    }
}

/// `λ̂` at each `Eb/N0` for a code of rate `rate`.
pub fn lambda_curve(fs: &FailureSet, spec: &QuantizerSpec, ebn0_db: &[f64], rate: f64) -> Result<Vec<(f64, f64)>> {
    let quantizer = spec.build()?;
    if quantizer.len() != fs.t || spec.canonical() != fs.quantizer {
        return Err(Error::InvalidArgument(format!(
            "failure set was built with quantizer {}, not {}",
            fs.quantizer,
            spec.canonical()
        )));
    }
    ebn0_db
        .iter()
        .map(|&x| {
            let channel = ChannelModel::from_ebn0(x, rate)?;
            let probs = quantizer.level_probabilities(&channel);
            Ok((x, lambda_hat(fs, &probs)?))
        })
        .collect()
}

/// `N · λ̂` per point, optionally minus `C(N,2)·λ̂²`, clamped to `[0, 1]`.
pub fn fer_estimate(lambda: &[(f64, f64)], rate: f64, multiplicity: u64, second_order: bool) -> Result<BoundCurve> {
    if multiplicity == 0 {
        return Err(Error::InvalidArgument("multiplicity must be at least 1".into()));
    }
    let n = multiplicity as f64;
    let points = lambda
        .iter()
        .map(|&(ebn0_db, l)| {
            let mut fer = n * l;
            if second_order {
                fer -= n * (n - 1.0) / 2.0 * l * l;
            }
            BoundPoint {
                ebn0_db,
                lambda_hat: l,
                fer_estimate: fer.clamp(0.0, 1.0),
            }
        })
        .collect();
    Ok(BoundCurve {
        rate,
        multiplicity,
        points,
    })
}

/// Moves a curve computed at rate 1 to rate `rate`: each point shifts by
/// `−10·log10(rate)` dB with `λ̂` unchanged.
pub fn rate_shift(curve: &BoundCurve, rate: f64) -> Result<BoundCurve> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate must be in (0, 1], got {rate}")));
    }
    let shift = -10.0 * rate.log10();
    Ok(BoundCurve {
        rate: curve.rate * rate,
        multiplicity: curve.multiplicity,
        points: curve
            .points
            .iter()
            .map(|p| BoundPoint {
                ebn0_db: p.ebn0_db + shift,
                ..*p
            })
            .collect(),
    })
}

/// Exhaustive decodability array for a tiny instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactOracle {
    /// Every input vector, lexicographic.
    pub columns: Vec<Vec<LevelIndex>>,
    /// `array[k][i]`: input `i` fails under the `k`-th row matrix.
    pub array: Vec<Vec<bool>>,
    /// Inputs that fail under every row matrix.
    pub failing: Vec<Vec<LevelIndex>>,
}

impl ExactOracle {
    pub fn lambda(&self, probabilities: &[f64]) -> f64 {
        let mut acc = NeumaierSum::default();
        for x in &self.failing {
            acc.add(x.iter().map(|&k| probabilities[k as usize]).product());
        }
        acc.value()
    }
}

/// Enumerates every `κ × p` external-input matrix and every input vector.
pub fn exact_lambda_oracle(decoder: &AsDecoder, p: usize) -> Result<ExactOracle> {
    let a = decoder.graph().base().a();
    let kappa = decoder.graph().kappa();
    let quantizer = decoder.kernel().quantizer().clone();
    let t = quantizer.len() as u128;
    let n_rows = t.checked_pow((kappa * p) as u32).unwrap_or(u128::MAX);
    let n_cols = t.checked_pow(a as u32).unwrap_or(u128::MAX);
    if p == 0 || n_rows > 1 << 24 || n_cols > 1 << 16 {
        return Err(Error::Guard(format!(
            "exact oracle limited to t^(κp) ≤ 2^24 and t^a ≤ 2^16 (got {n_rows} rows, {n_cols} columns)"
        )));
    }
    let digits = |mut idx: u128, len: usize| -> Vec<LevelIndex> {
        let mut v = vec![0; len];
        for d in v.iter_mut().rev() {
            *d = (idx % t) as LevelIndex;
            idx /= t;
        }
        v
    };
    let columns: Vec<Vec<LevelIndex>> = (0..n_cols).map(|i| digits(i, a)).collect();
    let array: Vec<Vec<bool>> = (0..n_rows)
        .into_par_iter()
        .map(|k| {
            let w = RowMatrix::new(kappa, p, digits(k, kappa * p), &quantizer).expect("valid levels");
            let mut scratch = Scratch::new();
            columns.iter().map(|x| decoder.fails(x, &w, &mut scratch)).collect()
        })
        .collect();
    let failing = columns
        .iter()
        .enumerate()
        .filter(|(i, _)| array.iter().all(|row| row[*i]))
        .map(|(_, x)| x.clone())
        .collect();
    Ok(ExactOracle {
        columns,
        array,
        failing,
    })
}
