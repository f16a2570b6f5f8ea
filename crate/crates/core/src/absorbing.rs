//! Problematic sub-graphs and the absorbing set decoder graph built on them.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::MessageKernel;
use crate::error::{Error, Result};
use crate::quantizer::LevelIndex;

/// Largest sub-graph accepted by the automorphism search.
pub const MAX_AUTOMORPHISM_VARS: usize = 12;

/// The sub-graph induced by `a` variable nodes: each check lists its
/// neighbours inside the set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbsorbingSetGraph {
    a: usize,
    checks: Vec<Vec<u32>>,
    var_checks: Vec<Vec<u32>>,
}

/// Everything [`AbsorbingSetGraph::validate`] can say about a sub-graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub a: usize,
    pub b: usize,
    pub gamma: usize,
    /// Shortest cycle length, `None` for a forest.
    pub girth: Option<usize>,
    pub absorbing: bool,
    /// Only degree-1 and degree-2 checks.
    pub elementary: bool,
    /// Elementary, and every variable sees at least two even-degree checks.
    pub leafless: bool,
}

/// A variable permutation together with the check permutation it induces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Automorphism {
    pub var_perm: Vec<u32>,
    pub check_perm: Vec<u32>,
}

impl AbsorbingSetGraph {
    pub fn from_checks(a: usize, checks: Vec<Vec<u32>>) -> Result<Self> {
        if a == 0 {
            return Err(Error::Graph("sub-graph needs at least one variable".into()));
        }
        if checks.is_empty() {
            return Err(Error::Graph("sub-graph needs at least one check".into()));
        }
        let mut var_checks = vec![Vec::new(); a];
        let mut sorted_checks = Vec::with_capacity(checks.len());
        for (j, c) in checks.into_iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Graph(format!("check {j} is isolated")));
            }
            let mut c = c;
            c.sort_unstable();
            if c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Graph(format!("check {j} has a repeated edge")));
            }
            for &v in &c {
                if v as usize >= a {
                    return Err(Error::Graph(format!("check {j} references variable {v}, but a = {a}")));
                }
                var_checks[v as usize].push(j as u32);
            }
            sorted_checks.push(c);
        }
        if let Some(v) = var_checks.iter().position(Vec::is_empty) {
            return Err(Error::Graph(format!("variable {v} is isolated")));
        }
        Ok(AbsorbingSetGraph {
            a,
            checks: sorted_checks,
            var_checks,
        })
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn gamma(&self) -> usize {
        self.checks.len()
    }

    pub fn checks(&self) -> &[Vec<u32>] {
        &self.checks
    }

    pub fn check(&self, j: usize) -> &[u32] {
        &self.checks[j]
    }

    pub fn variable(&self, i: usize) -> &[u32] {
        &self.var_checks[i]
    }

    /// Internal degree `ρ_j`.
    pub fn rho(&self, j: usize) -> usize {
        self.checks[j].len()
    }

    pub fn is_odd(&self, j: usize) -> bool {
        self.rho(j) % 2 == 1
    }

    pub fn b(&self) -> usize {
        (0..self.gamma()).filter(|&j| self.is_odd(j)).count()
    }

    pub fn odd_checks(&self) -> Vec<u32> {
        (0..self.gamma() as u32).filter(|&j| self.is_odd(j as usize)).collect()
    }

    /// `(odd, even)` neighbour counts of variable `i`.
    pub fn parity_profile(&self, i: usize) -> (usize, usize) {
        let odd = self.var_checks[i].iter().filter(|&&j| self.is_odd(j as usize)).count();
        (odd, self.var_checks[i].len() - odd)
    }

    pub fn is_absorbing(&self) -> bool {
        (0..self.a).all(|i| {
            let (odd, even) = self.parity_profile(i);
            even > odd
        })
    }

    pub fn girth(&self) -> Option<usize> {
        // nodes 0..a are variables, a.. are checks
        let total = self.a + self.gamma();
        let neighbours = |u: usize| -> Vec<usize> {
            if u < self.a {
                self.var_checks[u].iter().map(|&j| self.a + j as usize).collect()
            } else {
                self.checks[u - self.a].iter().map(|&v| v as usize).collect()
            }
        };
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        for s in 0..total {
            dist.fill(usize::MAX);
            parent.fill(usize::MAX);
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if best.is_some_and(|g| 2 * dist[u] + 1 >= g) {
                    break;
                }
                for w in neighbours(u) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        queue.push_back(w);
                    } else if parent[u] != w {
                        let len = dist[u] + dist[w] + 1;
                        best = Some(best.map_or(len, |g| g.min(len)));
                    }
                }
            }
        }
        best
    }

    pub fn validate(&self) -> Classification {
        let elementary = self.checks.iter().all(|c| c.len() <= 2);
        let leafless = elementary && (0..self.a).all(|i| self.parity_profile(i).1 >= 2);
        Classification {
            a: self.a,
            b: self.b(),
            gamma: self.gamma(),
            girth: self.girth(),
            absorbing: self.is_absorbing(),
            elementary,
            leafless,
        }
    }

    /// All variable permutations that map the check multiset onto itself.
    /// The identity comes first.
    pub fn automorphisms(&self) -> Result<Vec<Automorphism>> {
        let a = self.a;
        if a > MAX_AUTOMORPHISM_VARS {
            return Err(Error::Guard(format!(
                "automorphism search limited to {MAX_AUTOMORPHISM_VARS} variables, got {a}"
            )));
        }
        let mut shared = vec![vec![0u32; a]; a];
        for c in &self.checks {
            for &u in c {
                for &v in c {
                    if u != v {
                        shared[u as usize][v as usize] += 1;
                    }
                }
            }
        }
        let signature: Vec<Vec<usize>> = (0..a)
            .map(|i| {
                let mut s: Vec<usize> = self.var_checks[i].iter().map(|&j| self.rho(j as usize)).collect();
                s.sort_unstable();
                s
            })
            .collect();
        let mut multiset: BTreeMap<&[u32], Vec<u32>> = BTreeMap::new();
        for (j, c) in self.checks.iter().enumerate() {
            multiset.entry(c.as_slice()).or_default().push(j as u32);
        }

        let mut found = Vec::new();
        let mut perm = vec![u32::MAX; a];
        let mut used = vec![false; a];
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        // iterative backtracking: (variable, next candidate)
        while let Some((v, start)) = stack.pop() {
            if v == a {
                if let Some(check_perm) = self.induced_check_perm(&perm, &multiset) {
                    found.push(Automorphism {
                        var_perm: perm.clone(),
                        check_perm,
                    });
                }
                continue;
            }
            if perm[v] != u32::MAX {
                used[perm[v] as usize] = false;
                perm[v] = u32::MAX;
            }
            let next = (start..a).find(|&w| {
                !used[w] && signature[v] == signature[w] && (0..v).all(|u| shared[u][v] == shared[perm[u] as usize][w])
            });
            if let Some(w) = next {
                perm[v] = w as u32;
                used[w] = true;
                stack.push((v, w + 1));
                stack.push((v + 1, 0));
            }
        }
        found.sort();
        Ok(found)
    }

    fn induced_check_perm(&self, perm: &[u32], multiset: &BTreeMap<&[u32], Vec<u32>>) -> Option<Vec<u32>> {
        let mut taken: BTreeMap<&[u32], usize> = BTreeMap::new();
        let mut check_perm = Vec::with_capacity(self.gamma());
        for c in &self.checks {
            let mut image: Vec<u32> = c.iter().map(|&v| perm[v as usize]).collect();
            image.sort_unstable();
            let (key, targets) = multiset.get_key_value(image.as_slice())?;
            let k = taken.entry(key).or_insert(0);
            check_perm.push(*targets.get(*k)?);
            *k += 1;
        }
        Some(check_perm)
    }

    /// Text form: a header `a b gamma` followed by one `check: variables` line per check.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.a, self.b(), self.gamma()).unwrap();
        for (j, c) in self.checks.iter().enumerate() {
            let vars: Vec<String> = c.iter().map(u32::to_string).collect();
            writeln!(s, "{j}: {}", vars.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str, source_name: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut rows: Vec<Option<Vec<u32>>> = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((a, _, gamma)) = header else {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(Error::parse(source_name, line_no, "expected header `a b gamma`"));
                }
                let mut nums = [0usize; 3];
                for (slot, f) in nums.iter_mut().zip(&fields) {
                    *slot = f
                        .parse()
                        .map_err(|_| Error::parse(source_name, line_no, format!("bad header field `{f}`")))?;
                }
                header = Some((nums[0], nums[1], nums[2]));
                rows = vec![None; nums[2]];
                continue;
            };
            let (id, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(source_name, line_no, "expected `check: variables`"))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| Error::parse(source_name, line_no, format!("bad check id `{}`", id.trim())))?;
            if id >= gamma {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("check id {id} out of range for gamma = {gamma}"),
                ));
            }
            if rows[id].is_some() {
                return Err(Error::parse(source_name, line_no, format!("check {id} listed twice")));
            }
            let mut vars = Vec::new();
            for f in rest.split_whitespace() {
                let v: u32 = f
                    .parse()
                    .map_err(|_| Error::parse(source_name, line_no, format!("bad variable `{f}`")))?;
                if v as usize >= a {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("variable {v} out of range for a = {a}"),
                    ));
                }
                if vars.contains(&v) {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("duplicate edge to variable {v}"),
                    ));
                }
                vars.push(v);
            }
            if vars.is_empty() {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("check {id} has no variables"),
                ));
            }
            rows[id] = Some(vars);
        }
        let Some((a, b, _)) = header else {
            return Err(Error::parse(source_name, last_line.max(1), "missing header"));
        };
        if let Some(missing) = rows.iter().position(Option::is_none) {
            return Err(Error::parse(
                source_name,
                last_line,
                format!("check {missing} is missing"),
            ));
        }
        let graph = AbsorbingSetGraph::from_checks(a, rows.into_iter().flatten().collect())
            .map_err(|e| Error::parse(source_name, last_line, e.to_string()))?;
        if graph.b() != b {
            return Err(Error::parse(
                source_name,
                1,
                format!("header says b = {b}, edges give b = {}", graph.b()),
            ));
        }
        Ok(graph)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Which checks of the sub-graph receive an auxiliary external input.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxPolicy {
    #[default]
    AllChecks,
    OddOnly,
    Explicit(Vec<usize>),
}

/// The sub-graph plus one auxiliary input edge on each selected check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderGraphDA {
    base: AbsorbingSetGraph,
    aux_checks: Vec<u32>,
    aux_row: Vec<Option<u32>>,
    external_degrees: Option<Vec<u32>>,
}

impl DecoderGraphDA {
    pub fn build(base: AbsorbingSetGraph, policy: &AuxPolicy) -> Result<Self> {
        let gamma = base.gamma();
        let aux_checks: Vec<u32> = match policy {
            AuxPolicy::AllChecks => (0..gamma as u32).collect(),
            AuxPolicy::OddOnly => base.odd_checks(),
            AuxPolicy::Explicit(list) => {
                let mut v: Vec<u32> = Vec::with_capacity(list.len());
                for &j in list {
                    if j >= gamma {
                        return Err(Error::InvalidArgument(format!(
                            "auxiliary check {j} out of range for gamma = {gamma}"
                        )));
                    }
                    v.push(j as u32);
                }
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        let mut aux_row = vec![None; gamma];
        for (row, &j) in aux_checks.iter().enumerate() {
            aux_row[j as usize] = Some(row as u32);
        }
        Ok(DecoderGraphDA {
            base,
            aux_checks,
            aux_row,
            external_degrees: None,
        })
    }

    /// Records the external degrees `τ_j`; informational only.
    pub fn with_external_degrees(mut self, tau: Vec<u32>) -> Result<Self> {
        if tau.len() != self.base.gamma() {
            return Err(Error::Dimension(format!(
                "{} external degrees for {} checks",
                tau.len(),
                self.base.gamma()
            )));
        }
        self.external_degrees = Some(tau);
        Ok(self)
    }

    pub fn external_degrees(&self) -> Option<&[u32]> {
        self.external_degrees.as_deref()
    }

    pub fn base(&self) -> &AbsorbingSetGraph {
        &self.base
    }

    /// Number of auxiliary inputs `κ`.
    pub fn kappa(&self) -> usize {
        self.aux_checks.len()
    }

    pub fn aux_checks(&self) -> &[u32] {
        &self.aux_checks
    }

    /// Row of the external-input matrix feeding check `j`, if any.
    pub fn aux_row(&self, j: usize) -> Option<u32> {
        self.aux_row[j]
    }

    pub(crate) fn aux_rows(&self) -> &[Option<u32>] {
        &self.aux_row
    }

    /// Automorphisms of the sub-graph that also map the auxiliary checks onto
    /// themselves, with `aux_perm[r]` the row that row `r` moves to.
    pub fn automorphisms(&self) -> Result<Vec<(Automorphism, Vec<u32>)>> {
        let mut out = Vec::new();
        for g in self.base.automorphisms()? {
            let aux_perm: Option<Vec<u32>> = self
                .aux_checks
                .iter()
                .map(|&j| self.aux_row[g.check_perm[j as usize] as usize])
                .collect();
            if let Some(p) = aux_perm {
                out.push((g, p));
            }
        }
        Ok(out)
    }

    /// Short stable description used in digests.
    pub fn canonical(&self) -> String {
        let mut s = self.base.to_text();
        let aux: Vec<String> = self.aux_checks.iter().map(u32::to_string).collect();
        writeln!(s, "aux: {}", aux.join(" ")).unwrap();
        s
    }
}

/// Collapses the external messages into a check into one auxiliary input:
/// sign product with `Φ`-domain sum for SPA, minimum magnitude for MSA.
pub fn aggregate_external(kernel: &MessageKernel, messages: &[LevelIndex]) -> Result<LevelIndex> {
    if messages.is_empty() {
        return Err(Error::InvalidArgument("no external messages to aggregate".into()));
    }
    Ok(kernel.check_update(messages))
}

/// Sub-graphs shipped with the crate.
pub mod fixtures {
    use super::AbsorbingSetGraph;

    pub const AS_4_2_G6: &str = include_str!("../fixtures/as_4_2_g6.as");
    pub const AS_6_0_G8: &str = include_str!("../fixtures/as_6_0_g8.as");
    pub const AS_3_3: &str = include_str!("../fixtures/as_3_3.as");
    pub const AS_9_0: &str = include_str!("../fixtures/as_9_0.as");
    pub const AS_8_2: &str = include_str!("../fixtures/as_8_2.as");

    pub const NAMES: [&str; 5] = ["as_4_2_g6", "as_6_0_g8", "as_3_3", "as_9_0", "as_8_2"];

    /// Parses a shipped fixture by name.
    pub fn load(name: &str) -> Option<AbsorbingSetGraph> {
        let text = match name {
            "as_4_2_g6" => AS_4_2_G6,
            "as_6_0_g8" => AS_6_0_G8,
            "as_3_3" => AS_3_3,
            "as_9_0" => AS_9_0,
            "as_8_2" => AS_8_2,
            _ => return None,
        };
        Some(AbsorbingSetGraph::from_text(text, name).expect("shipped fixture parses"))
    }
}
