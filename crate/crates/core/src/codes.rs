//! Parity-check matrices: constructions, alist I/O, GF(2) rank and a small
//! low-weight codeword search.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::absorbing::AbsorbingSetGraph;
use crate::decoder::TannerGraph;
use crate::error::{Error, Result};

/// Ceiling on `C(n, w)` for an unbounded codeword search.
pub const CODEWORD_SEARCH_LIMIT: u128 = 1 << 30;

/// Sparse binary matrix stored as sorted column indices per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    rows: Vec<Vec<u32>>,
}

impl ParityCheckMatrix {
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut col_weight = vec![0usize; n];
        let mut sorted = Vec::with_capacity(rows.len());
        for (r, row) in rows.into_iter().enumerate() {
            let mut row = row;
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Graph(format!("row {r} has a duplicate position")));
            }
            for &c in &row {
                if c as usize >= n {
                    return Err(Error::Graph(format!("row {r} has column {c} >= n = {n}")));
                }
                col_weight[c as usize] += 1;
            }
            sorted.push(row);
        }
        if let Some(c) = col_weight.iter().position(|&w| w == 0) {
            return Err(Error::Graph(format!("column {c} is empty")));
        }
        Ok(ParityCheckMatrix { n, rows: sorted })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n];
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row {
                cols[c as usize].push(r as u32);
            }
        }
        cols
    }

    pub fn column_degrees(&self) -> Vec<usize> {
        self.columns().iter().map(Vec::len).collect()
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// GF(2) rank by elimination on packed rows.
    pub fn rank(&self) -> usize {
        let words = self.n.div_ceil(64);
        let mut mat: Vec<Vec<u64>> = self
            .rows
            .iter()
            .map(|row| {
                let mut bits = vec![0u64; words];
                for &c in row {
                    bits[c as usize / 64] |= 1 << (c % 64);
                }
                bits
            })
            .collect();
        let mut rank = 0;
        for col in 0..self.n {
            let (w, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..mat.len()).find(|&r| mat[r][w] & bit != 0) else {
                continue;
            };
            mat.swap(rank, p);
            let pivot = std::mem::take(&mut mat[rank]);
            for (r, row) in mat.iter_mut().enumerate() {
                if r != rank && row[w] & bit != 0 {
                    for (x, y) in row.iter_mut().zip(&pivot).skip(w) {
                        *x ^= y;
                    }
                }
            }
            mat[rank] = pivot;
            rank += 1;
            if rank == mat.len() {
                break;
            }
        }
        rank
    }

    /// `(n − rank)/n`.
    pub fn rate(&self) -> f64 {
        (self.n - self.rank()) as f64 / self.n as f64
    }

    /// `(n − m)/n`, ignoring dependent rows.
    pub fn design_rate(&self) -> f64 {
        (self.n as f64 - self.m() as f64) / self.n as f64
    }

    pub fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ bits[c as usize]) == 0)
    }

    /// Sub-graph induced by the variable nodes in `support`, relabelled
    /// `0..support.len()` in the given order.
    pub fn induced_subgraph(&self, support: &[u32]) -> Result<AbsorbingSetGraph> {
        let mut local = vec![u32::MAX; self.n];
        for (k, &v) in support.iter().enumerate() {
            let slot = local
                .get_mut(v as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("variable {v} out of range")))?;
            if *slot != u32::MAX {
                return Err(Error::InvalidArgument(format!("variable {v} repeated in support")));
            }
            *slot = k as u32;
        }
        let checks = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter_map(|&v| Some(local[v as usize]).filter(|&l| l != u32::MAX))
                    .collect::<Vec<_>>()
            })
            .filter(|c| !c.is_empty())
            .collect();
        AbsorbingSetGraph::from_checks(support.len(), checks)
    }

    pub fn tanner_graph(&self) -> Result<TannerGraph> {
        TannerGraph::from_checks(self.n, self.rows.clone())
    }

    pub fn to_alist(&self) -> String {
        let cols = self.columns();
        let col_deg: Vec<usize> = cols.iter().map(Vec::len).collect();
        let row_deg = self.row_degrees();
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        writeln!(s, "{} {}", self.n, self.m()).unwrap();
        writeln!(
            s,
            "{} {}",
            col_deg.iter().max().unwrap_or(&0),
            row_deg.iter().max().unwrap_or(&0)
        )
        .unwrap();
        writeln!(s, "{}", join(&mut col_deg.iter().copied())).unwrap();
        writeln!(s, "{}", join(&mut row_deg.iter().copied())).unwrap();
        for col in &cols {
            writeln!(s, "{}", join(&mut col.iter().map(|&r| r as usize + 1))).unwrap();
        }
        for row in &self.rows {
            writeln!(s, "{}", join(&mut row.iter().map(|&c| c as usize + 1))).unwrap();
        }
        s
    }

    /// Parses the alist format (1-based indices, zero padding allowed).
    pub fn from_alist(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut last = 0;
        let mut next_numbers = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (no, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    source_name,
                    last + 1,
                    format!("unexpected end of file, expected {what}"),
                )
            })?;
            last = no;
            let nums = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<usize>()
                        .map_err(|_| Error::parse(source_name, no, format!("bad number `{f}` in {what}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((no, nums))
        };
        let (no, dims) = next_numbers("dimensions")?;
        let [n, m] = dims[..] else {
            return Err(Error::parse(source_name, no, "expected `n m`"));
        };
        let (no, maxes) = next_numbers("maximum degrees")?;
        if maxes.len() != 2 {
            return Err(Error::parse(source_name, no, "expected two maximum degrees"));
        }
        let (no, col_deg) = next_numbers("column degrees")?;
        if col_deg.len() != n {
            return Err(Error::parse(source_name, no, format!("expected {n} column degrees")));
        }
        let (no, row_deg) = next_numbers("row degrees")?;
        if row_deg.len() != m {
            return Err(Error::parse(source_name, no, format!("expected {m} row degrees")));
        }
        let mut cols = Vec::with_capacity(n);
        for (c, &deg) in col_deg.iter().enumerate() {
            let (no, list) = next_numbers(&format!("column {}", c + 1))?;
            let entries: Vec<usize> = list.into_iter().filter(|&x| x != 0).collect();
            if entries.len() != deg {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("column {} lists {} entries, degree is {deg}", c + 1, entries.len()),
                ));
            }
            if let Some(&bad) = entries.iter().find(|&&r| r > m) {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("row index {bad} exceeds m = {m}"),
                ));
            }
            cols.push(entries);
        }
        let mut rows = Vec::with_capacity(m);
        for (r, &deg) in row_deg.iter().enumerate() {
            let (no, list) = next_numbers(&format!("row {}", r + 1))?;
            let entries: Vec<u32> = list.into_iter().filter(|&x| x != 0).map(|x| x as u32 - 1).collect();
            if entries.len() != deg {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("row {} lists {} entries, degree is {deg}", r + 1, entries.len()),
                ));
            }
            if let Some(&bad) = entries.iter().find(|&&c| c as usize >= n) {
                return Err(Error::parse(
                    source_name,
                    no,
                    format!("column index {} exceeds n = {n}", bad + 1),
                ));
            }
            rows.push(entries);
        }
        let h = ParityCheckMatrix::from_rows(n, rows).map_err(|e| Error::parse(source_name, last, e.to_string()))?;
        let mut from_cols: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (c, list) in cols.iter().enumerate() {
            let mut l: Vec<u32> = list.iter().map(|&r| r as u32 - 1).collect();
            l.sort_unstable();
            from_cols[c] = l;
        }
        if from_cols != h.columns() {
            return Err(Error::parse(source_name, last, "column lists disagree with row lists"));
        }
        Ok(h)
    }

    pub fn load_alist(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_alist(&text, &path.display().to_string())
    }

    pub fn store_alist(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_alist())?;
        Ok(())
    }
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Block matrix of `size × size` circulant permutation matrices; `shifts[j][i]`
/// is the right shift of block `(j, i)`, `None` for a zero block.
pub fn quasi_cyclic(size: usize, shifts: &[Vec<Option<usize>>]) -> Result<ParityCheckMatrix> {
    let width = shifts.first().map_or(0, Vec::len);
    if size == 0 || width == 0 || shifts.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidArgument(
            "shift table must be a non-empty rectangle".into(),
        ));
    }
    let mut rows = Vec::with_capacity(shifts.len() * size);
    for block_row in shifts {
        for r in 0..size {
            let row = block_row
                .iter()
                .enumerate()
                .filter_map(|(i, s)| s.map(|s| (i * size + (r + s) % size) as u32))
                .collect();
            rows.push(row);
        }
    }
    ParityCheckMatrix::from_rows(size * width, rows)
}

/// Array code: a `gamma × p` grid of `p × p` circulants with shift `j·i`.
pub fn array_code(gamma: usize, p: usize) -> Result<ParityCheckMatrix> {
    if !is_prime(p) {
        return Err(Error::InvalidArgument(format!("array code needs a prime p, got {p}")));
    }
    if gamma == 0 || gamma >= p {
        return Err(Error::InvalidArgument(format!(
            "need 0 < gamma < p, got gamma = {gamma}, p = {p}"
        )));
    }
    let shifts: Vec<Vec<Option<usize>>> = (0..gamma).map(|j| (0..p).map(|i| Some(j * i % p)).collect()).collect();
    quasi_cyclic(p, &shifts)
}

/// The (155,64) quasi-cyclic Tanner code built from 31 × 31 circulants.
pub fn tanner_155() -> ParityCheckMatrix {
    let shifts = [[1, 2, 4, 8, 16], [5, 10, 20, 9, 18], [25, 19, 7, 14, 28]];
    let table: Vec<Vec<Option<usize>>> = shifts.iter().map(|r| r.iter().map(|&s| Some(s)).collect()).collect();
    quasi_cyclic(31, &table).expect("fixed shift table")
}

/// Type-I two-dimensional Euclidean geometry code over GF(8), length 63.
///
/// Points are the nonzero elements of GF(64); the parity-check matrix is the
/// circulant generated by one line that misses the origin.
pub fn eg_63() -> ParityCheckMatrix {
    // GF(64) with primitive polynomial x^6 + x + 1
    let mut exp = [0u8; 63];
    let mut log = [0usize; 64];
    let mut x = 1u8;
    for (i, e) in exp.iter_mut().enumerate() {
        *e = x;
        log[x as usize] = i;
        x <<= 1;
        if x & 0x40 != 0 {
            x ^= 0x43;
        }
    }
    // GF(8) inside GF(64) is {0} ∪ {α^(9k)}; the line is {1 + β·α}
    let mut line: Vec<usize> = std::iter::once(0)
        .chain((0..7).map(|k| log[(1 ^ exp[(9 * k + 1) % 63]) as usize]))
        .collect();
    line.sort_unstable();
    let rows = (0..63)
        .map(|r| line.iter().map(|&c| ((c + r) % 63) as u32).collect())
        .collect();
    ParityCheckMatrix::from_rows(63, rows).expect("circulant has full support")
}

/// Random `(dv, dc)`-regular matrix from a shuffled socket list, with socket
/// swaps until no row repeats a column and no two columns share two rows.
pub fn regular_random(n: usize, dv: usize, dc: usize, seed: u64) -> Result<ParityCheckMatrix> {
    if n == 0 || dv == 0 || dc == 0 || !(n * dv).is_multiple_of(dc) {
        return Err(Error::InvalidArgument(format!(
            "n·dv must be a positive multiple of dc (n = {n}, dv = {dv}, dc = {dc})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sockets: Vec<u32> = (0..n as u32).flat_map(|c| std::iter::repeat_n(c, dv)).collect();
    sockets.shuffle(&mut rng);
    let mut rows: Vec<Vec<u32>> = sockets.chunks(dc).map(<[u32]>::to_vec).collect();
    let m = rows.len();
    for _ in 0..1_000_000 {
        let Some((r, k)) = find_bad_socket(&rows, n) else {
            return ParityCheckMatrix::from_rows(n, rows);
        };
        let r2 = rng.random_range(0..m);
        let k2 = rng.random_range(0..dc);
        let (x, y) = (rows[r][k], rows[r2][k2]);
        if r2 == r || rows[r].contains(&y) || rows[r2].contains(&x) {
            continue;
        }
        rows[r][k] = y;
        rows[r2][k2] = x;
    }
    Err(Error::InvalidArgument(
        "could not draw a regular matrix without 4-cycles".into(),
    ))
}

// A socket that sits on a repeated column or on a 4-cycle.
fn find_bad_socket(rows: &[Vec<u32>], n: usize) -> Option<(usize, usize)> {
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for (k, &c) in row.iter().enumerate() {
            if row[..k].contains(&c) {
                return Some((r, k));
            }
            cols[c as usize].push(r as u32);
        }
    }
    let mut shared = vec![0u8; rows.len()];
    let mut touched = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        for (k, &c) in row.iter().enumerate() {
            for &r2 in &cols[c as usize] {
                let r2 = r2 as usize;
                if r2 == r {
                    continue;
                }
                if shared[r2] == 1 {
                    return Some((r, k));
                }
                shared[r2] = 1;
                touched.push(r2);
            }
        }
        for &t in &touched {
            shared[t] = 0;
        }
        touched.clear();
    }
    None
}

/// Supports of all weight-`w` codewords, in lexicographic order, stopping
/// after `limit` hits if given.
pub fn find_weight_w_codewords(h: &ParityCheckMatrix, w: usize, limit: Option<usize>) -> Result<Vec<Vec<u32>>> {
    if w == 0 {
        return Ok(Vec::new());
    }
    if limit.is_none() && binomial(h.n() as u128, w as u128) > CODEWORD_SEARCH_LIMIT {
        return Err(Error::Guard(format!(
            "C({}, {w}) exceeds the codeword search limit; pass a result limit",
            h.n()
        )));
    }
    let cols = h.columns();
    let mut syndrome = vec![0u8; h.m()];
    let mut weight = 0usize;
    let mut chosen: Vec<u32> = Vec::with_capacity(w);
    let mut out = Vec::new();
    search(
        h.n(),
        w,
        &cols,
        &mut syndrome,
        &mut weight,
        &mut chosen,
        0,
        limit,
        &mut out,
    );
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn search(
    n: usize,
    w: usize,
    cols: &[Vec<u32>],
    syndrome: &mut [u8],
    weight: &mut usize,
    chosen: &mut Vec<u32>,
    start: usize,
    limit: Option<usize>,
    out: &mut Vec<Vec<u32>>,
) {
    let remaining = w - chosen.len();
    if remaining == 0 {
        if *weight == 0 {
            out.push(chosen.clone());
        }
        return;
    }
    // each column clears at most its degree of unsatisfied checks
    let max_deg = cols.iter().map(Vec::len).max().unwrap_or(0);
    if *weight > remaining * max_deg {
        return;
    }
    for c in start..=n - remaining {
        if limit.is_some_and(|l| out.len() >= l) {
            return;
        }
        for &r in &cols[c] {
            let s = &mut syndrome[r as usize];
            *s ^= 1;
            if *s == 1 {
                *weight += 1;
            } else {
                *weight -= 1;
            }
        }
        chosen.push(c as u32);
        search(n, w, cols, syndrome, weight, chosen, c + 1, limit, out);
        chosen.pop();
        for &r in &cols[c] {
            let s = &mut syndrome[r as usize];
            *s ^= 1;
            if *s == 1 {
                *weight += 1;
            } else {
                *weight -= 1;
            }
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}
