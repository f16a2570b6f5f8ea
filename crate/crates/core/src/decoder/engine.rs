//! Flooding-schedule message passing shared by the full-graph decoder and the
//! absorbing set decoder.
//!
//! A check may carry one auxiliary input whose value per iteration is supplied
//! by the caller. Once the auxiliary inputs stop changing, a repeated message
//! state (period 1 or 2) proves the decoder will never stop on its own, so the
//! run is cut short with the hard decisions it would have produced at the last
//! iteration.

use super::kernel::{Algorithm, MessageKernel};
use crate::quantizer::LevelIndex;

pub(crate) const NO_AUX: u32 = u32::MAX;

/// Edge-indexed adjacency, edges grouped by check.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub n_vars: usize,
    pub check_start: Vec<u32>,
    pub edge_var: Vec<u32>,
    pub var_start: Vec<u32>,
    pub check_aux: Vec<u32>,
}

impl Layout {
    pub fn new(n_vars: usize, checks: &[Vec<u32>], aux: &[Option<u32>]) -> Self {
        debug_assert_eq!(checks.len(), aux.len());
        let mut check_start = Vec::with_capacity(checks.len() + 1);
        let mut edge_var = Vec::new();
        check_start.push(0);
        for c in checks {
            edge_var.extend_from_slice(c);
            check_start.push(edge_var.len() as u32);
        }
        let mut degree = vec![0u32; n_vars];
        for &v in &edge_var {
            degree[v as usize] += 1;
        }
        let mut var_start = Vec::with_capacity(n_vars + 1);
        var_start.push(0);
        for d in degree {
            var_start.push(var_start.last().unwrap() + d);
        }
        Layout {
            n_vars,
            check_start,
            edge_var,
            var_start,
            check_aux: aux.iter().map(|a| a.unwrap_or(NO_AUX)).collect(),
        }
    }

    pub fn n_checks(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn max_var_degree(&self) -> usize {
        self.var_start
            .windows(2)
            .map(|w| (w[1] - w[0]) as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Reusable buffers for [`run`].
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    cur: Vec<LevelIndex>,
    next: Vec<LevelIndex>,
    prev: Vec<LevelIndex>,
    pub c2v: Vec<LevelIndex>,
    totals: Vec<i64>,
    pub bits: Vec<u8>,
    bits_prev: Vec<u8>,
}

impl Scratch {
    pub fn new() -> Self {
        Scratch::default()
    }

    fn prepare(&mut self, layout: &Layout) {
        let e = layout.n_edges();
        let n = layout.n_vars;
        for buf in [&mut self.cur, &mut self.next, &mut self.prev, &mut self.c2v] {
            buf.clear();
            buf.resize(e, 0);
        }
        self.totals.clear();
        self.totals.resize(n, 0);
        self.bits.clear();
        self.bits.resize(n, 0);
        self.bits_prev.clear();
        self.bits_prev.resize(n, 0);
    }
}

/// Per-iteration record kept when tracing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub variable_to_check: Vec<LevelIndex>,
    pub check_to_variable: Vec<LevelIndex>,
    pub hard_decisions: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct RunOutcome {
    /// Iteration at which the decision in `Scratch::bits` holds.
    pub iterations: usize,
    pub syndrome_ok: bool,
}

pub(crate) struct RunParams<'a> {
    pub max_iterations: usize,
    /// Auxiliary inputs are constant from this iteration on (1-based).
    pub aux_constant_from: usize,
    pub detect_cycles: bool,
    pub trace: Option<&'a mut Vec<IterationTrace>>,
}

/// Runs the flooding decoder. `aux_input(iteration, aux_row)` gives the auxiliary
/// message for a check at a 1-based iteration.
pub(crate) fn run<F>(
    layout: &Layout,
    kernel: &MessageKernel,
    channel: &[LevelIndex],
    aux_input: F,
    mut params: RunParams<'_>,
    s: &mut Scratch,
) -> RunOutcome
where
    F: Fn(usize, u32) -> LevelIndex,
{
    debug_assert_eq!(channel.len(), layout.n_vars);
    s.prepare(layout);
    for (e, &v) in layout.edge_var.iter().enumerate() {
        s.cur[e] = channel[v as usize];
    }
    let spa = kernel.algorithm() == Algorithm::Spa;
    let max_iter = params.max_iterations.max(1);

    for iteration in 1..=max_iter {
        for (v, t) in s.totals.iter_mut().enumerate() {
            *t = kernel.value_units(channel[v]);
        }
        check_pass(layout, kernel, spa, iteration, &aux_input, s);

        std::mem::swap(&mut s.bits, &mut s.bits_prev);
        for (b, &t) in s.bits.iter_mut().zip(&s.totals) {
            *b = u8::from(t <= 0);
        }
        let syndrome_ok = syndrome_satisfied(layout, &s.bits);

        if let Some(trace) = params.trace.as_deref_mut() {
            trace.push(IterationTrace {
                iteration,
                variable_to_check: s.cur.clone(),
                check_to_variable: s.c2v.clone(),
                hard_decisions: s.bits.clone(),
            });
        }
        if syndrome_ok {
            return RunOutcome {
                iterations: iteration,
                syndrome_ok: true,
            };
        }
        if iteration == max_iter {
            break;
        }

        for (e, &v) in layout.edge_var.iter().enumerate() {
            s.next[e] = kernel.quantize_units(s.totals[v as usize] - kernel.value_units(s.c2v[e]));
        }

        if params.detect_cycles && params.trace.is_none() && iteration >= params.aux_constant_from {
            if s.next == s.cur {
                // every later iteration repeats this one
                return RunOutcome {
                    iterations: max_iter,
                    syndrome_ok: false,
                };
            }
            if iteration > params.aux_constant_from && s.next == s.prev {
                // decisions alternate between this iteration and the previous one
                if (max_iter - iteration) % 2 == 1 {
                    std::mem::swap(&mut s.bits, &mut s.bits_prev);
                }
                return RunOutcome {
                    iterations: max_iter,
                    syndrome_ok: false,
                };
            }
        }
        std::mem::swap(&mut s.prev, &mut s.cur);
        std::mem::swap(&mut s.cur, &mut s.next);
    }
    RunOutcome {
        iterations: max_iter,
        syndrome_ok: false,
    }
}

#[inline]
fn check_pass<F>(layout: &Layout, kernel: &MessageKernel, spa: bool, iteration: usize, aux_input: &F, s: &mut Scratch)
where
    F: Fn(usize, u32) -> LevelIndex,
{
    for c in 0..layout.n_checks() {
        let lo = layout.check_start[c] as usize;
        let hi = layout.check_start[c + 1] as usize;
        let aux = layout.check_aux[c];
        let aux_msg = (aux != NO_AUX).then(|| aux_input(iteration, aux));
        let degree = hi - lo + usize::from(aux_msg.is_some());
        if degree == 1 {
            // only one edge: nothing else feeds it
            for e in lo..hi {
                s.c2v[e] = kernel.saturated();
                s.totals[layout.edge_var[e] as usize] += kernel.value_units(s.c2v[e]);
            }
            continue;
        }
        let mut parity = false;
        if spa {
            let mut sum = 0i64;
            if let Some(u) = aux_msg {
                parity ^= kernel.is_negative(u);
                sum += kernel.phi1_units(u);
            }
            for e in lo..hi {
                let m = s.cur[e];
                parity ^= kernel.is_negative(m);
                sum += kernel.phi1_units(m);
            }
            for e in lo..hi {
                let m = s.cur[e];
                let mag = kernel.phi2_of_sum(sum - kernel.phi1_units(m));
                let out = kernel.signed(mag, parity ^ kernel.is_negative(m));
                s.c2v[e] = out;
                s.totals[layout.edge_var[e] as usize] += kernel.value_units(out);
            }
        } else {
            let mut min1 = LevelIndex::MAX;
            let mut min2 = LevelIndex::MAX;
            let mut arg = usize::MAX;
            if let Some(u) = aux_msg {
                parity ^= kernel.is_negative(u);
                min1 = kernel.abs_index(u);
            }
            for e in lo..hi {
                let m = s.cur[e];
                parity ^= kernel.is_negative(m);
                let a = kernel.abs_index(m);
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    arg = e;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for e in lo..hi {
                let m = s.cur[e];
                let mag = if e == arg { min2 } else { min1 };
                let out = kernel.signed(mag, parity ^ kernel.is_negative(m));
                s.c2v[e] = out;
                s.totals[layout.edge_var[e] as usize] += kernel.value_units(out);
            }
        }
    }
}

#[inline]
pub(crate) fn syndrome_satisfied(layout: &Layout, bits: &[u8]) -> bool {
    (0..layout.n_checks()).all(|c| {
        let lo = layout.check_start[c] as usize;
        let hi = layout.check_start[c + 1] as usize;
        layout.edge_var[lo..hi]
            .iter()
            .fold(0u8, |acc, &v| acc ^ bits[v as usize])
            == 0
    })
}
