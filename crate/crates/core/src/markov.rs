//! Transition/dwell accumulation and the Markov objects fitted from it:
//! the count-based matrix P, per-pair mean dwell w and hazard rate
//! lambda = 1/w, the dwell-weighted matrix Q, and the stationary
//! distribution pi.
//!
//! Counting conventions:
//! - Self-transitions are not stored. Residence inside a cell is dwell;
//!   only exits to a different cell are transitions.
//! - The final run of a sequence has no observed exit; its residence is
//!   kept separately as terminal (right-censored) dwell and excluded from
//!   the per-pair dwell multisets.
//! - All counts and dwell durations are exact integer arithmetic; only
//!   P, Q and pi are floating point.

use std::collections::BTreeMap;
use std::io;

use crate::error::{Error, Result};
use crate::hexgrid::{CellId, StateSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairStats {
    pub count: u64,
    pub dwell_sum_s: u64,
}

/// Mergeable accumulator of transition counts and dwell durations per
/// ordered cell pair; merging is field-wise integer sums, so any merge
/// order or partition of the input yields identical stats.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionStats {
    pairs: BTreeMap<(CellId, CellId), PairStats>,
    terminal_dwell_s: BTreeMap<CellId, u64>,
    /// Raw dwell multisets per pair (duration -> multiplicity), kept only
    /// when requested; diagnostics, not part of model fitting.
    raw_dwells: Option<BTreeMap<(CellId, CellId), BTreeMap<u64, u64>>>,
}

impl TransitionStats {
    pub fn new() -> Self {
        TransitionStats::default()
    }

    pub fn with_raw_dwells() -> Self {
        TransitionStats {
            raw_dwells: Some(BTreeMap::new()),
            ..TransitionStats::default()
        }
    }

    /// Records one observed exit i -> j after `dwell_s` seconds of residence
    /// in i. `i != j` and `dwell_s > 0` are required by construction.
    pub fn record(&mut self, from: CellId, to: CellId, dwell_s: u64) {
        assert_ne!(from, to, "self-transitions are not stored");
        assert!(dwell_s > 0, "every recorded exit has positive residence");
        let entry = self.pairs.entry((from, to)).or_default();
        entry.count += 1;
        entry.dwell_sum_s += dwell_s;
        if let Some(raw) = &mut self.raw_dwells {
            *raw.entry((from, to)).or_default().entry(dwell_s).or_insert(0) += 1;
        }
    }

    pub fn record_terminal(&mut self, cell: CellId, dwell_s: u64) {
        *self.terminal_dwell_s.entry(cell).or_insert(0) += dwell_s;
    }

    /// Scans runs of equal consecutive cells: a run of length m in cell i
    /// followed by cell j records one i -> j transition with dwell m * dt;
    /// the final run adds m * dt to i's terminal dwell.
    pub fn accumulate(&mut self, seq: &StateSequence) {
        let Some(&(first, _)) = seq.steps.first() else {
            return;
        };
        let dt = seq.dt_s as u64;
        let mut run_cell = first;
        let mut run_len: u64 = 1;
        for &(cell, _) in &seq.steps[1..] {
            if cell == run_cell {
                run_len += 1;
            } else {
                self.record(run_cell, cell, run_len * dt);
                run_cell = cell;
                run_len = 1;
            }
        }
        self.record_terminal(run_cell, run_len * dt);
    }

    pub fn merge(&mut self, other: TransitionStats) {
        for (pair, stats) in other.pairs {
            let entry = self.pairs.entry(pair).or_default();
            entry.count += stats.count;
            entry.dwell_sum_s += stats.dwell_sum_s;
        }
        for (cell, dwell) in other.terminal_dwell_s {
            *self.terminal_dwell_s.entry(cell).or_insert(0) += dwell;
        }
        if let (Some(mine), Some(theirs)) = (&mut self.raw_dwells, other.raw_dwells) {
            for (pair, multiset) in theirs {
                let entry = mine.entry(pair).or_default();
                for (dwell, n) in multiset {
                    *entry.entry(dwell).or_insert(0) += n;
                }
            }
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(CellId, CellId), &PairStats)> {
        self.pairs.iter()
    }

    pub fn pair(&self, from: CellId, to: CellId) -> Option<&PairStats> {
        self.pairs.get(&(from, to))
    }

    pub fn terminal_dwell(&self) -> &BTreeMap<CellId, u64> {
        &self.terminal_dwell_s
    }

    pub fn total_transitions(&self) -> u64 {
        self.pairs.values().map(|p| p.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.terminal_dwell_s.is_empty()
    }

    /// All occupied cells: sources, destinations, and dwell-only cells,
    /// in lexicographic (q, r) order.
    pub fn state_index(&self) -> Vec<CellId> {
        let mut cells: Vec<CellId> = self
            .pairs
            .keys()
            .flat_map(|&(i, j)| [i, j])
            .chain(self.terminal_dwell_s.keys().copied())
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

/// One fitted transition: all per-pair quantities of Eqs. P/w/lambda/Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEntry {
    pub dest: usize,
    pub count: u64,
    pub dwell_sum_s: u64,
    /// Count-normalized transition probability.
    pub p: f64,
    /// Mean dwell before this exit, seconds.
    pub w_s: f64,
    /// Empirical hazard rate, 1/seconds; lambda * w = 1.
    pub lambda: f64,
    /// Hazard-normalized (dwell-weighted) transition probability.
    pub q: f64,
}

/// Fitted Markov objects over the occupied state set of one
/// (category x window) stream.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    /// Occupied cells, lexicographic (q, r); defines the state index.
    pub states: Vec<CellId>,
    /// Sparse rows aligned with `states`; dwell-only/absorbing states have
    /// empty rows.
    pub rows: Vec<Vec<ModelEntry>>,
    /// Stationary distribution over `states`; `None` when the support graph
    /// has no recurrent class to carry it.
    pub pi: Option<Vec<f64>>,
    /// State indices of the recurrent class pi lives on.
    pub recurrent_class: Option<Vec<usize>>,
    /// Right-censored residence per state (no observed exit), seconds.
    pub terminal_dwell_s: Vec<u64>,
    pub total_transitions: u64,
}

impl MarkovModel {
    /// Fits P, w, lambda, Q and pi from accumulated stats. An empty stats
    /// object yields an empty model; a support graph without a recurrent
    /// class yields `pi = None`.
    pub fn fit(stats: &TransitionStats) -> Result<MarkovModel> {
        let states = stats.state_index();
        let index: BTreeMap<CellId, usize> =
            states.iter().enumerate().map(|(k, &c)| (c, k)).collect();

        let mut rows: Vec<Vec<ModelEntry>> = vec![Vec::new(); states.len()];
        for (&(from, to), &PairStats { count, dwell_sum_s }) in stats.pairs() {
            debug_assert!(count >= 1);
            debug_assert!(dwell_sum_s >= count, "dwell sum below one second per exit");
            rows[index[&from]].push(ModelEntry {
                dest: index[&to],
                count,
                dwell_sum_s,
                p: 0.0,
                w_s: 0.0,
                lambda: 0.0,
                q: 0.0,
            });
        }
        for row in &mut rows {
            if row.is_empty() {
                continue;
            }
            row.sort_by_key(|e| e.dest);
            let count_total: u64 = row.iter().map(|e| e.count).sum();
            let mut lambda_total = 0.0;
            for e in row.iter_mut() {
                e.p = e.count as f64 / count_total as f64;
                e.w_s = e.dwell_sum_s as f64 / e.count as f64;
                e.lambda = e.count as f64 / e.dwell_sum_s as f64;
                lambda_total += e.lambda;
            }
            for e in row.iter_mut() {
                e.q = e.lambda / lambda_total;
            }
        }

        let terminal_dwell_s: Vec<u64> = states
            .iter()
            .map(|c| stats.terminal_dwell().get(c).copied().unwrap_or(0))
            .collect();

        let sparse = SparseRows {
            n: states.len(),
            rows: rows
                .iter()
                .map(|row| row.iter().map(|e| (e.dest, e.p)).collect())
                .collect(),
        };
        let weights: Vec<u64> = rows
            .iter()
            .map(|row| row.iter().map(|e| e.count).sum())
            .collect();
        let (pi, recurrent_class) = match stationary(&sparse, &weights) {
            Ok(sol) => (Some(sol.pi), Some(sol.class)),
            Err(Error::NoRecurrentClass) => (None, None),
            Err(e) => return Err(e),
        };

        Ok(MarkovModel {
            states,
            rows,
            pi,
            recurrent_class,
            terminal_dwell_s,
            total_transitions: stats.total_transitions(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }
}

/// Row-sparse stochastic matrix on its support: `rows[i]` holds
/// `(dest, probability)` entries; empty rows are absorbing.
#[derive(Debug, Clone)]
pub struct SparseRows {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone)]
pub struct StationarySolution {
    /// Length-n distribution; zero outside the selected class.
    pub pi: Vec<f64>,
    /// Sorted state indices of the selected recurrent class.
    pub class: Vec<usize>,
    pub iterations: usize,
}

pub const STATIONARY_TOL: f64 = 1e-12;
pub const STATIONARY_MAX_ITERS: usize = 100_000;

/// Computes the stationary distribution of the recurrent class carrying the
/// greatest share of observed transitions (`weights[i]` = outgoing count of
/// state i). Power iteration with 0.5 lazy damping kills periodicity; the
/// result is zero outside the class and renormalized.
pub fn stationary(p: &SparseRows, weights: &[u64]) -> Result<StationarySolution> {
    assert_eq!(p.rows.len(), p.n);
    assert_eq!(weights.len(), p.n);
    let sccs = strongly_connected_components(p);

    // A recurrent class keeps all its mass: every member has a row and no
    // edge leaves the component. Absorbing states (dwell but no exits) have
    // empty rows and are excluded from the search.
    let mut best: Option<(u64, &Vec<usize>)> = None;
    for scc in &sccs {
        let mut recurrent = true;
        let mut weight: u64 = 0;
        for &v in scc {
            if p.rows[v].is_empty() {
                recurrent = false;
                break;
            }
            weight += weights[v];
            if p.rows[v]
                .iter()
                .any(|&(w, _)| !scc_contains(scc, w))
            {
                recurrent = false;
                break;
            }
        }
        if recurrent {
            match best {
                Some((w, _)) if w >= weight => {}
                _ => best = Some((weight, scc)),
            }
        }
    }
    let Some((_, class)) = best else {
        return Err(Error::NoRecurrentClass);
    };

    let mut class = class.clone();
    class.sort_unstable();
    let local: BTreeMap<usize, usize> = class.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let m = class.len();
    let local_rows: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&v| {
            p.rows[v]
                .iter()
                .map(|&(w, prob)| (local[&w], prob))
                .collect()
        })
        .collect();

    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0f64; m];
    let mut iterations = 0;
    loop {
        iterations += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in local_rows.iter().enumerate() {
            let mass = pi[i];
            for &(j, prob) in row {
                next[j] += mass * prob;
            }
        }
        let mut diff = 0.0;
        for (cur, nxt) in pi.iter_mut().zip(next.iter()) {
            let damped = 0.5 * *cur + 0.5 * *nxt;
            diff += (damped - *cur).abs();
            *cur = damped;
        }
        if diff < STATIONARY_TOL {
            break;
        }
        if iterations >= STATIONARY_MAX_ITERS {
            return Err(Error::NonConvergence {
                iterations,
                residual: diff,
            });
        }
    }

    let total: f64 = pi.iter().sum();
    let mut global = vec![0.0f64; p.n];
    for (k, &v) in class.iter().enumerate() {
        global[v] = pi[k] / total;
    }
    Ok(StationarySolution {
        pi: global,
        class,
        iterations,
    })
}

fn scc_contains(scc: &[usize], v: usize) -> bool {
    scc.contains(&v)
}

/// Iterative Tarjan SCC over the support graph.
fn strongly_connected_components(p: &SparseRows) -> Vec<Vec<usize>> {
    let n = p.n;
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components: Vec<Vec<usize>> = Vec::new();

    // Explicit DFS frames: (node, next edge offset).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        frames.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut edge)) = frames.last_mut() {
            if *edge < p.rows[v].len() {
                let w = p.rows[v][*edge].0;
                *edge += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// Writes the sparse transition list, lexicographic on (i_cell, j_cell).
pub fn write_model_csv<W: io::Write>(mut w: W, model: &MarkovModel) -> io::Result<()> {
    writeln!(w, "i_cell,j_cell,N,dwell_sum,p,w,lambda,q")?;
    for (i, row) in model.rows.iter().enumerate() {
        for e in row {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                model.states[i],
                model.states[e.dest],
                e.count,
                e.dwell_sum_s,
                e.p,
                e.w_s,
                e.lambda,
                e.q
            )?;
        }
    }
    Ok(())
}

/// Writes the stationary distribution table; empty (header only) when the
/// model carries no pi.
pub fn write_pi_csv<W: io::Write>(mut w: W, model: &MarkovModel) -> io::Result<()> {
    writeln!(w, "cell,pi")?;
    if let Some(pi) = &model.pi {
        for (state, value) in model.states.iter().zip(pi.iter()) {
            writeln!(w, "{},{}", state, value)?;
        }
    }
    Ok(())
}

/// Summary of a serialized model file, for `inspect`.
#[derive(Debug, Clone, Default)]
pub struct ModelFileSummary {
    pub n_states: usize,
    pub total_transitions: u64,
    /// (cell, outgoing transition count), descending.
    pub top_mm: Vec<(CellId, u64)>,
}

pub fn summarize_model_csv<R: io::Read>(reader: R) -> Result<ModelFileSummary> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let mut cells = std::collections::BTreeSet::new();
    let mut mm: BTreeMap<CellId, u64> = BTreeMap::new();
    let mut total = 0u64;
    for rec in rdr.records() {
        let rec = rec?;
        let get = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
        let i: CellId = get(0).parse()?;
        let j: CellId = get(1).parse()?;
        let n: u64 = get(2)
            .parse()
            .map_err(|_| Error::Domain(format!("bad N field `{}`", get(2))))?;
        cells.insert(i);
        cells.insert(j);
        *mm.entry(i).or_insert(0) += n;
        total += n;
    }
    let mut top_mm: Vec<(CellId, u64)> = mm.into_iter().collect();
    top_mm.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    top_mm.truncate(10);
    Ok(ModelFileSummary {
        n_states: cells.len(),
        total_transitions: total,
        top_mm,
    })
}
