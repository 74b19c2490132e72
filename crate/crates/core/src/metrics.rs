//! Local and global metrics over the Markov-induced mobility graph:
//! mobility magnitude, dwell-time magnitude, betweenness centrality,
//! average shortest-path length, and modularity with greedy community
//! detection.
//!
//! Shortest paths are unweighted hops on the support digraph (the directed
//! graph induced by p_ij > 0). Modularity uses the symmetrized weights
//! R_ij = (p_ij + p_ji) / 2 with R_ii = 0.

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hexgrid::CellId;
use crate::markov::{MarkovModel, TransitionStats};

/// Edge weights for the symmetrized modularity view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// R_ij = (p_ij + p_ji) / 2, probabilities as written.
    #[default]
    Probability,
    /// R_ij = (N_ij + N_ji) / 2. Experimental: weights busy pairs by raw
    /// traffic instead of per-row shares.
    TransitionCounts,
}

/// The directed support graph plus its symmetrized weighted view.
#[derive(Debug, Clone)]
pub struct MobilityGraph {
    pub n: usize,
    /// Outgoing neighbor lists, sorted.
    adj: Vec<Vec<usize>>,
    /// Symmetrized undirected weights, sorted neighbor lists without
    /// self-loops. Each undirected edge appears in both endpoint lists.
    sym: Vec<Vec<(usize, f64)>>,
    /// Node strengths k_i = sum_j R_ij.
    strength: Vec<f64>,
    /// Total weight y = (1/2) * sum_ij R_ij.
    total_weight: f64,
}

impl MobilityGraph {
    pub fn from_model(model: &MarkovModel, mode: WeightMode) -> Self {
        let n = model.n_states();
        let mut directed: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in model.rows.iter().enumerate() {
            for e in row {
                let w = match mode {
                    WeightMode::Probability => e.p,
                    WeightMode::TransitionCounts => e.count as f64,
                };
                directed[i].push((e.dest, w));
            }
        }
        Self::from_directed_weights(n, &directed)
    }

    /// Builds from an unweighted edge list; directed weights default to the
    /// row-stochastic 1/outdegree.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut outdeg = vec![0usize; n];
        for &(u, _) in edges {
            outdeg[u] += 1;
        }
        let mut directed: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            directed[u].push((v, 1.0 / outdeg[u] as f64));
        }
        Self::from_directed_weights(n, &directed)
    }

    fn from_directed_weights(n: usize, directed: &[Vec<(usize, f64)>]) -> Self {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sym_map: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, row) in directed.iter().enumerate() {
            for &(j, w) in row {
                adj[i].push(j);
                if i != j {
                    *sym_map[i].entry(j).or_insert(0.0) += 0.5 * w;
                    *sym_map[j].entry(i).or_insert(0.0) += 0.5 * w;
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let sym: Vec<Vec<(usize, f64)>> = sym_map
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect();
        let strength: Vec<f64> = sym
            .iter()
            .map(|list| list.iter().map(|&(_, w)| w).sum())
            .collect();
        let total_weight = 0.5 * strength.iter().sum::<f64>();
        MobilityGraph {
            n,
            adj,
            sym,
            strength,
            total_weight,
        }
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    /// Symmetrized weighted neighbors of `v` (both directions of each
    /// undirected edge appear once here).
    pub fn sym_neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.sym[v]
    }

    pub fn strength(&self, v: usize) -> f64 {
        self.strength[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|l| l.len()).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }
}

/// MM_i: total outgoing transition count per cell; dwell-only cells get 0.
pub fn mobility_magnitude(stats: &TransitionStats) -> BTreeMap<CellId, u64> {
    let mut mm: BTreeMap<CellId, u64> = stats.state_index().into_iter().map(|c| (c, 0)).collect();
    for (&(from, _), pair) in stats.pairs() {
        *mm.get_mut(&from).unwrap() += pair.count;
    }
    mm
}

/// DTM_i: cumulative dwell (seconds) before outbound transitions per cell,
/// which equals the per-pair dwell sums exactly. Terminal (censored)
/// residence is included only when `include_terminal` is set.
pub fn dwell_time_magnitude(
    stats: &TransitionStats,
    include_terminal: bool,
) -> BTreeMap<CellId, u64> {
    let mut dtm: BTreeMap<CellId, u64> = stats.state_index().into_iter().map(|c| (c, 0)).collect();
    for (&(from, _), pair) in stats.pairs() {
        *dtm.get_mut(&from).unwrap() += pair.dwell_sum_s;
    }
    if include_terminal {
        for (&cell, &dwell) in stats.terminal_dwell() {
            *dtm.get_mut(&cell).unwrap() += dwell;
        }
    }
    dtm
}

const BETWEENNESS_BLOCK: usize = 64;

/// Raw betweenness centrality (Brandes) on the unweighted support digraph.
///
/// Sources are processed in fixed blocks whose partial sums are reduced in
/// block order, so results are bit-identical for any worker count.
pub fn betweenness(g: &MobilityGraph) -> Vec<f64> {
    let n = g.n;
    if n == 0 {
        return Vec::new();
    }
    let sources: Vec<usize> = (0..n).collect();
    let block_sums: Vec<Vec<f64>> = sources
        .par_chunks(BETWEENNESS_BLOCK)
        .map(|block| {
            let mut acc = vec![0.0f64; n];
            for &s in block {
                brandes_from_source(g, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0f64; n];
    for block in block_sums {
        for (o, b) in out.iter_mut().zip(block.iter()) {
            *o += b;
        }
    }
    out
}

fn brandes_from_source(g: &MobilityGraph, s: usize, acc: &mut [f64]) {
    let n = g.n;
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0u64; n];
    let mut dist = vec![-1i64; n];
    sigma[s] = 1;
    dist[s] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for &w in g.out_neighbors(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    while let Some(w) = stack.pop() {
        for &v in &preds[w] {
            delta[v] += sigma[v] as f64 / sigma[w] as f64 * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

/// Normalization divisor (n-1)(n-2) for reporting; zero-safe.
pub fn betweenness_normalized(raw: &[f64]) -> Vec<f64> {
    let n = raw.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let denom = ((n - 1) * (n - 2)) as f64;
    raw.iter().map(|&c| c / denom).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLengthSummary {
    /// Mean BFS hop count over ordered reachable pairs i != j.
    pub mean: f64,
    pub reachable_pairs: u64,
    /// Ordered pairs i != j with no directed path, excluded from the mean.
    pub unreachable_pairs: u64,
}

/// Average shortest-path length over reachable ordered pairs.
pub fn average_path_length(g: &MobilityGraph) -> Result<PathLengthSummary> {
    let n = g.n;
    let mut total_hops: u64 = 0;
    let mut reachable: u64 = 0;
    let mut dist = vec![-1i64; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = -1);
        dist[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in g.out_neighbors(v) {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    total_hops += dist[w] as u64;
                    reachable += 1;
                    queue.push_back(w);
                }
            }
        }
    }
    if reachable == 0 {
        return Err(Error::Domain(
            "graph has no reachable ordered pair".into(),
        ));
    }
    let ordered_pairs = (n as u64) * (n as u64 - 1);
    Ok(PathLengthSummary {
        mean: total_hops as f64 / reachable as f64,
        reachable_pairs: reachable,
        unreachable_pairs: ordered_pairs - reachable,
    })
}

/// Modularity of a labeling over the symmetrized weighted view:
/// Q = (1/2y) * sum_ij (R_ij - k_i k_j / 2y) * delta(c_i, c_j), R_ii = 0.
pub fn modularity(g: &MobilityGraph, labels: &[usize]) -> Result<f64> {
    assert_eq!(labels.len(), g.n);
    let y = g.total_weight;
    if !(y > 0.0) {
        return Err(Error::Domain("modularity undefined: total weight is zero".into()));
    }
    let n_comms = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0f64; n_comms];
    let mut tot = vec![0.0f64; n_comms];
    for i in 0..g.n {
        tot[labels[i]] += g.strength[i];
        for &(j, w) in &g.sym[i] {
            if labels[i] == labels[j] {
                internal[labels[i]] += w; // counts both directions once each
            }
        }
    }
    let two_y = 2.0 * y;
    let mut q = 0.0;
    for c in 0..n_comms {
        q += internal[c] / two_y - (tot[c] / two_y) * (tot[c] / two_y);
    }
    Ok(q)
}

const DETECTION_RESTARTS: u64 = 8;

/// Greedy modularity maximization (local moves plus aggregation rounds) on
/// the symmetrized weighted view, restarted from a few seeded visit orders
/// with the best-scoring labeling kept. Deterministic under a fixed seed:
/// the seed drives the visit orders, ties break toward the lowest candidate
/// community index, and final labels are compacted by first appearance.
/// Never returns a labeling below the single-community baseline Q = 0.
pub fn detect_communities(g: &MobilityGraph, seed: u64) -> Vec<usize> {
    if g.n == 0 {
        return Vec::new();
    }
    if !(g.total_weight > 0.0) {
        // No edges: every node is a singleton.
        return (0..g.n).collect();
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..DETECTION_RESTARTS {
        let labels = detect_once(g, seed.wrapping_add(restart.wrapping_mul(0x9E37_79B9)));
        let q = modularity(g, &labels).unwrap_or(f64::NEG_INFINITY);
        match &best {
            Some((best_q, _)) if q <= best_q + 1e-15 => {}
            _ => best = Some((q, labels)),
        }
    }
    let (q, labels) = best.expect("at least one restart ran");

    // Guard: never report a partition worse than the trivial baseline.
    if q < 0.0 {
        return vec![0; g.n];
    }
    labels
}

fn detect_once(g: &MobilityGraph, seed: u64) -> Vec<usize> {
    // Working graph: undirected weighted adjacency + per-node self weight
    // (internal weight of the aggregated community, fully double-counted).
    let mut adj: Vec<BTreeMap<usize, f64>> = g
        .sym
        .iter()
        .map(|list| list.iter().copied().collect())
        .collect();
    let mut self_w: Vec<f64> = vec![0.0; g.n];
    // membership[v] = set of original nodes inside supernode v.
    let mut membership: Vec<Vec<usize>> = (0..g.n).map(|v| vec![v]).collect();
    let y = g.total_weight;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    loop {
        let n = adj.len();
        let strength: Vec<f64> = (0..n)
            .map(|v| self_w[v] + adj[v].values().sum::<f64>())
            .collect();
        let mut community: Vec<usize> = (0..n).collect();
        let mut tot: Vec<f64> = strength.clone();

        let mut order: Vec<usize> = (0..n).collect();
        shuffle(&mut order, &mut rng);

        let mut improved_any = false;
        loop {
            let mut moved = false;
            for &v in &order {
                let cur = community[v];
                // Weight from v to each neighboring community.
                let mut to_comm: BTreeMap<usize, f64> = BTreeMap::new();
                for (&u, &w) in &adj[v] {
                    *to_comm.entry(community[u]).or_insert(0.0) += w;
                }
                let k_v = strength[v];
                let to_cur = to_comm.get(&cur).copied().unwrap_or(0.0);
                let tot_cur_without = tot[cur] - k_v;
                // Gain of moving v from cur to c (BTreeMap iteration is
                // ascending, so equal gains keep the lowest community).
                let mut best_comm = cur;
                let mut best_gain = 0.0f64;
                for (&c, &w_vc) in &to_comm {
                    if c == cur {
                        continue;
                    }
                    let gain = (w_vc - to_cur) / y
                        - k_v * (tot[c] - tot_cur_without) / (2.0 * y * y);
                    if gain > best_gain + 1e-12 || (gain > 1e-12 && (gain - best_gain).abs() <= 1e-12 && c < best_comm)
                    {
                        best_gain = gain;
                        best_comm = c;
                    }
                }
                if best_comm != cur {
                    tot[cur] -= k_v;
                    tot[best_comm] += k_v;
                    community[v] = best_comm;
                    moved = true;
                    improved_any = true;
                }
            }
            if !moved {
                break;
            }
        }

        if !improved_any {
            break;
        }

        // Aggregate communities into supernodes, renumbered in ascending
        // community-id order for determinism.
        let mut ids: Vec<usize> = community.clone();
        ids.sort_unstable();
        ids.dedup();
        let renumber: BTreeMap<usize, usize> =
            ids.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let m = ids.len();
        if m == adj.len() {
            break;
        }
        let mut new_adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
        let mut new_self = vec![0.0f64; m];
        let mut new_membership: Vec<Vec<usize>> = vec![Vec::new(); m];
        for v in 0..adj.len() {
            let cv = renumber[&community[v]];
            new_self[cv] += self_w[v];
            new_membership[cv].extend(membership[v].iter().copied());
            for (&u, &w) in &adj[v] {
                let cu = renumber[&community[u]];
                if cu == cv {
                    // Each internal undirected edge is visited from both
                    // endpoints, doubling w as the convention requires.
                    new_self[cv] += w;
                } else {
                    *new_adj[cv].entry(cu).or_insert(0.0) += w;
                }
            }
        }
        adj = new_adj;
        self_w = new_self;
        membership = new_membership;
    }

    // Project supernode labels back to original nodes and refine: the
    // aggregation rounds lock nodes inside supernodes, so a final pass of
    // single-node moves on the original graph can still improve Q.
    let mut labels = vec![0usize; g.n];
    for (super_id, members) in membership.iter().enumerate() {
        for &v in members {
            labels[v] = super_id;
        }
    }
    refine_node_moves(g, &mut labels, &mut rng);
    compact_labels(&labels)
}

/// Moves single nodes between communities until no move improves Q.
fn refine_node_moves(g: &MobilityGraph, labels: &mut [usize], rng: &mut ChaCha8Rng) {
    let y = g.total_weight;
    let n_comms = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut tot = vec![0.0f64; n_comms];
    for v in 0..g.n {
        tot[labels[v]] += g.strength[v];
    }
    let mut order: Vec<usize> = (0..g.n).collect();
    shuffle(&mut order, rng);
    loop {
        let mut moved = false;
        for &v in &order {
            let cur = labels[v];
            let mut to_comm: BTreeMap<usize, f64> = BTreeMap::new();
            for &(u, w) in g.sym_neighbors(v) {
                *to_comm.entry(labels[u]).or_insert(0.0) += w;
            }
            let k_v = g.strength[v];
            let to_cur = to_comm.get(&cur).copied().unwrap_or(0.0);
            let tot_cur_without = tot[cur] - k_v;
            let mut best_comm = cur;
            let mut best_gain = 0.0f64;
            for (&c, &w_vc) in &to_comm {
                if c == cur {
                    continue;
                }
                let gain =
                    (w_vc - to_cur) / y - k_v * (tot[c] - tot_cur_without) / (2.0 * y * y);
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best_comm = c;
                }
            }
            if best_comm != cur {
                tot[cur] -= k_v;
                tot[best_comm] += k_v;
                labels[v] = best_comm;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Relabels communities as consecutive integers in order of first
/// appearance by node index.
pub fn compact_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut next = 0usize;
    labels
        .iter()
        .map(|&l| {
            *map.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hexgrid::CellId;

    const A: CellId = CellId { q: 0, r: 0 };
    const B: CellId = CellId { q: 1, r: 0 };
    const C: CellId = CellId { q: 0, r: 1 };

    #[test]
    fn mobility_magnitude_sums_outgoing_counts() {
        let mut stats = TransitionStats::new();
        for _ in 0..3 {
            stats.record(A, B, 60);
        }
        stats.record(A, C, 60);
        stats.record_terminal(C, 600);
        let mm = mobility_magnitude(&stats);
        assert_eq!(mm[&A], 4);
        assert_eq!(mm[&B], 0);
        assert_eq!(mm[&C], 0, "dwell-only cell has zero MM");
    }

    #[test]
    fn dwell_time_magnitude_sums_dwells() {
        let mut stats = TransitionStats::new();
        stats.record(A, B, 120);
        stats.record(A, B, 240);
        stats.record(A, C, 60);
        let dtm = dwell_time_magnitude(&stats, false);
        assert_eq!(dtm[&A], 420);
        assert_eq!(dtm[&B], 0);
    }

    #[test]
    fn terminal_dwell_included_only_when_configured() {
        let mut stats = TransitionStats::new();
        stats.record(A, B, 60);
        stats.record_terminal(A, 500);
        assert_eq!(dwell_time_magnitude(&stats, false)[&A], 60);
        assert_eq!(dwell_time_magnitude(&stats, true)[&A], 560);
    }

    #[test]
    fn dtm_over_mm_is_count_weighted_mean_dwell() {
        let mut stats = TransitionStats::new();
        stats.record(A, B, 120);
        stats.record(A, B, 240);
        stats.record(A, C, 60);
        let mm = mobility_magnitude(&stats);
        let dtm = dwell_time_magnitude(&stats, false);
        let mean = dtm[&A] as f64 / mm[&A] as f64;
        // Independent evaluation from the raw observations.
        assert_eq!(mean, (120.0 + 240.0 + 60.0) / 3.0);
    }

    #[test]
    fn betweenness_on_directed_path() {
        // A -> B -> C: only the pair (A, C) routes through B.
        let g = MobilityGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let c = betweenness(&g);
        assert_eq!(c, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn betweenness_on_complete_digraph_is_zero() {
        let g = MobilityGraph::from_edges(
            3,
            &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)],
        );
        assert_eq!(betweenness(&g), vec![0.0; 3]);
    }

    #[test]
    fn betweenness_splits_over_parallel_paths() {
        // 0 -> {1, 2} -> 3: two shortest paths, each middle node carries 1/2.
        let g = MobilityGraph::from_edges(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let c = betweenness(&g);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[3], 0.0);
        assert!((c[1] - 0.5).abs() < 1e-15);
        assert!((c[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalized_betweenness_divides_by_pair_count() {
        let g = MobilityGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let norm = betweenness_normalized(&betweenness(&g));
        assert_eq!(norm[1], 1.0 / 2.0);
    }

    #[test]
    fn path_length_of_three_cycle() {
        let g = MobilityGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]);
        let s = average_path_length(&g).unwrap();
        assert_eq!(s.mean, 1.5);
        assert_eq!(s.unreachable_pairs, 0);
    }

    #[test]
    fn path_length_of_complete_digraph_is_one() {
        let g = MobilityGraph::from_edges(
            3,
            &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)],
        );
        assert_eq!(average_path_length(&g).unwrap().mean, 1.0);
    }

    #[test]
    fn disconnected_cycles_report_unreachable_pairs() {
        let g = MobilityGraph::from_edges(
            6,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)],
        );
        let s = average_path_length(&g).unwrap();
        assert_eq!(s.mean, 1.5);
        assert_eq!(s.unreachable_pairs, 18);
    }

    #[test]
    fn empty_graph_path_length_is_domain_error() {
        let g = MobilityGraph::from_edges(3, &[]);
        assert!(average_path_length(&g).is_err());
    }

    #[test]
    fn modularity_of_two_disjoint_edges() {
        // Unit weights: build directly from weighted directed edges.
        let g = MobilityGraph::from_edges(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]);
        let q = modularity(&g, &[0, 0, 1, 1]).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn modularity_of_single_community_is_zero() {
        let g = MobilityGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let q = modularity(&g, &[0, 0, 0, 0]).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn modularity_of_singletons_on_single_edge() {
        let g = MobilityGraph::from_edges(2, &[(0, 1), (1, 0)]);
        let one = modularity(&g, &[0, 0]).unwrap();
        let split = modularity(&g, &[0, 1]).unwrap();
        assert!(one.abs() < 1e-12);
        assert!((split + 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_edge_set_modularity_is_domain_error() {
        let g = MobilityGraph::from_edges(3, &[]);
        assert!(modularity(&g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn detect_two_components_as_two_communities() {
        let g = MobilityGraph::from_edges(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]);
        let labels = detect_communities(&g, 42);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        let q = modularity(&g, &labels).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_edge_collapses_to_one_community() {
        let g = MobilityGraph::from_edges(2, &[(0, 1), (1, 0)]);
        let labels = detect_communities(&g, 0);
        assert_eq!(labels, vec![0, 0]);
    }

    #[test]
    fn no_edges_yield_singletons() {
        let g = MobilityGraph::from_edges(4, &[]);
        assert_eq!(detect_communities(&g, 9), vec![0, 1, 2, 3]);
    }

    #[test]
    fn detection_is_deterministic_per_seed() {
        let edges: Vec<(usize, usize)> = (0..12)
            .flat_map(|i| [(i, (i + 1) % 12), ((i + 1) % 12, i)])
            .collect();
        let g = MobilityGraph::from_edges(12, &edges);
        let a = detect_communities(&g, 7);
        let b = detect_communities(&g, 7);
        assert_eq!(a, b);
        let qa = modularity(&g, &a).unwrap();
        assert!(qa >= 0.0);
    }

    #[test]
    fn detected_partitions_never_fall_below_baseline() {
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
        edges.push((2, 3));
        edges.push((3, 2));
        let g = MobilityGraph::from_edges(4, &edges);
        let labels = detect_communities(&g, 1);
        assert!(modularity(&g, &labels).unwrap() >= 0.0);
    }

    #[test]
    fn modularity_stays_in_bounds() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let n = rng.random_range(2..12);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random_range(0.0..1.0) < 0.3 {
                        edges.push((i, j));
                    }
                }
            }
            let g = MobilityGraph::from_edges(n, &edges);
            if g.total_weight() == 0.0 {
                continue;
            }
            let labels = detect_communities(&g, 99);
            let q = modularity(&g, &labels).unwrap();
            assert!((-0.5..=1.0).contains(&q), "Q = {q} out of bounds");
        }
    }
}
