//! Directed-graph data model, random DAG generation, and edge-support masks.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// A directed acyclic graph over nodes `0..d`.
///
/// `topo_order[pos]` is the node occupying position `pos`; every edge goes
/// from an earlier to a later position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagGraph {
    d: usize,
    edges: BTreeSet<(usize, usize)>,
    topo_order: Vec<usize>,
}

/// A plain directed graph (no acyclicity guarantee), as produced by
/// thresholding a learned weight matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub d: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

/// Two edge supports over the same DAG with a prescribed overlap fraction.
#[derive(Debug, Clone)]
pub struct SupportMasks {
    pub d: usize,
    pub m0: BTreeSet<(usize, usize)>,
    pub m1: BTreeSet<(usize, usize)>,
    pub rho: f64,
}

impl DagGraph {
    /// Build from an explicit edge set, verifying acyclicity.
    pub fn from_edges(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(k, j) in &edges {
            if k >= d || j >= d {
                return Err(Error::param(format!("edge ({k},{j}) out of range for d={d}")));
            }
            if k == j {
                return Err(Error::param(format!("self-loop at node {k}")));
            }
        }
        let topo_order = topo_sort(d, &edges)
            .ok_or_else(|| Error::param("edge set contains a directed cycle"))?;
        Ok(DagGraph { d, edges, topo_order })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, c)| c == j)
            .map(|&(p, _)| p)
            .collect()
    }

    /// Edge-list text format: header `# d=<n>`, then one `parent<TAB>child`
    /// pair per line, zero-based, sorted.
    pub fn to_edges_string(&self) -> String {
        let mut out = format!("# d={}\n", self.d);
        for &(k, j) in &self.edges {
            out.push_str(&format!("{k}\t{j}\n"));
        }
        out
    }

    /// Parse the edge-list text format produced by [`to_edges_string`].
    ///
    /// [`to_edges_string`]: DagGraph::to_edges_string
    pub fn from_edges_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data("empty edge-list file"))?;
        let d: usize = header
            .trim()
            .strip_prefix("# d=")
            .ok_or_else(|| Error::data("edge list must start with `# d=<n>`"))?
            .parse()
            .map_err(|e| Error::data(format!("bad node count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split('\t');
            let k = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::data(format!("bad edge line `{line}`")))?;
            let j = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::data(format!("bad edge line `{line}`")))?;
            edges.push((k, j));
        }
        DagGraph::from_edges(d, edges)
    }
}

impl From<&DagGraph> for Digraph {
    fn from(g: &DagGraph) -> Self {
        Digraph {
            d: g.d,
            edges: g.edges.clone(),
        }
    }
}

impl Digraph {
    pub fn from_edges(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Digraph {
            d,
            edges: edges.into_iter().collect(),
        }
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    pub fn is_acyclic(&self) -> bool {
        topo_sort(self.d, &self.edges).is_some()
    }
}

fn topo_sort(d: usize, edges: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; d];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); d];
    for &(k, j) in edges {
        indeg[j] += 1;
        children[k].push(j);
    }
    let mut queue: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(d);
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    (order.len() == d).then_some(order)
}

/// Erdős–Rényi DAG: orient each pair along a uniformly random permutation
/// and keep it with probability `p`.
pub fn generate_er(d: usize, p: f64, seed: u64) -> Result<DagGraph> {
    if d < 2 {
        return Err(Error::param(format!("need d >= 2 nodes, got {d}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("edge probability must be in [0,1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    let mut edges = BTreeSet::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.random::<f64>() < p {
                edges.insert((perm[i], perm[j]));
            }
        }
    }
    Ok(DagGraph {
        d,
        edges,
        topo_order: perm,
    })
}

/// Barabási–Albert DAG: each new node attaches to `min(m, existing)` distinct
/// existing nodes with probability proportional to current degree (uniform
/// while all degrees are zero); edges point old -> new, then labels are
/// permuted.
pub fn generate_ba(d: usize, m: usize, seed: u64) -> Result<DagGraph> {
    if m < 1 {
        return Err(Error::param(format!("need m >= 1 attachments, got {m}")));
    }
    if d <= m {
        return Err(Error::param(format!("need d > m, got d={d}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; d];
    let mut grown_edges: Vec<(usize, usize)> = Vec::new();
    for t in 1..d {
        let k = m.min(t);
        let mut candidates: Vec<usize> = (0..t).collect();
        for _ in 0..k {
            let total: usize = candidates.iter().map(|&c| degree[c]).sum();
            let pick_idx = if total == 0 {
                rng.random_range(0..candidates.len())
            } else {
                let mut ticket = rng.random_range(0..total);
                let mut idx = 0;
                for (i, &c) in candidates.iter().enumerate() {
                    if ticket < degree[c] {
                        idx = i;
                        break;
                    }
                    ticket -= degree[c];
                }
                idx
            };
            let chosen = candidates.swap_remove(pick_idx);
            grown_edges.push((chosen, t));
            degree[chosen] += 1;
            degree[t] += 1;
        }
    }
    let mut label: Vec<usize> = (0..d).collect();
    label.shuffle(&mut rng);
    let edges: BTreeSet<(usize, usize)> = grown_edges
        .into_iter()
        .map(|(a, b)| (label[a], label[b]))
        .collect();
    Ok(DagGraph {
        d,
        edges,
        topo_order: label,
    })
}

/// True iff the support `{(k,j): |adj[k,j]| > tol}` admits a topological order.
pub fn is_acyclic(adj: &Array2<f64>, tol: f64) -> Result<bool> {
    let d = adj.nrows();
    if adj.ncols() != d {
        return Err(Error::param(format!(
            "adjacency must be square, got {}x{}",
            adj.nrows(),
            adj.ncols()
        )));
    }
    let edges: BTreeSet<(usize, usize)> = (0..d)
        .flat_map(|k| (0..d).map(move |j| (k, j)))
        .filter(|&(k, j)| k != j && adj[(k, j)].abs() > tol)
        .collect();
    // self-loops above tolerance are cycles of length one
    for k in 0..d {
        if adj[(k, k)].abs() > tol {
            return Ok(false);
        }
    }
    Ok(topo_sort(d, &edges).is_some())
}

/// Partition the edge set into two supports sharing `ceil(rho * |E|)` edges;
/// the remaining edges alternate between the two masks, starting with `m0`.
pub fn split_support(g: &DagGraph, rho: f64, seed: u64) -> Result<SupportMasks> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param(format!("overlap fraction must be in [0,1], got {rho}")));
    }
    let e = g.num_edges();
    if e < 2 {
        return Err(Error::param(format!("need at least 2 edges to split, got {e}")));
    }
    let mut order: Vec<(usize, usize)> = g.edges().iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let shared = ((rho * e as f64).ceil() as usize).min(e);
    let mut m0 = BTreeSet::new();
    let mut m1 = BTreeSet::new();
    for &edge in &order[..shared] {
        m0.insert(edge);
        m1.insert(edge);
    }
    for (i, &edge) in order[shared..].iter().enumerate() {
        if i % 2 == 0 {
            m0.insert(edge);
        } else {
            m1.insert(edge);
        }
    }
    Ok(SupportMasks {
        d: g.d(),
        m0,
        m1,
        rho,
    })
}

impl SupportMasks {
    pub fn overlap_count(&self) -> usize {
        self.m0.intersection(&self.m1).count()
    }

    pub fn union_count(&self) -> usize {
        self.m0.union(&self.m1).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adjacency(g: &DagGraph) -> Array2<f64> {
        let mut a = Array2::zeros((g.d(), g.d()));
        for &(k, j) in g.edges() {
            a[(k, j)] = 1.0;
        }
        a
    }

    #[test]
    fn er_p_zero_is_empty() {
        let g = generate_er(2, 0.0, 7).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn er_p_one_is_complete_dag() {
        let g = generate_er(5, 1.0, 7).unwrap();
        assert_eq!(g.num_edges(), 10);
        assert!(is_acyclic(&adjacency(&g), 0.0).unwrap());
    }

    #[test]
    fn er_mean_edge_count_matches_binomial() {
        // d=20, p=0.25: mean 47.5 over 1000 seeds, within 3 standard errors
        let (d, p, seeds) = (20usize, 0.25, 1000u64);
        let total: usize = (0..seeds)
            .map(|s| generate_er(d, p, s).unwrap().num_edges())
            .sum();
        let mean = total as f64 / seeds as f64;
        let pairs = (d * (d - 1) / 2) as f64;
        let expect = pairs * p;
        let se = (pairs * p * (1.0 - p) / seeds as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean} vs {expect} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn er_rejects_bad_params() {
        assert!(generate_er(1, 0.5, 0).is_err());
        assert!(generate_er(5, -0.1, 0).is_err());
        assert!(generate_er(5, 1.5, 0).is_err());
    }

    #[test]
    fn ba_edge_counts_are_exact() {
        // capped attachments: sum_{t=1}^{d-1} min(m, t)
        assert_eq!(generate_ba(2, 1, 3).unwrap().num_edges(), 1);
        assert_eq!(generate_ba(4, 3, 3).unwrap().num_edges(), 6);
        assert_eq!(generate_ba(50, 3, 3).unwrap().num_edges(), 144);
    }

    #[test]
    fn ba_rejects_bad_params() {
        assert!(generate_ba(3, 3, 0).is_err());
        assert!(generate_ba(3, 0, 0).is_err());
    }

    #[test]
    fn generators_are_deterministic_and_acyclic() {
        for seed in 0..50 {
            let g1 = generate_er(12, 0.3, seed).unwrap();
            let g2 = generate_er(12, 0.3, seed).unwrap();
            assert_eq!(g1, g2);
            assert!(is_acyclic(&adjacency(&g1), 0.0).unwrap());

            let b1 = generate_ba(12, 3, seed).unwrap();
            let b2 = generate_ba(12, 3, seed).unwrap();
            assert_eq!(b1, b2);
            assert!(is_acyclic(&adjacency(&b1), 0.0).unwrap());
        }
    }

    #[test]
    fn edges_respect_topo_order() {
        let g = generate_ba(15, 3, 11).unwrap();
        let pos: Vec<usize> = {
            let mut pos = vec![0; g.d()];
            for (p, &v) in g.topo_order().iter().enumerate() {
                pos[v] = p;
            }
            pos
        };
        for &(k, j) in g.edges() {
            assert!(pos[k] < pos[j], "edge ({k},{j}) violates topo order");
        }
    }

    #[test]
    fn is_acyclic_thresholds_edges() {
        let zero = Array2::<f64>::zeros((3, 3));
        assert!(is_acyclic(&zero, 0.0).unwrap());

        let mut two_cycle = Array2::<f64>::zeros((2, 2));
        two_cycle[(0, 1)] = 0.5;
        two_cycle[(1, 0)] = 0.5;
        assert!(!is_acyclic(&two_cycle, 0.3).unwrap());

        two_cycle[(1, 0)] = 0.2;
        assert!(is_acyclic(&two_cycle, 0.3).unwrap());

        assert!(is_acyclic(&Array2::<f64>::zeros((2, 3)), 0.0).is_err());
    }

    #[test]
    fn split_support_counts() {
        let g = generate_er(10, 0.4, 5).unwrap();
        let e = g.num_edges();

        let full = split_support(&g, 1.0, 1).unwrap();
        assert_eq!(full.m0, *g.edges());
        assert_eq!(full.m1, *g.edges());

        let none = split_support(&g, 0.0, 1).unwrap();
        assert_eq!(none.overlap_count(), 0);
        assert_eq!(none.m0.len() + none.m1.len(), e);
        assert_eq!(none.union_count(), e);

        // rho=0.5 over 8 edges: 4 shared, 2 exclusive each
        let g8 = DagGraph::from_edges(
            9,
            (0..8).map(|i| (i, 8)).collect::<Vec<_>>(),
        )
        .unwrap();
        let half = split_support(&g8, 0.5, 2).unwrap();
        assert_eq!(half.overlap_count(), 4);
        assert_eq!(half.m0.len(), 6);
        assert_eq!(half.m1.len(), 6);
        assert_eq!(half.union_count(), 8);
    }

    #[test]
    fn split_support_exact_overlap_fraction() {
        for seed in 0..10 {
            let g = generate_ba(12, 3, seed).unwrap();
            let e = g.num_edges();
            for &rho in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                let masks = split_support(&g, rho, seed).unwrap();
                assert_eq!(masks.union_count(), e);
                let want = (rho * e as f64).ceil() as usize;
                assert_eq!(masks.overlap_count(), want);
                for edge in masks.m0.union(&masks.m1) {
                    assert!(g.edges().contains(edge));
                }
            }
        }
    }

    #[test]
    fn split_support_rejects_tiny_graphs() {
        let g = DagGraph::from_edges(3, vec![(0, 1)]).unwrap();
        assert!(split_support(&g, 0.5, 0).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = generate_er(8, 0.4, 19).unwrap();
        let text = g.to_edges_string();
        assert!(text.starts_with("# d=8\n"));
        let back = DagGraph::from_edges_str(&text).unwrap();
        assert_eq!(back.d(), g.d());
        assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn from_edges_rejects_cycles_and_self_loops() {
        assert!(DagGraph::from_edges(3, vec![(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(DagGraph::from_edges(3, vec![(1, 1)]).is_err());
        assert!(DagGraph::from_edges(2, vec![(0, 5)]).is_err());
    }
}
