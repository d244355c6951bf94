use serde::{Deserialize, Serialize};

use super::CommunityError;
use crate::csng_graph::{Csng, Directedness};

/// Undirected weighted graph with optional self-loops.
///
/// A self-loop of weight `w` contributes `2w` to its node's degree, so that
/// `Σ k_i = 2m` holds after aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct UndirectedWeightedGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    degrees: Vec<f64>,
    total_weight: f64,
}

impl UndirectedWeightedGraph {
    /// Builds from undirected edges; repeated pairs (in either order) are summed.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        let mut self_loops = vec![0.0; node_count];
        for (u, v, w) in edges {
            assert!(u < node_count && v < node_count, "edge ({u},{v}) out of range");
            if u == v {
                self_loops[u] += w;
            } else {
                adjacency[u].push((v, w));
                adjacency[v].push((u, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
            list.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Self::assemble(adjacency, self_loops)
    }

    fn assemble(adjacency: Vec<Vec<(usize, f64)>>, self_loops: Vec<f64>) -> Self {
        let degrees: Vec<f64> = adjacency
            .iter()
            .zip(&self_loops)
            .map(|(l, s)| l.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect();
        let total_weight = degrees.iter().sum::<f64>() / 2.0;
        Self { adjacency, self_loops, degrees, total_weight }
    }

    /// Symmetrized CSNG: directional weights are summed, undirected graphs kept.
    pub fn from_csng(g: &Csng) -> Self {
        let members: Vec<usize> = (0..g.node_count).collect();
        Self::induced_from_csng(g, &members)
    }

    /// Subgraph of the symmetrized CSNG induced by `members` (sorted, distinct).
    /// Local node `i` corresponds to `members[i]`.
    pub fn induced_from_csng(g: &Csng, members: &[usize]) -> Self {
        let mut local = vec![usize::MAX; g.node_count];
        for (i, &m) in members.iter().enumerate() {
            local[m] = i;
        }
        let halve = g.directedness == Directedness::Undirected;
        let mut edges = Vec::new();
        for (i, &m) in members.iter().enumerate() {
            for e in &g.adjacency[m] {
                let j = local[e.target];
                if j == usize::MAX {
                    continue;
                }
                // undirected graphs store each edge twice; keep one copy
                if halve && j < i {
                    continue;
                }
                edges.push((i, j, e.weight));
            }
        }
        Self::from_edges(members.len(), edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    pub fn self_loop(&self, u: usize) -> f64 {
        self.self_loops[u]
    }

    pub fn degree(&self, u: usize) -> f64 {
        self.degrees[u]
    }

    /// `m`: every edge counted once, self-loops included.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Collapses each community into one node; internal weight becomes a self-loop.
    pub fn aggregate(&self, p: &Partition) -> UndirectedWeightedGraph {
        let c = p.community_count();
        let mut self_loops = vec![0.0; c];
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); c];
        for u in 0..self.node_count() {
            let cu = p.labels[u];
            self_loops[cu] += self.self_loops[u];
            for &(v, w) in &self.adjacency[u] {
                let cv = p.labels[v];
                if cu == cv {
                    if u < v {
                        self_loops[cu] += w;
                    }
                } else {
                    rows[cu].push((cv, w));
                }
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(v, _)| v);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Self::assemble(rows, self_loops)
    }
}

/// Assignment of every node to a dense community label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
}

impl Partition {
    pub fn singletons(n: usize) -> Self {
        Self { labels: (0..n).collect() }
    }

    /// Relabels densely in order of first appearance.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn community_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Member lists per community, each sorted ascending.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, &c) in self.labels.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    fn check(&self, n: usize) -> Result<(), CommunityError> {
        if self.labels.len() != n {
            return Err(CommunityError::InvalidPartition(format!(
                "partition covers {} nodes, graph has {n}",
                self.labels.len()
            )));
        }
        let c = self.community_count();
        let mut seen = vec![false; c];
        for &l in &self.labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(CommunityError::InvalidPartition("labels are not dense".into()));
        }
        Ok(())
    }
}

/// Resolution-parameterized modularity
/// `Q = Σ_c [ in_c / m − γ (tot_c / 2m)² ]`.
pub fn modularity(g: &UndirectedWeightedGraph, p: &Partition, resolution: f64) -> Result<f64, CommunityError> {
    p.check(g.node_count())?;
    let m = g.total_weight();
    if !(m > 0.0) {
        return Err(CommunityError::ZeroWeightGraph);
    }
    let c = p.community_count();
    let mut inside = vec![0.0; c];
    let mut tot = vec![0.0; c];
    for u in 0..g.node_count() {
        let cu = p.labels[u];
        tot[cu] += g.degree(u);
        inside[cu] += g.self_loop(u);
        for &(v, w) in g.neighbors(u) {
            if u < v && p.labels[v] == cu {
                inside[cu] += w;
            }
        }
    }
    let two_m = 2.0 * m;
    Ok(inside
        .iter()
        .zip(&tot)
        .map(|(i, t)| i / m - resolution * (t / two_m) * (t / two_m))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_modularity() {
        let g = UndirectedWeightedGraph::from_edges(2, [(0, 1, 1.0)]);
        let together = Partition { labels: vec![0, 0] };
        let apart = Partition { labels: vec![0, 1] };
        assert_eq!(modularity(&g, &together, 1.0).unwrap(), 0.0);
        assert_eq!(modularity(&g, &apart, 1.0).unwrap(), -0.5);
    }

    #[test]
    fn whole_graph_is_zero_at_unit_resolution() {
        let g = UndirectedWeightedGraph::from_edges(4, [(0, 1, 0.3), (1, 2, 2.0), (2, 3, 0.7), (3, 0, 1.1), (0, 2, 0.4)]);
        let q = modularity(&g, &Partition { labels: vec![0; 4] }, 1.0).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn zero_weight_and_bad_partition() {
        let g = UndirectedWeightedGraph::from_edges(3, []);
        assert!(matches!(
            modularity(&g, &Partition::singletons(3), 1.0),
            Err(CommunityError::ZeroWeightGraph)
        ));
        let g = UndirectedWeightedGraph::from_edges(2, [(0, 1, 1.0)]);
        assert!(modularity(&g, &Partition { labels: vec![0, 2] }, 1.0).is_err());
        assert!(modularity(&g, &Partition { labels: vec![0] }, 1.0).is_err());
    }

    #[test]
    fn aggregation_preserves_modularity() {
        let g = UndirectedWeightedGraph::from_edges(
            6,
            [(0, 1, 1.0), (1, 2, 0.5), (0, 2, 2.0), (2, 3, 0.1), (3, 4, 1.0), (4, 5, 1.5), (3, 5, 0.2), (5, 5, 0.3)],
        );
        let p = Partition { labels: vec![0, 0, 0, 1, 1, 1] };
        let agg = g.aggregate(&p);
        assert_eq!(agg.node_count(), 2);
        assert!((agg.total_weight() - g.total_weight()).abs() < 1e-12);
        for gamma in [0.5, 1.0, 2.0] {
            let q = modularity(&g, &p, gamma).unwrap();
            let qa = modularity(&agg, &Partition::singletons(2), gamma).unwrap();
            assert!((q - qa).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_edges_are_summed() {
        let g = UndirectedWeightedGraph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]);
        assert_eq!(g.neighbors(0), &[(1, 3.0)]);
        assert_eq!(g.total_weight(), 3.0);
    }

    #[test]
    fn dense_relabel() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.labels, vec![0, 1, 0, 2]);
        assert_eq!(p.communities(), vec![vec![0, 2], vec![1], vec![3]]);
    }
}
