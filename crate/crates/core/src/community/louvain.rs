//! Two-phase Louvain modularity optimization with a resolution parameter.
//!
//! After the multilevel phase converges, single nodes of the input graph get
//! one more local-move phase starting from the final partition; if any node
//! moves, the multilevel phase resumes from the refined communities.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{modularity, Partition, UndirectedWeightedGraph};
use super::CommunityError;

/// Sweeps per level before the local-move phase is cut off.
const MAX_SWEEPS: usize = 1000;

/// Independent trials run by [`louvain`].
pub const DEFAULT_TRIALS: usize = 4;

/// Multilevel passes, each followed by a refinement sweep on the input graph.
const MAX_PASSES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct LouvainResult {
    /// Final partition of the input nodes.
    pub partition: Partition,
    /// Partition of the input nodes after each aggregation level.
    pub levels: Vec<Partition>,
    pub modularity: f64,
    /// Modularity of the singleton start, then after every local-move phase.
    pub history: Vec<f64>,
}

/// Louvain with [`DEFAULT_TRIALS`] seeded trials; the best final modularity wins.
pub fn louvain(g: &UndirectedWeightedGraph, resolution: f64, seed: u64) -> Result<LouvainResult, CommunityError> {
    louvain_trials(g, resolution, seed, DEFAULT_TRIALS)
}

/// Runs `trials` independent visit orders derived from `seed` and keeps the
/// result with the highest modularity (the earliest on ties).
pub fn louvain_trials(
    g: &UndirectedWeightedGraph,
    resolution: f64,
    seed: u64,
    trials: usize,
) -> Result<LouvainResult, CommunityError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(CommunityError::InvalidResolution(resolution));
    }
    if !(g.total_weight() > 0.0) {
        return Err(CommunityError::ZeroWeightGraph);
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LouvainResult> = None;
    for _ in 0..trials.max(1) {
        let r = single_trial(g, resolution, seeds.next_u64())?;
        if best.as_ref().is_none_or(|b| r.modularity > b.modularity) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one trial"))
}

fn single_trial(g: &UndirectedWeightedGraph, resolution: f64, seed: u64) -> Result<LouvainResult, CommunityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.node_count();
    let mut flat = Partition::singletons(n);
    let mut history = vec![modularity(g, &flat, resolution)?];
    let mut levels = Vec::new();

    for _ in 0..MAX_PASSES {
        // multilevel phase, continuing from the communities found so far
        let mut level_graph = g.aggregate(&flat);
        loop {
            let (local, moved) = local_moves(&level_graph, resolution, &mut rng, None);
            if !moved {
                break;
            }
            flat = Partition::from_labels(&flat.labels.iter().map(|&c| local.labels[c]).collect::<Vec<_>>());
            history.push(modularity(g, &flat, resolution)?);
            levels.push(flat.clone());
            if local.community_count() == level_graph.node_count() {
                break;
            }
            level_graph = level_graph.aggregate(&local);
        }
        // refinement: single nodes may still profit from leaving their community
        let (refined, moved) = local_moves(g, resolution, &mut rng, Some(&flat.labels));
        if !moved {
            break;
        }
        flat = refined;
        history.push(modularity(g, &flat, resolution)?);
        levels.push(flat.clone());
    }
    if levels.is_empty() {
        levels.push(flat.clone());
    }
    let q = *history.last().expect("history starts non-empty");
    Ok(LouvainResult { partition: flat, levels, modularity: q, history })
}

/// Greedy local-move phase. Returns the dense community labels of the level
/// graph's nodes and whether any node changed community.
fn local_moves(
    g: &UndirectedWeightedGraph,
    resolution: f64,
    rng: &mut ChaCha8Rng,
    start: Option<&[usize]>,
) -> (Partition, bool) {
    let n = g.node_count();
    let two_m = 2.0 * g.total_weight();
    let mut community: Vec<usize> = start.map_or_else(|| (0..n).collect(), <[usize]>::to_vec);
    let mut tot = vec![0.0; n];
    for u in 0..n {
        tot[community[u]] += g.degree(u);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut any_move = false;

    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for &u in &order {
            let ku = g.degree(u);
            if ku == 0.0 {
                continue;
            }
            let cu = community[u];
            for &(v, w) in g.neighbors(u) {
                let cv = community[v];
                if link[cv] == 0.0 {
                    touched.push(cv);
                }
                link[cv] += w;
            }
            tot[cu] -= ku;
            let scale = resolution * ku / two_m;
            let mut best = cu;
            let mut best_gain = link[cu] - tot[cu] * scale;
            let eps = 1e-12 * ku.max(1e-300);
            for &c in &touched {
                let gain = link[c] - tot[c] * scale;
                if gain > best_gain + eps {
                    best = c;
                    best_gain = gain;
                }
            }
            tot[best] += ku;
            if best != cu {
                community[u] = best;
                moved = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
        any_move = true;
    }
    (Partition::from_labels(&community), any_move)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique_pair(a: usize, b: usize) -> UndirectedWeightedGraph {
        let mut edges = Vec::new();
        for i in 0..a {
            for j in i + 1..a {
                edges.push((i, j, 1.0));
            }
        }
        for i in a..a + b {
            for j in i + 1..a + b {
                edges.push((i, j, 1.0));
            }
        }
        edges.push((a - 1, a, 1.0));
        UndirectedWeightedGraph::from_edges(a + b, edges)
    }

    #[test]
    fn clique_pair_splits_into_cliques() {
        let g = clique_pair(4, 4);
        for seed in 0..20 {
            let r = louvain(&g, 1.0, seed).unwrap();
            assert_eq!(r.partition.labels, vec![0, 0, 0, 0, 1, 1, 1, 1], "seed {seed}");
        }
    }

    #[test]
    fn history_is_monotone() {
        let g = clique_pair(5, 6);
        let r = louvain(&g, 1.0, 3).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert_eq!(r.modularity, *r.history.last().unwrap());
    }

    #[test]
    fn tiny_resolution_merges_connected_graph() {
        let g = clique_pair(4, 5);
        let r = louvain(&g, 1e-6, 1).unwrap();
        assert_eq!(r.partition.community_count(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = clique_pair(3, 3);
        assert!(matches!(louvain(&g, 0.0, 0), Err(CommunityError::InvalidResolution(_))));
        let empty = UndirectedWeightedGraph::from_edges(3, []);
        assert!(matches!(louvain(&empty, 1.0, 0), Err(CommunityError::ZeroWeightGraph)));
    }

    #[test]
    fn deterministic_for_seed() {
        let g = clique_pair(6, 7);
        assert_eq!(louvain(&g, 0.8, 11).unwrap(), louvain(&g, 0.8, 11).unwrap());
    }
}
