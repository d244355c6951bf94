//! Force-directed layout of the compound community graph.
//!
//! Visible communities are discs whose radius grows with the square root of
//! their cardinality. Every pair repels, aggregated edges act as springs with
//! radius-aware rest lengths, and sub-communities are pulled towards the
//! centroid of their visible siblings.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::{CommunityTree, NodeId, ROOT};
use crate::csng_graph::{Csng, Directedness};

/// Consecutive calm steps required before the layout counts as converged.
pub const CALM_STEPS: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompoundNode {
    pub id: NodeId,
    pub cardinality: usize,
    pub depth: usize,
    pub parent: Option<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompoundEdge {
    /// Indices into [`CompoundGraph::nodes`], `u < v`.
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompoundGraph {
    pub nodes: Vec<CompoundNode>,
    pub edges: Vec<CompoundEdge>,
}

impl CompoundGraph {
    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Aggregated weight between two community ids, 0 when there is no edge.
    pub fn weight_between(&self, a: NodeId, b: NodeId) -> f64 {
        let (Some(i), Some(j)) = (self.index_of(a), self.index_of(b)) else { return 0.0 };
        let (u, v) = (i.min(j), i.max(j));
        self.edges.iter().find(|e| e.u == u && e.v == v).map_or(0.0, |e| e.weight)
    }
}

/// Collapses the CSNG onto the currently visible community nodes.
pub fn aggregate(tree: &CommunityTree, g: &Csng) -> Result<CompoundGraph, LayoutError> {
    if tree.segment_count() != g.node_count {
        return Err(LayoutError::InconsistentInputs(format!(
            "tree covers {} segments, graph has {} nodes",
            tree.segment_count(),
            g.node_count
        )));
    }
    let visible = tree.visible_nodes();
    let mut owner = vec![usize::MAX; g.node_count];
    let mut nodes = Vec::with_capacity(visible.len());
    for (i, &id) in visible.iter().enumerate() {
        let n = tree.node(id).expect("visible nodes exist");
        if id == ROOT {
            owner.iter_mut().for_each(|o| *o = i);
        } else {
            for s in tree.members_of(id).expect("visible nodes exist") {
                owner[s] = i;
            }
        }
        nodes.push(CompoundNode { id, cardinality: n.cardinality, depth: tree.depth(id), parent: n.parent });
    }
    let undirected = g.directedness == Directedness::Undirected;
    let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (src, e) in g.edges() {
        if undirected && src > e.target {
            continue;
        }
        let (a, b) = (owner[src], owner[e.target]);
        if a != b {
            *sums.entry((a.min(b), a.max(b))).or_insert(0.0) += e.weight;
        }
    }
    let edges = sums
        .into_iter()
        .map(|((u, v), weight)| CompoundEdge { u, v, weight })
        .collect();
    Ok(CompoundGraph { nodes, edges })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    pub dt: f64,
    pub damping: f64,
    pub k_r: f64,
    pub k_s: f64,
    pub k_g: f64,
    pub rest_gap: f64,
    pub tol: f64,
    pub r0: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub max_iter: usize,
    /// Distance floor of the repulsion term.
    pub eps_d: f64,
    /// Arena radius per square root of the node count.
    pub arena_scale: f64,
    /// Initial disc radius per square root of the node count.
    pub init_scale: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            dt: 0.02,
            damping: 0.9,
            k_r: 30.0,
            k_s: 1.0,
            k_g: 0.3,
            rest_gap: 10.0,
            tol: 1e-2,
            r0: 2.0,
            r_min: 4.0,
            r_max: 60.0,
            max_iter: 2000,
            eps_d: 0.01,
            arena_scale: 50.0,
            init_scale: 10.0,
        }
    }
}

impl LayoutParams {
    pub fn radius(&self, cardinality: usize) -> f64 {
        (self.r0 * (cardinality as f64).sqrt()).clamp(self.r_min, self.r_max)
    }

    pub fn arena_radius(&self, node_count: usize) -> f64 {
        self.arena_scale * (node_count.max(1) as f64).sqrt()
    }

    /// Spring rest length between two discs.
    pub fn rest(&self, r_u: f64, r_v: f64) -> f64 {
        r_u + r_v + self.rest_gap
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutState {
    /// Community ids, aligned with the compound graph's nodes.
    pub ids: Vec<NodeId>,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    pub iteration: usize,
    pub converged: bool,
    /// Consecutive steps whose largest displacement stayed below `tol`.
    pub calm_steps: u32,
    /// Largest displacement of the last step.
    pub last_displacement: f64,
}

impl LayoutState {
    pub fn with_positions(cg: &CompoundGraph, positions: Vec<[f64; 2]>, params: &LayoutParams) -> Self {
        assert_eq!(positions.len(), cg.nodes.len(), "one position per node");
        Self {
            ids: cg.nodes.iter().map(|n| n.id).collect(),
            velocities: vec![[0.0; 2]; positions.len()],
            radii: cg.nodes.iter().map(|n| params.radius(n.cardinality)).collect(),
            positions,
            iteration: 0,
            converged: false,
            calm_steps: 0,
            last_displacement: 0.0,
        }
    }

    /// Seeded positions, uniform in a disc of radius `init_scale·√|V|`.
    pub fn initial(cg: &CompoundGraph, seed: u64, params: &LayoutParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = params.init_scale * (cg.nodes.len().max(1) as f64).sqrt();
        let positions = (0..cg.nodes.len()).map(|_| random_in_disc(&mut rng, radius, [0.0, 0.0])).collect();
        Self::with_positions(cg, positions, params)
    }

    /// Reuses positions of nodes that were already laid out; new nodes start
    /// next to their nearest previously placed ancestor, or at random.
    pub fn warm_start(cg: &CompoundGraph, prev: &LayoutState, tree: &CommunityTree, seed: u64, params: &LayoutParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let old: HashMap<NodeId, [f64; 2]> = prev.ids.iter().copied().zip(prev.positions.iter().copied()).collect();
        let spread = params.init_scale * (cg.nodes.len().max(1) as f64).sqrt();
        let positions = cg
            .nodes
            .iter()
            .map(|n| {
                if let Some(p) = old.get(&n.id) {
                    return *p;
                }
                let mut cur = n.parent;
                while let Some(a) = cur {
                    if let Some(p) = old.get(&a) {
                        return random_in_disc(&mut rng, params.rest_gap, *p);
                    }
                    cur = tree.node(a).ok().and_then(|x| x.parent);
                }
                random_in_disc(&mut rng, spread, [0.0, 0.0])
            })
            .collect();
        Self::with_positions(cg, positions, params)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.positions[a], self.positions[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    pub fn to_json(&self, cg: &CompoundGraph) -> LayoutJson {
        LayoutJson {
            nodes: cg
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| LayoutNodeJson {
                    id: n.id,
                    x: self.positions[i][0],
                    y: self.positions[i][1],
                    r: self.radii[i],
                    cardinality: n.cardinality,
                    parent: n.parent,
                })
                .collect(),
            edges: cg
                .edges
                .iter()
                .map(|e| LayoutEdgeJson { u: cg.nodes[e.u].id, v: cg.nodes[e.v].id, w: e.weight })
                .collect(),
            converged: self.converged,
            iteration: self.iteration,
        }
    }
}

fn random_in_disc(rng: &mut ChaCha8Rng, radius: f64, center: [f64; 2]) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let t = std::f64::consts::TAU * rng.random::<f64>();
    [center[0] + r * t.cos(), center[1] + r * t.sin()]
}

/// Net force on every node.
pub fn forces(cg: &CompoundGraph, st: &LayoutState, params: &LayoutParams) -> Vec<[f64; 2]> {
    let n = cg.nodes.len();
    let mut f = vec![[0.0; 2]; n];
    let p = &st.positions;
    let k_r2 = params.k_r * params.k_r;
    for i in 0..n {
        for j in i + 1..n {
            let (dir, dist) = separation(p[i], p[j], i, j);
            let mag = k_r2 * (st.radii[i] + st.radii[j]) / dist.max(params.eps_d);
            f[i][0] -= mag * dir[0];
            f[i][1] -= mag * dir[1];
            f[j][0] += mag * dir[0];
            f[j][1] += mag * dir[1];
        }
    }
    let w_max = cg.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    for e in &cg.edges {
        let (i, j) = (e.u, e.v);
        let (dir, dist) = separation(p[i], p[j], i, j);
        let stretch = dist - params.rest(st.radii[i], st.radii[j]);
        let mag = params.k_s * (e.weight / w_max) * stretch;
        f[i][0] += mag * dir[0];
        f[i][1] += mag * dir[1];
        f[j][0] -= mag * dir[0];
        f[j][1] -= mag * dir[1];
    }
    if params.k_g > 0.0 {
        let mut groups: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, node) in cg.nodes.iter().enumerate() {
            if let Some(parent) = node.parent.filter(|&p| p != ROOT) {
                groups.entry(parent).or_default().push(i);
            }
        }
        for members in groups.values().filter(|m| m.len() > 1) {
            let c = members.iter().fold([0.0; 2], |acc, &i| [acc[0] + p[i][0], acc[1] + p[i][1]]);
            let c = [c[0] / members.len() as f64, c[1] / members.len() as f64];
            for &i in members {
                f[i][0] += params.k_g * (c[0] - p[i][0]);
                f[i][1] += params.k_g * (c[1] - p[i][1]);
            }
        }
    }
    f
}

/// Unit vector from `a` to `b` and their distance. Coincident points get a
/// fixed direction derived from the pair's indices.
fn separation(a: [f64; 2], b: [f64; 2], i: usize, j: usize) -> ([f64; 2], f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let dist = d[0].hypot(d[1]);
    if dist > 1e-12 {
        return ([d[0] / dist, d[1] / dist], dist);
    }
    let t = (i * 31 + j * 17) as f64;
    ([t.cos(), t.sin()], dist)
}

pub fn max_force(cg: &CompoundGraph, st: &LayoutState, params: &LayoutParams) -> f64 {
    forces(cg, st, params).iter().map(|f| f[0].hypot(f[1])).fold(0.0, f64::max)
}

/// One damped explicit integration step.
pub fn step(cg: &CompoundGraph, st: &LayoutState, params: &LayoutParams) -> LayoutState {
    let mut next = st.clone();
    step_in_place(cg, &mut next, params);
    next
}

pub fn step_in_place(cg: &CompoundGraph, st: &mut LayoutState, params: &LayoutParams) {
    let f = forces(cg, st, params);
    let arena = params.arena_radius(cg.nodes.len());
    let mut max_disp: f64 = 0.0;
    for (i, fi) in f.iter().enumerate() {
        let v = &mut st.velocities[i];
        v[0] = (v[0] + fi[0] * params.dt) * params.damping;
        v[1] = (v[1] + fi[1] * params.dt) * params.damping;
        let old = st.positions[i];
        let mut p = [old[0] + v[0] * params.dt, old[1] + v[1] * params.dt];
        let r = p[0].hypot(p[1]);
        if r > arena {
            p = [p[0] * arena / r, p[1] * arena / r];
            // drop the outward radial velocity at the wall
            let n = [p[0] / arena, p[1] / arena];
            let radial = v[0] * n[0] + v[1] * n[1];
            if radial > 0.0 {
                v[0] -= radial * n[0];
                v[1] -= radial * n[1];
            }
        }
        st.positions[i] = p;
        max_disp = max_disp.max((p[0] - old[0]).hypot(p[1] - old[1]));
    }
    st.iteration += 1;
    st.last_displacement = max_disp;
    if max_disp < params.tol {
        st.calm_steps += 1;
    } else {
        st.calm_steps = 0;
    }
    st.converged = st.calm_steps >= CALM_STEPS;
}

/// Steps until converged or `max_iter`.
pub fn run_to_convergence(cg: &CompoundGraph, mut st: LayoutState, params: &LayoutParams) -> LayoutState {
    while !st.converged && st.iteration < params.max_iter {
        step_in_place(cg, &mut st, params);
    }
    st
}

pub fn run_layout(cg: &CompoundGraph, seed: u64, params: &LayoutParams) -> LayoutState {
    run_to_convergence(cg, LayoutState::initial(cg, seed, params), params)
}

/// `{"nodes":[{"id","x","y","r","cardinality","parent"}],"edges":[{"u","v","w"}],"converged","iteration"}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutJson {
    pub nodes: Vec<LayoutNodeJson>,
    pub edges: Vec<LayoutEdgeJson>,
    pub converged: bool,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutNodeJson {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub cardinality: usize,
    pub parent: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutEdgeJson {
    pub u: NodeId,
    pub v: NodeId,
    pub w: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(cards: &[usize], edges: &[(usize, usize, f64)]) -> CompoundGraph {
        CompoundGraph {
            nodes: cards
                .iter()
                .enumerate()
                .map(|(i, &c)| CompoundNode { id: i + 1, cardinality: c, depth: 1, parent: Some(ROOT) })
                .collect(),
            edges: edges.iter().map(|&(u, v, weight)| CompoundEdge { u, v, weight }).collect(),
        }
    }

    #[test]
    fn radius_is_clamped() {
        let p = LayoutParams::default();
        assert_eq!(p.radius(1), 4.0);
        assert_eq!(p.radius(100), 20.0);
        assert_eq!(p.radius(1_000_000), 60.0);
    }

    #[test]
    fn single_node_stays_put() {
        let cg = graph(&[10], &[]);
        let p = LayoutParams::default();
        let init = LayoutState::initial(&cg, 3, &p);
        let st = run_layout(&cg, 3, &p);
        assert!(st.converged);
        assert!(st.iteration <= 5);
        assert_eq!(st.positions, init.positions);
    }

    #[test]
    fn unconnected_pair_separates_until_wall() {
        let cg = graph(&[4, 4], &[]);
        let p = LayoutParams::default();
        let mut st = LayoutState::with_positions(&cg, vec![[-1.0, 0.0], [1.0, 0.0]], &p);
        let arena = p.arena_radius(2);
        let mut prev = st.distance(0, 1);
        for _ in 0..5000 {
            step_in_place(&cg, &mut st, &p);
            let d = st.distance(0, 1);
            if d >= 2.0 * arena - 1e-9 {
                return;
            }
            assert!(d > prev, "separation must grow: {prev} -> {d}");
            prev = d;
        }
        panic!("never reached the arena wall");
    }

    #[test]
    fn coincident_nodes_are_pushed_apart() {
        let cg = graph(&[4, 4], &[]);
        let p = LayoutParams::default();
        let st = LayoutState::with_positions(&cg, vec![[0.0, 0.0], [0.0, 0.0]], &p);
        let next = step(&cg, &st, &p);
        assert!(next.distance(0, 1) > 0.0);
        assert!(next.positions.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn json_uses_community_ids() {
        let cg = graph(&[4, 9], &[(0, 1, 2.5)]);
        let p = LayoutParams::default();
        let st = LayoutState::initial(&cg, 0, &p);
        let j = st.to_json(&cg);
        assert_eq!(j.edges, vec![LayoutEdgeJson { u: 1, v: 2, w: 2.5 }]);
        assert_eq!(j.nodes[1].r, 6.0);
        assert_eq!(cg.weight_between(2, 1), 2.5);
    }
}
