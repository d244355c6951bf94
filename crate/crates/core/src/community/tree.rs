//! Hierarchical community tree edited by split and merge.
//!
//! The root covers every segment. Detection hangs one leaf per community off
//! the root; a split turns a leaf into an internal node with one child per
//! sub-community; a merge replaces a set of nodes with a single new leaf.
//! Leaf member sets always partition the segment ids.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::UndirectedWeightedGraph;
use super::louvain::louvain;
use super::CommunityError;
use crate::csng_graph::Csng;

pub type NodeId = usize;

pub const ROOT: NodeId = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Sorted segment ids; only leaves carry members.
    pub members: Vec<usize>,
    pub cardinality: usize,
    pub label: String,
    /// Collapsed internal nodes are shown as one unit in the graph view.
    pub collapsed: bool,
}

impl CommunityNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub resolution: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOptions {
    /// Accept parents that are not on one root path and attach the merged
    /// node at their lowest common ancestor.
    pub allow_lca_merge: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitOutcome {
    Split { children: Vec<NodeId> },
    /// Louvain found a single community (or no internal edges); tree unchanged.
    NoSplit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommunityTree {
    nodes: Vec<Option<CommunityNode>>,
    segment_leaf: Vec<NodeId>,
    generation: u64,
    params: DetectParams,
}

/// Runs Louvain on the symmetrized graph and builds root → one leaf per community.
pub fn detect(g: &Csng, resolution: f64, seed: u64) -> Result<CommunityTree, CommunityError> {
    if g.node_count == 0 {
        return Err(CommunityError::EmptyGraph);
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(CommunityError::InvalidResolution(resolution));
    }
    let communities = if g.node_count == 1 {
        vec![vec![0]]
    } else {
        let ug = UndirectedWeightedGraph::from_csng(g);
        louvain(&ug, resolution, seed)?.partition.communities()
    };
    Ok(CommunityTree::from_communities(g.node_count, communities, DetectParams { resolution, seed }))
}

fn sort_by_size(groups: &mut [Vec<usize>]) {
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
}

impl CommunityTree {
    /// Root plus one leaf per group, labelled by descending cardinality.
    pub fn from_communities(segment_count: usize, mut groups: Vec<Vec<usize>>, params: DetectParams) -> Self {
        sort_by_size(&mut groups);
        let mut tree = Self {
            nodes: vec![Some(CommunityNode {
                id: ROOT,
                parent: None,
                children: Vec::new(),
                members: Vec::new(),
                cardinality: segment_count,
                label: "root".into(),
                collapsed: false,
            })],
            segment_leaf: vec![ROOT; segment_count],
            generation: 0,
            params,
        };
        for (i, members) in groups.into_iter().enumerate() {
            tree.add_leaf(ROOT, members, i.to_string());
        }
        tree.refresh_cardinalities();
        tree
    }

    fn add_leaf(&mut self, parent: NodeId, mut members: Vec<usize>, label: String) -> NodeId {
        members.sort_unstable();
        let id = self.nodes.len();
        for &s in &members {
            self.segment_leaf[s] = id;
        }
        self.nodes.push(Some(CommunityNode {
            id,
            parent: Some(parent),
            children: Vec::new(),
            cardinality: members.len(),
            members,
            label,
            collapsed: false,
        }));
        self.node_mut(parent).children.push(id);
        id
    }

    fn node_mut(&mut self, id: NodeId) -> &mut CommunityNode {
        self.nodes[id].as_mut().expect("live node")
    }

    pub fn node(&self, id: NodeId) -> Result<&CommunityNode, CommunityError> {
        self.nodes
            .get(id)
            .and_then(Option::as_ref)
            .ok_or(CommunityError::UnknownId(id))
    }

    pub fn root(&self) -> &CommunityNode {
        self.nodes[ROOT].as_ref().expect("root always exists")
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CommunityNode> {
        self.nodes.iter().filter_map(Option::as_ref)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &CommunityNode> {
        self.nodes().filter(|n| n.is_leaf() && n.id != ROOT)
    }

    pub fn segment_count(&self) -> usize {
        self.segment_leaf.len()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn params(&self) -> DetectParams {
        self.params
    }

    pub fn depth(&self, id: NodeId) -> usize {
        let mut d = 0;
        let mut cur = self.nodes[id].as_ref().and_then(|n| n.parent);
        while let Some(p) = cur {
            d += 1;
            cur = self.nodes[p].as_ref().and_then(|n| n.parent);
        }
        d
    }

    /// The leaf containing `segment`.
    pub fn community_of(&self, segment: usize) -> Result<NodeId, CommunityError> {
        self.segment_leaf
            .get(segment)
            .copied()
            .ok_or(CommunityError::UnknownSegment(segment))
    }

    /// Leaf label of every segment, as dense integers in leaf order.
    pub fn leaf_assignment(&self) -> Vec<usize> {
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (i, leaf) in self.leaves().enumerate() {
            index[leaf.id] = i;
        }
        self.segment_leaf.iter().map(|&l| index[l]).collect()
    }

    /// All segment ids under `id`, sorted.
    pub fn members_of(&self, id: NodeId) -> Result<Vec<usize>, CommunityError> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        self.node(id)?;
        while let Some(n) = stack.pop() {
            let node = self.node(n)?;
            out.extend_from_slice(&node.members);
            stack.extend(node.children.iter().copied());
        }
        out.sort_unstable();
        Ok(out)
    }

    /// True if `a` is `b` or one of `b`'s ancestors.
    pub fn is_ancestor_or_self(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = Some(b);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.nodes[c].as_ref().and_then(|n| n.parent);
        }
        false
    }

    fn comparable(&self, a: NodeId, b: NodeId) -> bool {
        self.is_ancestor_or_self(a, b) || self.is_ancestor_or_self(b, a)
    }

    fn lowest_common_ancestor(&self, a: NodeId, b: NodeId) -> NodeId {
        let mut cur = Some(a);
        while let Some(c) = cur {
            if self.is_ancestor_or_self(c, b) {
                return c;
            }
            cur = self.nodes[c].as_ref().and_then(|n| n.parent);
        }
        ROOT
    }

    /// Re-runs Louvain on the subgraph induced by a leaf's members.
    pub fn split_node(&mut self, g: &Csng, id: NodeId, resolution: f64, seed: u64) -> Result<SplitOutcome, CommunityError> {
        if g.node_count != self.segment_count() {
            return Err(CommunityError::InconsistentTree(format!(
                "graph has {} nodes, tree covers {} segments",
                g.node_count,
                self.segment_count()
            )));
        }
        let node = self.node(id)?;
        if !node.is_leaf() || id == ROOT {
            return Err(CommunityError::NotALeaf(id));
        }
        if node.cardinality < 2 {
            return Err(CommunityError::SingletonNode(id));
        }
        let members = node.members.clone();
        let label = node.label.clone();
        let sub = UndirectedWeightedGraph::induced_from_csng(g, &members);
        let result = match louvain(&sub, resolution, seed) {
            Ok(r) => r,
            Err(CommunityError::ZeroWeightGraph) => return Ok(SplitOutcome::NoSplit),
            Err(e) => return Err(e),
        };
        if result.partition.community_count() < 2 {
            return Ok(SplitOutcome::NoSplit);
        }
        let mut groups: Vec<Vec<usize>> = result
            .partition
            .communities()
            .into_iter()
            .map(|c| c.into_iter().map(|local| members[local]).collect())
            .collect();
        sort_by_size(&mut groups);
        self.node_mut(id).members.clear();
        let children = groups
            .into_iter()
            .enumerate()
            .map(|(i, g)| self.add_leaf(id, g, format!("{label}.{i}")))
            .collect();
        self.refresh_cardinalities();
        self.generation += 1;
        Ok(SplitOutcome::Split { children })
    }

    /// Checks that `ids` may be merged; returns the node the merged leaf will hang from.
    pub fn merge_target(&self, ids: &[NodeId], opts: MergeOptions) -> Result<NodeId, CommunityError> {
        let set: BTreeSet<NodeId> = ids.iter().copied().collect();
        if set.len() < 2 {
            return Err(CommunityError::TooFewNodes);
        }
        for &id in &set {
            self.node(id)?;
            if id == ROOT {
                return Err(CommunityError::CannotMergeRoot);
            }
        }
        let parent = |id: NodeId| self.nodes[id].as_ref().and_then(|n| n.parent).unwrap_or(ROOT);
        let sorted: Vec<NodeId> = set.into_iter().collect();
        let mut target = parent(sorted[0]);
        for (i, &a) in sorted.iter().enumerate() {
            for &b in &sorted[i + 1..] {
                let (pa, pb) = (parent(a), parent(b));
                if !self.comparable(pa, pb) && !opts.allow_lca_merge {
                    return Err(CommunityError::NotMergeable { a, b, parent_a: pa, parent_b: pb });
                }
            }
            target = self.lowest_common_ancestor(target, parent(a));
        }
        Ok(target)
    }

    /// Replaces `ids` (and everything under them) with one new leaf.
    pub fn merge_nodes(&mut self, ids: &[NodeId], opts: MergeOptions) -> Result<NodeId, CommunityError> {
        let target = self.merge_target(ids, opts)?;
        let set: BTreeSet<NodeId> = ids.iter().copied().collect();
        let mut members = Vec::new();
        let mut labels = Vec::new();
        let mut former_parents = Vec::new();
        for &id in &set {
            if !self.nodes[id].is_some() {
                // already removed as a descendant of another selected node
                continue;
            }
            members.extend(self.members_of(id)?);
            labels.push(self.node(id)?.label.clone());
            let parent = self.node(id)?.parent.expect("non-root has a parent");
            self.node_mut(parent).children.retain(|&c| c != id);
            former_parents.push(parent);
            self.remove_subtree(id);
        }
        members.sort_unstable();
        members.dedup();
        let new_id = self.add_leaf(target, members, labels.join("+"));
        for p in former_parents {
            self.prune_upwards(p);
        }
        self.refresh_cardinalities();
        self.generation += 1;
        Ok(new_id)
    }

    fn remove_subtree(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if let Some(node) = self.nodes[n].take() {
                stack.extend(node.children);
            }
        }
    }

    /// Removes internal nodes left without children, walking towards the root.
    fn prune_upwards(&mut self, mut id: NodeId) {
        while id != ROOT {
            let Some(node) = self.nodes[id].as_ref() else { return };
            if !node.children.is_empty() || !node.members.is_empty() {
                return;
            }
            let parent = node.parent.expect("non-root has a parent");
            self.nodes[id] = None;
            self.node_mut(parent).children.retain(|&c| c != id);
            id = parent;
        }
    }

    fn refresh_cardinalities(&mut self) {
        fn visit(nodes: &mut [Option<CommunityNode>], id: NodeId) -> usize {
            let children = nodes[id].as_ref().expect("live node").children.clone();
            let mut total = nodes[id].as_ref().expect("live node").members.len();
            for c in children {
                total += visit(nodes, c);
            }
            nodes[id].as_mut().expect("live node").cardinality = total;
            total
        }
        visit(&mut self.nodes, ROOT);
    }

    pub fn set_collapsed(&mut self, id: NodeId, collapsed: bool) -> Result<(), CommunityError> {
        self.node(id)?;
        self.node_mut(id).collapsed = collapsed;
        Ok(())
    }

    /// Nodes shown in the graph view: leaves and collapsed internal nodes,
    /// reached without passing through a collapsed node.
    pub fn visible_nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.root().children.iter().rev().copied().collect();
        while let Some(id) = stack.pop() {
            let n = self.nodes[id].as_ref().expect("live node");
            if n.is_leaf() || n.collapsed {
                out.push(id);
            } else {
                stack.extend(n.children.iter().rev().copied());
            }
        }
        if out.is_empty() {
            out.push(ROOT);
        }
        out
    }

    /// Verifies the structural invariants; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), CommunityError> {
        let fail = |m: String| Err(CommunityError::InconsistentTree(m));
        let mut seen = vec![false; self.segment_count()];
        for n in self.nodes() {
            if n.id != ROOT {
                let Some(p) = n.parent else { return fail(format!("node {} has no parent", n.id)) };
                match self.nodes.get(p).and_then(Option::as_ref) {
                    Some(pn) if pn.children.contains(&n.id) => {}
                    _ => return fail(format!("node {} missing from parent {p}", n.id)),
                }
            }
            if n.is_leaf() {
                if n.id != ROOT && n.members.is_empty() {
                    return fail(format!("leaf {} is empty", n.id));
                }
                for &s in &n.members {
                    if s >= seen.len() || seen[s] {
                        return fail(format!("segment {s} duplicated or out of range"));
                    }
                    seen[s] = true;
                    if self.segment_leaf[s] != n.id {
                        return fail(format!("segment {s} index points at {}", self.segment_leaf[s]));
                    }
                }
                if n.cardinality != n.members.len() {
                    return fail(format!("leaf {} cardinality mismatch", n.id));
                }
            } else {
                if !n.members.is_empty() {
                    return fail(format!("internal node {} carries members", n.id));
                }
                let sum: usize = n.children.iter().map(|&c| self.nodes[c].as_ref().map_or(0, |c| c.cardinality)).sum();
                if sum != n.cardinality {
                    return fail(format!("internal node {} cardinality {} != {sum}", n.id, n.cardinality));
                }
            }
        }
        if let Some(s) = seen.iter().position(|s| !s) {
            if self.root().children.is_empty() && self.segment_count() == 0 {
                return Ok(());
            }
            return fail(format!("segment {s} is not covered by any leaf"));
        }
        Ok(())
    }

    // ---- JSON ----

    pub fn to_json(&self) -> CommunitiesJson {
        CommunitiesJson {
            tree: self
                .nodes()
                .map(|n| TreeNodeJson {
                    id: n.id,
                    parent: n.parent,
                    label: n.label.clone(),
                    children: n.children.clone(),
                    segments: n.is_leaf().then(|| n.members.clone()),
                })
                .collect(),
            params: self.params,
            generation: self.generation,
        }
    }

    pub fn from_json(doc: &CommunitiesJson) -> Result<Self, CommunityError> {
        let bad = |m: String| CommunityError::InconsistentTree(m);
        let max_id = doc.tree.iter().map(|n| n.id).max().ok_or_else(|| bad("empty tree".into()))?;
        let mut nodes: Vec<Option<CommunityNode>> = vec![None; max_id + 1];
        let mut segment_count = 0;
        for n in &doc.tree {
            if nodes[n.id].is_some() {
                return Err(bad(format!("duplicate node id {}", n.id)));
            }
            if (n.id == ROOT) != n.parent.is_none() {
                return Err(bad(format!("node {} must be the root exactly when it has no parent", n.id)));
            }
            let members = n.segments.clone().unwrap_or_default();
            segment_count += members.len();
            nodes[n.id] = Some(CommunityNode {
                id: n.id,
                parent: n.parent,
                children: n.children.clone(),
                cardinality: 0,
                members,
                label: n.label.clone(),
                collapsed: false,
            });
        }
        if nodes[ROOT].is_none() {
            return Err(bad("missing root".into()));
        }
        let mut segment_leaf = vec![usize::MAX; segment_count];
        for n in nodes.iter().flatten() {
            for c in &n.children {
                match nodes.get(*c).and_then(Option::as_ref) {
                    Some(child) if child.parent == Some(n.id) => {}
                    _ => return Err(bad(format!("child {c} of {} is inconsistent", n.id))),
                }
            }
            for &s in &n.members {
                if s >= segment_count || segment_leaf[s] != usize::MAX {
                    return Err(bad(format!("segment {s} out of range or duplicated")));
                }
                segment_leaf[s] = n.id;
            }
        }
        let mut tree = Self { nodes, segment_leaf, generation: doc.generation, params: doc.params };
        tree.refresh_cardinalities();
        tree.validate()?;
        Ok(tree)
    }
}

/// `{"tree":[{"id","parent","label","children","segments"}],"params":{..},"generation":n}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunitiesJson {
    pub tree: Vec<TreeNodeJson>,
    pub params: DetectParams,
    pub generation: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeJson {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub label: String,
    pub children: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<usize>>,
}
